//! Primal-dual interior-point method for the cone program
//!
//! ```text
//! minimize    c^T x            maximize   -h^T z
//! subject to  G x + s = h      subject to G^T z + c = 0
//!             s ∈ K                       z ∈ K
//! ```
//!
//! solved through its homogeneous self-dual embedding with Nesterov-Todd
//! scaling and a Mehrotra predictor-corrector. Each Newton system is reduced
//! to the normal matrix `Ĝ^T Ĝ`, `Ĝ = W^{-T} G`, which is dense and small
//! (one row per variable) and is factored by Cholesky.
//!
//! Semidefinite coefficients can be given as factored sums `Σ w_k v_k v_k^T`;
//! the normal matrix is then assembled from `v_a^T v_b` products instead of
//! dense `n x n` blocks.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::cone::{jordan_prod, min_eigenvalue, ConeDims, ConeVec, Scaling};
use crate::ConicError;

/// Coefficient of one variable in one semidefinite block.
#[derive(Debug, Clone)]
pub enum PsdTerm {
    /// Dense symmetric matrix.
    Dense(DMatrix<f64>),
    /// `Σ_k weights[k] * v_k v_k^T` with `v_k` the columns of `vecs`.
    Factored { vecs: DMatrix<f64>, weights: Vec<f64> },
}

impl PsdTerm {
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            PsdTerm::Dense(m) => m.clone(),
            PsdTerm::Factored { vecs, weights } => {
                let mut scaled = vecs.clone();
                for (k, w) in weights.iter().enumerate() {
                    scaled.column_mut(k).scale_mut(*w);
                }
                scaled * vecs.transpose()
            }
        }
    }

    fn dim(&self) -> usize {
        match self {
            PsdTerm::Dense(m) => m.nrows(),
            PsdTerm::Factored { vecs, .. } => vecs.nrows(),
        }
    }
}

/// Column of `G` for one primal variable: sparse entries of the orthant and
/// second-order part, and coefficients in some of the semidefinite blocks.
#[derive(Debug, Clone, Default)]
pub struct Column {
    pub lin: Vec<(usize, f64)>,
    pub psd: Vec<(usize, PsdTerm)>,
}

#[derive(Debug, Clone)]
pub struct ConeProgram {
    pub dims: ConeDims,
    pub c: Vec<f64>,
    pub g: Vec<Column>,
    pub h: ConeVec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeSettings {
    pub max_iter: usize,
    /// Relative primal/dual residual target, also used for infeasibility certificates.
    pub feastol: f64,
    /// Duality gap target relative to `gap_floor + |c^T x|`.
    pub gaptol: f64,
    /// Lets a caller that scaled `c` keep the gap test in its own units: with
    /// `c` divided by `k`, a floor of `1 / k` reproduces `1 + |k c^T x|`.
    pub gap_floor: f64,
}

impl Default for ConeSettings {
    fn default() -> Self {
        ConeSettings { max_iter: 100, feastol: 1e-8, gaptol: 1e-8, gap_floor: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeStatus {
    Optimal,
    /// No `x` with `h - G x ∈ K`; `z` holds a certificate with `G^T z = 0`, `h^T z = -1`.
    PrimalInfeasible,
    /// Primal unbounded; `x`, `s` hold a ray with `G x + s = 0`, `c^T x = -1`.
    DualInfeasible,
    /// The iteration stalled, but an earlier iterate met the tolerances
    /// loosened by [`INACCURATE_FACTOR`]; that iterate is returned.
    OptimalInaccurate,
    MaxIterations,
    NumericalFailure,
}

/// Loosening applied to `feastol` and `gaptol` when accepting a stalled run.
pub const INACCURATE_FACTOR: f64 = 1e3;

#[derive(Debug, Clone)]
pub struct ConeSolution {
    pub status: ConeStatus,
    pub x: Vec<f64>,
    pub s: ConeVec,
    pub z: ConeVec,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `s^T z` at the returned point.
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
}

struct BlockOp {
    dense: Vec<(usize, DMatrix<f64>)>,
    fac_v: DMatrix<f64>,
    fac_w: Vec<f64>,
    fac_col: Vec<usize>,
}

/// `G` organised per cone block.
struct GOp {
    ncols: usize,
    lin: DMatrix<f64>,
    blocks: Vec<BlockOp>,
}

impl GOp {
    fn new(dims: &ConeDims, cols: &[Column]) -> Result<Self, ConicError> {
        let ncols = cols.len();
        let ll = dims.lin_len();
        let mut lin = DMatrix::zeros(ll, ncols);
        let mut parts: Vec<(Vec<(usize, DMatrix<f64>)>, Vec<DMatrix<f64>>, Vec<f64>, Vec<usize>)> =
            dims.psd.iter().map(|_| (Vec::new(), Vec::new(), Vec::new(), Vec::new())).collect();
        for (j, col) in cols.iter().enumerate() {
            for &(i, v) in &col.lin {
                if i >= ll {
                    return Err(ConicError::Dimension(format!("column {j}: linear index {i} >= {ll}")));
                }
                lin[(i, j)] += v;
            }
            for (b, term) in &col.psd {
                let Some(&n) = dims.psd.get(*b) else {
                    return Err(ConicError::Dimension(format!("column {j}: block {b} does not exist")));
                };
                if term.dim() != n {
                    return Err(ConicError::Dimension(format!(
                        "column {j}: block {b} has size {n}, term has {}",
                        term.dim()
                    )));
                }
                let p = &mut parts[*b];
                match term {
                    PsdTerm::Dense(m) => p.0.push((j, (m + m.transpose()) * 0.5)),
                    PsdTerm::Factored { vecs, weights } => {
                        if weights.len() != vecs.ncols() {
                            return Err(ConicError::Dimension(format!(
                                "column {j}: {} weights for {} vectors",
                                weights.len(),
                                vecs.ncols()
                            )));
                        }
                        p.1.push(vecs.clone());
                        p.2.extend_from_slice(weights);
                        p.3.extend(std::iter::repeat_n(j, weights.len()));
                    }
                }
            }
        }
        let blocks = parts
            .into_iter()
            .zip(&dims.psd)
            .map(|((dense, vs, fac_w, fac_col), &n)| {
                let k = fac_w.len();
                let mut fac_v = DMatrix::zeros(n, k);
                let mut at = 0;
                for v in vs {
                    fac_v.columns_mut(at, v.ncols()).copy_from(&v);
                    at += v.ncols();
                }
                BlockOp { dense, fac_v, fac_w, fac_col }
            })
            .collect();
        Ok(GOp { ncols, lin, blocks })
    }

    fn mul(&self, dims: &ConeDims, x: &[f64]) -> ConeVec {
        let lin = &self.lin * nalgebra::DVector::from_column_slice(x);
        let mut out = ConeVec { lin: lin.as_slice().to_vec(), psd: Vec::with_capacity(dims.psd.len()) };
        for (b, &n) in self.blocks.iter().zip(&dims.psd) {
            let mut acc = DMatrix::zeros(n, n);
            if !b.fac_w.is_empty() {
                let mut sv = b.fac_v.clone();
                for k in 0..b.fac_w.len() {
                    sv.column_mut(k).scale_mut(b.fac_w[k] * x[b.fac_col[k]]);
                }
                acc.gemm(1.0, &sv, &b.fac_v.transpose(), 0.0);
            }
            for (j, m) in &b.dense {
                acc += m * x[*j];
            }
            out.psd.push(acc);
        }
        out
    }

    fn tmul(&self, q: &ConeVec) -> Vec<f64> {
        let lq = nalgebra::DVector::from_column_slice(&q.lin);
        let mut out: Vec<f64> = (self.lin.transpose() * lq).as_slice().to_vec();
        for (b, qm) in self.blocks.iter().zip(&q.psd) {
            if !b.fac_w.is_empty() {
                let qv = qm * &b.fac_v;
                for k in 0..b.fac_w.len() {
                    out[b.fac_col[k]] += b.fac_w[k] * b.fac_v.column(k).dot(&qv.column(k));
                }
            }
            for (j, m) in &b.dense {
                out[*j] += m.dot(qm);
            }
        }
        out
    }

    fn gram(&self) -> DMatrix<f64> {
        let mut g = self.lin.transpose() * &self.lin;
        for b in &self.blocks {
            let kf = b.fac_w.len();
            if kf > 0 {
                let m = b.fac_v.transpose() * &b.fac_v;
                for a in 0..kf {
                    for c in 0..kf {
                        let v = b.fac_w[a] * b.fac_w[c] * m[(a, c)] * m[(a, c)];
                        g[(b.fac_col[a], b.fac_col[c])] += v;
                    }
                }
            }
            for (ii, (i, mi)) in b.dense.iter().enumerate() {
                for (j, mj) in &b.dense[ii..] {
                    let v = mi.dot(mj);
                    g[(*i, *j)] += v;
                    if i != j {
                        g[(*j, *i)] += v;
                    }
                }
                if kf > 0 {
                    let mv = mi * &b.fac_v;
                    for k in 0..kf {
                        let v = b.fac_w[k] * b.fac_v.column(k).dot(&mv.column(k));
                        g[(*i, b.fac_col[k])] += v;
                        g[(b.fac_col[k], *i)] += v;
                    }
                }
            }
        }
        g
    }

    /// `W^{-T} G`.
    fn scaled(&self, dims: &ConeDims, w: &Scaling) -> GOp {
        let mut lin = self.lin.clone();
        let mut buf = vec![0.0; lin.nrows()];
        for j in 0..self.ncols {
            buf.copy_from_slice(lin.column(j).as_slice());
            w.apply_lin(dims, &mut buf, true);
            lin.column_mut(j).copy_from_slice(&buf);
        }
        let blocks = self
            .blocks
            .iter()
            .zip(&w.psd)
            .map(|(b, sc)| BlockOp {
                dense: b.dense.iter().map(|(j, m)| (*j, &sc.rinv * m * sc.rinv.transpose())).collect(),
                fac_v: &sc.rinv * &b.fac_v,
                fac_w: b.fac_w.clone(),
                fac_col: b.fac_col.clone(),
            })
            .collect();
        GOp { ncols: self.ncols, lin, blocks }
    }
}

/// Factored reduced KKT system `[0 G^T; G -W^T W]` for one scaling.
struct Kkt {
    gs: GOp,
    normal: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl Kkt {
    fn factor(g: &GOp, dims: &ConeDims, w: &Scaling) -> Option<Kkt> {
        let gs = g.scaled(dims, w);
        let normal = gs.gram();
        let n = normal.nrows();
        if n == 0 {
            return Some(Kkt { gs, normal, chol: None });
        }
        let maxdiag = (0..n).map(|i| normal[(i, i)]).fold(0.0, f64::max).max(1e-300);
        let mut delta = 1e-14 * maxdiag;
        for _ in 0..8 {
            let mut reg = normal.clone();
            for i in 0..n {
                reg[(i, i)] += delta;
            }
            if let Some(ch) = reg.cholesky() {
                return Some(Kkt { gs, normal, chol: Some(ch) });
            }
            delta *= 100.0;
        }
        None
    }

    /// Solve `G^T z = bx`, `G x - W^T W z = bz`. Returns `x` and the scaled `W z`.
    fn solve(&self, dims: &ConeDims, w: &Scaling, bx: &[f64], bz: &ConeVec) -> (Vec<f64>, ConeVec) {
        let qh = w.apply_winvt(dims, bz);
        let mut rhs = self.gs.tmul(&qh);
        for (r, b) in rhs.iter_mut().zip(bx) {
            *r += b;
        }
        let x = match &self.chol {
            None => Vec::new(),
            Some(ch) => {
                let rv = nalgebra::DVector::from_column_slice(&rhs);
                let mut x = ch.solve(&rv);
                for _ in 0..2 {
                    let res = &rv - &self.normal * &x;
                    x += ch.solve(&res);
                }
                x.as_slice().to_vec()
            }
        };
        let mut wz = self.gs.mul(dims, &x);
        wz.axpy(-1.0, &qh);
        (x, wz)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn validate(p: &ConeProgram) -> Result<(), ConicError> {
    let d = &p.dims;
    if p.h.lin.len() != d.lin_len() || p.h.psd.len() != d.psd.len() {
        return Err(ConicError::Dimension("h does not match the cone dimensions".into()));
    }
    for (m, &n) in p.h.psd.iter().zip(&d.psd) {
        if m.nrows() != n || m.ncols() != n {
            return Err(ConicError::Dimension("h block has the wrong size".into()));
        }
    }
    if p.g.len() != p.c.len() {
        return Err(ConicError::Dimension(format!("{} columns for {} variables", p.g.len(), p.c.len())));
    }
    if d.soc.contains(&0) || d.psd.contains(&0) {
        return Err(ConicError::Dimension("empty cone".into()));
    }
    let finite = p.c.iter().all(|v| v.is_finite())
        && p.h.lin.iter().all(|v| v.is_finite())
        && p.h.psd.iter().all(|m| m.iter().all(|v| v.is_finite()));
    if !finite {
        return Err(ConicError::NonFinite);
    }
    Ok(())
}

fn shift_into_cone(dims: &ConeDims, v: &mut ConeVec) {
    let t = -min_eigenvalue(dims, v);
    if t >= -1e-8 * v.norm().max(1.0) {
        v.axpy(1.0 + t, &ConeVec::identity(dims));
    }
}

/// Run the interior-point method.
pub fn solve_conelp(prog: &ConeProgram, settings: &ConeSettings) -> Result<ConeSolution, ConicError> {
    validate(prog)?;
    let dims = &prog.dims;
    let n = prog.c.len();
    let c = &prog.c;
    let h = &prog.h;
    let g = GOp::new(dims, &prog.g)?;
    let nu = dims.degree() as f64;
    let resx0 = norm(c).max(1.0);
    let resz0 = h.norm().max(1.0);

    let failure = |x: Vec<f64>, s: ConeVec, z: ConeVec, it: usize| ConeSolution {
        status: ConeStatus::NumericalFailure,
        x,
        s,
        z,
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        gap: f64::NAN,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        iterations: it,
    };

    let w0 = Scaling::identity(dims);
    let Some(k0) = Kkt::factor(&g, dims, &w0) else {
        return Ok(failure(vec![0.0; n], ConeVec::zeros(dims), ConeVec::zeros(dims), 0));
    };
    let (mut x, zp) = k0.solve(dims, &w0, &vec![0.0; n], h);
    let mut s = zp.scaled(-1.0);
    let negc: Vec<f64> = c.iter().map(|v| -v).collect();
    let (_, mut z) = k0.solve(dims, &w0, &negc, &ConeVec::zeros(dims));
    shift_into_cone(dims, &mut s);
    shift_into_cone(dims, &mut z);
    let mut tau = 1.0;
    let mut kappa = 1.0;

    let Some(mut w) = Scaling::compute(dims, &s, &z) else {
        return Ok(failure(x, s, z, 0));
    };
    let e = ConeVec::identity(dims);

    // Iterate with the smallest worst-case ratio to the optimality tolerances.
    let mut best: Option<(f64, ConeSolution)> = None;
    let stalled = |best: Option<(f64, ConeSolution)>, fallback: ConeSolution| -> ConeSolution {
        match best {
            Some((score, mut sol)) if score <= INACCURATE_FACTOR => {
                sol.status = ConeStatus::OptimalInaccurate;
                sol
            }
            _ => fallback,
        }
    };

    for iter in 0..=settings.max_iter {
        let gx = g.mul(dims, &x);
        let gtz = g.tmul(&z);
        let rx: Vec<f64> = gtz.iter().zip(c).map(|(a, b)| a + tau * b).collect();
        let mut rz = s.clone();
        rz.axpy(1.0, &gx);
        rz.axpy(-tau, h);
        let cx = dot(c, &x);
        let hz = h.dot(&z);
        let rt = kappa + cx + hz;
        let gap = s.dot(&z);
        let mu = (gap + tau * kappa) / (nu + 1.0);
        let pcost = cx / tau;
        let dcost = -hz / tau;
        let pres = rz.norm() / tau / resz0;
        let dres = norm(&rx) / tau / resx0;
        let gap_tol = settings.gaptol * (settings.gap_floor + pcost.abs());
        let current = |status| ConeSolution {
            status,
            x: x.iter().map(|v| v / tau).collect(),
            s: s.scaled(1.0 / tau),
            z: z.scaled(1.0 / tau),
            primal_objective: pcost,
            dual_objective: dcost,
            gap: gap / (tau * tau),
            primal_residual: pres,
            dual_residual: dres,
            iterations: iter,
        };

        let score = (pres / settings.feastol)
            .max(dres / settings.feastol)
            .max(gap / (tau * tau) / gap_tol)
            .max((pcost - dcost).abs() / gap_tol);
        if score <= 1.0 {
            return Ok(current(ConeStatus::Optimal));
        }
        if score.is_finite() && best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, current(ConeStatus::Optimal)));
        }
        if hz < 0.0 && norm(&gtz) / resx0 / (-hz) <= settings.feastol {
            return Ok(ConeSolution {
                status: ConeStatus::PrimalInfeasible,
                x: vec![0.0; n],
                s: ConeVec::zeros(dims),
                z: z.scaled(1.0 / -hz),
                primal_objective: f64::INFINITY,
                dual_objective: f64::INFINITY,
                gap: f64::NAN,
                primal_residual: pres,
                dual_residual: dres,
                iterations: iter,
            });
        }
        if cx < 0.0 {
            let mut ray = gx.clone();
            ray.axpy(1.0, &s);
            if ray.norm() / resz0 / (-cx) <= settings.feastol {
                return Ok(ConeSolution {
                    status: ConeStatus::DualInfeasible,
                    x: x.iter().map(|v| v / -cx).collect(),
                    s: s.scaled(1.0 / -cx),
                    z: ConeVec::zeros(dims),
                    primal_objective: f64::NEG_INFINITY,
                    dual_objective: f64::NEG_INFINITY,
                    gap: f64::NAN,
                    primal_residual: pres,
                    dual_residual: dres,
                    iterations: iter,
                });
            }
        }
        if iter == settings.max_iter {
            return Ok(stalled(best, current(ConeStatus::MaxIterations)));
        }

        let Some(kkt) = Kkt::factor(&g, dims, &w) else {
            return Ok(stalled(best, failure(x, s, z, iter)));
        };
        let whq = w.apply_winvt(dims, h);
        let (x1, dz1) = kkt.solve(dims, &w, &negc, h);
        let denom = dot(c, &x1) + whq.dot(&dz1) - kappa / tau;
        let lam = w.lambda.clone();
        let lamsq = jordan_prod(dims, &lam, &lam);

        let mut sigma = 0.0;
        let mut pred: Option<(ConeVec, ConeVec, f64, f64)> = None;
        let mut step = None;
        for corrector in [false, true] {
            let mut rc = lamsq.scaled(-1.0);
            let mut rk = -tau * kappa;
            if corrector {
                let (ds_a, dz_a, dt_a, dk_a) = pred.as_ref().unwrap();
                rc.axpy(sigma * mu, &e);
                rc.axpy(-1.0, &jordan_prod(dims, ds_a, dz_a));
                rk += sigma * mu - dt_a * dk_a;
            }
            let eta = 1.0 - sigma;
            let d = w.lambda_solve(dims, &rc);
            let bx: Vec<f64> = rx.iter().map(|v| -eta * v).collect();
            let mut bz = rz.scaled(-eta);
            bz.axpy(-1.0, &w.apply_wt(dims, &d));
            let bt = -eta * rt - rk / tau;
            let (x2, dz2) = kkt.solve(dims, &w, &bx, &bz);
            let dtau = (bt - dot(c, &x2) - whq.dot(&dz2)) / denom;
            let dx: Vec<f64> = x2.iter().zip(&x1).map(|(a, b)| a + dtau * b).collect();
            let mut dz = dz2;
            dz.axpy(dtau, &dz1);
            let ds = d.sub(&dz);
            let dkappa = (rk - kappa * dtau) / tau;

            let mut amax = w.max_step(dims, &ds).min(w.max_step(dims, &dz));
            if dtau < 0.0 {
                amax = amax.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                amax = amax.min(-kappa / dkappa);
            }
            if amax.is_nan() {
                return Ok(stalled(best, failure(x, s, z, iter)));
            }
            if corrector {
                step = Some(((0.99 * amax).min(1.0), dx, ds, dz, dtau, dkappa));
            } else {
                let a = amax.min(1.0);
                sigma = (1.0 - a).powi(3);
                pred = Some((ds, dz, dtau, dkappa));
            }
        }
        let (alpha, dx, ds, dz, dtau, dkappa) = step.unwrap();
        if !(alpha > 1e-14) {
            return Ok(stalled(best, failure(x, s, z, iter)));
        }
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += alpha * d;
        }
        tau += alpha * dtau;
        kappa += alpha * dkappa;
        let mut st = lam.clone();
        st.axpy(alpha, &ds);
        let mut zt = lam;
        zt.axpy(alpha, &dz);
        s = w.apply_wt(dims, &st);
        z = w.apply_winv(dims, &zt);
        if w.update(dims, &s, &z, &st, &zt).is_none() {
            return Ok(stalled(best, failure(x, s, z, iter)));
        }
    }
    unreachable!("loop returns at max_iter")
}
