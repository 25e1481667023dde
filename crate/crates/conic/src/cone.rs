//! Product cones `R^l_+ x SOC x ... x S^n_+ x ...` and their Jordan algebra.
//!
//! Vectors of the product space keep the orthant and second-order parts in one
//! flat `lin` buffer (orthant first, then each second-order cone in order) and
//! the semidefinite parts as dense symmetric matrices. The inner product is the
//! dot product on `lin` plus the trace inner product on each matrix block.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{jacobi_svd, min_eig_sym};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConeDims {
    pub nonneg: usize,
    pub soc: Vec<usize>,
    pub psd: Vec<usize>,
}

impl ConeDims {
    pub fn lin_len(&self) -> usize {
        self.nonneg + self.soc.iter().sum::<usize>()
    }

    /// Barrier degree: one per orthant coordinate and second-order cone, `n` per `n x n` block.
    pub fn degree(&self) -> usize {
        self.nonneg + self.soc.len() + self.psd.iter().sum::<usize>()
    }

    pub(crate) fn soc_ranges(&self) -> Vec<Range<usize>> {
        let mut start = self.nonneg;
        self.soc
            .iter()
            .map(|&m| {
                let r = start..start + m;
                start += m;
                r
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeVec {
    pub lin: Vec<f64>,
    pub psd: Vec<DMatrix<f64>>,
}

impl ConeVec {
    pub fn zeros(dims: &ConeDims) -> Self {
        ConeVec {
            lin: vec![0.0; dims.lin_len()],
            psd: dims.psd.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
        }
    }

    /// Identity element `e` of the Jordan algebra.
    pub fn identity(dims: &ConeDims) -> Self {
        let mut e = ConeVec::zeros(dims);
        e.lin[..dims.nonneg].iter_mut().for_each(|v| *v = 1.0);
        for r in dims.soc_ranges() {
            e.lin[r.start] = 1.0;
        }
        e.psd = dims.psd.iter().map(|&n| DMatrix::identity(n, n)).collect();
        e
    }

    pub fn dot(&self, other: &ConeVec) -> f64 {
        let lin: f64 = self.lin.iter().zip(&other.lin).map(|(a, b)| a * b).sum();
        lin + self.psd.iter().zip(&other.psd).map(|(a, b)| a.dot(b)).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: f64, x: &ConeVec) {
        for (a, b) in self.lin.iter_mut().zip(&x.lin) {
            *a += alpha * b;
        }
        for (a, b) in self.psd.iter_mut().zip(&x.psd) {
            *a += b * alpha;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.lin.iter_mut().for_each(|v| *v *= alpha);
        self.psd.iter_mut().for_each(|m| *m *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> ConeVec {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    pub fn sub(&self, other: &ConeVec) -> ConeVec {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}

fn jnorm(x: &[f64]) -> f64 {
    let tail: f64 = x[1..].iter().map(|v| v * v).sum();
    ((x[0] - tail.sqrt()) * (x[0] + tail.sqrt())).max(0.0).sqrt()
}

/// Smallest eigenvalue of `x` across all cones. Positive iff `x` is interior.
pub fn min_eigenvalue(dims: &ConeDims, x: &ConeVec) -> f64 {
    let mut m = f64::INFINITY;
    for v in &x.lin[..dims.nonneg] {
        m = m.min(*v);
    }
    for r in dims.soc_ranges() {
        let s = &x.lin[r];
        let tail: f64 = s[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        m = m.min(s[0] - tail);
    }
    for b in &x.psd {
        m = m.min(min_eig_sym(b));
    }
    m
}

/// Jordan product `u ∘ v`.
pub fn jordan_prod(dims: &ConeDims, u: &ConeVec, v: &ConeVec) -> ConeVec {
    let mut out = ConeVec::zeros(dims);
    for i in 0..dims.nonneg {
        out.lin[i] = u.lin[i] * v.lin[i];
    }
    for r in dims.soc_ranges() {
        let (a, b) = (&u.lin[r.clone()], &v.lin[r.clone()]);
        let o = &mut out.lin[r];
        o[0] = a.iter().zip(b).map(|(x, y)| x * y).sum();
        for k in 1..a.len() {
            o[k] = a[0] * b[k] + b[0] * a[k];
        }
    }
    for (k, (a, b)) in u.psd.iter().zip(&v.psd).enumerate() {
        let ab = a * b;
        out.psd[k] = (&ab + ab.transpose()) * 0.5;
    }
    out
}

/// NT scaling for one second-order cone: `W = beta (2 v v^T - J)` with `v^T J v = 1`.
#[derive(Debug, Clone)]
pub(crate) struct SocScaling {
    beta: f64,
    v: Vec<f64>,
}

/// NT scaling for one semidefinite block: `W(X) = r^T X r`.
#[derive(Debug, Clone)]
pub(crate) struct PsdScaling {
    pub(crate) r: DMatrix<f64>,
    pub(crate) rinv: DMatrix<f64>,
}

/// Nesterov-Todd scaling `W` with `λ = W z = W^{-T} s`, plus the scaled point `λ`.
#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    d: Vec<f64>,
    soc: Vec<SocScaling>,
    pub(crate) psd: Vec<PsdScaling>,
    pub(crate) lambda: ConeVec,
    /// Diagonal of each (diagonal) semidefinite block of `lambda`.
    lambda_diag: Vec<Vec<f64>>,
}

fn soc_scaling(s: &[f64], z: &[f64]) -> Option<(SocScaling, Vec<f64>)> {
    let a = jnorm(s);
    let b = jnorm(z);
    if !(a > 0.0 && b > 0.0) {
        return None;
    }
    let m = s.len();
    let sz: f64 = s.iter().zip(z).map(|(x, y)| x * y).sum();
    let cc = ((sz / a / b + 1.0) / 2.0).sqrt();
    let mut w: Vec<f64> = (0..m)
        .map(|k| {
            let zj = if k == 0 { z[0] } else { -z[k] };
            (s[k] / a + zj / b) / (2.0 * cc)
        })
        .collect();
    w[0] += 1.0;
    let nv = (2.0 * w[0]).sqrt();
    w.iter_mut().for_each(|x| *x /= nv);
    let dd = 2.0 * cc + s[0] / a + z[0] / b;
    let sab = (a * b).sqrt();
    let mut lam = vec![0.0; m];
    lam[0] = cc * sab;
    let cs = (cc + z[0] / b) / dd / a;
    let cz = (cc + s[0] / a) / dd / b;
    for k in 1..m {
        lam[k] = sab * (cs * s[k] + cz * z[k]);
    }
    Some((SocScaling { beta: (a / b).sqrt(), v: w }, lam))
}

/// `r` with `r^T z r = r^{-1} s r^{-T} = diag(λ)`.
fn psd_scaling(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<(PsdScaling, Vec<f64>)> {
    let ls = s.clone().cholesky()?.l();
    let lz = z.clone().cholesky()?.l();
    let prod = lz.transpose() * &ls;
    let (u, sv, v) = jacobi_svd(&prod)?;
    if sv.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return None;
    }
    let n = sv.len();
    let isq = DVector::from_iterator(n, sv.iter().map(|x| 1.0 / x.sqrt()));
    // r = Ls V Λ^{-1/2},  r^{-1} = Λ^{-1/2} U^T Lz^T
    let mut r = ls * v;
    for j in 0..n {
        r.column_mut(j).scale_mut(isq[j]);
    }
    let mut rinv = u.transpose() * lz.transpose();
    for i in 0..n {
        rinv.row_mut(i).scale_mut(isq[i]);
    }
    Some((PsdScaling { r, rinv }, sv))
}

impl Scaling {
    pub(crate) fn identity(dims: &ConeDims) -> Self {
        Scaling {
            d: vec![1.0; dims.nonneg],
            soc: dims
                .soc
                .iter()
                .map(|&m| {
                    // v = e gives 2 e e^T - J = I
                    let mut v = vec![0.0; m];
                    v[0] = 1.0;
                    SocScaling { beta: 1.0, v }
                })
                .collect(),
            psd: dims
                .psd
                .iter()
                .map(|&n| PsdScaling { r: DMatrix::identity(n, n), rinv: DMatrix::identity(n, n) })
                .collect(),
            lambda: ConeVec::identity(dims),
            lambda_diag: dims.psd.iter().map(|&n| vec![1.0; n]).collect(),
        }
    }

    /// Scaling at an interior pair `(s, z)`. `None` when either leaves the interior.
    pub(crate) fn compute(dims: &ConeDims, s: &ConeVec, z: &ConeVec) -> Option<Self> {
        let mut lambda = ConeVec::zeros(dims);
        let mut d = Vec::with_capacity(dims.nonneg);
        for i in 0..dims.nonneg {
            if !(s.lin[i] > 0.0 && z.lin[i] > 0.0) {
                return None;
            }
            d.push((s.lin[i] / z.lin[i]).sqrt());
            lambda.lin[i] = (s.lin[i] * z.lin[i]).sqrt();
        }
        let mut soc = Vec::with_capacity(dims.soc.len());
        for r in dims.soc_ranges() {
            let (w, lam) = soc_scaling(&s.lin[r.clone()], &z.lin[r.clone()])?;
            lambda.lin[r].copy_from_slice(&lam);
            soc.push(w);
        }
        let mut psd = Vec::with_capacity(dims.psd.len());
        let mut lambda_diag = Vec::with_capacity(dims.psd.len());
        for (k, (sb, zb)) in s.psd.iter().zip(&z.psd).enumerate() {
            let (w, sv) = psd_scaling(sb, zb)?;
            lambda.psd[k] = DMatrix::from_diagonal(&DVector::from_column_slice(&sv));
            lambda_diag.push(sv);
            psd.push(w);
        }
        Some(Scaling { d, soc, psd, lambda, lambda_diag })
    }

    /// Rescale after a step. `s`, `z` are the new unscaled iterates and
    /// `s_t`, `z_t` the same points expressed in the current scaled frame.
    /// Semidefinite blocks are updated by composition, which avoids refactoring
    /// ill-conditioned unscaled matrices near the boundary.
    pub(crate) fn update(
        &mut self,
        dims: &ConeDims,
        s: &ConeVec,
        z: &ConeVec,
        s_t: &ConeVec,
        z_t: &ConeVec,
    ) -> Option<()> {
        for i in 0..dims.nonneg {
            if !(s_t.lin[i] > 0.0 && z_t.lin[i] > 0.0) {
                return None;
            }
            self.d[i] *= (s_t.lin[i] / z_t.lin[i]).sqrt();
            self.lambda.lin[i] = (s_t.lin[i] * z_t.lin[i]).sqrt();
        }
        for (k, r) in dims.soc_ranges().into_iter().enumerate() {
            let (w, lam) = soc_scaling(&s.lin[r.clone()], &z.lin[r.clone()])?;
            self.lambda.lin[r].copy_from_slice(&lam);
            self.soc[k] = w;
        }
        for k in 0..dims.psd.len() {
            let (w, sv) = psd_scaling(&s_t.psd[k], &z_t.psd[k])?;
            let r = &self.psd[k].r * &w.r;
            let rinv = &w.rinv * &self.psd[k].rinv;
            self.psd[k] = PsdScaling { r, rinv };
            self.lambda.psd[k] = DMatrix::from_diagonal(&DVector::from_column_slice(&sv));
            self.lambda_diag[k] = sv;
        }
        Some(())
    }

    fn soc_apply(w: &SocScaling, x: &mut [f64], inverse: bool) {
        // W x = beta (2 v (v^T x) - J x);  W^{-1} x = (1/beta)(2 J v (v^T J x) - J x)
        let v = &w.v;
        if !inverse {
            let vx: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            x[0] = w.beta * (2.0 * v[0] * vx - x[0]);
            for k in 1..x.len() {
                x[k] = w.beta * (2.0 * v[k] * vx + x[k]);
            }
        } else {
            let vjx: f64 = v[0] * x[0] - v[1..].iter().zip(&x[1..]).map(|(a, b)| a * b).sum::<f64>();
            x[0] = (2.0 * v[0] * vjx - x[0]) / w.beta;
            for k in 1..x.len() {
                x[k] = (-2.0 * v[k] * vjx + x[k]) / w.beta;
            }
        }
    }

    /// Apply the `lin` part of `W` (`inverse = false`) or `W^{-1}` (`true`)
    /// to a flat buffer. Both are symmetric on the orthant and second-order parts.
    pub(crate) fn apply_lin(&self, dims: &ConeDims, x: &mut [f64], inverse: bool) {
        for i in 0..dims.nonneg {
            if inverse {
                x[i] /= self.d[i];
            } else {
                x[i] *= self.d[i];
            }
        }
        for (k, r) in dims.soc_ranges().into_iter().enumerate() {
            Self::soc_apply(&self.soc[k], &mut x[r], inverse);
        }
    }

    /// `W x`. The solver only needs the transposed and inverse forms.
    #[cfg(test)]
    pub(crate) fn apply_w(&self, dims: &ConeDims, x: &ConeVec) -> ConeVec {
        let mut out = x.clone();
        self.apply_lin(dims, &mut out.lin, false);
        for (k, w) in self.psd.iter().enumerate() {
            out.psd[k] = w.r.transpose() * &x.psd[k] * &w.r;
        }
        out
    }

    /// `W^T x`.
    pub(crate) fn apply_wt(&self, dims: &ConeDims, x: &ConeVec) -> ConeVec {
        let mut out = x.clone();
        self.apply_lin(dims, &mut out.lin, false);
        for (k, w) in self.psd.iter().enumerate() {
            out.psd[k] = &w.r * &x.psd[k] * w.r.transpose();
        }
        out
    }

    /// `W^{-1} x`.
    pub(crate) fn apply_winv(&self, dims: &ConeDims, x: &ConeVec) -> ConeVec {
        let mut out = x.clone();
        self.apply_lin(dims, &mut out.lin, true);
        for (k, w) in self.psd.iter().enumerate() {
            out.psd[k] = w.rinv.transpose() * &x.psd[k] * &w.rinv;
        }
        out
    }

    /// `W^{-T} x`.
    pub(crate) fn apply_winvt(&self, dims: &ConeDims, x: &ConeVec) -> ConeVec {
        let mut out = x.clone();
        self.apply_lin(dims, &mut out.lin, true);
        for (k, w) in self.psd.iter().enumerate() {
            out.psd[k] = &w.rinv * &x.psd[k] * w.rinv.transpose();
        }
        out
    }

    /// `λ \ r`: the solution `u` of `λ ∘ u = r`.
    pub(crate) fn lambda_solve(&self, dims: &ConeDims, r: &ConeVec) -> ConeVec {
        let lam = &self.lambda;
        let mut out = ConeVec::zeros(dims);
        for i in 0..dims.nonneg {
            out.lin[i] = r.lin[i] / lam.lin[i];
        }
        for rg in dims.soc_ranges() {
            let l = &lam.lin[rg.clone()];
            let x = &r.lin[rg.clone()];
            let l1x1: f64 = l[1..].iter().zip(&x[1..]).map(|(a, b)| a * b).sum();
            let l1sq: f64 = l[1..].iter().map(|a| a * a).sum();
            let u0 = (l[0] * x[0] - l1x1) / ((l[0] - l1sq.sqrt()) * (l[0] + l1sq.sqrt()));
            let o = &mut out.lin[rg];
            o[0] = u0;
            for k in 1..l.len() {
                o[k] = (x[k] - u0 * l[k]) / l[0];
            }
        }
        for (k, diag) in self.lambda_diag.iter().enumerate() {
            let n = diag.len();
            out.psd[k] = DMatrix::from_fn(n, n, |i, j| 2.0 * r.psd[k][(i, j)] / (diag[i] + diag[j]));
        }
        out
    }

    /// Largest `α >= 0` with `λ + α d` in the cone (`+inf` if unbounded).
    pub(crate) fn max_step(&self, dims: &ConeDims, d: &ConeVec) -> f64 {
        let lam = &self.lambda;
        let mut alpha = f64::INFINITY;
        for i in 0..dims.nonneg {
            if d.lin[i] < 0.0 {
                alpha = alpha.min(-lam.lin[i] / d.lin[i]);
            }
        }
        for rg in dims.soc_ranges() {
            alpha = alpha.min(soc_max_step(&lam.lin[rg.clone()], &d.lin[rg]));
        }
        for (k, diag) in self.lambda_diag.iter().enumerate() {
            let n = diag.len();
            let m = DMatrix::from_fn(n, n, |i, j| d.psd[k][(i, j)] / (diag[i] * diag[j]).sqrt());
            let lmin = min_eig_sym(&m);
            if lmin < 0.0 {
                alpha = alpha.min(-1.0 / lmin);
            }
        }
        alpha
    }
}

/// Largest `α` keeping `l + α u` in the second-order cone, for interior `l`.
fn soc_max_step(l: &[f64], u: &[f64]) -> f64 {
    // (l0 + α u0)^2 - ‖l1 + α u1‖^2 = c + 2 b α + a α^2 >= 0, with l0 + α u0 >= 0
    let a = u[0] * u[0] - u[1..].iter().map(|x| x * x).sum::<f64>();
    let b = l[0] * u[0] - l[1..].iter().zip(&u[1..]).map(|(x, y)| x * y).sum::<f64>();
    let c = {
        let t = l[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
        (l[0] - t) * (l[0] + t)
    };
    let mut alpha = f64::INFINITY;
    if u[0] < 0.0 {
        alpha = -l[0] / u[0];
    }
    let disc = b * b - a * c;
    if a == 0.0 {
        if b < 0.0 {
            alpha = alpha.min(-c / (2.0 * b));
        }
        return alpha;
    }
    if disc < 0.0 {
        // no real root: sign of the quadratic is the sign of a (= sign of c > 0)
        return alpha;
    }
    let sq = disc.sqrt();
    // roots of a α^2 + 2 b α + c, computed without cancellation
    let q = -(b + b.signum() * sq);
    let (r1, r2) = if q != 0.0 { (q / a, c / q) } else { (f64::INFINITY, f64::INFINITY) };
    for r in [r1, r2] {
        if r > 0.0 {
            alpha = alpha.min(r);
        }
    }
    alpha
}
