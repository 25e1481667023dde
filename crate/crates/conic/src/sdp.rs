//! Block semidefinite programs in standard form
//!
//! ```text
//! maximize    Σ_k Re Tr(C_k X_k)
//! subject to  Σ_k Re Tr(A_ik X_k)  (<=, =, >=)  b_i
//!             X_k ⪰ 0
//! ```
//!
//! with complex Hermitian or real symmetric blocks. Complex blocks are mapped
//! to real blocks of twice the size through `[[Re, -Im], [Im, Re]]` with all
//! data halved, which preserves every trace inner product. Inequalities get a
//! nonnegative slack. Rows are equilibrated before solving and the dual
//! variables are mapped back to the original rows.
//!
//! The dual reported here is
//!
//! ```text
//! minimize  Σ_i b_i y_i   subject to  S_k = Σ_i y_i A_ik - C_k ⪰ 0,
//!           y_i >= 0 for <= rows, y_i <= 0 for >= rows
//! ```

use std::io::Write;

use nalgebra::DMatrix;

use crate::cone::{ConeDims, ConeVec};
use crate::conelp::{solve_conelp, Column, ConeProgram, ConeSettings, ConeStatus, PsdTerm};
use crate::linalg::{
    embed_unchecked, embed_vector_pair, hermitian_defect, hermitize, min_eig_sym, trace_inner, unembed_symmetric, CMat,
    C64,
};
use crate::ConicError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockField {
    Complex,
    /// Real symmetric block. Coefficients are given as Hermitian matrices and
    /// only their real part is used.
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpec {
    pub dim: usize,
    pub field: BlockField,
}

/// Hermitian coefficient matrix.
#[derive(Debug, Clone)]
pub enum HermTerm {
    Dense(CMat),
    /// `Σ_k weights[k] v_k v_k^H`, `v_k` the columns of `vectors`.
    LowRank { vectors: CMat, weights: Vec<f64> },
}

impl HermTerm {
    pub fn rank_one(v: &crate::CVec, weight: f64) -> Self {
        HermTerm::LowRank { vectors: CMat::from_column_slice(v.len(), 1, v.as_slice()), weights: vec![weight] }
    }

    pub fn dim(&self) -> usize {
        match self {
            HermTerm::Dense(m) => m.nrows(),
            HermTerm::LowRank { vectors, .. } => vectors.nrows(),
        }
    }

    pub fn to_dense(&self) -> CMat {
        match self {
            HermTerm::Dense(m) => m.clone(),
            HermTerm::LowRank { vectors, weights } => {
                let mut scaled = vectors.clone();
                for (k, w) in weights.iter().enumerate() {
                    scaled.column_mut(k).scale_mut(*w);
                }
                scaled * vectors.adjoint()
            }
        }
    }

    /// `Re Tr(A X)`.
    pub fn inner(&self, x: &CMat) -> f64 {
        match self {
            HermTerm::Dense(m) => trace_inner(m, x),
            HermTerm::LowRank { vectors, weights } => {
                let xv = x * vectors;
                weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * vectors.column(k).dotc(&xv.column(k)).re)
                    .sum()
            }
        }
    }

    fn to_psd_term(&self, field: BlockField, scale: f64) -> PsdTerm {
        match (self, field) {
            (HermTerm::Dense(m), BlockField::Complex) => PsdTerm::Dense(embed_unchecked(m) * (0.5 * scale)),
            (HermTerm::Dense(m), BlockField::Real) => PsdTerm::Dense(m.map(|z| z.re) * scale),
            (HermTerm::LowRank { vectors, weights }, field) => {
                let n = vectors.nrows();
                let k = vectors.ncols();
                let (rows, ws) = match field {
                    BlockField::Complex => (2 * n, weights.iter().flat_map(|w| [0.5 * scale * w; 2]).collect()),
                    BlockField::Real => (n, weights.iter().flat_map(|w| [scale * w; 2]).collect::<Vec<_>>()),
                };
                let mut vecs = DMatrix::zeros(rows, 2 * k);
                for j in 0..k {
                    let col: Vec<C64> = vectors.column(j).iter().copied().collect();
                    match field {
                        BlockField::Complex => {
                            let (a, b) = embed_vector_pair(&col);
                            vecs.set_column(2 * j, &a);
                            vecs.set_column(2 * j + 1, &b);
                        }
                        BlockField::Real => {
                            for (i, z) in col.iter().enumerate() {
                                vecs[(i, 2 * j)] = z.re;
                                vecs[(i, 2 * j + 1)] = z.im;
                            }
                        }
                    }
                }
                PsdTerm::Factored { vecs, weights: ws }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct SdpConstraint {
    /// `(block index, coefficient)` pairs; blocks not listed have zero coefficient.
    pub terms: Vec<(usize, HermTerm)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub blocks: Vec<BlockSpec>,
    pub objective: Vec<(usize, HermTerm)>,
    pub constraints: Vec<SdpConstraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpTolerances {
    pub feastol: f64,
    pub gaptol: f64,
    pub max_iter: usize,
}

impl Default for SdpTolerances {
    fn default() -> Self {
        SdpTolerances { feastol: 1e-7, gaptol: 1e-7, max_iter: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverStatus {
    Optimal,
    /// Optimal within the tolerances loosened by `INACCURATE_FACTOR`, after
    /// the iteration stalled.
    OptimalInaccurate,
    Infeasible,
    /// The dual is infeasible: the maximisation is unbounded or ill-posed.
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

impl SolverStatus {
    /// Whether the returned point can be used as an optimum.
    pub fn is_optimal(&self) -> bool {
        matches!(self, SolverStatus::Optimal | SolverStatus::OptimalInaccurate)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::OptimalInaccurate => "optimal-inaccurate",
            SolverStatus::Infeasible => "infeasible",
            SolverStatus::Unbounded => "unbounded",
            SolverStatus::MaxIterations => "max-iters",
            SolverStatus::NumericalFailure => "numerical-failure",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolverStatus,
    pub primal_blocks: Vec<CMat>,
    pub dual_slacks: Vec<CMat>,
    /// `y_i` per constraint, in the sign convention of the module docs.
    pub dual_multipliers: Vec<f64>,
    /// For infeasible problems, `y` with `Σ y_i A_ik ⪰ 0`, sign-feasible, `b^T y = -1`.
    pub dual_ray: Option<Vec<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `dual_objective - primal_objective`.
    pub duality_gap: f64,
    /// `max_i violation_i / (1 + |b_i|)`, recomputed from the returned blocks.
    pub primal_residual: f64,
    /// `max_k max(0, -λ_min(S_k)) / (1 + ‖C‖_F)`, recomputed from the multipliers.
    pub dual_residual: f64,
    pub iterations: usize,
}

impl SdpSolution {
    /// Relative gap `|dual - primal| / (1 + |primal|)`.
    pub fn relative_gap(&self) -> f64 {
        self.duality_gap.abs() / (1.0 + self.primal_objective.abs())
    }
}

fn real_dim(b: &BlockSpec) -> usize {
    match b.field {
        BlockField::Complex => 2 * b.dim,
        BlockField::Real => b.dim,
    }
}

fn check_term(p: &SdpProblem, block: usize, t: &HermTerm, what: &str) -> Result<(), ConicError> {
    let Some(spec) = p.blocks.get(block) else {
        return Err(ConicError::Dimension(format!("{what}: block {block} does not exist")));
    };
    if t.dim() != spec.dim {
        return Err(ConicError::Dimension(format!(
            "{what}: block {block} has size {}, coefficient has {}",
            spec.dim,
            t.dim()
        )));
    }
    match t {
        HermTerm::Dense(m) => {
            if !m.is_square() {
                return Err(ConicError::Dimension(format!("{what}: coefficient is not square")));
            }
            if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(ConicError::NonFinite);
            }
            if spec.field == BlockField::Complex {
                let d = hermitian_defect(m);
                if d > 1e-9 {
                    return Err(ConicError::NotHermitian(d));
                }
            }
        }
        HermTerm::LowRank { vectors, weights } => {
            if weights.len() != vectors.ncols() {
                return Err(ConicError::Dimension(format!("{what}: weight count does not match vectors")));
            }
            if !vectors.iter().all(|z| z.re.is_finite() && z.im.is_finite()) || !weights.iter().all(|w| w.is_finite())
            {
                return Err(ConicError::NonFinite);
            }
        }
    }
    Ok(())
}

/// Squared Frobenius norm of the real image of `t` (before the 1/2 factor for complex blocks).
fn term_norm_sq(t: &HermTerm, field: BlockField) -> f64 {
    let m = match field {
        BlockField::Complex => t.to_dense(),
        BlockField::Real => t.to_dense().map(|z| C64::new(z.re, 0.0)),
    };
    let f = m.norm_squared();
    match field {
        BlockField::Complex => 0.5 * f,
        BlockField::Real => f,
    }
}

fn validate(p: &SdpProblem) -> Result<(), ConicError> {
    if p.blocks.iter().any(|b| b.dim == 0) {
        return Err(ConicError::Dimension("empty block".into()));
    }
    for (b, t) in &p.objective {
        check_term(p, *b, t, "objective")?;
    }
    for (i, c) in p.constraints.iter().enumerate() {
        if !c.rhs.is_finite() {
            return Err(ConicError::NonFinite);
        }
        for (b, t) in &c.terms {
            check_term(p, *b, t, &format!("constraint {i}"))?;
        }
    }
    Ok(())
}

/// Solve a block SDP with the in-tree interior-point method.
pub fn solve_sdp(p: &SdpProblem, tol: &SdpTolerances) -> Result<SdpSolution, ConicError> {
    validate(p)?;
    let m = p.constraints.len();
    let slack_of: Vec<Option<usize>> = {
        let mut k = 0;
        p.constraints
            .iter()
            .map(|c| {
                if c.sense == Sense::Eq {
                    None
                } else {
                    k += 1;
                    Some(k - 1)
                }
            })
            .collect()
    };
    let nslack = slack_of.iter().flatten().count();
    let dims = ConeDims { nonneg: nslack, soc: vec![], psd: p.blocks.iter().map(real_dim).collect() };

    // row equilibration and objective normalisation
    let row_scale: Vec<f64> = p
        .constraints
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let nrm: f64 = c.terms.iter().map(|(b, t)| term_norm_sq(t, p.blocks[*b].field)).sum::<f64>().sqrt();
            if nrm > 0.0 {
                Ok(1.0 / nrm)
            } else {
                Err(ConicError::Dimension(format!("constraint {i} has no nonzero coefficient")))
            }
        })
        .collect::<Result<_, _>>()?;
    let obj_norm: f64 = p.objective.iter().map(|(b, t)| term_norm_sq(t, p.blocks[*b].field)).sum::<f64>().sqrt();
    let cs = if obj_norm > 0.0 { obj_norm } else { 1.0 };

    let mut cols = Vec::with_capacity(m);
    let mut cvec = Vec::with_capacity(m);
    for (i, con) in p.constraints.iter().enumerate() {
        let d = row_scale[i];
        let mut col = Column::default();
        if let Some(k) = slack_of[i] {
            let eps = if con.sense == Sense::Le { 1.0 } else { -1.0 };
            col.lin.push((k, eps * d));
        }
        for (b, t) in &con.terms {
            col.psd.push((*b, t.to_psd_term(p.blocks[*b].field, d)));
        }
        cols.push(col);
        cvec.push(-con.rhs * d);
    }
    let mut h = ConeVec::zeros(&dims);
    for (b, t) in &p.objective {
        h.psd[*b] -= t.to_psd_term(p.blocks[*b].field, 1.0 / cs).to_dense();
    }

    let prog = ConeProgram { dims: dims.clone(), c: cvec, g: cols, h };
    // the cone solver sees the objective divided by `cs`; its gap test must
    // still hold in the caller's units
    let settings = ConeSettings { max_iter: tol.max_iter, feastol: tol.feastol, gaptol: tol.gaptol, gap_floor: 1.0 / cs };
    let sol = solve_conelp(&prog, &settings)?;

    let unpack = |v: &DMatrix<f64>, spec: &BlockSpec| -> CMat {
        match spec.field {
            BlockField::Complex => unembed_symmetric(v),
            BlockField::Real => v.map(|x| C64::new(0.5 * x, 0.0)) + v.transpose().map(|x| C64::new(0.5 * x, 0.0)),
        }
    };
    let status = match sol.status {
        ConeStatus::Optimal => SolverStatus::Optimal,
        ConeStatus::OptimalInaccurate => SolverStatus::OptimalInaccurate,
        ConeStatus::DualInfeasible => SolverStatus::Infeasible,
        ConeStatus::PrimalInfeasible => SolverStatus::Unbounded,
        ConeStatus::MaxIterations => SolverStatus::MaxIterations,
        ConeStatus::NumericalFailure => SolverStatus::NumericalFailure,
    };
    let primal_blocks: Vec<CMat> = sol.z.psd.iter().zip(&p.blocks).map(|(v, s)| unpack(v, s)).collect();
    let dual_slacks: Vec<CMat> = sol
        .s
        .psd
        .iter()
        .zip(&p.blocks)
        .map(|(v, s)| {
            let f = match s.field {
                BlockField::Complex => 2.0 * cs,
                BlockField::Real => cs,
            };
            unpack(v, s) * C64::new(f, 0.0)
        })
        .collect();

    let (y, dual_ray) = if status == SolverStatus::Infeasible {
        let ray: Vec<f64> = sol.x.iter().zip(&row_scale).map(|(x, d)| -x * d).collect();
        (vec![f64::NAN; m], Some(ray))
    } else {
        (sol.x.iter().zip(&row_scale).map(|(x, d)| -x * d * cs).collect(), None)
    };

    let primal_objective: f64 = p.objective.iter().map(|(b, t)| t.inner(&primal_blocks[*b])).sum();
    let dual_objective: f64 = p.constraints.iter().zip(&y).map(|(c, yi)| c.rhs * yi).sum();
    let primal_residual = p
        .constraints
        .iter()
        .map(|c| {
            let lhs: f64 = c.terms.iter().map(|(b, t)| t.inner(&primal_blocks[*b])).sum();
            let v = match c.sense {
                Sense::Le => (lhs - c.rhs).max(0.0),
                Sense::Ge => (c.rhs - lhs).max(0.0),
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            v / (1.0 + c.rhs.abs())
        })
        .fold(0.0, f64::max);
    let dual_residual = if status.is_optimal() {
        let c_norm: f64 = p.objective.iter().map(|(_, t)| t.to_dense().norm_squared()).sum::<f64>().sqrt();
        let mut worst: f64 = 0.0;
        for (k, spec) in p.blocks.iter().enumerate() {
            let mut s = CMat::zeros(spec.dim, spec.dim);
            for (b, t) in &p.objective {
                if *b == k {
                    s -= t.to_dense();
                }
            }
            for (c, yi) in p.constraints.iter().zip(&y) {
                for (b, t) in &c.terms {
                    if *b == k {
                        s += t.to_dense() * C64::new(*yi, 0.0);
                    }
                }
            }
            let lmin = match spec.field {
                BlockField::Complex => min_eig_sym(&embed_unchecked(&hermitize(&s))),
                BlockField::Real => min_eig_sym(&s.map(|z| z.re)),
            };
            worst = worst.max(-lmin);
        }
        worst / (1.0 + c_norm)
    } else {
        f64::NAN
    };

    Ok(SdpSolution {
        status,
        primal_blocks,
        dual_slacks,
        dual_multipliers: y,
        dual_ray,
        primal_objective,
        dual_objective,
        duality_gap: dual_objective - primal_objective,
        primal_residual,
        dual_residual,
        iterations: sol.iterations,
    })
}

/// Write `p` in SDPA sparse format. The instance is written as the SDPA dual
/// (`max <F0, Y>` s.t. `<F_i, Y> = c_i`), with complex blocks embedded and
/// inequality slacks collected in one trailing diagonal block.
pub fn write_sdpa<W: Write>(p: &SdpProblem, out: &mut W) -> std::io::Result<()> {
    let nslack = p.constraints.iter().filter(|c| c.sense != Sense::Eq).count();
    let mut sizes: Vec<i64> = p.blocks.iter().map(|b| real_dim(b) as i64).collect();
    if nslack > 0 {
        sizes.push(-(nslack as i64));
    }
    writeln!(out, "\"cfisac instance: {} constraints, {} blocks", p.constraints.len(), p.blocks.len())?;
    writeln!(out, "{}", p.constraints.len())?;
    writeln!(out, "{}", sizes.len())?;
    writeln!(out, "{}", sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" "))?;
    writeln!(out, "{}", p.constraints.iter().map(|c| format!("{:.17e}", c.rhs)).collect::<Vec<_>>().join(" "))?;
    let emit = |out: &mut W, mat: usize, terms: &[(usize, HermTerm)]| -> std::io::Result<()> {
        for (b, t) in terms {
            let dense = t.to_psd_term(p.blocks[*b].field, 1.0).to_dense();
            for j in 0..dense.ncols() {
                for i in 0..=j {
                    let v = dense[(i, j)];
                    if v != 0.0 {
                        writeln!(out, "{} {} {} {} {:.17e}", mat, b + 1, i + 1, j + 1, v)?;
                    }
                }
            }
        }
        Ok(())
    };
    emit(out, 0, &p.objective)?;
    let mut k = 0;
    for (i, c) in p.constraints.iter().enumerate() {
        emit(out, i + 1, &c.terms)?;
        if c.sense != Sense::Eq {
            let eps = if c.sense == Sense::Le { 1.0 } else { -1.0 };
            writeln!(out, "{} {} {} {} {:.1}", i + 1, p.blocks.len() + 1, k + 1, k + 1, eps)?;
            k += 1;
        }
    }
    Ok(())
}
