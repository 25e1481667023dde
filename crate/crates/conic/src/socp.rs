//! Feasibility of complex second-order cone systems
//!
//! ```text
//! ‖A_k x + b_k‖ <= Re(c_k^H x) + d_k     for every cone k
//! Σ_{i ∈ g} |x_i|^2 <= P_g               for every power group g
//! ```
//!
//! decided through the phase-I program `min t` with the group budgets relaxed
//! to `‖x_g‖ <= sqrt(P_g) t`. The system is feasible exactly when `t* <= 1`,
//! and `t*` says how far the budgets would have to grow.

use crate::conelp::{solve_conelp, Column, ConeProgram, ConeSettings, ConeStatus};
use crate::cone::{ConeDims, ConeVec};
use crate::linalg::{CMat, CVec};
use crate::ConicError;

#[derive(Debug, Clone)]
pub struct ComplexSoc {
    pub a: CMat,
    pub b: CVec,
    pub c: CVec,
    pub d: f64,
}

#[derive(Debug, Clone)]
pub struct PowerGroup {
    pub indices: Vec<usize>,
    pub budget: f64,
}

#[derive(Debug, Clone)]
pub struct SocpFeasibilityProblem {
    pub dim: usize,
    pub cones: Vec<ComplexSoc>,
    pub groups: Vec<PowerGroup>,
}

#[derive(Debug, Clone)]
pub enum SocpOutcome {
    Feasible { x: CVec, power_scale: f64 },
    /// `power_scale` is `t*`, infinite when the cones cannot be met at any power.
    Infeasible { power_scale: f64 },
}

impl SocpOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SocpOutcome::Feasible { .. })
    }
}

fn validate(p: &SocpFeasibilityProblem) -> Result<(), ConicError> {
    for (k, cone) in p.cones.iter().enumerate() {
        if cone.a.ncols() != p.dim || cone.c.len() != p.dim || cone.a.nrows() != cone.b.len() {
            return Err(ConicError::Dimension(format!("cone {k} does not match dimension {}", p.dim)));
        }
        let finite = cone.a.iter().chain(cone.b.iter()).chain(cone.c.iter()).all(|z| z.re.is_finite() && z.im.is_finite())
            && cone.d.is_finite();
        if !finite {
            return Err(ConicError::NonFinite);
        }
    }
    for (g, grp) in p.groups.iter().enumerate() {
        if grp.indices.iter().any(|&i| i >= p.dim) {
            return Err(ConicError::Dimension(format!("power group {g} indexes past {}", p.dim)));
        }
        if !(grp.budget > 0.0 && grp.budget.is_finite()) {
            return Err(ConicError::Dimension(format!("power group {g} needs a positive budget")));
        }
    }
    Ok(())
}

/// Largest violation of the cone constraints at `x`, relative to the size of each cone's data.
pub fn cone_violation(p: &SocpFeasibilityProblem, x: &CVec) -> f64 {
    p.cones
        .iter()
        .map(|k| {
            let lhs = (&k.a * x + &k.b).norm();
            let rhs = k.c.dotc(x).re + k.d;
            let scale = 1.0 + k.d.abs() + k.b.norm() + k.a.norm() * x.norm() + k.c.norm() * x.norm();
            (lhs - rhs).max(0.0) / scale
        })
        .fold(0.0, f64::max)
}

/// Decide feasibility. Solver breakdowns are reported as errors, never as verdicts.
pub fn solve_socp_feasibility(p: &SocpFeasibilityProblem, feastol: f64) -> Result<SocpOutcome, ConicError> {
    validate(p)?;
    let n = p.dim;
    let t_idx = 2 * n;
    let mut dims = ConeDims { nonneg: 1, soc: Vec::new(), psd: Vec::new() };
    let mut cols: Vec<Column> = vec![Column::default(); 2 * n + 1];
    let mut h = Vec::new();

    // t >= 0
    cols[t_idx].lin.push((0, -1.0));
    h.push(0.0);

    for k in &p.cones {
        let start = h.len();
        let rows = k.a.nrows();
        dims.soc.push(1 + 2 * rows);
        h.push(k.d);
        for j in 0..n {
            cols[j].lin.push((start, -k.c[j].re));
            cols[n + j].lin.push((start, -k.c[j].im));
        }
        for r in 0..rows {
            h.push(k.b[r].re);
        }
        for r in 0..rows {
            h.push(k.b[r].im);
        }
        for j in 0..n {
            for r in 0..rows {
                let a = k.a[(r, j)];
                if a.re != 0.0 {
                    cols[j].lin.push((start + 1 + r, -a.re));
                    cols[n + j].lin.push((start + 1 + rows + r, -a.re));
                }
                if a.im != 0.0 {
                    cols[n + j].lin.push((start + 1 + r, a.im));
                    cols[j].lin.push((start + 1 + rows + r, -a.im));
                }
            }
        }
    }
    for g in &p.groups {
        let start = h.len();
        let len = g.indices.len();
        dims.soc.push(1 + 2 * len);
        h.extend(std::iter::repeat_n(0.0, 1 + 2 * len));
        cols[t_idx].lin.push((start, -g.budget.sqrt()));
        for (r, &i) in g.indices.iter().enumerate() {
            cols[i].lin.push((start + 1 + r, -1.0));
            cols[n + i].lin.push((start + 1 + len + r, -1.0));
        }
    }
    let mut c = vec![0.0; 2 * n + 1];
    c[t_idx] = 1.0;
    let prog = ConeProgram { dims, c, g: cols, h: ConeVec { lin: h, psd: Vec::new() } };
    let settings = ConeSettings { max_iter: 100, feastol, gaptol: feastol, ..ConeSettings::default() };
    let sol = solve_conelp(&prog, &settings)?;
    match sol.status {
        ConeStatus::Optimal | ConeStatus::OptimalInaccurate => {
            let t = sol.x[t_idx];
            let x = CVec::from_fn(n, |i, _| crate::C64::new(sol.x[i], sol.x[n + i]));
            if t <= 1.0 {
                if cone_violation(p, &x) > 1e-8 {
                    return Err(ConicError::NumericalFailure);
                }
                Ok(SocpOutcome::Feasible { x, power_scale: t })
            } else {
                Ok(SocpOutcome::Infeasible { power_scale: t })
            }
        }
        ConeStatus::PrimalInfeasible => Ok(SocpOutcome::Infeasible { power_scale: f64::INFINITY }),
        _ => Err(ConicError::NumericalFailure),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Single-user MRT: |h^H x|^2 >= γ σ^2 with ‖x‖^2 <= P is feasible iff γ <= P‖h‖^2/σ^2.
    fn mrt_problem(gamma: f64) -> SocpFeasibilityProblem {
        let h = CVec::from_vec(vec![c(1.0, 0.5), c(-0.2, 0.7)]);
        // ‖σ‖ <= Re(h^H x) / sqrt(γ)
        SocpFeasibilityProblem {
            dim: 2,
            cones: vec![ComplexSoc {
                a: CMat::zeros(1, 2),
                b: CVec::from_vec(vec![c(1.0, 0.0)]),
                c: h.scale(1.0 / gamma.sqrt()),
                d: 0.0,
            }],
            groups: vec![PowerGroup { indices: vec![0, 1], budget: 2.0 }],
        }
    }

    #[test]
    fn mrt_threshold_is_recovered() {
        let gmax = 2.0 * (1.25 + 0.53);
        assert!(solve_socp_feasibility(&mrt_problem(0.99 * gmax), 1e-9).unwrap().is_feasible());
        assert!(!solve_socp_feasibility(&mrt_problem(1.01 * gmax), 1e-9).unwrap().is_feasible());
        match solve_socp_feasibility(&mrt_problem(0.5 * gmax), 1e-9).unwrap() {
            SocpOutcome::Feasible { power_scale, .. } => assert!((power_scale - 0.5f64.sqrt()).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn impossible_cone_is_infeasible_at_any_power() {
        // ‖1‖ <= 0 · x
        let p = SocpFeasibilityProblem {
            dim: 1,
            cones: vec![ComplexSoc {
                a: CMat::zeros(1, 1),
                b: CVec::from_vec(vec![c(1.0, 0.0)]),
                c: CVec::zeros(1),
                d: 0.0,
            }],
            groups: vec![PowerGroup { indices: vec![0], budget: 1.0 }],
        };
        match solve_socp_feasibility(&p, 1e-9).unwrap() {
            SocpOutcome::Infeasible { power_scale } => assert!(power_scale.is_infinite()),
            other => panic!("{other:?}"),
        }
    }
}
