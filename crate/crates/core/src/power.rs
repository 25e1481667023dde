//! Power allocation over fixed unit-norm beams.
//!
//! With `f_{ms} = sqrt(p_{ms}) f̄_{ms}` and `‖f̄_{ms}‖ = 1`, everything depends
//! on the beams only through the gains `ρ_{mus} = h_{mu}^H f̄_{ms}` and
//! `ϱ_{ms} = ζ̄_m |a^H(θ_m) f̄_{ms}|²`. Stacking `p_s = [sqrt(p_{1s}), ...]` and
//! lifting `P_s = p_s p_s^T` gives a real SDP whose relaxation bounds every
//! allocation for these beams. `P_s` is real, so only `Re(ρ_{us} ρ_{us}^H)`
//! enters; the phases of the gains stay with the fixed beam directions.

use cfisac_conic::{
    hermitian_eig, solve_sdp, BlockField, BlockSpec, CMat, CVec, HermTerm, SdpConstraint, SdpProblem, SdpTolerances,
    Sense, SolverStatus, C64,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::model::{BeamMatrixSet, BeamSet, ChannelSet, Scenario};
use crate::CoreError;

#[derive(Debug, Clone)]
pub struct EffectiveGains {
    /// `ρ_{us}` indexed `[u][s]`, one entry per AP.
    pub comm: Vec<Vec<CVec>>,
    /// `ϱ_s` indexed `[s][m]`.
    pub sensing: Vec<Vec<f64>>,
    pub noise: Vec<f64>,
    pub n_users: usize,
}

impl EffectiveGains {
    pub fn n_streams(&self) -> usize {
        self.sensing.len()
    }

    pub fn n_aps(&self) -> usize {
        self.sensing.first().map_or(0, |s| s.len())
    }
}

/// Gains of `unit_beams`, whose every per-AP block must have unit norm.
pub fn effective_gains(
    scenario: &Scenario,
    channels: &ChannelSet,
    unit_beams: &BeamSet,
) -> Result<EffectiveGains, CoreError> {
    channels.check(scenario)?;
    if unit_beams.dim() != scenario.stacked_dim() || unit_beams.n_users != scenario.n_ues() {
        return Err(CoreError::Dimension("unit beams do not match the scenario".into()));
    }
    let nt = scenario.n_tx_antennas;
    let mt = scenario.n_tx_aps();
    for s in 0..unit_beams.n_streams() {
        for m in 0..mt {
            if (unit_beams.block(s, m).norm() - 1.0).abs() > 1e-9 {
                return Err(CoreError::NonUnitBeam { stream: s, ap: m });
            }
        }
    }
    let comm = (0..scenario.n_ues())
        .map(|u| {
            (0..unit_beams.n_streams())
                .map(|s| CVec::from_fn(mt, |m, _| channels.per_ap(u, m, nt).dotc(&unit_beams.block(s, m))))
                .collect()
        })
        .collect();
    let zeta_bar = scenario.zeta_bar();
    let steering = scenario.tx_steering();
    let sensing = (0..unit_beams.n_streams())
        .map(|s| (0..mt).map(|m| zeta_bar[m] * steering[m].dotc(&unit_beams.block(s, m)).norm_sqr()).collect())
        .collect();
    Ok(EffectiveGains { comm, sensing, noise: scenario.ue_noise_var.clone(), n_users: scenario.n_ues() })
}

/// Normalises every per-AP block of `beams` to unit norm. Zero blocks are an error.
pub fn unit_directions(beams: &BeamSet) -> Result<BeamSet, CoreError> {
    let mut out = beams.clone();
    let nt = beams.n_antennas;
    for (s, f) in out.streams.iter_mut().enumerate() {
        for m in 0..beams.n_aps() {
            let mut blk = f.rows_mut(m * nt, nt);
            let n = blk.norm();
            if !(n > 0.0) {
                return Err(CoreError::NonUnitBeam { stream: s, ap: m });
            }
            blk.unscale_mut(n);
        }
    }
    Ok(out)
}

/// `f_{ms} = sqrt_powers[s][m] f̄_{ms}`.
pub fn apply_powers(unit_beams: &BeamSet, sqrt_powers: &[Vec<f64>]) -> BeamSet {
    let mut out = unit_beams.clone();
    let nt = unit_beams.n_antennas;
    for (f, p) in out.streams.iter_mut().zip(sqrt_powers) {
        for (m, pm) in p.iter().enumerate() {
            f.rows_mut(m * nt, nt).scale_mut(*pm);
        }
    }
    out
}

/// SINR of user `u` when stream `s` uses amplitudes `sqrt_powers[s]`.
pub fn gain_sinr(gains: &EffectiveGains, sqrt_powers: &[Vec<f64>], u: usize) -> f64 {
    let amp = |s: usize| -> f64 {
        gains.comm[u][s].iter().zip(&sqrt_powers[s]).map(|(r, p)| r * *p).sum::<C64>().norm_sqr()
    };
    let interference: f64 = (0..gains.n_streams()).filter(|&s| s != u).map(amp).sum();
    amp(u) / (interference + gains.noise[u])
}

/// `Σ_s Σ_m p_{ms} ϱ_{ms}`, the sensing SNR numerator.
pub fn gain_objective(gains: &EffectiveGains, sqrt_powers: &[Vec<f64>]) -> f64 {
    gains.sensing.iter().zip(sqrt_powers).map(|(r, p)| r.iter().zip(p).map(|(g, a)| g * a * a).sum::<f64>()).sum()
}

#[derive(Debug, Clone)]
pub struct PowerSolution {
    /// `P_s`, real symmetric `M_t x M_t`.
    pub power_matrices: Vec<DMatrix<f64>>,
    /// `Σ_s Tr(P_s diag(ϱ_s))`.
    pub sdr_objective: f64,
    pub status: SolverStatus,
    pub relative_gap: f64,
    pub primal_residual: f64,
    pub iterations: usize,
}

fn diag_term(values: &[f64]) -> HermTerm {
    HermTerm::Dense(CMat::from_diagonal(&CVec::from_iterator(values.len(), values.iter().map(|v| C64::new(*v, 0.0)))))
}

/// Solves the relaxed power allocation. Unattainable targets give [`CoreError::Infeasible`].
pub fn solve_power_sdr(
    gains: &EffectiveGains,
    gammas: &[f64],
    budgets: &[f64],
    tol: &SdpTolerances,
) -> Result<PowerSolution, CoreError> {
    let (ns, mt) = (gains.n_streams(), gains.n_aps());
    if gammas.len() != gains.n_users || budgets.len() != mt {
        return Err(CoreError::Dimension("targets or budgets do not match the gains".into()));
    }
    // P_s = c_s P̃_s. With strong channels a target is met by powers far below
    // the budget, and in the original units its row would sit at the solver's
    // feasibility floor after equilibration. c_s is the single-AP power that
    // just meets the target, capped by the largest budget.
    let p_max = budgets.iter().copied().fold(0.0, f64::max);
    let unit: Vec<f64> = (0..ns)
        .map(|s| {
            if s >= gains.n_users || gammas[s] <= 0.0 {
                return p_max;
            }
            let best = gains.comm[s][s].iter().map(|g| g.norm_sqr()).fold(0.0, f64::max) / gains.noise[s];
            if best > 0.0 {
                (gammas[s] / best).min(p_max)
            } else {
                p_max
            }
        })
        .collect();
    let mut rows = Vec::new();
    for u in 0..gains.n_users {
        if gammas[u] > 0.0 {
            let s_u = gains.noise[u].sqrt();
            let terms = (0..ns)
                .map(|s| {
                    let w = if s == u { 1.0 / gammas[u] } else { -1.0 };
                    (s, HermTerm::rank_one(&gains.comm[u][s].unscale(s_u), w * unit[s]))
                })
                .collect();
            rows.push(SdpConstraint { terms, sense: Sense::Ge, rhs: 1.0 });
        }
    }
    for (m, p) in budgets.iter().enumerate() {
        let terms = (0..ns)
            .map(|s| {
                let mut e = vec![0.0; mt];
                e[m] = unit[s];
                (s, diag_term(&e))
            })
            .collect();
        rows.push(SdpConstraint { terms, sense: Sense::Le, rhs: *p });
    }
    let problem = SdpProblem {
        blocks: vec![BlockSpec { dim: mt, field: BlockField::Real }; ns],
        objective: gains
            .sensing
            .iter()
            .enumerate()
            .map(|(s, r)| (s, diag_term(&r.iter().map(|x| x * unit[s]).collect::<Vec<_>>())))
            .collect(),
        constraints: rows,
    };
    let sol = solve_sdp(&problem, tol)?;
    match sol.status {
        SolverStatus::Optimal | SolverStatus::OptimalInaccurate => {}
        SolverStatus::Infeasible => return Err(CoreError::Infeasible),
        s => return Err(CoreError::Solver(s)),
    }
    let power_matrices: Vec<DMatrix<f64>> =
        sol.primal_blocks.iter().zip(&unit).map(|(b, c)| b.map(|z| z.re * c)).collect();
    let sdr_objective = power_matrices
        .iter()
        .zip(&gains.sensing)
        .map(|(p, r)| r.iter().enumerate().map(|(m, g)| g * p[(m, m)]).sum::<f64>())
        .sum();
    Ok(PowerSolution {
        power_matrices,
        sdr_objective,
        status: sol.status,
        relative_gap: sol.relative_gap(),
        primal_residual: sol.primal_residual,
        iterations: sol.iterations,
    })
}

/// `F_s = F̄_s P_s F̄_s^H` with `F̄_s` the block-diagonal matrix of stream `s`'s
/// unit beams, so the lifted power solution can be scored as beam matrices.
pub fn lift_power_matrices(unit_beams: &BeamSet, power_matrices: &[DMatrix<f64>]) -> BeamMatrixSet {
    let nt = unit_beams.n_antennas;
    let n = unit_beams.dim();
    let mt = unit_beams.n_aps();
    let lifted: Vec<CMat> = power_matrices
        .iter()
        .enumerate()
        .map(|(s, p)| {
            let mut fbar = CMat::zeros(n, mt);
            for m in 0..mt {
                fbar.view_mut((m * nt, m), (nt, 1)).copy_from(&unit_beams.block(s, m));
            }
            let pc = p.map(|x| C64::new(x, 0.0));
            &fbar * pc * fbar.adjoint()
        })
        .collect();
    let (users, sensing) = lifted.split_at(unit_beams.n_users);
    BeamMatrixSet {
        user_matrices: users.to_vec(),
        sensing_matrix: sensing.iter().fold(CMat::zeros(n, n), |acc, f| acc + f),
    }
}

/// How extracted powers are pulled back inside the budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetScaling {
    /// One common factor for every AP and stream, preserving power ratios.
    #[default]
    Global,
    /// Each over-budget AP is scaled on its own.
    PerAp,
}

#[derive(Debug, Clone)]
pub struct PowerExtraction {
    /// `sqrt(p_{ms})` indexed `[s][m]`, entrywise nonnegative.
    pub sqrt_powers: Vec<Vec<f64>>,
    /// Sensing numerator reached by the extracted powers.
    pub objective: f64,
    pub sinrs: Vec<f64>,
    /// Every SINR reaches `γ_u (1 - 1e-6)`.
    pub feasible: bool,
}

/// Principal-eigenvector heuristic `p_s = sqrt(λ_1) |u_1|`, then scaled back
/// within the budgets. The result may miss the SINR targets; `feasible` says so.
pub fn extract_rank1_powers(
    solution: &PowerSolution,
    gains: &EffectiveGains,
    gammas: &[f64],
    budgets: &[f64],
    scaling: BudgetScaling,
) -> PowerExtraction {
    let mt = gains.n_aps();
    let mut p: Vec<Vec<f64>> = solution
        .power_matrices
        .iter()
        .map(|m| {
            let e = hermitian_eig(&m.map(|x| C64::new(x, 0.0)));
            let l = e.values.first().copied().unwrap_or(0.0).max(0.0);
            (0..mt).map(|i| l.sqrt() * e.vectors[(i, 0)].norm()).collect()
        })
        .collect();
    let usage: Vec<f64> = (0..mt).map(|m| p.iter().map(|ps| ps[m] * ps[m]).sum()).collect();
    let factors: Vec<f64> = usage.iter().zip(budgets).map(|(u, b)| if *u > *b { b / u } else { 1.0 }).collect();
    let factors = match scaling {
        BudgetScaling::Global => vec![factors.iter().copied().fold(1.0, f64::min); mt],
        BudgetScaling::PerAp => factors,
    };
    for ps in p.iter_mut() {
        for (v, c) in ps.iter_mut().zip(&factors) {
            *v *= c.sqrt();
        }
    }
    let sinrs: Vec<f64> = (0..gains.n_users).map(|u| gain_sinr(gains, &p, u)).collect();
    let feasible = sinrs.iter().zip(gammas).all(|(s, g)| *s >= g * (1.0 - 1e-6));
    PowerExtraction { objective: gain_objective(gains, &p), sqrt_powers: p, sinrs, feasible }
}
