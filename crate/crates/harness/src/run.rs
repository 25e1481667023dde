//! One realization: generate, run every requested design, score the results.
//!
//! Scores always come from the core metric functions applied to the produced
//! beams (or, for the relaxations, to their matrices), never from solver
//! objectives. A design that fails leaves a record with its status and `NaN`
//! metrics; the other designs are unaffected.

use std::time::Instant;

use cfisac_conic::{hermitian_eig, rank_of_spectrum, CVec, SdpTolerances, C64, DEFAULT_RANK_TOL};
use cfisac_core::baseline::{
    conjugate_sensing, default_rzf_lambda, maxmin_comm_bisection, nullspace_sensing, rzf_comm, BisectionParams,
    PowerSplit,
};
use cfisac_core::channel::generate;
use cfisac_core::jsc::{recover_rank1, solve_jsc_sdr, stream_bound_check, JscProblemSpec};
use cfisac_core::model::{BeamSet, ChannelSet, MetricsRecord, RunStatus, Scenario};
use cfisac_core::power::{
    apply_powers, effective_gains, extract_rank1_powers, lift_power_matrices, solve_power_sdr, unit_directions,
};
use cfisac_core::CoreError;
use serde::Serialize;

use crate::config::{ExperimentConfig, GammaMode, Strategy};

/// Result of one design on one realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyRecord {
    pub strategy: Strategy,
    /// Sensing streams given to `jsc-beam`; zero for the other designs.
    pub n_sensing: usize,
    pub metrics: MetricsRecord,
    /// Solved, and for the joint designs every UE reaches its target.
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Realization {
    pub seed: u64,
    pub n_ues: usize,
    /// Distance from the target to the nearest UE, meters.
    pub target_distance: f64,
    /// SINR targets handed to the joint designs; empty if none ran.
    pub gammas: Vec<f64>,
    /// The target steering fell in the UE channel span at some AP, and the
    /// null-space sensing beam was replaced by zero.
    pub degenerate_nullspace: bool,
    pub records: Vec<StrategyRecord>,
}

impl Realization {
    pub fn record(&self, strategy: Strategy, n_sensing: usize) -> Option<&StrategyRecord> {
        self.records.iter().find(|r| r.strategy == strategy && (strategy != Strategy::JscBeam || r.n_sensing == n_sensing))
    }

    pub fn has_numerical_failure(&self) -> bool {
        self.records.iter().any(|r| is_numerical(r.metrics.solver_status))
    }
}

pub fn is_numerical(s: RunStatus) -> bool {
    matches!(s, RunStatus::NumericalFailure | RunStatus::MaxIters)
}

fn solved(s: RunStatus) -> bool {
    matches!(s, RunStatus::Optimal | RunStatus::OptimalInaccurate)
}

/// Relative slack allowed when checking a design against its SINR targets.
const TARGET_SLACK: f64 = 1e-6;
/// The relaxations' own matrices meet their rows only to the solver's
/// feasibility tolerance, which after row equilibration can leave a few parts
/// per million on strong channels.
const BOUND_TARGET_SLACK: f64 = 1e-4;

fn meets(sinrs: &[f64], gammas: &[f64]) -> bool {
    meets_within(sinrs, gammas, TARGET_SLACK)
}

fn meets_within(sinrs: &[f64], gammas: &[f64], slack: f64) -> bool {
    sinrs.iter().zip(gammas).all(|(s, g)| *s >= g * (1.0 - slack))
}

struct Context<'a> {
    scenario: &'a Scenario,
    channels: &'a ChannelSet,
    seed: u64,
    timing: bool,
}

impl Context<'_> {
    fn score(&self, beams: &BeamSet) -> Result<MetricsRecord, CoreError> {
        MetricsRecord::from_beams(self.scenario, self.channels, beams, self.seed)
    }

    fn failed(&self, e: &CoreError) -> MetricsRecord {
        self.failed_with(e.into())
    }

    fn failed_with(&self, status: RunStatus) -> MetricsRecord {
        MetricsRecord::failed(status, self.scenario.n_ues(), self.seed)
    }

    fn stamp(&self, mut m: MetricsRecord, started: Instant) -> MetricsRecord {
        m.wall_time = if self.timing { started.elapsed().as_secs_f64() } else { 0.0 };
        m
    }
}

fn separate_record(ctx: &Context, strategy: Strategy, beams: &Result<BeamSet, CoreError>, started: Instant) -> StrategyRecord {
    let metrics = match beams.as_ref().map_err(|e| ctx.failed(e)).and_then(|b| ctx.score(b).map_err(|e| ctx.failed(&e))) {
        Ok(m) | Err(m) => m,
    };
    let feasible = solved(metrics.solver_status);
    StrategyRecord { strategy, n_sensing: 0, metrics: ctx.stamp(metrics, started), feasible }
}

/// Runs the configured designs on realization `seed`, with `jsc-beam`
/// evaluated once for every stream count in `stream_counts`.
pub fn run_realization_with_streams(
    config: &ExperimentConfig,
    seed: u64,
    stream_counts: &[usize],
) -> Result<Realization, CoreError> {
    let mut gen = config.generator.clone();
    gen.seed = seed;
    let (sc, ch) = generate(&gen)?;
    let ctx = Context { scenario: &sc, channels: &ch, seed, timing: config.timing };
    let wants = |s: Strategy| config.strategies.contains(&s);
    let split = PowerSplit::new(config.rho)?;
    let p_comm = split.comm(&sc.ap_power_budget);
    let p_sense = split.sensing(&sc.ap_power_budget);
    let nt = sc.n_tx_antennas;
    let mut records = Vec::new();

    let mut degenerate_nullspace = false;
    let ns = match nullspace_sensing(&sc, &ch, &p_sense) {
        Ok(f) => f,
        Err(CoreError::DegenerateNullspace { .. }) => {
            degenerate_nullspace = true;
            CVec::zeros(sc.stacked_dim())
        }
        Err(e) => return Err(e),
    };
    let lambda = config.rzf_lambda.unwrap_or_else(|| default_rzf_lambda(&sc, &p_comm));
    let bracket = BisectionParams::mrt_bracket(&ch, &sc.ue_noise_var, &p_comm);

    let needs_joint = config.strategies.iter().any(|s| s.is_constrained());
    let needs_ns_rzf = wants(Strategy::NsRzf)
        || (needs_joint && config.gamma_mode == GammaMode::PerUeFromNsRzf)
        || wants(Strategy::JscPower)
        || wants(Strategy::JscPowerUb);
    let needs_ns_opt = wants(Strategy::NsOpt) || (needs_joint && config.gamma_mode == GammaMode::EqualFromNsOpt);

    let started = Instant::now();
    let ns_rzf = needs_ns_rzf.then(|| {
        rzf_comm(&sc, &ch, lambda, &p_comm).and_then(|users| BeamSet::new(users, vec![ns.clone()], nt))
    });
    let ns_rzf_record = ns_rzf.as_ref().map(|b| separate_record(&ctx, Strategy::NsRzf, b, started));

    let started = Instant::now();
    let ns_opt_record = needs_ns_opt.then(|| {
        let beams = maxmin_comm_bisection(&sc, &ch, std::slice::from_ref(&ns), &p_comm, &bracket)
            .and_then(|r| BeamSet::new(r.users, vec![ns.clone()], nt));
        separate_record(&ctx, Strategy::NsOpt, &beams, started)
    });

    if wants(Strategy::NsRzf) {
        records.extend(ns_rzf_record.clone());
    }
    if wants(Strategy::NsOpt) {
        records.extend(ns_opt_record.clone());
    }
    if wants(Strategy::CbOpt) {
        let started = Instant::now();
        let beams = conjugate_sensing(&sc, &p_sense).and_then(|cb| {
            maxmin_comm_bisection(&sc, &ch, std::slice::from_ref(&cb), &p_comm, &bracket)
                .and_then(|r| BeamSet::new(r.users, vec![cb], nt))
        });
        records.push(separate_record(&ctx, Strategy::CbOpt, &beams, started));
    }

    let mut gammas = Vec::new();
    if needs_joint {
        let from = |r: &Option<StrategyRecord>, pick: fn(&MetricsRecord) -> Vec<f64>| match r {
            Some(r) if r.feasible => Ok(pick(&r.metrics)),
            Some(r) => Err(r.metrics.solver_status),
            None => Err(RunStatus::NumericalFailure),
        };
        let n_ues = sc.n_ues();
        let source = match config.gamma_mode {
            GammaMode::Fixed => Ok(vec![config.fixed_gamma; n_ues]),
            GammaMode::EqualFromNsOpt => from(&ns_opt_record, |m| vec![m.min_sinr; m.ue_sinrs.len()]),
            GammaMode::PerUeFromNsRzf => from(&ns_rzf_record, |m| m.ue_sinrs.clone()),
        };
        match source {
            Ok(g) => {
                gammas = g;
                let tol = config.tolerances();
                let fixed = ns_rzf.as_ref().map(|r| r.as_ref().cloned().map_err(RunStatus::from));
                joint_records(&ctx, config, &gammas, stream_counts, fixed, &tol, &mut records);
            }
            Err(status) => {
                // the separate design that sets the targets failed; its status carries over
                for s in config.strategies.iter().filter(|s| s.is_constrained()) {
                    let qs: &[usize] = if *s == Strategy::JscBeam { stream_counts } else { &[0] };
                    for &q in qs {
                        records.push(StrategyRecord {
                            strategy: *s,
                            n_sensing: q,
                            metrics: ctx.failed_with(status),
                            feasible: false,
                        });
                    }
                }
            }
        }
    }

    records.sort_by_key(|r| (r.strategy, r.n_sensing));
    Ok(Realization {
        seed,
        n_ues: sc.n_ues(),
        target_distance: sc.target_ue_distance(),
        gammas,
        degenerate_nullspace,
        records,
    })
}

/// Runs the configured designs on realization `seed` with `Q = config.n_sensing`.
pub fn run_realization(config: &ExperimentConfig, seed: u64) -> Result<Realization, CoreError> {
    run_realization_with_streams(config, seed, &[config.n_sensing])
}

fn joint_records(
    ctx: &Context,
    config: &ExperimentConfig,
    gammas: &[f64],
    stream_counts: &[usize],
    fixed_beams: Option<Result<BeamSet, RunStatus>>,
    tol: &SdpTolerances,
    records: &mut Vec<StrategyRecord>,
) {
    let wants = |s: Strategy| config.strategies.contains(&s);
    let (sc, ch, seed) = (ctx.scenario, ctx.channels, ctx.seed);
    if wants(Strategy::JscBeam) || wants(Strategy::JscBeamUb) {
        let started = Instant::now();
        let spec = JscProblemSpec { scenario: sc, channels: ch, gammas: gammas.to_vec(), n_sensing: 0 };
        match solve_jsc_sdr(&spec, tol) {
            Ok(sol) => {
                let solve_time = started.elapsed();
                let status = RunStatus::from(sol.status);
                if wants(Strategy::JscBeamUb) {
                    let mats = sol.matrices();
                    let mut m = MetricsRecord::from_matrices(sc, ch, &mats, seed);
                    m.solver_status = status;
                    m.duality_gap = sol.relative_gap();
                    m.achieved_ranks = mats
                        .user_matrices
                        .iter()
                        .map(|f| rank_of_spectrum(&hermitian_eig(f).values, DEFAULT_RANK_TOL))
                        .chain(std::iter::once(stream_bound_check(&sol, &spec).sensing_rank))
                        .collect();
                    m.wall_time = if ctx.timing { solve_time.as_secs_f64() } else { 0.0 };
                    let feasible = meets_within(&m.ue_sinrs, gammas, BOUND_TARGET_SLACK);
                    records.push(StrategyRecord { strategy: Strategy::JscBeamUb, n_sensing: 0, metrics: m, feasible });
                }
                if wants(Strategy::JscBeam) {
                    for &q in stream_counts {
                        let started = Instant::now();
                        let spec_q = JscProblemSpec { n_sensing: q, ..spec.clone() };
                        let rec = match recover_rank1(&sol, &spec_q).and_then(|(beams, report)| {
                            ctx.score(&beams).map(|m| (m, report))
                        }) {
                            Ok((mut m, report)) => {
                                m.solver_status = status;
                                m.duality_gap = sol.relative_gap();
                                m.achieved_ranks = vec![report.sensing_rank];
                                let feasible = meets(&m.ue_sinrs, gammas);
                                StrategyRecord { strategy: Strategy::JscBeam, n_sensing: q, metrics: m, feasible }
                            }
                            Err(e) => StrategyRecord {
                                strategy: Strategy::JscBeam,
                                n_sensing: q,
                                metrics: ctx.failed(&e),
                                feasible: false,
                            },
                        };
                        let total = solve_time + started.elapsed();
                        let mut rec = rec;
                        rec.metrics.wall_time = if ctx.timing { total.as_secs_f64() } else { 0.0 };
                        records.push(rec);
                    }
                }
            }
            Err(e) => {
                if wants(Strategy::JscBeamUb) {
                    records.push(StrategyRecord { strategy: Strategy::JscBeamUb, n_sensing: 0, metrics: ctx.failed(&e), feasible: false });
                }
                if wants(Strategy::JscBeam) {
                    for &q in stream_counts {
                        records.push(StrategyRecord { strategy: Strategy::JscBeam, n_sensing: q, metrics: ctx.failed(&e), feasible: false });
                    }
                }
            }
        }
    }

    if wants(Strategy::JscPower) || wants(Strategy::JscPowerUb) {
        let started = Instant::now();
        let solved = fixed_beams.unwrap_or(Err(RunStatus::NumericalFailure)).and_then(|b| {
            unit_directions(&b)
                .and_then(|unit| effective_gains(sc, ch, &unit).map(|g| (unit, g)))
                .and_then(|(unit, g)| solve_power_sdr(&g, gammas, &sc.ap_power_budget, tol).map(|sol| (unit, g, sol)))
                .map_err(|e| RunStatus::from(&e))
        });
        match solved {
            Ok((unit, gains, sol)) => {
                let solve_time = started.elapsed();
                let status = RunStatus::from(sol.status);
                if wants(Strategy::JscPowerUb) {
                    let mats = lift_power_matrices(&unit, &sol.power_matrices);
                    let mut m = MetricsRecord::from_matrices(sc, ch, &mats, seed);
                    m.solver_status = status;
                    m.duality_gap = sol.relative_gap;
                    m.achieved_ranks = sol
                        .power_matrices
                        .iter()
                        .map(|p| rank_of_spectrum(&hermitian_eig(&p.map(|x| C64::new(x, 0.0))).values, DEFAULT_RANK_TOL))
                        .collect();
                    m.wall_time = if ctx.timing { solve_time.as_secs_f64() } else { 0.0 };
                    let feasible = meets_within(&m.ue_sinrs, gammas, BOUND_TARGET_SLACK);
                    records.push(StrategyRecord { strategy: Strategy::JscPowerUb, n_sensing: 0, metrics: m, feasible });
                }
                if wants(Strategy::JscPower) {
                    let ex = extract_rank1_powers(&sol, &gains, gammas, &sc.ap_power_budget, config.budget_scaling);
                    let beams = apply_powers(&unit, &ex.sqrt_powers);
                    let rec = match ctx.score(&beams) {
                        Ok(mut m) => {
                            m.solver_status = status;
                            m.duality_gap = sol.relative_gap;
                            m.achieved_ranks = vec![1; sol.power_matrices.len()];
                            let feasible = meets(&m.ue_sinrs, gammas);
                            StrategyRecord { strategy: Strategy::JscPower, n_sensing: 0, metrics: m, feasible }
                        }
                        Err(e) => StrategyRecord { strategy: Strategy::JscPower, n_sensing: 0, metrics: ctx.failed(&e), feasible: false },
                    };
                    records.push(StrategyRecord { metrics: ctx.stamp(rec.metrics.clone(), started), ..rec });
                }
            }
            Err(status) => {
                for s in [Strategy::JscPowerUb, Strategy::JscPower] {
                    if wants(s) {
                        records.push(StrategyRecord { strategy: s, n_sensing: 0, metrics: ctx.failed_with(status), feasible: false });
                    }
                }
            }
        }
    }
}
