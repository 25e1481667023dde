//! Monte-Carlo sweeps. Realizations run on the rayon pool; results are sorted
//! by grid position and seed before aggregation, so the output does not depend
//! on completion order.

use rayon::prelude::*;
use serde::Serialize;

use cfisac_core::CoreError;

use crate::config::{ExperimentConfig, Strategy};
use crate::run::{run_realization, run_realization_with_streams, Realization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    PowerRatio,
    TargetDistance,
    StreamsUes,
}

impl SweepKind {
    /// Column name of the swept value.
    pub fn variable(&self) -> &'static str {
        match self {
            SweepKind::PowerRatio => "rho",
            SweepKind::TargetDistance => "distance_m",
            SweepKind::StreamsUes => "n_ues",
        }
    }
}

/// Aggregate of one design at one grid value. dB figures are taken of
/// linear-scale statistics over the solved realizations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub strategy: Strategy,
    pub n_sensing: usize,
    /// Realizations in this group.
    pub count: usize,
    /// Realizations whose design solved.
    pub solved: usize,
    /// Share of realizations that solved and met their SINR targets.
    pub feasibility_rate: f64,
    pub mean_snr_db: f64,
    pub p10_snr_db: f64,
    pub median_snr_db: f64,
    pub p90_snr_db: f64,
    /// Mean over realizations of the mean UE SINR.
    pub mean_sinr_db: f64,
    /// Mean over realizations of the min UE SINR.
    pub mean_min_sinr_db: f64,
    /// Smallest min UE SINR over realizations.
    pub worst_min_sinr_db: f64,
    /// Mean ε-rank of the sensing part, `NaN` for designs without one.
    pub mean_sensing_rank: f64,
    /// Seconds; zero unless timing is enabled.
    pub mean_runtime: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
    /// Every realization with its grid value, ordered by grid value then seed.
    pub runs: Vec<(f64, Realization)>,
}

impl SweepTable {
    pub fn has_numerical_failure(&self) -> bool {
        self.runs.iter().any(|(_, r)| r.has_numerical_failure())
    }
}

pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q * (n - 1) as f64;
            let (lo, frac) = (pos.floor() as usize, pos - pos.floor());
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + frac * (sorted[hi] - sorted[lo])
        }
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn aggregate(value: f64, strategy: Strategy, n_sensing: usize, runs: &[&Realization]) -> SweepRow {
    let recs: Vec<_> = runs.iter().filter_map(|r| r.record(strategy, n_sensing)).collect();
    let ok: Vec<_> = recs.iter().filter(|r| r.metrics.sensing_snr.is_finite()).collect();
    let mut snr: Vec<f64> = ok.iter().map(|r| r.metrics.sensing_snr).collect();
    snr.sort_by(f64::total_cmp);
    let ranks = ok.iter().filter_map(|r| r.metrics.achieved_ranks.last().map(|&k| k as f64));
    let has_rank = matches!(strategy, Strategy::JscBeam | Strategy::JscBeamUb);
    SweepRow {
        value,
        strategy,
        n_sensing,
        count: recs.len(),
        solved: ok.len(),
        feasibility_rate: recs.iter().filter(|r| r.feasible).count() as f64 / recs.len().max(1) as f64,
        mean_snr_db: db(mean(snr.iter().copied())),
        p10_snr_db: db(percentile(&snr, 0.1)),
        median_snr_db: db(percentile(&snr, 0.5)),
        p90_snr_db: db(percentile(&snr, 0.9)),
        mean_sinr_db: db(mean(ok.iter().map(|r| r.metrics.mean_sinr()))),
        mean_min_sinr_db: db(mean(ok.iter().map(|r| r.metrics.min_sinr))),
        worst_min_sinr_db: db(ok.iter().map(|r| r.metrics.min_sinr).fold(f64::NAN, f64::min)),
        mean_sensing_rank: if has_rank { mean(ranks) } else { f64::NAN },
        mean_runtime: mean(ok.iter().map(|r| r.metrics.wall_time)),
    }
}

/// `(strategy, Q)` pairs a table reports, in output order.
fn columns(config: &ExperimentConfig, stream_counts: &[usize]) -> Vec<(Strategy, usize)> {
    let mut s = config.strategies.clone();
    s.sort();
    s.dedup();
    s.into_iter()
        .flat_map(|k| {
            let qs: Vec<usize> = if k == Strategy::JscBeam { stream_counts.to_vec() } else { vec![0] };
            qs.into_iter().map(move |q| (k, q))
        })
        .collect()
}

fn seeds(config: &ExperimentConfig) -> impl Iterator<Item = u64> + '_ {
    (0..config.realizations as u64).map(move |i| config.seed_base.wrapping_add(i))
}

fn run_grid<F>(jobs: Vec<(usize, u64)>, run: F) -> Result<Vec<(usize, Realization)>, CoreError>
where
    F: Fn(usize, u64) -> Result<Realization, CoreError> + Sync,
{
    let mut out: Vec<(usize, Realization)> =
        jobs.into_par_iter().map(|(g, seed)| run(g, seed).map(|r| (g, r))).collect::<Result<_, _>>()?;
    out.sort_by_key(|(g, r)| (*g, r.seed));
    Ok(out)
}

fn tabulate(kind: SweepKind, grid: &[f64], runs: Vec<(usize, Realization)>, cols: &[(Strategy, usize)]) -> SweepTable {
    let mut rows = Vec::new();
    for (g, &value) in grid.iter().enumerate() {
        let group: Vec<&Realization> = runs.iter().filter(|(k, _)| *k == g).map(|(_, r)| r).collect();
        if group.is_empty() {
            continue;
        }
        rows.extend(cols.iter().map(|&(s, q)| aggregate(value, s, q, &group)));
    }
    let runs = runs.into_iter().map(|(g, r)| (grid[g], r)).collect();
    SweepTable { kind, rows, runs }
}

/// Separate designs split every budget by each `ρ` of the grid; the joint
/// designs see `ρ` only through their SINR targets.
pub fn sweep_power_ratio(config: &ExperimentConfig) -> Result<SweepTable, CoreError> {
    let jobs = (0..config.rho_grid.len()).flat_map(|g| seeds(config).map(move |s| (g, s))).collect();
    let runs = run_grid(jobs, |g, seed| {
        let cfg = ExperimentConfig { rho: config.rho_grid[g], ..config.clone() };
        run_realization(&cfg, seed)
    })?;
    Ok(tabulate(SweepKind::PowerRatio, &config.rho_grid, runs, &columns(config, &[config.n_sensing])))
}

/// Realizations binned by the distance from the target to its nearest UE.
/// The reported value is the bin center; empty bins are left out.
pub fn sweep_target_distance(config: &ExperimentConfig) -> Result<SweepTable, CoreError> {
    let w = config.distance_bin;
    let runs = run_grid(seeds(config).map(|s| (0, s)).collect(), |_, seed| run_realization(config, seed))?;
    let runs: Vec<(usize, Realization)> = runs
        .into_iter()
        .filter(|(_, r)| r.target_distance.is_finite())
        .map(|(_, r)| ((r.target_distance / w).floor() as usize, r))
        .collect();
    let n_bins = runs.iter().map(|(b, _)| b + 1).max().unwrap_or(0);
    let grid: Vec<f64> = (0..n_bins).map(|b| (b as f64 + 0.5) * w).collect();
    let mut runs = runs;
    runs.sort_by_key(|(b, r)| (*b, r.seed));
    Ok(tabulate(SweepKind::TargetDistance, &grid, runs, &columns(config, &[config.n_sensing])))
}

/// One joint relaxation per `(U, seed)`, recovered once per `Q` of the grid.
pub fn sweep_streams_ues(config: &ExperimentConfig) -> Result<SweepTable, CoreError> {
    let jobs = (0..config.ue_grid.len()).flat_map(|g| seeds(config).map(move |s| (g, s))).collect();
    let runs = run_grid(jobs, |g, seed| {
        let mut cfg = config.clone();
        cfg.generator.n_ues = config.ue_grid[g];
        run_realization_with_streams(&cfg, seed, &config.stream_grid)
    })?;
    let grid: Vec<f64> = config.ue_grid.iter().map(|&u| u as f64).collect();
    Ok(tabulate(SweepKind::StreamsUes, &grid, runs, &columns(config, &config.stream_grid)))
}
