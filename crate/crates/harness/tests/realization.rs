//! Behaviour of single realizations and small sweeps.

use cfisac_core::model::RunStatus;
use cfisac_harness::config::{ExperimentConfig, GammaMode, Strategy};
use cfisac_harness::run::{run_realization, run_realization_with_streams};
use cfisac_harness::sweep::{sweep_power_ratio, sweep_streams_ues, sweep_target_distance};

fn all_designs() -> ExperimentConfig {
    ExperimentConfig { strategies: Strategy::ALL.to_vec(), ..ExperimentConfig::default() }
}

#[test]
fn joint_design_meets_targets_set_by_ns_opt() {
    let config = all_designs();
    for seed in 0..2 {
        let r = run_realization(&config, seed).unwrap();
        let ns_opt = r.record(Strategy::NsOpt, 0).unwrap();
        let gamma = ns_opt.metrics.min_sinr;
        assert!(r.gammas.iter().all(|g| *g == gamma));

        let jsc = r.record(Strategy::JscBeam, config.n_sensing).unwrap();
        assert_eq!(jsc.metrics.solver_status, RunStatus::Optimal, "seed {seed}");
        assert!(jsc.feasible, "seed {seed}");
        assert!(jsc.metrics.min_sinr >= gamma * (1.0 - 1e-6));
        // ns-opt's own beams are a feasible point of the joint problem
        assert!(jsc.metrics.sensing_snr >= ns_opt.metrics.sensing_snr * (1.0 - 1e-6), "seed {seed}");

        let ub = r.record(Strategy::JscBeamUb, 0).unwrap();
        assert!(jsc.metrics.sensing_snr <= ub.metrics.sensing_snr * (1.0 + 1e-6));
        let pw = r.record(Strategy::JscPower, 0).unwrap();
        let pw_ub = r.record(Strategy::JscPowerUb, 0).unwrap();
        assert!(pw.metrics.sensing_snr <= pw_ub.metrics.sensing_snr * (1.0 + 1e-6));
        assert!(pw_ub.metrics.sensing_snr <= ub.metrics.sensing_snr * (1.0 + 1e-6));
    }
}

#[test]
fn realizations_are_reproducible_and_ordered() {
    let config = all_designs();
    let a = run_realization(&config, 7).unwrap();
    let b = run_realization(&config, 7).unwrap();
    assert_eq!(a, b);
    let keys: Vec<_> = a.records.iter().map(|r| (r.strategy, r.n_sensing)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(keys.len(), Strategy::ALL.len());
    assert!(a.records.iter().all(|r| r.metrics.wall_time == 0.0));
}

#[test]
fn unreachable_targets_fail_only_the_joint_designs() {
    let config = ExperimentConfig { gamma_mode: GammaMode::Fixed, fixed_gamma: 1e9, ..all_designs() };
    let r = run_realization(&config, 1).unwrap();
    for rec in &r.records {
        if rec.strategy.is_constrained() {
            assert!(!rec.feasible, "{}", rec.strategy);
            assert!(rec.metrics.sensing_snr.is_nan(), "{}", rec.strategy);
        } else {
            assert!(rec.feasible, "{}", rec.strategy);
            assert_eq!(rec.metrics.solver_status, RunStatus::Optimal);
        }
    }
    let jsc = r.record(Strategy::JscBeam, 1).unwrap();
    assert_eq!(jsc.metrics.solver_status, RunStatus::Infeasible);
}

#[test]
fn separate_designs_leak_nothing_into_ue_channels() {
    // the null-space beam is invisible to every UE, so ns-rzf with a tiny ρ
    // keeps its SINRs while sensing takes almost all the power
    let base = ExperimentConfig { strategies: vec![Strategy::NsRzf], ..ExperimentConfig::default() };
    let lo = run_realization(&ExperimentConfig { rho: 0.05, ..base.clone() }, 3).unwrap();
    let hi = run_realization(&ExperimentConfig { rho: 0.95, ..base }, 3).unwrap();
    let (lo, hi) = (lo.record(Strategy::NsRzf, 0).unwrap(), hi.record(Strategy::NsRzf, 0).unwrap());
    assert!(lo.metrics.sensing_snr > hi.metrics.sensing_snr);
    assert!(lo.metrics.min_sinr < hi.metrics.min_sinr);
}

#[test]
fn stream_grid_shares_one_relaxation() {
    let config = ExperimentConfig {
        strategies: vec![Strategy::JscBeam, Strategy::JscBeamUb],
        gamma_mode: GammaMode::Fixed,
        ..ExperimentConfig::default()
    };
    let r = run_realization_with_streams(&config, 2, &[0, 1, 2]).unwrap();
    let ub = r.record(Strategy::JscBeamUb, 0).unwrap().metrics.sensing_snr;
    let snrs: Vec<f64> = (0..3).map(|q| r.record(Strategy::JscBeam, q).unwrap().metrics.sensing_snr).collect();
    for w in snrs.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-9));
    }
    assert!(snrs.iter().all(|s| *s <= ub * (1.0 + 1e-6)));
}

#[test]
fn power_ratio_sweep_groups_by_grid_then_seed() {
    let config = ExperimentConfig {
        strategies: vec![Strategy::NsRzf, Strategy::NsOpt],
        rho_grid: vec![0.3, 0.7],
        realizations: 3,
        seed_base: 10,
        ..ExperimentConfig::default()
    };
    let t = sweep_power_ratio(&config).unwrap();
    assert_eq!(t.rows.len(), 4);
    let order: Vec<(f64, u64)> = t.runs.iter().map(|(v, r)| (*v, r.seed)).collect();
    assert_eq!(order, vec![(0.3, 10), (0.3, 11), (0.3, 12), (0.7, 10), (0.7, 11), (0.7, 12)]);
    for row in &t.rows {
        assert_eq!(row.count, 3);
        assert_eq!(row.solved, 3);
        assert_eq!(row.feasibility_rate, 1.0);
        assert!(row.p10_snr_db <= row.median_snr_db && row.median_snr_db <= row.p90_snr_db);
        assert!(row.mean_sensing_rank.is_nan());
    }
    // more communication power buys SINR and costs sensing SNR
    let at = |v: f64, s: Strategy| t.rows.iter().find(|r| r.value == v && r.strategy == s).unwrap();
    assert!(at(0.7, Strategy::NsOpt).mean_min_sinr_db > at(0.3, Strategy::NsOpt).mean_min_sinr_db);
    assert!(at(0.7, Strategy::NsOpt).mean_snr_db < at(0.3, Strategy::NsOpt).mean_snr_db);
}

#[test]
fn distance_bins_contain_their_realizations() {
    let config = ExperimentConfig {
        strategies: vec![Strategy::NsRzf],
        realizations: 6,
        distance_bin: 10.0,
        ..ExperimentConfig::default()
    };
    let t = sweep_target_distance(&config).unwrap();
    assert_eq!(t.runs.len(), 6);
    for (center, r) in &t.runs {
        assert!((r.target_distance - center).abs() <= 5.0, "{} in bin {center}", r.target_distance);
    }
    let total: usize = t.rows.iter().map(|r| r.count).sum();
    assert_eq!(total, 6);
}

#[test]
fn streams_sweep_expands_every_stream_count() {
    let mut config = ExperimentConfig::streams_ues();
    config.strategies = vec![Strategy::JscBeam];
    config.ue_grid = vec![2];
    config.stream_grid = vec![0, 3];
    config.realizations = 1;
    let t = sweep_streams_ues(&config).unwrap();
    let qs: Vec<usize> = t.rows.iter().map(|r| r.n_sensing).collect();
    assert_eq!(qs, vec![0, 3]);
    assert!(t.rows.iter().all(|r| r.value == 2.0 && !r.mean_sensing_rank.is_nan()));
}
