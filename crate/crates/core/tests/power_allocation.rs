use cfisac_conic::{CVec, SolverStatus, C64};
use cfisac_core::baseline::{default_rzf_lambda, nullspace_sensing, rzf_comm, PowerSplit};
use cfisac_core::channel::{generate, GeneratorConfig, Setup};
use cfisac_core::jsc::{jsc_tolerances, solve_jsc_sdr, JscProblemSpec};
use cfisac_core::model::{
    comm_sinr, comm_sinrs, sensing_numerator, BeamMatrixSet, BeamSet, ChannelSet, MetricsRecord, Scenario,
};
use cfisac_core::power::{
    apply_powers, effective_gains, extract_rank1_powers, gain_objective, gain_sinr, lift_power_matrices,
    solve_power_sdr, unit_directions, BudgetScaling, PowerSolution,
};
use cfisac_core::CoreError;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn instance(setup: Setup, n_ues: usize, seed: u64) -> (Scenario, ChannelSet) {
    let mut cfg = GeneratorConfig::for_setup(setup);
    cfg.n_ues = n_ues;
    cfg.n_tx_antennas = 8;
    cfg.seed = seed;
    generate(&cfg).unwrap()
}

/// Solution (i) beams and their per-UE SINRs.
fn ns_rzf(sc: &Scenario, ch: &ChannelSet) -> (BeamSet, Vec<f64>) {
    let split = PowerSplit::new(0.5).unwrap();
    let pc = split.comm(&sc.ap_power_budget);
    let users = rzf_comm(sc, ch, default_rzf_lambda(sc, &pc), &pc).unwrap();
    let ns = nullspace_sensing(sc, ch, &split.sensing(&sc.ap_power_budget)).unwrap();
    let beams = BeamSet::new(users, vec![ns], sc.n_tx_antennas).unwrap();
    let s = comm_sinrs(ch, &beams, &sc.ue_noise_var).unwrap();
    (beams, s)
}

/// One AP, one UE, the user beam aligned with its channel and no sensing stream.
fn single_ap() -> (Scenario, ChannelSet, BeamSet) {
    let (mut sc, mut ch) = instance(Setup::Line, 1, 4);
    sc.tx_ap_positions.truncate(1);
    sc.rx_ap_positions.truncate(1);
    sc.ap_power_budget = vec![2.0];
    sc.radar_noise_var.truncate(1);
    sc.sensing_gain_var = vec![vec![0.01]];
    ch.comm_channels[0] = ch.comm_channels[0].rows(0, 8).into_owned();
    ch.tx_steering.truncate(1);
    ch.rx_steering.truncate(1);
    let h = &ch.comm_channels[0];
    let unit = BeamSet::new(vec![h.unscale(h.norm())], vec![], 8).unwrap();
    (sc, ch, unit)
}

#[test]
fn aligned_beam_gain_is_the_channel_norm() {
    let (sc, ch, unit) = single_ap();
    let g = effective_gains(&sc, &ch, &unit).unwrap();
    assert!((g.comm[0][0][0].re - ch.comm_channels[0].norm()).abs() < 1e-12);
    assert!(g.comm[0][0][0].im.abs() < 1e-12);
}

#[test]
fn orthogonal_beam_has_zero_gain() {
    let (sc, ch, _) = single_ap();
    let h = &ch.comm_channels[0];
    // any vector minus its projection on h
    let mut v = CVec::from_element(8, C64::new(1.0, 0.5));
    let c = h.dotc(&v) / h.norm_squared();
    v -= h.scale(1.0) * c;
    let unit = BeamSet::new(vec![v.unscale(v.norm())], vec![], 8).unwrap();
    let g = effective_gains(&sc, &ch, &unit).unwrap();
    assert!(g.comm[0][0][0].norm() < 1e-12);
}

#[test]
fn non_unit_beams_are_rejected() {
    let (sc, ch) = instance(Setup::Line, 2, 0);
    let (beams, _) = ns_rzf(&sc, &ch);
    assert!(matches!(effective_gains(&sc, &ch, &beams), Err(CoreError::NonUnitBeam { .. })));
}

#[test]
fn single_ap_power_sdr_uses_the_whole_budget() {
    let (sc, ch, unit) = single_ap();
    let g = effective_gains(&sc, &ch, &unit).unwrap();
    let mrt = 2.0 * ch.comm_channels[0].norm_squared() / sc.ue_noise_var[0];
    let sol = solve_power_sdr(&g, &[0.5 * mrt], &[2.0], &jsc_tolerances()).unwrap();
    let rho = g.sensing[0][0];
    assert!((sol.sdr_objective - 2.0 * rho).abs() <= 1e-6 * 2.0 * rho);
    assert!((sol.power_matrices[0][(0, 0)] - 2.0).abs() <= 1e-6);
    let ex = extract_rank1_powers(&sol, &g, &[0.5 * mrt], &[2.0], BudgetScaling::Global);
    assert!(ex.feasible);
    assert!((ex.sqrt_powers[0][0] - 2f64.sqrt()).abs() <= 1e-6);
}

#[test]
fn single_ap_above_the_mrt_bound_is_infeasible() {
    let (sc, ch, unit) = single_ap();
    let g = effective_gains(&sc, &ch, &unit).unwrap();
    let mrt = 2.0 * ch.comm_channels[0].norm_squared() / sc.ue_noise_var[0];
    let out = solve_power_sdr(&g, &[1.05 * mrt], &[2.0], &jsc_tolerances());
    assert!(matches!(out, Err(CoreError::Infeasible)));
}

#[test]
fn rank_one_power_matrices_are_recovered_exactly() {
    let (sc, ch) = instance(Setup::Square, 2, 1);
    let (beams, _) = ns_rzf(&sc, &ch);
    let unit = unit_directions(&beams).unwrap();
    let g = effective_gains(&sc, &ch, &unit).unwrap();
    let p: Vec<Vec<f64>> = (0..3).map(|s| (0..5).map(|m| 0.1 + 0.05 * (s * 5 + m) as f64).collect()).collect();
    let sol = PowerSolution {
        power_matrices: p.iter().map(|v| DMatrix::from_fn(5, 5, |i, j| v[i] * v[j])).collect(),
        sdr_objective: gain_objective(&g, &p),
        status: SolverStatus::Optimal,
        relative_gap: 0.0,
        primal_residual: 0.0,
        iterations: 0,
    };
    let budgets = vec![10.0; 5];
    let ex = extract_rank1_powers(&sol, &g, &[0.0, 0.0], &budgets, BudgetScaling::Global);
    for (a, b) in ex.sqrt_powers.iter().flatten().zip(p.iter().flatten()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(ex.feasible);
}

#[test]
fn sandwich_extraction_power_sdr_beam_sdr() {
    for seed in 0..5 {
        let (sc, ch) = instance(Setup::Line, 2, seed);
        let (beams, gammas) = ns_rzf(&sc, &ch);
        let unit = unit_directions(&beams).unwrap();
        let g = effective_gains(&sc, &ch, &unit).unwrap();
        let sol = solve_power_sdr(&g, &gammas, &sc.ap_power_budget, &jsc_tolerances()).unwrap();
        let spec = JscProblemSpec { scenario: &sc, channels: &ch, gammas: gammas.clone(), n_sensing: 1 };
        let beam_sdr = solve_jsc_sdr(&spec, &jsc_tolerances()).unwrap();
        // fixed beams at their own SINRs are feasible, so the power SDR beats them
        let fixed = sensing_numerator(&sc, &beams).unwrap();
        assert!(sol.sdr_objective >= fixed * (1.0 - 1e-6), "seed {seed}");
        assert!(sol.sdr_objective <= beam_sdr.sdr_objective * (1.0 + 1e-6), "seed {seed}");
        for scaling in [BudgetScaling::Global, BudgetScaling::PerAp] {
            let ex = extract_rank1_powers(&sol, &g, &gammas, &sc.ap_power_budget, scaling);
            assert!(ex.objective <= sol.sdr_objective * (1.0 + 1e-6));
            assert!(ex.sqrt_powers.iter().flatten().all(|p| *p >= 0.0));
            let scaled = apply_powers(&unit, &ex.sqrt_powers);
            assert!(scaled.budget_excess(&sc.ap_power_budget) <= 1e-9);
        }
        // the lifted relaxation scores like the relaxation itself
        let lifted: BeamMatrixSet = lift_power_matrices(&unit, &sol.power_matrices);
        let rec = MetricsRecord::from_matrices(&sc, &ch, &lifted, seed);
        let snr = sol.sdr_objective / sc.radar_noise_sum();
        assert!((rec.sensing_snr - snr).abs() <= 1e-9 * snr);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gains_reproduce_the_exact_metrics(seed in any::<u64>(), p in prop::collection::vec(0.0f64..2.0, 15), square in any::<bool>()) {
        let setup = if square { Setup::Square } else { Setup::Line };
        let (sc, ch) = instance(setup, 2, seed);
        let (beams, _) = ns_rzf(&sc, &ch);
        let unit = unit_directions(&beams).unwrap();
        let g = effective_gains(&sc, &ch, &unit).unwrap();
        let mt = sc.n_tx_aps();
        let sqrt_p: Vec<Vec<f64>> = (0..3).map(|s| p[s * 5..s * 5 + mt].to_vec()).collect();
        let scaled = apply_powers(&unit, &sqrt_p);
        let num = sensing_numerator(&sc, &scaled).unwrap();
        let obj = gain_objective(&g, &sqrt_p);
        prop_assert!((num - obj).abs() <= 1e-10 * num.max(1e-300));
        for u in 0..2 {
            let exact = comm_sinr(&ch, &scaled, u, sc.ue_noise_var[u]).unwrap();
            let via = gain_sinr(&g, &sqrt_p, u);
            prop_assert!((exact - via).abs() <= 1e-12 * exact.max(1e-300));
        }
    }
}

#[test]
fn strong_channels_meet_their_targets() {
    // square setup: normalized gains near 80 dB, so targets need powers
    // many orders below the budget
    for (seed, n_ues) in [(0, 1), (1, 1), (2, 2), (3, 3)] {
        let (sc, ch) = instance(Setup::Square, n_ues, seed);
        let (beams, _) = ns_rzf(&sc, &ch);
        let unit = unit_directions(&beams).unwrap();
        let g = effective_gains(&sc, &ch, &unit).unwrap();
        let gammas = vec![10.0; n_ues];
        let sol = solve_power_sdr(&g, &gammas, &sc.ap_power_budget, &jsc_tolerances()).unwrap();
        assert_eq!(sol.status, SolverStatus::Optimal, "seed {seed}");
        let lifted = lift_power_matrices(&unit, &sol.power_matrices);
        let rec = MetricsRecord::from_matrices(&sc, &ch, &lifted, seed);
        assert!(rec.min_sinr >= 10.0 * (1.0 - 1e-4), "seed {seed}: {}", rec.min_sinr);
    }
}
