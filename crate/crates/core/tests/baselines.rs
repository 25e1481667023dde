use cfisac_conic::{CVec, C64};
use cfisac_core::baseline::{
    conjugate_sensing, default_rzf_lambda, maxmin_comm_bisection, nullspace_sensing, rzf_comm, rzf_directions,
    BisectionParams, PowerSplit,
};
use cfisac_core::channel::{generate, GeneratorConfig, Setup};
use cfisac_core::model::{comm_sinrs, BeamSet, ChannelSet, Scenario};
use cfisac_core::CoreError;
use proptest::prelude::*;

fn instance(setup: Setup, n_ues: usize, seed: u64) -> (Scenario, ChannelSet) {
    let mut cfg = GeneratorConfig::for_setup(setup);
    cfg.n_ues = n_ues;
    cfg.seed = seed;
    generate(&cfg).unwrap()
}

fn min_sinr(sc: &Scenario, ch: &ChannelSet, users: Vec<CVec>, sensing: Vec<CVec>) -> f64 {
    let beams = BeamSet::new(users, sensing, sc.n_tx_antennas).unwrap();
    comm_sinrs(ch, &beams, &sc.ue_noise_var).unwrap().into_iter().fold(f64::INFINITY, f64::min)
}

#[test]
fn conjugate_beam_entries_and_power() {
    let (sc, _) = instance(Setup::Line, 1, 0);
    let f = conjugate_sensing(&sc, &[1.0, 0.25]).unwrap();
    assert!(f.rows(0, 16).iter().all(|z| (z.norm() - 0.25).abs() < 1e-15));
    let beams = BeamSet::new(vec![CVec::zeros(32)], vec![f], 16).unwrap();
    assert!((beams.ap_power(0) - 1.0).abs() < 1e-14);
    assert!((beams.ap_power(1) - 0.25).abs() < 1e-14);
}

#[test]
fn nullspace_beam_by_hand() {
    // N_t = 2, one UE with h = [1, 0]: the projection of any a keeps only its second entry.
    let (mut sc, mut ch) = instance(Setup::Line, 1, 0);
    sc.n_tx_antennas = 2;
    sc.tx_ap_positions.truncate(1);
    sc.rx_ap_positions.truncate(1);
    sc.ap_power_budget.truncate(1);
    sc.radar_noise_var.truncate(1);
    sc.sensing_gain_var = vec![vec![0.01]];
    ch.comm_channels = vec![CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)])];
    ch.tx_steering = sc.tx_steering();
    ch.rx_steering = sc.rx_steering();
    let f = nullspace_sensing(&sc, &ch, &[1.0]).unwrap();
    let a = &ch.tx_steering[0];
    assert!(f[0].norm() < 1e-15);
    assert!((f[1] - a[1]).norm() < 1e-15);
}

#[test]
fn nullspace_without_ues_is_conjugate() {
    let (sc, ch) = instance(Setup::Square, 0, 2);
    let p = vec![0.5; 5];
    let f = nullspace_sensing(&sc, &ch, &p).unwrap();
    let g = conjugate_sensing(&sc, &p).unwrap();
    assert!((f - g).norm() < 1e-12);
}

#[test]
fn nullspace_degenerates_when_target_steering_is_a_channel() {
    let (sc, mut ch) = instance(Setup::Line, 1, 3);
    ch.comm_channels[0] = conjugate_sensing(&sc, &[1.0, 1.0]).unwrap();
    assert!(matches!(nullspace_sensing(&sc, &ch, &[1.0, 1.0]), Err(CoreError::DegenerateNullspace { ap: 0 })));
}

#[test]
fn rzf_without_regularisation_zero_forces() {
    for seed in 0..10 {
        let (_, ch) = instance(Setup::Square, 4, seed);
        let dirs = rzf_directions(&ch, 0.0).unwrap();
        for (u, f) in dirs.iter().enumerate() {
            for (v, h) in ch.comm_channels.iter().enumerate() {
                if u != v {
                    assert!(h.dotc(f).norm() <= 1e-8 * h.norm() * f.norm());
                }
            }
        }
    }
}

#[test]
fn rzf_with_heavy_regularisation_is_mrt() {
    let (_, ch) = instance(Setup::Square, 3, 1);
    let dirs = rzf_directions(&ch, 1e6).unwrap();
    for (f, h) in dirs.iter().zip(&ch.comm_channels) {
        let cos = h.dotc(f).norm() / (h.norm() * f.norm());
        assert!(1.0 - cos < 1e-9);
    }
}

#[test]
fn rzf_per_ap_powers() {
    let (sc, ch) = instance(Setup::Line, 4, 5);
    let split = PowerSplit::new(0.5).unwrap();
    let p = split.comm(&sc.ap_power_budget);
    let users = rzf_comm(&sc, &ch, default_rzf_lambda(&sc, &p), &p).unwrap();
    for f in &users {
        for m in 0..2 {
            assert!((f.rows(m * 16, 16).norm_squared() - 0.5 / 4.0).abs() < 1e-14);
        }
    }
}

#[test]
fn single_user_bisection_reaches_mrt() {
    let mut cfg = GeneratorConfig::line();
    cfg.n_ues = 1;
    for seed in 0..5 {
        cfg.seed = seed;
        let (mut sc, mut ch) = generate(&cfg).unwrap();
        // one AP so that the interference-free MRT value is attainable
        sc.tx_ap_positions.truncate(1);
        sc.rx_ap_positions.truncate(1);
        sc.ap_power_budget.truncate(1);
        sc.radar_noise_var.truncate(1);
        sc.sensing_gain_var = vec![vec![0.01]];
        ch.comm_channels[0] = ch.comm_channels[0].rows(0, 16).into_owned().scale(0.3);
        ch.tx_steering.truncate(1);
        ch.rx_steering.truncate(1);
        let p = [2.0];
        let oracle = 2.0 * ch.comm_channels[0].norm_squared() / sc.ue_noise_var[0];
        let params = BisectionParams::mrt_bracket(&ch, &sc.ue_noise_var, &p);
        let res = maxmin_comm_bisection(&sc, &ch, &[], &p, &params).unwrap();
        assert!((res.gamma - oracle).abs() <= 1e-3 * oracle, "{} vs {oracle}", res.gamma);
    }
}

#[test]
fn symmetric_users_share_the_optimum() {
    let (sc, mut ch) = instance(Setup::Line, 2, 8);
    ch.comm_channels[1] = ch.comm_channels[0].clone();
    let p = sc.ap_power_budget.clone();
    let params = BisectionParams::mrt_bracket(&ch, &sc.ue_noise_var, &p);
    let res = maxmin_comm_bisection(&sc, &ch, &[], &p, &params).unwrap();
    let beams = BeamSet::new(res.users, vec![], 16).unwrap();
    let s = comm_sinrs(&ch, &beams, &sc.ue_noise_var).unwrap();
    // identical channels: neither UE can be favoured, both sit at γ*
    assert!(s.iter().all(|v| *v >= res.gamma * (1.0 - 1e-6)));
    assert!((res.gamma_upper - res.gamma) <= 1e-3 * res.gamma_upper);
}

#[test]
fn nullspace_sensing_leaves_the_maxmin_unchanged() {
    for seed in 0..5 {
        let (sc, ch) = instance(Setup::Line, 3, seed);
        let split = PowerSplit::new(0.5).unwrap();
        let p = split.comm(&sc.ap_power_budget);
        let ns = nullspace_sensing(&sc, &ch, &split.sensing(&sc.ap_power_budget)).unwrap();
        let params = BisectionParams::mrt_bracket(&ch, &sc.ue_noise_var, &p);
        let with = maxmin_comm_bisection(&sc, &ch, &[ns], &p, &params).unwrap();
        let without = maxmin_comm_bisection(&sc, &ch, &[], &p, &params).unwrap();
        assert!((with.gamma - without.gamma).abs() <= 2e-3 * without.gamma, "seed {seed}: {} vs {}", with.gamma, without.gamma);
    }
}

#[test]
fn maxmin_dominates_rzf_and_probes_are_monotone() {
    for seed in 0..8 {
        let setup = if seed % 2 == 0 { Setup::Line } else { Setup::Square };
        let (sc, ch) = instance(setup, 3, seed);
        let split = PowerSplit::new(0.5).unwrap();
        let p = split.comm(&sc.ap_power_budget);
        let ns = nullspace_sensing(&sc, &ch, &split.sensing(&sc.ap_power_budget)).unwrap();
        let params = BisectionParams::mrt_bracket(&ch, &sc.ue_noise_var, &p);
        let res = maxmin_comm_bisection(&sc, &ch, std::slice::from_ref(&ns), &p, &params).unwrap();
        let rzf = rzf_comm(&sc, &ch, default_rzf_lambda(&sc, &p), &p).unwrap();
        let rzf_min = min_sinr(&sc, &ch, rzf, vec![ns.clone()]);
        assert!(res.gamma >= rzf_min * (1.0 - 1e-6), "seed {seed}: {} < {rzf_min}", res.gamma);
        let reached = min_sinr(&sc, &ch, res.users.clone(), vec![ns]);
        assert!(reached >= res.gamma * (1.0 - 1e-6));
        let beams = BeamSet::new(res.users, vec![], sc.n_tx_antennas).unwrap();
        assert!(beams.budget_excess(&p) <= 1e-9);
        // every feasible probe lies below every infeasible one
        let max_feasible = res.probes.iter().filter(|p| p.feasible).map(|p| p.gamma).fold(0.0, f64::max);
        let min_infeasible = res.probes.iter().filter(|p| !p.feasible).map(|p| p.gamma).fold(f64::INFINITY, f64::min);
        assert!(max_feasible < min_infeasible);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn nullspace_beams_leak_nothing(seed in any::<u64>(), u in 1usize..4, rho in 0.05f64..0.95) {
        let (sc, ch) = instance(Setup::Square, u, seed);
        let split = PowerSplit::new(rho).unwrap();
        let ps = split.sensing(&sc.ap_power_budget);
        let f = nullspace_sensing(&sc, &ch, &ps).unwrap();
        let nt = sc.n_tx_antennas;
        for m in 0..sc.n_tx_aps() {
            let fm = f.rows(m * nt, nt);
            prop_assert!((fm.norm_squared() - ps[m]).abs() <= 1e-12 * ps[m]);
            for v in 0..u {
                let h = ch.per_ap(v, m, nt);
                prop_assert!(h.dotc(&fm).norm() <= 1e-10 * h.norm() * fm.norm());
            }
        }
    }

    #[test]
    fn baseline_beams_respect_budgets(seed in any::<u64>(), rho in 0.05f64..0.95) {
        let (sc, ch) = instance(Setup::Line, 3, seed);
        let split = PowerSplit::new(rho).unwrap();
        let pc = split.comm(&sc.ap_power_budget);
        let users = rzf_comm(&sc, &ch, default_rzf_lambda(&sc, &pc), &pc).unwrap();
        let cb = conjugate_sensing(&sc, &split.sensing(&sc.ap_power_budget)).unwrap();
        let beams = BeamSet::new(users, vec![cb], 16).unwrap();
        prop_assert!(beams.budget_excess(&sc.ap_power_budget) <= 1e-9);
    }
}
