use cfisac_conic::{rank_eps, CVec, C64};
use cfisac_core::channel::{generate, GeneratorConfig, Setup};
use cfisac_core::model::{
    array_response, build_sensing_matrix_a, comm_sinr, comm_sinr_matrix_form, monte_carlo_snr_estimate, sensing_snr,
    sensing_snr_sdp_form, BeamMatrixSet, BeamSet, ChannelSet, Scenario,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_beams(rng: &mut ChaCha8Rng, sc: &Scenario, n_sensing: usize) -> BeamSet {
    let n = sc.stacked_dim();
    let mut draw = || CVec::from_fn(n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let users = (0..sc.n_ues()).map(|_| draw()).collect();
    let sensing = (0..n_sensing).map(|_| draw()).collect();
    BeamSet::new(users, sensing, sc.n_tx_antennas).unwrap()
}

fn instance(setup: Setup, n_ues: usize, seed: u64) -> (Scenario, ChannelSet) {
    let mut cfg = GeneratorConfig::for_setup(setup);
    cfg.n_ues = n_ues;
    cfg.seed = seed;
    generate(&cfg).unwrap()
}

/// Per-AP sums written out entry by entry, independent of the stacked code path.
fn sinr_per_ap(sc: &Scenario, ch: &ChannelSet, beams: &BeamSet, u: usize) -> f64 {
    let nt = sc.n_tx_antennas;
    let gain = |s: usize| -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for m in 0..sc.n_tx_aps() {
            for k in 0..nt {
                let i = m * nt + k;
                acc += ch.comm_channels[u][i].conj() * beams.streams[s][i];
            }
        }
        acc.norm_sqr()
    };
    let interference: f64 = (0..beams.n_streams()).filter(|&s| s != u).map(gain).sum();
    gain(u) / (interference + sc.ue_noise_var[u])
}

fn sensing_numerator_per_ap(sc: &Scenario, beams: &BeamSet) -> f64 {
    let nt = sc.n_tx_antennas;
    let mut total = 0.0;
    for mr in 0..sc.n_rx_aps() {
        for (mt, a) in sc.tx_steering().iter().enumerate() {
            let z2 = sc.sensing_gain_var[mt][mr];
            for f in &beams.streams {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..nt {
                    acc += a[k].conj() * f[mt * nt + k];
                }
                total += z2 * acc.norm_sqr();
            }
        }
    }
    total
}

#[test]
fn stacked_sinr_matches_per_ap_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for seed in 0..20 {
        let setup = if seed % 2 == 0 { Setup::Line } else { Setup::Square };
        let (sc, ch) = instance(setup, 3, seed);
        let beams = random_beams(&mut rng, &sc, 2);
        for u in 0..3 {
            let stacked = comm_sinr(&ch, &beams, u, sc.ue_noise_var[u]).unwrap();
            let direct = sinr_per_ap(&sc, &ch, &beams, u);
            assert!((stacked - direct).abs() <= 1e-12 * direct, "seed {seed} u {u}: {stacked} vs {direct}");
        }
    }
}

#[test]
fn sensing_snr_matches_per_ap_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..10 {
        let (sc, _) = instance(Setup::Square, 2, seed);
        let beams = random_beams(&mut rng, &sc, 3);
        let expect = sensing_numerator_per_ap(&sc, &beams) / sc.radar_noise_sum();
        let got = sensing_snr(&sc, &beams).unwrap();
        assert!((got - expect).abs() <= 1e-12 * expect);
    }
}

#[test]
fn identity_sensing_matrix_gives_trace_of_a() {
    let (sc, _) = instance(Setup::Square, 0, 3);
    let n = sc.stacked_dim();
    let mats = BeamMatrixSet { user_matrices: vec![], sensing_matrix: cfisac_conic::CMat::identity(n, n) };
    let a = build_sensing_matrix_a(&sc);
    let expect = sc.n_tx_antennas as f64 * sc.zeta_bar().iter().sum::<f64>() / sc.radar_noise_sum();
    assert!((sensing_snr_sdp_form(&a, &mats, sc.radar_noise_sum()) - expect).abs() < 1e-12 * expect);
    assert_eq!(rank_eps(&a, 1e-9), sc.n_tx_aps());
}

#[test]
fn zero_beams_have_zero_snr() {
    let (sc, _) = instance(Setup::Line, 2, 0);
    let beams = BeamSet::zeros(2, 1, sc.n_tx_aps(), sc.n_tx_antennas);
    assert_eq!(sensing_snr(&sc, &beams).unwrap(), 0.0);
}

#[test]
fn monte_carlo_estimate_tracks_the_analytic_snr() {
    // single-AP conjugate beam: ζ² N_t P / ς²
    let mut cfg = GeneratorConfig::line();
    cfg.n_ues = 0;
    let (mut sc, _) = generate(&cfg).unwrap();
    sc.tx_ap_positions.truncate(1);
    sc.rx_ap_positions.truncate(1);
    sc.ap_power_budget.truncate(1);
    sc.radar_noise_var.truncate(1);
    sc.sensing_gain_var = vec![vec![0.01]];
    let nt = sc.n_tx_antennas;
    let theta = sc.target_tx_angles()[0];
    let f = array_response(theta, nt).unscale((nt as f64).sqrt());
    let beams = BeamSet::new(vec![], vec![f], nt).unwrap();
    let analytic = 0.01 * nt as f64;
    assert!((sensing_snr(&sc, &beams).unwrap() - analytic).abs() < 1e-12);
    let mut within = 0;
    for seed in 0..20 {
        let est = monte_carlo_snr_estimate(&sc, &beams, 64, 2000, seed).unwrap();
        if (est.snr - analytic).abs() <= 3.0 * est.std_error {
            within += 1;
        }
    }
    assert!(within >= 18, "{within}/20 estimates within 3 standard errors");
}

#[test]
fn monte_carlo_is_roughly_invariant_to_frame_length() {
    let (sc, _) = instance(Setup::Line, 1, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let beams = random_beams(&mut rng, &sc, 1);
    let analytic = sensing_snr(&sc, &beams).unwrap();
    for l in [1, 8, 64] {
        let est = monte_carlo_snr_estimate(&sc, &beams, l, 4000, 1).unwrap();
        assert!((est.snr - analytic).abs() <= 5.0 * est.std_error, "L = {l}: {} vs {analytic}", est.snr);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrix_forms_agree_with_vector_forms(seed in 0u64..10_000, q in 0usize..3, square in any::<bool>()) {
        let setup = if square { Setup::Square } else { Setup::Line };
        let (sc, ch) = instance(setup, 2, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
        let beams = random_beams(&mut rng, &sc, q);
        let mats = BeamMatrixSet::from_beams(&beams);
        let a = build_sensing_matrix_a(&sc);
        let v = sensing_snr(&sc, &beams).unwrap();
        let m = sensing_snr_sdp_form(&a, &mats, sc.radar_noise_sum());
        prop_assert!((v - m).abs() <= 1e-10 * v.max(f64::MIN_POSITIVE));
        for u in 0..2 {
            let sv = comm_sinr(&ch, &beams, u, sc.ue_noise_var[u]).unwrap();
            let sm = comm_sinr_matrix_form(&ch, &mats, u, sc.ue_noise_var[u]);
            prop_assert!((sv - sm).abs() <= 1e-10 * sv);
        }
    }

    #[test]
    fn steering_vectors_have_unit_modulus_entries(theta in -1.5f64..1.5, n in 1usize..40) {
        let a = array_response(theta, n);
        prop_assert!((a.norm_squared() - n as f64).abs() < 1e-10);
        prop_assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }
}
