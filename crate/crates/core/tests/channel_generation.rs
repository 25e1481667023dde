use cfisac_core::channel::{
    draw_channels, generate, line_scenario, square_scenario, umi_pathloss_db, ChannelModel, GeneratorConfig,
};
use cfisac_core::model::distance;
use proptest::prelude::*;

#[test]
fn line_layout_is_fixed_and_ues_sit_on_the_line() {
    for seed in 0..50 {
        let mut cfg = GeneratorConfig::line();
        cfg.seed = seed;
        let sc = line_scenario(&cfg).unwrap();
        assert_eq!(sc.tx_ap_positions, vec![[25.0, 0.0], [75.0, 0.0]]);
        assert_eq!(sc.n_tx_antennas, 16);
        assert_eq!(sc.ap_power_budget, vec![1.0, 1.0]);
        assert_eq!(sc.ue_noise_var, vec![1.0; 5]);
        assert!((sc.sensing_gain_var[0][1] - 0.01).abs() < 1e-15);
        for p in sc.ue_positions.iter().chain(std::iter::once(&sc.target_position)) {
            assert_eq!(p[1], 50.0);
            assert!((0.0..=100.0).contains(&p[0]));
        }
        // target in front of both arrays
        assert!(sc.target_tx_angles().iter().all(|t| t.abs() < std::f64::consts::FRAC_PI_2));
    }
}

#[test]
fn square_defaults() {
    let cfg = GeneratorConfig::square();
    let sc = square_scenario(&cfg).unwrap();
    assert_eq!(sc.n_tx_aps(), 5);
    assert_eq!(sc.n_rx_aps(), 5);
    assert_eq!(sc.n_tx_antennas, 8);
    assert_eq!(sc.carrier_freq, 28e9);
    assert!((sc.ue_noise_var[0] - 3.1622776601683795e-17).abs() < 1e-28);
    let other = square_scenario(&GeneratorConfig { seed: 99, ..cfg.clone() }).unwrap();
    assert_eq!(sc.tx_ap_positions, other.tx_ap_positions);
    assert_ne!(sc.ue_positions, other.ue_positions);
}

#[test]
fn same_seed_same_realization() {
    for cfg in [GeneratorConfig::line(), GeneratorConfig::square()] {
        let a = generate(&GeneratorConfig { seed: 7, ..cfg.clone() }).unwrap();
        let b = generate(&GeneratorConfig { seed: 7, ..cfg.clone() }).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn changing_the_channel_model_keeps_the_geometry() {
    let mut cfg = GeneratorConfig::square();
    cfg.seed = 4;
    let (a, _) = generate(&cfg).unwrap();
    cfg.channel_model = ChannelModel::Los;
    let (b, _) = generate(&cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rayleigh_power_follows_path_loss() {
    let mut cfg = GeneratorConfig::square();
    cfg.n_ues = 1;
    let sc = square_scenario(&cfg).unwrap();
    let nt = sc.n_tx_antennas as f64;
    let draws = 10_000;
    let mut mean = vec![0.0; sc.n_tx_aps()];
    for seed in 0..draws {
        let ch = draw_channels(&sc, &cfg, seed).unwrap();
        for (m, acc) in mean.iter_mut().enumerate() {
            *acc += ch.per_ap(0, m, sc.n_tx_antennas).norm_squared() / nt / draws as f64;
        }
    }
    for (m, got) in mean.iter().enumerate() {
        let g = 10f64.powf(umi_pathloss_db(distance(sc.tx_ap_positions[m], sc.ue_positions[0]), 28.0) / 10.0);
        assert!((got / g - 1.0).abs() < 0.05, "AP {m}: {got} vs {g}");
    }
}

#[test]
fn json_config_overrides_defaults() {
    let cfg: GeneratorConfig = serde_json::from_str(r#"{"setup":"square","n_ues":3,"ap_positions":[[0,0],[100,100]]}"#).unwrap();
    let sc = square_scenario(&cfg).unwrap();
    assert_eq!(sc.n_tx_aps(), 2);
    assert_eq!(sc.n_ues(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn channel_dimensions_match_the_scenario(seed in any::<u64>(), u in 0usize..6, square in any::<bool>()) {
        let mut cfg = if square { GeneratorConfig::square() } else { GeneratorConfig::line() };
        cfg.seed = seed;
        cfg.n_ues = u;
        let (sc, ch) = generate(&cfg).unwrap();
        prop_assert!(ch.check(&sc).is_ok());
        prop_assert_eq!(ch.comm_channels.len(), u);
        for a in &ch.tx_steering {
            prop_assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn path_loss_drops_21_db_per_decade(d in 1.0f64..1e3, fc in 0.5f64..100.0) {
        prop_assert!((umi_pathloss_db(10.0 * d, fc) - umi_pathloss_db(d, fc) + 21.0).abs() < 1e-9);
    }
}
