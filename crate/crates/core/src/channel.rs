//! Seeded scenario and channel generators for the two evaluation layouts.
//!
//! * `line`: two APs at (25, 0) and (75, 0) that both transmit and receive;
//!   the target and the UEs sit at y = 50 with x uniform on [0, 100].
//! * `square`: five APs, fixed across realizations, in a 100 m x 100 m area
//!   with the target and UEs uniform over the square.
//!
//! Randomness comes from ChaCha8 seeded with the realization seed. Placement
//! and fading use separate streams of the same seed, so changing the channel
//! model never moves the UEs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::model::{array_response, broadside_angle, distance, ChannelSet, Point, Scenario};
use crate::CoreError;
use cfisac_conic::{CVec, C64};

const PLACEMENT_STREAM: u64 = 0;
const FADING_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setup {
    Line,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelModel {
    /// `h_{mu} = a(θ_{mu})`, unit amplitude.
    Los,
    /// `h_{mu} ~ CN(0, g I)` with UMi path-loss gain `g`.
    RayleighUmi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub setup: Setup,
    pub n_ues: usize,
    pub seed: u64,
    pub channel_model: ChannelModel,
    pub n_tx_antennas: usize,
    pub n_rx_antennas: usize,
    /// Per-AP budget, watts.
    pub ap_power: f64,
    /// Watts.
    pub ue_noise_var: f64,
    /// Watts.
    pub radar_noise_var: f64,
    /// `ζ`, the standard deviation of the combined sensing gain.
    pub sensing_gain_std: f64,
    /// Hertz.
    pub carrier_freq: f64,
    /// Side of the deployment area, meters.
    pub area_side: f64,
    /// Overrides the layout's AP positions (square setup only).
    pub ap_positions: Option<Vec<Point>>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig::line()
    }
}

/// `10^((dBm - 30)/10)`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl GeneratorConfig {
    pub fn line() -> Self {
        GeneratorConfig {
            setup: Setup::Line,
            n_ues: 5,
            seed: 0,
            channel_model: ChannelModel::Los,
            n_tx_antennas: 16,
            n_rx_antennas: 16,
            ap_power: 1.0,
            ue_noise_var: 1.0,
            radar_noise_var: 1.0,
            sensing_gain_std: 0.1,
            carrier_freq: 28e9,
            area_side: 100.0,
            ap_positions: None,
        }
    }

    pub fn square() -> Self {
        GeneratorConfig {
            setup: Setup::Square,
            n_ues: 2,
            seed: 0,
            channel_model: ChannelModel::RayleighUmi,
            n_tx_antennas: 8,
            n_rx_antennas: 8,
            ap_power: 1.0,
            ue_noise_var: dbm_to_watts(-135.0),
            radar_noise_var: 1.0,
            sensing_gain_std: 0.1,
            carrier_freq: 28e9,
            area_side: 100.0,
            ap_positions: None,
        }
    }

    pub fn for_setup(setup: Setup) -> Self {
        match setup {
            Setup::Line => GeneratorConfig::line(),
            Setup::Square => GeneratorConfig::square(),
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let checks = [
            ("ap_power", self.ap_power),
            ("ue_noise_var", self.ue_noise_var),
            ("radar_noise_var", self.radar_noise_var),
            ("sensing_gain_std", self.sensing_gain_std),
            ("carrier_freq", self.carrier_freq),
            ("area_side", self.area_side),
        ];
        if let Some((name, _)) = checks.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(CoreError::InvalidScenario(format!("{name} must be positive and finite")));
        }
        if self.n_tx_antennas == 0 || self.n_rx_antennas == 0 {
            return Err(CoreError::InvalidScenario("antenna counts must be at least one".into()));
        }
        if matches!(&self.ap_positions, Some(p) if p.is_empty()) {
            return Err(CoreError::InvalidScenario("AP override list is empty".into()));
        }
        Ok(())
    }

    fn ap_layout(&self) -> Vec<Point> {
        if let Some(p) = &self.ap_positions {
            return p.clone();
        }
        let s = self.area_side;
        match self.setup {
            Setup::Line => vec![[0.25 * s, 0.0], [0.75 * s, 0.0]],
            Setup::Square => {
                let i = 0.1 * s;
                vec![[i, i], [s - i, i], [i, s - i], [s - i, s - i], [0.5 * s, 0.5 * s]]
            }
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn scenario_from_layout(config: &GeneratorConfig, aps: Vec<Point>, target: Point, ues: Vec<Point>) -> Scenario {
    let (mt, u) = (aps.len(), ues.len());
    let zeta2 = config.sensing_gain_std * config.sensing_gain_std;
    Scenario {
        tx_ap_positions: aps.clone(),
        rx_ap_positions: aps,
        target_position: target,
        ue_positions: ues,
        n_tx_antennas: config.n_tx_antennas,
        n_rx_antennas: config.n_rx_antennas,
        ap_power_budget: vec![config.ap_power; mt],
        ue_noise_var: vec![config.ue_noise_var; u],
        radar_noise_var: vec![config.radar_noise_var; mt],
        sensing_gain_var: vec![vec![zeta2; mt]; mt],
        carrier_freq: config.carrier_freq,
    }
}

/// Line layout: target first, then UEs, all at `y = side / 2`.
pub fn line_scenario(config: &GeneratorConfig) -> Result<Scenario, CoreError> {
    config.validate()?;
    let mut rng = rng_for(config.seed, PLACEMENT_STREAM);
    let s = config.area_side;
    let mut draw = || [rng.random_range(0.0..=s), 0.5 * s];
    let target = draw();
    let ues = (0..config.n_ues).map(|_| draw()).collect();
    let sc = scenario_from_layout(config, config.ap_layout(), target, ues);
    sc.validate()?;
    Ok(sc)
}

/// Square layout: target first, then UEs, uniform over the area.
pub fn square_scenario(config: &GeneratorConfig) -> Result<Scenario, CoreError> {
    config.validate()?;
    let mut rng = rng_for(config.seed, PLACEMENT_STREAM);
    let s = config.area_side;
    let mut draw = || [rng.random_range(0.0..=s), rng.random_range(0.0..=s)];
    let target = draw();
    let ues = (0..config.n_ues).map(|_| draw()).collect();
    let sc = scenario_from_layout(config, config.ap_layout(), target, ues);
    sc.validate()?;
    Ok(sc)
}

pub fn scenario(config: &GeneratorConfig) -> Result<Scenario, CoreError> {
    match config.setup {
        Setup::Line => line_scenario(config),
        Setup::Square => square_scenario(config),
    }
}

/// 3GPP UMi path loss `-32.4 - 21 log10(d) - 20 log10(f_c)` in dB, with `d`
/// in meters clamped below at 1 m and `f_c` in GHz.
pub fn umi_pathloss_db(distance_m: f64, fc_ghz: f64) -> f64 {
    -32.4 - 21.0 * distance_m.max(1.0).log10() - 20.0 * fc_ghz.log10()
}

/// Channels of `scenario` under `config.channel_model`, drawn from the fading
/// stream of `seed`.
pub fn draw_channels(scenario: &Scenario, config: &GeneratorConfig, seed: u64) -> Result<ChannelSet, CoreError> {
    scenario.validate()?;
    let mut rng = rng_for(seed, FADING_STREAM);
    let nt = scenario.n_tx_antennas;
    let fc_ghz = scenario.carrier_freq / 1e9;
    let comm_channels = scenario
        .ue_positions
        .iter()
        .map(|&ue| {
            let mut h = CVec::zeros(scenario.stacked_dim());
            for (m, &ap) in scenario.tx_ap_positions.iter().enumerate() {
                let block = match config.channel_model {
                    ChannelModel::Los => array_response(broadside_angle(ap, ue), nt),
                    ChannelModel::RayleighUmi => {
                        let g = 10f64.powf(umi_pathloss_db(distance(ap, ue), fc_ghz) / 10.0);
                        let s = (0.5 * g).sqrt();
                        CVec::from_fn(nt, |_, _| {
                            C64::new(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal))
                        })
                    }
                };
                h.rows_mut(m * nt, nt).copy_from(&block);
            }
            h
        })
        .collect();
    Ok(ChannelSet { comm_channels, tx_steering: scenario.tx_steering(), rx_steering: scenario.rx_steering() })
}

/// Scenario and channels of realization `config.seed`.
pub fn generate(config: &GeneratorConfig) -> Result<(Scenario, ChannelSet), CoreError> {
    let sc = scenario(config)?;
    let ch = draw_channels(&sc, config, config.seed)?;
    Ok((sc, ch))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pathloss_examples() {
        assert!((umi_pathloss_db(1.0, 28.0) - (-32.4 - 20.0 * 28f64.log10())).abs() < 1e-12);
        assert!((umi_pathloss_db(10.0, 28.0) - umi_pathloss_db(1.0, 28.0) + 21.0).abs() < 1e-12);
        assert!((umi_pathloss_db(1.0, 1.0) + 32.4).abs() < 1e-12);
        assert_eq!(umi_pathloss_db(0.0, 28.0), umi_pathloss_db(1.0, 28.0));
    }

    #[test]
    fn dbm_conversion() {
        assert!((dbm_to_watts(-135.0) - 3.1622776601683795e-17).abs() < 1e-28);
    }

    #[test]
    fn los_on_broadside_is_all_ones() {
        let mut cfg = GeneratorConfig::line();
        cfg.n_ues = 1;
        let mut sc = line_scenario(&cfg).unwrap();
        sc.ue_positions[0] = [25.0, 50.0];
        let ch = draw_channels(&sc, &cfg, 0).unwrap();
        let h0 = ch.per_ap(0, 0, 16);
        assert!(h0.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
    }
}
