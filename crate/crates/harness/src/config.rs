//! Experiment configuration, read from JSON. Every field has a default, so a
//! config file only needs the fields it changes.

use std::fmt;
use std::str::FromStr;

use cfisac_conic::SdpTolerances;
use cfisac_core::channel::{GeneratorConfig, Setup};
use cfisac_core::jsc::jsc_tolerances;
use cfisac_core::power::BudgetScaling;
use serde::{Deserialize, Serialize};

/// The compared designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Null-space sensing beam, RZF user beams, split by `ρ`.
    NsRzf,
    /// Null-space sensing beam, max-min SINR user beams.
    NsOpt,
    /// Conjugate sensing beam, max-min SINR user beams.
    CbOpt,
    /// Joint relaxation followed by rank-one recovery with `Q` sensing streams.
    JscBeam,
    /// Power allocation over the `ns-rzf` directions, principal-eigenvector powers.
    JscPower,
    /// The joint relaxation's matrices themselves.
    JscBeamUb,
    /// The power relaxation's matrices themselves.
    JscPowerUb,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::NsRzf,
        Strategy::NsOpt,
        Strategy::CbOpt,
        Strategy::JscBeam,
        Strategy::JscPower,
        Strategy::JscBeamUb,
        Strategy::JscPowerUb,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::NsRzf => "ns-rzf",
            Strategy::NsOpt => "ns-opt",
            Strategy::CbOpt => "cb-opt",
            Strategy::JscBeam => "jsc-beam",
            Strategy::JscPower => "jsc-power",
            Strategy::JscBeamUb => "jsc-beam-ub",
            Strategy::JscPowerUb => "jsc-power-ub",
        }
    }

    /// Whether the design is bound to the SINR targets.
    pub fn is_constrained(&self) -> bool {
        !matches!(self, Strategy::NsRzf | Strategy::NsOpt | Strategy::CbOpt)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown strategy {s:?}"))
    }
}

/// Where the joint designs take their SINR targets from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GammaMode {
    /// Every UE gets the min SINR reached by `ns-opt`.
    #[serde(rename = "equal-from-ii", alias = "equal-from-(ii)")]
    EqualFromNsOpt,
    /// Each UE gets its own SINR under `ns-rzf`.
    #[serde(rename = "per-ue-from-i", alias = "per-ue-from-(i)")]
    PerUeFromNsRzf,
    /// `fixed_gamma` for every UE.
    #[serde(rename = "fixed")]
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: GeneratorConfig,
    pub strategies: Vec<Strategy>,
    pub gamma_mode: GammaMode,
    /// Linear target used by [`GammaMode::Fixed`].
    pub fixed_gamma: f64,
    /// Sensing streams `Q` available to `jsc-beam`.
    pub n_sensing: usize,
    /// Communication share of every AP budget for the separate designs.
    pub rho: f64,
    pub rho_grid: Vec<f64>,
    /// Meters.
    pub distance_bin: f64,
    pub ue_grid: Vec<usize>,
    pub stream_grid: Vec<usize>,
    pub realizations: usize,
    pub seed_base: u64,
    /// `None` picks the MMSE-style default.
    pub rzf_lambda: Option<f64>,
    pub budget_scaling: BudgetScaling,
    /// Feasibility and gap tolerance of the relaxations.
    pub sdp_tol: f64,
    /// Wall-clock columns make the output depend on the machine, so they are opt-in.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            generator: GeneratorConfig::line(),
            strategies: vec![Strategy::NsRzf, Strategy::NsOpt, Strategy::CbOpt, Strategy::JscBeam],
            gamma_mode: GammaMode::EqualFromNsOpt,
            fixed_gamma: 10.0,
            n_sensing: 1,
            rho: 0.5,
            rho_grid: (1..=9).map(|k| k as f64 / 10.0).collect(),
            distance_bin: 5.0,
            ue_grid: (1..=5).collect(),
            stream_grid: (0..=4).collect(),
            realizations: 100,
            seed_base: 0,
            rzf_lambda: None,
            budget_scaling: BudgetScaling::Global,
            sdp_tol: jsc_tolerances().feastol,
            timing: false,
        }
    }
}

impl ExperimentConfig {
    /// Line setup, separate designs against the joint one over `ρ`.
    pub fn power_ratio() -> Self {
        ExperimentConfig::default()
    }

    /// Line setup at `ρ = 0.5`, binned by target-to-UE distance.
    pub fn target_distance() -> Self {
        ExperimentConfig {
            strategies: vec![Strategy::NsRzf, Strategy::NsOpt, Strategy::CbOpt, Strategy::JscBeam, Strategy::JscBeamUb],
            ..ExperimentConfig::default()
        }
    }

    /// Square setup with a 10 dB target, joint designs over `U` and `Q`.
    pub fn streams_ues() -> Self {
        ExperimentConfig {
            generator: GeneratorConfig::square(),
            strategies: vec![Strategy::JscBeam, Strategy::JscBeamUb, Strategy::JscPower, Strategy::JscPowerUb],
            gamma_mode: GammaMode::Fixed,
            realizations: 50,
            ..ExperimentConfig::default()
        }
    }

    pub fn for_setup(setup: Setup) -> Self {
        match setup {
            Setup::Line => ExperimentConfig::power_ratio(),
            Setup::Square => ExperimentConfig::streams_ues(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn tolerances(&self) -> SdpTolerances {
        SdpTolerances { feastol: self.sdp_tol, gaptol: self.sdp_tol, ..jsc_tolerances() }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.generator.validate().map_err(|e| e.to_string())?;
        if self.realizations == 0 {
            return Err("realizations must be at least one".into());
        }
        if self.strategies.is_empty() {
            return Err("no strategies selected".into());
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(format!("rho {} outside (0, 1)", self.rho));
        }
        if self.rho_grid.is_empty() || self.rho_grid.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err("rho grid must be nonempty with values in (0, 1)".into());
        }
        if self.ue_grid.is_empty() || self.stream_grid.is_empty() {
            return Err("UE and stream grids must be nonempty".into());
        }
        if !(self.distance_bin > 0.0) {
            return Err("distance bin width must be positive".into());
        }
        if !(self.fixed_gamma >= 0.0 && self.fixed_gamma.is_finite()) {
            return Err("fixed gamma must be finite and nonnegative".into());
        }
        if !(self.sdp_tol > 0.0) {
            return Err("sdp_tol must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.as_str()));
        }
    }

    #[test]
    fn partial_json_keeps_defaults() {
        let c = ExperimentConfig::from_json(r#"{"gamma_mode":"per-ue-from-(i)","realizations":3}"#).unwrap();
        assert_eq!(c.gamma_mode, GammaMode::PerUeFromNsRzf);
        assert_eq!(c.realizations, 3);
        assert_eq!(c.rho, 0.5);
        assert!(ExperimentConfig::from_json(r#"{"realisations":3}"#).is_err());
    }

    #[test]
    fn presets_validate() {
        for c in [ExperimentConfig::power_ratio(), ExperimentConfig::target_distance(), ExperimentConfig::streams_ues()] {
            c.validate().unwrap();
        }
    }
}
