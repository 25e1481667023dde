//! System model and exact metrics.
//!
//! Every transmitting AP has an `N_t`-element half-wavelength ULA laid along
//! the x-axis, with angles measured from broadside (the +y direction). A
//! stacked vector of length `M_t N_t` holds AP 0's antennas first. Streams
//! are ordered user streams first, then sensing streams.
//!
//! The sensing SNR is the ratio of expected echo energy to expected noise
//! energy summed over receiving APs. The factors `N_r` and the frame length
//! cancel in that ratio and never appear outside the Monte-Carlo validator.

use std::ops::Range;

use cfisac_conic::{trace_inner, CMat, CVec, SolverStatus, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::CoreError;

/// A point in the plane, meters.
pub type Point = [f64; 2];

/// One physical realization: geometry and linear-scale radio parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub tx_ap_positions: Vec<Point>,
    pub rx_ap_positions: Vec<Point>,
    pub target_position: Point,
    pub ue_positions: Vec<Point>,
    pub n_tx_antennas: usize,
    pub n_rx_antennas: usize,
    /// `P_m` per transmitting AP, watts.
    pub ap_power_budget: Vec<f64>,
    /// `σ_u²` per UE, watts.
    pub ue_noise_var: Vec<f64>,
    /// `ς²` per receiving AP, watts.
    pub radar_noise_var: Vec<f64>,
    /// `ζ²` indexed `[tx AP][rx AP]`.
    pub sensing_gain_var: Vec<Vec<f64>>,
    /// Hertz.
    pub carrier_freq: f64,
}

fn positive(name: &str, v: &[f64]) -> Result<(), CoreError> {
    match v.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
        Some(i) => Err(CoreError::InvalidScenario(format!("{name}[{i}] must be positive and finite"))),
        None => Ok(()),
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |msg: String| Err(CoreError::InvalidScenario(msg));
        let (mt, mr, u) = (self.n_tx_aps(), self.n_rx_aps(), self.n_ues());
        if mt == 0 || mr == 0 {
            return bad("need at least one transmitting and one receiving AP".into());
        }
        if self.n_tx_antennas == 0 || self.n_rx_antennas == 0 {
            return bad("antenna counts must be at least one".into());
        }
        if self.ap_power_budget.len() != mt {
            return bad(format!("{} power budgets for {mt} transmitting APs", self.ap_power_budget.len()));
        }
        if self.ue_noise_var.len() != u {
            return bad(format!("{} noise variances for {u} UEs", self.ue_noise_var.len()));
        }
        if self.radar_noise_var.len() != mr {
            return bad(format!("{} radar noise variances for {mr} receiving APs", self.radar_noise_var.len()));
        }
        if self.sensing_gain_var.len() != mt || self.sensing_gain_var.iter().any(|row| row.len() != mr) {
            return bad(format!("sensing gains must be {mt} x {mr}"));
        }
        positive("ap_power_budget", &self.ap_power_budget)?;
        positive("ue_noise_var", &self.ue_noise_var)?;
        positive("radar_noise_var", &self.radar_noise_var)?;
        for row in &self.sensing_gain_var {
            positive("sensing_gain_var", row)?;
        }
        positive("carrier_freq", &[self.carrier_freq])?;
        let points = self.tx_ap_positions.iter().chain(&self.rx_ap_positions).chain(&self.ue_positions);
        if !points.chain(std::iter::once(&self.target_position)).all(|p| p[0].is_finite() && p[1].is_finite()) {
            return bad("positions must be finite".into());
        }
        Ok(())
    }

    pub fn n_tx_aps(&self) -> usize {
        self.tx_ap_positions.len()
    }

    pub fn n_rx_aps(&self) -> usize {
        self.rx_ap_positions.len()
    }

    pub fn n_ues(&self) -> usize {
        self.ue_positions.len()
    }

    /// Length `M_t N_t` of a stacked beam or channel.
    pub fn stacked_dim(&self) -> usize {
        self.n_tx_aps() * self.n_tx_antennas
    }

    /// Entries of a stacked vector that belong to transmitting AP `m`.
    pub fn tx_block(&self, m: usize) -> Range<usize> {
        m * self.n_tx_antennas..(m + 1) * self.n_tx_antennas
    }

    pub fn target_tx_angles(&self) -> Vec<f64> {
        self.tx_ap_positions.iter().map(|p| broadside_angle(*p, self.target_position)).collect()
    }

    pub fn target_rx_angles(&self) -> Vec<f64> {
        self.rx_ap_positions.iter().map(|p| broadside_angle(*p, self.target_position)).collect()
    }

    /// `a(θ_m)` towards the target for every transmitting AP.
    pub fn tx_steering(&self) -> Vec<CVec> {
        self.target_tx_angles().into_iter().map(|t| array_response(t, self.n_tx_antennas)).collect()
    }

    pub fn rx_steering(&self) -> Vec<CVec> {
        self.target_rx_angles().into_iter().map(|t| array_response(t, self.n_rx_antennas)).collect()
    }

    /// `ζ̄_m = Σ_{m_r} ζ²_{m m_r}` per transmitting AP.
    pub fn zeta_bar(&self) -> Vec<f64> {
        self.sensing_gain_var.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn radar_noise_sum(&self) -> f64 {
        self.radar_noise_var.iter().sum()
    }

    /// Distance from the target to the nearest UE, `+inf` without UEs.
    pub fn target_ue_distance(&self) -> f64 {
        self.ue_positions.iter().map(|p| distance(*p, self.target_position)).fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> Result<String, CoreError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, CoreError> {
        let sc: Scenario = serde_json::from_str(s)?;
        sc.validate()?;
        Ok(sc)
    }
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Angle of `to` seen from an x-axis array at `from`, measured from broadside.
/// Points in front of the array (larger y) give angles in `(-π/2, π/2)`.
pub fn broadside_angle(from: Point, to: Point) -> f64 {
    (to[0] - from[0]).atan2(to[1] - from[1])
}

/// Half-wavelength ULA response `[exp(jπ k sin θ)]_{k=0..n-1}`.
pub fn array_response(theta: f64, n: usize) -> CVec {
    let phase = std::f64::consts::PI * theta.sin();
    CVec::from_fn(n, |k, _| C64::from_polar(1.0, phase * k as f64))
}

/// Channels of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `h_u`, stacked over transmitting APs.
    pub comm_channels: Vec<CVec>,
    /// `a(θ_{m_t})` towards the target.
    pub tx_steering: Vec<CVec>,
    /// `a(θ_{m_r})` from the target.
    pub rx_steering: Vec<CVec>,
}

impl ChannelSet {
    pub fn n_ues(&self) -> usize {
        self.comm_channels.len()
    }

    /// Check every vector length against `scenario`.
    pub fn check(&self, scenario: &Scenario) -> Result<(), CoreError> {
        let n = scenario.stacked_dim();
        if self.comm_channels.len() != scenario.n_ues() || self.comm_channels.iter().any(|h| h.len() != n) {
            return Err(CoreError::Dimension(format!("expected {} channels of length {n}", scenario.n_ues())));
        }
        if self.tx_steering.len() != scenario.n_tx_aps()
            || self.tx_steering.iter().any(|a| a.len() != scenario.n_tx_antennas)
            || self.rx_steering.len() != scenario.n_rx_aps()
            || self.rx_steering.iter().any(|a| a.len() != scenario.n_rx_antennas)
        {
            return Err(CoreError::Dimension("steering vectors do not match the scenario".into()));
        }
        Ok(())
    }

    /// `h_{mu}`: the part of user `u`'s channel that comes from AP `m`.
    pub fn per_ap(&self, u: usize, m: usize, n_antennas: usize) -> CVec {
        self.comm_channels[u].rows(m * n_antennas, n_antennas).into_owned()
    }
}

/// Stacked beamforming vectors `f_s`, sqrt-watts.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSet {
    /// `n_users` user streams followed by `n_sensing` sensing streams.
    pub streams: Vec<CVec>,
    pub n_users: usize,
    pub n_sensing: usize,
    /// Antennas per transmitting AP, needed to split stacked vectors.
    pub n_antennas: usize,
}

impl BeamSet {
    pub fn new(users: Vec<CVec>, sensing: Vec<CVec>, n_antennas: usize) -> Result<Self, CoreError> {
        let (n_users, n_sensing) = (users.len(), sensing.len());
        let streams: Vec<CVec> = users.into_iter().chain(sensing).collect();
        if n_antennas == 0 {
            return Err(CoreError::Dimension("beams need at least one antenna per AP".into()));
        }
        if let Some(first) = streams.first() {
            if first.len() % n_antennas != 0 || streams.iter().any(|f| f.len() != first.len()) {
                return Err(CoreError::Dimension("streams must share a length that is a multiple of N_t".into()));
            }
        }
        Ok(BeamSet { streams, n_users, n_sensing, n_antennas })
    }

    pub fn zeros(n_users: usize, n_sensing: usize, n_aps: usize, n_antennas: usize) -> Self {
        BeamSet { streams: vec![CVec::zeros(n_aps * n_antennas); n_users + n_sensing], n_users, n_sensing, n_antennas }
    }

    /// Stacked length `M_t N_t`, zero when there are no streams.
    pub fn dim(&self) -> usize {
        self.streams.first().map_or(0, |f| f.len())
    }

    pub fn n_aps(&self) -> usize {
        self.dim() / self.n_antennas
    }

    pub fn n_streams(&self) -> usize {
        self.streams.len()
    }

    pub fn users(&self) -> &[CVec] {
        &self.streams[..self.n_users]
    }

    pub fn sensing(&self) -> &[CVec] {
        &self.streams[self.n_users..]
    }

    /// `f_{ms}`: the part of stream `s` sent by AP `m`.
    pub fn block(&self, s: usize, m: usize) -> CVec {
        self.streams[s].rows(m * self.n_antennas, self.n_antennas).into_owned()
    }

    /// `Σ_s ‖f_{ms}‖²`.
    pub fn ap_power(&self, m: usize) -> f64 {
        let r = m * self.n_antennas..(m + 1) * self.n_antennas;
        self.streams.iter().map(|f| f.as_slice()[r.clone()].iter().map(|z| z.norm_sqr()).sum::<f64>()).sum()
    }

    pub fn ap_powers(&self) -> Vec<f64> {
        (0..self.n_aps()).map(|m| self.ap_power(m)).collect()
    }

    /// Largest relative budget excess `max_m (use_m - P_m) / P_m`, negative when all APs have headroom.
    pub fn budget_excess(&self, budgets: &[f64]) -> f64 {
        self.ap_powers().iter().zip(budgets).map(|(u, p)| (u - p) / p).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Lifted beams `F_s = f_s f_s^H`, with the sensing streams summed into one matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamMatrixSet {
    pub user_matrices: Vec<CMat>,
    pub sensing_matrix: CMat,
}

impl BeamMatrixSet {
    pub fn from_beams(beams: &BeamSet) -> Self {
        let n = beams.dim();
        let user_matrices = beams.users().iter().map(|f| f * f.adjoint()).collect();
        let sensing_matrix = beams.sensing().iter().fold(CMat::zeros(n, n), |acc, f| acc + f * f.adjoint());
        BeamMatrixSet { user_matrices, sensing_matrix }
    }

    /// `Σ_u F_u + F_Q`.
    pub fn total(&self) -> CMat {
        self.user_matrices.iter().fold(self.sensing_matrix.clone(), |acc, f| acc + f)
    }
}

fn check_beams(channels: &ChannelSet, beams: &BeamSet, u: usize) -> Result<(), CoreError> {
    if u >= beams.n_users || u >= channels.n_ues() {
        return Err(CoreError::Dimension(format!("user {u} out of range")));
    }
    if channels.comm_channels[u].len() != beams.dim() {
        return Err(CoreError::Dimension(format!(
            "channel length {} against beam length {}",
            channels.comm_channels[u].len(),
            beams.dim()
        )));
    }
    Ok(())
}

/// `|h_u^H f_u|² / (Σ_{s≠u} |h_u^H f_s|² + σ_u²)` over all other user and sensing streams.
pub fn comm_sinr(channels: &ChannelSet, beams: &BeamSet, u: usize, noise_var: f64) -> Result<f64, CoreError> {
    check_beams(channels, beams, u)?;
    let h = &channels.comm_channels[u];
    let mut signal = 0.0;
    let mut interference = noise_var;
    for (s, f) in beams.streams.iter().enumerate() {
        let g = h.dotc(f).norm_sqr();
        if s == u {
            signal = g;
        } else {
            interference += g;
        }
    }
    Ok(signal / interference)
}

pub fn comm_sinrs(channels: &ChannelSet, beams: &BeamSet, noise_var: &[f64]) -> Result<Vec<f64>, CoreError> {
    (0..beams.n_users).map(|u| comm_sinr(channels, beams, u, noise_var[u])).collect()
}

/// SINR of user `u` in lifted form, `h_u^H F h_u` replacing `|h_u^H f|²`.
pub fn comm_sinr_matrix_form(channels: &ChannelSet, mats: &BeamMatrixSet, u: usize, noise_var: f64) -> f64 {
    let h = &channels.comm_channels[u];
    let quad = |f: &CMat| h.dotc(&(f * h)).re;
    let signal = quad(&mats.user_matrices[u]);
    let interference: f64 = mats
        .user_matrices
        .iter()
        .enumerate()
        .filter(|(v, _)| *v != u)
        .map(|(_, f)| quad(f))
        .sum::<f64>()
        + quad(&mats.sensing_matrix);
    signal / (interference + noise_var)
}

/// Echo energy `Σ_{m_r} Σ_{m_t} ζ²_{m_t m_r} Σ_s |a^H(θ_{m_t}) f_{m_t s}|²`.
pub fn sensing_numerator(scenario: &Scenario, beams: &BeamSet) -> Result<f64, CoreError> {
    if beams.n_streams() > 0 && beams.dim() != scenario.stacked_dim() {
        return Err(CoreError::Dimension(format!("beam length {} against {}", beams.dim(), scenario.stacked_dim())));
    }
    let zeta_bar = scenario.zeta_bar();
    let steering = scenario.tx_steering();
    let mut total = 0.0;
    for (m, a) in steering.iter().enumerate() {
        let r = scenario.tx_block(m);
        let gain: f64 = beams.streams.iter().map(|f| a.dotc(&f.rows(r.start, r.len())).norm_sqr()).sum();
        total += zeta_bar[m] * gain;
    }
    Ok(total)
}

pub fn sensing_snr(scenario: &Scenario, beams: &BeamSet) -> Result<f64, CoreError> {
    Ok(sensing_numerator(scenario, beams)? / scenario.radar_noise_sum())
}

/// Block-diagonal `A` with blocks `ζ̄_m a(θ_m) a^H(θ_m)`.
pub fn build_sensing_matrix_a(scenario: &Scenario) -> CMat {
    let n = scenario.stacked_dim();
    let mut a = CMat::zeros(n, n);
    for (m, (v, z)) in scenario.tx_steering().iter().zip(scenario.zeta_bar()).enumerate() {
        let r = scenario.tx_block(m);
        a.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(&(v * v.adjoint()).scale(z));
    }
    a
}

/// `A = V diag(w) V^H` with the zero-padded steering vectors as columns of `V`.
pub fn sensing_matrix_factors(scenario: &Scenario) -> (CMat, Vec<f64>) {
    let n = scenario.stacked_dim();
    let steering = scenario.tx_steering();
    let mut v = CMat::zeros(n, steering.len());
    for (m, a) in steering.iter().enumerate() {
        v.view_mut((scenario.tx_block(m).start, m), (a.len(), 1)).copy_from(a);
    }
    (v, scenario.zeta_bar())
}

/// `Tr(A Σ_s F_s) / Σ ς²`.
pub fn sensing_snr_sdp_form(a: &CMat, mats: &BeamMatrixSet, radar_noise_sum: f64) -> f64 {
    let mut num = trace_inner(a, &mats.sensing_matrix);
    for f in &mats.user_matrices {
        num += trace_inner(a, f);
    }
    num / radar_noise_sum
}

/// Monte-Carlo estimate of the sensing SNR with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub snr: f64,
    pub std_error: f64,
    pub trials: usize,
}

fn cn(rng: &mut ChaCha8Rng, var: f64) -> C64 {
    let s = (0.5 * var).sqrt();
    C64::new(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal))
}

/// Simulates the received echo of `symbol_len` QPSK symbols per stream with
/// fresh gains `α ~ CN(0, ζ²)` and noise `CN(0, ς² I)` in every trial, and
/// returns the ratio of mean echo energy to mean noise energy.
pub fn monte_carlo_snr_estimate(
    scenario: &Scenario,
    beams: &BeamSet,
    symbol_len: usize,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloEstimate, CoreError> {
    if symbol_len == 0 || trials == 0 {
        return Err(CoreError::Dimension("need at least one symbol and one trial".into()));
    }
    if beams.n_streams() > 0 && beams.dim() != scenario.stacked_dim() {
        return Err(CoreError::Dimension("beams do not match the scenario".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_s = beams.n_streams();
    let steering = scenario.tx_steering();
    // beam-space gains a^H(θ_m) F̄_m, one row of length S per transmitting AP
    let gains: Vec<Vec<C64>> = steering
        .iter()
        .enumerate()
        .map(|(m, a)| {
            let r = scenario.tx_block(m);
            beams.streams.iter().map(|f| a.dotc(&f.rows(r.start, r.len()))).collect()
        })
        .collect();
    let rx_gain: Vec<f64> = scenario.rx_steering().iter().map(|b| b.norm_squared()).collect();
    let qpsk = std::f64::consts::FRAC_1_SQRT_2;

    let mut sig = Vec::with_capacity(trials);
    let mut noise = Vec::with_capacity(trials);
    let mut x = vec![C64::new(0.0, 0.0); n_s * symbol_len];
    let mut r = vec![vec![C64::new(0.0, 0.0); symbol_len]; steering.len()];
    for _ in 0..trials {
        for v in x.iter_mut() {
            let re = if rng.random::<bool>() { qpsk } else { -qpsk };
            let im = if rng.random::<bool>() { qpsk } else { -qpsk };
            *v = C64::new(re, im);
        }
        for (m, row) in r.iter_mut().enumerate() {
            for (l, out) in row.iter_mut().enumerate() {
                *out = (0..n_s).map(|s| gains[m][s] * x[s * symbol_len + l]).sum();
            }
        }
        let (mut e_sig, mut e_noise) = (0.0, 0.0);
        for (mr, &bgain) in rx_gain.iter().enumerate() {
            let alpha: Vec<C64> =
                (0..steering.len()).map(|mt| cn(&mut rng, scenario.sensing_gain_var[mt][mr])).collect();
            // ‖b c^T‖_F² = ‖b‖² ‖c‖² for the rank-one echo b (Σ_m α_m r_m)^T
            let c2: f64 = (0..symbol_len).map(|l| alpha.iter().zip(&r).map(|(a, row)| a * row[l]).sum::<C64>().norm_sqr()).sum();
            e_sig += bgain * c2;
            let var = scenario.radar_noise_var[mr];
            for _ in 0..scenario.n_rx_antennas * symbol_len {
                e_noise += cn(&mut rng, var).norm_sqr();
            }
        }
        sig.push(e_sig);
        noise.push(e_noise);
    }

    let n = trials as f64;
    let mx = sig.iter().sum::<f64>() / n;
    let my = noise.iter().sum::<f64>() / n;
    let snr = mx / my;
    let std_error = if trials > 1 {
        let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
        for (a, b) in sig.iter().zip(&noise) {
            vx += (a - mx) * (a - mx);
            vy += (b - my) * (b - my);
            cxy += (a - mx) * (b - my);
        }
        let d = n - 1.0;
        let (vx, vy, cxy) = (vx / d, vy / d, cxy / d);
        let var = (vx / (my * my) - 2.0 * mx * cxy / (my * my * my) + mx * mx * vy / (my * my * my * my)) / n;
        var.max(0.0).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(MonteCarloEstimate { snr, std_error, trials })
}

/// Outcome class of one strategy run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Optimal,
    /// Optimal to loosened tolerances after the solver stalled.
    OptimalInaccurate,
    Infeasible,
    MaxIters,
    NumericalFailure,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Optimal => "optimal",
            RunStatus::OptimalInaccurate => "optimal-inaccurate",
            RunStatus::Infeasible => "infeasible",
            RunStatus::MaxIters => "max-iters",
            RunStatus::NumericalFailure => "numerical-failure",
        }
    }
}

impl From<SolverStatus> for RunStatus {
    fn from(s: SolverStatus) -> Self {
        match s {
            SolverStatus::Optimal => RunStatus::Optimal,
            SolverStatus::OptimalInaccurate => RunStatus::OptimalInaccurate,
            SolverStatus::Infeasible => RunStatus::Infeasible,
            SolverStatus::MaxIterations => RunStatus::MaxIters,
            // every problem built here has a bounded objective
            SolverStatus::Unbounded | SolverStatus::NumericalFailure => RunStatus::NumericalFailure,
        }
    }
}

impl From<&CoreError> for RunStatus {
    fn from(e: &CoreError) -> Self {
        match e {
            CoreError::Solver(s) => (*s).into(),
            CoreError::Infeasible | CoreError::BracketTooSmall(_) => RunStatus::Infeasible,
            _ => RunStatus::NumericalFailure,
        }
    }
}

/// Metrics of one strategy on one realization. Failed runs carry `NaN` metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub sensing_snr: f64,
    pub ue_sinrs: Vec<f64>,
    /// `min(ue_sinrs)`, `+inf` without UEs.
    pub min_sinr: f64,
    pub achieved_ranks: Vec<usize>,
    pub solver_status: RunStatus,
    pub duality_gap: f64,
    /// Seconds.
    pub wall_time: f64,
    pub seed: u64,
}

impl MetricsRecord {
    pub fn new(sensing_snr: f64, ue_sinrs: Vec<f64>, seed: u64) -> Self {
        let min_sinr = ue_sinrs.iter().copied().fold(f64::INFINITY, f64::min);
        MetricsRecord {
            sensing_snr,
            ue_sinrs,
            min_sinr,
            achieved_ranks: Vec::new(),
            solver_status: RunStatus::Optimal,
            duality_gap: 0.0,
            wall_time: 0.0,
            seed,
        }
    }

    pub fn failed(status: RunStatus, n_users: usize, seed: u64) -> Self {
        MetricsRecord {
            sensing_snr: f64::NAN,
            ue_sinrs: vec![f64::NAN; n_users],
            min_sinr: f64::NAN,
            achieved_ranks: Vec::new(),
            solver_status: status,
            duality_gap: f64::NAN,
            wall_time: 0.0,
            seed,
        }
    }

    pub fn mean_sinr(&self) -> f64 {
        self.ue_sinrs.iter().sum::<f64>() / self.ue_sinrs.len() as f64
    }

    /// Evaluates `beams` with the exact metric functions.
    pub fn from_beams(
        scenario: &Scenario,
        channels: &ChannelSet,
        beams: &BeamSet,
        seed: u64,
    ) -> Result<Self, CoreError> {
        let snr = sensing_snr(scenario, beams)?;
        let sinrs = comm_sinrs(channels, beams, &scenario.ue_noise_var)?;
        Ok(MetricsRecord::new(snr, sinrs, seed))
    }

    /// Evaluates lifted beams with the matrix-form metrics.
    pub fn from_matrices(scenario: &Scenario, channels: &ChannelSet, mats: &BeamMatrixSet, seed: u64) -> Self {
        let a = build_sensing_matrix_a(scenario);
        let snr = sensing_snr_sdp_form(&a, mats, scenario.radar_noise_sum());
        let sinrs = (0..mats.user_matrices.len())
            .map(|u| comm_sinr_matrix_form(channels, mats, u, scenario.ue_noise_var[u]))
            .collect();
        MetricsRecord::new(snr, sinrs, seed)
    }
}
