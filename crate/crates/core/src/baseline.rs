//! Separately designed beams: conjugate and null-space sensing, RZF
//! communication, and max-min SINR communication beams for fixed sensing
//! beams by bisection over SOCP feasibility problems.

use cfisac_conic::{solve_socp_feasibility, CMat, CVec, ComplexSoc, PowerGroup, SocpFeasibilityProblem, SocpOutcome, C64};
use nalgebra::Cholesky;

use crate::model::{comm_sinr, BeamSet, ChannelSet, Scenario};
use crate::subspace::{orthonormal_basis, project_out};
use crate::CoreError;

/// Share `ρ` of every AP budget given to communication, the rest to sensing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    pub rho: f64,
}

impl PowerSplit {
    pub fn new(rho: f64) -> Result<Self, CoreError> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(CoreError::InvalidScenario(format!("power ratio {rho} outside (0, 1)")));
        }
        Ok(PowerSplit { rho })
    }

    /// `P^c_m = ρ P_m`.
    pub fn comm(&self, budgets: &[f64]) -> Vec<f64> {
        budgets.iter().map(|p| self.rho * p).collect()
    }

    /// `P^s_m = P_m - P^c_m`.
    pub fn sensing(&self, budgets: &[f64]) -> Vec<f64> {
        budgets.iter().map(|p| p - self.rho * p).collect()
    }
}

/// One sensing stream with `f_m = sqrt(p_m / N_t) a(θ_m)` at every AP.
pub fn conjugate_sensing(scenario: &Scenario, p_sensing: &[f64]) -> Result<CVec, CoreError> {
    if p_sensing.len() != scenario.n_tx_aps() || p_sensing.iter().any(|p| !(*p >= 0.0)) {
        return Err(CoreError::Dimension("need one nonnegative sensing power per transmitting AP".into()));
    }
    let nt = scenario.n_tx_antennas as f64;
    let mut f = CVec::zeros(scenario.stacked_dim());
    for (m, a) in scenario.tx_steering().iter().enumerate() {
        f.rows_mut(scenario.tx_block(m).start, a.len()).copy_from(&a.scale((p_sensing[m] / nt).sqrt()));
    }
    Ok(f)
}

/// One sensing stream whose per-AP part is `a(θ_m)` projected onto the
/// orthogonal complement of `{h_{mu}}_u`, scaled to power `p_m`.
pub fn nullspace_sensing(scenario: &Scenario, channels: &ChannelSet, p_sensing: &[f64]) -> Result<CVec, CoreError> {
    channels.check(scenario)?;
    if p_sensing.len() != scenario.n_tx_aps() || p_sensing.iter().any(|p| !(*p >= 0.0)) {
        return Err(CoreError::Dimension("need one nonnegative sensing power per transmitting AP".into()));
    }
    let nt = scenario.n_tx_antennas;
    let mut f = CVec::zeros(scenario.stacked_dim());
    for (m, a) in scenario.tx_steering().iter().enumerate() {
        let cols: Vec<CVec> = (0..channels.n_ues()).map(|u| channels.per_ap(u, m, nt)).collect();
        let r = project_out(&orthonormal_basis(&cols, 1e-12), a);
        let rn = r.norm();
        if rn < 1e-10 * a.norm() {
            return Err(CoreError::DegenerateNullspace { ap: m });
        }
        f.rows_mut(m * nt, nt).copy_from(&r.scale(p_sensing[m].sqrt() / rn));
    }
    Ok(f)
}

/// MMSE-style regularisation `U σ̄² / Σ_m P^c_m`.
pub fn default_rzf_lambda(scenario: &Scenario, p_comm: &[f64]) -> f64 {
    let u = scenario.n_ues() as f64;
    let mean_noise = scenario.ue_noise_var.iter().sum::<f64>() / u.max(1.0);
    u * mean_noise / p_comm.iter().sum::<f64>()
}

/// Stacked RZF directions `(λ I + Σ_u h_u h_u^H)^{-1} h_u` before any power
/// normalisation, computed as `H (λ I + H^H H)^{-1}`.
pub fn rzf_directions(channels: &ChannelSet, lambda: f64) -> Result<Vec<CVec>, CoreError> {
    let u = channels.n_ues();
    if u == 0 {
        return Ok(Vec::new());
    }
    let h = CMat::from_columns(&channels.comm_channels);
    let gram = h.adjoint() * &h;
    let scale = gram.diagonal().iter().map(|z| z.re).sum::<f64>() / u as f64;
    // a singular Gram matrix at λ = 0 gets a floor relative to its scale
    let mut reg = lambda.max(0.0);
    for _ in 0..4 {
        let g = &gram + CMat::identity(u, u).scale(reg);
        if let Some(ch) = Cholesky::new(g) {
            let x = ch.solve(&CMat::identity(u, u));
            let f = h * x;
            return Ok((0..u).map(|k| f.column(k).into_owned()).collect());
        }
        reg = reg.max(1e-12 * scale) * 100.0;
    }
    Err(CoreError::Dimension("channel Gram matrix is not positive definite".into()))
}

/// RZF user beams with each per-AP part rescaled to `‖f_{mu}‖² = P^c_m / U`.
/// A per-AP part that vanishes stays zero.
pub fn rzf_comm(
    scenario: &Scenario,
    channels: &ChannelSet,
    lambda: f64,
    p_comm: &[f64],
) -> Result<Vec<CVec>, CoreError> {
    channels.check(scenario)?;
    let nt = scenario.n_tx_antennas;
    let users = scenario.n_ues() as f64;
    let mut dirs = rzf_directions(channels, lambda)?;
    for f in dirs.iter_mut() {
        for (m, p) in p_comm.iter().enumerate() {
            let mut block = f.rows_mut(m * nt, nt);
            let n = block.norm();
            if n > 0.0 {
                block.scale_mut((p / users).sqrt() / n);
            }
        }
    }
    Ok(dirs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionParams {
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Stop once `(hi - lo) <= rel_tol * hi`.
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Tolerance handed to each SOCP feasibility solve.
    pub feastol: f64,
}

impl BisectionParams {
    /// `[0, 1.01 max_u (Σ_m P^c_m) ‖h_u‖² / σ_u²]`. The interference-free MRT
    /// value can be attained exactly with a single AP, hence the margin.
    pub fn mrt_bracket(channels: &ChannelSet, noise_var: &[f64], p_comm: &[f64]) -> Self {
        let total: f64 = p_comm.iter().sum();
        let bound = channels
            .comm_channels
            .iter()
            .zip(noise_var)
            .map(|(h, s)| total * h.norm_squared() / s)
            .fold(0.0, f64::max);
        BisectionParams { gamma_min: 0.0, gamma_max: 1.01 * bound, rel_tol: 1e-3, max_iters: 40, feastol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub gamma: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone)]
pub struct MaxMinResult {
    /// User beams that reach at least `gamma` at every UE.
    pub users: Vec<CVec>,
    pub gamma: f64,
    /// Upper end of the final bracket.
    pub gamma_upper: f64,
    pub probes: Vec<Probe>,
}

/// Feasibility of `SINR_u >= γ` for all users, with `sensing` fixed.
///
/// Each per-AP beam is restricted to the span of that AP's channels: any
/// component outside it costs power and changes no SINR, so the restriction
/// loses nothing and shrinks the cone program.
struct SinrSocp {
    bases: Vec<Vec<CVec>>,
    offsets: Vec<usize>,
    per_user: usize,
    /// `B_m^H h_{mu}` stacked over APs, one vector per user.
    reduced: Vec<CVec>,
    /// `sqrt(σ_u² + Σ_q |h_u^H f_q|²)`.
    floor: Vec<f64>,
    budgets: Vec<f64>,
}

impl SinrSocp {
    fn new(
        scenario: &Scenario,
        channels: &ChannelSet,
        sensing: &[CVec],
        p_comm: &[f64],
    ) -> Result<Self, CoreError> {
        let nt = scenario.n_tx_antennas;
        let n_users = channels.n_ues();
        let bases: Vec<Vec<CVec>> = (0..scenario.n_tx_aps())
            .map(|m| {
                let cols: Vec<CVec> = (0..n_users).map(|u| channels.per_ap(u, m, nt)).collect();
                orthonormal_basis(&cols, 1e-12)
            })
            .collect();
        let mut offsets = Vec::with_capacity(bases.len());
        let mut per_user = 0;
        for b in &bases {
            offsets.push(per_user);
            per_user += b.len();
        }
        let reduced = (0..n_users)
            .map(|u| {
                let mut g = CVec::zeros(per_user);
                for (m, b) in bases.iter().enumerate() {
                    let h = channels.per_ap(u, m, nt);
                    for (k, q) in b.iter().enumerate() {
                        g[offsets[m] + k] = q.dotc(&h);
                    }
                }
                g
            })
            .collect();
        let floor = (0..n_users)
            .map(|u| {
                let h = &channels.comm_channels[u];
                let leak: f64 = sensing.iter().map(|f| h.dotc(f).norm_sqr()).sum();
                (scenario.ue_noise_var[u] + leak).sqrt()
            })
            .collect();
        if p_comm.len() != scenario.n_tx_aps() || p_comm.iter().any(|p| !(*p > 0.0)) {
            return Err(CoreError::Dimension("need one positive communication budget per AP".into()));
        }
        Ok(SinrSocp { bases, offsets, per_user, reduced, floor, budgets: p_comm.to_vec() })
    }

    fn problem(&self, gamma: f64) -> SocpFeasibilityProblem {
        let n_users = self.reduced.len();
        let r = self.per_user;
        let dim = n_users * r;
        let cones = (0..n_users)
            .map(|u| {
                // ‖[g_u^H c_v / s_u]_{v≠u}, 1‖ <= Re(g_u^H c_u) / (s_u sqrt(γ))
                let s = self.floor[u];
                let g = &self.reduced[u];
                let mut a = CMat::zeros(n_users, dim);
                let mut row = 0;
                for v in (0..n_users).filter(|&v| v != u) {
                    for k in 0..r {
                        a[(row, v * r + k)] = g[k].conj() / s;
                    }
                    row += 1;
                }
                let mut b = CVec::zeros(n_users);
                b[n_users - 1] = C64::new(1.0, 0.0);
                let mut c = CVec::zeros(dim);
                let w = 1.0 / (s * gamma.sqrt());
                for k in 0..r {
                    c[u * r + k] = g[k] * w;
                }
                ComplexSoc { a, b, c, d: 0.0 }
            })
            .collect();
        let groups = self
            .bases
            .iter()
            .enumerate()
            .map(|(m, b)| PowerGroup {
                indices: (0..n_users).flat_map(|u| (0..b.len()).map(move |k| (u, k))).map(|(u, k)| u * r + self.offsets[m] + k).collect(),
                budget: self.budgets[m],
            })
            .collect();
        SocpFeasibilityProblem { dim, cones, groups }
    }

    fn beams(&self, x: &CVec, nt: usize) -> Vec<CVec> {
        let n_users = self.reduced.len();
        (0..n_users)
            .map(|u| {
                let mut f = CVec::zeros(self.bases.len() * nt);
                for (m, b) in self.bases.iter().enumerate() {
                    let mut blk = f.rows_mut(m * nt, nt);
                    for (k, q) in b.iter().enumerate() {
                        blk.axpy(x[u * self.per_user + self.offsets[m] + k], q, C64::new(1.0, 0.0));
                    }
                }
                f
            })
            .collect()
    }
}

/// Min SINR of `users` next to the fixed `sensing` streams.
fn min_sinr(scenario: &Scenario, channels: &ChannelSet, users: &[CVec], sensing: &[CVec]) -> Result<f64, CoreError> {
    let beams = BeamSet::new(users.to_vec(), sensing.to_vec(), scenario.n_tx_antennas)?;
    let mut m = f64::INFINITY;
    for u in 0..users.len() {
        m = m.min(comm_sinr(channels, &beams, u, scenario.ue_noise_var[u])?);
    }
    Ok(m)
}

/// Max-min SINR user beams for fixed sensing beams and per-AP communication
/// budgets. Every feasible probe also raises the lower end of the bracket to
/// the SINR its beams actually reach after scaling up to the budget.
pub fn maxmin_comm_bisection(
    scenario: &Scenario,
    channels: &ChannelSet,
    sensing: &[CVec],
    p_comm: &[f64],
    params: &BisectionParams,
) -> Result<MaxMinResult, CoreError> {
    channels.check(scenario)?;
    if !(params.gamma_min >= 0.0 && params.gamma_min < params.gamma_max) {
        return Err(CoreError::Dimension(format!("bad bracket [{}, {}]", params.gamma_min, params.gamma_max)));
    }
    let n_users = channels.n_ues();
    let nt = scenario.n_tx_antennas;
    if n_users == 0 {
        return Ok(MaxMinResult { users: Vec::new(), gamma: f64::INFINITY, gamma_upper: f64::INFINITY, probes: Vec::new() });
    }
    let socp = SinrSocp::new(scenario, channels, sensing, p_comm)?;
    let mut probes = Vec::new();
    let mut probe = |gamma: f64| -> Result<Option<(Vec<CVec>, f64)>, CoreError> {
        let out = solve_socp_feasibility(&socp.problem(gamma), params.feastol)?;
        probes.push(Probe { gamma, feasible: out.is_feasible() });
        match out {
            SocpOutcome::Feasible { x, power_scale } => {
                let users = socp.beams(&x.unscale(power_scale.max(1e-300)), nt);
                let reached = min_sinr(scenario, channels, &users, sensing)?;
                Ok(Some((users, reached)))
            }
            SocpOutcome::Infeasible { .. } => Ok(None),
        }
    };

    if probe(params.gamma_max)?.is_some() {
        return Err(CoreError::BracketTooSmall(params.gamma_max));
    }
    let mut hi = params.gamma_max;
    let (mut lo, mut best) = if params.gamma_min > 0.0 {
        match probe(params.gamma_min)? {
            Some((users, reached)) => (reached.clamp(params.gamma_min, hi), users),
            None => return Err(CoreError::Infeasible),
        }
    } else {
        (0.0, vec![CVec::zeros(scenario.stacked_dim()); n_users])
    };
    for _ in 0..params.max_iters {
        if hi - lo <= params.rel_tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match probe(mid)? {
            Some((users, reached)) => {
                lo = reached.clamp(mid, hi);
                best = users;
            }
            None => hi = mid,
        }
    }
    Ok(MaxMinResult { users: best, gamma: lo, gamma_upper: hi, probes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_split_rejects_endpoints() {
        assert!(PowerSplit::new(0.0).is_err());
        assert!(PowerSplit::new(1.0).is_err());
        let s = PowerSplit::new(0.25).unwrap();
        assert_eq!(s.comm(&[4.0]), vec![1.0]);
        assert_eq!(s.sensing(&[4.0]), vec![3.0]);
    }
}
