//! Joint sensing and communication beamforming through semidefinite relaxation.
//!
//! With `F_s = f_s f_s^H`, `Q_u = h_u h_u^H` and `D_m` the selector of AP `m`'s
//! antennas, the relaxed problem is
//!
//! ```text
//! maximize    Tr(A (Σ_u F_u + F_Q))
//! subject to  Tr(Q_u F_u) / γ_u - Σ_{s≠u} Tr(Q_u F_s) >= σ_u²    for every u
//!             Σ_s Tr(D_m F_s) <= P_m                          for every AP m
//!             F_u ⪰ 0, F_Q ⪰ 0
//! ```
//!
//! All sensing streams enter only through their sum `F_Q`, so the stream count
//! matters only when beams are extracted. The relaxation is tight for the user
//! beams: [`recover_rank1`] turns any optimal point into rank-one user beams
//! with the same objective, moving the remainder into `F_Q`.
//!
//! SINR rows are divided by `σ_u²` before solving; multipliers are reported
//! for the rows as written above.

use cfisac_conic::{
    hermitian_eig, outer, solve_sdp, trace_inner, BlockField, BlockSpec, CMat, CVec, HermTerm, SdpConstraint,
    SdpProblem, SdpTolerances, Sense, SolverStatus, C64, DEFAULT_RANK_TOL,
};
use serde::Serialize;

use crate::baseline::BisectionParams;
use crate::model::{build_sensing_matrix_a, sensing_matrix_factors, sensing_numerator, BeamMatrixSet, BeamSet, ChannelSet, Scenario};
use crate::CoreError;

/// Solver tolerances for the joint relaxation. Looser settings leave
/// interior-point residue in `F_Q` that inflates its ε-rank; tighter ones
/// stall in floating point before they pay off.
pub fn jsc_tolerances() -> SdpTolerances {
    SdpTolerances { feastol: 1e-8, gaptol: 1e-8, ..Default::default() }
}

#[derive(Debug, Clone)]
pub struct JscProblemSpec<'a> {
    pub scenario: &'a Scenario,
    pub channels: &'a ChannelSet,
    /// Linear SINR target per UE. A zero target imposes no constraint.
    pub gammas: Vec<f64>,
    /// Number of sensing streams available at extraction time.
    pub n_sensing: usize,
}

impl JscProblemSpec<'_> {
    fn validate(&self) -> Result<(), CoreError> {
        self.scenario.validate()?;
        self.channels.check(self.scenario)?;
        if self.gammas.len() != self.scenario.n_ues() {
            return Err(CoreError::Dimension(format!("{} targets for {} UEs", self.gammas.len(), self.scenario.n_ues())));
        }
        if self.gammas.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(CoreError::Dimension("SINR targets must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct JscSdrSolution {
    pub user_matrices: Vec<CMat>,
    pub sensing_matrix: CMat,
    /// `Tr(A Σ_s F_s)`, evaluated on the returned matrices.
    pub sdr_objective: f64,
    /// `λ_u >= 0` per SINR constraint, zero for UEs without a target.
    pub lambdas: Vec<f64>,
    /// `ν_m >= 0` per AP budget.
    pub nus: Vec<f64>,
    /// `Σ_m ν_m P_m - Σ_u λ_u σ_u²`.
    pub dual_objective: f64,
    pub status: SolverStatus,
    pub selection: FaceSelection,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Summed over both solves when the optimal face was searched.
    pub iterations: usize,
}

impl JscSdrSolution {
    pub fn matrices(&self) -> BeamMatrixSet {
        BeamMatrixSet { user_matrices: self.user_matrices.clone(), sensing_matrix: self.sensing_matrix.clone() }
    }

    pub fn relative_gap(&self) -> f64 {
        (self.dual_objective - self.sdr_objective).abs() / (1.0 + self.sdr_objective.abs())
    }
}

/// `D_m` as a sum of outer products of unit vectors.
fn selector(scenario: &Scenario, m: usize) -> HermTerm {
    let n = scenario.stacked_dim();
    let nt = scenario.n_tx_antennas;
    let mut v = CMat::zeros(n, nt);
    for k in 0..nt {
        v[(m * nt + k, k)] = C64::new(1.0, 0.0);
    }
    HermTerm::LowRank { vectors: v, weights: vec![1.0; nt] }
}

fn sinr_row(h: &CVec, u: usize, gamma: f64, n_blocks: usize) -> SdpConstraint {
    let terms = (0..n_blocks).map(|k| (k, HermTerm::rank_one(h, if k == u { 1.0 / gamma } else { -1.0 }))).collect();
    SdpConstraint { terms, sense: Sense::Ge, rhs: 1.0 }
}

/// Which optimal point the solver hands back when the optimum is not unique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaceSelection {
    /// The interior-point solution itself.
    Central,
    /// Among optimal points, the one leaking least power into the UEs.
    MinInterference,
}

/// Eigenvalues of `B_s` above `-FACE_TOL ‖B_s‖_F` span the optimal face.
const FACE_TOL: f64 = 1e-5;
/// `λ_u ‖h_u‖²` below this fraction of `max_m ν_m` marks a target met with slack.
const SLACK_TARGET_TOL: f64 = 1e-3;

fn relaxation(spec: &JscProblemSpec) -> (SdpProblem, Vec<(usize, usize)>) {
    let sc = spec.scenario;
    let n = sc.stacked_dim();
    let n_blocks = sc.n_ues() + 1;
    let (v, w) = sensing_matrix_factors(sc);
    let a_term = HermTerm::LowRank { vectors: v, weights: w };
    let mut rows = Vec::new();
    let mut sinr_rows = Vec::new();
    for u in 0..sc.n_ues() {
        if spec.gammas[u] > 0.0 {
            let h = spec.channels.comm_channels[u].unscale(sc.ue_noise_var[u].sqrt());
            sinr_rows.push((u, rows.len()));
            rows.push(sinr_row(&h, u, spec.gammas[u], n_blocks));
        }
    }
    for m in 0..sc.n_tx_aps() {
        let d = selector(sc, m);
        rows.push(SdpConstraint {
            terms: (0..n_blocks).map(|k| (k, d.clone())).collect(),
            sense: Sense::Le,
            rhs: sc.ap_power_budget[m],
        });
    }
    let problem = SdpProblem {
        blocks: vec![BlockSpec { dim: n, field: BlockField::Complex }; n_blocks],
        objective: (0..n_blocks).map(|k| (k, a_term.clone())).collect(),
        constraints: rows,
    };
    (problem, sinr_rows)
}

/// Solves the relaxation. Unattainable targets give [`CoreError::Infeasible`].
///
/// When some SINR target is met with slack, the optimum is generally a whole
/// face: power moves freely between streams that all point at the target, and
/// the central point of that face has sensing matrices of needlessly high
/// rank. Complementary slackness pins the face down: every optimal `F_s` lives
/// in the null space of its dual matrix `B_s`, and constraints with positive
/// multipliers are tight. A second, much smaller program over that face then
/// picks the point minimising `Σ_u Σ_{s≠u} Tr(Q_u F_s) / ‖h_u‖²`. It is kept
/// only if it stays optimal to the solver's gap tolerance; the duals always
/// come from the first solve.
pub fn solve_jsc_sdr(spec: &JscProblemSpec, tol: &SdpTolerances) -> Result<JscSdrSolution, CoreError> {
    spec.validate()?;
    let sc = spec.scenario;
    let n_users = sc.n_ues();
    let (problem, sinr_rows) = relaxation(spec);
    let power_start = problem.constraints.len() - sc.n_tx_aps();
    let sol = solve_sdp(&problem, tol)?;
    match sol.status {
        SolverStatus::Optimal | SolverStatus::OptimalInaccurate => {}
        SolverStatus::Infeasible => return Err(CoreError::Infeasible),
        s => return Err(CoreError::Solver(s)),
    }

    let mut lambdas = vec![0.0; n_users];
    for &(u, i) in &sinr_rows {
        lambdas[u] = (-sol.dual_multipliers[i]).max(0.0) / sc.ue_noise_var[u];
    }
    let nus: Vec<f64> = sol.dual_multipliers[power_start..].iter().map(|y| y.max(0.0)).collect();
    let a = build_sensing_matrix_a(sc);
    let objective_of = |blocks: &[CMat]| -> f64 { blocks.iter().map(|f| trace_inner(&a, f)).sum() };
    let dual_objective = nus.iter().zip(&sc.ap_power_budget).map(|(v, p)| v * p).sum::<f64>()
        - lambdas.iter().zip(&sc.ue_noise_var).map(|(l, s)| l * s).sum::<f64>();

    let nu_max = nus.iter().copied().fold(0.0, f64::max);
    let slack_target = |u: usize| lambdas[u] * spec.channels.comm_channels[u].norm_squared() <= SLACK_TARGET_TOL * nu_max;
    let mut blocks = sol.primal_blocks;
    let mut status = sol.status;
    let (mut primal_residual, dual_residual, mut iterations) = (sol.primal_residual, sol.dual_residual, sol.iterations);
    let mut selection = FaceSelection::Central;
    if (0..n_users).any(|u| spec.gammas[u] > 0.0 && slack_target(u)) {
        let opt = objective_of(&blocks);
        let duals = dual_blocks(spec, &lambdas, &nus);
        let active_sinr: Vec<bool> = (0..n_users).map(|u| !slack_target(u)).collect();
        let active_power: Vec<bool> = nus.iter().map(|&v| v > 1e-6 * nu_max).collect();
        if let Some(face) = least_leakage_on_face(spec, &problem, &sinr_rows, &duals, &active_sinr, &active_power, tol)? {
            let face_objective = objective_of(&face.blocks);
            if face_objective >= opt - tol.gaptol * (1.0 + opt.abs()) {
                blocks = face.blocks;
                status = face.status;
                primal_residual = primal_residual.max(face.primal_residual);
                iterations += face.iterations;
                selection = FaceSelection::MinInterference;
            }
        }
    }

    let sdr_objective = objective_of(&blocks);
    let sensing_matrix = blocks.pop().expect("sensing block");
    Ok(JscSdrSolution {
        user_matrices: blocks,
        sensing_matrix,
        sdr_objective,
        lambdas,
        nus,
        dual_objective,
        status,
        selection,
        primal_residual,
        dual_residual,
        iterations,
    })
}

struct FacePoint {
    blocks: Vec<CMat>,
    status: SolverStatus,
    primal_residual: f64,
    iterations: usize,
}

/// `V^H M V` for a term of the full relaxation.
fn compress(term: &HermTerm, v: &CMat) -> HermTerm {
    let full = match term {
        HermTerm::Dense(m) => m.clone(),
        HermTerm::LowRank { vectors, weights } => {
            let mut m = CMat::zeros(vectors.nrows(), vectors.nrows());
            for (j, w) in weights.iter().enumerate() {
                m += outer(&vectors.column(j).into_owned()).scale(*w);
            }
            m
        }
    };
    HermTerm::Dense(v.adjoint() * full * v)
}

/// Minimum-leakage point of the optimal face `{F_s = V_s X_s V_s^H}` with
/// `V_s` spanning the near-null space of `B_s`. `None` when the face program
/// does not solve cleanly.
fn least_leakage_on_face(
    spec: &JscProblemSpec,
    full: &SdpProblem,
    sinr_rows: &[(usize, usize)],
    duals: &DualMatrices,
    active_sinr: &[bool],
    active_power: &[bool],
    tol: &SdpTolerances,
) -> Result<Option<FacePoint>, CoreError> {
    let n_users = spec.scenario.n_ues();
    let b_all: Vec<&CMat> = duals.b_users.iter().chain(std::iter::once(&duals.b_sensing)).collect();
    let bases: Vec<CMat> = b_all
        .iter()
        .map(|b| {
            let e = hermitian_eig(b);
            let cut = -FACE_TOL * b.norm();
            let keep: Vec<usize> = (0..e.values.len()).filter(|&i| e.values[i] >= cut).collect();
            CMat::from_fn(b.nrows(), keep.len(), |r, c| e.vectors[(r, keep[c])])
        })
        .collect();
    // Blocks with an empty face are identically zero.
    let live: Vec<usize> = (0..bases.len()).filter(|&k| bases[k].ncols() > 0).collect();
    let slot = |k: usize| live.iter().position(|&x| x == k);
    let restrict = |terms: &[(usize, HermTerm)]| -> Vec<(usize, HermTerm)> {
        terms.iter().filter_map(|(k, t)| slot(*k).map(|j| (j, compress(t, &bases[*k])))).collect()
    };

    let mut constraints = Vec::with_capacity(full.constraints.len());
    let mut row_user = vec![None; full.constraints.len()];
    for &(u, i) in sinr_rows {
        row_user[i] = Some(u);
    }
    let mut ap = 0;
    for (i, row) in full.constraints.iter().enumerate() {
        let sense = match row_user[i] {
            Some(u) if active_sinr[u] => Sense::Eq,
            Some(_) => row.sense,
            None => {
                let s = if active_power[ap] { Sense::Eq } else { row.sense };
                ap += 1;
                s
            }
        };
        let terms = restrict(&row.terms);
        if terms.is_empty() {
            if (sense == Sense::Ge && row.rhs > 0.0) || (sense == Sense::Eq && row.rhs != 0.0) {
                return Ok(None);
            }
            continue;
        }
        constraints.push(SdpConstraint { terms, sense, rhs: row.rhs });
    }
    let chans = &spec.channels.comm_channels;
    let leakage: Vec<(usize, HermTerm)> = live
        .iter()
        .flat_map(|&k| {
            (0..n_users).filter(move |&u| u != k).map(move |u| {
                let h = chans[u].unscale(chans[u].norm().max(f64::MIN_POSITIVE));
                (k, HermTerm::rank_one(&h, -1.0))
            })
        })
        .collect();
    let face = SdpProblem {
        blocks: live.iter().map(|&k| BlockSpec { dim: bases[k].ncols(), field: BlockField::Complex }).collect(),
        objective: restrict(&leakage),
        constraints,
    };
    let sol = solve_sdp(&face, tol)?;
    if !sol.status.is_optimal() {
        return Ok(None);
    }
    let n = spec.scenario.stacked_dim();
    let blocks = (0..bases.len())
        .map(|k| match slot(k) {
            Some(j) => {
                let f = &bases[k] * &sol.primal_blocks[j] * bases[k].adjoint();
                (&f + f.adjoint()).unscale(2.0)
            }
            None => CMat::zeros(n, n),
        })
        .collect();
    Ok(Some(FacePoint { blocks, status: sol.status, primal_residual: sol.primal_residual, iterations: sol.iterations }))
}

/// Number of eigenvalues above `rel_tol * scale`. Ranks of the sensing part
/// are measured against the whole solution, so an `F_Q` that is zero up to
/// solver noise has rank zero.
pub fn rank_against(values: &[f64], scale: f64, rel_tol: f64) -> usize {
    if !(scale > 0.0) {
        return 0;
    }
    values.iter().filter(|&&v| v > rel_tol * scale).count()
}

fn lambda_max(m: &CMat) -> f64 {
    hermitian_eig(m).values.first().copied().unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryKind {
    /// `rank(F''_Q) <= Q`: the beams attain the relaxation's optimum.
    Optimal,
    /// Only the top `Q` eigenpairs of `F''_Q` were kept.
    Truncated,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryReport {
    pub kind: RecoveryKind,
    /// ε-rank of `F''_Q` relative to `λ_max(Σ_s F'_s)`.
    pub sensing_rank: usize,
    /// Eigenvalues of `F''_Q`, descending.
    pub sensing_eigenvalues: Vec<f64>,
    pub sdr_objective: f64,
    /// `Tr(A Σ_s f''_s f''_s^H)` of the returned beams.
    pub recovered_objective: f64,
    /// `sdr_objective - recovered_objective`.
    pub gap: f64,
}

/// Rank-one user beams `f''_u = F'_u h_u / sqrt(h_u^H F'_u h_u)` and `Q`
/// sensing beams from the top eigenpairs of
/// `F''_Q = F'_Q + Σ_u F'_u - Σ_u f''_u f''_u^H`.
pub fn recover_rank1(solution: &JscSdrSolution, spec: &JscProblemSpec) -> Result<(BeamSet, RecoveryReport), CoreError> {
    spec.validate()?;
    let sc = spec.scenario;
    let n = sc.stacked_dim();
    let total = solution.matrices().total();
    let mut users = Vec::with_capacity(sc.n_ues());
    let mut fq = total.clone();
    for (u, f) in solution.user_matrices.iter().enumerate() {
        let h = &spec.channels.comm_channels[u];
        let fh = f * h;
        let q = h.dotc(&fh).re;
        let floor = 1e-14 * f.norm() * h.norm_squared();
        let beam = if q > floor {
            fh.unscale(q.sqrt())
        } else if spec.gammas[u] == 0.0 {
            CVec::zeros(n)
        } else {
            return Err(CoreError::DegenerateUser(u));
        };
        fq -= outer(&beam);
        users.push(beam);
    }
    let eig = hermitian_eig(&fq);
    let scale = lambda_max(&total);
    let sensing_rank = rank_against(&eig.values, scale, DEFAULT_RANK_TOL);
    let q = spec.n_sensing;
    let sensing: Vec<CVec> = (0..q)
        .map(|i| match eig.values.get(i) {
            Some(&l) if l > 0.0 => eig.vectors.column(i).scale(l.sqrt()),
            _ => CVec::zeros(n),
        })
        .collect();
    let beams = BeamSet::new(users, sensing, sc.n_tx_antennas)?;
    let recovered_objective = sensing_numerator(sc, &beams)?;
    let kind = if sensing_rank <= q { RecoveryKind::Optimal } else { RecoveryKind::Truncated };
    let report = RecoveryReport {
        kind,
        sensing_rank,
        sensing_eigenvalues: eig.values,
        sdr_objective: solution.sdr_objective,
        recovered_objective,
        gap: solution.sdr_objective - recovered_objective,
    };
    Ok((beams, report))
}

#[derive(Debug, Clone)]
pub struct DualMatrices {
    /// `B_u = A + (λ_u/γ_u) Q_u - Σ_{u'≠u} λ_{u'} Q_{u'} - Σ_m ν_m D_m`.
    pub b_users: Vec<CMat>,
    /// `B_Q = A - Σ_u λ_u Q_u - Σ_m ν_m D_m`.
    pub b_sensing: CMat,
}

#[derive(Debug, Clone, Serialize)]
pub struct KktReport {
    /// `‖B_u F_u‖_F / (‖B_u‖_F ‖Σ_s F_s‖_F)`. The whole solution sets the
    /// scale, so a block that is zero up to solver noise does not register.
    pub slackness_users: Vec<f64>,
    pub slackness_sensing: f64,
    /// `λ_max(B_u) / ‖B_u‖_F`; dual feasibility asks for `<= 0`.
    pub lambda_max_users: Vec<f64>,
    pub lambda_max_sensing: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `|primal - dual| / (1 + |primal|)`.
    pub relative_gap: f64,
    /// `max_u ‖B_u - B_Q - λ_u (1 + 1/γ_u) Q_u‖_F / ‖B_u‖_F`.
    pub identity_residual: f64,
}

/// `A - Σ_m ν_m D_m`.
fn sensing_minus_budget(a: &CMat, nus: &[f64], nt: usize) -> CMat {
    let mut b = a.clone();
    for (m, nu) in nus.iter().enumerate() {
        for k in 0..nt {
            b[(m * nt + k, m * nt + k)] -= C64::new(*nu, 0.0);
        }
    }
    b
}

pub fn dual_matrices(solution: &JscSdrSolution, spec: &JscProblemSpec) -> DualMatrices {
    dual_blocks(spec, &solution.lambdas, &solution.nus)
}

fn dual_blocks(spec: &JscProblemSpec, lambdas: &[f64], nus: &[f64]) -> DualMatrices {
    let sc = spec.scenario;
    let base = sensing_minus_budget(&build_sensing_matrix_a(sc), nus, sc.n_tx_antennas);
    let q: Vec<CMat> = spec.channels.comm_channels.iter().map(outer).collect();
    let b_users = (0..sc.n_ues())
        .map(|u| {
            let mut b = base.clone();
            for (v, qv) in q.iter().enumerate() {
                let l = lambdas[v];
                if l == 0.0 {
                    continue;
                }
                let w = if v == u { l / spec.gammas[u] } else { -l };
                b += qv.scale(w);
            }
            b
        })
        .collect();
    let b_sensing = q.iter().zip(lambdas).fold(base, |acc, (qv, l)| acc - qv.scale(*l));
    DualMatrices { b_users, b_sensing }
}

fn relative_product(b: &CMat, f: &CMat, scale: f64) -> f64 {
    let d = b.norm() * scale;
    if d > 0.0 {
        (b * f).norm() / d
    } else {
        0.0
    }
}

fn relative_lambda_max(b: &CMat) -> f64 {
    let n = b.norm();
    if n > 0.0 {
        lambda_max(b) / n
    } else {
        0.0
    }
}

pub fn kkt_dual_report(solution: &JscSdrSolution, spec: &JscProblemSpec) -> (DualMatrices, KktReport) {
    let duals = dual_matrices(solution, spec);
    let scale = solution.matrices().total().norm();
    let identity_residual = duals
        .b_users
        .iter()
        .enumerate()
        .map(|(u, bu)| {
            let l = solution.lambdas[u];
            let mut diff = bu - &duals.b_sensing;
            if l != 0.0 {
                diff -= outer(&spec.channels.comm_channels[u]).scale(l * (1.0 + 1.0 / spec.gammas[u]));
            }
            diff.norm() / bu.norm().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    let report = KktReport {
        slackness_users: duals.b_users.iter().zip(&solution.user_matrices).map(|(b, f)| relative_product(b, f, scale)).collect(),
        slackness_sensing: relative_product(&duals.b_sensing, &solution.sensing_matrix, scale),
        lambda_max_users: duals.b_users.iter().map(relative_lambda_max).collect(),
        lambda_max_sensing: relative_lambda_max(&duals.b_sensing),
        primal_objective: solution.sdr_objective,
        dual_objective: solution.dual_objective,
        relative_gap: solution.relative_gap(),
        identity_residual,
    };
    (duals, report)
}

#[derive(Debug, Clone, Serialize)]
pub struct StreamBoundReport {
    /// ε-rank of `F'_Q` relative to `λ_max(Σ_s F'_s)`.
    pub sensing_rank: usize,
    /// Every `ν_m` above `1e-6 max_m ν_m`.
    pub all_budgets_active: bool,
    /// `M_t`.
    pub ap_bound: usize,
    /// `max(M_t - U, 0)`, the bound for Rayleigh channels.
    pub rayleigh_bound: usize,
    pub ap_bound_holds: bool,
    pub rayleigh_bound_holds: bool,
    /// `h_u^H F'_Q h_u / (‖h_u‖² λ_max(Σ_s F'_s))` for UEs with an active SINR constraint.
    pub nullspace_residuals: Vec<Option<f64>>,
    /// `‖(A - Σ_m ν_m D_m) F'_Q‖_F / (‖A - Σ_m ν_m D_m‖_F ‖Σ_s F'_s‖_F)`.
    pub direction_residual: f64,
    /// `ν_m - ζ̄_m` per AP.
    pub nu_minus_zeta_bar: Vec<f64>,
}

/// Checks the structure that optimal duals impose on `F'_Q`.
pub fn stream_bound_check(solution: &JscSdrSolution, spec: &JscProblemSpec) -> StreamBoundReport {
    let sc = spec.scenario;
    let total = solution.matrices().total();
    let scale = lambda_max(&total);
    let sensing_rank = rank_against(&hermitian_eig(&solution.sensing_matrix).values, scale, DEFAULT_RANK_TOL);
    let nu_max = solution.nus.iter().copied().fold(0.0, f64::max);
    let all_budgets_active = nu_max > 0.0 && solution.nus.iter().all(|&v| v > 1e-6 * nu_max);
    let lambda_cut = 1e-6 * solution.lambdas.iter().copied().fold(0.0, f64::max);
    let nullspace_residuals = spec
        .channels
        .comm_channels
        .iter()
        .zip(&solution.lambdas)
        .map(|(h, &l)| {
            (l > lambda_cut && l > 0.0)
                .then(|| h.dotc(&(&solution.sensing_matrix * h)).re.abs() / (h.norm_squared() * scale).max(f64::MIN_POSITIVE))
        })
        .collect();
    let dir = sensing_minus_budget(&build_sensing_matrix_a(sc), &solution.nus, sc.n_tx_antennas);
    let denom = dir.norm() * total.norm();
    let direction_residual = if denom > 0.0 { (&dir * &solution.sensing_matrix).norm() / denom } else { 0.0 };
    let mt = sc.n_tx_aps();
    let rayleigh_bound = mt.saturating_sub(sc.n_ues());
    StreamBoundReport {
        sensing_rank,
        all_budgets_active,
        ap_bound: mt,
        rayleigh_bound,
        ap_bound_holds: sensing_rank <= mt,
        rayleigh_bound_holds: sensing_rank <= rayleigh_bound,
        nullspace_residuals,
        direction_residual,
        nu_minus_zeta_bar: solution.nus.iter().zip(sc.zeta_bar()).map(|(v, z)| v - z).collect(),
    }
}

/// Smallest `t` such that the SINR targets can be met with budgets `t P_m`,
/// from the relaxation without sensing streams. `+inf` if no power suffices.
pub fn sdr_min_power_scale(
    scenario: &Scenario,
    channels: &ChannelSet,
    gammas: &[f64],
    tol: &SdpTolerances,
) -> Result<f64, CoreError> {
    min_power_scale(scenario, channels, gammas, None, tol)
}

/// With a `cap`, scales above it come back as `+inf`. A decision on `t <= 1`
/// only needs a cap slightly above one, and the capped problem stays well
/// scaled where the uncapped optimum runs into the thousands.
fn min_power_scale(
    scenario: &Scenario,
    channels: &ChannelSet,
    gammas: &[f64],
    cap: Option<f64>,
    tol: &SdpTolerances,
) -> Result<f64, CoreError> {
    let spec = JscProblemSpec { scenario, channels, gammas: gammas.to_vec(), n_sensing: 0 };
    spec.validate()?;
    let n = scenario.stacked_dim();
    let n_users = scenario.n_ues();
    if gammas.iter().all(|g| *g == 0.0) {
        return Ok(0.0);
    }
    let t_block = n_users;
    let mut rows = Vec::new();
    for u in 0..n_users {
        if gammas[u] > 0.0 {
            let h = channels.comm_channels[u].unscale(scenario.ue_noise_var[u].sqrt());
            rows.push(sinr_row(&h, u, gammas[u], n_users));
        }
    }
    for m in 0..scenario.n_tx_aps() {
        // Σ_u Tr(D_m F_u) / P_m - t <= 0
        let d = match selector(scenario, m) {
            HermTerm::LowRank { vectors, weights } => {
                HermTerm::LowRank { vectors, weights: weights.iter().map(|w| w / scenario.ap_power_budget[m]).collect() }
            }
            other => other,
        };
        let mut terms: Vec<(usize, HermTerm)> = (0..n_users).map(|k| (k, d.clone())).collect();
        terms.push((t_block, HermTerm::Dense(CMat::from_element(1, 1, C64::new(-1.0, 0.0)))));
        rows.push(SdpConstraint { terms, sense: Sense::Le, rhs: 0.0 });
    }
    if let Some(cap) = cap {
        rows.push(SdpConstraint {
            terms: vec![(t_block, HermTerm::Dense(CMat::from_element(1, 1, C64::new(1.0, 0.0))))],
            sense: Sense::Le,
            rhs: cap,
        });
    }
    let mut blocks = vec![BlockSpec { dim: n, field: BlockField::Complex }; n_users];
    blocks.push(BlockSpec { dim: 1, field: BlockField::Real });
    let problem = SdpProblem {
        blocks,
        objective: vec![(t_block, HermTerm::Dense(CMat::from_element(1, 1, C64::new(-1.0, 0.0))))],
        constraints: rows,
    };
    let sol = solve_sdp(&problem, tol)?;
    match sol.status {
        SolverStatus::Optimal | SolverStatus::OptimalInaccurate => Ok(sol.primal_blocks[t_block][(0, 0)].re),
        SolverStatus::Infeasible => Ok(f64::INFINITY),
        s => Err(CoreError::Solver(s)),
    }
}

/// Largest common target `γ` for which the relaxation is feasible, by
/// bisection on `t*(γ) <= 1` over the bracket of `params`.
pub fn sdr_max_equal_gamma(
    scenario: &Scenario,
    channels: &ChannelSet,
    params: &BisectionParams,
    tol: &SdpTolerances,
) -> Result<f64, CoreError> {
    let u = scenario.n_ues();
    let feasible =
        |g: f64| -> Result<bool, CoreError> { Ok(min_power_scale(scenario, channels, &vec![g; u], Some(2.0), tol)? <= 1.0) };
    if feasible(params.gamma_max)? {
        return Err(CoreError::BracketTooSmall(params.gamma_max));
    }
    let (mut lo, mut hi) = (params.gamma_min, params.gamma_max);
    if lo > 0.0 && !feasible(lo)? {
        return Err(CoreError::Infeasible);
    }
    for _ in 0..params.max_iters {
        if hi - lo <= params.rel_tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
