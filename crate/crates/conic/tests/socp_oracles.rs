use cfisac_conic::{
    solve_socp_feasibility, CMat, CVec, ComplexSoc, PowerGroup, SocpFeasibilityProblem, SocpOutcome, C64,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn rand_cvec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Two-user zero-forcing-capable instance: SINR_u >= γ with per-group budgets.
fn two_user(h: &[CVec; 2], gamma: f64, budget: f64) -> SocpFeasibilityProblem {
    let n = h[0].len();
    let dim = 2 * n;
    let cones = (0..2)
        .map(|u| {
            // ‖[h_u^H f_other, σ]‖ <= sqrt(1/γ) Re(h_u^H f_u)
            let mut a = CMat::zeros(2, dim);
            let other = 1 - u;
            for k in 0..n {
                a[(0, other * n + k)] = h[u][k].conj();
            }
            let mut c = CVec::zeros(dim);
            for k in 0..n {
                c[u * n + k] = h[u][k] / gamma.sqrt();
            }
            ComplexSoc { a, b: CVec::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]), c, d: 0.0 }
        })
        .collect();
    SocpFeasibilityProblem { dim, cones, groups: vec![PowerGroup { indices: (0..dim).collect(), budget }] }
}

#[test]
fn feasible_verdicts_come_with_certified_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let h = [rand_cvec(&mut rng, 3), rand_cvec(&mut rng, 3)];
        let gamma = rng.random_range(0.1..5.0);
        if let SocpOutcome::Feasible { x, .. } = solve_socp_feasibility(&two_user(&h, gamma, 1.0), 1e-9).unwrap() {
            assert!(x.norm_squared() <= 1.0 + 1e-7);
            for u in 0..2 {
                let f_u = x.rows(u * 3, 3);
                let f_o = x.rows((1 - u) * 3, 3);
                let sig = h[u].dotc(&f_u).norm_sqr();
                let int = h[u].dotc(&f_o).norm_sqr();
                assert!(sig / (int + 1.0) >= gamma * (1.0 - 1e-6));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Feasibility is monotone in γ and in the budget.
    #[test]
    fn feasibility_is_monotone(seed in 0u64..10_000, g in 0.05f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = [rand_cvec(&mut rng, 3), rand_cvec(&mut rng, 3)];
        let at = |gamma: f64, p: f64| solve_socp_feasibility(&two_user(&h, gamma, p), 1e-9).unwrap().is_feasible();
        if at(g, 1.0) {
            prop_assert!(at(0.5 * g, 1.0));
            prop_assert!(at(g, 2.0));
        } else {
            prop_assert!(!at(2.0 * g, 1.0));
            prop_assert!(!at(g, 0.5));
        }
    }
}
