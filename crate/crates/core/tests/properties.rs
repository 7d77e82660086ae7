use advreg::baselines::{self, FitConfig};
use advreg::data::{self, Dataset, TargetSpec};
use advreg::equilibrium;
use advreg::eval::{self, Algorithm, ScenarioConfig};
use advreg::game::{self, GameParams, ThetaProfile};
use advreg::linalg::{self, dot, norm2, Matrix};
use advreg::rng;
use advreg::verify::{self, Instance};
use proptest::prelude::*;

fn instance(seed: u64) -> Instance {
    verify::random_instance(&mut rng::seeded(seed)).unwrap()
}

fn interior_params(inst: &Instance) -> GameParams {
    let mut p = inst.params();
    p.theta_radius = equilibrium::default_theta_radius(&inst.x, &inst.y).unwrap();
    p
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-1.0f64..1.0, rows * cols)
        .prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

fn spd(dim: usize) -> impl Strategy<Value = Matrix> {
    matrix(dim, dim).prop_map(move |b| {
        let mut a = b.gram();
        a.add_diag(0.1);
        a
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn sherman_morrison_matches_direct_inverse(seed in any::<u64>()) {
        let inst = instance(seed);
        let d = inst.x.cols();
        let refs: Vec<&[f64]> = inst.thetas.iter().map(Vec::as_slice).collect();
        let a_inv = game::incremental_inverse(inst.lambda, d, &refs).unwrap();
        let mut a = Matrix::identity(d).scale(inst.lambda);
        for t in &inst.thetas {
            a = a.add(&Matrix::outer(t, t)).unwrap();
        }
        let err = a_inv.matmul(&a).unwrap().sub(&Matrix::identity(d)).unwrap().max_abs();
        prop_assert!(err <= 1e-10);
        prop_assert!(a_inv.asymmetry() == 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solve_spd_round_trip((a, b) in (1usize..6).prop_flat_map(|d| (spd(d), prop::collection::vec(-1.0f64..1.0, d)))) {
        let x = linalg::solve_spd(&a, &b).unwrap();
        prop_assert!(max_abs_diff(&a.matvec(&x).unwrap(), &b) <= 1e-9);
    }

    #[test]
    fn pd_check_agrees_with_spectrum(m in matrix(3, 3), shift in -1.0f64..1.0) {
        let mut a = m.add(&m.transpose()).unwrap().scale(0.5);
        a.add_diag(shift);
        let a = a.symmetrized().unwrap();
        let eig = linalg::sym_eig(&a).unwrap();
        let lo = *eig.values.last().unwrap();
        let pd = linalg::pd_check(&a).unwrap();
        if lo > 1e-8 {
            prop_assert!(pd);
        }
        if lo < -1e-12 {
            prop_assert!(!pd);
        }
    }

    #[test]
    fn sym_eig_reconstructs(m in matrix(4, 4)) {
        let a = m.add(&m.transpose()).unwrap().scale(0.5).symmetrized().unwrap();
        let eig = linalg::sym_eig(&a).unwrap();
        let v = &eig.vectors;
        let vtv = v.transpose().matmul(v).unwrap();
        prop_assert!(vtv.sub(&Matrix::identity(4)).unwrap().max_abs() <= 1e-10);
        let back = v.matmul(&Matrix::diag(&eig.values)).unwrap().matmul(&v.transpose()).unwrap();
        prop_assert!(back.sub(&a).unwrap().max_abs() <= 1e-10);
        prop_assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn best_response_is_optimal(seed in any::<u64>(), e in prop::collection::vec(-1.0f64..1.0, 24)) {
        let inst = instance(seed);
        let (profile, params) = (inst.profile(), inst.params());
        let x_star = game::attacker_best_response(&profile, &inst.x, &params).unwrap();
        let n = x_star.rows() * x_star.cols();
        let pert = Matrix::from_vec(x_star.rows(), x_star.cols(), e[..n].to_vec()).unwrap().scale(1e-2);
        let base = game::attacker_cost(&profile, &x_star, &inst.x, &params).unwrap();
        let moved = game::attacker_cost(&profile, &x_star.add(&pert).unwrap(), &inst.x, &params).unwrap();
        prop_assert!(base <= moved + 1e-12);
    }

    #[test]
    fn symmetric_best_response_closed_form(seed in any::<u64>()) {
        let inst = instance(seed);
        let n = inst.thetas.len();
        let theta = &inst.thetas[0];
        let params = inst.params();
        let x_star = game::attacker_best_response(&ThetaProfile::symmetric(theta, n), &inst.x, &params).unwrap();
        let s = dot(theta, theta);
        let xt = inst.x.matvec(theta).unwrap();
        let nf = n as f64;
        let want: Vec<f64> = xt
            .iter()
            .zip(&inst.z)
            .map(|(a, z)| (inst.lambda * a + nf * z * s) / (inst.lambda + nf * s))
            .collect();
        prop_assert!(max_abs_diff(&x_star.matvec(theta).unwrap(), &want) <= 1e-10);
    }

    #[test]
    fn learner_relabelling_is_exact(seed in any::<u64>(), rot in 0usize..4) {
        let inst = instance(seed);
        let params = inst.params();
        let n = inst.thetas.len();
        let mut perm = inst.thetas.clone();
        perm.rotate_left(rot % n);
        let (a, b) = (inst.profile(), ThetaProfile::new(perm).unwrap());
        let xa = game::attacker_best_response(&a, &inst.x, &params).unwrap();
        let xb = game::attacker_best_response(&b, &inst.x, &params).unwrap();
        prop_assert_eq!(xa, xb);
        for i in 0..n {
            let j = (i + n - rot % n) % n;
            prop_assert_eq!(
                game::approx_cost(i, &a, &inst.x, &inst.y, &params).unwrap(),
                game::approx_cost(j, &b, &inst.x, &inst.y, &params).unwrap()
            );
        }
    }

    #[test]
    fn equilibrium_objective_is_convex(seed in any::<u64>(), t in 0.0f64..1.0) {
        let inst = instance(seed);
        let params = inst.params();
        let a = &inst.thetas[0];
        let b: Vec<f64> = a.iter().map(|v| -2.0 * v + 0.3).collect();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        let f = |th: &[f64]| equilibrium::equilibrium_objective(th, &inst.x, &inst.y, &params).unwrap();
        prop_assert!(f(&mid) <= t * f(a) + (1.0 - t) * f(&b) + 1e-10);
    }

    #[test]
    fn bisection_and_pgd_agree(seed in any::<u64>()) {
        let inst = instance(seed);
        let params = interior_params(&inst);
        let b = equilibrium::solve_equilibrium_bisection(&inst.x, &inst.y, &params, 1e-12).unwrap();
        let p = equilibrium::solve_equilibrium_pgd(&inst.x, &inst.y, &params, 1e-10, 100_000).unwrap();
        prop_assert!(p.converged);
        let diff = norm2(&linalg::sub(&b.theta_star, &p.theta_star));
        prop_assert!(diff <= 1e-6 * (1.0 + norm2(&b.theta_star)));
    }

    #[test]
    fn equilibrium_gradient_matches_differences(seed in any::<u64>()) {
        let inst = instance(seed);
        let params = inst.params();
        let theta = &inst.thetas[0];
        let g = equilibrium::equilibrium_gradient(theta, &inst.x, &inst.y, &params).unwrap();
        for j in 0..theta.len() {
            let h = 1e-6;
            let mut p = theta.clone();
            p[j] += h;
            let mut m = theta.clone();
            m[j] -= h;
            let f = |th: &[f64]| equilibrium::equilibrium_objective(th, &inst.x, &inst.y, &params).unwrap();
            let fd = (f(&p) - f(&m)) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() <= 1e-6 * (1.0 + g[j].abs()));
        }
    }

    #[test]
    fn equilibrium_is_a_ridge_fixed_point(seed in any::<u64>()) {
        let inst = instance(seed);
        let params = interior_params(&inst);
        let sol = equilibrium::solve_equilibrium(&inst.x, &inst.y, &params).unwrap();
        let kappa = equilibrium::stationarity_weight(&inst.y, &params).unwrap();
        let ridge = baselines::fit_ridge(&inst.x, &inst.y, 0.5 * kappa * sol.s_star).unwrap();
        prop_assert!(max_abs_diff(&ridge, &sol.theta_star) <= 1e-8 * (1.0 + norm2(&ridge)));
        let residual = equilibrium::fixed_point_residual(&inst.x, &inst.y, &params, sol.s_star).unwrap();
        prop_assert!(residual.abs() <= 1e-8 * (1.0 + sol.s_star));
        // symmetric profile satisfies each learner's first-order condition
        let profile = ThetaProfile::symmetric(&sol.theta_star, params.n);
        let g = game::approx_cost_grad(0, &profile, &inst.x, &inst.y, &params).unwrap();
        prop_assert!(norm2(&g) <= 1e-6 * (1.0 + 2.0 * norm2(&inst.x.tmatvec(&inst.y).unwrap())));
    }

    #[test]
    fn fixed_point_residual_is_decreasing(seed in any::<u64>(), a in 0.0f64..4.0, b in 0.0f64..4.0) {
        let inst = instance(seed);
        let params = inst.params();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let g_lo = equilibrium::fixed_point_residual(&inst.x, &inst.y, &params, lo).unwrap();
        let g_hi = equilibrium::fixed_point_residual(&inst.x, &inst.y, &params, hi).unwrap();
        prop_assert!(g_hi <= g_lo + 1e-12);
    }

    #[test]
    fn equilibrium_shrinks_with_attack_weight(seed in any::<u64>(), b1 in 0.0f64..1.0, b2 in 0.0f64..1.0) {
        let inst = instance(seed);
        let mut params = interior_params(&inst);
        let ols = baselines::fit_ols(&inst.x, &inst.y).unwrap();
        let (lo, hi) = if b1 < b2 { (b1, b2) } else { (b2, b1) };
        params.beta = lo;
        let t_lo = equilibrium::solve_equilibrium(&inst.x, &inst.y, &params).unwrap().theta_star;
        params.beta = hi;
        let t_hi = equilibrium::solve_equilibrium(&inst.x, &inst.y, &params).unwrap().theta_star;
        prop_assert!(norm2(&t_hi) <= norm2(&t_lo) + 1e-9);
        prop_assert!(norm2(&t_lo) <= norm2(&ols) + 1e-9);
    }

    #[test]
    fn ridge_norm_is_monotone(seed in any::<u64>(), a1 in 0.0f64..10.0, a2 in 0.0f64..10.0) {
        let inst = instance(seed);
        let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
        let t_lo = baselines::fit_ridge(&inst.x, &inst.y, lo).unwrap();
        let t_hi = baselines::fit_ridge(&inst.x, &inst.y, hi).unwrap();
        prop_assert!(norm2(&t_hi) <= norm2(&t_lo) + 1e-12);
    }

    #[test]
    fn lasso_satisfies_kkt(seed in any::<u64>(), alpha in 0.0f64..2.0) {
        let inst = instance(seed);
        let fit = baselines::fit_lasso(&inst.x, &inst.y, alpha, &FitConfig::default()).unwrap();
        prop_assert!(fit.converged);
        let resid = linalg::sub(&inst.y, &inst.x.matvec(&fit.theta).unwrap());
        let corr = inst.x.tmatvec(&resid).unwrap();
        for (c, t) in corr.iter().zip(&fit.theta) {
            if *t != 0.0 {
                prop_assert!((c - 0.5 * alpha * t.signum()).abs() <= 1e-6);
            } else {
                prop_assert!(c.abs() <= 0.5 * alpha + 1e-6);
            }
        }
    }

    #[test]
    fn inner_max_bounds_hold(seed in any::<u64>()) {
        let inst = instance(seed);
        let params = interior_params(&inst);
        let theta = equilibrium::solve_equilibrium(&inst.x, &inst.y, &params).unwrap().theta_star;
        let c = verify::robust_budget(&inst.y, &params).unwrap();
        let im = verify::robust_inner_max(&theta, &inst.x, &inst.y, c, 300, seed).unwrap();
        let f = equilibrium::equilibrium_objective(&theta, &inst.x, &inst.y, &params).unwrap();
        prop_assert!(im.sampled <= im.closed_form + 1e-9);
        prop_assert!(im.sampled >= 0.99 * im.closed_form);
        prop_assert!(f <= im.closed_form + 1e-9);
    }

    #[test]
    fn standardizer_round_trips(x in matrix(6, 3), scale in 0.1f64..50.0) {
        let x = x.scale(scale);
        let ds = Dataset::new(x.clone(), vec![0.0; 6], vec!["a".into(), "b".into(), "c".into()], "y".into()).unwrap();
        let s = data::fit_standardizer(&ds);
        let back = s.inverse_transform(&s.transform(&x).unwrap()).unwrap();
        prop_assert!(back.sub(&x).unwrap().max_abs() <= 1e-12 * scale.max(1.0));
        let z = s.transform(&x).unwrap();
        for j in 0..3 {
            let (mu, sd) = data::label_stats(&z.col(j));
            prop_assert!(mu.abs() <= 1e-12);
            prop_assert!((sd - 1.0).abs() <= 1e-9 || sd == 0.0);
        }
    }

    #[test]
    fn pca_components_are_orthonormal(x in matrix(8, 4), k in 1usize..=4) {
        let p = data::pca_top_k(&x, k).unwrap();
        let w = p.component_matrix();
        let wtw = w.transpose().matmul(&w).unwrap();
        prop_assert!(wtw.sub(&Matrix::identity(k)).unwrap().max_abs() <= 1e-10);
        prop_assert!(p.eigenvalues.windows(2).all(|e| e[0] >= e[1]));
        for c in &p.components {
            let lead = c.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            prop_assert!(lead >= 0.0);
        }
    }

    #[test]
    fn split_is_a_partition(m in 2usize..200, frac in 0.05f64..0.95, seed in any::<u64>()) {
        match data::split_indices(m, frac, seed) {
            Ok((train, test)) => {
                prop_assert_eq!(train.len(), (frac * m as f64).floor() as usize);
                let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..m).collect::<Vec<_>>());
            }
            Err(_) => {
                let n = (frac * m as f64).floor() as usize;
                prop_assert!(n == 0 || n == m);
            }
        }
    }

    #[test]
    fn masked_target_leaves_other_rows(y in prop::collection::vec(-5.0f64..5.0, 1..20), scale in -3.0f64..3.0) {
        let mask: Vec<usize> = (0..y.len()).step_by(2).collect();
        let spec = TargetSpec { mask: Some(mask.clone()), ..TargetSpec::shift(scale) };
        let z = data::build_target(&y, &spec, 1.5).unwrap();
        for i in 0..y.len() {
            if mask.contains(&i) {
                prop_assert!((z[i] - y[i] - 1.5 * scale).abs() <= 1e-12);
            } else {
                prop_assert_eq!(z[i], y[i]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn report_identity_and_determinism(seed in any::<u64>(), beta in 0.0f64..1.0, lambda in 0.1f64..3.0) {
        let ds = data::synthetic_dataset(&data::SyntheticSpec { rows: 200, ..data::SyntheticSpec::boston() }).unwrap();
        let (tr, te) = data::split_train_test(&ds, 0.5, seed).unwrap();
        let cfg = ScenarioConfig::best_case(lambda, beta, TargetSpec::shift(2.0), 3, seed);
        let rep = eval::run_scenario(&tr, &te, &cfg).unwrap();
        for a in &rep.algorithms {
            let lhs = a.rmse_expected.powi(2);
            let rhs = beta * a.rmse_attacked.powi(2) + (1.0 - beta) * a.rmse_clean.powi(2);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1e-300));
        }
        prop_assert_eq!(rep.to_json().unwrap(), eval::run_scenario(&tr, &te, &cfg).unwrap().to_json().unwrap());
    }
}

/// Stronger attackers (smaller λ) should not lower attacked error. This is
/// not a theorem, so violations are reported rather than asserted.
#[test]
fn attacked_error_versus_attacker_strength() {
    let ds = data::synthetic_dataset(&data::SyntheticSpec::redwine()).unwrap();
    let (tr, te) = data::split_train_test(&ds, 0.5, 1).unwrap();
    let base = ScenarioConfig::best_case(1.0, 0.5, TargetSpec::clipped_above(5.0, 10.0), 5, 1);
    let lambdas = [4.0, 2.0, 1.0, 0.5, 0.25, 0.1];
    let mut flagged = Vec::new();
    let mut fixed = base.clone();
    fixed.algorithms = vec![Algorithm::Mlsg, Algorithm::Ols];
    let mut prev: Option<Vec<f64>> = None;
    for &l in &lambdas {
        let mut cfg = fixed.clone();
        cfg.actual.lambda = l;
        let rep = eval::run_scenario(&tr, &te, &cfg).unwrap();
        let cur: Vec<f64> = rep.algorithms.iter().map(|a| a.rmse_attacked).collect();
        if let Some(p) = &prev {
            for (i, (a, b)) in p.iter().zip(&cur).enumerate() {
                if *b + 1e-9 < *a {
                    flagged.push(format!("{} at λ={l}", rep.algorithms[i].algorithm));
                }
            }
        }
        prev = Some(cur);
    }
    if !flagged.is_empty() {
        eprintln!("attacked error decreased as λ fell: {}", flagged.join(", "));
    }
}
