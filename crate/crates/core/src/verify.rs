//! Randomized numerical checks of the structural results behind the solver:
//! the Sherman–Morrison construction, bounds used to relax the learner cost,
//! Rosen's uniqueness condition, the variational inequality at the computed
//! equilibrium and its link to robust regression.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::equilibrium;
use crate::error::{Error, Result};
use crate::game::{self, GameParams, ThetaProfile};
use crate::linalg::{self, dot, norm2, sq_dist, Matrix};
use crate::rng::{self, Rng};

pub const DEFAULT_TRIALS: usize = 1000;
pub const FAILURE_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    ShermanMorrison,
    QuadraticBound,
    FirstBound,
    RosenPd,
    EquilibriumFixedPoint,
    RobustCorrespondence,
    Theorem2Bound,
}

impl CheckName {
    pub const ALL: [CheckName; 7] = [
        CheckName::ShermanMorrison,
        CheckName::QuadraticBound,
        CheckName::FirstBound,
        CheckName::RosenPd,
        CheckName::EquilibriumFixedPoint,
        CheckName::RobustCorrespondence,
        CheckName::Theorem2Bound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckName::ShermanMorrison => "sherman_morrison",
            CheckName::QuadraticBound => "quadratic_bound",
            CheckName::FirstBound => "first_bound",
            CheckName::RosenPd => "rosen_pd",
            CheckName::EquilibriumFixedPoint => "equilibrium_fixed_point",
            CheckName::RobustCorrespondence => "robust_correspondence",
            CheckName::Theorem2Bound => "theorem2_bound",
        }
    }

    /// Tolerance on the signed violation.
    pub fn default_tolerance(self) -> f64 {
        match self {
            CheckName::ShermanMorrison => 1e-8,
            CheckName::QuadraticBound => 1e-10,
            CheckName::FirstBound => 1e-9,
            CheckName::RosenPd => 0.0,
            CheckName::EquilibriumFixedPoint => 1e-8,
            CheckName::RobustCorrespondence => 1e-8,
            CheckName::Theorem2Bound => f64::INFINITY,
        }
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CheckName::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown check {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_name: String,
    pub trials: usize,
    pub failures: usize,
    /// Largest observed `lhs − rhs` (positive means the inequality broke).
    pub worst_violation: f64,
    pub tolerance: f64,
    pub sample_of_failures: Vec<Value>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct Trial {
    violation: f64,
    /// Overrides the `violation > tol` test (used when the check is not an
    /// inequality with a slack, e.g. a definiteness test).
    failed: Option<bool>,
    instance: Value,
}

impl Trial {
    fn new(violation: f64, instance: Value) -> Self {
        Trial {
            violation,
            failed: None,
            instance,
        }
    }
}

fn run_trials<F>(name: CheckName, trials: usize, seed: u64, tol: f64, body: F) -> Result<CheckReport>
where
    F: Fn(&mut Rng) -> Result<Trial> + Sync,
{
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let results: Vec<Result<Trial>> = (0..trials)
        .into_par_iter()
        .map(|t| body(&mut rng::derived(seed, &[name as u64, t as u64])))
        .collect();
    let mut failures = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut sample = Vec::new();
    for (t, r) in results.into_iter().enumerate() {
        let trial = r?;
        let failed = trial
            .failed
            .unwrap_or(!(trial.violation <= tol) || !trial.violation.is_finite());
        if trial.violation > worst || worst == f64::NEG_INFINITY {
            worst = trial.violation;
        }
        if failed {
            failures += 1;
            if sample.len() < FAILURE_SAMPLES {
                let mut inst = trial.instance;
                inst["trial"] = json!(t);
                inst["violation"] = json!(trial.violation);
                sample.push(inst);
            }
        }
    }
    Ok(CheckReport {
        check_name: name.name().into(),
        trials,
        failures,
        worst_violation: worst,
        tolerance: tol,
        sample_of_failures: sample,
        note: None,
    })
}

/// A small random game: `m ≤ 6` rows, `d ≤ 4` well-conditioned columns and
/// `n ≤ 4` learners, entries uniform on `[−1, 1]`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub thetas: Vec<Vec<f64>>,
    pub lambda: f64,
    pub beta: f64,
}

impl Instance {
    pub fn params(&self) -> GameParams {
        GameParams {
            n: self.thetas.len(),
            beta: self.beta,
            lambda: self.lambda,
            z: self.z.clone(),
            theta_radius: f64::INFINITY,
        }
    }

    pub fn profile(&self) -> ThetaProfile {
        ThetaProfile {
            thetas: self.thetas.clone(),
        }
    }

    fn to_json(&self) -> Value {
        json!({
            "x": (0..self.x.rows()).map(|i| self.x.row(i).to_vec()).collect::<Vec<_>>(),
            "y": self.y,
            "z": self.z,
            "thetas": self.thetas,
            "lambda": self.lambda,
            "beta": self.beta,
        })
    }
}

fn uniform_vec(rng: &mut Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Smallest eigenvalue of `XᵀX` at least this, so columns are independent.
const MIN_GRAM_EIGENVALUE: f64 = 1e-2;

pub fn random_instance(rng: &mut Rng) -> Result<Instance> {
    let d = rng.random_range(1..=4);
    let m = rng.random_range(d + 1..=6);
    let n = rng.random_range(1..=4);
    let x = loop {
        let x = Matrix::from_vec(m, d, uniform_vec(rng, m * d))?;
        let eig = linalg::sym_eig(&x.gram())?;
        if eig.values[d - 1] >= MIN_GRAM_EIGENVALUE {
            break x;
        }
    };
    Ok(Instance {
        y: uniform_vec(rng, m),
        z: uniform_vec(rng, m),
        thetas: (0..n).map(|_| uniform_vec(rng, d)).collect(),
        lambda: rng.random_range(0.5..=2.0),
        beta: rng.random_range(0.0..=1.0),
        x,
    })
}

/// `λI + Σⱼ θⱼθⱼᵀ` assembled directly.
fn a_matrix(lambda: f64, dim: usize, thetas: &[Vec<f64>]) -> Matrix {
    let mut a = Matrix::identity(dim).scale(lambda);
    for t in thetas {
        a = a.add(&Matrix::outer(t, t)).expect("same shape");
    }
    a
}

pub fn check_sherman_morrison(trials: usize, seed: u64, tol: Option<f64>) -> Result<CheckReport> {
    let name = CheckName::ShermanMorrison;
    run_trials(name, trials, seed, tol.unwrap_or(name.default_tolerance()), |rng| {
        let d = rng.random_range(1..=6);
        let n = rng.random_range(1..=4);
        let lambda = rng.random_range(0.5..=2.0);
        let thetas: Vec<Vec<f64>> = (0..n).map(|_| uniform_vec(rng, d)).collect();
        let refs: Vec<&[f64]> = thetas.iter().map(Vec::as_slice).collect();
        let a_inv = game::incremental_inverse(lambda, d, &refs)?;
        let prod = a_inv.matmul(&a_matrix(lambda, d, &thetas))?;
        let err = prod.sub(&Matrix::identity(d))?.max_abs();
        Ok(Trial::new(err, json!({ "lambda": lambda, "thetas": thetas })))
    })
}

pub fn check_quadratic_bound(trials: usize, seed: u64, tol: Option<f64>) -> Result<CheckReport> {
    let name = CheckName::QuadraticBound;
    run_trials(name, trials, seed, tol.unwrap_or(name.default_tolerance()), |rng| {
        let inst = random_instance(rng)?;
        let profile = inst.profile();
        let d = profile.dim();
        let mut worst = f64::NEG_INFINITY;
        for (i, theta) in inst.thetas.iter().enumerate() {
            let others = profile.without(i);
            let refs: Vec<&[f64]> = others.iter().map(Vec::as_slice).collect();
            let a_inv = game::incremental_inverse(inst.lambda, d, &refs)?;
            let lhs = dot(theta, &a_inv.matvec(theta)?);
            let rhs = dot(theta, theta) / inst.lambda;
            worst = worst.max(lhs - rhs);
        }
        Ok(Trial::new(worst, inst.to_json()))
    })
}

/// `B₋ᵢ A₋ᵢ⁻¹ θᵢ`: the prediction of learner `i` when the attacker ignores it.
fn prediction_without(inst: &Instance, i: usize) -> Result<Vec<f64>> {
    let profile = inst.profile();
    let others = profile.without(i);
    let d = profile.dim();
    let refs: Vec<&[f64]> = others.iter().map(Vec::as_slice).collect();
    let a_inv = game::incremental_inverse(inst.lambda, d, &refs)?;
    let mut sum = vec![0.0; d];
    for t in &others {
        linalg::axpy(1.0, t, &mut sum);
    }
    let mut b = inst.x.scale(inst.lambda);
    for r in 0..b.rows() {
        linalg::axpy(inst.z[r], &sum, b.row_mut(r));
    }
    b.matvec(&a_inv.matvec(&inst.thetas[i])?)
}

pub fn check_first_bound(trials: usize, seed: u64, tol: Option<f64>) -> Result<CheckReport> {
    let name = CheckName::FirstBound;
    run_trials(name, trials, seed, tol.unwrap_or(name.default_tolerance()), |rng| {
        let inst = random_instance(rng)?;
        let x_star = game::attacker_best_response(&inst.profile(), &inst.x, &inst.params())?;
        let gap = sq_dist(&inst.z, &inst.y);
        let l2 = inst.lambda * inst.lambda;
        let mut worst = f64::NEG_INFINITY;
        for (i, theta) in inst.thetas.iter().enumerate() {
            let lhs = sq_dist(&x_star.matvec(theta)?, &inst.y);
            let s = dot(theta, theta);
            let rhs = sq_dist(&prediction_without(&inst, i)?, &inst.y) + gap * s * s / l2;
            worst = worst.max(lhs - rhs);
        }
        Ok(Trial::new(worst, inst.to_json()))
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RosenConfig {
    /// One positive weight per learner summing to 1; uniform when absent.
    #[serde(default)]
    pub r_weights: Option<Vec<f64>>,
}

impl RosenConfig {
    pub fn weights(&self, n: usize) -> Result<Vec<f64>> {
        match &self.r_weights {
            None => Ok(vec![1.0 / n as f64; n]),
            Some(w) => {
                if w.len() != n {
                    return Err(Error::Config(format!("{} Rosen weights for {n} learners", w.len())));
                }
                let valid = w.iter().all(|r| *r > 0.0 && (*r < 1.0 || n == 1));
                if !valid || (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return Err(Error::Config("Rosen weights must be positive and sum to 1".into()));
                }
                Ok(w.clone())
            }
        }
    }
}

/// The weighted Jacobian of the surrogate-cost gradient map, `nd × nd`.
pub fn rosen_jacobian(inst: &Instance, r: &[f64]) -> Result<Matrix> {
    let params = inst.params();
    let k = game::penalty_weight(&inst.y, &params)?;
    let n = inst.thetas.len();
    let d = inst.x.cols();
    let gram2 = inst.x.gram().scale(2.0);
    let mut jr = Matrix::zeros(n * d, n * d);
    for i in 0..n {
        let ti = &inst.thetas[i];
        for j in 0..n {
            let block = if i == j {
                let mut inner = Matrix::outer(ti, ti).scale(4.0);
                inner.add_diag(2.0 * dot(ti, ti));
                for (l, tl) in inst.thetas.iter().enumerate() {
                    if l != i {
                        inner = inner.add(&Matrix::outer(tl, tl))?;
                    }
                }
                gram2.add(&inner.scale(2.0 * k))?
            } else {
                let tj = &inst.thetas[j];
                let mut inner = Matrix::outer(tj, ti);
                inner.add_diag(dot(ti, tj));
                inner.scale(2.0 * k)
            };
            for a in 0..d {
                for b in 0..d {
                    jr.row_mut(i * d + a)[j * d + b] = r[i] * block[(a, b)];
                }
            }
        }
    }
    Ok(jr)
}

pub fn check_rosen_pd(trials: usize, seed: u64, cfg: &RosenConfig) -> Result<CheckReport> {
    let name = CheckName::RosenPd;
    run_trials(name, trials, seed, name.default_tolerance(), |rng| {
        let inst = random_instance(rng)?;
        let r = cfg.weights(inst.thetas.len())?;
        let sym = rosen_jacobian(&inst, &r)?.symmetrized()?;
        let pd = linalg::pd_check(&sym)?;
        let min_eig = *linalg::sym_eig(&sym)?.values.last().expect("nonempty");
        Ok(Trial {
            violation: -min_eig,
            failed: Some(!pd),
            instance: inst.to_json(),
        })
    })
}

/// Uniform draw from the ball of radius `r` in `d` dimensions.
fn uniform_in_ball(rng: &mut Rng, d: usize, r: f64) -> Vec<f64> {
    let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let norm = norm2(&g);
    let u: f64 = rng.random();
    let scale = r * u.powf(1.0 / d as f64) / norm;
    linalg::scaled(&g, scale)
}

pub const VI_SAMPLES: usize = 200;

pub fn check_equilibrium_fixed_point(trials: usize, seed: u64, tol: Option<f64>) -> Result<CheckReport> {
    let name = CheckName::EquilibriumFixedPoint;
    run_trials(name, trials, seed, tol.unwrap_or(name.default_tolerance()), |rng| {
        let inst = random_instance(rng)?;
        let mut params = inst.params();
        params.theta_radius = equilibrium::default_theta_radius(&inst.x, &inst.y)?;
        let sol = equilibrium::solve_equilibrium_bisection(&inst.x, &inst.y, &params, 0.0)?;
        let theta = sol.theta_star;
        let profile = ThetaProfile::symmetric(&theta, params.n);
        let grad = game::approx_cost_grad(0, &profile, &inst.x, &inst.y, &params)?;
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..VI_SAMPLES {
            let eta = uniform_in_ball(rng, theta.len(), params.theta_radius);
            worst = worst.max(-dot(&linalg::sub(&eta, &theta), &grad));
        }
        let mut instance = inst.to_json();
        instance["theta_star"] = json!(theta);
        Ok(Trial::new(worst, instance))
    })
}

/// Exact and sampled `max ‖y − (X + Δ)θ‖²` over the disturbances whose Gram
/// matrix satisfies `|G_ij| ≤ c|θᵢθⱼ|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnerMax {
    pub closed_form: f64,
    pub sampled: f64,
    /// Value attained by the maximizing disturbance.
    pub attained: f64,
    /// `max_ij |Gᵢⱼ| − c|θᵢθⱼ|` for that disturbance.
    pub feasibility_gap: f64,
}

pub const INNER_MAX_SAMPLES: usize = 1000;

pub fn robust_inner_max(
    theta: &[f64],
    x: &Matrix,
    y: &[f64],
    c: f64,
    samples: usize,
    seed: u64,
) -> Result<InnerMax> {
    if !(c >= 0.0) {
        return Err(Error::Config(format!("disturbance bound {c} must be >= 0")));
    }
    if x.cols() != theta.len() || x.rows() != y.len() {
        return Err(Error::dims("theta, X and y disagree"));
    }
    let m = x.rows();
    let resid = linalg::sub(y, &x.matvec(theta)?);
    let rnorm = norm2(&resid);
    let s = dot(theta, theta);
    let sc = c.sqrt();
    let closed_form = (rnorm + sc * s).powi(2);

    let mut rng = rng::seeded(seed);
    let u = if rnorm > 0.0 {
        linalg::scaled(&resid, 1.0 / rnorm)
    } else {
        random_unit(&mut rng, m)
    };
    let mut tilde = Matrix::zeros(m, theta.len());
    for (j, t) in theta.iter().enumerate() {
        tilde.set_col(j, &linalg::scaled(&u, -sc * t));
    }
    let attained = disturbed_loss(&tilde, x, y, theta)?;
    let g = tilde.gram();
    let mut feasibility_gap = f64::NEG_INFINITY;
    for i in 0..theta.len() {
        for j in 0..theta.len() {
            feasibility_gap = feasibility_gap.max(g[(i, j)].abs() - c * (theta[i] * theta[j]).abs());
        }
    }

    // Rank-one disturbances u·aᵀ with |aᵢ| ≤ √c|θᵢ| are feasible for any unit u.
    let mut sampled = attained;
    for _ in 1..samples {
        let u = random_unit(&mut rng, m);
        let a: Vec<f64> = theta
            .iter()
            .map(|t| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * rng.random_range(0.0..=1.0) * sc * t.abs()
            })
            .collect();
        let shift = dot(&a, theta);
        let value: f64 = resid
            .iter()
            .zip(&u)
            .map(|(r, ui)| (r - ui * shift).powi(2))
            .sum();
        sampled = sampled.max(value);
    }
    Ok(InnerMax {
        closed_form,
        sampled,
        attained,
        feasibility_gap,
    })
}

fn random_unit(rng: &mut Rng, m: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm2(&g);
        if n > 1e-12 {
            return linalg::scaled(&g, 1.0 / n);
        }
    }
}

fn disturbed_loss(delta: &Matrix, x: &Matrix, y: &[f64], theta: &[f64]) -> Result<f64> {
    Ok(sq_dist(y, &x.add(delta)?.matvec(theta)?))
}

/// `c = β(n+1)‖z − y‖²/(2λ²)`, the disturbance budget matching the
/// equilibrium objective.
pub fn robust_budget(y: &[f64], params: &GameParams) -> Result<f64> {
    Ok(params.beta * (params.n as f64 + 1.0) * params.target_gap_sq(y)?
        / (2.0 * params.lambda * params.lambda))
}

pub fn check_robust_correspondence(trials: usize, seed: u64, tol: Option<f64>) -> Result<CheckReport> {
    let name = CheckName::RobustCorrespondence;
    run_trials(name, trials, seed, tol.unwrap_or(name.default_tolerance()), |rng| {
        let inst = random_instance(rng)?;
        let mut params = inst.params();
        params.theta_radius = equilibrium::default_theta_radius(&inst.x, &inst.y)?;
        let theta = equilibrium::solve_equilibrium(&inst.x, &inst.y, &params)?.theta_star;
        let c = robust_budget(&inst.y, &params)?;
        let im = robust_inner_max(&theta, &inst.x, &inst.y, c, INNER_MAX_SAMPLES, rng.random())?;
        let f = equilibrium::equilibrium_objective(&theta, &inst.x, &inst.y, &params)?;
        let violation = [
            im.sampled - im.closed_form,
            (im.attained - im.closed_form).abs(),
            im.feasibility_gap,
            f - im.closed_form,
        ]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
        let mut instance = inst.to_json();
        instance["theta"] = json!(theta);
        instance["c"] = json!(c);
        instance["inner_max"] = json!(im);
        instance["objective"] = json!(f);
        Ok(Trial::new(violation, instance))
    })
}

pub const THEOREM2_SAMPLES: usize = 500;

/// Radius of the action ball the profiles are sampled from.
const THEOREM2_RADIUS: f64 = 2.0;

/// Largest `cᵢ − c̃ᵢ` over `samples` random profiles of one instance family.
pub fn theorem2_gap(inst: &Instance, samples: usize, rng: &mut Rng) -> Result<f64> {
    let params = inst.params();
    let n = inst.thetas.len();
    let d = inst.x.cols();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let thetas: Vec<Vec<f64>> = (0..n).map(|_| uniform_in_ball(rng, d, THEOREM2_RADIUS)).collect();
        let profile = ThetaProfile { thetas };
        for i in 0..n {
            let exact = game::exact_game_cost(i, &profile, &inst.x, &inst.y, &params)?;
            let approx = game::approx_cost(i, &profile, &inst.x, &inst.y, &params)?;
            worst = worst.max(exact - approx);
        }
    }
    Ok(worst)
}

pub fn check_theorem2_bound(trials: usize, seed: u64) -> Result<CheckReport> {
    let name = CheckName::Theorem2Bound;
    let mut report = run_trials(name, trials, seed, name.default_tolerance(), |rng| {
        let inst = random_instance(rng)?;
        let gap = theorem2_gap(&inst, THEOREM2_SAMPLES, rng)?;
        Ok(Trial::new(gap, inst.to_json()))
    })?;
    report.note = Some(
        "the slack constant is non-constructive; worst_violation is the largest observed \
         exact-minus-surrogate cost gap and only finiteness is asserted"
            .into(),
    );
    Ok(report)
}

/// Shared knobs for [`run_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub trials: usize,
    pub seed: u64,
    /// Replaces every check's default tolerance.
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub rosen: RosenConfig,
}

pub fn run_check(name: CheckName, cfg: &VerifyConfig) -> Result<CheckReport> {
    let (t, s, tol) = (cfg.trials, cfg.seed, cfg.tolerance);
    match name {
        CheckName::ShermanMorrison => check_sherman_morrison(t, s, tol),
        CheckName::QuadraticBound => check_quadratic_bound(t, s, tol),
        CheckName::FirstBound => check_first_bound(t, s, tol),
        CheckName::RosenPd => check_rosen_pd(t, s, &cfg.rosen),
        CheckName::EquilibriumFixedPoint => check_equilibrium_fixed_point(t, s, tol),
        CheckName::RobustCorrespondence => check_robust_correspondence(t, s, tol),
        CheckName::Theorem2Bound => check_theorem2_bound(t, s),
    }
}
