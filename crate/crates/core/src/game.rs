//! Cost functions of the multi-learner game and the attacker's best response.
//!
//! `n` learners each deploy a linear model `θᵢ`; the attacker then replaces the
//! feature matrix `X` by `X′`, trading closeness of every learner's prediction
//! to its target `z` against the squared Frobenius cost `λ‖X′ − X‖²_F`.
//!
//! Sums over learners are taken in a canonical (value-sorted) order so that
//! relabelling learners never changes a result, not even in the last bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, sq_dist, Matrix};

/// Exogenous quantities of one game instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    /// Number of learners.
    pub n: usize,
    /// Probability that a test instance is adversarial.
    pub beta: f64,
    /// Weight of the attacker's transformation cost.
    pub lambda: f64,
    /// Attacker target, one entry per row of `X`.
    pub z: Vec<f64>,
    /// Radius of the learners' action ball `‖θ‖₂ ≤ R`.
    pub theta_radius: f64,
}

impl GameParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("learner count must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta {} outside [0, 1]", self.beta)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda {} must be positive", self.lambda)));
        }
        if !(self.theta_radius > 0.0) {
            return Err(Error::Config(format!(
                "theta radius {} must be positive",
                self.theta_radius
            )));
        }
        if self.z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("attacker target".into()));
        }
        Ok(())
    }

    /// `‖z − y‖²`.
    pub fn target_gap_sq(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.z.len() {
            return Err(Error::dims(format!(
                "labels have length {}, target has length {}",
                y.len(),
                self.z.len()
            )));
        }
        Ok(sq_dist(&self.z, y))
    }
}

/// One model per learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaProfile {
    pub thetas: Vec<Vec<f64>>,
}

impl ThetaProfile {
    pub fn new(thetas: Vec<Vec<f64>>) -> Result<Self> {
        let d = thetas
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Config("empty learner profile".into()))?;
        if thetas.iter().any(|t| t.len() != d) {
            return Err(Error::dims("learner models differ in dimension"));
        }
        Ok(ThetaProfile { thetas })
    }

    /// `n` copies of the same model.
    pub fn symmetric(theta: &[f64], n: usize) -> Self {
        ThetaProfile {
            thetas: vec![theta.to_vec(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.thetas.len()
    }

    pub fn dim(&self) -> usize {
        self.thetas[0].len()
    }

    /// True when every model lies in the ball of radius `r`.
    pub fn within_radius(&self, r: f64) -> bool {
        self.thetas.iter().all(|t| linalg::norm2(t) <= r)
    }

    /// Models sorted lexicographically, the canonical summation order.
    fn canonical(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.thetas.iter().map(Vec::as_slice).collect();
        v.sort_by(|a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        v
    }

    /// Profile with learner `i` removed.
    pub fn without(&self, i: usize) -> Vec<Vec<f64>> {
        self.thetas
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, t)| t.clone())
            .collect()
    }
}

/// `A⁻¹ = (λI + Σθᵢθᵢᵀ)⁻¹` and `B = λX + z(Σθᵢ)ᵀ`; the best response is `B A⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOperator {
    pub a_inv: Matrix,
    pub b: Matrix,
}

impl AttackOperator {
    pub fn best_response(&self) -> Matrix {
        self.b
            .matmul(&self.a_inv)
            .expect("operator shapes are consistent by construction")
    }
}

fn check_shapes(profile: &ThetaProfile, x: &Matrix, params: &GameParams) -> Result<()> {
    if x.cols() != profile.dim() {
        return Err(Error::dims(format!(
            "X has {} columns, models have dimension {}",
            x.cols(),
            profile.dim()
        )));
    }
    if params.z.len() != x.rows() {
        return Err(Error::dims(format!(
            "X has {} rows, target has length {}",
            x.rows(),
            params.z.len()
        )));
    }
    Ok(())
}

/// Inverse of `λI + Σ vvᵀ` built by successive rank-one updates of `(1/λ)I`.
pub fn incremental_inverse(lambda: f64, dim: usize, updates: &[&[f64]]) -> Result<Matrix> {
    let mut a_inv = Matrix::identity(dim).scale(1.0 / lambda);
    for v in updates {
        a_inv = linalg::rank_one_inverse_update(&a_inv, v)?;
    }
    Ok(a_inv)
}

/// `λX + z·sᵀ` for a column-sum `s`.
fn b_matrix(x: &Matrix, z: &[f64], lambda: f64, theta_sum: &[f64]) -> Matrix {
    let mut b = x.scale(lambda);
    for i in 0..x.rows() {
        linalg::axpy(z[i], theta_sum, b.row_mut(i));
    }
    b
}

fn sum_vectors(dim: usize, vs: &[&[f64]]) -> Vec<f64> {
    let mut s = vec![0.0; dim];
    for v in vs {
        linalg::axpy(1.0, v, &mut s);
    }
    s
}

pub fn build_attack_operator(
    profile: &ThetaProfile,
    x: &Matrix,
    params: &GameParams,
) -> Result<AttackOperator> {
    check_shapes(profile, x, params)?;
    let d = profile.dim();
    let thetas = profile.canonical();
    let a_inv = incremental_inverse(params.lambda, d, &thetas)?;
    let b = b_matrix(x, &params.z, params.lambda, &sum_vectors(d, &thetas));
    Ok(AttackOperator { a_inv, b })
}

/// The attacker's optimal manipulation `X* = (λX + zΣθᵢᵀ)(λI + Σθᵢθᵢᵀ)⁻¹`.
pub fn attacker_best_response(
    profile: &ThetaProfile,
    x: &Matrix,
    params: &GameParams,
) -> Result<Matrix> {
    Ok(build_attack_operator(profile, x, params)?.best_response())
}

/// `Σᵢ ‖X′θᵢ − z‖² + λ‖X′ − X‖²_F`.
pub fn attacker_cost(
    profile: &ThetaProfile,
    x_prime: &Matrix,
    x: &Matrix,
    params: &GameParams,
) -> Result<f64> {
    check_shapes(profile, x, params)?;
    if x_prime.rows() != x.rows() || x_prime.cols() != x.cols() {
        return Err(Error::dims("X′ and X differ in shape"));
    }
    let mut terms = Vec::with_capacity(profile.n());
    for theta in profile.canonical() {
        terms.push(sq_dist(&x_prime.matvec(theta)?, &params.z));
    }
    let shift = x_prime.sub(x)?.frobenius_norm();
    Ok(terms.iter().sum::<f64>() + params.lambda * shift * shift)
}

/// `β‖X′θ − y‖² + (1 − β)‖Xθ − y‖²`.
pub fn learner_cost(
    theta: &[f64],
    x_prime: &Matrix,
    x: &Matrix,
    y: &[f64],
    beta: f64,
) -> Result<f64> {
    if x_prime.rows() != x.rows() || x_prime.cols() != x.cols() {
        return Err(Error::dims("X′ and X differ in shape"));
    }
    if y.len() != x.rows() {
        return Err(Error::dims(format!(
            "X has {} rows, labels have length {}",
            x.rows(),
            y.len()
        )));
    }
    let attacked = sq_dist(&x_prime.matvec(theta)?, y);
    let clean = sq_dist(&x.matvec(theta)?, y);
    Ok(beta * attacked + (1.0 - beta) * clean)
}

/// Learner `i`'s cost when the attacker best-responds to the whole profile.
pub fn exact_game_cost(
    i: usize,
    profile: &ThetaProfile,
    x: &Matrix,
    y: &[f64],
    params: &GameParams,
) -> Result<f64> {
    let theta = profile
        .thetas
        .get(i)
        .ok_or_else(|| Error::dims(format!("learner {i} out of {}", profile.n())))?;
    let x_star = attacker_best_response(profile, x, params)?;
    learner_cost(theta, &x_star, x, y, params.beta)
}

/// `β‖z − y‖² / λ²`, the weight of the pairwise quartic penalty.
pub fn penalty_weight(y: &[f64], params: &GameParams) -> Result<f64> {
    Ok(params.beta * params.target_gap_sq(y)? / (params.lambda * params.lambda))
}

/// Tractable surrogate `‖Xθᵢ − y‖² + (β/λ²)‖z − y‖² Σⱼ (θⱼᵀθᵢ)²`.
pub fn approx_cost(
    i: usize,
    profile: &ThetaProfile,
    x: &Matrix,
    y: &[f64],
    params: &GameParams,
) -> Result<f64> {
    check_shapes(profile, x, params)?;
    let theta = profile
        .thetas
        .get(i)
        .ok_or_else(|| Error::dims(format!("learner {i} out of {}", profile.n())))?;
    if y.len() != x.rows() {
        return Err(Error::dims("labels and X disagree in length"));
    }
    let weight = penalty_weight(y, params)?;
    let mut terms: Vec<f64> = profile
        .thetas
        .iter()
        .map(|t| {
            let p = dot(t, theta);
            p * p
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    let pairwise: f64 = terms.iter().sum();
    Ok(sq_dist(&x.matvec(theta)?, y) + weight * pairwise)
}

/// Gradient of [`approx_cost`] with respect to learner `i`'s own model.
pub fn approx_cost_grad(
    i: usize,
    profile: &ThetaProfile,
    x: &Matrix,
    y: &[f64],
    params: &GameParams,
) -> Result<Vec<f64>> {
    check_shapes(profile, x, params)?;
    let theta = &profile.thetas[i];
    let weight = penalty_weight(y, params)?;
    let resid = linalg::sub(&x.matvec(theta)?, y);
    let mut g = linalg::scaled(&x.tmatvec(&resid)?, 2.0);
    let own = dot(theta, theta);
    linalg::axpy(4.0 * weight * own, theta, &mut g);
    for (j, other) in profile.thetas.iter().enumerate() {
        if j != i {
            linalg::axpy(2.0 * weight * dot(other, theta), other, &mut g);
        }
    }
    Ok(g)
}
