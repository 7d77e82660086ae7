//! Symmetric equilibrium of the approximate learner game.
//!
//! With every learner playing the same model, the equilibrium is the
//! minimizer over the action ball of
//!
//! ```text
//! f(θ) = ‖Xθ − y‖² + γ (θᵀθ)²,    γ = β(n+1)‖z − y‖² / (2λ²)
//! ```
//!
//! Two independent routes compute it. The bisection solver uses the fact
//! that any stationary point is a ridge solution `θ(s) = (XᵀX + (κ/2)s I)⁻¹Xᵀy`
//! whose squared norm equals `s` (`κ = 4γ`), and solves that scalar fixed
//! point. The projected-gradient solver descends on `f` directly. The two must
//! agree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::GameParams;
use crate::linalg::{self, dot, norm2, Matrix};

pub const DEFAULT_BISECTION_TOL: f64 = 1e-10;
pub const DEFAULT_PGD_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 50_000;

const ARMIJO_C1: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Bisection,
    ProjectedGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub theta_star: Vec<f64>,
    /// `θ*ᵀθ*`.
    pub s_star: f64,
    /// Norm of the projected-gradient map at `θ*` (plain gradient when interior).
    pub grad_norm: f64,
    pub iterations: usize,
    pub solver: SolverKind,
    pub on_boundary: bool,
    /// False when the iteration cap was hit; `theta_star` is then the best iterate.
    pub converged: bool,
}

impl EquilibriumSolution {
    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::MaxItersExceeded(self.iterations))
        }
    }
}

fn check_data(x: &Matrix, y: &[f64], params: &GameParams) -> Result<()> {
    if y.len() != x.rows() || params.z.len() != x.rows() {
        return Err(Error::dims(format!(
            "X has {} rows, labels {}, target {}",
            x.rows(),
            y.len(),
            params.z.len()
        )));
    }
    Ok(())
}

/// `κ = 2β(n+1)‖z − y‖²/λ²`; the stationarity condition reads
/// `2Xᵀ(Xθ − y) + κ(θᵀθ)θ = 0`.
pub fn stationarity_weight(y: &[f64], params: &GameParams) -> Result<f64> {
    let gap = params.target_gap_sq(y)?;
    Ok(2.0 * params.beta * (params.n as f64 + 1.0) * gap / (params.lambda * params.lambda))
}

pub fn equilibrium_objective(
    theta: &[f64],
    x: &Matrix,
    y: &[f64],
    params: &GameParams,
) -> Result<f64> {
    check_data(x, y, params)?;
    let kappa = stationarity_weight(y, params)?;
    let s = dot(theta, theta);
    Ok(linalg::sq_dist(&x.matvec(theta)?, y) + 0.25 * kappa * s * s)
}

pub fn equilibrium_gradient(
    theta: &[f64],
    x: &Matrix,
    y: &[f64],
    params: &GameParams,
) -> Result<Vec<f64>> {
    check_data(x, y, params)?;
    let kappa = stationarity_weight(y, params)?;
    gradient_with(theta, x, y, kappa)
}

fn gradient_with(theta: &[f64], x: &Matrix, y: &[f64], kappa: f64) -> Result<Vec<f64>> {
    let resid = linalg::sub(&x.matvec(theta)?, y);
    let mut g = linalg::scaled(&x.tmatvec(&resid)?, 2.0);
    linalg::axpy(kappa * dot(theta, theta), theta, &mut g);
    Ok(g)
}

/// Radial projection onto `‖θ‖₂ ≤ r`.
pub fn project_to_ball(theta: &[f64], r: f64) -> Vec<f64> {
    let norm = norm2(theta);
    if norm <= r {
        theta.to_vec()
    } else {
        linalg::scaled(theta, r / norm)
    }
}

/// `10‖θ_OLS‖₂`, or 1 when the least-squares fit is identically zero.
pub fn default_theta_radius(x: &Matrix, y: &[f64]) -> Result<f64> {
    let gram = x.gram();
    let theta = linalg::solve_spd(&gram, &x.tmatvec(y)?).map_err(singular)?;
    let r = 10.0 * norm2(&theta);
    Ok(if r > 0.0 && r.is_finite() { r } else { 1.0 })
}

fn singular(e: Error) -> Error {
    match e {
        Error::NotPositiveDefinite { .. } => Error::SingularDesign,
        other => other,
    }
}

fn finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

/// Scalar-bisection solver.
///
/// Returns the interior stationary point; when it lies outside the action
/// ball the radial projection is returned and flagged `on_boundary` (use
/// [`solve_equilibrium`] for the exact constrained solution).
pub fn solve_equilibrium_bisection(
    x: &Matrix,
    y: &[f64],
    params: &GameParams,
    tol: f64,
) -> Result<EquilibriumSolution> {
    check_data(x, y, params)?;
    if !(tol >= 0.0) {
        return Err(Error::Config(format!("bisection tolerance {tol} must be >= 0")));
    }
    let kappa = stationarity_weight(y, params)?;
    let gram = x.gram();
    if !linalg::pd_check(&gram)? {
        return Err(Error::SingularDesign);
    }
    let xty = x.tmatvec(y)?;
    let grad_scale = 1.0 + 2.0 * norm2(&xty);

    let ridge_at = |s: f64| -> Result<Vec<f64>> {
        let mut a = gram.clone();
        a.add_diag(0.5 * kappa * s);
        let t = linalg::solve_spd(&a, &xty).map_err(singular)?;
        finite(&t, "ridge path")?;
        Ok(t)
    };

    let ols = ridge_at(0.0)?;
    let mut iterations = 0;
    let mut theta = ols.clone();
    if kappa > 0.0 {
        let (mut lo, mut hi) = (0.0_f64, dot(&ols, &ols));
        if !hi.is_finite() {
            return Err(Error::NonFinite("least-squares norm".into()));
        }
        loop {
            let mid = 0.5 * (lo + hi);
            theta = ridge_at(mid)?;
            iterations += 1;
            if mid <= lo || mid >= hi {
                break;
            }
            let g = dot(&theta, &theta) - mid;
            if g > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= tol {
                let grad = gradient_with(&theta, x, y, kappa)?;
                if norm2(&grad) <= 1e-7 * grad_scale {
                    break;
                }
            }
        }
    }

    let on_boundary = norm2(&theta) > params.theta_radius;
    if on_boundary {
        theta = project_to_ball(&theta, params.theta_radius);
    }
    let grad_norm = projected_gradient_norm(
        &theta,
        &gradient_with(&theta, x, y, kappa)?,
        params.theta_radius,
    );
    Ok(EquilibriumSolution {
        s_star: dot(&theta, &theta),
        theta_star: theta,
        grad_norm,
        iterations,
        solver: SolverKind::Bisection,
        on_boundary,
        converged: true,
    })
}

/// `‖θ − P(θ − ∇f)‖`, which reduces to `‖∇f‖` in the interior.
pub fn projected_gradient_norm(theta: &[f64], grad: &[f64], radius: f64) -> f64 {
    let stepped = linalg::sub(theta, grad);
    norm2(&linalg::sub(theta, &project_to_ball(&stepped, radius)))
}

/// Result of a generic projected-gradient run.
#[derive(Debug, Clone)]
pub struct PgdOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub pg_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Projected gradient descent over the ball `‖x‖ ≤ radius` with
/// backtracking. A step is accepted when it passes the Armijo test or when
/// the secant curvature along it is at most `1/t`.
///
/// The first trial step is `initial_step`; later iterations start from twice
/// the last accepted step. Stops once the projected-gradient norm is at most
/// `tol`.
pub fn projected_gradient<F, G>(
    objective: F,
    gradient: G,
    x0: &[f64],
    radius: f64,
    initial_step: f64,
    tol: f64,
    max_iters: usize,
) -> Result<PgdOutcome>
where
    F: Fn(&[f64]) -> Result<f64>,
    G: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = project_to_ball(x0, radius);
    let mut fx = objective(&x)?;
    let mut g = gradient(&x)?;
    let mut step = initial_step;
    let mut iterations = 0;
    loop {
        finite(&g, "gradient")?;
        let pg_norm = projected_gradient_norm(&x, &g, radius);
        if pg_norm <= tol || iterations == max_iters {
            return Ok(PgdOutcome {
                x,
                value: fx,
                pg_norm,
                iterations,
                converged: pg_norm <= tol,
            });
        }
        iterations += 1;

        let mut t = step;
        let (next, f_next, g_next) = loop {
            let mut trial = x.clone();
            linalg::axpy(-t, &g, &mut trial);
            let trial = project_to_ball(&trial, radius);
            let d = linalg::sub(&trial, &x);
            let f_trial = objective(&trial)?;
            let g_trial = gradient(&trial)?;
            let decrease = dot(&g, &d);
            let armijo = f_trial <= fx + ARMIJO_C1 * decrease;
            // secant curvature along d; robust once f differences hit rounding
            let dd = dot(&d, &d);
            let curvature = dot(&linalg::sub(&g_trial, &g), &d) / dd;
            let flat = dd > 0.0 && decrease < 0.0 && t * curvature <= 1.0;
            if armijo || flat || t < 1e-300 {
                break (trial, f_trial, g_trial);
            }
            t *= BACKTRACK;
        };
        if next == x {
            // no representable progress left
            return Ok(PgdOutcome {
                x,
                value: fx,
                pg_norm,
                iterations,
                converged: false,
            });
        }
        x = next;
        fx = f_next;
        g = g_next;
        step = 2.0 * t;
    }
}

/// Projected-gradient solver on `f`, started from the origin.
pub fn solve_equilibrium_pgd(
    x: &Matrix,
    y: &[f64],
    params: &GameParams,
    tol: f64,
    max_iters: usize,
) -> Result<EquilibriumSolution> {
    check_data(x, y, params)?;
    if max_iters == 0 {
        return Err(Error::Config("max_iters must be at least 1".into()));
    }
    let kappa = stationarity_weight(y, params)?;
    let gram = x.gram();
    if !linalg::pd_check(&gram)? {
        return Err(Error::SingularDesign);
    }
    let xty = x.tmatvec(y)?;
    let r = params.theta_radius;

    // Gershgorin bound on λmax(XᵀX) plus a bound on the quartic term's curvature
    let row_bound = (0..gram.rows())
        .map(|i| gram.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let lipschitz = 2.0 * row_bound + 6.0 * kappa * r * r;

    let objective = |t: &[f64]| -> Result<f64> {
        let s = dot(t, t);
        Ok(linalg::sq_dist(&x.matvec(t)?, y) + 0.25 * kappa * s * s)
    };
    let gradient = |t: &[f64]| gradient_with(t, x, y, kappa);

    let out = projected_gradient(
        objective,
        gradient,
        &vec![0.0; x.cols()],
        r,
        1.0 / lipschitz,
        tol * (1.0 + 2.0 * norm2(&xty)),
        max_iters,
    )?;
    let norm = norm2(&out.x);
    Ok(EquilibriumSolution {
        s_star: dot(&out.x, &out.x),
        on_boundary: (norm - r).abs() <= BOUNDARY_TOL * r.max(1.0),
        theta_star: out.x,
        grad_norm: out.pg_norm,
        iterations: out.iterations,
        solver: SolverKind::ProjectedGradient,
        converged: out.converged,
    })
}

/// Bisection when the stationary point is interior, projected gradient otherwise.
pub fn solve_equilibrium(x: &Matrix, y: &[f64], params: &GameParams) -> Result<EquilibriumSolution> {
    let sol = solve_equilibrium_bisection(x, y, params, DEFAULT_BISECTION_TOL)?;
    if !sol.on_boundary {
        return Ok(sol);
    }
    solve_equilibrium_pgd(x, y, params, DEFAULT_PGD_TOL, DEFAULT_MAX_ITERS)
}

/// `g(s) = ‖θ(s)‖² − s` on the ridge path; exposed for diagnostics.
pub fn fixed_point_residual(x: &Matrix, y: &[f64], params: &GameParams, s: f64) -> Result<f64> {
    let kappa = stationarity_weight(y, params)?;
    let mut a = x.gram();
    a.add_diag(0.5 * kappa * s);
    let t = linalg::solve_spd(&a, &x.tmatvec(y)?).map_err(singular)?;
    Ok(dot(&t, &t) - s)
}
