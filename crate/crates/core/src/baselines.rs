//! Conventional regressors: OLS, Ridge and Lasso, plus k-fold selection of
//! the regularization weight.
//!
//! Objectives are unnormalized and intercept-free:
//! Ridge minimizes `‖Xθ − y‖² + α‖θ‖²`, Lasso minimizes `‖Xθ − y‖² + α‖θ‖₁`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, Matrix};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub alpha: f64,
    pub cd_tol: f64,
    pub cd_max_sweeps: usize,
    pub cv_folds: usize,
    /// Ascending, positive.
    pub cv_alpha_grid: Vec<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            alpha: 1.0,
            cd_tol: 1e-10,
            cd_max_sweeps: 100_000,
            cv_folds: 5,
            cv_alpha_grid: log_grid(1e-4, 1e2, 13),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cv_folds < 2 {
            return Err(Error::Config("cv_folds must be at least 2".into()));
        }
        if self.cv_alpha_grid.is_empty() {
            return Err(Error::Config("empty alpha grid".into()));
        }
        if self.cv_alpha_grid.windows(2).any(|w| w[0] > w[1])
            || self.cv_alpha_grid.iter().any(|a| !(*a > 0.0))
        {
            return Err(Error::Config(
                "alpha grid must be positive and ascending".into(),
            ));
        }
        if !(self.alpha >= 0.0) || !(self.cd_tol > 0.0) {
            return Err(Error::Config("alpha must be >= 0 and cd_tol > 0".into()));
        }
        Ok(())
    }
}

/// `count` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegMethod {
    Ridge,
    Lasso,
}

fn not_pd_to_singular(e: Error) -> Error {
    match e {
        Error::NotPositiveDefinite { .. } => Error::SingularDesign,
        other => other,
    }
}

fn check_xy(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::dims(format!(
            "X has {} rows, labels have length {}",
            x.rows(),
            y.len()
        )));
    }
    Ok(())
}

pub fn fit_ols(x: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    fit_ridge(x, y, 0.0)
}

pub fn fit_ridge(x: &Matrix, y: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_xy(x, y)?;
    if !(alpha >= 0.0) {
        return Err(Error::Config(format!("ridge alpha {alpha} must be >= 0")));
    }
    let mut a = x.gram();
    a.add_diag(alpha);
    linalg::solve_spd(&a, &x.tmatvec(y)?).map_err(not_pd_to_singular)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub theta: Vec<f64>,
    pub sweeps: usize,
    /// False when `cd_max_sweeps` was reached first.
    pub converged: bool,
}

impl LassoFit {
    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::MaxSweepsExceeded(self.sweeps))
        }
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Cyclic coordinate descent, starting from zero.
pub fn fit_lasso(x: &Matrix, y: &[f64], alpha: f64, cfg: &FitConfig) -> Result<LassoFit> {
    check_xy(x, y)?;
    if !(alpha >= 0.0) {
        return Err(Error::Config(format!("lasso alpha {alpha} must be >= 0")));
    }
    let d = x.cols();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| x.col(j)).collect();
    let col_sq: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
    let mut theta = vec![0.0; d];
    let mut resid = y.to_vec();
    let half = 0.5 * alpha;

    for sweep in 1..=cfg.cd_max_sweeps {
        let mut max_change: f64 = 0.0;
        for j in 0..d {
            let old = theta[j];
            let new = if col_sq[j] > 0.0 {
                let rho = dot(&cols[j], &resid) + col_sq[j] * old;
                soft_threshold(rho, half) / col_sq[j]
            } else {
                0.0
            };
            if new != old {
                linalg::axpy(old - new, &cols[j], &mut resid);
                theta[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        if !max_change.is_finite() {
            return Err(Error::NonFinite("lasso coordinates".into()));
        }
        if max_change <= cfg.cd_tol {
            return Ok(LassoFit {
                theta,
                sweeps: sweep,
                converged: true,
            });
        }
    }
    Ok(LassoFit {
        theta,
        sweeps: cfg.cd_max_sweeps,
        converged: false,
    })
}

/// Outcome of k-fold selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub alpha_best: f64,
    /// Mean held-out squared error per grid value, in grid order.
    pub cv_errors: Vec<f64>,
}

pub fn cross_validate(
    x: &Matrix,
    y: &[f64],
    cfg: &FitConfig,
    method: RegMethod,
    seed: u64,
) -> Result<CvResult> {
    check_xy(x, y)?;
    cfg.validate()?;
    let m = x.rows();
    if m < cfg.cv_folds {
        return Err(Error::dims(format!(
            "{m} rows cannot be split into {} folds",
            cfg.cv_folds
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng::seeded(seed));
    let k = cfg.cv_folds;
    let bounds: Vec<(usize, usize)> = (0..k).map(|f| (f * m / k, (f + 1) * m / k)).collect();

    let mut cv_errors = Vec::with_capacity(cfg.cv_alpha_grid.len());
    for &alpha in &cfg.cv_alpha_grid {
        let mut total = 0.0;
        for &(lo, hi) in &bounds {
            let held: Vec<usize> = order[lo..hi].to_vec();
            let kept: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
            let xt = x.select_rows(&kept);
            let yt: Vec<f64> = kept.iter().map(|&i| y[i]).collect();
            let theta = match method {
                RegMethod::Ridge => fit_ridge(&xt, &yt, alpha)?,
                RegMethod::Lasso => fit_lasso(&xt, &yt, alpha, cfg)?.theta,
            };
            let xh = x.select_rows(&held);
            let yh: Vec<f64> = held.iter().map(|&i| y[i]).collect();
            total += linalg::sq_dist(&xh.matvec(&theta)?, &yh) / held.len() as f64;
        }
        cv_errors.push(total / k as f64);
    }

    // grid is ascending, so `<=` resolves ties toward the larger alpha
    let mut best = 0;
    for (i, e) in cv_errors.iter().enumerate() {
        if *e <= cv_errors[best] {
            best = i;
        }
    }
    Ok(CvResult {
        alpha_best: cfg.cv_alpha_grid[best],
        cv_errors,
    })
}
