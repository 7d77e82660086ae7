//! Attack simulation on held-out data, the expected-RMSE metric, single
//! scenarios comparing MLSG with the baselines, and λ×β sweeps.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, FitConfig, RegMethod};
use crate::data::{self, Dataset, Pca, Standardizer, TargetSpec};
use crate::equilibrium::{self, SolverKind};
use crate::error::{Error, Result};
use crate::game::{self, GameParams, ThetaProfile};
use crate::linalg::{sq_dist, Matrix};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Mlsg,
    Ols,
    Ridge,
    Lasso,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Mlsg,
        Algorithm::Ols,
        Algorithm::Ridge,
        Algorithm::Lasso,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Mlsg => "mlsg",
            Algorithm::Ols => "ols",
            Algorithm::Ridge => "ridge",
            Algorithm::Lasso => "lasso",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// Attacker parameters, either as the defender believes them or as they are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackModel {
    pub lambda: f64,
    pub beta: f64,
    pub target: TargetSpec,
    /// When set, `target.delta_scale` is redrawn uniformly from this range on
    /// every run.
    #[serde(default)]
    pub delta_scale_range: Option<[f64; 2]>,
}

impl AttackModel {
    pub fn new(lambda: f64, beta: f64, target: TargetSpec) -> Self {
        AttackModel {
            lambda,
            beta,
            target,
            delta_scale_range: None,
        }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("{what} lambda {} must be positive", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("{what} beta {} outside [0, 1]", self.beta)));
        }
        if let Some([lo, hi]) = self.delta_scale_range {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("{what} delta range [{lo}, {hi}] is empty")));
            }
        }
        self.target.validate()
    }

    /// The target spec for one run, drawing the shift if a range is set.
    fn realize(&self, rng: &mut rng::Rng) -> TargetSpec {
        let mut spec = self.target.clone();
        if let Some([lo, hi]) = self.delta_scale_range {
            spec.delta_scale = if lo < hi { rng.random_range(lo..hi) } else { lo };
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub standardize: bool,
    /// Subtract the training-label mean so that a fixed intercept is never
    /// exposed to the attacker.
    pub center_labels: bool,
    #[serde(default)]
    pub pca_components: Option<usize>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            standardize: true,
            center_labels: true,
            pca_components: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub defender: AttackModel,
    pub actual: AttackModel,
    pub algorithms: Vec<Algorithm>,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    /// Radius of the learners' action ball; defaults to `10‖θ_OLS‖`.
    #[serde(default)]
    pub theta_radius: Option<f64>,
}

impl ScenarioConfig {
    /// Defender estimates equal to the actual attacker.
    pub fn best_case(lambda: f64, beta: f64, target: TargetSpec, n: usize, seed: u64) -> Self {
        let model = AttackModel::new(lambda, beta, target);
        ScenarioConfig {
            defender: model.clone(),
            actual: model,
            algorithms: Algorithm::ALL.to_vec(),
            n,
            seed,
            fit: FitConfig::default(),
            preprocess: PreprocessConfig::default(),
            theta_radius: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("learner count must be at least 1".into()));
        }
        if let Some(r) = self.theta_radius {
            if !(r > 0.0) {
                return Err(Error::Config(format!("theta radius {r} must be positive")));
            }
        }
        self.defender.validate("defender")?;
        self.actual.validate("actual")?;
        self.fit.validate()
    }
}

/// Preprocessing fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub standardizer: Option<Standardizer>,
    pub pca: Option<Pca>,
    pub label_mean: f64,
    pub label_std: f64,
}

impl Preprocessor {
    pub fn fit(train: &Dataset, cfg: &PreprocessConfig) -> Result<Self> {
        let standardizer = cfg.standardize.then(|| data::fit_standardizer(train));
        let pca = match cfg.pca_components {
            Some(k) => {
                let x = match &standardizer {
                    Some(s) => s.transform(&train.x)?,
                    None => train.x.clone(),
                };
                Some(data::pca_top_k(&x, k)?)
            }
            None => None,
        };
        let (mu, sigma) = data::label_stats(&train.y);
        Ok(Preprocessor {
            standardizer,
            pca,
            label_mean: if cfg.center_labels { mu } else { 0.0 },
            label_std: sigma,
        })
    }

    pub fn features(&self, x: &Matrix) -> Result<Matrix> {
        let x = match &self.standardizer {
            Some(s) => s.transform(x)?,
            None => x.clone(),
        };
        match &self.pca {
            Some(p) => p.project(&x),
            None => Ok(x),
        }
    }

    pub fn labels(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| v - self.label_mean).collect()
    }

    /// Attacker target on the raw label scale, shifted like the labels.
    pub fn target(&self, y_raw: &[f64], spec: &TargetSpec) -> Result<Vec<f64>> {
        Ok(self.labels(&data::build_target(y_raw, spec, self.label_std)?))
    }
}

/// Applies the attacker's best response to the deployed profile.
pub fn simulate_attack(
    thetas: &ThetaProfile,
    x_test: &Matrix,
    z_test: &[f64],
    lambda: f64,
) -> Result<Matrix> {
    let params = GameParams {
        n: thetas.n(),
        beta: 0.0,
        lambda,
        z: z_test.to_vec(),
        theta_radius: f64::INFINITY,
    };
    game::attacker_best_response(thetas, x_test, &params)
}

/// `√((β‖ŷᴬ − y‖² + (1 − β)‖ŷ − y‖²) / N)`.
pub fn expected_rmse(y: &[f64], yhat_clean: &[f64], yhat_attacked: &[f64], beta: f64) -> Result<f64> {
    let n = y.len();
    if n == 0 || yhat_clean.len() != n || yhat_attacked.len() != n {
        return Err(Error::dims(format!(
            "labels {n}, clean predictions {}, attacked predictions {}",
            yhat_clean.len(),
            yhat_attacked.len()
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Config(format!("beta {beta} outside [0, 1]")));
    }
    let attacked = sq_dist(yhat_attacked, y);
    let clean = sq_dist(yhat_clean, y);
    Ok(((beta * attacked + (1.0 - beta) * clean) / n as f64).sqrt())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub solver: Option<SolverKind>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub s_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grad_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theta_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub algorithm: Algorithm,
    pub theta: Vec<f64>,
    pub diagnostics: FitDiagnostics,
}

/// Trains one algorithm on preprocessed data.
///
/// `z` and `defender` are only read for MLSG; `cv_seed` only for Ridge and
/// Lasso.
pub fn fit_algorithm(
    algorithm: Algorithm,
    x: &Matrix,
    y: &[f64],
    z: &[f64],
    defender: &AttackModel,
    n: usize,
    theta_radius: Option<f64>,
    fit: &FitConfig,
    cv_seed: u64,
) -> Result<FittedModel> {
    let mut diagnostics = FitDiagnostics::default();
    let theta = match algorithm {
        Algorithm::Mlsg => {
            let radius = match theta_radius {
                Some(r) => r,
                None => equilibrium::default_theta_radius(x, y)?,
            };
            let params = GameParams {
                n,
                beta: defender.beta,
                lambda: defender.lambda,
                z: z.to_vec(),
                theta_radius: radius,
            };
            let sol = equilibrium::solve_equilibrium(x, y, &params)?.ensure_converged()?;
            diagnostics.solver = Some(sol.solver);
            diagnostics.iterations = Some(sol.iterations);
            diagnostics.s_star = Some(sol.s_star);
            diagnostics.grad_norm = Some(sol.grad_norm);
            diagnostics.theta_radius = Some(radius);
            sol.theta_star
        }
        Algorithm::Ols => baselines::fit_ols(x, y)?,
        Algorithm::Ridge => {
            let cv = baselines::cross_validate(x, y, fit, RegMethod::Ridge, cv_seed)?;
            diagnostics.alpha = Some(cv.alpha_best);
            baselines::fit_ridge(x, y, cv.alpha_best)?
        }
        Algorithm::Lasso => {
            let cv = baselines::cross_validate(x, y, fit, RegMethod::Lasso, cv_seed)?;
            diagnostics.alpha = Some(cv.alpha_best);
            let f = baselines::fit_lasso(x, y, cv.alpha_best, fit)?.ensure_converged()?;
            diagnostics.iterations = Some(f.sweeps);
            f.theta
        }
    };
    Ok(FittedModel {
        algorithm,
        theta,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmReport {
    pub algorithm: Algorithm,
    pub rmse_expected: f64,
    pub rmse_clean: f64,
    pub rmse_attacked: f64,
    pub theta: Vec<f64>,
    pub diagnostics: FitDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetadata {
    pub config: ScenarioConfig,
    pub preprocessing: Preprocessor,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Shift scales actually used this run.
    pub defender_delta_scale: f64,
    pub actual_delta_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub algorithms: Vec<AlgorithmReport>,
    pub metadata: ScenarioMetadata,
}

impl EvalReport {
    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmReport> {
        self.algorithms.iter().find(|r| r.algorithm == algorithm)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Trains every selected algorithm on `train` and scores it on `test` under
/// the actual attacker.
pub fn run_scenario(train: &Dataset, test: &Dataset, cfg: &ScenarioConfig) -> Result<EvalReport> {
    cfg.validate()?;
    if train.x.cols() != test.x.cols() {
        return Err(Error::dims("train and test feature counts differ"));
    }
    let prep = Preprocessor::fit(train, &cfg.preprocess)?;
    let x_train = prep.features(&train.x)?;
    let y_train = prep.labels(&train.y);
    let x_test = prep.features(&test.x)?;
    let y_test = prep.labels(&test.y);

    let mut draws = rng::derived(cfg.seed, &[0]);
    let defender_target = cfg.defender.realize(&mut draws);
    let actual_target = cfg.actual.realize(&mut draws);
    let z_hat = prep.target(&train.y, &defender_target)?;
    let z_test = prep.target(&test.y, &actual_target)?;

    let mut algorithms: Vec<Algorithm> = cfg.algorithms.clone();
    algorithms.sort();
    algorithms.dedup();

    let cv_seed = rng::derive_seed(cfg.seed, &[1]);
    let mut reports = Vec::with_capacity(algorithms.len());
    for algorithm in algorithms {
        let model = fit_algorithm(
            algorithm,
            &x_train,
            &y_train,
            &z_hat,
            &cfg.defender,
            cfg.n,
            cfg.theta_radius,
            &cfg.fit,
            cv_seed,
        )?;
        let profile = ThetaProfile::symmetric(&model.theta, cfg.n);
        let x_attacked = simulate_attack(&profile, &x_test, &z_test, cfg.actual.lambda)?;
        let clean = x_test.matvec(&model.theta)?;
        let attacked = x_attacked.matvec(&model.theta)?;
        let m = y_test.len() as f64;
        reports.push(AlgorithmReport {
            algorithm,
            rmse_expected: expected_rmse(&y_test, &clean, &attacked, cfg.actual.beta)?,
            rmse_clean: (sq_dist(&clean, &y_test) / m).sqrt(),
            rmse_attacked: (sq_dist(&attacked, &y_test) / m).sqrt(),
            theta: model.theta,
            diagnostics: model.diagnostics,
        });
    }

    Ok(EvalReport {
        algorithms: reports,
        metadata: ScenarioMetadata {
            config: cfg.clone(),
            preprocessing: prep,
            train_rows: train.rows(),
            test_rows: test.rows(),
            defender_delta_scale: defender_target.delta_scale,
            actual_delta_scale: actual_target.delta_scale,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub lambda_values: Vec<f64>,
    pub beta_values: Vec<f64>,
    pub repeats: usize,
    pub train_fraction: f64,
    pub seed: u64,
    /// Defender estimates of λ and β follow each cell's actual values.
    #[serde(default)]
    pub best_case: bool,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_values.is_empty() || self.beta_values.is_empty() {
            return Err(Error::Config("sweep grids must be nonempty".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub rmse_expected: f64,
    pub rmse_clean: f64,
    pub rmse_attacked: f64,
}

/// Means over repeats for one (λ, β) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub lambda: f64,
    pub beta: f64,
    pub algorithms: Vec<AlgorithmSummary>,
}

impl CellSummary {
    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|a| a.algorithm == algorithm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub lambda_values: Vec<f64>,
    pub beta_values: Vec<f64>,
    /// `cells[i][j]` is `(lambda_values[i], beta_values[j])`.
    pub cells: Vec<Vec<CellSummary>>,
}

pub const SWEEP_CSV_HEADER: &str = "lambda,beta,algorithm,rmse_expected,rmse_clean,rmse_attacked";

impl SweepGrid {
    pub fn cell(&self, li: usize, bi: usize) -> &CellSummary {
        &self.cells[li][bi]
    }

    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(f64, f64, &AlgorithmSummary)> = self
            .cells
            .iter()
            .flatten()
            .flat_map(|c| c.algorithms.iter().map(move |a| (c.lambda, c.beta, a)))
            .collect();
        rows.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.algorithm.name().cmp(b.2.algorithm.name()))
        });
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for (lambda, beta, a) in rows {
            let fields = [
                data::fmt_f64(lambda),
                data::fmt_f64(beta),
                a.algorithm.name().to_string(),
                data::fmt_f64(a.rmse_expected),
                data::fmt_f64(a.rmse_clean),
                data::fmt_f64(a.rmse_attacked),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

/// Runs every (λ, β, repeat) on a fresh seeded split of `data`.
///
/// Runs execute on the current rayon pool; results are reduced in grid order
/// so the output does not depend on scheduling.
pub fn run_sweep(data: &Dataset, base: &ScenarioConfig, sweep: &SweepConfig) -> Result<SweepGrid> {
    sweep.validate()?;
    base.validate()?;
    let (nl, nb, reps) = (sweep.lambda_values.len(), sweep.beta_values.len(), sweep.repeats);
    let jobs: Vec<(usize, usize, usize)> = (0..nl)
        .flat_map(|li| (0..nb).flat_map(move |bi| (0..reps).map(move |r| (li, bi, r))))
        .collect();

    let results: Vec<Result<EvalReport>> = jobs
        .par_iter()
        .map(|&(li, bi, r)| {
            let cell_seed = rng::derive_seed(sweep.seed, &[li as u64, bi as u64, r as u64]);
            let (train, test) = data::split_train_test(data, sweep.train_fraction, cell_seed)?;
            let mut cfg = base.clone();
            cfg.seed = rng::derive_seed(cell_seed, &[1]);
            cfg.actual.lambda = sweep.lambda_values[li];
            cfg.actual.beta = sweep.beta_values[bi];
            if sweep.best_case {
                cfg.defender.lambda = cfg.actual.lambda;
                cfg.defender.beta = cfg.actual.beta;
            }
            run_scenario(&train, &test, &cfg)
        })
        .collect();

    let mut reports = results.into_iter();
    let mut cells = Vec::with_capacity(nl);
    for &lambda in &sweep.lambda_values {
        let mut row = Vec::with_capacity(nb);
        for &beta in &sweep.beta_values {
            let runs: Vec<EvalReport> = reports.by_ref().take(reps).collect::<Result<_>>()?;
            row.push(CellSummary {
                lambda,
                beta,
                algorithms: average(&runs),
            });
        }
        cells.push(row);
    }
    Ok(SweepGrid {
        lambda_values: sweep.lambda_values.clone(),
        beta_values: sweep.beta_values.clone(),
        cells,
    })
}

fn average(runs: &[EvalReport]) -> Vec<AlgorithmSummary> {
    let k = runs.len() as f64;
    runs[0]
        .algorithms
        .iter()
        .enumerate()
        .map(|(i, first)| {
            let mean = |f: fn(&AlgorithmReport) -> f64| {
                runs.iter().map(|r| f(&r.algorithms[i])).sum::<f64>() / k
            };
            AlgorithmSummary {
                algorithm: first.algorithm,
                rmse_expected: mean(|a| a.rmse_expected),
                rmse_clean: mean(|a| a.rmse_clean),
                rmse_attacked: mean(|a| a.rmse_attacked),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        data::synthetic_dataset(&data::SyntheticSpec {
            rows: 120,
            ..data::SyntheticSpec::redwine()
        })
        .unwrap()
    }

    #[test]
    fn expected_rmse_examples() {
        let y = [1.0, 2.0];
        let clean = [1.5, 2.5];
        let att = [3.0, 0.0];
        let plain = |p: &[f64]| (sq_dist(p, &y) / 2.0).sqrt();
        assert_eq!(expected_rmse(&y, &clean, &att, 0.0).unwrap(), plain(&clean));
        assert_eq!(expected_rmse(&y, &clean, &att, 1.0).unwrap(), plain(&att));
        let r = expected_rmse(&[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0], 0.5).unwrap();
        assert!((r - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(expected_rmse(&[0.0], &[0.0, 1.0], &[0.0], 0.5).is_err());
        assert!(expected_rmse(&[], &[], &[], 0.5).is_err());
    }

    #[test]
    fn simulate_attack_examples() {
        let x = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]]);
        let zero = ThetaProfile::symmetric(&[0.0, 0.0], 3);
        assert_eq!(simulate_attack(&zero, &x, &[4.0, 4.0], 1.0).unwrap(), x);
        let scalar = ThetaProfile::symmetric(&[1.0], 1);
        let out = simulate_attack(&scalar, &Matrix::from_rows(&[[1.0]]), &[2.0], 1.0).unwrap();
        assert!((out[(0, 0)] - 1.5).abs() < 1e-15);
        let p = ThetaProfile::symmetric(&[0.7, -0.2], 2);
        let far = simulate_attack(&p, &x, &[5.0, -5.0], 1e9).unwrap();
        assert!(far.sub(&x).unwrap().frobenius_norm() <= 1e-3 * x.frobenius_norm());
    }

    #[test]
    fn empty_algorithm_set_is_rejected() {
        let ds = toy();
        let (tr, te) = data::split_train_test(&ds, 0.5, 1).unwrap();
        let mut cfg = ScenarioConfig::best_case(1.0, 0.5, TargetSpec::shift(5.0), 5, 1);
        cfg.algorithms.clear();
        assert!(matches!(run_scenario(&tr, &te, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn beta_zero_reports_clean_error() {
        let ds = toy();
        let (tr, te) = data::split_train_test(&ds, 0.5, 2).unwrap();
        let cfg = ScenarioConfig::best_case(1.0, 0.0, TargetSpec::shift(5.0), 5, 3);
        let rep = run_scenario(&tr, &te, &cfg).unwrap();
        for a in &rep.algorithms {
            assert_eq!(a.rmse_expected, a.rmse_clean);
        }
    }

    #[test]
    fn no_expected_attack_gives_ols() {
        let ds = toy();
        let (tr, te) = data::split_train_test(&ds, 0.5, 4).unwrap();
        let mut cfg = ScenarioConfig::best_case(1.0, 0.6, TargetSpec::shift(3.0), 5, 5);
        cfg.defender = AttackModel::new(0.5, 0.0, TargetSpec::shift(0.0));
        let rep = run_scenario(&tr, &te, &cfg).unwrap();
        let (m, o) = (rep.get(Algorithm::Mlsg).unwrap(), rep.get(Algorithm::Ols).unwrap());
        for (a, b) in m.theta.iter().zip(&o.theta) {
            assert!((a - b).abs() <= 1e-8);
        }
        assert!((m.rmse_expected - o.rmse_expected).abs() <= 1e-8);
    }

    #[test]
    fn sweep_one_cell_matches_scenario() {
        let ds = toy();
        let base = ScenarioConfig::best_case(1.0, 0.5, TargetSpec::shift(2.0), 3, 0);
        let sweep = SweepConfig {
            lambda_values: vec![0.7],
            beta_values: vec![0.4],
            repeats: 1,
            train_fraction: 0.5,
            seed: 9,
            best_case: false,
        };
        let grid = run_sweep(&ds, &base, &sweep).unwrap();
        let cell_seed = rng::derive_seed(9, &[0, 0, 0]);
        let (tr, te) = data::split_train_test(&ds, 0.5, cell_seed).unwrap();
        let mut cfg = base.clone();
        cfg.seed = rng::derive_seed(cell_seed, &[1]);
        cfg.actual.lambda = 0.7;
        cfg.actual.beta = 0.4;
        let rep = run_scenario(&tr, &te, &cfg).unwrap();
        for a in &rep.algorithms {
            let s = grid.cell(0, 0).get(a.algorithm).unwrap();
            assert_eq!(s.rmse_expected, a.rmse_expected);
        }
        let csv = grid.to_csv();
        assert!(csv.starts_with(SWEEP_CSV_HEADER));
        assert_eq!(csv.lines().count(), 1 + 4);
        assert!(csv.lines().nth(1).unwrap().contains(",lasso,"));
    }

    #[test]
    fn algorithm_names_roundtrip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("svm".parse::<Algorithm>().is_err());
    }
}
