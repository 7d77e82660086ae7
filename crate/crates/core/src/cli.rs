//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::baselines::FitConfig;
use crate::data::{self, Dataset, LabelColumn, TargetSpec};
use crate::error::{Error, Result};
use crate::eval::{
    self, Algorithm, AttackModel, FitDiagnostics, PreprocessConfig, Preprocessor, ScenarioConfig,
    SweepConfig,
};
use crate::game::{self, GameParams, ThetaProfile};
use crate::rng;
use crate::verify::{self, CheckName, CheckReport, RosenConfig, VerifyConfig};

pub const SEED_ENV: &str = "ADVREG_SEED";

pub mod exit {
    pub const OK: u8 = 0;
    pub const CONFIG: u8 = 2;
    pub const DATA: u8 = 3;
    pub const SOLVER: u8 = 4;
    pub const VERIFICATION: u8 = 5;
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::MaskOutOfRange { .. } | Error::Json(_) => exit::CONFIG,
        Error::DimensionMismatch(_)
        | Error::Parse { .. }
        | Error::MissingLabelColumn(_)
        | Error::EmptyFile
        | Error::TooFewRows { .. }
        | Error::Io(_) => exit::DATA,
        Error::NotSymmetric(_)
        | Error::NotPositiveDefinite { .. }
        | Error::NoConvergence(_)
        | Error::SingularDesign
        | Error::NonFinite(_)
        | Error::MaxItersExceeded(_)
        | Error::MaxSweepsExceeded(_) => exit::SOLVER,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub lambda_values: Vec<f64>,
    pub beta_values: Vec<f64>,
    pub repeats: usize,
    pub best_case: bool,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            lambda_values: vec![0.1, 0.25, 0.5, 1.0, 1.5, 2.0],
            beta_values: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            repeats: 50,
            best_case: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySettings {
    pub checks: Vec<CheckName>,
    pub trials: usize,
    pub tolerance: Option<f64>,
    pub rosen: RosenConfig,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            checks: CheckName::ALL.to_vec(),
            trials: verify::DEFAULT_TRIALS,
            tolerance: None,
            rosen: RosenConfig::default(),
        }
    }
}

/// Every setting a run depends on, after merging file and flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// CSV path or `synthetic:<name>`.
    pub data: Option<String>,
    pub label: LabelColumn,
    pub train_fraction: f64,
    /// Algorithm written by `train`.
    pub algorithm: Algorithm,
    /// Algorithms compared by `evaluate` and `sweep`.
    pub algorithms: Vec<Algorithm>,
    pub n: usize,
    pub actual: AttackModel,
    /// Defender estimates; the actual attacker when absent.
    pub defender: Option<AttackModel>,
    pub fit: FitConfig,
    pub preprocess: PreprocessConfig,
    pub theta_radius: Option<f64>,
    /// Copies of each model file deployed by `attack`.
    pub copies: usize,
    pub sweep: SweepSettings,
    pub verify: VerifySettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            data: None,
            label: LabelColumn::Last,
            train_fraction: 0.5,
            algorithm: Algorithm::Mlsg,
            algorithms: Algorithm::ALL.to_vec(),
            n: 5,
            actual: AttackModel::new(1.0, 0.8, TargetSpec::shift(5.0)),
            defender: None,
            fit: FitConfig::default(),
            preprocess: PreprocessConfig::default(),
            theta_radius: None,
            copies: 1,
            sweep: SweepSettings::default(),
            verify: VerifySettings::default(),
        }
    }
}

impl RunConfig {
    pub fn defender(&self) -> &AttackModel {
        self.defender.as_ref().unwrap_or(&self.actual)
    }

    pub fn scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            defender: self.defender().clone(),
            actual: self.actual.clone(),
            algorithms: self.algorithms.clone(),
            n: self.n,
            seed: self.seed,
            fit: self.fit.clone(),
            preprocess: self.preprocess.clone(),
            theta_radius: self.theta_radius,
        }
    }

    /// Reads a config file; a previous run's output (with a `config` key) is
    /// accepted as well.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut value: Value = serde_json::from_str(&text)?;
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
        Ok(serde_json::from_value(value)?)
    }
}

#[derive(Debug, Parser)]
#[command(name = "advreg", version, about = "Regression under a shared test-time attacker")]
pub struct Cli {
    /// Base seed [default: $ADVREG_SEED, else 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON config file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output path (standard output when absent)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// Worker threads [default: available processors]
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model and write it as JSON
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        algorithm: Option<Algorithm>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        attacker: AttackerArgs,
        #[command(flatten)]
        defender: DefenderArgs,
    },
    /// Apply the attacker's best response to a test CSV
    Attack {
        /// Model file; repeat for several learners
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        attacker: AttackerArgs,
        /// Deploy each model this many times
        #[arg(long)]
        copies: Option<usize>,
        /// Where to write the JSON summary (standard output when absent)
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run one scenario and write its report
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Run a λ×β grid and write it as CSV
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        #[arg(long)]
        repeats: Option<usize>,
        /// Defender estimates of λ and β follow each cell
        #[arg(long)]
        best_case: bool,
        /// Also write the grid and resolved config as JSON here
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the numerical checks
    Verify {
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<CheckName>>,
        #[arg(long)]
        trials: Option<usize>,
        /// Replace every check's tolerance
        #[arg(long, allow_hyphen_values = true)]
        tolerance: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        rosen_weights: Option<Vec<f64>>,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file, or synthetic:redwine / synthetic:boston
    #[arg(long)]
    pub data: Option<String>,
    /// Label column name
    #[arg(long, conflicts_with = "label_index")]
    pub label: Option<String>,
    /// Label column position (0-based)
    #[arg(long)]
    pub label_index: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Number of learners
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub theta_radius: Option<f64>,
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long)]
    pub no_center: bool,
    /// Keep this many principal components
    #[arg(long)]
    pub pca: Option<usize>,
    #[arg(long)]
    pub cv_folds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AttackerArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Target shift in units of the training-label std
    #[arg(long, allow_hyphen_values = true)]
    pub delta_scale: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub clip_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub clip_max: Option<f64>,
    /// Only shift these rows
    #[arg(long, value_delimiter = ',')]
    pub mask: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct DefenderArgs {
    #[arg(long)]
    pub lambda_hat: Option<f64>,
    #[arg(long)]
    pub beta_hat: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta_scale_hat: Option<f64>,
    /// Redraw the defender's shift uniformly from LO,HI on every run
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub delta_scale_hat_range: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long, value_delimiter = ',')]
    pub algorithms: Option<Vec<Algorithm>>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub attacker: AttackerArgs,
    #[command(flatten)]
    pub defender: DefenderArgs,
}

impl DataArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(d) = &self.data {
            cfg.data = Some(d.clone());
        }
        if let Some(l) = &self.label {
            cfg.label = LabelColumn::Name(l.clone());
        }
        if let Some(i) = self.label_index {
            cfg.label = LabelColumn::Index(i);
        }
    }
}

impl ModelArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if self.theta_radius.is_some() {
            cfg.theta_radius = self.theta_radius;
        }
        if self.no_standardize {
            cfg.preprocess.standardize = false;
        }
        if self.no_center {
            cfg.preprocess.center_labels = false;
        }
        if self.pca.is_some() {
            cfg.preprocess.pca_components = self.pca;
        }
        if let Some(k) = self.cv_folds {
            cfg.fit.cv_folds = k;
        }
    }
}

impl AttackerArgs {
    fn apply(&self, m: &mut AttackModel) {
        if let Some(v) = self.lambda {
            m.lambda = v;
        }
        if let Some(v) = self.beta {
            m.beta = v;
        }
        if let Some(v) = self.delta_scale {
            m.target.delta_scale = v;
        }
        if self.clip_min.is_some() {
            m.target.clip_min = self.clip_min;
        }
        if self.clip_max.is_some() {
            m.target.clip_max = self.clip_max;
        }
        if self.mask.is_some() {
            m.target.mask = self.mask.clone();
        }
    }
}

impl DefenderArgs {
    fn any(&self) -> bool {
        self.lambda_hat.is_some()
            || self.beta_hat.is_some()
            || self.delta_scale_hat.is_some()
            || self.delta_scale_hat_range.is_some()
    }

    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if !self.any() {
            return Ok(());
        }
        let mut m = cfg.defender().clone();
        if let Some(v) = self.lambda_hat {
            m.lambda = v;
        }
        if let Some(v) = self.beta_hat {
            m.beta = v;
        }
        if let Some(v) = self.delta_scale_hat {
            m.target.delta_scale = v;
            m.delta_scale_range = None;
        }
        if let Some(r) = &self.delta_scale_hat_range {
            let [lo, hi] = r[..] else {
                return Err(Error::Config("--delta-scale-hat-range takes LO,HI".into()));
            };
            m.delta_scale_range = Some([lo, hi]);
        }
        cfg.defender = Some(m);
        Ok(())
    }
}

impl ScenarioArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(a) = &self.algorithms {
            cfg.algorithms = a.clone();
        }
        if let Some(f) = self.train_fraction {
            cfg.train_fraction = f;
        }
        self.model.apply(cfg);
        // defender estimates are pinned before the actual attacker changes
        self.defender.apply(cfg)?;
        self.attacker.apply(&mut cfg.actual);
        Ok(())
    }
}

/// Merges defaults, the config file, `ADVREG_SEED` and flags.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => {
            let mut c = RunConfig::default();
            if let Ok(s) = std::env::var(SEED_ENV) {
                c.seed = s
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{SEED_ENV}={s:?} is not an integer")))?;
            }
            c
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match &cli.command {
        Command::Train {
            data,
            algorithm,
            model,
            attacker,
            defender,
        } => {
            data.apply(&mut cfg);
            model.apply(&mut cfg);
            if let Some(a) = algorithm {
                cfg.algorithm = *a;
            }
            defender.apply(&mut cfg)?;
            attacker.apply(&mut cfg.actual);
        }
        Command::Attack {
            data,
            attacker,
            copies,
            ..
        } => {
            data.apply(&mut cfg);
            attacker.apply(&mut cfg.actual);
            if let Some(c) = copies {
                cfg.copies = *c;
            }
        }
        Command::Evaluate { data, scenario } => {
            data.apply(&mut cfg);
            scenario.apply(&mut cfg)?;
        }
        Command::Sweep {
            data,
            scenario,
            lambdas,
            betas,
            repeats,
            best_case,
            ..
        } => {
            data.apply(&mut cfg);
            scenario.apply(&mut cfg)?;
            if let Some(l) = lambdas {
                cfg.sweep.lambda_values = l.clone();
            }
            if let Some(b) = betas {
                cfg.sweep.beta_values = b.clone();
            }
            if let Some(r) = repeats {
                cfg.sweep.repeats = *r;
            }
            if *best_case {
                cfg.sweep.best_case = true;
            }
        }
        Command::Verify {
            checks,
            trials,
            tolerance,
            rosen_weights,
        } => {
            if let Some(c) = checks {
                cfg.verify.checks = c.clone();
            }
            if let Some(t) = trials {
                cfg.verify.trials = *t;
            }
            if tolerance.is_some() {
                cfg.verify.tolerance = *tolerance;
            }
            if rosen_weights.is_some() {
                cfg.verify.rosen.r_weights = rosen_weights.clone();
            }
        }
    }
    Ok(cfg)
}

/// `synthetic:<name>` or a CSV path.
pub fn load_dataset(source: &str, label: &LabelColumn) -> Result<Dataset> {
    match source.strip_prefix("synthetic:") {
        Some(name) => {
            let spec = data::SyntheticSpec::by_name(name)
                .ok_or_else(|| Error::Config(format!("unknown synthetic dataset {name:?}")))?;
            data::synthetic_dataset(&spec)
        }
        None => data::load_csv(source, label),
    }
}

fn dataset(cfg: &RunConfig) -> Result<Dataset> {
    let src = cfg
        .data
        .as_deref()
        .ok_or_else(|| Error::Config("no dataset given (--data)".into()))?;
    load_dataset(src, &cfg.label)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub algorithm: Algorithm,
    pub theta: Vec<f64>,
    pub feature_names: Vec<String>,
    pub label_name: String,
    pub preprocessing: Preprocessor,
    pub config: RunConfig,
    pub diagnostics: FitDiagnostics,
}

pub fn train(cfg: &RunConfig) -> Result<ModelFile> {
    let ds = dataset(cfg)?;
    let prep = Preprocessor::fit(&ds, &cfg.preprocess)?;
    let x = prep.features(&ds.x)?;
    let y = prep.labels(&ds.y);
    let defender = cfg.defender();
    defender.validate("defender")?;
    let target = match defender.delta_scale_range {
        Some(_) => {
            let mut spec = defender.target.clone();
            if let Some([lo, hi]) = defender.delta_scale_range {
                use rand::Rng as _;
                let mut r = rng::derived(cfg.seed, &[0]);
                spec.delta_scale = if lo < hi { r.random_range(lo..hi) } else { lo };
            }
            spec
        }
        None => defender.target.clone(),
    };
    let z = prep.target(&ds.y, &target)?;
    let fit = eval::fit_algorithm(
        cfg.algorithm,
        &x,
        &y,
        &z,
        defender,
        cfg.n,
        cfg.theta_radius,
        &cfg.fit,
        rng::derive_seed(cfg.seed, &[1]),
    )?;
    let feature_names = match &prep.pca {
        Some(p) => p.feature_names(),
        None => ds.feature_names.clone(),
    };
    Ok(ModelFile {
        algorithm: fit.algorithm,
        theta: fit.theta,
        feature_names,
        label_name: ds.label_name,
        preprocessing: prep,
        config: cfg.clone(),
        diagnostics: fit.diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    /// In the models' (preprocessed) feature space.
    pub attacker_cost: f64,
    /// `‖X′ − X‖_F` on the original feature scale.
    pub frobenius_shift: f64,
    pub feature_norm: f64,
    pub learners: usize,
    pub config: RunConfig,
}

/// Attacked test features on the original scale, plus a summary.
pub fn attack(cfg: &RunConfig, models: &[ModelFile]) -> Result<(Dataset, AttackSummary)> {
    let first = models
        .first()
        .ok_or_else(|| Error::Config("no model files".into()))?;
    if models.iter().any(|m| m.preprocessing != first.preprocessing) {
        return Err(Error::Config("model files use different preprocessing".into()));
    }
    if first.preprocessing.pca.is_some() {
        return Err(Error::Config("attack does not support PCA models".into()));
    }
    if cfg.copies == 0 {
        return Err(Error::Config("copies must be at least 1".into()));
    }
    cfg.actual.validate("attacker")?;
    let ds = dataset(cfg)?;
    if ds.x.cols() != first.theta.len() || models.iter().any(|m| m.theta.len() != first.theta.len()) {
        return Err(Error::dims(format!(
            "test data has {} features, models expect {}",
            ds.x.cols(),
            first.theta.len()
        )));
    }
    let prep = &first.preprocessing;
    let x = prep.features(&ds.x)?;
    let z = prep.target(&ds.y, &cfg.actual.target)?;
    let thetas: Vec<Vec<f64>> = models
        .iter()
        .flat_map(|m| std::iter::repeat_n(m.theta.clone(), cfg.copies))
        .collect();
    let profile = ThetaProfile::new(thetas)?;
    let params = GameParams {
        n: profile.n(),
        beta: cfg.actual.beta,
        lambda: cfg.actual.lambda,
        z,
        theta_radius: f64::INFINITY,
    };
    let x_star = game::attacker_best_response(&profile, &x, &params)?;
    let cost = game::attacker_cost(&profile, &x_star, &x, &params)?;

    // map the shift back through the per-column scale so untouched entries
    // stay bit-identical
    let shift = x_star.sub(&x)?;
    let mut attacked = ds.x.clone();
    for i in 0..attacked.rows() {
        for (j, v) in attacked.row_mut(i).iter_mut().enumerate() {
            let scale = prep.standardizer.as_ref().map_or(1.0, |s| s.stds[j]);
            let delta = shift[(i, j)] * scale;
            if delta != 0.0 {
                *v += delta;
            }
        }
    }
    let frobenius_shift = attacked.sub(&ds.x)?.frobenius_norm();
    let summary = AttackSummary {
        attacker_cost: cost,
        frobenius_shift,
        feature_norm: ds.x.frobenius_norm(),
        learners: profile.n(),
        config: cfg.clone(),
    };
    Ok((ds.with_features(attacked, ds.feature_names.clone()), summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateOutput {
    pub config: RunConfig,
    pub report: eval::EvalReport,
}

pub fn evaluate(cfg: &RunConfig) -> Result<EvaluateOutput> {
    let ds = dataset(cfg)?;
    let (train, test) = data::split_train_test(&ds, cfg.train_fraction, cfg.seed)?;
    let report = eval::run_scenario(&train, &test, &cfg.scenario())?;
    Ok(EvaluateOutput {
        config: cfg.clone(),
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub config: RunConfig,
    pub grid: eval::SweepGrid,
}

pub fn sweep(cfg: &RunConfig) -> Result<SweepOutput> {
    let ds = dataset(cfg)?;
    let sweep = SweepConfig {
        lambda_values: cfg.sweep.lambda_values.clone(),
        beta_values: cfg.sweep.beta_values.clone(),
        repeats: cfg.sweep.repeats,
        train_fraction: cfg.train_fraction,
        seed: cfg.seed,
        best_case: cfg.sweep.best_case,
    };
    let grid = eval::run_sweep(&ds, &cfg.scenario(), &sweep)?;
    Ok(SweepOutput {
        config: cfg.clone(),
        grid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub config: RunConfig,
    pub passed: bool,
    pub reports: Vec<CheckReport>,
}

pub fn run_verify(cfg: &RunConfig) -> Result<VerifyOutput> {
    if cfg.verify.checks.is_empty() {
        return Err(Error::Config("no checks selected".into()));
    }
    let vcfg = VerifyConfig {
        trials: cfg.verify.trials,
        seed: cfg.seed,
        tolerance: cfg.verify.tolerance,
        rosen: cfg.verify.rosen.clone(),
    };
    let reports = cfg
        .verify
        .checks
        .iter()
        .map(|c| verify::run_check(*c, &vcfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(VerifyOutput {
        config: cfg.clone(),
        passed: reports.iter().all(CheckReport::passed),
        reports,
    })
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn emit(path: Option<&Path>, content: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content)?,
        None => std::io::stdout().write_all(content)?,
    }
    Ok(())
}

fn read_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

struct Logger {
    quiet: bool,
}

impl Logger {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> u8 {
    let log = Logger { quiet: cli.quiet };
    match execute(&cli, &log) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli, log: &Logger) -> Result<u8> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let cfg = resolve(cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Train { .. } => {
            let model = train(&cfg)?;
            log.info(format!("trained {} on {} features", model.algorithm, model.theta.len()));
            emit(out, to_json(&model)?.as_bytes())?;
        }
        Command::Attack { models, summary, .. } => {
            let models = models.iter().map(|p| read_model(p)).collect::<Result<Vec<_>>>()?;
            let (attacked, s) = attack(&cfg, &models)?;
            let mut header = attacked.feature_names.clone();
            header.push(attacked.label_name.clone());
            let mut table = crate::linalg::Matrix::zeros(attacked.rows(), header.len());
            for i in 0..attacked.rows() {
                let row = table.row_mut(i);
                row[..attacked.x.cols()].copy_from_slice(attacked.x.row(i));
                row[attacked.x.cols()] = attacked.y[i];
            }
            let mut csv = Vec::new();
            data::write_matrix_csv(&mut csv, &header, &table)?;
            emit(out, &csv)?;
            log.info(format!("attacked {} rows, shift {:e}", attacked.rows(), s.frobenius_shift));
            match summary {
                Some(p) => std::fs::write(p, to_json(&s)?)?,
                None if out.is_some() => emit(None, to_json(&s)?.as_bytes())?,
                None => eprint!("{}", to_json(&s)?),
            }
        }
        Command::Evaluate { .. } => {
            let o = evaluate(&cfg)?;
            for a in &o.report.algorithms {
                log.info(format!("{:>6}  rmse_expected {:.6}", a.algorithm.name(), a.rmse_expected));
            }
            emit(out, to_json(&o)?.as_bytes())?;
        }
        Command::Sweep { report, .. } => {
            let cells = cfg.sweep.lambda_values.len() * cfg.sweep.beta_values.len();
            log.info(format!("sweeping {cells} cells × {} repeats", cfg.sweep.repeats));
            let o = sweep(&cfg)?;
            emit(out, o.grid.to_csv().as_bytes())?;
            if let Some(p) = report {
                std::fs::write(p, to_json(&o)?)?;
            }
        }
        Command::Verify { .. } => {
            let o = run_verify(&cfg)?;
            for r in &o.reports {
                log.info(format!(
                    "{:<24} {:>5}/{:<5} failures  worst {:e}",
                    r.check_name, r.failures, r.trials, r.worst_violation
                ));
            }
            emit(out, to_json(&o)?.as_bytes())?;
            if !o.passed {
                return Ok(exit::VERIFICATION);
            }
        }
    }
    Ok(exit::OK)
}

pub fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}
