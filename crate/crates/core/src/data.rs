//! Dataset ingestion and preprocessing: CSV loading, seeded train/test
//! splits, feature standardization, PCA, label statistics and construction
//! of the attacker's target vector.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng;

/// Zero-variance threshold for standardization.
const MIN_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    pub label_name: String,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>, feature_names: Vec<String>, label_name: String) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::dims(format!(
                "{} feature rows but {} labels",
                x.rows(),
                y.len()
            )));
        }
        if feature_names.len() != x.cols() {
            return Err(Error::dims(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                x.cols()
            )));
        }
        if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset values".into()));
        }
        Ok(Dataset {
            x,
            y,
            feature_names,
            label_name,
        })
    }

    pub fn rows(&self) -> usize {
        self.y.len()
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            label_name: self.label_name.clone(),
        }
    }

    pub fn with_features(&self, x: Matrix, feature_names: Vec<String>) -> Dataset {
        Dataset {
            x,
            y: self.y.clone(),
            feature_names,
            label_name: self.label_name.clone(),
        }
    }
}

/// Which column of a CSV holds the label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelColumn {
    Name(String),
    Index(usize),
    Last,
}

/// Reads a headed, comma-separated file of finite reals.
///
/// Parse errors report a 1-based data row (header excluded) and a 0-based
/// column.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, label)
}

pub fn read_csv<R: Read>(reader: R, label: &LabelColumn) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(e, 0))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyFile);
    }
    let label_idx = match label {
        LabelColumn::Name(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingLabelColumn(name.clone()))?,
        LabelColumn::Index(i) if *i < header.len() => *i,
        LabelColumn::Index(i) => return Err(Error::MissingLabelColumn(format!("#{i}"))),
        LabelColumn::Last => header.len() - 1,
    };

    let d = header.len() - 1;
    let mut xs = Vec::new();
    let mut y = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| csv_error(e, row))?;
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                col: c,
                msg: format!("{cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    col: c,
                    msg: format!("{cell:?} is not finite"),
                });
            }
            if c == label_idx {
                y.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::EmptyFile);
    }
    let names = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let m = y.len();
    Dataset::new(
        Matrix::from_vec(m, d, xs)?,
        y,
        names,
        header[label_idx].clone(),
    )
}

fn csv_error(e: csv::Error, row: usize) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        },
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            row,
            col: (*len as usize).min(*expected_len as usize),
            msg: format!("expected {expected_len} fields, found {len}"),
        },
        _ => Error::Parse {
            row,
            col: 0,
            msg: e.to_string(),
        },
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Writes a header row and one line per matrix row.
pub fn write_matrix_csv<W: Write>(mut out: W, header: &[String], x: &Matrix) -> Result<()> {
    if header.len() != x.cols() {
        return Err(Error::dims("header and matrix width differ"));
    }
    writeln!(out, "{}", header.join(","))?;
    for i in 0..x.rows() {
        let line: Vec<String> = x.row(i).iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Seeded Fisher–Yates permutation split into (train, test) row indices.
pub fn split_indices(m: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng::seeded(seed));
    let n_train = (train_fraction * m as f64).floor() as usize;
    if n_train == 0 || n_train == m {
        return Err(Error::TooFewRows {
            train: n_train,
            test: m - n_train,
        });
    }
    let test = order.split_off(n_train);
    Ok((order, test))
}

pub fn split_train_test(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds.rows(), train_fraction, seed)?;
    Ok((ds.select(&train), ds.select(&test)))
}

/// Per-column affine map fitted on training data.
///
/// Zero-variance columns get mean 0 and std 1, i.e. pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

pub fn fit_standardizer(train: &Dataset) -> Standardizer {
    let x = &train.x;
    let m = x.rows() as f64;
    let mut means = Vec::with_capacity(x.cols());
    let mut stds = Vec::with_capacity(x.cols());
    for j in 0..x.cols() {
        let col = x.col(j);
        let mean = col.iter().sum::<f64>() / m;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
        let sd = var.sqrt();
        if sd < MIN_STD {
            means.push(0.0);
            stds.push(1.0);
        } else {
            means.push(mean);
            stds.push(sd);
        }
    }
    Standardizer { means, stds }
}

impl Standardizer {
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.means.len() {
            return Err(Error::dims("standardizer fitted on a different width"));
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.means[j]) / self.stds[j];
            }
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.means.len() {
            return Err(Error::dims("standardizer fitted on a different width"));
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = *v * self.stds[j] + self.means[j];
            }
        }
        Ok(out)
    }
}

pub fn apply_standardizer(std: &Standardizer, ds: &Dataset) -> Result<Dataset> {
    Ok(ds.with_features(std.transform(&ds.x)?, ds.feature_names.clone()))
}

/// Top principal directions of the training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub means: Vec<f64>,
    /// `d × k`, columns ordered by descending eigenvalue.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

pub fn pca_top_k(train_x: &Matrix, k: usize) -> Result<Pca> {
    let (m, d) = (train_x.rows(), train_x.cols());
    if k == 0 || k > d {
        return Err(Error::dims(format!("cannot keep {k} of {d} components")));
    }
    if m < 2 {
        return Err(Error::dims("PCA needs at least two rows"));
    }
    let means: Vec<f64> = (0..d)
        .map(|j| train_x.col(j).iter().sum::<f64>() / m as f64)
        .collect();
    let centered = center(train_x, &means);
    let cov = centered.gram().scale(1.0 / (m as f64 - 1.0));
    let eig = linalg::sym_eig(&cov)?;
    let mut components = Vec::with_capacity(k);
    for c in 0..k {
        let mut v = eig.vectors.col(c);
        let lead = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
    }
    Ok(Pca {
        means,
        components,
        eigenvalues: eig.values[..k].to_vec(),
    })
}

fn center(x: &Matrix, means: &[f64]) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        for (v, mu) in out.row_mut(i).iter_mut().zip(means) {
            *v -= mu;
        }
    }
    out
}

impl Pca {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// `d × k` component matrix.
    pub fn component_matrix(&self) -> Matrix {
        let d = self.means.len();
        let mut w = Matrix::zeros(d, self.k());
        for (c, v) in self.components.iter().enumerate() {
            w.set_col(c, v);
        }
        w
    }

    /// Centered `X` times the components.
    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.means.len() {
            return Err(Error::dims("PCA fitted on a different width"));
        }
        center(x, &self.means).matmul(&self.component_matrix())
    }

    /// Maps projected coordinates back to the original (uncentered) space.
    pub fn reconstruct(&self, projected: &Matrix) -> Result<Matrix> {
        let mut back = projected.matmul(&self.component_matrix().transpose())?;
        for i in 0..back.rows() {
            for (v, mu) in back.row_mut(i).iter_mut().zip(&self.means) {
                *v += mu;
            }
        }
        Ok(back)
    }

    pub fn feature_names(&self) -> Vec<String> {
        (1..=self.k()).map(|i| format!("pc{i}")).collect()
    }
}

/// Population mean and standard deviation.
pub fn label_stats(y: &[f64]) -> (f64, f64) {
    let m = y.len() as f64;
    let mu = y.iter().sum::<f64>() / m;
    let var = y.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / m;
    (mu, var.sqrt())
}

/// Attacker target `z = y + Δ`, with `Δ = delta_scale·σ` on masked rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub delta_scale: f64,
    #[serde(default)]
    pub mask: Option<Vec<usize>>,
    #[serde(default)]
    pub clip_min: Option<f64>,
    #[serde(default)]
    pub clip_max: Option<f64>,
}

impl TargetSpec {
    pub fn shift(delta_scale: f64) -> Self {
        TargetSpec {
            delta_scale,
            mask: None,
            clip_min: None,
            clip_max: None,
        }
    }

    pub fn clipped_above(delta_scale: f64, clip_max: f64) -> Self {
        TargetSpec {
            clip_max: Some(clip_max),
            ..TargetSpec::shift(delta_scale)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let (Some(lo), Some(hi)) = (self.clip_min, self.clip_max) {
            if lo > hi {
                return Err(Error::Config(format!("clip_min {lo} exceeds clip_max {hi}")));
            }
        }
        if !self.delta_scale.is_finite() {
            return Err(Error::Config("delta_scale must be finite".into()));
        }
        Ok(())
    }
}

pub fn build_target(y: &[f64], spec: &TargetSpec, sigma: f64) -> Result<Vec<f64>> {
    spec.validate()?;
    if !(sigma >= 0.0) {
        return Err(Error::Config(format!("sigma {sigma} must be >= 0")));
    }
    let delta = spec.delta_scale * sigma;
    let mut z = y.to_vec();
    match &spec.mask {
        None => z.iter_mut().for_each(|v| *v += delta),
        Some(mask) => {
            for &i in mask {
                let v = z.get_mut(i).ok_or(Error::MaskOutOfRange {
                    index: i,
                    len: y.len(),
                })?;
                *v += delta;
            }
        }
    }
    for v in &mut z {
        if let Some(lo) = spec.clip_min {
            *v = v.max(lo);
        }
        if let Some(hi) = spec.clip_max {
            *v = v.min(hi);
        }
    }
    Ok(z)
}

/// Shape of a bundled synthetic regression dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    pub rows: usize,
    pub features: usize,
    /// Fraction of label variance explained by the linear signal.
    pub r_squared: f64,
    pub label_mean: f64,
    pub label_std: f64,
    pub label_name: String,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Wine-quality shaped: 1599 × 11, label mean 5.64 and std 0.81.
    pub fn redwine() -> Self {
        SyntheticSpec {
            name: "redwine".into(),
            rows: 1599,
            features: 11,
            r_squared: 0.36,
            label_mean: 5.64,
            label_std: 0.81,
            label_name: "quality".into(),
            seed: 0x5EED_0001,
        }
    }

    /// Boston-housing shaped: 506 × 13, label mean 22.53 and std 9.20.
    pub fn boston() -> Self {
        SyntheticSpec {
            name: "boston".into(),
            rows: 506,
            features: 13,
            r_squared: 0.74,
            label_mean: 22.53,
            label_std: 9.20,
            label_name: "medv".into(),
            seed: 0x5EED_0002,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "redwine" => Some(Self::redwine()),
            "boston" => Some(Self::boston()),
            _ => None,
        }
    }
}

fn standardize_in_place(v: &mut [f64]) {
    let (mu, sd) = label_stats(v);
    v.iter_mut().for_each(|x| *x = (*x - mu) / sd);
}

/// Correlated Gaussian features with arbitrary offsets and scales, and a
/// label that is a noisy linear function of them, rescaled so that its
/// population mean and std match the spec exactly.
pub fn synthetic_dataset(spec: &SyntheticSpec) -> Result<Dataset> {
    let (m, d) = (spec.rows, spec.features);
    if m < 2 || d == 0 || !(0.0..=1.0).contains(&spec.r_squared) {
        return Err(Error::Config(format!("bad synthetic spec {spec:?}")));
    }
    let mut rng = rng::seeded(spec.seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

    let factors = 3.min(d);
    let loadings: Vec<f64> = (0..d * factors).map(|_| normal()).collect();
    let offsets: Vec<f64> = (0..d).map(|_| 5.0 * normal()).collect();
    let scales: Vec<f64> = (0..d).map(|_| (0.5 * normal()).exp()).collect();
    let weights: Vec<f64> = (0..d).map(|_| normal()).collect();

    let mut latent = Matrix::zeros(m, d);
    for i in 0..m {
        let f: Vec<f64> = (0..factors).map(|_| normal()).collect();
        for j in 0..d {
            let common: f64 = (0..factors).map(|k| loadings[j * factors + k] * f[k]).sum();
            latent[(i, j)] = common + normal();
        }
    }
    let mut signal = latent.matvec(&weights)?;
    standardize_in_place(&mut signal);
    let mut noise: Vec<f64> = (0..m).map(|_| normal()).collect();
    standardize_in_place(&mut noise);
    let (a, b) = (spec.r_squared.sqrt(), (1.0 - spec.r_squared).sqrt());
    let mut y: Vec<f64> = signal.iter().zip(&noise).map(|(s, e)| a * s + b * e).collect();
    standardize_in_place(&mut y);
    y.iter_mut()
        .for_each(|v| *v = spec.label_mean + spec.label_std * *v);

    let mut x = latent;
    for i in 0..m {
        for (j, v) in x.row_mut(i).iter_mut().enumerate() {
            *v = offsets[j] + scales[j] * *v;
        }
    }
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    Dataset::new(x, y, names, spec.label_name.clone())
}
