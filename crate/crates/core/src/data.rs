//! Datasets, CSV ingestion, standardization, cross-validation folds, metrics
//! and synthetic generators.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, BankError, Result};
use crate::rff::{feature_map_into, sample_frequencies, FrequencyMatrix, GaussianMixtureSpec};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    Regression,
    Classification,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        })
    }
}

impl FromStr for Task {
    type Err = BankError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            other => Err(BankError::InvalidParameter(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub x: Array2<T>,
    pub y: Array1<T>,
    pub task: Task,
    pub feature_names: Vec<String>,
    pub target_name: String,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(x: Array2<T>, y: Array1<T>, task: Task) -> Result<Self> {
        check_dim("dataset targets", x.nrows(), y.len())?;
        let d = x.ncols();
        let ds = Self {
            x,
            y,
            task,
            feature_names: (0..d).map(|i| format!("x{i}")).collect(),
            target_name: "y".into(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.iter().chain(self.y.iter()).any(|v| !v.is_finite()) {
            return Err(BankError::Data("dataset contains non-finite values".into()));
        }
        if self.task == Task::Classification {
            crate::classification::check_labels(self.y.view())?;
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
            task: self.task,
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
        }
    }
}

/// Which CSV column holds the target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(untagged)]
pub enum TargetColumn {
    Index(usize),
    Name(String),
    #[default]
    Last,
}

impl TargetColumn {
    pub fn is_last(&self) -> bool {
        matches!(self, TargetColumn::Last)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub target: TargetColumn,
    pub has_header: bool,
    pub task: Task,
    /// Raw label → stored label, applied to the target column before validation.
    pub label_map: Vec<(f64, f64)>,
    /// Drop rows that fail to parse instead of erroring; they are reported.
    pub skip_invalid: bool,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            target: TargetColumn::Last,
            has_header: true,
            task: Task::Regression,
            label_map: Vec::new(),
            skip_invalid: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub rows_read: usize,
    /// `(line, reason)` for every skipped row.
    pub skipped: Vec<(usize, String)>,
}

pub fn load_csv<T: Scalar, P: AsRef<Path>>(path: P, schema: &CsvSchema) -> Result<(Dataset<T>, LoadReport)> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, schema)
}

/// Same as [`load_csv`] for any reader.
pub fn read_csv<T: Scalar, R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<(Dataset<T>, LoadReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Option<Vec<String>> = if schema.has_header {
        Some(rdr.headers()?.iter().map(str::to_owned).collect())
    } else {
        None
    };
    let label_map: HashMap<u64, f64> = schema.label_map.iter().map(|&(k, v)| (k.to_bits(), v)).collect();

    let mut width = header.as_ref().map(Vec::len);
    let mut target_idx = None;
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut report = LoadReport::default();

    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        let t = match target_idx {
            Some(t) => t,
            None => {
                let t = resolve_target(&schema.target, header.as_deref(), w)?;
                target_idx = Some(t);
                t
            }
        };
        let parsed = parse_row(&record, w, t, line, &label_map, schema.task);
        match parsed {
            Ok((row, target)) => {
                xs.extend(row);
                ys.push(target);
                report.rows_read += 1;
            }
            Err(e) if schema.skip_invalid => report.skipped.push((line, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    if !report.skipped.is_empty() {
        log::warn!("skipped {} malformed rows", report.skipped.len());
    }
    let n = ys.len();
    if n == 0 {
        return Err(BankError::Data("dataset is empty".into()));
    }
    let w = width.unwrap_or(0);
    let t = target_idx.unwrap_or(0);
    let x = Array2::from_shape_vec((n, w - 1), xs)
        .map_err(|e| BankError::Data(e.to_string()))?
        .mapv(T::lit);
    let target_name = header
        .as_ref()
        .and_then(|h| h.get(t).cloned())
        .unwrap_or_else(|| "y".into());
    let names = match header {
        Some(h) => h
            .into_iter()
            .enumerate()
            .filter(|(i, _)| *i != t)
            .map(|(_, s)| s)
            .collect(),
        None => (0..w - 1).map(|i| format!("x{i}")).collect(),
    };
    let ds = Dataset {
        x,
        y: Array1::from(ys).mapv(T::lit),
        task: schema.task,
        feature_names: names,
        target_name,
    };
    Ok((ds, report))
}

fn resolve_target(target: &TargetColumn, header: Option<&[String]>, width: usize) -> Result<usize> {
    if width < 2 {
        return Err(BankError::Data(format!("need at least two columns, found {width}")));
    }
    match target {
        TargetColumn::Last => Ok(width - 1),
        TargetColumn::Index(i) if *i < width => Ok(*i),
        TargetColumn::Index(i) => Err(BankError::Data(format!("target column {i} out of range ({width} columns)"))),
        TargetColumn::Name(name) => header
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| BankError::Data(format!("target column '{name}' not found in header"))),
    }
}

fn parse_row(
    record: &csv::StringRecord,
    width: usize,
    target: usize,
    line: usize,
    label_map: &HashMap<u64, f64>,
    task: Task,
) -> Result<(Vec<f64>, f64)> {
    if record.len() != width {
        return Err(BankError::Parse {
            row: line,
            column: record.len().min(width),
            message: format!("expected {width} fields, found {}", record.len()),
        });
    }
    let mut row = Vec::with_capacity(width - 1);
    let mut y = 0.0;
    for (c, field) in record.iter().enumerate() {
        let v: f64 = field.parse().map_err(|_| BankError::Parse {
            row: line,
            column: c,
            message: if field.is_empty() {
                "missing value".into()
            } else {
                format!("cannot parse '{field}' as a number")
            },
        })?;
        if !v.is_finite() {
            return Err(BankError::Parse {
                row: line,
                column: c,
                message: format!("non-finite value '{field}'"),
            });
        }
        if c == target {
            y = label_map.get(&v.to_bits()).copied().unwrap_or(v);
        } else {
            row.push(v);
        }
    }
    if task == Task::Classification && y != 0.0 && y != 1.0 {
        return Err(BankError::InvalidLabel { row: line, value: y });
    }
    Ok((row, y))
}

/// Writes features then target, with a header row.
pub fn write_csv<T: Scalar, P: AsRef<Path>>(path: P, data: &Dataset<T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = data.feature_names.clone();
    header.push(data.target_name.clone());
    w.write_record(&header)?;
    for (row, y) in data.x.rows().into_iter().zip(data.y.iter()) {
        let mut rec: Vec<String> = row.iter().map(|v| format_float(v.as_f64())).collect();
        rec.push(format_float(y.as_f64()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest representation that parses back to the same value.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

/// Train-set statistics used to standardize every split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub x_constant: Vec<bool>,
    pub y_mean: f64,
    pub y_scale: f64,
}

impl Standardization {
    pub fn identity(d: usize) -> Self {
        Self {
            x_mean: vec![0.0; d],
            x_scale: vec![1.0; d],
            x_constant: vec![false; d],
            y_mean: 0.0,
            y_scale: 1.0,
        }
    }

    /// Statistics of `train`. Targets are only standardized for regression.
    pub fn fit<T: Scalar>(train: &Dataset<T>, standardize_x: bool) -> Result<Self> {
        if train.n_rows() == 0 {
            return Err(BankError::Data("cannot standardize an empty training set".into()));
        }
        let d = train.dim();
        let mut rec = Self::identity(d);
        if standardize_x {
            for c in 0..d {
                let col: Vec<f64> = train.x.column(c).iter().map(|v| v.as_f64()).collect();
                if col.iter().all(|&v| v == col[0]) {
                    rec.x_mean[c] = col[0];
                    rec.x_constant[c] = true;
                } else {
                    let (m, s) = mean_std(&col);
                    rec.x_mean[c] = m;
                    rec.x_scale[c] = if s > 0.0 { s } else { 1.0 };
                }
            }
        }
        if train.task == Task::Regression {
            let ys: Vec<f64> = train.y.iter().map(|v| v.as_f64()).collect();
            let (m, s) = mean_std(&ys);
            rec.y_mean = m;
            rec.y_scale = if s > 0.0 { s } else { 1.0 };
        }
        Ok(rec)
    }

    pub fn apply<T: Scalar>(&self, data: &Dataset<T>) -> Result<Dataset<T>> {
        let mut out = data.clone();
        out.x = self.transform_x(data.x.view())?;
        if data.task == Task::Regression {
            out.y = data.y.mapv(|v| T::lit((v.as_f64() - self.y_mean) / self.y_scale));
        }
        Ok(out)
    }

    pub fn transform_x<T: Scalar>(&self, x: ndarray::ArrayView2<'_, T>) -> Result<Array2<T>> {
        check_dim("standardized columns", self.x_mean.len(), x.ncols())?;
        let mut out = x.to_owned();
        for (c, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.x_mean[c], self.x_scale[c]);
            col.mapv_inplace(|v| T::lit((v.as_f64() - m) / s));
        }
        Ok(out)
    }

    pub fn inverse_y<T: Scalar>(&self, y: ArrayView1<'_, T>) -> Array1<T> {
        y.mapv(|v| T::lit(v.as_f64() * self.y_scale + self.y_mean))
    }

    pub fn inverse_var<T: Scalar>(&self, var: ArrayView1<'_, T>) -> Array1<T> {
        var.mapv(|v| T::lit(v.as_f64() * self.y_scale * self.y_scale))
    }
}

/// Population mean and standard deviation.
fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Standardizes `train` and `others` with train statistics.
pub fn standardize<T: Scalar>(
    train: &Dataset<T>,
    others: &[&Dataset<T>],
    standardize_x: bool,
) -> Result<(Dataset<T>, Vec<Dataset<T>>, Standardization)> {
    let rec = Standardization::fit(train, standardize_x)?;
    let tr = rec.apply(train)?;
    let rest = others.iter().map(|d| rec.apply(d)).collect::<Result<Vec<_>>>()?;
    Ok((tr, rest, rec))
}

/// One outer cross-validation fold. `fit` and `validation` partition `train`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub fit: Vec<usize>,
    pub validation: Vec<usize>,
}

pub const VALIDATION_FRACTION: f64 = 0.2;

/// Shuffled `k`-fold split; the first `N mod k` folds hold one extra index.
pub fn kfold_splits(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(BankError::InvalidParameter(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(BankError::InvalidParameter(format!("{n} rows cannot be split into {k} folds")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        let mut test = idx[start..start + size].to_vec();
        test.sort_unstable();
        start += size;
        let mut train: Vec<usize> = idx.iter().copied().filter(|i| test.binary_search(i).is_err()).collect();
        train.sort_unstable();
        let mut shuffled = train.clone();
        shuffled.shuffle(&mut rng);
        let n_val = ((train.len() as f64 * VALIDATION_FRACTION).round() as usize).min(train.len().saturating_sub(1));
        let mut validation = shuffled[..n_val].to_vec();
        let mut fit = shuffled[n_val..].to_vec();
        validation.sort_unstable();
        fit.sort_unstable();
        folds.push(Fold {
            train,
            test,
            fit,
            validation,
        });
    }
    Ok(folds)
}

/// `index,fold` rows for every index.
pub fn write_folds_csv<P: AsRef<Path>>(path: P, folds: &[Fold]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "fold"])?;
    let mut rows: Vec<(usize, usize)> = folds
        .iter()
        .enumerate()
        .flat_map(|(f, fold)| fold.test.iter().map(move |&i| (i, f)))
        .collect();
    rows.sort_unstable();
    for (i, f) in rows {
        w.write_record([i.to_string(), f.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn mse<T: Scalar>(pred: ArrayView1<'_, T>, truth: ArrayView1<'_, T>) -> Result<f64> {
    check_dim("predictions", truth.len(), pred.len())?;
    if truth.is_empty() {
        return Err(BankError::Data("no predictions to score".into()));
    }
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| (p.as_f64() - t.as_f64()).powi(2)).sum();
    Ok(s / truth.len() as f64)
}

/// 0-1 error with a 0.5 threshold on predicted probabilities.
pub fn error_rate<T: Scalar>(prob: ArrayView1<'_, T>, truth: ArrayView1<'_, T>) -> Result<f64> {
    check_dim("predictions", truth.len(), prob.len())?;
    if truth.is_empty() {
        return Err(BankError::Data("no predictions to score".into()));
    }
    let wrong = prob
        .iter()
        .zip(truth)
        .filter(|(p, t)| (p.as_f64() >= 0.5) != (t.as_f64() >= 0.5))
        .count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// MSE for regression, error rate for classification.
pub fn metric<T: Scalar>(task: Task, pred: ArrayView1<'_, T>, truth: ArrayView1<'_, T>) -> Result<f64> {
    match task {
        Task::Regression => mse(pred, truth),
        Task::Classification => error_rate(pred, truth),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Mean and standard error (sample sd / √n) of per-fold values.
pub fn summarize(values: &[f64]) -> MetricSummary {
    let n = values.len();
    if n == 0 {
        return MetricSummary {
            mean: f64::NAN,
            stderr: f64::NAN,
            n,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    MetricSummary { mean, stderr, n }
}

/// Output of [`synth_generate`]: data plus the ground truth behind it.
#[derive(Debug, Clone)]
pub struct Synthetic<T> {
    pub data: Dataset<T>,
    pub spec: GaussianMixtureSpec<T>,
    pub frequencies: FrequencyMatrix<T>,
    pub beta: Array1<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub n_frequencies: usize,
    pub noise_sd: f64,
    pub x_sd: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            n_frequencies: 250,
            noise_sd: 1.0,
            x_sd: 4.0,
        }
    }
}

/// `X_i ~ N(0, x_sd² I)`, `W ~ ρ`, `β ~ N(0, I)`, `Y_i ~ N(φ(X_i)ᵀβ, noise_sd²)`.
pub fn synth_generate<T: Scalar>(spec: &GaussianMixtureSpec<T>, cfg: &SynthConfig, seed: u64) -> Result<Synthetic<T>> {
    if cfg.n_frequencies == 0 {
        return Err(BankError::InvalidParameter("need at least one true frequency".into()));
    }
    if !(cfg.noise_sd >= 0.0) || !(cfg.x_sd > 0.0) {
        return Err(BankError::InvalidParameter("noise_sd must be ≥ 0 and x_sd > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.dim();
    let sd = T::lit(cfg.x_sd);
    let x = Array2::from_shape_simple_fn((cfg.n, d), || T::standard_normal(&mut rng) * sd);
    let w = sample_frequencies(spec, cfg.n_frequencies, &mut rng)?;
    let beta = Array1::from_shape_simple_fn(w.n_features(), || T::standard_normal(&mut rng));
    let mut phi = vec![T::zero(); w.n_features()];
    let noise = T::lit(cfg.noise_sd);
    let mut y = Array1::zeros(cfg.n);
    for (i, row) in x.rows().into_iter().enumerate() {
        feature_map_into(row, &w, &mut phi)?;
        let f = crate::scalar::dot(&phi, beta.as_slice().expect("contiguous"));
        y[i] = if cfg.noise_sd == 0.0 {
            f
        } else {
            f + noise * T::standard_normal(&mut rng)
        };
    }
    Ok(Synthetic {
        data: Dataset::new(x, y, Task::Regression)?,
        spec: spec.clone(),
        frequencies: w,
        beta,
    })
}

/// Two interleaved half circles with Gaussian jitter; label 1 is the lower moon.
pub fn two_moons<T: Scalar>(n: usize, noise: f64, seed: u64) -> Result<Dataset<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_upper = n / 2 + n % 2;
    let mut x = Array2::zeros((n, 2));
    let mut y = Array1::zeros(n);
    let pi = std::f64::consts::PI;
    for i in 0..n {
        let (a, b, label) = if i < n_upper {
            let t = pi * i as f64 / (n_upper.max(2) - 1) as f64;
            (t.cos(), t.sin(), 0.0)
        } else {
            let k = i - n_upper;
            let t = pi * k as f64 / ((n - n_upper).max(2) - 1) as f64;
            (1.0 - t.cos(), 0.5 - t.sin(), 1.0)
        };
        x[[i, 0]] = T::lit(a + noise * T::standard_normal(&mut rng).as_f64());
        x[[i, 1]] = T::lit(b + noise * T::standard_normal(&mut rng).as_f64());
        y[i] = T::lit(label);
    }
    // shuffle rows so that folds see both classes
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    Dataset::new(x.select(Axis(0), &order), y.select(Axis(0), &order), Task::Classification)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;
    use std::io::Write;

    fn schema() -> CsvSchema {
        CsvSchema::default()
    }

    #[test]
    fn loads_simple_file() {
        let text = "a,b,target\n1,2,3\n4,5,6\n7,8.5e-1,9\n";
        let (ds, report) = read_csv::<f64, _>(text.as_bytes(), &schema()).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.x[[2, 1]], 0.85);
        assert_eq!(ds.y, array![3.0, 6.0, 9.0]);
        assert_eq!(ds.feature_names, vec!["a", "b"]);
        assert_eq!(report.rows_read, 3);
    }

    #[test]
    fn malformed_rows_error_or_skip() {
        let text = "a,b,y\n1,2,3\n4,oops,6\n7,8,9\n";
        match read_csv::<f64, _>(text.as_bytes(), &schema()) {
            Err(BankError::Parse { row: 3, column: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let skip = CsvSchema {
            skip_invalid: true,
            ..schema()
        };
        let (ds, report) = read_csv::<f64, _>(text.as_bytes(), &skip).unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].0, 3);
    }

    #[test]
    fn missing_and_ragged_fields_rejected() {
        assert!(matches!(
            read_csv::<f64, _>("a,b,y\n1,,3\n".as_bytes(), &schema()),
            Err(BankError::Parse { column: 1, .. })
        ));
        assert!(matches!(
            read_csv::<f64, _>("a,b,y\n1,2\n".as_bytes(), &schema()),
            Err(BankError::Parse { row: 2, .. })
        ));
        assert!(matches!(
            read_csv::<f64, _>("a,b,y\n".as_bytes(), &schema()),
            Err(BankError::Data(_))
        ));
    }

    #[test]
    fn label_mapping() {
        let s = CsvSchema {
            task: Task::Classification,
            has_header: false,
            target: TargetColumn::Index(0),
            label_map: vec![(-1.0, 0.0), (1.0, 1.0)],
            skip_invalid: false,
        };
        let (ds, _) = read_csv::<f64, _>("-1,0.5\n1,0.25\n-1,3\n".as_bytes(), &s).unwrap();
        assert_eq!(ds.y, array![0.0, 1.0, 0.0]);
        assert_eq!(ds.x.column(0).to_vec(), vec![0.5, 0.25, 3.0]);
        let unmapped = CsvSchema {
            label_map: vec![],
            ..s
        };
        assert!(matches!(
            read_csv::<f64, _>("-1,0.5\n".as_bytes(), &unmapped),
            Err(BankError::InvalidLabel { .. })
        ));
    }

    #[test]
    fn target_by_name() {
        let s = CsvSchema {
            target: TargetColumn::Name("t".into()),
            ..schema()
        };
        let (ds, _) = read_csv::<f64, _>("t,a\n1,2\n".as_bytes(), &s).unwrap();
        assert_eq!(ds.y[0], 1.0);
        assert_eq!(ds.x[[0, 0]], 2.0);
    }

    #[test]
    fn csv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_simple_fn((20, 3), || rng.random::<f64>() * 1e3 - 1e-4);
        let y = Array1::from_shape_simple_fn(20, || rng.random::<f64>());
        let ds = Dataset::new(x, y, Task::Regression).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_csv(&path, &ds).unwrap();
        let (back, _) = load_csv::<f64, _>(&path, &schema()).unwrap();
        assert!((&back.x - &ds.x).iter().all(|v| v.abs() < 1e-12));
        assert!((&back.y - &ds.y).iter().all(|v| v.abs() < 1e-12));
        let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
        writeln!(f, "1,2,nan,4").unwrap();
        assert!(load_csv::<f64, _>(&path, &schema()).is_err());
    }

    #[test]
    fn standardization_round_trip_and_flags() {
        let x = array![[1.0, 5.0], [2.0, 5.0], [4.0, 5.0]];
        let y: Array1<f64> = array![10.0, -3.0, 7.5];
        let ds = Dataset::new(x, y.clone(), Task::Regression).unwrap();
        let (tr, _, rec) = standardize(&ds, &[], true).unwrap();
        assert!(rec.x_constant[1] && !rec.x_constant[0]);
        assert!(tr.x.column(1).iter().all(|&v| v == 0.0));
        let back = rec.inverse_y(tr.y.view());
        assert!((&back - &y).iter().all(|v| v.abs() < 1e-10));
        let (again, _, _) = standardize(&tr, &[], true).unwrap();
        let (m, s) = mean_std(&again.x.column(0).to_vec());
        assert!(m.abs() < 1e-10 && (s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn test_split_uses_train_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let train = Dataset::new(
            Array2::from_shape_simple_fn((50, 1), || rng.random::<f64>()),
            Array1::zeros(50),
            Task::Regression,
        )
        .unwrap();
        let test = Dataset::new(
            Array2::from_shape_simple_fn((50, 1), || rng.random::<f64>() + 3.0),
            Array1::zeros(50),
            Task::Regression,
        )
        .unwrap();
        let (_, rest, _) = standardize(&train, &[&test], true).unwrap();
        assert!(rest[0].x.mean().unwrap() > 1.0);
        let (raw, _, _) = standardize(&train, &[], false).unwrap();
        assert_eq!(raw.x, train.x);
    }

    #[test]
    fn fold_examples() {
        let folds = kfold_splits(10, 5, 0).unwrap();
        assert!(folds.iter().all(|f| f.test.len() == 2));
        let mut all: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        let sizes: Vec<usize> = kfold_splits(11, 5, 3).unwrap().iter().map(|f| f.test.len()).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
        assert_eq!(kfold_splits(50, 5, 9).unwrap(), kfold_splits(50, 5, 9).unwrap());
        assert_ne!(kfold_splits(50, 5, 9).unwrap(), kfold_splits(50, 5, 10).unwrap());
        assert!(kfold_splits(3, 5, 0).is_err());
        let f = &kfold_splits(100, 5, 1).unwrap()[0];
        assert_eq!(f.validation.len(), 16);
    }

    #[test]
    fn fold_csv_export() {
        let folds = kfold_splits(7, 3, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("folds.csv");
        write_folds_csv(&path, &folds).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,fold");
        assert_eq!(lines.len(), 8);
        assert!(lines[1].starts_with("0,"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn folds_partition_indices(n in 2usize..1000, k in 2usize..12, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let folds = kfold_splits(n, k, seed).unwrap();
            let mut seen = vec![0u8; n];
            let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for f in &folds {
                for &i in &f.test { seen[i] += 1; }
                prop_assert_eq!(f.train.len() + f.test.len(), n);
                prop_assert_eq!(f.fit.len() + f.validation.len(), f.train.len());
                prop_assert!(f.validation.iter().all(|i| f.train.binary_search(i).is_ok()));
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn metric_examples() {
        let t = array![0.3, -1.2, 2.0];
        assert_eq!(mse(t.view(), t.view()).unwrap(), 0.0);
        let labels = array![1.0, 0.0, 1.0];
        assert_eq!(error_rate(labels.view(), labels.view()).unwrap(), 0.0);
        assert_eq!(error_rate(array![0.1, 0.9, 0.2].view(), labels.view()).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ds = Dataset::new(
            Array2::zeros((2000, 1)),
            Array1::from_shape_simple_fn(2000, || rng.random::<f64>() * 10.0),
            Task::Regression,
        )
        .unwrap();
        let (std_ds, _, _) = standardize(&ds, &[], true).unwrap();
        let zero = Array1::zeros(2000);
        assert!((mse(zero.view(), std_ds.y.view()).unwrap() - 1.0).abs() < 1e-10);
        assert!(mse(t.view(), labels.slice(ndarray::s![..2]).view()).is_err());
        let s = summarize(&[1.0, 2.0, 3.0]);
        assert!((s.mean - 2.0).abs() < 1e-15 && (s.stderr - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn synthetic_defaults() {
        let spec = GaussianMixtureSpec::<f64>::two_mode_benchmark();
        let syn = synth_generate(&spec, &SynthConfig::default(), 5).unwrap();
        assert_eq!(syn.data.n_rows(), 1000);
        assert_eq!(syn.data.dim(), 1);
        let (_, s) = mean_std(&syn.data.x.column(0).to_vec());
        assert!((s - 4.0).abs() < 0.2, "sd {s}");
        let again = synth_generate(&spec, &SynthConfig::default(), 5).unwrap();
        assert_eq!(again.data, syn.data);
        let clean = synth_generate(
            &spec,
            &SynthConfig {
                noise_sd: 0.0,
                n: 20,
                ..SynthConfig::default()
            },
            6,
        )
        .unwrap();
        let design = crate::design::Design::build(clean.data.x.view(), &clean.frequencies).unwrap();
        let f = design.view().dot(&clean.beta);
        assert!((&f - &clean.data.y).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn moons_are_balanced() {
        let ds = two_moons::<f64>(2001, 0.1, 7).unwrap();
        assert_eq!(ds.n_rows(), 2001);
        let ones = ds.y.iter().filter(|&&v| v == 1.0).count();
        assert_eq!(ones, 1000);
        assert_eq!(ds, two_moons::<f64>(2001, 0.1, 7).unwrap());
    }
}
