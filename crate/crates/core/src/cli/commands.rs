//! Implementations of the `bank` subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{linspace, ExportSection, RunConfig};
use crate::baselines::{mkl_fit, rks_fit, BaselineFit, KernelFamily};
use crate::data::{format_float, kfold_splits, load_csv, summarize, synth_generate, write_csv, Dataset, Standardization, Task};
use crate::error::BankError;
use crate::model::{Method, SavedModel};
use crate::predictor::Ensemble;
use crate::rff::{mixture_kernel_eval, mixture_pdf};
use crate::sampler::{ensemble_from_trace, run_chain_with_progress};
use crate::spectral::state_to_mixture_spec;

/// A failed command; usage errors exit with 2, everything else with 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] BankError),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) | CliError::Failed(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const MODEL_FILE: &str = "model.bank";
pub const METRICS_FILE: &str = "metrics.json";
pub const CONFIG_ECHO_FILE: &str = "config.toml";
pub const DIAGNOSTIC_FILE: &str = "diagnostic.txt";

/// Reads `path` (or the defaults) and applies the `--seed` override.
pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> CliResult<RunConfig> {
    let mut config = match path {
        Some(p) => RunConfig::load(p).map_err(CliError::Usage)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

/// `--out`, then the config's `out`, then `default`.
pub fn output_dir(cli_out: Option<&Path>, config: &RunConfig, default: &str) -> PathBuf {
    cli_out
        .map(Path::to_path_buf)
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from(default))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Failed(format!("cannot create output directory '{}': {e}", dir.display())))
}

fn write_config_echo(dir: &Path, config: &RunConfig) -> CliResult<()> {
    let mut echo = config.clone();
    echo.out = None;
    fs::write(dir.join(CONFIG_ECHO_FILE), echo.to_toml()).map_err(BankError::from)?;
    Ok(())
}

/// Training data (and the optional test file) named by the config.
pub fn load_data(config: &RunConfig) -> CliResult<(Dataset<f64>, Option<Dataset<f64>>)> {
    config.validate().map_err(CliError::Usage)?;
    if let Some(s) = &config.synth {
        let spec = s.spec().map_err(CliError::Usage)?;
        let data = synth_generate(&spec, &s.synth_config(), config.seed)?.data;
        return Ok((data, None));
    }
    let section = config.data.as_ref().expect("validated");
    let schema = section.schema(config.task);
    let load = |path: &Path| -> CliResult<Dataset<f64>> {
        let (data, report) = load_csv(path, &schema).map_err(|e| match e {
            BankError::Parse { .. } | BankError::Data(_) | BankError::InvalidLabel { .. } => {
                CliError::Failed(format!("{}: {e}", path.display()))
            }
            other => CliError::Runtime(other),
        })?;
        for (line, reason) in &report.skipped {
            log::warn!("{}: skipped line {line}: {reason}", path.display());
        }
        Ok(data)
    };
    let train = load(&section.path)?;
    let test = section.test_path.as_deref().map(load).transpose()?;
    if let Some(t) = &test {
        if t.dim() != train.dim() {
            return Err(CliError::Usage(format!(
                "data.test_path has {} input columns but data.path has {}",
                t.dim(),
                train.dim()
            )));
        }
    }
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerSummary {
    pub n_kept: usize,
    pub acceptance_rate: f64,
    pub final_log_evidence: f64,
    pub final_components: usize,
    pub mean_kept_components: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineSummary {
    pub kernels: Vec<String>,
    pub lambda: f64,
    pub validation_score: f64,
}

/// A fitted model plus method-specific diagnostics.
pub struct Fitted {
    pub model: SavedModel,
    pub sampler: Option<SamplerSummary>,
    pub baseline: Option<BaselineSummary>,
}

/// Fits `config.method` on `train` with seed `seed`.
pub fn fit_model(config: &RunConfig, method: Method, train: &Dataset<f64>, seed: u64) -> CliResult<Fitted> {
    let standardization = Standardization::fit(train, config.standardize_x)?;
    let z = standardization.apply(train)?;
    let mut model = SavedModel {
        method,
        seed,
        standardization,
        feature_names: train.feature_names.clone(),
        target_name: train.target_name.clone(),
        config: config.to_toml(),
        ensemble: Ensemble {
            task: config.task,
            members: Vec::new(),
        },
        states: Vec::new(),
        families: Vec::new(),
        lambda: None,
    };
    match method {
        Method::Bank => {
            let sampler = config
                .sampler
                .to_config(config.task, seed, train.dim())
                .map_err(|e| CliError::Usage(format!("sampler: {e}")))?;
            let trace = run_chain_with_progress(z.x.view(), z.y.view(), &sampler, |s| {
                if s.iteration % 10 == 0 || s.iteration == sampler.n_iters {
                    log::info!(
                        "iteration {}/{}: log evidence {:.4}, {} components, accepted {}/{}",
                        s.iteration,
                        sampler.n_iters,
                        s.log_evidence,
                        s.n_components,
                        s.accepted,
                        s.proposed
                    );
                }
            })?;
            let final_only = config.sampler.final_only;
            model.ensemble = ensemble_from_trace(&trace, z.x.view(), z.y.view(), &sampler.head_prior(), final_only)?;
            model.states = if final_only {
                vec![trace.final_state.clone()]
            } else {
                trace.snapshots.iter().map(|s| s.state.clone()).collect()
            };
            let kept = trace.snapshots.len().max(1) as f64;
            Ok(Fitted {
                sampler: Some(SamplerSummary {
                    n_kept: trace.snapshots.len(),
                    acceptance_rate: trace.acceptance_rate(sampler.burn_in),
                    final_log_evidence: trace.final_log_evidence,
                    final_components: trace.final_state.n_components(),
                    mean_kept_components: trace.snapshots.iter().map(|s| s.stats.n_components as f64).sum::<f64>()
                        / kept,
                }),
                baseline: None,
                model,
            })
        }
        Method::Rks | Method::Mkl => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fit: BaselineFit<f64> = if method == Method::Rks {
                rks_fit(&z, config.kernel, &config.baselines, &mut rng)?
            } else {
                mkl_fit(&z, &config.baselines, &mut rng)?
            };
            let summary = BaselineSummary {
                kernels: fit.families.iter().map(describe_family).collect(),
                lambda: fit.lambda,
                validation_score: fit.validation_score,
            };
            model.ensemble = Ensemble::new(config.task, vec![fit.member])?;
            model.families = fit.families;
            model.lambda = Some(fit.lambda);
            Ok(Fitted {
                model,
                sampler: None,
                baseline: Some(summary),
            })
        }
    }
}

fn describe_family(f: &KernelFamily<f64>) -> String {
    format!("{}({})", f.kind, format_float(f.scale))
}

fn metric_name(task: Task) -> &'static str {
    match task {
        Task::Regression => "mse",
        Task::Classification => "error_rate",
    }
}

/// Metric in original units and, for regression, in standardized target
/// units.
fn score(model: &SavedModel, data: &Dataset<f64>) -> CliResult<(f64, Option<f64>)> {
    let pred = model.predict(data.x.view())?;
    let m = crate::data::metric(model.task(), pred.mean.view(), data.y.view())?;
    let s = model.standardization.y_scale;
    Ok((m, (model.task() == Task::Regression).then(|| m / (s * s))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainMetrics {
    pub task: Task,
    pub method: Method,
    pub seed: u64,
    pub n_train: usize,
    pub input_dim: usize,
    pub metric: &'static str,
    pub train: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_standardized: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_test: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_standardized: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineSummary>,
}

/// `train`: fits, then writes the model, metrics and effective config to `out`.
pub fn cmd_train(config: &RunConfig, out: &Path) -> CliResult<TrainMetrics> {
    let (train, test) = load_data(config)?;
    create_dir(out)?;
    write_config_echo(out, config)?;
    let fitted = match fit_model(config, config.method, &train, config.seed) {
        Err(CliError::Runtime(e @ BankError::NonFiniteEvidence { .. })) => {
            let path = out.join(DIAGNOSTIC_FILE);
            fs::write(&path, e.to_string()).map_err(BankError::from)?;
            return Err(CliError::Failed(format!(
                "sampler produced a non-finite log evidence; diagnostic dump written to {}",
                path.display()
            )));
        }
        other => other?,
    };
    let model = fitted.model;
    let (train_m, train_s) = score(&model, &train)?;
    let (test_m, test_s) = match &test {
        Some(t) => {
            let (m, s) = score(&model, t)?;
            (Some(m), s)
        }
        None => (None, None),
    };
    let metrics = TrainMetrics {
        task: config.task,
        method: config.method,
        seed: config.seed,
        n_train: train.n_rows(),
        input_dim: train.dim(),
        metric: metric_name(config.task),
        train: train_m,
        train_standardized: train_s,
        n_test: test.as_ref().map(|t| t.n_rows()),
        test: test_m,
        test_standardized: test_s,
        sampler: fitted.sampler,
        baseline: fitted.baseline,
    };
    model.save(out.join(MODEL_FILE))?;
    let json = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
    fs::write(out.join(METRICS_FILE), json + "\n").map_err(BankError::from)?;
    log::info!("{} {} = {}", metrics.method, metrics.metric, metrics.train);
    Ok(metrics)
}

/// Numeric CSV with an optional header row (detected from the first record).
pub fn read_table(path: &Path) -> CliResult<(Option<Vec<String>>, Array2<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("cannot open data file '{}': {e}", path.display())))?;
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(BankError::from)?;
        let parsed: Vec<Option<f64>> = rec.iter().map(|f| f.trim().parse::<f64>().ok()).collect();
        if i == 0 && parsed.iter().any(Option::is_none) {
            header = Some(rec.iter().map(|f| f.trim().to_string()).collect());
            continue;
        }
        let mut row = Vec::with_capacity(parsed.len());
        for (c, v) in parsed.into_iter().enumerate() {
            match v {
                Some(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(CliError::Runtime(BankError::Parse {
                        row: i + 1,
                        column: c + 1,
                        message: format!("'{}' is not a finite number", &rec[c]),
                    }))
                }
            }
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(CliError::Runtime(BankError::Parse {
                    row: i + 1,
                    column: row.len(),
                    message: format!("expected {} fields", first.len()),
                }));
            }
        }
        rows.push(row);
    }
    let ncols = rows
        .first()
        .map(Vec::len)
        .or_else(|| header.as_ref().map(Vec::len))
        .unwrap_or(0);
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let x = Array2::from_shape_vec((rows.len(), ncols), flat).expect("rows have equal length");
    Ok((header, x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictReport {
    pub n_rows: usize,
    pub path: PathBuf,
    /// Metric against the target column when the file has one.
    pub metric: Option<f64>,
}

/// `predict`: writes `predictions.csv` to `out`. The data file holds either the
/// model's input columns only, or those plus the target column (matched by
/// name, else taken to be last).
pub fn cmd_predict(model_path: &Path, data_path: &Path, out: &Path) -> CliResult<PredictReport> {
    let model = SavedModel::load(model_path).map_err(|e| match e {
        BankError::Io(io) => CliError::Usage(format!("cannot read model '{}': {io}", model_path.display())),
        other => CliError::Runtime(other),
    })?;
    let (header, table) = read_table(data_path)?;
    let d = model.input_dim();
    let k = table.ncols();
    let (x, y): (Array2<f64>, Option<Array1<f64>>) = if k == d {
        (table, None)
    } else if k == d + 1 {
        let target = header
            .as_ref()
            .and_then(|h| h.iter().position(|n| *n == model.target_name))
            .unwrap_or(d);
        let keep: Vec<usize> = (0..k).filter(|&c| c != target).collect();
        (table.select(ndarray::Axis(1), &keep), Some(table.column(target).to_owned()))
    } else {
        return Err(CliError::Usage(format!(
            "dimension mismatch: model expects {d} input columns, '{}' has {k} columns",
            data_path.display()
        )));
    };
    let pred = model.predict(x.view())?;
    create_dir(out)?;
    let path = out.join("predictions.csv");
    let mut w = csv::Writer::from_path(&path).map_err(BankError::from)?;
    match model.task() {
        Task::Regression => {
            let mut head = vec!["row", "prediction"];
            if pred.variance.is_some() {
                head.push("variance");
            }
            w.write_record(&head).map_err(BankError::from)?;
            for i in 0..x.nrows() {
                let mut rec = vec![i.to_string(), format_float(pred.mean[i])];
                if let Some(v) = &pred.variance {
                    rec.push(format_float(v[i]));
                }
                w.write_record(&rec).map_err(BankError::from)?;
            }
        }
        Task::Classification => {
            w.write_record(["row", "label", "probability"]).map_err(BankError::from)?;
            for i in 0..x.nrows() {
                let p = pred.mean[i];
                let label = if p >= 0.5 { "1" } else { "0" };
                w.write_record([i.to_string(), label.to_string(), format_float(p)])
                    .map_err(BankError::from)?;
            }
        }
    }
    w.flush().map_err(BankError::from)?;
    let metric = match &y {
        Some(y) => {
            let m = crate::data::metric(model.task(), pred.mean.view(), y.view())?;
            log::info!("{} against the target column: {m}", metric_name(model.task()));
            Some(m)
        }
        None => None,
    };
    Ok(PredictReport {
        n_rows: x.nrows(),
        path,
        metric,
    })
}

/// `kernel-export`: `kernel.csv` with `(t, k(t))` and `spectrum.csv` with
/// `(omega, density)` along the first input axis, in original input units,
/// averaged over the model's kept sampler states.
pub fn cmd_kernel_export(model_path: &Path, grid: &ExportSection, out: &Path) -> CliResult<(PathBuf, PathBuf)> {
    grid.validate().map_err(CliError::Usage)?;
    let model = SavedModel::load(model_path).map_err(|e| match e {
        BankError::Io(io) => CliError::Usage(format!("cannot read model '{}': {io}", model_path.display())),
        other => CliError::Runtime(other),
    })?;
    if model.method != Method::Bank || model.states.is_empty() {
        return Err(CliError::Usage(format!(
            "kernel-export needs a BaNK model with sampler states; '{}' was trained with {}",
            model_path.display(),
            model.method
        )));
    }
    let specs = model
        .states
        .iter()
        .map(state_to_mixture_spec)
        .collect::<crate::Result<Vec<_>>>()?;
    let d = model.input_dim();
    let s0 = model.standardization.x_scale[0];
    let jacobian: f64 = model.standardization.x_scale.iter().product();
    let n_specs = specs.len() as f64;
    create_dir(out)?;

    let kernel_path = out.join("kernel.csv");
    let mut w = csv::Writer::from_path(&kernel_path).map_err(BankError::from)?;
    w.write_record(["t", "k"]).map_err(BankError::from)?;
    let mut lag = Array1::zeros(d);
    for t in linspace(grid.t_min, grid.t_max, grid.t_points) {
        lag[0] = t / s0;
        let mut k = 0.0;
        for spec in &specs {
            k += mixture_kernel_eval(lag.view(), spec)?;
        }
        w.write_record([format_float(t), format_float(k / n_specs)])
            .map_err(BankError::from)?;
    }
    w.flush().map_err(BankError::from)?;

    let spectrum_path = out.join("spectrum.csv");
    let mut w = csv::Writer::from_path(&spectrum_path).map_err(BankError::from)?;
    w.write_record(["omega", "density"]).map_err(BankError::from)?;
    let mut omega_std = Array1::zeros(d);
    for omega in linspace(grid.omega_min, grid.omega_max, grid.omega_points) {
        omega_std[0] = omega * s0;
        let mut p = 0.0;
        for spec in &specs {
            p += mixture_pdf(omega_std.view(), spec)?;
        }
        w.write_record([format_float(omega), format_float(p / n_specs * jacobian)])
            .map_err(BankError::from)?;
    }
    w.flush().map_err(BankError::from)?;
    Ok((kernel_path, spectrum_path))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub method: Method,
    /// `None` when any fold failed.
    pub metric: Option<f64>,
    pub stderr: Option<f64>,
    pub seconds: f64,
    pub fold_metrics: Vec<Option<f64>>,
    pub error: Option<String>,
}

fn job_seed(seed: u64, method: usize, fold: usize) -> u64 {
    let mix = ((method as u64) << 32 | fold as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    seed ^ mix
}

/// Runs every method on every fold; metrics are standardized MSE for
/// regression and error rate for classification.
pub fn run_benchmark(config: &RunConfig, data: &Dataset<f64>) -> CliResult<Vec<BenchmarkRow>> {
    let folds = kfold_splits(data.n_rows(), config.benchmark.folds, config.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let methods = &config.benchmark.methods;
    let jobs: Vec<(usize, usize)> = (0..methods.len()).flat_map(|m| (0..folds.len()).map(move |f| (m, f))).collect();
    let results: Vec<(f64, std::result::Result<f64, String>)> = jobs
        .par_iter()
        .map(|&(m, f)| {
            let start = Instant::now();
            let train = data.select(&folds[f].train);
            let test = data.select(&folds[f].test);
            let outcome = fit_model(config, methods[m], &train, job_seed(config.seed, m, f))
                .and_then(|fitted| score(&fitted.model, &test))
                .map(|(raw, standardized)| standardized.unwrap_or(raw))
                .map_err(|e| e.to_string());
            if let Err(e) = &outcome {
                log::error!("{} fold {f} failed: {e}", methods[m]);
            } else {
                log::info!("{} fold {f} done", methods[m]);
            }
            (start.elapsed().as_secs_f64(), outcome)
        })
        .collect();
    let k = folds.len();
    Ok(methods
        .iter()
        .enumerate()
        .map(|(m, &method)| {
            let chunk = &results[m * k..(m + 1) * k];
            let seconds = chunk.iter().map(|(s, _)| s).sum();
            let fold_metrics: Vec<Option<f64>> = chunk.iter().map(|(_, r)| r.as_ref().ok().copied()).collect();
            let error = chunk.iter().find_map(|(_, r)| r.as_ref().err().cloned());
            let (metric, stderr) = if error.is_none() {
                let vals: Vec<f64> = fold_metrics.iter().flatten().copied().collect();
                let s = summarize(&vals);
                (Some(s.mean), Some(s.stderr))
            } else {
                (None, None)
            };
            BenchmarkRow {
                method,
                metric,
                stderr,
                seconds,
                fold_metrics,
                error,
            }
        })
        .collect())
}

pub fn format_benchmark_table(task: Task, rows: &[BenchmarkRow]) -> String {
    let name = match task {
        Task::Regression => "standardized MSE",
        Task::Classification => "error rate",
    };
    let mut out = format!("{:<8} {:>24} {:>10}\n", "method", name, "seconds");
    for r in rows {
        let cell = match (r.metric, r.stderr) {
            (Some(m), Some(s)) => format!("{m:.4} ± {s:.4}"),
            _ => "failed".to_string(),
        };
        out.push_str(&format!("{:<8} {:>24} {:>10.2}\n", r.method.to_string(), cell, r.seconds));
    }
    out
}

/// `benchmark`: writes `benchmark.csv`, `benchmark.txt` and `folds.csv`.
/// Fails (after writing) if any method failed on any fold.
pub fn cmd_benchmark(config: &RunConfig, out: &Path) -> CliResult<Vec<BenchmarkRow>> {
    let (data, test) = load_data(config)?;
    if test.is_some() {
        log::warn!("benchmark cross-validates data.path only; data.test_path is ignored");
    }
    create_dir(out)?;
    write_config_echo(out, config)?;
    let rows = run_benchmark(config, &data)?;

    let mut w = csv::Writer::from_path(out.join("benchmark.csv")).map_err(BankError::from)?;
    w.write_record(["method", "metric", "stderr", "seconds"]).map_err(BankError::from)?;
    for r in &rows {
        let cell = |v: Option<f64>| v.map_or_else(|| "failed".to_string(), format_float);
        w.write_record([r.method.to_string(), cell(r.metric), cell(r.stderr), format!("{:.3}", r.seconds)])
            .map_err(BankError::from)?;
    }
    w.flush().map_err(BankError::from)?;

    let mut w = csv::Writer::from_path(out.join("folds.csv")).map_err(BankError::from)?;
    w.write_record(["method", "fold", "metric"]).map_err(BankError::from)?;
    for r in &rows {
        for (f, m) in r.fold_metrics.iter().enumerate() {
            w.write_record([r.method.to_string(), f.to_string(), m.map_or_else(|| "failed".to_string(), format_float)])
                .map_err(BankError::from)?;
        }
    }
    w.flush().map_err(BankError::from)?;

    let table = format_benchmark_table(config.task, &rows);
    fs::write(out.join("benchmark.txt"), &table).map_err(BankError::from)?;
    let failed: Vec<String> = rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("{}: {e}", r.method)))
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Failed(format!("{} method(s) failed: {}", failed.len(), failed.join("; "))));
    }
    Ok(rows)
}

/// `synth`: writes `data.csv` and the generating kernel on the export lag
/// grid as `true_kernel.csv`.
pub fn cmd_synth(config: &RunConfig, out: &Path) -> CliResult<PathBuf> {
    let section = config.synth.clone().unwrap_or_default();
    let checked = RunConfig {
        synth: Some(section.clone()),
        data: None,
        task: Task::Regression,
        ..config.clone()
    };
    checked.validate().map_err(CliError::Usage)?;
    let spec = section.spec().map_err(CliError::Usage)?;
    let syn = synth_generate(&spec, &section.synth_config(), config.seed)?;
    create_dir(out)?;
    let path = out.join("data.csv");
    write_csv(&path, &syn.data)?;

    let mut w = csv::Writer::from_path(out.join("true_kernel.csv")).map_err(BankError::from)?;
    w.write_record(["t", "k"]).map_err(BankError::from)?;
    let mut lag = Array1::zeros(spec.dim());
    for t in linspace(config.export.t_min, config.export.t_max, config.export.t_points) {
        lag[0] = t;
        w.write_record([format_float(t), format_float(mixture_kernel_eval(lag.view(), &spec)?)])
            .map_err(BankError::from)?;
    }
    w.flush().map_err(BankError::from)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::{SamplerSection, SynthSection};

    fn small_config() -> RunConfig {
        RunConfig {
            synth: Some(SynthSection {
                n: 80,
                n_frequencies: 20,
                noise_sd: 0.1,
                ..SynthSection::default()
            }),
            sampler: SamplerSection {
                n_iters: 6,
                burn_in: 2,
                thin: 2,
                n_frequencies: 8,
                ..SamplerSection::default()
            },
            baselines: crate::baselines::BaselineConfig {
                n_frequencies: 18,
                ..Default::default()
            },
            ..RunConfig::default()
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Failed("x".into()).exit_code(), 1);
        assert_eq!(CliError::Runtime(BankError::EmptyTrace).exit_code(), 1);
    }

    #[test]
    fn train_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config();
        cmd_train(&config, &dir.path().join("a")).unwrap();
        cmd_train(&config, &dir.path().join("b")).unwrap();
        let a = fs::read(dir.path().join("a").join(METRICS_FILE)).unwrap();
        let b = fs::read(dir.path().join("b").join(METRICS_FILE)).unwrap();
        assert_eq!(a, b);
        let echo = fs::read_to_string(dir.path().join("a").join(CONFIG_ECHO_FILE)).unwrap();
        assert_eq!(RunConfig::from_toml(&echo).unwrap(), config);
    }

    #[test]
    fn benchmark_rows() {
        let config = RunConfig {
            benchmark: crate::cli::config::BenchmarkSection {
                folds: 3,
                methods: vec![Method::Rks, Method::Bank],
            },
            ..small_config()
        };
        let (data, _) = load_data(&config).unwrap();
        let rows = run_benchmark(&config, &data).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.metric.unwrap().is_finite() && r.fold_metrics.len() == 3));
        let table = format_benchmark_table(Task::Regression, &rows);
        assert_eq!(table.lines().count(), 3);
    }

    #[test]
    fn table_reader_detects_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "a,b\n1,2\n3,4\n").unwrap();
        let (h, x) = read_table(&p).unwrap();
        assert_eq!(h.unwrap(), vec!["a", "b"]);
        assert_eq!(x, ndarray::array![[1.0, 2.0], [3.0, 4.0]]);
        fs::write(&p, "1,2\n3,x\n").unwrap();
        assert!(read_table(&p).is_err());
    }
}
