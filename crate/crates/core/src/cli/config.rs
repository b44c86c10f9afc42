//! TOML run configuration. Every field has a default, and the effective
//! configuration is written next to the outputs.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineConfig, KernelKind};
use crate::classification::LogisticPrior;
use crate::data::{CsvSchema, SynthConfig, Task, TargetColumn};
use crate::model::Method;
use crate::regression::NigPrior;
use crate::rff::GaussianMixtureSpec;
use crate::sampler::{ProposalMode, SamplerConfig};
use crate::spectral::{NiwParams, NiwPrior};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    /// Method fitted by `train`.
    pub method: Method,
    pub seed: u64,
    /// Output directory; `--out` overrides it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Standardize inputs with train statistics (targets are always
    /// standardized for regression).
    pub standardize_x: bool,
    /// Kernel family of the RKS baseline.
    pub kernel: KernelKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSection>,
    pub sampler: SamplerSection,
    pub baselines: BaselineConfig,
    pub benchmark: BenchmarkSection,
    pub export: ExportSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: Task::Regression,
            method: Method::Bank,
            seed: 0,
            out: None,
            standardize_x: true,
            kernel: KernelKind::Rbf,
            data: None,
            synth: None,
            sampler: SamplerSection::default(),
            baselines: BaselineConfig::default(),
            benchmark: BenchmarkSection::default(),
            export: ExportSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    /// Optional held-out file scored after training.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_path: Option<PathBuf>,
    /// Omitted means the last column.
    #[serde(skip_serializing_if = "TargetColumn::is_last")]
    pub target: TargetColumn,
    pub has_header: bool,
    pub skip_invalid: bool,
    pub label_map: Vec<(f64, f64)>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            path: PathBuf::new(),
            test_path: None,
            target: TargetColumn::Last,
            has_header: true,
            skip_invalid: false,
            label_map: Vec::new(),
        }
    }
}

impl DataSection {
    pub fn schema(&self, task: Task) -> CsvSchema {
        CsvSchema {
            target: self.target.clone(),
            has_header: self.has_header,
            task,
            label_map: self.label_map.clone(),
            skip_invalid: self.skip_invalid,
        }
    }
}

/// One spectral mixture component of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSection {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n: usize,
    pub n_frequencies: usize,
    pub noise_sd: f64,
    pub x_sd: f64,
    /// Spectral mixture of the generating kernel; empty means the two-mode
    /// benchmark `½N(0, ¼) + ½N(3π/4, ¼)`.
    pub components: Vec<ComponentSection>,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = SynthConfig::default();
        Self {
            n: d.n,
            n_frequencies: d.n_frequencies,
            noise_sd: d.noise_sd,
            x_sd: d.x_sd,
            components: Vec::new(),
        }
    }
}

impl SynthSection {
    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            n: self.n,
            n_frequencies: self.n_frequencies,
            noise_sd: self.noise_sd,
            x_sd: self.x_sd,
        }
    }

    pub fn spec(&self) -> Result<GaussianMixtureSpec<f64>, String> {
        if self.components.is_empty() {
            return Ok(GaussianMixtureSpec::two_mode_benchmark());
        }
        let parts = self
            .components
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let d = c.mean.len();
                if c.cov.len() != d || c.cov.iter().any(|r| r.len() != d) {
                    return Err(format!("synth.components[{k}].cov must be {d}×{d}"));
                }
                let cov = Array2::from_shape_fn((d, d), |(i, j)| c.cov[i][j]);
                Ok((c.weight, Array1::from(c.mean.clone()), cov))
            })
            .collect::<Result<Vec<_>, String>>()?;
        GaussianMixtureSpec::from_parts(parts).map_err(|e| format!("synth.components: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NigSection {
    pub sigma: f64,
    pub a0: f64,
    pub b0: f64,
}

impl Default for NigSection {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            a0: 1.0,
            b0: 1.0,
        }
    }
}

/// `μ0 = mean·1`, `κ0 = kappa`, `Ψ0 = scale·I`, `ν0 = d + dof_offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NiwSection {
    pub mean: f64,
    pub kappa: f64,
    pub scale: f64,
    pub dof_offset: f64,
}

impl Default for NiwSection {
    fn default() -> Self {
        Self {
            mean: 0.0,
            kappa: 1.0,
            scale: 1.0,
            dof_offset: 2.0,
        }
    }
}

impl NiwSection {
    pub fn prior(&self, d: usize) -> crate::Result<NiwPrior<f64>> {
        NiwParams::new(
            Array1::from_elem(d, self.mean),
            self.kappa,
            Array2::eye(d) * self.scale,
            d as f64 + self.dof_offset,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub n_iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_frequencies: usize,
    pub n_draws: usize,
    pub alpha: f64,
    pub proposal_mode: ProposalMode,
    pub fast_swaps: bool,
    pub init_subsample: usize,
    /// Predict with the final state only instead of averaging kept snapshots.
    pub final_only: bool,
    pub nig: NigSection,
    pub logistic_sigma: f64,
    pub niw: NiwSection,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::<f64>::default();
        Self {
            n_iters: d.n_iters,
            burn_in: d.burn_in,
            thin: d.thin,
            n_frequencies: d.n_frequencies,
            n_draws: d.n_draws,
            alpha: d.alpha,
            proposal_mode: d.proposal_mode,
            fast_swaps: d.fast_swaps,
            init_subsample: d.init_subsample,
            final_only: false,
            nig: NigSection::default(),
            logistic_sigma: 1.0,
            niw: NiwSection::default(),
        }
    }
}

impl SamplerSection {
    pub fn to_config(&self, task: Task, seed: u64, d: usize) -> crate::Result<SamplerConfig<f64>> {
        let config = SamplerConfig {
            n_iters: self.n_iters,
            burn_in: self.burn_in,
            thin: self.thin,
            n_frequencies: self.n_frequencies,
            n_draws: self.n_draws,
            seed,
            task,
            niw: Some(self.niw.prior(d)?),
            alpha: self.alpha,
            nig: NigPrior::new(self.nig.sigma, self.nig.a0, self.nig.b0)?,
            logistic: LogisticPrior::new(self.logistic_sigma)?,
            proposal_mode: self.proposal_mode,
            fast_swaps: self.fast_swaps,
            init_subsample: self.init_subsample,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSection {
    pub folds: usize,
    pub methods: Vec<Method>,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        Self {
            folds: 5,
            methods: vec![Method::Bank, Method::Rks, Method::Mkl],
        }
    }
}

/// Grids for `kernel-export`, in original input units along the first axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportSection {
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    pub omega_points: usize,
}

impl Default for ExportSection {
    fn default() -> Self {
        Self {
            t_min: -10.0,
            t_max: 10.0,
            t_points: 401,
            omega_min: -5.0,
            omega_max: 5.0,
            omega_points: 401,
        }
    }
}

impl ExportSection {
    pub fn validate(&self) -> Result<(), String> {
        for (name, lo, hi, n) in [
            ("export.t", self.t_min, self.t_max, self.t_points),
            ("export.omega", self.omega_min, self.omega_max, self.omega_points),
        ] {
            if n == 0 {
                return Err(format!("{name}_points must be at least 1"));
            }
            if !(lo.is_finite() && hi.is_finite()) || lo > hi || (n > 1 && lo == hi) {
                return Err(format!("{name}_min/{name}_max must be finite with min < max"));
            }
        }
        Ok(())
    }
}

/// Evenly spaced grid; a single point sits at `lo`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Reads a config file; relative data paths are taken relative to it.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config '{}': {e}", path.display()))?;
        let mut config = Self::from_toml(&text).map_err(|e| format!("config '{}': {e}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        if let Some(data) = &mut config.data {
            if data.path.is_relative() && !data.path.as_os_str().is_empty() {
                data.path = base.join(&data.path);
            }
            if let Some(t) = &mut data.test_path {
                if t.is_relative() {
                    *t = base.join(&*t);
                }
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always representable in TOML")
    }

    /// Checks everything that does not depend on the data.
    pub fn validate(&self) -> Result<(), String> {
        match (&self.data, &self.synth) {
            (None, None) => return Err("data.path is required (or give a [synth] section)".into()),
            (Some(_), Some(_)) => return Err("give either [data] or [synth], not both".into()),
            (Some(data), None) => {
                if data.path.as_os_str().is_empty() {
                    return Err("data.path is required".into());
                }
                if !data.path.is_file() {
                    return Err(format!("data.path: file '{}' does not exist", data.path.display()));
                }
                if let Some(t) = &data.test_path {
                    if !t.is_file() {
                        return Err(format!("data.test_path: file '{}' does not exist", t.display()));
                    }
                }
            }
            (None, Some(s)) => {
                if s.n == 0 || s.n_frequencies == 0 {
                    return Err("synth.n and synth.n_frequencies must be positive".into());
                }
                if !(s.noise_sd >= 0.0 && s.x_sd > 0.0) {
                    return Err("synth.noise_sd must be ≥ 0 and synth.x_sd > 0".into());
                }
                s.spec()?;
                if self.task != Task::Regression {
                    return Err("[synth] generates regression data; set task = \"regression\"".into());
                }
            }
        }
        let s = &self.sampler;
        if s.burn_in > s.n_iters {
            return Err(format!("sampler.burn_in ({}) exceeds sampler.n_iters ({})", s.burn_in, s.n_iters));
        }
        if s.thin == 0 {
            return Err("sampler.thin must be at least 1".into());
        }
        if s.n_frequencies == 0 {
            return Err("sampler.n_frequencies must be at least 1".into());
        }
        if s.n_draws == 0 {
            return Err("sampler.n_draws must be at least 1".into());
        }
        if s.init_subsample < 2 {
            return Err("sampler.init_subsample must be at least 2".into());
        }
        if self.method == Method::Bank && !s.final_only && s.n_iters == s.burn_in {
            return Err("sampler.burn_in equals sampler.n_iters, so no snapshot is kept; set sampler.final_only = true".into());
        }
        for (name, v) in [
            ("sampler.alpha", s.alpha),
            ("sampler.nig.sigma", s.nig.sigma),
            ("sampler.nig.a0", s.nig.a0),
            ("sampler.nig.b0", s.nig.b0),
            ("sampler.logistic_sigma", s.logistic_sigma),
            ("sampler.niw.kappa", s.niw.kappa),
            ("sampler.niw.scale", s.niw.scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(s.niw.dof_offset > -1.0) {
            return Err("sampler.niw.dof_offset must exceed -1".into());
        }
        self.baselines.validate().map_err(|e| format!("baselines: {e}"))?;
        if self.benchmark.folds < 2 {
            return Err("benchmark.folds must be at least 2".into());
        }
        if self.benchmark.methods.is_empty() {
            return Err("benchmark.methods must not be empty".into());
        }
        self.export.validate()
    }
}
