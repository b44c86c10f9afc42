//! Saved models.
//!
//! A model file is a `BANK-MODEL` line, a TOML metadata block, a
//! `%%END-METADATA%%` line, and then the raw little-endian `f64` payload of
//! every array listed in the metadata manifest, in manifest order. Dense
//! arrays are row-major; `upper` arrays hold the upper triangle of a square
//! matrix row by row.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::baselines::{KernelFamily, KernelKind};
use crate::data::{Standardization, Task};
use crate::error::{check_dim, BankError, Result};
use crate::linalg::CholeskyFactor;
use crate::predictor::{Ensemble, Head, Member, Prediction};
use crate::rff::{FrequencyMatrix, GaussianComponent};
use crate::spectral::SpectralState;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "BANK-MODEL";
const END_MARKER: &str = "%%END-METADATA%%";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bank,
    Rks,
    Mkl,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Bank => "bank",
            Method::Rks => "rks",
            Method::Mkl => "mkl",
        })
    }
}

impl FromStr for Method {
    type Err = BankError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bank" => Ok(Method::Bank),
            "rks" => Ok(Method::Rks),
            "mkl" => Ok(Method::Mkl),
            other => Err(BankError::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

/// Everything needed to predict on raw inputs and to export the learned kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub method: Method,
    pub seed: u64,
    pub standardization: Standardization,
    pub feature_names: Vec<String>,
    pub target_name: String,
    /// Effective configuration, echoed verbatim.
    pub config: String,
    pub ensemble: Ensemble<f64>,
    /// Kept sampler states (BaNK only).
    pub states: Vec<SpectralState<f64>>,
    /// Kernel banks and penalty (baselines only).
    pub families: Vec<KernelFamily<f64>>,
    pub lambda: Option<f64>,
}

impl SavedModel {
    pub fn task(&self) -> Task {
        self.ensemble.task
    }

    pub fn input_dim(&self) -> usize {
        self.ensemble.input_dim()
    }

    /// Predictions in original target units. BaNK classifiers use the
    /// moderated probability, baselines the MAP plug-in.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Prediction<f64>> {
        check_dim("model input dimension", self.input_dim(), x.ncols())?;
        let z = self.standardization.transform_x(x)?;
        let pred = self.ensemble.predict(z.view(), self.method != Method::Bank)?;
        Ok(match self.task() {
            Task::Regression => Prediction {
                mean: self.standardization.inverse_y(pred.mean.view()),
                variance: pred.variance.map(|v| self.standardization.inverse_var(v.view())),
            },
            Task::Classification => pred,
        })
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut payload = Payload::default();
        let members = self
            .ensemble
            .members
            .iter()
            .enumerate()
            .map(|(i, m)| {
                for (b, w) in m.banks.iter().enumerate() {
                    payload.dense(format!("member{i}.bank{b}"), w.view());
                }
                payload.dense(format!("member{i}.weights"), m.head.weights().view().insert_axis(ndarray::Axis(1)));
                payload.upper(format!("member{i}.precision"), m.head.precision());
                let (shape, rate) = match &m.head {
                    Head::Regression { shape, rate, .. } => (Some(*shape), Some(*rate)),
                    Head::Classification { .. } => (None, None),
                };
                MemberRecord {
                    n_banks: m.banks.len(),
                    shape,
                    rate,
                }
            })
            .collect();
        let states = self
            .states
            .iter()
            .enumerate()
            .map(|(s, st)| {
                payload.dense(format!("state{s}.frequencies"), st.frequencies().view());
                let z = Array2::from_shape_fn((st.n_frequencies(), 1), |(j, _)| st.assignments()[j] as f64);
                payload.dense(format!("state{s}.assignments"), z.view());
                for (k, c) in st.components().iter().enumerate() {
                    payload.dense(format!("state{s}.component{k}.mean"), c.mean().view().insert_axis(ndarray::Axis(1)));
                    payload.dense(format!("state{s}.component{k}.cov"), c.cov().view());
                }
                StateRecord {
                    alpha: st.alpha(),
                    n_components: st.n_components(),
                }
            })
            .collect();
        let meta = Metadata {
            format_version: FORMAT_VERSION,
            method: self.method,
            task: self.task(),
            seed: self.seed,
            input_dim: self.input_dim(),
            target_name: self.target_name.clone(),
            feature_names: self.feature_names.clone(),
            lambda: self.lambda,
            config: self.config.clone(),
            families: self
                .families
                .iter()
                .map(|f| FamilyRecord {
                    kind: f.kind,
                    scale: f.scale,
                })
                .collect(),
            standardization: self.standardization.clone(),
            members,
            states,
            arrays: payload.manifest,
        };
        let text = toml::to_string(&meta).map_err(|e| BankError::Format(format!("cannot encode metadata: {e}")))?;
        let mut out = Vec::with_capacity(text.len() + payload.data.len() * 8 + 64);
        out.extend_from_slice(MAGIC.as_bytes());
        out.push(b'\n');
        out.extend_from_slice(text.as_bytes());
        if !text.ends_with('\n') {
            out.push(b'\n');
        }
        out.extend_from_slice(END_MARKER.as_bytes());
        out.push(b'\n');
        for v in &payload.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt_err = |m: String| BankError::Format(m);
        let header = format!("{MAGIC}\n");
        if !bytes.starts_with(header.as_bytes()) {
            return Err(fmt_err("missing BANK-MODEL header".into()));
        }
        let rest = &bytes[header.len()..];
        let marker = format!("{END_MARKER}\n");
        let split = rest
            .windows(marker.len())
            .position(|w| w == marker.as_bytes())
            .ok_or_else(|| fmt_err("missing end-of-metadata marker".into()))?;
        let text = std::str::from_utf8(&rest[..split]).map_err(|e| fmt_err(format!("metadata is not UTF-8: {e}")))?;
        let binary = &rest[split + marker.len()..];

        let table: toml::Table = text.parse().map_err(|e| fmt_err(format!("cannot parse metadata: {e}")))?;
        match table.get("format_version").and_then(|v| v.as_integer()) {
            Some(v) if v == i64::from(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(fmt_err(format!(
                    "model format version {v} is not supported (this build reads version {FORMAT_VERSION})"
                )))
            }
            None => return Err(fmt_err("metadata has no format_version".into())),
        }
        let meta: Metadata = table
            .try_into()
            .map_err(|e| fmt_err(format!("invalid metadata: {e}")))?;

        if !binary.len().is_multiple_of(8) {
            return Err(fmt_err("payload length is not a multiple of 8 bytes".into()));
        }
        let data: Vec<f64> = binary
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let mut reader = PayloadReader::new(&meta.arrays, &data)?;

        let mut members = Vec::with_capacity(meta.members.len());
        for (i, rec) in meta.members.iter().enumerate() {
            let banks = (0..rec.n_banks)
                .map(|b| FrequencyMatrix::new(reader.dense(&format!("member{i}.bank{b}"))?))
                .collect::<Result<Vec<_>>>()?;
            let weights = column(reader.dense(&format!("member{i}.weights"))?)?;
            let precision = CholeskyFactor::from_upper(reader.dense(&format!("member{i}.precision"))?.view())?;
            let head = match (meta.task, rec.shape, rec.rate) {
                (Task::Regression, Some(shape), Some(rate)) => Head::Regression {
                    mean: weights,
                    precision,
                    shape,
                    rate,
                },
                (Task::Regression, _, _) => return Err(fmt_err(format!("member {i} lacks shape/rate"))),
                (Task::Classification, _, _) => Head::Classification {
                    mode: weights,
                    precision,
                },
            };
            members.push(Member { banks, head });
        }
        let ensemble = Ensemble::new(meta.task, members)?;
        check_dim("stored input dimension", meta.input_dim, ensemble.input_dim())?;

        let mut states = Vec::with_capacity(meta.states.len());
        for (s, rec) in meta.states.iter().enumerate() {
            let w = FrequencyMatrix::new(reader.dense(&format!("state{s}.frequencies"))?)?;
            let assignments = column(reader.dense(&format!("state{s}.assignments"))?)?
                .iter()
                .map(|&z| z as usize)
                .collect();
            let components = (0..rec.n_components)
                .map(|k| {
                    let mean = column(reader.dense(&format!("state{s}.component{k}.mean"))?)?;
                    GaussianComponent::new(mean, reader.dense(&format!("state{s}.component{k}.cov"))?)
                })
                .collect::<Result<Vec<_>>>()?;
            states.push(SpectralState::new(w, assignments, components, rec.alpha)?);
        }
        reader.finish()?;

        Ok(Self {
            method: meta.method,
            seed: meta.seed,
            standardization: meta.standardization,
            feature_names: meta.feature_names,
            target_name: meta.target_name,
            config: meta.config,
            ensemble,
            states,
            families: meta
                .families
                .iter()
                .map(|f| KernelFamily::new(f.kind, f.scale))
                .collect::<Result<Vec<_>>>()?,
            lambda: meta.lambda,
        })
    }
}

fn column(a: Array2<f64>) -> Result<Array1<f64>> {
    if a.ncols() != 1 {
        return Err(BankError::Format(format!("expected a column vector, got {} columns", a.ncols())));
    }
    Ok(a.column(0).to_owned())
}

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    format_version: u32,
    method: Method,
    task: Task,
    seed: u64,
    input_dim: usize,
    target_name: String,
    feature_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    config: String,
    #[serde(default)]
    families: Vec<FamilyRecord>,
    standardization: Standardization,
    members: Vec<MemberRecord>,
    #[serde(default)]
    states: Vec<StateRecord>,
    arrays: Vec<ArrayRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FamilyRecord {
    kind: KernelKind,
    scale: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct MemberRecord {
    n_banks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shape: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StateRecord {
    alpha: f64,
    n_components: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Layout {
    Dense,
    Upper,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArrayRecord {
    name: String,
    rows: usize,
    cols: usize,
    layout: Layout,
}

impl ArrayRecord {
    fn len(&self) -> usize {
        match self.layout {
            Layout::Dense => self.rows * self.cols,
            Layout::Upper => self.rows * (self.rows + 1) / 2,
        }
    }
}

#[derive(Default)]
struct Payload {
    manifest: Vec<ArrayRecord>,
    data: Vec<f64>,
}

impl Payload {
    fn dense(&mut self, name: String, a: ArrayView2<'_, f64>) {
        self.manifest.push(ArrayRecord {
            name,
            rows: a.nrows(),
            cols: a.ncols(),
            layout: Layout::Dense,
        });
        self.data.extend(a.iter().copied());
    }

    fn upper(&mut self, name: String, r: &CholeskyFactor<f64>) {
        let n = r.dim();
        self.manifest.push(ArrayRecord {
            name,
            rows: n,
            cols: n,
            layout: Layout::Upper,
        });
        for i in 0..n {
            for j in i..n {
                self.data.push(r.get(i, j));
            }
        }
    }
}

struct PayloadReader<'a> {
    records: &'a [ArrayRecord],
    offsets: Vec<usize>,
    data: &'a [f64],
    used: usize,
}

impl<'a> PayloadReader<'a> {
    fn new(records: &'a [ArrayRecord], data: &'a [f64]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(records.len());
        let mut total = 0usize;
        for r in records {
            if r.layout == Layout::Upper && r.rows != r.cols {
                return Err(BankError::Format(format!("triangular array '{}' is not square", r.name)));
            }
            offsets.push(total);
            total += r.len();
        }
        if total != data.len() {
            return Err(BankError::Format(format!(
                "manifest describes {total} values but the payload holds {}",
                data.len()
            )));
        }
        Ok(Self {
            records,
            offsets,
            data,
            used: 0,
        })
    }

    fn dense(&mut self, name: &str) -> Result<Array2<f64>> {
        let idx = self
            .records
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| BankError::Format(format!("array '{name}' is missing")))?;
        let rec = &self.records[idx];
        let chunk = &self.data[self.offsets[idx]..self.offsets[idx] + rec.len()];
        self.used += 1;
        Ok(match rec.layout {
            Layout::Dense => Array2::from_shape_vec((rec.rows, rec.cols), chunk.to_vec()).expect("length checked"),
            Layout::Upper => {
                let n = rec.rows;
                let mut out = Array2::zeros((n, n));
                let mut it = chunk.iter();
                for i in 0..n {
                    for j in i..n {
                        out[[i, j]] = *it.next().expect("length checked");
                    }
                }
                out
            }
        })
    }

    fn finish(self) -> Result<()> {
        if self.used != self.records.len() {
            return Err(BankError::Format(format!(
                "{} arrays in the manifest were not used",
                self.records.len() - self.used
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, Dataset, SynthConfig};
    use crate::rff::GaussianMixtureSpec;
    use crate::sampler::{ensemble_from_trace, run_chain, SamplerConfig};

    fn trained(task: Task) -> (SavedModel, Dataset<f64>) {
        let data = match task {
            Task::Regression => {
                let spec = GaussianMixtureSpec::two_mode_benchmark();
                let cfg = SynthConfig {
                    n: 60,
                    n_frequencies: 20,
                    ..SynthConfig::default()
                };
                synth_generate::<f64>(&spec, &cfg, 1).unwrap().data
            }
            Task::Classification => crate::data::two_moons(80, 0.1, 2).unwrap(),
        };
        let standardization = Standardization::fit(&data, true).unwrap();
        let z = standardization.apply(&data).unwrap();
        let config = SamplerConfig {
            n_iters: 6,
            burn_in: 2,
            thin: 2,
            n_frequencies: 6,
            n_draws: 10,
            task,
            ..SamplerConfig::default()
        };
        let trace = run_chain(z.x.view(), z.y.view(), &config).unwrap();
        let ensemble = ensemble_from_trace(&trace, z.x.view(), z.y.view(), &config.head_prior(), false).unwrap();
        let model = SavedModel {
            method: Method::Bank,
            seed: 0,
            standardization,
            feature_names: data.feature_names.clone(),
            target_name: data.target_name.clone(),
            config: "n_iters = 6\n".into(),
            ensemble,
            states: trace.snapshots.iter().map(|s| s.state.clone()).collect(),
            families: vec![],
            lambda: None,
        };
        (model, data)
    }

    #[test]
    fn round_trip_regression() {
        let (model, data) = trained(Task::Regression);
        let bytes = model.to_bytes().unwrap();
        let back = SavedModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, model);
        let p = model.predict(data.x.view()).unwrap();
        let q = back.predict(data.x.view()).unwrap();
        assert!((&p.mean - &q.mean).iter().all(|v| v.abs() < 1e-10));
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn round_trip_classification_and_baseline_fields() {
        let (mut model, data) = trained(Task::Classification);
        model.method = Method::Rks;
        model.states.clear();
        model.families = vec![KernelFamily::new(KernelKind::Cauchy, 0.75).unwrap()];
        model.lambda = Some(0.01);
        let back = SavedModel::from_bytes(&model.to_bytes().unwrap()).unwrap();
        assert_eq!(back, model);
        let p = back.predict(data.x.view()).unwrap();
        assert!(p.mean.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn rejects_other_versions_and_corruption() {
        let (model, _) = trained(Task::Regression);
        let bytes = model.to_bytes().unwrap();
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let bumped = text.replacen("format_version = 1", "format_version = 2", 1);
        let err = SavedModel::from_bytes(bumped.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("version 2"), "{err}");
        assert!(SavedModel::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        assert!(SavedModel::from_bytes(b"not a model").is_err());
    }

    #[test]
    fn predicts_in_original_units() {
        let (model, data) = trained(Task::Regression);
        let p = model.predict(data.x.view()).unwrap();
        let mean_pred = p.mean.mean().unwrap();
        assert!((mean_pred - data.y.mean().unwrap()).abs() < 0.5 * model.standardization.y_scale);
        assert!(model.predict(ndarray::Array2::zeros((2, 3)).view()).is_err());
    }
}
