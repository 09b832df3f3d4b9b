use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::data::{kfold_indices, split_indices, Dataset, Target};
use crate::error::{Error, Result};
use crate::mlp::{MlpConfig, DEFAULT_DROPOUT, PROPOSED_HIDDEN};
use crate::numeric::{derive_seed, Rng};
use crate::train::{regression_metrics, train, TrainConfig};

/// Stream of the run seed that draws the holdout split or folds.
const SPLIT_STREAM: u64 = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationVariant {
    pub name: String,
    pub hidden_sizes: Vec<usize>,
}

impl AblationVariant {
    pub fn new(hidden_sizes: &[usize]) -> Self {
        let dims: Vec<String> = hidden_sizes.iter().map(usize::to_string).collect();
        Self {
            name: format!("MLP [{}]", dims.join(", ")),
            hidden_sizes: hidden_sizes.to_vec(),
        }
    }

    /// Narrow, deep-and-wide, and proposed architectures.
    pub fn standard() -> Vec<Self> {
        vec![
            Self::new(&[20, 200, 200, 8]),
            Self::new(&[64, 5000, 1000, 200, 8]),
            Self::new(&PROPOSED_HIDDEN),
        ]
    }
}

/// How held-out MAPE is measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Protocol {
    /// One seeded split shared by every variant and target.
    Holdout { test_fraction: f64 },
    /// MAPE over the pooled out-of-fold predictions.
    KFold { k: usize },
}

/// Predictions produced outside this crate, keyed by 0-based dataset row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalPredictions {
    pub name: String,
    pub target: Target,
    pub predictions: Vec<(usize, f64)>,
}

/// Reads a `sample_id,prediction` CSV.
pub fn parse_prediction_csv<R: Read>(source: R) -> Result<Vec<(usize, f64)>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_ascii_lowercase).collect();
    if headers != ["sample_id", "prediction"] {
        return Err(Error::InvalidInput(format!(
            "prediction file header must be `sample_id,prediction`, got `{}`",
            headers.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let cell = |c: usize, column: &str| -> Result<&str> {
            record.get(c).ok_or_else(|| Error::ParseCell {
                row,
                column: column.into(),
                value: String::new(),
            })
        };
        let id = cell(0, "sample_id")?;
        let id: usize = id.parse().map_err(|_| Error::ParseCell {
            row,
            column: "sample_id".into(),
            value: id.into(),
        })?;
        let pred = cell(1, "prediction")?;
        let pred = pred
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::ParseCell {
                row,
                column: "prediction".into(),
                value: pred.into(),
            })?;
        out.push((id, pred));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPlan {
    pub variants: Vec<AblationVariant>,
    pub dropout_p: f64,
    pub protocol: Protocol,
    pub targets: Vec<Target>,
    pub external: Vec<ExternalPredictions>,
}

impl Default for AblationPlan {
    fn default() -> Self {
        Self {
            variants: AblationVariant::standard(),
            dropout_p: DEFAULT_DROPOUT,
            protocol: Protocol::Holdout { test_fraction: 0.1 },
            targets: Target::ALL.to_vec(),
            external: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    /// `None` for external rows.
    pub hidden_sizes: Option<Vec<usize>>,
    /// Percent, per target; absent when not run or undefined.
    pub mape: BTreeMap<Target, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub protocol: Protocol,
    pub seed: u64,
    pub targets: Vec<Target>,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn mape(&self, row: &str, target: Target) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.name == row)
            .and_then(|r| r.mape.get(&target).copied().flatten())
    }

    /// Fixed-width text rendering, one line per row.
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
        let mut out = format!("{:<width$}", "model");
        for t in &self.targets {
            let _ = write!(out, "  {:>16}", format!("{} MAPE %", t.as_str()));
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{:<width$}", r.name);
            for t in &self.targets {
                match r.mape.get(t).copied().flatten() {
                    Some(v) => {
                        let _ = write!(out, "  {v:>16.2}");
                    }
                    None => {
                        let _ = write!(out, "  {:>16}", "n/a");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

fn mape(targets: &[f64], preds: &[f64]) -> Result<Option<f64>> {
    Ok(regression_metrics(targets, preds)?.mape)
}

/// Held-out MAPE of one architecture on one target.
fn variant_mape(
    dataset: &Dataset,
    mlp: &MlpConfig,
    config: &TrainConfig,
    protocol: Protocol,
    run_seed: u64,
) -> Result<Option<f64>> {
    let mut split_rng = Rng::new(run_seed).fork(SPLIT_STREAM);
    let parts: Vec<(Vec<usize>, Vec<usize>)> = match protocol {
        Protocol::Holdout { test_fraction } => {
            let s = split_indices(dataset.len(), test_fraction, &mut split_rng)?;
            vec![(s.train, s.test)]
        }
        Protocol::KFold { k } => kfold_indices(dataset.len(), k, &mut split_rng)?
            .into_iter()
            .map(|f| (f.train, f.validation))
            .collect(),
    };
    let mut truth = Vec::new();
    let mut preds = Vec::new();
    for (i, (train_idx, test_idx)) in parts.iter().enumerate() {
        let train_set = dataset.subset(train_idx);
        let test_set = dataset.subset(test_idx);
        let seed = derive_seed(run_seed, i as u64);
        let (bundle, _) = train(&train_set, &test_set, mlp, &TrainConfig { seed, ..config.clone() })?;
        truth.extend(test_set.targets()?);
        preds.extend(bundle.predict_dataset(&test_set)?);
    }
    mape(&truth, &preds)
}

/// Trains every variant on every selected target under one shared protocol
/// and adds rows for external prediction files.
pub fn run_ablation(dataset: &Dataset, plan: &AblationPlan, config: &TrainConfig) -> Result<AblationTable> {
    config.validate()?;
    if plan.targets.is_empty() {
        return Err(Error::InvalidInput("ablation needs at least one target".into()));
    }
    let mut rows = Vec::new();
    for variant in &plan.variants {
        let mlp = MlpConfig {
            input_size: dataset.schema.len(),
            hidden_sizes: variant.hidden_sizes.clone(),
            dropout_p: plan.dropout_p,
        };
        mlp.validate()?;
        let mut row = AblationRow {
            name: variant.name.clone(),
            hidden_sizes: Some(variant.hidden_sizes.clone()),
            mape: BTreeMap::new(),
        };
        for &target in &plan.targets {
            let data = dataset.clone().with_target(target);
            row.mape.insert(target, variant_mape(&data, &mlp, config, plan.protocol, config.seed)?);
        }
        rows.push(row);
    }

    for ext in &plan.external {
        let truth_all = dataset.clone().with_target(ext.target);
        let mut truth = Vec::with_capacity(ext.predictions.len());
        let mut preds = Vec::with_capacity(ext.predictions.len());
        for (row_no, &(id, pred)) in ext.predictions.iter().enumerate() {
            let sample = truth_all.samples.get(id).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "{}: row {} refers to sample_id {id}, but the dataset has {} samples",
                    ext.name,
                    row_no + 1,
                    dataset.len()
                ))
            })?;
            let y = sample.target(ext.target).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "{}: row {} refers to sample_id {id}, which has no {} value",
                    ext.name,
                    row_no + 1,
                    ext.target.column()
                ))
            })?;
            truth.push(y);
            preds.push(pred);
        }
        if truth.is_empty() {
            return Err(Error::InvalidInput(format!("{}: prediction file has no rows", ext.name)));
        }
        let value = mape(&truth, &preds)?;
        match rows.iter_mut().find(|r| r.name == ext.name && r.hidden_sizes.is_none()) {
            Some(r) => {
                r.mape.insert(ext.target, value);
            }
            None => rows.push(AblationRow {
                name: ext.name.clone(),
                hidden_sizes: None,
                mape: BTreeMap::from([(ext.target, value)]),
            }),
        }
    }

    Ok(AblationTable {
        protocol: plan.protocol,
        seed: config.seed,
        targets: plan.targets.clone(),
        rows,
    })
}
