use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{kfold_indices, Dataset};
use crate::error::Result;
use crate::mlp::MlpConfig;
use crate::numeric::{derive_seed, Rng};
use crate::train::{evaluate, train, Metrics, Summary, TrainConfig};

/// Stream of the run seed that shuffles samples into folds.
const FOLD_STREAM: u64 = 100;
/// Base stream for per-fold training seeds.
const FOLD_SEED_STREAM: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub seed: u64,
    pub train_size: usize,
    pub validation_size: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub folds: Vec<FoldReport>,
    pub mae: Summary,
    /// `None` when some fold's MAPE is undefined.
    pub mape: Option<Summary>,
    /// `None` when some fold's R² is undefined.
    pub r2: Option<Summary>,
}

impl CvReport {
    fn from_folds(k: usize, folds: Vec<FoldReport>) -> Self {
        let collect = |f: fn(&Metrics) -> Option<f64>| -> Option<Summary> {
            let v: Option<Vec<f64>> = folds.iter().map(|r| f(&r.metrics)).collect();
            v.and_then(|v| Summary::of(&v))
        };
        Self {
            k,
            mae: collect(|m| Some(m.mae)).expect("at least two folds"),
            mape: collect(|m| m.mape),
            r2: collect(|m| m.r2),
            folds,
        }
    }
}

/// k-fold cross-validation. Each fold fits its own scaler on its training
/// part and trains with a seed derived from `config.seed` and the fold index,
/// so folds may run concurrently without affecting the result.
pub fn cross_validate(dataset: &Dataset, mlp_config: &MlpConfig, config: &TrainConfig, k: usize) -> Result<CvReport> {
    config.validate()?;
    let folds = kfold_indices(dataset.len(), k, &mut Rng::new(config.seed).fork(FOLD_STREAM))?;
    let reports = folds
        .into_par_iter()
        .enumerate()
        .map(|(i, fold)| {
            let train_set = dataset.subset(&fold.train);
            let validation = dataset.subset(&fold.validation);
            let seed = derive_seed(config.seed, FOLD_SEED_STREAM + i as u64);
            let fold_config = TrainConfig { seed, ..config.clone() };
            let (bundle, _) = train(&train_set, &validation, mlp_config, &fold_config)?;
            Ok(FoldReport {
                fold: i,
                seed,
                train_size: train_set.len(),
                validation_size: validation.len(),
                metrics: evaluate(&bundle, &validation)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvReport::from_folds(k, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureDescriptor, FeatureKind, FeatureSchema, Target, WasteSample};

    fn data(n: usize) -> Dataset {
        let schema = FeatureSchema::new(vec![FeatureDescriptor::new("a", "fraction", FeatureKind::Physical)]).unwrap();
        let samples = (0..n)
            .map(|i| {
                let a = i as f64 / n as f64;
                WasteSample {
                    features: vec![a],
                    friction_angle_deg: Some(20.0 + 10.0 * a),
                    cohesion_kpa: None,
                }
            })
            .collect();
        Dataset::new(schema, samples, Target::Friction).unwrap()
    }

    fn net() -> MlpConfig {
        MlpConfig {
            input_size: 1,
            hidden_sizes: vec![4],
            dropout_p: 0.0,
        }
    }

    #[test]
    fn leave_one_out_runs_every_fold() {
        let cfg = TrainConfig {
            epochs: 5,
            ..TrainConfig::default()
        };
        let r = cross_validate(&data(4), &net(), &cfg, 4).unwrap();
        assert_eq!(r.folds.len(), 4);
        assert!(r.folds.iter().all(|f| f.validation_size == 1 && f.train_size == 3));
        // a single validation target has no variance
        assert!(r.r2.is_none());
        let mean = r.folds.iter().map(|f| f.metrics.mae).sum::<f64>() / 4.0;
        assert!((mean - r.mae.mean).abs() < 1e-12);
    }

    #[test]
    fn reproducible() {
        let cfg = TrainConfig {
            epochs: 10,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = cross_validate(&data(12), &net(), &cfg, 3).unwrap();
        let b = cross_validate(&data(12), &net(), &cfg, 3).unwrap();
        assert_eq!(a, b);
    }
}
