//! Training loop, metrics, cross-validation, grid search and the
//! architecture ablation harness.

mod ablation;
mod cv;
mod grid;
mod metrics;
mod optim;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ScalerParams};
use crate::error::{Error, Result};
use crate::explain::BackgroundSet;
use crate::mlp::{Mlp, MlpConfig, Mode};
use crate::model::{ModelBundle, ModelMetadata};
use crate::numeric::{Matrix, Rng};

pub use ablation::{
    parse_prediction_csv, run_ablation, AblationPlan, AblationRow, AblationTable, AblationVariant,
    ExternalPredictions, Protocol,
};
pub use cv::{cross_validate, CvReport, FoldReport};
pub use grid::{enumerate_grid, grid_search, GridAxis, GridResult, HyperGrid, Setting};
pub use metrics::{evaluate, mse_loss, regression_metrics, Metrics, Summary};
pub use optim::{adamw_step, clip_gradients, lr_at_epoch, AdamState};

/// Default number of training rows embedded as the explanation background.
pub const DEFAULT_BACKGROUND_SIZE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BatchMode {
    FullBatch,
    MiniBatch { size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    pub step_size: usize,
    pub gamma: f64,
    pub clip_norm: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    pub batch_mode: BatchMode,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Training rows kept in the model file for explanations.
    pub background_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 0.005,
            step_size: 300,
            gamma: 0.8,
            clip_norm: 1.0,
            epochs: 1500,
            weight_decay: 0.01,
            batch_mode: BatchMode::FullBatch,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            background_size: DEFAULT_BACKGROUND_SIZE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return bad(format!("lr0 must be > 0, got {}", self.lr0));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.clip_norm.is_finite() && self.clip_norm > 0.0) {
            return bad(format!("clip_norm must be > 0, got {}", self.clip_norm));
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.step_size == 0 {
            return bad("step_size must be >= 1".into());
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if let BatchMode::MiniBatch { size: 0 } = self.batch_mode {
            return bad("minibatch size must be >= 1".into());
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return bad(format!("adam_eps must be > 0, got {}", self.adam_eps));
        }
        if self.background_size == 0 {
            return bad("background_size must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub epoch: usize,
    pub train_mse_scaled: f64,
    pub test_mse_scaled: f64,
}

/// Per-epoch losses on the scaled target. Train loss is the mean batch loss
/// seen by the optimizer (dropout active); test loss is an eval-mode pass.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub points: Vec<LossPoint>,
}

impl LossCurve {
    pub fn last(&self) -> Option<&LossPoint> {
        self.points.last()
    }

    pub fn write_csv<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "epoch,train_mse_scaled,test_mse_scaled")?;
        for p in &self.points {
            writeln!(sink, "{},{:e},{:e}", p.epoch, p.train_mse_scaled, p.test_mse_scaled)?;
        }
        Ok(())
    }
}

/// Scaled design matrix and targets under `scaler`.
pub(crate) fn scaled_xy(dataset: &Dataset, scaler: &ScalerParams) -> Result<(Matrix, Vec<f64>)> {
    let y = dataset.targets()?.into_iter().map(|v| scaler.transform_target(v)).collect();
    Ok((scaled_features(dataset, scaler)?, y))
}

pub(crate) fn scaled_features(dataset: &Dataset, scaler: &ScalerParams) -> Result<Matrix> {
    let cols = dataset.schema.len();
    let mut data = Vec::with_capacity(dataset.len() * cols);
    for s in &dataset.samples {
        data.extend(scaler.transform_features(&s.features)?);
    }
    Matrix::new(dataset.len(), cols, data)
}

fn gather_rows(x: &Matrix, y: &[f64], idx: &[usize]) -> (Matrix, Vec<f64>) {
    let mut data = Vec::with_capacity(idx.len() * x.cols());
    for &i in idx {
        data.extend_from_slice(x.row(i));
    }
    (Matrix::from_raw(idx.len(), x.cols(), data), idx.iter().map(|&i| y[i]).collect())
}

/// Fits the scaler on `train_set`, trains from a fresh Xavier
/// initialization for the configured number of epochs, and returns the final
/// parameters bundled with scaler, schema and a background sample.
pub fn train(
    train_set: &Dataset,
    test_set: &Dataset,
    mlp_config: &MlpConfig,
    config: &TrainConfig,
) -> Result<(ModelBundle, LossCurve)> {
    config.validate()?;
    mlp_config.validate()?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::InvalidInput("training and test sets must be nonempty".into()));
    }
    if train_set.schema != test_set.schema {
        return Err(Error::Schema("train and test sets use different schemas".into()));
    }
    if train_set.target != test_set.target {
        return Err(Error::InvalidInput("train and test sets select different targets".into()));
    }
    if mlp_config.input_size != train_set.schema.len() {
        return Err(Error::InvalidConfig(format!(
            "network input size {} does not match the {} schema features",
            mlp_config.input_size,
            train_set.schema.len()
        )));
    }

    let scaler = ScalerParams::fit(train_set)?;
    let (x_train, y_train) = scaled_xy(train_set, &scaler)?;
    let (x_test, y_test) = scaled_xy(test_set, &scaler)?;

    let root = Rng::new(config.seed);
    let mut init_rng = root.fork(1);
    let mut dropout_rng = root.fork(2);
    let mut shuffle_rng = root.fork(3);
    let mut background_rng = root.fork(4);

    let mut mlp = Mlp::init(mlp_config.clone(), &mut init_rng)?;
    let mut adam = AdamState::new(&mlp.params);
    let mut curve = LossCurve {
        points: Vec::with_capacity(config.epochs),
    };
    let n = x_train.rows();

    for epoch in 0..config.epochs {
        let lr = lr_at_epoch(config, epoch);
        let mut weighted_loss = 0.0;
        let mut step = |x: &Matrix, y: &[f64], mlp: &mut Mlp| -> Result<f64> {
            let (_, trace) = mlp.forward_batch(x, Mode::Train(&mut dropout_rng))?;
            let trace = trace.expect("training pass records a trace");
            let (mut grads, loss) = mlp.backward(&trace, y)?;
            clip_gradients(&mut grads, config.clip_norm);
            adamw_step(&mut mlp.params, &grads, &mut adam, lr, config)?;
            Ok(loss)
        };
        match config.batch_mode {
            BatchMode::MiniBatch { size } if size < n => {
                let order = shuffle_rng.permutation(n);
                for chunk in order.chunks(size) {
                    let (xb, yb) = gather_rows(&x_train, &y_train, chunk);
                    weighted_loss += step(&xb, &yb, &mut mlp)? * chunk.len() as f64;
                }
            }
            _ => weighted_loss += step(&x_train, &y_train, &mut mlp)? * n as f64,
        }
        let train_mse = weighted_loss / n as f64;
        let test_mse = mse_loss(&mlp.predict(&x_test)?, &y_test)?;
        if !train_mse.is_finite() || !test_mse.is_finite() || mlp.params.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        curve.points.push(LossPoint {
            epoch,
            train_mse_scaled: train_mse,
            test_mse_scaled: test_mse,
        });
    }

    let background = BackgroundSet::sample(&x_train, config.background_size, &mut background_rng)?;
    let metadata = ModelMetadata {
        producer: ModelMetadata::producer(),
        train_config: Some(config.clone()),
        train_samples: train_set.len(),
        test_samples: test_set.len(),
        final_train_mse_scaled: curve.last().map(|p| p.train_mse_scaled),
        final_test_mse_scaled: curve.last().map(|p| p.test_mse_scaled),
    };
    let bundle = ModelBundle::new(
        train_set.target,
        train_set.schema.clone(),
        scaler,
        mlp,
        background,
        metadata,
    )?;
    Ok((bundle, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureDescriptor, FeatureKind, FeatureSchema, Target, WasteSample};

    fn tiny_schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            FeatureDescriptor::new("a", "fraction", FeatureKind::CompositionFraction),
            FeatureDescriptor::new("b", "fraction", FeatureKind::CompositionFraction),
        ])
        .unwrap()
    }

    fn dataset(rows: &[([f64; 2], f64)]) -> Dataset {
        let samples = rows
            .iter()
            .map(|(x, y)| WasteSample {
                features: x.to_vec(),
                friction_angle_deg: Some(*y),
                cohesion_kpa: None,
            })
            .collect();
        Dataset::new(tiny_schema(), samples, Target::Friction).unwrap()
    }

    fn small_net() -> MlpConfig {
        MlpConfig {
            input_size: 2,
            hidden_sizes: vec![8, 4],
            dropout_p: 0.0,
        }
    }

    #[test]
    fn default_config_is_valid() {
        TrainConfig::default().validate().unwrap();
        let bad = TrainConfig {
            gamma: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_target_is_learned() {
        let rows: Vec<_> = (0..12).map(|i| ([i as f64 / 12.0, 0.5], 30.0)).collect();
        let data = dataset(&rows);
        let cfg = TrainConfig {
            epochs: 200,
            ..TrainConfig::default()
        };
        let (_, curve) = train(&data, &data.subset(&[0, 1]), &small_net(), &cfg).unwrap();
        assert_eq!(curve.points.len(), 200);
        assert!(curve.last().unwrap().train_mse_scaled < 1e-4);
    }

    #[test]
    fn identical_seeds_identical_curves() {
        let rows: Vec<_> = (0..20)
            .map(|i| {
                let a = (i % 5) as f64 / 5.0;
                let b = (i % 7) as f64 / 7.0;
                ([a, b], 25.0 + 10.0 * a - 4.0 * b)
            })
            .collect();
        let data = dataset(&rows);
        let cfg = TrainConfig {
            epochs: 30,
            batch_mode: BatchMode::MiniBatch { size: 6 },
            ..TrainConfig::default()
        };
        let mut net = small_net();
        net.dropout_p = 0.2;
        let test = data.subset(&[0, 3]);
        let (m1, c1) = train(&data, &test, &net, &cfg).unwrap();
        let (m2, c2) = train(&data, &test, &net, &cfg).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(m1.mlp, m2.mlp);
        let (_, c3) = train(&data, &test, &net, &TrainConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(c1, c3);
    }

    #[test]
    fn divergence_reports_epoch() {
        let rows: Vec<_> = (0..6).map(|i| ([i as f64 / 6.0, 1.0], 20.0 + i as f64)).collect();
        let data = dataset(&rows);
        let cfg = TrainConfig {
            lr0: 1e300,
            epochs: 5,
            ..TrainConfig::default()
        };
        match train(&data, &data, &small_net(), &cfg) {
            Err(Error::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn input_size_must_match_schema() {
        let data = dataset(&[([0.1, 0.2], 30.0), ([0.3, 0.4], 31.0)]);
        let mut net = small_net();
        net.input_size = 3;
        assert!(train(&data, &data, &net, &TrainConfig::default()).is_err());
    }

    #[test]
    fn loss_curve_csv() {
        let c = LossCurve {
            points: vec![LossPoint {
                epoch: 0,
                train_mse_scaled: 0.5,
                test_mse_scaled: 0.25,
            }],
        };
        let mut out = Vec::new();
        c.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "epoch,train_mse_scaled,test_mse_scaled\n0,5e-1,2.5e-1\n");
    }
}
