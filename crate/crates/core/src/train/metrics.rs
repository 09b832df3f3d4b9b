use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::ModelBundle;

/// Mean squared error `(1/n)Σ(yᵢ − ŷᵢ)²`.
pub fn mse_loss(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch {
            op: "mse_loss",
            expected: targets.len(),
            actual: preds.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::InvalidInput("mse_loss of an empty batch".into()));
    }
    Ok(preds.iter().zip(targets).map(|(p, y)| (y - p) * (y - p)).sum::<f64>() / preds.len() as f64)
}

/// Regression quality in the target's native units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub mae: f64,
    /// Percent. `None` when some target is exactly zero.
    pub mape: Option<f64>,
    /// `None` when all targets are equal (zero total variance).
    pub r2: Option<f64>,
}

pub fn regression_metrics(targets: &[f64], preds: &[f64]) -> Result<Metrics> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch {
            op: "regression_metrics",
            expected: targets.len(),
            actual: preds.len(),
        });
    }
    let n = targets.len();
    if n == 0 {
        return Err(Error::InvalidInput("metrics need at least one sample".into()));
    }
    let nf = n as f64;
    let mae = targets.iter().zip(preds).map(|(y, p)| (y - p).abs()).sum::<f64>() / nf;
    let mape = if targets.contains(&0.0) {
        None
    } else {
        Some(100.0 / nf * targets.iter().zip(preds).map(|(y, p)| ((y - p) / y).abs()).sum::<f64>())
    };
    let mean = targets.iter().sum::<f64>() / nf;
    let ss_tot: f64 = targets.iter().map(|y| (y - mean) * (y - mean)).sum();
    let ss_res: f64 = targets.iter().zip(preds).map(|(y, p)| (y - p) * (y - p)).sum();
    let r2 = (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot);
    Ok(Metrics { n, mae, mape, r2 })
}

/// Predicts every sample with `bundle` and scores against the dataset's
/// values for the bundle's target.
pub fn evaluate(bundle: &ModelBundle, dataset: &Dataset) -> Result<Metrics> {
    let targets = dataset.clone().with_target(bundle.target).targets()?;
    let preds = bundle.predict_dataset(dataset)?;
    regression_metrics(&targets, &preds)
}

/// Mean and sample (n − 1) standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Summary { mean, std })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_cases() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[2.0], &[0.0]).unwrap(), 4.0);
        assert_eq!(mse_loss(&[2.0, 4.0], &[1.0, 2.0]).unwrap(), 2.5);
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mse_loss(&[], &[]).is_err());
    }

    #[test]
    fn hand_metrics() {
        let m = regression_metrics(&[2.0, 4.0], &[1.0, 5.0]).unwrap();
        assert_eq!(m.mae, 1.0);
        assert!((m.mape.unwrap() - 37.5).abs() < 1e-12);
        assert_eq!(m.r2, Some(0.0));
    }

    #[test]
    fn perfect_and_mean_predictions() {
        let y = [20.0, 30.0, 45.0];
        let m = regression_metrics(&y, &y).unwrap();
        assert_eq!((m.mae, m.mape, m.r2), (0.0, Some(0.0), Some(1.0)));
        let mean = y.iter().sum::<f64>() / 3.0;
        let m = regression_metrics(&y, &[mean; 3]).unwrap();
        assert!(m.r2.unwrap().abs() < 1e-15);
    }

    #[test]
    fn zero_target_leaves_mape_undefined() {
        let m = regression_metrics(&[0.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(m.mape, None);
        assert_eq!(m.mae, 0.5);
        assert!(m.r2.is_some());
    }

    #[test]
    fn metrics_ignore_sample_order() {
        let y = [3.0, 7.0, 11.0, 5.0];
        let p = [2.5, 8.0, 10.0, 5.5];
        let a = regression_metrics(&y, &p).unwrap();
        let b = regression_metrics(&[5.0, 11.0, 3.0, 7.0], &[5.5, 10.0, 2.5, 8.0]).unwrap();
        assert!((a.mae - b.mae).abs() < 1e-15);
        assert!((a.mape.unwrap() - b.mape.unwrap()).abs() < 1e-12);
        assert!((a.r2.unwrap() - b.r2.unwrap()).abs() < 1e-15);
    }

    #[test]
    fn sample_std() {
        let s = Summary::of(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
    }
}
