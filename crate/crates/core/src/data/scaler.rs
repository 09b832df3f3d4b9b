use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Per-dimension min/max fitted on training data.
///
/// `scaled = (x − min) / (max − min)`; a constant dimension (`min == max`)
/// scales to 0. Values outside the fitted range extrapolate linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    pub y_min: f64,
    pub y_max: f64,
}

#[inline]
fn scale(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

impl ScalerParams {
    /// Fits feature and active-target ranges over `dataset`.
    pub fn fit(dataset: &Dataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::InvalidInput("cannot fit a scaler on an empty dataset".into()));
        }
        let targets = dataset.targets()?;
        let m = dataset.schema.len();
        let mut x_min = vec![f64::INFINITY; m];
        let mut x_max = vec![f64::NEG_INFINITY; m];
        for s in &dataset.samples {
            for (j, &v) in s.features.iter().enumerate() {
                x_min[j] = x_min[j].min(v);
                x_max[j] = x_max[j].max(v);
            }
        }
        let y_min = targets.iter().copied().fold(f64::INFINITY, f64::min);
        let y_max = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    pub fn n_features(&self) -> usize {
        self.x_min.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_min.len() != self.x_max.len() {
            return Err(Error::InvalidInput("scaler min/max lengths differ".into()));
        }
        let all = self.x_min.iter().chain(&self.x_max).chain([&self.y_min, &self.y_max]);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scaler parameters".into()));
        }
        if self.x_min.iter().zip(&self.x_max).any(|(lo, hi)| lo > hi) || self.y_min > self.y_max {
            return Err(Error::InvalidInput("scaler has min > max".into()));
        }
        Ok(())
    }

    pub fn transform_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.x_min.len() {
            return Err(Error::LengthMismatch {
                op: "ScalerParams::transform_features",
                expected: self.x_min.len(),
                actual: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.x_min.iter().zip(&self.x_max))
            .map(|(&v, (&lo, &hi))| scale(v, lo, hi))
            .collect())
    }

    /// Inverse of [`Self::transform_features`]; constant dimensions map back
    /// to their single fitted value.
    pub fn inverse_features(&self, scaled: &[f64]) -> Result<Vec<f64>> {
        if scaled.len() != self.x_min.len() {
            return Err(Error::LengthMismatch {
                op: "ScalerParams::inverse_features",
                expected: self.x_min.len(),
                actual: scaled.len(),
            });
        }
        Ok(scaled
            .iter()
            .zip(self.x_min.iter().zip(&self.x_max))
            .map(|(&s, (&lo, &hi))| s * (hi - lo) + lo)
            .collect())
    }

    pub fn transform_target(&self, y: f64) -> f64 {
        scale(y, self.y_min, self.y_max)
    }

    pub fn inverse_target(&self, scaled: f64) -> f64 {
        scaled * (self.y_max - self.y_min) + self.y_min
    }

    /// Indices of features lying outside the fitted range.
    pub fn out_of_range(&self, x: &[f64]) -> Vec<usize> {
        x.iter()
            .enumerate()
            .filter(|&(j, &v)| v < self.x_min[j] || v > self.x_max[j])
            .map(|(j, _)| j)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureDescriptor, FeatureKind, FeatureSchema, Target, WasteSample};

    fn one_feature(values: &[f64], targets: &[f64]) -> Dataset {
        let schema = FeatureSchema::new(vec![FeatureDescriptor::new("d", "kN/m3", FeatureKind::Physical)]).unwrap();
        let samples = values
            .iter()
            .zip(targets)
            .map(|(&v, &t)| WasteSample {
                features: vec![v],
                friction_angle_deg: Some(t),
                cohesion_kpa: None,
            })
            .collect();
        Dataset::new(schema, samples, Target::Friction).unwrap()
    }

    #[test]
    fn direct_scan() {
        let p = ScalerParams::fit(&one_feature(&[2.0, 4.0, 6.0], &[20.0, 35.0, 50.0])).unwrap();
        assert_eq!((p.x_min[0], p.x_max[0]), (2.0, 6.0));
        assert_eq!((p.y_min, p.y_max), (20.0, 50.0));
        assert_eq!(p.transform_features(&[4.0]).unwrap(), vec![0.5]);
        assert_eq!(p.transform_features(&[2.0]).unwrap(), vec![0.0]);
        assert_eq!(p.transform_features(&[6.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn single_sample_is_degenerate() {
        let p = ScalerParams::fit(&one_feature(&[3.0], &[30.0])).unwrap();
        assert_eq!(p.x_min, p.x_max);
        assert_eq!(p.transform_features(&[3.0]).unwrap(), vec![0.0]);
        assert_eq!(p.transform_target(30.0), 0.0);
    }

    #[test]
    fn target_inverse() {
        let p = ScalerParams {
            x_min: vec![],
            x_max: vec![],
            y_min: 20.0,
            y_max: 50.0,
        };
        assert_eq!(p.inverse_target(0.0), 20.0);
        assert_eq!(p.inverse_target(1.0), 50.0);
        assert!((p.inverse_target(0.596) - 37.88).abs() < 1e-12);
    }

    #[test]
    fn extrapolates_and_flags() {
        let p = ScalerParams::fit(&one_feature(&[2.0, 6.0], &[20.0, 50.0])).unwrap();
        assert_eq!(p.transform_features(&[10.0]).unwrap(), vec![2.0]);
        assert_eq!(p.out_of_range(&[10.0]), vec![0]);
        assert!(p.out_of_range(&[5.0]).is_empty());
    }

    #[test]
    fn rejects_empty_and_wrong_length() {
        let ds = one_feature(&[], &[]);
        assert!(ScalerParams::fit(&ds).is_err());
        let p = ScalerParams::fit(&one_feature(&[1.0], &[30.0])).unwrap();
        assert!(p.transform_features(&[1.0, 2.0]).is_err());
    }
}
