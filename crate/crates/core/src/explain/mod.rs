//! Shapley-value attribution over a background set with marginal masking:
//! exact enumeration, Kernel SHAP, waterfall decomposition and global
//! summaries.
//!
//! Everything here works in the model's input space; [`crate::model`]
//! wraps it with native-unit conversion.

mod exact;
mod kernel;
mod summary;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Shape};
use crate::numeric::{Matrix, Rng};

pub use exact::{coalition_weight, exact_shapley, DEFAULT_EXACT_LIMIT};
pub use kernel::{kernel_shap, shapley_kernel_weight, KernelSamples, DEFAULT_KERNEL_SAMPLES};
pub use summary::{global_summary, GlobalSummary};

/// Rows of hybrid inputs pushed through the model per batch.
const ROWS_PER_BATCH: usize = 8192;

/// A model seen by the explainer: rows of model-space inputs in, one
/// native-unit output per row out.
pub trait Predictor: Sync {
    fn input_size(&self) -> usize;
    fn predict_rows(&self, rows: &Matrix) -> Result<Vec<f64>>;
}

/// Reference rows used to stand in for absent features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSet {
    pub rows: Matrix,
    /// Seed of the draw that selected the rows.
    pub seed: u64,
    /// Number of rows the sample was drawn from.
    pub source_size: usize,
}

impl BackgroundSet {
    pub fn new(rows: Matrix, seed: u64, source_size: usize) -> Result<Self> {
        if rows.rows() == 0 || rows.cols() == 0 {
            return Err(Error::InvalidInput("background set is empty".into()));
        }
        if !rows.is_finite() {
            return Err(Error::NonFinite("background rows".into()));
        }
        Ok(Self { rows, seed, source_size })
    }

    /// Uses every row of `rows`.
    pub fn from_rows(rows: Matrix) -> Result<Self> {
        let n = rows.rows();
        Self::new(rows, 0, n)
    }

    /// `min(size, n)` distinct rows chosen by a seeded shuffle.
    pub fn sample(source: &Matrix, size: usize, rng: &mut Rng) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidInput("background size must be >= 1".into()));
        }
        let seed = rng.seed();
        let order = rng.permutation(source.rows());
        let mut data = Vec::new();
        let take = size.min(source.rows());
        for &i in &order[..take] {
            data.extend_from_slice(source.row(i));
        }
        Self::new(Matrix::new(take, source.cols(), data)?, seed, source.rows())
    }

    pub fn len(&self) -> usize {
        self.rows.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.rows() == 0
    }

    pub fn width(&self) -> usize {
        self.rows.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    Exact,
    /// Kernel SHAP over every coalition.
    KernelFull,
    /// Kernel SHAP over `n_samples` sampled coalitions.
    KernelSampled { n_samples: usize, seed: u64 },
}

/// How to explain, as requested by a caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExplainMethod {
    Exact { limit: usize },
    Kernel { samples: KernelSamples, seed: u64 },
}

impl Default for ExplainMethod {
    fn default() -> Self {
        ExplainMethod::Exact {
            limit: DEFAULT_EXACT_LIMIT,
        }
    }
}

/// Attribution of one prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    /// `v(∅)`: mean model output over the background.
    pub base_value: f64,
    pub phi: Vec<f64>,
    /// `f(x)`.
    pub prediction: f64,
    pub feature_values: Vec<f64>,
    pub method: Method,
}

impl Explanation {
    /// `|base + Σφ − prediction|`.
    pub fn local_accuracy_error(&self) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - self.prediction).abs()
    }

    /// Checks `|base + Σφ − f(x)| ≤ tol·max(1, |f(x)|)`.
    pub fn check_local_accuracy(&self, tol: f64) -> Result<()> {
        let err = self.local_accuracy_error();
        if err <= tol * self.prediction.abs().max(1.0) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "attributions do not reconstruct the prediction (off by {err:e})"
            )))
        }
    }
}

pub fn explain<P: Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    background: &BackgroundSet,
    method: &ExplainMethod,
) -> Result<Explanation> {
    match *method {
        ExplainMethod::Exact { limit } => exact_shapley(model, x, background, limit),
        ExplainMethod::Kernel { samples, seed } => kernel_shap(model, x, background, samples, seed),
    }
}

/// One bar of a waterfall: the running total after adding `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaterfallStep {
    /// Feature index; `None` for the opening base-value step.
    pub feature: Option<usize>,
    pub phi: f64,
    pub cumulative: f64,
}

/// Base step followed by every nonzero attribution, largest magnitude first
/// (ties in feature order).
pub fn waterfall(explanation: &Explanation) -> Vec<WaterfallStep> {
    let mut order: Vec<usize> = (0..explanation.phi.len()).filter(|&i| explanation.phi[i] != 0.0).collect();
    order.sort_by(|&a, &b| explanation.phi[b].abs().total_cmp(&explanation.phi[a].abs()).then(a.cmp(&b)));
    let mut total = explanation.base_value;
    let mut steps = vec![WaterfallStep {
        feature: None,
        phi: 0.0,
        cumulative: total,
    }];
    for i in order {
        total += explanation.phi[i];
        steps.push(WaterfallStep {
            feature: Some(i),
            phi: explanation.phi[i],
            cumulative: total,
        });
    }
    steps
}

/// Marginal-masking value function of a single instance.
pub(crate) struct Game<'a, P: Predictor + ?Sized> {
    model: &'a P,
    x: &'a [f64],
    background: &'a BackgroundSet,
    full: u64,
}

impl<'a, P: Predictor + ?Sized> Game<'a, P> {
    pub(crate) fn new(model: &'a P, x: &'a [f64], background: &'a BackgroundSet) -> Result<Self> {
        let m = model.input_size();
        if x.len() != m {
            return Err(Error::LengthMismatch {
                op: "explained instance",
                expected: m,
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("explained instance".into()));
        }
        if background.is_empty() {
            return Err(Error::InvalidInput("background set is empty".into()));
        }
        if background.width() != m {
            return Err(Error::DimensionMismatch {
                op: "background",
                left: background.rows.shape(),
                right: Shape(background.len(), m),
            });
        }
        if m > 63 {
            return Err(Error::InvalidInput(format!("at most 63 features can be explained, got {m}")));
        }
        Ok(Self {
            model,
            x,
            background,
            full: (1u64 << m) - 1,
        })
    }

    pub(crate) fn features(&self) -> usize {
        self.x.len()
    }

    /// `f(x)`, evaluated on its own so it is reproduced exactly.
    pub(crate) fn prediction(&self) -> Result<f64> {
        let row = Matrix::new(1, self.x.len(), self.x.to_vec())?;
        Ok(self.model.predict_rows(&row)?[0])
    }

    /// `v(S)` for every mask: bit `j` set means feature `j` takes its value
    /// from `x`, clear means from the background row. The full mask yields
    /// `f(x)` itself.
    pub(crate) fn values(&self, masks: &[u64]) -> Result<Vec<f64>> {
        let nb = self.background.len();
        let m = self.x.len();
        let per_chunk = (ROWS_PER_BATCH / nb).max(1);
        let fx = if masks.contains(&self.full) {
            Some(self.prediction()?)
        } else {
            None
        };
        let chunks: Vec<Vec<f64>> = masks
            .par_chunks(per_chunk)
            .map(|chunk| {
                let mut data = Vec::with_capacity(chunk.len() * nb * m);
                for &mask in chunk {
                    for b in self.background.rows.iter_rows() {
                        data.extend((0..m).map(|j| if mask >> j & 1 == 1 { self.x[j] } else { b[j] }));
                    }
                }
                let preds = self.model.predict_rows(&Matrix::new(chunk.len() * nb, m, data)?)?;
                if preds.len() != chunk.len() * nb || preds.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("model output on masked inputs".into()));
                }
                Ok(chunk
                    .iter()
                    .zip(preds.chunks(nb))
                    .map(|(&mask, p)| match fx {
                        Some(f) if mask == self.full => f,
                        _ => p.iter().sum::<f64>() / nb as f64,
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok(chunks.concat())
    }
}

/// `v(S)` for one coalition given as a boolean mask.
pub fn value_function<P: Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    mask: &[bool],
    background: &BackgroundSet,
) -> Result<f64> {
    let game = Game::new(model, x, background)?;
    if mask.len() != game.features() {
        return Err(Error::LengthMismatch {
            op: "coalition mask",
            expected: game.features(),
            actual: mask.len(),
        });
    }
    let bits = mask.iter().enumerate().fold(0u64, |acc, (j, &on)| acc | (u64::from(on) << j));
    Ok(game.values(&[bits])?[0])
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;

    #[test]
    fn value_function_cases() {
        let f = Poly::linear(&[3.0, 5.0]);
        let bg = background(&[&[0.0, 0.0]]);
        let x = [1.0, 1.0];
        assert_eq!(value_function(&f, &x, &[true, false], &bg).unwrap(), 3.0);
        assert_eq!(value_function(&f, &x, &[true, true], &bg).unwrap(), 8.0);
        assert_eq!(value_function(&f, &x, &[false, false], &bg).unwrap(), 0.0);
        let bg2 = background(&[&[0.0, 0.0], &[2.0, 4.0]]);
        // mean of f over the background rows
        assert_eq!(value_function(&f, &x, &[false, false], &bg2).unwrap(), 13.0);
        assert!(value_function(&f, &x, &[true], &bg).is_err());
    }

    #[test]
    fn background_sampling() {
        let src = Matrix::new(30, 2, (0..60).map(f64::from).collect()).unwrap();
        let a = BackgroundSet::sample(&src, 20, &mut Rng::new(5)).unwrap();
        let b = BackgroundSet::sample(&src, 20, &mut Rng::new(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.len(), a.source_size, a.seed), (20, 30, 5));
        let small = BackgroundSet::sample(&src, 100, &mut Rng::new(5)).unwrap();
        assert_eq!(small.len(), 30);
        assert!(BackgroundSet::from_rows(Matrix::zeros(0, 2)).is_err());
    }

    fn explanation(base: f64, phi: &[f64]) -> Explanation {
        Explanation {
            base_value: base,
            phi: phi.to_vec(),
            prediction: base + phi.iter().sum::<f64>(),
            feature_values: vec![0.0; phi.len()],
            method: Method::Exact,
        }
    }

    #[test]
    fn waterfall_orders_by_magnitude() {
        let e = explanation(36.3, &[-1.6, 1.07, 2.1]);
        let steps = waterfall(&e);
        let cum: Vec<f64> = steps.iter().map(|s| s.cumulative).collect();
        let expect = [36.3, 38.4, 36.8, 37.87];
        for (c, e) in cum.iter().zip(expect) {
            assert!((c - e).abs() < 1e-9, "{cum:?}");
        }
        assert_eq!(steps.iter().map(|s| s.feature).collect::<Vec<_>>(), vec![None, Some(2), Some(0), Some(1)]);
        assert!((steps.last().unwrap().cumulative - e.prediction).abs() < 1e-9);
    }

    #[test]
    fn waterfall_of_zero_attributions_is_the_base() {
        let steps = waterfall(&explanation(5.0, &[0.0, 0.0]));
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].cumulative, 5.0);
    }

    #[test]
    fn waterfall_ties_follow_feature_order() {
        let steps = waterfall(&explanation(0.0, &[1.0, -1.0, 1.0]));
        assert_eq!(steps.iter().skip(1).map(|s| s.feature.unwrap()).collect::<Vec<_>>(), vec![0, 1, 2]);
    }
}
