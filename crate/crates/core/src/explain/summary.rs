use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{explain, BackgroundSet, ExplainMethod, Predictor};
use crate::numeric::Matrix;

/// Attributions for many instances, aggregated per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalSummary {
    /// `n × M` attributions.
    pub phi: Matrix,
    /// `n × M` feature values, in whatever units the caller supplied.
    pub values: Matrix,
    pub base_values: Vec<f64>,
    pub predictions: Vec<f64>,
    pub mean_abs_phi: Vec<f64>,
    pub mean_phi: Vec<f64>,
    /// Pearson correlation between each feature's value and its attribution:
    /// positive when larger values push the prediction up. `None` when either
    /// column is constant.
    pub direction: Vec<Option<f64>>,
    /// Feature indices by decreasing mean |φ|, ties in feature order.
    pub ranking: Vec<usize>,
}

impl GlobalSummary {
    /// Aggregates precomputed attribution rows.
    pub fn from_parts(phi: Matrix, values: Matrix, base_values: Vec<f64>, predictions: Vec<f64>) -> Result<Self> {
        let (n, m) = (phi.rows(), phi.cols());
        if n == 0 {
            return Err(Error::InvalidInput("summary needs at least one instance".into()));
        }
        if values.shape() != phi.shape() || base_values.len() != n || predictions.len() != n {
            return Err(Error::InvalidInput("summary parts disagree in size".into()));
        }
        let column = |mat: &Matrix, j: usize| -> Vec<f64> { (0..n).map(|i| mat.get(i, j)).collect() };
        let mut mean_abs_phi = Vec::with_capacity(m);
        let mut mean_phi = Vec::with_capacity(m);
        let mut direction = Vec::with_capacity(m);
        for j in 0..m {
            let p = column(&phi, j);
            mean_abs_phi.push(p.iter().map(|v| v.abs()).sum::<f64>() / n as f64);
            mean_phi.push(p.iter().sum::<f64>() / n as f64);
            direction.push(pearson(&column(&values, j), &p));
        }
        let mut ranking: Vec<usize> = (0..m).collect();
        ranking.sort_by(|&a, &b| mean_abs_phi[b].total_cmp(&mean_abs_phi[a]).then(a.cmp(&b)));
        Ok(Self {
            phi,
            values,
            base_values,
            predictions,
            mean_abs_phi,
            mean_phi,
            direction,
            ranking,
        })
    }

    /// `(value, φ)` pairs of one feature across all instances.
    pub fn scatter(&self, feature: usize) -> Vec<(f64, f64)> {
        (0..self.phi.rows())
            .map(|i| (self.values.get(i, feature), self.phi.get(i, feature)))
            .collect()
    }
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Explains every row of `instances` (model space) and aggregates.
pub fn global_summary<P: Predictor + ?Sized>(
    model: &P,
    instances: &Matrix,
    background: &BackgroundSet,
    method: &ExplainMethod,
) -> Result<GlobalSummary> {
    let (n, m) = (instances.rows(), instances.cols());
    let mut phi = Vec::with_capacity(n * m);
    let mut base = Vec::with_capacity(n);
    let mut preds = Vec::with_capacity(n);
    for row in instances.iter_rows() {
        let e = explain(model, row, background, method)?;
        phi.extend_from_slice(&e.phi);
        base.push(e.base_value);
        preds.push(e.prediction);
    }
    GlobalSummary::from_parts(Matrix::new(n, m, phi)?, instances.clone(), base, preds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::testing::*;

    #[test]
    fn only_relevant_feature_ranks_first() {
        let f = Poly::linear(&[0.0, 0.0, 4.0]);
        let x = Matrix::from_rows(&[[0.1, 0.9, 0.3], [0.5, 0.2, 0.8], [0.7, 0.4, 0.1]]).unwrap();
        let bg = background(&[&[0.2, 0.2, 0.2]]);
        let s = global_summary(&f, &x, &bg, &ExplainMethod::default()).unwrap();
        assert_eq!(s.ranking[0], 2);
        assert_eq!(s.mean_abs_phi[0], 0.0);
        assert!(s.direction[2].unwrap() > 0.99);
        assert_eq!(s.direction[0], None);
        assert_eq!(s.scatter(2).len(), 3);
    }

    #[test]
    fn constant_model_attributes_nothing() {
        let f = Poly {
            weights: vec![0.0; 3],
            bias: 7.0,
            interactions: vec![],
        };
        let x = Matrix::from_rows(&[[0.1, 0.9, 0.3], [0.5, 0.2, 0.8]]).unwrap();
        let s = global_summary(&f, &x, &background(&[&[0.0; 3]]), &ExplainMethod::default()).unwrap();
        assert!(s.mean_abs_phi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_instance_ranking_follows_its_magnitudes() {
        let f = Poly::linear(&[1.0, -3.0, 2.0]);
        let x = Matrix::from_rows(&[[1.0, 1.0, 1.0]]).unwrap();
        let s = global_summary(&f, &x, &background(&[&[0.0; 3]]), &ExplainMethod::default()).unwrap();
        assert_eq!(s.ranking, vec![1, 2, 0]);
    }
}
