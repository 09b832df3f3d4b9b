use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::exact::binomial;
use crate::explain::{BackgroundSet, Explanation, Game, Method, Predictor};
use crate::numeric::{solve_weighted_least_squares, Matrix, Rng};

pub const DEFAULT_KERNEL_SAMPLES: usize = 2048;
/// Ridge used when the design comes from sampled coalitions.
const SAMPLED_RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelSamples {
    /// Every coalition except the empty and full ones.
    Full,
    Sampled(usize),
}

/// `(M−1)/(C(M,s)·s·(M−s))` for `1 ≤ s ≤ M−1`. The empty and full
/// coalitions have unbounded weight and enter as constraints instead.
pub fn shapley_kernel_weight(m: usize, s: usize) -> Result<f64> {
    if s == 0 || s >= m {
        return Err(Error::InvalidInput(format!(
            "kernel weight needs 1 <= s <= M-1, got s = {s} with M = {m}"
        )));
    }
    Ok((m - 1) as f64 / (binomial(m, s) * s as f64 * (m - s) as f64))
}

/// Sampled design: coalition sizes drawn in proportion to their total
/// kernel mass `(M−1)/(s(M−s))`, members uniform given the size, each draw
/// paired with its complement. Duplicates merge into one row weighted by
/// multiplicity.
fn sample_design(m: usize, n_samples: usize, rng: &mut Rng) -> BTreeMap<u64, f64> {
    let full = (1u64 << m) - 1;
    let mass: Vec<f64> = (1..m).map(|s| (m - 1) as f64 / (s * (m - s)) as f64).collect();
    let total: f64 = mass.iter().sum();
    let mut counts = BTreeMap::new();
    let mut idx: Vec<usize> = (0..m).collect();
    for _ in 0..n_samples.div_ceil(2) {
        let mut u = rng.uniform() * total;
        let mut size = m - 1;
        for (k, w) in mass.iter().enumerate() {
            if u < *w {
                size = k + 1;
                break;
            }
            u -= w;
        }
        for k in 0..size {
            let j = k + rng.below(m - k);
            idx.swap(k, j);
        }
        let mask = idx[..size].iter().fold(0u64, |acc, &j| acc | 1 << j);
        *counts.entry(mask).or_insert(0.0) += 1.0;
        *counts.entry(full ^ mask).or_insert(0.0) += 1.0;
    }
    counts
}

/// Kernel SHAP: weighted regression of coalition values on membership
/// indicators, with `φ₀ = v(∅)` and `Σφ = f(x) − v(∅)` imposed by
/// eliminating the last coefficient.
pub fn kernel_shap<P: Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    background: &BackgroundSet,
    samples: KernelSamples,
    seed: u64,
) -> Result<Explanation> {
    let game = Game::new(model, x, background)?;
    let m = game.features();
    let full = (1u64 << m) - 1;
    let coalitions = full - 1;

    let (design, ridge, method): (Vec<(u64, f64)>, f64, Method) = match samples {
        KernelSamples::Sampled(n) if n < 2 * m => {
            return Err(Error::InvalidInput(format!(
                "kernel SHAP needs n_samples >= {} for {m} features, got {n}",
                2 * m
            )))
        }
        KernelSamples::Sampled(n) if (n as u64) < coalitions => {
            let counts = sample_design(m, n, &mut Rng::new(seed));
            let method = Method::KernelSampled { n_samples: n, seed };
            (counts.into_iter().collect(), SAMPLED_RIDGE, method)
        }
        _ => {
            let mut rows = Vec::with_capacity(coalitions as usize);
            for mask in 1..full {
                rows.push((mask, shapley_kernel_weight(m, mask.count_ones() as usize)?));
            }
            (rows, 0.0, Method::KernelFull)
        }
    };

    let mut masks: Vec<u64> = vec![0, full];
    masks.extend(design.iter().map(|&(mask, _)| mask));
    let v = game.values(&masks)?;
    let (v0, vn) = (v[0], v[1]);
    let delta = vn - v0;

    let phi = if m == 1 {
        vec![delta]
    } else {
        if design.len() < 2 {
            return Err(Error::InvalidInput("coalition design is degenerate".into()));
        }
        let last = m - 1;
        let mut xd = Vec::with_capacity(design.len() * last);
        let mut y = Vec::with_capacity(design.len());
        let mut w = Vec::with_capacity(design.len());
        for (&(mask, weight), &value) in design.iter().zip(&v[2..]) {
            let z_last = (mask >> last & 1) as f64;
            xd.extend((0..last).map(|j| (mask >> j & 1) as f64 - z_last));
            y.push(value - v0 - z_last * delta);
            w.push(weight);
        }
        let fit = solve_weighted_least_squares(&Matrix::new(design.len(), last, xd)?, &y, &w, ridge)?;
        let mut phi = fit.coefficients;
        phi.push(delta - phi.iter().sum::<f64>());
        phi
    };

    Ok(Explanation {
        base_value: v0,
        phi,
        prediction: vn,
        feature_values: x.to_vec(),
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::exact_shapley;
    use crate::explain::testing::*;

    #[test]
    fn kernel_weights() {
        assert!((shapley_kernel_weight(3, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((shapley_kernel_weight(3, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(shapley_kernel_weight(2, 1).unwrap(), 0.5);
        assert!(shapley_kernel_weight(3, 0).is_err());
        assert!(shapley_kernel_weight(3, 3).is_err());
    }

    #[test]
    fn full_enumeration_matches_exact_on_interactions() {
        let f = Poly {
            weights: vec![1.0, -2.0, 0.5, 3.0],
            bias: 1.0,
            interactions: vec![(0, 1, 2.0), (2, 3, -1.5), (0, 3, 0.7)],
        };
        let x = [0.9, 0.2, 0.4, 0.6];
        let bg = background(&[&[0.1, 0.5, 0.3, 0.0], &[0.7, 0.1, 0.9, 0.2]]);
        let a = exact_shapley(&f, &x, &bg, 15).unwrap();
        let b = kernel_shap(&f, &x, &bg, KernelSamples::Full, 0).unwrap();
        for (p, q) in a.phi.iter().zip(&b.phi) {
            assert!((p - q).abs() < 1e-9, "{:?} vs {:?}", a.phi, b.phi);
        }
        assert_eq!(b.method, Method::KernelFull);
        assert_eq!(a.base_value, b.base_value);
    }

    #[test]
    fn linear_model_recovers_centered_weights() {
        let f = Poly::linear(&[3.0, 5.0]);
        let bg = background(&[&[0.0, 1.0], &[2.0, 3.0]]);
        let e = kernel_shap(&f, &[1.0, 1.0], &bg, KernelSamples::Full, 0).unwrap();
        assert!((e.phi[0] - 3.0 * (1.0 - 1.0)).abs() < 1e-12);
        assert!((e.phi[1] - 5.0 * (1.0 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn small_sample_budget_rejected_with_minimum() {
        let f = Poly::linear(&[1.0; 5]);
        let err = kernel_shap(&f, &[0.0; 5], &background(&[&[1.0; 5]]), KernelSamples::Sampled(9), 0).unwrap_err();
        assert!(err.to_string().contains(">= 10"), "{err}");
    }

    #[test]
    fn large_budget_falls_back_to_enumeration() {
        let f = Poly::linear(&[1.0; 3]);
        let e = kernel_shap(&f, &[1.0; 3], &background(&[&[0.0; 3]]), KernelSamples::Sampled(6), 0).unwrap();
        assert_eq!(e.method, Method::KernelFull);
    }

    #[test]
    fn sampled_design_is_paired_and_seeded() {
        let d = sample_design(10, 64, &mut Rng::new(3));
        let full = (1u64 << 10) - 1;
        for (&mask, &count) in &d {
            assert!(mask != 0 && mask != full);
            assert_eq!(d.get(&(full ^ mask)), Some(&count));
        }
        assert_eq!(d, sample_design(10, 64, &mut Rng::new(3)));
        assert_eq!(d.values().sum::<f64>(), 64.0);
    }

    #[test]
    fn sampled_kernel_keeps_local_accuracy() {
        let f = Poly {
            weights: (0..12).map(|i| i as f64 - 5.0).collect(),
            bias: 0.0,
            interactions: vec![(0, 1, 3.0), (4, 9, -2.0)],
        };
        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let bg = background(&[&[0.0; 12], &[1.0; 12]]);
        let e = kernel_shap(&f, &x, &bg, KernelSamples::Sampled(200), 11).unwrap();
        assert!(matches!(e.method, Method::KernelSampled { n_samples: 200, seed: 11 }));
        e.check_local_accuracy(1e-9).unwrap();
    }

    #[test]
    fn single_feature() {
        let f = Poly::linear(&[2.0]);
        let e = kernel_shap(&f, &[3.0], &background(&[&[1.0]]), KernelSamples::Full, 0).unwrap();
        assert_eq!(e.phi, vec![4.0]);
    }
}
