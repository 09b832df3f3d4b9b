use crate::error::{Error, Result};
use crate::explain::{BackgroundSet, Explanation, Game, Method, Predictor};

/// Largest feature count explained by full enumeration unless raised.
pub const DEFAULT_EXACT_LIMIT: usize = 15;

/// `|S|!(M−|S|−1)!/M!`, the weight of a coalition of size `s` not containing
/// the attributed feature.
pub fn coalition_weight(m: usize, s: usize) -> f64 {
    debug_assert!(s < m);
    1.0 / (m as f64 * binomial(m - 1, s))
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

/// Shapley values by enumerating all `2^M` coalitions, each valued once.
pub fn exact_shapley<P: Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    background: &BackgroundSet,
    limit: usize,
) -> Result<Explanation> {
    let m = model.input_size();
    if m > limit {
        return Err(Error::ExactLimit { features: m, limit });
    }
    let game = Game::new(model, x, background)?;
    let masks: Vec<u64> = (0..1u64 << m).collect();
    let v = game.values(&masks)?;
    let weights: Vec<f64> = (0..m).map(|s| coalition_weight(m, s)).collect();

    let mut phi = vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1u64 << i;
        let mut acc = 0.0;
        for s in masks.iter().filter(|&&s| s & bit == 0) {
            acc += weights[s.count_ones() as usize] * (v[(s | bit) as usize] - v[*s as usize]);
        }
        *p = acc;
    }
    Ok(Explanation {
        base_value: v[0],
        phi,
        prediction: v[(1u64 << m) as usize - 1],
        feature_values: x.to_vec(),
        method: Method::Exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::testing::*;

    #[test]
    fn linear_model() {
        let f = Poly::linear(&[3.0, 5.0]);
        let e = exact_shapley(&f, &[1.0, 1.0], &background(&[&[0.0, 0.0]]), 15).unwrap();
        assert_eq!(e.phi, vec![3.0, 5.0]);
        assert_eq!(e.base_value, 0.0);
        assert_eq!(e.prediction, 8.0);
    }

    #[test]
    fn product_splits_symmetrically() {
        let f = Poly {
            weights: vec![0.0, 0.0],
            bias: 0.0,
            interactions: vec![(0, 1, 1.0)],
        };
        let e = exact_shapley(&f, &[1.0, 1.0], &background(&[&[0.0, 0.0]]), 15).unwrap();
        assert_eq!(e.phi, vec![0.5, 0.5]);
    }

    #[test]
    fn instance_equal_to_background_gets_nothing() {
        let f = Poly {
            weights: vec![1.0, -2.0, 0.5],
            bias: 3.0,
            interactions: vec![(0, 2, 4.0)],
        };
        let x = [0.3, 0.7, 0.1];
        let e = exact_shapley(&f, &x, &background(&[&x]), 15).unwrap();
        assert!(e.phi.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn limit_is_enforced() {
        let f = Poly::linear(&[1.0; 4]);
        let err = exact_shapley(&f, &[0.0; 4], &background(&[&[0.0; 4]]), 3).unwrap_err();
        assert!(matches!(err, Error::ExactLimit { features: 4, limit: 3 }));
    }

    #[test]
    fn weights_sum_to_one_over_coalitions() {
        for m in 1..=12usize {
            // coalitions of size s avoiding one feature: C(m-1, s) of them
            let total: f64 = (0..m).map(|s| binomial(m - 1, s) * coalition_weight(m, s)).sum();
            assert!((total - 1.0).abs() < 1e-12, "m = {m}: {total}");
        }
        assert_eq!(coalition_weight(3, 0), 1.0 / 3.0);
        assert_eq!(coalition_weight(3, 1), 1.0 / 6.0);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(16, 8), 12870.0);
        assert_eq!(binomial(7, 0), 1.0);
        assert_eq!(binomial(7, 7), 1.0);
    }
}
