//! Dense linear algebra, seeded randomness and weight initialization.

mod lstsq;
mod matrix;
mod rng;

pub use lstsq::{solve_weighted_least_squares, LeastSquaresFit, FALLBACK_RIDGE, PIVOT_FLOOR};
pub(crate) use matrix::{gemm, Trans};
pub use matrix::{matmul, Matrix};
pub use rng::{derive_seed, Rng};

/// Half-width of the Xavier/Glorot uniform interval.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// A `fan_out × fan_in` matrix with entries drawn i.i.d. from `U[−L, L]`,
/// `L = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Matrix {
    assert!(fan_in >= 1 && fan_out >= 1, "xavier_uniform needs positive fan sizes");
    let bound = xavier_bound(fan_in, fan_out);
    let data = (0..fan_in * fan_out)
        .map(|_| bound * (2.0 * rng.uniform() - 1.0))
        .collect();
    Matrix::from_raw(fan_out, fan_in, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xavier_bound_for_first_layer() {
        let mut rng = Rng::new(1);
        let w = xavier_uniform(17, 64, &mut rng);
        assert_eq!((w.rows(), w.cols()), (64, 17));
        let bound = (6.0f64 / 81.0).sqrt();
        assert!((bound - 0.27217).abs() < 1e-5);
        assert!(w.as_slice().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn xavier_is_deterministic() {
        let a = xavier_uniform(8, 3, &mut Rng::new(9));
        let b = xavier_uniform(8, 3, &mut Rng::new(9));
        assert_eq!(a, b);
    }

    #[test]
    fn xavier_large_sample_mean() {
        let mut rng = Rng::new(2024);
        let w = xavier_uniform(10_000, 10_000, &mut rng);
        let bound = xavier_bound(10_000, 10_000);
        let n = w.as_slice().len() as f64;
        let mean = w.as_slice().iter().sum::<f64>() / n;
        // three standard errors of U[-L, L]: 3·L/sqrt(3n)
        assert!(mean.abs() < 3.0 * bound / (3.0 * n).sqrt(), "mean {mean}");
        assert!(w.as_slice().iter().all(|v| v.abs() <= bound));
    }
}
