//! Weighted least squares for the small systems the kernel explainer builds.
//!
//! Solves `min Σ wᵢ(yᵢ − xᵢβ)² + ridge·‖β‖²` through the normal equations
//! `(XᵀWX + ridge·I)β = XᵀWy` and a Cholesky factorization. The unknown count
//! is at most the feature count (under 20), so squaring the condition number
//! is acceptable here.

use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Smallest Cholesky pivot accepted before the fallback ridge is applied.
pub const PIVOT_FLOOR: f64 = 1e-12;
/// Ridge added when the system is (numerically) rank deficient.
pub const FALLBACK_RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresFit {
    pub coefficients: Vec<f64>,
    /// Set when the normal matrix was not positive definite and the solve
    /// was repeated with this much extra ridge.
    pub fallback_ridge: Option<f64>,
}

pub fn solve_weighted_least_squares(
    x: &Matrix,
    y: &[f64],
    w: &[f64],
    ridge: f64,
) -> Result<LeastSquaresFit> {
    let (n, p) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::InvalidInput("least squares needs at least one row".into()));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch {
            op: "solve_weighted_least_squares(y)",
            expected: n,
            actual: y.len(),
        });
    }
    if w.len() != n {
        return Err(Error::LengthMismatch {
            op: "solve_weighted_least_squares(w)",
            expected: n,
            actual: w.len(),
        });
    }
    if w.iter().any(|&wi| !wi.is_finite() || wi < 0.0) {
        return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
    }
    if !w.iter().any(|&wi| wi > 0.0) {
        return Err(Error::InvalidInput("at least one weight must be positive".into()));
    }
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(Error::InvalidInput(format!("ridge must be finite and nonnegative, got {ridge}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least squares targets".into()));
    }

    // Upper triangle of XᵀWX and XᵀWy in one pass over the rows.
    let mut normal = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    for ((row, &yi), &wi) in x.iter_rows().zip(y).zip(w) {
        if wi == 0.0 {
            continue;
        }
        for a in 0..p {
            let wa = wi * row[a];
            if wa == 0.0 {
                continue;
            }
            rhs[a] += wa * yi;
            for b in a..p {
                normal[a * p + b] += wa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            normal[a * p + b] = normal[b * p + a];
        }
    }

    if let Some(beta) = cholesky_solve(&normal, &rhs, p, ridge) {
        return Ok(LeastSquaresFit {
            coefficients: beta,
            fallback_ridge: None,
        });
    }
    let boosted = ridge + FALLBACK_RIDGE;
    cholesky_solve(&normal, &rhs, p, boosted)
        .map(|beta| LeastSquaresFit {
            coefficients: beta,
            fallback_ridge: Some(FALLBACK_RIDGE),
        })
        .ok_or_else(|| Error::InvalidInput("least squares system is singular even with fallback ridge".into()))
}

/// Solves `(a + ridge·I)β = b`; `None` when a pivot drops below [`PIVOT_FLOOR`].
fn cholesky_solve(a: &[f64], b: &[f64], p: usize, ridge: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j];
            if i == j {
                s += ridge;
            }
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if !(s > PIVOT_FLOOR) {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    // L z = b, then Lᵀ β = z
    let mut z = vec![0.0; p];
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * p + k] * z[k];
        }
        z[i] = s / l[i * p + i];
    }
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = z[i];
        for k in i + 1..p {
            s -= l[k * p + i] * beta[k];
        }
        beta[i] = s / l[i * p + i];
    }
    beta.iter().all(|v| v.is_finite()).then_some(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rng;

    fn col(v: &[f64]) -> Matrix {
        Matrix::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn exact_fit_through_origin() {
        let fit = solve_weighted_least_squares(&col(&[1.0, 2.0]), &[2.0, 4.0], &[1.0, 1.0], 0.0).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-14);
        assert_eq!(fit.fallback_ridge, None);
    }

    #[test]
    fn weighted_mean() {
        let x = col(&[1.0, 1.0]);
        let fit = solve_weighted_least_squares(&x, &[1.0, 3.0], &[1.0, 1.0], 0.0).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-14);
        let fit = solve_weighted_least_squares(&x, &[1.0, 3.0], &[3.0, 1.0], 0.0).unwrap();
        assert!((fit.coefficients[0] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn rank_deficient_uses_fallback_ridge() {
        // Two identical columns.
        let x = Matrix::new(3, 2, vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0]).unwrap();
        let fit = solve_weighted_least_squares(&x, &[1.0, 2.0, 3.0], &[1.0; 3], 0.0).unwrap();
        assert_eq!(fit.fallback_ridge, Some(FALLBACK_RIDGE));
        // Minimum-norm split of the unit slope.
        assert!((fit.coefficients[0] - 0.5).abs() < 1e-6);
        assert!((fit.coefficients[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_weights() {
        let x = col(&[1.0, 1.0]);
        assert!(solve_weighted_least_squares(&x, &[1.0, 3.0], &[0.0, 0.0], 0.0).is_err());
        assert!(solve_weighted_least_squares(&x, &[1.0, 3.0], &[-1.0, 2.0], 0.0).is_err());
        assert!(solve_weighted_least_squares(&x, &[1.0, 3.0], &[f64::NAN, 2.0], 0.0).is_err());
        assert!(solve_weighted_least_squares(&x, &[1.0], &[1.0, 2.0], 0.0).is_err());
    }

    /// Unweighted normal equations solved by Gauss-Jordan elimination with
    /// partial pivoting, independent of the Cholesky path.
    fn normal_equations_oracle(x: &Matrix, y: &[f64]) -> Vec<f64> {
        let p = x.cols();
        let mut aug = vec![vec![0.0; p + 1]; p];
        for (row, &yi) in x.iter_rows().zip(y) {
            for a in 0..p {
                for b in 0..p {
                    aug[a][b] += row[a] * row[b];
                }
                aug[a][p] += row[a] * yi;
            }
        }
        for c in 0..p {
            let piv = (c..p).max_by(|&i, &j| aug[i][c].abs().total_cmp(&aug[j][c].abs())).unwrap();
            aug.swap(c, piv);
            for r in 0..p {
                if r != c {
                    let f = aug[r][c] / aug[c][c];
                    for k in c..=p {
                        aug[r][k] -= f * aug[c][k];
                    }
                }
            }
        }
        (0..p).map(|i| aug[i][p] / aug[i][i]).collect()
    }

    #[test]
    fn unit_weights_match_normal_equations_oracle() {
        let mut rng = Rng::new(5);
        for _ in 0..20 {
            let data: Vec<f64> = (0..100).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            let x = Matrix::new(20, 5, data).unwrap();
            let y: Vec<f64> = (0..20).map(|_| rng.uniform_range(-3.0, 3.0)).collect();
            let fit = solve_weighted_least_squares(&x, &y, &[1.0; 20], 0.0).unwrap();
            let oracle = normal_equations_oracle(&x, &y);
            for (a, b) in fit.coefficients.iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
            }
        }
    }
}
