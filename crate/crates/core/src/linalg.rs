//! Small dense symmetric helpers for the observed-information matrix.

use crate::mat::Mat;

/// Cholesky factor L (lower) of a symmetric positive definite matrix.
/// Returns `Err(pivot)` carrying the failing pivot value.
pub(crate) fn cholesky(a: &Mat) -> Result<Mat, f64> {
    let n = a.rows();
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(s);
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Inverse of an SPD matrix from its Cholesky factor.
pub(crate) fn spd_inverse(a: &Mat) -> Result<Mat, f64> {
    let l = cholesky(a)?;
    let n = a.rows();
    let mut inv = Mat::zeros(n, n);
    let mut col = vec![0.0; n];
    for c in 0..n {
        // solve L y = e_c
        for i in 0..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[(i, k)] * col[k];
            }
            col[i] = s / l[(i, i)];
        }
        // solve L^T x = y
        for i in (0..n).rev() {
            let mut s = col[i];
            for k in i + 1..n {
                s -= l[(k, i)] * col[k];
            }
            col[i] = s / l[(i, i)];
        }
        for i in 0..n {
            inv[(i, c)] = col[i];
        }
    }
    Ok(inv)
}

/// Largest-eigenvalue estimate by power iteration (symmetric input).
pub(crate) fn spectral_norm_estimate(a: &Mat) -> f64 {
    let n = a.rows();
    if n == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..30 {
        let mut w = vec![0.0; n];
        for i in 0..n {
            let row = a.row(i);
            w[i] = row.iter().zip(&v).map(|(x, y)| x * y).sum();
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return norm;
        }
        lambda = norm;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_known_spd() {
        let a = Mat::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let inv = spd_inverse(&a).unwrap();
        // det = 8, inverse = [[3, -2], [-2, 4]] / 8
        assert!((inv[(0, 0)] - 0.375).abs() < 1e-14);
        assert!((inv[(0, 1)] + 0.25).abs() < 1e-14);
        assert!((inv[(1, 1)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(cholesky(&a).is_err());
    }

    #[test]
    fn power_iteration_estimates_largest_eigenvalue() {
        let a = Mat::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]);
        assert!((spectral_norm_estimate(&a) - 3.0).abs() < 1e-6);
    }
}
