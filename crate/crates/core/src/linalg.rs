//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff used by [`min_norm_least_squares`].
pub const RCOND: f64 = 1e-10;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Minimum-norm solution of `min ‖A c − b‖₂`.
///
/// Singular values below `rcond` times the largest one are treated as zero,
/// which makes the answer well defined (and deterministic) when `A` is rank
/// deficient.
pub fn min_norm_least_squares(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> DVector<f64> {
    let m = a.ncols();
    if m == 0 || a.nrows() == 0 {
        return DVector::zeros(m);
    }
    // nalgebra's SVD loses accuracy on some exactly rank-deficient inputs,
    // so the decomposition is delegated to faer.
    let fa = faer::Mat::from_fn(a.nrows(), m, |i, j| a[(i, j)]);
    let svd = fa.thin_svd().expect("SVD of a finite matrix converges");
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let k = s.nrows();
    let smax = (0..k).map(|i| s[i]).fold(0.0, f64::max);
    let mut c = DVector::zeros(m);
    if smax == 0.0 {
        return c;
    }
    let cutoff = rcond * smax;
    for r in 0..k {
        if s[r] > cutoff {
            let coef: f64 = (0..a.nrows()).map(|i| u[(i, r)] * b[i]).sum::<f64>() / s[r];
            for j in 0..m {
                c[j] += coef * v[(j, r)];
            }
        }
    }
    c
}

/// Singular values of `a`, largest first.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let fa = faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    fa.singular_values().expect("SVD of a finite matrix converges")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn full_rank_matches_normal_equations() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.5, -1.0, 3.0, 0.25]);
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let c = min_norm_least_squares(&a, &b, RCOND);
        let ata = a.transpose() * &a;
        let atb = a.transpose() * &b;
        let expected = ata.lu().solve(&atb).unwrap();
        assert_abs_diff_eq!(c, expected, epsilon = 1e-12);
    }

    #[test]
    fn duplicate_columns_split_evenly() {
        // min ‖c1 e1 + c2 e1 + e1‖ has the minimum-norm solution c = (-1/2, -1/2).
        let a = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let b = DVector::from_vec(vec![-1.0, 0.0]);
        let c = min_norm_least_squares(&a, &b, RCOND);
        assert_abs_diff_eq!(c[0], -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(c[1], -0.5, epsilon = 1e-14);
    }

    #[test]
    fn zero_matrix_gives_zero() {
        let a = DMatrix::zeros(2, 3);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(min_norm_least_squares(&a, &b, RCOND), DVector::zeros(3));
    }

    #[test]
    fn rank_two_sign_matrix_projects_exactly() {
        let a = DMatrix::from_row_slice(
            4,
            5,
            &[
                -0.5, 0.5, -0.5, -0.5, -0.5, //
                0.5, 0.5, 0.5, -0.5, -0.5, //
                -0.5, -0.5, -0.5, 0.5, 0.5, //
                0.5, -0.5, 0.5, 0.5, 0.5,
            ],
        );
        let b = DVector::from_vec(vec![0.3, -0.2, 0.7, 0.1]);
        let c = min_norm_least_squares(&a, &b, RCOND);
        // The column span is spanned by these two orthonormal vectors.
        let w0 = DVector::from_vec(vec![0.5, 0.5, -0.5, -0.5]);
        let w1 = DVector::from_vec(vec![-0.5, 0.5, -0.5, 0.5]);
        let exact = &w0 * w0.dot(&b) + &w1 * w1.dot(&b);
        assert!((&a * c - exact).norm() < 1e-13);
        let sv = singular_values(&a);
        assert_eq!(sv.iter().filter(|&&s| s > 1e-10 * sv[0]).count(), 2);
    }
}
