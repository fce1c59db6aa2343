//! Symmetric tridiagonal solves.

/// Solves `T x = rhs` for symmetric tridiagonal `T` given by its diagonal and
/// off-diagonal, via `L D L^T`. Returns `None` when a pivot is not strictly
/// positive, i.e. `T` is not positive definite.
pub fn solve_spd_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    debug_assert_eq!(off.len() + 1, n);
    debug_assert_eq!(rhs.len(), n);
    let mut d = vec![0.0; n];
    let mut l = vec![0.0; n.saturating_sub(1)];
    let mut y = vec![0.0; n];

    d[0] = diag[0];
    if !(d[0] > 0.0) {
        return None;
    }
    y[0] = rhs[0];
    for i in 1..n {
        l[i - 1] = off[i - 1] / d[i - 1];
        d[i] = diag[i] - l[i - 1] * off[i - 1];
        if !(d[i] > 0.0) || !d[i].is_finite() {
            return None;
        }
        y[i] = rhs[i] - l[i - 1] * y[i - 1];
    }
    let mut x = vec![0.0; n];
    x[n - 1] = y[n - 1] / d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = y[i] / d[i] - l[i] * x[i + 1];
    }
    Some(x)
}

/// Whether the symmetric tridiagonal matrix is positive definite (Sylvester
/// via the `L D L^T` pivots).
pub fn is_positive_definite(diag: &[f64], off: &[f64]) -> bool {
    let mut d = diag[0];
    if !(d > 0.0) {
        return false;
    }
    for i in 1..diag.len() {
        d = diag[i] - off[i - 1] * off[i - 1] / d;
        if !(d > 0.0) {
            return false;
        }
    }
    true
}
