//! Tiny dense solvers for the handful of small least-squares problems in the
//! crate (grid re-fits and symbolic snapping).

/// Solves `A x = b` for square `A` (row-major, `n x n`) by Gaussian
/// elimination with partial pivoting. Returns `None` when singular.
pub fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Least squares `min ||X beta - y||^2 + ridge ||beta||^2` via the normal
/// equations. `rows` yields one design row per observation.
pub fn least_squares<'a>(rows: impl Iterator<Item = &'a [f64]>, y: &[f64], p: usize, ridge: f64) -> Option<Vec<f64>> {
    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    for (row, &yi) in rows.zip(y) {
        for i in 0..p {
            xty[i] += row[i] * yi;
            for j in 0..p {
                xtx[i * p + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        xtx[i * p + i] += ridge;
    }
    solve(xtx, xty)
}
