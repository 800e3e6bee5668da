use serde::{Deserialize, Serialize};

/// Upper bound on knot intervals (`grid_count + 2 * degree`).
pub const MAX_INTERVALS: usize = 32;

/// `x * sigmoid(x)`.
#[inline]
pub fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

#[inline]
pub fn silu_prime(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// Uniform B-spline basis of a given degree over `[lo, hi]` split into
/// `grid_count` intervals, padded with `degree` extra knots on each side so
/// the basis is a partition of unity on the whole of `[lo, hi]`.
///
/// Outside `[lo, hi]` every basis function is continued linearly from the
/// nearest boundary, which keeps splines linear in their coefficients there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineBasis {
    pub lo: f64,
    pub hi: f64,
    pub grid_count: usize,
    pub degree: usize,
    pub knots: Vec<f64>,
}

impl BSplineBasis {
    pub fn new(lo: f64, hi: f64, grid_count: usize, degree: usize) -> Self {
        assert!(grid_count >= 1, "grid_count must be >= 1");
        assert!(grid_count + 2 * degree <= MAX_INTERVALS, "grid too fine");
        // Collapsed ranges still need distinct knots.
        let (lo, hi) = if hi - lo > 1e-9 {
            (lo, hi)
        } else {
            let mid = 0.5 * (lo + hi);
            (mid - 0.5e-3, mid + 0.5e-3)
        };
        let h = (hi - lo) / grid_count as f64;
        let knots = (0..grid_count + 2 * degree + 1)
            .map(|j| lo + (j as f64 - degree as f64) * h)
            .collect();
        Self {
            lo,
            hi,
            grid_count,
            degree,
            knots,
        }
    }

    pub fn len(&self) -> usize {
        self.grid_count + self.degree
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cox-de Boor evaluation of all basis functions and their derivatives at
    /// `x`, which must lie in `[lo, hi]`.
    fn eval_inside(&self, x: f64, values: &mut [f64], derivs: &mut [f64]) {
        let t = &self.knots;
        let k = self.degree;
        let n_int = t.len() - 1;
        assert!(n_int <= MAX_INTERVALS, "grid too fine for the fixed scratch buffer");
        // Degree 0: indicator of the knot interval holding x. x == hi belongs
        // to the first padding interval on the right, which is still valid.
        let mut b = [0.0; MAX_INTERVALS];
        let mut prev = [0.0; MAX_INTERVALS];
        let idx = t
            .windows(2)
            .position(|w| w[0] <= x && x < w[1])
            .unwrap_or(n_int - 1);
        b[idx] = 1.0;
        for d in 1..=k {
            prev[..n_int].copy_from_slice(&b[..n_int]);
            for i in 0..n_int - d {
                let left = (x - t[i]) / (t[i + d] - t[i]) * prev[i];
                let right = (t[i + d + 1] - x) / (t[i + d + 1] - t[i + 1]) * prev[i + 1];
                b[i] = left + right;
            }
            b[n_int - d] = 0.0;
        }
        let n = self.len();
        values[..n].copy_from_slice(&b[..n]);
        // prev holds the degree k-1 basis (n + 1 functions).
        let kf = k as f64;
        for i in 0..n {
            derivs[i] = if k == 0 {
                0.0
            } else {
                kf / (t[i + k] - t[i]) * prev[i] - kf / (t[i + k + 1] - t[i + 1]) * prev[i + 1]
            };
        }
    }

    /// Fills `values` and `derivs` (each `len()` long) at `x`, extrapolating
    /// linearly beyond the grid.
    pub fn eval(&self, x: f64, values: &mut [f64], derivs: &mut [f64]) {
        if x < self.lo || x > self.hi {
            let b = if x < self.lo { self.lo } else { self.hi };
            self.eval_inside(b, values, derivs);
            let dx = x - b;
            for (v, d) in values.iter_mut().zip(derivs.iter()).take(self.len()) {
                *v += d * dx;
            }
        } else {
            self.eval_inside(x, values, derivs);
        }
    }
}

/// Learnable edge activation `base_scale * silu(x) + spline_scale * sum c_i B_i(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineEdge {
    pub basis: BSplineBasis,
    pub coeffs: Vec<f64>,
    pub base_scale: f64,
    pub spline_scale: f64,
}

impl SplineEdge {
    pub fn new(basis: BSplineBasis) -> Self {
        let n = basis.len();
        Self {
            basis,
            coeffs: vec![0.0; n],
            base_scale: 1.0,
            spline_scale: 1.0,
        }
    }

    /// Number of trainable scalars: coefficients plus the two scales.
    pub fn n_params(&self) -> usize {
        self.coeffs.len() + 2
    }

    pub fn spline(&self, x: f64) -> f64 {
        let mut v = [0.0; MAX_INTERVALS];
        let mut d = [0.0; MAX_INTERVALS];
        self.basis.eval(x, &mut v, &mut d);
        v.iter().zip(&self.coeffs).map(|(b, c)| b * c).sum()
    }

    /// `phi(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        self.base_scale * silu(x) + self.spline_scale * self.spline(x)
    }

    /// `(phi(x), phi'(x))`.
    pub fn eval_with_slope(&self, x: f64) -> (f64, f64) {
        let mut v = [0.0; MAX_INTERVALS];
        let mut d = [0.0; MAX_INTERVALS];
        self.basis.eval(x, &mut v, &mut d);
        let s: f64 = v.iter().zip(&self.coeffs).map(|(b, c)| b * c).sum();
        let ds: f64 = d.iter().zip(&self.coeffs).map(|(b, c)| b * c).sum();
        (
            self.base_scale * silu(x) + self.spline_scale * s,
            self.base_scale * silu_prime(x) + self.spline_scale * ds,
        )
    }
}
