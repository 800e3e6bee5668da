//! Small statistical helpers: Kolmogorov-Smirnov against a fitted
//! exponential and least-squares slopes.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    /// Rate of the fitted exponential (inverse sample mean).
    pub rate: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Survival function of the Kolmogorov distribution,
/// `Q(t) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 t^2)`.
pub fn kolmogorov_q(t: f64) -> f64 {
    if t < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test of `samples` against `Exp(rate)` with the rate fitted
/// by maximum likelihood. The p-value uses the asymptotic distribution with
/// Stephens' small-sample correction.
pub fn ks_exponential(samples: &[f64]) -> KsResult {
    let n = samples.len();
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let mean = xs.iter().sum::<f64>() / n as f64;
    let rate = 1.0 / mean;
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let cdf = 1.0 - (-rate * x).exp();
        d = d.max((i + 1) as f64 / nf - cdf).max(cdf - i as f64 / nf);
    }
    let sn = nf.sqrt();
    KsResult {
        rate,
        statistic: d,
        p_value: kolmogorov_q((sn + 0.12 + 0.11 / sn) * d),
        n,
    }
}

/// Ordinary least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Exponent `p` of the power law `y ~ x^p` fitted in log-log space.
pub fn power_law_exponent(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}
