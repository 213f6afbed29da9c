//! Confidence intervals for simulation outputs. All intervals are two-sided 95%.

use statrs::function::beta::beta_reg;

/// Standard normal 0.975 quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Normal-approximation half-width for a binomial proportion.
pub fn binomial_half_width(successes: u64, trials: u64) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    let p = successes as f64 / trials as f64;
    Z_95 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// `P[X <= x]` for `X ~ Binomial(n, p)`.
fn binomial_cdf(x: u64, n: u64, p: f64) -> f64 {
    if x >= n {
        return 1.0;
    }
    beta_reg((n - x) as f64, x as f64 + 1.0, 1.0 - p)
}

/// Exact (Clopper-Pearson) 95% interval for a binomial proportion.
pub fn clopper_pearson(successes: u64, trials: u64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let alpha = 0.05;
    let upper = if successes == trials {
        1.0
    } else {
        // P[X <= successes; p] falls from 1 to 0 as p grows.
        bisect(|p| binomial_cdf(successes, trials, p) - alpha / 2.0)
    };
    let lower = if successes == 0 {
        0.0
    } else {
        // P[X >= successes; p] = 1 - P[X <= successes - 1; p] grows with p.
        bisect(|p| binomial_cdf(successes - 1, trials, p) - (1.0 - alpha / 2.0))
    };
    (lower, upper)
}

// Root of a function decreasing on [0, 1].
fn bisect(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Sample mean and the 95% normal half-width of the mean.
pub fn mean_half_width(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = values.clone().fold((0u64, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    let var = ss / (n - 1) as f64;
    (mean, Z_95 * (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn clopper_pearson_reference_values() {
        // Zero events: the upper limit is 1 - 0.025^(1/n).
        let (lo, hi) = clopper_pearson(0, 100);
        assert_eq!(lo, 0.0);
        assert_abs_diff_eq!(hi, 1.0 - 0.025f64.powf(0.01), epsilon = 1e-10);
        // All events: the lower limit is 0.025^(1/n).
        let (lo, hi) = clopper_pearson(20, 20);
        assert_abs_diff_eq!(lo, 0.025f64.powf(1.0 / 20.0), epsilon = 1e-10);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn clopper_pearson_brackets_estimate() {
        for (x, n) in [(1, 10), (5, 1000), (37, 20_000), (500, 1000)] {
            let (lo, hi) = clopper_pearson(x, n);
            let p = x as f64 / n as f64;
            assert!(lo < p && p < hi, "{x}/{n}: {lo} {hi}");
            // The interval tail masses are 2.5% each.
            assert_abs_diff_eq!(binomial_cdf(x, n, hi), 0.025, epsilon = 1e-9);
            assert_abs_diff_eq!(1.0 - binomial_cdf(x - 1, n, lo), 0.025, epsilon = 1e-9);
        }
    }

    #[test]
    fn mean_half_width_scaling() {
        let v: Vec<f64> = (0..1000).map(|i| (i % 7) as f64).collect();
        let (m, h) = mean_half_width(v.iter().copied());
        assert_abs_diff_eq!(m, v.iter().sum::<f64>() / 1000.0, epsilon = 1e-12);
        let v4: Vec<f64> = v.iter().cycle().take(4000).copied().collect();
        let (_, h4) = mean_half_width(v4.iter().copied());
        assert!((h / h4 - 2.0).abs() < 0.01);
    }
}
