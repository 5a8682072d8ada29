use statrs::function::beta::beta_reg;

use crate::error::{invalid, Result};

const QUANTILE_TOL: f64 = 1e-10;

/// CDF of the `F(d1, d2)` distribution.
fn f_cdf(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    beta_reg(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2))
}

/// Quantile `q` with `P(F <= q) = prob`, by bisection on the regularized
/// incomplete beta function.
pub fn f_distribution_quantile(d1: f64, d2: f64, prob: f64) -> Result<f64> {
    if !(d1 > 0.0 && d2 > 0.0) {
        return Err(invalid(format!("degrees of freedom must be positive, got ({d1}, {d2})")));
    }
    if !(prob > 0.0 && prob < 1.0) {
        return Err(invalid(format!("probability must lie in (0, 1), got {prob}")));
    }
    let mut hi = 2.0;
    while f_cdf(hi, d1, d2) < prob {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(invalid("F quantile out of range"));
        }
    }
    let mut lo = 0.0;
    while hi - lo > QUANTILE_TOL * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if f_cdf(mid, d1, d2) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Smallest sample count `N` for which a one-sided variance-ratio test at
/// level `p_level` resolves a relative difference `relative_error`: the
/// upper `p_level` quantile of `F(N-1, N-1)` is at most `1 + relative_error`.
pub fn f_test_sample_size(relative_error: f64, p_level: f64) -> Result<usize> {
    if !(relative_error > 0.0 && relative_error.is_finite()) {
        return Err(invalid(format!("relative error must be positive, got {relative_error}")));
    }
    if !(p_level > 0.0 && p_level < 0.5) {
        return Err(invalid(format!("p level must lie in (0, 0.5), got {p_level}")));
    }
    let target = 1.0 + relative_error;
    // quantile <= target  <=>  CDF(target) >= 1 - p, monotone in N
    let resolves = |n: usize| {
        let d = (n - 1) as f64;
        f_cdf(target, d, d) >= 1.0 - p_level
    };
    let mut hi = 2usize;
    while !resolves(hi) {
        hi *= 2;
    }
    let mut lo = hi / 2;
    if lo < 2 {
        return Ok(2);
    }
    // resolves(lo) is false, resolves(hi) is true
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if resolves(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Least-squares `log10 y = intercept + slope log10 x`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(invalid("log-log fit needs at least two paired points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(invalid("log-log fit needs positive values"));
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.log10()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.log10()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("log-log fit needs distinct x values"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn f_quantile_known_values() {
        // F(1, 1) median is 1; F(10, 10) 95% quantile is 2.978237
        assert!((f_distribution_quantile(1.0, 1.0, 0.5).unwrap() - 1.0).abs() < 1e-8);
        assert!((f_distribution_quantile(10.0, 10.0, 0.95).unwrap() - 2.978237).abs() < 1e-5);
    }

    #[test]
    fn sample_size_is_monotone_with_slope_minus_two() {
        let errs = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1];
        let ns: Vec<usize> = errs.iter().map(|&e| f_test_sample_size(e, 0.05).unwrap()).collect();
        assert!(ns.windows(2).all(|w| w[0] > w[1]), "{ns:?}");
        let (slope, _) = loglog_fit(&errs, &ns.iter().map(|&n| n as f64).collect::<Vec<_>>()).unwrap();
        assert!((slope + 2.0).abs() <= 0.1, "slope {slope}");
        let ratio = f_test_sample_size(0.01, 0.05).unwrap() as f64 / f_test_sample_size(0.02, 0.05).unwrap() as f64;
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
        assert!(f_test_sample_size(0.0, 0.05).is_err());
        assert!(f_test_sample_size(0.1, 0.6).is_err());
    }

    #[test]
    fn sample_size_matches_simulated_variance_ratio_tests() {
        // at the returned N, the variance ratio of two equal-variance normal
        // samples exceeds 1 + rel with probability close to p_level
        let mut rng = seeded(21);
        for &n in &[10usize, 100] {
            let d = (n - 1) as f64;
            let q = f_distribution_quantile(d, d, 0.95).unwrap();
            let rel = q - 1.0;
            assert_eq!(f_test_sample_size(rel * (1.0 + 1e-9), 0.05).unwrap(), n);
            let trials = 20_000;
            let mut hits = 0;
            for _ in 0..trials {
                let var = |rng: &mut crate::rng::SimRng| {
                    let xs: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                    let m = xs.iter().sum::<f64>() / n as f64;
                    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / d
                };
                if var(&mut rng) / var(&mut rng) > q {
                    hits += 1;
                }
            }
            let frac = hits as f64 / trials as f64;
            let se = (0.05 * 0.95 / trials as f64).sqrt();
            assert!((frac - 0.05).abs() < 4.0 * se, "N={n}: {frac}");
        }
    }

    #[test]
    fn loglog_fit_recovers_power_law() {
        let xs = [1.0, 10.0, 100.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let (s, b) = loglog_fit(&xs, &ys).unwrap();
        assert!((s - 2.0).abs() < 1e-12 && (b - 3f64.log10()).abs() < 1e-12);
    }
}
