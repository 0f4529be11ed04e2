//! Small summary statistics used by the experiment reports.

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Standard error of the mean.
pub fn stderr(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    (variance(x) / x.len() as f64).sqrt()
}

/// Least-squares slope of y on x; NaN with fewer than two distinct x.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if x.len() < 2 || sxx == 0.0 {
        return f64::NAN;
    }
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx
}

/// One-sided sign test: P(X >= successes) for X ~ Binomial(trials, 1/2).
pub fn sign_test_p(successes: usize, trials: usize) -> f64 {
    let mut p = 0.0;
    let mut c = 1.0f64;
    for k in 0..=trials {
        if k > 0 {
            c *= (trials - k + 1) as f64 / k as f64;
        }
        if k >= successes {
            p += c;
        }
    }
    p / 2f64.powi(trials as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_test_values() {
        assert!((sign_test_p(10, 10) - 1.0 / 1024.0).abs() < 1e-15);
        assert!((sign_test_p(9, 10) - 11.0 / 1024.0).abs() < 1e-15);
        assert!((sign_test_p(0, 10) - 1.0).abs() < 1e-15);
        assert!((sign_test_p(5, 5) - 1.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn slope_and_spread() {
        assert!((ls_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-15);
        assert!(ls_slope(&[1.0], &[1.0]).is_nan());
        assert_eq!(variance(&[2.0]), 0.0);
        assert!((variance(&[1.0, 3.0]) - 2.0).abs() < 1e-15);
        assert!((stderr(&[1.0, 3.0]) - 1.0).abs() < 1e-15);
    }
}
