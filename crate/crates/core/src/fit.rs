//! Log-log regression for N-scaling exponents and time-decay fits.

use crate::error::{Error, Result};

/// Least-squares fit of `log(value) = slope * log(n) + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% confidence interval on the slope.
    pub ci95: f64,
    pub r_squared: f64,
}

/// Two-sided 97.5% Student-t quantile for small degrees of freedom.
fn t975(dof: usize) -> f64 {
    const TABLE: [f64; 10] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
    ];
    if dof == 0 {
        f64::INFINITY
    } else if dof <= TABLE.len() {
        TABLE[dof - 1]
    } else {
        1.96 + 2.4 / dof as f64
    }
}

/// Fit the scaling exponent of a positive series against its abscissa
/// (typically particle numbers N in geometric progression).
pub fn fit_exponent(samples: &[(f64, f64)]) -> Result<ExponentFit> {
    if samples.len() < 3 {
        return Err(Error::FitUnderdetermined {
            need: 3,
            got: samples.len(),
        });
    }
    for &(x, y) in samples {
        if !(x > 0.0) {
            return Err(Error::NonPositiveFit(x));
        }
        if !(y > 0.0) {
            return Err(Error::NonPositiveFit(y));
        }
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    let dof = pts.len().saturating_sub(2);
    let ci95 = if dof > 0 {
        let se = (ss_res / dof as f64 / sxx).sqrt();
        t975(dof) * se
    } else {
        f64::INFINITY
    };
    Ok(ExponentFit {
        slope,
        intercept,
        ci95,
        r_squared,
    })
}

/// Fit a decay exponent of `values(t) ~ t^alpha` over a time window.
/// Points with `t <= 0` or nonpositive values are rejected.
pub fn fit_decay_window(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<ExponentFit> {
    let t_max = times.last().copied().unwrap_or(0.0);
    if window.0 < 0.0 || window.1 > t_max + 1e-12 || window.0 >= window.1 {
        return Err(Error::WindowOutOfRange {
            lo: window.0,
            hi: window.1,
            max: t_max,
        });
    }
    let samples: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(&t, _)| t >= window.0 && t <= window.1 && t > 0.0)
        .map(|(&t, &v)| (t, v))
        .collect();
    fit_exponent(&samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_power_law_recovered() {
        let samples: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0]
            .iter()
            .map(|&n: &f64| (n, 3.0 * n.powf(-0.5)))
            .collect();
        let fit = fit_exponent(&samples).unwrap();
        assert_relative_eq!(fit.slope, -0.5, epsilon = 1e-12);
        assert!(fit.ci95 < 1e-10);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_series_has_zero_slope() {
        let samples = vec![(8.0, 2.0), (16.0, 2.0), (32.0, 2.0)];
        let fit = fit_exponent(&samples).unwrap();
        assert!(fit.slope.abs() < 1e-14);
    }

    #[test]
    fn synthetic_noisy_law() {
        // N^{-1+2*beta} at beta = 0.4 with 1% deterministic perturbation
        let beta = 0.4;
        let noise = [0.01, -0.008, 0.006, -0.01, 0.004];
        let samples: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0, 128.0]
            .iter()
            .zip(noise.iter())
            .map(|(&n, &e): (&f64, &f64)| (n, n.powf(-1.0 + 2.0 * beta) * (1.0 + e)))
            .collect();
        let fit = fit_exponent(&samples).unwrap();
        assert!((fit.slope - (-0.2)).abs() < 0.05, "slope {}", fit.slope);
    }

    #[test]
    fn rejects_nonpositive_and_short() {
        assert!(matches!(
            fit_exponent(&[(8.0, 1.0), (16.0, 0.5)]),
            Err(Error::FitUnderdetermined { .. })
        ));
        assert!(matches!(
            fit_exponent(&[(8.0, 1.0), (16.0, -0.5), (32.0, 0.1)]),
            Err(Error::NonPositiveFit(_))
        ));
    }
}
