use std::ops::Range;

use serde::Serialize;

use crate::error::{domain, Result};

/// Least-squares power law `y ≈ e^b x^a` fitted on `ln x`, `ln y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the regression residuals.
    pub stderr: f64,
    /// Index range `[start, end)` of the fitted points.
    pub window: [usize; 2],
    /// Smallest and largest fitted abscissa.
    pub abscissa: [f64; 2],
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// False when a precondition fails and the fit is exploratory only.
    pub asserted: bool,
    /// Slope refitted on the central half of the window, when it has at least three points.
    pub half_window_slope: Option<f64>,
}

impl ExponentFit {
    pub fn deviation(&self) -> f64 {
        (self.slope - self.target).abs()
    }

    /// Whether the central-half refit moves the slope by less than twice its stderr.
    pub fn half_window_consistent(&self) -> Option<bool> {
        self.half_window_slope
            .map(|s| (s - self.slope).abs() < 2.0 * self.stderr)
    }

    /// Same fit with the tolerance multiplied by `scale`.
    pub fn rescaled(&self, scale: f64) -> Self {
        let tolerance = self.tolerance * scale;
        Self {
            tolerance,
            pass: self.asserted && self.deviation() <= tolerance,
            ..self.clone()
        }
    }

    /// Marks the fit as not asserted (exploratory data only).
    pub(crate) fn refuse(mut self) -> Self {
        self.pass = false;
        self.asserted = false;
        self
    }
}

/// Ordinary least squares of `y` on `x`: `(slope, intercept, stderr of slope)`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return domain("regression needs at least two paired points");
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return domain("regression abscissae are all equal");
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if n > 2 {
        let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, intercept, stderr))
}

/// Fits `ln y` against `ln x` over `window`, comparing the slope with `target ± tolerance`.
pub fn fit_power_law(x: &[f64], y: &[f64], window: Range<usize>, target: f64, tolerance: f64) -> Result<ExponentFit> {
    if x.len() != y.len() {
        return domain("abscissa and ordinate lengths differ");
    }
    if window.end > x.len() || window.len() < 2 {
        return domain(format!("fit window {window:?} invalid for {} points", x.len()));
    }
    let xs = &x[window.clone()];
    let ys = &y[window.clone()];
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return domain("power-law fit needs positive finite data");
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (slope, intercept, stderr) = ols(&lx, &ly)?;
    let n = lx.len();
    let half_window_slope = if n >= 6 {
        let q = n / 4;
        let len = (n / 2).max(3);
        Some(ols(&lx[q..q + len], &ly[q..q + len])?.0)
    } else {
        None
    };
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ExponentFit {
        slope,
        intercept,
        stderr,
        window: [window.start, window.end],
        abscissa: [lo, hi],
        target,
        tolerance,
        pass: (slope - target).abs() <= tolerance,
        asserted: true,
        half_window_slope,
    })
}

/// Measured curve with its power-law fit and any resolution or precondition warnings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingCurve {
    pub abscissa: Vec<f64>,
    pub values: Vec<f64>,
    /// Monte Carlo standard errors of `values`, when estimated by sampling.
    pub stderr: Option<Vec<f64>>,
    pub fit: ExponentFit,
    pub warnings: Vec<String>,
}

impl ScalingCurve {
    /// Header `x,value[,stderr]` then one row per point.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W, x_name: &str) -> std::io::Result<()> {
        match &self.stderr {
            Some(se) => {
                writeln!(w, "{x_name},value,stderr")?;
                for ((x, v), s) in self.abscissa.iter().zip(&self.values).zip(se) {
                    writeln!(w, "{x:e},{v:e},{s:e}")?;
                }
            }
            None => {
                writeln!(w, "{x_name},value")?;
                for (x, v) in self.abscissa.iter().zip(&self.values) {
                    writeln!(w, "{x:e},{v:e}")?;
                }
            }
        }
        Ok(())
    }
}

/// Sample mean and standard error of the mean.
pub(crate) fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law() {
        let x: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(-1.7)).collect();
        let f = fit_power_law(&x, &y, 0..10, -1.7, 0.01).unwrap();
        assert!((f.slope + 1.7).abs() < 1e-12 && f.pass);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.stderr < 1e-12);
        assert_eq!(f.window, [0, 10]);
        assert_eq!(f.abscissa, [1.0, 10.0]);
        let off = fit_power_law(&x, &y, 0..10, -1.695, 0.01).unwrap();
        assert!(off.pass && !off.rescaled(0.4).pass && off.rescaled(0.6).pass);
        assert!(!off.refuse().rescaled(10.0).pass);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, -1.0], 0..2, 0.0, 1.0).is_err());
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, 1.0], 0..3, 0.0, 1.0).is_err());
        assert!(ols(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn recovers_exact_power_laws(a in -5.0f64..5.0, b in -3.0f64..3.0, n in 6usize..40) {
            let x: Vec<f64> = (0..n).map(|i| 1.5f64.powi(i as i32)).collect();
            let y: Vec<f64> = x.iter().map(|v| b.exp() * v.powf(a)).collect();
            let f = fit_power_law(&x, &y, 0..n, a, 1e-9).unwrap();
            prop_assert!(f.pass);
            prop_assert!((f.intercept - b).abs() < 1e-9);
            prop_assert!((f.half_window_slope.unwrap() - a).abs() < 1e-9);
            prop_assert!(f.stderr >= 0.0 && f.stderr < 1e-9);
        }
    }
}
