use std::f64::consts::PI;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use super::fit::{fit_power_law, mean_and_stderr, ExponentFit, ScalingCurve};
use crate::error::{domain, Result};
use crate::fbm_kernel::{c33, eigenvalue, sigma_l_sq, sigma_l_sq_saturated};
use crate::field::mode_covariances;
use crate::quadrature::QuadratureConfig;
use crate::spectral_sampler::{initial_spectrum, power_coefficient, ModelParams, SpectralSampler, TimeGrid};

const SPECTRUM_TOLERANCE: f64 = 0.1;
const MONTE_CARLO_TOLERANCE: f64 = 0.15;

fn check_spectrum_inputs(params: &ModelParams, t: f64, window: &RangeInclusive<usize>) -> Result<()> {
    params.validate()?;
    if params.d0 != 0.0 {
        return domain("the spectrum law is stated for u₀ ≡ 0 (D₀ = 0)");
    }
    if !(t > 0.0 && t <= params.horizon) {
        return domain(format!("t = {t} must lie in (0, T]"));
    }
    if window.is_empty() || *window.end() > params.truncation {
        return domain(format!("degree window {window:?} must be nonempty and within L = {}", params.truncation));
    }
    Ok(())
}

/// Fit of `ln(C_ℓ σ_ℓ²(t))` against `ln(ℓ + 1/2)` over `window`; target `-(α + 4H)`.
pub fn spectrum_slope(
    params: &ModelParams,
    t: f64,
    window: RangeInclusive<usize>,
    quad: &QuadratureConfig,
) -> Result<ScalingCurve> {
    check_spectrum_inputs(params, t, &window)?;
    let modes = mode_covariances(&params.with_truncation(*window.end())?, t, t, quad)?;
    let degrees: Vec<usize> = window.collect();
    let x: Vec<f64> = degrees.iter().map(|&l| l as f64 + 0.5).collect();
    let y: Vec<f64> = degrees.iter().map(|&l| modes[l]).collect();
    let target = -(params.alpha + 4.0 * params.hurst);
    let fit = fit_power_law(&x, &y, 0..x.len(), target, SPECTRUM_TOLERANCE)?;
    Ok(ScalingCurve {
        abscissa: x,
        values: y,
        stderr: None,
        fit,
        warnings: Vec::new(),
    })
}

/// Same fit on `E|u_ℓm(t)|²` estimated from sampled coefficients (averaged over `m >= 0`).
pub fn spectrum_slope_monte_carlo(
    params: &ModelParams,
    t: f64,
    window: RangeInclusive<usize>,
    replicates: u64,
    seed: u64,
    quad: &QuadratureConfig,
) -> Result<ScalingCurve> {
    check_spectrum_inputs(params, t, &window)?;
    if replicates < 2 {
        return domain("Monte Carlo spectrum needs at least two replicates");
    }
    let p = params.with_truncation(*window.end())?;
    let sampler = SpectralSampler::new(&p, &TimeGrid::new(vec![t], p.horizon)?, quad)?;
    let degrees: Vec<usize> = window.collect();
    let per_replicate: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let s = sampler.sample(seed, r);
            degrees
                .iter()
                .map(|&l| (0..=l).map(|m| s.path(l, m)[0].norm_sqr()).sum::<f64>() / (l + 1) as f64)
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(degrees.len());
    let mut errors = Vec::with_capacity(degrees.len());
    for i in 0..degrees.len() {
        let column: Vec<f64> = per_replicate.iter().map(|v| v[i]).collect();
        let (m, se) = mean_and_stderr(&column);
        values.push(m);
        errors.push(se);
    }
    let x: Vec<f64> = degrees.iter().map(|&l| l as f64 + 0.5).collect();
    let target = -(params.alpha + 4.0 * params.hurst);
    let fit = fit_power_law(&x, &values, 0..x.len(), target, MONTE_CARLO_TOLERANCE)?;
    Ok(ScalingCurve {
        abscissa: x,
        values,
        stderr: Some(errors),
        fit,
        warnings: Vec::new(),
    })
}

/// One truncation level of [`TruncationReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationRow {
    pub truncation: usize,
    /// `E|u(t,x) - u_L(t,x)|²`.
    pub tail: f64,
    /// Noise part of the tail.
    pub noise_tail: f64,
    /// Natural log of the initial-condition part (`-inf` when `D₀ = 0`).
    pub log_initial_tail: f64,
    /// `t^{β/2-1} L^{-β} e^{-L(L+1)t} + L^{-(α-2+4H)}` (first term only with `D₀ > 0`).
    pub bound_shape: f64,
    /// `tail / (K · bound_shape)` with `K` calibrated at the first level.
    pub calibrated_ratio: f64,
}

/// Analytic truncation error against the bound shape.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    pub time: f64,
    pub rows: Vec<TruncationRow>,
    pub calibration_constant: f64,
    /// Noise tail against the first omitted degree `L + 1`; target `-(α - 2 + 4H)`.
    pub fit: ExponentFit,
    /// Same data against `L` itself.
    pub fit_against_truncation: ExponentFit,
}

const TRUNCATION_TOLERANCE: f64 = 0.1;
const SATURATION: f64 = 50.0;

/// Tail `Σ_{ℓ>L} (2ℓ+1)/(4π) [D_ℓ e^{-2ℓ(ℓ+1)t} + C_ℓ σ_ℓ²(t)]` for each `L` in `levels`.
///
/// Degrees are summed exactly up to a far cutoff `N = max(2^17, 64 L_max)`,
/// using the saturated `σ_ℓ²` once `ℓ(ℓ+1)t >= 50`; the remainder beyond `N`
/// is the integral of the asymptotic summand from `N + 1`.
pub fn truncation_error(
    params: &ModelParams,
    t: f64,
    levels: &[usize],
    quad: &QuadratureConfig,
) -> Result<TruncationReport> {
    params.validate()?;
    if !(t > 0.0 && t <= params.horizon) {
        return domain(format!("t = {t} must lie in (0, T]"));
    }
    if levels.len() < 2 || levels.windows(2).any(|w| w[1] <= w[0]) || levels[0] == 0 {
        return domain("truncation levels must be positive, increasing, and at least two");
    }
    let p = params.alpha - 2.0 + 4.0 * params.hurst;
    if !(p > 0.0) {
        return domain(format!("α - 2 + 4H = {p} ≤ 0: the pointwise tail is infinite"));
    }
    let conv = params.convention();
    let c33_value = c33(&conv)?;
    let lmin = levels[0];
    let lmax = *levels.last().unwrap();
    let far = (1usize << 17).max(64 * lmax);

    let weight = |l: usize| (2 * l + 1) as f64 / (4.0 * PI);
    // Noise summands for ℓ in (lmin, far]; unsaturated ones by quadrature.
    let summand = |l: usize| -> Result<f64> {
        let k = eigenvalue(l);
        let sigma = if k * t >= SATURATION {
            sigma_l_sq_saturated(l, &conv, c33_value)
        } else {
            sigma_l_sq(l, t, &conv, quad)?
        };
        Ok(weight(l) * power_coefficient(params, l) * sigma)
    };
    let terms: Vec<f64> = (lmin + 1..=far).into_par_iter().map(summand).collect::<Result<_>>()?;

    let mean_upsilon = match params.upsilon {
        crate::spectral_sampler::Upsilon::Constant { value } => value,
        crate::spectral_sampler::Upsilon::Alternating { even, odd } => 0.5 * (even + odd),
    };
    let amp = conv.fourier_constant() * c33_value * mean_upsilon / (2.0 * PI);
    let x = (far + 1) as f64;
    let h = conv.hurst();
    let mut suffix = amp * (x.powf(-p) / p + 0.5 * h * x.powf(-p - 2.0) / (p + 2.0));

    // Suffix sums from the far end (small terms first), compensated.
    let mut comp = 0.0;
    let mut noise_tail_at = vec![0.0; lmax - lmin + 1];
    for (i, term) in terms.iter().enumerate().rev() {
        let y = term - comp;
        let s = suffix + y;
        comp = (s - suffix) - y;
        suffix = s;
        // terms[i] is degree lmin + 1 + i, so `suffix` is now the tail past lmin + i.
        if i <= lmax - lmin {
            noise_tail_at[i] = suffix;
        }
    }

    let log_initial_tail = |l: usize| -> f64 {
        if params.d0 == 0.0 {
            return f64::NEG_INFINITY;
        }
        let log_term = |j: usize| {
            weight(j).ln() + initial_spectrum(params, j).ln() - 2.0 * eigenvalue(j) * t
        };
        let first = log_term(l + 1);
        let mut acc = 1.0;
        for j in l + 2.. {
            let r = (log_term(j) - first).exp();
            acc += r;
            if r < 1e-18 * acc {
                break;
            }
        }
        first + acc.ln()
    };

    let shape = |l: usize| -> f64 {
        let lf = l as f64;
        let noise = lf.powf(-p);
        if params.d0 > 0.0 {
            let init = (t.ln() * (params.beta / 2.0 - 1.0) - params.beta * lf.ln() - lf * (lf + 1.0) * t).exp();
            init + noise
        } else {
            noise
        }
    };

    let mut rows = Vec::with_capacity(levels.len());
    for &l in levels {
        let noise_tail = noise_tail_at[l - lmin];
        let li = log_initial_tail(l);
        rows.push(TruncationRow {
            truncation: l,
            tail: noise_tail + li.exp(),
            noise_tail,
            log_initial_tail: li,
            bound_shape: shape(l),
            calibrated_ratio: 0.0,
        });
    }
    let k = rows[0].tail / rows[0].bound_shape;
    for r in &mut rows {
        r.calibrated_ratio = r.tail / (k * r.bound_shape);
    }
    let tails: Vec<f64> = rows.iter().map(|r| r.noise_tail).collect();
    let first_omitted: Vec<f64> = levels.iter().map(|&l| (l + 1) as f64).collect();
    let plain: Vec<f64> = levels.iter().map(|&l| l as f64).collect();
    let n = levels.len();
    Ok(TruncationReport {
        time: t,
        rows,
        calibration_constant: k,
        fit: fit_power_law(&first_omitted, &tails, 0..n, -p, TRUNCATION_TOLERANCE)?,
        fit_against_truncation: fit_power_law(&plain, &tails, 0..n, -p, TRUNCATION_TOLERANCE)?,
    })
}

/// Ratio test on the initial-condition tail: for every power `q`, the sequence
/// `tail_D(L) · L^q` must be strictly decreasing over the last three levels.
pub fn initial_tail_decays_superpolynomially(report: &TruncationReport, powers: &[f64]) -> bool {
    let rows = &report.rows;
    if rows.len() < 3 || rows.iter().any(|r| r.log_initial_tail == f64::NEG_INFINITY) {
        return false;
    }
    let tail = &rows[rows.len() - 3..];
    powers.iter().all(|&q| {
        tail.windows(2).all(|w| {
            let a = w[0].log_initial_tail + q * (w[0].truncation as f64).ln();
            let b = w[1].log_initial_tail + q * (w[1].truncation as f64).ln();
            b < a
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn analytic_spectrum_slope() {
        let p = ModelParams::new(0.75, 1.0, 64).unwrap();
        let c = spectrum_slope(&p, 1.0, 8..=64, &quad()).unwrap();
        assert!(c.fit.pass, "slope {}", c.fit.slope);
        assert_eq!(c.abscissa.len(), 57);
        assert!(spectrum_slope(&p.with_initial(1.0, 6.0).unwrap(), 1.0, 8..=64, &quad()).is_err());
        assert!(spectrum_slope(&p, 1.0, 8..=65, &quad()).is_err());
    }

    #[test]
    fn saturated_modes_do_not_move_with_time() {
        let p = ModelParams::new(0.75, 1.0, 40).unwrap().with_horizon(2.0).unwrap();
        let a = spectrum_slope(&p, 1.0, 30..=40, &quad()).unwrap();
        let b = spectrum_slope(&p, 2.0, 30..=40, &quad()).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x / y - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn truncation_tail_is_monotone_and_matches_direct_sums() {
        let p = ModelParams::new(0.75, 2.0, 8).unwrap();
        let r = truncation_error(&p, 1.0, &[8, 16, 32, 64], &quad()).unwrap();
        assert!(r.rows.windows(2).all(|w| w[1].tail < w[0].tail && w[1].tail > 0.0));
        // Differences of tails are finite sums of mode variances.
        let conv = p.convention();
        let direct: f64 = (17..=32)
            .map(|l| {
                (2 * l + 1) as f64 / (4.0 * PI)
                    * power_coefficient(&p, l)
                    * sigma_l_sq(l, 1.0, &conv, &quad()).unwrap()
            })
            .sum();
        assert!(((r.rows[1].tail - r.rows[2].tail) / direct - 1.0).abs() < 1e-9);
        assert!(r.rows.iter().all(|row| row.log_initial_tail == f64::NEG_INFINITY));
        assert!(truncation_error(&p, 1.0, &[16, 8], &quad()).is_err());
    }

    #[test]
    fn far_remainder_matches_a_longer_direct_sum() {
        // Moving the cutoff must not change the tail: compare levels that straddle it.
        let p = ModelParams::new(0.6, 1.0, 8).unwrap();
        let a = truncation_error(&p, 1.0, &[8, 2048], &quad()).unwrap();
        let b = truncation_error(&p, 1.0, &[8, 4096], &quad()).unwrap();
        assert!((a.rows[0].tail / b.rows[0].tail - 1.0).abs() < 1e-10);
    }

    #[test]
    fn initial_tail_ratio_test() {
        let p = ModelParams::new(0.75, 2.0, 8).unwrap().with_initial(1.0, 5.0).unwrap();
        let r = truncation_error(&p, 0.1, &[8, 16, 32, 64], &quad()).unwrap();
        assert!(r.rows.iter().all(|row| row.log_initial_tail.is_finite()));
        assert!(initial_tail_decays_superpolynomially(&r, &[1.0, 4.0, 16.0, 64.0]));
        let none = truncation_error(&ModelParams::new(0.75, 2.0, 8).unwrap(), 0.1, &[8, 16, 32], &quad()).unwrap();
        assert!(!initial_tail_decays_superpolynomially(&none, &[1.0]));
    }
}
