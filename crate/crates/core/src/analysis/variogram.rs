use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_power_law, mean_and_stderr, ScalingCurve};
use super::{exponents, spatial_assertable, temporal_assertable};
use crate::error::{domain, Result};
use crate::field::{evaluate_field, mode_covariances, FieldGrid};
use crate::harmonics::SphericalPoint;
use crate::quadrature::QuadratureConfig;
use crate::spectral_sampler::{ModelParams, SpectralSampler, TimeGrid};

/// How variogram values are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariogramMode {
    Analytic,
    MonteCarlo { replicates: u64, seed: u64 },
}

const ANALYTIC_TOLERANCE: f64 = 0.1;
const MONTE_CARLO_TOLERANCE: f64 = 0.15;
/// Largest Monte Carlo truncation (the sampler assembles every mode at every point).
const MONTE_CARLO_MAX_DEGREE: usize = 64;

fn tolerance(mode: VariogramMode) -> f64 {
    match mode {
        VariogramMode::Analytic => ANALYTIC_TOLERANCE,
        VariogramMode::MonteCarlo { .. } => MONTE_CARLO_TOLERANCE,
    }
}

fn positive_window(x: &[f64]) -> std::ops::Range<usize> {
    let start = x.iter().position(|&v| v > 0.0).unwrap_or(x.len());
    start..x.len()
}

/// `E|u(t+r, x) - u(t, x)|²` for each lag `r`; fit target `2η`.
///
/// Lags must be sorted ascending; a zero lag is allowed and gives 0 (excluded from the fit).
pub fn temporal_variogram(
    params: &ModelParams,
    x: &SphericalPoint,
    t: f64,
    lags: &[f64],
    mode: VariogramMode,
    quad: &QuadratureConfig,
) -> Result<ScalingCurve> {
    params.validate()?;
    if lags.iter().any(|&r| !(r >= 0.0)) || lags.windows(2).any(|w| w[1] <= w[0]) {
        return domain("lags must be nonnegative and strictly increasing");
    }
    let last = lags.last().copied().unwrap_or(0.0);
    if !(t >= 0.0) || t + last > params.horizon {
        return domain(format!("t + max lag = {} exceeds T = {}", t + last, params.horizon));
    }
    let mut warnings = Vec::new();
    if let Some(r_min) = lags.iter().copied().find(|&r| r > 0.0) {
        let l = params.truncation as f64;
        if l * l * r_min < 10.0 {
            warnings.push(format!(
                "resolution: L²·r_min = {:.3} < 10; the truncated field is smooth below its band limit",
                l * l * r_min
            ));
        }
    }
    let refusal = temporal_assertable(params);
    warnings.extend(refusal.clone());

    let (values, stderr) = match mode {
        VariogramMode::Analytic => {
            let base = mode_covariances(params, t, t, quad)?;
            let values = lags
                .iter()
                .map(|&r| {
                    if r == 0.0 {
                        return Ok(0.0);
                    }
                    let diag = mode_covariances(params, t + r, t + r, quad)?;
                    let cross = mode_covariances(params, t + r, t, quad)?;
                    Ok((0..=params.truncation)
                        .map(|l| (2 * l + 1) as f64 / (4.0 * PI) * (diag[l] + base[l] - 2.0 * cross[l]))
                        .sum())
                })
                .collect::<Result<Vec<f64>>>()?;
            (values, None)
        }
        VariogramMode::MonteCarlo { replicates, seed } => {
            if params.truncation > MONTE_CARLO_MAX_DEGREE {
                return domain(format!("Monte Carlo variograms are limited to L <= {MONTE_CARLO_MAX_DEGREE}"));
            }
            let mut times = vec![t];
            times.extend(lags.iter().filter(|&&r| r > 0.0).map(|r| t + r));
            let grid = TimeGrid::new(times, params.horizon)?;
            let sampler = SpectralSampler::new(params, &grid, quad)?;
            let points = FieldGrid::new(vec![*x])?;
            let samples = monte_carlo(replicates, |r| {
                let f = evaluate_field(&sampler.sample(seed, r), &points)?;
                let u0 = f.value(0, 0);
                Ok((1..grid.len()).map(|i| (f.value(i, 0) - u0).powi(2)).collect())
            })?;
            let mut values = Vec::new();
            let mut errors = Vec::new();
            let mut k = 0;
            for &r in lags {
                if r == 0.0 {
                    values.push(0.0);
                    errors.push(0.0);
                } else {
                    let (m, se) = mean_and_stderr(&samples[k]);
                    values.push(m);
                    errors.push(se);
                    k += 1;
                }
            }
            (values, Some(errors))
        }
    };
    let window = positive_window(lags);
    let mut fit = fit_power_law(lags, &values, window, 2.0 * exponents(params).eta, tolerance(mode))?;
    if refusal.is_some() {
        fit = fit.refuse();
    }
    Ok(ScalingCurve {
        abscissa: lags.to_vec(),
        values,
        stderr,
        fit,
        warnings,
    })
}

/// `E|u(t, x) - u(t, y)|²` for geodesic distances `θ`; fit target `2γ`.
pub fn spatial_variogram(
    params: &ModelParams,
    t: f64,
    distances: &[f64],
    mode: VariogramMode,
    quad: &QuadratureConfig,
) -> Result<ScalingCurve> {
    params.validate()?;
    if distances.iter().any(|&d| !(0.0..=PI).contains(&d)) || distances.windows(2).any(|w| w[1] <= w[0]) {
        return domain("distances must lie in [0, π] and increase strictly");
    }
    if !(t >= 0.0 && t <= params.horizon) {
        return domain(format!("t = {t} must lie in [0, T]"));
    }
    let mut warnings = Vec::new();
    if let Some(d_min) = distances.iter().copied().find(|&d| d > 0.0) {
        let lt = params.truncation as f64 * d_min;
        if lt < 10.0 {
            warnings.push(format!("resolution: L·θ_min = {lt:.3} < 10"));
        }
    }
    let refusal = spatial_assertable(params);
    warnings.extend(refusal.clone());

    let (values, stderr): (Vec<f64>, Option<Vec<f64>>) = match mode {
        VariogramMode::Analytic => {
            let modes = mode_covariances(params, t, t, quad)?;
            let values = distances
                .par_iter()
                .map(|&d| {
                    let q = one_minus_legendre(params.truncation, d);
                    (0..=params.truncation)
                        .map(|l| (2 * l + 1) as f64 / (2.0 * PI) * modes[l] * q[l])
                        .sum()
                })
                .collect();
            (values, None)
        }
        VariogramMode::MonteCarlo { replicates, seed } => {
            if params.truncation > MONTE_CARLO_MAX_DEGREE {
                return domain(format!("Monte Carlo variograms are limited to L <= {MONTE_CARLO_MAX_DEGREE}"));
            }
            let grid = TimeGrid::new(vec![t], params.horizon)?;
            let sampler = SpectralSampler::new(params, &grid, quad)?;
            // Points along the meridian through a generic base point.
            let base = 0.9;
            let points = FieldGrid::new(
                std::iter::once(base)
                    .chain(distances.iter().map(|d| base + d))
                    .map(|c| SphericalPoint::new(c.min(PI), 0.4))
                    .collect::<Result<Vec<_>>>()?,
            )?;
            if distances.iter().any(|d| base + d > PI) {
                return domain("Monte Carlo spatial distances must stay below π - 0.9");
            }
            let samples = monte_carlo(replicates, |r| {
                let f = evaluate_field(&sampler.sample(seed, r), &points)?;
                let u0 = f.value(0, 0);
                Ok((1..points.len()).map(|j| (f.value(0, j) - u0).powi(2)).collect())
            })?;
            let (values, errors): (Vec<f64>, Vec<f64>) = samples.iter().map(|s| mean_and_stderr(s)).unzip();
            (values, Some(errors))
        }
    };
    let window = positive_window(distances);
    let mut fit = fit_power_law(distances, &values, window, 2.0 * exponents(params).gamma, tolerance(mode))?;
    if refusal.is_some() {
        fit = fit.refuse();
    }
    Ok(ScalingCurve {
        abscissa: distances.to_vec(),
        values,
        stderr,
        fit,
        warnings,
    })
}

/// Runs `replicates` draws in parallel; returns one column of samples per output slot.
fn monte_carlo(replicates: u64, draw: impl Fn(u64) -> Result<Vec<f64>> + Sync) -> Result<Vec<Vec<f64>>> {
    if replicates < 2 {
        return domain("Monte Carlo estimates need at least two replicates");
    }
    let rows = (0..replicates).into_par_iter().map(&draw).collect::<Result<Vec<_>>>()?;
    let width = rows[0].len();
    Ok((0..width).map(|j| rows.iter().map(|r| r[j]).collect()).collect())
}

/// `1 - P_ℓ(cos θ)` for `ℓ = 0..=lmax` without cancellation at small `θ`.
///
/// With `Q_ℓ = 1 - P_ℓ` and `1 - cos θ = 2 sin²(θ/2)`, Bonnet's recurrence becomes
/// `(ℓ+1) Q_{ℓ+1} = (2ℓ+1)(1 - x) + (2ℓ+1) x Q_ℓ - ℓ Q_{ℓ-1}`.
pub(crate) fn one_minus_legendre(lmax: usize, theta: f64) -> Vec<f64> {
    let x = theta.cos();
    let one_minus_x = 2.0 * (0.5 * theta).sin().powi(2);
    let mut q = Vec::with_capacity(lmax + 1);
    q.push(0.0);
    if lmax >= 1 {
        q.push(one_minus_x);
    }
    for l in 1..lmax {
        let lf = l as f64;
        let next = ((2.0 * lf + 1.0) * (one_minus_x + x * q[l]) - lf * q[l - 1]) / (lf + 1.0);
        q.push(next);
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::legendre_series;

    fn quad() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn one_minus_legendre_matches_direct_values() {
        for theta in [0.01, 0.7, 2.5] {
            let q = one_minus_legendre(300, theta);
            let p = legendre_series(300, theta.cos()).unwrap();
            for l in [0usize, 1, 2, 17, 300] {
                assert!((q[l] - (1.0 - p[l])).abs() < 1e-12, "θ={theta} ℓ={l}");
            }
        }
        // 1 - P_300(cos 1e-4) from 40-digit arithmetic; the direct difference loses 7 digits here.
        let q = one_minus_legendre(300, 1e-4);
        assert!((q[300] / 2.257_372_596_480_067_8e-4 - 1.0).abs() < 1e-13);
        // Small-angle limit ℓ(ℓ+1)θ²/4.
        let q = one_minus_legendre(3, 1e-6);
        assert!((q[3] / (12.0 * 1e-12 / 4.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_lag_and_distance_give_zero() {
        let p = ModelParams::new(0.75, 2.0, 16).unwrap();
        let x = SphericalPoint::new(1.0, 1.0).unwrap();
        let c = temporal_variogram(&p, &x, 0.5, &[0.0, 0.01, 0.02], VariogramMode::Analytic, &quad()).unwrap();
        assert_eq!(c.values[0], 0.0);
        assert_eq!(c.fit.window, [1, 3]);
        let s = spatial_variogram(&p, 1.0, &[0.0, 0.1, 0.2], VariogramMode::Analytic, &quad()).unwrap();
        assert_eq!(s.values[0], 0.0);
        assert!(!s.warnings.is_empty());
    }

    #[test]
    fn spatial_variogram_increases_on_small_distances() {
        let p = ModelParams::new(0.6, 1.0, 512).unwrap();
        let d: Vec<f64> = (0..20).map(|i| 0.02 * (i + 1) as f64).collect();
        let s = spatial_variogram(&p, 1.0, &d, VariogramMode::Analytic, &quad()).unwrap();
        assert!(s.values.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn monte_carlo_matches_analytic() {
        let p = ModelParams::new(0.75, 2.0, 12).unwrap();
        let x = SphericalPoint::new(0.8, 2.0).unwrap();
        let lags = [0.05, 0.1, 0.2];
        let a = temporal_variogram(&p, &x, 0.5, &lags, VariogramMode::Analytic, &quad()).unwrap();
        let mc = VariogramMode::MonteCarlo { replicates: 10_000, seed: 3 };
        let m = temporal_variogram(&p, &x, 0.5, &lags, mc, &quad()).unwrap();
        let se = m.stderr.as_ref().unwrap();
        for i in 0..lags.len() {
            assert!((a.values[i] - m.values[i]).abs() < 3.0 * se[i], "lag {i}");
        }
        let d = [0.1, 0.3, 0.6];
        let a = spatial_variogram(&p, 1.0, &d, VariogramMode::Analytic, &quad()).unwrap();
        let m = spatial_variogram(&p, 1.0, &d, mc, &quad()).unwrap();
        let se = m.stderr.as_ref().unwrap();
        for i in 0..d.len() {
            assert!((a.values[i] - m.values[i]).abs() < 3.0 * se[i], "distance {i}");
        }
    }

    #[test]
    fn borderline_initial_data_refuses_assertion() {
        let p = ModelParams::new(0.75, 2.0, 32).unwrap().with_initial(1.0, 4.5).unwrap();
        let x = SphericalPoint::north_pole();
        let c = temporal_variogram(&p, &x, 0.5, &[0.01, 0.02, 0.04], VariogramMode::Analytic, &quad()).unwrap();
        assert!(!c.fit.pass);
        assert!(c.warnings.iter().any(|w| w.contains("refused")));
    }
}
