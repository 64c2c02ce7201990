use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::fit::{fit_power_law, ScalingCurve};
use super::{exponents, spatial_assertable, temporal_assertable};
use crate::error::{domain, Result};
use crate::field::{addition_sum, mode_covariances};
use crate::harmonics::{legendre_series, SphericalPoint};
use crate::quadrature::QuadratureConfig;
use crate::spectral_sampler::{CovarianceMatrix, ModelParams};

const SLND_TOLERANCE: f64 = 0.15;

/// `Var(z₀ | z₁..zₙ)` for a centered Gaussian vector with covariance `k`, by Schur complement.
fn schur_variance(k: &DMatrix<f64>) -> Result<f64> {
    let n = k.nrows() - 1;
    if n == 0 {
        return Ok(k[(0, 0)]);
    }
    let cond = CovarianceMatrix::new(k.view((1, 1), (n, n)).into_owned())?;
    let f = cond.factor()?;
    let cross = DVector::from_iterator(n, (1..=n).map(|i| k[(0, i)]));
    let v = f
        .lower
        .solve_lower_triangular(&cross)
        .ok_or_else(|| crate::error::Error::Indefinite {
            dim: n,
            min_eigenvalue: 0.0,
            trace: cond.trace(),
        })?;
    Ok(k[(0, 0)] - v.dot(&v))
}

/// `Var(u(t, x) | u(s_j, x), j = 1..n)`; every `s_j` must lie in `[0, t)`.
///
/// Isotropy makes the answer independent of `x`; it is accepted for symmetry with the
/// spatial version.
pub fn conditional_variance(
    params: &ModelParams,
    t: f64,
    conditioning_times: &[f64],
    _x: &SphericalPoint,
    quad: &QuadratureConfig,
) -> Result<f64> {
    params.validate()?;
    if !(t > 0.0 && t <= params.horizon) {
        return domain(format!("t = {t} must lie in (0, T]"));
    }
    if conditioning_times.iter().any(|&s| !(s >= 0.0 && s < t)) {
        return domain("conditioning times must lie in [0, t): the past strictly before t");
    }
    let times: Vec<f64> = std::iter::once(t).chain(conditioning_times.iter().copied()).collect();
    let n = times.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let modes = mode_covariances(params, times[i], times[j], quad)?;
            let v: f64 = modes.iter().enumerate().map(|(l, u)| (2 * l + 1) as f64 / (4.0 * PI) * u).sum();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    schur_variance(&k)
}

/// `Var(u(t, x₀) | u(t, x_j), j = 1..n)`.
pub fn spatial_conditional_variance(
    params: &ModelParams,
    t: f64,
    x0: &SphericalPoint,
    conditioning_points: &[SphericalPoint],
    quad: &QuadratureConfig,
) -> Result<f64> {
    params.validate()?;
    let modes = mode_covariances(params, t, t, quad)?;
    spatial_conditional_from_modes(params.truncation, &modes, x0, conditioning_points)
}

fn spatial_conditional_from_modes(
    lmax: usize,
    modes: &[f64],
    x0: &SphericalPoint,
    points: &[SphericalPoint],
) -> Result<f64> {
    let all: Vec<&SphericalPoint> = std::iter::once(x0).chain(points.iter()).collect();
    let n = all.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let p = legendre_series(lmax, all[i].dot(all[j]))?;
            let v = addition_sum(modes, &p);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    schur_variance(&k)
}

/// Conditional variances over a ladder of separations, with the unconditional variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlndScan {
    pub curve: ScalingCurve,
    pub unconditional: f64,
    /// Every conditional variance is at most the unconditional one (relative slack 1e-9).
    pub bounded_by_unconditional: bool,
}

/// Temporal scan: for each `r`, condition on `per_level` past times
/// `s_j = (t - r)(1 - j/per_level)`, `j = 0..per_level`; fit target `2η`.
pub fn temporal_slnd_scan(
    params: &ModelParams,
    t: f64,
    separations: &[f64],
    per_level: usize,
    quad: &QuadratureConfig,
) -> Result<SlndScan> {
    if per_level == 0 || separations.iter().any(|&r| !(r > 0.0 && r < t)) {
        return domain("separations must lie in (0, t) and each level needs observations");
    }
    let x = SphericalPoint::north_pole();
    let unconditional = conditional_variance(params, t, &[], &x, quad)?;
    let values = separations
        .iter()
        .map(|&r| {
            let times: Vec<f64> = (0..per_level)
                .map(|j| (t - r) * (1.0 - j as f64 / per_level as f64))
                .collect();
            conditional_variance(params, t, &times, &x, quad)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = Vec::new();
    let l = params.truncation as f64;
    let r_min = separations.iter().cloned().fold(f64::INFINITY, f64::min);
    if l * l * r_min < 10.0 {
        warnings.push(format!("resolution: L²·r_min = {:.3} < 10", l * l * r_min));
    }
    let refusal = temporal_assertable(params);
    warnings.extend(refusal.clone());
    let mut fit = fit_power_law(separations, &values, 0..values.len(), 2.0 * exponents(params).eta, SLND_TOLERANCE)?;
    if refusal.is_some() {
        fit = fit.refuse();
    }
    let bounded = values.iter().all(|&v| v <= unconditional * (1.0 + 1e-9));
    Ok(SlndScan {
        curve: ScalingCurve {
            abscissa: separations.to_vec(),
            values,
            stderr: None,
            fit,
            warnings,
        },
        unconditional,
        bounded_by_unconditional: bounded,
    })
}

/// Spatial scan: `x₀` at the north pole, conditioned on `ring` points at
/// colatitude `r` and equally spaced longitudes; fit target `2γ`.
pub fn spatial_slnd_scan(
    params: &ModelParams,
    t: f64,
    separations: &[f64],
    ring: usize,
    quad: &QuadratureConfig,
) -> Result<SlndScan> {
    params.validate()?;
    if ring == 0 || separations.iter().any(|&r| !(r > 0.0 && r < PI)) {
        return domain("separations must lie in (0, π) and rings need points");
    }
    let modes = mode_covariances(params, t, t, quad)?;
    let x0 = SphericalPoint::north_pole();
    let unconditional = spatial_conditional_from_modes(params.truncation, &modes, &x0, &[])?;
    let values = separations
        .iter()
        .map(|&r| {
            let points = (0..ring)
                .map(|j| SphericalPoint::new(r, 2.0 * PI * j as f64 / ring as f64))
                .collect::<Result<Vec<_>>>()?;
            spatial_conditional_from_modes(params.truncation, &modes, &x0, &points)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = Vec::new();
    let r_min = separations.iter().cloned().fold(f64::INFINITY, f64::min);
    if params.truncation as f64 * r_min < 10.0 {
        warnings.push(format!("resolution: L·r_min = {:.3} < 10", params.truncation as f64 * r_min));
    }
    let refusal = spatial_assertable(params);
    warnings.extend(refusal.clone());
    let mut fit = fit_power_law(separations, &values, 0..values.len(), 2.0 * exponents(params).gamma, SLND_TOLERANCE)?;
    if refusal.is_some() {
        fit = fit.refuse();
    }
    let bounded = values.iter().all(|&v| v <= unconditional * (1.0 + 1e-9));
    Ok(SlndScan {
        curve: ScalingCurve {
            abscissa: separations.to_vec(),
            values,
            stderr: None,
            fit,
            warnings,
        },
        unconditional,
        bounded_by_unconditional: bounded,
    })
}
