use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use super::{exponents, spatial_assertable, temporal_assertable};
use crate::error::{domain, Result};
use crate::fbm_kernel::eigenvalue;
use crate::field::{mode_covariances, EquatorRingSampler};
use crate::quadrature::QuadratureConfig;
use crate::spectral_sampler::{ModelParams, PointPathSampler};

/// For each `ε`, `max |v_{i+j} - v_i| / φ(j·step)` over lags `1 <= j <= ε/step`,
/// with `φ(d) = d^exponent √|ln d|`. Circular sequences wrap around.
pub fn sup_ratios(values: &[f64], step: f64, exponent: f64, epsilons: &[f64], circular: bool) -> Result<Vec<f64>> {
    if !(step > 0.0) || values.len() < 2 {
        return domain("modulus statistic needs a positive step and at least two values");
    }
    if epsilons.iter().any(|&e| !(e >= step && e < 1.0)) {
        return domain("each ε must satisfy step <= ε < 1");
    }
    let n = values.len();
    let max_lag = epsilons
        .iter()
        .map(|&e| (e / step * (1.0 + 1e-12)).floor() as usize)
        .max()
        .unwrap_or(0);
    let limit = if circular { n / 2 } else { n - 1 };
    if max_lag > limit {
        return domain(format!("ε spans {max_lag} steps but the data allow {limit}"));
    }
    // Best ratio per lag, then running maxima over lags.
    let per_lag: Vec<f64> = (1..=max_lag)
        .into_par_iter()
        .map(|j| {
            let m = if circular {
                (0..n).map(|i| (values[(i + j) % n] - values[i]).abs()).fold(0.0, f64::max)
            } else {
                (0..n - j).map(|i| (values[i + j] - values[i]).abs()).fold(0.0, f64::max)
            };
            let d = j as f64 * step;
            m / (d.powf(exponent) * d.ln().abs().sqrt())
        })
        .collect();
    Ok(epsilons
        .iter()
        .map(|&e| {
            let j = (e / step * (1.0 + 1e-12)).floor() as usize;
            per_lag[..j].iter().cloned().fold(0.0, f64::max)
        })
        .collect())
}

/// Sup-ratios per replicate and their median and quartiles at each `ε`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusReport {
    pub exponent: f64,
    pub epsilons: Vec<f64>,
    pub per_replicate: Vec<Vec<f64>>,
    pub median: Vec<f64>,
    pub lower_quartile: Vec<f64>,
    pub upper_quartile: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ModulusReport {
    fn from_rows(exponent: f64, epsilons: &[f64], rows: Vec<Vec<f64>>, warnings: Vec<String>) -> Self {
        let mut median = Vec::new();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for i in 0..epsilons.len() {
            let mut col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            col.sort_by(f64::total_cmp);
            median.push(quantile(&col, 0.5));
            lower.push(quantile(&col, 0.25));
            upper.push(quantile(&col, 0.75));
        }
        Self {
            exponent,
            epsilons: epsilons.to_vec(),
            per_replicate: rows,
            median,
            lower_quartile: lower,
            upper_quartile: upper,
            warnings,
        }
    }

    /// `(max median - min median) / min median` across `ε`.
    pub fn spread(&self) -> f64 {
        let lo = self.median.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.median.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / lo
    }

    /// Median at the smallest `ε` over median at the largest `ε`.
    pub fn decay_ratio(&self) -> f64 {
        let (mut small, mut large) = (0, 0);
        for (i, e) in self.epsilons.iter().enumerate() {
            if *e < self.epsilons[small] {
                small = i;
            }
            if *e > self.epsilons[large] {
                large = i;
            }
        }
        self.median[small] / self.median[large]
    }

    /// Header `epsilon,median,lower_quartile,upper_quartile`.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "epsilon,median,lower_quartile,upper_quartile")?;
        for i in 0..self.epsilons.len() {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e}",
                self.epsilons[i], self.median[i], self.lower_quartile[i], self.upper_quartile[i]
            )?;
        }
        Ok(())
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// Temporal statistic with `φ(d) = d^{η + shift} √|ln d|` on paths sampled every `step`.
pub fn modulus_statistic(
    params: &ModelParams,
    paths: &[Vec<f64>],
    step: f64,
    epsilons: &[f64],
    exponent_shift: f64,
) -> Result<ModulusReport> {
    if paths.is_empty() {
        return domain("no paths supplied");
    }
    let mut warnings: Vec<String> = temporal_assertable(params).into_iter().collect();
    let l = params.truncation as f64;
    if l * l * step < 10.0 {
        warnings.push(format!("resolution: L²·step = {:.3} < 10", l * l * step));
    }
    let exponent = exponents(params).eta + exponent_shift;
    let rows = paths
        .iter()
        .map(|p| sup_ratios(p, step, exponent, epsilons, false))
        .collect::<Result<Vec<_>>>()?;
    Ok(ModulusReport::from_rows(exponent, epsilons, rows, warnings))
}

/// Spatial statistic with `φ(d) = d^{γ + shift} √|ln d|` on equally spaced great-circle rings.
pub fn spatial_modulus_statistic(
    params: &ModelParams,
    rings: &[Vec<f64>],
    epsilons: &[f64],
    exponent_shift: f64,
) -> Result<ModulusReport> {
    if rings.is_empty() {
        return domain("no rings supplied");
    }
    let n = rings[0].len();
    if rings.iter().any(|r| r.len() != n) {
        return domain("rings differ in length");
    }
    let spacing = 2.0 * PI / n as f64;
    let mut warnings: Vec<String> = spatial_assertable(params).into_iter().collect();
    let lt = params.truncation as f64 * spacing;
    if lt < 10.0 {
        warnings.push(format!("resolution: L·spacing = {lt:.3} < 10"));
    }
    let exponent = exponents(params).gamma + exponent_shift;
    let rows = rings
        .iter()
        .map(|r| sup_ratios(r, spacing, exponent, epsilons, true))
        .collect::<Result<Vec<_>>>()?;
    Ok(ModulusReport::from_rows(exponent, epsilons, rows, warnings))
}

/// Samples `replicates` exact point paths on `steps` equal steps of `[0, T]` and
/// reports the temporal statistic for each exponent shift.
pub fn temporal_modulus_experiment(
    params: &ModelParams,
    steps: usize,
    epsilons: &[f64],
    replicates: u64,
    seed: u64,
    shifts: &[f64],
    quad: &QuadratureConfig,
) -> Result<Vec<ModulusReport>> {
    if replicates == 0 {
        return domain("at least one replicate is required");
    }
    let step = params.horizon / steps as f64;
    let sampler = PointPathSampler::new(params, step, steps, quad)?;
    let paths: Vec<Vec<f64>> = (0..replicates).into_par_iter().map(|r| sampler.sample(seed, r)).collect();
    shifts
        .iter()
        .map(|&s| modulus_statistic(params, &paths, step, epsilons, s))
        .collect()
}

/// Samples `replicates` exact equator rings at time `t` and reports the spatial
/// statistic for each exponent shift. With `smoothing = Some(k)` the field is
/// first passed through `(1 - Δ)^{k/2}`.
#[allow(clippy::too_many_arguments)]
pub fn spatial_modulus_experiment(
    params: &ModelParams,
    t: f64,
    ring_points: usize,
    epsilons: &[f64],
    replicates: u64,
    seed: u64,
    shifts: &[f64],
    smoothing: Option<f64>,
    quad: &QuadratureConfig,
) -> Result<Vec<ModulusReport>> {
    if replicates == 0 {
        return domain("at least one replicate is required");
    }
    let mut modes = mode_covariances(params, t, t, quad)?;
    if let Some(k) = smoothing {
        for (l, m) in modes.iter_mut().enumerate() {
            *m *= (1.0 + eigenvalue(l)).powf(k);
        }
    }
    let sampler = EquatorRingSampler::from_mode_variances(&modes, ring_points)?;
    let rings: Vec<Vec<f64>> = (0..replicates).into_par_iter().map(|r| sampler.sample(seed, r)).collect();
    shifts
        .iter()
        .map(|&s| spatial_modulus_statistic(params, &rings, epsilons, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_paths_give_zero() {
        let v = vec![3.0; 100];
        let r = sup_ratios(&v, 0.01, 0.5, &[0.05, 0.1], false).unwrap();
        assert_eq!(r, vec![0.0, 0.0]);
        let c = sup_ratios(&v, 0.01, 0.5, &[0.05], true).unwrap();
        assert_eq!(c, vec![0.0]);
    }

    #[test]
    fn ratios_match_a_direct_double_loop() {
        let v: Vec<f64> = (0..64).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let (step, e, eps) = (1.0 / 64.0, 0.6, [0.05, 0.2]);
        let got = sup_ratios(&v, step, e, &eps, false).unwrap();
        for (k, &ep) in eps.iter().enumerate() {
            let mut best = 0.0f64;
            for i in 0..64 {
                for j in i + 1..64 {
                    let d = (j - i) as f64 * step;
                    if d <= ep + 1e-12 {
                        best = best.max((v[j] - v[i]).abs() / (d.powf(e) * d.ln().abs().sqrt()));
                    }
                }
            }
            assert!((got[k] - best).abs() < 1e-14);
        }
        assert!(sup_ratios(&v, step, e, &[1.0], false).is_err());
    }

    #[test]
    fn report_summaries() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![2.0, 6.0]];
        let r = ModulusReport::from_rows(0.5, &[0.1, 0.2], rows, vec![]);
        assert_eq!(r.median, vec![2.0, 4.0]);
        assert_eq!(r.lower_quartile, vec![1.5, 3.0]);
        assert!((r.spread() - 1.0).abs() < 1e-15);
        assert!((r.decay_ratio() - 0.5).abs() < 1e-15);
    }
}
