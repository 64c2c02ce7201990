use std::f64::consts::PI;

use serde::Serialize;

use super::fit::ols;
use super::smoothness_borderline;
use crate::error::{domain, Result};
use crate::fbm_kernel::eigenvalue;
use crate::field::mode_covariances;
use crate::quadrature::QuadratureConfig;
use crate::spectral_sampler::{initial_spectrum, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyClass {
    Converged,
    Divergent,
    Inconclusive,
}

/// Partial sums of `Σ_ℓ w_ℓ (2ℓ+1)/(4π) U_ℓ(t,t)` with `w_ℓ = [ℓ(ℓ+1)]^order`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub order: u32,
    pub levels: Vec<usize>,
    pub partial_sums: Vec<f64>,
    /// Initial-condition part of each partial sum.
    pub initial_part: Vec<f64>,
    /// Summand at each level.
    pub increments: Vec<f64>,
    /// Fitted exponent of the summand in `ℓ + 1/2` over the upper three quarters of the range.
    pub summand_exponent: f64,
    /// Predicted summand exponent `2·order + 1 - α - 4H`.
    pub predicted_exponent: f64,
    pub class: EnergyClass,
    pub borderline: bool,
}

/// Summand exponents below this are summable with margin.
const CONVERGED_BELOW: f64 = -1.25;
/// Summand exponents above this are not summable with margin.
const DIVERGENT_ABOVE: f64 = -0.75;

/// Gradient (`order = 1`) or Laplacian (`order = 2`) energy partial sums.
pub fn gradient_energy(
    params: &ModelParams,
    t: f64,
    levels: &[usize],
    order: u32,
    quad: &QuadratureConfig,
) -> Result<EnergyReport> {
    if !(order == 1 || order == 2) {
        return domain("energy order must be 1 (gradient) or 2 (Laplacian)");
    }
    if !(t > 0.0) {
        return domain("energy needs t > 0");
    }
    if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) {
        return domain("levels must be nonempty and increasing");
    }
    let lmax = *levels.last().unwrap();
    if lmax < 16 {
        return domain("the exponent fit needs levels reaching at least 16");
    }
    let p = params.with_truncation(lmax)?;
    let modes = mode_covariances(&p, t, t, quad)?;
    let weight = |l: usize| eigenvalue(l).powi(order as i32) * (2 * l + 1) as f64 / (4.0 * PI);
    let summands: Vec<f64> = (0..=lmax).map(|l| weight(l) * modes[l]).collect();
    let initial: Vec<f64> = (0..=lmax)
        .map(|l| weight(l) * initial_spectrum(&p, l) * (-2.0 * eigenvalue(l) * t).exp())
        .collect();

    let mut partial_sums = Vec::with_capacity(levels.len());
    let mut initial_part = Vec::with_capacity(levels.len());
    let (mut s, mut si, mut next) = (0.0, 0.0, 0);
    for &level in levels {
        while next <= level {
            s += summands[next];
            si += initial[next];
            next += 1;
        }
        partial_sums.push(s);
        initial_part.push(si);
    }
    let from = (lmax / 4).max(1);
    let lx: Vec<f64> = (from..=lmax).map(|l| (l as f64 + 0.5).ln()).collect();
    let ly: Vec<f64> = (from..=lmax).map(|l| summands[l].ln()).collect();
    let summand_exponent = ols(&lx, &ly)?.0;
    let class = if summand_exponent < CONVERGED_BELOW {
        EnergyClass::Converged
    } else if summand_exponent > DIVERGENT_ABOVE {
        EnergyClass::Divergent
    } else {
        EnergyClass::Inconclusive
    };
    let threshold_shift = if order == 1 { 0.0 } else { 2.0 };
    let borderline = order == 1 && smoothness_borderline(params)
        || order == 2 && (params.alpha + 4.0 * params.hurst - 4.0 - threshold_shift).abs() < 1e-12;
    Ok(EnergyReport {
        order,
        levels: levels.to_vec(),
        partial_sums,
        initial_part,
        increments: levels.iter().map(|&l| summands[l]).collect(),
        summand_exponent,
        predicted_exponent: 2.0 * order as f64 + 1.0 - params.alpha - 4.0 * params.hurst,
        class: if borderline { EnergyClass::Inconclusive } else { class },
        borderline,
    })
}
