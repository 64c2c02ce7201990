//! Verification of the regularity laws: spectrum and truncation decay,
//! variogram exponents, conditional-variance scaling, gradient-energy
//! thresholds and modulus-of-continuity statistics.

mod energy;
mod fit;
mod modulus;
mod slnd;
mod spectrum;
mod variogram;

pub use energy::{gradient_energy, EnergyClass, EnergyReport};
pub use fit::{fit_power_law, ols, ExponentFit, ScalingCurve};
pub use modulus::{
    modulus_statistic, spatial_modulus_experiment, spatial_modulus_statistic, sup_ratios, temporal_modulus_experiment,
    ModulusReport,
};
pub use slnd::{
    conditional_variance, spatial_conditional_variance, spatial_slnd_scan, temporal_slnd_scan, SlndScan,
};
pub use spectrum::{
    initial_tail_decays_superpolynomially, spectrum_slope, spectrum_slope_monte_carlo, truncation_error,
    TruncationReport, TruncationRow,
};
pub use variogram::{spatial_variogram, temporal_variogram, VariogramMode};

use serde::Serialize;

use crate::error::{domain, Result};
use crate::spectral_sampler::ModelParams;

/// Temporal exponent `η` and spatial exponent `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityExponents {
    pub eta: f64,
    pub gamma: f64,
}

impl RegularityExponents {
    pub fn new(hurst: f64, alpha: f64) -> Result<Self> {
        if !(hurst > 0.5 && hurst < 1.0) {
            return domain(format!("Hurst index {hurst} outside (1/2, 1)"));
        }
        if !(alpha > 0.0) {
            return domain(format!("α = {alpha} must be positive"));
        }
        Ok(Self {
            eta: hurst - ((2.0 - alpha) / 4.0).max(0.0),
            gamma: alpha / 2.0 - 1.0 + 2.0 * hurst,
        })
    }

    pub fn spatial_in_range(&self) -> bool {
        self.gamma > 0.0 && self.gamma < 1.0
    }
}

/// `η = H - max{(2-α)/4, 0}`, `γ = α/2 - 1 + 2H`.
pub fn exponents(params: &ModelParams) -> RegularityExponents {
    RegularityExponents::new(params.hurst, params.alpha).expect("validated parameters")
}

/// `s^γ` for `γ < 1`, `s √|ln s|` for `γ = 1`, `s` for `γ > 1`, on `0 < s < 1`.
pub fn rho_gamma(s: f64, gamma: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return domain(format!("ρ_γ is evaluated on (0, 1), got s = {s}"));
    }
    Ok(if gamma < 1.0 {
        s.powf(gamma)
    } else if gamma == 1.0 {
        s * s.ln().abs().sqrt()
    } else {
        s
    })
}

/// Whether exponent assertions are allowed for the temporal laws: `u₀ ≡ 0` or `β > 4H + 2`.
pub(crate) fn temporal_assertable(params: &ModelParams) -> Option<String> {
    if params.d0 > 0.0 && params.beta <= 4.0 * params.hurst + 2.0 {
        Some(format!(
            "β = {} ≤ 4H + 2 = {} with D₀ > 0: exponent assertion refused, data are exploratory",
            params.beta,
            4.0 * params.hurst + 2.0
        ))
    } else {
        None
    }
}

/// Whether exponent assertions are allowed for the spatial laws: `u₀ ≡ 0` and `γ ∈ (0, 1)`.
pub(crate) fn spatial_assertable(params: &ModelParams) -> Option<String> {
    let g = exponents(params).gamma;
    if params.d0 > 0.0 {
        Some("D₀ > 0: spatial exponent assertion refused, data are exploratory".into())
    } else if !(g > 0.0 && g < 1.0) {
        Some(format!("γ = {g} outside (0, 1): spatial exponent assertion refused"))
    } else {
        None
    }
}

/// Borderline `α + 4H = 4` is excluded from the smoothness laws.
pub(crate) fn smoothness_borderline(params: &ModelParams) -> bool {
    (params.alpha + 4.0 * params.hurst - 4.0).abs() < 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exponent_examples() {
        let e = RegularityExponents::new(0.75, 2.0).unwrap();
        assert_eq!(e.eta, 0.75);
        assert_eq!(RegularityExponents::new(0.75, 1.0).unwrap().eta, 0.5);
        assert!((RegularityExponents::new(0.6, 1.0).unwrap().gamma - 0.7).abs() < 1e-15);
        assert!(RegularityExponents::new(0.6, 0.5).unwrap().spatial_in_range());
        assert!(!RegularityExponents::new(0.9, 2.5).unwrap().spatial_in_range());
        assert!(RegularityExponents::new(0.4, 1.0).is_err());
    }

    #[test]
    fn rho_examples() {
        assert!((rho_gamma(0.25, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((rho_gamma((-1f64).exp(), 1.0).unwrap() - 0.367_879_4).abs() < 1e-7);
        assert_eq!(rho_gamma(0.3, 1.5).unwrap(), 0.3);
        assert!(rho_gamma(1.0, 0.5).is_err());
        assert!(rho_gamma(0.0, 0.5).is_err());
    }

    // The γ = 1 branch carries √|ln s| ≈ 1.52 at s = 0.1, so the three branches
    // do not join continuously there; this records the actual jump.
    #[test]
    fn rho_branches_near_one() {
        let below = rho_gamma(0.1, 1.0 - 1e-6).unwrap();
        let at = rho_gamma(0.1, 1.0).unwrap();
        let above = rho_gamma(0.1, 1.0 + 1e-6).unwrap();
        assert!((below / above - 1.0).abs() < 1e-3);
        assert!((at / above - 0.1f64.ln().abs().sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn eta_nondecreasing_in_alpha(h in 0.51f64..0.99, a in 0.05f64..5.0, da in 0.0f64..2.0) {
            let lo = RegularityExponents::new(h, a).unwrap();
            let hi = RegularityExponents::new(h, a + da).unwrap();
            prop_assert!(hi.eta >= lo.eta);
            prop_assert!(lo.eta > 0.0 && lo.eta <= h);
        }
    }
}
