//! Covariance machinery for fractional Brownian motion with Hurst index `H > 1/2`.
//!
//! Everything here uses the unit-variance normalization `E|B(t)|² = t^{2H}`:
//! the time-domain kernel is `α_H |u - v|^{2H-2}` with `α_H = H(2H - 1)`, and
//! the Fourier-side constant is `α_H c_H` with
//! `c_H = Γ(H - 1/2) / (2^{2(1-H)} √π Γ(1 - H))`.
//!
//! Two independent engines compute the variance `σ_ℓ²(t)` of the
//! exponentially smoothed fBm integral `∫_0^t e^{-ℓ(ℓ+1)(t-s)} dB(s)`:
//! a time-domain double integral reduced to a one-dimensional weakly singular
//! integral, and a frequency-domain integral of `|ĝ_ℓ(t, τ)|² |τ|^{1-2H}`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{domain, Result};
use crate::quadrature::{integrate, integrate_power_weighted, QuadratureConfig};

/// Normalization constants attached to a Hurst index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbmConvention {
    hurst: f64,
    kernel_constant: f64,
    spectral_constant: f64,
}

impl FbmConvention {
    pub fn new(hurst: f64) -> Result<Self> {
        if !(hurst > 0.5 && hurst < 1.0) {
            return domain(format!("Hurst index {hurst} outside (1/2, 1)"));
        }
        let kernel_constant = hurst * (2.0 * hurst - 1.0);
        let spectral_constant = gamma(hurst - 0.5)
            / (2f64.powf(2.0 * (1.0 - hurst)) * std::f64::consts::PI.sqrt() * gamma(1.0 - hurst));
        Ok(Self {
            hurst,
            kernel_constant,
            spectral_constant,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// `α_H = H(2H - 1)`.
    pub fn kernel_constant(&self) -> f64 {
        self.kernel_constant
    }

    /// `c_H` as it multiplies the unnormalized kernel `|u - v|^{2H-2}`.
    pub fn spectral_constant(&self) -> f64 {
        self.spectral_constant
    }

    /// Frequency-side constant matching the unit-variance normalization, `α_H c_H`.
    pub fn fourier_constant(&self) -> f64 {
        self.kernel_constant * self.spectral_constant
    }
}

/// The kernel `g(λ) = e^{-rate (upper - λ)}` on `[0, upper]`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpKernelSpec {
    pub decay_rate: f64,
    pub upper_time: f64,
}

impl ExpKernelSpec {
    pub fn new(decay_rate: f64, upper_time: f64) -> Result<Self> {
        if !(decay_rate >= 0.0 && decay_rate.is_finite()) {
            return domain(format!("decay rate {decay_rate} must be finite and nonnegative"));
        }
        if !(upper_time >= 0.0 && upper_time.is_finite()) {
            return domain(format!("kernel upper time {upper_time} must be finite and nonnegative"));
        }
        Ok(Self {
            decay_rate,
            upper_time,
        })
    }

    /// Kernel of harmonic degree `ℓ`: rate `ℓ(ℓ+1)`.
    pub fn for_degree(degree: usize, upper_time: f64) -> Result<Self> {
        Self::new(eigenvalue(degree), upper_time)
    }
}

/// `ℓ(ℓ+1)`, minus the Laplace–Beltrami eigenvalue of degree ℓ.
#[inline]
pub fn eigenvalue(degree: usize) -> f64 {
    let l = degree as f64;
    l * (l + 1.0)
}

/// fBm covariance `R_H(t, s) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2`.
pub fn r_cov(t: f64, s: f64, conv: &FbmConvention) -> Result<f64> {
    if !(t >= 0.0 && s >= 0.0) {
        return domain(format!("fBm covariance needs nonnegative times, got ({t}, {s})"));
    }
    let h2 = 2.0 * conv.hurst();
    Ok(0.5 * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2)))
}

/// `α_H ∬ g_a(λ) g_b(ξ) |λ - ξ|^{2H-2} dλ dξ`.
///
/// With `u = λ - ξ` the inner integral over the remaining variable is an
/// elementary exponential integral `E(u)`, leaving `α_H ∫ |u|^{2H-2} E(u) du`
/// over `[-s, t]`. Each half-line piece is integrated with the power weight
/// removed analytically; `E` has a kink at `u = t - s`, used as a break point.
pub fn weighted_inner(
    a: &ExpKernelSpec,
    b: &ExpKernelSpec,
    conv: &FbmConvention,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let (k1, t) = (a.decay_rate, a.upper_time);
    let (k2, s) = (b.decay_rate, b.upper_time);
    if t == 0.0 || s == 0.0 {
        return Ok(0.0);
    }
    let d = t - s;
    let kk = k1 + k2;
    let inner = |u: f64| -> f64 {
        let lo = (d - u).max(0.0);
        let hi = t.min(t - u);
        let w = hi - lo;
        if w <= 0.0 {
            return 0.0;
        }
        let exponent = if u >= d { -k2 * (u - d) } else { -k1 * (d - u) };
        let width = if kk == 0.0 {
            w
        } else {
            -(-kk * w).exp_m1() / kk
        };
        exponent.exp() * width
    };
    let power = 2.0 * conv.hurst() - 2.0;
    let kmax = k1.max(k2);
    let positive = integrate_power_weighted(&inner, power, t, &feature_breaks(d, kmax, t), quad)?;
    let negative = integrate_power_weighted(|v| inner(-v), power, s, &feature_breaks(-d, kmax, s), quad)?;
    Ok(conv.kernel_constant() * (positive.value + negative.value))
}

/// The kink location plus a few multiples of the decay length on either side.
fn feature_breaks(kink: f64, rate: f64, upper: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if kink > 0.0 && kink < upper {
        out.push(kink);
    }
    if rate > 0.0 {
        let anchor = kink.max(0.0);
        for mult in [1.0, 4.0, 16.0, 64.0] {
            let off = mult / rate;
            for p in [anchor + off, anchor - off] {
                if p > 0.0 && p < upper {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// `σ_ℓ²(t)`: variance of `∫_0^t e^{-ℓ(ℓ+1)(t-s)} dB(s)` by the time-domain engine.
pub fn sigma_l_sq(degree: usize, t: f64, conv: &FbmConvention, quad: &QuadratureConfig) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("σ_ℓ²(t) needs t > 0, got {t}"));
    }
    let g = ExpKernelSpec::for_degree(degree, t)?;
    weighted_inner(&g, &g, conv, quad)
}

/// `c_{3,3} = ∫_ℝ |τ|^{1-2H} / (1 + τ²) dτ`, by quadrature.
///
/// Folding `[1, ∞)` onto `(0, 1]` with `τ = 1/v` gives
/// `2 ∫_0^1 (v^{1-2H} + v^{2H-1}) / (1 + v²) dv`.
pub fn c33(conv: &FbmConvention) -> Result<f64> {
    c33_with(conv, &QuadratureConfig::default())
}

fn c33_with(conv: &FbmConvention, quad: &QuadratureConfig) -> Result<f64> {
    let h = conv.hurst();
    if h < 0.5 + 1e-3 {
        return domain(format!("c33 is only evaluated for H >= 0.501, got {h}"));
    }
    let lorentz = |v: f64| 1.0 / (1.0 + v * v);
    let near = integrate_power_weighted(lorentz, 1.0 - 2.0 * h, 1.0, &[], quad)?;
    let far = integrate_power_weighted(lorentz, 2.0 * h - 1.0, 1.0, &[], quad)?;
    Ok(2.0 * (near.value + far.value))
}

/// `σ_ℓ²(t)` by the frequency-domain engine, `ℓ >= 1`.
///
/// `|ĝ_ℓ(t, τ)|² = (1 - 2e^{-kt} cos tτ + e^{-2kt}) / (k² + τ²)` with
/// `k = ℓ(ℓ+1)`. The non-oscillatory part scales to `c_{3,3} k^{-2H}`; the
/// oscillatory part `∫_0^∞ cos(tτ) τ^{1-2H} / (k² + τ²) dτ` is summed over
/// half periods as an alternating series with completely monotone terms and
/// accelerated (Cohen–Rodriguez Villegas–Zagier), so no frequency cutoff is
/// needed.
pub fn sigma_l_sq_fourier(
    degree: usize,
    t: f64,
    conv: &FbmConvention,
    quad: &QuadratureConfig,
) -> Result<f64> {
    if degree == 0 {
        return domain("frequency-domain engine is undefined for ℓ = 0");
    }
    if !(t > 0.0) {
        return domain(format!("σ_ℓ²(t) needs t > 0, got {t}"));
    }
    let h = conv.hurst();
    let k = eigenvalue(degree);
    let damp = (-k * t).exp();
    let steady = c33_with(conv, quad)? * k.powf(-2.0 * h);
    let mut total = (1.0 + damp * damp) * steady;
    if damp > 1e-30 {
        total -= 4.0 * damp * cosine_transform(k, t, h, steady, quad)?;
    }
    Ok(conv.fourier_constant() * total)
}

/// `∫_0^∞ cos(tτ) τ^{1-2H} / (k² + τ²) dτ`.
fn cosine_transform(k: f64, t: f64, h: f64, scale: f64, quad: &QuadratureConfig) -> Result<f64> {
    let f = |tau: f64| 1.0 / (k * k + tau * tau);
    let half = std::f64::consts::PI / t;
    let first_zero = 0.5 * half;
    let head = integrate_power_weighted(|tau| (t * tau).cos() * f(tau), 1.0 - 2.0 * h, first_zero, &[], quad)?;
    let weight = |tau: f64| (t * tau).cos() * tau.powf(1.0 - 2.0 * h) * f(tau);
    // Terms a_j = |∫ over the j-th half period|, alternating with S_0 < 0.
    let terms = 48;
    let mut a = Vec::with_capacity(terms);
    for j in 0..terms {
        let lo = first_zero + j as f64 * half;
        let s = integrate(weight, lo, lo + half, quad)?;
        a.push(if j % 2 == 0 { -s.value } else { s.value });
    }
    let tail = -alternating_sum(&a);
    let check = -alternating_sum(&a[..terms - 8]);
    let requested = quad.rel_tol * scale;
    if (tail - check).abs() > requested.max(quad.abs_tol) * 10.0 {
        return Err(crate::Error::Convergence {
            estimate: head.value + tail,
            achieved: (tail - check).abs(),
            requested,
        });
    }
    Ok(head.value + tail)
}

/// `Σ (-1)^j a_j` for a completely monotone sequence `a_j`.
fn alternating_sum(a: &[f64]) -> f64 {
    let n = a.len();
    let mut d = (3.0 + 8f64.sqrt()).powi(n as i32);
    d = 0.5 * (d + 1.0 / d);
    let mut b = -1.0;
    let mut c = -d;
    let mut s = 0.0;
    for (k, &ak) in a.iter().enumerate() {
        c = b - c;
        s += c * ak;
        let kf = k as f64;
        let nf = n as f64;
        b *= (kf + nf) * (kf - nf) / ((kf + 0.5) * (kf + 1.0));
    }
    s / d
}

/// Mode covariance `U_ℓ(t, s) = e^{-k(t+s)} D_ℓ + C_ℓ α_H ∬ g_ℓ(t, λ) g_ℓ(s, ξ) |λ - ξ|^{2H-2}`.
#[allow(clippy::too_many_arguments)]
pub fn u_cov(
    degree: usize,
    t: f64,
    s: f64,
    power: f64,
    initial: f64,
    conv: &FbmConvention,
    quad: &QuadratureConfig,
) -> Result<f64> {
    if !(t >= 0.0 && s >= 0.0) {
        return domain(format!("mode covariance needs nonnegative times, got ({t}, {s})"));
    }
    if !(power >= 0.0 && initial >= 0.0) {
        return domain("C_ℓ and D_ℓ must be nonnegative");
    }
    let k = eigenvalue(degree);
    let init_part = if initial > 0.0 {
        initial * (-k * (t + s)).exp()
    } else {
        0.0
    };
    if power == 0.0 {
        return Ok(init_part);
    }
    let a = ExpKernelSpec::new(k, t)?;
    let b = ExpKernelSpec::new(k, s)?;
    Ok(init_part + power * weighted_inner(&a, &b, conv, quad)?)
}

/// Saturated (large-time) value of `σ_ℓ²`, `α_H c_H c_{3,3} k^{-2H}`.
///
/// For `ℓ(ℓ+1) t >= 50` the time-dependent corrections are below `e^{-50}`
/// relative, so this equals `σ_ℓ²(t)` to double precision.
pub fn sigma_l_sq_saturated(degree: usize, conv: &FbmConvention, c33_value: f64) -> f64 {
    conv.fourier_constant() * c33_value * eigenvalue(degree).powf(-2.0 * conv.hurst())
}
