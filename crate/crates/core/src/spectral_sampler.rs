//! Exact Gaussian sampling of harmonic coefficient paths.
//!
//! For each `(ℓ, m)` the solution coefficient `u_ℓm(t)` is a centered Gaussian
//! process with covariance `U_ℓ(t, s)`, independent across `m >= 0` and `ℓ`.
//! The noise and initial-condition parts are drawn from separate streams and
//! combined; the noise part is `chol(C_ℓ I_ℓ) z` over the time grid.
//!
//! Random streams: one root seed, then a ChaCha stream id derived from
//! `(ℓ, m, replicate, purpose)`. Any task can regenerate its own numbers
//! without coordinating with the others.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fbm_kernel::{eigenvalue, r_cov, u_cov, weighted_inner, ExpKernelSpec, FbmConvention};
use crate::harmonics::{tri_index, tri_len};
use crate::quadrature::{integrate_with_breaks, QuadratureConfig};

/// Bounded prefactor `Υ(ℓ)` of the noise spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Upsilon {
    Constant { value: f64 },
    /// `even` on even degrees, `odd` on odd degrees.
    Alternating { even: f64, odd: f64 },
}

impl Default for Upsilon {
    fn default() -> Self {
        Upsilon::Constant { value: 1.0 }
    }
}

impl Upsilon {
    pub fn at(&self, degree: usize) -> f64 {
        match *self {
            Upsilon::Constant { value } => value,
            Upsilon::Alternating { even, odd } => {
                if degree % 2 == 0 {
                    even
                } else {
                    odd
                }
            }
        }
    }

    fn extremes(&self) -> (f64, f64) {
        match *self {
            Upsilon::Constant { value } => (value, value),
            Upsilon::Alternating { even, odd } => (even.min(odd), even.max(odd)),
        }
    }
}

/// Model inputs: `C_ℓ = Υ(ℓ)(ℓ+1/2)^{-α}`, `D_ℓ = D₀(ℓ+1/2)^{-β}`, horizon `T`, truncation `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub hurst: f64,
    pub alpha: f64,
    #[serde(default)]
    pub upsilon: Upsilon,
    #[serde(default = "one")]
    pub c0: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub d0: f64,
    #[serde(default = "one")]
    pub horizon: f64,
    pub truncation: usize,
}

fn one() -> f64 {
    1.0
}

fn default_beta() -> f64 {
    5.0
}

impl ModelParams {
    /// Noise-only model (`D₀ = 0`, `Υ ≡ 1`, `T = 1`).
    pub fn new(hurst: f64, alpha: f64, truncation: usize) -> Result<Self> {
        let p = Self {
            hurst,
            alpha,
            upsilon: Upsilon::default(),
            c0: 1.0,
            beta: default_beta(),
            d0: 0.0,
            horizon: 1.0,
            truncation,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_initial(mut self, d0: f64, beta: f64) -> Result<Self> {
        self.d0 = d0;
        self.beta = beta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_upsilon(mut self, upsilon: Upsilon, c0: f64) -> Result<Self> {
        self.upsilon = upsilon;
        self.c0 = c0;
        self.validate()?;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        self.horizon = horizon;
        self.validate()?;
        Ok(self)
    }

    pub fn with_truncation(mut self, truncation: usize) -> Result<Self> {
        self.truncation = truncation;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        FbmConvention::new(self.hurst)?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return domain(format!("α = {} must be positive", self.alpha));
        }
        if !(self.c0 >= 1.0 && self.c0.is_finite()) {
            return domain(format!("c₀ = {} must be at least 1", self.c0));
        }
        let (lo, hi) = self.upsilon.extremes();
        if !(lo >= 1.0 / self.c0 && hi <= self.c0) {
            return domain(format!("Υ range [{lo}, {hi}] escapes [1/c₀, c₀] with c₀ = {}", self.c0));
        }
        if !(self.d0 >= 0.0 && self.d0.is_finite()) {
            return domain(format!("D₀ = {} must be nonnegative", self.d0));
        }
        if self.d0 > 0.0 && !(self.beta > 4.0) {
            return domain(format!("β = {} must exceed 4 when D₀ > 0", self.beta));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return domain(format!("horizon T = {} must be positive", self.horizon));
        }
        if self.truncation == 0 {
            return domain("truncation L must be a positive integer");
        }
        if self.truncation >= 1 << 16 {
            return domain("truncation L must be below 65536");
        }
        Ok(())
    }

    pub fn convention(&self) -> FbmConvention {
        FbmConvention::new(self.hurst).expect("validated Hurst index")
    }
}

/// `C_ℓ = Υ(ℓ)(ℓ + 1/2)^{-α}`.
pub fn power_coefficient(params: &ModelParams, degree: usize) -> f64 {
    params.upsilon.at(degree) * (degree as f64 + 0.5).powf(-params.alpha)
}

/// `D_ℓ = D₀(ℓ + 1/2)^{-β}`.
pub fn initial_spectrum(params: &ModelParams, degree: usize) -> f64 {
    if params.d0 == 0.0 {
        0.0
    } else {
        params.d0 * (degree as f64 + 0.5).powf(-params.beta)
    }
}

/// Strictly increasing sample times in `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid(Vec<f64>);

impl TimeGrid {
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self> {
        if times.is_empty() {
            return domain("time grid must be nonempty");
        }
        if times.iter().any(|&t| !(0.0..=horizon).contains(&t)) {
            return domain(format!("time grid must lie in [0, {horizon}]"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return domain("time grid must be strictly increasing");
        }
        Ok(Self(times))
    }

    /// `n` equal steps of `T/n`, excluding 0: `T/n, 2T/n, ..., T`.
    pub fn uniform(n: usize, horizon: f64) -> Result<Self> {
        Self::new((1..=n).map(|i| horizon * i as f64 / n as f64).collect(), horizon)
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

const JITTER_LADDER: [f64; 4] = [0.0, 1e-14, 1e-12, 1e-10];

/// Lower-triangular factor with the diagonal jitter that was needed.
#[derive(Debug, Clone)]
pub struct Factor {
    pub lower: DMatrix<f64>,
    pub jitter: f64,
}

/// Symmetric positive semidefinite matrix with a lazily computed factor.
#[derive(Debug)]
pub struct CovarianceMatrix {
    matrix: DMatrix<f64>,
    factor: OnceLock<std::result::Result<Factor, Error>>,
}

impl CovarianceMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return domain("covariance must be square");
        }
        let n = matrix.nrows();
        let scale = matrix.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                    return domain(format!("covariance not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(Self {
            matrix,
            factor: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Cholesky factor after the smallest sufficient jitter from
    /// `{0, 1e-14, 1e-12, 1e-10} × trace / n`. A zero matrix factors to zero.
    pub fn factor(&self) -> Result<&Factor> {
        self.factor
            .get_or_init(|| cholesky_with_jitter(&self.matrix))
            .as_ref()
            .map_err(Clone::clone)
    }
}

fn cholesky_with_jitter(m: &DMatrix<f64>) -> std::result::Result<Factor, Error> {
    let n = m.nrows();
    let trace = m.trace();
    if trace == 0.0 && m.iter().all(|&v| v == 0.0) {
        return Ok(Factor {
            lower: DMatrix::zeros(n, n),
            jitter: 0.0,
        });
    }
    let sym = 0.5 * (m + m.transpose());
    for rel in JITTER_LADDER {
        let jitter = rel * trace / n as f64;
        let mut a = sym.clone();
        for i in 0..n {
            a[(i, i)] += jitter;
        }
        if let Some(ch) = a.cholesky() {
            return Ok(Factor {
                lower: ch.l(),
                jitter,
            });
        }
    }
    Err(Error::Indefinite {
        dim: n,
        min_eigenvalue: sym.symmetric_eigenvalues().min(),
        trace,
    })
}

/// `[U_ℓ(t_i, t_j)]` over a time grid.
pub fn build_mode_covariance(
    params: &ModelParams,
    degree: usize,
    grid: &TimeGrid,
    quad: &QuadratureConfig,
) -> Result<CovarianceMatrix> {
    let c = power_coefficient(params, degree);
    let d = initial_spectrum(params, degree);
    covariance_of(grid, |t, s| u_cov(degree, t, s, c, d, &params.convention(), quad))
}

fn covariance_of(grid: &TimeGrid, f: impl Fn(f64, f64) -> Result<f64>) -> Result<CovarianceMatrix> {
    let t = grid.times();
    let n = t.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = f(t[i], t[j])?;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    CovarianceMatrix::new(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub(crate) enum Purpose {
    Noise = 0,
    Initial = 1,
    PointPath = 2,
    Ring = 3,
}

/// Stream for one `(ℓ, m, replicate, purpose)` cell under a root seed.
pub(crate) fn substream(seed: u64, degree: usize, order: usize, replicate: u64, purpose: Purpose) -> ChaCha8Rng {
    debug_assert!(degree < 1 << 16 && order < 1 << 16 && replicate < 1 << 30);
    let id = (degree as u64) << 48 | (order as u64) << 32 | replicate << 2 | purpose as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)))
}

/// Coefficient paths `u_ℓm(t_i)` for `0 <= m <= ℓ <= L`; negative orders are
/// read out through `u_{ℓ,-m} = (-1)^m conj(u_ℓm)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPathSet {
    lmax: usize,
    times: Vec<f64>,
    values: Vec<Complex64>,
    pub replicate: u64,
    pub seed: u64,
}

impl CoefficientPathSet {
    pub fn zeros(lmax: usize, times: Vec<f64>) -> Self {
        let n = times.len();
        Self {
            lmax,
            times,
            values: vec![Complex64::new(0.0, 0.0); tri_len(lmax) * n],
            replicate: 0,
            seed: 0,
        }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Path for `0 <= m <= ℓ`.
    pub fn path(&self, degree: usize, order: usize) -> &[Complex64] {
        let n = self.times.len();
        let start = tri_index(degree, order) * n;
        &self.values[start..start + n]
    }

    pub fn path_mut(&mut self, degree: usize, order: usize) -> &mut [Complex64] {
        let n = self.times.len();
        let start = tri_index(degree, order) * n;
        &mut self.values[start..start + n]
    }

    /// Coefficient at any `|m| <= ℓ` and time index.
    pub fn get(&self, degree: usize, order: i64, time_index: usize) -> Complex64 {
        let m = order.unsigned_abs() as usize;
        let v = self.path(degree, m)[time_index];
        match (order < 0, m % 2) {
            (false, _) => v,
            (true, 0) => v.conj(),
            (true, _) => -v.conj(),
        }
    }

    /// Multiplies every coefficient of degree ℓ by `f(ℓ)`.
    pub fn scale_by_degree(&self, f: impl Fn(usize) -> f64) -> Self {
        let mut out = self.clone();
        let n = self.times.len();
        for l in 0..=self.lmax {
            let w = f(l);
            let start = tri_index(l, 0) * n;
            let end = tri_index(l, l) * n + n;
            out.values[start..end].iter_mut().for_each(|v| *v *= w);
        }
        out
    }

    /// `a·self + b·other` for sets on the same grid and truncation.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.lmax != other.lmax || self.times != other.times {
            return domain("coefficient sets differ in truncation or time grid");
        }
        let mut out = self.clone();
        for (o, v) in out.values.iter_mut().zip(&other.values) {
            *o = *o * a + v * b;
        }
        Ok(out)
    }

    /// Writes rows `l,m,t,re,im,replicate` for `m >= 0`, header first when asked.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(w, "l,m,t,re,im,replicate")?;
        }
        for (l, m, i, v) in self.entries() {
            writeln!(w, "{l},{m},{:e},{:e},{:e},{}", self.times[i], v.re, v.im, self.replicate)?;
        }
        Ok(())
    }

    /// Iterates `(ℓ, m, time index, value)` over `m >= 0`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, Complex64)> + '_ {
        let n = self.times.len();
        (0..=self.lmax).flat_map(move |l| {
            (0..=l).flat_map(move |m| (0..n).map(move |i| (l, m, i, self.path(l, m)[i])))
        })
    }
}

struct ModeFactors {
    noise: Factor,
    initial: Vec<f64>,
}

/// Precomputed per-degree factors over a fixed grid; produces replicates on demand.
pub struct SpectralSampler {
    params: ModelParams,
    grid: TimeGrid,
    modes: Arc<Vec<ModeFactors>>,
}

impl SpectralSampler {
    pub fn new(params: &ModelParams, grid: &TimeGrid, quad: &QuadratureConfig) -> Result<Self> {
        params.validate()?;
        if grid.times().last().copied().unwrap_or(0.0) > params.horizon {
            return domain("time grid exceeds the model horizon");
        }
        let conv = params.convention();
        let modes = (0..=params.truncation)
            .into_par_iter()
            .map(|l| {
                let c = power_coefficient(params, l);
                let noise = covariance_of(grid, |t, s| u_cov(l, t, s, c, 0.0, &conv, quad))?;
                let d = initial_spectrum(params, l);
                let k = eigenvalue(l);
                let initial = grid.times().iter().map(|&t| d.sqrt() * (-k * t).exp()).collect();
                Ok(ModeFactors {
                    noise: noise.factor()?.clone(),
                    initial,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params: *params,
            grid: grid.clone(),
            modes: Arc::new(modes),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Largest jitter used by any degree's factorization.
    pub fn max_jitter(&self) -> f64 {
        self.modes.iter().map(|m| m.noise.jitter).fold(0.0, f64::max)
    }

    /// One replicate. Bit-identical for identical `(params, grid, seed, replicate)`.
    pub fn sample(&self, seed: u64, replicate: u64) -> CoefficientPathSet {
        let n = self.grid.len();
        let lmax = self.params.truncation;
        let mut out = CoefficientPathSet::zeros(lmax, self.grid.times().to_vec());
        out.seed = seed;
        out.replicate = replicate;
        for l in 0..=lmax {
            let mode = &self.modes[l];
            let has_initial = mode.initial.iter().any(|&v| v != 0.0);
            for m in 0..=l {
                let mut noise_rng = substream(seed, l, m, replicate, Purpose::Noise);
                let mut init_rng = substream(seed, l, m, replicate, Purpose::Initial);
                let path = out.path_mut(l, m);
                if m == 0 {
                    let re = &mode.noise.lower * normals(&mut noise_rng, n);
                    let xi: f64 = if has_initial { StandardNormal.sample(&mut init_rng) } else { 0.0 };
                    for i in 0..n {
                        path[i] = Complex64::new(re[i] + xi * mode.initial[i], 0.0);
                    }
                } else {
                    let half = std::f64::consts::FRAC_1_SQRT_2;
                    let re = &mode.noise.lower * normals(&mut noise_rng, n);
                    let im = &mode.noise.lower * normals(&mut noise_rng, n);
                    let (xr, xi): (f64, f64) = if has_initial {
                        (StandardNormal.sample(&mut init_rng), StandardNormal.sample(&mut init_rng))
                    } else {
                        (0.0, 0.0)
                    };
                    for i in 0..n {
                        path[i] = Complex64::new(
                            half * (re[i] + xr * mode.initial[i]),
                            half * (im[i] + xi * mode.initial[i]),
                        );
                    }
                }
            }
        }
        out
    }
}

/// Replicates `0..replicates` of the solution's coefficient paths.
pub fn sample_coefficient_paths(
    params: &ModelParams,
    grid: &TimeGrid,
    seed: u64,
    replicates: u64,
    quad: &QuadratureConfig,
) -> Result<impl Iterator<Item = CoefficientPathSet>> {
    if replicates == 0 {
        return domain("at least one replicate is required");
    }
    let sampler = SpectralSampler::new(params, grid, quad)?;
    Ok((0..replicates).map(move |r| sampler.sample(seed, r)))
}

/// Noise coefficients `√C_ℓ β_ℓm(t_i)`, temporal covariance `C_ℓ R_H(t_i, t_j)`.
pub fn sample_noise_coefficients(
    params: &ModelParams,
    grid: &TimeGrid,
    seed: u64,
    replicate: u64,
) -> Result<CoefficientPathSet> {
    params.validate()?;
    let conv = params.convention();
    let cov = covariance_of(grid, |t, s| r_cov(t, s, &conv))?;
    let factor = cov.factor()?;
    let n = grid.len();
    let lmax = params.truncation;
    let mut out = CoefficientPathSet::zeros(lmax, grid.times().to_vec());
    out.seed = seed;
    out.replicate = replicate;
    for l in 0..=lmax {
        let amp = power_coefficient(params, l).sqrt();
        for m in 0..=l {
            let mut rng = substream(seed, l, m, replicate, Purpose::Noise);
            let path = out.path_mut(l, m);
            let re = &factor.lower * normals(&mut rng, n);
            if m == 0 {
                for i in 0..n {
                    path[i] = Complex64::new(amp * re[i], 0.0);
                }
            } else {
                let im = &factor.lower * normals(&mut rng, n);
                let s = amp * std::f64::consts::FRAC_1_SQRT_2;
                for i in 0..n {
                    path[i] = Complex64::new(s * re[i], s * im[i]);
                }
            }
        }
    }
    Ok(out)
}

/// Exact sampler for `u(t_n, x)`, `t_n = n·step`, at a single point.
///
/// By isotropy the law does not depend on the point; at the north pole only
/// `m = 0` contributes, with `Y_ℓ0 = sqrt((2ℓ+1)/4π)`. Each mode obeys
/// `X(t_{n+1}) = e^{-k·step} X(t_n) + Y_n` where `Y_n` is the fBm integral of
/// the kernel over `[t_n, t_{n+1}]`; the `Y_n` form a stationary Gaussian
/// sequence, sampled exactly by circulant embedding of its autocovariance.
pub struct PointPathSampler {
    params: ModelParams,
    step: f64,
    steps: usize,
    modes: Vec<PointMode>,
}

struct PointMode {
    decay: f64,
    amplitude: f64,
    initial: f64,
    sqrt_eigen: Vec<f64>,
}

impl PointPathSampler {
    pub fn new(params: &ModelParams, step: f64, steps: usize, quad: &QuadratureConfig) -> Result<Self> {
        params.validate()?;
        if !(step > 0.0) || steps == 0 {
            return domain("point path needs a positive step and at least one step");
        }
        if step * steps as f64 > params.horizon * (1.0 + 1e-12) {
            return domain("point path exceeds the model horizon");
        }
        let conv = params.convention();
        let modes = (0..=params.truncation)
            .into_par_iter()
            .map(|l| {
                let gamma = increment_autocovariance(l, step, steps + 1, &conv, quad)?;
                let sqrt_eigen = circulant_sqrt(&gamma)?;
                let weight = ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt();
                Ok(PointMode {
                    decay: (-eigenvalue(l) * step).exp(),
                    amplitude: weight * power_coefficient(params, l).sqrt(),
                    initial: weight * initial_spectrum(params, l).sqrt(),
                    sqrt_eigen,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params: *params,
            step,
            steps,
            modes,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Values at `t_0 = 0, t_1, ..., t_steps`.
    pub fn sample(&self, seed: u64, replicate: u64) -> Vec<f64> {
        let n = self.steps;
        let m = 2 * n;
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(m);
        let mut out = vec![0.0; n + 1];
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (l, mode) in self.modes.iter().enumerate() {
            let mut rng = substream(seed, l, 0, replicate, Purpose::PointPath);
            for (b, &s) in buf.iter_mut().zip(&mode.sqrt_eigen) {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *b = Complex64::new(re, im) * s;
            }
            fft.process(&mut buf);
            let mut init = if mode.initial > 0.0 {
                let xi: f64 = StandardNormal.sample(&mut substream(seed, l, 0, replicate, Purpose::Initial));
                mode.initial * xi
            } else {
                0.0
            };
            out[0] += init;
            let mut x = 0.0;
            for i in 0..n {
                x = mode.decay * x + buf[i].re;
                init *= mode.decay;
                out[i + 1] += mode.amplitude * x + init;
            }
        }
        out
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }
}

/// `γ(j) = Cov(Y_0, Y_j)`, `Y_j = ∫_{j h}^{(j+1) h} e^{-k((j+1)h - s)} dB(s)`, `j < n`.
pub(crate) fn increment_autocovariance(
    degree: usize,
    step: f64,
    n: usize,
    conv: &FbmConvention,
    quad: &QuadratureConfig,
) -> Result<Vec<f64>> {
    let k = eigenvalue(degree);
    let kernel = |upper: f64| ExpKernelSpec::new(k, upper);
    let mut gamma = Vec::with_capacity(n);
    // Y_j = G((j+1)h) - e^{-kh} G(jh) with G(T) = ∫ g_T dB; exact for the first lags.
    let head = n.min(2);
    let e = (-k * step).exp();
    for j in 0..head {
        let a = weighted_inner(&kernel(step)?, &kernel((j + 1) as f64 * step)?, conv, quad)?;
        let b = if j == 0 {
            0.0
        } else {
            weighted_inner(&kernel(step)?, &kernel(j as f64 * step)?, conv, quad)?
        };
        gamma.push(a - e * b);
    }
    if n <= 2 {
        return Ok(gamma);
    }
    // Lags j >= 2 with c = b - a:  γ(j) = α_H ∫_0^h ω(c) [(jh+c)^p + (jh-c)^p] dc,
    // ω the autocorrelation of the weight e^{-k(h-a)} on [0, h].
    let omega = move |c: f64| {
        if k == 0.0 {
            step - c
        } else {
            (-k * c).exp() * -(-2.0 * k * (step - c)).exp_m1() / (2.0 * k)
        }
    };
    let mut breaks = vec![0.0];
    if k > 0.0 {
        breaks.extend([1.0, 4.0, 16.0, 64.0].iter().map(|x| x / k).filter(|&x| x < step));
    }
    breaks.push(step);
    let p = 2.0 * conv.hurst() - 2.0;
    let alpha = conv.kernel_constant();
    for j in 2..n.min(NEAR_LAGS) {
        let lag = j as f64 * step;
        let f = |c: f64| omega(c) * ((lag + c).powf(p) + (lag - c).powf(p));
        gamma.push(alpha * integrate_with_breaks(f, &breaks, quad)?.value);
    }
    if n <= NEAR_LAGS {
        return Ok(gamma);
    }
    // Far lags: even Taylor series of the bracket in c/(jh) against the moments of ω.
    let moments = (0..SERIES_TERMS)
        .map(|i| Ok(integrate_with_breaks(|c| omega(c) * c.powi(2 * i as i32), &breaks, quad)?.value))
        .collect::<Result<Vec<_>>>()?;
    let mut binom = vec![1.0; 2 * SERIES_TERMS];
    for i in 1..binom.len() {
        binom[i] = binom[i - 1] * (p - (i - 1) as f64) / i as f64;
    }
    for j in NEAR_LAGS..n {
        let lag = j as f64 * step;
        let ratio = (lag * lag).recip();
        let mut scale = 1.0;
        let mut acc = 0.0;
        for (i, m) in moments.iter().enumerate() {
            acc += binom[2 * i] * m * scale;
            scale *= ratio;
        }
        gamma.push(2.0 * alpha * lag.powf(p) * acc);
    }
    Ok(gamma)
}

const NEAR_LAGS: usize = 8;
const SERIES_TERMS: usize = 12;

/// Square roots of the eigenvalues of the circulant `[γ0..γn, γ(n-1)..γ1]`,
/// scaled for an unnormalized FFT of size `2n`.
fn circulant_sqrt(gamma: &[f64]) -> Result<Vec<f64>> {
    let n = gamma.len() - 1;
    let m = 2 * n;
    let mut row: Vec<Complex64> = (0..m)
        .map(|j| Complex64::new(gamma[if j <= n { j } else { m - j }], 0.0))
        .collect();
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut row);
    let max = row.iter().map(|c| c.re).fold(0.0, f64::max);
    row.iter()
        .map(|c| {
            if c.re < -1e-10 * max {
                Err(Error::Embedding(c.re))
            } else {
                Ok((c.re.max(0.0) / m as f64).sqrt())
            }
        })
        .collect()
}
