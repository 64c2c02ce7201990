//! Field assembly from coefficient paths, spectral operators, and analytic
//! covariance functions of the solution and of the noise.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fbm_kernel::{c33, eigenvalue, r_cov, sigma_l_sq_saturated, u_cov};
use crate::harmonics::{legendre_series, order_power, HarmonicTable, SphericalPoint};
use crate::quadrature::QuadratureConfig;
use crate::spectral_sampler::{
    initial_spectrum, power_coefficient, substream, CoefficientPathSet, ModelParams, Purpose,
};

/// Largest tolerated imaginary part of an assembled field value.
pub const IMAGINARY_THRESHOLD: f64 = 1e-8;

/// Structured layout of a grid: `rings` colatitudes times `per_ring` equally spaced longitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingLayout {
    pub rings: usize,
    pub per_ring: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    points: Vec<SphericalPoint>,
    layout: Option<RingLayout>,
}

impl FieldGrid {
    pub fn new(points: Vec<SphericalPoint>) -> Result<Self> {
        if points.is_empty() {
            return domain("field grid must contain at least one point");
        }
        Ok(Self { points, layout: None })
    }

    /// Ring-major grid: for each colatitude, `per_ring` longitudes `2πj/per_ring`.
    pub fn rings(colatitudes: &[f64], per_ring: usize) -> Result<Self> {
        if colatitudes.is_empty() || per_ring == 0 {
            return domain("ring grid needs at least one ring and one longitude");
        }
        let mut points = Vec::with_capacity(colatitudes.len() * per_ring);
        for &c in colatitudes {
            for j in 0..per_ring {
                points.push(SphericalPoint::new(c, 2.0 * PI * j as f64 / per_ring as f64)?);
            }
        }
        Ok(Self {
            points,
            layout: Some(RingLayout {
                rings: colatitudes.len(),
                per_ring,
            }),
        })
    }

    /// `n` equally spaced points on the equator.
    pub fn equator(n: usize) -> Result<Self> {
        Self::rings(&[PI / 2.0], n)
    }

    pub fn points(&self) -> &[SphericalPoint] {
        &self.points
    }

    pub fn layout(&self) -> Option<RingLayout> {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Real field values, row-major over `(time index, point index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub times: Vec<f64>,
    pub points: Vec<SphericalPoint>,
    pub values: Vec<f64>,
    pub truncation: usize,
    pub seed: u64,
    pub replicate: u64,
}

const MAGIC: &[u8; 4] = b"SFLD";
const FORMAT_VERSION: u32 = 1;

impl FieldSample {
    pub fn value(&self, time_index: usize, point_index: usize) -> f64 {
        self.values[time_index * self.points.len() + point_index]
    }

    /// Values at one time, in point order.
    pub fn at_time(&self, time_index: usize) -> &[f64] {
        let n = self.points.len();
        &self.values[time_index * n..(time_index + 1) * n]
    }

    /// Rows `t,colatitude,longitude,value`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "t,colatitude,longitude,value")?;
        for (i, t) in self.times.iter().enumerate() {
            for (j, p) in self.points.iter().enumerate() {
                writeln!(
                    w,
                    "{t:e},{:e},{:e},{:e}",
                    p.colatitude(),
                    p.longitude(),
                    self.value(i, j)
                )?;
            }
        }
        Ok(())
    }

    /// Little-endian: magic `SFLD`, u32 version, u32 time count, u32 point
    /// count, f64 times, f64 (colatitude, longitude) pairs, f64 values row-major.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.times.len() as u32).to_le_bytes())?;
        w.write_all(&(self.points.len() as u32).to_le_bytes())?;
        for t in &self.times {
            w.write_all(&t.to_le_bytes())?;
        }
        for p in &self.points {
            w.write_all(&p.colatitude().to_le_bytes())?;
            w.write_all(&p.longitude().to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Inverse of [`FieldSample::write_binary`]; provenance fields read back as zero.
    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let io = |e: std::io::Error| Error::Domain(format!("reading field sample: {e}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return domain("not a field sample file");
        }
        let mut u = [0u8; 4];
        let mut read_u32 = |r: &mut R| -> Result<u32> {
            r.read_exact(&mut u).map_err(io)?;
            Ok(u32::from_le_bytes(u))
        };
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return domain(format!("unsupported field sample version {version}"));
        }
        let nt = read_u32(r)? as usize;
        let np = read_u32(r)? as usize;
        let mut f = [0u8; 8];
        let mut read_f64 = |r: &mut R| -> Result<f64> {
            r.read_exact(&mut f).map_err(io)?;
            Ok(f64::from_le_bytes(f))
        };
        let times = (0..nt).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
        let mut points = Vec::with_capacity(np);
        for _ in 0..np {
            let c = read_f64(r)?;
            let l = read_f64(r)?;
            points.push(SphericalPoint::new(c, l)?);
        }
        let values = (0..nt * np).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            times,
            points,
            values,
            truncation: 0,
            seed: 0,
            replicate: 0,
        })
    }
}

/// `u(t_i, x_j) = Σ_{ℓ<=L} Σ_{|m|<=ℓ} u_ℓm(t_i) Y_ℓm(x_j)`.
///
/// Summation order is fixed (ℓ ascending, then m from -ℓ to ℓ), so results are
/// reproducible regardless of thread count.
pub fn evaluate_field(coeffs: &CoefficientPathSet, grid: &FieldGrid) -> Result<FieldSample> {
    let lmax = coeffs.lmax();
    let nt = coeffs.times().len();
    let columns = grid
        .points()
        .par_iter()
        .map(|p| {
            let table = HarmonicTable::new(lmax, p);
            let mut col = Vec::with_capacity(nt);
            for i in 0..nt {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 0..=lmax {
                    for m in -(l as i64)..=(l as i64) {
                        acc += coeffs.get(l, m, i) * table.get(l, m);
                    }
                }
                if acc.im.abs() > IMAGINARY_THRESHOLD || !acc.re.is_finite() {
                    return Err(Error::SymmetryViolation {
                        residue: acc.im.abs(),
                        threshold: IMAGINARY_THRESHOLD,
                    });
                }
                col.push(acc.re);
            }
            Ok(col)
        })
        .collect::<Result<Vec<_>>>()?;
    let np = grid.len();
    let mut values = vec![0.0; nt * np];
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            values[i * np + j] = *v;
        }
    }
    Ok(FieldSample {
        times: coeffs.times().to_vec(),
        points: grid.points().to_vec(),
        values,
        truncation: lmax,
        seed: coeffs.seed,
        replicate: coeffs.replicate,
    })
}

/// Multiplies each degree-ℓ coefficient by `-ℓ(ℓ+1)`.
pub fn laplace_beltrami(coeffs: &CoefficientPathSet) -> CoefficientPathSet {
    coeffs.scale_by_degree(|l| -eigenvalue(l))
}

/// `(1 - Δ)^{k/2}`: multiplies each degree-ℓ coefficient by `(1 + ℓ(ℓ+1))^{k/2}`.
pub fn fractional_smoothing(coeffs: &CoefficientPathSet, k: f64) -> CoefficientPathSet {
    coeffs.scale_by_degree(|l| (1.0 + eigenvalue(l)).powf(0.5 * k))
}

/// `[U_ℓ(t, s)]` for `ℓ = 0..=L`.
pub fn mode_covariances(params: &ModelParams, t: f64, s: f64, quad: &QuadratureConfig) -> Result<Vec<f64>> {
    params.validate()?;
    if t > params.horizon || s > params.horizon {
        return domain("times exceed the model horizon");
    }
    let conv = params.convention();
    let c33_value = c33(&conv)?;
    (0..=params.truncation)
        .into_par_iter()
        .map(|l| {
            let (c, d) = (power_coefficient(params, l), initial_spectrum(params, l));
            let k = eigenvalue(l);
            if t == s && k * t >= SATURATION {
                // Corrections are below e^{-50} relative.
                Ok(c * sigma_l_sq_saturated(l, &conv, c33_value) + d * (-2.0 * k * t).exp())
            } else {
                u_cov(l, t, s, c, d, &conv, quad)
            }
        })
        .collect()
}

const SATURATION: f64 = 50.0;

/// Truncated `E[u(t,x) u(s,y)] = Σ_ℓ (2ℓ+1)/(4π) U_ℓ(t,s) P_ℓ(⟨x,y⟩)`.
pub fn field_covariance(
    params: &ModelParams,
    t: f64,
    s: f64,
    x: &SphericalPoint,
    y: &SphericalPoint,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let modes = mode_covariances(params, t, s, quad)?;
    let p = legendre_series(params.truncation, x.dot(y))?;
    Ok(addition_sum(&modes, &p))
}

pub(crate) fn addition_sum(weights: &[f64], legendre: &[f64]) -> f64 {
    weights
        .iter()
        .zip(legendre)
        .enumerate()
        .map(|(l, (w, p))| (2 * l + 1) as f64 / (4.0 * PI) * w * p)
        .sum()
}

/// `R_H(t,s) Λ_L(x,y)` with `Λ_L = Σ_{ℓ<=L} (2ℓ+1)/(4π) C_ℓ P_ℓ(⟨x,y⟩)`; requires `α > 2`.
pub fn noise_covariance(
    params: &ModelParams,
    t: f64,
    s: f64,
    x: &SphericalPoint,
    y: &SphericalPoint,
) -> Result<f64> {
    params.validate()?;
    if params.alpha <= 2.0 {
        return domain(format!(
            "pointwise noise covariance needs α > 2 (got {}); the series diverges on the diagonal",
            params.alpha
        ));
    }
    let r = r_cov(t, s, &params.convention())?;
    let c: Vec<f64> = (0..=params.truncation).map(|l| power_coefficient(params, l)).collect();
    let p = legendre_series(params.truncation, x.dot(y))?;
    Ok(r * addition_sum(&c, &p))
}

/// Exact sampler of `u(t, ·)` on `n` equally spaced equator points.
///
/// On the equator `u(t, φ) = Σ_m A_m e^{imφ}` with `A_m = Σ_ℓ u_ℓm(t) P̄_ℓm(0)`.
/// The `A_m`, `m >= 0`, are independent centered Gaussians with variance
/// `Σ_ℓ U_ℓ(t,t) P̄_ℓm(0)²`, so a ring costs `L + 1` draws and one FFT.
/// Orders above `n/2` alias onto `m mod n`, which is exact at the ring points,
/// so `n` is not tied to `L`.
pub struct EquatorRingSampler {
    points: usize,
    std_dev: Vec<f64>,
}

impl EquatorRingSampler {
    pub fn new(params: &ModelParams, t: f64, points: usize, quad: &QuadratureConfig) -> Result<Self> {
        let modes = mode_covariances(params, t, t, quad)?;
        Self::from_mode_variances(&modes, points)
    }

    /// Ring sampler for an isotropic field with per-degree coefficient variances `modes[ℓ]`.
    pub fn from_mode_variances(modes: &[f64], points: usize) -> Result<Self> {
        if modes.is_empty() || points < 2 {
            return domain("a ring needs at least two points and one degree");
        }
        let power = order_power(modes.len() - 1, PI / 2.0, modes)?;
        Ok(Self {
            points,
            std_dev: power.iter().map(|v| v.max(0.0).sqrt()).collect(),
        })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Angular spacing `2π / n`.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.points as f64
    }

    /// `Cov(u(t, φ), u(t, φ + j·spacing))` implied by the order variances.
    pub fn covariance(&self, lag: usize) -> f64 {
        let phi = lag as f64 * self.spacing();
        self.std_dev[0].powi(2)
            + 2.0
                * self.std_dev[1..]
                    .iter()
                    .enumerate()
                    .map(|(i, s)| s * s * ((i + 1) as f64 * phi).cos())
                    .sum::<f64>()
    }

    /// Ring values at longitudes `2πj/n`.
    pub fn sample(&self, seed: u64, replicate: u64) -> Vec<f64> {
        let n = self.points;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (m, &sd) in self.std_dev.iter().enumerate() {
            let mut rng = substream(seed, 0, m, replicate, Purpose::Ring);
            let a = if m == 0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(sd * z, 0.0)
            } else {
                let h = sd * std::f64::consts::FRAC_1_SQRT_2;
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(h * re, h * im)
            };
            let bin = m % n;
            buf[bin] += a;
            if m > 0 {
                buf[(n - bin) % n] += a.conj();
            }
        }
        FftPlanner::<f64>::new().plan_fft_inverse(n).process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_sampler::{sample_noise_coefficients, SpectralSampler, TimeGrid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quad() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn pt(c: f64, l: f64) -> SphericalPoint {
        SphericalPoint::new(c, l).unwrap()
    }

    fn random_coefficients(lmax: usize, times: Vec<f64>, seed: u64) -> CoefficientPathSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = CoefficientPathSet::zeros(lmax, times);
        for l in 0..=lmax {
            for m in 0..=l {
                for v in set.path_mut(l, m) {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = if m == 0 { 0.0 } else { StandardNormal.sample(&mut rng) };
                    *v = Complex64::new(re, im);
                }
            }
        }
        set
    }

    fn rotate(q: [f64; 4], p: &SphericalPoint) -> SphericalPoint {
        let [w, x, y, z] = q;
        let v = p.unit_vector();
        let r = [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ];
        let out = [0, 1, 2].map(|i| r[i][0] * v[0] + r[i][1] * v[1] + r[i][2] * v[2]);
        SphericalPoint::from_vector(out).unwrap()
    }

    #[test]
    fn zero_and_constant_fields() {
        let grid = FieldGrid::rings(&[0.3, 1.2, 2.9], 5).unwrap();
        let mut set = CoefficientPathSet::zeros(4, vec![0.5]);
        let f = evaluate_field(&set, &grid).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
        set.path_mut(0, 0)[0] = Complex64::new(2.5, 0.0);
        let f = evaluate_field(&set, &grid).unwrap();
        for v in f.values {
            assert!((v - 2.5 / (4.0 * PI).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn broken_symmetry_is_reported() {
        let mut set = CoefficientPathSet::zeros(2, vec![1.0]);
        set.path_mut(1, 0)[0] = Complex64::new(0.0, 1.0);
        let grid = FieldGrid::new(vec![pt(0.4, 0.0)]).unwrap();
        assert!(matches!(evaluate_field(&set, &grid), Err(Error::SymmetryViolation { .. })));
    }

    #[test]
    fn field_is_real_and_linear() {
        let grid = FieldGrid::rings(&[0.1, 0.8, 1.6, 3.0], 7).unwrap();
        let a = random_coefficients(24, vec![0.0, 1.0], 1);
        let b = random_coefficients(24, vec![0.0, 1.0], 2);
        let fa = evaluate_field(&a, &grid).unwrap();
        let fb = evaluate_field(&b, &grid).unwrap();
        let fab = evaluate_field(&a.linear_combination(1.5, &b, -0.7).unwrap(), &grid).unwrap();
        for i in 0..fab.values.len() {
            let lin = 1.5 * fa.values[i] - 0.7 * fb.values[i];
            assert!((fab.values[i] - lin).abs() < 1e-10 * (1.0 + lin.abs()));
        }
    }

    #[test]
    fn operators_scale_by_degree() {
        let set = random_coefficients(4, vec![1.0], 3);
        let lap = laplace_beltrami(&set);
        assert_eq!(lap.get(0, 0, 0), Complex64::new(0.0, 0.0));
        assert_eq!(lap.get(1, 1, 0), set.get(1, 1, 0) * -2.0);
        let twice = laplace_beltrami(&lap);
        assert!((twice.get(3, -2, 0) - set.get(3, -2, 0) * 144.0).norm() < 1e-12);

        assert_eq!(fractional_smoothing(&set, 0.0), set);
        assert!((fractional_smoothing(&set, 2.0).get(1, 0, 0) - set.get(1, 0, 0) * 3.0).norm() < 1e-14);
        let back = fractional_smoothing(&fractional_smoothing(&set, -2.0), 2.0);
        for ((_, _, _, a), (_, _, _, b)) in back.entries().zip(set.entries()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    // Second-order finite differences in (θ, φ) of a band-limited field.
    #[test]
    fn laplacian_matches_finite_differences() {
        let set = random_coefficients(8, vec![1.0], 4);
        let lap = laplace_beltrami(&set);
        let h = 1e-3;
        for (theta, phi) in [(0.7, 0.3), (1.4, 2.0), (2.2, 5.1)] {
            let pts: Vec<_> = [(0.0, 0.0), (h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)]
                .iter()
                .map(|(a, b)| pt(theta + a, phi + b))
                .collect();
            let f = evaluate_field(&set, &FieldGrid::new(pts).unwrap()).unwrap().values;
            let (s, cot) = (theta.sin(), theta.cos() / theta.sin());
            let fd = (f[1] - 2.0 * f[0] + f[2]) / (h * h)
                + cot * (f[1] - f[2]) / (2.0 * h)
                + (f[3] - 2.0 * f[0] + f[4]) / (h * h * s * s);
            let exact = evaluate_field(&lap, &FieldGrid::new(vec![pt(theta, phi)]).unwrap()).unwrap().values[0];
            assert!((fd - exact).abs() < 1e-3 * (1.0 + exact.abs()), "{fd} vs {exact}");
        }
    }

    #[test]
    fn monte_carlo_field_variance() {
        let p = ModelParams::new(0.75, 2.0, 10).unwrap();
        let grid = TimeGrid::new(vec![1.0], 1.0).unwrap();
        let sampler = SpectralSampler::new(&p, &grid, &quad()).unwrap();
        let points = FieldGrid::new(vec![pt(0.0, 0.0), pt(1.1, 2.3), pt(2.6, 4.0)]).unwrap();
        let target = field_covariance(&p, 1.0, 1.0, &points.points()[0], &points.points()[0], &quad()).unwrap();
        let n = 10_000;
        let mut acc = [0.0; 3];
        for r in 0..n {
            let f = evaluate_field(&sampler.sample(21, r), &points).unwrap();
            for j in 0..3 {
                acc[j] += f.values[j] * f.values[j];
            }
        }
        for a in acc {
            assert!((a / n as f64 / target - 1.0).abs() < 0.05, "{} vs {target}", a / n as f64);
        }
    }

    #[test]
    fn covariance_is_rotation_invariant() {
        let p = ModelParams::new(0.7, 1.5, 40).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let mut q = [0.0f64; 4];
            q.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
            let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            q.iter_mut().for_each(|v| *v /= n);
            let (x, y) = (pt(0.4, 1.0), pt(1.3, 2.2));
            let a = field_covariance(&p, 0.6, 0.9, &x, &y, &quad()).unwrap();
            let b = field_covariance(&p, 0.6, 0.9, &rotate(q, &x), &rotate(q, &y), &quad()).unwrap();
            assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn long_time_modes_saturate() {
        let p = ModelParams::new(0.75, 1.0, 12).unwrap().with_horizon(50.0).unwrap();
        let u = mode_covariances(&p, 40.0, 40.0, &quad()).unwrap();
        let conv = p.convention();
        let c = c33(&conv).unwrap();
        for l in 1..=12 {
            let sat = power_coefficient(&p, l) * sigma_l_sq_saturated(l, &conv, c);
            assert!((u[l] / sat - 1.0).abs() < 1e-6);
        }
        let x = pt(0.5, 0.5);
        assert!(field_covariance(&p, 1.0, 1.0, &x, &x, &quad()).unwrap() > 0.0);
    }

    #[test]
    fn noise_covariance_structure() {
        let p = ModelParams::new(0.75, 3.0, 30).unwrap();
        let (x, y) = (pt(0.3, 0.1), pt(0.9, 1.7));
        assert_eq!(noise_covariance(&p, 0.7, 0.0, &x, &y).unwrap(), 0.0);
        let base = noise_covariance(&p, 1.0, 1.0, &x, &y).unwrap();
        let v = noise_covariance(&p, 0.4, 0.9, &x, &y).unwrap();
        let r = r_cov(0.4, 0.9, &p.convention()).unwrap();
        assert!((v / base - r).abs() < 1e-12);
        assert!((noise_covariance(&p, 0.4, 0.9, &y, &x).unwrap() - v).abs() < 1e-15);
        assert!(noise_covariance(&ModelParams::new(0.75, 2.0, 30).unwrap(), 1.0, 1.0, &x, &y).is_err());
    }

    #[test]
    fn monte_carlo_noise_covariance() {
        let p = ModelParams::new(0.75, 3.0, 16).unwrap();
        let grid = TimeGrid::new(vec![1.0], 1.0).unwrap();
        let points = FieldGrid::new(vec![pt(0.6, 0.2), pt(0.9, 0.5)]).unwrap();
        let (x, y) = (points.points()[0], points.points()[1]);
        let target = noise_covariance(&p, 1.0, 1.0, &x, &y).unwrap();
        let n = 10_000;
        let mut acc = 0.0;
        for r in 0..n {
            let w = evaluate_field(&sample_noise_coefficients(&p, &grid, 5, r).unwrap(), &points).unwrap();
            acc += w.values[0] * w.values[1];
        }
        assert!((acc / n as f64 / target - 1.0).abs() < 0.05, "{} vs {target}", acc / n as f64);
    }

    #[test]
    fn binary_round_trip() {
        let set = random_coefficients(5, vec![0.25, 0.5], 6);
        let f = evaluate_field(&set, &FieldGrid::rings(&[0.5, 1.5], 3).unwrap()).unwrap();
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"SFLD");
        assert_eq!(buf.len(), 16 + 8 * (2 + 2 * 6 + 12));
        let back = FieldSample::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back.values, f.values);
        assert_eq!(back.times, f.times);
        let mut csv = Vec::new();
        f.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 13);
        assert!(text.starts_with("t,colatitude,longitude,value\n"));
    }

    #[test]
    fn ring_covariance_is_the_field_covariance() {
        let p = ModelParams::new(0.6, 1.0, 64).unwrap();
        let ring = EquatorRingSampler::new(&p, 1.0, 256, &quad()).unwrap();
        let origin = pt(PI / 2.0, 0.0);
        for lag in [0usize, 1, 5, 64, 128] {
            let y = pt(PI / 2.0, lag as f64 * ring.spacing());
            let exact = field_covariance(&p, 1.0, 1.0, &origin, &y, &quad()).unwrap();
            assert!((ring.covariance(lag) - exact).abs() < 1e-12 * exact.abs().max(1e-3), "lag {lag}");
        }
        assert!(EquatorRingSampler::new(&p, 1.0, 1, &quad()).is_err());
    }

    #[test]
    fn ring_samples_have_the_right_moments() {
        // 24 points with orders up to 16: the upper orders alias.
        let p = ModelParams::new(0.6, 1.0, 16).unwrap();
        let ring = EquatorRingSampler::new(&p, 1.0, 24, &quad()).unwrap();
        let origin = pt(PI / 2.0, 0.0);
        let n = 20_000;
        let (mut v, mut c) = (0.0, 0.0);
        for r in 0..n {
            let x = ring.sample(2, r);
            v += x[10] * x[10];
            c += x[10] * x[13];
        }
        let nf = n as f64;
        let var = field_covariance(&p, 1.0, 1.0, &origin, &origin, &quad()).unwrap();
        let cov = field_covariance(&p, 1.0, 1.0, &origin, &pt(PI / 2.0, 3.0 * ring.spacing()), &quad()).unwrap();
        assert!((v / nf / var - 1.0).abs() < 0.05);
        assert!((c / nf / cov - 1.0).abs() < 0.05);
        assert_eq!(ring.sample(2, 7), ring.sample(2, 7));
    }
}
