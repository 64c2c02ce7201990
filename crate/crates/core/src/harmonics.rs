//! Special functions on the unit sphere.
//!
//! Spherical harmonics are complex, orthonormal on `S²` with respect to the
//! surface measure, and carry the Condon–Shortley phase, so that
//! `Y_{ℓ,-m} = (-1)^m conj(Y_{ℓm})`.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A point on the unit sphere in colatitude/longitude coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalPoint {
    colatitude: f64,
    longitude: f64,
}

impl SphericalPoint {
    /// Builds a point, wrapping the longitude into `[0, 2π)`.
    pub fn new(colatitude: f64, longitude: f64) -> Result<Self> {
        if !colatitude.is_finite() || !longitude.is_finite() {
            return domain("spherical coordinates must be finite");
        }
        if !(0.0..=PI).contains(&colatitude) {
            return domain(format!("colatitude {colatitude} outside [0, π]"));
        }
        let mut longitude = longitude.rem_euclid(TAU);
        if longitude >= TAU {
            longitude = 0.0;
        }
        Ok(Self {
            colatitude,
            longitude,
        })
    }

    pub fn north_pole() -> Self {
        Self {
            colatitude: 0.0,
            longitude: 0.0,
        }
    }

    pub fn south_pole() -> Self {
        Self {
            colatitude: PI,
            longitude: 0.0,
        }
    }

    /// Point in the direction of a nonzero 3-vector.
    pub fn from_vector(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return domain("cannot normalize a zero or non-finite vector");
        }
        let z = (v[2] / norm).clamp(-1.0, 1.0);
        Self::new(z.acos(), v[1].atan2(v[0]))
    }

    pub fn colatitude(&self) -> f64 {
        self.colatitude
    }

    pub fn longitude(&self) -> f64 {
        self.longitude
    }

    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.colatitude.sin_cos();
        let (sp, cp) = self.longitude.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Inner product of the two unit vectors, clamped to `[-1, 1]`.
    pub fn dot(&self, other: &Self) -> f64 {
        let a = self.unit_vector();
        let b = other.unit_vector();
        (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0)
    }
}

/// Degree/order pair with `|m| <= ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HarmonicIndex {
    degree: usize,
    order: i64,
}

impl HarmonicIndex {
    pub fn new(degree: usize, order: i64) -> Result<Self> {
        if order.unsigned_abs() as usize > degree {
            return domain(format!("|m| = {} exceeds ℓ = {degree}", order.abs()));
        }
        Ok(Self { degree, order })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn order(&self) -> i64 {
        self.order
    }
}

/// Position of `(ℓ, m)`, `0 <= m <= ℓ`, in triangular storage.
#[inline]
pub fn tri_index(degree: usize, order: usize) -> usize {
    degree * (degree + 1) / 2 + order
}

/// Number of `(ℓ, m)` pairs with `0 <= m <= ℓ <= lmax`.
#[inline]
pub fn tri_len(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 2) / 2
}

/// Legendre polynomial `P_ℓ(x)` by Bonnet's recurrence.
pub fn legendre_p(degree: usize, x: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return domain(format!("Legendre argument {x} outside [-1, 1]"));
    }
    Ok(legendre_unchecked(degree, x))
}

fn legendre_unchecked(degree: usize, x: f64) -> f64 {
    if x == 1.0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, x);
    if degree == 0 {
        return prev;
    }
    for n in 1..degree {
        let n = n as f64;
        let next = ((2.0 * n + 1.0) * x * cur - n * prev) / (n + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// All of `P_0(x), ..., P_lmax(x)`.
pub fn legendre_series(lmax: usize, x: f64) -> Result<Vec<f64>> {
    if !(-1.0..=1.0).contains(&x) {
        return domain(format!("Legendre argument {x} outside [-1, 1]"));
    }
    let mut out = Vec::with_capacity(lmax + 1);
    out.push(1.0);
    if lmax == 0 {
        return Ok(out);
    }
    out.push(x);
    for n in 1..lmax {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * out[n] - nf * out[n - 1]) / (nf + 1.0);
        out.push(next);
    }
    if x == 1.0 {
        out.iter_mut().for_each(|v| *v = 1.0);
    }
    Ok(out)
}

/// Orthonormalized associated Legendre functions `P̄_ℓm(cos θ)`, `0 <= m <= ℓ <= lmax`,
/// such that `Y_ℓm(θ, φ) = P̄_ℓm(cos θ) e^{imφ}`.
///
/// Each order runs an upward recurrence in ℓ seeded from the sectoral value.
/// The seed is carried as a logarithm and the recurrence is rescaled whenever
/// it grows past `1e150`, so high orders near the poles neither overflow nor
/// flush to zero before they become representable.
pub fn normalized_legendre_table(lmax: usize, colatitude: f64) -> Vec<f64> {
    let mut table = vec![0.0; tri_len(lmax)];
    for_each_normalized_legendre(lmax, colatitude, |l, m, v| table[tri_index(l, m)] = v);
    table
}

/// `S_m = Σ_{ℓ=m}^{lmax} w_ℓ P̄_ℓm(cos θ)²` for `m = 0..=lmax`, without storing the table.
pub fn order_power(lmax: usize, colatitude: f64, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != lmax + 1 {
        return domain("one weight per degree is required");
    }
    let mut out = vec![0.0; lmax + 1];
    for_each_normalized_legendre(lmax, colatitude, |l, m, v| out[m] += weights[l] * v * v);
    Ok(out)
}

// Visits (ℓ, m, P̄_ℓm) order by order, ℓ ascending within each order.
fn for_each_normalized_legendre(lmax: usize, colatitude: f64, mut visit: impl FnMut(usize, usize, f64)) {
    let (s, x) = colatitude.sin_cos();
    let log_s = s.abs().ln();
    let mut log_sectoral = -0.5 * (4.0 * PI).ln();
    for m in 0..=lmax {
        if m > 0 {
            let mf = m as f64;
            log_sectoral += 0.5 * ((2.0 * mf + 1.0) / (2.0 * mf)).ln() + log_s;
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        if s == 0.0 && m > 0 {
            for l in m..=lmax {
                visit(l, m, 0.0);
            }
            continue;
        }
        let mut log_scale = log_sectoral;
        let mut factor = log_scale.exp();
        let mut prev = 0.0;
        let mut cur = sign;
        visit(m, m, cur * factor);
        let mf = m as f64;
        let mut a_prev = 0.0;
        for l in m + 1..=lmax {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let next = if l == m + 1 {
                x * (2.0 * mf + 3.0).sqrt() * cur
            } else {
                a * (x * cur - prev / a_prev)
            };
            prev = cur;
            cur = next;
            a_prev = a;
            if cur.abs() > 1e150 {
                let r = cur.abs();
                cur /= r;
                prev /= r;
                log_scale += r.ln();
                factor = log_scale.exp();
            }
            visit(l, m, cur * factor);
        }
    }
}

/// Orthonormal complex spherical harmonic `Y_ℓm` at `p`.
pub fn spherical_harmonic(idx: HarmonicIndex, p: &SphericalPoint) -> Complex64 {
    let l = idx.degree();
    let m = idx.order();
    let mabs = m.unsigned_abs() as usize;
    let plm = associated_value(l, mabs, p.colatitude());
    let y = Complex64::from_polar(plm, mabs as f64 * p.longitude());
    if m >= 0 {
        y
    } else if mabs % 2 == 0 {
        y.conj()
    } else {
        -y.conj()
    }
}

fn associated_value(l: usize, m: usize, colatitude: f64) -> f64 {
    let (s, x) = colatitude.sin_cos();
    if s == 0.0 && m > 0 {
        return 0.0;
    }
    let mut log_scale = -0.5 * (4.0 * PI).ln();
    for k in 1..=m {
        let kf = k as f64;
        log_scale += 0.5 * ((2.0 * kf + 1.0) / (2.0 * kf)).ln() + s.abs().ln();
    }
    let mut prev = 0.0;
    let mut cur = if m % 2 == 0 { 1.0 } else { -1.0 };
    let mf = m as f64;
    let mut a_prev = 0.0;
    for k in m + 1..=l {
        let kf = k as f64;
        let a = ((4.0 * kf * kf - 1.0) / (kf * kf - mf * mf)).sqrt();
        let next = if k == m + 1 {
            x * (2.0 * mf + 3.0).sqrt() * cur
        } else {
            a * (x * cur - prev / a_prev)
        };
        prev = cur;
        cur = next;
        a_prev = a;
        if cur.abs() > 1e150 {
            let r = cur.abs();
            cur /= r;
            prev /= r;
            log_scale += r.ln();
        }
    }
    cur * log_scale.exp()
}

/// All harmonics `Y_ℓm(p)` with `0 <= m <= ℓ <= lmax`, in triangular layout.
#[derive(Debug, Clone)]
pub struct HarmonicTable {
    lmax: usize,
    values: Vec<Complex64>,
}

impl HarmonicTable {
    pub fn new(lmax: usize, p: &SphericalPoint) -> Self {
        let plm = normalized_legendre_table(lmax, p.colatitude());
        let phase: Vec<Complex64> = (0..=lmax)
            .map(|m| Complex64::from_polar(1.0, m as f64 * p.longitude()))
            .collect();
        let mut values = Vec::with_capacity(plm.len());
        for l in 0..=lmax {
            for m in 0..=l {
                values.push(phase[m] * plm[tri_index(l, m)]);
            }
        }
        Self { lmax, values }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    /// `Y_ℓm` for any `|m| <= ℓ <= lmax`.
    pub fn get(&self, degree: usize, order: i64) -> Complex64 {
        let m = order.unsigned_abs() as usize;
        let y = self.values[tri_index(degree, m)];
        match (order < 0, m % 2) {
            (false, _) => y,
            (true, 0) => y.conj(),
            (true, _) => -y.conj(),
        }
    }

    /// Values for `m >= 0` in triangular layout.
    pub fn nonnegative(&self) -> &[Complex64] {
        &self.values
    }
}

/// Great-circle distance in radians.
pub fn geodesic_distance(x: &SphericalPoint, y: &SphericalPoint) -> f64 {
    x.dot(y).acos()
}

/// Bessel function of the first kind of order zero.
///
/// Power series below `x = 12`, Hankel's asymptotic expansion above.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < 12.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let mut k = 1.0;
        while term.abs() > 1e-18 * sum.abs().max(1e-300) || k < 3.0 {
            term *= -q / (k * k);
            sum += term;
            k += 1.0;
            if k > 200.0 {
                break;
            }
        }
        return sum;
    }
    // |a_k| = ((2k-1)!!)^2 / (k! 8^k), sign (-1)^k; P collects even k, Q odd k.
    let mut p = 0.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..60 {
        let term = a / x.powi(k);
        if term > last || term < 1e-17 {
            break;
        }
        last = term;
        let sign = if (k / 2 + k) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        let kf = k as f64;
        a *= (2.0 * kf + 1.0).powi(2) / (8.0 * (kf + 1.0));
    }
    let chi = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Hilb's main-term approximation `sqrt(θ / sin θ) J₀((ℓ + 1/2) θ)` to `P_ℓ(cos θ)`.
pub fn hilb_approx(degree: usize, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < PI) {
        return domain(format!("Hilb approximation needs 0 < θ < π, got {theta}"));
    }
    Ok((theta / theta.sin()).sqrt() * bessel_j0((degree as f64 + 0.5) * theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn pt(theta: f64, phi: f64) -> SphericalPoint {
        SphericalPoint::new(theta, phi).unwrap()
    }

    #[test]
    fn legendre_examples() {
        assert_eq!(legendre_p(7, 1.0).unwrap(), 1.0);
        assert_eq!(legendre_p(1, 0.5).unwrap(), 0.5);
        let x: f64 = 0.3;
        let quartic = (35.0 * x.powi(4) - 30.0 * x * x + 3.0) / 8.0;
        assert!((quartic - 0.0729375).abs() < 1e-15);
        assert!((legendre_p(4, x).unwrap() - quartic).abs() < 1e-15);
        assert!(legendre_p(3, 1.0001).is_err());
        assert!(legendre_p(3, -1.5).is_err());
    }

    #[test]
    fn legendre_series_matches_single() {
        let s = legendre_series(40, -0.37).unwrap();
        for (l, v) in s.iter().enumerate() {
            assert!((v - legendre_p(l, -0.37).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_mode() {
        let y = spherical_harmonic(HarmonicIndex::new(0, 0).unwrap(), &pt(1.1, 4.0));
        assert!((y.re - 0.282_094_791_773_878_14).abs() < 1e-15);
        assert_eq!(y.im, 0.0);
    }

    #[test]
    fn low_degree_closed_forms() {
        // Y_11 = -sqrt(3/8π) sinθ e^{iφ}, Y_20 = sqrt(5/16π)(3cos²θ - 1).
        let p = pt(0.7, 2.3);
        let y11 = spherical_harmonic(HarmonicIndex::new(1, 1).unwrap(), &p);
        let expect = -(3.0 / (8.0 * PI)).sqrt() * 0.7f64.sin();
        assert!((y11 - Complex64::from_polar(expect, 2.3)).norm() < 1e-15);
        let y20 = spherical_harmonic(HarmonicIndex::new(2, 0).unwrap(), &p);
        let c = 0.7f64.cos();
        assert!((y20.re - (5.0 / (16.0 * PI)).sqrt() * (3.0 * c * c - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn degree_two_sum_is_constant() {
        for p in [pt(0.0, 0.0), pt(1.0, 2.0), pt(PI, 0.0), pt(2.2, 5.9)] {
            let sum: f64 = (-2..=2)
                .map(|m| spherical_harmonic(HarmonicIndex::new(2, m).unwrap(), &p).norm_sqr())
                .sum();
            assert!((sum - 5.0 / (4.0 * PI)).abs() < 1e-14);
        }
    }

    #[test]
    fn reflection_conjugates() {
        let idx = HarmonicIndex::new(3, 1).unwrap();
        let a = spherical_harmonic(idx, &pt(0.9, 1.2));
        let b = spherical_harmonic(idx, &pt(0.9, -1.2));
        assert!((a.conj() - b).norm() < 1e-15);
    }

    #[test]
    fn invalid_index() {
        assert!(HarmonicIndex::new(2, 3).is_err());
        assert!(HarmonicIndex::new(2, -3).is_err());
    }

    #[test]
    fn geodesic_examples() {
        let x = pt(0.4, 1.0);
        assert_eq!(geodesic_distance(&x, &x), 0.0);
        let d = geodesic_distance(&SphericalPoint::north_pole(), &SphericalPoint::south_pole());
        assert!((d - PI).abs() < 1e-15);
        let d = geodesic_distance(&pt(PI / 2.0, 0.0), &pt(PI / 2.0, PI / 2.0));
        assert!((d - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn point_normalization() {
        let p = pt(1.0, -0.5);
        assert!((p.longitude() - (TAU - 0.5)).abs() < 1e-15);
        assert!(SphericalPoint::new(-0.1, 0.0).is_err());
        assert!(SphericalPoint::new(3.2, 0.0).is_err());
        let q = SphericalPoint::from_vector([1.0, 1.0, 0.0]).unwrap();
        assert!((q.colatitude() - PI / 2.0).abs() < 1e-15);
        assert!((q.longitude() - PI / 4.0).abs() < 1e-15);
    }

    /// Direct summation to convergence; independent of the asymptotic branch.
    fn j0_series(x: f64) -> f64 {
        let mut sum = 0.0;
        let mut k = 0u32;
        loop {
            let fact: f64 = (1..=k).map(f64::from).product();
            let term = (-1f64).powi(k as i32) * (0.5 * x).powi(2 * k as i32) / (fact * fact);
            sum += term;
            if k > 4 && term.abs() < 1e-20 {
                return sum;
            }
            k += 1;
        }
    }

    #[test]
    fn bessel_examples() {
        assert_eq!(bessel_j0(0.0), 1.0);
        let oracle = j0_series(1.0);
        assert!((oracle - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j0(1.0) - oracle).abs() < 1e-15);
        // First zero by bisection on the oracle series.
        let (mut lo, mut hi) = (2.0, 3.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if j0_series(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 2.404_825_6).abs() < 1e-7);
        assert!(bessel_j0(2.404_825_6).abs() < 1e-6);
    }

    #[test]
    fn bessel_branches_agree() {
        for &x in &[11.5, 12.0, 12.5, 14.0] {
            assert!((bessel_j0(x) - j0_series(x)).abs() < 1e-10, "x = {x}");
        }
        // Large zeros from McMahon's expansion, accurate to ~1e-12 at these orders.
        for s in [10.0, 20.0, 40.0] {
            let b = (s - 0.25) * PI;
            let z = b + 1.0 / (8.0 * b) - 31.0 / (384.0 * b.powi(3)) + 3779.0 / (15360.0 * b.powi(5));
            assert!(bessel_j0(z).abs() < 1e-10, "J0({z}) = {}", bessel_j0(z));
        }
    }

    #[test]
    fn hilb_regimes() {
        assert!(hilb_approx(5, 0.0).is_err());
        assert!(hilb_approx(5, PI).is_err());
        assert!((hilb_approx(17, 1e-9).unwrap() - 1.0).abs() < 1e-12);
        let theta: f64 = 0.1;
        let err = (hilb_approx(50, theta).unwrap() - legendre_p(50, theta.cos()).unwrap()).abs();
        assert!(err < 0.5 * theta.sqrt() * 50f64.powf(-1.5), "ℓ=50 err {err}");
        let theta: f64 = 0.01;
        let err = (hilb_approx(10, theta).unwrap() - legendre_p(10, theta.cos()).unwrap()).abs();
        assert!(err < theta * theta, "ℓ=10 err {err}");
    }

    #[test]
    fn table_matches_pointwise() {
        let p = pt(1.234, 0.567);
        let table = HarmonicTable::new(20, &p);
        for l in 0..=20usize {
            for m in -(l as i64)..=(l as i64) {
                let direct = spherical_harmonic(HarmonicIndex::new(l, m).unwrap(), &p);
                assert!((table.get(l, m) - direct).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn order_power_matches_table() {
        let w: Vec<f64> = (0..=300).map(|l| (l as f64 + 0.5).powf(-2.5)).collect();
        for theta in [0.0, 0.8, FRAC_PI_2] {
            let s = order_power(300, theta, &w).unwrap();
            let table = normalized_legendre_table(300, theta);
            for m in [0usize, 1, 17, 300] {
                let direct: f64 = (m..=300).map(|l| w[l] * table[tri_index(l, m)].powi(2)).sum();
                assert!((s[m] - direct).abs() <= 1e-14 * direct.abs().max(1e-300));
            }
            let total: f64 = s[0] + 2.0 * s[1..].iter().sum::<f64>();
            let expected: f64 = w.iter().enumerate().map(|(l, w)| w * (2 * l + 1) as f64 / (4.0 * PI)).sum();
            assert!((total / expected - 1.0).abs() < 1e-12);
        }
        assert!(order_power(3, 0.1, &[1.0]).is_err());
    }

    #[test]
    fn high_degree_sum_rule() {
        // Σ_m |Y_ℓm|² = (2ℓ+1)/4π tests the renormalized recurrence deep into the table.
        for theta in [0.05, 0.37, 1.3] {
            let table = normalized_legendre_table(2048, theta);
            for l in [512usize, 1500, 2048] {
                let mut s = table[tri_index(l, 0)].powi(2);
                for m in 1..=l {
                    s += 2.0 * table[tri_index(l, m)].powi(2);
                }
                let expect = (2.0 * l as f64 + 1.0) / (4.0 * PI);
                assert!((s / expect - 1.0).abs() < 1e-9, "θ={theta} ℓ={l}: {s} vs {expect}");
            }
        }
    }

    proptest! {
        #[test]
        fn legendre_bounded(l in 0usize..300, x in -1.0f64..=1.0) {
            prop_assert!(legendre_p(l, x).unwrap().abs() <= 1.0 + 1e-12);
        }

        #[test]
        fn unit_vector_has_unit_norm(theta in 0.0f64..=PI, phi in -10.0f64..10.0) {
            let v = pt(theta, phi).unit_vector();
            prop_assert!(((v[0]*v[0] + v[1]*v[1] + v[2]*v[2]).sqrt() - 1.0).abs() < 1e-12);
            let p = pt(theta, phi);
            prop_assert!((0.0..TAU).contains(&p.longitude()));
        }

        #[test]
        fn conjugation_relation(l in 0usize..40, mfrac in 0.0f64..=1.0, theta in 0.0f64..=PI, phi in 0.0f64..TAU) {
            let m = (mfrac * l as f64).round() as i64;
            let p = pt(theta, phi);
            let pos = spherical_harmonic(HarmonicIndex::new(l, m).unwrap(), &p);
            let neg = spherical_harmonic(HarmonicIndex::new(l, -m).unwrap(), &p);
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((neg - pos.conj() * sign).norm() < 1e-12);
        }

        #[test]
        fn addition_theorem(t1 in 0.0f64..=PI, p1 in 0.0f64..TAU, t2 in 0.0f64..=PI, p2 in 0.0f64..TAU) {
            let (x, y) = (pt(t1, p1), pt(t2, p2));
            let (tx, ty) = (HarmonicTable::new(16, &x), HarmonicTable::new(16, &y));
            let leg = legendre_series(16, x.dot(&y)).unwrap();
            for l in 0..=16usize {
                let s: Complex64 = (-(l as i64)..=l as i64).map(|m| tx.get(l, m) * ty.get(l, m).conj()).sum();
                let expect = (2.0 * l as f64 + 1.0) / (4.0 * PI) * leg[l];
                prop_assert!((s - expect).norm() < 1e-10);
            }
        }

        #[test]
        fn geodesic_matches_haversine(t1 in 0.0f64..=PI, p1 in 0.0f64..TAU, t2 in 0.0f64..=PI, p2 in 0.0f64..TAU) {
            let (x, y) = (pt(t1, p1), pt(t2, p2));
            let (lat1, lat2) = (PI / 2.0 - t1, PI / 2.0 - t2);
            let h = ((lat2 - lat1) / 2.0).sin().powi(2)
                + lat1.cos() * lat2.cos() * ((p2 - p1) / 2.0).sin().powi(2);
            let hav = 2.0 * h.sqrt().min(1.0).asin();
            let d = geodesic_distance(&x, &y);
            // arccos loses precision near 0 and π; compare where it is well-conditioned.
            prop_assume!(d > 1e-3 && d < PI - 1e-3);
            prop_assert!((d - hav).abs() < 1e-10);
            prop_assert!((d - geodesic_distance(&y, &x)).abs() == 0.0);
        }

        #[test]
        fn triangle_inequality(a in 0.0f64..=PI, b in 0.0f64..TAU, c in 0.0f64..=PI, d in 0.0f64..TAU, e in 0.0f64..=PI, f in 0.0f64..TAU) {
            let (x, y, z) = (pt(a, b), pt(c, d), pt(e, f));
            prop_assert!(geodesic_distance(&x, &z) <= geodesic_distance(&x, &y) + geodesic_distance(&y, &z) + 1e-12);
        }
    }

    #[test]
    fn discrete_orthonormality() {
        // Gauss–Legendre in cos θ times a uniform φ grid integrates degree <= 32 products exactly.
        let n_theta = 24;
        let n_phi = 40;
        let (nodes, weights) = gauss_legendre(n_theta);
        let lmax = 16;
        let mut tables = Vec::new();
        for (i, &x) in nodes.iter().enumerate() {
            for j in 0..n_phi {
                let p = pt(x.acos(), TAU * j as f64 / n_phi as f64);
                tables.push((weights[i] * TAU / n_phi as f64, HarmonicTable::new(lmax, &p)));
            }
        }
        let idx: Vec<(usize, i64)> = (0..=lmax)
            .flat_map(|l| (-(l as i64)..=l as i64).map(move |m| (l, m)))
            .collect();
        for &(l1, m1) in &idx {
            for &(l2, m2) in &idx {
                let s: Complex64 = tables.iter().map(|(w, t)| t.get(l1, m1) * t.get(l2, m2).conj() * *w).sum();
                let expect = if (l1, m1) == (l2, m2) { 1.0 } else { 0.0 };
                assert!((s - expect).norm() < 1e-8, "({l1},{m1}) vs ({l2},{m2}): {s}");
            }
        }
    }

    /// Gauss–Legendre nodes on [-1, 1] by Newton iteration on P_n.
    fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let p = legendre_p(n, x).unwrap();
                let pm = legendre_p(n - 1, x).unwrap();
                let dp = n as f64 * (x * p - pm) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let p = legendre_p(n, x).unwrap();
            let pm = legendre_p(n - 1, x).unwrap();
            let dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            nodes.push(x);
            weights.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        (nodes, weights)
    }
}
