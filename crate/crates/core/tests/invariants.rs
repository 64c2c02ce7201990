use proptest::prelude::*;

use spherefrac::analysis::{conditional_variance, spatial_conditional_variance, RegularityExponents};
use spherefrac::field::field_covariance;
use spherefrac::harmonics::SphericalPoint;
use spherefrac::quadrature::QuadratureConfig;
use spherefrac::spectral_sampler::{ModelParams, SpectralSampler, TimeGrid};

fn quad() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn point() -> impl Strategy<Value = SphericalPoint> {
    (-1.0f64..1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(z, lon)| SphericalPoint::new(z.acos(), lon).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spatial_conditioning_only_shrinks_variance(
        h in 0.55f64..0.95,
        alpha in 0.3f64..3.0,
        x in point(),
        others in prop::collection::vec(point(), 1..6),
    ) {
        let p = ModelParams::new(h, alpha, 20).unwrap();
        let mut prev = spatial_conditional_variance(&p, 1.0, &x, &[], &quad()).unwrap();
        for k in 1..=others.len() {
            let v = spatial_conditional_variance(&p, 1.0, &x, &others[..k], &quad()).unwrap();
            prop_assert!(v <= prev * (1.0 + 1e-9), "{v} > {prev}");
            prev = v;
        }
    }

    #[test]
    fn temporal_conditioning_only_shrinks_variance(
        h in 0.55f64..0.95,
        alpha in 0.3f64..3.0,
        times in prop::collection::vec(0.0f64..0.95, 1..5),
    ) {
        let p = ModelParams::new(h, alpha, 12).unwrap().with_initial(0.5, 6.0).unwrap();
        let x = SphericalPoint::north_pole();
        let mut prev = conditional_variance(&p, 1.0, &[], &x, &quad()).unwrap();
        for k in 1..=times.len() {
            let mut past = times[..k].to_vec();
            past.sort_by(f64::total_cmp);
            past.dedup();
            let v = conditional_variance(&p, 1.0, &past, &x, &quad()).unwrap();
            prop_assert!(v <= prev * (1.0 + 1e-9), "{v} > {prev}");
            prev = v;
        }
    }

    #[test]
    fn covariance_depends_only_on_distance(
        h in 0.55f64..0.95,
        alpha in 0.3f64..3.0,
        colat in 0.0f64..3.1,
        lon in 0.0f64..6.2,
        spin in 0.0f64..6.2,
    ) {
        // Rotating both points about the polar axis, and reflecting them through
        // the equator, preserves the pair's distance.
        let p = ModelParams::new(h, alpha, 16).unwrap();
        let x = SphericalPoint::new(0.4, 0.1).unwrap();
        let y = SphericalPoint::new(colat, lon).unwrap();
        let a = field_covariance(&p, 0.6, 0.9, &x, &y, &quad()).unwrap();
        let xs = SphericalPoint::new(0.4, 0.1 + spin).unwrap();
        let ys = SphericalPoint::new(colat, lon + spin).unwrap();
        let b = field_covariance(&p, 0.6, 0.9, &xs, &ys, &quad()).unwrap();
        let xr = SphericalPoint::new(std::f64::consts::PI - 0.4, 0.1).unwrap();
        let yr = SphericalPoint::new(std::f64::consts::PI - colat, lon).unwrap();
        let c = field_covariance(&p, 0.6, 0.9, &xr, &yr, &quad()).unwrap();
        let scale = a.abs().max(1e-3);
        prop_assert!((a - b).abs() < 1e-10 * scale);
        prop_assert!((a - c).abs() < 1e-10 * scale);
    }

    #[test]
    fn gamma_increases_with_alpha(h in 0.51f64..0.99, a in 0.01f64..4.0, da in 0.0f64..2.0) {
        let lo = RegularityExponents::new(h, a).unwrap();
        let hi = RegularityExponents::new(h, a + da).unwrap();
        prop_assert!(hi.gamma >= lo.gamma && hi.eta >= lo.eta);
        prop_assert!(lo.eta <= h);
    }
}

#[test]
fn replicates_are_reproducible_individually() {
    let p = ModelParams::new(0.7, 1.2, 6).unwrap();
    let grid = TimeGrid::uniform(4, 1.0).unwrap();
    let sampler = SpectralSampler::new(&p, &grid, &quad()).unwrap();
    let draw = |s: &SpectralSampler, seed, rep| s.sample(seed, rep).entries().collect::<Vec<_>>();
    let a = draw(&sampler, 9, 3);
    let fresh = SpectralSampler::new(&p, &grid, &quad()).unwrap();
    assert_eq!(a, draw(&fresh, 9, 3));
    assert_ne!(a, draw(&sampler, 9, 4));
    assert_ne!(a, draw(&sampler, 10, 3));
}
