//! Built-in experiment suites. `acceptance` mirrors the acceptance battery
//! for the criteria that are experiments (spectrum through modulus).

use spherefrac::quadrature::QuadratureConfig;
use spherefrac::spectral_sampler::ModelParams;

use crate::config::{Direction, Experiment, ExperimentConfig, FieldKind, PointSpec};

pub const DEFAULT_SEED: u64 = 20_240_601;

fn dyadic(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|e| 2f64.powi(e)).collect()
}

fn model(h: f64, alpha: f64, l: usize) -> ModelParams {
    ModelParams::new(h, alpha, l).expect("suite parameters are valid")
}

fn entry(name: &str, model: ModelParams, experiment: Experiment) -> (String, ExperimentConfig) {
    (
        name.to_string(),
        ExperimentConfig {
            seed: None,
            output: None,
            workers: None,
            tolerance_scale: 1.0,
            quadrature: QuadratureConfig::default(),
            model,
            experiment,
        },
    )
}

pub fn names() -> &'static [&'static str] {
    &["acceptance"]
}

pub fn suite(name: &str) -> Option<Vec<(String, ExperimentConfig)>> {
    (name == "acceptance").then(acceptance)
}

fn acceptance() -> Vec<(String, ExperimentConfig)> {
    let mut v = Vec::new();
    for (tag, alpha, h) in [("a1_h075", 1.0, 0.75), ("a2_h06", 2.0, 0.6), ("a05_h09", 0.5, 0.9)] {
        v.push(entry(
            &format!("spectrum_{tag}"),
            model(h, alpha, 64),
            Experiment::Spectrum {
                time: 1.0,
                degrees: [8, 64],
                monte_carlo_replicates: Some(400),
            },
        ));
    }
    let levels = vec![8, 16, 32, 64, 128];
    for (tag, alpha, h) in [("a1_h075", 1.0, 0.75), ("a2_h06", 2.0, 0.6)] {
        v.push(entry(
            &format!("truncation_{tag}"),
            model(h, alpha, 8),
            Experiment::Truncation {
                time: 1.0,
                levels: levels.clone(),
                powers: Vec::new(),
            },
        ));
    }
    v.push(entry(
        "truncation_initial_data",
        model(0.75, 1.0, 8).with_initial(1.0, 5.0).unwrap(),
        Experiment::Truncation {
            time: 0.05,
            levels,
            powers: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
        },
    ));
    for (tag, alpha) in [("a2_h075", 2.0), ("a1_h075", 1.0)] {
        v.push(entry(
            &format!("variogram_temporal_{tag}"),
            model(0.75, alpha, 256),
            Experiment::Variogram {
                direction: Direction::Temporal,
                time: 0.5,
                separations: dyadic(-12, -5),
                point: Some([1.0, 0.5]),
                monte_carlo_replicates: None,
            },
        ));
    }
    v.push(entry(
        "variogram_spatial_a1_h06",
        model(0.6, 1.0, 2048),
        Experiment::Variogram {
            direction: Direction::Spatial,
            time: 1.0,
            separations: dyadic(-9, -4),
            point: None,
            monte_carlo_replicates: None,
        },
    ));
    v.push(entry(
        "slnd_temporal_a1_h075",
        model(0.75, 1.0, 256),
        Experiment::Slnd {
            direction: Direction::Temporal,
            time: 1.0,
            separations: dyadic(-12, -5),
            conditioning: 8,
        },
    ));
    v.push(entry(
        "slnd_spatial_a1_h06",
        model(0.6, 1.0, 4096),
        Experiment::Slnd {
            direction: Direction::Spatial,
            time: 1.0,
            separations: dyadic(-8, -4),
            conditioning: 8,
        },
    ));
    for (tag, order, alpha, h) in [
        ("gradient_converged", 1, 2.0, 0.75),
        ("gradient_divergent", 1, 0.5, 0.7),
        ("laplacian_converged", 2, 3.0, 0.9),
        ("laplacian_divergent", 2, 2.0, 0.75),
    ] {
        v.push(entry(
            &format!("energy_{tag}"),
            model(h, alpha, 16),
            Experiment::Energy {
                time: 1.0,
                levels: (4..=12).map(|e| 1 << e).collect(),
                order,
            },
        ));
    }
    let eps = vec![2f64.powi(-6), 2f64.powi(-8), 2f64.powi(-10)];
    v.push(entry(
        "modulus_temporal_a2_h075",
        model(0.75, 2.0, 512),
        Experiment::Modulus {
            direction: Direction::Temporal,
            epsilons: eps.clone(),
            replicates: 64,
            steps: Some(1 << 14),
            time: None,
            ring_points: None,
            shifts: vec![0.0, 0.1, -0.1],
            smoothing: None,
        },
    ));
    v.push(entry(
        "modulus_spatial_a1_h06",
        model(0.6, 1.0, 65_535),
        Experiment::Modulus {
            direction: Direction::Spatial,
            epsilons: eps.clone(),
            replicates: 64,
            steps: None,
            time: Some(1.0),
            ring_points: Some(1 << 15),
            shifts: vec![0.0, 0.1, -0.1],
            smoothing: None,
        },
    ));
    v.push(entry(
        "modulus_spatial_smoothed",
        model(0.6, 1.0, 65_535),
        Experiment::Modulus {
            direction: Direction::Spatial,
            epsilons: eps,
            replicates: 64,
            steps: None,
            time: Some(1.0),
            ring_points: Some(1 << 15),
            shifts: vec![0.0],
            smoothing: Some(-2.0),
        },
    ));
    v.push(entry(
        "sample_rings",
        model(0.75, 1.5, 32).with_initial(0.5, 6.0).unwrap(),
        Experiment::Sample {
            times: vec![0.25, 0.5, 1.0],
            grid: PointSpec::Rings {
                colatitudes: vec![0.5, 1.5, 2.5],
                per_ring: 16,
            },
            replicates: 4,
            field: FieldKind::Solution,
            coefficients: true,
        },
    ));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::check;

    #[test]
    fn acceptance_suite_passes_validation() {
        for (name, mut cfg) in suite("acceptance").unwrap() {
            cfg.seed = Some(DEFAULT_SEED);
            assert!(check(&cfg).is_clean(), "{name}: {:?}", check(&cfg));
        }
        assert!(suite("nope").is_none());
    }

    #[test]
    fn suite_configs_round_trip_through_toml() {
        for (_, cfg) in suite("acceptance").unwrap() {
            let text = toml::to_string(&cfg).unwrap();
            assert_eq!(crate::config::parse(&text).unwrap(), cfg);
        }
    }
}
