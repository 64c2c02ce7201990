//! Experiment configuration (TOML) and precondition checks.
//!
//! Times are in model units, angles (colatitude, longitude, distances) in radians.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use spherefrac::analysis::RegularityExponents;
use spherefrac::quadrature::QuadratureConfig;
use spherefrac::spectral_sampler::ModelParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Required, either here or on the command line.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "one")]
    pub tolerance_scale: f64,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    pub model: ModelParams,
    pub experiment: Experiment,
}

fn one() -> f64 {
    1.0
}

fn default_conditioning() -> usize {
    8
}

fn default_shifts() -> Vec<f64> {
    vec![0.0, 0.1]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Temporal,
    Spatial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    #[default]
    Solution,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointSpec {
    /// Explicit `[colatitude, longitude]` pairs.
    List { points: Vec<[f64; 2]> },
    Rings { colatitudes: Vec<f64>, per_ring: usize },
    Equator { count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    Sample {
        times: Vec<f64>,
        grid: PointSpec,
        replicates: u64,
        #[serde(default)]
        field: FieldKind,
        #[serde(default)]
        coefficients: bool,
    },
    Spectrum {
        time: f64,
        degrees: [usize; 2],
        #[serde(default)]
        monte_carlo_replicates: Option<u64>,
    },
    Variogram {
        direction: Direction,
        time: f64,
        separations: Vec<f64>,
        /// Fixed point for temporal variograms; defaults to the north pole.
        #[serde(default)]
        point: Option<[f64; 2]>,
        #[serde(default)]
        monte_carlo_replicates: Option<u64>,
    },
    Slnd {
        direction: Direction,
        time: f64,
        separations: Vec<f64>,
        /// Past times per level (temporal) or ring points (spatial).
        #[serde(default = "default_conditioning")]
        conditioning: usize,
    },
    Truncation {
        time: f64,
        levels: Vec<usize>,
        /// Powers for the superpolynomial test of the initial-data tail.
        #[serde(default)]
        powers: Vec<f64>,
    },
    Energy {
        time: f64,
        levels: Vec<usize>,
        order: u32,
    },
    Modulus {
        direction: Direction,
        epsilons: Vec<f64>,
        replicates: u64,
        /// Temporal: number of equal steps on `[0, T]`.
        #[serde(default)]
        steps: Option<usize>,
        /// Spatial: observation time and equator ring size.
        #[serde(default)]
        time: Option<f64>,
        #[serde(default)]
        ring_points: Option<usize>,
        #[serde(default = "default_shifts")]
        shifts: Vec<f64>,
        #[serde(default)]
        smoothing: Option<f64>,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Sample { .. } => "sample",
            Experiment::Spectrum { .. } => "spectrum",
            Experiment::Variogram { .. } => "variogram",
            Experiment::Slnd { .. } => "slnd",
            Experiment::Truncation { .. } => "truncation",
            Experiment::Energy { .. } => "energy",
            Experiment::Modulus { .. } => "modulus",
        }
    }
}

/// Problems found by [`check`], split by exit class.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Diagnostics {
    pub config: Vec<String>,
    pub preconditions: Vec<String>,
}

impl Diagnostics {
    pub fn is_clean(&self) -> bool {
        self.config.is_empty() && self.preconditions.is_empty()
    }
}

pub fn parse(text: &str) -> Result<ExperimentConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

/// Lists every configuration error and violated precondition without computing anything.
pub fn check(cfg: &ExperimentConfig) -> Diagnostics {
    let mut d = Diagnostics::default();
    let m = &cfg.model;
    if let Err(e) = m.validate() {
        d.config.push(format!("model: {e}"));
    }
    if cfg.seed.is_none() {
        d.config.push("seed is required (config `seed` or --seed)".into());
    }
    if !(cfg.tolerance_scale > 0.0 && cfg.tolerance_scale.is_finite()) {
        d.config.push(format!("tolerance_scale = {} must be positive", cfg.tolerance_scale));
    }
    if cfg.workers == Some(0) {
        d.config.push("workers must be at least 1".into());
    }
    if let Err(e) = cfg.quadrature.validate() {
        d.config.push(format!("quadrature: {e}"));
    }
    let exps = RegularityExponents::new(m.hurst, m.alpha).ok();
    let spatial = |d: &mut Diagnostics, what: &str| {
        if let Some(g) = exps.map(|e| e.gamma) {
            if !(g > 0.0 && g < 1.0) {
                d.preconditions.push(format!("{what}: γ = α/2 - 1 + 2H = {g} is outside (0, 1)"));
            }
        }
        if m.d0 > 0.0 {
            d.preconditions.push(format!("{what}: needs u₀ ≡ 0 (D₀ = 0), got D₀ = {}", m.d0));
        }
    };
    let replicates = |d: &mut Diagnostics, n: u64, min: u64| {
        if n < min {
            d.config.push(format!("replicates = {n}; at least {min} required"));
        }
    };
    match &cfg.experiment {
        Experiment::Sample {
            replicates: n, field, times, ..
        } => {
            replicates(&mut d, *n, 1);
            if times.is_empty() {
                d.config.push("sample: times must not be empty".into());
            }
            if *field == FieldKind::Noise && m.alpha <= 2.0 {
                d.preconditions
                    .push(format!("noise field: pointwise values need α > 2, got α = {}", m.alpha));
            }
        }
        Experiment::Spectrum {
            monte_carlo_replicates, ..
        } => {
            if m.d0 > 0.0 {
                d.preconditions.push("spectrum: the slope law is stated for D₀ = 0".into());
            }
            if let Some(n) = monte_carlo_replicates {
                replicates(&mut d, *n, 2);
            }
        }
        Experiment::Variogram {
            direction,
            monte_carlo_replicates,
            ..
        } => {
            if *direction == Direction::Spatial {
                spatial(&mut d, "spatial variogram");
            }
            if let Some(n) = monte_carlo_replicates {
                replicates(&mut d, *n, 2);
            }
        }
        Experiment::Slnd {
            direction, conditioning, ..
        } => {
            if *direction == Direction::Spatial {
                spatial(&mut d, "spatial SLND");
            }
            if *conditioning == 0 {
                d.config.push("slnd: conditioning must be at least 1".into());
            }
        }
        Experiment::Truncation { .. } | Experiment::Energy { .. } => {}
        Experiment::Modulus {
            direction,
            replicates: n,
            steps,
            time,
            ring_points,
            epsilons,
            ..
        } => {
            replicates(&mut d, *n, 1);
            if epsilons.is_empty() {
                d.config.push("modulus: epsilons must not be empty".into());
            }
            match direction {
                Direction::Temporal => {
                    if steps.is_none() {
                        d.config.push("temporal modulus: `steps` is required".into());
                    }
                    if m.d0 > 0.0 && m.beta <= 4.0 * m.hurst + 2.0 {
                        d.preconditions.push(format!(
                            "temporal modulus: D₀ > 0 needs β > 4H + 2 = {}, got β = {}",
                            4.0 * m.hurst + 2.0,
                            m.beta
                        ));
                    }
                }
                Direction::Spatial => {
                    if time.is_none() || ring_points.is_none() {
                        d.config.push("spatial modulus: `time` and `ring_points` are required".into());
                    }
                    spatial(&mut d, "spatial modulus");
                }
            }
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(model: &str, experiment: &str) -> ExperimentConfig {
        parse(&format!("seed = 1\n[model]\n{model}\n[experiment]\n{experiment}\n")).unwrap()
    }

    const SPATIAL: &str = "kind = \"variogram\"\ndirection = \"spatial\"\ntime = 1.0\nseparations = [0.1, 0.2]";

    #[test]
    fn spatial_gamma_range() {
        let ok = cfg("hurst = 0.6\nalpha = 0.5\ntruncation = 64", SPATIAL);
        assert!(check(&ok).is_clean());
        let bad = cfg("hurst = 0.9\nalpha = 2.5\ntruncation = 64", SPATIAL);
        let d = check(&bad);
        assert_eq!(d.preconditions.len(), 1);
        assert!(d.preconditions[0].contains("2.05"), "{:?}", d.preconditions);
    }

    #[test]
    fn modulus_initial_data_rule() {
        let exp = "kind = \"modulus\"\ndirection = \"temporal\"\nepsilons = [0.01]\nreplicates = 4\nsteps = 256";
        let bad = cfg("hurst = 0.75\nalpha = 1.0\ntruncation = 16\nd0 = 1.0\nbeta = 4.5", exp);
        assert!(check(&bad).preconditions[0].contains("β > 4H + 2 = 5"));
        let ok = cfg("hurst = 0.75\nalpha = 1.0\ntruncation = 16\nd0 = 1.0\nbeta = 5.5", exp);
        assert!(check(&ok).is_clean());
    }

    #[test]
    fn config_errors_are_collected() {
        let text = "tolerance_scale = 0.0\n[model]\nhurst = 0.4\nalpha = 1.0\ntruncation = 8\n[experiment]\nkind = \"sample\"\ntimes = [1.0]\nreplicates = 0\nfield = \"noise\"\n[experiment.grid]\nlayout = \"equator\"\ncount = 4\n";
        let d = check(&parse(text).unwrap());
        assert_eq!(d.config.len(), 4, "{d:?}");
        assert_eq!(d.preconditions.len(), 1);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(parse("seed = 1\nsed = 2\n[model]\nhurst = 0.6\nalpha = 1.0\ntruncation = 8\n[experiment]\nkind = \"energy\"\ntime = 1.0\nlevels = [16]\norder = 1\n").is_err());
    }
}
