//! Runs one configured experiment entirely in memory. Nothing touches the
//! filesystem here, so a failure cannot leave partial outputs behind.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use spherefrac::analysis::{
    gradient_energy, initial_tail_decays_superpolynomially, spatial_modulus_experiment, spatial_slnd_scan,
    spatial_variogram, spectrum_slope, spectrum_slope_monte_carlo, temporal_modulus_experiment, temporal_slnd_scan,
    temporal_variogram, truncation_error, EnergyClass, ExponentFit, ModulusReport, RegularityExponents, ScalingCurve,
    VariogramMode,
};
use spherefrac::field::{evaluate_field, field_covariance, noise_covariance, FieldGrid};
use spherefrac::harmonics::SphericalPoint;
use spherefrac::quadrature::QuadratureConfig;
use spherefrac::spectral_sampler::{sample_noise_coefficients, ModelParams, SpectralSampler, TimeGrid};
use spherefrac::Error;

use crate::config::{Direction, Experiment, ExperimentConfig, FieldKind, PointSpec};

/// Spread of the modulus medians across ε allowed at the correct exponent.
pub const MODULUS_SPREAD: f64 = 0.5;
/// Largest median ratio (smallest ε over largest ε) counted as decay for a control.
pub const CONTROL_DECAY: f64 = 0.5;

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Precondition(Vec<String>),
    Numerical(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Precondition(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Precondition(v) => write!(f, "precondition violated: {}", v.join("; ")),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Everything an experiment produces: the JSON report body and named data files.
pub struct Outcome {
    pub result: Value,
    pub files: Vec<(String, Vec<u8>)>,
    pub assertions: Vec<Assertion>,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    /// Full `report.json` document.
    pub fn report(&self, cfg: &ExperimentConfig, seed: u64) -> Value {
        json!({
            "experiment": cfg.experiment.name(),
            "toolkit_version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "model": cfg.model,
            "exponents": RegularityExponents::new(cfg.model.hurst, cfg.model.alpha).ok(),
            "tolerance_scale": cfg.tolerance_scale,
            "result": self.result,
            "assertions": self.assertions,
            "pass": self.pass(),
            "warnings": self.warnings,
        })
    }
}

fn fit_assertion(name: &str, fit: &ExponentFit) -> Option<Assertion> {
    fit.asserted.then(|| Assertion {
        name: name.into(),
        pass: fit.pass,
        detail: format!(
            "slope {:.4} (stderr {:.2e}) vs target {:.4} ± {:.3}",
            fit.slope, fit.stderr, fit.target, fit.tolerance
        ),
    })
}

fn rescale(mut curve: ScalingCurve, scale: f64) -> ScalingCurve {
    curve.fit = curve.fit.rescaled(scale);
    curve
}

fn curve_csv(curve: &ScalingCurve, x_name: &str) -> Vec<u8> {
    let mut buf = Vec::new();
    curve.write_csv(&mut buf, x_name).expect("writing to memory");
    buf
}

fn point(p: [f64; 2]) -> Result<SphericalPoint, Failure> {
    Ok(SphericalPoint::new(p[0], p[1])?)
}

pub fn execute(cfg: &ExperimentConfig, seed: u64) -> Result<Outcome, Failure> {
    let p = &cfg.model;
    let q = &cfg.quadrature;
    let scale = cfg.tolerance_scale;
    match &cfg.experiment {
        Experiment::Sample {
            times,
            grid,
            replicates,
            field,
            coefficients,
        } => sample(p, q, seed, times, grid, *replicates, *field, *coefficients),
        Experiment::Spectrum {
            time,
            degrees,
            monte_carlo_replicates,
        } => {
            let window = degrees[0]..=degrees[1];
            let analytic = rescale(spectrum_slope(p, *time, window.clone(), q)?, scale);
            let mut files = vec![("spectrum.csv".to_string(), curve_csv(&analytic, "l_plus_half"))];
            let mut assertions: Vec<Assertion> = fit_assertion("analytic spectrum slope", &analytic.fit).into_iter().collect();
            let mut warnings = analytic.warnings.clone();
            let mc = match monte_carlo_replicates {
                Some(n) => {
                    let c = rescale(spectrum_slope_monte_carlo(p, *time, window, *n, seed, q)?, scale);
                    files.push(("spectrum_monte_carlo.csv".into(), curve_csv(&c, "l_plus_half")));
                    assertions.extend(fit_assertion("Monte Carlo spectrum slope", &c.fit));
                    warnings.extend(c.warnings.clone());
                    Some(c)
                }
                None => None,
            };
            Ok(Outcome {
                result: json!({ "analytic": analytic, "monte_carlo": mc }),
                files,
                assertions,
                warnings,
            })
        }
        Experiment::Variogram {
            direction,
            time,
            separations,
            point: x,
            monte_carlo_replicates,
        } => {
            let mode = match *monte_carlo_replicates {
                Some(replicates) => VariogramMode::MonteCarlo { replicates, seed },
                None => VariogramMode::Analytic,
            };
            let (curve, x_name) = match direction {
                Direction::Temporal => {
                    let x = match x {
                        Some(v) => point(*v)?,
                        None => SphericalPoint::north_pole(),
                    };
                    (temporal_variogram(p, &x, *time, separations, mode, q)?, "lag")
                }
                Direction::Spatial => (spatial_variogram(p, *time, separations, mode, q)?, "distance"),
            };
            let curve = rescale(curve, scale);
            Ok(Outcome {
                assertions: fit_assertion("variogram exponent", &curve.fit).into_iter().collect(),
                warnings: curve.warnings.clone(),
                files: vec![("variogram.csv".into(), curve_csv(&curve, x_name))],
                result: json!(curve),
            })
        }
        Experiment::Slnd {
            direction,
            time,
            separations,
            conditioning,
        } => {
            let mut scan = match direction {
                Direction::Temporal => temporal_slnd_scan(p, *time, separations, *conditioning, q)?,
                Direction::Spatial => spatial_slnd_scan(p, *time, separations, *conditioning, q)?,
            };
            scan.curve = rescale(scan.curve, scale);
            let mut assertions: Vec<Assertion> = fit_assertion("conditional variance exponent", &scan.curve.fit)
                .into_iter()
                .collect();
            assertions.push(Assertion {
                name: "conditional <= unconditional".into(),
                pass: scan.bounded_by_unconditional,
                detail: format!("unconditional variance {:e}", scan.unconditional),
            });
            Ok(Outcome {
                assertions,
                warnings: scan.curve.warnings.clone(),
                files: vec![("slnd.csv".into(), curve_csv(&scan.curve, "separation"))],
                result: json!(scan),
            })
        }
        Experiment::Truncation { time, levels, powers } => {
            let mut rep = truncation_error(p, *time, levels, q)?;
            rep.fit = rep.fit.rescaled(scale);
            let mut assertions: Vec<Assertion> = fit_assertion("noise tail exponent", &rep.fit).into_iter().collect();
            if p.d0 > 0.0 && !powers.is_empty() {
                assertions.push(Assertion {
                    name: "initial tail decays faster than every tested power".into(),
                    pass: initial_tail_decays_superpolynomially(&rep, powers),
                    detail: format!("powers {powers:?}"),
                });
            }
            let mut csv = String::from("truncation,tail,noise_tail,log_initial_tail,bound_shape,calibrated_ratio\n");
            for r in &rep.rows {
                csv.push_str(&format!(
                    "{},{:e},{:e},{:e},{:e},{:e}\n",
                    r.truncation, r.tail, r.noise_tail, r.log_initial_tail, r.bound_shape, r.calibrated_ratio
                ));
            }
            Ok(Outcome {
                assertions,
                warnings: Vec::new(),
                files: vec![("truncation.csv".into(), csv.into_bytes())],
                result: json!(rep),
            })
        }
        Experiment::Energy { time, levels, order } => {
            let e = gradient_energy(p, *time, levels, *order, q)?;
            let expected = if e.borderline {
                None
            } else if e.predicted_exponent < -1.0 {
                Some(EnergyClass::Converged)
            } else {
                Some(EnergyClass::Divergent)
            };
            let assertions = expected
                .map(|c| Assertion {
                    name: "energy classification".into(),
                    pass: e.class == c,
                    detail: format!(
                        "{:?} with summand exponent {:.3}; predicted {:.3} means {c:?}",
                        e.class, e.summand_exponent, e.predicted_exponent
                    ),
                })
                .into_iter()
                .collect();
            let mut csv = String::from("level,partial_sum,initial_part,increment\n");
            for i in 0..e.levels.len() {
                csv.push_str(&format!(
                    "{},{:e},{:e},{:e}\n",
                    e.levels[i], e.partial_sums[i], e.initial_part[i], e.increments[i]
                ));
            }
            let warnings = if e.borderline {
                vec!["α + 4H on the excluded borderline: classification is exploratory".into()]
            } else {
                Vec::new()
            };
            Ok(Outcome {
                assertions,
                warnings,
                files: vec![("energy.csv".into(), csv.into_bytes())],
                result: json!(e),
            })
        }
        Experiment::Modulus {
            direction,
            epsilons,
            replicates,
            steps,
            time,
            ring_points,
            shifts,
            smoothing,
        } => {
            let reports = match direction {
                Direction::Temporal => {
                    let steps = steps.ok_or_else(|| Failure::Config("temporal modulus needs `steps`".into()))?;
                    temporal_modulus_experiment(p, steps, epsilons, *replicates, seed, shifts, q)?
                }
                Direction::Spatial => {
                    let (Some(t), Some(n)) = (time, ring_points) else {
                        return Err(Failure::Config("spatial modulus needs `time` and `ring_points`".into()));
                    };
                    spatial_modulus_experiment(p, *t, *n, epsilons, *replicates, seed, shifts, *smoothing, q)?
                }
            };
            Ok(modulus_outcome(shifts, *smoothing, reports))
        }
    }
}

fn modulus_outcome(shifts: &[f64], smoothing: Option<f64>, reports: Vec<ModulusReport>) -> Outcome {
    let mut assertions = Vec::new();
    let mut controls = Vec::new();
    let mut summary = String::from("shift,exponent,epsilon,median,lower_quartile,upper_quartile\n");
    let mut raw = String::from("shift,replicate,epsilon,sup_ratio\n");
    for (shift, r) in shifts.iter().zip(&reports) {
        for i in 0..r.epsilons.len() {
            summary.push_str(&format!(
                "{shift},{},{:e},{:e},{:e},{:e}\n",
                r.exponent, r.epsilons[i], r.median[i], r.lower_quartile[i], r.upper_quartile[i]
            ));
        }
        for (rep, row) in r.per_replicate.iter().enumerate() {
            for (e, v) in r.epsilons.iter().zip(row) {
                raw.push_str(&format!("{shift},{rep},{e:e},{v:e}\n"));
            }
        }
        if *shift == 0.0 && smoothing.is_none() {
            assertions.push(Assertion {
                name: "medians stabilize at the correct exponent".into(),
                pass: r.spread() < MODULUS_SPREAD,
                detail: format!("spread {:.3} < {MODULUS_SPREAD}", r.spread()),
            });
        } else {
            controls.push(json!({
                "shift": shift,
                "decay_ratio": r.decay_ratio(),
                "decays": r.decay_ratio() < CONTROL_DECAY,
            }));
        }
    }
    let warnings = reports.first().map(|r| r.warnings.clone()).unwrap_or_default();
    Outcome {
        result: json!({ "shifts": shifts, "smoothing": smoothing, "reports": reports, "controls": controls }),
        files: vec![
            ("modulus.csv".into(), summary.into_bytes()),
            ("modulus_replicates.csv".into(), raw.into_bytes()),
        ],
        assertions,
        warnings,
    }
}

#[allow(clippy::too_many_arguments)]
fn sample(
    p: &ModelParams,
    q: &QuadratureConfig,
    seed: u64,
    times: &[f64],
    grid: &PointSpec,
    replicates: u64,
    kind: FieldKind,
    coefficients: bool,
) -> Result<Outcome, Failure> {
    let points = match grid {
        PointSpec::List { points } => FieldGrid::new(points.iter().map(|&v| point(v)).collect::<Result<_, _>>()?)?,
        PointSpec::Rings { colatitudes, per_ring } => FieldGrid::rings(colatitudes, *per_ring)?,
        PointSpec::Equator { count } => FieldGrid::equator(*count)?,
    };
    let time_grid = TimeGrid::new(times.to_vec(), p.horizon)?;
    let sampler = match kind {
        FieldKind::Solution => Some(SpectralSampler::new(p, &time_grid, q)?),
        FieldKind::Noise => None,
    };
    let draws = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let coeffs = match &sampler {
                Some(s) => s.sample(seed, r),
                None => sample_noise_coefficients(p, &time_grid, seed, r)?,
            };
            let field = evaluate_field(&coeffs, &points)?;
            Ok((coeffs, field))
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let x0 = points.points()[0];
    let analytic = times
        .iter()
        .map(|&t| match kind {
            FieldKind::Solution => field_covariance(p, t, t, &x0, &x0, q),
            FieldKind::Noise => noise_covariance(p, t, t, &x0, &x0),
        })
        .collect::<Result<Vec<f64>, Error>>()?;
    let per_time = (replicates as usize * points.len()) as f64;
    let empirical: Vec<f64> = (0..times.len())
        .map(|i| draws.iter().map(|(_, f)| f.at_time(i).iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / per_time)
        .collect();

    let mut files = Vec::new();
    for (r, (coeffs, field)) in draws.iter().enumerate() {
        let mut csv = Vec::new();
        field.write_csv(&mut csv).map_err(|e| Failure::Io(e.to_string()))?;
        files.push((format!("field_r{r:04}.csv"), csv));
        let mut bin = Vec::new();
        field.write_binary(&mut bin).map_err(|e| Failure::Io(e.to_string()))?;
        files.push((format!("field_r{r:04}.sfld"), bin));
        if coefficients {
            let mut c = Vec::new();
            coeffs.write_csv(&mut c, true).map_err(|e| Failure::Io(e.to_string()))?;
            files.push((format!("coefficients_r{r:04}.csv"), c));
        }
    }
    Ok(Outcome {
        result: json!({
            "field": kind,
            "replicates": replicates,
            "times": times,
            "points": points.len(),
            "analytic_variance": analytic,
            "empirical_mean_square": empirical,
        }),
        files,
        assertions: Vec::new(),
        warnings: Vec::new(),
    })
}
