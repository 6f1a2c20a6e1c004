//! Sweep orchestration: every requested model at every sweep point, with
//! per-point error isolation and discrepancy metrics against a reference model.

use crate::config::{LaserReference, Observable, ScenarioConfig, SweepAxis};
use cavsim_core::analytics::{AnalyticModel, AnalyticsError};
use cavsim_core::full::{self, BuildOptions, FullError};
use cavsim_core::observables::ModelTag;
use cavsim_core::ode::Dopri5;
use cavsim_core::params::{
    effective_atom_frequency, DriveSpec, EffectiveConstants, Port, SystemParams,
};
use cavsim_core::reduced::{ReducedError, ReducedModel};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::HashMap;
use std::time::Instant;
use thiserror::Error;

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "CAVSIM_THREADS";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Reduced(#[from] ReducedError),
    #[error(transparent)]
    Full(#[from] FullError),
}

impl ModelError {
    /// Short machine-readable code written to the CSV.
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::Analytics(e) => match e {
                AnalyticsError::Params(_) => "params",
                AnalyticsError::OffResonance { .. } => "off_resonance",
                AnalyticsError::DegenerateEigenvalues { .. } => "degenerate_eigenvalues",
                AnalyticsError::ZeroFlux(_) => "zero_flux",
                AnalyticsError::NoDecay => "no_decay",
            },
            ModelError::Reduced(e) => match e {
                ReducedError::Params(_) => "params",
                ReducedError::ZeroFlux(_) => "zero_flux",
                ReducedError::NotPositive(_) => "not_positive",
                ReducedError::SingularGenerator => "singular_generator",
                ReducedError::Ode(_) => "ode",
            },
            ModelError::Full(e) => match e {
                FullError::Params(_) => "params",
                FullError::DimensionOverflow { .. } => "dimension_overflow",
                FullError::SingularLiouvillian(_) => "singular_liouvillian",
                FullError::Ode(_) => "ode",
                FullError::NoConvergence { .. } => "no_convergence",
                FullError::ZeroFlux(_) => "zero_flux",
                FullError::AliasWarning { .. } => "alias",
            },
        }
    }
}

/// One sweep point: the swept value and the series it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub sweep_value: f64,
    pub n_in: f64,
    pub g: f64,
}

/// One CSV row: a model's values for one port at one point (and one
/// frequency or delay for spectra and correlations).
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub sweep_value: f64,
    pub n_in: f64,
    pub g: f64,
    pub model: ModelTag,
    pub port: Port,
    /// Detuning from the laser (spectra) or delay (correlations).
    pub abscissa: Option<f64>,
    /// Values in the order of [`value_columns`]; `None` when not computed.
    pub values: Vec<Option<f64>>,
    /// Photon cut-off of the full model.
    pub n_max: Option<usize>,
    /// Error code when the model failed at this point.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discrepancy {
    pub model: ModelTag,
    pub reference: ModelTag,
    pub port: Port,
    pub n_in: f64,
    pub g: f64,
    pub compared: usize,
    pub max_abs: f64,
    pub max_rel: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelTiming {
    pub model: ModelTag,
    pub seconds: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub observable: Observable,
    pub axis: SweepAxis,
    pub models: Vec<ModelTag>,
    pub ports: Vec<Port>,
    pub rows: Vec<Row>,
    pub metrics: Vec<Discrepancy>,
    pub timings: Vec<ModelTiming>,
}

impl ComparisonReport {
    pub fn empty(observable: Observable, axis: SweepAxis) -> Self {
        Self {
            observable,
            axis,
            models: vec![],
            ports: vec![],
            rows: vec![],
            metrics: vec![],
            timings: vec![],
        }
    }

    /// Number of rows carrying an error code.
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn all_computed(&self) -> bool {
        self.failures() == 0
    }
}

/// Value columns written for an observable.
pub fn value_columns(obs: Observable) -> &'static [&'static str] {
    match obs {
        Observable::Flux => &[
            "coherent",
            "incoherent",
            "total",
            "amplitude_re",
            "amplitude_im",
            "phi_in",
        ],
        Observable::Spectrum => &["density", "coherent_weight"],
        Observable::G2 => &["g2"],
    }
}

/// Column holding the per-row abscissa, if any.
pub fn abscissa_column(obs: Observable) -> Option<&'static str> {
    match obs {
        Observable::Flux => None,
        Observable::Spectrum => Some("detuning"),
        Observable::G2 => Some("tau"),
    }
}

/// Index of the value compared between models.
pub fn primary_index(obs: Observable) -> usize {
    match obs {
        Observable::Flux => 2,
        _ => 0,
    }
}

/// Sweep points in output order: coupling series outermost, then input
/// power series, then the swept value.
pub fn points(cfg: &ScenarioConfig) -> Vec<Point> {
    let gs: Vec<f64> = if cfg.sweep.axis == SweepAxis::CouplingG {
        vec![f64::NAN]
    } else {
        cfg.couplings.clone()
    };
    let ns: Vec<f64> = if cfg.sweep.axis == SweepAxis::InputPower {
        vec![f64::NAN]
    } else {
        cfg.drive.n_in.clone()
    };
    let mut out = Vec::new();
    for &g in &gs {
        for &n in &ns {
            for &v in &cfg.sweep.values {
                let (g, n) = match cfg.sweep.axis {
                    SweepAxis::CouplingG => (v, n),
                    SweepAxis::InputPower => (g, v),
                    SweepAxis::LaserDetuning => (g, n),
                };
                out.push(Point {
                    sweep_value: v,
                    n_in: n,
                    g,
                });
            }
        }
    }
    out
}

/// Device and drive at one sweep point.
pub fn point_setup(cfg: &ScenarioConfig, pt: &Point) -> (SystemParams, DriveSpec) {
    let p = SystemParams {
        g: pt.g,
        ..cfg.params.clone()
    };
    let reference = match cfg.drive.reference {
        LaserReference::Atom => p.omega_a,
        LaserReference::EffectiveAtom => effective_atom_frequency(&p),
        LaserReference::Cavity => p.omega_c,
    };
    let detuning = if cfg.sweep.axis == SweepAxis::LaserDetuning {
        pt.sweep_value
    } else {
        cfg.drive.detuning
    };
    let mut d = DriveSpec::from_photon_number(&p, cfg.drive.port, pt.n_in, reference + detuning);
    d.amplitude *= Complex64::from_polar(1.0, cfg.drive.phase);
    (p, d)
}

fn ode() -> Dopri5 {
    Dopri5::with_tolerances(1e-9, 1e-13)
}

struct Evaluation {
    rows: Vec<Row>,
    seconds: f64,
    failed: bool,
}

fn evaluate(cfg: &ScenarioConfig, pt: &Point, model: ModelTag) -> Evaluation {
    let start = Instant::now();
    let base = |port: Port| Row {
        sweep_value: pt.sweep_value,
        n_in: pt.n_in,
        g: pt.g,
        model,
        port,
        abscissa: None,
        values: vec![],
        n_max: None,
        error: None,
    };
    let result = compute(cfg, pt, model, &base);
    let width = value_columns(cfg.observable).len();
    let (rows, failed) = match result {
        Ok(rows) => (rows, false),
        Err(e) => (
            cfg.ports
                .iter()
                .map(|&port| Row {
                    values: vec![None; width],
                    error: Some(e.code().to_string()),
                    ..base(port)
                })
                .collect(),
            true,
        ),
    };
    Evaluation {
        rows,
        seconds: start.elapsed().as_secs_f64(),
        failed,
    }
}

fn compute(
    cfg: &ScenarioConfig,
    pt: &Point,
    model: ModelTag,
    base: &dyn Fn(Port) -> Row,
) -> Result<Vec<Row>, ModelError> {
    let (p, d) = point_setup(cfg, pt);
    let w = d.omega_las;
    let omega: Vec<f64> = cfg.spectrum_detunings().iter().map(|x| w + x).collect();
    let tau = cfg.delays();
    let phi_in = d.flux();
    let mut rows = Vec::new();
    let flux_row = |port: Port, f: cavsim_core::observables::PortFlux, n_max: Option<usize>| Row {
        values: vec![
            Some(f.coherent),
            Some(f.incoherent),
            Some(f.total),
            Some(f.amplitude.re),
            Some(f.amplitude.im),
            Some(phi_in),
        ],
        n_max,
        ..base(port)
    };
    let series_rows =
        |port: Port, xs: &[f64], ys: Vec<Vec<f64>>, n_max: Option<usize>| -> Vec<Row> {
            xs.iter()
                .enumerate()
                .map(|(k, &x)| Row {
                    abscissa: Some(x),
                    values: ys.iter().map(|col| Some(col[k])).collect(),
                    n_max,
                    ..base(port)
                })
                .collect()
        };
    let det = cfg.spectrum_detunings();
    match model {
        ModelTag::Analytic => {
            let a = AnalyticModel::new(&p, &d)?;
            for &port in &cfg.ports {
                match cfg.observable {
                    Observable::Flux => {
                        rows.push(flux_row(port, a.flux_decomposition(port)?, None))
                    }
                    Observable::Spectrum => {
                        let s = a.spectral_density(port, &omega)?;
                        let cw = vec![s.coherent_weight; det.len()];
                        rows.extend(series_rows(port, &det, vec![s.density, cw], None));
                    }
                    Observable::G2 => {
                        let g = a.g2_closed_form(port, &tau)?;
                        rows.extend(series_rows(port, &tau, vec![g.values], None));
                    }
                }
            }
        }
        ModelTag::Reduced => {
            let m = ReducedModel::new(&p, &d)?;
            let st = m.steady_state_numeric()?;
            for &port in &cfg.ports {
                match cfg.observable {
                    Observable::Flux => rows.push(flux_row(port, m.port_flux(&st, port)?, None)),
                    Observable::Spectrum => {
                        let s = m.spectrum(&st, port, &omega)?;
                        let cw = vec![s.coherent_weight; det.len()];
                        rows.extend(series_rows(port, &det, vec![s.density, cw], None));
                    }
                    Observable::G2 => {
                        let g = m.g2(&st, port, &tau, &ode())?;
                        rows.extend(series_rows(port, &tau, vec![g.values], None));
                    }
                }
            }
        }
        ModelTag::Full => {
            let opts = BuildOptions {
                max_dim: 2 * (cfg.full.n_max_cap + 1),
                ..BuildOptions::default()
            };
            let sol = full::solve_converged(&p, &d, cfg.full.tol, &opts, cfg.full.n_max_cap)?;
            let (l, st) = (&sol.liouvillian, &sol.state);
            let n_max = Some(sol.truncation.n_max);
            for &port in &cfg.ports {
                match cfg.observable {
                    Observable::Flux => {
                        rows.push(flux_row(port, full::output_flux(l, st, port)?, n_max))
                    }
                    Observable::Spectrum => {
                        let delays = spectrum_delays(&p, &d, &det)?;
                        let s = full::spectrum(l, st, port, &omega, &delays, &ode())?;
                        let cw = vec![s.coherent_weight; det.len()];
                        rows.extend(series_rows(port, &det, vec![s.density, cw], n_max));
                    }
                    Observable::G2 => {
                        let g = full::g2(l, st, port, &tau, &ode())?;
                        rows.extend(series_rows(port, &tau, vec![g.values], n_max));
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Delay grid for transforming a full-model correlation: long enough for the
/// narrowest line and fine enough for the widest detuning.
pub fn spectrum_delays(
    p: &SystemParams,
    d: &DriveSpec,
    detunings: &[f64],
) -> Result<Vec<f64>, ModelError> {
    let c = EffectiveConstants::new(p, d).map_err(|e| ModelError::Full(e.into()))?;
    let gamma = c.gamma.max(1e-6);
    let span = (40.0 / gamma).max(40.0);
    let widest = detunings
        .iter()
        .fold(1.0f64, |m, x| m.max(x.abs()))
        .max(c.omega.norm());
    let dt = (0.5 / widest).min(0.05);
    let n = (span / dt).ceil() as usize + 1;
    Ok(cavsim_core::observables::linspace(0.0, span, n))
}

/// Discrepancy of each model against the reference model (full if present,
/// otherwise reduced) on the primary value, grouped by series and port.
/// `max_rel` is the largest deviation relative to the largest reference
/// magnitude of the series.
pub fn discrepancy_metrics(
    observable: Observable,
    models: &[ModelTag],
    rows: &[Row],
) -> Vec<Discrepancy> {
    let reference = if models.contains(&ModelTag::Full) {
        ModelTag::Full
    } else if models.contains(&ModelTag::Reduced) {
        ModelTag::Reduced
    } else {
        return vec![];
    };
    let idx = primary_index(observable);
    let key = |r: &Row| {
        (
            r.n_in.to_bits(),
            r.g.to_bits(),
            r.port,
            r.sweep_value.to_bits(),
            r.abscissa.map(f64::to_bits),
        )
    };
    let value = |r: &Row| r.values.get(idx).copied().flatten();
    let mut refs = HashMap::new();
    for r in rows.iter().filter(|r| r.model == reference) {
        if let Some(v) = value(r) {
            refs.insert(key(r), v);
        }
    }
    // series key: (n_in bits, g bits, port, model); totals: (count, max |diff|, max |ref|, sum diff^2)
    type Series = (u64, u64, Port, ModelTag);
    let mut order: Vec<Series> = Vec::new();
    let mut acc: HashMap<Series, (usize, f64, f64, f64)> = HashMap::new();
    for r in rows.iter().filter(|r| r.model != reference) {
        let (Some(v), Some(&rv)) = (value(r), refs.get(&key(r))) else {
            continue;
        };
        let group = (r.n_in.to_bits(), r.g.to_bits(), r.port, r.model);
        let e = acc.entry(group).or_insert_with(|| {
            order.push(group);
            (0, 0.0, 0.0, 0.0)
        });
        let diff = (v - rv).abs();
        e.0 += 1;
        e.1 = e.1.max(diff);
        e.2 = e.2.max(rv.abs());
        e.3 += diff * diff;
    }
    order
        .into_iter()
        .map(|group| {
            let (compared, max_abs, peak, sq) = acc[&group];
            Discrepancy {
                model: group.3,
                reference,
                port: group.2,
                n_in: f64::from_bits(group.0),
                g: f64::from_bits(group.1),
                compared,
                max_abs,
                max_rel: if peak > 0.0 {
                    max_abs / peak
                } else if max_abs > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                },
                l2: sq.sqrt(),
            }
        })
        .collect()
}

fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n: &usize| n > 0)
}

/// Run a scenario with the worker count from `CAVSIM_THREADS` (or rayon's default).
pub fn run_scenario(cfg: &ScenarioConfig) -> ComparisonReport {
    run_scenario_with_threads(cfg, threads_from_env())
}

/// Run a scenario on a dedicated pool of `threads` workers.
pub fn run_scenario_with_threads(cfg: &ScenarioConfig, threads: Option<usize>) -> ComparisonReport {
    let pts = points(cfg);
    let tasks: Vec<(usize, ModelTag)> = (0..pts.len())
        .flat_map(|i| cfg.models.iter().map(move |&m| (i, m)))
        .collect();
    let work = || {
        tasks
            .par_iter()
            .map(|&(i, m)| evaluate(cfg, &pts[i], m))
            .collect::<Vec<_>>()
    };
    let evals = match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    };
    let mut timings: Vec<ModelTiming> = cfg
        .models
        .iter()
        .map(|&model| ModelTiming {
            model,
            seconds: 0.0,
            failures: 0,
        })
        .collect();
    let mut rows = Vec::new();
    for ((_, m), ev) in tasks.iter().zip(evals) {
        let t = timings
            .iter_mut()
            .find(|t| t.model == *m)
            .expect("model listed");
        t.seconds += ev.seconds;
        t.failures += usize::from(ev.failed);
        rows.extend(ev.rows);
    }
    let metrics = discrepancy_metrics(cfg.observable, &cfg.models, &rows);
    ComparisonReport {
        observable: cfg.observable,
        axis: cfg.sweep.axis,
        models: cfg.models.clone(),
        ports: cfg.ports.clone(),
        rows,
        metrics,
        timings,
    }
}
