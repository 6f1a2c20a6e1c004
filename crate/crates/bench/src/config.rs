//! Scenario configuration: a line-oriented `key = value` grammar with `#`
//! comments, bracketed lists and dotted section keys.
//!
//! ```text
//! preset = set2            # or give g, kappa, gamma, omega_a, omega_c
//! drive.port = cc1
//! drive.n_in = [1e-4, 0.1, 1, 5]
//! sweep.axis = laser_detuning
//! sweep.min = -3
//! sweep.max = 3
//! sweep.points = 601
//! models = [analytic, reduced, full]
//! observable = flux
//! ```
//!
//! Rates and frequencies may be given in any unit; they are rescaled so that
//! the total cavity decay rate is 1.

use cavsim_core::observables::{linspace, ModelTag};
use cavsim_core::params::{presets, Port, SystemParams};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid configuration: {0}")]
pub struct ValidationError(pub String);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    LaserDetuning,
    InputPower,
    CouplingG,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::LaserDetuning => "laser_detuning",
            SweepAxis::InputPower => "input_power",
            SweepAxis::CouplingG => "coupling_g",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "laser_detuning" => Some(SweepAxis::LaserDetuning),
            "input_power" => Some(SweepAxis::InputPower),
            "coupling_g" => Some(SweepAxis::CouplingG),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Flux,
    Spectrum,
    G2,
}

impl Observable {
    pub fn as_str(&self) -> &'static str {
        match self {
            Observable::Flux => "flux",
            Observable::Spectrum => "spectrum",
            Observable::G2 => "g2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "flux" => Some(Observable::Flux),
            "spectrum" => Some(Observable::Spectrum),
            "g2" => Some(Observable::G2),
            _ => None,
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Frequency the laser detuning is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaserReference {
    Atom,
    EffectiveAtom,
    Cavity,
}

impl LaserReference {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "atom" => Some(LaserReference::Atom),
            "effective_atom" => Some(LaserReference::EffectiveAtom),
            "cavity" => Some(LaserReference::Cavity),
            _ => None,
        }
    }
}

/// Sweep axis with its resolved sample values.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub scale: Scale,
    /// Explicit values given instead of a range.
    pub explicit: bool,
    pub values: Vec<f64>,
}

impl Sweep {
    /// Resample the range with a different number of points (explicit value
    /// lists are left untouched).
    pub fn with_points(&self, points: usize) -> Result<Self, ValidationError> {
        if self.explicit {
            return Ok(self.clone());
        }
        let s = Self {
            points,
            ..self.clone()
        };
        s.validate()?;
        Ok(Self {
            values: sample(s.min, s.max, points, s.scale),
            ..s
        })
    }

    fn validate(&self) -> Result<(), ValidationError> {
        if self.explicit {
            if self.values.is_empty() {
                return Err(ValidationError("sweep.values must not be empty".into()));
            }
            return Ok(());
        }
        if self.points < 2 {
            return Err(ValidationError("sweep.points must be at least 2".into()));
        }
        if self.min.partial_cmp(&self.max) != Some(std::cmp::Ordering::Less) {
            return Err(ValidationError(
                "sweep.min must be smaller than sweep.max".into(),
            ));
        }
        if self.scale == Scale::Log && self.min <= 0.0 {
            return Err(ValidationError("log scale requires sweep.min > 0".into()));
        }
        Ok(())
    }
}

fn sample(min: f64, max: f64, points: usize, scale: Scale) -> Vec<f64> {
    match scale {
        Scale::Linear => linspace(min, max, points),
        Scale::Log => linspace(min.ln(), max.ln(), points)
            .into_iter()
            .map(f64::exp)
            .collect(),
    }
}

/// Drive settings shared by every sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveTemplate {
    pub port: Port,
    /// Input photon numbers `N_in = phi_in / kappa`; one series per value.
    pub n_in: Vec<f64>,
    pub phase: f64,
    pub reference: LaserReference,
    /// Laser detuning from the reference when it is not swept.
    pub detuning: f64,
}

/// Detuning grid of spectra, relative to the laser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayGrid {
    pub tau_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullSettings {
    pub n_max_cap: usize,
    /// Relative flux change accepted by the truncation search.
    pub tol: f64,
}

impl Default for FullSettings {
    fn default() -> Self {
        Self {
            n_max_cap: 60,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputPaths {
    pub csv: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Device in units of the total cavity decay rate.
    pub params: SystemParams,
    /// Coupling strengths, one series per value.
    pub couplings: Vec<f64>,
    pub drive: DriveTemplate,
    pub sweep: Sweep,
    pub models: Vec<ModelTag>,
    pub observable: Observable,
    pub ports: Vec<Port>,
    pub spectrum: SpectrumGrid,
    pub g2: DelayGrid,
    pub full: FullSettings,
    pub output: OutputPaths,
    /// Total cavity decay rate in the units of the input file.
    pub unit: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Scalar {
    Num(f64),
    Word(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    One(Scalar),
    List(Vec<Scalar>),
}

#[derive(Debug, Clone)]
struct Entry {
    value: Value,
    line: usize,
    column: usize,
}

const KEYS: &[&str] = &[
    "preset",
    "g",
    "kappa",
    "gamma",
    "omega_a",
    "omega_c",
    "omega_ref",
    "drive.port",
    "drive.n_in",
    "drive.phase",
    "drive.reference",
    "drive.detuning",
    "sweep.axis",
    "sweep.min",
    "sweep.max",
    "sweep.points",
    "sweep.scale",
    "sweep.values",
    "models",
    "observable",
    "ports",
    "spectrum.min",
    "spectrum.max",
    "spectrum.points",
    "g2.tau_max",
    "g2.points",
    "full.n_max_cap",
    "full.tol",
    "output.csv",
    "output.plot",
];

fn perr(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        message: message.into(),
    }
}

fn parse_scalar(text: &str, line: usize, column: usize) -> Result<Scalar, ParseError> {
    let t = text.trim();
    if t.is_empty() {
        return Err(perr(line, column, "missing value"));
    }
    if let Some(inner) = t.strip_prefix('"') {
        return match inner.strip_suffix('"') {
            Some(s) if !s.contains('"') => Ok(Scalar::Word(s.to_string())),
            _ => Err(perr(line, column, "unterminated string")),
        };
    }
    let starts_numeric =
        t.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+' || c == '.');
    if starts_numeric {
        return t
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Scalar::Num)
            .ok_or_else(|| perr(line, column, format!("invalid number `{t}`")));
    }
    if t.chars()
        .all(|c| c.is_ascii_alphanumeric() || "_-./".contains(c))
    {
        Ok(Scalar::Word(t.to_string()))
    } else {
        Err(perr(line, column, format!("invalid value `{t}`")))
    }
}

fn parse_value(text: &str, line: usize, column: usize) -> Result<Value, ParseError> {
    let lead = text.len() - text.trim_start().len();
    let t = text.trim();
    let column = column + lead;
    if let Some(rest) = t.strip_prefix('[') {
        let inner = rest
            .strip_suffix(']')
            .ok_or_else(|| perr(line, column, "unterminated list"))?;
        if inner.trim().is_empty() {
            return Ok(Value::List(vec![]));
        }
        let mut items = Vec::new();
        let mut offset = column + 1;
        for part in inner.split(',') {
            let pad = part.len() - part.trim_start().len();
            items.push(parse_scalar(part, line, offset + pad)?);
            offset += part.len() + 1;
        }
        return Ok(Value::List(items));
    }
    parse_scalar(t, line, column).map(Value::One)
}

fn tokenize(text: &str) -> Result<BTreeMap<String, Entry>, ParseError> {
    let mut map = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        if body.trim().is_empty() {
            continue;
        }
        let eq = body.find('=').ok_or_else(|| {
            perr(
                line,
                body.len() - body.trim_start().len() + 1,
                "expected `key = value`",
            )
        })?;
        let key_raw = &body[..eq];
        let key = key_raw.trim();
        let key_col = key_raw.len() - key_raw.trim_start().len() + 1;
        let valid_key = !key.is_empty()
            && key.split('.').all(|seg| {
                !seg.is_empty()
                    && seg.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_')
                    && seg.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            });
        if !valid_key {
            return Err(perr(line, key_col, format!("invalid key `{key}`")));
        }
        if !KEYS.contains(&key) {
            return Err(perr(line, key_col, format!("unknown key `{key}`")));
        }
        let value = parse_value(&body[eq + 1..], line, eq + 2)?;
        if map.contains_key(key) {
            return Err(perr(line, key_col, format!("duplicate key `{key}`")));
        }
        map.insert(
            key.to_string(),
            Entry {
                value,
                line,
                column: key_col,
            },
        );
    }
    if map.is_empty() {
        return Err(perr(1, 1, "configuration is empty"));
    }
    Ok(map)
}

struct Reader {
    map: BTreeMap<String, Entry>,
}

impl Reader {
    fn entry(&self, key: &str) -> Option<&Entry> {
        self.map.get(key)
    }

    fn type_error(&self, key: &str, what: &str) -> ParseError {
        let e = &self.map[key];
        perr(e.line, e.column, format!("`{key}` expects {what}"))
    }

    fn num(&self, key: &str) -> Result<Option<f64>, ParseError> {
        match self.entry(key).map(|e| &e.value) {
            None => Ok(None),
            Some(Value::One(Scalar::Num(v))) => Ok(Some(*v)),
            Some(_) => Err(self.type_error(key, "a number")),
        }
    }

    fn count(&self, key: &str) -> Result<Option<usize>, ParseError> {
        match self.num(key)? {
            None => Ok(None),
            Some(v) if v >= 0.0 && v.fract() == 0.0 && v < 1e9 => Ok(Some(v as usize)),
            Some(_) => Err(self.type_error(key, "a non-negative integer")),
        }
    }

    fn word(&self, key: &str) -> Result<Option<String>, ParseError> {
        match self.entry(key).map(|e| &e.value) {
            None => Ok(None),
            Some(Value::One(Scalar::Word(w))) => Ok(Some(w.clone())),
            Some(_) => Err(self.type_error(key, "a word")),
        }
    }

    fn nums(&self, key: &str) -> Result<Option<Vec<f64>>, ParseError> {
        match self.entry(key).map(|e| &e.value) {
            None => Ok(None),
            Some(Value::One(Scalar::Num(v))) => Ok(Some(vec![*v])),
            Some(Value::List(items)) => items
                .iter()
                .map(|s| match s {
                    Scalar::Num(v) => Ok(*v),
                    Scalar::Word(_) => Err(self.type_error(key, "numbers")),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Err(self.type_error(key, "a number or a list of numbers")),
        }
    }

    fn words(&self, key: &str) -> Result<Option<Vec<String>>, ParseError> {
        match self.entry(key).map(|e| &e.value) {
            None => Ok(None),
            Some(Value::One(Scalar::Word(w))) => Ok(Some(vec![w.clone()])),
            Some(Value::List(items)) => items
                .iter()
                .map(|s| match s {
                    Scalar::Word(w) => Ok(w.clone()),
                    Scalar::Num(_) => Err(self.type_error(key, "words")),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Err(self.type_error(key, "a word or a list of words")),
        }
    }

    fn choice<T>(
        &self,
        key: &str,
        parse: impl Fn(&str) -> Option<T>,
        options: &str,
    ) -> Result<Option<T>, ParseError> {
        match self.word(key)? {
            None => Ok(None),
            Some(w) => parse(&w.to_ascii_lowercase())
                .map(Some)
                .ok_or_else(|| self.type_error(key, &format!("one of {options}"))),
        }
    }
}

fn preset(name: &str) -> Option<SystemParams> {
    match name {
        "set1" => Some(presets::resonant_high_cooperativity()),
        "set2" | "strong" => Some(presets::detuned_unit_cooperativity()),
        _ => None,
    }
}

/// Parse and validate a configuration.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let r = Reader {
        map: tokenize(text)?,
    };

    let base = match r.word("preset")? {
        Some(name) => Some(
            preset(&name.to_ascii_lowercase())
                .ok_or_else(|| r.type_error("preset", "set1, set2 or strong"))?,
        ),
        None => None,
    };
    let couplings = match r.nums("g")? {
        Some(v) => v,
        None => match &base {
            Some(b) => vec![b.g],
            None => return Err(ValidationError("g is required without a preset".into()).into()),
        },
    };
    let kappa = match (r.nums("kappa")?, &base) {
        (Some(v), _) => v,
        (None, Some(b)) => b.kappa.clone(),
        (None, None) => {
            return Err(ValidationError("kappa is required without a preset".into()).into())
        }
    };
    let gamma = match (r.nums("gamma")?, &base) {
        (Some(v), _) => v,
        (None, Some(b)) => b.gamma.clone(),
        (None, None) => {
            return Err(ValidationError("gamma is required without a preset".into()).into())
        }
    };
    let omega_a = r
        .num("omega_a")?
        .or(base.as_ref().map(|b| b.omega_a))
        .unwrap_or(0.0);
    let omega_c = r
        .num("omega_c")?
        .or(base.as_ref().map(|b| b.omega_c))
        .unwrap_or(0.0);
    let omega_ref = r.num("omega_ref")?.unwrap_or(omega_a);

    if couplings.is_empty() {
        return Err(ValidationError("g must not be an empty list".into()).into());
    }
    let raw = SystemParams::new(couplings[0], kappa, gamma, omega_a, omega_c, omega_ref)
        .map_err(|e| ValidationError(e.to_string()))?;
    let (params, unit) = raw.canonical();
    if couplings.iter().any(|g| g.is_nan() || *g < 0.0) {
        return Err(ValidationError("g must be non-negative".into()).into());
    }
    let couplings: Vec<f64> = couplings.iter().map(|g| g / unit).collect();

    let port = match r.word("drive.port")? {
        Some(w) => Port::parse(&w)
            .ok_or_else(|| r.type_error("drive.port", "a port label such as cc1 or ac1"))?,
        None => Port::Cavity(0),
    };
    if !port.exists_in(&params) {
        return Err(ValidationError(format!(
            "drive.port {} does not exist on this device",
            port.label()
        ))
        .into());
    }
    let reference = r
        .choice(
            "drive.reference",
            LaserReference::parse,
            "atom, effective_atom, cavity",
        )?
        .unwrap_or(LaserReference::Atom);
    let phase = r.num("drive.phase")?.unwrap_or(0.0);
    let detuning = r.num("drive.detuning")?.unwrap_or(0.0) / unit;

    let axis = r
        .choice(
            "sweep.axis",
            SweepAxis::parse,
            "laser_detuning, input_power, coupling_g",
        )?
        .ok_or_else(|| ValidationError("sweep.axis is required".into()))?;
    let scale = r
        .choice(
            "sweep.scale",
            |s| match s {
                "linear" => Some(Scale::Linear),
                "log" => Some(Scale::Log),
                _ => None,
            },
            "linear, log",
        )?
        .unwrap_or(Scale::Linear);
    let unit_of_axis = match axis {
        SweepAxis::InputPower => 1.0,
        _ => unit,
    };
    let sweep = match r.nums("sweep.values")? {
        Some(values) => {
            if r.entry("sweep.min").is_some()
                || r.entry("sweep.max").is_some()
                || r.entry("sweep.points").is_some()
            {
                return Err(ValidationError(
                    "sweep.values excludes sweep.min, sweep.max and sweep.points".into(),
                )
                .into());
            }
            let values: Vec<f64> = values.iter().map(|v| v / unit_of_axis).collect();
            let (min, max) = values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                    (a.min(v), b.max(v))
                });
            Sweep {
                axis,
                min,
                max,
                points: values.len(),
                scale,
                explicit: true,
                values,
            }
        }
        None => {
            let min = r
                .num("sweep.min")?
                .ok_or_else(|| ValidationError("sweep.min is required".into()))?
                / unit_of_axis;
            let max = r
                .num("sweep.max")?
                .ok_or_else(|| ValidationError("sweep.max is required".into()))?
                / unit_of_axis;
            let points = r
                .count("sweep.points")?
                .ok_or_else(|| ValidationError("sweep.points is required".into()))?;
            Sweep {
                axis,
                min,
                max,
                points,
                scale,
                explicit: false,
                values: vec![],
            }
        }
    };
    sweep.validate()?;
    let sweep = if sweep.explicit {
        sweep
    } else {
        Sweep {
            values: sample(sweep.min, sweep.max, sweep.points, sweep.scale),
            ..sweep
        }
    };
    if axis == SweepAxis::InputPower && sweep.values.iter().any(|v| *v < 0.0) {
        return Err(ValidationError("input power must be non-negative".into()).into());
    }
    if axis == SweepAxis::CouplingG && sweep.values.iter().any(|v| *v < 0.0) {
        return Err(ValidationError("g must be non-negative".into()).into());
    }

    let n_in = match r.nums("drive.n_in")? {
        Some(v) => v,
        None if axis == SweepAxis::InputPower => vec![],
        None => {
            return Err(ValidationError(
                "drive.n_in is required unless the input power is swept".into(),
            )
            .into())
        }
    };
    if n_in.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(ValidationError("drive.n_in must be non-negative".into()).into());
    }
    if axis == SweepAxis::InputPower && !n_in.is_empty() {
        return Err(
            ValidationError("drive.n_in and an input_power sweep are exclusive".into()).into(),
        );
    }
    if axis == SweepAxis::CouplingG
        && r.entry("g")
            .is_some_and(|e| matches!(e.value, Value::List(_)))
    {
        return Err(
            ValidationError("a list of g and a coupling_g sweep are exclusive".into()).into(),
        );
    }

    let models = match r.words("models")? {
        None => ModelTag::ALL.to_vec(),
        Some(ws) if ws.len() == 1 && ws[0].eq_ignore_ascii_case("all") => ModelTag::ALL.to_vec(),
        Some(ws) => {
            let mut out = Vec::new();
            for w in ws {
                let m = ModelTag::parse(&w)
                    .ok_or_else(|| r.type_error("models", "analytic, reduced, full or all"))?;
                if !out.contains(&m) {
                    out.push(m);
                }
            }
            out
        }
    };
    if models.is_empty() {
        return Err(ValidationError("models must not be empty".into()).into());
    }
    let observable = r
        .choice("observable", Observable::parse, "flux, spectrum, g2")?
        .unwrap_or(Observable::Flux);
    let ports = match r.words("ports")? {
        None => Port::all(&params),
        Some(ws) => {
            let mut out = Vec::new();
            for w in ws {
                let p = Port::parse(&w)
                    .ok_or_else(|| r.type_error("ports", "port labels such as cc1 or ac1"))?;
                if !p.exists_in(&params) {
                    return Err(ValidationError(format!(
                        "port {} does not exist on this device",
                        p.label()
                    ))
                    .into());
                }
                if !out.contains(&p) {
                    out.push(p);
                }
            }
            out
        }
    };
    if ports.is_empty() {
        return Err(ValidationError("ports must not be empty".into()).into());
    }

    let spectrum = SpectrumGrid {
        min: r.num("spectrum.min")?.unwrap_or(-2.0) / unit,
        max: r.num("spectrum.max")?.unwrap_or(2.0) / unit,
        points: r.count("spectrum.points")?.unwrap_or(401),
    };
    if spectrum.points < 2
        || spectrum.min.partial_cmp(&spectrum.max) != Some(std::cmp::Ordering::Less)
    {
        return Err(ValidationError(
            "spectrum grid needs spectrum.min < spectrum.max and at least 2 points".into(),
        )
        .into());
    }
    let g2 = DelayGrid {
        tau_max: r.num("g2.tau_max")?.unwrap_or(60.0) * unit,
        points: r.count("g2.points")?.unwrap_or(301),
    };
    if g2.points < 2 || g2.tau_max.is_nan() || g2.tau_max <= 0.0 {
        return Err(ValidationError(
            "delay grid needs g2.tau_max > 0 and at least 2 points".into(),
        )
        .into());
    }
    let full = FullSettings {
        n_max_cap: r.count("full.n_max_cap")?.unwrap_or(60),
        tol: r.num("full.tol")?.unwrap_or(1e-6),
    };
    if full.n_max_cap < 3 || full.tol.is_nan() || full.tol <= 0.0 {
        return Err(ValidationError(
            "full.n_max_cap must be at least 3 and full.tol positive".into(),
        )
        .into());
    }
    let output = OutputPaths {
        csv: r.word("output.csv")?.map(PathBuf::from),
        plot: r.word("output.plot")?.map(PathBuf::from),
    };

    Ok(ScenarioConfig {
        params,
        couplings,
        drive: DriveTemplate {
            port,
            n_in,
            phase,
            reference,
            detuning,
        },
        sweep,
        models,
        observable,
        ports,
        spectrum,
        g2,
        full,
        output,
        unit,
    })
}

impl ScenarioConfig {
    pub fn spectrum_detunings(&self) -> Vec<f64> {
        linspace(self.spectrum.min, self.spectrum.max, self.spectrum.points)
    }

    pub fn delays(&self) -> Vec<f64> {
        linspace(0.0, self.g2.tau_max, self.g2.points)
    }
}
