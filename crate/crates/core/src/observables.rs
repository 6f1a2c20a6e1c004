//! Result types shared by the three models.

use num_complex::Complex64;
use std::fmt;

/// Which model produced a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelTag {
    /// Closed-form continuous-wave expressions of the reduced model.
    Analytic,
    /// Numerical integration of the two-level effective master equation.
    Reduced,
    /// Truncated-Fock atom–cavity master equation.
    Full,
}

impl ModelTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelTag::Analytic => "analytic",
            ModelTag::Reduced => "reduced",
            ModelTag::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "analytic" => Some(ModelTag::Analytic),
            "reduced" => Some(ModelTag::Reduced),
            "full" => Some(ModelTag::Full),
            _ => None,
        }
    }

    pub const ALL: [ModelTag; 3] = [ModelTag::Analytic, ModelTag::Reduced, ModelTag::Full];
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Steady output flux of one port, split into the part carried by the mean
/// field and the fluctuation part.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PortFlux {
    /// Mean output amplitude `<b_out>` or `<c_out>`.
    pub amplitude: Complex64,
    pub coherent: f64,
    pub incoherent: f64,
    pub total: f64,
}

impl PortFlux {
    pub fn new(amplitude: Complex64, incoherent: f64) -> Self {
        let coherent = amplitude.norm_sqr();
        Self {
            amplitude,
            coherent,
            incoherent,
            total: coherent + incoherent,
        }
    }
}

/// Incoherent spectral density on a frequency grid, plus the coherent line
/// reported as a weight at the laser frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSeries {
    pub model: ModelTag,
    /// Absolute angular frequencies.
    pub omega: Vec<f64>,
    /// Incoherent density, photons per unit time per unit angular frequency.
    pub density: Vec<f64>,
    /// Weight of the coherent delta line (equal to the coherent flux).
    pub coherent_weight: f64,
    pub coherent_frequency: f64,
}

impl SpectrumSeries {
    /// Trapezoidal integral of the incoherent density over the grid.
    pub fn integrated(&self) -> f64 {
        trapezoid(&self.omega, &self.density)
    }
}

/// Correlation function sampled on a delay grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub model: ModelTag,
    pub tau: Vec<f64>,
    pub values: Vec<f64>,
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

/// Uniform grid of `points` values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![lo],
        _ => (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// `(1/pi) Re int_0^T f(tau) exp(-i d tau) dtau` for every detuning `d`, by the
/// trapezoid rule on the (possibly non-uniform) delay grid.
pub fn one_sided_fourier(tau: &[f64], f: &[Complex64], detunings: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; tau.len()];
    for k in 0..tau.len().saturating_sub(1) {
        let h = 0.5 * (tau[k + 1] - tau[k]);
        w[k] += h;
        w[k + 1] += h;
    }
    detunings
        .iter()
        .map(|&d| {
            let s: Complex64 = tau
                .iter()
                .zip(f)
                .zip(&w)
                .map(|((&t, &v), &wk)| v * wk * Complex64::from_polar(1.0, -d * t))
                .sum();
            s.re / std::f64::consts::PI
        })
        .collect()
}
