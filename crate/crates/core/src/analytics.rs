//! Closed-form continuous-wave results of the reduced model: output flux
//! decomposition (any laser frequency) and, for a laser resonant with the
//! effective atom frequency, Bloch eigenvalues, the relaxation coefficients,
//! first-order coherences, spectral densities and second-order correlations.
//!
//! Time-dependent coefficients are kept as finite sums of `w t^k e^{lambda t}`
//! so they can be evaluated at any delay and Laplace-transformed exactly.

use crate::observables::{CorrelationSeries, ModelTag, PortFlux, SpectrumSeries};
use crate::params::{DriveSpec, EffectiveConstants, ParamsError, Port, SystemParams};
use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Largest `|omega_las - omega_a'|`, in units of the total cavity rate, for
/// which the resonant closed forms are used.
pub const RESONANCE_TOLERANCE: f64 = 1e-6;

/// `|lambda_+ - lambda_-| / Gamma` below which the eigenvalues are treated as equal.
pub const CONFLUENCE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("laser is detuned by {detuning:e} from the effective atom frequency; closed forms need resonance")]
    OffResonance { detuning: f64 },
    #[error("Bloch eigenvalues coincide (|lambda_+ - lambda_-| = {gap:e})")]
    DegenerateEigenvalues { gap: f64 },
    #[error("output flux on {0:?} vanishes")]
    ZeroFlux(Port),
    #[error("effective decay rate is zero")]
    NoDecay,
}

/// One term `weight * t^power * exp(rate * t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub weight: C,
    pub rate: C,
    pub power: u32,
}

/// Finite sum of exponential terms, a function of a real time argument.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpSum {
    pub terms: Vec<ExpTerm>,
}

impl ExpSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn exp(weight: C, rate: C) -> Self {
        Self {
            terms: vec![ExpTerm {
                weight,
                rate,
                power: 0,
            }],
        }
    }

    pub fn t_exp(weight: C, rate: C) -> Self {
        Self {
            terms: vec![ExpTerm {
                weight,
                rate,
                power: 1,
            }],
        }
    }

    pub fn eval(&self, t: f64) -> C {
        self.terms
            .iter()
            .map(|e| e.weight * t.powi(e.power as i32) * (e.rate * t).exp())
            .sum()
    }

    /// `int_0^inf f(t) e^{-s t} dt`, valid for `Re s` larger than every rate.
    pub fn laplace(&self, s: C) -> C {
        self.terms
            .iter()
            .map(|e| {
                let d = s - e.rate;
                let fact: f64 = (1..=e.power).map(|k| k as f64).product();
                e.weight * fact / d.powu(e.power + 1)
            })
            .sum()
    }

    /// Pointwise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|e| ExpTerm {
                    weight: e.weight.conj(),
                    rate: e.rate.conj(),
                    power: e.power,
                })
                .collect(),
        }
    }

    /// Pointwise real part, as a sum of exponentials.
    pub fn real_part(&self) -> Self {
        (self.clone() + self.conj()) * C::new(0.5, 0.0)
    }

    /// Derivative at `t = 0`.
    pub fn derivative_at_zero(&self) -> C {
        self.terms
            .iter()
            .map(|e| match e.power {
                0 => e.weight * e.rate,
                1 => e.weight,
                _ => ZERO,
            })
            .sum()
    }
}

impl Add for ExpSum {
    type Output = ExpSum;
    fn add(mut self, rhs: ExpSum) -> ExpSum {
        self.terms.extend(rhs.terms);
        self
    }
}

impl Neg for ExpSum {
    type Output = ExpSum;
    fn neg(self) -> ExpSum {
        self * C::new(-1.0, 0.0)
    }
}

impl Sub for ExpSum {
    type Output = ExpSum;
    fn sub(self, rhs: ExpSum) -> ExpSum {
        self + (-rhs)
    }
}

impl Mul<C> for ExpSum {
    type Output = ExpSum;
    fn mul(mut self, rhs: C) -> ExpSum {
        for e in &mut self.terms {
            e.weight *= rhs;
        }
        self
    }
}

/// Eigenvalues of the resonant Bloch equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochEigenvalues {
    pub lambda_0: C,
    pub lambda_plus: C,
    pub lambda_minus: C,
    /// `lambda_+ - lambda_0`, computed without cancellation.
    pub plus_gap: C,
    /// `lambda_- - lambda_0`.
    pub minus_gap: C,
    /// `lambda_+ lambda_-`.
    pub product: f64,
}

impl BlochEigenvalues {
    pub fn from_constants(c: &EffectiveConstants) -> Result<Self, AnalyticsError> {
        let gamma = c.gamma;
        if gamma <= 0.0 {
            return Err(AnalyticsError::NoDecay);
        }
        let drive = c.omega.norm_sqr() * (ONE + c.x).re;
        let q = 16.0 * drive / (gamma * gamma);
        let r = 1.0 - q;
        let root = C::new(r, 0.0).sqrt();
        let quarter = 0.25 * gamma;
        let plus_gap = if r > 0.0 {
            C::new(-quarter * q / (root.re + 1.0), 0.0)
        } else {
            quarter * (root - 1.0)
        };
        let minus_gap = -quarter * (root + 1.0);
        let lambda_0 = C::new(-0.5 * gamma, 0.0);
        Ok(Self {
            lambda_0,
            lambda_plus: lambda_0 + plus_gap,
            lambda_minus: lambda_0 + minus_gap,
            plus_gap,
            minus_gap,
            product: 0.5 * gamma * gamma + drive,
        })
    }

    pub fn splitting(&self) -> C {
        self.plus_gap - self.minus_gap
    }

    pub fn is_confluent(&self) -> bool {
        self.splitting().norm() < CONFLUENCE_TOLERANCE * (-2.0 * self.lambda_0.re)
    }
}

/// Relaxation coefficients of the atom moments towards the steady state:
/// `d<sigma>(t) = A1 dn + A2 ds* + A3 ds`, `dn(t) = B1 dn + B2 ds* + B3 ds`,
/// and the analogues `C_i`, `D_i` for `<sigma'>` and `<sigma'^dag sigma'>`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsCoefficients {
    pub a: [ExpSum; 3],
    pub b: [ExpSum; 3],
    pub c: [ExpSum; 3],
    pub d: [ExpSum; 3],
}

/// [`DynamicsCoefficients`] evaluated at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientValues {
    pub a: [C; 3],
    pub b: [C; 3],
    pub c: [C; 3],
    pub d: [C; 3],
}

impl DynamicsCoefficients {
    pub fn evaluate(&self, t: f64) -> CoefficientValues {
        let ev = |s: &[ExpSum; 3]| [s[0].eval(t), s[1].eval(t), s[2].eval(t)];
        CoefficientValues {
            a: ev(&self.a),
            b: ev(&self.b),
            c: ev(&self.c),
            d: ev(&self.d),
        }
    }
}

/// Weights of the three-exponential first-order coherences, for the atom
/// ports (`n0..n2`) and the cavity ports (`n0p..n2p`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppendixCoefficients {
    pub n0: C,
    pub n1: C,
    pub n2: C,
    pub n0p: C,
    pub n1p: C,
    pub n2p: C,
}

/// Steady or conditional atom moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomMoments {
    /// `<sigma^dag sigma>`.
    pub excitation: f64,
    /// `<sigma>`.
    pub sigma: C,
}

/// Closed-form layer for one device and one continuous-wave drive.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticModel {
    pub constants: EffectiveConstants,
    pub steady: AtomMoments,
    /// `<sigma'>` in the steady state.
    pub sigma_prime: C,
    /// `<sigma'^dag sigma'>` in the steady state.
    pub sigma_prime_number: f64,
}

/// Steady-state moments from the closed-form expressions.
pub fn steady_moments(c: &EffectiveConstants) -> AtomMoments {
    let gp = c.gamma_prime_minus;
    let y = ONE + c.x;
    let drive = (c.omega * y / (2.0 * gp)).norm_sqr();
    let sat = c.omega.norm_sqr() * (gp * y).re / (c.gamma * gp.norm_sqr());
    let n = if drive == 0.0 {
        0.0
    } else {
        drive / (1.0 + sat)
    };
    AtomMoments {
        excitation: n,
        sigma: c.omega / (2.0 * gp) * (2.0 * n - 1.0 - c.x),
    }
}

/// `(<sigma'>, <sigma'^dag sigma'>)` for atom moments `(n, s)`.
pub fn sigma_prime_moments(c: &EffectiveConstants, m: &AtomMoments) -> (C, f64) {
    let (n, s) = (m.excitation, m.sigma);
    let w = c.sigma_prime_weight();
    let mean = s - w * (2.0 * n - 1.0 - c.x);
    let q = c.omega * (ONE + c.x) / c.kappa_prime;
    let number = n * (1.0 - (c.omega / c.kappa_prime).norm_sqr() * c.x.re)
        + (q * 0.5).norm_sqr()
        + (s.conj() * q).re;
    (mean, number)
}

impl AnalyticModel {
    pub fn new(p: &SystemParams, drive: &DriveSpec) -> Result<Self, AnalyticsError> {
        let constants = EffectiveConstants::new(p, drive)?;
        if constants.gamma <= 0.0 {
            return Err(AnalyticsError::NoDecay);
        }
        let steady = steady_moments(&constants);
        let (sigma_prime, sigma_prime_number) = sigma_prime_moments(&constants, &steady);
        Ok(Self {
            constants,
            steady,
            sigma_prime,
            sigma_prime_number,
        })
    }

    /// `omega_las - omega_a'`.
    pub fn laser_detuning(&self) -> f64 {
        -self.constants.gamma_prime_minus.im
    }

    pub fn is_resonant(&self) -> bool {
        self.laser_detuning().abs() <= RESONANCE_TOLERANCE * self.constants.params.kappa_total()
    }

    fn require_resonance(&self) -> Result<(), AnalyticsError> {
        if self.is_resonant() {
            Ok(())
        } else {
            Err(AnalyticsError::OffResonance {
                detuning: self.laser_detuning(),
            })
        }
    }

    fn check_port(&self, port: Port) -> Result<(), AnalyticsError> {
        if port.exists_in(&self.constants.params) {
            Ok(())
        } else {
            Err(ParamsError::PortOutOfRange(port).into())
        }
    }

    /// Coherent and incoherent output flux of a port (valid at any laser frequency).
    pub fn flux_decomposition(&self, port: Port) -> Result<PortFlux, AnalyticsError> {
        self.check_port(port)?;
        let c = &self.constants;
        let (n, s) = (self.steady.excitation, self.steady.sigma);
        Ok(match port {
            Port::Cavity(j) => {
                let amp = c.empty_cavity_output(j) - c.sqrt_port_rates[j] * self.sigma_prime;
                let var = self.sigma_prime_number - self.sigma_prime.norm_sqr();
                PortFlux::new(amp, c.port_rates[j].norm() * var)
            }
            Port::Atom(l) => {
                let g = c.params.gamma[l];
                let amp = c.drive.input_on(port) + g.sqrt() * s;
                PortFlux::new(amp, g * (n - s.norm_sqr()))
            }
        })
    }

    pub fn bloch_eigenvalues(&self) -> Result<BlochEigenvalues, AnalyticsError> {
        self.require_resonance()?;
        BlochEigenvalues::from_constants(&self.constants)
    }

    pub fn dynamics_coefficients(&self) -> Result<DynamicsCoefficients, AnalyticsError> {
        let ev = self.bloch_eigenvalues()?;
        let c = &self.constants;
        let omega = c.omega;
        let y = ONE + c.x;
        let re_y = y.re;
        let l0 = ev.lambda_0;
        let (p, m) = (ev.lambda_plus, ev.lambda_minus);
        let phase2 = if omega.norm() == 0.0 {
            ONE
        } else {
            omega * omega / omega.norm_sqr()
        };

        let (a1, k, b1, b2) = if ev.is_confluent() {
            let mu = 0.5 * (p + m);
            let dm = mu - l0;
            (
                ExpSum::t_exp(omega, mu),
                ExpSum::exp(ONE, mu) + ExpSum::t_exp(-dm, mu),
                ExpSum::exp(ONE, mu) + ExpSum::t_exp(dm, mu),
                ExpSum::t_exp(-y * omega * 0.5, mu),
            )
        } else {
            let split = ev.splitting();
            (
                ExpSum::exp(-omega / split, m) + ExpSum::exp(omega / split, p),
                ExpSum::exp(ev.plus_gap / split, m) + ExpSum::exp(-ev.minus_gap / split, p),
                ExpSum::exp(ev.plus_gap / split, p) + ExpSum::exp(-ev.minus_gap / split, m),
                ExpSum::exp(-y * omega / (2.0 * split), p)
                    + ExpSum::exp(y * omega / (2.0 * split), m),
            )
        };
        let a2 = (k.clone() - ExpSum::exp(ONE, l0)) * (y * phase2 / (2.0 * re_y));
        let a3 = k * (y.conj() / (2.0 * re_y)) + ExpSum::exp(y / (2.0 * re_y), l0);
        let b3 = b2.conj();

        let ratio = omega / c.kappa_prime;
        let cc = [
            a1.clone() - b1.clone() * ratio,
            a2.clone() - b2.clone() * ratio,
            a3.clone() - b3.clone() * ratio,
        ];
        let q = omega * y / c.kappa_prime;
        let pop = C::new(1.0 - ratio.norm_sqr() * c.x.re, 0.0);
        let d1 = (a1.conj() * q).real_part() + b1.clone() * pop;
        let d2 = a3.conj() * (q * 0.5) + a2.clone() * (q * 0.5).conj() + b2.clone() * pop;
        let d3 = d2.conj();
        Ok(DynamicsCoefficients {
            a: [a1, a2, a3],
            b: [b1, b2, b3],
            c: cc,
            d: [d1, d2, d3],
        })
    }

    pub fn appendix_coefficients(&self) -> Result<AppendixCoefficients, AnalyticsError> {
        let ev = self.bloch_eigenvalues()?;
        if ev.is_confluent() {
            return Err(AnalyticsError::DegenerateEigenvalues {
                gap: ev.splitting().norm(),
            });
        }
        let c = &self.constants;
        let x = c.x;
        let kp = c.kappa_prime;
        let o2 = c.omega.norm_sqr();
        if o2 == 0.0 {
            return Ok(AppendixCoefficients {
                n0: ZERO,
                n1: ZERO,
                n2: ZERO,
                n0p: ZERO,
                n1p: ZERO,
                n2p: ZERO,
            });
        }
        let y = ONE + x;
        let ay2 = y.norm_sqr();
        let pp = ev.product;
        let l0 = ev.lambda_0;
        let (lp, lm) = (ev.lambda_plus, ev.lambda_minus);
        let (dp, dm) = (ev.plus_gap, ev.minus_gap);
        let sum = lp + lm;
        let lead = o2 * o2 * ay2;
        let xi = x.conj() - x;

        let n0 = lead * y.conj() / (4.0 * pp * dp * dm)
            * (ONE + xi / (2.0 * l0 * l0 * ay2) * (o2 * ay2 - pp * y));
        let n1 = lead / (4.0 * pp * (lm - lp))
            * (y * (2.0 - sum / l0) - o2 * ay2 / (pp * l0) * (l0 - sum));
        let n2 = -lead / (4.0 * pp * pp * l0 * (lm - lp)) * (o2 * ay2 - pp * y);
        let n0p = lead * y.conj() / (4.0 * pp * dp * dm)
            * (ONE
                - ((o2 - pp / y.conj()) * (2.0 * l0 - kp * xi) - o2 * l0 * xi)
                    / (2.0 * l0 * l0 * kp));
        let n1p = lead * y / (4.0 * pp * (lp - lm) * kp.conj())
            * (ONE
                + (o2 * y.conj() - pp - (o2 * ay2 / pp * (kp + l0) - kp * y) * (l0 - sum))
                    / (l0 * kp * y));
        let n2p = lead / (4.0 * l0 * pp * (lp - lm) * kp.norm_sqr())
            * (kp * y + 2.0 * l0 - o2 * ay2 / pp * (kp + l0));
        Ok(AppendixCoefficients {
            n0,
            n1,
            n2,
            n0p,
            n1p,
            n2p,
        })
    }

    /// Port-scaled incoherent first-order coherence built from the relaxation
    /// coefficients (works in the confluent case too).
    pub fn g1_from_dynamics(&self, port: Port) -> Result<ExpSum, AnalyticsError> {
        self.check_port(port)?;
        let dc = self.dynamics_coefficients()?;
        let c = &self.constants;
        let (n, s) = (self.steady.excitation, self.steady.sigma);
        Ok(match port {
            Port::Atom(l) => {
                let f = dc.a[0].conj() * (-n * s)
                    + dc.a[1].conj() * (-s * s)
                    + dc.a[2].conj() * C::new(n - s.norm_sqr(), 0.0);
                f * C::new(c.params.gamma[l], 0.0)
            }
            Port::Cavity(j) => {
                let w = c.sigma_prime_weight();
                let sp = self.sigma_prime;
                let first = dc.c[2].conj() * (n + s.conj() * ((ONE + c.x) * w - sp));
                let tail = (ONE - c.x) * w + sp;
                let second = (dc.c[1].conj() * s + dc.c[0].conj() * C::new(n, 0.0)) * tail;
                (first - second) * C::new(c.port_rates[j].norm(), 0.0)
            }
        })
    }

    /// Port-scaled incoherent first-order coherence as three exponentials with
    /// the closed-form weights; falls back to [`Self::g1_from_dynamics`] when
    /// the eigenvalues coincide.
    pub fn g1_expsum(&self, port: Port) -> Result<ExpSum, AnalyticsError> {
        self.check_port(port)?;
        let ev = self.bloch_eigenvalues()?;
        let nc = match self.appendix_coefficients() {
            Ok(v) => v,
            Err(AnalyticsError::DegenerateEigenvalues { .. }) => {
                return self.g1_from_dynamics(port)
            }
            Err(e) => return Err(e),
        };
        let c = &self.constants;
        let (l0, lp, lm) = (ev.lambda_0, ev.lambda_plus, ev.lambda_minus);
        let (dp, dm) = (ev.plus_gap, ev.minus_gap);
        Ok(match port {
            Port::Atom(l) => {
                let f = ExpSum::exp(nc.n0, l0)
                    + ExpSum::exp(nc.n1 / dp + nc.n2, lp)
                    + ExpSum::exp(-(nc.n1 / dm + nc.n2), lm);
                f * C::new(c.params.gamma[l], 0.0)
            }
            Port::Cavity(j) => {
                let kc = c.kappa_prime.conj();
                let f = ExpSum::exp(nc.n0p, l0)
                    + ExpSum::exp((nc.n1p / dp + nc.n2p) * (dp - kc), lp)
                    + ExpSum::exp(-(nc.n1p / dm + nc.n2p) * (dm - kc), lm);
                f * C::new(c.port_rates[j].norm(), 0.0)
            }
        })
    }

    /// Port-scaled incoherent coherence `<b^dag(tau) b> - |<b>|^2` on a delay grid.
    pub fn g1_incoherent(
        &self,
        port: Port,
        tau: &[f64],
    ) -> Result<CorrelationSeriesComplex, AnalyticsError> {
        let f = self.g1_expsum(port)?;
        Ok(CorrelationSeriesComplex {
            tau: tau.to_vec(),
            values: tau.iter().map(|&t| f.eval(t)).collect(),
        })
    }

    /// Incoherent spectral density, normalised so that its integral over
    /// angular frequency is the incoherent flux.
    pub fn spectral_density(
        &self,
        port: Port,
        omega: &[f64],
    ) -> Result<SpectrumSeries, AnalyticsError> {
        let f = self.g1_expsum(port)?;
        let w = self.constants.drive.omega_las;
        let density = omega
            .iter()
            .map(|&o| f.laplace(C::new(0.0, o - w)).re / std::f64::consts::PI)
            .collect();
        let flux = self.flux_decomposition(port)?;
        Ok(SpectrumSeries {
            model: ModelTag::Analytic,
            omega: omega.to_vec(),
            density,
            coherent_weight: flux.coherent,
            coherent_frequency: w,
        })
    }

    /// Atom moments right after a photon is detected on `port`.
    pub fn conditional_moments(&self, port: Port) -> Result<AtomMoments, AnalyticsError> {
        self.check_port(port)?;
        let c = &self.constants;
        let (n, s) = (self.steady.excitation, self.steady.sigma);
        let total = self.flux_decomposition(port)?.total;
        if total < 1e-30 {
            return Err(AnalyticsError::ZeroFlux(port));
        }
        Ok(match port {
            Port::Atom(l) => {
                let cin = c.drive.input_on(port);
                let r = c.params.gamma[l].sqrt();
                AtomMoments {
                    excitation: cin.norm_sqr() * n / total,
                    sigma: cin * (cin.conj() * s + r * n) / total,
                }
            }
            Port::Cavity(j) => {
                let w = c.sigma_prime_weight();
                let bc = c.empty_cavity_output(j);
                let rt = c.sqrt_port_rates[j];
                let de = bc + rt * (ONE - c.x) * w;
                let dg = bc - rt * (ONE + c.x) * w;
                AtomMoments {
                    excitation: de.norm_sqr() * n / total,
                    sigma: de * (dg.conj() * s - rt.conj() * n) / total,
                }
            }
        })
    }

    /// Coefficients `(alpha_1 or beta_1, alpha_2 or beta_2)` of the conditional
    /// flux: `G(tau) = flux + k1 dn + k2 ds* + k2^* ds`.
    pub fn conditional_flux_coefficients(
        &self,
        port: Port,
    ) -> Result<(ExpSum, ExpSum), AnalyticsError> {
        self.check_port(port)?;
        let dc = self.dynamics_coefficients()?;
        let c = &self.constants;
        Ok(match port {
            Port::Atom(l) => {
                let g = c.params.gamma[l];
                let r = C::new(g.sqrt(), 0.0);
                let cin = c.drive.input_on(port);
                let k1 = (dc.a[0].clone() * (r * cin.conj())).real_part() * C::new(2.0, 0.0)
                    + dc.b[0].clone() * C::new(g, 0.0);
                let k2 = dc.a[1].clone() * (r * cin.conj())
                    + dc.a[2].conj() * (r * cin)
                    + dc.b[1].clone() * C::new(g, 0.0);
                (k1, k2)
            }
            Port::Cavity(j) => {
                let rt = c.sqrt_port_rates[j];
                let mag = C::new(c.port_rates[j].norm(), 0.0);
                let bc = c.empty_cavity_output(j);
                let k1 = -(dc.c[0].clone() * (rt * bc.conj())).real_part() * C::new(2.0, 0.0)
                    + dc.d[0].clone() * mag;
                let k2 = -(dc.c[1].clone() * (rt * bc.conj())) - dc.c[2].conj() * (rt.conj() * bc)
                    + dc.d[1].clone() * mag;
                (k1, k2)
            }
        })
    }

    /// Normalised second-order correlation of a port on a delay grid.
    pub fn g2_closed_form(
        &self,
        port: Port,
        tau: &[f64],
    ) -> Result<CorrelationSeries, AnalyticsError> {
        let cond = self.conditional_moments(port)?;
        let (k1, k2) = self.conditional_flux_coefficients(port)?;
        let flux = self.flux_decomposition(port)?.total;
        let dn = cond.excitation - self.steady.excitation;
        let ds = cond.sigma - self.steady.sigma;
        let values = tau
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    return self.g2_zero_delay_with(port, &cond, flux);
                }
                let g = flux + (k1.eval(t) * dn).re + 2.0 * (k2.eval(t) * ds.conj()).re;
                g / flux
            })
            .collect();
        Ok(CorrelationSeries {
            model: ModelTag::Analytic,
            tau: tau.to_vec(),
            values,
        })
    }

    /// Zero-delay second-order correlation from its dedicated closed form
    /// (valid at any laser frequency).
    pub fn g2_zero_delay(&self, port: Port) -> Result<f64, AnalyticsError> {
        let cond = self.conditional_moments(port)?;
        let flux = self.flux_decomposition(port)?.total;
        Ok(self.g2_zero_delay_with(port, &cond, flux))
    }

    fn g2_zero_delay_with(&self, port: Port, cond: &AtomMoments, flux: f64) -> f64 {
        let c = &self.constants;
        let dn = cond.excitation - self.steady.excitation;
        let ds = cond.sigma - self.steady.sigma;
        let (k1, k2) = match port {
            Port::Atom(l) => {
                let g = c.params.gamma[l];
                (g, g.sqrt() * c.drive.input_on(port))
            }
            Port::Cavity(j) => {
                let rt = c.sqrt_port_rates[j];
                let mag = c.port_rates[j].norm();
                let bc = c.empty_cavity_output(j);
                let ratio = c.omega / c.kappa_prime;
                let k1 =
                    2.0 * (rt * bc.conj() * ratio).re + mag * (1.0 - ratio.norm_sqr() * c.x.re);
                let k2 = -rt.conj() * bc + mag * c.omega * (ONE + c.x) / (2.0 * c.kappa_prime);
                (k1, k2)
            }
        };
        1.0 + (k1 * dn + 2.0 * (k2 * ds.conj()).re) / flux
    }
}

/// Complex correlation values on a delay grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeriesComplex {
    pub tau: Vec<f64>,
    pub values: Vec<C>,
}

pub fn bloch_eigenvalues(
    p: &SystemParams,
    drive: &DriveSpec,
) -> Result<BlochEigenvalues, AnalyticsError> {
    AnalyticModel::new(p, drive)?.bloch_eigenvalues()
}

pub fn dynamics_coefficients(
    p: &SystemParams,
    drive: &DriveSpec,
    tau: f64,
) -> Result<CoefficientValues, AnalyticsError> {
    Ok(AnalyticModel::new(p, drive)?
        .dynamics_coefficients()?
        .evaluate(tau))
}

pub fn appendix_coefficients(
    p: &SystemParams,
    drive: &DriveSpec,
) -> Result<AppendixCoefficients, AnalyticsError> {
    AnalyticModel::new(p, drive)?.appendix_coefficients()
}

pub fn flux_decomposition(
    p: &SystemParams,
    drive: &DriveSpec,
    port: Port,
) -> Result<PortFlux, AnalyticsError> {
    AnalyticModel::new(p, drive)?.flux_decomposition(port)
}

pub fn g1_incoherent(
    p: &SystemParams,
    drive: &DriveSpec,
    port: Port,
    tau: f64,
) -> Result<C, AnalyticsError> {
    Ok(AnalyticModel::new(p, drive)?.g1_expsum(port)?.eval(tau))
}

pub fn spectral_density(
    p: &SystemParams,
    drive: &DriveSpec,
    port: Port,
    omega: &[f64],
) -> Result<SpectrumSeries, AnalyticsError> {
    AnalyticModel::new(p, drive)?.spectral_density(port, omega)
}

pub fn g2_closed_form(
    p: &SystemParams,
    drive: &DriveSpec,
    port: Port,
    tau: &[f64],
) -> Result<CorrelationSeries, AnalyticsError> {
    AnalyticModel::new(p, drive)?.g2_closed_form(port, tau)
}
