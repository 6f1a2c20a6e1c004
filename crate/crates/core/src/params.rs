//! Device parameters and every derived constant used by the reduced model.
//!
//! Rates are angular frequencies. Nothing here assumes a particular unit, but
//! [`SystemParams::canonical`] rescales everything so that the total cavity
//! decay rate is 1, which is the convention used by the presets, the config
//! loader and the tests.

use num_complex::Complex64;
use thiserror::Error;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("selected rate coincides with the cavity rate (|kappa' - rate| = {gap:e})")]
    DegenerateRoot { gap: f64 },
    #[error("1 - x^2 vanishes (|1 - x^2| = {0:e})")]
    SingularX(f64),
    #[error("cooperativity is undefined when the atom has no direct loss channel")]
    ZeroGammaA,
    #[error("drive port {0:?} does not exist")]
    PortOutOfRange(Port),
    #[error("drive frequency {omega_las} is not the reference frequency {omega_ref}")]
    FrameMismatch { omega_las: f64, omega_ref: f64 },
}

/// Raw physical parameters of the atom–cavity device.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Atom–cavity coupling rate.
    pub g: f64,
    /// Decay rates of the cavity-coupled (CC) ports.
    pub kappa: Vec<f64>,
    /// Decay rates of the atom-coupled (AC) ports.
    pub gamma: Vec<f64>,
    pub omega_a: f64,
    pub omega_c: f64,
    /// Frequency of the rotating frame.
    pub omega_ref: f64,
}

impl SystemParams {
    pub fn new(
        g: f64,
        kappa: Vec<f64>,
        gamma: Vec<f64>,
        omega_a: f64,
        omega_c: f64,
        omega_ref: f64,
    ) -> Result<Self, ParamsError> {
        let p = Self {
            g,
            kappa,
            gamma,
            omega_a,
            omega_c,
            omega_ref,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        let finite = [self.g, self.omega_a, self.omega_c, self.omega_ref]
            .iter()
            .chain(self.kappa.iter())
            .chain(self.gamma.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(ParamsError::Invalid("non-finite value".into()));
        }
        if self.g < 0.0 {
            return Err(ParamsError::Invalid(format!("g = {} is negative", self.g)));
        }
        if self.kappa.iter().any(|&k| k < 0.0) {
            return Err(ParamsError::Invalid("negative cavity port rate".into()));
        }
        if self.gamma.iter().any(|&k| k < 0.0) {
            return Err(ParamsError::Invalid("negative atom port rate".into()));
        }
        if self.kappa_total() <= 0.0 {
            return Err(ParamsError::Invalid(
                "total cavity decay rate must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn kappa_total(&self) -> f64 {
        self.kappa.iter().sum()
    }

    pub fn gamma_total(&self) -> f64 {
        self.gamma.iter().sum()
    }

    /// Whether the atom is a good emitter (`gamma_a < kappa / 10`), the
    /// regime the elimination method is built for. Reported, never enforced.
    pub fn is_good_emitter(&self) -> bool {
        self.gamma_total() < 0.1 * self.kappa_total()
    }

    /// Same device seen from a rotating frame at `omega_ref`.
    pub fn with_reference(&self, omega_ref: f64) -> Self {
        Self {
            omega_ref,
            ..self.clone()
        }
    }

    /// Rescale all rates and frequencies by the total cavity decay rate.
    /// Returns the rescaled parameters and the scale that was divided out.
    pub fn canonical(&self) -> (Self, f64) {
        let k = self.kappa_total();
        let p = Self {
            g: self.g / k,
            kappa: self.kappa.iter().map(|v| v / k).collect(),
            gamma: self.gamma.iter().map(|v| v / k).collect(),
            omega_a: self.omega_a / k,
            omega_c: self.omega_c / k,
            omega_ref: self.omega_ref / k,
        };
        (p, k)
    }

    /// `|kappa'| + |gamma'|`, the natural scale for round-off tolerances.
    pub fn rate_scale(&self) -> f64 {
        let (kp, gp) = complex_rates(self);
        kp.norm() + gp.norm()
    }
}

/// Parameter sets used throughout the benchmarks (units of the total cavity
/// decay rate, first cavity port carrying 80% of the cavity loss).
pub mod presets {
    use super::SystemParams;

    /// Resonant atom and cavity, cooperativity 40.
    pub fn resonant_high_cooperativity() -> SystemParams {
        SystemParams {
            g: 0.125,
            kappa: vec![0.8, 0.2],
            gamma: vec![1.0 / 1280.0],
            omega_a: 0.0,
            omega_c: 0.0,
            omega_ref: 0.0,
        }
    }

    /// Atom detuned by half a cavity linewidth above the cavity, cooperativity 1.
    pub fn detuned_unit_cooperativity() -> SystemParams {
        SystemParams {
            g: 0.125,
            kappa: vec![0.8, 0.2],
            gamma: vec![1.0 / 32.0],
            omega_a: 0.5,
            omega_c: 0.0,
            omega_ref: 0.5,
        }
    }

    /// The detuned set with the coupling raised to `g`.
    pub fn detuned_with_coupling(g: f64) -> SystemParams {
        SystemParams {
            g,
            ..detuned_unit_cooperativity()
        }
    }
}

/// An input or output channel of the device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Port {
    /// Cavity-coupled port, zero-based index into `kappa`.
    Cavity(usize),
    /// Atom-coupled port, zero-based index into `gamma`.
    Atom(usize),
}

impl Port {
    pub fn exists_in(&self, p: &SystemParams) -> bool {
        match *self {
            Port::Cavity(j) => j < p.kappa.len(),
            Port::Atom(l) => l < p.gamma.len(),
        }
    }

    /// Square root of the port's coupling rate to the device.
    pub fn sqrt_rate(&self, p: &SystemParams) -> f64 {
        match *self {
            Port::Cavity(j) => p.kappa[j].sqrt(),
            Port::Atom(l) => p.gamma[l].sqrt(),
        }
    }

    /// Short label: `cc1`, `cc2`, `ac1`, ... (one-based).
    pub fn label(&self) -> String {
        match *self {
            Port::Cavity(j) => format!("cc{}", j + 1),
            Port::Atom(l) => format!("ac{}", l + 1),
        }
    }

    pub fn parse(label: &str) -> Option<Port> {
        let label = label.trim().to_ascii_lowercase();
        let (kind, idx) = label.split_at(label.len().min(2));
        let idx: usize = idx.parse().ok()?;
        if idx == 0 {
            return None;
        }
        match kind {
            "cc" => Some(Port::Cavity(idx - 1)),
            "ac" => Some(Port::Atom(idx - 1)),
            _ => None,
        }
    }

    /// All ports of a device, cavity ports first.
    pub fn all(p: &SystemParams) -> Vec<Port> {
        (0..p.kappa.len())
            .map(Port::Cavity)
            .chain((0..p.gamma.len()).map(Port::Atom))
            .collect()
    }
}

/// A continuous-wave coherent drive on a single port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    pub port: Port,
    /// Input field amplitude `<b_in>` (or `<c_in>`), in sqrt(photons / time).
    pub amplitude: Complex64,
    pub omega_las: f64,
}

impl DriveSpec {
    pub fn new(port: Port, amplitude: Complex64, omega_las: f64) -> Self {
        Self {
            port,
            amplitude,
            omega_las,
        }
    }

    /// Real-amplitude drive carrying `n_in` photons per cavity lifetime.
    pub fn from_photon_number(p: &SystemParams, port: Port, n_in: f64, omega_las: f64) -> Self {
        let amp = (n_in * p.kappa_total()).sqrt();
        Self {
            port,
            amplitude: Complex64::new(amp, 0.0),
            omega_las,
        }
    }

    /// Undriven device, kept in the frame of `omega_las`.
    pub fn none(omega_las: f64) -> Self {
        Self {
            port: Port::Cavity(0),
            amplitude: ZERO,
            omega_las,
        }
    }

    pub fn validate(&self, p: &SystemParams) -> Result<(), ParamsError> {
        if !self.port.exists_in(p) {
            return Err(ParamsError::PortOutOfRange(self.port));
        }
        if !(self.amplitude.re.is_finite()
            && self.amplitude.im.is_finite()
            && self.omega_las.is_finite())
        {
            return Err(ParamsError::Invalid("non-finite drive".into()));
        }
        Ok(())
    }

    /// Input photon flux `|beta|^2`.
    pub fn flux(&self) -> f64 {
        self.amplitude.norm_sqr()
    }

    /// Coherent input amplitude on every cavity port.
    pub fn cavity_inputs(&self, p: &SystemParams) -> Vec<Complex64> {
        (0..p.kappa.len())
            .map(|j| {
                if self.port == Port::Cavity(j) {
                    self.amplitude
                } else {
                    ZERO
                }
            })
            .collect()
    }

    /// Coherent input amplitude on every atom port.
    pub fn atom_inputs(&self, p: &SystemParams) -> Vec<Complex64> {
        (0..p.gamma.len())
            .map(|l| {
                if self.port == Port::Atom(l) {
                    self.amplitude
                } else {
                    ZERO
                }
            })
            .collect()
    }

    /// Input amplitude on `port`.
    pub fn input_on(&self, port: Port) -> Complex64 {
        if port == self.port {
            self.amplitude
        } else {
            ZERO
        }
    }
}

/// `(kappa', gamma')`: complex cavity and atom rates in the reference frame.
pub fn complex_rates(p: &SystemParams) -> (Complex64, Complex64) {
    let kp = Complex64::new(0.5 * p.kappa_total(), p.omega_c - p.omega_ref);
    let gp = Complex64::new(0.5 * p.gamma_total(), p.omega_a - p.omega_ref);
    (kp, gp)
}

/// Both roots of the self-consistency quadratic, `(atom-like, cavity-like)`.
///
/// The larger-magnitude root is taken from the closed form and the other from
/// the product of the roots, which keeps both accurate when one is small.
pub fn gamma_prime_branches(p: &SystemParams) -> (Complex64, Complex64) {
    let (kp, gp) = complex_rates(p);
    let g2 = p.g * p.g;
    let sum = kp + gp;
    let disc = ((kp - gp) * (kp - gp) - 4.0 * g2).sqrt();
    let r1 = 0.5 * (sum + disc);
    let r2 = 0.5 * (sum - disc);
    let prod = kp * gp + g2;
    let (big, small) = if r1.norm() >= r2.norm() {
        (r1, r2)
    } else {
        (r2, r1)
    };
    let small = if big.norm() > 0.0 { prod / big } else { small };
    let (mut minus, mut plus) = (big, small);
    let tie = 1e-14 * (kp.norm() + gp.norm());
    if (plus.re - minus.re) < -tie
        || ((plus.re - minus.re).abs() <= tie && (plus.im - gp.im).abs() < (minus.im - gp.im).abs())
    {
        std::mem::swap(&mut minus, &mut plus);
    }
    (minus, plus)
}

/// Residual of the self-consistency equation for a candidate rate.
pub fn self_consistency_residual(p: &SystemParams, rate: Complex64) -> f64 {
    let (kp, gp) = complex_rates(p);
    (rate - gp - p.g * p.g / (kp - rate)).norm()
}

/// Second-order (bad-cavity) effective rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticRates {
    /// Complex rate in the frame of the bare atom.
    pub gamma_prime: Complex64,
    /// Population decay rate, `2 Re`.
    pub gamma: f64,
    /// Shifted atom frequency.
    pub omega_a_eff: f64,
}

pub fn adiabatic_gamma_prime(p: &SystemParams) -> AdiabaticRates {
    let denom = Complex64::new(p.kappa_total(), 2.0 * (p.omega_c - p.omega_a));
    let gp2 = 0.5 * p.gamma_total() + 2.0 * p.g * p.g / denom;
    AdiabaticRates {
        gamma_prime: gp2,
        gamma: 2.0 * gp2.re,
        omega_a_eff: p.omega_a + gp2.im,
    }
}

/// Dimensionless coupling `x = g^2 / (kappa' (kappa' - Gamma'))`.
pub fn coupling_x(p: &SystemParams, rate: Complex64) -> Result<Complex64, ParamsError> {
    let (kp, _) = complex_rates(p);
    let gap = kp - rate;
    if gap.norm() < 1e-14 * kp.norm() {
        return Err(ParamsError::DegenerateRoot { gap: gap.norm() });
    }
    Ok(p.g * p.g / (kp * gap))
}

/// Effective per-port emission rates `Gamma_j = kappa_j (Gamma' - gamma') / (kappa' - Gamma')`.
pub fn effective_port_rates(
    p: &SystemParams,
    rate: Complex64,
) -> Result<Vec<Complex64>, ParamsError> {
    let (kp, gp) = complex_rates(p);
    let gap = kp - rate;
    if gap.norm() < 1e-14 * kp.norm() {
        return Err(ParamsError::DegenerateRoot { gap: gap.norm() });
    }
    Ok(p.kappa.iter().map(|&k| k * (rate - gp) / gap).collect())
}

/// Square roots of the effective port rates, on the branch `g sqrt(kappa_j) / (kappa' - Gamma')`
/// fixed by the effective cavity operator.
pub fn sqrt_port_rates(p: &SystemParams, rate: Complex64) -> Result<Vec<Complex64>, ParamsError> {
    let (kp, _) = complex_rates(p);
    let gap = kp - rate;
    if gap.norm() < 1e-14 * kp.norm() {
        return Err(ParamsError::DegenerateRoot { gap: gap.norm() });
    }
    Ok(p.kappa.iter().map(|&k| p.g * k.sqrt() / gap).collect())
}

/// Empty-cavity field `<a_c> = -sum_j sqrt(kappa_j) beta_j / kappa'` for a CW drive
/// in its own rotating frame.
pub fn empty_cavity_field(p: &SystemParams, drive: &DriveSpec) -> Complex64 {
    let (kp, _) = complex_rates(p);
    let s: Complex64 = p
        .kappa
        .iter()
        .zip(drive.cavity_inputs(p))
        .map(|(&k, b)| k.sqrt() * b)
        .sum();
    -s / kp
}

fn check_frame(p: &SystemParams, drive: &DriveSpec) -> Result<(), ParamsError> {
    let tol = 1e-12 * (1.0 + p.omega_ref.abs() + p.kappa_total());
    if (p.omega_ref - drive.omega_las).abs() > tol {
        return Err(ParamsError::FrameMismatch {
            omega_las: drive.omega_las,
            omega_ref: p.omega_ref,
        });
    }
    Ok(())
}

/// Effective Rabi frequency `Omega = (Omega_a - 2 g <a_c>) / (1 - x^2)`.
///
/// The parameters must already be in the drive's rotating frame.
pub fn effective_rabi(
    p: &SystemParams,
    drive: &DriveSpec,
    x: Complex64,
) -> Result<Complex64, ParamsError> {
    drive.validate(p)?;
    check_frame(p, drive)?;
    let one_minus = 1.0 - x * x;
    if one_minus.norm() < 1e-12 {
        return Err(ParamsError::SingularX(one_minus.norm()));
    }
    let atom_drive: Complex64 = p
        .gamma
        .iter()
        .zip(drive.atom_inputs(p))
        .map(|(&gl, c)| 2.0 * gl.sqrt() * c)
        .sum();
    let a_c = empty_cavity_field(p, drive);
    Ok((atom_drive - 2.0 * p.g * a_c) / one_minus)
}

/// Convenience figures of merit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedFigures {
    /// `C = 2 g^2 / (kappa gamma_a)`.
    pub cooperativity: f64,
    /// Incoming photons per cavity lifetime, `|beta|^2 / kappa`.
    pub photon_number: f64,
    pub omega_a_eff: f64,
    pub omega_c_eff: f64,
}

pub fn cooperativity(p: &SystemParams) -> Result<f64, ParamsError> {
    let ga = p.gamma_total();
    if ga <= 0.0 {
        return Err(ParamsError::ZeroGammaA);
    }
    Ok(2.0 * p.g * p.g / (p.kappa_total() * ga))
}

pub fn derived_figures(p: &SystemParams, drive: &DriveSpec) -> Result<DerivedFigures, ParamsError> {
    let (minus, plus) = gamma_prime_branches(p);
    Ok(DerivedFigures {
        cooperativity: cooperativity(p)?,
        photon_number: drive.flux() / p.kappa_total(),
        omega_a_eff: p.omega_ref + minus.im,
        omega_c_eff: p.omega_ref + plus.im,
    })
}

/// Effective atom frequency `omega_a'`; independent of the reference frame.
pub fn effective_atom_frequency(p: &SystemParams) -> f64 {
    p.omega_ref + gamma_prime_branches(p).0.im
}

/// Every derived constant of the reduced model for one device and one drive,
/// evaluated in the drive's rotating frame.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveConstants {
    /// Parameters re-referenced to `omega_ref = omega_las`.
    pub params: SystemParams,
    pub drive: DriveSpec,
    pub kappa_prime: Complex64,
    pub gamma_prime: Complex64,
    pub gamma_prime_minus: Complex64,
    pub gamma_prime_plus: Complex64,
    pub x: Complex64,
    /// Effective population decay rate, `2 Re(Gamma'_-)`.
    pub gamma: f64,
    pub omega_a_eff: f64,
    pub omega_c_eff: f64,
    pub port_rates: Vec<Complex64>,
    pub sqrt_port_rates: Vec<Complex64>,
    /// Empty-cavity field `<a_c>`.
    pub cavity_field: Complex64,
    /// Effective Rabi frequency.
    pub omega: Complex64,
    pub gamma_m: f64,
    pub gamma_nm: f64,
    pub theta: f64,
    pub phi: f64,
}

impl EffectiveConstants {
    pub fn new(p: &SystemParams, drive: &DriveSpec) -> Result<Self, ParamsError> {
        p.validate()?;
        drive.validate(p)?;
        let params = p.with_reference(drive.omega_las);
        let (kappa_prime, gamma_prime) = complex_rates(&params);
        let (minus, plus) = gamma_prime_branches(&params);
        let x = coupling_x(&params, minus)?;
        let port_rates = effective_port_rates(&params, minus)?;
        let sqrt_rates = sqrt_port_rates(&params, minus)?;
        let omega = effective_rabi(&params, drive, x)?;
        let gamma = 2.0 * minus.re;
        let xo = x * omega;
        let t = if xo.norm() == 0.0 {
            0.0
        } else {
            2.0 * xo.norm() / gamma
        };
        let theta = -0.5 * t.atan();
        let phi = if xo.norm() == 0.0 { 0.0 } else { -xo.arg() };
        // 1/cos(2 theta) = sqrt(1 + t^2); the negative rate is written without cancellation
        let sec = (1.0 + t * t).sqrt();
        let gamma_nm = -0.5 * gamma * t * t / (1.0 + sec);
        let gamma_m = gamma - gamma_nm;
        Ok(Self {
            cavity_field: empty_cavity_field(&params, drive),
            omega_a_eff: params.omega_ref + minus.im,
            omega_c_eff: params.omega_ref + plus.im,
            params,
            drive: *drive,
            kappa_prime,
            gamma_prime,
            gamma_prime_minus: minus,
            gamma_prime_plus: plus,
            x,
            gamma,
            port_rates,
            sqrt_port_rates: sqrt_rates,
            omega,
            gamma_m,
            gamma_nm,
            theta,
            phi,
        })
    }

    /// `kappa' - Gamma'_-`.
    pub fn cavity_gap(&self) -> Complex64 {
        self.kappa_prime - self.gamma_prime_minus
    }

    /// Detuning of the laser from the effective atom frequency.
    pub fn laser_detuning(&self) -> f64 {
        self.drive.omega_las - self.omega_a_eff
    }

    /// Empty-cavity output amplitude `<b_out,c>` on a cavity port.
    pub fn empty_cavity_output(&self, j: usize) -> Complex64 {
        self.drive.input_on(Port::Cavity(j)) + self.params.kappa[j].sqrt() * self.cavity_field
    }

    /// `Omega / (2 kappa')`, the weight of `sigma_z - x` in `sigma'`.
    pub fn sigma_prime_weight(&self) -> Complex64 {
        self.omega / (2.0 * self.kappa_prime)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use presets::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn complex_rates_examples() {
        let p = SystemParams::new(0.0, vec![1.0], vec![], 0.0, 0.0, 0.0).unwrap();
        let (kp, gp) = complex_rates(&p);
        assert!(close(kp, Complex64::new(0.5, 0.0), 1e-15));
        assert!(close(gp, ZERO, 1e-15));

        let (kp, gp) = complex_rates(&resonant_high_cooperativity());
        assert!(close(kp, Complex64::new(0.5, 0.0), 1e-15));
        assert!(close(gp, Complex64::new(1.0 / 2560.0, 0.0), 1e-15));

        let (kp, gp) = complex_rates(&detuned_unit_cooperativity());
        assert!(close(kp, Complex64::new(0.5, -0.5), 1e-15));
        assert!(close(gp, Complex64::new(1.0 / 64.0, 0.0), 1e-15));
    }

    #[test]
    fn decoupled_roots_are_bare_rates() {
        let p = SystemParams {
            g: 0.0,
            ..detuned_unit_cooperativity()
        };
        let (kp, gp) = complex_rates(&p);
        let (m, pl) = gamma_prime_branches(&p);
        assert!(close(m, gp, 1e-15));
        assert!(close(pl, kp, 1e-15));
    }

    #[test]
    fn atom_like_root_matches_fixed_point_iteration() {
        let p = resonant_high_cooperativity();
        let (kp, gp) = complex_rates(&p);
        let mut r = gp;
        for _ in 0..200 {
            r = gp + p.g * p.g / (kp - r);
        }
        let (m, _) = gamma_prime_branches(&p);
        assert!(close(m, r, 1e-14));
        assert!((m.re - 0.03391).abs() < 1e-5);
        assert!(m.im.abs() < 1e-15);
        assert!(self_consistency_residual(&p, m) < 1e-15);
    }

    #[test]
    fn resonant_strong_coupling_equal_real_parts() {
        let p = SystemParams::new(1.0, vec![0.8, 0.2], vec![0.01], 0.0, 0.0, 0.0).unwrap();
        let (m, pl) = gamma_prime_branches(&p);
        assert!((m.re - (1.0 + 0.01) / 4.0).abs() < 1e-14);
        assert!((pl.re - (1.0 + 0.01) / 4.0).abs() < 1e-14);
    }

    #[test]
    fn adiabatic_limits() {
        let p = SystemParams::new(0.01, vec![1.0], vec![0.001], 0.0, 0.0, 0.0).unwrap();
        let ad = adiabatic_gamma_prime(&p);
        assert!((ad.gamma - (0.001 + 4.0 * 0.01 * 0.01)).abs() < 1e-15);
        let p0 = SystemParams {
            g: 0.0,
            ..p.clone()
        };
        assert!(close(
            adiabatic_gamma_prime(&p0).gamma_prime,
            Complex64::new(0.0005, 0.0),
            1e-16
        ));

        let s1 = resonant_high_cooperativity();
        let ad = adiabatic_gamma_prime(&s1);
        assert!((ad.gamma - 0.063281).abs() < 1e-6);
        let (m, _) = gamma_prime_branches(&s1);
        assert!((2.0 * m.re - 0.06783).abs() < 1e-5);
    }

    #[test]
    fn coupling_parameter() {
        let p = resonant_high_cooperativity();
        let (m, pl) = gamma_prime_branches(&p);
        let x = coupling_x(&p, m).unwrap();
        assert!((x.re - 0.06705).abs() < 1e-5 && x.im.abs() < 1e-15);
        let (kp, _) = complex_rates(&p);
        assert!(close(
            x * kp * (kp - m),
            Complex64::new(p.g * p.g, 0.0),
            1e-15
        ));
        let xp = coupling_x(&p, pl).unwrap();
        assert!(close(
            xp * kp * (kp - pl),
            Complex64::new(p.g * p.g, 0.0),
            1e-14
        ));

        let p0 = SystemParams {
            g: 0.0,
            ..p.clone()
        };
        let (m0, pl0) = gamma_prime_branches(&p0);
        assert_eq!(coupling_x(&p0, m0).unwrap(), ZERO);
        assert!(matches!(
            coupling_x(&p0, pl0),
            Err(ParamsError::DegenerateRoot { .. })
        ));

        let far = SystemParams::new(0.125, vec![1.0], vec![0.001], 40.0, 0.0, 40.0).unwrap();
        let (mf, _) = gamma_prime_branches(&far);
        assert!(coupling_x(&far, mf).unwrap().norm() < 1e-4);
    }

    #[test]
    fn port_rates_forms_agree() {
        let p = resonant_high_cooperativity();
        let (kp, gp) = complex_rates(&p);
        let (m, _) = gamma_prime_branches(&p);
        let rates = effective_port_rates(&p, m).unwrap();
        for (j, r) in rates.iter().enumerate() {
            let alt = p.g * p.g * p.kappa[j] / ((kp - m) * (kp - m));
            assert!(close(*r, alt, 1e-14));
            assert!(close(*r, p.kappa[j] * (m - gp) / (kp - m), 1e-16));
        }
        let total: Complex64 = rates.iter().sum();
        assert!(close(
            total / rates[0],
            Complex64::new(1.0 / 0.8, 0.0),
            1e-14
        ));
        let sq = sqrt_port_rates(&p, m).unwrap();
        for (s, r) in sq.iter().zip(&rates) {
            assert!(close(s * s, *r, 1e-15));
        }
        let p0 = SystemParams { g: 0.0, ..p };
        let (m0, _) = gamma_prime_branches(&p0);
        assert!(effective_port_rates(&p0, m0)
            .unwrap()
            .iter()
            .all(|r| r.norm() == 0.0));
    }

    #[test]
    fn rabi_frequency_cases() {
        let p = resonant_high_cooperativity();
        let x = coupling_x(&p, gamma_prime_branches(&p).0).unwrap();
        let d0 = DriveSpec::none(0.0);
        assert_eq!(effective_rabi(&p, &d0, x).unwrap(), ZERO);
        let p0 = SystemParams {
            g: 0.0,
            ..p.clone()
        };
        let d = DriveSpec::from_photon_number(&p0, Port::Cavity(0), 1.0, 0.0);
        assert_eq!(effective_rabi(&p0, &d, ZERO).unwrap(), ZERO);
        let d = DriveSpec::from_photon_number(&p, Port::Cavity(0), 1e-4, 0.0);
        let om = effective_rabi(&p, &d, x).unwrap();
        let expect = 2.0 * p.g * (0.8f64.sqrt() / 0.5) * 1e-2 / (1.0 - x * x);
        assert!(close(om, expect, 1e-15));
        let da = DriveSpec::new(Port::Atom(0), Complex64::new(0.3, 0.0), 0.0);
        let om = effective_rabi(&p, &da, x).unwrap();
        assert!(close(
            om,
            2.0 * p.gamma[0].sqrt() * 0.3 / (1.0 - x * x),
            1e-15
        ));
        let off = DriveSpec::new(Port::Cavity(0), Complex64::new(0.1, 0.0), 0.3);
        assert!(matches!(
            effective_rabi(&p, &off, x),
            Err(ParamsError::FrameMismatch { .. })
        ));
        assert!(matches!(
            effective_rabi(&p, &d, Complex64::new(1.0, 0.0)),
            Err(ParamsError::SingularX(_))
        ));
    }

    #[test]
    fn figures_of_merit() {
        let s1 = resonant_high_cooperativity();
        let d = DriveSpec::from_photon_number(&s1, Port::Cavity(0), 0.1, 0.0);
        let f = derived_figures(&s1, &d).unwrap();
        assert!((f.cooperativity - 40.0).abs() < 1e-12);
        assert!((f.photon_number - 0.1).abs() < 1e-15);
        let s2 = detuned_unit_cooperativity();
        assert!((cooperativity(&s2).unwrap() - 1.0).abs() < 1e-12);
        let lossless = SystemParams {
            gamma: vec![],
            ..s2.clone()
        };
        assert_eq!(cooperativity(&lossless), Err(ParamsError::ZeroGammaA));

        // shift of the effective atom frequency: exact root vs. second-order estimate
        let shift = effective_atom_frequency(&s2) - s2.omega_a;
        let ad = adiabatic_gamma_prime(&s2).omega_a_eff - s2.omega_a;
        assert!((shift - 0.0165701).abs() < 1e-6);
        assert!((ad - 0.015625).abs() < 1e-12);
        // independent of the frame
        let s2b = s2.with_reference(-0.7);
        assert!((effective_atom_frequency(&s2b) - effective_atom_frequency(&s2)).abs() < 1e-14);
    }

    #[test]
    fn decoherence_rates() {
        let s1 = resonant_high_cooperativity();
        let d = DriveSpec::from_photon_number(&s1, Port::Cavity(0), 1.0, 0.0);
        let c = EffectiveConstants::new(&s1, &d).unwrap();
        assert!(c.gamma_nm < 0.0 && c.gamma_m > 0.0);
        assert!((c.gamma_m + c.gamma_nm - c.gamma).abs() < 1e-15);
        assert!(c.theta <= 0.0 && c.theta > -std::f64::consts::FRAC_PI_4);
        let c0 = EffectiveConstants::new(&s1, &DriveSpec::none(0.0)).unwrap();
        assert_eq!(c0.gamma_nm, 0.0);
        assert_eq!(c0.theta, 0.0);
    }

    #[test]
    fn validation_and_ports() {
        assert!(SystemParams::new(-1.0, vec![1.0], vec![], 0.0, 0.0, 0.0).is_err());
        assert!(SystemParams::new(0.1, vec![0.0], vec![], 0.0, 0.0, 0.0).is_err());
        assert!(SystemParams::new(0.1, vec![1.0], vec![-0.1], 0.0, 0.0, 0.0).is_err());
        assert_eq!(Port::parse("cc1"), Some(Port::Cavity(0)));
        assert_eq!(Port::parse("AC2"), Some(Port::Atom(1)));
        assert_eq!(Port::parse("cc0"), None);
        assert_eq!(Port::parse("xx1"), None);
        assert_eq!(Port::Atom(0).label(), "ac1");
        let p = resonant_high_cooperativity();
        assert!(DriveSpec::new(Port::Cavity(2), ZERO, 0.0)
            .validate(&p)
            .is_err());
        let (c, k) = SystemParams {
            kappa: vec![1.6, 0.4],
            ..p.clone()
        }
        .canonical();
        assert_eq!(k, 2.0);
        assert!((c.kappa_total() - 1.0).abs() < 1e-15);
        assert!(p.is_good_emitter());
    }
}
