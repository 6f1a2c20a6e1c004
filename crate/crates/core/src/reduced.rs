//! Two-level description of the atom with the cavity adiabatically folded into
//! effective constants: Bloch equations, the equivalent Lindblad generator
//! (one Markovian and one negative-rate channel), effective output operators,
//! steady states and measurement back-action.
//!
//! Atom basis index 0 is the ground state, `sigma = |g><e|`, and 2x2 density
//! matrices are vectorised row-major.

use crate::observables::{CorrelationSeries, ModelTag, PortFlux, SpectrumSeries};
use crate::ode::{Dopri5, OdeError};
use crate::params::{
    complex_rates, DriveSpec, EffectiveConstants, ParamsError, Port, SystemParams,
};
use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use thiserror::Error;

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// Conditional states whose smallest eigenvalue is below `-POSITIVITY_SLACK`
/// are rejected instead of projected.
pub const POSITIVITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReducedError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("output flux on {0:?} vanishes")]
    ZeroFlux(Port),
    #[error("state is not positive (smallest eigenvalue {0:e})")]
    NotPositive(f64),
    #[error("effective generator has no unique steady state")]
    SingularGenerator,
    #[error("time integration failed: {0}")]
    Ode(#[from] OdeError),
}

fn sigma_op() -> Matrix2<C> {
    Matrix2::new(ZERO, ONE, ZERO, ZERO)
}

fn excited_projector() -> Matrix2<C> {
    Matrix2::new(ZERO, ZERO, ZERO, ONE)
}

fn sigma_z_op() -> Matrix2<C> {
    Matrix2::new(-ONE, ZERO, ZERO, ONE)
}

/// Reduced 2x2 atom density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomState {
    pub rho: Matrix2<C>,
}

impl AtomState {
    pub fn ground() -> Self {
        Self {
            rho: Matrix2::new(ONE, ZERO, ZERO, ZERO),
        }
    }

    pub fn excited() -> Self {
        Self {
            rho: excited_projector(),
        }
    }

    /// State with excitation `n = <sigma^dag sigma>` and coherence `s = <sigma>`.
    pub fn from_moments(n: f64, s: C) -> Self {
        // <sigma> = rho_eg
        Self {
            rho: Matrix2::new(C::new(1.0 - n, 0.0), s.conj(), s, C::new(n, 0.0)),
        }
    }

    /// `<sigma>`.
    pub fn sigma(&self) -> C {
        self.rho[(1, 0)]
    }

    /// `<sigma^dag sigma>`.
    pub fn excitation(&self) -> f64 {
        self.rho[(1, 1)].re
    }

    /// `<sigma_z> = 2 <sigma^dag sigma> - 1`.
    pub fn sigma_z(&self) -> f64 {
        2.0 * self.excitation() - 1.0
    }

    pub fn expect(&self, op: &Matrix2<C>) -> C {
        (op * self.rho).trace()
    }

    pub fn trace(&self) -> C {
        self.rho.trace()
    }

    pub fn determinant(&self) -> f64 {
        self.rho.determinant().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let a = self.rho[(0, 0)].re;
        let d = self.rho[(1, 1)].re;
        let b = self.rho[(1, 0)].norm();
        0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b * b).sqrt()
    }

    /// Nearest positive state with the same Bloch direction (shrinks the
    /// Bloch vector onto the unit sphere).
    pub fn project_positive(&self) -> Self {
        let x = 2.0 * self.sigma();
        let z = self.sigma_z();
        let len = (x.norm_sqr() + z * z).sqrt();
        if len <= 1.0 {
            return *self;
        }
        let (x, z) = (x / len, z / len);
        Self::from_moments(0.5 * (z + 1.0), 0.5 * x)
    }

    fn to_vec(self) -> Vector4<C> {
        Vector4::new(
            self.rho[(0, 0)],
            self.rho[(0, 1)],
            self.rho[(1, 0)],
            self.rho[(1, 1)],
        )
    }

    fn from_vec(v: &[C]) -> Self {
        Self {
            rho: Matrix2::new(v[0], v[1], v[2], v[3]),
        }
    }
}

/// Lindblad form of the effective atom dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveGenerator {
    pub hamiltonian: Matrix2<C>,
    pub l_m: Matrix2<C>,
    pub l_nm: Matrix2<C>,
    pub gamma_m: f64,
    pub gamma_nm: f64,
}

impl EffectiveGenerator {
    pub fn from_constants(c: &EffectiveConstants) -> Self {
        let s = sigma_op();
        let sd = s.adjoint();
        let ee = excited_projector();
        let drive = c.omega * (ONE + c.x);
        let hamiltonian =
            ee * C::new(c.gamma_prime_minus.im, 0.0) - (sd * drive - s * drive.conj()) * (0.5 * I);
        let ph = C::from_polar(1.0, c.phi);
        let (st, ct) = c.theta.sin_cos();
        let l_m = s * (ph * ct) + ee * C::new(st, 0.0);
        let l_nm = s * (-ph * st) + ee * C::new(ct, 0.0);
        Self {
            hamiltonian,
            l_m,
            l_nm,
            gamma_m: c.gamma_m,
            gamma_nm: c.gamma_nm,
        }
    }

    /// `d rho / dt`.
    pub fn apply(&self, rho: &Matrix2<C>) -> Matrix2<C> {
        let h = &self.hamiltonian;
        let mut out = (h * rho - rho * h) * (-I);
        for (l, g) in [(&self.l_m, self.gamma_m), (&self.l_nm, self.gamma_nm)] {
            let ld = l.adjoint();
            let ll = ld * l;
            out += (l * rho * ld - (ll * rho + rho * ll) * C::new(0.5, 0.0)) * C::new(g, 0.0);
        }
        out
    }

    /// Matrix of the generator acting on row-major vectorised states.
    pub fn superoperator(&self) -> Matrix4<C> {
        let id = Matrix2::<C>::identity();
        let h = &self.hamiltonian;
        let mut m: Matrix4<C> = (h.kronecker(&id) - id.kronecker(&h.transpose())) * (-I);
        for (l, g) in [(&self.l_m, self.gamma_m), (&self.l_nm, self.gamma_nm)] {
            let ll = l.adjoint() * l;
            let term = l.kronecker(&l.conjugate())
                - (ll.kronecker(&id) + id.kronecker(&ll.transpose())) * C::new(0.5, 0.0);
            m += term * C::new(g, 0.0);
        }
        m
    }
}

/// Steady-state moments of the reduced model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyMoments {
    /// `<sigma^dag sigma>`.
    pub excitation: f64,
    /// `<sigma>`.
    pub sigma: C,
}

/// Output field of a port written on the atom space, `constant * 1 + op`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputOperator {
    pub constant: C,
    pub op: Matrix2<C>,
}

impl OutputOperator {
    pub fn full(&self) -> Matrix2<C> {
        Matrix2::identity() * self.constant + self.op
    }
}

/// Closed-form scattering amplitudes of the linear (weak-drive) regime.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiclassicalAmplitudes {
    pub sigma: C,
    pub field: C,
    pub cavity_outputs: Vec<C>,
    pub atom_outputs: Vec<C>,
}

/// Reduced model for one device and one continuous-wave drive.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub constants: EffectiveConstants,
    pub generator: EffectiveGenerator,
}

impl ReducedModel {
    pub fn new(p: &SystemParams, drive: &DriveSpec) -> Result<Self, ReducedError> {
        let constants = EffectiveConstants::new(p, drive)?;
        let generator = EffectiveGenerator::from_constants(&constants);
        Ok(Self {
            constants,
            generator,
        })
    }

    /// Right-hand side of the effective Bloch equations,
    /// `(d<sigma>/dt, d<sigma_z>/dt)`.
    pub fn bloch_rhs(&self, state: &AtomState) -> (C, f64) {
        let c = &self.constants;
        let s = state.sigma();
        let z = state.sigma_z();
        let ds = -c.gamma_prime_minus * s + c.omega * 0.5 * (z - c.x);
        let y = (ONE + c.x) * c.omega * s.conj();
        let dz = -c.gamma * (z + 1.0) - 2.0 * y.re;
        (ds, dz)
    }

    /// Steady state from the closed-form expressions.
    pub fn steady_state_closed_form(&self) -> SteadyMoments {
        let c = &self.constants;
        let gp = c.gamma_prime_minus;
        let y = ONE + c.x;
        let drive = (c.omega * y / (2.0 * gp)).norm_sqr();
        let sat = c.omega.norm_sqr() * (gp * y).re / (c.gamma * gp.norm_sqr());
        let n = if drive == 0.0 {
            0.0
        } else {
            drive / (1.0 + sat)
        };
        let s = c.omega / (2.0 * gp) * (2.0 * n - 1.0 - c.x);
        SteadyMoments {
            excitation: n,
            sigma: s,
        }
    }

    /// `sigma' = sigma - (sigma_z - x) Omega / (2 kappa')`.
    pub fn sigma_prime_op(&self) -> Matrix2<C> {
        let w = self.constants.sigma_prime_weight();
        sigma_op() - (sigma_z_op() - Matrix2::identity() * self.constants.x) * w
    }

    /// `(<sigma'>, <sigma'^dag sigma'>)` in a given state.
    pub fn sigma_prime_expectations(&self, state: &AtomState) -> (C, f64) {
        let sp = self.sigma_prime_op();
        (state.expect(&sp), state.expect(&(sp.adjoint() * sp)).re)
    }

    /// Cavity field `<a>` implied by the atom state.
    pub fn effective_cavity_expectation(&self, state: &AtomState) -> C {
        let c = &self.constants;
        let (sp, _) = self.sigma_prime_expectations(state);
        c.cavity_field - c.params.g / c.cavity_gap() * sp
    }

    pub fn output_operator(&self, port: Port) -> Result<OutputOperator, ReducedError> {
        let c = &self.constants;
        if !port.exists_in(&c.params) {
            return Err(ParamsError::PortOutOfRange(port).into());
        }
        Ok(match port {
            Port::Cavity(j) => OutputOperator {
                constant: c.empty_cavity_output(j),
                op: self.sigma_prime_op() * (-c.sqrt_port_rates[j]),
            },
            Port::Atom(l) => OutputOperator {
                constant: c.drive.input_on(port),
                op: sigma_op() * C::new(c.params.gamma[l].sqrt(), 0.0),
            },
        })
    }

    /// Output flux of a port in a given atom state.
    pub fn port_flux(&self, state: &AtomState, port: Port) -> Result<PortFlux, ReducedError> {
        let o = self.output_operator(port)?;
        let mean = state.expect(&o.op);
        let second = state.expect(&(o.op.adjoint() * o.op)).re;
        Ok(PortFlux::new(o.constant + mean, second - mean.norm_sqr()))
    }

    /// State after a photon is detected on `port`.
    pub fn kraus_back_action(
        &self,
        state: &AtomState,
        port: Port,
    ) -> Result<AtomState, ReducedError> {
        let k = self.output_operator(port)?.full();
        let out = k * state.rho * k.adjoint();
        let norm = out.trace().re;
        if norm < 1e-30 {
            return Err(ReducedError::ZeroFlux(port));
        }
        let cond = out / C::new(norm, 0.0);
        let st = AtomState::from_moments(cond[(1, 1)].re, cond[(1, 0)]);
        let lo = st.min_eigenvalue();
        if lo < -POSITIVITY_SLACK {
            return Err(ReducedError::NotPositive(lo));
        }
        Ok(if lo < 0.0 { st.project_positive() } else { st })
    }

    /// Steady state as the null vector of the 4x4 generator.
    pub fn steady_state_numeric(&self) -> Result<AtomState, ReducedError> {
        let m = self.generator.superoperator();
        let svd = m.svd(true, true);
        let sv = svd.singular_values;
        let mut order = [0usize, 1, 2, 3];
        order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
        if sv[order[1]] < 1e-12 * sv[order[3]] {
            return Err(ReducedError::SingularGenerator);
        }
        let v_t = svd.v_t.ok_or(ReducedError::SingularGenerator)?;
        let v: Vector4<C> = v_t.row(order[0]).adjoint();
        let tr = v[0] + v[3];
        if tr.norm() == 0.0 {
            return Err(ReducedError::SingularGenerator);
        }
        let st = AtomState::from_vec((v / tr).as_slice());
        Ok(AtomState::from_moments(st.excitation(), st.sigma()))
    }

    /// Integrate the effective master equation from `state` at time 0.
    pub fn evolve(
        &self,
        state: &AtomState,
        times: &[f64],
        ode: &Dopri5,
    ) -> Result<Vec<AtomState>, ReducedError> {
        let m = self.generator.superoperator();
        let mut f = |_t: f64, y: &[C], dy: &mut [C]| mat4_apply(&m, y, dy);
        let y0 = state.to_vec();
        Ok(
            ode.integrate_with(&mut f, 0.0, y0.as_slice(), times, |_, y| {
                AtomState::from_vec(y)
            })?,
        )
    }

    /// Fluctuation part of the first-order output correlation of a port,
    /// from the quantum regression theorem applied to the effective generator.
    pub fn incoherent_correlation(
        &self,
        state: &AtomState,
        port: Port,
        tau: &[f64],
        ode: &Dopri5,
    ) -> Result<Vec<C>, ReducedError> {
        let o = self.output_operator(port)?.full();
        let mean = state.expect(&o);
        let delta = o * state.rho - state.rho * mean;
        self.propagate_and_measure(&delta, &o.adjoint(), tau, ode)
    }

    fn propagate_and_measure(
        &self,
        start: &Matrix2<C>,
        measure: &Matrix2<C>,
        tau: &[f64],
        ode: &Dopri5,
    ) -> Result<Vec<C>, ReducedError> {
        let scale = start.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Ok(vec![ZERO; tau.len()]);
        }
        let m = self.generator.superoperator();
        let y0 = AtomState {
            rho: start / C::new(scale, 0.0),
        }
        .to_vec();
        let mut f = |_t: f64, y: &[C], dy: &mut [C]| mat4_apply(&m, y, dy);
        Ok(ode.integrate_with(&mut f, 0.0, y0.as_slice(), tau, |_, y| {
            (measure * AtomState::from_vec(y).rho).trace() * scale
        })?)
    }

    /// Incoherent spectrum from the resolvent of the generator, exact for
    /// the effective master equation (no delay grid).
    pub fn spectrum(
        &self,
        state: &AtomState,
        port: Port,
        omega: &[f64],
    ) -> Result<SpectrumSeries, ReducedError> {
        let o = self.output_operator(port)?.full();
        let mean = state.expect(&o);
        let delta = AtomState {
            rho: o * state.rho - state.rho * mean,
        }
        .to_vec();
        let od = o.adjoint();
        // remove the zero mode: L' x = L x - rho_st Tr(x); identical on traceless inputs
        let rho_st = state.to_vec();
        let trace_row = Vector4::new(ONE, ZERO, ZERO, ONE);
        let l = self.generator.superoperator() - rho_st * trace_row.transpose();
        let w = self.constants.drive.omega_las;
        let mut density = Vec::with_capacity(omega.len());
        for &om in omega {
            let a = Matrix4::<C>::identity() * (I * (om - w)) - l;
            let x = a
                .lu()
                .solve(&delta)
                .ok_or(ReducedError::SingularGenerator)?;
            let r = (od * AtomState::from_vec(x.as_slice()).rho).trace();
            density.push(r.re / std::f64::consts::PI);
        }
        let flux = self.port_flux(state, port)?;
        Ok(SpectrumSeries {
            model: ModelTag::Reduced,
            omega: omega.to_vec(),
            density,
            coherent_weight: flux.coherent,
            coherent_frequency: w,
        })
    }

    /// Normalised second-order correlation of a port: the state conditioned
    /// on one detection, evolved, and probed with the same port.
    pub fn g2(
        &self,
        state: &AtomState,
        port: Port,
        tau: &[f64],
        ode: &Dopri5,
    ) -> Result<CorrelationSeries, ReducedError> {
        let o = self.output_operator(port)?.full();
        let number = o.adjoint() * o;
        let n = state.expect(&number).re;
        if n < 1e-30 {
            return Err(ReducedError::ZeroFlux(port));
        }
        let cond = o * state.rho * o.adjoint();
        let vals = self.propagate_and_measure(&cond, &number, tau, ode)?;
        Ok(CorrelationSeries {
            model: ModelTag::Reduced,
            tau: tau.to_vec(),
            values: vals.iter().map(|v| v.re / (n * n)).collect(),
        })
    }
}

fn mat4_apply(m: &Matrix4<C>, y: &[C], dy: &mut [C]) {
    for (r, out) in dy.iter_mut().enumerate().take(4) {
        *out = m[(r, 0)] * y[0] + m[(r, 1)] * y[1] + m[(r, 2)] * y[2] + m[(r, 3)] * y[3];
    }
}

/// Linear-response amplitudes from the semiclassical scattering formulas.
///
/// The atom-drive term enters with a minus sign, the sign that follows from
/// the Langevin equations and agrees with the reduced and full models.
pub fn semiclassical_amplitudes(
    p: &SystemParams,
    drive: &DriveSpec,
) -> Result<SemiclassicalAmplitudes, ReducedError> {
    p.validate()?;
    drive.validate(p)?;
    let q = p.with_reference(drive.omega_las);
    let (kp, gp) = complex_rates(&q);
    let cav: C = q
        .kappa
        .iter()
        .zip(drive.cavity_inputs(&q))
        .map(|(&k, b)| k.sqrt() * b)
        .sum();
    let atom: C = q
        .gamma
        .iter()
        .zip(drive.atom_inputs(&q))
        .map(|(&g, c)| g.sqrt() * c)
        .sum();
    let sigma = (-q.g * cav - kp * atom) / (kp * gp + q.g * q.g);
    let field = -(q.g * sigma + cav) / kp;
    let cavity_outputs = q
        .kappa
        .iter()
        .zip(drive.cavity_inputs(&q))
        .map(|(&k, b)| b + k.sqrt() * field)
        .collect();
    let atom_outputs = q
        .gamma
        .iter()
        .zip(drive.atom_inputs(&q))
        .map(|(&g, c)| c + g.sqrt() * sigma)
        .collect();
    Ok(SemiclassicalAmplitudes {
        sigma,
        field,
        cavity_outputs,
        atom_outputs,
    })
}
