//! Atom plus one cavity mode, truncated in photon number, under a Lindblad
//! master equation. This is the reference model the reduced description is
//! checked against.
//!
//! States are indexed `atom * (n_max + 1) + n` with atom 0 the ground state.
//! Density matrices are vectorised row-major, `rho[(i, j)] -> i * dim + j`.
//! Everything is written in the frame rotating at the laser frequency. In the
//! displaced frame the cavity field is split as `a = alpha + a~` with `alpha`
//! the empty-cavity response, so only the atom-induced part of the field
//! needs Fock states.

use crate::observables::{
    one_sided_fourier, CorrelationSeries, ModelTag, PortFlux, SpectrumSeries,
};
use crate::ode::{Dopri5, OdeError};
use crate::params::{
    complex_rates, gamma_prime_branches, DriveSpec, ParamsError, Port, SystemParams,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FullError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("Hilbert-space dimension {dim} exceeds the cap {cap}")]
    DimensionOverflow { dim: usize, cap: usize },
    #[error("Liouvillian has no unique steady state: {0}")]
    SingularLiouvillian(String),
    #[error("time integration failed: {0}")]
    Ode(#[from] OdeError),
    #[error(
        "photon truncation not converged up to n_max = {cap} (last relative change {change:e})"
    )]
    NoConvergence { cap: usize, change: f64 },
    #[error("steady output flux on {0:?} vanishes")]
    ZeroFlux(Port),
    #[error("delay window {span} is shorter than the {required} needed to resolve the line")]
    AliasWarning { span: f64, required: f64 },
}

/// Highest photon number kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockTruncation {
    pub n_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Frame {
    /// Plain cavity Fock basis.
    Lab,
    /// Fock basis of the cavity field minus its empty-cavity coherent part.
    #[default]
    Displaced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub frame: Frame,
    /// Largest Hilbert-space dimension accepted.
    pub max_dim: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            frame: Frame::Displaced,
            max_dim: 2 * (60 + 1),
        }
    }
}

/// Cavity annihilation operator on the joint space.
pub fn cavity_lowering(n_max: usize) -> DMatrix<C> {
    let m = n_max + 1;
    let mut a = DMatrix::zeros(2 * m, 2 * m);
    for atom in 0..2 {
        for n in 1..m {
            a[(atom * m + n - 1, atom * m + n)] = C::new((n as f64).sqrt(), 0.0);
        }
    }
    a
}

/// Atomic lowering operator on the joint space.
pub fn atom_lowering(n_max: usize) -> DMatrix<C> {
    let m = n_max + 1;
    let mut s = DMatrix::zeros(2 * m, 2 * m);
    for n in 0..m {
        s[(n, m + n)] = ONE;
    }
    s
}

/// Generator of the joint master equation, stored column-compressed.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    params: SystemParams,
    drive: DriveSpec,
    n_max: usize,
    dim: usize,
    frame: Frame,
    displacement: C,
    annihilation: DMatrix<C>,
    sigma: DMatrix<C>,
    hamiltonian: DMatrix<C>,
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
    vals: Vec<C>,
}

pub fn build_liouvillian(
    p: &SystemParams,
    drive: &DriveSpec,
    trunc: FockTruncation,
    opts: &BuildOptions,
) -> Result<Liouvillian, FullError> {
    p.validate()?;
    drive.validate(p)?;
    let dim = 2 * (trunc.n_max + 1);
    if dim > opts.max_dim {
        return Err(FullError::DimensionOverflow {
            dim,
            cap: opts.max_dim,
        });
    }
    let q = p.with_reference(drive.omega_las);
    let (kp, _) = complex_rates(&q);
    let det_a = q.omega_a - q.omega_ref;
    let det_c = q.omega_c - q.omega_ref;
    let a = cavity_lowering(trunc.n_max);
    let s = atom_lowering(trunc.n_max);
    let ad = a.adjoint();
    let sd = s.adjoint();
    let g = q.g;

    let mut h = &sd * &s * C::new(det_a, 0.0) + &ad * &a * C::new(det_c, 0.0);
    h += (&sd * &a - &ad * &s) * (I * g);
    let cavity_drive: C = q
        .kappa
        .iter()
        .zip(drive.cavity_inputs(&q))
        .map(|(&k, b)| k.sqrt() * b)
        .sum();
    let displacement = match opts.frame {
        Frame::Lab => {
            h += (&a * cavity_drive.conj() - &ad * cavity_drive) * I;
            ZERO
        }
        Frame::Displaced => {
            let alpha = -cavity_drive / kp;
            h += (&sd * alpha - &s * alpha.conj()) * (I * g);
            alpha
        }
    };
    let atom_drive: C = q
        .gamma
        .iter()
        .zip(drive.atom_inputs(&q))
        .map(|(&gl, c)| gl.sqrt() * c)
        .sum();
    h += (&s * atom_drive.conj() - &sd * atom_drive) * I;

    let mut jumps = Vec::new();
    if q.kappa_total() > 0.0 {
        jumps.push(&a * C::new(q.kappa_total().sqrt(), 0.0));
    }
    if q.gamma_total() > 0.0 {
        jumps.push(&s * C::new(q.gamma_total().sqrt(), 0.0));
    }
    let mut heff = h.clone();
    for c in &jumps {
        heff -= c.adjoint() * c * C::new(0.0, 0.5);
    }

    let sparse_cols = |m: &DMatrix<C>| -> Vec<Vec<(usize, C)>> {
        (0..dim)
            .map(|c| {
                (0..dim)
                    .filter(|&r| m[(r, c)] != ZERO)
                    .map(|r| (r, m[(r, c)]))
                    .collect()
            })
            .collect()
    };
    let heff_cols = sparse_cols(&heff);
    let jump_cols: Vec<_> = jumps.iter().map(sparse_cols).collect();

    let mut col_ptr = Vec::with_capacity(dim * dim + 1);
    let mut rows = Vec::new();
    let mut vals = Vec::new();
    let mut scratch: Vec<(usize, C)> = Vec::new();
    col_ptr.push(0);
    for i in 0..dim {
        for j in 0..dim {
            scratch.clear();
            for &(k, v) in &heff_cols[i] {
                scratch.push((k * dim + j, -I * v));
            }
            for &(k, v) in &heff_cols[j] {
                scratch.push((i * dim + k, I * v.conj()));
            }
            for jc in &jump_cols {
                for &(k, ci) in &jc[i] {
                    for &(l, cj) in &jc[j] {
                        scratch.push((k * dim + l, ci * cj.conj()));
                    }
                }
            }
            scratch.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(r, v) in &scratch {
                if last == Some(r) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    rows.push(r);
                    vals.push(v);
                    last = Some(r);
                }
            }
            col_ptr.push(rows.len());
        }
    }

    Ok(Liouvillian {
        params: q,
        drive: *drive,
        n_max: trunc.n_max,
        dim,
        frame: opts.frame,
        displacement,
        annihilation: a,
        sigma: s,
        hamiltonian: h,
        col_ptr,
        rows,
        vals,
    })
}

impl Liouvillian {
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn n_max(&self) -> usize {
        self.n_max
    }
    pub fn frame(&self) -> Frame {
        self.frame
    }
    /// Parameters in the laser frame.
    pub fn params(&self) -> &SystemParams {
        &self.params
    }
    pub fn drive(&self) -> &DriveSpec {
        &self.drive
    }
    /// Coherent offset `alpha` of the cavity field (zero in the lab frame).
    pub fn displacement(&self) -> C {
        self.displacement
    }
    /// Cavity annihilation operator of the truncated basis (`a~` in the displaced frame).
    pub fn annihilation(&self) -> &DMatrix<C> {
        &self.annihilation
    }
    pub fn sigma(&self) -> &DMatrix<C> {
        &self.sigma
    }
    pub fn hamiltonian(&self) -> &DMatrix<C> {
        &self.hamiltonian
    }
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `out = L x` for a vectorised density matrix.
    pub fn apply(&self, x: &[C], out: &mut [C]) {
        out.iter_mut().for_each(|v| *v = ZERO);
        for (col, &xc) in x.iter().enumerate() {
            if xc == ZERO {
                continue;
            }
            for k in self.col_ptr[col]..self.col_ptr[col + 1] {
                out[self.rows[k]] += self.vals[k] * xc;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<C> {
        let n = self.dim * self.dim;
        let mut m = DMatrix::zeros(n, n);
        for col in 0..n {
            for k in self.col_ptr[col]..self.col_ptr[col + 1] {
                m[(self.rows[k], col)] += self.vals[k];
            }
        }
        m
    }

    /// `L` applied to a density matrix.
    pub fn apply_matrix(&self, rho: &DMatrix<C>) -> DMatrix<C> {
        let x = vectorize(rho);
        let mut y = vec![ZERO; x.len()];
        self.apply(&x, &mut y);
        unvectorize(&y, self.dim)
    }

    /// The constant and operator parts of a port's output field,
    /// `b_out = constant + op` on the truncated space.
    pub fn output_operator(&self, port: Port) -> Result<(C, DMatrix<C>), FullError> {
        if !port.exists_in(&self.params) {
            return Err(ParamsError::PortOutOfRange(port).into());
        }
        let input = self.drive.input_on(port);
        let r = port.sqrt_rate(&self.params);
        Ok(match port {
            Port::Cavity(_) => (
                input + r * self.displacement,
                &self.annihilation * C::new(r, 0.0),
            ),
            Port::Atom(_) => (input, &self.sigma * C::new(r, 0.0)),
        })
    }

    fn effective_decay(&self) -> f64 {
        2.0 * gamma_prime_branches(&self.params).0.re
    }
}

fn vectorize(m: &DMatrix<C>) -> Vec<C> {
    let d = m.nrows();
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            v.push(m[(i, j)]);
        }
    }
    v
}

fn unvectorize(v: &[C], d: usize) -> DMatrix<C> {
    DMatrix::from_fn(d, d, |i, j| v[i * d + j])
}

/// `Tr(A rho)`.
pub fn expect(a: &DMatrix<C>, rho: &DMatrix<C>) -> C {
    let d = rho.nrows();
    let mut s = ZERO;
    for i in 0..d {
        for j in 0..d {
            s += a[(i, j)] * rho[(j, i)];
        }
    }
    s
}

/// Joint atom–cavity density matrix in the frame of the Liouvillian that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDensityMatrix {
    pub rho: DMatrix<C>,
    pub n_max: usize,
    /// Coherent offset of the cavity field in this frame.
    pub displacement: C,
}

/// Steady-state expectation values, with the cavity field reported in the lab frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullObservables {
    pub sigma: C,
    pub excitation: f64,
    pub field: C,
    pub photons: f64,
}

impl JointDensityMatrix {
    /// Atom in the ground state, cavity in vacuum (in the displaced frame this
    /// is the coherent state of amplitude `-alpha`).
    pub fn ground(l: &Liouvillian) -> Self {
        let m = l.n_max + 1;
        let mut psi = vec![ZERO; 2 * m];
        let beta = -l.displacement;
        let mut amp = (-0.5 * beta.norm_sqr()).exp();
        let mut coef = C::new(amp, 0.0);
        for (n, slot) in psi.iter_mut().take(m).enumerate() {
            if n > 0 {
                coef = coef * beta / (n as f64).sqrt();
            }
            *slot = coef;
        }
        amp = psi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let rho = DMatrix::from_fn(2 * m, 2 * m, |i, j| psi[i] * psi[j].conj() / (amp * amp));
        Self {
            rho,
            n_max: l.n_max,
            displacement: l.displacement,
        }
    }

    pub fn trace(&self) -> C {
        self.rho.trace()
    }

    pub fn expect(&self, op: &DMatrix<C>) -> C {
        expect(op, &self.rho)
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint())
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * C::new(0.5, 0.0);
        h.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Population of the highest Fock level kept.
    pub fn top_population(&self) -> f64 {
        let m = self.n_max + 1;
        self.rho[(self.n_max, self.n_max)].re + self.rho[(m + self.n_max, m + self.n_max)].re
    }

    pub fn observables(&self) -> FullObservables {
        let a = cavity_lowering(self.n_max);
        let s = atom_lowering(self.n_max);
        let sigma = self.expect(&s);
        let excitation = self.expect(&(s.adjoint() * &s)).re;
        let resid = self.expect(&a);
        let alpha = self.displacement;
        let photons = self.expect(&(a.adjoint() * &a)).re
            + alpha.norm_sqr()
            + 2.0 * (alpha.conj() * resid).re;
        FullObservables {
            sigma,
            excitation,
            field: alpha + resid,
            photons,
        }
    }
}

/// Steady state by block elimination over photon-number shells.
///
/// The entry `|n><m|` belongs to shell `max(n, m)`, and the generator only
/// couples neighbouring shells, so the null vector can be found by a
/// block-tridiagonal sweep from the top shell down to the 4x4 bottom block.
pub fn steady_state(l: &Liouvillian) -> Result<JointDensityMatrix, FullError> {
    let d = l.dim;
    let m = l.n_max + 1;
    let nv = d * d;
    let shell_of = |idx: usize| -> usize {
        let (i, j) = (idx / d, idx % d);
        (i % m).max(j % m)
    };
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut local = vec![0usize; nv];
    for (idx, slot) in local.iter_mut().enumerate() {
        let s = shell_of(idx);
        *slot = members[s].len();
        members[s].push(idx);
    }
    let size: Vec<usize> = members.iter().map(|v| v.len()).collect();
    let mut diag: Vec<DMatrix<C>> = size.iter().map(|&n| DMatrix::zeros(n, n)).collect();
    let mut lower: Vec<DMatrix<C>> = (0..m)
        .map(|k| DMatrix::zeros(size[k], if k > 0 { size[k - 1] } else { 0 }))
        .collect();
    let mut upper: Vec<DMatrix<C>> = (0..m)
        .map(|k| DMatrix::zeros(size[k], if k + 1 < m { size[k + 1] } else { 0 }))
        .collect();
    for col in 0..nv {
        let sc = shell_of(col);
        for k in l.col_ptr[col]..l.col_ptr[col + 1] {
            let row = l.rows[k];
            let sr = shell_of(row);
            let (r, c) = (local[row], local[col]);
            if sr == sc {
                diag[sr][(r, c)] += l.vals[k];
            } else if sc + 1 == sr {
                lower[sr][(r, c)] += l.vals[k];
            } else if sr + 1 == sc {
                upper[sr][(r, c)] += l.vals[k];
            } else {
                return Err(FullError::SingularLiouvillian(
                    "generator couples distant photon shells".into(),
                ));
            }
        }
    }

    // W_k = S_k^{-1} L_k, S_{k-1} = D_{k-1} - U_{k-1} W_k
    let mut w: Vec<DMatrix<C>> = vec![DMatrix::zeros(0, 0); m];
    let mut schur = diag[m - 1].clone();
    for k in (1..m).rev() {
        let lu = schur.lu();
        let wk = lu.solve(&lower[k]).ok_or_else(|| {
            FullError::SingularLiouvillian(format!("shell {k} block is singular"))
        })?;
        schur = &diag[k - 1] - &upper[k - 1] * &wk;
        w[k] = wk;
    }
    let svd = schur.clone().svd(true, true);
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let smax = sv[order[sv.len() - 1]].max(f64::MIN_POSITIVE);
    if sv.len() > 1 && sv[order[1]] < 1e-10 * smax {
        return Err(FullError::SingularLiouvillian(format!(
            "null space is degenerate (second singular value {:e})",
            sv[order[1]] / smax
        )));
    }
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let x0: nalgebra::DVector<C> = v_t.row(order[0]).adjoint();

    let mut x = vec![ZERO; nv];
    let mut prev = x0;
    for (p, &idx) in members[0].iter().enumerate() {
        x[idx] = prev[p];
    }
    for k in 1..m {
        let xk = -(&w[k] * &prev);
        for (p, &idx) in members[k].iter().enumerate() {
            x[idx] = xk[p];
        }
        prev = xk;
    }
    finish_state(l, &x)
}

fn finish_state(l: &Liouvillian, x: &[C]) -> Result<JointDensityMatrix, FullError> {
    let mut rho = unvectorize(x, l.dim);
    let tr = rho.trace();
    if tr.norm() == 0.0 || !tr.re.is_finite() {
        return Err(FullError::SingularLiouvillian(
            "steady state has zero trace".into(),
        ));
    }
    rho /= tr;
    let rho = (&rho + rho.adjoint()) * C::new(0.5, 0.0);
    Ok(JointDensityMatrix {
        rho,
        n_max: l.n_max,
        displacement: l.displacement,
    })
}

/// Steady state from a dense solve with one equation replaced by the trace
/// condition. Intended for small truncations and as a cross-check.
pub fn steady_state_dense(l: &Liouvillian) -> Result<JointDensityMatrix, FullError> {
    let d = l.dim;
    let nv = d * d;
    let mut m = l.to_dense();
    let mut rhs = nalgebra::DVector::zeros(nv);
    for c in 0..nv {
        m[(0, c)] = ZERO;
    }
    for i in 0..d {
        m[(0, i * d + i)] = ONE;
    }
    rhs[0] = ONE;
    let x = m.lu().solve(&rhs).ok_or_else(|| {
        FullError::SingularLiouvillian("trace-augmented system is singular".into())
    })?;
    finish_state(l, x.as_slice())
}

/// Largest entry of `L rho`, relative to the largest rate in the problem.
pub fn steady_state_residual(l: &Liouvillian, state: &JointDensityMatrix) -> f64 {
    let r = l.apply_matrix(&state.rho);
    let scale = l.vals.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    r.iter().map(|v| v.norm()).fold(0.0, f64::max) / scale
}

/// Integrate the master equation from `rho0` at time 0 and return the state at each time.
pub fn evolve(
    l: &Liouvillian,
    rho0: &DMatrix<C>,
    times: &[f64],
    ode: &Dopri5,
) -> Result<Vec<DMatrix<C>>, FullError> {
    let y0 = vectorize(rho0);
    let d = l.dim;
    let mut f = |_t: f64, y: &[C], dy: &mut [C]| l.apply(y, dy);
    Ok(ode.integrate_with(&mut f, 0.0, &y0, times, |_, y| unvectorize(y, d))?)
}

/// `Tr(A e^{L tau}(B rho))` for each delay, i.e. `<A(tau) B(0)>` in the steady state `rho`.
pub fn two_time_correlation(
    l: &Liouvillian,
    rho: &DMatrix<C>,
    a: &DMatrix<C>,
    b: &DMatrix<C>,
    tau: &[f64],
    ode: &Dopri5,
) -> Result<Vec<C>, FullError> {
    propagate_and_measure(l, &(b * rho), a, tau, ode)
}

fn propagate_and_measure(
    l: &Liouvillian,
    start: &DMatrix<C>,
    a: &DMatrix<C>,
    tau: &[f64],
    ode: &Dopri5,
) -> Result<Vec<C>, FullError> {
    let d = l.dim;
    // keep the state of order one so the absolute tolerance stays meaningful
    let scale = start.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(vec![ZERO; tau.len()]);
    }
    let y0: Vec<C> = vectorize(start).into_iter().map(|v| v / scale).collect();
    let at = a.transpose();
    let mut f = |_t: f64, y: &[C], dy: &mut [C]| l.apply(y, dy);
    let out = ode.integrate_with(&mut f, 0.0, &y0, tau, |_, y| {
        // Tr(A Y) = sum_ij A_ij Y_ji
        let mut s = ZERO;
        for i in 0..d {
            for j in 0..d {
                s += at[(j, i)] * y[j * d + i];
            }
        }
        s * scale
    })?;
    Ok(out)
}

/// Steady output flux of a port.
pub fn output_flux(
    l: &Liouvillian,
    state: &JointDensityMatrix,
    port: Port,
) -> Result<PortFlux, FullError> {
    let (c0, op) = l.output_operator(port)?;
    let mean = state.expect(&op);
    let second = state.expect(&(op.adjoint() * &op)).re;
    Ok(PortFlux::new(c0 + mean, second - mean.norm_sqr()))
}

/// Fluctuation part of the first-order output correlation,
/// `<b_out^dag(tau) b_out(0)> - |<b_out>|^2`, as a complex function of the delay.
pub fn incoherent_correlation(
    l: &Liouvillian,
    state: &JointDensityMatrix,
    port: Port,
    tau: &[f64],
    ode: &Dopri5,
) -> Result<Vec<C>, FullError> {
    let (_, op) = l.output_operator(port)?;
    let mean = state.expect(&op);
    let delta = &op * &state.rho - &state.rho * mean;
    propagate_and_measure(l, &delta, &op.adjoint(), tau, ode)
}

/// Incoherent emission spectrum of a port from the one-sided transform of the
/// fluctuation correlation.
pub fn spectrum(
    l: &Liouvillian,
    state: &JointDensityMatrix,
    port: Port,
    omega: &[f64],
    tau: &[f64],
    ode: &Dopri5,
) -> Result<SpectrumSeries, FullError> {
    let span = match (tau.first(), tau.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };
    let gamma = l.effective_decay();
    let required = if gamma > 0.0 { 10.0 / gamma } else { 0.0 };
    if span < required {
        return Err(FullError::AliasWarning { span, required });
    }
    let corr = incoherent_correlation(l, state, port, tau, ode)?;
    let w = l.drive.omega_las;
    let det: Vec<f64> = omega.iter().map(|o| o - w).collect();
    let density = one_sided_fourier(tau, &corr, &det);
    let flux = output_flux(l, state, port)?;
    Ok(SpectrumSeries {
        model: ModelTag::Full,
        omega: omega.to_vec(),
        density,
        coherent_weight: flux.coherent,
        coherent_frequency: w,
    })
}

/// Normalised second-order correlation of a port's total output field.
pub fn g2(
    l: &Liouvillian,
    state: &JointDensityMatrix,
    port: Port,
    tau: &[f64],
    ode: &Dopri5,
) -> Result<CorrelationSeries, FullError> {
    let (c0, op) = l.output_operator(port)?;
    let id = DMatrix::<C>::identity(l.dim, l.dim);
    let out = &id * c0 + op;
    let number = out.adjoint() * &out;
    let n = state.expect(&number).re;
    if n <= 1e-300 || !n.is_finite() {
        return Err(FullError::ZeroFlux(port));
    }
    let cond = &out * &state.rho * out.adjoint();
    let vals = propagate_and_measure(l, &cond, &number, tau, ode)?;
    Ok(CorrelationSeries {
        model: ModelTag::Full,
        tau: tau.to_vec(),
        values: vals.iter().map(|v| v.re / (n * n)).collect(),
    })
}

/// Outcome of the truncation search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationReport {
    pub n_max: usize,
    /// Total steady output flux on the first cavity port at `n_max`.
    pub reflected_flux: f64,
    /// Relative change of that flux between `n_max` and `n_max + 2`.
    pub change: f64,
    pub top_population: f64,
}

/// A steady state together with the truncation that produced it.
#[derive(Debug, Clone)]
pub struct FullSolution {
    pub liouvillian: Liouvillian,
    pub state: JointDensityMatrix,
    pub truncation: TruncationReport,
}

/// Smallest photon cut-off for which the reflected flux changes by less than
/// `tol` (relative) when two more Fock levels are added.
pub fn truncation_convergence(
    p: &SystemParams,
    drive: &DriveSpec,
    tol: f64,
    opts: &BuildOptions,
    cap: usize,
) -> Result<TruncationReport, FullError> {
    Ok(solve_converged(p, drive, tol, opts, cap)?.truncation)
}

/// Steady state at the truncation chosen by [`truncation_convergence`].
pub fn solve_converged(
    p: &SystemParams,
    drive: &DriveSpec,
    tol: f64,
    opts: &BuildOptions,
    cap: usize,
) -> Result<FullSolution, FullError> {
    let mut cache: Vec<Option<(Liouvillian, JointDensityMatrix, f64)>> = vec![None; cap + 1];
    let solve_at = |n: usize, cache: &mut Vec<Option<(Liouvillian, JointDensityMatrix, f64)>>| {
        if cache[n].is_none() {
            let l = build_liouvillian(p, drive, FockTruncation { n_max: n }, opts)?;
            let st = steady_state(&l)?;
            let f = output_flux(&l, &st, Port::Cavity(0))?.total;
            cache[n] = Some((l, st, f));
        }
        Ok::<f64, FullError>(cache[n].as_ref().unwrap().2)
    };
    let mut change = f64::INFINITY;
    let mut n = 1;
    while n + 2 <= cap {
        let f_lo = solve_at(n, &mut cache)?;
        let f_hi = solve_at(n + 2, &mut cache)?;
        let diff = (f_lo - f_hi).abs();
        change = if f_hi.abs() > 1e-300 {
            diff / f_hi.abs()
        } else {
            diff
        };
        if change <= tol {
            let (l, st, f) = cache[n].take().unwrap();
            let top = st.top_population();
            return Ok(FullSolution {
                liouvillian: l,
                state: st,
                truncation: TruncationReport {
                    n_max: n,
                    reflected_flux: f,
                    change,
                    top_population: top,
                },
            });
        }
        n += 1;
    }
    Err(FullError::NoConvergence { cap, change })
}

/// Convenience: build and solve at a fixed truncation.
pub fn solve_fixed(
    p: &SystemParams,
    drive: &DriveSpec,
    trunc: FockTruncation,
    opts: &BuildOptions,
) -> Result<(Liouvillian, JointDensityMatrix), FullError> {
    let l = build_liouvillian(p, drive, trunc, opts)?;
    let st = steady_state(&l)?;
    Ok((l, st))
}
