//! Dormand–Prince 5(4) integrator for complex linear and nonlinear systems.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },
    #[error("step budget exhausted at t = {t}")]
    TooManySteps { t: f64 },
    #[error("output times must be ascending and start at or after t0")]
    BadGrid,
}

/// Adaptive Dormand–Prince controller.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Optional cap on the step size.
    pub h_max: f64,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-12,
            max_steps: 2_000_000,
            h_max: f64::INFINITY,
        }
    }
}

// Butcher tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// difference between the 5th- and 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

impl Dopri5 {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    fn err_norm(&self, y: &[Complex64], y_new: &[Complex64], err: &[Complex64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..y.len() {
            let sc = self.atol + self.rtol * y[i].norm().max(y_new[i].norm());
            let e = err[i].norm() / sc;
            acc += e * e;
        }
        (acc / y.len().max(1) as f64).sqrt()
    }

    /// Integrate `dy/dt = f(t, y)` from `t0` and return the state at each time in
    /// `t_out` (ascending, `>= t0`). The first output may coincide with `t0`.
    pub fn integrate<F>(
        &self,
        mut f: F,
        t0: f64,
        y0: &[Complex64],
        t_out: &[f64],
    ) -> Result<Vec<Vec<Complex64>>, OdeError>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        self.integrate_with(&mut f, t0, y0, t_out, |_, y| y.to_vec())
    }

    /// Like [`Dopri5::integrate`], but maps each output state through `observe`
    /// instead of storing it.
    pub fn integrate_with<F, O, R>(
        &self,
        f: &mut F,
        t0: f64,
        y0: &[Complex64],
        t_out: &[f64],
        mut observe: O,
    ) -> Result<Vec<R>, OdeError>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
        O: FnMut(f64, &[Complex64]) -> R,
    {
        if t_out.windows(2).any(|w| w[1] < w[0]) || t_out.first().is_some_and(|&t| t < t0) {
            return Err(OdeError::BadGrid);
        }
        let n = y0.len();
        let mut y = y0.to_vec();
        let mut t = t0;
        let mut out = Vec::with_capacity(t_out.len());
        let mut k1 = vec![Complex64::default(); n];
        let mut k2 = k1.clone();
        let mut k3 = k1.clone();
        let mut k4 = k1.clone();
        let mut k5 = k1.clone();
        let mut k6 = k1.clone();
        let mut k7 = k1.clone();
        let mut ytmp = k1.clone();
        let mut ynew = k1.clone();
        let mut err = k1.clone();

        f(t, &y, &mut k1);
        let mut h = self.initial_step(&y, &k1, t_out.last().map_or(0.0, |&te| te - t0));
        let mut steps = 0usize;

        for &target in t_out {
            while t < target {
                if steps >= self.max_steps {
                    return Err(OdeError::TooManySteps { t });
                }
                let remaining = target - t;
                let mut last = false;
                let mut hs = h.min(self.h_max);
                if hs >= remaining {
                    hs = remaining;
                    last = true;
                }
                if hs <= 1e-14 * t.abs().max(1.0) && !last {
                    return Err(OdeError::StepFailure { t, h: hs });
                }
                for i in 0..n {
                    ytmp[i] = y[i] + hs * A21 * k1[i];
                }
                f(t + C2 * hs, &ytmp, &mut k2);
                for i in 0..n {
                    ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
                }
                f(t + C3 * hs, &ytmp, &mut k3);
                for i in 0..n {
                    ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
                }
                f(t + C4 * hs, &ytmp, &mut k4);
                for i in 0..n {
                    ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
                }
                f(t + C5 * hs, &ytmp, &mut k5);
                for i in 0..n {
                    ytmp[i] =
                        y[i] + hs
                            * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
                }
                f(t + hs, &ytmp, &mut k6);
                for i in 0..n {
                    ynew[i] = y[i]
                        + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
                }
                f(t + hs, &ynew, &mut k7);
                for i in 0..n {
                    err[i] = hs
                        * (E1 * k1[i]
                            + E3 * k3[i]
                            + E4 * k4[i]
                            + E5 * k5[i]
                            + E6 * k6[i]
                            + E7 * k7[i]);
                }
                let en = self.err_norm(&y, &ynew, &err);
                steps += 1;
                if en <= 1.0 {
                    t = if last { target } else { t + hs };
                    std::mem::swap(&mut y, &mut ynew);
                    std::mem::swap(&mut k1, &mut k7);
                    let fac = if en == 0.0 {
                        5.0
                    } else {
                        (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    // a step shortened to land on an output time says nothing about the next one
                    if !last || fac < 1.0 {
                        h = hs * fac;
                    }
                } else {
                    h = hs * (0.9 * en.powf(-0.2)).clamp(0.1, 1.0);
                    if h <= 1e-14 * t.abs().max(1.0) {
                        return Err(OdeError::StepFailure { t, h });
                    }
                }
            }
            out.push(observe(t, &y));
        }
        Ok(out)
    }

    fn initial_step(&self, y: &[Complex64], dy: &[Complex64], span: f64) -> f64 {
        let n = y.len().max(1) as f64;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..y.len() {
            let sc = self.atol + self.rtol * y[i].norm();
            d0 += (y[i].norm() / sc).powi(2);
            d1 += (dy[i].norm() / sc).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let h = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h = if span > 0.0 { h.min(span) } else { h };
        h.min(self.h_max).max(1e-12)
    }
}
