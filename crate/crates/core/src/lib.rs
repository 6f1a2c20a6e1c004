//! Cavity-QED models of a driven two-level emitter in a single-mode cavity:
//! a truncated-Fock reference model, a reduced two-level model with the cavity
//! eliminated, and closed-form continuous-wave results of the reduced model.

pub mod analytics;
pub mod full;
pub mod observables;
pub mod ode;
pub mod params;
pub mod reduced;

pub use num_complex::Complex64;
