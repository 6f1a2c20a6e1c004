//! Closed forms against the reduced master equation integrated numerically.

use cavsim_core::analytics::AnalyticModel;
use cavsim_core::ode::Dopri5;
use cavsim_core::params::{effective_atom_frequency, DriveSpec, Port, SystemParams};
use cavsim_core::reduced::{AtomState, ReducedModel};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn draw(rng: &mut StdRng) -> (SystemParams, DriveSpec) {
    let g = rng.gen_range(0.01..0.2);
    let split = rng.gen_range(0.3..0.9);
    let kappa = if rng.gen_bool(0.5) {
        vec![1.0]
    } else {
        vec![split, 1.0 - split]
    };
    let gamma = vec![rng.gen_range(1e-3..0.05)];
    let detuning = rng.gen_range(-1.0..1.0);
    let p = SystemParams::new(g, kappa, gamma, 0.0, detuning, 0.0).unwrap();
    let ports = Port::all(&p);
    let port = ports[rng.gen_range(0..ports.len())];
    let n_in = 10f64.powf(rng.gen_range(-4.0..0.0));
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut d = DriveSpec::from_photon_number(&p, port, n_in, effective_atom_frequency(&p));
    d.amplitude *= num_complex::Complex64::from_polar(1.0, phase);
    (p, d)
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1e-300)
}

#[test]
fn closed_forms_match_reduced_numerics() {
    let mut rng = StdRng::seed_from_u64(7);
    let ode = Dopri5::with_tolerances(1e-11, 1e-15);
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let (p, d) = draw(&mut rng);
        let a = AnalyticModel::new(&p, &d).unwrap();
        let r = ReducedModel::new(&p, &d).unwrap();
        let st = r.steady_state_numeric().unwrap();
        let gamma = a.constants.gamma;
        let tau: Vec<f64> = (0..40).map(|k| k as f64 * 0.25 / gamma).collect();
        let w = d.omega_las;
        let omega: Vec<f64> = (-20..=20).map(|k| w + k as f64 * 0.2 * gamma).collect();
        for port in Port::all(&p) {
            let fa = a.flux_decomposition(port).unwrap();
            let fr = r.port_flux(&st, port).unwrap();
            worst = worst.max(rel(fa.total, fr.total, fr.total));
            worst = worst.max(rel(fa.incoherent, fr.incoherent, fr.total));

            let g1a = a.g1_expsum(port).unwrap();
            let g1r = r.incoherent_correlation(&st, port, &tau, &ode).unwrap();
            let scale = g1r[0].norm();
            for (t, v) in tau.iter().zip(&g1r) {
                worst = worst.max((g1a.eval(*t) - v).norm() / scale);
            }

            let sa = a.spectral_density(port, &omega).unwrap();
            let sr = r.spectrum(&st, port, &omega).unwrap();
            let peak = sr.density.iter().cloned().fold(0.0, f64::max);
            for (x, y) in sa.density.iter().zip(&sr.density) {
                worst = worst.max(rel(*x, *y, peak));
            }

            let ga = a.g2_closed_form(port, &tau).unwrap();
            let gr = r.g2(&st, port, &tau, &ode).unwrap();
            for (x, y) in ga.values.iter().zip(&gr.values) {
                worst = worst.max(rel(*x, *y, y.abs().max(1.0)));
            }
        }
    }
    assert!(worst < 1e-6, "worst relative mismatch {worst:e}");
}

#[test]
fn coefficients_solve_bloch_equations() {
    let mut rng = StdRng::seed_from_u64(11);
    let ode = Dopri5::with_tolerances(1e-12, 1e-15);
    for _ in 0..20 {
        let (p, d) = draw(&mut rng);
        let a = AnalyticModel::new(&p, &d).unwrap();
        let r = ReducedModel::new(&p, &d).unwrap();
        let dc = a.dynamics_coefficients().unwrap();
        let n0: f64 = rng.gen_range(0.0..1.0);
        let s0 = num_complex::Complex64::from_polar(
            rng.gen_range(0.0..1.0) * (n0 * (1.0 - n0)).sqrt(),
            rng.gen_range(0.0..std::f64::consts::TAU),
        );
        let start = AtomState::from_moments(n0, s0);
        let times: Vec<f64> = (0..25)
            .map(|k| k as f64 * 0.4 / a.constants.gamma)
            .collect();
        let path = r.evolve(&start, &times, &ode).unwrap();
        let dn = n0 - a.steady.excitation;
        let ds = s0 - a.steady.sigma;
        for (t, st) in times.iter().zip(&path) {
            let v = dc.evaluate(*t);
            let s = a.steady.sigma + v.a[0] * dn + v.a[1] * ds.conj() + v.a[2] * ds;
            let n = a.steady.excitation + (v.b[0] * dn + v.b[1] * ds.conj() + v.b[2] * ds).re;
            assert!((s - st.sigma()).norm() < 1e-8, "t={t}");
            assert!((n - st.excitation()).abs() < 1e-8, "t={t}");
            let (spm, spn) = r.sigma_prime_expectations(st);
            let sp = a.sigma_prime + v.c[0] * dn + v.c[1] * ds.conj() + v.c[2] * ds;
            let np = a.sigma_prime_number + (v.d[0] * dn + v.d[1] * ds.conj() + v.d[2] * ds).re;
            assert!((sp - spm).norm() < 1e-8, "t={t}");
            assert!((np - spn).abs() < 1e-8, "t={t}");
        }
    }
}

#[test]
fn coherence_slope_matches_generator() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..20 {
        let (p, d) = draw(&mut rng);
        let a = AnalyticModel::new(&p, &d).unwrap();
        let r = ReducedModel::new(&p, &d).unwrap();
        let st = r.steady_state_numeric().unwrap();
        for port in Port::all(&p) {
            let f = a.g1_expsum(port).unwrap();
            let o = r.output_operator(port).unwrap().full();
            let mean = st.expect(&o);
            let delta = o * st.rho - st.rho * mean;
            let slope = (o.adjoint() * r.generator.apply(&delta)).trace();
            let scale = f.eval(0.0).norm() * a.constants.gamma.max(a.constants.omega.norm());
            assert!(
                (f.derivative_at_zero() - slope).norm() < 1e-8 * scale,
                "{port:?}"
            );
        }
    }
}

#[test]
fn spectral_symmetries() {
    use cavsim_core::params::presets::*;
    let w_grid =
        |w: f64, g: f64| -> Vec<f64> { (-60..=60).map(|k| w + k as f64 * 0.05 * g).collect() };
    let p = resonant_high_cooperativity();
    let d = DriveSpec::from_photon_number(&p, Port::Cavity(0), 1.0, effective_atom_frequency(&p));
    let a = AnalyticModel::new(&p, &d).unwrap();
    let grid = w_grid(d.omega_las, a.constants.gamma);
    let s = a.spectral_density(Port::Cavity(0), &grid).unwrap().density;
    let peak = s.iter().cloned().fold(0.0, f64::max);
    let n = s.len();
    for k in 0..n {
        assert!((s[k] - s[n - 1 - k]).abs() < 1e-6 * peak);
    }

    // red minus blue weight: the CC and AC imbalances cancel in the sum
    let p = detuned_unit_cooperativity();
    let d = DriveSpec::from_photon_number(&p, Port::Cavity(0), 0.1, effective_atom_frequency(&p));
    let a = AnalyticModel::new(&p, &d).unwrap();
    let span = 3.0 * a.constants.omega.norm();
    let grid: Vec<f64> = (-600..=600)
        .map(|k| d.omega_las + k as f64 * span / 600.0)
        .collect();
    let imbalance =
        |v: &[f64]| -> f64 { (0..v.len() / 2).map(|k| v[k] - v[v.len() - 1 - k]).sum() };
    let mut cc = vec![0.0; grid.len()];
    let mut total = vec![0.0; grid.len()];
    for port in Port::all(&p) {
        let s = a.spectral_density(port, &grid).unwrap().density;
        for k in 0..grid.len() {
            total[k] += s[k];
            if matches!(port, Port::Cavity(_)) {
                cc[k] += s[k];
            }
        }
    }
    assert!(
        imbalance(&cc) > 0.0,
        "Stokes side of the CC spectrum should dominate"
    );
    assert!(
        imbalance(&total).abs() * 10.0 < imbalance(&cc),
        "{} {}",
        imbalance(&total),
        imbalance(&cc)
    );
}
