use std::f64::consts::PI;

use nalgebra::{DVector, Vector2, Vector3};
use num_complex::Complex64;

use super::system::Layout;
use super::*;
use crate::configuration::{maxwell_ring_config, three_body_config, PrimaryConfiguration};
use crate::equilibria::{newton_refine, Equilibrium};
use crate::error::Error;
use crate::spectral::{planar_bifurcations, spatial_bifurcation, BifurcationPoint};

fn l4(mu: f64) -> (PrimaryConfiguration, Equilibrium) {
    let c = three_body_config(mu, 2.0).unwrap();
    let e = newton_refine(&c, Vector2::new(0.5 - mu, 0.866)).unwrap();
    (c, e)
}

fn planar_points(e: &Equilibrium) -> Vec<BifurcationPoint> {
    planar_bifurcations(e).unwrap().points
}

fn wobbly_loop(center: Vector3<f64>, p: usize, symmetry: LoopSymmetry) -> FourierLoop {
    let mut c = vec![Vector3::zeros(); p + 1];
    c[0] = center.map(|v| Complex64::new(v, 0.0));
    for (l, x) in c.iter_mut().enumerate().skip(1) {
        let s = 0.05 * 0.4f64.powi(l as i32 - 1);
        *x = Vector3::new(Complex64::new(s, 0.3 * s), Complex64::new(-0.5 * s, s), Complex64::new(0.7 * s, -0.2 * s));
    }
    FourierLoop::new(c, 0.8, symmetry).unwrap()
}

#[test]
fn constant_loop_at_equilibrium() {
    let (c, e) = l4(0.1);
    for nu in [0.3, 1.0, 2.5] {
        let lp = FourierLoop::constant(e.point3(), nu, 8, LoopSymmetry::None).unwrap();
        let f = loop_residual(&c, &lp).unwrap();
        assert!(f.iter().all(|v| v.norm() < 1e-12));
    }
}

#[test]
fn linear_order_at_onset() {
    let (c, e) = l4(0.01);
    let eps = 1e-6;
    let mut points = planar_points(&e);
    points.push(spatial_bifurcation(&e, 16).unwrap());
    for bif in points {
        let v = onset_kernel(&e, &bif);
        let mut coeffs =
            FourierLoop::constant(e.point3(), bif.nu, 8, LoopSymmetry::None).unwrap().coefficients().to_vec();
        coeffs[1] = v * Complex64::new(eps, 0.0);
        let lp = FourierLoop::new(coeffs, bif.nu, LoopSymmetry::None).unwrap();
        let r = residual_norm(&loop_residual(&c, &lp).unwrap());
        assert!(r < 1e-9, "residual {r:e} at nu {}", bif.nu);
    }
}

#[test]
fn energy_orthogonality() {
    let (c, _) = l4(0.3);
    for center in [Vector3::new(0.2, 0.9, 0.1), Vector3::new(1.3, 0.0, 0.0), Vector3::new(-1.2, 0.4, -0.2)] {
        for p in [8, 16, 24] {
            let lp = wobbly_loop(center, p, LoopSymmetry::None);
            let f = loop_residual(&c, &lp).unwrap();
            assert!(energy_pairing(&f, &lp).abs() < 1e-9);
        }
    }
}

#[test]
fn residual_is_equivariant() {
    let (c, _) = l4(0.3);
    for symmetry in [LoopSymmetry::PlanarZ2, LoopSymmetry::EightZ2tilde] {
        let lp = apply_symmetry(&wobbly_loop(Vector3::new(0.1, 0.8, 0.0), 10, LoopSymmetry::None), symmetry);
        let f = loop_residual(&c, &lp).unwrap();
        let projected = FourierLoop::new(f.clone(), 1.0, symmetry).unwrap();
        for (a, b) in f.iter().zip(projected.coefficients()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let (c, _) = l4(0.3);
    let lp = wobbly_loop(Vector3::new(0.1, 0.8, 0.05), 6, LoopSymmetry::None);
    let layout = Layout::new(6, LoopSymmetry::None, false);
    let beta = 0.3;
    let (r0, _, jac) = layout.linearize(&c, &lp, beta, true).unwrap();
    let jac = jac.unwrap();
    let u = layout.pack(&lp);
    let h = 1e-6;
    for k in 0..=layout.len() {
        let mut up = u.clone();
        let mut um = u.clone();
        up[k] += h;
        um[k] -= h;
        let (rp, _, _) = layout.linearize(&c, &layout.unpack(&lp, &up).unwrap(), beta, false).unwrap();
        let (rm, _, _) = layout.linearize(&c, &layout.unpack(&lp, &um).unwrap(), beta, false).unwrap();
        let fd = (rp - rm) / (2.0 * h);
        let err = (&fd - jac.column(k)).amax();
        assert!(err < 1e-6, "column {k}: {err:e}");
    }
    // beta column
    let (rb, _, _) = layout.linearize(&c, &lp, beta + h, false).unwrap();
    let fd = (rb - &r0) / h;
    assert!((&fd - jac.column(layout.len() + 1)).amax() < 1e-6);
}

#[test]
fn onset_frequency_at_l4() {
    let (c, e) = l4(0.01);
    let plus = planar_points(&e)[0].clone();
    let lp = branch_start(&c, &e, &plus, 1e-4).unwrap();
    assert!((lp.nu() - plus.nu).abs() < 1e-6);
    assert!(verify_loop(&c, &lp).unwrap() < 1e-9);
    assert_eq!(lp.symmetry(), LoopSymmetry::PlanarZ2);
}

#[test]
fn eight_onset_structure() {
    let (c, e) = l4(0.01);
    let bif = spatial_bifurcation(&e, 16).unwrap();
    let eps = 1e-4;
    let lp = branch_start(&c, &e, &bif, eps).unwrap();
    for (l, x) in lp.coefficients().iter().enumerate() {
        if l % 2 == 1 {
            assert_eq!((x.x, x.y), (Complex64::default(), Complex64::default()));
        } else {
            assert_eq!(x.z, Complex64::default());
        }
    }
    assert!((lp.max_abs_z() - eps).abs() < 1e-2 * eps);
    let planar = lp.sample(256).iter().map(|x| (x.xy() - e.position).norm()).fold(0.0, f64::max);
    assert!(planar < 10.0 * eps * eps);
}

#[test]
fn corrector_iteration_counts() {
    let (c, e) = l4(0.01);
    let minus = planar_points(&e)[1].clone();
    let s = start_branch(&c, &e, &minus, 1e-3, DEFAULT_MODES).unwrap();
    assert!(s.iterations <= 5, "{} iterations", s.iterations);
    // an exact solution needs no update
    let n = unknown_count(&s.lp);
    let mut weights = DVector::zeros(n);
    weights[n - 1] = 1.0;
    let again = corrector(&c, &s.lp, &s.lp, &Normalization { weights, target: s.lp.nu() }).unwrap();
    assert_eq!(again.iterations, 0);
}

#[test]
fn corrector_reports_collision() {
    let (c, e) = l4(0.5);
    let mut coeffs = vec![Vector3::zeros(); 5];
    // a circle of radius 0.5 through both primaries
    coeffs[1] = Vector3::new(Complex64::new(0.25, 0.0), Complex64::new(0.0, -0.25), Complex64::default());
    let lp = FourierLoop::new(coeffs, 1.0, LoopSymmetry::PlanarZ2).unwrap();
    let n = unknown_count(&lp);
    let r = corrector(&c, &lp, &lp, &Normalization { weights: DVector::zeros(n), target: 0.0 });
    assert!(matches!(r, Err(Error::Collision { .. })), "{r:?}");
    let _ = e;
}

#[test]
fn frequency_converges_quadratically() {
    let (c, e) = l4(0.01);
    let mut points = planar_points(&e);
    points.push(spatial_bifurcation(&e, 16).unwrap());
    for bif in points {
        let eps = [1e-2, 1e-3, 1e-4];
        let dev: Vec<f64> = eps.iter().map(|&x| (branch_start(&c, &e, &bif, x).unwrap().nu() - bif.nu).abs()).collect();
        let slope = (dev[0].ln() - dev[2].ln()) / (eps[0].ln() - eps[2].ln());
        assert!((slope - 2.0).abs() < 0.3, "slope {slope} for nu {} ({dev:?})", bif.nu);
    }
}

#[test]
fn harmonic_reproduction() {
    let (c, e) = l4(0.01);
    let plus = planar_points(&e)[0].clone();
    let lp = branch_start(&c, &e, &plus, 1e-2).unwrap();
    let h = lp.harmonic(2);
    let n = 2 * collocation_samples(lp.modes());
    let f = loop_residual_with_samples(&c, &h, n).unwrap();
    assert!(residual_norm(&f) < 1e-9);
}

/// Period of `z'' = -sum m z / (1 + z^2)^{(alpha+1)/2}` at turning point `amp`.
fn vertical_period(mass: f64, alpha: f64, amp: f64) -> f64 {
    use gauss_quad::GaussLegendre;
    // W(z) = -mass phi_alpha(sqrt(1 + z^2)); z = amp sin(theta) and the drop
    // W(amp) - W(z) is formed from amp^2 cos^2(theta) without cancellation
    let k = (1.0 - alpha) / 2.0;
    let rule = GaussLegendre::new(64.try_into().unwrap());
    4.0 * rule.integrate(0.0, PI / 2.0, |th| {
        let gap = (amp * th.cos()).powi(2);
        let base = 1.0 + amp * amp;
        let drop = mass / (alpha - 1.0) * base.powf(k) * (k * (-gap / base).ln_1p()).exp_m1();
        amp * th.cos() / (2.0 * drop).sqrt()
    })
}

#[test]
fn ring_origin_vertical_family() {
    let (c, _) = maxwell_ring_config(3, 0.0, 2.0).unwrap();
    let e = newton_refine(&c, Vector2::new(1e-3, -2e-3)).unwrap();
    assert!(e.position.norm() < 1e-12);
    let bif = spatial_bifurcation(&e, 16).unwrap();
    assert!((bif.nu * bif.nu - 3f64.sqrt() * 3.0).abs() < 1e-9);
    let s = start_branch(&c, &e, &bif, 1e-2, DEFAULT_MODES).unwrap();
    for x in s.lp.coefficients() {
        assert_eq!((x.x, x.y), (Complex64::default(), Complex64::default()));
    }
    let mass = c.primaries()[0].mass * 3.0;
    let amp = s.lp.max_abs_z();
    let expected = 2.0 * PI / vertical_period(mass, 2.0, amp);
    assert!((s.lp.nu() - expected).abs() < 1e-9, "{} vs {expected}", s.lp.nu());
}

#[test]
fn short_trace_from_l4() {
    let (c, e) = l4(0.01);
    let bif = spatial_bifurcation(&e, 16).unwrap();
    let options = TraceOptions { max_steps: 15, ..Default::default() };
    let b = trace_branch(&c, &e, &bif, &options).unwrap();
    assert_eq!(b.termination, Termination::StepLimit);
    assert_eq!(b.points.len(), 16);
    for w in b.points.windows(2).take(5) {
        assert!(w[1].diagnostics.amplitude > w[0].diagnostics.amplitude);
    }
    for p in &b.points {
        assert!(verify_loop(&c, &p.lp).unwrap() < 1e-9);
        assert!(p.diagnostics.max_abs_z > 0.0);
    }
    let csv = b.csv();
    assert_eq!(csv.lines().count(), 17);
    assert!(csv.lines().last().unwrap().ends_with(",StepLimit"));
}
