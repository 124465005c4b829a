//! Effective potential of the satellite in the rotating frame,
//! `V(x) = |(x, y)|^2 / 2 + sum_j m_j phi_alpha(|x - (a_j, 0)|)`,
//! with `phi_alpha'(d) = -d^-alpha`.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::configuration::{check_alpha, PrimaryConfiguration};
use crate::error::{Error, Result};

/// Distances below this are treated as a collision with a primary.
pub const COLLISION_GUARD: f64 = 1e-12;

fn check_distance(d: f64, primary: usize) -> Result<()> {
    if d.is_finite() && d >= COLLISION_GUARD {
        Ok(())
    } else {
        Err(Error::Collision { primary, distance: d })
    }
}

/// `phi_alpha(d) = d^(1 - alpha) / (alpha - 1)`.
pub fn phi_alpha(d: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(d > 0.0) {
        return Err(Error::Domain(format!("distance {d} must be positive")));
    }
    Ok(d.powf(1.0 - alpha) / (alpha - 1.0))
}

/// `phi_alpha'(d) = -d^-alpha`.
pub fn phi_alpha_prime(d: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(d > 0.0) {
        return Err(Error::Domain(format!("distance {d} must be positive")));
    }
    Ok(-d.powf(-alpha))
}

/// `phi_alpha''(d) = alpha d^(-alpha - 1)`.
pub fn phi_alpha_second(d: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(d > 0.0) {
        return Err(Error::Domain(format!("distance {d} must be positive")));
    }
    Ok(alpha * d.powf(-alpha - 1.0))
}

/// Closest primary to `x`: `(index, distance)`.
pub fn nearest_primary(config: &PrimaryConfiguration, x: &Vector3<f64>) -> (usize, f64) {
    config
        .primaries()
        .iter()
        .enumerate()
        .map(|(j, p)| (j, offset(x, &p.position).norm()))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

#[inline]
fn offset(x: &Vector3<f64>, a: &Vector2<f64>) -> Vector3<f64> {
    Vector3::new(x.x - a.x, x.y - a.y, x.z)
}

pub fn potential_value(config: &PrimaryConfiguration, x: &Vector3<f64>) -> Result<f64> {
    let alpha = config.alpha();
    let mut v = 0.5 * (x.x * x.x + x.y * x.y);
    for (j, p) in config.primaries().iter().enumerate() {
        let d = offset(x, &p.position).norm();
        check_distance(d, j)?;
        v += p.mass * d.powf(1.0 - alpha) / (alpha - 1.0);
    }
    Ok(v)
}

pub fn potential_gradient(config: &PrimaryConfiguration, x: &Vector3<f64>) -> Result<Vector3<f64>> {
    let exponent = config.alpha() + 1.0;
    let mut g = Vector3::new(x.x, x.y, 0.0);
    for (j, p) in config.primaries().iter().enumerate() {
        let w = offset(x, &p.position);
        let d = w.norm();
        check_distance(d, j)?;
        g -= w * (p.mass / d.powf(exponent));
    }
    Ok(g)
}

/// Gradient and full 3x3 Hessian at an arbitrary (not necessarily planar)
/// point; used by the pseudo-spectral loop residual.
pub fn gradient_and_hessian(config: &PrimaryConfiguration, x: &Vector3<f64>) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    let alpha = config.alpha();
    let mut g = Vector3::new(x.x, x.y, 0.0);
    let mut h = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0));
    for (j, p) in config.primaries().iter().enumerate() {
        let w = offset(x, &p.position);
        let d2 = w.norm_squared();
        let d = d2.sqrt();
        check_distance(d, j)?;
        let inv = p.mass / d.powf(alpha + 1.0);
        g -= w * inv;
        h += (w * w.transpose()) * ((alpha + 1.0) * inv / d2) - Matrix3::identity() * inv;
    }
    Ok((g, h))
}

/// Hessian at a planar point, split into the in-plane 2x2 block and the
/// normal (z z) entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianBlocks {
    /// `I + sum_j m_j A_j`.
    pub planar: Matrix2<f64>,
    /// `-sum_j m_j / d_j^(alpha + 1)`.
    pub normal: f64,
    pub trace_planar: f64,
    pub det_planar: f64,
}

impl HessianBlocks {
    /// Block-diagonal 3x3 Hessian.
    pub fn full(&self) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(&self.planar);
        m[(2, 2)] = self.normal;
        m
    }

    /// Eigenvalues of the planar block, ascending.
    pub fn planar_eigenvalues(&self) -> (f64, f64) {
        let half_trace = 0.5 * self.trace_planar;
        let diff = 0.5 * (self.planar[(0, 0)] - self.planar[(1, 1)]);
        let off = self.planar[(0, 1)];
        let rad = diff.hypot(off);
        (half_trace - rad, half_trace + rad)
    }
}

pub fn potential_hessian(config: &PrimaryConfiguration, x: &Vector3<f64>) -> Result<HessianBlocks> {
    if x.z != 0.0 {
        return Err(Error::NonPlanar(x.z));
    }
    planar_hessian(config, &x.xy())
}

/// Hessian blocks at the planar point `u`.
pub fn planar_hessian(config: &PrimaryConfiguration, u: &Vector2<f64>) -> Result<HessianBlocks> {
    let alpha = config.alpha();
    let mut planar = Matrix2::identity();
    let mut normal = 0.0;
    for (j, p) in config.primaries().iter().enumerate() {
        let w = u - p.position;
        let d2 = w.norm_squared();
        let d = d2.sqrt();
        check_distance(d, j)?;
        let inv = p.mass / d.powf(alpha + 1.0);
        // m_j A_j = m_j [(alpha+1) w w^T / d^(alpha+3) - I / d^(alpha+1)]
        planar += (w * w.transpose()) * ((alpha + 1.0) * inv / d2) - Matrix2::identity() * inv;
        normal -= inv;
    }
    // exact symmetry
    let off = 0.5 * (planar[(0, 1)] + planar[(1, 0)]);
    planar[(0, 1)] = off;
    planar[(1, 0)] = off;
    Ok(HessianBlocks {
        planar,
        normal,
        trace_planar: planar.trace(),
        det_planar: planar[(0, 0)] * planar[(1, 1)] - off * off,
    })
}

/// In-plane gradient at the planar point `u`.
pub fn planar_gradient(config: &PrimaryConfiguration, u: &Vector2<f64>) -> Result<Vector2<f64>> {
    let g = potential_gradient(config, &Vector3::new(u.x, u.y, 0.0))?;
    Ok(g.xy())
}

/// `nu_1^2 = sum_j m_j / d_j^(alpha + 1)`, the square of the spatial
/// bifurcation frequency.
pub fn nu1_squared(config: &PrimaryConfiguration, u: &Vector2<f64>) -> Result<f64> {
    let exponent = config.alpha() + 1.0;
    let mut sum = 0.0;
    for (j, p) in config.primaries().iter().enumerate() {
        let d = (u - p.position).norm();
        check_distance(d, j)?;
        sum += p.mass / d.powf(exponent);
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configuration::{maxwell_ring_config, three_body_config};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fd_step(c: f64) -> f64 {
        f64::EPSILON.cbrt() * c.abs().max(1.0)
    }

    fn fd_gradient(config: &PrimaryConfiguration, x: &Vector3<f64>) -> Vector3<f64> {
        let mut g = Vector3::zeros();
        for k in 0..3 {
            let h = fd_step(x[k]);
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += h;
            xm[k] -= h;
            g[k] = (potential_value(config, &xp).unwrap() - potential_value(config, &xm).unwrap()) / (2.0 * h);
        }
        g
    }

    fn fd_hessian(config: &PrimaryConfiguration, x: &Vector3<f64>) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for k in 0..3 {
            let h = fd_step(x[k]);
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += h;
            xm[k] -= h;
            let col = (potential_gradient(config, &xp).unwrap() - potential_gradient(config, &xm).unwrap()) / (2.0 * h);
            m.set_column(k, &col);
        }
        m
    }

    #[test]
    fn phi_values() {
        assert_relative_eq!(phi_alpha(1.0, 2.0).unwrap(), 1.0);
        assert_relative_eq!(phi_alpha(2.0, 2.0).unwrap(), 0.5);
        let d = phi_alpha_prime(2.0, 2.0).unwrap();
        assert_relative_eq!(d, -0.25);
        let h = fd_step(2.0);
        let fd = (phi_alpha(2.0 + h, 2.0).unwrap() - phi_alpha(2.0 - h, 2.0).unwrap()) / (2.0 * h);
        assert!((fd - d).abs() < 1e-8);
        let fd2 = (phi_alpha_prime(2.0 + h, 2.0).unwrap() - phi_alpha_prime(2.0 - h, 2.0).unwrap()) / (2.0 * h);
        assert!((fd2 - phi_alpha_second(2.0, 2.0).unwrap()).abs() < 1e-8);
        assert!(phi_alpha(0.0, 2.0).is_err());
        assert!(phi_alpha(-1.0, 2.0).is_err());
    }

    #[test]
    fn values_at_reference_points() {
        let (ring, g) = maxwell_ring_config(3, 0.0, 2.0).unwrap();
        let v = potential_value(&ring, &Vector3::zeros()).unwrap();
        assert_relative_eq!(v, 3.0 / g.s, epsilon = 1e-12);
        assert_relative_eq!(v, 3.0 * 3f64.sqrt(), epsilon = 1e-12);

        let tb = three_body_config(0.5, 2.0).unwrap();
        let l4 = Vector3::new(0.0, 3f64.sqrt() / 2.0, 0.0);
        assert_relative_eq!(potential_value(&tb, &l4).unwrap(), 1.375, epsilon = 1e-14);
        assert!(potential_gradient(&tb, &l4).unwrap().norm() < 1e-12);

        let far = Vector3::new(600.0, 800.0, 3.0);
        let v = potential_value(&tb, &far).unwrap();
        assert!((v - 5e5).abs() / 5e5 < 0.01);
    }

    #[test]
    fn ring_origin_is_critical() {
        for n in [3, 5, 7] {
            let (ring, _) = maxwell_ring_config(n, 0.0, 2.0).unwrap();
            assert!(potential_gradient(&ring, &Vector3::zeros()).unwrap().norm() < 1e-12);
        }
        let (ring, g) = maxwell_ring_config(3, 0.0, 2.0).unwrap();
        let nu1 = nu1_squared(&ring, &Vector2::zeros()).unwrap();
        assert_relative_eq!(nu1, 3.0 / g.s, epsilon = 1e-12);
    }

    #[test]
    fn l4_hessian_closed_form() {
        for &mu in &[0.01, 0.1, 0.5] {
            let tb = three_body_config(mu, 2.0).unwrap();
            let l4 = Vector3::new(0.5 - mu, 3f64.sqrt() / 2.0, 0.0);
            let h = potential_hessian(&tb, &l4).unwrap();
            assert_relative_eq!(h.trace_planar, 3.0, epsilon = 1e-12);
            assert_relative_eq!(h.det_planar, 27.0 * mu * (1.0 - mu) / 4.0, epsilon = 1e-12);
            assert_relative_eq!(nu1_squared(&tb, &l4.xy()).unwrap(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(-h.normal, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn collision_and_non_planar_errors() {
        let tb = three_body_config(0.5, 2.0).unwrap();
        let at = Vector3::new(0.5, 0.0, 0.0);
        assert!(matches!(potential_value(&tb, &at), Err(Error::Collision { primary: 0, .. })));
        assert!(matches!(potential_gradient(&tb, &at), Err(Error::Collision { .. })));
        assert!(matches!(potential_hessian(&tb, &Vector3::new(0.0, 1.0, 0.1)), Err(Error::NonPlanar(_))));
    }

    #[test]
    fn ring_hessian_matches_finite_differences() {
        let (ring, _) = maxwell_ring_config(7, 10.0, 2.0).unwrap();
        for &(x, y) in &[(0.3, 0.4), (1.3, -0.2), (-0.7, 0.9), (2.0, 1.5)] {
            let p = Vector3::new(x, y, 0.0);
            let h = potential_hessian(&ring, &p).unwrap().full();
            let fd = fd_hessian(&ring, &p);
            assert!((h - fd).abs().max() < 1e-5 * (1.0 + h.abs().max()));
            // off-block entries of the full Hessian vanish at planar points
            assert!(fd[(0, 2)].abs() < 1e-7 && fd[(1, 2)].abs() < 1e-7);
        }
    }

    fn ring_equivariance(n: usize, mu: f64, x: f64, y: f64, z: f64) {
        let (ring, g) = maxwell_ring_config(n, mu, 2.0).unwrap();
        let p = Vector3::new(x, y, z);
        if nearest_primary(&ring, &p).1 < 1e-2 {
            return;
        }
        let rot = crate::configuration::rotation(g.zeta());
        let rp = rot * p.xy();
        let q = Vector3::new(rp.x, rp.y, z);
        let gp = potential_gradient(&ring, &p).unwrap();
        let gq = potential_gradient(&ring, &q).unwrap();
        let rgp = rot * gp.xy();
        let scale = 1.0 + gp.norm();
        assert!((gq.xy() - rgp).norm() < 1e-12 * scale);
        assert!((gq.z - gp.z).abs() < 1e-12 * scale);
        let refl = Vector3::new(x, y, -z);
        let v = potential_value(&ring, &p).unwrap();
        assert!((potential_value(&ring, &refl).unwrap() - v).abs() < 1e-12 * v);
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(
            mu in 0.05f64..0.95, alpha in 1.2f64..2.8,
            x in -2.0f64..2.0, y in -2.0f64..2.0, z in -0.5f64..0.5,
        ) {
            let tb = three_body_config(mu, alpha).unwrap();
            let p = Vector3::new(x, y, z);
            prop_assume!(nearest_primary(&tb, &p).1 > 0.05);
            let g = potential_gradient(&tb, &p).unwrap();
            let fd = fd_gradient(&tb, &p);
            prop_assert!((g - fd).norm() <= 1e-6 * g.norm().max(1.0));
        }

        #[test]
        fn hessian_matches_finite_differences(
            n in 2usize..8, mu in 0.5f64..20.0, x in -2.0f64..2.0, y in -2.0f64..2.0,
        ) {
            let (ring, _) = maxwell_ring_config(n, mu, 2.0).unwrap();
            let p = Vector3::new(x, y, 0.0);
            prop_assume!(nearest_primary(&ring, &p).1 > 0.05);
            let h = potential_hessian(&ring, &p).unwrap();
            prop_assert!((h.planar - h.planar.transpose()).abs().max() < 1e-14);
            let fd = fd_hessian(&ring, &p);
            prop_assert!((h.full() - fd).abs().max() <= 1e-5 * h.full().abs().max().max(1.0));
        }

        #[test]
        fn trace_identity_and_positivity(
            mu in 0.01f64..0.99, alpha in 1.05f64..2.95, x in -2.0f64..2.0, y in -2.0f64..2.0,
        ) {
            let tb = three_body_config(mu, alpha).unwrap();
            let u = Vector2::new(x, y);
            prop_assume!(nearest_primary(&tb, &Vector3::new(x, y, 0.0)).1 > 1e-3);
            let h = planar_hessian(&tb, &u).unwrap();
            let nu1 = nu1_squared(&tb, &u).unwrap();
            prop_assert!((h.trace_planar - (2.0 + (alpha - 1.0) * nu1)).abs() < 1e-10 * (1.0 + nu1));
            prop_assert!(h.trace_planar > 2.0);
            prop_assert!(h.normal < 0.0);
            prop_assert!((h.normal + nu1).abs() == 0.0);
        }

        #[test]
        fn ring_potential_is_dihedral_invariant(
            n in 3usize..9, mu in 0.0f64..5.0,
            x in -2.0f64..2.0, y in -2.0f64..2.0, z in -0.5f64..0.5,
        ) {
            ring_equivariance(n, mu, x, y, z);
        }
    }
}
