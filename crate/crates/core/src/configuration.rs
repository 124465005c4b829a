//! Relative-equilibrium arrangements of the primaries.
//!
//! Positions are expressed in the frame rotating with unit angular speed, so
//! a configuration is a relative equilibrium exactly when
//! `a_i = sum_{j != i} m_j (a_i - a_j) / |a_i - a_j|^(alpha + 1)` for every
//! primary.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residual tolerance that the provided builders guarantee.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

/// Smallest accepted separation between two primaries.
const COINCIDENCE_RADIUS: f64 = 1e-12;

/// A point mass of the rotating system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primary {
    pub mass: f64,
    pub position: Vector2<f64>,
}

impl Primary {
    pub fn new(mass: f64, x: f64, y: f64) -> Self {
        Self { mass, position: Vector2::new(x, y) }
    }
}

/// Masses, planar positions and force exponent of the rotating primaries.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimaryConfiguration {
    alpha: f64,
    primaries: Vec<Primary>,
    label: String,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 1.0 && alpha < 3.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("force exponent alpha = {alpha} must lie in (1, 3)")))
    }
}

impl PrimaryConfiguration {
    /// Validates masses, positions and the force exponent. The relative
    /// equilibrium relation is *not* enforced here; see
    /// [`PrimaryConfiguration::max_residual`].
    pub fn new(alpha: f64, primaries: Vec<Primary>, label: impl Into<String>) -> Result<Self> {
        check_alpha(alpha)?;
        if primaries.len() < 2 {
            return Err(Error::Domain("at least two primaries are required".into()));
        }
        for (i, p) in primaries.iter().enumerate() {
            if !(p.mass.is_finite() && p.mass > 0.0) {
                return Err(Error::Domain(format!("primary {i} has non-positive mass {}", p.mass)));
            }
            if !(p.position.x.is_finite() && p.position.y.is_finite()) {
                return Err(Error::Domain(format!("primary {i} has a non-finite position")));
            }
        }
        for i in 0..primaries.len() {
            for j in i + 1..primaries.len() {
                if (primaries[i].position - primaries[j].position).norm() < COINCIDENCE_RADIUS {
                    return Err(Error::SingularConfiguration(i, j));
                }
            }
        }
        Ok(Self { alpha, primaries, label: label.into() })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn primaries(&self) -> &[Primary] {
        &self.primaries
    }

    pub fn len(&self) -> usize {
        self.primaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primaries.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn total_mass(&self) -> f64 {
        self.primaries.iter().map(|p| p.mass).sum()
    }

    /// Largest distance of a primary from the origin.
    pub fn max_radius(&self) -> f64 {
        self.primaries.iter().map(|p| p.position.norm()).fold(0.0, f64::max)
    }

    /// Largest residual norm of the relative-equilibrium relation.
    pub fn max_residual(&self) -> Result<f64> {
        Ok(equilibrium_residual(self)?.iter().map(|r| r.norm()).fold(0.0, f64::max))
    }

    /// Copy with the primaries listed in a different order.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let primaries = order.iter().map(|&i| self.primaries[i]).collect();
        Self::new(self.alpha, primaries, self.label.clone())
    }

    /// Planar orthogonal maps (as 2x2 matrices) that permute the primaries
    /// while preserving masses. Always contains the identity first.
    ///
    /// Candidate rotations are the angles `2 pi k / m` with `m` up to the
    /// number of primaries; candidate reflection axes pass through the origin
    /// and either a primary or the midpoint direction of two primaries.
    pub fn symmetries(&self) -> Vec<Matrix2<f64>> {
        let mut candidates = Vec::new();
        let count = self.primaries.len().max(2);
        for m in 2..=count {
            for k in 1..m {
                candidates.push(rotation(2.0 * PI * k as f64 / m as f64));
            }
        }
        let mut axes = vec![0.0, PI / 2.0];
        for (i, a) in self.primaries.iter().enumerate() {
            if a.position.norm() > COINCIDENCE_RADIUS {
                axes.push(a.position.y.atan2(a.position.x));
            }
            for b in &self.primaries[i + 1..] {
                let mid = a.position + b.position;
                if mid.norm() > COINCIDENCE_RADIUS {
                    axes.push(mid.y.atan2(mid.x));
                } else {
                    let d = a.position - b.position;
                    axes.push(d.y.atan2(d.x) + PI / 2.0);
                }
            }
        }
        candidates.extend(axes.into_iter().map(reflection));

        let mut group = vec![Matrix2::identity()];
        for g in candidates {
            if group.iter().any(|h| (h - g).abs().max() < 1e-9) {
                continue;
            }
            if self.is_invariant_under(&g) {
                group.push(g);
            }
        }
        group
    }

    fn is_invariant_under(&self, g: &Matrix2<f64>) -> bool {
        let scale = 1.0 + self.max_radius();
        self.primaries.iter().all(|p| {
            let image = g * p.position;
            self.primaries.iter().any(|q| {
                (q.position - image).norm() < 1e-10 * scale && (q.mass - p.mass).abs() < 1e-12 * (1.0 + p.mass)
            })
        })
    }
}

pub(crate) fn rotation(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Reflection across the line through the origin at angle `axis`.
pub(crate) fn reflection(axis: f64) -> Matrix2<f64> {
    let (s, c) = (2.0 * axis).sin_cos();
    Matrix2::new(c, s, s, -c)
}

/// Per-primary residual `a_i - sum_{j != i} m_j (a_i - a_j)/|a_i - a_j|^(alpha+1)`.
pub fn equilibrium_residual(config: &PrimaryConfiguration) -> Result<Vec<Vector2<f64>>> {
    let ps = config.primaries();
    if ps.len() < 2 {
        return Err(Error::Domain("at least two primaries are required".into()));
    }
    let exponent = config.alpha() + 1.0;
    let mut out = Vec::with_capacity(ps.len());
    for (i, pi) in ps.iter().enumerate() {
        let mut pull = Vector2::zeros();
        for (j, pj) in ps.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = pi.position - pj.position;
            let r = d.norm();
            if r < COINCIDENCE_RADIUS {
                return Err(Error::SingularConfiguration(i.min(j), i.max(j)));
            }
            pull += d * (pj.mass / r.powf(exponent));
        }
        out.push(pi.position - pull);
    }
    Ok(out)
}

/// Restricted three-body problem: mass `mu` at `(1 - mu, 0)` and `1 - mu` at `(-mu, 0)`.
pub fn three_body_config(mu: f64, alpha: f64) -> Result<PrimaryConfiguration> {
    if !(mu.is_finite() && mu > 0.0 && mu < 1.0) {
        return Err(Error::Domain(format!("mass ratio mu = {mu} must lie in (0, 1)")));
    }
    check_alpha(alpha)?;
    PrimaryConfiguration::new(
        alpha,
        vec![Primary::new(mu, 1.0 - mu, 0.0), Primary::new(1.0 - mu, -mu, 0.0)],
        format!("three-body mu={mu} alpha={alpha}"),
    )
}

/// Geometry of the Maxwell ring: `n` unit masses on a regular polygon of
/// radius `a` and a central mass `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingGeometry {
    pub n: usize,
    pub mu: f64,
    pub alpha: f64,
    /// Lattice sum `s = 2^-alpha sum_{j=1}^{n-1} sin(j zeta / 2)^(1 - alpha)`.
    pub s: f64,
    /// Physical ring radius, `a^(alpha + 1) = s + mu`.
    pub a: f64,
    /// Mass of each vertex in the scaled frame, `1 / (s + mu)`.
    pub peripheral_mass: f64,
    /// Central mass in the scaled frame, `mu / (s + mu)`.
    pub central_mass: f64,
}

impl RingGeometry {
    pub fn new(n: usize, mu: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if n < 2 {
            return Err(Error::Domain(format!("ring needs n >= 2 vertices, got {n}")));
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::Domain(format!("central mass mu = {mu} must be >= 0")));
        }
        if n == 2 && mu == 0.0 {
            return Err(Error::Domain(
                "the ring with n = 2 and mu = 0 is the restricted three-body problem; \
                 use the three_body builder (mu = 0.5) instead"
                    .into(),
            ));
        }
        let s = lattice_sum(n, alpha);
        let total = s + mu;
        Ok(Self {
            n,
            mu,
            alpha,
            s,
            a: total.powf(1.0 / (alpha + 1.0)),
            peripheral_mass: 1.0 / total,
            central_mass: mu / total,
        })
    }

    /// Angular spacing `2 pi / n`.
    pub fn zeta(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Unit-circle position of vertex `j` (1-based, `j = n` sits on the positive x axis).
    pub fn vertex(&self, j: usize) -> Vector2<f64> {
        let (s, c) = (j as f64 * self.zeta()).sin_cos();
        Vector2::new(c, s)
    }

    pub fn scaled_mass_sum(&self) -> f64 {
        self.n as f64 * self.peripheral_mass + self.central_mass
    }

    /// Vertices `a e^{i j zeta}` with unit masses and a central `mu`, in
    /// physical units (only a relative equilibrium when `a` is the ring radius).
    pub fn unscaled_config(&self, radius: f64) -> Result<PrimaryConfiguration> {
        let mut primaries: Vec<Primary> =
            (1..=self.n).map(|j| Primary { mass: 1.0, position: self.vertex(j) * radius }).collect();
        if self.mu > 0.0 {
            primaries.push(Primary::new(self.mu, 0.0, 0.0));
        }
        PrimaryConfiguration::new(self.alpha, primaries, format!("ring n={} mu={} (unscaled)", self.n, self.mu))
    }
}

/// `s = 2^-alpha sum_{j=1}^{n-1} 1 / sin^(alpha-1)(j pi / n)`.
pub fn lattice_sum(n: usize, alpha: f64) -> f64 {
    let half_zeta = PI / n as f64;
    let sum: f64 = (1..n).map(|j| (j as f64 * half_zeta).sin().powf(1.0 - alpha)).sum();
    sum / 2f64.powf(alpha)
}

/// Scaled Maxwell ring: unit radius, vertex masses `1/(s+mu)`, central mass
/// `mu/(s+mu)` (omitted when `mu = 0`).
pub fn maxwell_ring_config(n: usize, mu: f64, alpha: f64) -> Result<(PrimaryConfiguration, RingGeometry)> {
    let geometry = RingGeometry::new(n, mu, alpha)?;
    let mut primaries: Vec<Primary> =
        (1..=n).map(|j| Primary { mass: geometry.peripheral_mass, position: geometry.vertex(j) }).collect();
    if mu > 0.0 {
        primaries.push(Primary::new(geometry.central_mass, 0.0, 0.0));
    }
    let config = PrimaryConfiguration::new(alpha, primaries, format!("ring n={n} mu={mu} alpha={alpha}"))?;
    Ok((config, geometry))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrimaryRecord {
    pub mass: f64,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThreeBodySpec {
    pub mu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RingSpec {
    pub n: usize,
    #[serde(default)]
    pub mu: f64,
}

/// JSON configuration document: explicit primaries or one of the builder
/// shorthands `{"three_body": {"mu": ..}, "alpha": ..}` and
/// `{"ring": {"n": .., "mu": ..}, "alpha": ..}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConfigDocument {
    ThreeBody {
        three_body: ThreeBodySpec,
        alpha: f64,
    },
    Ring {
        ring: RingSpec,
        alpha: f64,
    },
    Explicit {
        alpha: f64,
        primaries: Vec<PrimaryRecord>,
        #[serde(default)]
        label: String,
    },
}

/// A configuration together with the builder data it came from.
#[derive(Debug, Clone)]
pub struct BuiltConfig {
    pub config: PrimaryConfiguration,
    pub ring: Option<RingGeometry>,
    pub three_body_mu: Option<f64>,
}

impl ConfigDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn alpha(&self) -> f64 {
        match self {
            Self::ThreeBody { alpha, .. } | Self::Ring { alpha, .. } | Self::Explicit { alpha, .. } => *alpha,
        }
    }

    pub fn build(&self) -> Result<BuiltConfig> {
        match self {
            Self::ThreeBody { three_body, alpha } => Ok(BuiltConfig {
                config: three_body_config(three_body.mu, *alpha)?,
                ring: None,
                three_body_mu: Some(three_body.mu),
            }),
            Self::Ring { ring, alpha } => {
                let (config, geometry) = maxwell_ring_config(ring.n, ring.mu, *alpha)?;
                Ok(BuiltConfig { config, ring: Some(geometry), three_body_mu: None })
            }
            Self::Explicit { alpha, primaries, label } => {
                let ps = primaries.iter().map(|p| Primary::new(p.mass, p.position[0], p.position[1])).collect();
                Ok(BuiltConfig {
                    config: PrimaryConfiguration::new(*alpha, ps, label.clone())?,
                    ring: None,
                    three_body_mu: None,
                })
            }
        }
    }

    /// Explicit document listing the primaries of `config`.
    pub fn explicit(config: &PrimaryConfiguration) -> Self {
        Self::Explicit {
            alpha: config.alpha(),
            primaries: config
                .primaries()
                .iter()
                .map(|p| PrimaryRecord { mass: p.mass, position: [p.position.x, p.position.y] })
                .collect(),
            label: config.label().to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn three_body_layout() {
        let c = three_body_config(0.5, 2.0).unwrap();
        assert_eq!(c.primaries()[0], Primary::new(0.5, 0.5, 0.0));
        assert_eq!(c.primaries()[1], Primary::new(0.5, -0.5, 0.0));
        assert!(c.max_residual().unwrap() < 1e-12);

        let c = three_body_config(0.3, 2.5).unwrap();
        assert_relative_eq!(c.primaries()[0].mass, 0.3);
        assert_relative_eq!(c.primaries()[1].mass, 0.7);
        assert_relative_eq!(c.primaries()[0].position.x, 0.7);
        assert_relative_eq!(c.primaries()[1].position.x, -0.3);
        assert!(c.max_residual().unwrap() < 1e-12);
    }

    #[test]
    fn three_body_rejects_bad_parameters() {
        assert!(matches!(three_body_config(0.0, 2.0), Err(Error::Domain(_))));
        assert!(matches!(three_body_config(1.0, 2.0), Err(Error::Domain(_))));
        assert!(matches!(three_body_config(0.5, 1.0), Err(Error::Domain(_))));
        assert!(matches!(three_body_config(0.5, 3.0), Err(Error::Domain(_))));
    }

    #[test]
    fn lattice_sum_values() {
        assert_relative_eq!(lattice_sum(2, 2.0), 0.25, epsilon = 1e-15);
        assert_relative_eq!(lattice_sum(3, 2.0), 1.0 / 3f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn ring_n3_scaled_masses() {
        let (c, g) = maxwell_ring_config(3, 0.0, 2.0).unwrap();
        assert_eq!(c.len(), 3);
        for p in c.primaries() {
            assert_relative_eq!(p.mass, 3f64.sqrt(), epsilon = 1e-12);
            assert_relative_eq!(p.position.norm(), 1.0, epsilon = 1e-15);
        }
        assert!(c.max_residual().unwrap() < 1e-9);
        assert_relative_eq!(g.scaled_mass_sum(), 3.0 / g.s, epsilon = 1e-12);
    }

    #[test]
    fn ring_geometry_invariants() {
        for &(n, mu) in &[(2, 1.0), (3, 0.0), (5, 0.001), (7, 10.0), (12, 1000.0)] {
            let (c, g) = maxwell_ring_config(n, mu, 2.0).unwrap();
            assert!(g.s > 0.0 && g.a > 0.0);
            assert_relative_eq!(g.scaled_mass_sum(), (n as f64 + mu) / (g.s + mu), epsilon = 1e-12);
            let direct: f64 =
                (1..n).map(|j| 1.0 / (2.0 * (j as f64 * PI / n as f64).sin()).powf(g.alpha - 1.0) / 2.0).sum();
            assert!((direct - g.s).abs() < 1e-12);
            assert!(c.max_residual().unwrap() < 1e-9, "n={n} mu={mu}");
        }
    }

    #[test]
    fn ring_n2_without_center_is_rejected() {
        let err = maxwell_ring_config(2, 0.0, 2.0).unwrap_err();
        assert!(err.to_string().contains("three_body"));
    }

    #[test]
    fn unbalanced_pair_has_residual() {
        let c = PrimaryConfiguration::new(2.0, vec![Primary::new(1.0, 1.0, 0.0), Primary::new(1.0, -1.0, 0.0)], "")
            .unwrap();
        assert_relative_eq!(c.max_residual().unwrap(), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn unscaled_ring_rescaling() {
        let g = RingGeometry::new(7, 10.0, 2.0).unwrap();
        assert!(g.unscaled_config(g.a).unwrap().max_residual().unwrap() < 1e-9);
        assert!(g.unscaled_config(1.01 * g.a).unwrap().max_residual().unwrap() > 1e-3);
    }

    #[test]
    fn ring_residuals_rotate() {
        let (c, g) = maxwell_ring_config(7, 10.0, 2.0).unwrap();
        let res = equilibrium_residual(&c).unwrap();
        let rot = rotation(g.zeta());
        for j in 0..6 {
            assert!((rot * res[j] - res[j + 1]).norm() < 1e-12);
        }
    }

    #[test]
    fn coincident_primaries_rejected() {
        let err = PrimaryConfiguration::new(2.0, vec![Primary::new(1.0, 0.0, 0.0), Primary::new(1.0, 0.0, 0.0)], "");
        assert!(matches!(err, Err(Error::SingularConfiguration(0, 1))));
    }

    #[test]
    fn symmetry_groups() {
        assert_eq!(three_body_config(0.5, 2.0).unwrap().symmetries().len(), 4);
        assert_eq!(three_body_config(0.1, 2.0).unwrap().symmetries().len(), 2);
        for n in [3, 5, 7] {
            let (c, _) = maxwell_ring_config(n, 1.0, 2.0).unwrap();
            assert_eq!(c.symmetries().len(), 2 * n);
        }
    }

    #[test]
    fn documents() {
        let d = ConfigDocument::from_json(r#"{"three_body": {"mu": 0.3}, "alpha": 2}"#).unwrap();
        let b = d.build().unwrap();
        assert_eq!(b.three_body_mu, Some(0.3));
        let d = ConfigDocument::from_json(r#"{"ring": {"n": 7, "mu": 10}, "alpha": 2}"#).unwrap();
        assert_eq!(d.build().unwrap().ring.unwrap().n, 7);
        let d = ConfigDocument::from_json(
            r#"{"alpha": 2.5, "primaries": [{"mass": 0.3, "position": [0.7, 0]},
                {"mass": 0.7, "position": [-0.3, 0]}], "label": "x"}"#,
        )
        .unwrap();
        let b = d.build().unwrap();
        assert_eq!(b.config, {
            let mut c = three_body_config(0.3, 2.5).unwrap();
            c.label = "x".into();
            c
        });
        let round = ConfigDocument::from_json(&ConfigDocument::explicit(&b.config).to_json().unwrap()).unwrap();
        assert_eq!(round.build().unwrap().config, b.config);
        assert!(ConfigDocument::from_json(r#"{"alpha": 2}"#).is_err());
    }
}
