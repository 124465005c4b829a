//! Planar critical points of the effective potential: Newton refinement,
//! multistart search with symmetry-orbit closure, Morse counting checks and
//! the ray analysis of the Maxwell ring.

use std::f64::consts::PI;
use std::fmt;

use log::warn;
use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::configuration::{BuiltConfig, PrimaryConfiguration, RingGeometry};
use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::potential::{planar_gradient, planar_hessian, potential_gradient, HessianBlocks};

/// Required gradient norm at an accepted equilibrium.
pub const GRADIENT_TOLERANCE: f64 = 1e-10;
const MAX_NEWTON_ITERATIONS: usize = 100;
/// Newton iterates closer than this to a primary are abandoned.
const NEWTON_COLLISION_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EquilibriumKind {
    Minimum,
    Saddle,
    Degenerate,
}

impl fmt::Display for EquilibriumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Minimum => "Minimum",
            Self::Saddle => "Saddle",
            Self::Degenerate => "Degenerate",
        })
    }
}

/// `|D| < 1e-8 (1 + T^2)` marks a degenerate critical point.
pub fn is_degenerate(trace: f64, det: f64) -> bool {
    det.abs() < 1e-8 * (1.0 + trace * trace)
}

/// Kind and local index `sigma` from the planar Hessian. The trace is always
/// positive, so there are no maxima.
pub fn classify(h: &HessianBlocks) -> (EquilibriumKind, i32) {
    if is_degenerate(h.trace_planar, h.det_planar) {
        (EquilibriumKind::Degenerate, 0)
    } else if h.det_planar < 0.0 {
        (EquilibriumKind::Saddle, -1)
    } else {
        (EquilibriumKind::Minimum, 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub position: Vector2<f64>,
    pub hessian: HessianBlocks,
    pub kind: EquilibriumKind,
    pub sigma: i32,
    pub gradient_norm: f64,
}

impl Equilibrium {
    /// Classifies the planar point `position` (no convergence check).
    pub fn at(config: &PrimaryConfiguration, position: Vector2<f64>) -> Result<Self> {
        let hessian = planar_hessian(config, &position)?;
        let gradient_norm = planar_gradient(config, &position)?.norm();
        let (kind, sigma) = classify(&hessian);
        if kind == EquilibriumKind::Degenerate {
            warn!(
                "degenerate critical point at ({}, {}): det = {:e}; index reported as 0",
                position.x, position.y, hessian.det_planar
            );
        }
        Ok(Self { position, hessian, kind, sigma, gradient_norm })
    }

    pub fn trace(&self) -> f64 {
        self.hessian.trace_planar
    }

    pub fn det(&self) -> f64 {
        self.hessian.det_planar
    }

    pub fn nu1_squared(&self) -> f64 {
        -self.hessian.normal
    }

    pub fn point3(&self) -> Vector3<f64> {
        Vector3::new(self.position.x, self.position.y, 0.0)
    }
}

fn nearest_distance(config: &PrimaryConfiguration, u: &Vector2<f64>) -> (usize, f64) {
    config
        .primaries()
        .iter()
        .enumerate()
        .map(|(j, p)| (j, (u - p.position).norm()))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Damped Newton iteration on the planar gradient.
pub fn newton_refine(config: &PrimaryConfiguration, guess: Vector2<f64>) -> Result<Equilibrium> {
    let (primary, distance) = nearest_distance(config, &guess);
    if distance < NEWTON_COLLISION_RADIUS {
        return Err(Error::Collision { primary, distance });
    }
    let mut u = guess;
    let mut g = planar_gradient(config, &u)?;
    let mut converged_at = None;
    for it in 0..MAX_NEWTON_ITERATIONS {
        let gn = g.norm();
        if gn < GRADIENT_TOLERANCE {
            // a couple of polishing steps so that duplicates agree to rounding
            match converged_at {
                None => converged_at = Some(it),
                Some(first) if it - first >= 2 => break,
                _ => {}
            }
        }
        let h = planar_hessian(config, &u)?;
        let step = match h.planar.try_inverse() {
            Some(inv) if h.det_planar.abs() > 1e-14 * (1.0 + h.trace_planar * h.trace_planar) => -(inv * g),
            _ => -g,
        };
        if step.norm() < 1e-15 * (1.0 + u.norm()) {
            break;
        }
        // do not jump across (or onto) a primary
        let (_, dist) = nearest_distance(config, &u);
        let mut t = 1.0f64.min(0.5 * dist / step.norm()).min(1.0 / step.norm());
        let mut accepted = false;
        while t > 1e-6 {
            let trial = u + step * t;
            let (primary, d) = nearest_distance(config, &trial);
            if d < NEWTON_COLLISION_RADIUS {
                return Err(Error::Collision { primary, distance: d });
            }
            let gt = planar_gradient(config, &trial)?;
            if gt.norm() < gn * (1.0 - 1e-4 * t) || gt.norm() < GRADIENT_TOLERANCE {
                u = trial;
                g = gt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if gn < GRADIENT_TOLERANCE {
                break;
            }
            // stagnation: take the damped step anyway to escape
            u += step * t;
            g = planar_gradient(config, &u)?;
        }
    }
    let gn = g.norm();
    if gn >= GRADIENT_TOLERANCE {
        return Err(Error::NoConvergence { iterations: MAX_NEWTON_ITERATIONS, gradient_norm: gn });
    }
    let (primary, distance) = nearest_distance(config, &u);
    if distance < NEWTON_COLLISION_RADIUS {
        return Err(Error::Collision { primary, distance });
    }
    Equilibrium::at(config, u)
}

/// Multistart search domain: a polar grid over `[inner, radius] x [0, 2 pi)`.
#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Outer radius; `None` means `2 * max primary radius + 2`.
    pub radius: Option<f64>,
    pub inner_radius: f64,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    /// Starts closer than this to a primary are skipped.
    pub exclusion_radius: f64,
    /// Points closer than this are the same equilibrium.
    pub dedup_tolerance: f64,
    /// Additional starting points tried before the grid.
    pub extra_seeds: Vec<Vector2<f64>>,
    pub execution: Execution,
}

/// Largest Newton correction tolerated on the symmetric image of an equilibrium.
const ISOLATION_DRIFT: f64 = 1e-6;
/// Safety bound on the size of the equilibrium set.
const MAX_EQUILIBRIA: usize = 10_000;

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            radius: None,
            inner_radius: 0.05,
            radial_nodes: 60,
            angular_nodes: 120,
            exclusion_radius: 1e-3,
            dedup_tolerance: 1e-8,
            extra_seeds: Vec::new(),
            execution: Execution::default(),
        }
    }
}

impl SearchOptions {
    pub fn outer_radius(&self, config: &PrimaryConfiguration) -> f64 {
        self.radius.unwrap_or(2.0 * config.max_radius() + 2.0)
    }

    fn starts(&self, config: &PrimaryConfiguration) -> Vec<Vector2<f64>> {
        let rho = self.outer_radius(config);
        let mut out = self.extra_seeds.clone();
        let nr = self.radial_nodes.max(2);
        for i in 0..nr {
            let r = self.inner_radius + (rho - self.inner_radius) * i as f64 / (nr - 1) as f64;
            for k in 0..self.angular_nodes {
                let (s, c) = (2.0 * PI * k as f64 / self.angular_nodes as f64).sin_cos();
                let u = Vector2::new(r * c, r * s);
                if nearest_distance(config, &u).1 > self.exclusion_radius {
                    out.push(u);
                }
            }
        }
        out
    }
}

fn insert_unique(list: &mut Vec<Equilibrium>, e: Equilibrium, tol: f64) -> bool {
    if list.iter().any(|q| (q.position - e.position).norm() < tol) {
        false
    } else {
        list.push(e);
        true
    }
}

/// All planar equilibria reachable from the search grid, closed under the
/// symmetry group of the configuration and sorted by `(x, y)`.
pub fn find_planar_equilibria(config: &PrimaryConfiguration, options: &SearchOptions) -> Result<Vec<Equilibrium>> {
    let rho = options.outer_radius(config);
    // the gradient must point outward on the outer circle
    for k in 0..360 {
        let (s, c) = (2.0 * PI * k as f64 / 360.0).sin_cos();
        let u = Vector2::new(rho * c, rho * s);
        let g = planar_gradient(config, &u)?;
        if g.dot(&u) <= 0.0 {
            return Err(Error::Domain(format!("search radius {rho} too small: gradient points inward at {u:?}")));
        }
    }

    let starts = options.starts(config);
    let results = map_slice(&starts, options.execution, |s| newton_refine(config, *s).ok());

    let tol = options.dedup_tolerance;
    let mut found: Vec<Equilibrium> = Vec::new();
    for e in results.into_iter().flatten() {
        if e.position.norm() <= rho {
            insert_unique(&mut found, e, tol);
        }
    }

    let group = config.symmetries();
    let mut i = 0;
    while i < found.len() {
        let p = found[i].position;
        for g in group.iter().skip(1) {
            let image = g * p;
            if found.iter().any(|q| (q.position - image).norm() < tol) {
                continue;
            }
            let e = newton_refine(config, image)?;
            // an isolated critical point maps to a critical point
            let drift = (e.position - image).norm();
            if drift > ISOLATION_DRIFT || found.len() > MAX_EQUILIBRIA {
                return Err(Error::NonIsolated { x: p.x, y: p.y, drift });
            }
            insert_unique(&mut found, e, tol);
        }
        i += 1;
    }

    found.sort_by(|a, b| a.position.x.total_cmp(&b.position.x).then(a.position.y.total_cmp(&b.position.y)));
    Ok(found)
}

/// Equilibria of a built configuration. Ring configurations also seed the
/// search with the ray-scan critical points, which can sit closer to the
/// central mass than the grid resolves.
pub fn equilibria_of(built: &BuiltConfig, execution: Execution) -> Result<Vec<Equilibrium>> {
    let mut options = SearchOptions { execution, ..SearchOptions::default() };
    if let Some(geometry) = &built.ring {
        options.extra_seeds = ring_critical_rays(geometry)?.all_points(geometry.n);
    }
    find_planar_equilibria(&built.config, &options)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MorseStatus {
    Pass,
    Fail,
    /// Degenerate points present; the identities do not apply.
    Inconclusive,
}

/// Outcome of the saddle/minimum counting identities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MorseReport {
    pub primaries: usize,
    pub minima: usize,
    pub saddles: usize,
    pub degenerate: usize,
    pub sigma_sum: i64,
    pub status: MorseStatus,
}

impl MorseReport {
    pub fn passed(&self) -> bool {
        self.status == MorseStatus::Pass
    }
}

impl fmt::Display for MorseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match self.status {
            MorseStatus::Pass => "PASS",
            MorseStatus::Fail => "FAIL",
            MorseStatus::Inconclusive => "INCONCLUSIVE",
        };
        write!(
            f,
            "{} = {} + {}: {status} (degree sum {} vs 1 - n = {}",
            self.saddles,
            self.primaries as i64 - 1,
            self.minima,
            self.sigma_sum,
            1 - self.primaries as i64
        )?;
        if self.degenerate > 0 {
            write!(f, ", {} degenerate", self.degenerate)?;
        }
        write!(f, ")")
    }
}

/// `#saddles = n - 1 + #minima` and `sum sigma = 1 - n`.
pub fn morse_consistency(equilibria: &[Equilibrium], primary_count: usize) -> MorseReport {
    let count = |k| equilibria.iter().filter(|e| e.kind == k).count();
    let minima = count(EquilibriumKind::Minimum);
    let saddles = count(EquilibriumKind::Saddle);
    let degenerate = count(EquilibriumKind::Degenerate);
    let sigma_sum: i64 = equilibria.iter().map(|e| e.sigma as i64).sum();
    let n = primary_count as i64;
    let status = if degenerate > 0 {
        MorseStatus::Inconclusive
    } else if saddles as i64 == n - 1 + minima as i64 && sigma_sum == 1 - n {
        MorseStatus::Pass
    } else {
        MorseStatus::Fail
    };
    MorseReport { primaries: primary_count, minima, saddles, degenerate, sigma_sum, status }
}

/// CSV with columns `x,y,kind,sigma,T,D,nu1_squared`.
pub fn equilibria_csv(equilibria: &[Equilibrium]) -> String {
    let mut out = String::from("x,y,kind,sigma,T,D,nu1_squared\n");
    for e in equilibria {
        out.push_str(&format!(
            "{:.16e},{:.16e},{},{},{:.16e},{:.16e},{:.16e}\n",
            e.position.x,
            e.position.y,
            e.kind,
            e.sigma,
            e.trace(),
            e.det(),
            e.nu1_squared()
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Maxwell ring rays

/// `V_r(r, phi)` for the scaled ring potential.
pub fn ring_radial_derivative(geometry: &RingGeometry, r: f64, phi: f64) -> Result<f64> {
    let alpha = geometry.alpha;
    let mut v = r;
    if geometry.mu > 0.0 {
        if r <= 0.0 {
            return Err(Error::Collision { primary: geometry.n, distance: r.abs() });
        }
        v -= geometry.central_mass * r.powf(-alpha);
    }
    let zeta = geometry.zeta();
    let mut sum = 0.0;
    for j in 1..=geometry.n {
        let (s, c) = (j as f64 * zeta - phi).sin_cos();
        let d2 = (r - c) * (r - c) + s * s;
        let d = d2.sqrt();
        if d < crate::potential::COLLISION_GUARD {
            return Err(Error::Collision { primary: j - 1, distance: d });
        }
        sum += (r - c) / d.powf(alpha + 1.0);
    }
    Ok(v - geometry.peripheral_mass * sum)
}

/// `V_phi(r, phi)` computed from the Cartesian gradient.
pub fn ring_angular_derivative(config: &PrimaryConfiguration, r: f64, phi: f64) -> Result<f64> {
    let (s, c) = phi.sin_cos();
    let g = potential_gradient(config, &Vector3::new(r * c, r * s, 0.0))?;
    Ok(r * (-s * g.x + c * g.y))
}

/// A critical point on one of the symmetry rays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayPoint {
    pub r: f64,
    pub phi: f64,
    pub kind: EquilibriumKind,
    pub v_rr: f64,
    pub v_phiphi: f64,
}

impl RayPoint {
    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.r * self.phi.cos(), self.r * self.phi.sin())
    }
}

/// The extra pair of critical points inside the unit circle on `phi = pi/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InnerPair {
    Absent,
    Present {
        r4: RayPoint,
        r5: RayPoint,
    },
    /// The two roots merged (closer than `1e-6`).
    Degenerate {
        r: f64,
    },
}

/// Critical points of the scaled ring potential on the rays `phi = 0` and
/// `phi = pi/n`, one representative per dihedral orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingCriticalSet {
    pub r1: RayPoint,
    /// On `phi = 0` when `mu > 0`, on `phi = pi/n` when `mu = 0`.
    pub r2: RayPoint,
    pub r3: RayPoint,
    pub inner: InnerPair,
    /// The origin is a critical point (`mu = 0`, `n >= 3`).
    pub origin: bool,
}

impl RingCriticalSet {
    pub fn r2_on_zero_ray(&self) -> bool {
        self.r2.phi == 0.0
    }

    /// Counts `(minima, saddles, degenerate)` over the full dihedral orbits.
    pub fn census(&self, n: usize) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        let mut add = |k: EquilibriumKind, m: usize| match k {
            EquilibriumKind::Minimum => counts.0 += m,
            EquilibriumKind::Saddle => counts.1 += m,
            EquilibriumKind::Degenerate => counts.2 += m,
        };
        add(self.r1.kind, n);
        add(self.r2.kind, n);
        add(self.r3.kind, n);
        match self.inner {
            InnerPair::Absent => {}
            InnerPair::Present { r4, r5 } => {
                add(r4.kind, n);
                add(r5.kind, n);
            }
            InnerPair::Degenerate { .. } => add(EquilibriumKind::Degenerate, n),
        }
        if self.origin {
            add(EquilibriumKind::Minimum, 1);
        }
        counts
    }

    /// Every critical point: the dihedral images of each representative,
    /// plus the origin when flagged.
    pub fn all_points(&self, n: usize) -> Vec<Vector2<f64>> {
        let mut reps = vec![self.r1, self.r2, self.r3];
        if let InnerPair::Present { r4, r5 } = self.inner {
            reps.push(r4);
            reps.push(r5);
        }
        let zeta = 2.0 * PI / n as f64;
        let mut out: Vec<Vector2<f64>> = reps
            .iter()
            .flat_map(|p| {
                (0..n).map(move |j| {
                    let a = p.phi + j as f64 * zeta;
                    Vector2::new(p.r * a.cos(), p.r * a.sin())
                })
            })
            .collect();
        if self.origin {
            out.push(Vector2::zeros());
        }
        out
    }
}

const RAY_SAMPLES: usize = 10_000;

/// Sample radii: log-spaced towards 0 and towards 1 inside the unit circle,
/// log-spaced in `r - 1` outside.
fn ray_samples(rho: f64) -> (Vec<f64>, Vec<f64>) {
    let half = RAY_SAMPLES / 4;
    let logspace = |a: f64, b: f64, k: usize| -> Vec<f64> {
        let (la, lb) = (a.ln(), b.ln());
        (0..k).map(|i| (la + (lb - la) * i as f64 / (k - 1) as f64).exp()).collect()
    };
    let mut inside = logspace(1e-8, 0.5, half);
    inside.extend(logspace(1e-9, 0.5, half).into_iter().rev().skip(1).map(|d| 1.0 - d));
    let outside = logspace(1e-9, rho - 1.0, RAY_SAMPLES / 2).into_iter().map(|d| 1.0 + d).collect();
    (inside, outside)
}

fn bisect<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64, flo: f64) -> Result<f64> {
    let mut slo = flo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == slo {
            lo = mid;
            slo = fm.signum();
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn ray_roots(geometry: &RingGeometry, phi: f64, samples: &[f64]) -> Result<Vec<f64>> {
    let f = |r: f64| ring_radial_derivative(geometry, r, phi);
    let values: Vec<f64> = samples.iter().map(|&r| f(r)).collect::<Result<_>>()?;
    let mut roots = Vec::new();
    for i in 0..samples.len() - 1 {
        let (a, b) = (values[i], values[i + 1]);
        if a == 0.0 {
            return Err(Error::BracketEndpoint(samples[i]));
        }
        if a.signum() != b.signum() && b != 0.0 {
            roots.push(bisect(f, samples[i], samples[i + 1], a)?);
        }
    }
    if values[samples.len() - 1] == 0.0 {
        return Err(Error::BracketEndpoint(samples[samples.len() - 1]));
    }
    Ok(roots)
}

fn classify_ray_point(config: &PrimaryConfiguration, r: f64, phi: f64) -> Result<RayPoint> {
    let (s, c) = phi.sin_cos();
    let h = planar_hessian(config, &Vector2::new(r * c, r * s))?;
    let radial = Vector2::new(c, s);
    let angular = Vector2::new(-s, c);
    // at a critical point V_phiphi = r^2 t^T H t (the -r V_r term vanishes)
    let v_rr = radial.dot(&(h.planar * radial));
    let v_phiphi = r * r * angular.dot(&(h.planar * angular));
    let kind = if is_degenerate(h.trace_planar, h.det_planar) {
        EquilibriumKind::Degenerate
    } else if v_rr * v_phiphi < 0.0 {
        EquilibriumKind::Saddle
    } else {
        EquilibriumKind::Minimum
    };
    Ok(RayPoint { r, phi, kind, v_rr, v_phiphi })
}

fn single(roots: &[f64], what: &str) -> Result<f64> {
    match roots {
        [r] => Ok(*r),
        _ => Err(Error::Domain(format!("expected exactly one root for {what}, found {}", roots.len()))),
    }
}

/// Locates `r1 ... r5` by bracketing sign changes of `V_r` on the rays
/// `phi = 0` and `phi = pi/n` and bisecting.
pub fn ring_critical_rays(geometry: &RingGeometry) -> Result<RingCriticalSet> {
    let (config, _) = crate::configuration::maxwell_ring_config(geometry.n, geometry.mu, geometry.alpha)?;
    let rho = 4.0;
    let (inside, outside) = ray_samples(rho);
    let mid = PI / geometry.n as f64;

    let zero_out = ray_roots(geometry, 0.0, &outside)?;
    let zero_in = ray_roots(geometry, 0.0, &inside)?;
    let mid_out = ray_roots(geometry, mid, &outside)?;
    let mid_in = ray_roots(geometry, mid, &inside)?;

    let r1 = classify_ray_point(&config, single(&zero_out, "r1 on phi = 0, r > 1")?, 0.0)?;
    let r3 = classify_ray_point(&config, single(&mid_out, "r3 on phi = pi/n, r > 1")?, mid)?;

    let (r2, inner) = if geometry.mu > 0.0 {
        let r2 = classify_ray_point(&config, single(&zero_in, "r2 on phi = 0, r < 1")?, 0.0)?;
        let inner = match mid_in.as_slice() {
            [] => InnerPair::Absent,
            [a, b] if (b - a).abs() < 1e-6 => InnerPair::Degenerate { r: 0.5 * (a + b) },
            [a, b] => InnerPair::Present {
                r4: classify_ray_point(&config, *a, mid)?,
                r5: classify_ray_point(&config, *b, mid)?,
            },
            other => {
                return Err(Error::Domain(format!(
                    "unexpected {} roots on phi = pi/n inside the unit circle",
                    other.len()
                )))
            }
        };
        (r2, inner)
    } else {
        if !zero_in.is_empty() {
            return Err(Error::Domain("unexpected root on phi = 0 inside the unit circle for mu = 0".into()));
        }
        let r2 = classify_ray_point(&config, single(&mid_in, "r2 on phi = pi/n, r < 1")?, mid)?;
        (r2, InnerPair::Absent)
    };

    Ok(RingCriticalSet { r1, r2, r3, inner, origin: geometry.mu == 0.0 && geometry.n >= 3 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configuration::{maxwell_ring_config, three_body_config};
    use crate::potential::potential_value;
    use approx::assert_relative_eq;

    fn count(eqs: &[Equilibrium], k: EquilibriumKind) -> usize {
        eqs.iter().filter(|e| e.kind == k).count()
    }

    #[test]
    fn near_circular_critical_set_is_reported() {
        let (config, geometry) = maxwell_ring_config(12, 0.001, 2.0).unwrap();
        let built = BuiltConfig { config, ring: Some(geometry), three_body_mu: None };
        let r = equilibria_of(&built, Execution::Sequential);
        assert!(matches!(r, Err(Error::NonIsolated { .. })), "{r:?}");
    }

    #[test]
    fn newton_finds_l4() {
        let tb = three_body_config(0.5, 2.0).unwrap();
        let e = newton_refine(&tb, Vector2::new(0.0, 0.9)).unwrap();
        assert!((e.position - Vector2::new(0.0, 3f64.sqrt() / 2.0)).norm() < 1e-12);
        assert_eq!(e.kind, EquilibriumKind::Minimum);
        assert_eq!(e.sigma, 1);
        assert!(e.gradient_norm < GRADIENT_TOLERANCE);
    }

    #[test]
    fn newton_finds_collinear_point() {
        let tb = three_body_config(0.5, 2.0).unwrap();
        let e = newton_refine(&tb, Vector2::new(1.3, 0.0)).unwrap();
        // independent oracle: bisection on dV/dx along the axis in (0.5, 3)
        let dvdx = |x: f64| {
            let h = 1e-6;
            potential_value(&tb, &Vector3::new(x + h, 0.0, 0.0)).unwrap()
                - potential_value(&tb, &Vector3::new(x - h, 0.0, 0.0)).unwrap()
        };
        let (mut lo, mut hi) = (0.6, 3.0);
        for _ in 0..60 {
            let m = 0.5 * (lo + hi);
            if dvdx(m) < 0.0 {
                lo = m
            } else {
                hi = m
            }
        }
        assert!((e.position.x - lo).abs() < 1e-7);
        assert!(e.position.y.abs() < 1e-12);
        assert_eq!(e.kind, EquilibriumKind::Saddle);
    }

    #[test]
    fn newton_ring_origin() {
        let (ring, _) = maxwell_ring_config(3, 0.0, 2.0).unwrap();
        let e = newton_refine(&ring, Vector2::new(0.01, 0.01)).unwrap();
        assert!(e.position.norm() < 1e-12);
        assert_eq!(e.kind, EquilibriumKind::Minimum);
        let p = e.hessian.planar;
        assert!(p[(0, 1)].abs() < 1e-12);
        assert_relative_eq!(p[(0, 0)], p[(1, 1)], epsilon = 1e-12);
        assert!(p[(0, 0)] > 0.0);
    }

    #[test]
    fn newton_rejects_collision_start() {
        let tb = three_body_config(0.5, 2.0).unwrap();
        assert!(matches!(newton_refine(&tb, Vector2::new(0.5, 0.0)), Err(Error::Collision { .. })));
    }

    #[test]
    fn three_body_census() {
        let tb = three_body_config(0.5, 2.0).unwrap();
        let eqs = find_planar_equilibria(&tb, &SearchOptions::default()).unwrap();
        assert_eq!(eqs.len(), 5);
        assert_eq!(count(&eqs, EquilibriumKind::Minimum), 2);
        assert_eq!(count(&eqs, EquilibriumKind::Saddle), 3);
        let report = morse_consistency(&eqs, 2);
        assert!(report.passed());
        assert!(report.to_string().starts_with("3 = 1 + 2: PASS"));
    }

    #[test]
    fn ring_censuses() {
        let (ring, _) = maxwell_ring_config(3, 5.0, 2.0).unwrap();
        let eqs = find_planar_equilibria(&ring, &SearchOptions::default()).unwrap();
        assert_eq!(eqs.len(), 9);
        assert_eq!(count(&eqs, EquilibriumKind::Saddle), 6);

        let (ring, _) = maxwell_ring_config(4, 0.0, 2.0).unwrap();
        let eqs = find_planar_equilibria(&ring, &SearchOptions::default()).unwrap();
        assert_eq!(eqs.len(), 13);
        assert_eq!(count(&eqs, EquilibriumKind::Saddle), 8);
        assert!(eqs.iter().any(|e| e.position.norm() < 1e-12));
    }

    #[test]
    fn search_strategies_agree() {
        let (ring, _) = maxwell_ring_config(5, 1.0, 2.0).unwrap();
        let seq = SearchOptions { execution: Execution::Sequential, ..Default::default() };
        let par = SearchOptions { execution: Execution::Parallel, ..Default::default() };
        let a = find_planar_equilibria(&ring, &seq).unwrap();
        let b = find_planar_equilibria(&ring, &par).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn morse_report_statuses() {
        let tb = three_body_config(0.1, 2.0).unwrap();
        let eqs = find_planar_equilibria(&tb, &SearchOptions::default()).unwrap();
        assert!(morse_consistency(&eqs, 2).passed());
        assert_eq!(morse_consistency(&eqs[1..], 2).status, MorseStatus::Fail);
        let mut degenerate = eqs.clone();
        degenerate[0].kind = EquilibriumKind::Degenerate;
        degenerate[0].sigma = 0;
        assert_eq!(morse_consistency(&degenerate, 2).status, MorseStatus::Inconclusive);
    }

    #[test]
    fn csv_layout() {
        let tb = three_body_config(0.5, 2.0).unwrap();
        let eqs = find_planar_equilibria(&tb, &SearchOptions::default()).unwrap();
        let csv = equilibria_csv(&eqs);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,y,kind,sigma,T,D,nu1_squared");
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1].split(',').count(), 7);
    }

    #[test]
    fn radial_derivative_matches_finite_difference() {
        let (ring, g) = maxwell_ring_config(5, 2.0, 2.0).unwrap();
        for &(r, phi) in &[(0.5, 0.1), (1.4, 0.3), (0.8, PI / 5.0), (2.5, 0.0)] {
            let h = 1e-5;
            let v = |rr: f64| potential_value(&ring, &Vector3::new(rr * phi.cos(), rr * phi.sin(), 0.0)).unwrap();
            let fd = (v(r + h) - v(r - h)) / (2.0 * h);
            assert!((ring_radial_derivative(&g, r, phi).unwrap() - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn radial_derivative_at_half_angle_is_negative() {
        for n in [3, 4, 5, 7, 12] {
            for mu in [0.0, 0.001, 1.0, 1000.0] {
                let g = RingGeometry::new(n, mu, 2.0).unwrap();
                assert!(ring_radial_derivative(&g, 1.0, PI / n as f64).unwrap() < 0.0);
            }
        }
    }

    #[test]
    fn two_gon_identity() {
        let g = RingGeometry::new(2, 1.0, 2.0).unwrap();
        let alpha = g.alpha;
        for k in 1..50 {
            let r = 0.05 * k as f64;
            let f = -2.0 * (r * r + 1.0).powf(-(alpha + 1.0) / 2.0);
            let rhs = r * (f + g.s) + g.mu * (r - r.powf(-alpha));
            let lhs = (g.s + g.mu) * ring_radial_derivative(&g, r, PI / 2.0).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn far_field_radial_derivative() {
        let g = RingGeometry::new(5, 1.0, 2.0).unwrap();
        let v = ring_radial_derivative(&g, 1e4, 0.2).unwrap();
        assert_relative_eq!(v / 1e4, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn rays_two_gon() {
        let g = RingGeometry::new(2, 1.0, 2.0).unwrap();
        let set = ring_critical_rays(&g).unwrap();
        assert!(set.r1.r > 1.0 && set.r1.kind == EquilibriumKind::Saddle);
        assert!(set.r2.r < 1.0 && set.r2_on_zero_ray() && set.r2.kind == EquilibriumKind::Saddle);
        assert!(set.r3.r > 1.0 && set.r3.kind == EquilibriumKind::Minimum);
        assert_eq!(set.inner, InnerPair::Absent);
        assert!(!set.origin);
    }

    #[test]
    fn rays_inner_pair() {
        let g = RingGeometry::new(7, 0.001, 2.0).unwrap();
        let set = ring_critical_rays(&g).unwrap();
        match set.inner {
            InnerPair::Present { r4, r5 } => {
                assert!(r4.r < r5.r && r5.r < 1.0);
                assert_eq!(r4.kind, EquilibriumKind::Minimum);
                assert_eq!(r5.kind, EquilibriumKind::Saddle);
            }
            other => panic!("expected r4/r5, got {other:?}"),
        }
        let g = RingGeometry::new(7, 1000.0, 2.0).unwrap();
        let set = ring_critical_rays(&g).unwrap();
        assert_eq!(set.inner, InnerPair::Absent);
        assert!((set.r3.r - 1.0).abs() < 0.1);
    }

    #[test]
    fn rays_mu_zero() {
        let g = RingGeometry::new(5, 0.0, 2.0).unwrap();
        let set = ring_critical_rays(&g).unwrap();
        assert!(!set.r2_on_zero_ray());
        assert!(set.origin);
        assert_eq!(set.census(5), (6, 10, 0));
    }

    #[test]
    fn angular_derivative_sign_structure() {
        for n in [3, 5, 7] {
            for mu in [0.0, 1.0] {
                let (ring, _) = maxwell_ring_config(n, mu, 2.0).unwrap();
                for &r in &[0.3, 0.7, 1.3, 2.0] {
                    for k in 1..40 {
                        let phi = 2.0 * PI * k as f64 / 40.0 + 0.01;
                        let sn = (n as f64 * phi).sin();
                        if sn.abs() < 1e-3 {
                            continue;
                        }
                        let vphi = ring_angular_derivative(&ring, r, phi).unwrap();
                        assert_eq!(vphi.signum(), -sn.signum(), "n={n} mu={mu} r={r} phi={phi}");
                    }
                }
            }
        }
    }
}
