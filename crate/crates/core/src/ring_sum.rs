//! The ring sum `S(r, phi) = sum_j |r - e^{i(j zeta - phi)}|^{-beta}` with
//! `zeta = 2 pi / n`, by direct summation and by its integral representation
//!
//! ```text
//! S = (n/pi) sin(pi beta/2) Int_0^1 tau^{beta/2-1} (1-tau)^{-beta/2} h(tau) dtau,
//! h = (1 - (r tau)^{2n}) / ((1 - r^2 tau)^{beta/2} |1 - (tau r e^{-i phi})^n|^2)
//! ```
//!
//! valid for `r < 1`; `S(r) = r^{-beta} S(1/r)` covers `r > 1`.
//!
//! Both endpoint singularities are absorbed into Gauss-Jacobi weights: the
//! interval is split at 1/2 so each half carries one algebraic factor.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::{FiniteAboveNegOneF64, GaussJacobi};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};

/// Closest admissible approach of `r` to the unit circle.
pub const UNIT_CIRCLE_GAP: f64 = 1e-6;
/// Target for the difference between successive quadrature refinements.
pub const QUADRATURE_TOLERANCE: f64 = 1e-11;
const FIRST_DEGREE: usize = 16;
const MAX_DEGREE: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingSumQuery {
    n: usize,
    beta: f64,
    r: f64,
    phi: f64,
}

impl RingSumQuery {
    pub fn new(n: usize, beta: f64, r: f64, phi: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("ring sum needs n >= 2, got {n}")));
        }
        if !(beta > 0.0 && beta < 2.0) {
            return Err(Error::Domain(format!("beta must lie in (0, 2), got {beta}")));
        }
        if !(r > 0.0 && r.is_finite()) || (r - 1.0).abs() < UNIT_CIRCLE_GAP {
            return Err(Error::Domain(format!("r must be positive and away from 1, got {r}")));
        }
        if !phi.is_finite() {
            return Err(Error::Domain("phi must be finite".into()));
        }
        Ok(Self { n, beta, r, phi })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn with_phi(&self, phi: f64) -> Result<Self> {
        Self::new(self.n, self.beta, self.r, phi)
    }

    /// The same angle at radius `1/r`.
    pub fn inverted(&self) -> Self {
        Self { r: 1.0 / self.r, ..*self }
    }
}

fn pairwise_sum(terms: &[f64]) -> f64 {
    if terms.len() <= 8 {
        return terms.iter().sum();
    }
    let (lo, hi) = terms.split_at(terms.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

/// Direct n-term sum; valid for any `r`.
pub fn direct_sum_s(q: &RingSumQuery) -> Result<f64> {
    let zeta = 2.0 * PI / q.n as f64;
    let mut terms = Vec::with_capacity(q.n);
    for j in 1..=q.n {
        let theta = j as f64 * zeta - q.phi;
        let d = (q.r - theta.cos()).hypot(theta.sin());
        if d < 1e-12 {
            return Err(Error::Collision { primary: j - 1, distance: d });
        }
        terms.push(d.powf(-q.beta));
    }
    Ok(pairwise_sum(&terms))
}

type Rule = Arc<Vec<(f64, f64)>>;

/// Gauss-Jacobi rule on `[-1, 1]` for the one-sided weight `(1 + x)^e`.
/// Rules are immutable, so a process-wide cache keeps calls pure.
fn one_sided_rule(degree: usize, exponent: f64) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Rule>>> = OnceLock::new();
    let key = (degree, exponent.to_bits());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(rule) = cache.lock().expect("rule cache poisoned").get(&key) {
        return rule.clone();
    }
    // even degree only: odd rules have their middle node pinned to zero
    debug_assert!(degree.is_multiple_of(2));
    let rule = GaussJacobi::new(
        NonZeroUsize::new(degree).expect("degree is positive"),
        FiniteAboveNegOneF64::new(0.0).expect("zero is admissible"),
        FiniteAboveNegOneF64::new(exponent).expect("exponent lies in (-1, 0]"),
    );
    let pairs: Rule = Arc::new(rule.as_node_weight_pairs().to_vec());
    cache.lock().expect("rule cache poisoned").insert(key, pairs.clone());
    pairs
}

/// `Int_0^1 tau^a (1 - tau)^b f(tau) dtau` for `a, b` in `(-1, 0]` and
/// smooth `f`, at a fixed degree per half.
fn endpoint_weighted(a: f64, b: f64, degree: usize, f: &impl Fn(f64, f64) -> f64) -> f64 {
    // left half: tau = (1 + x)/4, tau^a = 4^{-a} (1 + x)^a
    let left: f64 = one_sided_rule(degree, a)
        .iter()
        .map(|&(x, w)| {
            let tau = 0.25 * (1.0 + x);
            w * (1.0 - tau).powf(b) * f(tau, 1.0 - tau)
        })
        .sum::<f64>()
        * 0.25
        * 4f64.powf(-a);
    // right half mirrored: 1 - tau = (1 + x)/4
    let right: f64 = one_sided_rule(degree, b)
        .iter()
        .map(|&(x, w)| {
            let one_minus = 0.25 * (1.0 + x);
            let tau = 1.0 - one_minus;
            w * tau.powf(a) * f(tau, one_minus)
        })
        .sum::<f64>()
        * 0.25
        * 4f64.powf(-b);
    left + right
}

/// Doubles the degree until successive estimates agree.
fn adaptive(a: f64, b: f64, f: impl Fn(f64, f64) -> f64) -> Result<f64> {
    let mut degree = FIRST_DEGREE;
    let mut previous = endpoint_weighted(a, b, degree, &f);
    let mut estimate = f64::INFINITY;
    while degree < MAX_DEGREE {
        degree *= 2;
        let current = endpoint_weighted(a, b, degree, &f);
        estimate = (current - previous).abs();
        if estimate < QUADRATURE_TOLERANCE * current.abs().max(1.0) {
            return Ok(current);
        }
        previous = current;
    }
    Err(Error::Quadrature { estimate })
}

fn require_inside(q: &RingSumQuery) -> Result<()> {
    if q.r < 1.0 - UNIT_CIRCLE_GAP {
        Ok(())
    } else {
        Err(Error::Domain(format!("integral representation needs r < 1, got {}", q.r)))
    }
}

/// `|1 - (tau r e^{-i phi})^n|^2` from `(r tau)^n` and `cos(n phi)`.
fn ring_factor(rt_n: f64, cos_nphi: f64) -> f64 {
    // written as (1 - x)^2 + 2x(1 - cos) to stay accurate near the pole
    (1.0 - rt_n).powi(2) + 2.0 * rt_n * (1.0 - cos_nphi)
}

fn prefactor(q: &RingSumQuery) -> f64 {
    (PI * q.beta / 2.0).sin() / PI
}

/// Integral representation of `S`, for `r < 1`.
pub fn integral_s(q: &RingSumQuery) -> Result<f64> {
    require_inside(q)?;
    let (n, r, half_beta) = (q.n as i32, q.r, 0.5 * q.beta);
    let cos_nphi = (q.n as f64 * q.phi).cos();
    let h = move |tau: f64, _: f64| {
        let rt_n = (r * tau).powi(n);
        (1.0 - rt_n * rt_n) / ((1.0 - r * r * tau).powf(half_beta) * ring_factor(rt_n, cos_nphi))
    };
    Ok(q.n as f64 * prefactor(q) * adaptive(half_beta - 1.0, -half_beta, h)?)
}

/// `S` for `r > 1` through `S(r) = r^{-beta} S(1/r)`.
pub fn extended_s(q: &RingSumQuery) -> Result<f64> {
    if q.r <= 1.0 + UNIT_CIRCLE_GAP {
        return Err(Error::Domain(format!("extension needs r > 1, got {}", q.r)));
    }
    Ok(q.r.powf(-q.beta) * integral_s(&q.inverted())?)
}

/// `S` on either side of the unit circle from the integral representation.
pub fn ring_sum(q: &RingSumQuery) -> Result<f64> {
    if q.r < 1.0 {
        integral_s(q)
    } else {
        extended_s(q)
    }
}

/// Angular derivative written as `S_phi = -sin(n phi) omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularDerivative {
    pub value: f64,
    /// `omega(r, phi) > 0`.
    pub omega: f64,
}

/// `S_phi` from the integral representation, for `r < 1`. Fails if the
/// `omega` integrand is not positive at every quadrature node.
pub fn integral_s_phi(q: &RingSumQuery) -> Result<AngularDerivative> {
    require_inside(q)?;
    let (n, r, half_beta) = (q.n as i32, q.r, 0.5 * q.beta);
    let cos_nphi = (q.n as f64 * q.phi).cos();
    let min_integrand = std::cell::Cell::new(f64::INFINITY);
    let h = |tau: f64, _: f64| {
        let rt_n = (r * tau).powi(n);
        let g = ring_factor(rt_n, cos_nphi);
        let v = 2.0 * rt_n * (1.0 - rt_n * rt_n) / ((1.0 - r * r * tau).powf(half_beta) * g * g);
        min_integrand.set(min_integrand.get().min(v));
        v
    };
    let integral = adaptive(half_beta - 1.0, -half_beta, h)?;
    if !(min_integrand.get() > 0.0) {
        return Err(Error::Domain(format!("omega integrand not positive (min {:e})", min_integrand.get())));
    }
    let omega = (q.n * q.n) as f64 * prefactor(q) * integral;
    Ok(AngularDerivative { value: -(q.n as f64 * q.phi).sin() * omega, omega })
}

/// `S_phi` on either side of the unit circle.
pub fn ring_sum_phi(q: &RingSumQuery) -> Result<AngularDerivative> {
    if q.r < 1.0 {
        return integral_s_phi(q);
    }
    let scale = q.r.powf(-q.beta);
    let inner = integral_s_phi(&q.inverted())?;
    Ok(AngularDerivative { value: scale * inner.value, omega: scale * inner.omega })
}

// ---------------------------------------------------------------------------
// direct-vs-integral check

#[derive(Debug, Clone)]
pub struct CheckGrid {
    pub n: Vec<usize>,
    pub beta: Vec<f64>,
    pub r: Vec<f64>,
    pub angles: usize,
}

impl Default for CheckGrid {
    fn default() -> Self {
        Self { n: vec![2, 3, 5, 7, 12], beta: vec![0.5, 1.0, 1.5], r: vec![0.1, 0.5, 0.9, 2.0, 10.0], angles: 8 }
    }
}

impl CheckGrid {
    /// Angles are `k pi / angles` shifted off the symmetry rays.
    pub fn queries(&self) -> Result<Vec<RingSumQuery>> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &beta in &self.beta {
                for &r in &self.r {
                    for k in 0..self.angles {
                        let phi = (k as f64 + 0.37) * PI / self.angles as f64;
                        out.push(RingSumQuery::new(n, beta, r, phi)?);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub query: RingSumQuery,
    pub direct: f64,
    pub integral: f64,
    pub rel_err: f64,
}

pub fn check_query(q: &RingSumQuery) -> Result<CheckRow> {
    let direct = direct_sum_s(q)?;
    let integral = ring_sum(q)?;
    Ok(CheckRow { query: *q, direct, integral, rel_err: ((direct - integral) / direct).abs() })
}

pub fn check_grid(grid: &CheckGrid, exec: Execution) -> Result<Vec<CheckRow>> {
    let queries = grid.queries()?;
    map_slice(&queries, exec, check_query).into_iter().collect()
}

pub fn check_csv(rows: &[CheckRow]) -> String {
    let mut s = String::from("n,beta,r,phi,direct,integral,rel_err\n");
    for row in rows {
        let q = &row.query;
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            q.n, q.beta, q.r, q.phi, row.direct, row.integral, row.rel_err
        );
    }
    s
}
