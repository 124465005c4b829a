//! Linearization blocks at an equilibrium and the bifurcation frequencies
//! they produce.
//!
//! For `lambda = l nu` the linearized periodic problem splits into the
//! in-plane block `M0(lambda) = lambda^2 I - 2 i lambda J + H` (Hermitian
//! 2x2, `J` the planar rotation by `+pi/2`) and the normal block
//! `M1(lambda) = lambda^2 - nu1^2`. The index jump at a frequency is
//! `eta_k = sigma (n_k(nu - rho) - n_k(nu + rho))`, with `n_k` the Morse
//! index of `M_k` and `sigma = sgn det H`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::configuration::three_body_config;
use crate::equilibria::{is_degenerate, Equilibrium, EquilibriumKind};
use crate::error::{Error, Result};
use crate::potential::planar_gradient;

/// Absolute tolerance on frequency relations that count as resonances.
pub const RESONANCE_TOLERANCE: f64 = 1e-9;
/// Default number of modes scanned for `2 l nu1 = nu_pm`.
pub const DEFAULT_MODE_CUTOFF: usize = 16;
/// Default number of ratios scanned for `nu_+ = m nu_-`.
pub const DEFAULT_RESONANCE_ORDERS: usize = 50;
/// Smallest `|det|` at which a block counts as invertible.
const SINGULAR_BLOCK: f64 = 1e-12;

/// Frequency offset used to evaluate Morse indices on both sides of `nu`.
pub fn probe_offset(nu: f64) -> f64 {
    1e-6 * (1.0 + nu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymmetryClass {
    /// Isotropy `Z2 = <(kappa, 0)>`: planar orbits.
    PlanarZ2,
    /// Isotropy `Z2~ = <(kappa, pi)>`: eight-shaped spatial orbits.
    EightZ2tilde,
}

/// Which block is singular.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Planar,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Resonance {
    /// `nu_+ = m nu_-`.
    PlanarRatio { m: usize, residual: f64 },
    /// `2 l nu_1 = nu_+` or `nu_-`.
    Spatial { l: usize, planar_nu: f64, residual: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationPoint {
    pub nu: f64,
    pub symmetry: SymmetryClass,
    pub eta: i32,
    pub resonances: Vec<Resonance>,
    pub period: f64,
}

impl BifurcationPoint {
    fn new(nu: f64, symmetry: SymmetryClass, eta: i32, resonances: Vec<Resonance>) -> Self {
        Self { nu, symmetry, eta, resonances, period: 2.0 * PI / nu }
    }

    pub fn block(&self) -> Block {
        match self.symmetry {
            SymmetryClass::PlanarZ2 => Block::Planar,
            SymmetryClass::EightZ2tilde => Block::Normal,
        }
    }
}

/// Trace, determinant and frequencies at one equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub trace: f64,
    pub det: f64,
    pub nu_plus: Option<f64>,
    pub nu_minus: Option<f64>,
    pub nu1: f64,
    pub sigma: i32,
}

/// Positive roots `nu_pm = (2 - T/2 +- sqrt((2 - T/2)^2 - D))^(1/2)`, when real.
pub fn planar_frequencies(trace: f64, det: f64) -> (Option<f64>, Option<f64>) {
    let b = 2.0 - 0.5 * trace;
    let disc = b * b - det;
    if disc < 0.0 {
        return (None, None);
    }
    let root = disc.sqrt();
    // nu_+^2 nu_-^2 = D avoids cancellation in the smaller root
    let plus2 = if b >= 0.0 { b + root } else { b - root };
    let minus2 = if plus2 != 0.0 { det / plus2 } else { 0.0 };
    let (hi, lo) = if plus2 >= minus2 { (plus2, minus2) } else { (minus2, plus2) };
    let as_freq = |y: f64| (y > 0.0).then(|| y.sqrt());
    (as_freq(hi), as_freq(lo))
}

pub fn spectral_data(eq: &Equilibrium) -> SpectralData {
    let (nu_plus, nu_minus) = planar_frequencies(eq.trace(), eq.det());
    SpectralData { trace: eq.trace(), det: eq.det(), nu_plus, nu_minus, nu1: eq.nu1_squared().sqrt(), sigma: eq.sigma }
}

/// `M1(lambda) = lambda^2 - nu1^2`.
pub fn block_m1(eq: &Equilibrium, lambda: f64) -> f64 {
    lambda * lambda + eq.hessian.normal
}

/// `M0(lambda) = lambda^2 I - 2 i lambda J + H`.
pub fn block_m0(eq: &Equilibrium, lambda: f64) -> Matrix2<Complex64> {
    m0_from_hessian(&eq.hessian.planar, lambda)
}

pub(crate) fn m0_from_hessian(h: &Matrix2<f64>, lambda: f64) -> Matrix2<Complex64> {
    let l2 = lambda * lambda;
    let c = Complex64::new(0.0, 2.0 * lambda);
    Matrix2::new(
        Complex64::new(l2 + h[(0, 0)], 0.0),
        Complex64::new(h[(0, 1)], 0.0) + c,
        Complex64::new(h[(1, 0)], 0.0) - c,
        Complex64::new(l2 + h[(1, 1)], 0.0),
    )
}

/// `det M0(nu) = nu^4 - 2 (2 - T/2) nu^2 + D`.
pub fn det_m0(trace: f64, det: f64, nu: f64) -> f64 {
    let n2 = nu * nu;
    n2 * n2 - 2.0 * (2.0 - 0.5 * trace) * n2 + det
}

/// Eigenvalues of a 2x2 Hermitian matrix, ascending, in closed form.
pub fn hermitian_eigenvalues(m: &Matrix2<Complex64>) -> (f64, f64) {
    let a = m[(0, 0)].re;
    let b = m[(1, 1)].re;
    let c = m[(0, 1)];
    let mean = 0.5 * (a + b);
    let rad = (0.5 * (a - b)).hypot(c.norm());
    (mean - rad, mean + rad)
}

/// Number of negative eigenvalues of `M0(lambda)`.
pub fn morse_index_m0(eq: &Equilibrium, lambda: f64) -> Result<usize> {
    let det = det_m0(eq.trace(), eq.det(), lambda);
    if det.abs() <= SINGULAR_BLOCK {
        return Err(Error::SingularBlock { lambda, det });
    }
    let (lo, hi) = hermitian_eigenvalues(&block_m0(eq, lambda));
    Ok((lo < 0.0) as usize + (hi < 0.0) as usize)
}

/// Number of negative eigenvalues of `M1(lambda)` (0 or 1).
pub fn morse_index_m1(eq: &Equilibrium, lambda: f64) -> Result<usize> {
    let m = block_m1(eq, lambda);
    if m.abs() <= SINGULAR_BLOCK {
        return Err(Error::SingularBlock { lambda, det: m });
    }
    Ok((m < 0.0) as usize)
}

/// Index jump from its definition, probing the Morse index at `nu -+ rho`.
pub fn index_jump(eq: &Equilibrium, block: Block, nu: f64) -> Result<i32> {
    let rho = probe_offset(nu);
    let index = |l: f64| match block {
        Block::Planar => morse_index_m0(eq, l),
        Block::Normal => morse_index_m1(eq, l),
    };
    Ok(eq.sigma * (index(nu - rho)? as i32 - index(nu + rho)? as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanarCase {
    /// `D < 0`: one frequency `nu_+` with jump -1.
    Saddle,
    /// `D > 0`, `(2 - T/2)^2 > D`, `T < 4`: two frequencies.
    TwoFrequencies,
    /// `(2 - T/2)^2 < D`: `M0` is invertible for every real frequency.
    ComplexFrequencies,
    /// Real roots in `nu^2` but none positive: `M0` is always invertible.
    NoPositiveRoots,
    /// `(2 - T/2)^2 = D`: `nu_+ = nu_-`, jump 0, inconclusive.
    DoubleRoot,
}

impl PlanarCase {
    pub fn reason(&self) -> &'static str {
        match self {
            Self::Saddle => "saddle: single planar frequency",
            Self::TwoFrequencies => "two planar frequencies",
            Self::ComplexFrequencies => "complex nu_pm: no planar bifurcation",
            Self::NoPositiveRoots => "no positive nu_pm: no planar bifurcation",
            Self::DoubleRoot => "double root nu_+ = nu_-: jump 0, inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarBifurcations {
    pub case: PlanarCase,
    pub points: Vec<BifurcationPoint>,
}

fn reject_degenerate(eq: &Equilibrium) -> Result<()> {
    if eq.kind == EquilibriumKind::Degenerate || is_degenerate(eq.trace(), eq.det()) {
        Err(Error::Degenerate { det: eq.det() })
    } else {
        Ok(())
    }
}

/// Planar bifurcation points from the trace/determinant case analysis.
pub fn planar_bifurcations(eq: &Equilibrium) -> Result<PlanarBifurcations> {
    reject_degenerate(eq)?;
    let (t, d) = (eq.trace(), eq.det());
    let b = 2.0 - 0.5 * t;
    let disc = b * b - d;
    let (nu_plus, nu_minus) = planar_frequencies(t, d);
    if d < 0.0 {
        let nu = nu_plus.expect("D < 0 always has a positive root");
        return Ok(PlanarBifurcations {
            case: PlanarCase::Saddle,
            points: vec![BifurcationPoint::new(nu, SymmetryClass::PlanarZ2, -1, Vec::new())],
        });
    }
    if disc.abs() <= 1e-12 * b.abs().max(1.0).powi(2) {
        return Ok(PlanarBifurcations { case: PlanarCase::DoubleRoot, points: Vec::new() });
    }
    if disc < 0.0 {
        return Ok(PlanarBifurcations { case: PlanarCase::ComplexFrequencies, points: Vec::new() });
    }
    match (nu_plus, nu_minus) {
        (Some(hi), Some(lo)) if t < 4.0 => {
            let resonances: Vec<Resonance> = planar_resonance_values(t, d, DEFAULT_RESONANCE_ORDERS)
                .into_iter()
                .filter(|&(m, r)| m > 1 && r < RESONANCE_TOLERANCE)
                .map(|(m, residual)| Resonance::PlanarRatio { m, residual })
                .collect();
            Ok(PlanarBifurcations {
                case: PlanarCase::TwoFrequencies,
                points: vec![
                    BifurcationPoint::new(hi, SymmetryClass::PlanarZ2, 1, resonances.clone()),
                    BifurcationPoint::new(lo, SymmetryClass::PlanarZ2, -1, resonances),
                ],
            })
        }
        _ => Ok(PlanarBifurcations { case: PlanarCase::NoPositiveRoots, points: Vec::new() }),
    }
}

/// Eight-solution bifurcation at `nu_1` with jump `sigma`, flagged with every
/// `l <= mode_cutoff` such that `2 l nu_1 = nu_pm`.
pub fn spatial_bifurcation(eq: &Equilibrium, mode_cutoff: usize) -> Result<BifurcationPoint> {
    reject_degenerate(eq)?;
    let data = spectral_data(eq);
    let mut resonances = Vec::new();
    for l in 1..=mode_cutoff {
        for planar_nu in [data.nu_plus, data.nu_minus].into_iter().flatten() {
            let residual = (2.0 * l as f64 * data.nu1 - planar_nu).abs();
            if residual < RESONANCE_TOLERANCE {
                resonances.push(Resonance::Spatial { l, planar_nu, residual });
            }
        }
    }
    Ok(BifurcationPoint::new(data.nu1, SymmetryClass::EightZ2tilde, eq.sigma, resonances))
}

/// `|(4 - T)/sqrt(D) - (m + 1/m)|` for `m = 1..=orders`; a zero means `nu_+ = m nu_-`.
pub fn planar_resonance_values(trace: f64, det: f64, orders: usize) -> Vec<(usize, f64)> {
    if det <= 0.0 {
        return Vec::new();
    }
    let ratio = (4.0 - trace) / det.sqrt();
    (1..=orders)
        .map(|m| {
            let m_f = m as f64;
            (m, (ratio - (m_f + 1.0 / m_f)).abs())
        })
        .collect()
}

/// All bifurcation points of an equilibrium: planar ones first (`nu_+`
/// before `nu_-`), then the eight point.
pub fn bifurcation_points(eq: &Equilibrium, mode_cutoff: usize) -> Result<(PlanarBifurcations, Vec<BifurcationPoint>)> {
    let planar = planar_bifurcations(eq)?;
    let mut all = planar.points.clone();
    all.push(spatial_bifurcation(eq, mode_cutoff)?);
    Ok((planar, all))
}

// ---------------------------------------------------------------------------
// restricted three-body closed forms

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangularForms {
    pub nu_plus: Option<f64>,
    pub nu_minus: Option<f64>,
    pub nu1: f64,
    /// Smaller root of `mu (1 - mu) = (3 - alpha)^2 / (3 (alpha + 1)^2)`;
    /// `None` when every `mu` satisfies the two-frequency condition.
    pub routh_bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollinearForms {
    pub x: f64,
    pub nu1: f64,
    pub nu_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeBodyClosedForms {
    pub triangular: TriangularForms,
    /// Ordered by `x`.
    pub collinear: Vec<CollinearForms>,
}

/// `nu_pm^2 = (3 - alpha +- sqrt((3 - alpha)^2 - 3 (alpha + 1)^2 mu (1 - mu))) / 2`.
pub fn triangular_frequencies(mu: f64, alpha: f64) -> (Option<f64>, Option<f64>) {
    let a = 3.0 - alpha;
    let disc = a * a - 3.0 * (alpha + 1.0).powi(2) * mu * (1.0 - mu);
    if disc < 0.0 {
        return (None, None);
    }
    let plus2 = 0.5 * (a + disc.sqrt());
    // product of the roots is 3 (alpha+1)^2 mu (1-mu) / 4
    let minus2 = 0.75 * (alpha + 1.0).powi(2) * mu * (1.0 - mu) / plus2;
    (Some(plus2.sqrt()), (minus2 > 0.0).then(|| minus2.sqrt()))
}

/// Routh-type bound on `mu` for the triangular points.
pub fn routh_bound(alpha: f64) -> Option<f64> {
    let c = (3.0 - alpha).powi(2) / (3.0 * (alpha + 1.0).powi(2));
    let disc = 1.0 - 4.0 * c;
    // smaller root of mu^2 - mu + c = 0, written to avoid cancellation
    (disc >= 0.0).then(|| 2.0 * c / (1.0 + disc.sqrt()))
}

/// `nu_+^2 = 1 - (alpha - 1) nu1^2 / 2 + sqrt((alpha + 1)^2 nu1^4 / 4 - 2 (alpha - 1) nu1^2)`.
pub fn collinear_nu_plus_squared(nu1_sq: f64, alpha: f64) -> f64 {
    1.0 - 0.5 * (alpha - 1.0) * nu1_sq
        + (0.25 * (alpha + 1.0).powi(2) * nu1_sq * nu1_sq - 2.0 * (alpha - 1.0) * nu1_sq).sqrt()
}

/// Collinear equilibria from bisection of `dV/dx` on the three axis intervals.
fn collinear_points(mu: f64, alpha: f64) -> Result<Vec<f64>> {
    let config = three_body_config(mu, alpha)?;
    let vx = |x: f64| planar_gradient(&config, &Vector2::new(x, 0.0)).map(|g| g.x);
    let gap = 1e-9;
    let (x1, x2) = (-mu, 1.0 - mu);
    let brackets = [(x1 - 3.0, x1 - gap), (x1 + gap, x2 - gap), (x2 + gap, x2 + 3.0)];
    let mut out = Vec::with_capacity(3);
    for (mut lo, mut hi) in brackets {
        let flo = vx(lo)?;
        if flo.signum() == vx(hi)?.signum() {
            return Err(Error::Domain(format!("no sign change of V_x on ({lo}, {hi})")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if vx(mid)?.signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    Ok(out)
}

/// Closed-form frequencies of the restricted three-body problem.
pub fn three_body_closed_forms(mu: f64, alpha: f64) -> Result<ThreeBodyClosedForms> {
    let config = three_body_config(mu, alpha)?;
    let (nu_plus, nu_minus) = triangular_frequencies(mu, alpha);
    let triangular = TriangularForms { nu_plus, nu_minus, nu1: 1.0, routh_bound: routh_bound(alpha) };
    let collinear = collinear_points(mu, alpha)?
        .into_iter()
        .map(|x| {
            let nu1_sq =
                config.primaries().iter().map(|p| p.mass / (x - p.position.x).abs().powf(alpha + 1.0)).sum::<f64>();
            CollinearForms { x, nu1: nu1_sq.sqrt(), nu_plus: collinear_nu_plus_squared(nu1_sq, alpha).sqrt() }
        })
        .collect();
    Ok(ThreeBodyClosedForms { triangular, collinear })
}

// ---------------------------------------------------------------------------
// report

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BifurcationReport {
    pub nu: f64,
    pub period: f64,
    pub symmetry: SymmetryClass,
    pub eta: i32,
    pub resonances: Vec<Resonance>,
}

impl From<&BifurcationPoint> for BifurcationReport {
    fn from(b: &BifurcationPoint) -> Self {
        Self { nu: b.nu, period: b.period, symmetry: b.symmetry, eta: b.eta, resonances: b.resonances.clone() }
    }
}

/// Per-equilibrium spectral report (serialized as the spectrum JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub index: usize,
    pub position: [f64; 2],
    pub kind: EquilibriumKind,
    #[serde(rename = "T")]
    pub trace: f64,
    #[serde(rename = "D")]
    pub det: f64,
    pub sigma: i32,
    pub nu1_squared: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planar_case: Option<PlanarCase>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planar_reason: Option<String>,
    pub bifurcations: Vec<BifurcationReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

pub fn equilibrium_report(index: usize, eq: &Equilibrium, mode_cutoff: usize) -> EquilibriumReport {
    let mut report = EquilibriumReport {
        index,
        position: [eq.position.x, eq.position.y],
        kind: eq.kind,
        trace: eq.trace(),
        det: eq.det(),
        sigma: eq.sigma,
        nu1_squared: eq.nu1_squared(),
        planar_case: None,
        planar_reason: None,
        bifurcations: Vec::new(),
        warnings: Vec::new(),
    };
    match bifurcation_points(eq, mode_cutoff) {
        Ok((planar, points)) => {
            report.planar_case = Some(planar.case);
            report.planar_reason = Some(planar.case.reason().to_string());
            report.bifurcations = points.iter().map(BifurcationReport::from).collect();
        }
        Err(e) => report.warnings.push(e.to_string()),
    }
    report
}
