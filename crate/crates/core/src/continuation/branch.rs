//! Branch start at a bifurcation point and pseudo-arclength continuation.

use std::fmt::{self, Write as _};

use nalgebra::{DVector, Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fourier::{dense_samples, FourierLoop, LoopRecord, LoopSymmetry};
use super::system::{correct, residual_norm, tangent, Layout, Normalization, CORRECTOR_TOLERANCE};
use crate::configuration::PrimaryConfiguration;
use crate::equilibria::Equilibrium;
use crate::error::{Error, Result};
use crate::spectral::{bifurcation_points, block_m0, BifurcationPoint, SymmetryClass, DEFAULT_MODE_CUTOFF};

pub const DEFAULT_MODES: usize = 32;
pub const MAX_MODES: usize = 256;

#[derive(Debug, Clone)]
pub struct TraceOptions {
    pub max_steps: usize,
    /// Onset amplitude.
    pub epsilon: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Closest allowed approach to a primary.
    pub collision_radius: f64,
    /// Cap on `max_t |x(t)|`.
    pub norm_cap: f64,
    /// Cap on `2 pi / nu`.
    pub period_cap: f64,
    pub frequency_floor: f64,
    /// Initial mode cutoff.
    pub modes: usize,
    pub max_modes: usize,
    /// Raise the cutoff when the top two modes carry more than this share
    /// of the oscillatory energy.
    pub tail_ratio: f64,
    /// Equilibria a branch may end at.
    pub landmarks: Vec<Landmark>,
    /// Index of the anchor among `landmarks`, if present.
    pub anchor_index: Option<usize>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            max_steps: 2000,
            epsilon: 1e-3,
            initial_step: 1e-2,
            min_step: 1e-7,
            max_step: 5e-2,
            collision_radius: 1e-3,
            norm_cap: 50.0,
            period_cap: 1e4,
            frequency_floor: 1e-3,
            modes: DEFAULT_MODES,
            max_modes: MAX_MODES,
            tail_ratio: 1e-14,
            landmarks: Vec::new(),
            anchor_index: None,
        }
    }
}

/// An equilibrium with its bifurcation frequencies and index jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub index: usize,
    pub position: [f64; 3],
    /// `(nu, eta)` pairs.
    pub bifurcations: Vec<(f64, i32)>,
}

/// Landmarks for every non-degenerate equilibrium, indexed by position in `equilibria`.
pub fn landmarks(equilibria: &[Equilibrium]) -> Vec<Landmark> {
    equilibria
        .iter()
        .enumerate()
        .filter_map(|(index, eq)| {
            let (_, points) = bifurcation_points(eq, DEFAULT_MODE_CUTOFF).ok()?;
            let p = eq.point3();
            Some(Landmark {
                index,
                position: [p.x, p.y, p.z],
                bifurcations: points.iter().map(|b| (b.nu, b.eta)).collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason")]
pub enum Termination {
    CollisionApproach { primary: usize, distance: f64 },
    NormBlowup { norm: f64 },
    PeriodBlowup { period: f64 },
    FrequencyFloor { nu: f64 },
    ReturnToEquilibrium { equilibrium: usize, frequency: f64, eta: i32 },
    StepLimit,
    CorrectorFailure { message: String },
}

impl Termination {
    /// The branch ends without returning to a bifurcation point.
    pub fn is_non_admissible(&self) -> bool {
        matches!(
            self,
            Self::CollisionApproach { .. }
                | Self::NormBlowup { .. }
                | Self::PeriodBlowup { .. }
                | Self::FrequencyFloor { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::CollisionApproach { .. } => "CollisionApproach",
            Self::NormBlowup { .. } => "NormBlowup",
            Self::PeriodBlowup { .. } => "PeriodBlowup",
            Self::FrequencyFloor { .. } => "FrequencyFloor",
            Self::ReturnToEquilibrium { .. } => "ReturnToEquilibrium",
            Self::StepLimit => "StepLimit",
            Self::CorrectorFailure { .. } => "CorrectorFailure",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::CollisionApproach { primary, distance } => {
                write!(f, "CollisionApproach(primary {primary}, distance {distance:.3e})")
            }
            Self::NormBlowup { norm } => write!(f, "NormBlowup({norm:.3e})"),
            Self::PeriodBlowup { period } => write!(f, "PeriodBlowup({period:.3e})"),
            Self::FrequencyFloor { nu } => write!(f, "FrequencyFloor({nu:.3e})"),
            Self::ReturnToEquilibrium { equilibrium, frequency, eta } => {
                write!(f, "ReturnToEquilibrium(equilibrium {equilibrium}, nu {frequency:.6}, eta {eta})")
            }
            Self::StepLimit => write!(f, "StepLimit"),
            Self::CorrectorFailure { message } => write!(f, "CorrectorFailure({message})"),
        }
    }
}

/// Geometry of one loop along a branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopDiagnostics {
    /// `max_t |x(t) - anchor|`.
    pub amplitude: f64,
    pub min_primary_distance: f64,
    pub nearest_primary: usize,
    pub max_norm: f64,
    pub max_abs_z: f64,
}

pub fn diagnostics(config: &PrimaryConfiguration, lp: &FourierLoop, anchor: &Vector3<f64>) -> LoopDiagnostics {
    let mut d = LoopDiagnostics {
        amplitude: 0.0,
        min_primary_distance: f64::INFINITY,
        nearest_primary: 0,
        max_norm: 0.0,
        max_abs_z: 0.0,
    };
    for x in lp.sample(dense_samples(lp.modes())) {
        d.amplitude = d.amplitude.max((x - anchor).norm());
        d.max_norm = d.max_norm.max(x.norm());
        d.max_abs_z = d.max_abs_z.max(x.z.abs());
        for (j, p) in config.primaries().iter().enumerate() {
            let dist = Vector3::new(x.x - p.position.x, x.y - p.position.y, x.z).norm();
            if dist < d.min_primary_distance {
                d.min_primary_distance = dist;
                d.nearest_primary = j;
            }
        }
    }
    d
}

#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub lp: FourierLoop,
    pub arclength: f64,
    pub residual: f64,
    pub corrector_iterations: usize,
    pub diagnostics: LoopDiagnostics,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub origin: BifurcationPoint,
    pub anchor: Equilibrium,
    pub points: Vec<BranchPoint>,
    pub termination: Termination,
}

impl Branch {
    /// Sum of index jumps at both ends, for branches that return to an equilibrium.
    pub fn eta_sum(&self) -> Option<i32> {
        match self.termination {
            Termination::ReturnToEquilibrium { eta, .. } => Some(self.origin.eta + eta),
            _ => None,
        }
    }

    /// One row per accepted loop; the termination is written on the last row.
    pub fn csv(&self) -> String {
        let mut s = String::from("arclength,nu,period,amplitude,min_primary_distance,max_abs_z,termination\n");
        let last = self.points.len().saturating_sub(1);
        for (i, p) in self.points.iter().enumerate() {
            let d = &p.diagnostics;
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                p.arclength,
                p.lp.nu(),
                p.lp.period(),
                d.amplitude,
                d.min_primary_distance,
                d.max_abs_z,
                if i == last { self.termination.name() } else { "" }
            );
        }
        if self.points.is_empty() {
            let _ = writeln!(s, ",,,,,,{}", self.termination.name());
        }
        s
    }

    /// Loop records at every `stride`-th point plus the last one.
    pub fn loop_records(&self, stride: usize) -> Vec<(usize, LoopRecord)> {
        let stride = stride.max(1);
        let last = self.points.len().saturating_sub(1);
        self.points
            .iter()
            .enumerate()
            .filter(|(i, _)| i % stride == 0 || *i == last)
            .map(|(i, p)| (i, p.lp.record()))
            .collect()
    }

    pub fn summary(&self) -> BranchSummary {
        BranchSummary {
            origin_nu: self.origin.nu,
            symmetry: self.origin.symmetry,
            eta: self.origin.eta,
            anchor: [self.anchor.position.x, self.anchor.position.y],
            steps: self.points.len(),
            termination: self.termination.clone(),
            eta_sum: self.eta_sum(),
            final_nu: self.points.last().map(|p| p.lp.nu()),
            final_amplitude: self.points.last().map(|p| p.diagnostics.amplitude),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchSummary {
    pub origin_nu: f64,
    pub symmetry: SymmetryClass,
    pub eta: i32,
    pub anchor: [f64; 2],
    pub steps: usize,
    pub termination: Termination,
    pub eta_sum: Option<i32>,
    pub final_nu: Option<f64>,
    pub final_amplitude: Option<f64>,
}

/// Whether every planar symmetry fixing `eq` fixes only the origin; then
/// the vertical line through `eq` is invariant and eight loops have no
/// planar motion.
pub fn vertical_axis_invariant(config: &PrimaryConfiguration, eq: &Equilibrium) -> bool {
    config.symmetries().iter().any(|g| {
        (g * eq.position - eq.position).norm() < 1e-9 && (g - nalgebra::Matrix2::identity()).determinant().abs() > 1e-9
    })
}

/// Unit kernel vector of the singular block at mode one.
pub fn onset_kernel(eq: &Equilibrium, bif: &BifurcationPoint) -> Vector3<Complex64> {
    match bif.symmetry {
        SymmetryClass::EightZ2tilde => {
            Vector3::new(Complex64::default(), Complex64::default(), Complex64::new(1.0, 0.0))
        }
        SymmetryClass::PlanarZ2 => {
            let m = block_m0(eq, bif.nu);
            let r0 = Vector2::new(-m[(0, 1)], m[(0, 0)]);
            let r1 = Vector2::new(m[(1, 1)], -m[(1, 0)]);
            let v = if r0.norm() >= r1.norm() { r0 } else { r1 };
            let v = v / Complex64::new(v.norm(), 0.0);
            Vector3::new(v.x, v.y, Complex64::default())
        }
    }
}

/// A corrected onset loop and the state needed to continue from it.
#[derive(Debug, Clone)]
pub struct BranchStart {
    pub lp: FourierLoop,
    pub beta: f64,
    pub iterations: usize,
    pub residual: f64,
    pub kernel: Vector3<Complex64>,
    pub(crate) layout: Layout,
    pub(crate) anchor: Vector3<f64>,
}

/// Onset loop `x_eq + epsilon Re(v e^{it})` corrected with the phase
/// condition and `Re <x_1, v> = epsilon / 2`.
pub fn branch_start(
    config: &PrimaryConfiguration,
    eq: &Equilibrium,
    bif: &BifurcationPoint,
    epsilon: f64,
) -> Result<FourierLoop> {
    start_branch(config, eq, bif, epsilon, DEFAULT_MODES).map(|s| s.lp)
}

pub fn start_branch(
    config: &PrimaryConfiguration,
    eq: &Equilibrium,
    bif: &BifurcationPoint,
    epsilon: f64,
    modes: usize,
) -> Result<BranchStart> {
    if !(1e-6..=1e-2).contains(&epsilon) {
        return Err(Error::Domain(format!("onset amplitude must lie in [1e-6, 1e-2], got {epsilon}")));
    }
    let symmetry = LoopSymmetry::from(bif.symmetry);
    let pinned = bif.symmetry == SymmetryClass::EightZ2tilde && vertical_axis_invariant(config, eq);
    // the only point fixed by a nontrivial linear map is the origin
    let anchor = if pinned { Vector3::zeros() } else { eq.point3() };
    let kernel = onset_kernel(eq, bif);
    let mut predictor = FourierLoop::constant(anchor, bif.nu, modes, symmetry)?.coefficients().to_vec();
    predictor[1] = kernel * Complex64::new(0.5 * epsilon, 0.0);
    let predictor = FourierLoop::new(predictor, bif.nu, symmetry)?;
    let layout = Layout::new(modes, symmetry, pinned);
    let weights = layout.functional(|l| if l == 1 { kernel } else { Vector3::zeros() });
    let normalization = Normalization { weights, target: 0.5 * epsilon };
    let c = correct(config, &layout, &predictor, &predictor, &normalization, 1)?;
    Ok(BranchStart { lp: c.lp, beta: c.beta, iterations: c.iterations, residual: c.residual, kernel, layout, anchor })
}

fn start_with_fallback(
    config: &PrimaryConfiguration,
    eq: &Equilibrium,
    bif: &BifurcationPoint,
    options: &TraceOptions,
) -> std::result::Result<BranchStart, String> {
    let mut epsilon = options.epsilon;
    loop {
        match start_branch(config, eq, bif, epsilon, options.modes) {
            Ok(s) => return Ok(s),
            Err(e) if epsilon / 10.0 < 1e-6 => return Err(format!("onset at epsilon {epsilon:e}: {e}")),
            Err(_) => epsilon /= 10.0,
        }
    }
}

fn pad(v: &DVector<f64>, old_dofs: usize, new_dofs: usize) -> DVector<f64> {
    let mut out = DVector::zeros(new_dofs + 1);
    let kept = old_dofs.min(new_dofs);
    out.rows_mut(0, kept).copy_from(&v.rows(0, kept));
    out[new_dofs] = v[old_dofs];
    out
}

/// Continues the branch born at `bif` until one of the termination
/// conditions in `options` fires.
pub fn trace_branch(
    config: &PrimaryConfiguration,
    eq: &Equilibrium,
    bif: &BifurcationPoint,
    options: &TraceOptions,
) -> Result<Branch> {
    let mut branch =
        Branch { origin: bif.clone(), anchor: *eq, points: Vec::new(), termination: Termination::StepLimit };
    let start = match start_with_fallback(config, eq, bif, options) {
        Ok(s) => s,
        Err(message) => {
            branch.termination = Termination::CorrectorFailure { message };
            return Ok(branch);
        }
    };
    let anchor = start.anchor;
    let epsilon_used = 2.0 * start.lp.coefficient(1).norm();
    let mut layout = start.layout.clone();
    let mut current = start.lp.clone();
    let mut beta = start.beta;
    let mut u = layout.pack(&current);
    branch.points.push(BranchPoint {
        lp: current.clone(),
        arclength: 0.0,
        residual: start.residual,
        corrector_iterations: start.iterations,
        diagnostics: diagnostics(config, &current, &anchor),
    });

    let outward = layout.functional(|l| if l == 1 { start.kernel } else { Vector3::zeros() });
    let mut t = tangent(config, &layout, &current, beta, &outward)?;
    let mut ds = options.initial_step;
    let mut arclength = 0.0;
    let mut left_anchor = false;

    for _ in 0..options.max_steps {
        let predicted = &u + &t * ds;
        let predictor = layout.unpack(&current, &predicted);
        let normalization = Normalization { weights: t.clone(), target: t.dot(&u) + ds };
        let outcome = predictor.and_then(|p| correct(config, &layout, &p, &current, &normalization, 0));
        let corrected = match outcome {
            Ok(c) => c,
            Err(e) => {
                ds *= 0.5;
                if ds < options.min_step {
                    branch.termination = match e {
                        Error::Collision { primary, distance } => Termination::CollisionApproach { primary, distance },
                        other => Termination::CorrectorFailure { message: other.to_string() },
                    };
                    return Ok(branch);
                }
                continue;
            }
        };
        arclength += ds;
        if corrected.iterations <= 3 {
            ds = (ds * 1.3).min(options.max_step);
        }
        current = corrected.lp;
        beta = corrected.beta;
        u = layout.pack(&current);
        let diag = diagnostics(config, &current, &anchor);
        branch.points.push(BranchPoint {
            lp: current.clone(),
            arclength,
            residual: corrected.residual,
            corrector_iterations: corrected.iterations,
            diagnostics: diag,
        });

        if let Some(term) = check_termination(&current, &diag, options, epsilon_used, &mut left_anchor) {
            branch.termination = term;
            return Ok(branch);
        }

        if let Some(new_layout) = resize_modes(&current, &layout, options) {
            let old = layout.len();
            current = current.with_modes(new_layout.modes());
            t = pad(&t, old, new_layout.len());
            layout = new_layout;
            u = layout.pack(&current);
        }
        match tangent(config, &layout, &current, beta, &t) {
            Ok(next) => t = next,
            Err(e) => {
                branch.termination = Termination::CorrectorFailure { message: format!("tangent: {e}") };
                return Ok(branch);
            }
        }
    }
    branch.termination = Termination::StepLimit;
    Ok(branch)
}

/// Grows the cutoff by half when the top modes carry energy, and shrinks it
/// by a third (never below `options.modes`) once the dropped modes are four
/// orders below the growth threshold.
fn resize_modes(lp: &FourierLoop, layout: &Layout, options: &TraceOptions) -> Option<Layout> {
    let p = layout.modes();
    let budget = options.tail_ratio * lp.oscillatory_energy();
    let next = if p < options.max_modes && lp.tail_energy(p.saturating_sub(2)) > budget {
        (p + p / 2).min(options.max_modes)
    } else {
        let q = options.modes.max(2 * p / 3);
        if q < p && lp.tail_energy(q) <= 1e-4 * budget {
            q
        } else {
            return None;
        }
    };
    Some(Layout::new(next, layout.symmetry(), layout.pinned_planar()))
}

fn check_termination(
    lp: &FourierLoop,
    diag: &LoopDiagnostics,
    options: &TraceOptions,
    epsilon: f64,
    left_anchor: &mut bool,
) -> Option<Termination> {
    if diag.min_primary_distance < options.collision_radius {
        return Some(Termination::CollisionApproach {
            primary: diag.nearest_primary,
            distance: diag.min_primary_distance,
        });
    }
    if diag.max_norm > options.norm_cap {
        return Some(Termination::NormBlowup { norm: diag.max_norm });
    }
    if lp.period() > options.period_cap {
        return Some(Termination::PeriodBlowup { period: lp.period() });
    }
    if lp.nu() < options.frequency_floor {
        return Some(Termination::FrequencyFloor { nu: lp.nu() });
    }
    if diag.amplitude > 10.0 * epsilon {
        *left_anchor = true;
    }
    if !*left_anchor {
        return None;
    }
    for mark in &options.landmarks {
        let position = Vector3::from(mark.position);
        if lp.amplitude(&position) >= 2.0 * epsilon {
            continue;
        }
        if let Some(&(nu, eta)) = mark.bifurcations.iter().find(|(nu, _)| (nu - lp.nu()).abs() < 1e-3) {
            return Some(Termination::ReturnToEquilibrium { equilibrium: mark.index, frequency: nu, eta });
        }
    }
    None
}

/// Residual of a stored loop recomputed from scratch.
pub fn verify_loop(config: &PrimaryConfiguration, lp: &FourierLoop) -> Result<f64> {
    Ok(residual_norm(&super::system::loop_residual(config, lp)?))
}

/// Whether the stored loop meets the corrector tolerance.
pub fn is_converged(config: &PrimaryConfiguration, lp: &FourierLoop) -> bool {
    verify_loop(config, lp).map(|r| r < CORRECTOR_TOLERANCE * 10.0).unwrap_or(false)
}
