//! Mode-wise residual of the periodic problem, its Jacobian on a symmetry
//! subspace, and the Newton corrector.
//!
//! In loop time `t = nu * tau` the equation `x'' + 2 J x' = grad V` becomes,
//! per mode, `F_l = l^2 nu^2 x_l - 2 i l nu J x_l + g_l = 0` with `g_l` the
//! Fourier coefficients of `grad V(x(t))`. Because `<F(x), x'> = 0`
//! identically, the corrector solves `F + beta x' = 0` with an extra unknown
//! `beta`, which vanishes at solutions.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use num_complex::Complex64;

use super::fourier::{forward_plan, FourierLoop, LoopSymmetry};
use crate::configuration::PrimaryConfiguration;
use crate::error::{Error, Result};
use crate::potential::gradient_and_hessian;

/// Residual norm a corrected loop must reach.
pub const CORRECTOR_TOLERANCE: f64 = 1e-10;
pub const MAX_CORRECTOR_ITERATIONS: usize = 25;

/// Collocation grid size for cutoff `p`: `4p + 4`, twice the Nyquist rate.
pub fn collocation_samples(p: usize) -> usize {
    4 * p + 4
}

fn j_bar(v: &Vector3<Complex64>) -> Vector3<Complex64> {
    Vector3::new(-v.y, v.x, Complex64::new(0.0, 0.0))
}

/// `J` applied to basis vector `d`, component `c`.
fn j_entry(c: usize, d: usize) -> f64 {
    match (c, d) {
        (0, 1) => -1.0,
        (1, 0) => 1.0,
        _ => 0.0,
    }
}

struct Sampled {
    /// `g_l`, `l = 0..=p`.
    gradient_modes: Vec<Vector3<Complex64>>,
    /// Discrete Fourier coefficients of the Hessian, indexed by `q mod n`.
    hessian_modes: Option<Vec<Matrix3<Complex64>>>,
}

fn forward_transform(values: impl Iterator<Item = f64>, n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.map(|v| Complex64::new(v, 0.0)).collect();
    forward_plan(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

fn sample_field(config: &PrimaryConfiguration, lp: &FourierLoop, n: usize, with_hessian: bool) -> Result<Sampled> {
    let points = lp.sample(n);
    let mut grads = Vec::with_capacity(n);
    let mut hessians = Vec::with_capacity(n);
    for x in &points {
        let (g, h) = gradient_and_hessian(config, x)?;
        grads.push(g);
        hessians.push(h);
    }
    let p = lp.modes();
    let by_comp: Vec<Vec<Complex64>> = (0..3).map(|c| forward_transform(grads.iter().map(|g| g[c]), n)).collect();
    let gradient_modes = (0..=p).map(|l| Vector3::new(by_comp[0][l], by_comp[1][l], by_comp[2][l])).collect();
    let hessian_modes = with_hessian.then(|| {
        let mut out = vec![Matrix3::zeros(); n];
        for c in 0..3 {
            for d in c..3 {
                let modes = forward_transform(hessians.iter().map(|h| h[(c, d)]), n);
                for (q, v) in modes.into_iter().enumerate() {
                    out[q][(c, d)] = v;
                    out[q][(d, c)] = v;
                }
            }
        }
        out
    });
    Ok(Sampled { gradient_modes, hessian_modes })
}

fn assemble(lp: &FourierLoop, g: &[Vector3<Complex64>]) -> Vec<Vector3<Complex64>> {
    let nu = lp.nu();
    lp.coefficients()
        .iter()
        .zip(g)
        .enumerate()
        .map(|(l, (x, gl))| {
            let lf = l as f64;
            x * Complex64::new(lf * lf * nu * nu, 0.0) - j_bar(x) * Complex64::new(0.0, 2.0 * lf * nu) + gl
        })
        .collect()
}

/// `F_l` for `l = 0..=p` on the default grid (`F_{-l} = conj F_l`).
pub fn loop_residual(config: &PrimaryConfiguration, lp: &FourierLoop) -> Result<Vec<Vector3<Complex64>>> {
    loop_residual_with_samples(config, lp, collocation_samples(lp.modes()))
}

pub fn loop_residual_with_samples(
    config: &PrimaryConfiguration,
    lp: &FourierLoop,
    n: usize,
) -> Result<Vec<Vector3<Complex64>>> {
    if n <= 2 * lp.modes() {
        return Err(Error::Domain(format!("{n} samples cannot resolve {} modes", lp.modes())));
    }
    let s = sample_field(config, lp, n, false)?;
    Ok(assemble(lp, &s.gradient_modes))
}

/// RMS over one period: `sqrt(|F_0|^2 + 2 sum_{l>=1} |F_l|^2)`.
pub fn residual_norm(modes: &[Vector3<Complex64>]) -> f64 {
    let tail: f64 = modes.iter().skip(1).map(|f| f.norm_squared()).sum();
    (modes[0].norm_squared() + 2.0 * tail).sqrt()
}

/// Period average of `<F(x(t)), x'(t)>`.
pub fn energy_pairing(modes: &[Vector3<Complex64>], lp: &FourierLoop) -> f64 {
    modes
        .iter()
        .zip(lp.coefficients())
        .enumerate()
        .skip(1)
        .map(|(l, (f, x))| {
            let dx = x * Complex64::new(0.0, l as f64);
            2.0 * f.iter().zip(dx.iter()).map(|(a, b)| (a * b.conj()).re).sum::<f64>()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Dof {
    l: usize,
    comp: usize,
    imag: bool,
}

/// Real residual, residual modes and the optional Jacobian.
type Linearization = (DVector<f64>, Vec<Vector3<Complex64>>, Option<DMatrix<f64>>);

/// Real unknowns of a loop restricted to a symmetry subspace. Dofs are
/// ordered by mode, so a layout is a prefix of any layout with larger `p`.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    dofs: Vec<Dof>,
    modes: usize,
    symmetry: LoopSymmetry,
    pinned_planar: bool,
}

impl Layout {
    /// `pinned_planar` freezes all planar content at the loop's mean.
    pub(crate) fn new(modes: usize, symmetry: LoopSymmetry, pinned_planar: bool) -> Self {
        let mut dofs = Vec::new();
        for l in 0..=modes {
            for comp in 0..3 {
                if !symmetry.allows(l, comp) || (pinned_planar && comp < 2) {
                    continue;
                }
                dofs.push(Dof { l, comp, imag: false });
                if l > 0 {
                    dofs.push(Dof { l, comp, imag: true });
                }
            }
        }
        Self { dofs, modes, symmetry, pinned_planar }
    }

    pub(crate) fn len(&self) -> usize {
        self.dofs.len()
    }

    pub(crate) fn modes(&self) -> usize {
        self.modes
    }

    pub(crate) fn symmetry(&self) -> LoopSymmetry {
        self.symmetry
    }

    pub(crate) fn pinned_planar(&self) -> bool {
        self.pinned_planar
    }

    /// Dof values followed by `nu`.
    pub(crate) fn pack(&self, lp: &FourierLoop) -> DVector<f64> {
        let mut u = DVector::zeros(self.len() + 1);
        for (i, d) in self.dofs.iter().enumerate() {
            let v = lp.coefficient(d.l as i64)[d.comp];
            u[i] = if d.imag { v.im } else { v.re };
        }
        u[self.len()] = lp.nu();
        u
    }

    /// Overwrites the dofs of `template` (whose cutoff must match).
    pub(crate) fn unpack(&self, template: &FourierLoop, u: &DVector<f64>) -> Result<FourierLoop> {
        let nu = u[self.len()];
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Corrector { iterations: 0, residual: f64::NAN });
        }
        let mut c = template.with_modes(self.modes).coefficients().to_vec();
        for (i, d) in self.dofs.iter().enumerate() {
            let slot = &mut c[d.l][d.comp];
            if d.imag {
                slot.im = u[i];
            } else {
                slot.re = u[i];
            }
        }
        Ok(template.with_coefficients(c, nu))
    }

    /// Coefficients of a real-linear functional `Re sum_l <x_l, w_l>` on the dofs.
    pub(crate) fn functional(&self, weights: impl Fn(usize) -> Vector3<Complex64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.len() + 1);
        for (i, d) in self.dofs.iter().enumerate() {
            let w = weights(d.l)[d.comp];
            out[i] = if d.imag { w.im } else { w.re };
        }
        out
    }

    /// Phase functional `sum_l l (b_l . c_l - a_l . d_l)`, the period average
    /// of `<x, x_ref'>` for `x_ref = c + i d`, normalized to unit length.
    pub(crate) fn phase_row(&self, reference: &FourierLoop) -> Result<DVector<f64>> {
        let mut row = self.functional(|l| {
            let r = reference.coefficient(l as i64);
            // Re(x conj(i l r)) = l (b.c - a.d) for x = a + i b
            r * Complex64::new(0.0, l as f64)
        });
        row[self.len()] = 0.0;
        let norm = row.norm();
        if norm == 0.0 {
            return Err(Error::Domain("phase reference has no oscillatory content".into()));
        }
        Ok(row / norm)
    }

    /// Stacked real residual of `F + beta x'` and, optionally, its Jacobian
    /// with respect to `(dofs, nu, beta)`.
    pub(crate) fn linearize(
        &self,
        config: &PrimaryConfiguration,
        lp: &FourierLoop,
        beta: f64,
        with_jacobian: bool,
    ) -> Result<Linearization> {
        let n = collocation_samples(self.modes);
        let sampled = sample_field(config, lp, n, with_jacobian)?;
        let modes = assemble(lp, &sampled.gradient_modes);
        let u = self.len();
        let nu = lp.nu();
        let x = lp.coefficients();
        let mut r = DVector::zeros(u);
        for (i, d) in self.dofs.iter().enumerate() {
            let lf = d.l as f64;
            let f = modes[d.l][d.comp];
            let unfold = x[d.l][d.comp] * Complex64::new(0.0, lf) * beta;
            r[i] = if d.imag { f.im + unfold.im } else { f.re + unfold.re };
        }
        let Some(h) = sampled.hessian_modes else {
            return Ok((r, modes, None));
        };
        let hq = |q: i64| h[q.rem_euclid(n as i64) as usize];
        let mut jac = DMatrix::zeros(u, u + 2);
        for (col, s) in self.dofs.iter().enumerate() {
            let (m, dcomp) = (s.l as i64, s.comp);
            for (row, e) in self.dofs.iter().enumerate() {
                let l = e.l as i64;
                let coeff = if m == 0 {
                    hq(l)[(e.comp, dcomp)]
                } else if !s.imag {
                    hq(l - m)[(e.comp, dcomp)] + hq(l + m)[(e.comp, dcomp)]
                } else {
                    (hq(l - m)[(e.comp, dcomp)] - hq(l + m)[(e.comp, dcomp)]) * Complex64::new(0.0, 1.0)
                };
                let mut v = if e.imag { coeff.im } else { coeff.re };
                if l == m && l > 0 {
                    let lf = l as f64;
                    let diag = if e.comp == dcomp { lf * lf * nu * nu } else { 0.0 };
                    let cor = 2.0 * lf * nu * j_entry(e.comp, dcomp);
                    v += match (e.imag, s.imag) {
                        (false, false) => diag,
                        (false, true) => cor,
                        (true, false) => -cor,
                        (true, true) => diag,
                    };
                    if e.comp == dcomp {
                        v += match (e.imag, s.imag) {
                            (false, true) => -lf * beta,
                            (true, false) => lf * beta,
                            _ => 0.0,
                        };
                    }
                }
                jac[(row, col)] = v;
            }
        }
        for (row, e) in self.dofs.iter().enumerate() {
            let lf = e.l as f64;
            let xl = x[e.l];
            let dnu = xl * Complex64::new(2.0 * lf * lf * nu, 0.0) - j_bar(&xl) * Complex64::new(0.0, 2.0 * lf);
            let dbeta = xl[e.comp] * Complex64::new(0.0, lf);
            let c = e.comp;
            jac[(row, u)] = if e.imag { dnu[c].im } else { dnu[c].re };
            jac[(row, u + 1)] = if e.imag { dbeta.im } else { dbeta.re };
        }
        Ok((r, modes, Some(jac)))
    }
}

/// Linear normalization `weights . (dofs, nu) = target`.
#[derive(Debug, Clone)]
pub struct Normalization {
    pub weights: DVector<f64>,
    pub target: f64,
}

#[derive(Debug, Clone)]
pub struct Corrected {
    pub lp: FourierLoop,
    pub beta: f64,
    pub iterations: usize,
    /// `residual_norm` of `F` alone.
    pub residual: f64,
}

/// Newton solve on `layout`'s subspace of `F + beta x' = 0`, the phase
/// condition against `reference` and the normalization, taking at least
/// `min_iterations` Newton steps.
pub(crate) fn correct(
    config: &PrimaryConfiguration,
    layout: &Layout,
    predictor: &FourierLoop,
    reference: &FourierLoop,
    normalization: &Normalization,
    min_iterations: usize,
) -> Result<Corrected> {
    let u_len = layout.len();
    let phase = layout.phase_row(reference)?;
    let mut u = layout.pack(predictor);
    let mut beta = 0.0;
    let mut last_residual = f64::INFINITY;
    for iterations in 0..=MAX_CORRECTOR_ITERATIONS {
        let lp = layout.unpack(predictor, &u)?;
        let (r, modes, jac) = layout.linearize(config, &lp, beta, true)?;
        let residual = residual_norm(&modes);
        let phase_err = phase.dot(&u);
        let norm_err = normalization.weights.dot(&u) - normalization.target;
        last_residual = residual;
        if !residual.is_finite() {
            break;
        }
        let augmented = (r.norm_squared() + phase_err * phase_err + norm_err * norm_err).sqrt();
        if iterations >= min_iterations && residual < CORRECTOR_TOLERANCE && augmented < CORRECTOR_TOLERANCE {
            return Ok(Corrected { lp, beta, iterations, residual });
        }
        if iterations == MAX_CORRECTOR_ITERATIONS {
            break;
        }
        let jac = jac.expect("jacobian requested");
        let mut a = DMatrix::zeros(u_len + 2, u_len + 2);
        a.view_mut((0, 0), (u_len, u_len + 2)).copy_from(&jac);
        for k in 0..=u_len {
            a[(u_len, k)] = phase[k];
            a[(u_len + 1, k)] = normalization.weights[k];
        }
        let mut rhs = DVector::zeros(u_len + 2);
        rhs.rows_mut(0, u_len).copy_from(&(-&r));
        rhs[u_len] = -phase_err;
        rhs[u_len + 1] = -norm_err;
        let Some(delta) = a.lu().solve(&rhs) else {
            return Err(Error::Corrector { iterations, residual });
        };
        u += delta.rows(0, u_len + 1);
        beta += delta[u_len + 1];
    }
    Err(Error::Corrector { iterations: MAX_CORRECTOR_ITERATIONS, residual: last_residual })
}

/// Unit tangent of the solution curve at a corrected loop, in `(dofs, nu)`,
/// with positive projection on `orientation`.
pub(crate) fn tangent(
    config: &PrimaryConfiguration,
    layout: &Layout,
    lp: &FourierLoop,
    beta: f64,
    orientation: &DVector<f64>,
) -> Result<DVector<f64>> {
    let u_len = layout.len();
    let (_, _, jac) = layout.linearize(config, lp, beta, true)?;
    let jac = jac.expect("jacobian requested");
    let phase = layout.phase_row(lp)?;
    let mut a = DMatrix::zeros(u_len + 2, u_len + 2);
    a.view_mut((0, 0), (u_len, u_len + 2)).copy_from(&jac);
    for k in 0..=u_len {
        a[(u_len, k)] = phase[k];
        a[(u_len + 1, k)] = orientation[k];
    }
    let mut rhs = DVector::zeros(u_len + 2);
    rhs[u_len + 1] = 1.0;
    let t = a.lu().solve(&rhs).ok_or(Error::Corrector { iterations: 0, residual: f64::NAN })?;
    let t = t.rows(0, u_len + 1).into_owned();
    Ok(&t / t.norm())
}

/// Public corrector: Newton on the loop's own symmetry subspace.
pub fn corrector(
    config: &PrimaryConfiguration,
    predictor: &FourierLoop,
    reference: &FourierLoop,
    normalization: &Normalization,
) -> Result<Corrected> {
    let layout = Layout::new(predictor.modes(), predictor.symmetry(), false);
    correct(config, &layout, predictor, reference, normalization, 0)
}

/// Dof count of `lp`'s subspace plus one for `nu` (length of normalization weights).
pub fn unknown_count(lp: &FourierLoop) -> usize {
    Layout::new(lp.modes(), lp.symmetry(), false).len() + 1
}

/// Packs `lp` in the corrector's unknown order.
pub fn pack_unknowns(lp: &FourierLoop) -> DVector<f64> {
    Layout::new(lp.modes(), lp.symmetry(), false).pack(lp)
}
