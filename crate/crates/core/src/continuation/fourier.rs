//! Truncated Fourier representation of 2pi-periodic loops in R^3.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Vector3;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SymmetryClass;

/// Isotropy subspace a loop is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LoopSymmetry {
    /// `z == 0`.
    PlanarZ2,
    /// Planar part pi-periodic, `z(t + pi) = -z(t)`.
    EightZ2tilde,
    None,
}

impl From<SymmetryClass> for LoopSymmetry {
    fn from(class: SymmetryClass) -> Self {
        match class {
            SymmetryClass::PlanarZ2 => Self::PlanarZ2,
            SymmetryClass::EightZ2tilde => Self::EightZ2tilde,
        }
    }
}

impl LoopSymmetry {
    /// Whether component `comp` of mode `l` may be nonzero.
    pub fn allows(self, l: usize, comp: usize) -> bool {
        match self {
            Self::PlanarZ2 => comp < 2,
            Self::EightZ2tilde => (comp == 2) == (l % 2 == 1),
            Self::None => true,
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

pub(crate) fn inverse_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// `x(t) = sum_{|l| <= p} x_l e^{ilt}` with `x_{-l} = conj(x_l)`; only
/// `l = 0..=p` is stored and `x_0` is real.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierLoop {
    coefficients: Vec<Vector3<Complex64>>,
    nu: f64,
    symmetry: LoopSymmetry,
}

impl FourierLoop {
    /// Builds a loop, projecting onto `symmetry` and dropping any imaginary
    /// part of the mean.
    pub fn new(coefficients: Vec<Vector3<Complex64>>, nu: f64, symmetry: LoopSymmetry) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(Error::Domain("a loop needs at least one oscillatory mode".into()));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Domain(format!("frequency must be positive, got {nu}")));
        }
        let mut out = Self { coefficients, nu, symmetry };
        out.project();
        Ok(out)
    }

    /// The constant loop at `point`.
    pub fn constant(point: Vector3<f64>, nu: f64, modes: usize, symmetry: LoopSymmetry) -> Result<Self> {
        let mut coefficients = vec![Vector3::zeros(); modes + 1];
        coefficients[0] = point.map(|v| Complex64::new(v, 0.0));
        Self::new(coefficients, nu, symmetry)
    }

    fn project(&mut self) {
        for v in self.coefficients[0].iter_mut() {
            v.im = 0.0;
        }
        let symmetry = self.symmetry;
        for (l, x) in self.coefficients.iter_mut().enumerate() {
            for c in 0..3 {
                if !symmetry.allows(l, c) {
                    x[c] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    /// Mode cutoff `p`.
    pub fn modes(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.nu
    }

    pub fn symmetry(&self) -> LoopSymmetry {
        self.symmetry
    }

    /// `x_l` for `l = 0..=p`.
    pub fn coefficients(&self) -> &[Vector3<Complex64>] {
        &self.coefficients
    }

    /// `x_l` for any `l`, zero beyond the cutoff.
    pub fn coefficient(&self, l: i64) -> Vector3<Complex64> {
        match self.coefficients.get(l.unsigned_abs() as usize) {
            Some(x) if l >= 0 => *x,
            Some(x) => x.map(|v| v.conj()),
            None => Vector3::zeros(),
        }
    }

    pub fn mean(&self) -> Vector3<f64> {
        self.coefficients[0].map(|v| v.re)
    }

    pub(crate) fn with_coefficients(&self, coefficients: Vec<Vector3<Complex64>>, nu: f64) -> Self {
        let mut out = Self { coefficients, nu, symmetry: self.symmetry };
        out.project();
        out
    }

    /// Same loop with cutoff `p`, padding with zeros or truncating.
    pub fn with_modes(&self, p: usize) -> Self {
        let mut c = self.coefficients.clone();
        c.resize(p.max(1) + 1, Vector3::zeros());
        Self { coefficients: c, ..*self }
    }

    /// `y(t) = x(k t)` at frequency `nu / k`: modes move from `l` to `k l`.
    pub fn harmonic(&self, k: usize) -> Self {
        assert!(k >= 1);
        let mut c = vec![Vector3::zeros(); k * self.modes() + 1];
        for (l, x) in self.coefficients.iter().enumerate() {
            c[k * l] = *x;
        }
        // odd relabelings keep mode parities; even ones keep only planarity
        let symmetry = match self.symmetry {
            LoopSymmetry::PlanarZ2 => LoopSymmetry::PlanarZ2,
            s if k % 2 == 1 => s,
            _ => LoopSymmetry::None,
        };
        Self { coefficients: c, nu: self.nu / k as f64, symmetry }
    }

    /// Values at `t_k = 2 pi k / n`, `n > 2p`.
    pub fn sample(&self, n: usize) -> Vec<Vector3<f64>> {
        self.synthesize(n, |_, x| x)
    }

    /// Time derivative `dx/dt` (in loop time) at the same nodes.
    pub fn sample_derivative(&self, n: usize) -> Vec<Vector3<f64>> {
        self.synthesize(n, |l, x| x * Complex64::new(0.0, l as f64))
    }

    fn synthesize(
        &self,
        n: usize,
        weight: impl Fn(usize, Vector3<Complex64>) -> Vector3<Complex64>,
    ) -> Vec<Vector3<f64>> {
        assert!(n > 2 * self.modes(), "sampling below the Nyquist rate");
        let fft = inverse_plan(n);
        let mut out = vec![Vector3::zeros(); n];
        for c in 0..3 {
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            for (l, x) in self.coefficients.iter().enumerate() {
                let v = weight(l, *x)[c];
                buf[l] += v;
                if l > 0 {
                    buf[n - l] += v.conj();
                }
            }
            fft.process(&mut buf);
            for (o, v) in out.iter_mut().zip(&buf) {
                o[c] = v.re;
            }
        }
        out
    }

    /// `sum_{l >= 1} |x_l|^2`.
    pub fn oscillatory_energy(&self) -> f64 {
        self.coefficients[1..].iter().map(|x| x.norm_squared()).sum()
    }

    /// `sum_{l > from} |x_l|^2`.
    pub fn tail_energy(&self, from: usize) -> f64 {
        self.coefficients.iter().skip(from + 1).map(|x| x.norm_squared()).sum()
    }

    /// `max_t |x(t) - anchor|` on a dense grid.
    pub fn amplitude(&self, anchor: &Vector3<f64>) -> f64 {
        self.sample(dense_samples(self.modes())).iter().map(|x| (x - anchor).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.sample(dense_samples(self.modes())).iter().map(|x| x.z.abs()).fold(0.0, f64::max)
    }

    pub fn record(&self) -> LoopRecord {
        LoopRecord {
            nu: self.nu,
            period: self.period(),
            symmetry: self.symmetry,
            modes: self.coefficients.iter().map(|x| [[x.x.re, x.x.im], [x.y.re, x.y.im], [x.z.re, x.z.im]]).collect(),
        }
    }
}

/// Grid used for diagnostics, finer than the collocation grid.
pub(crate) fn dense_samples(p: usize) -> usize {
    (16 * (p + 1)).max(1024)
}

/// Projects onto the symmetry subspace of `class` (idempotent).
pub fn apply_symmetry(lp: &FourierLoop, class: LoopSymmetry) -> FourierLoop {
    let mut out = FourierLoop { symmetry: class, ..lp.clone() };
    out.project();
    out
}

/// Serialized form: `modes[l][component] = [re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopRecord {
    pub nu: f64,
    pub period: f64,
    pub symmetry: LoopSymmetry,
    pub modes: Vec<[[f64; 2]; 3]>,
}

impl LoopRecord {
    pub fn to_loop(&self) -> Result<FourierLoop> {
        let c = self
            .modes
            .iter()
            .map(|m| {
                Vector3::new(
                    Complex64::new(m[0][0], m[0][1]),
                    Complex64::new(m[1][0], m[1][1]),
                    Complex64::new(m[2][0], m[2][1]),
                )
            })
            .collect();
        FourierLoop::new(c, self.nu, self.symmetry)
    }
}
