use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("primaries {0} and {1} occupy the same position")]
    SingularConfiguration(usize, usize),

    #[error("collision with primary {primary}: distance {distance:e}")]
    Collision { primary: usize, distance: f64 },

    #[error("point is not in the plane of the primaries (z = {0:e})")]
    NonPlanar(f64),

    #[error("Newton iteration did not converge after {iterations} steps (|grad V| = {gradient_norm:e})")]
    NoConvergence { iterations: usize, gradient_norm: f64 },

    #[error("block is singular at lambda = {lambda} (det = {det:e}); perturb the frequency")]
    SingularBlock { lambda: f64, det: f64 },

    #[error("degenerate equilibrium (det = {det:e}); the potential is not Morse there")]
    Degenerate { det: f64 },

    #[error("ray root search: V_r vanishes at a bracket endpoint r = {0}")]
    BracketEndpoint(f64),

    #[error("quadrature did not converge (estimated error {estimate:e})")]
    Quadrature { estimate: f64 },

    #[error("corrector failed after {iterations} iterations (residual {residual:e})")]
    Corrector { iterations: usize, residual: f64 },

    #[error(
        "critical points near ({x:.6}, {y:.6}) are not numerically isolated \
         (a symmetric image refines {drift:e} away); the potential is too close to rotationally invariant there"
    )]
    NonIsolated { x: f64, y: f64, drift: f64 },

    #[error("invalid configuration document: {0}")]
    Document(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
