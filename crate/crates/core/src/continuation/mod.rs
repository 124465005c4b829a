//! Symmetric periodic orbits near equilibria: Fourier loops, the mode-wise
//! residual, and pseudo-arclength continuation of bifurcating branches.

mod branch;
mod fourier;
mod system;

pub use branch::{
    branch_start, diagnostics, is_converged, landmarks, onset_kernel, start_branch, trace_branch, verify_loop,
    vertical_axis_invariant, Branch, BranchPoint, BranchStart, BranchSummary, Landmark, LoopDiagnostics, Termination,
    TraceOptions, DEFAULT_MODES, MAX_MODES,
};
pub use fourier::{apply_symmetry, FourierLoop, LoopRecord, LoopSymmetry};
pub use system::{
    collocation_samples, corrector, energy_pairing, loop_residual, loop_residual_with_samples, pack_unknowns,
    residual_norm, unknown_count, Corrected, Normalization, CORRECTOR_TOLERANCE, MAX_CORRECTOR_ITERATIONS,
};

#[cfg(test)]
mod tests;
