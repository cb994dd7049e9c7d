//! Numerical tolerances shared by validators, solvers and tests.

/// Allowed deviation of any row or column sum of a consensus matrix from 1.
pub const STOCHASTIC_SUM: f64 = 1e-10;

/// Largest `|w_ij - w_ji|` accepted when loading a matrix. Accepted pairs are
/// stored exactly symmetric.
pub const SYMMETRY: f64 = 1e-12;

/// The leading eigenvalue must equal 1 within this tolerance.
pub const UNIT_EIGENVALUE: f64 = 1e-8;

/// Jacobi sweeps stop once the off-diagonal Frobenius norm drops below this.
pub const JACOBI_OFF_DIAGONAL: f64 = 1e-12;

/// Maximum number of cyclic Jacobi sweeps.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Maximum eigenpair residual `‖W v − λ v‖` reported as converged.
pub const EIGEN_RESIDUAL: f64 = 1e-10;

/// Spectral radius below which `β` is reported as the degenerate
/// complete-graph case.
pub const DEGENERATE_BETA: f64 = 1e-12;

/// Relative tolerance of the algebraic identities probed during a run.
pub const PROBE_IDENTITY: f64 = 1e-9;

/// Power iteration stopping tolerance on the Rayleigh quotient.
pub const POWER_ITERATION: f64 = 1e-12;

/// Power iteration cap.
pub const POWER_ITERATION_MAX: usize = 10_000;

/// A run is declared diverged once the optimality gap exceeds this multiple
/// of its initial value.
pub const DIVERGENCE_FACTOR: f64 = 1e6;
