//! Differential-coded compressed decentralized gradient descent (DC-DGD).
//!
//! Nodes of an undirected network each hold a local objective `f_i` and
//! cooperate to minimize `f = Σ f_i`. Instead of exchanging iterates, every
//! node broadcasts a stochastically compressed *differential* between
//! successive iterates. Because the differential equals the negative gradient
//! of a Lyapunov function, compression noise shrinks as the run converges.
//!
//! Modules:
//!
//! - [`consensus`]: consensus matrices, their spectra, and the SNR / step-size
//!   thresholds they induce.
//! - [`compress`]: unbiased SNR-constrained compressors (identity, sparsifier,
//!   ternary, hybrid) and the hybrid group planner.
//! - [`codec`]: the bit-exact wire format and both cost accountings.
//! - [`objectives`]: local objectives, datasets and smoothness estimates.
//! - [`engine`]: the synchronous network simulator, diagnostics and trials.

pub mod codec;
pub mod compress;
pub mod consensus;
pub mod engine;
pub mod objectives;
pub mod rng;
pub mod tolerance;

pub use codec::{Bitstream, CostModel, DecodeError, EncodeError, ValueWidth};
pub use compress::{CompressError, CompressedMessage, Compressor, CompressorSpec, CompressorStats, HybridPlan, Scheme};
pub use consensus::{ConsensusMatrix, GraphError, MatrixError, SpectralReport, TheoryThresholds, Topology};
pub use engine::{CostAccounting, Engine, EngineError, IterationMetrics, RunConfig, RunResult, StepSchedule};
pub use objectives::{GlobalObjective, LocalObjective, ObjectiveError};
