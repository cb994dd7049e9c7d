//! The synchronous DC-DGD simulator.
//!
//! Each node `i` keeps four vectors: its local copy `x_i`, the aggregate
//! `y_i` of compressed differentials received so far, the pre-differential
//! iterate `z_i`, and the differential `d_i = z_i − x_i` it will send next.
//! One [`Engine::step`] is a synchronous round: every node compresses its
//! differential once, uses that single realization for its own copy and
//! sends the same realization to every neighbor.

mod theory;
mod trials;

use thiserror::Error;

use crate::codec::{CostModel, ValueWidth};
use crate::compress::{CompressError, CompressedMessage, Compressor, CompressorSpec};
use crate::consensus::{self, ConsensusMatrix, MatrixError};
use crate::objectives::{GlobalObjective, ObjectiveError};
use crate::rng;
use crate::tolerance;

pub use theory::{theorem2_bound, theory_report, TheoryInputs, TheoryReport};
pub use trials::{run, run_trial, RunResult, Stat, SummaryPoint, TrialSeries};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("matrix has {matrix} nodes but the objective has {objective} local terms")]
    NodeMismatch { matrix: usize, objective: usize },
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(
        "compressor {spec} violates the convergence condition η > (1 − λ_N)/(1 + λ_N): \
         {eta} ≤ (1 − {lambda_n:.4})/(1 + {lambda_n:.4}) = {eta_min:.4} (set the override flag to run anyway)"
    )]
    SnrInfeasible { spec: CompressorSpec, eta: f64, lambda_n: f64, eta_min: f64 },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Compress(#[from] CompressError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Step-size rule `α_t`, `t ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `α_t = (c2 / t)^{1/3}`, optionally capped.
    Sublinear {
        c2: f64,
        cap: Option<f64>,
    },
}

impl StepSchedule {
    pub fn alpha(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::Constant(a) => a,
            StepSchedule::Sublinear { c2, cap } => {
                let a = (c2 / t.max(1) as f64).cbrt();
                cap.map_or(a, |c| a.min(c))
            }
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let ok = match *self {
            StepSchedule::Constant(a) => a > 0.0 && a.is_finite(),
            StepSchedule::Sublinear { c2, cap } => {
                c2 > 0.0 && c2.is_finite() && cap.is_none_or(|c| c > 0.0 && c.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(EngineError::Config(format!("step sizes must be positive and finite: {self:?}")))
        }
    }
}

/// How transmitted bits are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostAccounting {
    /// A message is counted once per incident link.
    #[default]
    PerLink,
    /// A message is counted once per sending node.
    BroadcastOnce,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub matrix: ConsensusMatrix,
    pub objective: GlobalObjective,
    pub compressor: CompressorSpec,
    pub schedule: StepSchedule,
    pub iterations: usize,
    pub master_seed: u64,
    pub trials: usize,
    pub cost_model: CostModel,
    pub accounting: CostAccounting,
    /// Run even when the compressor's SNR floor is not above `eta_min`.
    pub allow_infeasible: bool,
}

impl RunConfig {
    /// Constant step, one trial, per-link accounting, and a cost model that
    /// carries values at full `f64` precision while still charging 32 bits.
    pub fn new(matrix: ConsensusMatrix, objective: GlobalObjective, compressor: CompressorSpec, alpha: f64) -> Self {
        Self {
            matrix,
            objective,
            compressor,
            schedule: StepSchedule::Constant(alpha),
            iterations: 100,
            master_seed: 0,
            trials: 1,
            cost_model: CostModel::default().with_wire(ValueWidth::F64),
            accounting: CostAccounting::PerLink,
            allow_infeasible: false,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.matrix.n() != self.objective.len() {
            return Err(EngineError::NodeMismatch { matrix: self.matrix.n(), objective: self.objective.len() });
        }
        if self.iterations == 0 {
            return Err(EngineError::Config("iterations must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(EngineError::Config("trials must be at least 1".into()));
        }
        if self.objective.dim() == 0 {
            return Err(EngineError::Config("objective dimension must be positive".into()));
        }
        self.schedule.validate()?;
        self.compressor.validate()?;
        if !self.allow_infeasible {
            let report = consensus::spectral(&self.matrix)?;
            let eta_min = consensus::eta_min(report.lambda_n);
            let eta = self.compressor.snr_floor().unwrap_or(0.0);
            if eta <= eta_min {
                return Err(EngineError::SnrInfeasible {
                    spec: self.compressor,
                    eta,
                    lambda_n: report.lambda_n,
                    eta_min,
                });
            }
        }
        Ok(())
    }

    pub fn f_ref(&self) -> f64 {
        self.objective.f_ref.unwrap_or(0.0)
    }
}

/// State held by one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub d: Vec<f64>,
}

/// Metrics after iteration `t` (`t = 0` is the initial state).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationMetrics {
    pub t: usize,
    /// `x̄_t`, the average of the local copies.
    pub mean_iterate: Vec<f64>,
    /// `f(x̄_t)`.
    pub value: f64,
    /// `f(x̄_t) − f_ref`.
    pub gap: f64,
    /// `‖∇f(x̄_t)‖²`.
    pub grad_norm_sq: f64,
    /// `‖x_t − 1 ⊗ x̄_t‖²`.
    pub consensus_dev: f64,
    /// `L_{α_t}(x_t)`.
    pub lyapunov: f64,
    /// `‖∇L_{α_t}(x_t)‖² = ‖d_{t+1}‖²`.
    pub lyapunov_grad_sq: f64,
    /// Model-cost bits sent through `t`.
    pub cum_bits: u64,
    /// Wire-format bits sent through `t`.
    pub cum_wire_bits: u64,
}

/// A probe residual together with the scale it is judged against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub residual: f64,
    pub scale: f64,
}

impl Probe {
    pub fn relative(&self) -> f64 {
        self.residual / self.scale
    }

    pub fn passes(&self) -> bool {
        self.residual <= tolerance::PROBE_IDENTITY * self.scale
    }
}

/// One simulated network for one trial.
pub struct Engine<'a> {
    cfg: &'a RunConfig,
    compressor: Compressor,
    trial: u64,
    steps: usize,
    /// `α` used by the most recent gradient step (`α_1` before any step).
    alpha: f64,
    nodes: Vec<NodeState>,
    last_messages: Vec<CompressedMessage>,
    cum_bits: u64,
    cum_wire_bits: u64,
    initial_gap: f64,
    max_local_grad: f64,
    diverged_at: Option<usize>,
}

impl<'a> Engine<'a> {
    /// All nodes start at zero with `d_{i,1} = −α_1 ∇f_i(0)`.
    pub fn init(cfg: &'a RunConfig, trial: u64) -> Result<Self, EngineError> {
        cfg.validate()?;
        let dim = cfg.objective.dim();
        let alpha = cfg.schedule.alpha(1);
        let zero = vec![0.0; dim];
        let mut max_local_grad = 0.0f64;
        let nodes = (0..cfg.matrix.n())
            .map(|i| {
                let g = cfg.objective.local(i).grad(&zero);
                max_local_grad = max_local_grad.max(norm(&g));
                let z: Vec<f64> = g.iter().map(|v| -alpha * v).collect();
                NodeState { x: zero.clone(), y: zero.clone(), d: z.clone(), z }
            })
            .collect();
        let initial_gap = cfg.objective.value(&zero) - cfg.f_ref();
        Ok(Self {
            cfg,
            compressor: Compressor::new(cfg.compressor, cfg.cost_model)?,
            trial,
            steps: 0,
            alpha,
            nodes,
            last_messages: Vec::new(),
            cum_bits: 0,
            cum_wire_bits: 0,
            initial_gap,
            max_local_grad,
            diverged_at: None,
        })
    }

    pub fn config(&self) -> &RunConfig {
        self.cfg
    }

    /// Completed iterations.
    pub fn t(&self) -> usize {
        self.steps
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn stacked_x(&self) -> Vec<Vec<f64>> {
        self.nodes.iter().map(|n| n.x.clone()).collect()
    }

    /// Messages of the most recent round, indexed by sender.
    pub fn last_messages(&self) -> &[CompressedMessage] {
        &self.last_messages
    }

    pub fn diverged_at(&self) -> Option<usize> {
        self.diverged_at
    }

    pub fn initial_gap(&self) -> f64 {
        self.initial_gap
    }

    /// Largest `‖∇f_i(x_i)‖` seen so far, an empirical gradient bound.
    pub fn max_local_grad(&self) -> f64 {
        self.max_local_grad
    }

    /// Gaps above this mark the run as diverged.
    pub fn gap_ceiling(&self) -> f64 {
        tolerance::DIVERGENCE_FACTOR * self.initial_gap.abs()
    }

    /// One synchronous round. Returns `None` once the run has diverged.
    pub fn step(&mut self) -> Result<Option<IterationMetrics>, EngineError> {
        if self.diverged_at.is_some() {
            return Ok(None);
        }
        let t = self.steps + 1;
        if self.nodes.iter().any(|n| !all_finite(&n.d)) {
            self.diverged_at = Some(t);
            return Ok(None);
        }

        // 3-a: one draw per node, applied to the node's own copy.
        let mut messages = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter_mut().enumerate() {
            let mut r = rng::stream(self.cfg.master_seed, self.trial, i as u64, t as u64);
            let msg = self.compressor.compress(&node.d, &mut r)?;
            for (x, c) in node.x.iter_mut().zip(&msg.decoded) {
                *x += c;
            }
            let links = match self.cfg.accounting {
                CostAccounting::PerLink => self.cfg.matrix.topology().degree(i) as u64,
                CostAccounting::BroadcastOnce => 1,
            };
            self.cum_bits += msg.paper_cost_bits * links;
            self.cum_wire_bits += msg.wire_cost_bits * links;
            messages.push(msg);
        }

        // 3-b: the same realizations are aggregated, self-weight included.
        for (i, node) in self.nodes.iter_mut().enumerate() {
            for (j, w) in self.cfg.matrix.support(i) {
                for (y, c) in node.y.iter_mut().zip(&messages[j].decoded) {
                    *y += w * c;
                }
            }
        }

        // 3-c and 3-d.
        let alpha = self.cfg.schedule.alpha(t);
        for (i, node) in self.nodes.iter_mut().enumerate() {
            let g = self.cfg.objective.local(i).grad(&node.x);
            self.max_local_grad = self.max_local_grad.max(norm(&g));
            for (k, gk) in g.iter().enumerate() {
                node.z[k] = node.y[k] - alpha * gk;
                node.d[k] = node.z[k] - node.x[k];
            }
        }
        self.alpha = alpha;
        self.steps = t;
        self.last_messages = messages;

        let m = self.metrics();
        if !m.gap.is_finite()
            || m.gap.abs() > self.gap_ceiling()
            || !m.consensus_dev.is_finite()
            || !m.lyapunov_grad_sq.is_finite()
        {
            self.diverged_at = Some(t);
            return Ok(None);
        }
        Ok(Some(m))
    }

    /// Metrics of the current state.
    pub fn metrics(&self) -> IterationMetrics {
        let obj = &self.cfg.objective;
        let n = self.nodes.len() as f64;
        let dim = obj.dim();
        let mut mean = vec![0.0; dim];
        for node in &self.nodes {
            for (m, x) in mean.iter_mut().zip(&node.x) {
                *m += x / n;
            }
        }
        let consensus_dev =
            self.nodes.iter().map(|node| node.x.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).sum();
        let value = obj.value(&mean);
        let x = self.stacked_x();
        IterationMetrics {
            t: self.steps,
            grad_norm_sq: norm_sq(&obj.grad(&mean)),
            gap: value - self.cfg.f_ref(),
            value,
            mean_iterate: mean,
            consensus_dev,
            lyapunov: lyapunov(&x, self.alpha, &self.cfg.matrix, obj),
            lyapunov_grad_sq: self.nodes.iter().map(|n| norm_sq(&n.d)).sum(),
            cum_bits: self.cum_bits,
            cum_wire_bits: self.cum_wire_bits,
        }
    }

    /// `‖y_t − (W ⊗ I) x_t‖` against the scale `1 + ‖x_t‖`.
    pub fn y_consistency_probe(&self) -> Probe {
        let x = self.stacked_x();
        let wx = self.cfg.matrix.mix(&x);
        let residual = self
            .nodes
            .iter()
            .zip(&wx)
            .map(|(n, w)| n.y.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        Probe { residual, scale: 1.0 + stacked_norm(&x) }
    }

    /// `‖d_{t+1} + ∇L_{α_t}(x_t)‖` against the scale `1 + ‖∇L_{α_t}(x_t)‖`,
    /// with the gradient formed analytically as `(I − W ⊗ I) x + α ∇f(x)`.
    pub fn lyapunov_grad_probe(&self) -> Probe {
        let x = self.stacked_x();
        let grad = lyapunov_grad(&x, self.alpha, &self.cfg.matrix, &self.cfg.objective);
        let residual = self
            .nodes
            .iter()
            .zip(&grad)
            .map(|(n, g)| n.d.iter().zip(g).map(|(a, b)| (a + b) * (a + b)).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        Probe { residual, scale: 1.0 + stacked_norm(&grad) }
    }
}

/// `L_α(x) = ½ xᵀ(I − W ⊗ I)x + α Σ_i f_i(x_i)`.
pub fn lyapunov(x: &[Vec<f64>], alpha: f64, matrix: &ConsensusMatrix, objective: &GlobalObjective) -> f64 {
    let wx = matrix.mix(x);
    let quad: f64 = x.iter().zip(&wx).map(|(xi, wi)| xi.iter().zip(wi).map(|(a, b)| a * (a - b)).sum::<f64>()).sum();
    0.5 * quad + alpha * objective.stacked_value(x)
}

/// `∇L_α(x) = (I − W ⊗ I)x + α ∇f(x)`, stacked per node.
pub fn lyapunov_grad(
    x: &[Vec<f64>],
    alpha: f64,
    matrix: &ConsensusMatrix,
    objective: &GlobalObjective,
) -> Vec<Vec<f64>> {
    let wx = matrix.mix(x);
    x.iter()
        .zip(&wx)
        .enumerate()
        .map(|(i, (xi, wi))| {
            let g = objective.local(i).grad(xi);
            xi.iter().zip(wi).zip(&g).map(|((a, b), gi)| a - b + alpha * gi).collect()
        })
        .collect()
}

/// Plain DGD, `x_1 = −α_1 ∇f(0)` and `x_{t+1} = (W ⊗ I)x_t − α_t ∇f(x_t)`.
/// Returns `x_0, …, x_T`.
pub fn classic_dgd(
    matrix: &ConsensusMatrix,
    objective: &GlobalObjective,
    schedule: StepSchedule,
    iterations: usize,
) -> Vec<Vec<Vec<f64>>> {
    let n = matrix.n();
    let dim = objective.dim();
    let mut traj = vec![vec![vec![0.0; dim]; n]];
    for t in 1..=iterations {
        let x = traj.last().expect("trajectory starts non-empty");
        // x_1 uses α_1 at x_0; x_{t+1} uses α_t at x_t.
        let alpha = schedule.alpha(t.saturating_sub(1).max(1));
        let wx = matrix.mix(x);
        let next = (0..n)
            .map(|i| {
                let g = objective.local(i).grad(&x[i]);
                wx[i].iter().zip(&g).map(|(w, g)| w - alpha * g).collect()
            })
            .collect();
        traj.push(next);
    }
    traj
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

fn stacked_norm(x: &[Vec<f64>]) -> f64 {
    x.iter().map(|v| norm_sq(v)).sum::<f64>().sqrt()
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests;
