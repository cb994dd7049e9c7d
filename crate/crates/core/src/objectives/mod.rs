//! Local objectives `f_i`, their sum `f`, and smoothness estimates.

mod data;
mod logistic;
mod synthetic;

use std::sync::Arc;

use thiserror::Error;

use crate::tolerance;

pub use data::{load_csv_dataset, parse_csv_dataset, partition_even, CsvOptions, Dataset, Partition};
pub use logistic::LogisticNonconvex;
pub use synthetic::{make_synthetic_five, IsotropicQuadratic, LogSquare, RankOneQuadratic};

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("partition {0} is empty")]
    EmptyPartition(usize),
    #[error("cannot split {rows} rows into {parts} parts")]
    BadPartition { rows: usize, parts: usize },
    #[error("power iteration did not converge (residual {0:e})")]
    PowerIteration(f64),
    #[error("all local objectives must share one dimension (found {0} and {1})")]
    DimMismatch(usize, usize),
    #[error("dataset checksum mismatch: expected {expected}, found {found}")]
    Checksum { expected: String, found: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// A smooth local objective.
pub trait LocalObjective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;

    /// An upper estimate of the gradient Lipschitz constant.
    fn smoothness(&self) -> Result<f64, ObjectiveError>;

    /// Short human-readable name.
    fn name(&self) -> String;
}

/// `f(x) = Σ_i f_i(x)` over the nodes of the network.
#[derive(Clone)]
pub struct GlobalObjective {
    locals: Vec<Arc<dyn LocalObjective>>,
    /// Reference optimal value used for optimality gaps.
    pub f_ref: Option<f64>,
}

impl std::fmt::Debug for GlobalObjective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GlobalObjective")
            .field("locals", &self.locals.iter().map(|l| l.name()).collect::<Vec<_>>())
            .field("f_ref", &self.f_ref)
            .finish()
    }
}

impl GlobalObjective {
    pub fn new(locals: Vec<Arc<dyn LocalObjective>>) -> Result<Self, ObjectiveError> {
        let dim = locals.first().map(|l| l.dim()).unwrap_or(0);
        if let Some(bad) = locals.iter().find(|l| l.dim() != dim) {
            return Err(ObjectiveError::DimMismatch(dim, bad.dim()));
        }
        Ok(Self { locals, f_ref: None })
    }

    pub fn with_f_ref(mut self, f_ref: f64) -> Self {
        self.f_ref = Some(f_ref);
        self
    }

    pub fn len(&self) -> usize {
        self.locals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locals.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.locals.first().map(|l| l.dim()).unwrap_or(0)
    }

    pub fn local(&self, i: usize) -> &dyn LocalObjective {
        self.locals[i].as_ref()
    }

    pub fn locals(&self) -> &[Arc<dyn LocalObjective>] {
        &self.locals
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.locals.iter().map(|l| l.value(x)).sum()
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for l in &self.locals {
            for (a, b) in g.iter_mut().zip(l.grad(x)) {
                *a += b;
            }
        }
        g
    }

    /// `Σ_i f_i(x_i)` for a stacked iterate.
    pub fn stacked_value(&self, x: &[Vec<f64>]) -> f64 {
        self.locals.iter().zip(x).map(|(l, xi)| l.value(xi)).sum()
    }

    /// Largest local smoothness constant, the `L` shared by every `f_i`.
    pub fn smoothness(&self) -> Result<f64, ObjectiveError> {
        self.locals.iter().try_fold(0.0f64, |acc, l| Ok(acc.max(l.smoothness()?)))
    }

    /// Smoothness of the sum, bounded by the sum of local constants.
    pub fn sum_smoothness(&self) -> Result<f64, ObjectiveError> {
        self.locals.iter().map(|l| l.smoothness()).sum()
    }

    /// Reference optimum by centralized gradient descent from 0 with step
    /// `1 / Σ L_i`. Returns the smallest value seen.
    pub fn centralized_reference(&self, iterations: usize) -> Result<f64, ObjectiveError> {
        let step = 1.0 / self.sum_smoothness()?;
        let mut x = vec![0.0; self.dim()];
        let mut best = self.value(&x);
        for _ in 0..iterations {
            let g = self.grad(&x);
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi -= step * gi;
            }
            best = best.min(self.value(&x));
        }
        Ok(best)
    }
}

/// Top eigenvalue of a symmetric positive semidefinite operator given as a
/// matrix-vector product.
pub fn power_iteration(dim: usize, apply: impl Fn(&[f64]) -> Vec<f64>) -> Result<f64, ObjectiveError> {
    // Deterministic start with components in every direction.
    let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + (i as f64 * 0.618_033_988_75).fract()).collect();
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..tolerance::POWER_ITERATION_MAX {
        let w = apply(&v);
        let next: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let residual = w.iter().zip(&v).map(|(a, b)| (a - next * b).powi(2)).sum::<f64>().sqrt();
        v = w.into_iter().map(|x| x / norm).collect();
        if (next - lambda).abs() <= tolerance::POWER_ITERATION * next.abs().max(1.0)
            && residual <= 1e-6 * next.abs().max(1.0)
        {
            return Ok(next);
        }
        lambda = next;
    }
    let w = apply(&v);
    let residual = w.iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
    Err(ObjectiveError::PowerIteration(residual))
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
