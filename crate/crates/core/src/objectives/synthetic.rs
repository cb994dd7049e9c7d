use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};

use super::{dot, power_iteration, GlobalObjective, LocalObjective, ObjectiveError};
use crate::rng::aux_stream;

/// `log(1 + (aᵀx + b)²/2)`, non-convex. Its second derivative along `a` is
/// `(4 − 2u²)/(2 + u²)²` with `u = aᵀx + b`, maximal (= 1) at `u = 0`, so
/// `L = ‖a‖²`.
#[derive(Debug, Clone)]
pub struct LogSquare {
    pub a: Vec<f64>,
    pub b: f64,
}

impl LocalObjective for LogSquare {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let u = dot(&self.a, x) + self.b;
        (0.5 * u * u).ln_1p()
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let u = dot(&self.a, x) + self.b;
        let s = u / (1.0 + 0.5 * u * u);
        self.a.iter().map(|a| s * a).collect()
    }

    fn smoothness(&self) -> Result<f64, ObjectiveError> {
        Ok(dot(&self.a, &self.a))
    }

    fn name(&self) -> String {
        "log-square".into()
    }
}

/// `(aᵀx − b)²/2`. The Hessian `a aᵀ` has top eigenvalue `‖a‖²`, found here
/// by power iteration.
#[derive(Debug, Clone)]
pub struct RankOneQuadratic {
    pub a: Vec<f64>,
    pub b: f64,
}

impl LocalObjective for RankOneQuadratic {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r = dot(&self.a, x) - self.b;
        0.5 * r * r
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let r = dot(&self.a, x) - self.b;
        self.a.iter().map(|a| r * a).collect()
    }

    fn smoothness(&self) -> Result<f64, ObjectiveError> {
        power_iteration(self.dim(), |v| {
            let s = dot(&self.a, v);
            self.a.iter().map(|a| s * a).collect()
        })
    }

    fn name(&self) -> String {
        "rank-one-quadratic".into()
    }
}

/// `scale ‖x − center‖² / 2`.
#[derive(Debug, Clone)]
pub struct IsotropicQuadratic {
    pub center: Vec<f64>,
    pub scale: f64,
}

impl IsotropicQuadratic {
    pub fn new(center: Vec<f64>, scale: f64) -> Self {
        Self { center, scale }
    }
}

impl LocalObjective for IsotropicQuadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.scale * x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>()
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(a, c)| self.scale * (a - c)).collect()
    }

    fn smoothness(&self) -> Result<f64, ObjectiveError> {
        power_iteration(self.dim(), |v| v.iter().map(|x| self.scale * x).collect())
    }

    fn name(&self) -> String {
        "isotropic-quadratic".into()
    }
}

/// The five-node test problem: `f_1, f_2` are [`LogSquare`] terms and
/// `f_3 … f_5` are [`RankOneQuadratic`] terms, with every `a_i` and `b_i`
/// standard Gaussian. Draw order: `a_1, b_1, a_2, b_2, …`.
pub fn make_synthetic_five(dim: usize, seed: u64) -> Result<GlobalObjective, ObjectiveError> {
    let mut rng = aux_stream(seed, 1);
    let mut locals: Vec<Arc<dyn LocalObjective>> = Vec::with_capacity(5);
    for i in 0..5 {
        let a: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: f64 = StandardNormal.sample(&mut rng);
        if i < 2 {
            locals.push(Arc::new(LogSquare { a, b }));
        } else {
            locals.push(Arc::new(RankOneQuadratic { a, b }));
        }
    }
    GlobalObjective::new(locals)
}
