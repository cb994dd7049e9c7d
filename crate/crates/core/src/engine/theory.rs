//! Diagnostic constants from the convergence analysis. None of them is
//! enforced at run time.

use crate::consensus;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryInputs {
    pub alpha: f64,
    /// SNR floor of the compressor.
    pub eta: f64,
    pub nodes: usize,
    pub lambda_n: f64,
    pub beta: f64,
    /// Smoothness `L`.
    pub smoothness: f64,
    /// Gradient bound `D`.
    pub grad_bound: f64,
    /// `f(0) − f(x*)`, with a reference value standing in for `f(x*)`.
    pub initial_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryReport {
    pub eta_min: f64,
    pub alpha_max: f64,
    /// `η > eta_min` and `α ≤ alpha_max`.
    pub feasible: bool,
    /// Bound on `Σ_τ ‖∇L_α(x_τ)‖²`.
    pub gradient_sum_bound: f64,
    /// Coefficient of the `1/t` term.
    pub c1: f64,
    /// `α²N²D²L/(1−β)²`.
    pub error_ball: f64,
    /// Constant of the diminishing schedule `α_t = (C₂/t)^{1/3}`.
    pub c2: f64,
}

pub fn theory_report(inp: &TheoryInputs) -> TheoryReport {
    let TheoryInputs { alpha, eta, nodes, lambda_n, beta, smoothness: l, grad_bound: d, initial_gap } = *inp;
    let n = nodes as f64;
    let eta_min = consensus::eta_min(lambda_n);
    let alpha_max = consensus::alpha_max(lambda_n, eta, l);
    let feasible = eta > eta_min && alpha <= alpha_max && alpha > 0.0;

    let denom1 = 1.0 + lambda_n - alpha * l - (1.0 - lambda_n + alpha * l) / eta;
    let gradient_sum_bound = 2.0 * alpha * initial_gap / denom1;

    let denom_c1 = (1.0 + lambda_n - alpha * l) * eta - (1.0 - lambda_n + alpha * l);
    let c1 = 4.0 * (alpha / (1.0 - beta * beta) + l / 2.0) / denom_c1 + 2.0 * n / alpha;

    let error_ball = (alpha * n * d / (1.0 - beta)).powi(2) * l;
    let c2 = initial_gap * (1.0 - beta).powi(2) / (d * d * n * n * l);

    TheoryReport { eta_min, alpha_max, feasible, gradient_sum_bound, c1, error_ball, c2 }
}

/// Consensus-deviation bound at iteration `t = history.len()`:
/// `(αND/(1−β))² + Σ_{τ=1}^{t} β^{2(t−τ)} h[τ−1] / η`, where `h[τ]` is
/// `‖∇L_α(x_τ)‖²`.
pub fn theorem2_bound(alpha: f64, nodes: usize, grad_bound: f64, beta: f64, eta: f64, history: &[f64]) -> f64 {
    let t = history.len();
    let head = (alpha * nodes as f64 * grad_bound / (1.0 - beta)).powi(2);
    let tail: f64 = history.iter().enumerate().map(|(k, h)| beta.powi(2 * (t - 1 - k) as i32) * h).sum();
    head + tail / eta
}
