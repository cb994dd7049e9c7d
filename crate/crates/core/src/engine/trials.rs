use rayon::prelude::*;

use super::{Engine, EngineError, IterationMetrics, RunConfig};

/// The metric series of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSeries {
    pub trial: u64,
    /// Rows for `t = 0, 1, …` up to the last iteration that stayed finite
    /// and under the divergence ceiling.
    pub metrics: Vec<IterationMetrics>,
    /// Iteration at which the run was declared diverged.
    pub diverged_at: Option<usize>,
    pub gap_ceiling: f64,
    /// Worst relative residual of `y_t = (W ⊗ I) x_t` over the run.
    pub max_y_probe: f64,
    /// Worst relative residual of `d_{t+1} = −∇L_{α_t}(x_t)` over the run.
    pub max_grad_probe: f64,
    /// Largest local gradient norm seen on the trajectory.
    pub grad_bound_est: f64,
}

impl TrialSeries {
    /// The series extended to `t = iterations`. After divergence the last
    /// recorded row is repeated with the gap clipped at the ceiling.
    pub fn padded(&self, iterations: usize) -> Vec<IterationMetrics> {
        let mut rows = self.metrics.clone();
        if self.diverged_at.is_some() {
            let last = rows.last().cloned().expect("the initial row is always recorded");
            let f_ref = last.value - last.gap;
            for t in rows.len()..=iterations {
                let mut row = last.clone();
                row.t = t;
                row.gap = self.gap_ceiling;
                row.value = self.gap_ceiling + f_ref;
                rows.push(row);
            }
        }
        rows
    }

    pub fn last(&self) -> &IterationMetrics {
        self.metrics.last().expect("the initial row is always recorded")
    }
}

/// Mean and sample standard deviation (zero for a single sample).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std =
            if v.len() > 1 { (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        Self { mean, std }
    }
}

/// Across-trial statistics at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryPoint {
    pub t: usize,
    pub value: Stat,
    pub gap: Stat,
    pub grad_norm_sq: Stat,
    pub consensus_dev: Stat,
    pub lyapunov: Stat,
    pub lyapunov_grad_sq: Stat,
    pub cum_bits: Stat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub trials: Vec<TrialSeries>,
    /// Rows for `t = 0..=iterations`, computed from padded series.
    pub summary: Vec<SummaryPoint>,
}

impl RunResult {
    pub fn diverged_trials(&self) -> usize {
        self.trials.iter().filter(|t| t.diverged_at.is_some()).count()
    }

    pub fn any_diverged(&self) -> bool {
        self.diverged_trials() > 0
    }

    pub fn initial(&self) -> &SummaryPoint {
        &self.summary[0]
    }

    pub fn last(&self) -> &SummaryPoint {
        self.summary.last().expect("summary has the initial row")
    }

    pub fn max_y_probe(&self) -> f64 {
        self.trials.iter().map(|t| t.max_y_probe).fold(0.0, f64::max)
    }

    pub fn max_grad_probe(&self) -> f64 {
        self.trials.iter().map(|t| t.max_grad_probe).fold(0.0, f64::max)
    }
}

/// Runs one trial to completion or divergence.
pub fn run_trial(cfg: &RunConfig, trial: u64) -> Result<TrialSeries, EngineError> {
    let mut engine = Engine::init(cfg, trial)?;
    let gap_ceiling = engine.gap_ceiling();
    let mut metrics = vec![engine.metrics()];
    let mut max_y_probe = 0.0f64;
    let mut max_grad_probe = engine.lyapunov_grad_probe().relative();
    for _ in 0..cfg.iterations {
        match engine.step()? {
            Some(m) => {
                max_y_probe = max_y_probe.max(engine.y_consistency_probe().relative());
                max_grad_probe = max_grad_probe.max(engine.lyapunov_grad_probe().relative());
                metrics.push(m);
            }
            None => break,
        }
    }
    Ok(TrialSeries {
        trial,
        metrics,
        diverged_at: engine.diverged_at(),
        gap_ceiling,
        max_y_probe,
        max_grad_probe,
        grad_bound_est: engine.max_local_grad(),
    })
}

/// Runs all trials in parallel and aggregates them per iteration. Trial `k`
/// draws only from streams keyed by `(master_seed, k, node, t)`, so the
/// result does not depend on scheduling.
pub fn run(cfg: &RunConfig) -> Result<RunResult, EngineError> {
    cfg.validate()?;
    let trials: Vec<TrialSeries> =
        (0..cfg.trials as u64).into_par_iter().map(|k| run_trial(cfg, k)).collect::<Result<_, _>>()?;
    let padded: Vec<Vec<IterationMetrics>> = trials.iter().map(|t| t.padded(cfg.iterations)).collect();
    let summary = (0..=cfg.iterations)
        .map(|t| {
            let col = |f: fn(&IterationMetrics) -> f64| Stat::of(padded.iter().map(|rows| f(&rows[t])));
            SummaryPoint {
                t,
                value: col(|m| m.value),
                gap: col(|m| m.gap),
                grad_norm_sq: col(|m| m.grad_norm_sq),
                consensus_dev: col(|m| m.consensus_dev),
                lyapunov: col(|m| m.lyapunov),
                lyapunov_grad_sq: col(|m| m.lyapunov_grad_sq),
                cum_bits: col(|m| m.cum_bits as f64),
            }
        })
        .collect();
    Ok(RunResult { trials, summary })
}
