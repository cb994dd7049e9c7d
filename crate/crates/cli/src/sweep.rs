//! `run` and `real-data`: DC-DGD over every combination of network,
//! compressor and step size listed in the config.
//!
//! Output files in the output directory:
//!
//! - `runs.csv`: one line per configuration with its convergence verdict.
//! - `<config_id>.csv`: `trial,iteration,gap,grad_norm_sq,consensus_dev,lyapunov,cum_bits,clipped`
//!   for `iteration = 0..=T`. After a trial diverges its last finite row is
//!   repeated with the gap clipped at the divergence ceiling and `clipped = 1`.
//! - `summary.csv`: per configuration and iteration, the across-trial mean
//!   and sample standard deviation of every metric.
//! - `bits_series.csv` (`real-data` only): mean objective value and gap
//!   indexed by mean cumulative bits.

use std::path::Path;

use dcdgd::codec::{CostModel, ValueWidth};
use dcdgd::consensus;
use dcdgd::engine::{self, CostAccounting, RunConfig, RunResult, StepSchedule};
use dcdgd::CompressorSpec;

use crate::csv::Table;
use crate::setup::{self, Experiment, Network};
use crate::{CliError, Config, ConfigError, Overrides};

pub const TRIAL_HEADER: [&str; 8] =
    ["trial", "iteration", "gap", "grad_norm_sq", "consensus_dev", "lyapunov", "cum_bits", "clipped"];

pub const SUMMARY_HEADER: [&str; 14] = [
    "config_id",
    "iteration",
    "value_mean",
    "value_std",
    "gap_mean",
    "gap_std",
    "grad_norm_sq_mean",
    "grad_norm_sq_std",
    "consensus_dev_mean",
    "consensus_dev_std",
    "lyapunov_mean",
    "lyapunov_std",
    "cum_bits_mean",
    "cum_bits_std",
];

pub const RUNS_HEADER: [&str; 13] = [
    "config_id",
    "network",
    "spec",
    "schedule",
    "snr_floor",
    "eta_min",
    "feasible",
    "trials",
    "diverged_trials",
    "initial_gap_mean",
    "final_gap_mean",
    "final_value_mean",
    "converged",
];

/// One swept configuration and its result.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: String,
    pub network: String,
    pub spec: CompressorSpec,
    pub schedule: StepSchedule,
    /// SNR floor above `eta_min`.
    pub feasible: bool,
    pub eta_min: f64,
    pub result: RunResult,
}

impl Outcome {
    /// No trial diverged and the mean gap ended below where it started.
    pub fn converged(&self) -> bool {
        !self.result.any_diverged() && self.result.last().gap.mean < self.result.initial().gap.mean
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub outcomes: Vec<Outcome>,
    pub require_convergence: bool,
}

impl SweepReport {
    pub fn get(&self, id: &str) -> Option<&Outcome> {
        self.outcomes.iter().find(|o| o.id == id)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for o in &self.outcomes {
            let verdict = if o.converged() { "converged" } else { "did not converge" };
            out.push_str(&format!(
                "{:<40} {verdict:<17} diverged {}/{}  gap {:.4e} -> {:.4e}{}\n",
                o.id,
                o.result.diverged_trials(),
                o.result.trials.len(),
                o.result.initial().gap.mean,
                o.result.last().gap.mean,
                if o.feasible { "" } else { "  [SNR floor below eta_min]" },
            ));
        }
        out
    }
}

pub fn cmd_run(path: &Path, ov: &Overrides) -> Result<SweepReport, CliError> {
    sweep(path, ov, "convergence", false)
}

pub fn cmd_real_data(path: &Path, ov: &Overrides) -> Result<SweepReport, CliError> {
    sweep(path, ov, "real-data", true)
}

struct Plan {
    exp: Experiment,
    runs: Vec<(String, Network, RunConfig)>,
    require_convergence: bool,
}

fn plan(cfg: &Config, ov: &Overrides, kind: &str) -> Result<Plan, CliError> {
    let exp = setup::experiment(cfg, kind, ov, 50)?;
    let require_convergence = cfg.get_or("experiment", "require_convergence", true)?;
    let nets = setup::networks(cfg)?;
    let specs: Vec<CompressorSpec> = cfg.require_list("compressor", "specs")?;
    let schedules = schedules(cfg)?;
    let accounting = match cfg.get_or("run", "accounting", "per-link".to_string())?.as_str() {
        "per-link" => CostAccounting::PerLink,
        "broadcast-once" => CostAccounting::BroadcastOnce,
        other => {
            return Err(ConfigError {
                line: None,
                key: Some("[run] accounting".into()),
                msg: format!("expected per-link or broadcast-once, found {other:?}"),
            }
            .into())
        }
    };
    let allow_infeasible = cfg.get_or("run", "allow_infeasible", false)?;

    // One objective per distinct node count; all listed networks usually share it.
    let mut objectives: Vec<(usize, dcdgd::GlobalObjective)> = Vec::new();
    let mut runs = Vec::new();
    for net in &nets {
        let n = net.matrix.n();
        let obj = match objectives.iter().find(|(k, _)| *k == n) {
            Some((_, o)) => o.clone(),
            None => {
                let o = setup::objective(cfg, n, exp.seed)?;
                objectives.push((n, o.clone()));
                o
            }
        };
        for spec in &specs {
            for schedule in &schedules {
                let id = config_id(&net.name, spec, schedule, nets.len() > 1);
                let rc = RunConfig {
                    matrix: net.matrix.clone(),
                    objective: obj.clone(),
                    compressor: *spec,
                    schedule: *schedule,
                    iterations: exp.iterations,
                    master_seed: exp.seed,
                    trials: exp.trials,
                    cost_model: CostModel::default().with_wire(ValueWidth::F64),
                    accounting,
                    allow_infeasible,
                };
                runs.push((id, net.clone(), rc));
            }
        }
    }
    cfg.finish()?;
    Ok(Plan { exp, runs, require_convergence })
}

/// `[run] alpha = 0.1; 0.05` or `[run] schedule = sublinear` with `c2` and
/// an optional `cap`.
fn schedules(cfg: &Config) -> Result<Vec<StepSchedule>, CliError> {
    let kind: String = cfg.get_or("run", "schedule", "constant".to_string())?;
    match kind.as_str() {
        "constant" => Ok(cfg
            .list::<f64>("run", "alpha")?
            .unwrap_or_else(|| vec![0.1])
            .into_iter()
            .map(StepSchedule::Constant)
            .collect()),
        "sublinear" => {
            let c2: f64 = cfg.require("run", "c2")?;
            let cap: Option<f64> = cfg.get("run", "cap")?;
            Ok(vec![StepSchedule::Sublinear { c2, cap }])
        }
        other => Err(ConfigError {
            line: None,
            key: Some("[run] schedule".into()),
            msg: format!("expected constant or sublinear, found {other:?}"),
        }
        .into()),
    }
}

fn config_id(network: &str, spec: &CompressorSpec, schedule: &StepSchedule, with_network: bool) -> String {
    let spec_slug: String = spec
        .to_string()
        .chars()
        .filter_map(|c| match c {
            ':' | ',' => Some('-'),
            '=' => None,
            c => Some(c),
        })
        .collect();
    let sched = match schedule {
        StepSchedule::Constant(a) => format!("a{a}"),
        StepSchedule::Sublinear { c2, .. } => format!("sub{c2}"),
    };
    if with_network {
        format!("{network}_{spec_slug}_{sched}")
    } else {
        format!("{spec_slug}_{sched}")
    }
}

fn sweep(path: &Path, ov: &Overrides, kind: &str, bits_series: bool) -> Result<SweepReport, CliError> {
    let cfg = Config::load(path)?;
    let plan = plan(&cfg, ov, kind)?;
    let mut outcomes = Vec::with_capacity(plan.runs.len());
    for (id, net, rc) in &plan.runs {
        let spectral = consensus::spectral(&net.matrix).map_err(|e| CliError::Input(e.to_string()))?;
        let eta_min = consensus::eta_min(spectral.lambda_n);
        let feasible = rc.compressor.snr_floor().is_some_and(|eta| eta > eta_min);
        let result = engine::run(rc)?;
        outcomes.push(Outcome {
            id: id.clone(),
            network: net.name.clone(),
            spec: rc.compressor,
            schedule: rc.schedule,
            feasible,
            eta_min,
            result,
        });
    }
    write_outputs(&plan.exp, &outcomes, bits_series)?;
    let report = SweepReport { outcomes, require_convergence: plan.require_convergence };
    if report.require_convergence {
        let failed: Vec<&str> = report.outcomes.iter().filter(|o| !o.converged()).map(|o| o.id.as_str()).collect();
        if !failed.is_empty() {
            return Err(CliError::Diverged(failed.join(", ")));
        }
    }
    Ok(report)
}

fn write_outputs(exp: &Experiment, outcomes: &[Outcome], bits_series: bool) -> Result<(), CliError> {
    let mut runs = Table::new(&RUNS_HEADER);
    let mut summary = Table::new(&SUMMARY_HEADER);
    let mut bits = Table::new(&["config_id", "cum_bits_mean", "value_mean", "gap_mean"]);
    for o in outcomes {
        let r = &o.result;
        let sched = match o.schedule {
            StepSchedule::Constant(a) => format!("constant:{a}"),
            StepSchedule::Sublinear { c2, cap } => {
                format!("sublinear:{c2}:{}", cap.map_or_else(|| "none".into(), |c| c.to_string()))
            }
        };
        let snr = o.spec.snr_floor().map_or_else(|| "none".to_string(), |v| v.to_string());
        runs.row(&[
            &o.id,
            &o.network,
            &format!("\"{}\"", o.spec),
            &sched,
            &snr,
            &o.eta_min,
            &u8::from(o.feasible),
            &r.trials.len(),
            &r.diverged_trials(),
            &r.initial().gap.mean,
            &r.last().gap.mean,
            &r.last().value.mean,
            &u8::from(o.converged()),
        ]);

        let mut trials = Table::new(&TRIAL_HEADER);
        for t in &r.trials {
            let recorded = t.metrics.len();
            for (k, m) in t.padded(exp.iterations).iter().enumerate() {
                trials.row(&[
                    &t.trial,
                    &m.t,
                    &m.gap,
                    &m.grad_norm_sq,
                    &m.consensus_dev,
                    &m.lyapunov,
                    &m.cum_bits,
                    &u8::from(k >= recorded),
                ]);
            }
        }
        trials.write(&exp.out_dir.join(format!("{}.csv", o.id)))?;

        for p in &r.summary {
            summary.row(&[
                &o.id,
                &p.t,
                &p.value.mean,
                &p.value.std,
                &p.gap.mean,
                &p.gap.std,
                &p.grad_norm_sq.mean,
                &p.grad_norm_sq.std,
                &p.consensus_dev.mean,
                &p.consensus_dev.std,
                &p.lyapunov.mean,
                &p.lyapunov.std,
                &p.cum_bits.mean,
                &p.cum_bits.std,
            ]);
            bits.row(&[&o.id, &p.cum_bits.mean, &p.value.mean, &p.gap.mean]);
        }
    }
    runs.write(&exp.out_dir.join("runs.csv"))?;
    summary.write(&exp.out_dir.join("summary.csv"))?;
    if bits_series {
        bits.write(&exp.out_dir.join("bits_series.csv"))?;
    }
    Ok(())
}
