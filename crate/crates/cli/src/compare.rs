//! `compare-compressors`: bias, empirical SNR and bit cost of the
//! sparsifier, ternary and hybrid operators on Gaussian test vectors.
//!
//! For every SNR target `η` the sparsifier uses
//! `p = η/(1+η)` and the hybrid operator `C = η`; the ternary operator has
//! no parameter. Each vector is compressed `trials` times per operator.

use std::path::Path;

use dcdgd::codec::{CostModel, ValueWidth};
use dcdgd::compress::{db_to_snr, estimate_stats, snr_to_db, CompressorStats};
use dcdgd::rng;
use dcdgd::{Compressor, CompressorSpec};
use rand_distr::{Distribution, StandardNormal};

use crate::csv::Table;
use crate::setup;
use crate::{CliError, Config, ConfigError, Overrides};

pub const COMPARE_HEADER: [&str; 13] = [
    "snr_db",
    "eta",
    "scheme",
    "spec",
    "dim",
    "vector",
    "bias_norm",
    "max_bias_se",
    "empirical_snr",
    "empirical_snr_db",
    "mean_paper_bits",
    "mean_wire_bits",
    "hybrid_groups",
];

pub const COMPARE_SUMMARY_HEADER: [&str; 8] = [
    "eta",
    "scheme",
    "dim",
    "vectors",
    "mean_paper_bits",
    "cost_ratio_vs_sparsifier",
    "min_empirical_snr",
    "vectors_below_target",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Sparsifier,
    Ternary,
    Hybrid,
}

impl std::str::FromStr for SchemeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sparsifier" => Ok(Self::Sparsifier),
            "ternary" => Ok(Self::Ternary),
            "hybrid" => Ok(Self::Hybrid),
            _ => Err(format!("unknown scheme {s:?} (expected sparsifier, ternary or hybrid)")),
        }
    }
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sparsifier => "sparsifier",
            Self::Ternary => "ternary",
            Self::Hybrid => "hybrid",
        }
    }

    pub fn spec(self, eta: f64) -> Result<CompressorSpec, CliError> {
        let spec = match self {
            Self::Sparsifier => CompressorSpec::sparsifier(eta / (1.0 + eta)),
            Self::Ternary => Ok(CompressorSpec::Ternary),
            Self::Hybrid => CompressorSpec::hybrid(eta),
        };
        spec.map_err(|e| CliError::Config(ConfigError::new(e.to_string())))
    }
}

/// Statistics of one operator on one vector.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub snr_db: f64,
    pub eta: f64,
    pub scheme: SchemeKind,
    pub spec: CompressorSpec,
    pub dim: usize,
    pub vector: usize,
    pub stats: CompressorStats,
    /// `max_i |mean error_i| / (σ_i/√trials)` with `σ_i` the operator's exact
    /// per-coordinate standard deviation, counting `0/0` as 0. The sample
    /// standard error is not used because a coordinate kept with probability
    /// near 1 often shows no variation at all over a few hundred draws.
    pub max_bias_se: f64,
    pub hybrid_groups: usize,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub measurements: Vec<Measurement>,
}

impl CompareReport {
    pub fn select(&self, eta: f64, scheme: SchemeKind, dim: usize) -> impl Iterator<Item = &Measurement> {
        self.measurements.iter().filter(move |m| m.eta == eta && m.scheme == scheme && m.dim == dim)
    }

    pub fn mean_cost(&self, eta: f64, scheme: SchemeKind, dim: usize) -> f64 {
        let v: Vec<f64> = self.select(eta, scheme, dim).map(|m| m.stats.mean_paper_cost_bits).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    fn cells(&self) -> Vec<(f64, SchemeKind, usize)> {
        let mut keys: Vec<(f64, SchemeKind, usize)> = Vec::new();
        for m in &self.measurements {
            if !keys.contains(&(m.eta, m.scheme, m.dim)) {
                keys.push((m.eta, m.scheme, m.dim));
            }
        }
        keys
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (eta, scheme, dim) in self.cells() {
            let db = snr_to_db(eta);
            let ms: Vec<&Measurement> = self.select(eta, scheme, dim).collect();
            let min_snr = ms.iter().map(|m| m.stats.empirical_snr).fold(f64::INFINITY, f64::min);
            let ratio = self.mean_cost(eta, scheme, dim) / self.mean_cost(eta, SchemeKind::Sparsifier, dim);
            out.push_str(&format!(
                "eta {eta:<6.4} ({db:.2} dB)  {:<10} d={dim:<4} mean bits {:>8.1}  ratio {:.3}  min SNR {:.3}\n",
                scheme.name(),
                self.mean_cost(eta, scheme, dim),
                ratio,
                min_snr,
            ));
        }
        out
    }
}

pub fn cmd_compare_compressors(path: &Path, ov: &Overrides) -> Result<CompareReport, CliError> {
    let cfg = Config::load(path)?;
    let exp = setup::experiment(&cfg, "compressor-compare", ov, 100)?;
    let dims: Vec<usize> = cfg.list("compare", "dims")?.unwrap_or_else(|| vec![20, 50]);
    let vectors: usize = cfg.get_or("compare", "vectors", 20)?;
    // Linear targets take precedence; dB targets convert exactly.
    let targets: Vec<f64> = match (cfg.list::<f64>("compare", "snr")?, cfg.list::<f64>("compare", "snr_db")?) {
        (Some(_), Some(_)) => return Err(ConfigError::new("set either [compare] snr or snr_db, not both").into()),
        (Some(lin), None) => lin,
        (None, Some(db)) => db.into_iter().map(db_to_snr).collect(),
        (None, None) => vec![1.0, 2.0],
    };
    if let Some(bad) = targets.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(ConfigError::new(format!("SNR targets must be positive, found {bad}")).into());
    }
    let schemes: Vec<SchemeKind> = cfg
        .list("compare", "schemes")?
        .unwrap_or_else(|| vec![SchemeKind::Sparsifier, SchemeKind::Ternary, SchemeKind::Hybrid]);
    cfg.finish()?;
    if exp.trials < 2 {
        return Err(ConfigError::new("compare-compressors needs at least 2 trials").into());
    }
    let report = compare(exp.seed, exp.trials, &dims, vectors, &targets, &schemes)?;
    write_outputs(&report, &exp.out_dir)?;
    Ok(report)
}

/// Test vector `v` of dimension `d`: standard Gaussian entries from a
/// stream keyed by the seed, `d` and `v`.
pub fn test_vector(seed: u64, dim: usize, vector: usize) -> Vec<f64> {
    let mut r = rng::stream(seed, dim as u64, vector as u64, u64::MAX - 1);
    (0..dim).map(|_| StandardNormal.sample(&mut r)).collect()
}

pub fn compare(
    seed: u64,
    trials: usize,
    dims: &[usize],
    vectors: usize,
    etas: &[f64],
    schemes: &[SchemeKind],
) -> Result<CompareReport, CliError> {
    // f64 values: f32 rounding of always-sent anchors would show up as a
    // zero-variance bias. Model costs do not depend on the width.
    let model = CostModel::default().with_wire(ValueWidth::F64);
    let mut measurements = Vec::new();
    for (ti, &eta) in etas.iter().enumerate() {
        let db = snr_to_db(eta);
        for (si, &scheme) in schemes.iter().enumerate() {
            let spec = scheme.spec(eta)?;
            let comp = Compressor::new(spec, model).map_err(|e| CliError::Input(e.to_string()))?;
            for &dim in dims {
                for v in 0..vectors {
                    let z = test_vector(seed, dim, v);
                    let key = ((ti as u64) << 32) | si as u64;
                    let mut r = rng::stream(seed, dim as u64, v as u64, key);
                    let stats =
                        estimate_stats(&comp, &z, trials, &mut r).map_err(|e| CliError::Input(e.to_string()))?;
                    let prepared = comp.prepare(&z).map_err(|e| CliError::Input(e.to_string()))?;
                    let root_m = (trials as f64).sqrt();
                    let max_bias_se = stats
                        .mean_error
                        .iter()
                        .zip(prepared.coordinate_std())
                        .map(|(m, sd)| if *m == 0.0 { 0.0 } else { m.abs() * root_m / sd })
                        .fold(0.0, f64::max);
                    let hybrid_groups = prepared.plan().map_or(0, |plan| plan.k());
                    measurements.push(Measurement {
                        snr_db: db,
                        eta,
                        scheme,
                        spec,
                        dim,
                        vector: v,
                        stats,
                        max_bias_se,
                        hybrid_groups,
                    });
                }
            }
        }
    }
    Ok(CompareReport { measurements })
}

fn write_outputs(report: &CompareReport, out_dir: &Path) -> Result<(), CliError> {
    let mut t = Table::new(&COMPARE_HEADER);
    for m in &report.measurements {
        t.row(&[
            &m.snr_db,
            &m.eta,
            &m.scheme.name(),
            &format!("\"{}\"", m.spec),
            &m.dim,
            &m.vector,
            &m.stats.bias_norm,
            &m.max_bias_se,
            &m.stats.empirical_snr,
            &m.stats.empirical_snr_db(),
            &m.stats.mean_paper_cost_bits,
            &m.stats.mean_wire_cost_bits,
            &m.hybrid_groups,
        ]);
    }
    t.write(&out_dir.join("compare.csv"))?;

    let mut s = Table::new(&COMPARE_SUMMARY_HEADER);
    for (eta, scheme, dim) in report.cells() {
        let ms: Vec<&Measurement> = report.select(eta, scheme, dim).collect();
        let min_snr = ms.iter().map(|m| m.stats.empirical_snr).fold(f64::INFINITY, f64::min);
        let below = ms.iter().filter(|m| m.stats.empirical_snr < eta).count();
        let cost = report.mean_cost(eta, scheme, dim);
        let has_sparsifier = report.select(eta, SchemeKind::Sparsifier, dim).next().is_some();
        let ratio = if has_sparsifier {
            (cost / report.mean_cost(eta, SchemeKind::Sparsifier, dim)).to_string()
        } else {
            String::new()
        };
        s.row(&[&eta, &scheme.name(), &dim, &ms.len(), &cost, &ratio, &min_snr, &below]);
    }
    s.write(&out_dir.join("compare_summary.csv"))?;
    Ok(())
}
