//! Unbiased stochastic compressors constrained by a signal-to-noise floor.
//!
//! A compressor maps `z` to `C(z) = z + ε` with `E[ε] = 0` and
//! `E‖ε‖² ≤ ‖z‖²/η`. The family implemented here:
//!
//! | spec            | realized coordinates            | SNR floor η    |
//! |-----------------|---------------------------------|----------------|
//! | `identity`      | `z_i`                           | ∞              |
//! | `sparsifier:p`  | `z_i/p` w.p. `p`, else 0        | `p/(1−p)`      |
//! | `ternary`       | `±‖z‖_∞` w.p. `|z_i|/‖z‖_∞`     | instance-based |
//! | `hybrid:C`      | ternary groups + sparsified rest| `C`            |
//!
//! Every draw consumes exactly one uniform per coordinate, in index order
//! (none for the identity), so realized messages depend only on the stream.

mod hybrid;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::codec::{self, CostModel, ValueWidth};

pub use hybrid::{brute_force_plan, hybrid_plan, HybridPlan, BRUTE_FORCE_MAX_DIM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompressError {
    #[error("cannot compress an empty vector")]
    Empty,
    #[error("coordinate {0} is not finite")]
    NonFinite(usize),
    #[error("invalid compressor: {0}")]
    InvalidSpec(String),
    #[error("brute force is limited to d <= {max} (got {d}); use hybrid_plan instead")]
    TooLarge { d: usize, max: usize },
    #[error("hybrid plan was computed for a different vector")]
    PlanMismatch,
    #[error("at least {0} trials are required")]
    TooFewTrials(usize),
}

/// Compressor configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompressorSpec {
    Identity,
    Sparsifier {
        p: f64,
    },
    Ternary,
    /// `c` is the SNR floor; `p` the residue keep-probability, at least
    /// `c/(c+1)`.
    Hybrid {
        c: f64,
        p: f64,
    },
}

impl CompressorSpec {
    pub fn sparsifier(p: f64) -> Result<Self, CompressError> {
        let s = CompressorSpec::Sparsifier { p };
        s.validate()?;
        Ok(s)
    }

    /// Hybrid scheme with the residue probability at its lower bound.
    pub fn hybrid(c: f64) -> Result<Self, CompressError> {
        Self::hybrid_with_margin(c, 0.0)
    }

    /// Hybrid scheme with `p = c/(c+1) + margin`, capped at 1.
    pub fn hybrid_with_margin(c: f64, margin: f64) -> Result<Self, CompressError> {
        if margin.is_nan() || margin < 0.0 {
            return Err(CompressError::InvalidSpec(format!("margin must be >= 0, got {margin}")));
        }
        let s = CompressorSpec::Hybrid { c, p: (hybrid_p_min(c) + margin).min(1.0) };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), CompressError> {
        match *self {
            CompressorSpec::Sparsifier { p } if !(p > 0.0 && p <= 1.0) => {
                Err(CompressError::InvalidSpec(format!("sparsifier probability must be in (0, 1], got {p}")))
            }
            CompressorSpec::Hybrid { c, .. } if !(c > 0.0 && c.is_finite()) => {
                Err(CompressError::InvalidSpec(format!("hybrid SNR bound must be positive, got {c}")))
            }
            CompressorSpec::Hybrid { c, p } if !(p >= hybrid_p_min(c) && p <= 1.0) => Err(CompressError::InvalidSpec(
                format!("hybrid probability {p} is below C/(C+1) = {}", hybrid_p_min(c)),
            )),
            _ => Ok(()),
        }
    }

    /// Guaranteed SNR floor. `None` for the ternary operator, whose noise
    /// power depends on the input.
    pub fn snr_floor(&self) -> Option<f64> {
        match *self {
            CompressorSpec::Identity => Some(f64::INFINITY),
            CompressorSpec::Sparsifier { p } => Some(crate::consensus::sparsifier_snr(p)),
            CompressorSpec::Ternary => None,
            CompressorSpec::Hybrid { c, .. } => Some(c),
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self {
            CompressorSpec::Identity => Scheme::Raw,
            CompressorSpec::Sparsifier { .. } => Scheme::Sparsifier,
            CompressorSpec::Ternary => Scheme::Ternary,
            CompressorSpec::Hybrid { .. } => Scheme::Hybrid,
        }
    }
}

fn hybrid_p_min(c: f64) -> f64 {
    c / (c + 1.0)
}

impl fmt::Display for CompressorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            CompressorSpec::Identity => write!(f, "identity"),
            CompressorSpec::Sparsifier { p } => write!(f, "sparsifier:p={p}"),
            CompressorSpec::Ternary => write!(f, "ternary"),
            CompressorSpec::Hybrid { c, p } if p == hybrid_p_min(c) => write!(f, "hybrid:C={c}"),
            CompressorSpec::Hybrid { c, p } => write!(f, "hybrid:C={c},p={p}"),
        }
    }
}

impl FromStr for CompressorSpec {
    type Err = CompressError;

    /// `identity`, `sparsifier:p=0.8`, `ternary`, `hybrid:C=2` or
    /// `hybrid:C=2,p=0.7`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |msg: String| CompressError::InvalidSpec(msg);
        let (name, args) = match s.trim().split_once(':') {
            Some((n, a)) => (n.trim(), a.trim()),
            None => (s.trim(), ""),
        };
        let mut params = Vec::new();
        for kv in args.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("expected key=value, found {kv:?}")))?;
            let v: f64 = v.trim().parse().map_err(|_| bad(format!("not a number: {:?}", v.trim())))?;
            params.push((k.trim().to_string(), v));
        }
        let get = |key: &str| params.iter().find(|(k, _)| k == key).map(|(_, v)| *v);
        let allow = |keys: &[&str]| -> Result<(), CompressError> {
            match params.iter().find(|(k, _)| !keys.contains(&k.as_str())) {
                Some((k, _)) => Err(bad(format!("unknown parameter {k:?} for {name}"))),
                None => Ok(()),
            }
        };
        let spec = match name {
            "identity" => {
                allow(&[])?;
                CompressorSpec::Identity
            }
            "ternary" => {
                allow(&[])?;
                CompressorSpec::Ternary
            }
            "sparsifier" => {
                allow(&["p"])?;
                let p = get("p").ok_or_else(|| bad("sparsifier needs p".into()))?;
                CompressorSpec::Sparsifier { p }
            }
            "hybrid" => {
                allow(&["C", "p"])?;
                let c = get("C").ok_or_else(|| bad("hybrid needs C".into()))?;
                CompressorSpec::Hybrid { c, p: get("p").unwrap_or(hybrid_p_min(c)) }
            }
            other => return Err(bad(format!("unknown compressor {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Wire scheme of a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Raw,
    Sparsifier,
    Ternary,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    /// Coordinate index in the original vector.
    pub index: usize,
    /// Transmitted magnitude `|z_q|`.
    pub magnitude: f64,
}

/// What the receiver needs to interpret a hybrid message: the anchors and a
/// per-coordinate group tag (0 for the sparsified residue, `g` for the
/// group of `anchors[g − 1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct HybridLayout {
    pub anchors: Vec<Anchor>,
    pub tags: Vec<usize>,
}

/// One realized compression.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedMessage {
    pub scheme: Scheme,
    pub dim: usize,
    /// The realized `C(z)`.
    pub decoded: Vec<f64>,
    /// Precision of the transmitted values.
    pub width: ValueWidth,
    pub layout: Option<HybridLayout>,
    pub plan: Option<HybridPlan>,
    pub paper_cost_bits: u64,
    pub wire_cost_bits: u64,
}

impl CompressedMessage {
    /// `ε = C(z) − z`.
    pub fn noise(&self, z: &[f64]) -> Vec<f64> {
        self.decoded.iter().zip(z).map(|(c, z)| c - z).collect()
    }

    fn finish(
        scheme: Scheme,
        decoded: Vec<f64>,
        layout: Option<HybridLayout>,
        plan: Option<HybridPlan>,
        model: &CostModel,
    ) -> Self {
        let paper_cost_bits = codec::paper_cost(scheme, &decoded, layout.as_ref(), model);
        let wire_cost_bits = codec::wire_length(scheme, &decoded, layout.as_ref(), model.wire);
        Self { scheme, dim: decoded.len(), decoded, width: model.wire, layout, plan, paper_cost_bits, wire_cost_bits }
    }
}

/// A compressor spec bound to a cost model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compressor {
    pub spec: CompressorSpec,
    pub model: CostModel,
}

impl Compressor {
    pub fn new(spec: CompressorSpec, model: CostModel) -> Result<Self, CompressError> {
        spec.validate()?;
        Ok(Self { spec, model })
    }

    /// Draws one realization of `C(z)`.
    pub fn compress<R: Rng + ?Sized>(&self, z: &[f64], rng: &mut R) -> Result<CompressedMessage, CompressError> {
        Ok(self.prepare(z)?.draw(rng))
    }

    /// Validates `z` and runs any input-dependent planning once, so repeated
    /// draws for the same vector skip it.
    pub fn prepare<'a>(&'a self, z: &'a [f64]) -> Result<Prepared<'a>, CompressError> {
        check_input(z)?;
        let plan = match self.spec {
            CompressorSpec::Hybrid { c, p } => Some(hybrid::plan_with_p(z, c, p, &self.model)),
            _ => None,
        };
        Ok(Prepared { compressor: self, z, plan })
    }
}

fn check_input(z: &[f64]) -> Result<(), CompressError> {
    if z.is_empty() {
        return Err(CompressError::Empty);
    }
    match z.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(CompressError::NonFinite(i)),
        None => Ok(()),
    }
}

/// A validated input ready for repeated draws.
pub struct Prepared<'a> {
    compressor: &'a Compressor,
    z: &'a [f64],
    plan: Option<HybridPlan>,
}

impl Prepared<'_> {
    pub fn plan(&self) -> Option<&HybridPlan> {
        self.plan.as_ref()
    }

    /// Exact per-coordinate standard deviation of `C(z)_i`, ignoring value
    /// rounding.
    pub fn coordinate_std(&self) -> Vec<f64> {
        let z = self.z;
        let keep = |v: f64, p: f64| v.abs() * ((1.0 - p) / p).sqrt();
        match self.compressor.spec {
            CompressorSpec::Identity => vec![0.0; z.len()],
            CompressorSpec::Sparsifier { p } => z.iter().map(|&v| keep(v, p)).collect(),
            CompressorSpec::Ternary => {
                let m = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                z.iter().map(|v| (v.abs() * (m - v.abs())).sqrt()).collect()
            }
            CompressorSpec::Hybrid { .. } => {
                let plan = self.plan.as_ref().expect("hybrid input was planned");
                z.iter()
                    .zip(plan.tags())
                    .map(|(&v, g)| match g {
                        0 => keep(v, plan.p),
                        g => (v.abs() * (z[plan.anchors[g - 1]].abs() - v.abs())).sqrt(),
                    })
                    .collect()
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> CompressedMessage {
        let model = &self.compressor.model;
        let z = self.z;
        match self.compressor.spec {
            CompressorSpec::Identity => {
                let decoded = z.iter().map(|&v| model.wire.round(v)).collect();
                CompressedMessage::finish(Scheme::Raw, decoded, None, None, model)
            }
            CompressorSpec::Sparsifier { p } => {
                let decoded = z.iter().map(|&v| sparsify(v, p, rng.random(), model.wire)).collect();
                CompressedMessage::finish(Scheme::Sparsifier, decoded, None, None, model)
            }
            CompressorSpec::Ternary => {
                let m = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let mw = model.wire.round(m);
                let decoded = z
                    .iter()
                    .map(|&v| {
                        let u: f64 = rng.random();
                        if m > 0.0 && u < v.abs() / m {
                            mw.copysign(v)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                CompressedMessage::finish(Scheme::Ternary, decoded, None, None, model)
            }
            CompressorSpec::Hybrid { .. } => {
                let plan = self.plan.as_ref().expect("hybrid input was planned");
                hybrid::realize(plan, z, rng, model)
            }
        }
    }
}

#[inline]
fn sparsify(v: f64, p: f64, u: f64, width: ValueWidth) -> f64 {
    if u < p && v != 0.0 {
        width.round(v / p)
    } else {
        0.0
    }
}

/// Realizes a precomputed hybrid plan for `z`.
pub fn hybrid_compress<R: Rng + ?Sized>(
    plan: &HybridPlan,
    z: &[f64],
    rng: &mut R,
    model: &CostModel,
) -> Result<CompressedMessage, CompressError> {
    check_input(z)?;
    if !plan.matches(z) {
        return Err(CompressError::PlanMismatch);
    }
    Ok(hybrid::realize(plan, z, rng, model))
}

/// Analytic ternary noise power `Σ |z_i| (‖z‖_∞ − |z_i|)`.
pub fn ternary_noise_power(z: &[f64]) -> f64 {
    let m = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    z.iter().map(|v| v.abs() * (m - v.abs())).sum()
}

/// Monte-Carlo summary of a compressor on a fixed input.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressorStats {
    pub trials: usize,
    /// Per-coordinate sample mean of `C(z) − z`.
    pub mean_error: Vec<f64>,
    /// Per-coordinate standard error of that mean (sample std / √trials).
    pub std_error: Vec<f64>,
    /// `‖mean(C(z)) − z‖`.
    pub bias_norm: f64,
    /// Sample mean of `‖ε‖²`.
    pub mean_noise_power: f64,
    /// Standard error of `mean_noise_power`.
    pub noise_power_std_error: f64,
    /// `‖z‖² / mean_noise_power`; `+∞` when no noise was observed.
    pub empirical_snr: f64,
    pub mean_paper_cost_bits: f64,
    pub mean_wire_cost_bits: f64,
}

impl CompressorStats {
    pub fn empirical_snr_db(&self) -> f64 {
        10.0 * self.empirical_snr.log10()
    }
}

/// Runs `trials` independent draws of the compressor on `z`.
pub fn estimate_stats<R: Rng + ?Sized>(
    compressor: &Compressor,
    z: &[f64],
    trials: usize,
    rng: &mut R,
) -> Result<CompressorStats, CompressError> {
    if trials < 2 {
        return Err(CompressError::TooFewTrials(2));
    }
    let prepared = compressor.prepare(z)?;
    let d = z.len();
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    let (mut noise, mut noise_sq, mut paper, mut wire) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..trials {
        let msg = prepared.draw(rng);
        let mut power = 0.0;
        for i in 0..d {
            let e = msg.decoded[i] - z[i];
            sum[i] += e;
            sum_sq[i] += e * e;
            power += e * e;
        }
        noise += power;
        noise_sq += power * power;
        paper += msg.paper_cost_bits as f64;
        wire += msg.wire_cost_bits as f64;
    }
    let m = trials as f64;
    let mean_error: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let std_error = (0..d)
        .map(|i| {
            let var = ((sum_sq[i] - sum[i] * sum[i] / m) / (m - 1.0)).max(0.0);
            (var / m).sqrt()
        })
        .collect();
    let mean_noise_power = noise / m;
    let noise_var = ((noise_sq - noise * noise / m) / (m - 1.0)).max(0.0);
    let signal: f64 = z.iter().map(|v| v * v).sum();
    Ok(CompressorStats {
        trials,
        bias_norm: mean_error.iter().map(|e| e * e).sum::<f64>().sqrt(),
        mean_error,
        std_error,
        mean_noise_power,
        noise_power_std_error: (noise_var / m).sqrt(),
        empirical_snr: if mean_noise_power > 0.0 { signal / mean_noise_power } else { f64::INFINITY },
        mean_paper_cost_bits: paper / m,
        mean_wire_cost_bits: wire / m,
    })
}

/// SNR in decibels, `10 log₁₀ η`.
pub fn snr_to_db(eta: f64) -> f64 {
    10.0 * eta.log10()
}

pub fn db_to_snr(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
