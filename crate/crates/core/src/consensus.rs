//! Consensus matrices over undirected connected topologies.
//!
//! A consensus matrix `W` is symmetric, doubly stochastic, and supported on
//! the edges of the network (plus the diagonal). Its spectrum
//! `1 = λ₁ > λ₂ ≥ … ≥ λ_N > −1` determines how fast local copies mix, and
//! `λ_N` alone fixes the smallest compressor SNR for which a positive
//! constant step-size exists.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::tolerance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("a topology needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("edge ({0}, {1}) has an endpoint outside [0, {2})")]
    EndpointOutOfRange(usize, usize, usize),
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("topology is disconnected: node {0} is unreachable from node 0")]
    Disconnected(usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Undirected simple graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Topology {
    /// Builds a topology. Connectivity is not required here; constructors of
    /// consensus matrices check it.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewNodes(n));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(GraphError::EndpointOutOfRange(i, j, n));
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            set.insert((i.min(j), i.max(j)));
        }
        Ok(Self { n, edges: set })
    }

    pub fn ring(n: usize) -> Result<Self, GraphError> {
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn path(n: usize) -> Result<Self, GraphError> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as `(min, max)` pairs in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| j != i && self.has_edge(i, j)).collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == i || b == i).count()
    }

    /// Breadth-first reachability from node 0.
    pub fn check_connected(&self) -> Result<(), GraphError> {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for v in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(node) => Err(GraphError::Disconnected(node)),
            None => Ok(()),
        }
    }

    /// Parses `n` on the first line followed by one `i j` pair per line.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut lines = content_lines(text);
        let (line, first) = lines.next().ok_or(GraphError::Parse { line: 1, msg: "empty topology file".into() })?;
        let n: usize = first
            .trim()
            .parse()
            .map_err(|_| GraphError::Parse { line, msg: format!("expected node count, found {first:?}") })?;
        let mut edges = Vec::new();
        for (line, text) in lines {
            let parts: Vec<&str> = text.split_whitespace().collect();
            let parsed = match parts.as_slice() {
                [a, b] => a.parse::<usize>().ok().zip(b.parse::<usize>().ok()),
                _ => None,
            };
            let edge =
                parsed.ok_or_else(|| GraphError::Parse { line, msg: format!("expected `i j`, found {text:?}") })?;
            edges.push(edge);
        }
        Self::new(n, edges)
    }

    /// Topology implied by the off-diagonal support of a square matrix.
    pub fn from_support(raw: &[Vec<f64>]) -> Result<Self, GraphError> {
        let n = raw.len();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let wij = raw[i].get(j).copied().unwrap_or(0.0);
                let wji = raw.get(j).and_then(|r| r.get(i)).copied().unwrap_or(0.0);
                if wij != 0.0 || wji != 0.0 {
                    edges.push((i, j));
                }
            }
        }
        Self::new(n, edges)
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// One violated consensus-matrix property.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TooSmall(usize),
    NotSquare { row: usize, len: usize, expected: usize },
    SizeMismatch { matrix: usize, topology: usize },
    NonFinite { i: usize, j: usize },
    Negative { i: usize, j: usize, value: f64 },
    Asymmetric { i: usize, j: usize, diff: f64 },
    RowSum { row: usize, sum: f64 },
    ColumnSum { col: usize, sum: f64 },
    Sparsity { i: usize, j: usize, value: f64 },
    Disconnected(usize),
    Spectrum(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooSmall(n) => write!(f, "matrix must be at least 2x2, got {n}x{n}"),
            Violation::NotSquare { row, len, expected } => {
                write!(f, "row {row} has {len} entries, expected {expected}")
            }
            Violation::SizeMismatch { matrix, topology } => {
                write!(f, "matrix is {matrix}x{matrix} but topology has {topology} nodes")
            }
            Violation::NonFinite { i, j } => write!(f, "entry ({i}, {j}) is not finite"),
            Violation::Negative { i, j, value } => {
                write!(f, "entry ({i}, {j}) = {value} is negative")
            }
            Violation::Asymmetric { i, j, diff } => {
                write!(f, "asymmetric: |w[{i}][{j}] - w[{j}][{i}]| = {diff:e}")
            }
            Violation::RowSum { row, sum } => write!(f, "row sum of row {row} is {sum}, not 1"),
            Violation::ColumnSum { col, sum } => {
                write!(f, "column sum of column {col} is {sum}, not 1")
            }
            Violation::Sparsity { i, j, value } => {
                write!(f, "sparsity: entry ({i}, {j}) = {value} does not match the topology")
            }
            Violation::Disconnected(node) => {
                write!(f, "topology is disconnected at node {node}")
            }
            Violation::Spectrum(msg) => write!(f, "spectrum: {msg}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("invalid consensus matrix: {}", list(.0))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("eigen-solver did not converge: off-diagonal norm {off_diagonal:e} after {sweeps} sweeps")]
    NotConverged { off_diagonal: f64, sweeps: usize },
    #[error("eigenpair residual {0:e} exceeds tolerance")]
    Residual(f64),
    #[error("leading eigenpair is not (1, 1/sqrt(n)): {0}")]
    LeadingEigenpair(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn list(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl MatrixError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            MatrixError::Invalid(v) => v,
            _ => &[],
        }
    }
}

/// Validated symmetric doubly stochastic matrix with network sparsity.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusMatrix {
    n: usize,
    weights: Vec<f64>,
    topology: Topology,
}

impl ConsensusMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Nodes `j` (including `i` itself when `w_ii > 0`) with nonzero weight.
    pub fn support(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row(i).iter().enumerate().filter(|(_, &w)| w != 0.0).map(|(j, &w)| (j, w))
    }

    /// `(W ⊗ I_D) x` for a stacked iterate given as one vector per node.
    pub fn mix(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| {
                let mut out = vec![0.0; x[i].len()];
                for (j, w) in self.support(i) {
                    for (o, v) in out.iter_mut().zip(&x[j]) {
                        *o += w * v;
                    }
                }
                out
            })
            .collect()
    }

    /// `γ I + (1 − γ) W`, which shifts the spectrum towards 1 while keeping
    /// every consensus-matrix property.
    pub fn lazy(&self, gamma: f64) -> Result<Self, MatrixError> {
        let raw: Vec<Vec<f64>> = (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| {
                        let id = if i == j { gamma } else { 0.0 };
                        id + (1.0 - gamma) * self.get(i, j)
                    })
                    .collect()
            })
            .collect();
        load_matrix(&raw, &self.topology)
    }
}

/// Metropolis–Hastings weights: `w_ij = 1 / (1 + max(deg_i, deg_j))` on
/// edges, the diagonal absorbs the remainder of each row.
pub fn build_metropolis(topology: &Topology) -> Result<ConsensusMatrix, MatrixError> {
    topology.check_connected()?;
    let n = topology.n();
    let deg: Vec<usize> = (0..n).map(|i| topology.degree(i)).collect();
    let mut raw = vec![vec![0.0; n]; n];
    for (i, j) in topology.edges() {
        let w = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
        raw[i][j] = w;
        raw[j][i] = w;
    }
    for (i, row) in raw.iter_mut().enumerate() {
        let off: f64 = row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, w)| w).sum();
        row[i] = 1.0 - off;
    }
    load_matrix(&raw, topology)
}

/// Uniform averaging `(1/N) 1 1ᵀ` over the complete graph.
pub fn build_uniform(n: usize) -> Result<ConsensusMatrix, MatrixError> {
    let topology = Topology::complete(n)?;
    let raw = vec![vec![1.0 / n as f64; n]; n];
    load_matrix(&raw, &topology)
}

/// Ring of `n ≥ 3` nodes with self-weight `a` and `(1 − a)/2` on each
/// neighbor.
pub fn build_ring(n: usize, self_weight: f64) -> Result<ConsensusMatrix, MatrixError> {
    let topology = Topology::ring(n)?;
    let off = (1.0 - self_weight) / 2.0;
    let raw: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            row[i] = self_weight;
            row[(i + 1) % n] += off;
            row[(i + n - 1) % n] += off;
            row
        })
        .collect();
    load_matrix(&raw, &topology)
}

/// Validates a raw square matrix against every consensus-matrix property.
/// Pairs that are symmetric within [`tolerance::SYMMETRY`] are stored
/// exactly symmetric (averaged).
#[allow(clippy::needless_range_loop)] // (i, j) entries are reported by index
pub fn load_matrix(raw: &[Vec<f64>], topology: &Topology) -> Result<ConsensusMatrix, MatrixError> {
    let n = raw.len();
    let mut violations = Vec::new();
    if n < 2 {
        return Err(MatrixError::Invalid(vec![Violation::TooSmall(n)]));
    }
    for (row, r) in raw.iter().enumerate() {
        if r.len() != n {
            violations.push(Violation::NotSquare { row, len: r.len(), expected: n });
        }
    }
    if !violations.is_empty() {
        return Err(MatrixError::Invalid(violations));
    }
    if topology.n() != n {
        return Err(MatrixError::Invalid(vec![Violation::SizeMismatch { matrix: n, topology: topology.n() }]));
    }
    if let Err(GraphError::Disconnected(node)) = topology.check_connected() {
        violations.push(Violation::Disconnected(node));
    }

    for i in 0..n {
        for j in 0..n {
            let w = raw[i][j];
            if !w.is_finite() {
                violations.push(Violation::NonFinite { i, j });
                continue;
            }
            if w < 0.0 {
                violations.push(Violation::Negative { i, j, value: w });
            }
            if i != j && w != 0.0 && !topology.has_edge(i, j) {
                violations.push(Violation::Sparsity { i, j, value: w });
            }
            if i != j && w <= 0.0 && topology.has_edge(i, j) {
                violations.push(Violation::Sparsity { i, j, value: w });
            }
            if j > i {
                let diff = (w - raw[j][i]).abs();
                if diff > tolerance::SYMMETRY || !raw[j][i].is_finite() {
                    violations.push(Violation::Asymmetric { i, j, diff });
                }
            }
        }
    }
    if !violations.is_empty() {
        return Err(MatrixError::Invalid(violations));
    }

    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            weights[i * n + j] = if i == j { raw[i][i] } else { 0.5 * (raw[i][j] + raw[j][i]) };
        }
    }
    for i in 0..n {
        let sum: f64 = weights[i * n..(i + 1) * n].iter().sum();
        if (sum - 1.0).abs() > tolerance::STOCHASTIC_SUM {
            violations.push(Violation::RowSum { row: i, sum });
        }
        let col: f64 = (0..n).map(|r| weights[r * n + i]).sum();
        if (col - 1.0).abs() > tolerance::STOCHASTIC_SUM {
            violations.push(Violation::ColumnSum { col: i, sum: col });
        }
    }
    if !violations.is_empty() {
        return Err(MatrixError::Invalid(violations));
    }

    let matrix = ConsensusMatrix { n, weights, topology: topology.clone() };
    let report = spectral(&matrix)?;
    if report.lambda_n <= -1.0 + tolerance::UNIT_EIGENVALUE {
        violations.push(Violation::Spectrum(format!("smallest eigenvalue {} is not above -1", report.lambda_n)));
    }
    if report.lambda2 >= 1.0 - tolerance::UNIT_EIGENVALUE {
        violations
            .push(Violation::Spectrum(format!("eigenvalue 1 is not simple (second eigenvalue {})", report.lambda2)));
    }
    if violations.is_empty() {
        Ok(matrix)
    } else {
        Err(MatrixError::Invalid(violations))
    }
}

/// Parses and validates a matrix file, taking the network from the
/// off-diagonal support.
pub fn read_matrix(text: &str) -> Result<ConsensusMatrix, MatrixError> {
    let raw = parse_matrix(text)?;
    let topology = Topology::from_support(&raw)?;
    load_matrix(&raw, &topology)
}

/// Parses `n` on the first line followed by `n` rows of `n` numbers.
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>, MatrixError> {
    let mut lines = content_lines(text);
    let (line, first) = lines.next().ok_or(MatrixError::Parse { line: 1, msg: "empty matrix file".into() })?;
    let n: usize = first
        .parse()
        .map_err(|_| MatrixError::Parse { line, msg: format!("expected matrix size, found {first:?}") })?;
    let mut rows = Vec::with_capacity(n);
    for (line, text) in lines {
        let row = text
            .split_whitespace()
            .map(|tok| parse_number(tok).ok_or(tok))
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|tok| MatrixError::Parse { line, msg: format!("not a number: {tok:?}") })?;
        rows.push(row);
    }
    if rows.len() != n {
        return Err(MatrixError::Parse {
            line: text.lines().count(),
            msg: format!("expected {n} rows, found {}", rows.len()),
        });
    }
    Ok(rows)
}

/// Accepts decimals and simple fractions such as `2/5`.
fn parse_number(tok: &str) -> Option<f64> {
    match tok.split_once('/') {
        Some((a, b)) => Some(a.parse::<f64>().ok()? / b.parse::<f64>().ok()?),
        None => tok.parse().ok(),
    }
}

/// Eigen-decomposition summary of a consensus matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    /// All eigenvalues in descending order; `eigenvalues[0] ≈ 1`.
    pub eigenvalues: Vec<f64>,
    pub lambda2: f64,
    pub lambda_n: f64,
    /// `max(|λ₂|, |λ_N|)`.
    pub beta: f64,
    /// Largest eigenpair residual `‖W v − λ v‖ / ‖v‖` achieved by the solver.
    pub eigen_tolerance: f64,
    /// `β = 0`: only the rank-one averaging matrix has this.
    pub degenerate: bool,
    pub sweeps: usize,
}

/// Cyclic Jacobi eigenvalues and eigenvectors (columns of the returned
/// row-major matrix) of a dense symmetric matrix.
pub fn jacobi_eigen(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>, usize), MatrixError> {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&a) >= tolerance::JACOBI_OFF_DIAGONAL {
        if sweeps == tolerance::JACOBI_MAX_SWEEPS {
            return Err(MatrixError::NotConverged { off_diagonal: off(&a), sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i * n + i]).collect();
    Ok((values, v, sweeps))
}

/// Full spectrum of `W` with residual and leading-eigenpair checks.
pub fn spectral(w: &ConsensusMatrix) -> Result<SpectralReport, MatrixError> {
    let n = w.n();
    let (values, vectors, sweeps) = jacobi_eigen(&w.weights, n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let mut worst = 0.0f64;
    for k in 0..n {
        let col: Vec<f64> = (0..n).map(|i| vectors[i * n + k]).collect();
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        let res = (0..n)
            .map(|i| {
                let wv: f64 = (0..n).map(|j| w.get(i, j) * col[j]).sum();
                (wv - values[k] * col[i]).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        worst = worst.max(res / norm);
    }
    if worst > tolerance::EIGEN_RESIDUAL {
        return Err(MatrixError::Residual(worst));
    }

    let lead = order[0];
    if (values[lead] - 1.0).abs() > tolerance::UNIT_EIGENVALUE {
        return Err(MatrixError::LeadingEigenpair(format!("largest eigenvalue is {}", values[lead])));
    }
    let target = 1.0 / (n as f64).sqrt();
    let sign = vectors[lead].signum();
    let spread = (0..n).map(|i| (sign * vectors[i * n + lead] - target).abs()).fold(0.0, f64::max);
    // Only meaningful when 1 is a simple eigenvalue; load_matrix reports the
    // multiplicity separately.
    let second = values[order[1]];
    if spread > 1e-6 && (second - 1.0).abs() > tolerance::UNIT_EIGENVALUE {
        return Err(MatrixError::LeadingEigenpair(format!(
            "eigenvector deviates from the all-ones direction by {spread:e}"
        )));
    }

    let eigenvalues: Vec<f64> = order.iter().map(|&k| values[k]).collect();
    let lambda2 = eigenvalues[1];
    let lambda_n = eigenvalues[n - 1];
    let beta = lambda2.abs().max(lambda_n.abs());
    Ok(SpectralReport {
        eigenvalues,
        lambda2,
        lambda_n,
        beta,
        eigen_tolerance: worst,
        degenerate: beta < tolerance::DEGENERATE_BETA,
        sweeps,
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThresholdError {
    #[error("smallest eigenvalue {0} is not above -1")]
    InvalidLambda(f64),
    #[error("smoothness constant must be positive, got {0}")]
    InvalidSmoothness(f64),
}

/// SNR and step-size thresholds induced by `λ_N` and the smoothness `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryThresholds {
    pub lambda_n: f64,
    pub smoothness: f64,
    /// Smallest admissible compressor SNR, `(1 − λ_N)/(1 + λ_N)`.
    pub eta_min: f64,
    /// Sparsifier keep-probability at `eta_min`: `eta_min/(1 + eta_min)`.
    pub p_min: f64,
}

impl TheoryThresholds {
    /// Largest constant step-size admitted at SNR `eta`:
    /// `(λ_N(η+1) + η − 1) / (L(1+η))`. Negative below `eta_min`.
    /// Infinite `eta` gives the noiseless limit `(1 + λ_N)/L`.
    pub fn alpha_max(&self, eta: f64) -> f64 {
        alpha_max(self.lambda_n, eta, self.smoothness)
    }

    pub fn feasible(&self, eta: f64) -> bool {
        eta > self.eta_min
    }
}

pub fn eta_min(lambda_n: f64) -> f64 {
    (1.0 - lambda_n) / (1.0 + lambda_n)
}

pub fn alpha_max(lambda_n: f64, eta: f64, smoothness: f64) -> f64 {
    if eta.is_infinite() {
        return (1.0 + lambda_n) / smoothness;
    }
    (lambda_n * (eta + 1.0) + eta - 1.0) / (smoothness * (1.0 + eta))
}

/// Sparsifier SNR floor `p/(1−p)`; infinite at `p = 1`.
pub fn sparsifier_snr(p: f64) -> f64 {
    if p >= 1.0 {
        f64::INFINITY
    } else {
        p / (1.0 - p)
    }
}

pub fn thresholds(report: &SpectralReport, smoothness: f64) -> Result<TheoryThresholds, ThresholdError> {
    thresholds_from_lambda(report.lambda_n, smoothness)
}

pub fn thresholds_from_lambda(lambda_n: f64, smoothness: f64) -> Result<TheoryThresholds, ThresholdError> {
    if lambda_n <= -1.0 || !lambda_n.is_finite() {
        return Err(ThresholdError::InvalidLambda(lambda_n));
    }
    if smoothness <= 0.0 || !smoothness.is_finite() {
        return Err(ThresholdError::InvalidSmoothness(smoothness));
    }
    let eta_min = eta_min(lambda_n);
    Ok(TheoryThresholds { lambda_n, smoothness, eta_min, p_min: eta_min / (1.0 + eta_min) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circulant5(diag: f64, off: f64) -> Vec<Vec<f64>> {
        (0..5)
            .map(|i| {
                (0..5)
                    .map(|j| {
                        let d = (i as isize - j as isize).rem_euclid(5);
                        match d {
                            0 => diag,
                            1 | 4 => off,
                            _ => 0.0,
                        }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn complete_graph_metropolis_is_uniform_average() {
        for n in [2, 3, 6] {
            let w = build_metropolis(&Topology::complete(n).unwrap()).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert!((w.get(i, j) - 1.0 / n as f64).abs() < 1e-15);
                }
            }
            let r = spectral(&w).unwrap();
            assert!((r.eigenvalues[0] - 1.0).abs() < 1e-12);
            for &l in &r.eigenvalues[1..] {
                assert!(l.abs() < 1e-12, "{l}");
            }
            assert!(r.degenerate);
        }
    }

    #[test]
    fn two_node_path() {
        let w = build_metropolis(&Topology::path(2).unwrap()).unwrap();
        assert_eq!(w.rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let r = spectral(&w).unwrap();
        assert!((r.lambda_n).abs() < 1e-14);
    }

    #[test]
    fn five_ring_metropolis_keeps_ring_pattern() {
        let topo = Topology::ring(5).unwrap();
        let w = build_metropolis(&topo).unwrap();
        for i in 0..5 {
            let sum: f64 = w.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-10);
            for j in 0..5 {
                assert_eq!(w.get(i, j) > 0.0, i == j || topo.has_edge(i, j));
                assert_eq!(w.get(i, j), w.get(j, i));
            }
        }
    }

    #[test]
    fn disconnected_topology_names_node() {
        let topo = Topology::new(4, [(0, 1), (2, 3)]).unwrap();
        match build_metropolis(&topo) {
            Err(MatrixError::Graph(GraphError::Disconnected(node))) => assert_eq!(node, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn topology_rejects_bad_edges() {
        assert_eq!(Topology::new(1, []), Err(GraphError::TooFewNodes(1)));
        assert_eq!(Topology::new(3, [(0, 3)]), Err(GraphError::EndpointOutOfRange(0, 3, 3)));
        assert_eq!(Topology::new(3, [(1, 1)]), Err(GraphError::SelfLoop(1)));
    }

    #[test]
    fn five_node_circle_matrices() {
        let topo = Topology::ring(5).unwrap();
        let w1 = load_matrix(&circulant5(0.2, 0.4), &topo).unwrap();
        let w2 = load_matrix(&circulant5(0.5, 0.25), &topo).unwrap();
        let r1 = spectral(&w1).unwrap();
        let r2 = spectral(&w2).unwrap();
        assert!((r1.lambda_n + 0.45).abs() <= 0.01, "{}", r1.lambda_n);
        assert!((r2.lambda_n - 0.09).abs() <= 0.01, "{}", r2.lambda_n);
        // closed form of a symmetric circulant: a + 2b cos(4π/5)
        let cos = (4.0 * std::f64::consts::PI / 5.0).cos();
        assert!((r1.lambda_n - (0.2 + 0.8 * cos)).abs() < 1e-12);
        assert!((r2.lambda_n - (0.5 + 0.5 * cos)).abs() < 1e-12);
        let t1 = thresholds(&r1, 1.0).unwrap();
        let t2 = thresholds(&r2, 1.0).unwrap();
        assert!((t1.p_min - 0.72).abs() <= 0.01, "{}", t1.p_min);
        assert!((t2.p_min - 0.45).abs() <= 0.01, "{}", t2.p_min);
    }

    #[test]
    fn one_by_one_is_rejected() {
        let topo = Topology::path(2).unwrap();
        let err = load_matrix(&[vec![1.0]], &topo).unwrap_err();
        assert_eq!(err.violations(), &[Violation::TooSmall(1)]);
    }

    #[test]
    fn perturbed_entry_reports_row_sum() {
        let topo = Topology::ring(5).unwrap();
        let mut raw = circulant5(0.2, 0.4);
        raw[2][2] += 1e-3;
        let err = load_matrix(&raw, &topo).unwrap_err();
        assert!(err.to_string().contains("row sum"), "{err}");
        assert!(
            err.violations().contains(&Violation::RowSum { row: 2, sum: 1.001 })
                || err.violations().iter().any(|v| matches!(v, Violation::RowSum { row: 2, .. }))
        );
    }

    #[test]
    fn asymmetry_and_sparsity_are_rejected() {
        let topo = Topology::ring(5).unwrap();
        let mut raw = circulant5(0.2, 0.4);
        raw[0][1] += 1e-9;
        raw[0][0] -= 1e-9;
        let err = load_matrix(&raw, &topo).unwrap_err();
        assert!(err.violations().iter().any(|v| matches!(v, Violation::Asymmetric { i: 0, j: 1, .. })));

        let path = Topology::path(5).unwrap();
        let err = load_matrix(&circulant5(0.2, 0.4), &path).unwrap_err();
        assert!(err.violations().iter().any(|v| matches!(v, Violation::Sparsity { .. })));
    }

    #[test]
    fn bipartite_swap_has_eigenvalue_minus_one() {
        let topo = Topology::path(2).unwrap();
        let err = load_matrix(&[vec![0.0, 1.0], vec![1.0, 0.0]], &topo).unwrap_err();
        assert!(matches!(err.violations()[0], Violation::Spectrum(_)));
    }

    #[test]
    fn eta_min_limits() {
        assert!(eta_min(0.9) < 0.06);
        assert!(eta_min(0.99) < 0.006);
        let mut prev = f64::INFINITY;
        for k in -9..=9 {
            let e = eta_min(k as f64 / 10.0);
            assert!(e < prev);
            prev = e;
        }
        let t = thresholds_from_lambda(0.0, 1.0).unwrap();
        assert_eq!(t.eta_min, 1.0);
    }

    #[test]
    fn alpha_max_hand_value_and_sign_change() {
        let t = thresholds_from_lambda(0.09, 1.0).unwrap();
        assert!((t.alpha_max(1.0) - 0.09).abs() < 1e-15);
        for lambda in [-0.45, 0.09, 0.5] {
            let t = thresholds_from_lambda(lambda, 2.5).unwrap();
            assert!(t.alpha_max(t.eta_min + 1e-9) > 0.0);
            assert!(t.alpha_max(t.eta_min + 1e-9) < 1e-8);
            assert!(t.alpha_max(t.eta_min - 1e-9) < 0.0);
            assert!(t.alpha_max(t.eta_min).abs() < 1e-14);
        }
    }

    #[test]
    fn thresholds_reject_invalid_inputs() {
        assert_eq!(thresholds_from_lambda(-1.0, 1.0), Err(ThresholdError::InvalidLambda(-1.0)));
        assert_eq!(thresholds_from_lambda(0.1, 0.0), Err(ThresholdError::InvalidSmoothness(0.0)));
    }

    #[test]
    fn parse_files() {
        let raw = parse_matrix("2\n0.5 0.5\n# comment\n1/2 1/2\n").unwrap();
        assert_eq!(raw, vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert!(matches!(parse_matrix("2\n0.5 x\n"), Err(MatrixError::Parse { line: 2, .. })));
        assert!(matches!(parse_matrix(""), Err(MatrixError::Parse { .. })));
        let topo = Topology::parse("3\n0 1\n1 2\n").unwrap();
        assert_eq!(topo.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert!(matches!(Topology::parse("3\n0 1 2\n"), Err(GraphError::Parse { line: 2, .. })));
    }

    #[test]
    fn lazy_shifts_spectrum() {
        let w = build_metropolis(&Topology::ring(10).unwrap()).unwrap();
        let r = spectral(&w).unwrap();
        assert!((r.lambda_n + 1.0 / 3.0).abs() < 1e-12);
        let lazy = w.lazy(0.5).unwrap();
        let rl = spectral(&lazy).unwrap();
        assert!((rl.lambda_n - (0.5 + 0.5 * r.lambda_n)).abs() < 1e-12);
    }
}
