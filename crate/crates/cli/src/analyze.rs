//! `analyze-matrix`: validation, spectrum and convergence thresholds.

use std::fmt::Write as _;
use std::path::Path;

use dcdgd::consensus::{self, SpectralReport, TheoryThresholds};

use crate::setup::load_network;
use crate::CliError;

#[derive(Debug, Clone)]
pub struct MatrixAnalysis {
    pub name: String,
    pub nodes: usize,
    pub edges: usize,
    pub spectral: SpectralReport,
    pub thresholds: TheoryThresholds,
    /// `(η, alpha_max(η))` for `η ∈ {1.1 eta_min, 1, 2, 4}`.
    pub alpha_table: Vec<(f64, f64)>,
}

pub fn analyze_matrix(path: &Path, smoothness: f64) -> Result<MatrixAnalysis, CliError> {
    let net = load_network(path)?;
    let spectral = consensus::spectral(&net.matrix).map_err(|e| CliError::Input(e.to_string()))?;
    let thresholds = consensus::thresholds(&spectral, smoothness).map_err(|e| CliError::Input(e.to_string()))?;
    let alpha_table =
        [thresholds.eta_min * 1.1, 1.0, 2.0, 4.0].into_iter().map(|eta| (eta, thresholds.alpha_max(eta))).collect();
    Ok(MatrixAnalysis {
        name: net.name,
        nodes: net.matrix.n(),
        edges: net.matrix.topology().edges().count(),
        spectral,
        thresholds,
        alpha_table,
    })
}

impl MatrixAnalysis {
    pub fn render(&self) -> String {
        let s = &self.spectral;
        let t = &self.thresholds;
        let mut out = String::new();
        let _ = writeln!(out, "matrix {}: valid ({} nodes, {} edges)", self.name, self.nodes, self.edges);
        let eig: Vec<String> = s.eigenvalues.iter().map(|v| format!("{v:.6}")).collect();
        let _ = writeln!(out, "eigenvalues      {}", eig.join(" "));
        let _ = writeln!(out, "lambda_2         {:.6}", s.lambda2);
        let _ = writeln!(out, "lambda_N         {:.6}", s.lambda_n);
        let _ = writeln!(out, "beta             {:.6}", s.beta);
        let _ = writeln!(out, "eigen residual   {:.3e} ({} sweeps)", s.eigen_tolerance, s.sweeps);
        let _ = writeln!(out, "eta_min          {:.6}", t.eta_min);
        let _ = writeln!(out, "sparsifier p_min {:.6}", t.p_min);
        let _ = writeln!(out, "alpha_max at L = {}:", t.smoothness);
        for (eta, a) in &self.alpha_table {
            let note = if *a > 0.0 { "" } else { "  (infeasible)" };
            let _ = writeln!(out, "  eta {eta:<10.6} alpha_max {a:.6}{note}");
        }
        out
    }
}
