use super::{dot, power_iteration, Dataset, LocalObjective, ObjectiveError};

/// Mean cross-entropy of a linear logistic model plus the non-convex
/// penalty `ρ Σ_d x_d² / (1 + x_d²)`.
#[derive(Debug, Clone)]
pub struct LogisticNonconvex {
    rows: Vec<Vec<f64>>,
    labels: Vec<f64>,
    rho: f64,
    dim: usize,
}

impl LogisticNonconvex {
    /// Builds the local objective over the listed rows of `data`.
    pub fn new(data: &Dataset, rows: &[usize], rho: f64) -> Result<Self, ObjectiveError> {
        if rows.is_empty() {
            return Err(ObjectiveError::EmptyPartition(0));
        }
        Ok(Self {
            rows: rows.iter().map(|&r| data.features[r].clone()).collect(),
            labels: rows.iter().map(|&r| data.labels[r]).collect(),
            rho,
            dim: data.feature_count(),
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn samples(&self) -> usize {
        self.labels.len()
    }

    pub fn regularizer(&self, x: &[f64]) -> f64 {
        self.rho * x.iter().map(|v| v * v / (1.0 + v * v)).sum::<f64>()
    }

    pub fn regularizer_grad(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| 2.0 * self.rho * v / (1.0 + v * v).powi(2)).collect()
    }
}

fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

impl LocalObjective for LogisticNonconvex {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        // -[y log σ(u) + (1-y) log(1-σ(u))] = softplus(u) - y u
        let loss: f64 = self
            .rows
            .iter()
            .zip(&self.labels)
            .map(|(r, y)| {
                let u = dot(r, x);
                softplus(u) - y * u
            })
            .sum();
        loss / self.samples() as f64 + self.regularizer(x)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let n = self.samples() as f64;
        let mut g = self.regularizer_grad(x);
        for (r, y) in self.rows.iter().zip(&self.labels) {
            let w = (sigmoid(dot(r, x)) - y) / n;
            for (gi, ri) in g.iter_mut().zip(r) {
                *gi += w * ri;
            }
        }
        g
    }

    /// `λ_max(ZᵀZ) / (4n) + 2ρ`: σ' ≤ 1/4 and the penalty's curvature peaks
    /// at 2ρ when `x_d = 0`.
    fn smoothness(&self) -> Result<f64, ObjectiveError> {
        let top = power_iteration(self.dim, |v| {
            let mut out = vec![0.0; self.dim];
            for r in &self.rows {
                let s = dot(r, v);
                for (o, ri) in out.iter_mut().zip(r) {
                    *o += s * ri;
                }
            }
            out
        })?;
        Ok(top / (4.0 * self.samples() as f64) + 2.0 * self.rho)
    }

    fn name(&self) -> String {
        format!("logistic(n={}, rho={})", self.samples(), self.rho)
    }
}
