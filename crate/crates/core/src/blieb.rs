//! Brascamp–Lieb exponents for approximate decompositions of the identity.
//!
//! For `A = Σ c_j u_j⊗u_j` with `I ⪯ A ⪯ γI` the exponents
//! `κ_j = c_j⟨A⁻¹u_j, u_j⟩` sum to `n`, and for all positive `λ`
//!
//! ```text
//! γⁿ det(Σ κ_j λ_j u_j⊗u_j) ≥ Π λ_j^{κ_j}
//! ```
//!
//! which bounds the Gaussian Brascamp–Lieb constant by `γ^{n/2}`. Every
//! quantity is handled in log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sandwich_gamma, Cholesky, SymMatrix, DOMINATION_SLACK};

pub const DEFAULT_SWEEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BLWeights {
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
    #[serde(skip)]
    pub c: Vec<f64>,
    pub kappa: Vec<f64>,
    /// Smallest `γ` with `γκ_j ≥ c_j` for every `j` and the determinant
    /// inequality valid: `λ_max / min(1, λ_min)`.
    pub gamma: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl BLWeights {
    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn kappa_sum(&self) -> f64 {
        self.kappa.iter().sum()
    }

    /// `Σ κ_j λ_j u_j⊗u_j`
    pub fn weighted_matrix(&self, lambdas: &[f64]) -> SymMatrix {
        let w: Vec<f64> = self.kappa.iter().zip(lambdas).map(|(k, l)| k * l).collect();
        SymMatrix::weighted_outer_sum(&self.vectors, &w)
    }
}

/// `κ_j = c_j⟨A⁻¹u_j, u_j⟩` for `A = Σ c_j u_j⊗u_j`; requires
/// `λ_min(A) ≥ 1 − 1e−7`.
pub fn kappa_weights(u: &[Vec<f64>], c: &[f64]) -> Result<BLWeights> {
    if u.is_empty() || u.len() != c.len() {
        return Err(Error::Value("vectors and weights must be non-empty and aligned".into()));
    }
    let a = SymMatrix::weighted_outer_sum(u, c);
    let cert = sandwich_gamma(&a);
    if !(cert.lambda_min >= 1.0 - DOMINATION_SLACK) {
        return Err(Error::NotDominatingIdentity(cert.lambda_min));
    }
    let chol = Cholesky::new(&a)?;
    let kappa = u
        .iter()
        .zip(c)
        .map(|(uj, &cj)| cj * crate::linalg::dot(&chol.solve(uj), uj))
        .collect();
    Ok(BLWeights {
        vectors: u.to_vec(),
        c: c.to_vec(),
        kappa,
        gamma: cert.lambda_max / cert.lambda_min.min(1.0),
        lambda_min: cert.lambda_min,
        lambda_max: cert.lambda_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn log_det(m: &SymMatrix) -> f64 {
    Cholesky::new(m).map_or(f64::NEG_INFINITY, |c| c.log_det())
}

/// `n log γ + log det(Σ κ_j λ_j u_j⊗u_j)` against `Σ κ_j log λ_j`.
pub fn check_det_inequality(w: &BLWeights, lambdas: &[f64]) -> DetCheck {
    assert_eq!(lambdas.len(), w.kappa.len());
    let n = w.dim() as f64;
    let lhs = n * w.gamma.ln() + log_det(&w.weighted_matrix(lambdas));
    let rhs: f64 = w.kappa.iter().zip(lambdas).map(|(k, l)| k * l.ln()).sum();
    DetCheck {
        lhs,
        rhs,
        holds: lhs >= rhs - 1e-12 * rhs.abs().max(1.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSearch {
    /// Smallest visited `det(Σ κ_j λ_j u_j⊗u_j) / Π λ_j^{κ_j}`.
    pub f_estimate: f64,
    /// `F^{−1/2}`
    pub d_estimate: f64,
    pub lambdas: Vec<f64>,
    /// Whether the last sweep stopped changing the objective.
    pub converged: bool,
}

/// Coordinate descent on `log F(λ)` from `λ = 1`. Each coordinate is
/// minimized in closed form: with `B` the matrix without term `j` and
/// `α = κ_j⟨B⁻¹u_j, u_j⟩`, `det` is affine in `λ_j` and the optimum is
/// `λ_j = κ_j / ((1 − κ_j) α)`.
pub fn bl_gaussian_search(w: &BLWeights, sweeps: usize) -> GaussianSearch {
    let s = w.kappa.len();
    let mut x = vec![0.0_f64; s];
    let objective = |x: &[f64]| -> f64 {
        let lambdas: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        log_det(&w.weighted_matrix(&lambdas)) - w.kappa.iter().zip(x).map(|(k, v)| k * v).sum::<f64>()
    };
    let mut best = objective(&x);
    let mut best_x = x.clone();
    let mut converged = false;
    for _ in 0..sweeps {
        let before = best;
        for j in 0..s {
            let kj = w.kappa[j];
            if kj >= 1.0 - 1e-12 {
                continue;
            }
            let mut weights: Vec<f64> = (0..s).map(|i| w.kappa[i] * x[i].exp()).collect();
            weights[j] = 0.0;
            let b = SymMatrix::weighted_outer_sum(&w.vectors, &weights);
            let Ok(chol) = Cholesky::new(&b) else {
                continue;
            };
            let alpha = kj * crate::linalg::dot(&chol.solve(&w.vectors[j]), &w.vectors[j]);
            if !(alpha > 0.0) {
                continue;
            }
            let target = (kj / ((1.0 - kj) * alpha)).ln().clamp(-700.0, 700.0);
            let old = x[j];
            x[j] = target;
            let value = objective(&x);
            if value < best {
                best = value;
                best_x.clone_from(&x);
            } else if !(value <= best + 1e-12 * best.abs().max(1.0)) {
                x[j] = old;
            }
        }
        if (before - best).abs() <= 1e-14 * best.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    GaussianSearch {
        f_estimate: best.exp(),
        d_estimate: (-0.5 * best).exp(),
        lambdas: best_x.iter().map(|v| v.exp()).collect(),
        converged,
    }
}
