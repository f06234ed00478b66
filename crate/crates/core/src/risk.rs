//! Budget-constrained minimum-risk portfolios for a concrete return matrix.
//!
//! With the budget `Σ w_k = N` and covariance `J = XXᵀ`, the optimum is
//! `w = N J⁻¹e / (eᵀJ⁻¹e)`. Everything below comes from a single Cholesky
//! factorization of `J` and one solve `y = J⁻¹e`:
//!
//! * risk per asset `ε = N / (2 eᵀy)`,
//! * concentration `q_w = N yᵀy / (eᵀy)²` (so `eᵀJ⁻²e` is never formed),
//! * the finite-N free energy of the Boltzmann posterior restricted to the
//!   budget hyperplane, under the `(2π)^{-N/2}` prior measure:
//!   `f(β) = ε + [(N−1) log β + log det J + log eᵀy + log 2π] / (2Nβ)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, factorize_spd, SpdFactorization, SymMatrix};
use crate::market::{covariance, ReturnMatrix};

/// Portfolio weights satisfying the budget constraint `Σ w_k = N`.
/// Short positions are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    weights: Vec<f64>,
}

impl Portfolio {
    /// Budget tolerance, relative to N.
    pub const BUDGET_TOL: f64 = 1e-8;

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let n = weights.len() as f64;
        if weights.is_empty() {
            return Err(Error::domain("portfolio needs at least one asset"));
        }
        let total: f64 = weights.iter().sum();
        if (total - n).abs() > Self::BUDGET_TOL * n {
            return Err(Error::Constraint(format!(
                "weights sum to {total}, budget requires {n}"
            )));
        }
        Ok(Portfolio { weights })
    }

    /// `w = e`, one unit in every asset.
    pub fn equipartition(n_assets: usize) -> Self {
        Portfolio {
            weights: vec![1.0; n_assets],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_assets(&self) -> usize {
        self.weights.len()
    }
}

/// Minimal risk per asset and concentration of the optimal portfolio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub epsilon: f64,
    pub q_w: f64,
    /// `p / N`, known only when the report was built from a return matrix.
    pub realized_alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergySample {
    pub beta: f64,
    pub f_value: f64,
}

/// `H(w|X) = ½ Σ_μ (Σ_k X_kμ w_k)²`, equivalently `½ wᵀJw`.
///
/// `w` is not required to satisfy the budget.
pub fn investment_risk(w: &[f64], x: &ReturnMatrix) -> Result<f64> {
    if w.len() != x.n_assets() {
        return Err(Error::Dimension {
            expected: x.n_assets(),
            got: w.len(),
        });
    }
    let mut v = vec![0.0; x.n_scenarios()];
    for (k, &wk) in w.iter().enumerate() {
        if wk == 0.0 {
            continue;
        }
        for (vm, &xkm) in v.iter_mut().zip(x.asset_row(k)) {
            *vm += xkm * wk;
        }
    }
    Ok(0.5 * dot(&v, &v))
}

/// Solution of `J y = e` plus the scalars every indicator needs.
struct BudgetSolve {
    n: f64,
    y: Vec<f64>,
    ey: f64,
    yy: f64,
}

impl BudgetSolve {
    fn new(f: &SpdFactorization) -> Result<Self> {
        let n = f.order();
        let y = f.solve(&vec![1.0; n])?;
        let ey = y.iter().sum();
        let yy = dot(&y, &y);
        Ok(BudgetSolve {
            n: n as f64,
            y,
            ey,
            yy,
        })
    }

    fn epsilon(&self) -> f64 {
        self.n / (2.0 * self.ey)
    }

    fn q_w(&self) -> f64 {
        self.n * self.yy / (self.ey * self.ey)
    }

    fn free_energy(&self, beta: f64, logdet: f64) -> f64 {
        self.epsilon()
            + ((self.n - 1.0) * beta.ln() + logdet + self.ey.ln() + TAU.ln())
                / (2.0 * self.n * beta)
    }
}

/// `w = N J⁻¹e / (eᵀJ⁻¹e)`.
pub fn optimal_portfolio(j: &SymMatrix) -> Result<Portfolio> {
    let sol = BudgetSolve::new(&factorize_spd(j)?)?;
    let scale = sol.n / sol.ey;
    Ok(Portfolio {
        weights: sol.y.iter().map(|v| v * scale).collect(),
    })
}

/// Minimal investment risk per asset and concentration level.
///
/// Fails with [`Error::Singular`] when `J` is not positive definite, which
/// for Gram matrices means `p <= N`; there the optimum is not unique, the
/// risk per asset is 0 and the concentration diverges.
pub fn minimal_risk(j: &SymMatrix) -> Result<RiskReport> {
    let sol = BudgetSolve::new(&factorize_spd(j)?)?;
    Ok(RiskReport {
        epsilon: sol.epsilon(),
        q_w: sol.q_w(),
        realized_alpha: None,
    })
}

/// [`minimal_risk`] for the covariance of `x`, tagged with `p / N`.
///
/// Fails with [`Error::Singular`] whenever `p ≤ N`, including the boundary
/// `p = N` where `J` is invertible in exact arithmetic but the optimum is
/// already in the degenerate regime.
pub fn assess(x: &ReturnMatrix) -> Result<RiskReport> {
    require_excess_scenarios(x)?;
    let mut report = minimal_risk(&covariance(x))?;
    report.realized_alpha = Some(x.realized_alpha());
    Ok(report)
}

/// `J` has rank at most `p`, so with `p ≤ N` pivot `p` (zero-based) is the
/// first one that cannot be positive.
pub fn require_excess_scenarios(x: &ReturnMatrix) -> Result<()> {
    if x.n_scenarios() <= x.n_assets() {
        return Err(Error::Singular {
            pivot: x.n_scenarios().min(x.n_assets() - 1),
            value: 0.0,
        });
    }
    Ok(())
}

/// `q_w = (1/N) Σ w_k²`.
pub fn concentration_level(w: &Portfolio) -> f64 {
    let ws = w.weights();
    dot(ws, ws) / ws.len() as f64
}

/// Helmholtz free energy per asset `f(β, X) = −log Z(β, X) / (Nβ)`.
pub fn free_energy(beta: f64, x: &ReturnMatrix) -> Result<FreeEnergySample> {
    require_excess_scenarios(x)?;
    Ok(FreeEnergySample {
        beta,
        f_value: free_energy_of(beta, &covariance(x))?,
    })
}

/// Free energy from a covariance matrix directly.
pub fn free_energy_of(beta: f64, j: &SymMatrix) -> Result<f64> {
    check_beta(beta)?;
    let f = factorize_spd(j)?;
    Ok(BudgetSolve::new(&f)?.free_energy(beta, f.logdet()))
}

/// Risk report and, optionally, the free energy at `beta`, sharing one
/// factorization. This is the per-sample kernel of the ensemble runs.
pub fn analyze(j: &SymMatrix, beta: Option<f64>) -> Result<(RiskReport, Option<f64>)> {
    if let Some(b) = beta {
        check_beta(b)?;
    }
    let f = factorize_spd(j)?;
    let sol = BudgetSolve::new(&f)?;
    let report = RiskReport {
        epsilon: sol.epsilon(),
        q_w: sol.q_w(),
        realized_alpha: None,
    };
    Ok((report, beta.map(|b| sol.free_energy(b, f.logdet()))))
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("beta must be positive, got {beta}")))
    }
}
