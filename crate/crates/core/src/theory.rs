//! Closed-form quenched and annealed predictions.
//!
//! For i.i.d. standard normal returns with scenario ratio α = p/N:
//!
//! | quantity              | quenched (optimize, then average) | annealed (average, then optimize) |
//! |-----------------------|-----------------------------------|-----------------------------------|
//! | risk per asset ε      | (α−1)/2 for α > 1, else 0         | α/2                               |
//! | concentration q_w     | α/(α−1) for α > 1, else divergent | 1                                 |
//!
//! The large-deviation side is parameterized by the inverse temperature β:
//! `Λ(β) = 1 − α log(α/(α−1)) − log β(α−1)`, the typical free energy
//! `f* = (α−1)/2 − Λ(β)/(2β)`, the replica generating function `Φ(n)`, and
//! the two-sided rate functions for the free energy and for the risk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A concentration level that may diverge (α ≤ 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Concentration {
    Finite(f64),
    Divergent,
}

impl Concentration {
    /// The finite value, or `+∞` when divergent.
    pub fn value(self) -> f64 {
        match self {
            Concentration::Finite(v) => v,
            Concentration::Divergent => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryPoint {
    pub alpha: f64,
    pub eps_quenched: f64,
    pub qw_quenched: Concentration,
    pub eps_annealed: f64,
    pub qw_annealed: f64,
}

/// Which side of the Chernoff bound a rate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Lower tail, `Pr[Y ≤ threshold]`.
    Plus,
    /// Upper tail, `Pr[Y ≥ threshold]`.
    Minus,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Plus => "plus",
            Side::Minus => "minus",
        }
    }
}

/// The case of a piecewise rate function that produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateBranch {
    /// Threshold on the typical side of the localization point.
    Typical,
    /// Finite Gibbs-form tail value.
    Tail,
    /// Threshold beyond the support of the distribution (risk below the
    /// minimal risk).
    Unreachable,
    /// The free-energy shape parameter `s` is non-positive.
    NonPositiveShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateValue {
    /// Non-negative, possibly `+∞`.
    pub value: f64,
    pub branch: RateBranch,
}

impl RateValue {
    fn typical() -> Self {
        RateValue {
            value: 0.0,
            branch: RateBranch::Typical,
        }
    }

    fn infinite(branch: RateBranch) -> Self {
        RateValue {
            value: f64::INFINITY,
            branch,
        }
    }

    /// The Chernoff bound `exp(−N R)` at system size `n_assets`.
    pub fn bound(&self, n_assets: usize) -> f64 {
        (-(n_assets as f64) * self.value).exp()
    }
}

/// Quenched and annealed predictions at scenario ratio `alpha`.
pub fn theory_point(alpha: f64) -> Result<TheoryPoint> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let (eps_quenched, qw_quenched) = if alpha > 1.0 {
        (
            (alpha - 1.0) / 2.0,
            Concentration::Finite(alpha / (alpha - 1.0)),
        )
    } else {
        (0.0, Concentration::Divergent)
    };
    Ok(TheoryPoint {
        alpha,
        eps_quenched,
        qw_quenched,
        eps_annealed: alpha / 2.0,
        qw_annealed: 1.0,
    })
}

fn check_alpha_beta(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("alpha must exceed 1, got {alpha}")));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::domain(format!("beta must be positive, got {beta}")));
    }
    Ok(())
}

/// `Λ(β) = 1 − α log(α/(α−1)) − log β(α−1)`.
pub fn lambda_beta(alpha: f64, beta: f64) -> Result<f64> {
    check_alpha_beta(alpha, beta)?;
    Ok(1.0 - alpha * (alpha / (alpha - 1.0)).ln() - (beta * (alpha - 1.0)).ln())
}

/// Typical free energy per asset `f* = (α−1)/2 − Λ(β)/(2β)`.
pub fn free_energy_theory(alpha: f64, beta: f64) -> Result<f64> {
    Ok((alpha - 1.0) / 2.0 - lambda_beta(alpha, beta)? / (2.0 * beta))
}

/// Risk per asset at which the posterior localizes, `(α−1)/2 + 1/(2β)`.
pub fn risk_localization(alpha: f64, beta: f64) -> Result<f64> {
    check_alpha_beta(alpha, beta)?;
    Ok((alpha - 1.0) / 2.0 + 1.0 / (2.0 * beta))
}

/// Replica generating function `Φ(n) = lim (1/N) log E[Zⁿ]`, continued to
/// real `n` with `1 + nβ > 0`.
pub fn phi(n: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_alpha_beta(alpha, beta)?;
    if !(1.0 + n * beta > 0.0) {
        return Err(Error::domain(format!(
            "replica number {n} leaves 1 + n*beta non-positive"
        )));
    }
    Ok(
        -n * alpha / 2.0 * (alpha / (alpha - 1.0)).ln() - (alpha - 1.0) / 2.0 * (n * beta).ln_1p()
            + n / 2.0
            - n / 2.0 * (beta * (alpha - 1.0)).ln(),
    )
}

/// `s − 1 − log s`, non-negative for `s > 0` (Gibbs inequality).
pub fn gibbs(s: f64) -> f64 {
    s - 1.0 - s.ln()
}

/// Rate function of the free energy: `Pr[f ≤ f̃] ≤ e^{−N R₊}` and
/// `Pr[f ≥ f̃] ≤ e^{−N R₋}`.
pub fn rate_free_energy(alpha: f64, beta: f64, f_tilde: f64, side: Side) -> Result<RateValue> {
    let lambda = lambda_beta(alpha, beta)?;
    if !f_tilde.is_finite() {
        return Err(Error::domain("threshold must be finite"));
    }
    let half = (alpha - 1.0) / 2.0;
    let f_star = half - lambda / (2.0 * beta);
    let typical = match side {
        Side::Plus => f_star <= f_tilde,
        Side::Minus => f_star >= f_tilde,
    };
    if typical {
        return Ok(RateValue::typical());
    }
    let s = (f_tilde + lambda / (2.0 * beta)) / half;
    if s <= 0.0 {
        return Ok(RateValue::infinite(RateBranch::NonPositiveShape));
    }
    Ok(RateValue {
        value: half * gibbs(s),
        branch: RateBranch::Tail,
    })
}

/// Rate function of the risk per asset under the posterior at β, with
/// `s′ = 2β(ε̃ − (α−1)/2)`.
pub fn rate_risk(alpha: f64, beta: f64, eps_tilde: f64, side: Side) -> Result<RateValue> {
    let loc = risk_localization(alpha, beta)?;
    if !eps_tilde.is_finite() {
        return Err(Error::domain("threshold must be finite"));
    }
    let floor = (alpha - 1.0) / 2.0;
    let tail = || RateValue {
        value: 0.5 * gibbs(2.0 * beta * (eps_tilde - floor)),
        branch: RateBranch::Tail,
    };
    Ok(match side {
        Side::Plus if eps_tilde <= floor => RateValue::infinite(RateBranch::Unreachable),
        Side::Plus if eps_tilde < loc => tail(),
        Side::Plus => RateValue::typical(),
        Side::Minus if eps_tilde > loc => tail(),
        Side::Minus => RateValue::typical(),
    })
}
