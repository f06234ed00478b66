//! Minimal investment risk of mean-variance portfolios on random return
//! ensembles.
//!
//! `N` assets are observed over `p = αN` scenarios of i.i.d. standard normal
//! returns. For every realization the budget-constrained minimum-variance
//! portfolio is solved exactly, and ensemble averages of its risk per asset
//! `ε` and concentration `q_w` are compared with closed-form predictions:
//! the quenched values `(α−1)/2` and `α/(α−1)` obtained by optimizing first
//! and averaging afterwards, against the annealed `α/2` and `1` of the
//! textbook procedure that averages the objective first.
//!
//! ```
//! use risklab::{market, risk, theory};
//!
//! let spec = market::EnsembleSpec::new(200, 3.0, 7, 1)?;
//! let x = market::sample_return_matrix(&spec, 0);
//! let report = risk::assess(&x)?;
//! let t = theory::theory_point(3.0)?;
//! assert!((report.epsilon - t.eps_quenched).abs() < 0.15);
//! # Ok::<(), risklab::Error>(())
//! ```
//!
//! Modules, bottom up:
//!
//! * [`linalg`]: Cholesky factorization, solves, log-determinants and a
//!   symmetric eigensolver.
//! * [`market`]: seeded return matrices and their covariance `J = XXᵀ`.
//! * [`risk`]: optimal portfolio, minimal risk, concentration and the
//!   finite-size free energy.
//! * [`theory`]: closed forms, the replica generating function and the
//!   large-deviation rate functions.
//! * [`spectrum`]: the Marčenko–Pastur law and empirical spectra.
//! * [`game`]: the rock-paper-scissors illustration of quenched versus
//!   annealed averaging.
//! * [`harness`]: parallel, deterministic ensemble experiments and CSV output.
//! * [`cli`]: the `risklab` command.

// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops read more naturally than iterator chains in the matrix kernels.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod game;
pub mod harness;
pub mod linalg;
pub mod market;
pub mod quad;
pub mod risk;
pub mod spectrum;
pub mod theory;

pub use error::{Error, Result};

// The README and the guide's code listings run as doctests.
#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/minimal-risk.md")]
    mod minimal_risk {}
    #[doc = include_str!("../../../book/src/quenched-annealed.md")]
    mod quenched_annealed {}
    #[doc = include_str!("../../../book/src/free-energy.md")]
    mod free_energy {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    mod spectrum {}
    #[doc = include_str!("../../../book/src/game.md")]
    mod game {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
