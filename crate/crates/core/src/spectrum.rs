//! Marčenko–Pastur law and empirical spectra of `J = XXᵀ`.
//!
//! With `X` scaled by `1/√N`, the limiting eigenvalue density of `J` at ratio
//! α is an atom of mass `[1−α]⁺` at zero plus the continuous part
//! `√([λ−λ₋]⁺[λ₊−λ]⁺) / (2πλ)` on `λ± = 1 + α ± 2√α`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues_sym, factorize_spd, SymMatrix};
use crate::market::{covariance, ReturnMatrix};
use crate::quad::adaptive_simpson;

/// Quadrature tolerance for moments and masses of the law.
pub const QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpLaw {
    pub alpha: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub point_mass_at_zero: f64,
}

impl MpLaw {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::domain(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        let r = 2.0 * alpha.sqrt();
        Ok(MpLaw {
            alpha,
            lambda_minus: (1.0 + alpha - r).max(0.0),
            lambda_plus: 1.0 + alpha + r,
            point_mass_at_zero: (1.0 - alpha).max(0.0),
        })
    }

    fn width(&self) -> f64 {
        self.lambda_plus - self.lambda_minus
    }

    /// `∫ g(λ) ρ(λ) dλ` over the continuous part, using
    /// `λ = λ₋ + (λ₊−λ₋) sin²θ` to absorb the square-root endpoints.
    pub fn integrate(&self, mut g: impl FnMut(f64) -> f64, tol: f64) -> f64 {
        self.integrate_between(&mut g, 0.0, std::f64::consts::FRAC_PI_2, tol)
    }

    fn integrate_between(&self, g: &mut impl FnMut(f64) -> f64, t0: f64, t1: f64, tol: f64) -> f64 {
        let w = self.width();
        let lm = self.lambda_minus;
        let mut integrand = |theta: f64| {
            let (s, c) = theta.sin_cos();
            let lam = lm + w * s * s;
            if lam <= 0.0 {
                return 0.0;
            }
            // ρ(λ) dλ = (w s c)/(2πλ) · 2 w s c dθ
            g(lam) * w * w * s * s * c * c / (PI * lam)
        };
        adaptive_simpson(&mut integrand, t0, t1, tol)
    }

    /// Mass of the continuous part on `[a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        let a = a.max(self.lambda_minus);
        let b = b.min(self.lambda_plus);
        if b <= a {
            return 0.0;
        }
        let to_theta = |lam: f64| {
            (((lam - self.lambda_minus) / self.width()).clamp(0.0, 1.0))
                .sqrt()
                .asin()
        };
        self.integrate_between(&mut |_| 1.0, to_theta(a), to_theta(b), QUAD_TOL)
    }
}

/// Continuous part of the density at `lam > 0`; zero off the support.
pub fn mp_density(law: &MpLaw, lam: f64) -> Result<f64> {
    if !(lam > 0.0) {
        return Err(Error::domain(format!(
            "density needs lambda > 0, got {lam}"
        )));
    }
    let inside = (lam - law.lambda_minus).max(0.0) * (law.lambda_plus - lam).max(0.0);
    Ok(inside.sqrt() / (2.0 * PI * lam))
}

/// `g(s) = ∫ ρ(λ) λ^{−s} dλ`: closed forms for `s = 1, 2`, quadrature beyond.
pub fn g_moment(alpha: f64, s: u32) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::domain(format!(
            "inverse moments diverge for alpha <= 1, got {alpha}"
        )));
    }
    match s {
        0 => Err(Error::domain("moment order must be positive")),
        1 => Ok(1.0 / (alpha - 1.0)),
        2 => Ok(alpha / (alpha - 1.0).powi(3)),
        _ => {
            let law = MpLaw::new(alpha)?;
            Ok(law.integrate(|lam| lam.powi(-(s as i32)), QUAD_TOL))
        }
    }
}

/// `(1/N) eᵀJ^{−s}e` for `s ∈ {1, 2}` from one linear solve.
pub fn empirical_g(x: &ReturnMatrix, s: u32) -> Result<f64> {
    empirical_g_of(&covariance(x), s)
}

pub fn empirical_g_of(j: &SymMatrix, s: u32) -> Result<f64> {
    let n = j.order();
    let y = factorize_spd(j)?.solve(&vec![1.0; n])?;
    match s {
        1 => Ok(y.iter().sum::<f64>() / n as f64),
        2 => Ok(y.iter().map(|v| v * v).sum::<f64>() / n as f64),
        _ => Err(Error::domain(format!(
            "empirical g supports s = 1 or 2, got {s}"
        ))),
    }
}

/// Equal-width histogram over `[0, 1.1 λ₊]`, mergeable across samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub upper: f64,
    pub counts: Vec<u64>,
    /// All observations, including those above `upper`.
    pub total: u64,
}

impl Histogram {
    pub fn new(upper: f64, n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::config("bins", "must be at least 1"));
        }
        if !(upper > 0.0) {
            return Err(Error::domain("histogram range must be positive"));
        }
        Ok(Histogram {
            upper,
            counts: vec![0; n_bins],
            total: 0,
        })
    }

    /// Histogram matching the law's support convention.
    pub fn for_law(law: &MpLaw, n_bins: usize) -> Result<Self> {
        Self::new(1.1 * law.lambda_plus, n_bins)
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.upper / self.n_bins() as f64
    }

    pub fn edges(&self, bin: usize) -> (f64, f64) {
        let w = self.bin_width();
        (bin as f64 * w, (bin + 1) as f64 * w)
    }

    /// Adds an eigenvalue. Round-off negatives fall into the first bin.
    pub fn add(&mut self, v: f64) {
        self.total += 1;
        if v >= self.upper {
            return;
        }
        let bin = ((v.max(0.0) / self.bin_width()) as usize).min(self.n_bins() - 1);
        self.counts[bin] += 1;
    }

    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if other.upper != self.upper || other.n_bins() != self.n_bins() {
            return Err(Error::domain("histograms have different binning"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }

    /// Normalized densities: count / (total · width).
    pub fn densities(&self) -> Vec<f64> {
        let norm = self.total as f64 * self.bin_width();
        self.counts.iter().map(|&c| c as f64 / norm).collect()
    }

    /// `(bin_left, bin_right, density)` rows.
    pub fn rows(&self) -> Vec<(f64, f64, f64)> {
        self.densities()
            .into_iter()
            .enumerate()
            .map(|(b, d)| {
                let (l, r) = self.edges(b);
                (l, r, d)
            })
            .collect()
    }

    /// Bin-averaged law on the same bins; the zero atom lands in the first bin.
    pub fn law_densities(&self, law: &MpLaw) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.n_bins())
            .map(|b| {
                let (l, r) = self.edges(b);
                let atom = if b == 0 { law.point_mass_at_zero } else { 0.0 };
                (law.mass_between(l, r) + atom) / w
            })
            .collect()
    }
}

/// Eigenvalues of `J` binned on `[0, 1.1 λ₊]` for the realized ratio.
pub fn empirical_spectrum(x: &ReturnMatrix, n_bins: usize) -> Result<Histogram> {
    let law = MpLaw::new(x.realized_alpha())?;
    let mut h = Histogram::for_law(&law, n_bins)?;
    for v in eigenvalues_sym(&covariance(x))? {
        h.add(v);
    }
    Ok(h)
}
