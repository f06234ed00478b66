//! Shared oracles for the integration and acceptance tests.
//!
//! The free-energy oracle integrates the partition function
//! `Z(β, X) = ∫ dᴺw (2π)^{−N/2} δ(Σw − N) exp(−β H(w))` with
//! `H(w) = ½ Σ_μ (Σ_i x_iμ w_i)²` directly. The delta is resolved by
//! eliminating the last weight, leaving an (N−1)-dimensional integral that
//! adaptive Simpson handles for N = 2 and N = 3.

#![allow(dead_code)]

use risklab::market::ReturnMatrix;
use risklab::quad::adaptive_simpson;

/// Energy evaluated straight from the returns, without forming `J`.
pub fn energy(x: &ReturnMatrix, w: &[f64]) -> f64 {
    (0..x.n_scenarios())
        .map(|mu| {
            let r: f64 = w
                .iter()
                .enumerate()
                .map(|(i, wi)| x.entry(i, mu) * wi)
                .sum();
            r * r
        })
        .sum::<f64>()
        / 2.0
}

/// Reduced quadratic `h(u) = H(u, N − Σu)`: gradient, Hessian and minimizer
/// by finite differences (exact for a quadratic) and Cramer's rule.
struct Reduced {
    center: Vec<f64>,
    h_min: f64,
    hess: Vec<Vec<f64>>,
    width: f64,
}

fn reduce(x: &ReturnMatrix, beta: f64) -> Reduced {
    let n = x.n_assets();
    let m = n - 1;
    let full = |u: &[f64]| {
        let mut w = u.to_vec();
        w.push(n as f64 - u.iter().sum::<f64>());
        energy(x, &w)
    };
    let zero = vec![0.0; m];
    let h0 = full(&zero);
    let unit = |i: usize, s: f64| {
        let mut u = zero.clone();
        u[i] = s;
        u
    };
    let mut hess = vec![vec![0.0; m]; m];
    let mut grad = vec![0.0; m];
    for i in 0..m {
        grad[i] = (full(&unit(i, 1.0)) - full(&unit(i, -1.0))) / 2.0;
        hess[i][i] = full(&unit(i, 1.0)) - 2.0 * h0 + full(&unit(i, -1.0));
        for j in 0..i {
            let mut u = zero.clone();
            u[i] = 1.0;
            u[j] = 1.0;
            hess[i][j] = full(&u) - h0 - grad[i] - grad[j] - 0.5 * (hess[i][i] + hess[j][j]);
            hess[j][i] = hess[i][j];
        }
    }
    // minimizer of h0 + gᵀu + ½ uᵀHu solves Hu = −g
    let center = match m {
        1 => vec![-grad[0] / hess[0][0]],
        2 => {
            let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
            vec![
                (-grad[0] * hess[1][1] + grad[1] * hess[0][1]) / det,
                (-grad[1] * hess[0][0] + grad[0] * hess[1][0]) / det,
            ]
        }
        _ => unreachable!("oracle covers N = 2 and N = 3"),
    };
    let h_min = full(&center);
    // conservative Gaussian half-width: 12 standard deviations of the
    // softest direction, from the smallest Hessian eigenvalue
    let lam_min = match m {
        1 => hess[0][0],
        _ => {
            let tr = hess[0][0] + hess[1][1];
            let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
            tr / 2.0 - ((tr / 2.0).powi(2) - det).sqrt()
        }
    };
    let width = 12.0 / (beta * lam_min).sqrt();
    Reduced {
        center,
        h_min,
        hess,
        width,
    }
}

pub fn quadrature_free_energy(x: &ReturnMatrix, beta: f64) -> f64 {
    let n = x.n_assets();
    let r = reduce(x, beta);
    let boltzmann = |u: &[f64]| {
        let mut w = u.to_vec();
        w.push(n as f64 - u.iter().sum::<f64>());
        (-beta * (energy(x, &w) - r.h_min)).exp()
    };
    let tol = 1e-11;
    let integral = match n {
        2 => adaptive_simpson(
            &mut |a| boltzmann(&[a]),
            r.center[0] - r.width,
            r.center[0] + r.width,
            tol,
        ),
        3 => {
            // for fixed a the integrand in b is a Gaussian centred on the
            // conditional minimizer; integrate over its own 12-sigma window
            let (h, c) = (&r.hess, &r.center);
            let inner_width = 12.0 / (beta * h[1][1]).sqrt();
            adaptive_simpson(
                &mut |a| {
                    let mid = c[1] - h[1][0] / h[1][1] * (a - c[0]);
                    adaptive_simpson(
                        &mut |b| boltzmann(&[a, b]),
                        mid - inner_width,
                        mid + inner_width,
                        tol,
                    )
                },
                c[0] - r.width,
                c[0] + r.width,
                tol,
            )
        }
        _ => unreachable!(),
    };
    let log_z =
        -beta * r.h_min + integral.ln() - n as f64 / 2.0 * (2.0 * std::f64::consts::PI).ln();
    -log_z / (n as f64 * beta)
}
