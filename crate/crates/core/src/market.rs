//! Seeded ensembles of scaled return matrices (the quenched disorder) and
//! their covariance matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Returns `X = {x_kμ / √N}` for N assets and p scenarios, row-major N×p.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    n_assets: usize,
    n_scenarios: usize,
    scaled: Vec<f64>,
}

impl ReturnMatrix {
    /// Builds the matrix from raw returns `x_kμ` (row k = asset), applying
    /// the `1/√N` scaling.
    pub fn from_raw(n_assets: usize, n_scenarios: usize, raw: &[f64]) -> Result<Self> {
        if n_assets < 2 {
            return Err(Error::domain(format!(
                "need at least 2 assets, got {n_assets}"
            )));
        }
        if n_scenarios < 1 {
            return Err(Error::domain("need at least 1 scenario"));
        }
        if raw.len() != n_assets * n_scenarios {
            return Err(Error::Dimension {
                expected: n_assets * n_scenarios,
                got: raw.len(),
            });
        }
        let s = 1.0 / (n_assets as f64).sqrt();
        Ok(ReturnMatrix {
            n_assets,
            n_scenarios,
            scaled: raw.iter().map(|v| v * s).collect(),
        })
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }

    /// `p / N`.
    pub fn realized_alpha(&self) -> f64 {
        self.n_scenarios as f64 / self.n_assets as f64
    }

    /// Scaled entry `x_kμ / √N`.
    #[inline]
    pub fn entry(&self, asset: usize, scenario: usize) -> f64 {
        self.scaled[asset * self.n_scenarios + scenario]
    }

    /// Unscaled return `x_kμ`.
    pub fn raw_entry(&self, asset: usize, scenario: usize) -> f64 {
        self.entry(asset, scenario) * (self.n_assets as f64).sqrt()
    }

    /// Scaled returns of one asset across all scenarios.
    pub fn asset_row(&self, asset: usize) -> &[f64] {
        &self.scaled[asset * self.n_scenarios..(asset + 1) * self.n_scenarios]
    }

    pub fn scaled_entries(&self) -> &[f64] {
        &self.scaled
    }
}

/// Parameters of a Gaussian return ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_assets: usize,
    /// Nominal scenario ratio α; the realized ratio is `p / N` with
    /// `p = round(α N)`.
    pub scenario_ratio: f64,
    pub master_seed: u64,
    pub n_samples: usize,
}

impl EnsembleSpec {
    pub fn new(
        n_assets: usize,
        scenario_ratio: f64,
        master_seed: u64,
        n_samples: usize,
    ) -> Result<Self> {
        let spec = EnsembleSpec {
            n_assets,
            scenario_ratio,
            master_seed,
            n_samples,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_assets < 2 {
            return Err(Error::config("n_assets", "must be at least 2"));
        }
        if !(self.scenario_ratio > 0.0) || !self.scenario_ratio.is_finite() {
            return Err(Error::config("alpha", "must be a positive finite number"));
        }
        if self.n_scenarios() < 1 {
            return Err(Error::config(
                "alpha",
                "round(alpha * N) must be at least 1",
            ));
        }
        if self.n_samples < 1 {
            return Err(Error::config("samples", "must be at least 1"));
        }
        Ok(())
    }

    /// `p = round(α N)`.
    pub fn n_scenarios(&self) -> usize {
        (self.scenario_ratio * self.n_assets as f64).round() as usize
    }

    pub fn realized_alpha(&self) -> f64 {
        self.n_scenarios() as f64 / self.n_assets as f64
    }
}

/// Draws sample `sample_index` of the ensemble.
///
/// The generator is ChaCha8 keyed by the master seed with the sample index as
/// stream id, so each matrix is a pure function of `(master_seed,
/// sample_index)` and entries are consumed in row-major order.
pub fn sample_return_matrix(spec: &EnsembleSpec, sample_index: usize) -> ReturnMatrix {
    debug_assert!(sample_index < spec.n_samples);
    let n = spec.n_assets;
    let p = spec.n_scenarios();
    let mut rng = keyed_rng(spec.master_seed, sample_index as u64);
    let mut raw = vec![0.0; n * p];
    fill_standard_normal(&mut rng, &mut raw);
    ReturnMatrix::from_raw(n, p, &raw).expect("validated ensemble dimensions")
}

/// Covariance `J = X Xᵀ`, i.e. `J_ij = (1/N) Σ_μ x_iμ x_jμ`.
pub fn covariance(x: &ReturnMatrix) -> SymMatrix {
    let n = x.n_assets;
    let p = x.n_scenarios;
    let mut c = vec![0.0; n * n];
    // SAFETY: pointers and strides describe the live buffers: A = X (n×p,
    // row-major), B = Xᵀ (p×n, the same buffer read column-major) and
    // C (n×n, row-major), which does not alias A or B.
    unsafe {
        matrixmultiply::dgemm(
            n,
            p,
            n,
            1.0,
            x.scaled.as_ptr(),
            p as isize,
            1,
            x.scaled.as_ptr(),
            1,
            p as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    SymMatrix::from_lower_buffer(n, c)
}

/// A ChaCha8 stream keyed by `(seed, stream)`.
pub fn keyed_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a master seed with integer tags into an independent sub-seed
/// (splitmix64 finalizer chained over the tags).
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut z = master;
    for &t in tags {
        z = splitmix64(z ^ splitmix64(t.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    z
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fills `out` with independent standard normals.
pub fn fill_standard_normal<R: Rng>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sample_shape_and_mean() {
        let spec = EnsembleSpec::new(4, 2.0, 7, 1).unwrap();
        let x = sample_return_matrix(&spec, 0);
        assert_eq!((x.n_assets(), x.n_scenarios()), (4, 8));
        let mean: f64 = (0..4)
            .flat_map(|k| (0..8).map(move |m| (k, m)))
            .map(|(k, m)| x.raw_entry(k, m))
            .sum::<f64>()
            / 32.0;
        assert!(mean.abs() < 4.0 / 32f64.sqrt());
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let spec = EnsembleSpec::new(5, 3.0, 99, 4).unwrap();
        assert_eq!(
            sample_return_matrix(&spec, 2),
            sample_return_matrix(&spec, 2)
        );
        assert_ne!(
            sample_return_matrix(&spec, 2),
            sample_return_matrix(&spec, 3)
        );
    }

    #[test]
    fn raw_entries_have_unit_variance() {
        let spec = EnsembleSpec::new(200, 3.0, 1, 1).unwrap();
        let x = sample_return_matrix(&spec, 0);
        let s = (200f64).sqrt();
        let vals: Vec<f64> = x.scaled_entries().iter().map(|v| v * s).collect();
        assert_eq!(vals.len(), 200 * 600);
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.02, "variance {var}");
    }

    #[test]
    fn covariance_hand_examples() {
        let x = ReturnMatrix::from_raw(2, 2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let j = covariance(&x);
        assert!((j.get(0, 0) - 0.5).abs() < 1e-15 && (j.get(1, 1) - 0.5).abs() < 1e-15);
        assert_eq!(j.get(0, 1), 0.0);

        let x = ReturnMatrix::from_raw(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0]).unwrap();
        let j = covariance(&x);
        let want = [[2.5, 1.0], [1.0, 1.0]];
        for i in 0..2 {
            for k in 0..2 {
                assert!((j.get(i, k) - want[i][k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn covariance_trace_identity_and_symmetry() {
        let spec = EnsembleSpec::new(17, 2.3, 5, 1).unwrap();
        let x = sample_return_matrix(&spec, 0);
        let j = covariance(&x);
        let raw_sq: f64 = (0..17)
            .flat_map(|k| (0..x.n_scenarios()).map(move |m| (k, m)))
            .map(|(k, m)| x.raw_entry(k, m).powi(2))
            .sum();
        assert!((j.trace() - raw_sq / 17.0).abs() < 1e-10 * j.trace());
        for i in 0..17 {
            for k in 0..17 {
                assert_eq!(j.get(i, k), j.get(k, i));
                let naive: f64 = x
                    .asset_row(i)
                    .iter()
                    .zip(x.asset_row(k))
                    .map(|(a, b)| a * b)
                    .sum();
                assert!((j.get(i, k) - naive).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ensemble_covariance_moments() {
        // E[J_ii] = α, E[J_ij] = 0
        let spec = EnsembleSpec::new(100, 2.0, 42, 100).unwrap();
        let mut diag = Vec::new();
        let mut off = Vec::new();
        for s in 0..spec.n_samples {
            let j = covariance(&sample_return_matrix(&spec, s));
            diag.push(j.trace() / 100.0);
            off.push(j.get(3, 17));
        }
        for (vals, target) in [(diag, 2.0), (off, 0.0)] {
            let n = vals.len() as f64;
            let m = vals.iter().sum::<f64>() / n;
            let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!(
                (m - target).abs() < 5.0 * sd / n.sqrt(),
                "mean {m} target {target}"
            );
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(EnsembleSpec::new(1, 2.0, 0, 1).is_err());
        assert!(EnsembleSpec::new(10, 0.0, 0, 1).is_err());
        assert!(EnsembleSpec::new(10, 0.01, 0, 1).is_err());
        assert!(EnsembleSpec::new(10, 1.0, 0, 0).is_err());
        assert!(ReturnMatrix::from_raw(2, 2, &[1.0; 3]).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, &[500, 1000]), derive_seed(1, &[500, 1001]));
        assert_eq!(derive_seed(1, &[500, 1000]), derive_seed(1, &[500, 1000]));
    }
}
