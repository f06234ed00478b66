//! Monte Carlo experiments over the return ensemble and their CSV output.
//!
//! Every sample is a pure function of `(seed, N, p, sample index)`, samples
//! are evaluated in parallel on the current rayon pool, and the per-sample
//! results are reduced sequentially in index order. Output is therefore
//! bit-identical for any thread count.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{covariance, derive_seed, sample_return_matrix, EnsembleSpec};
use crate::risk::{analyze, require_excess_scenarios};
use crate::spectrum::{empirical_g_of, empirical_spectrum, Histogram, MpLaw};
use crate::theory::{free_energy_theory, rate_free_energy, theory_point, Side};

/// Above this ratio, and from this size on, a singular draw means something
/// is broken rather than unlucky.
const SINGULAR_ALPHA: f64 = 1.05;
const SINGULAR_MIN_N: usize = 100;

/// Offsets from the typical free energy used by [`default_chernoff_grid`].
pub const CHERNOFF_OFFSETS: [f64; 7] = [0.0, 0.025, 0.05, 0.1, 0.15, 0.2, 0.3];

/// Runs `f` on a dedicated pool of `threads` workers (0 means rayon's default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    Ok(pool.install(f))
}

/// One point of the quenched-versus-annealed sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub alpha_nominal: f64,
    pub alpha_realized: f64,
    pub n_assets: usize,
    /// Samples that entered the averages (singular draws excluded).
    pub n_samples: usize,
    pub eps_mean: f64,
    pub eps_stderr: f64,
    pub qw_mean: f64,
    pub qw_stderr: f64,
    pub eps_theory: f64,
    pub qw_theory: f64,
    pub eps_or: f64,
    pub qw_or: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Epsilon,
    FreeEnergy,
}

impl Statistic {
    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::Epsilon => "epsilon",
            Statistic::FreeEnergy => "free_energy",
        }
    }
}

/// Spread of one disorder-dependent statistic at one system size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationRecord {
    pub n_assets: usize,
    pub alpha: f64,
    /// Inverse temperature; `NaN` for the risk, which does not depend on it.
    pub beta: f64,
    pub statistic: Statistic,
    pub mean: f64,
    pub variance: f64,
    pub theory: f64,
}

/// A tail threshold: `Plus` asks for `Pr[f ≤ value]`, `Minus` for `Pr[f ≥ value]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub value: f64,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChernoffRecord {
    pub threshold: f64,
    pub side: Side,
    pub empirical: f64,
    pub stderr: f64,
    pub rate: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Mean, unbiased variance and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Moments { n, mean, variance }
    }

    pub fn stderr(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }
}

struct SampleOutcome {
    eps: f64,
    qw: f64,
    free_energy: Option<f64>,
}

/// The ensemble at `(alpha, n_assets)` with its own sub-seed, so that runs at
/// different sizes or ratios never share random streams.
fn keyed_spec(alpha: f64, n_assets: usize, n_samples: usize, seed: u64) -> Result<EnsembleSpec> {
    let probe = EnsembleSpec::new(n_assets, alpha, seed, n_samples)?;
    Ok(EnsembleSpec {
        master_seed: derive_seed(seed, &[n_assets as u64, probe.n_scenarios() as u64]),
        ..probe
    })
}

/// Evaluates `n_samples` draws at `(alpha, n_assets)`, skipping singular ones.
///
/// Successful outcomes come back in sample order. Singular draws are an error
/// where they should not occur, or when nothing else is left.
fn run_ensemble(
    alpha: f64,
    n_assets: usize,
    n_samples: usize,
    seed: u64,
    beta: Option<f64>,
) -> Result<Vec<SampleOutcome>> {
    let spec = keyed_spec(alpha, n_assets, n_samples, seed)?;
    let results: Vec<Result<SampleOutcome>> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let x = sample_return_matrix(&spec, k);
            require_excess_scenarios(&x)?;
            let (report, free_energy) = analyze(&covariance(&x), beta)?;
            Ok(SampleOutcome {
                eps: report.epsilon,
                qw: report.q_w,
                free_energy,
            })
        })
        .collect();

    let mut outcomes = Vec::with_capacity(n_samples);
    let mut skipped = 0;
    for r in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(Error::Singular { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let realized = spec.realized_alpha();
    if (skipped > 0 && realized > SINGULAR_ALPHA && n_assets >= SINGULAR_MIN_N)
        || outcomes.is_empty()
    {
        return Err(Error::UnexpectedSingular {
            alpha: realized,
            n_assets,
            skipped,
        });
    }
    Ok(outcomes)
}

/// Ensemble averages of the minimal risk and the concentration across `alphas`.
///
/// Ratios with `α ≤ 1` have no finite optimum per sample and get the limiting
/// values (`ε = 0`, `q_w = ∞`) without sampling.
pub fn sweep(
    alphas: &[f64],
    n_assets: usize,
    n_samples: usize,
    master_seed: u64,
) -> Result<Vec<SweepRecord>> {
    let mut records = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let spec = EnsembleSpec::new(n_assets, alpha, master_seed, n_samples)?;
        let theory = theory_point(alpha)?;
        let mut rec = SweepRecord {
            alpha_nominal: alpha,
            alpha_realized: spec.realized_alpha(),
            n_assets,
            n_samples: 0,
            eps_mean: 0.0,
            eps_stderr: 0.0,
            qw_mean: f64::INFINITY,
            qw_stderr: 0.0,
            eps_theory: theory.eps_quenched,
            qw_theory: theory.qw_quenched.value(),
            eps_or: theory.eps_annealed,
            qw_or: theory.qw_annealed,
        };
        if alpha > 1.0 {
            let outcomes = run_ensemble(alpha, n_assets, n_samples, master_seed, None)?;
            let eps = Moments::of(&outcomes.iter().map(|o| o.eps).collect::<Vec<_>>());
            let qw = Moments::of(&outcomes.iter().map(|o| o.qw).collect::<Vec<_>>());
            rec.n_samples = eps.n;
            rec.eps_mean = eps.mean;
            rec.eps_stderr = eps.stderr();
            rec.qw_mean = qw.mean;
            rec.qw_stderr = qw.stderr();
        }
        records.push(rec);
    }
    Ok(records)
}

/// Sample mean and variance of `ε(X)` and `f(β, X)` at each size in `n_list`.
pub fn self_averaging_scan(
    alpha: f64,
    beta: f64,
    n_list: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<ConcentrationRecord>> {
    let f_star = free_energy_theory(alpha, beta)?;
    let eps_star = theory_point(alpha)?.eps_quenched;
    let mut records = Vec::with_capacity(2 * n_list.len());
    for &n in n_list {
        let outcomes = run_ensemble(alpha, n, n_samples, seed, Some(beta))?;
        let eps = Moments::of(&outcomes.iter().map(|o| o.eps).collect::<Vec<_>>());
        let f = Moments::of(
            &outcomes
                .iter()
                .map(|o| o.free_energy.expect("requested"))
                .collect::<Vec<_>>(),
        );
        records.push(ConcentrationRecord {
            n_assets: n,
            alpha,
            beta: f64::NAN,
            statistic: Statistic::Epsilon,
            mean: eps.mean,
            variance: eps.variance,
            theory: eps_star,
        });
        records.push(ConcentrationRecord {
            n_assets: n,
            alpha,
            beta,
            statistic: Statistic::FreeEnergy,
            mean: f.mean,
            variance: f.variance,
            theory: f_star,
        });
    }
    Ok(records)
}

/// Thresholds at the typical free energy and at [`CHERNOFF_OFFSETS`] into
/// both tails.
pub fn default_chernoff_grid(alpha: f64, beta: f64) -> Result<Vec<Threshold>> {
    let f_star = free_energy_theory(alpha, beta)?;
    let mut grid = Vec::with_capacity(2 * CHERNOFF_OFFSETS.len());
    for side in [Side::Plus, Side::Minus] {
        for d in CHERNOFF_OFFSETS {
            let value = match side {
                Side::Plus => f_star - d,
                Side::Minus => f_star + d,
            };
            grid.push(Threshold { value, side });
        }
    }
    Ok(grid)
}

/// Empirical free-energy tails against the Chernoff bounds `exp(−N R)`.
///
/// A threshold passes when the empirical tail frequency is at most the bound
/// plus three binomial standard errors.
pub fn chernoff_check(
    alpha: f64,
    beta: f64,
    n_assets: usize,
    n_samples: usize,
    thresholds: &[Threshold],
    seed: u64,
) -> Result<Vec<ChernoffRecord>> {
    let outcomes = run_ensemble(alpha, n_assets, n_samples, seed, Some(beta))?;
    let f: Vec<f64> = outcomes
        .iter()
        .map(|o| o.free_energy.expect("requested"))
        .collect();
    let n = f.len() as f64;
    thresholds
        .iter()
        .map(|t| {
            let hits = f
                .iter()
                .filter(|&&v| match t.side {
                    Side::Plus => v <= t.value,
                    Side::Minus => v >= t.value,
                })
                .count();
            let empirical = hits as f64 / n;
            let stderr = (empirical * (1.0 - empirical) / n).sqrt();
            let rate = rate_free_energy(alpha, beta, t.value, t.side)?;
            let bound = rate.bound(n_assets);
            Ok(ChernoffRecord {
                threshold: t.value,
                side: t.side,
                empirical,
                stderr,
                rate: rate.value,
                bound,
                passed: empirical <= bound + 3.0 * stderr,
            })
        })
        .collect()
}

/// Pooled eigenvalue histogram of `n_samples` covariance matrices, binned
/// against the Marčenko–Pastur law at the realized ratio.
pub fn spectrum_ensemble(
    alpha: f64,
    n_assets: usize,
    n_samples: usize,
    n_bins: usize,
    seed: u64,
) -> Result<(Histogram, MpLaw)> {
    let spec = keyed_spec(alpha, n_assets, n_samples, seed)?;
    let law = MpLaw::new(spec.realized_alpha())?;
    let parts: Vec<Result<Histogram>> = (0..n_samples)
        .into_par_iter()
        .map(|k| empirical_spectrum(&sample_return_matrix(&spec, k), n_bins))
        .collect();
    let mut total = Histogram::for_law(&law, n_bins)?;
    for h in parts {
        total.merge(&h?)?;
    }
    Ok((total, law))
}

/// Ensemble statistics of the empirical inverse moments `g(1)` and `g(2)`.
pub fn inverse_moments(
    alpha: f64,
    n_assets: usize,
    n_samples: usize,
    seed: u64,
) -> Result<[Moments; 2]> {
    let spec = keyed_spec(alpha, n_assets, n_samples, seed)?;
    let per: Vec<Result<(f64, f64)>> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let j = covariance(&sample_return_matrix(&spec, k));
            Ok((empirical_g_of(&j, 1)?, empirical_g_of(&j, 2)?))
        })
        .collect();
    let per = per.into_iter().collect::<Result<Vec<_>>>()?;
    let g1: Vec<f64> = per.iter().map(|v| v.0).collect();
    let g2: Vec<f64> = per.iter().map(|v| v.1).collect();
    Ok([Moments::of(&g1), Moments::of(&g2)])
}

/// A record type that can be written to and read back from CSV.
pub trait CsvRecord: Sized {
    const HEADER: &'static [&'static str];
    fn to_fields(&self) -> Vec<String>;
    fn from_fields(fields: &[&str]) -> std::result::Result<Self, (usize, String)>;
}

/// Twelve significant digits in scientific notation; `inf` and `NaN` as Rust
/// prints them.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        v.to_string()
    }
}

fn parse_float(fields: &[&str], i: usize) -> std::result::Result<f64, (usize, String)> {
    fields[i]
        .parse()
        .map_err(|e| (i, format!("`{}`: {e}", fields[i])))
}

fn parse_int(fields: &[&str], i: usize) -> std::result::Result<usize, (usize, String)> {
    fields[i]
        .parse()
        .map_err(|e| (i, format!("`{}`: {e}", fields[i])))
}

fn parse_side(fields: &[&str], i: usize) -> std::result::Result<Side, (usize, String)> {
    match fields[i] {
        "plus" => Ok(Side::Plus),
        "minus" => Ok(Side::Minus),
        other => Err((i, format!("unknown side `{other}`"))),
    }
}

impl CsvRecord for SweepRecord {
    const HEADER: &'static [&'static str] = &[
        "alpha_nominal",
        "alpha_realized",
        "n_assets",
        "n_samples",
        "eps_mean",
        "eps_stderr",
        "qw_mean",
        "qw_stderr",
        "eps_theory",
        "qw_theory",
        "eps_or",
        "qw_or",
    ];

    fn to_fields(&self) -> Vec<String> {
        vec![
            fmt_float(self.alpha_nominal),
            fmt_float(self.alpha_realized),
            self.n_assets.to_string(),
            self.n_samples.to_string(),
            fmt_float(self.eps_mean),
            fmt_float(self.eps_stderr),
            fmt_float(self.qw_mean),
            fmt_float(self.qw_stderr),
            fmt_float(self.eps_theory),
            fmt_float(self.qw_theory),
            fmt_float(self.eps_or),
            fmt_float(self.qw_or),
        ]
    }

    fn from_fields(f: &[&str]) -> std::result::Result<Self, (usize, String)> {
        Ok(SweepRecord {
            alpha_nominal: parse_float(f, 0)?,
            alpha_realized: parse_float(f, 1)?,
            n_assets: parse_int(f, 2)?,
            n_samples: parse_int(f, 3)?,
            eps_mean: parse_float(f, 4)?,
            eps_stderr: parse_float(f, 5)?,
            qw_mean: parse_float(f, 6)?,
            qw_stderr: parse_float(f, 7)?,
            eps_theory: parse_float(f, 8)?,
            qw_theory: parse_float(f, 9)?,
            eps_or: parse_float(f, 10)?,
            qw_or: parse_float(f, 11)?,
        })
    }
}

impl CsvRecord for ConcentrationRecord {
    const HEADER: &'static [&'static str] = &[
        "n_assets",
        "alpha",
        "beta",
        "statistic",
        "mean",
        "variance",
        "theory",
    ];

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.n_assets.to_string(),
            fmt_float(self.alpha),
            fmt_float(self.beta),
            self.statistic.as_str().to_string(),
            fmt_float(self.mean),
            fmt_float(self.variance),
            fmt_float(self.theory),
        ]
    }

    fn from_fields(f: &[&str]) -> std::result::Result<Self, (usize, String)> {
        let statistic = match f[3] {
            "epsilon" => Statistic::Epsilon,
            "free_energy" => Statistic::FreeEnergy,
            other => return Err((3, format!("unknown statistic `{other}`"))),
        };
        Ok(ConcentrationRecord {
            n_assets: parse_int(f, 0)?,
            alpha: parse_float(f, 1)?,
            beta: parse_float(f, 2)?,
            statistic,
            mean: parse_float(f, 4)?,
            variance: parse_float(f, 5)?,
            theory: parse_float(f, 6)?,
        })
    }
}

impl CsvRecord for ChernoffRecord {
    const HEADER: &'static [&'static str] = &[
        "threshold",
        "side",
        "empirical",
        "stderr",
        "rate",
        "bound",
        "passed",
    ];

    fn to_fields(&self) -> Vec<String> {
        vec![
            fmt_float(self.threshold),
            self.side.as_str().to_string(),
            fmt_float(self.empirical),
            fmt_float(self.stderr),
            fmt_float(self.rate),
            fmt_float(self.bound),
            self.passed.to_string(),
        ]
    }

    fn from_fields(f: &[&str]) -> std::result::Result<Self, (usize, String)> {
        Ok(ChernoffRecord {
            threshold: parse_float(f, 0)?,
            side: parse_side(f, 1)?,
            empirical: parse_float(f, 2)?,
            stderr: parse_float(f, 3)?,
            rate: parse_float(f, 4)?,
            bound: parse_float(f, 5)?,
            passed: f[6].parse().map_err(|e| (6, format!("`{}`: {e}", f[6])))?,
        })
    }
}

/// Run description stored next to every CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub version: &'static str,
    pub created_unix: u64,
    pub config: serde_json::Value,
    pub error_bars: &'static str,
}

impl RunMetadata {
    pub fn new(seed: u64, config: serde_json::Value) -> Self {
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunMetadata {
            seed,
            version: env!("CARGO_PKG_VERSION"),
            created_unix,
            config,
            error_bars:
                "stderr = sample std / sqrt(n_samples); sample std = stderr * sqrt(n_samples)",
        }
    }
}

/// Path of the JSON sidecar for `csv_path`: `run.csv` gets `run.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `records` as CSV with a header row, plus the metadata sidecar.
pub fn persist<R: CsvRecord>(records: &[R], path: &Path, meta: &RunMetadata) -> Result<()> {
    write_csv(records, path)?;
    let side = sidecar_path(path);
    let mut f = File::create(&side).map_err(io_err(&side))?;
    let json = serde_json::to_string_pretty(meta).expect("metadata serializes");
    writeln!(f, "{json}").map_err(io_err(&side))
}

/// Writes only the CSV part of [`persist`].
pub fn write_csv<R: CsvRecord>(records: &[R], path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(R::HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record(r.to_fields()).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a CSV written by [`persist`].
pub fn read_records<R: CsvRecord>(path: &Path) -> Result<Vec<R>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(R::HEADER.iter().copied()) {
        return Err(Error::Parse {
            row: 1,
            column: 1,
            message: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let fields: Vec<&str> = rec.iter().collect();
        let r = R::from_fields(&fields).map_err(|(column, message)| Error::Parse {
            row: i + 2,
            column: column + 1,
            message,
        })?;
        out.push(r);
    }
    Ok(out)
}
