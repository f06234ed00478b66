//! Command-line front end.
//!
//! Every subcommand can also be driven from a JSON file (`--config run.json`)
//! whose `command` key names the subcommand and whose other keys are flag
//! names with `-` or `_`. Flags given on the command line win over the file.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{Error, Result};
use crate::game::{
    best_annealed_score, expected_score_annealed, expected_score_quenched, Constraint, GameSpec,
    Hand, Knowledge, Mix,
};
use crate::harness::{
    chernoff_check, default_chernoff_grid, fmt_float, inverse_moments, persist,
    self_averaging_scan, spectrum_ensemble, sweep, with_threads, CsvRecord, RunMetadata, Threshold,
};
use crate::market::{sample_return_matrix, EnsembleSpec, ReturnMatrix};
use crate::risk::{analyze, optimal_portfolio, require_excess_scenarios};
use crate::spectrum::{g_moment, mp_density};
use crate::theory::{
    free_energy_theory, lambda_beta, phi, rate_free_energy, rate_risk, risk_localization,
    theory_point, Side,
};

const SUBCOMMANDS: [&str; 7] = [
    "theory", "sweep", "scan", "chernoff", "spectrum", "game", "risk",
];

#[derive(Debug, Parser)]
#[command(
    name = "risklab",
    version,
    about = "Minimal investment risk experiments on random return ensembles"
)]
pub struct Cli {
    /// Worker threads for ensemble runs (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// JSON file with a `command` key and flag values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form quenched and annealed predictions.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Theory(TheoryArgs),
    /// Ensemble averages of ε and q_w across a grid of α.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Sweep(SweepArgs),
    /// Sample variance of ε and f across system sizes.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Scan(ScanArgs),
    /// Empirical free-energy tails against the Chernoff bounds.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Chernoff(ChernoffArgs),
    /// Pooled eigenvalue histogram with the Marčenko–Pastur overlay.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Spectrum(SpectrumArgs),
    /// Rock-paper-scissors with and without foreknowledge.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Game(GameArgs),
    /// Optimal portfolio for one return matrix.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Risk(RiskArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Master seed.
    #[arg(long, env = "RISKLAB_SEED", default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    /// Scenario ratio p/N.
    #[arg(long)]
    pub alpha: f64,
    /// Inverse temperature; enables Λ, f*, Φ and the rate functions.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Replica number for Φ(n).
    #[arg(long, requires = "beta")]
    pub replica: Option<f64>,
    /// Free-energy threshold for R±.
    #[arg(long, requires = "beta")]
    pub f_tilde: Option<f64>,
    /// Risk threshold for the risk rate functions.
    #[arg(long, requires = "beta")]
    pub eps_tilde: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Grid `start:stop:step`, stop included within half a step.
    #[arg(long, default_value = "1.2:8.0:0.4", conflicts_with = "alpha")]
    pub alpha_grid: String,
    /// Explicit comma-separated ratios instead of a grid.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// Number of assets N.
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Output CSV (default `sweep_<grid>_<N>_<seed>.csv`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Comma-separated system sizes.
    #[arg(long, value_delimiter = ',', default_value = "100,200,400")]
    pub n_list: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Output CSV (default `scan_<alpha>_<N list>_<seed>.csv`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChernoffArgs {
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    /// Lower-tail thresholds Pr[f ≤ t]; with neither list the default
    /// two-sided grid around f* is used.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lower: Vec<f64>,
    /// Upper-tail thresholds Pr[f ≥ t].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub upper: Vec<f64>,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Output CSV (default `chernoff_<alpha>_<N>_<seed>.csv`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Histogram CSV (default `spectrum_<alpha>_<N>_<seed>.csv`); the smooth
    /// density goes to `<stem>.mp.csv` next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GameCase {
    /// No foreknowledge: uniform play, and paper against a rock-heavy Bob.
    A,
    /// Foreknowledge, no constraint.
    B,
    /// Foreknowledge, each hand exactly a third of the time.
    C,
    /// Foreknowledge, one hand per set, several sets.
    D,
    All,
}

#[derive(Debug, Args)]
pub struct GameArgs {
    #[arg(long, value_enum, default_value_t = GameCase::All)]
    pub case: GameCase,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    /// Rounds per set.
    #[arg(long, default_value_t = 300)]
    pub rounds: u32,
    /// Sets in case d.
    #[arg(long, default_value_t = 5)]
    pub sets: u32,
    /// Bob's mix `r,p,s` for cases b to d.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub bob: Option<Vec<f64>>,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct RiskArgs {
    /// CSV of raw returns, one row per asset.
    #[arg(long, conflicts_with = "alpha")]
    pub input: Option<PathBuf>,
    /// Draw the matrix from the ensemble at this ratio instead.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Also report the free energy at this inverse temperature.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Print the optimal weights.
    #[arg(long)]
    pub weights: bool,
    #[command(flatten)]
    pub seed: SeedArg,
}

/// Parses `start:stop:step`; `stop` is included when the last step lands
/// within half a step of it.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| Error::config("alpha-grid", format!("`{spec}`: {m}"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| bad(&e.to_string()))?;
    let [start, stop, step] = parts[..] else {
        return Err(bad("expected start:stop:step"));
    };
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(bad("need start <= stop and step > 0"));
    }
    let count = ((stop - start) / step + 0.5).floor() as usize;
    Ok((0..=count).map(|k| start + k as f64 * step).collect())
}

/// Reads an `N × p` CSV of raw returns (one row per asset, no header).
pub fn load_return_matrix_csv(path: &Path) -> Result<ReturnMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    let mut raw = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            column: 1,
            message: e.to_string(),
        })?;
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::Parse {
                row,
                column: w.min(rec.len()) + 1,
                message: format!("expected {w} columns, found {}", rec.len()),
            });
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                column: j + 1,
                message: format!("not a number: `{field}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: j + 1,
                    message: format!("non-finite value `{field}`"),
                });
            }
            raw.push(v);
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    ReturnMatrix::from_raw(rows, cols, &raw)
}

/// Entry point: parses `args` (including the program name), runs the
/// command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match with_threads(cli.threads, || dispatch(&cli.command, cli.threads)) {
        Ok(Ok(text)) => {
            let _ = write!(out, "{text}");
            0
        }
        Ok(Err(e)) | Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

/// Splices flags from a `--config` JSON file in right after the subcommand
/// name, ahead of any flags given explicitly.
fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(
                it.next()
                    .ok_or_else(|| Error::config("config", "missing file name"))?,
            );
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
        path: path.clone().into(),
        source,
    })?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::config("config", format!("{path}: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::config("config", "top level must be an object"))?;
    let command = obj
        .get("command")
        .and_then(|c| c.as_str())
        .ok_or_else(|| Error::config("command", "config needs a string `command`"))?;
    let mut injected = Vec::new();
    for (key, v) in obj {
        if key == "command" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            serde_json::Value::Bool(true) => injected.push(flag),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::Array(items) => {
                let joined: Vec<String> = items.iter().map(json_scalar).collect::<Result<_>>()?;
                injected.push(flag);
                injected.push(joined.join(","));
            }
            other => {
                injected.push(flag);
                injected.push(json_scalar(other)?);
            }
        }
    }
    let pos = rest.iter().position(|a| SUBCOMMANDS.contains(&a.as_str()));
    match pos {
        Some(i) if rest[i] != command => Err(Error::config(
            "command",
            format!(
                "config says `{command}` but the command line says `{}`",
                rest[i]
            ),
        )),
        Some(i) => {
            rest.splice(i + 1..i + 1, injected);
            Ok(rest)
        }
        None => {
            rest.push(command.to_string());
            rest.extend(injected);
            Ok(rest)
        }
    }
}

fn json_scalar(v: &serde_json::Value) -> Result<String> {
    match v {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        serde_json::Value::Bool(b) => Ok(b.to_string()),
        other => Err(Error::config(
            "config",
            format!("unsupported value {other}"),
        )),
    }
}

fn dispatch(command: &Command, threads: usize) -> Result<String> {
    match command {
        Command::Theory(a) => cmd_theory(a),
        Command::Sweep(a) => cmd_sweep(a, threads),
        Command::Scan(a) => cmd_scan(a, threads),
        Command::Chernoff(a) => cmd_chernoff(a, threads),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Game(a) => cmd_game(a),
        Command::Risk(a) => cmd_risk(a),
    }
}

/// Shortest decimal that reads back exactly, so `0.5` prints as `0.5`.
fn num(v: f64) -> String {
    format!("{v}")
}

fn cmd_theory(a: &TheoryArgs) -> Result<String> {
    let t = theory_point(a.alpha).map_err(as_config("alpha"))?;
    let mut s = format!(
        "eps_q={} qw_q={} eps_or={} qw_or={}\n",
        num(t.eps_quenched),
        num(t.qw_quenched.value()),
        num(t.eps_annealed),
        num(t.qw_annealed)
    );
    if let Some(beta) = a.beta {
        let ctx = as_config("beta");
        let lambda = lambda_beta(a.alpha, beta).map_err(&ctx)?;
        let f_star = free_energy_theory(a.alpha, beta).map_err(&ctx)?;
        let loc = risk_localization(a.alpha, beta).map_err(&ctx)?;
        writeln!(
            s,
            "beta={} lambda={} f_star={} eps_localized={}",
            num(beta),
            num(lambda),
            num(f_star),
            num(loc)
        )
        .unwrap();
        if let Some(n) = a.replica {
            writeln!(
                s,
                "phi({})={}",
                num(n),
                num(phi(n, a.alpha, beta).map_err(as_config("replica"))?)
            )
            .unwrap();
        }
        if let Some(f) = a.f_tilde {
            let plus =
                rate_free_energy(a.alpha, beta, f, Side::Plus).map_err(as_config("f-tilde"))?;
            let minus =
                rate_free_energy(a.alpha, beta, f, Side::Minus).map_err(as_config("f-tilde"))?;
            writeln!(
                s,
                "f_tilde={} rate_plus={} rate_minus={}",
                num(f),
                num(plus.value),
                num(minus.value)
            )
            .unwrap();
        }
        if let Some(e) = a.eps_tilde {
            let plus = rate_risk(a.alpha, beta, e, Side::Plus).map_err(as_config("eps-tilde"))?;
            let minus = rate_risk(a.alpha, beta, e, Side::Minus).map_err(as_config("eps-tilde"))?;
            writeln!(
                s,
                "eps_tilde={} rate_plus={} rate_minus={}",
                num(e),
                num(plus.value),
                num(minus.value)
            )
            .unwrap();
        }
    }
    Ok(s)
}

/// Input-domain failures of closed forms are configuration errors at the CLI.
fn as_config(field: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Domain(m) => Error::config(field, m),
        other => other,
    }
}

fn check_positive(field: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::config(field, "must be positive"));
    }
    Ok(())
}

fn output_path(
    explicit: &Option<PathBuf>,
    command: &str,
    key: &str,
    n: &str,
    seed: u64,
) -> PathBuf {
    explicit
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{command}_{key}_{n}_{seed}.csv")))
}

fn cmd_sweep(a: &SweepArgs, threads: usize) -> Result<String> {
    check_positive("n", a.n)?;
    check_positive("samples", a.samples)?;
    let (alphas, key) = match &a.alpha {
        Some(list) if !list.is_empty() => (
            list.clone(),
            list.iter().map(|v| num(*v)).collect::<Vec<_>>().join("-"),
        ),
        _ => (parse_grid(&a.alpha_grid)?, a.alpha_grid.replace(':', "-")),
    };
    for &alpha in &alphas {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::config(
                "alpha",
                format!("ratios must be positive, got {alpha}"),
            ));
        }
    }
    let records = sweep(&alphas, a.n, a.samples, a.seed.seed)?;
    let path = output_path(&a.out, "sweep", &key, &a.n.to_string(), a.seed.seed);
    let meta = RunMetadata::new(
        a.seed.seed,
        json!({"command": "sweep", "alphas": alphas, "n_assets": a.n, "n_samples": a.samples, "threads": threads}),
    );
    persist(&records, &path, &meta)?;
    let mut s = String::from(
        "alpha      eps_mean     ±stderr    eps_theory  qw_mean      ±stderr    qw_theory\n",
    );
    for r in &records {
        writeln!(
            s,
            "{:<10.4} {:<12.6} {:<10.2e} {:<11.6} {:<12.6} {:<10.2e} {:.6}",
            r.alpha_nominal,
            r.eps_mean,
            r.eps_stderr,
            r.eps_theory,
            r.qw_mean,
            r.qw_stderr,
            r.qw_theory
        )
        .unwrap();
    }
    writeln!(s, "wrote {}", path.display()).unwrap();
    Ok(s)
}

fn cmd_scan(a: &ScanArgs, threads: usize) -> Result<String> {
    check_positive("samples", a.samples)?;
    if a.n_list.is_empty() || a.n_list.iter().any(|&n| n < 2) {
        return Err(Error::config("n-list", "need sizes of at least 2"));
    }
    if !(a.alpha > 1.0) {
        return Err(Error::config("alpha", "the scan needs alpha > 1"));
    }
    if !(a.beta > 0.0) {
        return Err(Error::config("beta", "must be positive"));
    }
    let records = self_averaging_scan(a.alpha, a.beta, &a.n_list, a.samples, a.seed.seed)?;
    let sizes: Vec<String> = a.n_list.iter().map(|n| n.to_string()).collect();
    let path = output_path(&a.out, "scan", &num(a.alpha), &sizes.join("-"), a.seed.seed);
    let meta = RunMetadata::new(
        a.seed.seed,
        json!({"command": "scan", "alpha": a.alpha, "beta": a.beta, "n_list": a.n_list,
               "n_samples": a.samples, "threads": threads}),
    );
    persist(&records, &path, &meta)?;
    let mut s = String::from("N      statistic    mean         variance     theory\n");
    for r in &records {
        writeln!(
            s,
            "{:<6} {:<12} {:<12.6} {:<12.4e} {:.6}",
            r.n_assets,
            r.statistic.as_str(),
            r.mean,
            r.variance,
            r.theory
        )
        .unwrap();
    }
    writeln!(s, "wrote {}", path.display()).unwrap();
    Ok(s)
}

fn cmd_chernoff(a: &ChernoffArgs, threads: usize) -> Result<String> {
    check_positive("samples", a.samples)?;
    if !(a.alpha > 1.0) {
        return Err(Error::config("alpha", "the Chernoff check needs alpha > 1"));
    }
    if !(a.beta > 0.0) {
        return Err(Error::config("beta", "must be positive"));
    }
    let thresholds: Vec<Threshold> = if a.lower.is_empty() && a.upper.is_empty() {
        default_chernoff_grid(a.alpha, a.beta)?
    } else {
        let lower = a.lower.iter().map(|&value| Threshold {
            value,
            side: Side::Plus,
        });
        let upper = a.upper.iter().map(|&value| Threshold {
            value,
            side: Side::Minus,
        });
        lower.chain(upper).collect()
    };
    let records = chernoff_check(a.alpha, a.beta, a.n, a.samples, &thresholds, a.seed.seed)?;
    let path = output_path(
        &a.out,
        "chernoff",
        &num(a.alpha),
        &a.n.to_string(),
        a.seed.seed,
    );
    let meta = RunMetadata::new(
        a.seed.seed,
        json!({"command": "chernoff", "alpha": a.alpha, "beta": a.beta, "n_assets": a.n,
               "n_samples": a.samples, "thresholds": thresholds, "threads": threads}),
    );
    persist(&records, &path, &meta)?;
    let mut s = String::from("side   threshold    empirical  stderr     bound        pass\n");
    for r in &records {
        writeln!(
            s,
            "{:<6} {:<12.6} {:<10.4} {:<10.4} {:<12.4e} {}",
            r.side.as_str(),
            r.threshold,
            r.empirical,
            r.stderr,
            r.bound,
            r.passed
        )
        .unwrap();
    }
    let passed = records.iter().filter(|r| r.passed).count();
    writeln!(
        s,
        "{passed}/{} thresholds within bound + 3 stderr",
        records.len()
    )
    .unwrap();
    writeln!(s, "wrote {}", path.display()).unwrap();
    Ok(s)
}

struct HistogramRow {
    left: f64,
    right: f64,
    density: f64,
    mp_density: f64,
}

impl CsvRecord for HistogramRow {
    const HEADER: &'static [&'static str] = &["bin_left", "bin_right", "density", "mp_density"];

    fn to_fields(&self) -> Vec<String> {
        vec![
            fmt_float(self.left),
            fmt_float(self.right),
            fmt_float(self.density),
            fmt_float(self.mp_density),
        ]
    }

    fn from_fields(_: &[&str]) -> std::result::Result<Self, (usize, String)> {
        Err((0, "histogram rows are write-only".into()))
    }
}

struct CurveRow {
    lambda: f64,
    density: f64,
}

impl CsvRecord for CurveRow {
    const HEADER: &'static [&'static str] = &["lambda", "mp_density"];

    fn to_fields(&self) -> Vec<String> {
        vec![fmt_float(self.lambda), fmt_float(self.density)]
    }

    fn from_fields(_: &[&str]) -> std::result::Result<Self, (usize, String)> {
        Err((0, "curve rows are write-only".into()))
    }
}

fn cmd_spectrum(a: &SpectrumArgs) -> Result<String> {
    check_positive("samples", a.samples)?;
    check_positive("bins", a.bins)?;
    let (hist, law) = spectrum_ensemble(a.alpha, a.n, a.samples, a.bins, a.seed.seed)?;
    let expected = hist.law_densities(&law);
    let rows: Vec<HistogramRow> = hist
        .rows()
        .into_iter()
        .zip(&expected)
        .map(|((left, right, density), &mp_density)| HistogramRow {
            left,
            right,
            density,
            mp_density,
        })
        .collect();
    let path = output_path(
        &a.out,
        "spectrum",
        &num(a.alpha),
        &a.n.to_string(),
        a.seed.seed,
    );
    let meta = RunMetadata::new(
        a.seed.seed,
        json!({"command": "spectrum", "alpha": a.alpha, "alpha_realized": law.alpha, "n_assets": a.n,
               "n_samples": a.samples, "bins": a.bins}),
    );
    persist(&rows, &path, &meta)?;
    let curve: Vec<CurveRow> = (0..=400)
        .map(|k| {
            let lambda = hist.upper * k as f64 / 400.0;
            let density = mp_density(&law, lambda).unwrap_or(0.0);
            CurveRow { lambda, density }
        })
        .collect();
    let curve_path = path.with_extension("mp.csv");
    crate::harness::write_csv(&curve, &curve_path)?;

    let worst = rows
        .iter()
        .map(|r| (r.density - r.mp_density).abs())
        .fold(0.0, f64::max);
    let mut s = format!(
        "alpha={} N={} samples={} bins={} support=[{:.6}, {:.6}] atom={:.6}\n",
        num(law.alpha),
        a.n,
        a.samples,
        a.bins,
        law.lambda_minus,
        law.lambda_plus,
        law.point_mass_at_zero
    );
    writeln!(s, "max |histogram - law| per bin = {worst:.4}").unwrap();
    if law.alpha > 1.0 {
        let [g1, g2] = inverse_moments(a.alpha, a.n, a.samples, a.seed.seed)?;
        writeln!(
            s,
            "g(1) = {:.6} ± {:.2e} (law {:.6}); g(2) = {:.6} ± {:.2e} (law {:.6})",
            g1.mean,
            g1.stderr(),
            g_moment(law.alpha, 1)?,
            g2.mean,
            g2.stderr(),
            g_moment(law.alpha, 2)?
        )
        .unwrap();
    }
    writeln!(s, "wrote {} and {}", path.display(), curve_path.display()).unwrap();
    Ok(s)
}

/// One line of the game table.
#[derive(Debug, Clone, PartialEq)]
pub struct GameRow {
    pub label: &'static str,
    pub description: String,
    /// Best expectation without foreknowledge under the same constraint.
    pub annealed: f64,
    pub quenched: Option<(f64, f64)>,
}

/// The scenarios of the rock-paper-scissors thought experiment.
pub fn game_rows(
    case: GameCase,
    trials: u64,
    rounds: u32,
    sets: u32,
    bob: Mix,
    seed: u64,
) -> Result<Vec<GameRow>> {
    let base = GameSpec {
        bob_mix: bob,
        rounds,
        knowledge: Knowledge::Annealed,
        constraint: Constraint::None,
        sets: 1,
    };
    let mut rows = Vec::new();
    let want = |c: GameCase| case == c || case == GameCase::All;
    if want(GameCase::A) {
        let uniform = GameSpec {
            bob_mix: Mix::uniform(),
            ..base
        };
        rows.push(GameRow {
            label: "a",
            description: "uniform vs uniform, no foreknowledge".into(),
            annealed: expected_score_annealed(&Mix::uniform(), &uniform)?,
            quenched: None,
        });
        let biased = GameSpec {
            bob_mix: Mix::new(2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0)?,
            ..base
        };
        rows.push(GameRow {
            label: "a",
            description: "always paper vs rock-heavy Bob".into(),
            annealed: expected_score_annealed(&Mix::pure(Hand::Paper), &biased)?,
            quenched: None,
        });
    }
    let mut quenched = |label, description: &str, constraint, sets| -> Result<()> {
        let spec = GameSpec {
            constraint,
            sets,
            ..base
        };
        let est = expected_score_quenched(
            &GameSpec {
                knowledge: Knowledge::Quenched,
                ..spec
            },
            trials,
            seed,
        )?;
        rows.push(GameRow {
            label,
            description: description.into(),
            annealed: best_annealed_score(&spec)?,
            quenched: Some((est.mean, est.stderr)),
        });
        Ok(())
    };
    if want(GameCase::B) {
        quenched("b", "foreknowledge, no constraint", Constraint::None, 1)?;
    }
    if want(GameCase::C) {
        quenched(
            "c",
            "foreknowledge, equal counts of each hand",
            Constraint::EqualCounts,
            1,
        )?;
    }
    if want(GameCase::D) {
        quenched(
            "d",
            "foreknowledge, one hand per set",
            Constraint::SameHandEachSet,
            sets,
        )?;
    }
    Ok(rows)
}

fn cmd_game(a: &GameArgs) -> Result<String> {
    if a.rounds == 0 {
        return Err(Error::config("rounds", "must be positive"));
    }
    if a.sets == 0 {
        return Err(Error::config("sets", "must be positive"));
    }
    if a.trials < 2 {
        return Err(Error::config("trials", "need at least 2 trials"));
    }
    let bob = match &a.bob {
        Some(v) => Mix::new(v[0], v[1], v[2]).map_err(as_config("bob"))?,
        None => Mix::uniform(),
    };
    let rows = game_rows(a.case, a.trials, a.rounds, a.sets, bob, a.seed.seed)?;
    let mut s = String::from("case  annealed     quenched_mc  stderr     description\n");
    for r in rows {
        let (m, e) = match r.quenched {
            Some((m, e)) => (format!("{m:.4}"), format!("{e:.4}")),
            None => ("-".into(), "-".into()),
        };
        writeln!(
            s,
            "{:<5} {:<12.4} {:<12} {:<10} {}",
            r.label, r.annealed, m, e, r.description
        )
        .unwrap();
    }
    Ok(s)
}

fn cmd_risk(a: &RiskArgs) -> Result<String> {
    let x = match (&a.input, a.alpha) {
        (Some(path), _) => load_return_matrix_csv(path)?,
        (None, Some(alpha)) => {
            let spec = EnsembleSpec::new(a.n, alpha, a.seed.seed, 1)?;
            sample_return_matrix(&spec, 0)
        }
        (None, None) => return Err(Error::config("input", "give --input FILE or --alpha")),
    };
    if let Some(beta) = a.beta {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::config("beta", "must be positive"));
        }
    }
    require_excess_scenarios(&x)?;
    let j = crate::market::covariance(&x);
    let (report, f) = analyze(&j, a.beta)?;
    let mut s = format!(
        "N={} p={} alpha={} epsilon={} q_w={}\n",
        x.n_assets(),
        x.n_scenarios(),
        num(x.realized_alpha()),
        num(report.epsilon),
        num(report.q_w)
    );
    if let (Some(beta), Some(f)) = (a.beta, f) {
        writeln!(s, "beta={} free_energy={}", num(beta), num(f)).unwrap();
    }
    if a.weights {
        let w = optimal_portfolio(&j)?;
        for (k, v) in w.weights().iter().enumerate() {
            writeln!(s, "w[{k}]={}", num(*v)).unwrap();
        }
    }
    Ok(s)
}
