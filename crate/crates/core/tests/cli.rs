//! The `risklab` command line and its file formats.

use std::path::Path;
use std::process::Command;

use risklab::cli::{load_return_matrix_csv, run};
use risklab::harness::{persist, read_records, sidecar_path, RunMetadata, SweepRecord};
use risklab::market::{covariance, sample_return_matrix, EnsembleSpec};
use risklab::Error;

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("risklab").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn csv_body(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn theory_prints_reference_values() {
    let (code, out, _) = run_cli(&["theory", "--alpha", "2"]);
    assert_eq!(code, 0);
    assert_eq!(out, "eps_q=0.5 qw_q=2 eps_or=1 qw_or=1\n");
    let (code, out, _) = run_cli(&["theory", "--alpha", "2", "--beta", "1", "--replica", "0.5"]);
    assert_eq!(code, 0);
    assert!(out.contains("f_star=0.693147180559945"), "{out}");
    assert!(out.contains("phi(0.5)="));
    let (_, out, _) = run_cli(&["theory", "--alpha", "0.5"]);
    assert_eq!(out, "eps_q=0 qw_q=inf eps_or=0.25 qw_or=1\n");
}

#[test]
fn bad_input_exits_one_and_names_the_field() {
    let (code, _, err) = run_cli(&["theory", "--alpha", "2", "--frobnicate"]);
    assert_eq!(code, 1);
    assert!(err.contains("Usage"), "{err}");
    let (code, _, err) = run_cli(&["sweep", "--alpha", "2", "--samples", "0"]);
    assert_eq!(code, 1);
    assert!(err.contains("samples"), "{err}");
    let (code, _, err) = run_cli(&["chernoff", "--alpha", "0.8"]);
    assert_eq!(code, 1);
    assert!(err.contains("alpha"), "{err}");
    let (code, _, err) = run_cli(&["theory", "--alpha", "2", "--beta", "-1"]);
    assert_eq!(code, 1);
    assert!(err.contains("beta"), "{err}");
    let (code, _, err) = run_cli(&["sweep", "--alpha-grid", "1:2"]);
    assert_eq!(code, 1);
    assert!(err.contains("alpha-grid"), "{err}");
    let (code, _, err) = run_cli(&["game", "--case", "c", "--rounds", "100", "--trials", "10"]);
    assert_eq!(code, 1);
    assert!(err.contains("divisible"), "{err}");
}

#[test]
fn degenerate_matrix_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("square.csv");
    std::fs::write(&path, "1,2\n3,4\n").unwrap();
    let (code, _, err) = run_cli(&["risk", "--input", path.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("singular"));
}

#[test]
fn risk_from_file_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    std::fs::write(&path, "1,0,1,0\n0,1,0,1\n").unwrap();
    let (code, out, _) = run_cli(&["risk", "--input", path.to_str().unwrap(), "--weights"]);
    assert_eq!(code, 0);
    // J = diag(1, 1) after the 1/√2 scaling, so the optimum is equipartition
    let value = |key: &str| -> f64 {
        let start = out.find(key).unwrap() + key.len();
        out[start..]
            .split_whitespace()
            .next()
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((value("epsilon=") - 0.5).abs() < 1e-12, "{out}");
    assert!((value("q_w=") - 1.0).abs() < 1e-12);
    assert!((value("w[0]=") - 1.0).abs() < 1e-12 && (value("w[1]=") - 1.0).abs() < 1e-12);
}

#[test]
fn help_documents_every_subcommand() {
    for cmd in [
        "theory", "sweep", "scan", "chernoff", "spectrum", "game", "risk",
    ] {
        let (code, out, _) = run_cli(&[cmd, "--help"]);
        assert_eq!(code, 0, "{cmd}");
        assert!(out.contains("--threads"), "{cmd}: {out}");
        if cmd != "theory" {
            assert!(
                out.contains("--seed") && out.contains("[default:"),
                "{cmd}: {out}"
            );
        }
    }
}

#[test]
fn sweep_files_follow_the_naming_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig.csv");
    let (code, text, err) = run_cli(&[
        "sweep",
        "--alpha-grid",
        "1.5:2.5:0.5",
        "--n",
        "30",
        "--samples",
        "5",
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(text.contains("wrote"));
    let records: Vec<SweepRecord> = read_records(&out).unwrap();
    assert_eq!(records.len(), 3);
    assert_eq!(records[2].alpha_nominal, 2.5);
    let meta: serde_json::Value = serde_json::from_str(&csv_body(&sidecar_path(&out))).unwrap();
    assert_eq!(meta["seed"], 9);
    assert_eq!(meta["config"]["n_assets"], 30);
    assert!(meta["error_bars"].as_str().unwrap().contains("stderr"));
}

#[test]
fn default_output_name_uses_command_grid_size_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_risklab"))
        .current_dir(dir.path())
        .args([
            "sweep",
            "--alpha-grid",
            "2:3:1",
            "--n",
            "20",
            "--samples",
            "3",
            "--seed",
            "4",
        ])
        .output()
        .unwrap();
    assert!(status.status.success());
    assert!(dir.path().join("sweep_2-3-1_20_4.csv").exists());
    assert!(dir.path().join("sweep_2-3-1_20_4.meta.json").exists());
}

#[test]
fn seed_falls_back_to_the_environment() {
    let bin = env!("CARGO_BIN_EXE_risklab");
    let by_flag = Command::new(bin)
        .args(["risk", "--alpha", "2", "--n", "12", "--seed", "31"])
        .env_remove("RISKLAB_SEED")
        .output()
        .unwrap();
    let by_env = Command::new(bin)
        .args(["risk", "--alpha", "2", "--n", "12"])
        .env("RISKLAB_SEED", "31")
        .output()
        .unwrap();
    let other = Command::new(bin)
        .args(["risk", "--alpha", "2", "--n", "12", "--seed", "32"])
        .output()
        .unwrap();
    assert_eq!(by_flag.status.code(), Some(0));
    assert_eq!(by_flag.stdout, by_env.stdout);
    assert_ne!(by_flag.stdout, other.stdout);
}

#[test]
fn config_file_drives_a_run_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"command": "theory", "alpha": 3, "beta": 2.0}"#).unwrap();
    let (code, out, _) = run_cli(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.starts_with("eps_q=1 qw_q=1.5"), "{out}");
    let (_, out, _) = run_cli(&["--config", cfg.to_str().unwrap(), "theory", "--alpha", "2"]);
    assert!(out.starts_with("eps_q=0.5 "), "{out}");
    std::fs::write(&cfg, r#"{"command": "theory", "alpha": 3, "gamma": 1}"#).unwrap();
    assert_eq!(run_cli(&["--config", cfg.to_str().unwrap()]).0, 1);
}

#[test]
fn sweep_bodies_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut bodies = Vec::new();
    for threads in ["1", "2", "4"] {
        let out = dir.path().join(format!("t{threads}.csv"));
        let (code, _, err) = run_cli(&[
            "--threads",
            threads,
            "sweep",
            "--alpha",
            "1.5,3",
            "--n",
            "60",
            "--samples",
            "8",
            "--seed",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
        bodies.push(csv_body(&out));
    }
    assert_eq!(bodies[0], bodies[1]);
    assert_eq!(bodies[0], bodies[2]);
}

#[test]
fn game_table_lists_every_case() {
    let (code, out, _) = run_cli(&["game", "--trials", "200", "--seed", "3"]);
    assert_eq!(code, 0);
    assert!(out.contains("150.0000"));
    assert!(out.contains("300.0000"));
    for label in ["\na ", "\nb ", "\nc ", "\nd "] {
        assert!(out.contains(label), "{out}");
    }
}

#[test]
fn spectrum_writes_histogram_and_overlay() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spec.csv");
    let (code, text, err) = run_cli(&[
        "spectrum",
        "--alpha",
        "2",
        "--n",
        "60",
        "--bins",
        "12",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(text.contains("g(1)"));
    let body = csv_body(&out);
    assert!(body.starts_with("bin_left,bin_right,density,mp_density\n"));
    assert_eq!(body.lines().count(), 13);
    assert!(csv_body(&dir.path().join("spec.mp.csv")).starts_with("lambda,mp_density\n"));
}

#[test]
fn return_matrix_csv_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    std::fs::write(&path, "1,2,0\n0,1,1\n").unwrap();
    let x = load_return_matrix_csv(&path).unwrap();
    assert_eq!((x.n_assets(), x.n_scenarios()), (2, 3));
    assert_eq!(x.raw_entry(0, 1), 2.0);
    assert!((x.entry(0, 1) - 2.0 / 2f64.sqrt()).abs() < 1e-15);

    std::fs::write(&path, "1,2,0\n0,1\n").unwrap();
    assert!(matches!(
        load_return_matrix_csv(&path),
        Err(Error::Parse { row: 2, .. })
    ));
    std::fs::write(&path, "1,2,0\n0,x,1\n").unwrap();
    assert!(matches!(
        load_return_matrix_csv(&path),
        Err(Error::Parse {
            row: 2,
            column: 2,
            ..
        })
    ));
}

#[test]
fn exported_matrix_reloads_with_identical_covariance() {
    let x = sample_return_matrix(&EnsembleSpec::new(7, 2.0, 5, 1).unwrap(), 0);
    let mut text = String::new();
    for i in 0..x.n_assets() {
        let row: Vec<String> = (0..x.n_scenarios())
            .map(|m| format!("{:?}", x.raw_entry(i, m)))
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("export.csv");
    std::fs::write(&path, text).unwrap();
    let (a, b) = (
        covariance(&x),
        covariance(&load_return_matrix_csv(&path).unwrap()),
    );
    for i in 0..7 {
        for j in 0..7 {
            assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-12);
        }
    }
}

#[test]
fn persist_writes_header_rows_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let meta = RunMetadata::new(1, serde_json::json!({"command": "test"}));
    let empty = dir.path().join("empty.csv");
    persist::<SweepRecord>(&[], &empty, &meta).unwrap();
    assert_eq!(csv_body(&empty).lines().count(), 1);
    assert!(sidecar_path(&empty).exists());

    let rec = SweepRecord {
        alpha_nominal: 2.0,
        alpha_realized: 2.0,
        n_assets: 500,
        n_samples: 50,
        eps_mean: 0.498_765_432_109_876,
        eps_stderr: 1.0 / 300.0,
        qw_mean: 2.01,
        qw_stderr: 0.0123,
        eps_theory: 0.5,
        qw_theory: 2.0,
        eps_or: 1.0,
        qw_or: 1.0,
    };
    let one = dir.path().join("one.csv");
    persist(std::slice::from_ref(&rec), &one, &meta).unwrap();
    let body = csv_body(&one);
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split(',').count(), 12);
    assert_eq!(lines[1].split(',').count(), 12);
    assert!(lines[1].contains("4.98765432110e-1"), "{}", lines[1]);

    // reading back and writing again reproduces the file byte for byte
    let back: Vec<SweepRecord> = read_records(&one).unwrap();
    assert!((back[0].eps_mean - rec.eps_mean).abs() < 1e-12);
    let again = dir.path().join("again.csv");
    persist(&back, &again, &meta).unwrap();
    assert_eq!(csv_body(&again), body);

    let missing = dir.path().join("no/such/dir/x.csv");
    let err = persist(&back, &missing, &meta).unwrap_err();
    assert!(err.to_string().contains("no/such/dir"), "{err}");
}
