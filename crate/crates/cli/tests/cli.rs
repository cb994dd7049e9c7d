use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dcdgd::consensus;
use dcdgd_cli::{setup, sweep, CliError, Overrides};

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn dcdgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcdgd")).args(args).output().expect("binary runs")
}

fn path_arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn run_smoke(out: &Path) -> Output {
    dcdgd(&["run", path_arg(&crate_dir().join("configs/smoke.cfg")), "--out-dir", path_arg(out)])
}

/// Writes a config file in `dir`, pointing at the shipped data directory.
fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let data = crate_dir().join("data");
    let text = body.replace("@DATA@", path_arg(&data));
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

fn golden(name: &str) -> String {
    fs::read_to_string(crate_dir().join("tests/golden").join(name)).unwrap().trim_end().to_string()
}

fn parse_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    (header, lines.map(|l| l.split(',').map(str::to_string).collect()).collect())
}

#[test]
fn smoke_run_succeeds_and_pins_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_smoke(dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(first_line(&dir.path().join("runs.csv")), golden("runs.csv.header"));
    assert_eq!(first_line(&dir.path().join("summary.csv")), golden("summary.csv.header"));
    assert_eq!(first_line(&dir.path().join("identity_a0.1.csv")), golden("trial.csv.header"));
    assert_eq!(first_line(&dir.path().join("hybrid-C2_a0.1.csv")), golden("trial.csv.header"));
}

#[test]
fn rerun_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run_smoke(a.path()).status.success());
    assert!(run_smoke(b.path()).status.success());
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 4);
    for name in names {
        let x = fs::read(a.path().join(&name)).unwrap();
        let y = fs::read(b.path().join(&name)).unwrap();
        assert!(x == y, "{name:?} differs between runs");
    }
}

#[test]
fn seed_override_changes_noisy_output() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = crate_dir().join("configs/smoke.cfg");
    assert!(dcdgd(&["run", path_arg(&cfg), "--out-dir", path_arg(a.path())]).status.success());
    assert!(dcdgd(&["run", path_arg(&cfg), "--out-dir", path_arg(b.path()), "--seed", "8"]).status.success());
    let name = "hybrid-C2_a0.1.csv";
    assert_ne!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
}

#[test]
fn summary_matches_trial_files() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_smoke(dir.path()).status.success());
    let (_, trials) = parse_csv(&dir.path().join("hybrid-C2_a0.1.csv"));
    let (header, summary) = parse_csv(&dir.path().join("summary.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let rows: Vec<&Vec<String>> = summary.iter().filter(|r| r[0] == "hybrid-C2_a0.1").collect();
    assert_eq!(rows.len(), 101);
    for row in rows {
        let t: usize = row[1].parse().unwrap();
        for (trial_col, name) in [(2, "gap"), (3, "grad_norm_sq"), (4, "consensus_dev"), (6, "cum_bits")] {
            let xs: Vec<f64> = trials
                .iter()
                .filter(|r| r[1].parse::<usize>().unwrap() == t)
                .map(|r| r[trial_col].parse().unwrap())
                .collect();
            assert_eq!(xs.len(), 4);
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let got_mean: f64 = row[col(&format!("{name}_mean"))].parse().unwrap();
            let got_std: f64 = row[col(&format!("{name}_std"))].parse().unwrap();
            assert!((got_mean - mean).abs() <= 1e-12 * mean.abs().max(1.0), "t={t} {name} mean");
            assert!((got_std - std).abs() <= 1e-12 * std.abs().max(1.0), "t={t} {name} std");
        }
    }
}

#[test]
fn analyze_matrix_reports_consensus_thresholds() {
    for file in ["w1.txt", "w2.txt", "ring10.txt", "path10-lazy.txt"] {
        let path = crate_dir().join("data").join(file);
        let out = dcdgd(&["analyze-matrix", path_arg(&path)]);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        let field = |key: &str| -> f64 {
            let line = text.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("{key} in\n{text}"));
            line[key.len()..].trim().parse().unwrap()
        };
        let net = setup::load_network(&path).unwrap();
        let s = consensus::spectral(&net.matrix).unwrap();
        let th = consensus::thresholds(&s, 1.0).unwrap();
        assert!((field("lambda_N") - s.lambda_n).abs() <= 5e-7, "{file}");
        assert!((field("eta_min") - th.eta_min).abs() <= 5e-7, "{file}");
        assert!((field("sparsifier p_min") - th.p_min).abs() <= 5e-7, "{file}");
        assert!((field("beta") - s.beta).abs() <= 5e-7, "{file}");
    }
}

#[test]
fn invalid_matrix_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "0.5 0.5 0\n0.5 0.4 0.1\n0 0.1 0.9\n").unwrap();
    let out = dcdgd(&["analyze-matrix", path_arg(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.txt"));
}

#[test]
fn unknown_key_reports_line_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "typo.cfg",
        "[experiment]\nkind = convergence\n\n[network]\nmatrix = @DATA@/w2.txt\n\n[compressor]\nspecs = identity\nspces = ternary\n",
    );
    let out = dcdgd(&["run", path_arg(&cfg), "--out-dir", path_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 9") && err.contains("spces"), "{err}");
}

#[test]
fn bad_values_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("kind.cfg", "[experiment]\nkind = real-data\n[network]\nmatrix = @DATA@/w2.txt\n[compressor]\nspecs = identity\n"),
        ("spec.cfg", "[experiment]\nkind = convergence\n[network]\nmatrix = @DATA@/w2.txt\n[compressor]\nspecs = sparsifier:p=2\n"),
        ("trials.cfg", "[experiment]\nkind = convergence\ntrials = many\n[network]\nmatrix = @DATA@/w2.txt\n[compressor]\nspecs = identity\n"),
        ("matrix.cfg", "[experiment]\nkind = convergence\n[network]\nmatrix = @DATA@/missing.txt\n[compressor]\nspecs = identity\n"),
    ] {
        let cfg = write_config(dir.path(), name, body);
        let out = dcdgd(&["run", path_arg(&cfg), "--out-dir", path_arg(dir.path())]);
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn infeasible_compressor_is_refused_without_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ternary.cfg",
        "[experiment]\nkind = convergence\ntrials = 2\niterations = 10\n[network]\nmatrix = @DATA@/w1.txt\n\
         [objective]\ndim = 3\nseed = 1\nf_ref = none\n[compressor]\nspecs = ternary\n",
    );
    let out = dcdgd(&["run", path_arg(&cfg), "--out-dir", path_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("(1 − λ_N)/(1 + λ_N)"));
}

#[test]
fn required_convergence_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "diverge.cfg",
        "[experiment]\nkind = convergence\ntrials = 3\niterations = 300\n[network]\nmatrix = @DATA@/w1.txt\n\
         [objective]\ndim = 3\nseed = 1\nf_ref_iterations = 5000\n[compressor]\nspecs = identity; sparsifier:p=0.3\n\
         [run]\nalpha = 0.1\nallow_infeasible = true\n",
    );
    let out = dcdgd(&["run", path_arg(&cfg), "--out-dir", path_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sparsifier-p0.3_a0.1"));
    // Outputs are still written, with the divergent trials clipped.
    let (_, rows) = parse_csv(&dir.path().join("sparsifier-p0.3_a0.1.csv"));
    assert_eq!(rows.len(), 3 * 301);
    assert!(rows.iter().any(|r| r[7] == "1"));
}

#[test]
fn compare_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cmp.cfg",
        "[experiment]\nkind = compressor-compare\nseed = 3\ntrials = 20\n[compare]\ndims = 8\nvectors = 3\nsnr_db = 0; 3\n",
    );
    let out = dcdgd(&["compare-compressors", path_arg(&cfg), "--out-dir", path_arg(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(first_line(&dir.path().join("compare.csv")), golden("compare.csv.header"));
    assert_eq!(first_line(&dir.path().join("compare_summary.csv")), golden("compare_summary.csv.header"));
    let (_, rows) = parse_csv(&dir.path().join("compare.csv"));
    assert_eq!(rows.len(), 2 * 3 * 3);

    let both = write_config(
        dir.path(),
        "both.cfg",
        "[experiment]\nkind = compressor-compare\n[compare]\nsnr = 1\nsnr_db = 0\n",
    );
    assert_eq!(dcdgd(&["compare-compressors", path_arg(&both)]).status.code(), Some(2));
}

#[test]
fn missing_dataset_message_is_actionable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "real.cfg",
        "[experiment]\nkind = real-data\n[network]\nmatrix = @DATA@/ring10.txt\n[objective]\nkind = logistic\n\
         [dataset]\npath = nowhere/spambase.data\n[compressor]\nspecs = identity\n",
    );
    let out = dcdgd(&["real-data", path_arg(&cfg), "--out-dir", path_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("not found") && err.contains("57 numeric feature columns") && err.contains("[dataset] path"),
        "{err}"
    );
}

#[test]
fn real_data_path_runs_on_a_small_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::new();
    for i in 0..60u32 {
        let a = ((i * 37) % 11) as f64 / 5.0 - 1.0;
        let b = ((i * 13) % 7) as f64 / 3.0 - 1.0;
        let c = (i % 5) as f64;
        let label = u8::from(a + 0.5 * b > 0.0);
        text.push_str(&format!("{a},{b},{c},{label}\n"));
    }
    fs::write(dir.path().join("tiny.csv"), text).unwrap();
    let cfg = write_config(
        dir.path(),
        "real.cfg",
        "[experiment]\nkind = real-data\nseed = 2\ntrials = 2\niterations = 40\n[network]\nmatrix = @DATA@/ring10.txt\n\
         [objective]\nkind = logistic\nf_ref_iterations = 2000\n[dataset]\npath = tiny.csv\nfeatures = 3\nrho = 0.1\n\
         [compressor]\nspecs = identity; hybrid:C=3\n[run]\nalpha = 0.1\n",
    );
    let ov = Overrides { out_dir: Some(dir.path().join("out")), ..Overrides::default() };
    let report = sweep::cmd_real_data(&cfg, &ov).unwrap();
    assert_eq!(report.outcomes.len(), 2);
    for o in &report.outcomes {
        assert!(o.converged(), "{}", o.id);
        assert!(o.result.last().value.mean < o.result.initial().value.mean);
    }
    assert_eq!(first_line(&dir.path().join("out/bits_series.csv")), golden("bits_series.csv.header"));
}

#[test]
fn exit_codes_by_error_kind() {
    assert_eq!(CliError::Diverged("x".into()).exit_code(), 3);
    assert_eq!(CliError::Input("x".into()).exit_code(), 2);
    assert_eq!(CliError::Io(std::io::Error::other("x")).exit_code(), 1);
}
