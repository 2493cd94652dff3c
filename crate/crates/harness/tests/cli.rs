use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ecx_core::compression::measured_epsilon;
use ecx_harness::config::ExperimentConfig;
use ecx_harness::metrics::read_csv;

const SMALL: &str = r#"
name = "small"

[base]
steps = 300
gamma = 0.02
workers = 3
seed = 4
estimator = "storm"
schedule = { kind = "inverse_linear", c0 = 0.05 }
worker_compressor = { kind = "one_bit" }
server_compressor = { kind = "top_k", k = 4 }
scheme = { kind = "error_compensated_x", beta = 0.3 }
problem = { kind = "lin_reg", d = 8, samples = 96 }
"#;

fn ecx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecx")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 4);
}

#[test]
fn repeated_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let mut outputs = Vec::new();
    for out in ["a", "b"] {
        let out = dir.path().join(out);
        let o = ecx(&["run", "--config", path_str(&cfg), "--out", path_str(&out), "--record-ghost"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(out.join("small.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let rows = read_csv(outputs[0].as_slice()).unwrap();
    assert_eq!(rows.len(), 301);
    assert!(rows.iter().all(|r| r.ghost_residual_norm.is_some()));
}

#[test]
fn epsilon_from_the_csv_matches_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let o = ecx(&["run", "--config", path_str(&cfg), "--out", path_str(dir.path())]);
    assert!(o.status.success());
    let rows = read_csv(fs::read(dir.path().join("small.csv")).unwrap().as_slice()).unwrap();
    let from_csv = measured_epsilon(
        rows.iter()
            .flat_map(|r| [r.worker_delta_norm, r.server_delta_norm])
            .flatten(),
    )
    .unwrap();

    let parsed = ExperimentConfig::parse(SMALL).unwrap();
    let trace = ecx_core::run(&parsed.base).unwrap();
    assert_eq!(from_csv.to_bits(), trace.epsilon_hat().unwrap().to_bits());
}

#[test]
fn verify_passes_and_reports_the_sign() {
    let dir = tempfile::tempdir().unwrap();
    let o = ecx(&["verify", "--out", path_str(dir.path())]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.starts_with("c2_sign = minus"), "{stdout}");
    assert_eq!(fs::read_to_string(dir.path().join("verify.txt")).unwrap(), stdout);
}

#[test]
fn bad_configs_exit_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", &SMALL.replace("steps = 300", "steps = \"many\""));
    let o = ecx(&["run", "--config", path_str(&bad), "--out", path_str(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));

    let missing = ecx(&["run", "--config", path_str(&dir.path().join("nope.toml"))]);
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(ecx(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn identity_compression_matches_uncompressed_in_compare() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL
        .replace("{ kind = \"one_bit\" }", "{ kind = \"identity\" }")
        .replace("{ kind = \"top_k\", k = 4 }", "{ kind = \"identity\" }");
    let cfg = write_config(dir.path(), "identity.toml", &text);
    let o = ecx(&["compare", "--config", path_str(&cfg), "--out", path_str(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let last = |label: &str| {
        let rows = read_csv(fs::read(dir.path().join(format!("{label}.csv"))).unwrap().as_slice()).unwrap();
        let r = rows.last().unwrap().clone();
        (r.loss.to_bits(), r.grad_norm_sq.to_bits())
    };
    let reference = last("uncompressed");
    for label in ["no_compensation", "single", "ecx"] {
        assert_eq!(last(label), reference, "{label}");
    }
    assert!(dir.path().join("summary.txt").exists());
}

#[test]
fn sweep_writes_one_file_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[sweep]\ngammas = [0.01, 0.001]\nc0s = [0.1, 0.05]\n");
    let cfg = write_config(dir.path(), "sweep.toml", &text);
    let o = ecx(&["sweep", "--config", path_str(&cfg), "--out", path_str(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csvs = fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("gamma_"))
        .count();
    assert_eq!(csvs, 4);
    assert!(dir.path().join("sweep_summary.csv").exists());
}
