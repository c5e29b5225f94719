use std::path::Path;
use std::process::{Command, Output};

use divfree_cli::config::{parse_config_text, parse_tau, CflArg};
use divfree_cli::format::{fix3, full, sci3, tau_label};

fn divfree(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divfree"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn csv_rows(path: impl AsRef<Path>) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn number_formats() {
    assert_eq!(sci3(Some(4.77e-2)), "4.77e-02");
    assert_eq!(sci3(Some(1.23456e3)), "1.23e+03");
    assert_eq!(sci3(None), "nan");
    assert_eq!(sci3(Some(f64::INFINITY)), "nan");
    assert_eq!(fix3(Some(1.9649)), "1.96");
    assert_eq!(fix3(Some(0.97)), "0.970");
    assert_eq!(fix3(Some(12.34)), "12.3");
    assert_eq!(full(Some(0.1)), "1.0000000000000001e-1");
    assert_eq!(full(Some(0.1)).parse::<f64>().unwrap(), 0.1);
    assert_eq!(full(None), "nan");
    assert_eq!(tau_label(1.0 / 184.0), "1/184");
    assert_eq!(tau_label(0.3), "3.00e-01");
}

#[test]
fn time_step_parsing() {
    assert_eq!(parse_tau("1/16").unwrap(), 0.0625);
    assert_eq!(parse_tau(" 0.0625 ").unwrap(), 0.0625);
    assert_eq!(parse_tau("6.25e-2").unwrap(), 0.0625);
    for bad in ["", "0", "-1/2", "1/0", "a/b", "nan"] {
        assert!(parse_tau(bad).is_err(), "{bad:?}");
    }
}

#[test]
fn config_file_parsing() {
    let f = parse_config_text("# comment\n[run]\nk = 2\nn_list = 4, 8\ncfl = std\nT = 0.5 # trailing\nf_zero = true\n").unwrap();
    assert_eq!(f.k, Some(2));
    assert_eq!(f.n_list.as_deref(), Some("4, 8"));
    assert_eq!(f.cfl, Some(CflArg::Std));
    assert_eq!(f.final_time, Some(0.5));
    assert!(f.f_zero);
    assert!(parse_config_text("bogus = 1\n").is_err());
    assert!(parse_config_text("k 2\n").is_err());
    assert!(parse_config_text("cfl = sideways\n").is_err());
}

#[test]
fn unsupported_degree_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let out = divfree(d.path(), &["single-run", "--k", "3"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("supported degrees are 1 and 2"), "{err}");
}

#[test]
fn malformed_flags_are_usage_errors() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(divfree(d.path(), &["single-run", "--bogus"]).status.code(), Some(1));
    assert_eq!(divfree(d.path(), &["nonsense"]).status.code(), Some(1));
    assert_eq!(divfree(d.path(), &["single-run", "--tau", "x"]).status.code(), Some(1));
    assert_eq!(divfree(d.path(), &["single-run", "--perturb", "0.9"]).status.code(), Some(1));
    assert_eq!(divfree(d.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn single_run_writes_consistent_tables() {
    let d = tempfile::tempdir().unwrap();
    let out = divfree(d.path(), &["single-run", "--k", "1", "--n", "8", "--tau", "0.0625", "--T", "2", "--out-dir", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let o = d.path().join("o");
    let summary = csv_rows(o.join("single-run.csv"));
    assert_eq!(
        summary[0],
        ["tau", "n_steps", "status", "l2_norm", "l2_error", "h1_error", "div_norm", "max_div", "wall_time_s"]
    );
    assert_eq!(summary[1][1], "32");
    assert_eq!(summary[1][2], "completed");
    let l2: f64 = summary[1][4].parse().unwrap();
    assert!(l2 > 0.0 && l2 < 0.1);
    let md = read(o.join("single-run.md"));
    // the Markdown carries the same numbers rounded to three digits
    for col in 3..8 {
        let v: f64 = summary[1][col].parse().unwrap();
        assert!(md.contains(&sci3(Some(v))), "column {col}");
    }
    assert!(read(o.join("single-run_config.txt")).contains("tau = 0.0625"));
    let steps_text = read(o.join("single-run_steps.csv"));
    assert!(!steps_text.contains('\r'));
    let steps = csv_rows(o.join("single-run_steps.csv"));
    assert_eq!(steps[0], ["step", "t", "l2_norm", "div_norm"]);
    assert_eq!(steps.len(), 33);
    assert_eq!(steps[32][1].parse::<f64>().unwrap(), 2.0);
    assert!(steps[1..].iter().all(|r| r[3].parse::<f64>().unwrap() <= 1e-10));
}

#[test]
fn single_run_blow_up_exits_with_two() {
    let d = tempfile::tempdir().unwrap();
    let out = divfree(d.path(), &["single-run", "--n", "8", "--tau", "1/12", "--out-dir", "o"]);
    assert_eq!(out.status.code(), Some(2));
    let summary = csv_rows(d.path().join("o/single-run.csv"));
    assert!(summary[1][2].starts_with("blow-up@"));
    assert_eq!(summary[1][4], "nan");
}

#[test]
fn zero_forcing_emits_energy_residuals() {
    let d = tempfile::tempdir().unwrap();
    let out = divfree(d.path(), &["single-run", "--n", "4", "--tau", "1/32", "--T", "0.25", "--f-zero", "--format", "csv", "--out-dir", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let steps = csv_rows(d.path().join("o/single-run_steps.csv"));
    assert_eq!(steps[0][4], "energy_residual");
    for r in &steps[1..] {
        assert!(r[4].parse::<f64>().unwrap().abs() <= 1e-12);
    }
    assert!(!d.path().join("o/single-run.md").exists());
}

#[test]
fn compare_cn_stacks_two_blocks() {
    let d = tempfile::tempdir().unwrap();
    let out = divfree(d.path(), &["compare-cn", "--tau-list", "1/16,1/24", "--out-dir", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(d.path().join("o/compare-cn.csv"));
    assert_eq!(rows.len(), 5);
    let schemes: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(schemes, ["rk2", "rk2", "cn", "cn"]);
    let md = read(d.path().join("o/compare-cn.md"));
    assert!(md.contains("### Explicit second-order RK") && md.contains("### Semi-implicit CN"));
    for r in &rows[1..] {
        assert!(md.contains(&sci3(Some(r[4].parse().unwrap()))));
    }
}

#[test]
fn convergence_marks_blow_up_rows_nan() {
    let d = tempfile::tempdir().unwrap();
    let out = divfree(d.path(), &["convergence", "--cfl", "std", "--co", "2", "--n-list", "8,16", "--out-dir", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(d.path().join("o/convergence.csv"));
    assert_eq!(rows[0], ["n", "tau", "status", "l2_error", "l2_rate", "h1_error", "h1_rate", "max_div"]);
    assert!(rows[1..].iter().any(|r| r[2].starts_with("blow-up") && r[3] == "nan"));
    assert!(read(d.path().join("o/convergence.md")).contains("| nan |"));
}

#[test]
fn cfl_sweep_rejects_empty_list() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(divfree(d.path(), &["cfl-sweep", "--n-list", ""]).status.code(), Some(1));
    assert_eq!(divfree(d.path(), &["cfl-sweep", "--n-list", ","]).status.code(), Some(1));
}

#[test]
fn cfl_sweep_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    for dir in ["a", "b"] {
        let out = divfree(d.path(), &["cfl-sweep", "--n-list", "4,6", "--out-dir", dir, "--format", "csv"]);
        assert_eq!(out.status.code(), Some(0));
    }
    let a = read(d.path().join("a/cfl-sweep.csv"));
    assert_eq!(a, read(d.path().join("b/cfl-sweep.csv")));
    assert_eq!(read(d.path().join("a/cfl-sweep_trace.csv")), read(d.path().join("b/cfl-sweep_trace.csv")));
    let rows = csv_rows(d.path().join("a/cfl-sweep.csv"));
    assert_eq!(rows[0][..4], ["n", "tau_max", "tau_max_label", "alpha"]);
    assert!(rows[1][2].starts_with("1/") && rows[2][2].starts_with("1/"));
    assert_eq!(rows[1][3], "nan");
    assert_ne!(rows[2][3], "nan");
}

#[test]
fn flags_override_config_file() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("run.cfg"), "k = 2\nn = 4\ntau = 1/20\nT = 0.1\nout_dir = fromfile\n").unwrap();
    let out = divfree(d.path(), &["single-run", "--config", "run.cfg", "--k", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let echo = read(d.path().join("fromfile/single-run_config.txt"));
    assert!(echo.contains("k = 1\n") && echo.contains("n = 4\n") && echo.contains("T = 0.1\n"));
    std::fs::write(d.path().join("bad.cfg"), "colour = blue\n").unwrap();
    assert_eq!(divfree(d.path(), &["single-run", "--config", "bad.cfg"]).status.code(), Some(1));
    assert_eq!(divfree(d.path(), &["single-run", "--config", "missing.cfg"]).status.code(), Some(1));
}
