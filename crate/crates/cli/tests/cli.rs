use std::fs;
use std::path::Path;
use std::process::Command;

use boost_cli::config::{Branching, Overrides, RunConfig};
use boost_cli::report::Table;
use boost_core::{Design, Method};
use boost_solver::BranchRule;

fn boost(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_boost")).args(args).output().expect("binary runs")
}

/// Lines of a written file below its `#` header.
fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn short_config(dir: &Path, hours: usize) -> String {
    let path = dir.join("run.toml");
    let text = format!("[trace]\nhours = {hours}\nwindow_hours = 24\n\n[run]\nout = \"{}\"\n", dir.join("out").display());
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn default_config_round_trips_through_toml() {
    let config = RunConfig::default();
    assert_eq!(RunConfig::from_toml(&config.to_toml()).unwrap(), config);
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(RunConfig::from_toml("[oo_plan]\nconfidance = 0.9\n").is_err());
    assert!(RunConfig::from_toml("[nonsense]\n").is_err());
}

#[test]
fn partial_sections_keep_defaults() {
    let c = RunConfig::from_toml("[solver]\nbranching = \"most-fractional\"\n\n[oo_plan]\nn_override = 100\n").unwrap();
    assert_eq!(c.solver.branching, Branching::MostFractional);
    assert_eq!(c.solver.milp_options().branching, BranchRule::MostFractional);
    assert_eq!(c.oo_plan.n_override, Some(100));
    assert_eq!(c.oo_plan.confidence, RunConfig::default().oo_plan.confidence);
    assert_eq!(RunConfig::default().solver.branching, Branching::Reliability);
}

#[test]
fn overrides_take_precedence() {
    let mut c = RunConfig::default();
    c.apply(&Overrides { seed: Some(9), method: Some(Method::Dp), design: Some(Design::new(100.0, 50.0)), ..Overrides::default() });
    assert_eq!((c.trace.synth_seed, c.sampling.seed), (9, 9));
    assert_eq!(c.run.method, Method::Dp);
    assert_eq!(c.design(), Some(Design::new(100.0, 50.0)));
}

#[test]
fn table_text_is_aligned_and_csv_is_plain() {
    let mut t = Table::new("T", &["a", "long name"]);
    t.push(vec!["12345".into(), "x".into()]);
    let text = t.to_text();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "T");
    // numeric-style columns are right-aligned
    assert_eq!(lines[1].len(), lines[3].len());
    assert!(lines[3].starts_with("12345"));
    assert_eq!(t.to_csv().unwrap(), "a,long name\n12345,x\n");
}

#[test]
fn bad_arguments_exit_with_one() {
    assert_eq!(boost(&["size", "--bogus"]).status.code(), Some(1));
    assert_eq!(boost(&["dispatch", "--design", "abc"]).status.code(), Some(1));
    assert_eq!(boost(&["--help"]).status.code(), Some(0));
}

#[test]
fn dispatch_without_a_design_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), 48);
    let out = boost(&["--config", &cfg, "dispatch"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--design"));
}

#[test]
fn synth_writes_the_requested_hours() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_string_lossy().into_owned();
    let out = boost(&["--seed", "3", "--out", &out_dir, "synth", "--hours", "48"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("synth_seed3.csv")).unwrap();
    assert_eq!(data_lines(&csv).len(), 49);
}

#[test]
fn dispatch_writes_a_schedule_with_a_closing_soc_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), 48);
    let out = boost(&["--config", &cfg, "dispatch", "--method", "milp", "--design", "1000,800"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let schedule = fs::read_to_string(dir.path().join("out/schedule_milp.csv")).unwrap();
    let rows = data_lines(&schedule);
    assert!(rows[0].starts_with("hour,grid_kw,diesel_kw,pv_kw,charge_kw,discharge_kw,soc_kwh,diesel_on"));
    assert_eq!(rows.len(), 1 + 48 + 1);
    assert!(dir.path().join("out/dispatch_milp.txt").exists());
}
