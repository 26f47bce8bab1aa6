use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use meanrefl_cli::commands::{with_axis, SCENARIO_ECHO};
use meanrefl_cli::export::{DETERMINISTIC_CSV, PLOT_CSV};
use meanrefl_cli::{audit, load_scenario, parse_config, run, sweep, CliError, SweepAxis};
use meanrefl_core::catalog::{preset, ScenarioSpec, PRESET_NAMES};

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn scenario_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.cfg"))
}

fn small(name: &str, particles: usize) -> ScenarioSpec {
    let mut spec = preset(name).unwrap();
    spec.n_particles = particles;
    spec
}

#[test]
fn shipped_scenario_files_are_the_catalog() {
    for name in PRESET_NAMES {
        let path = scenario_file(name);
        assert_eq!(load_scenario(path.to_str().unwrap()).unwrap(), preset(name).unwrap(), "{name}");
    }
}

#[test]
fn inactive_barriers_report_zero_variation() {
    let out = scratch("inactive");
    let (report, _) = run(&small("inactive_barriers", 2000), &out).unwrap();
    assert_eq!(report.k_variation, 0.0);
    assert_eq!(report.audit.flat_off_total(), 0.0);
    for f in [DETERMINISTIC_CSV, PLOT_CSV, SCENARIO_ECHO, "particles.csv", "picard.json", "report.json", "timings.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let echoed = fs::read_to_string(out.join(SCENARIO_ECHO)).unwrap();
    assert_eq!(parse_config(&echoed, "echo").unwrap(), report.scenario);
}

#[test]
fn plot_data_is_long_format() {
    let out = scratch("plot");
    let spec = small("constant_drift_lower_barrier", 1000);
    let (report, _) = run(&spec, &out).unwrap();
    let text = fs::read_to_string(out.join(PLOT_CSV)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("series,t,value"));
    let mut counts = std::collections::BTreeMap::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 3);
        fields[1].parse::<f64>().unwrap();
        fields[2].parse::<f64>().unwrap();
        *counts.entry(fields[0].to_string()).or_insert(0) += 1;
    }
    for series in ["K", "EL", "ER", "meanY"] {
        assert_eq!(counts[series], spec.n_steps + 1, "{series}");
    }
    assert_eq!(counts["delta"], report.iterations);
}

#[test]
fn lower_barrier_report_matches_hand_oracle() {
    let out = scratch("lower_barrier");
    let (report, _) = run(&preset("constant_drift_lower_barrier").unwrap(), &out).unwrap();
    let cf = report.closed_form.expect("closed form applies");
    assert!(cf.k_error <= 0.05, "{cf:?}");
    assert!(cf.y_error.unwrap() <= 0.05 && cf.z_error.unwrap() <= 0.1, "{cf:?}");
    let a = &report.audit;
    assert!(a.constraints_ok);
    for k in 0..a.mean_l.len() {
        assert!(a.mean_l[k] <= a.tol_total[k] && a.mean_r[k] >= -a.tol_total[k], "node {k}");
    }
}

#[test]
fn rerun_is_byte_identical() {
    let spec = small("mao_log_driver", 1500);
    let (a, b) = (scratch("rerun_a"), scratch("rerun_b"));
    run(&spec, &a).unwrap();
    run(&spec, &b).unwrap();
    for f in [DETERMINISTIC_CSV, PLOT_CSV, SCENARIO_ECHO, "particles.csv", "picard.json", "report.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let mut other = spec.clone();
    other.seed += 1;
    let c = scratch("rerun_c");
    run(&other, &c).unwrap();
    assert_ne!(fs::read(a.join("particles.csv")).unwrap(), fs::read(c.join("particles.csv")).unwrap());
}

#[test]
fn audit_after_run_reproduces_the_report() {
    let out = scratch("audit_roundtrip");
    let spec = small("nonlinear_losses", 1500);
    let (report, _) = run(&spec, &out).unwrap();
    let outcome = audit(&out, &spec).unwrap();
    assert_eq!(outcome.matches_report, Some(true), "{:?}", outcome.mismatched_fields);
    assert_eq!(outcome.audit, report.audit);
}

fn rewrite_deterministic(dir: &Path, edit: impl Fn(usize, &mut [f64])) {
    let path = dir.join(DETERMINISTIC_CSV);
    let text = fs::read_to_string(&path).unwrap();
    let mut out = String::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            out.push_str(line);
        } else {
            let mut vals: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
            edit(idx - 1, &mut vals);
            out.push_str(&vals.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        }
        out.push('\n');
    }
    fs::write(path, out).unwrap();
}

#[test]
fn perturbed_k_raises_flat_off() {
    let out = scratch("audit_perturbed");
    let spec = small("constant_drift_lower_barrier", 2000);
    let (report, _) = run(&spec, &out).unwrap();
    let slack = report.audit.mean_r.iter().position(|r| r.abs() > 0.1).unwrap();
    rewrite_deterministic(&out, |node, row| {
        if node > slack {
            row[1] += 0.02;
            row[2] += 0.02;
        }
    });
    let outcome = audit(&out, &spec).unwrap();
    assert_eq!(outcome.matches_report, Some(false));
    assert!(outcome.mismatched_fields.contains(&"flat_off_r".to_string()));
    assert!(outcome.audit.flat_off_total() > report.audit.flat_off_total() + 0.02 * 0.1);
    assert!(!outcome.audit.flat_off_nodes_ok);
}

#[test]
fn broken_assembly_fails_the_audit() {
    let out = scratch("audit_assembly");
    let spec = small("constant_drift_lower_barrier", 500);
    run(&spec, &out).unwrap();
    rewrite_deterministic(&out, |node, row| {
        if node == 3 {
            row[1] += 1e-3;
        }
    });
    assert!(matches!(audit(&out, &spec), Err(CliError::Invariant(_))));
}

#[test]
fn malformed_exports_are_parse_errors() {
    let out = scratch("audit_malformed");
    let spec = small("inactive_barriers", 300);
    run(&spec, &out).unwrap();
    let path = out.join(DETERMINISTIC_CSV);
    let text = fs::read_to_string(&path).unwrap().replacen("\n0.01,", "\n0.01,oops", 1);
    fs::write(&path, text).unwrap();
    match audit(&out, &spec) {
        Err(CliError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
    let mut wrong = spec.clone();
    wrong.n_steps = 50;
    let fresh = scratch("audit_wrong_grid");
    run(&spec, &fresh).unwrap();
    assert!(matches!(audit(&fresh, &wrong), Err(CliError::Parse { .. })));
}

#[test]
fn single_value_sweep_equals_run() {
    let spec = small("linear_meanfield", 3000);
    let (report, _) = run(&spec, &scratch("sweep_single_run")).unwrap();
    let rows = sweep(&spec, SweepAxis::Particles, &[3000.0], &scratch("sweep_single")).unwrap();
    let row = &rows[0];
    let cf = report.closed_form.unwrap();
    assert_eq!(row.closed_form_error, Some(cf.primary()));
    assert_eq!(row.k_error, Some(cf.k_error));
    assert_eq!(row.final_delta, *report.picard_history.last().unwrap());
    assert_eq!(row.iterations, report.iterations);
    assert_eq!(row.dynamics_residual, report.audit.dynamics_residual_max);
    assert_eq!(row.flat_off, report.audit.flat_off_total());
}

#[test]
fn closed_form_error_falls_with_particles_on_average() {
    let values = [100.0, 1000.0, 10000.0];
    let mut avg = [0.0; 3];
    let seeds = 8;
    let out = scratch("sweep_particles");
    for s in 0..seeds {
        let mut spec = preset("linear_meanfield").unwrap();
        spec.seed = 1 + s;
        let rows = sweep(&spec, SweepAxis::Particles, &values, &out).unwrap();
        for (a, r) in avg.iter_mut().zip(&rows) {
            *a += r.closed_form_error.unwrap() / seeds as f64;
        }
    }
    assert!(avg[1] <= avg[0] && avg[2] <= avg[1], "{avg:?}");
    assert!(fs::read_to_string(out.join("sweep.csv")).unwrap().starts_with("N,closed_form_error"));
}

#[test]
fn dynamics_residual_falls_with_steps() {
    let spec = preset("nonlinear_losses").unwrap();
    let out = scratch("sweep_steps");
    let rows = sweep(&spec, SweepAxis::NSteps, &[25.0, 50.0, 100.0], &out).unwrap();
    assert!(rows.windows(2).all(|w| w[1].dynamics_residual <= w[0].dynamics_residual), "{rows:?}");
    assert!(rows.iter().all(|r| r.closed_form_error.is_none()));
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(table.starts_with("n_steps,closed_form_error,k_error,final_delta,iterations,dynamics_residual,flat_off\n"));
    assert_eq!(table.lines().count(), 4);
    assert_eq!(fs::read_to_string(out.join("sweep_timings.csv")).unwrap().lines().count(), 4);
}

#[test]
fn sweep_rejects_bad_values() {
    let spec = small("inactive_barriers", 200);
    let out = scratch("sweep_bad");
    assert!(matches!(sweep(&spec, SweepAxis::Particles, &[500.0, 200.0], &out), Err(CliError::Config(_))));
    assert!(matches!(sweep(&spec, SweepAxis::Particles, &[], &out), Err(CliError::Config(_))));
    assert!(matches!(with_axis(&spec, SweepAxis::NSteps, 12.5), Err(CliError::Config(_))));
    assert!(matches!(with_axis(&spec, SweepAxis::Particles, 1.0), Err(CliError::Config(_))));
    assert!("steps".parse::<SweepAxis>().is_err());
    assert_eq!("basis_degree".parse::<SweepAxis>().unwrap(), SweepAxis::BasisDegree);
}

fn meanrefl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_meanrefl")).args(args).output().unwrap()
}

#[test]
fn binary_exit_status() {
    let out = scratch("bin_run");
    let o = out.to_str().unwrap();
    let ok = meanrefl(&["run", "--scenario", "linear_meanfield", "--out", o, "--particles", "400", "--steps", "20"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("Picard iterations"));

    let echo = out.join(SCENARIO_ECHO);
    let audited = meanrefl(&["audit", "--in", o, "--scenario", echo.to_str().unwrap()]);
    assert!(audited.status.success(), "{}", String::from_utf8_lossy(&audited.stderr));

    let mismatch = meanrefl(&["audit", "--in", o, "--scenario", "linear_meanfield"]);
    assert!(!mismatch.status.success());

    let unknown = meanrefl(&["run", "--scenario", "no_such_scenario", "--out", o]);
    assert!(!unknown.status.success());
    let bad_range = meanrefl(&["run", "--scenario", "linear_meanfield", "--out", o, "--particles", "1"]);
    assert!(!bad_range.status.success());
    assert!(String::from_utf8_lossy(&bad_range.stderr).contains("error"));
}

#[test]
fn binary_skorokhod_subcommand() {
    let dir = scratch("bin_skorokhod");
    fs::create_dir_all(&dir).unwrap();
    let input = dir.join("path.csv");
    let mut text = String::from("t,s\n");
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        text.push_str(&format!("{t},{}\n", -2.0 * t));
    }
    fs::write(&input, text).unwrap();
    let out = dir.join("k.csv");
    let o = meanrefl(&[
        "skorokhod",
        "--in",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--lower=-1",
        "--upper=1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let result = fs::read_to_string(out).unwrap();
    let last: Vec<f64> = result.lines().last().unwrap().split(',').map(|f| f.parse().unwrap()).collect();
    assert!((last[1] + 1.0).abs() <= 1e-9 && (last[2] - 1.0).abs() <= 1e-9, "{last:?}");
}
