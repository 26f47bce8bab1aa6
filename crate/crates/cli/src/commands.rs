use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use meanrefl_core::catalog::ScenarioSpec;
use meanrefl_core::{
    audit_solution, solve_reflected, solve_skorokhod, AuditReport, ConstraintPair, InputPath, TimeGrid,
};

use crate::closed_form::{self, ClosedFormErrors};
use crate::config::to_config_text;
use crate::error::{CliError, Result};
use crate::export::{self, read_json, write_json, REPORT_JSON, TIMINGS_JSON};

pub const SCENARIO_ECHO: &str = "scenario.cfg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: ScenarioSpec,
    pub iterations: usize,
    pub picard_history: Vec<f64>,
    pub k_variation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<ClosedFormErrors>,
    pub audit: AuditReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub solve_seconds: f64,
    pub audit_seconds: f64,
    pub export_seconds: f64,
}

/// Solve, audit and export. Artifacts are written even when a hard invariant
/// fails; the failure is then returned as [`CliError::Invariant`].
pub fn run(spec: &ScenarioSpec, out: &Path) -> Result<(RunReport, Timings)> {
    let scenario = spec.build()?;
    let t0 = Instant::now();
    let sol = solve_reflected(&scenario)?;
    let solve_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let audit = audit_solution(&sol, &scenario)?;
    let closed_form = closed_form::compare(spec, &sol, &scenario.ensemble()?);
    let audit_seconds = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    export::write_solution(out, &sol, &audit)?;
    let report = RunReport {
        scenario: spec.clone(),
        iterations: sol.iterations(),
        picard_history: sol.picard_history.clone(),
        k_variation: sol.k_variation(),
        closed_form,
        audit,
    };
    write_json(&out.join(REPORT_JSON), &report)?;
    let echo = out.join(SCENARIO_ECHO);
    fs::write(&echo, to_config_text(spec)).map_err(|e| CliError::io(&echo, e))?;
    let timings = Timings { solve_seconds, audit_seconds, export_seconds: t2.elapsed().as_secs_f64() };
    write_json(&out.join(TIMINGS_JSON), &timings)?;

    check_hard_invariants(&report.audit)?;
    Ok((report, timings))
}

fn check_hard_invariants(audit: &AuditReport) -> Result<()> {
    if !audit.assembly_ok {
        return Err(CliError::Invariant("K = KR - KL with nondecreasing KR, KL from 0".into()));
    }
    if !audit.terminal_exact {
        return Err(CliError::Invariant("Y_T = xi".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditOutcome {
    pub audit: AuditReport,
    /// Whether the re-derived audit equals the one in `report.json`, when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matches_report: Option<bool>,
    pub mismatched_fields: Vec<String>,
}

/// Re-derive the audit from exported files and compare with the stored report.
pub fn audit(dir: &Path, spec: &ScenarioSpec) -> Result<AuditOutcome> {
    let scenario = spec.build()?;
    let sol = export::read_solution(dir, &scenario)?;
    let audit = audit_solution(&sol, &scenario)?;
    let report_path = dir.join(REPORT_JSON);
    let (matches_report, mismatched_fields) = if report_path.is_file() {
        let stored: serde_json::Value = read_json(&report_path)?;
        let fresh = serde_json::to_value(&audit)?;
        let stored = stored.get("audit").cloned().unwrap_or(serde_json::Value::Null);
        let mismatched: Vec<String> = match (fresh.as_object(), stored.as_object()) {
            (Some(f), Some(s)) => {
                f.iter().filter(|(key, v)| s.get(key.as_str()) != Some(v)).map(|(key, _)| key.clone()).collect()
            }
            _ => vec!["audit".into()],
        };
        (Some(mismatched.is_empty()), mismatched)
    } else {
        (None, Vec::new())
    };
    check_hard_invariants(&audit)?;
    Ok(AuditOutcome { audit, matches_report, mismatched_fields })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[serde(rename = "N")]
    Particles,
    NSteps,
    BasisDegree,
    PicardTol,
}

impl FromStr for SweepAxis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" | "particles" => Ok(SweepAxis::Particles),
            "n_steps" => Ok(SweepAxis::NSteps),
            "basis_degree" => Ok(SweepAxis::BasisDegree),
            "picard_tol" => Ok(SweepAxis::PicardTol),
            other => Err(CliError::Config(format!("unknown sweep axis '{other}' (N, n_steps, basis_degree, picard_tol)"))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Particles => "N",
            SweepAxis::NSteps => "n_steps",
            SweepAxis::BasisDegree => "basis_degree",
            SweepAxis::PicardTol => "picard_tol",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub closed_form_error: Option<f64>,
    pub k_error: Option<f64>,
    pub final_delta: f64,
    pub iterations: usize,
    pub dynamics_residual: f64,
    pub flat_off: f64,
}

fn integral(axis: SweepAxis, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(CliError::Config(format!("{axis} needs whole numbers, got {v}")))
    }
}

/// Apply one sweep value to a copy of `spec`.
pub fn with_axis(spec: &ScenarioSpec, axis: SweepAxis, value: f64) -> Result<ScenarioSpec> {
    let mut s = spec.clone();
    match axis {
        SweepAxis::Particles => s.n_particles = integral(axis, value)?,
        SweepAxis::NSteps => s.n_steps = integral(axis, value)?,
        SweepAxis::BasisDegree => s.basis_degree = integral(axis, value)?,
        SweepAxis::PicardTol => s.picard_tol = value,
    }
    crate::config::validate(&s)?;
    Ok(s)
}

/// Run the scenario once per value; writes `sweep.csv` and `sweep_timings.csv`.
pub fn sweep(spec: &ScenarioSpec, axis: SweepAxis, values: &[f64], out: &Path) -> Result<Vec<SweepRow>> {
    if values.is_empty() || values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CliError::Config("sweep values must be nonempty and strictly increasing".into()));
    }
    let specs = values.iter().map(|&v| with_axis(spec, axis, v)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut seconds = Vec::new();
    for (s, &value) in specs.iter().zip(values) {
        let t0 = Instant::now();
        let scenario = s.build()?;
        let sol = solve_reflected(&scenario)?;
        let audit = audit_solution(&sol, &scenario)?;
        let cf = closed_form::compare(s, &sol, &scenario.ensemble()?);
        seconds.push(t0.elapsed().as_secs_f64());
        rows.push(SweepRow {
            value,
            closed_form_error: cf.as_ref().map(ClosedFormErrors::primary),
            k_error: cf.as_ref().map(|c| c.k_error),
            final_delta: *sol.picard_history.last().unwrap_or(&0.0),
            iterations: sol.iterations(),
            dynamics_residual: audit.dynamics_residual_max,
            flat_off: audit.flat_off_total(),
        });
    }

    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut table = format!("{axis},closed_form_error,k_error,final_delta,iterations,dynamics_residual,flat_off\n");
    for r in &rows {
        table.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.value,
            opt(r.closed_form_error),
            opt(r.k_error),
            r.final_delta,
            r.iterations,
            r.dynamics_residual,
            r.flat_off
        ));
    }
    let path = out.join("sweep.csv");
    fs::write(&path, table).map_err(|e| CliError::io(&path, e))?;
    let mut timing = format!("{axis},runtime_seconds\n");
    for (r, s) in rows.iter().zip(&seconds) {
        timing.push_str(&format!("{},{s}\n", r.value));
    }
    let path = out.join("sweep_timings.csv");
    fs::write(&path, timing).map_err(|e| CliError::io(&path, e))?;
    Ok(rows)
}

/// Solve the deterministic problem for a `t,s` path on a uniform grid from 0,
/// keeping `x` in `[lower, upper]` with constraints of the given slope.
pub fn skorokhod_path(input: &Path, slope: f64, lower: f64, upper: f64, root_tol: f64, out: &Path) -> Result<()> {
    let name = input.display().to_string();
    let text = fs::read_to_string(input).map_err(|e| CliError::io(input, e))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("t,s") {
        return Err(CliError::parse(&name, 1, "expected header 't,s'"));
    }
    let mut ts = Vec::new();
    let mut ss = Vec::new();
    for (idx, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || CliError::parse(&name, idx + 2, format!("expected 't,s', got '{line}'"));
        let (t, s) = line.split_once(',').ok_or_else(bad)?;
        ts.push(t.trim().parse::<f64>().map_err(|_| bad())?);
        ss.push(s.trim().parse::<f64>().map_err(|_| bad())?);
    }
    if ts.len() < 2 {
        return Err(CliError::parse(&name, 1, "need at least two rows"));
    }
    let grid = TimeGrid::new(*ts.last().unwrap(), ts.len() - 1)?;
    for (k, &t) in ts.iter().enumerate() {
        if (t - grid.t(k)).abs() > 1e-9 * grid.horizon() {
            return Err(CliError::parse(&name, k + 2, format!("time {t} is off the uniform grid from 0")));
        }
    }
    let cons = ConstraintPair::affine(slope, move |_| upper, move |_| lower, upper - lower)?;
    let sol = solve_skorokhod(&InputPath::new(grid, ss)?, &cons, root_tol)?;
    let mut w = std::io::BufWriter::new(fs::File::create(out).map_err(|e| CliError::io(out, e))?);
    let io = |e| CliError::io(out, e);
    writeln!(w, "t,x,K,Kr,Kl").map_err(io)?;
    for k in 0..=grid.n_steps() {
        writeln!(w, "{},{},{},{},{}", grid.t(k), sol.x[k], sol.k[k], sol.kr[k], sol.kl[k]).map_err(io)?;
    }
    w.flush().map_err(io)
}
