//! Solution artifacts on disk. Floats are written with the shortest
//! representation that parses back to the same value, so files re-load bitwise.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use meanrefl_core::reflected::ConstraintReport;
use meanrefl_core::{AuditReport, ReflectedSolution, Scenario};

use crate::error::{CliError, Result};

pub const DETERMINISTIC_CSV: &str = "deterministic.csv";
pub const PARTICLES_CSV: &str = "particles.csv";
pub const PICARD_JSON: &str = "picard.json";
pub const REPORT_JSON: &str = "report.json";
pub const TIMINGS_JSON: &str = "timings.json";
pub const PLOT_CSV: &str = "plot.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardRecord {
    pub picard_history: Vec<f64>,
    pub iterate_moments: Vec<f64>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// `deterministic.csv`, `particles.csv`, `picard.json`, and the long-format `plot.csv`.
pub fn write_solution(dir: &Path, sol: &ReflectedSolution, audit: &AuditReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let grid = sol.grid;
    let n = grid.n_steps();

    let path = dir.join(DETERMINISTIC_CSV);
    let mut w = create(&path)?;
    let io = |e| CliError::io(&path, e);
    writeln!(w, "t,K,KR,KL,EL,ER").map_err(io)?;
    for k in 0..=n {
        writeln!(w, "{},{},{},{},{},{}", grid.t(k), sol.k[k], sol.kr[k], sol.kl[k], audit.mean_l[k], audit.mean_r[k])
            .map_err(io)?;
    }
    finish(w, &path)?;

    let path = dir.join(PARTICLES_CSV);
    let mut w = create(&path)?;
    let io = |e| CliError::io(&path, e);
    let z_cols: Vec<String> = (1..=sol.dim).map(|j| format!("Z_{j}")).collect();
    writeln!(w, "t,particle,Y,{}", z_cols.join(",")).map_err(io)?;
    let mut line = String::new();
    for k in 0..=n {
        let t = grid.t(k);
        for i in 0..sol.n_particles {
            use std::fmt::Write as _;
            line.clear();
            write!(line, "{t},{i},{}", sol.y_at(k)[i]).unwrap();
            for z in sol.z_of(k, i) {
                write!(line, ",{z}").unwrap();
            }
            writeln!(w, "{line}").map_err(io)?;
        }
    }
    finish(w, &path)?;

    write_json(
        &dir.join(PICARD_JSON),
        &PicardRecord { picard_history: sol.picard_history.clone(), iterate_moments: sol.iterate_moments.clone() },
    )?;

    let path = dir.join(PLOT_CSV);
    let mut w = create(&path)?;
    let io = |e| CliError::io(&path, e);
    writeln!(w, "series,t,value").map_err(io)?;
    let mean_y = sol.mean_y();
    for (series, values) in [("K", &sol.k), ("EL", &audit.mean_l), ("ER", &audit.mean_r), ("meanY", &mean_y)] {
        for (k, v) in values.iter().enumerate() {
            writeln!(w, "{series},{},{v}", grid.t(k)).map_err(io)?;
        }
    }
    for (m, v) in sol.picard_history.iter().enumerate() {
        writeln!(w, "delta,{},{v}", m + 1).map_err(io)?;
    }
    finish(w, &path)
}

fn csv_rows(path: &Path, header: &str) -> Result<Vec<(usize, Vec<f64>)>> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines.next().transpose().map_err(|e| CliError::io(path, e))?;
    if first.as_deref() != Some(header) {
        return Err(CliError::parse(&name, 1, format!("expected header '{header}'")));
    }
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let lineno = idx + 2;
        let vals = line
            .split(',')
            .map(|f| f.parse::<f64>().map_err(|_| CliError::parse(&name, lineno, format!("bad number '{f}'"))))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != width {
            return Err(CliError::parse(&name, lineno, format!("expected {width} fields, got {}", vals.len())));
        }
        rows.push((lineno, vals));
    }
    Ok(rows)
}

/// Rebuild a solution from the files written by [`write_solution`].
pub fn read_solution(dir: &Path, scenario: &Scenario) -> Result<ReflectedSolution> {
    let grid = scenario.grid;
    let (n, np, d) = (grid.n_steps(), scenario.n_particles, scenario.dim);

    let path = dir.join(DETERMINISTIC_CSV);
    let name = path.display().to_string();
    let rows = csv_rows(&path, "t,K,KR,KL,EL,ER")?;
    if rows.len() != n + 1 {
        return Err(CliError::parse(&name, rows.len() + 1, format!("expected {} node rows, got {}", n + 1, rows.len())));
    }
    let (mut k, mut kr, mut kl) = (Vec::new(), Vec::new(), Vec::new());
    for (node, (line, r)) in rows.iter().enumerate() {
        if r[0] != grid.t(node) {
            return Err(CliError::parse(&name, *line, format!("time {} is not grid node {node}", r[0])));
        }
        k.push(r[1]);
        kr.push(r[2]);
        kl.push(r[3]);
    }

    let path = dir.join(PARTICLES_CSV);
    let name = path.display().to_string();
    let z_cols: Vec<String> = (1..=d).map(|j| format!("Z_{j}")).collect();
    let rows = csv_rows(&path, &format!("t,particle,Y,{}", z_cols.join(",")))?;
    if rows.len() != (n + 1) * np {
        return Err(CliError::parse(&name, rows.len() + 1, format!("expected {} rows, got {}", (n + 1) * np, rows.len())));
    }
    let mut y = Vec::with_capacity((n + 1) * np);
    let mut z = Vec::with_capacity((n + 1) * np * d);
    for (idx, (line, r)) in rows.iter().enumerate() {
        let (node, i) = (idx / np, idx % np);
        if r[0] != grid.t(node) || r[1] != i as f64 {
            return Err(CliError::parse(&name, *line, format!("expected node {node}, particle {i}")));
        }
        y.push(r[2]);
        z.extend_from_slice(&r[3..]);
    }

    let record: PicardRecord = read_json(&dir.join(PICARD_JSON))?;
    let ensemble = scenario.ensemble()?;
    let constraint_report = ConstraintReport::compute(&grid, &scenario.losses, &ensemble, &y, scenario.root_tol);
    Ok(ReflectedSolution {
        grid,
        dim: d,
        n_particles: np,
        seed: scenario.seed,
        y,
        z,
        k,
        kr,
        kl,
        picard_history: record.picard_history,
        iterate_moments: record.iterate_moments,
        constraint_report,
    })
}
