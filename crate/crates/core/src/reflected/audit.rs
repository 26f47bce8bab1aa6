use serde::{Deserialize, Serialize};

use super::{ConstraintReport, ReflectedSolution, Scenario};
use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;

/// Largest empirical iterate moment next to `E[1 + xi^2 + int f(s,0,delta_0,0,delta_0)^2 ds]`.
/// Reported only: the constant relating the two is not computable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentBound {
    pub max_iterate_moment: f64,
    pub reference: f64,
    pub ratio: f64,
}

/// Residuals re-derived from a solution and its scenario.
///
/// Increments are forward differences, `dKR_k = KR_{k+1} - KR_k` for `k < n`,
/// and are paired with the constraint values at `t_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub mean_l: Vec<f64>,
    pub mean_r: Vec<f64>,
    pub tol_total: Vec<f64>,
    pub dkr: Vec<f64>,
    pub dkl: Vec<f64>,
    /// `sum_k |E[R(t_k, Y_k)]| dKR_k`.
    pub flat_off_r: f64,
    /// `sum_k |E[L(t_k, Y_k)]| dKL_k`.
    pub flat_off_l: f64,
    pub k_variation: f64,
    /// Every node where `KR` (resp. `KL`) moves has `|E[R]|` (resp. `|E[L]|`) within `tol_total`.
    pub flat_off_nodes_ok: bool,
    pub max_constraint_violation: f64,
    pub constraints_ok: bool,
    /// Signed per-step mean over particles of
    /// `Y_k - Y_{k+1} - f dt + Z dB - (K_{k+1} - K_k)`.
    pub dynamics_residual: Vec<f64>,
    pub dynamics_residual_max: f64,
    /// `K = KR - KL` bitwise, `KR`, `KL` nondecreasing from 0.
    pub assembly_ok: bool,
    /// `Y_n = xi` bitwise.
    pub terminal_exact: bool,
    pub moment_bound: MomentBound,
}

impl AuditReport {
    pub fn flat_off_total(&self) -> f64 {
        self.flat_off_r + self.flat_off_l
    }

    /// Invariants that hold exactly by construction.
    pub fn hard_invariants_hold(&self) -> bool {
        self.assembly_ok && self.terminal_exact
    }
}

fn forward_increments(cum: &[f64]) -> Vec<f64> {
    cum.windows(2).map(|w| w[1] - w[0]).collect()
}

fn nondecreasing_from_zero(cum: &[f64]) -> bool {
    cum.first() == Some(&0.0) && cum.windows(2).all(|w| w[1] >= w[0])
}

pub fn audit_solution(solution: &ReflectedSolution, scenario: &Scenario) -> Result<AuditReport> {
    let ensemble = scenario.ensemble()?;
    let grid = scenario.grid;
    let (n, np, d) = (grid.n_steps(), ensemble.n_particles(), ensemble.dim());
    if solution.grid != grid || solution.n_particles != np || solution.dim != d {
        return Err(Error::EnsembleMismatch("solution does not match the scenario".into()));
    }
    let lens_ok = solution.y.len() == (n + 1) * np
        && solution.z.len() == (n + 1) * np * d
        && [&solution.k, &solution.kr, &solution.kl].iter().all(|v| v.len() == n + 1);
    if !lens_ok {
        return Err(Error::DimensionMismatch("solution arrays do not match the grid".into()));
    }

    let cons = ConstraintReport::compute(&grid, &scenario.losses, &ensemble, &solution.y, scenario.root_tol);
    let dkr = forward_increments(&solution.kr);
    let dkl = forward_increments(&solution.kl);
    let mut flat_off_r = 0.0;
    let mut flat_off_l = 0.0;
    let mut flat_off_nodes_ok = true;
    for k in 0..n {
        flat_off_r += cons.mean_r[k].abs() * dkr[k];
        flat_off_l += cons.mean_l[k].abs() * dkl[k];
        if (dkr[k] > 0.0 && cons.mean_r[k].abs() > cons.tol_total[k])
            || (dkl[k] > 0.0 && cons.mean_l[k].abs() > cons.tol_total[k])
        {
            flat_off_nodes_ok = false;
        }
    }

    let dt = grid.dt();
    let mut dynamics_residual = Vec::with_capacity(n);
    for k in 0..n {
        let t = grid.t(k);
        let y_k = solution.y_at(k);
        let y_next = solution.y_at(k + 1);
        let mu = EmpiricalMeasure::new(1, y_k.to_vec())?;
        let nu = EmpiricalMeasure::new(d, solution.z[k * np * d..(k + 1) * np * d].to_vec())?;
        let dk = solution.k[k + 1] - solution.k[k];
        let mut acc = 0.0;
        for i in 0..np {
            let z = solution.z_of(k, i);
            let f = scenario.generator.eval(t, y_k[i], &mu, z, &nu);
            let zdb: f64 = z.iter().zip(ensemble.increment(k, i)).map(|(a, b)| a * b).sum();
            acc += y_k[i] - y_next[i] - f * dt + zdb - dk;
        }
        dynamics_residual.push(acc / np as f64);
    }
    let dynamics_residual_max = dynamics_residual.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

    let assembly_ok = solution.k.iter().zip(solution.kr.iter().zip(&solution.kl)).all(|(k, (r, l))| *k == r - l)
        && nondecreasing_from_zero(&solution.kr)
        && nondecreasing_from_zero(&solution.kl);
    let xi = scenario.terminal.values(&ensemble)?;
    let terminal_exact = solution.y_at(n) == xi.as_slice();

    let dirac_y = EmpiricalMeasure::new(1, vec![0.0])?;
    let dirac_z = EmpiricalMeasure::new(d, vec![0.0; d])?;
    let zero_z = vec![0.0; d];
    let f0: f64 = (0..n)
        .map(|k| scenario.generator.eval(grid.t(k), 0.0, &dirac_y, &zero_z, &dirac_z).powi(2) * dt)
        .sum();
    let reference = 1.0 + xi.iter().map(|x| x * x).sum::<f64>() / np as f64 + f0;
    let max_iterate_moment = solution.iterate_moments.iter().fold(0.0_f64, |m, &v| m.max(v));

    Ok(AuditReport {
        mean_l: cons.mean_l,
        mean_r: cons.mean_r,
        tol_total: cons.tol_total,
        dkr,
        dkl,
        flat_off_r,
        flat_off_l,
        k_variation: solution.k_variation(),
        flat_off_nodes_ok,
        max_constraint_violation: cons.max_violation,
        constraints_ok: cons.satisfied,
        dynamics_residual,
        dynamics_residual_max,
        assembly_ok,
        terminal_exact,
        moment_bound: MomentBound { max_iterate_moment, reference, ratio: max_iterate_moment / reference },
    })
}
