//! Regression Monte Carlo for unconstrained mean-field BSDEs
//! `Y_t = xi + int_t^T f(s, Y_s, P_{Y_s}, Z_s, P_{Z_s}) ds - int_t^T Z_s dB_s`.
//!
//! Backward explicit Euler: with `Yhat_k = E_k[Y_{k+1}]` and
//! `Z_k = E_k[(Y_{k+1} - Yhat_k) dB_k] / dt`, set
//! `Y_k = Yhat_k + f(t_k, Yhat_k, mu_k, Z_k, nu_k) dt`, where `mu_k` is the
//! empirical law of `Yhat_k` and `nu_k` that of `Z_k`. Conditional
//! expectations are polynomial least squares in `B_{t_k}`.

use serde::{Deserialize, Serialize};

use crate::brownian::BrownianEnsemble;
use crate::error::{Error, Result};
use crate::generator::{Driver, DriverArgs, GeneratorSpec, TerminalFunctional};
use crate::grid::TimeGrid;
use crate::measure::EmpiricalMeasure;
use crate::regression::Regression;

pub const DEFAULT_BASIS_DEGREE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionDiagnostics {
    pub basis_degree: usize,
    /// Per step `k < n`: RMS over particles of `Y_{k+1} - Yhat_k`, the in-sample
    /// least-squares residual of the conditional-mean fit.
    pub projection_residual: Vec<f64>,
    /// Per step `k < n`: RMS over particles of `Y_{k+1} - Yhat_k - Z_k dB_k`.
    pub martingale_residual: Vec<f64>,
}

/// Particle-wise `(Y, Z)` on every node. `Z` at the terminal node is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardSolution {
    pub grid: TimeGrid,
    pub dim: usize,
    pub n_particles: usize,
    pub ensemble_seed: u64,
    /// `(n + 1) x N`, node-major.
    pub y: Vec<f64>,
    /// `(n + 1) x N x d`, node-major.
    pub z: Vec<f64>,
    pub diagnostics: RegressionDiagnostics,
}

impl BackwardSolution {
    pub fn y_at(&self, k: usize) -> &[f64] {
        &self.y[k * self.n_particles..(k + 1) * self.n_particles]
    }

    pub fn z_at(&self, k: usize) -> &[f64] {
        let row = self.n_particles * self.dim;
        &self.z[k * row..(k + 1) * row]
    }

    pub fn z_of(&self, k: usize, i: usize) -> &[f64] {
        let at = (k * self.n_particles + i) * self.dim;
        &self.z[at..at + self.dim]
    }

    fn same_ensemble(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.dim == other.dim
            && self.n_particles == other.n_particles
            && self.ensemble_seed == other.ensemble_seed
    }
}

/// Least-squares projections at every node `k < n`, factored once per ensemble.
#[derive(Debug, Clone)]
pub struct BackwardBasis {
    degree: usize,
    regs: Vec<Regression>,
}

impl BackwardBasis {
    pub fn new(ensemble: &BrownianEnsemble, degree: usize) -> Result<Self> {
        let grid = ensemble.grid();
        // Built in solve order so the reported step is the first one the backward pass reaches.
        let mut regs = (0..grid.n_steps())
            .rev()
            .map(|k| Regression::new(ensemble.paths_at(k), ensemble.dim(), grid.t(k).sqrt(), degree, k))
            .collect::<Result<Vec<_>>>()?;
        regs.reverse();
        Ok(Self { degree, regs })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Fitted conditional expectation of `target` given `B_{t_k}`, for `k < n`.
    pub fn project(&self, k: usize, target: &[f64]) -> Result<Vec<f64>> {
        self.regs[k].fit(target)
    }
}

/// Solve backward with an arbitrary [`Driver`] and explicit terminal values.
pub fn solve_backward<D: Driver + ?Sized>(
    ensemble: &BrownianEnsemble,
    driver: &D,
    terminal: &[f64],
    basis_degree: usize,
) -> Result<BackwardSolution> {
    let basis = BackwardBasis::new(ensemble, basis_degree)?;
    solve_backward_with(ensemble, &basis, driver, terminal)
}

/// As [`solve_backward`] with a basis built earlier on the same ensemble.
pub fn solve_backward_with<D: Driver + ?Sized>(
    ensemble: &BrownianEnsemble,
    basis: &BackwardBasis,
    driver: &D,
    terminal: &[f64],
) -> Result<BackwardSolution> {
    let grid = *ensemble.grid();
    let n = grid.n_steps();
    let np = ensemble.n_particles();
    let d = ensemble.dim();
    if basis.regs.len() != n || basis.regs.first().is_some_and(|r| r.n_states() != np) {
        return Err(Error::EnsembleMismatch("regression basis was built on another ensemble".into()));
    }
    if terminal.len() != np {
        return Err(Error::EnsembleMismatch(format!("{} terminal values for {np} particles", terminal.len())));
    }
    if let Some(i) = terminal.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue { node: n, particle: i });
    }
    let dt = grid.dt();
    let basis_degree = basis.degree;

    let mut y = vec![0.0; (n + 1) * np];
    let mut z = vec![0.0; (n + 1) * np * d];
    y[n * np..].copy_from_slice(terminal);
    let mut martingale_residual = vec![0.0; n];
    let mut projection_residual = vec![0.0; n];

    let mut centered = vec![0.0; np];
    for k in (0..n).rev() {
        let t = grid.t(k);
        let reg = &basis.regs[k];
        let (head, tail) = y.split_at_mut((k + 1) * np);
        let y_next = &tail[..np];
        let y_hat = reg.fit(y_next)?;

        let inc = ensemble.increments_at(k);
        let z_row = &mut z[k * np * d..(k + 1) * np * d];
        for j in 0..d {
            for i in 0..np {
                centered[i] = (y_next[i] - y_hat[i]) * inc[i * d + j];
            }
            let fitted = reg.fit(&centered)?;
            for i in 0..np {
                z_row[i * d + j] = fitted[i] / dt;
            }
        }

        let (mut sq_mart, mut sq_proj) = (0.0, 0.0);
        for i in 0..np {
            let zdb: f64 = (0..d).map(|j| z_row[i * d + j] * inc[i * d + j]).sum();
            let r = y_next[i] - y_hat[i];
            sq_proj += r * r;
            sq_mart += (r - zdb) * (r - zdb);
        }
        martingale_residual[k] = (sq_mart / np as f64).sqrt();
        projection_residual[k] = (sq_proj / np as f64).sqrt();

        let mu = finite_measure(1, y_hat.clone(), k)?;
        let nu = finite_measure(d, z_row.to_vec(), k)?;
        let y_k = &mut head[k * np..];
        for i in 0..np {
            let args = DriverArgs {
                node: k,
                particle: i,
                t,
                y: y_hat[i],
                mu: &mu,
                z: &z_row[i * d..(i + 1) * d],
                nu: &nu,
            };
            let v = y_hat[i] + driver.value(&args) * dt;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { node: k, particle: i });
            }
            y_k[i] = v;
        }
    }

    Ok(BackwardSolution {
        grid,
        dim: d,
        n_particles: np,
        ensemble_seed: ensemble.seed(),
        y,
        z,
        diagnostics: RegressionDiagnostics { basis_degree, projection_residual, martingale_residual },
    })
}

fn finite_measure(dim: usize, samples: Vec<f64>, node: usize) -> Result<EmpiricalMeasure> {
    if let Some(at) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue { node, particle: at / dim });
    }
    EmpiricalMeasure::new(dim, samples)
}

pub fn solve_mfbsde(
    ensemble: &BrownianEnsemble,
    generator: &GeneratorSpec,
    terminal: &TerminalFunctional,
    basis_degree: usize,
) -> Result<BackwardSolution> {
    let xi = terminal.values(ensemble)?;
    solve_backward(ensemble, generator, &xi, basis_degree)
}

/// Empirical ingredients of the a priori stability estimate between two solves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `E[sup_k |Y1_k - Y2_k|^2]`.
    pub sup_y_gap2: f64,
    /// `sum_k dt E|Z1_k - Z2_k|^2`.
    pub z_gap2: f64,
    /// `E|xi1 - xi2|^2`.
    pub xi_gap2: f64,
    /// `sum_k dt E|f1 - f2|^2` along solution 1.
    pub driver_gap2: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; zero when both vanish.
    pub ratio: f64,
}

/// No inequality is asserted: the constant in the estimate is not computable.
pub fn stability_gap(
    first: &BackwardSolution,
    second: &BackwardSolution,
    gen_first: &GeneratorSpec,
    gen_second: &GeneratorSpec,
) -> Result<GapReport> {
    if !first.same_ensemble(second) {
        return Err(Error::EnsembleMismatch("solutions were computed on different ensembles".into()));
    }
    let grid = first.grid;
    let (n, np, d) = (grid.n_steps(), first.n_particles, first.dim);
    let dt = grid.dt();

    let mut sup_sq = vec![0.0_f64; np];
    for k in 0..=n {
        for ((s, a), b) in sup_sq.iter_mut().zip(first.y_at(k)).zip(second.y_at(k)) {
            *s = s.max((a - b) * (a - b));
        }
    }
    let sup_y_gap2 = sup_sq.iter().sum::<f64>() / np as f64;

    let mut z_gap2 = 0.0;
    let mut driver_gap2 = 0.0;
    for k in 0..n {
        let dz: f64 = first.z_at(k).iter().zip(second.z_at(k)).map(|(a, b)| (a - b) * (a - b)).sum();
        z_gap2 += dt * dz / np as f64;

        let t = grid.t(k);
        let mu = EmpiricalMeasure::new(1, first.y_at(k).to_vec())?;
        let nu = EmpiricalMeasure::new(d, first.z_at(k).to_vec())?;
        let mut df = 0.0;
        for i in 0..np {
            let (y, z) = (first.y_at(k)[i], first.z_of(k, i));
            let diff = gen_first.eval(t, y, &mu, z, &nu) - gen_second.eval(t, y, &mu, z, &nu);
            df += diff * diff;
        }
        driver_gap2 += dt * df / np as f64;
    }
    let xi_gap2 = first
        .y_at(n)
        .iter()
        .zip(second.y_at(n))
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / np as f64;

    let lhs = sup_y_gap2 + z_gap2;
    let rhs = xi_gap2 + driver_gap2;
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(GapReport { sup_y_gap2, z_gap2, xi_gap2, driver_gap2, lhs, rhs, ratio })
}
