//! Comparison against exact solutions for the scenario shapes that have one.

use serde::{Deserialize, Serialize};

use meanrefl_core::catalog::{GeneratorKind, LossKind, ScenarioSpec, TerminalKind};
use meanrefl_core::reference::{affine_terminal_constant_driver, linear_meanfield_mean, lower_barrier_reflection};
use meanrefl_core::{BrownianEnsemble, ReflectedSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormErrors {
    pub reference: String,
    /// `max_k mean_i |Y_{k,i} - Y_exact|`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_error: Option<f64>,
    /// `max_{k<n} mean_i |Z_{k,i} - Z_exact|`, worst component.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_error: Option<f64>,
    /// `max_k |mean_i Y_{k,i} - E[Y_t]|`.
    pub mean_error: f64,
    /// `max_k |K_k - K_exact|`.
    pub k_error: f64,
}

impl ClosedFormErrors {
    /// The headline error used by sweeps.
    pub fn primary(&self) -> f64 {
        self.y_error.unwrap_or(self.mean_error)
    }
}

fn constant_levels(losses: &LossKind) -> Option<(f64, f64)> {
    let LossKind::Affine { levels, .. } = losses else { return None };
    (levels.upper_drift == 0.0 && levels.lower_drift == 0.0).then_some((levels.lower, levels.upper))
}

/// Exact forward `K` for a deterministic mean path inside the band `[lower, upper]`,
/// when at most one side is ever crossed.
fn band_reflection(
    grid: &meanrefl_core::TimeGrid,
    m: impl Fn(f64) -> f64,
    lower: f64,
    upper: f64,
) -> Option<Vec<f64>> {
    let path: Vec<f64> = grid.times().into_iter().map(&m).collect();
    let below = path.iter().any(|&v| v < lower);
    let above = path.iter().any(|&v| v > upper);
    match (below, above) {
        (true, true) => None,
        (false, true) => Some(lower_barrier_reflection(grid, |t| -m(t), -upper).into_iter().map(|v| -v).collect()),
        _ => {
            let k = lower_barrier_reflection(grid, &m, lower);
            let pushed_max = path.iter().zip(&k).map(|(v, kk)| v + k[k.len() - 1] - kk).fold(f64::MIN, f64::max);
            (pushed_max <= upper).then_some(k)
        }
    }
}

pub fn compare(spec: &ScenarioSpec, sol: &ReflectedSolution, ensemble: &BrownianEnsemble) -> Option<ClosedFormErrors> {
    let TerminalKind::BrownianAffine { shift, scale } = spec.terminal else { return None };
    let (lower, upper) = constant_levels(&spec.losses)?;
    let grid = sol.grid;
    let (n, np, d) = (grid.n_steps(), sol.n_particles, sol.dim);
    let horizon = grid.horizon();
    let mean_y = sol.mean_y();
    let sup_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);

    match spec.generator {
        GeneratorKind::Zero | GeneratorKind::Constant { .. } => {
            let c = match spec.generator {
                GeneratorKind::Constant { value } => value,
                _ => 0.0,
            };
            let k_exact = band_reflection(&grid, |t| shift + c * (horizon - t), lower, upper)?;
            let mut y_error = 0.0_f64;
            let mut z_error = 0.0_f64;
            let mut exact_mean = Vec::with_capacity(n + 1);
            for k in 0..=n {
                let t = grid.t(k);
                let push = k_exact[n] - k_exact[k];
                let mut ey = 0.0;
                let mut ez = vec![0.0; d];
                for i in 0..np {
                    let (y, z) = affine_terminal_constant_driver(shift, scale, c, horizon, t, ensemble.path(k, i));
                    ey += (sol.y_at(k)[i] - (y + push)).abs();
                    for (j, e) in ez.iter_mut().enumerate() {
                        *e += (sol.z_of(k, i)[j] - z).abs();
                    }
                }
                y_error = y_error.max(ey / np as f64);
                if k < n {
                    z_error = ez.iter().fold(z_error, |m, e| m.max(e / np as f64));
                }
                exact_mean.push(shift + c * (horizon - t) + push);
            }
            Some(ClosedFormErrors {
                reference: "affine terminal, constant driver".into(),
                y_error: Some(y_error),
                z_error: Some(z_error),
                mean_error: sup_diff(&mean_y, &exact_mean),
                k_error: sup_diff(&sol.k, &k_exact),
            })
        }
        GeneratorKind::Affine { c0, a_y, a_mu, a_z, a_nu } if c0 == 0.0 && a_y == 0.0 && a_z == 0.0 && a_nu == 0.0 => {
            let exact_mean: Vec<f64> =
                grid.times().into_iter().map(|t| linear_meanfield_mean(shift, a_mu, horizon, t)).collect();
            if exact_mean.iter().any(|&m| m < lower || m > upper) {
                return None;
            }
            Some(ClosedFormErrors {
                reference: "linear mean-field mean".into(),
                y_error: None,
                z_error: None,
                mean_error: sup_diff(&mean_y, &exact_mean),
                k_error: sol.k.iter().fold(0.0, |m, v| m.max(v.abs())),
            })
        }
        _ => None,
    }
}
