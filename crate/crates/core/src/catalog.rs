//! Named generators, terminals and loss fields, and a serializable scenario
//! description that builds a [`Scenario`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{GeneratorSpec, Modulus, Regularity, TerminalFunctional};
use crate::grid::TimeGrid;
use crate::reflected::{LossFieldPair, Scenario, DEFAULT_MAX_PICARD_ITERS, DEFAULT_PICARD_TOL};
use crate::{mfbsde::DEFAULT_BASIS_DEGREE, skorokhod::DEFAULT_ROOT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    Zero,
    Constant { value: f64 },
    /// `c0 + a_y y + a_mu mean(mu) + a_z sum_j z_j + a_nu sum_j mean(nu)_j`.
    Affine { c0: f64, a_y: f64, a_mu: f64, a_z: f64, a_nu: f64 },
    /// `kappa sqrt(rho(y^2))` with the log-type modulus `rho`; needs `0 < kappa <= 1`.
    MaoLog { kappa: f64, eta: f64 },
}

impl GeneratorKind {
    pub fn build(&self, dim: usize) -> Result<GeneratorSpec> {
        let spec = match *self {
            GeneratorKind::Zero => GeneratorSpec::new("zero", Regularity::Lipschitz { lambda: 0.0 }, Arc::new(|_, _, _, _, _| 0.0)),
            GeneratorKind::Constant { value } => {
                GeneratorSpec::new("constant", Regularity::Lipschitz { lambda: 0.0 }, Arc::new(move |_, _, _, _, _| value))
            }
            GeneratorKind::Affine { c0, a_y, a_mu, a_z, a_nu } => {
                let sd = (dim as f64).sqrt();
                let lambda = 2.0 * a_y.abs().max(a_mu.abs()).max(sd * a_z.abs()).max(sd * a_nu.abs());
                GeneratorSpec::new(
                    "affine",
                    Regularity::Lipschitz { lambda },
                    Arc::new(move |_, y, mu, z, nu| {
                        c0 + a_y * y + a_mu * mu.mean_scalar() + a_z * z.iter().sum::<f64>() + a_nu * nu.mean().iter().sum::<f64>()
                    }),
                )
            }
            GeneratorKind::MaoLog { kappa, eta } => {
                if !(kappa > 0.0 && kappa <= 1.0) {
                    return Err(Error::InvalidInput(format!("mao_log needs 0 < kappa <= 1, got {kappa}")));
                }
                let rho = Modulus::LogType { eta };
                let beta = rho.linear_growth_bound();
                GeneratorSpec::new(
                    "mao_log",
                    Regularity::Mao { rho, lambda: 0.0, beta },
                    Arc::new(move |_, y, _, _, _| kappa * rho.eval(y * y).sqrt()),
                )
            }
        };
        spec.check_regularity()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerminalKind {
    /// `shift + scale sum_j B_T^j`.
    BrownianAffine { shift: f64, scale: f64 },
    /// `scale |B_T|^2`.
    BrownianSquare { scale: f64 },
    /// `amp sin(freq B_T^1)`.
    Sine { amp: f64, freq: f64 },
}

impl TerminalKind {
    pub fn build(&self) -> TerminalFunctional {
        match *self {
            TerminalKind::BrownianAffine { shift, scale } => {
                TerminalFunctional::new("brownian_affine", Arc::new(move |b: &[f64]| shift + scale * b.iter().sum::<f64>()))
            }
            TerminalKind::BrownianSquare { scale } => {
                TerminalFunctional::new("brownian_square", Arc::new(move |b: &[f64]| scale * b.iter().map(|v| v * v).sum::<f64>()))
            }
            TerminalKind::Sine { amp, freq } => TerminalFunctional::new("sine", Arc::new(move |b: &[f64]| amp * (freq * b[0]).sin())),
        }
    }
}

/// Levels `u(t) = upper + upper_drift t` and `d(t) = lower + lower_drift t`
/// with `u > d` on `[0, T]`; the mean of `Y` is kept between them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Levels {
    pub upper: f64,
    pub upper_drift: f64,
    pub lower: f64,
    pub lower_drift: f64,
}

impl Levels {
    pub fn constant(lower: f64, upper: f64) -> Self {
        Self { upper, upper_drift: 0.0, lower, lower_drift: 0.0 }
    }

    fn min_width(&self, horizon: f64) -> f64 {
        (self.upper - self.lower).min(self.upper - self.lower + (self.upper_drift - self.lower_drift) * horizon)
    }

    fn sup_abs(&self, horizon: f64) -> f64 {
        let u = self.upper.abs().max((self.upper + self.upper_drift * horizon).abs());
        let d = self.lower.abs().max((self.lower + self.lower_drift * horizon).abs());
        u + d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    /// `L = slope (x - u(t))`, `R = slope (x - d(t))`.
    Affine { slope: f64, levels: Levels },
    /// `L = x + amp atan(x) - u(t)`, `R = x + amp atan(x) - d(t)`; `c = 1`, `C = 1 + amp`.
    Arctan { amp: f64, levels: Levels },
}

impl LossKind {
    pub fn build(&self, horizon: f64) -> Result<LossFieldPair> {
        match *self {
            LossKind::Affine { slope, levels: lv } => {
                if !(slope > 0.0) {
                    return Err(Error::InvalidInput(format!("affine loss slope must be positive, got {slope}")));
                }
                LossFieldPair::new(
                    "affine",
                    Arc::new(move |t, x, _| slope * (x - lv.upper - lv.upper_drift * t)),
                    Arc::new(move |t, x, _| slope * (x - lv.lower - lv.lower_drift * t)),
                    slope,
                    slope,
                    slope * lv.sup_abs(horizon),
                    slope * lv.min_width(horizon),
                )
            }
            LossKind::Arctan { amp, levels: lv } => {
                if !(amp >= 0.0) {
                    return Err(Error::InvalidInput(format!("arctan loss amplitude must be nonnegative, got {amp}")));
                }
                LossFieldPair::new(
                    "arctan",
                    Arc::new(move |t, x, _| x + amp * x.atan() - lv.upper - lv.upper_drift * t),
                    Arc::new(move |t, x, _| x + amp * x.atan() - lv.lower - lv.lower_drift * t),
                    1.0,
                    1.0 + amp,
                    lv.sup_abs(horizon),
                    lv.min_width(horizon),
                )
            }
        }
    }
}

/// Plain-data scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub horizon: f64,
    pub n_steps: usize,
    pub dim: usize,
    pub n_particles: usize,
    pub seed: u64,
    pub generator: GeneratorKind,
    pub terminal: TerminalKind,
    pub losses: LossKind,
    pub picard_tol: f64,
    pub max_picard_iters: usize,
    pub basis_degree: usize,
    pub root_tol: f64,
}

impl ScenarioSpec {
    pub fn build(&self) -> Result<Scenario> {
        let grid = TimeGrid::new(self.horizon, self.n_steps)?;
        let mut sc = Scenario::new(
            self.name.clone(),
            grid,
            self.dim,
            self.n_particles,
            self.seed,
            self.generator.build(self.dim)?,
            self.terminal.build(),
            self.losses.build(self.horizon)?,
        );
        sc.picard_tol = self.picard_tol;
        sc.max_picard_iters = self.max_picard_iters;
        sc.basis_degree = self.basis_degree;
        sc.root_tol = self.root_tol;
        sc.validate()?;
        Ok(sc)
    }
}

pub const PRESET_NAMES: [&str; 5] =
    ["inactive_barriers", "constant_drift_lower_barrier", "linear_meanfield", "mao_log_driver", "nonlinear_losses"];

/// The shipped scenarios at their reference sizes.
pub fn preset(name: &str) -> Option<ScenarioSpec> {
    let base = |generator, terminal, losses, n_steps| ScenarioSpec {
        name: name.to_string(),
        horizon: 1.0,
        n_steps,
        dim: 1,
        n_particles: 10_000,
        seed: 20240601,
        generator,
        terminal,
        losses,
        picard_tol: DEFAULT_PICARD_TOL,
        max_picard_iters: DEFAULT_MAX_PICARD_ITERS,
        basis_degree: DEFAULT_BASIS_DEGREE,
        root_tol: DEFAULT_ROOT_TOL,
    };
    let unit_b = TerminalKind::BrownianAffine { shift: 1.0, scale: 1.0 };
    let wide = LossKind::Affine { slope: 1.0, levels: Levels::constant(-50.0, 50.0) };
    let spec = match name {
        "inactive_barriers" => base(GeneratorKind::Zero, unit_b, wide, 100),
        "constant_drift_lower_barrier" => base(
            GeneratorKind::Constant { value: -1.0 },
            unit_b,
            LossKind::Affine { slope: 1.0, levels: Levels::constant(0.5, 10.0) },
            100,
        ),
        "linear_meanfield" => {
            base(GeneratorKind::Affine { c0: 0.0, a_y: 0.0, a_mu: 1.0, a_z: 0.0, a_nu: 0.0 }, unit_b, wide, 100)
        }
        "mao_log_driver" => base(
            GeneratorKind::MaoLog { kappa: 0.5, eta: 0.1 },
            TerminalKind::BrownianAffine { shift: 0.0, scale: 1.0 },
            LossKind::Affine { slope: 1.0, levels: Levels::constant(-0.3, 0.25) },
            50,
        ),
        "nonlinear_losses" => base(
            GeneratorKind::Affine { c0: 0.5, a_y: 0.2, a_mu: 0.0, a_z: 0.0, a_nu: 0.0 },
            TerminalKind::Sine { amp: 1.0, freq: 1.0 },
            LossKind::Arctan {
                amp: 0.2,
                levels: Levels { upper: 0.3, upper_drift: 0.0, lower: -0.4, lower_drift: 0.2 },
            },
            100,
        ),
        _ => return None,
    };
    Some(spec)
}
