//! Generators (drivers) and terminal functionals.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::brownian::BrownianEnsemble;
use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;

/// Modulus of continuity `rho` in the Mao condition
/// `|f(y1,..) - f(y2,..)|^2 <= rho(|y1 - y2|^2 + d1^2) + lambda^2 (..)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Modulus {
    /// `rho(r) = slope * r`, the Lipschitz case.
    Linear { slope: f64 },
    /// `rho(r) = r ln(1/r)` on `(0, eta]`, tangent line above `eta`, `rho(0) = 0`.
    /// Requires `0 < eta <= 1/e` for monotonicity.
    LogType { eta: f64 },
}

impl Modulus {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Modulus::Linear { slope } => slope * r.max(0.0),
            Modulus::LogType { eta } => {
                if r <= 0.0 {
                    0.0
                } else if r <= eta {
                    -r * r.ln()
                } else {
                    let h = -eta * eta.ln();
                    let slope = -eta.ln() - 1.0;
                    h + slope * (r - eta)
                }
            }
        }
    }

    /// Smallest `beta` with `rho(r) <= beta (1 + r)` for all `r >= 0`.
    pub fn linear_growth_bound(&self) -> f64 {
        match *self {
            Modulus::Linear { slope } => slope,
            Modulus::LogType { eta } => {
                // Below eta rho <= rho(eta); above, rho = eta + slope * r.
                let slope = -eta.ln() - 1.0;
                slope.max(eta).max(-eta * eta.ln())
            }
        }
    }

    /// Sampled check: `rho(0) = 0`, continuity, monotonicity, concavity, and
    /// `rho(r) <= beta (1 + r)`, on a logarithmic grid of `r` in `[1e-12, 1e4]`.
    pub fn check(&self, beta: f64) -> Result<()> {
        if let Modulus::LogType { eta } = *self {
            if !(eta > 0.0 && eta <= (-1.0f64).exp()) {
                return Err(Error::InvalidInput(format!("log-type modulus needs 0 < eta <= 1/e, got {eta}")));
            }
        }
        if self.eval(0.0) != 0.0 {
            return Err(Error::InvalidInput("rho(0) must vanish".into()));
        }
        let rs: Vec<f64> = (0..=400).map(|i| 10f64.powf(-12.0 + 16.0 * i as f64 / 400.0)).collect();
        let tol = 1e-12;
        // Concave and nondecreasing on (0, inf) already forces continuity there.
        if self.eval(rs[0]) > 1e-9 {
            return Err(Error::InvalidInput("rho is not continuous at 0".into()));
        }
        for w in rs.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (fa, fb) = (self.eval(a), self.eval(b));
            let fm = self.eval(0.5 * (a + b));
            if !(fa.is_finite() && fb.is_finite()) {
                return Err(Error::InvalidInput(format!("rho is not finite near r = {a}")));
            }
            if fb < fa - tol * fa.abs() {
                return Err(Error::InvalidInput(format!("rho decreases between {a} and {b}")));
            }
            if fm < 0.5 * (fa + fb) - tol * (1.0 + fb) {
                return Err(Error::InvalidInput(format!("rho is not concave on [{a}, {b}]")));
            }
        }
        for &r in &rs {
            if self.eval(r) > beta * (1.0 + r) * (1.0 + tol) {
                return Err(Error::InvalidInput(format!("rho({r}) exceeds beta (1 + r) with beta = {beta}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularity {
    Lipschitz { lambda: f64 },
    Mao { rho: Modulus, lambda: f64, beta: f64 },
}

pub type GeneratorFn = Arc<dyn Fn(f64, f64, &EmpiricalMeasure, &[f64], &EmpiricalMeasure) -> f64 + Send + Sync>;

/// A driver `f(t, y, mu, z, nu)` with its declared regularity.
#[derive(Clone)]
pub struct GeneratorSpec {
    name: String,
    regularity: Regularity,
    eval: GeneratorFn,
}

impl fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("name", &self.name)
            .field("regularity", &self.regularity)
            .finish_non_exhaustive()
    }
}

impl GeneratorSpec {
    pub fn new(name: impl Into<String>, regularity: Regularity, eval: GeneratorFn) -> Self {
        Self { name: name.into(), regularity, eval }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }

    pub fn eval(&self, t: f64, y: f64, mu: &EmpiricalMeasure, z: &[f64], nu: &EmpiricalMeasure) -> f64 {
        (self.eval)(t, y, mu, z, nu)
    }

    /// Checks the declared modulus when the generator is tagged Mao.
    pub fn check_regularity(&self) -> Result<()> {
        match self.regularity {
            Regularity::Lipschitz { lambda } if lambda >= 0.0 => Ok(()),
            Regularity::Lipschitz { lambda } => Err(Error::InvalidInput(format!("negative Lipschitz constant {lambda}"))),
            Regularity::Mao { rho, beta, .. } => rho.check(beta),
        }
    }
}

/// Arguments handed to a [`Driver`] for one particle at one node.
#[derive(Debug, Clone, Copy)]
pub struct DriverArgs<'a> {
    pub node: usize,
    pub particle: usize,
    pub t: f64,
    pub y: f64,
    pub mu: &'a EmpiricalMeasure,
    pub z: &'a [f64],
    pub nu: &'a EmpiricalMeasure,
}

/// What the backward solver integrates. Plain generators ignore the node and
/// particle indices; frozen generators use them to look up earlier iterates.
pub trait Driver: Sync {
    fn value(&self, args: &DriverArgs<'_>) -> f64;
}

impl Driver for GeneratorSpec {
    fn value(&self, a: &DriverArgs<'_>) -> f64 {
        self.eval(a.t, a.y, a.mu, a.z, a.nu)
    }
}

/// `f = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDriver;

impl Driver for ZeroDriver {
    fn value(&self, _: &DriverArgs<'_>) -> f64 {
        0.0
    }
}

pub type TerminalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Terminal value `xi` as a function of the terminal Brownian state `B_T`.
#[derive(Clone)]
pub struct TerminalFunctional {
    name: String,
    eval: TerminalFn,
}

impl fmt::Debug for TerminalFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TerminalFunctional").field("name", &self.name).finish_non_exhaustive()
    }
}

impl TerminalFunctional {
    pub fn new(name: impl Into<String>, eval: TerminalFn) -> Self {
        Self { name: name.into(), eval }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, terminal_state: &[f64]) -> f64 {
        (self.eval)(terminal_state)
    }

    /// `xi` for every particle of the ensemble.
    pub fn values(&self, ensemble: &BrownianEnsemble) -> Result<Vec<f64>> {
        let xs: Vec<f64> = (0..ensemble.n_particles()).map(|i| self.eval(ensemble.terminal(i))).collect();
        if let Some(i) = xs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { node: ensemble.grid().n_steps(), particle: i });
        }
        Ok(xs)
    }
}
