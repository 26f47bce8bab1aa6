//! Mean-field BSDEs with two mean reflections
//! `E[L(t, Y_t)] <= 0 <= E[R(t, Y_t)]`, pushed by a deterministic
//! `K = KR - KL` that only moves while the corresponding mean constraint binds.
//!
//! Each Picard iterate freezes `(Y, P_Y)` from the previous iterate, solves
//! the unconstrained equation, and recovers `K` from a Skorokhod problem on
//! the reversed mean path.

mod audit;
mod picard;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::brownian::BrownianEnsemble;
use crate::error::{Error, Result};
use crate::generator::{GeneratorSpec, TerminalFunctional};
use crate::grid::TimeGrid;
use crate::mfbsde::DEFAULT_BASIS_DEGREE;
use crate::skorokhod::DEFAULT_ROOT_TOL;

pub use audit::{audit_solution, AuditReport, MomentBound};
pub use picard::{
    build_skorokhod_data, freeze_generator, picard_step, solve_reflected, solve_reflected_from, uniqueness_probe,
    FrozenGenerator, PicardContext, PicardStep, UniquenessReport,
};

pub const DEFAULT_PICARD_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_PICARD_ITERS: usize = 50;

/// Number of standard errors used as statistical slack on empirical means.
pub const STAT_SLACK_SE: f64 = 3.0;

/// `L(t, x, omega)`; `omega` is the particle's terminal Brownian state.
pub type LossFn = Arc<dyn Fn(f64, f64, &[f64]) -> f64 + Send + Sync>;

/// Loss fields `L <= R`, increasing and bi-Lipschitz in `x` with constants
/// `c <= C`, `inf (R - L) >= gap`, and a declared bound `M` on
/// `E[sup_t |L(t, 0)| + sup_t |R(t, 0)|]`.
#[derive(Clone)]
pub struct LossFieldPair {
    name: String,
    lower: LossFn,
    upper: LossFn,
    c: f64,
    big_c: f64,
    m_bound: f64,
    gap: f64,
}

impl fmt::Debug for LossFieldPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossFieldPair")
            .field("name", &self.name)
            .field("c", &self.c)
            .field("C", &self.big_c)
            .field("M", &self.m_bound)
            .field("gap", &self.gap)
            .finish_non_exhaustive()
    }
}

impl LossFieldPair {
    pub fn new(
        name: impl Into<String>,
        lower: LossFn,
        upper: LossFn,
        c: f64,
        big_c: f64,
        m_bound: f64,
        gap: f64,
    ) -> Result<Self> {
        if !(c > 0.0 && big_c >= c && big_c.is_finite()) {
            return Err(Error::InvalidInput(format!("loss constants need 0 < c <= C < inf, got c = {c}, C = {big_c}")));
        }
        if !(gap > 0.0) {
            return Err(Error::InvalidInput(format!("loss gap must be positive, got {gap}")));
        }
        if !(m_bound >= 0.0) {
            return Err(Error::InvalidInput(format!("loss bound M must be nonnegative, got {m_bound}")));
        }
        Ok(Self { name: name.into(), lower, upper, c, big_c, m_bound, gap })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lower(&self, t: f64, x: f64, omega: &[f64]) -> f64 {
        (self.lower)(t, x, omega)
    }

    pub fn upper(&self, t: f64, x: f64, omega: &[f64]) -> f64 {
        (self.upper)(t, x, omega)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn big_c(&self) -> f64 {
        self.big_c
    }

    pub fn m_bound(&self) -> f64 {
        self.m_bound
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// Sampled check of monotonicity, bi-Lipschitz bounds, the gap, and the
    /// bound `M`, at grid times, particle states from `ensemble`, and `x`
    /// uniform on `x_range`.
    pub fn check_assumptions(
        &self,
        ensemble: &BrownianEnsemble,
        x_range: (f64, f64),
        samples: usize,
        seed: u64,
    ) -> Result<()> {
        let grid = ensemble.grid();
        let np = ensemble.n_particles();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rel = 1e-9;
        for _ in 0..samples {
            let t = grid.t(rng.random_range(0..grid.n_nodes()));
            let omega = ensemble.terminal(rng.random_range(0..np));
            let (a, b) = (rng.random_range(x_range.0..x_range.1), rng.random_range(x_range.0..x_range.1));
            if a == b {
                continue;
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            for (name, f) in [("L", &self.lower), ("R", &self.upper)] {
                let slope = (f(t, hi, omega) - f(t, lo, omega)) / (hi - lo);
                if !(slope >= self.c * (1.0 - rel) && slope <= self.big_c * (1.0 + rel)) {
                    return Err(Error::InvalidInput(format!(
                        "{name}(t={t}, ., omega) has difference quotient {slope} outside [{}, {}]",
                        self.c, self.big_c
                    )));
                }
            }
            let width = self.upper(t, a, omega) - self.lower(t, a, omega);
            if width < self.gap * (1.0 - rel) {
                return Err(Error::InvalidInput(format!("R - L = {width} below declared gap {}", self.gap)));
            }
        }
        let mut m = 0.0;
        for i in 0..np {
            let omega = ensemble.terminal(i);
            let (mut sl, mut sr) = (0.0_f64, 0.0_f64);
            for t in grid.times() {
                sl = sl.max(self.lower(t, 0.0, omega).abs());
                sr = sr.max(self.upper(t, 0.0, omega).abs());
            }
            m += (sl + sr) / np as f64;
        }
        if m > self.m_bound * (1.0 + rel) {
            return Err(Error::InvalidInput(format!("E[sup|L(t,0)| + sup|R(t,0)|] = {m} exceeds M = {}", self.m_bound)));
        }
        Ok(())
    }
}

/// A complete problem: grid, ensemble size and seed, data, and tolerances.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub grid: TimeGrid,
    pub dim: usize,
    pub n_particles: usize,
    pub seed: u64,
    pub generator: GeneratorSpec,
    pub terminal: TerminalFunctional,
    pub losses: LossFieldPair,
    pub picard_tol: f64,
    pub max_picard_iters: usize,
    pub basis_degree: usize,
    pub root_tol: f64,
}

impl Scenario {
    /// Scenario with default tolerances.
    pub fn new(
        name: impl Into<String>,
        grid: TimeGrid,
        dim: usize,
        n_particles: usize,
        seed: u64,
        generator: GeneratorSpec,
        terminal: TerminalFunctional,
        losses: LossFieldPair,
    ) -> Self {
        Self {
            name: name.into(),
            grid,
            dim,
            n_particles,
            seed,
            generator,
            terminal,
            losses,
            picard_tol: DEFAULT_PICARD_TOL,
            max_picard_iters: DEFAULT_MAX_PICARD_ITERS,
            basis_degree: DEFAULT_BASIS_DEGREE,
            root_tol: DEFAULT_ROOT_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 || self.dim == 0 || self.grid.n_steps() < 2 {
            return Err(Error::InvalidInput(format!(
                "need N >= 2, d >= 1 and n_steps >= 2, got N = {}, d = {}, n_steps = {}",
                self.n_particles,
                self.dim,
                self.grid.n_steps()
            )));
        }
        if !(self.picard_tol > 0.0 && self.root_tol > 0.0) || self.max_picard_iters == 0 {
            return Err(Error::InvalidInput("tolerances and the iteration cap must be positive".into()));
        }
        Ok(())
    }

    pub fn ensemble(&self) -> Result<BrownianEnsemble> {
        crate::brownian::simulate_brownian(self.grid, self.dim, self.n_particles, self.seed)
    }

    /// `E[L(T, xi)] <= slack` and `E[R(T, xi)] >= -slack`, with `slack`
    /// three standard errors of the respective sample mean.
    pub fn check_terminal_admissibility(&self, ensemble: &BrownianEnsemble, xi: &[f64]) -> Result<()> {
        let t = self.grid.horizon();
        let omegas = (0..xi.len()).map(|i| ensemble.terminal(i));
        let (ls, rs): (Vec<f64>, Vec<f64>) =
            xi.iter().zip(omegas).map(|(&x, w)| (self.losses.lower(t, x, w), self.losses.upper(t, x, w))).unzip();
        let (ml, sl) = mean_and_se(&ls);
        let (mr, sr) = mean_and_se(&rs);
        let slack = STAT_SLACK_SE * sl.max(sr);
        if ml > slack || mr < -slack {
            return Err(Error::TerminalInadmissible { mean_l: ml, mean_r: mr, slack });
        }
        Ok(())
    }
}

/// Sample mean and its standard error.
pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// Per-node empirical `E[L(t_k, Y_k)]`, `E[R(t_k, Y_k)]` and the tolerance
/// `root_tol + 3 SE` they are checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub mean_l: Vec<f64>,
    pub mean_r: Vec<f64>,
    pub tol_total: Vec<f64>,
    /// `max_k max(E[L]_k - tol_k, -E[R]_k - tol_k, 0)`.
    pub max_violation: f64,
    pub satisfied: bool,
}

impl ConstraintReport {
    pub fn compute(
        grid: &TimeGrid,
        losses: &LossFieldPair,
        ensemble: &BrownianEnsemble,
        y: &[f64],
        root_tol: f64,
    ) -> Self {
        let np = ensemble.n_particles();
        let nodes = grid.n_nodes();
        let (mut mean_l, mut mean_r, mut tol_total) =
            (Vec::with_capacity(nodes), Vec::with_capacity(nodes), Vec::with_capacity(nodes));
        let mut max_violation = 0.0_f64;
        let (mut ls, mut rs) = (vec![0.0; np], vec![0.0; np]);
        for k in 0..nodes {
            let t = grid.t(k);
            for i in 0..np {
                let w = ensemble.terminal(i);
                ls[i] = losses.lower(t, y[k * np + i], w);
                rs[i] = losses.upper(t, y[k * np + i], w);
            }
            let (ml, sl) = mean_and_se(&ls);
            let (mr, sr) = mean_and_se(&rs);
            let tol = root_tol + STAT_SLACK_SE * sl.max(sr);
            max_violation = max_violation.max(ml - tol).max(-mr - tol);
            mean_l.push(ml);
            mean_r.push(mr);
            tol_total.push(tol);
        }
        Self { mean_l, mean_r, tol_total, max_violation, satisfied: max_violation <= 0.0 }
    }
}

/// Converged `(Y, Z, K)` with the Picard record.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectedSolution {
    pub grid: TimeGrid,
    pub dim: usize,
    pub n_particles: usize,
    pub seed: u64,
    /// `(n + 1) x N`, node-major.
    pub y: Vec<f64>,
    /// `(n + 1) x N x d`, node-major; zero at the terminal node.
    pub z: Vec<f64>,
    /// Deterministic reflection, one value per node, `K_0 = 0`.
    pub k: Vec<f64>,
    pub kr: Vec<f64>,
    pub kl: Vec<f64>,
    /// `Delta_m = max_k mean_i |Y^m - Y^{m-1}|^2` for `m = 1, 2, ...`.
    pub picard_history: Vec<f64>,
    /// `mean_i max_k |Y^m|^2 + sum_k dt mean_i |Z^m|^2` for each iterate.
    pub iterate_moments: Vec<f64>,
    pub constraint_report: ConstraintReport,
}

impl ReflectedSolution {
    pub fn y_at(&self, k: usize) -> &[f64] {
        &self.y[k * self.n_particles..(k + 1) * self.n_particles]
    }

    pub fn z_of(&self, k: usize, i: usize) -> &[f64] {
        let at = (k * self.n_particles + i) * self.dim;
        &self.z[at..at + self.dim]
    }

    pub fn iterations(&self) -> usize {
        self.picard_history.len()
    }

    pub fn mean_y(&self) -> Vec<f64> {
        (0..self.grid.n_nodes()).map(|k| self.y_at(k).iter().sum::<f64>() / self.n_particles as f64).collect()
    }

    /// Total variation of `K`.
    pub fn k_variation(&self) -> f64 {
        self.k.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }
}

/// Starting point `Y^0` of the Picard iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum Initializer {
    /// Regression estimate of `E_{t_k}[xi]`, with `Y^0_n = xi`.
    ConditionalTerminal,
    Zero,
    /// Explicit `(n + 1) x N` field.
    Field(Vec<f64>),
}
