//! Discrete Skorokhod problem with two nonlinear, time-dependent constraints.
//!
//! Given an input path `s` sampled on a [`TimeGrid`] and a pair of increasing
//! constraint maps `l <= r`, the solver produces the regulated path
//! `x = s + K` with `l(t, x) <= 0 <= r(t, x)` at every node, where
//! `K = Kr - Kl` and each regulator only moves when its constraint binds.
//! The construction is the nodewise minimal push: at node `k` the candidate
//! `s_k + K_{k-1}` is moved onto the violated constraint's zero set and left
//! alone otherwise.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::root::root_solve_monotone;

/// Default bisection tolerance for constraint roots.
pub const DEFAULT_ROOT_TOL: f64 = 1e-10;

/// Bound checks accept `lhs <= rhs + BOUND_SLACK_FACTOR * root_tol`.
pub const BOUND_SLACK_FACTOR: f64 = 10.0;

pub type ConstraintFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A continuous input sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl InputPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::InvalidInput(format!(
                "input path has {} values for {} grid nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("input path is non-finite at node {k}")));
        }
        Ok(Self { grid, values })
    }

    /// Sample `f(t_k)` at every node.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.times().into_iter().map(f).collect())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Lower and upper constraint maps together with their declared
/// bi-Lipschitz constants `c <= C` and the gap `inf (r - l) > 0`.
#[derive(Clone)]
pub struct ConstraintPair {
    lower: ConstraintFn,
    upper: ConstraintFn,
    c: f64,
    big_c: f64,
    gap: f64,
}

impl fmt::Debug for ConstraintPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintPair")
            .field("c", &self.c)
            .field("C", &self.big_c)
            .field("gap", &self.gap)
            .finish_non_exhaustive()
    }
}

impl ConstraintPair {
    pub fn new(lower: ConstraintFn, upper: ConstraintFn, c: f64, big_c: f64, gap: f64) -> Result<Self> {
        if !(c > 0.0 && big_c >= c && big_c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "bi-Lipschitz constants must satisfy 0 < c <= C < inf, got c = {c}, C = {big_c}"
            )));
        }
        if !(gap > 0.0) {
            return Err(Error::InvalidInput(format!("constraint gap must be positive, got {gap}")));
        }
        Ok(Self { lower, upper, c, big_c, gap })
    }

    /// `l(t, x) = slope * (x - upper_level(t))`, `r(t, x) = slope * (x - lower_level(t))`,
    /// i.e. the regulated path is kept inside `[lower_level(t), upper_level(t)]`.
    pub fn affine(
        slope: f64,
        upper_level: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lower_level: impl Fn(f64) -> f64 + Send + Sync + 'static,
        min_width: f64,
    ) -> Result<Self> {
        Self::new(
            Arc::new(move |t, x| slope * (x - upper_level(t))),
            Arc::new(move |t, x| slope * (x - lower_level(t))),
            slope,
            slope,
            slope * min_width,
        )
    }

    pub fn lower(&self, t: f64, x: f64) -> f64 {
        (self.lower)(t, x)
    }

    pub fn upper(&self, t: f64, x: f64) -> f64 {
        (self.upper)(t, x)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn big_c(&self) -> f64 {
        self.big_c
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// Randomized check of monotonicity, the bi-Lipschitz bounds and the gap
    /// at grid times and `x` drawn uniformly from `x_range`.
    pub fn check_assumptions(
        &self,
        grid: &TimeGrid,
        x_range: (f64, f64),
        samples: usize,
        seed: u64,
    ) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = x_range;
        let rel = 1e-9;
        for _ in 0..samples {
            let t = grid.t(rng.random_range(0..grid.n_nodes()));
            let x = rng.random_range(a..b);
            let y = rng.random_range(a..b);
            if x == y {
                continue;
            }
            let (lo, hi) = if x < y { (x, y) } else { (y, x) };
            for (name, f) in [("l", &self.lower), ("r", &self.upper)] {
                let (f_lo, f_hi) = (f(t, lo), f(t, hi));
                let inc = f_hi - f_lo;
                let dx = hi - lo;
                if !(inc > 0.0) {
                    return Err(Error::InvalidInput(format!("{name}(t={t}, .) is not increasing on [{lo}, {hi}]")));
                }
                if inc < self.c * dx * (1.0 - rel) || inc > self.big_c * dx * (1.0 + rel) {
                    return Err(Error::InvalidInput(format!(
                        "{name}(t={t}, .) violates bi-Lipschitz bounds on [{lo}, {hi}]: slope {}",
                        inc / dx
                    )));
                }
            }
            let width = self.upper(t, x) - self.lower(t, x);
            if width < self.gap * (1.0 - rel) {
                return Err(Error::InvalidInput(format!("r - l = {width} below declared gap {} at t = {t}", self.gap)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkorokhodSolution {
    pub grid: TimeGrid,
    pub x: Vec<f64>,
    pub k: Vec<f64>,
    pub kr: Vec<f64>,
    pub kl: Vec<f64>,
    pub root_tol: f64,
    /// `sum_k |r(t_k, x_k)| dKr_k + |l(t_k, x_k)| dKl_k`.
    pub flat_off_residual: f64,
}

impl SkorokhodSolution {
    /// Increments of `Kr` and `Kl` at each node, with `K_{0-} = 0`.
    pub fn increments(&self) -> (Vec<f64>, Vec<f64>) {
        (node_increments(&self.kr), node_increments(&self.kl))
    }
}

fn node_increments(cum: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    cum.iter()
        .map(|&v| {
            let d = v - prev;
            prev = v;
            d
        })
        .collect()
}

/// Seed bracket for a root of an increasing map with slope at least `c`,
/// given its value `g0` at `x0`.
fn seed_bracket(x0: f64, g0: f64, c: f64) -> (f64, f64) {
    let reach = g0.abs() / c;
    if g0 > 0.0 {
        (x0 - reach, x0)
    } else {
        (x0, x0 + reach)
    }
}

/// Solve the discrete Skorokhod problem with the `K_{0-} = 0` convention,
/// so a push at the first node is allowed.
pub fn solve_skorokhod(input: &InputPath, constraints: &ConstraintPair, root_tol: f64) -> Result<SkorokhodSolution> {
    solve_impl(input, constraints, root_tol, false)
}

/// As [`solve_skorokhod`], but the first node is taken as given and never
/// pushed (`K_0 = 0`). Used when feasibility at the first node is a
/// precondition rather than something to enforce.
pub fn solve_skorokhod_pinned_start(
    input: &InputPath,
    constraints: &ConstraintPair,
    root_tol: f64,
) -> Result<SkorokhodSolution> {
    solve_impl(input, constraints, root_tol, true)
}

fn solve_impl(input: &InputPath, cons: &ConstraintPair, root_tol: f64, pin_start: bool) -> Result<SkorokhodSolution> {
    if !(root_tol > 0.0) {
        return Err(Error::InvalidInput(format!("root_tol must be positive, got {root_tol}")));
    }
    let grid = *input.grid();
    let s = input.values();
    let n = s.len();
    // Tighter bisection tolerance so that the argument error is also below root_tol.
    let bisect_tol = root_tol * cons.c().min(1.0);

    let mut x = Vec::with_capacity(n);
    let mut k = Vec::with_capacity(n);
    let mut kr = Vec::with_capacity(n);
    let mut kl = Vec::with_capacity(n);
    let (mut kr_prev, mut kl_prev) = (0.0_f64, 0.0_f64);
    let mut flat_off = 0.0;

    for (node, &s_k) in s.iter().enumerate() {
        let t = grid.t(node);
        let cand = s_k + (kr_prev - kl_prev);
        let (mut kr_k, mut kl_k) = (kr_prev, kl_prev);

        if !(pin_start && node == 0) {
            let l_val = cons.lower(t, cand);
            let r_val = cons.upper(t, cand);
            if l_val > 0.0 && r_val < 0.0 {
                return Err(Error::GapViolation { node, t });
            }
            if l_val > 0.0 {
                let root = root_solve_monotone(|y| cons.lower(t, y), seed_bracket(cand, l_val, cons.c()), bisect_tol)?;
                kl_k += (cand - root).max(0.0);
            } else if r_val < 0.0 {
                let root = root_solve_monotone(|y| cons.upper(t, y), seed_bracket(cand, r_val, cons.c()), bisect_tol)?;
                kr_k += (root - cand).max(0.0);
            }
        }

        let k_k = kr_k - kl_k;
        let x_k = s_k + k_k;
        let (l_x, r_x) = (cons.lower(t, x_k), cons.upper(t, x_k));
        if !(pin_start && node == 0) && (l_x > root_tol || r_x < -root_tol) {
            return Err(Error::GapViolation { node, t });
        }
        flat_off += r_x.abs() * (kr_k - kr_prev) + l_x.abs() * (kl_k - kl_prev);

        x.push(x_k);
        k.push(k_k);
        kr.push(kr_k);
        kl.push(kl_k);
        kr_prev = kr_k;
        kl_prev = kl_k;
    }

    Ok(SkorokhodSolution { grid, x, k, kr, kl, root_tol, flat_off_residual: flat_off })
}

/// Node-wise solutions `phi_k`, `psi_k` of `l(t_k, s_k + phi) = 0` and
/// `r(t_k, s_k + psi) = 0`.
pub fn compute_phi_psi(input: &InputPath, cons: &ConstraintPair, tol: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = input.grid();
    let mut phi = Vec::with_capacity(grid.n_nodes());
    let mut psi = Vec::with_capacity(grid.n_nodes());
    for (node, &s_k) in input.values().iter().enumerate() {
        let t = grid.t(node);
        let l0 = cons.lower(t, s_k);
        phi.push(root_solve_monotone(|p| cons.lower(t, s_k + p), seed_bracket(0.0, l0, cons.c()), tol)?);
        let r0 = cons.upper(t, s_k);
        psi.push(root_solve_monotone(|p| cons.upper(t, s_k + p), seed_bracket(0.0, r0, cons.c()), tol)?);
    }
    Ok((phi, psi))
}

/// `x` range over which constraint differences are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling_box: Option<SamplingBox>,
}

fn oscillation(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Compare `sup |K_a - K_b|` over `nodes` with `osc(phi) + osc(psi)` over the same nodes.
pub fn check_oscillation_bound(
    solution: &SkorokhodSolution,
    phi: &[f64],
    psi: &[f64],
    nodes: std::ops::RangeInclusive<usize>,
) -> Result<BoundReport> {
    let n = solution.k.len();
    if phi.len() != n || psi.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "phi/psi lengths {}/{} differ from solution length {n}",
            phi.len(),
            psi.len()
        )));
    }
    if nodes.is_empty() || *nodes.end() >= n {
        return Err(Error::InvalidInput(format!("node range {nodes:?} outside 0..{n}")));
    }
    let lhs = oscillation(&solution.k[nodes.clone()]);
    let rhs = oscillation(&phi[nodes.clone()]) + oscillation(&psi[nodes]);
    Ok(BoundReport {
        lhs,
        rhs,
        holds: lhs <= rhs + BOUND_SLACK_FACTOR * solution.root_tol,
        sampling_box: None,
    })
}

/// One Skorokhod instance: its input, constraints and solution.
#[derive(Debug, Clone, Copy)]
pub struct SkorokhodInstance<'a> {
    pub input: &'a InputPath,
    pub constraints: &'a ConstraintPair,
    pub solution: &'a SkorokhodSolution,
}

/// Continuity estimate between two instances:
/// `sup|K1 - K2| <= (C/c) sup|s1 - s2| + (1/c) max(Lbar, Rbar)`, where
/// `Lbar`, `Rbar` are sup-differences of the constraint maps sampled on grid
/// times times `sampling_box`. `c` and `C` are the weakest of the two pairs.
pub fn check_continuity_bound(
    first: SkorokhodInstance<'_>,
    second: SkorokhodInstance<'_>,
    sampling_box: SamplingBox,
) -> Result<BoundReport> {
    let grid = first.input.grid();
    if grid != second.input.grid() || first.solution.k.len() != second.solution.k.len() {
        return Err(Error::DimensionMismatch("instances live on different grids".into()));
    }
    if sampling_box.samples < 2 || !(sampling_box.x_max > sampling_box.x_min) {
        return Err(Error::InvalidInput("sampling box needs x_max > x_min and >= 2 samples".into()));
    }
    let lhs = sup_abs_diff(&first.solution.k, &second.solution.k);
    let s_gap = sup_abs_diff(first.input.values(), second.input.values());

    let (c1, c2) = (first.constraints, second.constraints);
    let (mut l_bar, mut r_bar) = (0.0_f64, 0.0_f64);
    let step = (sampling_box.x_max - sampling_box.x_min) / (sampling_box.samples - 1) as f64;
    for node in 0..grid.n_nodes() {
        let t = grid.t(node);
        for j in 0..sampling_box.samples {
            let x = sampling_box.x_min + j as f64 * step;
            l_bar = l_bar.max((c1.lower(t, x) - c2.lower(t, x)).abs());
            r_bar = r_bar.max((c1.upper(t, x) - c2.upper(t, x)).abs());
        }
    }
    let c = c1.c().min(c2.c());
    let big_c = c1.big_c().max(c2.big_c());
    let rhs = big_c / c * s_gap + l_bar.max(r_bar) / c;
    let tol = first.solution.root_tol.max(second.solution.root_tol);
    Ok(BoundReport {
        lhs,
        rhs,
        holds: lhs <= rhs + BOUND_SLACK_FACTOR * tol,
        sampling_box: Some(sampling_box),
    })
}

fn sup_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
