use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ConstraintReport, Initializer, LossFieldPair, ReflectedSolution, Scenario};
use crate::brownian::BrownianEnsemble;
use crate::error::{Error, Result};
use crate::generator::{Driver, DriverArgs, GeneratorSpec};
use crate::grid::TimeGrid;
use crate::measure::EmpiricalMeasure;
use crate::mfbsde::{solve_backward_with, BackwardBasis, BackwardSolution};
use crate::skorokhod::{solve_skorokhod_pinned_start, ConstraintPair, InputPath, SkorokhodSolution};

/// `f^m(t_k, z, nu) = f(t_k, Y^{m-1}_{k,i}, P_{Y^{m-1}_k}, z, nu)`.
#[derive(Debug, Clone)]
pub struct FrozenGenerator {
    generator: GeneratorSpec,
    n_particles: usize,
    y_prev: Vec<f64>,
    laws: Vec<EmpiricalMeasure>,
}

impl FrozenGenerator {
    pub fn frozen_y(&self, node: usize, particle: usize) -> f64 {
        self.y_prev[node * self.n_particles + particle]
    }

    pub fn frozen_law(&self, node: usize) -> &EmpiricalMeasure {
        &self.laws[node]
    }
}

impl Driver for FrozenGenerator {
    fn value(&self, a: &DriverArgs<'_>) -> f64 {
        let y = self.frozen_y(a.node, a.particle);
        self.generator.eval(a.t, y, &self.laws[a.node], a.z, a.nu)
    }
}

pub fn freeze_generator(
    generator: &GeneratorSpec,
    y_prev: &[f64],
    grid: &TimeGrid,
    n_particles: usize,
) -> Result<FrozenGenerator> {
    if y_prev.len() != grid.n_nodes() * n_particles {
        return Err(Error::DimensionMismatch(format!(
            "frozen field has {} values, expected {} x {n_particles}",
            y_prev.len(),
            grid.n_nodes()
        )));
    }
    let laws = y_prev
        .chunks(n_particles)
        .map(|row| EmpiricalMeasure::new(1, row.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrozenGenerator { generator: generator.clone(), n_particles, y_prev: y_prev.to_vec(), laws })
}

/// Reversed-time data: `s_j = E[y_{n-j}]` and
/// `l(t_j, x) = E[L(t_{n-j}, y_{n-j} - E[y_{n-j}] + x)]`, `r` likewise.
/// The maps snap their time argument to the nearest node.
pub fn build_skorokhod_data(
    y_sol: &BackwardSolution,
    losses: &LossFieldPair,
    ensemble: &BrownianEnsemble,
) -> Result<(InputPath, ConstraintPair)> {
    let grid = y_sol.grid;
    if grid != *ensemble.grid() || y_sol.n_particles != ensemble.n_particles() {
        return Err(Error::EnsembleMismatch("backward solution and ensemble differ".into()));
    }
    let (n, np, d) = (grid.n_steps(), y_sol.n_particles, ensemble.dim());

    let means: Vec<f64> = (0..=n).map(|k| y_sol.y_at(k).iter().sum::<f64>() / np as f64).collect();
    let mut dev = Vec::with_capacity((n + 1) * np);
    for (k, m) in means.iter().enumerate() {
        dev.extend(y_sol.y_at(k).iter().map(|y| y - m));
    }
    let dev = Arc::new(dev);
    let omegas: Arc<Vec<f64>> = Arc::new((0..np).flat_map(|i| ensemble.terminal(i).to_vec()).collect());

    let averaged = |upper: bool| {
        let (dev, omegas, losses) = (Arc::clone(&dev), Arc::clone(&omegas), losses.clone());
        Arc::new(move |tbar: f64, x: f64| {
            let k = n - grid.nearest_node(tbar);
            let t = grid.t(k);
            let row = &dev[k * np..(k + 1) * np];
            let mut acc = 0.0;
            for (i, &e) in row.iter().enumerate() {
                let w = &omegas[i * d..(i + 1) * d];
                acc += if upper { losses.upper(t, e + x, w) } else { losses.lower(t, e + x, w) };
            }
            acc / np as f64
        }) as crate::skorokhod::ConstraintFn
    };

    let input = InputPath::new(grid, means.into_iter().rev().collect())?;
    let cons = ConstraintPair::new(averaged(false), averaged(true), losses.c(), losses.big_c(), losses.gap())?;
    Ok((input, cons))
}

/// Everything fixed across Picard iterations.
#[derive(Debug)]
pub struct PicardContext<'a> {
    pub scenario: &'a Scenario,
    pub ensemble: BrownianEnsemble,
    pub basis: BackwardBasis,
    pub xi: Vec<f64>,
}

impl<'a> PicardContext<'a> {
    /// Validates the scenario, draws the ensemble and checks terminal admissibility.
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        scenario.validate()?;
        let ensemble = scenario.ensemble()?;
        let basis = BackwardBasis::new(&ensemble, scenario.basis_degree)?;
        let xi = scenario.terminal.values(&ensemble)?;
        scenario.check_terminal_admissibility(&ensemble, &xi)?;
        Ok(Self { scenario, ensemble, basis, xi })
    }

    pub fn initial_field(&self, init: &Initializer) -> Result<Vec<f64>> {
        let grid = self.scenario.grid;
        let (n, np) = (grid.n_steps(), self.ensemble.n_particles());
        match init {
            Initializer::Zero => Ok(vec![0.0; (n + 1) * np]),
            Initializer::Field(v) if v.len() == (n + 1) * np => Ok(v.clone()),
            Initializer::Field(v) => Err(Error::DimensionMismatch(format!(
                "initial field has {} values, expected {}",
                v.len(),
                (n + 1) * np
            ))),
            Initializer::ConditionalTerminal => {
                let mut y = Vec::with_capacity((n + 1) * np);
                for k in 0..n {
                    y.extend(self.basis.project(k, &self.xi)?);
                }
                y.extend_from_slice(&self.xi);
                Ok(y)
            }
        }
    }
}

/// One Picard iterate.
#[derive(Debug, Clone)]
pub struct PicardStep {
    /// Unconstrained solve with the frozen generator.
    pub backward: BackwardSolution,
    /// Skorokhod solution in reversed time.
    pub reversed: SkorokhodSolution,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub k: Vec<f64>,
    pub kr: Vec<f64>,
    pub kl: Vec<f64>,
}

/// `K_k = Kbar_n - Kbar_{n-k}` componentwise, `Y_k = y_k + K_n - K_k`, `Z = z`.
/// The reversed start is pinned: the terminal mean constraint is a precondition.
pub fn picard_step(ctx: &PicardContext<'_>, y_prev: &[f64]) -> Result<PicardStep> {
    let sc = ctx.scenario;
    let frozen = freeze_generator(&sc.generator, y_prev, &sc.grid, ctx.ensemble.n_particles())?;
    let backward = solve_backward_with(&ctx.ensemble, &ctx.basis, &frozen, &ctx.xi)?;
    let (input, cons) = build_skorokhod_data(&backward, &sc.losses, &ctx.ensemble)?;
    let reversed = solve_skorokhod_pinned_start(&input, &cons, sc.root_tol)?;

    let n = sc.grid.n_steps();
    let np = backward.n_particles;
    let kr: Vec<f64> = (0..=n).map(|k| reversed.kr[n] - reversed.kr[n - k]).collect();
    let kl: Vec<f64> = (0..=n).map(|k| reversed.kl[n] - reversed.kl[n - k]).collect();
    let k: Vec<f64> = kr.iter().zip(&kl).map(|(r, l)| r - l).collect();
    let mut y = backward.y.clone();
    for (node, row) in y.chunks_mut(np).enumerate() {
        let shift = k[n] - k[node];
        for v in row {
            *v += shift;
        }
    }
    let z = backward.z.clone();
    Ok(PicardStep { backward, reversed, y, z, k, kr, kl })
}

fn sup_mean_square(a: &[f64], b: &[f64], np: usize) -> f64 {
    a.chunks(np)
        .zip(b.chunks(np))
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / np as f64)
        .fold(0.0, f64::max)
}

fn iterate_moment(y: &[f64], z: &[f64], grid: &TimeGrid, np: usize, d: usize) -> f64 {
    let mut sup = vec![0.0_f64; np];
    for row in y.chunks(np) {
        for (s, v) in sup.iter_mut().zip(row) {
            *s = s.max(v * v);
        }
    }
    let z_part: f64 = z[..grid.n_steps() * np * d].iter().map(|v| v * v).sum::<f64>() * grid.dt() / np as f64;
    sup.iter().sum::<f64>() / np as f64 + z_part
}

pub fn solve_reflected(scenario: &Scenario) -> Result<ReflectedSolution> {
    solve_reflected_from(scenario, &Initializer::ConditionalTerminal)
}

pub fn solve_reflected_from(scenario: &Scenario, init: &Initializer) -> Result<ReflectedSolution> {
    let ctx = PicardContext::new(scenario)?;
    iterate(&ctx, init)
}

fn iterate(ctx: &PicardContext<'_>, init: &Initializer) -> Result<ReflectedSolution> {
    let sc = ctx.scenario;
    let (np, d) = (ctx.ensemble.n_particles(), ctx.ensemble.dim());
    let mut y_prev = ctx.initial_field(init)?;
    let mut history = Vec::new();
    let mut moments = Vec::new();
    for _ in 0..sc.max_picard_iters {
        let step = picard_step(ctx, &y_prev)?;
        let delta = sup_mean_square(&step.y, &y_prev, np);
        history.push(delta);
        moments.push(iterate_moment(&step.y, &step.z, &sc.grid, np, d));
        if delta <= sc.picard_tol {
            let constraint_report = ConstraintReport::compute(&sc.grid, &sc.losses, &ctx.ensemble, &step.y, sc.root_tol);
            return Ok(ReflectedSolution {
                grid: sc.grid,
                dim: d,
                n_particles: np,
                seed: sc.seed,
                y: step.y,
                z: step.z,
                k: step.k,
                kr: step.kr,
                kl: step.kl,
                picard_history: history,
                iterate_moments: moments,
                constraint_report,
            });
        }
        y_prev = step.y;
    }
    Err(Error::PicardNotConverged { history })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    /// `max_k mean_i |Y_k - Y'_k|^2` between the two limits.
    pub distance: f64,
    pub iterations_default: usize,
    pub iterations_alternative: usize,
}

/// Solve from the default initializer and from `alternative` on the same ensemble.
pub fn uniqueness_probe(scenario: &Scenario, alternative: &Initializer) -> Result<UniquenessReport> {
    let ctx = PicardContext::new(scenario)?;
    let a = iterate(&ctx, &Initializer::ConditionalTerminal)?;
    let b = iterate(&ctx, alternative)?;
    Ok(UniquenessReport {
        distance: sup_mean_square(&a.y, &b.y, a.n_particles),
        iterations_default: a.iterations(),
        iterations_alternative: b.iterations(),
    })
}
