use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// `N` independent `d`-dimensional Brownian paths sampled on a grid.
///
/// `increment(k, i)` is `B_{k+1,i} - B_{k,i}` for `k < n_steps`; `path(k, i)`
/// is `B_{k,i}` for `k <= n_steps` with `B_{0,i} = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianEnsemble {
    grid: TimeGrid,
    dim: usize,
    n_particles: usize,
    seed: u64,
    increments: Vec<f64>,
    paths: Vec<f64>,
}

/// Draw a reproducible ensemble from a ChaCha8 stream seeded with `seed`.
/// Increments are drawn step by step, particle by particle, component by component.
pub fn simulate_brownian(grid: TimeGrid, dim: usize, n_particles: usize, seed: u64) -> Result<BrownianEnsemble> {
    if n_particles < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 particles, got {n_particles}")));
    }
    if dim == 0 {
        return Err(Error::InvalidInput("Brownian dimension must be at least 1".into()));
    }
    let n = grid.n_steps();
    let row = n_particles * dim;
    let sd = grid.dt().sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut increments = Vec::with_capacity(n * row);
    for _ in 0..n * row {
        let z: f64 = StandardNormal.sample(&mut rng);
        increments.push(sd * z);
    }
    let mut paths = vec![0.0; (n + 1) * row];
    for k in 0..n {
        let (done, rest) = paths.split_at_mut((k + 1) * row);
        let prev = &done[k * row..];
        let next = &mut rest[..row];
        let inc = &increments[k * row..(k + 1) * row];
        for j in 0..row {
            next[j] = prev[j] + inc[j];
        }
    }
    Ok(BrownianEnsemble { grid, dim, n_particles, seed, increments, paths })
}

impl BrownianEnsemble {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn increment(&self, k: usize, i: usize) -> &[f64] {
        let at = (k * self.n_particles + i) * self.dim;
        &self.increments[at..at + self.dim]
    }

    pub fn path(&self, k: usize, i: usize) -> &[f64] {
        let at = (k * self.n_particles + i) * self.dim;
        &self.paths[at..at + self.dim]
    }

    /// All particles' `B_k`, row-major `N x d`.
    pub fn paths_at(&self, k: usize) -> &[f64] {
        let row = self.n_particles * self.dim;
        &self.paths[k * row..(k + 1) * row]
    }

    /// All particles' `B_{k+1} - B_k`, row-major `N x d`.
    pub fn increments_at(&self, k: usize) -> &[f64] {
        let row = self.n_particles * self.dim;
        &self.increments[k * row..(k + 1) * row]
    }

    pub fn terminal(&self, i: usize) -> &[f64] {
        self.path(self.grid.n_steps(), i)
    }

    /// True when both ensembles share grid, dimension and particle count.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.grid == other.grid && self.dim == other.dim && self.n_particles == other.n_particles
    }
}
