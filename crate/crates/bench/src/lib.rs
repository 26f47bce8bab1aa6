//! Shared fixtures for the solver benchmarks.

use meanrefl_core::{preset, ConstraintPair, InputPath, Scenario, TimeGrid};

/// A sine input on `[0, 1]` that crosses both sides of `[-0.4, 0.4]`.
pub fn oscillating_input(n_steps: usize) -> (InputPath, ConstraintPair) {
    let grid = TimeGrid::new(1.0, n_steps).unwrap();
    let input = InputPath::from_fn(grid, |t| 1.5 * (9.0 * t).sin() + 0.3 * t).unwrap();
    let cons = ConstraintPair::affine(1.0, |_| 0.4, |_| -0.4, 0.8).unwrap();
    (input, cons)
}

/// A catalog scenario resized to `n_particles` and `n_steps`.
pub fn catalog_scenario(name: &str, n_particles: usize, n_steps: usize) -> Scenario {
    let mut spec = preset(name).unwrap();
    spec.n_particles = n_particles;
    spec.n_steps = n_steps;
    spec.build().unwrap()
}
