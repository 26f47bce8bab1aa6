//! Closed-form solutions used as oracles by the examples and the CLI report.

use crate::grid::TimeGrid;

/// `f = c`, `xi = shift + scale sum_j B_T^j`:
/// `Y_t = shift + scale sum_j B_t^j + c (T - t)`, `Z_t = scale` per component.
pub fn affine_terminal_constant_driver(shift: f64, scale: f64, c: f64, horizon: f64, t: f64, b_t: &[f64]) -> (f64, f64) {
    (shift + scale * b_t.iter().sum::<f64>() + c * (horizon - t), scale)
}

/// `f = a mean(mu)` without reflection: `E[Y_t] = E[xi] e^{a (T - t)}`.
pub fn linear_meanfield_mean(mean_xi: f64, a: f64, horizon: f64, t: f64) -> f64 {
    mean_xi * (a * (horizon - t)).exp()
}

/// Deterministic mean path kept above `level` by a push-up reflection that
/// acts backward from `T`: returns forward `K_k` with `K_0 = 0`, where
/// `K_n - K_k = max_{k <= j <= n} (level - m(t_j))^+`.
pub fn lower_barrier_reflection(grid: &TimeGrid, mean_path: impl Fn(f64) -> f64, level: f64) -> Vec<f64> {
    let n = grid.n_steps();
    let mut tail = vec![0.0; n + 1];
    let mut run = 0.0_f64;
    for k in (0..=n).rev() {
        run = run.max(level - mean_path(grid.t(k)));
        tail[k] = run;
    }
    tail.iter().map(|v| tail[0] - v).collect()
}
