use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition `t_k = k * T / n` of `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidInput("n_steps must be positive".into()));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Node time; the last node is exactly `T`.
    pub fn t(&self, k: usize) -> f64 {
        debug_assert!(k <= self.n_steps);
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.horizon / self.n_steps as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|k| self.t(k)).collect()
    }

    /// Index of the node closest to `t`, clamped to the grid.
    pub fn nearest_node(&self, t: f64) -> usize {
        let k = (t / self.dt()).round();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.n_steps)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_strictly_increasing_and_hit_endpoints() {
        let g = TimeGrid::new(0.7, 13).unwrap();
        let ts = g.times();
        assert_eq!(ts.len(), 14);
        assert_eq!(ts[0], 0.0);
        assert_eq!(ts[13], 0.7);
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(-1.0, 10).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(f64::NAN, 3).is_err());
    }

    #[test]
    fn nearest_node_snaps_and_clamps() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert_eq!(g.nearest_node(0.31), 3);
        assert_eq!(g.nearest_node(-5.0), 0);
        assert_eq!(g.nearest_node(3.0), 10);
        for k in 0..=10 {
            assert_eq!(g.nearest_node(g.t(k)), k);
        }
    }
}
