//! Uniformly weighted empirical measures on `R^d`.

use crate::error::{Error, Result};

/// `N` samples of dimension `d`, stored row-major, each with weight `1/N`.
///
/// The componentwise mean and the first absolute moment are computed once at
/// construction, since generators query them for every particle.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    samples: Vec<f64>,
    mean: Vec<f64>,
    abs_moment: f64,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, samples: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("measure dimension must be at least 1".into()));
        }
        if samples.is_empty() || samples.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "{} values do not form a non-empty set of {dim}-dimensional samples",
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("measure samples must be finite".into()));
        }
        let n = samples.len() / dim;
        let mut mean = vec![0.0; dim];
        let mut abs_moment = 0.0;
        for row in samples.chunks_exact(dim) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
            abs_moment += euclidean_norm(row);
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        Ok(Self { dim, samples, mean, abs_moment: abs_moment / n as f64 })
    }

    /// One-dimensional measure from scalar samples.
    pub fn scalar(samples: Vec<f64>) -> Result<Self> {
        Self::new(1, samples)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Mean of a one-dimensional measure (first component otherwise).
    pub fn mean_scalar(&self) -> f64 {
        self.mean[0]
    }

    /// Wasserstein-1 distance to the Dirac mass at the origin, `E|X|`.
    pub fn d1_to_dirac0(&self) -> f64 {
        self.abs_moment
    }

    /// Translate every sample by `shift` (same length as the dimension).
    pub fn shifted(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim {
            return Err(Error::DimensionMismatch(format!("shift of length {} for dimension {}", shift.len(), self.dim)));
        }
        let samples = self
            .samples
            .chunks_exact(self.dim)
            .flat_map(|row| row.iter().zip(shift).map(|(v, a)| v + a))
            .collect();
        Self::new(self.dim, samples)
    }
}

fn euclidean_norm(v: &[f64]) -> f64 {
    if v.len() == 1 {
        v[0].abs()
    } else {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Componentwise sample average.
pub fn mean(mu: &EmpiricalMeasure) -> Vec<f64> {
    mu.mean().to_vec()
}

/// Wasserstein-1 distance between two one-dimensional empirical measures of
/// equal size: the mean absolute difference of the order statistics.
pub fn wasserstein1_1d(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "wasserstein1_1d needs one-dimensional measures, got d = {} and d = {}",
            mu.dim(),
            nu.dim()
        )));
    }
    if mu.len() != nu.len() {
        return Err(Error::DimensionMismatch(format!(
            "sample counts differ: {} vs {}",
            mu.len(),
            nu.len()
        )));
    }
    let mut a = mu.samples().to_vec();
    let mut b = nu.samples().to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let total: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
    Ok(total / a.len() as f64)
}

/// `E|X|` under `mu`, the exact Wasserstein-1 distance to `delta_0` in any dimension.
pub fn d1_to_dirac0(mu: &EmpiricalMeasure) -> f64 {
    mu.d1_to_dirac0()
}
