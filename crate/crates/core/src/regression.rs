//! Least-squares projection onto polynomials of the current Brownian state.
//!
//! The basis is the tensor family of probabilists' Hermite polynomials in
//! `B_t / sqrt(t)` with total degree at most `degree`; the scaling keeps the
//! Gram matrix close to the identity for Gaussian states.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Multi-indices of total degree `<= degree` in `dim` variables, graded then lexicographic.
pub fn multi_indices(dim: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(dim: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == dim {
            out.push(prefix.clone());
            return;
        }
        for p in 0..=left {
            prefix.push(p);
            rec(dim, left - p, prefix, out);
            prefix.pop();
        }
    }
    let mut all = Vec::new();
    rec(dim, degree, &mut Vec::with_capacity(dim), &mut all);
    all.sort_by_key(|idx| (idx.iter().sum::<usize>(), std::cmp::Reverse(idx.clone())));
    all
}

/// `He_0(x), ..., He_degree(x)`.
fn hermite_values(x: f64, degree: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if degree >= 1 {
        out.push(x);
    }
    for n in 2..=degree {
        let v = x * out[n - 1] - (n - 1) as f64 * out[n - 2];
        out.push(v);
    }
}

/// Least-squares fit onto the basis at a fixed set of states; factored once,
/// applied to any number of targets.
#[derive(Debug, Clone)]
pub struct Regression {
    phi: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Regression {
    /// Build the basis at `states` (`N x dim`, row-major).
    ///
    /// `scale` is `sqrt(t)`; a zero scale (all particles at the origin) falls
    /// back to the constant basis. `step` only labels errors.
    pub fn new(states: &[f64], dim: usize, scale: f64, degree: usize, step: usize) -> Result<Self> {
        let n = states.len() / dim;
        let degree = if scale > 0.0 { degree } else { 0 };
        let indices = multi_indices(dim, degree);
        let p = indices.len();
        if n < p {
            return Err(Error::RegressionSingular { step });
        }

        let mut phi = DMatrix::<f64>::zeros(n, p);
        let mut he: Vec<Vec<f64>> = vec![Vec::with_capacity(degree + 1); dim];
        for i in 0..n {
            let row = &states[i * dim..(i + 1) * dim];
            for (j, &b) in row.iter().enumerate() {
                let x = if scale > 0.0 { b / scale } else { 0.0 };
                hermite_values(x, degree, &mut he[j]);
            }
            for (col, idx) in indices.iter().enumerate() {
                phi[(i, col)] = idx.iter().enumerate().map(|(j, &e)| he[j][e]).product();
            }
        }

        let gram = phi.tr_mul(&phi) / n as f64;
        let chol = gram.clone().cholesky().ok_or(Error::RegressionSingular { step })?;
        let l = chol.l();
        let max_diag = (0..p).map(|j| gram[(j, j)]).fold(0.0, f64::max);
        let min_pivot = (0..p).map(|j| l[(j, j)] * l[(j, j)]).fold(f64::INFINITY, f64::min);
        if !(min_pivot > 1e-10 * max_diag) {
            return Err(Error::RegressionSingular { step });
        }
        Ok(Self { phi, chol })
    }

    pub fn basis_size(&self) -> usize {
        self.phi.ncols()
    }

    pub fn n_states(&self) -> usize {
        self.phi.nrows()
    }

    /// Fitted values of the projection of `y`.
    pub fn fit(&self, y: &[f64]) -> Result<Vec<f64>> {
        let n = self.phi.nrows();
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!("target of length {} for {n} states", y.len())));
        }
        let rhs = self.phi.tr_mul(&DVector::from_column_slice(y)) / n as f64;
        let beta = self.chol.solve(&rhs);
        Ok((&self.phi * beta).as_slice().to_vec())
    }
}

/// A fitted projection of several targets onto a common basis.
#[derive(Debug, Clone)]
pub struct Projection {
    /// Fitted values, one vector of length `N` per target.
    pub fitted: Vec<Vec<f64>>,
    /// Number of basis functions actually used.
    pub basis_size: usize,
}

/// Regress each target on the basis evaluated at `states`; see [`Regression::new`].
pub fn project(
    states: &[f64],
    dim: usize,
    scale: f64,
    degree: usize,
    targets: &[&[f64]],
    step: usize,
) -> Result<Projection> {
    let reg = Regression::new(states, dim, scale, degree, step)?;
    let fitted = targets.iter().map(|y| reg.fit(y)).collect::<Result<Vec<_>>>()?;
    Ok(Projection { fitted, basis_size: reg.basis_size() })
}
