//! Dense linearized operator and its spatial Fourier family.

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::collision::CollisionOperator;
use crate::error::{Error, Result};
use crate::velocity_grid::{laplacian, Distribution, GridSpec};

#[derive(Debug, Clone)]
pub enum Entries {
    Real(Mat<f64>),
    Complex(Mat<Complex64>),
}

#[derive(Debug, Clone)]
pub struct LinearOperatorMatrix {
    pub entries: Entries,
    pub alpha: f64,
    pub gamma: Vec<f64>,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub reconstruction_error: f64,
    pub operator_norm: f64,
}

#[derive(Debug, Clone)]
pub struct OperatorSplit {
    pub local: Mat<Complex64>,
    pub remainder: Mat<Complex64>,
    pub nu: Distribution,
}

impl LinearOperatorMatrix {
    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn real(&self) -> Option<&Mat<f64>> {
        match &self.entries {
            Entries::Real(m) => Some(m),
            Entries::Complex(_) => None,
        }
    }

    pub fn to_complex(&self) -> Mat<Complex64> {
        match &self.entries {
            Entries::Real(m) => Mat::from_fn(m.nrows(), m.ncols(), |i, j| Complex64::new(m[(i, j)], 0.0)),
            Entries::Complex(m) => m.clone(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match &self.entries {
            Entries::Real(m) => Complex64::new(m[(i, j)], 0.0),
            Entries::Complex(m) => m[(i, j)],
        }
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for (j, xj) in x.iter().enumerate() {
            if *xj == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += self.entry(i, j) * xj;
            }
        }
        y
    }

    pub fn frobenius_norm(&self) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                s += self.entry(i, j).norm_sqr();
            }
        }
        s.sqrt()
    }
}

pub fn laplacian_matrix(grid: &GridSpec) -> Mat<f64> {
    let n = grid.len();
    let mut m = Mat::<f64>::zeros(n, n);
    let inv_h2 = 1.0 / (grid.h * grid.h);
    let strides: Vec<usize> = (0..grid.d).map(|a| grid.n.pow((grid.d - 1 - a) as u32)).collect();
    for k in 0..n {
        let idx = grid.multi_index(k);
        m[(k, k)] = -2.0 * grid.d as f64 * inv_h2;
        for a in 0..grid.d {
            if idx[a] > 0 {
                m[(k, k - strides[a])] = inv_h2;
            }
            if idx[a] + 1 < grid.n {
                m[(k, k + strides[a])] = inv_h2;
            }
        }
    }
    m
}

/// `Q(g, F) + Q(F, g) + (1 - alpha) Laplacian g`
pub fn apply_linearized(op: &CollisionOperator, g: &Distribution, big_f: &Distribution) -> Result<Distribution> {
    g.check_same_grid(big_f)?;
    let q = op.collision_apply(big_f, g)?.q;
    Ok(q.scaled(2.0).axpy(op.epsilon(), &laplacian(g)))
}

pub fn assemble_linearized(op: &CollisionOperator, big_f: &Distribution) -> Result<LinearOperatorMatrix> {
    let mut m = op.linearized_matrix(big_f)?;
    let eps = op.epsilon();
    if eps != 0.0 {
        let lap = laplacian_matrix(&op.grid);
        let n = op.grid.len();
        for j in 0..n {
            for i in 0..n {
                m[(i, j)] += eps * lap[(i, j)];
            }
        }
    }
    Ok(LinearOperatorMatrix { entries: Entries::Real(m), alpha: op.alpha, gamma: vec![0.0; op.grid.d], grid: op.grid })
}

/// `A - i diag(gamma . v)`
pub fn assemble_fourier(a: &LinearOperatorMatrix, gamma: &[f64]) -> Result<LinearOperatorMatrix> {
    let base = a.real().ok_or_else(|| Error::InvalidParameter("Fourier assembly needs the real operator".into()))?;
    if gamma.len() != a.grid.d || gamma.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("frequency vector has wrong dimension or is not finite".into()));
    }
    let grid = a.grid;
    let shift: Vec<f64> = (0..grid.len())
        .map(|k| {
            let v = grid.node(k);
            (0..grid.d).map(|c| gamma[c] * v[c]).sum()
        })
        .collect();
    let m = Mat::from_fn(grid.len(), grid.len(), |i, j| {
        let re = base[(i, j)];
        if i == j {
            Complex64::new(re, -shift[i])
        } else {
            Complex64::new(re, 0.0)
        }
    });
    Ok(LinearOperatorMatrix { entries: Entries::Complex(m), alpha: a.alpha, gamma: gamma.to_vec(), grid })
}

pub fn split_operator(
    a: &LinearOperatorMatrix,
    op: &CollisionOperator,
    big_f: &Distribution,
    gamma: &[f64],
) -> Result<OperatorSplit> {
    let full = assemble_fourier(a, gamma)?.to_complex();
    let grid = a.grid;
    let nu = op.loss_potential(big_f)?;
    let lap = laplacian_matrix(&grid);
    let eps = 1.0 - a.alpha;
    let n = grid.len();
    let local = Mat::from_fn(n, n, |i, j| {
        let mut z = Complex64::new(eps * lap[(i, j)], 0.0);
        if i == j {
            let v = grid.node(i);
            let gv: f64 = (0..grid.d).map(|c| gamma[c] * v[c]).sum();
            z -= Complex64::new(nu.values[i], gv);
        }
        z
    });
    let remainder = Mat::from_fn(n, n, |i, j| full[(i, j)] - local[(i, j)]);
    Ok(OperatorSplit { local, remainder, nu })
}

impl OperatorSplit {
    pub fn report(&self, full: &LinearOperatorMatrix) -> SplitReport {
        let n = full.dim();
        let mut err: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                err = err.max((self.local[(i, j)] + self.remainder[(i, j)] - full.entry(i, j)).norm());
            }
        }
        SplitReport { reconstruction_error: err, operator_norm: full.frobenius_norm() }
    }
}

/// `|Q+(F, h) - Q+(h, F)|_1`, the asymmetry of the discrete gain.
pub fn gain_symmetry_defect(op: &CollisionOperator, big_f: &Distribution, h: &Distribution) -> Result<f64> {
    let (a, _) = op.gain_apply(big_f, h)?;
    let (b, _) = op.gain_apply(h, big_f)?;
    Ok(a.axpy(-1.0, &b).l1_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::velocity_grid::build_grid;

    #[test]
    fn laplacian_matrix_matches_operator() {
        let g = build_grid(2, 3.0, 8).unwrap();
        let m = laplacian_matrix(&g);
        let f = Distribution::from_fn(&g, |v| (v[0] * 0.7 + v[1] * v[1]).sin());
        let lf = laplacian(&f);
        for i in 0..g.len() {
            let s: f64 = (0..g.len()).map(|j| m[(i, j)] * f.values[j]).sum();
            assert!((s - lf.values[i]).abs() < 1e-12);
        }
    }
}
