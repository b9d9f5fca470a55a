//! Uniform truncated velocity grid, midpoint quadrature and the moment toolkit.
//!
//! Nodes sit at cell centres `v = -L + (i + 1/2) h` on every axis, so the node
//! set is centro-symmetric and never contains the origin. Flat indices are
//! row-major with the last axis running fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    pub l: f64,
    pub h: f64,
}

pub fn build_grid(d: usize, l: f64, n: usize) -> Result<GridSpec> {
    if d != 2 && d != 3 {
        return Err(Error::InvalidGrid(format!("dimension must be 2 or 3, got {d}")));
    }
    if n < 8 || n % 2 != 0 {
        return Err(Error::InvalidGrid(format!("points per axis must be even and >= 8, got {n}")));
    }
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::InvalidGrid(format!("half-extent must be positive, got {l}")));
    }
    Ok(GridSpec { d, n, l, h: 2.0 * l / n as f64 })
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.l + (i as f64 + 0.5) * self.h
    }

    pub fn axis_nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.axis_coord(i)).collect()
    }

    pub fn multi_index(&self, k: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut r = k;
        for a in (0..self.d).rev() {
            idx[a] = r % self.n;
            r /= self.n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx[..self.d].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Coordinates of node `k`, zero-padded to three components.
    pub fn node(&self, k: usize) -> [f64; 3] {
        let idx = self.multi_index(k);
        let mut v = [0.0; 3];
        for a in 0..self.d {
            v[a] = self.axis_coord(idx[a]);
        }
        v
    }

    pub fn nodes(&self) -> Vec<[f64; 3]> {
        (0..self.len()).map(|k| self.node(k)).collect()
    }

    /// Index of the node at `-v_k`.
    pub fn antipode(&self, k: usize) -> usize {
        let mut idx = self.multi_index(k);
        for a in 0..self.d {
            idx[a] = self.n - 1 - idx[a];
        }
        self.flat_index(&idx)
    }

    /// Index of the node obtained by flipping the sign of axis `axis`.
    pub fn reflect(&self, k: usize, axis: usize) -> usize {
        let mut idx = self.multi_index(k);
        idx[axis] = self.n - 1 - idx[axis];
        self.flat_index(&idx)
    }

    pub fn sq_norm(&self, k: usize) -> f64 {
        let v = self.node(k);
        v.iter().map(|x| x * x).sum()
    }

    pub fn compatible(&self, other: &GridSpec) -> bool {
        self.d == other.d && self.n == other.n && self.l == other.l
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl Distribution {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self { grid: *grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: &GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite distribution value".into()));
        }
        Ok(Self { grid: *grid, values })
    }

    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(&grid.node(k)[..grid.d])).collect();
        Self { grid: *grid, values }
    }

    pub fn indicator(grid: &GridSpec, k: usize) -> Self {
        let mut out = Self::zeros(grid);
        out.values[k] = 1.0;
        out
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_same_grid(&self, other: &Distribution) -> Result<()> {
        if self.grid.compatible(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|x| c * x).collect() }
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &Distribution) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Self { grid: self.grid, values }
    }

    pub fn mul(&self, other: &Distribution) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Self { grid: self.grid, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&x| f(x)).collect() }
    }

    pub fn l1_norm(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().map(|x| x.abs()).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_volume() * self.values.iter().map(|x| x * x).sum::<f64>()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Quadrature of the nodewise product.
    pub fn pairing(&self, other: &Distribution) -> f64 {
        self.grid.cell_volume() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroFields {
    pub mass: f64,
    pub momentum: Option<Vec<f64>>,
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpWeight {
    pub a: f64,
    pub s: f64,
}

impl ExpWeight {
    pub fn new(a: f64, s: f64) -> Result<Self> {
        if !(a > 0.0) || !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParameter(format!("weight needs a > 0 and 0 < s < 1, got a={a}, s={s}")));
        }
        Ok(Self { a, s })
    }

    /// Inverse weight `1/m(v) = exp(a |v|^s)`.
    pub fn inverse(&self, v: &[f64]) -> f64 {
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (self.a * r.powf(self.s)).exp()
    }
}

impl Default for ExpWeight {
    fn default() -> Self {
        Self { a: 0.1, s: 0.5 }
    }
}

pub fn quadrature(f: &Distribution) -> f64 {
    f.grid.cell_volume() * f.values.iter().sum::<f64>()
}

pub fn maxwellian(grid: &GridSpec, mass: f64, u: &[f64], t: f64) -> Result<Distribution> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("temperature must be positive, got {t}")));
    }
    if !(mass > 0.0) {
        return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
    }
    if u.len() != grid.d {
        return Err(Error::InvalidParameter("mean velocity has wrong dimension".into()));
    }
    let norm = mass * (2.0 * std::f64::consts::PI * t).powf(-(grid.d as f64) / 2.0);
    Ok(Distribution::from_fn(grid, |v| {
        let r2: f64 = v.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum();
        norm * (-r2 / (2.0 * t)).exp()
    }))
}

pub fn moments(f: &Distribution) -> MacroFields {
    let g = &f.grid;
    let w = g.cell_volume();
    let mass = quadrature(f);
    if mass == 0.0 || !mass.is_finite() {
        return MacroFields { mass, momentum: None, temperature: None };
    }
    let mut mom = vec![0.0; g.d];
    for (k, &fk) in f.values.iter().enumerate() {
        let v = g.node(k);
        for a in 0..g.d {
            mom[a] += fk * v[a];
        }
    }
    let u: Vec<f64> = mom.iter().map(|m| w * m / mass).collect();
    let mut e = 0.0;
    for (k, &fk) in f.values.iter().enumerate() {
        let v = g.node(k);
        let r2: f64 = (0..g.d).map(|a| (v[a] - u[a]).powi(2)).sum();
        e += fk * r2;
    }
    let t = w * e / (g.d as f64 * mass);
    MacroFields { mass, momentum: Some(u), temperature: Some(t) }
}

pub fn laplacian(f: &Distribution) -> Distribution {
    let g = &f.grid;
    let inv_h2 = 1.0 / (g.h * g.h);
    let mut out = vec![0.0; g.len()];
    let strides: Vec<usize> = (0..g.d).map(|a| g.n.pow((g.d - 1 - a) as u32)).collect();
    for (k, o) in out.iter_mut().enumerate() {
        let idx = g.multi_index(k);
        let mut acc = 0.0;
        for a in 0..g.d {
            let lo = if idx[a] > 0 { f.values[k - strides[a]] } else { 0.0 };
            let hi = if idx[a] + 1 < g.n { f.values[k + strides[a]] } else { 0.0 };
            acc += lo - 2.0 * f.values[k] + hi;
        }
        *o = acc * inv_h2;
    }
    Distribution { grid: *g, values: out }
}

pub fn weighted_norm(f: &Distribution, w: &ExpWeight) -> f64 {
    let g = &f.grid;
    let s: f64 = f
        .values
        .iter()
        .enumerate()
        .map(|(k, x)| x.abs() * w.inverse(&g.node(k)[..g.d]))
        .sum();
    g.cell_volume() * s
}

pub fn third_moment_vector(h: &Distribution) -> Vec<f64> {
    let g = &h.grid;
    let mut q = vec![0.0; g.d];
    for (k, &x) in h.values.iter().enumerate() {
        let v = g.node(k);
        let r2: f64 = v.iter().map(|c| c * c).sum();
        for a in 0..g.d {
            q[a] += x * v[a] * r2;
        }
    }
    q.iter().map(|c| c * g.cell_volume()).collect()
}

/// Quadrature of `|v|^p f(v)`.
pub fn radial_moment(f: &Distribution, p: f64) -> f64 {
    let g = &f.grid;
    let s: f64 = f.values.iter().enumerate().map(|(k, x)| x * g.sq_norm(k).powf(p / 2.0)).sum();
    g.cell_volume() * s
}

/// Surface measure of the unit sphere in dimension `d`.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(build_grid(4, 1.0, 8).is_err());
        assert!(build_grid(2, 1.0, 9).is_err());
        assert!(build_grid(2, 1.0, 6).is_err());
        assert!(build_grid(2, 0.0, 8).is_err());
    }

    #[test]
    fn midpoint_nodes() {
        let g = build_grid(2, 1.0, 8).unwrap();
        let nodes = g.axis_nodes();
        assert!((nodes[0] + 0.875).abs() < 1e-15);
        assert!((nodes[1] + 0.625).abs() < 1e-15);
        assert!((nodes[7] - 0.875).abs() < 1e-15);
        let g = build_grid(2, 8.0, 32).unwrap();
        assert_eq!(g.len(), 1024);
        assert_eq!(g.h, 0.5);
        assert_eq!(build_grid(3, 6.0, 16).unwrap().len(), 4096);
    }

    #[test]
    fn index_roundtrip_and_antipode() {
        let g = build_grid(3, 2.0, 8).unwrap();
        for k in [0, 17, 300, 511] {
            assert_eq!(g.flat_index(&g.multi_index(k)), k);
            let a = g.antipode(k);
            let (v, w) = (g.node(k), g.node(a));
            for c in 0..3 {
                assert_eq!(v[c], -w[c]);
            }
        }
    }

    #[test]
    fn single_node_quadrature_and_norm() {
        let g = build_grid(2, 1.0, 8).unwrap();
        let f = Distribution::indicator(&g, 5);
        assert_eq!(quadrature(&f), g.cell_volume());
        assert_eq!(quadrature(&Distribution::zeros(&g)), 0.0);
        assert_eq!(weighted_norm(&Distribution::zeros(&g), &ExpWeight::default()), 0.0);
    }

    #[test]
    fn laplacian_of_quadratic_in_interior() {
        let g = build_grid(2, 4.0, 16).unwrap();
        let f = Distribution::from_fn(&g, |v| v[0] * v[0]);
        let lap = laplacian(&f);
        for k in 0..g.len() {
            let idx = g.multi_index(k);
            if idx[..2].iter().all(|&i| i > 0 && i < g.n - 1) {
                assert!((lap.values[k] - 2.0).abs() < 1e-10);
            }
        }
        let c = Distribution::from_fn(&g, |_| 3.0);
        let lc = laplacian(&c);
        assert_eq!(lc.values[g.flat_index(&[5, 5])], 0.0);
        assert!(lc.values[0] < 0.0);
    }

    #[test]
    fn zero_mass_flags_undefined() {
        let g = build_grid(2, 1.0, 8).unwrap();
        let m = moments(&Distribution::zeros(&g));
        assert_eq!(m.mass, 0.0);
        assert!(m.momentum.is_none() && m.temperature.is_none());
    }

    #[test]
    fn maxwellian_mass_scaling_and_parity() {
        let g = build_grid(2, 6.0, 16).unwrap();
        let m1 = maxwellian(&g, 1.0, &[0.0, 0.0], 1.3).unwrap();
        let m2 = maxwellian(&g, 2.0, &[0.0, 0.0], 1.3).unwrap();
        for k in 0..g.len() {
            assert_eq!(m2.values[k], 2.0 * m1.values[k]);
            assert_eq!(m1.values[k], m1.values[g.antipode(k)]);
        }
        assert!(maxwellian(&g, 1.0, &[0.0, 0.0], 0.0).is_err());
    }
}
