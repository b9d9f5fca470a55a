//! Analytic limit of the dispersion relation and the second-order induction.

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::collision::dissipation;
use crate::error::{Error, Result};
use crate::linop::LinearOperatorMatrix;
use crate::spectrum::transverse_basis;
use crate::velocity_grid::{quadrature, weighted_norm, Distribution, ExpWeight, GridSpec};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix3 {
    pub entries: [[Complex64; 3]; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramLimit {
    pub matrix: GramMatrix3,
    pub det: Complex64,
    /// `2 T^2 z (d z^2 + d T + 2 T^2)`
    pub closed_form: Complex64,
    /// `2 T^3 z (d z^2 + (d + 2) T)`, the cubic implied by the Gaussian moments for any `T`.
    pub moment_form: Complex64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionRoots {
    pub z: [Complex64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergySlope {
    pub c0: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub mass: f64,
    pub numeric: f64,
    pub analytic: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InductionMode {
    pub label: i32,
    pub lambda1: Complex64,
    /// Coefficient of `-rho^2`.
    pub lambda2: Complex64,
    /// `max |l . r| / |r|` over the left kernel before the complement solve.
    pub solvability: f64,
    /// `|Re h1| / |h1|` after fixing the phase of `h0` to be real.
    pub h1_real_fraction: f64,
    #[serde(skip)]
    pub h0: Vec<Complex64>,
    #[serde(skip)]
    pub h1: Vec<Complex64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Induction {
    pub modes: Vec<InductionMode>,
    /// Largest singular value treated as kernel.
    pub kernel_sigma: f64,
    /// Smallest singular value kept in the complement.
    pub complement_sigma: f64,
}

fn gaussian_even(d: usize, t: f64) -> (f64, f64, f64) {
    let d = d as f64;
    (d * t, (d + 2.0) * t * t, d * (d + 2.0) * t * t)
}

/// `c_nu = <nu, |v|^2>_F / <nu, 1>_F`
pub fn c_nu(f1: &Distribution, nu: &Distribution) -> Result<f64> {
    f1.check_same_grid(nu)?;
    let g = f1.grid;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..g.len() {
        let w = nu.values[k] * f1.values[k];
        num += w * g.sq_norm(k);
        den += w;
    }
    if den == 0.0 {
        return Err(Error::Numerical("zero collision-frequency pairing".into()));
    }
    Ok(num / den)
}

/// Limit Gram matrix in the basis `(1, v_1, |v|^2 - c_nu)` weighted by the
/// Maxwellian of temperature `t`, with `(z + i v_1)` inserted.
pub fn gram_matrix(z: Complex64, d: usize, t: f64, c: f64) -> GramMatrix3 {
    let (m2, m4_11, m4) = gaussian_even(d, t);
    let dt = d as f64 * t;
    let e13 = z * (dt - c);
    let e23 = I * (m4_11 - c * t);
    let e33 = z * (m4 - 2.0 * c * m2 + c * c);
    GramMatrix3 { entries: [[z, I * t, e13], [I * t, z * t, e23], [e13, e23, e33]] }
}

pub fn det3(m: &GramMatrix3) -> Complex64 {
    let a = &m.entries;
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

pub fn closed_form_cubic(z: Complex64, d: usize, t: f64) -> Complex64 {
    let d = d as f64;
    2.0 * t * t * z * (d * z * z + d * t + 2.0 * t * t)
}

pub fn moment_cubic(z: Complex64, d: usize, t: f64) -> Complex64 {
    let d = d as f64;
    2.0 * t * t * t * z * (d * z * z + (d + 2.0) * t)
}

pub fn gram_limit(z: Complex64, d: usize, t: f64, c: f64) -> Result<GramLimit> {
    if !(t > 0.0) || !c.is_finite() || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidParameter("gram_limit needs finite inputs and T > 0".into()));
    }
    let matrix = gram_matrix(z, d, t, c);
    let det = det3(&matrix);
    let closed_form = closed_form_cubic(z, d, t);
    let df = d as f64;
    let scale = 2.0 * t * t * z.norm() * (df * z.norm_sqr() + df * t + 2.0 * t * t);
    let relative_error = if scale > 0.0 { (det - closed_form).norm() / scale } else { (det - closed_form).norm() };
    let out = GramLimit { matrix, det, closed_form, moment_form: moment_cubic(z, d, t), relative_error };
    if relative_error > 1e-12 {
        return Err(Error::Consistency(format!(
            "Gram determinant differs from the closed-form cubic by {relative_error:.3e} (T = {t}); \
             the determinant equals 2T^3 z (d z^2 + (d+2) T) and meets the closed form only at T = 1"
        )));
    }
    Ok(out)
}

pub fn dispersion_roots(d: usize, t: f64) -> Result<DispersionRoots> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter("temperature must be positive".into()));
    }
    let s = (t + 2.0 * t * t / d as f64).sqrt();
    Ok(DispersionRoots { z: [Complex64::new(0.0, -s), Complex64::new(0.0, 0.0), Complex64::new(0.0, s)] })
}

/// Sound speed `sqrt((d + 2) T / d)` of the Gaussian moment system.
pub fn acoustic_speed(d: usize, t: f64) -> f64 {
    ((d as f64 + 2.0) * t / d as f64).sqrt()
}

pub fn transverse_limit(z: Complex64, t: f64) -> Complex64 {
    z * t
}

/// `e1 = 4 D(F1, h0) / E(h0)` with `h0 = c0 (|v|^2 - d T) F1`.
pub fn energy_slope(f1: &Distribution, t1: f64, b1: f64, weight: &ExpWeight) -> Result<EnergySlope> {
    let g = f1.grid;
    let dt = g.d as f64 * t1;
    let raw = Distribution::from_fn(&g, |v| v.iter().map(|x| x * x).sum::<f64>() - dt).mul(f1);
    let c0 = 1.0 / weighted_norm(&raw, weight);
    let h0 = raw.scaled(c0);
    let r2 = Distribution::from_fn(&g, |v| v.iter().map(|x| x * x).sum::<f64>());
    let energy = r2.pairing(&h0);
    let diss = dissipation(f1, &h0, b1)?;
    let numeric = 4.0 * diss / energy;
    let analytic = 3.0 / t1;
    Ok(EnergySlope {
        c0,
        energy,
        dissipation: diss,
        mass: quadrature(&h0),
        numeric,
        analytic,
        relative_error: (numeric - analytic).abs() / analytic,
    })
}

fn cvec_norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn small_eigen(m: &Mat<Complex64>) -> Result<(Vec<Complex64>, Mat<Complex64>)> {
    let e = m.eigen().map_err(|e| Error::Numerical(format!("small eigensolve failed: {e:?}")))?;
    let s = e.S().column_vector();
    Ok(((0..s.nrows()).map(|i| s[i]).collect(), e.U().to_owned()))
}

fn inverse(m: &Mat<Complex64>) -> Mat<Complex64> {
    let n = m.nrows();
    m.partial_piv_lu().solve(Mat::<Complex64>::identity(n, n))
}

impl Induction {
    /// Second-order coefficients of the hydrodynamic branches of `A1 - i rho (omega . v)`.
    pub fn new(a1: &LinearOperatorMatrix, omega: &[f64]) -> Result<Self> {
        let grid = a1.grid;
        let d = grid.d;
        let n = grid.len();
        let nk = d + 2;
        let a = a1.real().ok_or_else(|| Error::InvalidParameter("induction needs the real operator".into()))?;
        let svd = a.svd().map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
        let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
        let kernel_sigma = s[n - nk];
        let complement_sigma = s[n - nk - 1];
        let kern = Mat::from_fn(n, nk, |i, j| Complex64::new(v[(i, n - nk + j)], 0.0));
        let left = Mat::from_fn(n, nk, |i, j| Complex64::new(u[(i, n - nk + j)], 0.0));
        let w: Vec<f64> = (0..n)
            .map(|k| {
                let x = grid.node(k);
                (0..d).map(|c| omega[c] * x[c]).sum()
            })
            .collect();
        let wk = Mat::from_fn(n, nk, |i, j| -I * w[i] * kern[(i, j)]);
        let gmat = left.transpose() * &kern;
        let ginv = inverse(&gmat);
        let p1 = &ginv * (left.transpose() * &wk);
        let (lam1, cvec) = small_eigen(&p1)?;
        let cinv = inverse(&cvec);
        let ycoef = cinv.as_ref() * &ginv;
        let pinv = |r: &[Complex64]| -> Vec<Complex64> {
            let mut coef = vec![Complex64::new(0.0, 0.0); n - nk];
            for (j, c) in coef.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    acc += u[(i, j)] * r[i];
                }
                *c = acc / s[j];
            }
            (0..n).map(|i| (0..n - nk).map(|j| v[(i, j)] * coef[j]).sum()).collect()
        };
        let mut h0s = Vec::new();
        let mut ells = Vec::new();
        for m in 0..nk {
            let mut h0: Vec<Complex64> = (0..n).map(|i| (0..nk).map(|b| kern[(i, b)] * cvec[(b, m)]).sum()).collect();
            let mut ell: Vec<Complex64> = (0..n).map(|i| (0..nk).map(|b| left[(i, b)] * ycoef[(m, b)]).sum()).collect();
            let (imax, _) = h0.iter().enumerate().fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
            let ph = h0[imax].conj() / h0[imax].norm();
            h0.iter_mut().for_each(|z| *z *= ph);
            ell.iter_mut().for_each(|z| *z /= ph);
            h0s.push(h0);
            ells.push(ell);
        }
        let scale = lam1.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for m in 0..nk {
            match clusters.iter_mut().find(|c| (lam1[c[0]] - lam1[m]).norm() <= 1e-6 * scale) {
                Some(c) => c.push(m),
                None => clusters.push(vec![m]),
            }
        }
        let mut modes = Vec::new();
        for cl in &clusters {
            let l1 = cl.iter().map(|&m| lam1[m]).sum::<Complex64>() / cl.len() as f64;
            let mut h1s = Vec::new();
            let mut solv: f64 = 0.0;
            for &m in cl {
                let r: Vec<Complex64> = (0..n).map(|i| (l1 + I * w[i]) * h0s[m][i]).collect();
                let rn = cvec_norm(&r).max(1e-300);
                for b in 0..nk {
                    let p: Complex64 = (0..n).map(|i| left[(i, b)] * r[i]).sum();
                    solv = solv.max(p.norm() / rn);
                }
                h1s.push(pinv(&r));
            }
            let k = cl.len();
            let m2 = Mat::from_fn(k, k, |a, b| {
                (0..n).map(|i| ells[cl[a]][i] * (l1 + I * w[i]) * h1s[b][i]).sum::<Complex64>()
            });
            let (mu, beta) = small_eigen(&m2)?;
            for q in 0..k {
                let mut h0: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n];
                let mut h1: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n];
                for (a, &m) in cl.iter().enumerate() {
                    for i in 0..n {
                        h0[i] += beta[(a, q)] * h0s[m][i];
                        h1[i] += beta[(a, q)] * h1s[a][i];
                    }
                }
                let (imax, _) = h0.iter().enumerate().fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
                let ph = h0[imax].conj() / h0[imax].norm();
                h0.iter_mut().for_each(|z| *z *= ph);
                h1.iter_mut().for_each(|z| *z *= ph);
                let re: f64 = h1.iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
                let frac = re / cvec_norm(&h1).max(1e-300);
                modes.push(InductionMode {
                    label: i32::MIN,
                    lambda1: l1,
                    lambda2: mu[q],
                    solvability: solv,
                    h1_real_fraction: frac,
                    h0,
                    h1,
                });
            }
        }
        label_modes(&grid, omega, &mut modes, scale);
        modes.sort_by_key(|m| m.label);
        Ok(Self { modes, kernel_sigma, complement_sigma })
    }

    pub fn mode(&self, label: i32) -> Option<&InductionMode> {
        self.modes.iter().find(|m| m.label == label)
    }
}

fn label_modes(grid: &GridSpec, omega: &[f64], modes: &mut [InductionMode], scale: f64) {
    let d = grid.d;
    let basis = transverse_basis(omega);
    let score = |h: &[Complex64]| -> Vec<f64> {
        let mut t = vec![0.0; basis.len()];
        let mut other = 0.0;
        let (mut m0, mut m1, mut m2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let mut mt = vec![Complex64::new(0.0, 0.0); basis.len()];
        for (k, z) in h.iter().enumerate() {
            let v = grid.node(k);
            m0 += z;
            m1 += z * (0..d).map(|c| v[c] * omega[c]).sum::<f64>();
            m2 += z * (0..d).map(|c| v[c] * v[c]).sum::<f64>();
            for (b, e) in basis.iter().enumerate() {
                mt[b] += z * (0..d).map(|c| v[c] * e[c]).sum::<f64>();
            }
        }
        other += m0.norm() + m1.norm() + m2.norm();
        let tot = other + mt.iter().map(|z| z.norm()).sum::<f64>();
        for b in 0..basis.len() {
            t[b] = mt[b].norm() / tot.max(1e-300);
        }
        t
    };
    let mut rest = Vec::new();
    for (i, m) in modes.iter_mut().enumerate() {
        if m.lambda1.im > 1e-6 * scale {
            m.label = 1;
        } else if m.lambda1.im < -1e-6 * scale {
            m.label = -1;
        } else {
            rest.push(i);
        }
    }
    let scores: Vec<Vec<f64>> = rest.iter().map(|&i| score(&modes[i].h0)).collect();
    let mut taken = vec![false; rest.len()];
    for axis in 0..(d - 1) {
        if let Some(best) = (0..rest.len())
            .filter(|&r| !taken[r])
            .max_by(|&a, &b| scores[a][axis].partial_cmp(&scores[b][axis]).unwrap())
        {
            taken[best] = true;
            modes[rest[best]].label = 2 + axis as i32;
        }
    }
    for (r, &i) in rest.iter().enumerate() {
        if !taken[r] {
            modes[i].label = 0;
        }
    }
}

/// Second-order coefficient for the hydrodynamic mode of `A1` whose first
/// coefficient is closest to `lambda1` and whose `h0` overlaps most with `h0`.
pub fn lambda2_induction(omega: &[f64], a1: &LinearOperatorMatrix, h0: &[Complex64], lambda1: Complex64) -> Result<Complex64> {
    let ind = Induction::new(a1, omega)?;
    let hn = cvec_norm(h0).max(1e-300);
    let best = ind
        .modes
        .iter()
        .map(|m| {
            let ov: Complex64 = m.h0.iter().zip(h0).map(|(a, b)| a.conj() * b).sum();
            let score = ov.norm() / (hn * cvec_norm(&m.h0).max(1e-300)) - (m.lambda1 - lambda1).norm();
            (score, m.lambda2)
        })
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .ok_or_else(|| Error::Numerical("no induction modes".into()))?;
    Ok(best.1)
}

/// Energy-branch pairing `-i / (2 d c0 T^2) omega . q(h1)` for a given `h1`.
pub fn energy_pairing(grid: &GridSpec, omega: &[f64], h1: &[Complex64], c0: f64, t1: f64) -> Complex64 {
    let d = grid.d;
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, z) in h1.iter().enumerate() {
        let v = grid.node(k);
        let r2: f64 = (0..d).map(|c| v[c] * v[c]).sum();
        let vw: f64 = (0..d).map(|c| v[c] * omega[c]).sum();
        acc += z * vw * r2;
    }
    -I * acc * grid.cell_volume() / (2.0 * d as f64 * c0 * t1 * t1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_are_imaginary_pair() {
        let r = dispersion_roots(2, 0.7).unwrap();
        assert_eq!(r.z[1], Complex64::new(0.0, 0.0));
        assert_eq!(r.z[2], -r.z[0]);
        assert_eq!(r.z[2], r.z[0].conj());
        assert_eq!(r.z[2].re, 0.0);
    }

    #[test]
    fn transverse_relation_is_linear() {
        assert_eq!(transverse_limit(Complex64::new(0.0, 0.0), 0.4), Complex64::new(0.0, 0.0));
        assert_eq!(transverse_limit(Complex64::new(1.0, 0.0), 0.4), Complex64::new(0.4, 0.0));
    }

    #[test]
    fn determinant_vanishes_at_roots_in_thermal_units() {
        for d in [2, 3] {
            let r = dispersion_roots(d, 1.0).unwrap();
            for z in r.z {
                let g = gram_limit(z, d, 1.0, 1.7).unwrap();
                assert!(g.det.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn off_unit_temperature_is_reported() {
        let z = Complex64::new(0.3, 0.2);
        let err = gram_limit(z, 2, 0.5, 1.0).unwrap_err();
        assert!(matches!(err, Error::Consistency(_)));
        let g = gram_matrix(z, 2, 0.5, 1.0);
        assert!((det3(&g) - moment_cubic(z, 2, 0.5)).norm() < 1e-14);
    }
}
