//! Deterministic quadrature of the inelastic collision operator.
//!
//! Every unordered node pair and every impact direction forms a collision
//! event. Its weight is deposited at both post-collisional velocities and
//! removed from both pre-collisional nodes. An event whose post-collisional
//! velocities cannot be deposited on the grid is dropped from gain and loss
//! alike and counted as leakage, so mass and momentum balance exactly and
//! energy balances exactly at `alpha = 1`.
//!
//! The effective kernel is `kappa * b`, where `kappa` makes the discrete
//! energy loss of the weak form equal `(1 - alpha^2) D(f, f)` with the
//! angular momentum `b1` of `b`.

mod deposit;
mod kernel;

pub use deposit::{axis_stencil, AxisStencil, Stencil};
pub use kernel::{angular_momentum_b1, reference_direction, AngularLaw, CrossSection, SphereQuadrature};

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::velocity_grid::{Distribution, GridSpec};

const CHUNKS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionParams {
    pub alpha: f64,
}

impl CollisionParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("restitution coefficient must lie in (0, 1], got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn epsilon(&self) -> f64 {
        1.0 - self.alpha
    }
}

pub fn post_collisional(v: &[f64], vs: &[f64], omega: &[f64], alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let uw: f64 = v.iter().zip(vs).zip(omega).map(|((a, b), w)| (a - b) * w).sum();
    let c = 0.5 * (1.0 + alpha) * uw;
    let vp = v.iter().zip(omega).map(|(a, w)| a - c * w).collect();
    let vsp = vs.iter().zip(omega).map(|(a, w)| a + c * w).collect();
    (vp, vsp)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Leakage {
    /// Mass of dropped events.
    pub mass: f64,
    /// Dropped mass relative to the total event mass.
    pub relative: f64,
}

#[derive(Debug, Clone)]
pub struct CollisionResult {
    pub q: Distribution,
    pub gain: Distribution,
    pub loss: Distribution,
    pub leakage: Leakage,
}

static LEAK_WARNED: std::sync::atomic::AtomicBool = std::sync::atomic::AtomicBool::new(false);

#[derive(Debug, Clone)]
pub struct CollisionOperator {
    pub grid: GridSpec,
    pub b: CrossSection,
    pub quad: SphereQuadrature,
    pub alpha: f64,
    pub b1: f64,
    pub kappa: f64,
    pub loss_norm: f64,
    pub leak_warn: f64,
    nodes: Vec<[f64; 3]>,
}

impl CollisionOperator {
    pub fn new(grid: &GridSpec, b: CrossSection, quad: SphereQuadrature, alpha: f64) -> Result<Self> {
        CollisionParams::new(alpha)?;
        if quad.d != grid.d {
            return Err(Error::InvalidParameter("sphere quadrature dimension differs from grid".into()));
        }
        let (lo, _) = b.bounds();
        if !(lo > 0.0) {
            return Err(Error::InvalidParameter("cross-section must be bounded below by a positive constant".into()));
        }
        let u0 = reference_direction(grid.d);
        let b1 = angular_momentum_b1(&b, &quad, &u0);
        let second = 0.25 * quad.integrate(&u0, |x| x * x * b.eval(x));
        let kappa = b1 / second;
        let loss_norm = kappa * quad.integrate(&u0, |x| b.eval(x));
        Ok(Self { grid: *grid, b, quad, alpha, b1, kappa, loss_norm, leak_warn: 1e-8, nodes: grid.nodes() })
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        CollisionParams::new(alpha)?;
        let mut out = self.clone();
        out.alpha = alpha;
        Ok(out)
    }

    pub fn epsilon(&self) -> f64 {
        1.0 - self.alpha
    }

    /// Visits every impact direction of the pair `(k, j)` with the event rate
    /// `|u| sum of kernel over the antipodal pair` and the two stencils.
    #[inline]
    fn visit_pair(&self, k: usize, j: usize, mut f: impl FnMut(f64, Option<(Stencil, Stencil)>)) {
        let vk = &self.nodes[k];
        let vj = &self.nodes[j];
        let u = [vk[0] - vj[0], vk[1] - vj[1], vk[2] - vj[2]];
        let r = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        if r == 0.0 {
            return;
        }
        let c = 0.5 * (1.0 + self.alpha);
        let half = self.quad.half();
        for m in 0..half {
            let w = &self.quad.nodes[m];
            let uw = u[0] * w[0] + u[1] * w[1] + u[2] * w[2];
            let x = uw / r;
            let rate = r
                * self.kappa
                * (self.quad.weights[m] * self.b.eval(x) + self.quad.weights[m + half] * self.b.eval(-x));
            let s = c * uw;
            let vp = [vk[0] - s * w[0], vk[1] - s * w[1], vk[2] - s * w[2]];
            let vsp = [vj[0] + s * w[0], vj[1] + s * w[1], vj[2] + s * w[2]];
            let st = match (Stencil::at(&self.grid, &vp), Stencil::at(&self.grid, &vsp)) {
                (Some(a), Some(b)) => Some((a, b)),
                _ => None,
            };
            f(rate, st);
        }
    }

    fn check(&self, f: &Distribution) -> Result<()> {
        if f.grid.compatible(&self.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Gain, matched loss and leakage for the symmetric bilinear form.
    pub fn collision_apply(&self, f: &Distribution, g: &Distribution) -> Result<CollisionResult> {
        self.check(f)?;
        self.check(g)?;
        let n = self.grid.len();
        let np = self.grid.n;
        let hd = self.grid.cell_volume();
        let chunks = CHUNKS.min(n);
        let parts: Vec<(Vec<f64>, Vec<f64>, f64, f64)> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut gain = vec![0.0; n];
                let mut loss = vec![0.0; n];
                let (mut leaked, mut total) = (0.0, 0.0);
                let mut k = c;
                while k < n {
                    for j in (k + 1)..n {
                        let a = 0.5 * (f.values[j] * g.values[k] + f.values[k] * g.values[j]) * hd;
                        if a == 0.0 {
                            continue;
                        }
                        self.visit_pair(k, j, |rate, st| {
                            let amt = a * rate;
                            total += 2.0 * amt.abs();
                            match st {
                                Some((s1, s2)) => {
                                    s1.deposit(np, amt, &mut gain);
                                    s2.deposit(np, amt, &mut gain);
                                    loss[k] += amt;
                                    loss[j] += amt;
                                }
                                None => leaked += 2.0 * amt.abs(),
                            }
                        });
                    }
                    k += chunks;
                }
                (gain, loss, leaked, total)
            })
            .collect();
        let mut gain = vec![0.0; n];
        let mut loss = vec![0.0; n];
        let (mut leaked, mut total) = (0.0, 0.0);
        for (pg, pl, lk, tt) in &parts {
            for i in 0..n {
                gain[i] += pg[i];
                loss[i] += pl[i];
            }
            leaked += lk;
            total += tt;
        }
        let leakage = Leakage {
            mass: leaked * hd,
            relative: if total > 0.0 { leaked / total } else { 0.0 },
        };
        if leakage.relative > self.leak_warn {
            if LEAK_WARNED.swap(true, std::sync::atomic::Ordering::Relaxed) {
                log::debug!("collision leakage {:.3e} exceeds threshold {:.1e}", leakage.relative, self.leak_warn);
            } else {
                log::warn!(
                    "collision leakage {:.3e} exceeds threshold {:.1e} (repeats logged at debug level)",
                    leakage.relative,
                    self.leak_warn
                );
            }
        }
        let q: Vec<f64> = gain.iter().zip(&loss).map(|(a, b)| a - b).collect();
        Ok(CollisionResult {
            q: Distribution { grid: self.grid, values: q },
            gain: Distribution { grid: self.grid, values: gain },
            loss: Distribution { grid: self.grid, values: loss },
            leakage,
        })
    }

    pub fn gain_apply(&self, f: &Distribution, g: &Distribution) -> Result<(Distribution, Leakage)> {
        let r = self.collision_apply(f, g)?;
        Ok((r.gain, r.leakage))
    }

    /// `L(g)(v) = |B| * int |v - w| g(w) dw`
    pub fn loss_potential(&self, g: &Distribution) -> Result<Distribution> {
        self.check(g)?;
        let hd = self.grid.cell_volume();
        let nodes = &self.nodes;
        let values = (0..self.grid.len())
            .into_par_iter()
            .map(|k| {
                let vk = nodes[k];
                let s: f64 = nodes
                    .iter()
                    .zip(&g.values)
                    .map(|(vj, gj)| {
                        let r2 = (vk[0] - vj[0]).powi(2) + (vk[1] - vj[1]).powi(2) + (vk[2] - vj[2]).powi(2);
                        r2.sqrt() * gj
                    })
                    .sum();
                self.loss_norm * hd * s
            })
            .collect();
        Ok(Distribution { grid: self.grid, values })
    }

    /// Weak form evaluated with the transposed stencil on grid values of `psi`.
    pub fn weak_probe(&self, f: &Distribution, g: &Distribution, psi: &Distribution) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        self.check(psi)?;
        let np = self.grid.n;
        let hd = self.grid.cell_volume();
        Ok(self.pair_sum(f, g, |k, j, a| {
            let mut acc = 0.0;
            self.visit_pair(k, j, |rate, st| {
                if let Some((s1, s2)) = st {
                    acc += rate
                        * (s1.gather(np, &psi.values) + s2.gather(np, &psi.values) - psi.values[k] - psi.values[j]);
                }
            });
            a * acc * hd * hd
        }))
    }

    /// Weak form with `psi` evaluated exactly at the post-collisional velocities,
    /// summed over every event with no grid deposition involved.
    pub fn weak_probe_fn(&self, f: &Distribution, g: &Distribution, psi: impl Fn(&[f64]) -> f64 + Sync) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        let d = self.grid.d;
        let hd = self.grid.cell_volume();
        let c = 0.5 * (1.0 + self.alpha);
        let half = self.quad.half();
        Ok(self.pair_sum(f, g, |k, j, a| {
            let vk = &self.nodes[k];
            let vj = &self.nodes[j];
            let u = [vk[0] - vj[0], vk[1] - vj[1], vk[2] - vj[2]];
            let r = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
            if r == 0.0 {
                return 0.0;
            }
            let base = psi(&vk[..d]) + psi(&vj[..d]);
            let mut acc = 0.0;
            for m in 0..half {
                let w = &self.quad.nodes[m];
                let uw = u[0] * w[0] + u[1] * w[1] + u[2] * w[2];
                let x = uw / r;
                let rate = r
                    * self.kappa
                    * (self.quad.weights[m] * self.b.eval(x) + self.quad.weights[m + half] * self.b.eval(-x));
                let s = c * uw;
                let vp = [vk[0] - s * w[0], vk[1] - s * w[1], vk[2] - s * w[2]];
                let vsp = [vj[0] + s * w[0], vj[1] + s * w[1], vj[2] + s * w[2]];
                acc += rate * (psi(&vp[..d]) + psi(&vsp[..d]) - base);
            }
            a * acc * hd * hd
        }))
    }

    /// Deterministic chunked sum over unordered pairs of `term(k, j, a)`, with
    /// `a = (f_j g_k + f_k g_j) / 2`.
    fn pair_sum(&self, f: &Distribution, g: &Distribution, term: impl Fn(usize, usize, f64) -> f64 + Sync) -> f64 {
        let n = self.grid.len();
        let chunks = CHUNKS.min(n);
        let parts: Vec<f64> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = 0.0;
                let mut k = c;
                while k < n {
                    for j in (k + 1)..n {
                        let a = 0.5 * (f.values[j] * g.values[k] + f.values[k] * g.values[j]);
                        if a != 0.0 {
                            acc += term(k, j, a);
                        }
                    }
                    k += chunks;
                }
                acc
            })
            .collect();
        parts.iter().sum()
    }

    /// Dense matrix of `g -> Q(F, g) + Q(g, F)`.
    pub fn linearized_matrix(&self, big_f: &Distribution) -> Result<Mat<f64>> {
        self.check(big_f)?;
        let n = self.grid.len();
        let np = self.grid.n;
        let hd = self.grid.cell_volume();
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let mut col = vec![0.0; n];
                for j in 0..n {
                    if j == k {
                        continue;
                    }
                    let a = big_f.values[j] * hd;
                    if a == 0.0 {
                        continue;
                    }
                    self.visit_pair(k, j, |rate, st| {
                        if let Some((s1, s2)) = st {
                            let amt = a * rate;
                            s1.deposit(np, amt, &mut col);
                            s2.deposit(np, amt, &mut col);
                            col[k] -= amt;
                            col[j] -= amt;
                        }
                    });
                }
                col
            })
            .collect();
        Ok(Mat::from_fn(n, n, |i, j| cols[j][i]))
    }
}

/// `D(f, g) = b1 * int int f(v) g(w) |v - w|^3`
pub fn dissipation(f: &Distribution, g: &Distribution, b1: f64) -> Result<f64> {
    f.check_same_grid(g)?;
    let grid = f.grid;
    let nodes = grid.nodes();
    let hd = grid.cell_volume();
    let n = grid.len();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            if f.values[k] == 0.0 {
                return 0.0;
            }
            let vk = nodes[k];
            let s: f64 = nodes
                .iter()
                .zip(&g.values)
                .map(|(vj, gj)| {
                    let r2 = (vk[0] - vj[0]).powi(2) + (vk[1] - vj[1]).powi(2) + (vk[2] - vj[2]).powi(2);
                    r2 * r2.sqrt() * gj
                })
                .sum();
            f.values[k] * s
        })
        .collect();
    Ok(b1 * hd * hd * rows.iter().sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::velocity_grid::{build_grid, maxwellian, quadrature};

    fn small() -> CollisionOperator {
        let g = build_grid(2, 6.0, 16).unwrap();
        CollisionOperator::new(&g, CrossSection::constant(1.0).unwrap(), SphereQuadrature::circle(8).unwrap(), 0.8)
            .unwrap()
    }

    #[test]
    fn post_collisional_identities() {
        let (v, vs, w) = ([0.3, -1.2], [1.1, 0.4], [0.6, 0.8]);
        let (a, b) = post_collisional(&v, &vs, &w, 0.7);
        for c in 0..2 {
            assert!((a[c] + b[c] - v[c] - vs[c]).abs() < 1e-15);
        }
        let e0: f64 = v.iter().chain(&vs).map(|x| x * x).sum();
        let e1: f64 = a.iter().chain(&b).map(|x| x * x).sum();
        let uw: f64 = (0..2).map(|c| (v[c] - vs[c]) * w[c]).sum();
        assert!((e1 - e0 + 0.5 * (1.0 - 0.49) * uw * uw).abs() < 1e-14);
        let (a, b) = post_collisional(&v, &vs, &[0.8, -0.6], 1.0);
        let u: Vec<f64> = (0..2).map(|c| v[c] - vs[c]).collect();
        let n = (u[0] * u[0] + u[1] * u[1]).sqrt();
        let (a2, b2) = post_collisional(&v, &vs, &[u[0] / n, u[1] / n], 1.0);
        for c in 0..2 {
            assert!((a2[c] - vs[c]).abs() < 1e-14 && (b2[c] - v[c]).abs() < 1e-14);
        }
        let _ = (a, b);
    }

    #[test]
    fn grazing_elastic_collision_is_identity() {
        let (a, b) = post_collisional(&[1.0, 0.0], &[0.0, 0.0], &[0.0, 1.0], 1.0);
        assert_eq!(a, vec![1.0, 0.0]);
        assert_eq!(b, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_inputs_give_zero() {
        let op = small();
        let m = maxwellian(&op.grid, 1.0, &[0.0, 0.0], 1.0).unwrap();
        let z = Distribution::zeros(&op.grid);
        assert!(op.collision_apply(&z, &m).unwrap().q.max_abs() == 0.0);
        assert!(op.collision_apply(&m, &z).unwrap().q.max_abs() == 0.0);
        assert!(op.loss_potential(&z).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn point_mass_loss_potential_is_distance() {
        let op = small();
        let j = 37;
        let p = Distribution::indicator(&op.grid, j);
        let l = op.loss_potential(&p).unwrap();
        let vj = op.grid.node(j);
        let scale = op.loss_norm * op.grid.cell_volume();
        for k in 0..op.grid.len() {
            let vk = op.grid.node(k);
            let r = ((vk[0] - vj[0]).powi(2) + (vk[1] - vj[1]).powi(2)).sqrt();
            assert!((l.values[k] - scale * r).abs() < 1e-12);
        }
    }

    #[test]
    fn conservation_on_shifted_gaussian() {
        let op = small();
        let f = maxwellian(&op.grid, 1.0, &[0.4, -0.2], 0.8).unwrap();
        let r = op.collision_apply(&f, &f).unwrap();
        let scale = r.gain.l1_norm() + r.loss.l1_norm();
        assert!(quadrature(&r.q).abs() < 1e-14 * scale);
        let p = Distribution::from_fn(&op.grid, |v| v[0]).mul(&r.q);
        assert!(quadrature(&p).abs() < 1e-13 * scale);
    }

    #[test]
    fn dissipation_of_point_mass_vanishes() {
        let g = build_grid(2, 2.0, 8).unwrap();
        let p = Distribution::indicator(&g, 10);
        assert_eq!(dissipation(&p, &p, 1.0).unwrap(), 0.0);
        let two = p.axpy(1.0, &Distribution::indicator(&g, 20));
        assert!(dissipation(&two, &two, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(CollisionParams::new(0.0).is_err());
        assert!(CollisionParams::new(1.2).is_err());
        assert!(CollisionParams::new(1.0).is_ok());
    }
}
