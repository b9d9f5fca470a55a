use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::velocity_grid::{maxwellian, radial_moment, sphere_area, GridSpec};

/// Angular law `b(x)` for `x = cos` of the angle between relative velocity and impact direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AngularLaw {
    Constant(f64),
    /// `b(x) = c0 + c1 (1 + x)`
    Linear { c0: f64, c1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub law: AngularLaw,
}

impl CrossSection {
    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!("cross-section level must be positive, got {c}")));
        }
        Ok(Self { law: AngularLaw::Constant(c) })
    }

    pub fn linear(c0: f64, c1: f64) -> Result<Self> {
        if !(c0 > 0.0) || !(c1 >= 0.0) {
            return Err(Error::InvalidParameter(format!("linear cross-section needs c0 > 0, c1 >= 0, got {c0}, {c1}")));
        }
        Ok(Self { law: AngularLaw::Linear { c0, c1 } })
    }

    /// Constant kernel scaled so that the quasi-elastic temperature computed on
    /// `grid` equals one.
    pub fn thermal_unit(grid: &GridSpec) -> Result<Self> {
        let d = grid.d;
        let m = maxwellian(grid, 1.0, &vec![0.0; d], 1.0)?;
        let m3 = radial_moment(&m, 3.0);
        let b1 = d as f64 / (2f64.powf(1.5) * m3);
        Self::constant(b1 / sphere_area(d))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.law {
            AngularLaw::Constant(c) => c,
            AngularLaw::Linear { c0, c1 } => c0 + c1 * (1.0 + x),
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.eval(-1.0), self.eval(1.0))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let law = match self.law {
            AngularLaw::Constant(c) => AngularLaw::Constant(s * c),
            AngularLaw::Linear { c0, c1 } => AngularLaw::Linear { c0: s * c0, c1: s * c1 },
        };
        Self { law }
    }

    /// Sampled check of positivity, monotonicity, convexity and a Lipschitz bound.
    pub fn check_hypotheses(&self, samples: usize) -> bool {
        let xs: Vec<f64> = (0..=samples).map(|i| -1.0 + 2.0 * i as f64 / samples as f64).collect();
        let bs: Vec<f64> = xs.iter().map(|&x| self.eval(x)).collect();
        let (lo, hi) = self.bounds();
        let positive = lo > 0.0 && bs.iter().all(|&b| b >= lo - 1e-14 && b <= hi + 1e-14);
        let monotone = bs.windows(2).all(|w| w[1] >= w[0] - 1e-14);
        let convex = bs.windows(3).all(|w| w[0] + w[2] - 2.0 * w[1] >= -1e-12);
        let dx = 2.0 / samples as f64;
        let lip = bs.windows(2).map(|w| (w[1] - w[0]).abs() / dx).fold(0.0, f64::max);
        positive && monotone && convex && lip.is_finite()
    }
}

/// Nodes on the unit sphere with positive weights. The second half of the node
/// list is the antipodal image of the first half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereQuadrature {
    pub d: usize,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SphereQuadrature {
    pub fn default_for(d: usize) -> Result<Self> {
        match d {
            2 => Self::circle(16),
            3 => Self::sphere(32),
            _ => Err(Error::InvalidParameter(format!("no sphere quadrature for d={d}"))),
        }
    }

    pub fn new(d: usize, m: usize) -> Result<Self> {
        match d {
            2 => Self::circle(m),
            3 => Self::sphere(m),
            _ => Err(Error::InvalidParameter(format!("no sphere quadrature for d={d}"))),
        }
    }

    /// `m` equally spaced directions, `m` a positive multiple of 4.
    pub fn circle(m: usize) -> Result<Self> {
        if m < 4 || m % 4 != 0 {
            return Err(Error::InvalidParameter(format!("circle quadrature needs a multiple of 4 points, got {m}")));
        }
        let nodes = (0..m)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                [th.cos(), th.sin(), 0.0]
            })
            .collect();
        Ok(Self { d: 2, nodes, weights: vec![2.0 * std::f64::consts::PI / m as f64; m] })
    }

    /// Icosahedron (12), dodecahedron (20) or their union (32), equal weights.
    pub fn sphere(m: usize) -> Result<Self> {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let ico = || {
            let mut p = Vec::new();
            for s1 in [-1.0, 1.0] {
                for s2 in [-1.0, 1.0] {
                    p.push([0.0, s1, s2 * phi]);
                    p.push([s1, s2 * phi, 0.0]);
                    p.push([s1 * phi, 0.0, s2]);
                }
            }
            p
        };
        let dodeca = || {
            let mut p = Vec::new();
            for s1 in [-1.0, 1.0] {
                for s2 in [-1.0, 1.0] {
                    for s3 in [-1.0, 1.0] {
                        p.push([s1, s2, s3]);
                    }
                    p.push([0.0, s1 / phi, s2 * phi]);
                    p.push([s1 / phi, s2 * phi, 0.0]);
                    p.push([s1 * phi, 0.0, s2 / phi]);
                }
            }
            p
        };
        let raw = match m {
            12 => ico(),
            20 => dodeca(),
            32 => {
                let mut p = ico();
                p.extend(dodeca());
                p
            }
            _ => return Err(Error::InvalidParameter(format!("sphere quadrature supports 12, 20 or 32 points, got {m}"))),
        };
        let mut half: Vec<[f64; 3]> = raw
            .into_iter()
            .map(|p| {
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                [p[0] / r, p[1] / r, p[2] / r]
            })
            .filter(|p| {
                let lead = p.iter().copied().find(|c| c.abs() > 1e-12).unwrap_or(0.0);
                lead > 0.0
            })
            .collect();
        half.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut nodes = half.clone();
        nodes.extend(half.iter().map(|p| [-p[0], -p[1], -p[2]]));
        let w = 4.0 * std::f64::consts::PI / nodes.len() as f64;
        Ok(Self { d: 3, weights: vec![w; nodes.len()], nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn half(&self) -> usize {
        self.nodes.len() / 2
    }

    /// `sum_m w_m phi(u . omega_m)`
    pub fn integrate(&self, u: &[f64; 3], phi: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(w, &wt)| wt * phi(u[0] * w[0] + u[1] * w[1] + u[2] * w[2]))
            .sum()
    }
}

pub fn angular_momentum_b1(b: &CrossSection, quad: &SphereQuadrature, u_hat: &[f64; 3]) -> f64 {
    quad.integrate(u_hat, |x| (1.0 - x) * b.eval(x))
}

pub fn reference_direction(d: usize) -> [f64; 3] {
    let _ = d;
    [1.0, 0.0, 0.0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_is_symmetric_and_exact_for_linear() {
        let q = SphereQuadrature::circle(16).unwrap();
        let s: f64 = q.weights.iter().sum();
        assert!((s - 2.0 * std::f64::consts::PI).abs() < 1e-13);
        for m in 0..q.half() {
            for c in 0..3 {
                assert!((q.nodes[m][c] + q.nodes[m + q.half()][c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sphere_design_moments() {
        for m in [12, 20, 32] {
            let q = SphereQuadrature::sphere(m).unwrap();
            assert_eq!(q.len(), m);
            for i in 0..q.half() {
                for c in 0..3 {
                    assert_eq!(q.nodes[i][c], -q.nodes[i + q.half()][c]);
                }
            }
            let u = [0.3, -0.5, 0.81];
            let r = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2] as f64).sqrt();
            let u = [u[0] / r, u[1] / r, u[2] / r];
            let p2 = q.integrate(&u, |x| x * x);
            let p4 = q.integrate(&u, |x| x.powi(4));
            assert!((p2 - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
            assert!((p4 - 4.0 * std::f64::consts::PI / 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn thermal_unit_level_is_positive() {
        let g = crate::velocity_grid::build_grid(2, 8.0, 32).unwrap();
        let b = CrossSection::thermal_unit(&g).unwrap();
        let (lo, hi) = b.bounds();
        assert!(lo > 0.0 && lo == hi);
        assert!(b.check_hypotheses(64));
        assert!(CrossSection::linear(1.0, 0.5).unwrap().check_hypotheses(64));
    }
}
