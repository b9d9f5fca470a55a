//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::collision::{CrossSection, SphereQuadrature};
use crate::equilibrium::Method;
use crate::error::{Error, Result};
use crate::velocity_grid::{build_grid, sphere_area, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CrossSectionChoice {
    /// Constant kernel scaled so the quasi-elastic temperature is one.
    Thermal,
    Constant(f64),
    Linear(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mirror {
    /// Negative frequencies at every sample and every alpha.
    All,
    /// Negative frequencies at every sample for `alpha = 1`, only `-rho0, -2 rho0` otherwise.
    Fit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub d: usize,
    pub n: usize,
    pub l: Option<f64>,
    pub alpha: f64,
    pub alphas: Vec<f64>,
    pub omega: Vec<f64>,
    pub rho_max: f64,
    pub rho_steps: usize,
    pub mirror: Mirror,
    pub cross_section: CrossSectionChoice,
    pub quad_points: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub method: Method,
    pub dt: Option<f64>,
    pub leak_warn: f64,
    pub weight_a: f64,
    pub weight_s: f64,
    pub extra_candidates: usize,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            d: 2,
            n: 32,
            l: None,
            alpha: 0.99,
            alphas: vec![1.0, 0.99, 0.97, 0.95],
            omega: vec![1.0, 0.0],
            rho_max: 0.3,
            rho_steps: 16,
            mirror: Mirror::All,
            cross_section: CrossSectionChoice::Thermal,
            quad_points: 16,
            tol: 1e-6,
            max_iter: 200_000,
            method: Method::Newton,
            dt: None,
            leak_warn: 1e-8,
            weight_a: 0.1,
            weight_s: 0.5,
            extra_candidates: 4,
            out: PathBuf::from("out"),
            seed: 20240611,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| Error::Config(format!("{key}: cannot parse '{v}' as a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse::<usize>().map_err(|_| Error::Config(format!("{key}: cannot parse '{v}' as an integer")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_f64(key, s)).collect()
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Applies one `KEY=VALUE` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("override '{kv}' is not KEY=VALUE")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "d" => self.d = parse_usize(key, v)?,
            "n" | "N" => self.n = parse_usize(key, v)?,
            "l" | "L" => self.l = if v == "auto" { None } else { Some(parse_f64(key, v)?) },
            "alpha" => self.alpha = parse_f64(key, v)?,
            "alphas" => self.alphas = parse_list(key, v)?,
            "omega" => self.omega = parse_list(key, v)?,
            "rho_max" => self.rho_max = parse_f64(key, v)?,
            "rho_steps" => self.rho_steps = parse_usize(key, v)?,
            "mirror" => {
                self.mirror = match v {
                    "all" => Mirror::All,
                    "fit" => Mirror::Fit,
                    _ => return Err(Error::Config(format!("mirror: expected all or fit, got '{v}'"))),
                }
            }
            "cross_section" => self.cross_section = parse_cross_section(v)?,
            "quad_points" => self.quad_points = parse_usize(key, v)?,
            "tol" => self.tol = parse_f64(key, v)?,
            "max_iter" => self.max_iter = parse_usize(key, v)?,
            "method" => {
                self.method = match v {
                    "newton" => Method::Newton,
                    "relaxation" => Method::Relaxation,
                    _ => return Err(Error::Config(format!("method: expected newton or relaxation, got '{v}'"))),
                }
            }
            "dt" => self.dt = if v == "auto" { None } else { Some(parse_f64(key, v)?) },
            "leak_warn" => self.leak_warn = parse_f64(key, v)?,
            "weight_a" => self.weight_a = parse_f64(key, v)?,
            "weight_s" => self.weight_s = parse_f64(key, v)?,
            "extra_candidates" => self.extra_candidates = parse_usize(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "seed" => self.seed = v.parse().map_err(|_| Error::Config(format!("seed: cannot parse '{v}'")))?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Checks ranges and normalizes `omega`.
    pub fn validate(mut self) -> Result<Self> {
        if self.d != 2 && self.d != 3 {
            return Err(Error::Config(format!("d must be 2 or 3, got {}", self.d)));
        }
        if self.n < 8 || self.n % 2 != 0 {
            return Err(Error::Config(format!("n must be even and >= 8, got {}", self.n)));
        }
        let in_range = |a: f64| a > 0.0 && a <= 1.0;
        if !in_range(self.alpha) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if self.alphas.is_empty() || !self.alphas.iter().all(|&a| in_range(a)) {
            return Err(Error::Config("alphas must be a nonempty list in (0, 1]".into()));
        }
        if self.omega.len() != self.d {
            return Err(Error::Config(format!("omega must have {} components", self.d)));
        }
        let nrm = self.omega.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(Error::Config("omega must be a nonzero vector".into()));
        }
        self.omega.iter_mut().for_each(|x| *x /= nrm);
        if !(self.rho_max > 0.0) || self.rho_steps < 2 {
            return Err(Error::Config("rho range must be nonempty with at least 2 steps".into()));
        }
        if let Some(l) = self.l {
            if !(l > 0.0) {
                return Err(Error::Config(format!("L must be positive, got {l}")));
            }
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config("tol must be positive and max_iter nonzero".into()));
        }
        if !(self.weight_a > 0.0) || !(self.weight_s > 0.0 && self.weight_s < 1.0) {
            return Err(Error::Config("weight needs a > 0 and 0 < s < 1".into()));
        }
        if self.d == 3 && self.quad_points == 16 {
            self.quad_points = 32;
        }
        SphereQuadrature::new(self.d, self.quad_points).map_err(|e| Error::Config(e.to_string()))?;
        Ok(self)
    }

    pub fn rho0(&self) -> f64 {
        self.rho_max / self.rho_steps as f64
    }

    pub fn rho_list(&self) -> Vec<f64> {
        (0..=self.rho_steps).map(|i| i as f64 * self.rho0()).collect()
    }

    /// Half-extent: explicit value, or `8 max(1, sqrt(T1))` with the
    /// quasi-elastic temperature from the closed-form Gaussian third moment.
    pub fn half_extent(&self) -> f64 {
        if let Some(l) = self.l {
            return l;
        }
        let t1 = match self.cross_section {
            CrossSectionChoice::Thermal => 1.0,
            CrossSectionChoice::Constant(c) => analytic_temperature(self.d, c * sphere_area(self.d)),
            CrossSectionChoice::Linear(c0, c1) => analytic_temperature(self.d, (c0 + c1) * sphere_area(self.d)),
        };
        8.0 * t1.sqrt().max(1.0)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        build_grid(self.d, self.half_extent(), self.n)
    }

    pub fn cross_section(&self, grid: &GridSpec) -> Result<CrossSection> {
        match self.cross_section {
            CrossSectionChoice::Thermal => CrossSection::thermal_unit(grid),
            CrossSectionChoice::Constant(c) => CrossSection::constant(c),
            CrossSectionChoice::Linear(c0, c1) => CrossSection::linear(c0, c1),
        }
    }

    pub fn canonical(&self) -> String {
        let mut m = BTreeMap::new();
        m.insert("d", self.d.to_string());
        m.insert("n", self.n.to_string());
        m.insert("l", format!("{:?}", self.half_extent()));
        m.insert("alpha", format!("{:?}", self.alpha));
        m.insert("alphas", format!("{:?}", self.alphas));
        m.insert("omega", format!("{:?}", self.omega));
        m.insert("rho_max", format!("{:?}", self.rho_max));
        m.insert("rho_steps", self.rho_steps.to_string());
        m.insert("mirror", format!("{:?}", self.mirror));
        m.insert("cross_section", format!("{:?}", self.cross_section));
        m.insert("quad_points", self.quad_points.to_string());
        m.insert("tol", format!("{:?}", self.tol));
        m.insert("max_iter", self.max_iter.to_string());
        m.insert("method", format!("{:?}", self.method));
        m.insert("dt", format!("{:?}", self.dt));
        m.insert("weight", format!("{:?},{:?}", self.weight_a, self.weight_s));
        m.insert("extra_candidates", self.extra_candidates.to_string());
        m.insert("seed", self.seed.to_string());
        m.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn analytic_temperature(d: usize, b1: f64) -> f64 {
    let m3 = match d {
        2 => 3.0 * (std::f64::consts::PI / 2.0).sqrt(),
        _ => 8.0 * (2.0 / std::f64::consts::PI).sqrt(),
    };
    0.5 * (d as f64 / (b1 * m3)).powf(2.0 / 3.0)
}

fn parse_cross_section(v: &str) -> Result<CrossSectionChoice> {
    let parts: Vec<&str> = v.split(':').collect();
    let bad = || Error::Config(format!("cross_section: expected thermal, constant:C or linear:C0:C1, got '{v}'"));
    match parts.as_slice() {
        ["thermal"] => Ok(CrossSectionChoice::Thermal),
        ["constant", c] => Ok(CrossSectionChoice::Constant(parse_f64("cross_section", c)?)),
        ["linear", a, b] => Ok(CrossSectionChoice::Linear(parse_f64("cross_section", a)?, parse_f64("cross_section", b)?)),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nd = 2\nalphas = 1.0, 0.98\nomega = 3, 4\ncross_section = constant:1\n").unwrap();
        c.apply_override("n=16").unwrap();
        let c = c.validate().unwrap();
        assert_eq!(c.n, 16);
        assert_eq!(c.alphas, vec![1.0, 0.98]);
        assert!((c.omega[0] - 0.6).abs() < 1e-15);
        assert_eq!(c.cross_section, CrossSectionChoice::Constant(1.0));
    }

    #[test]
    fn rejects_invalid_values() {
        let mut c = RunConfig::default();
        c.apply_override("alpha=1.2").unwrap();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        assert!(c.apply_override("bogus=1").is_err());
        assert!(c.apply_text("no equals sign").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_eq!(a.half_extent(), 8.0);
    }
}
