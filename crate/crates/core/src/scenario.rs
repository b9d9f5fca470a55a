//! Orchestration shared by the CLI and the verification suite: equilibria,
//! spectral sweeps over `(alpha, rho)`, branch tracking and expansion fits.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::collision::{CollisionOperator, CrossSection, SphereQuadrature};
use crate::config::{Mirror, RunConfig};
use crate::equilibrium::{elastic_temperature, solve_equilibrium, EquilibriumOptions, EquilibriumResult};
use crate::error::{Error, Result};
use crate::linop::{assemble_fourier, assemble_linearized, LinearOperatorMatrix};
use crate::spectrum::{fit_expansion, spectrum_point, track_branches, Branch, ExpansionFit, SpectrumPoint};
use crate::velocity_grid::GridSpec;

/// Energy branch label.
pub const ENERGY: i32 = 0;

pub struct Model {
    pub cfg: RunConfig,
    pub grid: GridSpec,
    pub b: CrossSection,
    pub quad: SphereQuadrature,
    /// Quasi-elastic temperature on this grid.
    pub t1: f64,
}

impl Model {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let cfg = cfg.validate()?;
        let grid = cfg.grid()?;
        let b = cfg.cross_section(&grid)?;
        let quad = SphereQuadrature::new(cfg.d, cfg.quad_points)?;
        let t1 = elastic_temperature(&grid, &b, &quad)?;
        Ok(Self { cfg, grid, b, quad, t1 })
    }

    pub fn operator(&self, alpha: f64) -> Result<CollisionOperator> {
        let mut op = CollisionOperator::new(&self.grid, self.b, self.quad.clone(), alpha)?;
        op.leak_warn = self.cfg.leak_warn;
        Ok(op)
    }

    pub fn options(&self) -> EquilibriumOptions {
        EquilibriumOptions { method: self.cfg.method, dt: self.cfg.dt, tol: self.cfg.tol, max_iter: self.cfg.max_iter }
    }

    pub fn equilibrium(&self, alpha: f64) -> Result<EquilibriumResult> {
        solve_equilibrium(&self.operator(alpha)?, &self.options())
    }

    /// Linearized operator at `rho = 0` around the equilibrium for `alpha`.
    pub fn linearized(&self, alpha: f64) -> Result<(EquilibriumResult, LinearOperatorMatrix)> {
        let op = self.operator(alpha)?;
        let eq = solve_equilibrium(&op, &self.options())?;
        if !eq.converged {
            return Err(Error::NonConvergence { iterations: eq.iterations, residual: eq.residual });
        }
        let a = assemble_linearized(&op, &eq.profile)?;
        Ok((eq, a))
    }

    /// Frequencies sampled at `alpha`, zero included.
    pub fn frequencies(&self, alpha: f64) -> Vec<f64> {
        let pos = self.cfg.rho_list();
        let mut out = pos.clone();
        let mirror_all = self.cfg.mirror == Mirror::All || alpha == 1.0;
        for &r in pos.iter().filter(|&&r| r > 0.0) {
            if mirror_all || r <= 2.0 * self.cfg.rho0() * (1.0 + 1e-12) {
                out.push(-r);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumSummary {
    pub alpha: f64,
    pub temperature: f64,
    pub balance_residual: f64,
    pub residual: f64,
    pub iterations: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaSweep {
    pub alpha: f64,
    pub equilibrium: EquilibriumSummary,
    #[serde(skip)]
    pub points: Vec<SpectrumPoint>,
    pub branches: Vec<Branch>,
    pub fits: Vec<ExpansionFit>,
    /// Failures of individual fits, by label.
    pub fit_failures: Vec<(i32, String)>,
    #[serde(skip)]
    pub operator: Option<LinearOperatorMatrix>,
}

impl AlphaSweep {
    pub fn branch(&self, label: i32) -> Option<&Branch> {
        self.branches.iter().find(|b| b.label == label)
    }

    pub fn zero_point(&self) -> Option<&SpectrumPoint> {
        self.points.iter().find(|p| p.rho == 0.0)
    }

    /// Smallest real part of the hydrodynamic set at `rho = 0`.
    pub fn energy_rate(&self) -> Option<f64> {
        self.zero_point().map(|p| p.summary.hydrodynamic.iter().map(|z| z.re).fold(f64::INFINITY, f64::min))
    }

    pub fn fit(&self, label: i32) -> Option<&ExpansionFit> {
        self.fits.iter().find(|f| f.label == label)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Sweep {
    pub t1: f64,
    pub omega: Vec<f64>,
    pub rho0: f64,
    pub alphas: Vec<AlphaSweep>,
    pub seconds: f64,
}

impl Sweep {
    pub fn at(&self, alpha: f64) -> Option<&AlphaSweep> {
        self.alphas.iter().find(|s| s.alpha == alpha)
    }

    /// `(alpha, Re lambda(0))` for every `alpha < 1`. At zero frequency the
    /// energy eigenvalue is the most damped hydrodynamic one; the others are
    /// conserved.
    pub fn energy_samples(&self) -> Vec<(f64, f64)> {
        self.alphas
            .iter()
            .filter(|s| s.alpha < 1.0)
            .filter_map(|s| s.energy_rate().map(|e| (s.alpha, e)))
            .collect()
    }
}

/// Spectral sweep at one `alpha`: equilibrium, assembly, one dense
/// eigensolve per frequency, then tracking and fits.
pub fn sweep_alpha(model: &Model, alpha: f64, keep_operator: bool) -> Result<AlphaSweep> {
    let cfg = &model.cfg;
    let start = Instant::now();
    let (eq, a) = model.linearized(alpha)?;
    let equilibrium = EquilibriumSummary {
        alpha,
        temperature: eq.fields.temperature.unwrap_or(f64::NAN),
        balance_residual: eq.balance_residual,
        residual: eq.residual,
        iterations: eq.iterations,
        seconds: start.elapsed().as_secs_f64(),
    };
    let rhos = model.frequencies(alpha);
    let points: Vec<SpectrumPoint> = rhos
        .par_iter()
        .map(|&rho| {
            let gamma: Vec<f64> = cfg.omega.iter().map(|w| rho * w).collect();
            let m = assemble_fourier(&a, &gamma)?;
            spectrum_point(&m, rho, cfg.extra_candidates)
        })
        .collect::<Result<_>>()?;
    log::info!("alpha={alpha}: {} eigensolves in {:.1}s", points.len(), start.elapsed().as_secs_f64());
    let branches = track_branches(&model.grid, &cfg.omega, &points)?;
    for b in branches.iter().filter(|b| b.failure.is_some()) {
        log::warn!("alpha={alpha}, branch {}: {}", b.label, b.failure.as_deref().unwrap_or(""));
    }
    let mut fits = Vec::new();
    let mut fit_failures = Vec::new();
    for b in &branches {
        match fit_expansion(b, cfg.rho0(), &[]) {
            Ok(f) => fits.push(f),
            Err(e) => fit_failures.push((b.label, e.to_string())),
        }
    }
    Ok(AlphaSweep {
        alpha,
        equilibrium,
        points,
        branches,
        fits,
        fit_failures,
        operator: keep_operator.then_some(a),
    })
}

/// Full sweep over the configured `alphas`. The `rho = 0` operator is kept
/// for `alpha = 1`. The inelasticity slope is attached to the energy fit of
/// every `alpha`.
pub fn run_sweep(model: &Model) -> Result<Sweep> {
    let start = Instant::now();
    let mut alphas = Vec::new();
    for &alpha in &model.cfg.alphas {
        alphas.push(sweep_alpha(model, alpha, alpha == 1.0)?);
    }
    let mut sweep = Sweep { t1: model.t1, omega: model.cfg.omega.clone(), rho0: model.cfg.rho0(), alphas, seconds: 0.0 };
    let samples = sweep.energy_samples();
    if !samples.is_empty() {
        for s in sweep.alphas.iter_mut() {
            if let Some(b) = s.branches.iter().find(|b| b.label == ENERGY) {
                if let Ok(f) = fit_expansion(b, model.cfg.rho0(), &samples) {
                    if let Some(slot) = s.fits.iter_mut().find(|x| x.label == ENERGY) {
                        *slot = f;
                    }
                }
            }
        }
    }
    sweep.seconds = start.elapsed().as_secs_f64();
    Ok(sweep)
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusteringRow {
    pub alpha: f64,
    /// `min_rho |max Re lambda|` over the hydrodynamic set.
    pub min_distance: f64,
    /// Largest hydrodynamic real part over the sweep.
    pub max_re: f64,
    /// Smallest sampled `rho > 0` from which every hydrodynamic eigenvalue
    /// has `Re lambda < -tol` for all larger samples.
    pub damped_from: Option<f64>,
    /// Whether `-Re lambda` at fixed branch grows with `rho` over the sweep.
    pub damping_grows: bool,
    /// Energy eigenvalue at `rho = 0`.
    pub energy_rate: f64,
}

pub fn clustering_scan(sweep: &Sweep, tol: f64) -> Vec<ClusteringRow> {
    sweep
        .alphas
        .iter()
        .map(|s| {
            let mut pos: Vec<&SpectrumPoint> = s.points.iter().filter(|p| p.rho >= 0.0).collect();
            pos.sort_by(|a, b| a.rho.partial_cmp(&b.rho).unwrap());
            let top = |p: &SpectrumPoint| p.summary.hydrodynamic.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            let min_distance = pos.iter().map(|p| top(p).abs()).fold(f64::INFINITY, f64::min);
            let max_re = s.points.iter().map(|p| top(p)).fold(f64::NEG_INFINITY, f64::max);
            let mut damped_from = None;
            for p in pos.iter().rev() {
                if p.rho > 0.0 && top(p) < -tol {
                    damped_from = Some(p.rho);
                } else {
                    break;
                }
            }
            let damping_grows = s.branches.iter().all(|b| {
                let re: Vec<f64> = b.samples.iter().filter(|x| x.rho > 0.0).map(|x| x.lambda.re).collect();
                re.windows(2).all(|w| w[1] <= w[0] + tol)
            });
            let energy_rate = s.energy_rate().unwrap_or(f64::NAN);
            ClusteringRow { alpha: s.alpha, min_distance, max_re, damped_from, damping_grows, energy_rate }
        })
        .collect()
}
