//! The acceptance suite: twelve numbered checks on the discretized operator
//! at the configured scale.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::collision::dissipation;
use crate::dispersion::{
    c_nu, closed_form_cubic, dispersion_roots, energy_slope, gram_limit, lambda2_induction,
};
use crate::equilibrium::EquilibriumResult;
use crate::error::Result;
use crate::scenario::{run_sweep, Model, Sweep, ENERGY};
use crate::spectrum::spectrum_point;
use crate::velocity_grid::{maxwellian, quadrature, Distribution, ExpWeight};

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CriterionResult {
    fn new(id: u32, name: &str, passed: bool, measured: f64, threshold: f64, detail: String) -> Self {
        Self { id, name: name.into(), passed, measured, threshold, detail }
    }

    fn failed(id: u32, name: &str, why: String) -> Self {
        Self::new(id, name, false, f64::NAN, f64::NAN, why)
    }

    /// One table row.
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<28} measured={:<12.4e} threshold={:<10.3e} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.threshold,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub criteria: Vec<CriterionResult>,
    pub seconds: f64,
    #[serde(skip)]
    pub sweep: Option<Sweep>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Mixture of three Gaussians with seeded centers, temperatures and weights.
pub fn random_mixture(model: &Model, rng: &mut ChaCha8Rng) -> Result<Distribution> {
    let d = model.grid.d;
    let mut f = Distribution::zeros(&model.grid);
    for _ in 0..3 {
        let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let t = rng.gen_range(0.5..1.5);
        let m = rng.gen_range(0.2..1.0);
        f = f.axpy(1.0, &maxwellian(&model.grid, m, &u, t)?);
    }
    Ok(f)
}

pub fn conservation(model: &Model) -> CriterionResult {
    let name = "conservation";
    let run = || -> Result<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(model.cfg.seed);
        let g = model.grid;
        let mut worst: (f64, f64) = (0.0, 0.0);
        for &alpha in &[model.cfg.alpha, 0.9] {
            let op = model.operator(alpha)?;
            for _ in 0..3 {
                let f = random_mixture(model, &mut rng)?;
                let r = op.collision_apply(&f, &f)?;
                let abs_sum = Distribution::from_values(
                    &g,
                    r.gain.values.iter().zip(&r.loss.values).map(|(a, b)| a.abs() + b.abs()).collect(),
                )?;
                let speed = Distribution::from_fn(&g, |v| sq(v).sqrt());
                let mass = quadrature(&r.q).abs() / quadrature(&abs_sum);
                let mut mom: f64 = 0.0;
                for c in 0..g.d {
                    let vc = Distribution::from_fn(&g, |v| v[c]);
                    mom = mom.max(quadrature(&vc.mul(&r.q)).abs());
                }
                let mom = mom / quadrature(&speed.mul(&abs_sum));
                worst = (worst.0.max(mass), worst.1.max(mom));
            }
        }
        Ok(worst)
    };
    match run() {
        Ok((m, p)) => {
            let worst = m.max(p);
            CriterionResult::new(1, name, worst <= 1e-12, worst, 1e-12, format!("mass {m:.2e}, momentum {p:.2e} (relative)"))
        }
        Err(e) => CriterionResult::failed(1, name, e.to_string()),
    }
}

pub fn energy_identity(model: &Model) -> CriterionResult {
    let name = "energy identity";
    let run = || -> Result<(f64, f64)> {
        let g = model.grid;
        let f = maxwellian(&g, 1.0, &vec![0.0; g.d], 1.0)?;
        let r2 = Distribution::from_fn(&g, sq);
        let (mut grid_err, mut probe_err): (f64, f64) = (0.0, 0.0);
        for &alpha in &[0.9, 0.99] {
            let op = model.operator(alpha)?;
            let q = op.collision_apply(&f, &f)?.q;
            let target = (1.0 - alpha * alpha) * dissipation(&f, &f, op.b1)?;
            let grid_side = quadrature(&q.mul(&r2));
            let probe = op.weak_probe_fn(&f, &f, sq)?;
            grid_err = grid_err.max((grid_side + target).abs() / target);
            probe_err = probe_err.max((probe + target).abs() / target);
        }
        Ok((grid_err, probe_err))
    };
    match run() {
        Ok((a, b)) => {
            let worst = a.max(b);
            CriterionResult::new(2, name, worst <= 0.02, worst, 0.02, format!("grid {a:.2e}, weak probe {b:.2e}"))
        }
        Err(e) => CriterionResult::failed(2, name, e.to_string()),
    }
}

pub fn balance(model: &Model) -> (CriterionResult, Option<EquilibriumResult>) {
    let name = "balance equation";
    let alpha = 0.99;
    let start = Instant::now();
    match model.equilibrium(alpha) {
        Ok(eq) => {
            let secs = start.elapsed().as_secs_f64();
            let two_d = 2.0 * model.grid.d as f64;
            let rel = eq.balance_residual / two_d;
            let ok = rel <= 0.05 && eq.converged && secs <= 120.0;
            let detail = format!(
                "alpha={alpha}, converged={}, residual {:.2e}, {secs:.1}s",
                eq.converged, eq.residual
            );
            (CriterionResult::new(3, name, ok, rel, 0.05, detail), Some(eq))
        }
        Err(e) => (CriterionResult::failed(3, name, e.to_string()), None),
    }
}

pub fn temperature(model: &Model, sweep: Option<&Sweep>, eq99: Option<&EquilibriumResult>) -> CriterionResult {
    let name = "quasi-elastic temperature";
    let mut errs = Vec::new();
    for &alpha in &[0.95, 0.97, 0.99] {
        let from_sweep = sweep.and_then(|s| s.at(alpha)).map(|s| s.equilibrium.temperature);
        let from_eq = eq99.filter(|_| alpha == 0.99).and_then(|e| e.fields.temperature);
        let t = match from_sweep.or(from_eq) {
            Some(t) => t,
            None => match model.equilibrium(alpha) {
                Ok(e) => e.fields.temperature.unwrap_or(f64::NAN),
                Err(e) => return CriterionResult::failed(4, name, format!("alpha={alpha}: {e}")),
            },
        };
        errs.push((t - model.t1).abs() / model.t1);
    }
    let monotone = errs[0] > errs[1] && errs[1] > errs[2];
    let ok = monotone && errs[2] <= 0.10;
    let detail = format!(
        "errors {:.3e}, {:.3e}, {:.3e} at alpha 0.95, 0.97, 0.99: {}",
        errs[0],
        errs[1],
        errs[2],
        if monotone { "monotone" } else { "not monotone" }
    );
    CriterionResult::new(4, name, ok, errs[2], 0.10, detail)
}

pub fn kernel_dimension(model: &Model, sweep: &Sweep) -> CriterionResult {
    let name = "kernel dimension";
    let Some(s1) = sweep.at(1.0) else { return CriterionResult::failed(5, name, "alpha = 1 not in the sweep".into()) };
    let Some(a) = s1.operator.as_ref() else { return CriterionResult::failed(5, name, "no alpha = 1 operator".into()) };
    let start = Instant::now();
    let p = match spectrum_point(a, 0.0, model.cfg.extra_candidates) {
        Ok(p) => p,
        Err(e) => return CriterionResult::failed(5, name, e.to_string()),
    };
    let secs = start.elapsed().as_secs_f64();
    let lbar = p.summary.lambda_bar;
    let small = p.eigenvalues.iter().filter(|z| z.norm() <= lbar / 10.0).count();
    let rest_ok = p.eigenvalues[model.grid.d + 2..].iter().all(|z| z.re <= -lbar);
    let d2 = model.grid.d + 2;
    let ok = small == d2 && lbar > 0.0 && rest_ok && secs <= 60.0;
    let detail = format!("{small} eigenvalues within lambda_bar/10 (expected {d2}), lambda_bar={lbar:.4}, eigensolve {secs:.1}s");
    CriterionResult::new(5, name, ok, small as f64, d2 as f64, detail)
}

pub fn acoustic(model: &Model, sweep: &Sweep) -> CriterionResult {
    let name = "acoustic coefficient";
    let Some(s1) = sweep.at(1.0) else { return CriterionResult::failed(6, name, "alpha = 1 not in the sweep".into()) };
    let t = model.t1;
    let target = (t + 2.0 * t * t / model.grid.d as f64).sqrt();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for j in [-1, 1] {
        match s1.fit(j) {
            Some(f) => {
                let want = Complex64::new(0.0, j as f64 * target);
                let e = (f.lambda1 - want).norm() / target;
                worst = worst.max(e);
                parts.push(format!("j={j}: {:.5}i", f.lambda1.im));
            }
            None => return CriterionResult::failed(6, name, format!("no fit for branch {j}")),
        }
    }
    let acoustic_mod = s1.fit(1).map(|f| f.lambda1.norm()).unwrap_or(target);
    let mut shear: f64 = 0.0;
    for j in 2..=model.grid.d as i32 {
        match s1.fit(j) {
            Some(f) => shear = shear.max(f.lambda1.norm() / acoustic_mod),
            None => return CriterionResult::failed(6, name, format!("no fit for branch {j}")),
        }
    }
    let ok = worst <= 0.05 && shear <= 0.05;
    let detail = format!("{} vs +-{target:.5}i; shear/acoustic {shear:.2e}", parts.join(", "));
    CriterionResult::new(6, name, ok, worst, 0.05, detail)
}

pub fn energy_slope_check(model: &Model, sweep: &Sweep) -> CriterionResult {
    let name = "energy slope";
    let target = 3.0 / model.t1;
    let e1 = sweep.alphas.iter().filter_map(|s| s.fit(ENERGY)).find_map(|f| f.e1);
    let Some(e1) = e1 else { return CriterionResult::failed(7, name, "no inelastic energy samples".into()) };
    let fit_err = (e1 - target).abs() / target;
    let f1 = match maxwellian(&model.grid, 1.0, &vec![0.0; model.grid.d], model.t1) {
        Ok(f) => f,
        Err(e) => return CriterionResult::failed(7, name, e.to_string()),
    };
    let b1 = match model.operator(1.0) {
        Ok(op) => op.b1,
        Err(e) => return CriterionResult::failed(7, name, e.to_string()),
    };
    let slope = match ExpWeight::new(model.cfg.weight_a, model.cfg.weight_s).and_then(|w| energy_slope(&f1, model.t1, b1, &w)) {
        Ok(s) => s,
        Err(e) => return CriterionResult::failed(7, name, e.to_string()),
    };
    let ok = fit_err <= 0.10 && slope.relative_error <= 0.05;
    let detail = format!(
        "fitted e1={e1:.4}, 4D/E={:.4}, target {target:.4} (ratio error {:.2e})",
        slope.numeric, slope.relative_error
    );
    CriterionResult::new(7, name, ok, fit_err, 0.10, detail)
}

pub fn second_order(model: &Model, sweep: &Sweep) -> CriterionResult {
    let name = "second-order damping";
    let Some(s1) = sweep.at(1.0) else { return CriterionResult::failed(8, name, "alpha = 1 not in the sweep".into()) };
    let labels: Vec<i32> = (-1..=model.grid.d as i32).collect();
    let mut max_second = f64::NEG_INFINITY;
    for &j in &labels {
        match s1.fit(j) {
            Some(f) => max_second = max_second.max(f.second_derivative.re),
            None => return CriterionResult::failed(8, name, format!("no fit for branch {j}")),
        }
    }
    let (Some(fit), Some(br), Some(a)) = (s1.fit(ENERGY), s1.branch(ENERGY), s1.operator.as_ref()) else {
        return CriterionResult::failed(8, name, "energy branch unavailable".into());
    };
    let Some(h0) = br.at(0.0) else { return CriterionResult::failed(8, name, "energy branch lacks rho = 0".into()) };
    let ind = match lambda2_induction(&model.cfg.omega, a, &h0.vector, fit.lambda1) {
        Ok(l) => l,
        Err(e) => return CriterionResult::failed(8, name, e.to_string()),
    };
    let rel = (ind - fit.lambda2).norm() / fit.lambda2.norm();
    let ok = max_second < 0.0 && rel <= 0.10;
    let detail = format!(
        "max Re d2(lambda)/d(rho)2 = {max_second:.4}; energy lambda2 fd {:.5}, induction {:.5}",
        fit.lambda2.re, ind.re
    );
    CriterionResult::new(8, name, ok, rel, 0.10, detail)
}

pub fn symmetry(sweep: &Sweep) -> CriterionResult {
    let name = "symmetry and reality";
    let mut sym: f64 = 0.0;
    let mut real: f64 = 0.0;
    let mut pairs = 0usize;
    let mut scale: f64 = 0.0;
    for s in &sweep.alphas {
        if let Some(p) = s.zero_point() {
            scale = scale.max(p.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        for b in &s.branches {
            for x in b.samples.iter().filter(|x| x.rho > 0.0) {
                if let Some(m) = b.at(-x.rho) {
                    sym = sym.max((m.lambda - x.lambda.conj()).norm());
                    pairs += 1;
                }
            }
            if b.label == ENERGY {
                real = real.max(b.samples.iter().map(|x| x.lambda.im.abs()).fold(0.0, f64::max));
            }
        }
    }
    if pairs == 0 {
        return CriterionResult::failed(9, name, "no mirrored samples".into());
    }
    let worst = sym.max(real) / scale;
    let detail = format!("{pairs} pairs, conjugate defect {sym:.2e}, energy |Im| {real:.2e}, scale {scale:.3}");
    CriterionResult::new(9, name, worst <= 1e-9, worst, 1e-9, detail)
}

pub fn confinement(sweep: &Sweep) -> CriterionResult {
    let name = "left half-plane";
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for s in sweep.alphas.iter().filter(|s| s.alpha >= 0.97) {
        for p in &s.points {
            count += 1;
            worst = worst.max(p.summary.hydrodynamic.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max));
        }
    }
    if count == 0 {
        return CriterionResult::failed(10, name, "no sweep with alpha >= 0.97".into());
    }
    CriterionResult::new(10, name, worst <= 1e-6, worst, 1e-6, format!("max Re lambda over {count} spectra"))
}

pub fn gram_algebra(model: &Model) -> CriterionResult {
    let name = "Gram determinant";
    let run = || -> Result<(f64, f64)> {
        let g = model.grid;
        let t = model.t1;
        let f1 = maxwellian(&g, 1.0, &vec![0.0; g.d], t)?;
        let nu = model.operator(1.0)?.loss_potential(&f1)?;
        let c = c_nu(&f1, &nu)?;
        let mut rng = ChaCha8Rng::seed_from_u64(model.cfg.seed ^ 0x5eed);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let z = Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            worst = worst.max(gram_limit(z, g.d, t, c)?.relative_error);
        }
        let roots = dispersion_roots(g.d, t)?;
        let s = (t + 2.0 * t * t / g.d as f64).sqrt();
        let mut root_err: f64 = 0.0;
        for (z, want) in roots.z.iter().zip([-s, 0.0, s]) {
            root_err = root_err.max((z - Complex64::new(0.0, want)).norm());
            root_err = root_err.max(closed_form_cubic(*z, g.d, t).norm() / (1.0 + t.powi(4)));
        }
        Ok((worst, root_err))
    };
    match run() {
        Ok((w, r)) => CriterionResult::new(
            11,
            name,
            w <= 1e-12 && r <= 1e-14,
            w,
            1e-12,
            format!("100 random z, root defect {r:.2e}, T={:.15}", model.t1),
        ),
        Err(e) => CriterionResult::failed(11, name, e.to_string()),
    }
}

/// Runs every criterion. Failures are reported per criterion; only I/O-free
/// errors are possible here, so the report is always returned.
pub fn run_verification(model: &Model) -> VerifyReport {
    let start = Instant::now();
    let mut out = vec![conservation(model), energy_identity(model)];
    let (c3, eq99) = balance(model);
    out.push(c3);
    let sweep = run_sweep(model);
    if let Err(e) = &sweep {
        log::error!("spectral sweep failed: {e}");
    }
    let sw = sweep.as_ref().ok();
    out.push(temperature(model, sw, eq99.as_ref()));
    match sw {
        Some(s) => {
            out.push(kernel_dimension(model, s));
            out.push(acoustic(model, s));
            out.push(energy_slope_check(model, s));
            out.push(second_order(model, s));
            out.push(symmetry(s));
            out.push(confinement(s));
        }
        None => {
            let why = format!("sweep failed: {}", sweep.as_ref().err().map(|e| e.to_string()).unwrap_or_default());
            for (id, name) in [
                (5, "kernel dimension"),
                (6, "acoustic coefficient"),
                (7, "energy slope"),
                (8, "second-order damping"),
                (9, "symmetry and reality"),
                (10, "left half-plane"),
            ] {
                out.push(CriterionResult::failed(id, name, why.clone()));
            }
        }
    }
    out.push(gram_algebra(model));
    let secs = start.elapsed().as_secs_f64();
    out.push(CriterionResult::new(12, "end-to-end runtime", secs <= 900.0, secs, 900.0, "seconds".into()));
    VerifyReport { criteria: out, seconds: secs, sweep: sweep.ok() }
}
