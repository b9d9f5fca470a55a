use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use granspec::config::RunConfig;
use granspec::dispersion::{acoustic_speed, c_nu, dispersion_roots, energy_slope, gram_limit, Induction};
use granspec::export::{
    write_branch_csv, write_json, write_matrix_bin, write_plot_csv, write_profile_bin, write_profile_csv,
    write_table_csv, Meta,
};
use granspec::scenario::{clustering_scan, run_sweep, Model, Sweep, ENERGY};
use granspec::velocity_grid::{maxwellian, ExpWeight};
use granspec::verify::run_verification;
use granspec::Error;

#[derive(Parser)]
#[command(name = "granspec", version, about = "Hydrodynamic spectrum of the linearized inelastic Boltzmann operator")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the stationary profile at `alpha`.
    Equilibrium,
    /// Sweep the hydrodynamic branches over `alphas` and `rho`.
    Spectrum {
        /// Also write the `alpha = 1`, `rho = 0` operator matrix.
        #[arg(long)]
        matrix: bool,
    },
    /// Analytic dispersion report and its consistency checks.
    Dispersion,
    /// Run the acceptance suite.
    Verify,
    /// Damping table per `alpha` over the frequency sweep.
    ClusteringScan,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidGrid(_) => Failure::Usage(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<ExitCode, Failure>;

fn load_config(cli: &Cli) -> std::result::Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for kv in &cli.set {
        cfg.apply_override(kv)?;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    Ok(cfg.validate()?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    let outcome = load_config(&cli).and_then(|cfg| {
        let model = Model::new(cfg)?;
        let meta = Meta::new(&model.cfg.hash());
        match &cli.command {
            Command::Equilibrium => cmd_equilibrium(&model, &meta),
            Command::Spectrum { matrix } => cmd_spectrum(&model, &meta, *matrix),
            Command::Dispersion => cmd_dispersion(&model, &meta),
            Command::Verify => cmd_verify(&model, &meta),
            Command::ClusteringScan => cmd_clustering(&model, &meta),
        }
    });
    match outcome {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}

fn out_path(model: &Model, name: &str) -> PathBuf {
    model.cfg.out.join(name)
}

fn io(e: Error) -> Failure {
    Failure::Numerical(format!("writing output: {e}"))
}

fn binary_sidecar(path: &Path, meta: &Meta, layout: &str) -> std::result::Result<(), Failure> {
    let side = path.with_extension("bin.json");
    write_json(&side, meta, json!({ "file": path.file_name().map(|s| s.to_string_lossy()), "layout": layout })).map_err(io)
}

fn cmd_equilibrium(model: &Model, meta: &Meta) -> Outcome {
    let alpha = model.cfg.alpha;
    let start = Instant::now();
    let eq = model.equilibrium(alpha)?;
    let secs = start.elapsed().as_secs_f64();
    let t = eq.fields.temperature.unwrap_or(f64::NAN);
    let two_d = 2.0 * model.grid.d as f64;
    write_profile_csv(&out_path(model, "profile.csv"), meta, &eq.profile).map_err(io)?;
    let bin = out_path(model, "profile.bin");
    write_profile_bin(&bin, &eq.profile).map_err(io)?;
    binary_sidecar(&bin, meta, "u32 d, u32 N, f64 L, then N^d f64 values row-major, little-endian")?;
    write_json(
        &out_path(model, "equilibrium.json"),
        meta,
        json!({
            "alpha": alpha,
            "converged": eq.converged,
            "iterations": eq.iterations,
            "residual": eq.residual,
            "balance_residual": eq.balance_residual,
            "balance_relative": eq.balance_residual / two_d,
            "temperature": t,
            "quasi_elastic_temperature": eq.elastic_temperature,
            "temperature_relative_error": (t - eq.elastic_temperature).abs() / eq.elastic_temperature,
            "mass": eq.fields.mass,
            "momentum": eq.fields.momentum,
            "clipped_mass": eq.clipped_mass,
            "negative_mass": eq.negative_mass,
            "history": eq.history,
            "seconds": secs,
        }),
    )
    .map_err(io)?;
    println!(
        "alpha={alpha}: T={t:.6} (quasi-elastic {:.6}), balance residual {:.3e}, residual {:.3e}, {} iterations",
        eq.elastic_temperature, eq.balance_residual, eq.residual, eq.iterations
    );
    if !eq.converged {
        return Err(Failure::Numerical(format!("no convergence: residual {:.3e}", eq.residual)));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct FitRecord {
    alpha: f64,
    j: i32,
    lambda1: [f64; 2],
    lambda1_target: [f64; 2],
    lambda1_relative_error: f64,
    lambda2: [f64; 2],
    lambda2_induction: Option<[f64; 2]>,
    lambda2_relative_error: Option<f64>,
    second_derivative_re: f64,
    e1: Option<f64>,
    e1_target: Option<f64>,
    e1_relative_error: Option<f64>,
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn fit_records(model: &Model, sweep: &Sweep) -> Vec<FitRecord> {
    let t = model.t1;
    let s = (t + 2.0 * t * t / model.grid.d as f64).sqrt();
    let induction = sweep
        .at(1.0)
        .and_then(|s1| s1.operator.as_ref())
        .and_then(|a| Induction::new(a, &model.cfg.omega).map_err(|e| log::warn!("induction failed: {e}")).ok());
    let mut out = Vec::new();
    for a in &sweep.alphas {
        for f in &a.fits {
            let target = if f.label.abs() == 1 { Complex64::new(0.0, f.label as f64 * s) } else { Complex64::new(0.0, 0.0) };
            let scale = if f.label.abs() == 1 { s } else { s.max(f.lambda1.norm()) };
            let ind = induction.as_ref().filter(|_| a.alpha == 1.0).and_then(|i| i.mode(f.label)).map(|m| m.lambda2);
            let e1_target = (f.label == ENERGY).then_some(3.0 / t);
            out.push(FitRecord {
                alpha: a.alpha,
                j: f.label,
                lambda1: pair(f.lambda1),
                lambda1_target: pair(target),
                lambda1_relative_error: (f.lambda1 - target).norm() / scale,
                lambda2: pair(f.lambda2),
                lambda2_induction: ind.map(pair),
                lambda2_relative_error: ind.map(|z| (z - f.lambda2).norm() / f.lambda2.norm()),
                second_derivative_re: f.second_derivative.re,
                e1: f.e1,
                e1_target,
                e1_relative_error: f.e1.zip(e1_target).map(|(e, t)| (e - t).abs() / t),
            });
        }
    }
    out
}

fn write_sweep(model: &Model, meta: &Meta, sweep: &Sweep) -> std::result::Result<(), Failure> {
    let branches: Vec<_> = sweep.alphas.iter().flat_map(|a| a.branches.iter().cloned()).collect();
    write_branch_csv(&out_path(model, "branches.csv"), meta, &branches).map_err(io)?;
    write_plot_csv(&out_path(model, "plot.csv"), meta, &branches).map_err(io)?;
    let failures: Vec<_> = sweep
        .alphas
        .iter()
        .flat_map(|a| {
            let tracking = a
                .branches
                .iter()
                .filter_map(move |b| b.failure.as_ref().map(|f| json!({"alpha": a.alpha, "j": b.label, "failure": f})));
            let fits = a.fit_failures.iter().map(move |(j, f)| json!({"alpha": a.alpha, "j": j, "failure": f}));
            tracking.chain(fits).collect::<Vec<_>>()
        })
        .collect();
    write_json(
        &out_path(model, "fits.json"),
        meta,
        json!({
            "quasi_elastic_temperature": model.t1,
            "omega": sweep.omega,
            "rho0": sweep.rho0,
            "acoustic_target": (model.t1 + 2.0 * model.t1 * model.t1 / model.grid.d as f64).sqrt(),
            "acoustic_moment_speed": acoustic_speed(model.grid.d, model.t1),
            "energy_samples": sweep.energy_samples(),
            "fits": fit_records(model, sweep),
            "equilibria": sweep.alphas.iter().map(|a| &a.equilibrium).collect::<Vec<_>>(),
            "failures": failures,
            "seconds": sweep.seconds,
        }),
    )
    .map_err(io)
}

fn cmd_spectrum(model: &Model, meta: &Meta, matrix: bool) -> Outcome {
    let sweep = run_sweep(model)?;
    write_sweep(model, meta, &sweep)?;
    if matrix {
        if let Some(a) = sweep.at(1.0).and_then(|s| s.operator.as_ref()) {
            let p = out_path(model, "operator_alpha1.bin");
            write_matrix_bin(&p, a).map_err(io)?;
            binary_sidecar(&p, meta, "u32 rows, u32 cols, u32 kind (0 real, 1 complex), then row-major f64 or (re, im) pairs, little-endian")?;
        } else {
            log::warn!("alpha = 1 is not in the sweep; no matrix written");
        }
    }
    for a in &sweep.alphas {
        for f in &a.fits {
            println!(
                "alpha={:<5} j={:>2} lambda1={:+.5}i lambda2={:.5}{}",
                a.alpha,
                f.label,
                f.lambda1.im,
                f.lambda2.re,
                f.e1.map(|e| format!(" e1={e:.4}")).unwrap_or_default()
            );
        }
    }
    let failed = sweep.alphas.iter().any(|a| a.branches.iter().any(|b| b.failure.is_some()) || !a.fit_failures.is_empty());
    if failed {
        return Err(Failure::Numerical("continuation failure; see fits.json".into()));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_dispersion(model: &Model, meta: &Meta) -> Outcome {
    use rand::{Rng, SeedableRng};
    let d = model.grid.d;
    let t = model.t1;
    let roots = dispersion_roots(d, t)?;
    let f1 = maxwellian(&model.grid, 1.0, &vec![0.0; d], t)?;
    let op = model.operator(1.0)?;
    let slope = energy_slope(&f1, t, op.b1, &ExpWeight::new(model.cfg.weight_a, model.cfg.weight_s)?)?;
    let c = c_nu(&f1, &op.loss_potential(&f1)?)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(model.cfg.seed ^ 0x5eed);
    let mut worst: f64 = 0.0;
    let mut consistency = Ok(());
    for _ in 0..100 {
        let z = Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        match gram_limit(z, d, t, c) {
            Ok(g) => worst = worst.max(g.relative_error),
            Err(e) => {
                consistency = Err(e);
                break;
            }
        }
    }
    write_json(
        &out_path(model, "dispersion.json"),
        meta,
        json!({
            "quasi_elastic_temperature": t,
            "roots": roots.z.iter().map(|z| pair(*z)).collect::<Vec<_>>(),
            "acoustic_speed_closed_form": (t + 2.0 * t * t / d as f64).sqrt(),
            "acoustic_speed_moments": acoustic_speed(d, t),
            "e1_analytic": 3.0 / t,
            "energy_slope": slope,
            "c_nu": c,
            "det_vs_cubic_max_relative_error": worst,
            "consistency": consistency.as_ref().err().map(|e| e.to_string()),
        }),
    )
    .map_err(io)?;
    println!("roots: {:?}", roots.z.iter().map(|z| z.im).collect::<Vec<_>>());
    println!("e1: analytic {:.6}, 4D/E {:.6}", slope.analytic, slope.numeric);
    println!("det vs cubic: max relative error {worst:.3e}");
    consistency?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(model: &Model, meta: &Meta) -> Outcome {
    let report = run_verification(model);
    for c in &report.criteria {
        println!("{}", c.line());
    }
    if let Some(s) = &report.sweep {
        write_sweep(model, meta, s)?;
    }
    write_json(&out_path(model, "verify.json"), meta, &report).map_err(io)?;
    let passed = report.criteria.iter().filter(|c| c.passed).count();
    println!("{passed}/{} criteria passed in {:.1}s", report.criteria.len(), report.seconds);
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_clustering(model: &Model, meta: &Meta) -> Outcome {
    let sweep = run_sweep(model)?;
    let tol = 1e-6;
    let rows = clustering_scan(&sweep, tol);
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.alpha.to_string(),
                format!("{:.6e}", r.min_distance),
                format!("{:.6e}", r.max_re),
                r.damped_from.map(|x| x.to_string()).unwrap_or_default(),
                r.damping_grows.to_string(),
                format!("{:.6e}", r.energy_rate),
            ]
        })
        .collect();
    write_table_csv(
        &out_path(model, "clustering.csv"),
        meta,
        &["alpha", "min_distance", "max_re", "damped_from_rho", "damping_grows", "energy_rate"],
        &table,
    )
    .map_err(io)?;
    write_json(&out_path(model, "clustering.json"), meta, json!({ "tolerance": tol, "rows": rows })).map_err(io)?;
    println!("alpha   max Re lambda   damped from rho   energy rate");
    for r in &rows {
        println!(
            "{:<7} {:<15.3e} {:<17} {:.4e}",
            r.alpha,
            r.max_re,
            r.damped_from.map(|x| format!("{x:.5}")).unwrap_or_else(|| "-".into()),
            r.energy_rate
        );
    }
    Ok(ExitCode::SUCCESS)
}
