//! CSV, JSON and binary writers. Text outputs open with a `#` header block
//! carrying the artifact version and the configuration hash.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linop::{Entries, LinearOperatorMatrix};
use crate::spectrum::Branch;
use crate::velocity_grid::{build_grid, Distribution};
use crate::VERSION;

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub version: String,
    pub config_hash: String,
}

impl Meta {
    pub fn new(config_hash: &str) -> Self {
        Self { version: VERSION.to_string(), config_hash: config_hash.to_string() }
    }

    fn header(&self) -> String {
        format!("# granspec {}\n# config_hash={}\n", self.version, self.config_hash)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_json(path: &Path, meta: &Meta, body: impl Serialize) -> Result<()> {
    let mut v = serde_json::to_value(body)?;
    if let Value::Object(map) = &mut v {
        map.insert("meta".into(), serde_json::to_value(meta)?);
    } else {
        v = json!({ "meta": meta, "data": v });
    }
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &v)?;
    writeln!(w)?;
    Ok(())
}

pub fn write_profile_csv(path: &Path, meta: &Meta, f: &Distribution) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(meta.header().as_bytes())?;
    let d = f.grid.d;
    let cols: Vec<String> = (1..=d).map(|i| format!("v{i}")).collect();
    writeln!(w, "{},value", cols.join(","))?;
    for (k, x) in f.values.iter().enumerate() {
        let v = f.grid.node(k);
        let coords: Vec<String> = v[..d].iter().map(|c| format!("{c:.17e}")).collect();
        writeln!(w, "{},{x:.17e}", coords.join(","))?;
    }
    Ok(())
}

/// `d: u32, N: u32, L: f64`, then row-major `f64` values, all little-endian.
pub fn write_profile_bin(path: &Path, f: &Distribution) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(&(f.grid.d as u32).to_le_bytes())?;
    w.write_all(&(f.grid.n as u32).to_le_bytes())?;
    w.write_all(&f.grid.l.to_le_bytes())?;
    for x in &f.values {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_profile_bin(path: &Path) -> Result<Distribution> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < 16 {
        return Err(Error::Numerical("profile file too short".into()));
    }
    let d = u32::from_le_bytes(buf[0..4].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize;
    let l = f64::from_le_bytes(buf[8..16].try_into().unwrap());
    let grid = build_grid(d, l, n)?;
    if buf.len() != 16 + 8 * grid.len() {
        return Err(Error::Numerical("profile file length does not match its header".into()));
    }
    let values = buf[16..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Distribution::from_values(&grid, values)
}

/// `rows: u32, cols: u32, kind: u32 (0 real, 1 complex)`, then row-major
/// `f64` values or interleaved `(re, im)` pairs, all little-endian.
pub fn write_matrix_bin(path: &Path, a: &LinearOperatorMatrix) -> Result<()> {
    let mut w = create(path)?;
    let n = a.dim() as u32;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    match &a.entries {
        Entries::Real(m) => {
            w.write_all(&0u32.to_le_bytes())?;
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    w.write_all(&m[(i, j)].to_le_bytes())?;
                }
            }
        }
        Entries::Complex(m) => {
            w.write_all(&1u32.to_le_bytes())?;
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    w.write_all(&m[(i, j)].re.to_le_bytes())?;
                    w.write_all(&m[(i, j)].im.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

pub fn write_branch_csv(path: &Path, meta: &Meta, branches: &[Branch]) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(meta.header().as_bytes())?;
    let d = branches.first().map(|b| b.omega.len()).unwrap_or(2);
    let om: Vec<String> = ["omega_x", "omega_y", "omega_z"][..d].iter().map(|s| s.to_string()).collect();
    writeln!(w, "j,{},rho,alpha,re_lambda,im_lambda,residual", om.join(","))?;
    for b in branches {
        let o: Vec<String> = b.omega.iter().map(|x| format!("{x}")).collect();
        for s in &b.samples {
            writeln!(
                w,
                "{},{},{},{},{:.17e},{:.17e},{:.3e}",
                b.label,
                o.join(","),
                s.rho,
                s.alpha,
                s.lambda.re,
                s.lambda.im,
                s.residual
            )?;
        }
    }
    Ok(())
}

/// Long-format plot data plus the conjugate-symmetry defect per `|rho|`.
pub fn write_plot_csv(path: &Path, meta: &Meta, branches: &[Branch]) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(meta.header().as_bytes())?;
    writeln!(w, "alpha,j,rho,re_lambda,im_lambda,re_lambda_neg,im_lambda_neg,symmetry_defect")?;
    for b in branches {
        for s in b.samples.iter().filter(|s| s.rho >= 0.0) {
            match b.at(-s.rho) {
                Some(m) => writeln!(
                    w,
                    "{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.3e}",
                    b.alpha,
                    b.label,
                    s.rho,
                    s.lambda.re,
                    s.lambda.im,
                    m.lambda.re,
                    m.lambda.im,
                    (m.lambda - s.lambda.conj()).norm()
                )?,
                None => writeln!(
                    w,
                    "{},{},{},{:.17e},{:.17e},,,",
                    b.alpha, b.label, s.rho, s.lambda.re, s.lambda.im
                )?,
            }
        }
    }
    Ok(())
}

pub fn write_table_csv(path: &Path, meta: &Meta, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(meta.header().as_bytes())?;
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        writeln!(w, "{}", r.join(","))?;
    }
    Ok(())
}
