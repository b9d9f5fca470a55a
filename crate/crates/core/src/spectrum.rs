//! Dense eigensolves, hydrodynamic selection, branch continuation and fits.

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{Entries, LinearOperatorMatrix};
use crate::velocity_grid::GridSpec;

const MIN_OVERLAP: f64 = 0.7;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: Complex64,
    pub vector: Vec<Complex64>,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub hydrodynamic: Vec<Complex64>,
    /// Distance from zero to the rest of the spectrum, `-max Re` over non-hydrodynamic eigenvalues.
    pub lambda_bar: f64,
    /// Largest real part among non-hydrodynamic eigenvalues.
    pub mu_bar: f64,
    /// `min Re(hydrodynamic) - mu_bar`
    pub separation: f64,
    pub separated: bool,
}

/// All eigenvalues at one `(rho, alpha)` point plus the leading eigenpairs.
#[derive(Debug, Clone)]
pub struct SpectrumPoint {
    pub rho: f64,
    pub alpha: f64,
    pub eigenvalues: Vec<Complex64>,
    pub leading: Vec<EigenPair>,
    pub summary: SpectrumSummary,
    pub max_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchSample {
    pub rho: f64,
    pub alpha: f64,
    pub lambda: Complex64,
    pub residual: f64,
    pub overlap: f64,
    #[serde(skip)]
    pub vector: Vec<Complex64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub label: i32,
    pub omega: Vec<f64>,
    pub alpha: f64,
    pub samples: Vec<BranchSample>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResiduals {
    /// Change of the first difference between `rho0` and `2 rho0`.
    pub lambda1: f64,
    /// Change of the second difference between `rho0` and `2 rho0`.
    pub lambda2: f64,
    /// Root-mean-square misfit of the inelasticity slope.
    pub e1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub label: i32,
    pub lambda0: Complex64,
    pub lambda1: Complex64,
    /// Coefficient of `-rho^2`.
    pub lambda2: Complex64,
    pub second_derivative: Complex64,
    pub e1: Option<f64>,
    pub residuals: FitResiduals,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EssentialReport {
    pub c: f64,
    pub nu0: f64,
    pub ratio: f64,
    pub uniform: bool,
    pub tracks_nu0: bool,
    pub entered_window: bool,
}

fn norm_l2(grid: &GridSpec, x: &[Complex64]) -> f64 {
    (grid.cell_volume() * x.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
}

/// Hermitian quadrature inner product.
pub fn inner(grid: &GridSpec, x: &[Complex64], y: &[Complex64]) -> Complex64 {
    let s: Complex64 = x.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
    s * grid.cell_volume()
}

fn normalize(grid: &GridSpec, x: &mut [Complex64]) {
    let nrm = norm_l2(grid, x);
    let (imax, _) = x
        .iter()
        .enumerate()
        .fold((0, -1.0), |(bi, bm), (i, z)| if z.norm() > bm { (i, z.norm()) } else { (bi, bm) });
    let phase = x[imax].conj() / x[imax].norm();
    for z in x.iter_mut() {
        *z = *z * phase / nrm;
    }
}

fn by_real_part_desc(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    b.re.partial_cmp(&a.re).unwrap_or(std::cmp::Ordering::Equal).then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
}

fn decompose(a: &LinearOperatorMatrix) -> Result<(Vec<Complex64>, Mat<Complex64>)> {
    let (u, s) = match &a.entries {
        Entries::Real(m) => {
            let e = m.eigen().map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
            (e.U().to_owned(), e.S().column_vector().to_owned())
        }
        Entries::Complex(m) => {
            let e = m.eigen().map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
            (e.U().to_owned(), e.S().column_vector().to_owned())
        }
    };
    let vals: Vec<Complex64> = (0..s.nrows()).map(|i| s[i]).collect();
    if vals.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical(format!(
            "eigensolver returned non-finite values (matrix Frobenius norm {:.3e})",
            a.frobenius_norm()
        )));
    }
    Ok((vals, u))
}

fn residual(a: &LinearOperatorMatrix, lambda: Complex64, x: &[Complex64]) -> f64 {
    let ax = a.apply(x);
    let r: f64 = ax.iter().zip(x).map(|(y, z)| (y - lambda * z).norm_sqr()).sum();
    let nx: f64 = x.iter().map(|z| z.norm_sqr()).sum();
    (r / nx).sqrt()
}

fn pairs_from(a: &LinearOperatorMatrix, vals: &[Complex64], u: &Mat<Complex64>, idx: &[usize]) -> Result<Vec<EigenPair>> {
    let n = a.dim();
    let mut out = Vec::with_capacity(idx.len());
    for &i in idx {
        let mut x: Vec<Complex64> = (0..n).map(|r| u[(r, i)]).collect();
        normalize(&a.grid, &mut x);
        let res = residual(a, vals[i], &x);
        if !(res <= 1e-8) {
            return Err(Error::Numerical(format!(
                "eigenpair residual {res:.3e} above 1e-8 at lambda = {:.6e}{:+.6e}i",
                vals[i].re, vals[i].im
            )));
        }
        out.push(EigenPair { lambda: vals[i], vector: x, residual: res });
    }
    Ok(out)
}

fn order(vals: &[Complex64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&i, &j| by_real_part_desc(&vals[i], &vals[j]));
    idx
}

/// Every eigenpair, sorted by decreasing real part.
pub fn full_spectrum(a: &LinearOperatorMatrix) -> Result<Vec<EigenPair>> {
    let (vals, u) = decompose(a)?;
    pairs_from(a, &vals, &u, &order(&vals))
}

/// All eigenvalues and the `k` eigenpairs of largest real part.
pub fn leading_spectrum(a: &LinearOperatorMatrix, k: usize) -> Result<(Vec<Complex64>, Vec<EigenPair>)> {
    let (vals, u) = decompose(a)?;
    let idx = order(&vals);
    let pairs = pairs_from(a, &vals, &u, &idx[..k.min(idx.len())])?;
    Ok((idx.iter().map(|&i| vals[i]).collect(), pairs))
}

/// Selects the `d + 2` eigenvalues of largest real part.
pub fn hydrodynamic_set(eigenvalues: &[Complex64], d: usize) -> SpectrumSummary {
    let mut v = eigenvalues.to_vec();
    v.sort_by(by_real_part_desc);
    let hydro: Vec<Complex64> = v[..d + 2].to_vec();
    let mu_bar = v.get(d + 2).map(|z| z.re).unwrap_or(f64::NEG_INFINITY);
    let lambda_bar = -mu_bar;
    let min_hydro = hydro.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let separation = min_hydro - mu_bar;
    SpectrumSummary { hydrodynamic: hydro, lambda_bar, mu_bar, separation, separated: separation >= 0.5 * lambda_bar }
}

pub fn spectrum_point(a: &LinearOperatorMatrix, rho: f64, extra: usize) -> Result<SpectrumPoint> {
    let d = a.grid.d;
    let (eigenvalues, leading) = leading_spectrum(a, d + 2 + extra)?;
    let summary = hydrodynamic_set(&eigenvalues, d);
    if !summary.separated {
        log::info!("weak hydrodynamic separation {:.3e} at rho={rho}, alpha={}", summary.separation, a.alpha);
    }
    let max_residual = leading.iter().map(|p| p.residual).fold(0.0, f64::max);
    Ok(SpectrumPoint { rho, alpha: a.alpha, eigenvalues, leading, summary, max_residual })
}

/// Orthonormal directions transverse to `omega`.
pub fn transverse_basis(omega: &[f64]) -> Vec<Vec<f64>> {
    match omega.len() {
        2 => vec![vec![-omega[1], omega[0]]],
        _ => {
            let pick = if omega[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let dot: f64 = (0..3).map(|c| pick[c] * omega[c]).sum();
            let mut e1: Vec<f64> = (0..3).map(|c| pick[c] - dot * omega[c]).collect();
            let n1 = e1.iter().map(|x| x * x).sum::<f64>().sqrt();
            e1.iter_mut().for_each(|x| *x /= n1);
            let e2 = vec![
                omega[1] * e1[2] - omega[2] * e1[1],
                omega[2] * e1[0] - omega[0] * e1[2],
                omega[0] * e1[1] - omega[1] * e1[0],
            ];
            vec![e1, e2]
        }
    }
}

/// Transverse-momentum content of each transverse direction, relative to the
/// total low-order moment content of `x`.
fn transverse_scores(grid: &GridSpec, omega: &[f64], x: &[Complex64]) -> Vec<f64> {
    let d = grid.d;
    let basis = transverse_basis(omega);
    let mut m0 = Complex64::new(0.0, 0.0);
    let mut m1 = Complex64::new(0.0, 0.0);
    let mut m2 = Complex64::new(0.0, 0.0);
    let mut mt = vec![Complex64::new(0.0, 0.0); basis.len()];
    for (k, z) in x.iter().enumerate() {
        let v = grid.node(k);
        let vw: f64 = (0..d).map(|c| v[c] * omega[c]).sum();
        let r2: f64 = (0..d).map(|c| v[c] * v[c]).sum();
        m0 += z;
        m1 += z * vw;
        m2 += z * r2;
        for (b, e) in basis.iter().enumerate() {
            mt[b] += z * (0..d).map(|c| v[c] * e[c]).sum::<f64>();
        }
    }
    let total = m0.norm() + m1.norm() + m2.norm() + mt.iter().map(|z| z.norm()).sum::<f64>();
    mt.iter().map(|z| z.norm() / total.max(f64::MIN_POSITIVE)).collect()
}

/// Labels the `d + 2` hydrodynamic pairs at a nonzero frequency: the two of
/// largest `|Im|` are acoustic (`sign(Im lambda * rho)`), the `d - 1` with the
/// most transverse momentum are shear (`2..=d`) and the last is the energy branch.
pub fn label_hydrodynamic(grid: &GridSpec, omega: &[f64], rho: f64, pairs: &[EigenPair]) -> Vec<i32> {
    let d = grid.d;
    let mut labels = vec![i32::MIN; pairs.len()];
    let mut by_im: Vec<usize> = (0..pairs.len()).collect();
    by_im.sort_by(|&a, &b| pairs[b].lambda.im.abs().partial_cmp(&pairs[a].lambda.im.abs()).unwrap());
    let mut acoustic = [by_im[0], by_im[1]];
    acoustic.sort_by(|&a, &b| (pairs[a].lambda.im * rho).partial_cmp(&(pairs[b].lambda.im * rho)).unwrap());
    labels[acoustic[0]] = -1;
    labels[acoustic[1]] = 1;
    let rest: Vec<usize> = by_im[2..].to_vec();
    let scores: Vec<Vec<f64>> = rest.iter().map(|&i| transverse_scores(grid, omega, &pairs[i].vector)).collect();
    let mut taken = vec![false; rest.len()];
    for axis in 0..(d - 1) {
        let best = (0..rest.len())
            .filter(|&r| !taken[r])
            .max_by(|&a, &b| scores[a][axis].partial_cmp(&scores[b][axis]).unwrap())
            .unwrap();
        taken[best] = true;
        labels[rest[best]] = 2 + axis as i32;
    }
    for (r, &i) in rest.iter().enumerate() {
        if !taken[r] {
            labels[i] = 0;
        }
    }
    labels
}

/// Injective assignment of branches to candidates maximizing total overlap,
/// ties broken by the smaller total eigenvalue displacement.
fn best_assignment(overlap: &[Vec<f64>], dist: &[Vec<f64>]) -> Vec<usize> {
    let nb = overlap.len();
    let nc = overlap.first().map(|r| r.len()).unwrap_or(0);
    let mut best: (f64, f64, Vec<usize>) = (f64::NEG_INFINITY, f64::INFINITY, Vec::new());
    let mut cur = Vec::with_capacity(nb);
    let mut used = vec![false; nc];
    fn rec(
        b: usize,
        ov: f64,
        ds: f64,
        overlap: &[Vec<f64>],
        dist: &[Vec<f64>],
        cur: &mut Vec<usize>,
        used: &mut [bool],
        best: &mut (f64, f64, Vec<usize>),
    ) {
        if b == overlap.len() {
            let better = ov > best.0 + 1e-9 || ((ov - best.0).abs() <= 1e-9 && ds < best.1);
            if better {
                *best = (ov, ds, cur.clone());
            }
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                cur.push(c);
                rec(b + 1, ov + overlap[b][c], ds + dist[b][c], overlap, dist, cur, used, best);
                cur.pop();
                used[c] = false;
            }
        }
    }
    rec(0, 0.0, 0.0, overlap, dist, &mut cur, &mut used, &mut best);
    best.2
}

fn sample(p: &EigenPair, rho: f64, alpha: f64, overlap: f64) -> BranchSample {
    BranchSample { rho, alpha, lambda: p.lambda, residual: p.residual, overlap, vector: p.vector.clone() }
}

/// Continues the branches along one side of `rho = 0`. `points` are ordered
/// by increasing `|rho|` and share one sign.
fn continue_side(grid: &GridSpec, omega: &[f64], points: &[&SpectrumPoint]) -> Vec<Branch> {
    let d = grid.d;
    let Some(first) = points.first() else { return Vec::new() };
    let hydro = &first.leading[..d + 2];
    let labels = label_hydrodynamic(grid, omega, first.rho, hydro);
    let mut branches: Vec<Branch> = hydro
        .iter()
        .zip(&labels)
        .map(|(p, &j)| Branch {
            label: j,
            omega: omega.to_vec(),
            alpha: first.alpha,
            samples: vec![sample(p, first.rho, first.alpha, 1.0)],
            failure: None,
        })
        .collect();
    for pt in &points[1..] {
        let live: Vec<usize> = (0..branches.len()).filter(|&b| branches[b].failure.is_none()).collect();
        if live.is_empty() {
            break;
        }
        let mut ov = Vec::new();
        let mut ds = Vec::new();
        for &b in &live {
            let last = branches[b].samples.last().unwrap();
            ov.push(pt.leading.iter().map(|c| inner(grid, &last.vector, &c.vector).norm()).collect::<Vec<_>>());
            ds.push(pt.leading.iter().map(|c| (c.lambda - last.lambda).norm()).collect::<Vec<_>>());
        }
        let assign = best_assignment(&ov, &ds);
        for (r, &b) in live.iter().enumerate() {
            let c = assign[r];
            let o = ov[r][c];
            if o < MIN_OVERLAP {
                branches[b].failure = Some(format!("overlap {o:.3} below {MIN_OVERLAP} at rho={}", pt.rho));
                continue;
            }
            branches[b].samples.push(sample(&pt.leading[c], pt.rho, pt.alpha, o));
        }
    }
    branches
}

/// Projection of `x` onto the span of `vs`, by normal equations.
fn project(grid: &GridSpec, x: &[Complex64], vs: &[&Vec<Complex64>]) -> Vec<Complex64> {
    let m = vs.len();
    let g = Mat::from_fn(m, m, |i, j| inner(grid, vs[i], vs[j]));
    let rhs = Mat::from_fn(m, 1, |i, _| inner(grid, vs[i], x));
    let c = {
        use faer::linalg::solvers::Solve;
        g.partial_piv_lu().solve(&rhs)
    };
    let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
    for (i, v) in vs.iter().enumerate() {
        for (o, z) in out.iter_mut().zip(v.iter()) {
            *o += c[(i, 0)] * z;
        }
    }
    out
}

/// Attaches the `rho = 0` samples. Each branch vector from the first nonzero
/// frequency is projected onto the eigenvalue clusters of the zero point, and
/// branches are assigned to clusters jointly, at most one per cluster member.
fn attach_zero(grid: &GridSpec, zero: &SpectrumPoint, branches: &mut [Branch], from: &[BranchSample]) {
    let scale = zero.summary.lambda_bar.abs().max(1e-12);
    let cand = &zero.leading;
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..cand.len() {
        match clusters.iter_mut().find(|c| (cand[c[0]].lambda - cand[i].lambda).norm() <= 1e-6 * scale) {
            Some(c) => c.push(i),
            None => clusters.push(vec![i]),
        }
    }
    let slots: Vec<usize> = clusters.iter().enumerate().flat_map(|(k, c)| std::iter::repeat(k).take(c.len())).collect();
    let mut proj: Vec<Vec<(Vec<Complex64>, f64)>> = Vec::new();
    for f in from {
        proj.push(
            clusters
                .iter()
                .map(|c| {
                    let vs: Vec<&Vec<Complex64>> = c.iter().map(|&i| &cand[i].vector).collect();
                    let p = project(grid, &f.vector, &vs);
                    let w = norm_l2(grid, &p);
                    (p, w)
                })
                .collect(),
        );
    }
    let ov: Vec<Vec<f64>> = proj.iter().map(|row| slots.iter().map(|&k| row[k].1).collect()).collect();
    let ds: Vec<Vec<f64>> = from
        .iter()
        .map(|f| slots.iter().map(|&k| (cand[clusters[k][0]].lambda - f.lambda).norm()).collect())
        .collect();
    let assign = best_assignment(&ov, &ds);
    for (b, branch) in branches.iter_mut().enumerate() {
        let k = slots[assign[b]];
        let c = &clusters[k];
        let (mut p, w) = proj[b][k].clone();
        let lam = c.iter().map(|&i| cand[i].lambda).sum::<Complex64>() / c.len() as f64;
        let res = c.iter().map(|&i| cand[i].residual).fold(0.0, f64::max);
        if w < MIN_OVERLAP {
            branch.failure.get_or_insert(format!("projection {w:.3} below {MIN_OVERLAP} at rho=0"));
        }
        normalize(grid, &mut p);
        branch.samples.push(BranchSample { rho: 0.0, alpha: zero.alpha, lambda: lam, residual: res, overlap: w, vector: p });
    }
}

/// Tracks the `d + 2` hydrodynamic branches at fixed `alpha` through `points`,
/// which may include negative frequencies and must include `rho = 0`.
pub fn track_branches(grid: &GridSpec, omega: &[f64], points: &[SpectrumPoint]) -> Result<Vec<Branch>> {
    let zero = points
        .iter()
        .find(|p| p.rho == 0.0)
        .ok_or_else(|| Error::InvalidParameter("branch tracking needs a rho = 0 sample".into()))?;
    let mut pos: Vec<&SpectrumPoint> = points.iter().filter(|p| p.rho > 0.0).collect();
    pos.sort_by(|a, b| a.rho.partial_cmp(&b.rho).unwrap());
    let mut neg: Vec<&SpectrumPoint> = points.iter().filter(|p| p.rho < 0.0).collect();
    neg.sort_by(|a, b| b.rho.partial_cmp(&a.rho).unwrap());
    if pos.is_empty() {
        return Err(Error::InvalidParameter("branch tracking needs positive frequencies".into()));
    }
    let mut branches = continue_side(grid, omega, &pos);
    let neg_branches = continue_side(grid, omega, &neg);
    let firsts: Vec<BranchSample> = branches.iter().map(|b| b.samples[0].clone()).collect();
    attach_zero(grid, zero, &mut branches, &firsts);
    for br in branches.iter_mut() {
        if let Some(nb) = neg_branches.iter().find(|n| n.label == br.label) {
            br.samples.extend(nb.samples.iter().cloned());
            if br.failure.is_none() {
                br.failure = nb.failure.clone();
            }
        } else if !neg.is_empty() {
            br.failure.get_or_insert("no matching branch at negative frequencies".into());
        }
        br.samples.sort_by(|a, b| a.rho.partial_cmp(&b.rho).unwrap());
    }
    branches.sort_by_key(|b| b.label);
    Ok(branches)
}

impl Branch {
    pub fn at(&self, rho: f64) -> Option<&BranchSample> {
        self.samples.iter().find(|s| (s.rho - rho).abs() <= 1e-12 * (1.0 + rho.abs()))
    }
}

/// First and second frequency derivatives at `rho = 0` from centered
/// differences with one Richardson step, plus the inelasticity slope from
/// `(alpha, lambda(0, alpha))` pairs when given.
pub fn fit_expansion(branch: &Branch, rho0: f64, energy_samples: &[(f64, f64)]) -> Result<ExpansionFit> {
    let get = |r: f64| {
        branch
            .at(r)
            .map(|s| s.lambda)
            .ok_or_else(|| Error::InvalidParameter(format!("branch {} lacks a sample at rho={r}", branch.label)))
    };
    let (l0, p1, m1, p2, m2) = (get(0.0)?, get(rho0)?, get(-rho0)?, get(2.0 * rho0)?, get(-2.0 * rho0)?);
    let d1 = (p1 - m1) / (2.0 * rho0);
    let d2 = (p2 - m2) / (4.0 * rho0);
    let lambda1 = (4.0 * d1 - d2) / 3.0;
    let s1 = (p1 - 2.0 * l0 + m1) / (rho0 * rho0);
    let s2 = (p2 - 2.0 * l0 + m2) / (4.0 * rho0 * rho0);
    let second = (4.0 * s1 - s2) / 3.0;
    let (e1, e1_res) = if energy_samples.is_empty() {
        (None, 0.0)
    } else {
        let (num, den) = energy_samples
            .iter()
            .fold((0.0, 0.0), |(n, d), &(alpha, lam)| (n - (1.0 - alpha) * lam, d + (1.0 - alpha).powi(2)));
        if den == 0.0 {
            return Err(Error::InvalidParameter("inelasticity fit needs alpha < 1 samples".into()));
        }
        let e = num / den;
        let rms = (energy_samples.iter().map(|&(a, l)| (l + e * (1.0 - a)).powi(2)).sum::<f64>()
            / energy_samples.len() as f64)
            .sqrt();
        (Some(e), rms)
    };
    Ok(ExpansionFit {
        label: branch.label,
        lambda0: l0,
        lambda1,
        lambda2: -0.5 * second,
        second_derivative: second,
        e1,
        residuals: FitResiduals { lambda1: (d1 - d2).norm(), lambda2: (s1 - s2).norm(), e1: e1_res },
    })
}

/// Uniform essential-bound proxy over a sweep compared with the lower growth
/// constant `nu0` of the collision frequency.
pub fn essential_bound_check(summaries: &[SpectrumSummary], reference_gap: f64, nu0: f64) -> EssentialReport {
    let c = summaries.iter().map(|s| -s.mu_bar).fold(f64::INFINITY, f64::min);
    let entered = summaries.iter().any(|s| s.mu_bar > -0.5 * reference_gap);
    let ratio = c / nu0;
    EssentialReport { c, nu0, ratio, uniform: c > 0.0, tracks_nu0: ratio >= 0.25 && ratio <= 4.0, entered_window: entered }
}

/// Largest distance in a greedy nearest-neighbour matching of two multisets.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for z in a {
        let mut best = (usize::MAX, f64::INFINITY);
        for (j, w) in b.iter().enumerate() {
            if !used[j] {
                let dd = (z - w).norm();
                if dd < best.1 {
                    best = (j, dd);
                }
            }
        }
        if best.0 == usize::MAX {
            return f64::INFINITY;
        }
        used[best.0] = true;
        worst = worst.max(best.1);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::velocity_grid::build_grid;

    #[test]
    fn diagonal_matrix_spectrum() {
        let g = build_grid(2, 1.0, 8).unwrap();
        let n = g.len();
        let m = Mat::from_fn(n, n, |i, j| if i == j { -(i as f64) * 0.5 } else { 0.0 });
        let a = LinearOperatorMatrix { entries: Entries::Real(m), alpha: 1.0, gamma: vec![0.0, 0.0], grid: g };
        let pairs = full_spectrum(&a).unwrap();
        for (i, p) in pairs.iter().enumerate() {
            assert!((p.lambda - Complex64::new(-(i as f64) * 0.5, 0.0)).norm() < 1e-12);
            assert!(p.residual < 1e-12);
            assert!((norm_l2(&g, &p.vector) - 1.0).abs() < 1e-12);
        }
        let s = hydrodynamic_set(&pairs.iter().map(|p| p.lambda).collect::<Vec<_>>(), 2);
        assert!((s.lambda_bar - 2.0).abs() < 1e-12);
    }

    #[test]
    fn assignment_prefers_overlap_then_distance() {
        let ov = vec![vec![0.9, 0.9], vec![0.9, 0.9]];
        let ds = vec![vec![1.0, 0.1], vec![0.1, 1.0]];
        assert_eq!(best_assignment(&ov, &ds), vec![1, 0]);
        let ov = vec![vec![0.2, 0.95], vec![0.99, 0.1]];
        assert_eq!(best_assignment(&ov, &ds), vec![1, 0]);
    }

    #[test]
    fn transverse_basis_is_orthonormal() {
        let w = [0.6, 0.0, 0.8];
        let b = transverse_basis(&w);
        for e in &b {
            let n: f64 = e.iter().map(|x| x * x).sum();
            let dot: f64 = e.iter().zip(&w).map(|(a, c)| a * c).sum();
            assert!((n - 1.0).abs() < 1e-14 && dot.abs() < 1e-14);
        }
        let cross: f64 = b[0].iter().zip(&b[1]).map(|(a, c)| a * c).sum();
        assert!(cross.abs() < 1e-14);
    }

    #[test]
    fn multiset_distance_of_conjugates() {
        let a = vec![Complex64::new(-1.0, 0.5), Complex64::new(-2.0, -0.25)];
        let b: Vec<Complex64> = a.iter().rev().map(|z| z.conj()).collect();
        let c: Vec<Complex64> = a.iter().map(|z| z.conj()).collect();
        assert!(multiset_distance(&c, &b) < 1e-15);
    }
}
