//! Checks against independently computed values: closed-form Gaussian
//! integrals, brute-force angular integrals, Leibniz determinants and
//! duality identities of the discrete operator.

use granspec::collision::{angular_momentum_b1, dissipation, CollisionOperator, CrossSection, SphereQuadrature};
use granspec::dispersion::{closed_form_cubic, det3, dispersion_roots, gram_matrix, moment_cubic};
use granspec::equilibrium::temperature_from_b1;
use granspec::linop::{apply_linearized, assemble_fourier, assemble_linearized};
use granspec::spectrum::{full_spectrum, multiset_distance};
use granspec::velocity_grid::{build_grid, maxwellian, quadrature, radial_moment, Distribution, GridSpec};
use num_complex::Complex64;
use std::f64::consts::PI;

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn gaussian_moments_match_closed_forms() {
    for (d, n, l) in [(2, 32, 8.0), (3, 20, 7.0)] {
        let g = build_grid(d, l, n).unwrap();
        let t = 0.8;
        let m = maxwellian(&g, 1.3, &vec![0.0; d], t).unwrap();
        let df = d as f64;
        assert!((quadrature(&m) - 1.3).abs() < 1e-9, "d={d}: {}", quadrature(&m));
        let e2 = quadrature(&Distribution::from_fn(&g, sq).mul(&m));
        assert!((e2 - 1.3 * df * t).abs() < 1e-8, "d={d}: {e2}");
        let e4 = quadrature(&Distribution::from_fn(&g, |v| sq(v).powi(2)).mul(&m));
        assert!((e4 - 1.3 * df * (df + 2.0) * t * t).abs() < 1e-7, "d={d}: {e4}");
    }
}

#[test]
fn radial_third_moment_matches_chi_distribution() {
    // E|v|^3 for a standard Gaussian: 3 sqrt(pi/2) in the plane, 8 sqrt(2/pi) in
    // space. |v|^3 is not smooth at the origin, so convergence is algebraic.
    let mut prev = f64::INFINITY;
    for n in [16, 32, 64] {
        let g = build_grid(2, 8.0, n).unwrap();
        let m = maxwellian(&g, 1.0, &[0.0, 0.0], 1.0).unwrap();
        let err = (radial_moment(&m, 3.0) - 3.0 * (PI / 2.0).sqrt()).abs();
        assert!(err < prev / 8.0, "n={n}: {err}");
        prev = err;
    }
    assert!(prev < 1e-5);
    let g3 = build_grid(3, 7.0, 24).unwrap();
    let m3 = maxwellian(&g3, 1.0, &[0.0, 0.0, 0.0], 1.0).unwrap();
    assert!((radial_moment(&m3, 3.0) - 8.0 * (2.0 / PI).sqrt()).abs() < 1e-3);
}

#[test]
fn dissipation_of_maxwellians_uses_relative_velocity_law() {
    // v - w ~ N(0, 2T): D(M, M) = b1 E|u|^3 = b1 3 sqrt(pi/2) (2T)^(3/2) in 2D.
    let g = build_grid(2, 8.0, 32).unwrap();
    let t = 0.9;
    let m = maxwellian(&g, 1.0, &[0.0, 0.0], t).unwrap();
    let want = 0.7 * 3.0 * (PI / 2.0).sqrt() * (2.0 * t).powf(1.5);
    let got = dissipation(&m, &m, 0.7).unwrap();
    assert!((got - want).abs() / want < 1e-4, "{got} vs {want}");
}

#[test]
fn angular_moment_matches_dense_integration() {
    let b = CrossSection::linear(0.3, 0.2).unwrap();
    let u = [1.0, 0.0, 0.0];
    let circle = SphereQuadrature::circle(16).unwrap();
    let dense2 = simpson(0.0, 2.0 * PI, 4000, |th| (1.0 - th.cos()) * b.eval(th.cos()));
    assert!((angular_momentum_b1(&b, &circle, &u) - dense2).abs() < 1e-10);
    let sphere = SphereQuadrature::sphere(32).unwrap();
    let dense3 = 2.0 * PI * simpson(-1.0, 1.0, 4000, |x| (1.0 - x) * b.eval(x));
    assert!((angular_momentum_b1(&b, &sphere, &u) - dense3).abs() < 1e-10);
}

#[test]
fn grid_temperature_tracks_closed_form() {
    // Quasi-elastic temperature from the continuous third moment.
    let g = build_grid(2, 8.0, 32).unwrap();
    let b1 = 1.7;
    let m3 = 3.0 * (PI / 2.0).sqrt();
    let closed = 0.5 * (2.0 / (b1 * m3)).powf(2.0 / 3.0);
    let t = temperature_from_b1(&g, b1).unwrap();
    assert!((t - closed).abs() / closed < 1e-4, "{t} vs {closed}");
}

fn leibniz(m: &[[Complex64; 3]; 3]) -> Complex64 {
    let perms = [([0, 1, 2], 1.0), ([1, 2, 0], 1.0), ([2, 0, 1], 1.0), ([0, 2, 1], -1.0), ([2, 1, 0], -1.0), ([1, 0, 2], -1.0)];
    perms.iter().map(|(p, s)| m[0][p[0]] * m[1][p[1]] * m[2][p[2]] * *s).sum()
}

#[test]
fn gram_determinant_matches_leibniz_and_moment_cubic() {
    for (d, t, c) in [(2, 1.0, 1.7), (3, 0.6, 2.3), (2, 1.4, -0.4)] {
        for k in 0..20 {
            let z = Complex64::new(0.3 * k as f64 - 2.0, 1.1 - 0.17 * k as f64);
            let m = gram_matrix(z, d, t, c);
            let det = det3(&m);
            let lb = leibniz(&m.entries);
            assert!((det - lb).norm() <= 1e-12 * (1.0 + lb.norm()));
            let mc = moment_cubic(z, d, t);
            assert!((det - mc).norm() <= 1e-11 * (1.0 + mc.norm()), "d={d} t={t}: {det} vs {mc}");
        }
    }
}

#[test]
fn dispersion_roots_use_the_closed_form_speed() {
    for d in [2usize, 3] {
        let r = dispersion_roots(d, 1.0).unwrap();
        let s = (1.0 + 2.0 / d as f64).sqrt();
        assert_eq!(r.z[1], Complex64::new(0.0, 0.0));
        assert!((r.z[2].im - s).abs() < 1e-15 && (r.z[0].im + s).abs() < 1e-15);
        for z in r.z {
            assert!(closed_form_cubic(z, d, 1.0).norm() < 1e-13);
        }
    }
}

fn small_operator(alpha: f64) -> (GridSpec, CollisionOperator) {
    let g = build_grid(2, 5.0, 10).unwrap();
    let b = CrossSection::thermal_unit(&g).unwrap();
    let q = SphereQuadrature::circle(8).unwrap();
    (g, CollisionOperator::new(&g, b, q, alpha).unwrap())
}

fn bumpy(g: &GridSpec, shift: f64) -> Distribution {
    Distribution::from_fn(g, |v| (-(v[0] - shift).powi(2) - 0.7 * (v[1] + 0.3).powi(2)).exp() * (1.2 + (v[0] * v[1]).sin()))
}

#[test]
fn weak_probe_is_the_transpose_of_the_scatter() {
    let (g, op) = small_operator(0.8);
    let f = bumpy(&g, 0.4);
    let h = bumpy(&g, -0.5);
    let psi = Distribution::from_fn(&g, |v| (0.3 * v[0]).cos() + v[1] * v[1]);
    let q = op.collision_apply(&f, &h).unwrap().q;
    let direct = quadrature(&q.mul(&psi));
    let probe = op.weak_probe(&f, &h, &psi).unwrap();
    assert!((direct - probe).abs() <= 1e-12 * (1.0 + direct.abs()), "{direct} vs {probe}");
}

#[test]
fn assembled_matrix_matches_operator_and_bilinear_expansion() {
    let (g, op) = small_operator(0.9);
    let big = maxwellian(&g, 1.0, &[0.0, 0.0], 1.0).unwrap();
    let h = bumpy(&g, 0.2);
    let a = assemble_linearized(&op, &big).unwrap();
    let x: Vec<Complex64> = h.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let ax = a.apply(&x);
    let direct = apply_linearized(&op, &h, &big).unwrap();
    for (u, w) in ax.iter().zip(&direct.values) {
        assert!((u.re - w).abs() < 1e-12 && u.im == 0.0);
    }
    // Q(F + t h) - Q(F) = 2 t Q(F, h) + t^2 Q(h, h), exactly.
    let t = 0.37;
    let qf = op.collision_apply(&big, &big).unwrap().q;
    let qp = op.collision_apply(&big.axpy(t, &h), &big.axpy(t, &h)).unwrap().q;
    let qh = op.collision_apply(&h, &h).unwrap().q;
    let lin = direct.axpy(-op.epsilon(), &granspec::velocity_grid::laplacian(&h));
    for k in 0..g.len() {
        let lhs = qp.values[k] - qf.values[k] - t * t * qh.values[k];
        assert!((lhs - t * lin.values[k]).abs() < 1e-12, "node {k}");
    }
}

#[test]
fn spectrum_is_conjugate_symmetric_and_rotation_invariant() {
    let (g, op) = small_operator(1.0);
    let big = maxwellian(&g, 1.0, &[0.0, 0.0], 1.0).unwrap();
    let a = assemble_linearized(&op, &big).unwrap();
    let rho = 0.2;
    let spec = |gamma: [f64; 2]| -> Vec<Complex64> {
        full_spectrum(&assemble_fourier(&a, &gamma).unwrap()).unwrap().iter().map(|p| p.lambda).collect()
    };
    let px = spec([rho, 0.0]);
    let mx: Vec<Complex64> = spec([-rho, 0.0]).iter().map(|z| z.conj()).collect();
    let py = spec([0.0, rho]);
    let scale = px.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(multiset_distance(&px, &mx) <= 1e-10 * scale);
    assert!(multiset_distance(&px, &py) <= 1e-9 * scale, "{} {scale}", multiset_distance(&px, &py));
}
