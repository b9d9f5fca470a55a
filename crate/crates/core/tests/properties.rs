use granspec::collision::axis_stencil;
use granspec::collision::{post_collisional, CollisionOperator, CrossSection, SphereQuadrature};
use granspec::dispersion::{det3, gram_matrix, moment_cubic};
use granspec::velocity_grid::{build_grid, laplacian, quadrature, weighted_norm, Distribution, ExpWeight, GridSpec};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid() -> GridSpec {
    build_grid(2, 4.0, 8).unwrap()
}

fn op(alpha: f64) -> CollisionOperator {
    let g = grid();
    CollisionOperator::new(&g, CrossSection::linear(0.02, 0.01).unwrap(), SphereQuadrature::circle(8).unwrap(), alpha).unwrap()
}

fn dist(values: Vec<f64>) -> Distribution {
    Distribution::from_values(&grid(), values).unwrap()
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 64)
}

fn close(a: &Distribution, b: &Distribution, tol: f64) -> bool {
    let scale = a.max_abs().max(b.max_abs()).max(1e-300);
    a.values.iter().zip(&b.values).all(|(x, y)| (x - y).abs() <= tol * scale)
}

fn reflected(f: &Distribution, axis: usize) -> Distribution {
    let g = f.grid;
    let v = (0..g.len()).map(|k| f.values[g.reflect(k, axis)]).collect();
    Distribution::from_values(&g, v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn collision_is_bilinear_and_symmetric(a in values(), b in values(), c in values(), s in -2.0f64..2.0, alpha in 0.5f64..1.0) {
        let op = op(alpha);
        let (f1, f2, g) = (dist(a), dist(b), dist(c));
        let lhs = op.collision_apply(&f1.scaled(s).axpy(1.0, &f2), &g).unwrap().q;
        let rhs = op.collision_apply(&f1, &g).unwrap().q.scaled(s).axpy(1.0, &op.collision_apply(&f2, &g).unwrap().q);
        prop_assert!(close(&lhs, &rhs, 1e-12));
        let swapped = op.collision_apply(&g, &f1).unwrap().q;
        prop_assert!(close(&op.collision_apply(&f1, &g).unwrap().q, &swapped, 1e-13));
    }

    #[test]
    fn collision_conserves_mass_and_momentum(a in values(), alpha in 0.3f64..1.0) {
        let op = op(alpha);
        let f = dist(a);
        let r = op.collision_apply(&f, &f).unwrap();
        let scale = quadrature(&r.gain.map(f64::abs)) + quadrature(&r.loss.map(f64::abs));
        prop_assert!(quadrature(&r.q).abs() <= 1e-13 * scale);
        for c in 0..2 {
            let vc = Distribution::from_fn(&f.grid, |v| v[c]);
            prop_assert!(quadrature(&vc.mul(&r.q)).abs() <= 1e-12 * scale * 4.0);
        }
    }

    #[test]
    fn collision_commutes_with_reflections(a in values(), b in values(), axis in 0usize..2) {
        let op = op(0.9);
        let (f, g) = (dist(a), dist(b));
        let q = op.collision_apply(&f, &g).unwrap().q;
        let qr = op.collision_apply(&reflected(&f, axis), &reflected(&g, axis)).unwrap().q;
        prop_assert!(close(&reflected(&q, axis), &qr, 1e-12));
    }

    #[test]
    fn post_collisional_rule_conserves_momentum_and_dissipates(
        v in prop::array::uniform2(-3.0f64..3.0),
        w in prop::array::uniform2(-3.0f64..3.0),
        th in 0.0f64..std::f64::consts::TAU,
        alpha in 0.0f64..1.0,
    ) {
        let om = [th.cos(), th.sin()];
        let (vp, wp) = post_collisional(&v, &w, &om, alpha);
        for c in 0..2 {
            prop_assert!((vp[c] + wp[c] - v[c] - w[c]).abs() < 1e-12);
        }
        let e = |x: &[f64]| x.iter().map(|y| y * y).sum::<f64>();
        let un = (v[0] - w[0]) * om[0] + (v[1] - w[1]) * om[1];
        let loss = e(&v) + e(&w) - e(&vp) - e(&wp);
        prop_assert!((loss - 0.5 * (1.0 - alpha * alpha) * un * un).abs() < 1e-10);
    }

    #[test]
    fn weighted_norm_is_a_norm(a in prop::collection::vec(-1.0f64..1.0, 64), b in prop::collection::vec(-1.0f64..1.0, 64), s in -3.0f64..3.0) {
        let w = ExpWeight::default();
        let (f, g) = (dist(a), dist(b));
        prop_assert!((weighted_norm(&f.scaled(s), &w) - s.abs() * weighted_norm(&f, &w)).abs() <= 1e-12 * (1.0 + weighted_norm(&f, &w)));
        prop_assert!(weighted_norm(&f.axpy(1.0, &g), &w) <= weighted_norm(&f, &w) + weighted_norm(&g, &w) + 1e-12);
        prop_assert!(weighted_norm(&f, &w) >= 0.0);
    }

    #[test]
    fn laplacian_is_linear_and_even(a in prop::collection::vec(-1.0f64..1.0, 64), b in prop::collection::vec(-1.0f64..1.0, 64), s in -3.0f64..3.0, axis in 0usize..2) {
        let (f, g) = (dist(a), dist(b));
        let lhs = laplacian(&f.scaled(s).axpy(1.0, &g));
        let rhs = laplacian(&f).scaled(s).axpy(1.0, &laplacian(&g));
        prop_assert!(close(&lhs, &rhs, 1e-13));
        prop_assert!(close(&laplacian(&reflected(&f, axis)), &reflected(&laplacian(&f), axis), 1e-14));
    }

    #[test]
    fn stencil_reproduces_quadratics(s in 0.0f64..15.0, c in prop::array::uniform3(-2.0f64..2.0)) {
        let st = axis_stencil(s, 16).unwrap();
        let p = |x: f64| c[0] + c[1] * x + c[2] * x * x;
        let got: f64 = (0..st.len).map(|i| st.w[i] * p((st.start + i) as f64)).sum();
        prop_assert!((got - p(s)).abs() <= 1e-11 * (1.0 + p(s).abs()));
    }

    #[test]
    fn gram_determinant_is_the_moment_cubic(re in -4.0f64..4.0, im in -4.0f64..4.0, t in 0.2f64..3.0, c in -3.0f64..3.0, d in 2usize..4) {
        let z = Complex64::new(re, im);
        let det = det3(&gram_matrix(z, d, t, c));
        let mc = moment_cubic(z, d, t);
        prop_assert!((det - mc).norm() <= 1e-11 * (1.0 + mc.norm()) * (1.0 + c * c) * (1.0 + t).powi(4));
    }
}
