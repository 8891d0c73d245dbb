use convexdef::boundary::{
    foot_point, grad_delta, hessian_delta_fd, hessian_delta_series, default_fd_step, offset_samples,
    project_to_boundary, sample_boundary, sample_collar,
};
use convexdef::linalg::{norm, sub, SymMatrix};
use convexdef::spec::corpus_spec;
use convexdef::verify::{
    check_eikonal, check_geomseries, check_half_bound, check_normal_annihilation,
};
use proptest::prelude::*;

const CONVEX: [&str; 6] = [
    "halfspace",
    "circle",
    "ellipse",
    "superellipse4",
    "paper_example_s",
    "paper_example_s2",
];

#[test]
fn eikonal_and_normal_annihilation_on_convex_collars() {
    for name in CONVEX {
        let spec = corpus_spec(name).unwrap();
        let w = spec.collar_radius;
        let pts = sample_collar(&spec, 100, 3, -w, w).unwrap();
        let e = check_eikonal(&spec, &pts);
        let a = check_normal_annihilation(&spec, &pts);
        assert!(e.pass && e.worst_value.abs() <= 1e-10, "{name}: {e:?}");
        assert!(a.pass && a.worst_value.abs() <= 1e-8, "{name}: {a:?}");
        assert!(e.failures == 0 && a.failures == 0, "{name}");
    }
}

#[test]
fn series_hessian_matches_differences() {
    for name in ["circle", "ellipse", "superellipse4"] {
        let spec = corpus_spec(name).unwrap();
        let pts = sample_collar(&spec, 60, 11, -0.3, 0.3).unwrap();
        let r = check_geomseries(&spec, &pts);
        assert!(r.pass && r.failures == 0, "{name}: {r:?}");
        assert!(r.worst_value <= 1e-4);
    }
}

#[test]
fn foot_points_are_idempotent() {
    for name in CONVEX {
        let spec = corpus_spec(name).unwrap();
        let w = spec.collar_radius;
        for x in sample_collar(&spec, 40, 5, -w, w).unwrap() {
            let b = foot_point(&spec, &x).unwrap().b;
            let again = foot_point(&spec, &b).unwrap();
            assert!(again.delta.abs() <= 1e-10, "{name} {x:?}");
            assert!(norm(&sub(&again.b, &b)) <= 1e-8, "{name} {x:?}");
        }
    }
}

#[test]
fn convex_half_bound_on_exterior_points() {
    for name in ["circle", "ellipse", "superellipse4"] {
        let spec = corpus_spec(name).unwrap();
        let w = spec.collar_radius;
        let b = sample_boundary(&spec, 60, 9).unwrap();
        let pts = offset_samples(&b, 0.01 * w, w, 9);
        let r = check_half_bound(&spec, &pts, 9);
        assert!(r.pass && r.failures == 0, "{name}: {r:?}");
    }
}

#[test]
fn peanut_violates_the_half_bound() {
    let spec = corpus_spec("peanut").unwrap();
    let w = spec.collar_radius;
    let b = sample_boundary(&spec, 100, 9).unwrap();
    let r = check_half_bound(&spec, &offset_samples(&b, 0.01 * w, w, 9), 9);
    assert!(!r.pass);
}

fn polar(rho: f64, t: f64) -> Vec<f64> {
    vec![rho * t.cos(), rho * t.sin()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn circle_distance_matches_closed_form(rho in 0.45f64..1.55, t in 0.0f64..std::f64::consts::TAU) {
        let spec = corpus_spec("circle").unwrap();
        let x = polar(rho, t);
        let fp = foot_point(&spec, &x).unwrap();
        prop_assert!((fp.delta - (rho - 1.0)).abs() <= 1e-10);
        let g = grad_delta(&spec, &x).unwrap();
        prop_assert!((g[0] - t.cos()).abs() <= 1e-10 && (g[1] - t.sin()).abs() <= 1e-10);
        // H_δ = (1/ρ)(I − ννᵀ)
        let nu = [t.cos(), t.sin()];
        let expected = SymMatrix::from_fn(2, |i, j| {
            ((if i == j { 1.0 } else { 0.0 }) - nu[i] * nu[j]) / rho
        });
        let h = hessian_delta_series(&spec, &x).unwrap();
        prop_assert!(h.sub(&expected).frobenius_norm() <= 1e-8);
    }

    #[test]
    fn projection_lands_on_the_boundary_and_is_idempotent(
        x1 in -1.2f64..1.2, x2 in -1.2f64..1.2,
    ) {
        prop_assume!(x1.abs() + x2.abs() > 0.2);
        let spec = corpus_spec("superellipse4").unwrap();
        let p = project_to_boundary(&spec, &[x1, x2]).unwrap();
        prop_assert!(spec.value(&p.x).unwrap().abs() <= 1e-11);
        let q = project_to_boundary(&spec, &p.x).unwrap();
        prop_assert!(norm(&sub(&q.x, &p.x)) <= 1e-12);
    }

    #[test]
    fn ellipse_series_agrees_with_differences(s in 0usize..1000) {
        let spec = corpus_spec("ellipse").unwrap();
        let x = sample_collar(&spec, 1, s as u64, -0.25, 0.25).unwrap().remove(0);
        let hs = hessian_delta_series(&spec, &x).unwrap();
        let hf = hessian_delta_fd(&spec, &x, default_fd_step(&x)).unwrap();
        prop_assert!(hs.sub(&hf).frobenius_norm() <= 1e-4 * (1.0 + hs.frobenius_norm()));
    }
}
