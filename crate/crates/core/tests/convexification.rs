use convexdef::boundary::{project_to_boundary, sample_boundary, sample_boundary_near, BoundaryPoint};
use convexdef::convexify::{
    choose_k, estimate_c1_c2, normalize_r0, square_boost, try_full_convexify, ConvexifyConfig,
    SAFETY,
};
use convexdef::field::{Raw, ScalarField};
use convexdef::spec::corpus_spec;
use convexdef::verify::{
    check_full_convexity, check_quadratic_bound, check_sigma_lemma, check_tangential_convexity,
};

const CONVEX: [&str; 6] = [
    "halfspace",
    "circle",
    "ellipse",
    "superellipse4",
    "paper_example_s",
    "paper_example_s2",
];

fn seed_patch(name: &str, count: usize) -> (convexdef::spec::DomainSpec, Vec<BoundaryPoint>) {
    let spec = corpus_spec(name).unwrap();
    let c = project_to_boundary(&spec, &spec.seed_point).unwrap();
    let mut b = vec![c.clone()];
    b.extend(sample_boundary_near(&spec, &c.x, spec.collar_radius, count - 1, 17).unwrap());
    (spec, b)
}

#[test]
fn sigma_lemma_on_boosted_functions() {
    for name in ["circle", "paper_example_s", "ellipse", "superellipse4"] {
        let (spec, b) = seed_patch(name, 50);
        let r0 = normalize_r0(&spec, &b).unwrap();
        let k = choose_k(&spec, &b, SAFETY).unwrap();
        let r1 = square_boost(&spec, &r0, k, &b).unwrap();
        let rep = check_sigma_lemma(r1.transformed.as_ref(), &b);
        assert!(rep.pass && rep.samples == 50, "{name}: {rep:?}");
    }
}

#[test]
fn stages_r0_r1_pass_their_own_checks() {
    for name in CONVEX {
        let (spec, b) = seed_patch(name, 24);
        let r0 = normalize_r0(&spec, &b).unwrap();
        assert!(r0.passed(), "{name}: {:?}", r0.reports);
        let k = choose_k(&spec, &b, SAFETY).unwrap();
        let r1 = square_boost(&spec, &r0, k, &b).unwrap();
        assert!(r1.passed(), "{name}: {:?}", r1.reports);
    }
}

#[test]
fn pipeline_results_certify_their_claims() {
    for name in CONVEX {
        let spec = corpus_spec(name).unwrap();
        let c = project_to_boundary(&spec, &spec.seed_point).unwrap();
        let a = try_full_convexify(&spec, &c, &ConvexifyConfig::default()).unwrap();
        assert!(a.verified, "{name}: {:?}", a.result.reports);
        let res = a.result;
        let st = res.transformed.as_ref();

        // final Hessian PSD on every verification point
        let full = check_full_convexity(st, &res.samples);
        assert!(full.pass && full.worst_value >= -1e-8, "{name}: {full:?}");

        // multiplier positivity off the boundary
        for x in &res.samples {
            let r = spec.value(x).unwrap();
            if r.abs() > 1e-8 {
                assert!(st.value(x).unwrap() / r > 0.0, "{name} at {x:?}");
            }
        }

        // quadratic lower bound with freshly estimated constants
        let sigma = res.sigma.as_ref().unwrap();
        let (c1, c2) = estimate_c1_c2(sigma.as_ref(), &res.samples, 3);
        let q = check_quadratic_bound(sigma.as_ref(), c1, c2, &res.samples, 3);
        assert!(q.pass, "{name}: {q:?}");

        // full PSD of σ̃ implies tangential PSD of σ̃ on the same boundary points
        let r = res.patch_radius.unwrap();
        let b = sample_boundary_near(&spec, &c.x, r, 16, 23).unwrap();
        for p in &b {
            let h = st.jet(&p.x).unwrap().hess;
            for tau in &p.frame.tangent_basis {
                assert!(h.quad(tau) >= -1e-8, "{name}");
            }
        }
    }
}

#[test]
fn full_psd_implies_tangential_for_raw_functions() {
    for name in ["circle", "ellipse", "superellipse4", "halfspace", "paper_example_s", "peanut"] {
        let spec = corpus_spec(name).unwrap();
        let b = sample_boundary(&spec, 40, 8).unwrap();
        let pts: Vec<Vec<f64>> = b.iter().map(|p| p.x.clone()).collect();
        if check_full_convexity(&Raw(spec.clone()), &pts).pass {
            assert!(check_tangential_convexity(&spec, &b).pass, "{name}");
        }
    }
}

#[test]
fn non_convex_controls_are_not_verified() {
    for name in ["peanut", "hyperbola"] {
        let spec = corpus_spec(name).unwrap();
        let c = project_to_boundary(&spec, &spec.seed_point).unwrap();
        let a = try_full_convexify(&spec, &c, &ConvexifyConfig::default()).unwrap();
        assert!(!a.verified, "{name}");
        assert!(a.result.reports.iter().any(|r| r.check_name == "tangential_convexity" && !r.pass));
    }
}

#[test]
fn failing_reports_reproduce_their_worst_value() {
    let spec = corpus_spec("paper_example_s").unwrap();
    let raw = Raw(spec.clone());
    let pts = convexdef::boundary::sample_collar(&spec, 50, 4, -0.05, 0.05).unwrap();
    let rep = check_full_convexity(&raw, &pts);
    assert!(!rep.pass);
    let again = raw.jet(&rep.worst_point).unwrap().hess.min_eigenvalue().unwrap();
    assert!((again - rep.worst_value).abs() <= 1e-10);
}

#[test]
fn pipeline_is_deterministic() {
    let spec = corpus_spec("superellipse4").unwrap();
    let c = project_to_boundary(&spec, &spec.seed_point).unwrap();
    let run = || {
        let a = try_full_convexify(&spec, &c, &ConvexifyConfig::default()).unwrap();
        (
            a.result.constants,
            a.result.patch_radius,
            serde_json::to_string(&a.result.reports).unwrap(),
        )
    };
    assert_eq!(run(), run());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn sigma_lemma_holds_for_any_boost(seed in 0u64..10_000, k in 0.1f64..20.0) {
            let spec = corpus_spec("ellipse").unwrap();
            let b = sample_boundary(&spec, 2, seed).unwrap();
            let r0 = normalize_r0(&spec, &b).unwrap();
            let r1 = square_boost(&spec, &r0, k, &b).unwrap();
            prop_assert!(check_sigma_lemma(r1.transformed.as_ref(), &b).pass);
        }

        #[test]
        fn boosted_function_keeps_the_sign_of_r(
            seed in 0u64..10_000, k in 0.1f64..20.0, t in -0.3f64..0.3,
        ) {
            prop_assume!(t.abs() > 1e-6);
            let spec = corpus_spec("superellipse4").unwrap();
            let b = sample_boundary(&spec, 1, seed).unwrap();
            let r1 = square_boost(&spec, &normalize_r0(&spec, &b).unwrap(), k, &b).unwrap();
            let x = convexdef::linalg::axpy(t, b[0].normal(), &b[0].x);
            // r1 = r0 (1 + K r0) stays sign-consistent while 1 + K r0 > 0
            let v1 = r1.transformed.value(&x).unwrap();
            let r = spec.value(&x).unwrap();
            let inner = normalize_r0(&spec, &b).unwrap().transformed.value(&x).unwrap();
            prop_assume!(1.0 + k * inner > 0.0);
            prop_assert!(v1 / r > 0.0);
        }
    }
}
