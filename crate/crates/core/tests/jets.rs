mod common;

use common::{fd_mismatch, random_expr, well_conditioned};
use convexdef::expr::{eval_jet3, parse_expr, Expr, SymbolicJet};
use convexdef::sampling::{stream, uniform_cube};
use proptest::prelude::*;

const PAIRS: usize = 1000;
const FD_STEP: f64 = 2e-4;

#[test]
fn jets_match_difference_oracle_on_random_trees() {
    let mut accepted = 0usize;
    let mut attempts = 0u64;
    let mut failures = Vec::new();
    while accepted < PAIRS {
        assert!(attempts < 50 * PAIRS as u64, "generator rejected too many trees");
        let mut rng = stream(2024, attempts);
        attempts += 1;
        let dim = 1 + (attempts % 3) as usize;
        let e = random_expr(&mut rng, dim, 5);
        let x: Vec<f64> = uniform_cube(&mut rng, dim);
        let Ok(sj) = SymbolicJet::new(&e, dim) else { continue };
        let Ok(j) = sj.eval(&x) else { continue };
        if !well_conditioned(&j) {
            continue;
        }
        let jet_at = |p: &[f64]| sj.eval(p).ok();
        // the whole stencil must stay inside the domain of the tree
        let stencil_ok = (0..dim).all(|k| {
            [-1.0, 1.0].iter().all(|s| {
                let mut p = x.clone();
                p[k] += s * FD_STEP;
                jet_at(&p).is_some_and(|j| well_conditioned(&j))
            })
        });
        if !stencil_ok {
            continue;
        }
        accepted += 1;
        if let Some(msg) = fd_mismatch(&jet_at, &x, FD_STEP) {
            failures.push(format!("{e} at {x:?}: {msg}"));
        }
    }
    assert!(failures.is_empty(), "{} mismatches:\n{}", failures.len(), failures.join("\n"));
}

#[test]
fn third_order_table_is_symmetric() {
    let e = parse_expr("sin(x1*x2) * x3^3 + exp(x1 - x3) / (2 + x2^2)", 3).unwrap();
    let j = eval_jet3(&e, &[0.3, -0.7, 0.4]).unwrap();
    for i in 0..3 {
        for k in 0..3 {
            for l in 0..3 {
                let v = j.third(i, k, l);
                for w in [j.third(i, l, k), j.third(k, i, l), j.third(k, l, i), j.third(l, i, k), j.third(l, k, i)] {
                    assert_eq!(v.to_bits(), w.to_bits());
                }
            }
            assert_eq!(j.hess.get(i, k).to_bits(), j.hess.get(k, i).to_bits());
        }
    }
}

fn tree() -> impl Strategy<Value = (Expr, Expr)> {
    (any::<u64>(), any::<u64>()).prop_map(|(a, b)| {
        (
            random_expr(&mut stream(a, 0), 2, 4),
            random_expr(&mut stream(b, 0), 2, 4),
        )
    })
}

proptest! {
    #[test]
    fn differentiation_is_linear(
        (e1, e2) in tree(),
        a in -3.0f64..3.0,
        x in proptest::collection::vec(-1.0f64..1.0, 2),
    ) {
        let combo = Expr::Add(
            Box::new(Expr::Mul(Box::new(Expr::Const(a)), Box::new(e1.clone()))),
            Box::new(e2.clone()),
        );
        let (Ok(j1), Ok(j2), Ok(jc)) = (eval_jet3(&e1, &x), eval_jet3(&e2, &x), eval_jet3(&combo, &x)) else {
            return Ok(());
        };
        let expected = j1.scale(a).add(&j2);
        prop_assert_eq!(&jc.grad, &expected.grad);
        prop_assert_eq!(&jc.hess, &expected.hess);
        prop_assert_eq!(jc.third_packed(), expected.third_packed());
    }

    #[test]
    fn printing_then_parsing_preserves_values(
        (e, _) in tree(),
        x in proptest::collection::vec(-1.0f64..1.0, 2),
    ) {
        let back = parse_expr(&e.to_string(), 2).unwrap();
        match (e.eval(&x), back.eval(&x)) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{} vs {}", a, b),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }
}
