//! Random expression trees and a finite-difference oracle for jets.
#![allow(dead_code)]

use convexdef::expr::{Expr, Func};
use convexdef::jet::Jet3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn leaf(rng: &mut ChaCha8Rng, dim: usize) -> Expr {
    if rng.gen_bool(0.6) {
        Expr::Var(rng.gen_range(0..dim))
    } else {
        Expr::Const((rng.gen_range(-2.0..2.0f64) * 8.0).round() / 8.0)
    }
}

/// A random tree of depth at most `depth` in `dim` variables.
pub fn random_expr(rng: &mut ChaCha8Rng, dim: usize, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.2) {
        return leaf(rng, dim);
    }
    let sub = |rng: &mut ChaCha8Rng| Box::new(random_expr(rng, dim, depth - 1));
    match rng.gen_range(0..10) {
        0 | 1 => Expr::Add(sub(rng), sub(rng)),
        2 => Expr::Sub(sub(rng), sub(rng)),
        3 | 4 => Expr::Mul(sub(rng), sub(rng)),
        5 => Expr::Div(sub(rng), sub(rng)),
        6 => {
            let k = [2.0, 3.0, 4.0, -1.0, 0.5, 1.5][rng.gen_range(0..6)];
            Expr::Pow(sub(rng), k)
        }
        7 => Expr::Neg(sub(rng)),
        _ => {
            let f = [Func::Sin, Func::Cos, Func::Exp, Func::Sqrt, Func::Log][rng.gen_range(0..5)];
            Expr::Func(f, sub(rng))
        }
    }
}

/// Scale above which a jet is treated as too close to a singularity for a
/// difference oracle to be meaningful.
pub const CONDITIONING_LIMIT: f64 = 1e4;

pub fn well_conditioned(j: &Jet3) -> bool {
    std::iter::once(j.value)
        .chain(j.grad.iter().copied())
        .chain(j.hess.packed().iter().copied())
        .chain(j.third_packed().iter().copied())
        .all(|v| v.is_finite() && v.abs() <= CONDITIONING_LIMIT)
}

/// Steps tried by [`central_diff`], relative to the base step.
const STEP_LADDER: [f64; 4] = [5.0, 1.0, 0.2, 0.04];

/// Richardson-extrapolated central difference of `f` along axis `k`.
///
/// Each step of a short ladder around `h` gives two extrapolations (from
/// `h, h/2` and `h/2, h/4`); the one whose pair agrees best is returned, so
/// truncation-dominated and round-off-dominated points both get a usable
/// step.
pub fn central_diff(f: &dyn Fn(&[f64]) -> Option<f64>, x: &[f64], k: usize, h: f64) -> Option<f64> {
    let d = |h: f64| -> Option<f64> {
        let mut p = x.to_vec();
        let mut m = x.to_vec();
        p[k] += h;
        m[k] -= h;
        Some((f(&p)? - f(&m)?) / (2.0 * h))
    };
    let mut best: Option<(f64, f64)> = None;
    for s in STEP_LADDER {
        let step = s * h;
        let Some((a, b, c)) = d(step).zip(d(step / 2.0)).zip(d(step / 4.0)).map(|((a, b), c)| (a, b, c))
        else {
            continue;
        };
        let r1 = (4.0 * b - a) / 3.0;
        let r2 = (4.0 * c - b) / 3.0;
        let err = (r2 - r1).abs();
        if best.map_or(true, |(e, _)| err < e) {
            best = Some((err, r2));
        }
    }
    best.map(|(_, v)| v)
}

/// `|a − b| ≤ 1e-6·|b|`, or `≤ 1e-8` when `b` is near zero.
pub fn fd_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= (1e-6 * b.abs()).max(1e-8)
}

/// Compares every component of `jet` against differences of the next lower
/// order: the value for the gradient, the gradient for the Hessian, the
/// Hessian for the third-order table. Returns the first mismatch.
pub fn fd_mismatch(
    jet_at: &dyn Fn(&[f64]) -> Option<Jet3>,
    x: &[f64],
    h: f64,
) -> Option<String> {
    let j = jet_at(x)?;
    let n = x.len();
    for k in 0..n {
        let fd = central_diff(&|p| jet_at(p).map(|j| j.value), x, k, h);
        match fd {
            Some(v) if fd_close(j.grad[k], v) => {}
            other => return Some(format!("grad[{k}] = {} vs {other:?}", j.grad[k])),
        }
        for i in 0..n {
            let fd = central_diff(&|p| jet_at(p).map(|j| j.grad[i]), x, k, h);
            match fd {
                Some(v) if fd_close(j.hess.get(i, k), v) => {}
                other => return Some(format!("hess[{i}][{k}] = {} vs {other:?}", j.hess.get(i, k))),
            }
            for l in 0..n {
                let fd = central_diff(&|p| jet_at(p).map(|j| j.hess.get(i, l)), x, k, h);
                match fd {
                    Some(v) if fd_close(j.third(i, l, k), v) => {}
                    other => {
                        return Some(format!("third[{i}][{l}][{k}] = {} vs {other:?}", j.third(i, l, k)))
                    }
                }
            }
        }
    }
    None
}
