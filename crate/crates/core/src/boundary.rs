//! Boundary points, foot points and the signed distance `δ`.
//!
//! `δ < 0` inside the domain. Its Hessian is available three ways: on the
//! boundary from the projected Hessian of `r/|∇r|`, off the boundary by the
//! shifted inverse `H_b (I + δ H_b)⁻¹`, and by finite differences of foot-point
//! distances (the oracle for the other two).

use crate::error::{Error, Result};
use crate::geometry::{tangent_frame, TangentFrame, GRAD_EPS};
use crate::linalg::{axpy, dot, norm, shifted_inverse_apply, solve_dense, sub, SymMatrix};
use crate::sampling::{stream, uniform_ball, uniform_in};
use crate::spec::DomainSpec;
use rand::Rng;

pub const PROJECT_TOL: f64 = 1e-12;
pub const MAX_NEWTON: usize = 50;
/// Reduced-Hessian eigenvalue floor below which a critical point of the
/// distance is rejected as a saddle.
pub const SADDLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub x: Vec<f64>,
    pub frame: TangentFrame,
}

impl BoundaryPoint {
    pub fn normal(&self) -> &[f64] {
        &self.frame.normal
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FootPointResult {
    pub b: Vec<f64>,
    pub delta: f64,
    pub iterations: usize,
    /// `(|r(b)|, |b - x - λ∇r(b)|)`
    pub residuals: (f64, f64),
    /// Unit outward normal at `b`, which is `∇δ(x)`.
    pub normal: Vec<f64>,
}

/// Scale for residual tests on `r`: values of `r` are compared against
/// `tol·(1 + |x|·|∇r(x)|)`.
pub fn residual_scale(x: &[f64], grad: &[f64]) -> f64 {
    1.0 + norm(x) * norm(grad)
}

fn check_grad(x: &[f64], g: &[f64]) -> Result<()> {
    let gn = norm(g);
    if gn <= GRAD_EPS || !gn.is_finite() {
        return Err(Error::VanishingGradient {
            point: x.to_vec(),
            norm: gn,
        });
    }
    Ok(())
}

/// Newton projection `x ← x - r ∇r / |∇r|²` onto `{r = 0}`.
pub fn project_to_boundary(spec: &DomainSpec, x0: &[f64]) -> Result<BoundaryPoint> {
    if x0.len() != spec.dim {
        return Err(Error::DimensionMismatch {
            expected: spec.dim,
            got: x0.len(),
        });
    }
    let mut x = x0.to_vec();
    let mut last = f64::INFINITY;
    for _ in 0..=MAX_NEWTON {
        let (r, g) = spec.value_grad(&x)?;
        check_grad(&x, &g)?;
        last = r.abs();
        if last <= PROJECT_TOL * residual_scale(&x, &g) {
            let frame = tangent_frame(&g, &x)?;
            return Ok(BoundaryPoint { x, frame });
        }
        let gg = dot(&g, &g);
        x = axpy(-r / gg, &g, &x);
        if x.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_NEWTON,
        residual: last,
    })
}

fn dedup_push(out: &mut Vec<BoundaryPoint>, p: BoundaryPoint) {
    if out.iter().all(|q| norm(&sub(&q.x, &p.x)) > 1e-6) {
        out.push(p);
    }
}

fn collect_samples(
    count: usize,
    mut attempt: impl FnMut(u64) -> Option<BoundaryPoint>,
) -> Result<Vec<BoundaryPoint>> {
    let budget = 100 * count.max(1);
    let mut out = Vec::with_capacity(count);
    for i in 0..budget {
        if out.len() >= count {
            break;
        }
        if let Some(p) = attempt(i as u64) {
            dedup_push(&mut out, p);
        }
    }
    if out.len() < count {
        return Err(Error::BoundaryNotFound {
            found: out.len(),
            wanted: count,
            attempts: budget,
        });
    }
    Ok(out)
}

/// `count` distinct boundary points inside the spec region, from uniform
/// draws in the region followed by projection.
pub fn sample_boundary(spec: &DomainSpec, count: usize, seed: u64) -> Result<Vec<BoundaryPoint>> {
    collect_samples(count, |i| {
        let x0 = uniform_in(&mut stream(seed, i), &spec.region);
        project_to_boundary(spec, &x0)
            .ok()
            .filter(|p| spec.region.contains(&p.x))
    })
}

/// `count` distinct boundary points within distance `radius` of `center`.
pub fn sample_boundary_near(
    spec: &DomainSpec,
    center: &[f64],
    radius: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<BoundaryPoint>> {
    collect_samples(count, |i| {
        let u = uniform_ball(&mut stream(seed, i), spec.dim);
        let x0 = axpy(radius, &u, center);
        project_to_boundary(spec, &x0)
            .ok()
            .filter(|p| norm(&sub(&p.x, center)) <= radius)
    })
}

/// Offsets `b + tν` of boundary samples with `t` uniform in `[lo, hi]`.
pub fn offset_samples(boundary: &[BoundaryPoint], lo: f64, hi: f64, seed: u64) -> Vec<Vec<f64>> {
    boundary
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let t = lo + (hi - lo) * stream(seed ^ 0x5eed_c011a5, i as u64).gen::<f64>();
            axpy(t, p.normal(), &p.x)
        })
        .collect()
}

/// Points at signed offset `t ∈ [lo, hi]` from `count` boundary samples of the
/// region.
pub fn sample_collar(
    spec: &DomainSpec,
    count: usize,
    seed: u64,
    lo: f64,
    hi: f64,
) -> Result<Vec<Vec<f64>>> {
    let b = sample_boundary(spec, count, seed)?;
    Ok(offset_samples(&b, lo, hi, seed))
}

/// Closest boundary point and signed distance, within the spec collar.
pub fn foot_point(spec: &DomainSpec, x: &[f64]) -> Result<FootPointResult> {
    foot_point_within(spec, x, spec.collar_radius)
}

/// [`foot_point`] with an explicit collar radius.
pub fn foot_point_within(spec: &DomainSpec, x: &[f64], collar: f64) -> Result<FootPointResult> {
    let n = spec.dim;
    let seed = project_to_boundary(spec, x)?;
    let mut y = seed.x;
    let (_, g) = spec.value_grad(&y)?;
    let mut lambda = dot(&sub(&y, x), &g) / dot(&g, &g);
    let xs = 1.0 + norm(x);
    let mut iterations = 0;
    let res = loop {
        let jet = spec.jet(&y)?;
        check_grad(&y, &jet.grad)?;
        let stat: Vec<f64> = (0..n).map(|i| y[i] - x[i] - lambda * jet.grad[i]).collect();
        let res = (jet.value.abs(), norm(&stat));
        let converged = res.0 <= PROJECT_TOL * residual_scale(&y, &jet.grad)
            && res.1 <= 1e-13 * xs;
        if converged {
            break res;
        }
        if iterations >= MAX_NEWTON {
            return Err(Error::NoConvergence {
                iterations,
                residual: res.0.max(res.1),
            });
        }
        // [[I - λH, -∇r], [∇rᵀ, 0]] (dy, dλ) = -(stat, r)
        let m = n + 1;
        let mut a = vec![0.0; m * m];
        for i in 0..n {
            for j in 0..n {
                let id = if i == j { 1.0 } else { 0.0 };
                a[i * m + j] = id - lambda * jet.hess.get(i, j);
            }
            a[i * m + n] = -jet.grad[i];
            a[n * m + i] = jet.grad[i];
        }
        let mut rhs: Vec<f64> = stat.iter().map(|v| -v).collect();
        rhs.push(-jet.value);
        let step = solve_dense(m, &a, &rhs).ok_or(Error::NoConvergence {
            iterations,
            residual: res.0.max(res.1),
        })?;
        for i in 0..n {
            y[i] += step[i];
        }
        lambda += step[n];
        iterations += 1;
    };

    let jet = spec.jet(&y)?;
    let frame = tangent_frame(&jet.grad, &y)?;
    // second-order condition on T(bΩ): Tᵀ(I - λH)T ⪰ 0
    let reduced = SymMatrix::from_fn(n - 1, |i, j| {
        let (ti, tj) = (&frame.tangent_basis[i], &frame.tangent_basis[j]);
        dot(ti, tj) - lambda * jet.hess.bilinear(ti, tj)
    });
    if n > 1 {
        let min_eig = reduced.min_eigenvalue()?;
        if min_eig < -SADDLE_TOL {
            return Err(Error::Saddle { min_eig });
        }
    }

    let rx = spec.value(x)?;
    let dist = norm(&sub(&y, x));
    let delta = if rx > 0.0 {
        dist
    } else if rx < 0.0 {
        -dist
    } else {
        0.0
    };
    if delta.abs() > collar {
        return Err(Error::OutsideCollar { delta, collar });
    }
    Ok(FootPointResult {
        b: y,
        delta,
        iterations,
        residuals: res,
        normal: frame.normal,
    })
}

pub fn signed_distance(spec: &DomainSpec, x: &[f64]) -> Result<f64> {
    Ok(foot_point(spec, x)?.delta)
}

/// `∇δ(x) = ν(b(x))`.
pub fn grad_delta(spec: &DomainSpec, x: &[f64]) -> Result<Vec<f64>> {
    Ok(foot_point(spec, x)?.normal)
}

/// `P H_r P / |∇r|` with `P = I - ννᵀ`: the Hessian of `δ` at a boundary
/// point.
pub fn hessian_delta_boundary(spec: &DomainSpec, p: &BoundaryPoint) -> Result<SymMatrix> {
    let jet = spec.jet(&p.x)?;
    check_grad(&p.x, &jet.grad)?;
    let g = norm(&jet.grad);
    let proj = p.frame.projector();
    let n = spec.dim;
    let mut dense = vec![0.0; n * n];
    let pd = proj.to_dense();
    let hd = jet.hess.to_dense();
    // P H P
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += pd[i * n + k] * hd[k * n + l] * pd[l * n + j];
                }
            }
            dense[i * n + j] = s / g;
        }
    }
    Ok(SymMatrix::from_dense_symmetrized(n, &dense))
}

fn boundary_point_at(spec: &DomainSpec, b: &[f64]) -> Result<BoundaryPoint> {
    let (_, g) = spec.value_grad(b)?;
    Ok(BoundaryPoint {
        x: b.to_vec(),
        frame: tangent_frame(&g, b)?,
    })
}

/// Hessian of `δ` at `x` and at its foot point, with the foot-point data.
pub fn hessian_delta_pair(
    spec: &DomainSpec,
    x: &[f64],
) -> Result<(SymMatrix, SymMatrix, FootPointResult)> {
    let fp = foot_point(spec, x)?;
    let hb = hessian_delta_boundary(spec, &boundary_point_at(spec, &fp.b)?)?;
    let hx = shifted_inverse_apply(&hb, fp.delta)?;
    Ok((hx, hb, fp))
}

/// `H_b (I + δ H_b)⁻¹` at the foot point.
pub fn hessian_delta_series(spec: &DomainSpec, x: &[f64]) -> Result<SymMatrix> {
    Ok(hessian_delta_pair(spec, x)?.0)
}

pub fn default_fd_step(x: &[f64]) -> f64 {
    1e-3 * (1.0 + norm(x))
}

/// Central second differences of foot-point distances, Richardson-extrapolated
/// over steps `h` and `h/2`.
pub fn hessian_delta_fd(spec: &DomainSpec, x: &[f64], h: f64) -> Result<SymMatrix> {
    let collar = spec.collar_radius + 4.0 * h;
    let delta = |p: &[f64]| foot_point_within(spec, p, collar).map(|f| f.delta);
    let n = spec.dim;
    let d0 = delta(x)?;
    let stencil = |h: f64| -> Result<SymMatrix> {
        let shifted = |pairs: &[(usize, f64)]| {
            let mut p = x.to_vec();
            for &(i, s) in pairs {
                p[i] += s * h;
            }
            delta(&p)
        };
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            let v = (shifted(&[(i, 1.0)])? - 2.0 * d0 + shifted(&[(i, -1.0)])?) / (h * h);
            m.set(i, i, v);
            for j in 0..i {
                let v = (shifted(&[(i, 1.0), (j, 1.0)])? - shifted(&[(i, 1.0), (j, -1.0)])?
                    - shifted(&[(i, -1.0), (j, 1.0)])?
                    + shifted(&[(i, -1.0), (j, -1.0)])?)
                    / (4.0 * h * h);
                m.set(i, j, v);
            }
        }
        Ok(m)
    };
    let coarse = stencil(h)?;
    let fine = stencil(0.5 * h)?;
    Ok(fine.scaled(4.0 / 3.0).sub(&coarse.scaled(1.0 / 3.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{corpus_source, corpus_spec, Region};
    use approx::assert_relative_eq;

    fn circle() -> DomainSpec {
        corpus_spec("circle").unwrap()
    }

    #[test]
    fn project_examples() {
        let c = circle();
        let p = project_to_boundary(&c, &[2.0, 0.0]).unwrap();
        assert_relative_eq!(p.x[0], 1.0, epsilon = 1e-14);
        assert_eq!(p.x[1], 0.0);
        assert!(matches!(
            project_to_boundary(&c, &[0.0, 0.0]),
            Err(Error::VanishingGradient { .. })
        ));
        let s = corpus_spec("paper_example_s").unwrap();
        let p = project_to_boundary(&s, &[0.0, -0.1]).unwrap();
        assert!(s.value(&p.x).unwrap().abs() <= 1e-12);
        assert!(norm(&p.x) < 1e-12);
    }

    #[test]
    fn boundary_sampling_contract() {
        let c = circle();
        let a = sample_boundary(&c, 8, 1).unwrap();
        let b = sample_boundary(&c, 8, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
        for p in &a {
            assert!((p.x[0].powi(2) + p.x[1].powi(2) - 1.0).abs() <= 1e-10);
            assert!(p.frame.orthonormality_defect() < 1e-12);
        }
        let mut src = corpus_source("circle").unwrap();
        src.lo = vec![2.0, 2.0];
        src.hi = vec![3.0, 3.0];
        src.seed_point = vec![2.5, 2.5];
        let off = DomainSpec::from_source(&src).unwrap();
        assert!(matches!(
            sample_boundary(&off, 8, 1),
            Err(Error::BoundaryNotFound { found: 0, .. })
        ));
    }

    #[test]
    fn foot_point_examples() {
        let c = circle();
        let f = foot_point_within(&c, &[2.0, 0.0], 2.0).unwrap();
        assert_relative_eq!(f.b[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(f.delta, 1.0, epsilon = 1e-14);
        let f = foot_point(&c, &[0.5, 0.0]).unwrap();
        assert_relative_eq!(f.b[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(f.delta, -0.5, epsilon = 1e-14);
        assert_eq!(grad_delta(&c, &[0.5, 0.0]).unwrap(), vec![1.0, 0.0]);

        // (0,2) is far outside the ellipse's default collar
        let e = corpus_spec("ellipse").unwrap();
        let f = foot_point_within(&e, &[0.0, 2.0], 1.5).unwrap();
        assert!(f.b[0].abs() < 1e-12);
        assert_relative_eq!(f.b[1], 1.0, epsilon = 1e-14);
        assert_relative_eq!(f.delta, 1.0, epsilon = 1e-14);
        assert!(matches!(
            foot_point(&e, &[0.0, 2.0]),
            Err(Error::OutsideCollar { .. })
        ));
    }

    #[test]
    fn ellipse_foot_point_against_parameter_grid() {
        let e = corpus_spec("ellipse").unwrap();
        for x in [[1.9, 0.3], [1.2, 0.9], [-0.5, -1.1], [1.6, 0.4]] {
            let f = foot_point(&e, &x).unwrap();
            let mut best = f64::INFINITY;
            let m = 200_000;
            for k in 0..m {
                let t = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                best = best.min(norm(&sub(&[2.0 * t.cos(), t.sin()], &x)));
            }
            assert!((f.delta.abs() - best).abs() < 1e-8, "{x:?}: {} vs {best}", f.delta);
            // b - x parallel to the normal
            let d = sub(&f.b, &x);
            let cross = d[0] * f.normal[1] - d[1] * f.normal[0];
            assert!(cross.abs() <= 1e-6 * norm(&d).max(1e-300));
        }
    }

    #[test]
    fn interior_past_the_center_is_rejected() {
        // the Lagrange system also has the far point of the circle as a
        // critical point; with the collar wide open, foot points past the
        // center still resolve to the nearest point or fail loudly
        let c = circle();
        let f = foot_point_within(&c, &[0.1, 0.0], 10.0).unwrap();
        assert_relative_eq!(f.b[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn delta_hessians_on_the_circle() {
        let c = circle();
        let p = project_to_boundary(&c, &[1.0, 0.0]).unwrap();
        let hb = hessian_delta_boundary(&c, &p).unwrap();
        assert!(hb.sub(&SymMatrix::diagonal(&[0.0, 1.0])).frobenius_norm() < 1e-15);

        let hs = hessian_delta_series(&c, &[1.3, 0.0]).unwrap();
        assert!(hs.sub(&SymMatrix::diagonal(&[0.0, 1.0 / 1.3])).frobenius_norm() < 1e-14);
        let hs = hessian_delta_series(&c, &[0.7, 0.0]).unwrap();
        assert!(hs.sub(&SymMatrix::diagonal(&[0.0, 1.0 / 0.7])).frobenius_norm() < 1e-14);
        let hs = hessian_delta_series(&c, &[1.0, 0.0]).unwrap();
        assert!(hs.sub(&hb).frobenius_norm() == 0.0);

        let x = [1.3, 0.0];
        let hf = hessian_delta_fd(&c, &x, default_fd_step(&x)).unwrap();
        assert!(hf.sub(&SymMatrix::diagonal(&[0.0, 1.0 / 1.3])).frobenius_norm() < 1e-5);
    }

    #[test]
    fn spec_examples_outside_the_builtin_collar() {
        let mut src = corpus_source("circle").unwrap();
        src.collar_radius = Some(0.6);
        let c = DomainSpec::from_source(&src).unwrap();
        let hs = hessian_delta_series(&c, &[1.5, 0.0]).unwrap();
        assert!(hs.sub(&SymMatrix::diagonal(&[0.0, 2.0 / 3.0])).frobenius_norm() < 1e-14);
        let hs = hessian_delta_series(&c, &[0.5, 0.0]).unwrap();
        assert!(hs.sub(&SymMatrix::diagonal(&[0.0, 2.0])).frobenius_norm() < 1e-13);
        let x = [1.5, 0.0];
        let hf = hessian_delta_fd(&c, &x, 1e-3).unwrap();
        assert!(hf.sub(&SymMatrix::diagonal(&[0.0, 2.0 / 3.0])).frobenius_norm() < 1e-5);
    }

    #[test]
    fn halfspace_delta_is_affine() {
        let h = corpus_spec("halfspace").unwrap();
        for x in [[0.3, 0.2], [-0.7, -0.25], [0.0, 0.1]] {
            let f = foot_point(&h, &x).unwrap();
            assert_eq!(f.delta, x[1]);
            let hf = hessian_delta_fd(&h, &x, default_fd_step(&x)).unwrap();
            assert!(hf.frobenius_norm() < 1e-8);
            assert_eq!(hessian_delta_series(&h, &x).unwrap().frobenius_norm(), 0.0);
        }
    }

    #[test]
    fn region_helper() {
        let r = Region::new(vec![0.0], vec![1.0]).unwrap();
        assert!(r.contains(&[0.5]));
    }
}
