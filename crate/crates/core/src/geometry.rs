//! Tangent/normal splitting and the Hessian rules for modified defining
//! functions.

use crate::error::{Error, Result};
use crate::jet::Jet3;
use crate::linalg::{dot, norm, SymMatrix};

pub const GRAD_EPS: f64 = 1e-12;

fn check_grad(grad: &[f64], point: &[f64]) -> Result<f64> {
    let g = norm(grad);
    if !(g > GRAD_EPS) {
        return Err(Error::VanishingGradient {
            point: point.to_vec(),
            norm: g,
        });
    }
    Ok(g)
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Splits `xi` into a part orthogonal to `grad` and a part parallel to it.
pub fn tangent_split(grad: &[f64], xi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dims(grad.len(), xi.len())?;
    let g = check_grad(grad, &[])?;
    let a = dot(grad, xi) / (g * g);
    let normal: Vec<f64> = grad.iter().map(|v| a * v).collect();
    let tangent = xi.iter().zip(&normal).map(|(x, n)| x - n).collect();
    Ok((tangent, normal))
}

/// `H(ξ, ζ) = Σ h_jk ξ_j ζ_k`
pub fn hessian_form(hess: &SymMatrix, xi: &[f64], zeta: &[f64]) -> Result<f64> {
    check_dims(hess.dim(), xi.len())?;
    check_dims(hess.dim(), zeta.len())?;
    Ok(hess.bilinear(xi, zeta))
}

/// Hessian form of the product `h·r` in direction `ξ`:
/// `h H_r(ξ,ξ) + 2⟨∇h,ξ⟩⟨∇r,ξ⟩ + r H_h(ξ,ξ)`.
pub fn product_hessian(jr: &Jet3, jh: &Jet3, xi: &[f64]) -> Result<f64> {
    check_dims(jr.dim(), jh.dim())?;
    check_dims(jr.dim(), xi.len())?;
    Ok(jh.value * jr.hess.quad(xi)
        + 2.0 * dot(&jh.grad, xi) * dot(&jr.grad, xi)
        + jr.value * jh.hess.quad(xi))
}

/// Hessian form of `χ∘r` given `χ'(r(x))` and `χ''(r(x))`.
pub fn chain_hessian(jr: &Jet3, chi1: f64, chi2: f64, xi: &[f64]) -> f64 {
    let d = dot(&jr.grad, xi);
    chi1 * jr.hess.quad(xi) + chi2 * d * d
}

/// Orthonormal frame at a boundary point: the unit normal and a basis of its
/// orthogonal complement.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    pub base: Vec<f64>,
    pub normal: Vec<f64>,
    pub tangent_basis: Vec<Vec<f64>>,
}

/// Orthogonal `Q` (row-major) with `Q e_n = ν`; its first `n-1` columns span
/// `ν⊥`.
///
/// Built from a Householder reflector. When `ν_n > 0` the reflector through
/// `ν + e_n` is used (sending `e_n` to `-ν`) and the last column is flipped,
/// which avoids cancellation in `ν - e_n`.
pub fn householder_frame(nu: &[f64]) -> Vec<f64> {
    let n = nu.len();
    let flip = nu[n - 1] > 0.0;
    let mut v = nu.to_vec();
    v[n - 1] += if flip { 1.0 } else { -1.0 };
    let vv = dot(&v, &v);
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            q[i * n + j] = if vv > 0.0 { id - 2.0 * v[i] * v[j] / vv } else { id };
        }
    }
    if flip {
        for i in 0..n {
            q[i * n + n - 1] = -q[i * n + n - 1];
        }
    }
    q
}

pub fn tangent_frame(grad: &[f64], base: &[f64]) -> Result<TangentFrame> {
    check_dims(grad.len(), base.len())?;
    let g = check_grad(grad, base)?;
    let n = grad.len();
    let normal: Vec<f64> = grad.iter().map(|v| v / g).collect();
    let q = householder_frame(&normal);
    let tangent_basis = (0..n - 1)
        .map(|c| (0..n).map(|r| q[r * n + c]).collect())
        .collect();
    Ok(TangentFrame {
        base: base.to_vec(),
        normal,
        tangent_basis,
    })
}

impl TangentFrame {
    /// `I - ννᵀ`
    pub fn projector(&self) -> SymMatrix {
        let nu = &self.normal;
        SymMatrix::from_fn(nu.len(), |i, j| {
            (if i == j { 1.0 } else { 0.0 }) - nu[i] * nu[j]
        })
    }

    /// Largest deviation from orthonormality of `{ν, t_1, .., t_{n-1}}`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut all = vec![self.normal.clone()];
        all.extend(self.tangent_basis.iter().cloned());
        let mut worst = 0.0_f64;
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(a, b) - want).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{eval_jet3, parse_expr};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn split_examples() {
        let (t, n) = tangent_split(&[0.0, 1.0], &[3.0, 4.0]).unwrap();
        assert_eq!((t, n), (vec![3.0, 0.0], vec![0.0, 4.0]));

        let g = [0.3, -1.2, 2.0];
        let (t, n) = tangent_split(&g, &g).unwrap();
        assert!(t.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(n, g.to_vec());

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (t, n) = tangent_split(&[s, s], &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(t[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(t[1], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(n[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(n[1], 0.5, epsilon = 1e-15);

        assert!(matches!(
            tangent_split(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::VanishingGradient { .. })
        ));
    }

    #[test]
    fn hessian_form_examples() {
        let h = SymMatrix::diagonal(&[2.0, -2.0]);
        assert_eq!(hessian_form(&h, &[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(hessian_form(&h, &[0.0, 0.0], &[0.3, 1.0]).unwrap(), 0.0);
        assert_eq!(hessian_form(&h, &[0.0, 1.0], &[0.0, 1.0]).unwrap(), -2.0);
        assert!(hessian_form(&h, &[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn product_and_chain_examples() {
        let x = [1.0];
        let r = Jet3::variable(&x, 0);
        assert_eq!(product_hessian(&r, &r, &[1.0]).unwrap(), 2.0);

        let e = parse_expr("x1^3 - x2", 2).unwrap();
        let jr = eval_jet3(&e, &[0.4, 0.2]).unwrap();
        let one = Jet3::constant(2, 1.0);
        let xi = [0.7, -0.1];
        assert_eq!(product_hessian(&jr, &one, &xi).unwrap(), jr.hess.quad(&xi));
        assert_eq!(chain_hessian(&jr, 1.0, 0.0, &xi), jr.hess.quad(&xi));

        // boundary: r = 0 drops the H_h term
        let jb = Jet3::from_parts(0.0, jr.grad.clone(), jr.hess.clone(), jr.third_packed().to_vec());
        let h = eval_jet3(&parse_expr("2 + x1 * x2 + x2^2", 2).unwrap(), &[0.4, 0.2]).unwrap();
        let want = h.value * jb.hess.quad(&xi) + 2.0 * dot(&h.grad, &xi) * dot(&jb.grad, &xi);
        assert_eq!(product_hessian(&jb, &h, &xi).unwrap(), want);

        // χ(t) = K t² at r = 0
        let k = 3.0;
        let d = dot(&jb.grad, &xi);
        assert_eq!(chain_hessian(&jb, 0.0, 2.0 * k, &xi), 2.0 * k * d * d);

        // χ(t) = -log(-t) at t = -0.5
        let jm = Jet3::from_parts(-0.5, jr.grad.clone(), jr.hess.clone(), jr.third_packed().to_vec());
        let want = 2.0 * jm.hess.quad(&xi) + 4.0 * dot(&jm.grad, &xi).powi(2);
        assert_abs_diff_eq!(chain_hessian(&jm, 2.0, 4.0, &xi), want, epsilon = 1e-15);
        assert_abs_diff_eq!(jm.neg_log_neg().hess.quad(&xi), want, epsilon = 1e-14);
    }

    #[test]
    fn frame_examples() {
        let f = tangent_frame(&[0.0, 0.0, 2.0], &[0.0; 3]).unwrap();
        assert_eq!(f.normal, vec![0.0, 0.0, 1.0]);
        assert_eq!(f.tangent_basis, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);

        let f = tangent_frame(&[1.0, 0.0], &[0.0; 2]).unwrap();
        assert_eq!(f.normal, vec![1.0, 0.0]);
        assert_eq!(f.tangent_basis.len(), 1);
        assert_eq!(f.tangent_basis[0][0], 0.0);
        assert_eq!(f.tangent_basis[0][1].abs(), 1.0);

        assert!(tangent_frame(&[0.0, 1e-13], &[0.0; 2]).is_err());
    }

    #[test]
    fn householder_maps_last_axis_to_normal() {
        for nu in [vec![0.6, 0.8], vec![0.6, -0.8], vec![0.0, -1.0], vec![1.0, 0.0, 0.0]] {
            let q = householder_frame(&nu);
            let n = nu.len();
            for i in 0..n {
                assert_abs_diff_eq!(q[i * n + n - 1], nu[i], epsilon = 1e-15);
            }
        }
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, 3)
    }

    proptest! {
        #[test]
        fn frame_is_orthonormal(g in vec3()) {
            prop_assume!(norm(&g) > 1e-6);
            let f = tangent_frame(&g, &[0.0; 3]).unwrap();
            prop_assert!(f.orthonormality_defect() <= 1e-12);
        }

        #[test]
        fn split_is_a_projection(g in vec3(), xi in vec3()) {
            prop_assume!(norm(&g) > 1e-6);
            let (t, n) = tangent_split(&g, &xi).unwrap();
            prop_assert!(dot(&g, &t).abs() <= 1e-12 * (1.0 + norm(&g) * norm(&xi)));
            for k in 0..3 { prop_assert!((t[k] + n[k] - xi[k]).abs() <= 1e-12); }
            let (t2, n2) = tangent_split(&g, &t).unwrap();
            for k in 0..3 {
                prop_assert!((t2[k] - t[k]).abs() <= 1e-12);
                prop_assert!(n2[k].abs() <= 1e-12);
            }
        }

        #[test]
        fn bilinear_expansion(x in vec3(), xi in vec3()) {
            let r = parse_expr("x1^2*x2 - sin(x3) + x1*x3^3 + 1", 3).unwrap();
            let j = eval_jet3(&r, &x).unwrap();
            prop_assume!(norm(&j.grad) > 1e-6);
            let (t, n) = tangent_split(&j.grad, &xi).unwrap();
            let h = &j.hess;
            let lhs = h.quad(&xi);
            let rhs = h.quad(&t) + 2.0 * h.bilinear(&t, &n) + h.quad(&n);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }

        #[test]
        fn product_rule_matches_syntactic_product(x in vec3(), xi in vec3()) {
            let r = parse_expr("x1^2 - x2*x3 + 2*x3 - 1", 3).unwrap();
            let h = parse_expr("3 + x1*x2 + x3^2 - x2^3", 3).unwrap();
            let jr = eval_jet3(&r, &x).unwrap();
            let jh = eval_jet3(&h, &x).unwrap();
            let prod = eval_jet3(&h.clone().times(r.clone()), &x).unwrap();
            let want = prod.hess.quad(&xi);
            let got = product_hessian(&jr, &jh, &xi).unwrap();
            prop_assert!((got - want).abs() <= 1e-10 * (1.0 + want.abs()));
            // χ(t) = t² is the product with h = r
            let chain = chain_hessian(&jr, 2.0 * jr.value, 2.0, &xi);
            let sq = product_hessian(&jr, &jr, &xi).unwrap();
            prop_assert!((chain - sq).abs() <= 1e-10 * (1.0 + sq.abs()));
        }
    }
}
