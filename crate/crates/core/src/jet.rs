//! Third-order jets of scalar fields and their algebra.
//!
//! A [`Jet3`] is the value, gradient, Hessian and fully symmetric third
//! derivative tensor of a function at one point. Products, quotients and
//! compositions with scalar functions are propagated exactly (Leibniz and
//! Faà di Bruno through order three), which is how composite defining
//! functions such as `r / |∇r|` get their derivatives.

use crate::linalg::SymMatrix;

/// Number of stored third-order coefficients, `n(n+1)(n+2)/6`.
pub fn third_len(n: usize) -> usize {
    n * (n + 1) * (n + 2) / 6
}

/// Packed index of the canonical triple `i ≤ j ≤ k` (any order accepted).
pub fn third_index(i: usize, j: usize, k: usize) -> usize {
    let mut t = [i, j, k];
    t.sort_unstable();
    let [a, b, c] = t;
    // triples with largest entry < c come first, then pairs (a, b) ordered by b
    c * (c + 1) * (c + 2) / 6 + b * (b + 1) / 2 + a
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jet3 {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: SymMatrix,
    third: Vec<f64>,
}

impl Jet3 {
    pub fn constant(n: usize, value: f64) -> Self {
        Self {
            value,
            grad: vec![0.0; n],
            hess: SymMatrix::zeros(n),
            third: vec![0.0; third_len(n)],
        }
    }

    /// The coordinate function `x_index` (0-based) at `x`.
    pub fn variable(x: &[f64], index: usize) -> Self {
        let mut j = Self::constant(x.len(), x[index]);
        j.grad[index] = 1.0;
        j
    }

    pub fn from_parts(value: f64, grad: Vec<f64>, hess: SymMatrix, third: Vec<f64>) -> Self {
        let n = grad.len();
        assert_eq!(hess.dim(), n);
        assert_eq!(third.len(), third_len(n));
        Self {
            value,
            grad,
            hess,
            third,
        }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn third(&self, i: usize, j: usize, k: usize) -> f64 {
        self.third[third_index(i, j, k)]
    }

    pub fn set_third(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.third[third_index(i, j, k)] = v;
    }

    pub fn third_packed(&self) -> &[f64] {
        &self.third
    }

    /// `Σ_ijk f_ijk u_i v_j w_k`
    pub fn third_form(&self, u: &[f64], v: &[f64], w: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    s += self.third(i, j, k) * u[i] * v[j] * w[k];
                }
            }
        }
        s
    }

    fn map_canonical(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; third_len(n)];
        for k in 0..n {
            for j in 0..=k {
                for i in 0..=j {
                    out[third_index(i, j, k)] = f(i, j, k);
                }
            }
        }
        out
    }

    pub fn add(&self, o: &Jet3) -> Jet3 {
        Jet3 {
            value: self.value + o.value,
            grad: self.grad.iter().zip(&o.grad).map(|(a, b)| a + b).collect(),
            hess: self.hess.add(&o.hess),
            third: self.third.iter().zip(&o.third).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &Jet3) -> Jet3 {
        self.add(&o.scale(-1.0))
    }

    pub fn scale(&self, a: f64) -> Jet3 {
        Jet3 {
            value: a * self.value,
            grad: self.grad.iter().map(|g| a * g).collect(),
            hess: self.hess.scaled(a),
            third: self.third.iter().map(|t| a * t).collect(),
        }
    }

    pub fn add_scalar(&self, c: f64) -> Jet3 {
        let mut j = self.clone();
        j.value += c;
        j
    }

    pub fn mul(&self, o: &Jet3) -> Jet3 {
        let n = self.dim();
        let (f, g) = (self, o);
        let hess = SymMatrix::from_fn(n, |i, j| {
            f.hess.get(i, j) * g.value
                + f.grad[i] * g.grad[j]
                + f.grad[j] * g.grad[i]
                + f.value * g.hess.get(i, j)
        });
        let third = Self::map_canonical(n, |i, j, k| {
            f.third(i, j, k) * g.value
                + f.hess.get(i, j) * g.grad[k]
                + f.hess.get(i, k) * g.grad[j]
                + f.hess.get(j, k) * g.grad[i]
                + f.grad[i] * g.hess.get(j, k)
                + f.grad[j] * g.hess.get(i, k)
                + f.grad[k] * g.hess.get(i, j)
                + f.value * g.third(i, j, k)
        });
        Jet3 {
            value: f.value * g.value,
            grad: (0..n).map(|i| f.grad[i] * g.value + f.value * g.grad[i]).collect(),
            hess,
            third,
        }
    }

    /// `φ ∘ f` given `φ(f), φ'(f), φ''(f), φ'''(f)`.
    pub fn compose(&self, d: [f64; 4]) -> Jet3 {
        let n = self.dim();
        let f = self;
        let [d0, d1, d2, d3] = d;
        let hess = SymMatrix::from_fn(n, |i, j| d1 * f.hess.get(i, j) + d2 * f.grad[i] * f.grad[j]);
        let third = Self::map_canonical(n, |i, j, k| {
            d1 * f.third(i, j, k)
                + d2 * (f.hess.get(i, j) * f.grad[k]
                    + f.hess.get(i, k) * f.grad[j]
                    + f.hess.get(j, k) * f.grad[i])
                + d3 * f.grad[i] * f.grad[j] * f.grad[k]
        });
        Jet3 {
            value: d0,
            grad: f.grad.iter().map(|g| d1 * g).collect(),
            hess,
            third,
        }
    }

    pub fn recip(&self) -> Jet3 {
        let v = self.value;
        self.compose([1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v), -6.0 / (v * v * v * v)])
    }

    pub fn div(&self, o: &Jet3) -> Jet3 {
        self.mul(&o.recip())
    }

    pub fn sqrt(&self) -> Jet3 {
        let s = self.value.sqrt();
        let v = self.value;
        self.compose([s, 0.5 / s, -0.25 / (s * v), 0.375 / (s * v * v)])
    }

    pub fn square(&self) -> Jet3 {
        self.mul(self)
    }

    /// `-log(-f)`, defined where `f < 0`.
    pub fn neg_log_neg(&self) -> Jet3 {
        let t = self.value;
        self.compose([-(-t).ln(), -1.0 / t, 1.0 / (t * t), -2.0 / (t * t * t)])
    }

    /// Directional second derivative `H(ξ, ξ)`.
    pub fn hess_form(&self, xi: &[f64]) -> f64 {
        self.hess.quad(xi)
    }

    /// Largest absolute difference over all stored coefficients.
    pub fn max_abs_diff(&self, o: &Jet3) -> f64 {
        let mut m = (self.value - o.value).abs();
        for (a, b) in self.grad.iter().zip(&o.grad) {
            m = m.max((a - b).abs());
        }
        for (a, b) in self.hess.packed().iter().zip(o.hess.packed()) {
            m = m.max((a - b).abs());
        }
        for (a, b) in self.third.iter().zip(&o.third) {
            m = m.max((a - b).abs());
        }
        m
    }
}
