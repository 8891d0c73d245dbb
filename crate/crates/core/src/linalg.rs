//! Small dense symmetric matrices.
//!
//! Hessians here are at most ~10x10, so everything is plain loops over
//! packed lower-triangular storage. Eigenvalues come from cyclic Jacobi
//! rotations; inverses from an unpivoted LDLᵀ factorization.

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| alpha * a + b).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

#[inline]
fn tri(i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    i * (i + 1) / 2 + j
}

/// Symmetric `n x n` matrix in packed lower-triangular storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "SymMatrix needs n >= 1");
        Self {
            n,
            data: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    /// Builds from `f(i, j)` evaluated on the lower triangle only.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m.data[tri(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Symmetrizes a dense row-major matrix: entries become (a_ij + a_ji)/2.
    pub fn from_dense_symmetrized(n: usize, a: &[f64]) -> Self {
        assert_eq!(a.len(), n * n);
        Self::from_fn(n, |i, j| 0.5 * (a[i * n + j] + a[j * n + i]))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_dense_symmetrized(n, &flat)
    }

    /// `alpha (u vᵀ + v uᵀ) / 2`
    pub fn sym_outer(alpha: f64, u: &[f64], v: &[f64]) -> Self {
        Self::from_fn(u.len(), |i, j| 0.5 * alpha * (u[i] * v[j] + u[j] * v[i]))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[tri(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[tri(i, j)] = v;
    }

    pub fn packed(&self) -> &[f64] {
        &self.data
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = self.get(i, j);
            }
        }
        a
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul_vec(y))
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n);
        SymMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        self.add(&other.scaled(-1.0))
    }

    pub fn scaled(&self, alpha: f64) -> SymMatrix {
        SymMatrix {
            n: self.n,
            data: self.data.iter().map(|a| alpha * a).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.get(i, j).powi(2);
            }
        }
        s.sqrt()
    }

    /// `Qᵀ A Q` for a dense row-major `n x n` matrix `Q`.
    pub fn congruence(&self, q: &[f64]) -> SymMatrix {
        let n = self.n;
        let a = self.to_dense();
        let aq = matmul(n, &a, q);
        let qt = transpose(n, q);
        SymMatrix::from_dense_symmetrized(n, &matmul(n, &qt, &aq))
    }

    fn check_finite(&self) -> Result<()> {
        for i in 0..self.n {
            for j in 0..=i {
                if !self.get(i, j).is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    /// Eigenvalues (ascending) and the matching eigenvectors as columns of a
    /// row-major matrix.
    pub fn eigen(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_finite()?;
        Ok(jacobi_eigen(self))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.eigen()?.0)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        min_eigenvalue(self)
    }

    /// Spectral radius.
    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(self
            .eigenvalues()?
            .into_iter()
            .fold(0.0_f64, |m, l| m.max(l.abs())))
    }
}

pub(crate) fn matmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

pub(crate) fn transpose(n: usize, a: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

fn jacobi_eigen(m: &SymMatrix) -> (Vec<f64>, Vec<f64>) {
    const MAX_SWEEPS: usize = 100;
    let n = m.n;
    let mut a = m.to_dense();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q].powi(2);
            }
        }
        if off.sqrt() <= f64::EPSILON * 1e-2 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[k * n + col] = v[k * n + src];
        }
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &SymMatrix) -> Result<f64> {
    Ok(m.eigenvalues()?[0])
}

/// LDLᵀ factorization without pivoting. Returns `None` on a zero pivot.
fn ldlt(m: &SymMatrix) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = m.n;
    let mut l = vec![0.0f64; n * n];
    let mut d = vec![0.0; n];
    for j in 0..n {
        let mut dj = m.get(j, j);
        for k in 0..j {
            dj -= l[j * n + k].powi(2) * d[k];
        }
        if dj == 0.0 || !dj.is_finite() {
            return None;
        }
        d[j] = dj;
        l[j * n + j] = 1.0;
        for i in (j + 1)..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k] * d[k];
            }
            l[i * n + j] = s / dj;
        }
    }
    Some((l, d))
}

fn ldlt_solve(n: usize, l: &[f64], d: &[f64], b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
    }
    for i in 0..n {
        y[i] /= d[i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l[k * n + i] * y[k];
        }
    }
    y
}

/// `h (I + delta h)⁻¹`, symmetrized.
pub fn shifted_inverse_apply(h: &SymMatrix, delta: f64) -> Result<SymMatrix> {
    h.check_finite()?;
    if !delta.is_finite() {
        return Err(Error::NonFinite { row: 0, col: 0 });
    }
    let n = h.n;
    let shifted = SymMatrix::identity(n).add(&h.scaled(delta));
    let sigma_min = shifted
        .eigenvalues()?
        .into_iter()
        .fold(f64::INFINITY, |m, l| m.min(l.abs()));
    if sigma_min <= 1e-12 {
        return Err(Error::SingularShift { sigma_min });
    }
    let (l, d) = ldlt(&shifted).ok_or(Error::SingularShift { sigma_min })?;
    // columns of the inverse
    let mut inv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = ldlt_solve(n, &l, &d, &e);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    let prod = matmul(n, &h.to_dense(), &inv);
    Ok(SymMatrix::from_dense_symmetrized(n, &prod))
}

/// `h · Σ_{m < terms} (-delta h)^m`.
pub fn neumann_partial_sum(h: &SymMatrix, delta: f64, terms: usize) -> Result<SymMatrix> {
    h.check_finite()?;
    if !delta.is_finite() {
        return Err(Error::NonFinite { row: 0, col: 0 });
    }
    let terms = terms.max(1);
    let n = h.n;
    let a = h.to_dense();
    let step: Vec<f64> = a.iter().map(|v| -delta * v).collect();
    let mut power = vec![0.0; n * n];
    for i in 0..n {
        power[i * n + i] = 1.0;
    }
    let mut sum = power.clone();
    for _ in 1..terms {
        power = matmul(n, &power, &step);
        sum.iter_mut().zip(&power).for_each(|(s, p)| *s += p);
    }
    Ok(SymMatrix::from_dense_symmetrized(n, &matmul(n, &a, &sum)))
}

/// Dense solve `A x = b` with partial pivoting; `a` is row-major `n x n`.
pub fn solve_dense(n: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))?;
        if m[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            x.swap(piv, col);
        }
        for i in (col + 1)..n {
            let f = m[i * n + col] / m[col * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[i * n + k] -= f * m[col * n + k];
            }
            x[i] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= m[i * n + k] * x[k];
        }
        x[i] = s / m[i * n + i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
