//! Scalar fields evaluated as third-order jets.
//!
//! The transformed defining functions are built by composing these
//! evaluators; derivatives flow through the jet algebra rather than through
//! new symbolic expressions.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::GRAD_EPS;
use crate::jet::{third_len, Jet3};
use crate::linalg::{norm, SymMatrix};
use crate::spec::DomainSpec;

pub trait ScalarField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn jet(&self, x: &[f64]) -> Result<Jet3>;

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.jet(x)?.value)
    }

    /// Human-readable formula, e.g. `r0 + 2.5*r0^2`.
    fn describe(&self) -> String;
}

pub type Field = Arc<dyn ScalarField>;

/// The raw defining function `r`.
#[derive(Debug, Clone)]
pub struct Raw(pub DomainSpec);

impl ScalarField for Raw {
    fn dim(&self) -> usize {
        self.0.dim
    }
    fn jet(&self, x: &[f64]) -> Result<Jet3> {
        self.0.jet(x)
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.0.value(x)
    }
    fn describe(&self) -> String {
        format!("r = {}", self.0.expr)
    }
}

/// `r0 = r / |∇r|`.
///
/// `|∇r|` is assembled from the jets of the symbolic partials, so its own
/// third derivatives (fourth derivatives of `r`) are exact.
#[derive(Debug, Clone)]
pub struct Normalized(pub DomainSpec);

impl Normalized {
    pub fn grad_norm_jet(&self, x: &[f64]) -> Result<Jet3> {
        let n = self.0.dim;
        let mut sq = Jet3::constant(n, 0.0);
        for p in self.0.partial_jets().iter() {
            sq = sq.add(&p.eval(x)?.square());
        }
        if sq.value.sqrt() <= GRAD_EPS {
            return Err(Error::VanishingGradient {
                point: x.to_vec(),
                norm: sq.value.sqrt(),
            });
        }
        Ok(sq.sqrt())
    }
}

impl ScalarField for Normalized {
    fn dim(&self) -> usize {
        self.0.dim
    }
    fn jet(&self, x: &[f64]) -> Result<Jet3> {
        let g = self.grad_norm_jet(x)?;
        Ok(self.0.jet(x)?.div(&g))
    }
    fn describe(&self) -> String {
        "r0 = r/|grad r|".into()
    }
}

/// `f + K f²`.
#[derive(Debug, Clone)]
pub struct SquareBoost {
    pub inner: Field,
    pub k: f64,
}

impl ScalarField for SquareBoost {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn jet(&self, x: &[f64]) -> Result<Jet3> {
        let f = self.inner.jet(x)?;
        Ok(f.add(&f.square().scale(self.k)))
    }
    fn describe(&self) -> String {
        format!("({}) + K*(..)^2, K = {}", self.inner.describe(), self.k)
    }
}

/// `σ + B σ²` with `B(x) = α + β|x - c|²`.
#[derive(Debug, Clone)]
pub struct QuadraticWeight {
    pub inner: Field,
    pub alpha: f64,
    pub beta: f64,
    pub center: Vec<f64>,
}

impl QuadraticWeight {
    pub fn weight_jet(&self, x: &[f64]) -> Jet3 {
        let n = x.len();
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let nd = norm(&d);
        Jet3::from_parts(
            self.alpha + self.beta * nd * nd,
            d.iter().map(|v| 2.0 * self.beta * v).collect(),
            SymMatrix::identity(n).scaled(2.0 * self.beta),
            vec![0.0; third_len(n)],
        )
    }
}

impl ScalarField for QuadraticWeight {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn jet(&self, x: &[f64]) -> Result<Jet3> {
        let s = self.inner.jet(x)?;
        Ok(s.add(&self.weight_jet(x).mul(&s.square())))
    }
    fn describe(&self) -> String {
        format!(
            "s + (alpha + beta*|x-c|^2)*s^2 with s = {}, alpha = {}, beta = {}, c = {:?}",
            self.inner.describe(),
            self.alpha,
            self.beta,
            self.center
        )
    }
}
