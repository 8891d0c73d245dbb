//! Implicitly defined domains `{r < 0}` and the built-in corpus.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr, SymbolicJet};
use crate::jet::Jet3;
use crate::linalg::norm;

/// Axis-aligned evaluation box.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::InvalidSpec("region bounds differ in length".into()));
        }
        if let Some(i) = (0..lo.len()).find(|&i| !(lo[i] < hi[i])) {
            return Err(Error::InvalidSpec(format!(
                "region is empty along coordinate {}: lo = {}, hi = {}",
                i + 1,
                lo[i],
                hi[i]
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn diameter(&self) -> f64 {
        let d: Vec<f64> = self.hi.iter().zip(&self.lo).map(|(h, l)| h - l).collect();
        norm(&d)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// Maps `u ∈ [0,1]^n` into the box.
    pub fn lerp(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(t, (l, h))| l + t * (h - l))
            .collect()
    }
}

/// Plain-data description of a domain, as read from a spec file.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecSource {
    pub name: String,
    pub dim: usize,
    pub expr: String,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub seed_point: Vec<f64>,
    pub collar_radius: Option<f64>,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 42;

/// A domain `Ω = {x : r(x) < 0}` restricted to a working region.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub name: String,
    pub dim: usize,
    pub expr: Expr,
    pub region: Region,
    pub seed_point: Vec<f64>,
    pub collar_radius: f64,
    pub seed: u64,
    jet: Arc<SymbolicJet>,
    partials: Arc<Vec<SymbolicJet>>,
}

impl DomainSpec {
    pub fn new(
        name: &str,
        expr: Expr,
        region: Region,
        seed_point: Vec<f64>,
        collar_radius: Option<f64>,
        seed: u64,
    ) -> Result<Self> {
        let dim = region.dim();
        if dim == 0 {
            return Err(Error::InvalidSpec("dimension must be at least 1".into()));
        }
        if seed_point.len() != dim {
            return Err(Error::InvalidSpec(format!(
                "seed point has {} coordinates, expected {dim}",
                seed_point.len()
            )));
        }
        if expr.max_var() > dim {
            return Err(Error::VariableOutOfRange {
                index: expr.max_var(),
                dim,
            });
        }
        let collar_radius = collar_radius.unwrap_or(0.1 * region.diameter());
        if !(collar_radius > 0.0 && collar_radius.is_finite()) {
            return Err(Error::InvalidSpec("collar radius must be positive".into()));
        }
        let jet = SymbolicJet::new(&expr, dim)?;
        let partials = (0..dim)
            .map(|i| SymbolicJet::new(jet.partial(i), dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: name.to_string(),
            dim,
            expr,
            region,
            seed_point,
            collar_radius,
            seed,
            jet: Arc::new(jet),
            partials: Arc::new(partials),
        })
    }

    pub fn from_source(src: &SpecSource) -> Result<Self> {
        if src.dim == 0 {
            return Err(Error::InvalidSpec("dim must be at least 1".into()));
        }
        for (what, len) in [
            ("region.lo", src.lo.len()),
            ("region.hi", src.hi.len()),
            ("seed_point", src.seed_point.len()),
        ] {
            if len != src.dim {
                return Err(Error::InvalidSpec(format!(
                    "{what} has length {len}, expected dim = {}",
                    src.dim
                )));
            }
        }
        let expr = parse_expr(&src.expr, src.dim)?;
        let region = Region::new(src.lo.clone(), src.hi.clone())?;
        Self::new(
            &src.name,
            expr,
            region,
            src.seed_point.clone(),
            src.collar_radius,
            src.seed,
        )
    }

    pub fn symbolic(&self) -> &Arc<SymbolicJet> {
        &self.jet
    }

    /// Symbolic jets of each `∂r/∂x_i`; together they carry fourth
    /// derivatives of `r`.
    pub fn partial_jets(&self) -> &Arc<Vec<SymbolicJet>> {
        &self.partials
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.expr.eval(x)
    }

    pub fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let v = self.expr.eval(x)?;
        let g = (0..self.dim)
            .map(|i| self.jet.partial(i).eval(x))
            .collect::<Result<Vec<_>>>()?;
        Ok((v, g))
    }

    pub fn jet(&self, x: &[f64]) -> Result<Jet3> {
        self.jet.eval(x)
    }
}

/// Names of the built-in specs.
pub const CORPUS: &[&str] = &[
    "halfspace",
    "circle",
    "ellipse",
    "superellipse4",
    "paper_example_s",
    "paper_example_s2",
    "peanut",
    "hyperbola",
];

/// Built-in spec by name.
pub fn corpus_source(name: &str) -> Option<SpecSource> {
    let (expr, lo, hi, seed_point, collar) = match name {
        "halfspace" => ("x2", [-1.0, -1.0], [1.0, 1.0], [0.0, 0.0], 0.3),
        "circle" => ("x1^2 + x2^2 - 1", [-1.5, -1.5], [1.5, 1.5], [1.0, 0.0], 0.6),
        "ellipse" => ("x1^2/4 + x2^2 - 1", [-2.5, -1.5], [2.5, 1.5], [0.0, 1.0], 0.3),
        "superellipse4" => ("x1^4 + x2^4 - 1", [-1.5, -1.5], [1.5, 1.5], [1.0, 0.0], 0.3),
        "paper_example_s" => ("x2 - x2^2 + x1^2", [-0.3, -0.3], [0.3, 0.3], [0.0, 0.0], 0.1),
        "paper_example_s2" => ("x2 + x2*x1^2 + x1^4", [-0.3, -0.3], [0.3, 0.3], [0.0, 0.0], 0.1),
        // pinched at x1 = 0: the boundary is concave there
        "peanut" => ("x1^4 - x1^2 + x2^2 - 0.05", [-1.2, -0.8], [1.2, 0.8], [0.0, 0.2], 0.1),
        // non-convex side of one hyperbola branch
        "hyperbola" => ("x1^2 - x2^2 - 1", [0.5, -1.0], [2.5, 1.0], [1.0, 0.0], 0.2),
        _ => return None,
    };
    Some(SpecSource {
        name: name.to_string(),
        dim: 2,
        expr: expr.to_string(),
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        seed_point: seed_point.to_vec(),
        collar_radius: Some(collar),
        seed: DEFAULT_SEED,
    })
}

pub fn corpus_spec(name: &str) -> Option<DomainSpec> {
    corpus_source(name).map(|s| DomainSpec::from_source(&s).expect("built-in spec is valid"))
}
