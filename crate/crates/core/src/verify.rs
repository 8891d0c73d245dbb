//! Sampled convexity checks and identity residuals.
//!
//! Every check returns a [`Report`] naming its worst sample, so a failing
//! report can be reproduced by re-evaluating the quoted point and direction.
//! These are sampled verifications, not proofs.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::boundary::{hessian_delta_fd, hessian_delta_pair, default_fd_step, BoundaryPoint};
use crate::error::Result;
use crate::field::ScalarField;
use crate::geometry::{tangent_frame, tangent_split, TangentFrame};
use crate::jet::Jet3;
use crate::linalg::{dot, norm, SymMatrix};
use crate::sampling::{stream, unit_vector};
use crate::spec::DomainSpec;

/// Absolute floor for PSD / lower-bound checks.
pub const PSD_TOL: f64 = 1e-8;
/// Finite-difference vs closed-form Hessian identities.
pub const FD_TOL: f64 = 1e-4;
/// Random directions per sample, on top of the frame directions.
pub const EXTRA_DIRECTIONS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// pass ⇔ `worst_value ≥ -tolerance`
    LowerBound,
    /// pass ⇔ `|worst_value| ≤ tolerance`
    Identity,
    /// `worst_value` counts inconsistent samples; pass ⇔ it is 0
    Consistency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub check_name: String,
    pub kind: CheckKind,
    pub samples: usize,
    pub worst_value: f64,
    pub worst_point: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_direction: Option<Vec<f64>>,
    pub tolerance: f64,
    pub pass: bool,
    /// Samples skipped because evaluation failed (foot point, domain, ...).
    #[serde(default)]
    pub failures: usize,
    /// Estimated signed distance of the worst point to the boundary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_boundary_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Wall time; not serialized so report files stay reproducible.
    #[serde(skip)]
    pub runtime_ms: f64,
}

impl Report {
    /// Re-derives `pass` from the worst value.
    pub fn verdict(kind: CheckKind, worst: f64, tol: f64) -> bool {
        match kind {
            CheckKind::LowerBound => worst >= -tol,
            CheckKind::Identity => worst.abs() <= tol,
            CheckKind::Consistency => worst == 0.0,
        }
    }
}

/// Incremental builder for a [`Report`].
#[derive(Debug)]
pub struct Tracker {
    name: String,
    kind: CheckKind,
    tol: f64,
    start: Instant,
    samples: usize,
    failures: usize,
    worst: Option<(f64, Vec<f64>, Option<Vec<f64>>, Option<f64>)>,
    inconsistent: usize,
    extras: BTreeMap<String, f64>,
    note: Option<String>,
}

impl Tracker {
    pub fn new(name: &str, kind: CheckKind, tol: f64) -> Self {
        Self {
            name: name.to_string(),
            kind,
            tol,
            start: Instant::now(),
            samples: 0,
            failures: 0,
            worst: None,
            inconsistent: 0,
            extras: BTreeMap::new(),
            note: None,
        }
    }

    /// Records one evaluated value (lower-bound: signed; identity: residual).
    pub fn observe(&mut self, value: f64, point: &[f64], dir: Option<&[f64]>, dist: Option<f64>) {
        let better = match (&self.worst, self.kind) {
            (None, _) => true,
            (Some((w, ..)), CheckKind::LowerBound) => value < *w || value.is_nan(),
            (Some((w, ..)), _) => value.abs() > w.abs() || value.is_nan(),
        };
        if better {
            let v = if self.kind == CheckKind::Identity { value.abs() } else { value };
            self.worst = Some((v, point.to_vec(), dir.map(|d| d.to_vec()), dist));
        }
    }

    /// Counts one sample (call once per point, after its observations).
    pub fn sample(&mut self) {
        self.samples += 1;
    }

    pub fn fail(&mut self) {
        self.failures += 1;
    }

    /// Consistency checks: one sample, consistent or not.
    pub fn consistent(&mut self, ok: bool, point: &[f64], dist: Option<f64>) {
        self.samples += 1;
        if !ok {
            self.inconsistent += 1;
            if self.worst.is_none() {
                self.worst = Some((0.0, point.to_vec(), None, dist));
            }
        }
    }

    pub fn extra(&mut self, key: &str, v: f64) {
        self.extras.insert(key.to_string(), v);
    }

    pub fn extra_min(&mut self, key: &str, v: f64) {
        let e = self.extras.entry(key.to_string()).or_insert(v);
        *e = e.min(v);
    }

    pub fn extra_max(&mut self, key: &str, v: f64) {
        let e = self.extras.entry(key.to_string()).or_insert(v);
        *e = e.max(v);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.note = Some(s.into());
    }

    pub fn finish(self) -> Report {
        let runtime_ms = self.start.elapsed().as_secs_f64() * 1e3;
        let (mut worst_value, worst_point, worst_direction, worst_boundary_distance) =
            self.worst.unwrap_or((0.0, Vec::new(), None, None));
        if self.kind == CheckKind::Consistency {
            worst_value = self.inconsistent as f64;
        }
        let mut note = self.note;
        let pass = if self.samples == 0 {
            note.get_or_insert_with(|| "no samples could be evaluated".into());
            false
        } else {
            Report::verdict(self.kind, worst_value, self.tol)
        };
        Report {
            check_name: self.name,
            kind: self.kind,
            samples: self.samples,
            worst_value,
            worst_point,
            worst_direction,
            tolerance: self.tol,
            pass,
            failures: self.failures,
            worst_boundary_distance,
            extras: self.extras,
            note,
            runtime_ms,
        }
    }
}

/// Frame directions (tangent basis, normal) plus seeded random unit vectors.
pub fn directions(frame: &TangentFrame, seed: u64, index: u64) -> Vec<Vec<f64>> {
    let n = frame.normal.len();
    let mut out = frame.tangent_basis.clone();
    out.push(frame.normal.clone());
    let mut rng = stream(seed ^ 0xd1_4ec7, index);
    out.extend((0..EXTRA_DIRECTIONS).map(|_| unit_vector(&mut rng, n)));
    out
}

fn min_eig_with_vector(h: &SymMatrix) -> Result<(f64, Vec<f64>)> {
    let n = h.dim();
    let (vals, vecs) = h.eigen()?;
    Ok((vals[0], (0..n).map(|k| vecs[k * n]).collect()))
}

/// First-order estimate `r/|∇r|` of the signed distance.
fn distance_estimate(j: &Jet3) -> Option<f64> {
    let g = norm(&j.grad);
    (g > 0.0).then(|| j.value / g)
}

/// `min H_r(τ,τ)` over tangent-basis vectors at boundary samples.
pub fn check_tangential_convexity(spec: &DomainSpec, samples: &[BoundaryPoint]) -> Report {
    let mut t = Tracker::new("tangential_convexity", CheckKind::LowerBound, PSD_TOL);
    for p in samples {
        match spec.jet(&p.x) {
            Ok(j) => {
                for tau in &p.frame.tangent_basis {
                    t.observe(j.hess.quad(tau), &p.x, Some(tau), Some(0.0));
                }
                t.sample();
            }
            Err(_) => t.fail(),
        }
    }
    t.finish()
}

/// `min λ_min(H)` of a field over points.
pub fn check_full_convexity(field: &dyn ScalarField, points: &[Vec<f64>]) -> Report {
    check_full_convexity_named("full_convexity", field, points)
}

pub fn check_full_convexity_named(
    name: &str,
    field: &dyn ScalarField,
    points: &[Vec<f64>],
) -> Report {
    let mut t = Tracker::new(name, CheckKind::LowerBound, PSD_TOL);
    for x in points {
        match field.jet(x).and_then(|j| Ok((min_eig_with_vector(&j.hess)?, j))) {
            Ok(((lam, v), j)) => {
                t.observe(lam, x, Some(&v), distance_estimate(&j));
                t.sample();
            }
            Err(_) => t.fail(),
        }
    }
    t.finish()
}

/// `min σ̃(x)/r(x)` over points with `r(x) ≠ 0`: the multiplier relating the
/// transformed function to `r` must stay positive.
pub fn check_sign_consistency(
    spec: &DomainSpec,
    field: &dyn ScalarField,
    points: &[Vec<f64>],
) -> Report {
    let mut t = Tracker::new("multiplier_positivity", CheckKind::LowerBound, 0.0);
    for x in points {
        match (spec.value(x), field.value(x)) {
            (Ok(r), Ok(s)) => {
                if r.abs() > 1e-12 {
                    t.observe(s / r, x, None, None);
                }
                t.sample();
            }
            _ => t.fail(),
        }
    }
    t.finish()
}

/// `‖H_fd − H_series‖_F / (1 + ‖H_series‖_F)` on collar points.
pub fn check_geomseries(spec: &DomainSpec, points: &[Vec<f64>]) -> Report {
    let mut t = Tracker::new("geomseries", CheckKind::Identity, FD_TOL);
    for x in points {
        let res = hessian_delta_pair(spec, x).and_then(|(hs, _, fp)| {
            let hf = hessian_delta_fd(spec, x, default_fd_step(x))?;
            Ok((hf.sub(&hs).frobenius_norm() / (1.0 + hs.frobenius_norm()), fp.delta))
        });
        match res {
            Ok((v, d)) => {
                t.observe(v, x, None, Some(d));
                t.sample();
            }
            Err(_) => t.fail(),
        }
    }
    t.finish()
}

/// `| ‖∇δ‖ − 1 |` on collar points.
pub fn check_eikonal(spec: &DomainSpec, points: &[Vec<f64>]) -> Report {
    let mut t = Tracker::new("eikonal", CheckKind::Identity, 1e-10);
    for x in points {
        match crate::boundary::foot_point(spec, x) {
            Ok(fp) => {
                t.observe(norm(&fp.normal) - 1.0, x, None, Some(fp.delta));
                t.sample();
            }
            Err(_) => t.fail(),
        }
    }
    t.finish()
}

/// `‖H_series ∇δ‖` on collar points.
pub fn check_normal_annihilation(spec: &DomainSpec, points: &[Vec<f64>]) -> Report {
    let mut t = Tracker::new("normal_annihilation", CheckKind::Identity, PSD_TOL);
    for x in points {
        match hessian_delta_pair(spec, x) {
            Ok((hs, _, fp)) => {
                t.observe(norm(&hs.mul_vec(&fp.normal)), x, Some(&fp.normal), Some(fp.delta));
                t.sample();
            }
            Err(_) => t.fail(),
        }
    }
    t.finish()
}

/// `min [H_δ(ξ,ξ)(x) − ½ H_δ(ξ,ξ)(b(x))]` over exterior points and
/// directions.
pub fn check_half_bound(spec: &DomainSpec, points: &[Vec<f64>], seed: u64) -> Report {
    let mut t = Tracker::new("half_bound", CheckKind::LowerBound, PSD_TOL);
    for (i, x) in points.iter().enumerate() {
        let Ok((hx, hb, fp)) = hessian_delta_pair(spec, x) else {
            t.fail();
            continue;
        };
        if fp.delta <= 0.0 {
            t.fail();
            continue;
        }
        let Ok(frame) = tangent_frame(&fp.normal, &fp.b) else {
            t.fail();
            continue;
        };
        for xi in directions(&frame, seed, i as u64) {
            t.observe(hx.quad(&xi) - 0.5 * hb.quad(&xi), x, Some(&xi), Some(fp.delta));
        }
        t.sample();
    }
    t.finish()
}

fn psd(h: &SymMatrix, lam: f64) -> bool {
    lam >= -PSD_TOL * (1.0 + h.frobenius_norm())
}

/// Sample-wise agreement of "H_δ ⪰ 0" and "H_{−log(−δ)} ⪰ 0" at interior
/// points, with `H_{−log(−δ)} = H_δ/(−δ) + ∇δ∇δᵀ/δ²`.
pub fn check_log_convexity_equivalence(spec: &DomainSpec, points: &[Vec<f64>]) -> Report {
    let mut t = Tracker::new("log_convexity_equivalence", CheckKind::Consistency, 0.0);
    let (mut both_psd, mut both_fail) = (0.0, 0.0);
    for x in points {
        let Ok((hd, _, fp)) = hessian_delta_pair(spec, x) else {
            t.fail();
            continue;
        };
        let d = fp.delta;
        if d >= 0.0 {
            t.fail();
            continue;
        }
        let hl = hd
            .scaled(-1.0 / d)
            .add(&SymMatrix::sym_outer(1.0 / (d * d), &fp.normal, &fp.normal));
        let (Ok(la), Ok(lb)) = (hd.min_eigenvalue(), hl.min_eigenvalue()) else {
            t.fail();
            continue;
        };
        let (pa, pb) = (psd(&hd, la), psd(&hl, lb));
        match (pa, pb) {
            (true, true) => both_psd += 1.0,
            (false, false) => both_fail += 1.0,
            _ => {}
        }
        t.extra_min("min_eig_delta", la);
        t.extra_min("min_eig_log", lb);
        t.consistent(pa == pb, x, Some(d));
    }
    t.extra("both_psd", both_psd);
    t.extra("both_fail", both_fail);
    t.finish()
}

/// `M^{-1/2}` for `M = σ²I + ννᵀ`, `ν` a unit vector.
fn threshold_metric_inv_sqrt(sigma: f64, nu: &[f64]) -> SymMatrix {
    let a = 1.0 / sigma.abs();
    let b = 1.0 / (sigma * sigma + 1.0).sqrt();
    SymMatrix::from_fn(nu.len(), |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        a * (id - nu[i] * nu[j]) + b * nu[i] * nu[j]
    })
}

/// Smallest constants `(C, C̃)` at one interior point:
/// `H_{−log(−σ)} ⪰ −C|σ| I` and `H_σ ⪰ −C̃(σ² I + ννᵀ)`.
pub fn threshold_constants(j: &Jet3) -> Result<(f64, f64)> {
    let s = j.value;
    let hl = j.neg_log_neg().hess;
    let c = (-hl.min_eigenvalue()?).max(0.0) / s.abs();
    let g = norm(&j.grad);
    let nu: Vec<f64> = j.grad.iter().map(|v| v / g).collect();
    let m = threshold_metric_inv_sqrt(s, &nu).to_dense();
    let ct = (-j.hess.congruence(&m).min_eigenvalue()?).max(0.0);
    Ok((c, ct))
}

/// Slack of both threshold bounds at one point with the given constants.
fn threshold_slack(j: &Jet3, c: f64, ct: f64) -> Result<f64> {
    let s = j.value;
    let n = j.dim();
    let hl = j.neg_log_neg().hess.add(&SymMatrix::identity(n).scaled(c * s.abs()));
    let g = norm(&j.grad);
    let nu: Vec<f64> = j.grad.iter().map(|v| v / g).collect();
    let metric = SymMatrix::identity(n)
        .scaled(s * s)
        .add(&SymMatrix::sym_outer(1.0, &nu, &nu));
    let hs = j.hess.add(&metric.scaled(ct));
    Ok(hl.min_eigenvalue()?.min(hs.min_eigenvalue()?))
}

/// Fits `C` and `C̃` on `fit` interior points, then checks both bounds with
/// the constants inflated by 1 % on the `holdout` points.
pub fn check_threshold_equivalence(
    sigma: &dyn ScalarField,
    fit: &[Vec<f64>],
    holdout: &[Vec<f64>],
) -> Report {
    let mut t = Tracker::new("threshold_equivalence", CheckKind::LowerBound, PSD_TOL);
    let (mut c, mut ct) = (0.0_f64, 0.0_f64);
    let mut fitted = 0usize;
    for x in fit {
        let Ok(j) = sigma.jet(x) else { continue };
        if j.value >= 0.0 {
            continue;
        }
        if let Ok((a, b)) = threshold_constants(&j) {
            c = c.max(a);
            ct = ct.max(b);
            fitted += 1;
        }
    }
    t.extra("C", c);
    t.extra("C_tilde", ct);
    t.extra("fit_samples", fitted as f64);
    if fitted == 0 || !c.is_finite() || !ct.is_finite() {
        t.note("constants could not be fitted");
        return t.finish();
    }
    for x in holdout {
        match sigma.jet(x) {
            Ok(j) if j.value < 0.0 => match threshold_slack(&j, 1.01 * c, 1.01 * ct) {
                Ok(v) => {
                    t.observe(v, x, None, distance_estimate(&j));
                    t.sample();
                }
                Err(_) => t.fail(),
            },
            _ => t.fail(),
        }
    }
    t.finish()
}

/// `| ‖∇f‖ − 1 |` at boundary samples.
pub fn check_unit_gradient(name: &str, f: &dyn ScalarField, samples: &[BoundaryPoint]) -> Report {
    let mut t = Tracker::new(name, CheckKind::Identity, 1e-10);
    for p in samples {
        match f.jet(&p.x) {
            Ok(j) => {
                t.observe(norm(&j.grad) - 1.0, &p.x, None, Some(0.0));
                t.sample();
            }
            Err(_) => t.fail(),
        }
    }
    t.finish()
}

/// `|H_f(τ, ∇f)|` for tangent-basis `τ` at boundary samples.
pub fn check_mixed_terms(name: &str, f: &dyn ScalarField, samples: &[BoundaryPoint]) -> Report {
    let mut t = Tracker::new(name, CheckKind::Identity, PSD_TOL);
    for p in samples {
        match f.jet(&p.x) {
            Ok(j) => {
                for tau in &p.frame.tangent_basis {
                    t.observe(j.hess.bilinear(tau, &j.grad), &p.x, Some(tau), Some(0.0));
                }
                t.sample();
            }
            Err(_) => t.fail(),
        }
    }
    t.finish()
}

/// `H_{r0}(ξ,ξ) = |∇r|⁻¹ [H_r(ξᵀ,ξᵀ) − H_r(ξᴺ,ξᴺ)]` at boundary samples.
pub fn check_r0_hessian_formula(
    spec: &DomainSpec,
    r0: &dyn ScalarField,
    samples: &[BoundaryPoint],
    seed: u64,
) -> Report {
    let mut t = Tracker::new("r0_hessian_formula", CheckKind::Identity, PSD_TOL);
    for (i, p) in samples.iter().enumerate() {
        let (Ok(jr), Ok(j0)) = (spec.jet(&p.x), r0.jet(&p.x)) else {
            t.fail();
            continue;
        };
        let g = norm(&jr.grad);
        for xi in directions(&p.frame, seed, i as u64) {
            let Ok((xt, xn)) = tangent_split(&jr.grad, &xi) else {
                continue;
            };
            let rhs = (jr.hess.quad(&xt) - jr.hess.quad(&xn)) / g;
            t.observe(j0.hess.quad(&xi) - rhs, &p.x, Some(&xi), Some(0.0));
        }
        t.sample();
    }
    t.finish()
}

/// `H_{r1}(ξ,ξ) ≥ |∇r|⁻¹ H_r(ξᵀ,ξᵀ) + K⟨∇r0,ξ⟩²` at boundary samples.
pub fn check_r1_lower_bound(
    spec: &DomainSpec,
    r1: &dyn ScalarField,
    k: f64,
    samples: &[BoundaryPoint],
    seed: u64,
) -> Report {
    let mut t = Tracker::new("r1_lower_bound", CheckKind::LowerBound, PSD_TOL);
    for (i, p) in samples.iter().enumerate() {
        let (Ok(jr), Ok(j1)) = (spec.jet(&p.x), r1.jet(&p.x)) else {
            t.fail();
            continue;
        };
        let g = norm(&jr.grad);
        for xi in directions(&p.frame, seed, i as u64) {
            let Ok((xt, _)) = tangent_split(&jr.grad, &xi) else {
                continue;
            };
            let nu_xi = dot(p.normal(), &xi);
            let bound = jr.hess.quad(&xt) / g + k * nu_xi * nu_xi;
            t.observe(j1.hess.quad(&xi) - bound, &p.x, Some(&xi), Some(0.0));
        }
        t.sample();
    }
    t.finish()
}

/// `⟨∇H_σ(τ,τ), ∇σ⟩ = H_σ(τ,τ) H_σ(∇σ,∇σ) − |H_σ τ|²` at boundary samples,
/// for tangent-basis `τ`.
pub fn check_sigma_lemma(sigma: &dyn ScalarField, samples: &[BoundaryPoint]) -> Report {
    let mut t = Tracker::new("sigma_lemma", CheckKind::Identity, 1e-6);
    for p in samples {
        let Ok(j) = sigma.jet(&p.x) else {
            t.fail();
            continue;
        };
        for tau in &p.frame.tangent_basis {
            let lhs = j.third_form(tau, tau, &j.grad);
            let ht = j.hess.mul_vec(tau);
            let rhs = j.hess.quad(tau) * j.hess.quad(&j.grad) - dot(&ht, &ht);
            t.observe(lhs - rhs, &p.x, Some(tau), Some(0.0));
        }
        t.sample();
    }
    t.finish()
}

/// `H_σ(ξ,ξ) ≥ −C1 σ²|ξ|² − C2 ⟨∇σ,ξ⟩²/|∇σ|²` over points and directions.
pub fn check_quadratic_bound(
    sigma: &dyn ScalarField,
    c1: f64,
    c2: f64,
    points: &[Vec<f64>],
    seed: u64,
) -> Report {
    let mut t = Tracker::new("quadratic_lower_bound", CheckKind::LowerBound, PSD_TOL);
    t.extra("C1", c1);
    t.extra("C2", c2);
    for (i, x) in points.iter().enumerate() {
        let Ok(j) = sigma.jet(x) else {
            t.fail();
            continue;
        };
        let Ok(frame) = tangent_frame(&j.grad, x) else {
            t.fail();
            continue;
        };
        let gg = dot(&j.grad, &j.grad);
        for xi in directions(&frame, seed, i as u64) {
            let gx = dot(&j.grad, &xi);
            let v = j.hess.quad(&xi) + c1 * j.value * j.value * dot(&xi, &xi) + c2 * gx * gx / gg;
            t.observe(v, x, Some(&xi), distance_estimate(&j));
        }
        t.sample();
    }
    t.finish()
}
