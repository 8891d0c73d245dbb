//! Constructions of convex defining functions near a boundary point.
//!
//! The main pipeline is `r → r0 = r/|∇r| → r1 = r0 + K r0² → σ̃ = σ + B σ²`
//! with `B(x) = α + β|x − c|²`. Each stage is verified on samples; the last
//! one runs inside a loop that doubles `(α, β)` and halves the neighborhood
//! until the sampled Hessian of `σ̃` is positive semidefinite.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boundary::{project_to_boundary, sample_boundary_near, BoundaryPoint, MAX_NEWTON};
use crate::error::{Error, Result};
use crate::field::{Field, Normalized, QuadraticWeight, Raw, ScalarField, SquareBoost};
use crate::geometry::{householder_frame, tangent_frame, GRAD_EPS};
use crate::linalg::{axpy, dot, norm, sub, transpose, SymMatrix};
use crate::sampling::{stream, uniform_ball};
use crate::spec::DomainSpec;
use crate::verify::{
    check_full_convexity_named, check_mixed_terms, check_quadratic_bound, check_r0_hessian_formula,
    check_r1_lower_bound, check_sign_consistency, check_tangential_convexity,
    check_unit_gradient, directions, Report,
};

/// Default multiplier applied to every sampled constant.
pub const SAFETY: f64 = 1.25;
/// Floor for `K`, `α`, `β`.
pub const CONSTANT_FLOOR: f64 = 1e-3;
/// Tangential margin above which the normalization step is skipped.
pub const FAST_PATH_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Normalized,
    BoundaryConvex,
    FullyConvex,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvexificationResult {
    pub transformed: Field,
    pub constants: Constants,
    pub stage: Stage,
    pub reports: Vec<Report>,
    /// Radius of the neighborhood the final verification ran on.
    pub patch_radius: Option<f64>,
    /// The boundary-convex function `σ` that `transformed` was built from.
    pub sigma: Option<Field>,
    /// Points of the final verification.
    pub samples: Vec<Vec<f64>>,
}

impl ConvexificationResult {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

#[derive(Debug, Clone)]
pub struct ConvexifyConfig {
    pub safety: f64,
    pub floor: f64,
    /// Boundary samples used to pick `K` and for the boundary checks.
    pub boundary_samples: usize,
    /// Random points of the verification neighborhood.
    pub patch_samples: usize,
    /// Starting neighborhood radius; defaults to the spec collar.
    pub initial_radius: Option<f64>,
    pub max_shrinks: usize,
    pub max_doublings: usize,
    pub seed: u64,
}

impl Default for ConvexifyConfig {
    fn default() -> Self {
        Self {
            safety: SAFETY,
            floor: CONSTANT_FLOOR,
            boundary_samples: 32,
            patch_samples: 200,
            initial_radius: None,
            max_shrinks: 8,
            max_doublings: 10,
            seed: crate::spec::DEFAULT_SEED,
        }
    }
}

/// `r0 = r/|∇r|`, checked for unit gradient and vanishing mixed terms on
/// the boundary samples.
pub fn normalize_r0(spec: &DomainSpec, samples: &[BoundaryPoint]) -> Result<ConvexificationResult> {
    let r0 = Normalized(spec.clone());
    for p in samples {
        r0.jet(&p.x)?;
    }
    let reports = vec![
        check_unit_gradient("r0_unit_gradient", &r0, samples),
        check_mixed_terms("r0_mixed_terms", &r0, samples),
        check_r0_hessian_formula(spec, &r0, samples, spec.seed),
    ];
    Ok(ConvexificationResult {
        transformed: Arc::new(r0),
        constants: Constants::default(),
        stage: Stage::Normalized,
        reports,
        patch_radius: None,
        sigma: None,
        samples: Vec::new(),
    })
}

/// `K = safety · max(floor, max_p |H_r(ν,ν)| / |∇r|)` over boundary samples.
///
/// On the boundary `H_{r0}(ν,ν) = −H_r(ν,ν)/|∇r|` and the mixed terms vanish,
/// so any `K ≥ H_r(ν,ν)/|∇r|` makes `r0 + K r0²` satisfy
/// `H_{r1}(ξ,ξ) ≥ |∇r|⁻¹H_r(ξᵀ,ξᵀ) + K⟨ν,ξ⟩²`.
pub fn choose_k(spec: &DomainSpec, samples: &[BoundaryPoint], safety: f64) -> Result<f64> {
    choose_k_with_floor(spec, samples, safety, CONSTANT_FLOOR)
}

pub fn choose_k_with_floor(
    spec: &DomainSpec,
    samples: &[BoundaryPoint],
    safety: f64,
    floor: f64,
) -> Result<f64> {
    let mut worst = 0.0_f64;
    for p in samples {
        let j = spec.jet(&p.x)?;
        worst = worst.max(j.hess.quad(p.normal()).abs() / norm(&j.grad));
    }
    Ok(safety * worst.max(floor))
}

/// `r1 = r0 + K r0²`, checked on boundary samples.
pub fn square_boost(
    spec: &DomainSpec,
    r0: &ConvexificationResult,
    k: f64,
    samples: &[BoundaryPoint],
) -> Result<ConvexificationResult> {
    if !(k > 0.0) {
        return Err(Error::InvalidSpec(format!("K must be positive, got {k}")));
    }
    let r1 = SquareBoost {
        inner: r0.transformed.clone(),
        k,
    };
    let pts: Vec<Vec<f64>> = samples.iter().map(|p| p.x.clone()).collect();
    let reports = vec![
        check_full_convexity_named("r1_boundary_psd", &r1, &pts),
        check_r1_lower_bound(spec, &r1, k, samples, spec.seed),
        check_unit_gradient("r1_unit_gradient", &r1, samples),
    ];
    Ok(ConvexificationResult {
        transformed: Arc::new(r1),
        constants: Constants {
            k: Some(k),
            ..Default::default()
        },
        stage: Stage::BoundaryConvex,
        reports,
        patch_radius: None,
        sigma: None,
        samples: pts,
    })
}

/// `min H_r(τ,τ)` over unit tangent-basis vectors of the samples.
pub fn strong_convexity_margin(spec: &DomainSpec, samples: &[BoundaryPoint]) -> Result<f64> {
    let mut m = f64::INFINITY;
    for p in samples {
        let j = spec.jet(&p.x)?;
        for tau in &p.frame.tangent_basis {
            m = m.min(j.hess.quad(tau) / dot(tau, tau));
        }
    }
    Ok(m)
}

/// `K` for `r + K r²` on a strongly convex boundary.
///
/// With `ξ = τ + sν`, `H_r(ξ,ξ) ≥ m|τ|² − 2L|τ||s| − L s²` and
/// `2L|τ||s| ≤ m|τ|² + L²s²/m`, so `2K|∇r|² ≥ L + L²/m` suffices.
pub fn fast_path_k(
    spec: &DomainSpec,
    samples: &[BoundaryPoint],
    margin: f64,
    safety: f64,
) -> Result<f64> {
    let mut k = 0.0_f64;
    for p in samples {
        let j = spec.jet(&p.x)?;
        let l = j.hess.spectral_radius()?;
        let gg = dot(&j.grad, &j.grad);
        k = k.max((l + l * l / margin) / (2.0 * gg));
    }
    Ok(safety * k.max(CONSTANT_FLOOR))
}

/// Sampled `(C1, C2)` for `H_σ(ξ,ξ) ≥ −C1 σ²|ξ|² − C2 ⟨∇σ,ξ⟩²/|∇σ|²`.
///
/// `C1` comes from the tangential block at each point, `C2` from the
/// remaining deficit over the sampled directions.
pub fn estimate_c1_c2(sigma: &dyn ScalarField, points: &[Vec<f64>], seed: u64) -> (f64, f64) {
    let jets: Vec<_> = points
        .iter()
        .filter_map(|x| sigma.jet(x).ok().map(|j| (x, j)))
        .filter(|(_, j)| j.value.abs() > 1e-8 && norm(&j.grad) > GRAD_EPS)
        .collect();
    let mut c1 = 0.0_f64;
    for (x, j) in &jets {
        let Ok(frame) = tangent_frame(&j.grad, x) else { continue };
        let tb = &frame.tangent_basis;
        if tb.is_empty() {
            continue;
        }
        let block = SymMatrix::from_fn(tb.len(), |a, b| j.hess.bilinear(&tb[a], &tb[b]));
        if let Ok(lam) = block.min_eigenvalue() {
            c1 = c1.max(-lam / (j.value * j.value));
        }
    }
    let mut c2 = 0.0_f64;
    for (i, (x, j)) in jets.iter().enumerate() {
        let Ok(frame) = tangent_frame(&j.grad, x) else { continue };
        let gg = dot(&j.grad, &j.grad);
        for xi in directions(&frame, seed, i as u64) {
            let gx = dot(&j.grad, &xi);
            let b = gx * gx / gg;
            if b > 1e-12 {
                let v = j.hess.quad(&xi) + c1 * j.value * j.value * dot(&xi, &xi);
                c2 = c2.max(-v / b);
            }
        }
    }
    (c1, c2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaBeta {
    pub alpha: f64,
    pub beta: f64,
    pub c1: f64,
    pub c2: f64,
}

/// `β = 2 C1 · safety`, `α = (7 β m1 + C2/m2) · safety`, floored, where
/// `m1 = radius²` bounds `|x − c|²` and `m2 = min |∇σ|²` on the points.
pub fn choose_alpha_beta(
    sigma: &dyn ScalarField,
    points: &[Vec<f64>],
    radius: f64,
    config: &ConvexifyConfig,
) -> AlphaBeta {
    let (c1, c2) = estimate_c1_c2(sigma, points, config.seed);
    let m1 = radius * radius;
    let m2 = points
        .iter()
        .filter_map(|x| sigma.jet(x).ok())
        .map(|j| dot(&j.grad, &j.grad))
        .fold(f64::INFINITY, f64::min);
    let beta = (2.0 * c1 * config.safety).max(config.floor);
    let alpha = ((7.0 * beta * m1 + c2 / m2) * config.safety).max(config.floor);
    AlphaBeta { alpha, beta, c1, c2 }
}

/// Verification points of the ball `B(center, radius)`: random interior
/// points, boundary samples, and points along the normal line.
pub fn patch_points(
    center: &BoundaryPoint,
    radius: f64,
    boundary: &[BoundaryPoint],
    count: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let n = center.x.len();
    let mut pts: Vec<Vec<f64>> = (0..count as u64)
        .map(|i| axpy(radius, &uniform_ball(&mut stream(seed ^ 0xba11, i), n), &center.x))
        .collect();
    pts.extend(boundary.iter().map(|p| p.x.clone()));
    for k in 1..=8 {
        let t = radius * k as f64 / 8.0;
        pts.push(axpy(t, center.normal(), &center.x));
        pts.push(axpy(-t, center.normal(), &center.x));
    }
    pts
}

/// The boundary-convex stage `σ` on a patch, with its checks.
fn boundary_convex_stage(
    spec: &DomainSpec,
    samples: &[BoundaryPoint],
    config: &ConvexifyConfig,
) -> Result<(Field, f64, Vec<Report>)> {
    let margin = strong_convexity_margin(spec, samples)?;
    if margin > FAST_PATH_MARGIN {
        let k = fast_path_k(spec, samples, margin, config.safety)?;
        let sigma = SquareBoost {
            inner: Arc::new(Raw(spec.clone())),
            k,
        };
        let pts: Vec<Vec<f64>> = samples.iter().map(|p| p.x.clone()).collect();
        let reports = vec![check_full_convexity_named("sigma_boundary_psd", &sigma, &pts)];
        return Ok((Arc::new(sigma), k, reports));
    }
    let r0 = normalize_r0(spec, samples)?;
    let k = choose_k_with_floor(spec, samples, config.safety, config.floor)?;
    let r1 = square_boost(spec, &r0, k, samples)?;
    let mut reports = r0.reports;
    reports.extend(r1.reports);
    Ok((r1.transformed, k, reports))
}

/// Outcome of [`full_convexify`] before deciding success: the last attempted
/// construction and whether its verification passed.
#[derive(Debug, Clone)]
pub struct Attempt {
    pub result: ConvexificationResult,
    pub verified: bool,
}

/// Runs the full pipeline around `center`, shrinking the neighborhood and
/// doubling `(α, β)` within the budgets of `config`.
pub fn try_full_convexify(
    spec: &DomainSpec,
    center: &BoundaryPoint,
    config: &ConvexifyConfig,
) -> Result<Attempt> {
    let mut radius = config.initial_radius.unwrap_or(spec.collar_radius);
    let mut last: Option<ConvexificationResult> = None;
    for _ in 0..=config.max_shrinks {
        let mut samples = vec![center.clone()];
        samples.extend(sample_boundary_near(
            spec,
            &center.x,
            radius,
            config.boundary_samples.saturating_sub(1).max(1),
            config.seed,
        )?);
        let tangential = check_tangential_convexity(spec, &samples);
        if !tangential.pass {
            last = Some(ConvexificationResult {
                transformed: Arc::new(Raw(spec.clone())),
                constants: Constants::default(),
                stage: Stage::Normalized,
                reports: vec![tangential],
                patch_radius: Some(radius),
                sigma: None,
                samples: Vec::new(),
            });
            radius *= 0.5;
            continue;
        }
        let (sigma, k, stage_reports) = boundary_convex_stage(spec, &samples, config)?;
        let points = patch_points(center, radius, &samples, config.patch_samples, config.seed);
        let ab = choose_alpha_beta(sigma.as_ref(), &points, radius, config);
        let quad = check_quadratic_bound(sigma.as_ref(), ab.c1, ab.c2, &points, config.seed);
        let (mut alpha, mut beta) = (ab.alpha, ab.beta);
        for _ in 0..=config.max_doublings {
            let st = QuadraticWeight {
                inner: sigma.clone(),
                alpha,
                beta,
                center: center.x.clone(),
            };
            let full = check_full_convexity_named("sigma_tilde_full_convexity", &st, &points);
            let sign = check_sign_consistency(spec, &st, &points);
            let (full_ok, sign_ok) = (full.pass, sign.pass);
            let mut reports = vec![tangential.clone()];
            reports.extend(stage_reports.iter().cloned());
            reports.push(quad.clone());
            reports.push(full);
            reports.push(sign);
            let result = ConvexificationResult {
                transformed: Arc::new(st),
                constants: Constants {
                    k: Some(k),
                    alpha: Some(alpha),
                    beta: Some(beta),
                },
                stage: Stage::FullyConvex,
                reports,
                patch_radius: Some(radius),
                sigma: Some(sigma.clone()),
                samples: points.clone(),
            };
            if result.passed() {
                return Ok(Attempt {
                    result,
                    verified: true,
                });
            }
            last = Some(result);
            if !sign_ok || full_ok {
                // larger weights only make the multiplier worse
                break;
            }
            alpha *= 2.0;
            beta *= 2.0;
        }
        radius *= 0.5;
    }
    Ok(Attempt {
        result: last.expect("at least one attempt"),
        verified: false,
    })
}

/// [`try_full_convexify`] that reports exhausted budgets as an error naming
/// the worst offender.
pub fn full_convexify(
    spec: &DomainSpec,
    center: &BoundaryPoint,
    config: &ConvexifyConfig,
) -> Result<ConvexificationResult> {
    let a = try_full_convexify(spec, center, config)?;
    if a.verified {
        return Ok(a.result);
    }
    let worst = a.result.reports.iter().find(|r| !r.pass).expect("a failing report");
    Err(Error::Verification(format!(
        "{} failed: worst value {:e} at {:?}",
        worst.check_name, worst.worst_value, worst.worst_point
    )))
}

/// Projects a user-supplied center onto the boundary.
pub fn center_point(spec: &DomainSpec, x: &[f64]) -> Result<BoundaryPoint> {
    project_to_boundary(spec, x)
}

/// Local graph representation `ρ(z) = z_n − f(z')` of the boundary in
/// rotated coordinates `z = R(x − p)`, where `R ∇r(p) ∥ +e_n`.
#[derive(Debug, Clone)]
pub struct IftGraph {
    pub center: BoundaryPoint,
    /// Row-major orthogonal `R` with `R ν = e_n`.
    pub rotation: Vec<f64>,
    pub patch_radius: f64,
    spec: DomainSpec,
}

/// Derivatives of the graph function at `(z', f(z'))`, all in rotated
/// coordinates.
#[derive(Debug, Clone)]
pub struct GraphDerivatives {
    pub f: f64,
    pub grad_f: Vec<f64>,
    pub hess_f: SymMatrix,
    /// `(ρ_{z_1}, …, ρ_{z_n})` with `ρ_{z_n} = 1`.
    pub grad_rho: Vec<f64>,
    pub hess_rho: SymMatrix,
    /// `∂r̃/∂z_n` at the graph point.
    pub r_n: f64,
    /// Hessian of `r̃(z) = r(p + Rᵀz)` at the graph point.
    pub hess_r: SymMatrix,
}

impl IftGraph {
    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    /// `x = p + Rᵀ z`
    pub fn to_x(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| self.center.x[i] + (0..n).map(|k| self.rotation[k * n + i] * z[k]).sum::<f64>())
            .collect()
    }

    /// `z = R (x − p)`
    pub fn to_z(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let d = sub(x, &self.center.x);
        (0..n)
            .map(|i| (0..n).map(|k| self.rotation[i * n + k] * d[k]).sum())
            .collect()
    }

    fn point(&self, zp: &[f64], t: f64) -> Vec<f64> {
        let mut z = zp.to_vec();
        z.push(t);
        self.to_x(&z)
    }

    /// `f(z')`: scalar Newton in `z_n` from 0 until `|r| ≤ 1e-12`.
    pub fn solve_f(&self, zp: &[f64]) -> Result<f64> {
        let n = self.dim();
        let mut t = 0.0;
        let mut last = f64::INFINITY;
        for _ in 0..=MAX_NEWTON {
            let x = self.point(zp, t);
            let (r, g) = self.spec.value_grad(&x)?;
            last = r.abs();
            if last <= 1e-12 {
                return Ok(t);
            }
            let rt: f64 = (0..n).map(|i| g[i] * self.rotation[(n - 1) * n + i]).sum();
            if !(rt > GRAD_EPS) {
                break;
            }
            t -= r / rt;
        }
        Err(Error::NoConvergence {
            iterations: MAX_NEWTON,
            residual: last,
        })
    }

    pub fn derivatives(&self, zp: &[f64]) -> Result<GraphDerivatives> {
        let n = self.dim();
        let m = n - 1;
        let f = self.solve_f(zp)?;
        let j = self.spec.jet(&self.point(zp, f))?;
        // r̃ = r ∘ (p + Rᵀ·): ∇r̃ = R∇r, H_r̃ = R H Rᵀ
        let g: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|k| self.rotation[i * n + k] * j.grad[k]).sum())
            .collect();
        let h = j.hess.congruence(&transpose(n, &self.rotation));
        let r_n = g[n - 1];
        let grad_f: Vec<f64> = (0..m).map(|i| -g[i] / r_n).collect();
        // differentiate r̃(z', f(z')) = 0 twice
        let hess_f = SymMatrix::from_fn(m, |a, b| {
            -(h.get(a, b)
                + h.get(a, n - 1) * grad_f[b]
                + h.get(b, n - 1) * grad_f[a]
                + h.get(n - 1, n - 1) * grad_f[a] * grad_f[b])
                / r_n
        });
        let mut grad_rho: Vec<f64> = grad_f.iter().map(|v| -v).collect();
        grad_rho.push(1.0);
        let hess_rho =
            SymMatrix::from_fn(n, |a, b| if a < m && b < m { -hess_f.get(a, b) } else { 0.0 });
        Ok(GraphDerivatives {
            f,
            grad_f,
            hess_f,
            grad_rho,
            hess_rho,
            r_n,
            hess_r: h,
        })
    }

    /// Hessian of `ρ` in the original coordinates at `x`.
    pub fn rho_hessian_x(&self, x: &[f64]) -> Result<SymMatrix> {
        let z = self.to_z(x);
        let d = self.derivatives(&z[..self.dim() - 1])?;
        Ok(d.hess_rho.congruence(&self.rotation))
    }

    /// `H_ρ(ξ,ξ) − r_n⁻¹ H_r̃(Tξ,Tξ)` with `T(ξ) = (ξ', −Σ ρ_j ξ_j)`.
    pub fn graph_identity_residual(&self, zp: &[f64], xi: &[f64]) -> Result<f64> {
        let n = self.dim();
        let d = self.derivatives(zp)?;
        let mut t = xi.to_vec();
        t[n - 1] = -(0..n - 1).map(|j| d.grad_rho[j] * xi[j]).sum::<f64>();
        Ok(d.hess_rho.quad(xi) - d.hess_r.quad(&t) / d.r_n)
    }
}

/// Builds the graph representation around `p` and finds a patch radius on
/// which `f` can be solved on a grid.
pub fn ift_local(spec: &DomainSpec, p: &BoundaryPoint) -> Result<IftGraph> {
    let n = spec.dim;
    let (_, g) = spec.value_grad(&p.x)?;
    let frame = tangent_frame(&g, &p.x)?;
    let q = householder_frame(&frame.normal);
    let mut graph = IftGraph {
        center: BoundaryPoint {
            x: p.x.clone(),
            frame,
        },
        rotation: transpose(n, &q),
        patch_radius: spec.collar_radius,
        spec: spec.clone(),
    };
    let per_axis: usize = if n <= 3 { 9 } else { 5 };
    let mut radius = spec.collar_radius;
    for _ in 0..=8 {
        graph.patch_radius = radius;
        if grid(n - 1, per_axis, radius).iter().all(|zp| {
            graph
                .solve_f(zp)
                .map(|f| f.abs() <= radius && graph.derivatives(zp).is_ok())
                .unwrap_or(false)
        }) {
            return Ok(graph);
        }
        radius *= 0.5;
    }
    Err(Error::NoConvergence {
        iterations: MAX_NEWTON,
        residual: f64::NAN,
    })
}

fn grid(dim: usize, per_axis: usize, radius: f64) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        let mut next = Vec::new();
        for v in &out {
            for k in 0..per_axis {
                let t = -radius + 2.0 * radius * k as f64 / (per_axis - 1) as f64;
                let mut w = v.clone();
                w.push(t);
                next.push(w);
            }
        }
        out = next;
    }
    out
}

/// Min-eigenvalue rows `(x, λ_min(H_before), λ_min(H_after))` for plotting.
pub fn min_eig_rows(
    before: &dyn ScalarField,
    after: &dyn ScalarField,
    points: &[Vec<f64>],
) -> Vec<(Vec<f64>, f64, f64)> {
    points
        .iter()
        .filter_map(|x| {
            let b = before.jet(x).ok()?.hess.min_eigenvalue().ok()?;
            let a = after.jet(x).ok()?.hess.min_eigenvalue().ok()?;
            Some((x.clone(), b, a))
        })
        .collect()
}
