//! First and second inner variations of `I_ε` along compactly supported vector
//! fields, a flow-based finite-difference oracle, the classical second variation,
//! and the free-boundary surface forms for limit fields.
//!
//! With `δ̄` the Euclidean metric, the integrands are
//!
//! ```text
//! δI  = ∫ (|∇u|² + F_ε(u)) div X + (L_X δ̄)(du, du)
//! δ²I = ∫ (|∇u|² + F_ε(u)) div(X div X) + 2 (div X)(L_X δ̄)(du, du) + (L_X² δ̄)(du, du)
//! (L_X δ̄)^{ij}  = −(∂_j X^i + ∂_i X^j)
//! (L_X² δ̄)^{ij} = −X^k ∂_k(∂_j X^i + ∂_i X^j) + (∂_j X^k + ∂_k X^j) ∂_k X^i
//!                 + (∂_i X^k + ∂_k X^i) ∂_k X^j
//! ```
//!
//! All derivatives of `X` are analytic. At `ε = 0` the potential is the indicator
//! of `{u > 0}` and integrals use [`PhaseQuadrature`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, FieldSource, Jet, ScalarField, VectorField, VectorFieldSpec};
pub use crate::interface::{extract_interface, CurveComponent, CurveVertex, InterfaceCurve};
use crate::phase::PhaseQuadrature;
use crate::potentials::ReactionTerm;
use crate::solver;

/// Allowed deviation of `|∇u|` from 1 on the curve for the surface form.
pub const GRADIENT_TRACE_TOL: f64 = 5e-2;

/// Width (in nodes) of the boundary collar on which test functions must vanish.
pub const COLLAR_NODES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    pub first_analytic: f64,
    pub second_analytic: f64,
    pub first_fd: f64,
    pub second_fd: f64,
    pub dt: f64,
    pub classical_second: Option<f64>,
    pub surface_second: Option<f64>,
}

/// `⟨∇u, X⟩` at every node.
pub fn lie_derivative(u: &ScalarField, x: &VectorFieldSpec) -> Result<ScalarField> {
    check_dims(u, x)?;
    let grad = field::gradient(u);
    Ok(directional(u, &grad, x))
}

fn directional(u: &ScalarField, grad: &VectorField, x: &VectorFieldSpec) -> ScalarField {
    let g = u.grid();
    let d = g.dim();
    let vals = (0..g.len())
        .map(|k| {
            let xv = x.value(g.point(k));
            (0..d).map(|a| grad.components[a][k] * xv[a]).sum()
        })
        .collect();
    ScalarField::new(g.clone(), vals).expect("finite directional derivative")
}

fn check_dims(u: &ScalarField, x: &VectorFieldSpec) -> Result<()> {
    if u.grid().dim() != x.dim() {
        return Err(Error::invalid("field and vector field dimensions differ"));
    }
    Ok(())
}

/// `(L_X δ̄)(du, du) = −2 u_i u_j ∂_j X^i`.
fn lie_metric(jet: &Jet, du: [f64; 2], d: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += du[i] * du[j] * jet.d[i][j];
        }
    }
    -2.0 * s
}

/// `(L_X² δ̄)(du, du)`.
fn lie_metric2(jet: &Jet, du: [f64; 2], d: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            let mut m = 0.0;
            for k in 0..d {
                m -= jet.val[k] * (jet.dd[i][j][k] + jet.dd[j][i][k]);
                m += (jet.d[k][j] + jet.d[j][k]) * jet.d[i][k];
                m += (jet.d[k][i] + jet.d[i][k]) * jet.d[j][k];
            }
            s += du[i] * du[j] * m;
        }
    }
    s
}

/// Integrand evaluation shared by the two analytic variations.
fn integrate_variation(
    u: &ScalarField,
    x: &VectorFieldSpec,
    term: &ReactionTerm,
    eps: f64,
    integrand: impl Fn(&Jet, [f64; 2], f64, usize) -> f64,
) -> Result<f64> {
    check_dims(u, x)?;
    x.check_inside(u.grid())?;
    let sc = term.scaled(eps)?;
    let g = u.grid();
    let d = g.dim();
    if x.is_zero() {
        return Ok(0.0);
    }
    let phase = (eps == 0.0).then(|| PhaseQuadrature::new(u));
    let grad_owned;
    let grad = match &phase {
        Some(q) => q.gradient(),
        None => {
            grad_owned = field::gradient(u);
            &grad_owned
        }
    };
    let mut vals = vec![0.0; g.len()];
    for (k, val) in vals.iter_mut().enumerate() {
        let p = g.point(k);
        if !x.in_support(p) {
            continue;
        }
        let du = [grad.components[0][k], if d == 2 { grad.components[1][k] } else { 0.0 }];
        let pot = match &phase {
            Some(q) => {
                if q.is_positive(k) {
                    1.0
                } else {
                    0.0
                }
            }
            None => sc.potential(u.values()[k]),
        };
        let dens = du[0] * du[0] + du[1] * du[1] + pot;
        *val = integrand(&x.jet(p), du, dens, d);
    }
    Ok(match &phase {
        Some(q) => q.integrate(&vals),
        None => field::integrate_values(g, &vals),
    })
}

/// `δI_ε(u)[X]`.
pub fn first_inner_variation(u: &ScalarField, x: &VectorFieldSpec, term: &ReactionTerm, eps: f64) -> Result<f64> {
    integrate_variation(u, x, term, eps, |jet, du, dens, d| dens * jet.div(d) + lie_metric(jet, du, d))
}

/// `δ²I_ε(u)[X]`.
pub fn second_inner_variation(u: &ScalarField, x: &VectorFieldSpec, term: &ReactionTerm, eps: f64) -> Result<f64> {
    integrate_variation(u, x, term, eps, |jet, du, dens, d| {
        let div = jet.div(d);
        let gd = jet.grad_div(d);
        let x_grad_div: f64 = (0..d).map(|k| jet.val[k] * gd[k]).sum();
        dens * (x_grad_div + div * div) + 2.0 * div * lie_metric(jet, du, d) + lie_metric2(jet, du, d)
    })
}

/// Default FD step: `1e−2 ·` (support width) `/ max|X|`.
pub fn default_dt(x: &VectorFieldSpec) -> f64 {
    let (lo, hi) = x.support_box();
    let width = (0..x.dim()).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    let (sup, _) = x.norms(64);
    if sup > 0.0 && width.is_finite() {
        1e-2 * width / sup
    } else {
        1e-2
    }
}

/// 5-point central first and second derivatives at `t = 0` of
/// `t ↦ energy(pullback(u, X, t))`.
pub fn inner_variation_fd<S: FieldSource + ?Sized>(
    u: &S,
    x: &VectorFieldSpec,
    term: &ReactionTerm,
    eps: f64,
    dt: f64,
) -> Result<(f64, f64)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt must be positive"));
    }
    if x.is_zero() {
        return Ok((0.0, 0.0));
    }
    let energy_at = |t: f64| -> Result<f64> { solver::energy(&field::pullback(u, x, t)?, term, eps) };
    let g = [energy_at(-2.0 * dt)?, energy_at(-dt)?, energy_at(0.0)?, energy_at(dt)?, energy_at(2.0 * dt)?];
    let first = (g[0] - 8.0 * g[1] + 8.0 * g[3] - g[4]) / (12.0 * dt);
    let second = (-g[0] + 16.0 * g[1] - 30.0 * g[2] + 16.0 * g[3] - g[4]) / (12.0 * dt * dt);
    Ok((first, second))
}

/// Richardson extrapolation of the FD oracle with steps `dt` and `dt/2`.
pub fn inner_variation_fd_richardson<S: FieldSource + ?Sized>(
    u: &S,
    x: &VectorFieldSpec,
    term: &ReactionTerm,
    eps: f64,
    dt: f64,
) -> Result<(f64, f64)> {
    let (a1, a2) = inner_variation_fd(u, x, term, eps, dt)?;
    let (b1, b2) = inner_variation_fd(u, x, term, eps, 0.5 * dt)?;
    Ok(((16.0 * b1 - a1) / 15.0, (16.0 * b2 - a2) / 15.0))
}

fn check_collar(phi: &ScalarField) -> Result<()> {
    let g = phi.grid();
    let [nx, ny] = g.shape();
    let c = COLLAR_NODES;
    for k in 0..g.len() {
        let (i, j) = g.ij(k);
        let in_collar = i < c || i + c >= nx || (g.dim() == 2 && (j < c || j + c >= ny));
        if in_collar && phi.values()[k] != 0.0 {
            return Err(Error::invalid("test function must vanish on the boundary collar"));
        }
    }
    Ok(())
}

/// `I''_ε(u)[φ] = 2 ∫ |∇φ|² + f_ε'(u) φ²`.
pub fn classical_second_variation(u: &ScalarField, phi: &ScalarField, term: &ReactionTerm, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    if !u.grid().compatible(phi.grid()) {
        return Err(Error::invalid("u and phi live on different grids"));
    }
    check_collar(phi)?;
    let sc = term.scaled(eps)?;
    let grad = field::gradient(phi);
    let vals: Vec<f64> = (0..u.grid().len())
        .map(|k| {
            let p = phi.values()[k];
            grad.norm_at(k).powi(2) + sc.fprime(u.values()[k]) * p * p
        })
        .collect();
    Ok(2.0 * field::integrate_values(u.grid(), &vals))
}

/// `−I'_ε(u)[L_X u] = −∫ 2∇u·∇(L_X u) + 2 f_ε(u) L_X u`.
pub fn first_variation_by_derivative(u: &ScalarField, x: &VectorFieldSpec, term: &ReactionTerm, eps: f64) -> Result<f64> {
    let sc = term.scaled(eps)?;
    let lx = lie_derivative(u, x)?;
    let gu = field::gradient(u);
    let gl = field::gradient(&lx);
    let d = u.grid().dim();
    let vals: Vec<f64> = (0..u.grid().len())
        .map(|k| {
            let dot: f64 = (0..d).map(|a| gu.components[a][k] * gl.components[a][k]).sum();
            2.0 * dot + 2.0 * sc.f(u.values()[k]) * lx.values()[k]
        })
        .collect();
    Ok(-field::integrate_values(u.grid(), &vals))
}

fn check_classical(u: &ScalarField, curve: &InterfaceCurve) -> Result<()> {
    let g = u.grid();
    let margin = 8.0 * g.h();
    for v in curve.vertices() {
        if v.singular || g.distance_to_boundary(v.point) < margin {
            continue;
        }
        let n = (v.grad[0].powi(2) + v.grad[1].powi(2)).sqrt();
        if (n - 1.0).abs() > GRADIENT_TRACE_TOL {
            return Err(Error::NotClassicalSolution(format!(
                "|grad u| = {n:.4} at ({:.4}, {:.4}) on the free boundary",
                v.point[0], v.point[1]
            )));
        }
    }
    Ok(())
}

/// `δ²I₀` from the surface form `2 [∫_{u>0} |∇(L_X u)|² − ∫_curve H (L_X u)² ds]`.
pub fn surface_second_variation(u: &ScalarField, x: &VectorFieldSpec, curve: &InterfaceCurve) -> Result<f64> {
    check_dims(u, x)?;
    check_classical(u, curve)?;
    if x.is_zero() {
        return Ok(0.0);
    }
    let q = PhaseQuadrature::new(u);
    let lx = directional(u, q.gradient(), x);
    let grad = q.masked_gradient(lx.values());
    let dens: Vec<f64> = (0..u.grid().len()).map(|k| grad.norm_at(k).powi(2)).collect();
    let bulk = q.integrate(&dens);
    let curve_term = curve.line_integral(|v| {
        let xv = x.value(v.point);
        let l = xv[0] * v.grad[0] + xv[1] * v.grad[1];
        v.curvature * l * l
    });
    Ok(2.0 * (bulk - curve_term))
}

/// `∫_{u>0} |∇φ|² − ∫_curve H φ² ds`.
pub fn cjk_form(u: &ScalarField, phi: &ScalarField, curve: &InterfaceCurve) -> Result<f64> {
    if !u.grid().compatible(phi.grid()) {
        return Err(Error::invalid("u and phi live on different grids"));
    }
    let q = PhaseQuadrature::new(u);
    let grad = field::gradient(phi);
    let dens: Vec<f64> = (0..u.grid().len()).map(|k| grad.norm_at(k).powi(2)).collect();
    let bulk = q.integrate(&dens);
    for v in curve.vertices() {
        field::sample(phi, v.point)?;
    }
    let curve_term = curve.line_integral(|v| {
        let p = field::sample(phi, v.point).unwrap_or(0.0);
        v.curvature * p * p
    });
    Ok(bulk - curve_term)
}

/// Every variation quantity for one `(u, X)` pair. The classical second variation
/// is included for `eps > 0`, the surface form when a curve is supplied at
/// `eps = 0`.
pub fn evaluate(
    u: &ScalarField,
    x: &VectorFieldSpec,
    term: &ReactionTerm,
    eps: f64,
    dt: Option<f64>,
    curve: Option<&InterfaceCurve>,
) -> Result<VariationReport> {
    let dt = dt.unwrap_or_else(|| default_dt(x));
    let first_analytic = first_inner_variation(u, x, term, eps)?;
    let second_analytic = second_inner_variation(u, x, term, eps)?;
    let (first_fd, second_fd) = inner_variation_fd(u, x, term, eps, dt)?;
    let classical_second = if eps > 0.0 { Some(classical_second_variation(u, &lie_derivative(u, x)?, term, eps)?) } else { None };
    let surface_second = match (eps == 0.0, curve) {
        (true, Some(c)) => Some(surface_second_variation(u, x, c)?),
        _ => None,
    };
    Ok(VariationReport { first_analytic, second_analytic, first_fd, second_fd, dt, classical_second, surface_second })
}
