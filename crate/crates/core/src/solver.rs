//! Energy evaluation and minimization of `I_ε(u) = ∫ |∇u|² + F_ε(u)` over
//! nonnegative grid fields with Dirichlet data.
//!
//! Minimization works on the edge-based discrete energy
//! `Σ_edges h^{d−2} (u_a − u_b)² + h^d Σ w_k F_ε(u_k)`, whose gradient at interior
//! nodes is `2h^d (−Δ_h u + f_ε(u))` with the 5-point Laplacian. Its stationary
//! points are exactly the zeros of [`residual`], and the energy trace reports it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, GridSpec, ScalarField};
use crate::phase::PhaseQuadrature;
use crate::potentials::{ReactionTerm, Scaled};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ProjectedGradient,
    GaussSeidelNewton,
    /// Global Newton steps (CG in 2D, tridiagonal in 1D) with Armijo backtracking.
    Newton,
}

/// Step size: `"auto"` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Step {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl Step {
    pub const AUTO: Step = Step::Auto(AutoTag::Auto);

    fn value(self) -> Option<f64> {
        match self {
            Step::Value(v) => Some(v),
            Step::Auto(_) => None,
        }
    }
}

impl Default for Step {
    fn default() -> Self {
        Step::AUTO
    }
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    200
}

fn default_method() -> Method {
    Method::Newton
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub eps: f64,
    #[serde(default = "default_tol")]
    pub tol_residual: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub step: Step,
}

impl SolveConfig {
    pub fn new(eps: f64) -> Self {
        SolveConfig { eps, tol_residual: default_tol(), max_iter: default_max_iter(), method: default_method(), step: Step::AUTO }
    }

    pub fn with_method(self, method: Method) -> Self {
        SolveConfig { method, ..self }
    }

    pub fn with_max_iter(self, max_iter: usize) -> Self {
        SolveConfig { max_iter, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::invalid("eps must be positive"));
        }
        if !(self.tol_residual > 0.0) {
            return Err(Error::invalid("tol_residual must be positive"));
        }
        if self.max_iter < 1 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if let Some(s) = self.step.value() {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid("step must be positive"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SolveConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    /// Discrete energy after each accepted iteration, starting with the initial state.
    pub energy_trace: Vec<f64>,
    pub converged: bool,
}

/// `∫ |∇u|² + F_ε(u)` by trapezoid quadrature with [`field::gradient`]. At
/// `eps = 0` the integrand is restricted to `{u > 0}` with one-sided gradients and
/// cut-cell quadrature (see [`PhaseQuadrature`]).
pub fn energy(u: &ScalarField, term: &ReactionTerm, eps: f64) -> Result<f64> {
    let sc = term.scaled(eps)?;
    if eps == 0.0 {
        let q = PhaseQuadrature::new(u);
        let grad = q.gradient();
        let g: Vec<f64> = (0..u.grid().len()).map(|k| grad.norm_at(k).powi(2) + 1.0).collect();
        return Ok(q.integrate(&g));
    }
    let grad = field::gradient(u);
    let vals: Vec<f64> = u.values().iter().enumerate().map(|(k, &v)| grad.norm_at(k).powi(2) + sc.potential(v)).collect();
    Ok(field::integrate_values(u.grid(), &vals))
}

/// `max` over interior nodes of `|Δ_h u − f_ε(u)|`.
pub fn residual(u: &ScalarField, term: &ReactionTerm, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    let sc = term.scaled(eps)?;
    let mut lap = vec![0.0; u.grid().len()];
    field::laplacian_into(u.values(), u.grid(), &mut lap);
    Ok(max_residual(u.grid(), u.values(), &lap, &sc))
}

fn max_residual(g: &GridSpec, u: &[f64], lap: &[f64], sc: &Scaled<'_>) -> f64 {
    (0..g.len()).filter(|&k| !g.is_boundary(k)).map(|k| (lap[k] - sc.f(u[k])).abs()).fold(0.0, f64::max)
}

/// Edge-based discrete energy minimized by [`minimize`].
pub fn discrete_energy(u: &ScalarField, term: &ReactionTerm, eps: f64) -> Result<f64> {
    let sc = term.scaled(eps)?;
    Ok(Problem::new(u.grid(), &sc).energy(u.values()))
}

struct Problem<'a> {
    grid: &'a GridSpec,
    sc: &'a Scaled<'a>,
    interior: Vec<usize>,
    /// `h^{d−2}` and `h^d`.
    edge_w: f64,
    node_w: f64,
}

impl<'a> Problem<'a> {
    fn new(grid: &'a GridSpec, sc: &'a Scaled<'a>) -> Self {
        let d = grid.dim() as i32;
        let h = grid.h();
        let interior = (0..grid.len()).filter(|&k| !grid.is_boundary(k)).collect();
        Problem { grid, sc, interior, edge_w: h.powi(d - 2), node_w: h.powi(d) }
    }

    fn neighbours(&self, k: usize) -> [Option<usize>; 4] {
        let [nx, ny] = self.grid.shape();
        let (i, j) = self.grid.ij(k);
        let mut n = [None; 4];
        if i > 0 {
            n[0] = Some(k - 1);
        }
        if i + 1 < nx {
            n[1] = Some(k + 1);
        }
        if self.grid.dim() == 2 {
            if j > 0 {
                n[2] = Some(k - nx);
            }
            if j + 1 < ny {
                n[3] = Some(k + nx);
            }
        }
        n
    }

    fn energy(&self, u: &[f64]) -> f64 {
        let [nx, ny] = self.grid.shape();
        let mut e = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                if i + 1 < nx {
                    e += self.edge_w * (u[k + 1] - u[k]).powi(2);
                }
                if self.grid.dim() == 2 && j + 1 < ny {
                    e += self.edge_w * (u[k + nx] - u[k]).powi(2);
                }
                e += self.node_w * self.grid.weight(k) * self.sc.potential(u[k]);
            }
        }
        e
    }

    /// `F(b) − F(a)` without cancellation for nearby arguments.
    fn potential_change(&self, a: f64, b: f64) -> f64 {
        let scale = self.sc.term().support() * self.sc.eps();
        if (b - a).abs() < 1e-4 * scale {
            let m = 0.5 * (a + b);
            (b - a) / 3.0 * (self.sc.f(a) + 4.0 * self.sc.f(m) + self.sc.f(b))
        } else {
            self.sc.potential(b) - self.sc.potential(a)
        }
    }

    /// Energy change from replacing `u` by `v` on interior nodes, computed from
    /// local differences so that it keeps relative accuracy for tiny steps.
    fn energy_change(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut de = 0.0;
        for &k in &self.interior {
            let dk = v[k] - u[k];
            de += self.node_w * self.grid.weight(k) * self.potential_change(u[k], v[k]);
            for n in self.neighbours(k).into_iter().flatten() {
                let dn = v[n] - u[n];
                let (a, b) = (u[k] - u[n], dk - dn);
                // each edge is visited from both interior ends; halve to count once
                let share = if self.grid.is_boundary(n) { 1.0 } else { 0.5 };
                de += share * self.edge_w * b * (2.0 * a + b);
            }
        }
        de
    }

    /// `−Δ_h u + f_ε(u)` at interior nodes, 0 on the boundary.
    fn pde_gradient(&self, u: &[f64], out: &mut [f64]) {
        field::laplacian_into(u, self.grid, out);
        for k in 0..u.len() {
            out[k] = if self.grid.is_boundary(k) { 0.0 } else { -out[k] + self.sc.f(u[k]) };
        }
    }

    fn residual(&self, u: &[f64], scratch: &mut [f64]) -> f64 {
        field::laplacian_into(u, self.grid, scratch);
        max_residual(self.grid, u, scratch, self.sc)
    }

    /// `(−Δ_h + diag f_ε'(u)) v` on interior nodes (`v = 0` on the boundary).
    fn hessian_apply(&self, fp: &[f64], v: &[f64], out: &mut [f64]) {
        field::laplacian_into(v, self.grid, out);
        for k in 0..v.len() {
            out[k] = if self.grid.is_boundary(k) { 0.0 } else { -out[k] + fp[k] * v[k] };
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes the discrete energy over interior values with `u ≥ 0`, keeping the
/// boundary values of `boundary`.
pub fn minimize(boundary: &ScalarField, init: &ScalarField, term: &ReactionTerm, cfg: &SolveConfig) -> Result<(ScalarField, SolveReport)> {
    cfg.validate()?;
    let grid = boundary.grid();
    if !grid.compatible(init.grid()) {
        return Err(Error::invalid("boundary and initial fields live on different grids"));
    }
    let mut u = init.values().to_vec();
    for (k, uk) in u.iter_mut().enumerate() {
        if grid.is_boundary(k) {
            let b = boundary.values()[k];
            if !(b >= 0.0) {
                return Err(Error::invalid("boundary values must be nonnegative"));
            }
            *uk = b;
        } else {
            *uk = uk.max(0.0);
        }
    }
    let sc = term.scaled(cfg.eps)?;
    let pb = Problem::new(grid, &sc);
    let mut scratch = vec![0.0; grid.len()];
    let mut res = pb.residual(&u, &mut scratch);
    let mut trace = vec![pb.energy(&u)];
    let mut iterations = 0;
    while res > cfg.tol_residual && iterations < cfg.max_iter {
        let change = match cfg.method {
            Method::ProjectedGradient => gradient_step(&pb, &mut u, cfg),
            Method::GaussSeidelNewton => gauss_seidel_sweep(&pb, &mut u, cfg),
            Method::Newton => newton_step(&pb, &mut u, cfg),
        };
        let Some(de) = change else { break };
        iterations += 1;
        let last = *trace.last().expect("trace starts non-empty");
        trace.push(last + de.min(0.0));
        res = pb.residual(&u, &mut scratch);
    }
    let report = SolveReport { iterations, final_residual: res, energy_trace: trace, converged: res <= cfg.tol_residual };
    Ok((ScalarField::new(grid.clone(), u)?, report))
}

/// Backtracking along `u + α p` (projected onto `u ≥ 0`). Returns the accepted
/// energy change.
fn line_search(pb: &Problem<'_>, u: &mut [f64], p: &[f64], g: &[f64], alpha0: f64) -> Option<f64> {
    let mut alpha = alpha0;
    let mut trial = u.to_vec();
    for _ in 0..60 {
        let mut slope = 0.0;
        for &k in &pb.interior {
            trial[k] = (u[k] + alpha * p[k]).max(0.0);
            slope += g[k] * (trial[k] - u[k]);
        }
        slope *= 2.0 * pb.node_w;
        if slope == 0.0 {
            return None;
        }
        let de = pb.energy_change(u, &trial);
        if slope < 0.0 && de <= 1e-4 * slope {
            u.copy_from_slice(&trial);
            return Some(de);
        }
        alpha *= 0.5;
    }
    None
}

fn gradient_step(pb: &Problem<'_>, u: &mut [f64], cfg: &SolveConfig) -> Option<f64> {
    let h = pb.grid.h();
    let step = cfg.step.value().unwrap_or(h * h / 8.0);
    let mut g = vec![0.0; u.len()];
    pb.pde_gradient(u, &mut g);
    let p: Vec<f64> = g.iter().map(|x| -x).collect();
    line_search(pb, u, &p, &g, step)
}

fn gauss_seidel_sweep(pb: &Problem<'_>, u: &mut [f64], cfg: &SolveConfig) -> Option<f64> {
    let h2 = pb.grid.h().powi(2);
    let diag = 2.0 * pb.grid.dim() as f64 / h2;
    let damping = cfg.step.value().unwrap_or(1.0);
    let mut total = 0.0;
    let mut moved = false;
    for idx in 0..pb.interior.len() {
        let k = pb.interior[idx];
        let nbrs = pb.neighbours(k);
        let sum: f64 = nbrs.iter().flatten().map(|&n| u[n]).sum();
        let uk = u[k];
        let r = (diag * uk - sum / h2) + pb.sc.f(uk);
        let curv = diag + pb.sc.fprime(uk);
        let mut delta = -damping * r / if curv > 0.5 * diag { curv } else { diag };
        // local energy: h^{d-2} Σ (u_k - u_n)² + h^d F(u_k)
        let local = |d: f64| -> f64 {
            let v = (uk + d).max(0.0);
            let edges: f64 = nbrs.iter().flatten().map(|&n| (v - uk) * (v + uk - 2.0 * u[n])).sum();
            pb.edge_w * edges + pb.node_w * pb.grid.weight(k) * pb.potential_change(uk, v)
        };
        for _ in 0..40 {
            let de = local(delta);
            if de <= 0.0 {
                let v = (uk + delta).max(0.0);
                if v != uk {
                    moved = true;
                    u[k] = v;
                    total += de;
                }
                break;
            }
            delta *= 0.5;
        }
    }
    moved.then_some(total)
}

fn newton_step(pb: &Problem<'_>, u: &mut [f64], cfg: &SolveConfig) -> Option<f64> {
    let n = u.len();
    let mut g = vec![0.0; n];
    pb.pde_gradient(u, &mut g);
    let fp: Vec<f64> = u.iter().map(|&v| pb.sc.fprime(v)).collect();
    let alpha0 = cfg.step.value().unwrap_or(1.0).min(1.0);
    let exact = if pb.grid.dim() == 1 { tridiagonal_direction(pb, &fp, &g) } else { cg_direction(pb, &fp, &g) };
    if let Some(p) = exact {
        let mut trial = u.to_vec();
        if let Some(de) = line_search(pb, &mut trial, &p, &g, alpha0) {
            u.copy_from_slice(&trial);
            return Some(de);
        }
    }
    // Away from a stable critical point the Hessian can be indefinite; the
    // convexified operator −Δ_h + max(f', 0) still yields a descent direction.
    let clipped: Vec<f64> = fp.iter().map(|&v| v.max(0.0)).collect();
    let p = if pb.grid.dim() == 1 { tridiagonal_direction(pb, &clipped, &g) } else { cg_direction(pb, &clipped, &g) }?;
    line_search(pb, u, &p, &g, alpha0)
}

/// Solves `H p = −g` exactly in 1D; `None` when `H` is not positive definite.
fn tridiagonal_direction(pb: &Problem<'_>, fp: &[f64], g: &[f64]) -> Option<Vec<f64>> {
    let n = g.len();
    let h2 = pb.grid.h().powi(2);
    let off = -1.0 / h2;
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut p = vec![0.0; n];
    let (mut prev_c, mut prev_d) = (0.0, 0.0);
    for k in 1..n - 1 {
        let denom = 2.0 / h2 + fp[k] - off * prev_c;
        if !(denom > 0.0) {
            return None;
        }
        c[k] = off / denom;
        d[k] = (-g[k] - off * prev_d) / denom;
        prev_c = c[k];
        prev_d = d[k];
    }
    for k in (1..n - 1).rev() {
        p[k] = d[k] - c[k] * p[k + 1];
    }
    Some(p)
}

/// Jacobi-preconditioned CG on `H p = −g`. `None` on negative curvature.
fn cg_direction(pb: &Problem<'_>, fp: &[f64], g: &[f64]) -> Option<Vec<f64>> {
    let n = g.len();
    let h2 = pb.grid.h().powi(2);
    let base = 2.0 * pb.grid.dim() as f64 / h2;
    let inv_diag: Vec<f64> = fp.iter().map(|&f| 1.0 / (base + f).max(0.5 * base)).collect();
    let gnorm = dot(g, g).sqrt();
    let target = gnorm.sqrt().min(1e-2) * gnorm;
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut d = z.clone();
    let mut hd = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for _ in 0..20_000 {
        pb.hessian_apply(fp, &d, &mut hd);
        let curv = dot(&d, &hd);
        if curv <= 0.0 {
            return None;
        }
        let alpha = rz / curv;
        for k in 0..n {
            x[k] += alpha * d[k];
            r[k] -= alpha * hd[k];
        }
        if dot(&r, &r).sqrt() <= target {
            break;
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            d[k] = z[k] + beta * d[k];
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode1d;

    fn reference() -> ReactionTerm {
        ReactionTerm::reference(1.0).unwrap()
    }

    fn profile_field(grid: &GridSpec, eps: f64, axis: usize) -> ScalarField {
        let p = ode1d::solve_monotone_eps(&reference(), eps, -1.5, 1.5, 1e-4).unwrap();
        ScalarField::from_fn(grid.clone(), |x| p.eval(x[axis]).0)
    }

    #[test]
    fn energy_of_half_plane_limit() {
        let g = GridSpec::square(-1.0, 1.0, 0.05).unwrap();
        let u = ScalarField::from_fn(g, |p| p[1].max(0.0));
        assert!((energy(&u, &reference(), 0.0).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn energy_of_zero_field() {
        let g = GridSpec::square(-1.0, 1.0, 0.1).unwrap();
        let z = ScalarField::zeros(g);
        for eps in [0.0, 0.1, 1.0] {
            assert_eq!(energy(&z, &reference(), eps).unwrap(), 0.0);
        }
    }

    #[test]
    fn energy_matches_one_dimensional_reduction() {
        let eps = 0.1;
        let term = reference();
        let g = GridSpec::square(-1.0, 1.0, 5e-3).unwrap();
        let u = profile_field(&g, eps, 1);
        let e2 = energy(&u, &term, eps).unwrap();
        let p = ode1d::solve_monotone_eps(&term, eps, -1.0, 1.0, 1e-4).unwrap();
        let sc = term.scaled(eps).unwrap();
        // ∫ V'² + F_ε(V) over (−1, 1) by trapezoid, times the x₁-width 2
        let mut e1 = 0.0;
        for k in 0..p.len() - 1 {
            let a = p.vp[k].powi(2) + sc.potential(p.v[k]);
            let b = p.vp[k + 1].powi(2) + sc.potential(p.v[k + 1]);
            e1 += 0.5 * (a + b) * (p.t[k + 1] - p.t[k]);
        }
        let e1 = 2.0 * e1;
        assert!(((e2 - e1) / e1).abs() < 0.02, "{e2} vs {e1}");
    }

    #[test]
    fn residual_order_and_kink() {
        let term = reference();
        let eps = 0.1;
        let r = |h: f64| {
            let g = GridSpec::interval(-1.0, 1.0, h).unwrap();
            residual(&profile_field(&g, eps, 0), &term, eps).unwrap()
        };
        let (a, b) = (r(4e-3), r(2e-3));
        assert!((a / b).log2() > 1.8, "{a} {b}");
        let g = GridSpec::interval(-1.0, 1.0, 0.01).unwrap();
        let kink = ScalarField::from_fn(g.clone(), |p| p[0].max(0.0));
        assert!(residual(&kink, &term, 0.05).unwrap() > 10.0);
        assert_eq!(residual(&ScalarField::zeros(g), &term, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn config_json() {
        let cfg = SolveConfig::from_json(r#"{"eps":0.1,"max_iter":5,"method":"projected-gradient","step":"auto"}"#).unwrap();
        assert_eq!(cfg.method, Method::ProjectedGradient);
        assert_eq!(cfg.step, Step::AUTO);
        assert_eq!(cfg.tol_residual, 1e-8);
        let cfg = SolveConfig::from_json(r#"{"eps":0.1,"max_iter":5,"method":"gauss-seidel-newton","step":0.5}"#).unwrap();
        assert_eq!(cfg.step, Step::Value(0.5));
        assert!(SolveConfig::from_json(r#"{"eps":0.1,"max_iter":0}"#).is_err());
        assert!(SolveConfig::from_json(r#"{"eps":-1}"#).is_err());
        assert!(SolveConfig::from_json(r#"{"eps":1,"bogus":2}"#).is_err());
        let back: SolveConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let g = GridSpec::square(-1.0, 1.0, 0.1).unwrap();
        let z = ScalarField::zeros(g);
        let (u, rep) = minimize(&z, &z, &reference(), &SolveConfig::new(0.1)).unwrap();
        assert_eq!(u, z);
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.final_residual, 0.0);
        assert!(rep.converged);
    }

    #[test]
    fn rejects_mismatched_grids_and_negative_data() {
        let a = ScalarField::zeros(GridSpec::square(-1.0, 1.0, 0.1).unwrap());
        let b = ScalarField::zeros(GridSpec::square(-1.0, 1.0, 0.05).unwrap());
        assert!(matches!(minimize(&a, &b, &reference(), &SolveConfig::new(0.1)), Err(Error::InvalidArgument(_))));
        let neg = a.map(|_| -1.0);
        assert!(minimize(&neg, &a, &reference(), &SolveConfig::new(0.1)).is_err());
    }

    fn one_d_setup(eps: f64, h: f64) -> (ScalarField, ScalarField) {
        let g = GridSpec::interval(-1.0, 1.0, h).unwrap();
        let exact = profile_field(&g, eps, 0);
        let init = ScalarField::from_fn(g, |p| {
            let (a, b) = (exact.values()[0], *exact.values().last().unwrap());
            a + (b - a) * (p[0] + 1.0) / 2.0
        });
        let mut init = init;
        let n = exact.values().len();
        init.values_mut()[0] = exact.values()[0];
        init.values_mut()[n - 1] = exact.values()[n - 1];
        (exact, init)
    }

    #[test]
    fn one_dimensional_newton_reproduces_profile() {
        let eps = 0.1;
        let (exact, init) = one_d_setup(eps, 1e-3);
        let (u, rep) = minimize(&exact, &init, &reference(), &SolveConfig::new(eps)).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(rep.final_residual <= 1e-8);
        assert!(u.sup_distance(&exact).unwrap() < 1e-4);
        assert!(rep.energy_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(u.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn slower_methods_decrease_energy() {
        let eps = 0.2;
        let (exact, init) = one_d_setup(eps, 2e-2);
        for method in [Method::ProjectedGradient, Method::GaussSeidelNewton] {
            let cfg = SolveConfig::new(eps).with_method(method).with_max_iter(300);
            let (u, rep) = minimize(&exact, &init, &reference(), &cfg).unwrap();
            assert!(rep.energy_trace.windows(2).all(|w| w[1] <= w[0]), "{method:?}");
            assert!(rep.energy_trace.last().unwrap() < &rep.energy_trace[0]);
            assert!(u.values().iter().all(|&v| v >= 0.0));
        }
        // Gauss-Seidel contracts like 1 − O(h²) per sweep; use a coarse grid.
        let (exact, init) = one_d_setup(eps, 5e-2);
        let cfg = SolveConfig::new(eps).with_method(Method::GaussSeidelNewton).with_max_iter(20_000);
        let (_, rep) = minimize(&exact, &init, &reference(), &cfg).unwrap();
        assert!(rep.converged, "{}", rep.final_residual);
    }

    /// Converged 1D discrete solution along `x₂`, extruded in `x₁`.
    fn extruded_discrete_profile(g: &GridSpec, eps: f64) -> ScalarField {
        let g1 = GridSpec::new_1d(g.origin()[1], g.h(), g.ny()).unwrap();
        let exact = profile_field(&g1, eps, 0);
        let (u1, rep) = minimize(&exact, &exact, &reference(), &SolveConfig::new(eps)).unwrap();
        assert!(rep.converged);
        ScalarField::from_fn(g.clone(), |p| u1.values()[((p[1] - g.origin()[1]) / g.h()).round() as usize])
    }

    #[test]
    fn two_dimensional_columns_agree() {
        let eps = 0.1;
        let g = GridSpec::square(-1.0, 1.0, 0.02).unwrap();
        let data = extruded_discrete_profile(&g, eps);
        let init = data.map(|v| 0.5 * v + 0.01);
        let (u, rep) = minimize(&data, &init, &reference(), &SolveConfig::new(eps)).unwrap();
        assert!(rep.converged, "{rep:?}");
        let (nx, ny) = (g.nx(), g.ny());
        let mut worst = 0.0_f64;
        for j in 0..ny {
            for i in 1..nx {
                worst = worst.max((u.at(i, j) - u.at(0, j)).abs());
            }
        }
        assert!(worst < 1e-6, "{worst}");
        assert!(u.values().iter().all(|&v| v > 0.0));
        assert!(rep.energy_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn energy_converges_under_refinement() {
        let eps = 0.2;
        let e = |h: f64| {
            let (exact, init) = one_d_setup(eps, h);
            let (u, rep) = minimize(&exact, &init, &reference(), &SolveConfig::new(eps)).unwrap();
            assert!(rep.converged);
            discrete_energy(&u, &reference(), eps).unwrap()
        };
        let (a, b, c) = (e(0.02), e(0.01), e(0.005));
        let order = ((a - b) / (b - c)).abs().log2();
        assert!(order >= 1.8, "{a} {b} {c}: {order}");
    }
}
