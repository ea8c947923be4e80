//! Reference fields used by experiments. Profiles are laid out along the last grid
//! axis; the exact limit solutions are the half-plane `x⁺` and the radial
//! `R log(|x|/R)⁺`.

use crate::error::Result;
use crate::field::{GridSpec, ScalarField};
use crate::ode1d;
use crate::potentials::ReactionTerm;
use crate::solver::{self, SolveConfig, SolveReport};

/// ODE step used to sample profiles onto grids.
pub const PROFILE_STEP: f64 = 1e-4;

fn axis_range(grid: &GridSpec) -> (usize, f64, f64) {
    let axis = grid.dim() - 1;
    let (lo, hi) = (grid.origin()[axis], grid.upper()[axis]);
    (axis, lo.min(0.0) - 1.0, hi.max(0.0) + 1.0)
}

/// Monotone ε-profile `V(x_last)` sampled at the nodes.
pub fn profile_field(term: &ReactionTerm, eps: f64, grid: &GridSpec) -> Result<ScalarField> {
    let (axis, lo, hi) = axis_range(grid);
    let p = ode1d::solve_monotone_eps(term, eps, lo, hi, PROFILE_STEP * term.support())?;
    Ok(ScalarField::from_fn(grid.clone(), |x| p.eval(x[axis]).0))
}

/// Symmetric wedge profile `V(|x_last|)` with asymptotic slope `s`.
pub fn wedge_field(term: &ReactionTerm, eps: f64, s: f64, grid: &GridSpec) -> Result<ScalarField> {
    let (axis, lo, hi) = axis_range(grid);
    let p = ode1d::solve_wedge(term, eps, s, lo.abs().max(hi), PROFILE_STEP * term.support())?;
    Ok(ScalarField::from_fn(grid.clone(), |x| p.eval(x[axis].abs()).0))
}

/// `x_last⁺`.
pub fn half_plane(grid: &GridSpec) -> ScalarField {
    let axis = grid.dim() - 1;
    ScalarField::from_fn(grid.clone(), |x| x[axis].max(0.0))
}

/// `R log(|x|/R)⁺`, harmonic outside the disc with unit gradient on its boundary.
pub fn radial(grid: &GridSpec, radius: f64) -> ScalarField {
    ScalarField::from_fn(grid.clone(), |x| (radius * (x[0].hypot(x[1]) / radius).ln()).max(0.0))
}

/// Discrete minimizer with profile boundary data: the one-dimensional problem is
/// solved along the last axis (profile as data and initial guess) and extruded.
/// On a 2D grid the result is a critical point of the 2D discrete energy.
pub fn profile_solution(term: &ReactionTerm, eps: f64, grid: &GridSpec) -> Result<(ScalarField, SolveReport)> {
    let axis = grid.dim() - 1;
    let line = GridSpec::new_1d(grid.origin()[axis], grid.h(), grid.shape()[axis])?;
    let exact = profile_field(term, eps, &line)?;
    let (u1, report) = solver::minimize(&exact, &exact, term, &SolveConfig::new(eps))?;
    let origin = grid.origin()[axis];
    let h = grid.h();
    let u = ScalarField::from_fn(grid.clone(), |x| u1.values()[((x[axis] - origin) / h).round() as usize]);
    Ok((u, report))
}
