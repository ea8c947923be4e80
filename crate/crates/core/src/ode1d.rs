//! One-dimensional profiles of `V'' = f_ε(V)`: the monotone profile with
//! `V(0) = Tε`, `V'(0) = 1`, and the symmetric wedge profiles with asymptotic
//! slopes `±s`.
//!
//! Both are integrated with classical fixed-step RK4. The decaying branch of the
//! monotone profile uses the first-order reduction of the first integral
//! `V'² − F(V/ε) = const`; elsewhere that identity is the accuracy oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::potentials::{ReactionTerm, Scaled};

/// Integration stops once the profile decays below this value.
const UNDERFLOW_STOP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfileKind {
    Monotone,
    Wedge { s: f64 },
}

/// A sampled profile on a uniform, sorted grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile1D {
    pub eps: f64,
    pub kind: ProfileKind,
    pub h: f64,
    /// Support endpoint of the reaction term used to build the profile.
    pub support: f64,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub vp: Vec<f64>,
}

/// Metadata sidecar written next to the profile CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileMeta {
    pub eps: f64,
    pub kind: String,
    pub s: Option<f64>,
    pub h: f64,
    #[serde(rename = "T")]
    pub support: f64,
}

fn rk4_step(sc: &Scaled<'_>, v: f64, vp: f64, dt: f64) -> (f64, f64) {
    let k1 = (vp, sc.f(v));
    let k2 = (vp + 0.5 * dt * k1.1, sc.f(v + 0.5 * dt * k1.0));
    let k3 = (vp + 0.5 * dt * k2.1, sc.f(v + 0.5 * dt * k2.0));
    let k4 = (vp + dt * k3.1, sc.f(v + dt * k3.0));
    (v + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0), vp + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1))
}

/// RK4 step that lands exactly on `V = level` when the step crosses it, then
/// finishes the step. `f_ε` is only `C¹` across that level.
fn step_across(sc: &Scaled<'_>, v: f64, vp: f64, dt: f64, level: f64) -> (f64, f64) {
    let next = rk4_step(sc, v, vp, dt);
    if !((v - level) * (next.0 - level) < 0.0) {
        return next;
    }
    let g = |theta: f64| rk4_step(sc, v, vp, theta * dt).0 - level;
    let (mut a, mut b) = (0.0, 1.0);
    let (mut ga, mut gb) = (v - level, next.0 - level);
    for _ in 0..60 {
        let theta = (a - ga * (b - a) / (gb - ga)).clamp(a, b);
        let gt = g(theta);
        if gt == 0.0 || (b - a) < 1e-15 {
            a = theta;
            break;
        }
        if gt * ga < 0.0 {
            (b, gb) = (theta, gt);
        } else {
            (a, ga) = (theta, gt);
        }
        if gt.abs() < 1e-15 * level.max(1e-300) {
            a = theta;
            break;
        }
    }
    let mid = rk4_step(sc, v, vp, a * dt);
    rk4_step(sc, mid.0, mid.1, (1.0 - a) * dt)
}

fn check_sign(next: f64, floor: f64, dt: f64) -> Result<()> {
    if next < floor {
        return Err(Error::IntegrationFailure(format!("profile became negative ({next:.3e}); step {dt} too large")));
    }
    Ok(())
}

/// Integrates `n` steps of size `dt` (either sign) from `(v0, vp0)`. Returns the
/// visited states, stopping early if the profile decays below the underflow
/// threshold.
fn integrate(sc: &Scaled<'_>, v0: f64, vp0: f64, dt: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(n);
    let (mut v, mut vp) = (v0, vp0);
    let level = sc.term().support() * sc.eps();
    let floor = -1e-10 * level;
    for _ in 0..n {
        let next = step_across(sc, v, vp, dt, level);
        check_sign(next.0, floor, dt)?;
        if next.0 < UNDERFLOW_STOP {
            break;
        }
        (v, vp) = next;
        out.push((v, vp));
    }
    Ok(out)
}

/// Decaying branch of the monotone profile, integrated backwards from `V = Tε` on
/// the first-order reduction `V' = √(F(V/ε) + c)`. The second-order equation is
/// unstable there: the growing mode swamps the decaying one after a few units.
fn integrate_tail(sc: &Scaled<'_>, v0: f64, c: f64, dt: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    let slope = |v: f64| (sc.potential(v) + c).max(0.0).sqrt();
    let floor = -1e-10 * sc.term().support() * sc.eps();
    let mut out = Vec::with_capacity(n);
    let mut v = v0;
    for _ in 0..n {
        let k1 = slope(v);
        let k2 = slope(v + 0.5 * dt * k1);
        let k3 = slope(v + 0.5 * dt * k2);
        let k4 = slope(v + dt * k3);
        let next = v + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        check_sign(next, floor, dt)?;
        if next < UNDERFLOW_STOP {
            break;
        }
        v = next;
        out.push((v, slope(v)));
    }
    Ok(out)
}

/// The monotone profile `V'' = f(V)`, `V(0) = T`, `V'(0) = 1` at `ε = 1`, sampled
/// on `t = k h` for `t_min ≤ t ≤ t_max`. The backward branch is truncated where it
/// underflows.
pub fn solve_monotone(term: &ReactionTerm, t_min: f64, t_max: f64, h: f64) -> Result<Profile1D> {
    solve_monotone_eps(term, 1.0, t_min, t_max, h)
}

/// The monotone profile at scale `ε`: `V(0) = Tε`, `V'(0) = 1`, i.e. `t ↦ ε V(t/ε)`.
pub fn solve_monotone_eps(term: &ReactionTerm, eps: f64, t_min: f64, t_max: f64, h: f64) -> Result<Profile1D> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    if !(t_min < 0.0 && t_max > 0.0) {
        return Err(Error::invalid("need t_min < 0 < t_max"));
    }
    if !(h > 0.0 && h <= 1e-2 * term.support()) {
        return Err(Error::invalid(format!("step {h} exceeds 1e-2 T")));
    }
    let sc = term.scaled(eps)?;
    let v0 = term.support() * eps;
    let n_back = (-t_min / h + 1e-9).floor() as usize;
    let n_fwd = (t_max / h + 1e-9).floor() as usize;
    let c = 1.0 - sc.potential(v0);
    let back = integrate_tail(&sc, v0, c, -h, n_back)?;
    let fwd = integrate(&sc, v0, 1.0, h, n_fwd)?;
    Ok(assemble(eps, ProfileKind::Monotone, h, term.support(), &back, (v0, 1.0), &fwd))
}

fn assemble(eps: f64, kind: ProfileKind, h: f64, support: f64, back: &[(f64, f64)], origin: (f64, f64), fwd: &[(f64, f64)]) -> Profile1D {
    let nb = back.len();
    let mut t = Vec::with_capacity(nb + 1 + fwd.len());
    let mut v = Vec::with_capacity(t.capacity());
    let mut vp = Vec::with_capacity(t.capacity());
    for (k, &(a, b)) in back.iter().enumerate().rev() {
        t.push(-((k + 1) as f64) * h);
        v.push(a);
        vp.push(b);
    }
    t.push(0.0);
    v.push(origin.0);
    vp.push(origin.1);
    for (k, &(a, b)) in fwd.iter().enumerate() {
        t.push((k + 1) as f64 * h);
        v.push(a);
        vp.push(b);
    }
    Profile1D { eps, kind, h, support, t, v, vp }
}

/// Value `V(0) = ε F⁻¹(F(T) − s²)` forced by the first integral for a wedge
/// profile with asymptotic slopes `±s`.
pub fn wedge_initial_value(term: &ReactionTerm, eps: f64, s: f64) -> f64 {
    let top = term.potential(term.support());
    eps * term.finv(top - s * s)
}

fn check_slope(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::invalid(format!("wedge slope must lie in (0, 1), got {s}")));
    }
    Ok(())
}

/// The even wedge profile `V_ε^s` on `[−t_max, t_max]`, started from the exact
/// first-integral value `V(0) = ε F⁻¹(1 − s²)`, `V'(0) = 0`.
pub fn solve_wedge(term: &ReactionTerm, eps: f64, s: f64, t_max: f64, h: f64) -> Result<Profile1D> {
    check_slope(s)?;
    if !(eps > 0.0 && t_max > 0.0 && h > 0.0) {
        return Err(Error::invalid("eps, t_max and h must be positive"));
    }
    let sc = term.scaled(eps)?;
    let v0 = wedge_initial_value(term, eps, s);
    let n = (t_max / h + 1e-9).floor() as usize;
    let fwd = integrate(&sc, v0, 0.0, h, n)?;
    let back: Vec<(f64, f64)> = fwd.iter().map(|&(a, b)| (a, -b)).collect();
    Ok(assemble(eps, ProfileKind::Wedge { s }, h, term.support(), &back, (v0, 0.0), &fwd))
}

/// Shooting route to the wedge initial value: bisection on `V(0) ∈ (0, Tε)` for
/// the slope reached at `t_max`. Used to cross-check [`wedge_initial_value`].
pub fn shoot_wedge_initial(term: &ReactionTerm, eps: f64, s: f64, t_max: f64, h: f64) -> Result<f64> {
    check_slope(s)?;
    let sc = term.scaled(eps)?;
    let n = (t_max / h).round() as usize;
    let slope_at_end = |v0: f64| -> f64 {
        let mut state = (v0, 0.0);
        for _ in 0..n {
            state = step_across(&sc, state.0, state.1, h, term.support() * eps);
        }
        state.1
    };
    // A larger V(0) leaves less potential to convert into slope.
    let (mut lo, mut hi) = (0.0, term.support() * eps);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope_at_end(mid) > s {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * eps {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `max_k |V'(t_k)² − V'(0)² − (F(V(t_k)/ε) − F(V(0)/ε))|`.
pub fn first_integral_residual(p: &Profile1D, term: &ReactionTerm) -> f64 {
    let Ok(sc) = term.scaled(p.eps) else {
        return f64::NAN;
    };
    let k0 = p.origin_index();
    let c = p.vp[k0] * p.vp[k0] - sc.potential(p.v[k0]);
    p.v.iter().zip(&p.vp).map(|(&v, &vp)| (vp * vp - sc.potential(v) - c).abs()).fold(0.0, f64::max)
}

impl Profile1D {
    /// Index of the sample closest to `t = 0`.
    pub fn origin_index(&self) -> usize {
        let mut best = 0;
        for (k, &t) in self.t.iter().enumerate() {
            if t.abs() < self.t[best].abs() {
                best = k;
            }
        }
        best
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `(V(t), V'(t))` by cubic Hermite interpolation. Outside the sampled span the
    /// profile is continued affinely where it has left the reaction zone
    /// (`V ≥ Tε`) and exponentially otherwise.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let n = self.t.len();
        let (t0, t1) = (self.t[0], self.t[n - 1]);
        if t <= t0 {
            return self.extend(0, t);
        }
        if t >= t1 {
            return self.extend(n - 1, t);
        }
        let k = (self.t.partition_point(|&x| x <= t) - 1).min(n - 2);
        let (ta, tb) = (self.t[k], self.t[k + 1]);
        let dt = tb - ta;
        let x = (t - ta) / dt;
        let (va, vb, ma, mb) = (self.v[k], self.v[k + 1], self.vp[k] * dt, self.vp[k + 1] * dt);
        let x2 = x * x;
        let x3 = x2 * x;
        let v = (2.0 * x3 - 3.0 * x2 + 1.0) * va + (x3 - 2.0 * x2 + x) * ma + (-2.0 * x3 + 3.0 * x2) * vb + (x3 - x2) * mb;
        let d = (6.0 * x2 - 6.0 * x) * va + (3.0 * x2 - 4.0 * x + 1.0) * ma + (-6.0 * x2 + 6.0 * x) * vb + (3.0 * x2 - 2.0 * x) * mb;
        (v, d / dt)
    }

    fn extend(&self, k: usize, t: f64) -> (f64, f64) {
        let (tk, vk, dk) = (self.t[k], self.v[k], self.vp[k]);
        if vk >= self.support * self.eps || vk <= 0.0 || dk == 0.0 {
            (vk + dk * (t - tk), dk)
        } else {
            let rate = dk / vk;
            let v = vk * (rate * (t - tk)).exp();
            (v, rate * v)
        }
    }

    /// Metadata sidecar for the CSV export.
    pub fn meta(&self) -> ProfileMeta {
        let (kind, s) = match self.kind {
            ProfileKind::Monotone => ("monotone".to_string(), None),
            ProfileKind::Wedge { s } => ("wedge".to_string(), Some(s)),
        };
        ProfileMeta { eps: self.eps, kind, s, h: self.h, support: self.support }
    }

    /// CSV with header `t,V,Vp`, one row per sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,V,Vp\n");
        for k in 0..self.t.len() {
            io::push_row(&mut out, &[self.t[k], self.v[k], self.vp[k]]);
        }
        out
    }

    /// Parses the CSV written by [`Profile1D::to_csv`] together with its sidecar.
    pub fn from_csv(csv: &str, meta: &ProfileMeta) -> Result<Self> {
        let rows = io::parse_table(csv, &["t", "V", "Vp"])?;
        if rows.len() < 2 {
            return Err(Error::Parse("profile needs at least two rows".into()));
        }
        let kind = match (meta.kind.as_str(), meta.s) {
            ("monotone", _) => ProfileKind::Monotone,
            ("wedge", Some(s)) => ProfileKind::Wedge { s },
            _ => return Err(Error::Parse(format!("unknown profile kind {:?}", meta.kind))),
        };
        if !(meta.eps > 0.0 && meta.h > 0.0 && meta.support > 0.0) {
            return Err(Error::Parse("profile metadata must be positive".into()));
        }
        let t: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parse("profile abscissae must be strictly increasing".into()));
        }
        Ok(Profile1D {
            eps: meta.eps,
            kind,
            h: meta.h,
            support: meta.support,
            t,
            v: rows.iter().map(|r| r[1]).collect(),
            vp: rows.iter().map(|r| r[2]).collect(),
        })
    }
}

/// Blow-down of a profile to scale `eps_new`: `t ↦ λ V(t/λ)` with `λ = eps_new/eps`,
/// resampled on the original grid.
pub fn rescale(p: &Profile1D, eps_new: f64) -> Result<Profile1D> {
    if !(eps_new > 0.0) {
        return Err(Error::invalid("eps_new must be positive"));
    }
    let lambda = eps_new / p.eps;
    if lambda == 1.0 {
        return Ok(Profile1D { eps: eps_new, ..p.clone() });
    }
    let (v, vp): (Vec<f64>, Vec<f64>) =
        p.t.iter()
            .map(|&t| {
                let (a, b) = p.eval(t / lambda);
                (lambda * a, b)
            })
            .unzip();
    Ok(Profile1D { eps: eps_new, v, vp, t: p.t.clone(), ..*p })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> ReactionTerm {
        ReactionTerm::reference(1.0).unwrap()
    }

    #[test]
    fn monotone_is_affine_above_support() {
        let p = solve_monotone(&reference(), -3.0, 1.0, 1e-3).unwrap();
        let (v, vp) = p.eval(0.7);
        assert!((v - 1.7).abs() < 1e-12);
        assert!((vp - 1.0).abs() < 1e-12);
        let k0 = p.origin_index();
        assert_eq!(p.t[k0], 0.0);
        assert_eq!(p.v[k0], 1.0);
        assert!(p.v.iter().all(|&v| v >= 0.0));
        assert!(p.v.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn monotone_first_integral() {
        let term = reference();
        let p = solve_monotone(&term, -3.0, 1.0, 1e-3).unwrap();
        assert!(first_integral_residual(&p, &term) < 1e-8);
        // pointwise check at t = -0.4
        let (v, vp) = p.eval(-0.4);
        assert!((vp * vp - term.potential(v)).abs() < 1e-8);
    }

    #[test]
    fn monotone_tail_decays_exponentially() {
        let term = reference();
        let p = solve_monotone(&term, -12.0, 0.5, 1e-3).unwrap();
        let v_m1 = p.eval(-1.0).0;
        let rate = term.c0().sqrt();
        for t in [-2.0, -4.0, -8.0] {
            assert!(p.eval(t).0 <= v_m1 * (rate * (t + 1.0)).exp());
        }
    }

    #[test]
    fn monotone_underflow_truncates_grid() {
        let p = solve_monotone(&reference(), -40.0, 0.5, 1e-2).unwrap();
        assert!(p.t[0] > -40.0);
        assert!(p.v[0] >= UNDERFLOW_STOP);
    }

    #[test]
    fn oversized_step_is_rejected() {
        assert!(solve_monotone(&reference(), -1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn residual_converges_at_fourth_order() {
        let term = reference();
        let r: Vec<f64> =
            [4e-2, 2e-2, 1e-2].iter().map(|&h| first_integral_residual(&solve_wedge(&term, 1.0, 0.5, 4.0, h).unwrap(), &term)).collect();
        for w in r.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 12.0 && ratio < 20.0, "{r:?}");
        }
    }

    #[test]
    fn wedge_initial_value_from_first_integral() {
        let term = reference();
        let v0 = wedge_initial_value(&term, 1.0, 0.3125_f64.sqrt());
        assert!((v0 - 0.5).abs() < 1e-10);
        let small = wedge_initial_value(&term, 1.0, 0.99);
        assert!(small > 0.0 && small < 0.1);
        assert!((term.potential(small) - (1.0 - 0.99 * 0.99)).abs() < 1e-10);
    }

    #[test]
    fn wedge_rejects_bad_slope() {
        let term = reference();
        for s in [0.0, 1.0, -0.2, 1.5] {
            assert!(matches!(solve_wedge(&term, 1.0, s, 5.0, 1e-2), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn wedge_symmetric_with_prescribed_slope() {
        let term = reference();
        for s in [0.25, 0.5, 0.75] {
            let p = solve_wedge(&term, 0.1, s, 1.0, 1e-3).unwrap();
            let n = p.len();
            for k in 0..n {
                assert!((p.v[k] - p.v[n - 1 - k]).abs() < 1e-8);
            }
            assert!((p.vp[n - 1].abs() - s).abs() < 1e-4);
            let r = first_integral_residual(&p, &term);
            assert!(r < 1e-8, "s={s}: {r}");
        }
    }

    #[test]
    fn shooting_agrees_with_first_integral() {
        let term = reference();
        for s in [0.3, 0.6] {
            let direct = wedge_initial_value(&term, 1.0, s);
            let shot = shoot_wedge_initial(&term, 1.0, s, 12.0, 1e-3).unwrap();
            assert!((direct - shot).abs() < 1e-6, "{direct} vs {shot}");
        }
    }

    #[test]
    fn wedge_slope_increases_with_s() {
        let term = reference();
        let slopes: Vec<f64> = (1..=9)
            .map(|k| {
                let p = solve_wedge(&term, 1.0, k as f64 / 10.0, 12.0, 1e-2).unwrap();
                *p.vp.last().unwrap()
            })
            .collect();
        assert!(slopes.windows(2).all(|w| w[1] > w[0]), "{slopes:?}");
    }

    #[test]
    fn degenerate_wedges_stay_below_two_eps() {
        let term = reference();
        for eps in [0.1, 0.05, 0.02] {
            let p = solve_wedge(&term, eps, eps, 1.0, 1e-3).unwrap();
            let sup = p.v.iter().cloned().fold(0.0, f64::max);
            assert!(sup <= 2.0 * eps, "eps={eps}: {sup}");
        }
    }

    #[test]
    fn residual_detects_noise_and_vanishes_on_zero() {
        let term = reference();
        let mut p = solve_monotone(&term, -3.0, 1.0, 1e-3).unwrap();
        for (k, v) in p.v.iter_mut().enumerate() {
            *v += if k % 2 == 0 { 1e-3 } else { -1e-3 };
        }
        assert!(first_integral_residual(&p, &term) > 1e-4);
        let zero = Profile1D { v: vec![0.0; p.len()], vp: vec![0.0; p.len()], ..p };
        assert_eq!(first_integral_residual(&zero, &term), 0.0);
    }

    #[test]
    fn rescale_identity_and_blow_down() {
        let term = reference();
        let p = solve_wedge(&term, 1.0, 0.5, 30.0, 1e-2).unwrap();
        assert_eq!(rescale(&p, 1.0).unwrap(), p);

        // Distance to the wedge s|t| on [-1, 1] shrinks like eps_new.
        let dist = |eps_new: f64| {
            let q = rescale(&p, eps_new).unwrap();
            (0..=2000).map(|k| -1.0 + k as f64 / 1000.0).map(|t| (q.eval(t).0 - 0.5 * t.abs()).abs()).fold(0.0, f64::max)
        };
        let d: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&e| dist(e)).collect();
        for w in d.windows(2) {
            assert!((w[1] / w[0] - 0.5).abs() < 0.02, "{d:?}");
        }
    }

    #[test]
    fn monotone_blow_down_converges_to_positive_part() {
        let term = reference();
        let p = solve_monotone(&term, -20.0, 2.0, 1e-2).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [0.2, 0.1, 0.05] {
            let q = rescale(&p, eps).unwrap();
            let err = (0..=200).map(|k| -1.0 + k as f64 / 100.0).map(|t| (q.eval(t).0 - t.max(0.0)).abs()).fold(0.0, f64::max);
            assert!(err < prev && err <= 1.1 * eps, "eps={eps}: {err}");
            prev = err;
        }
    }

    #[test]
    fn csv_round_trip() {
        let p = solve_wedge(&reference(), 0.5, 0.4, 1.0, 0.05).unwrap();
        let back = Profile1D::from_csv(&p.to_csv(), &p.meta()).unwrap();
        assert_eq!(back, p);
        assert!(p.to_csv().starts_with("t,V,Vp\n"));
    }
}
