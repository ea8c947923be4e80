//! Discrete diagnostics for transition layers and free boundaries: level bands,
//! nondegeneracy and density scans, Lipschitz and exit-radius measurements,
//! convergence gaps and blow-downs.
//!
//! Balls are node sets `{|node − center| ≤ r}` and their measures are node counts.
//! Scan centers keep a margin equal to the ball radius from the grid boundary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{gradient, integrate, sample, GridSpec, Point, ScalarField};
use crate::io;
use crate::potentials::ReactionTerm;

/// A limit-field node counts as zero when `u ≤ ZERO_RELATIVE · max u`.
pub const ZERO_RELATIVE: f64 = 1e-12;

/// Which side of the transition layer a [`LevelRegion`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "band", content = "theta", rename_all = "lowercase")]
pub enum Band {
    /// `{u ≤ θε}`.
    Zero(f64),
    /// `{θε ≤ u ≤ Tε}`.
    Transition(f64),
}

impl Band {
    pub fn theta(&self) -> f64 {
        match *self {
            Band::Zero(t) | Band::Transition(t) => t,
        }
    }
}

/// Sorted node indices whose values lie in `band = (lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRegion {
    pub nodes: Vec<usize>,
    pub band: (f64, f64),
    pub eps: f64,
    pub theta: f64,
}

impl LevelRegion {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.nodes.binary_search(&idx).is_ok()
    }

    /// CSV index list with header `index,i,j`.
    pub fn to_csv(&self, grid: &GridSpec) -> String {
        node_set_csv(grid, &self.nodes)
    }
}

/// CSV index list with header `index,i,j`.
pub fn node_set_csv(grid: &GridSpec, nodes: &[usize]) -> String {
    let mut out = String::from("index,i,j\n");
    for &k in nodes {
        let (i, j) = grid.ij(k);
        out.push_str(&format!("{k},{i},{j}\n"));
    }
    out
}

/// Axis-aligned sub-box of the domain. The second axis is ignored on 1D grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Point,
    pub hi: Point,
}

impl Window {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        if !(lo[0] <= hi[0] && lo[1] <= hi[1]) {
            return Err(Error::invalid("window corners must satisfy lo ≤ hi"));
        }
        Ok(Window { lo, hi })
    }

    pub fn contains(&self, p: Point, dim: usize) -> bool {
        let ok_x = p[0] >= self.lo[0] && p[0] <= self.hi[0];
        ok_x && (dim == 1 || (p[1] >= self.lo[1] && p[1] <= self.hi[1]))
    }

    fn half_diameter(&self, dim: usize) -> f64 {
        let dx = self.hi[0] - self.lo[0];
        let dy = if dim == 1 { 0.0 } else { self.hi[1] - self.lo[1] };
        0.5 * dx.hypot(dy)
    }
}

/// Direction in which a measured constant is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sense {
    /// Lower bounds (nondegeneracy, density): the worst case is the minimum.
    AtLeast,
    /// Upper bounds (Lipschitz, gaps, distances): the worst case is the maximum.
    AtMost,
}

/// Per-parameter measurements of one check.
///
/// `values[k]` is `None` when no admissible center exists for `params[k]`. With no
/// threshold set, `pass` only records that the scan was nonempty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub params: Vec<BTreeMap<String, f64>>,
    pub values: Vec<Option<f64>>,
    pub worst: Option<f64>,
    pub sense: Sense,
    pub threshold: Option<f64>,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(check: &str, sense: Sense, params: Vec<BTreeMap<String, f64>>, values: Vec<Option<f64>>) -> Self {
        let finite = values.iter().flatten().copied();
        let worst = match sense {
            Sense::AtLeast => finite.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v)))),
            Sense::AtMost => finite.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v)))),
        };
        CheckReport { check: check.to_string(), params, values, worst, sense, threshold: None, pass: worst.is_some() }
    }

    /// Judges the worst case against `threshold`.
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self.pass = match (self.worst, self.sense) {
            (Some(w), Sense::AtLeast) => w >= threshold,
            (Some(w), Sense::AtMost) => w <= threshold,
            (None, _) => false,
        };
        self
    }

    /// True when no parameter had an admissible center.
    pub fn is_empty(&self) -> bool {
        self.worst.is_none()
    }

    /// Measured value for the first parameter set whose entry `key` equals `value`.
    pub fn value_for(&self, key: &str, value: f64) -> Option<f64> {
        self.params.iter().position(|p| p.get(key).is_some_and(|&v| v == value)).and_then(|k| self.values[k])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("eps must be positive, got {eps}")))
    }
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::invalid("radii must be a nonempty list of positive numbers"));
    }
    Ok(())
}

/// Transition band `Z(θ)` or `F(θ)` of an ε-field.
pub fn level_region(u: &ScalarField, term: &ReactionTerm, eps: f64, band: Band) -> Result<LevelRegion> {
    check_eps(eps)?;
    let theta = band.theta();
    let t = term.support();
    if !(theta > 0.0 && theta <= t) {
        return Err(Error::invalid(format!("theta must lie in (0, {t}], got {theta}")));
    }
    let (lo, hi) = match band {
        Band::Zero(_) => (u.min().min(0.0), theta * eps),
        Band::Transition(_) => (theta * eps, t * eps),
    };
    let nodes = (0..u.grid().len()).filter(|&k| (lo..=hi).contains(&u.values()[k])).collect();
    Ok(LevelRegion { nodes, band: (lo, hi), eps, theta })
}

/// Row offsets `(dj, w)` of the node ball of radius `r`: row `j + dj` contributes
/// columns `i − w ..= i + w`.
fn ball_rows(grid: &GridSpec, r: f64) -> Vec<(isize, isize)> {
    let rr = r / grid.h();
    let span = |d2: f64| ((rr * rr - d2).max(0.0).sqrt() + 1e-9).floor() as isize;
    if grid.dim() == 1 {
        return vec![(0, span(0.0))];
    }
    let m = (rr + 1e-9).floor() as isize;
    (-m..=m).map(|dj| (dj, span((dj * dj) as f64))).collect()
}

fn has_margin(grid: &GridSpec, p: Point, r: f64) -> bool {
    grid.distance_to_boundary(p) >= r - 1e-9 * grid.h()
}

/// Clipped column range of a ball row, or `None` if the row is off the grid.
fn row_span(grid: &GridSpec, center: usize, (dj, w): (isize, isize)) -> Option<(usize, usize, usize)> {
    let (i, j) = grid.ij(center);
    let row = j as isize + dj;
    if row < 0 || row >= grid.ny() as isize {
        return None;
    }
    let a = (i as isize - w).max(0) as usize;
    let b = ((i as isize + w) as usize).min(grid.nx() - 1);
    Some((row as usize, a, b))
}

/// Range-maximum queries along grid rows (sparse table).
struct RowMax {
    nx: usize,
    levels: Vec<Vec<f64>>,
}

impl RowMax {
    fn new(grid: &GridSpec, values: &[f64]) -> Self {
        let nx = grid.nx();
        let mut levels = vec![values.to_vec()];
        let mut width = 1;
        while 2 * width <= nx {
            let prev = levels.last().unwrap();
            let mut next = prev.clone();
            for (k, slot) in next.iter_mut().enumerate() {
                if k % nx + width < nx {
                    *slot = prev[k].max(prev[k + width]);
                }
            }
            levels.push(next);
            width *= 2;
        }
        RowMax { nx, levels }
    }

    fn query(&self, row: usize, a: usize, b: usize) -> f64 {
        let len = b - a + 1;
        let l = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let base = row * self.nx;
        self.levels[l][base + a].max(self.levels[l][base + b + 1 - (1 << l)])
    }

    fn ball_max(&self, grid: &GridSpec, center: usize, rows: &[(isize, isize)]) -> f64 {
        rows.iter().filter_map(|&dw| row_span(grid, center, dw)).map(|(row, a, b)| self.query(row, a, b)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Row prefix counts of a node mask.
struct RowCount {
    nx: usize,
    prefix: Vec<u32>,
}

impl RowCount {
    fn new(grid: &GridSpec, mask: &[bool]) -> Self {
        let nx = grid.nx();
        let mut prefix = vec![0u32; grid.ny() * (nx + 1)];
        for j in 0..grid.ny() {
            for i in 0..nx {
                let base = j * (nx + 1);
                prefix[base + i + 1] = prefix[base + i] + mask[j * nx + i] as u32;
            }
        }
        RowCount { nx, prefix }
    }

    /// `(members, nodes)` of the ball around `center`.
    fn ball_count(&self, grid: &GridSpec, center: usize, rows: &[(isize, isize)]) -> (u64, u64) {
        let (mut hit, mut total) = (0u64, 0u64);
        for &dw in rows {
            if let Some((row, a, b)) = row_span(grid, center, dw) {
                let base = row * (self.nx + 1);
                hit += (self.prefix[base + b + 1] - self.prefix[base + a]) as u64;
                total += (b - a + 1) as u64;
            }
        }
        (hit, total)
    }
}

/// `min over p of sup_{B_r(p)} u / r` for each radius, over nodes `p` with
/// `u(p) ≥ θε` inside `window` whose ball stays in the domain.
pub fn nondegeneracy_scan(u: &ScalarField, eps: f64, theta: f64, radii: &[f64], window: Option<&Window>) -> Result<CheckReport> {
    check_eps(eps)?;
    check_radii(radii)?;
    if !theta.is_finite() {
        return Err(Error::invalid("theta must be finite"));
    }
    let grid = u.grid();
    let vals = u.values();
    let rmq = RowMax::new(grid, vals);
    let eligible: Vec<usize> =
        (0..grid.len()).filter(|&k| vals[k] >= theta * eps && window.is_none_or(|w| w.contains(grid.point(k), grid.dim()))).collect();
    let mut ps = Vec::new();
    let mut values = Vec::new();
    for &r in radii {
        let rows = ball_rows(grid, r);
        let best = eligible
            .iter()
            .filter(|&&k| has_margin(grid, grid.point(k), r))
            .map(|&k| rmq.ball_max(grid, k, &rows) / r)
            .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.min(c))));
        ps.push(params(&[("r", r), ("eps", eps), ("theta", theta)]));
        values.push(best);
    }
    Ok(CheckReport::new("nondegeneracy", Sense::AtLeast, ps, values))
}

/// Minimal fraction of `Z^{τ/4}` in `B_{r/2}(x)` over centers `x ∈ F^τ`.
pub fn density_scan(u: &ScalarField, term: &ReactionTerm, eps: f64, l: f64, radii: &[f64]) -> Result<CheckReport> {
    check_eps(eps)?;
    check_radii(radii)?;
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::invalid(format!("L must be positive, got {l}")));
    }
    if let Some(&r) = radii.iter().find(|&&r| r < l * eps * (1.0 - 1e-12)) {
        return Err(Error::invalid(format!("radius {r} is below L·eps = {}", l * eps)));
    }
    let tau = term.tau();
    let centers = level_region(u, term, eps, Band::Transition(tau))?;
    let zero = level_region(u, term, eps, Band::Zero(tau / 4.0))?;
    let grid = u.grid();
    let mut mask = vec![false; grid.len()];
    for &k in &zero.nodes {
        mask[k] = true;
    }
    let counts = RowCount::new(grid, &mask);
    let mut ps = Vec::new();
    let mut values = Vec::new();
    for &r in radii {
        let rows = ball_rows(grid, 0.5 * r);
        let best = min_fraction(grid, &centers.nodes, 0.5 * r, &rows, &counts);
        ps.push(params(&[("r", r), ("eps", eps), ("L", l)]));
        values.push(best);
    }
    Ok(CheckReport::new("density", Sense::AtLeast, ps, values))
}

fn min_fraction(grid: &GridSpec, centers: &[usize], radius: f64, rows: &[(isize, isize)], counts: &RowCount) -> Option<f64> {
    centers
        .iter()
        .filter(|&&k| has_margin(grid, grid.point(k), radius))
        .map(|&k| {
            let (hit, total) = counts.ball_count(grid, k, rows);
            hit as f64 / total as f64
        })
        .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.min(c))))
}

/// Zero set `{u ≤ ZERO_RELATIVE · max u}` of a limit field.
pub fn zero_mask(u: &ScalarField) -> Vec<bool> {
    let cut = ZERO_RELATIVE * u.max().max(0.0);
    u.values().iter().map(|&v| v <= cut).collect()
}

/// Discrete free boundary of a limit field: nodes whose closed 4-neighbourhood
/// holds both zero and positive nodes.
pub fn free_boundary_nodes(u: &ScalarField) -> Vec<usize> {
    let grid = u.grid();
    let zero = zero_mask(u);
    let [nx, ny] = grid.shape();
    (0..grid.len())
        .filter(|&k| {
            let (i, j) = grid.ij(k);
            let mut seen = [false; 2];
            seen[zero[k] as usize] = true;
            let mut visit = |n: usize| seen[zero[n] as usize] = true;
            if i > 0 {
                visit(k - 1);
            }
            if i + 1 < nx {
                visit(k + 1);
            }
            if j > 0 {
                visit(k - nx);
            }
            if j + 1 < ny {
                visit(k + nx);
            }
            seen[0] && seen[1]
        })
        .collect()
}

/// Minimal fraction of the zero set in `B_r(x)` over discrete free boundary nodes.
pub fn zero_phase_density(u: &ScalarField, radii: &[f64]) -> Result<CheckReport> {
    check_radii(radii)?;
    let grid = u.grid();
    let centers = free_boundary_nodes(u);
    let counts = RowCount::new(grid, &zero_mask(u));
    let mut ps = Vec::new();
    let mut values = Vec::new();
    for &r in radii {
        let rows = ball_rows(grid, r);
        values.push(min_fraction(grid, &centers, r, &rows, &counts));
        ps.push(params(&[("r", r)]));
    }
    Ok(CheckReport::new("zero-phase-density", Sense::AtLeast, ps, values))
}

/// `max |∇u|` over the nodes in `window` (all nodes when `None`).
pub fn lipschitz_constant(u: &ScalarField, window: Option<&Window>) -> f64 {
    let grid = u.grid();
    let g = gradient(u);
    (0..grid.len()).filter(|&k| window.is_none_or(|w| w.contains(grid.point(k), grid.dim()))).map(|k| g.norm_at(k)).fold(0.0, f64::max)
}

/// Result of [`exit_radius`]; `radius` is infinite when `reached` is false.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitRadius {
    pub radius: f64,
    pub reached: bool,
}

/// Smallest `r` with `sup_{B_r(p)} u ≥ τε`, i.e. the distance from `p` to the
/// nearest node at or above `τε` (zero if `u(p)` already is).
pub fn exit_radius(u: &ScalarField, term: &ReactionTerm, eps: f64, theta: f64, p: Point) -> Result<ExitRadius> {
    check_eps(eps)?;
    let tau = term.tau();
    if !(theta >= 0.0 && theta < tau) {
        return Err(Error::invalid(format!("theta must lie in [0, {tau}), got {theta}")));
    }
    let up = sample(u, p)?;
    if up < theta * eps {
        return Err(Error::invalid(format!("u(p) = {up} is below theta·eps = {}", theta * eps)));
    }
    let level = tau * eps;
    if up >= level {
        return Ok(ExitRadius { radius: 0.0, reached: true });
    }
    let grid = u.grid();
    let d = (0..grid.len())
        .filter(|&k| u.values()[k] >= level)
        .map(|k| {
            let q = grid.point(k);
            (q[0] - p[0]).hypot(q[1] - p[1])
        })
        .fold(f64::INFINITY, f64::min);
    Ok(ExitRadius { radius: d, reached: d.is_finite() })
}

/// Result of [`poincare_ratio`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareRatio {
    /// `‖g‖_{L¹} / (R ‖∇g‖_{L¹})` over the region nodes, `R` the half-diameter.
    pub ratio: f64,
    /// Fraction of region nodes where `g` vanishes.
    pub zero_fraction: f64,
}

/// L¹ ratio on `region`, with node-count quadrature. Returns ratio 0 when the
/// gradient vanishes identically.
pub fn poincare_ratio(g: &ScalarField, region: &Window) -> Result<PoincareRatio> {
    let grid = g.grid();
    let dim = grid.dim();
    let nodes: Vec<usize> = (0..grid.len()).filter(|&k| region.contains(grid.point(k), dim)).collect();
    if nodes.is_empty() {
        return Err(Error::invalid("region contains no grid nodes"));
    }
    let radius = region.half_diameter(dim);
    if !(radius > 0.0) {
        return Err(Error::invalid("region must have positive diameter"));
    }
    let grad = gradient(g);
    let vals = g.values();
    let cut = ZERO_RELATIVE * nodes.iter().map(|&k| vals[k].abs()).fold(0.0, f64::max);
    let zeros = nodes.iter().filter(|&&k| vals[k].abs() <= cut).count();
    let mass: f64 = nodes.iter().map(|&k| vals[k].abs()).sum();
    let slope: f64 = nodes.iter().map(|&k| grad.norm_at(k)).sum();
    let ratio = if slope > 0.0 { mass / (radius * slope) } else { 0.0 };
    Ok(PoincareRatio { ratio, zero_fraction: zeros as f64 / nodes.len() as f64 })
}

/// `∫ |F_ε(u_ε) − χ_{u_limit > 0}|` by the trapezoid rule.
pub fn l1_gap(u_eps: &ScalarField, u_limit: &ScalarField, term: &ReactionTerm, eps: f64) -> Result<f64> {
    if !u_eps.grid().compatible(u_limit.grid()) {
        return Err(Error::invalid("l1_gap needs both fields on the same grid"));
    }
    let sc = term.scaled(eps)?;
    let vals: Vec<f64> =
        u_eps.values().iter().zip(u_limit.values()).map(|(&a, &b)| (sc.potential(a) - if b > 0.0 { 1.0 } else { 0.0 }).abs()).collect();
    Ok(integrate(&ScalarField::new(u_eps.grid().clone(), vals)?))
}

const FAR: f64 = 1e30;

/// Exact squared distance transform along one line (lower envelope of parabolas).
fn distance_transform_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let cross = |q: usize, p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
    for q in 1..n {
        let mut s = cross(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = cross(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, slot) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *slot = d * d + f[v[k]];
    }
}

/// Squared distance, in node units, from every node to the set.
fn squared_distance_to(grid: &GridSpec, set: &[usize]) -> Vec<f64> {
    let [nx, ny] = grid.shape();
    let mut d = vec![FAR; grid.len()];
    for &k in set {
        d[k] = 0.0;
    }
    let mut out = vec![0.0; nx.max(ny)];
    for j in 0..ny {
        let row = &mut d[j * nx..(j + 1) * nx];
        distance_transform_1d(row, &mut out[..nx]);
        row.copy_from_slice(&out[..nx]);
    }
    if ny > 1 {
        let mut col = vec![0.0; ny];
        for i in 0..nx {
            for j in 0..ny {
                col[j] = d[j * nx + i];
            }
            distance_transform_1d(&col, &mut out[..ny]);
            for j in 0..ny {
                d[j * nx + i] = out[j];
            }
        }
    }
    d
}

/// Symmetric Hausdorff distance between two node sets of `grid`, in physical units.
pub fn hausdorff_distance(grid: &GridSpec, a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("hausdorff_distance needs two nonempty node sets"));
    }
    if let Some(&k) = a.iter().chain(b).find(|&&k| k >= grid.len()) {
        return Err(Error::invalid(format!("node index {k} is outside the grid")));
    }
    let directed = |from: &[usize], to: &[usize]| {
        let d = squared_distance_to(grid, to);
        from.iter().map(|&k| d[k]).fold(0.0, f64::max).sqrt()
    };
    Ok(directed(a, b).max(directed(b, a)) * grid.h())
}

/// Blow-down `x ↦ ε u(x/ε)` sampled on `target`.
pub fn blowdown(u: &ScalarField, eps: f64, target: &GridSpec) -> Result<ScalarField> {
    check_eps(eps)?;
    if target.dim() != u.grid().dim() {
        return Err(Error::invalid("blowdown target must have the field's dimension"));
    }
    let mut vals = Vec::with_capacity(target.len());
    for k in 0..target.len() {
        let x = target.point(k);
        vals.push(eps * sample(u, [x[0] / eps, x[1] / eps])?);
    }
    ScalarField::new(target.clone(), vals)
}

/// One-line CSV summary `param values...,value` of a report, for plot data.
pub fn report_csv(report: &CheckReport) -> String {
    let keys: Vec<&String> = report.params.first().map(|p| p.keys().collect()).unwrap_or_default();
    let mut out = keys.iter().map(|k| k.as_str()).chain(["value"]).collect::<Vec<_>>().join(",");
    out.push('\n');
    for (p, v) in report.params.iter().zip(&report.values) {
        let mut row: Vec<f64> = keys.iter().map(|k| p.get(*k).copied().unwrap_or(f64::NAN)).collect();
        row.push(v.unwrap_or(f64::NAN));
        io::push_row(&mut out, &row);
    }
    out
}
