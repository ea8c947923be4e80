//! Uniform 1D/2D grids, scalar fields sampled on their nodes, discrete calculus,
//! and the closed-form compactly supported vector fields used to deform domains.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// A point in the plane; 1D grids only use the first coordinate.
pub type Point = [f64; 2];

/// Flow steps used by [`pullback`].
pub const PULLBACK_FLOW_STEPS: usize = 16;

/// Uniform node grid. Nodes are stored row-major: index `j * nx + i`, where `i`
/// runs along `x` and `j` along `y` (`ny = 1` in 1D).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridWire", into = "GridWire")]
pub struct GridSpec {
    dim: usize,
    origin: Point,
    h: f64,
    shape: [usize; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridWire {
    dim: usize,
    origin: Vec<f64>,
    h: f64,
    shape: Vec<usize>,
}

impl TryFrom<GridWire> for GridSpec {
    type Error = Error;

    fn try_from(w: GridWire) -> Result<Self> {
        if w.origin.len() != w.dim || w.shape.len() != w.dim {
            return Err(Error::invalid("origin and shape must have `dim` entries"));
        }
        match w.dim {
            1 => GridSpec::new_1d(w.origin[0], w.h, w.shape[0]),
            2 => GridSpec::new_2d([w.origin[0], w.origin[1]], w.h, [w.shape[0], w.shape[1]]),
            d => Err(Error::invalid(format!("unsupported dimension {d}"))),
        }
    }
}

impl From<GridSpec> for GridWire {
    fn from(g: GridSpec) -> Self {
        GridWire { dim: g.dim, origin: g.origin[..g.dim].to_vec(), h: g.h, shape: g.shape[..g.dim].to_vec() }
    }
}

fn check_spacing(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("grid spacing must be positive, got {h}")));
    }
    Ok(())
}

impl GridSpec {
    pub fn new_1d(x0: f64, h: f64, nx: usize) -> Result<Self> {
        check_spacing(h)?;
        if nx < 3 || !x0.is_finite() {
            return Err(Error::invalid("1D grid needs at least 3 nodes and a finite origin"));
        }
        Ok(GridSpec { dim: 1, origin: [x0, 0.0], h, shape: [nx, 1] })
    }

    pub fn new_2d(origin: Point, h: f64, shape: [usize; 2]) -> Result<Self> {
        check_spacing(h)?;
        if shape[0] < 3 || shape[1] < 3 || !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("2D grid needs at least 3 nodes per axis and a finite origin"));
        }
        if shape[0].checked_mul(shape[1]).is_none_or(|n| n > 1 << 28) {
            return Err(Error::invalid("grid too large"));
        }
        Ok(GridSpec { dim: 2, origin, h, shape })
    }

    /// Grid on `[lo, hi]` (1D) with spacing as close to `h` as divides the interval.
    pub fn interval(lo: f64, hi: f64, h: f64) -> Result<Self> {
        check_spacing(h)?;
        let n = ((hi - lo) / h).round() as usize;
        Self::new_1d(lo, (hi - lo) / n as f64, n + 1)
    }

    /// Grid on the square `[lo, hi]²`.
    pub fn square(lo: f64, hi: f64, h: f64) -> Result<Self> {
        Self::rect([lo, lo], [hi, hi], h)
    }

    /// Grid on the box `[lo, hi]`; both sides must be (close to) multiples of `h`.
    pub fn rect(lo: Point, hi: Point, h: f64) -> Result<Self> {
        check_spacing(h)?;
        let nx = ((hi[0] - lo[0]) / h).round() as usize;
        let ny = ((hi[1] - lo[1]) / h).round() as usize;
        if ((nx as f64) * h - (hi[0] - lo[0])).abs() > 1e-9 * h.max(1.0) || ((ny as f64) * h - (hi[1] - lo[1])).abs() > 1e-9 * h.max(1.0) {
            return Err(Error::invalid("box sides must be multiples of h"));
        }
        Self::new_2d(lo, h, [nx + 1, ny + 1])
    }

    /// Same node layout with spacing and origin multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        check_spacing(self.h * factor)?;
        Ok(GridSpec { origin: [self.origin[0] * factor, self.origin[1] * factor], h: self.h * factor, ..self.clone() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn nx(&self) -> usize {
        self.shape[0]
    }

    pub fn ny(&self) -> usize {
        self.shape[1]
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Upper corner of the domain.
    pub fn upper(&self) -> Point {
        let hi1 = if self.dim == 2 { self.origin[1] + self.h * (self.shape[1] - 1) as f64 } else { 0.0 };
        [self.origin[0] + self.h * (self.shape[0] - 1) as f64, hi1]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.shape[0] + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.shape[0], idx / self.shape[0])
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point {
        let y = if self.dim == 2 { self.origin[1] + self.h * j as f64 } else { 0.0 };
        [self.origin[0] + self.h * i as f64, y]
    }

    #[inline]
    pub fn point(&self, idx: usize) -> Point {
        let (i, j) = self.ij(idx);
        self.node(i, j)
    }

    /// True for nodes on the outer boundary of the grid.
    pub fn is_boundary(&self, idx: usize) -> bool {
        let (i, j) = self.ij(idx);
        let bx = i == 0 || i + 1 == self.shape[0];
        if self.dim == 1 {
            bx
        } else {
            bx || j == 0 || j + 1 == self.shape[1]
        }
    }

    /// Whether `p` lies in the closed domain (with a rounding allowance).
    pub fn contains(&self, p: Point) -> bool {
        let tol = 1e-9 * self.h;
        let hi = self.upper();
        let ok_x = p[0] >= self.origin[0] - tol && p[0] <= hi[0] + tol;
        ok_x && (self.dim == 1 || (p[1] >= self.origin[1] - tol && p[1] <= hi[1] + tol))
    }

    /// Distance from `p` to the boundary of the domain (negative outside).
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        let hi = self.upper();
        let mut d = (p[0] - self.origin[0]).min(hi[0] - p[0]);
        if self.dim == 2 {
            d = d.min(p[1] - self.origin[1]).min(hi[1] - p[1]);
        }
        d
    }

    /// Same layout up to rounding.
    pub fn compatible(&self, other: &GridSpec) -> bool {
        let tol = 1e-12 * self.h.max(1.0);
        self.dim == other.dim
            && self.shape == other.shape
            && (self.h - other.h).abs() <= tol
            && (self.origin[0] - other.origin[0]).abs() <= tol
            && (self.origin[1] - other.origin[1]).abs() <= tol
    }

    /// Trapezoid weight of a node (without the `h^dim` factor).
    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        let (i, j) = self.ij(idx);
        let wx = if i == 0 || i + 1 == self.shape[0] { 0.5 } else { 1.0 };
        let wy = if self.dim == 1 || (j != 0 && j + 1 != self.shape[1]) { 1.0 } else { 0.5 };
        wx * wy
    }

    /// `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("grid serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Node values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!("expected {} values, got {}", grid.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("field values must be finite"));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.point(k))).collect();
        ScalarField { grid, values }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.len();
        ScalarField { grid, values: vec![0.0; n] }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Sup-norm distance to another field on the same grid.
    pub fn sup_distance(&self, other: &ScalarField) -> Result<f64> {
        if !self.grid.compatible(&other.grid) {
            return Err(Error::invalid("grids differ"));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// CSV with header `i,j,x,y,u` (`i,x,u` in 1D), rows in node order.
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut out = String::with_capacity(g.len() * 64);
        out.push_str(if g.dim == 1 { "i,x,u\n" } else { "i,j,x,y,u\n" });
        for k in 0..g.len() {
            let (i, j) = g.ij(k);
            let p = g.point(k);
            if g.dim == 1 {
                out.push_str(&format!("{i},"));
                io::push_row(&mut out, &[p[0], self.values[k]]);
            } else {
                out.push_str(&format!("{i},{j},"));
                io::push_row(&mut out, &[p[0], p[1], self.values[k]]);
            }
        }
        out
    }

    /// Parses [`ScalarField::to_csv`] output against its grid sidecar.
    pub fn from_csv(text: &str, grid: &GridSpec) -> Result<Self> {
        let header: &[&str] = if grid.dim == 1 { &["i", "x", "u"] } else { &["i", "j", "x", "y", "u"] };
        let rows = io::parse_table(text, header)?;
        if rows.len() != grid.len() {
            return Err(Error::Parse(format!("expected {} rows, found {}", grid.len(), rows.len())));
        }
        let tol = 1e-9 * grid.h.max(1.0);
        let mut values = Vec::with_capacity(rows.len());
        for (k, row) in rows.iter().enumerate() {
            let (i, j) = grid.ij(k);
            let p = grid.point(k);
            let (ri, rj, rx, ry, u) =
                if grid.dim == 1 { (row[0], 0.0, row[1], 0.0, row[2]) } else { (row[0], row[1], row[2], row[3], row[4]) };
            if ri != i as f64 || rj != j as f64 || (rx - p[0]).abs() > tol || (ry - p[1]).abs() > tol {
                return Err(Error::Parse(format!("row {k} does not match the grid node ({i}, {j})")));
            }
            values.push(u);
        }
        ScalarField::new(grid.clone(), values).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// One `Vec` of node values per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: GridSpec,
    pub components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn norm_at(&self, idx: usize) -> f64 {
        self.components.iter().map(|c| c[idx] * c[idx]).sum::<f64>().sqrt()
    }

    pub fn at(&self, idx: usize) -> Point {
        let mut p = [0.0; 2];
        for (a, c) in self.components.iter().enumerate() {
            p[a] = c[idx];
        }
        p
    }
}

/// Derivative along one axis: centered in the interior, one-sided second order at
/// the ends.
fn axis_derivative(u: &[f64], grid: &GridSpec, axis: usize, out: &mut [f64]) {
    let [nx, ny] = grid.shape;
    let h = grid.h;
    let (n, stride) = if axis == 0 { (nx, 1) } else { (ny, nx) };
    let lines = if axis == 0 { ny } else { nx };
    for line in 0..lines {
        let base = if axis == 0 { line * nx } else { line };
        let at = |k: usize| u[base + k * stride];
        for k in 0..n {
            let d = if k == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
            } else if k + 1 == n {
                (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
            } else {
                (at(k + 1) - at(k - 1)) / (2.0 * h)
            };
            out[base + k * stride] = d;
        }
    }
}

/// Second-order finite-difference gradient.
pub fn gradient(u: &ScalarField) -> VectorField {
    let g = &u.grid;
    let components = (0..g.dim)
        .map(|axis| {
            let mut c = vec![0.0; g.len()];
            axis_derivative(&u.values, g, axis, &mut c);
            c
        })
        .collect();
    VectorField { grid: g.clone(), components }
}

/// 3-point (1D) / 5-point (2D) Laplacian at interior nodes; boundary nodes are set
/// to 0 (see [`GridSpec::is_boundary`]).
pub fn laplacian(u: &ScalarField) -> ScalarField {
    let g = &u.grid;
    let mut out = vec![0.0; g.len()];
    laplacian_into(&u.values, g, &mut out);
    ScalarField { grid: g.clone(), values: out }
}

pub(crate) fn laplacian_into(u: &[f64], g: &GridSpec, out: &mut [f64]) {
    let [nx, ny] = g.shape;
    let inv = 1.0 / (g.h * g.h);
    if g.dim == 1 {
        out[0] = 0.0;
        out[nx - 1] = 0.0;
        for i in 1..nx - 1 {
            out[i] = (u[i - 1] - 2.0 * u[i] + u[i + 1]) * inv;
        }
        return;
    }
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            out[k] = if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny {
                0.0
            } else {
                (u[k - 1] + u[k + 1] + u[k - nx] + u[k + nx] - 4.0 * u[k]) * inv
            };
        }
    }
}

/// Tensor-product trapezoid rule.
pub fn integrate(u: &ScalarField) -> f64 {
    integrate_values(&u.grid, &u.values)
}

pub(crate) fn integrate_values(g: &GridSpec, values: &[f64]) -> f64 {
    let sum: f64 = values.iter().enumerate().map(|(k, v)| g.weight(k) * v).sum();
    sum * g.cell_volume()
}

/// Multilinear interpolation at `p`.
pub fn sample(u: &ScalarField, p: Point) -> Result<f64> {
    sample_values(&u.grid, &u.values, p)
}

fn cell_coord(x: f64, x0: f64, h: f64, n: usize) -> (usize, f64) {
    let s = (x - x0) / h;
    let i = (s.floor().max(0.0) as usize).min(n - 2);
    (i, (s - i as f64).clamp(0.0, 1.0))
}

pub(crate) fn sample_values(g: &GridSpec, values: &[f64], p: Point) -> Result<f64> {
    if !g.contains(p) {
        return Err(Error::Domain { x: p[0], y: p[1] });
    }
    let (i, wx) = cell_coord(p[0], g.origin[0], g.h, g.shape[0]);
    if g.dim == 1 {
        return Ok(values[i] * (1.0 - wx) + values[i + 1] * wx);
    }
    let (j, wy) = cell_coord(p[1], g.origin[1], g.h, g.shape[1]);
    let k = g.index(i, j);
    let nx = g.shape[0];
    let bottom = values[k] * (1.0 - wx) + values[k + 1] * wx;
    let top = values[k + nx] * (1.0 - wx) + values[k + nx + 1] * wx;
    Ok(bottom * (1.0 - wy) + top * wy)
}

/// Anything that can be evaluated at points of a grid domain. Pullbacks and the
/// finite-difference inner-variation oracle accept any source, so that closed-form
/// fields can be deformed without interpolation error.
pub trait FieldSource {
    fn grid(&self) -> &GridSpec;
    fn value_at(&self, p: Point) -> Result<f64>;
    fn node_value(&self, idx: usize) -> f64;

    /// The source sampled at the grid nodes.
    fn to_field(&self) -> ScalarField {
        let g = self.grid().clone();
        let values = (0..g.len()).map(|k| self.node_value(k)).collect();
        ScalarField { grid: g, values }
    }
}

impl FieldSource for ScalarField {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn value_at(&self, p: Point) -> Result<f64> {
        sample(self, p)
    }

    fn node_value(&self, idx: usize) -> f64 {
        self.values[idx]
    }
}

/// A closed-form field restricted to a grid domain.
pub struct AnalyticField<F> {
    grid: GridSpec,
    f: F,
}

impl<F: Fn(Point) -> f64> AnalyticField<F> {
    pub fn new(grid: GridSpec, f: F) -> Self {
        AnalyticField { grid, f }
    }
}

impl<F: Fn(Point) -> f64> FieldSource for AnalyticField<F> {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn value_at(&self, p: Point) -> Result<f64> {
        if !self.grid.contains(p) {
            return Err(Error::Domain { x: p[0], y: p[1] });
        }
        Ok((self.f)(p))
    }

    fn node_value(&self, idx: usize) -> f64 {
        (self.f)(self.grid.point(idx))
    }
}

/// `ψ(y) = (1 − y²)⁴` on `|y| < 1` with its first two derivatives.
#[inline]
fn bump(y: f64) -> (f64, f64, f64) {
    if y.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let q = 1.0 - y * y;
    let q2 = q * q;
    let q3 = q2 * q;
    (q2 * q2, -8.0 * y * q3, -8.0 * q3 + 48.0 * y * y * q2)
}

const MONOMIALS_2D: [(i32, i32); 10] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];

#[inline]
fn pw(x: f64, n: i32) -> f64 {
    if n < 0 {
        0.0
    } else {
        x.powi(n)
    }
}

/// One component `Xⁱ(x) = P(x − c) Π_k ψ((x_k − c_k)/w_k)` with `P` a polynomial of
/// total degree ≤ 3. Coefficients follow the monomial order `1, z₁, z₂, z₁², z₁z₂,
/// z₂², z₁³, z₁²z₂, z₁z₂², z₂³` (`1, z, z², z³` in 1D); missing trailing
/// coefficients are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpComponent {
    pub coeffs: Vec<f64>,
    pub center: Point,
    pub halfwidths: Point,
}

/// Value, Jacobian `d[i][j] = ∂ⱼXⁱ` and Hessians `dd[i][j][k] = ∂ⱼ∂ₖXⁱ` at a point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub val: [f64; 2],
    pub d: [[f64; 2]; 2],
    pub dd: [[[f64; 2]; 2]; 2],
}

impl Jet {
    pub fn div(&self, dim: usize) -> f64 {
        (0..dim).map(|i| self.d[i][i]).sum()
    }

    /// `∂ₖ div X`.
    pub fn grad_div(&self, dim: usize) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (k, gk) in g.iter_mut().enumerate().take(dim) {
            *gk = (0..dim).map(|i| self.dd[i][i][k]).sum();
        }
        g
    }
}

/// A compactly supported vector field from the admitted bump × polynomial family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VectorFieldWire", into = "VectorFieldWire")]
pub struct VectorFieldSpec {
    dim: usize,
    components: Vec<BumpComponent>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentWire {
    coeffs: Vec<f64>,
    center: Vec<f64>,
    halfwidths: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VectorFieldWire {
    dim: usize,
    components: Vec<ComponentWire>,
}

impl TryFrom<VectorFieldWire> for VectorFieldSpec {
    type Error = Error;

    fn try_from(w: VectorFieldWire) -> Result<Self> {
        let d = w.dim;
        if !(d == 1 || d == 2) {
            return Err(Error::invalid(format!("unsupported dimension {d}")));
        }
        let mut comps = Vec::with_capacity(w.components.len());
        for c in w.components {
            if c.center.len() != d || c.halfwidths.len() != d {
                return Err(Error::invalid("center and halfwidths need `dim` entries"));
            }
            let mut center = [0.0; 2];
            let mut halfwidths = [1.0; 2];
            center[..d].copy_from_slice(&c.center);
            halfwidths[..d].copy_from_slice(&c.halfwidths);
            comps.push(BumpComponent { coeffs: c.coeffs, center, halfwidths });
        }
        VectorFieldSpec::new(d, comps)
    }
}

impl From<VectorFieldSpec> for VectorFieldWire {
    fn from(x: VectorFieldSpec) -> Self {
        let d = x.dim;
        VectorFieldWire {
            dim: d,
            components: x
                .components
                .into_iter()
                .map(|c| ComponentWire { coeffs: c.coeffs, center: c.center[..d].to_vec(), halfwidths: c.halfwidths[..d].to_vec() })
                .collect(),
        }
    }
}

impl VectorFieldSpec {
    pub fn new(dim: usize, components: Vec<BumpComponent>) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::invalid(format!("unsupported dimension {dim}")));
        }
        if components.len() != dim {
            return Err(Error::invalid(format!("need {dim} components, got {}", components.len())));
        }
        let max_coeffs = if dim == 1 { 4 } else { 10 };
        for c in &components {
            if c.coeffs.len() > max_coeffs {
                return Err(Error::invalid(format!("at most {max_coeffs} coefficients per component")));
            }
            let finite = c.coeffs.iter().chain(&c.center[..dim]).chain(&c.halfwidths[..dim]).all(|v| v.is_finite());
            if !finite || c.halfwidths[..dim].iter().any(|&w| w <= 0.0) {
                return Err(Error::invalid("coefficients must be finite and half-widths positive"));
            }
        }
        Ok(VectorFieldSpec { dim, components })
    }

    /// The zero field.
    pub fn zero(dim: usize) -> Self {
        let c = BumpComponent { coeffs: vec![], center: [0.0; 2], halfwidths: [1.0; 2] };
        VectorFieldSpec { dim, components: vec![c; dim] }
    }

    /// `X = a ψ(x − c)` for a constant vector `a` and a common bump.
    pub fn constant_bump(dim: usize, a: Point, center: Point, halfwidths: Point) -> Result<Self> {
        let comps = (0..dim).map(|i| BumpComponent { coeffs: vec![a[i]], center, halfwidths }).collect();
        Self::new(dim, comps)
    }

    /// Random member of the family whose support lies in the box `[lo, hi]`: one bump
    /// per component with halfwidths between 30% and 50% of the box, and quadratic
    /// polynomials with coefficients uniform in `[−amplitude, amplitude]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, dim: usize, lo: Point, hi: Point, amplitude: f64) -> Result<Self> {
        if !(hi[0] > lo[0] && (dim == 1 || hi[1] > lo[1])) {
            return Err(Error::invalid("random vector field needs a nondegenerate box"));
        }
        let n_coeffs = if dim == 1 { 3 } else { 6 };
        let comps = (0..dim)
            .map(|_| {
                let mut center = [0.0; 2];
                let mut halfwidths = [1.0; 2];
                for k in 0..dim {
                    let half = 0.5 * (hi[k] - lo[k]);
                    let w = half * rng.gen_range(0.3..0.5);
                    halfwidths[k] = w;
                    center[k] = lo[k] + w + rng.gen_range(0.0..1.0) * (hi[k] - lo[k] - 2.0 * w);
                }
                let coeffs = (0..n_coeffs).map(|_| amplitude * rng.gen_range(-1.0..1.0)).collect();
                BumpComponent { coeffs, center, halfwidths }
            })
            .collect();
        Self::new(dim, comps)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[BumpComponent] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.coeffs.iter().all(|&a| a == 0.0))
    }

    /// Smallest box containing the supports of all components.
    pub fn support_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in self.components.iter().filter(|c| c.coeffs.iter().any(|&a| a != 0.0)) {
            for a in 0..self.dim {
                lo[a] = lo[a].min(c.center[a] - c.halfwidths[a]);
                hi[a] = hi[a].max(c.center[a] + c.halfwidths[a]);
            }
        }
        if self.dim == 1 {
            lo[1] = 0.0;
            hi[1] = 0.0;
        }
        (lo, hi)
    }

    /// Whether `p` lies in the closed support box.
    pub fn in_support(&self, p: Point) -> bool {
        let (lo, hi) = self.support_box();
        (0..self.dim).all(|a| p[a] >= lo[a] && p[a] <= hi[a])
    }

    /// Checks that the support box lies strictly inside the grid domain.
    pub fn check_inside(&self, grid: &GridSpec) -> Result<()> {
        if self.dim != grid.dim() {
            return Err(Error::invalid("vector field and grid dimensions differ"));
        }
        if self.is_zero() {
            return Ok(());
        }
        let (lo, hi) = self.support_box();
        let glo = grid.origin();
        let ghi = grid.upper();
        for a in 0..self.dim {
            if !(lo[a] > glo[a] && hi[a] < ghi[a]) {
                return Err(Error::invalid("support box of X must lie strictly inside the grid domain"));
            }
        }
        Ok(())
    }

    pub fn value(&self, p: Point) -> Point {
        let mut v = [0.0; 2];
        for (i, c) in self.components.iter().enumerate() {
            v[i] = self.component_value(c, p);
        }
        v
    }

    fn component_value(&self, c: &BumpComponent, p: Point) -> f64 {
        let z = [p[0] - c.center[0], p[1] - c.center[1]];
        let mut b = 1.0;
        for (zk, wk) in z.iter().zip(c.halfwidths).take(self.dim) {
            b *= bump(zk / wk).0;
            if b == 0.0 {
                return 0.0;
            }
        }
        let poly = if self.dim == 1 {
            c.coeffs.iter().enumerate().map(|(n, &a)| a * z[0].powi(n as i32)).sum::<f64>()
        } else {
            c.coeffs.iter().zip(MONOMIALS_2D).map(|(&a, (e0, e1))| a * pw(z[0], e0) * pw(z[1], e1)).sum::<f64>()
        };
        poly * b
    }

    /// Value and exact first and second partial derivatives.
    pub fn jet(&self, p: Point) -> Jet {
        let mut jet = Jet::default();
        let d = self.dim;
        for (i, c) in self.components.iter().enumerate() {
            let z = [p[0] - c.center[0], p[1] - c.center[1]];
            // bump factors per axis: (value, first, second) in physical units
            let mut f = [(1.0, 0.0, 0.0); 2];
            let mut outside = false;
            for a in 0..d {
                let w = c.halfwidths[a];
                let (v, v1, v2) = bump(z[a] / w);
                if v == 0.0 && v1 == 0.0 && v2 == 0.0 {
                    outside = true;
                }
                f[a] = (v, v1 / w, v2 / (w * w));
            }
            if outside {
                continue;
            }
            let (b, bg, bh) = if d == 1 {
                (f[0].0, [f[0].1, 0.0], [[f[0].2, 0.0], [0.0, 0.0]])
            } else {
                (
                    f[0].0 * f[1].0,
                    [f[0].1 * f[1].0, f[0].0 * f[1].1],
                    [[f[0].2 * f[1].0, f[0].1 * f[1].1], [f[0].1 * f[1].1, f[0].0 * f[1].2]],
                )
            };
            let (pv, pg, ph) = poly_jet(d, &c.coeffs, z);
            jet.val[i] = pv * b;
            for j in 0..d {
                jet.d[i][j] = pg[j] * b + pv * bg[j];
                for k in 0..d {
                    jet.dd[i][j][k] = ph[j][k] * b + pg[j] * bg[k] + pg[k] * bg[j] + pv * bh[j][k];
                }
            }
        }
        jet
    }

    /// Sup of `|X|` and of `|X| + |DX|` (Frobenius) over a lattice covering the
    /// support, returned as `(‖X‖_∞, ‖X‖_{C¹})`.
    pub fn norms(&self, samples_per_axis: usize) -> (f64, f64) {
        if self.is_zero() {
            return (0.0, 0.0);
        }
        let (lo, hi) = self.support_box();
        let n = samples_per_axis.max(2);
        let ny = if self.dim == 1 { 1 } else { n };
        let (mut c0, mut c1) = (0.0_f64, 0.0_f64);
        for jy in 0..ny {
            for jx in 0..n {
                let x = lo[0] + (hi[0] - lo[0]) * jx as f64 / (n - 1) as f64;
                let y = if self.dim == 1 { 0.0 } else { lo[1] + (hi[1] - lo[1]) * jy as f64 / (n - 1) as f64 };
                let jet = self.jet([x, y]);
                let v = (jet.val[0].powi(2) + jet.val[1].powi(2)).sqrt();
                let dv = jet.d.iter().flatten().map(|a| a * a).sum::<f64>().sqrt();
                c0 = c0.max(v);
                c1 = c1.max(dv);
            }
        }
        (c0, c0 + c1)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("vector field serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn poly_jet(dim: usize, coeffs: &[f64], z: Point) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let mut v = 0.0;
    let mut g = [0.0; 2];
    let mut hs = [[0.0; 2]; 2];
    if dim == 1 {
        for (n, &a) in coeffs.iter().enumerate() {
            let n = n as i32;
            v += a * pw(z[0], n);
            g[0] += a * n as f64 * pw(z[0], n - 1);
            hs[0][0] += a * (n * (n - 1)) as f64 * pw(z[0], n - 2);
        }
        return (v, g, hs);
    }
    for (&a, (e0, e1)) in coeffs.iter().zip(MONOMIALS_2D) {
        if a == 0.0 {
            continue;
        }
        let (x, y) = (z[0], z[1]);
        let (f0, f1) = (e0 as f64, e1 as f64);
        v += a * pw(x, e0) * pw(y, e1);
        g[0] += a * f0 * pw(x, e0 - 1) * pw(y, e1);
        g[1] += a * f1 * pw(x, e0) * pw(y, e1 - 1);
        hs[0][0] += a * f0 * (f0 - 1.0) * pw(x, e0 - 2) * pw(y, e1);
        hs[1][1] += a * f1 * (f1 - 1.0) * pw(x, e0) * pw(y, e1 - 2);
        let mixed = a * f0 * f1 * pw(x, e0 - 1) * pw(y, e1 - 1);
        hs[0][1] += mixed;
        hs[1][0] += mixed;
    }
    (v, g, hs)
}

/// RK4 integration of `∂ₜφ = X(φ)` from `p` over time `t` in `n_steps` steps.
pub fn flow(x: &VectorFieldSpec, t: f64, p: Point, n_steps: usize) -> Point {
    let n = n_steps.max(1);
    if t == 0.0 || !x.in_support(p) {
        return p;
    }
    let dt = t / n as f64;
    let add = |a: Point, b: Point, s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
    let mut q = p;
    for _ in 0..n {
        let k1 = x.value(q);
        let k2 = x.value(add(q, k1, 0.5 * dt));
        let k3 = x.value(add(q, k2, 0.5 * dt));
        let k4 = x.value(add(q, k3, dt));
        q = [q[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]), q[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])];
    }
    q
}

/// The deformed field `u ∘ φ₋ₜ` at the grid nodes.
pub fn pullback<S: FieldSource + ?Sized>(u: &S, x: &VectorFieldSpec, t: f64) -> Result<ScalarField> {
    let g = u.grid().clone();
    if x.dim() != g.dim() {
        return Err(Error::invalid("vector field and grid dimensions differ"));
    }
    let mut values = Vec::with_capacity(g.len());
    for k in 0..g.len() {
        let p = g.point(k);
        if t == 0.0 || !x.in_support(p) {
            values.push(u.node_value(k));
        } else {
            values.push(u.value_at(flow(x, -t, p, PULLBACK_FLOW_STEPS))?);
        }
    }
    ScalarField::new(g, values)
}
