//! Quadrature and gradients restricted to the positive phase `{u > 0}` of a
//! limit field, whose gradient jumps across the free boundary.
//!
//! Gradients at positive nodes only use positive neighbours (centered where
//! possible, one-sided second order otherwise). Integrals are assembled cell by
//! cell: a cell contributes its positive area fraction times the mean integrand
//! over its positive corners. The fraction is exact for the piecewise-linear
//! interpolant (two triangles per cell) of an extension of `u` that is extrapolated
//! linearly from the positive side into the zero phase.

use crate::field::{GridSpec, ScalarField, VectorField};

/// Phase data of a field with a zero phase.
#[derive(Debug, Clone)]
pub struct PhaseQuadrature {
    grid: GridSpec,
    positive: Vec<bool>,
    /// Cell fractions indexed by the lower-left node.
    fractions: Vec<f64>,
    gradient: VectorField,
}

fn segment_fraction(a: f64, b: f64) -> f64 {
    match (a > 0.0, b > 0.0) {
        (true, true) => 1.0,
        (false, false) => 0.0,
        (true, false) => a / (a - b),
        (false, true) => b / (b - a),
    }
}

fn triangle_fraction(v: [f64; 3]) -> f64 {
    let pos: Vec<f64> = v.iter().copied().filter(|&x| x > 0.0).collect();
    let neg: Vec<f64> = v.iter().copied().filter(|&x| x <= 0.0).collect();
    match pos.len() {
        0 => 0.0,
        3 => 1.0,
        1 => {
            let p = pos[0];
            p * p / ((p - neg[0]) * (p - neg[1]))
        }
        _ => {
            let n = neg[0];
            1.0 - n * n / ((pos[0] - n) * (pos[1] - n))
        }
    }
}

impl PhaseQuadrature {
    pub fn new(u: &ScalarField) -> Self {
        let grid = u.grid().clone();
        let vals = u.values();
        let positive: Vec<bool> = vals.iter().map(|&v| v > 0.0).collect();
        let ext = extension(&grid, vals, &positive);
        let fractions = cell_fractions(&grid, &ext);
        let gradient = phase_gradient(&grid, vals, &positive);
        PhaseQuadrature { grid, positive, fractions, gradient }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn is_positive(&self, idx: usize) -> bool {
        self.positive[idx]
    }

    /// One-sided-aware gradient; zero on the zero phase.
    pub fn gradient(&self) -> &VectorField {
        &self.gradient
    }

    /// Gradient of another node field using the same positive-phase stencils.
    pub fn masked_gradient(&self, values: &[f64]) -> VectorField {
        phase_gradient(&self.grid, values, &self.positive)
    }

    /// Area (length in 1D) of the positive phase.
    pub fn positive_measure(&self) -> f64 {
        self.fractions.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `∫_{u>0} g` for node values `g` (only read at positive nodes).
    pub fn integrate(&self, g: &[f64]) -> f64 {
        let grid = &self.grid;
        let [nx, ny] = grid.shape();
        let mut total = 0.0;
        if grid.dim() == 1 {
            for i in 0..nx - 1 {
                let frac = self.fractions[i];
                if frac > 0.0 {
                    total += frac * self.mean_positive(&[i, i + 1], g);
                }
            }
        } else {
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let k = j * nx + i;
                    let frac = self.fractions[k];
                    if frac > 0.0 {
                        total += frac * self.mean_positive(&[k, k + 1, k + nx, k + nx + 1], g);
                    }
                }
            }
        }
        total * grid.cell_volume()
    }

    fn mean_positive(&self, corners: &[usize], g: &[f64]) -> f64 {
        let (mut s, mut n) = (0.0, 0);
        for &c in corners {
            if self.positive[c] {
                s += g[c];
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    }
}

/// Values of `u` on the positive phase; nonpositive linear extrapolations of the
/// positive side on the zero phase.
fn extension(grid: &GridSpec, u: &[f64], positive: &[bool]) -> Vec<f64> {
    let [nx, ny] = grid.shape();
    let dirs: &[(isize, isize)] =
        if grid.dim() == 1 { &[(1, 0), (-1, 0)] } else { &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)] };
    let at = |i: isize, j: isize| -> Option<usize> {
        (i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny).then(|| j as usize * nx + i as usize)
    };
    let mut ext = u.to_vec();
    for k in 0..grid.len() {
        if positive[k] {
            continue;
        }
        let (i, j) = grid.ij(k);
        let (i, j) = (i as isize, j as isize);
        let (mut sum, mut count, mut nearest) = (0.0, 0, 0.0_f64);
        for &(di, dj) in dirs {
            let Some(n1) = at(i + di, j + dj) else { continue };
            if !positive[n1] {
                continue;
            }
            nearest = nearest.max(u[n1]);
            if let Some(n2) = at(i + 2 * di, j + 2 * dj) {
                if positive[n2] {
                    sum += 2.0 * u[n1] - u[n2];
                    count += 1;
                }
            }
        }
        ext[k] = if count > 0 {
            (sum / count as f64).min(0.0)
        } else if nearest > 0.0 {
            -nearest
        } else {
            -1.0
        };
    }
    ext
}

fn cell_fractions(grid: &GridSpec, ext: &[f64]) -> Vec<f64> {
    let [nx, ny] = grid.shape();
    let mut out = vec![0.0; grid.len()];
    if grid.dim() == 1 {
        for i in 0..nx - 1 {
            out[i] = segment_fraction(ext[i], ext[i + 1]);
        }
        return out;
    }
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let k = j * nx + i;
            let (a, b, c, d) = (ext[k], ext[k + 1], ext[k + nx], ext[k + nx + 1]);
            if a > 0.0 && b > 0.0 && c > 0.0 && d > 0.0 {
                out[k] = 1.0;
            } else if a > 0.0 || b > 0.0 || c > 0.0 || d > 0.0 {
                out[k] = 0.5 * (triangle_fraction([a, b, d]) + triangle_fraction([a, d, c]));
            }
        }
    }
    out
}

fn phase_gradient(grid: &GridSpec, u: &[f64], positive: &[bool]) -> VectorField {
    let [nx, ny] = grid.shape();
    let h = grid.h();
    let mut components = Vec::with_capacity(grid.dim());
    for axis in 0..grid.dim() {
        let (n, stride) = if axis == 0 { (nx, 1) } else { (ny, nx) };
        let mut c = vec![0.0; grid.len()];
        for k in 0..grid.len() {
            if !positive[k] {
                continue;
            }
            let (i, j) = grid.ij(k);
            let pos = if axis == 0 { i } else { j };
            let ok = |off: isize| {
                let p = pos as isize + off;
                p >= 0 && (p as usize) < n && positive[(k as isize + off * stride as isize) as usize]
            };
            let v = |off: isize| u[(k as isize + off * stride as isize) as usize];
            c[k] = if ok(-1) && ok(1) {
                (v(1) - v(-1)) / (2.0 * h)
            } else if ok(1) && ok(2) {
                (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
            } else if ok(-1) && ok(-2) {
                (3.0 * v(0) - 4.0 * v(-1) + v(-2)) / (2.0 * h)
            } else if ok(1) {
                (v(1) - v(0)) / h
            } else if ok(-1) {
                (v(0) - v(-1)) / h
            } else {
                0.0
            };
        }
        components.push(c);
    }
    VectorField { grid: grid.clone(), components }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_plane_measure_and_gradient() {
        let g = GridSpec::square(-1.0, 1.0, 0.05).unwrap();
        let u = ScalarField::from_fn(g.clone(), |p| p[1].max(0.0));
        let q = PhaseQuadrature::new(&u);
        assert!((q.positive_measure() - 2.0).abs() < 1e-12);
        for k in 0..g.len() {
            if q.is_positive(k) {
                assert!((q.gradient().components[1][k] - 1.0).abs() < 1e-12);
                assert!(q.gradient().components[0][k].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tilted_line_measure_is_exact() {
        // The piecewise-linear interpolant of an affine field is the field itself.
        let g = GridSpec::square(-1.0, 1.0, 0.1).unwrap();
        let u = ScalarField::from_fn(g, |p| (0.3 * p[0] + p[1] - 0.137).max(0.0));
        let q = PhaseQuadrature::new(&u);
        // area of {y > 0.137 - 0.3x} in the square
        let want = 2.0 * (1.0 - 0.137);
        assert!((q.positive_measure() - want).abs() < 1e-12, "{}", q.positive_measure());
    }

    #[test]
    fn disc_area_converges() {
        let err = |h: f64| {
            let g = GridSpec::square(-1.0, 1.0, h).unwrap();
            let u = ScalarField::from_fn(g, |p| (0.5 - (p[0] * p[0] + p[1] * p[1]).sqrt()).max(0.0));
            (PhaseQuadrature::new(&u).positive_measure() - std::f64::consts::PI * 0.25).abs()
        };
        let (a, b) = (err(0.02), err(0.01));
        assert!(b < 1e-3 && a / b > 3.0, "{a} {b}");
    }

    #[test]
    fn one_dimensional_fraction() {
        let g = GridSpec::interval(-1.0, 1.0, 0.1).unwrap();
        let u = ScalarField::from_fn(g, |p| (p[0] - 0.23).max(0.0));
        let q = PhaseQuadrature::new(&u);
        assert!((q.positive_measure() - 0.77).abs() < 1e-12);
        let ones = vec![1.0; q.grid().len()];
        assert!((q.integrate(&ones) - 0.77).abs() < 1e-12);
    }

    #[test]
    fn triangle_fractions() {
        assert_eq!(triangle_fraction([1.0, -1.0, -1.0]), 0.25);
        assert_eq!(triangle_fraction([1.0, 1.0, -1.0]), 0.75);
        assert_eq!(triangle_fraction([1.0, 0.0, 0.0]), 1.0);
        assert_eq!(triangle_fraction([0.0, 0.0, 0.0]), 0.0);
    }
}
