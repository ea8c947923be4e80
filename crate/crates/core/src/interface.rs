//! Level-set extraction by marching squares, with normals, gradient trace and
//! level-set curvature `H = div(∇u/|∇u|)` attached to every vertex.
//!
//! At level 0 the field is treated as a limit field with a kink on the curve:
//! crossings next to exact zeros are placed by extrapolating the positive side,
//! and vertex quantities are extrapolated from stencils lying entirely in the
//! positive phase.

use crate::field::{GridSpec, Point, ScalarField};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveVertex {
    pub point: Point,
    /// Outer normal `−∇u/|∇u|` of the superlevel set.
    pub normal: Point,
    pub curvature: f64,
    /// `∇u` at the vertex (from the superlevel side).
    pub grad: Point,
    /// `|H|` above the singular-vertex cutoff `10/h`.
    pub singular: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveComponent {
    pub vertices: Vec<CurveVertex>,
    pub closed: bool,
}

/// The level set `{u = level}` as a union of simple polylines.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceCurve {
    pub level: f64,
    pub h: f64,
    pub components: Vec<CurveComponent>,
}

impl InterfaceCurve {
    pub fn is_empty(&self) -> bool {
        self.components.iter().all(|c| c.vertices.is_empty())
    }

    pub fn vertices(&self) -> impl Iterator<Item = &CurveVertex> {
        self.components.iter().flat_map(|c| c.vertices.iter())
    }

    pub fn vertex_count(&self) -> usize {
        self.components.iter().map(|c| c.vertices.len()).sum()
    }

    /// Polyline trapezoid rule for `∫ g ds`, skipping segments that touch a
    /// singular vertex.
    pub fn line_integral(&self, g: impl Fn(&CurveVertex) -> f64) -> f64 {
        let mut total = 0.0;
        for c in &self.components {
            let n = c.vertices.len();
            if n < 2 {
                continue;
            }
            let vals: Vec<f64> = c.vertices.iter().map(&g).collect();
            let segs = if c.closed { n } else { n - 1 };
            for s in 0..segs {
                let (a, b) = (s, (s + 1) % n);
                let (va, vb) = (&c.vertices[a], &c.vertices[b]);
                if va.singular || vb.singular {
                    continue;
                }
                let len = ((vb.point[0] - va.point[0]).powi(2) + (vb.point[1] - va.point[1]).powi(2)).sqrt();
                total += 0.5 * len * (vals[a] + vals[b]);
            }
        }
        total
    }

    pub fn length(&self) -> f64 {
        self.line_integral(|_| 1.0)
    }

    /// CSV `x,y,nu_x,nu_y,H`, components one after another in extraction order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,nu_x,nu_y,H\n");
        for v in self.vertices() {
            io::push_row(&mut out, &[v.point[0], v.point[1], v.normal[0], v.normal[1], v.curvature]);
        }
        out
    }
}

/// Node-centred derivative data; `None` where the stencil is unusable.
struct NodeData {
    grad: Vec<Option<(Point, f64)>>,
}

fn node_data(u: &ScalarField, kink_aware: bool) -> NodeData {
    let g = u.grid();
    let [nx, ny] = g.shape();
    let h = g.h();
    let v = u.values();
    let mut grad = vec![None; g.len()];
    for j in 1..ny.saturating_sub(1) {
        for i in 1..nx - 1 {
            let k = j * nx + i;
            if kink_aware {
                let all_pos = (0..3).all(|dj| (0..3).all(|di| v[(j + dj - 1) * nx + i + di - 1] > 0.0));
                if !all_pos {
                    continue;
                }
            }
            let ux = (v[k + 1] - v[k - 1]) / (2.0 * h);
            let uy = (v[k + nx] - v[k - nx]) / (2.0 * h);
            let uxx = (v[k + 1] - 2.0 * v[k] + v[k - 1]) / (h * h);
            let uyy = (v[k + nx] - 2.0 * v[k] + v[k - nx]) / (h * h);
            let uxy = (v[k + nx + 1] - v[k + nx - 1] - v[k - nx + 1] + v[k - nx - 1]) / (4.0 * h * h);
            let norm = (ux * ux + uy * uy).sqrt();
            if norm < 1e-12 {
                continue;
            }
            let curv = (uxx * uy * uy - 2.0 * ux * uy * uxy + uyy * ux * ux) / norm.powi(3);
            grad[k] = Some(([ux, uy], curv));
        }
    }
    NodeData { grad }
}

impl NodeData {
    /// Bilinear interpolation of `(∇u, H)` if all four cell corners are valid.
    fn sample(&self, g: &GridSpec, p: Point) -> Option<(Point, f64)> {
        if !g.contains(p) {
            return None;
        }
        let [nx, ny] = g.shape();
        let o = g.origin();
        let sx = (p[0] - o[0]) / g.h();
        let sy = (p[1] - o[1]) / g.h();
        let i = (sx.floor().max(0.0) as usize).min(nx - 2);
        let j = (sy.floor().max(0.0) as usize).min(ny - 2);
        let (wx, wy) = (sx - i as f64, sy - j as f64);
        let k = j * nx + i;
        let c = [self.grad[k]?, self.grad[k + 1]?, self.grad[k + nx]?, self.grad[k + nx + 1]?];
        let w = [(1.0 - wx) * (1.0 - wy), wx * (1.0 - wy), (1.0 - wx) * wy, wx * wy];
        let mut out = ([0.0, 0.0], 0.0);
        for (ci, wi) in c.iter().zip(w) {
            out.0[0] += wi * ci.0[0];
            out.0[1] += wi * ci.0[1];
            out.1 += wi * ci.1;
        }
        Some(out)
    }

    fn nearest(&self, g: &GridSpec, p: Point, radius: usize) -> Option<(Point, f64)> {
        let [nx, ny] = g.shape();
        let o = g.origin();
        let ci = ((p[0] - o[0]) / g.h()).round() as isize;
        let cj = ((p[1] - o[1]) / g.h()).round() as isize;
        let r = radius as isize;
        let mut best: Option<(f64, (Point, f64))> = None;
        for j in (cj - r).max(0)..=(cj + r).min(ny as isize - 1) {
            for i in (ci - r).max(0)..=(ci + r).min(nx as isize - 1) {
                let k = j as usize * nx + i as usize;
                if let Some(d) = self.grad[k] {
                    let q = g.point(k);
                    let dist = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
                    if best.is_none_or(|(b, _)| dist < b) {
                        best = Some((dist, d));
                    }
                }
            }
        }
        best.map(|b| b.1)
    }
}

/// Marching-squares extraction of `{u = level}` on a 2D grid. For 1D grids every
/// crossing is returned as a single-vertex component.
pub fn extract_interface(u: &ScalarField, level: f64) -> InterfaceCurve {
    let g = u.grid();
    let h = g.h();
    if g.dim() == 1 {
        return extract_1d(u, level);
    }
    let [nx, ny] = g.shape();
    let v = u.values();
    let inside = |k: usize| v[k] > level;
    let kink = level == 0.0;

    // segments as pairs of global edge ids: horizontal edge k→k+1 is 2k,
    // vertical edge k→k+nx is 2k+1
    let mut segments: Vec<[usize; 2]> = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let k0 = j * nx + i;
            let (k1, k2, k3) = (k0 + 1, k0 + nx + 1, k0 + nx);
            let case = inside(k0) as u8 | (inside(k1) as u8) << 1 | (inside(k2) as u8) << 2 | (inside(k3) as u8) << 3;
            let (e0, e1, e2, e3) = (2 * k0, 2 * k1 + 1, 2 * k3, 2 * k0 + 1);
            match case {
                0 | 15 => {}
                5 | 10 => {
                    let centre_in = 0.25 * (v[k0] + v[k1] + v[k2] + v[k3]) > level;
                    if (case == 5) == centre_in {
                        segments.push([e0, e1]);
                        segments.push([e2, e3]);
                    } else {
                        segments.push([e3, e0]);
                        segments.push([e1, e2]);
                    }
                }
                _ => {
                    let crossing = [(e0, k0, k1), (e1, k1, k2), (e2, k3, k2), (e3, k0, k3)];
                    let ids: Vec<usize> = crossing.iter().filter(|(_, a, b)| inside(*a) != inside(*b)).map(|c| c.0).collect();
                    segments.push([ids[0], ids[1]]);
                }
            }
        }
    }

    let edge_point = |id: usize| -> Point {
        let k = id / 2;
        let step = if id.is_multiple_of(2) { 1 } else { nx };
        let (a, b) = (k, k + step);
        let (pos, neg) = if inside(a) { (a, b) } else { (b, a) };
        let (up, un) = (v[pos] - level, v[neg] - level);
        let mut theta = up / (up - un);
        if kink && v[neg] <= 0.0 {
            // extrapolate from the next node on the positive side
            let (pi, pj) = g.ij(pos);
            let (ni, nj) = g.ij(neg);
            let (qi, qj) = (2 * pi as isize - ni as isize, 2 * pj as isize - nj as isize);
            if qi >= 0 && qj >= 0 && (qi as usize) < nx && (qj as usize) < ny {
                let uq = v[qj as usize * nx + qi as usize];
                if uq > v[pos] {
                    theta = (v[pos] / (uq - v[pos])).min(1.0);
                }
            }
        }
        let (pa, pb) = (g.point(pos), g.point(neg));
        [pa[0] + theta * (pb[0] - pa[0]), pa[1] + theta * (pb[1] - pa[1])]
    };

    let chains = chain_segments(&segments);
    let data = node_data(u, kink);
    let mut components = Vec::with_capacity(chains.len());
    for (ids, closed) in chains {
        let points: Vec<Point> = ids.iter().map(|&id| edge_point(id)).collect();
        let vertices = (0..points.len()).map(|k| vertex(u, &data, &points, k, closed, kink)).collect();
        components.push(CurveComponent { vertices, closed });
    }
    InterfaceCurve { level, h, components }
}

fn vertex(u: &ScalarField, data: &NodeData, pts: &[Point], k: usize, closed: bool, kink: bool) -> CurveVertex {
    let g = u.grid();
    let h = g.h();
    let n = pts.len();
    let (prev, next) = match (k, closed) {
        (0, true) => (n - 1, 1 % n),
        (0, false) => (0, 1.min(n - 1)),
        (k, true) => (k - 1, (k + 1) % n),
        (k, false) => (k - 1, (k + 1).min(n - 1)),
    };
    let p = pts[k];
    let tangent = [pts[next][0] - pts[prev][0], pts[next][1] - pts[prev][1]];
    let tl = (tangent[0].powi(2) + tangent[1].powi(2)).sqrt();
    // inward (towards the superlevel set) unit normal, from the polyline
    let mut inward = if tl > 0.0 { [-tangent[1] / tl, tangent[0] / tl] } else { [0.0, 1.0] };
    let probe = |d: Point, s: f64| crate::field::sample(u, [p[0] + s * d[0], p[1] + s * d[1]]).unwrap_or(f64::NEG_INFINITY);
    if probe(inward, 2.0 * h) < probe([-inward[0], -inward[1]], 2.0 * h) {
        inward = [-inward[0], -inward[1]];
    }
    let mut est = None;
    if kink {
        let delta = 4.0 * h;
        for _ in 0..2 {
            let at = |m: f64| data.sample(g, [p[0] + m * delta * inward[0], p[1] + m * delta * inward[1]]);
            if let (Some(a), Some(b), Some(c)) = (at(1.0), at(2.0), at(3.0)) {
                let ex = |fa: f64, fb: f64, fc: f64| 3.0 * fa - 3.0 * fb + fc;
                let e = ([ex(a.0[0], b.0[0], c.0[0]), ex(a.0[1], b.0[1], c.0[1])], ex(a.1, b.1, c.1));
                let norm = (e.0[0].powi(2) + e.0[1].powi(2)).sqrt();
                if norm > 0.0 {
                    inward = [e.0[0] / norm, e.0[1] / norm];
                }
                est = Some(e);
            } else {
                break;
            }
        }
    } else {
        est = data.sample(g, p);
    }
    let (grad, curvature) = est.or_else(|| data.nearest(g, p, 8)).unwrap_or(([inward[0], inward[1]], f64::INFINITY));
    let norm = (grad[0].powi(2) + grad[1].powi(2)).sqrt();
    let normal = if norm > 0.0 { [-grad[0] / norm, -grad[1] / norm] } else { [-inward[0], -inward[1]] };
    CurveVertex { point: p, normal, curvature, grad, singular: !(curvature.abs() <= 10.0 / h) }
}

/// Joins segments sharing an edge id into maximal chains; open chains first
/// (starting from their lower end id), then closed loops.
fn chain_segments(segments: &[[usize; 2]]) -> Vec<(Vec<usize>, bool)> {
    use std::collections::BTreeMap;
    let mut by_edge: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (s, seg) in segments.iter().enumerate() {
        for &e in seg {
            by_edge.entry(e).or_default().push(s);
        }
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();
    let walk = |start_edge: usize, used: &mut Vec<bool>| -> (Vec<usize>, bool) {
        let mut chain = vec![start_edge];
        let mut edge = start_edge;
        loop {
            let next = by_edge[&edge].iter().copied().find(|&s| !used[s]);
            let Some(s) = next else { break };
            used[s] = true;
            let seg = segments[s];
            edge = if seg[0] == edge { seg[1] } else { seg[0] };
            if edge == start_edge {
                return (chain, true);
            }
            chain.push(edge);
        }
        (chain, false)
    };
    let ends: Vec<usize> = by_edge.iter().filter(|(_, s)| s.len() == 1).map(|(&e, _)| e).collect();
    for e in ends {
        if by_edge[&e].iter().all(|&s| used[s]) {
            continue;
        }
        out.push(walk(e, &mut used));
    }
    for s in 0..segments.len() {
        if !used[s] {
            out.push(walk(segments[s][0], &mut used));
        }
    }
    out
}

fn extract_1d(u: &ScalarField, level: f64) -> InterfaceCurve {
    let g = u.grid();
    let v = u.values();
    let mut components = Vec::new();
    for i in 0..g.nx() - 1 {
        let (a, b) = (v[i] > level, v[i + 1] > level);
        if a == b {
            continue;
        }
        let theta = (v[i] - level) / (v[i] - v[i + 1]);
        let x = g.point(i)[0] + theta * g.h();
        let slope = (v[i + 1] - v[i]) / g.h();
        let normal = [-slope.signum(), 0.0];
        components.push(CurveComponent {
            vertices: vec![CurveVertex { point: [x, 0.0], normal, curvature: 0.0, grad: [slope, 0.0], singular: false }],
            closed: false,
        });
    }
    InterfaceCurve { level, h: g.h(), components }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radial(h: f64) -> ScalarField {
        let g = GridSpec::square(-1.0, 1.0, h).unwrap();
        ScalarField::from_fn(g, |p| {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            (0.5 * (r / 0.5).ln()).max(0.0)
        })
    }

    #[test]
    fn half_plane_is_flat() {
        let g = GridSpec::square(-1.0, 1.0, 0.01).unwrap();
        let u = ScalarField::from_fn(g, |p| p[1].max(0.0));
        let c = extract_interface(&u, 0.0);
        assert_eq!(c.components.len(), 1);
        assert!(!c.components[0].closed);
        for v in c.vertices() {
            assert!(v.point[1].abs() < 1e-12);
            assert!(v.curvature.abs() <= 1e-6);
            assert!((v.normal[1] + 1.0).abs() < 1e-12);
            assert!((v.grad[1] - 1.0).abs() < 1e-12);
        }
        assert!((c.length() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn circle_curvature_and_trace() {
        let u = radial(5e-3);
        let c = extract_interface(&u, 0.0);
        assert_eq!(c.components.len(), 1);
        assert!(c.components[0].closed);
        for v in c.vertices() {
            let r = (v.point[0].powi(2) + v.point[1].powi(2)).sqrt();
            assert!((r - 0.5).abs() < 1e-3, "{r}");
            assert!((v.curvature - 2.0).abs() < 2e-2, "{}", v.curvature);
            let gn = (v.grad[0].powi(2) + v.grad[1].powi(2)).sqrt();
            assert!((gn - 1.0).abs() < 2e-2, "{gn}");
            // outer normal of {u > 0} points towards the centre
            assert!(v.normal[0] * v.point[0] + v.normal[1] * v.point[1] < 0.0);
        }
        assert!((c.length() - std::f64::consts::PI).abs() < 1e-3);
    }

    #[test]
    fn constant_field_has_no_interface() {
        let g = GridSpec::square(-1.0, 1.0, 0.1).unwrap();
        assert!(extract_interface(&ScalarField::from_fn(g, |_| 0.3), 0.0).is_empty());
    }

    #[test]
    fn smooth_level_sets_and_saddles() {
        let g = GridSpec::square(-1.0, 1.0, 0.02).unwrap();
        let u = ScalarField::from_fn(g.clone(), |p| p[0] * p[0] + p[1] * p[1]);
        let c = extract_interface(&u, 0.25);
        assert!(c.components.len() == 1 && c.components[0].closed);
        for v in c.vertices() {
            assert!((v.curvature - 2.0).abs() < 1e-2);
        }
        // saddle: two crossing lines must come out as polylines without error
        let s = ScalarField::from_fn(g, |p| p[0] * p[1]);
        let c = extract_interface(&s, 1e-3);
        assert_eq!(c.components.len(), 2);
    }

    #[test]
    fn csv_header() {
        let u = radial(0.05);
        let csv = extract_interface(&u, 0.0).to_csv();
        assert!(csv.starts_with("x,y,nu_x,nu_y,H\n"));
        assert_eq!(csv.lines().count(), extract_interface(&u, 0.0).vertex_count() + 1);
    }

    #[test]
    fn one_dimensional_crossings() {
        let g = GridSpec::interval(-1.0, 1.0, 0.1).unwrap();
        let u = ScalarField::from_fn(g, |p| p[0] * p[0] - 0.25);
        let c = extract_interface(&u, 0.0);
        assert_eq!(c.vertex_count(), 2);
    }
}
