//! Quadrature on uncut cells, cut sub-polygons, interface segments and faces.
//!
//! Cut polygons are fan-triangulated about their vertex centroid (all
//! marching-squares pieces are convex) and each triangle receives a collapsed
//! tensor Gauss rule, which has positive weights and interior points for every
//! order.

use crate::levelset::{CellLocation, CutTopology, Segment};
use crate::mesh::{BackgroundMesh, Face};
use crate::point::Point;

/// Default polynomial order of all rules.
pub const DEFAULT_ORDER: usize = 2;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Unit normal per point (surface rules only).
    pub normals: Option<Vec<Point>>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sum of weights.
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` with `n` points.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "at least one quadrature point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        // Newton iteration from the Chebyshev-like initial guess
        let mut z = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // p1 = P_n(z), p0 = P_{n-1}(z)
            let (mut p0, mut p1) = (0.0, 1.0);
            for j in 1..=n {
                let p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[k] = -z;
        x[n - 1 - k] = z;
        let wk = 2.0 / ((1.0 - z * z) * dp * dp);
        w[k] = wk;
        w[n - 1 - k] = wk;
    }
    (x, w)
}

/// Number of Gauss points per direction that integrates degree `order` exactly.
pub fn points_for_order(order: usize) -> usize {
    (order + 2) / 2
}

/// Gauss rule on `[0, 1]` exact for degree `order`.
fn unit_gauss(order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(points_for_order(order));
    (x.iter().map(|t| 0.5 * (t + 1.0)).collect(), w.iter().map(|w| 0.5 * w).collect())
}

/// Tensor Gauss rule on an axis-aligned cell.
pub fn tensor_rule(mesh: &BackgroundMesh, cell: usize, order: usize) -> QuadratureRule {
    let b = mesh.cell_bounds(cell);
    let (t, w) = unit_gauss(order);
    let mut rule = QuadratureRule::default();
    for (ty, wy) in t.iter().zip(&w) {
        for (tx, wx) in t.iter().zip(&w) {
            rule.points.push(Point::new(b.x0 + tx * b.width(), b.y0 + ty * b.height()));
            rule.weights.push(wx * wy * b.area());
        }
    }
    rule
}

/// Appends a collapsed (Duffy) Gauss rule on the triangle `abc`.
fn push_triangle(rule: &mut QuadratureRule, a: Point, b: Point, c: Point, order: usize) {
    let area2 = (b - a).cross(c - a);
    if area2.abs() <= 0.0 {
        return;
    }
    let area = 0.5 * area2.abs();
    // the collapse adds one degree in the radial direction
    let (tu, wu) = unit_gauss(order + 1);
    let (tv, wv) = unit_gauss(order);
    for (u, wu) in tu.iter().zip(&wu) {
        for (v, wv) in tv.iter().zip(&wv) {
            let s = u * (1.0 - v);
            let t = u * v;
            rule.points.push(a + (b - a) * s + (c - a) * t);
            rule.weights.push(2.0 * area * wu * wv * u);
        }
    }
}

/// Rule on a convex polygon, fan-triangulated about its vertex centroid.
pub fn polygon_rule(poly: &[Point], order: usize) -> QuadratureRule {
    let mut rule = QuadratureRule::default();
    if poly.len() < 3 {
        return rule;
    }
    let inv = 1.0 / poly.len() as f64;
    let center = poly.iter().fold(Point::default(), |acc, &p| acc + p * inv);
    for k in 0..poly.len() {
        push_triangle(&mut rule, center, poly[k], poly[(k + 1) % poly.len()], order);
    }
    rule
}

/// Subdomain selector for bulk rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Intra,
    Extra,
}

/// Rule for `T ∩ Ω_side`; empty when the cell lies on the other side.
pub fn bulk_rule(cell: usize, topo: &CutTopology, side: Side, order: usize) -> QuadratureRule {
    match (topo.location(cell), side) {
        (CellLocation::Inside, Side::Intra) | (CellLocation::Outside, Side::Extra) => {
            tensor_rule(topo.mesh(), cell, order)
        }
        (CellLocation::Cut, _) => {
            let cc = topo.cut_cell(cell).expect("cut cells carry geometry");
            let polys = match side {
                Side::Intra => &cc.inside,
                Side::Extra => &cc.outside,
            };
            let mut rule = QuadratureRule::default();
            for poly in polys {
                let r = polygon_rule(poly, order);
                rule.points.extend(r.points);
                rule.weights.extend(r.weights);
            }
            rule
        }
        _ => QuadratureRule::default(),
    }
}

/// Gauss rule along a segment, carrying its intracellular outward normal.
pub fn segment_rule(seg: &Segment, order: usize) -> QuadratureRule {
    let (t, w) = unit_gauss(order);
    let len = seg.length();
    QuadratureRule {
        points: t.iter().map(|&t| seg.a.lerp(seg.b, t)).collect(),
        weights: w.iter().map(|w| w * len).collect(),
        normals: Some(vec![seg.normal; t.len()]),
    }
}

/// Rule on `Γ ∩ T`; normals are `n_i` (use the negation for `n_e`).
pub fn surface_rule(cell: usize, topo: &CutTopology, order: usize) -> QuadratureRule {
    let mut rule = QuadratureRule { normals: Some(Vec::new()), ..Default::default() };
    if let Some(cc) = topo.cut_cell(cell) {
        for seg in &cc.segments {
            let r = segment_rule(seg, order);
            rule.points.extend(r.points);
            rule.weights.extend(r.weights);
            rule.normals.as_mut().unwrap().extend(r.normals.unwrap());
        }
    }
    rule
}

/// Gauss rule on the full face.
pub fn face_rule(mesh: &BackgroundMesh, face: &Face, order: usize) -> QuadratureRule {
    let (a, b) = mesh.face_endpoints(face.plus, face.axis);
    let (t, w) = unit_gauss(order);
    let len = a.distance(b);
    QuadratureRule {
        points: t.iter().map(|&t| a.lerp(b, t)).collect(),
        weights: w.iter().map(|w| w * len).collect(),
        normals: Some(vec![face.normal; t.len()]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::Shape;
    use crate::mesh::{build_cartesian_mesh, Axis, Bounds};

    #[test]
    fn gauss_legendre_integrates_monomials() {
        for n in 1..8 {
            let (x, w) = gauss_legendre(n);
            for d in 0..2 * n {
                let exact = if d % 2 == 0 { 2.0 / (d + 1) as f64 } else { 0.0 };
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32)).sum();
                assert!((approx - exact).abs() < 1e-14, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn uncut_cell_rule() {
        let mesh = build_cartesian_mesh(1, 1, Bounds::square(0.0, 1.0)).unwrap();
        let rule = tensor_rule(&mesh, 0, 2);
        assert_eq!(rule.len(), 4);
        assert!((rule.measure() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn half_cell_by_plane() {
        let mesh = build_cartesian_mesh(1, 1, Bounds::square(0.0, 1.0)).unwrap();
        let ls = Shape::HalfPlane { normal: Point::new(1.0, 0.0), offset: 0.5 };
        let topo = CutTopology::build(&ls, &mesh);
        assert!((bulk_rule(0, &topo, Side::Intra, 2).measure() - 0.5).abs() < 1e-15);
        let s = surface_rule(0, &topo, 2);
        assert!((s.measure() - 1.0).abs() < 1e-15);
        assert!((s.integrate(|p| p.x) - 0.5).abs() < 1e-15);
        assert!(s.normals.unwrap().iter().all(|n| *n == Point::new(1.0, 0.0)));
    }

    #[test]
    fn triangle_exactness() {
        let (a, b, c) = (Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0));
        for order in 0..6 {
            let mut rule = QuadratureRule::default();
            push_triangle(&mut rule, a, b, c, order);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            // ∫ x^i y^j over the unit simplex = i! j! / (i + j + 2)!
            let fact = |n: usize| (1..=n).product::<usize>() as f64;
            for i in 0..=order {
                for j in 0..=order - i {
                    let exact = fact(i) * fact(j) / fact(i + j + 2);
                    let approx = rule.integrate(|p| p.x.powi(i as i32) * p.y.powi(j as i32));
                    assert!((approx - exact).abs() < 1e-14, "order {order} x^{i} y^{j}");
                }
            }
        }
    }

    #[test]
    fn face_rule_is_exact_for_quadratics() {
        let mesh = build_cartesian_mesh(2, 1, Bounds::new(0.0, 0.0, 2.0, 1.0)).unwrap();
        let face = Face { plus: 0, minus: 1, axis: Axis::X, normal: Point::new(1.0, 0.0) };
        let rule = face_rule(&mesh, &face, 2);
        assert_eq!(rule.len(), 2);
        assert!((rule.measure() - 1.0).abs() < 1e-15);
        assert!((rule.integrate(|p| p.y * p.y) - 1.0 / 3.0).abs() < 1e-15);
    }
}
