//! Implicit membrane geometry and its intersection with the background mesh.
//!
//! The intracellular domain is `{phi < 0}`. Each cut cell is split by a
//! marching-squares table on the (snapped) vertex values: the level set is
//! linearized along every cell edge and the interface inside the cell is
//! approximated by straight segments. The ambiguous saddle configuration is
//! resolved by the sign of `phi` at the cell center.

use crate::error::{Error, Result};
use crate::mesh::BackgroundMesh;
use crate::point::Point;

/// Relative magnitude (times `h`) below which a vertex value is snapped to `+SNAP * h`.
pub const SNAP: f64 = 1e-12;

pub trait LevelSet: Send + Sync {
    fn value(&self, p: Point) -> f64;

    /// Gradient of the level set; `h` is the local mesh size, used for the
    /// finite-difference fallback with step `1e-6 * h`.
    fn gradient(&self, p: Point, h: f64) -> Point {
        central_difference(|q| self.value(q), p, 1e-6 * h)
    }
}

pub fn central_difference(f: impl Fn(Point) -> f64, p: Point, step: f64) -> Point {
    let dx = Point::new(step, 0.0);
    let dy = Point::new(0.0, step);
    Point::new(
        (f(p + dx) - f(p - dx)) / (2.0 * step),
        (f(p + dy) - f(p - dy)) / (2.0 * step),
    )
}

/// A level set given by a closure, differentiated numerically.
pub struct Implicit<F>(pub F);

impl<F: Fn(Point) -> f64 + Send + Sync> LevelSet for Implicit<F> {
    fn value(&self, p: Point) -> f64 {
        (self.0)(p)
    }
}

/// Built-in geometries.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// `|x - c|^2 - r^2`
    Circle { center: Point, radius: f64 },
    /// `((x - cx) / a)^2 + ((y - cy) / b)^2 - 1`
    Ellipse { center: Point, semi_axes: (f64, f64) },
    /// `x^2 + y^2 + y sin((x + 1)^2) - 1.5`
    Wavy,
    /// `n . x - offset`
    HalfPlane { normal: Point, offset: f64 },
    Constant(f64),
    /// Pointwise minimum of the members.
    Union(Vec<Shape>),
    /// `-k ln Σ exp(-φ_j / k)`, a minimum smoothed over the scale `k`.
    SmoothUnion { members: Vec<Shape>, k: f64 },
}

impl Shape {
    pub fn circle(cx: f64, cy: f64, radius: f64) -> Self {
        Shape::Circle { center: Point::new(cx, cy), radius }
    }

    pub fn ellipse(cx: f64, cy: f64, a: f64, b: f64) -> Self {
        Shape::Ellipse { center: Point::new(cx, cy), semi_axes: (a, b) }
    }

    /// Idealized two-lobe cell (lengths in micrometers): two overlapping
    /// ellipses joined by a smooth union, so the membrane has no corners.
    pub fn two_lobes() -> Self {
        Shape::SmoothUnion {
            members: vec![Shape::ellipse(-8.0, 0.0, 12.0, 6.0), Shape::ellipse(9.0, 2.0, 10.0, 7.0)],
            k: 0.5,
        }
    }

    /// Softmax weights `exp(-φ_j / k) / Σ exp(-φ_i / k)` and the smoothed minimum.
    fn soft_min(members: &[Shape], k: f64, p: Point) -> (Vec<f64>, f64) {
        let vals: Vec<f64> = members.iter().map(|m| m.value(p)).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = vals.iter().map(|v| (-(v - lo) / k).exp()).collect();
        let sum: f64 = w.iter().sum();
        (w.iter().map(|x| x / sum).collect(), lo - k * sum.ln())
    }

    fn active_member(&self, p: Point) -> Option<&Shape> {
        match self {
            Shape::Union(members) => members
                .iter()
                .min_by(|a, b| a.value(p).total_cmp(&b.value(p))),
            _ => None,
        }
    }
}

impl LevelSet for Shape {
    fn value(&self, p: Point) -> f64 {
        match self {
            Shape::Circle { center, radius } => {
                let d = p - *center;
                d.dot(d) - radius * radius
            }
            Shape::Ellipse { center, semi_axes: (a, b) } => {
                let d = p - *center;
                (d.x / a).powi(2) + (d.y / b).powi(2) - 1.0
            }
            Shape::Wavy => p.x * p.x + p.y * p.y + p.y * ((p.x + 1.0).powi(2)).sin() - 1.5,
            Shape::HalfPlane { normal, offset } => normal.dot(p) - offset,
            Shape::Constant(c) => *c,
            Shape::Union(members) => members
                .iter()
                .map(|m| m.value(p))
                .fold(f64::INFINITY, f64::min),
            Shape::SmoothUnion { members, k } => Shape::soft_min(members, *k, p).1,
        }
    }

    fn gradient(&self, p: Point, h: f64) -> Point {
        match self {
            Shape::Circle { center, .. } => (p - *center) * 2.0,
            Shape::Ellipse { center, semi_axes: (a, b) } => {
                let d = p - *center;
                Point::new(2.0 * d.x / (a * a), 2.0 * d.y / (b * b))
            }
            Shape::Wavy => {
                let s = (p.x + 1.0).powi(2);
                Point::new(2.0 * p.x + 2.0 * p.y * (p.x + 1.0) * s.cos(), 2.0 * p.y + s.sin())
            }
            Shape::HalfPlane { normal, .. } => *normal,
            Shape::Constant(_) => Point::default(),
            Shape::Union(_) => self
                .active_member(p)
                .map_or_else(Point::default, |m| m.gradient(p, h)),
            Shape::SmoothUnion { members, k } => {
                let (w, _) = Shape::soft_min(members, *k, p);
                members.iter().zip(w).fold(Point::default(), |acc, (m, wj)| acc + m.gradient(p, h) * wj)
            }
        }
    }
}

/// Circle of radius `radius` centered at `delta * (1/n, 1/n)` with `delta = m / m_delta`.
pub fn translated_circle(radius: f64, n: usize, m_delta: usize, m: usize) -> Result<Shape> {
    if m_delta == 0 || m > m_delta || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "translation step {m} outside 0..={m_delta} (n = {n})"
        )));
    }
    let delta = m as f64 / m_delta as f64;
    let s = delta / n as f64;
    Ok(Shape::circle(s, s, radius))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellLocation {
    Inside,
    Outside,
    Cut,
}

/// Snapped level-set value.
fn snap(v: f64, h: f64) -> f64 {
    if v.abs() < SNAP * h {
        SNAP * h
    } else {
        v
    }
}

fn classify_samples(samples: &[f64], threshold: f64) -> CellLocation {
    if samples.iter().all(|&v| v < -threshold) {
        CellLocation::Inside
    } else if samples.iter().all(|&v| v > threshold) {
        CellLocation::Outside
    } else {
        CellLocation::Cut
    }
}

/// Classifies a cell by the signs of the (snapped) level set at its four
/// vertices and four edge midpoints.
pub fn classify_cell<L: LevelSet + ?Sized>(
    ls: &L,
    mesh: &BackgroundMesh,
    cell: usize,
    tol: f64,
) -> CellLocation {
    let h = mesh.h();
    let c = mesh.cell_corners(cell);
    let mut samples = [0.0; 8];
    for k in 0..4 {
        samples[k] = snap(ls.value(c[k]), h);
        samples[4 + k] = snap(ls.value(c[k].lerp(c[(k + 1) % 4], 0.5)), h);
    }
    classify_samples(&samples, tol * h)
}

/// Straight piece of the discrete interface inside one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
    /// Unit normal pointing out of the intracellular domain.
    pub normal: Point,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub fn midpoint(&self) -> Point {
        self.a.lerp(self.b, 0.5)
    }
}

/// Counter-clockwise polygon.
pub type Polygon = Vec<Point>;

pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n).map(|k| poly[k].cross(poly[(k + 1) % n])).sum::<f64>() * 0.5
}

/// Geometry of a cut cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CutCell {
    pub cell: usize,
    /// Root parameter along edge `k` (from corner `k` to corner `k + 1`), if any.
    pub edge_roots: [Option<f64>; 4],
    pub inside: Vec<Polygon>,
    pub outside: Vec<Polygon>,
    pub segments: Vec<Segment>,
}

impl CutCell {
    pub fn interface_length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    pub fn inside_area(&self) -> f64 {
        self.inside.iter().map(|p| polygon_area(p)).sum()
    }

    pub fn outside_area(&self) -> f64 {
        self.outside.iter().map(|p| polygon_area(p)).sum()
    }
}

#[derive(Clone, Copy)]
enum Node {
    Corner(usize),
    Crossing(usize),
}

/// Marching-squares split of a cell from snapped, nonzero corner values.
fn split_cell<L: LevelSet + ?Sized>(
    ls: &L,
    cell: usize,
    corners: [Point; 4],
    values: [f64; 4],
    h: f64,
) -> CutCell {
    let neg = values.map(|v| v < 0.0);
    let mut edge_roots = [None; 4];
    let mut crossing = [Point::default(); 4];
    for k in 0..4 {
        let l = (k + 1) % 4;
        if neg[k] != neg[l] {
            let t = values[k] / (values[k] - values[l]);
            edge_roots[k] = Some(t);
            crossing[k] = corners[k].lerp(corners[l], t);
        }
    }
    let n_cross = edge_roots.iter().filter(|r| r.is_some()).count();

    let point = |n: Node| match n {
        Node::Corner(k) => corners[k],
        Node::Crossing(k) => crossing[k],
    };
    let mut cycle = Vec::with_capacity(8);
    for k in 0..4 {
        cycle.push(Node::Corner(k));
        if edge_roots[k].is_some() {
            cycle.push(Node::Crossing(k));
        }
    }
    let side_polygon = |inside: bool| -> Polygon {
        cycle
            .iter()
            .filter(|n| match **n {
                Node::Corner(k) => neg[k] == inside,
                Node::Crossing(_) => true,
            })
            .map(|&n| point(n))
            .collect()
    };

    let mut inside = Vec::new();
    let mut outside = Vec::new();
    let mut pairs: Vec<(Point, Point)> = Vec::new();
    match n_cross {
        0 => {
            let square = corners.to_vec();
            if neg[0] {
                inside.push(square);
            } else {
                outside.push(square);
            }
        }
        2 => {
            let ks: Vec<usize> = (0..4).filter(|&k| edge_roots[k].is_some()).collect();
            inside.push(side_polygon(true));
            outside.push(side_polygon(false));
            pairs.push((crossing[ks[0]], crossing[ks[1]]));
        }
        _ => {
            // saddle: corners alternate in sign; the corners whose sign differs
            // from the center are cut off as triangles
            let center = corners[0].lerp(corners[2], 0.5);
            let center_inside = snap(ls.value(center), h) < 0.0;
            for k in 0..4 {
                if neg[k] != center_inside {
                    let prev = (k + 3) % 4;
                    let tri = vec![crossing[prev], corners[k], crossing[k]];
                    if neg[k] {
                        inside.push(tri);
                    } else {
                        outside.push(tri);
                    }
                    pairs.push((crossing[prev], crossing[k]));
                }
            }
            let big: Polygon = cycle
                .iter()
                .filter(|n| match **n {
                    Node::Corner(k) => neg[k] == center_inside,
                    Node::Crossing(_) => true,
                })
                .map(|&n| point(n))
                .collect();
            if center_inside {
                inside.push(big);
            } else {
                outside.push(big);
            }
        }
    }

    let segments = pairs
        .into_iter()
        .filter(|(a, b)| a.distance(*b) > 0.0)
        .map(|(a, b)| {
            let mid = a.lerp(b, 0.5);
            let mut normal = ls.gradient(mid, h).normalized();
            if normal.norm() == 0.0 {
                // no usable gradient: perpendicular to the segment, pointing to positive values
                let t = b - a;
                normal = Point::new(t.y, -t.x).normalized();
                if ls.value(mid + normal * (1e-3 * h)) < ls.value(mid - normal * (1e-3 * h)) {
                    normal = -normal;
                }
            }
            Segment { a, b, normal }
        })
        .collect();

    CutCell { cell, edge_roots, inside, outside, segments }
}

/// Computes the cut geometry of a single cell.
///
/// Fails with [`Error::DegenerateCut`] when all four vertex values are within
/// `SNAP * h` of zero.
pub fn cut_cell_geometry<L: LevelSet + ?Sized>(
    ls: &L,
    mesh: &BackgroundMesh,
    cell: usize,
) -> Result<CutCell> {
    let h = mesh.h();
    let corners = mesh.cell_corners(cell);
    let raw = corners.map(|p| ls.value(p));
    if raw.iter().all(|v| v.abs() < SNAP * h) {
        return Err(Error::DegenerateCut { cell });
    }
    Ok(split_cell(ls, cell, corners, raw.map(|v| snap(v, h)), h))
}

/// Location tags of all cells plus the geometry of every cut cell.
#[derive(Debug, Clone)]
pub struct CutTopology {
    mesh: BackgroundMesh,
    vertex_values: Vec<f64>,
    location: Vec<CellLocation>,
    cut: Vec<Option<CutCell>>,
}

impl CutTopology {
    pub fn build<L: LevelSet + ?Sized>(ls: &L, mesh: &BackgroundMesh) -> Self {
        let h = mesh.h();
        let (nx, ny) = (mesh.nx(), mesh.ny());
        let vertex_values: Vec<f64> = (0..mesh.n_vertices())
            .map(|v| snap(ls.value(mesh.vertex(v)), h))
            .collect();
        // midpoint values of horizontal edges (nx per row, ny + 1 rows) and
        // vertical edges (nx + 1 per row, ny rows)
        let horizontal: Vec<f64> = (0..nx * (ny + 1))
            .map(|e| {
                let (i, j) = (e % nx, e / nx);
                let a = mesh.vertex(mesh.vertex_index(i, j));
                snap(ls.value(a + Point::new(0.5 * mesh.spacing().0, 0.0)), h)
            })
            .collect();
        let vertical: Vec<f64> = (0..(nx + 1) * ny)
            .map(|e| {
                let (i, j) = (e % (nx + 1), e / (nx + 1));
                let a = mesh.vertex(mesh.vertex_index(i, j));
                snap(ls.value(a + Point::new(0.0, 0.5 * mesh.spacing().1)), h)
            })
            .collect();

        let mut location = Vec::with_capacity(mesh.n_cells());
        let mut cut = Vec::with_capacity(mesh.n_cells());
        for c in 0..mesh.n_cells() {
            let (i, j) = mesh.cell_ij(c);
            let vs = mesh.cell_vertices(c).map(|v| vertex_values[v]);
            let samples = [
                vs[0],
                vs[1],
                vs[2],
                vs[3],
                horizontal[j * nx + i],
                horizontal[(j + 1) * nx + i],
                vertical[j * (nx + 1) + i],
                vertical[j * (nx + 1) + i + 1],
            ];
            let loc = classify_samples(&samples, 0.0);
            location.push(loc);
            cut.push((loc == CellLocation::Cut).then(|| split_cell(ls, c, mesh.cell_corners(c), vs, h)));
        }
        Self { mesh: *mesh, vertex_values, location, cut }
    }

    pub fn mesh(&self) -> &BackgroundMesh {
        &self.mesh
    }

    pub fn location(&self, cell: usize) -> CellLocation {
        self.location[cell]
    }

    pub fn cut_cell(&self, cell: usize) -> Option<&CutCell> {
        self.cut[cell].as_ref()
    }

    pub fn cut_cells(&self) -> impl Iterator<Item = &CutCell> {
        self.cut.iter().flatten()
    }

    pub fn n_cut(&self) -> usize {
        self.cut.iter().flatten().count()
    }

    /// Snapped level-set value at a mesh vertex.
    pub fn vertex_value(&self, v: usize) -> f64 {
        self.vertex_values[v]
    }

    /// Total length of the discrete interface.
    pub fn interface_length(&self) -> f64 {
        self.cut_cells().map(CutCell::interface_length).sum()
    }

    /// Area of the intracellular part of the cell.
    pub fn inside_area(&self, cell: usize) -> f64 {
        match self.location[cell] {
            CellLocation::Inside => self.mesh.cell_bounds(cell).area(),
            CellLocation::Outside => 0.0,
            CellLocation::Cut => self.cut[cell].as_ref().map_or(0.0, CutCell::inside_area),
        }
    }

    pub fn outside_area(&self, cell: usize) -> f64 {
        match self.location[cell] {
            CellLocation::Inside => 0.0,
            CellLocation::Outside => self.mesh.cell_bounds(cell).area(),
            CellLocation::Cut => self.cut[cell].as_ref().map_or(0.0, CutCell::outside_area),
        }
    }
}
