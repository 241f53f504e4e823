//! Structured Cartesian background mesh, active sub-meshes and face sets.
//!
//! Cells and vertices are numbered lexicographically, x fastest:
//! cell `(i, j)` has index `j * nx + i`, vertex `(i, j)` has index
//! `j * (nx + 1) + i`. The four vertices of a cell are listed counter-clockwise
//! starting from the lower-left corner.

use crate::error::{invalid, Result};
use crate::levelset::{CellLocation, CutTopology};
use crate::point::Point;

/// Axis-aligned box `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Bounds {
    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    /// The square `[lo, hi]^2`.
    pub const fn square(lo: f64, hi: f64) -> Self {
        Self::new(lo, lo, hi, hi)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p.x >= self.x0 - tol && p.x <= self.x1 + tol && p.y >= self.y0 - tol && p.y <= self.y1 + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundMesh {
    nx: usize,
    ny: usize,
    bounds: Bounds,
    hx: f64,
    hy: f64,
}

impl BackgroundMesh {
    pub fn new(nx: usize, ny: usize, bounds: Bounds) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid(format!("cell counts must be positive, got {nx}x{ny}")));
        }
        let (w, h) = (bounds.width(), bounds.height());
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return Err(invalid(format!("degenerate bounds {bounds:?}")));
        }
        Ok(Self {
            nx,
            ny,
            bounds,
            hx: w / nx as f64,
            hy: h / ny as f64,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    /// Cell edge lengths `(hx, hy)`.
    pub fn spacing(&self) -> (f64, f64) {
        (self.hx, self.hy)
    }

    /// Mesh size used in all penalty scalings: `max(hx, hy)`.
    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_vertices(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    /// Number of faces shared by two cells of the full mesh.
    pub fn n_interior_faces(&self) -> usize {
        (self.nx - 1) * self.ny + self.nx * (self.ny - 1)
    }

    pub fn cell_ij(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn vertex_ij(&self, v: usize) -> (usize, usize) {
        (v % (self.nx + 1), v / (self.nx + 1))
    }

    pub fn vertex_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn vertex(&self, v: usize) -> Point {
        let (i, j) = self.vertex_ij(v);
        Point::new(
            self.bounds.x0 + i as f64 * self.hx,
            self.bounds.y0 + j as f64 * self.hy,
        )
    }

    /// Vertices of a cell, counter-clockwise from the lower-left corner.
    pub fn cell_vertices(&self, cell: usize) -> [usize; 4] {
        let (i, j) = self.cell_ij(cell);
        let v0 = self.vertex_index(i, j);
        let v3 = self.vertex_index(i, j + 1);
        [v0, v0 + 1, v3 + 1, v3]
    }

    pub fn cell_corners(&self, cell: usize) -> [Point; 4] {
        self.cell_vertices(cell).map(|v| self.vertex(v))
    }

    pub fn cell_bounds(&self, cell: usize) -> Bounds {
        let (i, j) = self.cell_ij(cell);
        let x0 = self.bounds.x0 + i as f64 * self.hx;
        let y0 = self.bounds.y0 + j as f64 * self.hy;
        Bounds::new(x0, y0, x0 + self.hx, y0 + self.hy)
    }

    pub fn cell_center(&self, cell: usize) -> Point {
        let b = self.cell_bounds(cell);
        Point::new(0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1))
    }

    /// Neighbor across the face in the positive direction of `axis`.
    pub fn upper_neighbor(&self, cell: usize, axis: Axis) -> Option<usize> {
        let (i, j) = self.cell_ij(cell);
        match axis {
            Axis::X if i + 1 < self.nx => Some(cell + 1),
            Axis::Y if j + 1 < self.ny => Some(cell + self.nx),
            _ => None,
        }
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        let (i, j) = self.vertex_ij(v);
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    /// Cell containing `p`, with points on shared edges assigned to the lower cell.
    pub fn locate(&self, p: Point) -> Option<usize> {
        let tol = 1e-12 * self.h();
        if !self.bounds.contains(p, tol) {
            return None;
        }
        let i = (((p.x - self.bounds.x0) / self.hx).floor().max(0.0) as usize).min(self.nx - 1);
        let j = (((p.y - self.bounds.y0) / self.hy).floor().max(0.0) as usize).min(self.ny - 1);
        Some(self.cell_index(i, j))
    }

    /// Endpoints of the face between `cell` and its upper neighbor along `axis`.
    pub fn face_endpoints(&self, cell: usize, axis: Axis) -> (Point, Point) {
        let b = self.cell_bounds(cell);
        match axis {
            Axis::X => (Point::new(b.x1, b.y0), Point::new(b.x1, b.y1)),
            Axis::Y => (Point::new(b.x0, b.y1), Point::new(b.x1, b.y1)),
        }
    }
}

pub fn build_cartesian_mesh(nx: usize, ny: usize, bounds: Bounds) -> Result<BackgroundMesh> {
    BackgroundMesh::new(nx, ny, bounds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainTag {
    Intracellular,
    Extracellular,
    Interface,
}

/// The cells of the background mesh that intersect one subdomain (or the interface).
#[derive(Debug, Clone)]
pub struct ActiveMesh {
    mesh: BackgroundMesh,
    tag: DomainTag,
    cells: Vec<usize>,
    local: Vec<Option<usize>>,
}

impl ActiveMesh {
    pub fn from_cells(mesh: BackgroundMesh, tag: DomainTag, mut cells: Vec<usize>) -> Result<Self> {
        cells.sort_unstable();
        cells.dedup();
        if cells.last().is_some_and(|&c| c >= mesh.n_cells()) {
            return Err(invalid("active cell index out of range"));
        }
        let mut local = vec![None; mesh.n_cells()];
        for (k, &c) in cells.iter().enumerate() {
            local[c] = Some(k);
        }
        Ok(Self { mesh, tag, cells, local })
    }

    pub fn mesh(&self) -> &BackgroundMesh {
        &self.mesh
    }

    pub fn tag(&self) -> DomainTag {
        self.tag
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.local.get(cell).is_some_and(|l| l.is_some())
    }

    /// Position of `cell` within [`Self::cells`].
    pub fn local_index(&self, cell: usize) -> Option<usize> {
        self.local.get(cell).copied().flatten()
    }
}

/// Cells with location in `{inside side, cut}` for bulk tags, or `cut` for the interface.
pub fn active_mesh(mesh: &BackgroundMesh, topo: &CutTopology, tag: DomainTag) -> Result<ActiveMesh> {
    if topo.mesh() != mesh {
        return Err(invalid("cut topology was computed on a different mesh"));
    }
    let keep = |loc: CellLocation| match tag {
        DomainTag::Intracellular => loc != CellLocation::Outside,
        DomainTag::Extracellular => loc != CellLocation::Inside,
        DomainTag::Interface => loc == CellLocation::Cut,
    };
    let cells = (0..mesh.n_cells()).filter(|&c| keep(topo.location(c))).collect();
    ActiveMesh::from_cells(*mesh, tag, cells)
}

/// An interior face; its normal points from `plus` into `minus`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub plus: usize,
    pub minus: usize,
    pub axis: Axis,
    pub normal: Point,
}

#[derive(Debug, Clone, Default)]
pub struct FaceSet {
    pub faces: Vec<Face>,
    /// Length `h_F` of every face.
    pub face_measure: f64,
}

impl FaceSet {
    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Face> {
        self.faces.iter()
    }
}

/// All faces shared by two cells of `am`, sorted by `(plus, axis)`.
pub fn interior_faces(am: &ActiveMesh) -> FaceSet {
    let mesh = am.mesh();
    let mut faces = Vec::new();
    for &c in am.cells() {
        for axis in [Axis::X, Axis::Y] {
            if let Some(n) = mesh.upper_neighbor(c, axis).filter(|&n| am.contains(n)) {
                let normal = match axis {
                    Axis::X => Point::new(1.0, 0.0),
                    Axis::Y => Point::new(0.0, 1.0),
                };
                faces.push(Face { plus: c, minus: n, axis, normal });
            }
        }
    }
    let (hx, hy) = mesh.spacing();
    FaceSet {
        faces,
        // faces normal to x have length hy and vice versa; equal on square cells
        face_measure: hx.max(hy),
    }
}

/// Interior faces of `am` with at least one neighboring cut cell.
pub fn ghost_faces(am: &ActiveMesh, topo: &CutTopology) -> FaceSet {
    let all = interior_faces(am);
    let is_cut = |c: usize| topo.location(c) == CellLocation::Cut;
    FaceSet {
        faces: all.faces.into_iter().filter(|f| is_cut(f.plus) || is_cut(f.minus)).collect(),
        face_measure: all.face_measure,
    }
}
