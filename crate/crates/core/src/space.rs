//! Finite element spaces on active meshes: continuous Q1 and discontinuous P0.

use crate::error::{invalid, Result};
use crate::mesh::{ActiveMesh, BackgroundMesh};
use crate::point::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Continuous bilinear elements, one DOF per active vertex.
    Q1,
    /// Piecewise constants, one DOF per active cell.
    P0,
}

impl Family {
    pub fn dofs_per_cell(self) -> usize {
        match self {
            Family::Q1 => 4,
            Family::P0 => 1,
        }
    }
}

/// Shape function values and physical gradients of one cell; only the
/// first `n` entries are meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Basis {
    pub n: usize,
    pub values: [f64; 4],
    pub grads: [Point; 4],
}

/// Bilinear shape functions of `cell` at `p`, ordered like
/// [`BackgroundMesh::cell_vertices`]. No containment check.
pub fn q1_basis(mesh: &BackgroundMesh, cell: usize, p: Point) -> Basis {
    let b = mesh.cell_bounds(cell);
    let (hx, hy) = (b.width(), b.height());
    let xi = (p.x - b.x0) / hx;
    let eta = (p.y - b.y0) / hy;
    Basis {
        n: 4,
        values: [(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), xi * eta, (1.0 - xi) * eta],
        grads: [
            Point::new(-(1.0 - eta) / hx, -(1.0 - xi) / hy),
            Point::new((1.0 - eta) / hx, -xi / hy),
            Point::new(eta / hx, xi / hy),
            Point::new(-eta / hx, (1.0 - xi) / hy),
        ],
    }
}

const P0_BASIS: Basis = Basis { n: 1, values: [1.0, 0.0, 0.0, 0.0], grads: [Point::new(0.0, 0.0); 4] };

#[derive(Debug, Clone)]
pub struct FESpace {
    active: ActiveMesh,
    family: Family,
    /// Local DOFs of the `k`-th active cell at `dofs[k * per_cell..]`.
    dofs: Vec<usize>,
    n_dofs: usize,
    /// Background vertex of every Q1 DOF.
    dof_vertex: Vec<usize>,
    vertex_dof: Vec<Option<usize>>,
    constrained: Vec<(usize, f64)>,
    is_constrained: Vec<bool>,
}

/// Builds a space on `active`. Dirichlet values, if given, are imposed at
/// active vertices on the outer boundary of the background mesh.
pub fn build_space(
    active: &ActiveMesh,
    family: Family,
    dirichlet: Option<&dyn Fn(Point) -> f64>,
) -> Result<FESpace> {
    let mesh = active.mesh();
    match family {
        Family::P0 => {
            if dirichlet.is_some() {
                return Err(invalid("Dirichlet constraints are not defined for P0 spaces"));
            }
            let n = active.len();
            Ok(FESpace {
                active: active.clone(),
                family,
                dofs: (0..n).collect(),
                n_dofs: n,
                dof_vertex: Vec::new(),
                vertex_dof: Vec::new(),
                constrained: Vec::new(),
                is_constrained: vec![false; n],
            })
        }
        Family::Q1 => {
            // number vertices in increasing background index for deterministic numbering
            let mut used = vec![false; mesh.n_vertices()];
            for &c in active.cells() {
                for v in mesh.cell_vertices(c) {
                    used[v] = true;
                }
            }
            let mut vertex_dof = vec![None; mesh.n_vertices()];
            let mut dof_vertex = Vec::new();
            for (v, _) in used.iter().enumerate().filter(|(_, &u)| u) {
                vertex_dof[v] = Some(dof_vertex.len());
                dof_vertex.push(v);
            }
            let dofs = active
                .cells()
                .iter()
                .flat_map(|&c| mesh.cell_vertices(c).map(|v| vertex_dof[v].unwrap()))
                .collect();
            let n_dofs = dof_vertex.len();
            let mut constrained = Vec::new();
            let mut is_constrained = vec![false; n_dofs];
            if let Some(g) = dirichlet {
                for (d, &v) in dof_vertex.iter().enumerate() {
                    if mesh.is_boundary_vertex(v) {
                        constrained.push((d, g(mesh.vertex(v))));
                        is_constrained[d] = true;
                    }
                }
            }
            Ok(FESpace {
                active: active.clone(),
                family,
                dofs,
                n_dofs,
                dof_vertex,
                vertex_dof,
                constrained,
                is_constrained,
            })
        }
    }
}

impl FESpace {
    pub fn active(&self) -> &ActiveMesh {
        &self.active
    }

    pub fn mesh(&self) -> &BackgroundMesh {
        self.active.mesh()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    /// `(dof, value)` Dirichlet pairs, sorted by DOF.
    pub fn constrained(&self) -> &[(usize, f64)] {
        &self.constrained
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.is_constrained[dof]
    }

    /// Global DOFs of a background cell, `None` if the cell is not active.
    pub fn cell_dofs(&self, cell: usize) -> Option<&[usize]> {
        let k = self.active.local_index(cell)?;
        let per = self.family.dofs_per_cell();
        Some(&self.dofs[k * per..(k + 1) * per])
    }

    /// DOF attached to a background vertex (Q1 only).
    pub fn vertex_dof(&self, v: usize) -> Option<usize> {
        self.vertex_dof.get(v).copied().flatten()
    }

    /// Nodal point of a DOF: its vertex (Q1) or the cell center (P0).
    pub fn dof_point(&self, dof: usize) -> Point {
        match self.family {
            Family::Q1 => self.mesh().vertex(self.dof_vertex[dof]),
            Family::P0 => self.mesh().cell_center(self.active.cells()[dof]),
        }
    }

    /// Basis values and gradients of `cell` at `p`.
    pub fn eval_basis(&self, cell: usize, p: Point) -> Result<Basis> {
        if !self.active.contains(cell) {
            return Err(invalid(format!("cell {cell} is not active in this space")));
        }
        let mesh = self.mesh();
        if !mesh.cell_bounds(cell).contains(p, 1e-10 * mesh.h()) {
            return Err(invalid(format!("point ({}, {}) outside cell {cell}", p.x, p.y)));
        }
        Ok(self.basis_unchecked(cell, p))
    }

    pub(crate) fn basis_unchecked(&self, cell: usize, p: Point) -> Basis {
        match self.family {
            Family::Q1 => q1_basis(self.mesh(), cell, p),
            Family::P0 => P0_BASIS,
        }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        (0..self.n_dofs).map(|d| f(self.dof_point(d))).collect()
    }

    /// Value of the field `coeffs` in `cell` at `p` (no containment check).
    pub fn evaluate(&self, coeffs: &[f64], cell: usize, p: Point) -> f64 {
        let dofs = self.cell_dofs(cell).expect("inactive cell");
        let b = self.basis_unchecked(cell, p);
        dofs.iter().zip(&b.values).map(|(&d, v)| coeffs[d] * v).sum()
    }

    pub fn evaluate_gradient(&self, coeffs: &[f64], cell: usize, p: Point) -> Point {
        let dofs = self.cell_dofs(cell).expect("inactive cell");
        let b = self.basis_unchecked(cell, p);
        dofs.iter().zip(&b.grads).fold(Point::default(), |acc, (&d, &g)| acc + g * coeffs[d])
    }
}
