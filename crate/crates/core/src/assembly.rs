//! Bilinear and linear forms of the single- and multi-dimensional formulations
//! and of the stabilized surface mass matrix.
//!
//! Every operator is assembled cell by cell into a coordinate list and
//! converted to compressed rows. Block systems are ordered
//! `(u_i, u_e[, I_m])`; Dirichlet values on the outer boundary are removed by
//! [`AssembledSystem::reduce`].

use crate::error::{invalid, Result};
use crate::levelset::{CutTopology, LevelSet};
use crate::linalg::{CooMatrix, SparseMatrix};
use crate::mesh::{active_mesh, ghost_faces, interior_faces, BackgroundMesh, DomainTag, FaceSet};
use crate::point::Point;
use crate::quadrature::{bulk_rule, face_rule, surface_rule, tensor_rule, Side, DEFAULT_ORDER};
use crate::space::{build_space, FESpace, Family};

/// Physical and discretization parameters of the PDE step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmiParams {
    pub sigma_i: f64,
    pub sigma_e: f64,
    pub c_m: f64,
    pub dt: f64,
    /// Ghost-penalty coefficient.
    pub gamma: f64,
    /// Surface mass stabilization coefficient.
    pub gamma_b: f64,
    /// When false, ghost penalties and the multiplier face stabilization are left out.
    pub stabilized: bool,
}

impl Default for EmiParams {
    fn default() -> Self {
        Self { sigma_i: 0.7, sigma_e: 0.3, c_m: 2e-5, dt: 0.01, gamma: 0.1, gamma_b: 0.1, stabilized: true }
    }
}

impl EmiParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.sigma_i, self.sigma_e, self.c_m, self.dt, self.gamma, self.gamma_b];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(invalid(format!("parameters must be positive: {self:?}")))
        }
    }

    /// Multiplier stabilization weight `max(dt / C_m, h)`.
    pub fn phi(&self, h: f64) -> f64 {
        (self.dt / self.c_m).max(h)
    }
}

/// Stabilization of the surface mass matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfaceStab {
    None,
    /// Face-based normal-derivative jumps, `γ_b h² ([∂_n v], [∂_n w])_F`.
    S1,
    /// Volume normal-gradient term, `γ_b h (∇v·n_Γ, ∇w·n_Γ)_{T_{h,Γ}}`.
    S2,
}

/// A scalar field on the interface, evaluated at `(point, n_i)`.
#[derive(Clone, Copy)]
pub enum SurfaceField<'a> {
    Zero,
    Function(&'a dyn Fn(Point, Point) -> f64),
    Discrete { space: &'a FESpace, coeffs: &'a [f64] },
    /// Evaluated with the containing cell, for fields built from several spaces.
    Cellwise(&'a dyn Fn(usize, Point, Point) -> f64),
}

impl SurfaceField<'_> {
    pub fn eval(&self, cell: usize, p: Point, n: Point) -> f64 {
        match self {
            SurfaceField::Zero => 0.0,
            SurfaceField::Function(f) => f(p, n),
            SurfaceField::Discrete { space, coeffs } => space.evaluate(coeffs, cell, p),
            SurfaceField::Cellwise(f) => f(cell, p, n),
        }
    }
}

/// Named contiguous blocks of a system vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DofLayout {
    pub blocks: Vec<(&'static str, usize)>,
}

impl DofLayout {
    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn offset(&self, k: usize) -> usize {
        self.blocks[..k].iter().map(|b| b.1).sum()
    }

    pub fn range(&self, k: usize) -> std::ops::Range<usize> {
        let o = self.offset(k);
        o..o + self.blocks[k].1
    }
}

#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub layout: DofLayout,
    /// Constrained global indices with their values, sorted by index.
    pub constrained: Vec<(usize, f64)>,
}

/// System restricted to the free unknowns.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub matrix: SparseMatrix,
    /// Columns of the full matrix belonging to constrained unknowns (free rows only).
    pub lift: SparseMatrix,
    pub free: Vec<usize>,
    pub fixed: Vec<usize>,
    pub n_full: usize,
}

impl ReducedSystem {
    pub fn new(matrix: &SparseMatrix, fixed: Vec<usize>) -> Self {
        let n = matrix.n_rows();
        let mut is_fixed = vec![false; n];
        fixed.iter().for_each(|&i| is_fixed[i] = true);
        let free: Vec<usize> = (0..n).filter(|&i| !is_fixed[i]).collect();
        Self {
            matrix: matrix.submatrix(&free, &free),
            lift: matrix.submatrix(&free, &fixed),
            free,
            fixed,
            n_full: n,
        }
    }

    /// Free part of `full_rhs` minus the lift of the boundary values.
    pub fn reduce_rhs(&self, full_rhs: &[f64], fixed_values: &[f64]) -> Vec<f64> {
        let lift = self.lift.mul_vec(fixed_values);
        self.free.iter().zip(&lift).map(|(&i, l)| full_rhs[i] - l).collect()
    }

    pub fn expand(&self, x_free: &[f64], fixed_values: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_full];
        self.free.iter().zip(x_free).for_each(|(&i, &v)| x[i] = v);
        self.fixed.iter().zip(fixed_values).for_each(|(&i, &v)| x[i] = v);
        x
    }
}

impl AssembledSystem {
    pub fn reduce(&self) -> (ReducedSystem, Vec<f64>) {
        let fixed = self.constrained.iter().map(|c| c.0).collect();
        let values: Vec<f64> = self.constrained.iter().map(|c| c.1).collect();
        let red = ReducedSystem::new(&self.matrix, fixed);
        let rhs = red.reduce_rhs(&self.rhs, &values);
        (red, rhs)
    }

    /// Full solution vector from a solution of the reduced system.
    pub fn expand(&self, red: &ReducedSystem, x_free: &[f64]) -> Vec<f64> {
        let values: Vec<f64> = self.constrained.iter().map(|c| c.1).collect();
        red.expand(x_free, &values)
    }
}

fn add_local(coo: &mut CooMatrix, rows: &[usize], cols: &[usize], f: impl Fn(usize, usize) -> f64) {
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            let v = f(a, b);
            if v != 0.0 {
                coo.push(i, j, v);
            }
        }
    }
}

/// `σ (∇u, ∇v)` over `Ω_side`.
pub fn assemble_stiffness(space: &FESpace, topo: &CutTopology, side: Side, sigma: f64, order: usize) -> SparseMatrix {
    let mut coo = CooMatrix::new(space.n_dofs(), space.n_dofs());
    for &c in space.active().cells() {
        let dofs = space.cell_dofs(c).unwrap();
        let rule = bulk_rule(c, topo, side, order);
        let mut local = [[0.0; 4]; 4];
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            let b = space.basis_unchecked(c, p);
            for a in 0..b.n {
                for d in 0..b.n {
                    local[a][d] += sigma * w * b.grads[a].dot(b.grads[d]);
                }
            }
        }
        add_local(&mut coo, dofs, dofs, |a, b| local[a][b]);
    }
    coo.to_csr()
}

/// `(u, v)` over `Ω_side`.
pub fn assemble_bulk_mass(space: &FESpace, topo: &CutTopology, side: Side, order: usize) -> SparseMatrix {
    let mut coo = CooMatrix::new(space.n_dofs(), space.n_dofs());
    for &c in space.active().cells() {
        let dofs = space.cell_dofs(c).unwrap();
        let rule = bulk_rule(c, topo, side, order);
        let mut local = [[0.0; 4]; 4];
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            let b = space.basis_unchecked(c, p);
            for a in 0..b.n {
                for d in 0..b.n {
                    local[a][d] += w * b.values[a] * b.values[d];
                }
            }
        }
        add_local(&mut coo, dofs, dofs, |a, b| local[a][b]);
    }
    coo.to_csr()
}

/// `(u, v)` over the full active cells.
pub fn assemble_active_mass(space: &FESpace, order: usize) -> SparseMatrix {
    let mut coo = CooMatrix::new(space.n_dofs(), space.n_dofs());
    for &c in space.active().cells() {
        let dofs = space.cell_dofs(c).unwrap();
        let rule = tensor_rule(space.mesh(), c, order);
        let mut local = [[0.0; 4]; 4];
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            let b = space.basis_unchecked(c, p);
            for a in 0..b.n {
                for d in 0..b.n {
                    local[a][d] += w * b.values[a] * b.values[d];
                }
            }
        }
        add_local(&mut coo, dofs, dofs, |a, b| local[a][b]);
    }
    coo.to_csr()
}

/// Jump quantity across a face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Jump {
    Value,
    NormalDerivative,
}

/// `coef Σ_F ([·], [·])_F` over the given faces.
fn assemble_face_jumps(space: &FESpace, faces: &FaceSet, coef: f64, jump: Jump, order: usize) -> SparseMatrix {
    let mesh = space.mesh();
    let mut coo = CooMatrix::new(space.n_dofs(), space.n_dofs());
    for face in faces.iter() {
        let plus = space.cell_dofs(face.plus).expect("face cell outside the space");
        let minus = space.cell_dofs(face.minus).expect("face cell outside the space");
        // union of the two cells' DOFs with the jump of each basis function
        let mut dofs: Vec<usize> = plus.iter().chain(minus).copied().collect();
        dofs.sort_unstable();
        dofs.dedup();
        let pos = |d: usize| dofs.binary_search(&d).unwrap();
        let mut local = vec![0.0; dofs.len() * dofs.len()];
        let rule = face_rule(mesh, face, order);
        let mut j = vec![0.0; dofs.len()];
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            j.iter_mut().for_each(|v| *v = 0.0);
            let bp = space.basis_unchecked(face.plus, p);
            let bm = space.basis_unchecked(face.minus, p);
            let q = |b: &crate::space::Basis, k: usize| match jump {
                Jump::Value => b.values[k],
                Jump::NormalDerivative => b.grads[k].dot(face.normal),
            };
            for (k, &d) in plus.iter().enumerate() {
                j[pos(d)] += q(&bp, k);
            }
            for (k, &d) in minus.iter().enumerate() {
                j[pos(d)] -= q(&bm, k);
            }
            for a in 0..dofs.len() {
                for b in 0..dofs.len() {
                    local[a * dofs.len() + b] += coef * w * j[a] * j[b];
                }
            }
        }
        add_local(&mut coo, &dofs, &dofs, |a, b| local[a * dofs.len() + b]);
    }
    coo.to_csr()
}

/// Ghost penalty `γ h³ Σ_F ([∂_n v], [∂_n w])_F` (the value-jump term vanishes for continuous Q1).
pub fn assemble_ghost_penalty(space: &FESpace, faces: &FaceSet, params: &EmiParams) -> SparseMatrix {
    let h = space.mesh().h();
    assemble_face_jumps(space, faces, params.gamma * h.powi(3), Jump::NormalDerivative, DEFAULT_ORDER)
}

/// `(u, v)_Γ` with rows from `test` and columns from `trial`.
pub fn assemble_interface_mass(test: &FESpace, trial: &FESpace, topo: &CutTopology, order: usize) -> SparseMatrix {
    let mut coo = CooMatrix::new(test.n_dofs(), trial.n_dofs());
    for cc in topo.cut_cells() {
        let c = cc.cell;
        let (Some(rows), Some(cols)) = (test.cell_dofs(c), trial.cell_dofs(c)) else {
            continue;
        };
        let rule = surface_rule(c, topo, order);
        let mut local = [[0.0; 4]; 4];
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            let bt = test.basis_unchecked(c, p);
            let bu = trial.basis_unchecked(c, p);
            for a in 0..bt.n {
                for b in 0..bu.n {
                    local[a][b] += w * bt.values[a] * bu.values[b];
                }
            }
        }
        add_local(&mut coo, rows, cols, |a, b| local[a][b]);
    }
    coo.to_csr()
}

/// `(g, v)_Γ`.
pub fn assemble_surface_load(space: &FESpace, topo: &CutTopology, g: SurfaceField<'_>, order: usize) -> Vec<f64> {
    let mut out = vec![0.0; space.n_dofs()];
    if matches!(g, SurfaceField::Zero) {
        return out;
    }
    for cc in topo.cut_cells() {
        let c = cc.cell;
        let Some(dofs) = space.cell_dofs(c) else { continue };
        let rule = surface_rule(c, topo, order);
        let normals = rule.normals.as_deref().unwrap_or(&[]);
        for (k, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let gv = g.eval(c, p, normals[k]);
            let b = space.basis_unchecked(c, p);
            for (a, &d) in dofs.iter().enumerate() {
                out[d] += w * gv * b.values[a];
            }
        }
    }
    out
}

/// `(f, v)` over `Ω_side`.
pub fn assemble_load(space: &FESpace, topo: &CutTopology, f: &dyn Fn(Point) -> f64, side: Side, order: usize) -> Vec<f64> {
    let mut out = vec![0.0; space.n_dofs()];
    for &c in space.active().cells() {
        let dofs = space.cell_dofs(c).unwrap();
        let rule = bulk_rule(c, topo, side, order);
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            let fv = f(p);
            let b = space.basis_unchecked(c, p);
            for (a, &d) in dofs.iter().enumerate() {
                out[d] += w * fv * b.values[a];
            }
        }
    }
    out
}

/// Surface mass matrix of a Q1 space on `T_{h,Γ}` with the chosen stabilization.
pub fn assemble_surface_mass(
    space: &FESpace,
    topo: &CutTopology,
    params: &EmiParams,
    stab: SurfaceStab,
    ls: &dyn LevelSet,
) -> SparseMatrix {
    let mass = assemble_interface_mass(space, space, topo, DEFAULT_ORDER);
    let h = space.mesh().h();
    match stab {
        SurfaceStab::None => mass,
        SurfaceStab::S1 => {
            let faces = interior_faces(space.active());
            let s = assemble_face_jumps(space, &faces, params.gamma_b * h * h, Jump::NormalDerivative, DEFAULT_ORDER);
            mass.add_scaled(&s, 1.0)
        }
        SurfaceStab::S2 => {
            let mut coo = CooMatrix::new(space.n_dofs(), space.n_dofs());
            for &c in space.active().cells() {
                let dofs = space.cell_dofs(c).unwrap();
                let rule = tensor_rule(space.mesh(), c, DEFAULT_ORDER);
                let mut local = [[0.0; 4]; 4];
                for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                    let n = ls.gradient(p, h).normalized();
                    let b = space.basis_unchecked(c, p);
                    for a in 0..b.n {
                        for d in 0..b.n {
                            local[a][d] += params.gamma_b * h * w * b.grads[a].dot(n) * b.grads[d].dot(n);
                        }
                    }
                }
                add_local(&mut coo, dofs, dofs, |a, b| local[a][b]);
            }
            mass.add_scaled(&coo.to_csr(), 1.0)
        }
    }
}

/// Meshes, spaces and face sets of one cut configuration.
#[derive(Debug, Clone)]
pub struct CutDiscretization {
    pub mesh: BackgroundMesh,
    pub topo: CutTopology,
    /// Continuous Q1 on the intracellular active mesh.
    pub v_i: FESpace,
    /// Continuous Q1 on the extracellular active mesh, constrained on the outer boundary.
    pub v_e: FESpace,
    /// P0 multiplier space on the interface active mesh.
    pub q_h: FESpace,
    /// Continuous Q1 on the interface active mesh (membrane ODE unknowns).
    pub q_ode: FESpace,
    pub ghost_i: FaceSet,
    pub ghost_e: FaceSet,
    /// Interior faces of the interface active mesh.
    pub interface_faces: FaceSet,
    pub order: usize,
}

impl CutDiscretization {
    /// Builds all spaces; `u_bc` gives the boundary values of `u_e` (zero if `None`).
    pub fn new(ls: &dyn LevelSet, mesh: &BackgroundMesh, u_bc: Option<&dyn Fn(Point) -> f64>) -> Result<Self> {
        let topo = CutTopology::build(ls, mesh);
        if topo.n_cut() == 0 {
            return Err(invalid("the level set does not cut the mesh"));
        }
        let am_i = active_mesh(mesh, &topo, DomainTag::Intracellular)?;
        let am_e = active_mesh(mesh, &topo, DomainTag::Extracellular)?;
        let am_g = active_mesh(mesh, &topo, DomainTag::Interface)?;
        let zero = |_: Point| 0.0;
        let bc = u_bc.unwrap_or(&zero);
        Ok(Self {
            mesh: *mesh,
            v_i: build_space(&am_i, Family::Q1, None)?,
            v_e: build_space(&am_e, Family::Q1, Some(bc))?,
            q_h: build_space(&am_g, Family::P0, None)?,
            q_ode: build_space(&am_g, Family::Q1, None)?,
            ghost_i: ghost_faces(&am_i, &topo),
            ghost_e: ghost_faces(&am_e, &topo),
            interface_faces: interior_faces(&am_g),
            topo,
            order: DEFAULT_ORDER,
        })
    }

    pub fn h(&self) -> f64 {
        self.mesh.h()
    }

    pub fn single_layout(&self) -> DofLayout {
        DofLayout { blocks: vec![("u_i", self.v_i.n_dofs()), ("u_e", self.v_e.n_dofs())] }
    }

    pub fn multi_layout(&self) -> DofLayout {
        DofLayout {
            blocks: vec![("u_i", self.v_i.n_dofs()), ("u_e", self.v_e.n_dofs()), ("I_m", self.q_h.n_dofs())],
        }
    }

    /// Constrained global indices of either block system (they sit in the `u_e` block).
    pub fn constrained(&self) -> Vec<(usize, f64)> {
        let off = self.v_i.n_dofs();
        self.v_e.constrained().iter().map(|&(d, v)| (d + off, v)).collect()
    }

    /// Bulk stiffness plus ghost penalty of one subdomain.
    fn bulk_operator(&self, side: Side, params: &EmiParams) -> SparseMatrix {
        let (space, sigma, faces) = match side {
            Side::Intra => (&self.v_i, params.sigma_i, &self.ghost_i),
            Side::Extra => (&self.v_e, params.sigma_e, &self.ghost_e),
        };
        let k = assemble_stiffness(space, &self.topo, side, sigma, self.order);
        if params.stabilized {
            k.add_scaled(&assemble_ghost_penalty(space, faces, params), 1.0)
        } else {
            k
        }
    }

    /// Matrix of the single-dimensional formulation.
    pub fn single_matrix(&self, params: &EmiParams) -> SparseMatrix {
        let (ni, ne) = (self.v_i.n_dofs(), self.v_e.n_dofs());
        let c = params.c_m / params.dt;
        let mut coo = CooMatrix::new(ni + ne, ni + ne);
        coo.push_block(&self.bulk_operator(Side::Intra, params), 0, 0, 1.0);
        coo.push_block(&self.bulk_operator(Side::Extra, params), ni, ni, 1.0);
        let m_ii = assemble_interface_mass(&self.v_i, &self.v_i, &self.topo, self.order);
        let m_ie = assemble_interface_mass(&self.v_i, &self.v_e, &self.topo, self.order);
        let m_ee = assemble_interface_mass(&self.v_e, &self.v_e, &self.topo, self.order);
        coo.push_block(&m_ii, 0, 0, c);
        coo.push_block(&m_ie, 0, ni, -c);
        coo.push_block(&m_ie.transpose(), ni, 0, -c);
        coo.push_block(&m_ee, ni, ni, c);
        coo.to_csr()
    }

    /// Right-hand side of the single-dimensional formulation.
    pub fn single_rhs(
        &self,
        params: &EmiParams,
        g: SurfaceField<'_>,
        f_i: Option<&dyn Fn(Point) -> f64>,
        f_e: Option<&dyn Fn(Point) -> f64>,
    ) -> Vec<f64> {
        let c = params.c_m / params.dt;
        let mut bi = assemble_surface_load(&self.v_i, &self.topo, g, self.order);
        let mut be = assemble_surface_load(&self.v_e, &self.topo, g, self.order);
        bi.iter_mut().for_each(|v| *v *= c);
        be.iter_mut().for_each(|v| *v *= -c);
        if let Some(f) = f_i {
            let l = assemble_load(&self.v_i, &self.topo, f, Side::Intra, self.order);
            bi.iter_mut().zip(l).for_each(|(a, b)| *a += b);
        }
        if let Some(f) = f_e {
            let l = assemble_load(&self.v_e, &self.topo, f, Side::Extra, self.order);
            be.iter_mut().zip(l).for_each(|(a, b)| *a += b);
        }
        bi.extend(be);
        bi
    }

    /// Matrix of the multi-dimensional (saddle point) formulation.
    pub fn multi_matrix(&self, params: &EmiParams) -> SparseMatrix {
        let (ni, ne, nq) = (self.v_i.n_dofs(), self.v_e.n_dofs(), self.q_h.n_dofs());
        let n = ni + ne + nq;
        let mut coo = CooMatrix::new(n, n);
        coo.push_block(&self.bulk_operator(Side::Intra, params), 0, 0, 1.0);
        coo.push_block(&self.bulk_operator(Side::Extra, params), ni, ni, 1.0);
        let b_i = assemble_interface_mass(&self.q_h, &self.v_i, &self.topo, self.order);
        let b_e = assemble_interface_mass(&self.q_h, &self.v_e, &self.topo, self.order);
        let (oi, oe, oq) = (0, ni, ni + ne);
        coo.push_block(&b_i, oq, oi, 1.0);
        coo.push_block(&b_i.transpose(), oi, oq, 1.0);
        coo.push_block(&b_e, oq, oe, -1.0);
        coo.push_block(&b_e.transpose(), oe, oq, -1.0);
        let c = assemble_interface_mass(&self.q_h, &self.q_h, &self.topo, self.order);
        coo.push_block(&c, oq, oq, -params.dt / params.c_m);
        if params.stabilized {
            let s = assemble_face_jumps(&self.q_h, &self.interface_faces, params.phi(self.h()), Jump::Value, self.order);
            coo.push_block(&s, oq, oq, -1.0);
        }
        coo.to_csr()
    }

    /// Right-hand side of the multi-dimensional formulation.
    pub fn multi_rhs(
        &self,
        g: SurfaceField<'_>,
        f_i: Option<&dyn Fn(Point) -> f64>,
        f_e: Option<&dyn Fn(Point) -> f64>,
    ) -> Vec<f64> {
        let load = |space: &FESpace, f: Option<&dyn Fn(Point) -> f64>, side| match f {
            Some(f) => assemble_load(space, &self.topo, f, side, self.order),
            None => vec![0.0; space.n_dofs()],
        };
        let mut b = load(&self.v_i, f_i, Side::Intra);
        b.extend(load(&self.v_e, f_e, Side::Extra));
        b.extend(assemble_surface_load(&self.q_h, &self.topo, g, self.order));
        b
    }
}

/// Single-dimensional system with source terms `f_i`, `f_e`.
pub fn assemble_single_dim(
    disc: &CutDiscretization,
    params: &EmiParams,
    g: SurfaceField<'_>,
    f_i: Option<&dyn Fn(Point) -> f64>,
    f_e: Option<&dyn Fn(Point) -> f64>,
) -> Result<AssembledSystem> {
    params.validate()?;
    Ok(AssembledSystem {
        matrix: disc.single_matrix(params),
        rhs: disc.single_rhs(params, g, f_i, f_e),
        layout: disc.single_layout(),
        constrained: disc.constrained(),
    })
}

/// Multi-dimensional system with source terms `f_i`, `f_e`.
pub fn assemble_multi_dim(
    disc: &CutDiscretization,
    params: &EmiParams,
    g: SurfaceField<'_>,
    f_i: Option<&dyn Fn(Point) -> f64>,
    f_e: Option<&dyn Fn(Point) -> f64>,
) -> Result<AssembledSystem> {
    params.validate()?;
    Ok(AssembledSystem {
        matrix: disc.multi_matrix(params),
        rhs: disc.multi_rhs(g, f_i, f_e),
        layout: disc.multi_layout(),
        constrained: disc.constrained(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::Shape;
    use crate::linalg::solve_direct;
    use crate::mesh::{build_cartesian_mesh, ActiveMesh, Axis, Bounds, Face};

    fn circle_disc(n: usize) -> CutDiscretization {
        let mesh = build_cartesian_mesh(n, n, Bounds::square(-1.0, 1.0)).unwrap();
        CutDiscretization::new(&Shape::circle(0.0, 0.0, 0.5), &mesh, None).unwrap()
    }

    #[test]
    fn phi_is_max() {
        let p = EmiParams { dt: 0.2, c_m: 1.0, ..Default::default() };
        assert_eq!(p.phi(0.0625), 0.2);
    }

    #[test]
    fn empty_ghost_faces_give_zero_matrix() {
        let disc = circle_disc(8);
        let g = assemble_ghost_penalty(&disc.v_i, &FaceSet::default(), &EmiParams::default());
        assert_eq!(g.nnz(), 0);
    }

    #[test]
    fn two_cell_ghost_penalty_by_hand() {
        // u = hat function of the shared vertex (1, 0): slope jumps from 1 to -1 in x
        let mesh = build_cartesian_mesh(2, 1, Bounds::new(0.0, 0.0, 2.0, 1.0)).unwrap();
        let am = ActiveMesh::from_cells(mesh, DomainTag::Intracellular, vec![0, 1]).unwrap();
        let space = build_space(&am, Family::Q1, None).unwrap();
        let faces = FaceSet {
            faces: vec![Face { plus: 0, minus: 1, axis: Axis::X, normal: Point::new(1.0, 0.0) }],
            face_measure: 1.0,
        };
        let params = EmiParams { gamma: 0.1, ..Default::default() };
        let g = assemble_ghost_penalty(&space, &faces, &params);
        let mut u = vec![0.0; space.n_dofs()];
        u[space.vertex_dof(mesh.vertex_index(1, 0)).unwrap()] = 1.0;
        // [∂_x u] = (1 - y) - (-(1 - y)) = 2 (1 - y); ∫_0^1 4 (1 - y)^2 dy = 4/3
        let expected = 0.1 * 1.0 * 4.0 / 3.0;
        assert!((g.bilinear(&u, &u) - expected).abs() < 1e-14);
    }

    #[test]
    fn affine_ghost_energy_vanishes() {
        let disc = circle_disc(16);
        let g = assemble_ghost_penalty(&disc.v_e, &disc.ghost_e, &EmiParams::default());
        let u = disc.v_e.interpolate(|p| 2.0 * p.x - p.y);
        assert!(g.bilinear(&u, &u).abs() < 1e-14);
    }

    #[test]
    fn constant_surface_mass_gives_interface_length() {
        let disc = circle_disc(32);
        let ls = Shape::circle(0.0, 0.0, 0.5);
        let m = assemble_surface_mass(&disc.q_ode, &disc.topo, &EmiParams::default(), SurfaceStab::None, &ls);
        let one = vec![1.0; disc.q_ode.n_dofs()];
        assert!((m.bilinear(&one, &one) - disc.topo.interface_length()).abs() < 1e-12);
    }

    #[test]
    fn constant_solution_is_reproduced() {
        let mesh = build_cartesian_mesh(16, 16, Bounds::square(-1.0, 1.0)).unwrap();
        let c = 0.7;
        let bc = move |_: Point| c;
        let disc = CutDiscretization::new(&Shape::circle(0.05, -0.02, 0.55), &mesh, Some(&bc)).unwrap();
        let params = EmiParams { sigma_i: 1.0, sigma_e: 2.0, c_m: 1.0, dt: 0.5, ..Default::default() };
        let sys = assemble_single_dim(&disc, &params, SurfaceField::Zero, None, None).unwrap();
        let (red, rhs) = sys.reduce();
        let x = sys.expand(&red, &solve_direct(&red.matrix, &rhs).unwrap());
        assert!(x.iter().all(|v| (v - c).abs() < 1e-10));
    }

    #[test]
    fn operators_are_symmetric() {
        let disc = circle_disc(16);
        let params = EmiParams { sigma_i: 1.0, sigma_e: 2.0, c_m: 1.0, dt: 0.5, ..Default::default() };
        assert!(disc.single_matrix(&params).is_symmetric(1e-12));
        assert!(disc.multi_matrix(&params).is_symmetric(1e-12));
    }
}
