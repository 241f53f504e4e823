//! Godunov splitting of the EMI model: an explicit ODE step on the membrane
//! followed by an implicit PDE step for the potentials.
//!
//! The geometry is static, so the PDE matrix is assembled and factored once.

use crate::assembly::{CutDiscretization, EmiParams, ReducedSystem, SurfaceField, SurfaceStab};
use crate::error::{invalid, Error, Result};
use crate::levelset::LevelSet;
use crate::linalg::LuFactorization;
use crate::membrane::{ode_step, MembraneModel, MembraneState, RhsEvaluation, SurfaceProjector};
use crate::mesh::{BackgroundMesh, Bounds};
use crate::point::Point;
use crate::quadrature::surface_rule;

type BulkSource<'a> = &'a dyn Fn(Point) -> f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formulation {
    /// Potentials only; the membrane current is eliminated.
    Single,
    /// Potentials plus the membrane current as a P0 multiplier.
    Multi,
}

/// How `v^m` is obtained after the PDE step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum VUpdate {
    /// Stabilized projection of the trace jump `u_i − u_e`.
    #[default]
    TraceJump,
    /// Stabilized projection of `(Δt/C_m) I_m + g` (multi formulation only).
    Current,
}

/// Which potential starts the next ODE step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Seed {
    /// `v^m` from the PDE step.
    #[default]
    Corrected,
    /// `v*` from the ODE step.
    Intermediate,
}

/// Run configuration of the splitting scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct EmiConfig {
    pub n: usize,
    pub bounds: Bounds,
    pub t_end: f64,
    pub formulation: Formulation,
    pub ode_stab: SurfaceStab,
    pub params: EmiParams,
    pub v_update: VUpdate,
    pub seed: Seed,
    pub rhs_eval: RhsEvaluation,
}

impl EmiConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n < 4 {
            return Err(invalid("at least 4 cells per axis"));
        }
        if !(self.t_end >= self.params.dt) {
            return Err(invalid("end time shorter than one time step"));
        }
        if self.v_update == VUpdate::Current && self.formulation == Formulation::Single {
            return Err(invalid("the current-based v update needs the multi formulation"));
        }
        Ok(())
    }

    /// Number of time steps, `round(t_end / dt)`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.params.dt).round() as usize
    }
}

/// Bulk sources and boundary data of the PDE step.
pub trait Sources: Send + Sync {
    /// Whether `f_i` and `f_e` are nonzero; when false they are not integrated.
    fn has_bulk_sources(&self) -> bool {
        false
    }

    fn f_i(&self, _p: Point, _t: f64) -> f64 {
        0.0
    }

    fn f_e(&self, _p: Point, _t: f64) -> f64 {
        0.0
    }

    /// Value of `u_e` on the outer boundary.
    fn u_bc(&self, _p: Point, _t: f64) -> f64 {
        0.0
    }
}

/// Homogeneous data.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoSources;

impl Sources for NoSources {}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeSolution {
    pub u_i: Vec<f64>,
    pub u_e: Vec<f64>,
    /// P0 membrane current on the interface cells (multi formulation, or
    /// reconstructed for the single formulation).
    pub i_m: Option<Vec<f64>>,
}

/// What a probe samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProbeKind {
    Membrane,
    Intracellular,
    Extracellular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub point: Point,
    pub kind: ProbeKind,
}

/// Assembled and factored operators of one static geometry.
pub struct EmiSolver {
    pub disc: CutDiscretization,
    pub params: EmiParams,
    pub formulation: Formulation,
    pub projector: SurfaceProjector,
    pub v_update: VUpdate,
    pub seed: Seed,
    pub rhs_eval: RhsEvaluation,
    reduced: ReducedSystem,
    lu: LuFactorization,
    /// Boundary points of the constrained unknowns, in reduction order.
    fixed_points: Vec<Point>,
}

impl std::fmt::Debug for EmiSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmiSolver")
            .field("formulation", &self.formulation)
            .field("unknowns", &self.reduced.n_full)
            .finish()
    }
}

impl EmiSolver {
    pub fn new(
        ls: &dyn LevelSet,
        mesh: &BackgroundMesh,
        params: EmiParams,
        formulation: Formulation,
        ode_stab: SurfaceStab,
    ) -> Result<Self> {
        params.validate()?;
        let disc = CutDiscretization::new(ls, mesh, None)?;
        let matrix = match formulation {
            Formulation::Single => disc.single_matrix(&params),
            Formulation::Multi => disc.multi_matrix(&params),
        };
        let constrained = disc.constrained();
        let fixed: Vec<usize> = constrained.iter().map(|c| c.0).collect();
        let off = disc.v_i.n_dofs();
        let fixed_points = fixed.iter().map(|&g| disc.v_e.dof_point(g - off)).collect();
        let reduced = ReducedSystem::new(&matrix, fixed);
        let lu = LuFactorization::new(&reduced.matrix)?;
        let projector = SurfaceProjector::new(&disc.q_ode, &disc.topo, &params, ode_stab, ls)?;
        Ok(Self {
            disc,
            params,
            formulation,
            projector,
            v_update: VUpdate::default(),
            seed: Seed::default(),
            rhs_eval: RhsEvaluation::default(),
            reduced,
            lu,
            fixed_points,
        })
    }

    pub fn from_config(ls: &dyn LevelSet, cfg: &EmiConfig) -> Result<Self> {
        cfg.validate()?;
        let mesh = BackgroundMesh::new(cfg.n, cfg.n, cfg.bounds)?;
        let mut s = Self::new(ls, &mesh, cfg.params, cfg.formulation, cfg.ode_stab)?;
        s.v_update = cfg.v_update;
        s.seed = cfg.seed;
        s.rhs_eval = cfg.rhs_eval;
        Ok(s)
    }

    /// Recomputes the factorization of the PDE matrix.
    pub fn refactor(&mut self) -> Result<()> {
        self.lu = LuFactorization::new(&self.reduced.matrix)?;
        Ok(())
    }

    /// Number of unknowns of the PDE system before constraint elimination.
    pub fn n_unknowns(&self) -> usize {
        self.reduced.n_full
    }

    /// Solves the PDE step at time `t` with membrane datum `g`.
    pub fn pde_step(&self, g: SurfaceField<'_>, sources: &dyn Sources, t: f64) -> Result<PdeSolution> {
        let d = &self.disc;
        let fi = |p: Point| sources.f_i(p, t);
        let fe = |p: Point| sources.f_e(p, t);
        let (fi_opt, fe_opt): (Option<BulkSource<'_>>, Option<BulkSource<'_>>) =
            if sources.has_bulk_sources() { (Some(&fi), Some(&fe)) } else { (None, None) };
        let rhs = match self.formulation {
            Formulation::Single => d.single_rhs(&self.params, g, fi_opt, fe_opt),
            Formulation::Multi => d.multi_rhs(g, fi_opt, fe_opt),
        };
        let fixed: Vec<f64> = self.fixed_points.iter().map(|&p| sources.u_bc(p, t)).collect();
        let x_free = self.lu.solve(&self.reduced.reduce_rhs(&rhs, &fixed))?;
        let x = self.reduced.expand(&x_free, &fixed);
        let (ni, ne) = (d.v_i.n_dofs(), d.v_e.n_dofs());
        let u_i = x[..ni].to_vec();
        let u_e = x[ni..ni + ne].to_vec();
        let i_m = match self.formulation {
            Formulation::Multi => x[ni + ne..].to_vec(),
            Formulation::Single => self.reconstruct_current(&u_i, &u_e, g),
        };
        Ok(PdeSolution { u_i, u_e, i_m: Some(i_m) })
    }

    /// `(C_m/Δt)(u_i − u_e − g)` projected onto P0 on the interface cells.
    fn reconstruct_current(&self, u_i: &[f64], u_e: &[f64], g: SurfaceField<'_>) -> Vec<f64> {
        let d = &self.disc;
        let c = self.params.c_m / self.params.dt;
        let mut out = vec![0.0; d.q_h.n_dofs()];
        for (k, &cell) in d.q_h.active().cells().iter().enumerate() {
            let rule = surface_rule(cell, &d.topo, d.order);
            let normals = rule.normals.as_deref().unwrap_or(&[]);
            let len = rule.measure();
            if len <= 0.0 {
                continue;
            }
            let mut sum = 0.0;
            for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let jump = d.v_i.evaluate(u_i, cell, p) - d.v_e.evaluate(u_e, cell, p);
                sum += w * c * (jump - g.eval(cell, p, normals[q]));
            }
            out[k] = sum / len;
        }
        out
    }

    /// `v^m` from a PDE solution obtained with datum `g`.
    pub fn update_v(&self, sol: &PdeSolution, g: SurfaceField<'_>) -> Result<Vec<f64>> {
        let d = &self.disc;
        match self.v_update {
            VUpdate::TraceJump => {
                let jump = |cell: usize, p: Point, _n: Point| {
                    d.v_i.evaluate(&sol.u_i, cell, p) - d.v_e.evaluate(&sol.u_e, cell, p)
                };
                self.projector.project(&d.q_ode, &d.topo, SurfaceField::Cellwise(&jump))
            }
            VUpdate::Current => {
                let i_m = sol.i_m.as_deref().ok_or_else(|| invalid("no membrane current available"))?;
                let k = self.params.dt / self.params.c_m;
                let f = |cell: usize, p: Point, n: Point| k * d.q_h.evaluate(i_m, cell, p) + g.eval(cell, p, n);
                self.projector.project(&d.q_ode, &d.topo, SurfaceField::Cellwise(&f))
            }
        }
    }

    /// One splitting step from `state` (at `t^{m-1}`) to `t^m`.
    pub fn step(&self, state: &MembraneState, model: &dyn MembraneModel, sources: &dyn Sources, m: usize) -> Result<(MembraneState, PdeSolution)> {
        let stage = |stage: &'static str| move |e: Error| Error::Stage { step: m, stage, source: Box::new(e) };
        let d = &self.disc;
        let dt = self.params.dt;
        let ode = ode_step(state, dt, model, &d.q_ode, &d.topo, &self.projector, self.rhs_eval).map_err(stage("ode"))?;
        let t = state.t + dt;
        let g = SurfaceField::Discrete { space: &d.q_ode, coeffs: &ode.v_star };
        let sol = self.pde_step(g, sources, t).map_err(stage("pde"))?;
        let v = self.update_v(&sol, g).map_err(stage("v-update"))?;
        let next = MembraneState {
            v: match self.seed {
                Seed::Corrected => v,
                Seed::Intermediate => ode.v_star,
            },
            gates: ode.gates,
            t,
        };
        Ok((next, sol))
    }

    /// Runs `n_steps` splitting steps, calling `observer` after each.
    pub fn run(
        &self,
        mut state: MembraneState,
        model: &dyn MembraneModel,
        sources: &dyn Sources,
        n_steps: usize,
        observer: &mut dyn FnMut(usize, &MembraneState, &PdeSolution) -> Result<()>,
    ) -> Result<MembraneState> {
        for m in 1..=n_steps {
            let (next, sol) = self.step(&state, model, sources, m)?;
            observer(m, &next, &sol)?;
            state = next;
        }
        Ok(state)
    }

    /// Samples a field at a probe point; the point must lie in the probed region.
    pub fn probe(&self, ls: &dyn LevelSet, probe: &Probe, state: &MembraneState, sol: &PdeSolution) -> Result<f64> {
        let d = &self.disc;
        let p = probe.point;
        let cell = d.mesh.locate(p).ok_or_else(|| invalid(format!("probe ({}, {}) outside the mesh", p.x, p.y)))?;
        let (space, coeffs) = match probe.kind {
            ProbeKind::Membrane => (&d.q_ode, &state.v),
            ProbeKind::Intracellular if ls.value(p) < 0.0 => (&d.v_i, &sol.u_i),
            ProbeKind::Extracellular if ls.value(p) > 0.0 => (&d.v_e, &sol.u_e),
            _ => return Err(invalid(format!("probe ({}, {}) is not in the {:?} region", p.x, p.y, probe.kind))),
        };
        if space.cell_dofs(cell).is_none() {
            return Err(invalid(format!("probe ({}, {}) is not in the {:?} region", p.x, p.y, probe.kind)));
        }
        Ok(space.evaluate(coeffs, cell, p))
    }
}

/// Runs the splitting scheme of `cfg`, returning every step's state and PDE solution.
pub fn run_simulation(
    ls: &dyn LevelSet,
    cfg: &EmiConfig,
    model: &dyn MembraneModel,
    sources: &dyn Sources,
    initial: &dyn Fn(&EmiSolver) -> MembraneState,
) -> Result<Vec<(MembraneState, PdeSolution)>> {
    let solver = EmiSolver::from_config(ls, cfg)?;
    let mut out = Vec::with_capacity(cfg.n_steps());
    solver.run(initial(&solver), model, sources, cfg.n_steps(), &mut |_, s, sol| {
        out.push((s.clone(), sol.clone()));
        Ok(())
    })?;
    Ok(out)
}
