//! Membrane models and the unfitted surface ODE step.
//!
//! Membrane unknowns live in a continuous Q1 space on the interface active
//! mesh. One explicit Euler step solves `M_stab x^{n+1} = m(x^n + Δt F(x^n))`
//! with `M_stab` the stabilized and `m` the plain surface mass matrix.

use crate::assembly::{
    assemble_interface_mass, assemble_surface_load, assemble_surface_mass, EmiParams, SurfaceField, SurfaceStab,
};
use crate::error::{invalid, Result};
use crate::levelset::{CutTopology, LevelSet};
use crate::linalg::{LuFactorization, SparseMatrix};
use crate::point::Point;
use crate::quadrature::{surface_rule, DEFAULT_ORDER};
use crate::space::FESpace;

/// Where the stimulus current is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StimRegion {
    Nowhere,
    Everywhere,
    /// Points with `x > x_min`.
    XAbove(f64),
    Disk { center: Point, radius: f64 },
}

impl StimRegion {
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            StimRegion::Nowhere => false,
            StimRegion::Everywhere => true,
            StimRegion::XAbove(x) => p.x > x,
            StimRegion::Disk { center, radius } => p.distance(center) <= radius,
        }
    }
}

/// Hodgkin-Huxley parameters (lengths in μm, times in ms, potentials in mV).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HHParams {
    pub g_na_bar: f64,
    pub g_k_bar: f64,
    pub g_l_bar: f64,
    pub g_stim: f64,
    pub e_na: f64,
    pub e_k: f64,
    pub e_l: f64,
    pub v_rest: f64,
    pub v0: f64,
    pub m0: f64,
    pub h0: f64,
    pub n0: f64,
    pub c_m: f64,
    pub stim_region: StimRegion,
    pub stim_window: (f64, f64),
}

impl Default for HHParams {
    fn default() -> Self {
        Self {
            g_na_bar: 1.2e-3,
            g_k_bar: 3.6e-4,
            g_l_bar: 3e-6,
            g_stim: 7e-3,
            e_na: 50.0,
            e_k: -77.0,
            e_l: -54.5,
            v_rest: -65.0,
            v0: -67.7,
            m0: 0.0379,
            h0: 0.688,
            n0: 0.276,
            c_m: 2e-5,
            stim_region: StimRegion::Everywhere,
            stim_window: (0.0, 0.5),
        }
    }
}

impl HHParams {
    pub fn validate(&self) -> Result<()> {
        let g = [self.g_na_bar, self.g_k_bar, self.g_l_bar, self.g_stim];
        let s = [self.m0, self.h0, self.n0];
        if g.iter().any(|v| !(*v >= 0.0)) || s.iter().any(|v| !(0.0..=1.0).contains(v)) || !(self.c_m > 0.0) {
            return Err(invalid(format!("invalid Hodgkin-Huxley parameters: {self:?}")));
        }
        Ok(())
    }

    pub fn stimulus(&self, p: Point, t: f64) -> f64 {
        let (t1, t2) = self.stim_window;
        if self.stim_region.contains(p) && t >= t1 && t <= t2 {
            self.g_stim
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatingRates {
    pub alpha_m: f64,
    pub beta_m: f64,
    pub alpha_h: f64,
    pub beta_h: f64,
    pub alpha_n: f64,
    pub beta_n: f64,
}

impl GatingRates {
    pub fn m_inf(&self) -> f64 {
        self.alpha_m / (self.alpha_m + self.beta_m)
    }

    pub fn h_inf(&self) -> f64 {
        self.alpha_h / (self.alpha_h + self.beta_h)
    }

    pub fn n_inf(&self) -> f64 {
        self.alpha_n / (self.alpha_n + self.beta_n)
    }
}

/// `u / (exp(u / k) - 1)`, continued by its series near `u = 0`.
fn exprel(u: f64, k: f64) -> f64 {
    let x = u / k;
    if x.abs() < 1e-6 {
        k * (1.0 - 0.5 * x)
    } else {
        u / x.exp_m1()
    }
}

pub fn gating_rates(v: f64, v_rest: f64) -> GatingRates {
    let vm = v - v_rest;
    GatingRates {
        alpha_m: 0.1 * exprel(25.0 - vm, 10.0),
        beta_m: 4.0 * (-vm / 18.0).exp(),
        alpha_h: 0.07 * (-vm / 20.0).exp(),
        beta_h: 1.0 / (((30.0 - vm) / 10.0).exp() + 1.0),
        alpha_n: 0.01 * exprel(10.0 - vm, 10.0),
        beta_n: 0.125 * (-vm / 80.0).exp(),
    }
}

/// Ionic current density; the applied stimulus enters with a minus sign.
pub fn ionic_current(v: f64, m: f64, h: f64, n: f64, p: Point, t: f64, params: &HHParams) -> f64 {
    params.g_na_bar * m.powi(3) * h * (v - params.e_na)
        + params.g_k_bar * n.powi(4) * (v - params.e_k)
        + params.g_l_bar * (v - params.e_l)
        - params.stimulus(p, t)
}

/// Pointwise membrane dynamics `v_t = voltage_rate`, `s_t = gate_rates`
/// (the PDE-coupled current is handled by the PDE step).
pub trait MembraneModel: Send + Sync {
    fn n_gates(&self) -> usize;

    fn voltage_rate(&self, v: f64, s: &[f64], p: Point, t: f64) -> f64;

    fn gate_rates(&self, v: f64, s: &[f64], p: Point, t: f64, out: &mut [f64]);

    /// Admissible range of gate values, enforced after each step.
    fn gate_bounds(&self) -> Option<(f64, f64)> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HodgkinHuxley(pub HHParams);

impl MembraneModel for HodgkinHuxley {
    fn n_gates(&self) -> usize {
        3
    }

    fn voltage_rate(&self, v: f64, s: &[f64], p: Point, t: f64) -> f64 {
        -ionic_current(v, s[0], s[1], s[2], p, t, &self.0) / self.0.c_m
    }

    fn gate_rates(&self, v: f64, s: &[f64], _p: Point, _t: f64, out: &mut [f64]) {
        let r = gating_rates(v, self.0.v_rest);
        out[0] = r.alpha_m * (1.0 - s[0]) - r.beta_m * s[0];
        out[1] = r.alpha_h * (1.0 - s[1]) - r.beta_h * s[1];
        out[2] = r.alpha_n * (1.0 - s[2]) - r.beta_n * s[2];
    }

    fn gate_bounds(&self) -> Option<(f64, f64)> {
        Some((0.0, 1.0))
    }
}

/// The linear test system `v_t = -s`, `s_t = v`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinearOscillator;

impl MembraneModel for LinearOscillator {
    fn n_gates(&self) -> usize {
        1
    }

    fn voltage_rate(&self, _v: f64, s: &[f64], _p: Point, _t: f64) -> f64 {
        -s[0]
    }

    fn gate_rates(&self, v: f64, _s: &[f64], _p: Point, _t: f64, out: &mut [f64]) {
        out[0] = v;
    }
}

/// Membrane potential and gate coefficients in the surface ODE space.
#[derive(Debug, Clone, PartialEq)]
pub struct MembraneState {
    pub v: Vec<f64>,
    pub gates: Vec<Vec<f64>>,
    pub t: f64,
}

/// Nodal interpolation of the initial values.
pub fn initialize_state(space: &FESpace, v0: &dyn Fn(Point) -> f64, s0: &[&dyn Fn(Point) -> f64]) -> MembraneState {
    MembraneState { v: space.interpolate(v0), gates: s0.iter().map(|f| space.interpolate(f)).collect(), t: 0.0 }
}

/// Stabilized L²-projection of the initial values.
pub fn initialize_state_projected(
    space: &FESpace,
    topo: &CutTopology,
    proj: &SurfaceProjector,
    v0: &dyn Fn(Point) -> f64,
    s0: &[&dyn Fn(Point) -> f64],
) -> Result<MembraneState> {
    let pr = |f: &dyn Fn(Point) -> f64| {
        let g = move |p: Point, _n: Point| f(p);
        proj.project(space, topo, SurfaceField::Function(&g))
    };
    Ok(MembraneState { v: pr(v0)?, gates: s0.iter().map(|f| pr(*f)).collect::<Result<_>>()?, t: 0.0 })
}

/// Factored stabilized surface mass matrix plus the plain one.
#[derive(Debug)]
pub struct SurfaceProjector {
    pub stabilized: SparseMatrix,
    pub plain: SparseMatrix,
    lu: LuFactorization,
}

impl SurfaceProjector {
    pub fn new(space: &FESpace, topo: &CutTopology, params: &EmiParams, stab: SurfaceStab, ls: &dyn LevelSet) -> Result<Self> {
        let stabilized = assemble_surface_mass(space, topo, params, stab, ls);
        let plain = assemble_interface_mass(space, space, topo, DEFAULT_ORDER);
        let lu = LuFactorization::new(&stabilized)?;
        Ok(Self { stabilized, plain, lu })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.lu.solve(rhs)
    }

    /// Solves `M_stab u = (f, w)_Γ`.
    pub fn project(&self, space: &FESpace, topo: &CutTopology, f: SurfaceField<'_>) -> Result<Vec<f64>> {
        self.solve(&assemble_surface_load(space, topo, f, DEFAULT_ORDER))
    }
}

/// Solves `M_stab u = (f, w)_Γ` with a given stabilized matrix.
pub fn project_surface(space: &FESpace, topo: &CutTopology, m_stab: &SparseMatrix, f: SurfaceField<'_>) -> Result<Vec<f64>> {
    let rhs = assemble_surface_load(space, topo, f, DEFAULT_ORDER);
    LuFactorization::new(m_stab)?.solve(&rhs)
}

/// How nonlinear right-hand sides are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RhsEvaluation {
    /// At surface quadrature points from the interpolated fields.
    #[default]
    Quadrature,
    /// At the DOFs, then multiplied by the plain surface mass.
    Nodal,
}

/// Result of an ODE step: the intermediate potential `v*` and the new gates.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeStep {
    pub v_star: Vec<f64>,
    pub gates: Vec<Vec<f64>>,
}

/// One explicit Euler step of the membrane ODEs from `state` (time `state.t`).
pub fn ode_step(
    state: &MembraneState,
    dt: f64,
    model: &dyn MembraneModel,
    space: &FESpace,
    topo: &CutTopology,
    proj: &SurfaceProjector,
    eval: RhsEvaluation,
) -> Result<OdeStep> {
    let ng = model.n_gates();
    if state.gates.len() != ng || state.v.len() != space.n_dofs() {
        return Err(invalid("membrane state does not match the model or the space"));
    }
    let t = state.t;
    let n = space.n_dofs();
    let mut rhs = vec![vec![0.0; n]; ng + 1];
    let mut s = vec![0.0; ng];
    let mut ds = vec![0.0; ng];
    match eval {
        RhsEvaluation::Quadrature => {
            for cc in topo.cut_cells() {
                let dofs = space.cell_dofs(cc.cell).expect("cut cell outside the surface space");
                let rule = surface_rule(cc.cell, topo, DEFAULT_ORDER);
                for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                    let b = space.basis_unchecked(cc.cell, p);
                    let at = |c: &[f64]| dofs.iter().zip(&b.values).map(|(&d, v)| c[d] * v).sum::<f64>();
                    let v = at(&state.v);
                    for k in 0..ng {
                        s[k] = at(&state.gates[k]);
                    }
                    let v_new = v + dt * model.voltage_rate(v, &s, p, t);
                    model.gate_rates(v, &s, p, t, &mut ds);
                    for (a, &d) in dofs.iter().enumerate() {
                        let wb = w * b.values[a];
                        rhs[0][d] += wb * v_new;
                        for k in 0..ng {
                            rhs[k + 1][d] += wb * (s[k] + dt * ds[k]);
                        }
                    }
                }
            }
        }
        RhsEvaluation::Nodal => {
            let mut nodal = vec![vec![0.0; n]; ng + 1];
            for d in 0..n {
                let p = space.dof_point(d);
                let v = state.v[d];
                for k in 0..ng {
                    s[k] = state.gates[k][d];
                }
                nodal[0][d] = v + dt * model.voltage_rate(v, &s, p, t);
                model.gate_rates(v, &s, p, t, &mut ds);
                for k in 0..ng {
                    nodal[k + 1][d] = s[k] + dt * ds[k];
                }
            }
            for (r, x) in rhs.iter_mut().zip(&nodal) {
                *r = proj.plain.mul_vec(x);
            }
        }
    }
    let v_star = proj.solve(&rhs[0])?;
    let mut gates = Vec::with_capacity(ng);
    for r in &rhs[1..] {
        let mut g = proj.solve(r)?;
        if let Some((lo, hi)) = model.gate_bounds() {
            g.iter_mut().for_each(|x| *x = x.clamp(lo, hi));
        }
        gates.push(g);
    }
    Ok(OdeStep { v_star, gates })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_at_rest() {
        let r = gating_rates(-65.0, -65.0);
        assert!((r.alpha_h - 0.07).abs() < 1e-15);
        assert!((r.beta_m - 4.0).abs() < 1e-15);
        assert!((r.beta_n - 0.125).abs() < 1e-15);
        assert!((r.alpha_m - 2.5 / (2.5f64.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn removable_singularities() {
        let r = gating_rates(25.0, 0.0);
        assert!((r.alpha_m - 1.0).abs() < 1e-12);
        let r = gating_rates(10.0, 0.0);
        assert!((r.alpha_n - 0.1).abs() < 1e-12);
        // continuity across the switch to the series
        for (v, f) in [(25.0, 0usize), (10.0, 1)] {
            let a = |x: f64| {
                let r = gating_rates(x, 0.0);
                [r.alpha_m, r.alpha_n][f]
            };
            assert!((a(v + 1e-4) - a(v)).abs() < 1e-5);
            assert!((a(v - 1e-4) - a(v)).abs() < 1e-5);
        }
    }

    #[test]
    fn leak_only_current() {
        let p = HHParams { stim_region: StimRegion::Nowhere, ..Default::default() };
        let i = ionic_current(-60.0, 0.0, 0.0, 0.0, Point::default(), 0.0, &p);
        assert!((i - p.g_l_bar * (-60.0 - p.e_l)).abs() < 1e-20);
        let q = HHParams { g_na_bar: 0.0, g_k_bar: 0.0, ..p };
        assert_eq!(ionic_current(q.e_l, 0.3, 0.4, 0.5, Point::default(), 0.0, &q), 0.0);
    }

    #[test]
    fn stimulus_sign_and_window() {
        let p = HHParams { stim_region: StimRegion::XAbove(1.0), stim_window: (0.0, 0.5), ..Default::default() };
        let base = ionic_current(-60.0, 0.1, 0.5, 0.3, Point::new(0.0, 0.0), 0.2, &p);
        let stim = ionic_current(-60.0, 0.1, 0.5, 0.3, Point::new(2.0, 0.0), 0.2, &p);
        assert!((base - stim - p.g_stim).abs() < 1e-15);
        let late = ionic_current(-60.0, 0.1, 0.5, 0.3, Point::new(2.0, 0.0), 0.6, &p);
        assert_eq!(late, base);
    }
}
