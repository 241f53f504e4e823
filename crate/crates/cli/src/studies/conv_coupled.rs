//! Convergence of the full splitting scheme on a manufactured solution with
//! `w = sin(πx) cos(πy) e^{-t/2}`, `u_i = w/σ_i`, `u_e = w/σ_e`, `s = I_m`
//! and the linear membrane model `v_t = (I_m - P₁ + s)/C_m`, `s_t = v + P₂`.

use std::f64::consts::PI;

use anyhow::Result;
use emi_cutfem::driver::{Formulation, Sources};
use emi_cutfem::membrane::{initialize_state, MembraneModel};
use emi_cutfem::norms::{bulk_h1_semi_error, bulk_l2_error, surface_l2_error, ERROR_ORDER};
use emi_cutfem::quadrature::bulk_rule;
use emi_cutfem::{
    build_cartesian_mesh, Bounds, CutTopology, EmiParams, EmiSolver, FESpace, LevelSet, Point, Shape, Side,
    SurfaceStab,
};

use super::{ordered_map, with_overrides, Check, StudyOutput};
use crate::config::{parse_geometry, RunConfig};
use crate::report::{eoc_column, StudyReport};

pub const T_END: f64 = 1.0;
pub const DEFAULT_STEPS: [usize; 5] = [4, 6, 8, 12, 16];

/// Closed-form fields and the membrane model they solve.
#[derive(Debug, Clone)]
pub struct CoupledProblem {
    pub shape: Shape,
    pub sigma_i: f64,
    pub sigma_e: f64,
    pub c_m: f64,
    /// Step of the level-set gradient used for the normal.
    pub h: f64,
}

impl CoupledProblem {
    pub fn w(p: Point, t: f64) -> f64 {
        (PI * p.x).sin() * (PI * p.y).cos() * (-0.5 * t).exp()
    }

    pub fn grad_w(p: Point, t: f64) -> Point {
        let e = (-0.5 * t).exp();
        Point::new(PI * (PI * p.x).cos() * (PI * p.y).cos() * e, -PI * (PI * p.x).sin() * (PI * p.y).sin() * e)
    }

    /// Outward unit normal of the intracellular domain.
    pub fn normal(&self, p: Point) -> Point {
        self.shape.gradient(p, self.h).normalized()
    }

    pub fn i_m(&self, p: Point, t: f64) -> f64 {
        -Self::grad_w(p, t).dot(self.normal(p))
    }

    pub fn v(&self, p: Point, t: f64) -> f64 {
        Self::w(p, t) * (1.0 / self.sigma_i - 1.0 / self.sigma_e)
    }

    pub fn s(&self, p: Point, t: f64) -> f64 {
        self.i_m(p, t)
    }

    /// `P₁ = I_m + s - C_m v_t`.
    pub fn p1(&self, p: Point, t: f64) -> f64 {
        2.0 * self.i_m(p, t) + 0.5 * self.c_m * self.v(p, t)
    }

    /// `P₂ = s_t - v`.
    pub fn p2(&self, p: Point, t: f64) -> f64 {
        -0.5 * self.i_m(p, t) - self.v(p, t)
    }
}

impl MembraneModel for CoupledProblem {
    fn n_gates(&self) -> usize {
        1
    }

    fn voltage_rate(&self, _v: f64, s: &[f64], p: Point, t: f64) -> f64 {
        (s[0] - self.p1(p, t)) / self.c_m
    }

    fn gate_rates(&self, v: f64, _s: &[f64], p: Point, t: f64, out: &mut [f64]) {
        out[0] = v + self.p2(p, t);
    }
}

impl Sources for CoupledProblem {
    fn has_bulk_sources(&self) -> bool {
        true
    }

    fn f_i(&self, p: Point, t: f64) -> f64 {
        2.0 * PI * PI * Self::w(p, t)
    }

    fn f_e(&self, p: Point, t: f64) -> f64 {
        2.0 * PI * PI * Self::w(p, t)
    }

    fn u_bc(&self, p: Point, t: f64) -> f64 {
        Self::w(p, t) / self.sigma_e
    }
}

/// Time-space error accumulator: maximum and root mean square over the samples.
#[derive(Debug, Clone, Copy, Default)]
struct Accum {
    max: f64,
    sum_sq: f64,
    count: usize,
}

impl Accum {
    fn add(&mut self, e: f64) {
        self.max = self.max.max(e);
        self.sum_sq += e * e;
        self.count += 1;
    }

    fn rms(&self) -> f64 {
        (self.sum_sq / self.count as f64).sqrt()
    }
}

struct LevelRun {
    /// `u_l2, u_h1, v, s, i_m`.
    acc: [Accum; 5],
    /// `(u_i, u_e)` after every step.
    history: Vec<(Vec<f64>, Vec<f64>)>,
    solver: EmiSolver,
}

fn solve_level(problem: &CoupledProblem, m_steps: usize, base: EmiParams, formulation: Formulation) -> Result<LevelRun> {
    let n = 4 * m_steps;
    let mesh = build_cartesian_mesh(n, n, Bounds::square(-1.0, 1.0))?;
    let dt = T_END / m_steps as f64;
    let params = EmiParams { dt, ..base };
    let solver = EmiSolver::new(&problem.shape, &mesh, params, formulation, SurfaceStab::S1)?;
    let d = &solver.disc;
    let mut acc = [Accum::default(); 5];
    let state = initialize_state(&d.q_ode, &|p| problem.v(p, 0.0), &[&|p| problem.s(p, 0.0)]);
    acc[2].add(surface_l2_error(&d.q_ode, &state.v, &d.topo, &|p, _| problem.v(p, 0.0)));
    acc[3].add(surface_l2_error(&d.q_ode, &state.gates[0], &d.topo, &|p, _| problem.s(p, 0.0)));
    let mut history = Vec::with_capacity(m_steps);
    let (si, se) = (problem.sigma_i, problem.sigma_e);
    solver.run(state, problem, problem, m_steps, &mut |_, st, sol| {
        let t = st.t;
        acc[0].add(
            bulk_l2_error(&d.v_i, &sol.u_i, &d.topo, Side::Intra, &|p| CoupledProblem::w(p, t) / si)
                .hypot(bulk_l2_error(&d.v_e, &sol.u_e, &d.topo, Side::Extra, &|p| CoupledProblem::w(p, t) / se)),
        );
        acc[1].add(
            bulk_h1_semi_error(&d.v_i, &sol.u_i, &d.topo, Side::Intra, &|p| CoupledProblem::grad_w(p, t) * (1.0 / si))
                .hypot(bulk_h1_semi_error(&d.v_e, &sol.u_e, &d.topo, Side::Extra, &|p| {
                    CoupledProblem::grad_w(p, t) * (1.0 / se)
                })),
        );
        acc[2].add(surface_l2_error(&d.q_ode, &st.v, &d.topo, &|p, _| problem.v(p, t)));
        acc[3].add(surface_l2_error(&d.q_ode, &st.gates[0], &d.topo, &|p, _| problem.s(p, t)));
        if formulation == Formulation::Multi {
            if let Some(i_m) = &sol.i_m {
                acc[4].add(surface_l2_error(&d.q_h, i_m, &d.topo, &|p, _| problem.i_m(p, t)));
            }
        }
        history.push((sol.u_i.clone(), sol.u_e.clone()));
        Ok(())
    })?;
    Ok(LevelRun { acc, history, solver })
}

/// `‖a - b‖_{L²(Ω_side)}` of two fields in the same space.
fn l2_difference(space: &FESpace, a: &[f64], b: &[f64], topo: &CutTopology, side: Side) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mut sum = 0.0;
    for &c in space.active().cells() {
        sum += bulk_rule(c, topo, side, ERROR_ORDER).integrate(|p| space.evaluate(&diff, c, p).powi(2));
    }
    sum.sqrt()
}

/// Column label, accumulator index, and whether the time norm is the maximum.
const COLUMNS: [(&str, usize, bool); 10] = [
    ("u_LinfL2", 0, true),
    ("u_L2L2", 0, false),
    ("u_LinfH1", 1, true),
    ("u_L2H1", 1, false),
    ("v_LinfL2", 2, true),
    ("v_L2L2", 2, false),
    ("s_LinfL2", 3, true),
    ("s_L2L2", 3, false),
    ("Im_LinfL2", 4, true),
    ("Im_L2L2", 4, false),
];

fn level_report(name: &str, steps: &[usize], runs: &[&LevelRun], with_im: bool) -> StudyReport {
    let h: Vec<f64> = steps.iter().map(|&m| 2.0 / (4 * m) as f64).collect();
    let mut header = vec!["M".to_string(), "N".into(), "dt".into()];
    let mut cols = Vec::new();
    for (label, k, is_max) in COLUMNS {
        if k == 4 && !with_im {
            continue;
        }
        let e: Vec<f64> = runs.iter().map(|r| if is_max { r.acc[k].max } else { r.acc[k].rms() }).collect();
        header.push(format!("err_{label}"));
        header.push(format!("eoc_{label}"));
        cols.push(eoc_column(&e, &h));
        cols.insert(cols.len() - 1, e);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut report = StudyReport::new(name, &header);
    for (k, &m) in steps.iter().enumerate() {
        let mut row = vec![m as f64, (4 * m) as f64, T_END / m as f64];
        row.extend(cols.iter().map(|c| c[k]));
        report.push_row(row);
    }
    report
}

/// Every EOC of the report beyond the first level.
pub fn all_eocs(report: &StudyReport) -> Vec<(String, f64)> {
    report
        .columns
        .iter()
        .filter(|c| c.starts_with("eoc_"))
        .flat_map(|c| report.column(c).unwrap().into_iter().skip(1).map(move |v| (c.clone(), v)))
        .collect()
}

fn parse_formulations(cfg: &RunConfig) -> Result<Vec<Formulation>> {
    Ok(match cfg.formulation.as_deref() {
        None | Some("both") => vec![Formulation::Single, Formulation::Multi],
        Some(_) => vec![cfg.formulation_or(Formulation::Multi)?],
    })
}

pub fn run(cfg: &RunConfig) -> Result<StudyOutput> {
    let steps = cfg.levels.clone().unwrap_or_else(|| DEFAULT_STEPS.to_vec());
    let base = with_overrides(EmiParams { sigma_i: 1.5, sigma_e: 1.0, c_m: 1.0, ..Default::default() }, cfg);
    let shape = parse_geometry(cfg.geometry.as_deref().unwrap_or("ellipse"), cfg.radius)?;
    let formulations = parse_formulations(cfg)?;
    let problem = CoupledProblem { shape, sigma_i: base.sigma_i, sigma_e: base.sigma_e, c_m: base.c_m, h: 1e-3 };
    let tasks: Vec<(Formulation, usize)> =
        formulations.iter().flat_map(|&f| steps.iter().map(move |&m| (f, m))).collect();
    let runs = ordered_map(&tasks, |&(f, m)| solve_level(&problem, m, base, f))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut out = StudyOutput::default();
    for (fi, &f) in formulations.iter().enumerate() {
        let level_runs: Vec<&LevelRun> = runs[fi * steps.len()..(fi + 1) * steps.len()].iter().collect();
        let name = match f {
            Formulation::Single => "conv_coupled_single",
            Formulation::Multi => "conv_coupled_multi",
        };
        let report = level_report(name, &steps, &level_runs, f == Formulation::Multi);
        if steps.len() >= 2 {
            let eocs = all_eocs(&report);
            let all_in = eocs.iter().all(|(_, v)| (0.8..=1.5).contains(v));
            let lo = eocs.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
            let hi = eocs.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
            out.checks.push(Check::new(
                format!("conv-coupled ({name}): all EOCs in [0.8, 1.5]"),
                all_in,
                format!("range [{lo:.3}, {hi:.3}]"),
            ));
        }
        out.reports.push(report);
    }

    if formulations.len() == 2 {
        let mut cross = StudyReport::new(
            "conv_coupled_cross",
            &["M", "N", "diff_u_LinfL2", "err_u_LinfL2_single", "err_u_LinfL2_multi"],
        );
        let mut ok = true;
        let mut detail = String::new();
        for (k, &m) in steps.iter().enumerate() {
            let (s, mu) = (&runs[k], &runs[steps.len() + k]);
            let d = &s.solver.disc;
            let diff = s
                .history
                .iter()
                .zip(&mu.history)
                .map(|((ai, ae), (bi, be))| {
                    l2_difference(&d.v_i, ai, bi, &d.topo, Side::Intra)
                        .hypot(l2_difference(&d.v_e, ae, be, &d.topo, Side::Extra))
                })
                .fold(0.0, f64::max);
            let (es, em) = (s.acc[0].max, mu.acc[0].max);
            ok &= diff < es.min(em);
            detail = format!("finest: {diff:.3e} vs {:.3e}", es.min(em));
            cross.push_row(vec![m as f64, (4 * m) as f64, diff, es, em]);
        }
        out.checks.push(Check::new("conv-coupled: single/multi u difference below discretization error", ok, detail));
        out.reports.push(cross);
    }
    Ok(out)
}
