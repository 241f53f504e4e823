//! Convergence of the unfitted ODE scheme alone on the linear system
//! `v_t = -s`, `s_t = v` with `v = (x² + y³) cos t`, `s = (x² + y³) sin t`.

use anyhow::Result;
use emi_cutfem::membrane::{initialize_state, ode_step, LinearOscillator, MembraneState, RhsEvaluation, SurfaceProjector};
use emi_cutfem::norms::surface_l2_error;
use emi_cutfem::{build_cartesian_mesh, Bounds, CutDiscretization, EmiParams, Point, Shape, SurfaceStab};

use super::{ordered_map, with_overrides, Check, StudyOutput};
use crate::config::{parse_geometry, RunConfig};
use crate::report::{eoc_column, StudyReport};

pub const T_END: f64 = 2.0;
/// Time steps per level, `M = 2^{n+1}`; the mesh has `N = 4M` cells per axis.
pub const DEFAULT_STEPS: [usize; 5] = [2, 4, 8, 16, 32];

fn base(p: Point) -> f64 {
    p.x * p.x + p.y * p.y * p.y
}

pub fn exact_v(p: Point, t: f64) -> f64 {
    base(p) * t.cos()
}

pub fn exact_s(p: Point, t: f64) -> f64 {
    base(p) * t.sin()
}

/// Errors of one level: `(L∞L²(v), L²L²(v), L∞L²(s), L²L²(s))`.
pub fn solve_level(shape: &Shape, m_steps: usize, n: usize, params: &EmiParams, stab: SurfaceStab) -> Result<[f64; 4]> {
    let mesh = build_cartesian_mesh(n, n, Bounds::square(-1.0, 1.0))?;
    let disc = CutDiscretization::new(shape, &mesh, None)?;
    let dt = T_END / m_steps as f64;
    let params = EmiParams { dt, ..*params };
    let proj = SurfaceProjector::new(&disc.q_ode, &disc.topo, &params, stab, shape)?;
    let mut state = initialize_state(&disc.q_ode, &|p| exact_v(p, 0.0), &[&|p| exact_s(p, 0.0)]);
    let (mut v_inf, mut v_sq, mut s_inf, mut s_sq) = (0.0f64, 0.0, 0.0f64, 0.0);
    for m in 1..=m_steps {
        let step = ode_step(&state, dt, &LinearOscillator, &disc.q_ode, &disc.topo, &proj, RhsEvaluation::Quadrature)?;
        let t = m as f64 * dt;
        state = MembraneState { v: step.v_star, gates: step.gates, t };
        let ev = surface_l2_error(&disc.q_ode, &state.v, &disc.topo, &|p, _| exact_v(p, t));
        let es = surface_l2_error(&disc.q_ode, &state.gates[0], &disc.topo, &|p, _| exact_s(p, t));
        v_inf = v_inf.max(ev);
        s_inf = s_inf.max(es);
        v_sq += ev * ev;
        s_sq += es * es;
    }
    let mf = m_steps as f64;
    Ok([v_inf, (v_sq / mf).sqrt(), s_inf, (s_sq / mf).sqrt()])
}

pub fn run(cfg: &RunConfig) -> Result<StudyOutput> {
    let shape = parse_geometry(cfg.geometry.as_deref().unwrap_or("ellipse"), cfg.radius)?;
    let params = with_overrides(EmiParams::default(), cfg);
    let stab = cfg.stab_or(SurfaceStab::S1)?;
    let steps = cfg.levels.clone().unwrap_or_else(|| DEFAULT_STEPS.to_vec());
    let errs = ordered_map(&steps, |&m| solve_level(&shape, m, 4 * m, &params, stab))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let h: Vec<f64> = steps.iter().map(|&m| 2.0 / (4 * m) as f64).collect();
    let names = ["v_LinfL2", "v_L2L2", "s_LinfL2", "s_L2L2"];
    let cols: Vec<Vec<f64>> = (0..4).map(|k| errs.iter().map(|e| e[k]).collect()).collect();
    let eocs: Vec<Vec<f64>> = cols.iter().map(|c| eoc_column(c, &h)).collect();
    let mut header = vec!["M".to_string(), "N".into(), "dt".into()];
    for n in names {
        header.push(format!("err_{n}"));
        header.push(format!("eoc_{n}"));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut report = StudyReport::new("conv_ode", &header);
    for (k, &m) in steps.iter().enumerate() {
        let mut row = vec![m as f64, (4 * m) as f64, T_END / m as f64];
        for j in 0..4 {
            row.push(cols[j][k]);
            row.push(eocs[j][k]);
        }
        report.push_row(row);
    }

    let mut checks = Vec::new();
    if steps.len() >= 2 {
        for (name, e) in names.iter().zip(&eocs) {
            let v = *e.last().unwrap();
            checks.push(Check::new(format!("conv-ode: final EOC {name} >= 0.85"), v >= 0.85, format!("{v:.3}")));
        }
    }
    Ok(StudyOutput { reports: vec![report], checks })
}
