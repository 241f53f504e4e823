//! Hodgkin-Huxley action potential in an idealized two-lobe cell, stimulated
//! in the right lobe and probed at the tip of the left lobe, on a ladder of
//! mesh sizes.

use std::path::Path;

use anyhow::Result;
use emi_cutfem::driver::{Formulation, NoSources, Probe, ProbeKind};
use emi_cutfem::membrane::{initialize_state, HHParams, HodgkinHuxley, StimRegion};
use emi_cutfem::{build_cartesian_mesh, Bounds, EmiParams, EmiSolver, LevelSet, Point, Shape, Side, SurfaceStab};

use super::{ordered_map, Check, StudyOutput};
use crate::config::RunConfig;
use crate::report::StudyReport;
use crate::vtk::{sample_interface, sample_side, write_vtk, CellField};

pub const BOUNDS: Bounds = Bounds::new(-32.0, -24.0, 32.0, 24.0);
pub const DEFAULT_MESH_SIZES: [f64; 3] = [1.0, 0.5, 0.25];
pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_T_END: f64 = 15.0;
pub const DEFAULT_STIM_WINDOW: [f64; 2] = [0.5, 1.0];
pub const DEFAULT_SNAPSHOTS: [f64; 4] = [0.5, 1.0, 2.0, 5.0];
/// Stimulated part of the membrane: the right lobe beyond this abscissa.
pub const STIM_X: f64 = 12.0;

pub const PROBES: [Probe; 3] = [
    Probe { point: Point::new(-20.0, 0.0), kind: ProbeKind::Membrane },
    Probe { point: Point::new(-19.0, 0.0), kind: ProbeKind::Intracellular },
    Probe { point: Point::new(-21.0, 0.0), kind: ProbeKind::Extracellular },
];

/// Probe traces of one level: time and one column per probe.
#[derive(Debug, Clone)]
pub struct Traces {
    pub h: f64,
    pub n_unknowns: usize,
    pub t: Vec<f64>,
    pub values: [Vec<f64>; 3],
}

pub struct DemoSetup {
    pub hh: HHParams,
    pub dt: f64,
    pub t_end: f64,
    pub formulation: Formulation,
    pub stab: SurfaceStab,
}

impl DemoSetup {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let [t1, t2] = cfg.stim_window.unwrap_or(DEFAULT_STIM_WINDOW);
        let hh = HHParams { stim_region: StimRegion::XAbove(STIM_X), stim_window: (t1, t2), ..Default::default() };
        hh.validate()?;
        Ok(Self {
            hh,
            dt: cfg.dt.unwrap_or(DEFAULT_DT),
            t_end: cfg.t_end.unwrap_or(DEFAULT_T_END),
            formulation: cfg.formulation_or(Formulation::Multi)?,
            stab: cfg.stab_or(SurfaceStab::S1)?,
        })
    }

    fn params(&self, cfg: &RunConfig) -> EmiParams {
        let d = EmiParams::default();
        EmiParams {
            c_m: self.hh.c_m,
            dt: self.dt,
            gamma: cfg.gamma.unwrap_or(d.gamma),
            gamma_b: cfg.gamma_b.unwrap_or(d.gamma_b),
            ..d
        }
    }
}

/// Runs one level, writing VTK snapshots into `snapshots` when given.
pub fn run_level(setup: &DemoSetup, params: EmiParams, h: f64, snapshots: Option<(&Path, &[f64])>) -> Result<Traces> {
    let shape = Shape::two_lobes();
    let nx = (BOUNDS.width() / h).round() as usize;
    let ny = (BOUNDS.height() / h).round() as usize;
    let mesh = build_cartesian_mesh(nx, ny, BOUNDS)?;
    let solver = EmiSolver::new(&shape, &mesh, params, setup.formulation, setup.stab)?;
    let hh = setup.hh;
    let d = &solver.disc;
    let state = initialize_state(&d.q_ode, &|_| hh.v0, &[&|_| hh.m0, &|_| hh.h0, &|_| hh.n0]);
    let n_steps = (setup.t_end / setup.dt).round() as usize;
    let mut tr = Traces { h, n_unknowns: solver.n_unknowns(), t: vec![0.0], values: Default::default() };
    let v0_probe = solver.disc.q_ode.evaluate(&state.v, mesh.locate(PROBES[0].point).unwrap(), PROBES[0].point);
    tr.values[0].push(v0_probe);
    tr.values[1].push(f64::NAN);
    tr.values[2].push(f64::NAN);
    let snap_steps: Vec<(usize, f64)> = snapshots
        .map(|(_, ts)| ts.iter().map(|&t| ((t / setup.dt).round() as usize, t)).collect())
        .unwrap_or_default();
    solver.run(state, &HodgkinHuxley(hh), &NoSources, n_steps, &mut |m, st, sol| {
        tr.t.push(st.t);
        for (k, p) in PROBES.iter().enumerate() {
            tr.values[k].push(solver.probe(&shape, p, st, sol)?);
        }
        if let Some((dir, _)) = snapshots {
            for &(_, t) in snap_steps.iter().filter(|s| s.0 == m) {
                let v = CellField { name: "v", values: sample_interface(&d.q_ode, &st.v, &d.topo) };
                let ui = CellField { name: "u_i", values: sample_side(&d.v_i, &sol.u_i, &d.topo, Side::Intra) };
                let ue = CellField { name: "u_e", values: sample_side(&d.v_e, &sol.u_e, &d.topo, Side::Extra) };
                let stem = format!("hh_t{t:.3}");
                let io = |e: anyhow::Error| emi_cutfem::Error::Backend(e.to_string());
                write_vtk(&dir.join(format!("{stem}_i.vtk")), &mesh, &d.topo, &stem, &[ui, v]).map_err(io)?;
                write_vtk(&dir.join(format!("{stem}_e.vtk")), &mesh, &d.topo, &stem, &[ue]).map_err(io)?;
            }
        }
        Ok(())
    })?;
    debug_assert!(shape.value(PROBES[1].point) < 0.0);
    Ok(tr)
}

fn trace_report(name: &str, tr: &Traces) -> StudyReport {
    let mut r = StudyReport::new(name, &["t", "v_membrane", "u_intra", "u_extra"]);
    for k in 0..tr.t.len() {
        r.push_row(vec![tr.t[k], tr.values[0][k], tr.values[1][k], tr.values[2][k]]);
    }
    r.metadata.insert("h".into(), tr.h.to_string());
    r.metadata.insert("unknowns".into(), tr.n_unknowns.to_string());
    r
}

/// Spike landmarks of a membrane trace relative to stimulus onset `t1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeSummary {
    /// `max |v - v(0)|` before the stimulus.
    pub pre_drift: f64,
    /// First time `v > 0`.
    pub t_up: Option<f64>,
    pub v_peak: f64,
    pub t_peak: f64,
    /// First time after the peak with `v < -60`.
    pub t_down: Option<f64>,
}

pub fn summarize(t: &[f64], v: &[f64], t1: f64) -> SpikeSummary {
    let v0 = v[0];
    let pre_drift = t.iter().zip(v).filter(|(&s, _)| s < t1).map(|(_, &x)| (x - v0).abs()).fold(0.0, f64::max);
    let t_up = t.iter().zip(v).find(|(_, &x)| x > 0.0).map(|(&s, _)| s);
    let (k_peak, &v_peak) = v.iter().enumerate().fold((0, &f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let t_down = t[k_peak..].iter().zip(&v[k_peak..]).find(|(_, &x)| x < -60.0).map(|(&s, _)| s);
    SpikeSummary { pre_drift, t_up, v_peak, t_peak: t[k_peak], t_down }
}

/// `max_t |a(t) - b(t)|` over common time levels.
pub fn linf_difference(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn run(cfg: &RunConfig, out: Option<&Path>) -> Result<StudyOutput> {
    let setup = DemoSetup::from_config(cfg)?;
    let params = setup.params(cfg);
    let sizes = cfg.mesh_sizes.clone().unwrap_or_else(|| DEFAULT_MESH_SIZES.to_vec());
    let snap_times = cfg.snapshot_times.clone().unwrap_or_else(|| DEFAULT_SNAPSHOTS.to_vec());
    let idx: Vec<usize> = (0..sizes.len()).collect();
    let traces = ordered_map(&idx, |&k| {
        let snaps = if k == 0 { out.map(|dir| (dir, snap_times.as_slice())) } else { None };
        run_level(&setup, params, sizes[k], snaps)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let t1 = setup.hh.stim_window.0;
    let mut result = StudyOutput::default();
    let mut refinement = StudyReport::new(
        "hh_refinement",
        &["level", "h", "unknowns", "v_peak", "t_peak", "t_up", "t_down", "pre_drift", "linf_diff_next"],
    );
    let diffs: Vec<f64> = traces.windows(2).map(|w| linf_difference(&w[0].values[0], &w[1].values[0])).collect();
    for (k, tr) in traces.iter().enumerate() {
        let s = summarize(&tr.t, &tr.values[0], t1);
        refinement.push_row(vec![
            k as f64,
            tr.h,
            tr.n_unknowns as f64,
            s.v_peak,
            s.t_peak,
            s.t_up.unwrap_or(f64::NAN),
            s.t_down.unwrap_or(f64::NAN),
            s.pre_drift,
            diffs.get(k).copied().unwrap_or(f64::NAN),
        ]);
        result.reports.push(trace_report(&format!("hh_trace_level{k}"), tr));
    }

    let sums: Vec<SpikeSummary> = traces.iter().map(|tr| summarize(&tr.t, &tr.values[0], t1)).collect();
    let drift = sums.iter().map(|s| s.pre_drift).fold(0.0, f64::max);
    result.checks.push(Check::new("hh-demo: pre-stimulus drift < 1 mV", drift < 1.0, format!("{drift:.3} mV")));
    let up_ok = sums.iter().all(|s| s.t_up.is_some_and(|t| t <= t1 + 2.0));
    result.checks.push(Check::new(
        "hh-demo: v > 0 mV within 2 ms of onset",
        up_ok,
        format!("{:?}", sums.iter().map(|s| s.t_up).collect::<Vec<_>>()),
    ));
    let down_ok = sums.iter().all(|s| s.t_down.is_some_and(|t| t <= 15.0));
    result.checks.push(Check::new(
        "hh-demo: v < -60 mV after the peak by 15 ms",
        down_ok,
        format!("{:?}", sums.iter().map(|s| s.t_down).collect::<Vec<_>>()),
    ));
    if diffs.len() >= 2 {
        let mono = diffs.windows(2).all(|w| w[1] < w[0]);
        result.checks.push(Check::new("hh-demo: refinement differences decrease", mono, format!("{diffs:.3?}")));
    }
    result.reports.push(refinement);
    Ok(result)
}
