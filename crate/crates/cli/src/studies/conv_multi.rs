//! Spatial convergence of one PDE step against a manufactured solution on
//! the wavy geometry in `[-1.8, 1.8] x [-2.05, 1.55]`.

use std::f64::consts::PI;

use anyhow::Result;
use emi_cutfem::assembly::SurfaceField;
use emi_cutfem::driver::{Formulation, Sources};
use emi_cutfem::norms::{bulk_h1_semi_error, bulk_l2_error, surface_l2_error};
use emi_cutfem::{build_cartesian_mesh, Bounds, EmiParams, EmiSolver, Point, Shape, Side, SurfaceStab};

use super::{ordered_map, with_overrides, within_factor, Check, StudyOutput};
use crate::config::RunConfig;
use crate::report::{eoc_column, StudyReport};

pub const DEFAULT_LEVELS: [usize; 5] = [16, 32, 64, 128, 256];
pub const BOUNDS: Bounds = Bounds::new(-1.8, -2.05, 1.8, 1.55);

/// `u_i = w/σ_i`, `u_e = w/σ_e` with `w = sin(πx/2) cos(πy/2)`.
#[derive(Debug, Clone, Copy)]
pub struct Manufactured {
    pub sigma_i: f64,
    pub sigma_e: f64,
    pub c_m: f64,
    pub dt: f64,
}

impl Manufactured {
    pub fn w(p: Point) -> f64 {
        (0.5 * PI * p.x).sin() * (0.5 * PI * p.y).cos()
    }

    pub fn grad_w(p: Point) -> Point {
        let k = 0.5 * PI;
        Point::new(k * (k * p.x).cos() * (k * p.y).cos(), -k * (k * p.x).sin() * (k * p.y).sin())
    }

    /// `I_m = -σ_i ∇u_i · n_i`.
    pub fn i_m(p: Point, n: Point) -> f64 {
        -Self::grad_w(p).dot(n)
    }

    /// Membrane datum making the manufactured fields an exact solution.
    pub fn g(&self, p: Point, n: Point) -> f64 {
        Self::w(p) * (1.0 / self.sigma_i - 1.0 / self.sigma_e) - self.dt / self.c_m * Self::i_m(p, n)
    }
}

impl Sources for Manufactured {
    fn has_bulk_sources(&self) -> bool {
        true
    }

    fn f_i(&self, p: Point, _t: f64) -> f64 {
        0.5 * PI * PI * Self::w(p)
    }

    fn f_e(&self, p: Point, _t: f64) -> f64 {
        0.5 * PI * PI * Self::w(p)
    }

    fn u_bc(&self, p: Point, _t: f64) -> f64 {
        Self::w(p) / self.sigma_e
    }
}

struct Level {
    n: usize,
    h: f64,
    l2: f64,
    h1: f64,
    im: f64,
}

fn solve_level(n: usize, params: EmiParams, formulation: Formulation) -> Result<Level> {
    let mesh = build_cartesian_mesh(n, n, BOUNDS)?;
    let solver = EmiSolver::new(&Shape::Wavy, &mesh, params, formulation, SurfaceStab::S1)?;
    let ms = Manufactured { sigma_i: params.sigma_i, sigma_e: params.sigma_e, c_m: params.c_m, dt: params.dt };
    let g = |p: Point, nrm: Point| ms.g(p, nrm);
    let sol = solver.pde_step(SurfaceField::Function(&g), &ms, params.dt)?;
    let d = &solver.disc;
    let (si, se) = (params.sigma_i, params.sigma_e);
    let l2 = bulk_l2_error(&d.v_i, &sol.u_i, &d.topo, Side::Intra, &|p| Manufactured::w(p) / si)
        .hypot(bulk_l2_error(&d.v_e, &sol.u_e, &d.topo, Side::Extra, &|p| Manufactured::w(p) / se));
    let h1 = bulk_h1_semi_error(&d.v_i, &sol.u_i, &d.topo, Side::Intra, &|p| Manufactured::grad_w(p) * (1.0 / si))
        .hypot(bulk_h1_semi_error(&d.v_e, &sol.u_e, &d.topo, Side::Extra, &|p| Manufactured::grad_w(p) * (1.0 / se)));
    let im = match &sol.i_m {
        Some(i_m) => surface_l2_error(&d.q_h, i_m, &d.topo, &Manufactured::i_m),
        None => f64::NAN,
    };
    Ok(Level { n, h: mesh.h(), l2, h1, im })
}

pub fn run(cfg: &RunConfig) -> Result<StudyOutput> {
    let base = EmiParams { sigma_i: 1.5, sigma_e: 1.0, c_m: 1.0, dt: 0.2, ..Default::default() };
    let params = with_overrides(base, cfg);
    let formulation = cfg.formulation_or(Formulation::Multi)?;
    let levels = cfg.levels.clone().unwrap_or_else(|| DEFAULT_LEVELS.to_vec());
    let results: Vec<Level> = ordered_map(&levels, |&n| solve_level(n, params, formulation))
        .into_iter()
        .collect::<Result<_>>()?;

    let h: Vec<f64> = results.iter().map(|l| l.h).collect();
    let cols = [
        results.iter().map(|l| l.l2).collect::<Vec<_>>(),
        results.iter().map(|l| l.h1).collect(),
        results.iter().map(|l| l.im).collect(),
    ];
    let eocs: Vec<Vec<f64>> = cols.iter().map(|c| eoc_column(c, &h)).collect();
    let mut report = StudyReport::new(
        "conv_multi",
        &["N", "h", "err_u_L2", "eoc_u_L2", "err_u_H1", "eoc_u_H1", "err_Im_L2G", "eoc_Im_L2G"],
    );
    for (k, l) in results.iter().enumerate() {
        report.push_row(vec![
            l.n as f64, l.h, cols[0][k], eocs[0][k], cols[1][k], eocs[1][k], cols[2][k], eocs[2][k],
        ]);
    }
    report.metadata.insert("formulation".into(), format!("{formulation:?}").to_lowercase());

    let mut checks = Vec::new();
    let find = |n: usize| results.iter().position(|l| l.n == n);
    if let Some(k) = find(16) {
        checks.push(Check::new(
            "conv-multi: L2 error at N=16 within 2x of 3.42e-2",
            within_factor(cols[0][k], 3.42e-2, 2.0),
            format!("{:.3e}", cols[0][k]),
        ));
    }
    if let Some(k) = find(256) {
        checks.push(Check::new(
            "conv-multi: L2 error at N=256 within 2x of 1.36e-4",
            within_factor(cols[0][k], 1.36e-4, 2.0),
            format!("{:.3e}", cols[0][k]),
        ));
    }
    if results.len() >= 2 {
        let last = |c: &Vec<f64>| *c.last().unwrap();
        let windows = [("L2", 1.9, 2.1), ("H1 semi", 0.95, 1.1), ("I_m", 0.9, 1.3)];
        for ((name, lo, hi), e) in windows.iter().zip(&eocs) {
            let v = last(e);
            checks.push(Check::new(
                format!("conv-multi: final EOC {name} in [{lo}, {hi}]"),
                (*lo..=*hi).contains(&v),
                format!("{v:.3}"),
            ));
        }
    }
    Ok(StudyOutput { reports: vec![report], checks })
}
