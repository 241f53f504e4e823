//! Condition numbers of the surface mass matrix, plain and with either
//! stabilization, under the translation sweep of the circle.

use anyhow::Result;
use emi_cutfem::assembly::assemble_surface_mass;
use emi_cutfem::levelset::translated_circle;
use emi_cutfem::{build_cartesian_mesh, condition_number_2, Bounds, CutDiscretization, EmiParams, SurfaceStab};

use super::{ordered_map, with_overrides, Check, StudyOutput};
use crate::config::RunConfig;
use crate::report::StudyReport;

pub const DEFAULT_N: usize = 32;
pub const DEFAULT_MDELTA: usize = 100;
pub const RADIUS: f64 = 0.5;
pub const VARIANTS: [SurfaceStab; 3] = [SurfaceStab::None, SurfaceStab::S1, SurfaceStab::S2];

pub fn mass_condition(n: usize, m_delta: usize, m: usize, params: &EmiParams, stab: SurfaceStab) -> Result<f64> {
    let mesh = build_cartesian_mesh(n, n, Bounds::square(-1.0, 1.0))?;
    let shape = translated_circle(RADIUS, n, m_delta, m)?;
    let disc = CutDiscretization::new(&shape, &mesh, None)?;
    let mass = assemble_surface_mass(&disc.q_ode, &disc.topo, params, stab, &shape);
    Ok(condition_number_2(&mass)?)
}

pub fn run(cfg: &RunConfig) -> Result<StudyOutput> {
    let n = cfg.n.unwrap_or(DEFAULT_N);
    let m_delta = cfg.mdelta.unwrap_or(DEFAULT_MDELTA);
    let params = with_overrides(EmiParams::default(), cfg);
    let steps: Vec<usize> = (0..=m_delta).collect();
    let rows = ordered_map(&steps, |&m| -> Result<Vec<f64>> {
        VARIANTS.iter().map(|&s| mass_condition(n, m_delta, m, &params, s)).collect()
    });
    let mut report = StudyReport::new("sens_ode", &["m", "delta", "kappa_none", "kappa_s1", "kappa_s2"]);
    for (m, row) in steps.iter().zip(rows) {
        let mut r = vec![*m as f64, *m as f64 / m_delta as f64];
        r.extend(row?);
        report.push_row(r);
    }

    let max = |name: &str| report.column(name).unwrap().into_iter().fold(f64::NEG_INFINITY, f64::max);
    let (none, s1, s2) = (max("kappa_none"), max("kappa_s1"), max("kappa_s2"));
    let order_of = |v: f64, e: f64| (v.log10() - e).abs() <= 1.0;
    let checks = vec![
        Check::new("sens-ode: s1 max kappa within one decade of 1e4", order_of(s1, 4.0), format!("{s1:.3e}")),
        Check::new("sens-ode: s2 max kappa within one decade of 1e2", order_of(s2, 2.0), format!("{s2:.3e}")),
        Check::new("sens-ode: unstabilized sweep reaches 1e6 or singular", none >= 1e6, format!("{none:.3e}")),
    ];
    Ok(StudyOutput { reports: vec![report], checks })
}
