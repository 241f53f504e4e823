//! Condition numbers of the multi-dimensional system matrix as a circle is
//! translated diagonally across one cell.

use anyhow::Result;
use emi_cutfem::assembly::ReducedSystem;
use emi_cutfem::levelset::translated_circle;
use emi_cutfem::{build_cartesian_mesh, condition_number_2, Bounds, CutDiscretization, EmiParams, Point};

use super::{ordered_map, with_overrides, Check, StudyOutput};
use crate::config::RunConfig;
use crate::report::StudyReport;

pub const DEFAULT_N: usize = 32;
pub const DEFAULT_MDELTA: usize = 100;
pub const RADIUS: f64 = 0.5;

pub fn default_params() -> EmiParams {
    EmiParams { sigma_i: 1.0, sigma_e: 2.0, c_m: 1.0, dt: 0.5, ..Default::default() }
}

/// `κ₂` of the multi-dimensional matrix after eliminating the boundary
/// unknowns; singular matrices give infinity.
pub fn multi_condition(n: usize, m_delta: usize, m: usize, params: &EmiParams) -> Result<f64> {
    let mesh = build_cartesian_mesh(n, n, Bounds::square(-1.0, 1.0))?;
    let shape = translated_circle(RADIUS, n, m_delta, m)?;
    let zero = |_: Point| 0.0;
    let disc = CutDiscretization::new(&shape, &mesh, Some(&zero))?;
    let fixed = disc.constrained().iter().map(|c| c.0).collect();
    let reduced = ReducedSystem::new(&disc.multi_matrix(params), fixed);
    Ok(condition_number_2(&reduced.matrix)?)
}

pub fn run(cfg: &RunConfig) -> Result<StudyOutput> {
    let n = cfg.n.unwrap_or(DEFAULT_N);
    let m_delta = cfg.mdelta.unwrap_or(DEFAULT_MDELTA);
    let stab = with_overrides(default_params(), cfg);
    let unstab = EmiParams { stabilized: false, ..stab };
    let steps: Vec<usize> = (0..=m_delta).collect();
    let rows = ordered_map(&steps, |&m| -> Result<[f64; 2]> {
        Ok([multi_condition(n, m_delta, m, &stab)?, multi_condition(n, m_delta, m, &unstab)?])
    });

    let mut report = StudyReport::new("sens_pde", &["m", "delta", "kappa_stab", "kappa_unstab"]);
    for (m, row) in steps.iter().zip(rows) {
        let [ks, ku] = row?;
        report.push_row(vec![*m as f64, *m as f64 / m_delta as f64, ks, ku]);
    }

    let ks = report.column("kappa_stab").unwrap();
    let ku = report.column("kappa_unstab").unwrap();
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = max(&ks) / min(&ks);
    let checks = vec![
        Check::new("sens-pde: stabilized max/min kappa < 10", ratio < 10.0, format!("{ratio:.3}")),
        Check::new(
            "sens-pde: unstabilized max kappa >= 100x stabilized max",
            max(&ku) >= 100.0 * max(&ks),
            format!("{:.3e} vs {:.3e}", max(&ku), max(&ks)),
        ),
    ];
    Ok(StudyOutput { reports: vec![report], checks })
}
