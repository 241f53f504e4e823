//! The numerical studies. Each returns its tables plus the outcome of its
//! built-in threshold checks; nothing is written to disk here except the
//! VTK snapshots of the HH demo.

use emi_cutfem::EmiParams;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::report::StudyReport;

pub mod conv_coupled;
pub mod conv_multi;
pub mod conv_ode;
pub mod hh_demo;
pub mod sens_ode;
pub mod sens_pde;

/// Outcome of one threshold check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct StudyOutput {
    pub reports: Vec<StudyReport>,
    pub checks: Vec<Check>,
}

impl StudyOutput {
    pub fn report(&self, name: &str) -> Option<&StudyReport> {
        self.reports.iter().find(|r| r.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Maps `f` over `items` on the current rayon pool, keeping input order.
pub(crate) fn ordered_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.par_iter().map(f).collect()
}

/// Applies the stabilization overrides of `cfg` to `base`.
pub(crate) fn with_overrides(base: EmiParams, cfg: &RunConfig) -> EmiParams {
    EmiParams {
        dt: cfg.dt.unwrap_or(base.dt),
        gamma: cfg.gamma.unwrap_or(base.gamma),
        gamma_b: cfg.gamma_b.unwrap_or(base.gamma_b),
        ..base
    }
}

pub(crate) fn within_factor(value: f64, reference: f64, factor: f64) -> bool {
    value <= reference * factor && value >= reference / factor
}
