//! Key-value run configuration: a TOML file merged with command-line overrides.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::Path;

use anyhow::{bail, Context, Result};
use emi_cutfem::driver::Formulation;
use emi_cutfem::{Shape, SurfaceStab};
use serde::{Deserialize, Serialize};

/// Every knob a study reads; unset entries fall back to the study's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Cells per axis (single-mesh studies).
    pub n: Option<usize>,
    /// Cells per axis of every refinement level.
    pub levels: Option<Vec<usize>>,
    /// Number of translation steps of the sensitivity sweeps.
    pub mdelta: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub formulation: Option<String>,
    pub stab: Option<String>,
    pub gamma: Option<f64>,
    pub gamma_b: Option<f64>,
    pub threads: Option<usize>,
    pub geometry: Option<String>,
    pub radius: Option<f64>,
    /// Mesh sizes of the HH demo refinement levels (μm).
    pub mesh_sizes: Option<Vec<f64>>,
    /// Times of the VTK snapshots (ms).
    pub snapshot_times: Option<Vec<f64>>,
    /// Stimulus window `[t1, t2]` (ms).
    pub stim_window: Option<[f64; 2]>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Entries set in `other` replace those of `self`.
    pub fn merged(mut self, other: &RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f.clone(); } )* };
        }
        take!(n, levels, mdelta, dt, t_end, formulation, stab, gamma, gamma_b, threads, geometry, radius,
              mesh_sizes, snapshot_times, stim_window);
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Stable hash of the serialized configuration.
    pub fn hash_hex(&self) -> String {
        let mut h = DefaultHasher::new();
        self.to_toml().hash(&mut h);
        format!("{:016x}", h.finish())
    }

    pub fn formulation_or(&self, default: Formulation) -> Result<Formulation> {
        self.formulation.as_deref().map_or(Ok(default), parse_formulation)
    }

    pub fn stab_or(&self, default: SurfaceStab) -> Result<SurfaceStab> {
        self.stab.as_deref().map_or(Ok(default), parse_stab)
    }
}

pub fn parse_formulation(s: &str) -> Result<Formulation> {
    match s {
        "single" => Ok(Formulation::Single),
        "multi" => Ok(Formulation::Multi),
        _ => bail!("unknown formulation `{s}` (expected single or multi)"),
    }
}

pub fn parse_stab(s: &str) -> Result<SurfaceStab> {
    match s {
        "none" => Ok(SurfaceStab::None),
        "s1" => Ok(SurfaceStab::S1),
        "s2" => Ok(SurfaceStab::S2),
        _ => bail!("unknown stabilization `{s}` (expected none, s1 or s2)"),
    }
}

/// Built-in geometries by name.
pub fn parse_geometry(name: &str, radius: Option<f64>) -> Result<Shape> {
    Ok(match name {
        "levelset1" | "wavy" => Shape::Wavy,
        "circle" => Shape::circle(0.0, 0.0, radius.unwrap_or(0.5)),
        "ellipse" => Shape::ellipse(0.0, 0.0, 0.64, 0.8),
        "two_lobes" => Shape::two_lobes(),
        _ => bail!("unknown geometry `{name}` (expected levelset1, circle, ellipse or two_lobes)"),
    })
}
