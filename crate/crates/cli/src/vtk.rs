//! Legacy ASCII VTK output of cell-sampled fields on the background mesh.
//!
//! Every file carries a `subdomain` mask (0 extracellular, 1 intracellular,
//! 2 cut). Fields are sampled at the centroid of the cell's part on the given
//! side, so cut cells appear in both the intracellular and extracellular file.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use emi_cutfem::levelset::polygon_area;
use emi_cutfem::{BackgroundMesh, CellLocation, CutTopology, FESpace, Point, Side};

/// Centroid of the part of `cell` on `side`, if that part has positive area.
pub fn side_centroid(topo: &CutTopology, cell: usize, side: Side) -> Option<Point> {
    let mesh = topo.mesh();
    match (topo.location(cell), side) {
        (CellLocation::Inside, Side::Intra) | (CellLocation::Outside, Side::Extra) => Some(mesh.cell_center(cell)),
        (CellLocation::Cut, _) => {
            let cc = topo.cut_cell(cell)?;
            let polys = if side == Side::Intra { &cc.inside } else { &cc.outside };
            let (mut area, mut c) = (0.0, Point::default());
            for poly in polys {
                let n = poly.len();
                for k in 0..n {
                    let (a, b) = (poly[k], poly[(k + 1) % n]);
                    let cr = a.cross(b);
                    c = c + (a + b) * cr;
                    area += cr;
                }
            }
            let total: f64 = polys.iter().map(|p| polygon_area(p)).sum();
            (total > 0.0).then(|| c * (1.0 / (3.0 * area)))
        }
        _ => None,
    }
}

/// A named cell field; cells without a sample are written as 0.
pub struct CellField<'a> {
    pub name: &'a str,
    pub values: Vec<Option<f64>>,
}

/// Samples a discrete field at the side centroids of its active cells.
pub fn sample_side(space: &FESpace, coeffs: &[f64], topo: &CutTopology, side: Side) -> Vec<Option<f64>> {
    let mesh = topo.mesh();
    (0..mesh.n_cells())
        .map(|c| {
            space.cell_dofs(c)?;
            side_centroid(topo, c, side).map(|p| space.evaluate(coeffs, c, p))
        })
        .collect()
}

/// Samples a surface field at the midpoint of the first interface segment of every cut cell.
pub fn sample_interface(space: &FESpace, coeffs: &[f64], topo: &CutTopology) -> Vec<Option<f64>> {
    let mesh = topo.mesh();
    (0..mesh.n_cells())
        .map(|c| {
            let seg = topo.cut_cell(c)?.segments.first()?;
            Some(space.evaluate(coeffs, c, seg.midpoint()))
        })
        .collect()
}

pub fn write_vtk(path: &Path, mesh: &BackgroundMesh, topo: &CutTopology, title: &str, fields: &[CellField<'_>]) -> Result<()> {
    let b = mesh.bounds();
    let (hx, hy) = mesh.spacing();
    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0")?;
    writeln!(s, "{title}")?;
    writeln!(s, "ASCII")?;
    writeln!(s, "DATASET STRUCTURED_POINTS")?;
    writeln!(s, "DIMENSIONS {} {} 1", mesh.nx() + 1, mesh.ny() + 1)?;
    writeln!(s, "ORIGIN {} {} 0", b.x0, b.y0)?;
    writeln!(s, "SPACING {hx} {hy} 1")?;
    writeln!(s, "CELL_DATA {}", mesh.n_cells())?;
    writeln!(s, "SCALARS subdomain int 1")?;
    writeln!(s, "LOOKUP_TABLE default")?;
    for c in 0..mesh.n_cells() {
        let tag = match topo.location(c) {
            CellLocation::Outside => 0,
            CellLocation::Inside => 1,
            CellLocation::Cut => 2,
        };
        writeln!(s, "{tag}")?;
    }
    for f in fields {
        writeln!(s, "SCALARS {} double 1", f.name)?;
        writeln!(s, "LOOKUP_TABLE default")?;
        for v in &f.values {
            writeln!(s, "{:.9e}", v.unwrap_or(0.0))?;
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}
