//! Error norms of discrete fields against closed-form references, integrated
//! with cut quadrature on the physical subdomains and on the interface.

use crate::levelset::CutTopology;
use crate::point::Point;
use crate::quadrature::{bulk_rule, surface_rule, Side};
use crate::space::FESpace;

/// Quadrature order used for error integrals.
pub const ERROR_ORDER: usize = 4;

/// `‖u_h − u‖_{L²(Ω_side)}`.
pub fn bulk_l2_error(
    space: &FESpace,
    coeffs: &[f64],
    topo: &CutTopology,
    side: Side,
    exact: &dyn Fn(Point) -> f64,
) -> f64 {
    let mut sum = 0.0;
    for &c in space.active().cells() {
        let rule = bulk_rule(c, topo, side, ERROR_ORDER);
        sum += rule.integrate(|p| (space.evaluate(coeffs, c, p) - exact(p)).powi(2));
    }
    sum.sqrt()
}

/// `|u_h − u|_{H¹(Ω_side)}`.
pub fn bulk_h1_semi_error(
    space: &FESpace,
    coeffs: &[f64],
    topo: &CutTopology,
    side: Side,
    exact_grad: &dyn Fn(Point) -> Point,
) -> f64 {
    let mut sum = 0.0;
    for &c in space.active().cells() {
        let rule = bulk_rule(c, topo, side, ERROR_ORDER);
        sum += rule.integrate(|p| {
            let e = space.evaluate_gradient(coeffs, c, p) - exact_grad(p);
            e.dot(e)
        });
    }
    sum.sqrt()
}

/// `‖q_h − q‖_{L²(Γ)}`; the reference receives the point and the normal `n_i`.
pub fn surface_l2_error(
    space: &FESpace,
    coeffs: &[f64],
    topo: &CutTopology,
    exact: &dyn Fn(Point, Point) -> f64,
) -> f64 {
    let mut sum = 0.0;
    for cc in topo.cut_cells() {
        if space.cell_dofs(cc.cell).is_none() {
            continue;
        }
        let rule = surface_rule(cc.cell, topo, ERROR_ORDER);
        let normals = rule.normals.as_deref().unwrap_or(&[]);
        for (k, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            sum += w * (space.evaluate(coeffs, cc.cell, p) - exact(p, normals[k])).powi(2);
        }
    }
    sum.sqrt()
}

/// `‖f‖_{L²(Γ)}` of a closed-form field.
pub fn surface_l2_norm(topo: &CutTopology, f: &dyn Fn(Point, Point) -> f64) -> f64 {
    let mut sum = 0.0;
    for cc in topo.cut_cells() {
        let rule = surface_rule(cc.cell, topo, ERROR_ORDER);
        let normals = rule.normals.as_deref().unwrap_or(&[]);
        for (k, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            sum += w * f(p, normals[k]).powi(2);
        }
    }
    sum.sqrt()
}

/// Experimental order of convergence `log(E_{n−1}/E_n) / log(h_{n−1}/h_n)`.
pub fn eoc(e_prev: f64, e: f64, h_prev: f64, h: f64) -> f64 {
    (e_prev / e).ln() / (h_prev / h).ln()
}
