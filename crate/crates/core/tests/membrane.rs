//! Surface projections and the membrane ODE step against pointwise oracles.

use emi_cutfem::assembly::{CutDiscretization, SurfaceField};
use emi_cutfem::membrane::{ode_step, RhsEvaluation, StimRegion, SurfaceProjector};
use emi_cutfem::{BackgroundMesh, Bounds, EmiParams, HHParams, HodgkinHuxley, MembraneState, Point, Shape, SurfaceStab};

fn setup(n: usize) -> (Shape, CutDiscretization) {
    let shape = Shape::circle(0.013, -0.027, 0.52);
    let mesh = BackgroundMesh::new(n, n, Bounds::square(-1.0, 1.0)).unwrap();
    let disc = CutDiscretization::new(&shape, &mesh, None).unwrap();
    (shape, disc)
}

fn params() -> EmiParams {
    EmiParams { c_m: 1.0, dt: 0.1, ..EmiParams::default() }
}

/// Independent Hodgkin-Huxley right-hand side (shifted-voltage convention).
fn hh_rhs(v: f64, m: f64, h: f64, n: f64, stim: f64) -> [f64; 4] {
    let (g_na, g_k, g_l) = (1.2e-3, 3.6e-4, 3e-6);
    let (e_na, e_k, e_l, c_m) = (50.0, -77.0, -54.5, 2e-5);
    let u = v + 65.0;
    let am = 0.1 * (25.0 - u) / (((25.0 - u) / 10.0).exp() - 1.0);
    let bm = 4.0 * (-u / 18.0).exp();
    let ah = 0.07 * (-u / 20.0).exp();
    let bh = 1.0 / (((30.0 - u) / 10.0).exp() + 1.0);
    let an = 0.01 * (10.0 - u) / (((10.0 - u) / 10.0).exp() - 1.0);
    let bn = 0.125 * (-u / 80.0).exp();
    let i_ion = g_na * m.powi(3) * h * (v - e_na) + g_k * n.powi(4) * (v - e_k) + g_l * (v - e_l) - stim;
    [-i_ion / c_m, am * (1.0 - m) - bm * m, ah * (1.0 - h) - bh * h, an * (1.0 - n) - bn * n]
}

fn uniform(n_dofs: usize, v: f64, s: [f64; 3]) -> MembraneState {
    MembraneState { v: vec![v; n_dofs], gates: s.iter().map(|&x| vec![x; n_dofs]).collect(), t: 0.0 }
}

#[test]
fn stabilized_projection_reproduces_constants() {
    // the plain surface mass is close to singular here, so only stabilized variants are checked
    let (shape, d) = setup(24);
    for stab in [SurfaceStab::S1, SurfaceStab::S2] {
        let proj = SurfaceProjector::new(&d.q_ode, &d.topo, &params(), stab, &shape).unwrap();
        let f = |_: Point, _: Point| 3.25;
        let x = proj.project(&d.q_ode, &d.topo, SurfaceField::Function(&f)).unwrap();
        let err = x.iter().map(|v| (v - 3.25).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{stab:?}: {err}");
    }
}

#[test]
fn face_stabilized_projection_reproduces_affine_fields() {
    let (shape, d) = setup(24);
    let proj = SurfaceProjector::new(&d.q_ode, &d.topo, &params(), SurfaceStab::S1, &shape).unwrap();
    let affine = |p: Point| 0.5 - 2.0 * p.x + 0.75 * p.y;
    let f = |p: Point, _: Point| affine(p);
    let x = proj.project(&d.q_ode, &d.topo, SurfaceField::Function(&f)).unwrap();
    let err = x.iter().zip(d.q_ode.interpolate(affine)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-8, "{err}");
}

#[test]
fn uniform_step_matches_pointwise_euler() {
    let (shape, d) = setup(16);
    let hh = HHParams { stim_region: StimRegion::Everywhere, stim_window: (0.0, 1.0), ..HHParams::default() };
    let model = HodgkinHuxley(hh);
    let proj = SurfaceProjector::new(&d.q_ode, &d.topo, &params(), SurfaceStab::S1, &shape).unwrap();
    let dt = 0.01;
    let mut state = uniform(d.q_ode.n_dofs(), hh.v0, [hh.m0, hh.h0, hh.n0]);
    let mut y = [hh.v0, hh.m0, hh.h0, hh.n0];
    for eval in [RhsEvaluation::Quadrature, RhsEvaluation::Nodal] {
        for _ in 0..20 {
            let f = hh_rhs(y[0], y[1], y[2], y[3], hh.g_stim);
            for k in 0..4 {
                y[k] += dt * f[k];
            }
            let step = ode_step(&state, dt, &model, &d.q_ode, &d.topo, &proj, eval).unwrap();
            state = MembraneState { v: step.v_star, gates: step.gates, t: state.t + dt };
            let dv = state.v.iter().map(|v| (v - y[0]).abs()).fold(0.0, f64::max);
            assert!(dv < 1e-8 * y[0].abs().max(1.0), "{eval:?}: {dv}");
            for k in 0..3 {
                let ds = state.gates[k].iter().map(|s| (s - y[k + 1]).abs()).fold(0.0, f64::max);
                assert!(ds < 1e-10, "{eval:?} gate {k}: {ds}");
            }
        }
    }
}

#[test]
fn resting_equilibrium_is_stationary() {
    // with gates at their steady state, the total current is monotone enough near rest to bisect
    let steady = |v: f64| {
        let u = v + 65.0;
        let am = 0.1 * (25.0 - u) / (((25.0 - u) / 10.0).exp() - 1.0);
        let bm = 4.0 * (-u / 18.0).exp();
        let ah = 0.07 * (-u / 20.0).exp();
        let bh = 1.0 / (((30.0 - u) / 10.0).exp() + 1.0);
        let an = 0.01 * (10.0 - u) / (((10.0 - u) / 10.0).exp() - 1.0);
        let bn = 0.125 * (-u / 80.0).exp();
        [am / (am + bm), ah / (ah + bh), an / (an + bn)]
    };
    let rate = |v: f64| {
        let s = steady(v);
        hh_rhs(v, s[0], s[1], s[2], 0.0)[0]
    };
    let (mut lo, mut hi) = (-75.0, -60.0);
    assert!(rate(lo) > 0.0 && rate(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v_eq = 0.5 * (lo + hi);
    let (shape, d) = setup(16);
    let model = HodgkinHuxley(HHParams { stim_region: StimRegion::Nowhere, ..HHParams::default() });
    let proj = SurfaceProjector::new(&d.q_ode, &d.topo, &params(), SurfaceStab::S2, &shape).unwrap();
    let state = uniform(d.q_ode.n_dofs(), v_eq, steady(v_eq));
    let step = ode_step(&state, 0.01, &model, &d.q_ode, &d.topo, &proj, RhsEvaluation::Quadrature).unwrap();
    assert!(step.v_star.iter().all(|v| (v - v_eq).abs() < 1e-9));
    for (k, s) in steady(v_eq).iter().enumerate() {
        assert!(step.gates[k].iter().all(|g| (g - s).abs() < 1e-12));
    }
}
