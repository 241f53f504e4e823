//! Acceptance criteria of the solver and its studies, one PASS/FAIL line each.
//!
//! Thresholds are pinned here and evaluated from the study tables, not from
//! the studies' own checks. Runs without the libtest harness so the lines are
//! always printed; the process fails if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use emi_cutfem::assembly::{
    assemble_bulk_mass, assemble_ghost_penalty, assemble_interface_mass, assemble_single_dim, assemble_stiffness,
    assemble_surface_mass, ReducedSystem,
};
use emi_cutfem::levelset::translated_circle;
use emi_cutfem::quadrature::{bulk_rule, surface_rule};
use emi_cutfem::{
    build_cartesian_mesh, condition_number_2, solve_direct, Bounds, CutDiscretization, CutTopology, EmiParams,
    LevelSet, Point, Shape, Side, SparseMatrix, SurfaceField, SurfaceStab,
};
use emi_cutfem_cli::config::RunConfig;
use emi_cutfem_cli::report::StudyReport;
use emi_cutfem_cli::studies::conv_coupled::CoupledProblem;
use emi_cutfem_cli::studies::{conv_coupled, conv_multi, conv_ode, hh_demo, sens_ode, sens_pde};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;
type Property = (&'static str, fn() -> (bool, String));
type Criterion = (&'static str, fn() -> Outcome);

fn col(r: &StudyReport, name: &str) -> Vec<f64> {
    r.column(name).unwrap_or_else(|| panic!("column {name} missing from {}", r.name))
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `log(E_{n-1}/E_n) / log(h_{n-1}/h_n)`, recomputed independently of the report.
fn eoc_pairs(e: &[f64], h: &[f64]) -> Vec<f64> {
    (1..e.len()).map(|k| (e[k - 1] / e[k]).ln() / (h[k - 1] / h[k]).ln()).collect()
}

fn conv_multi_criterion() -> Outcome {
    let out = conv_multi::run(&RunConfig::default()).map_err(|e| e.to_string())?;
    let r = out.report("conv_multi").ok_or("no table")?;
    let (n, h) = (col(r, "N"), col(r, "h"));
    let at = |name: &str, level: f64| col(r, name)[n.iter().position(|&x| x == level).unwrap()];
    let (e16, e256) = (at("err_u_L2", 16.0), at("err_u_L2", 256.0));
    let l2 = *eoc_pairs(&col(r, "err_u_L2"), &h).last().unwrap();
    let h1 = *eoc_pairs(&col(r, "err_u_H1"), &h).last().unwrap();
    let im = *eoc_pairs(&col(r, "err_Im_L2G"), &h).last().unwrap();
    let ok = (3.42e-2 / 2.0..=3.42e-2 * 2.0).contains(&e16)
        && (1.36e-4 / 2.0..=1.36e-4 * 2.0).contains(&e256)
        && (1.9..=2.1).contains(&l2)
        && (0.95..=1.1).contains(&h1)
        && (0.9..=1.3).contains(&im);
    Ok((ok, format!("e16={e16:.3e} e256={e256:.3e} eoc L2={l2:.3} H1={h1:.3} Im={im:.3}")))
}

fn sens_pde_criterion() -> Outcome {
    let out = sens_pde::run(&RunConfig::default()).map_err(|e| e.to_string())?;
    let r = out.report("sens_pde").ok_or("no table")?;
    let (ks, ku) = (col(r, "kappa_stab"), col(r, "kappa_unstab"));
    if ks.len() != 101 {
        return Err(format!("expected 101 sweep positions, got {}", ks.len()));
    }
    let ratio = max(&ks) / min(&ks);
    // δ = 0 against an independently built centered circle
    let mesh = build_cartesian_mesh(32, 32, Bounds::square(-1.0, 1.0)).unwrap();
    let zero = |_: Point| 0.0;
    let disc = CutDiscretization::new(&Shape::circle(0.0, 0.0, 0.5), &mesh, Some(&zero)).unwrap();
    let fixed = disc.constrained().iter().map(|c| c.0).collect();
    let reduced = ReducedSystem::new(&disc.multi_matrix(&sens_pde::default_params()), fixed);
    let k0 = condition_number_2(&reduced.matrix).unwrap();
    let ok = ratio < 10.0 && max(&ku) >= 100.0 * max(&ks) && k0 == ks[0];
    Ok((ok, format!("stab max/min={ratio:.3} unstab max={:.3e} stab max={:.3e} delta0 exact={}", max(&ku), max(&ks), k0 == ks[0])))
}

fn sens_ode_criterion() -> Outcome {
    let out = sens_ode::run(&RunConfig::default()).map_err(|e| e.to_string())?;
    let r = out.report("sens_ode").ok_or("no table")?;
    let (none, s1, s2) = (max(&col(r, "kappa_none")), max(&col(r, "kappa_s1")), max(&col(r, "kappa_s2")));
    let ok = (1e3..=1e5).contains(&s1) && (1e1..=1e3).contains(&s2) && none >= 1e6;
    Ok((ok, format!("max kappa none={none:.3e} s1={s1:.3e} s2={s2:.3e}")))
}

fn conv_ode_criterion() -> Outcome {
    let out = conv_ode::run(&RunConfig::default()).map_err(|e| e.to_string())?;
    let r = out.report("conv_ode").ok_or("no table")?;
    let h: Vec<f64> = col(r, "N").iter().map(|n| 2.0 / n).collect();
    let mut detail = Vec::new();
    let mut ok = true;
    for name in ["v_LinfL2", "v_L2L2", "s_LinfL2", "s_L2L2"] {
        let e = *eoc_pairs(&col(r, &format!("err_{name}")), &h).last().unwrap();
        ok &= e >= 0.85;
        detail.push(format!("{name}={e:.3}"));
    }
    Ok((ok, detail.join(" ")))
}

/// Finite-difference check of the membrane source terms of the coupled problem.
fn coupled_sources_consistent() -> (bool, f64) {
    let pb = CoupledProblem { shape: Shape::ellipse(0.0, 0.0, 0.64, 0.8), sigma_i: 1.5, sigma_e: 1.0, c_m: 1.0, h: 1e-3 };
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for (k, t) in [0.0, 0.37, 0.9].into_iter().enumerate() {
        let a = 0.3 + 1.7 * k as f64;
        let p = Point::new(0.64 * a.cos(), 0.8 * a.sin());
        let v_t = (pb.v(p, t + eps) - pb.v(p, t - eps)) / (2.0 * eps);
        let s_t = (pb.s(p, t + eps) - pb.s(p, t - eps)) / (2.0 * eps);
        // C_m v_t = I_m - P₁ + s and s_t = v + P₂
        worst = worst.max((pb.c_m * v_t - (pb.i_m(p, t) - pb.p1(p, t) + pb.s(p, t))).abs());
        worst = worst.max((s_t - (pb.v(p, t) + pb.p2(p, t))).abs());
    }
    (worst < 1e-6, worst)
}

fn conv_coupled_criterion() -> Outcome {
    let out = conv_coupled::run(&RunConfig::default()).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut detail = Vec::new();
    for name in ["conv_coupled_single", "conv_coupled_multi"] {
        let r = out.report(name).ok_or("no table")?;
        let h: Vec<f64> = col(r, "N").iter().map(|n| 2.0 / n).collect();
        let mut all = Vec::new();
        for c in r.columns.iter().filter(|c| c.starts_with("err_")) {
            all.extend(eoc_pairs(&col(r, c), &h));
        }
        ok &= all.iter().all(|e| (0.8..=1.5).contains(e));
        detail.push(format!("{name} eoc in [{:.3}, {:.3}]", min(&all), max(&all)));
    }
    let cross = out.report("conv_coupled_cross").ok_or("no cross table")?;
    let (d, es, em) = (col(cross, "diff_u_LinfL2"), col(cross, "err_u_LinfL2_single"), col(cross, "err_u_LinfL2_multi"));
    let cross_ok = (0..d.len()).all(|k| d[k] < es[k] && d[k] < em[k]);
    let (fd_ok, fd) = coupled_sources_consistent();
    ok &= cross_ok && fd_ok;
    detail.push(format!("cross ok={cross_ok} P1/P2 fd defect={fd:.1e}"));
    Ok((ok, detail.join("; ")))
}

fn circle_disc(n: usize, m_delta: usize, m: usize) -> (Shape, CutDiscretization) {
    let mesh = build_cartesian_mesh(n, n, Bounds::square(-1.0, 1.0)).unwrap();
    let shape = translated_circle(0.5, n, m_delta, m).unwrap();
    let zero = |_: Point| 0.0;
    let disc = CutDiscretization::new(&shape, &mesh, Some(&zero)).unwrap();
    (shape, disc)
}

fn quadrature_properties() -> (bool, String) {
    // additivity: both sides of every cell add up to the cell
    let mesh = build_cartesian_mesh(32, 32, Bounds::square(-1.0, 1.0)).unwrap();
    let topo = CutTopology::build(&Shape::circle(0.013, -0.021, 0.5), &mesh);
    let cell_area = mesh.h() * mesh.h();
    let additivity = (0..mesh.n_cells())
        .map(|c| (bulk_rule(c, &topo, Side::Intra, 2).measure() + bulk_rule(c, &topo, Side::Extra, 2).measure() - cell_area).abs())
        .fold(0.0, f64::max);
    // area of the disc converges at second order
    let ns = [16usize, 32, 64, 128];
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let mesh = build_cartesian_mesh(n, n, Bounds::square(-1.0, 1.0)).unwrap();
            let topo = CutTopology::build(&Shape::circle(0.013, -0.021, 0.5), &mesh);
            let area: f64 = (0..mesh.n_cells()).map(|c| bulk_rule(c, &topo, Side::Intra, 2).measure()).sum();
            (area - PI * 0.25).abs()
        })
        .collect();
    let h: Vec<f64> = ns.iter().map(|&n| 2.0 / n as f64).collect();
    let eocs = eoc_pairs(&errs, &h);
    let mean = eocs.iter().sum::<f64>() / eocs.len() as f64;
    let ok = additivity < 1e-14 && (1.7..=2.3).contains(&mean);
    (ok, format!("additivity defect={additivity:.1e} area eoc mean={mean:.3}"))
}

fn ghost_affine_energy() -> (bool, String) {
    let params = EmiParams::default();
    let mut worst: f64 = 0.0;
    for m in [0, 3, 7] {
        let (_, d) = circle_disc(32, 10, m);
        for (space, faces) in [(&d.v_i, &d.ghost_i), (&d.v_e, &d.ghost_e)] {
            let g = assemble_ghost_penalty(space, faces, &params);
            let u = space.interpolate(|p| 1.3 - 2.1 * p.x + 0.7 * p.y);
            let scale = g.max_abs() * u.iter().map(|x| x * x).sum::<f64>();
            worst = worst.max(g.bilinear(&u, &u).abs() / scale);
        }
    }
    (worst < 1e-12, format!("relative affine energy={worst:.1e}"))
}

fn norm_equivalence() -> (bool, String) {
    let params = EmiParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ok = true;
    let mut detail = Vec::new();
    for n in [16usize, 32, 64] {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for m in 0..100 {
            let (_, d) = circle_disc(n, 100, m);
            for (space, faces, side) in [(&d.v_i, &d.ghost_i, Side::Intra), (&d.v_e, &d.ghost_e, Side::Extra)] {
                let phys = assemble_bulk_mass(space, &d.topo, side, 2);
                let ghost = assemble_ghost_penalty(space, faces, &params);
                let active = full_mass(space);
                for _ in 0..4 {
                    let v: Vec<f64> = (0..space.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let r = (phys.bilinear(&v, &v) + ghost.bilinear(&v, &v)) / active.bilinear(&v, &v);
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
            }
        }
        // equivalence constants of order one, whatever the cut position and mesh size
        ok &= lo > 0.1 && hi < 10.0;
        detail.push(format!("N={n} ratio in [{lo:.3}, {hi:.3}]"));
    }
    (ok, detail.join(", "))
}

/// Mass matrix over the whole active mesh, from the bulk rules of both sides.
fn full_mass(space: &emi_cutfem::FESpace) -> SparseMatrix {
    let mesh = space.mesh();
    let topo = CutTopology::build(&Shape::Constant(-1.0), mesh);
    assemble_bulk_mass(space, &topo, Side::Intra, 2)
}

fn symmetry() -> (bool, String) {
    let (shape, d) = circle_disc(32, 10, 3);
    let params = EmiParams::default();
    let ops = [
        assemble_stiffness(&d.v_i, &d.topo, Side::Intra, 1.3, 2),
        assemble_bulk_mass(&d.v_e, &d.topo, Side::Extra, 2),
        assemble_ghost_penalty(&d.v_i, &d.ghost_i, &params),
        assemble_interface_mass(&d.q_h, &d.q_h, &d.topo, 2),
        assemble_surface_mass(&d.q_ode, &d.topo, &params, SurfaceStab::None, &shape),
        assemble_surface_mass(&d.q_ode, &d.topo, &params, SurfaceStab::S1, &shape),
        assemble_surface_mass(&d.q_ode, &d.topo, &params, SurfaceStab::S2, &shape),
        d.single_matrix(&params),
        d.multi_matrix(&params),
    ];
    let worst = ops.iter().map(|a| a.symmetry_defect() / a.max_abs()).fold(0.0, f64::max);
    (worst <= 1e-12, format!("max relative asymmetry={worst:.1e}"))
}

fn constant_reproduction() -> (bool, String) {
    let (ci, ce) = (-0.8, 0.35);
    let mesh = build_cartesian_mesh(24, 24, Bounds::square(-1.0, 1.0)).unwrap();
    let shape = Shape::circle(0.031, -0.017, 0.55);
    let bc = |_: Point| ce;
    let disc = CutDiscretization::new(&shape, &mesh, Some(&bc)).unwrap();
    let params = EmiParams { sigma_i: 1.0, sigma_e: 2.0, c_m: 1.0, dt: 0.1, ..Default::default() };
    let g = |_: Point, _: Point| ci - ce;
    let sys = assemble_single_dim(&disc, &params, SurfaceField::Function(&g), None, None).unwrap();
    let (red, rhs) = sys.reduce();
    let x = sys.expand(&red, &solve_direct(&red.matrix, &rhs).unwrap());
    let ni = disc.v_i.n_dofs();
    let err = x.iter().enumerate().map(|(k, &u)| (u - if k < ni { ci } else { ce }).abs()).fold(0.0, f64::max);
    (err < 1e-10, format!("max nodal error={err:.1e}"))
}

fn condition_properties() -> (bool, String) {
    let id = condition_number_2(&SparseMatrix::identity(40)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 30;
    let mut trip = Vec::new();
    for i in 0..n {
        trip.push((i, i, 4.0 + rng.gen_range(0.0..1.0)));
        let j = rng.gen_range(0..n);
        let v = rng.gen_range(-1.0..1.0);
        trip.push((i, j, v));
        trip.push((j, i, v));
    }
    let a = SparseMatrix::from_triplets(n, n, &trip).unwrap();
    let k = condition_number_2(&a).unwrap();
    let ks = condition_number_2(&a.scaled(-3.7e5)).unwrap();
    let ok = (id - 1.0).abs() < 1e-12 && ((ks - k) / k).abs() < 1e-10;
    (ok, format!("kappa(I)={id} scale defect={:.1e}", ((ks - k) / k).abs()))
}

fn property_suites() -> Outcome {
    let parts: [Property; 6] = [
        ("quadrature", quadrature_properties),
        ("ghost affine energy", ghost_affine_energy),
        ("norm equivalence", norm_equivalence),
        ("symmetry", symmetry),
        ("constant reproduction", constant_reproduction),
        ("condition number", condition_properties),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, f) in parts {
        let (pass, d) = f();
        ok &= pass;
        detail.push(format!("{name}: {} {d}", if pass { "ok" } else { "FAILED" }));
    }
    Ok((ok, detail.join("; ")))
}

/// Single-compartment Hodgkin-Huxley model with the stimulus spread over the
/// stimulated membrane fraction, integrated by explicit Euler.
fn hh_0d(frac: f64, window: (f64, f64), dt: f64, t_end: f64) -> (Vec<f64>, Vec<f64>) {
    let (g_na, g_k, g_l, g_stim) = (1.2e-3, 3.6e-4, 3e-6, 7e-3);
    let (e_na, e_k, e_l, v_rest, c_m) = (50.0, -77.0, -54.5, -65.0, 2e-5);
    let (mut v, mut m, mut h, mut n): (f64, f64, f64, f64) = (-67.7, 0.0379, 0.688, 0.276);
    let exprel = |x: f64| if x.abs() < 1e-6 { 1.0 + x / 2.0 } else { (x.exp() - 1.0) / x };
    let (mut ts, mut vs) = (vec![0.0], vec![v]);
    let steps = (t_end / dt).round() as usize;
    for k in 0..steps {
        let t = k as f64 * dt;
        let u = v - v_rest;
        let am = 1.0 / exprel((25.0 - u) / 10.0);
        let bm = 4.0 * (-u / 18.0).exp();
        let ah = 0.07 * (-u / 20.0).exp();
        let bh = 1.0 / (((30.0 - u) / 10.0).exp() + 1.0);
        let an = 0.1 / exprel((10.0 - u) / 10.0);
        let bn = 0.125 * (-u / 80.0).exp();
        let stim = if t >= window.0 && t <= window.1 { g_stim * frac } else { 0.0 };
        let i_ion = g_na * m.powi(3) * h * (v - e_na) + g_k * n.powi(4) * (v - e_k) + g_l * (v - e_l) - stim;
        let v_new = v - dt * i_ion / c_m;
        m += dt * (am * (1.0 - m) - bm * m);
        h += dt * (ah * (1.0 - h) - bh * h);
        n += dt * (an * (1.0 - n) - bn * n);
        v = v_new;
        ts.push((k + 1) as f64 * dt);
        vs.push(v);
    }
    (ts, vs)
}

fn hh_criterion() -> Outcome {
    let out = hh_demo::run(&RunConfig::default(), None).map_err(|e| e.to_string())?;
    let (t1, t2) = (hh_demo::DEFAULT_STIM_WINDOW[0], hh_demo::DEFAULT_STIM_WINDOW[1]);
    let mut traces = Vec::new();
    for k in 0.. {
        match out.report(&format!("hh_trace_level{k}")) {
            Some(r) => traces.push((col(r, "t"), col(r, "v_membrane"))),
            None => break,
        }
    }
    if traces.len() != 3 {
        return Err(format!("expected three refinement levels, got {}", traces.len()));
    }
    let mut ok = true;
    let mut drift: f64 = 0.0;
    let mut up: f64 = 0.0;
    let mut down: f64 = 0.0;
    for (t, v) in &traces {
        drift = traces_drift(t, v, t1).max(drift);
        let ku = v.iter().position(|&x| x > 0.0);
        let kp = (0..v.len()).fold(0, |a, k| if v[k] > v[a] { k } else { a });
        let kd = (kp..v.len()).find(|&k| v[k] < -60.0);
        ok &= ku.is_some() && kd.is_some();
        up = up.max(ku.map_or(f64::INFINITY, |k| t[k] - t1));
        down = down.max(kd.map_or(f64::INFINITY, |k| t[k]));
    }
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let d01 = diff(&traces[0].1, &traces[1].1);
    let d12 = diff(&traces[1].1, &traces[2].1);
    ok &= drift < 1.0 && up <= 2.0 && down <= 15.0 && d12 < d01;

    // 0D oracle with the stimulated membrane fraction of the cell
    let shape = Shape::two_lobes();
    let mesh = build_cartesian_mesh(512, 384, hh_demo::BOUNDS).unwrap();
    let topo = CutTopology::build(&shape, &mesh);
    let (mut total, mut stim) = (0.0, 0.0);
    for cc in topo.cut_cells() {
        let rule = surface_rule(cc.cell, &topo, 2);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            total += w;
            if p.x > hh_demo::STIM_X {
                stim += w;
            }
        }
    }
    debug_assert!(shape.value(Point::new(-20.0, 0.0)).abs() < 1e-6);
    let (ot, ov) = hh_0d(stim / total, (t1, t2), 0.01, 15.0);
    let (ft, fv) = &traces[2];
    let o_up = ot[ov.iter().position(|&x| x > 0.0).unwrap()];
    let f_up = ft[fv.iter().position(|&x| x > 0.0).unwrap()];
    let peak_gap = (max(&ov) - max(fv)).abs();
    let oracle_ok = peak_gap < 5.0 && (o_up - f_up).abs() < 0.1;
    ok &= oracle_ok;
    Ok((
        ok,
        format!(
            "drift={drift:.3} mV, upstroke {up:.2} ms after onset, below -60 mV at {down:.2} ms, diffs {d01:.3} > {d12:.3}, \
             0D oracle peak gap {peak_gap:.2} mV upstroke gap {:.2} ms",
            (o_up - f_up).abs()
        ),
    ))
}

fn traces_drift(t: &[f64], v: &[f64], t1: f64) -> f64 {
    t.iter().zip(v).filter(|(&s, _)| s < t1).map(|(_, &x)| (x - v[0]).abs()).fold(0.0, f64::max)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("multi-dimensional convergence", conv_multi_criterion),
        ("PDE conditioning robustness", sens_pde_criterion),
        ("ODE mass conditioning", sens_ode_criterion),
        ("unfitted ODE convergence", conv_ode_criterion),
        ("coupled splitting convergence", conv_coupled_criterion),
        ("property suites", property_suites),
        ("HH action-potential demo", hh_criterion),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, f) in criteria {
        if filter.as_deref().is_some_and(|s| !name.contains(s)) {
            continue;
        }
        let start = Instant::now();
        let (status, detail) = match f() {
            Ok((true, d)) => ("PASS", d),
            Ok((false, d)) => ("FAIL", d),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("{status} {name} [{:.1} s]: {detail}", start.elapsed().as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
