//! Brute-force summation oracles for the solid and flow right-hand sides on
//! a 10×10 patch with random fields, a few broken bonds and a fractured set.
//!
//! The oracle rebuilds every nonlocal quantity from scratch with plain loops
//! over the bond list and the per-bond state functions, then assembles the
//! balance laws term by term.

use periporo::constitutive::{
    fluid_force_state, micropolar_stress_couple, relative_permeability, retention,
    stabilization_modulus, stabilization_normalizer, stabilized_flow_state,
    stabilized_solid_states, Mat2, PointStates, Space, Vec2,
};
use periporo::fracture::{damage, leak_off};
use periporo::grid::{build_neighbor_lists, PointSet};
use periporo::kinematics::{composite, FieldState};
use periporo::{load_scenario_config, ScenarioConfig, Simulation};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

const N: usize = 10;
const DX: f64 = 0.01;
const DELTA: f64 = 0.0301;

fn config() -> ScenarioConfig {
    load_scenario_config(&format!(
        r#"
        scenario = "unsat-single"
        nx = {N}
        ny = {N}
        dx_m = {DX}
        horizon_m = {DELTA}
        crack = [{{ x0 = 0.025, y0 = 0.05, x1 = 0.065, y1 = 0.05 }}]
        [material]
        length_scale_m = {DELTA}
        hydraulic_conductivity_mps = 1e-6
        [bc]
        fixed_x = []
        fixed_y = []
        drained = []
        traction = []
        injection_rate_m2_s = 3e-7
        "#
    ))
    .expect("patch deck")
}

struct Patch {
    sim: Simulation,
    cfg: ScenarioConfig,
}

fn patch(seed: u8) -> Patch {
    let cfg = config();
    let mut points = PointSet::from_counts(N, N, DX, cfg.thickness, &[]).unwrap();
    let mut table = build_neighbor_lists(&mut points, DELTA, &cfg.cracks);
    let mut rng = StdRng::seed_from_u64(seed as u64);
    // a few extra random breaks away from the crack
    for _ in 0..6 {
        let id = rng.random_range(0..table.bond_count());
        table.ledger.intact[id] = false;
    }
    let n = points.len();
    let mut f = FieldState::zeros(n);
    for i in 0..n {
        f.u[i] = Vec2::new(rng.random_range(-1e-5..1e-5), rng.random_range(-1e-5..1e-5));
        f.v[i] = Vec2::new(rng.random_range(-1e-3..1e-3), rng.random_range(-1e-3..1e-3));
        f.rot[i] = rng.random_range(-1e-4..1e-4);
        f.spin[i] = rng.random_range(-1e-2..1e-2);
        f.pw[i] = rng.random_range(-2e5..-1e4);
        f.damage[i] = damage(i, &table);
    }
    let fl = cfg.material.fluid;
    for i in 0..n {
        f.sr[i] = retention(f.pw[i], &fl).0;
        f.fractured[i] = points.crack_face[i] || f.damage[i] >= cfg.material.stab.d_cr;
        if f.fractured[i] {
            f.pf[i] = rng.random_range(-5e4..2e5);
            f.af[i] = rng.random_range(1e-6..1e-4);
        } else {
            f.pf[i] = f.pw[i];
        }
        f.srf[i] = retention(f.pf[i], &fl).0;
    }
    assert!(f.fractured.iter().filter(|&&b| b).count() >= 4, "fractured set too small");
    let mut sim = Simulation::from_parts(cfg.clone(), points, table);
    *sim.fields_mut() = f;
    Patch { sim, cfg }
}

fn inv(m: &Mat2) -> Mat2 {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    Mat2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det
}

/// Independent per-point correspondence data.
struct Oracle {
    states: Vec<PointStates>,
}

fn oracle_states(p: &Patch) -> Oracle {
    let t = p.sim.table();
    let f = p.sim.fields();
    let mat = &p.cfg.material;
    let d = stabilization_modulus(mat.solid.young(), mat.solid.poisson(), DELTA);
    let sigma0 = retention(p.cfg.bc.initial_pw_pa, &mat.fluid).0 * p.cfg.bc.initial_pw_pa;
    let mut states = Vec::new();
    for i in 0..f.len() {
        let mut k = Mat2::zeros();
        let mut a = Mat2::zeros();
        let mut b = Vec2::zeros();
        let (mut wl, mut l) = (0.0, 0.0);
        for e in t.range(i) {
            if !t.intact(e) {
                continue;
            }
            let j = t.neighbors[e] as usize;
            let xi = t.xi[e];
            let v = t.volume[e];
            k += xi * xi.transpose() * v;
            let uh = composite(&(f.u[j] - f.u[i]), 0.5 * (f.rot[i] + f.rot[j]), &xi);
            a += uh * xi.transpose() * v;
            b += xi * ((f.rot[j] - f.rot[i]) * v);
            wl += xi.norm() * v;
            l += xi.norm() * v;
        }
        assert!(!p.sim.is_deficient(i), "point {i} unexpectedly deficient");
        let k_inv = inv(&k);
        let eps = a * k_inv;
        let kappa = k_inv.transpose() * b;
        let (stress, couple) = micropolar_stress_couple(&eps, &kappa, &mat.solid);
        states.push(PointStates {
            k_inv,
            eps,
            kappa,
            stress: stress + Mat2::identity() * sigma0,
            couple,
            g_norm: mat.stab.g / stabilization_normalizer(wl, l),
            d_stab: d,
        });
    }
    Oracle { states }
}

fn rel_close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE)
}

pub fn momentum_and_moment_match_summation_oracle() {
    for seed in [1u8, 7, 42] {
        let mut p = patch(seed);
        let o = oracle_states(&p);
        let (acc, ang) = p.sim.momentum_moment_rhs();
        let t = p.sim.table();
        let f = p.sim.fields();
        let d_cr = p.cfg.material.stab.d_cr;
        let mut ref_acc = Vec::new();
        let mut ref_ang = Vec::new();
        let mut pairs = 0;
        for i in 0..f.len() {
            let mut force = Vec2::zeros();
            let mut moment = 0.0;
            for e in t.range(i) {
                let j = t.neighbors[e] as usize;
                let xi = t.xi[e];
                let len = t.length[e];
                let v = t.volume[e];
                let u = f.u[j] - f.u[i];
                let uh = composite(&u, 0.5 * (f.rot[i] + f.rot[j]), &xi);
                let om = f.rot[j] - f.rot[i];
                let (mut ti, mut mi, mut tj, mut mj) = (Vec2::zeros(), 0.0, Vec2::zeros(), 0.0);
                if t.intact(e) {
                    (ti, mi) = stabilized_solid_states(&o.states[i], &xi, len, &uh, om, 1.0);
                    (tj, mj) = stabilized_solid_states(&o.states[j], &(-xi), len, &(-uh), -om, 1.0);
                }
                let frac = f.fractured[i] && f.fractured[j] && f.damage[i] > d_cr && f.damage[j] > d_cr;
                pairs += frac as usize;
                let (si, sj) = if frac {
                    (f.srf[i] * f.pf[i], f.srf[j] * f.pf[j])
                } else {
                    (f.sr[i] * f.pw[i], f.sr[j] * f.pw[j])
                };
                let li = fluid_force_state(&o.states[i].k_inv, &xi, si, 1.0);
                let lj = fluid_force_state(&o.states[j].k_inv, &(-xi), sj, 1.0);
                let net = (ti - li) - (tj - lj);
                force += net * v;
                let y = xi + u;
                moment += ((mi - mj) + 0.5 * (y.x * net.y - y.y * net.x)) * v;
            }
            ref_acc.push(force / p.sim.density(i));
            ref_ang.push(moment / p.sim.micro_inertia());
        }
        let sa = ref_acc.iter().map(|a| a.norm()).fold(0.0, f64::max);
        let sw = ref_ang.iter().map(|a| a.abs()).fold(0.0, f64::max);
        assert!(sa > 0.0 && sw > 0.0);
        assert!(pairs > 0, "no bond carries fracture pressure");
        for i in 0..f.len() {
            for c in 0..2 {
                assert!(
                    rel_close(acc[i][c], ref_acc[i][c], sa),
                    "seed {seed} point {i}: {} vs {}",
                    acc[i][c],
                    ref_acc[i][c]
                );
            }
            assert!(rel_close(ang[i], ref_ang[i], sw), "seed {seed} point {i}: {} vs {}", ang[i], ref_ang[i]);
        }
    }
}

fn gradient(t: &periporo::grid::NeighborTable, p: &[f64], i: usize, member: &dyn Fn(usize) -> bool) -> (Mat2, Vec2) {
    let mut k = Mat2::zeros();
    let mut acc = Vec2::zeros();
    for e in t.range(i) {
        if member(e) {
            let j = t.neighbors[e] as usize;
            k += t.xi[e] * t.xi[e].transpose() * t.volume[e];
            acc += t.xi[e] * ((p[j] - p[i]) * t.volume[e]);
        }
    }
    let det = k.determinant();
    if det.abs() <= 1e-8 * k.trace() * k.trace() {
        return (Mat2::zeros(), Vec2::zeros());
    }
    let k_inv = inv(&k);
    (k_inv, k_inv.transpose() * acc)
}

pub fn bulk_pressure_rate_matches_summation_oracle() {
    for seed in [3u8, 11] {
        let mut p = patch(seed);
        let o = oracle_states(&p);
        let rate = p.sim.flow_rhs(Space::Bulk);
        let t = p.sim.table();
        let f = p.sim.fields();
        let fl = p.cfg.material.fluid;
        let phi = p.cfg.material.solid.porosity0;
        let n = f.len();
        let lam: Vec<f64> = (0..n).map(|i| relative_permeability(f.sr[i], fl.m) * fl.k_w / fl.mu_w).collect();
        let grads: Vec<(Mat2, Vec2)> = (0..n).map(|i| gradient(t, &f.pw, i, &|e| t.intact(e))).collect();
        let mut reference = Vec::new();
        for i in 0..n {
            let mut div = 0.0;
            for e in t.range(i) {
                if !t.intact(e) {
                    continue;
                }
                let j = t.neighbors[e] as usize;
                let xi = t.xi[e];
                let len = t.length[e];
                let phi_b = f.pw[j] - f.pw[i];
                let qi = stabilized_flow_state(
                    &grads[i].0, &xi, len, &grads[i].1, lam[i], fl.rho_w, phi_b, o.states[i].g_norm, DELTA, 1.0,
                );
                let qj = stabilized_flow_state(
                    &grads[j].0, &(-xi), len, &grads[j].1, lam[j], fl.rho_w, -phi_b, o.states[j].g_norm, DELTA, 1.0,
                );
                div += (qi - qj) * t.volume[e] / fl.rho_w;
            }
            // volumetric strain rate from the velocity field
            let mut a = Mat2::zeros();
            for e in t.range(i) {
                if t.intact(e) {
                    let j = t.neighbors[e] as usize;
                    let xi = t.xi[e];
                    let r = composite(&(f.v[j] - f.v[i]), 0.5 * (f.spin[i] + f.spin[j]), &xi);
                    a += r * xi.transpose() * t.volume[e];
                }
            }
            let nu = (a * o.states[i].k_inv).trace();
            let qs = leak_off(
                f.fractured[i],
                f.pf[i],
                f.pw[i],
                relative_permeability(f.sr[i], fl.m),
                fl.k_w,
                fl.mu_w,
                DX,
            );
            let (_, ds) = retention(f.pw[i], &fl);
            let cap = phi * ds.max(p.cfg.solver.c_min);
            reference.push(-(f.sr[i] * nu + div + qs) / cap);
        }
        let scale = reference.iter().map(|r| r.abs()).fold(0.0, f64::max);
        assert!(scale > 0.0);
        for i in 0..n {
            assert!(rel_close(rate[i], reference[i], scale), "seed {seed} point {i}: {} vs {}", rate[i], reference[i]);
        }
    }
}

pub fn fracture_pressure_rate_matches_summation_oracle() {
    for seed in [5u8, 9] {
        let mut p = patch(seed);
        let rate = p.sim.flow_rhs(Space::Fracture);
        let t = p.sim.table();
        let f = p.sim.fields();
        let fl = p.cfg.material.fluid;
        let g = p.cfg.material.stab.g;
        let n = f.len();
        let mouth = p.sim.mouth.clone();
        let src = |i: usize| {
            if mouth.contains(&i) {
                p.cfg.bc.injection_rate_m2_s / (mouth.len() as f64 * DX * DX)
            } else {
                0.0
            }
        };
        let lam: Vec<f64> = (0..n)
            .map(|i| {
                if f.fractured[i] {
                    relative_permeability(f.srf[i], fl.m) * f.af[i] * f.af[i] / (12.0 * fl.mu_w)
                } else {
                    0.0
                }
            })
            .collect();
        let member = |i: usize, e: usize| f.fractured[i] && f.fractured[t.neighbors[e] as usize];
        let grads: Vec<(Mat2, Vec2)> = (0..n)
            .map(|i| if f.fractured[i] { gradient(t, &f.pf, i, &|e| member(i, e)) } else { (Mat2::zeros(), Vec2::zeros()) })
            .collect();
        let mut reference = vec![0.0; n];
        for i in 0..n {
            if !f.fractured[i] {
                continue;
            }
            let mut div = 0.0;
            for e in t.range(i) {
                if !member(i, e) {
                    continue;
                }
                let j = t.neighbors[e] as usize;
                let xi = t.xi[e];
                let len = t.length[e];
                let phi_f = f.pf[j] - f.pf[i];
                let qi = stabilized_flow_state(&grads[i].0, &xi, len, &grads[i].1, lam[i], fl.rho_w, phi_f, g, DELTA, 1.0);
                let qj = stabilized_flow_state(&grads[j].0, &(-xi), len, &grads[j].1, lam[j], fl.rho_w, -phi_f, g, DELTA, 1.0);
                div += (qi - qj) * t.volume[e] / fl.rho_w;
            }
            let qs = leak_off(true, f.pf[i], f.pw[i], relative_permeability(f.sr[i], fl.m), fl.k_w, fl.mu_w, DX);
            let (_, ds) = retention(f.pf[i], &fl);
            reference[i] = (-div + qs + src(i)) / ds.max(p.cfg.solver.c_min);
        }
        let scale = reference.iter().map(|r| r.abs()).fold(0.0, f64::max);
        assert!(scale > 0.0);
        for i in 0..n {
            assert!(rel_close(rate[i], reference[i], scale), "seed {seed} point {i}: {} vs {}", rate[i], reference[i]);
        }
        assert!(!mouth.is_empty());
    }
}

pub const ALL: &[(&str, fn())] = &[
    ("momentum and moment oracle", momentum_and_moment_match_summation_oracle),
    ("bulk pressure oracle", bulk_pressure_rate_matches_summation_oracle),
    ("fracture pressure oracle", fracture_pressure_rate_matches_summation_oracle),
];
