//! Bond energy ledger, breakage, damage, crack width, fractured-point
//! promotion and leak-off.

use std::f64::consts::PI;

use crate::constitutive::{retention, FluidParams, Vec2};
use crate::grid::NeighborTable;
use crate::kinematics::{composite, influence, FieldState};

/// Per-bond fracture record, indexed by undirected bond id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BondLedger {
    pub intact: Vec<bool>,
    /// Signed accumulated bond work (J/m⁶).
    pub work: Vec<f64>,
    /// Peak accumulated energy W compared against W_cr. Never decreases.
    pub energy: Vec<f64>,
    /// Aperture c of broken bonds (m).
    pub aperture: Vec<f64>,
}

impl BondLedger {
    pub fn new(n: usize) -> Self {
        Self {
            intact: vec![true; n],
            work: vec![0.0; n],
            energy: vec![0.0; n],
            aperture: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.intact.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intact.is_empty()
    }

    pub fn broken_count(&self) -> usize {
        self.intact.iter().filter(|&&b| !b).count()
    }
}

/// Fracture-space view of one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracturePointState {
    pub fractured: bool,
    pub af: f64,
    pub pf: f64,
    pub srf: f64,
}

impl FracturePointState {
    pub fn of(f: &FieldState, i: usize) -> Self {
        Self {
            fractured: f.fractured[i],
            af: f.af[i],
            pf: f.pf[i],
            srf: f.srf[i],
        }
    }
}

/// W_cr = 4 G_cr / (π δ⁴).
pub fn critical_energy_density(g_cr: f64, horizon: f64) -> f64 {
    4.0 * g_cr / (PI * horizon.powi(4))
}

/// Adds one rectangle-rule increment of bond work and applies the breakage test.
///
/// Returns true when the bond breaks during this call. Broken bonds are left
/// untouched.
pub fn update_bond_state(ledger: &mut BondLedger, id: usize, increment: f64, w_cr: f64) -> bool {
    if !ledger.intact[id] {
        return false;
    }
    ledger.work[id] += increment;
    if ledger.work[id] > ledger.energy[id] {
        ledger.energy[id] = ledger.work[id];
    }
    if ledger.energy[id] >= w_cr {
        ledger.intact[id] = false;
        return true;
    }
    false
}

/// Work increment [(T̄ − T̄′)·ΔÛ + (M − M′) ΔΩ] of one bond over a step.
#[inline]
pub fn energy_increment(force_diff: &Vec2, moment_diff: f64, du_hat: &Vec2, d_omega: f64) -> f64 {
    force_diff.dot(du_hat) + moment_diff * d_omega
}

/// Damage d = 1 − Σ ϱ ω V′ / Σ ω V′.
pub fn damage(i: usize, table: &NeighborTable) -> f64 {
    let (mut all, mut kept) = (0.0, 0.0);
    for e in table.range(i) {
        let wv = influence(table.length[e], table.horizon) * table.volume[e];
        all += wv;
        if table.intact(e) {
            kept += wv;
        }
    }
    if all > 0.0 {
        (1.0 - kept / all).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Aperture of a broken bond: opening of the deformed bond along its
/// reference direction, clamped at zero.
#[inline]
pub fn bond_aperture(xi: &Vec2, len: f64, u_hat: &Vec2) -> f64 {
    (u_hat.dot(xi) / len).max(0.0)
}

/// Crack width a_f = Σ (1 − ϱ) c V′ / Σ ω V′ of point `i`.
pub fn crack_width(i: usize, table: &NeighborTable, f: &FieldState) -> f64 {
    let (mut all, mut open) = (0.0, 0.0);
    for e in table.range(i) {
        let wv = influence(table.length[e], table.horizon) * table.volume[e];
        all += wv;
        if !table.intact(e) {
            let j = table.neighbors[e] as usize;
            let xi = table.xi[e];
            let uh = composite(&(f.u[j] - f.u[i]), 0.5 * (f.rot[i] + f.rot[j]), &xi);
            open += bond_aperture(&xi, table.length[e], &uh) * table.volume[e];
        }
    }
    if all > 0.0 {
        open / all
    } else {
        0.0
    }
}

/// Recomputes bond apertures and per-point crack widths.
pub fn crack_geometry(table: &mut NeighborTable, f: &mut FieldState) {
    for id in 0..table.bond_count() {
        if !table.ledger.intact[id] {
            let e = table.forward[id] as usize;
            let (i, j) = table.ends[id];
            let (i, j) = (i as usize, j as usize);
            let xi = table.xi[e];
            let uh = composite(&(f.u[j] - f.u[i]), 0.5 * (f.rot[i] + f.rot[j]), &xi);
            table.ledger.aperture[id] = bond_aperture(&xi, table.length[e], &uh);
        }
    }
    for i in 0..f.len() {
        f.af[i] = crack_width(i, table, f);
    }
}

/// Marks new fractured points.
///
/// A point is promoted when its damage reaches `d_cr` and it has a broken bond
/// whose other endpoint has also reached `d_cr`. New points take p_f from p_w
/// and S_rf from the retention curve. Returns the promoted indices.
pub fn promote_fractured_points(
    f: &mut FieldState,
    table: &NeighborTable,
    d_cr: f64,
    fluid: Option<&FluidParams>,
) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..f.len() {
        if f.fractured[i] || f.damage[i] < d_cr {
            continue;
        }
        let hit = table
            .range(i)
            .any(|e| !table.intact(e) && f.damage[table.neighbors[e] as usize] >= d_cr);
        if hit {
            out.push(i);
        }
    }
    for &i in &out {
        f.fractured[i] = true;
        f.pf[i] = f.pw[i];
        f.srf[i] = match fluid {
            Some(p) => retention(f.pf[i], p).0,
            None => 1.0,
        };
    }
    out
}

/// Leak-off Q_s = 2[−(k_r k_w / μ_w)(p_f − p_w)/d]/d (1/s); zero off the fracture.
pub fn leak_off(fractured: bool, pf: f64, pw: f64, k_r: f64, k_w: f64, mu_w: f64, d_cell: f64) -> f64 {
    if !fractured {
        return 0.0;
    }
    2.0 * (-(k_r * k_w / mu_w) * (pf - pw) / d_cell) / d_cell
}
