//! Peridynamic bond states and nonlocal correspondence fields.
//!
//! All functions are per-point gathers over a frozen [`FieldState`].
//! Bulk-space sums run over intact bonds; fracture-space sums run over bonds
//! whose endpoints are both fractured, whatever their breakage state.

use crate::constitutive::{rotate, Mat2, Space, Vec2};
use crate::grid::NeighborTable;

/// Per-point solution arrays.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldState {
    /// Displacement (m).
    pub u: Vec<Vec2>,
    /// Velocity (m/s).
    pub v: Vec<Vec2>,
    /// Micro-rotation (rad).
    pub rot: Vec<f64>,
    /// Angular velocity (rad/s).
    pub spin: Vec<f64>,
    /// Bulk water pressure (Pa, negative is suction).
    pub pw: Vec<f64>,
    /// Fracture water pressure (Pa).
    pub pf: Vec<f64>,
    pub sr: Vec<f64>,
    pub srf: Vec<f64>,
    pub damage: Vec<f64>,
    /// Crack width (m).
    pub af: Vec<f64>,
    pub fractured: Vec<bool>,
}

impl FieldState {
    pub fn zeros(n: usize) -> Self {
        Self {
            u: vec![Vec2::zeros(); n],
            v: vec![Vec2::zeros(); n],
            rot: vec![0.0; n],
            spin: vec![0.0; n],
            pw: vec![0.0; n],
            pf: vec![0.0; n],
            sr: vec![1.0; n],
            srf: vec![1.0; n],
            damage: vec![0.0; n],
            af: vec![0.0; n],
            fractured: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Influence function ω(|ξ|); unit weight inside the horizon.
#[inline]
pub fn influence(len: f64, horizon: f64) -> f64 {
    if len <= horizon * (1.0 + 1e-10) {
        1.0
    } else {
        0.0
    }
}

/// Shape tensor K = Σ ω ξ⊗ξ V′.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeTensor {
    pub k: Mat2,
}

impl ShapeTensor {
    /// Relative determinant threshold below which K counts as singular.
    pub const SINGULAR_RATIO: f64 = 1e-8;

    pub fn is_deficient(&self) -> bool {
        let tr = self.k.trace();
        !(tr > 0.0) || self.k.determinant() <= Self::SINGULAR_RATIO * tr * tr
    }

    /// K⁻¹, or `None` for a deficient point.
    pub fn inverse(&self) -> Option<Mat2> {
        if self.is_deficient() {
            None
        } else {
            self.k.try_inverse()
        }
    }
}

/// Bond states of `i → j` built from point fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BondKinematics {
    /// Displacement state U = u′ − u.
    pub u: Vec2,
    /// Deformation state Y = ξ + U.
    pub y: Vec2,
    /// Micro-rotation state Ω = ω̂′ − ω̂.
    pub omega: f64,
    /// Averaged micro-rotation Ω̄ = (ω̂′ + ω̂) / 2.
    pub omega_bar: f64,
    /// Composite displacement state Û = U − Ω̄ × ξ.
    pub u_hat: Vec2,
    /// Bulk pressure state Φ = p′ − p.
    pub phi: f64,
    /// Fracture pressure state Φ_f = p_f′ − p_f.
    pub phi_f: f64,
}

impl BondKinematics {
    pub fn new(f: &FieldState, i: usize, j: usize, xi: &Vec2) -> Self {
        let u = f.u[j] - f.u[i];
        let omega_bar = 0.5 * (f.rot[j] + f.rot[i]);
        Self {
            u,
            y: xi + u,
            omega: f.rot[j] - f.rot[i],
            omega_bar,
            u_hat: composite(&u, omega_bar, xi),
            phi: f.pw[j] - f.pw[i],
            phi_f: f.pf[j] - f.pf[i],
        }
    }
}

/// Û = U − Ω̄ × ξ.
#[inline]
pub fn composite(u: &Vec2, omega_bar: f64, xi: &Vec2) -> Vec2 {
    u - rotate(omega_bar, xi)
}

/// Whether directed bond `e` belongs to the bond family of `space`.
#[inline]
pub fn in_family(space: Space, table: &NeighborTable, fractured: &[bool], i: usize, e: usize) -> bool {
    match space {
        Space::Bulk => table.intact(e),
        Space::Fracture => fractured[i] && fractured[table.neighbors[e] as usize],
    }
}

/// Shape tensor of point `i` over the bond family of `space`.
pub fn shape_tensor(
    i: usize,
    table: &NeighborTable,
    fractured: &[bool],
    space: Space,
) -> ShapeTensor {
    let mut k = Mat2::zeros();
    for e in table.range(i) {
        if in_family(space, table, fractured, i, e) {
            let xi = table.xi[e];
            let w = influence(table.length[e], table.horizon);
            k += xi * xi.transpose() * (w * table.volume[e]);
        }
    }
    ShapeTensor { k }
}

/// Nonlocal strain ε = [Σ ω Û⊗ξ V′] K⁻¹.
pub fn nonlocal_strain(i: usize, table: &NeighborTable, f: &FieldState, k_inv: &Mat2) -> Mat2 {
    let mut acc = Mat2::zeros();
    for e in table.range(i) {
        if table.intact(e) {
            let xi = table.xi[e];
            let b = BondKinematics::new(f, i, table.neighbors[e] as usize, &xi);
            let w = influence(table.length[e], table.horizon);
            acc += b.u_hat * xi.transpose() * (w * table.volume[e]);
        }
    }
    acc * k_inv
}

/// Nonlocal wryness κ = [Σ ω Ω ξ V′] K⁻¹, an in-plane vector.
pub fn nonlocal_wryness(i: usize, table: &NeighborTable, f: &FieldState, k_inv: &Mat2) -> Vec2 {
    let mut acc = Vec2::zeros();
    for e in table.range(i) {
        if table.intact(e) {
            let j = table.neighbors[e] as usize;
            let w = influence(table.length[e], table.horizon);
            acc += table.xi[e] * ((f.rot[j] - f.rot[i]) * w * table.volume[e]);
        }
    }
    k_inv.transpose() * acc
}

/// Nonlocal pressure gradient of `space`.
///
/// `k_inv` must be the inverse shape tensor of the same bond family.
/// Returns `None` for a fracture-space request at a non-fractured point.
pub fn nonlocal_pressure_gradient(
    i: usize,
    table: &NeighborTable,
    f: &FieldState,
    space: Space,
    k_inv: &Mat2,
) -> Option<Vec2> {
    if space == Space::Fracture && !f.fractured[i] {
        return None;
    }
    let p = match space {
        Space::Bulk => &f.pw,
        Space::Fracture => &f.pf,
    };
    let mut acc = Vec2::zeros();
    for e in table.range(i) {
        if in_family(space, table, &f.fractured, i, e) {
            let j = table.neighbors[e] as usize;
            let w = influence(table.length[e], table.horizon);
            acc += table.xi[e] * ((p[j] - p[i]) * w * table.volume[e]);
        }
    }
    Some(k_inv.transpose() * acc)
}

/// Nonlocal strain-rate tensor from velocities and angular velocities.
pub fn nonlocal_strain_rate(
    i: usize,
    table: &NeighborTable,
    f: &FieldState,
    k_inv: &Mat2,
) -> Mat2 {
    let mut acc = Mat2::zeros();
    for e in table.range(i) {
        if table.intact(e) {
            let j = table.neighbors[e] as usize;
            let xi = table.xi[e];
            let rate = composite(&(f.v[j] - f.v[i]), 0.5 * (f.spin[i] + f.spin[j]), &xi);
            let w = influence(table.length[e], table.horizon);
            acc += rate * xi.transpose() * (w * table.volume[e]);
        }
    }
    acc * k_inv
}

/// Volume change rate ν̇, the trace of the nonlocal strain rate.
pub fn volume_change_rate(i: usize, table: &NeighborTable, f: &FieldState, k_inv: &Mat2) -> f64 {
    nonlocal_strain_rate(i, table, f, k_inv).trace()
}
