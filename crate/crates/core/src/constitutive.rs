//! Retention, permeability, micropolar elasticity and the stabilized
//! correspondence states.
//!
//! Planar conventions: the micro-rotation is a scalar about the out-of-plane
//! axis, so the wryness `κ` and couple stress `m` are in-plane vectors.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// Elastic and micropolar solid parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolidParams {
    /// Bulk modulus K (Pa).
    pub k_bulk: f64,
    /// Shear modulus μ (Pa).
    pub mu: f64,
    /// Micropolar shear modulus μ_c (Pa).
    pub mu_c: f64,
    /// Micropolar length scale l (m).
    pub length_scale: f64,
    /// Solid grain density ρ_s (kg/m³).
    pub rho_s: f64,
    /// Porosity ϕ₀.
    pub porosity0: f64,
    /// Micro-inertia per unit volume (kg/m).
    pub micro_inertia: f64,
}

impl SolidParams {
    pub fn lambda(&self) -> f64 {
        self.k_bulk - 2.0 * self.mu / 3.0
    }

    pub fn poisson(&self) -> f64 {
        (3.0 * self.k_bulk - 2.0 * self.mu) / (2.0 * (3.0 * self.k_bulk + self.mu))
    }

    pub fn young(&self) -> f64 {
        9.0 * self.k_bulk * self.mu / (3.0 * self.k_bulk + self.mu)
    }

    /// E′ = E / (1 − ν²).
    pub fn plane_strain_modulus(&self) -> f64 {
        let nu = self.poisson();
        self.young() / (1.0 - nu * nu)
    }

    /// Dilatational wave speed for a given density.
    pub fn p_wave_speed(&self, rho: f64) -> f64 {
        ((self.k_bulk + 4.0 * self.mu / 3.0) / rho).sqrt()
    }

    /// Default micro-inertia ρ_s l² / 2.
    pub fn default_micro_inertia(rho_s: f64, length_scale: f64) -> f64 {
        0.5 * rho_s * length_scale * length_scale
    }
}

/// Pore-water parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidParams {
    /// Water density ρ_w (kg/m³).
    pub rho_w: f64,
    /// Dynamic viscosity μ_w (Pa·s).
    pub mu_w: f64,
    /// Intrinsic permeability k_w (m²).
    pub k_w: f64,
    /// Air-entry parameter s_a (Pa).
    pub s_a: f64,
    pub n: f64,
    pub m: f64,
}

impl FluidParams {
    pub fn van_genuchten_m(n: f64) -> f64 {
        1.0 - 1.0 / n
    }
}

/// Stabilization and fracture thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizationParams {
    /// Stabilization coefficient G.
    pub g: f64,
    /// Critical energy release rate G_cr (N/m).
    pub g_cr: f64,
    /// Critical damage d_cr.
    pub d_cr: f64,
}

/// Bulk pore space or fracture space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    Bulk,
    Fracture,
}

/// Mixture density (1 − ϕ) ρ_s + S_r ϕ ρ_w.
pub fn mixture_density(porosity: f64, s_r: f64, rho_s: f64, rho_w: f64) -> f64 {
    (1.0 - porosity) * rho_s + s_r * porosity * rho_w
}

/// Saturation and its pressure derivative from the retention curve.
pub fn retention(p_w: f64, f: &FluidParams) -> (f64, f64) {
    if p_w >= 0.0 {
        return (1.0, 0.0);
    }
    let x = -p_w / f.s_a;
    let xn = x.powf(f.n);
    let base = 1.0 + xn;
    let s = base.powf(-f.m);
    // dS/dp = dS/dx · dx/dp with dx/dp = −1/s_a
    let ds_dx = -f.m * base.powf(-f.m - 1.0) * f.n * xn / x;
    (s, -ds_dx / f.s_a)
}

/// Relative permeability S^½ [1 − (1 − S^{1/m})^m]².
pub fn relative_permeability(s: f64, m: f64) -> f64 {
    if s >= 1.0 {
        return 1.0;
    }
    if s <= 0.0 {
        return 0.0;
    }
    let inner = 1.0 - (1.0 - s.powf(1.0 / m)).powf(m);
    (s.sqrt() * inner * inner).clamp(0.0, 1.0)
}

/// Intrinsic and relative permeability of a space: `(k, k_r)`.
///
/// Fracture space follows the cubic law k = a_f² / 12.
pub fn permeability(space: Space, s: f64, m: f64, k_w: f64, a_f: f64) -> (f64, f64) {
    let k_r = relative_permeability(s, m);
    match space {
        Space::Bulk => (k_w, k_r),
        Space::Fracture => (a_f * a_f / 12.0, k_r),
    }
}

/// Effective stress and couple stress of the micropolar elastic model.
///
/// `eps[(i, j)] = ∂u_i/∂x_j`.
pub fn micropolar_stress_couple(eps: &Mat2, kappa: &Vec2, p: &SolidParams) -> (Mat2, Vec2) {
    let lam = p.lambda();
    let tr = eps.trace();
    let sigma =
        Mat2::identity() * (lam * tr) + eps * (p.mu + p.mu_c) + eps.transpose() * (p.mu - p.mu_c);
    let couple = kappa * (0.5 * p.mu * p.length_scale * p.length_scale);
    (sigma, couple)
}

/// Stabilization stiffness D = E(1−4ν) / (4πδ²(1−ν−2ν²)).
pub fn stabilization_modulus(young: f64, nu: f64, horizon: f64) -> f64 {
    young * (1.0 - 4.0 * nu) / (4.0 * PI * horizon * horizon * (1.0 - nu - 2.0 * nu * nu))
}

/// C₁ = 12 D / |ξ|³.
pub fn c1(d: f64, len: f64) -> f64 {
    12.0 * d / (len * len * len)
}

/// C₂ = D / |ξ|.
pub fn c2(d: f64, len: f64) -> f64 {
    d / len
}

/// C₃ (bulk) or C₄ (fracture): 6 k / (π δ⁴).
pub fn c_flow(k: f64, horizon: f64) -> f64 {
    6.0 * k / (PI * horizon.powi(4))
}

/// Normalizer ω₀ of the stabilization terms.
///
/// Weighted mean of the influence function over the bond family, with `|ξ| V′`
/// as the weights. Equals one for unit influence.
pub fn stabilization_normalizer(sum_w_len_vol: f64, sum_len_vol: f64) -> f64 {
    if sum_len_vol > 0.0 {
        sum_w_len_vol / sum_len_vol
    } else {
        1.0
    }
}

/// Out-of-plane rotation applied to an in-plane vector: θ ẑ × ξ.
#[inline]
pub fn rotate(theta: f64, xi: &Vec2) -> Vec2 {
    Vec2::new(-theta * xi.y, theta * xi.x)
}

/// Per-point correspondence data needed to evaluate bond states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointStates {
    /// K⁻¹, or zero when the point is kinematically deficient.
    pub k_inv: Mat2,
    pub eps: Mat2,
    pub kappa: Vec2,
    pub stress: Mat2,
    pub couple: Vec2,
    /// G / ω₀.
    pub g_norm: f64,
    /// Stabilization modulus D.
    pub d_stab: f64,
}

/// Stabilized effective force state T̄ and moment state M of one bond.
///
/// `u_hat` is the composite displacement state and `omega` the micro-rotation
/// state of the bond, both seen from this point.
pub fn stabilized_solid_states(
    s: &PointStates,
    xi: &Vec2,
    len: f64,
    u_hat: &Vec2,
    omega: f64,
    w: f64,
) -> (Vec2, f64) {
    let kx = s.k_inv * xi;
    let r1 = u_hat - s.eps * xi;
    let r2 = omega - s.kappa.dot(xi);
    let t = s.stress * kx * w + r1 * (s.g_norm * c1(s.d_stab, len) * w);
    let m = w * s.couple.dot(&kx) + s.g_norm * c2(s.d_stab, len) * w * r2;
    (t, m)
}

/// Fluid force state ω p K⁻¹ ξ.
pub fn fluid_force_state(k_inv: &Mat2, xi: &Vec2, p: f64, w: f64) -> Vec2 {
    (k_inv * xi) * (w * p)
}

/// Darcy flux q = −(k_r k / μ_w) ∇Φ.
pub fn darcy_flux(mobility: f64, grad: &Vec2) -> Vec2 {
    -grad * mobility
}

/// Stabilized flow state of one bond (mass flux density, kg/(m⁶ s)).
///
/// `mobility` is k_r k / μ_w of the space, `phi` the pressure state and
/// `grad` the nonlocal gradient at this point. The stabilization acts on the
/// residual R_w = Φ − ∇Φ·ξ with coefficient (G/ω₀) C ρ_w k_r / μ_w, scaled by
/// 1/|ξ| and signed so that it diffuses non-affine pressure modes.
#[allow(clippy::too_many_arguments)]
pub fn stabilized_flow_state(
    k_inv: &Mat2,
    xi: &Vec2,
    len: f64,
    grad: &Vec2,
    mobility: f64,
    rho_w: f64,
    phi: f64,
    g_norm: f64,
    horizon: f64,
    w: f64,
) -> f64 {
    let q = darcy_flux(mobility, grad);
    let r_w = phi - grad.dot(xi);
    rho_w * w * q.dot(&(k_inv * xi)) - g_norm * c_flow(mobility, horizon) * rho_w * w * r_w / len
}
