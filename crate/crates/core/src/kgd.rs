//! Plane-strain hydraulic fracture driven by a line source (KGD geometry),
//! viscosity-dominated and with zero toughness and zero leak-off.
//!
//! Similarity form with Q₀ the total injection rate, μ′ = 12 μ_w and
//! E′ = E/(1 − ν²):
//!
//! * half-length ℓ(t) = γ (E′ Q₀³ t⁴ / μ′)^{1/6}, γ = 0.6152
//! * opening w(x, t) = w₀(t) (1 − (x/ℓ)²)^{2/3}
//! * mouth opening w₀ = A (μ′ Q₀³ t² / E′)^{1/6}, A = 1/(γ B)
//! * B = ∫₋₁¹ (1 − ρ²)^{2/3} dρ = √π Γ(5/3) / Γ(13/6)
//! * mouth net pressure p₀ = P E′ ε, ε = (μ′ / (E′ t))^{1/3}
//!
//! A follows from requiring the crack volume 2·∫₀^ℓ w dx to equal Q₀ t. P is
//! the elastic pressure at the centre of the profile above,
//! p(0) = (E′/2π) ∫₀^ℓ (−∂w/∂s)/s ds = (2 Γ(1/2) Γ(2/3) / (3 Γ(7/6))) · (A/γ) · E′ε / (2π).

use crate::config::ScenarioConfig;
use crate::error::ConfigError;
use crate::io::TimeseriesRecord;

pub const GAMMA: f64 = 0.6152;
/// √π Γ(5/3) / Γ(13/6).
pub const PROFILE_AREA: f64 = 1.478_348_319_559_880;
/// Γ(1/2) Γ(2/3) / Γ(7/6).
const PRESSURE_BETA: f64 = 2.587_109_559_229_79;

/// Mouth-opening prefactor A = 1/(γ B).
pub fn width_prefactor() -> f64 {
    1.0 / (GAMMA * PROFILE_AREA)
}

/// Mouth net-pressure prefactor P.
pub fn pressure_prefactor() -> f64 {
    2.0 * PRESSURE_BETA / 3.0 * width_prefactor() / GAMMA / (2.0 * std::f64::consts::PI)
}

/// Inputs of the similarity solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KgdParams {
    /// Injection rate into one wing of the mirrored problem (m²/s).
    pub q: f64,
    /// Plane-strain modulus (Pa).
    pub e_prime: f64,
    /// Fluid dynamic viscosity (Pa·s).
    pub mu_w: f64,
    /// Initial crack length added to the similarity length (m).
    pub initial_length: f64,
}

impl KgdParams {
    pub fn q_total(&self) -> f64 {
        2.0 * self.q
    }

    pub fn mu_prime(&self) -> f64 {
        12.0 * self.mu_w
    }
}

/// Length, mouth width and mouth net pressure at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KgdPoint {
    pub length: f64,
    pub width: f64,
    pub pressure: f64,
}

/// Similarity half-length ℓ(t) without the initial crack.
pub fn half_length(t: f64, p: &KgdParams) -> f64 {
    GAMMA * (p.e_prime * p.q_total().powi(3) * t.powi(4) / p.mu_prime()).powf(1.0 / 6.0)
}

/// Evaluates the oracle; at t = 0 the width is zero and the pressure infinite.
pub fn kgd_analytical_oracle(t: f64, p: &KgdParams) -> Result<KgdPoint, ConfigError> {
    if !(t >= 0.0) {
        return Err(ConfigError::Invalid(vec![format!(
            "oracle time must be non-negative (got {t})"
        )]));
    }
    let (q0, mu, e) = (p.q_total(), p.mu_prime(), p.e_prime);
    let width = width_prefactor() * (mu * q0.powi(3) * t * t / e).powf(1.0 / 6.0);
    let pressure = pressure_prefactor() * e * (mu / (e * t)).powf(1.0 / 3.0);
    Ok(KgdPoint {
        length: p.initial_length + half_length(t, p),
        width,
        pressure,
    })
}

/// Opening at distance `x` from the mouth.
pub fn opening(x: f64, t: f64, p: &KgdParams) -> f64 {
    let l = half_length(t, p);
    if t <= 0.0 || x.abs() >= l {
        return 0.0;
    }
    let w0 = width_prefactor() * (p.mu_prime() * p.q_total().powi(3) * t * t / p.e_prime).powf(1.0 / 6.0);
    w0 * (1.0 - (x / l).powi(2)).powf(2.0 / 3.0)
}

impl KgdParams {
    /// Oracle inputs of an injection deck.
    pub fn from_config(c: &ScenarioConfig) -> Self {
        Self {
            q: c.bc.injection_rate_m2_s,
            e_prime: c.material.solid.plane_strain_modulus(),
            mu_w: c.material.fluid.mu_w,
            initial_length: c.cracks.first().map(|k| k.length()).unwrap_or(0.0),
        }
    }
}

/// One row of an oracle comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub time: f64,
    pub oracle: KgdPoint,
    pub length: f64,
    pub width: f64,
    pub pressure: f64,
}

impl ComparisonRow {
    pub fn width_error(&self) -> f64 {
        relative_error(self.width, self.oracle.width)
    }

    pub fn pressure_error(&self) -> f64 {
        relative_error(self.pressure, self.oracle.pressure)
    }

    pub fn length_error(&self) -> f64 {
        relative_error(self.length, self.oracle.length)
    }
}

fn relative_error(sim: f64, reference: f64) -> f64 {
    ((sim - reference) / reference).abs()
}

/// Simulated series against the oracle, restricted to t ≥ `skip_fraction`·t_end.
#[derive(Debug, Clone, PartialEq)]
pub struct KgdComparison {
    pub rows: Vec<ComparisonRow>,
}

impl KgdComparison {
    pub fn new(c: &ScenarioConfig, series: &[TimeseriesRecord], skip_fraction: f64) -> Self {
        let p = KgdParams::from_config(c);
        let t0 = skip_fraction * c.t_end;
        let rows = series
            .iter()
            .filter(|r| r.time > 0.0 && r.time >= t0 - 1e-12 * c.t_end)
            .map(|r| ComparisonRow {
                time: r.time,
                oracle: kgd_analytical_oracle(r.time, &p).expect("non-negative time"),
                length: r.length,
                width: r.mouth_width,
                pressure: r.pf_mpa * 1e6,
            })
            .collect();
        Self { rows }
    }

    fn max_of(&self, f: impl Fn(&ComparisonRow) -> f64) -> f64 {
        self.rows.iter().map(f).fold(0.0, f64::max)
    }

    pub fn max_width_error(&self) -> f64 {
        self.max_of(ComparisonRow::width_error)
    }

    pub fn max_pressure_error(&self) -> f64 {
        self.max_of(ComparisonRow::pressure_error)
    }

    pub fn max_length_error(&self) -> f64 {
        self.max_of(ComparisonRow::length_error)
    }

    /// Plain-text table with one row per sample and the maxima.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:>10} {:>12} {:>12} {:>8} {:>12} {:>12} {:>8} {:>10} {:>10} {:>8}\n",
            "t_s", "w_oracle_m", "w_sim_m", "err_w", "p_oracle_pa", "p_sim_pa", "err_p", "L_oracle_m", "L_sim_m", "err_L"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:>10.4e} {:>12.4e} {:>12.4e} {:>8.3} {:>12.4e} {:>12.4e} {:>8.3} {:>10.4} {:>10.4} {:>8.3}\n",
                r.time,
                r.oracle.width,
                r.width,
                r.width_error(),
                r.oracle.pressure,
                r.pressure,
                r.pressure_error(),
                r.oracle.length,
                r.length,
                r.length_error()
            ));
        }
        s.push_str(&format!(
            "max relative error: width {:.3}, pressure {:.3}, length {:.3}\n",
            self.max_width_error(),
            self.max_pressure_error(),
            self.max_length_error()
        ));
        s
    }
}
