//! Scenario documents: parsing, built-in expansion and validation.
//!
//! A document is TOML. Top-level keys describe the lattice and time span,
//! tables `crack`, `material`, `bc`, `output` and `solver` hold the rest.
//! When `scenario` names a built-in deck every other key is an override.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::constitutive::{FluidParams, SolidParams, StabilizationParams};
use crate::error::{ConfigError, Result};
use crate::grid::{CrackSegment, LayerSpec, Sides};

/// Standard gravity used to convert hydraulic conductivity (m/s²).
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Order of the two fractional-step phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ordering {
    FlowFirst,
    SolidFirst,
}

/// Number of flow sub-steps per solid step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substeps {
    /// Chosen each step from a stability bound.
    Auto,
    Fixed(u32),
}

/// How the bulk permeability was specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PermeabilityInput {
    /// Intrinsic permeability in m².
    Intrinsic,
    /// Hydraulic conductivity in m/s, converted with k = K μ_w / (ρ_w g).
    Conductivity(f64),
}

/// Solid, fluid and fracture parameters of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialDeck {
    pub solid: SolidParams,
    pub fluid: FluidParams,
    pub stab: StabilizationParams,
    pub permeability_input: PermeabilityInput,
    /// Flow disabled, zero pore pressure, dry density.
    pub dry: bool,
}

/// Boundary and initial conditions. Sides refer to δ-thick boundary layers.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditions {
    pub fixed_x: Sides,
    pub fixed_y: Sides,
    pub drained: Sides,
    /// Target pressure on drained layers (Pa).
    pub drained_pressure_pa: f64,
    /// Linear ramp duration from the initial pressure to the target (s).
    pub drained_ramp_s: f64,
    /// Layers receiving the tensile traction ramp.
    pub traction: Sides,
    pub traction_rate_pa_s: f64,
    pub traction_max_pa: f64,
    /// Injected line-source flux (m²/s) at the crack mouth.
    pub injection_rate_m2_s: f64,
    pub initial_pw_pa: f64,
    pub initial_pf_pa: f64,
    pub gravity: [f64; 2],
}

impl BoundaryConditions {
    pub fn layer_sides(&self) -> Sides {
        self.fixed_x | self.fixed_y | self.drained | self.traction
    }

    /// Traction magnitude min(rate·t, max).
    pub fn traction_at(&self, t: f64) -> f64 {
        (self.traction_rate_pa_s * t).min(self.traction_max_pa).max(0.0)
    }

    /// Drained-layer pressure at time `t`.
    pub fn drained_pressure_at(&self, t: f64) -> f64 {
        if self.drained_ramp_s <= 0.0 || t >= self.drained_ramp_s {
            self.drained_pressure_pa
        } else {
            let s = t / self.drained_ramp_s;
            self.initial_pw_pa + s * (self.drained_pressure_pa - self.initial_pw_pa)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    /// Snapshot cadence; zero writes only the initial and final snapshots.
    pub every_n_steps: u64,
    pub directory: Option<PathBuf>,
    pub timeseries_every_n_steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub ordering: Ordering,
    /// Capacity floor of the pressure updates (1/Pa).
    pub c_min: f64,
    /// Inertia multiplier for quasi-static decks.
    pub mass_scaling: f64,
    /// Mass-proportional damping rate (1/s).
    pub damping_per_s: f64,
    pub flow_substeps: Substeps,
    /// Ceiling of the automatic sub-step count; above it the space's
    /// mobility is scaled down to the stable value for the ceiling.
    pub max_flow_substeps: u32,
    pub min_horizon_ratio: f64,
}

/// Fully resolved and validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub horizon: f64,
    pub dt: f64,
    pub t_end: f64,
    pub thickness: f64,
    pub cracks: Vec<CrackSegment>,
    pub material: MaterialDeck,
    pub bc: BoundaryConditions,
    pub output: OutputConfig,
    pub solver: SolverSettings,
}

impl ScenarioConfig {
    pub fn width(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.dx
    }

    pub fn steps(&self) -> u64 {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as u64
    }

    /// Boundary layers of thickness δ on every side used by a condition.
    pub fn layers(&self) -> Vec<LayerSpec> {
        let used = self.bc.layer_sides();
        [Sides::LEFT, Sides::RIGHT, Sides::BOTTOM, Sides::TOP]
            .into_iter()
            .filter(|s| used.contains(*s))
            .map(|side| LayerSpec {
                side,
                thickness: self.horizon,
            })
            .collect()
    }

    /// Crack origin used by the diagnostics (start of the first crack).
    pub fn origin(&self) -> [f64; 2] {
        self.cracks
            .first()
            .map(|c| [c.a.x, c.a.y])
            .unwrap_or([0.0, 0.5 * self.height()])
    }

    /// Resolved deck as a scenario document.
    pub fn to_document(&self) -> ScenarioDocument {
        let m = &self.material;
        let (k_w_m2, hydraulic_conductivity_mps) = match m.permeability_input {
            PermeabilityInput::Intrinsic => (Some(m.fluid.k_w), None),
            PermeabilityInput::Conductivity(c) => (None, Some(c)),
        };
        ScenarioDocument {
            scenario: Some(self.name.clone()),
            nx: Some(self.nx),
            ny: Some(self.ny),
            dx_m: Some(self.dx),
            horizon_m: Some(self.horizon),
            dt_s: Some(self.dt),
            t_end_s: Some(self.t_end),
            thickness_m: Some(self.thickness),
            extends: Some(false),
            crack: Some(CrackDoc::Many(
                self.cracks
                    .iter()
                    .map(|c| CrackTable {
                        x0: c.a.x,
                        y0: c.a.y,
                        x1: c.b.x,
                        y1: c.b.y,
                    })
                    .collect(),
            )),
            material: Some(MaterialDoc {
                K_bulk_pa: Some(m.solid.k_bulk),
                mu_pa: Some(m.solid.mu),
                mu_c_pa: Some(m.solid.mu_c),
                length_scale_m: Some(m.solid.length_scale),
                rho_s: Some(m.solid.rho_s),
                rho_w: Some(m.fluid.rho_w),
                porosity0: Some(m.solid.porosity0),
                k_w_m2,
                hydraulic_conductivity_mps,
                mu_w_pas: Some(m.fluid.mu_w),
                s_a_pa: Some(m.fluid.s_a),
                vg_n: Some(m.fluid.n),
                vg_m: Some(m.fluid.m),
                G_stab: Some(m.stab.g),
                G_cr_npm: Some(m.stab.g_cr),
                d_cr: Some(m.stab.d_cr),
                micro_inertia: Some(m.solid.micro_inertia),
                dry: Some(m.dry),
            }),
            bc: Some(BcDoc {
                fixed_x: Some(side_names(self.bc.fixed_x)),
                fixed_y: Some(side_names(self.bc.fixed_y)),
                drained: Some(side_names(self.bc.drained)),
                drained_pressure_pa: Some(self.bc.drained_pressure_pa),
                drained_ramp_s: Some(self.bc.drained_ramp_s),
                traction: Some(side_names(self.bc.traction)),
                traction_rate_pa_s: Some(self.bc.traction_rate_pa_s),
                traction_max_pa: Some(self.bc.traction_max_pa),
                injection_rate_m2_s: Some(self.bc.injection_rate_m2_s),
                injection_rate_m2_min: None,
                initial_pw_pa: Some(self.bc.initial_pw_pa),
                initial_pf_pa: Some(self.bc.initial_pf_pa),
                gravity: Some(self.bc.gravity),
            }),
            output: Some(OutputDoc {
                every_n_steps: Some(self.output.every_n_steps),
                directory: self
                    .output
                    .directory
                    .as_ref()
                    .map(|p| p.to_string_lossy().into_owned()),
                timeseries_every_n_steps: Some(self.output.timeseries_every_n_steps),
            }),
            solver: Some(SolverDoc {
                ordering: Some(self.solver.ordering),
                c_min_per_pa: Some(self.solver.c_min),
                mass_scaling: Some(self.solver.mass_scaling),
                damping_per_s: Some(self.solver.damping_per_s),
                flow_substeps: Some(match self.solver.flow_substeps {
                    Substeps::Auto => SubstepsDoc::Word("auto".into()),
                    Substeps::Fixed(n) => SubstepsDoc::Count(n as i64),
                }),
                max_flow_substeps: Some(self.solver.max_flow_substeps as i64),
                min_horizon_ratio: Some(self.solver.min_horizon_ratio),
            }),
        }
    }

    /// TOML text of the resolved deck.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_document()).expect("scenario documents always serialize")
    }
}

fn side_names(s: Sides) -> Vec<String> {
    let mut out = Vec::new();
    for (flag, name) in SIDE_NAMES {
        if s.contains(flag) {
            out.push(name.to_string());
        }
    }
    out
}

const SIDE_NAMES: [(Sides, &str); 4] = [
    (Sides::LEFT, "left"),
    (Sides::RIGHT, "right"),
    (Sides::BOTTOM, "bottom"),
    (Sides::TOP, "top"),
];

// ==================== document form ====================

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrackTable {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CrackDoc {
    One(CrackTable),
    Many(Vec<CrackTable>),
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialDoc {
    pub K_bulk_pa: Option<f64>,
    pub mu_pa: Option<f64>,
    pub mu_c_pa: Option<f64>,
    pub length_scale_m: Option<f64>,
    pub rho_s: Option<f64>,
    pub rho_w: Option<f64>,
    pub porosity0: Option<f64>,
    pub k_w_m2: Option<f64>,
    pub hydraulic_conductivity_mps: Option<f64>,
    pub mu_w_pas: Option<f64>,
    pub s_a_pa: Option<f64>,
    pub vg_n: Option<f64>,
    pub vg_m: Option<f64>,
    pub G_stab: Option<f64>,
    pub G_cr_npm: Option<f64>,
    pub d_cr: Option<f64>,
    pub micro_inertia: Option<f64>,
    pub dry: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcDoc {
    pub fixed_x: Option<Vec<String>>,
    pub fixed_y: Option<Vec<String>>,
    pub drained: Option<Vec<String>>,
    pub drained_pressure_pa: Option<f64>,
    pub drained_ramp_s: Option<f64>,
    pub traction: Option<Vec<String>>,
    pub traction_rate_pa_s: Option<f64>,
    pub traction_max_pa: Option<f64>,
    pub injection_rate_m2_s: Option<f64>,
    pub injection_rate_m2_min: Option<f64>,
    pub initial_pw_pa: Option<f64>,
    pub initial_pf_pa: Option<f64>,
    pub gravity: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDoc {
    pub every_n_steps: Option<u64>,
    pub directory: Option<String>,
    pub timeseries_every_n_steps: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubstepsDoc {
    Count(i64),
    Word(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverDoc {
    pub ordering: Option<Ordering>,
    pub c_min_per_pa: Option<f64>,
    pub mass_scaling: Option<f64>,
    pub damping_per_s: Option<f64>,
    pub flow_substeps: Option<SubstepsDoc>,
    pub max_flow_substeps: Option<i64>,
    pub min_horizon_ratio: Option<f64>,
}

/// Raw scenario document; every key optional until validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub scenario: Option<String>,
    /// When false, `scenario` is only a label and no built-in deck is expanded.
    pub extends: Option<bool>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub dx_m: Option<f64>,
    pub horizon_m: Option<f64>,
    pub dt_s: Option<f64>,
    pub t_end_s: Option<f64>,
    pub thickness_m: Option<f64>,
    pub crack: Option<CrackDoc>,
    pub material: Option<MaterialDoc>,
    pub bc: Option<BcDoc>,
    pub output: Option<OutputDoc>,
    pub solver: Option<SolverDoc>,
}

macro_rules! overlay {
    ($base:expr, $top:expr; $($f:ident),* $(,)?) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl ScenarioDocument {
    /// Applies every key present in `top` over `self`.
    ///
    /// A new `dx_m` without `nx`/`ny` keeps the domain extent and recounts the
    /// lattice; a new `horizon_m` without `length_scale_m` moves the length
    /// scale with it.
    pub fn overlay(&mut self, top: &ScenarioDocument) {
        if let (Some(dx), None, None) = (top.dx_m, top.nx, top.ny) {
            if let (Some(old), Some(nx), Some(ny)) = (self.dx_m, self.nx, self.ny) {
                let count = |n: usize| ((n as f64 * old) / dx - 1e-6).ceil().max(1.0) as usize;
                self.nx = Some(count(nx));
                self.ny = Some(count(ny));
            }
        }
        let horizon_moved = top.horizon_m.is_some()
            && top
                .material
                .as_ref()
                .and_then(|m| m.length_scale_m)
                .is_none();
        overlay!(self, top; scenario, extends, nx, ny, dx_m, horizon_m, dt_s, t_end_s, thickness_m, crack);
        if let Some(m) = &top.material {
            let base = self.material.get_or_insert_with(Default::default);
            if m.k_w_m2.is_some() {
                base.hydraulic_conductivity_mps = None;
            }
            if m.hydraulic_conductivity_mps.is_some() {
                base.k_w_m2 = None;
            }
            if m.vg_n.is_some() && m.vg_m.is_none() {
                base.vg_m = None;
            }
            overlay!(base, m; K_bulk_pa, mu_pa, mu_c_pa, length_scale_m, rho_s, rho_w, porosity0,
                k_w_m2, hydraulic_conductivity_mps, mu_w_pas, s_a_pa, vg_n, vg_m, G_stab, G_cr_npm,
                d_cr, micro_inertia, dry);
        }
        if horizon_moved {
            let base = self.material.get_or_insert_with(Default::default);
            base.length_scale_m = top.horizon_m;
            base.micro_inertia = None;
        }
        if let Some(b) = &top.bc {
            let base = self.bc.get_or_insert_with(Default::default);
            if b.injection_rate_m2_min.is_some() {
                base.injection_rate_m2_s = None;
            }
            if b.injection_rate_m2_s.is_some() {
                base.injection_rate_m2_min = None;
            }
            overlay!(base, b; fixed_x, fixed_y, drained, drained_pressure_pa, drained_ramp_s,
                traction, traction_rate_pa_s, traction_max_pa, injection_rate_m2_s,
                injection_rate_m2_min, initial_pw_pa, initial_pf_pa, gravity);
        }
        if let Some(o) = &top.output {
            let base = self.output.get_or_insert_with(Default::default);
            overlay!(base, o; every_n_steps, directory, timeseries_every_n_steps);
        }
        if let Some(s) = &top.solver {
            let base = self.solver.get_or_insert_with(Default::default);
            overlay!(base, s; ordering, c_min_per_pa, mass_scaling, damping_per_s, flow_substeps,
                max_flow_substeps, min_horizon_ratio);
        }
    }
}

/// Every key a document must supply when it does not name a built-in deck.
pub const REQUIRED_KEYS: &[&str] = &[
    "nx",
    "ny",
    "dx_m",
    "horizon_m",
    "dt_s",
    "t_end_s",
    "material.K_bulk_pa",
    "material.mu_pa",
    "material.mu_c_pa",
    "material.rho_s",
    "material.rho_w",
    "material.porosity0",
    "material.k_w_m2 | material.hydraulic_conductivity_mps",
    "material.mu_w_pas",
    "material.s_a_pa",
    "material.vg_n",
    "material.G_stab",
    "material.G_cr_npm",
];

/// Parses, expands and validates a scenario document.
pub fn load_scenario_config(source: &str) -> Result<ScenarioConfig> {
    let doc: ScenarioDocument =
        toml::from_str(source).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
    resolve_document(&doc)
}

/// Expands a parsed document over its built-in deck (if any) and validates it.
pub fn resolve_document(doc: &ScenarioDocument) -> Result<ScenarioConfig> {
    let merged = match (&doc.scenario, doc.extends.unwrap_or(true)) {
        (Some(name), true) => {
            let mut base = crate::scenarios::builtin_document(name)?;
            base.overlay(doc);
            base
        }
        _ => doc.clone(),
    };
    validate(&merged)
}

fn parse_sides(names: &Option<Vec<String>>, key: &str, errs: &mut Vec<String>) -> Sides {
    let mut s = Sides::empty();
    for n in names.iter().flatten() {
        match SIDE_NAMES.iter().find(|(_, name)| name == &n.as_str()) {
            Some((flag, _)) => s |= *flag,
            None => errs.push(format!(
                "bc.{key}: unknown layer '{n}' (expected left, right, bottom or top)"
            )),
        }
    }
    s
}

fn validate(d: &ScenarioDocument) -> Result<ScenarioConfig> {
    let mut errs: Vec<String> = Vec::new();
    let mat = d.material.clone().unwrap_or_default();
    let bcd = d.bc.clone().unwrap_or_default();
    let out = d.output.clone().unwrap_or_default();
    let sol = d.solver.clone().unwrap_or_default();

    let mut missing = Vec::new();
    macro_rules! need {
        ($v:expr, $k:expr) => {
            match $v {
                Some(x) => x,
                None => {
                    missing.push($k.to_string());
                    Default::default()
                }
            }
        };
    }
    let nx: usize = need!(d.nx, "nx");
    let ny: usize = need!(d.ny, "ny");
    let dx: f64 = need!(d.dx_m, "dx_m");
    let horizon: f64 = need!(d.horizon_m, "horizon_m");
    let dt: f64 = need!(d.dt_s, "dt_s");
    let t_end: f64 = need!(d.t_end_s, "t_end_s");
    let k_bulk: f64 = need!(mat.K_bulk_pa, "material.K_bulk_pa");
    let mu: f64 = need!(mat.mu_pa, "material.mu_pa");
    let mu_c: f64 = need!(mat.mu_c_pa, "material.mu_c_pa");
    let rho_s: f64 = need!(mat.rho_s, "material.rho_s");
    let rho_w: f64 = need!(mat.rho_w, "material.rho_w");
    let porosity0: f64 = need!(mat.porosity0, "material.porosity0");
    let mu_w: f64 = need!(mat.mu_w_pas, "material.mu_w_pas");
    let s_a: f64 = need!(mat.s_a_pa, "material.s_a_pa");
    let vg_n: f64 = need!(mat.vg_n, "material.vg_n");
    let g_stab: f64 = need!(mat.G_stab, "material.G_stab");
    let g_cr: f64 = need!(mat.G_cr_npm, "material.G_cr_npm");
    let (k_w, permeability_input) = match (mat.k_w_m2, mat.hydraulic_conductivity_mps) {
        (Some(k), None) => (k, PermeabilityInput::Intrinsic),
        (None, Some(c)) => (
            c * mu_w / (rho_w * STANDARD_GRAVITY),
            PermeabilityInput::Conductivity(c),
        ),
        (Some(_), Some(_)) => {
            errs.push(
                "material: give either k_w_m2 or hydraulic_conductivity_mps, not both".into(),
            );
            (0.0, PermeabilityInput::Intrinsic)
        }
        (None, None) => {
            missing.push("material.k_w_m2 | material.hydraulic_conductivity_mps".into());
            (0.0, PermeabilityInput::Intrinsic)
        }
    };
    if !missing.is_empty() {
        let mut all = vec![format!("missing required keys: {}", missing.join(", "))];
        all.extend(errs);
        return Err(ConfigError::Invalid(all));
    }

    let thickness = d.thickness_m.unwrap_or(1.0);
    let length_scale = mat.length_scale_m.unwrap_or(horizon);
    let vg_m = mat.vg_m.unwrap_or_else(|| FluidParams::van_genuchten_m(vg_n));
    let micro_inertia = mat
        .micro_inertia
        .unwrap_or_else(|| SolidParams::default_micro_inertia(rho_s, length_scale));
    let min_ratio = sol.min_horizon_ratio.unwrap_or(3.0);

    let mut check = |ok: bool, msg: String| {
        if !ok {
            errs.push(msg);
        }
    };
    check(nx >= 1 && ny >= 1, format!("nx, ny must be at least 1 (got {nx} × {ny})"));
    check(dx > 0.0 && dx.is_finite(), format!("dx_m must be positive (got {dx})"));
    check(horizon > 0.0, format!("horizon_m must be positive (got {horizon})"));
    check(dt > 0.0 && dt.is_finite(), format!("dt_s must be positive (got {dt})"));
    check(t_end >= 0.0, format!("t_end_s must be non-negative (got {t_end})"));
    check(thickness > 0.0, format!("thickness_m must be positive (got {thickness})"));
    if dx > 0.0 {
        // 1% slack admits rounded spacings such as 0.067 m with δ = 0.2 m
        check(
            horizon / dx >= min_ratio * 0.99,
            format!(
                "horizon/spacing ratio {:.3} is below the minimum {min_ratio}",
                horizon / dx
            ),
        );
    }
    check(
        (length_scale - horizon).abs() <= 1e-9 * horizon.abs().max(1e-30),
        format!("horizon_m ({horizon}) must equal material.length_scale_m ({length_scale})"),
    );
    check(mu > 0.0, format!("material.mu_pa must be positive (got {mu})"));
    check(k_bulk > 0.0, format!("material.K_bulk_pa must be positive (got {k_bulk})"));
    check(mu_c >= 0.0, format!("material.mu_c_pa must be non-negative (got {mu_c})"));
    check(
        porosity0 > 0.0 && porosity0 < 1.0,
        format!("material.porosity0 must lie in (0, 1) (got {porosity0})"),
    );
    check(rho_s > 0.0 && rho_w > 0.0, "densities must be positive".into());
    check(mu_w > 0.0, format!("material.mu_w_pas must be positive (got {mu_w})"));
    check(k_w > 0.0, format!("bulk permeability must be positive (got {k_w})"));
    check(s_a > 0.0, format!("material.s_a_pa must be positive (got {s_a})"));
    check(vg_n > 1.0, format!("material.vg_n must exceed 1 (got {vg_n})"));
    check(vg_m > 0.0, format!("material.vg_m must be positive (got {vg_m})"));
    check(
        g_stab > 0.0 && g_stab <= 1.0,
        format!("material.G_stab must lie in (0, 1] (got {g_stab})"),
    );
    check(g_cr >= 0.0, format!("material.G_cr_npm must be non-negative (got {g_cr})"));
    let d_cr = mat.d_cr.unwrap_or(0.35);
    check(
        d_cr > 0.0 && d_cr < 1.0,
        format!("material.d_cr must lie in (0, 1) (got {d_cr})"),
    );
    check(micro_inertia > 0.0, "material.micro_inertia must be positive".into());
    let solid = SolidParams {
        k_bulk,
        mu,
        mu_c,
        length_scale,
        rho_s,
        porosity0,
        micro_inertia,
    };
    if k_bulk > 0.0 && mu > 0.0 {
        let nu = solid.poisson();
        check(
            nu < 0.25,
            format!("Poisson ratio {nu:.4} must be below 0.25 for a positive stabilization modulus"),
        );
    }

    let fixed_x = parse_sides(&bcd.fixed_x, "fixed_x", &mut errs);
    let fixed_y = parse_sides(&bcd.fixed_y, "fixed_y", &mut errs);
    let drained = parse_sides(&bcd.drained, "drained", &mut errs);
    let traction = parse_sides(&bcd.traction, "traction", &mut errs);
    let injection = match (bcd.injection_rate_m2_s, bcd.injection_rate_m2_min) {
        (Some(q), _) => q,
        (None, Some(q)) => q / 60.0,
        (None, None) => 0.0,
    };
    let initial_pw = bcd.initial_pw_pa.unwrap_or(0.0);
    let bc = BoundaryConditions {
        fixed_x,
        fixed_y,
        drained,
        drained_pressure_pa: bcd.drained_pressure_pa.unwrap_or(0.0),
        drained_ramp_s: bcd.drained_ramp_s.unwrap_or(0.0),
        traction,
        traction_rate_pa_s: bcd.traction_rate_pa_s.unwrap_or(0.0),
        traction_max_pa: bcd.traction_max_pa.unwrap_or(0.0),
        injection_rate_m2_s: injection,
        initial_pw_pa: initial_pw,
        initial_pf_pa: bcd.initial_pf_pa.unwrap_or(initial_pw),
        gravity: bcd.gravity.unwrap_or([0.0, 0.0]),
    };
    let mut check = |ok: bool, msg: String| {
        if !ok {
            errs.push(msg);
        }
    };
    check(injection >= 0.0, "bc.injection_rate must be non-negative".into());
    check(
        bc.traction_rate_pa_s >= 0.0 && bc.traction_max_pa >= 0.0,
        "bc traction rate and maximum must be non-negative".into(),
    );
    check(bc.drained_ramp_s >= 0.0, "bc.drained_ramp_s must be non-negative".into());
    let layer_rows = (horizon / dx - 1e-9).ceil() as usize;
    if !bc.layer_sides().is_empty() && nx > 0 && ny > 0 {
        check(
            2 * layer_rows < nx.min(ny),
            format!("domain of {nx} × {ny} points is too small for δ-thick boundary layers"),
        );
    }

    let cracks: Vec<CrackSegment> = match &d.crack {
        None => Vec::new(),
        Some(CrackDoc::One(c)) => vec![CrackSegment::new(c.x0, c.y0, c.x1, c.y1)],
        Some(CrackDoc::Many(v)) => v
            .iter()
            .map(|c| CrackSegment::new(c.x0, c.y0, c.x1, c.y1))
            .collect(),
    };
    for (k, c) in cracks.iter().enumerate() {
        check(c.length() > 0.0, format!("crack {k} has zero length"));
    }
    if injection > 0.0 {
        check(!cracks.is_empty(), "injection requires an initial crack".into());
    }

    let ordering = sol.ordering.unwrap_or(Ordering::FlowFirst);
    let c_min = sol.c_min_per_pa.unwrap_or(1e-8);
    let mass_scaling = sol.mass_scaling.unwrap_or(1.0);
    let damping = sol.damping_per_s.unwrap_or(0.0);
    let flow_substeps = match &sol.flow_substeps {
        None => Substeps::Auto,
        Some(SubstepsDoc::Word(w)) if w == "auto" => Substeps::Auto,
        Some(SubstepsDoc::Count(n)) if *n >= 1 && *n <= u32::MAX as i64 => Substeps::Fixed(*n as u32),
        Some(other) => {
            errs.push(format!(
                "solver.flow_substeps must be \"auto\" or a positive integer (got {other:?})"
            ));
            Substeps::Auto
        }
    };
    let max_substeps = sol.max_flow_substeps.unwrap_or(40);
    let mut check = |ok: bool, msg: String| {
        if !ok {
            errs.push(msg);
        }
    };
    check(
        (1..=u32::MAX as i64).contains(&max_substeps),
        format!("solver.max_flow_substeps must be a positive integer (got {max_substeps})"),
    );
    check(c_min > 0.0, format!("solver.c_min_per_pa must be positive (got {c_min})"));
    check(
        mass_scaling >= 1.0,
        format!("solver.mass_scaling must be at least 1 (got {mass_scaling})"),
    );
    check(damping >= 0.0, format!("solver.damping_per_s must be non-negative (got {damping})"));
    check(min_ratio > 0.0, "solver.min_horizon_ratio must be positive".into());

    if !errs.is_empty() {
        return Err(ConfigError::Invalid(errs));
    }
    Ok(ScenarioConfig {
        name: d.scenario.clone().unwrap_or_else(|| "custom".into()),
        nx,
        ny,
        dx,
        horizon,
        dt,
        t_end,
        thickness,
        cracks,
        material: MaterialDeck {
            solid,
            fluid: FluidParams {
                rho_w,
                mu_w,
                k_w,
                s_a,
                n: vg_n,
                m: vg_m,
            },
            stab: StabilizationParams {
                g: g_stab,
                g_cr,
                d_cr,
            },
            permeability_input,
            dry: mat.dry.unwrap_or(false),
        },
        bc,
        output: OutputConfig {
            every_n_steps: out.every_n_steps.unwrap_or(0),
            directory: out.directory.map(PathBuf::from),
            timeseries_every_n_steps: out.timeseries_every_n_steps.unwrap_or(1),
        },
        solver: SolverSettings {
            ordering,
            c_min,
            mass_scaling,
            damping_per_s: damping,
            flow_substeps,
            max_flow_substeps: max_substeps.clamp(1, u32::MAX as i64) as u32,
            min_horizon_ratio: min_ratio,
        },
    })
}
