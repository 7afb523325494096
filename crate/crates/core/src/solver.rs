//! Right-hand sides of the four balances and the explicit fractional step.
//!
//! One step runs a flow phase (bulk and fracture pressures, leak-off) and a
//! solid phase (correspondence states, leapfrog update, bond energy and
//! breakage). Each phase gathers from the committed field buffer and writes its
//! own fields into the scratch buffer; the written fields are swapped in when
//! the phase ends. Velocities live at half steps.

use std::f64::consts::PI;

use log::{debug, trace, warn};

use crate::config::{Ordering, ScenarioConfig, Substeps};
use crate::constitutive::{
    c1, c2, micropolar_stress_couple, mixture_density, relative_permeability, retention, rotate,
    stabilization_modulus, stabilization_normalizer, Mat2, Space, Vec2,
};
use crate::error::SolverError;
use crate::fracture::{
    bond_aperture, critical_energy_density, damage, energy_increment, leak_off,
    promote_fractured_points, update_bond_state,
};
use crate::grid::{build_neighbor_lists, NeighborTable, PointSet, Region, Sides};
use crate::kinematics::{composite, influence, shape_tensor, FieldState};

/// Time-integration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeIntegrationParams {
    pub dt: f64,
    pub ordering: Ordering,
    /// Capacity floor (1/Pa).
    pub c_min: f64,
    pub mass_scaling: f64,
    pub damping_per_s: f64,
    pub flow_substeps: Substeps,
    pub max_flow_substeps: u32,
}

impl TimeIntegrationParams {
    pub fn from_config(c: &ScenarioConfig) -> Self {
        Self {
            dt: c.dt,
            ordering: c.solver.ordering,
            c_min: c.solver.c_min,
            mass_scaling: c.solver.mass_scaling,
            damping_per_s: c.solver.damping_per_s,
            flow_substeps: c.solver.flow_substeps,
            max_flow_substeps: c.solver.max_flow_substeps,
        }
    }
}

/// Committed state of a run.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub time: f64,
    pub step: u64,
    pub fields: FieldState,
    /// Scratch buffer written by the phases.
    pub next: FieldState,
    pub table: NeighborTable,
}

/// Counters reported in run metadata.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunCounters {
    /// Pressure updates where the capacity floor replaced the retention slope.
    pub capacity_floor_hits: u64,
    pub max_bulk_substeps: u32,
    pub max_fracture_substeps: u32,
    /// Flow phases whose mobility was scaled down to honour the sub-step ceiling.
    pub limited_flow_phases: u64,
}

/// A configured simulation with its caches.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: ScenarioConfig,
    pub points: PointSet,
    pub state: SimulationState,
    pub params: TimeIntegrationParams,
    pub counters: RunCounters,
    /// Fractured points receiving the injected flux.
    pub mouth: Vec<usize>,
    /// Critical bond energy W_cr.
    pub w_cr: f64,
    d_stab: f64,
    /// Isotropic initial effective stress.
    sigma0: f64,
    rho: Vec<f64>,
    inertia: f64,
    c1e: Vec<f64>,
    c2e: Vec<f64>,
    cfe: Vec<f64>,
    // bulk correspondence caches
    shape_dirty: Vec<bool>,
    kinv: Vec<Mat2>,
    deficient: Vec<bool>,
    gnorm: Vec<f64>,
    eps: Vec<Mat2>,
    kappa: Vec<Vec2>,
    amat: Vec<Mat2>,
    bvec: Vec<Vec2>,
    sw: Vec<f64>,
    sf: Vec<f64>,
    // per-bond force cache for the energy update
    bond_force: Vec<Vec2>,
    bond_moment: Vec<f64>,
    // flow caches
    grad_w: Vec<Vec2>,
    kinv_f: Vec<Mat2>,
    lam: Vec<f64>,
    qflux: Vec<Vec2>,
    qs_sum: Vec<f64>,
    source: Vec<f64>,
    rate: Vec<f64>,
    traction_h: [f64; 4],
}

const SIDES: [Sides; 4] = [Sides::LEFT, Sides::RIGHT, Sides::BOTTOM, Sides::TOP];

fn side_slot(s: Sides) -> usize {
    SIDES.iter().position(|x| *x == s).expect("single side")
}

impl Simulation {
    /// Builds the lattice, bonds, initial fields and caches of a scenario.
    pub fn new(config: ScenarioConfig) -> Result<Self, crate::error::ConfigError> {
        let layers = config.layers();
        let mut points =
            PointSet::from_counts(config.nx, config.ny, config.dx, config.thickness, &layers)?;
        let table = build_neighbor_lists(&mut points, config.horizon, &config.cracks);
        Ok(Self::from_parts(config, points, table))
    }

    /// Assembles a simulation from an existing lattice and bond table.
    pub fn from_parts(config: ScenarioConfig, points: PointSet, table: NeighborTable) -> Self {
        let n = points.len();
        let m = table.neighbors.len();
        let nb = table.bond_count();
        let mat = &config.material;
        let d_stab = stabilization_modulus(
            mat.solid.young(),
            mat.solid.poisson(),
            config.horizon,
        );
        let w_cr = critical_energy_density(mat.stab.g_cr, config.horizon);
        let h4 = config.horizon.powi(4);
        let mut c1e = Vec::with_capacity(m);
        let mut c2e = Vec::with_capacity(m);
        let mut cfe = Vec::with_capacity(m);
        for e in 0..m {
            let len = table.length[e];
            let w = influence(len, config.horizon);
            c1e.push(w * c1(d_stab, len));
            c2e.push(w * c2(d_stab, len));
            cfe.push(w * 6.0 / (PI * h4 * len));
        }
        let params = TimeIntegrationParams::from_config(&config);
        let mut fields = FieldState::zeros(n);
        let dry = mat.dry;
        let fluid = mat.fluid;
        let p0 = if dry { 0.0 } else { config.bc.initial_pw_pa };
        let pf0 = if dry { 0.0 } else { config.bc.initial_pf_pa };
        let s0 = if dry { 0.0 } else { retention(p0, &fluid).0 };
        for i in 0..n {
            fields.pw[i] = p0;
            fields.pf[i] = p0;
            fields.sr[i] = s0;
            fields.srf[i] = s0;
        }
        // initial crack faces: points with a cut nearest-neighbor bond
        let near = 1.01 * config.dx;
        for i in 0..n {
            if points.crack_face[i]
                && table
                    .range(i)
                    .any(|e| !table.intact(e) && table.length[e] <= near)
            {
                fields.fractured[i] = true;
                fields.pf[i] = pf0;
                fields.srf[i] = if dry { 0.0 } else { retention(pf0, &fluid).0 };
            }
        }
        for i in 0..n {
            fields.damage[i] = damage(i, &table);
        }
        let mouth = mouth_points(&config, &points, &fields);
        let mut source = vec![0.0; n];
        if config.bc.injection_rate_m2_s > 0.0 && !mouth.is_empty() && !dry {
            let area = config.dx * config.dx;
            for &k in &mouth {
                source[k] = config.bc.injection_rate_m2_s / (mouth.len() as f64 * area);
            }
        }
        let rho = (0..n)
            .map(|i| {
                params.mass_scaling
                    * mixture_density(
                        mat.solid.porosity0,
                        fields.sr[i],
                        mat.solid.rho_s,
                        fluid.rho_w,
                    )
            })
            .collect();
        let mut traction_h = [0.0; 4];
        for (slot, side) in SIDES.iter().enumerate() {
            let rows = (0..n)
                .filter(|&k| points.in_layer(k, *side))
                .count();
            let per_row = if side.intersects(Sides::LEFT | Sides::RIGHT) {
                points.ny
            } else {
                points.nx
            };
            traction_h[slot] = rows as f64 / per_row.max(1) as f64 * config.dx;
        }
        let sigma0 = if dry { 0.0 } else { s0 * p0 };
        let next = fields.clone();
        let mut sim = Self {
            inertia: params.mass_scaling * mat.solid.micro_inertia,
            params,
            counters: RunCounters::default(),
            mouth,
            w_cr,
            d_stab,
            sigma0,
            rho,
            c1e,
            c2e,
            cfe,
            shape_dirty: vec![true; n],
            kinv: vec![Mat2::zeros(); n],
            deficient: vec![true; n],
            gnorm: vec![mat.stab.g; n],
            eps: vec![Mat2::zeros(); n],
            kappa: vec![Vec2::zeros(); n],
            amat: vec![Mat2::zeros(); n],
            bvec: vec![Vec2::zeros(); n],
            sw: vec![0.0; n],
            sf: vec![0.0; n],
            bond_force: vec![Vec2::zeros(); nb],
            bond_moment: vec![0.0; nb],
            grad_w: vec![Vec2::zeros(); n],
            kinv_f: vec![Mat2::zeros(); n],
            lam: vec![0.0; n],
            qflux: vec![Vec2::zeros(); n],
            qs_sum: vec![0.0; n],
            source,
            rate: vec![0.0; n],
            traction_h,
            state: SimulationState {
                time: 0.0,
                step: 0,
                fields,
                next,
                table,
            },
            points,
            config,
        };
        sim.refresh_shapes();
        sim.apply_boundary_conditions();
        sim
    }

    pub fn fields(&self) -> &FieldState {
        &self.state.fields
    }

    pub fn fields_mut(&mut self) -> &mut FieldState {
        &mut self.state.fields
    }

    pub fn table(&self) -> &NeighborTable {
        &self.state.table
    }

    pub fn d_stab(&self) -> f64 {
        self.d_stab
    }

    pub fn density(&self, i: usize) -> f64 {
        self.rho[i]
    }

    pub fn micro_inertia(&self) -> f64 {
        self.inertia
    }

    /// Recomputes K⁻¹ and ω₀ for points whose bond family changed.
    fn refresh_shapes(&mut self) {
        let g = self.config.material.stab.g;
        let t = &self.state.table;
        for i in 0..self.points.len() {
            if !self.shape_dirty[i] {
                continue;
            }
            self.shape_dirty[i] = false;
            let s = shape_tensor(i, t, &[], Space::Bulk);
            match s.inverse() {
                Some(inv) => {
                    self.kinv[i] = inv;
                    self.deficient[i] = false;
                }
                None => {
                    self.kinv[i] = Mat2::zeros();
                    self.deficient[i] = true;
                }
            }
            let (mut wl, mut l) = (0.0, 0.0);
            for e in t.range(i) {
                if t.intact(e) {
                    let lv = t.length[e] * t.volume[e];
                    wl += influence(t.length[e], t.horizon) * lv;
                    l += lv;
                }
            }
            self.gnorm[i] = g / stabilization_normalizer(wl, l);
        }
    }

    /// Whether point `i` is kinematically deficient.
    pub fn is_deficient(&self, i: usize) -> bool {
        self.deficient[i]
    }

    // ==================== boundary conditions ====================

    /// Writes essential conditions into the committed fields.
    pub fn apply_boundary_conditions(&mut self) {
        let t = self.state.time;
        let bc = &self.config.bc;
        let f = &mut self.state.fields;
        for i in 0..self.points.len() {
            let sides = self.points.regions[i].sides();
            if sides.is_empty() {
                continue;
            }
            if sides.intersects(bc.fixed_x) {
                f.u[i].x = 0.0;
                f.v[i].x = 0.0;
            }
            if sides.intersects(bc.fixed_y) {
                f.u[i].y = 0.0;
                f.v[i].y = 0.0;
            }
            if !self.config.material.dry && sides.intersects(bc.drained) {
                let p = bc.drained_pressure_at(t);
                f.pw[i] = p;
                f.sr[i] = retention(p, &self.config.material.fluid).0;
                if f.fractured[i] {
                    f.pf[i] = p;
                    f.srf[i] = f.sr[i];
                }
            }
        }
    }

    /// Body force (N/m³) on point `i` from traction ramps at time `t`.
    pub fn traction_body_force(&self, i: usize, t: f64) -> Vec2 {
        let bc = &self.config.bc;
        let sides = self.points.regions[i].sides() & bc.traction;
        if sides.is_empty() {
            return Vec2::zeros();
        }
        let s = bc.traction_at(t);
        let mut b = Vec2::zeros();
        for side in SIDES {
            if sides.contains(side) {
                let h = self.traction_h[side_slot(side)];
                let normal = match side {
                    Sides::LEFT => Vec2::new(-1.0, 0.0),
                    Sides::RIGHT => Vec2::new(1.0, 0.0),
                    Sides::BOTTOM => Vec2::new(0.0, -1.0),
                    _ => Vec2::new(0.0, 1.0),
                };
                b += normal * (s / h);
            }
        }
        b
    }

    // ==================== solid phase ====================

    /// Correspondence fields and per-point stress operators from `f`.
    fn solid_states(&mut self, f: &FieldState) {
        let mat = &self.config.material;
        let t = &self.state.table;
        let dry = mat.dry;
        for i in 0..f.len() {
            if !self.deficient[i] {
                let mut ae = Mat2::zeros();
                let mut ak = Vec2::zeros();
                for e in t.range(i) {
                    if !t.intact(e) {
                        continue;
                    }
                    let j = t.neighbors[e] as usize;
                    let xi = t.xi[e];
                    let wv = influence(t.length[e], t.horizon) * t.volume[e];
                    let uh = composite(&(f.u[j] - f.u[i]), 0.5 * (f.rot[i] + f.rot[j]), &xi);
                    ae += uh * xi.transpose() * wv;
                    ak += xi * ((f.rot[j] - f.rot[i]) * wv);
                }
                let k_inv = self.kinv[i];
                self.eps[i] = ae * k_inv;
                self.kappa[i] = k_inv.transpose() * ak;
            }
            let (mut sigma, couple) = micropolar_stress_couple(&self.eps[i], &self.kappa[i], &mat.solid);
            sigma += Mat2::identity() * self.sigma0;
            self.amat[i] = sigma * self.kinv[i];
            self.bvec[i] = self.kinv[i] * couple;
            if dry {
                self.sw[i] = 0.0;
                self.sf[i] = 0.0;
            } else {
                self.sw[i] = f.sr[i] * f.pw[i];
                self.sf[i] = f.srf[i] * f.pf[i];
            }
        }
    }

    /// Whether the fracture fluid state applies to the bond `i – j`.
    #[inline]
    fn fracture_pair(&self, f: &FieldState, i: usize, j: usize) -> bool {
        let d_cr = self.config.material.stab.d_cr;
        f.fractured[i] && f.fractured[j] && f.damage[i] > d_cr && f.damage[j] > d_cr
    }

    /// Internal force and moment densities at point `i` (N/m³, N/m²).
    ///
    /// Requires [`Self::solid_states`] for the same snapshot. When
    /// `store` is set, bond force differences of forward bonds are cached.
    fn point_forces(&mut self, f: &FieldState, i: usize, store: bool) -> (Vec2, f64) {
        let t = &self.state.table;
        let mut force = Vec2::zeros();
        let mut moment = 0.0;
        let (ai, bi, ei, ki, gi) = (self.amat[i], self.bvec[i], self.eps[i], self.kappa[i], self.gnorm[i]);
        let kinv_i = self.kinv[i];
        for e in t.range(i) {
            let j = t.neighbors[e] as usize;
            let xi = t.xi[e];
            let vol = t.volume[e];
            let (si, sj) = if self.fracture_pair(f, i, j) {
                (self.sf[i], self.sf[j])
            } else {
                (self.sw[i], self.sw[j])
            };
            let fluid = kinv_i * xi * si + self.kinv[j] * xi * sj;
            let u = f.u[j] - f.u[i];
            let mut eff = Vec2::zeros();
            let mut dm = 0.0;
            if t.intact(e) {
                let om = f.rot[j] - f.rot[i];
                let uh = composite(&u, 0.5 * (f.rot[i] + f.rot[j]), &xi);
                let gj = self.gnorm[j];
                eff = (ai + self.amat[j]) * xi
                    + (((uh - ei * xi) * gi) + ((uh - self.eps[j] * xi) * gj)) * self.c1e[e];
                dm = (bi + self.bvec[j]).dot(&xi)
                    + self.c2e[e] * (gi * (om - ki.dot(&xi)) + gj * (om - self.kappa[j].dot(&xi)));
                if store && i < j {
                    let id = t.bond[e] as usize;
                    self.bond_force[id] = eff;
                    self.bond_moment[id] = dm;
                }
            }
            let total = eff - fluid;
            force += total * vol;
            let y = xi + u;
            moment += (dm + 0.5 * y.perp(&total)) * vol;
        }
        (force, moment)
    }

    /// Accelerations ü and ω̈ of every point for the committed snapshot,
    /// including body forces and traction loads.
    pub fn momentum_moment_rhs(&mut self) -> (Vec<Vec2>, Vec<f64>) {
        let f = std::mem::take(&mut self.state.fields);
        self.refresh_shapes();
        self.solid_states(&f);
        let mut acc = Vec::with_capacity(f.len());
        let mut ang = Vec::with_capacity(f.len());
        for i in 0..f.len() {
            let (fo, mo) = self.point_forces(&f, i, false);
            acc.push(self.acceleration(i, fo, self.state.time));
            ang.push(mo / self.inertia);
        }
        self.state.fields = f;
        (acc, ang)
    }

    fn acceleration(&self, i: usize, force: Vec2, t: f64) -> Vec2 {
        let g = Vec2::new(self.config.bc.gravity[0], self.config.bc.gravity[1]);
        (force + self.traction_body_force(i, t)) / self.rho[i] + g
    }

    fn solid_phase(&mut self) {
        let dt = self.params.dt;
        let c = self.params.damping_per_s;
        let (keep, gain) = ((1.0 - 0.5 * c * dt), 1.0 / (1.0 + 0.5 * c * dt));
        let f = std::mem::take(&mut self.state.fields);
        let mut next = std::mem::take(&mut self.state.next);
        self.refresh_shapes();
        self.solid_states(&f);
        let time = self.state.time;
        for i in 0..f.len() {
            let (fo, mo) = self.point_forces(&f, i, true);
            let a = self.acceleration(i, fo, time);
            let alpha = mo / self.inertia;
            next.v[i] = (f.v[i] * keep + a * dt) * gain;
            next.spin[i] = (f.spin[i] * keep + alpha * dt) * gain;
        }
        let bc = &self.config.bc;
        for i in 0..f.len() {
            if let Region::Layer(s) = self.points.regions[i] {
                if s.intersects(bc.fixed_x) {
                    next.v[i].x = 0.0;
                }
                if s.intersects(bc.fixed_y) {
                    next.v[i].y = 0.0;
                }
            }
            next.u[i] = f.u[i] + next.v[i] * dt;
            next.rot[i] = f.rot[i] + next.spin[i] * dt;
        }
        self.state.fields = f;
        std::mem::swap(&mut self.state.fields.u, &mut next.u);
        std::mem::swap(&mut self.state.fields.v, &mut next.v);
        std::mem::swap(&mut self.state.fields.rot, &mut next.rot);
        std::mem::swap(&mut self.state.fields.spin, &mut next.spin);
        self.state.next = next;
        self.commit_bonds();
    }

    /// Bond energy, breakage, damage, crack width and promotion after the
    /// kinematic update.
    ///
    /// The work increment pairs the step's forces with the mean of the old
    /// and new half-step velocities, so kinetic energy plus bond work is a
    /// discrete invariant of the undamped leapfrog.
    fn commit_bonds(&mut self) {
        let w_cr = self.w_cr;
        let half_dt = 0.5 * self.params.dt;
        let f = &mut self.state.fields;
        let old = &self.state.next;
        let t = &mut self.state.table;
        let mut broke = false;
        for id in 0..t.bond_count() {
            if !t.ledger.intact[id] {
                continue;
            }
            let (i, j) = t.ends[id];
            let (i, j) = (i as usize, j as usize);
            let xi = t.xi[t.forward[id] as usize];
            let dv = (f.v[j] + old.v[j] - f.v[i] - old.v[i]) * half_dt;
            let ds = (f.spin[j] + old.spin[j] - f.spin[i] - old.spin[i]) * half_dt;
            let mean = 0.5 * (f.spin[i] + old.spin[i] + f.spin[j] + old.spin[j]) * half_dt;
            let inc = energy_increment(&self.bond_force[id], self.bond_moment[id], &composite(&dv, mean, &xi), ds);
            if update_bond_state(&mut t.ledger, id, inc, w_cr) {
                self.shape_dirty[i] = true;
                self.shape_dirty[j] = true;
                broke = true;
            }
        }
        if broke {
            for i in 0..f.len() {
                if self.shape_dirty[i] {
                    f.damage[i] = damage(i, t);
                }
            }
        }
        // apertures and widths of points with broken bonds
        for i in 0..f.len() {
            if f.damage[i] <= 0.0 {
                continue;
            }
            let (mut all, mut open) = (0.0, 0.0);
            for e in t.range(i) {
                let wv = influence(t.length[e], t.horizon) * t.volume[e];
                all += wv;
                if !t.intact(e) {
                    let j = t.neighbors[e] as usize;
                    let xi = t.xi[e];
                    let uh = composite(&(f.u[j] - f.u[i]), 0.5 * (f.rot[i] + f.rot[j]), &xi);
                    let c = bond_aperture(&xi, t.length[e], &uh);
                    if i < j {
                        t.ledger.aperture[t.bond[e] as usize] = c;
                    }
                    open += c * t.volume[e];
                }
            }
            f.af[i] = if all > 0.0 { open / all } else { 0.0 };
        }
        if broke {
            let fluid = (!self.config.material.dry).then_some(&self.config.material.fluid);
            let new = promote_fractured_points(f, t, self.config.material.stab.d_cr, fluid);
            if !new.is_empty() {
                debug!("step {}: {} points promoted", self.state.step, new.len());
            }
            if self.config.material.dry {
                for &i in &new {
                    f.pf[i] = 0.0;
                    f.srf[i] = 0.0;
                }
            }
        }
    }

    // ==================== flow phase ====================

    /// Bulk mobility k_r k_w / μ_w at saturation `s`.
    fn bulk_mobility(&self, s: f64) -> f64 {
        let fl = &self.config.material.fluid;
        relative_permeability(s, fl.m) * fl.k_w / fl.mu_w
    }

    /// Fracture mobility k_r a_f² / (12 μ_w).
    fn fracture_mobility(&self, s: f64, af: f64) -> f64 {
        let fl = &self.config.material.fluid;
        relative_permeability(s, fl.m) * af * af / (12.0 * fl.mu_w)
    }

    fn capacity(&mut self, p: f64, porosity: f64) -> f64 {
        let (_, ds) = retention(p, &self.config.material.fluid);
        if ds < self.params.c_min {
            self.counters.capacity_floor_hits += 1;
            porosity * self.params.c_min
        } else {
            porosity * ds
        }
    }

    /// Divergence term (1/ρ_w) Σ (Q − Q′) V′ of `space` at every point,
    /// for pressures `p`. Fills `self.rate`.
    fn flow_divergence(&mut self, f: &FieldState, p: &[f64], space: Space) {
        let n = f.len();
        let t = &self.state.table;
        let g = self.config.material.stab.g;
        let active = |i: usize| match space {
            Space::Bulk => true,
            Space::Fracture => f.fractured[i],
        };
        let member = |i: usize, e: usize| match space {
            Space::Bulk => t.intact(e),
            Space::Fracture => f.fractured[i] && f.fractured[t.neighbors[e] as usize],
        };
        // gradients and fluxes
        for i in 0..n {
            if !active(i) {
                continue;
            }
            let k_inv = match space {
                Space::Bulk => self.kinv[i],
                Space::Fracture => self.kinv_f[i],
            };
            let frozen = match space {
                Space::Bulk => self.deficient[i],
                Space::Fracture => false,
            };
            if !frozen {
                let mut acc = Vec2::zeros();
                for e in t.range(i) {
                    if member(i, e) {
                        let j = t.neighbors[e] as usize;
                        acc += t.xi[e] * ((p[j] - p[i]) * influence(t.length[e], t.horizon) * t.volume[e]);
                    }
                }
                self.grad_w[i] = k_inv.transpose() * acc;
            }
            self.qflux[i] = -self.grad_w[i] * self.lam[i];
        }
        for i in 0..n {
            if !active(i) {
                self.rate[i] = 0.0;
                continue;
            }
            let (kinv_i, gi) = match space {
                Space::Bulk => (self.kinv[i], self.gnorm[i]),
                Space::Fracture => (self.kinv_f[i], g),
            };
            let (qi, gradi, li) = (self.qflux[i], self.grad_w[i], self.lam[i]);
            let mut div = 0.0;
            for e in t.range(i) {
                if !member(i, e) {
                    continue;
                }
                let j = t.neighbors[e] as usize;
                let xi = t.xi[e];
                let (kinv_j, gj) = match space {
                    Space::Bulk => (self.kinv[j], self.gnorm[j]),
                    Space::Fracture => (self.kinv_f[j], g),
                };
                let w = influence(t.length[e], t.horizon);
                let phi = p[j] - p[i];
                let corr = w * (qi.dot(&(kinv_i * xi)) + self.qflux[j].dot(&(kinv_j * xi)));
                let stab = self.cfe[e]
                    * (gi * li * (phi - gradi.dot(&xi)) + gj * self.lam[j] * (phi - self.grad_w[j].dot(&xi)));
                div += (corr - stab) * t.volume[e];
            }
            self.rate[i] = div;
        }
    }

    /// Stability-based sub-step count for the pressure update of `space`,
    /// with the factor applied to the mobility when the count hits the ceiling.
    fn substeps(&mut self, f: &FieldState, space: Space, cap: &[f64]) -> (u32, f64) {
        if let Substeps::Fixed(n) = self.params.flow_substeps {
            return (n, 1.0);
        }
        let t = &self.state.table;
        let g = self.config.material.stab.g;
        let mut worst: f64 = 0.0;
        for i in 0..f.len() {
            let active = match space {
                Space::Bulk => true,
                Space::Fracture => f.fractured[i],
            };
            if !active || cap[i] <= 0.0 {
                continue;
            }
            let kinv_i = match space {
                Space::Bulk => self.kinv[i],
                Space::Fracture => self.kinv_f[i],
            };
            let (mut s1, mut stab, mut lmax) = (0.0, 0.0, self.lam[i]);
            for e in t.range(i) {
                let j = t.neighbors[e] as usize;
                let member = match space {
                    Space::Bulk => t.intact(e),
                    Space::Fracture => f.fractured[j],
                };
                if !member {
                    continue;
                }
                s1 += (kinv_i * t.xi[e]).norm() * t.volume[e];
                let gj = match space {
                    Space::Bulk => self.gnorm[j],
                    Space::Fracture => g,
                };
                stab += self.cfe[e] * (g * self.lam[i] + gj * self.lam[j]) * t.volume[e];
                lmax = lmax.max(self.lam[j]);
            }
            let rho = (2.0 * lmax * s1 * s1 + 2.0 * stab) / cap[i];
            worst = worst.max(rho);
        }
        let n = (self.params.dt * worst / 1.8).ceil().max(1.0);
        let ceiling = self.params.max_flow_substeps as f64;
        if n > ceiling {
            self.counters.limited_flow_phases += 1;
            (ceiling as u32, ceiling / n)
        } else {
            (n as u32, 1.0)
        }
    }

    /// Pressure rates ṗ of `space` for the committed snapshot.
    pub fn flow_rhs(&mut self, space: Space) -> Vec<f64> {
        let f = std::mem::take(&mut self.state.fields);
        self.refresh_shapes();
        let n = f.len();
        let mut out = vec![0.0; n];
        if !self.config.material.dry {
            let phi = self.config.material.solid.porosity0;
            match space {
                Space::Bulk => {
                    for i in 0..n {
                        self.lam[i] = self.bulk_mobility(f.sr[i]);
                    }
                    self.flow_divergence(&f, &f.pw, Space::Bulk);
                    for i in 0..n {
                        let qs = self.leak_off_at(&f, i, f.pf[i], f.pw[i]);
                        let nu = self.volume_rate(&f, i);
                        let cap = self.capacity(f.pw[i], phi);
                        out[i] = -(f.sr[i] * nu + self.rate[i] + qs) / cap;
                    }
                }
                Space::Fracture => {
                    self.fracture_shapes(&f);
                    for i in 0..n {
                        self.lam[i] = if f.fractured[i] {
                            self.fracture_mobility(f.srf[i], f.af[i])
                        } else {
                            0.0
                        };
                    }
                    self.flow_divergence(&f, &f.pf, Space::Fracture);
                    for i in 0..n {
                        if f.fractured[i] {
                            let qs = self.leak_off_at(&f, i, f.pf[i], f.pw[i]);
                            let cap = self.capacity(f.pf[i], 1.0);
                            out[i] = (-self.rate[i] + qs + self.source[i]) / cap;
                        }
                    }
                }
            }
        }
        self.state.fields = f;
        out
    }

    fn leak_off_at(&self, f: &FieldState, i: usize, pf: f64, pw: f64) -> f64 {
        let fl = &self.config.material.fluid;
        leak_off(
            f.fractured[i],
            pf,
            pw,
            relative_permeability(f.sr[i], fl.m),
            fl.k_w,
            fl.mu_w,
            self.config.dx,
        )
    }

    fn volume_rate(&self, f: &FieldState, i: usize) -> f64 {
        if self.deficient[i] {
            return 0.0;
        }
        let t = &self.state.table;
        let mut acc = Mat2::zeros();
        for e in t.range(i) {
            if t.intact(e) {
                let j = t.neighbors[e] as usize;
                let xi = t.xi[e];
                let r = composite(&(f.v[j] - f.v[i]), 0.5 * (f.spin[i] + f.spin[j]), &xi);
                acc += r * xi.transpose() * (influence(t.length[e], t.horizon) * t.volume[e]);
            }
        }
        (acc * self.kinv[i]).trace()
    }

    fn fracture_shapes(&mut self, f: &FieldState) {
        let t = &self.state.table;
        for i in 0..f.len() {
            if f.fractured[i] {
                self.kinv_f[i] = shape_tensor(i, t, &f.fractured, Space::Fracture)
                    .inverse()
                    .unwrap_or_else(Mat2::zeros);
            }
        }
    }

    fn flow_phase(&mut self) {
        if self.config.material.dry {
            return;
        }
        let dt = self.params.dt;
        let fl = self.config.material.fluid;
        let phi = self.config.material.solid.porosity0;
        let f = std::mem::take(&mut self.state.fields);
        let mut next = std::mem::take(&mut self.state.next);
        let n = f.len();
        self.refresh_shapes();
        next.pw.copy_from_slice(&f.pw);
        next.pf.copy_from_slice(&f.pf);
        next.sr.copy_from_slice(&f.sr);
        next.srf.copy_from_slice(&f.srf);
        self.qs_sum.iter_mut().for_each(|q| *q = 0.0);
        let time = self.state.time;
        let bc = self.config.bc.clone();
        let drained_p = bc.drained_pressure_at(time + dt);

        // fracture space, sub-cycled with p_w held at its committed value
        let any_fractured = f.fractured.iter().any(|&b| b);
        if any_fractured {
            self.fracture_shapes(&f);
            let mut cap = vec![0.0; n];
            for i in 0..n {
                if f.fractured[i] {
                    self.lam[i] = self.fracture_mobility(next.srf[i], f.af[i]);
                    cap[i] = self.capacity(next.pf[i], 1.0);
                } else {
                    self.lam[i] = 0.0;
                }
            }
            let (nsub, scale) = self.substeps(&f, Space::Fracture, &cap);
            self.counters.max_fracture_substeps = self.counters.max_fracture_substeps.max(nsub);
            trace!("step {}: {nsub} fracture substeps", self.state.step);
            let h = dt / nsub as f64;
            let mut pf = next.pf.clone();
            for _ in 0..nsub {
                for i in 0..n {
                    if f.fractured[i] {
                        self.lam[i] = scale * self.fracture_mobility(retention(pf[i], &fl).0, f.af[i]);
                    }
                }
                self.flow_divergence(&f, &pf, Space::Fracture);
                for i in 0..n {
                    if !f.fractured[i] {
                        continue;
                    }
                    let qs = self.leak_off_at(&f, i, pf[i], f.pw[i]);
                    self.qs_sum[i] += qs * h;
                    let cap = self.capacity(pf[i], 1.0);
                    let s_dot = -self.rate[i] + qs + self.source[i];
                    self.rate[i] = pf[i] + h * s_dot / cap;
                }
                for i in 0..n {
                    if f.fractured[i] {
                        pf[i] = self.rate[i];
                        if self.points.regions[i].sides().intersects(bc.drained) {
                            pf[i] = drained_p;
                        }
                    }
                }
            }
            for i in 0..n {
                if f.fractured[i] {
                    next.pf[i] = pf[i];
                    next.srf[i] = retention(pf[i], &fl).0;
                }
            }
        }

        // bulk space, receiving the time-averaged leak-off of the fracture cycle
        let mut cap = vec![0.0; n];
        for i in 0..n {
            self.lam[i] = self.bulk_mobility(next.sr[i]);
            cap[i] = self.capacity(next.pw[i], phi);
        }
        let (nsub, scale) = self.substeps(&f, Space::Bulk, &cap);
        self.counters.max_bulk_substeps = self.counters.max_bulk_substeps.max(nsub);
        trace!("step {}: {nsub} bulk substeps", self.state.step);
        let h = dt / nsub as f64;
        let nu: Vec<f64> = (0..n).map(|i| self.volume_rate(&f, i)).collect();
        let mut pw = next.pw.clone();
        for _ in 0..nsub {
            for i in 0..n {
                self.lam[i] = scale * self.bulk_mobility(retention(pw[i], &fl).0);
            }
            self.flow_divergence(&f, &pw, Space::Bulk);
            for i in 0..n {
                let (s, _) = retention(pw[i], &fl);
                let qs = self.qs_sum[i] / dt;
                let cap = self.capacity(pw[i], phi);
                self.rate[i] = pw[i] - h * (s * nu[i] + self.rate[i] + qs) / cap;
            }
            for i in 0..n {
                pw[i] = self.rate[i];
                if self.points.regions[i].sides().intersects(bc.drained) {
                    pw[i] = drained_p;
                }
            }
        }
        for i in 0..n {
            next.pw[i] = pw[i];
            next.sr[i] = retention(pw[i], &fl).0;
        }
        self.state.fields = f;
        let fs = &mut self.state.fields;
        std::mem::swap(&mut fs.pw, &mut next.pw);
        std::mem::swap(&mut fs.pf, &mut next.pf);
        std::mem::swap(&mut fs.sr, &mut next.sr);
        std::mem::swap(&mut fs.srf, &mut next.srf);
        self.state.next = next;
        // density follows saturation
        let (rs, rw) = (self.config.material.solid.rho_s, fl.rho_w);
        for i in 0..n {
            self.rho[i] =
                self.params.mass_scaling * mixture_density(phi, self.state.fields.sr[i], rs, rw);
        }
    }

    /// Leak-off integrated over the last flow phase, per point (dimensionless volume fraction).
    pub fn last_leak_off(&self) -> &[f64] {
        &self.qs_sum
    }

    // ==================== stepping ====================

    /// Advances the committed state by one step.
    pub fn step(&mut self) -> Result<(), SolverError> {
        match self.params.ordering {
            Ordering::FlowFirst => {
                self.flow_phase();
                self.solid_phase();
            }
            Ordering::SolidFirst => {
                self.solid_phase();
                self.flow_phase();
            }
        }
        self.state.time = (self.state.step + 1) as f64 * self.params.dt;
        self.state.step += 1;
        self.apply_boundary_conditions();
        self.check_finite()
    }

    fn check_finite(&self) -> Result<(), SolverError> {
        let f = &self.state.fields;
        let bad = |field: &'static str, i: usize| SolverError::Divergence {
            field,
            point: i,
            step: self.state.step,
            time: self.state.time,
        };
        for i in 0..f.len() {
            if !(f.u[i].x.is_finite() && f.u[i].y.is_finite()) {
                return Err(bad("displacement", i));
            }
            if !f.rot[i].is_finite() {
                return Err(bad("micro-rotation", i));
            }
            if !f.pw[i].is_finite() {
                return Err(bad("bulk pressure", i));
            }
            if !f.pf[i].is_finite() {
                return Err(bad("fracture pressure", i));
            }
        }
        Ok(())
    }

    /// Advances `n` steps.
    pub fn advance(&mut self, n: u64) -> Result<(), SolverError> {
        for _ in 0..n {
            self.step()?;
        }
        Ok(())
    }

    /// Kinetic energy of the half-step velocities (J).
    pub fn kinetic_energy(&self) -> f64 {
        let f = &self.state.fields;
        (0..f.len())
            .map(|i| {
                let v = self.points.volumes[i];
                0.5 * v * (self.rho[i] * f.v[i].norm_squared() + self.inertia * f.spin[i] * f.spin[i])
            })
            .sum()
    }

    /// Accumulated bond work Σ W V V′ over all bonds (J).
    pub fn stored_energy(&self) -> f64 {
        let t = &self.state.table;
        (0..t.bond_count())
            .map(|id| {
                let (i, j) = t.ends[id];
                t.ledger.work[id] * self.points.volumes[i as usize] * self.points.volumes[j as usize]
            })
            .sum()
    }

    /// Heuristic stable step from the dilatational wave speed.
    pub fn wave_time_step(&self) -> f64 {
        let rho = self.rho.iter().cloned().fold(f64::INFINITY, f64::min);
        self.config.dx / self.config.material.solid.p_wave_speed(rho)
    }

    /// Logs a warning when Δt exceeds the wave-speed heuristic.
    pub fn warn_if_unstable(&self) {
        let h = self.wave_time_step();
        if self.params.dt > h {
            warn!(
                "dt = {:e} s exceeds the dilatational estimate dx/c = {:e} s",
                self.params.dt, h
            );
        }
    }
}

/// Initially fractured points nearest to the start of the first crack, taken
/// separately on each side of the crack line (a point on the line belongs to
/// its left side).
fn mouth_points(config: &ScenarioConfig, points: &PointSet, f: &FieldState) -> Vec<usize> {
    let Some(c) = config.cracks.first() else {
        return Vec::new();
    };
    let t = (c.b - c.a).normalize();
    let n = Vec2::new(-t.y, t.x);
    let mut out = Vec::new();
    for left in [true, false] {
        let dist: Vec<(usize, f64)> = (0..points.len())
            .filter(|&i| f.fractured[i] && ((points.positions[i] - c.a).dot(&n) >= 0.0) == left)
            .map(|i| (i, (points.positions[i] - c.a).norm()))
            .collect();
        let best = dist.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
        out.extend(
            dist.into_iter()
                .filter(|d| d.1 <= best + 1e-9 * config.dx)
                .map(|d| d.0),
        );
    }
    out.sort_unstable();
    out
}

/// Rotation helper re-exported for oracles.
pub fn cross_rotate(theta: f64, xi: &Vec2) -> Vec2 {
    rotate(theta, xi)
}
