//! Acceptance suite: every criterion runs and prints one verdict line; the
//! process exits non-zero when any criterion fails.
//!
//! `PERIPORO_ACCEPTANCE=3,4` restricts the run to the listed criteria.
//! Scenario runs are shared between criteria that need the same deck.

#[allow(dead_code)]
#[path = "common/rhs_oracle.rs"]
mod rhs_oracle;

use std::cell::OnceCell;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use periporo::diagnostics::{path_deviation, tip_pressure};
use periporo::io::{OutputWriter, TimeseriesRecord};
use periporo::kgd::KgdComparison;
use periporo::{load_scenario_config, ScenarioConfig, Simulation};
use tempfile::TempDir;

/// Coarsened KGD spacing: 150×75 points with δ/Δx = 3.
const KGD_DX: f64 = 0.2 / 3.0;
const KGD_SKIP: f64 = 0.1;
const KGD_TOLERANCE: f64 = 0.2;
/// Output interval at which the two dry grids are compared (s).
const GRID_COMPARE_EVERY: f64 = 2e-4;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

/// Outcome of one scenario run.
struct Run {
    config: ScenarioConfig,
    series: Vec<TimeseriesRecord>,
    /// Largest fracture pressure seen at the crack tip (Pa).
    peak_tip_pf: f64,
    /// Largest distance of a damaged point from the initial crack line (m).
    path_deviation: f64,
    /// Output directory with the timeseries and first and last snapshots.
    dir: TempDir,
}

fn deck(toml: &str) -> ScenarioConfig {
    load_scenario_config(toml).unwrap_or_else(|e| panic!("deck rejected: {e}\n{toml}"))
}

fn simulate(label: &str, config: ScenarioConfig) -> Run {
    let start = Instant::now();
    eprintln!("  running {label}: {} steps", config.steps());
    let dir = tempfile::tempdir().unwrap();
    let mut sim = Simulation::new(config).unwrap();
    sim.warn_if_unstable();
    let mut writer = OutputWriter::create(dir.path(), &sim).unwrap();
    let origin = sim.config.cracks.first().map(|c| c.a).unwrap_or_default();
    let steps = sim.config.steps();
    let mut series = Vec::new();
    let mut peak = f64::NEG_INFINITY;
    let mut observe = |sim: &Simulation, last: bool| {
        if let Some(r) = writer.observe(sim, last).unwrap() {
            series.push(r);
            peak = peak.max(tip_pressure(&sim.points, sim.fields(), origin));
        }
    };
    observe(&sim, steps == 0);
    for k in 0..steps {
        if let Err(e) = sim.step() {
            panic!("{label}: {e}");
        }
        observe(&sim, k + 1 == steps);
    }
    writer.finish(&sim).unwrap();
    let c = &sim.config;
    let (a, b) = c.cracks.first().map(|k| (k.a, k.b)).unwrap();
    let dev = path_deviation(&sim.points, sim.fields(), c.material.stab.d_cr, a, b);
    eprintln!("  {label} done in {:.0} s", start.elapsed().as_secs_f64());
    Run {
        config: sim.config.clone(),
        series,
        peak_tip_pf: peak,
        path_deviation: dev,
        dir,
    }
}

fn kgd(name: &str, t_end: f64) -> ScenarioConfig {
    deck(&format!(
        "scenario = \"{name}\"\ndx_m = {KGD_DX}\nt_end_s = {t_end}\n[output]\ntimeseries_every_n_steps = 100\n"
    ))
}

fn dry(rate: f64, grid: (usize, usize, f64)) -> ScenarioConfig {
    let (nx, ny, dx) = grid;
    deck(&format!(
        "scenario = \"dry-branch\"\nnx = {nx}\nny = {ny}\ndx_m = {dx}\n[bc]\ntraction_rate_pa_s = {rate:e}\n"
    ))
}

const GRID_1: (usize, usize, f64) = (150, 60, 1.0 / 150.0);
const GRID_2: (usize, usize, f64) = (200, 80, 5e-3);

fn unsat(k: f64) -> ScenarioConfig {
    deck(&format!(
        "scenario = \"unsat-multi\"\nt_end_s = 4e-3\n[material]\nhydraulic_conductivity_mps = {k:e}\n\
         [output]\ntimeseries_every_n_steps = 40\n"
    ))
}

const CONDUCTIVITIES: [f64; 3] = [1e-9, 1e-8, 1e-7];

/// Runs shared between criteria, computed on first use.
#[derive(Default)]
struct Runs {
    kgd_base: OnceCell<Run>,
    dry_slow: OnceCell<Run>,
}

impl Runs {
    fn kgd_base(&self) -> &Run {
        self.kgd_base.get_or_init(|| simulate("kgd-base (coarsened)", kgd("kgd-base", 600.0)))
    }

    /// The built-in dry-branch deck as shipped (2×10⁴ MPa/s, grid 1).
    fn dry_slow(&self) -> &Run {
        self.dry_slow.get_or_init(|| simulate("dry-branch", deck("scenario = \"dry-branch\"\n")))
    }
}

fn branches(run: &Run) -> Vec<usize> {
    run.series.iter().map(|r| r.branches).collect()
}

fn kgd_validation(runs: &Runs) -> Verdict {
    let run = runs.kgd_base();
    let cmp = KgdComparison::new(&run.config, &run.series, KGD_SKIP);
    print!("{}", cmp.table());
    let (we, pe) = (cmp.max_width_error(), cmp.max_pressure_error());
    let row = run.config.dx;
    let pass = !cmp.rows.is_empty() && we <= KGD_TOLERANCE && pe <= KGD_TOLERANCE && run.path_deviation <= row;
    Verdict::new(
        pass,
        format!(
            "width error {we:.3}, pressure error {pe:.3} (limit {KGD_TOLERANCE}); path deviation {:.4} m (limit {row:.4} m)",
            run.path_deviation
        ),
    )
}

fn flux_rate_branching(runs: &Runs) -> Verdict {
    let high = simulate("kgd-highflux (coarsened)", kgd("kgd-highflux", 300.0));
    let hb = branches(&high).into_iter().max().unwrap_or(0);
    let bb = branches(runs.kgd_base()).into_iter().max().unwrap_or(0);
    Verdict::new(
        hb >= 1 && bb == 0,
        format!("kgd-highflux max branches {hb} by 300 s (need >= 1); kgd-base max branches {bb} (need 0)"),
    )
}

/// Number of changes in a branch-count history.
fn transitions(b: &[usize]) -> usize {
    b.windows(2).filter(|w| w[0] != w[1]).count()
}

fn loading_rate_branching(runs: &Runs) -> Verdict {
    let slow = branches(runs.dry_slow());
    let fast = simulate("dry-branch at 4e4 MPa/s", dry(4e10, GRID_1));
    let fast = branches(&fast);
    // a single 0 → 2 transition and nothing else
    let once = slow.iter().all(|&b| b == 0 || b == 2) && transitions(&slow) == 1 && slow.last() == Some(&2);
    let (ls, lf) = (*slow.last().unwrap(), *fast.last().unwrap());
    Verdict::new(
        once && lf > ls,
        format!(
            "2e4 MPa/s: final branches {ls}, {} changes, single 0->2 event {once}; 4e4 MPa/s: final branches {lf} (need > {ls})",
            transitions(&slow)
        ),
    )
}

fn grid_insensitivity(runs: &Runs) -> Verdict {
    let g1 = runs.dry_slow();
    let g2 = simulate("dry-branch grid 2", dry(2e10, GRID_2));
    let dx = GRID_1.2;
    let mut worst: f64 = 0.0;
    let mut mismatched = Vec::new();
    let mut compared = 0;
    for a in &g1.series {
        let k = (a.time / GRID_COMPARE_EVERY).round();
        if (a.time - k * GRID_COMPARE_EVERY).abs() > 1e-3 * g1.config.dt {
            continue;
        }
        let Some(b) = g2.series.iter().find(|b| (b.time - a.time).abs() <= 1e-3 * g1.config.dt) else {
            continue;
        };
        compared += 1;
        worst = worst.max((a.length - b.length).abs());
        if a.branches != b.branches {
            mismatched.push(format!("{:.1e} s: {} vs {}", a.time, a.branches, b.branches));
        }
    }
    Verdict::new(
        compared > 0 && mismatched.is_empty() && worst <= 2.0 * dx,
        format!(
            "{compared} matched times; largest tip offset {worst:.4} m (limit {:.4} m); branch mismatches [{}]",
            2.0 * dx,
            mismatched.join(", ")
        ),
    )
}

fn conductivity_trend(_: &Runs) -> Verdict {
    let runs: Vec<Run> = CONDUCTIVITIES
        .iter()
        .map(|&k| simulate(&format!("unsat-multi with k_w = {k:e} m/s"), unsat(k)))
        .collect();
    let b: Vec<usize> = runs.iter().map(|r| r.series.last().unwrap().branches).collect();
    let p: Vec<f64> = runs.iter().map(|r| r.peak_tip_pf).collect();
    let b_ok = b.windows(2).all(|w| w[0] >= w[1]);
    let p_ok = p.windows(2).all(|w| w[0] <= w[1]);
    Verdict::new(
        b_ok && p_ok,
        format!(
            "branches at 4 ms {b:?} (non-increasing {b_ok}); peak tip p_f [{}] kPa (non-decreasing {p_ok})",
            p.iter().map(|x| format!("{:.1}", x / 1e3)).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn property_suites(_: &Runs) -> Verdict {
    let checks = properties::ALL.iter().chain(rhs_oracle::ALL);
    let mut failed = Vec::new();
    let mut total = 0;
    for (name, f) in checks {
        total += 1;
        if catch_unwind(f).is_err() {
            failed.push(*name);
        }
    }
    Verdict::new(
        failed.is_empty(),
        format!("{}/{total} checks hold; failing [{}]", total - failed.len(), failed.join(", ")),
    )
}

fn determinism(runs: &Runs) -> Verdict {
    let first = runs.dry_slow();
    let again = simulate("dry-branch (repeat)", first.config.clone());
    let read = |r: &Run| fs::read(r.dir.path().join("timeseries.txt")).unwrap();
    let (a, b) = (read(first), read(&again));
    Verdict::new(
        !a.is_empty() && a == b,
        format!("dry-branch timeseries {} bytes, identical {}", a.len(), a == b),
    )
}

type Criterion = (u32, &'static str, fn(&Runs) -> Verdict);

const CRITERIA: [Criterion; 7] = [
    (1, "KGD validation", kgd_validation),
    (2, "flux-rate branching", flux_rate_branching),
    (3, "loading-rate branching", loading_rate_branching),
    (4, "grid insensitivity", grid_insensitivity),
    (5, "hydraulic-conductivity trend", conductivity_trend),
    (6, "property suites", property_suites),
    (7, "determinism", determinism),
];

fn selected() -> Vec<u32> {
    match std::env::var("PERIPORO_ACCEPTANCE") {
        Ok(s) if !s.trim().is_empty() => s.split(',').filter_map(|x| x.trim().parse().ok()).collect(),
        _ => CRITERIA.iter().map(|c| c.0).collect(),
    }
}

fn main() -> ExitCode {
    let runs = Runs::default();
    let wanted = selected();
    let mut all = true;
    for (n, name, check) in CRITERIA {
        if !wanted.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(|| check(&runs))).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::new(false, format!("aborted: {msg}"))
        });
        all &= v.pass;
        println!(
            "criterion {n} ({name}): {} [{}; {:.0} s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
