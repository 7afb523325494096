//! Text outputs: per-step snapshots, the append-only timeseries and the run
//! metadata file.
//!
//! Every file is first written as `<name>.partial` and renamed when complete;
//! a run that aborts leaves its last file with the `.partial` suffix.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::constitutive::Vec2;
use crate::diagnostics::{
    crack_length, default_spur, mean_pressure, mouth_width, topology, CrackSummary,
};
use crate::error::SolverError;
use crate::solver::Simulation;

pub const SNAPSHOT_HEADER: &str =
    "# columns: x_m y_m ux_m uy_m omega_deg pw_kpa pf_kpa sr damage af_m";
pub const TIMESERIES_HEADER: &str = "# t_s length_m mouth_width_m pf_mpa branches broken_bonds";

/// One snapshot row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotRow {
    pub x: f64,
    pub y: f64,
    pub ux: f64,
    pub uy: f64,
    pub omega_deg: f64,
    pub pw_kpa: f64,
    pub pf_kpa: f64,
    pub sr: f64,
    pub damage: f64,
    pub af: f64,
}

/// Snapshot of every point at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRecord {
    pub step: u64,
    pub time: f64,
    pub rows: Vec<SnapshotRow>,
}

impl SnapshotRecord {
    pub fn capture(sim: &Simulation) -> Self {
        let f = sim.fields();
        let p = &sim.points;
        let rows = (0..p.len())
            .map(|i| SnapshotRow {
                x: p.positions[i].x,
                y: p.positions[i].y,
                ux: f.u[i].x,
                uy: f.u[i].y,
                omega_deg: f.rot[i].to_degrees(),
                pw_kpa: f.pw[i] / 1e3,
                pf_kpa: f.pf[i] / 1e3,
                sr: f.sr[i],
                damage: f.damage[i],
                af: f.af[i],
            })
            .collect();
        Self {
            step: sim.state.step,
            time: sim.state.time,
            rows,
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "{SNAPSHOT_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e}",
                r.x, r.y, r.ux, r.uy, r.omega_deg, r.pw_kpa, r.pf_kpa, r.sr, r.damage, r.af
            )?;
        }
        Ok(())
    }

    /// Parses the body written by [`Self::write_to`]; step and time are
    /// taken from the caller.
    pub fn parse(text: &str, step: u64, time: f64) -> io::Result<Self> {
        let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
        let mut lines = text.lines();
        if lines.next() != Some(SNAPSHOT_HEADER) {
            return Err(bad("missing snapshot header".into()));
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| bad(format!("row {}: {e}", n + 1)))?;
            if v.len() != 10 {
                return Err(bad(format!("row {}: expected 10 columns, got {}", n + 1, v.len())));
            }
            rows.push(SnapshotRow {
                x: v[0],
                y: v[1],
                ux: v[2],
                uy: v[3],
                omega_deg: v[4],
                pw_kpa: v[5],
                pf_kpa: v[6],
                sr: v[7],
                damage: v[8],
                af: v[9],
            });
        }
        Ok(Self { step, time, rows })
    }
}

/// One timeseries row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeseriesRecord {
    pub time: f64,
    pub length: f64,
    pub mouth_width: f64,
    pub pf_mpa: f64,
    pub branches: usize,
    pub broken_bonds: usize,
}

impl TimeseriesRecord {
    pub fn line(&self) -> String {
        format!(
            "{:e} {:e} {:e} {:e} {} {}",
            self.time, self.length, self.mouth_width, self.pf_mpa, self.branches, self.broken_bonds
        )
    }

    pub fn parse_line(line: &str) -> Option<Self> {
        let v: Vec<&str> = line.split_whitespace().collect();
        if v.len() != 6 {
            return None;
        }
        Some(Self {
            time: v[0].parse().ok()?,
            length: v[1].parse().ok()?,
            mouth_width: v[2].parse().ok()?,
            pf_mpa: v[3].parse().ok()?,
            branches: v[4].parse().ok()?,
            broken_bonds: v[5].parse().ok()?,
        })
    }
}

/// Reads a timeseries file.
pub fn read_timeseries(path: &Path) -> io::Result<Vec<TimeseriesRecord>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        out.push(TimeseriesRecord::parse_line(&line).ok_or_else(|| {
            io::Error::new(io::ErrorKind::InvalidData, format!("bad timeseries row: {line}"))
        })?);
    }
    Ok(out)
}

/// Crack diagnostics of the current state.
pub fn summarize(sim: &Simulation) -> CrackSummary {
    let c = &sim.config;
    let f = sim.fields();
    let (a, b, l0) = match c.cracks.first() {
        Some(k) => (k.a, k.b, k.length()),
        None => {
            let o = c.origin();
            let a = Vec2::new(o[0], o[1]);
            (a, a + Vec2::new(1.0, 0.0), 0.0)
        }
    };
    let topo = topology(
        &sim.points,
        f,
        c.material.stab.d_cr,
        default_spur(c.horizon, c.dx),
        a,
    );
    CrackSummary {
        length: crack_length(&sim.points, f, a, l0),
        mouth_width: mouth_width(&sim.points, f, &sim.mouth, a, b),
        mouth_pressure: mean_pressure(f, &sim.mouth),
        branches: topo.branches,
        broken_bonds: sim.table().ledger.broken_count(),
    }
}

pub fn timeseries_record(sim: &Simulation) -> TimeseriesRecord {
    let s = summarize(sim);
    TimeseriesRecord {
        time: sim.state.time,
        length: s.length,
        mouth_width: s.mouth_width,
        pf_mpa: s.mouth_pressure / 1e6,
        branches: s.branches,
        broken_bonds: s.broken_bonds,
    }
}

fn partial(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Writes `path` through a `.partial` file.
fn write_atomic(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> io::Result<()> {
    let tmp = partial(path);
    let mut w = BufWriter::new(File::create(&tmp)?);
    body(&mut w)?;
    w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    fs::rename(&tmp, path)
}

/// Output sink of one run.
pub struct OutputWriter {
    dir: PathBuf,
    series: Option<BufWriter<File>>,
    series_path: PathBuf,
    pub every_n_steps: u64,
    pub timeseries_every_n_steps: u64,
    last_snapshot: Option<u64>,
}

impl OutputWriter {
    /// Creates the directory, the run metadata and the timeseries header.
    pub fn create(dir: &Path, sim: &Simulation) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        write_atomic(&dir.join("run_metadata.toml"), |w| {
            writeln!(w, "# resolved scenario deck")?;
            w.write_all(sim.config.to_toml().as_bytes())
        })?;
        let series_path = dir.join("timeseries.txt");
        let tmp = partial(&series_path);
        let mut series = BufWriter::new(
            OpenOptions::new()
                .create(true)
                .write(true)
                .truncate(true)
                .open(&tmp)?,
        );
        writeln!(series, "{TIMESERIES_HEADER}")?;
        Ok(Self {
            dir: dir.to_path_buf(),
            series: Some(series),
            series_path,
            every_n_steps: sim.config.output.every_n_steps,
            timeseries_every_n_steps: sim.config.output.timeseries_every_n_steps.max(1),
            last_snapshot: None,
        })
    }

    pub fn directory(&self) -> &Path {
        &self.dir
    }

    pub fn snapshot_path(&self, step: u64) -> PathBuf {
        self.dir.join(format!("snapshot_{step:08}.txt"))
    }

    pub fn write_snapshot(&mut self, sim: &Simulation) -> io::Result<()> {
        let rec = SnapshotRecord::capture(sim);
        let path = self.snapshot_path(rec.step);
        write_atomic(&path, |w| rec.write_to(w))?;
        self.last_snapshot = Some(rec.step);
        Ok(())
    }

    pub fn append_timeseries(&mut self, rec: &TimeseriesRecord) -> io::Result<()> {
        if let Some(s) = self.series.as_mut() {
            writeln!(s, "{}", rec.line())?;
        }
        Ok(())
    }

    /// Called after every committed step (and once at step 0).
    pub fn observe(&mut self, sim: &Simulation, last: bool) -> io::Result<Option<TimeseriesRecord>> {
        let step = sim.state.step;
        let snap = step == 0 || last || (self.every_n_steps > 0 && step % self.every_n_steps == 0);
        if snap && self.last_snapshot != Some(step) {
            self.write_snapshot(sim)?;
        }
        if step % self.timeseries_every_n_steps == 0 || last {
            let rec = timeseries_record(sim);
            self.append_timeseries(&rec)?;
            return Ok(Some(rec));
        }
        Ok(None)
    }

    /// Flushes and renames the timeseries; metadata gets run counters.
    pub fn finish(mut self, sim: &Simulation) -> io::Result<PathBuf> {
        if let Some(s) = self.series.take() {
            s.into_inner().map_err(|e| e.into_error())?.sync_all()?;
            fs::rename(partial(&self.series_path), &self.series_path)?;
        }
        let c = sim.counters;
        write_atomic(&self.dir.join("run_metadata.toml"), |w| {
            writeln!(w, "# resolved scenario deck")?;
            w.write_all(sim.config.to_toml().as_bytes())?;
            writeln!(w, "\n[run]")?;
            writeln!(w, "steps = {}", sim.state.step)?;
            writeln!(w, "final_time_s = {:e}", sim.state.time)?;
            writeln!(w, "capacity_floor_active = {}", c.capacity_floor_hits > 0)?;
            writeln!(w, "capacity_floor_hits = {}", c.capacity_floor_hits)?;
            writeln!(w, "max_bulk_substeps = {}", c.max_bulk_substeps)?;
            writeln!(w, "max_fracture_substeps = {}", c.max_fracture_substeps)?;
            writeln!(w, "limited_flow_phases = {}", c.limited_flow_phases)
        })?;
        Ok(self.series_path.clone())
    }
}

/// Runs a simulation to its end time, writing outputs when `writer` is given.
/// Returns every timeseries record produced.
pub fn run(
    sim: &mut Simulation,
    mut writer: Option<&mut OutputWriter>,
    every: u64,
    mut progress: impl FnMut(&TimeseriesRecord),
) -> Result<Vec<TimeseriesRecord>, SolverError> {
    let steps = sim.config.steps();
    let every = every.max(1);
    let mut out = Vec::new();
    let mut record = |sim: &Simulation, w: &mut Option<&mut OutputWriter>, last: bool| -> Result<(), SolverError> {
        let rec = match w {
            Some(w) => w.observe(sim, last)?,
            None => (sim.state.step % every == 0 || last).then(|| timeseries_record(sim)),
        };
        if let Some(r) = rec {
            progress(&r);
            out.push(r);
        }
        Ok(())
    };
    sim.warn_if_unstable();
    record(sim, &mut writer, steps == 0)?;
    for k in 0..steps {
        sim.step()?;
        record(sim, &mut writer, k + 1 == steps)?;
    }
    Ok(out)
}
