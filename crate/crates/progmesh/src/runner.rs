//! `run` and `compare`: drive simulations and write their reports.

use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use progmesh_core::engine::Equivalence;
use progmesh_core::{DeviceTopology, Executor, GeometryMask, Policy, RunMode, Simulation, SimulationSetup};

use crate::config::{ModeName, PolicyName, ScenarioConfig};
use crate::dump::dump_field;
use crate::error::{Error, Result};
use crate::geometry::load_geometry;
use crate::metrics::{mlups, mlups_bbox};
use crate::pool::WorkerPool;
use crate::topology::load_topology;

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub mode: Option<ModeName>,
    pub devices: Option<usize>,
    pub policy: Option<PolicyName>,
    pub topology: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl RunOptions {
    pub fn apply(&self, cfg: &ScenarioConfig) -> Result<ScenarioConfig> {
        let mut c = cfg.clone();
        if let Some(m) = self.mode {
            c.mode = m;
        }
        if self.devices.is_some() {
            c.devices = self.devices;
        }
        if let Some(p) = self.policy {
            c.policy = p;
        }
        if self.topology.is_some() {
            c.topology = self.topology.clone();
        }
        if let Some(o) = &self.output {
            c.output = o.clone();
        }
        if self.workers.is_some() {
            c.workers = self.workers;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Time-series columns; the last three depend on wall-clock time.
pub const TIMESERIES_HEADER: [&str; 15] = [
    "iteration",
    "active_tiles",
    "active_cells",
    "bytes_resident",
    "bytes_intra",
    "bytes_p2p",
    "bytes_staged",
    "negative_populations",
    "psi_clamps",
    "zero_density_forces",
    "suppressed_expansions",
    "cell_updates",
    "window_seconds",
    "mlups",
    "mlups_bbox",
];

/// Number of trailing wall-clock columns in every CSV report.
pub const WALL_CLOCK_COLUMNS: usize = 3;

pub fn topology_for(cfg: &ScenarioConfig) -> Result<DeviceTopology> {
    let base = match &cfg.topology {
        Some(p) => load_topology(p)?,
        None => DeviceTopology::fully_connected(cfg.devices.unwrap_or(1)),
    };
    let t = match cfg.devices {
        Some(n) if n != base.n_devices() => base.restrict(n).map_err(|_| {
            Error::Config(format!(
                "devices = {n} exceeds the {} devices of the topology",
                base.n_devices()
            ))
        })?,
        _ => base,
    };
    Ok(t.with_weights(cfg.weight_p2p, cfg.weight_staged)?)
}

pub fn geometry_for(cfg: &ScenarioConfig) -> Result<GeometryMask> {
    match &cfg.geometry {
        None => Ok(GeometryMask::open(cfg.domain)),
        Some(p) => {
            let g = load_geometry(p)?;
            if g.dims() != cfg.domain {
                return Err(Error::Config(format!(
                    "geometry {} is {:?} cells but domain is {:?}",
                    p.display(),
                    g.dims(),
                    cfg.domain
                )));
            }
            Ok(g)
        }
    }
}

pub fn build_setup(cfg: &ScenarioConfig, mode: RunMode) -> Result<SimulationSetup> {
    let components = (0..cfg.components.len())
        .map(|k| cfg.component_params(k))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationSetup {
        stencil: cfg.stencil_kind(),
        tile_extent: cfg.tile_extent,
        geometry: geometry_for(cfg)?,
        periodic: cfg.periodic(),
        components,
        coupling: cfg.coupling_matrix()?,
        topology: topology_for(cfg)?,
        policy: Policy::from(cfg.policy),
        mode,
        threshold: cfg.threshold,
        seeds: cfg.seeds(),
        trace: false,
    })
}

pub fn executor_for(cfg: &ScenarioConfig) -> Result<WorkerPool> {
    let devices = topology_for(cfg)?.n_devices();
    Ok(WorkerPool::new(cfg.workers.unwrap_or(devices)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub mode: RunMode,
    pub iterations: u64,
    pub cell_updates: u64,
    pub elapsed_seconds: f64,
    pub mlups: f64,
    pub mlups_bbox: f64,
    pub peak_bytes_resident: u64,
    pub final_tiles: usize,
    pub bbox_tiles: usize,
    pub device_tile_counts: Vec<usize>,
    pub bytes_intra: u64,
    pub bytes_p2p: u64,
    pub bytes_staged: u64,
    pub modeled_cost: f64,
    pub error: Option<String>,
}

/// Writes one simulation's time series, creation log, dumps and summary.
struct Recorder {
    dir: PathBuf,
    csv: csv::Writer<File>,
    peak_bytes: u64,
    elapsed: f64,
    window_start_updates: u64,
    window_start_iteration: u64,
    window_seconds: f64,
    bbox_cells: u64,
}

impl Recorder {
    fn new(dir: &Path, sim: &Simulation) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
        let path = dir.join("timeseries.csv");
        let mut csv = csv::Writer::from_path(&path)?;
        csv.write_record(TIMESERIES_HEADER)?;
        let d = sim.map().geometry().dims();
        Ok(Recorder {
            dir: dir.to_path_buf(),
            csv,
            peak_bytes: sim.map().active_report().bytes_resident,
            elapsed: 0.0,
            window_start_updates: 0,
            window_start_iteration: 0,
            window_seconds: 0.0,
            bbox_cells: (d[0] * d[1] * d[2]) as u64,
        })
    }

    fn after_step(&mut self, sim: &Simulation, seconds: f64) {
        self.elapsed += seconds;
        self.window_seconds += seconds;
        self.peak_bytes = self.peak_bytes.max(sim.map().active_report().bytes_resident);
    }

    fn row(&mut self, sim: &Simulation) -> Result<()> {
        let r = sim.map().active_report();
        let c = sim.topology().counters;
        let d = sim.diagnostics();
        let updates = sim.cell_updates() - self.window_start_updates;
        let iters = sim.iteration() - self.window_start_iteration;
        let secs = self.window_seconds;
        self.csv.write_record([
            sim.iteration().to_string(),
            r.tiles.to_string(),
            r.active_cells.to_string(),
            r.bytes_resident.to_string(),
            c.intra.to_string(),
            c.p2p.to_string(),
            c.staged.to_string(),
            d.negative_populations.to_string(),
            d.psi_clamps.to_string(),
            d.zero_density_forces.to_string(),
            d.suppressed_expansions.to_string(),
            sim.cell_updates().to_string(),
            format!("{secs:.6}"),
            format!("{:.3}", mlups(updates, secs)),
            format!("{:.3}", mlups_bbox(self.bbox_cells, iters, secs)),
        ])?;
        self.csv.flush().map_err(Error::io(self.dir.join("timeseries.csv")))?;
        self.window_start_updates = sim.cell_updates();
        self.window_start_iteration = sim.iteration();
        self.window_seconds = 0.0;
        Ok(())
    }

    fn snapshot(&self, sim: &Simulation, cfg: &ScenarioConfig) -> Result<()> {
        let dir = self.dir.join("snapshots");
        for &field in &cfg.snapshot_fields {
            for comp in 0..cfg.components.len() {
                dump_field(sim, &dir, field, comp, cfg.snapshot_pgm)?;
            }
        }
        Ok(())
    }

    fn finish(mut self, sim: &Simulation, error: Option<&Error>) -> Result<RunReport> {
        self.csv.flush().map_err(Error::io(self.dir.join("timeseries.csv")))?;
        write_creation_log(sim, &self.dir.join("creation_log.csv"))?;
        let c = sim.topology().counters;
        let report = RunReport {
            mode: sim.mode(),
            iterations: sim.iteration(),
            cell_updates: sim.cell_updates(),
            elapsed_seconds: self.elapsed,
            mlups: mlups(sim.cell_updates(), self.elapsed),
            mlups_bbox: mlups_bbox(self.bbox_cells, sim.iteration(), self.elapsed),
            peak_bytes_resident: self.peak_bytes,
            final_tiles: sim.map().len(),
            bbox_tiles: sim.map().grid.tile_count(),
            device_tile_counts: sim.assignment().counts().to_vec(),
            bytes_intra: c.intra,
            bytes_p2p: c.p2p,
            bytes_staged: c.staged,
            modeled_cost: sim.assignment().modeled_cost,
            error: error.map(|e| e.to_string()),
        };
        let path = self.dir.join("summary.txt");
        std::fs::write(&path, summary_text(&report, sim)).map_err(Error::io(&path))?;
        Ok(report)
    }
}

fn mode_name(m: RunMode) -> &'static str {
    match m {
        RunMode::Static => "static",
        RunMode::Progressive => "progressive",
    }
}

fn summary_text(r: &RunReport, sim: &Simulation) -> String {
    let d = sim.diagnostics();
    let mut s = String::new();
    let _ = writeln!(s, "mode = {}", mode_name(r.mode));
    let _ = writeln!(s, "status = {}", r.error.as_deref().unwrap_or("ok"));
    let _ = writeln!(s, "iterations = {}", r.iterations);
    let _ = writeln!(s, "cell_updates = {}", r.cell_updates);
    let _ = writeln!(s, "peak_bytes_resident = {}", r.peak_bytes_resident);
    let _ = writeln!(s, "final_tiles = {}", r.final_tiles);
    let _ = writeln!(s, "bbox_tiles = {}", r.bbox_tiles);
    let counts: Vec<String> = r.device_tile_counts.iter().map(|c| c.to_string()).collect();
    let _ = writeln!(s, "device_tile_counts = {}", counts.join(" "));
    let _ = writeln!(s, "bytes_intra = {}", r.bytes_intra);
    let _ = writeln!(s, "bytes_p2p = {}", r.bytes_p2p);
    let _ = writeln!(s, "bytes_staged = {}", r.bytes_staged);
    let _ = writeln!(s, "modeled_cost = {}", r.modeled_cost);
    let _ = writeln!(s, "negative_populations = {}", d.negative_populations);
    let _ = writeln!(s, "psi_clamps = {}", d.psi_clamps);
    let _ = writeln!(s, "zero_density_forces = {}", d.zero_density_forces);
    let _ = writeln!(s, "suppressed_expansions = {}", d.suppressed_expansions);
    let _ = writeln!(s, "# wall clock");
    let _ = writeln!(s, "elapsed_seconds = {:.6}", r.elapsed_seconds);
    let _ = writeln!(s, "mlups = {:.3}", r.mlups);
    let _ = writeln!(s, "mlups_bbox = {:.3}", r.mlups_bbox);
    s
}

pub fn write_creation_log(sim: &Simulation, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "tile_x", "tile_y", "tile_z", "trigger_face", "owner_device"])?;
    for e in sim.creation_log() {
        w.write_record([
            e.iteration.to_string(),
            e.coords.x.to_string(),
            e.coords.y.to_string(),
            e.coords.z.to_string(),
            e.trigger.map_or("seed", |f| f.name()).to_string(),
            e.owner.map_or(String::new(), |d| d.to_string()),
        ])?;
    }
    w.flush().map_err(Error::io(path))
}

fn due(iteration: u64, interval: u64, last: u64) -> bool {
    interval > 0 && (iteration % interval == 0 || iteration == last)
}

/// Steps `sim` to the configured iteration count while recording into `dir`.
pub fn run_simulation(sim: &mut Simulation, cfg: &ScenarioConfig, exec: &dyn Executor, dir: &Path) -> Result<RunReport> {
    let mut rec = Recorder::new(dir, sim)?;
    rec.row(sim)?;
    if cfg.snapshot_interval > 0 {
        rec.snapshot(sim, cfg)?;
    }
    while sim.iteration() < cfg.iterations {
        let t0 = Instant::now();
        if let Err(e) = sim.step(exec) {
            let err = Error::from(e);
            rec.row(sim)?;
            rec.finish(sim, Some(&err))?;
            return Err(err);
        }
        rec.after_step(sim, t0.elapsed().as_secs_f64());
        let it = sim.iteration();
        if due(it, cfg.report_interval, cfg.iterations) {
            rec.row(sim)?;
        }
        if due(it, cfg.snapshot_interval, cfg.iterations) {
            rec.snapshot(sim, cfg)?;
        }
    }
    rec.finish(sim, None)
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunReport> {
    let exec = executor_for(cfg)?;
    let mut sim = Simulation::new(build_setup(cfg, cfg.mode.into())?)?;
    run_simulation(&mut sim, cfg, &exec, &cfg.output)
}

pub const COMPARE_HEADER: [&str; 16] = [
    "iteration",
    "static_tiles",
    "progressive_tiles",
    "static_bytes_resident",
    "progressive_bytes_resident",
    "static_bytes_intra",
    "static_bytes_p2p",
    "static_bytes_staged",
    "progressive_bytes_intra",
    "progressive_bytes_p2p",
    "progressive_bytes_staged",
    "field_diff_max",
    "inactive_dev_max",
    "static_mlups",
    "progressive_mlups",
    "progressive_mlups_bbox",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub static_run: RunReport,
    pub progressive_run: RunReport,
    /// Worst differences over every report row.
    pub worst: Equivalence,
}

/// Runs the static and progressive variants of `cfg` side by side.
pub fn compare(cfg: &ScenarioConfig) -> Result<CompareReport> {
    let exec = executor_for(cfg)?;
    let mut stat = Simulation::new(build_setup(cfg, RunMode::Static)?)?;
    let mut prog = Simulation::new(build_setup(cfg, RunMode::Progressive)?)?;
    let out = &cfg.output;
    let mut rs = Recorder::new(&out.join("static"), &stat)?;
    let mut rp = Recorder::new(&out.join("progressive"), &prog)?;
    let path = out.join("compare.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(COMPARE_HEADER)?;
    let mut worst = Equivalence::default();
    let d = stat.map().geometry().dims();
    let bbox_cells = (d[0] * d[1] * d[2]) as u64;
    let (mut win_s, mut win_p, mut win_updates_s, mut win_updates_p, mut win_iters) = (0.0, 0.0, 0u64, 0u64, 0u64);

    let emit = |w: &mut csv::Writer<File>,
                    stat: &Simulation,
                    prog: &Simulation,
                    worst: &mut Equivalence,
                    secs: (f64, f64),
                    updates: (u64, u64),
                    iters: u64|
     -> Result<()> {
        let eq = prog.equivalence(stat);
        worst.active_max_diff = worst.active_max_diff.max(eq.active_max_diff);
        worst.inactive_max_dev = worst.inactive_max_dev.max(eq.inactive_max_dev);
        worst.compared_cells = worst.compared_cells.max(eq.compared_cells);
        let (a, b) = (stat.map().active_report(), prog.map().active_report());
        let (cs, cp) = (stat.topology().counters, prog.topology().counters);
        w.write_record([
            stat.iteration().to_string(),
            a.tiles.to_string(),
            b.tiles.to_string(),
            a.bytes_resident.to_string(),
            b.bytes_resident.to_string(),
            cs.intra.to_string(),
            cs.p2p.to_string(),
            cs.staged.to_string(),
            cp.intra.to_string(),
            cp.p2p.to_string(),
            cp.staged.to_string(),
            format!("{:e}", eq.active_max_diff),
            format!("{:e}", eq.inactive_max_dev),
            format!("{:.3}", mlups(updates.0, secs.0)),
            format!("{:.3}", mlups(updates.1, secs.1)),
            format!("{:.3}", mlups_bbox(bbox_cells, iters, secs.1)),
        ])?;
        w.flush().map_err(Error::io(out.join("compare.csv")))
    };

    for (sim, rec) in [(&stat, &mut rs), (&prog, &mut rp)] {
        rec.row(sim)?;
        if cfg.snapshot_interval > 0 {
            rec.snapshot(sim, cfg)?;
        }
    }
    emit(&mut w, &stat, &prog, &mut worst, (0.0, 0.0), (0, 0), 0)?;

    while stat.iteration() < cfg.iterations {
        let mut failure = None;
        for (sim, rec, win, win_updates) in [
            (&mut stat, &mut rs, &mut win_s, &mut win_updates_s),
            (&mut prog, &mut rp, &mut win_p, &mut win_updates_p),
        ] {
            let before = sim.cell_updates();
            let t0 = Instant::now();
            if let Err(e) = sim.step(&exec) {
                failure = Some(Error::from(e));
                break;
            }
            let secs = t0.elapsed().as_secs_f64();
            rec.after_step(sim, secs);
            *win += secs;
            *win_updates += sim.cell_updates() - before;
        }
        if let Some(err) = failure {
            // Partial reports are still written.
            rs.finish(&stat, Some(&err))?;
            rp.finish(&prog, Some(&err))?;
            return Err(err);
        }
        win_iters += 1;
        let it = stat.iteration();
        if due(it, cfg.report_interval, cfg.iterations) {
            rs.row(&stat)?;
            rp.row(&prog)?;
            emit(
                &mut w,
                &stat,
                &prog,
                &mut worst,
                (win_s, win_p),
                (win_updates_s, win_updates_p),
                win_iters,
            )?;
            (win_s, win_p, win_updates_s, win_updates_p, win_iters) = (0.0, 0.0, 0, 0, 0);
        }
        if due(it, cfg.snapshot_interval, cfg.iterations) {
            rs.snapshot(&stat, cfg)?;
            rp.snapshot(&prog, cfg)?;
        }
    }
    let report = CompareReport {
        static_run: rs.finish(&stat, None)?,
        progressive_run: rp.finish(&prog, None)?,
        worst,
    };
    let mut s = String::new();
    let (a, b) = (&report.static_run, &report.progressive_run);
    let _ = writeln!(s, "iterations = {}", a.iterations);
    let _ = writeln!(s, "static_peak_bytes = {}", a.peak_bytes_resident);
    let _ = writeln!(s, "progressive_peak_bytes = {}", b.peak_bytes_resident);
    let ratio = b.peak_bytes_resident as f64 / a.peak_bytes_resident.max(1) as f64;
    let _ = writeln!(s, "peak_bytes_ratio = {ratio:.6}");
    let _ = writeln!(s, "static_tiles = {}", a.final_tiles);
    let _ = writeln!(s, "progressive_tiles = {}", b.final_tiles);
    let _ = writeln!(s, "field_diff_max = {:e}", worst.active_max_diff);
    let _ = writeln!(s, "inactive_dev_max = {:e}", worst.inactive_max_dev);
    let _ = writeln!(s, "# wall clock");
    let _ = writeln!(s, "static_mlups = {:.3}", a.mlups);
    let _ = writeln!(s, "progressive_mlups = {:.3}", b.mlups);
    let _ = writeln!(s, "progressive_mlups_bbox = {:.3}", b.mlups_bbox);
    let path = out.join("compare_summary.txt");
    std::fs::write(&path, s).map_err(Error::io(&path))?;
    Ok(report)
}

/// Drops the trailing wall-clock columns from CSV text.
pub fn strip_wall_clock(csv_text: &str) -> String {
    csv_text
        .lines()
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            cols[..cols.len().saturating_sub(WALL_CLOCK_COLUMNS)].join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}
