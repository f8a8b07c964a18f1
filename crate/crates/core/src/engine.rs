//! Bulk-synchronous iteration over the tile map.
//!
//! One call to [`Simulation::step`] runs five phases separated by barriers:
//!
//! 1. density, pressure and pseudo-potential per cell; `u_prev <- u`
//! 2. pseudo-potential halo exchange
//! 3. forces, velocity-shift increment and BGK collision, boundary layer first
//! 4. population halo exchange, streaming, bounce-back, buffer swap
//! 5. moments; in progressive mode the activation criterion, then mesh growth
//!    and device assignment on the coordinator
//!
//! Within a phase a tile only writes its own buffers, so the order in which
//! an [`Executor`] visits tiles never changes the result.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::grid::TileShape;
use crate::lattice::{collide_bgk_in_place, equilibrium_into, make_stencil, moments, Stencil, StencilKind, MAX_Q};
use crate::mesh::{
    evaluate_criterion, scatter_ghosts, AmbientState, CreationEvent, Face, GeometryMask, HaloKind, Tile,
    TileCoord, TileFault, TileMap, TileStats, TraceMark,
};
use crate::physics::{
    body_force, forcing_delta, inter_force, intra_force, pr_pressure, pseudo_potential, ComponentParams,
    CouplingMatrix,
};
use crate::sched::{assign_device, record_exchange, transfer_size, AssignmentState, DeviceTopology, Policy};
use crate::Error;

/// Upper bound on the number of fluid components.
pub const MAX_COMPONENTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunMode {
    /// The whole bounding box is tiled at iteration 0.
    Static,
    /// Tiles are created as the flow reaches them.
    Progressive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Density,
    PsiExchange,
    Collide,
    Stream,
    Moments,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Density => "P1-density",
            Phase::PsiExchange => "P2-psi-exchange",
            Phase::Collide => "P3-collide",
            Phase::Stream => "P4-stream",
            Phase::Moments => "P5-moments",
        })
    }
}

/// Runs per-tile tasks of one phase. Implementations may run tasks on
/// different tiles concurrently but must finish all of them before returning.
pub trait Executor {
    fn for_each_tile(&self, tiles: &mut [Tile], task: &(dyn Fn(usize, &mut Tile) + Sync));

    /// `staging[k]` belongs to `tiles[k]`; the tiles are read-only here.
    fn for_each_halo(&self, tiles: &[Tile], staging: &mut [Vec<f64>], task: &(dyn Fn(usize, &mut Vec<f64>) + Sync));
}

/// Visits tiles one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn for_each_tile(&self, tiles: &mut [Tile], task: &(dyn Fn(usize, &mut Tile) + Sync)) {
        for (k, t) in tiles.iter_mut().enumerate() {
            task(k, t);
        }
    }

    fn for_each_halo(&self, _tiles: &[Tile], staging: &mut [Vec<f64>], task: &(dyn Fn(usize, &mut Vec<f64>) + Sync)) {
        for (k, s) in staging.iter_mut().enumerate() {
            task(k, s);
        }
    }
}

/// Seed region shapes, in global cell coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// Cells with `min <= c < max` on every axis.
    Box { min: [f64; 3], max: [f64; 3] },
    /// Cells with `|c - center| <= radius`.
    Sphere { center: [f64; 3], radius: f64 },
}

impl Region {
    pub fn contains(&self, c: [usize; 3]) -> bool {
        let c = [c[0] as f64, c[1] as f64, c[2] as f64];
        match self {
            Region::Box { min, max } => (0..3).all(|a| c[a] >= min[a] && c[a] < max[a]),
            Region::Sphere { center, radius } => {
                let d: f64 = (0..3).map(|a| (c[a] - center[a]) * (c[a] - center[a])).sum();
                d <= radius * radius
            }
        }
    }
}

/// Initial condition: fluid cells inside `region` start at the equilibrium of
/// the given per-component density and velocity. Later seeds win.
#[derive(Debug, Clone, PartialEq)]
pub struct Seed {
    pub region: Region,
    pub density: Vec<f64>,
    pub velocity: Vec<[f64; 3]>,
}

#[derive(Debug, Clone)]
pub struct SimulationSetup {
    pub stencil: StencilKind,
    pub tile_extent: usize,
    pub geometry: GeometryMask,
    pub periodic: [bool; 3],
    pub components: Vec<ComponentParams>,
    pub coupling: CouplingMatrix,
    pub topology: DeviceTopology,
    pub policy: Policy,
    pub mode: RunMode,
    pub threshold: f64,
    pub seeds: Vec<Seed>,
    /// Record boundary/interior completion marks during collision.
    pub trace: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub negative_populations: u64,
    pub psi_clamps: u64,
    pub zero_density_forces: u64,
    pub suppressed_expansions: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub iteration: u64,
    pub tile: TileCoord,
    pub mark: TraceMark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Rho,
    UMagnitude,
    Psi,
}

/// Largest differences between a progressive run and its static reference.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Equivalence {
    /// Over cells present in both runs: populations, density and velocity.
    pub active_max_diff: f64,
    /// Over static cells whose tile the progressive run never created,
    /// measured against the ambient reference state.
    pub inactive_max_dev: f64,
    pub compared_cells: usize,
}

/// Per-cell collision inputs shared by tiles and the ambient reference.
struct Kernel<'a> {
    s: &'a Stencil,
    params: &'a [ComponentParams],
    coupling: &'a CouplingMatrix,
}

impl Kernel<'_> {
    /// Forces, velocity-shift increment and BGK relaxation for every component of one cell.
    #[inline]
    fn relax(
        &self,
        psi_here: &[f64; MAX_COMPONENTS],
        psi_nbr: &[[f64; MAX_Q]; MAX_COMPONENTS],
        rho: &[f64; MAX_COMPONENTS],
        u: &[[f64; 3]; MAX_COMPONENTS],
        f: &mut [[f64; MAX_Q]; MAX_COMPONENTS],
        stats: &mut TileStats,
    ) {
        let s = self.s;
        let mut feq = [0.0; MAX_Q];
        for c in 0..self.params.len() {
            let p = &self.params[c];
            let mut force = intra_force(psi_here[c], &psi_nbr[c], p.g_self, p.beta, s);
            for other in 0..self.params.len() {
                if other == c {
                    continue;
                }
                let fx = inter_force(psi_here[c], &psi_nbr[other], self.coupling.get(c, other), s);
                for d in 0..3 {
                    force[d] += fx[d];
                }
            }
            let g = body_force(rho[c], p.gravity);
            for d in 0..3 {
                force[d] += g[d];
            }
            let (delta, zero_rho) = forcing_delta(rho[c], u[c], force, s);
            stats.zero_density_forces += u64::from(zero_rho);
            equilibrium_into(rho[c], u[c], s, &mut feq);
            collide_bgk_in_place(&mut f[c][..s.q], &feq[..s.q], p.tau, &delta[..s.q]);
            stats.negative_populations += f[c][..s.q].iter().filter(|&&v| v < 0.0).count() as u64;
        }
    }
}

pub struct Simulation {
    map: TileMap,
    ambient: AmbientState,
    params: Vec<ComponentParams>,
    coupling: CouplingMatrix,
    topology: DeviceTopology,
    assignment: AssignmentState,
    policy: Policy,
    mode: RunMode,
    threshold: f64,
    iteration: u64,
    diagnostics: Diagnostics,
    cell_updates: u64,
    transfer: u64,
    trace: Option<Vec<TraceEvent>>,
    staging: Vec<Vec<f64>>,
    offsets: [isize; MAX_Q],
}

impl Simulation {
    pub fn new(setup: SimulationSetup) -> Result<Self, Error> {
        let stencil = make_stencil(setup.stencil);
        let n = setup.components.len();
        if n == 0 || n > MAX_COMPONENTS {
            return Err(Error::InvalidParameter("between 1 and 4 components are supported"));
        }
        for p in &setup.components {
            p.validate()?;
        }
        if setup.coupling.len() != n {
            return Err(Error::InvalidParameter("coupling matrix size must match the component count"));
        }
        setup.coupling.validate()?;
        if !(setup.threshold >= 0.0) {
            return Err(Error::InvalidParameter("threshold must be non-negative"));
        }
        for seed in &setup.seeds {
            if seed.density.len() != n || seed.velocity.len() != n {
                return Err(Error::InvalidParameter("seed density/velocity must list every component"));
            }
            if seed.density.iter().any(|&r| !(r >= 0.0)) {
                return Err(Error::InvalidParameter("seed densities must be non-negative"));
            }
        }
        if stencil.dim() == 2 && (setup.geometry.dims()[2] != 1) {
            return Err(Error::InvalidParameter("2-D stencils need a domain one cell deep in z"));
        }
        let ambient = AmbientState::new(&setup.components, &stencil)?;
        let map = TileMap::new(stencil, setup.tile_extent, setup.geometry, setup.periodic, n)?;
        let transfer = transfer_size(map.shape.face_area(), n, &stencil);
        let mut offsets = [0isize; MAX_Q];
        for i in 0..stencil.q {
            offsets[i] = map.shape.offset(stencil.e[i]);
        }
        let mut sim = Simulation {
            assignment: AssignmentState::new(setup.topology.n_devices()),
            map,
            ambient,
            params: setup.components,
            coupling: setup.coupling,
            topology: setup.topology,
            policy: setup.policy,
            mode: setup.mode,
            threshold: setup.threshold,
            iteration: 0,
            diagnostics: Diagnostics::default(),
            cell_updates: 0,
            transfer,
            trace: setup.trace.then(Vec::new),
            staging: Vec::new(),
            offsets,
        };
        let initial: Vec<TileCoord> = match sim.mode {
            RunMode::Static => sim.map.grid.all().collect(),
            RunMode::Progressive => sim.seeded_tiles(&setup.seeds),
        };
        if initial.is_empty() {
            return Err(Error::InvalidParameter("progressive mode needs at least one seed region with fluid cells"));
        }
        for c in initial {
            let idx = sim.map.create_tile(c, &sim.ambient, 0, None)?;
            sim.assign(idx)?;
        }
        sim.apply_seeds(&setup.seeds);
        Ok(sim)
    }

    fn seeded_tiles(&self, seeds: &[Seed]) -> Vec<TileCoord> {
        let mut out = BTreeSet::new();
        let ext = self.map.shape.ext();
        let zext = if self.map.grid.dim == 3 { ext } else { 1 };
        let geo = self.map.geometry();
        for c in self.map.grid.all() {
            let found = (0..zext).any(|z| {
                (0..ext).any(|y| {
                    (0..ext).any(|x| {
                        let g = [c.x as usize * ext + x, c.y as usize * ext + y, c.z as usize * zext + z];
                        !geo.is_solid(g) && seeds.iter().any(|s| s.region.contains(g))
                    })
                })
            });
            if found {
                out.insert(c);
            }
        }
        out.into_iter().collect()
    }

    fn apply_seeds(&mut self, seeds: &[Seed]) {
        let s = self.map.stencil;
        let shape = self.map.shape.clone();
        let pn = shape.padded_len();
        let coords: Vec<TileCoord> = self.map.tiles().iter().map(|t| t.coords).collect();
        let globals: Vec<Vec<[usize; 3]>> = coords
            .iter()
            .map(|&c| {
                shape
                    .cells()
                    .iter()
                    .map(|&p| self.map.global_cell(c, shape.coords(p as usize)).expect("interior cell"))
                    .collect()
            })
            .collect();
        let mut feq = [0.0; MAX_Q];
        for (t, tile) in self.map.tiles_mut().iter_mut().enumerate() {
            for (k, &p) in shape.cells().iter().enumerate() {
                let p = p as usize;
                if tile.solid[p] {
                    continue;
                }
                let Some(seed) = seeds.iter().rev().find(|sd| sd.region.contains(globals[t][k])) else {
                    continue;
                };
                for (c, comp) in tile.comps.iter_mut().enumerate() {
                    equilibrium_into(seed.density[c], seed.velocity[c], &s, &mut feq);
                    for i in 0..s.q {
                        comp.f[i * pn + p] = feq[i];
                    }
                    let mut local = [0.0; MAX_Q];
                    for i in 0..s.q {
                        local[i] = comp.f[i * pn + p];
                    }
                    let (rho, u) = moments(&local[..s.q], &s);
                    comp.rho[p] = rho;
                    comp.u[p] = u;
                }
            }
        }
    }

    fn assign(&mut self, idx: usize) -> Result<(), Error> {
        let coords = self.map.tiles()[idx].coords;
        let d = assign_device(
            coords,
            &self.map,
            &self.map.grid,
            &self.topology,
            &mut self.assignment,
            self.policy,
            self.transfer,
        );
        self.map.assign_owner(idx, d)
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn mode(&self) -> RunMode {
        self.mode
    }

    pub fn map(&self) -> &TileMap {
        &self.map
    }

    /// Direct tile access for tests and tools; changing the tile set is not possible through it.
    pub fn tiles_mut(&mut self) -> &mut [Tile] {
        self.map.tiles_mut()
    }

    pub fn ambient(&self) -> &AmbientState {
        &self.ambient
    }

    pub fn params(&self) -> &[ComponentParams] {
        &self.params
    }

    pub fn stencil(&self) -> &Stencil {
        &self.map.stencil
    }

    pub fn topology(&self) -> &DeviceTopology {
        &self.topology
    }

    pub fn assignment(&self) -> &AssignmentState {
        &self.assignment
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    /// Fluid-cell updates performed so far.
    pub fn cell_updates(&self) -> u64 {
        self.cell_updates
    }

    /// Bytes moved through one tile face per exchange.
    pub fn transfer_size(&self) -> u64 {
        self.transfer
    }

    pub fn creation_log(&self) -> &[CreationEvent] {
        self.map.creation_log()
    }

    pub fn trace(&self) -> &[TraceEvent] {
        self.trace.as_deref().unwrap_or(&[])
    }

    /// Number of fluid cells in the bounding box.
    pub fn domain_fluid_cells(&self) -> usize {
        let g = self.map.geometry();
        g.flags().len() - g.solid_count()
    }

    /// Total mass of a component over fluid cells, summed from populations.
    pub fn total_mass(&self, comp: usize) -> f64 {
        let s = &self.map.stencil;
        let pn = self.map.shape.padded_len();
        let mut sum = 0.0;
        for tile in self.map.tiles() {
            let f = &tile.comps[comp].f;
            for &p in self.map.shape.cells() {
                let p = p as usize;
                if tile.solid[p] {
                    continue;
                }
                for i in 0..s.q {
                    sum += f[i * pn + p];
                }
            }
        }
        sum
    }

    /// Advances one iteration.
    pub fn step(&mut self, exec: &dyn Executor) -> Result<(), Error> {
        let iteration = self.iteration;
        let active = self.map.active_report().active_cells as u64;

        self.phase_density(exec)?;
        self.exchange_halos(HaloKind::Psi, exec);
        self.phase_collide(exec)?;
        self.exchange_halos(HaloKind::Populations, exec);
        self.phase_stream(exec)?;
        self.phase_moments(exec)?;
        if self.mode == RunMode::Progressive {
            self.grow(exec)?;
        }

        self.iteration = iteration + 1;
        self.cell_updates += active;
        Ok(())
    }

    fn check_faults(&mut self, phase: Phase) -> Result<(), Error> {
        let mut stats = TileStats::default();
        let mut fault = None;
        for tile in self.map.tiles_mut() {
            stats.negative_populations += tile.stats.negative_populations;
            stats.psi_clamps += tile.stats.psi_clamps;
            stats.zero_density_forces += tile.stats.zero_density_forces;
            tile.stats = TileStats::default();
            if fault.is_none() {
                if let Some(f) = tile.fault.take() {
                    fault = Some((tile.coords, f));
                }
            }
        }
        self.diagnostics.negative_populations += stats.negative_populations;
        self.diagnostics.psi_clamps += stats.psi_clamps;
        self.diagnostics.zero_density_forces += stats.zero_density_forces;
        match fault {
            Some((tile, fault)) => Err(Error::Step {
                iteration: self.iteration,
                tile,
                phase,
                fault,
            }),
            None => Ok(()),
        }
    }

    fn phase_density(&mut self, exec: &dyn Executor) -> Result<(), Error> {
        let s = self.map.stencil;
        let (shape, _, tiles) = self.map.split_mut();
        let params = &self.params;
        let task = |_: usize, tile: &mut Tile| {
            let pn = shape.padded_len();
            let mut local = [0.0; MAX_Q];
            for (c, p_c) in params.iter().enumerate() {
                let comp = &mut tile.comps[c];
                for &p in shape.cells() {
                    let p = p as usize;
                    comp.u_prev[p] = comp.u[p];
                    if tile.solid[p] {
                        comp.psi[p] = 0.0;
                        continue;
                    }
                    for i in 0..s.q {
                        local[i] = comp.f[i * pn + p];
                    }
                    let (rho, _) = moments(&local[..s.q], &s);
                    comp.rho[p] = rho;
                    let press = match pr_pressure(rho, p_c) {
                        Ok(v) => v,
                        Err(_) => {
                            tile.fault.get_or_insert(TileFault::EosPole);
                            continue;
                        }
                    };
                    let (psi, clamped) = pseudo_potential(rho, press, p_c.g_self, s.cs2);
                    comp.psi[p] = psi;
                    tile.stats.psi_clamps += u64::from(clamped);
                    if !psi.is_finite() {
                        tile.fault.get_or_insert(TileFault::NonFinite);
                    }
                }
            }
        };
        exec.for_each_tile(tiles, &task);
        self.diagnostics.psi_clamps += self.ambient.update_psi(&self.params, &s)?;
        self.check_faults(Phase::Density)
    }

    /// Fills every tile's halo (pseudo-potentials or incoming populations) from
    /// its face neighbours or the ambient state, and accounts the bytes moved.
    pub fn exchange_halos(&mut self, kind: HaloKind, exec: &dyn Executor) {
        let n = self.map.len();
        self.staging.resize_with(n, Vec::new);
        {
            let map = &self.map;
            let ambient = &self.ambient;
            exec.for_each_halo(map.tiles(), &mut self.staging, &|t, out| {
                map.gather_ghosts(t, kind, ambient, out)
            });
        }
        let staging = &self.staging;
        let iteration = self.iteration;
        let (shape, plan, tiles) = self.map.split_mut();
        exec.for_each_tile(tiles, &|t, tile| {
            scatter_ghosts(tile, shape, plan, kind, &staging[t]);
            match kind {
                HaloKind::Psi => tile.psi_halo_iteration = Some(iteration),
                HaloKind::Populations => tile.f_halo_iteration = Some(iteration),
            }
        });
        let size = self.transfer;
        for tile in self.map.tiles() {
            let to = tile.owner().expect("assigned tile");
            for nb in tile.neighbors.iter().flatten() {
                let from = self.map.tiles()[*nb as usize].owner().expect("assigned tile");
                record_exchange(to, from, size, &mut self.topology);
            }
        }
    }

    fn phase_collide(&mut self, exec: &dyn Executor) -> Result<(), Error> {
        let s = self.map.stencil;
        let kernel = Kernel {
            s: &s,
            params: &self.params,
            coupling: &self.coupling,
        };
        let (shape, _, tiles) = self.map.split_mut();
        let offsets = self.offsets;
        let tracing = self.trace.is_some();
        let iteration = self.iteration;
        let nc = self.params.len();
        let task = |_: usize, tile: &mut Tile| {
            if tile.psi_halo_iteration != Some(iteration) {
                tile.fault.get_or_insert(TileFault::MissingHalo);
                return;
            }
            let pn = shape.padded_len();
            let mut stats = TileStats::default();
            let mut psi_here = [0.0; MAX_COMPONENTS];
            let mut psi_nbr = [[0.0; MAX_Q]; MAX_COMPONENTS];
            let mut rho = [0.0; MAX_COMPONENTS];
            let mut u = [[0.0; 3]; MAX_COMPONENTS];
            let mut f = [[0.0; MAX_Q]; MAX_COMPONENTS];
            for (cells, mark) in [
                (shape.boundary_cells(), TraceMark::BoundaryDone),
                (shape.interior_cells(), TraceMark::InteriorDone),
            ] {
                for &p in cells {
                    let p = p as usize;
                    if tile.solid[p] {
                        continue;
                    }
                    for c in 0..nc {
                        let comp = &tile.comps[c];
                        psi_here[c] = comp.psi[p];
                        for i in 0..s.q {
                            psi_nbr[c][i] = comp.psi[(p as isize + offsets[i]) as usize];
                            f[c][i] = comp.f[i * pn + p];
                        }
                        rho[c] = comp.rho[p];
                        u[c] = comp.u[p];
                    }
                    kernel.relax(&psi_here, &psi_nbr, &rho, &u, &mut f, &mut stats);
                    for c in 0..nc {
                        let comp = &mut tile.comps[c];
                        for i in 0..s.q {
                            comp.f[i * pn + p] = f[c][i];
                        }
                    }
                }
                if tracing {
                    tile.trace.push(mark);
                }
            }
            tile.stats.negative_populations += stats.negative_populations;
            tile.stats.zero_density_forces += stats.zero_density_forces;
        };
        exec.for_each_tile(tiles, &task);

        // The ambient reference cell sees a uniform neighbourhood.
        let mut psi_here = [0.0; MAX_COMPONENTS];
        let mut psi_nbr = [[0.0; MAX_Q]; MAX_COMPONENTS];
        let mut rho = [0.0; MAX_COMPONENTS];
        let mut u = [[0.0; 3]; MAX_COMPONENTS];
        let mut f = [[0.0; MAX_Q]; MAX_COMPONENTS];
        for c in 0..nc {
            psi_here[c] = self.ambient.psi[c];
            psi_nbr[c] = [self.ambient.psi[c]; MAX_Q];
            rho[c] = self.ambient.rho[c];
            u[c] = self.ambient.u[c];
            f[c] = self.ambient.f[c];
        }
        let mut ambient_stats = TileStats::default();
        kernel.relax(&psi_here, &psi_nbr, &rho, &u, &mut f, &mut ambient_stats);
        self.ambient.f[..nc].copy_from_slice(&f[..nc]);

        if let Some(log) = self.trace.as_mut() {
            for tile in self.map.tiles_mut() {
                for mark in tile.trace.drain(..) {
                    log.push(TraceEvent {
                        iteration,
                        tile: tile.coords,
                        mark,
                    });
                }
            }
        }
        self.check_faults(Phase::Collide)
    }

    fn phase_stream(&mut self, exec: &dyn Executor) -> Result<(), Error> {
        let s = self.map.stencil;
        let iteration = self.iteration;
        let (shape, _, tiles) = self.map.split_mut();
        exec.for_each_tile(tiles, &|_, tile| {
            if tile.f_halo_iteration != Some(iteration) {
                tile.fault.get_or_insert(TileFault::MissingHalo);
                return;
            }
            let solid = &tile.solid;
            for comp in tile.comps.iter_mut() {
                crate::lattice::stream(shape, &s, solid, &comp.f, &mut comp.f_next);
                crate::lattice::bounce_back(shape, &s, solid, &comp.f, &mut comp.f_next);
                core::mem::swap(&mut comp.f, &mut comp.f_next);
            }
        });
        self.check_faults(Phase::Stream)
    }

    fn phase_moments(&mut self, exec: &dyn Executor) -> Result<(), Error> {
        let s = self.map.stencil;
        let (shape, _, tiles) = self.map.split_mut();
        exec.for_each_tile(tiles, &|_, tile| {
            let pn = shape.padded_len();
            let mut local = [0.0; MAX_Q];
            let mut bad = false;
            for comp in tile.comps.iter_mut() {
                for &p in shape.cells() {
                    let p = p as usize;
                    if tile.solid[p] {
                        continue;
                    }
                    for i in 0..s.q {
                        local[i] = comp.f[i * pn + p];
                    }
                    let (rho, u) = moments(&local[..s.q], &s);
                    bad |= !(rho.is_finite() && u[0].is_finite() && u[1].is_finite() && u[2].is_finite());
                    comp.rho[p] = rho;
                    comp.u[p] = u;
                }
            }
            if bad {
                tile.fault.get_or_insert(TileFault::NonFinite);
            }
        });
        self.ambient.update_moments(&s);
        self.check_faults(Phase::Moments)
    }

    /// Activation criterion, then creation and assignment of new tiles.
    fn grow(&mut self, exec: &dyn Executor) -> Result<(), Error> {
        let s = self.map.stencil;
        let shape = self.map.shape.clone();
        let grid = self.map.grid;
        let threshold = self.threshold;
        exec.for_each_tile(self.map.tiles_mut(), &|_, tile| {
            tile.triggers = evaluate_criterion(tile, &shape, &s, &grid, threshold);
        });
        let mut triggers: Vec<(TileCoord, Face)> = Vec::new();
        for tile in self.map.tiles_mut() {
            for face in tile.triggers.drain(..) {
                triggers.push((tile.coords, face));
            }
        }
        if triggers.is_empty() {
            return Ok(());
        }
        let before = self.map.suppressed().len();
        let created = self.map.expand(&triggers, &self.ambient, self.iteration + 1)?;
        self.diagnostics.suppressed_expansions += (self.map.suppressed().len() - before) as u64;
        for idx in created {
            self.assign(idx)?;
        }
        Ok(())
    }

    /// Bounding-box field, x-fastest. Solid cells read 0; cells of absent
    /// tiles read the ambient value, which is also returned.
    pub fn sample_field(&self, kind: FieldKind, comp: usize) -> (Vec<f64>, f64) {
        let dims = self.map.geometry().dims();
        let fill = match kind {
            FieldKind::Rho => self.ambient.rho[comp],
            FieldKind::UMagnitude => norm(self.ambient.u[comp]),
            FieldKind::Psi => self.ambient.psi[comp],
        };
        let geo = self.map.geometry();
        let mut out = vec![0.0; dims[0] * dims[1] * dims[2]];
        for (k, v) in out.iter_mut().enumerate() {
            let g = [k % dims[0], (k / dims[0]) % dims[1], k / (dims[0] * dims[1])];
            if !geo.is_solid(g) {
                *v = fill;
            }
        }
        let shape = &self.map.shape;
        for tile in self.map.tiles() {
            let comp_f = &tile.comps[comp];
            for &p in shape.cells() {
                let p = p as usize;
                let g = self.map.global_cell(tile.coords, shape.coords(p)).expect("interior cell");
                let k = g[0] + dims[0] * (g[1] + dims[1] * g[2]);
                out[k] = if tile.solid[p] {
                    0.0
                } else {
                    match kind {
                        FieldKind::Rho => comp_f.rho[p],
                        FieldKind::UMagnitude => norm(comp_f.u[p]),
                        FieldKind::Psi => comp_f.psi[p],
                    }
                };
            }
        }
        (out, fill)
    }

    /// Compares this (progressive) run against a static run of the same scenario
    /// at the same iteration.
    pub fn equivalence(&self, reference: &Simulation) -> Equivalence {
        let s = &self.map.stencil;
        let shape = &self.map.shape;
        let pn = shape.padded_len();
        let mut eq = Equivalence::default();
        for rt in reference.map.tiles() {
            let mine = self.map.get(rt.coords);
            for (c, rc) in rt.comps.iter().enumerate() {
                for &p in shape.cells() {
                    let p = p as usize;
                    if rt.solid[p] {
                        continue;
                    }
                    let mut dev: f64 = 0.0;
                    match mine {
                        Some(t) => {
                            let mc = &t.comps[c];
                            dev = dev.max((mc.rho[p] - rc.rho[p]).abs());
                            for d in 0..3 {
                                dev = dev.max((mc.u[p][d] - rc.u[p][d]).abs());
                            }
                            for i in 0..s.q {
                                dev = dev.max((mc.f[i * pn + p] - rc.f[i * pn + p]).abs());
                            }
                            eq.active_max_diff = eq.active_max_diff.max(dev);
                            eq.compared_cells += 1;
                        }
                        None => {
                            let a = &reference.ambient;
                            dev = dev.max((a.rho[c] - rc.rho[p]).abs());
                            for d in 0..3 {
                                dev = dev.max((a.u[c][d] - rc.u[p][d]).abs());
                            }
                            for i in 0..s.q {
                                dev = dev.max((a.f[c][i] - rc.f[i * pn + p]).abs());
                            }
                            eq.inactive_max_dev = eq.inactive_max_dev.max(dev);
                        }
                    }
                }
            }
        }
        eq
    }

    /// Shape of every tile.
    pub fn shape(&self) -> &TileShape {
        &self.map.shape
    }
}

fn norm(v: [f64; 3]) -> f64 {
    libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
}
