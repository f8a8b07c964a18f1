//! The progressive mesh: a sparse map of fixed-size tiles that only grows.
//!
//! Tiles see each other through a one-cell halo. Halo cells beyond an edge or
//! corner are routed through face neighbours, highest axis first, which is
//! what an ordered x-then-y-then-z face exchange produces. A halo cell with no
//! tile behind it takes the ambient reference state.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::grid::TileShape;
use crate::lattice::{equilibrium, moments, Stencil, MAX_Q};
use crate::physics::{pr_pressure, pseudo_potential, ComponentParams};
use crate::sched::{DeviceId, OwnerLookup};
use crate::Error;

/// Integer tile-lattice coordinates, ordered lexicographically by `(x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TileCoord {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl TileCoord {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        TileCoord { x, y, z }
    }

    pub fn get(self, axis: usize) -> i32 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    fn with(mut self, axis: usize, v: i32) -> Self {
        match axis {
            0 => self.x = v,
            1 => self.y = v,
            _ => self.z = v,
        }
        self
    }
}

impl fmt::Display for TileCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Face {
    XMinus,
    XPlus,
    YMinus,
    YPlus,
    ZMinus,
    ZPlus,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face::XMinus,
        Face::XPlus,
        Face::YMinus,
        Face::YPlus,
        Face::ZMinus,
        Face::ZPlus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn axis(self) -> usize {
        self.index() / 2
    }

    pub fn sign(self) -> i32 {
        if self.index() % 2 == 0 {
            -1
        } else {
            1
        }
    }

    pub fn from_axis(axis: usize, sign: i32) -> Face {
        Face::ALL[axis * 2 + usize::from(sign > 0)]
    }

    pub fn opposite(self) -> Face {
        Face::from_axis(self.axis(), -self.sign())
    }

    pub fn name(self) -> &'static str {
        ["-x", "+x", "-y", "+y", "-z", "+z"][self.index()]
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Bounds of the tile lattice and its periodicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileGrid {
    pub dims: [i32; 3],
    pub periodic: [bool; 3],
    pub dim: usize,
}

impl TileGrid {
    pub fn new(dims: [i32; 3], periodic: [bool; 3], dim: usize) -> Self {
        TileGrid { dims, periodic, dim }
    }

    pub fn contains(&self, c: TileCoord) -> bool {
        (0..3).all(|a| (0..self.dims[a]).contains(&c.get(a)))
    }

    pub fn faces(&self) -> impl Iterator<Item = Face> {
        Face::ALL.into_iter().take(2 * self.dim)
    }

    /// Face neighbour, wrapped on periodic axes; `None` beyond a closed bound.
    pub fn neighbor(&self, c: TileCoord, face: Face) -> Option<TileCoord> {
        let a = face.axis();
        let mut v = c.get(a) + face.sign();
        if !(0..self.dims[a]).contains(&v) {
            if !self.periodic[a] {
                return None;
            }
            v = v.rem_euclid(self.dims[a]);
        }
        Some(c.with(a, v))
    }

    pub fn tile_count(&self) -> usize {
        (self.dims[0] * self.dims[1] * self.dims[2]) as usize
    }

    /// All tile coordinates in lexicographic order.
    pub fn all(&self) -> impl Iterator<Item = TileCoord> + '_ {
        (0..self.dims[0]).flat_map(move |x| {
            (0..self.dims[1]).flat_map(move |y| (0..self.dims[2]).map(move |z| TileCoord::new(x, y, z)))
        })
    }
}

/// Per-cell solid flags over the whole bounding box, x-fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeometryMask {
    dims: [usize; 3],
    solid: Vec<bool>,
}

impl GeometryMask {
    pub fn open(dims: [usize; 3]) -> Self {
        GeometryMask {
            dims,
            solid: vec![false; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_flags(dims: [usize; 3], solid: Vec<bool>) -> Result<Self, Error> {
        if solid.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::GeometrySize);
        }
        Ok(GeometryMask { dims, solid })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn flags(&self) -> &[bool] {
        &self.solid
    }

    pub fn solid_count(&self) -> usize {
        self.solid.iter().filter(|&&s| s).count()
    }

    #[inline]
    pub fn is_solid(&self, c: [usize; 3]) -> bool {
        self.solid[c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])]
    }

    pub fn set(&mut self, c: [usize; 3], solid: bool) {
        let i = c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2]);
        self.solid[i] = solid;
    }
}

/// Reference state of never-touched fluid, advanced with the same cell kernel
/// as the tiles so that ambient ghosts and fresh tiles match untouched cells
/// bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientState {
    pub rho_ambient: Vec<f64>,
    pub f: Vec<[f64; MAX_Q]>,
    pub rho: Vec<f64>,
    pub u: Vec<[f64; 3]>,
    pub psi: Vec<f64>,
}

impl AmbientState {
    pub fn new(params: &[ComponentParams], s: &Stencil) -> Result<Self, Error> {
        let mut st = AmbientState {
            rho_ambient: params.iter().map(|p| p.rho_ambient).collect(),
            f: params.iter().map(|p| equilibrium(p.rho_ambient, [0.0; 3], s)).collect(),
            rho: vec![0.0; params.len()],
            u: vec![[0.0; 3]; params.len()],
            psi: vec![0.0; params.len()],
        };
        st.update_moments(s);
        st.update_psi(params, s)?;
        Ok(st)
    }

    pub fn n_components(&self) -> usize {
        self.f.len()
    }

    pub fn update_moments(&mut self, s: &Stencil) {
        for c in 0..self.f.len() {
            let (rho, u) = moments(&self.f[c][..s.q], s);
            self.rho[c] = rho;
            self.u[c] = u;
        }
    }

    /// Returns the number of clamped pseudo-potentials.
    pub fn update_psi(&mut self, params: &[ComponentParams], s: &Stencil) -> Result<u64, Error> {
        let mut clamps = 0;
        for c in 0..self.f.len() {
            let (rho, _) = moments(&self.f[c][..s.q], s);
            self.rho[c] = rho;
            let p = pr_pressure(rho, &params[c])?;
            let (psi, clamped) = pseudo_potential(rho, p, params[c].g_self, s.cs2);
            self.psi[c] = psi;
            clamps += u64::from(clamped);
        }
        Ok(clamps)
    }
}

/// Per-component fields of one tile. Every buffer uses the padded layout of
/// [`TileShape`]; populations are direction-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentField {
    pub f: Vec<f64>,
    pub f_next: Vec<f64>,
    pub rho: Vec<f64>,
    pub u: Vec<[f64; 3]>,
    pub u_prev: Vec<[f64; 3]>,
    pub psi: Vec<f64>,
}

/// Counters a tile accumulates during one phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TileStats {
    pub negative_populations: u64,
    pub psi_clamps: u64,
    pub zero_density_forces: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TileFault {
    NonFinite,
    EosPole,
    MissingHalo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceMark {
    BoundaryDone,
    InteriorDone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    pub coords: TileCoord,
    owner: Option<DeviceId>,
    pub birth_iteration: u64,
    pub solid: Vec<bool>,
    pub fluid_cells: usize,
    pub comps: Vec<ComponentField>,
    /// Face neighbours by [`Face::index`] as indices into the tile list.
    pub neighbors: [Option<u32>; 6],
    /// Source `(tile, padded index)` of every halo shell cell; `None` means ambient.
    pub ghost_src: Vec<Option<(u32, u32)>>,
    pub psi_halo_iteration: Option<u64>,
    pub f_halo_iteration: Option<u64>,
    pub stats: TileStats,
    pub fault: Option<TileFault>,
    pub triggers: Vec<Face>,
    pub trace: Vec<TraceMark>,
}

impl Tile {
    pub fn owner(&self) -> Option<DeviceId> {
        self.owner
    }

    /// Sets the owning device; a tile is assigned exactly once.
    pub fn assign_owner(&mut self, d: DeviceId) -> Result<(), Error> {
        if self.owner.is_some() {
            return Err(Error::AlreadyAssigned(self.coords));
        }
        self.owner = Some(d);
        Ok(())
    }

    pub fn is_solid(&self, p: usize) -> bool {
        self.solid[p]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CreationEvent {
    pub iteration: u64,
    pub coords: TileCoord,
    /// `None` for tiles created during initialisation.
    pub trigger: Option<Face>,
    pub owner: Option<DeviceId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuppressedExpansion {
    pub iteration: u64,
    pub from: TileCoord,
    pub face: Face,
}

/// Halo cells and populations each tile needs from outside itself.
#[derive(Debug, Clone, PartialEq)]
pub struct HaloPlan {
    /// Shell entries (indices into `TileShape::shell`) read by stencil neighbours.
    pub psi: Vec<u32>,
    /// `(shell entry, direction)` pairs whose population streams into the tile.
    pub f: Vec<(u32, u8)>,
}

impl HaloPlan {
    fn new(shape: &TileShape, s: &Stencil) -> Self {
        let e = shape.ext() as i32;
        let inside = |c: [i32; 3]| {
            (0..e).contains(&c[0]) && (0..e).contains(&c[1]) && (shape.dim() == 2 || (0..e).contains(&c[2]))
        };
        let mut psi = Vec::new();
        let mut f = Vec::new();
        for (k, &(_, c)) in shape.shell().iter().enumerate() {
            let mut needed = false;
            for i in 1..s.q {
                let d = s.e[i];
                if inside([c[0] + d[0], c[1] + d[1], c[2] + d[2]]) {
                    needed = true;
                    f.push((k as u32, i as u8));
                }
            }
            if needed {
                psi.push(k as u32);
            }
        }
        HaloPlan { psi, f }
    }
}

/// Bytes a tile keeps resident: per padded cell, per component the two
/// population buffers (`2q`), density, pseudo-potential and the two velocity
/// vectors, as 8-byte values, plus one solid flag byte.
pub fn tile_footprint(shape: &TileShape, q: usize, n_components: usize) -> u64 {
    (shape.padded_len() * (n_components * (2 * q + 8) * 8 + 1)) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ActiveReport {
    pub tiles: usize,
    pub active_cells: usize,
    pub bytes_resident: u64,
}

#[derive(Debug, Clone)]
pub struct TileMap {
    pub shape: TileShape,
    pub stencil: Stencil,
    pub grid: TileGrid,
    pub plan: HaloPlan,
    geometry: GeometryMask,
    n_components: usize,
    tiles: Vec<Tile>,
    index: BTreeMap<TileCoord, u32>,
    log: Vec<CreationEvent>,
    suppressed: Vec<SuppressedExpansion>,
}

impl TileMap {
    /// `periodic` applies per axis of the bounding box. The geometry dims must
    /// be whole multiples of `ext`.
    pub fn new(
        stencil: Stencil,
        ext: usize,
        geometry: GeometryMask,
        periodic: [bool; 3],
        n_components: usize,
    ) -> Result<Self, Error> {
        let dim = stencil.dim();
        if ext < 4 {
            return Err(Error::InvalidParameter("tile extent must be at least 4"));
        }
        let gd = geometry.dims();
        let zext = if dim == 3 { ext } else { 1 };
        let exts = [ext, ext, zext];
        if (0..3).any(|a| gd[a] == 0 || gd[a] % exts[a] != 0) {
            return Err(Error::InvalidParameter("domain size must be a multiple of the tile extent"));
        }
        let dims = [
            (gd[0] / ext) as i32,
            (gd[1] / ext) as i32,
            (gd[2] / zext) as i32,
        ];
        let shape = TileShape::new(ext, dim);
        let plan = HaloPlan::new(&shape, &stencil);
        Ok(TileMap {
            shape,
            stencil,
            grid: TileGrid::new(dims, periodic, dim),
            plan,
            geometry,
            n_components,
            tiles: Vec::new(),
            index: BTreeMap::new(),
            log: Vec::new(),
            suppressed: Vec::new(),
        })
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    pub fn tiles_mut(&mut self) -> &mut [Tile] {
        &mut self.tiles
    }

    /// Tiles together with the shared read-only layout.
    pub fn split_mut(&mut self) -> (&TileShape, &HaloPlan, &mut [Tile]) {
        (&self.shape, &self.plan, &mut self.tiles)
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn geometry(&self) -> &GeometryMask {
        &self.geometry
    }

    pub fn get(&self, c: TileCoord) -> Option<&Tile> {
        self.index.get(&c).map(|&i| &self.tiles[i as usize])
    }

    pub fn position(&self, c: TileCoord) -> Option<usize> {
        self.index.get(&c).map(|&i| i as usize)
    }

    pub fn creation_log(&self) -> &[CreationEvent] {
        &self.log
    }

    pub fn suppressed(&self) -> &[SuppressedExpansion] {
        &self.suppressed
    }

    pub fn tile_footprint(&self) -> u64 {
        tile_footprint(&self.shape, self.stencil.q, self.n_components)
    }

    /// Global cell coordinate of a tile-local (possibly halo) coordinate,
    /// wrapped on periodic axes; `None` outside a closed bound.
    pub fn global_cell(&self, t: TileCoord, local: [i32; 3]) -> Option<[usize; 3]> {
        let dims = self.geometry.dims();
        let ext = [self.shape.ext(), self.shape.ext(), if self.grid.dim == 3 { self.shape.ext() } else { 1 }];
        let mut out = [0usize; 3];
        for a in 0..3 {
            let mut v = t.get(a) as i64 * ext[a] as i64 + local[a] as i64;
            let n = dims[a] as i64;
            if !(0..n).contains(&v) {
                if !self.grid.periodic[a] {
                    return None;
                }
                v = v.rem_euclid(n);
            }
            out[a] = v as usize;
        }
        Some(out)
    }

    /// Allocates a tile at `coords` filled with the current ambient state.
    pub fn create_tile(
        &mut self,
        coords: TileCoord,
        ambient: &AmbientState,
        iteration: u64,
        trigger: Option<Face>,
    ) -> Result<usize, Error> {
        if !self.grid.contains(coords) {
            return Err(Error::OutOfBounds(coords));
        }
        if self.index.contains_key(&coords) {
            return Err(Error::DuplicateTile(coords));
        }
        let pn = self.shape.padded_len();
        let q = self.stencil.q;
        let mut solid = vec![false; pn];
        for p in 0..pn {
            let local = self.shape.coords(p);
            if let Some(g) = self.global_cell(coords, local) {
                solid[p] = self.geometry.is_solid(g);
            }
        }
        let fluid_cells = self.shape.cells().iter().filter(|&&p| !solid[p as usize]).count();
        let comps = (0..self.n_components)
            .map(|c| {
                let mut field = ComponentField {
                    f: vec![0.0; pn * q],
                    f_next: vec![0.0; pn * q],
                    rho: vec![0.0; pn],
                    u: vec![[0.0; 3]; pn],
                    u_prev: vec![[0.0; 3]; pn],
                    psi: vec![0.0; pn],
                };
                for &p in self.shape.cells() {
                    let p = p as usize;
                    if solid[p] {
                        continue;
                    }
                    for i in 0..q {
                        field.f[i * pn + p] = ambient.f[c][i];
                    }
                    field.rho[p] = ambient.rho[c];
                    field.u[p] = ambient.u[c];
                }
                field
            })
            .collect();
        let idx = self.tiles.len();
        self.tiles.push(Tile {
            coords,
            owner: None,
            birth_iteration: iteration,
            solid,
            fluid_cells,
            comps,
            neighbors: [None; 6],
            ghost_src: Vec::new(),
            psi_halo_iteration: None,
            f_halo_iteration: None,
            stats: TileStats::default(),
            fault: None,
            triggers: Vec::new(),
            trace: Vec::new(),
        });
        self.index.insert(coords, idx as u32);
        self.log.push(CreationEvent {
            iteration,
            coords,
            trigger,
            owner: None,
        });
        self.link(idx);
        Ok(idx)
    }

    /// Records the owner of a tile in both the tile and the creation log.
    pub fn assign_owner(&mut self, idx: usize, d: DeviceId) -> Result<(), Error> {
        self.tiles[idx].assign_owner(d)?;
        let coords = self.tiles[idx].coords;
        if let Some(ev) = self.log.iter_mut().rev().find(|e| e.coords == coords) {
            ev.owner = Some(d);
        }
        Ok(())
    }

    /// Refreshes neighbour tables and halo routing around a newly inserted tile.
    /// Edge halos route through two face hops, so tiles up to two hops away are touched.
    fn link(&mut self, new: usize) {
        let grid = self.grid;
        let mut affected = vec![new];
        let mut k = 0;
        for _ in 0..2 {
            let end = affected.len();
            while k < end {
                let c = self.tiles[affected[k]].coords;
                for face in grid.faces() {
                    if let Some(n) = grid.neighbor(c, face).and_then(|n| self.index.get(&n)) {
                        if !affected.contains(&(*n as usize)) {
                            affected.push(*n as usize);
                        }
                    }
                }
                k += 1;
            }
        }
        for &t in &affected {
            let c = self.tiles[t].coords;
            let mut nb = [None; 6];
            for face in grid.faces() {
                nb[face.index()] = grid.neighbor(c, face).and_then(|n| self.index.get(&n).copied());
            }
            self.tiles[t].neighbors = nb;
        }
        let ext = self.shape.ext() as i32;
        for &t in &affected {
            let src: Vec<Option<(u32, u32)>> = self
                .shape
                .shell()
                .iter()
                .map(|&(_, local)| {
                    let mut tile = t as u32;
                    let mut c = local;
                    for axis in (0..grid.dim).rev() {
                        let face = if c[axis] < 0 {
                            c[axis] += ext;
                            Face::from_axis(axis, -1)
                        } else if c[axis] >= ext {
                            c[axis] -= ext;
                            Face::from_axis(axis, 1)
                        } else {
                            continue;
                        };
                        tile = self.tiles[tile as usize].neighbors[face.index()]?;
                    }
                    Some((tile, self.shape.index_signed(c) as u32))
                })
                .collect();
            self.tiles[t].ghost_src = src;
        }
    }

    /// Turns criterion triggers into new tiles. Coordinates reached from several
    /// tiles are created once; out-of-bounds targets are logged as suppressed.
    /// New tiles are returned in lexicographic coordinate order, unassigned.
    pub fn expand(
        &mut self,
        triggers: &[(TileCoord, Face)],
        ambient: &AmbientState,
        iteration: u64,
    ) -> Result<Vec<usize>, Error> {
        let mut wanted: BTreeMap<TileCoord, Face> = BTreeMap::new();
        for &(from, face) in triggers {
            match self.grid.neighbor(from, face) {
                None => self.suppressed.push(SuppressedExpansion { iteration, from, face }),
                Some(n) if self.index.contains_key(&n) => {}
                Some(n) => {
                    wanted.entry(n).or_insert(face);
                }
            }
        }
        let mut out = Vec::with_capacity(wanted.len());
        for (coords, face) in wanted {
            out.push(self.create_tile(coords, ambient, iteration, Some(face))?);
        }
        Ok(out)
    }

    pub fn active_report(&self) -> ActiveReport {
        ActiveReport {
            tiles: self.tiles.len(),
            active_cells: self.tiles.iter().map(|t| t.fluid_cells).sum(),
            bytes_resident: self.tiles.len() as u64 * self.tile_footprint(),
        }
    }

    /// Fills `out` with the halo values tile `t` needs: pseudo-potentials, or
    /// the incoming populations, component-major in [`HaloPlan`] order.
    pub fn gather_ghosts(&self, t: usize, kind: HaloKind, ambient: &AmbientState, out: &mut Vec<f64>) {
        ghost_values(&self.tiles, &self.shape, &self.plan, self.stencil.q, t, kind, ambient, out);
    }
}

impl OwnerLookup for TileMap {
    fn owner_of(&self, c: TileCoord) -> Option<DeviceId> {
        self.get(c).and_then(|t| t.owner)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaloKind {
    Psi,
    Populations,
}

/// Halo layer of tile `t`: neighbour data where a tile exists, ambient otherwise.
#[allow(clippy::too_many_arguments)]
pub fn ghost_values(
    tiles: &[Tile],
    shape: &TileShape,
    plan: &HaloPlan,
    q: usize,
    t: usize,
    kind: HaloKind,
    ambient: &AmbientState,
    out: &mut Vec<f64>,
) {
    out.clear();
    let tile = &tiles[t];
    let pn = shape.padded_len();
    let shell = shape.shell();
    for c in 0..tile.comps.len() {
        match kind {
            HaloKind::Psi => {
                for &k in &plan.psi {
                    let (p, _) = shell[k as usize];
                    let v = if tile.solid[p as usize] {
                        0.0
                    } else {
                        match tile.ghost_src[k as usize] {
                            Some((src, sp)) => tiles[src as usize].comps[c].psi[sp as usize],
                            None => ambient.psi[c],
                        }
                    };
                    out.push(v);
                }
            }
            HaloKind::Populations => {
                for &(k, i) in &plan.f {
                    let i = i as usize;
                    let v = match tile.ghost_src[k as usize] {
                        Some((src, sp)) => tiles[src as usize].comps[c].f[i * pn + sp as usize],
                        None => ambient.f[c][i],
                    };
                    out.push(v);
                }
            }
        }
    }
    debug_assert!(q <= MAX_Q);
}

/// Writes gathered halo values into the tile's padded buffers.
pub fn scatter_ghosts(tile: &mut Tile, shape: &TileShape, plan: &HaloPlan, kind: HaloKind, values: &[f64]) {
    let pn = shape.padded_len();
    let shell = shape.shell();
    let mut it = values.iter();
    for comp in tile.comps.iter_mut() {
        match kind {
            HaloKind::Psi => {
                for &k in &plan.psi {
                    comp.psi[shell[k as usize].0 as usize] = *it.next().expect("halo size");
                }
            }
            HaloKind::Populations => {
                for &(k, i) in &plan.f {
                    comp.f[i as usize * pn + shell[k as usize].0 as usize] = *it.next().expect("halo size");
                }
            }
        }
    }
}

/// Faces of `tile` that should spawn a neighbour: the neighbour is missing and
/// some cell of the face layer that can stream into it changed its velocity
/// by more than `threshold` (union over components).
pub fn evaluate_criterion(tile: &Tile, map_shape: &TileShape, stencil: &Stencil, grid: &TileGrid, threshold: f64) -> Vec<Face> {
    let ext = map_shape.ext() as i32;
    let mut out = Vec::new();
    for face in grid.faces() {
        if tile.neighbors[face.index()].is_some() {
            continue;
        }
        if face_change(tile, map_shape, stencil, face, ext) > threshold {
            out.push(face);
        }
    }
    out
}

/// Largest `|u - u_prev|` over the face layer cells that can send populations
/// into a fluid cell across `face`. Zero when no such cell exists.
pub fn face_change(tile: &Tile, shape: &TileShape, stencil: &Stencil, face: Face, ext: i32) -> f64 {
    let axis = face.axis();
    let layer = if face.sign() < 0 { 0 } else { ext - 1 };
    let mut max: f64 = 0.0;
    for &p in shape.boundary_cells() {
        let p = p as usize;
        if tile.solid[p] || shape.coords(p)[axis] != layer {
            continue;
        }
        let crosses = (1..stencil.q).any(|i| {
            stencil.e[i][axis] == face.sign() && !tile.solid[(p as isize + shape.offset(stencil.e[i])) as usize]
        });
        if !crosses {
            continue;
        }
        for comp in &tile.comps {
            let (u, v) = (comp.u[p], comp.u_prev[p]);
            let d = [u[0] - v[0], u[1] - v[1], u[2] - v[2]];
            let n = libm::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            if n > max || n.is_nan() {
                max = n;
            }
        }
    }
    max
}
