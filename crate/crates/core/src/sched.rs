//! Simulated device topology and tile-to-device assignment.
//!
//! The cost of placing a tile on a device is the sum, over its already
//! assigned face neighbours, of the per-link cost of one face transfer:
//! free on the same device, `weight_p2p * size` across a peer-to-peer link,
//! `weight_staged * size` otherwise.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::lattice::Stencil;
use crate::mesh::{TileCoord, TileGrid};
use crate::Error;

pub type DeviceId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkClass {
    Intra,
    P2p,
    Staged,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ByteCounters {
    pub intra: u64,
    pub p2p: u64,
    pub staged: u64,
}

impl ByteCounters {
    pub fn add(&mut self, class: LinkClass, bytes: u64) {
        match class {
            LinkClass::Intra => self.intra += bytes,
            LinkClass::P2p => self.p2p += bytes,
            LinkClass::Staged => self.staged += bytes,
        }
    }

    pub fn total(&self) -> u64 {
        self.intra + self.p2p + self.staged
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceTopology {
    n: usize,
    p2p: Vec<bool>,
    pub weight_p2p: f64,
    pub weight_staged: f64,
    pub counters: ByteCounters,
}

impl DeviceTopology {
    /// Builds a topology from a row-major reachability matrix.
    pub fn new(n: usize, p2p: Vec<bool>) -> Result<Self, Error> {
        if n == 0 {
            return Err(Error::InvalidTopology("at least one device is required"));
        }
        if p2p.len() != n * n {
            return Err(Error::InvalidTopology("p2p matrix must be n x n"));
        }
        for i in 0..n {
            if !p2p[i * n + i] {
                return Err(Error::InvalidTopology("p2p diagonal must be 1"));
            }
            for j in 0..n {
                if p2p[i * n + j] != p2p[j * n + i] {
                    return Err(Error::InvalidTopology("p2p matrix must be symmetric"));
                }
            }
        }
        Ok(DeviceTopology {
            n,
            p2p,
            weight_p2p: 0.5,
            weight_staged: 1.0,
            counters: ByteCounters::default(),
        })
    }

    /// Every device reaches every other one peer-to-peer.
    pub fn fully_connected(n: usize) -> Self {
        Self::new(n, vec![true; n * n]).expect("fully connected topology is valid")
    }

    /// Groups of consecutive devices with full P2P inside each group and none across.
    pub fn hubs(sizes: &[usize]) -> Self {
        let n: usize = sizes.iter().sum();
        let mut hub = Vec::with_capacity(n);
        for (h, &s) in sizes.iter().enumerate() {
            hub.extend(core::iter::repeat(h).take(s));
        }
        let p2p = (0..n * n).map(|k| hub[k / n] == hub[k % n]).collect();
        Self::new(n, p2p).expect("hub topology is valid")
    }

    pub fn with_weights(mut self, weight_p2p: f64, weight_staged: f64) -> Result<Self, Error> {
        if !(weight_p2p > 0.0 && weight_p2p <= weight_staged && weight_staged.is_finite()) {
            return Err(Error::InvalidTopology("weights must satisfy 0 < weight_p2p <= weight_staged"));
        }
        self.weight_p2p = weight_p2p;
        self.weight_staged = weight_staged;
        Ok(self)
    }

    /// The leading `n` x `n` block of this topology.
    pub fn restrict(&self, n: usize) -> Result<Self, Error> {
        if n == 0 || n > self.n {
            return Err(Error::InvalidTopology("device count exceeds topology size"));
        }
        let p2p = (0..n * n).map(|k| self.can_p2p(k / n, k % n)).collect();
        let mut t = Self::new(n, p2p)?;
        t.weight_p2p = self.weight_p2p;
        t.weight_staged = self.weight_staged;
        Ok(t)
    }

    pub fn n_devices(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn can_p2p(&self, a: DeviceId, b: DeviceId) -> bool {
        self.p2p[a * self.n + b]
    }

    pub fn class(&self, a: DeviceId, b: DeviceId) -> LinkClass {
        if a == b {
            LinkClass::Intra
        } else if self.can_p2p(a, b) {
            LinkClass::P2p
        } else {
            LinkClass::Staged
        }
    }
}

/// Bytes moved through one tile face per exchange: the crossing populations
/// plus one pseudo-potential value per component, 8 bytes each.
pub fn transfer_size(face_area_cells: usize, n_components: usize, stencil: &Stencil) -> u64 {
    (face_area_cells * n_components * (stencil.crossing_count() + 1) * 8) as u64
}

/// Cost of the link between a tile placed on `candidate` and a neighbour owned by `neighbor_owner`.
pub fn gamma(candidate: DeviceId, neighbor_owner: DeviceId, size: u64, topo: &DeviceTopology) -> f64 {
    match topo.class(candidate, neighbor_owner) {
        LinkClass::Intra => 0.0,
        LinkClass::P2p => topo.weight_p2p * size as f64,
        LinkClass::Staged => topo.weight_staged * size as f64,
    }
}

/// Lookup of already assigned tiles.
pub trait OwnerLookup {
    fn owner_of(&self, c: TileCoord) -> Option<DeviceId>;
}

impl OwnerLookup for BTreeMap<TileCoord, DeviceId> {
    fn owner_of(&self, c: TileCoord) -> Option<DeviceId> {
        self.get(&c).copied()
    }
}

/// Total link cost of placing `tile` on `candidate` given its assigned face neighbours.
pub fn f_cost<O: OwnerLookup + ?Sized>(
    tile: TileCoord,
    candidate: DeviceId,
    owners: &O,
    grid: &TileGrid,
    topo: &DeviceTopology,
    size: u64,
) -> f64 {
    grid.faces()
        .filter_map(|face| grid.neighbor(tile, face))
        .filter_map(|n| owners.owner_of(n))
        .map(|owner| gamma(candidate, owner, size, topo))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    /// Lowest-index least-loaded device.
    Simple,
    /// Least-loaded device with the smallest link cost.
    Optimized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentState {
    counts: Vec<usize>,
    total: usize,
    /// Sum of the link cost of every decision at the time it was made.
    pub modeled_cost: f64,
}

impl AssignmentState {
    pub fn new(n_devices: usize) -> Self {
        AssignmentState {
            counts: vec![0; n_devices],
            total: 0,
            modeled_cost: 0.0,
        }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn spread(&self) -> usize {
        let max = self.counts.iter().max().copied().unwrap_or(0);
        let min = self.counts.iter().min().copied().unwrap_or(0);
        max - min
    }
}

/// Devices whose tile count equals the current minimum.
pub fn eligible_devices(state: &AssignmentState) -> Vec<DeviceId> {
    let min = state.counts.iter().min().copied().unwrap_or(0);
    (0..state.counts.len()).filter(|&d| state.counts[d] == min).collect()
}

/// Picks a device for `tile` and updates the assignment counts.
pub fn assign_device<O: OwnerLookup + ?Sized>(
    tile: TileCoord,
    owners: &O,
    grid: &TileGrid,
    topo: &DeviceTopology,
    state: &mut AssignmentState,
    policy: Policy,
    size: u64,
) -> DeviceId {
    let eligible = eligible_devices(state);
    let (device, cost) = match policy {
        Policy::Simple => {
            let d = eligible[0];
            (d, f_cost(tile, d, owners, grid, topo, size))
        }
        Policy::Optimized => {
            let mut best = (eligible[0], f64::INFINITY);
            for &d in &eligible {
                let c = f_cost(tile, d, owners, grid, topo, size);
                if c < best.1 {
                    best = (d, c);
                }
            }
            best
        }
    };
    state.counts[device] += 1;
    state.total += 1;
    state.modeled_cost += cost;
    debug_assert!(state.spread() <= 1);
    device
}

/// Accounts one halo transfer from `from` into `to`.
pub fn record_exchange(to: DeviceId, from: DeviceId, size: u64, topo: &mut DeviceTopology) {
    let class = topo.class(to, from);
    topo.counters.add(class, size);
}
