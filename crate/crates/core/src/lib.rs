//! Progressive-mesh lattice Boltzmann core.
//!
//! A multiphase, multicomponent pseudo-potential LBM on a sparse set of
//! fixed-size tiles. Tiles are created next to any face whose velocity field
//! changes between iterations and are placed on simulated devices by a
//! communication-cost-aware scheduler.
//!
//! The crate is `no_std` (it needs `alloc`). Parallel execution, clocks and
//! file formats live in the `progmesh` crate; here, work is handed to an
//! [`engine::Executor`].
#![no_std]

extern crate alloc;

pub mod engine;
pub mod grid;
pub mod lattice;
pub mod mesh;
pub mod physics;
pub mod sched;

use core::fmt;

pub use engine::{Executor, Phase, RunMode, Sequential, Simulation, SimulationSetup};
pub use lattice::{make_stencil, Stencil, StencilKind};
pub use mesh::{Face, GeometryMask, TileCoord, TileFault};
pub use physics::{ComponentParams, CouplingMatrix, Eos};
pub use sched::{DeviceTopology, Policy};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("invalid topology: {0}")]
    InvalidTopology(&'static str),
    #[error("equation of state pole: b*rho >= 1 (rho = {rho}, b = {b})")]
    EosPole { rho: f64, b: f64 },
    #[error("geometry payload does not match its dimensions")]
    GeometrySize,
    #[error("tile {0} already exists")]
    DuplicateTile(TileCoord),
    #[error("tile {0} lies outside the domain")]
    OutOfBounds(TileCoord),
    #[error("tile {0} already has an owner")]
    AlreadyAssigned(TileCoord),
    #[error("iteration {iteration}, tile {tile}, phase {phase}: {fault}")]
    Step {
        iteration: u64,
        tile: TileCoord,
        phase: Phase,
        fault: TileFault,
    },
}

impl fmt::Display for TileFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TileFault::NonFinite => "non-finite field value",
            TileFault::EosPole => "density reached the equation-of-state pole",
            TileFault::MissingHalo => "halo not exchanged before use",
        })
    }
}
