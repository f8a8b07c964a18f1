use std::thread;

use progmesh_core::mesh::Tile;
use progmesh_core::Executor;

/// Runs each phase on `workers` scoped threads; worker `w` handles the tiles
/// whose owning device satisfies `owner % workers == w`.
#[derive(Debug, Clone, Copy)]
pub struct WorkerPool {
    workers: usize,
}

impl WorkerPool {
    pub fn new(workers: usize) -> Self {
        WorkerPool {
            workers: workers.max(1),
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    fn lane(&self, tile: &Tile) -> usize {
        tile.owner().unwrap_or(0) % self.workers
    }
}

impl Executor for WorkerPool {
    fn for_each_tile(&self, tiles: &mut [Tile], task: &(dyn Fn(usize, &mut Tile) + Sync)) {
        if self.workers == 1 {
            return tiles.iter_mut().enumerate().for_each(|(k, t)| task(k, t));
        }
        let mut lanes: Vec<Vec<(usize, &mut Tile)>> = (0..self.workers).map(|_| Vec::new()).collect();
        for (k, t) in tiles.iter_mut().enumerate() {
            lanes[self.lane(t)].push((k, t));
        }
        thread::scope(|s| {
            for lane in lanes.into_iter().filter(|l| !l.is_empty()) {
                s.spawn(move || lane.into_iter().for_each(|(k, t)| task(k, t)));
            }
        });
    }

    fn for_each_halo(&self, tiles: &[Tile], staging: &mut [Vec<f64>], task: &(dyn Fn(usize, &mut Vec<f64>) + Sync)) {
        if self.workers == 1 {
            return staging.iter_mut().enumerate().for_each(|(k, b)| task(k, b));
        }
        let mut lanes: Vec<Vec<(usize, &mut Vec<f64>)>> = (0..self.workers).map(|_| Vec::new()).collect();
        for (k, b) in staging.iter_mut().enumerate() {
            lanes[self.lane(&tiles[k])].push((k, b));
        }
        thread::scope(|s| {
            for lane in lanes.into_iter().filter(|l| !l.is_empty()) {
                s.spawn(move || lane.into_iter().for_each(|(k, b)| task(k, b)));
            }
        });
    }
}
