//! Throughput figures.

/// Million lattice updates per second; 0 when no time has elapsed.
pub fn mlups(cell_updates: u64, seconds: f64) -> f64 {
    if seconds <= 0.0 {
        return 0.0;
    }
    cell_updates as f64 / seconds / 1e6
}

/// Throughput as if every cell of the bounding box had been updated.
pub fn mlups_bbox(domain_cells: u64, iterations: u64, seconds: f64) -> f64 {
    mlups(domain_cells * iterations, seconds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eq_values() {
        assert!((mlups(128 * 128 * 128 * 1000, 20.97152) - 100.0).abs() < 1e-9);
        assert_eq!(mlups(0, 1.0), 0.0);
        assert_eq!(mlups(10, 0.0), 0.0);
        assert!(mlups_bbox(1000, 5, 2.0) >= mlups(4000, 2.0));
    }
}
