//! Field dumps: raw little-endian `f64`, x fastest, over the bounding box,
//! with a `.meta` sidecar and an optional mid-plane PGM.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use progmesh_core::engine::FieldKind;
use progmesh_core::Simulation;

use crate::config::FieldName;
use crate::error::{Error, Result};

impl From<FieldName> for FieldKind {
    fn from(f: FieldName) -> Self {
        match f {
            FieldName::Rho => FieldKind::Rho,
            FieldName::UMagnitude => FieldKind::UMagnitude,
            FieldName::Psi => FieldKind::Psi,
        }
    }
}

/// Paths written by one [`dump_field`] call.
#[derive(Debug, Clone)]
pub struct DumpFiles {
    pub raw: PathBuf,
    pub meta: PathBuf,
    pub pgm: Option<PathBuf>,
}

pub fn dump_name(field: FieldName, comp: usize, iteration: u64) -> String {
    format!("{}_c{comp}_{iteration:06}", field.as_str())
}

pub fn dump_field(sim: &Simulation, dir: &Path, field: FieldName, comp: usize, pgm: bool) -> Result<DumpFiles> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let dims = sim.map().geometry().dims();
    let (values, fill) = sim.sample_field(field.into(), comp);
    let stem = dump_name(field, comp, sim.iteration());
    let raw = dir.join(format!("{stem}.raw"));
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in &values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(&raw, bytes).map_err(Error::io(&raw))?;

    let mut meta_text = String::new();
    let _ = writeln!(meta_text, "dims = {} {} {}", dims[0], dims[1], dims[2]);
    let _ = writeln!(meta_text, "field = {}", field.as_str());
    let _ = writeln!(meta_text, "component = {comp}");
    let _ = writeln!(meta_text, "iteration = {}", sim.iteration());
    let _ = writeln!(meta_text, "fill = {fill:e}");
    let _ = writeln!(meta_text, "solid = 0");
    let pgm_path = if pgm {
        let z = dims[2] / 2;
        let plane = &values[z * dims[0] * dims[1]..(z + 1) * dims[0] * dims[1]];
        let lo = plane.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = plane.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let path = dir.join(format!("{stem}.pgm"));
        std::fs::write(&path, pgm_bytes(plane, dims[0], dims[1], lo, hi)).map_err(Error::io(&path))?;
        let _ = writeln!(meta_text, "pgm_plane_z = {z}");
        let _ = writeln!(meta_text, "pgm_min = {lo:e}");
        let _ = writeln!(meta_text, "pgm_max = {hi:e}");
        Some(path)
    } else {
        None
    };
    let meta = dir.join(format!("{stem}.meta"));
    std::fs::write(&meta, meta_text).map_err(Error::io(&meta))?;
    Ok(DumpFiles { raw, meta, pgm: pgm_path })
}

/// Binary PGM, min-max normalised; the first image row is the highest y.
fn pgm_bytes(plane: &[f64], nx: usize, ny: usize, lo: f64, hi: f64) -> Vec<u8> {
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    let range = hi - lo;
    for y in (0..ny).rev() {
        for x in 0..nx {
            let v = plane[x + nx * y];
            let g = if range > 0.0 { ((v - lo) / range * 255.0).round() } else { 0.0 };
            out.push(g.clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// Reads a raw dump back into values.
pub fn read_raw(path: &Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::parse(path, "raw dump length is not a multiple of 8"));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}
