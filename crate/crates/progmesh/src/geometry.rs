//! `LBMGEO v1` solid masks and fixture generators.
//!
//! A file is one header line `LBMGEO v1 <nx> <ny> <nz>` followed by
//! `nx * ny * nz` bytes, `0` fluid and `1` solid, x fastest.

use std::io::Write;
use std::path::Path;

use progmesh_core::GeometryMask;

use crate::error::{Error, Result};

const MAGIC: &str = "LBMGEO v1";

pub fn parse_geometry(bytes: &[u8], path: &Path) -> Result<GeometryMask> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::parse(path, "malformed header: missing newline"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::parse(path, "malformed header: not text"))?;
    let rest = header
        .trim_end_matches('\r')
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::parse(path, format!("malformed header: expected `{MAGIC} nx ny nz`")))?;
    let dims: Vec<usize> = rest
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(path, "malformed header: dimensions must be integers"))?;
    let dims: [usize; 3] = dims
        .try_into()
        .map_err(|_| Error::parse(path, "malformed header: expected three dimensions"))?;
    if dims.contains(&0) {
        return Err(Error::parse(path, "malformed header: dimensions must be positive"));
    }
    let payload = &bytes[nl + 1..];
    let n = dims[0] * dims[1] * dims[2];
    if payload.len() < n {
        return Err(Error::parse(
            path,
            format!("truncated payload: {} of {n} cell bytes present", payload.len()),
        ));
    }
    if payload.len() > n {
        return Err(Error::parse(
            path,
            format!("size mismatch: header declares {n} cells, payload has {} bytes", payload.len()),
        ));
    }
    let mut solid = Vec::with_capacity(n);
    for (k, &b) in payload.iter().enumerate() {
        solid.push(match b {
            0 => false,
            1 => true,
            _ => return Err(Error::parse(path, format!("invalid cell byte {b} at offset {k}"))),
        });
    }
    Ok(GeometryMask::from_flags(dims, solid)?)
}

pub fn load_geometry(path: &Path) -> Result<GeometryMask> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    parse_geometry(&bytes, path)
}

pub fn encode_geometry(g: &GeometryMask) -> Vec<u8> {
    let d = g.dims();
    let mut out = format!("{MAGIC} {} {} {}\n", d[0], d[1], d[2]).into_bytes();
    out.extend(g.flags().iter().map(|&s| u8::from(s)));
    out
}

pub fn save_geometry(g: &GeometryMask, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(Error::io(path))?;
    f.write_all(&encode_geometry(g)).map_err(Error::io(path))
}

/// Carves fluid cells where `fluid` holds, leaving everything else solid.
fn carve(dims: [usize; 3], fluid: impl Fn(usize, usize, usize) -> bool) -> GeometryMask {
    let mut g = GeometryMask::open(dims);
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                g.set([x, y, z], !fluid(x, y, z));
            }
        }
    }
    g
}

fn span(center: usize, width: usize) -> std::ops::Range<usize> {
    let lo = center.saturating_sub(width / 2);
    lo..lo + width
}

/// Cross-section test for a duct running along one axis. In 2-D (nz = 1) the
/// duct spans the full depth.
fn in_section(a: usize, b: usize, ca: usize, cb: usize, width: usize, flat: bool) -> bool {
    span(ca, width).contains(&a) && (flat || span(cb, width).contains(&b))
}

pub fn open_box(dims: [usize; 3]) -> GeometryMask {
    GeometryMask::open(dims)
}

/// A duct of square cross-section `width` along x through a solid block.
pub fn straight_channel(dims: [usize; 3], width: usize) -> GeometryMask {
    let flat = dims[2] == 1;
    carve(dims, |_, y, z| in_section(y, z, dims[1] / 2, dims[2] / 2, width, flat))
}

/// An L-shaped duct: along x through the centre of the first tile row, then
/// along y through the centre of the last tile column up to the far face.
pub fn l_channel(dims: [usize; 3], tile: usize, width: usize) -> GeometryMask {
    let flat = dims[2] == 1;
    let (cy, cx, cz) = (tile / 2, dims[0] - tile / 2, dims[2] / 2);
    let arm_x = span(cx, width);
    carve(dims, |x, y, z| {
        let horizontal = x < arm_x.end && in_section(y, z, cy, cz, width, flat);
        let vertical = y >= span(cy, width).start && in_section(x, z, cx, cz, width, flat);
        horizontal || vertical
    })
}

/// Crossing ducts along x and y, one every `spacing` cells.
pub fn channel_grid(dims: [usize; 3], spacing: usize, width: usize) -> GeometryMask {
    let flat = dims[2] == 1;
    let cz = dims[2] / 2;
    let on_line = |v: usize| span(spacing / 2, width).contains(&(v % spacing));
    carve(dims, |x, y, z| {
        let zok = flat || span(cz, width).contains(&z);
        zok && (on_line(x) || on_line(y))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("t.geo")
    }

    #[test]
    fn all_zero_payload() {
        let mut bytes = b"LBMGEO v1 4 4 4\n".to_vec();
        bytes.extend([0u8; 64]);
        let g = parse_geometry(&bytes, p()).unwrap();
        assert_eq!(g.dims(), [4, 4, 4]);
        assert_eq!(g.solid_count(), 0);
    }

    #[test]
    fn distinct_errors() {
        let msg = |b: &[u8]| parse_geometry(b, p()).unwrap_err().to_string();
        assert!(msg(b"GEO 4 4 4\n").contains("malformed header"));
        assert!(msg(b"LBMGEO v1 4 4\n").contains("three dimensions"));
        assert!(msg(b"LBMGEO v1 2 1 1\n\0").contains("truncated payload"));
        assert!(msg(b"LBMGEO v1 1 1 1\n\0\0").contains("size mismatch"));
        assert!(msg(b"LBMGEO v1 1 1 1\n\x07").contains("invalid cell byte"));
    }

    #[test]
    fn straight_channel_solid_count() {
        let g = straight_channel([32, 16, 16], 6);
        assert_eq!(g.solid_count(), 32 * 16 * 16 - 32 * 6 * 6);
        let g2 = straight_channel([32, 16, 1], 6);
        assert_eq!(g2.solid_count(), 32 * 16 - 32 * 6);
    }

    #[test]
    fn round_trip() {
        let g = l_channel([64, 48, 16], 16, 8);
        let back = parse_geometry(&encode_geometry(&g), p()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn l_channel_shape() {
        let g = l_channel([64, 48, 16], 16, 8);
        assert!(!g.is_solid([0, 8, 8]));
        assert!(!g.is_solid([56, 8, 8]));
        assert!(!g.is_solid([56, 47, 8]));
        assert!(g.is_solid([8, 40, 8]));
        assert!(g.is_solid([63, 8, 8]));
        // 64 cells of horizontal arm plus 44 of vertical arm beyond it, 8 x 8 cross-section.
        assert_eq!(64 * 48 * 16 - g.solid_count(), (60 + 36) * 64);
    }

    #[test]
    fn channel_grid_crossings() {
        let g = channel_grid([32, 32, 1], 16, 4);
        assert!(!g.is_solid([8, 0, 0]));
        assert!(!g.is_solid([0, 24, 0]));
        assert!(g.is_solid([0, 0, 0]));
        assert_eq!(32 * 32 - g.solid_count(), 2 * 4 * 32 * 2 - 16 * 4);
    }
}
