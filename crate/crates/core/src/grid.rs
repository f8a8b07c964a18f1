//! Padded cell indexing shared by every tile.

use alloc::vec::Vec;

/// Cell layout of one tile: `ext` cells per side plus a one-cell halo shell on
/// every active axis (z carries no halo in 2-D). Indices are x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TileShape {
    ext: usize,
    dim: usize,
    pdims: [usize; 3],
    cells: Vec<u32>,
    boundary: Vec<u32>,
    interior: Vec<u32>,
    shell: Vec<(u32, [i32; 3])>,
}

impl TileShape {
    pub fn new(ext: usize, dim: usize) -> Self {
        assert!(dim == 2 || dim == 3);
        let pz = if dim == 3 { ext + 2 } else { 1 };
        let pdims = [ext + 2, ext + 2, pz];
        let mut shape = TileShape {
            ext,
            dim,
            pdims,
            cells: Vec::new(),
            boundary: Vec::new(),
            interior: Vec::new(),
            shell: Vec::new(),
        };
        let zr = if dim == 3 { ext } else { 1 };
        let e = ext as i32;
        for z in 0..zr {
            for y in 0..ext {
                for x in 0..ext {
                    let p = shape.index([x, y, z]) as u32;
                    shape.cells.push(p);
                    let on_face = x == 0
                        || y == 0
                        || x == ext - 1
                        || y == ext - 1
                        || (dim == 3 && (z == 0 || z == ext - 1));
                    if on_face {
                        shape.boundary.push(p);
                    } else {
                        shape.interior.push(p);
                    }
                }
            }
        }
        let (zlo, zhi) = if dim == 3 { (-1, e) } else { (0, 0) };
        for z in zlo..=zhi {
            for y in -1..=e {
                for x in -1..=e {
                    let inside = |c: i32| (0..e).contains(&c);
                    if inside(x) && inside(y) && (dim == 2 || inside(z)) {
                        continue;
                    }
                    let p = shape.index_signed([x, y, z]) as u32;
                    shape.shell.push((p, [x, y, z]));
                }
            }
        }
        shape
    }

    pub fn ext(&self) -> usize {
        self.ext
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Interior cells per tile.
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn padded_len(&self) -> usize {
        self.pdims[0] * self.pdims[1] * self.pdims[2]
    }

    /// Cells on a tile face, i.e. `ext^(dim-1)`.
    pub fn face_area(&self) -> usize {
        self.ext.pow(self.dim as u32 - 1)
    }

    /// Padded index of an interior cell given in local coordinates.
    #[inline]
    pub fn index(&self, c: [usize; 3]) -> usize {
        self.index_signed([c[0] as i32, c[1] as i32, c[2] as i32])
    }

    /// Padded index of a local coordinate in `-1..=ext` (z ignored in 2-D).
    #[inline]
    pub fn index_signed(&self, c: [i32; 3]) -> usize {
        let zo = if self.dim == 3 { c[2] + 1 } else { 0 };
        ((c[0] + 1) as usize) + self.pdims[0] * (((c[1] + 1) as usize) + self.pdims[1] * zo as usize)
    }

    /// Local coordinates of a padded index.
    pub fn coords(&self, p: usize) -> [i32; 3] {
        let x = p % self.pdims[0];
        let y = (p / self.pdims[0]) % self.pdims[1];
        let z = p / (self.pdims[0] * self.pdims[1]);
        let z = if self.dim == 3 { z as i32 - 1 } else { 0 };
        [x as i32 - 1, y as i32 - 1, z]
    }

    /// Linear index offset of a lattice direction.
    #[inline]
    pub fn offset(&self, e: [i32; 3]) -> isize {
        e[0] as isize + self.pdims[0] as isize * (e[1] as isize + self.pdims[1] as isize * e[2] as isize)
    }

    /// All interior cells, x-fastest.
    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    /// Interior cells on the outermost layer of the tile.
    pub fn boundary_cells(&self) -> &[u32] {
        &self.boundary
    }

    /// Interior cells not on the outermost layer.
    pub fn interior_cells(&self) -> &[u32] {
        &self.interior
    }

    /// Halo shell positions with their local coordinates.
    pub fn shell(&self) -> &[(u32, [i32; 3])] {
        &self.shell
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_3d() {
        let s = TileShape::new(4, 3);
        assert_eq!(s.cell_count(), 64);
        assert_eq!(s.interior_cells().len(), 8);
        assert_eq!(s.boundary_cells().len(), 56);
        assert_eq!(s.shell().len(), 216 - 64);
        assert_eq!(s.face_area(), 16);
    }

    #[test]
    fn counts_2d() {
        let s = TileShape::new(5, 2);
        assert_eq!(s.cell_count(), 25);
        assert_eq!(s.shell().len(), 49 - 25);
        assert_eq!(s.padded_len(), 49);
        assert_eq!(s.face_area(), 5);
    }

    #[test]
    fn index_round_trip() {
        let s = TileShape::new(6, 3);
        for p in 0..s.padded_len() {
            assert_eq!(s.index_signed(s.coords(p)), p);
        }
        let p = s.index([2, 3, 4]);
        assert_eq!((p as isize + s.offset([1, -1, 1])) as usize, s.index([3, 2, 5]));
    }
}
