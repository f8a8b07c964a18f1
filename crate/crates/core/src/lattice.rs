//! Discrete velocity sets and the single-relaxation-time LBM kernels.
//!
//! Everything is in lattice units (`dx = dt = 1`), so the squared sound
//! speed is exactly `1/3`. Opposite directions are stored next to each other
//! (`1/2`, `3/4`, ...) which makes antisymmetric stencil sums cancel exactly
//! in floating point.

use crate::grid::TileShape;

/// Largest direction count among the supported stencils.
pub const MAX_Q: usize = 19;

/// Squared lattice sound speed.
pub const CS2: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StencilKind {
    D2Q9,
    D3Q19,
}

impl StencilKind {
    pub fn dim(self) -> usize {
        match self {
            StencilKind::D2Q9 => 2,
            StencilKind::D3Q19 => 3,
        }
    }
}

/// A discrete velocity set with its quadrature weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub kind: StencilKind,
    pub q: usize,
    pub e: &'static [[i32; 3]],
    pub w: &'static [f64],
    pub opp: &'static [usize],
    pub cs2: f64,
}

const D2Q9_E: [[i32; 3]; 9] = [
    [0, 0, 0],
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [1, 1, 0],
    [-1, -1, 0],
    [1, -1, 0],
    [-1, 1, 0],
];

const D2Q9_W: [f64; 9] = [
    4.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
];

const D2Q9_OPP: [usize; 9] = [0, 2, 1, 4, 3, 6, 5, 8, 7];

const D3Q19_E: [[i32; 3]; 19] = [
    [0, 0, 0],
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
    [1, 1, 0],
    [-1, -1, 0],
    [1, -1, 0],
    [-1, 1, 0],
    [1, 0, 1],
    [-1, 0, -1],
    [1, 0, -1],
    [-1, 0, 1],
    [0, 1, 1],
    [0, -1, -1],
    [0, 1, -1],
    [0, -1, 1],
];

const D3Q19_W: [f64; 19] = [
    1.0 / 3.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
];

const D3Q19_OPP: [usize; 19] = [
    0, 2, 1, 4, 3, 6, 5, 8, 7, 10, 9, 12, 11, 14, 13, 16, 15, 18, 17,
];

pub fn make_stencil(kind: StencilKind) -> Stencil {
    match kind {
        StencilKind::D2Q9 => Stencil {
            kind,
            q: 9,
            e: &D2Q9_E,
            w: &D2Q9_W,
            opp: &D2Q9_OPP,
            cs2: CS2,
        },
        StencilKind::D3Q19 => Stencil {
            kind,
            q: 19,
            e: &D3Q19_E,
            w: &D3Q19_W,
            opp: &D3Q19_OPP,
            cs2: CS2,
        },
    }
}

impl Stencil {
    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// Number of directions with a unit component along one axis, i.e. the
    /// populations that cross one tile face.
    pub fn crossing_count(&self) -> usize {
        self.e.iter().filter(|e| e[0] == 1).count()
    }

    #[inline]
    pub fn dir(&self, i: usize) -> [f64; 3] {
        let e = self.e[i];
        [e[0] as f64, e[1] as f64, e[2] as f64]
    }
}

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Writes the second-order equilibrium populations for `(rho, u)` into `out[..q]`.
#[inline]
pub fn equilibrium_into(rho: f64, u: [f64; 3], s: &Stencil, out: &mut [f64]) {
    let usq = dot(u, u);
    let inv_cs2 = 1.0 / s.cs2;
    for i in 0..s.q {
        let eu = dot(s.dir(i), u);
        out[i] = s.w[i]
            * rho
            * (1.0 + eu * inv_cs2 + eu * eu * 0.5 * inv_cs2 * inv_cs2 - usq * 0.5 * inv_cs2);
    }
}

pub fn equilibrium(rho: f64, u: [f64; 3], s: &Stencil) -> [f64; MAX_Q] {
    let mut out = [0.0; MAX_Q];
    equilibrium_into(rho, u, s, &mut out);
    out
}

/// Density and velocity of a population vector. Zero density maps to zero velocity.
#[inline]
pub fn moments(f: &[f64], s: &Stencil) -> (f64, [f64; 3]) {
    let mut rho = 0.0;
    let mut m = [0.0; 3];
    for i in 0..s.q {
        rho += f[i];
        let e = s.dir(i);
        m[0] += f[i] * e[0];
        m[1] += f[i] * e[1];
        m[2] += f[i] * e[2];
    }
    if rho == 0.0 {
        return (0.0, [0.0; 3]);
    }
    (rho, [m[0] / rho, m[1] / rho, m[2] / rho])
}

/// BGK relaxation toward `f_eq` plus a forcing increment, in place.
#[inline]
pub fn collide_bgk_in_place(f: &mut [f64], f_eq: &[f64], tau: f64, delta_f: &[f64]) {
    let omega = 1.0 / tau;
    for i in 0..f.len() {
        f[i] = f[i] + omega * (f_eq[i] - f[i]) + delta_f[i];
    }
}

pub fn collide_bgk(f: &[f64], f_eq: &[f64], tau: f64, delta_f: &[f64]) -> [f64; MAX_Q] {
    let mut out = [0.0; MAX_Q];
    out[..f.len()].copy_from_slice(f);
    collide_bgk_in_place(&mut out[..f.len()], f_eq, tau, delta_f);
    out
}

/// Pull streaming for every fluid cell of a padded tile buffer.
///
/// `read` and `write` are direction-major (`[i * padded_len + cell]`); the halo
/// shell of `read` must already hold the incoming ghost populations.
pub fn stream(shape: &TileShape, s: &Stencil, solid: &[bool], read: &[f64], write: &mut [f64]) {
    let pn = shape.padded_len();
    for i in 0..s.q {
        let off = shape.offset(s.e[i]);
        let src = &read[i * pn..(i + 1) * pn];
        let dst = &mut write[i * pn..(i + 1) * pn];
        for &p in shape.cells() {
            let p = p as usize;
            if solid[p] {
                continue;
            }
            dst[p] = src[(p as isize - off) as usize];
        }
    }
}

/// Half-way bounce-back: a population that would have been pulled from a solid
/// cell is replaced by the post-collision population the fluid cell sent toward it.
pub fn bounce_back(shape: &TileShape, s: &Stencil, solid: &[bool], read: &[f64], write: &mut [f64]) {
    let pn = shape.padded_len();
    for i in 1..s.q {
        let off = shape.offset(s.e[i]);
        let back = s.opp[i] * pn;
        for &p in shape.cells() {
            let p = p as usize;
            if solid[p] || !solid[(p as isize - off) as usize] {
                continue;
            }
            write[i * pn + p] = read[back + p];
        }
    }
}
