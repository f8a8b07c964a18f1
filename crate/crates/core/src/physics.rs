//! Multiphase / multicomponent closure: Peng-Robinson pressure, the
//! pseudo-potential, pair interaction forces and velocity-shift forcing.

use alloc::vec;
use alloc::vec::Vec;

use crate::lattice::{equilibrium_into, Stencil, MAX_Q};
use crate::Error;

/// Peng-Robinson coefficients for one component.
///
/// `a = 0, b = 0, r * t = 1/3` reduces the pressure to `cs2 * rho`, which makes
/// the pseudo-potential vanish (non-interacting ideal gas).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eos {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub t: f64,
    pub tc: f64,
    pub omega: f64,
}

impl Eos {
    pub fn ideal() -> Self {
        Eos {
            a: 0.0,
            b: 0.0,
            r: 1.0,
            t: 1.0 / 3.0,
            tc: 1.0 / 3.0,
            omega: 0.0,
        }
    }

    /// Derives `a` and `b` from the critical point.
    pub fn from_critical(tc: f64, pc: f64, omega: f64, r: f64, t: f64) -> Self {
        Eos {
            a: 0.45724 * r * r * tc * tc / pc,
            b: 0.0778 * r * tc / pc,
            r,
            t,
            tc,
            omega,
        }
    }

    /// Standard PR alpha function `[1 + kappa (1 - sqrt(T/Tc))]^2`.
    pub fn theta(&self) -> f64 {
        let kappa = 0.37464 + 1.54226 * self.omega - 0.26992 * self.omega * self.omega;
        let s = 1.0 + kappa * (1.0 - libm::sqrt(self.t / self.tc));
        s * s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentParams {
    pub tau: f64,
    pub eos: Eos,
    pub g_self: f64,
    pub beta: f64,
    pub rho_ambient: f64,
    pub gravity: [f64; 3],
}

impl Default for ComponentParams {
    fn default() -> Self {
        ComponentParams {
            tau: 1.0,
            eos: Eos::ideal(),
            g_self: -1.0,
            beta: 1.16,
            rho_ambient: 1.0,
            gravity: [0.0; 3],
        }
    }
}

impl ComponentParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.tau > 0.5) {
            return Err(Error::InvalidParameter("tau must exceed 0.5"));
        }
        if !(self.eos.b >= 0.0) {
            return Err(Error::InvalidParameter("eos.b must be non-negative"));
        }
        if self.eos.a != 0.0 && !(self.eos.tc > 0.0) {
            return Err(Error::InvalidParameter("eos.tc must be positive when eos.a is non-zero"));
        }
        if !(self.rho_ambient > 0.0) {
            return Err(Error::InvalidParameter("rho_ambient must be positive"));
        }
        if !(1.0..=1.5).contains(&self.beta) {
            return Err(Error::InvalidParameter("beta must lie in [1, 1.5]"));
        }
        if self.g_self == 0.0 || !self.g_self.is_finite() {
            return Err(Error::InvalidParameter("g_self must be non-zero"));
        }
        if self.gravity.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidParameter("gravity must be finite"));
        }
        Ok(())
    }
}

/// Symmetric inter-component coupling constants with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    g: Vec<f64>,
}

impl CouplingMatrix {
    pub fn zeros(n: usize) -> Self {
        CouplingMatrix { n, g: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, Error> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidParameter("coupling matrix must be square"));
            }
            for (j, &v) in row.iter().enumerate() {
                m.g[i * n + j] = v;
            }
        }
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), Error> {
        for i in 0..self.n {
            if self.get(i, i) != 0.0 {
                return Err(Error::InvalidParameter("coupling matrix diagonal must be zero"));
            }
            for j in 0..self.n {
                if self.get(i, j) != self.get(j, i) || !self.get(i, j).is_finite() {
                    return Err(Error::InvalidParameter("coupling matrix must be symmetric"));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.g[a * self.n + b]
    }

    pub fn set(&mut self, a: usize, b: usize, v: f64) {
        self.g[a * self.n + b] = v;
        self.g[b * self.n + a] = v;
    }
}

pub fn pr_pressure(rho: f64, p: &ComponentParams) -> Result<f64, Error> {
    let e = &p.eos;
    let br = e.b * rho;
    if br >= 1.0 {
        return Err(Error::EosPole { rho, b: e.b });
    }
    let repulsive = rho * e.r * e.t / (1.0 - br);
    if e.a == 0.0 {
        return Ok(repulsive);
    }
    Ok(repulsive - e.a * e.theta() * rho * rho / (1.0 + 2.0 * br - br * br))
}

/// Pseudo-potential `sqrt(2 (p - cs2 rho) / (cs2 g))`. A negative radicand
/// yields `(0, true)`.
#[inline]
pub fn pseudo_potential(rho: f64, press: f64, g_self: f64, cs2: f64) -> (f64, bool) {
    let radicand = 2.0 * (press - cs2 * rho) / (cs2 * g_self);
    if radicand < 0.0 {
        return (0.0, true);
    }
    (libm::sqrt(radicand), false)
}

/// Intra-component force at a cell; `psi_nbr[i]` is the pseudo-potential at `x + e_i`.
#[inline]
pub fn intra_force(psi_here: f64, psi_nbr: &[f64], g_self: f64, beta: f64, s: &Stencil) -> [f64; 3] {
    let mut lin = [0.0; 3];
    let mut sq = [0.0; 3];
    for i in 1..s.q {
        let e = s.dir(i);
        let a = s.w[i] * psi_nbr[i];
        let b = a * psi_nbr[i];
        for d in 0..3 {
            lin[d] += a * e[d];
            sq[d] += b * e[d];
        }
    }
    let c1 = -beta * 0.5 * g_self * s.cs2 * psi_here;
    let c2 = -0.5 * (1.0 - beta) * 0.5 * g_self * s.cs2;
    [
        c1 * lin[0] + c2 * sq[0],
        c1 * lin[1] + c2 * sq[1],
        c1 * lin[2] + c2 * sq[2],
    ]
}

/// Force exerted on a component by another one; `psi_other_nbr[i]` is the
/// other component's pseudo-potential at `x + e_i`.
#[inline]
pub fn inter_force(psi_here: f64, psi_other_nbr: &[f64], g_cross: f64, s: &Stencil) -> [f64; 3] {
    if g_cross == 0.0 {
        return [0.0; 3];
    }
    let mut lin = [0.0; 3];
    for i in 1..s.q {
        let e = s.dir(i);
        let a = s.w[i] * psi_other_nbr[i];
        for d in 0..3 {
            lin[d] += a * e[d];
        }
    }
    let c = -0.5 * g_cross * s.cs2 * psi_here;
    [c * lin[0], c * lin[1], c * lin[2]]
}

#[inline]
pub fn body_force(rho: f64, gravity: [f64; 3]) -> [f64; 3] {
    [rho * gravity[0], rho * gravity[1], rho * gravity[2]]
}

/// Velocity-shift forcing increment `f_eq(rho, u + F/rho) - f_eq(rho, u)`.
///
/// Returns `true` in the second slot when a non-zero force met zero density;
/// the increment is zero in that case.
#[inline]
pub fn forcing_delta(rho: f64, u: [f64; 3], force: [f64; 3], s: &Stencil) -> ([f64; MAX_Q], bool) {
    let mut out = [0.0; MAX_Q];
    if force == [0.0; 3] {
        return (out, false);
    }
    if rho == 0.0 {
        return (out, true);
    }
    let shifted = [u[0] + force[0] / rho, u[1] + force[1] / rho, u[2] + force[2] / rho];
    let mut base = [0.0; MAX_Q];
    equilibrium_into(rho, shifted, s, &mut out);
    equilibrium_into(rho, u, s, &mut base);
    for i in 0..s.q {
        out[i] -= base[i];
    }
    (out, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_stencil, StencilKind, CS2};

    fn pr_params(t: f64) -> ComponentParams {
        ComponentParams {
            eos: Eos {
                a: 2.0 / 49.0,
                b: 2.0 / 21.0,
                r: 1.0,
                t,
                tc: 0.0729,
                omega: 0.344,
            },
            ..ComponentParams::default()
        }
    }

    #[test]
    fn pressure_examples() {
        let p = pr_params(0.06);
        assert_eq!(pr_pressure(0.0, &p).unwrap(), 0.0);
        let mut ideal = p.clone();
        ideal.eos.a = 0.0;
        let rho = 3.0;
        let expect = rho * 0.06 / (1.0 - 3.0 * 2.0 / 21.0);
        assert!((pr_pressure(rho, &ideal).unwrap() - expect).abs() < 1e-15);
        // Hand evaluation at T = Tc (theta = 1), rho = 2.
        let crit = pr_params(0.0729);
        assert_eq!(crit.eos.theta(), 1.0);
        assert!((pr_pressure(2.0, &crit).unwrap() - 0.058_689_356_214_661_27).abs() < 1e-14);
        assert!((pr_pressure(2.0, &p).unwrap() - 0.006_347_366_364_658_047).abs() < 1e-14);
    }

    #[test]
    fn pressure_pole_rejected() {
        let p = pr_params(0.06);
        assert!(matches!(pr_pressure(10.5, &p), Err(Error::EosPole { .. })));
    }

    #[test]
    fn pseudo_potential_examples() {
        assert_eq!(pseudo_potential(1.7, CS2 * 1.7, -1.0, CS2), (0.0, false));
        assert_eq!(pseudo_potential(0.0, 0.0, -1.0, CS2), (0.0, false));
        let (psi, clamped) = pseudo_potential(1.0, CS2 - CS2 / 2.0, -1.0, CS2);
        assert!(!clamped);
        assert!((psi - 1.0).abs() < 1e-15);
        assert_eq!(pseudo_potential(1.0, 1.0, -1.0, CS2), (0.0, true));
    }

    // psi = 1 for x < 0, psi = 2 for x >= 0, summed by hand over D2Q9.
    fn step_profile(x: i32) -> f64 {
        if x < 0 {
            1.0
        } else {
            2.0
        }
    }

    #[test]
    fn intra_force_examples() {
        let s = make_stencil(StencilKind::D2Q9);
        let uniform = [0.8; 9];
        assert_eq!(intra_force(0.8, &uniform, -1.0, 1.16, &s), [0.0; 3]);
        assert_eq!(intra_force(0.0, &[0.0; 9], -1.0, 1.16, &s), [0.0; 3]);
        for (x, expect) in [(0, 0.057_777_777_777_777_78), (-1, 0.025_555_555_555_555_56)] {
            let nbr: [f64; 9] = core::array::from_fn(|i| step_profile(x + s.e[i][0]));
            let f = intra_force(step_profile(x), &nbr, -1.0, 1.16, &s);
            assert!((f[0] - expect).abs() < 1e-15, "{x}: {f:?}");
            assert_eq!(f[1], 0.0);
        }
    }

    #[test]
    fn inter_force_examples() {
        let s = make_stencil(StencilKind::D2Q9);
        assert_eq!(inter_force(0.8, &[0.3; 9], 0.9, &s), [0.0; 3]);
        let nbr: [f64; 9] = core::array::from_fn(|i| if s.e[i][0] < 0 { 0.5 } else { 1.5 });
        assert_eq!(inter_force(0.8, &nbr, 0.0, &s), [0.0; 3]);
        let f = inter_force(0.8, &nbr, 0.9, &s);
        assert!((f[0] + 0.02).abs() < 1e-15);
        assert!(f[1].abs() < 1e-15);
    }

    #[test]
    fn body_force_examples() {
        assert_eq!(body_force(1.0, [0.0; 3]), [0.0; 3]);
        assert_eq!(body_force(0.0, [0.0, -0.001, 0.0]), [0.0; 3]);
        assert_eq!(body_force(2.0, [0.0, -0.001, 0.0]), [0.0, -0.002, 0.0]);
    }

    #[test]
    fn forcing_delta_edge_cases() {
        let s = make_stencil(StencilKind::D3Q19);
        let (d, flagged) = forcing_delta(1.2, [0.01, 0.0, 0.0], [0.0; 3], &s);
        assert!(!flagged && d.iter().all(|&v| v == 0.0));
        let (d, flagged) = forcing_delta(0.0, [0.0; 3], [1e-3, 0.0, 0.0], &s);
        assert!(flagged && d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parameter_validation() {
        assert!(ComponentParams::default().validate().is_ok());
        let bad = ComponentParams { tau: 0.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ComponentParams { beta: 1.6, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ComponentParams { g_self: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ComponentParams { rho_ambient: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(CouplingMatrix::from_rows(&[vec![0.0, 1.0], vec![0.5, 0.0]]).is_err());
        assert!(CouplingMatrix::from_rows(&[vec![1.0]]).is_err());
        let m = CouplingMatrix::from_rows(&[vec![0.0, 0.9], vec![0.9, 0.0]]).unwrap();
        assert_eq!(m.get(1, 0), 0.9);
    }
}
