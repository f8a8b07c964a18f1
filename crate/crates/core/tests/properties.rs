use std::collections::BTreeMap;

use proptest::prelude::*;

use progmesh_core::grid::TileShape;
use progmesh_core::lattice::{bounce_back, collide_bgk, equilibrium, moments, stream, MAX_Q};
use progmesh_core::mesh::TileGrid;
use progmesh_core::physics::{forcing_delta, intra_force, inter_force, pr_pressure};
use progmesh_core::sched::{assign_device, eligible_devices, f_cost, AssignmentState};
use progmesh_core::{make_stencil, ComponentParams, DeviceTopology, Eos, Policy, StencilKind, TileCoord};

fn kind() -> impl Strategy<Value = StencilKind> {
    prop_oneof![Just(StencilKind::D2Q9), Just(StencilKind::D3Q19)]
}

fn velocity(dim: usize) -> impl Strategy<Value = [f64; 3]> {
    (-0.1..0.1f64, -0.1..0.1f64, -0.1..0.1f64).prop_map(move |(x, y, z)| [x, y, if dim == 3 { z } else { 0.0 }])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn equilibrium_moments_round_trip(k in kind(), rho in 0.1..3.0f64, u in velocity(3)) {
        let s = make_stencil(k);
        let u = if s.dim() == 2 { [u[0], u[1], 0.0] } else { u };
        let (r, v) = moments(&equilibrium(rho, u, &s)[..s.q], &s);
        prop_assert!((r - rho).abs() < 1e-12);
        for d in 0..3 {
            prop_assert!((v[d] - u[d]).abs() < 1e-12);
        }
    }

    #[test]
    fn collision_keeps_mass_and_momentum(
        k in kind(),
        rho in 0.2..2.0f64,
        u in velocity(3),
        noise in prop::collection::vec(-0.01..0.01f64, MAX_Q),
        tau in 0.51..2.0f64,
    ) {
        let s = make_stencil(k);
        let u = if s.dim() == 2 { [u[0], u[1], 0.0] } else { u };
        let mut f = equilibrium(rho, u, &s);
        for i in 0..s.q {
            f[i] += noise[i] * s.w[i];
        }
        let (r0, u0) = moments(&f[..s.q], &s);
        let feq = equilibrium(r0, u0, &s);
        let out = collide_bgk(&f[..s.q], &feq[..s.q], tau, &[0.0; MAX_Q][..s.q]);
        let (r1, u1) = moments(&out[..s.q], &s);
        prop_assert!((r1 - r0).abs() < 1e-13);
        for d in 0..3 {
            prop_assert!((u1[d] - u0[d]).abs() < 1e-13);
        }
    }

    #[test]
    fn forcing_adds_exactly_the_force(k in kind(), rho in 0.1..3.0f64, u in velocity(3), f in velocity(3)) {
        let s = make_stencil(k);
        let u = if s.dim() == 2 { [u[0], u[1], 0.0] } else { u };
        let force = if s.dim() == 2 { [f[0], f[1], 0.0] } else { f };
        let (df, flagged) = forcing_delta(rho, u, force, &s);
        prop_assert!(!flagged);
        let sum: f64 = df[..s.q].iter().sum();
        prop_assert!(sum.abs() < 1e-13);
        for d in 0..3 {
            let m: f64 = (0..s.q).map(|i| df[i] * s.dir(i)[d]).sum();
            prop_assert!((m - force[d]).abs() < 1e-12);
        }
    }

    #[test]
    fn ideal_eos_pressure_grows_with_density(r1 in 0.01..5.0f64, dr in 1e-6..5.0f64, t in 0.01..2.0f64) {
        let p = ComponentParams { eos: Eos { t, ..Eos::ideal() }, ..Default::default() };
        prop_assert!(pr_pressure(r1 + dr, &p).unwrap() > pr_pressure(r1, &p).unwrap());
    }

    #[test]
    fn repulsive_eos_pressure_grows_with_density(b in 0.01..0.2f64, r1 in 0.01..4.0f64, frac in 0.01..0.99f64) {
        let p = ComponentParams { eos: Eos { a: 0.0, b, ..Eos::ideal() }, ..Default::default() };
        let r2 = r1 + frac * (1.0 / b - r1).max(0.0);
        prop_assume!(b * r2 < 1.0 && r2 > r1);
        prop_assert!(pr_pressure(r2, &p).unwrap() > pr_pressure(r1, &p).unwrap());
    }

    #[test]
    fn periodic_forces_sum_to_zero(
        k in kind(),
        beta in 1.0..1.5f64,
        psi in prop::collection::vec(0.0..2.0f64, 5 * 5 * 5),
        other in prop::collection::vec(0.0..2.0f64, 5 * 5 * 5),
    ) {
        let s = make_stencil(k);
        let n = 5i32;
        let nz = if s.dim() == 3 { n } else { 1 };
        let at = |f: &[f64], x: i32, y: i32, z: i32| {
            f[(x.rem_euclid(n) + n * (y.rem_euclid(n) + n * z.rem_euclid(nz))) as usize]
        };
        let mut intra = [0.0; 3];
        let mut inter = [0.0; 3];
        let mut scale: f64 = 0.0;
        for z in 0..nz {
            for y in 0..n {
                for x in 0..n {
                    let mut nb = [0.0; MAX_Q];
                    let mut nb_other = [0.0; MAX_Q];
                    for i in 0..s.q {
                        let e = s.e[i];
                        nb[i] = at(&psi, x + e[0], y + e[1], z + e[2]);
                        nb_other[i] = at(&other, x + e[0], y + e[1], z + e[2]);
                    }
                    let fa = intra_force(at(&psi, x, y, z), &nb, -1.0, beta, &s);
                    let fb = inter_force(at(&psi, x, y, z), &nb_other, 0.7, &s);
                    let fc = inter_force(at(&other, x, y, z), &nb, 0.7, &s);
                    for d in 0..3 {
                        intra[d] += fa[d];
                        inter[d] += fb[d] + fc[d];
                        scale = scale.max(fa[d].abs()).max(fb[d].abs());
                    }
                }
            }
        }
        for d in 0..3 {
            prop_assert!(intra[d].abs() <= 1e-12 * (1.0 + scale * 125.0));
            prop_assert!(inter[d].abs() <= 1e-12 * (1.0 + scale * 125.0));
        }
    }

    #[test]
    fn streaming_moves_every_population_once(k in kind(), seed in any::<u64>()) {
        let s = make_stencil(k);
        let shape = TileShape::new(4, s.dim());
        let pn = shape.padded_len();
        let solid = vec![false; pn];
        let read: Vec<f64> = (0..s.q * pn).map(|v| (v as u64 ^ seed) as f64).collect();
        let mut write = vec![f64::NAN; s.q * pn];
        stream(&shape, &s, &solid, &read, &mut write);
        for i in 0..s.q {
            let off = shape.offset(s.e[i]);
            let mut seen = std::collections::BTreeSet::new();
            for &p in shape.cells() {
                let p = p as usize;
                prop_assert_eq!(write[i * pn + p].to_bits(), read[i * pn + (p as isize - off) as usize].to_bits());
                prop_assert!(seen.insert((p as isize - off) as usize));
            }
        }
    }

    #[test]
    fn sealed_tile_keeps_its_mass(k in kind(), values in prop::collection::vec(0.0..1.0f64, 19 * 8 * 8 * 8)) {
        let s = make_stencil(k);
        let shape = TileShape::new(6, s.dim());
        let pn = shape.padded_len();
        let mut solid = vec![true; pn];
        for &p in shape.cells() {
            let c = shape.coords(p as usize);
            let edge = |v: i32| v == 0 || v == 5;
            solid[p as usize] = edge(c[0]) || edge(c[1]) || (s.dim() == 3 && edge(c[2]));
        }
        let read: Vec<f64> = (0..s.q * pn).map(|k| values[k % values.len()]).collect();
        let mut write = vec![0.0; s.q * pn];
        stream(&shape, &s, &solid, &read, &mut write);
        bounce_back(&shape, &s, &solid, &read, &mut write);
        let mass = |f: &[f64]| -> f64 {
            shape.cells().iter().filter(|&&p| !solid[p as usize]).map(|&p| (0..s.q).map(|i| f[i * pn + p as usize]).sum::<f64>()).sum()
        };
        prop_assert!((mass(&read) - mass(&write)).abs() < 1e-10);
    }
}

/// Random growth: every new tile is a face neighbour of one already placed.
fn growth_trace(rng: &mut impl rand::Rng, grid: &TileGrid, n: usize) -> Vec<TileCoord> {
    let mut placed = vec![TileCoord::new(
        rng.gen_range(0..grid.dims[0]),
        rng.gen_range(0..grid.dims[1]),
        rng.gen_range(0..grid.dims[2]),
    )];
    while placed.len() < n {
        let from = placed[rng.gen_range(0..placed.len())];
        let faces: Vec<_> = grid.faces().collect();
        let face = faces[rng.gen_range(0..faces.len())];
        if let Some(c) = grid.neighbor(from, face) {
            if !placed.contains(&c) {
                placed.push(c);
            }
        }
    }
    placed
}

fn random_topology(rng: &mut impl rand::Rng, n: usize) -> DeviceTopology {
    let mut p2p = vec![false; n * n];
    for a in 0..n {
        p2p[a * n + a] = true;
        for b in a + 1..n {
            let link = rng.gen_bool(0.5);
            p2p[a * n + b] = link;
            p2p[b * n + a] = link;
        }
    }
    DeviceTopology::new(n, p2p).unwrap()
}

#[test]
fn optimized_policy_matches_exhaustive_minimum() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let grid = TileGrid::new([6, 4, 3], [false; 3], 3);
        let n_dev = rng.gen_range(1..=8);
        let topo = random_topology(&mut rng, n_dev);
        let len = rng.gen_range(1..=50);
        let trace = growth_trace(&mut rng, &grid, len);
        let mut owners = BTreeMap::new();
        let mut state = AssignmentState::new(n_dev);
        for &t in &trace {
            let eligible = eligible_devices(&state);
            let costs: Vec<f64> = eligible.iter().map(|&d| f_cost(t, d, &owners, &grid, &topo, 128)).collect();
            let min = costs.iter().cloned().fold(f64::INFINITY, f64::min);
            let first_min = eligible[costs.iter().position(|&c| c == min).unwrap()];
            let d = assign_device(t, &owners, &grid, &topo, &mut state, Policy::Optimized, 128);
            assert_eq!(d, first_min);
            assert!(state.spread() <= 1);
            owners.insert(t, d);
        }
    }
}

#[test]
fn assignment_is_deterministic() {
    use rand::SeedableRng;
    let grid = TileGrid::new([5, 5, 2], [false; 3], 3);
    let topo = DeviceTopology::hubs(&[4, 4]);
    let trace = growth_trace(&mut rand_chacha::ChaCha8Rng::seed_from_u64(3), &grid, 40);
    let run = || {
        let mut owners = BTreeMap::new();
        let mut state = AssignmentState::new(8);
        for &t in &trace {
            let d = assign_device(t, &owners, &grid, &topo, &mut state, Policy::Optimized, 64);
            owners.insert(t, d);
        }
        (owners, state)
    };
    assert_eq!(run(), run());
}
