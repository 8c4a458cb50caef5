#![allow(dead_code)]

use ctca_core::deploy::{deployment_rng, generate, DeployConfig};
use ctca_core::net::{NetworkInstance, Node, NodeId, Position, PowerAssignment};
use ctca_core::RadioParams;
use rand::Rng;

pub const NJ: f64 = 1e-9;

pub fn line_up(points: &[(f64, f64)], energies: &[f64], p_max: f64, side: f64) -> NetworkInstance {
    let nodes = points
        .iter()
        .zip(energies)
        .enumerate()
        .map(|(i, (&(x, y), &energy))| Node {
            id: NodeId(i),
            position: Position::new(x, y),
            energy,
        })
        .collect();
    NetworkInstance::new(nodes, RadioParams::default(), p_max, side).unwrap()
}

pub const A: NodeId = NodeId(0);
pub const C: NodeId = NodeId(1);
pub const B: NodeId = NodeId(2);

/// A, C, B on a line at 0, 40 and 110 m.
pub fn collinear(energy: f64) -> NetworkInstance {
    line_up(&[(0.0, 0.0), (40.0, 0.0), (110.0, 0.0)], &[energy; 3], 250.0 * NJ, 110.0)
}

pub fn link(net: &NetworkInstance, a: NodeId, b: NodeId) -> f64 {
    net.link_power(a, b)
}

/// A reaches B directly while C only reaches A.
pub fn stuck(net: &NetworkInstance) -> PowerAssignment {
    PowerAssignment::new(vec![link(net, A, B), link(net, C, A), link(net, B, C)])
}

pub const N1: NodeId = NodeId(0);
pub const N2: NodeId = NodeId(1);
pub const N3: NodeId = NodeId(2);
pub const N4: NodeId = NodeId(3);

/// Four nodes where N3 can help N1 by covering N2. N4 has less energy so
/// that it cannot afford the same help.
pub fn four_nodes() -> (NetworkInstance, PowerAssignment) {
    let net = line_up(
        &[(0.0, 30.0), (100.0, 0.0), (40.0, 0.0), (0.0, 0.0)],
        &[1.0, 1.0, 1.0, 0.8],
        250.0 * NJ,
        100.0,
    );
    let pa = PowerAssignment::new(vec![
        link(&net, N1, N2),
        link(&net, N2, N3),
        link(&net, N3, N1),
        link(&net, N4, N3),
    ]);
    (net, pa)
}

pub fn random_instance(seed: u64, n: usize, side: f64, radius_fraction: f64, energy: f64) -> NetworkInstance {
    let cfg = DeployConfig {
        n,
        side,
        radius_fraction,
        energy,
        ..DeployConfig::default()
    };
    generate(&cfg, &mut deployment_rng(seed)).unwrap()
}

/// Same geometry with per-node energies drawn from `[lo, hi)`.
pub fn with_energies(net: &NetworkInstance, seed: u64, lo: f64, hi: f64) -> NetworkInstance {
    let mut rng = deployment_rng(seed ^ 0x5eed);
    let nodes = net
        .nodes()
        .iter()
        .map(|n| Node {
            energy: rng.gen_range(lo..hi),
            ..n.clone()
        })
        .collect();
    NetworkInstance::new(nodes, *net.radio(), net.p_max(), net.side()).unwrap()
}

/// A uniformly drawn menu assignment that is strongly connected.
pub fn random_connected_assignment(net: &NetworkInstance, rng: &mut impl Rng) -> PowerAssignment {
    loop {
        let pa = PowerAssignment::new(
            net.ids()
                .map(|i| {
                    let l = net.menu(i).levels();
                    l[rng.gen_range(0..l.len())]
                })
                .collect(),
        );
        if net.is_strongly_connected(&pa) {
            return pa;
        }
    }
}

/// Best max-min lifetime over every menu assignment, by enumeration.
pub fn brute_force_optimum(net: &NetworkInstance, energies: &[f64]) -> f64 {
    let menus: Vec<&[f64]> = net.ids().map(|i| net.menu(i).levels()).collect();
    let mut idx = vec![0usize; net.n()];
    let mut best = 0.0f64;
    loop {
        let pa = PowerAssignment::new(idx.iter().enumerate().map(|(i, &k)| menus[i][k]).collect());
        if net.is_strongly_connected(&pa) {
            let t = (0..net.n()).map(|i| energies[i] / pa.as_slice()[i]).fold(f64::INFINITY, f64::min);
            best = best.max(t);
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return best;
            }
            idx[k] += 1;
            if idx[k] < menus[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
