mod common;

use common::*;
use ctca_core::baselines::{dlss, drng, max_power};
use ctca_core::deploy::deployment_rng;
use ctca_core::net::PowerAssignment;
use ctca_core::optimal::{min_estimated_lifetime, optimal_maxmin, OptimalError};
use proptest::prelude::*;

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

#[test]
fn greedy_matches_enumeration_on_six_nodes() {
    for seed in 0..60 {
        let net = with_energies(&random_instance(seed, 6, 200.0, 0.6, 1.0), seed, 0.2, 2.0);
        let energies = net.initial_energies();
        let greedy = optimal_maxmin(&net, &energies).unwrap();
        let brute = brute_force_optimum(&net, &energies);
        assert!(rel_eq(greedy.t_opt, brute), "seed {seed}: {} vs {brute}", greedy.t_opt);
        assert!(net.is_strongly_connected(&greedy.assignment));
    }
}

#[test]
fn collinear_optimum_equals_enumeration() {
    let net = collinear(40e3);
    let e = net.initial_energies();
    let r = optimal_maxmin(&net, &e).unwrap();
    assert_eq!(r.t_opt, brute_force_optimum(&net, &e));
    assert_eq!(r.assignment.as_slice(), &[link(&net, A, C), link(&net, C, B), link(&net, B, C)]);
}

#[test]
fn two_nodes_optimum() {
    let net = line_up(&[(0.0, 0.0), (30.0, 0.0)], &[2.0, 3.0], 1e-6, 30.0);
    let r = optimal_maxmin(&net, &[2.0, 3.0]).unwrap();
    let only = net.menu(ctca_core::NodeId(0)).min();
    assert_eq!(r.t_opt, 2.0 / only);
}

#[test]
fn equal_weights_give_equal_values_under_relabeling() {
    // a square: all four sides tie, as do both diagonals
    let pts = [(0.0, 0.0), (50.0, 0.0), (50.0, 50.0), (0.0, 50.0)];
    let a = line_up(&pts, &[1.0; 4], 1e-6, 50.0);
    let rotated = [pts[1], pts[2], pts[3], pts[0]];
    let b = line_up(&rotated, &[1.0; 4], 1e-6, 50.0);
    let ta = optimal_maxmin(&a, &[1.0; 4]).unwrap().t_opt;
    let tb = optimal_maxmin(&b, &[1.0; 4]).unwrap().t_opt;
    assert_eq!(ta, tb);
}

#[test]
fn isolated_survivor_set_is_rejected() {
    let net = line_up(&[(0.0, 0.0), (80.0, 0.0), (160.0, 0.0)], &[1.0; 3], 1.2e-7, 160.0);
    assert_eq!(optimal_maxmin(&net, &[1.0, 0.0, 1.0]), Err(OptimalError::Disconnected));
}

#[test]
fn baselines_connect_random_instances() {
    for seed in 0..100 {
        let net = random_instance(seed, 20, 500.0, 0.3, 1.0);
        let d = dlss(&net).unwrap();
        let r = drng(&net).unwrap();
        let m = max_power(&net);
        for res in [&d, &r, &m] {
            assert!(net.is_strongly_connected(&res.assignment), "seed {seed}");
            for i in net.ids() {
                let p = res.assignment.get(i);
                assert!(net.menu(i).contains(p) && p <= net.p_max());
            }
        }
        for i in net.ids() {
            assert!(d.assignment.get(i) <= r.assignment.get(i), "seed {seed} node {i}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn optimum_dominates_every_connected_assignment(seed in 0u64..100_000) {
        let net = with_energies(&random_instance(seed, 7, 200.0, 0.5, 1.0), seed, 0.5, 1.5);
        let e = net.initial_energies();
        let t_opt = optimal_maxmin(&net, &e).unwrap().t_opt;
        let mut rng = deployment_rng(seed);
        for _ in 0..20 {
            let pa: PowerAssignment = random_connected_assignment(&net, &mut rng);
            prop_assert!(t_opt >= min_estimated_lifetime(&pa, &e) * (1.0 - 1e-12));
        }
        prop_assert!(t_opt >= min_estimated_lifetime(&dlss(&net).unwrap().assignment, &e) * (1.0 - 1e-12));
    }
}
