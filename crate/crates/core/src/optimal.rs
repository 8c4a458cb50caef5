//! Centralized max-min lifetime benchmark and the average-price metric.

use thiserror::Error;

use crate::game::estimated_lifetime;
use crate::graph;
use crate::net::{NetworkInstance, NodeId, PowerAssignment};

#[derive(Debug, Error, PartialEq)]
pub enum OptimalError {
    #[error("alive nodes are not strongly connected at maximum power")]
    Disconnected,
    #[error("{0} energies for {1} nodes")]
    EnergyLength(usize, usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum PriceError {
    #[error("no rounds to average")]
    EmptyInput,
    #[error("round {round}: algorithm lifetime {t_ctca} is not positive")]
    NonPositive { round: usize, t_ctca: f64 },
}

/// Directed edge weighted by the share of the sender's lifetime it costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalResult {
    pub assignment: PowerAssignment,
    pub t_opt: f64,
}

/// `w_ij = p(i, j) / W_i` for every in-range pair of alive nodes.
pub fn edge_weights(net: &NetworkInstance, energies: &[f64]) -> Vec<WeightedEdge> {
    let mut out = Vec::new();
    for i in net.ids() {
        if energies[i.0] <= 0.0 {
            continue;
        }
        for j in net.neighbors(i) {
            if energies[j.0] > 0.0 {
                out.push(WeightedEdge {
                    from: i,
                    to: j,
                    weight: net.link_power(i, j) / energies[i.0],
                });
            }
        }
    }
    out
}

/// Smallest estimated lifetime among alive nodes (`+∞` when none).
pub fn min_estimated_lifetime(assignment: &PowerAssignment, energies: &[f64]) -> f64 {
    energies
        .iter()
        .zip(assignment.as_slice())
        .filter(|(&w, _)| w > 0.0)
        .map(|(&w, &p)| estimated_lifetime(w, p))
        .fold(f64::INFINITY, f64::min)
}

/// Greedy edge removal by decreasing weight, keeping the alive nodes
/// strongly connected. Dead nodes get power 0.
pub fn optimal_maxmin(net: &NetworkInstance, energies: &[f64]) -> Result<OptimalResult, OptimalError> {
    let n = net.n();
    if energies.len() != n {
        return Err(OptimalError::EnergyLength(energies.len(), n));
    }
    let alive: Vec<bool> = energies.iter().map(|&w| w > 0.0).collect();
    let mut edges = edge_weights(net, energies);
    let mut adj = vec![false; n * n];
    for e in &edges {
        adj[e.from.0 * n + e.to.0] = true;
    }
    if !graph::strongly_connected(n, &alive, |u, v| adj[u * n + v]) {
        return Err(OptimalError::Disconnected);
    }
    edges.sort_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then((a.from, a.to).cmp(&(b.from, b.to)))
    });
    for e in &edges {
        let k = e.from.0 * n + e.to.0;
        adj[k] = false;
        if !graph::strongly_connected(n, &alive, |u, v| adj[u * n + v]) {
            adj[k] = true;
        }
    }
    let power: Vec<f64> = net
        .ids()
        .map(|i| {
            net.ids()
                .filter(|j| adj[i.0 * n + j.0])
                .map(|j| net.link_power(i, j))
                .fold(0.0, f64::max)
        })
        .collect();
    let assignment = PowerAssignment::new(power);
    let t_opt = min_estimated_lifetime(&assignment, energies);
    Ok(OptimalResult { assignment, t_opt })
}

pub const PRICE_CSV_HEADER: &str = "round,t_opt_bits,t_ctca_bits,ratio";

/// Ratios within this distance of 1 count as optimal.
pub const OPTIMAL_BAND: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PriceRow {
    pub round: usize,
    pub t_opt: f64,
    pub t_ctca: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceReport {
    pub rows: Vec<PriceRow>,
    pub mean_ratio: f64,
    pub percent_optimal: f64,
}

impl PriceReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{PRICE_CSV_HEADER}\n");
        for r in &self.rows {
            s.push_str(&format!("{},{:e},{:e},{}\n", r.round, r.t_opt, r.t_ctca, r.ratio));
        }
        s
    }
}

pub fn is_optimal_ratio(ratio: f64) -> bool {
    (ratio - 1.0).abs() <= OPTIMAL_BAND
}

/// Averages `T_opt / T_ctca` over rounds numbered from 1.
pub fn average_price(rounds: &[(f64, f64)]) -> Result<PriceReport, PriceError> {
    if rounds.is_empty() {
        return Err(PriceError::EmptyInput);
    }
    let mut rows = Vec::with_capacity(rounds.len());
    for (k, &(t_opt, t_ctca)) in rounds.iter().enumerate() {
        if t_ctca.is_nan() || t_ctca <= 0.0 {
            return Err(PriceError::NonPositive { round: k + 1, t_ctca });
        }
        rows.push(PriceRow {
            round: k + 1,
            t_opt,
            t_ctca,
            ratio: t_opt / t_ctca,
        });
    }
    let mean_ratio = rows.iter().map(|r| r.ratio).sum::<f64>() / rows.len() as f64;
    let hits = rows.iter().filter(|r| is_optimal_ratio(r.ratio)).count();
    Ok(PriceReport {
        percent_optimal: 100.0 * hits as f64 / rows.len() as f64,
        rows,
        mean_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::tests::{collinear, p, A, B, C, NJ};

    #[test]
    fn weight_point_value() {
        let net = collinear();
        let w = edge_weights(&net, &[40e3, 40e3, 40e3]);
        assert_eq!(w.len(), 6);
        let e = w.iter().find(|e| e.from == A && e.to == C).unwrap();
        assert_eq!(e.weight, p(&net, A, C) / 40e3);
        assert!((180.0 * NJ / 40e3 - 4.5e-12).abs() < 1e-24);
        let doubled = edge_weights(&net, &[80e3, 40e3, 40e3]);
        for (a, b) in w.iter().zip(&doubled).filter(|(a, _)| a.from == A) {
            assert_eq!(a.weight, 2.0 * b.weight);
        }
        assert_eq!(edge_weights(&net, &[0.0, 40e3, 40e3]).len(), 2);
    }

    #[test]
    fn collinear_optimum() {
        let net = collinear();
        let r = optimal_maxmin(&net, &[40e3; 3]).unwrap();
        assert_eq!(r.assignment.as_slice(), &[p(&net, A, C), p(&net, C, B), p(&net, B, C)]);
        assert_eq!(r.t_opt, 40e3 / p(&net, C, B));
        assert!(((r.t_opt - 4.0404e11) / 4.0404e11).abs() < 1e-4);
    }

    #[test]
    fn dead_node_is_skipped() {
        let net = collinear();
        let r = optimal_maxmin(&net, &[40e3, 40e3, 0.0]).unwrap();
        assert_eq!(r.assignment.as_slice(), &[p(&net, A, C), p(&net, C, A), 0.0]);
        assert_eq!(r.t_opt, 40e3 / p(&net, A, C));
        assert_eq!(optimal_maxmin(&net, &[40e3, 0.0, 40e3]).unwrap().t_opt, 40e3 / p(&net, A, B));
        assert_eq!(optimal_maxmin(&net, &[1.0; 2]), Err(OptimalError::EnergyLength(2, 3)));
    }

    #[test]
    fn price_arithmetic() {
        let r = average_price(&[(2.0, 1.0), (3.0, 3.0)]).unwrap();
        assert_eq!(r.mean_ratio, 1.5);
        assert_eq!(r.percent_optimal, 50.0);
        assert_eq!(average_price(&[(5.0, 5.0)]).unwrap().mean_ratio, 1.0);
        assert_eq!(average_price(&[]), Err(PriceError::EmptyInput));
        assert!(matches!(average_price(&[(1.0, 0.0)]), Err(PriceError::NonPositive { round: 1, .. })));
        assert!(r.to_csv().starts_with("round,t_opt_bits,t_ctca_bits,ratio\n1,"));
    }
}
