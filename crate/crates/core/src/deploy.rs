//! Random deployments in a square region.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::net::{min_link_power, NetError, NetworkInstance, Node, NodeId, Position};
use crate::radio::RadioParams;

#[derive(Debug, Error, PartialEq)]
pub enum DeployError {
    #[error("invalid deployment config: {0}")]
    Config(String),
    #[error("no connected deployment after {attempts} attempts")]
    GenerationFailure { attempts: u32 },
}

/// What to do when a uniform draw is not connected at maximum power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeployMode {
    /// Redraw the whole deployment.
    #[default]
    Regenerate,
    /// Keep the largest connected component, renumbered from 0.
    LargestComponent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeployConfig {
    pub n: usize,
    pub side: f64,
    /// Maximum transmission radius as a fraction of the side.
    pub radius_fraction: f64,
    pub energy: f64,
    pub radio: RadioParams,
    pub mode: DeployMode,
    pub max_attempts: u32,
}

impl Default for DeployConfig {
    fn default() -> Self {
        Self {
            n: 200,
            side: 10_000.0,
            radius_fraction: 0.2,
            energy: 40e3,
            radio: RadioParams::default(),
            mode: DeployMode::Regenerate,
            max_attempts: 1000,
        }
    }
}

impl DeployConfig {
    pub fn validate(&self) -> Result<(), DeployError> {
        let bad = |m: &str| Err(DeployError::Config(m.into()));
        if self.n < 2 {
            return bad("need at least two nodes");
        }
        if !(self.side.is_finite() && self.side > 0.0) {
            return bad("side must be positive");
        }
        if !(self.radius_fraction > 0.0 && self.radius_fraction <= 1.0) {
            return bad("radius fraction must lie in (0, 1]");
        }
        if !(self.energy.is_finite() && self.energy > 0.0) {
            return bad("energy must be positive");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1");
        }
        self.radio.validate().map_err(|e| DeployError::Config(e.to_string()))
    }

    pub fn radius(&self) -> f64 {
        self.radius_fraction * self.side
    }

    pub fn p_max(&self) -> f64 {
        min_link_power(&Position::new(0.0, 0.0), &Position::new(self.radius(), 0.0), &self.radio)
    }
}

pub fn deployment_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn draw(cfg: &DeployConfig, rng: &mut impl Rng) -> Vec<Position> {
    (0..cfg.n)
        .map(|_| Position::new(rng.gen::<f64>() * cfg.side, rng.gen::<f64>() * cfg.side))
        .collect()
}

/// Indices of the largest component of the symmetric in-range graph; ties
/// go to the component holding the smallest index.
fn largest_component(points: &[Position], cfg: &DeployConfig) -> Vec<usize> {
    let n = points.len();
    let p_max = cfg.p_max();
    let mut label = vec![usize::MAX; n];
    let mut best: Vec<usize> = Vec::new();
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = s;
        let mut comp = vec![s];
        let mut k = 0;
        while k < comp.len() {
            let u = comp[k];
            k += 1;
            for v in 0..n {
                if label[v] == usize::MAX && min_link_power(&points[u], &points[v], &cfg.radio) <= p_max {
                    label[v] = s;
                    comp.push(v);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best.sort_unstable();
    best
}

fn build(points: &[Position], cfg: &DeployConfig) -> Result<NetworkInstance, NetError> {
    let nodes = points
        .iter()
        .enumerate()
        .map(|(i, &position)| Node {
            id: NodeId(i),
            position,
            energy: cfg.energy,
        })
        .collect();
    NetworkInstance::new(nodes, cfg.radio, cfg.p_max(), cfg.side)
}

/// Draws a deployment connected at maximum power.
pub fn generate(cfg: &DeployConfig, rng: &mut impl Rng) -> Result<NetworkInstance, DeployError> {
    cfg.validate()?;
    for attempt in 1..=cfg.max_attempts {
        let mut points = draw(cfg, rng);
        if cfg.mode == DeployMode::LargestComponent {
            let keep = largest_component(&points, cfg);
            if keep.len() < 2 {
                continue;
            }
            points = keep.into_iter().map(|i| points[i]).collect();
        }
        match build(&points, cfg) {
            Ok(net) => return Ok(net),
            Err(e) => log::debug!("deployment attempt {attempt} rejected: {e}"),
        }
    }
    Err(DeployError::GenerationFailure {
        attempts: cfg.max_attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DeployConfig {
        DeployConfig {
            n: 12,
            side: 200.0,
            radius_fraction: 0.5,
            energy: 5.0,
            ..DeployConfig::default()
        }
    }

    #[test]
    fn generated_instances_are_connected_and_in_region() {
        let cfg = small();
        let net = generate(&cfg, &mut deployment_rng(7)).unwrap();
        assert_eq!(net.n(), 12);
        assert!(net.is_strongly_connected(&net.max_power_assignment()));
        assert!(net.nodes().iter().all(|n| n.position.x <= 200.0 && n.position.y <= 200.0));
        assert!(net.nodes().iter().all(|n| n.energy == 5.0));
        assert_eq!(net.p_max(), cfg.p_max());
    }

    #[test]
    fn same_seed_same_instance() {
        let a = generate(&small(), &mut deployment_rng(3)).unwrap();
        let b = generate(&small(), &mut deployment_rng(3)).unwrap();
        assert_eq!(a.to_deployment_text(3), b.to_deployment_text(3));
    }

    #[test]
    fn sparse_regeneration_fails_but_component_mode_succeeds() {
        let cfg = DeployConfig {
            n: 60,
            side: 1000.0,
            radius_fraction: 0.05,
            max_attempts: 5,
            ..DeployConfig::default()
        };
        assert!(matches!(
            generate(&cfg, &mut deployment_rng(1)),
            Err(DeployError::GenerationFailure { attempts: 5 })
        ));
        let cfg = DeployConfig {
            mode: DeployMode::LargestComponent,
            ..cfg
        };
        let net = generate(&cfg, &mut deployment_rng(1)).unwrap();
        assert!(net.n() >= 2 && net.n() < 60);
        assert!(net.is_strongly_connected(&net.max_power_assignment()));
    }

    #[test]
    fn config_validation() {
        assert!(matches!(
            DeployConfig { n: 1, ..small() }.validate(),
            Err(DeployError::Config(_))
        ));
        assert!(DeployConfig { radius_fraction: 0.0, ..small() }.validate().is_err());
        assert!(DeployConfig { energy: -1.0, ..small() }.validate().is_err());
        assert!(small().validate().is_ok());
    }
}
