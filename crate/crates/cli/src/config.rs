//! Experiment configuration: `key = value` lines grouped under `[section]`
//! headers. `#` starts a comment. Unknown sections or keys are errors.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use ctca_core::deploy::DeployMode;
use ctca_core::sim::{Algorithm, SimConfig, TrafficRule};

use crate::CliError;

/// What a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepPoint {
    /// Maximum transmission radius in meters.
    Radius(f64),
    /// Nodes per square kilometer.
    Density(f64),
}

impl SweepPoint {
    pub fn axis(self) -> &'static str {
        match self {
            SweepPoint::Radius(_) => "radius_m",
            SweepPoint::Density(_) => "density_km2",
        }
    }

    pub fn value(self) -> f64 {
        match self {
            SweepPoint::Radius(v) | SweepPoint::Density(v) => v,
        }
    }

    /// The simulation settings at this point.
    pub fn apply(self, base: &SimConfig) -> SimConfig {
        let mut cfg = base.clone();
        match self {
            SweepPoint::Radius(r) => cfg.deploy.radius_fraction = r / cfg.deploy.side,
            SweepPoint::Density(d) => {
                let km2 = cfg.deploy.side * cfg.deploy.side / 1e6;
                cfg.deploy.n = (d * km2).round() as usize;
            }
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub radii: Vec<f64>,
    pub densities: Vec<f64>,
    pub price_rounds: Vec<u64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            radii: Vec::new(),
            densities: Vec::new(),
            price_rounds: vec![1, 2, 6],
        }
    }
}

impl SweepSpec {
    pub fn points(&self) -> Vec<SweepPoint> {
        self.radii
            .iter()
            .map(|&r| SweepPoint::Radius(r))
            .chain(self.densities.iter().map(|&d| SweepPoint::Density(d)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub instances: u32,
    pub nodes: usize,
    pub side: f64,
    pub radius_fraction: f64,
    /// Node energies are drawn uniformly from `[energy_lo, energy_hi)`.
    pub energy_lo: f64,
    pub energy_hi: f64,
    /// Flip the secondary-goal indicator; a checker sanity test.
    pub negate_ell: bool,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self {
            instances: 50,
            nodes: 8,
            side: 200.0,
            radius_fraction: 0.35,
            energy_lo: 0.5,
            energy_hi: 1.5,
            negate_ell: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub sim: SimConfig,
    /// Algorithms for `compare`; the first one is used by `simulate`.
    pub algorithms: Vec<Algorithm>,
    pub sweep: SweepSpec,
    pub potential: PotentialSpec,
    /// Whether the seed came from the user rather than being drawn.
    pub seed_given: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            algorithms: vec![Algorithm::Ctca],
            sweep: SweepSpec::default(),
            potential: PotentialSpec::default(),
            seed_given: false,
        }
    }
}

type Sections = BTreeMap<String, BTreeMap<String, (usize, String)>>;

fn tokenize(text: &str) -> Result<Sections, CliError> {
    let mut out: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (k, raw) in text.lines().enumerate() {
        let ln = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| CliError::Config(format!("line {ln}: unterminated section header")))?;
            let name = name.trim().to_string();
            out.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {ln}: expected `key = value`")))?;
        let section = current
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("line {ln}: key outside any section")))?;
        let key = key.trim().to_string();
        let table = out.get_mut(section).unwrap();
        if table.contains_key(&key) {
            return Err(CliError::Config(format!("line {ln}: duplicate key {section}.{key}")));
        }
        table.insert(key, (ln, value.trim().to_string()));
    }
    Ok(out)
}

fn parse<T: FromStr>(section: &str, key: &str, ln: usize, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Config(format!("line {ln}: bad value {v:?} for {section}.{key}")))
}

fn parse_bool(section: &str, key: &str, ln: usize, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("line {ln}: bad boolean {v:?} for {section}.{key}"))),
    }
}

pub fn parse_list<T: FromStr>(v: &str) -> Result<Vec<T>, CliError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::Config(format!("bad list item {s:?}"))))
        .collect()
}

pub fn parse_algorithms(v: &str) -> Result<Vec<Algorithm>, CliError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| Algorithm::from_str(s).map_err(|e| CliError::Config(e.to_string())))
        .collect()
}

impl ExperimentSpec {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut spec = ExperimentSpec::default();
        let mut radius_m: Option<f64> = None;
        for (section, table) in tokenize(text)? {
            for (key, (ln, v)) in table {
                let s = section.as_str();
                let k = key.as_str();
                let v = v.as_str();
                let sim = &mut spec.sim;
                match (s, k) {
                    ("sim", "n") => sim.deploy.n = parse(s, k, ln, v)?,
                    ("sim", "side") => sim.deploy.side = parse(s, k, ln, v)?,
                    ("sim", "radius_fraction") => sim.deploy.radius_fraction = parse(s, k, ln, v)?,
                    ("sim", "radius") => radius_m = Some(parse(s, k, ln, v)?),
                    ("sim", "energy") => sim.deploy.energy = parse(s, k, ln, v)?,
                    ("sim", "max_attempts") => sim.deploy.max_attempts = parse(s, k, ln, v)?,
                    ("sim", "deploy") => {
                        sim.deploy.mode = match v {
                            "regenerate" => DeployMode::Regenerate,
                            "largest-component" => DeployMode::LargestComponent,
                            _ => return Err(CliError::Config(format!("line {ln}: unknown deploy mode {v:?}"))),
                        }
                    }
                    ("sim", "traffic") => {
                        sim.traffic =
                            TrafficRule::from_str(v).map_err(|e| CliError::Config(format!("line {ln}: {e}")))?
                    }
                    ("sim", "algorithm") | ("sim", "algorithms") => spec.algorithms = parse_algorithms(v)?,
                    ("sim", "rounds") => sim.rounds = parse(s, k, ln, v)?,
                    ("sim", "seed") => {
                        sim.seed = parse(s, k, ln, v)?;
                        spec.seed_given = true;
                    }
                    ("sim", "replications") => sim.replications = parse(s, k, ln, v)?,
                    ("radio", "e_elec") => sim.deploy.radio.e_elec = parse(s, k, ln, v)?,
                    ("radio", "eps_fs") => sim.deploy.radio.eps_fs = parse(s, k, ln, v)?,
                    ("radio", "eps_mp") => sim.deploy.radio.eps_mp = parse(s, k, ln, v)?,
                    ("radio", "d0") => sim.deploy.radio.d0 = parse(s, k, ln, v)?,
                    ("protocol", "q_max") => sim.protocol.q_max = parse(s, k, ln, v)?,
                    ("protocol", "t1") => sim.protocol.t1 = parse(s, k, ln, v)?,
                    ("protocol", "t2") => sim.protocol.t2 = parse(s, k, ln, v)?,
                    ("protocol", "t3") => sim.protocol.t3 = parse(s, k, ln, v)?,
                    ("protocol", "control_bits") => sim.protocol.control_bits = parse(s, k, ln, v)?,
                    ("protocol", "data_bits") => sim.protocol.data_bits = parse(s, k, ln, v)?,
                    ("protocol", "debit_energy") => sim.protocol.debit_energy = parse_bool(s, k, ln, v)?,
                    ("sweep", "radii") => spec.sweep.radii = parse_list(v)?,
                    ("sweep", "densities") => spec.sweep.densities = parse_list(v)?,
                    ("sweep", "price_rounds") => spec.sweep.price_rounds = parse_list(v)?,
                    ("potential", "instances") => spec.potential.instances = parse(s, k, ln, v)?,
                    ("potential", "nodes") => spec.potential.nodes = parse(s, k, ln, v)?,
                    ("potential", "side") => spec.potential.side = parse(s, k, ln, v)?,
                    ("potential", "radius_fraction") => spec.potential.radius_fraction = parse(s, k, ln, v)?,
                    ("potential", "energy_lo") => spec.potential.energy_lo = parse(s, k, ln, v)?,
                    ("potential", "energy_hi") => spec.potential.energy_hi = parse(s, k, ln, v)?,
                    ("potential", "negate_ell") => spec.potential.negate_ell = parse_bool(s, k, ln, v)?,
                    _ => return Err(CliError::Config(format!("line {ln}: unknown key {s}.{k}"))),
                }
            }
        }
        if let Some(r) = radius_m {
            spec.sim.deploy.radius_fraction = r / spec.sim.deploy.side;
        }
        Ok(spec)
    }

    /// Checks everything a command may rely on.
    pub fn validate(&self) -> Result<(), CliError> {
        self.sim.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.algorithms.is_empty() {
            return Err(CliError::Config("no algorithms listed".into()));
        }
        let side = self.sim.deploy.side;
        if self.sweep.radii.iter().any(|&r| !(r > 0.0 && r <= side)) {
            return Err(CliError::Config(format!("sweep radii must lie in (0, {side}]")));
        }
        if self.sweep.densities.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(CliError::Config("sweep densities must be positive".into()));
        }
        if self.sweep.price_rounds.contains(&0) {
            return Err(CliError::Config("price rounds start at 1".into()));
        }
        let p = &self.potential;
        if p.nodes < 2 || !p.side.is_finite() || p.side <= 0.0 || !p.radius_fraction.is_finite() || p.radius_fraction <= 0.0 {
            return Err(CliError::Config("potential check needs 2+ nodes, a positive side and radius".into()));
        }
        if !(0.0 < p.energy_lo && p.energy_lo < p.energy_hi && p.energy_hi.is_finite()) {
            return Err(CliError::Config("potential energies need 0 < energy_lo < energy_hi".into()));
        }
        Ok(())
    }
}
