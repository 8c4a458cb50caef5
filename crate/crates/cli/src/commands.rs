//! The experiment commands. Each one writes its CSVs into an output
//! directory and returns the numbers it wrote for callers that want them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;

use ctca_core::deploy::{deployment_rng, generate, DeployConfig, DeployMode};
use ctca_core::game::{EllRule, GameView, SignVerdict};
use ctca_core::net::{NetworkInstance, Node, PowerAssignment};
use ctca_core::optimal::average_price;
use ctca_core::replication_seed;
use ctca_core::sim::{aggregate_csv, lifetime_rounds, simulate, Algorithm, SimConfig, SimError, SimTrace};

use crate::config::{ExperimentSpec, SweepPoint};
use crate::plot::{line_chart, Series};
use crate::CliError;

/// Ratios below this bound break optimality of the benchmark.
pub const RATIO_FLOOR: f64 = 1.0 - 1e-12;

pub const SUMMARY_CSV_HEADER: &str = "algorithm,replications,mean_lifetime,min_lifetime,max_lifetime";
pub const PRICE_SUMMARY_HEADER: &str = "axis,value,round,samples,mean_ratio,percent_optimal,min_ratio";
pub const PRICE_ROWS_HEADER: &str = "axis,value,replication,n,round,t_opt_bits,t_ctca_bits,ratio";
pub const POTENTIAL_CSV_HEADER: &str = "instance,node,from_nJ_bit,to_nJ_bit,delta_u,delta_phi,verdict";

fn sim_err(e: SimError) -> CliError {
    match e {
        SimError::Config(m) => CliError::Config(m),
        SimError::Generation(g) => CliError::Generation(g.to_string()),
        other => CliError::Simulation(other.to_string()),
    }
}

struct OutDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }
}

fn write_meta(out: &mut OutDir, command: &str, spec: &ExperimentSpec) -> Result<(), CliError> {
    let d = &spec.sim.deploy;
    let source = if spec.seed_given { "given" } else { "drawn" };
    let algs: Vec<&str> = spec.algorithms.iter().map(|a| a.name()).collect();
    let meta = format!(
        "command={command}\nseed={}\nseed_source={source}\nn={}\nside_m={}\nradius_fraction={}\nenergy_J={}\nrounds={}\nreplications={}\nalgorithms={}\n",
        spec.sim.seed,
        d.n,
        d.side,
        d.radius_fraction,
        d.energy,
        spec.sim.rounds,
        spec.sim.replications,
        algs.join(",")
    );
    out.write("meta.txt", &meta)
}

/// Runs `cfg.replications` seeded replications; results are in
/// replication order whatever the thread count.
pub fn run_replications(cfg: &SimConfig) -> Result<Vec<SimTrace>, CliError> {
    (0..u64::from(cfg.replications))
        .into_par_iter()
        .map(|k| simulate(&cfg.replication(k)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(sim_err)
}

fn curve_series(name: &str, csv: &str) -> Series {
    let points = csv
        .lines()
        .skip(1)
        .filter_map(|l| {
            let (x, y) = l.split_once(',')?;
            Some((x.parse().ok()?, y.parse().ok()?))
        })
        .collect();
    Series {
        name: name.to_string(),
        points,
    }
}

pub struct SimulateResult {
    pub algorithm: Algorithm,
    pub traces: Vec<SimTrace>,
    pub files: Vec<PathBuf>,
}

/// One algorithm: a trace CSV per replication plus the connectivity curve.
pub fn cmd_simulate(spec: &ExperimentSpec, out: &Path, plot: bool) -> Result<SimulateResult, CliError> {
    spec.validate()?;
    let algorithm = spec.algorithms[0];
    let cfg = SimConfig {
        algorithm,
        ..spec.sim.clone()
    };
    let traces = run_replications(&cfg)?;
    let mut dir = OutDir::new(out)?;
    write_meta(&mut dir, "simulate", spec)?;
    let mut lifetimes = String::from("replication,seed,lifetime_rounds\n");
    for (k, t) in traces.iter().enumerate() {
        dir.write(&format!("trace_{}_{k:04}.csv", algorithm.name()), &t.to_csv())?;
        writeln!(lifetimes, "{k},{},{}", t.seed, lifetime_rounds(t)).unwrap();
    }
    dir.write("lifetimes.csv", &lifetimes)?;
    let curve = aggregate_csv(&traces);
    dir.write(&format!("curve_{}.csv", algorithm.name()), &curve)?;
    if plot {
        let svg = line_chart(
            "Connected networks",
            "round",
            "percent connected",
            &[curve_series(algorithm.name(), &curve)],
        );
        dir.write(&format!("curve_{}.svg", algorithm.name()), &svg)?;
    }
    Ok(SimulateResult {
        algorithm,
        traces,
        files: dir.written,
    })
}

pub struct CompareResult {
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    /// `lifetimes[a][k]`: algorithm `a`, replication `k`.
    pub lifetimes: Vec<Vec<u64>>,
    pub traces: Vec<Vec<SimTrace>>,
    pub files: Vec<PathBuf>,
}

impl CompareResult {
    pub fn mean_lifetime(&self, a: usize) -> f64 {
        let l = &self.lifetimes[a];
        if l.is_empty() {
            0.0
        } else {
            l.iter().sum::<u64>() as f64 / l.len() as f64
        }
    }
}

/// Matched-seed replications of every listed algorithm.
pub fn cmd_compare(spec: &ExperimentSpec, out: &Path, plot: bool) -> Result<CompareResult, CliError> {
    spec.validate()?;
    let seeds: Vec<u64> = (0..u64::from(spec.sim.replications))
        .map(|k| replication_seed(spec.sim.seed, k))
        .collect();
    let mut dir = OutDir::new(out)?;
    write_meta(&mut dir, "compare", spec)?;
    let mut lifetimes = Vec::new();
    let mut all = Vec::new();
    let mut series = Vec::new();
    for &algorithm in &spec.algorithms {
        let cfg = SimConfig {
            algorithm,
            ..spec.sim.clone()
        };
        let traces = run_replications(&cfg)?;
        let curve = aggregate_csv(&traces);
        dir.write(&format!("curve_{}.csv", algorithm.name()), &curve)?;
        series.push(curve_series(algorithm.name(), &curve));
        lifetimes.push(traces.iter().map(lifetime_rounds).collect::<Vec<_>>());
        all.push(traces);
    }
    let result = CompareResult {
        algorithms: spec.algorithms.clone(),
        seeds,
        lifetimes,
        traces: all,
        files: Vec::new(),
    };
    if result.algorithms.len() > 1 {
        let mut summary = format!("{SUMMARY_CSV_HEADER}\n");
        for (a, alg) in result.algorithms.iter().enumerate() {
            let l = &result.lifetimes[a];
            writeln!(
                summary,
                "{},{},{},{},{}",
                alg.name(),
                l.len(),
                result.mean_lifetime(a),
                l.iter().min().copied().unwrap_or(0),
                l.iter().max().copied().unwrap_or(0)
            )
            .unwrap();
        }
        dir.write("summary.csv", &summary)?;
        let names: Vec<&str> = result.algorithms.iter().map(|a| a.name()).collect();
        let mut paired = format!("replication,seed,{}\n", names.join(","));
        for (k, seed) in result.seeds.iter().enumerate() {
            let row: Vec<String> = result.lifetimes.iter().map(|l| l[k].to_string()).collect();
            writeln!(paired, "{k},{seed},{}", row.join(",")).unwrap();
        }
        dir.write("paired.csv", &paired)?;
    }
    if plot {
        let svg = line_chart("Connected networks", "round", "percent connected", &series);
        dir.write("curves.svg", &svg)?;
    }
    Ok(CompareResult {
        files: dir.written,
        ..result
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceRecord {
    pub point: SweepPoint,
    pub replication: u64,
    pub n: usize,
    pub round: u64,
    pub t_opt: f64,
    pub t_ctca: f64,
}

impl PriceRecord {
    pub fn ratio(&self) -> f64 {
        self.t_opt / self.t_ctca
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSummary {
    pub point: SweepPoint,
    pub round: u64,
    pub samples: usize,
    pub mean_ratio: f64,
    pub percent_optimal: f64,
    pub min_ratio: f64,
}

pub struct SweepResult {
    pub records: Vec<PriceRecord>,
    pub summaries: Vec<PriceSummary>,
    /// Ratios below [`RATIO_FLOOR`].
    pub violations: usize,
    pub files: Vec<PathBuf>,
}

impl SweepResult {
    pub fn summary(&self, point: SweepPoint, round: u64) -> Option<&PriceSummary> {
        self.summaries.iter().find(|s| s.point == point && s.round == round)
    }
}

/// CTCA against the per-round optimum at every sweep point.
pub fn cmd_price_sweep(spec: &ExperimentSpec, out: &Path, plot: bool) -> Result<SweepResult, CliError> {
    spec.validate()?;
    let points = spec.sweep.points();
    if points.is_empty() {
        return Err(CliError::Config("price-sweep needs [sweep] radii or densities".into()));
    }
    if spec.sweep.price_rounds.is_empty() {
        return Err(CliError::Config("price-sweep needs price_rounds".into()));
    }
    let last = *spec.sweep.price_rounds.iter().max().unwrap();
    let mut records = Vec::new();
    for &point in &points {
        let cfg = SimConfig {
            algorithm: Algorithm::Ctca,
            rounds: last,
            price_rounds: spec.sweep.price_rounds.clone(),
            ..point.apply(&spec.sim)
        };
        cfg.validate().map_err(sim_err)?;
        for (k, t) in run_replications(&cfg)?.into_iter().enumerate() {
            for p in &t.prices {
                records.push(PriceRecord {
                    point,
                    replication: k as u64,
                    n: t.n,
                    round: p.round,
                    t_opt: p.t_opt,
                    t_ctca: p.t_ctca,
                });
            }
        }
    }
    let mut summaries = Vec::new();
    for &point in &points {
        for &round in &spec.sweep.price_rounds {
            let pairs: Vec<(f64, f64)> = records
                .iter()
                .filter(|r| r.point == point && r.round == round)
                .map(|r| (r.t_opt, r.t_ctca))
                .collect();
            let Ok(report) = average_price(&pairs) else { continue };
            summaries.push(PriceSummary {
                point,
                round,
                samples: pairs.len(),
                mean_ratio: report.mean_ratio,
                percent_optimal: report.percent_optimal,
                min_ratio: report.rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min),
            });
        }
    }
    let violations = records.iter().filter(|r| r.ratio().is_nan() || r.ratio() < RATIO_FLOOR).count();

    let mut dir = OutDir::new(out)?;
    write_meta(&mut dir, "price-sweep", spec)?;
    let mut rows = format!("{PRICE_ROWS_HEADER}\n");
    for r in &records {
        writeln!(
            rows,
            "{},{},{},{},{},{},{},{}",
            r.point.axis(),
            r.point.value(),
            r.replication,
            r.n,
            r.round,
            r.t_opt,
            r.t_ctca,
            r.ratio()
        )
        .unwrap();
    }
    dir.write("price_rows.csv", &rows)?;
    let mut table = format!("{PRICE_SUMMARY_HEADER}\n");
    for s in &summaries {
        writeln!(
            table,
            "{},{},{},{},{},{},{}",
            s.point.axis(),
            s.point.value(),
            s.round,
            s.samples,
            s.mean_ratio,
            s.percent_optimal,
            s.min_ratio
        )
        .unwrap();
    }
    dir.write("price.csv", &table)?;
    if plot {
        for axis in ["radius_m", "density_km2"] {
            let series: Vec<Series> = spec
                .sweep
                .price_rounds
                .iter()
                .map(|&round| Series {
                    name: format!("round {round}"),
                    points: summaries
                        .iter()
                        .filter(|s| s.round == round && s.point.axis() == axis)
                        .map(|s| (s.point.value(), s.percent_optimal))
                        .collect(),
                })
                .filter(|s| !s.points.is_empty())
                .collect();
            if !series.is_empty() {
                let svg = line_chart("Optimal outcomes", axis, "percent optimal", &series);
                dir.write(&format!("price_{axis}.svg"), &svg)?;
            }
        }
    }
    Ok(SweepResult {
        records,
        summaries,
        violations,
        files: dir.written,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PotentialResult {
    pub instances: u32,
    /// Non-identity unilateral deviations checked.
    pub deviations: usize,
    pub consistent: usize,
    pub both_zero: usize,
    /// Sign mismatches, including the strictly opposed ones.
    pub violations: usize,
    pub opposed: usize,
    pub identity: usize,
    pub identity_both_zero: usize,
    pub files: Vec<PathBuf>,
}

/// A uniformly drawn strongly connected menu assignment, or maximum power
/// if none turns up.
fn random_connected_assignment(net: &NetworkInstance, rng: &mut impl Rng) -> PowerAssignment {
    for _ in 0..10_000 {
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
    net.max_power_assignment()
}

/// Draws instance `k` of a potential check: geometry, energies and a
/// connected starting assignment.
pub fn potential_instance(spec: &ExperimentSpec, k: u64) -> Result<(NetworkInstance, PowerAssignment), CliError> {
    let p = &spec.potential;
    let cfg = DeployConfig {
        n: p.nodes,
        side: p.side,
        radius_fraction: p.radius_fraction,
        energy: p.energy_lo,
        radio: spec.sim.deploy.radio,
        mode: DeployMode::Regenerate,
        max_attempts: spec.sim.deploy.max_attempts,
    };
    let mut rng = deployment_rng(replication_seed(spec.sim.seed, k));
    let geometry = generate(&cfg, &mut rng).map_err(|e| CliError::Generation(e.to_string()))?;
    let nodes: Vec<Node> = geometry
        .nodes()
        .iter()
        .map(|n| Node {
            energy: rng.gen_range(p.energy_lo..p.energy_hi),
            ..n.clone()
        })
        .collect();
    let net = NetworkInstance::new(nodes, *geometry.radio(), geometry.p_max(), geometry.side())
        .map_err(|e| CliError::Generation(e.to_string()))?;
    let pa = random_connected_assignment(&net, &mut rng);
    Ok((net, pa))
}

/// Every unilateral menu deviation on every instance, checked for sign
/// agreement between the deviator's utility and the potential.
pub fn cmd_potential_check(spec: &ExperimentSpec, out: &Path) -> Result<PotentialResult, CliError> {
    spec.validate()?;
    let rule = if spec.potential.negate_ell {
        EllRule::Negated
    } else {
        EllRule::Standard
    };
    let per_instance = (0..u64::from(spec.potential.instances))
        .into_par_iter()
        .map(|k| {
            let (net, pa) = potential_instance(spec, k)?;
            let view = GameView::at_initial_energy(&net, pa).map_err(|e| CliError::Generation(e.to_string()))?;
            let mut rows = String::new();
            let mut r = PotentialResult::default();
            for i in net.ids() {
                let cur = view.assignment().get(i);
                r.identity += 1;
                if view.sign_consistency_with(i, cur, cur, rule).verdict == SignVerdict::BothZero {
                    r.identity_both_zero += 1;
                }
                for &a in net.menu(i).levels() {
                    if a == cur {
                        continue;
                    }
                    let c = view.sign_consistency_with(i, cur, a, rule);
                    r.deviations += 1;
                    let verdict = match c.verdict {
                        SignVerdict::Consistent => {
                            r.consistent += 1;
                            "consistent"
                        }
                        SignVerdict::BothZero => {
                            r.both_zero += 1;
                            "both_zero"
                        }
                        SignVerdict::Violated { opposed } => {
                            r.violations += 1;
                            if opposed {
                                r.opposed += 1;
                                "opposed"
                            } else {
                                "violated"
                            }
                        }
                    };
                    writeln!(rows, "{k},{i},{},{},{},{},{verdict}", cur * 1e9, a * 1e9, c.delta_u, c.delta_phi)
                        .unwrap();
                }
            }
            Ok((rows, r))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut total = PotentialResult {
        instances: spec.potential.instances,
        ..PotentialResult::default()
    };
    let mut csv = format!("{POTENTIAL_CSV_HEADER}\n");
    for (rows, r) in per_instance {
        csv.push_str(&rows);
        total.deviations += r.deviations;
        total.consistent += r.consistent;
        total.both_zero += r.both_zero;
        total.violations += r.violations;
        total.opposed += r.opposed;
        total.identity += r.identity;
        total.identity_both_zero += r.identity_both_zero;
    }
    let mut dir = OutDir::new(out)?;
    write_meta(&mut dir, "potential-check", spec)?;
    dir.write("potential.csv", &csv)?;
    let report = format!(
        "instances={}\ndeviations={}\nconsistent={}\nboth_zero={}\nviolations={}\nopposed={}\nidentity={}\nidentity_both_zero={}\n",
        total.instances,
        total.deviations,
        total.consistent,
        total.both_zero,
        total.violations,
        total.opposed,
        total.identity,
        total.identity_both_zero
    );
    dir.write("potential_report.txt", &report)?;
    total.files = dir.written;
    Ok(total)
}
