//! Single runs, parameter sweeps, and the CSV / JSON artifacts they write.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dosim::controllers::ControllerVariant;
use dosim::metrics::{self, BoundInputs, MetricsReport, ZenoReport};
use dosim::oracle::{OfflineSolution, OracleCache, OracleOptions};
use dosim::sim::{self, SimConfig, Trajectory};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::scenario::{resolve_scenario, Overrides, Scenario, ScenarioSpec, VariantKind};
use crate::{CliError, CliResult};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const BOUNDS_FILE: &str = "bounds.json";
pub const INDEX_FILE: &str = "index.csv";

/// Seeds `start, start + 1, …, start + count - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRange {
    pub start: u64,
    pub count: u64,
}

/// Sweep axes; an absent axis keeps the scenario default, an empty one is
/// rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepAxes {
    pub variants: Option<Vec<VariantKind>>,
    pub sigma: Option<Vec<f64>>,
    pub iota: Option<Vec<f64>>,
    pub k_mu: Option<Vec<f64>>,
    pub noise_half_width: Option<Vec<f64>>,
    pub seeds: Option<SeedRange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    /// Built-in name or scenario file path (relative paths resolve against
    /// the plan file).
    pub scenario: String,
    #[serde(default = "default_variant")]
    pub variant: VariantKind,
    pub out_dir: PathBuf,
    /// Free-text tag copied into every index row.
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub sweep: SweepAxes,
    /// Spacing of metric checkpoints; scenario default when absent.
    pub checkpoint_step: Option<f64>,
}

fn default_variant() -> VariantKind {
    VariantKind::Continuous
}

impl ExperimentPlan {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let mut plan: Self = toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let candidate = base.join(&plan.scenario);
        if !crate::scenario::BUILTIN_NAMES.contains(&plan.scenario.as_str()) && candidate.exists() {
            plan.scenario = candidate.to_string_lossy().into_owned();
        }
        if plan.out_dir.is_relative() {
            plan.out_dir = base.join(&plan.out_dir);
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> CliResult<()> {
        let s = &self.sweep;
        let empty = |name: &str, len: Option<usize>| match len {
            Some(0) => Err(CliError::Validation(format!("sweep.{name}: empty sweep axis"))),
            _ => Ok(()),
        };
        empty("variants", s.variants.as_ref().map(Vec::len))?;
        empty("sigma", s.sigma.as_ref().map(Vec::len))?;
        empty("iota", s.iota.as_ref().map(Vec::len))?;
        empty("k_mu", s.k_mu.as_ref().map(Vec::len))?;
        empty("noise_half_width", s.noise_half_width.as_ref().map(Vec::len))?;
        empty("seeds", s.seeds.map(|r| r.count as usize))?;
        for (name, axis) in [("sigma", &s.sigma), ("iota", &s.iota), ("k_mu", &s.k_mu), ("noise_half_width", &s.noise_half_width)] {
            if axis.iter().flatten().any(|v| !v.is_finite()) {
                return Err(CliError::Validation(format!("sweep.{name}: non-finite value")));
            }
        }
        Ok(())
    }

    /// Cartesian product of the axes.
    pub fn grid(&self) -> Vec<GridPoint> {
        let s = &self.sweep;
        let one = |v: &Option<Vec<f64>>| -> Vec<Option<f64>> {
            v.as_ref().map_or(vec![None], |xs| xs.iter().copied().map(Some).collect())
        };
        let variants = s.variants.clone().unwrap_or_else(|| vec![self.variant]);
        let seeds: Vec<Option<u64>> = s.seeds.map_or(vec![None], |r| (r.start..r.start + r.count).map(Some).collect());
        let mut out = Vec::new();
        for &variant in &variants {
            for sigma in one(&s.sigma) {
                for iota in one(&s.iota) {
                    for k_mu in one(&s.k_mu) {
                        for a in one(&s.noise_half_width) {
                            for &seed in &seeds {
                                let mut o = self.overrides.clone();
                                o.sigma = sigma.or(o.sigma);
                                o.iota = iota.or(o.iota);
                                o.k_mu = k_mu.or(o.k_mu);
                                o.noise_half_width = a.or(o.noise_half_width);
                                o.seed = seed.or(o.seed);
                                out.push(GridPoint { variant, overrides: o });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub variant: VariantKind,
    pub overrides: Overrides,
}

/// Paths written by one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub trajectory: PathBuf,
    pub metrics: PathBuf,
    pub bounds: PathBuf,
}

/// Final-horizon outcome of one run, as listed in the index.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run_id: String,
    pub variant: VariantKind,
    pub sigma: Option<f64>,
    pub iota: Option<f64>,
    pub k_mu: f64,
    pub noise_half_width: Option<f64>,
    pub seed: u64,
    pub config_hash: String,
    pub horizon: f64,
    pub regret: f64,
    pub fit: f64,
    pub fit_parts: Vec<f64>,
    pub regret_bound: f64,
    pub fit_bound: f64,
    pub certified: bool,
    pub events_total: u64,
    pub steps: u64,
    pub checkpoints: Vec<MetricsRow>,
}

/// Fully resolved configuration; its hash identifies a run.
#[derive(Debug, Clone, Serialize)]
struct EffectiveConfig<'a> {
    scenario: &'a ScenarioSpec,
    variant: &'static str,
    dt: f64,
    horizon: f64,
    epsilon: f64,
    k_mu: f64,
    sigma: Option<f64>,
    iota: Option<f64>,
    trigger_every_step: bool,
    noise_half_width: Option<f64>,
    k_y: Option<f64>,
    seed: u64,
    log_stride: usize,
    checkpoint_step: f64,
    grid_k: usize,
}

fn effective_config<'a>(scenario: &'a Scenario, cfg: &SimConfig<f64>, checkpoint_step: f64) -> EffectiveConfig<'a> {
    let (sigma, iota, every) = match cfg.variant {
        ControllerVariant::EventTriggered { sigma, iota, rule } => {
            (Some(sigma), Some(iota), rule == dosim::TriggerRule::EveryStep)
        }
        _ => (None, None, false),
    };
    let noise = match cfg.variant {
        ControllerVariant::Noisy { noise } => Some(match noise {
            dosim::NoiseModel::Zero => 0.0,
            dosim::NoiseModel::Uniform { half_width } => half_width,
        }),
        _ => None,
    };
    let k_y = match cfg.variant {
        ControllerVariant::ContinuousConsensus { k_y } => Some(k_y),
        _ => None,
    };
    EffectiveConfig {
        scenario: &scenario.spec,
        variant: cfg.variant.name(),
        dt: cfg.dt,
        horizon: cfg.horizon,
        epsilon: cfg.epsilon,
        k_mu: cfg.k_mu,
        sigma,
        iota,
        trigger_every_step: every,
        noise_half_width: noise,
        k_y,
        seed: cfg.seed,
        log_stride: cfg.log_stride,
        checkpoint_step,
        grid_k: scenario.spec.simulation.grid_k,
    }
}

/// SHA-256 of the canonical JSON form of the resolved configuration.
pub fn config_hash(scenario: &Scenario, cfg: &SimConfig<f64>, checkpoint_step: f64) -> CliResult<String> {
    let json = serde_json::to_vec(&effective_config(scenario, cfg, checkpoint_step))?;
    Ok(hex::encode(Sha256::digest(&json)))
}

/// Key under which offline optima of a scenario are cached.
pub fn scenario_key(spec: &ScenarioSpec) -> CliResult<String> {
    let json = serde_json::to_vec(spec)?;
    Ok(hex::encode(Sha256::digest(&json)))
}

fn oracle_options(spec: &ScenarioSpec) -> OracleOptions<f64> {
    OracleOptions { grid_k: spec.simulation.grid_k, ..OracleOptions::default() }
}

/// Offline optima at every horizon in `horizons`, solved in parallel and
/// memoised in `cache`.
pub fn solve_offline(
    scenario: &Scenario,
    horizons: &[f64],
    cache: &OracleCache<f64>,
) -> CliResult<Vec<OfflineSolution<f64>>> {
    let key = scenario_key(&scenario.spec)?;
    let problems = scenario.problems();
    let opts = oracle_options(&scenario.spec);
    horizons
        .par_iter()
        .map(|&h| cache.get_or_solve(&key, &problems, h, &opts).map_err(CliError::from))
        .collect()
}

fn checkpoint_horizons(cfg: &SimConfig<f64>, step: f64) -> CliResult<Vec<f64>> {
    let hs = metrics::checkpoints(cfg.horizon, step);
    let stride = cfg.log_stride as f64 * cfg.dt;
    for &h in &hs {
        let k = h / stride;
        let on_grid = (k - k.round()).abs() < 1e-6;
        let is_end = (h - cfg.horizon).abs() <= 1e-12 * cfg.horizon.max(1.0);
        if !on_grid && !is_end {
            return Err(CliError::Validation(format!(
                "simulation.checkpoint_step: checkpoint {h} is not a multiple of log_stride * dt = {stride}"
            )));
        }
    }
    Ok(hs)
}

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub horizon: f64,
    pub regret: f64,
    pub fit: f64,
    pub fit_over_sqrt_t: f64,
    pub regret_bound: f64,
    pub fit_bound: f64,
    pub regret_within_bound: bool,
    pub fit_within_bound: bool,
    pub certified: bool,
    pub expected_bounds: bool,
    pub events_total: u64,
    pub oracle_kkt_residual: f64,
}

impl MetricsRow {
    fn new(r: &MetricsReport<f64>, oracle: &OfflineSolution<f64>) -> Self {
        Self {
            horizon: r.horizon,
            regret: r.regret,
            fit: r.fit,
            fit_over_sqrt_t: r.fit / r.horizon.sqrt(),
            regret_bound: r.bounds.regret,
            fit_bound: r.bounds.fit,
            regret_within_bound: r.regret_within_bound,
            fit_within_bound: r.fit_within_bound,
            certified: r.certified,
            expected_bounds: r.bounds.expected,
            events_total: r.events_total,
            oracle_kkt_residual: oracle.kkt_residual,
        }
    }
}

#[derive(Debug, Serialize)]
struct GainCheckJson {
    rule: &'static str,
    required: f64,
    actual: f64,
    passed: bool,
    hard: bool,
}

#[derive(Debug, Serialize)]
struct AgentEventsJson {
    events: usize,
    min_gap: Option<f64>,
    min_gap_over_bound: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ZenoJson {
    satisfied: bool,
    total_events: u64,
    steps: u64,
    agents: Vec<AgentEventsJson>,
}

impl From<&ZenoReport<f64>> for ZenoJson {
    fn from(z: &ZenoReport<f64>) -> Self {
        Self {
            satisfied: z.satisfied(),
            total_events: z.total_events,
            steps: z.steps,
            agents: z
                .agents
                .iter()
                .map(|a| AgentEventsJson { events: a.events, min_gap: a.min_gap, min_gap_over_bound: a.min_gap_over_bound })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
struct BoundsJson<'a> {
    scenario: &'a str,
    variant: &'static str,
    config_hash: &'a str,
    certified: bool,
    gain_checks: Vec<GainCheckJson>,
    epsilon: f64,
    k_mu: f64,
    k_f: f64,
    k_g: f64,
    strong_convexity: f64,
    varsigma1: f64,
    varsigma2: f64,
    initial_energy: f64,
    y_star: Vec<f64>,
    all_within_bounds: bool,
    checkpoints: &'a [MetricsRow],
    inter_event: Option<ZenoJson>,
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Writes the trajectory log with the fixed column layout.
pub fn write_trajectory_csv(
    path: &Path,
    traj: &Trajectory<f64>,
    regret_running: &[f64],
) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let first = traj.y.first().ok_or_else(|| CliError::Other("empty trajectory".into()))?;
    let mu_dims: Vec<usize> = traj.mu[0].iter().map(|m| m.len()).collect();
    let q = traj.constraint_integral[0].len();
    let mut header = vec!["time".to_string()];
    for (i, y) in first.iter().enumerate() {
        header.extend((0..y.len()).map(|k| format!("y_{}_{}", i + 1, k + 1)));
    }
    for (i, &d) in mu_dims.iter().enumerate() {
        header.extend((0..d).map(|k| format!("mu_{}_{}", i + 1, k + 1)));
    }
    header.push("cost_integral".into());
    header.extend((0..q).map(|j| format!("constraint_integral_{}", j + 1)));
    header.extend(["regret_running".into(), "fit_running".into(), "events_total".into()]);
    w.write_record(&header)?;
    for s in 0..traj.len() {
        let mut row = vec![fmt(traj.times[s])];
        row.extend(traj.y[s].iter().flat_map(|y| y.iter().map(|&v| fmt(v))));
        row.extend(traj.mu[s].iter().flat_map(|m| m.iter().map(|&v| fmt(v))));
        row.push(fmt(traj.cost_integral[s]));
        row.extend(traj.constraint_integral[s].iter().map(|&v| fmt(v)));
        row.push(fmt(regret_running[s]));
        row.push(fmt(metrics::fit_from_parts(&traj.constraint_integral[s])));
        row.push(traj.events_total[s].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs one configuration and writes its three artifacts into `dir`.
pub fn run_single(
    scenario: &Scenario,
    kind: VariantKind,
    overrides: &Overrides,
    checkpoint_step: Option<f64>,
    dir: &Path,
    cache: &OracleCache<f64>,
) -> CliResult<(RunSummary, RunArtifacts)> {
    let cfg = scenario.sim_config(kind, overrides)?;
    let step = checkpoint_step.unwrap_or(scenario.spec.simulation.checkpoint_step);
    let hash = config_hash(scenario, &cfg, step)?;
    let report = scenario.gain_report(&cfg);
    let failure = report
        .hard_failures()
        .next()
        .map(|c| format!("parameters.k_mu: {} (required {}, got {})", c.rule, c.required, c.actual));
    if let Some(msg) = failure {
        return Err(CliError::Validation(msg));
    }
    let certified = report.certified();
    let horizons = checkpoint_horizons(&cfg, step)?;
    let traj = sim::run(&scenario.network, &cfg, &scenario.x0)?;
    let (inputs, cert) = BoundInputs::for_run(&scenario.network, &cfg, &scenario.x0)?;
    let oracles = solve_offline(scenario, &horizons, cache)?;

    let mut rows = Vec::with_capacity(horizons.len());
    let mut last: Option<MetricsReport<f64>> = None;
    for (&h, o) in horizons.iter().zip(&oracles) {
        let r = metrics::evaluate(&traj, &scenario.network, &inputs, o, h, certified)?;
        rows.push(MetricsRow::new(&r, o));
        last = Some(r);
    }
    let last = last.ok_or_else(|| CliError::Validation("simulation.horizon: no metric checkpoints".into()))?;
    let final_oracle = oracles.last().expect("one oracle per checkpoint");

    let problems = scenario.problems();
    let reference = metrics::reference_cost_curve(&traj, &problems, &final_oracle.blocks);
    let regret_running: Vec<f64> = traj.cost_integral.iter().zip(&reference).map(|(c, r)| c - r).collect();

    fs::create_dir_all(dir)?;
    let artifacts = RunArtifacts {
        dir: dir.to_path_buf(),
        trajectory: dir.join(TRAJECTORY_FILE),
        metrics: dir.join(METRICS_FILE),
        bounds: dir.join(BOUNDS_FILE),
    };
    write_trajectory_csv(&artifacts.trajectory, &traj, &regret_running)?;
    write_metrics_csv(&artifacts.metrics, &rows)?;

    let zeno = match cfg.variant {
        ControllerVariant::EventTriggered { .. } => Some(ZenoJson::from(&metrics::zeno_report(
            &traj,
            scenario.network.len(),
            scenario.network.constraint_dim(),
            cfg.k_mu,
        )?)),
        _ => None,
    };
    let constants = scenario.network.constants();
    let bounds = BoundsJson {
        scenario: &scenario.spec.name,
        variant: cfg.variant.name(),
        config_hash: &hash,
        certified,
        gain_checks: report
            .checks
            .iter()
            .map(|c| GainCheckJson { rule: c.rule, required: c.required, actual: c.actual, passed: c.passed, hard: c.hard })
            .collect(),
        epsilon: cfg.epsilon,
        k_mu: cfg.k_mu,
        k_f: constants.k_f,
        k_g: constants.k_g,
        strong_convexity: constants.strong_convexity,
        varsigma1: cert.varsigma1,
        varsigma2: cert.varsigma2,
        initial_energy: inputs.initial_energy,
        y_star: final_oracle.y_star.iter().copied().collect(),
        all_within_bounds: rows.iter().all(|r| r.regret_within_bound && r.fit_within_bound),
        checkpoints: &rows,
        inter_event: zeno,
    };
    let mut json = serde_json::to_string_pretty(&bounds)?;
    json.push('\n');
    fs::write(&artifacts.bounds, json)?;

    let (sigma, iota) = match cfg.variant {
        ControllerVariant::EventTriggered { sigma, iota, .. } => (Some(sigma), Some(iota)),
        _ => (None, None),
    };
    let noise_half_width = effective_config(scenario, &cfg, step).noise_half_width;
    let summary = RunSummary {
        run_id: String::new(),
        variant: kind,
        sigma,
        iota,
        k_mu: cfg.k_mu,
        noise_half_width,
        seed: cfg.seed,
        config_hash: hash,
        horizon: last.horizon,
        regret: last.regret,
        fit: last.fit,
        fit_parts: last.fit_parts.iter().copied().collect(),
        regret_bound: last.bounds.regret,
        fit_bound: last.bounds.fit,
        certified,
        events_total: traj.total_events(),
        steps: traj.total_steps(),
        checkpoints: rows,
    };
    Ok((summary, artifacts))
}

/// Outcome of one grid point.
#[derive(Debug)]
pub struct IndexEntry {
    pub run_id: String,
    pub point: GridPoint,
    pub config_hash: String,
    pub outcome: Result<RunSummary, CliError>,
}

/// Runs every grid point of `plan` in parallel and writes `index.csv`.
/// Failed runs are listed with their error; the rest proceed.
pub fn run_experiment(plan: &ExperimentPlan) -> CliResult<Vec<IndexEntry>> {
    plan.validate()?;
    let spec = resolve_scenario(&plan.scenario)?;
    let scenario = Scenario::build(spec)?;
    let grid = plan.grid();
    fs::create_dir_all(&plan.out_dir)?;
    let cache = OracleCache::new();
    let width = grid.len().saturating_sub(1).to_string().len().max(4);
    let entries: Vec<IndexEntry> = grid
        .into_par_iter()
        .enumerate()
        .map(|(k, point)| {
            let run_id = format!("run_{k:0width$}");
            let dir = plan.out_dir.join(&run_id);
            let step = plan.checkpoint_step.unwrap_or(scenario.spec.simulation.checkpoint_step);
            let config_hash = scenario
                .sim_config(point.variant, &point.overrides)
                .and_then(|cfg| config_hash(&scenario, &cfg, step))
                .unwrap_or_default();
            let outcome = run_single(&scenario, point.variant, &point.overrides, plan.checkpoint_step, &dir, &cache).map(
                |(mut s, _)| {
                    s.run_id = run_id.clone();
                    s
                },
            );
            IndexEntry { run_id, point, config_hash, outcome }
        })
        .collect();
    write_index(&plan.out_dir.join(INDEX_FILE), &plan.label, &entries)?;
    Ok(entries)
}

const INDEX_HEADER: [&str; 19] = [
    "run_id",
    "label",
    "variant",
    "sigma",
    "iota",
    "k_mu",
    "noise_half_width",
    "seed",
    "config_hash",
    "status",
    "error",
    "horizon",
    "regret",
    "fit",
    "regret_bound",
    "fit_bound",
    "certified",
    "events_total",
    "steps",
];

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Writes the index; groups of successful runs that differ only in their
/// seed get an extra `mean` row with the mean regret and the norm of the
/// mean positive-part fit vector.
pub fn write_index(path: &Path, label: &str, entries: &[IndexEntry]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(INDEX_HEADER)?;
    let mut groups: BTreeMap<String, Vec<&RunSummary>> = BTreeMap::new();
    for e in entries {
        let o = &e.point.overrides;
        match &e.outcome {
            Ok(s) => {
                w.write_record([
                    e.run_id.clone(),
                    label.to_string(),
                    s.variant.as_str().to_string(),
                    opt(s.sigma),
                    opt(s.iota),
                    fmt(s.k_mu),
                    opt(s.noise_half_width),
                    s.seed.to_string(),
                    e.config_hash.clone(),
                    "ok".into(),
                    String::new(),
                    fmt(s.horizon),
                    fmt(s.regret),
                    fmt(s.fit),
                    fmt(s.regret_bound),
                    fmt(s.fit_bound),
                    s.certified.to_string(),
                    s.events_total.to_string(),
                    s.steps.to_string(),
                ])?;
                let key = format!("{}|{:?}|{:?}|{}|{:?}", s.variant.as_str(), s.sigma, s.iota, s.k_mu, s.noise_half_width);
                groups.entry(key).or_default().push(s);
            }
            Err(err) => {
                w.write_record([
                    e.run_id.clone(),
                    label.to_string(),
                    e.point.variant.as_str().to_string(),
                    opt(o.sigma),
                    opt(o.iota),
                    opt(o.k_mu),
                    opt(o.noise_half_width),
                    o.seed.map(|s| s.to_string()).unwrap_or_default(),
                    e.config_hash.clone(),
                    "failed".into(),
                    err.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ])?;
            }
        }
    }
    for runs in groups.values().filter(|g| g.len() > 1) {
        let s0 = runs[0];
        let (mean_regret, mean_fit) = monte_carlo_means(runs);
        let seeds = format!("{}..{}", runs.iter().map(|r| r.seed).min().unwrap_or(0), runs.iter().map(|r| r.seed).max().unwrap_or(0));
        let mean_events = runs.iter().map(|r| r.events_total as f64).sum::<f64>() / runs.len() as f64;
        w.write_record([
            "mean".to_string(),
            label.to_string(),
            s0.variant.as_str().to_string(),
            opt(s0.sigma),
            opt(s0.iota),
            fmt(s0.k_mu),
            opt(s0.noise_half_width),
            seeds,
            String::new(),
            format!("ok ({} runs)", runs.len()),
            String::new(),
            fmt(s0.horizon),
            fmt(mean_regret),
            fmt(mean_fit),
            fmt(s0.regret_bound),
            fmt(s0.fit_bound),
            s0.certified.to_string(),
            fmt(mean_events),
            s0.steps.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `(mean R, ‖mean [F]₊‖)` over runs at their final horizon.
pub fn monte_carlo_means(runs: &[&RunSummary]) -> (f64, f64) {
    let k = runs.len() as f64;
    let q = runs.first().map_or(0, |r| r.fit_parts.len());
    let mut pos = DVector::<f64>::zeros(q);
    let mut regret = 0.0;
    for r in runs {
        regret += r.regret / k;
        for (acc, f) in pos.iter_mut().zip(&r.fit_parts) {
            *acc += f.max(0.0) / k;
        }
    }
    (regret, pos.norm())
}
