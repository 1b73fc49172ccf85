//! Scenario files, the two built-in scenarios, and network assembly.

use std::path::Path;
use std::sync::Arc;

use dosim::controllers::{GainReport, NoiseModel};
use dosim::plant::Agent;
use dosim::problem::{AffineConstraint, AffineRow, LocalProblem, QuadraticCost, QuadraticTerm, SinusoidalCoefficient};
use dosim::sim::{Network, SimConfig};
use dosim::synthesis::{check_rank_condition, GainSet, LtiModel};
use dosim::{BoxSet, ControllerVariant, Graph, TriggerRule};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub parameters: ParameterSpec,
    #[serde(default)]
    pub variants: VariantSpec,
    pub simulation: SimulationSpec,
    pub graph: GraphSpec,
    pub agents: Vec<AgentSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub epsilon: f64,
    pub k_mu: f64,
    #[serde(default = "default_margin")]
    pub stability_margin: f64,
    /// Seed for initial states that are not pinned per agent.
    pub init_seed: u64,
    /// Uniform range of unpinned initial state coordinates.
    pub x0_range: [f64; 2],
}

fn default_margin() -> f64 {
    dosim::synthesis::DEFAULT_STABILITY_MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub sigma: f64,
    pub iota: f64,
    #[serde(default)]
    pub trigger_rule: TriggerRuleSpec,
    /// Half-width `a` of the uniform link noise.
    pub noise_half_width: f64,
    /// Dual gain used by the noisy variant; falls back to `parameters.k_mu`.
    pub noisy_k_mu: Option<f64>,
    /// Output-consensus gain; falls back to `N·K_∂f`.
    pub k_y: Option<f64>,
}

impl Default for VariantSpec {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            iota: 0.5,
            trigger_rule: TriggerRuleSpec::Threshold,
            noise_half_width: 0.0,
            noisy_k_mu: None,
            k_y: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriggerRuleSpec {
    #[default]
    Threshold,
    EveryStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub horizon: f64,
    pub dt: f64,
    pub log_stride: usize,
    pub seed: u64,
    /// Spacing of metric checkpoints.
    pub checkpoint_step: f64,
    /// Sample count of the offline benchmark.
    pub grid_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GraphSpec {
    Ring { n: usize },
    Adjacency { matrix: Vec<Vec<u8>> },
    RandomConnected { n: usize, edge_prob: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    /// Row-major.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    pub output_set: BoxSpec,
    pub cost: CostSpec,
    pub constraint: ConstraintSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// `Σ_k weight (y_k - amplitude cos(frequency t) - offset)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub weight: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub offset: f64,
}

/// Rows `Σ_k c_k(t) y_k + d(t)`, each `c` and `d` of the form
/// `gain + amplitude sin(frequency t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub rows: Vec<RowSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSpec {
    pub coefficients: Vec<CoefSpec>,
    pub offset: CoefSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefSpec {
    pub gain: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub frequency: f64,
}

impl CoefSpec {
    fn constant(gain: f64) -> Self {
        Self { gain, amplitude: 0.0, frequency: 0.0 }
    }
    fn sin(gain: f64, amplitude: f64, frequency: f64) -> Self {
        Self { gain, amplitude, frequency }
    }
}

fn term(weight: f64, amplitude: f64, frequency: f64, offset: f64) -> TermSpec {
    TermSpec { weight, amplitude, frequency, offset }
}

pub const BUILTIN_NAMES: [&str; 2] = ["example1", "example2-pev"];

pub fn builtin_scenario(name: &str) -> Result<ScenarioSpec, CliError> {
    match name {
        "example1" => Ok(example1()),
        "example2-pev" => Ok(example2_pev()),
        other => Err(CliError::Validation(format!(
            "unknown built-in scenario {other:?} (known: {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

fn example1() -> ScenarioSpec {
    let a12 = vec![vec![1.0, 0.0], vec![0.0, 2.0]];
    let b12 = vec![vec![0.0, 1.0], vec![1.0, 3.0]];
    let c12 = vec![vec![2.0, 0.0], vec![0.0, 1.0]];
    let a34 = vec![vec![0.0, 2.0], vec![-1.0, 1.0]];
    let b34 = vec![vec![2.0, 1.0], vec![1.0, 0.0]];
    let c34 = vec![vec![2.0, 1.0], vec![-1.0, 0.0]];
    let a56 = vec![vec![2.0, 1.0, 0.0], vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 2.0]];
    let b56 = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
    let c56 = vec![vec![3.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 2.0]];

    let costs = [
        vec![term(2.0, 2.0, 1.0, 1.0), term(2.0, 1.0, 1.5, 1.5)],
        vec![term(1.0, 1.0, 2.0, 1.0), term(2.0, 2.0, 1.7, 3.0)],
        vec![term(3.0, 1.0, 2.0, 3.0), term(1.0, 1.0, 1.0, 1.0)],
        vec![term(1.0, 3.0, 1.0, 2.0), term(3.0, 1.0, 2.0, 2.0)],
        vec![term(1.0, 1.0, 1.5, 1.2), term(1.0, 3.0, 1.5, 1.0), term(2.0, 1.0, 2.0, 3.0)],
        vec![term(0.5, 1.0, 2.0, 1.0), term(2.0, 2.0, 1.2, 1.0), term(2.0, 1.0, 1.0, 1.0)],
    ];
    let s = CoefSpec::sin;
    let constraints = [
        (vec![s(1.7, 0.3, 15.0), s(1.8, 0.2, 10.0)], -1.0),
        (vec![s(1.6, 0.4, 20.0), s(1.6, 0.4, 20.0)], -2.0),
        (vec![s(1.5, 0.5, 10.0), s(1.4, 0.6, 25.0)], -3.0),
        (vec![s(1.4, 0.6, 15.0), s(1.2, 0.8, 15.0)], -4.0),
        (vec![s(1.3, 0.7, 10.0), s(1.5, 0.5, 10.0), s(1.7, 0.3, 15.0)], -5.0),
        (vec![s(1.2, 0.8, 15.0), s(1.4, 0.6, 25.0), s(1.6, 0.4, 20.0)], -6.0),
    ];
    let agents = costs
        .into_iter()
        .zip(constraints)
        .enumerate()
        .map(|(i, (terms, (coefficients, offset)))| {
            let (a, b, c) = match i {
                0 | 1 => (a12.clone(), b12.clone(), c12.clone()),
                2 | 3 => (a34.clone(), b34.clone(), c34.clone()),
                _ => (a56.clone(), b56.clone(), c56.clone()),
            };
            let p = terms.len();
            AgentSpec {
                a,
                b,
                c,
                x0: None,
                output_set: BoxSpec { lower: vec![-1.0; p], upper: vec![6.0; p] },
                cost: CostSpec { terms },
                constraint: ConstraintSpec {
                    rows: vec![RowSpec { coefficients, offset: CoefSpec::constant(offset) }],
                },
            }
        })
        .collect();
    ScenarioSpec {
        name: "example1".into(),
        description: "Six heterogeneous agents on a ring with sinusoidal quadratic costs and one coupled affine constraint".into(),
        parameters: ParameterSpec {
            epsilon: 0.1,
            k_mu: 200.0,
            stability_margin: default_margin(),
            init_seed: 7,
            x0_range: [-5.0, 5.0],
        },
        variants: VariantSpec {
            sigma: 1.0,
            iota: 0.5,
            trigger_rule: TriggerRuleSpec::Threshold,
            noise_half_width: 0.4,
            noisy_k_mu: Some(2232.0),
            k_y: None,
        },
        simulation: SimulationSpec {
            horizon: 50.0,
            dt: 1e-3,
            log_stride: 100,
            seed: 0,
            checkpoint_step: 5.0,
            grid_k: dosim::oracle::DEFAULT_GRID_K,
        },
        graph: GraphSpec::Ring { n: 6 },
        agents,
    }
}

/// PEV fleet: single integrators on `[0, 5]`, cost `(α/2)(y + β(t)/α)²`
/// and coupled constraint `Σ_i (y_i - d_i(t)) ≤ 0`, with `α`, `β`, `d` drawn
/// from their stated intervals using a fixed seed.
fn example2_pev() -> ScenarioSpec {
    const N: usize = 50;
    const PARAM_SEED: u64 = 2050;
    let mut rng = ChaCha8Rng::seed_from_u64(PARAM_SEED);
    let agents = (0..N)
        .map(|_| {
            let alpha: f64 = rng.gen_range(0.5..=1.0);
            // β(t) = β0 + β1 cos(ω t) and d(t) = d0 + d1 sin(ν t), both kept
            // inside [0.3, 0.5] and [0.5, 0.7].
            let beta0: f64 = rng.gen_range(0.35..=0.45);
            let beta1: f64 = rng.gen_range(0.0..=0.05);
            let omega: f64 = rng.gen_range(0.5..=2.0);
            let d0: f64 = rng.gen_range(0.55..=0.65);
            let d1: f64 = rng.gen_range(0.0..=0.05);
            let nu: f64 = rng.gen_range(0.5..=2.0);
            AgentSpec {
                a: vec![vec![0.0]],
                b: vec![vec![1.0]],
                c: vec![vec![1.0]],
                x0: None,
                output_set: BoxSpec { lower: vec![0.0], upper: vec![5.0] },
                cost: CostSpec {
                    terms: vec![term(alpha / 2.0, -beta1 / alpha, omega, -beta0 / alpha)],
                },
                constraint: ConstraintSpec {
                    rows: vec![RowSpec {
                        coefficients: vec![CoefSpec::constant(1.0)],
                        offset: CoefSpec::sin(-d0, -d1, nu),
                    }],
                },
            }
        })
        .collect();
    ScenarioSpec {
        name: "example2-pev".into(),
        description: "Fifty single-integrator charging agents on a random connected graph sharing a capacity constraint".into(),
        parameters: ParameterSpec {
            epsilon: 1.0,
            k_mu: 250.0,
            stability_margin: default_margin(),
            init_seed: 11,
            x0_range: [0.0, 5.0],
        },
        variants: VariantSpec {
            sigma: 1.0,
            iota: 0.5,
            trigger_rule: TriggerRuleSpec::Threshold,
            noise_half_width: 0.0,
            noisy_k_mu: None,
            k_y: None,
        },
        simulation: SimulationSpec {
            horizon: 100.0,
            dt: 1e-3,
            log_stride: 100,
            seed: 0,
            checkpoint_step: 10.0,
            grid_k: dosim::oracle::DEFAULT_GRID_K,
        },
        graph: GraphSpec::RandomConnected { n: N, edge_prob: 0.1, seed: 5 },
        agents,
    }
}

/// Reads a scenario file and validates it.
pub fn load_scenario(path: &Path) -> Result<ScenarioSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let spec: ScenarioSpec = toml::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Scenario::build(spec.clone())?;
    Ok(spec)
}

pub fn to_toml(spec: &ScenarioSpec) -> Result<String, CliError> {
    toml::to_string(spec).map_err(|e| CliError::Other(format!("serialising scenario: {e}")))
}

/// A built-in name or a path to a scenario file.
pub fn resolve_scenario(name_or_path: &str) -> Result<ScenarioSpec, CliError> {
    if BUILTIN_NAMES.contains(&name_or_path) {
        builtin_scenario(name_or_path)
    } else {
        let path = Path::new(name_or_path);
        if path.exists() {
            load_scenario(path)
        } else {
            builtin_scenario(name_or_path)
        }
    }
}

fn invalid(field: impl Into<String>, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{}: {msg}", field.into()))
}

fn matrix(field: String, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(invalid(field, "matrix is empty"));
    }
    if rows.iter().any(|row| row.len() != c) {
        return Err(invalid(field, "rows have different lengths"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid(field, "non-finite entry"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn finite(field: &str, values: &[f64]) -> Result<(), CliError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(invalid(format!("{field}[{k}]"), "not finite")),
        None => Ok(()),
    }
}

/// Which controller a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum VariantKind {
    Continuous,
    EventTriggered,
    Noisy,
    Consensus,
}

impl VariantKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Continuous => "continuous",
            Self::EventTriggered => "event-triggered",
            Self::Noisy => "noisy",
            Self::Consensus => "consensus",
        }
    }
}

/// Command-line and plan overrides on top of the scenario defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub epsilon: Option<f64>,
    pub k_mu: Option<f64>,
    pub sigma: Option<f64>,
    pub iota: Option<f64>,
    pub noise_half_width: Option<f64>,
    pub seed: Option<u64>,
    pub log_stride: Option<usize>,
}

/// A validated scenario with its assembled network and initial states.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub network: Network<f64>,
    pub x0: Vec<DVector<f64>>,
}

impl Scenario {
    pub fn build(spec: ScenarioSpec) -> Result<Self, CliError> {
        let p = &spec.parameters;
        finite("parameters", &[p.epsilon, p.k_mu, p.stability_margin, p.x0_range[0], p.x0_range[1]])?;
        if !(p.epsilon > 0.0) {
            return Err(invalid("parameters.epsilon", "must be positive"));
        }
        if !(p.stability_margin >= 0.0) {
            return Err(invalid("parameters.stability_margin", "must be nonnegative"));
        }
        if p.x0_range[0] > p.x0_range[1] {
            return Err(invalid("parameters.x0_range", "lower end exceeds upper end"));
        }
        let v = &spec.variants;
        finite("variants", &[v.sigma, v.iota, v.noise_half_width])?;
        finite("variants", &[v.noisy_k_mu.unwrap_or(0.0), v.k_y.unwrap_or(0.0)])?;
        let s = &spec.simulation;
        finite("simulation", &[s.horizon, s.dt, s.checkpoint_step])?;
        if !(s.dt > 0.0) {
            return Err(invalid("simulation.dt", "must be positive"));
        }
        if s.log_stride == 0 {
            return Err(invalid("simulation.log_stride", "must be at least 1"));
        }
        if s.grid_k < 2 {
            return Err(invalid("simulation.grid_k", "must be at least 2"));
        }

        let graph = match &spec.graph {
            GraphSpec::Ring { n } => Graph::ring(*n),
            GraphSpec::Adjacency { matrix } => Graph::from_adjacency(matrix),
            GraphSpec::RandomConnected { n, edge_prob, seed } => Graph::random_connected(*n, *edge_prob, *seed),
        }
        .map_err(|e| invalid("graph", e))?;
        if !graph.is_connected() {
            return Err(invalid("graph", "graph not connected"));
        }
        if graph.len() != spec.agents.len() {
            return Err(invalid("graph", format!("{} nodes for {} agents", graph.len(), spec.agents.len())));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(p.init_seed);
        let mut agents = Vec::with_capacity(spec.agents.len());
        let mut x0 = Vec::with_capacity(spec.agents.len());
        for (i, a) in spec.agents.iter().enumerate() {
            let field = |name: &str| format!("agents[{i}].{name}");
            let model = LtiModel::new(
                matrix(field("a"), &a.a)?,
                matrix(field("b"), &a.b)?,
                matrix(field("c"), &a.c)?,
            )
            .map_err(|e| invalid(field("a/b/c"), e))?;
            if !check_rank_condition(&model).map_err(|e| invalid(field("a/b/c"), e))? {
                return Err(invalid(field("a/b/c"), "rank condition [CB, 0; -AB, B] = n + p fails"));
            }
            if !model.is_controllable() {
                return Err(invalid(field("a/b"), "(A, B) not controllable"));
            }
            if !model.is_detectable() {
                return Err(invalid(field("a/c"), "(A, C) not detectable"));
            }
            finite(&field("output_set.lower"), &a.output_set.lower)?;
            finite(&field("output_set.upper"), &a.output_set.upper)?;
            let bx = BoxSet::new(
                DVector::from_vec(a.output_set.lower.clone()),
                DVector::from_vec(a.output_set.upper.clone()),
            )
            .map_err(|e| invalid(field("output_set"), e))?;
            for (k, t) in a.cost.terms.iter().enumerate() {
                finite(&field(&format!("cost.terms[{k}]")), &[t.weight, t.amplitude, t.frequency, t.offset])?;
            }
            let cost = QuadraticCost::new(
                a.cost
                    .terms
                    .iter()
                    .map(|t| QuadraticTerm { weight: t.weight, amplitude: t.amplitude, frequency: t.frequency, offset: t.offset })
                    .collect(),
            )
            .map_err(|e| invalid(field("cost"), e))?;
            let coef = |c: &CoefSpec| SinusoidalCoefficient { gain: c.gain, amplitude: c.amplitude, frequency: c.frequency };
            for (j, r) in a.constraint.rows.iter().enumerate() {
                let vals: Vec<f64> = r
                    .coefficients
                    .iter()
                    .chain(std::iter::once(&r.offset))
                    .flat_map(|c| [c.gain, c.amplitude, c.frequency])
                    .collect();
                finite(&field(&format!("constraint.rows[{j}]")), &vals)?;
            }
            let constraint = AffineConstraint::new(
                a.constraint
                    .rows
                    .iter()
                    .map(|r| AffineRow { coefficients: r.coefficients.iter().map(coef).collect(), offset: coef(&r.offset) })
                    .collect(),
            )
            .map_err(|e| invalid(field("constraint"), e))?;
            let problem = LocalProblem::new(Arc::new(cost), Arc::new(constraint), bx)
                .map_err(|e| invalid(field("cost/constraint/output_set"), e))?;
            let gains = GainSet::synthesize(&model, p.stability_margin).map_err(|e| invalid(field("a/b/c"), e))?;
            gains.verify(&model).map_err(|e| invalid(field("gains"), e))?;
            let init = match &a.x0 {
                Some(v) => {
                    finite(&field("x0"), v)?;
                    if v.len() != model.n() {
                        return Err(invalid(field("x0"), format!("expected {} entries, found {}", model.n(), v.len())));
                    }
                    DVector::from_vec(v.clone())
                }
                None => DVector::from_fn(model.n(), |_, _| {
                    let u: f64 = rng.gen();
                    p.x0_range[0] + (p.x0_range[1] - p.x0_range[0]) * u
                }),
            };
            x0.push(init);
            agents.push(Agent::new(model, gains, problem).map_err(|e| invalid(field("gains"), e))?);
        }
        let network = Network::new(agents, graph).map_err(|e| invalid("agents", e))?;
        let scenario = Self { spec, network, x0 };
        // Every configured variant must satisfy its hard gain conditions.
        for kind in [VariantKind::Continuous, VariantKind::EventTriggered, VariantKind::Noisy] {
            let cfg = scenario.sim_config(kind, &Overrides::default())?;
            let report = scenario.network.gain_report(&cfg);
            let failure = report
                .hard_failures()
                .next()
                .map(|c| format!("{} (required {}, got {})", c.rule, c.required, c.actual));
            if let Some(msg) = failure {
                return Err(invalid(format!("parameters.k_mu ({} variant)", kind.as_str()), msg));
            }
        }
        Ok(scenario)
    }

    /// `N·K_∂f`, the smallest admissible output-consensus gain.
    pub fn default_k_y(&self) -> f64 {
        self.network.len() as f64 * self.network.constants().k_df
    }

    pub fn sim_config(&self, kind: VariantKind, o: &Overrides) -> Result<SimConfig<f64>, CliError> {
        let p = &self.spec.parameters;
        let v = &self.spec.variants;
        let s = &self.spec.simulation;
        let variant = match kind {
            VariantKind::Continuous => ControllerVariant::Continuous,
            VariantKind::EventTriggered => ControllerVariant::EventTriggered {
                sigma: o.sigma.unwrap_or(v.sigma),
                iota: o.iota.unwrap_or(v.iota),
                rule: match v.trigger_rule {
                    TriggerRuleSpec::Threshold => TriggerRule::Threshold,
                    TriggerRuleSpec::EveryStep => TriggerRule::EveryStep,
                },
            },
            VariantKind::Noisy => {
                let a = o.noise_half_width.unwrap_or(v.noise_half_width);
                let noise = if a == 0.0 {
                    NoiseModel::Zero
                } else {
                    NoiseModel::uniform(a).map_err(|e| invalid("variants.noise_half_width", e))?
                };
                ControllerVariant::Noisy { noise }
            }
            VariantKind::Consensus => ControllerVariant::ContinuousConsensus {
                k_y: v.k_y.unwrap_or_else(|| self.default_k_y()),
            },
        };
        let k_mu = match (o.k_mu, kind) {
            (Some(k), _) => k,
            (None, VariantKind::Noisy) => v.noisy_k_mu.unwrap_or(p.k_mu),
            (None, _) => p.k_mu,
        };
        let cfg = SimConfig {
            dt: o.dt.unwrap_or(s.dt),
            horizon: o.horizon.unwrap_or(s.horizon),
            epsilon: o.epsilon.unwrap_or(p.epsilon),
            k_mu,
            variant,
            seed: o.seed.unwrap_or(s.seed),
            log_stride: o.log_stride.unwrap_or(s.log_stride),
        };
        cfg.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(cfg)
    }

    /// Gain report for a configured run.
    pub fn gain_report(&self, cfg: &SimConfig<f64>) -> GainReport<f64> {
        self.network.gain_report(cfg)
    }

    pub fn problems(&self) -> Vec<LocalProblem<f64>> {
        self.network.agents().iter().map(|a| a.problem.clone()).collect()
    }
}
