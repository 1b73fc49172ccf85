//! Fixed-step synchronous Euler integration of the closed-loop network.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::controllers::{
    assemble, noisy_penalty, validate_gain_conditions, ControlOutput, ControllerVariant, GainReport,
    NoiseModel, TriggerParams, TriggerRule,
};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::plant::{Agent, AgentState, NetworkState};
use crate::problem::{consensus_penalty, ConsensusTerm, GlobalParameters, ProblemConstants};
use crate::scalar::Real;

pub const DEFAULT_DT: f64 = 1e-3;

/// Agents plus communication graph.
#[derive(Debug, Clone)]
pub struct Network<T: Real> {
    agents: Vec<Agent<T>>,
    graph: Graph,
    q: usize,
    constants: ProblemConstants<T>,
    uniform_outputs: bool,
}

impl<T: Real> Network<T> {
    pub fn new(agents: Vec<Agent<T>>, graph: Graph) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::Structure("network has no agents".into()));
        }
        if agents.len() != graph.len() {
            return Err(Error::dim("graph nodes vs agents", agents.len(), graph.len()));
        }
        if !graph.is_connected() {
            return Err(Error::Structure("graph not connected".into()));
        }
        let q = agents[0].problem.constraint_dim();
        for (i, a) in agents.iter().enumerate() {
            if a.problem.constraint_dim() != q {
                return Err(Error::dim(format!("constraint dimension of agent {i}"), q, a.problem.constraint_dim()));
            }
        }
        let p0 = agents[0].model.p();
        let uniform_outputs = agents.iter().all(|a| a.model.p() == p0);
        let problems: Vec<_> = agents.iter().map(|a| a.problem.clone()).collect();
        let constants = ProblemConstants::of(&problems);
        Ok(Self {
            agents,
            graph,
            q,
            constants,
            uniform_outputs,
        })
    }

    pub fn agents(&self) -> &[Agent<T>] {
        &self.agents
    }
    pub fn graph(&self) -> &Graph {
        &self.graph
    }
    pub fn len(&self) -> usize {
        self.agents.len()
    }
    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }
    /// Shared constraint dimension `q`.
    pub fn constraint_dim(&self) -> usize {
        self.q
    }
    pub fn constants(&self) -> &ProblemConstants<T> {
        &self.constants
    }
    /// Stacked output dimension `Σ p_i`.
    pub fn output_dim(&self) -> usize {
        self.agents.iter().map(|a| a.model.p()).sum()
    }
    /// All agents have outputs of the same dimension.
    pub fn uniform_outputs(&self) -> bool {
        self.uniform_outputs
    }

    pub fn gain_report(&self, config: &SimConfig<T>) -> GainReport<T> {
        validate_gain_conditions(&config.global_parameters(), &config.variant, &self.constants, self.len(), self.q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T: Real> {
    pub dt: T,
    pub horizon: T,
    pub epsilon: T,
    pub k_mu: T,
    pub variant: ControllerVariant<T>,
    pub seed: u64,
    pub log_stride: usize,
}

impl<T: Real> SimConfig<T> {
    pub fn new(horizon: T, epsilon: T, k_mu: T, variant: ControllerVariant<T>) -> Self {
        Self {
            dt: T::lit(DEFAULT_DT),
            horizon,
            epsilon,
            k_mu,
            variant,
            seed: 0,
            log_stride: 1,
        }
    }

    pub fn global_parameters(&self) -> GlobalParameters<T> {
        GlobalParameters {
            epsilon: self.epsilon,
            k_mu: self.k_mu,
            k_y: match self.variant {
                ControllerVariant::ContinuousConsensus { k_y } => Some(k_y),
                _ => None,
            },
        }
    }

    /// `⌈T / dt⌉`, ignoring rounding noise in the ratio.
    pub fn step_count(&self) -> u64 {
        let ratio = (self.horizon / self.dt).to_f64_lossy();
        let rounded = ratio.round();
        if (ratio - rounded).abs() < 1e-9 * rounded.max(1.0) {
            rounded as u64
        } else {
            ratio.ceil() as u64
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite_value() {
            return Err(Error::Config { rule: "dt > 0", detail: format!("dt = {}", self.dt) });
        }
        if !(self.horizon >= T::zero()) || !self.horizon.is_finite_value() {
            return Err(Error::Config { rule: "T >= 0", detail: format!("T = {}", self.horizon) });
        }
        if self.log_stride == 0 {
            return Err(Error::Config { rule: "log_stride >= 1", detail: "log_stride = 0".into() });
        }
        if !self.epsilon.is_finite_value() || !self.k_mu.is_finite_value() {
            return Err(Error::Config { rule: "finite gains", detail: format!("epsilon = {}, K_mu = {}", self.epsilon, self.k_mu) });
        }
        self.variant.validate()
    }
}

/// Time-indexed log of one run. Samples are taken at step 0, every
/// `log_stride` steps and at the final step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub variant: ControllerVariant<T>,
    pub dt: T,
    pub seed: u64,
    pub steps: Vec<u64>,
    pub times: Vec<T>,
    /// `y[sample][agent]`.
    pub y: Vec<Vec<DVector<T>>>,
    pub mu: Vec<Vec<DVector<T>>>,
    pub eta: Vec<Vec<DVector<T>>>,
    /// `∫₀ᵗ Σ_i f_i dt` at each sample.
    pub cost_integral: Vec<T>,
    /// `∫₀ᵗ Σ_i g_i dt` at each sample.
    pub constraint_integral: Vec<DVector<T>>,
    /// Per-agent `∫₀ᵗ Σ_j f_j(s, y_i) ds`; empty when output dimensions differ.
    pub consensus_integrals: Vec<Vec<T>>,
    /// Broadcasts so far, all agents together.
    pub events_total: Vec<u64>,
    /// Broadcast steps per agent.
    pub event_steps: Vec<Vec<u64>>,
    /// Largest `‖μ̇_i‖` seen per agent.
    pub max_mu_rate: Vec<T>,
    pub final_state: NetworkState<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
    pub fn total_steps(&self) -> u64 {
        self.final_state.step
    }

    /// Index of the sample taken at `step`.
    pub fn sample_at_step(&self, step: u64) -> Option<usize> {
        self.steps.binary_search(&step).ok()
    }

    pub fn event_times(&self, agent: usize) -> Vec<T> {
        self.event_steps[agent].iter().map(|&k| T::from_usize_lossy(k as usize) * self.dt).collect()
    }

    pub fn total_events(&self) -> u64 {
        self.events_total.last().copied().unwrap_or(0)
    }

    /// Shortest gap between consecutive broadcasts of one agent, including
    /// the gap from `t = 0` to the first broadcast.
    pub fn min_inter_event_time(&self, agent: usize) -> Option<T> {
        let ev = &self.event_steps[agent];
        let first = ev.first().copied()?;
        let gap = ev.windows(2).map(|w| w[1] - w[0]).chain(std::iter::once(first)).min()?;
        Some(T::from_usize_lossy(gap as usize) * self.dt)
    }
}

/// Step-by-step driver owning the state of one run.
pub struct Simulator<'a, T: Real> {
    network: &'a Network<T>,
    config: &'a SimConfig<T>,
    params: GlobalParameters<T>,
    state: NetworkState<T>,
    noise_rng: ChaCha8Rng,
    total_steps: u64,
    events_total: u64,
    event_steps: Vec<Vec<u64>>,
    max_mu_rate: Vec<T>,
}

impl<'a, T: Real> Simulator<'a, T> {
    /// Validates the configuration (hard gain conditions included) and
    /// builds the initial state from `x0`.
    pub fn new(network: &'a Network<T>, config: &'a SimConfig<T>, x0: &[DVector<T>]) -> Result<Self> {
        config.validate()?;
        network.gain_report(config).into_result()?;
        if x0.len() != network.len() {
            return Err(Error::dim("initial states", network.len(), x0.len()));
        }
        if matches!(config.variant, ControllerVariant::ContinuousConsensus { .. }) && !network.uniform_outputs() {
            return Err(Error::Structure("output consensus needs equal output dimensions".into()));
        }
        let q = network.constraint_dim();
        let agents = network
            .agents()
            .iter()
            .zip(x0)
            .enumerate()
            .map(|(i, (a, x))| {
                if x.len() != a.model.n() {
                    return Err(Error::dim(format!("initial state of agent {i}"), a.model.n(), x.len()));
                }
                Ok(AgentState::initial(x.clone(), a.model.p(), q))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = network.len();
        Ok(Self {
            network,
            config,
            params: config.global_parameters(),
            state: NetworkState::new(agents, q),
            noise_rng: ChaCha8Rng::seed_from_u64(config.seed),
            total_steps: config.step_count(),
            events_total: 0,
            event_steps: vec![Vec::new(); n],
            max_mu_rate: vec![T::zero(); n],
        })
    }

    pub fn state(&self) -> &NetworkState<T> {
        &self.state
    }

    pub fn is_finished(&self) -> bool {
        self.state.step >= self.total_steps
    }

    pub fn events_total(&self) -> u64 {
        self.events_total
    }

    fn time_of(&self, step: u64) -> T {
        T::from_usize_lossy(step as usize) * self.config.dt
    }

    /// Noise on the link from `j` to `i` at the current step. Each ordered
    /// pair has its own stream and each step its own position in it, so the
    /// draw does not depend on evaluation order.
    fn link_noise(&mut self, noise: &NoiseModel<T>, i: usize, j: usize) -> DVector<T> {
        let q = self.network.constraint_dim();
        self.noise_rng.set_stream((i * self.network.len() + j) as u64);
        self.noise_rng.set_word_pos(self.state.step as u128 * 2 * q as u128);
        noise.sample(&mut self.noise_rng, q)
    }

    /// Runs the broadcast rule on the snapshot; returns the agents that fire.
    fn triggered(&self, snapshot: &[AgentState<T>], sigma: T, iota: T, rule: TriggerRule, t: T) -> Vec<usize> {
        let graph = self.network.graph();
        let tp = TriggerParams {
            n_agents: self.network.len(),
            k_mu: self.config.k_mu,
            sigma,
            iota,
        };
        (0..snapshot.len())
            .filter(|&i| match rule {
                TriggerRule::EveryStep => true,
                TriggerRule::Threshold => {
                    let s = &snapshot[i];
                    let e = &s.mu_hat - &s.mu;
                    let others: Vec<_> = graph.neighbors(i).iter().map(|&j| &snapshot[j].mu_hat).collect();
                    crate::controllers::trigger_check(&e, &s.mu_hat, &others, &tp, t)
                }
            })
            .collect()
    }

    /// One synchronous Euler step.
    pub fn step(&mut self) -> Result<()> {
        if self.is_finished() {
            return Err(Error::Precondition("simulation horizon already reached".into()));
        }
        let net = self.network;
        let graph = net.graph();
        let dt = self.config.dt;
        let t = self.time_of(self.state.step);
        let n = net.len();

        // Broadcast before drift evaluation.
        if let ControllerVariant::EventTriggered { sigma, iota, rule } = self.config.variant {
            let fired = self.triggered(&self.state.agents, sigma, iota, rule, t);
            for i in fired {
                let a = &mut self.state.agents[i];
                a.mu_hat = a.mu.clone();
                a.last_event_time = Some(t);
                self.event_steps[i].push(self.state.step);
                self.events_total += 1;
            }
        }
        let noise_draws: Option<Vec<Vec<DVector<T>>>> = match self.config.variant {
            ControllerVariant::Noisy { noise } => Some(
                (0..n)
                    .map(|i| graph.neighbors(i).iter().map(|&j| self.link_noise(&noise, i, j)).collect())
                    .collect(),
            ),
            _ => None,
        };

        let snapshot = &self.state.agents;
        let outputs: Vec<DVector<T>> = net
            .agents()
            .iter()
            .zip(snapshot)
            .map(|(a, s)| &a.model.c * &s.x)
            .collect();

        let mut drifts: Vec<ControlOutput<T>> = Vec::with_capacity(n);
        for (i, (agent, s)) in net.agents().iter().zip(snapshot).enumerate() {
            let y = &outputs[i];
            let g = agent.problem.constraint.value(t, y);
            let nb = graph.neighbors(i);
            let out = match self.config.variant {
                ControllerVariant::Continuous => {
                    let others: Vec<_> = nb.iter().map(|&j| &snapshot[j].mu).collect();
                    let dual = g - consensus_penalty(&s.mu, &others) * self.params.k_mu;
                    assemble(agent, s, y, &self.params, t, None, dual)
                }
                ControllerVariant::EventTriggered { .. } => {
                    let others: Vec<_> = nb.iter().map(|&j| &snapshot[j].mu_hat).collect();
                    let dual = g - consensus_penalty(&s.mu_hat, &others) * (T::lit(2.0) * self.params.k_mu);
                    assemble(agent, s, y, &self.params, t, None, dual)
                }
                ControllerVariant::Noisy { .. } => {
                    let others: Vec<_> = nb.iter().map(|&j| &snapshot[j].mu).collect();
                    let draws = &noise_draws.as_ref().expect("noise drawn for noisy variant")[i];
                    let dual = g - noisy_penalty(&s.mu, &others, draws) * self.params.k_mu;
                    assemble(agent, s, y, &self.params, t, None, dual)
                }
                ControllerVariant::ContinuousConsensus { k_y } => {
                    let others: Vec<_> = nb.iter().map(|&j| &snapshot[j].mu).collect();
                    let ys: Vec<_> = nb.iter().map(|&j| &outputs[j]).collect();
                    let dual = g - consensus_penalty(&s.mu, &others) * self.params.k_mu;
                    let term = ConsensusTerm { k_y, neighbor_outputs: &ys };
                    assemble(agent, s, y, &self.params, t, Some(term), dual)
                }
            };
            drifts.push(out);
        }

        // Left-Riemann accumulation at the snapshot.
        let mut cost = T::zero();
        let mut cons = DVector::zeros(net.constraint_dim());
        for (agent, y) in net.agents().iter().zip(&outputs) {
            cost += agent.problem.cost.value(t, y);
            cons += agent.problem.constraint.value(t, y);
        }
        if net.uniform_outputs() {
            for (i, y) in outputs.iter().enumerate() {
                let s = net.agents().iter().fold(T::zero(), |acc, a| acc + a.problem.cost.value(t, y));
                self.state.consensus_integrals[i] += s * dt;
            }
        }
        self.state.cost_integral += cost * dt;
        self.state.constraint_integral += cons * dt;

        let t_next = self.time_of(self.state.step + 1);
        for (i, ((agent, s), d)) in net.agents().iter().zip(self.state.agents.iter_mut()).zip(&drifts).enumerate() {
            let m = &agent.model;
            let dx = &m.a * &s.x + &m.b * &d.u;
            let innovation = &outputs[i] - &m.c * &s.x_hat;
            let dxh = &m.a * &s.x_hat + &m.b * &d.u + &agent.gains.h * innovation;
            s.x += dx * dt;
            s.x_hat += dxh * dt;
            s.eta += &d.eta_dot * dt;
            s.eta = agent.problem.output_set.project_unchecked(&s.eta);
            s.mu += &d.mu_dot * dt;
            s.mu.apply(|v| *v = v.max(T::zero()));
            let rate = d.mu_dot.norm();
            if rate > self.max_mu_rate[i] {
                self.max_mu_rate[i] = rate;
            }
            for (field, v) in [("x", &s.x), ("x_hat", &s.x_hat), ("eta", &s.eta), ("mu", &s.mu)] {
                if v.iter().any(|c| !c.is_finite_value()) {
                    return Err(Error::Divergence {
                        time: t_next.to_f64_lossy(),
                        agent: i,
                        field,
                    });
                }
            }
        }
        if !self.state.cost_integral.is_finite_value() {
            return Err(Error::Divergence { time: t_next.to_f64_lossy(), agent: 0, field: "cost_integral" });
        }
        self.state.step += 1;
        self.state.t = t_next;
        Ok(())
    }

    fn record(&self, log: &mut Trajectory<T>) {
        let net = self.network;
        log.steps.push(self.state.step);
        log.times.push(self.state.t);
        log.y.push(net.agents().iter().zip(&self.state.agents).map(|(a, s)| &a.model.c * &s.x).collect());
        log.mu.push(self.state.agents.iter().map(|s| s.mu.clone()).collect());
        log.eta.push(self.state.agents.iter().map(|s| s.eta.clone()).collect());
        log.cost_integral.push(self.state.cost_integral);
        log.constraint_integral.push(self.state.constraint_integral.clone());
        if net.uniform_outputs() {
            log.consensus_integrals.push(self.state.consensus_integrals.clone());
        }
        log.events_total.push(self.events_total);
    }

    /// Integrates to the horizon and returns the log.
    pub fn run(mut self) -> Result<Trajectory<T>> {
        let stride = self.config.log_stride as u64;
        let mut log = Trajectory {
            variant: self.config.variant,
            dt: self.config.dt,
            seed: self.config.seed,
            steps: Vec::new(),
            times: Vec::new(),
            y: Vec::new(),
            mu: Vec::new(),
            eta: Vec::new(),
            cost_integral: Vec::new(),
            constraint_integral: Vec::new(),
            consensus_integrals: Vec::new(),
            events_total: Vec::new(),
            event_steps: Vec::new(),
            max_mu_rate: Vec::new(),
            final_state: self.state.clone(),
        };
        self.record(&mut log);
        while !self.is_finished() {
            self.step()?;
            if self.state.step % stride == 0 || self.is_finished() {
                self.record(&mut log);
            }
        }
        log.event_steps = self.event_steps;
        log.max_mu_rate = self.max_mu_rate;
        log.final_state = self.state;
        Ok(log)
    }
}

/// Runs the network from `x0` to the configured horizon.
pub fn run<T: Real>(network: &Network<T>, config: &SimConfig<T>, x0: &[DVector<T>]) -> Result<Trajectory<T>> {
    Simulator::new(network, config, x0)?.run()
}

/// Independent runs with seeds `seed, seed + 1, …`, executed in parallel.
/// A failing run does not abort the others.
pub fn monte_carlo<T: Real>(
    network: &Network<T>,
    config: &SimConfig<T>,
    x0: &[DVector<T>],
    n_runs: usize,
) -> Result<Vec<Result<Trajectory<T>>>> {
    if n_runs == 0 {
        return Err(Error::Config { rule: "n_runs >= 1", detail: "n_runs = 0".into() });
    }
    Ok((0..n_runs)
        .into_par_iter()
        .map(|k| {
            let mut cfg = config.clone();
            cfg.seed = config.seed.wrapping_add(k as u64);
            run(network, &cfg, x0)
        })
        .collect())
}
