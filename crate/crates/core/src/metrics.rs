//! Regret, fit, individual regret, the closed-form performance bounds and
//! the inter-event-time report.

use nalgebra::DVector;

use crate::controllers::ControllerVariant;
use crate::error::{Error, Result};
use crate::oracle::OfflineSolution;
use crate::plant::Agent;
use crate::problem::LocalProblem;
use crate::scalar::Real;
use crate::sim::{Network, SimConfig, Trajectory};
use crate::synthesis::NetworkCertificate;

/// `∫₀ᵀ Σ_i f_i(t, y*_i) dt` by left-Riemann on the simulation grid
/// `t_k = k·dt`, `k < steps`.
pub fn reference_cost_integral<T: Real>(problems: &[LocalProblem<T>], y_star: &[DVector<T>], dt: T, steps: u64) -> T {
    let mut acc = T::zero();
    for k in 0..steps {
        let t = T::from_usize_lossy(k as usize) * dt;
        let mut s = T::zero();
        for (p, y) in problems.iter().zip(y_star) {
            s += p.cost.value(t, y);
        }
        acc += s * dt;
    }
    acc
}

/// Reference integral evaluated at every sample of `traj` in one pass.
pub fn reference_cost_curve<T: Real>(traj: &Trajectory<T>, problems: &[LocalProblem<T>], y_star: &[DVector<T>]) -> Vec<T> {
    let mut out = Vec::with_capacity(traj.len());
    let mut acc = T::zero();
    let mut k = 0u64;
    for &target in &traj.steps {
        while k < target {
            let t = T::from_usize_lossy(k as usize) * traj.dt;
            let mut s = T::zero();
            for (p, y) in problems.iter().zip(y_star) {
                s += p.cost.value(t, y);
            }
            acc += s * traj.dt;
            k += 1;
        }
        out.push(acc);
    }
    out
}

fn sample_for_horizon<T: Real>(traj: &Trajectory<T>, horizon: T) -> Result<usize> {
    let ratio = (horizon / traj.dt).to_f64_lossy();
    let step = ratio.round();
    if (ratio - step).abs() > 1e-6 {
        return Err(Error::Structure(format!("horizon {horizon} is not on the simulation grid")));
    }
    traj.sample_at_step(step as u64)
        .ok_or_else(|| Error::Structure(format!("no logged sample at t = {horizon}")))
}

fn check_blocks<T: Real>(problems: &[LocalProblem<T>], y_star: &[DVector<T>]) -> Result<()> {
    if problems.len() != y_star.len() {
        return Err(Error::dim("offline optimum blocks", problems.len(), y_star.len()));
    }
    for (i, (p, y)) in problems.iter().zip(y_star).enumerate() {
        if y.len() != p.output_dim() {
            return Err(Error::dim(format!("offline optimum block {i}"), p.output_dim(), y.len()));
        }
    }
    Ok(())
}

/// `R^T = ∫₀ᵀ f(t, y(t)) dt - ∫₀ᵀ f(t, y*) dt` at a logged horizon.
pub fn regret<T: Real>(traj: &Trajectory<T>, horizon: T, y_star: &[DVector<T>], problems: &[LocalProblem<T>]) -> Result<T> {
    check_blocks(problems, y_star)?;
    let idx = sample_for_horizon(traj, horizon)?;
    Ok(traj.cost_integral[idx] - reference_cost_integral(problems, y_star, traj.dt, traj.steps[idx]))
}

/// `(‖[F]₊‖, F)` for the cumulative constraint `F = ∫ Σ_i g_i dt`.
pub fn fit_from_parts<T: Real>(parts: &DVector<T>) -> T {
    parts.iter().fold(T::zero(), |acc, &f| acc + f.max(T::zero()).powi(2)).sqrt()
}

/// Fit at a logged horizon.
pub fn fit<T: Real>(traj: &Trajectory<T>, horizon: T) -> Result<(T, DVector<T>)> {
    let idx = sample_for_horizon(traj, horizon)?;
    let parts = traj.constraint_integral[idx].clone();
    Ok((fit_from_parts(&parts), parts))
}

/// `∫₀ᵀ (Σ_j f_j(t, y_i(t)) - f(t, y*)) dt` for an output-consensus run.
pub fn individual_regret<T: Real>(
    traj: &Trajectory<T>,
    agent: usize,
    horizon: T,
    y_star: &[DVector<T>],
    problems: &[LocalProblem<T>],
) -> Result<T> {
    if !matches!(traj.variant, ControllerVariant::ContinuousConsensus { .. }) {
        return Err(Error::Structure("individual regret needs an output-consensus trajectory".into()));
    }
    check_blocks(problems, y_star)?;
    if agent >= problems.len() {
        return Err(Error::Structure(format!("agent {agent} out of range")));
    }
    let idx = sample_for_horizon(traj, horizon)?;
    let row = traj
        .consensus_integrals
        .get(idx)
        .ok_or_else(|| Error::Structure("trajectory carries no consensus integrals".into()))?;
    Ok(row[agent] - reference_cost_integral(problems, y_star, traj.dt, traj.steps[idx]))
}

/// Which bound family applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundFamily<T: Real> {
    Continuous,
    EventTriggered { sigma: T, iota: T },
    /// Same formulas, read as bounds on expected regret and fit.
    Expected,
}

impl<T: Real> BoundFamily<T> {
    pub fn of(variant: &ControllerVariant<T>) -> Self {
        match *variant {
            ControllerVariant::EventTriggered { sigma, iota, .. } => Self::EventTriggered { sigma, iota },
            ControllerVariant::Noisy { .. } => Self::Expected,
            _ => Self::Continuous,
        }
    }
}

/// Run-level quantities entering the bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs<T: Real> {
    pub n_agents: usize,
    pub epsilon: T,
    pub k_f: T,
    /// Stacked `y(0) = Cx(0)`.
    pub y0: DVector<T>,
    /// `z(0)ᵀ P z(0)` with `z = (x - x̂, x - Ψη)`.
    pub initial_energy: T,
}

impl<T: Real> BoundInputs<T> {
    /// Synthesises the certificate for `network` at the configured step size
    /// and evaluates the initial energy at `x0` (with `x̂(0) = η(0) = 0`).
    pub fn for_run(network: &Network<T>, config: &SimConfig<T>, x0: &[DVector<T>]) -> Result<(Self, NetworkCertificate<T>)> {
        let pairs: Vec<_> = network.agents().iter().map(|a: &Agent<T>| (&a.model, &a.gains)).collect();
        let cert = NetworkCertificate::synthesize(&pairs, config.epsilon, network.constants().strong_convexity)?;
        if x0.len() != network.len() {
            return Err(Error::dim("initial states", network.len(), x0.len()));
        }
        let z: Vec<DVector<T>> = x0
            .iter()
            .map(|x| {
                let n = x.len();
                let mut z = DVector::zeros(2 * n);
                z.rows_mut(0, n).copy_from(x);
                z.rows_mut(n, n).copy_from(x);
                z
            })
            .collect();
        let y0 = DVector::from_iterator(
            network.output_dim(),
            network.agents().iter().zip(x0).flat_map(|(a, x)| (&a.model.c * x).iter().copied().collect::<Vec<_>>()),
        );
        Ok((
            Self {
                n_agents: network.len(),
                epsilon: config.epsilon,
                k_f: network.constants().k_f,
                y0,
                initial_energy: cert.energy(&z),
            },
            cert,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoreticalBounds<T: Real> {
    pub regret: T,
    pub fit: T,
    /// The bounds hold for expectations only.
    pub expected: bool,
}

/// Closed-form regret and fit bounds at horizon `T`:
/// `R ≤ (‖y0 - y*‖² + V0) / (2ε)`,
/// `F ≤ (√N ‖y0 - y*‖ + √(2N V0)) / ε + 2N √(K_f/ε) √T`,
/// with `σ/ι` and `√(2Nσ/(ει))` added for event-triggered broadcast.
pub fn theoretical_bounds<T: Real>(
    inputs: &BoundInputs<T>,
    y_star: &DVector<T>,
    family: BoundFamily<T>,
    horizon: T,
) -> Result<TheoreticalBounds<T>> {
    if y_star.len() != inputs.y0.len() {
        return Err(Error::dim("stacked optimum", inputs.y0.len(), y_star.len()));
    }
    let n = T::from_usize_lossy(inputs.n_agents);
    let eps = inputs.epsilon;
    let gap = (&inputs.y0 - y_star).norm();
    let v0 = inputs.initial_energy;
    let two = T::lit(2.0);
    let mut regret = (gap * gap + v0) / (two * eps);
    let mut fit = (n.sqrt() * gap + (two * n * v0).sqrt()) / eps + two * n * (inputs.k_f / eps).sqrt() * horizon.sqrt();
    if let BoundFamily::EventTriggered { sigma, iota } = family {
        regret += sigma / iota;
        fit += (two * n * sigma / (eps * iota)).sqrt();
    }
    Ok(TheoreticalBounds {
        regret,
        fit,
        expected: matches!(family, BoundFamily::Expected),
    })
}

/// Inter-event statistics of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentEvents<T: Real> {
    pub events: usize,
    pub min_gap: Option<T>,
    /// Smallest ratio of an observed gap to its analytic lower bound
    /// `σ e^{-ι t_next} / (3N²K_μ√q δ)`, `δ` the largest observed `‖μ̇_i‖`.
    pub min_gap_over_bound: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZenoReport<T: Real> {
    pub agents: Vec<AgentEvents<T>>,
    pub total_events: u64,
    pub steps: u64,
}

impl<T: Real> ZenoReport<T> {
    /// Every observed gap is positive and respects the analytic bound.
    pub fn satisfied(&self) -> bool {
        self.agents.iter().all(|a| {
            a.min_gap.is_none_or(|g| g > T::zero()) && a.min_gap_over_bound.is_none_or(|r| r >= T::one())
        })
    }
}

pub fn zeno_report<T: Real>(traj: &Trajectory<T>, n_agents: usize, q: usize, k_mu: T) -> Result<ZenoReport<T>> {
    let ControllerVariant::EventTriggered { sigma, iota, .. } = traj.variant else {
        return Err(Error::Structure("inter-event report needs an event-triggered trajectory".into()));
    };
    let n = T::from_usize_lossy(n_agents);
    let sqrt_q = T::from_usize_lossy(q).sqrt();
    let agents = traj
        .event_steps
        .iter()
        .enumerate()
        .map(|(i, ev)| {
            let delta = traj.max_mu_rate[i];
            let mut min_ratio: Option<T> = None;
            let mut prev = 0u64;
            for &k in ev {
                let gap = T::from_usize_lossy((k - prev) as usize) * traj.dt;
                let t_next = T::from_usize_lossy(k as usize) * traj.dt;
                let bound = sigma * (-iota * t_next).exp() / (T::lit(3.0) * n * n * k_mu * sqrt_q * delta);
                if bound > T::zero() && bound.is_finite_value() {
                    let r = gap / bound;
                    min_ratio = Some(min_ratio.map_or(r, |m: T| m.min(r)));
                }
                prev = k;
            }
            AgentEvents {
                events: ev.len(),
                min_gap: traj.min_inter_event_time(i),
                min_gap_over_bound: min_ratio,
            }
        })
        .collect();
    Ok(ZenoReport {
        agents,
        total_events: traj.total_events(),
        steps: traj.total_steps(),
    })
}

/// Metrics of one run at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport<T: Real> {
    pub horizon: T,
    pub regret: T,
    pub fit: T,
    pub fit_parts: DVector<T>,
    pub individual_regrets: Option<Vec<T>>,
    pub bounds: TheoreticalBounds<T>,
    /// Gain hypotheses hold, so the bounds are certified.
    pub certified: bool,
    pub regret_within_bound: bool,
    pub fit_within_bound: bool,
    pub events_total: u64,
}

/// Evaluates regret, fit and bounds at `horizon` against `oracle`.
pub fn evaluate<T: Real>(
    traj: &Trajectory<T>,
    network: &Network<T>,
    inputs: &BoundInputs<T>,
    oracle: &OfflineSolution<T>,
    horizon: T,
    certified: bool,
) -> Result<MetricsReport<T>> {
    let problems: Vec<_> = network.agents().iter().map(|a| a.problem.clone()).collect();
    let regret_value = regret(traj, horizon, &oracle.blocks, &problems)?;
    let (fit_value, parts) = fit(traj, horizon)?;
    let individual_regrets = match traj.variant {
        ControllerVariant::ContinuousConsensus { .. } if network.uniform_outputs() => Some(
            (0..network.len())
                .map(|i| individual_regret(traj, i, horizon, &oracle.blocks, &problems))
                .collect::<Result<Vec<_>>>()?,
        ),
        _ => None,
    };
    let bounds = theoretical_bounds(inputs, &oracle.y_star, BoundFamily::of(&traj.variant), horizon)?;
    let idx = sample_for_horizon(traj, horizon)?;
    Ok(MetricsReport {
        horizon,
        regret: regret_value,
        fit: fit_value,
        fit_parts: parts,
        individual_regrets,
        bounds,
        certified,
        regret_within_bound: regret_value <= bounds.regret,
        fit_within_bound: fit_value <= bounds.fit,
        events_total: traj.events_total[idx],
    })
}

/// Monte Carlo estimates `(mean R, ‖mean [F]₊‖)`; the positive part is
/// taken per run before averaging.
pub fn monte_carlo_means<T: Real>(reports: &[MetricsReport<T>]) -> Result<(T, T)> {
    let first = reports.first().ok_or_else(|| Error::Structure("no reports to average".into()))?;
    let k = T::from_usize_lossy(reports.len());
    let mut regret = T::zero();
    let mut pos = DVector::zeros(first.fit_parts.len());
    for r in reports {
        regret += r.regret / k;
        pos += r.fit_parts.map(|f| f.max(T::zero())) / k;
    }
    Ok((regret, pos.norm()))
}

/// `{step, 2·step, …} ∩ (0, horizon]`, plus the horizon itself.
pub fn checkpoints<T: Real>(horizon: T, step: T) -> Vec<T> {
    let mut out = Vec::new();
    if step > T::zero() {
        let mut k = 1usize;
        loop {
            let t = T::from_usize_lossy(k) * step;
            if t > horizon * (T::one() + T::lit(1e-12)) {
                break;
            }
            out.push(t);
            k += 1;
        }
    }
    if out.last().is_none_or(|&t| (t - horizon).abs() > horizon * T::lit(1e-12)) && horizon > T::zero() {
        out.push(horizon);
    }
    out
}
