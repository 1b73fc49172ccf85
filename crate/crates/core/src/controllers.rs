//! The controller family: continuous exchange, event-triggered broadcast,
//! noisy links, and the identical-output extension.
//!
//! All laws share the reference flow `η̇ = Π_Y[y, -ε ∂_y L]` and the input
//! `u = -Kx̂ + Γη̇ - (Υ - KΨ)η`; they differ only in the multiplier drift.

use nalgebra::DVector;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::geometry::{sign_select, BoxSet};
use crate::linalg::l1_norm;
use crate::plant::{Agent, AgentState};
use crate::problem::{consensus_penalty, primal_direction, ConsensusTerm, GlobalParameters, ProblemConstants};
use crate::scalar::Real;

/// When event-triggered agents broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TriggerRule {
    /// The state-dependent threshold with exponential slack.
    #[default]
    Threshold,
    /// Broadcast at every integration step (continuous exchange with the
    /// event-triggered gain); used to check degeneracy.
    EveryStep,
}

/// Additive link noise `ε_ij`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel<T: Real> {
    Zero,
    /// Independent components, uniform on `[-half_width, half_width]`.
    Uniform { half_width: T },
}

impl<T: Real> NoiseModel<T> {
    pub fn uniform(half_width: T) -> Result<Self> {
        if !(half_width >= T::zero()) || !half_width.is_finite_value() {
            return Err(Error::Config {
                rule: "noise half-width must be finite and nonnegative",
                detail: format!("got {half_width}"),
            });
        }
        Ok(Self::Uniform { half_width })
    }

    /// `E‖ε‖₁` for a `q`-dimensional draw.
    pub fn expected_l1(&self, q: usize) -> T {
        match *self {
            Self::Zero => T::zero(),
            Self::Uniform { half_width } => T::from_usize_lossy(q) * half_width / T::lit(2.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Self::Zero => true,
            Self::Uniform { half_width } => half_width == T::zero(),
        }
    }

    /// Draws one `q`-vector, consuming exactly two 32-bit words of `rng` per
    /// component.
    pub fn sample<R: RngCore>(&self, rng: &mut R, q: usize) -> DVector<T> {
        match *self {
            Self::Zero => DVector::zeros(q),
            Self::Uniform { half_width } => DVector::from_fn(q, |_, _| {
                let unit = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                half_width * T::lit(2.0 * unit - 1.0)
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControllerVariant<T: Real> {
    Continuous,
    EventTriggered { sigma: T, iota: T, rule: TriggerRule },
    Noisy { noise: NoiseModel<T> },
    /// Continuous exchange plus output consensus with gain `k_y`.
    ContinuousConsensus { k_y: T },
}

impl<T: Real> ControllerVariant<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Continuous => "continuous",
            Self::EventTriggered { .. } => "event-triggered",
            Self::Noisy { .. } => "noisy",
            Self::ContinuousConsensus { .. } => "consensus",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::EventTriggered { sigma, iota, .. } => {
                if !(sigma > T::zero() && iota > T::zero()) {
                    return Err(Error::Config {
                        rule: "sigma > 0 and iota > 0",
                        detail: format!("sigma = {sigma}, iota = {iota}"),
                    });
                }
            }
            Self::Noisy { noise } => {
                if let NoiseModel::Uniform { half_width } = noise {
                    NoiseModel::uniform(half_width)?;
                }
            }
            Self::ContinuousConsensus { k_y } => {
                if !(k_y >= T::zero()) {
                    return Err(Error::Config {
                        rule: "K_y >= 0",
                        detail: format!("K_y = {k_y}"),
                    });
                }
            }
            Self::Continuous => {}
        }
        Ok(())
    }
}

/// Input and reference/multiplier drifts for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput<T: Real> {
    pub u: DVector<T>,
    pub eta_dot: DVector<T>,
    pub mu_dot: DVector<T>,
}

fn check_state<T: Real>(agent: &Agent<T>, state: &AgentState<T>) -> Result<()> {
    let q = agent.problem.constraint_dim();
    if state.x.len() != agent.model.n() || state.x_hat.len() != agent.model.n() {
        return Err(Error::dim("agent state", agent.model.n(), state.x.len()));
    }
    if state.eta.len() != agent.model.p() {
        return Err(Error::dim("reference state", agent.model.p(), state.eta.len()));
    }
    if state.mu.len() != q || state.mu_hat.len() != q {
        return Err(Error::dim("multiplier", q, state.mu.len()));
    }
    if state.mu.iter().any(|&v| v < T::zero()) {
        return Err(Error::Precondition("multipliers must be nonnegative".into()));
    }
    Ok(())
}

fn check_neighbors<T: Real>(q: usize, others: &[&DVector<T>]) -> Result<()> {
    match others.iter().find(|m| m.len() != q) {
        Some(bad) => Err(Error::dim("neighbor multiplier", q, bad.len())),
        None => Ok(()),
    }
}

/// Shared part of every law, given the multiplier direction
/// `g_i - gain · Σ_j s_ij` already reduced to `dual`.
pub(crate) fn assemble<T: Real>(
    agent: &Agent<T>,
    state: &AgentState<T>,
    y: &DVector<T>,
    params: &GlobalParameters<T>,
    t: T,
    consensus: Option<ConsensusTerm<'_, T>>,
    dual: DVector<T>,
) -> ControlOutput<T> {
    let eps = params.epsilon;
    let grad = primal_direction(t, y, &state.mu, &agent.problem, consensus);
    let set = &agent.problem.output_set;
    // Projected at the (clamped) output, then kept tangent at η so the
    // reference cannot leave Y while y lags behind it.
    let eta_dot = set.tangent_projection_unchecked(
        &state.eta,
        &set.tangent_projection_unchecked(&set.project_unchecked(y), &(grad * (-eps))),
    );
    let orthant = BoxSet::orthant(state.mu.len());
    let mu_dot = orthant.tangent_projection_unchecked(&state.mu, &(dual * eps));
    let g = &agent.gains;
    let u = &g.gamma * &eta_dot - &g.k * &state.x_hat - (&g.upsilon - &g.k * &g.psi) * &state.eta;
    ControlOutput { u, eta_dot, mu_dot }
}

/// Continuous exchange: `μ̇ = Π₊[μ, ε(g - K_μ Σ_j a_ij sgn(μ_i - μ_j))]`.
pub fn continuous_control<T: Real>(
    agent: &Agent<T>,
    state: &AgentState<T>,
    neighbor_mus: &[&DVector<T>],
    params: &GlobalParameters<T>,
    t: T,
) -> Result<ControlOutput<T>> {
    check_state(agent, state)?;
    check_neighbors(state.mu.len(), neighbor_mus)?;
    let y = &agent.model.c * &state.x;
    let dual = agent.problem.constraint.value(t, &y) - consensus_penalty(&state.mu, neighbor_mus) * params.k_mu;
    Ok(assemble(agent, state, &y, params, t, None, dual))
}

/// Event-triggered broadcast: the sign term uses the last broadcast values
/// `μ̂` and the gain `2K_μ`.
pub fn event_triggered_control<T: Real>(
    agent: &Agent<T>,
    state: &AgentState<T>,
    neighbor_mu_hats: &[&DVector<T>],
    params: &GlobalParameters<T>,
    t: T,
) -> Result<ControlOutput<T>> {
    check_state(agent, state)?;
    check_neighbors(state.mu.len(), neighbor_mu_hats)?;
    let y = &agent.model.c * &state.x;
    let dual = agent.problem.constraint.value(t, &y)
        - consensus_penalty(&state.mu_hat, neighbor_mu_hats) * (T::lit(2.0) * params.k_mu);
    Ok(assemble(agent, state, &y, params, t, None, dual))
}

pub(crate) fn noisy_penalty<T: Real>(mu: &DVector<T>, neighbor_mus: &[&DVector<T>], noise: &[DVector<T>]) -> DVector<T> {
    let mut s = DVector::zeros(mu.len());
    for (mj, eps) in neighbor_mus.iter().zip(noise) {
        let d = mu - *mj;
        let scale = d.norm();
        s += sign_select(&(eps * scale + d));
    }
    s
}

/// Noisy links: the sign argument is `μ_i - μ_j + ε_ij ‖μ_i - μ_j‖`.
/// `noise[k]` belongs to the link from `neighbor_mus[k]`.
pub fn noisy_control<T: Real>(
    agent: &Agent<T>,
    state: &AgentState<T>,
    neighbor_mus: &[&DVector<T>],
    noise: &[DVector<T>],
    params: &GlobalParameters<T>,
    t: T,
) -> Result<ControlOutput<T>> {
    check_state(agent, state)?;
    check_neighbors(state.mu.len(), neighbor_mus)?;
    if noise.len() != neighbor_mus.len() {
        return Err(Error::dim("noise draws", neighbor_mus.len(), noise.len()));
    }
    if let Some(bad) = noise.iter().find(|e| e.len() != state.mu.len()) {
        return Err(Error::dim("noise draw", state.mu.len(), bad.len()));
    }
    let y = &agent.model.c * &state.x;
    let dual = agent.problem.constraint.value(t, &y) - noisy_penalty(&state.mu, neighbor_mus, noise) * params.k_mu;
    Ok(assemble(agent, state, &y, params, t, None, dual))
}

/// Identical-output extension: continuous exchange with the output
/// consensus term `K_y Σ_j a_ij sgn(y_i - y_j)` in the primal direction.
pub fn consensus_control<T: Real>(
    agent: &Agent<T>,
    state: &AgentState<T>,
    neighbor_mus: &[&DVector<T>],
    neighbor_outputs: &[&DVector<T>],
    k_y: T,
    params: &GlobalParameters<T>,
    t: T,
) -> Result<ControlOutput<T>> {
    check_state(agent, state)?;
    check_neighbors(state.mu.len(), neighbor_mus)?;
    check_neighbors(agent.model.p(), neighbor_outputs)?;
    let y = &agent.model.c * &state.x;
    let dual = agent.problem.constraint.value(t, &y) - consensus_penalty(&state.mu, neighbor_mus) * params.k_mu;
    let term = ConsensusTerm { k_y, neighbor_outputs };
    Ok(assemble(agent, state, &y, params, t, Some(term), dual))
}

/// Constants of the broadcast rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerParams<T: Real> {
    pub n_agents: usize,
    pub k_mu: T,
    pub sigma: T,
    pub iota: T,
}

/// Right-hand side `(1/(6N√q)) Σ_j a_ij ‖μ̂_i - μ̂_j‖₁ + σ e^{-ιt} / (3N²K_μ√q)`.
pub fn trigger_threshold<T: Real>(
    mu_hat_i: &DVector<T>,
    neighbor_mu_hats: &[&DVector<T>],
    params: &TriggerParams<T>,
    t: T,
) -> T {
    let n = T::from_usize_lossy(params.n_agents);
    let sqrt_q = T::from_usize_lossy(mu_hat_i.len()).sqrt();
    let disagreement = neighbor_mu_hats
        .iter()
        .fold(T::zero(), |acc, mj| acc + l1_norm(&(mu_hat_i - *mj)));
    disagreement / (T::lit(6.0) * n * sqrt_q)
        + params.sigma * (-params.iota * t).exp() / (T::lit(3.0) * n * n * params.k_mu * sqrt_q)
}

/// `‖e_i‖ ≥ threshold`, with `e_i = μ̂_i - μ_i`.
pub fn trigger_check<T: Real>(
    e_i: &DVector<T>,
    mu_hat_i: &DVector<T>,
    neighbor_mu_hats: &[&DVector<T>],
    params: &TriggerParams<T>,
    t: T,
) -> bool {
    e_i.norm() >= trigger_threshold(mu_hat_i, neighbor_mu_hats, params, t)
}

/// One row of a gain-condition report.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCheck<T: Real> {
    pub rule: &'static str,
    pub required: T,
    pub actual: T,
    pub passed: bool,
    /// Failing a hard condition makes the configuration invalid; failing a
    /// soft one only disables bound certification.
    pub hard: bool,
}

impl<T: Real> GainCheck<T> {
    fn at_least(rule: &'static str, actual: T, required: T, hard: bool) -> Self {
        Self {
            rule,
            required,
            actual,
            passed: actual >= required,
            hard,
        }
    }

    pub fn margin(&self) -> T {
        self.actual - self.required
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainReport<T: Real> {
    pub checks: Vec<GainCheck<T>>,
}

impl<T: Real> GainReport<T> {
    /// All conditions hold; the theoretical bounds are certified.
    pub fn certified(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn hard_failures(&self) -> impl Iterator<Item = &GainCheck<T>> {
        self.checks.iter().filter(|c| c.hard && !c.passed)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &GainCheck<T>> {
        self.checks.iter().filter(|c| !c.hard && !c.passed)
    }

    /// First hard failure as a configuration error.
    pub fn into_result(self) -> Result<Self> {
        if let Some(c) = self.hard_failures().next() {
            return Err(Error::Config {
                rule: c.rule,
                detail: format!("required {}, got {}", c.required, c.actual),
            });
        }
        Ok(self)
    }
}

pub const RULE_DUAL_GAIN: &str = "K_mu < N*K_g";
pub const RULE_NOISY_DUAL_GAIN: &str = "K_mu < N^2*K_g (noisy links)";
pub const RULE_NOISE_BUDGET: &str = "E|eps|_1 > 1/2 - N^2*K_g/(2*K_mu)";
pub const RULE_OUTPUT_GAIN: &str = "K_y < N*K_df";
pub const RULE_STEP_SIZE: &str = "epsilon <= 0";

/// Checks the gain hypotheses of the chosen variant.
pub fn validate_gain_conditions<T: Real>(
    params: &GlobalParameters<T>,
    variant: &ControllerVariant<T>,
    constants: &ProblemConstants<T>,
    n_agents: usize,
    q: usize,
) -> GainReport<T> {
    let n = T::from_usize_lossy(n_agents);
    let mut checks = vec![
        GainCheck::at_least(RULE_STEP_SIZE, params.epsilon, T::zero(), true),
        GainCheck::at_least(RULE_DUAL_GAIN, params.k_mu, n * constants.k_g, true),
    ];
    checks[0].passed = params.epsilon > T::zero();
    // K_mu = 0 is never admissible, even with K_g = 0.
    checks[1].passed &= params.k_mu > T::zero();
    match *variant {
        ControllerVariant::Noisy { noise } => {
            let n2kg = n * n * constants.k_g;
            checks.push(GainCheck::at_least(RULE_NOISY_DUAL_GAIN, params.k_mu, n2kg, false));
            let budget = if params.k_mu > T::zero() {
                T::lit(0.5) - n2kg / (T::lit(2.0) * params.k_mu)
            } else {
                -T::infinity()
            };
            // Reported as "budget ≥ expected", so the margin is the slack.
            let mut c = GainCheck::at_least(RULE_NOISE_BUDGET, budget, noise.expected_l1(q), false);
            c.passed = noise.expected_l1(q) <= budget;
            checks.push(c);
        }
        ControllerVariant::ContinuousConsensus { k_y } => {
            checks.push(GainCheck::at_least(RULE_OUTPUT_GAIN, k_y, n * constants.k_df, true));
        }
        _ => {}
    }
    GainReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{AffineConstraint, AffineRow, LocalProblem, QuadraticCost, QuadraticTerm, SinusoidalCoefficient};
    use crate::synthesis::{GainSet, LtiModel};
    use nalgebra::{dmatrix, dvector};
    use std::sync::Arc;

    fn scalar_agent(k: f64) -> Agent<f64> {
        let model = LtiModel::single_integrator(1);
        let gains = GainSet {
            k: dmatrix![k],
            h: dmatrix![1.0],
            gamma: dmatrix![1.0],
            psi: dmatrix![1.0],
            upsilon: dmatrix![0.0],
        };
        let problem = LocalProblem::new(
            Arc::new(QuadraticCost::new(vec![QuadraticTerm { weight: 1.0, amplitude: 0.0, frequency: 0.0, offset: 2.0 }]).unwrap()),
            Arc::new(AffineConstraint::new(vec![AffineRow {
                coefficients: vec![SinusoidalCoefficient::constant(1.0)],
                offset: SinusoidalCoefficient::constant(-1.0),
            }]).unwrap()),
            BoxSet::cube(1, -1.0, 6.0).unwrap(),
        )
        .unwrap();
        Agent::new(model, gains, problem).unwrap()
    }

    fn state(x: f64, x_hat: f64, eta: f64, mu: f64) -> AgentState<f64> {
        AgentState {
            x: dvector![x],
            x_hat: dvector![x_hat],
            eta: dvector![eta],
            mu: dvector![mu],
            mu_hat: dvector![mu],
            last_event_time: None,
        }
    }

    #[test]
    fn single_integrator_input_by_substitution() {
        let a = scalar_agent(1.0);
        let s = state(0.5, 0.25, 0.75, 0.0);
        let params = GlobalParameters::new(0.1, 1.0);
        let out = continuous_control(&a, &s, &[], &params, 0.0).unwrap();
        // u = -x̂ + η̇ + η
        assert_eq!(out.u[0], -0.25 + out.eta_dot[0] + 0.75);
        // η̇ = -ε (2(y - 2) + μ) with y = 0.5
        assert!((out.eta_dot[0] - 0.3).abs() < 1e-15);
        // μ at zero with g = -0.5 < 0: blocked.
        assert_eq!(out.mu_dot[0], 0.0);
    }

    #[test]
    fn boundary_blocks_outward_reference_motion() {
        let a = scalar_agent(1.0);
        // y at the lower bound: the cost pulls inward, a large multiplier
        // pushes outward.
        let s = state(-1.0, -1.0, -1.0, 0.0);
        let params = GlobalParameters::new(0.1, 1.0);
        let out = continuous_control(&a, &s, &[], &params, 0.0).unwrap();
        assert!(out.eta_dot[0] > 0.0);
        let s = state(-1.0, -1.0, -1.0, 100.0);
        let out = continuous_control(&a, &s, &[], &params, 0.0).unwrap();
        assert_eq!(out.eta_dot[0], 0.0);
    }

    #[test]
    fn event_triggered_doubles_dual_gain() {
        let a = scalar_agent(1.0);
        let s = state(0.0, 0.0, 0.0, 2.0);
        let other = dvector![0.0];
        let params = GlobalParameters::new(0.5, 3.0);
        let ct = continuous_control(&a, &s, &[&other], &params, 0.0).unwrap();
        let et = event_triggered_control(&a, &s, &[&other], &params, 0.0).unwrap();
        // g = -1; continuous 0.5(-1 - 3), triggered 0.5(-1 - 6).
        assert_eq!(ct.mu_dot[0], -2.0);
        assert_eq!(et.mu_dot[0], -3.5);
        let same = dvector![2.0];
        let et = event_triggered_control(&a, &s, &[&same], &params, 0.0).unwrap();
        assert_eq!(et.mu_dot[0], -0.5);
    }

    #[test]
    fn zero_noise_matches_continuous() {
        let a = scalar_agent(2.0);
        let s = state(0.3, 0.1, 0.2, 0.4);
        let other = dvector![0.1];
        let params = GlobalParameters::new(0.1, 5.0);
        let ct = continuous_control(&a, &s, &[&other], &params, 1.3).unwrap();
        let nz = noisy_control(&a, &s, &[&other], &[dvector![0.0]], &params, 1.3).unwrap();
        assert_eq!(ct, nz);
        // Equal multipliers: noise is scaled away.
        let equal = dvector![0.4];
        let nz = noisy_control(&a, &s, &[&equal], &[dvector![0.3]], &params, 1.3).unwrap();
        let ct = continuous_control(&a, &s, &[&equal], &params, 1.3).unwrap();
        assert_eq!(ct, nz);
    }

    #[test]
    fn trigger_threshold_by_hand() {
        let p = TriggerParams { n_agents: 2, k_mu: 2.0_f64, sigma: 1.0, iota: 0.7 };
        let mh = dvector![0.3];
        let other = dvector![0.3];
        let rhs = trigger_threshold(&mh, &[&other], &p, 0.0);
        assert!((rhs - 1.0 / 24.0).abs() < 1e-15);
        assert!(trigger_check(&dvector![0.05], &mh, &[&other], &p, 0.0));
        assert!(!trigger_check(&dvector![0.01], &mh, &[&other], &p, 0.0));
        assert!(!trigger_check(&dvector![0.0], &mh, &[&other], &p, 0.0));
    }

    #[test]
    fn gain_condition_examples() {
        let consts = ProblemConstants { k_f: 1.0_f64, k_g: 30.0, k_df: 1.0, strong_convexity: 1.0 };
        let v = ControllerVariant::Continuous;
        let r = validate_gain_conditions(&GlobalParameters::new(0.1, 200.0), &v, &consts, 6, 1);
        assert!(r.certified());
        assert!((r.checks[1].margin() - 20.0).abs() < 1e-12);
        let r = validate_gain_conditions(&GlobalParameters::new(0.1, 0.0), &v, &consts, 6, 1);
        assert!(!r.certified());
        assert!(r.into_result().is_err());

        let noisy = ControllerVariant::Noisy { noise: NoiseModel::Zero };
        let r = validate_gain_conditions(&GlobalParameters::new(0.1, 1080.0), &noisy, &consts, 6, 1);
        assert!(r.certified());
        assert_eq!(r.checks[2].margin(), 0.0);
        // Budget at the boundary is exactly zero.
        assert_eq!(r.checks[3].actual, 0.0);
        let noisy = ControllerVariant::Noisy { noise: NoiseModel::Uniform { half_width: 0.1 } };
        let r = validate_gain_conditions(&GlobalParameters::new(0.1, 1080.0), &noisy, &consts, 6, 1);
        assert!(!r.certified());
        assert!(r.into_result().is_ok());
    }

    #[test]
    fn uniform_noise_expectation() {
        let n = NoiseModel::Uniform { half_width: 0.4_f64 };
        assert!((n.expected_l1(1) - 0.2).abs() < 1e-15);
        assert!((n.expected_l1(3) - 0.6).abs() < 1e-15);
    }
}
