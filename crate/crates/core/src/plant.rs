//! Agent plants, observers and the assembled network state.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problem::LocalProblem;
use crate::scalar::Real;
use crate::synthesis::{GainSet, LtiModel};

/// `ẋ = Ax + Bu`.
pub fn plant_derivative<T: Real>(model: &LtiModel<T>, x: &DVector<T>, u: &DVector<T>) -> Result<DVector<T>> {
    if x.len() != model.n() {
        return Err(Error::dim("plant state", model.n(), x.len()));
    }
    if u.len() != model.m() {
        return Err(Error::dim("plant input", model.m(), u.len()));
    }
    Ok(&model.a * x + &model.b * u)
}

/// `y = Cx`.
pub fn output<T: Real>(model: &LtiModel<T>, x: &DVector<T>) -> Result<DVector<T>> {
    if x.len() != model.n() {
        return Err(Error::dim("plant state", model.n(), x.len()));
    }
    Ok(&model.c * x)
}

/// `x̂̇ = Ax̂ + Bu + H(y - Cx̂)`.
pub fn observer_derivative<T: Real>(
    model: &LtiModel<T>,
    gains: &GainSet<T>,
    x_hat: &DVector<T>,
    u: &DVector<T>,
    y: &DVector<T>,
) -> Result<DVector<T>> {
    if y.len() != model.p() {
        return Err(Error::dim("measured output", model.p(), y.len()));
    }
    if gains.h.shape() != (model.n(), model.p()) {
        return Err(Error::dim("observer gain rows", model.n(), gains.h.nrows()));
    }
    let innovation = y - &model.c * x_hat;
    Ok(plant_derivative(model, x_hat, u)? + &gains.h * innovation)
}

/// Everything an agent owns that does not change during a run.
#[derive(Debug, Clone)]
pub struct Agent<T: Real> {
    pub model: LtiModel<T>,
    pub gains: GainSet<T>,
    pub problem: LocalProblem<T>,
}

impl<T: Real> Agent<T> {
    pub fn new(model: LtiModel<T>, gains: GainSet<T>, problem: LocalProblem<T>) -> Result<Self> {
        if problem.output_dim() != model.p() {
            return Err(Error::dim("problem output vs plant output", model.p(), problem.output_dim()));
        }
        let (n, m, p) = (model.n(), model.m(), model.p());
        let shapes = [
            ("K", gains.k.shape(), (m, n)),
            ("H", gains.h.shape(), (n, p)),
            ("Gamma", gains.gamma.shape(), (m, p)),
            ("Psi", gains.psi.shape(), (n, p)),
            ("Upsilon", gains.upsilon.shape(), (m, p)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::Dimension {
                    context: format!("gain {name}"),
                    expected: want.0 * want.1,
                    found: got.0 * got.1,
                });
            }
        }
        Ok(Self { model, gains, problem })
    }

    /// Synthesises gains with the given stability margin.
    pub fn synthesize(model: LtiModel<T>, problem: LocalProblem<T>, stability_margin: T) -> Result<Self> {
        let gains = GainSet::synthesize(&model, stability_margin)?;
        Self::new(model, gains, problem)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState<T: Real> {
    pub x: DVector<T>,
    pub x_hat: DVector<T>,
    pub eta: DVector<T>,
    pub mu: DVector<T>,
    /// Last broadcast multiplier.
    pub mu_hat: DVector<T>,
    pub last_event_time: Option<T>,
}

impl<T: Real> AgentState<T> {
    /// `x̂(0) = 0`, `η(0) = 0`, `μ(0) = μ̂(0) = 0`.
    pub fn initial(x0: DVector<T>, p: usize, q: usize) -> Self {
        let n = x0.len();
        Self {
            x: x0,
            x_hat: DVector::zeros(n),
            eta: DVector::zeros(p),
            mu: DVector::zeros(q),
            mu_hat: DVector::zeros(q),
            last_event_time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState<T: Real> {
    pub agents: Vec<AgentState<T>>,
    pub t: T,
    pub step: u64,
    /// `∫ Σ_i f_i(t, y_i) dt`.
    pub cost_integral: T,
    /// `∫ Σ_i g_i(t, y_i) dt`.
    pub constraint_integral: DVector<T>,
    /// `∫ Σ_j f_j(t, y_i) dt` per agent; only maintained when all outputs
    /// have the same dimension.
    pub consensus_integrals: Vec<T>,
}

impl<T: Real> NetworkState<T> {
    pub fn new(agents: Vec<AgentState<T>>, q: usize) -> Self {
        let n = agents.len();
        Self {
            agents,
            t: T::zero(),
            step: 0,
            cost_integral: T::zero(),
            constraint_integral: DVector::zeros(q),
            consensus_integrals: vec![T::zero(); n],
        }
    }
}
