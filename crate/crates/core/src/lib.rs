//! Distributed online optimisation over networks of heterogeneous linear
//! agents with time-varying coupled inequality constraints.
//!
//! Every agent is a linear plant `ẋ = Ax + Bu`, `y = Cx` driven by an
//! observer-based controller whose reference `η` follows a projected
//! saddle-point flow on a consensus-penalised Lagrangian. Three dual
//! communication schemes are provided: continuous exchange, event-triggered
//! broadcast, and exchange over noisy links.
//!
//! The numerics are generic over [`Real`] (`f32` or `f64`); the `*F64`
//! aliases at the crate root fix the scalar for the common case.

pub mod controllers;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod oracle;
pub mod plant;
pub mod problem;
pub mod scalar;
pub mod sim;
pub mod synthesis;

pub use controllers::{ControllerVariant, NoiseModel, TriggerRule};
pub use error::{Error, Result};
pub use geometry::BoxSet;
pub use graph::Graph;
pub use problem::{
    AffineConstraint, AffineRow, ConstraintFunction, CostFunction, GlobalParameters, LocalProblem,
    ProblemConstants, QuadraticCost, QuadraticTerm, SinusoidalCoefficient,
};
pub use scalar::Real;
pub use synthesis::{GainSet, LtiModel, NetworkCertificate};

pub type LtiModelF64 = synthesis::LtiModel<f64>;
pub type GainSetF64 = synthesis::GainSet<f64>;
pub type BoxSetF64 = geometry::BoxSet<f64>;
pub type LocalProblemF64 = problem::LocalProblem<f64>;
pub type NetworkF64 = sim::Network<f64>;
pub type SimConfigF64 = sim::SimConfig<f64>;
pub type TrajectoryF64 = sim::Trajectory<f64>;
pub type MetricsReportF64 = metrics::MetricsReport<f64>;
pub type OfflineSolutionF64 = oracle::OfflineSolution<f64>;
pub type ControllerVariantF64 = controllers::ControllerVariant<f64>;

pub type LtiModelF32 = synthesis::LtiModel<f32>;
pub type NetworkF32 = sim::Network<f32>;
pub type SimConfigF32 = sim::SimConfig<f32>;
