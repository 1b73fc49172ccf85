use std::sync::Arc;

use dosim::controllers::ControllerVariant;
use dosim::geometry::BoxSet;
use dosim::graph::Graph;
use dosim::metrics::{
    fit, fit_from_parts, individual_regret, regret, theoretical_bounds, BoundFamily, BoundInputs,
};
use dosim::oracle::{offline_optimum, time_grid, OracleOptions};
use dosim::plant::Agent;
use dosim::problem::{AffineConstraint, AffineRow, LocalProblem, QuadraticCost, QuadraticTerm, SinusoidalCoefficient};
use dosim::sim::{run, Network, SimConfig};
use dosim::synthesis::LtiModel;
use dosim::Error;
use nalgebra::dvector;

#[test]
fn bounds_match_hand_computation() {
    let inputs = BoundInputs { n_agents: 2, epsilon: 0.5f64, k_f: 4.0, y0: dvector![1.0, 2.0], initial_energy: 3.0 };
    let y_star = dvector![0.0, 0.0];
    let b = theoretical_bounds(&inputs, &y_star, BoundFamily::Continuous, 4.0).unwrap();
    // (5 + 3) / 1
    assert!((b.regret - 8.0).abs() < 1e-12);
    // (√2·√5 + √12) / 0.5 + 4·√8·2
    let fit_hand = 2.0 * (10f64.sqrt() + 12f64.sqrt()) + 16.0 * 2f64.sqrt();
    assert!((b.fit - fit_hand).abs() < 1e-12);
    assert!(!b.expected);

    let e = theoretical_bounds(&inputs, &y_star, BoundFamily::EventTriggered { sigma: 1.0, iota: 0.5 }, 4.0).unwrap();
    assert!((e.regret - 10.0).abs() < 1e-12);
    // + √(2·2·1 / (0.5·0.5))
    assert!((e.fit - fit_hand - 4.0).abs() < 1e-12);

    let x = theoretical_bounds(&inputs, &y_star, BoundFamily::Expected, 4.0).unwrap();
    assert!(x.expected);
    assert_eq!(x.regret, b.regret);

    assert!(theoretical_bounds(&inputs, &dvector![0.0], BoundFamily::Continuous, 4.0).is_err());
}

#[test]
fn fit_takes_positive_part_before_norm() {
    assert!((fit_from_parts(&dvector![1.0, -2.0, 3.0]) - 10f64.sqrt()).abs() < 1e-15);
    assert_eq!(fit_from_parts(&dvector![-1.0, -0.5]), 0.0);
    assert_eq!(fit_from_parts(&dvector![0.0]), 0.0);
}

fn scalar_problem(weight: f64, amp: f64, freq: f64, off: f64, share: f64) -> LocalProblem<f64> {
    LocalProblem::new(
        Arc::new(QuadraticCost::new(vec![QuadraticTerm { weight, amplitude: amp, frequency: freq, offset: off }]).unwrap()),
        Arc::new(AffineConstraint::new(vec![AffineRow {
            coefficients: vec![SinusoidalCoefficient::constant(1.0)],
            offset: SinusoidalCoefficient::constant(-share),
        }]).unwrap()),
        BoxSet::cube(1, -1.0, 2.0).unwrap(),
    )
    .unwrap()
}

fn coupled_problems() -> Vec<LocalProblem<f64>> {
    vec![
        scalar_problem(1.0, 0.5, 1.0, 1.5, 0.4),
        scalar_problem(2.0, 1.0, 2.0, 1.0, 0.4),
        scalar_problem(0.5, 0.3, 3.0, 0.2, 0.4),
    ]
}

/// Independent reference: each summed cost is `w T (y - m)² + const`, `m`
/// the grid mean of the centre, so the optimum is the clipped shifted mean
/// with a scalar multiplier found by bisection on `Σ y ≤ 1.2`.
fn bisection_optimum(params: &[(f64, f64, f64, f64)], horizon: f64, grid_k: usize) -> Vec<f64> {
    let means: Vec<f64> = params
        .iter()
        .map(|&(_, a, w, b)| (0..grid_k).map(|k| a * (w * k as f64 * horizon / grid_k as f64).cos() + b).sum::<f64>() / grid_k as f64)
        .collect();
    let at = |lam: f64| -> Vec<f64> {
        params.iter().zip(&means).map(|(&(wt, ..), m)| (m - lam / (2.0 * wt)).clamp(-1.0, 2.0)).collect()
    };
    if at(0.0).iter().sum::<f64>() <= 1.2 {
        return at(0.0);
    }
    let (mut lo, mut hi) = (0.0, 100.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid).iter().sum::<f64>() > 1.2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

#[test]
fn oracle_agrees_with_bisection_reference() {
    let problems = coupled_problems();
    let params = [(1.0, 0.5, 1.0, 1.5), (2.0, 1.0, 2.0, 1.0), (0.5, 0.3, 3.0, 0.2)];
    for &(horizon, grid_k) in &[(3.0, 300usize), (10.0, 1000)] {
        let opts = OracleOptions { grid_k, ..OracleOptions::default() };
        let sol = offline_optimum(&problems, horizon, &opts).unwrap();
        let reference = bisection_optimum(&params, horizon, grid_k);
        for (got, want) in sol.y_star.iter().zip(&reference) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
        assert!(sol.kkt_residual <= 1e-8);
        assert!(sol.feasibility_margin >= -1e-8);
        let dt = horizon / grid_k as f64;
        let obj: f64 = time_grid(horizon, grid_k)
            .iter()
            .map(|&t| {
                params.iter().zip(&reference).map(|(&(w, a, f, b), y)| w * (y - a * (f * t).cos() - b).powi(2)).sum::<f64>() * dt
            })
            .sum();
        assert!((sol.objective - obj).abs() < 1e-6 * obj.abs().max(1.0));
        assert_eq!(sol.blocks.len(), 3);
    }
}

#[test]
fn oracle_rejects_empty_feasible_set() {
    // y ≥ 3 on the box [-1, 2].
    let p = LocalProblem::new(
        Arc::new(QuadraticCost::new(vec![QuadraticTerm { weight: 1.0, amplitude: 0.0, frequency: 0.0, offset: 0.0 }]).unwrap()),
        Arc::new(AffineConstraint::new(vec![AffineRow {
            coefficients: vec![SinusoidalCoefficient::constant(-1.0)],
            offset: SinusoidalCoefficient::constant(3.0),
        }]).unwrap()),
        BoxSet::cube(1, -1.0, 2.0).unwrap(),
    )
    .unwrap();
    let err = offline_optimum(&[p], 1.0, &OracleOptions { grid_k: 50, ..OracleOptions::default() }).unwrap_err();
    assert!(matches!(err, Error::Infeasible(_) | Error::NonConvergence { .. }), "{err:?}");
}

#[test]
fn oracle_rejects_bad_options() {
    let problems = coupled_problems();
    assert!(offline_optimum(&problems, 1.0, &OracleOptions { grid_k: 1, ..OracleOptions::default() }).is_err());
    assert!(offline_optimum(&problems, 0.0, &OracleOptions::default()).is_err());
    assert!(offline_optimum::<f64>(&[], 1.0, &OracleOptions::default()).is_err());
}

fn consensus_toy() -> Network<f64> {
    let agents = coupled_problems()
        .into_iter()
        .map(|p| Agent::synthesize(LtiModel::single_integrator(1), p, 0.5).unwrap())
        .collect();
    Network::new(agents, Graph::ring(3).unwrap()).unwrap()
}

#[test]
fn individual_regret_matches_quadrature() {
    let net = consensus_toy();
    let c = net.constants();
    let k_y = 2.0 * 3.0 * c.k_df;
    let cfg = SimConfig::new(2.0, 0.5, 2.0 * 3.0 * c.k_g, ControllerVariant::ContinuousConsensus { k_y });
    let x0 = vec![dvector![1.5], dvector![-0.5], dvector![0.0]];
    let tr = run(&net, &cfg, &x0).unwrap();
    let problems: Vec<_> = net.agents().iter().map(|a| a.problem.clone()).collect();
    let y_star = vec![dvector![0.4]; 3];
    for agent in 0..3 {
        let mut expected = 0.0;
        for k in 0..tr.len() - 1 {
            let t = tr.times[k];
            let y = &tr.y[k][agent];
            for (p, ys) in problems.iter().zip(&y_star) {
                expected += tr.dt * (p.cost.value(t, y) - p.cost.value(t, ys));
            }
        }
        let got = individual_regret(&tr, agent, 2.0, &y_star, &problems).unwrap();
        assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1.0), "agent {agent}: {got} vs {expected}");
    }
    // Network regret by the same quadrature.
    let mut expected = 0.0;
    for k in 0..tr.len() - 1 {
        let t = tr.times[k];
        for ((p, y), ys) in problems.iter().zip(&tr.y[k]).zip(&y_star) {
            expected += tr.dt * (p.cost.value(t, y) - p.cost.value(t, ys));
        }
    }
    let got = regret(&tr, 2.0, &y_star, &problems).unwrap();
    assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1.0));
    assert!(individual_regret(&tr, 3, 2.0, &y_star, &problems).is_err());
}

#[test]
fn individual_regret_needs_consensus_run() {
    let net = consensus_toy();
    let cfg = SimConfig::new(0.5, 0.5, 6.0 * net.constants().k_g, ControllerVariant::Continuous);
    let tr = run(&net, &cfg, &[dvector![0.0], dvector![0.0], dvector![0.0]]).unwrap();
    let problems: Vec<_> = net.agents().iter().map(|a| a.problem.clone()).collect();
    assert!(individual_regret(&tr, 0, 0.5, &vec![dvector![0.4]; 3], &problems).is_err());
}

#[test]
fn fit_reads_logged_constraint_integral() {
    let net = consensus_toy();
    let mut cfg = SimConfig::new(1.0, 0.5, 6.0 * net.constants().k_g, ControllerVariant::Continuous);
    cfg.log_stride = 50;
    let tr = run(&net, &cfg, &[dvector![2.0], dvector![2.0], dvector![2.0]]).unwrap();
    let (f, parts) = fit(&tr, 1.0).unwrap();
    let last = tr.constraint_integral.last().unwrap();
    assert_eq!(&parts, last);
    assert!((f - last[0].max(0.0)).abs() < 1e-15);
    // Horizons off the logging grid are rejected.
    assert!(fit(&tr, 0.0123).is_err());
}
