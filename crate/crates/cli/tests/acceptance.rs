//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Exits non-zero only when `DOSIM_ACCEPTANCE_STRICT` is set and a criterion
//! fails, so the report is always produced.

use std::path::Path;
use std::time::{Duration, Instant};

use dosim::controllers::ControllerVariant;
use dosim::geometry::BoxSet;
use dosim::linalg::{min_symmetric_eigenvalue, spectral_abscissa};
use dosim::metrics;
use dosim::oracle::{offline_optimum, OracleCache, OracleOptions};
use dosim::problem::{
    dual_subgradient, lagrangian_value, primal_subgradient, AffineConstraint, AffineRow, GlobalParameters, LocalProblem,
    QuadraticCost, QuadraticTerm, SinusoidalCoefficient,
};
use dosim::sim::{self, SimConfig};
use dosim::synthesis::{
    error_dynamics_matrix, solve_regulator_equations, LtiModel, NetworkCertificate,
};
use dosim::NoiseModel;
use dosim_cli::experiment::{run_experiment, run_single, ExperimentPlan, SeedRange, SweepAxes};
use dosim_cli::scenario::{builtin_scenario, Overrides, Scenario, VariantKind};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn example1() -> Scenario {
    Scenario::build(builtin_scenario("example1").unwrap()).unwrap()
}

fn pev() -> Scenario {
    Scenario::build(builtin_scenario("example2-pev").unwrap()).unwrap()
}

fn max3(r: [f64; 3]) -> f64 {
    r.into_iter().fold(0.0, f64::max)
}

fn regulator() -> Outcome {
    let start = Instant::now();
    let s = example1();
    let mut worst = 0.0_f64;
    for a in s.network.agents() {
        let sol = solve_regulator_equations(&a.model).unwrap();
        worst = worst.max(max3(sol.residuals(&a.model)));
    }
    let si = LtiModel::<f64>::single_integrator(3);
    let sol = solve_regulator_equations(&si).unwrap();
    worst = worst.max(max3(sol.residuals(&si)));
    let eye = DMatrix::<f64>::identity(3, 3);
    let exact = sol.gamma == eye && sol.psi == eye && sol.upsilon == DMatrix::zeros(3, 3);
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-10 && exact && elapsed < Duration::from_secs(1),
        format!("max residual {worst:.2e}, single integrator exact: {exact}, {:.3}s", elapsed.as_secs_f64()),
    )
}

fn stability() -> Outcome {
    let mut worst_abscissa = f64::NEG_INFINITY;
    let mut worst_asym = 0.0_f64;
    let mut worst_decrease = f64::NEG_INFINITY;
    let mut min_p = f64::INFINITY;
    for s in [example1(), pev()] {
        let agents = s.network.agents();
        for a in agents {
            let m = &a.model;
            worst_abscissa = worst_abscissa
                .max(spectral_abscissa(&(&m.a - &m.b * &a.gains.k)))
                .max(spectral_abscissa(&(&m.a - &a.gains.h * &m.c)));
        }
        let pairs: Vec<_> = agents.iter().map(|a| (&a.model, &a.gains)).collect();
        let cert = NetworkCertificate::synthesize(&pairs, s.spec.parameters.epsilon, s.network.constants().strong_convexity).unwrap();
        for (block, a) in cert.blocks.iter().zip(agents) {
            let p = &block.p;
            let scale = p.amax().max(1.0);
            worst_asym = worst_asym.max((p - p.transpose()).amax() / scale);
            let a_h = error_dynamics_matrix(&a.model, &a.gains);
            let lyap = a_h.transpose() * p + p * &a_h;
            // Largest eigenvalue of the symmetric Lyapunov residual, relative.
            worst_decrease = worst_decrease.max(-min_symmetric_eigenvalue(&(-&lyap)) / scale);
            min_p = min_p.min(min_symmetric_eigenvalue(p) / scale);
        }
    }
    outcome(
        worst_abscissa <= -0.4 && worst_asym <= 1e-9 && worst_decrease < -1e-9 && min_p > 0.0,
        format!(
            "max Re(eig) {worst_abscissa:.3}, asymmetry {worst_asym:.1e}, max eig(A_H'P+PA_H)/|P| {worst_decrease:.2e}, min eig(P)/|P| {min_p:.2e}"
        ),
    )
}

fn random_box(rng: &mut ChaCha8Rng, d: usize) -> BoxSet<f64> {
    let lo: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..0.0)).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.1..5.0)).collect();
    BoxSet::new(DVector::from_vec(lo), DVector::from_vec(hi)).unwrap()
}

fn random_point(rng: &mut ChaCha8Rng, b: &BoxSet<f64>) -> DVector<f64> {
    DVector::from_fn(b.dim(), |k, _| {
        let (lo, hi) = (b.lower()[k], b.upper()[k]);
        match rng.gen_range(0..4) {
            0 => lo,
            1 => hi,
            _ => rng.gen_range(lo..hi),
        }
    })
}

fn projection() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0usize;
    for _ in 0..100_000 {
        let d = rng.gen_range(1..6);
        let b = random_box(&mut rng, d);
        let x1 = random_point(&mut rng, &b);
        let x2 = random_point(&mut rng, &b);
        let v = DVector::from_fn(d, |_, _| rng.gen_range(-10.0..10.0));
        let pv = b.tangent_projection(&x1, &v).unwrap();
        let diff = &x1 - &x2;
        if diff.dot(&pv) > diff.dot(&v) + 1e-12 {
            violations += 1;
        }
        if pv.norm() > v.norm() + 1e-12 {
            violations += 1;
        }
    }
    let mut fd_worst = 0.0_f64;
    let delta = 1e-7;
    for k in 0..1000 {
        let d = rng.gen_range(1..6);
        let b = if k % 2 == 0 { random_box(&mut rng, d) } else { BoxSet::orthant(d) };
        let x = if k % 2 == 0 {
            random_point(&mut rng, &b)
        } else {
            DVector::from_fn(d, |_, _| if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.1..5.0) })
        };
        let v = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
        let pv = b.tangent_projection(&x, &v).unwrap();
        let fd = (b.project(&(&x + &v * delta)).unwrap() - &x) / delta;
        fd_worst = fd_worst.max((fd - pv).amax());
    }
    let elapsed = start.elapsed();
    outcome(
        violations == 0 && fd_worst <= 1e-6 && elapsed < Duration::from_secs(10),
        format!("{violations} violations in 1e5 trials, difference-quotient error {fd_worst:.1e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn central<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn subgradients() -> Outcome {
    let s = example1();
    let problems = s.problems();
    let graph = s.network.graph();
    let params = GlobalParameters::new(0.1, 200.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-5;
    let mut worst = [0.0_f64; 4];
    for _ in 0..1000 {
        let t = rng.gen_range(0.0..50.0);
        let ys: Vec<DVector<f64>> = problems
            .iter()
            .map(|p| DVector::from_fn(p.output_dim(), |_, _| rng.gen_range(-0.9..5.9)))
            .collect();
        // Distinct neighbour multipliers keep the sign terms away from kinks.
        let mus: Vec<DVector<f64>> = loop {
            let m: Vec<DVector<f64>> = (0..problems.len()).map(|_| DVector::from_fn(1, |_, _| rng.gen_range(0.1..5.0))).collect();
            let ok = (0..m.len()).all(|i| graph.neighbors(i).iter().all(|&j| (m[i][0] - m[j][0]).abs() > 1e-3));
            if ok {
                break m;
            }
        };
        let i = rng.gen_range(0..problems.len());
        let p = &problems[i];
        let y = &ys[i];
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(1.0);
        let grad_f = p.cost.gradient(t, y);
        let jac = p.constraint.jacobian(t, y);
        let grad_l = primal_subgradient(t, y, &mus[i], p, None).unwrap();
        for k in 0..y.len() {
            let shift = |e: f64| {
                let mut z = y.clone();
                z[k] += e;
                z
            };
            let fd = central(|e| p.cost.value(t, &shift(e)), 0.0, h);
            worst[0] = worst[0].max(rel(grad_f[k], fd));
            let fd = central(|e| p.constraint.value(t, &shift(e))[0], 0.0, h);
            worst[1] = worst[1].max(rel(jac[(0, k)], fd));
            let fd = central(
                |e| {
                    let mut zs = ys.clone();
                    zs[i] = shift(e);
                    lagrangian_value(t, &zs, &mus, &problems, &params, graph).unwrap()
                },
                0.0,
                h,
            );
            worst[2] = worst[2].max(rel(grad_l[k], fd));
        }
        let neighbors: Vec<&DVector<f64>> = graph.neighbors(i).iter().map(|&j| &mus[j]).collect();
        let dual = dual_subgradient(t, y, &mus[i], &neighbors, p, params.k_mu).unwrap();
        let fd = central(
            |e| {
                let mut ms = mus.clone();
                ms[i][0] += e;
                lagrangian_value(t, &ys, &ms, &problems, &params, graph).unwrap()
            },
            0.0,
            h,
        );
        worst[3] = worst[3].max(rel(dual[0], fd));
    }
    outcome(
        worst.iter().all(|&w| w <= 1e-6),
        format!(
            "max rel. error: grad f {:.1e}, jac g {:.1e}, dL/dy {:.1e}, dL/dmu {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn with_tempdir<R>(f: impl FnOnce(&Path) -> R) -> R {
    let dir = tempfile::tempdir().unwrap();
    f(dir.path())
}

fn continuous_bounds(rows: &mut Vec<dosim_cli::experiment::MetricsRow>) -> Outcome {
    let s = example1();
    let start = Instant::now();
    let (summary, _) = with_tempdir(|d| {
        run_single(&s, VariantKind::Continuous, &Overrides::default(), None, &d.join("c"), &OracleCache::new()).unwrap()
    });
    let elapsed = start.elapsed();
    *rows = summary.checkpoints.clone();
    let within = rows.iter().all(|r| r.regret <= r.regret_bound && r.fit <= r.fit_bound);
    let worst_regret_ratio = rows.iter().map(|r| r.regret / r.regret_bound).fold(f64::NEG_INFINITY, f64::max);
    let worst_fit_ratio = rows.iter().map(|r| r.fit / r.fit_bound).fold(f64::NEG_INFINITY, f64::max);
    outcome(
        within && summary.certified && rows.len() == 10 && elapsed < Duration::from_secs(60),
        format!(
            "{} checkpoints, certified {}, max R/bound {worst_regret_ratio:.2e}, max F/bound {worst_fit_ratio:.2e}, {:.1}s",
            rows.len(),
            summary.certified,
            elapsed.as_secs_f64()
        ),
    )
}

fn row_at(rows: &[dosim_cli::experiment::MetricsRow], h: f64) -> &dosim_cli::experiment::MetricsRow {
    rows.iter().find(|r| (r.horizon - h).abs() < 1e-9).unwrap()
}

fn constant_regret(rows: &[dosim_cli::experiment::MetricsRow]) -> Outcome {
    let r25 = row_at(rows, 25.0).regret;
    let r50 = row_at(rows, 50.0).regret;
    let f10 = row_at(rows, 10.0).fit_over_sqrt_t;
    let f50 = row_at(rows, 50.0).fit_over_sqrt_t;
    outcome(
        r50 - r25 <= 0.05 * r25.abs() + 0.1 && f50 <= f10,
        format!("R50 - R25 = {:.3} (limit {:.3}), F/sqrtT: {f10:.3} at T=10, {f50:.3} at T=50", r50 - r25, 0.05 * r25.abs() + 0.1),
    )
}

fn event_triggered() -> Outcome {
    let s = example1();
    let overrides = Overrides { sigma: Some(1.0), iota: Some(0.5), ..Overrides::default() };
    let cfg = s.sim_config(VariantKind::EventTriggered, &overrides).unwrap();
    let traj = sim::run(&s.network, &cfg, &s.x0).unwrap();
    let n = s.network.len();
    let steps = traj.total_steps();
    let zeno = metrics::zeno_report(&traj, n, s.network.constraint_dim(), cfg.k_mu).unwrap();
    let dt = cfg.dt;
    let gaps_ok = (0..n).all(|i| traj.min_inter_event_time(i).is_none_or(|g| g >= dt * (1.0 - 1e-12)));
    let per_agent_max = traj.event_steps.iter().map(Vec::len).max().unwrap_or(0) as u64;
    let total = traj.total_events();
    let (summary, _) = with_tempdir(|d| {
        run_single(&s, VariantKind::EventTriggered, &overrides, None, &d.join("e"), &OracleCache::new()).unwrap()
    });
    let bounds_ok = summary.checkpoints.iter().all(|r| r.regret <= r.regret_bound && r.fit <= r.fit_bound);

    // Trade-off table over an illustrative sigma x iota grid.
    let table = with_tempdir(|d| {
        let plan = ExperimentPlan {
            scenario: "example1".into(),
            variant: VariantKind::EventTriggered,
            out_dir: d.join("sweep"),
            label: "illustrative sigma/iota grid".into(),
            overrides: Overrides::default(),
            sweep: SweepAxes { sigma: Some(vec![0.1, 1.0, 10.0]), iota: Some(vec![0.1, 1.0]), ..SweepAxes::default() },
            checkpoint_step: None,
        };
        let entries = run_experiment(&plan).unwrap();
        let index = std::fs::read_to_string(d.join("sweep").join("index.csv")).unwrap();
        (entries, index.lines().count())
    });
    let (entries, index_lines) = table;
    println!("    sigma   iota      events      regret");
    for e in &entries {
        let r = e.outcome.as_ref().unwrap();
        println!("    {:>5} {:>6} {:>11} {:>11.3}", r.sigma.unwrap(), r.iota.unwrap(), r.events_total, r.regret);
    }
    let table_ok = entries.len() == 6 && entries.iter().all(|e| e.outcome.is_ok()) && index_lines == 7;
    let total_below_steps = total < steps;
    outcome(
        zeno.satisfied() && gaps_ok && per_agent_max < steps && total_below_steps && bounds_ok && table_ok,
        format!(
            "events {total} (max per agent {per_agent_max}) vs {steps} steps and {} agent-steps; gaps >= dt: {gaps_ok}; analytic gap bound held: {}; bounds held: {bounds_ok}; table rows {}",
            n as u64 * steps,
            zeno.satisfied(),
            entries.len()
        ),
    )
}

fn noisy() -> Outcome {
    let s = example1();
    let (entries, _) = with_tempdir(|d| {
        let plan = ExperimentPlan {
            scenario: "example1".into(),
            variant: VariantKind::Noisy,
            out_dir: d.join("mc"),
            label: "monte carlo".into(),
            overrides: Overrides::default(),
            sweep: SweepAxes { seeds: Some(SeedRange { start: 0, count: 20 }), ..SweepAxes::default() },
            checkpoint_step: None,
        };
        let entries = run_experiment(&plan).unwrap();
        let index = std::fs::read_to_string(d.join("mc").join("index.csv")).unwrap();
        (entries, index)
    });
    let runs: Vec<_> = entries.iter().map(|e| e.outcome.as_ref().unwrap()).collect();
    let (mean_regret, mean_fit) = dosim_cli::experiment::monte_carlo_means(&runs);
    let (regret_bound, fit_bound) = (runs[0].regret_bound, runs[0].fit_bound);
    let cfg = s.sim_config(VariantKind::Noisy, &Overrides::default()).unwrap();
    let c = s.network.constants();
    let n = s.network.len() as f64;
    let budget = 0.5 - n * n * c.k_g / (2.0 * cfg.k_mu);
    let ControllerVariant::Noisy { noise } = cfg.variant else { unreachable!() };
    let expected_l1 = noise.expected_l1(s.network.constraint_dim());
    let hypotheses = cfg.k_mu >= n * n * c.k_g && expected_l1 <= budget;

    // Zero noise against the continuous controller at equal seed and gain.
    let mut base = SimConfig::new(5.0, cfg.epsilon, cfg.k_mu, ControllerVariant::Continuous);
    base.seed = 17;
    let mut zero = base.clone();
    zero.variant = ControllerVariant::Noisy { noise: NoiseModel::Zero };
    let a = sim::run(&s.network, &base, &s.x0).unwrap();
    let b = sim::run(&s.network, &zero, &s.x0).unwrap();
    let identical = a.y == b.y && a.mu == b.mu && a.eta == b.eta && a.cost_integral == b.cost_integral && a.constraint_integral == b.constraint_integral;
    outcome(
        hypotheses && mean_regret <= 1.1 * regret_bound && mean_fit <= 1.1 * fit_bound && identical && runs.len() == 20,
        format!(
            "E|eps|_1 {expected_l1} <= {budget}; mean R {mean_regret:.3} vs {regret_bound:.3e}; mean fit {mean_fit:.3} vs {fit_bound:.3e}; zero-noise identical: {identical}"
        ),
    )
}

fn oracle() -> Outcome {
    let toy: Vec<LocalProblem<f64>> = (0..2)
        .map(|_| {
            LocalProblem::new(
                std::sync::Arc::new(QuadraticCost::new(vec![QuadraticTerm { weight: 1.0, amplitude: 0.0, frequency: 0.0, offset: 2.0 }]).unwrap()),
                std::sync::Arc::new(
                    AffineConstraint::new(vec![AffineRow {
                        coefficients: vec![SinusoidalCoefficient::constant(1.0)],
                        offset: SinusoidalCoefficient::constant(-1.0),
                    }])
                    .unwrap(),
                ),
                BoxSet::cube(1, -1.0, 6.0).unwrap(),
            )
            .unwrap()
        })
        .collect();
    let sol = offline_optimum(&toy, 10.0, &OracleOptions::default()).unwrap();
    // Brute force over the grid with spacing 1e-3.
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let m = 7000;
    for a in 0..=m {
        let y1 = -1.0 + 7.0 * a as f64 / m as f64;
        for b in 0..=m {
            let y2 = -1.0 + 7.0 * b as f64 / m as f64;
            if y1 + y2 - 2.0 <= 1e-12 {
                let f = (y1 - 2.0).powi(2) + (y2 - 2.0).powi(2);
                if f < best.0 {
                    best = (f, y1, y2);
                }
            }
        }
    }
    let toy_err = (sol.y_star[0] - best.1).abs().max((sol.y_star[1] - best.2).abs());

    let s = example1();
    let problems = s.problems();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut sols = Vec::new();
    for _ in 0..5 {
        let start = DVector::from_fn(s.network.output_dim(), |_, _| rng.gen_range(-0.9..5.9));
        let opts = OracleOptions { start: Some(start), ..OracleOptions::default() };
        sols.push(offline_optimum(&problems, 50.0, &opts).unwrap());
    }
    let spread = sols.iter().map(|s| (&s.y_star - &sols[0].y_star).amax()).fold(0.0, f64::max);
    let kkt = sols.iter().map(|s| s.kkt_residual).fold(0.0, f64::max);
    outcome(
        toy_err <= 2e-3 && spread <= 1e-4 && kkt <= 1e-6,
        format!("toy error {toy_err:.1e}; restart spread {spread:.1e}; max KKT residual {kkt:.1e}"),
    )
}

fn pev_trend() -> Outcome {
    let s = pev();
    let start = Instant::now();
    let (summary, _) = with_tempdir(|d| {
        run_single(&s, VariantKind::EventTriggered, &Overrides::default(), None, &d.join("pev"), &OracleCache::new()).unwrap()
    });
    let elapsed = start.elapsed();
    let r10 = row_at(&summary.checkpoints, 10.0);
    let r100 = row_at(&summary.checkpoints, 100.0);
    let (rt10, rt100) = (r10.regret / 10.0, r100.regret / 100.0);
    let (ft10, ft100) = (r10.fit / 10.0, r100.fit / 100.0);
    outcome(
        elapsed < Duration::from_secs(300) && rt100 <= 0.5 * rt10 && ft100 <= 0.5 * ft10,
        format!("R/T {rt10:.4} -> {rt100:.4}; F/T {ft10:.4} -> {ft100:.4}; {:.1}s", elapsed.as_secs_f64()),
    )
}

fn self_convergence() -> Outcome {
    let s = example1();
    let final_y = |dt: f64| {
        let mut cfg = s.sim_config(VariantKind::Continuous, &Overrides::default()).unwrap();
        cfg.horizon = 5.0;
        cfg.dt = dt;
        cfg.log_stride = usize::MAX / 2;
        let traj = sim::run(&s.network, &cfg, &s.x0).unwrap();
        let y: Vec<f64> = traj.y.last().unwrap().iter().flat_map(|v| v.iter().copied()).collect();
        DVector::from_vec(y)
    };
    let (a, b, c) = (final_y(1e-3), final_y(5e-4), final_y(2.5e-4));
    let (e1, e2) = ((&a - &b).norm(), (&b - &c).norm());
    let ratio = e1 / e2;
    outcome(
        (1.5..=3.0).contains(&ratio),
        format!("|y_dt - y_dt/2| {e1:.4}, |y_dt/2 - y_dt/4| {e2:.4}, ratio {ratio:.3} (dt = 1e-3)"),
    )
}

fn determinism() -> Outcome {
    let s = example1();
    let files = ["trajectory.csv", "metrics.csv", "bounds.json"];
    let mut same = true;
    with_tempdir(|d| {
        for (kind, seed) in [(VariantKind::EventTriggered, 3), (VariantKind::Noisy, 5)] {
            let o = Overrides { horizon: Some(10.0), seed: Some(seed), ..Overrides::default() };
            run_single(&s, kind, &o, None, &d.join("a"), &OracleCache::new()).unwrap();
            run_single(&s, kind, &o, None, &d.join("b"), &OracleCache::new()).unwrap();
            for f in files {
                same &= std::fs::read(d.join("a").join(f)).unwrap() == std::fs::read(d.join("b").join(f)).unwrap();
            }
        }
    });
    outcome(same, format!("artifacts byte-identical: {same}"))
}

fn main() {
    let mut rows = Vec::new();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |k: usize, name: &'static str, o: Outcome| {
        println!("criterion {k:>2} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((k, name, o));
    };
    record(1, "regulator equations", regulator());
    record(2, "stability synthesis and certificate", stability());
    record(3, "projection properties", projection());
    record(4, "subgradients vs finite differences", subgradients());
    record(5, "continuous bounds on the example1 scenario", continuous_bounds(&mut rows));
    record(6, "constant regret and shrinking F/sqrt(T)", constant_regret(&rows));
    record(7, "event-triggered bounds, inter-event times, event count", event_triggered());
    record(8, "noisy Monte Carlo bounds and zero-noise identity", noisy());
    record(9, "offline oracle", oracle());
    record(10, "PEV decay trend", pev_trend());
    record(11, "Euler self-convergence", self_convergence());
    record(12, "determinism", determinism());
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    for (k, name, _) in results.iter().filter(|r| !r.2.pass) {
        println!("  failing: criterion {k} ({name})");
    }
    if passed < results.len() && std::env::var_os("DOSIM_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
