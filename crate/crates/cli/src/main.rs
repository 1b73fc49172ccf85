use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dosim::oracle::OracleCache;
use dosim_cli::experiment::{run_experiment, run_single, solve_offline, ExperimentPlan};
use dosim_cli::scenario::{resolve_scenario, to_toml, Overrides, Scenario, VariantKind};
use dosim_cli::CliResult;

#[derive(Parser)]
#[command(name = "dosim", version, about = "Distributed online optimization over linear multi-agent networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration and write trajectory, metrics and bounds.
    Run {
        /// Built-in name (example1, example2-pev) or scenario file.
        #[arg(long, default_value = "example1")]
        scenario: String,
        #[arg(long, value_enum, default_value = "continuous")]
        variant: VariantKind,
        /// Horizon in seconds.
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long = "k-mu")]
        k_mu: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        iota: Option<f64>,
        /// Half-width of the uniform link noise.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "log-stride")]
        log_stride: Option<usize>,
        #[arg(long = "checkpoint-step")]
        checkpoint_step: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every grid point of an experiment plan.
    Sweep {
        #[arg(long)]
        plan: PathBuf,
    },
    /// Load and validate a scenario, printing its gain conditions.
    Validate {
        #[arg(long)]
        scenario: String,
    },
    /// Compute the offline optimum at the scenario checkpoints.
    Oracle {
        #[arg(long, default_value = "example1")]
        scenario: String,
        #[arg(long = "grid-k")]
        grid_k: Option<usize>,
        #[arg(long = "T")]
        horizon: Option<f64>,
        /// Write the solutions as JSON instead of printing them.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a scenario in the file format.
    Dump {
        #[arg(long)]
        scenario: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Run { scenario, variant, horizon, dt, epsilon, k_mu, sigma, iota, noise, seed, log_stride, checkpoint_step, out } => {
            let scenario = Scenario::build(resolve_scenario(&scenario)?)?;
            let overrides = Overrides { horizon, dt, epsilon, k_mu, sigma, iota, noise_half_width: noise, seed, log_stride };
            let (s, artifacts) = run_single(&scenario, variant, &overrides, checkpoint_step, &out, &OracleCache::new())?;
            println!("run {} ({})", s.config_hash, variant.as_str());
            println!("{:>8} {:>14} {:>14} {:>14} {:>14} {:>10}", "T", "regret", "bound", "fit", "bound", "events");
            for r in &s.checkpoints {
                println!(
                    "{:>8} {:>14.6} {:>14.6} {:>14.6} {:>14.6} {:>10}",
                    r.horizon, r.regret, r.regret_bound, r.fit, r.fit_bound, r.events_total
                );
            }
            if !s.certified {
                println!("note: gain conditions for certified bounds do not hold; bounds are informational");
            }
            println!("wrote {}", artifacts.dir.display());
            Ok(())
        }
        Command::Sweep { plan } => {
            let plan = ExperimentPlan::load(&plan)?;
            let entries = run_experiment(&plan)?;
            let failed = entries.iter().filter(|e| e.outcome.is_err()).count();
            println!("{} runs, {} failed; index at {}", entries.len(), failed, plan.out_dir.join("index.csv").display());
            for e in entries.iter().filter_map(|e| e.outcome.as_ref().err().map(|err| (e, err))) {
                println!("  {}: {}", e.0.run_id, e.1);
            }
            Ok(())
        }
        Command::Validate { scenario } => {
            let scenario = Scenario::build(resolve_scenario(&scenario)?)?;
            let c = scenario.network.constants();
            println!("scenario {}: {} agents, {} edges", scenario.spec.name, scenario.network.len(), scenario.network.graph().edge_count());
            println!("K_f = {}, K_g = {}, K_df = {}, l = {}", c.k_f, c.k_g, c.k_df, c.strong_convexity);
            for kind in [VariantKind::Continuous, VariantKind::EventTriggered, VariantKind::Noisy] {
                let cfg = scenario.sim_config(kind, &Overrides::default())?;
                for check in &scenario.gain_report(&cfg).checks {
                    println!(
                        "  [{}] {:<16} {:<28} required {:<12} actual {:<12} {}",
                        if check.passed { "ok" } else if check.hard { "FAIL" } else { "warn" },
                        kind.as_str(),
                        check.rule,
                        check.required,
                        check.actual,
                        if check.hard { "hard" } else { "soft" }
                    );
                }
            }
            Ok(())
        }
        Command::Oracle { scenario, grid_k, horizon, out } => {
            let mut spec = resolve_scenario(&scenario)?;
            if let Some(k) = grid_k {
                spec.simulation.grid_k = k;
            }
            if let Some(h) = horizon {
                spec.simulation.horizon = h;
            }
            let scenario = Scenario::build(spec)?;
            let hs = dosim::metrics::checkpoints(scenario.spec.simulation.horizon, scenario.spec.simulation.checkpoint_step);
            let sols = solve_offline(&scenario, &hs, &OracleCache::new())?;
            let rows: Vec<serde_json::Value> = hs
                .iter()
                .zip(&sols)
                .map(|(h, s)| {
                    serde_json::json!({
                        "horizon": h,
                        "y_star": s.y_star.iter().collect::<Vec<_>>(),
                        "kkt_residual": s.kkt_residual,
                        "feasibility_margin": s.feasibility_margin,
                        "objective": s.objective,
                        "iterations": s.iterations,
                    })
                })
                .collect();
            let text = serde_json::to_string_pretty(&rows)?;
            match out {
                Some(path) => std::fs::write(path, text + "\n")?,
                None => println!("{text}"),
            }
            Ok(())
        }
        Command::Dump { scenario } => {
            print!("{}", to_toml(&resolve_scenario(&scenario)?)?);
            Ok(())
        }
    }
}

