use std::path::PathBuf;

use adherence_core::envs::Environment;
use adherence_core::{AlphaSchedule, EpsilonSchedule};
use adherence_harness::config::{parse_approaches, parse_grid, parse_seeds};
use adherence_harness::run::ConvergenceSummary;
use adherence_harness::{oracle_report, run_comparison, run_convergence, run_theta_sweep, write_run};
use adherence_harness::{ComparisonSummary, ExperimentConfig, LearnerSettings};
use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "ADHERENCE_OUT";

#[derive(Parser)]
#[command(name = "adherence", version, about = "Adherence-aware Q-learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace the initial-state value estimate during training.
    Converge(Common),
    /// Train each approach and compare the actual laws they induce.
    Compare(Common),
    /// Repeat the comparison over a grid of adherence levels.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `start:stop:step` or a comma list.
        #[arg(long, default_value = "0:1:0.1")]
        theta_grid: String,
    },
    /// Solve the adherence-aware planning problem exactly.
    Oracle {
        #[arg(long, default_value = "machine_replacement")]
        env: String,
        #[arg(long, default_value_t = 0.7)]
        theta: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Serve live sessions over HTTP and WebSocket.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Directory for session snapshots.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlphaMode {
    Constant,
    Polynomial,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Paper,
}

#[derive(Args, Clone)]
struct Common {
    /// Preset (`machine_replacement`, `inventory`, `inventory_small`) or MDP file.
    #[arg(long, default_value = "machine_replacement")]
    env: String,
    #[arg(long, default_value_t = 0.7)]
    theta: f64,
    #[arg(long)]
    steps: Option<usize>,
    /// A count (`20`), a range (`5..10`) or a list (`1,4,9`).
    #[arg(long, default_value = "20")]
    seeds: String,
    /// Step size for constant mode, exponent ω for polynomial mode.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    alpha_mode: Option<AlphaMode>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Decay scale k for `ε₀ / (1 + step / k)`; constant ε if absent.
    #[arg(long)]
    epsilon_decay: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    initial_q: f64,
    #[arg(long, default_value = "adherence_aware,classical_q,baseline_only")]
    approaches: String,
    /// Evaluation rollouts per actual law.
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 200)]
    horizon: usize,
    #[arg(long)]
    log_every: Option<usize>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Output directory; defaults to `$ADHERENCE_OUT/<command>` or `results/<command>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock milliseconds (makes the CSV run-dependent).
    #[arg(long)]
    timing: bool,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let paper = matches!(self.preset, Some(Preset::Paper));
        let mut learner = if paper {
            LearnerSettings::paper()
        } else {
            LearnerSettings::default()
        };
        let mode = self.alpha_mode.unwrap_or(if paper {
            AlphaMode::Constant
        } else {
            AlphaMode::Polynomial
        });
        learner.alpha = match mode {
            AlphaMode::Constant => AlphaSchedule::Constant {
                alpha: self.alpha.unwrap_or(0.9),
            },
            AlphaMode::Polynomial => AlphaSchedule::Polynomial {
                omega: self.alpha.unwrap_or(0.85),
            },
        };
        let epsilon = self.epsilon.unwrap_or(0.1);
        learner.epsilon = match self.epsilon_decay {
            Some(scale) => EpsilonSchedule::Decaying {
                initial: epsilon,
                scale,
            },
            None => EpsilonSchedule::Constant { epsilon },
        };
        learner.initial_q = self.initial_q;
        let default_steps = match (paper, self.env.as_str()) {
            (true, "machine_replacement" | "machine") => 100,
            _ => 10_000,
        };
        let config = ExperimentConfig {
            env: self.env.clone(),
            theta_true: self.theta,
            approaches: parse_approaches(&self.approaches)?,
            steps: self.steps.unwrap_or(default_steps),
            episodes: self.episodes,
            rollout_horizon: self.horizon,
            seeds: parse_seeds(&self.seeds)?,
            learner,
            log_every: self.log_every,
            timing: self.timing,
            ..ExperimentConfig::default()
        };
        config.validate()?;
        Ok(config)
    }

    fn out_dir(&self, command: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| {
            let base = std::env::var_os(OUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("results"));
            base.join(command)
        })
    }
}

fn print_comparison(summary: &ComparisonSummary) {
    println!("theta {}: baseline {:.6}", summary.theta_true, summary.baseline_value);
    if let Some(v) = summary.oracle_value {
        println!("  oracle {v:.6}");
    }
    for s in &summary.approaches {
        println!(
            "  {} mean {:.6} (se {:.6})",
            s.approach, s.mean_exact, s.std_error_exact
        );
    }
    for d in &summary.differences {
        println!(
            "  {} - {}: {:.6} [{:.6}, {:.6}]",
            d.better, d.worse, d.interval.mean, d.interval.lower, d.interval.upper
        );
    }
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
}

fn print_convergence(summary: &ConvergenceSummary) {
    match summary.oracle_value {
        Some(v) => println!("oracle initial-state value {v:.6}"),
        None => println!("oracle unavailable"),
    }
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Converge(common) => {
            let config = common.config()?;
            let out = run_convergence(&config)?;
            let path = write_run(
                &common.out_dir("converge"),
                "converge",
                &config,
                &out.records,
                &out.summary,
            )?;
            print_convergence(&out.summary);
            println!("wrote {}", path.display());
        }
        Command::Compare(common) => {
            let config = common.config()?;
            if config.approaches.len() < 2 {
                bail!("a comparison needs at least two approaches");
            }
            let out = run_comparison(&config)?;
            let path = write_run(
                &common.out_dir("compare"),
                "compare",
                &config,
                &out.records,
                &out.summary,
            )?;
            print_comparison(&out.summary);
            println!("wrote {}", path.display());
        }
        Command::Sweep { common, theta_grid } => {
            let mut config = common.config()?;
            config.theta_grid = Some(parse_grid(&theta_grid)?);
            let out = run_theta_sweep(&config)?;
            let path = write_run(&common.out_dir("sweep"), "sweep", &config, &out.records, &out.summary)?;
            for summary in &out.summary {
                print_comparison(summary);
            }
            println!("wrote {}", path.display());
        }
        Command::Oracle { env, theta, tol } => {
            let env = Environment::resolve(&env)?;
            let report = oracle_report(&env, theta, tol)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Serve { addr, data_dir } => {
            adherence_session::serve_blocking(&addr, data_dir)?;
        }
    }
    Ok(())
}
