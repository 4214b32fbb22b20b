use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use shmpc_cli::commands::{self, exit, parse_p_orders, parse_risk_policy, Overrides};
use shmpc_cli::{check_report, cmd_run, dump_scenario, load_scenario};
use shmpc_core::chance::RiskPolicy;
use shmpc_core::shmpc::{Fallback, Mode};

#[derive(Parser)]
#[command(name = "shmpc", version, about = "Shrinking-horizon MPC under STL chance constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write a report directory.
    Run {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Comma-separated even moment orders, e.g. `2,4,8`.
        #[arg(long, value_parser = parse_p_orders)]
        p_order: Option<Vec<u32>>,
        /// `uniform` or `weights:w0,w1,...`.
        #[arg(long, value_parser = parse_risk_policy)]
        risk_policy: Option<RiskPolicy>,
        #[arg(long, value_enum)]
        fallback: Option<FallbackArg>,
        #[arg(long, value_enum)]
        noise: Option<Switch>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print horizons, the decomposition audit tree, form sizes, risk split and big-Ms.
    Check { scenario: PathBuf },
    /// Print the scenario as normalized JSON.
    Dump { scenario: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Shmpc,
    Openloop,
}

#[derive(Clone, Copy, ValueEnum)]
enum FallbackArg {
    Terminate,
    HoldPrevious,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

fn execute(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Run {
            scenario,
            mode,
            runs,
            seed,
            delta,
            p_order,
            risk_policy,
            fallback,
            noise,
            out,
        } => {
            let overrides = Overrides {
                mode: mode.map(|m| match m {
                    ModeArg::Shmpc => Mode::Shmpc,
                    ModeArg::Openloop => Mode::OpenLoop,
                }),
                runs,
                seed,
                delta,
                p_orders: p_order,
                risk_policy,
                fallback: fallback.map(|f| match f {
                    FallbackArg::Terminate => Fallback::Terminate,
                    FallbackArg::HoldPrevious => Fallback::HoldPrevious,
                }),
                noise: noise.map(|s| matches!(s, Switch::On)),
                out,
            };
            let sc = overrides.apply(&load_scenario(&scenario)?)?;
            let outcome = cmd_run(&sc)?;
            println!("{}", commands::summary_line(&outcome.summary.summary));
            Ok(outcome.exit_code)
        }
        Command::Check { scenario } => {
            let (text, infeasible) = check_report(&load_scenario(&scenario)?)?;
            print!("{text}");
            Ok(if infeasible { exit::INFEASIBLE } else { exit::OK })
        }
        Command::Dump { scenario } => {
            print!("{}", dump_scenario(&load_scenario(&scenario)?.file));
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SHMPC_LOG", "warn")).init();
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            commands::exit_code_of(&e)
        }
    };
    ExitCode::from(code as u8)
}
