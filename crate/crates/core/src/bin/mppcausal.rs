use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mppcausal::cli::{self, Method, RunOptions};

#[derive(Parser)]
#[command(
    name = "mppcausal",
    version,
    about = "Interventions on marked point processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw observed and potential trajectories.
    Simulate(Common),
    /// Estimate the intervened mean.
    Estimate(Common),
    /// Exact values for a discrete scenario.
    Oracle(Common),
    /// Dump weight paths of observed draws.
    Weights(Common),
    /// Regularity, predictability and positivity checks.
    Check(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Ipw,
    Gformula,
    Joint,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, value_enum, default_value = "ipw")]
    method: MethodArg,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dump_weights: bool,
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("report serializes")
    );
}

fn run(command: Command) -> mppcausal::Result<bool> {
    let common = match &command {
        Command::Simulate(c)
        | Command::Estimate(c)
        | Command::Oracle(c)
        | Command::Weights(c)
        | Command::Check(c) => c,
    };
    let opts = RunOptions {
        config: common.config.clone(),
        seed: common.seed,
        n: common.n,
        t: common.t,
        method: match common.method {
            MethodArg::Ipw => Method::Ipw,
            MethodArg::Gformula => Method::Gformula,
            MethodArg::Joint => Method::Joint,
        },
        out: common.out.clone(),
        dump_weights: common.dump_weights,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads.unwrap_or(0))
        .build()
        .map_err(|e| mppcausal::Error::Config(e.to_string()))?;
    pool.install(|| match command {
        Command::Simulate(_) => cli::cmd_simulate(&opts).map(|_| true),
        Command::Estimate(_) => cli::cmd_estimate(&opts).map(|r| {
            print_json(&r);
            true
        }),
        Command::Oracle(_) => cli::cmd_oracle(&opts).map(|r| {
            print_json(&r);
            r.cross_check.ok
        }),
        Command::Weights(_) => cli::cmd_weights(&opts).map(|r| {
            print_json(&r);
            true
        }),
        Command::Check(_) => cli::cmd_check(&opts).map(|r| {
            print_json(&r);
            r.ok
        }),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
