use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tcplan::qp_build::SafetyMode;
use tcplan_cli::commands::{
    format_bench, format_table, run_bench, run_compare, run_plan, BenchArgs, BenchSource,
    CommandError, CompareArgs, PlanArgs,
};
use tcplan_cli::exit;

#[derive(Parser)]
#[command(
    name = "tcplan",
    version,
    about = "Speed planning with trapezoidal Bezier corridors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one scenario and write profile, corridor and metrics CSVs.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Tc)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        sample_dt: f64,
    },
    /// Solve a scenario with rectangular and trapezoidal corridors.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the planner over a directory of scenarios or random ones.
    Bench(BenchCli),
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["dir", "seed"]))]
struct BenchCli {
    #[arg(long)]
    dir: Option<PathBuf>,
    #[arg(long, requires = "count")]
    seed: Option<u64>,
    #[arg(long, requires = "seed")]
    count: Option<usize>,
    #[arg(long, default_value_t = 1)]
    reps: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Tc,
    Rc,
}

fn run(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Plan {
            scenario,
            mode,
            out,
            sample_dt,
        } => {
            let mode = match mode {
                Mode::Tc => SafetyMode::Trapezoidal,
                Mode::Rc => SafetyMode::Rectangular,
            };
            let summary = run_plan(&PlanArgs {
                scenario,
                mode,
                out,
                sample_dt,
            })?;
            println!("{summary}");
        }
        Command::Compare { scenario, out } => {
            let rows = run_compare(&CompareArgs { scenario, out })?;
            print!("{}", format_table(&rows));
            for row in &rows {
                if let Err(reason) = &row.values {
                    eprintln!("{}: {reason}", row.mode);
                }
            }
        }
        Command::Bench(b) => {
            let source = match (b.dir, b.seed, b.count) {
                (Some(dir), _, _) => BenchSource::Dir(dir),
                (None, Some(seed), Some(count)) => BenchSource::Seed { seed, count },
                _ => {
                    return Err(CommandError::Usage(
                        "bench needs --dir or --seed with --count".into(),
                    ))
                }
            };
            let summary = run_bench(&BenchArgs {
                source,
                reps: b.reps,
            })?;
            print!("{}", format_bench(&summary));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            let err = anyhow::Error::new(e);
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<CommandError>()
                .map_or(exit::INTERNAL, CommandError::exit_code);
            ExitCode::from(code)
        }
    }
}
