use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use risbench::config::ExperimentSpec;
use risbench::emit::{to_csv, to_json};
use risbench::experiment::{run_experiment, run_quantize_study, scaling_study, ResultTable};
use risbench::suites;

#[derive(Parser)]
#[command(name = "risbench", about = "Benchmark sweeps for the phase-optimization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file.
    Run(RunArgs),
    /// Run a sweep over surface sizes and report log-log wall-time slopes.
    Scale(RunArgs),
    /// Solve continuously, quantize to each level count in the grid, and
    /// report the re-fitted objectives.
    QuantizeStudy(RunArgs),
    /// Run reduced-size self-checks against the independent oracles.
    OracleCheck {
        /// Instances per check (default keeps the run under a minute).
        #[arg(long, default_value_t = 20)]
        instances: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment spec (key = value lines under [section] headers).
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for the sweep (default: all cores). Output order and
    /// content are identical regardless.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the base seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => sweep(args, run_experiment),
        Command::Scale(args) => {
            let spec = load_spec(&args)?;
            let result = in_pool(args.threads, || scaling_study(&spec))?;
            for (method, slope) in &result.slopes {
                match slope {
                    Some(s) => eprintln!("slope {method} {s:.4}"),
                    None => eprintln!("slope {method} absent"),
                }
            }
            write_table(&args, &result.table)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::QuantizeStudy(args) => sweep(args, run_quantize_study),
        Command::OracleCheck { instances } => {
            let outcomes = [
                suites::gradient_suite(instances),
                suites::oracle_suite(instances),
                suites::discrete_suite(instances, instances.min(5)),
                suites::subproblem_suite(instances),
            ];
            let mut all_passed = true;
            for o in &outcomes {
                println!("{}", o.line());
                all_passed &= o.passed;
            }
            Ok(if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn load_spec(args: &RunArgs) -> anyhow::Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::from_path(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        spec.base_seed = seed;
    }
    Ok(spec)
}

fn sweep(
    args: RunArgs,
    run: fn(&ExperimentSpec) -> anyhow::Result<ResultTable>,
) -> anyhow::Result<ExitCode> {
    let spec = load_spec(&args)?;
    let table = in_pool(args.threads, || run(&spec))?;
    write_table(&args, &table)?;
    // Per-row failures are rows with a failure status, not process errors:
    // the sweep completed.
    Ok(ExitCode::SUCCESS)
}

fn in_pool<T>(
    threads: Option<usize>,
    work: impl FnOnce() -> anyhow::Result<T> + Send,
) -> anyhow::Result<T>
where
    T: Send,
{
    match threads {
        None => work(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building thread pool")?;
            pool.install(work)
        }
    }
}

fn write_table(args: &RunArgs, table: &ResultTable) -> anyhow::Result<()> {
    let text = match args.format {
        Format::Csv => to_csv(table),
        Format::Json => to_json(table),
    };
    match &args.out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .context("writing to stdout")?,
    }
    Ok(())
}
