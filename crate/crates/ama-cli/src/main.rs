use ama_cli::config::{Overrides, ScenarioFile};
use ama_cli::run::{run_bench_suite, run_single, run_sweep, SweepAxis};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;

/// Near-field swarm-antenna placement and trajectory optimization.
#[derive(Parser)]
#[command(name = "ama", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Scenario description file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for the result bundle.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the generator seed (also seeds the random benchmark).
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides solver.eps1 (first-stage stopping threshold).
    #[arg(long)]
    eps1: Option<f64>,
    /// Overrides solver.eps2 (alternating-stage stopping threshold).
    #[arg(long)]
    eps2: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy)]
enum AxisArg {
    /// Transmit power of every terminal, in dBm.
    #[value(name = "power_dbm")]
    PowerDbm,
    /// Number of terminals (generator count or explicit-list prefix).
    #[value(name = "K")]
    K,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Swept parameter.
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Comma-separated, strictly increasing values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form placement of one or two antennas for a single terminal.
    PlaceSingle(RunArgs),
    /// Interference-nulling pair placement for exactly two terminals.
    PlaceTwoUeHyperbola(RunArgs),
    /// Joint placement of all antennas for one terminal.
    PlaceJoint(RunArgs),
    /// One-at-a-time placement for one terminal.
    PlaceSuccessive(RunArgs),
    /// Full-horizon trajectory optimization for one terminal.
    TrajSingleSca(RunArgs),
    /// Coverage-only multi-terminal trajectory (max-min average SNR).
    TrajMaxminSnr(RunArgs),
    /// Two-stage multi-terminal max-min rate optimization.
    TrajAltopt(RunArgs),
    /// Spacing-ring placement benchmark.
    BenchCircularPlace(RunArgs),
    /// Rotating-ring trajectory benchmark.
    BenchCircularTraj(RunArgs),
    /// Every applicable method on one scenario, with a comparison summary.
    BenchSuite(RunArgs),
    /// bench-suite at each value of a swept parameter.
    Sweep(SweepArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::PlaceSingle(_) => "place-single",
            Command::PlaceTwoUeHyperbola(_) => "place-two-ue-hyperbola",
            Command::PlaceJoint(_) => "place-joint",
            Command::PlaceSuccessive(_) => "place-successive",
            Command::TrajSingleSca(_) => "traj-single-sca",
            Command::TrajMaxminSnr(_) => "traj-maxmin-snr",
            Command::TrajAltopt(_) => "traj-altopt",
            Command::BenchCircularPlace(_) => "bench-circular-place",
            Command::BenchCircularTraj(_) => "bench-circular-traj",
            Command::BenchSuite(_) => "bench-suite",
            Command::Sweep(_) => "sweep",
        }
    }

    fn run_args(&self) -> &RunArgs {
        match self {
            Command::PlaceSingle(a)
            | Command::PlaceTwoUeHyperbola(a)
            | Command::PlaceJoint(a)
            | Command::PlaceSuccessive(a)
            | Command::TrajSingleSca(a)
            | Command::TrajMaxminSnr(a)
            | Command::TrajAltopt(a)
            | Command::BenchCircularPlace(a)
            | Command::BenchCircularTraj(a)
            | Command::BenchSuite(a) => a,
            Command::Sweep(s) => &s.run,
        }
    }
}

/// What a failed invocation prints to stderr (TOML, machine-readable).
#[derive(Serialize)]
struct ErrorRecord<'a> {
    command: &'a str,
    error: String,
}

fn dispatch(cli: &Cli) -> anyhow::Result<()> {
    let args = cli.command.run_args();
    let file = ScenarioFile::load(&args.scenario)?;
    let ov = Overrides { seed: args.seed, eps1: args.eps1, eps2: args.eps2 };
    match &cli.command {
        Command::BenchSuite(_) => {
            let rows = run_bench_suite(&file, &ov, &args.out)?;
            for (label, rate) in rows {
                println!("{label}: min_average_rate = {rate:.8e}");
            }
        }
        Command::Sweep(s) => {
            let axis = match s.axis {
                AxisArg::PowerDbm => SweepAxis::PowerDbm,
                AxisArg::K => SweepAxis::TerminalCount,
            };
            run_sweep(&file, &ov, &args.out, axis, &s.values)?;
            println!("wrote {}", args.out.join("sweep.csv").display());
        }
        other => {
            let b = run_single(other.name(), &file, &ov, &args.out)?;
            println!("min_average_rate = {:.8e}", b.rates.min_average);
        }
    }
    println!("bundle: {}", args.out.display());
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(&cli) {
        let record = ErrorRecord { command: cli.command.name(), error: format!("{e:#}") };
        eprint!("{}", toml::to_string(&record).unwrap_or_else(|_| format!("error = {e:#?}\n")));
        std::process::exit(1);
    }
}
