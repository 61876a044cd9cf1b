use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polyak_lab::cli::{self, CliError, ConfigError, ExperimentConfig, ExperimentKind, PlotSpec};

#[derive(Parser)]
#[command(name = "polyak-lab", version, about = "Polyak-stepsize gradient descent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single optimizer run, writes trace.csv
    Run(ExperimentArgs),
    /// Worst-case sweep against the smooth lower bound, writes worstcase.csv
    Worstcase(ExperimentArgs),
    /// Spectral radius of the two-step map, writes dynamics.csv
    Dynamics(ExperimentArgs),
    /// Floating-point escape from the period-2 orbit, writes escape.csv
    Escape(ExperimentArgs),
    /// Closed-form bound table, writes bounds.csv
    Bounds(ExperimentArgs),
    /// Rate exponents from worst-case gaps, writes rates.csv and rates_fit.csv
    Rates(ExperimentArgs),
    /// Stochastic Polyak ensemble on interpolated least squares, writes stochastic.csv
    Stochastic(ExperimentArgs),
    /// Sampled certificates of regularity constants, writes certify.csv
    Certify(ExperimentArgs),
    /// Render columns of a CSV file as an SVG line chart
    Plot(PlotArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Config file with `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the `seed` key
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress the summary line
    #[arg(long)]
    quiet: bool,
    /// Extra `key=value` parameters, applied after the config file
    overrides: Vec<String>,
}

#[derive(Args)]
struct PlotArgs {
    /// Input CSV file
    #[arg(long)]
    csv: PathBuf,
    /// Column for the horizontal axis
    #[arg(long)]
    x: String,
    /// Comma-separated columns to draw
    #[arg(long, value_delimiter = ',', required = true)]
    y: Vec<String>,
    #[arg(long)]
    logx: bool,
    #[arg(long)]
    logy: bool,
    /// Output directory; the chart is named after the CSV file
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    quiet: bool,
}

fn load_config(kind: ExperimentKind, args: &ExperimentArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let cfg = ExperimentConfig::parse(&text)?;
            if cfg.kind != kind {
                return Err(ConfigError::new(
                    cfg.line_of("kind"),
                    "kind",
                    format!("config is '{}' but the subcommand is '{}'", cfg.kind.as_str(), kind.command()),
                )
                .into());
            }
            cfg
        }
        None => ExperimentConfig::empty(kind),
    };
    for o in &args.overrides {
        cfg.set_override(o)?;
    }
    if let Some(seed) = args.seed {
        if kind.uses_seed() {
            cfg.set("seed", &seed.to_string());
        } else if !args.quiet {
            eprintln!("note: {} is deterministic, --seed ignored", kind.command());
        }
    }
    Ok(cfg)
}

fn experiment(kind: ExperimentKind, args: &ExperimentArgs) -> Result<(), CliError> {
    let cfg = load_config(kind, args)?;
    let art = cli::run_experiment(&cfg, &args.out)?;
    if !args.quiet {
        for line in &art.summary {
            println!("{line}");
        }
    }
    Ok(())
}

fn plot(args: &PlotArgs) -> Result<(), CliError> {
    let spec = PlotSpec {
        x: args.x.clone(),
        y: args.y.clone(),
        log_x: args.logx,
        log_y: args.logy,
    };
    let stem = args.csv.file_stem().map_or("plot".into(), |s| s.to_string_lossy().into_owned());
    fs::create_dir_all(&args.out).map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
    let out = args.out.join(format!("{stem}.svg"));
    cli::plot(&args.csv, &spec, &out)?;
    if !args.quiet {
        println!("plot: wrote {}", out.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => experiment(ExperimentKind::Run, a),
        Command::Worstcase(a) => experiment(ExperimentKind::WorstcaseSweep, a),
        Command::Dynamics(a) => experiment(ExperimentKind::DynamicsScan, a),
        Command::Escape(a) => experiment(ExperimentKind::Escape, a),
        Command::Bounds(a) => experiment(ExperimentKind::BoundsTable, a),
        Command::Rates(a) => experiment(ExperimentKind::Rates, a),
        Command::Stochastic(a) => experiment(ExperimentKind::Stochastic, a),
        Command::Certify(a) => experiment(ExperimentKind::Certify, a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
