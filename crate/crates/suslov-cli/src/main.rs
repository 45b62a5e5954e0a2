//! Command line front end for the suslov library: trajectory runs,
//! two-method comparisons, one-step consistency studies, and gnuplot
//! script emission.
//!
//! CSV data goes to the configured output path, or to standard output
//! when no path is set; human-readable summaries go to the other stream
//! so piping the CSV stays clean. Exit codes: 0 on success, 1 on failed
//! order assertions or other errors, 2 on configuration errors, 3 on
//! solver failures, 4 on order-fit failures.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use suslov::config::{load_config, Method, RunConfig};
use suslov::consistency::log_spaced_grid;
use suslov::sim::{
    check_expected_orders, compare, consistency_study, emit_plot_script_for_csv, plot_script_path,
    run,
};
use suslov::{Error, Result};

#[derive(Parser)]
#[command(
    name = "suslov",
    version,
    about = "Structure-preserving integrators for a rigid body with a suppressed angular velocity component"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write its CSV.
    Run(RunArgs),
    /// Integrate the same initial data with two methods; write a merged CSV.
    Compare(CompareArgs),
    /// Measure one-step errors over a step-size grid and fit their orders.
    Consistency(ConsistencyArgs),
    /// Write the gnuplot script matching an existing CSV.
    PlotScripts(PlotScriptsArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Config file of key = value lines; flags override its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Step size, seconds.
    #[arg(long, value_name = "X")]
    eps: Option<f64>,
    /// Final time, seconds.
    #[arg(long, value_name = "X")]
    t_final: Option<f64>,
    /// CSV destination; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

impl CommonArgs {
    /// Layer this invocation's flags over the config file (or the built-in
    /// default experiment when no file is given).
    fn effective_config(&self, method: Option<&str>) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default_experiment(),
        };
        if let Some(name) = method {
            config.method = name.parse()?;
        }
        if let Some(eps) = self.eps {
            config.eps = eps;
        }
        if let Some(t_final) = self.t_final {
            config.t_final = t_final;
        }
        if let Some(out) = &self.out {
            config.out = Some(out.clone());
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Integration method: midpoint, variational, or rk4.
    #[arg(long, value_name = "NAME")]
    method: Option<String>,
    /// Also write a gnuplot script next to the CSV (needs an output path).
    #[arg(long)]
    plots: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// First method; defaults to the configured one.
    #[arg(long, value_name = "NAME")]
    method_a: Option<String>,
    /// Second method.
    #[arg(long, value_name = "NAME")]
    method_b: String,
}

#[derive(Args)]
struct ConsistencyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Integration method: midpoint, variational, or rk4.
    #[arg(long, value_name = "NAME")]
    method: Option<String>,
    /// Smallest step size in the grid.
    #[arg(long, value_name = "X", default_value_t = 10f64.powf(-3.5))]
    eps_min: f64,
    /// Largest step size in the grid.
    #[arg(long, value_name = "X", default_value_t = 10f64.powf(-1.5))]
    eps_max: f64,
    /// Number of log-spaced step sizes.
    #[arg(long, value_name = "N", default_value_t = 8)]
    eps_count: usize,
    /// Exit nonzero unless every fitted order matches the scheme's theory.
    #[arg(long = "assert")]
    assert_orders: bool,
}

#[derive(Args)]
struct PlotScriptsArgs {
    /// CSV written by `run` or `compare`.
    #[arg(value_name = "CSV")]
    csv: PathBuf,
    /// Script destination; defaults to the CSV path with extension `gp`.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run(args) => run_cmd(args),
        Command::Compare(args) => compare_cmd(args),
        Command::Consistency(args) => consistency_cmd(args),
        Command::PlotScripts(args) => plot_scripts_cmd(args),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config { .. } | Error::Csv { .. } => 2,
        Error::NonConvergence { .. } | Error::SingularJacobian { .. } => 3,
        Error::Fit { .. } => 4,
        _ => 1,
    }
}

/// Print a summary without dirtying a CSV that went to standard output.
fn print_summary(csv_on_stdout: bool, text: &str) {
    if csv_on_stdout {
        eprintln!("{text}");
    } else {
        println!("{text}");
    }
}

fn run_cmd(args: RunArgs) -> Result<ExitCode> {
    let mut config = args.common.effective_config(args.method.as_deref())?;
    if args.plots {
        config.emit_plots = true;
    }
    let csv_on_stdout = config.out.is_none();
    let report = run(&config)?;
    print_summary(csv_on_stdout, &report.to_string());
    Ok(ExitCode::SUCCESS)
}

fn compare_cmd(args: CompareArgs) -> Result<ExitCode> {
    let base = args.common.effective_config(None)?;
    let mut config_a = base.clone();
    if let Some(name) = &args.method_a {
        config_a.method = name.parse()?;
    }
    let mut config_b = base.clone();
    config_b.method = args.method_b.parse()?;
    let report = match &base.out {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            let report = compare(&config_a, &config_b, &mut out)?;
            out.flush()?;
            report
        }
        None => compare(&config_a, &config_b, &mut io::stdout().lock())?,
    };
    print_summary(base.out.is_none(), &report.to_string());
    Ok(ExitCode::SUCCESS)
}

fn consistency_cmd(args: ConsistencyArgs) -> Result<ExitCode> {
    let config = args.common.effective_config(args.method.as_deref())?;
    if args.assert_orders && config.method == Method::Rk4 {
        return Err(Error::Config {
            detail: "order assertions apply to the midpoint and variational schemes only".into(),
        });
    }
    let grid = log_spaced_grid(args.eps_min, args.eps_max, args.eps_count)?;
    let report = match &config.out {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            let report = consistency_study(&config, &grid, &mut out)?;
            out.flush()?;
            report
        }
        None => consistency_study(&config, &grid, &mut io::stdout().lock())?,
    };
    print_summary(config.out.is_none(), &report.to_string());
    if args.assert_orders {
        let violations = check_expected_orders(&config, &report)?;
        if !violations.is_empty() {
            for violation in &violations {
                eprintln!("order assertion failed: {violation}");
            }
            return Ok(ExitCode::from(1));
        }
        print_summary(config.out.is_none(), "all order assertions hold");
    }
    Ok(ExitCode::SUCCESS)
}

fn plot_scripts_cmd(args: PlotScriptsArgs) -> Result<ExitCode> {
    let script = args.out.unwrap_or_else(|| plot_script_path(&args.csv));
    emit_plot_script_for_csv(&args.csv, &script)?;
    println!("wrote {}", script.display());
    Ok(ExitCode::SUCCESS)
}
