use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ucwave::experiments::{
    check_geometry, run_cm_study, run_convergence, run_noise_study, run_region_sweep, run_trace_experiment,
    run_worst_mode_study, ExperimentConfig, ExperimentReport,
};
use ucwave::{Error, Result};

#[derive(Parser)]
#[command(name = "ucwave", about = "Unique continuation for the 1D wave equation with stabilized space-time FEM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct IoArgs {
    /// JSON configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report.json and table.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    CheckGeometry(IoArgs),
    Convergence(IoArgs),
    RegionSweep(IoArgs),
    Noise(IoArgs),
    WorstMode(IoArgs),
    Trace(IoArgs),
    CmStudy(IoArgs),
}

fn load_config(path: Option<&Path>, trace: bool) -> Result<ExperimentConfig> {
    let base = if trace {
        ExperimentConfig::trace_default()
    } else {
        ExperimentConfig::default()
    };
    let Some(path) = path else {
        return Ok(base);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    ExperimentConfig::from_json_over(&text, &base)
}

fn write_report(report: &ExperimentReport, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("report.json"), report.to_json())?;
    std::fs::write(out.join("table.csv"), report.to_csv())?;
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("UCWAVE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("UCWAVE_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot configure thread pool: {e}")))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let (args, report) = match &cli.command {
        Command::CheckGeometry(a) => {
            let cfg = load_config(a.config.as_deref(), false)?;
            (a, check_geometry(&cfg)?)
        }
        Command::Convergence(a) => {
            let cfg = load_config(a.config.as_deref(), false)?;
            (a, run_convergence(&cfg)?)
        }
        Command::RegionSweep(a) => {
            let cfg = load_config(a.config.as_deref(), false)?;
            (a, run_region_sweep(&cfg, &cfg.kappas)?)
        }
        Command::Noise(a) => {
            let cfg = load_config(a.config.as_deref(), false)?;
            (a, run_noise_study(&cfg)?)
        }
        Command::WorstMode(a) => {
            let cfg = load_config(a.config.as_deref(), false)?;
            (a, run_worst_mode_study(&cfg)?)
        }
        Command::Trace(a) => {
            let cfg = load_config(a.config.as_deref(), true)?;
            (a, run_trace_experiment(&cfg, cfg.trace.m, cfg.trace.eta)?)
        }
        Command::CmStudy(a) => {
            let cfg = load_config(a.config.as_deref(), true)?;
            (a, run_cm_study(&cfg, &cfg.cm_modes)?)
        }
    };
    write_report(&report, &args.out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ucwave: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
