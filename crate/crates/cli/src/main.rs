use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nvtherm_cli::{apply_overrides, run_experiment, CliError, Config, Experiment};

#[derive(Parser)]
#[command(name = "nvtherm", version, about = "Hybrid NV/nanoparticle thermometer simulations")]
struct Cli {
    /// Scenario file (TOML); built-in reference scenario when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "NVTHERM_OUT_DIR", default_value = "nvtherm-out")]
    out: PathBuf,
    /// Override shots per point for swept experiments.
    #[arg(long, global = true)]
    shots: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Magnetization, NV field and df/dT versus temperature.
    Demag,
    /// Pulsed-ODMR spectra over a list of environment temperatures.
    Odmr,
    /// Ramsey fringes and their fit.
    Fid,
    /// Laser-heating cooling curve from dip positions versus waiting time.
    Cooling,
    /// Real-time fixed-τ temperature tracking.
    Track,
    /// Chopped stripline heating with the polarity-reversal control.
    Heater,
    /// Shot-noise-limited sensitivity at the Ramsey working point.
    Sensitivity,
    /// Heater-setting to temperature calibration from a reference NV.
    Calibrate,
    /// Print the normalized configuration as TOML.
    Config,
}

fn load(cli: &Cli) -> Result<Config, CliError> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    apply_overrides(&mut config, cli.seed, cli.shots);
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = load(cli)?;
    let exp = match cli.command {
        Command::Demag => Experiment::Demag,
        Command::Odmr => Experiment::Odmr,
        Command::Fid => Experiment::Fid,
        Command::Cooling => Experiment::Cooling,
        Command::Track => Experiment::Track,
        Command::Heater => Experiment::Heater,
        Command::Sensitivity => Experiment::Sensitivity,
        Command::Calibrate => Experiment::Calibrate,
        Command::Config => {
            print!("{}", config.to_toml()?);
            return Ok(());
        }
    };
    let manifest = run_experiment(exp, &config, &cli.out)?;
    for f in &manifest.outputs {
        println!("{}", cli.out.join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nvtherm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
