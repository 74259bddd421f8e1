use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stirap::commands::{self, CommandOptions};
use stirap::config::{parse_spec, OUT_DIR_ENV};
use stirap::ensemble::with_workers;
use stirap::output::OutputBundle;
use stirap::Error;

#[derive(Parser)]
#[command(name = "stirap", version, about = "STIRAP / superadiabatic STIRAP under loss and OU dephasing")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,

    /// Master seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for ensembles (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Skip SVG quicklook plots.
    #[arg(long, global = true)]
    no_plots: bool,

    /// Extra `key=value` settings applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Single trajectory with full population time series.
    Run,
    /// Fidelity versus peak amplitude over the (gamma, tau_c, delay) grid.
    Sweep,
    /// Histogram and autocorrelation of generated OU noise.
    NoiseValidate,
    /// Noise power spectra and counterdiabatic pulse spectra.
    Spectrum,
    /// Pulse areas over the simulation window.
    Area,
}

fn report(bundle: &OutputBundle) {
    for f in bundle.data_files.iter().chain(&bundle.plots) {
        println!("wrote {}", f.display());
    }
    println!("manifest {}", bundle.manifest.display());
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let mut text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?,
        None => String::new(),
    };
    for kv in &cli.set {
        // Later settings replace earlier ones.
        let key = kv.split_once('=').map_or(kv.as_str(), |(k, _)| k).trim();
        text = text
            .lines()
            .filter(|l| l.split_once('=').is_none_or(|(k, _)| k.split('#').next().unwrap_or("").trim() != key))
            .collect::<Vec<_>>()
            .join("\n");
        text.push('\n');
        text.push_str(kv);
        text.push('\n');
    }
    let mut spec = parse_spec(&text)?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    let mut opts = CommandOptions::from_spec(&spec);
    if let Some(out) = &cli.out {
        opts.out_dir = out.clone();
    }
    opts.plots = !cli.no_plots;

    match cli.command {
        Command::Run => {
            let (bundle, result) = commands::cmd_run(&spec, &opts)?;
            report(&bundle);
            println!("fidelity {:.12}", result.fidelity);
            println!("total_population {:.12}", result.total_population);
        }
        Command::Sweep => {
            let (bundle, _) = with_workers(cli.workers, || commands::cmd_sweep(&spec, &opts))?;
            report(&bundle);
        }
        Command::NoiseValidate => {
            let (bundle, checks) = commands::cmd_noise_validate(&spec, &opts)?;
            report(&bundle);
            for (i, c) in checks.iter().enumerate() {
                println!(
                    "iteration {i}: mean {:.5} variance {:.5} R(tau_c) {:.5} KS {:.5} (1% critical {:.5})",
                    c.mean, c.variance, c.r_at_tau_c, c.ks_statistic, c.ks_critical
                );
            }
        }
        Command::Spectrum => report(&commands::cmd_spectrum(&spec, &opts)?),
        Command::Area => {
            let (bundle, a) = commands::cmd_area(&spec, &opts)?;
            report(&bundle);
            println!("window [{}, {}]", a.window.0, a.window.1);
            println!("pump   {:.6}", a.pump);
            println!("stokes {:.6}", a.stokes);
            println!("cd     {:.6}", a.counterdiabatic);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
