use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cspat::experiment::{
    cmd_measure, cmd_pipeline, cmd_reconstruct, cmd_series, cmd_simulate, cmd_verify_appendix,
    AppendixSizes, ExperimentConfig, PipelineOutput, Profile, ReconInputs, PRESSURE_FILE,
};
use cspat::Result;

#[derive(Parser, Debug)]
#[command(
    name = "cspat",
    version,
    about = "Compressed-sensing photoacoustic tomography experiments"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON configuration layered over the profile defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = ProfileArg::Paper)]
    profile: ProfileArg,
    /// Seed of the measurement matrix (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    Paper,
    Ci,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate point data of the phantom.
    Simulate {
        /// Also write the traces as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Apply the measurement matrix to simulated point data.
    Measure {
        /// Point data (default: pressure.patp in the output directory).
        #[arg(long)]
        pressure: Option<PathBuf>,
    },
    /// Reconstruct the source from point data or compressed measurements.
    Reconstruct {
        #[arg(long)]
        pressure: Option<PathBuf>,
        #[arg(long)]
        measurements: Option<PathBuf>,
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Reconstruction errors over a range of compression factors n/m.
    Series {
        #[arg(long, value_delimiter = ',', default_values_t = vec![16.0, 8.0, 4.0, 2.0, 1.0])]
        factors: Vec<f64>,
    },
    /// Exhaustive checks of the matrix constructions at small sizes.
    VerifyAppendix {
        #[arg(long, default_value_t = 12)]
        m: usize,
        #[arg(long, default_value_t = 24)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 2)]
        s: usize,
    },
    /// Simulate, measure and reconstruct in one go.
    Pipeline,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let profile = match common.profile {
        ProfileArg::Paper => Profile::Paper,
        ProfileArg::Ci => Profile::Ci,
    };
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(profile, path)?,
        None => ExperimentConfig::for_profile(profile),
    };
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(out: &PipelineOutput) {
    println!("method,alpha,error,m,n");
    for e in &out.errors {
        println!("{},{},{},{},{}", e.method, e.alpha, e.value, e.m, e.n);
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Command::VerifyAppendix { m, n, d, s } = cli.command {
        let sizes = AppendixSizes {
            m,
            n,
            d,
            s,
            seed: cli.common.seed.unwrap_or(cspat::experiment::DEFAULT_SEED),
        };
        let report = cmd_verify_appendix(sizes)?;
        print!("{}", report.render());
        return Ok(report.all_passed());
    }
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Simulate { csv } => {
            let path = cmd_simulate(&cfg, csv)?;
            println!("wrote {}", path.display());
        }
        Command::Measure { pressure } => {
            let pressure = pressure.unwrap_or_else(|| cfg.output_dir.join(PRESSURE_FILE));
            let (y, a) = cmd_measure(&cfg, &pressure)?;
            println!("wrote {}", y.display());
            println!("wrote {}", a.display());
        }
        Command::Reconstruct {
            pressure,
            measurements,
            matrix,
        } => {
            let defaults = ReconInputs::in_dir(&cfg.output_dir);
            let inputs = ReconInputs {
                pressure: pressure.or(defaults.pressure),
                measurements: measurements.or(defaults.measurements),
                matrix: matrix.or(defaults.matrix),
            };
            report(&cmd_reconstruct(&cfg, &inputs)?);
        }
        Command::Series { factors } => {
            println!("compression_factor,m,l1,l2");
            for p in cmd_series(&cfg, &factors)? {
                println!("{},{},{},{}", p.compression_factor, p.m, p.l1, p.l2);
            }
        }
        Command::Pipeline => report(&cmd_pipeline(&cfg)?),
        Command::VerifyAppendix { .. } => unreachable!("handled above"),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: some checks failed");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
