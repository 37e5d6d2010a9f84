use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use freqdd::bench::{cmd_offline, cmd_online, cmd_reference, cmd_report, cmd_sweep, RunConfig, SweepKind};
use freqdd::mesh_fem::ProblemId;

/// Frequency-domain variable-separation domain decomposition for parametric
/// parabolic problems.
#[derive(Parser)]
#[command(name = "freqdd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Built-in preset: heat, rd1 or rd2.
    #[arg(long, default_value = "heat")]
    preset: String,
    /// TOML config file; replaces the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config field, e.g. `--set nx=20 --set caps.n_i=[2,2]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => RunConfig::preset(self.preset.parse::<ProblemId>()?)?,
        };
        let mut sets = self.overrides.clone();
        if let Some(s) = self.seed {
            sets.push(format!("seed={s}"));
        }
        if let Some(o) = &self.out {
            sets.push(format!("output_dir=\"{}\"", o.display()));
        }
        Ok(base.with_overrides(&sets)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train every reduced model and write the offline artifact.
    Offline(ConfigArgs),
    /// Evaluate an artifact on random samples against time-stepping references.
    Online {
        #[command(flatten)]
        config: ConfigArgs,
        /// Artifact written by `offline`; trained on the fly if omitted.
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
    /// Run the time-stepping reference for one parameter vector.
    Reference {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated parameter vector; a seeded random draw if omitted.
        #[arg(long, value_delimiter = ',')]
        xi: Option<Vec<f64>>,
    },
    /// Render tables and SVG figures from report and sweep files.
    Report {
        #[arg(long = "report")]
        reports: Vec<PathBuf>,
        #[arg(long = "sweep")]
        sweeps: Vec<PathBuf>,
        #[arg(long, default_value = "out/report")]
        out: PathBuf,
    },
    /// Validation error against the number of separate terms.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// schur, interface or interior.
        #[arg(long, default_value = "interface")]
        kind: String,
        #[arg(long, default_value_t = 6)]
        n_max: usize,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Offline(c) => {
            let cfg = c.resolve()?;
            let path = cmd_offline(&cfg)?;
            println!("{}", path.display());
        }
        Command::Online { config, artifact } => {
            let cfg = config.resolve()?;
            let path = match artifact {
                Some(p) => p,
                None => cmd_offline(&cfg)?,
            };
            cmd_online(&path, &cfg)?;
        }
        Command::Reference { config, xi } => {
            let cfg = config.resolve()?;
            let s = cmd_reference(&cfg, xi)?;
            println!("{}", format_reference(&s)?);
        }
        Command::Report { reports, sweeps, out } => {
            for p in cmd_report(&reports, &sweeps, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Sweep { config, kind, n_max } => {
            let cfg = config.resolve()?;
            cmd_sweep(&cfg, kind.parse::<SweepKind>()?, n_max)?;
        }
    }
    Ok(())
}

fn format_reference(s: &freqdd::bench::run::ReferenceSummary) -> Result<String> {
    Ok(format!(
        "xi = {:?}\nsteps = {}\nseconds = {:.3}\nanalytical error = {}\nfourier round trip error = {}\ntrajectory = {}",
        s.xi,
        s.steps,
        s.seconds,
        s.analytical_error.map_or("n/a".into(), |e| format!("{e:.3e}")),
        s.fourier_round_trip_error.map_or("n/a".into(), |e| format!("{e:.3e}")),
        s.trajectory_csv.display()
    ))
}
