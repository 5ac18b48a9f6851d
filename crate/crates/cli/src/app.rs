use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{write_json, Stamp};
use crate::validate::Fault;
use crate::{levels, pink, spectrum, validate};

const DEFAULT_OUT: &str = "surfnoise-out";

/// Surface adatom dipole noise: bound levels, exact spectra, patch sums.
#[derive(Debug, Parser)]
#[command(name = "surfnoise", version)]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "SURFNOISE_OUT")]
    pub out: Option<PathBuf>,
    /// Master seed for stochastic checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also write spectra truncated to the top-k pairs.
    #[arg(long, global = true)]
    pub top_k: Option<usize>,
    /// Corrupt the first rate matrix in `validate`.
    #[arg(long, global = true, value_enum)]
    pub fault_inject: Option<Fault>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Bound levels, dipoles and rates of the configured well.
    Levels,
    /// Exact spectrum for every (N, T/w0) point.
    Spectrum,
    /// Patch-aggregated spectrum and the 1/N closed form.
    Pink,
    /// Invariant and oracle checks; exit 1 on any failure.
    Validate,
    /// Like `spectrum`, reusing points finished by an earlier run.
    Sweep,
}

pub fn run(cli: Cli) -> CliResult<String> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(k) = cli.top_k {
        if k == 0 {
            return Err(CliError::Config("--top-k must be >= 1".into()));
        }
        cfg.outputs.top_k = Some(k);
    }
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.outputs.directory.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let stamp = Stamp::new(cfg.hash());
    write_json(&out.join("config.json"), &stamp, "config", &cfg)?;

    match cli.command {
        Command::Levels => levels::cmd_levels(&cfg, &out, &stamp),
        Command::Spectrum | Command::Sweep => {
            let resume = cli.command == Command::Sweep;
            let outcome = spectrum::run_points(&cfg, &out, &stamp, cfg.outputs.top_k, resume)?;
            if resume {
                write_json(&out.join("sweep.json"), &stamp, "sweep", &outcome)?;
            }
            let mut s = format!("{:>4} {:>8} {:>4} {:>24} {:>24}\n", "N", "T/w0", "M", "S(0) (D^2 s)", "dominant lambda (1/s)");
            for p in &outcome.points {
                s.push_str(&format!(
                    "{:>4} {:>8} {:>4} {:>24.16e} {:>24.16e}\n",
                    p.n_atoms, p.temperature_ratio, p.n_levels, p.white_noise, p.dominant_lambda_per_s
                ));
            }
            if resume {
                s.push_str(&format!("{} of {} points reused\n", outcome.reused.len(), outcome.points.len()));
            }
            Ok(s)
        }
        Command::Pink => {
            let sums = pink::cmd_pink(&cfg, &out, &stamp)?;
            Ok(sums
                .iter()
                .map(|p| {
                    format!(
                        "T/w0={} N_max={} slope(sum)={:.4} slope(closed)={:.4}\n",
                        p.temperature_ratio, p.n_max, p.fitted_slope, p.fitted_slope_closed_form
                    )
                })
                .collect())
        }
        Command::Validate => {
            let report = validate::cmd_validate(&cfg, &out, &stamp, cli.seed, cli.fault_inject)?;
            print!("{}", validate::render(&report));
            validate::failures(&report)?;
            Ok(String::new())
        }
    }
}
