//! `sociospatial`: simulate inputs, build exposures, fit and report.

mod config;
mod failure;
mod pipeline;
mod specs;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sociospatial::exposure::{Denominator, WeightsBase};
use sociospatial::regress::CrType;

use config::{Options, RunConfig};
use failure::{CliResult, Failure};

#[derive(Debug, Parser)]
#[command(name = "sociospatial", version, about = "Socio-spatial exposure metrics and fixed-effects panel models")]
struct Cli {
    /// Run configuration (TOML); for `simulate`, a generator configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Fail on the first malformed row instead of dropping it.
    #[arg(long, global = true)]
    strict: bool,
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    denominator: Option<DenominatorArg>,
    #[arg(long = "weights-base", global = true, value_enum)]
    weights_base: Option<WeightsBaseArg>,
    #[arg(long, global = true, value_enum)]
    cr: Option<CrArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a synthetic input bundle with planted coefficients.
    Simulate {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build proximity and policy-exposure series.
    Exposures,
    /// Fit the configured specifications.
    Fit {
        /// Fit only these specifications (repeatable).
        #[arg(long = "spec")]
        specs: Vec<String>,
    },
    /// Combine fitted specifications into side-by-side tables.
    Report,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DenominatorArg {
    ExcludeSelf,
    IncludeSelf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WeightsBaseArg {
    Fixed,
    Annual,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CrArg {
    Cr0,
    Cr1,
}

impl Cli {
    fn apply(&self, o: &mut Options) {
        if self.strict {
            o.strict = true;
        }
        if let Some(d) = self.denominator {
            o.denominator = match d {
                DenominatorArg::ExcludeSelf => Denominator::ExcludeSelf,
                DenominatorArg::IncludeSelf => Denominator::IncludeSelf,
            };
        }
        if let Some(w) = self.weights_base {
            o.weights_base = match w {
                WeightsBaseArg::Fixed => WeightsBase::Fixed,
                WeightsBaseArg::Annual => WeightsBase::Annual,
            };
        }
        if let Some(c) = self.cr {
            o.cr = match c {
                CrArg::Cr0 => CrType::Cr0,
                CrArg::Cr1 => CrType::Cr1,
            };
        }
    }

    fn run_config(&self) -> CliResult<RunConfig> {
        let path = self.config.clone().unwrap_or_else(|| PathBuf::from(pipeline::RUN_CONFIG));
        if !path.is_file() {
            return Err(Failure::validation("run config not found (pass --config)").in_file(&path));
        }
        let mut cfg = RunConfig::load(&path)?;
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        self.apply(&mut cfg.options);
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::validation(format!("cannot size thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Simulate { seed } => {
            let mut opts = Options::default();
            cli.apply(&mut opts);
            let out = cli.out.as_deref().unwrap_or(Path::new("bundle"));
            pipeline::cmd_simulate(cli.config.as_deref(), *seed, out, &opts).map(|_| ())
        }
        Command::Exposures => pipeline::cmd_exposures(&cli.run_config()?),
        Command::Fit { specs } => pipeline::cmd_fit(&cli.run_config()?, specs),
        Command::Report => pipeline::cmd_report(&cli.run_config()?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let f = Failure::validation(e.kind().to_string());
            eprintln!("{}", f.diagnostic());
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            eprintln!("{}", f.diagnostic());
            ExitCode::from(f.kind.exit_code())
        }
    }
}
