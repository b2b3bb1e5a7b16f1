//! `flexmeta`: Bayesian random-effects meta-analysis from a study file.
//!
//! Exit status: 0 on success, 1 on usage or input errors, 2 when any family
//! fails the convergence checks.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use flexmeta::analysis::{run_analysis, threads_from_env, OutputFormat, RunConfig};
use flexmeta::report::{render, write_outputs};
use flexmeta::{Family, SamplerConfig};

const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Table => OutputFormat::Table,
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "flexmeta", version, about = "Random-effects meta-analysis with flexible random-effects distributions")]
struct Args {
    /// Study file with columns study,y,se or study,y,var
    #[arg(long)]
    data: PathBuf,

    /// Comma-separated families: normal, t, skew-normal, skew-t, as2,
    /// jones-faddy, sinh-arcsinh [default: all]
    #[arg(long, value_delimiter = ',', value_parser = parse_family)]
    families: Vec<Family>,

    #[arg(long)]
    chains: Option<usize>,

    /// Warmup sweeps per chain
    #[arg(long)]
    warmup: Option<usize>,

    /// Kept draws in total across chains
    #[arg(long)]
    keep: Option<usize>,

    #[arg(long)]
    seed: Option<u64>,

    /// 1000 warmup sweeps and 20000 kept draws
    #[arg(long)]
    fast: bool,

    /// Output directory
    #[arg(long, default_value = "flexmeta-out")]
    out: PathBuf,

    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,

    /// Replace a prior, e.g. omega=uniform:0:50 (repeatable)
    #[arg(long = "prior-override", value_name = "KEY=VALUE")]
    prior_override: Vec<String>,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse::<Family>().map_err(|e| e.to_string())
}

fn config(args: Args) -> RunConfig {
    let mut sampler = if args.fast {
        SamplerConfig::fast()
    } else {
        SamplerConfig::default()
    };
    if let Some(c) = args.chains {
        sampler.chains = c;
    }
    if let Some(w) = args.warmup {
        sampler.warmup = w;
    }
    if let Some(k) = args.keep {
        sampler.keep = k;
    }
    sampler.seed = args.seed.unwrap_or_else(|| {
        log::warn!("no --seed given; using {DEFAULT_SEED}. Pass --seed for archival runs");
        DEFAULT_SEED
    });
    let mut cfg = RunConfig::new(args.data);
    if !args.families.is_empty() {
        cfg.families = args.families;
    }
    cfg.sampler = sampler;
    cfg.prior_overrides = args.prior_override;
    cfg.out_dir = Some(args.out);
    cfg.format = args.format.into();
    cfg.threads = threads_from_env();
    cfg
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = config(args);
    let report = match run_analysis(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(dir) = &cfg.out_dir {
        if let Err(e) = write_outputs(&report, dir) {
            eprintln!("error: writing {}: {e}", dir.display());
            return ExitCode::from(1);
        }
    }
    print!("{}", render(&report, cfg.format));
    if report.converged() {
        ExitCode::SUCCESS
    } else {
        eprintln!("warning: convergence checks failed; see the diagnostics in report.json");
        ExitCode::from(2)
    }
}
