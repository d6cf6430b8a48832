use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use squidnoise::noise::{FitSpace, ModelVariant};
use squidnoise::{Error, ErrorClass, Result};

mod commands;
mod config;
mod output;

use commands::Context;
use config::{RunConfig, SweepKind};
use output::Format;

/// Surface-spin flux-noise toolkit for rectangular SQUID loops.
#[derive(Parser, Debug)]
#[command(name = "squidnoise", version)]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SpaceArg {
    Power,
    Amplitude,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one strip cross-section: current map, interface profiles, variance breakdown.
    Solve {
        /// Wire width (µm).
        #[arg(long, allow_negative_numbers = true)]
        width: Option<f64>,
        /// Film thickness (nm).
        #[arg(long, allow_negative_numbers = true)]
        thickness: Option<f64>,
        /// Penetration depth (nm).
        #[arg(long, allow_negative_numbers = true)]
        penetration_depth: Option<f64>,
        #[arg(long)]
        variant: Option<ModelVariant>,
    },
    /// Sweep one loop parameter and tabulate the variance integrals and √A_Φ.
    Sweep {
        #[arg(long, value_enum)]
        kind: Option<SweepKind>,
        /// Comma-separated values: µm for perimeter and width, nm for thickness.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        values: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<ModelVariant>>,
        /// Fixed wire width (µm) for the non-width sweeps.
        #[arg(long)]
        fixed_width: Option<f64>,
        /// Also render sweep.svg.
        #[arg(long)]
        plot: bool,
    },
    /// Fit the defect density to a dataset of measured amplitudes.
    Fit {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        variant: Option<ModelVariant>,
        #[arg(long, value_enum)]
        space: Option<SpaceArg>,
    },
    /// Extract √A_Φ from a spectrum and echo traces.
    Extract {
        /// Directory holding spectrum.csv, traces.csv and trace_<k>.csv.
        #[arg(
            long,
            conflicts_with = "synthesize",
            required_unless_present = "synthesize"
        )]
        input: Option<PathBuf>,
        /// Generate a synthetic dataset under <out>/data first.
        #[arg(long)]
        synthesize: bool,
        /// True √A_Φ for synthesis (µΦ₀).
        #[arg(long, requires = "synthesize")]
        sqrt_a: Option<f64>,
        /// Population noise for synthesis.
        #[arg(long, requires = "synthesize")]
        noise: Option<f64>,
    },
    /// Grid, strip-length and standoff convergence study.
    Converge {
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
        /// Wire width (µm).
        #[arg(long)]
        width: Option<f64>,
        /// Film thickness (nm).
        #[arg(long)]
        thickness: Option<f64>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Validation => 2,
        ErrorClass::Fit => 3,
        ErrorClass::Numerical => 4,
        ErrorClass::Io => 5,
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let seed = cli.seed.or(config.seed).unwrap_or(1);

    match cli.command {
        Command::Solve {
            width,
            thickness,
            penetration_depth,
            variant,
        } => {
            let g = &mut config.geometry;
            if let Some(w) = width {
                g.width = w * 1e-6;
            }
            if let Some(b) = thickness {
                g.film.thickness = b * 1e-9;
            }
            if let Some(l) = penetration_depth {
                g.film.penetration_depth = l * 1e-9;
            }
            if let Some(v) = variant {
                g.variant = v;
            }
            commands::solve::run(&context(config, out, seed, cli.format))
        }
        Command::Sweep {
            kind,
            values,
            variants,
            fixed_width,
            plot,
        } => {
            let s = &mut config.sweep;
            s.kind = kind.or(s.kind);
            if let Some(v) = values {
                s.values = v;
            }
            if let Some(v) = variants {
                s.variants = v;
            }
            if let Some(w) = fixed_width {
                s.width = w * 1e-6;
            }
            commands::sweep::run(&context(config, out, seed, cli.format), plot)
        }
        Command::Fit {
            dataset,
            variant,
            space,
        } => {
            let f = &mut config.fit;
            f.dataset = dataset.or(f.dataset.take());
            if let Some(v) = variant {
                f.variant = v;
            }
            if let Some(s) = space {
                f.options.space = match s {
                    SpaceArg::Power => FitSpace::Power,
                    SpaceArg::Amplitude => FitSpace::Amplitude,
                };
            }
            commands::fit::run(&context(config, out, seed, cli.format))
        }
        Command::Extract {
            input,
            synthesize: _,
            sqrt_a,
            noise,
        } => {
            let syn = &mut config.synthesis;
            if let Some(a) = sqrt_a {
                syn.truth.sqrt_a_uphi0 = a;
            }
            if let Some(n) = noise {
                syn.plan.population_noise = n;
            }
            commands::extract::run(&context(config, out, seed, cli.format), input.as_deref())
        }
        Command::Converge {
            nx,
            ny,
            width,
            thickness,
        } => {
            let c = &mut config.convergence;
            c.nx = nx.or(c.nx);
            c.ny = ny.or(c.ny);
            if let Some(w) = width {
                c.width = w * 1e-6;
            }
            if let Some(b) = thickness {
                c.thickness = b * 1e-9;
            }
            commands::converge::run(&context(config, out, seed, cli.format)).map(|_| ())
        }
    }
}

fn context(config: RunConfig, out: PathBuf, seed: u64, format: Format) -> Context {
    Context {
        config,
        out,
        seed,
        format,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
