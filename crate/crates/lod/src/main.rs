use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use lod::coeff_file::write_coeff;
use lod::config::read_config;
use lod::experiment::{corrector_decay, run_experiment};
use lod::report::write_report;
use lod_core::coeff::random_field;

#[derive(Parser)]
#[command(name = "lod", version, about = "Localized orthogonal decomposition for parabolic problems")]
struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence experiment and write its CSV report.
    Run { config: PathBuf },

    /// Write a random log-uniform coefficient file.
    GenCoeff {
        grid_level: u32,
        lo: f64,
        hi: f64,
        seed: u64,
        path: PathBuf,
    },

    /// Localization error of one corrector for k = 1..=k_max (CSV on stdout).
    Decay {
        config: PathBuf,
        /// Coarse level (defaults to the first level of the config).
        #[arg(long)]
        level: Option<u32>,
        /// Interior coarse node index (defaults to the node nearest (1/4, 1/4)).
        #[arg(long)]
        node: Option<usize>,
        #[arg(long, default_value_t = 5)]
        k_max: usize,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Run { config } => {
            let cfg = read_config(&config)?;
            let report = run_experiment(&cfg)?;
            write_report(&report, &cfg.output)?;
            log::info!(
                "order_lod = {:.3}, order_p1 = {:.3}; report written to {}",
                report.order_lod,
                report.order_p1,
                cfg.output.display()
            );
        }
        Command::GenCoeff {
            grid_level,
            lo,
            hi,
            seed,
            path,
        } => {
            let field = random_field(grid_level, lo, hi, seed)?;
            write_coeff(&field, &path)?;
            log::info!("contrast {:.3e} written to {}", field.contrast(), path.display());
        }
        Command::Decay {
            config,
            level,
            node,
            k_max,
        } => {
            let cfg = read_config(&config)?;
            let level = level.unwrap_or(cfg.coarse_levels[0]);
            let (node, rows) = corrector_decay(&cfg, level, node, k_max)?;
            println!("# coarse_level={level} node={node}");
            println!("k,energy_error,relative_error,ratio");
            let mut prev: Option<f64> = None;
            for r in rows {
                let ratio = prev.map_or(String::new(), |p| format!("{:?}", r.energy_error / p));
                println!("{},{:?},{:?},{}", r.k, r.energy_error, r.relative, ratio);
                prev = Some(r.energy_error);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
