use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use homopt::Builtin;
use homopt_cli::experiment::{run_experiment, write_rows, ExperimentResult};
use homopt_cli::{recompute_regret, CliError, ConfigError, RunConfig, EXIT_CONFIG};

/// Homotopy-augmented black-box optimization runs.
#[derive(Parser)]
#[command(name = "homopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Optimize {
        config: PathBuf,
        /// Output directory; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds; overrides the config's `seeds`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Also run the bare base sampler on the same seeds.
        #[arg(long)]
        compare: bool,
        /// Write a mean-regret chart as regret.svg.
        #[arg(long)]
        svg: bool,
    },
    /// Run the two built-in illustrations with canned settings.
    Bench {
        #[arg(long, default_value = "bench-results")]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
    },
    /// Recompute regret across trials CSVs against their pooled minimum.
    Regret {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        /// Write the recomputed rows here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config, then print it with defaults filled in.
    Validate { config: PathBuf },
}

fn print_report(result: &ExperimentResult, files: &[PathBuf]) -> Result<(), CliError> {
    let summary = result.summary()?;
    println!("objective {} ({} trials, pooled min {})", summary.objective, summary.trials, summary.global_min);
    for m in &summary.methods {
        println!(
            "  {:<16} final best {:.6} ± {:.6}   AUC {:.4}   argmin {}",
            m.method,
            m.final_best_mean,
            m.final_best_se,
            m.auc_mean,
            serde_json::to_string(&m.best.argmin).unwrap_or_default()
        );
    }
    if let Some(p) = &summary.percent_improvement {
        println!(
            "  improvement {:.2}% ± {:.2}% over {} seeds",
            p.percent_improvement, p.standard_error, p.n_seeds
        );
    }
    for f in files {
        println!("  wrote {}", f.display());
    }
    Ok(())
}

fn bench_configs(out: &std::path::Path) -> Vec<RunConfig> {
    Builtin::ALL
        .into_iter()
        .map(|kind| RunConfig::illustration(kind, out.join(kind.name())))
        .collect()
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Optimize {
            config,
            out,
            seeds,
            compare,
            svg,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(out) = out {
                cfg.output = out;
            }
            if let Some(seeds) = seeds {
                cfg.seeds = seeds;
            }
            cfg.compare |= compare;
            cfg.validate()?;
            let (result, files) = run_experiment(&cfg, svg)?;
            print_report(&result, &files)
        }
        Command::Bench { out, svg } => {
            for cfg in bench_configs(&out) {
                info!("bench: {}", cfg.output.display());
                let (result, files) = run_experiment(&cfg, svg)?;
                print_report(&result, &files)?;
            }
            Ok(())
        }
        Command::Regret { csv, out } => {
            let rows = recompute_regret(&csv)?;
            match out {
                Some(path) => {
                    let file = std::fs::File::create(&path).map_err(|source| CliError::Io { path, source })?;
                    write_rows(io::BufWriter::new(file), &rows)
                }
                None => write_rows(io::stdout().lock(), &rows),
            }
        }
        Command::Validate { config } => {
            let cfg = RunConfig::load(&config)?;
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "{}", cfg.to_json()).map_err(|source| CliError::Io {
                path: "stdout".into(),
                source,
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HOMOPT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage_error { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let prefix = match &e {
                CliError::Config(ConfigError::Parse { .. }) => "config parse error",
                CliError::Config(_) => "config error",
                _ => "error",
            };
            eprintln!("homopt: {prefix}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
