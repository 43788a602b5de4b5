//! Command-line front end: collect judgments, rank judges against the gold
//! reference, characterize judge behavior, assemble reports, and generate
//! synthetic fixtures.
//!
//! Exit codes: 0 success, 1 partial (some judges failed), 2 configuration
//! or input error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use rankjudge::config::RunConfig;
use rankjudge::pipeline::{
    run_behavior, run_collect, run_rank, run_report, run_synth, JudgeCollectStatus,
};

#[derive(Parser)]
#[command(
    name = "rankjudge",
    about = "Evaluate score-based judges as system rankers against a human gold reference",
    version
)]
struct Cli {
    /// Run configuration (TOML). Required by every command except `synth`,
    /// which falls back to built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured output directory (for `synth`: the fixture
    /// directory to generate into).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Override the configured random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the configured worker count for remote calls.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Judge every response with every configured judge, writing judgment
    /// files (resumable via the cache).
    Collect,
    /// Build the gold reference and the judge leaderboard (tau, CI,
    /// win-rate accuracy/MSE per aggregation).
    Rank,
    /// Characterize judges: decisiveness (alpha), per-system bias, and
    /// optional self-bias.
    Behavior,
    /// Assemble report.md and plot-ready CSVs from prior stage outputs.
    Report,
    /// Generate a self-contained synthetic fixture directory with known
    /// ground truth.
    Synth,
}

/// Exit with 2 for anything that prevents the stage from running
/// (configuration or input problems), 1 when the stage ran but some judges
/// failed, 0 otherwise.
fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(partial) => {
            if partial {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)
            .with_context(|| format!("loading config `{}`", path.display()))?,
        None => {
            let cwd = std::env::current_dir().context("resolving the working directory")?;
            RunConfig::default_in(&cwd)
        }
    };
    if let Some(output) = &cli.output {
        config.paths.output_dir = output.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs.max(1);
    }
    Ok(config)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    if cli.config.is_none() && !matches!(cli.command, Command::Synth) {
        anyhow::bail!("--config is required for this command (only `synth` has defaults)");
    }
    let config = load_config(&cli)?;

    match cli.command {
        Command::Collect => {
            let report = run_collect(&config)?;
            for (judge, status) in &report.judges {
                let name = format!("{} ({})", judge.model, judge.realization.tag());
                match status {
                    JudgeCollectStatus::Collected {
                        path,
                        n_records,
                        n_scored,
                        n_cache_hits,
                        n_remote_calls,
                        n_parse_failures,
                        failures,
                    } => {
                        println!(
                            "collected {name}: {n_records} records ({n_scored} scored, \
                             {n_parse_failures} parse failures), {n_cache_hits} cache hits, \
                             {n_remote_calls} remote calls -> {}",
                            path.display()
                        );
                        for failure in failures {
                            println!("  failed item: {failure}");
                        }
                    }
                    JudgeCollectStatus::Skipped(reason) => {
                        println!("skipped {name}: {reason}");
                    }
                    JudgeCollectStatus::Failed(reason) => {
                        println!("FAILED {name}: {reason}");
                    }
                }
            }
            Ok(report.n_failed() > 0)
        }
        Command::Rank => {
            let outcome = run_rank(&config)?;
            println!(
                "leaderboard: {} ({} ranked rows, {} omitted with reasons)",
                outcome.leaderboard.display(),
                outcome.n_ranked_rows,
                outcome.n_omitted_rows
            );
            for (judge, reason) in &outcome.failed_judges {
                println!(
                    "FAILED {} ({}): {reason}",
                    judge.model,
                    judge.realization.tag()
                );
            }
            Ok(!outcome.failed_judges.is_empty())
        }
        Command::Behavior => {
            let outcome = run_behavior(&config)?;
            println!(
                "characterized {} judge(s); outputs:",
                outcome.n_characterized
            );
            for path in &outcome.outputs {
                println!("  {}", path.display());
            }
            for (judge, reason) in &outcome.skipped {
                println!(
                    "skipped {} ({}): {reason}",
                    judge.model,
                    judge.realization.tag()
                );
            }
            Ok(false)
        }
        Command::Report => {
            let outcome = run_report(&config)?;
            println!("report: {}", outcome.report.display());
            for path in &outcome.plot_files {
                println!("  plot data: {}", path.display());
            }
            for gap in &outcome.gaps {
                println!("  gap: {gap}");
            }
            Ok(false)
        }
        Command::Synth => {
            let dir = cli
                .output
                .clone()
                .unwrap_or_else(|| config.paths.output_dir.join("synth"));
            let outcome = run_synth(&config, &dir)?;
            println!(
                "synthetic fixture: {} ({} systems, {} instructions, {} battles)",
                outcome.dir.display(),
                outcome.n_systems,
                outcome.n_instructions,
                outcome.n_battles
            );
            println!("  config: {}", outcome.config_path.display());
            for (model, clipped) in &outcome.judges {
                if *clipped > 0 {
                    println!("  judge {model}: {clipped} bias targets clipped");
                } else {
                    println!("  judge {model}: ok");
                }
            }
            Ok(false)
        }
    }
}
