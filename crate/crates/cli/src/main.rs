mod commands;
mod error;
mod manifest;
mod tables;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{ElicitArgs, FitArgs, ReproduceCommand, SimulateArgs, ZtableArgs};
use error::{CliError, CliResult};
use manifest::{sha256_hex, Run, RunManifest};

/// Bayesian inference for the Mallows model with Spearman's distance.
#[derive(Parser, Debug)]
#[command(name = "mallows", version)]
struct Cli {
    /// Run manifest path; defaults to `<first output>.manifest.toml`, or
    /// `mallows-<command>.manifest.toml` when everything went to stdout.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate the Spearman distance frequency table for n items.
    Ztable(ZtableArgs),
    /// Draw rankings from a Mallows model.
    Simulate(SimulateArgs),
    /// Posterior of the consensus ranking and precision.
    Fit(FitArgs),
    /// Prior mode from item covariates.
    Elicit(ElicitArgs),
    /// Regenerate the published tables.
    Reproduce {
        #[command(subcommand)]
        which: ReproduceCommand,
    },
    /// Re-execute the run recorded in a manifest and check its outputs.
    Rerun {
        manifest: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ztable(_) => "ztable",
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Elicit(_) => "elicit",
            Command::Reproduce { which: ReproduceCommand::Table1(_) } => "reproduce-table1",
            Command::Reproduce { which: ReproduceCommand::Sushi(_) } => "reproduce-sushi",
            Command::Reproduce { which: ReproduceCommand::Idea(_) } => "reproduce-idea",
            Command::Rerun { .. } => "rerun",
        }
    }
}

fn execute(cli: Cli, argv: Vec<String>) -> CliResult<RunManifest> {
    if let Command::Rerun { manifest } = &cli.command {
        return rerun(manifest);
    }
    let mut run = Run::new(cli.command.name());
    match &cli.command {
        Command::Ztable(a) => commands::ztable(&mut run, a)?,
        Command::Simulate(a) => commands::simulate(&mut run, a)?,
        Command::Fit(a) => commands::fit(&mut run, a)?,
        Command::Elicit(a) => commands::elicit(&mut run, a)?,
        Command::Reproduce { which } => match which {
            ReproduceCommand::Table1(a) => commands::table1(&mut run, a)?,
            ReproduceCommand::Sushi(a) => commands::sushi(&mut run, a)?,
            ReproduceCommand::Idea(a) => commands::idea(&mut run, a)?,
        },
        Command::Rerun { .. } => unreachable!("handled above"),
    }
    let path = cli.manifest.clone().unwrap_or_else(|| match run.primary_output() {
        Some(out) => PathBuf::from(format!("{out}.manifest.toml")),
        None => PathBuf::from(format!("mallows-{}.manifest.toml", cli.command.name())),
    });
    let manifest = run.finish(argv)?;
    manifest.save(&path)?;
    log::info!("manifest written to {}", path.display());
    Ok(manifest)
}

/// Replays `path` from its recorded working directory after checking the
/// input digests, then compares the new output digests with the old ones.
fn rerun(path: &Path) -> CliResult<RunManifest> {
    let path = std::fs::canonicalize(path).map_err(|source| manifest::file_err(path, source))?;
    let old = RunManifest::load(&path)?;
    let bad = |msg: String| CliError::Manifest { path: path.display().to_string(), msg };
    std::env::set_current_dir(&old.cwd).map_err(|source| manifest::file_err(&old.cwd, source))?;
    for input in &old.inputs {
        let bytes = std::fs::read(&input.path).map_err(|source| manifest::file_err(Path::new(&input.path), source))?;
        if sha256_hex(&bytes) != input.sha256 {
            return Err(bad(format!("input {} changed since the recorded run", input.path)));
        }
    }
    let cli = Cli::try_parse_from(&old.argv).map_err(|e| bad(format!("recorded arguments do not parse: {e}")))?;
    if matches!(cli.command, Command::Rerun { .. }) {
        return Err(bad("a manifest cannot record a re-run".into()));
    }
    let new = execute(cli, old.argv.clone())?;
    for (a, b) in old.outputs.iter().zip(&new.outputs) {
        if a != b {
            return Err(CliError::NotReproduced { path: a.path.clone() });
        }
    }
    if old.outputs.len() != new.outputs.len() {
        return Err(bad("the re-run wrote a different set of outputs".into()));
    }
    eprintln!("reproduced {} output(s) bit-identically", new.outputs.len());
    Ok(new)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse_from(&argv);
    match execute(cli, argv) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
