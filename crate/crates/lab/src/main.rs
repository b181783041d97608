use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use zagff::config::{Config, Experiment};
use zagff::experiments::{run, RunOptions};
use zagff::LabError;

/// Runs one experiment from a `key = value` config file and writes its data
/// files plus `manifest.json` to the output directory.
#[derive(Debug, Parser)]
#[command(name = "zagff", version)]
struct Cli {
    /// One of green-validate, sampler-validate, tree-eta, operator-sweep,
    /// hstar, coupling-tail, giant, mesoscopic, sprinkle.
    experiment: String,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the `replicas` key.
    #[arg(long)]
    replicas: Option<usize>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| -> Result<_, LabError> {
        let exp: Experiment = cli.experiment.parse()?;
        let cfg = Config::load(&cli.config)?;
        let opts = RunOptions { seed: cli.seed, replicas: cli.replicas, threads: cli.threads, out: cli.out.clone() };
        run(exp, &cfg, &opts)
    })();
    match result {
        Ok(files) => {
            for f in files {
                println!("{}  {}", f.sha256, cli.out.join(&f.path).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
