use std::path::PathBuf;
use std::process::ExitCode;

use aggrokin::config::Experiment;
use clap::Parser;

#[derive(Debug, Parser)]
#[command(name = "aggrokin", version, about = "Run a kinetic or particle experiment from a JSON configuration")]
struct Cli {
    experiment: Experiment,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for replica loops (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match aggrokin::execute(cli.experiment, &cli.config, &cli.out, cli.seed) {
        Ok(record) => {
            for c in &record.checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("{tag} {}: {:?} (limit {:?})", c.name, c.measured, c.limit);
            }
            println!("report: {}", cli.out.join("report.json").display());
            if record.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
