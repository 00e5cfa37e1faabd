//! Experiment runner: parses a configuration, runs the named recipe and
//! writes its artifacts plus `report.json`.

pub mod config;
pub mod recipes;
pub mod record;

use std::path::Path;

use anyhow::{bail, Context, Result};

use config::{parse_config, Experiment};
use recipes::RunContext;
use record::{config_hash, hash_inputs, RunRecord};

/// Runs `experiment` from the configuration at `config_path`, writing into
/// `out_dir`. `seed` overrides the configured seed.
pub fn execute(experiment: Experiment, config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<RunRecord> {
    let loaded = parse_config(config_path)?;
    if let Some(named) = loaded.config.experiment {
        if named != experiment {
            bail!("config: `experiment` is {named} but {experiment} was requested");
        }
    }
    let inputs = hash_inputs(&loaded)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let seed = seed.unwrap_or(loaded.config.seed);
    let cx = RunContext { cfg: &loaded.config, base_dir: &loaded.base_dir, out_dir, seed };
    let outcome = recipes::run(experiment, &cx).with_context(|| format!("{experiment} failed"))?;
    let record = RunRecord {
        experiment,
        passed: outcome.report.passed(),
        seed,
        config_hash: config_hash(&loaded.raw),
        inputs,
        tolerances: outcome.tolerances,
        checks: outcome.report.checks,
        outputs: outcome.outputs,
        summary: outcome.summary,
    };
    record.write(out_dir)?;
    Ok(record)
}
