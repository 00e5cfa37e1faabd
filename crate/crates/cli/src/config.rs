//! Experiment configuration: strict JSON, validated before anything runs.

use std::fmt;
use std::path::{Path, PathBuf};

use aggrokin_core::equilibria::ModelParams;
use aggrokin_core::grid::{DensityField, DomainGrid};
use aggrokin_core::potential::{Potential, PotentialSpec};
use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum Experiment {
    Equilibria,
    MesoRun,
    PicardRun,
    BoundedCheck,
    ComparisonCheck,
    StabilityCheck,
    AggregationRun,
    FrontFit,
    Recurrence,
    MicroRun,
    MicroMesoCompare,
    FluctuationDemo,
    Horizon,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_possible_value().expect("no skipped variants");
        f.write_str(v.get_name())
    }
}

/// Point given either as one coordinate shared by every axis or one per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coord {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Coord {
    fn axis(&self, k: usize) -> f64 {
        match self {
            Coord::Scalar(v) => *v,
            Coord::Vector(v) => v[k],
        }
    }

    fn check(&self, dim: usize, key: &str) -> Result<()> {
        match self {
            Coord::Vector(v) if v.len() != dim => bail!("initial.{key}: expected {dim} coordinates, got {}", v.len()),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    Constant {
        value: f64,
    },
    /// `base + height·max(0, 1 − |x − center|²/width²)²`.
    Bump {
        center: Coord,
        width: f64,
        height: f64,
        base: f64,
    },
    /// `inside` on the box `[lo, hi]` (per axis), `outside` elsewhere.
    Step {
        lo: Coord,
        hi: Coord,
        inside: f64,
        outside: f64,
    },
    /// One-column CSV with header `value`, cells in row-major order.
    File {
        path: String,
    },
}

impl InitialCondition {
    pub fn build(&self, grid: &DomainGrid, base_dir: &Path) -> Result<DensityField> {
        let dim = grid.dim;
        let field = match self {
            InitialCondition::Constant { value } => DensityField::constant(grid.clone(), *value),
            InitialCondition::Bump { center, width, height, base } => {
                center.check(dim, "center")?;
                if !(*width > 0.0) {
                    bail!("initial.width: must be positive, got {width}");
                }
                DensityField::from_fn(grid.clone(), |x| {
                    let r2: f64 = (0..dim).map(|k| (x[k] - center.axis(k)).powi(2)).sum();
                    base + height * (1.0 - r2 / (width * width)).max(0.0).powi(2)
                })
            }
            InitialCondition::Step { lo, hi, inside, outside } => {
                lo.check(dim, "lo")?;
                hi.check(dim, "hi")?;
                DensityField::from_fn(grid.clone(), |x| {
                    if (0..dim).all(|k| x[k] >= lo.axis(k) && x[k] <= hi.axis(k)) {
                        *inside
                    } else {
                        *outside
                    }
                })
            }
            InitialCondition::File { path } => {
                let path = base_dir.join(path);
                let values = read_values(&path)?;
                if values.len() != grid.cells() {
                    bail!(
                        "initial.path: {} holds {} values, grid has {} cells",
                        path.display(),
                        values.len(),
                        grid.cells()
                    );
                }
                DensityField::new(grid.clone(), values, 0.0)
            }
        };
        field.context("initial: invalid initial condition")
    }

    pub fn input_file(&self) -> Option<&str> {
        match self {
            InitialCondition::File { path } => Some(path),
            _ => None,
        }
    }
}

fn read_values(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.clone();
    if headers.len() != 1 || &headers[0] != "value" {
        bail!("{}: expected a single `value` column", path.display());
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            rec[0].trim().parse::<f64>().map_err(|e| anyhow!("{} row {}: {e}", path.display(), i + 2))
        })
        .collect()
}

/// Top level of a configuration file. Experiment-specific knobs live under
/// `settings` and are parsed once the experiment is known.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<Experiment>,
    pub params: ModelParams,
    /// Kernel mass, accepted by `equilibria` in place of a potential.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub grid: Option<DomainGrid>,
    #[serde(default)]
    pub initial: Option<InitialCondition>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub settings: serde_json::Value,
}

/// A parsed configuration together with the raw document and the directory
/// relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub raw: serde_json::Value,
    pub path: PathBuf,
    pub base_dir: PathBuf,
}

fn from_value<T: DeserializeOwned>(value: serde_json::Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        match (prefix.is_empty(), path.as_str()) {
            (true, ".") => anyhow!("config: {inner}"),
            (true, _) => anyhow!("config: `{path}`: {inner}"),
            (false, ".") => anyhow!("config: `{prefix}`: {inner}"),
            (false, _) => anyhow!("config: `{prefix}.{path}`: {inner}"),
        }
    })
}

pub fn parse_str(text: &str) -> Result<ExperimentConfig> {
    let raw: serde_json::Value = serde_json::from_str(text).context("config: not valid JSON")?;
    from_value(raw, "")
}

pub fn parse_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("config: cannot read {}", path.display()))?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("config: {} is not valid JSON", path.display()))?;
    let config = from_value(raw.clone(), "")?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, raw, path: path.to_path_buf(), base_dir })
}

impl ExperimentConfig {
    /// Deserializes `settings`; an absent block means all defaults.
    pub fn settings<T: DeserializeOwned>(&self) -> Result<T> {
        let v = if self.settings.is_null() { serde_json::json!({}) } else { self.settings.clone() };
        from_value(v, "settings")
    }

    pub fn potential(&self, base_dir: &Path) -> Result<Potential> {
        let spec = self.potential.as_ref().ok_or_else(|| anyhow!("config: `potential` is required"))?;
        let dim = self.grid.as_ref().map_or(1, |g| g.dim);
        let spec = match spec {
            PotentialSpec::Tabulated { path } => {
                PotentialSpec::Tabulated { path: base_dir.join(path).to_string_lossy().into_owned() }
            }
            other => other.clone(),
        };
        Potential::from_spec(dim, &spec).context("potential: invalid kernel")
    }

    pub fn grid(&self) -> Result<DomainGrid> {
        let g = self.grid.clone().ok_or_else(|| anyhow!("config: `grid` is required"))?;
        g.validate().context("grid: invalid grid")?;
        Ok(g)
    }

    pub fn initial(&self) -> Result<&InitialCondition> {
        self.initial.as_ref().ok_or_else(|| anyhow!("config: `initial` is required"))
    }

    pub fn input_files(&self) -> Vec<String> {
        let mut files = Vec::new();
        if let Some(PotentialSpec::Tabulated { path }) = &self.potential {
            files.push(path.clone());
        }
        if let Some(f) = self.initial.as_ref().and_then(InitialCondition::input_file) {
            files.push(f.to_string());
        }
        files
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settings_errors_carry_the_prefix() {
        let cfg = parse_str(r#"{"params": {"m": 1, "lambda": 0.2}, "settings": {"t_edn": 1}}"#).unwrap();
        #[derive(Debug, Deserialize)]
        #[serde(deny_unknown_fields)]
        #[allow(dead_code)]
        struct S {
            t_end: Option<f64>,
        }
        let err = cfg.settings::<S>().unwrap_err().to_string();
        assert!(err.contains("settings") && err.contains("t_edn"), "{err}");
    }

    #[test]
    fn bump_profile() {
        let g = DomainGrid::new(1, 10.0, 8, 0.0).unwrap();
        let ic = InitialCondition::Bump { center: Coord::Scalar(5.0), width: 2.0, height: 1.5, base: 0.5 };
        let u = ic.build(&g, Path::new(".")).unwrap();
        // Cell centres 0.625 + 1.25k; the cells at 4.375 and 5.625 sit 0.625 from the centre.
        let expect = 0.5 + 1.5 * (1.0 - 0.625f64.powi(2) / 4.0).powi(2);
        assert!((u.values[3] - expect).abs() < 1e-15 && (u.values[4] - expect).abs() < 1e-15);
        assert_eq!(u.values[0], 0.5);
    }
}
