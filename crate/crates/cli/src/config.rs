//! Experiment configuration: a TOML file with one section per concern,
//! overridden by command-line flags, resolved into an effective
//! configuration that is emitted with every output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use srdetect::calibrate::GridSpec;
use srdetect::grid::Scheme;
use srdetect::model::{ChangeModel, ExponentialModel, GaussianMeanShiftModel};
use srdetect::montecarlo::McConfig;

/// Environment variable supplying the default output directory.
pub const OUT_DIR_ENV: &str = "SRDETECT_OUT_DIR";

/// Raw configuration file: every field optional, unknown keys rejected.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    model: ModelSection,
    numerics: NumericsSection,
    montecarlo: McSection,
    output: OutputSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ModelSection {
    family: Option<String>,
    theta: Option<f64>,
    mu: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct NumericsSection {
    nodes: Option<usize>,
    scheme: Option<String>,
    tolerance: Option<f64>,
    nu_max: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct McSection {
    runs: Option<u64>,
    seed: Option<u64>,
    step_cap: Option<u64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct OutputSection {
    dir: Option<PathBuf>,
}

/// Command-line overrides for the file values.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct Overrides {
    /// Configuration file to read before applying flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Observation model family: "exponential" or "gaussian".
    #[arg(long, global = true, value_name = "FAMILY")]
    pub model: Option<String>,
    /// Post-change rate of the exponential model (pre-change rate is 1).
    #[arg(long, global = true, value_name = "THETA")]
    pub theta: Option<f64>,
    /// Post-change mean of the Gaussian model (unit variance).
    #[arg(long, global = true, value_name = "MU")]
    pub mu: Option<f64>,
    /// Quadrature nodes for the solver grids.
    #[arg(long, global = true, value_name = "N")]
    pub nodes: Option<usize>,
    /// Quadrature scheme: "gauss-legendre" or "trapezoid".
    #[arg(long, global = true, value_name = "SCHEME")]
    pub scheme: Option<String>,
    /// Relative tolerance for calibration root finding.
    #[arg(long, global = true, value_name = "TOL")]
    pub tolerance: Option<f64>,
    /// Change-point depth for tabulated delays and truncated sums.
    #[arg(long = "nu-max", global = true, value_name = "N")]
    pub nu_max: Option<usize>,
    /// Monte Carlo runs.
    #[arg(long, global = true, value_name = "N")]
    pub runs: Option<u64>,
    /// Monte Carlo base seed.
    #[arg(long, global = true, value_name = "SEED")]
    pub seed: Option<u64>,
    /// Per-run step cap before censoring.
    #[arg(long = "cap", global = true, value_name = "N")]
    pub step_cap: Option<u64>,
    /// Directory for file outputs.
    #[arg(long = "out-dir", global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

/// Observation model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Exponential observations, rate 1 before and `theta` after.
    Exponential,
    /// Standard normal observations shifted by `mu` after the change.
    Gaussian,
}

/// Fully resolved configuration with every default made explicit.
#[derive(Debug, Clone, Serialize)]
pub struct Effective {
    /// Model section.
    pub model: EffectiveModel,
    /// Numerics section.
    pub numerics: EffectiveNumerics,
    /// Monte Carlo section.
    pub montecarlo: EffectiveMc,
    /// Output section.
    pub output: EffectiveOutput,
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectiveModel {
    pub family: Family,
    pub theta: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectiveNumerics {
    pub nodes: usize,
    pub scheme: String,
    pub tolerance: f64,
    pub nu_max: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectiveMc {
    pub runs: u64,
    pub seed: u64,
    pub step_cap: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectiveOutput {
    pub dir: PathBuf,
}

impl Effective {
    /// Reads the optional file, applies flag overrides and environment
    /// defaults, and validates the result, reporting every offending field
    /// at once.
    pub fn resolve(overrides: &Overrides) -> Result<Self> {
        let file = match &overrides.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config file {}", path.display()))?;
                toml::from_str::<FileConfig>(&text)
                    .with_context(|| format!("cannot parse config file {}", path.display()))?
            }
            None => FileConfig::default(),
        };

        let family_name = overrides
            .model
            .clone()
            .or(file.model.family)
            .unwrap_or_else(|| "exponential".to_string());
        let theta = overrides.theta.or(file.model.theta).unwrap_or(2.0);
        let mu = overrides.mu.or(file.model.mu).unwrap_or(1.0);
        let nodes = overrides.nodes.or(file.numerics.nodes).unwrap_or(256);
        let scheme_name = overrides
            .scheme
            .clone()
            .or(file.numerics.scheme)
            .unwrap_or_else(|| "gauss-legendre".to_string());
        let tolerance = overrides.tolerance.or(file.numerics.tolerance).unwrap_or(1e-9);
        let nu_max = overrides.nu_max.or(file.numerics.nu_max).unwrap_or(20);
        let runs = overrides.runs.or(file.montecarlo.runs).unwrap_or(100_000);
        let seed = overrides.seed.or(file.montecarlo.seed).unwrap_or(1);
        let step_cap = overrides.step_cap.or(file.montecarlo.step_cap).unwrap_or(10_000_000);
        let dir = overrides
            .out_dir
            .clone()
            .or(file.output.dir)
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));

        let mut problems = Vec::new();
        let family = match family_name.as_str() {
            "exponential" => Some(Family::Exponential),
            "gaussian" => Some(Family::Gaussian),
            other => {
                problems.push(format!(
                    "model.family must be \"exponential\" or \"gaussian\", got \"{other}\""
                ));
                None
            }
        };
        if !theta.is_finite() || theta <= 1.0 {
            problems.push(format!("model.theta must be a finite value above 1, got {theta}"));
        }
        if !mu.is_finite() || mu <= 0.0 {
            problems.push(format!("model.mu must be finite positive, got {mu}"));
        }
        if !(8..=65536).contains(&nodes) {
            problems.push(format!("numerics.nodes must lie in [8, 65536], got {nodes}"));
        }
        if scheme_name.parse::<Scheme>().is_err() {
            problems.push(format!(
                "numerics.scheme must be \"gauss-legendre\" or \"trapezoid\", got \
                 \"{scheme_name}\""
            ));
        }
        if !tolerance.is_finite() || tolerance <= 0.0 {
            problems.push(format!("numerics.tolerance must be positive, got {tolerance}"));
        }
        if nu_max > 10_000 {
            problems.push(format!("numerics.nu_max must be at most 10000, got {nu_max}"));
        }
        if runs == 0 {
            problems.push("montecarlo.runs must be at least 1".to_string());
        }
        if step_cap == 0 {
            problems.push("montecarlo.step_cap must be at least 1".to_string());
        }
        if !problems.is_empty() {
            anyhow::bail!("invalid configuration: {}", problems.join("; "));
        }

        Ok(Self {
            model: EffectiveModel { family: family.expect("validated above"), theta, mu },
            numerics: EffectiveNumerics {
                nodes,
                scheme: scheme_name,
                tolerance,
                nu_max,
            },
            montecarlo: EffectiveMc { runs, seed, step_cap },
            output: EffectiveOutput { dir },
        })
    }

    /// Instantiates the configured observation model.
    pub fn build_model(&self) -> Result<Box<dyn ChangeModel<f64>>> {
        Ok(match self.model.family {
            Family::Exponential => Box::new(ExponentialModel::new(self.model.theta)?),
            Family::Gaussian => Box::new(GaussianMeanShiftModel::new(self.model.mu)?),
        })
    }

    /// Grid recipe for the solver calls.
    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            nodes: self.numerics.nodes,
            scheme: self.numerics.scheme.parse().expect("validated at resolution"),
        }
    }

    /// Monte Carlo settings.
    pub fn mc_config(&self) -> McConfig {
        McConfig {
            runs: self.montecarlo.runs,
            seed: self.montecarlo.seed,
            step_cap: self.montecarlo.step_cap,
        }
    }

    /// Joins a file name onto the output directory.
    pub fn out_path(&self, name: &Path) -> PathBuf {
        if name.is_absolute() {
            name.to_path_buf()
        } else {
            self.output.dir.join(name)
        }
    }

    /// Flat `key = value` lines describing the effective configuration,
    /// in a fixed order.
    pub fn describe(&self) -> Vec<(String, String)> {
        let family = match self.model.family {
            Family::Exponential => "exponential",
            Family::Gaussian => "gaussian",
        };
        vec![
            ("model.family".to_string(), family.to_string()),
            ("model.theta".to_string(), self.model.theta.to_string()),
            ("model.mu".to_string(), self.model.mu.to_string()),
            ("numerics.nodes".to_string(), self.numerics.nodes.to_string()),
            ("numerics.scheme".to_string(), self.numerics.scheme.clone()),
            ("numerics.tolerance".to_string(), format!("{:e}", self.numerics.tolerance)),
            ("numerics.nu_max".to_string(), self.numerics.nu_max.to_string()),
            ("montecarlo.runs".to_string(), self.montecarlo.runs.to_string()),
            ("montecarlo.seed".to_string(), self.montecarlo.seed.to_string()),
            ("montecarlo.step_cap".to_string(), self.montecarlo.step_cap.to_string()),
            ("output.dir".to_string(), self.output.dir.display().to_string()),
        ]
    }

    /// The effective configuration as a TOML document, suitable for
    /// feeding back through `--config` unchanged.
    pub fn to_toml(&self) -> String {
        let family = match self.model.family {
            Family::Exponential => "exponential",
            Family::Gaussian => "gaussian",
        };
        let mut text = String::new();
        let _ = writeln!(text, "[model]");
        let _ = writeln!(text, "family = \"{family}\"");
        let _ = writeln!(text, "theta = {:?}", self.model.theta);
        let _ = writeln!(text, "mu = {:?}", self.model.mu);
        let _ = writeln!(text);
        let _ = writeln!(text, "[numerics]");
        let _ = writeln!(text, "nodes = {}", self.numerics.nodes);
        let _ = writeln!(text, "scheme = \"{}\"", self.numerics.scheme);
        let _ = writeln!(text, "tolerance = {:?}", self.numerics.tolerance);
        let _ = writeln!(text, "nu_max = {}", self.numerics.nu_max);
        let _ = writeln!(text);
        let _ = writeln!(text, "[montecarlo]");
        let _ = writeln!(text, "runs = {}", self.montecarlo.runs);
        let _ = writeln!(text, "seed = {}", self.montecarlo.seed);
        let _ = writeln!(text, "step_cap = {}", self.montecarlo.step_cap);
        let _ = writeln!(text);
        let _ = writeln!(text, "[output]");
        let _ = writeln!(text, "dir = \"{}\"", self.output.dir.display());
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_overrides() -> Overrides {
        Overrides::default()
    }

    #[test]
    fn defaults_resolve_without_a_file() {
        let cfg = Effective::resolve(&no_overrides()).unwrap();
        assert_eq!(cfg.model.family, Family::Exponential);
        assert_eq!(cfg.model.theta, 2.0);
        assert_eq!(cfg.numerics.nodes, 256);
        assert_eq!(cfg.numerics.scheme, "gauss-legendre");
        assert_eq!(cfg.montecarlo.runs, 100_000);
        assert_eq!(cfg.montecarlo.seed, 1);
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.toml");
        std::fs::write(&path, "[numerics]\nnodes = 64\n\n[montecarlo]\nseed = 9\n").unwrap();
        let overrides = Overrides {
            config: Some(path),
            nodes: Some(128),
            ..Overrides::default()
        };
        let cfg = Effective::resolve(&overrides).unwrap();
        assert_eq!(cfg.numerics.nodes, 128, "flag beats file");
        assert_eq!(cfg.montecarlo.seed, 9, "file beats default");
    }

    #[test]
    fn effective_config_round_trips_through_toml() {
        let overrides = Overrides {
            model: Some("gaussian".to_string()),
            mu: Some(0.75),
            nodes: Some(96),
            tolerance: Some(1e-7),
            ..Overrides::default()
        };
        let cfg = Effective::resolve(&overrides).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("effective.toml");
        std::fs::write(&path, cfg.to_toml()).unwrap();
        let reloaded = Effective::resolve(&Overrides {
            config: Some(path),
            ..Overrides::default()
        })
        .unwrap();
        assert_eq!(cfg.to_toml(), reloaded.to_toml(), "round trip must be lossless");
    }

    #[test]
    fn validation_reports_every_offending_field() {
        let overrides = Overrides {
            model: Some("weibull".to_string()),
            theta: Some(0.5),
            nodes: Some(3),
            runs: Some(0),
            ..Overrides::default()
        };
        let err = Effective::resolve(&overrides).unwrap_err().to_string();
        for needle in ["model.family", "model.theta", "numerics.nodes", "montecarlo.runs"] {
            assert!(err.contains(needle), "missing {needle} in: {err}");
        }
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.toml");
        std::fs::write(&path, "[numerics]\nnoddes = 64\n").unwrap();
        let overrides = Overrides { config: Some(path), ..Overrides::default() };
        let err = format!("{:#}", Effective::resolve(&overrides).unwrap_err());
        assert!(err.contains("cannot parse config file"), "got: {err}");
    }
}
