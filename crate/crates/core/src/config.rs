//! Pipeline configuration: a flat TOML file with an optional model roster.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bc::{ExportMode, DEFAULT_DENSITY, DEFAULT_VISCOSITY};
use crate::ids::CaseId;
use crate::models::{Hyperparameters, ModelFamily, ParamGrid};
use crate::oracle::DEFAULT_MEASURED_VELOCITY;
use crate::trace::{DEFAULT_DIASTOLE_FRACTION, STEP_COUNTS};

pub const DEFAULT_EVALUATION_HEART_RATE: f64 = 135.6;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TOP_MODELS: usize = 5;
pub const DEFAULT_SYNTH_NOISE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("config field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

/// One named model in the training roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosterEntry {
    pub name: String,
    pub family: ModelFamily,
    /// Search the grid on the validation split before the final fit.
    #[serde(default)]
    pub tune: bool,
    #[serde(default, skip_serializing_if = "Hyperparameters::is_empty")]
    pub hyperparameters: Hyperparameters,
    /// Overrides the family's default grid when tuning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<ParamGrid>,
    /// Names of earlier roster entries averaged by a voting ensemble.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<String>,
}

impl RosterEntry {
    fn new(name: &str, family: ModelFamily, tune: bool) -> Self {
        Self {
            name: name.into(),
            family,
            tune,
            hyperparameters: Hyperparameters::new(),
            grid: None,
            members: Vec::new(),
        }
    }
}

/// The eight models compared by default.
pub fn default_roster() -> Vec<RosterEntry> {
    use ModelFamily::*;
    let mut voting = RosterEntry::new("voting", Voting, false);
    voting.members = vec!["knn".into(), "random_forest".into()];
    vec![
        RosterEntry::new("linear_regression", Linear, false),
        RosterEntry::new("svr", Svr, true),
        RosterEntry::new("gradient_boosted", GradientBoosted, true),
        RosterEntry::new("gradient_boosted_leafwise", GradientBoostedLeafwise, true),
        RosterEntry::new("random_forest", RandomForest, false),
        RosterEntry::new("random_forest_optimized", RandomForest, true),
        RosterEntry::new("knn", Knn, true),
        voting,
    ]
}

fn default_density() -> f64 {
    DEFAULT_DENSITY
}
fn default_viscosity() -> f64 {
    DEFAULT_VISCOSITY
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_diastole() -> f64 {
    DEFAULT_DIASTOLE_FRACTION
}
fn default_heart_rate() -> f64 {
    DEFAULT_EVALUATION_HEART_RATE
}
fn default_measured() -> f64 {
    DEFAULT_MEASURED_VELOCITY
}
fn default_top() -> usize {
    DEFAULT_TOP_MODELS
}
fn default_noise() -> f64 {
    DEFAULT_SYNTH_NOISE
}
fn default_case() -> CaseId {
    CaseId::PreIntervention
}
fn default_mode() -> ExportMode {
    ExportMode::Snapshot
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Directory holding digitizer CSVs and their `manifest.toml`.
    pub traces_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Vessel area file; synthetic placeholder areas when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<PathBuf>,
    #[serde(default = "default_density")]
    pub density: f64,
    #[serde(default = "default_viscosity")]
    pub viscosity: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_diastole")]
    pub diastole_fraction: f64,
    /// Forces every trace onto this step count instead of the span rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_count: Option<usize>,
    #[serde(default = "default_heart_rate")]
    pub evaluation_heart_rate: f64,
    #[serde(default = "default_case")]
    pub evaluation_case: CaseId,
    #[serde(default = "default_measured")]
    pub measured_coarctation_velocity: f64,
    #[serde(default = "default_mode")]
    pub bc_mode: ExportMode,
    /// Number of best models that receive BC sets.
    #[serde(default = "default_top")]
    pub top_models: usize,
    /// Explicit models for BC generation, bypassing the top-N rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bc_models: Option<Vec<String>>,
    /// Peak-to-peak noise of the synthetic corpus, m/s.
    #[serde(default = "default_noise")]
    pub synth_noise: f64,
    #[serde(default = "default_roster")]
    pub roster: Vec<RosterEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    /// Defaults for everything except the two directories.
    pub fn with_paths(traces_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        let text = toml::to_string(&Minimal {
            traces_dir: traces_dir.into(),
            output_dir: output_dir.into(),
        })
        .expect("paths serialize");
        toml::from_str(&text).expect("defaults deserialize")
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: base_dir.to_path_buf(),
            message: e.message().to_string(),
        })?;
        config.base_dir = base_dir.to_path_buf();
        config.validate()?;
        Ok(config)
    }

    pub fn dump(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Resolves a configured path against the config file's directory.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn traces_path(&self) -> PathBuf {
        self.resolve(&self.traces_dir)
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(field, format!("must be positive, got {v}")))
            }
        };
        positive("density", self.density)?;
        positive("evaluation_heart_rate", self.evaluation_heart_rate)?;
        positive("measured_coarctation_velocity", self.measured_coarctation_velocity)?;
        if !(self.viscosity >= 0.0 && self.viscosity.is_finite()) {
            return Err(invalid(
                "viscosity",
                format!("must be non-negative, got {}", self.viscosity),
            ));
        }
        if !(0.0..1.0).contains(&self.diastole_fraction) {
            return Err(invalid(
                "diastole_fraction",
                format!("must lie in [0, 1), got {}", self.diastole_fraction),
            ));
        }
        if !(self.synth_noise >= 0.0 && self.synth_noise.is_finite()) {
            return Err(invalid(
                "synth_noise",
                format!("must be non-negative, got {}", self.synth_noise),
            ));
        }
        if let Some(n) = self.step_count {
            if !STEP_COUNTS.contains(&n) {
                return Err(invalid("step_count", format!("must be 200 or 350, got {n}")));
            }
        }
        if self.top_models == 0 {
            return Err(invalid("top_models", "must be at least 1"));
        }
        if self.roster.is_empty() {
            return Err(invalid("roster", "needs at least one model"));
        }
        let mut seen = BTreeSet::new();
        for entry in &self.roster {
            let name = &entry.name;
            if name.is_empty()
                || name
                    .chars()
                    .any(|c| !(c.is_ascii_alphanumeric() || c == '_' || c == '-'))
            {
                return Err(invalid(
                    "roster.name",
                    format!("`{name}` may only contain letters, digits, `_` and `-`"),
                ));
            }
            if entry.family == ModelFamily::Voting {
                if entry.members.len() < 2 {
                    return Err(invalid(
                        "roster.members",
                        format!("voting model `{name}` needs at least 2 members"),
                    ));
                }
                if let Some(m) = entry.members.iter().find(|m| !seen.contains(*m)) {
                    return Err(invalid(
                        "roster.members",
                        format!("`{m}` of `{name}` is not an earlier roster entry"),
                    ));
                }
            } else if !entry.members.is_empty() {
                return Err(invalid(
                    "roster.members",
                    format!("only voting models take members (`{name}`)"),
                ));
            }
            if !seen.insert(name.clone()) {
                return Err(invalid("roster.name", format!("duplicate model name `{name}`")));
            }
        }
        if let Some(models) = &self.bc_models {
            if models.is_empty() {
                return Err(invalid("bc_models", "must name at least one model"));
            }
            if let Some(m) = models.iter().find(|m| !seen.contains(*m)) {
                return Err(invalid("bc_models", format!("`{m}` is not in the roster")));
            }
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Minimal {
    traces_dir: PathBuf,
    output_dir: PathBuf,
}

pub fn load_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    PipelineConfig::from_toml_str(&text, &base).map_err(|e| match e {
        ConfigError::Parse { message, .. } => ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = PipelineConfig::from_toml_str("traces_dir = \"t\"\noutput_dir = \"o\"\n", Path::new("/cfg")).unwrap();
        assert_eq!(c.density, 1060.0);
        assert_eq!(c.evaluation_heart_rate, 135.6);
        assert_eq!(c.measured_coarctation_velocity, 3.49);
        assert_eq!(c.bc_mode, ExportMode::Snapshot);
        assert_eq!(c.roster.len(), 8);
        assert_eq!(c.traces_path(), PathBuf::from("/cfg/t"));
        assert_eq!(
            c,
            PipelineConfig {
                base_dir: "/cfg".into(),
                ..PipelineConfig::with_paths("t", "o")
            }
        );
    }

    #[test]
    fn unknown_and_missing_keys_are_named() {
        let err = PipelineConfig::from_toml_str(
            "traces_dir = \"t\"\noutput_dir = \"o\"\ndensty = 1000.0\n",
            Path::new(""),
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("densty"), "{err}");
        let err = PipelineConfig::from_toml_str("traces_dir = \"t\"\n", Path::new(""))
            .unwrap_err()
            .to_string();
        assert!(err.contains("output_dir"), "{err}");
    }

    #[test]
    fn dump_load_round_trip() {
        let mut c = PipelineConfig::with_paths("t", "o");
        c.step_count = Some(350);
        c.bc_models = Some(vec!["knn".into()]);
        c.roster[1].grid = Some(ParamGrid::new().with("c", vec![1.0.into(), 2.0.into()]));
        let text = c.dump();
        let back = PipelineConfig::from_toml_str(&text, Path::new("")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn validation_names_fields() {
        let base = "traces_dir = \"t\"\noutput_dir = \"o\"\n";
        for (extra, field) in [
            ("density = -1.0\n", "density"),
            ("step_count = 100\n", "step_count"),
            ("diastole_fraction = 1.5\n", "diastole_fraction"),
            ("bc_models = [\"nope\"]\n", "bc_models"),
        ] {
            let err = PipelineConfig::from_toml_str(&format!("{base}{extra}"), Path::new("")).unwrap_err();
            assert!(err.to_string().contains(field), "{err}");
        }
    }
}
