//! Experiment configuration files, result bundles, plot data and the command
//! implementations behind the CLI.

mod bundle;
mod commands;
mod svg;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ensemble::{ClassifyConfig, EnsembleConfig, TimeGridSpec};
use crate::{Error, Result};

pub use bundle::{read_bundle, write_bundle, write_file_atomic, Bundle, Manifest};
pub use commands::{
    cmd_classify, cmd_plotdata, cmd_run, cmd_sweep, PlotPreset, RunOptions, SweepAxis, SweepOutcome,
};
pub use svg::{line_plot, Curve};

/// Named starting points for experiment files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "fig2-AL")]
    Fig2Al,
    #[serde(rename = "fig2-MBL")]
    Fig2Mbl,
    #[serde(rename = "fig2-ERG")]
    Fig2Erg,
    #[serde(rename = "fig4-fluct")]
    Fig4Fluct,
    #[serde(rename = "figS3-slope")]
    FigS3Slope,
    #[serde(rename = "tab1-classify")]
    Tab1Classify,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Fig2Al,
        Preset::Fig2Mbl,
        Preset::Fig2Erg,
        Preset::Fig4Fluct,
        Preset::FigS3Slope,
        Preset::Tab1Classify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2Al => "fig2-AL",
            Preset::Fig2Mbl => "fig2-MBL",
            Preset::Fig2Erg => "fig2-ERG",
            Preset::Fig4Fluct => "fig4-fluct",
            Preset::FigS3Slope => "figS3-slope",
            Preset::Tab1Classify => "tab1-classify",
        }
    }

    /// Chain of 8 sites, edge pair as the subsystem, `J_perp = 1`.
    pub fn config(self) -> ExperimentConfig {
        let base = EnsembleConfig {
            n_sites: 8,
            j_perp: 1.0,
            realizations: 200,
            ..EnsembleConfig::default()
        };
        let ensemble = match self {
            Preset::Fig2Al => EnsembleConfig {
                j_z: 0.0,
                disorder: 5.0,
                ..base
            },
            Preset::Fig2Mbl | Preset::Tab1Classify => EnsembleConfig {
                j_z: 0.2,
                disorder: 5.0,
                ..base
            },
            Preset::Fig2Erg => EnsembleConfig {
                j_z: 0.2,
                disorder: 0.0,
                ..base
            },
            Preset::Fig4Fluct => EnsembleConfig {
                j_z: 0.2,
                disorder: 8.0,
                ..base
            },
            // Only t = 0 matters; a short grid keeps the optimizer cheap.
            Preset::FigS3Slope => EnsembleConfig {
                j_z: 0.2,
                disorder: 2.0,
                realizations: 100,
                time_grid: TimeGridSpec {
                    t_min: 0.05,
                    t_max: 0.1,
                    points: 2,
                    ..TimeGridSpec::default()
                },
                ..base
            },
        };
        ExperimentConfig {
            name: Some(self.name().to_string()),
            preset: Some(self),
            ensemble,
            ..ExperimentConfig::default()
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset `{s}`")))
    }
}

/// Contents of an experiment file. Fields left out of the file take the
/// preset's values when `preset` is set, and the defaults otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Bundle directory name; defaults to the preset name or `run`.
    pub name: Option<String>,
    pub preset: Option<Preset>,
    pub ensemble: EnsembleConfig,
    /// Root directory for bundles. The `--out` flag takes precedence.
    pub output_dir: Option<PathBuf>,
    /// Also write every realization's series.
    pub write_raw: bool,
    /// Also write a log-x SVG per observable.
    pub write_svg: bool,
    pub classify: ClassifyConfig,
}

impl ExperimentConfig {
    pub fn bundle_name(&self) -> String {
        self.name
            .clone()
            .or_else(|| self.preset.map(|p| p.name().to_string()))
            .unwrap_or_else(|| "run".to_string())
    }

    /// Parses an experiment file. Unknown keys are rejected with their line
    /// and column; a preset supplies every key the file leaves out.
    pub fn from_json(text: &str) -> Result<Self> {
        // Strict pass over the raw text for positioned diagnostics.
        let strict: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolved = match strict.preset {
            None => strict,
            Some(preset) => {
                let mut merged =
                    serde_json::to_value(preset.config()).map_err(|e| Error::Config(e.to_string()))?;
                let overrides: serde_json::Value =
                    serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
                merge_json(&mut merged, overrides);
                serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?
            }
        };
        resolved.ensemble.validate()?;
        Ok(resolved)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn merge_json(base: &mut serde_json::Value, overrides: serde_json::Value) {
    match (base, overrides) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Realization { source, .. } => exit_code(source),
        Error::Io { .. } => 4,
        Error::Config(_)
        | Error::InvalidSiteCount { .. }
        | Error::InvalidBlock { .. }
        | Error::UnsupportedBlock(_)
        | Error::InvalidParameter(_)
        | Error::InvalidTimeGrid(_)
        | Error::MissingSeries(_) => 2,
        _ => 3,
    }
}

/// Formats a value with enough digits to round-trip.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_and_validate() {
        for p in Preset::ALL {
            let cfg = p.config();
            cfg.ensemble.validate().unwrap();
            let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("fig9".parse::<Preset>().is_err());
    }

    #[test]
    fn preset_fills_missing_keys() {
        let cfg = ExperimentConfig::from_json(r#"{"preset": "fig2-AL", "ensemble": {"realizations": 3}}"#).unwrap();
        assert_eq!(cfg.ensemble.realizations, 3);
        assert_eq!(cfg.ensemble.j_z, 0.0);
        assert_eq!(cfg.ensemble.disorder, 5.0);
        assert_eq!(cfg.bundle_name(), "fig2-AL");
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = ExperimentConfig::from_json("{\n  \"ensemble\": {\n    \"disorder_strength\": 5\n  }\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("disorder_strength") && msg.contains("line 3"), "{msg}");
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let err = ExperimentConfig::from_json(r#"{"ensemble": {"n_sites": 7}}"#).unwrap_err();
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::io("x", std::io::Error::other("boom"))), 4);
        assert_eq!(exit_code(&Error::Numerical("drift".into())), 3);
        let wrapped = Error::Realization {
            index: 2,
            source: Box::new(Error::Numerical("drift".into())),
        };
        assert_eq!(exit_code(&wrapped), 3);
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, 0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
