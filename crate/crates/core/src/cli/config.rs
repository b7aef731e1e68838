//! TOML run configuration.
//!
//! ```toml
//! preset = "fig2"          # or one or more [[sweep]] tables
//! out = "results"
//! workers = 4
//! n_max = 16               # overrides every sweep's truncation
//! max_n_max = 64           # cap for automatic truncation growth
//! plots = true
//!
//! [tolerances]
//! steady = 1e-10
//!
//! [[sweep]]
//! name = "pump"
//! axis = "pump"
//! grid = { kind = "log", start = 1e-3, stop = 10.0, points = 40 }
//! outputs = { cooperativity = true, spectrum = false }
//! [sweep.base]
//! n_emitters = 5
//! g = 0.1
//! n_max = 12
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cli::presets::{preset, PRESET_NAMES};
use crate::cooperativity::{SolveOptions, SweepSettings, SweepSpec};
use crate::error::{Error, Result};
use crate::observables::{CorrelationOptions, HorizonOptions, SpectrumOptions};
use crate::propagator::PropagatorOptions;
use crate::steady_state::SteadyStateOptions;

/// Numerical tolerances; every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Steady-state residual bound.
    pub steady: f64,
    /// Shift used by the steady-state factorization.
    pub shift: f64,
    pub steady_krylov_dim: usize,
    pub steady_max_restarts: usize,
    /// Top Fock population allowed per `max(n, 1)`.
    pub truncation: f64,
    pub stationarity: f64,
    pub krylov_dim: usize,
    pub step_tol: f64,
    /// Decay of `|G|` over the final tenth of the correlation grid.
    pub horizon_tail: f64,
    /// Decay of `|G(t_max)|` required by the spectrum transform.
    pub spectrum_horizon: f64,
    pub padding: usize,
    /// Fixed correlation time step; chosen from the parameters when absent.
    pub dt: Option<f64>,
    pub apodization: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        let steady = SteadyStateOptions::default();
        let prop = PropagatorOptions::default();
        let horizon = HorizonOptions::default();
        let spec = SpectrumOptions::default();
        Self {
            steady: steady.tol,
            shift: steady.shift,
            steady_krylov_dim: steady.krylov_dim,
            steady_max_restarts: steady.max_restarts,
            truncation: crate::steady_state::DEFAULT_TRUNCATION_THRESHOLD,
            stationarity: CorrelationOptions::default().stationarity_tol,
            krylov_dim: prop.krylov_dim,
            step_tol: prop.step_tol,
            horizon_tail: horizon.tail_ratio,
            spectrum_horizon: spec.horizon_ratio,
            padding: spec.padding,
            dt: None,
            apodization: None,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("tolerances.steady", self.steady),
            ("tolerances.truncation", self.truncation),
            ("tolerances.stationarity", self.stationarity),
            ("tolerances.step_tol", self.step_tol),
            ("tolerances.horizon_tail", self.horizon_tail),
            ("tolerances.spectrum_horizon", self.spectrum_horizon),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if !(self.shift < 0.0 && self.shift.is_finite()) {
            return Err(Error::param("tolerances.shift", "must be finite and < 0"));
        }
        if self.krylov_dim == 0 || self.steady_krylov_dim < 2 {
            return Err(Error::param(
                "tolerances",
                "Krylov dimensions must be >= 1 (>= 2 for the steady solve)",
            ));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::param("tolerances.dt", "must be finite and > 0"));
            }
        }
        if let Some(eta) = self.apodization {
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(Error::param(
                    "tolerances.apodization",
                    "must be finite and >= 0",
                ));
            }
        }
        Ok(())
    }
}

/// Provenance block written into manifests; ignored when read back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestInfo {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_preset: Option<String>,
}

/// The file as written by the user.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plots: Option<bool>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, rename = "sweep", skip_serializing_if = "Vec::is_empty")]
    pub sweeps: Vec<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<ManifestInfo>,
}

/// A validated run with presets expanded and overrides applied.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub sweeps: Vec<SweepSpec>,
    pub out: PathBuf,
    pub workers: usize,
    pub max_n_max: Option<usize>,
    pub plots: bool,
    pub tolerances: Tolerances,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub preset: Option<String>,
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

impl ConfigFile {
    pub fn resolve(self, overrides: &Overrides) -> Result<RunConfig> {
        self.tolerances.validate()?;
        let preset_name = match (&overrides.preset, &self.preset) {
            (Some(_), _) if !self.sweeps.is_empty() => {
                return Err(Error::Config(
                    "--preset cannot be combined with [[sweep]] tables".into(),
                ))
            }
            (Some(p), _) => Some(p.clone()),
            (None, p) => p.clone(),
        };
        let (mut sweeps, preset_cap) = match (&preset_name, self.sweeps.is_empty()) {
            (Some(_), false) => {
                return Err(Error::Config(
                    "give either `preset` or [[sweep]] tables, not both".into(),
                ))
            }
            (None, true) => {
                return Err(Error::Config(
                    "no work given: set `preset` or add [[sweep]] tables".into(),
                ))
            }
            (Some(name), true) => {
                let p = preset(name).ok_or_else(|| {
                    Error::Config(format!(
                        "unknown preset `{name}` (known: {})",
                        PRESET_NAMES.join(", ")
                    ))
                })?;
                (p.sweeps, p.max_n_max)
            }
            (None, false) => (self.sweeps, None),
        };
        if let Some(n) = self.n_max {
            for s in &mut sweeps {
                s.base.n_max = n;
            }
        }
        let mut names = HashSet::new();
        for s in &sweeps {
            if s.name.is_empty()
                || !s
                    .name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || "._-".contains(c))
                || s.name.starts_with('.')
            {
                return Err(Error::param(
                    "sweep.name",
                    format!("`{}` must be non-empty and use only [A-Za-z0-9._-]", s.name),
                ));
            }
            if !names.insert(s.name.clone()) {
                return Err(Error::param(
                    "sweep.name",
                    format!("duplicate sweep `{}`", s.name),
                ));
            }
            let values = s.grid.values().map_err(|e| prefix(e, &s.name))?;
            for v in values {
                s.axis.apply(&s.base, v).map_err(|e| prefix(e, &s.name))?;
            }
        }
        let workers = overrides
            .workers
            .or(self.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if workers == 0 {
            return Err(Error::param("workers", "must be >= 1"));
        }
        Ok(RunConfig {
            preset: preset_name,
            sweeps,
            out: overrides
                .out
                .clone()
                .or(self.out)
                .unwrap_or_else(|| PathBuf::from("out")),
            workers,
            max_n_max: self.max_n_max.or(preset_cap),
            plots: self.plots.unwrap_or(true),
            tolerances: self.tolerances,
        })
    }
}

fn prefix(e: Error, sweep: &str) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::InvalidParameter {
            field: format!("sweep `{sweep}`: {field}"),
            reason,
        },
        other => other,
    }
}

impl RunConfig {
    pub fn settings(&self) -> SweepSettings {
        let t = &self.tolerances;
        SweepSettings {
            solve: SolveOptions {
                steady: SteadyStateOptions {
                    tol: t.steady,
                    shift: t.shift,
                    krylov_dim: t.steady_krylov_dim,
                    max_restarts: t.steady_max_restarts,
                    ..SteadyStateOptions::default()
                },
                truncation_threshold: t.truncation,
                max_n_max: self.max_n_max,
            },
            horizon: HorizonOptions {
                dt: t.dt,
                tail_ratio: t.horizon_tail,
                ..HorizonOptions::default()
            },
            correlation: CorrelationOptions {
                propagator: PropagatorOptions {
                    krylov_dim: t.krylov_dim,
                    step_tol: t.step_tol,
                    ..PropagatorOptions::default()
                },
                stationarity_tol: t.stationarity,
            },
            spectrum: SpectrumOptions {
                horizon_ratio: t.spectrum_horizon,
                padding: t.padding,
                apodization: t.apodization,
            },
            workers: self.workers,
        }
    }

    /// A config file that reproduces this run without referring to presets.
    pub fn to_manifest(&self) -> ConfigFile {
        ConfigFile {
            preset: None,
            out: Some(self.out.clone()),
            workers: None,
            n_max: None,
            max_n_max: self.max_n_max,
            plots: Some(self.plots),
            tolerances: self.tolerances.clone(),
            sweeps: self.sweeps.clone(),
            manifest: Some(ManifestInfo {
                version: crate::VERSION.to_string(),
                source_preset: self.preset.clone(),
            }),
        }
    }
}

pub fn manifest_text(config: &RunConfig) -> Result<String> {
    toml::to_string(&config.to_manifest()).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cooperativity::SweepAxis;

    #[test]
    fn minimal_preset() {
        let c = parse_config("preset = \"fig2\"").unwrap();
        let r = c.resolve(&Overrides::default()).unwrap();
        assert_eq!(r.sweeps.len(), 1);
        assert_eq!(r.sweeps[0].base.n_emitters, 5);
        assert_eq!(r.sweeps[0].base.g, 0.1);
        assert_eq!(r.sweeps[0].axis, SweepAxis::Pump);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config("preset = \"fig2\"\ngg = 1")
            .unwrap_err()
            .to_string();
        assert!(err.contains("gg"), "{err}");
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn negative_pump_is_rejected() {
        let text = r#"
[[sweep]]
name = "bad"
axis = "coupling"
grid = { kind = "list", values = [0.1, 0.2] }
[sweep.base]
n_emitters = 2
g = 0.1
pump = -0.5
n_max = 3
"#;
        let err = parse_config(text)
            .unwrap()
            .resolve(&Overrides::default())
            .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { ref field, .. } if field.contains("pump")));
    }

    #[test]
    fn preset_and_sweeps_are_exclusive() {
        let text = r#"
preset = "fig2"
[[sweep]]
name = "x"
axis = "pump"
grid = { kind = "list", values = [0.1] }
[sweep.base]
n_emitters = 1
g = 0.1
n_max = 3
"#;
        assert!(parse_config(text)
            .unwrap()
            .resolve(&Overrides::default())
            .is_err());
        assert!(parse_config("")
            .unwrap()
            .resolve(&Overrides::default())
            .is_err());
        assert!(parse_config("preset = \"nope\"")
            .unwrap()
            .resolve(&Overrides::default())
            .is_err());
    }

    #[test]
    fn manifest_round_trips() {
        let r = parse_config("preset = \"fig7\"\nn_max = 6\n[tolerances]\nsteady = 1e-11")
            .unwrap()
            .resolve(&Overrides {
                workers: Some(2),
                ..Overrides::default()
            })
            .unwrap();
        let text = manifest_text(&r).unwrap();
        let again = parse_config(&text)
            .unwrap()
            .resolve(&Overrides {
                workers: Some(2),
                ..Overrides::default()
            })
            .unwrap();
        assert_eq!(again.sweeps, r.sweeps);
        assert_eq!(again.tolerances, r.tolerances);
        assert_eq!(again.max_n_max, r.max_n_max);
        assert!(again.sweeps.iter().all(|s| s.base.n_max == 6));
    }
}
