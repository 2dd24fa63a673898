//! Run configuration.
//!
//! Config files are TOML. A minimal file:
//!
//! ```toml
//! seed = 7
//! policies = ["fixed_next_step", "delay_adaptive"]
//!
//! [clock]
//! fps = 30.0
//!
//! [world.generate]          # or: [world] file = "world.json"
//! duration_frames = 600     #     [world] json = '''{ ... }'''
//! num_objects = 24
//! max_speed = 4.0
//!
//! [observer]
//! kind = "noisy"            # or "oracle"
//! position_noise_std = 2.0
//! miss_prob = 0.05
//!
//! [latency]
//! kind = "shifted_lognormal"   # or "constant" (total_ms), "trace" (path)
//! mean_ms = 63.1
//! std_ms = 12.7
//! min_ms = 41.3
//! ```
//!
//! Optional sections: `[scheduler] queue_capacity` (default 5) and
//! `[eval] window` (`"all"` or `"steady_state"`). Sub-seeds for the
//! observer, latency draws and generated world default to values derived
//! from the top-level `seed`. Relative paths are taken relative to the
//! config file.
//!
//! [`RunConfig::resolve`] pins every default and inlines the world; the
//! resolved form is what reports embed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::latency::{fit_shifted_lognormal, LatencyModel, DEFAULT_PREPROCESS_FRACTION};
use crate::pipeline::PipelineOptions;
use crate::scheduler::{PolicyKind, DEFAULT_QUEUE_CAPACITY};
use crate::streameval::EvalWindow;
use crate::types::FrameClock;
use crate::worldsim::{ObserverKind, ObserverSpec, TrafficScenario, WorldSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyKind>,
    pub clock: ClockConfig,
    pub world: WorldSource,
    #[serde(default)]
    pub observer: ObserverConfig,
    pub latency: LatencyConfig,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

fn default_policies() -> Vec<PolicyKind> {
    vec![PolicyKind::DelayAdaptive]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockConfig {
    pub fps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WorldSource {
    File(PathBuf),
    Json(String),
    Spec(WorldSpec),
    Generate(TrafficScenario),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    pub kind: ObserverKind,
    #[serde(default)]
    pub position_noise_std: f64,
    #[serde(default)]
    pub miss_prob: f64,
    #[serde(default)]
    pub false_positive_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        ObserverConfig {
            kind: ObserverKind::Oracle,
            position_noise_std: 0.0,
            miss_prob: 0.0,
            false_positive_rate: 0.0,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyKindConfig {
    Constant,
    ShiftedLognormal,
    Trace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyConfig {
    pub kind: LatencyKindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "default_fraction")]
    pub preprocess_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_fraction() -> f64 {
    DEFAULT_PREPROCESS_FRACTION
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerConfig {
    pub queue_capacity: usize,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default)]
    pub window: EvalWindow,
}

/// Everything a run needs, built from a resolved config.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub config: RunConfig,
    pub world: WorldSpec,
    pub observer: ObserverSpec,
    pub latency: LatencyModel,
    pub clock: FrameClock,
    pub options: PipelineOptions,
    pub window: EvalWindow,
}

impl ResolvedRun {
    /// Hex SHA-256 of the resolved config's JSON encoding.
    pub fn config_digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.config).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Sub-seed for an independent stream; deterministic in `(seed, stream)`.
/// Results fit in 63 bits so a resolved config stays valid TOML.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (z ^ (z >> 31)) >> 1
}

const OBSERVER_STREAM: u64 = 1;
const LATENCY_STREAM: u64 = 2;
const WORLD_STREAM: u64 = 3;

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let field = e
                .span()
                .and_then(|s| text.get(..s.start))
                .map(|prefix| format!("line {}", prefix.lines().count().max(1)))
                .unwrap_or_else(|| "config".into());
            Error::Config { field, message }
        })
    }

    /// JSON input is either a config or a run report, whose embedded
    /// resolved config is used.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut value: serde_json::Value = serde_json::from_str(text)?;
        if let Some(embedded) = value.get_mut("config") {
            value = embedded.take();
        }
        serde_json::from_value(value).map_err(|e| Error::config("config", e.to_string()))
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            RunConfig::from_json(&text)
        } else {
            RunConfig::from_toml(&text)
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    /// Checks every field and pins all defaults. Relative paths are joined
    /// onto `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<ResolvedRun> {
        let clock = FrameClock::new(self.clock.fps).map_err(|_| {
            Error::config(
                "clock.fps",
                format!("must be positive and finite, got {}", self.clock.fps),
            )
        })?;
        if self.policies.is_empty() {
            return Err(Error::config("policies", "at least one policy is required"));
        }

        let world = match &self.world {
            WorldSource::File(p) => WorldSpec::load(base_dir.join(p)),
            WorldSource::Json(text) => WorldSpec::from_json(text),
            WorldSource::Spec(w) => w.validate().map(|_| w.clone()),
            WorldSource::Generate(s) => s.generate(derive_seed(self.seed, WORLD_STREAM)),
        }
        .map_err(|e| Error::config("world", e.to_string()))?;
        if (world.fps - clock.fps()).abs() > 1e-9 {
            return Err(Error::config(
                "clock.fps",
                format!(
                    "{} does not match the world's {} fps",
                    clock.fps(),
                    world.fps
                ),
            ));
        }

        let o = &self.observer;
        let observer = ObserverSpec {
            kind: o.kind,
            position_noise_std: o.position_noise_std,
            miss_prob: o.miss_prob,
            false_positive_rate: o.false_positive_rate,
            seed: o
                .seed
                .unwrap_or_else(|| derive_seed(self.seed, OBSERVER_STREAM)),
        };
        observer
            .validate()
            .map_err(|e| Error::config("observer", e.to_string()))?;

        let l = &self.latency;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| {
                Error::config(format!("latency.{name}"), "required for this latency kind")
            })
        };
        let latency_seed = l
            .seed
            .unwrap_or_else(|| derive_seed(self.seed, LATENCY_STREAM));
        let mut trace_path = None;
        let latency = match l.kind {
            LatencyKindConfig::Constant => LatencyModel::constant(need(l.total_ms, "total_ms")?)
                .map_err(|e| Error::config("latency.total_ms", e.to_string()))?,
            LatencyKindConfig::ShiftedLognormal => fit_shifted_lognormal(
                need(l.mean_ms, "mean_ms")?,
                need(l.std_ms, "std_ms")?,
                need(l.min_ms, "min_ms")?,
            )
            .map_err(|e| Error::config("latency", e.to_string()))?,
            LatencyKindConfig::Trace => {
                let p = l
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::config("latency.path", "required for trace replay"))?;
                let full = base_dir.join(p);
                let model = LatencyModel::replay_file(&full)
                    .map_err(|e| Error::config("latency.path", e.to_string()))?;
                trace_path = Some(full);
                model
            }
        }
        .with_seed(latency_seed)
        .with_preprocess_fraction(l.preprocess_fraction)
        .map_err(|e| Error::config("latency.preprocess_fraction", e.to_string()))?;

        if self.scheduler.queue_capacity < 2 {
            return Err(Error::config(
                "scheduler.queue_capacity",
                "must be at least 2",
            ));
        }

        let config = RunConfig {
            seed: self.seed,
            out: None,
            policies: self.policies.clone(),
            clock: self.clock,
            world: WorldSource::Spec(world.clone()),
            observer: ObserverConfig {
                seed: Some(observer.seed),
                ..self.observer.clone()
            },
            latency: LatencyConfig {
                path: trace_path.or_else(|| l.path.clone()),
                seed: Some(latency_seed),
                ..l.clone()
            },
            scheduler: self.scheduler,
            eval: self.eval,
        };
        Ok(ResolvedRun {
            config,
            world,
            observer,
            latency,
            clock,
            options: PipelineOptions {
                queue_capacity: self.scheduler.queue_capacity,
            },
            window: self.eval.window,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        seed = 3
        policies = ["no_forecast", "delay_adaptive"]
        [clock]
        fps = 30.0
        [world.generate]
        duration_frames = 50
        num_objects = 4
        max_speed = 3.0
        [observer]
        kind = "noisy"
        position_noise_std = 1.0
        [latency]
        kind = "shifted_lognormal"
        mean_ms = 40.0
        std_ms = 9.0
        min_ms = 22.0
    "#;

    #[test]
    fn parses_and_resolves() {
        let cfg = RunConfig::from_toml(BASE).unwrap();
        let run = cfg.resolve(Path::new(".")).unwrap();
        assert_eq!(run.world.duration_frames, 50);
        assert_eq!(run.options.queue_capacity, 5);
        assert!(matches!(run.config.world, WorldSource::Spec(_)));
        assert!(run.config.observer.seed.is_some());
        // resolving an already-resolved config is a fixed point
        let again = run.config.resolve(Path::new(".")).unwrap();
        assert_eq!(again.config, run.config);
        assert_eq!(again.config_digest(), run.config_digest());
    }

    #[test]
    fn resolved_config_survives_json() {
        let run = RunConfig::from_toml(BASE)
            .unwrap()
            .resolve(Path::new("."))
            .unwrap();
        let json = serde_json::to_string(&run.config).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, run.config);
    }

    #[test]
    fn resolved_config_survives_toml() {
        let run = RunConfig::from_toml(BASE)
            .unwrap()
            .resolve(Path::new("."))
            .unwrap();
        let text = run.config.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), run.config);
    }

    #[test]
    fn report_json_yields_its_config() {
        let run = RunConfig::from_toml(BASE)
            .unwrap()
            .resolve(Path::new("."))
            .unwrap();
        let report = serde_json::json!({ "policy": "no_forecast", "config": run.config });
        assert_eq!(
            RunConfig::from_json(&report.to_string()).unwrap(),
            run.config
        );
    }

    #[test]
    fn negative_fps_names_the_field() {
        let cfg = RunConfig::from_toml(&BASE.replace("fps = 30.0", "fps = -30.0")).unwrap();
        let err = cfg.resolve(Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("clock.fps"), "{err}");
    }

    #[test]
    fn missing_latency_field_is_named() {
        let cfg = RunConfig::from_toml(&BASE.replace("min_ms = 22.0", "")).unwrap();
        let err = cfg.resolve(Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("latency.min_ms"), "{err}");
    }

    #[test]
    fn seed_is_mandatory_and_unknown_keys_rejected() {
        assert!(RunConfig::from_toml(&BASE.replace("seed = 3", "")).is_err());
        assert!(RunConfig::from_toml(&format!("{BASE}\nbogus = 1\n")).is_err());
        let bad_policy = BASE.replace("\"no_forecast\"", "\"yolo\"");
        assert!(RunConfig::from_toml(&bad_policy).is_err());
    }

    #[test]
    fn sub_seeds_differ() {
        assert_ne!(
            derive_seed(1, OBSERVER_STREAM),
            derive_seed(1, LATENCY_STREAM)
        );
        assert_ne!(
            derive_seed(1, OBSERVER_STREAM),
            derive_seed(2, OBSERVER_STREAM)
        );
    }
}
