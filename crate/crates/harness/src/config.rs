//! Experiment configuration files.
//!
//! Configs are JSON with a `version` field; unknown keys anywhere are
//! rejected so that a typo cannot silently change an experiment.

use std::fs;
use std::path::{Path, PathBuf};

use emt_core::benchmark::{make_benchmark, BenchmarkSpec};
use emt_core::multix::{BilevelPreset, BilevelProblem, ScenarioSpec, SphereFidelitySpec};
use emt_core::polecart::{make_polecart_tasks, PoleCartParams};
use emt_core::{EngineSpec, EvolverConfig, MultitaskProblem};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::presets;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub problem: ProblemSpec,
    pub engine: EngineSpec,
    /// Population and budget; `seed` is replaced by `base_seed + run`.
    pub evolver: EvolverConfig,
    pub n_runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Write the best controller's episode of every pole-balancing task.
    #[serde(default)]
    pub dump_episodes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemSpec {
    /// A named problem from [`presets`].
    Preset { name: String },
    Benchmark(BenchmarkSpec),
    Polecart {
        short_pole_lengths: Vec<f64>,
        /// Physics; defaults to the frictionless system.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<PoleCartParams>,
    },
    Multifidelity(SphereFidelitySpec),
    Bilevel {
        preset: BilevelPreset,
        /// Lower-level run settings per upper generation.
        lower: EvolverConfig,
    },
    Multiscenario(ScenarioSpec),
}

/// A problem ready to be solved.
pub enum Problem {
    Multitask {
        problem: MultitaskProblem,
        /// Short-pole lengths and physics when the tasks are pole balancing.
        polecart: Option<(Vec<f64>, PoleCartParams)>,
    },
    Bilevel { problem: BilevelProblem, lower: EvolverConfig },
}

impl ProblemSpec {
    /// Follows preset references to a concrete descriptor.
    pub fn resolve(&self) -> std::result::Result<ProblemSpec, String> {
        match self {
            ProblemSpec::Preset { name } => {
                presets::lookup(name).ok_or_else(|| format!("unknown problem preset `{name}` (see `emt presets list`)"))
            }
            other => Ok(other.clone()),
        }
    }

    /// Builds a fresh problem instance (with zeroed evaluation counters).
    pub fn build(&self) -> std::result::Result<Problem, String> {
        let resolved = self.resolve()?;
        let err = |e: emt_core::Error| e.to_string();
        Ok(match resolved {
            ProblemSpec::Preset { .. } => unreachable!("resolved above"),
            ProblemSpec::Benchmark(spec) => Problem::Multitask { problem: make_benchmark(&spec).map_err(err)?, polecart: None },
            ProblemSpec::Polecart { short_pole_lengths, params } => {
                let base = params.unwrap_or_else(|| PoleCartParams::with_short_pole(0.6));
                let problem = make_polecart_tasks(&short_pole_lengths, &base).map_err(err)?;
                Problem::Multitask { problem, polecart: Some((short_pole_lengths, base)) }
            }
            ProblemSpec::Multifidelity(spec) => Problem::Multitask { problem: spec.build().map_err(err)?, polecart: None },
            ProblemSpec::Multiscenario(spec) => Problem::Multitask { problem: spec.build().map_err(err)?, polecart: None },
            ProblemSpec::Bilevel { preset, lower } => {
                lower.validate().map_err(err)?;
                Problem::Bilevel { problem: preset.problem(), lower }
            }
        })
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let fail = |message: String| HarnessError::Config { path: path.to_path_buf(), message };
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| fail(e.to_string()))?;
        config.validate().map_err(|(key, msg)| {
            let at = line_of(text, key).map(|l| format!(" at line {l}")).unwrap_or_default();
            fail(format!("{msg}{at}"))
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_json(&text, path)
    }

    /// Semantic checks; on failure returns the offending key and a message.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.version != CONFIG_VERSION {
            return Err(("version", format!("unsupported version {} (expected {CONFIG_VERSION})", self.version)));
        }
        if self.n_runs == 0 {
            return Err(("n_runs", "n_runs must be at least 1".into()));
        }
        self.evolver.validate().map_err(|e| ("evolver", e.to_string()))?;
        match &self.engine {
            EngineSpec::Adaptive(options) => options.validate().map_err(|e| ("engine", e.to_string()))?,
            EngineSpec::Mfea { rmp } if !(0.0..=1.0).contains(rmp) => {
                return Err(("rmp", format!("rmp {rmp} outside [0, 1]")));
            }
            _ => {}
        }
        match self.problem.build().map_err(|e| ("problem", e))? {
            Problem::Bilevel { .. } if !matches!(self.engine, EngineSpec::Adaptive(_)) => Err((
                "engine",
                "bilevel problems solve their lower level with the adaptive engine; set engine.kind to \"adaptive\"".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Seed of run `r`.
    pub fn seed(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add(run as u64)
    }

    /// `--out` wins, then `output_dir`, then `$EMT_OUTPUT_ROOT/<stem>`, then
    /// `results/<stem>`.
    pub fn output_dir(&self, config_path: &Path, cli_out: Option<&Path>) -> PathBuf {
        if let Some(out) = cli_out {
            return out.to_path_buf();
        }
        if let Some(dir) = &self.output_dir {
            return dir.clone();
        }
        let stem = config_path.file_stem().map(PathBuf::from).unwrap_or_else(|| "experiment".into());
        match std::env::var_os(OUTPUT_ROOT_VAR) {
            Some(root) if !root.is_empty() => PathBuf::from(root).join(stem),
            _ => PathBuf::from("results").join(stem),
        }
    }
}

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_VAR: &str = "EMT_OUTPUT_ROOT";

/// 1-based line of the first occurrence of `"key"` in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}
