//! Experiment configuration: strict TOML with `schedule`, `mixture`, and
//! `run` sections. Unknown keys are rejected so a typo cannot silently fall
//! back to a default.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::oracle::GaussianMixture;
use crate::samplers::uniform_step_indices;
use crate::schedule::{build_linear_schedule_with, NoiseSchedule};

/// Environment variable supplying the default worker count; an explicit
/// `workers` key in the config wins over it.
pub const WORKERS_ENV: &str = "PARADIGMS_WORKERS";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schedule: ScheduleSpec,
    pub mixture: MixtureSpec,
    pub run: RunSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    /// Full-grid step count.
    #[serde(rename = "T")]
    pub num_steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    #[serde(default)]
    pub zero_final_sigma: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub sampler: SamplerName,
    #[serde(default)]
    pub parallel: bool,
    /// Tolerance, or a list to sweep. Parallel runs only.
    pub tolerance: Option<OneOrMany<f64>>,
    /// Window length, or a list to sweep. Parallel runs only.
    pub window: Option<OneOrMany<usize>>,
    /// Coarse step count for the reduced-step samplers (`ddim`, `heun`);
    /// defaults to the full grid.
    pub num_steps: Option<usize>,
    pub workers: Option<usize>,
    pub seeds: Vec<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    /// Record median-of-five wall times. Off by default so that repeated
    /// invocations emit byte-identical files.
    #[serde(default)]
    pub record_timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerName {
    Ddpm,
    Ddim,
    Heun,
}

impl SamplerName {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerName::Ddpm => "ddpm",
            SamplerName::Ddim => "ddim",
            SamplerName::Heun => "heun",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// A scalar, or a list to sweep over.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(vs) => vs.clone(),
        }
    }
}

/// A config with every default applied and every precondition checked,
/// ready to execute.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub schedule: NoiseSchedule,
    pub mixture: GaussianMixture,
    pub sampler: SamplerName,
    pub parallel: bool,
    /// Tolerances to sweep; `[0.0]` placeholder for sequential runs.
    pub tolerances: Vec<f64>,
    /// Windows to sweep; `[0]` placeholder for sequential runs.
    pub windows: Vec<usize>,
    /// Reverse-index ladder for the reduced-step samplers.
    pub ladder: Option<Vec<usize>>,
    pub workers: usize,
    pub seeds: Vec<u64>,
    pub record_timing: bool,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config { path: path.to_path_buf(), message: e.to_string() })?;
    parse_config(&text, path)
}

pub fn parse_config(text: &str, path: &Path) -> Result<ExperimentConfig> {
    toml::from_str(text)
        .map_err(|e| Error::Config { path: path.to_path_buf(), message: e.to_string() })
}

/// Worker count: explicit config value, else the environment default, else 1.
pub fn resolve_workers(config: Option<usize>, env: Option<&str>) -> Result<usize> {
    let workers = match (config, env) {
        (Some(w), _) => w,
        (None, Some(text)) => text.parse::<usize>().map_err(|_| {
            Error::InvalidArgument(format!(
                "{WORKERS_ENV} must be a positive integer, got {text:?}"
            ))
        })?,
        (None, None) => 1,
    };
    if workers == 0 {
        return Err(Error::InvalidArgument("worker count must be positive".into()));
    }
    Ok(workers)
}

impl ExperimentConfig {
    /// Validate against the target modules' preconditions and fill in
    /// defaults. `env_workers` is the raw value of [`WORKERS_ENV`], if set.
    pub fn resolve(&self, env_workers: Option<&str>) -> Result<ResolvedExperiment> {
        let schedule = build_linear_schedule_with(
            self.schedule.num_steps,
            self.schedule.beta_min,
            self.schedule.beta_max,
            self.schedule.zero_final_sigma,
        )?;
        let mixture = GaussianMixture::new(
            self.mixture.weights.clone(),
            self.mixture.means.clone(),
            self.mixture.variances.clone(),
        )?;
        let run = &self.run;
        if run.seeds.is_empty() {
            return Err(Error::InvalidArgument("seeds must list at least one seed".into()));
        }

        let ladder = match (run.sampler, run.num_steps) {
            (SamplerName::Ddpm, Some(_)) => {
                return Err(Error::InvalidArgument(
                    "num_steps applies to the reduced-step samplers (ddim, heun)".into(),
                ));
            }
            (SamplerName::Ddpm, None) => None,
            (_, coarse) => Some(uniform_step_indices(
                schedule.num_steps(),
                coarse.unwrap_or_else(|| schedule.num_steps()),
            )?),
        };

        let (tolerances, windows) = if run.parallel {
            let tolerances = run
                .tolerance
                .as_ref()
                .ok_or_else(|| {
                    Error::InvalidArgument("parallel runs need a tolerance".into())
                })?
                .values();
            let windows = run
                .window
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("parallel runs need a window".into()))?
                .values();
            if tolerances.is_empty() || windows.is_empty() {
                return Err(Error::InvalidArgument(
                    "tolerance and window sweeps must be nonempty".into(),
                ));
            }
            for &tau in &tolerances {
                if !(tau >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "tolerance must be nonnegative, got {tau}"
                    )));
                }
            }
            for &p in &windows {
                if p == 0 {
                    return Err(Error::InvalidArgument(
                        "window must hold at least one step".into(),
                    ));
                }
            }
            (tolerances, windows)
        } else {
            if run.tolerance.is_some() || run.window.is_some() {
                return Err(Error::InvalidArgument(
                    "tolerance and window apply to parallel runs only".into(),
                ));
            }
            (vec![0.0], vec![0])
        };

        Ok(ResolvedExperiment {
            schedule,
            mixture,
            sampler: run.sampler,
            parallel: run.parallel,
            tolerances,
            windows,
            ladder,
            workers: resolve_workers(run.workers, env_workers)?,
            seeds: run.seeds.clone(),
            record_timing: run.record_timing,
            output: run.output.clone(),
            format: run.format.unwrap_or(OutputFormat::Csv),
        })
    }
}
