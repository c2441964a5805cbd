//! Config-driven experiment runner.
//!
//! `run` executes a TOML-described experiment across seeds and sweep values
//! and emits one row per run; `compare` joins a sequential and a parallel
//! output into an efficiency table. Outputs are deterministic: identical
//! configs yield byte-identical files, and worker count changes nothing but
//! the `workers` column itself.

mod config;
mod rows;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand};

pub use config::{
    load_config, parse_config, resolve_workers, ExperimentConfig, MixtureSpec, OneOrMany,
    OutputFormat, ResolvedExperiment, RunSpec, SamplerName, ScheduleSpec, WORKERS_ENV,
};
pub use rows::{
    compare_rows_to_csv, join_strides, read_rows_csv, rows_from_csv, rows_from_json,
    rows_to_csv, rows_to_json, CompareRow, RunRow,
};

use crate::error::{Error, Result};
use crate::metrics::{efficiency, parity_error, RunStats};
use crate::oracle::{counting_oracle, DriftOracle};
use crate::picard::{paradigms_sample, DriftMode, PicardConfig};
use crate::rng::{CounterRng, PRIOR_STREAM};
use crate::samplers::{sample_ddim, sample_ddpm, sample_heun, NoiseArray, Trajectory};

#[derive(Debug, Parser)]
#[command(
    name = "paradigms",
    about = "Diffusion sampling experiments: sequential baselines and a sliding-window parallel engine",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        /// TOML experiment description.
        #[arg(long)]
        config: PathBuf,
        /// Write rows here instead of the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output format, overriding the config.
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
    },
    /// Join sequential and parallel outputs into an efficiency table.
    Compare {
        /// CSV of sequential baseline rows.
        seq: PathBuf,
        /// CSV of parallel rows to score against the baseline.
        par: PathBuf,
        /// Also write the table as CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parse arguments, dispatch, and map errors to exit codes: 2 for bad
/// configs or inputs, 3 for numerical failures, 1 for I/O.
pub fn main() -> i32 {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out, format } => run_command(&config, out.as_deref(), format),
        Command::Compare { seq, par, out } => compare_command(&seq, &par, out.as_deref()),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_command(
    config_path: &Path,
    out: Option<&Path>,
    format: Option<OutputFormat>,
) -> Result<()> {
    let config = load_config(config_path)?;
    let env_workers = std::env::var(WORKERS_ENV).ok();
    let resolved = config.resolve(env_workers.as_deref())?;
    let rows = execute(&resolved)?;
    let text = match format.or(Some(resolved.format)).unwrap() {
        OutputFormat::Csv => rows_to_csv(&rows)?,
        OutputFormat::Json => rows_to_json(&rows)?,
    };
    match out.map(Path::to_path_buf).or(resolved.output) {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn median_ms(mut times: Vec<f64>) -> f64 {
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    times[times.len() / 2]
}

const TIMING_RUNS: usize = 5;

struct SequentialBaseline {
    trajectory: Trajectory,
    steps: usize,
    model_evals: u64,
    wall_ms: f64,
}

fn run_sequential_baseline(
    oracle: &DriftOracle,
    plan: &ResolvedExperiment,
    x0: &[f64],
    noises: Option<&NoiseArray>,
) -> Result<SequentialBaseline> {
    let runs = if plan.record_timing { TIMING_RUNS } else { 1 };
    let evals_before = oracle.eval_count();
    let mut times = Vec::with_capacity(runs);
    let mut trajectory = None;
    for _ in 0..runs {
        let start = Instant::now();
        let t = match plan.sampler {
            SamplerName::Ddpm => sample_ddpm(
                oracle,
                x0,
                noises.expect("ancestral sampling always has a noise array"),
            )?,
            SamplerName::Ddim => {
                sample_ddim(oracle, x0, plan.ladder.as_ref().expect("resolved ladder"))?
            }
            SamplerName::Heun => {
                sample_heun(oracle, x0, plan.ladder.as_ref().expect("resolved ladder"))?
            }
        };
        times.push(start.elapsed().as_secs_f64() * 1e3);
        trajectory = Some(t);
    }
    let trajectory = trajectory.expect("at least one run");
    Ok(SequentialBaseline {
        steps: trajectory.num_steps(),
        model_evals: (oracle.eval_count() - evals_before) / runs as u64,
        wall_ms: if plan.record_timing { median_ms(times) } else { 0.0 },
        trajectory,
    })
}

/// Execute a resolved experiment and return its report rows in seed order,
/// sweeping tolerance (outer) and window (inner) for parallel runs.
pub fn execute(plan: &ResolvedExperiment) -> Result<Vec<RunRow>> {
    let dim = plan.mixture.dim();
    let total_steps = plan.schedule.num_steps();
    let oracle = counting_oracle(plan.mixture.clone(), plan.schedule.clone());
    let mut rows = Vec::new();

    for &seed in &plan.seeds {
        let x0 = CounterRng::new(seed, PRIOR_STREAM).standard_normal_vec(dim);
        let noises = match plan.sampler {
            SamplerName::Ddpm => Some(NoiseArray::ancestral(&plan.schedule, seed, dim)?),
            _ => None,
        };
        let baseline = run_sequential_baseline(&oracle, plan, &x0, noises.as_ref())?;

        if !plan.parallel {
            rows.push(RunRow {
                seed,
                sampler: plan.sampler.as_str().into(),
                parallel: false,
                num_steps: total_steps,
                p: 0,
                tau: 0.0,
                workers: plan.workers,
                model_evals: baseline.model_evals,
                parallel_iters: baseline.steps,
                wall_ms: baseline.wall_ms,
                parity_endpoint: 0.0,
                stride_trace: String::new(),
            });
            continue;
        }

        for &tau in &plan.tolerances {
            for &window in &plan.windows {
                let mode = match plan.sampler {
                    SamplerName::Ddpm => DriftMode::Ddpm,
                    SamplerName::Ddim => DriftMode::Ddim {
                        step_indices: plan.ladder.clone().expect("resolved ladder"),
                    },
                    SamplerName::Heun => DriftMode::Heun {
                        step_indices: plan.ladder.clone().expect("resolved ladder"),
                    },
                };
                let config = PicardConfig {
                    tolerance: tau,
                    window,
                    workers: plan.workers,
                    max_iterations: usize::MAX,
                    mode,
                };
                let runs = if plan.record_timing { TIMING_RUNS } else { 1 };
                let mut times = Vec::with_capacity(runs);
                let mut report = None;
                for _ in 0..runs {
                    let r = paradigms_sample(&oracle, &config, &x0, noises.as_ref())?;
                    times.push(r.wall_time.as_secs_f64() * 1e3);
                    report = Some(r);
                }
                let report = report.expect("at least one run");
                rows.push(RunRow {
                    seed,
                    sampler: plan.sampler.as_str().into(),
                    parallel: true,
                    num_steps: total_steps,
                    p: window,
                    tau,
                    workers: plan.workers,
                    model_evals: report.model_evals,
                    parallel_iters: report.parallel_iterations,
                    wall_ms: if plan.record_timing { median_ms(times) } else { 0.0 },
                    parity_endpoint: parity_error(
                        report.final_state(),
                        baseline.trajectory.final_state(),
                    )?,
                    stride_trace: join_strides(&report.stride_trace),
                });
            }
        }
    }
    Ok(rows)
}

/// Join parallel rows against their same-seed sequential baselines.
///
/// When the baseline file has one row per seed, parallel rows (including
/// sweeps) are matched by seed; otherwise the files must align row by row.
pub fn compare_rows(seq: &[RunRow], par: &[RunRow]) -> Result<Vec<CompareRow>> {
    if seq.is_empty() || par.is_empty() {
        return Err(Error::SchemaMismatch("comparison needs rows on both sides".into()));
    }
    let mut by_seed = std::collections::HashMap::new();
    let mut unique = true;
    for row in seq {
        if by_seed.insert(row.seed, row).is_some() {
            unique = false;
        }
    }
    let pairs: Vec<(&RunRow, &RunRow)> = if unique {
        par.iter()
            .map(|p| {
                by_seed
                    .get(&p.seed)
                    .map(|s| (*s, p))
                    .ok_or_else(|| {
                        Error::SchemaMismatch(format!(
                            "no sequential baseline row for seed {}",
                            p.seed
                        ))
                    })
            })
            .collect::<Result<_>>()?
    } else {
        if seq.len() != par.len() {
            return Err(Error::SchemaMismatch(format!(
                "cannot align {} baseline rows with {} parallel rows",
                seq.len(),
                par.len()
            )));
        }
        let misaligned = seq.iter().zip(par).any(|(s, p)| s.seed != p.seed);
        if misaligned {
            return Err(Error::SchemaMismatch(
                "row-aligned comparison needs matching seeds".into(),
            ));
        }
        seq.iter().zip(par).collect()
    };

    pairs
        .into_iter()
        .map(|(s, p)| {
            if s.num_steps != p.num_steps {
                return Err(Error::SchemaMismatch(format!(
                    "seed {}: baseline has T = {}, parallel run has T = {}",
                    p.seed, s.num_steps, p.num_steps
                )));
            }
            let report = efficiency(
                &RunStats::new(s.model_evals, s.parallel_iters, s.num_steps, from_ms(s.wall_ms)),
                &RunStats::new(p.model_evals, p.parallel_iters, p.num_steps, from_ms(p.wall_ms)),
            )?;
            Ok(CompareRow {
                seed: p.seed,
                sampler: p.sampler.clone(),
                num_steps: p.num_steps,
                tau: p.tau,
                p: p.p,
                inefficiency: report.algorithm_inefficiency,
                iteration_ratio: report.iteration_ratio,
                speedup: report.speedup,
            })
        })
        .collect()
}

fn from_ms(ms: f64) -> Duration {
    Duration::from_secs_f64(ms / 1e3)
}

fn render_table(rows: &[CompareRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>8} {:>8} {:>6} {:>8} {:>6} {:>14} {:>16} {:>10}\n",
        "seed", "sampler", "T", "tau", "p", "inefficiency", "iteration_ratio", "speedup"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:>8} {:>8} {:>6} {:>8} {:>6} {:>14.4} {:>16.4} {:>10.4}\n",
            r.seed, r.sampler, r.num_steps, r.tau, r.p, r.inefficiency, r.iteration_ratio,
            r.speedup
        ));
    }
    out
}

fn compare_command(seq_path: &Path, par_path: &Path, out: Option<&Path>) -> Result<()> {
    let seq = read_rows_csv(seq_path)?;
    let par = read_rows_csv(par_path)?;
    let rows = compare_rows(&seq, &par)?;
    print!("{}", render_table(&rows));
    if let Some(path) = out {
        std::fs::write(path, compare_rows_to_csv(&rows)?)?;
    }
    Ok(())
}
