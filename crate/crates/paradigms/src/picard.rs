//! Sliding-window parallel sampler and full-trajectory Picard iteration.
//!
//! The window engine evaluates drift at every state of a window in parallel,
//! recombines the results through an ordered prefix pass that uses the
//! identical floating-point expression as the sequential samplers, then
//! advances the window past every position whose update has stabilised. With
//! the tolerance at zero it reproduces the sequential chain bit for bit;
//! loosening the tolerance trades a bounded distributional shift for fewer
//! passes over the chain.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::oracle::DriftOracle;
use crate::samplers::{DdimRule, DdpmRule, HeunRule, NoiseArray, StepRule, Trajectory};

/// Stopping tolerance used by [`picard_full`] callers that have no better
/// scale for their drift.
pub const DEFAULT_STOP_TOL: f64 = 1e-10;

/// Hard ceiling on per-coordinate magnitude before a run is declared
/// divergent, scaled by sqrt(dim) when applied to a state's norm.
const DIVERGENCE_NORM: f64 = 1e6;

/// Which stepping rule the window engine iterates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DriftMode {
    /// Ancestral chain over the full schedule grid.
    Ddpm,
    /// Deterministic chain over a coarse ladder of reverse indices.
    Ddim { step_indices: Vec<usize> },
    /// Heun predictor-corrector chain over a coarse ladder.
    Heun { step_indices: Vec<usize> },
}

/// Knobs for one window-engine run.
#[derive(Debug, Clone)]
pub struct PicardConfig {
    /// Per-position convergence tolerance `tau`; a position counts as settled
    /// once its mean-square update falls to `tau * sigma^2` for that step.
    /// Zero demands bit-stability, infinity retires whole windows at once.
    pub tolerance: f64,
    /// Maximum window length in steps (clamped to what remains of the chain).
    pub window: usize,
    /// Worker threads for drift evaluation; 1 stays on the calling thread.
    pub workers: usize,
    /// Cap on engine iterations. The stride is at least one step per
    /// iteration, so any run completes within `num_steps` iterations and the
    /// default cap never binds; lower it to study early stopping.
    pub max_iterations: usize,
    pub mode: DriftMode,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            tolerance: 0.1,
            window: 20,
            workers: 1,
            max_iterations: usize::MAX,
            mode: DriftMode::Ddpm,
        }
    }
}

/// What one engine run did, alongside the sampled chain.
#[derive(Debug, Clone)]
pub struct RunReport {
    /// Full retired chain, prior first, data-end sample last.
    pub trajectory: Trajectory,
    /// Drift-oracle evaluations consumed by this run.
    pub model_evals: u64,
    /// Engine iterations executed (the depth of the parallel schedule).
    pub parallel_iterations: usize,
    /// Steps retired by each iteration; sums to the chain length.
    pub stride_trace: Vec<usize>,
    /// Window length used by each iteration.
    pub window_trace: Vec<usize>,
    /// Chain length in steps.
    pub num_steps: usize,
    pub wall_time: Duration,
}

impl RunReport {
    pub fn final_state(&self) -> &[f64] {
        self.trajectory.final_state()
    }
}

/// Convergence threshold for one position: `tau * sigma^2`, with the
/// zero-sigma step handled so that only an infinite tolerance waives it.
pub fn threshold(tau: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        if tau.is_infinite() {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        tau * sigma * sigma
    }
}

/// Steps the window may advance: the first in-window offset whose update
/// error exceeds its threshold, or the whole window when none does. The
/// leading position is always exact after an iteration, so the stride is at
/// least one.
pub fn compute_stride(errors: &[f64], tolerances: &[f64], window: usize) -> Result<usize> {
    if errors.len() + 1 != window || tolerances.len() != errors.len() {
        return Err(Error::InvalidArgument(format!(
            "stride inputs need {} errors and tolerances for a window of {window}",
            window - 1
        )));
    }
    for (offset, (&err, &tol)) in errors.iter().zip(tolerances).enumerate() {
        if err > tol {
            return Ok(offset + 1);
        }
    }
    Ok(window)
}

/// Drop-in tolerance giving a total-variation gap of at most `epsilon`
/// against the sequential chain, for noise scale `sigma` over `num_steps`
/// steps: `4 epsilon^2 sigma^2 / num_steps^2`.
pub fn tolerance_from_tv(epsilon: f64, sigma: f64, num_steps: usize) -> Result<f64> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "tv budget must be positive and finite, got {epsilon}"
        )));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise scale must be nonnegative and finite, got {sigma}"
        )));
    }
    if num_steps == 0 {
        return Err(Error::InvalidArgument("step count must be positive".into()));
    }
    let t = num_steps as f64;
    Ok(4.0 * epsilon * epsilon * sigma * sigma / (t * t))
}

struct EngineOutcome {
    trajectory: Trajectory,
    stride_trace: Vec<usize>,
    window_trace: Vec<usize>,
}

/// Evaluate drift targets for window offsets `0..window_size`, in offset
/// order regardless of worker count.
fn evaluate_targets(
    rule: &dyn StepRule,
    states: &[Vec<f64>],
    base: usize,
    window_size: usize,
    pool: Option<&rayon::ThreadPool>,
) -> Result<Vec<Vec<f64>>> {
    match pool {
        Some(pool) => pool.install(|| {
            (0..window_size)
                .into_par_iter()
                .map(|j| rule.target(&states[j], base + j))
                .collect()
        }),
        None => (0..window_size).map(|j| rule.target(&states[j], base + j)).collect(),
    }
}

fn run_window_engine(
    rule: &dyn StepRule,
    tolerance: f64,
    window: usize,
    max_iterations: usize,
    pool: Option<&rayon::ThreadPool>,
    x0: &[f64],
    noises: Option<&NoiseArray>,
) -> Result<EngineOutcome> {
    let steps = rule.steps();
    let dim = x0.len();
    let divergence_sq = DIVERGENCE_NORM * DIVERGENCE_NORM * dim as f64;

    let mut retired: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    retired.push(x0.to_vec());
    let mut stride_trace = Vec::new();
    let mut window_trace = Vec::new();

    let mut base = 0usize;
    let mut states: Vec<Vec<f64>> = vec![x0.to_vec(); window.min(steps) + 1];

    while base < steps {
        if stride_trace.len() == max_iterations {
            return Err(Error::IterationCap {
                cap: max_iterations,
                covered: base,
                total: steps,
                stride_trace,
            });
        }
        let p = states.len() - 1;
        let targets = evaluate_targets(rule, &states, base, p, pool)?;

        // Ordered prefix recombination. Each position adds its own drift
        // increment, evaluated at the previous iterate, on top of the fresh
        // value below it; the expression mirrors the sequential update so a
        // converged window reproduces the sequential states exactly.
        let mut new_states: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
        new_states.push(states[0].clone());
        for j in 0..p {
            let mut next = vec![0.0; dim];
            {
                let prev = &new_states[j];
                let old = &states[j];
                let target = &targets[j];
                match noises {
                    Some(z) => {
                        let zj = z.step(base + j);
                        for d in 0..dim {
                            next[d] = prev[d] + (target[d] - old[d]) + zj[d];
                        }
                    }
                    None => {
                        for d in 0..dim {
                            next[d] = prev[d] + (target[d] - old[d]);
                        }
                    }
                }
            }
            new_states.push(next);
        }

        let iteration = stride_trace.len() + 1;
        for (offset, state) in new_states.iter().enumerate().skip(1) {
            let sumsq: f64 = state.iter().map(|&v| v * v).sum();
            if !sumsq.is_finite() || sumsq > divergence_sq {
                return Err(Error::NumericalDivergence { iteration, index: base + offset });
            }
        }

        let errors: Vec<f64> = (1..p)
            .map(|j| {
                let diff_sq: f64 = new_states[j]
                    .iter()
                    .zip(&states[j])
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum();
                diff_sq / dim as f64
            })
            .collect();
        let tolerances: Vec<f64> =
            (1..p).map(|j| threshold(tolerance, rule.tolerance_sigma(base + j))).collect();
        let stride = compute_stride(&errors, &tolerances, p)?;

        retired.extend(new_states[1..=stride].iter().cloned());
        stride_trace.push(stride);
        window_trace.push(p);

        base += stride;
        let next_size = window.min(steps - base);
        let mut next_states: Vec<Vec<f64>> = new_states[stride..].to_vec();
        let edge = next_states.last().expect("window always holds its left edge").clone();
        next_states.resize(next_size + 1, edge);
        states = next_states;
    }

    Ok(EngineOutcome { trajectory: Trajectory::new(retired), stride_trace, window_trace })
}

fn build_rule(oracle: &DriftOracle, mode: &DriftMode) -> Result<Box<dyn StepRule>> {
    Ok(match mode {
        DriftMode::Ddpm => Box::new(DdpmRule::new(oracle.clone())),
        DriftMode::Ddim { step_indices } => {
            Box::new(DdimRule::new(oracle.clone(), step_indices.clone())?)
        }
        DriftMode::Heun { step_indices } => {
            Box::new(HeunRule::new(oracle.clone(), step_indices.clone())?)
        }
    })
}

/// Run the sliding-window parallel sampler.
///
/// `noises` supplies the per-step ancestral noise for the `Ddpm` mode and is
/// fixed up front, so the sampled chain is a pure function of `(x0, noises)`.
/// The deterministic modes take `None` (or an all-zero array, which is
/// treated the same way).
pub fn paradigms_sample(
    oracle: &DriftOracle,
    config: &PicardConfig,
    x0: &[f64],
    noises: Option<&NoiseArray>,
) -> Result<RunReport> {
    let start = Instant::now();
    if x0.len() != oracle.dim() {
        return Err(Error::InvalidArgument(format!(
            "initial state has dimension {}, oracle expects {}",
            x0.len(),
            oracle.dim()
        )));
    }
    if config.window == 0 {
        return Err(Error::InvalidArgument("window must hold at least one step".into()));
    }
    if config.workers == 0 {
        return Err(Error::InvalidArgument("worker count must be positive".into()));
    }
    if config.max_iterations == 0 {
        return Err(Error::InvalidArgument("iteration cap must be positive".into()));
    }
    if !(config.tolerance >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be nonnegative, got {}",
            config.tolerance
        )));
    }

    let rule = build_rule(oracle, &config.mode)?;
    let steps = rule.steps();
    if config.window > steps {
        return Err(Error::InvalidArgument(format!(
            "window of {} steps exceeds the {steps}-step chain",
            config.window
        )));
    }
    if let Some(z) = noises {
        if z.len() != steps {
            return Err(Error::InvalidArgument(format!(
                "noise array covers {} steps, chain has {steps}",
                z.len()
            )));
        }
        if z.dim() != x0.len() {
            return Err(Error::InvalidArgument(format!(
                "noise dimension {} does not match state dimension {}",
                z.dim(),
                x0.len()
            )));
        }
    }
    let noises = match config.mode {
        DriftMode::Ddpm => noises,
        _ => match noises {
            Some(z) if !z.is_all_zero() => {
                return Err(Error::InvalidArgument(
                    "deterministic modes take no ancestral noise".into(),
                ));
            }
            _ => None,
        },
    };

    let pool = if config.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?,
        )
    } else {
        None
    };

    let evals_before = oracle.eval_count();
    let outcome = run_window_engine(
        rule.as_ref(),
        config.tolerance,
        config.window,
        config.max_iterations,
        pool.as_ref(),
        x0,
        noises,
    )?;
    let model_evals = oracle.eval_count() - evals_before;

    Ok(RunReport {
        parallel_iterations: outcome.stride_trace.len(),
        trajectory: outcome.trajectory,
        model_evals,
        stride_trace: outcome.stride_trace,
        window_trace: outcome.window_trace,
        num_steps: steps,
        wall_time: start.elapsed(),
    })
}

/// Full-trajectory Picard iteration for a generic drift on unit time.
///
/// Starting from every state pinned at `x0`, each sweep rebuilds the whole
/// discretised path `x_t = x0 + (1/n) * sum_{i<t} drift(x_i, i/n)` from the
/// previous iterate, stopping once no state moves more than `stop_tol` in
/// Euclidean norm. Sweep `k` fixes the first `k` steps exactly, so at most
/// `num_steps` sweeps ever run. Returns the final path (`num_steps + 1`
/// states) and the number of sweeps executed.
pub fn picard_full<F>(
    drift: F,
    x0: &[f64],
    num_steps: usize,
    stop_tol: f64,
) -> Result<(Vec<Vec<f64>>, usize)>
where
    F: Fn(&[f64], f64) -> Vec<f64> + Sync,
{
    picard_full_observed(drift, x0, num_steps, stop_tol, |_, _| {})
}

/// [`picard_full`] with a per-sweep observer, called after each sweep with
/// the 1-based sweep number and the freshly rebuilt path.
pub fn picard_full_observed<F, O>(
    drift: F,
    x0: &[f64],
    num_steps: usize,
    stop_tol: f64,
    mut observe: O,
) -> Result<(Vec<Vec<f64>>, usize)>
where
    F: Fn(&[f64], f64) -> Vec<f64> + Sync,
    O: FnMut(usize, &[Vec<f64>]),
{
    if num_steps == 0 {
        return Err(Error::InvalidArgument("step count must be positive".into()));
    }
    if x0.is_empty() {
        return Err(Error::InvalidArgument("initial state must be nonempty".into()));
    }
    if !(stop_tol >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "stopping tolerance must be nonnegative, got {stop_tol}"
        )));
    }
    let dim = x0.len();
    let scale = num_steps as f64;
    let divergence_sq = DIVERGENCE_NORM * DIVERGENCE_NORM * dim as f64;
    let mut states: Vec<Vec<f64>> = vec![x0.to_vec(); num_steps + 1];
    for sweep in 1..=num_steps {
        // Every drift depends only on the previous sweep, so the whole
        // horizon evaluates in parallel before the ordered prefix combine.
        let drifts: Vec<Vec<f64>> = {
            let states = &states;
            (0..num_steps).into_par_iter().map(|i| drift(&states[i], i as f64 / scale)).collect()
        };
        if let Some(d) = drifts.iter().find(|d| d.len() != dim) {
            return Err(Error::InvalidArgument(format!(
                "drift returned dimension {}, state has {dim}",
                d.len()
            )));
        }
        let mut new_states: Vec<Vec<f64>> = Vec::with_capacity(num_steps + 1);
        let mut acc = x0.to_vec();
        new_states.push(acc.clone());
        for d in &drifts {
            for k in 0..dim {
                acc[k] += d[k] / scale;
            }
            new_states.push(acc.clone());
        }
        for (index, state) in new_states.iter().enumerate().skip(1) {
            let sumsq: f64 = state.iter().map(|&v| v * v).sum();
            if !sumsq.is_finite() || sumsq > divergence_sq {
                return Err(Error::NumericalDivergence { iteration: sweep, index });
            }
        }
        let max_change = states
            .iter()
            .zip(&new_states)
            .map(|(old, new)| {
                old.iter().zip(new).map(|(&a, &b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            })
            .fold(0.0_f64, f64::max);
        states = new_states;
        observe(sweep, &states);
        if max_change <= stop_tol {
            return Ok((states, sweep));
        }
    }
    Ok((states, num_steps))
}

/// Largest per-index ratio of successive change norms; a rough estimate of
/// the Picard contraction factor. `previous` and `current` are the change
/// vectors of two consecutive sweeps; indices whose previous change is zero
/// are skipped, and zero is returned when none qualifies.
pub fn contraction_estimate(previous: &[Vec<f64>], current: &[Vec<f64>]) -> f64 {
    previous
        .iter()
        .zip(current)
        .filter_map(|(p, c)| {
            let pn = p.iter().map(|&v| v * v).sum::<f64>().sqrt();
            let cn = c.iter().map(|&v| v * v).sum::<f64>().sqrt();
            if pn > 0.0 {
                Some(cn / pn)
            } else {
                None
            }
        })
        .fold(0.0_f64, f64::max)
}
