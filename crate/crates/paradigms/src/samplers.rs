//! Sequential reverse-time samplers over one shared stepping core.
//!
//! Every sampler is a per-step target map `x -> target(x, j)` plus optional
//! per-step noise; applying a step computes `x + (target - x) + z` in exactly
//! that association order. The parallel window engine in [`crate::picard`]
//! reuses the same rules and the same update expression, which is what makes
//! its zero-tolerance mode bit-identical to these sequential chains.

use crate::error::{Error, Result};
use crate::oracle::DriftOracle;
use crate::rng::CounterRng;
use crate::schedule::NoiseSchedule;

/// Per-step ancestral noise for a whole run.
#[derive(Debug, Clone)]
pub struct NoiseArray {
    dim: usize,
    noises: Vec<Vec<f64>>,
}

impl NoiseArray {
    /// Noise `z_t ~ N(0, sigma_t^2 I)` for every step of the schedule, keyed
    /// by `(seed, t)`: the vector at step `t` is a pure function of the seed
    /// and the step index, never of draw order or batching.
    pub fn ancestral(schedule: &NoiseSchedule, seed: u64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("noise dimension must be positive".into()));
        }
        let noises = schedule
            .sigmas()
            .iter()
            .enumerate()
            .map(|(t, &sigma)| {
                let mut rng = CounterRng::new(seed, t as u64);
                (0..dim).map(|_| sigma * rng.next_standard_normal()).collect()
            })
            .collect();
        Ok(NoiseArray { dim, noises })
    }

    /// All-zero noise, for deterministic chains.
    pub fn zeros(steps: usize, dim: usize) -> Self {
        NoiseArray { dim, noises: vec![vec![0.0; dim]; steps] }
    }

    pub fn len(&self) -> usize {
        self.noises.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noises.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.noises[t]
    }

    pub fn is_all_zero(&self) -> bool {
        self.noises.iter().all(|z| z.iter().all(|&v| v == 0.0))
    }
}

/// States visited by a sampler, reverse-time ascending: `states()[0]` is the
/// prior draw and the last entry is the data-end sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub(crate) fn new(states: Vec<Vec<f64>>) -> Self {
        Trajectory { states }
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("a trajectory holds at least the prior state")
    }

    /// Number of steps taken, one less than the number of states.
    pub fn num_steps(&self) -> usize {
        self.states.len() - 1
    }
}

/// One reverse-time stepping rule: a chain of `steps()` target maps.
///
/// `target(x, j)` is where step `j` sends `x` before any noise is added.
/// `tolerance_sigma(i)` is the ancestral-step deviation associated with chain
/// position `i`, used by the window engine to scale convergence thresholds;
/// positions on a coarse ladder borrow the sigma of the full-grid index they
/// sit on.
pub trait StepRule: Sync {
    fn steps(&self) -> usize;
    fn target(&self, x: &[f64], j: usize) -> Result<Vec<f64>>;
    fn tolerance_sigma(&self, position: usize) -> f64;
}

/// Full-grid ancestral rule: the target of step `t` is the denoising mean.
pub struct DdpmRule {
    oracle: DriftOracle,
}

impl DdpmRule {
    pub fn new(oracle: DriftOracle) -> Self {
        DdpmRule { oracle }
    }
}

impl StepRule for DdpmRule {
    fn steps(&self) -> usize {
        self.oracle.schedule().num_steps()
    }

    fn target(&self, x: &[f64], j: usize) -> Result<Vec<f64>> {
        self.oracle.denoise_mean(x, j)
    }

    fn tolerance_sigma(&self, position: usize) -> f64 {
        self.oracle.schedule().sigmas()[position]
    }
}

/// Deterministic transition between noise levels (the eta = 0 update):
/// rescale toward the implied clean point and re-noise to the target level.
/// `ab_from`/`ab_to` are the `alpha_bar` values of the two levels.
pub(crate) fn ddim_transition(x: &[f64], eps: &[f64], ab_from: f64, ab_to: f64) -> Vec<f64> {
    let scale = (ab_to / ab_from).sqrt();
    let coef = (1.0 - ab_to).sqrt() - scale * (1.0 - ab_from).sqrt();
    x.iter().zip(eps).map(|(&xd, &ed)| scale * xd + coef * ed).collect()
}

fn validate_ladder(schedule: &NoiseSchedule, indices: &[usize]) -> Result<()> {
    let total = schedule.num_steps();
    if indices.len() < 2 || indices[0] != 0 || *indices.last().unwrap() != total {
        return Err(Error::InvalidArgument(format!(
            "step ladder must run from 0 to {total}"
        )));
    }
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("step ladder must be strictly increasing".into()));
    }
    Ok(())
}

/// Coarse deterministic rule with plain (Euler) level transitions.
pub struct DdimRule {
    oracle: DriftOracle,
    indices: Vec<usize>,
}

impl DdimRule {
    pub fn new(oracle: DriftOracle, indices: Vec<usize>) -> Result<Self> {
        validate_ladder(oracle.schedule(), &indices)?;
        Ok(DdimRule { oracle, indices })
    }
}

impl StepRule for DdimRule {
    fn steps(&self) -> usize {
        self.indices.len() - 1
    }

    fn target(&self, x: &[f64], j: usize) -> Result<Vec<f64>> {
        let (a, b) = (self.indices[j], self.indices[j + 1]);
        let eps = self.oracle.epsilon(x, a)?;
        let ab_a = self.oracle.schedule().alpha_bar_at(a)?;
        let ab_b = self.oracle.schedule().alpha_bar_at(b)?;
        Ok(ddim_transition(x, &eps, ab_a, ab_b))
    }

    fn tolerance_sigma(&self, position: usize) -> f64 {
        self.oracle.schedule().sigmas()[self.indices[position]]
    }
}

/// Coarse deterministic rule with Heun (predictor-corrector) transitions:
/// predict with the Euler update, re-evaluate epsilon at the predicted point
/// and endpoint level, then apply the transition with the averaged epsilon.
/// Two oracle evaluations per step.
pub struct HeunRule {
    oracle: DriftOracle,
    indices: Vec<usize>,
}

impl HeunRule {
    pub fn new(oracle: DriftOracle, indices: Vec<usize>) -> Result<Self> {
        validate_ladder(oracle.schedule(), &indices)?;
        Ok(HeunRule { oracle, indices })
    }
}

impl StepRule for HeunRule {
    fn steps(&self) -> usize {
        self.indices.len() - 1
    }

    fn target(&self, x: &[f64], j: usize) -> Result<Vec<f64>> {
        let (a, b) = (self.indices[j], self.indices[j + 1]);
        let ab_a = self.oracle.schedule().alpha_bar_at(a)?;
        let ab_b = self.oracle.schedule().alpha_bar_at(b)?;
        let eps_here = self.oracle.epsilon(x, a)?;
        let predicted = ddim_transition(x, &eps_here, ab_a, ab_b);
        let eps_there = self.oracle.epsilon(&predicted, b)?;
        let averaged: Vec<f64> =
            eps_here.iter().zip(&eps_there).map(|(&p, &q)| 0.5 * (p + q)).collect();
        Ok(ddim_transition(x, &averaged, ab_a, ab_b))
    }

    fn tolerance_sigma(&self, position: usize) -> f64 {
        self.oracle.schedule().sigmas()[self.indices[position]]
    }
}

/// Walk a rule sequentially. `noises` must hold one vector per step when
/// present; `None` runs the noise-free deterministic chain.
pub(crate) fn run_sequential(
    rule: &dyn StepRule,
    x0: &[f64],
    noises: Option<&NoiseArray>,
) -> Result<Trajectory> {
    let steps = rule.steps();
    let dim = x0.len();
    if let Some(z) = noises {
        if z.len() != steps {
            return Err(Error::InvalidArgument(format!(
                "noise array covers {} steps, chain has {steps}",
                z.len()
            )));
        }
        if z.dim() != dim {
            return Err(Error::InvalidArgument(format!(
                "noise dimension {} does not match state dimension {dim}",
                z.dim()
            )));
        }
    }
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    let mut x = x0.to_vec();
    for j in 0..steps {
        let target = rule.target(&x, j)?;
        match noises {
            Some(z) => {
                let zj = z.step(j);
                for d in 0..dim {
                    x[d] = x[d] + (target[d] - x[d]) + zj[d];
                }
            }
            None => {
                for d in 0..dim {
                    x[d] = x[d] + (target[d] - x[d]);
                }
            }
        }
        states.push(x.clone());
    }
    Ok(Trajectory::new(states))
}

/// Ancestral sampler: `x_{t+1} = mean(x_t, t) + z_t` over the full grid.
pub fn sample_ddpm(oracle: &DriftOracle, x0: &[f64], noises: &NoiseArray) -> Result<Trajectory> {
    run_sequential(&DdpmRule::new(oracle.clone()), x0, Some(noises))
}

/// Deterministic sampler over a coarse ladder of reverse indices.
pub fn sample_ddim(oracle: &DriftOracle, x0: &[f64], step_indices: &[usize]) -> Result<Trajectory> {
    run_sequential(&DdimRule::new(oracle.clone(), step_indices.to_vec())?, x0, None)
}

/// Heun predictor-corrector sampler over a coarse ladder; two oracle
/// evaluations per step.
pub fn sample_heun(oracle: &DriftOracle, x0: &[f64], step_indices: &[usize]) -> Result<Trajectory> {
    run_sequential(&HeunRule::new(oracle.clone(), step_indices.to_vec())?, x0, None)
}

/// Uniformly spaced ladder of `coarse + 1` reverse indices from 0 to `total`.
pub fn uniform_step_indices(total: usize, coarse: usize) -> Result<Vec<usize>> {
    if coarse == 0 || coarse > total {
        return Err(Error::InvalidArgument(format!(
            "coarse step count {coarse} must be in [1, {total}]"
        )));
    }
    Ok((0..=coarse)
        .map(|i| (i as f64 * total as f64 / coarse as f64).round() as usize)
        .collect())
}
