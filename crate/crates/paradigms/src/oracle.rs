//! Drift oracles: closed-form scores for Gaussian mixtures under a VP
//! schedule, the one-step denoising mean they induce, and a call-counting
//! wrapper that stands in for a learned denoiser.
//!
//! Diffusing a mixture `sum_i w_i N(mu_i, S_i)` (diagonal `S_i`) to reverse
//! index `t` with marginal scale/variance `(sqrt(ab), 1 - ab)` yields another
//! mixture: component `i` becomes `N(sqrt(ab) mu_i, ab S_i + (1 - ab) I)`.
//! Scores and log-densities below are exact, evaluated with log-sum-exp
//! stabilized responsibilities.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::schedule::NoiseSchedule;

/// Finite Gaussian mixture with diagonal covariances.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
}

impl GaussianMixture {
    /// Weights must be non-negative and sum to 1 within 1e-12; every mean and
    /// variance vector must share one dimensionality, variances positive.
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != variances.len() {
            return Err(Error::InvalidArgument(
                "mixture needs matching, non-empty weights/means/variances".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(w >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "weights must be non-negative and sum to 1 (got {sum})"
            )));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument("mixture dimension must be positive".into()));
        }
        for (m, v) in means.iter().zip(&variances) {
            if m.len() != dim || v.len() != dim {
                return Err(Error::InvalidArgument(
                    "every component mean/variance must share one dimension".into(),
                ));
            }
            if v.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(Error::InvalidArgument("variances must be positive and finite".into()));
            }
        }
        Ok(GaussianMixture { weights, means, variances })
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variances(&self) -> &[Vec<f64>] {
        &self.variances
    }

    /// Overall mean `sum_i w_i mu_i`.
    pub fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (w, m) in self.weights.iter().zip(&self.means) {
            for d in 0..out.len() {
                out[d] += w * m[d];
            }
        }
        out
    }

    /// Overall covariance `sum_i w_i (S_i + mu_i mu_i^T) - mu mu^T`.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let dim = self.dim();
        let mean = self.mean();
        let mut cov = vec![vec![0.0; dim]; dim];
        for ((w, m), v) in self.weights.iter().zip(&self.means).zip(&self.variances) {
            for a in 0..dim {
                for b in 0..dim {
                    let second = m[a] * m[b] + if a == b { v[a] } else { 0.0 };
                    cov[a][b] += w * second;
                }
            }
        }
        for a in 0..dim {
            for b in 0..dim {
                cov[a][b] -= mean[a] * mean[b];
            }
        }
        cov
    }

    /// Exact draw: pick a component by weight, then sample its Gaussian.
    pub fn sample(&self, rng: &mut CounterRng) -> Vec<f64> {
        let u = rng.next_f64();
        let mut acc = 0.0;
        let mut pick = self.weights.len() - 1;
        for (i, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                pick = i;
                break;
            }
        }
        self.means[pick]
            .iter()
            .zip(&self.variances[pick])
            .map(|(&m, &v)| m + v.sqrt() * rng.next_standard_normal())
            .collect()
    }
}

/// Per-component log-weights `log w_i + log N(x; m_i, v_i)` at marginal level
/// `ab`, plus the component moments, shared by density and score paths.
fn component_log_terms(
    mixture: &GaussianMixture,
    ab: f64,
    x: &[f64],
) -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let scale = ab.sqrt();
    let shift = 1.0 - ab;
    let ncomp = mixture.num_components();
    let mut logs = Vec::with_capacity(ncomp);
    let mut centers = Vec::with_capacity(ncomp);
    let mut vars = Vec::with_capacity(ncomp);
    for i in 0..ncomp {
        let m: Vec<f64> = mixture.means[i].iter().map(|&mu| scale * mu).collect();
        let v: Vec<f64> = mixture.variances[i].iter().map(|&s| ab * s + shift).collect();
        let mut log_n = 0.0;
        for d in 0..x.len() {
            let diff = x[d] - m[d];
            log_n -= 0.5 * (diff * diff / v[d] + (std::f64::consts::TAU * v[d]).ln());
        }
        logs.push(mixture.weights[i].ln() + log_n);
        centers.push(m);
        vars.push(v);
    }
    (logs, centers, vars)
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + logs.iter().map(|&l| (l - max).exp()).sum::<f64>().ln()
}

fn check_point(dim: usize, x: &[f64]) -> Result<()> {
    if x.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "state has dimension {}, expected {dim}",
            x.len()
        )));
    }
    Ok(())
}

/// Log-density `log q_t(x)` of the mixture diffused to reverse index `t`.
pub fn analytic_log_density(
    mixture: &GaussianMixture,
    schedule: &NoiseSchedule,
    x: &[f64],
    t: usize,
) -> Result<f64> {
    check_point(mixture.dim(), x)?;
    let ab = schedule.alpha_bar_at(t)?;
    let (logs, _, _) = component_log_terms(mixture, ab, x);
    Ok(log_sum_exp(&logs))
}

/// Score `grad_x log q_t(x)` at reverse index `t` in `[0, T]`.
pub fn analytic_score(
    mixture: &GaussianMixture,
    schedule: &NoiseSchedule,
    x: &[f64],
    t: usize,
) -> Result<Vec<f64>> {
    check_point(mixture.dim(), x)?;
    let ab = schedule.alpha_bar_at(t)?;
    Ok(score_at_level(mixture, ab, x))
}

/// Score at an explicit marginal level; `analytic_score` after index checks.
pub(crate) fn score_at_level(mixture: &GaussianMixture, ab: f64, x: &[f64]) -> Vec<f64> {
    let (logs, centers, vars) = component_log_terms(mixture, ab, x);
    let lse = log_sum_exp(&logs);
    let mut score = vec![0.0; x.len()];
    for i in 0..logs.len() {
        let resp = (logs[i] - lse).exp();
        for d in 0..x.len() {
            score[d] += resp * (-(x[d] - centers[i][d]) / vars[i][d]);
        }
    }
    score
}

/// One-step denoising mean implied by a score at reverse index `t` in
/// `[0, T)`: `(x + beta * score) / sqrt(1 - beta)` with `beta` the forward
/// increment the step undoes. Equivalent to the epsilon-prediction mean with
/// `eps = -sqrt(1 - alpha_bar) * score`.
pub fn denoise_mean(score: &[f64], x: &[f64], schedule: &NoiseSchedule, t: usize) -> Result<Vec<f64>> {
    if score.len() != x.len() {
        return Err(Error::InvalidArgument(format!(
            "score has dimension {}, state has {}",
            score.len(),
            x.len()
        )));
    }
    let beta = schedule.step_beta(t)?;
    let denom = (1.0 - beta).sqrt();
    Ok(x.iter().zip(score).map(|(&xd, &sd)| (xd + beta * sd) / denom).collect())
}

/// Evaluation-counting drift oracle over a pure score function.
///
/// The wrapped function must be a pure map `(x, t) -> score`; the schedule it
/// was built with converts that score into the epsilon-prediction or one-step
/// denoising mean a sampler consumes. Every `(x, t)` evaluation increments a
/// shared atomic counter by exactly one — singly or inside a parallel batch —
/// so the final count is independent of thread scheduling. Clones share the
/// counter and can be handed to worker threads freely.
#[derive(Clone)]
pub struct DriftOracle {
    score_fn: Arc<dyn Fn(&[f64], usize) -> Vec<f64> + Send + Sync>,
    schedule: Arc<NoiseSchedule>,
    dim: usize,
    evals: Arc<AtomicU64>,
}

impl DriftOracle {
    pub fn new<F>(score_fn: F, schedule: NoiseSchedule, dim: usize) -> Result<Self>
    where
        F: Fn(&[f64], usize) -> Vec<f64> + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::InvalidArgument("oracle dimension must be positive".into()));
        }
        Ok(DriftOracle {
            score_fn: Arc::new(score_fn),
            schedule: Arc::new(schedule),
            dim,
            evals: Arc::new(AtomicU64::new(0)),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    /// Total `(x, t)` evaluations since construction, over all clones.
    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    fn count(&self, n: u64) {
        self.evals.fetch_add(n, Ordering::Relaxed);
    }

    /// Score at `(x, t)`, `t` in `[0, T]`. One evaluation.
    pub fn score(&self, x: &[f64], t: usize) -> Result<Vec<f64>> {
        check_point(self.dim, x)?;
        self.schedule.check_state_index(t)?;
        self.count(1);
        Ok((self.score_fn)(x, t))
    }

    /// Epsilon-prediction `-sqrt(1 - alpha_bar_t) * score(x, t)`. One evaluation.
    pub fn epsilon(&self, x: &[f64], t: usize) -> Result<Vec<f64>> {
        check_point(self.dim, x)?;
        self.schedule.check_state_index(t)?;
        self.count(1);
        let (_, var) = self.schedule.marginal_params(t)?;
        let noise_scale = var.sqrt();
        let score = (self.score_fn)(x, t);
        Ok(score.iter().map(|&s| -noise_scale * s).collect())
    }

    /// One-step denoising mean at `(x, t)`, `t` in `[0, T)`. One evaluation.
    pub fn denoise_mean(&self, x: &[f64], t: usize) -> Result<Vec<f64>> {
        check_point(self.dim, x)?;
        self.schedule.check_step_index(t)?;
        self.count(1);
        let score = (self.score_fn)(x, t);
        denoise_mean(&score, x, &self.schedule, t)
    }

    /// Denoising means for a batch of `(x, t)` points; the counter advances
    /// by the batch size in one step.
    pub fn denoise_mean_batch(&self, points: &[(Vec<f64>, usize)]) -> Result<Vec<Vec<f64>>> {
        for (x, t) in points {
            check_point(self.dim, x)?;
            self.schedule.check_step_index(*t)?;
        }
        self.count(points.len() as u64);
        points
            .iter()
            .map(|(x, t)| {
                let score = (self.score_fn)(x, *t);
                denoise_mean(&score, x, &self.schedule, *t)
            })
            .collect()
    }
}

/// Oracle evaluating the exact mixture score under the given schedule.
pub fn counting_oracle(mixture: GaussianMixture, schedule: NoiseSchedule) -> DriftOracle {
    let dim = mixture.dim();
    let sched = schedule.clone();
    DriftOracle::new(
        move |x, t| {
            let ab = sched.alpha_bar_at(t).expect("index checked by oracle entry points");
            score_at_level(&mixture, ab, x)
        },
        schedule,
        dim,
    )
    .expect("mixture dimension is positive")
}
