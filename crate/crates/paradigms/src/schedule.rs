//! Discrete variance-preserving noise schedules.
//!
//! A schedule of `T` forward steps is defined by increments `beta_1..beta_T`
//! in `(0, 1)`; the forward marginal at forward index `f` is
//! `N(sqrt(alpha_bar_f) * x_data, (1 - alpha_bar_f) I)` with
//! `alpha_bar_f = prod_{i<=f} (1 - beta_i)` and `alpha_bar_0 = 1`.
//!
//! All public queries use reverse-time indices: `t = 0` is the prior end,
//! `t = T` the data end, and the denoising step at `t` (valid for `t < T`)
//! moves a state from `t` to `t + 1`, undoing forward step `T - t`.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct NoiseSchedule {
    /// Forward increments `beta_1..beta_T`.
    betas: Vec<f64>,
    /// Running products `alpha_bar_1..alpha_bar_T`.
    alpha_bars: Vec<f64>,
    /// `sigmas[t]` = posterior standard deviation of the denoising step at
    /// reverse index `t`.
    sigmas: Vec<f64>,
    zero_final_sigma: bool,
}

/// Linear beta ramp from `beta_min` to `beta_max` over `num_steps` steps.
pub fn build_linear_schedule(num_steps: usize, beta_min: f64, beta_max: f64) -> Result<NoiseSchedule> {
    build_linear_schedule_with(num_steps, beta_min, beta_max, false)
}

/// [`build_linear_schedule`] with an explicit final-step sigma convention;
/// see [`NoiseSchedule::ddpm_sigma`].
pub fn build_linear_schedule_with(
    num_steps: usize,
    beta_min: f64,
    beta_max: f64,
    zero_final_sigma: bool,
) -> Result<NoiseSchedule> {
    if beta_min > beta_max {
        return Err(Error::InvalidArgument(format!(
            "beta_min {beta_min} exceeds beta_max {beta_max}"
        )));
    }
    let betas = if num_steps == 1 {
        vec![beta_min]
    } else {
        (0..num_steps)
            .map(|i| beta_min + (beta_max - beta_min) * i as f64 / (num_steps - 1) as f64)
            .collect()
    };
    NoiseSchedule::from_betas(betas, zero_final_sigma)
}

impl NoiseSchedule {
    /// Schedule with explicitly supplied forward increments, each in `(0, 1)`.
    pub fn from_betas(betas: Vec<f64>, zero_final_sigma: bool) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::InvalidArgument("schedule needs at least one step".into()));
        }
        for (i, &b) in betas.iter().enumerate() {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "beta[{i}] = {b} is outside (0, 1)"
                )));
            }
        }
        let mut alpha_bars = Vec::with_capacity(betas.len());
        let mut prod = 1.0;
        for &b in &betas {
            prod *= 1.0 - b;
            alpha_bars.push(prod);
        }
        let mut schedule = NoiseSchedule { betas, alpha_bars, sigmas: Vec::new(), zero_final_sigma };
        schedule.sigmas = (0..schedule.num_steps()).map(|t| schedule.posterior_sigma(t)).collect();
        Ok(schedule)
    }

    pub fn num_steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    /// Per-step posterior deviations, indexed by reverse step `t` in `[0, T)`.
    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn zero_final_sigma(&self) -> bool {
        self.zero_final_sigma
    }

    fn alpha_bar_forward(&self, f: usize) -> f64 {
        if f == 0 {
            1.0
        } else {
            self.alpha_bars[f - 1]
        }
    }

    /// `alpha_bar` at reverse state index `t` in `[0, T]`; `t = T` (the data
    /// end) gives exactly 1.
    pub fn alpha_bar_at(&self, t: usize) -> Result<f64> {
        self.check_state_index(t)?;
        Ok(self.alpha_bar_forward(self.num_steps() - t))
    }

    /// `(sqrt(alpha_bar), 1 - alpha_bar)` at reverse index `t`: scale and
    /// variance of the forward marginal the state at `t` is distributed by.
    pub fn marginal_params(&self, t: usize) -> Result<(f64, f64)> {
        let ab = self.alpha_bar_at(t)?;
        Ok((ab.sqrt(), 1.0 - ab))
    }

    /// Forward increment undone by the denoising step at reverse index `t`,
    /// valid for `t` in `[0, T)`.
    pub fn step_beta(&self, t: usize) -> Result<f64> {
        self.check_step_index(t)?;
        Ok(self.betas[self.num_steps() - t - 1])
    }

    /// Posterior standard deviation of the ancestral step at reverse index
    /// `t`: `sigma^2 = (1 - alpha_bar_prev) / (1 - alpha_bar_cur) * beta_cur`.
    ///
    /// The final step (`t = T - 1`) has `alpha_bar_prev = 1` and hence
    /// `sigma = 0` under the textbook convention. By default the adjacent
    /// level is substituted instead, giving `sigma^2 = beta_1 > 0`, because a
    /// vanishing sigma collapses every noise-scaled convergence threshold to
    /// zero. Construct the schedule with `zero_final_sigma` to keep the
    /// deterministic last step.
    pub fn ddpm_sigma(&self, t: usize) -> Result<f64> {
        self.check_step_index(t)?;
        Ok(self.sigmas[t])
    }

    fn posterior_sigma(&self, t: usize) -> f64 {
        let cur = self.num_steps() - t; // forward step index, 1-based
        let beta = self.betas[cur - 1];
        let ab_cur = self.alpha_bar_forward(cur);
        let ab_prev = if cur == 1 {
            if self.zero_final_sigma {
                return 0.0;
            }
            self.alpha_bar_forward(1)
        } else {
            self.alpha_bar_forward(cur - 1)
        };
        ((1.0 - ab_prev) / (1.0 - ab_cur) * beta).sqrt()
    }

    pub(crate) fn check_state_index(&self, t: usize) -> Result<()> {
        if t > self.num_steps() {
            return Err(Error::InvalidArgument(format!(
                "state index {t} exceeds horizon {}",
                self.num_steps()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_step_index(&self, t: usize) -> Result<()> {
        if t >= self.num_steps() {
            return Err(Error::InvalidArgument(format!(
                "step index {t} is out of range for {} steps",
                self.num_steps()
            )));
        }
        Ok(())
    }
}
