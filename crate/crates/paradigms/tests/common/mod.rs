//! Shared fixtures for the integration suites.
//!
//! The score and reference integrator here are written independently of the
//! library code on purpose: they recompute the same quantities from the raw
//! mixture parameters so that agreement is a genuine cross-check rather than
//! a tautology.

#![allow(dead_code)]

use paradigms::oracle::GaussianMixture;
use paradigms::rng::{CounterRng, PRIOR_STREAM};
use paradigms::schedule::NoiseSchedule;

/// The standard test target: equal-weight modes at (±2, 0) with unit
/// variances.
pub fn standard_mixture() -> GaussianMixture {
    GaussianMixture::new(
        vec![0.5, 0.5],
        vec![vec![2.0, 0.0], vec![-2.0, 0.0]],
        vec![vec![1.0, 1.0], vec![1.0, 1.0]],
    )
    .expect("standard mixture is valid")
}

/// A single standard-normal component; every diffusion marginal of it is
/// again standard normal.
pub fn unit_gaussian(dim: usize) -> GaussianMixture {
    GaussianMixture::new(vec![1.0], vec![vec![0.0; dim]], vec![vec![1.0; dim]])
        .expect("unit gaussian is valid")
}

/// The prior draw the CLI uses for a seed.
pub fn prior_draw(seed: u64, dim: usize) -> Vec<f64> {
    CounterRng::new(seed, PRIOR_STREAM).standard_normal_vec(dim)
}

/// Score of the mixture diffused to marginal level `ab`, recomputed from
/// first principles: responsibilities over components N(√ab·μ, ab·v + 1−ab),
/// then the responsibility-weighted Gaussian scores.
pub fn reference_score(mixture: &GaussianMixture, ab: f64, x: &[f64]) -> Vec<f64> {
    let ncomp = mixture.num_components();
    let dim = mixture.dim();
    let mut log_terms = Vec::with_capacity(ncomp);
    for c in 0..ncomp {
        let mut log_n = mixture.weights()[c].ln();
        for d in 0..dim {
            let center = ab.sqrt() * mixture.means()[c][d];
            let var = ab * mixture.variances()[c][d] + (1.0 - ab);
            let diff = x[d] - center;
            log_n -= 0.5 * (diff * diff / var + (std::f64::consts::TAU * var).ln());
        }
        log_terms.push(log_n);
    }
    let peak = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = log_terms.iter().map(|&l| (l - peak).exp()).sum();
    let mut score = vec![0.0; dim];
    for c in 0..ncomp {
        let resp = (log_terms[c] - peak).exp() / total;
        for d in 0..dim {
            let center = ab.sqrt() * mixture.means()[c][d];
            let var = ab * mixture.variances()[c][d] + (1.0 - ab);
            score[d] += resp * (center - x[d]) / var;
        }
    }
    score
}

/// Endpoint of the probability-flow ODE started from `x0` at the prior end
/// of `schedule`, integrated with `substeps` uniform Euler steps in the
/// noise-to-signal scale.
///
/// In the variables y = x/√ᾱ and s = √((1−ᾱ)/ᾱ) the deterministic update
/// between any two marginal levels is exactly Euler: y' = y + (s' − s)·ε̂
/// with ε̂ = −√(1−ᾱ)·score. Driving s to zero lands on the data end, so a
/// fine uniform grid in s converges to the exact flow and serves as ground
/// truth for the coarse ladder samplers.
pub fn fine_ode_endpoint(
    mixture: &GaussianMixture,
    schedule: &NoiseSchedule,
    x0: &[f64],
    substeps: usize,
) -> Vec<f64> {
    let ab0 = schedule.alpha_bar_at(0).expect("prior level exists");
    let s0 = ((1.0 - ab0) / ab0).sqrt();
    let mut y: Vec<f64> = x0.iter().map(|&v| v / ab0.sqrt()).collect();
    for k in 0..substeps {
        let s = s0 * (1.0 - k as f64 / substeps as f64);
        let s_next = s0 * (1.0 - (k + 1) as f64 / substeps as f64);
        let ab = 1.0 / (1.0 + s * s);
        let x: Vec<f64> = y.iter().map(|&v| v * ab.sqrt()).collect();
        let score = reference_score(mixture, ab, &x);
        let h = s_next - s;
        for d in 0..y.len() {
            let eps = -(1.0 - ab).sqrt() * score[d];
            y[d] += h * eps;
        }
    }
    y
}

/// Euclidean distance between two equal-length states.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Sequential Euler chain x_{i+1} = x_i + drift(x_i, i/n)/n on unit time.
pub fn euler_chain<F>(drift: F, x0: &[f64], num_steps: usize) -> Vec<Vec<f64>>
where
    F: Fn(&[f64], f64) -> Vec<f64>,
{
    let scale = num_steps as f64;
    let mut states = vec![x0.to_vec()];
    for i in 0..num_steps {
        let d = drift(states.last().unwrap(), i as f64 / scale);
        let prev = states.last().unwrap();
        states.push(prev.iter().zip(&d).map(|(&x, &dv)| x + dv / scale).collect());
    }
    states
}
