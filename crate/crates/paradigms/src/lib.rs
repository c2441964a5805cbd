//! Desk-scale diffusion sampling with a parallel-in-time engine.
//!
//! The crate provides discrete variance-preserving noise schedules, analytic
//! Gaussian-mixture drift oracles, the classic sequential samplers (ancestral
//! DDPM, deterministic DDIM, Heun), and a sliding-window Picard engine that
//! evaluates a whole window of denoising steps in parallel, then slides past
//! every leading step whose refinement residual is within a noise-scaled
//! tolerance. Run accounting, parity checks, and sample-quality metrics make
//! the sequential/parallel trade measurable, and the `cli` module drives all
//! of it from a config file.
//!
//! Time is indexed in the reverse (sampling) direction everywhere: index 0 is
//! the Gaussian prior, index `T` is the data end, and samplers walk indices
//! upward. Forward-process quantities for reverse index `t` live at forward
//! index `T - t`.

pub mod cli;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod picard;
pub mod rng;
pub mod samplers;
pub mod schedule;

pub use error::{Error, Result};
