//! Run efficiency, parity against sequential baselines, and sample quality.

use std::time::Duration;

use crate::error::{Error, Result};
use crate::oracle::GaussianMixture;
use crate::picard::RunReport;
use crate::rng::CounterRng;
use crate::samplers::Trajectory;

/// Cost summary of one sampling run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunStats {
    /// Drift-oracle evaluations consumed.
    pub model_evals: u64,
    /// Sequential depth: chain steps for a sequential run, engine iterations
    /// for a parallel one.
    pub iterations: usize,
    /// Full-grid step count of the problem both runs share.
    pub num_steps: usize,
    pub wall_time: Duration,
}

impl RunStats {
    pub fn new(model_evals: u64, iterations: usize, num_steps: usize, wall_time: Duration) -> Self {
        RunStats { model_evals, iterations, num_steps, wall_time }
    }
}

impl From<&RunReport> for RunStats {
    fn from(report: &RunReport) -> Self {
        RunStats {
            model_evals: report.model_evals,
            iterations: report.parallel_iterations,
            num_steps: report.num_steps,
            wall_time: report.wall_time,
        }
    }
}

/// How a parallel run compares against its sequential baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyReport {
    pub sequential_evals: u64,
    pub parallel_evals: u64,
    /// Extra model work: parallel evaluations over sequential evaluations.
    pub algorithm_inefficiency: f64,
    pub parallel_iterations: usize,
    /// Depth fraction: parallel iterations over sequential iterations (small
    /// is good).
    pub iteration_ratio: f64,
    pub wall_time_sequential: Duration,
    pub wall_time_parallel: Duration,
    /// Wall-clock gain; 1.0 when both clocks read zero (timing disabled).
    pub speedup: f64,
}

/// Compare a parallel run against the sequential baseline it replaces. Both
/// must come from the same problem scale (equal step counts).
pub fn efficiency(sequential: &RunStats, parallel: &RunStats) -> Result<EfficiencyReport> {
    if sequential.num_steps != parallel.num_steps {
        return Err(Error::InvalidArgument(format!(
            "runs cover different problems: {} and {} steps",
            sequential.num_steps, parallel.num_steps
        )));
    }
    if sequential.model_evals == 0 || sequential.iterations == 0 {
        return Err(Error::InvalidArgument("sequential baseline did no work".into()));
    }
    if parallel.iterations == 0 {
        return Err(Error::InvalidArgument("parallel run did no work".into()));
    }
    let seq_wall = sequential.wall_time.as_secs_f64();
    let par_wall = parallel.wall_time.as_secs_f64();
    let speedup = if par_wall == 0.0 {
        if seq_wall == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        seq_wall / par_wall
    };
    Ok(EfficiencyReport {
        sequential_evals: sequential.model_evals,
        parallel_evals: parallel.model_evals,
        algorithm_inefficiency: parallel.model_evals as f64 / sequential.model_evals as f64,
        parallel_iterations: parallel.iterations,
        iteration_ratio: parallel.iterations as f64 / sequential.iterations as f64,
        wall_time_sequential: sequential.wall_time,
        wall_time_parallel: parallel.wall_time,
        speedup,
    })
}

/// Euclidean distance between two states of equal dimension.
pub fn parity_error(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "states have dimensions {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// Largest per-state Euclidean gap between two aligned trajectories.
pub fn trajectory_parity_error(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.states().len() != b.states().len() {
        return Err(Error::InvalidArgument(format!(
            "trajectories have {} and {} states",
            a.states().len(),
            b.states().len()
        )));
    }
    let mut worst = 0.0_f64;
    for (x, y) in a.states().iter().zip(b.states()) {
        worst = worst.max(parity_error(x, y)?);
    }
    Ok(worst)
}

/// Deterministic even-stride subsample of at most `cap` rows, preserving
/// order. Identity when the input already fits (or the cap is zero).
pub fn stride_subsample(samples: &[Vec<f64>], cap: usize) -> Vec<Vec<f64>> {
    if cap == 0 || samples.len() <= cap {
        return samples.to_vec();
    }
    (0..cap).map(|i| samples[i * samples.len() / cap].clone()).collect()
}

/// How well a batch of samples covers a target mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub num_samples: usize,
    /// Per-dimension worst deviation of an assigned-cluster mean from its
    /// component mean; every entry is infinite when some component received
    /// no samples at all.
    pub mean_error: Vec<f64>,
    /// Largest entrywise deviation of the pooled sample covariance from the
    /// mixture covariance.
    pub covariance_error: f64,
    /// Largest deviation of a nearest-mean assignment fraction from its
    /// target weight.
    pub component_weight_error: f64,
    /// Energy distance against fresh draws from the mixture (both sides
    /// capped at 2000 points).
    pub energy_distance: f64,
}

const QUALITY_ENERGY_CAP: usize = 2000;

/// Score `samples` against `mixture`. Cluster assignment is by nearest
/// component mean, so the per-component statistics tacitly truncate each
/// component at the assignment boundary; keep modes separated relative to
/// their spread when reading the mean errors. `seed` keys the reference
/// draws used by the energy term. Requires at least 1000 samples.
pub fn sample_quality(
    samples: &[Vec<f64>],
    mixture: &GaussianMixture,
    seed: u64,
) -> Result<QualityReport> {
    if samples.len() < 1000 {
        return Err(Error::InvalidArgument(format!(
            "quality statistics need at least 1000 samples, got {}",
            samples.len()
        )));
    }
    let dim = mixture.dim();
    if samples.iter().any(|s| s.len() != dim) {
        return Err(Error::InvalidArgument(format!(
            "samples must match the mixture dimension {dim}"
        )));
    }
    let k = mixture.num_components();

    let mut counts = vec![0usize; k];
    let mut sums = vec![vec![0.0; dim]; k];
    for s in samples {
        let nearest = (0..k)
            .min_by(|&a, &b| {
                let da: f64 =
                    s.iter().zip(mixture.means()[a].iter()).map(|(&x, &m)| (x - m) * (x - m)).sum();
                let db: f64 =
                    s.iter().zip(mixture.means()[b].iter()).map(|(&x, &m)| (x - m) * (x - m)).sum();
                da.partial_cmp(&db).expect("finite distances")
            })
            .expect("mixture has at least one component");
        counts[nearest] += 1;
        for d in 0..dim {
            sums[nearest][d] += s[d];
        }
    }
    let n = samples.len() as f64;
    let component_weight_error = counts
        .iter()
        .zip(mixture.weights())
        .map(|(&c, &t)| (c as f64 / n - t).abs())
        .fold(0.0_f64, f64::max);
    let mean_error = if counts.contains(&0) {
        vec![f64::INFINITY; dim]
    } else {
        (0..dim)
            .map(|d| {
                (0..k)
                    .map(|c| (sums[c][d] / counts[c] as f64 - mixture.means()[c][d]).abs())
                    .fold(0.0_f64, f64::max)
            })
            .collect()
    };

    let mut pooled_mean = vec![0.0; dim];
    for s in samples {
        for d in 0..dim {
            pooled_mean[d] += s[d];
        }
    }
    for m in pooled_mean.iter_mut() {
        *m /= n;
    }
    let target_cov = mixture.covariance();
    let mut covariance_error = 0.0_f64;
    for i in 0..dim {
        for j in 0..dim {
            let got: f64 =
                samples.iter().map(|s| (s[i] - pooled_mean[i]) * (s[j] - pooled_mean[j])).sum();
            covariance_error = covariance_error.max((got / n - target_cov[i][j]).abs());
        }
    }

    let kept = stride_subsample(samples, QUALITY_ENERGY_CAP);
    let mut rng = CounterRng::new(seed, 0);
    let reference: Vec<Vec<f64>> = (0..kept.len()).map(|_| mixture.sample(&mut rng)).collect();
    let energy_distance = energy_distance(&kept, &reference)?;

    Ok(QualityReport {
        num_samples: samples.len(),
        mean_error,
        covariance_error,
        component_weight_error,
        energy_distance,
    })
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Energy distance between two point sets:
/// `2 E|A - B| - E|A - A'| - E|B - B'|`, averaging over all ordered pairs.
/// Zero for identical sets, positive when the clouds differ.
pub fn energy_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("energy distance needs nonempty sets".into()));
    }
    let dim = a[0].len();
    if a.iter().chain(b).any(|s| s.len() != dim) {
        return Err(Error::InvalidArgument("energy distance needs a common dimension".into()));
    }
    let cross: f64 = a.iter().map(|x| b.iter().map(|y| euclidean(x, y)).sum::<f64>()).sum();
    let within_a: f64 = a.iter().map(|x| a.iter().map(|y| euclidean(x, y)).sum::<f64>()).sum();
    let within_b: f64 = b.iter().map(|x| b.iter().map(|y| euclidean(x, y)).sum::<f64>()).sum();
    let (n, m) = (a.len() as f64, b.len() as f64);
    Ok(2.0 * cross / (n * m) - within_a / (n * n) - within_b / (m * m))
}

const PERMUTATION_CAP: usize = 1000;

/// Permutation test on the energy distance between two point sets. Both
/// sides are stride-subsampled to 1000 points, pooled distances are computed
/// once, and labels are reshuffled `permutations` times with draws keyed by
/// `(seed, permutation index)`. Returns the add-one p-value
/// `(1 + #[permuted >= observed]) / (permutations + 1)`; small values reject
/// the hypothesis that both sets come from one distribution.
pub fn energy_permutation_pvalue(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    permutations: usize,
    seed: u64,
) -> Result<f64> {
    if permutations == 0 {
        return Err(Error::InvalidArgument("permutation count must be positive".into()));
    }
    let a = stride_subsample(a, PERMUTATION_CAP);
    let b = stride_subsample(b, PERMUTATION_CAP);
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("energy distance needs nonempty sets".into()));
    }
    let dim = a[0].len();
    if a.iter().chain(&b).any(|s| s.len() != dim) {
        return Err(Error::InvalidArgument("energy distance needs a common dimension".into()));
    }
    let n = a.len();
    let total = n + b.len();
    let pooled: Vec<&Vec<f64>> = a.iter().chain(&b).collect();
    let mut dist = vec![vec![0.0; total]; total];
    for i in 0..total {
        for j in (i + 1)..total {
            let d = euclidean(pooled[i], pooled[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }

    let energy_of = |labels: &[usize]| -> f64 {
        let (mut cross, mut within_a, mut within_b) = (0.0, 0.0, 0.0);
        let m = (total - n) as f64;
        let nf = n as f64;
        for i in 0..total {
            for j in (i + 1)..total {
                let d = dist[i][j];
                match (labels[i] < n, labels[j] < n) {
                    (true, true) => within_a += d,
                    (false, false) => within_b += d,
                    _ => cross += d,
                }
            }
        }
        // Ordered-pair averages: off-diagonal sums count twice, diagonals
        // are zero.
        2.0 * cross / (nf * m) - 2.0 * within_a / (nf * nf) - 2.0 * within_b / (m * m)
    };

    let identity: Vec<usize> = (0..total).collect();
    let observed = energy_of(&identity);
    let mut exceed = 0usize;
    for p in 0..permutations {
        let mut rng = CounterRng::new(seed, p as u64);
        let mut labels = identity.clone();
        for i in (1..total).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            labels.swap(i, j);
        }
        if energy_of(&labels) >= observed {
            exceed += 1;
        }
    }
    Ok((1 + exceed) as f64 / (permutations + 1) as f64)
}
