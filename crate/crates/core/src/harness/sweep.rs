//! Gap sweeps and the reference trade-off curve.

use super::{run_trials, ExperimentConfig};
use crate::environment::Instance;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One row of a sweep: the gap-dependent regret estimate at one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub mean_regret: f64,
    pub stderr: f64,
    pub reference: f64,
    pub collisions: u64,
    pub trials: usize,
    pub seed_base: u64,
}

/// The reference trade-off shape for a threshold sequence: constant
/// `1 / (D_j D_{j+1})` on each bracket `(D_{j+1}, D_j]` (absolute constants
/// suppressed).
pub fn pareto_reference(deltas: &[f64], delta_query: f64) -> Result<f64> {
    if deltas.len() < 2 {
        return Err(Error::BadSchedule("need at least two thresholds".into()));
    }
    let last = *deltas.last().unwrap();
    if delta_query > deltas[0] || delta_query < last {
        return Err(Error::BadConfig(format!(
            "query {delta_query} outside [{last}, {}]",
            deltas[0]
        )));
    }
    for j in 0..deltas.len() - 1 {
        let in_bracket = delta_query > deltas[j + 1] && delta_query <= deltas[j];
        let closes_tail = j + 2 == deltas.len() && delta_query >= deltas[j + 1];
        if in_bracket || closes_tail {
            return Ok(1.0 / (deltas[j] * deltas[j + 1]));
        }
    }
    unreachable!("brackets cover the validated range")
}

/// Samples means with coordinates in `[0.05, 0.95]` and gap at least
/// `min_gap`, arm positions shuffled. For `min_gap` at or above the full
/// span the extreme instance (all top arms at 0.95, the rest at 0.05) is
/// forced.
pub fn sample_instance_with_gap(
    k: usize,
    m: usize,
    min_gap: f64,
    rng: &mut impl Rng,
) -> Result<Instance> {
    const LO: f64 = 0.05;
    const HI: f64 = 0.95;
    if !(0.0..=1.0).contains(&min_gap) {
        return Err(Error::BadConfig(format!("gap {min_gap} outside [0, 1]")));
    }
    let span = HI - LO;
    let mut means = Vec::with_capacity(k);
    if min_gap >= span {
        means.extend(std::iter::repeat(HI).take(m));
        means.extend(std::iter::repeat(LO).take(k - m));
    } else {
        // Highest of the bottom block, then lowest of the top block at
        // least min_gap above it; remaining coordinates fill their sides.
        let bottom_max = rng.random_range(LO..=HI - min_gap);
        let top_min = rng.random_range(bottom_max + min_gap..=HI);
        means.push(top_min);
        for _ in 1..m {
            means.push(rng.random_range(top_min..=HI));
        }
        means.push(bottom_max);
        for _ in 1..(k - m) {
            means.push(rng.random_range(LO..=bottom_max));
        }
    }
    means.shuffle(rng);
    Instance::new(means, m)
}

/// Estimates the gap-dependent regret on a threshold grid.
///
/// The supremum over instances is estimated pragmatically as a max over
/// `instances_per_gap` sampled instances per grid point; each instance's
/// regret is the mean over `config.trials` seeds, reported with its
/// standard error. Collisions are totaled across every run of the grid
/// point.
pub fn sweep(
    config: &ExperimentConfig,
    gap_grid: &[f64],
    instances_per_gap: usize,
) -> Result<Vec<SweepRow>> {
    if gap_grid.is_empty() || instances_per_gap == 0 {
        return Err(Error::Empty("sweep needs a grid and instances".into()));
    }
    let mut rows = Vec::with_capacity(gap_grid.len());
    for (gi, &delta) in gap_grid.iter().enumerate() {
        let mut worst: Option<(f64, f64)> = None;
        let mut collisions = 0u64;
        for ii in 0..instances_per_gap {
            let mut inst_rng = ChaCha8Rng::seed_from_u64(config.shared_seed);
            inst_rng.set_stream(1_000_000 + (gi as u64) * 1000 + ii as u64);
            let instance =
                sample_instance_with_gap(config.k, config.m, delta, &mut inst_rng)?;
            let mut cfg = config.clone();
            cfg.means = instance.means().to_vec();
            let results = run_trials(&cfg, cfg.trials)?;
            let regrets: Vec<f64> = results.iter().map(|r| r.pseudo_regret).collect();
            collisions += results.iter().map(|r| r.collisions).sum::<u64>();
            let mean = regrets.iter().sum::<f64>() / regrets.len() as f64;
            let var = regrets
                .iter()
                .map(|r| (r - mean) * (r - mean))
                .sum::<f64>()
                / regrets.len().max(1) as f64;
            let stderr = (var / regrets.len() as f64).sqrt();
            if worst.map(|(w, _)| mean > w).unwrap_or(true) {
                worst = Some((mean, stderr));
            }
        }
        let (mean_regret, stderr) = worst.expect("instances_per_gap > 0");
        rows.push(SweepRow {
            delta,
            mean_regret,
            stderr,
            reference: pareto_reference(&config.deltas, delta)?,
            collisions,
            trials: config.trials * instances_per_gap,
            seed_base: config.shared_seed,
        });
    }
    Ok(rows)
}
