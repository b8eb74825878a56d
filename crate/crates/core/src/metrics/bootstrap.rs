use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MetricError;

/// Smallest accepted number of bootstrap replicates.
pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub replicates: usize,
    /// Replicates on which the metric was undefined and skipped.
    pub failed: usize,
}

/// Linear-interpolation percentile of sorted data (`q` in [0, 1]).
///
/// Position `q (n - 1)` interpolated between its neighbours.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap interval over resampled units.
///
/// Each replicate draws `n_units` indices with replacement (ChaCha8 seeded
/// from `seed`, one `gen_range(0..n_units)` per draw) and evaluates
/// `metric` on them. Replicates where the metric errors are skipped; if more
/// than half fail the interval is refused.
pub fn bootstrap_ci<F>(
    n_units: usize,
    metric: F,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<ConfidenceInterval, MetricError>
where
    F: Fn(&[usize]) -> Result<f64, MetricError>,
{
    if replicates < MIN_REPLICATES {
        return Err(MetricError::BootstrapPrecondition(format!(
            "need at least {MIN_REPLICATES} replicates, got {replicates}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(MetricError::BootstrapPrecondition(format!(
            "level must lie in (0, 1), got {level}"
        )));
    }
    if n_units == 0 {
        return Err(MetricError::BootstrapPrecondition("no units to resample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = vec![0usize; n_units];
    let mut stats = Vec::with_capacity(replicates);
    let mut failed = 0;
    for _ in 0..replicates {
        for slot in idx.iter_mut() {
            *slot = rng.gen_range(0..n_units);
        }
        match metric(&idx) {
            Ok(v) if v.is_finite() => stats.push(v),
            _ => failed += 1,
        }
    }
    if failed * 2 > replicates {
        return Err(MetricError::BootstrapUndefined { failed, replicates });
    }
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(ConfidenceInterval {
        lo: percentile(&stats, tail),
        hi: percentile(&stats, 1.0 - tail),
        level,
        replicates,
        failed,
    })
}
