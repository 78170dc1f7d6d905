use std::time::Instant;

/// Summary of repeated wall-clock measurements, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimingStats {
    pub median_ns: u64,
    pub min_ns: u64,
    pub mean_ns: u64,
    pub repeats: usize,
}

impl TimingStats {
    /// Median is the middle sample (lower middle for even counts).
    pub fn from_samples(samples: &[u64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let sum: u128 = sorted.iter().map(|&s| s as u128).sum();
        Some(TimingStats {
            median_ns: sorted[(sorted.len() - 1) / 2],
            min_ns: sorted[0],
            mean_ns: (sum / sorted.len() as u128) as u64,
            repeats: sorted.len(),
        })
    }

    pub fn median_ms(&self) -> f64 {
        self.median_ns as f64 / 1e6
    }

    pub fn min_ms(&self) -> f64 {
        self.min_ns as f64 / 1e6
    }
}

/// Runs `f` `warmup` times untimed, then `repeats` timed runs (at least one).
pub fn measure(warmup: usize, repeats: usize, mut f: impl FnMut()) -> TimingStats {
    for _ in 0..warmup {
        f();
    }
    let samples: Vec<u64> = (0..repeats.max(1))
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed().as_nanos().min(u64::MAX as u128) as u64
        })
        .collect();
    TimingStats::from_samples(&samples).expect("at least one sample")
}
