//! Timing of grouped transport aggregation against statistics pooling on
//! synthetic `C×F×T` activations.

use std::time::Instant;

use otpool_core::datagen::{seeded_stream, standard_normal};
use otpool_core::embedding::{grouped_aggregate, GroupedActivation, ReferenceSet};
use otpool_core::oracle::stats_pool;
use otpool_core::transport::SinkhornConfig;
use otpool_core::Result;

use crate::checks::normal_matrix;
use crate::config::BenchConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub frames: usize,
    pub ref_size: usize,
    pub iterations: usize,
    pub ot_median_us: f64,
    pub ot_p95_us: f64,
    pub stats_median_us: f64,
    pub stats_p95_us: f64,
}

pub const CSV_HEADER: &str = "frames,ref_size,iterations,ot_median_us,ot_p95_us,stats_median_us,stats_p95_us";

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:.3},{:.3},{:.3},{:.3}",
            self.frames,
            self.ref_size,
            self.iterations,
            self.ot_median_us,
            self.ot_p95_us,
            self.stats_median_us,
            self.stats_p95_us
        )
    }
}

/// Nearest-rank percentile of sorted samples.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn summarize(mut samples: Vec<f64>) -> (f64, f64) {
    samples.sort_by(f64::total_cmp);
    (percentile(&samples, 0.5), percentile(&samples, 0.95))
}

fn time_us<T>(reps: usize, mut f: impl FnMut() -> Result<T>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(reps);
    // warm-up call, not recorded
    std::hint::black_box(f()?);
    for _ in 0..reps {
        let start = Instant::now();
        std::hint::black_box(f()?);
        out.push(start.elapsed().as_secs_f64() * 1e6);
    }
    Ok(out)
}

fn stats_aggregate(act: &GroupedActivation) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for f in 0..act.freqs() {
        out.extend(stats_pool(&act.frequency_slice(f), None)?);
    }
    Ok(out)
}

/// Runs the full grid in `frames`, `ref_sizes`, `iterations` order.
pub fn run(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut rng = seeded_stream(config.seed, 0);
    let (c, f) = (config.channels, config.freqs);
    let mut rows = Vec::new();
    for &t in &config.frames {
        // rectified activations, like a convolutional front end
        let data = (0..c * f * t).map(|_| standard_normal(&mut rng).abs()).collect();
        let act = GroupedActivation::new(c, f, t, data)?;
        for &nz in &config.ref_sizes {
            let refs = (0..f)
                .map(|_| ReferenceSet::new(normal_matrix(&mut rng, c, nz)))
                .collect::<Result<Vec<_>>>()?;
            for &iters in &config.iterations {
                let sinkhorn = SinkhornConfig::default()
                    .with_epsilon(config.epsilon)
                    .with_domain(config.domain)
                    .unrolled(iters);
                let (ot_median_us, ot_p95_us) =
                    summarize(time_us(config.repetitions, || grouped_aggregate(&act, &refs, &sinkhorn, false))?);
                let (stats_median_us, stats_p95_us) =
                    summarize(time_us(config.repetitions, || stats_aggregate(&act))?);
                rows.push(BenchRow {
                    frames: t,
                    ref_size: nz,
                    iterations: iters,
                    ot_median_us,
                    ot_p95_us,
                    stats_median_us,
                    stats_p95_us,
                });
            }
        }
    }
    Ok(rows)
}
