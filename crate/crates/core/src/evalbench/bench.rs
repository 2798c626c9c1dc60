//! Search throughput measurement.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::QuerySet;
use crate::error::Result;
use crate::retrieve::{search, RetrievalIndex};

use super::EvalError;

/// Frames-per-second figures published for the original ResNet-152 and
/// ResNet-50 pipelines. Hardware- and model-bound; kept for reference only.
pub const REFERENCE_RATES: [(&str, f64); 2] = [("ResNet152", 15000.0), ("ResNet50", 18000.0)];

const MIN_REPETITIONS: usize = 10;
const BENCH_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    /// Indexed frames covered per second: every query covers the whole index.
    pub effective_fps: f64,
    /// Frames actually scored in stage 2 per second.
    pub raw_fps: f64,
    pub median_wall_s: f64,
    pub repetitions: usize,
    pub queries: usize,
    pub index_frames: usize,
    pub frames_scored_per_rep: usize,
    pub probe_c: usize,
}

pub fn bench_speed(index: &RetrievalIndex, queries: &QuerySet, c: usize) -> Result<BenchReport> {
    bench_speed_with(index, queries, c, MIN_REPETITIONS)
}

/// Runs the whole query set `repetitions` times (at least 10) and reports
/// rates from the median repetition wall time.
pub fn bench_speed_with(
    index: &RetrievalIndex,
    queries: &QuerySet,
    c: usize,
    repetitions: usize,
) -> Result<BenchReport> {
    if queries.is_empty() {
        return Err(EvalError::NoQueries.into());
    }
    let repetitions = repetitions.max(MIN_REPETITIONS);
    let mut walls = Vec::with_capacity(repetitions);
    let mut frames_scored = 0;
    for _ in 0..repetitions {
        let start = Instant::now();
        let mut scored = 0;
        for q in queries.queries() {
            scored += std::hint::black_box(search(index, &q.vector, c, BENCH_K)?).frames_scored;
        }
        walls.push(start.elapsed().as_secs_f64());
        frames_scored = scored;
    }
    walls.sort_by(f64::total_cmp);
    let median = if repetitions % 2 == 1 {
        walls[repetitions / 2]
    } else {
        (walls[repetitions / 2 - 1] + walls[repetitions / 2]) / 2.0
    };
    let secs = median.max(1e-9);
    Ok(BenchReport {
        effective_fps: (index.frame_count() * queries.len()) as f64 / secs,
        raw_fps: frames_scored as f64 / secs,
        median_wall_s: median,
        repetitions,
        queries: queries.len(),
        index_frames: index.frame_count(),
        frames_scored_per_rep: frames_scored,
        probe_c: c,
    })
}
