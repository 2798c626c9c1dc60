//! Deterministic synthetic corpora.
//!
//! Each category owns a unit-norm anchor (the anchors are orthonormal). A
//! video's frames are its category anchor plus a stationary AR(1) noise
//! process, so consecutive frames are more alike than distant ones and a
//! video drifts through a few neighbouring regions of embedding space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{timestamp_for, Corpus, CorpusError, FrameEmbedding, Query, QuerySet, VideoRecord};
use crate::evalbench::categories::category_label;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_categories: usize,
    pub videos_per_category: usize,
    pub frames_per_video: usize,
    pub dim: usize,
    /// Per-component standard deviation of the frame and query noise.
    pub noise: f64,
    pub seed: u64,
    pub queries_per_category: usize,
    /// Lag-one correlation of a video's noise process, in `[0, 1)`.
    pub autocorrelation: f64,
    pub sample_rate_fps: f64,
}

impl SynthConfig {
    pub fn new(
        n_categories: usize,
        videos_per_category: usize,
        frames_per_video: usize,
        dim: usize,
        noise: f64,
        seed: u64,
    ) -> Self {
        Self {
            n_categories,
            videos_per_category,
            frames_per_video,
            dim,
            noise,
            seed,
            queries_per_category: super::DEFAULT_QUERIES_PER_CATEGORY,
            autocorrelation: 0.8,
            sample_rate_fps: super::DEFAULT_SAMPLE_RATE_FPS,
        }
    }

    pub fn total_frames(&self) -> usize {
        self.n_categories * self.videos_per_category * self.frames_per_video
    }

    fn validate(&self) -> Result<(), CorpusError> {
        let bad = |msg: &str| Err(CorpusError::SynthParams(msg.to_string()));
        if self.n_categories == 0 || self.videos_per_category == 0 || self.frames_per_video == 0 {
            return bad("counts must be positive");
        }
        if self.dim < self.n_categories {
            return bad("dim must be at least the number of categories");
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad("noise must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.autocorrelation) {
            return bad("autocorrelation must lie in [0, 1)");
        }
        Ok(())
    }
}

/// The category anchors `synth_corpus` uses for `config`, one row per category.
pub fn synth_anchors(config: &SynthConfig) -> Result<Vec<Vec<f32>>, CorpusError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok(orthonormal_anchors(&mut rng, config.n_categories, config.dim))
}

fn orthonormal_anchors(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f32>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // A near-degenerate draw is simply redrawn.
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis.into_iter().map(|v| v.into_iter().map(|x| x as f32).collect()).collect()
}

pub fn synth_corpus(config: &SynthConfig) -> Result<(Corpus, QuerySet), CorpusError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let anchors = orthonormal_anchors(&mut rng, config.n_categories, config.dim);
    let rho = config.autocorrelation;
    let innovation = (1.0 - rho * rho).sqrt();

    let mut videos = Vec::with_capacity(config.n_categories * config.videos_per_category);
    let mut frames = Vec::with_capacity(config.total_frames());
    let mut drift = vec![0.0f64; config.dim];
    for (category, anchor) in anchors.iter().enumerate() {
        for _ in 0..config.videos_per_category {
            let video_id = videos.len() as u64;
            videos.push(VideoRecord {
                video_id,
                category: category_label(category),
                frame_count: config.frames_per_video as u32,
                source_uri: format!("synth://{}/video{video_id:05}", config.seed),
            });
            for ordinal in 0..config.frames_per_video {
                for d in drift.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *d = if ordinal == 0 { z } else { rho * *d + innovation * z };
                }
                let vector = anchor
                    .iter()
                    .zip(&drift)
                    .map(|(&a, &e)| if config.noise == 0.0 { a } else { (a as f64 + config.noise * e) as f32 })
                    .collect();
                frames.push(FrameEmbedding {
                    frame_id: frames.len() as u64,
                    video_id,
                    ordinal: ordinal as u32,
                    timestamp_s: timestamp_for(ordinal as u32, config.sample_rate_fps),
                    vector,
                });
            }
        }
    }

    let mut queries = Vec::with_capacity(config.n_categories * config.queries_per_category);
    for (category, anchor) in anchors.iter().enumerate() {
        for _ in 0..config.queries_per_category {
            let vector = anchor
                .iter()
                .map(|&a| {
                    let z: f64 = rng.sample(StandardNormal);
                    if config.noise == 0.0 {
                        a
                    } else {
                        (a as f64 + config.noise * z) as f32
                    }
                })
                .collect();
            queries.push(Query { query_id: queries.len() as u64, category: category_label(category), vector });
        }
    }

    let corpus = Corpus::new(config.dim, config.sample_rate_fps, videos, frames)?;
    let queries = QuerySet::new(config.dim, config.queries_per_category, queries)?;
    Ok((corpus, queries))
}
