//! Per-video temporal vectors.
//!
//! Each video is clustered on its own, gets its own transition graph, and is
//! represented by its augmented cluster vectors. Queries compare against
//! those vectors only, so frame embeddings need not be kept.

use rayon::prelude::*;

use super::{by_score_then_id, check_query, RankedVideo, SearchError, SearchResult};
use crate::cluster::{fit_frames, ClusterError, ClusterParams};
use crate::corpus::{Corpus, VideoId, VideoRecord};
use crate::error::Result;
use crate::similarity::{cosine_with_norms, squared_norm};
use crate::tgraph::{augment, GraphError, TemporalGraph};

/// Clusters per video unless configured otherwise.
pub const DEFAULT_PER_VIDEO_K: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct VideoTemporalVectors {
    dim: usize,
    per_video_k: usize,
    alpha: f32,
    seed: u64,
    videos: Vec<VideoRecord>,
    /// Row-major vectors per video, parallel to `videos`.
    vectors: Vec<Vec<f32>>,
}

impl VideoTemporalVectors {
    pub fn from_parts(
        dim: usize,
        per_video_k: usize,
        alpha: f32,
        seed: u64,
        videos: Vec<VideoRecord>,
        vectors: Vec<Vec<f32>>,
    ) -> Result<Self, SearchError> {
        if dim == 0 || videos.len() != vectors.len() {
            return Err(SearchError::Inconsistent("video table and vector table disagree".into()));
        }
        if vectors.iter().any(|v| v.is_empty() || v.len() % dim != 0) {
            return Err(SearchError::Inconsistent(format!("a video's vectors are not a multiple of dim {dim}")));
        }
        if videos.windows(2).any(|w| w[0].video_id >= w[1].video_id) {
            return Err(SearchError::Inconsistent("videos are not strictly sorted by id".into()));
        }
        Ok(Self { dim, per_video_k, alpha, seed, videos, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn per_video_k(&self) -> usize {
        self.per_video_k
    }

    pub fn alpha(&self) -> f32 {
        self.alpha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn videos(&self) -> &[VideoRecord] {
        &self.videos
    }

    /// Temporal vectors of the video at position `i`, one slice per cluster.
    pub fn vectors_of(&self, i: usize) -> impl Iterator<Item = &[f32]> + '_ {
        self.vectors[i].chunks_exact(self.dim)
    }

    pub fn vectors_for(&self, video_id: VideoId) -> Option<Vec<&[f32]>> {
        let i = self.videos.binary_search_by_key(&video_id, |v| v.video_id).ok()?;
        Some(self.vectors_of(i).collect())
    }

    pub fn raw_vectors(&self) -> &[Vec<f32>] {
        &self.vectors
    }

    pub fn vector_count(&self) -> usize {
        self.vectors.iter().map(|v| v.len() / self.dim).sum()
    }
}

fn video_seed(seed: u64, video_id: VideoId) -> u64 {
    seed ^ video_id.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn build_video_vectors(corpus: &Corpus, per_video_k: usize, alpha: f32, seed: u64) -> Result<VideoTemporalVectors> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(GraphError::Alpha(alpha).into());
    }
    let dim = corpus.dim();
    let grouped: Vec<_> = corpus.frames_by_video().collect();
    let vectors = grouped
        .par_iter()
        .map(|(video, frames)| -> Result<Vec<f32>> {
            if frames.len() < per_video_k {
                return Err(ClusterError::TooManyClusters { k: per_video_k, frames: frames.len() }.into());
            }
            let params = ClusterParams::with_k(per_video_k, video_seed(seed, video.video_id));
            let model = fit_frames(frames, dim, &params)?;
            let sequence: Vec<u32> =
                frames.iter().map(|f| model.cluster_of(f.frame_id).expect("fitted frame")).collect();
            let graph = TemporalGraph::from_sequences(per_video_k, [sequence.as_slice()]);
            Ok(augment(&model, &graph, alpha)?.as_flat().to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VideoTemporalVectors { dim, per_video_k, alpha, seed, videos: corpus.videos().to_vec(), vectors })
}

/// Scores each video by its best temporal vector and returns the top `k`.
pub fn search_videos(vectors: &VideoTemporalVectors, query: &[f32], k: usize) -> Result<SearchResult, SearchError> {
    if k == 0 {
        return Err(SearchError::ZeroK);
    }
    if vectors.videos.is_empty() {
        return Err(SearchError::EmptyIndex);
    }
    let qn = check_query(vectors.dim, query)?;
    let mut scored = 0;
    let mut ranked: Vec<RankedVideo> = vectors
        .videos
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let score = vectors
                .vectors_of(i)
                .map(|t| {
                    scored += 1;
                    cosine_with_norms(query, t, qn, squared_norm(t))
                })
                .fold(f64::NEG_INFINITY, f64::max);
            RankedVideo { video_id: v.video_id, score, best_frame_id: None }
        })
        .collect();
    ranked.sort_by(|a, b| by_score_then_id((a.score, a.video_id), (b.score, b.video_id)));
    ranked.truncate(k);
    Ok(SearchResult {
        ranked_videos: ranked,
        ranked_frames: Vec::new(),
        clusters_probed: Vec::new(),
        frames_scored: scored,
    })
}
