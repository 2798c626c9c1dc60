//! Two-stage cosine search over a cluster-bucketed frame index.
//!
//! Stage 1 ranks clusters by cosine between the query and each cluster's
//! augmented vector and keeps the best `c`. Stage 2 scores every frame in
//! those clusters' buckets against the raw frame embeddings, keeps each
//! video's best frame, and returns the top `k` videos.
//!
//! Ordering is total everywhere: higher score first, then lower id.

mod per_video;

pub use per_video::{build_video_vectors, search_videos, VideoTemporalVectors, DEFAULT_PER_VIDEO_K};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::cluster::{fit_clusters, ClusterId, ClusterModel, ClusterParams};
use crate::corpus::{Corpus, FrameId, VideoId, VideoRecord};
use crate::error::Result;
use crate::similarity::{cosine_with_norms, squared_norm};
use crate::tgraph::{augment, build_graph, AugmentedEmbeddings, TemporalGraph};

/// Probe count used when the caller does not choose one.
pub const DEFAULT_PROBE_C: usize = 5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("query has dimension {got}, index dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index contains no frames")]
    EmptyIndex,
    #[error("probe count c must be at least 1")]
    ZeroProbe,
    #[error("result count k must be at least 1")]
    ZeroK,
    #[error("query vector has zero norm")]
    ZeroNormQuery,
    #[error("query component {0} is not finite")]
    NonFiniteQuery(usize),
    #[error("inconsistent index: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexParams {
    pub k_clusters: usize,
    pub alpha: f32,
    pub seed: u64,
}

/// Frames assigned to one cluster, sorted by frame id.
#[derive(Debug, Clone, PartialEq)]
pub struct Bucket {
    frame_ids: Vec<FrameId>,
    vectors: Vec<f32>,
    // derived on construction
    video_slots: Vec<u32>,
    sq_norms: Vec<f64>,
}

impl Bucket {
    pub fn len(&self) -> usize {
        self.frame_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_ids.is_empty()
    }

    pub fn frame_ids(&self) -> &[FrameId] {
        &self.frame_ids
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }
}

/// Immutable searchable bundle produced by [`build_index`] or loaded from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalIndex {
    dim: usize,
    params: IndexParams,
    centroids: Vec<f32>,
    cluster_vectors: AugmentedEmbeddings,
    graph: TemporalGraph,
    buckets: Vec<Bucket>,
    frame_to_video: Vec<(FrameId, VideoId)>,
    videos: Vec<VideoRecord>,
    cluster_sq_norms: Vec<f64>,
}

/// Raw parts of a [`RetrievalIndex`]; buckets are `(frame_ids, flat vectors)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexParts {
    pub dim: usize,
    pub params: IndexParams,
    pub centroids: Vec<f32>,
    pub cluster_vectors: Vec<f32>,
    pub graph: TemporalGraph,
    pub buckets: Vec<(Vec<FrameId>, Vec<f32>)>,
    pub frame_to_video: Vec<(FrameId, VideoId)>,
    pub videos: Vec<VideoRecord>,
}

impl RetrievalIndex {
    /// Assembles an index from a fitted clustering and its graph.
    pub fn from_model(
        corpus: &Corpus,
        model: &ClusterModel,
        graph: &TemporalGraph,
        alpha: f32,
        seed: u64,
    ) -> Result<Self> {
        let cluster_vectors = augment(model, graph, alpha)?;
        let dim = corpus.dim();
        let mut buckets: Vec<(Vec<FrameId>, Vec<f32>)> = vec![(Vec::new(), Vec::new()); model.k()];
        for f in corpus.frames() {
            let c = model.cluster_of(f.frame_id).ok_or(crate::tgraph::GraphError::UnassignedFrame(f.frame_id))?;
            buckets[c as usize].0.push(f.frame_id);
        }
        let by_id: std::collections::HashMap<FrameId, &[f32]> =
            corpus.frames().iter().map(|f| (f.frame_id, f.vector.as_slice())).collect();
        for (ids, vectors) in buckets.iter_mut() {
            ids.sort_unstable();
            vectors.reserve(ids.len() * dim);
            for id in ids.iter() {
                vectors.extend_from_slice(by_id[id]);
            }
        }
        let mut frame_to_video: Vec<(FrameId, VideoId)> =
            corpus.frames().iter().map(|f| (f.frame_id, f.video_id)).collect();
        frame_to_video.sort_unstable();
        Ok(Self::from_parts(IndexParts {
            dim,
            params: IndexParams { k_clusters: model.k(), alpha, seed },
            centroids: model.centroids().to_vec(),
            cluster_vectors: cluster_vectors.as_flat().to_vec(),
            graph: graph.clone(),
            buckets,
            frame_to_video,
            videos: corpus.videos().to_vec(),
        })?)
    }

    /// Validates raw parts and derives the search caches.
    pub fn from_parts(parts: IndexParts) -> Result<Self, SearchError> {
        let bad = |m: String| Err(SearchError::Inconsistent(m));
        let IndexParts { dim, params, centroids, cluster_vectors, graph, buckets, frame_to_video, mut videos } = parts;
        let k = params.k_clusters;
        if dim == 0 {
            return bad("dimension is zero".into());
        }
        if buckets.len() != k || centroids.len() != k * dim || cluster_vectors.len() != k * dim || graph.n_nodes() != k
        {
            return bad(format!("cluster tables disagree with k_clusters = {k}"));
        }
        if frame_to_video.windows(2).any(|w| w[0].0 >= w[1].0) {
            return bad("frame table is not strictly sorted by frame id".into());
        }
        videos.sort_by_key(|v| v.video_id);
        if videos.windows(2).any(|w| w[0].video_id == w[1].video_id) {
            return bad("duplicate video id".into());
        }
        let mut seen = 0usize;
        let mut built = Vec::with_capacity(k);
        for (c, (frame_ids, vectors)) in buckets.into_iter().enumerate() {
            if vectors.len() != frame_ids.len() * dim {
                return bad(format!("bucket {c} vector table has the wrong length"));
            }
            let mut video_slots = Vec::with_capacity(frame_ids.len());
            for &id in &frame_ids {
                let Ok(pos) = frame_to_video.binary_search_by_key(&id, |&(f, _)| f) else {
                    return bad(format!("bucket {c} holds unknown frame {id}"));
                };
                let video = frame_to_video[pos].1;
                let Ok(slot) = videos.binary_search_by_key(&video, |v| v.video_id) else {
                    return bad(format!("frame {id} maps to unknown video {video}"));
                };
                video_slots.push(slot as u32);
            }
            if frame_ids.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("bucket {c} frame ids are not strictly ascending"));
            }
            seen += frame_ids.len();
            let sq_norms = vectors.chunks_exact(dim).map(squared_norm).collect();
            built.push(Bucket { frame_ids, vectors, video_slots, sq_norms });
        }
        if seen != frame_to_video.len() {
            return bad(format!("{} frames indexed but buckets hold {seen}", frame_to_video.len()));
        }
        let cluster_sq_norms = cluster_vectors.chunks_exact(dim).map(squared_norm).collect();
        Ok(Self {
            dim,
            params,
            centroids,
            cluster_vectors: AugmentedEmbeddings::from_raw(params.alpha, dim, cluster_vectors),
            graph,
            buckets: built,
            frame_to_video,
            videos,
            cluster_sq_norms,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> IndexParams {
        self.params
    }

    pub fn k_clusters(&self) -> usize {
        self.params.k_clusters
    }

    pub fn frame_count(&self) -> usize {
        self.frame_to_video.len()
    }

    pub fn centroid(&self, c: ClusterId) -> &[f32] {
        &self.centroids[c as usize * self.dim..(c as usize + 1) * self.dim]
    }

    pub fn centroids(&self) -> &[f32] {
        &self.centroids
    }

    pub fn cluster_vectors(&self) -> &AugmentedEmbeddings {
        &self.cluster_vectors
    }

    pub fn graph(&self) -> &TemporalGraph {
        &self.graph
    }

    pub fn buckets(&self) -> &[Bucket] {
        &self.buckets
    }

    pub fn bucket(&self, c: ClusterId) -> Option<&Bucket> {
        self.buckets.get(c as usize)
    }

    /// `(frame_id, video_id)` sorted by frame id.
    pub fn frame_to_video(&self) -> &[(FrameId, VideoId)] {
        &self.frame_to_video
    }

    pub fn videos(&self) -> &[VideoRecord] {
        &self.videos
    }

    pub fn video(&self, video_id: VideoId) -> Option<&VideoRecord> {
        self.videos.binary_search_by_key(&video_id, |v| v.video_id).ok().map(|i| &self.videos[i])
    }

    pub fn video_of(&self, frame_id: FrameId) -> Option<VideoId> {
        self.frame_to_video.binary_search_by_key(&frame_id, |&(f, _)| f).ok().map(|i| self.frame_to_video[i].1)
    }

    /// Cluster and stored vector of an indexed frame.
    pub fn frame(&self, frame_id: FrameId) -> Option<(ClusterId, &[f32])> {
        self.buckets.iter().enumerate().find_map(|(c, b)| {
            b.frame_ids
                .binary_search(&frame_id)
                .ok()
                .map(|i| (c as ClusterId, &b.vectors[i * self.dim..(i + 1) * self.dim]))
        })
    }
}

/// Fits `k_clusters`-means, builds the transition graph and augments with `alpha`.
pub fn build_index(corpus: &Corpus, k_clusters: usize, alpha: f32, seed: u64) -> Result<RetrievalIndex> {
    build_index_with(corpus, &ClusterParams::with_k(k_clusters, seed), alpha)
}

pub fn build_index_with(corpus: &Corpus, params: &ClusterParams, alpha: f32) -> Result<RetrievalIndex> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(crate::tgraph::GraphError::Alpha(alpha).into());
    }
    let model = fit_clusters(corpus, params)?;
    let graph = build_graph(corpus, &model)?;
    RetrievalIndex::from_model(corpus, &model, &graph, alpha, params.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedVideo {
    pub video_id: VideoId,
    pub score: f64,
    /// Best-scoring frame of the video; absent in per-video mode.
    pub best_frame_id: Option<FrameId>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchResult {
    pub ranked_videos: Vec<RankedVideo>,
    /// The `k` best-scoring frames.
    pub ranked_frames: Vec<(FrameId, f64)>,
    pub clusters_probed: Vec<ClusterId>,
    pub frames_scored: usize,
}

pub(crate) fn by_score_then_id<I: Ord>(a: (f64, I), b: (f64, I)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

fn check_query(dim: usize, query: &[f32]) -> Result<f64, SearchError> {
    if query.len() != dim {
        return Err(SearchError::DimensionMismatch { expected: dim, got: query.len() });
    }
    if let Some(i) = query.iter().position(|x| !x.is_finite()) {
        return Err(SearchError::NonFiniteQuery(i));
    }
    let n = squared_norm(query);
    if n == 0.0 {
        return Err(SearchError::ZeroNormQuery);
    }
    Ok(n)
}

/// Stage-1 cluster ranking: all clusters, best first.
pub fn rank_clusters(index: &RetrievalIndex, query: &[f32]) -> Result<Vec<(ClusterId, f64)>, SearchError> {
    let qn = check_query(index.dim, query)?;
    let mut scored: Vec<(ClusterId, f64)> = index
        .cluster_vectors
        .as_flat()
        .chunks_exact(index.dim)
        .zip(&index.cluster_sq_norms)
        .enumerate()
        .map(|(c, (v, &n))| (c as ClusterId, cosine_with_norms(query, v, qn, n)))
        .collect();
    scored.sort_by(|a, b| by_score_then_id((a.1, a.0), (b.1, b.0)));
    Ok(scored)
}

/// Scores every frame of the given buckets and ranks videos by their best frame.
fn score_buckets(index: &RetrievalIndex, query: &[f32], qn: f64, clusters: &[ClusterId], k: usize) -> SearchResult {
    let dim = index.dim;
    let mut best: Vec<Option<(f64, FrameId)>> = vec![None; index.videos.len()];
    let mut frames = Vec::new();
    for &c in clusters {
        let bucket = &index.buckets[c as usize];
        for (i, v) in bucket.vectors.chunks_exact(dim).enumerate() {
            let score = cosine_with_norms(query, v, qn, bucket.sq_norms[i]);
            let id = bucket.frame_ids[i];
            frames.push((id, score));
            let slot = &mut best[bucket.video_slots[i] as usize];
            match slot {
                Some((s, f)) if by_score_then_id((*s, *f), (score, id)) != Ordering::Greater => {}
                _ => *slot = Some((score, id)),
            }
        }
    }
    let frames_scored = frames.len();
    let cmp = |a: &(FrameId, f64), b: &(FrameId, f64)| by_score_then_id((a.1, a.0), (b.1, b.0));
    if frames.len() > k {
        frames.select_nth_unstable_by(k - 1, cmp);
        frames.truncate(k);
    }
    frames.sort_by(cmp);

    let mut videos: Vec<RankedVideo> = best
        .iter()
        .enumerate()
        .filter_map(|(slot, b)| {
            b.map(|(score, frame)| RankedVideo {
                video_id: index.videos[slot].video_id,
                score,
                best_frame_id: Some(frame),
            })
        })
        .collect();
    videos.sort_by(|a, b| by_score_then_id((a.score, a.video_id), (b.score, b.video_id)));
    videos.truncate(k);
    SearchResult { ranked_videos: videos, ranked_frames: frames, clusters_probed: clusters.to_vec(), frames_scored }
}

fn check_search(index: &RetrievalIndex, c: usize, k: usize) -> Result<(), SearchError> {
    if index.frame_count() == 0 {
        return Err(SearchError::EmptyIndex);
    }
    if c == 0 {
        return Err(SearchError::ZeroProbe);
    }
    if k == 0 {
        return Err(SearchError::ZeroK);
    }
    Ok(())
}

/// Two-stage search probing the `c` best clusters (clamped to the cluster count).
pub fn search(index: &RetrievalIndex, query: &[f32], c: usize, k: usize) -> Result<SearchResult, SearchError> {
    check_search(index, c, k)?;
    let ranked = rank_clusters(index, query)?;
    let qn = squared_norm(query);
    let probed: Vec<ClusterId> = ranked.iter().take(c).map(|&(id, _)| id).collect();
    Ok(score_buckets(index, query, qn, &probed, k))
}

/// Scores every indexed frame; the frame-level baseline and test oracle.
pub fn search_exhaustive(index: &RetrievalIndex, query: &[f32], k: usize) -> Result<SearchResult, SearchError> {
    check_search(index, 1, k)?;
    let qn = check_query(index.dim, query)?;
    let all: Vec<ClusterId> = (0..index.k_clusters() as ClusterId).collect();
    let mut result = score_buckets(index, query, qn, &all, k);
    result.clusters_probed.clear();
    Ok(result)
}
