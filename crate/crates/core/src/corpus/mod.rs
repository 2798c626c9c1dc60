//! Corpus data model: sampled frame embeddings grouped by video.
//!
//! Frames are identified by a corpus-unique `frame_id` and carry their
//! position (`ordinal`) inside the video's sampled sequence. The sampling
//! rate is metadata only; `timestamp_s` is derived from it.

mod embed;
mod io;
mod synth;

pub use embed::{toy_embed, EmbedError};
pub use io::{load_corpus, load_queries, write_corpus, write_queries, CorpusManifest, QueryManifest};
pub use synth::{synth_anchors, synth_corpus, SynthConfig};

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub type FrameId = u64;
pub type VideoId = u64;

/// Default frame sampling rate (frames per second).
pub const DEFAULT_SAMPLE_RATE_FPS: f64 = 2.0;
/// Default number of query images per category.
pub const DEFAULT_QUERIES_PER_CATEGORY: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("embedding blob truncated: vector for frame {frame_id} (video {video_id}) starts at byte offset {offset} but the blob has {actual} bytes, expected {expected}")]
    Truncated { frame_id: FrameId, video_id: VideoId, offset: u64, expected: u64, actual: u64 },
    #[error("embedding blob has {actual} bytes but manifest dim {dim} and {frames} frames need {expected}")]
    BlobSize { dim: usize, frames: u64, expected: u64, actual: u64 },
    #[error("frame {frame_id} (video {video_id}) has dimension {got}, corpus dimension is {expected}")]
    DimensionMismatch { frame_id: FrameId, video_id: VideoId, expected: usize, got: usize },
    #[error("frame {frame_id} (video {video_id}) component {component} is not finite")]
    NonFinite { frame_id: FrameId, video_id: VideoId, component: usize },
    #[error("video {video_id}: expected ordinal {expected}, found {found} at frame {frame_id}")]
    OrdinalGap { video_id: VideoId, frame_id: FrameId, expected: u32, found: u32 },
    #[error("video {video_id} declares {declared} frames but {actual} are present")]
    FrameCount { video_id: VideoId, declared: u32, actual: u32 },
    #[error("frame {frame_id} references unknown video {video_id}")]
    UnknownVideo { frame_id: FrameId, video_id: VideoId },
    #[error("duplicate video id {0}")]
    DuplicateVideo(VideoId),
    #[error("duplicate frame id {0}")]
    DuplicateFrame(FrameId),
    #[error("video {0} has no frames")]
    EmptyVideo(VideoId),
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("sample rate must be positive and finite, got {0}")]
    SampleRate(f64),
    #[error("query {query_id} has dimension {got}, expected {expected}")]
    QueryDimension { query_id: u64, expected: usize, got: usize },
    #[error("query {query_id} component {component} is not finite")]
    QueryNonFinite { query_id: u64, component: usize },
    #[error("invalid synthetic corpus parameters: {0}")]
    SynthParams(String),
}

/// One sampled frame's embedding plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEmbedding {
    pub frame_id: FrameId,
    pub video_id: VideoId,
    pub ordinal: u32,
    pub timestamp_s: f64,
    pub vector: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: VideoId,
    pub category: String,
    pub frame_count: u32,
    pub source_uri: String,
}

/// Frames of every video, ordered by `(video_id, ordinal)`.
///
/// Construct through [`Corpus::new`], which enforces all invariants; the
/// fields are read-only afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    dim: usize,
    sample_rate_fps: f64,
    videos: Vec<VideoRecord>,
    frames: Vec<FrameEmbedding>,
}

impl Corpus {
    /// Validates and canonicalizes: videos sorted by id, frames sorted by
    /// `(video_id, ordinal)`.
    pub fn new(
        dim: usize,
        sample_rate_fps: f64,
        mut videos: Vec<VideoRecord>,
        mut frames: Vec<FrameEmbedding>,
    ) -> Result<Self, CorpusError> {
        if dim == 0 {
            return Err(CorpusError::ZeroDimension);
        }
        if !(sample_rate_fps.is_finite() && sample_rate_fps > 0.0) {
            return Err(CorpusError::SampleRate(sample_rate_fps));
        }
        videos.sort_by_key(|v| v.video_id);
        for pair in videos.windows(2) {
            if pair[0].video_id == pair[1].video_id {
                return Err(CorpusError::DuplicateVideo(pair[0].video_id));
            }
        }
        for f in &frames {
            if videos.binary_search_by_key(&f.video_id, |v| v.video_id).is_err() {
                return Err(CorpusError::UnknownVideo { frame_id: f.frame_id, video_id: f.video_id });
            }
            if f.vector.len() != dim {
                return Err(CorpusError::DimensionMismatch {
                    frame_id: f.frame_id,
                    video_id: f.video_id,
                    expected: dim,
                    got: f.vector.len(),
                });
            }
            if let Some(component) = f.vector.iter().position(|x| !x.is_finite()) {
                return Err(CorpusError::NonFinite { frame_id: f.frame_id, video_id: f.video_id, component });
            }
        }
        let mut ids: Vec<FrameId> = frames.iter().map(|f| f.frame_id).collect();
        ids.sort_unstable();
        if let Some(pair) = ids.windows(2).find(|p| p[0] == p[1]) {
            return Err(CorpusError::DuplicateFrame(pair[0]));
        }

        frames.sort_by_key(|f| (f.video_id, f.ordinal));
        let mut counts: BTreeMap<VideoId, u32> = BTreeMap::new();
        for f in &frames {
            let expected = counts.entry(f.video_id).or_insert(0);
            if f.ordinal != *expected {
                return Err(CorpusError::OrdinalGap {
                    video_id: f.video_id,
                    frame_id: f.frame_id,
                    expected: *expected,
                    found: f.ordinal,
                });
            }
            *expected += 1;
        }
        for v in &videos {
            let actual = counts.get(&v.video_id).copied().unwrap_or(0);
            if actual == 0 {
                return Err(CorpusError::EmptyVideo(v.video_id));
            }
            if actual != v.frame_count {
                return Err(CorpusError::FrameCount { video_id: v.video_id, declared: v.frame_count, actual });
            }
        }
        Ok(Self { dim, sample_rate_fps, videos, frames })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample_rate_fps(&self) -> f64 {
        self.sample_rate_fps
    }

    pub fn videos(&self) -> &[VideoRecord] {
        &self.videos
    }

    pub fn frames(&self) -> &[FrameEmbedding] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn video(&self, video_id: VideoId) -> Option<&VideoRecord> {
        self.videos.binary_search_by_key(&video_id, |v| v.video_id).ok().map(|i| &self.videos[i])
    }

    /// Frames of each video in ordinal order, videos in id order.
    pub fn frames_by_video(&self) -> impl Iterator<Item = (&VideoRecord, &[FrameEmbedding])> + '_ {
        let mut start = 0;
        self.videos.iter().map(move |v| {
            let end = start + v.frame_count as usize;
            let slice = &self.frames[start..end];
            start = end;
            (v, slice)
        })
    }

    /// Distinct category labels in first-appearance order over sorted videos.
    pub fn categories(&self) -> Vec<String> {
        let mut seen = Vec::<String>::new();
        for v in &self.videos {
            if !seen.contains(&v.category) {
                seen.push(v.category.clone());
            }
        }
        seen
    }
}

/// Timestamp of a sampled frame at `ordinal` for the given sampling rate.
pub fn timestamp_for(ordinal: u32, sample_rate_fps: f64) -> f64 {
    ordinal as f64 / sample_rate_fps
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: u64,
    pub category: String,
    pub vector: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuerySet {
    dim: usize,
    pub per_category_count: usize,
    queries: Vec<Query>,
}

impl QuerySet {
    pub fn new(dim: usize, per_category_count: usize, mut queries: Vec<Query>) -> Result<Self, CorpusError> {
        if dim == 0 {
            return Err(CorpusError::ZeroDimension);
        }
        for q in &queries {
            if q.vector.len() != dim {
                return Err(CorpusError::QueryDimension { query_id: q.query_id, expected: dim, got: q.vector.len() });
            }
            if let Some(component) = q.vector.iter().position(|x| !x.is_finite()) {
                return Err(CorpusError::QueryNonFinite { query_id: q.query_id, component });
            }
        }
        queries.sort_by_key(|q| q.query_id);
        Ok(Self { dim, per_category_count, queries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}
