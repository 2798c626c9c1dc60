//! Query-by-image video retrieval over a transition-weighted cluster graph.
//!
//! Frame embeddings from every video are clustered corpus-wide. Consecutive
//! frames that land in different clusters add weight to an undirected edge
//! between those clusters, and each cluster mean is blended with the
//! edge-weighted mean of its neighbours. Queries rank clusters by cosine
//! against those blended vectors, then rank the frames of the best `c`
//! clusters and report the videos behind the top frames.
//!
//! The pipeline is embedding-agnostic: vectors arrive as data (see
//! [`corpus`]), and [`corpus::toy_embed`] plus [`corpus::synth_corpus`] make
//! everything testable without a neural network.

pub mod cluster;
pub mod corpus;
pub mod error;
pub mod evalbench;
pub mod retrieve;
pub mod similarity;
pub mod store;
pub mod tgraph;

pub use cluster::{assign, fit_clusters, ClusterModel, ClusterParams};
pub use corpus::{
    load_corpus, load_queries, synth_corpus, toy_embed, write_corpus, write_queries, Corpus, FrameEmbedding, Query,
    QuerySet, SynthConfig, VideoRecord,
};
pub use error::{Error, Result};
pub use retrieve::{
    build_index, build_video_vectors, search, search_exhaustive, search_videos, IndexParams, RankedVideo,
    RetrievalIndex, SearchResult, VideoTemporalVectors,
};
pub use similarity::cosine;
pub use store::{load_index, save_index, StoreError};
pub use tgraph::{augment, build_graph, AugmentedEmbeddings, TemporalGraph};

/// Dimension of the frame embeddings produced by the reference ResNet backbones.
pub const DEFAULT_DIM: usize = 2048;
