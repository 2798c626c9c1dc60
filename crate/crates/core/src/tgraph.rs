//! Cluster transition graph and first-order neighbour aggregation.
//!
//! Within each video, every consecutive frame pair whose clusters differ adds
//! one to the weight of the undirected edge between those clusters. Pairs in
//! the same cluster and pairs spanning two videos add nothing.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::cluster::{ClusterId, ClusterModel};
use crate::corpus::{Corpus, FrameId};

/// Default self-weight for [`augment`].
pub const DEFAULT_ALPHA: f32 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("frame {0} has no cluster assignment")]
    UnassignedFrame(FrameId),
    #[error("graph has {graph} nodes but the cluster model has {model} clusters")]
    NodeCountMismatch { graph: usize, model: usize },
    #[error("alpha must lie in [0, 1], got {0}")]
    Alpha(f32),
    #[error("invalid edge ({a}, {b}, {weight}) for a graph of {nodes} nodes")]
    InvalidEdge { a: ClusterId, b: ClusterId, weight: u64, nodes: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TemporalGraph {
    n_nodes: usize,
    /// Keyed by `(low, high)` with `low < high`.
    edges: BTreeMap<(ClusterId, ClusterId), u64>,
}

impl TemporalGraph {
    pub fn empty(n_nodes: usize) -> Self {
        Self { n_nodes, edges: BTreeMap::new() }
    }

    /// Counts transitions over per-video cluster sequences.
    pub fn from_sequences<'a>(n_nodes: usize, sequences: impl IntoIterator<Item = &'a [ClusterId]>) -> Self {
        let mut graph = Self::empty(n_nodes);
        for seq in sequences {
            for pair in seq.windows(2) {
                graph.add_transition(pair[0], pair[1]);
            }
        }
        graph
    }

    /// Rebuilds a graph from `(a, b, w)` triples, as read back from disk.
    pub fn from_edges(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (ClusterId, ClusterId, u64)>,
    ) -> Result<Self, GraphError> {
        let mut graph = Self::empty(n_nodes);
        for (a, b, weight) in edges {
            if a >= b || b as usize >= n_nodes || weight == 0 || graph.edges.contains_key(&(a, b)) {
                return Err(GraphError::InvalidEdge { a, b, weight, nodes: n_nodes });
            }
            graph.edges.insert((a, b), weight);
        }
        Ok(graph)
    }

    fn add_transition(&mut self, from: ClusterId, to: ClusterId) {
        if from != to {
            *self.edges.entry((from.min(to), from.max(to))).or_insert(0) += 1;
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `(a, b, weight)` with `a < b`, sorted by `(a, b)`.
    pub fn edges(&self) -> impl Iterator<Item = (ClusterId, ClusterId, u64)> + '_ {
        self.edges.iter().map(|(&(a, b), &w)| (a, b, w))
    }

    pub fn weight(&self, a: ClusterId, b: ClusterId) -> u64 {
        self.edges.get(&(a.min(b), a.max(b))).copied().unwrap_or(0)
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.values().sum()
    }

    /// Neighbours of `c` with edge weights, by ascending neighbour id.
    pub fn neighbors(&self, c: ClusterId) -> Vec<(ClusterId, u64)> {
        let mut out: Vec<(ClusterId, u64)> = self
            .edges
            .iter()
            .filter_map(|(&(a, b), &w)| match () {
                _ if a == c => Some((b, w)),
                _ if b == c => Some((a, w)),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out
    }

    fn adjacency(&self) -> Vec<Vec<(ClusterId, u64)>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for (&(a, b), &w) in &self.edges {
            adj[a as usize].push((b, w));
            adj[b as usize].push((a, w));
        }
        adj
    }

    /// Edge list as `"a b w"` lines sorted by `(a, b)`.
    pub fn edge_list_text(&self) -> String {
        let mut out = String::new();
        for (a, b, w) in self.edges() {
            writeln!(out, "{a} {b} {w}").expect("write to String");
        }
        out
    }
}

pub fn build_graph(corpus: &Corpus, model: &ClusterModel) -> Result<TemporalGraph, GraphError> {
    let mut sequences = Vec::with_capacity(corpus.videos().len());
    for (_, frames) in corpus.frames_by_video() {
        let seq = frames
            .iter()
            .map(|f| model.cluster_of(f.frame_id).ok_or(GraphError::UnassignedFrame(f.frame_id)))
            .collect::<Result<Vec<_>, _>>()?;
        sequences.push(seq);
    }
    Ok(TemporalGraph::from_sequences(model.k(), sequences.iter().map(Vec::as_slice)))
}

/// Cluster vectors after neighbour aggregation, row-major `k x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedEmbeddings {
    alpha: f32,
    dim: usize,
    vectors: Vec<f32>,
}

impl AugmentedEmbeddings {
    pub(crate) fn from_raw(alpha: f32, dim: usize, vectors: Vec<f32>) -> Self {
        debug_assert!(dim > 0 && vectors.len().is_multiple_of(dim));
        Self { alpha, dim, vectors }
    }

    pub fn alpha(&self) -> f32 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, c: ClusterId) -> &[f32] {
        &self.vectors[c as usize * self.dim..(c as usize + 1) * self.dim]
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.vectors
    }
}

/// `alpha * mean[c] + (1 - alpha) * (sum_b w_cb mean[b]) / (sum_b w_cb)` over
/// the neighbours `b` of `c`; isolated clusters keep their mean.
pub fn augment(model: &ClusterModel, graph: &TemporalGraph, alpha: f32) -> Result<AugmentedEmbeddings, GraphError> {
    if graph.n_nodes() != model.k() {
        return Err(GraphError::NodeCountMismatch { graph: graph.n_nodes(), model: model.k() });
    }
    augment_means(model.means(), model.dim(), graph, alpha)
}

/// [`augment`] over a raw row-major `means` matrix.
pub fn augment_means(
    means: &[f32],
    dim: usize,
    graph: &TemporalGraph,
    alpha: f32,
) -> Result<AugmentedEmbeddings, GraphError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(GraphError::Alpha(alpha));
    }
    if means.len() != graph.n_nodes() * dim {
        return Err(GraphError::NodeCountMismatch { graph: graph.n_nodes(), model: means.len() / dim.max(1) });
    }
    let a = alpha as f64;
    let mut vectors = means.to_vec();
    for (c, neighbors) in graph.adjacency().iter().enumerate() {
        if neighbors.is_empty() || alpha == 1.0 {
            continue;
        }
        let total: f64 = neighbors.iter().map(|&(_, w)| w as f64).sum();
        let mut pooled = vec![0.0f64; dim];
        for &(b, w) in neighbors {
            let row = &means[b as usize * dim..(b as usize + 1) * dim];
            pooled.iter_mut().zip(row).for_each(|(p, &x)| *p += w as f64 * x as f64);
        }
        let own = &means[c * dim..(c + 1) * dim];
        for ((out, &m), p) in vectors[c * dim..(c + 1) * dim].iter_mut().zip(own).zip(&pooled) {
            *out = (a * m as f64 + (1.0 - a) * (p / total)) as f32;
        }
    }
    Ok(AugmentedEmbeddings { alpha, dim, vectors })
}
