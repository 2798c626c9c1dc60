//! Corpus-wide k-means over frame embeddings.
//!
//! Lloyd iterations from k-means++ seeding under Euclidean distance. Frames
//! are put in `frame_id` order before seeding, so the result depends only on
//! the frame set and the seed. Clusters never end up empty: a cluster that
//! loses all members takes the farthest frame of the largest cluster.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{Corpus, FrameEmbedding, FrameId};
use crate::similarity::squared_euclidean;

pub type ClusterId = u32;

/// Cluster count used for corpus-wide clustering unless configured otherwise.
pub const DEFAULT_K: usize = 175;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("cannot cluster an empty corpus")]
    Empty,
    #[error("k = {k} exceeds the number of frames ({frames})")]
    TooManyClusters { k: usize, frames: usize },
    #[error("k must be at least 1")]
    ZeroClusters,
    #[error("max_iter must be at least 1")]
    ZeroIterations,
    #[error("tolerance must be finite and non-negative, got {0}")]
    Tolerance(f64),
    #[error("vector has dimension {got}, model dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self { k: DEFAULT_K, seed: 0, max_iter: 100, tol: 1e-4 }
    }
}

impl ClusterParams {
    pub fn with_k(k: usize, seed: u64) -> Self {
        Self { k, seed, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    k: usize,
    dim: usize,
    centroids: Vec<f32>,
    frame_ids: Vec<FrameId>,
    assignment: Vec<ClusterId>,
    members: Vec<Vec<FrameId>>,
    means: Vec<f32>,
    iterations_run: usize,
    inertia: f64,
    inertia_history: Vec<f64>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroid(&self, c: ClusterId) -> &[f32] {
        &self.centroids[c as usize * self.dim..(c as usize + 1) * self.dim]
    }

    pub fn centroids(&self) -> &[f32] {
        &self.centroids
    }

    /// Arithmetic mean of the cluster's member frames.
    pub fn mean(&self, c: ClusterId) -> &[f32] {
        &self.means[c as usize * self.dim..(c as usize + 1) * self.dim]
    }

    pub fn means(&self) -> &[f32] {
        &self.means
    }

    /// Member frame ids in ascending order.
    pub fn members(&self, c: ClusterId) -> &[FrameId] {
        &self.members[c as usize]
    }

    pub fn cluster_of(&self, frame_id: FrameId) -> Option<ClusterId> {
        self.frame_ids.binary_search(&frame_id).ok().map(|i| self.assignment[i])
    }

    /// `(frame_id, cluster_id)` pairs in frame-id order.
    pub fn assignments(&self) -> impl Iterator<Item = (FrameId, ClusterId)> + '_ {
        self.frame_ids.iter().copied().zip(self.assignment.iter().copied())
    }

    pub fn iterations_run(&self) -> usize {
        self.iterations_run
    }

    /// Sum of squared distances from frames to their assigned centroids.
    pub fn inertia(&self) -> f64 {
        self.inertia
    }

    /// Inertia measured after each Lloyd assignment step.
    pub fn inertia_history(&self) -> &[f64] {
        &self.inertia_history
    }
}

pub fn fit_clusters(corpus: &Corpus, params: &ClusterParams) -> Result<ClusterModel, ClusterError> {
    fit_frames(corpus.frames(), corpus.dim(), params)
}

/// Nearest centroid by Euclidean distance, lowest id on ties.
pub fn assign(model: &ClusterModel, vector: &[f32]) -> Result<ClusterId, ClusterError> {
    if vector.len() != model.dim {
        return Err(ClusterError::DimensionMismatch { expected: model.dim, got: vector.len() });
    }
    Ok(nearest(&model.centroids_f64(), model.dim, vector, None).0)
}

impl ClusterModel {
    fn centroids_f64(&self) -> Vec<f64> {
        self.centroids.iter().map(|&x| x as f64).collect()
    }
}

fn sq_dist_f64(centroid: &[f64], v: &[f32]) -> f64 {
    centroid
        .iter()
        .zip(v)
        .map(|(&c, &x)| {
            let d = x as f64 - c;
            d * d
        })
        .sum()
}

/// Argmin over centroids. If `current` is among the minimizers it is kept,
/// otherwise the lowest id wins.
fn nearest(centroids: &[f64], dim: usize, v: &[f32], current: Option<ClusterId>) -> (ClusterId, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist_f64(centroid, v);
        if d < best.1 {
            best = (c as ClusterId, d);
        }
    }
    if let Some(cur) = current {
        let start = cur as usize * dim;
        if sq_dist_f64(&centroids[start..start + dim], v) == best.1 {
            return (cur, best.1);
        }
    }
    best
}

fn assign_all(centroids: &[f64], dim: usize, data: &[&[f32]], current: Option<&[ClusterId]>) -> Vec<(ClusterId, f64)> {
    data.par_iter().enumerate().map(|(i, v)| nearest(centroids, dim, v, current.map(|c| c[i]))).collect()
}

fn kmeans_plus_plus(data: &[&[f32]], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = data.len();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = data.par_iter().map(|v| squared_euclidean(v, data[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target >= acc; fall back to the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive total"))
        } else {
            // every frame coincides with a chosen seed; draw an unused index
            let unused: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            unused[rng.random_range(0..unused.len())]
        };
        chosen.push(pick);
        let seed = data[pick];
        d2.par_iter_mut().zip(data.par_iter()).for_each(|(d, v)| {
            *d = d.min(squared_euclidean(v, seed));
        });
    }
    chosen
}

/// Moves the farthest member of the largest cluster into each empty cluster
/// and re-centres the empty cluster on it.
fn repair_empty(k: usize, dim: usize, data: &[&[f32]], labels: &mut [(ClusterId, f64)], centroids: &mut [f64]) -> bool {
    let mut counts = vec![0usize; k];
    for &(c, _) in labels.iter() {
        counts[c as usize] += 1;
    }
    let mut repaired = false;
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let largest = (0..k).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a))).expect("k > 0");
        let donor = labels
            .iter()
            .enumerate()
            .filter(|(_, (c, _))| *c as usize == largest)
            .max_by(|(i, (_, a)), (j, (_, b))| a.total_cmp(b).then(j.cmp(i)))
            .map(|(i, _)| i)
            .expect("largest cluster has members");
        labels[donor] = (empty as ClusterId, 0.0);
        counts[largest] -= 1;
        counts[empty] += 1;
        for (slot, &x) in centroids[empty * dim..(empty + 1) * dim].iter_mut().zip(data[donor]) {
            *slot = x as f64;
        }
        repaired = true;
    }
    repaired
}

fn cluster_means(k: usize, dim: usize, data: &[&[f32]], labels: &[(ClusterId, f64)]) -> Vec<f64> {
    let mut sums = vec![0.0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (v, &(c, _)) in data.iter().zip(labels) {
        counts[c as usize] += 1;
        for (s, &x) in sums[c as usize * dim..(c as usize + 1) * dim].iter_mut().zip(v.iter()) {
            *s += x as f64;
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            sums[c * dim..(c + 1) * dim].iter_mut().for_each(|s| *s /= n as f64);
        }
    }
    sums
}

/// Fits on an arbitrary slice of frames; order of `frames` does not matter.
pub fn fit_frames(frames: &[FrameEmbedding], dim: usize, params: &ClusterParams) -> Result<ClusterModel, ClusterError> {
    let n = frames.len();
    let k = params.k;
    if n == 0 {
        return Err(ClusterError::Empty);
    }
    if k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    if k > n {
        return Err(ClusterError::TooManyClusters { k, frames: n });
    }
    if params.max_iter == 0 {
        return Err(ClusterError::ZeroIterations);
    }
    if !(params.tol.is_finite() && params.tol >= 0.0) {
        return Err(ClusterError::Tolerance(params.tol));
    }
    if let Some(f) = frames.iter().find(|f| f.vector.len() != dim) {
        return Err(ClusterError::DimensionMismatch { expected: dim, got: f.vector.len() });
    }

    let mut order: Vec<&FrameEmbedding> = frames.iter().collect();
    order.sort_by_key(|f| f.frame_id);
    let data: Vec<&[f32]> = order.iter().map(|f| f.vector.as_slice()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let seeds = kmeans_plus_plus(&data, k, &mut rng);
    let mut centroids: Vec<f64> = seeds.iter().flat_map(|&i| data[i].iter().map(|&x| x as f64)).collect();

    let mut labels: Vec<(ClusterId, f64)> = Vec::new();
    let mut history = Vec::new();
    let mut iterations_run = 0;
    for _ in 0..params.max_iter {
        let current: Option<Vec<ClusterId>> = (!labels.is_empty()).then(|| labels.iter().map(|l| l.0).collect());
        labels = assign_all(&centroids, dim, &data, current.as_deref());
        history.push(labels.iter().map(|l| l.1).sum::<f64>());
        repair_empty(k, dim, &data, &mut labels, &mut centroids);

        let updated = cluster_means(k, dim, &data, &labels);
        let shift = updated
            .chunks_exact(dim)
            .zip(centroids.chunks_exact(dim))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max);
        centroids = updated;
        iterations_run += 1;
        if shift <= params.tol {
            break;
        }
    }

    // Final assignment against the stored (f32) centroids; repair may re-centre
    // a cluster on a frame, which can pull other frames in, so repeat until stable.
    let mut stored: Vec<f64> = centroids.iter().map(|&x| x as f32 as f64).collect();
    let mut current: Vec<ClusterId> = labels.iter().map(|l| l.0).collect();
    for _ in 0..=k {
        labels = assign_all(&stored, dim, &data, Some(&current));
        let repaired = repair_empty(k, dim, &data, &mut labels, &mut stored);
        current = labels.iter().map(|l| l.0).collect();
        if !repaired {
            break;
        }
    }
    let inertia = labels.iter().map(|l| l.1).sum();
    let means = cluster_means(k, dim, &data, &labels);

    let frame_ids: Vec<FrameId> = order.iter().map(|f| f.frame_id).collect();
    let mut members = vec![Vec::new(); k];
    for (&id, &c) in frame_ids.iter().zip(&current) {
        members[c as usize].push(id);
    }
    Ok(ClusterModel {
        k,
        dim,
        centroids: stored.iter().map(|&x| x as f32).collect(),
        frame_ids,
        assignment: current,
        members,
        means: means.iter().map(|&x| x as f32).collect(),
        iterations_run,
        inertia,
        inertia_history: history,
    })
}
