//! Evaluation harness: P@k / mAP@k tables per category for the graph,
//! no-graph and per-video variants, a cluster-count sweep, and a search
//! throughput benchmark.
//!
//! mAP@k for a category is the mean of P@k over that category's queries.
//! The no-graph variant uses the same clustering with `alpha = 1`, i.e. raw
//! cluster means in stage 1.

mod bench;
pub mod categories;
mod metrics;

pub use bench::{bench_speed, bench_speed_with, BenchReport, REFERENCE_RATES};
pub use metrics::{map_at_k, precision_at_k};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cluster::{fit_clusters, ClusterParams, DEFAULT_K};
use crate::corpus::{Corpus, QuerySet};
use crate::error::Result;
use crate::retrieve::{
    build_video_vectors, search, search_videos, RetrievalIndex, SearchResult, DEFAULT_PER_VIDEO_K, DEFAULT_PROBE_C,
};
use crate::tgraph::{build_graph, DEFAULT_ALPHA};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("search result has no ranked videos")]
    EmptyResult,
    #[error("result references unknown video {0}")]
    UnknownVideo(u64),
    #[error("cannot average an empty precision list")]
    EmptyPrecisions,
    #[error("invalid evaluation config: {0}")]
    Config(String),
    #[error("query set is empty")]
    NoQueries,
    #[error("queries have dimension {got}, corpus dimension is {expected}")]
    QueryDimension { expected: usize, got: usize },
    #[error("sweep value {k} exceeds the frame count {frames}")]
    GridTooLarge { k: usize, frames: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Graph,
    NoGraph,
    PerVideo,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Graph => "graph",
            Variant::NoGraph => "no_graph",
            Variant::PerVideo => "per_video",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Variant::Graph => "Cluster graph with neighbour aggregation",
            Variant::NoGraph => "Clustering without graph",
            Variant::PerVideo => "Per-video graphs",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, EvalError> {
        match s {
            "graph" => Ok(Variant::Graph),
            "no_graph" | "no-graph" => Ok(Variant::NoGraph),
            "per_video" | "per-video" => Ok(Variant::PerVideo),
            other => Err(EvalError::Config(format!("unknown variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub k_values: Vec<usize>,
    /// Stage-1 probe count.
    pub c: usize,
    pub cluster_grid: Vec<usize>,
    pub variants: Vec<Variant>,
    pub seed: u64,
    pub k_clusters: usize,
    pub alpha: f32,
    pub per_video_k: usize,
    pub max_iter: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k_values: vec![5, 10, 20],
            c: DEFAULT_PROBE_C,
            cluster_grid: vec![25, 50, 100, 175, 250],
            variants: vec![Variant::Graph, Variant::NoGraph],
            seed: 0,
            k_clusters: DEFAULT_K,
            alpha: DEFAULT_ALPHA,
            per_video_k: DEFAULT_PER_VIDEO_K,
            max_iter: ClusterParams::default().max_iter,
        }
    }
}

impl EvalConfig {
    fn validate(&self) -> Result<(), EvalError> {
        if self.k_values.is_empty() {
            return Err(EvalError::Config("k_values is empty".into()));
        }
        if self.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EvalError::Config("k_values must be strictly ascending".into()));
        }
        if self.k_values[0] == 0 {
            return Err(EvalError::ZeroK);
        }
        if self.c == 0 {
            return Err(EvalError::Config("probe count c must be at least 1".into()));
        }
        if self.variants.is_empty() {
            return Err(EvalError::Config("no variants requested".into()));
        }
        Ok(())
    }

    fn cluster_params(&self) -> ClusterParams {
        ClusterParams { k: self.k_clusters, seed: self.seed, max_iter: self.max_iter, ..ClusterParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub variant: Variant,
    pub category: String,
    pub k: usize,
    pub map: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    /// Indexed frames covered per second (every query covers the whole database).
    pub effective_fps: f64,
    /// Frames (or temporal vectors) actually scored per second.
    pub raw_fps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k_clusters: usize,
    pub map_at_10: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub k_values: Vec<usize>,
    /// Categories in first-appearance order over queries sorted by id.
    pub categories: Vec<String>,
    pub entries: Vec<MapEntry>,
    /// mAP over all queries, keyed by `(variant, k)`.
    pub overall: BTreeMap<(Variant, usize), f64>,
    pub throughput: BTreeMap<Variant, Throughput>,
    pub sweep: Vec<SweepRow>,
}

impl EvalReport {
    pub fn map(&self, variant: Variant, category: &str, k: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.variant == variant && e.category == category && e.k == k).map(|e| e.map)
    }

    pub fn overall_map(&self, variant: Variant, k: usize) -> Option<f64> {
        self.overall.get(&(variant, k)).copied()
    }

    pub fn variants(&self) -> Vec<Variant> {
        let mut v: Vec<Variant> = self.throughput.keys().copied().collect();
        v.sort();
        v
    }

    /// `variant,category,k,map` rows.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["variant", "category", "k", "map"]).expect("in-memory csv");
        for e in &self.entries {
            writer
                .write_record([e.variant.as_str(), &e.category, &e.k.to_string(), &format!("{:.6}", e.map)])
                .expect("in-memory csv");
        }
        String::from_utf8(writer.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }

    /// `k_clusters,map_at_10` rows.
    pub fn sweep_csv(&self) -> String {
        sweep_csv(&self.sweep)
    }

    /// One aligned table per variant: categories down, mAP@k across, in percent.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let width =
            self.categories.iter().map(String::len).chain(["Category".len(), "Overall".len()]).max().unwrap_or(8);
        for variant in self.variants() {
            let _ = writeln!(out, "{} ({variant})", variant.title());
            let mut header = format!("{:<width$}", "Category");
            for k in &self.k_values {
                let _ = write!(header, " | {:>8}", format!("mAP@{k}"));
            }
            let _ = writeln!(out, "{header}");
            let _ = writeln!(out, "{}", "-".repeat(header.len()));
            let mut row = |label: &str, value: &dyn Fn(usize) -> Option<f64>| {
                let mut line = format!("{label:<width$}");
                for &k in &self.k_values {
                    match value(k) {
                        Some(m) => write!(line, " | {:>7.2}%", 100.0 * m),
                        None => write!(line, " | {:>8}", "-"),
                    }
                    .expect("write to String");
                }
                let _ = writeln!(out, "{line}");
            };
            for category in &self.categories {
                row(category, &|k| self.map(variant, category, k));
            }
            row("Overall", &|k| self.overall_map(variant, k));
            if let Some(t) = self.throughput.get(&variant) {
                let _ = writeln!(
                    out,
                    "effective search speed: {:.0} frames/s (scored: {:.0} frames/s)",
                    t.effective_fps, t.raw_fps
                );
            }
            out.push('\n');
        }
        out
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["k_clusters", "map_at_10"]).expect("in-memory csv");
    for r in rows {
        writer.write_record([r.k_clusters.to_string(), format!("{:.6}", r.map_at_10)]).expect("in-memory csv");
    }
    String::from_utf8(writer.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

enum Searcher {
    Index(RetrievalIndex),
    Videos(crate::retrieve::VideoTemporalVectors),
}

impl Searcher {
    fn run(&self, query: &[f32], c: usize, k: usize) -> Result<SearchResult> {
        Ok(match self {
            Searcher::Index(index) => search(index, query, c, k)?,
            Searcher::Videos(vectors) => search_videos(vectors, query, k)?,
        })
    }
}

/// Builds each requested variant once and evaluates every query against it.
pub fn run_eval(corpus: &Corpus, queries: &QuerySet, config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    if queries.is_empty() {
        return Err(EvalError::NoQueries.into());
    }
    if queries.dim() != corpus.dim() {
        return Err(EvalError::QueryDimension { expected: corpus.dim(), got: queries.dim() }.into());
    }

    let mut variants = config.variants.clone();
    variants.sort();
    variants.dedup();

    let needs_clusters = variants.iter().any(|v| matches!(v, Variant::Graph | Variant::NoGraph));
    let shared = if needs_clusters {
        let model = fit_clusters(corpus, &config.cluster_params())?;
        let graph = build_graph(corpus, &model)?;
        Some((model, graph))
    } else {
        None
    };

    let k_max = *config.k_values.last().expect("validated non-empty");
    let mut categories: Vec<String> = Vec::new();
    for q in queries.queries() {
        if !categories.contains(&q.category) {
            categories.push(q.category.clone());
        }
    }

    let mut report =
        EvalReport { k_values: config.k_values.clone(), categories: categories.clone(), ..Default::default() };
    for variant in variants {
        let searcher = match (variant, &shared) {
            (Variant::Graph, Some((model, graph))) => {
                Searcher::Index(RetrievalIndex::from_model(corpus, model, graph, config.alpha, config.seed)?)
            }
            (Variant::NoGraph, Some((model, graph))) => {
                Searcher::Index(RetrievalIndex::from_model(corpus, model, graph, 1.0, config.seed)?)
            }
            _ => Searcher::Videos(build_video_vectors(corpus, config.per_video_k, config.alpha, config.seed)?),
        };

        // precisions[category][k index] over queries in id order
        let mut precisions: BTreeMap<&str, Vec<Vec<f64>>> = BTreeMap::new();
        let mut elapsed = Duration::ZERO;
        let mut scored = 0usize;
        let mut in_query_order = vec![Vec::with_capacity(queries.len()); config.k_values.len()];
        for q in queries.queries() {
            let start = Instant::now();
            let result = searcher.run(&q.vector, config.c, k_max)?;
            elapsed += start.elapsed();
            scored += result.frames_scored;
            let slot = precisions.entry(q.category.as_str()).or_insert_with(|| vec![Vec::new(); config.k_values.len()]);
            for (i, &k) in config.k_values.iter().enumerate() {
                let p = precision_at_k(&result, &q.category, corpus.videos(), k)?;
                slot[i].push(p);
                in_query_order[i].push(p);
            }
        }
        for category in &categories {
            for (i, &k) in config.k_values.iter().enumerate() {
                let map = map_at_k(&precisions[category.as_str()][i])?;
                report.entries.push(MapEntry { variant, category: category.clone(), k, map });
            }
        }
        for (i, &k) in config.k_values.iter().enumerate() {
            report.overall.insert((variant, k), map_at_k(&in_query_order[i])?);
        }
        let secs = elapsed.as_secs_f64().max(f64::MIN_POSITIVE);
        report.throughput.insert(
            variant,
            Throughput { effective_fps: (corpus.len() * queries.len()) as f64 / secs, raw_fps: scored as f64 / secs },
        );
    }
    Ok(report)
}

/// One full build and evaluation per cluster count; reports overall mAP@10
/// of the first index-backed variant in `config` (graph by default).
pub fn sweep_clusters(
    corpus: &Corpus,
    queries: &QuerySet,
    grid: &[usize],
    config: &EvalConfig,
) -> Result<Vec<SweepRow>> {
    if let Some(&k) = grid.iter().find(|&&k| k > corpus.len()) {
        return Err(EvalError::GridTooLarge { k, frames: corpus.len() }.into());
    }
    let variant = config
        .variants
        .iter()
        .copied()
        .find(|v| matches!(v, Variant::Graph | Variant::NoGraph))
        .unwrap_or(Variant::Graph);
    let mut k_values = config.k_values.clone();
    if !k_values.contains(&10) {
        k_values.push(10);
        k_values.sort_unstable();
    }
    grid.iter()
        .map(|&k_clusters| {
            let cfg = EvalConfig { k_clusters, variants: vec![variant], k_values: k_values.clone(), ..config.clone() };
            let report = run_eval(corpus, queries, &cfg)?;
            Ok(SweepRow { k_clusters, map_at_10: report.overall_map(variant, 10).expect("k = 10 evaluated") })
        })
        .collect()
}
