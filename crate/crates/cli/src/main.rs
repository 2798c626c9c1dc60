//! `vidgraph`: build, evaluate, sweep, benchmark and serve retrieval indexes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use vidgraph_core::cluster::{ClusterParams, DEFAULT_K};
use vidgraph_core::evalbench::{
    bench_speed_with, run_eval, sweep_clusters, sweep_csv, EvalConfig, Variant, REFERENCE_RATES,
};
use vidgraph_core::retrieve::{build_index_with, DEFAULT_PER_VIDEO_K, DEFAULT_PROBE_C};
use vidgraph_core::store::save_video_vectors;
use vidgraph_core::tgraph::DEFAULT_ALPHA;
use vidgraph_core::{
    build_video_vectors, load_corpus, load_index, load_queries, save_index, synth_corpus, write_corpus, write_queries,
    SynthConfig,
};

#[derive(Parser)]
#[command(name = "vidgraph", version, about = "Query-by-image video retrieval over a cluster transition graph")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a corpus, build the transition graph and write an index file.
    Build(BuildArgs),
    /// Per-category mAP@k for each variant.
    Eval(EvalArgs),
    /// mAP@10 across a grid of cluster counts.
    Sweep(SweepArgs),
    /// Search throughput on an index.
    Bench(BenchArgs),
    /// Serve an index over HTTP.
    Serve(ServeArgs),
    /// Write a synthetic corpus and query set.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value_t = DEFAULT_K)]
    k_clusters: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ClusterParams::default().max_iter)]
    max_iter: usize,
}

impl ModelArgs {
    fn cluster_params(&self) -> ClusterParams {
        ClusterParams { k: self.k_clusters, seed: self.seed, max_iter: self.max_iter, ..ClusterParams::default() }
    }
}

#[derive(Args)]
struct BuildArgs {
    /// Corpus manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// `graph`, `no_graph` (alpha forced to 1) or `per_video`.
    #[arg(long, default_value = "graph")]
    variant: Variant,
    #[arg(long, default_value_t = DEFAULT_PER_VIDEO_K)]
    per_video_k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Query manifest (JSON).
    #[arg(long)]
    queries: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = DEFAULT_PROBE_C)]
    probe_c: usize,
    #[arg(long, value_delimiter = ',', default_value = "graph,no_graph")]
    variant: Vec<Variant>,
    #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
    k_values: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_PER_VIDEO_K)]
    per_video_k: usize,
    /// Directory for `map.csv` and `table.txt`; the table is always printed.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = DEFAULT_PROBE_C)]
    probe_c: usize,
    #[arg(long, value_delimiter = ',', default_value = "25,50,100,175,250")]
    grid: Vec<usize>,
    /// CSV destination; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Existing index file; otherwise one is built from `--manifest`.
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    index: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    queries: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = DEFAULT_PROBE_C)]
    probe_c: usize,
    #[arg(long, default_value_t = 10)]
    repetitions: usize,
    /// JSON report destination; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    index: PathBuf,
    /// Listen address; the `PORT` environment variable replaces its port.
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: String,
    #[arg(long, default_value_t = vidgraph_service::DEFAULT_MAX_IMAGE_BYTES)]
    max_image_bytes: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 11)]
    categories: usize,
    #[arg(long, default_value_t = 10)]
    videos_per_category: usize,
    #[arg(long, default_value_t = 30)]
    frames_per_video: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Per-component noise standard deviation.
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; receives `corpus.json` and `queries.json` plus blobs.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Build(a) => build(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Bench(a) => bench(a),
        Command::Serve(a) => serve(a),
        Command::Synth(a) => synth(a),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn build(a: BuildArgs) -> Result<()> {
    let corpus = load_corpus(&a.manifest).with_context(|| format!("loading {}", a.manifest.display()))?;
    let bytes = match a.variant {
        Variant::PerVideo => {
            let vv = build_video_vectors(&corpus, a.per_video_k, a.model.alpha, a.model.seed)?;
            save_video_vectors(&vv, &a.out)?
        }
        v => {
            let alpha = if v == Variant::NoGraph { 1.0 } else { a.model.alpha };
            let index = build_index_with(&corpus, &a.model.cluster_params(), alpha)?;
            save_index(&index, &a.out)?
        }
    };
    tracing::info!(frames = corpus.len(), bytes, out = %a.out.display(), "index written");
    Ok(())
}

fn eval_config(model: &ModelArgs, c: usize) -> EvalConfig {
    EvalConfig {
        c,
        seed: model.seed,
        k_clusters: model.k_clusters,
        alpha: model.alpha,
        max_iter: model.max_iter,
        ..EvalConfig::default()
    }
}

fn eval(a: EvalArgs) -> Result<()> {
    let corpus = load_corpus(&a.manifest)?;
    let queries = load_queries(&a.queries)?;
    let config = EvalConfig {
        variants: a.variant.clone(),
        k_values: a.k_values.clone(),
        per_video_k: a.per_video_k,
        ..eval_config(&a.model, a.probe_c)
    };
    let report = run_eval(&corpus, &queries, &config)?;
    let table = report.to_table();
    print!("{table}");
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("map.csv"), report.to_csv())?;
        fs::write(dir.join("table.txt"), &table)?;
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let corpus = load_corpus(&a.manifest)?;
    let queries = load_queries(&a.queries)?;
    let rows = sweep_clusters(&corpus, &queries, &a.grid, &eval_config(&a.model, a.probe_c))?;
    write_output(a.out.as_deref(), &sweep_csv(&rows))
}

fn bench(a: BenchArgs) -> Result<()> {
    let index = match (&a.index, &a.manifest) {
        (Some(p), _) => load_index(p).with_context(|| format!("loading {}", p.display()))?,
        (None, Some(m)) => build_index_with(&load_corpus(m)?, &a.model.cluster_params(), a.model.alpha)?,
        (None, None) => bail!("either --index or --manifest is required"),
    };
    let queries = load_queries(&a.queries)?;
    let report = bench_speed_with(&index, &queries, a.probe_c, a.repetitions)?;
    let reference: serde_json::Map<String, serde_json::Value> =
        REFERENCE_RATES.iter().map(|&(name, fps)| (name.to_string(), fps.into())).collect();
    let body = serde_json::json!({ "report": report, "reference_fps": reference });
    write_output(a.out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&body)?))
}

fn serve(a: ServeArgs) -> Result<()> {
    let port = std::env::var("PORT").ok();
    let addr = vidgraph_service::resolve_bind(&a.bind, port.as_deref())?;
    let state = vidgraph_service::load_state(&a.index)?.with_max_image_bytes(a.max_image_bytes);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(vidgraph_service::serve_state(state, addr))?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let config = SynthConfig::new(a.categories, a.videos_per_category, a.frames_per_video, a.dim, a.noise, a.seed);
    let (corpus, queries) = synth_corpus(&config)?;
    fs::create_dir_all(&a.out)?;
    write_corpus(&corpus, a.out.join("corpus.json"))?;
    write_queries(&queries, a.out.join("queries.json"))?;
    tracing::info!(frames = corpus.len(), queries = queries.len(), out = %a.out.display(), "synthetic corpus written");
    Ok(())
}
