//! Read-only HTTP search service over a persisted retrieval index.
//!
//! Every response is JSON. The index is loaded once and shared immutably,
//! so identical requests produce identical bodies apart from `latency_ms`.
//! Image queries are embedded with [`vidgraph_core::toy_embed`] only; real
//! deployments should send precomputed embeddings instead.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path as UrlPath, State};
use axum::http::{header, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{Any, CorsLayer};
use vidgraph_core::corpus::{EmbedError, FrameId, VideoId};
use vidgraph_core::retrieve::{SearchError, DEFAULT_PROBE_C};
use vidgraph_core::{search, toy_embed, RetrievalIndex, StoreError};

pub const DEFAULT_K: usize = 10;
/// Largest accepted decoded image, in bytes.
pub const DEFAULT_MAX_IMAGE_BYTES: usize = 8 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("failed to load index {path}: {source}")]
    Load {
        path: PathBuf,
        #[source]
        source: StoreError,
    },
    #[error("invalid bind address {0:?}")]
    Address(String),
    #[error("failed to bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Serve(#[from] std::io::Error),
}

#[derive(Clone)]
pub struct AppState {
    index: Arc<RetrievalIndex>,
    max_image_bytes: usize,
}

impl AppState {
    pub fn new(index: RetrievalIndex) -> Self {
        Self { index: Arc::new(index), max_image_bytes: DEFAULT_MAX_IMAGE_BYTES }
    }

    pub fn with_max_image_bytes(mut self, limit: usize) -> Self {
        self.max_image_bytes = limit;
        self
    }

    pub fn index(&self) -> &RetrievalIndex {
        &self.index
    }
}

/// Request body for `POST /search`; exactly one query source must be set.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f32>>,
    /// Base64-encoded binary PPM.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_id: Option<FrameId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedVideoView {
    pub video_id: VideoId,
    pub category: String,
    pub score: f64,
    pub best_frame_id: Option<FrameId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub ranked_videos: Vec<RankedVideoView>,
    pub clusters_probed: Vec<u32>,
    pub frames_scored: usize,
    pub latency_ms: f64,
}

/// A JSON error body with its status.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        Self { status, body: json!({ "error": error, "message": message.into() }) }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<SearchError> for ApiError {
    fn from(err: SearchError) -> Self {
        match err {
            SearchError::DimensionMismatch { expected, got } => ApiError {
                status: StatusCode::BAD_REQUEST,
                body: json!({ "error": "dimension_mismatch", "expected": expected, "got": got }),
            },
            SearchError::ZeroNormQuery | SearchError::NonFiniteQuery(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "invalid_query", err.to_string())
            }
            SearchError::ZeroProbe | SearchError::ZeroK => ApiError::bad_request(err.to_string()),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
        }
    }
}

pub fn router(state: AppState) -> Router {
    // Base64 inflates by 4/3; leave headroom for the JSON envelope.
    let body_limit = state.max_image_bytes / 3 * 4 + 1024 * 1024;
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/health", get(health))
        .route("/stats", get(stats))
        .route("/videos", get(videos))
        .route("/videos/{id}", get(video))
        .route("/clusters/{id}", get(cluster))
        .route("/search", post(search_handler))
        .fallback(|| async { ApiError::not_found("no such route") })
        .layer(DefaultBodyLimit::max(body_limit))
        .layer(cors)
        .with_state(state)
}

async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "frames": state.index.frame_count(),
        "clusters": state.index.k_clusters(),
    }))
}

async fn stats(State(state): State<AppState>) -> Json<serde_json::Value> {
    let index = &state.index;
    let sizes: Vec<usize> = index.buckets().iter().map(|b| b.len()).collect();
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for &s in &sizes {
        *histogram.entry(s).or_default() += 1;
    }
    let params = index.params();
    Json(json!({
        "params": {
            "dim": index.dim(),
            "k_clusters": params.k_clusters,
            "alpha": params.alpha,
            "seed": params.seed,
        },
        "frames": index.frame_count(),
        "videos": index.videos().len(),
        "edges": index.graph().edge_count(),
        "bucket_sizes": sizes,
        "bucket_size_histogram": histogram
            .into_iter()
            .map(|(size, clusters)| json!({ "size": size, "clusters": clusters }))
            .collect::<Vec<_>>(),
    }))
}

async fn videos(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "count": state.index.videos().len(), "videos": state.index.videos() }))
}

fn parse_id<T: std::str::FromStr>(raw: &str, what: &str) -> Result<T, ApiError> {
    raw.parse().map_err(|_| ApiError::not_found(format!("unknown {what} {raw:?}")))
}

async fn video(
    State(state): State<AppState>,
    UrlPath(raw): UrlPath<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let id: VideoId = parse_id(&raw, "video")?;
    let record = state.index.video(id).ok_or_else(|| ApiError::not_found(format!("unknown video {id}")))?;
    let frame_ids: Vec<FrameId> =
        state.index.frame_to_video().iter().filter(|&&(_, v)| v == id).map(|&(f, _)| f).collect();
    let mut body = serde_json::to_value(record).expect("video record serializes");
    body["frame_ids"] = json!(frame_ids);
    Ok(Json(body))
}

async fn cluster(
    State(state): State<AppState>,
    UrlPath(raw): UrlPath<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let id: u32 = parse_id(&raw, "cluster")?;
    let bucket = state.index.bucket(id).ok_or_else(|| ApiError::not_found(format!("unknown cluster {id}")))?;
    let neighbors: Vec<_> =
        state.index.graph().neighbors(id).into_iter().map(|(c, w)| json!({ "cluster_id": c, "weight": w })).collect();
    Ok(Json(json!({
        "cluster_id": id,
        "size": bucket.len(),
        "members": bucket.frame_ids(),
        "neighbors": neighbors,
    })))
}

fn embed_image(state: &AppState, encoded: &str) -> Result<Vec<f32>, ApiError> {
    // Reject on the encoded length first so oversized payloads are never decoded.
    if encoded.len() / 4 * 3 > state.max_image_bytes + 2 {
        return Err(too_large(state.max_image_bytes));
    }
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(encoded.trim())
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_image", format!("invalid base64: {e}")))?;
    if bytes.len() > state.max_image_bytes {
        return Err(too_large(state.max_image_bytes));
    }
    toy_embed(&bytes, state.index.dim())
        .map_err(|e: EmbedError| ApiError::new(StatusCode::BAD_REQUEST, "bad_image", e.to_string()))
}

fn too_large(limit: usize) -> ApiError {
    ApiError {
        status: StatusCode::PAYLOAD_TOO_LARGE,
        body: json!({ "error": "payload_too_large", "limit_bytes": limit }),
    }
}

/// Resolves a request into a query vector plus `(c, k)`.
fn resolve_query(state: &AppState, req: SearchRequest) -> Result<(Vec<f32>, usize, usize), ApiError> {
    let sources = req.embedding.is_some() as u8 + req.image.is_some() as u8 + req.frame_id.is_some() as u8;
    if sources != 1 {
        return Err(ApiError::bad_request("exactly one of embedding, image or frame_id is required"));
    }
    let c = req.c.unwrap_or(DEFAULT_PROBE_C);
    let k = req.k.unwrap_or(DEFAULT_K);
    if c == 0 || k == 0 {
        return Err(ApiError::bad_request("c and k must be at least 1"));
    }
    let query = if let Some(e) = req.embedding {
        e
    } else if let Some(img) = req.image {
        embed_image(state, &img)?
    } else {
        let id = req.frame_id.expect("one source is set");
        let (_, v) = state.index.frame(id).ok_or_else(|| ApiError::not_found(format!("unknown frame {id}")))?;
        v.to_vec()
    };
    Ok((query, c, k))
}

async fn search_handler(
    State(state): State<AppState>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<SearchResponse>, ApiError> {
    let body = body.map_err(|rej| {
        if rej.status() == StatusCode::PAYLOAD_TOO_LARGE {
            too_large(state.max_image_bytes)
        } else {
            ApiError::bad_request(rej.body_text())
        }
    })?;
    let req: SearchRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))?;
    let start = Instant::now();
    let (query, c, k) = resolve_query(&state, req)?;
    let index = Arc::clone(&state.index);
    let result = tokio::task::spawn_blocking(move || search(&index, &query, c, k))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    let ranked_videos = result
        .ranked_videos
        .into_iter()
        .map(|v| RankedVideoView {
            video_id: v.video_id,
            category: state.index.video(v.video_id).map(|r| r.category.clone()).unwrap_or_default(),
            score: v.score,
            best_frame_id: v.best_frame_id,
        })
        .collect();
    Ok(Json(SearchResponse {
        ranked_videos,
        clusters_probed: result.clusters_probed,
        frames_scored: result.frames_scored,
        latency_ms: start.elapsed().as_secs_f64() * 1e3,
    }))
}

/// Parses `bind` and swaps in the port from `port_override` (the `PORT`
/// environment variable) when present.
pub fn resolve_bind(bind: &str, port_override: Option<&str>) -> Result<SocketAddr, ServiceError> {
    let mut addr: SocketAddr = bind.parse().map_err(|_| ServiceError::Address(bind.to_string()))?;
    if let Some(port) = port_override.map(str::trim).filter(|p| !p.is_empty()) {
        addr.set_port(port.parse().map_err(|_| ServiceError::Address(format!("PORT={port}")))?);
    }
    Ok(addr)
}

pub fn load_state(index_path: &Path) -> Result<AppState, ServiceError> {
    let index = vidgraph_core::load_index(index_path)
        .map_err(|source| ServiceError::Load { path: index_path.to_path_buf(), source })?;
    Ok(AppState::new(index))
}

/// Loads the index and serves until Ctrl-C or SIGTERM, draining in-flight requests.
pub async fn serve(index_path: &Path, bind: SocketAddr) -> Result<(), ServiceError> {
    let state = load_state(index_path)?;
    serve_state(state, bind).await
}

pub async fn serve_state(state: AppState, bind: SocketAddr) -> Result<(), ServiceError> {
    let listener =
        tokio::net::TcpListener::bind(bind).await.map_err(|source| ServiceError::Bind { addr: bind, source })?;
    tracing::info!(addr = %listener.local_addr()?, frames = state.index.frame_count(), "serving");
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown_signal()).await?;
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutting down");
}
