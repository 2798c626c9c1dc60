//! Manifest + blob files.
//!
//! A manifest is UTF-8 JSON naming a sibling blob of little-endian `f32`
//! values, one `dim`-length vector per frame in `(video_id, ordinal)` order.
//! Frame ids are assigned sequentially in blob order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{timestamp_for, Corpus, CorpusError, FrameEmbedding, Query, QuerySet, VideoRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub dim: usize,
    #[serde(default = "default_fps")]
    pub sample_rate_fps: f64,
    pub blob_path: String,
    pub videos: Vec<VideoRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryManifest {
    pub dim: usize,
    #[serde(default = "default_per_category")]
    pub per_category_count: usize,
    pub blob_path: String,
    pub queries: Vec<QueryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEntry {
    pub query_id: u64,
    pub category: String,
}

fn default_fps() -> f64 {
    super::DEFAULT_SAMPLE_RATE_FPS
}

fn default_per_category() -> usize {
    super::DEFAULT_QUERIES_PER_CATEGORY
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_path_buf(), source }
}

fn read_manifest<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CorpusError::Manifest { path: path.to_path_buf(), source })
}

fn blob_location(manifest_path: &Path, blob_path: &str) -> PathBuf {
    let blob = Path::new(blob_path);
    if blob.is_absolute() {
        blob.to_path_buf()
    } else {
        manifest_path.parent().unwrap_or_else(|| Path::new(".")).join(blob)
    }
}

/// Reads `count` vectors of `dim` floats. `ids(i)` names the i-th vector's
/// (frame_id, video_id) for error context.
fn read_vectors(
    blob: &[u8],
    dim: usize,
    count: usize,
    ids: impl Fn(usize) -> (u64, u64),
) -> Result<Vec<Vec<f32>>, CorpusError> {
    let stride = 4 * dim as u64;
    let expected = stride * count as u64;
    let actual = blob.len() as u64;
    if actual < expected {
        let index = (actual / stride) as usize;
        let (frame_id, video_id) = ids(index);
        return Err(CorpusError::Truncated { frame_id, video_id, offset: index as u64 * stride, expected, actual });
    }
    if actual != expected {
        return Err(CorpusError::BlobSize { dim, frames: count as u64, expected, actual });
    }
    Ok(blob
        .chunks_exact(4 * dim)
        .map(|chunk| chunk.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect())
        .collect())
}

fn encode_vectors<'a>(vectors: impl Iterator<Item = &'a [f32]>) -> Vec<u8> {
    let mut out = Vec::new();
    for v in vectors {
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CorpusError> {
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(bytes).map_err(io_err(path))?;
    file.sync_all().map_err(io_err(path))
}

pub fn load_corpus(manifest_path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let manifest_path = manifest_path.as_ref();
    let manifest: CorpusManifest = read_manifest(manifest_path)?;
    if manifest.dim == 0 {
        return Err(CorpusError::ZeroDimension);
    }
    let mut videos = manifest.videos;
    videos.sort_by_key(|v| v.video_id);

    // (frame_id, video_id, ordinal) in blob order
    let mut layout = Vec::new();
    for v in &videos {
        for ordinal in 0..v.frame_count {
            layout.push((layout.len() as u64, v.video_id, ordinal));
        }
    }
    let blob_path = blob_location(manifest_path, &manifest.blob_path);
    let blob = fs::read(&blob_path).map_err(io_err(&blob_path))?;
    let vectors = read_vectors(&blob, manifest.dim, layout.len(), |i| {
        layout.get(i).map(|&(f, v, _)| (f, v)).unwrap_or((i as u64, u64::MAX))
    })?;
    let frames = layout
        .into_iter()
        .zip(vectors)
        .map(|((frame_id, video_id, ordinal), vector)| FrameEmbedding {
            frame_id,
            video_id,
            ordinal,
            timestamp_s: timestamp_for(ordinal, manifest.sample_rate_fps),
            vector,
        })
        .collect();
    Corpus::new(manifest.dim, manifest.sample_rate_fps, videos, frames)
}

/// Writes `manifest_path` and a blob next to it (same stem, `.f32` extension).
pub fn write_corpus(corpus: &Corpus, manifest_path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let manifest_path = manifest_path.as_ref();
    let blob_path = manifest_path.with_extension("f32");
    let blob_name = blob_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let manifest = CorpusManifest {
        dim: corpus.dim(),
        sample_rate_fps: corpus.sample_rate_fps(),
        blob_path: blob_name,
        videos: corpus.videos().to_vec(),
    };
    write_file(&blob_path, &encode_vectors(corpus.frames().iter().map(|f| f.vector.as_slice())))?;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(manifest_path, json.as_bytes())
}

pub fn load_queries(manifest_path: impl AsRef<Path>) -> Result<QuerySet, CorpusError> {
    let manifest_path = manifest_path.as_ref();
    let manifest: QueryManifest = read_manifest(manifest_path)?;
    if manifest.dim == 0 {
        return Err(CorpusError::ZeroDimension);
    }
    let blob_path = blob_location(manifest_path, &manifest.blob_path);
    let blob = fs::read(&blob_path).map_err(io_err(&blob_path))?;
    let entries = manifest.queries;
    let vectors = read_vectors(&blob, manifest.dim, entries.len(), |i| {
        (entries.get(i).map(|q| q.query_id).unwrap_or(i as u64), u64::MAX)
    })?;
    let queries = entries
        .into_iter()
        .zip(vectors)
        .map(|(e, vector)| Query { query_id: e.query_id, category: e.category, vector })
        .collect();
    QuerySet::new(manifest.dim, manifest.per_category_count, queries)
}

pub fn write_queries(queries: &QuerySet, manifest_path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let manifest_path = manifest_path.as_ref();
    let blob_path = manifest_path.with_extension("f32");
    let blob_name = blob_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let manifest = QueryManifest {
        dim: queries.dim(),
        per_category_count: queries.per_category_count,
        blob_path: blob_name,
        queries: queries
            .queries()
            .iter()
            .map(|q| QueryEntry { query_id: q.query_id, category: q.category.clone() })
            .collect(),
    };
    write_file(&blob_path, &encode_vectors(queries.queries().iter().map(|q| q.vector.as_slice())))?;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(manifest_path, json.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_pair(dir: &Path, dim: usize, counts: &[u32], blob: &[u8]) -> PathBuf {
        let manifest = CorpusManifest {
            dim,
            sample_rate_fps: 2.0,
            blob_path: "frames.f32".into(),
            videos: counts
                .iter()
                .enumerate()
                .map(|(i, &n)| VideoRecord {
                    video_id: i as u64,
                    category: "Travel".into(),
                    frame_count: n,
                    source_uri: format!("video{i}.mp4"),
                })
                .collect(),
        };
        fs::write(dir.join("frames.f32"), blob).unwrap();
        let path = dir.join("corpus.json");
        fs::write(&path, serde_json::to_string(&manifest).unwrap()).unwrap();
        path
    }

    fn floats(n: usize) -> Vec<u8> {
        (0..n).flat_map(|i| (i as f32 * 0.5).to_le_bytes()).collect()
    }

    #[test]
    fn two_videos_three_frames() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_pair(dir.path(), 4, &[3, 3], &floats(24));
        let corpus = load_corpus(&path).unwrap();
        assert_eq!(corpus.len(), 6);
        assert_eq!(corpus.dim(), 4);
        assert_eq!(corpus.frames()[4].video_id, 1);
        assert_eq!(corpus.frames()[4].ordinal, 1);
        assert_eq!(corpus.frames()[4].timestamp_s, 0.5);
        assert_eq!(corpus.frames()[4].vector, vec![8.0, 8.5, 9.0, 9.5]);
    }

    #[test]
    fn truncated_blob_names_offset() {
        let dir = tempfile::tempdir().unwrap();
        let mut blob = floats(24);
        blob.truncate(4 * 4 * 4 + 6);
        let path = write_pair(dir.path(), 4, &[3, 3], &blob);
        match load_corpus(&path).unwrap_err() {
            CorpusError::Truncated { frame_id, video_id, offset, expected, actual } => {
                assert_eq!((frame_id, video_id), (4, 1));
                assert_eq!(offset, 64);
                assert_eq!(expected, 96);
                assert_eq!(actual, 70);
                let msg = CorpusError::Truncated { frame_id, video_id, offset, expected, actual }.to_string();
                assert!(msg.contains("byte offset 64"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn oversized_blob_is_a_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_pair(dir.path(), 3, &[2], &floats(8));
        assert!(matches!(load_corpus(&path).unwrap_err(), CorpusError::BlobSize { expected: 24, actual: 32, .. }));
    }

    #[test]
    fn non_finite_reports_context() {
        let dir = tempfile::tempdir().unwrap();
        let mut blob = floats(8);
        blob[20..24].copy_from_slice(&f32::NAN.to_le_bytes());
        let path = write_pair(dir.path(), 2, &[2, 2], &blob);
        assert!(matches!(
            load_corpus(&path).unwrap_err(),
            CorpusError::NonFinite { frame_id: 2, video_id: 1, component: 1 }
        ));
    }

    #[test]
    fn missing_manifest() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_corpus(dir.path().join("nope.json")).unwrap_err(), CorpusError::Io { .. }));
    }

    #[test]
    fn full_width_embeddings() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_pair(dir.path(), crate::DEFAULT_DIM, &[1], &floats(crate::DEFAULT_DIM));
        assert_eq!(load_corpus(&path).unwrap().dim(), 2048);
    }

    #[test]
    fn blob_round_trip_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let blob: Vec<u8> = (0..30u32).flat_map(|i| f32::from_bits(0x3f80_0000 ^ (i * 7919)).to_le_bytes()).collect();
        let path = write_pair(dir.path(), 5, &[2, 1, 3], &blob);
        let corpus = load_corpus(&path).unwrap();
        let out = dir.path().join("copy.json");
        write_corpus(&corpus, &out).unwrap();
        assert_eq!(fs::read(dir.path().join("copy.f32")).unwrap(), blob);
        assert_eq!(load_corpus(&out).unwrap(), corpus);
    }

    #[test]
    fn queries_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let qs = QuerySet::new(
            2,
            1,
            vec![
                Query { query_id: 7, category: "Gaming".into(), vector: vec![1.0, 2.0] },
                Query { query_id: 3, category: "Music".into(), vector: vec![-1.0, 0.25] },
            ],
        )
        .unwrap();
        let path = dir.path().join("queries.json");
        write_queries(&qs, &path).unwrap();
        assert_eq!(load_queries(&path).unwrap(), qs);
    }
}
