//! Single-file persistence for [`RetrievalIndex`] and [`VideoTemporalVectors`].
//!
//! All integers and floats are little-endian and fixed width. The header is
//! followed by sections, each opening with a `u64` length or element count,
//! so no section is ever zero bytes long and section offsets are strictly
//! increasing. See `docs/index-format.md` for the byte-level layout.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::corpus::VideoRecord;
use crate::retrieve::{IndexParams, IndexParts, RetrievalIndex, VideoTemporalVectors};
use crate::tgraph::TemporalGraph;

pub const INDEX_MAGIC: [u8; 8] = *b"VGIDX001";
pub const VIDEO_VECTORS_MAGIC: [u8; 8] = *b"VGVTV001";
pub const INDEX_HEADER_LEN: usize = 112;
pub const VIDEO_VECTORS_HEADER_LEN: usize = 72;

const INDEX_SECTIONS: [&str; 7] =
    ["videos", "frame_table", "buckets", "edges", "centroids", "augmented", "frame_vectors"];
const VIDEO_SECTIONS: [&str; 3] = ["videos", "counts", "vectors"];

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: found {:?} ({})", found, String::from_utf8_lossy(found))]
    BadMagic { found: [u8; 8] },
    #[error("unsupported format version {found:?}, expected {expected:?}")]
    VersionMismatch { found: String, expected: String },
    #[error("file truncated: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("section {section} offset {offset} is out of bounds (limit {limit})")]
    OffsetOutOfBounds { section: &'static str, offset: u64, limit: u64 },
    #[error("corrupt {section} section: {detail}")]
    Corrupt { section: &'static str, detail: String },
}

impl StoreError {
    fn corrupt(section: &'static str, detail: impl Into<String>) -> Self {
        StoreError::Corrupt { section, detail: detail.into() }
    }
}

fn put_f32s(out: &mut Vec<u8>, values: &[f32]) {
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn videos_json(videos: &[VideoRecord]) -> Vec<u8> {
    serde_json::to_vec(videos).expect("video records serialize")
}

/// Serializes `index` to the `VGIDX001` byte layout.
pub fn encode_index(index: &RetrievalIndex) -> Vec<u8> {
    let dim = index.dim();
    let mut sections: Vec<Vec<u8>> = Vec::with_capacity(INDEX_SECTIONS.len());

    let json = videos_json(index.videos());
    let mut s = (json.len() as u64).to_le_bytes().to_vec();
    s.extend_from_slice(&json);
    sections.push(s);

    let table = index.frame_to_video();
    let mut s = (table.len() as u64).to_le_bytes().to_vec();
    for &(f, v) in table {
        s.extend_from_slice(&f.to_le_bytes());
        s.extend_from_slice(&v.to_le_bytes());
    }
    sections.push(s);

    let mut s = (index.buckets().len() as u64).to_le_bytes().to_vec();
    for b in index.buckets() {
        s.extend_from_slice(&(b.len() as u64).to_le_bytes());
    }
    for b in index.buckets() {
        for id in b.frame_ids() {
            s.extend_from_slice(&id.to_le_bytes());
        }
    }
    sections.push(s);

    let mut s = (index.graph().edge_count() as u64).to_le_bytes().to_vec();
    for (a, b, w) in index.graph().edges() {
        s.extend_from_slice(&a.to_le_bytes());
        s.extend_from_slice(&b.to_le_bytes());
        s.extend_from_slice(&w.to_le_bytes());
    }
    sections.push(s);

    let mut s = Vec::new();
    put_f32s(&mut s, index.centroids());
    sections.push(s);
    let mut s = Vec::new();
    put_f32s(&mut s, index.cluster_vectors().as_flat());
    sections.push(s);

    let mut s = ((index.frame_count() * dim) as u64).to_le_bytes().to_vec();
    for b in index.buckets() {
        for v in b.vectors() {
            s.extend_from_slice(&v.to_le_bytes());
        }
    }
    sections.push(s);

    let params = index.params();
    let mut out = Vec::with_capacity(INDEX_HEADER_LEN + sections.iter().map(Vec::len).sum::<usize>());
    out.extend_from_slice(&INDEX_MAGIC);
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(params.k_clusters as u32).to_le_bytes());
    out.extend_from_slice(&params.alpha.to_le_bytes());
    out.extend_from_slice(&(index.videos().len() as u32).to_le_bytes());
    out.extend_from_slice(&params.seed.to_le_bytes());
    out.extend_from_slice(&(index.frame_count() as u64).to_le_bytes());
    out.extend_from_slice(&(index.graph().edge_count() as u64).to_le_bytes());
    write_offsets(&mut out, INDEX_HEADER_LEN, &sections);
    debug_assert_eq!(out.len(), INDEX_HEADER_LEN);
    for s in sections {
        out.extend_from_slice(&s);
    }
    out
}

fn write_offsets(out: &mut Vec<u8>, header_len: usize, sections: &[Vec<u8>]) {
    let mut offset = header_len as u64;
    for s in sections {
        out.extend_from_slice(&offset.to_le_bytes());
        offset += s.len() as u64;
    }
    out.extend_from_slice(&offset.to_le_bytes());
}

/// Bounds-checked little-endian reader over one section.
struct Cursor<'a> {
    section: &'static str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(section: &'static str, bytes: &'a [u8]) -> Self {
        Self { section, bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            StoreError::corrupt(self.section, format!("needs {n} bytes at {} of {}", self.pos, self.bytes.len()))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn count(&mut self, expected: Option<u64>) -> Result<usize, StoreError> {
        let n = self.u64()?;
        if let Some(e) = expected.filter(|&e| e != n) {
            return Err(StoreError::corrupt(self.section, format!("count {n} disagrees with header ({e})")));
        }
        usize::try_from(n).map_err(|_| StoreError::corrupt(self.section, "count overflows"))
    }

    fn f32s(&mut self, expected: u64) -> Result<Vec<f32>, StoreError> {
        let n = self.count(Some(expected))?;
        let raw = self.take(n.checked_mul(4).ok_or_else(|| StoreError::corrupt(self.section, "length overflows"))?)?;
        Ok(raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect())
    }

    fn finish(&self) -> Result<(), StoreError> {
        if self.pos != self.bytes.len() {
            return Err(StoreError::corrupt(self.section, format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

fn check_magic(bytes: &[u8], magic: &[u8; 8], header_len: usize) -> Result<(), StoreError> {
    if bytes.len() < 8 {
        return Err(StoreError::Truncated { expected: header_len as u64, actual: bytes.len() as u64 });
    }
    let found: [u8; 8] = bytes[..8].try_into().expect("8 bytes");
    if &found != magic {
        if found[..5] == magic[..5] {
            return Err(StoreError::VersionMismatch {
                found: String::from_utf8_lossy(&found[5..]).into_owned(),
                expected: String::from_utf8_lossy(&magic[5..]).into_owned(),
            });
        }
        return Err(StoreError::BadMagic { found });
    }
    if bytes.len() < header_len {
        return Err(StoreError::Truncated { expected: header_len as u64, actual: bytes.len() as u64 });
    }
    Ok(())
}

/// Reads `names.len() + 1` offsets at `at` and slices the sections.
fn split_sections<'a>(
    bytes: &'a [u8],
    at: usize,
    header_len: usize,
    names: &[&'static str],
) -> Result<Vec<&'a [u8]>, StoreError> {
    let mut header = Cursor::new("header", &bytes[at..header_len]);
    let offsets: Vec<u64> = (0..=names.len()).map(|_| header.u64()).collect::<Result<_, _>>()?;
    let end = *offsets.last().expect("end offset");
    let mut prev = header_len as u64;
    for (i, &offset) in offsets[..names.len()].iter().enumerate() {
        let ok = if i == 0 { offset == prev } else { offset > prev };
        if !ok || offset >= end {
            return Err(StoreError::OffsetOutOfBounds { section: names[i], offset, limit: end });
        }
        prev = offset;
    }
    if end != bytes.len() as u64 {
        if end > bytes.len() as u64 {
            return Err(StoreError::Truncated { expected: end, actual: bytes.len() as u64 });
        }
        return Err(StoreError::corrupt("file", format!("{} bytes after the last section", bytes.len() as u64 - end)));
    }
    Ok(offsets.windows(2).map(|w| &bytes[w[0] as usize..w[1] as usize]).collect())
}

fn read_videos(section: &[u8], expected: u64) -> Result<Vec<VideoRecord>, StoreError> {
    let mut cur = Cursor::new("videos", section);
    let len = cur.count(None)?;
    let json = cur.take(len)?;
    cur.finish()?;
    let videos: Vec<VideoRecord> =
        serde_json::from_slice(json).map_err(|e| StoreError::corrupt("videos", e.to_string()))?;
    if videos.len() as u64 != expected {
        return Err(StoreError::corrupt("videos", format!("{} records, header says {expected}", videos.len())));
    }
    Ok(videos)
}

pub fn decode_index(bytes: &[u8]) -> Result<RetrievalIndex, StoreError> {
    check_magic(bytes, &INDEX_MAGIC, INDEX_HEADER_LEN)?;
    let mut h = Cursor::new("header", &bytes[8..48]);
    let dim = h.u32()? as usize;
    let k = h.u32()? as usize;
    let alpha = f32::from_bits(h.u32()?);
    let video_count = h.u32()? as u64;
    let seed = h.u64()?;
    let frame_count = h.u64()?;
    let edge_count = h.u64()?;
    if dim == 0 {
        return Err(StoreError::corrupt("header", "dimension is zero"));
    }
    let s = split_sections(bytes, 48, INDEX_HEADER_LEN, &INDEX_SECTIONS)?;

    let videos = read_videos(s[0], video_count)?;

    let mut cur = Cursor::new("frame_table", s[1]);
    let n = cur.count(Some(frame_count))?;
    let frame_to_video = (0..n).map(|_| Ok((cur.u64()?, cur.u64()?))).collect::<Result<Vec<_>, StoreError>>()?;
    cur.finish()?;

    let mut cur = Cursor::new("buckets", s[2]);
    cur.count(Some(k as u64))?;
    let sizes = (0..k).map(|_| cur.u64()).collect::<Result<Vec<_>, _>>()?;
    if sizes.iter().sum::<u64>() != frame_count {
        return Err(StoreError::corrupt("buckets", "bucket sizes do not sum to the frame count"));
    }
    let mut bucket_ids = Vec::with_capacity(k);
    for &size in &sizes {
        bucket_ids.push((0..size).map(|_| cur.u64()).collect::<Result<Vec<_>, _>>()?);
    }
    cur.finish()?;

    let mut cur = Cursor::new("edges", s[3]);
    let e = cur.count(Some(edge_count))?;
    let edges = (0..e).map(|_| Ok((cur.u32()?, cur.u32()?, cur.u64()?))).collect::<Result<Vec<_>, StoreError>>()?;
    cur.finish()?;
    let graph = TemporalGraph::from_edges(k, edges).map_err(|err| StoreError::corrupt("edges", err.to_string()))?;

    let mut cur = Cursor::new("centroids", s[4]);
    let centroids = cur.f32s((k * dim) as u64)?;
    cur.finish()?;
    let mut cur = Cursor::new("augmented", s[5]);
    let augmented = cur.f32s((k * dim) as u64)?;
    cur.finish()?;
    let mut cur = Cursor::new("frame_vectors", s[6]);
    let mut flat = cur.f32s(frame_count * dim as u64)?.into_iter();
    cur.finish()?;

    let buckets = bucket_ids
        .into_iter()
        .map(|ids| {
            let vectors: Vec<f32> = flat.by_ref().take(ids.len() * dim).collect();
            (ids, vectors)
        })
        .collect();
    RetrievalIndex::from_parts(IndexParts {
        dim,
        params: IndexParams { k_clusters: k, alpha, seed },
        centroids,
        cluster_vectors: augmented,
        graph,
        buckets,
        frame_to_video,
        videos,
    })
    .map_err(|err| StoreError::corrupt("index", err.to_string()))
}

/// Writes via a temporary sibling file and a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<u64, StoreError> {
    let io = |source| StoreError::Io { path: path.to_path_buf(), source };
    let mut tmp_name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io(e));
    }
    Ok(bytes.len() as u64)
}

/// Returns the number of bytes written.
pub fn save_index(index: &RetrievalIndex, path: impl AsRef<Path>) -> Result<u64, StoreError> {
    write_atomic(path.as_ref(), &encode_index(index))
}

pub fn load_index(path: impl AsRef<Path>) -> Result<RetrievalIndex, StoreError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| StoreError::Io { path: path.to_path_buf(), source })?;
    decode_index(&bytes)
}

/// File size of an index with the given counts; `videos_json_len` is the
/// byte length of the serialized video table.
pub fn expected_index_size(dim: usize, k: usize, frames: usize, edges: usize, videos_json_len: usize) -> u64 {
    let sections = [
        8 + videos_json_len,
        8 + 16 * frames,
        8 + 8 * k + 8 * frames,
        8 + 16 * edges,
        8 + 4 * k * dim,
        8 + 4 * k * dim,
        8 + 4 * frames * dim,
    ];
    (INDEX_HEADER_LEN + sections.iter().sum::<usize>()) as u64
}

pub fn encode_video_vectors(vv: &VideoTemporalVectors) -> Vec<u8> {
    let mut sections = Vec::with_capacity(VIDEO_SECTIONS.len());
    let json = videos_json(vv.videos());
    let mut s = (json.len() as u64).to_le_bytes().to_vec();
    s.extend_from_slice(&json);
    sections.push(s);

    let mut s = (vv.videos().len() as u64).to_le_bytes().to_vec();
    for v in vv.raw_vectors() {
        s.extend_from_slice(&((v.len() / vv.dim()) as u32).to_le_bytes());
    }
    sections.push(s);

    let flat: Vec<f32> = vv.raw_vectors().concat();
    let mut s = Vec::new();
    put_f32s(&mut s, &flat);
    sections.push(s);

    let mut out = Vec::new();
    out.extend_from_slice(&VIDEO_VECTORS_MAGIC);
    out.extend_from_slice(&(vv.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(vv.per_video_k() as u32).to_le_bytes());
    out.extend_from_slice(&vv.alpha().to_le_bytes());
    out.extend_from_slice(&(vv.videos().len() as u32).to_le_bytes());
    out.extend_from_slice(&vv.seed().to_le_bytes());
    out.extend_from_slice(&(vv.vector_count() as u64).to_le_bytes());
    write_offsets(&mut out, VIDEO_VECTORS_HEADER_LEN, &sections);
    debug_assert_eq!(out.len(), VIDEO_VECTORS_HEADER_LEN);
    for s in sections {
        out.extend_from_slice(&s);
    }
    out
}

pub fn decode_video_vectors(bytes: &[u8]) -> Result<VideoTemporalVectors, StoreError> {
    check_magic(bytes, &VIDEO_VECTORS_MAGIC, VIDEO_VECTORS_HEADER_LEN)?;
    let mut h = Cursor::new("header", &bytes[8..40]);
    let dim = h.u32()? as usize;
    let per_video_k = h.u32()? as usize;
    let alpha = f32::from_bits(h.u32()?);
    let video_count = h.u32()? as u64;
    let seed = h.u64()?;
    let vector_count = h.u64()?;
    if dim == 0 {
        return Err(StoreError::corrupt("header", "dimension is zero"));
    }
    let s = split_sections(bytes, 40, VIDEO_VECTORS_HEADER_LEN, &VIDEO_SECTIONS)?;
    let videos = read_videos(s[0], video_count)?;
    let mut cur = Cursor::new("counts", s[1]);
    let n = cur.count(Some(video_count))?;
    let counts = (0..n).map(|_| cur.u32()).collect::<Result<Vec<_>, _>>()?;
    cur.finish()?;
    if counts.iter().map(|&c| c as u64).sum::<u64>() != vector_count {
        return Err(StoreError::corrupt("counts", "per-video counts do not sum to the vector count"));
    }
    let mut cur = Cursor::new("vectors", s[2]);
    let mut flat = cur.f32s(vector_count * dim as u64)?.into_iter();
    cur.finish()?;
    let vectors = counts.iter().map(|&c| flat.by_ref().take(c as usize * dim).collect()).collect();
    VideoTemporalVectors::from_parts(dim, per_video_k, alpha, seed, videos, vectors)
        .map_err(|err| StoreError::corrupt("video_vectors", err.to_string()))
}

pub fn save_video_vectors(vv: &VideoTemporalVectors, path: impl AsRef<Path>) -> Result<u64, StoreError> {
    write_atomic(path.as_ref(), &encode_video_vectors(vv))
}

pub fn load_video_vectors(path: impl AsRef<Path>) -> Result<VideoTemporalVectors, StoreError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| StoreError::Io { path: path.to_path_buf(), source })?;
    decode_video_vectors(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_corpus, SynthConfig};
    use crate::retrieve::{build_index, build_video_vectors, search};

    fn small_index() -> RetrievalIndex {
        let (corpus, _) = synth_corpus(&SynthConfig::new(3, 4, 10, 6, 0.4, 2)).unwrap();
        build_index(&corpus, 7, 0.5, 11).unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let index = small_index();
        let a = dir.path().join("a.vgidx");
        let b = dir.path().join("b.vgidx");
        let written = save_index(&index, &a).unwrap();
        let loaded = load_index(&a).unwrap();
        assert_eq!(loaded, index);
        save_index(&loaded, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert_eq!(written, fs::metadata(&a).unwrap().len());
    }

    #[test]
    fn size_predicted_from_counts() {
        let index = small_index();
        let json_len = serde_json::to_vec(index.videos()).unwrap().len();
        let predicted = expected_index_size(6, 7, 120, index.graph().edge_count(), json_len);
        assert_eq!(encode_index(&index).len() as u64, predicted);
    }

    #[test]
    fn header_fields() {
        let bytes = encode_index(&small_index());
        assert_eq!(&bytes[..8], b"VGIDX001");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 6);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 7);
        assert_eq!(f32::from_le_bytes(bytes[16..20].try_into().unwrap()), 0.5);
        assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 11);
        assert_eq!(u64::from_le_bytes(bytes[32..40].try_into().unwrap()), 120);
        assert_eq!(u64::from_le_bytes(bytes[48..56].try_into().unwrap()), 112);
    }

    #[test]
    fn corruption_kinds() {
        let bytes = encode_index(&small_index());

        let mut bad = bytes.clone();
        bad[..8].copy_from_slice(b"NOTANIDX");
        let err = decode_index(&bad).unwrap_err();
        assert!(matches!(err, StoreError::BadMagic { found } if &found == b"NOTANIDX"));
        assert!(err.to_string().contains("NOTANIDX"));

        let mut bad = bytes.clone();
        bad[5..8].copy_from_slice(b"002");
        assert!(matches!(decode_index(&bad).unwrap_err(), StoreError::VersionMismatch { found, .. } if found == "002"));

        let cut = &bytes[..bytes.len() - 3];
        match decode_index(cut).unwrap_err() {
            StoreError::Truncated { expected, actual } => {
                assert_eq!(expected, bytes.len() as u64);
                assert_eq!(actual, bytes.len() as u64 - 3);
            }
            other => panic!("{other:?}"),
        }

        let mut bad = bytes.clone();
        let huge = (bytes.len() as u64 * 4).to_le_bytes();
        bad[48 + 8 * 3..48 + 8 * 4].copy_from_slice(&huge);
        assert!(matches!(decode_index(&bad).unwrap_err(), StoreError::OffsetOutOfBounds { section: "edges", .. }));

        assert!(matches!(decode_index(&bytes[..20]).unwrap_err(), StoreError::Truncated { expected: 112, actual: 20 }));
    }

    #[test]
    fn search_survives_round_trip() {
        let index = small_index();
        let loaded = decode_index(&encode_index(&index)).unwrap();
        let q = index.buckets()[2].vectors()[..6].to_vec();
        assert_eq!(search(&index, &q, 3, 5).unwrap(), search(&loaded, &q, 3, 5).unwrap());
    }

    #[test]
    fn video_vectors_round_trip() {
        let (corpus, _) = synth_corpus(&SynthConfig::new(2, 3, 8, 6, 0.4, 2)).unwrap();
        let vv = build_video_vectors(&corpus, 3, 0.25, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.vgvtv");
        save_video_vectors(&vv, &path).unwrap();
        let loaded = load_video_vectors(&path).unwrap();
        assert_eq!(loaded, vv);
        assert_eq!(encode_video_vectors(&loaded), fs::read(&path).unwrap());
        let mut bad = fs::read(&path).unwrap();
        bad.truncate(bad.len() - 1);
        assert!(matches!(decode_video_vectors(&bad).unwrap_err(), StoreError::Truncated { .. }));
    }

    #[test]
    fn default_dimension_recorded() {
        let (corpus, _) = synth_corpus(&SynthConfig::new(2, 1, 3, crate::DEFAULT_DIM, 0.1, 1)).unwrap();
        let index = build_index(&corpus, 2, 0.5, 0).unwrap();
        let bytes = encode_index(&index);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2048);
    }
}
