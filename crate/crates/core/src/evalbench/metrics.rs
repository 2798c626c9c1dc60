//! Precision at k and its mean over a category's queries.

use super::EvalError;
use crate::corpus::VideoRecord;
use crate::retrieve::SearchResult;

/// Fraction of the top `k` ranked videos whose category equals
/// `query_category`. The denominator is `k` even when fewer videos came back.
pub fn precision_at_k(
    result: &SearchResult,
    query_category: &str,
    videos: &[VideoRecord],
    k: usize,
) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    if result.ranked_videos.is_empty() {
        return Err(EvalError::EmptyResult);
    }
    let mut relevant = 0usize;
    for ranked in result.ranked_videos.iter().take(k) {
        let video = videos
            .binary_search_by_key(&ranked.video_id, |v| v.video_id)
            .map(|i| &videos[i])
            .map_err(|_| EvalError::UnknownVideo(ranked.video_id))?;
        if video.category == query_category {
            relevant += 1;
        }
    }
    Ok(relevant as f64 / k as f64)
}

/// Arithmetic mean of per-query precisions.
pub fn map_at_k(per_query_precisions: &[f64]) -> Result<f64, EvalError> {
    if per_query_precisions.is_empty() {
        return Err(EvalError::EmptyPrecisions);
    }
    Ok(per_query_precisions.iter().sum::<f64>() / per_query_precisions.len() as f64)
}
