//! Vector arithmetic shared by clustering and search.
//!
//! Everything accumulates in `f64` over `f32` storage so results do not
//! depend on summation width.

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum SimilarityError {
    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("cosine is undefined for a zero-norm vector")]
    ZeroNorm,
    #[error("vector contains a non-finite component")]
    NonFinite,
}

#[inline]
pub fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter().zip(v).map(|(&a, &b)| a as f64 * b as f64).sum()
}

#[inline]
pub fn squared_norm(u: &[f32]) -> f64 {
    dot(u, u)
}

#[inline]
pub fn squared_euclidean(u: &[f32], v: &[f32]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum()
}

/// Cosine similarity `dot(u, v) / (|u| |v|)`, clamped to `[-1, 1]`.
///
/// The denominator is `sqrt(|u|^2 |v|^2)` so a vector compared with itself
/// scores exactly 1.0.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64, SimilarityError> {
    if u.len() != v.len() {
        return Err(SimilarityError::LengthMismatch { left: u.len(), right: v.len() });
    }
    if u.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(SimilarityError::NonFinite);
    }
    let (nu, nv) = (squared_norm(u), squared_norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(SimilarityError::ZeroNorm);
    }
    Ok(cosine_with_norms(u, v, nu, nv))
}

/// Cosine with precomputed squared norms. A zero norm on either side scores 0.
#[inline]
pub(crate) fn cosine_with_norms(u: &[f32], v: &[f32], sq_norm_u: f64, sq_norm_v: f64) -> f64 {
    if sq_norm_u == 0.0 || sq_norm_v == 0.0 {
        return 0.0;
    }
    (dot(u, v) / (sq_norm_u * sq_norm_v).sqrt()).clamp(-1.0, 1.0)
}
