use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingStats {
    /// Mean over dimensions of the per-dimension population standard deviation.
    pub std: f64,
    /// `std / |mean vector| * 100`.
    pub cv: f64,
    pub mean_pairwise_cosine: f64,
}

fn check_shape(vectors: &[Vec<f64>]) -> Result<usize> {
    if vectors.len() < 2 {
        return Err(Error::Domain(format!("need at least 2 vectors, got {}", vectors.len())));
    }
    let d = vectors[0].len();
    if d == 0 {
        return Err(Error::Domain("vectors must have at least one dimension".into()));
    }
    if let Some(i) = vectors.iter().position(|v| v.len() != d) {
        return Err(Error::Shape(format!("vector {i} has {} dimensions, expected {d}", vectors[i].len())));
    }
    Ok(d)
}

/// Mean cosine similarity over all unordered pairs.
pub fn mean_pairwise_cosine(vectors: &[Vec<f64>]) -> Result<f64> {
    check_shape(vectors)?;
    let norms: Vec<f64> = vectors.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::Domain(format!("vector {i} is zero; cosine undefined")));
    }
    let m = vectors.len();
    let mut sum = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            let dot: f64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum();
            sum += dot / (norms[i] * norms[j]);
        }
    }
    Ok(sum / (m * (m - 1) / 2) as f64)
}

pub fn embedding_stats(vectors: &[Vec<f64>]) -> Result<EmbeddingStats> {
    let d = check_shape(vectors)?;
    let m = vectors.len() as f64;
    let mean: Vec<f64> = (0..d).map(|k| vectors.iter().map(|v| v[k]).sum::<f64>() / m).collect();
    let std = (0..d)
        .map(|k| (vectors.iter().map(|v| (v[k] - mean[k]).powi(2)).sum::<f64>() / m).sqrt())
        .sum::<f64>()
        / d as f64;
    let mean_norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
    if mean_norm == 0.0 {
        return Err(Error::Domain("mean vector is zero; coefficient of variation undefined".into()));
    }
    Ok(EmbeddingStats { std, cv: std / mean_norm * 100.0, mean_pairwise_cosine: mean_pairwise_cosine(vectors)? })
}
