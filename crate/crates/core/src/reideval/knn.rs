//! Cosine-distance k-nearest-neighbour classification.

use std::collections::HashMap;

use super::ReidError;

pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - dot / (na * nb)
}

/// Majority vote of the `k` nearest gallery rows. Vote ties go to the tied
/// label owning the single nearest neighbour; distance ties keep gallery order.
pub fn knn_predict<'a>(gallery: &[Vec<f64>], labels: &'a [String], query: &[f64], k: usize) -> Result<&'a str, ReidError> {
    if gallery.is_empty() {
        return Err(ReidError::EmptyGallery);
    }
    if k == 0 || k > gallery.len() {
        return Err(ReidError::InvalidK { k, n: gallery.len() });
    }
    let mut order: Vec<(f64, usize)> = gallery.iter().enumerate().map(|(i, g)| (cosine_distance(g, query), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nearest = &order[..k];
    let mut votes: HashMap<&str, usize> = HashMap::new();
    for &(_, i) in nearest {
        *votes.entry(labels[i].as_str()).or_default() += 1;
    }
    let top = *votes.values().max().unwrap();
    let winner = nearest
        .iter()
        .map(|&(_, i)| labels[i].as_str())
        .find(|l| votes[l] == top)
        .unwrap();
    Ok(winner)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnnOutcome {
    pub predicted: Vec<String>,
    /// Fraction correct over queries that carry a label; `None` if none do.
    pub accuracy: Option<f64>,
}

pub fn knn_classify(
    gallery: &[Vec<f64>],
    gallery_labels: &[String],
    queries: &[Vec<f64>],
    query_labels: &[Option<String>],
    k: usize,
) -> Result<KnnOutcome, ReidError> {
    if gallery.len() != gallery_labels.len() {
        return Err(ReidError::LengthMismatch(gallery.len(), gallery_labels.len()));
    }
    if queries.len() != query_labels.len() {
        return Err(ReidError::LengthMismatch(queries.len(), query_labels.len()));
    }
    let predicted = queries
        .iter()
        .map(|q| knn_predict(gallery, gallery_labels, q, k).map(str::to_owned))
        .collect::<Result<Vec<_>, _>>()?;
    let (mut hits, mut total) = (0usize, 0usize);
    for (p, t) in predicted.iter().zip(query_labels) {
        if let Some(t) = t {
            total += 1;
            hits += usize::from(p == t);
        }
    }
    let accuracy = (total > 0).then(|| hits as f64 / total as f64);
    Ok(KnnOutcome { predicted, accuracy })
}
