use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Boxplot statistics of one group. Whiskers are the extremes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub count: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
}

/// Nearest-rank quantile: `sorted[ceil(p n) - 1]`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// `None` for an empty sample. NaNs are dropped.
pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(BoxStats {
        count: v.len(),
        median: nearest_rank(&v, 0.5),
        q25: nearest_rank(&v, 0.25),
        q75: nearest_rank(&v, 0.75),
        min: v[0],
        max: v[v.len() - 1],
    })
}

/// Groups `(key, value)` pairs and summarizes each group; groups without
/// values are omitted.
pub fn summarize<K: Ord + Clone>(records: impl IntoIterator<Item = (K, Option<f64>)>) -> Vec<(K, BoxStats)> {
    let mut groups: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for (key, value) in records {
        let entry = groups.entry(key).or_default();
        if let Some(v) = value {
            entry.push(v);
        }
    }
    groups
        .into_iter()
        .filter_map(|(k, v)| box_stats(&v).map(|s| (k, s)))
        .collect()
}

/// Share of points with a unit-cube coordinate in either `tail` of its marginal.
pub fn boundary_fraction(unit_points: &[Vec<f64>], tail: f64) -> f64 {
    if unit_points.is_empty() {
        return 0.0;
    }
    let hits = unit_points
        .iter()
        .filter(|p| p.iter().any(|&u| u < tail || u > 1.0 - tail))
        .count();
    hits as f64 / unit_points.len() as f64
}
