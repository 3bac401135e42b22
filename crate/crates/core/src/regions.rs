//! Grouping states by the propagation patterns they share.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mining::TreePattern;
use crate::numerics::{kmeans, squared_distance, LabeledClustering};

const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub state: String,
    pub vector: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    /// Column order: the sorted union of every state's patterns.
    pub patterns: Vec<TreePattern>,
    /// Rows sorted by state.
    pub vectors: Vec<StateVector>,
}

pub fn build_state_vectors(per_state: &BTreeMap<String, BTreeSet<TreePattern>>) -> StateMatrix {
    let patterns: Vec<TreePattern> = per_state.values().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let vectors = per_state
        .iter()
        .map(|(state, set)| StateVector {
            state: state.clone(),
            vector: patterns.iter().map(|p| u8::from(set.contains(p))).collect(),
        })
        .collect();
    StateMatrix { patterns, vectors }
}

/// Distance of every point to its assigned center.
fn center_distances(points: &[Vec<f64>], c: &LabeledClustering) -> Vec<f64> {
    points
        .iter()
        .zip(&c.assignment)
        .map(|(p, &k)| squared_distance(p, &c.centers[k]).sqrt())
        .collect()
}

/// Maximum-likelihood Gaussian fit of the distances, σ floored.
fn gaussian_fit(d: &[f64]) -> (f64, f64, bool) {
    let n = d.len() as f64;
    let mu = d.iter().sum::<f64>() / n;
    let sigma = (d.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n).sqrt();
    (mu, sigma.max(SIGMA_FLOOR), sigma < SIGMA_FLOOR)
}

/// Negative log-likelihood of the point-to-center distances under one
/// Gaussian, plus ln|X| for its two parameters and K·ln|X| for the centers.
pub fn description_length(points: &[Vec<f64>], clustering: &LabeledClustering) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidInput("description length needs at least 2 points".into()));
    }
    if clustering.assignment.len() != points.len() {
        return Err(Error::InvalidInput("clustering does not cover the points".into()));
    }
    let d = center_distances(points, clustering);
    let (mu, sigma, _) = gaussian_fit(&d);
    let ln_norm = (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let nll: f64 = d.iter().map(|x| ln_norm + (x - mu) * (x - mu) / (2.0 * sigma * sigma)).sum();
    let ln_n = (points.len() as f64).ln();
    Ok(nll + ln_n + clustering.k as f64 * ln_n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub id: usize,
    pub states: Vec<String>,
    pub distinguishing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub k: usize,
    pub log_base: String,
    pub dl: f64,
    pub dl_by_k: BTreeMap<usize, f64>,
    pub assignment: BTreeMap<String, usize>,
    pub clusters: Vec<ClusterProfile>,
    /// The chosen clustering has an empty cluster or zero distance spread.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionParams {
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub seed: u64,
    pub distinguishing_share: f64,
}

/// Runs K-means for each K in range, keeps the K of least description length
/// (smaller K on ties), and profiles the clusters. Cluster ids follow the
/// first member in state order, so the result does not depend on input
/// order.
pub fn cluster_states(matrix: &StateMatrix, params: &RegionParams) -> Result<ClusterReport> {
    let mut rows: Vec<&StateVector> = matrix.vectors.iter().collect();
    rows.sort_by(|a, b| a.state.cmp(&b.state));
    let points: Vec<Vec<f64>> = rows.iter().map(|r| r.vector.iter().map(|&b| f64::from(b)).collect()).collect();
    if points.len() < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 states, have {}", points.len())));
    }

    let mut dl_by_k = BTreeMap::new();
    let mut best: Option<(f64, LabeledClustering)> = None;
    for k in params.k_min..=params.k_max {
        if k == 0 || k > points.len() {
            log::info!("skipping K={k}: {} states", points.len());
            continue;
        }
        let fit = kmeans(&points, k, params.seed.wrapping_add(k as u64), params.restarts)?;
        let dl = description_length(&points, &fit)?;
        dl_by_k.insert(k, dl);
        if best.as_ref().is_none_or(|(b, _)| dl < *b) {
            best = Some((dl, fit));
        }
    }
    let (dl, fit) = best.ok_or_else(|| {
        Error::InvalidInput(format!(
            "no K in {}..={} is feasible for {} states",
            params.k_min,
            params.k_max,
            points.len()
        ))
    })?;
    if dl_by_k.values().any(|&other| other < dl) {
        return Err(Error::Invariant("chosen K does not minimize description length".into()));
    }

    let mut renumber: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in &fit.assignment {
        let next = renumber.len();
        renumber.entry(c).or_insert(next);
    }
    let assignment: Vec<usize> = fit.assignment.iter().map(|c| renumber[c]).collect();
    let (_, _, zero_spread) = gaussian_fit(&center_distances(&points, &fit));
    let degenerate = renumber.len() < fit.k || zero_spread;

    let mut clusters = Vec::new();
    for id in 0..renumber.len() {
        let members: Vec<usize> = (0..rows.len()).filter(|&i| assignment[i] == id).collect();
        let inside = members.len() as f64;
        let distinguishing = matrix
            .patterns
            .iter()
            .enumerate()
            .filter(|&(j, _)| {
                let hits = members.iter().filter(|&&i| rows[i].vector[j] == 1).count() as f64;
                let outside = (0..rows.len()).any(|i| assignment[i] != id && rows[i].vector[j] == 1);
                !outside && hits > 0.0 && hits >= params.distinguishing_share * inside
            })
            .map(|(_, p)| p.encoding().to_string())
            .collect();
        clusters.push(ClusterProfile {
            id,
            states: members.iter().map(|&i| rows[i].state.clone()).collect(),
            distinguishing,
        });
    }

    Ok(ClusterReport {
        k: fit.k,
        log_base: "e".into(),
        dl,
        dl_by_k,
        assignment: rows.iter().zip(&assignment).map(|(r, &c)| (r.state.clone(), c)).collect(),
        clusters,
        degenerate,
    })
}
