use super::geo::{haversine_unchecked, GeoIndex};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbscanResult {
    /// Cluster id per point; `None` marks noise.
    pub cluster_ids: Vec<Option<usize>>,
    pub num_clusters: usize,
}

/// Density clustering over `(lat, lon)` points with great-circle distance.
///
/// A point is core when at least `min_pts` *other* points lie within `eps`
/// meters. Clusters are numbered in order of their lowest-index core point;
/// a border point joins the lowest-numbered cluster that has a core point in
/// its neighborhood.
pub fn dbscan(points: &[(f64, f64)], eps: f64, min_pts: usize) -> Result<DbscanResult> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be > 0, got {eps}")));
    }
    if min_pts == 0 {
        return Err(Error::InvalidInput("min_pts must be >= 1".into()));
    }
    let index = GeoIndex::new(points)?;
    let mut buf = Vec::new();
    let core: Vec<bool> = (0..points.len())
        .map(|i| index.count_within_excluding(i, eps, &mut buf) >= min_pts)
        .collect();

    let mut ids: Vec<Option<usize>> = vec![None; points.len()];
    let mut next = 0;
    let mut queue = Vec::new();
    for seed in 0..points.len() {
        if !core[seed] || ids[seed].is_some() {
            continue;
        }
        let cluster = next;
        next += 1;
        ids[seed] = Some(cluster);
        queue.push(seed);
        while let Some(q) = queue.pop() {
            index.within(points[q], eps, &mut buf);
            for &nb in &buf {
                if ids[nb].is_none() {
                    ids[nb] = Some(cluster);
                    if core[nb] {
                        queue.push(nb);
                    }
                }
            }
        }
    }
    Ok(DbscanResult { cluster_ids: ids, num_clusters: next })
}

/// Mean over clusters of the largest member distance from the cluster's
/// coordinate-mean center. Noise is ignored.
pub fn cluster_radius_mean(points: &[(f64, f64)], result: &DbscanResult) -> Result<f64> {
    if result.num_clusters == 0 {
        return Err(Error::NoClusters("clustering has no clusters".into()));
    }
    let k = result.num_clusters;
    let mut sums = vec![(0.0, 0.0, 0usize); k];
    for (p, id) in points.iter().zip(&result.cluster_ids) {
        if let Some(c) = *id {
            sums[c].0 += p.0;
            sums[c].1 += p.1;
            sums[c].2 += 1;
        }
    }
    let centers: Vec<(f64, f64)> = sums
        .iter()
        .map(|&(la, lo, n)| (la / n as f64, lo / n as f64))
        .collect();
    let mut radii = vec![0.0f64; k];
    for (p, id) in points.iter().zip(&result.cluster_ids) {
        if let Some(c) = *id {
            radii[c] = radii[c].max(haversine_unchecked(*p, centers[c]));
        }
    }
    Ok(radii.iter().sum::<f64>() / k as f64)
}
