use std::collections::{BTreeSet, HashMap};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::StationIndex;
use crate::model::{GeoEntity, Location, Timestamp, SECONDS_PER_DAY};
use crate::numerics::{cluster_radius_mean, dbscan, percentile, GeoIndex};

use super::entity::LongEntity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusEstimate {
    pub eps_m: f64,
    pub min_pts: usize,
    pub radius_m: f64,
    pub clusters: usize,
    pub s1: usize,
    pub s2: usize,
}

/// Up to `n` items drawn without replacement, in their original order.
pub fn sample_points(points: &[(f64, f64)], n: usize, seed: u64) -> Vec<(f64, f64)> {
    if n >= points.len() {
        return points.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, points.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| points[i]).collect()
}

/// DBSCAN parameters from `s2` (99th percentiles of nearest-neighbor
/// distance and of neighbor counts within that distance), then the mean
/// cluster radius of `s1`.
pub fn estimate_vicinity_radius(s1: &[(f64, f64)], s2: &[(f64, f64)]) -> Result<RadiusEstimate> {
    if s2.len() < 100 {
        return Err(Error::InvalidInput(format!("parameter sample needs at least 100 points, has {}", s2.len())));
    }
    if s1.len() < s2.len() {
        return Err(Error::InvalidInput("clustering sample is smaller than the parameter sample".into()));
    }
    let index = GeoIndex::new(s2)?;
    let nn: Vec<f64> = (0..s2.len()).map(|i| index.nearest_other(i).map_or(0.0, |(_, d)| d)).collect();
    let eps = percentile(&nn, 0.99)?;
    let mut buf = Vec::new();
    let counts: Vec<f64> = (0..s2.len()).map(|i| index.count_within_excluding(i, eps, &mut buf) as f64).collect();
    let min_pts = (percentile(&counts, 0.99)?.ceil() as usize).max(1);
    let clustering = dbscan(s1, eps, min_pts)?;
    if clustering.num_clusters == 0 {
        return Err(Error::NoClusters(format!(
            "no clusters at eps={eps:.1} m, min_pts={min_pts}; use a larger sample"
        )));
    }
    let radius = cluster_radius_mean(s1, &clustering)?;
    Ok(RadiusEstimate {
        eps_m: eps,
        min_pts,
        radius_m: radius,
        clusters: clustering.num_clusters,
        s1: s1.len(),
        s2: s2.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VicinityCounts {
    pub long_id: String,
    pub s_r: usize,
    pub s_before: usize,
    pub s_after: usize,
}

/// The before and after windows: the long entity's span moved by W + D
/// days, D its duration in whole days rounded up.
pub fn shifted_windows(l: &LongEntity, gap_days: i64) -> ((Timestamp, Timestamp), (Timestamp, Timestamp)) {
    let d = (l.duration() + SECONDS_PER_DAY - 1).div_euclid(SECONDS_PER_DAY);
    let shift = (gap_days + d) * SECONDS_PER_DAY;
    ((l.start - shift, l.end - shift), (l.start + shift, l.end + shift))
}

fn strictly_inside(e: &GeoEntity, (lo, hi): (Timestamp, Timestamp)) -> bool {
    lo < e.start && e.end < hi
}

fn count(l: &LongEntity, e: &GeoEntity, gap_days: i64, c: &mut VicinityCounts) {
    if l.member_ids.contains(&e.id) {
        return;
    }
    let (before, after) = shifted_windows(l, gap_days);
    c.s_r += usize::from(strictly_inside(e, (l.start, l.end)));
    c.s_before += usize::from(strictly_inside(e, before));
    c.s_after += usize::from(strictly_inside(e, after));
}

/// Counts traffic entities in each long entity's vicinity during, before
/// and after it. Vicinity is the radius `r` around the center, or for an
/// all-weather entity the zipcodes its stations serve.
pub fn vicinity_counts(
    longs: &[LongEntity],
    entities: &[GeoEntity],
    r: f64,
    gap_days: i64,
    idx: &StationIndex,
) -> Result<Vec<VicinityCounts>> {
    if !(r > 0.0) {
        return Err(Error::InvalidInput(format!("vicinity radius must be positive, got {r}")));
    }
    let traffic: Vec<&GeoEntity> = entities.iter().filter(|e| matches!(e.loc, Location::Traffic(_))).collect();
    let coords: Vec<(f64, f64)> = traffic.iter().map(|e| e.coords().expect("traffic")).collect();
    let geo = GeoIndex::new(&coords)?;
    let mut by_station: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, e) in traffic.iter().enumerate() {
        if let Some(code) = e.traffic_loc().and_then(|t| idx.station_for_zip(&t.zipcode)) {
            by_station.entry(code).or_default().push(i);
        }
    }
    let mut out = Vec::with_capacity(longs.len());
    let mut near = Vec::new();
    for l in longs {
        let mut c = VicinityCounts { long_id: l.id.clone(), s_r: 0, s_before: 0, s_after: 0 };
        match l.center {
            Some(center) => {
                geo.within(center, r, &mut near);
                for &i in &near {
                    count(l, traffic[i], gap_days, &mut c);
                }
            }
            None => {
                let served: BTreeSet<usize> = l
                    .stations
                    .iter()
                    .flat_map(|code| by_station.get(code.as_str()).into_iter().flatten().copied())
                    .collect();
                for i in served {
                    count(l, traffic[i], gap_days, &mut c);
                }
            }
        }
        out.push(c);
    }
    Ok(out)
}
