use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::TTestKind;
use crate::error::{Error, Result};
use crate::ingest::StationIndex;
use crate::numerics::{haversine_unchecked, two_sample_t_test, Alternative};

use super::entity::LongEntity;
use super::vicinity::VicinityCounts;

pub const UNKNOWN_STATE: &str = "UNKNOWN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BucketKind {
    Location,
    Duration,
    Type,
}

impl BucketKind {
    pub const ALL: [BucketKind; 3] = [BucketKind::Location, BucketKind::Duration, BucketKind::Type];

    pub fn as_str(self) -> &'static str {
        match self {
            BucketKind::Location => "Location",
            BucketKind::Duration => "Duration",
            BucketKind::Type => "Type",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bucket {
    pub kind: BucketKind,
    pub key: String,
    /// Ids of the member long entities, in input order.
    pub members: Vec<String>,
}

/// State of the traffic member nearest the center, else the state of the
/// first station that has one.
pub fn long_state(l: &LongEntity, idx: &StationIndex) -> String {
    if let Some(center) = l.center {
        let nearest = l.sites.iter().min_by(|a, b| {
            haversine_unchecked(center, (a.lat, a.lon)).total_cmp(&haversine_unchecked(center, (b.lat, b.lon)))
        });
        if let Some(site) = nearest.filter(|s| !s.state.is_empty()) {
            return site.state.clone();
        }
    }
    l.stations
        .iter()
        .find_map(|code| idx.station_state.get(code))
        .cloned()
        .unwrap_or_else(|| UNKNOWN_STATE.to_string())
}

fn edge_str(h: f64) -> String {
    if h.is_infinite() {
        "inf".to_string()
    } else {
        format!("{h}")
    }
}

/// Key of the half-open hour interval holding `duration_s`. Durations below
/// the first edge fall in `[0,first)`; the last interval is open-ended.
pub fn duration_key(duration_s: i64, edges_h: &[f64]) -> String {
    let h = duration_s as f64 / 3600.0;
    let mut lo = 0.0;
    for &e in edges_h {
        if h < e {
            return format!("[{},{})", edge_str(lo), edge_str(e));
        }
        lo = e;
    }
    format!("[{},inf)", edge_str(lo))
}

fn duration_rank(key: &str) -> f64 {
    key.trim_start_matches('[').split(',').next().and_then(|s| s.parse().ok()).unwrap_or(f64::INFINITY)
}

/// Groups long entities into disjoint, exhaustive buckets of one kind.
/// Location and Type keys sort as text, Duration keys by lower edge.
pub fn bucketize(longs: &[LongEntity], kind: BucketKind, edges_h: &[f64], idx: &StationIndex) -> Vec<Bucket> {
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for l in longs {
        let key = match kind {
            BucketKind::Location => long_state(l, idx),
            BucketKind::Duration => duration_key(l.duration(), edges_h),
            BucketKind::Type => l.label.to_string(),
        };
        groups.entry(key).or_default().push(l.id.clone());
    }
    let mut out: Vec<Bucket> = groups.into_iter().map(|(key, members)| Bucket { kind, key, members }).collect();
    if kind == BucketKind::Duration {
        out.sort_by(|a, b| duration_rank(&a.key).total_cmp(&duration_rank(&b.key)));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestId {
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
}

impl TestId {
    pub const ALL: [TestId; 6] = [TestId::T1, TestId::T2, TestId::T3, TestId::T4, TestId::T5, TestId::T6];

    /// Tests whose significance means more entities during the long one.
    pub fn is_positive(self) -> bool {
        matches!(self, TestId::T1 | TestId::T3 | TestId::T5)
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketTestResult {
    pub bucket_kind: BucketKind,
    pub bucket_key: String,
    pub test: TestId,
    pub n: usize,
    pub t_stat: f64,
    pub df: f64,
    pub p_value: f64,
    pub degenerate: bool,
    pub significant_at: Vec<f64>,
}

impl BucketTestResult {
    pub fn significant(&self, level: f64) -> bool {
        self.p_value < 1.0 - level
    }
}

/// T1..T6 for one bucket: average of before/after, before, and after, each
/// against the during counts, one-sided in both directions.
pub fn run_tests(
    bucket: &Bucket,
    counts: &HashMap<String, VicinityCounts>,
    levels: &[f64],
    kind: TTestKind,
) -> Result<Vec<BucketTestResult>> {
    let members: Vec<&VicinityCounts> = bucket.members.iter().filter_map(|id| counts.get(id)).collect();
    if members.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "bucket {} {} has {} member(s) with counts; need 2",
            bucket.kind.as_str(),
            bucket.key,
            members.len()
        )));
    }
    let during: Vec<f64> = members.iter().map(|c| c.s_r as f64).collect();
    let before: Vec<f64> = members.iter().map(|c| c.s_before as f64).collect();
    let after: Vec<f64> = members.iter().map(|c| c.s_after as f64).collect();
    let avg: Vec<f64> = members.iter().map(|c| (c.s_before + c.s_after) as f64 / 2.0).collect();
    let plan: [(TestId, &[f64], Alternative); 6] = [
        (TestId::T1, &avg, Alternative::MeanALess),
        (TestId::T2, &avg, Alternative::MeanAGreater),
        (TestId::T3, &before, Alternative::MeanALess),
        (TestId::T4, &before, Alternative::MeanAGreater),
        (TestId::T5, &after, Alternative::MeanALess),
        (TestId::T6, &after, Alternative::MeanAGreater),
    ];
    plan.into_iter()
        .map(|(test, sample, alt)| {
            let o = two_sample_t_test(sample, &during, alt, kind)?;
            Ok(BucketTestResult {
                bucket_kind: bucket.kind,
                bucket_key: bucket.key.clone(),
                test,
                n: members.len(),
                t_stat: o.t,
                df: o.df,
                p_value: o.p,
                degenerate: o.degenerate,
                significant_at: levels.iter().copied().filter(|&c| o.p < 1.0 - c).collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Impact {
    Positive,
    Negative,
    Mixed,
    None,
}

impl Impact {
    pub fn as_str(self) -> &'static str {
        match self {
            Impact::Positive => "Positive",
            Impact::Negative => "Negative",
            Impact::Mixed => "Mixed",
            Impact::None => "None",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactRow {
    pub bucket_kind: BucketKind,
    pub bucket_key: String,
    pub n: usize,
    pub impact: Impact,
    /// 1 − p per test, T1 first.
    pub confidence: Vec<f64>,
}

/// One row per bucket, in first-appearance order of `results`.
pub fn impact_summary(results: &[BucketTestResult], level: f64) -> Vec<ImpactRow> {
    let mut order: Vec<(BucketKind, String)> = Vec::new();
    let mut by_bucket: HashMap<(BucketKind, String), Vec<&BucketTestResult>> = HashMap::new();
    for r in results {
        let key = (r.bucket_kind, r.bucket_key.clone());
        if !by_bucket.contains_key(&key) {
            order.push(key.clone());
        }
        by_bucket.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let mut rs = by_bucket.remove(&key).expect("collected");
            rs.sort_by_key(|r| r.test);
            let pos = rs.iter().any(|r| r.test.is_positive() && r.significant(level));
            let neg = rs.iter().any(|r| !r.test.is_positive() && r.significant(level));
            let impact = match (pos, neg) {
                (true, true) => Impact::Mixed,
                (true, false) => Impact::Positive,
                (false, true) => Impact::Negative,
                (false, false) => Impact::None,
            };
            ImpactRow {
                bucket_kind: key.0,
                bucket_key: key.1,
                n: rs.first().map_or(0, |r| r.n),
                impact,
                confidence: rs.iter().map(|r| 1.0 - r.p_value).collect(),
            }
        })
        .collect()
}
