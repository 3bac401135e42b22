use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CompositeLabel, GeoEntity, Location, Timestamp};
use crate::numerics::percentile;

/// A traffic member's position and state, kept for centering and
/// state lookup after merges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSite {
    pub lat: f64,
    pub lon: f64,
    pub zipcode: String,
    pub state: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongEntity {
    pub id: String,
    pub label: CompositeLabel,
    pub start: Timestamp,
    pub end: Timestamp,
    /// Mean of the traffic members' coordinates; absent for all-weather.
    pub center: Option<(f64, f64)>,
    /// Stations of the weather members.
    pub stations: BTreeSet<String>,
    pub member_ids: BTreeSet<String>,
    pub sites: Vec<MemberSite>,
}

impl LongEntity {
    pub fn from_entity(e: &GeoEntity) -> Self {
        let (center, stations, sites) = match &e.loc {
            Location::Traffic(t) => (
                Some((t.lat, t.lon)),
                BTreeSet::new(),
                vec![MemberSite { lat: t.lat, lon: t.lon, zipcode: t.zipcode.clone(), state: t.state.clone() }],
            ),
            Location::Weather(w) => (None, [w.airport_code.clone()].into(), Vec::new()),
        };
        LongEntity {
            id: e.id.clone(),
            label: CompositeLabel::single(e.etype),
            start: e.start,
            end: e.end,
            center,
            stations,
            member_ids: [e.id.clone()].into(),
            sites,
        }
    }

    pub fn duration(&self) -> i64 {
        self.end - self.start
    }

    /// Both traffic and weather members.
    pub fn is_mixed(&self) -> bool {
        self.center.is_some() && !self.stations.is_empty()
    }

    /// Station code for CSV output: the smallest when several merged.
    pub fn airport_code(&self) -> Option<&str> {
        self.stations.iter().next().map(String::as_str)
    }
}

/// Duration at the configured percentile of all entity durations, seconds.
pub fn long_duration_threshold(entities: &[GeoEntity], q: f64) -> Result<f64> {
    if entities.is_empty() {
        return Err(Error::EmptyInput("entities for the long-duration threshold"));
    }
    let d: Vec<f64> = entities.iter().map(|e| e.duration() as f64).collect();
    percentile(&d, q)
}

/// Entities lasting at least `threshold` seconds, ordered by (start, id).
pub fn extract_long(entities: &[GeoEntity], threshold: f64) -> Vec<LongEntity> {
    let mut out: Vec<LongEntity> = entities
        .iter()
        .filter(|e| e.duration() as f64 >= threshold)
        .map(LongEntity::from_entity)
        .collect();
    out.sort_by(|a, b| (a.start, &a.id).cmp(&(b.start, &b.id)));
    out
}
