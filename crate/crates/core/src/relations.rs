//! Weak dependency (co-occurrence plus collocation) and child-parent
//! relations between entities.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::ingest::StationIndex;
use crate::model::{EntityKind, GeoEntity, Location, TrafficLocation};
use crate::numerics::haversine_unchecked;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChildParentRelation {
    pub parent_id: String,
    pub child_id: String,
    /// child.start − parent.start, seconds.
    pub lag: i64,
    /// Meters between traffic endpoints; absent when the parent is weather.
    pub distance: Option<f64>,
}

pub fn co_occurs(e1: &GeoEntity, e2: &GeoEntity, cfg: &PipelineConfig) -> bool {
    let thresh = cfg.t_thresh_for(e1.etype).max(cfg.t_thresh_for(e2.etype));
    (e1.start - e2.start).abs() <= thresh
}

fn traffic_pair_distance(a: &TrafficLocation, b: &TrafficLocation, d_thresh: f64) -> Option<f64> {
    if !a.matches(b) {
        return None;
    }
    let d = haversine_unchecked((a.lat, a.lon), (b.lat, b.lon));
    (d <= d_thresh).then_some(d)
}

pub fn collocated(e1: &GeoEntity, e2: &GeoEntity, cfg: &PipelineConfig, idx: &StationIndex) -> bool {
    match (&e1.loc, &e2.loc) {
        (Location::Traffic(a), Location::Traffic(b)) => traffic_pair_distance(a, b, cfg.d_thresh_m).is_some(),
        (Location::Weather(w), Location::Traffic(t)) | (Location::Traffic(t), Location::Weather(w)) => {
            match idx.station_for_zip(&t.zipcode) {
                Some(code) => code == w.airport_code,
                None => {
                    log::warn!("zipcode {} has no station; treated as not collocated", t.zipcode);
                    false
                }
            }
        }
        (Location::Weather(_), Location::Weather(_)) => false,
    }
}

/// The relation with `parent` as parent of `child`, if the pair qualifies.
pub fn relation_between(
    parent: &GeoEntity,
    child: &GeoEntity,
    cfg: &PipelineConfig,
    idx: &StationIndex,
) -> Option<ChildParentRelation> {
    if child.kind() == EntityKind::Weather || parent.start >= child.start {
        return None;
    }
    if !co_occurs(parent, child, cfg) || !collocated(parent, child, cfg, idx) {
        return None;
    }
    let distance = match (&parent.loc, &child.loc) {
        (Location::Traffic(a), Location::Traffic(b)) => Some(haversine_unchecked((a.lat, a.lon), (b.lat, b.lon))),
        _ => None,
    };
    Some(ChildParentRelation {
        parent_id: parent.id.clone(),
        child_id: child.id.clone(),
        lag: child.start - parent.start,
        distance,
    })
}

pub fn sort_relations(rels: &mut [ChildParentRelation]) {
    rels.sort_by(|a, b| (&a.child_id, a.lag, &a.parent_id).cmp(&(&b.child_id, b.lag, &b.parent_id)));
}

/// All child-parent relations. Candidates come from exact location-field
/// buckets (traffic pairs) and station buckets (weather parents), scanned in
/// start order within the widest co-occurrence window.
pub fn extract_relations(entities: &[GeoEntity], cfg: &PipelineConfig, idx: &StationIndex) -> Vec<ChildParentRelation> {
    let window = cfg.max_t_thresh();
    let mut by_street: HashMap<(&str, &str, &str, &str, &str), Vec<usize>> = HashMap::new();
    let mut by_station: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut unmapped = BTreeSet::new();
    for (i, e) in entities.iter().enumerate() {
        if let Location::Traffic(t) = &e.loc {
            by_street
                .entry((&t.street_name, t.street_side.as_str(), &t.zipcode, &t.city, &t.state))
                .or_default()
                .push(i);
            match idx.station_for_zip(&t.zipcode) {
                Some(code) => by_station.entry(code).or_default().push(i),
                None => {
                    unmapped.insert(t.zipcode.as_str());
                }
            }
        }
    }
    for zip in &unmapped {
        log::warn!("zipcode {zip} has no station; its entities get no weather parent");
    }
    let by_start = |v: &mut Vec<usize>| v.sort_by_key(|&i| (entities[i].start, i));

    let mut out = Vec::new();
    for members in by_street.values_mut() {
        by_start(members);
        for (pos, &p) in members.iter().enumerate() {
            let parent = &entities[p];
            for &c in &members[pos + 1..] {
                let child = &entities[c];
                if child.start - parent.start > window {
                    break;
                }
                if let Some(r) = relation_between(parent, child, cfg, idx) {
                    out.push(r);
                }
            }
        }
    }

    for members in by_station.values_mut() {
        by_start(members);
    }
    for w in entities.iter().filter(|e| e.kind() == EntityKind::Weather) {
        let Some(members) = w.weather_loc().and_then(|l| by_station.get(l.airport_code.as_str())) else {
            continue;
        };
        let first = members.partition_point(|&i| entities[i].start <= w.start);
        for &c in &members[first..] {
            let child = &entities[c];
            if child.start - w.start > window {
                break;
            }
            if let Some(r) = relation_between(w, child, cfg, idx) {
                out.push(r);
            }
        }
    }
    sort_relations(&mut out);
    out
}

pub const RELATION_COLUMNS: [&str; 4] = ["parent_id", "child_id", "lag_seconds", "distance_m"];

pub fn write_relations_csv<W: Write>(w: W, rels: &[ChildParentRelation]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(RELATION_COLUMNS)?;
    for r in rels {
        let d = r.distance.map(|d| d.to_string()).unwrap_or_default();
        wtr.write_record([r.parent_id.as_str(), &r.child_id, &r.lag.to_string(), &d])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_relations_csv<R: Read>(r: R) -> Result<Vec<ChildParentRelation>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let lag = field(2)
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad lag {:?}", field(2))))?;
        let distance = match field(3) {
            "" => None,
            s => Some(s.parse().map_err(|_| Error::InvalidInput(format!("bad distance {s:?}")))?),
        };
        out.push(ChildParentRelation {
            parent_id: field(0).to_string(),
            child_id: field(1).to_string(),
            lag,
            distance,
        });
    }
    Ok(out)
}
