use std::collections::BTreeSet;

use crate::ingest::StationIndex;
use crate::model::CompositeLabel;
use crate::numerics::haversine_unchecked;

use super::entity::LongEntity;

pub fn intervals_intersect(a: &LongEntity, b: &LongEntity) -> bool {
    a.start <= b.end && b.start <= a.end
}

fn serves(idx: &StationIndex, stations: &BTreeSet<String>, other: &LongEntity) -> bool {
    other
        .sites
        .iter()
        .any(|s| idx.station_for_zip(&s.zipcode).is_some_and(|code| stations.contains(code)))
}

/// Traffic centers within `rho`, a shared station, or a station serving a
/// traffic member's zipcode.
pub fn long_collocated(a: &LongEntity, b: &LongEntity, rho: f64, idx: &StationIndex) -> bool {
    if let (Some(ca), Some(cb)) = (a.center, b.center) {
        if haversine_unchecked(ca, cb) <= rho {
            return true;
        }
    }
    if !a.stations.is_disjoint(&b.stations) {
        return true;
    }
    serves(idx, &a.stations, b) || serves(idx, &b.stations, a)
}

fn merge_group(group: Vec<LongEntity>) -> LongEntity {
    let first = &group[0];
    let id = if first.id.starts_with("merged-") { first.id.clone() } else { format!("merged-{}", first.id) };
    let label = CompositeLabel::merge(group.iter().map(|l| &l.label)).expect("non-empty group");
    let sites: Vec<_> = group.iter().flat_map(|l| l.sites.iter().cloned()).collect();
    let center = (!sites.is_empty()).then(|| {
        let n = sites.len() as f64;
        (sites.iter().map(|s| s.lat).sum::<f64>() / n, sites.iter().map(|s| s.lon).sum::<f64>() / n)
    });
    LongEntity {
        id,
        label,
        start: group.iter().map(|l| l.start).min().expect("non-empty"),
        end: group.iter().map(|l| l.end).max().expect("non-empty"),
        center,
        stations: group.iter().flat_map(|l| l.stations.iter().cloned()).collect(),
        member_ids: group.iter().flat_map(|l| l.member_ids.iter().cloned()).collect(),
        sites,
    }
}

/// Overlap merging: in (start, id) order, each remaining entity absorbs every
/// other one that intersects it in time and is collocated with it; passes
/// repeat until nothing merges. Output is in (start, id) order.
pub fn merge_overlaps(longs: &[LongEntity], rho: f64, idx: &StationIndex) -> Vec<LongEntity> {
    let mut working: Vec<LongEntity> = longs.to_vec();
    loop {
        working.sort_by(|a, b| (a.start, &a.id).cmp(&(b.start, &b.id)));
        let mut merged_any = false;
        let mut remaining: Vec<Option<LongEntity>> = working.into_iter().map(Some).collect();
        let mut next = Vec::new();
        for i in 0..remaining.len() {
            let Some(l) = remaining[i].take() else { continue };
            let mut group = vec![l];
            for slot in remaining.iter_mut().skip(i + 1) {
                let hit = slot
                    .as_ref()
                    .is_some_and(|o| intervals_intersect(&group[0], o) && long_collocated(&group[0], o, rho, idx));
                if hit {
                    group.push(slot.take().expect("checked"));
                }
            }
            if group.len() > 1 {
                merged_any = true;
                next.push(merge_group(group));
            } else {
                next.extend(group);
            }
        }
        working = next;
        if !merged_any {
            break;
        }
    }
    working.sort_by(|a, b| (a.start, &a.id).cmp(&(b.start, &b.id)));
    working
}
