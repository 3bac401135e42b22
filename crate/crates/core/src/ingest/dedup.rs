//! Explicit (same id) and implicit (same type, start and location)
//! duplicate removal.

use std::collections::HashSet;

use crate::model::{EntityType, GeoEntity, Location, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum LocKey {
    Traffic { lat: u64, lon: u64, street: String, side: &'static str, zip: String, city: String, state: String },
    Weather { station: String },
}

fn content_key(e: &GeoEntity) -> (EntityType, Timestamp, LocKey) {
    let loc = match &e.loc {
        Location::Traffic(t) => LocKey::Traffic {
            // -0.0 and 0.0 are the same coordinate
            lat: (t.lat + 0.0).to_bits(),
            lon: (t.lon + 0.0).to_bits(),
            street: t.street_name.clone(),
            side: t.street_side.as_str(),
            zip: t.zipcode.clone(),
            city: t.city.clone(),
            state: t.state.clone(),
        },
        Location::Weather(w) => LocKey::Weather { station: w.airport_code.clone() },
    };
    (e.etype, e.start, loc)
}

/// Keeps the first occurrence of every id and of every content key, in
/// input order. Returns `(kept, removed)`.
pub fn deduplicate(entities: Vec<GeoEntity>) -> (Vec<GeoEntity>, Vec<GeoEntity>) {
    let mut ids = HashSet::new();
    let mut contents = HashSet::new();
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for e in entities {
        let key = content_key(&e);
        if ids.contains(&e.id) || contents.contains(&key) {
            removed.push(e);
        } else {
            ids.insert(e.id.clone());
            contents.insert(key);
            kept.push(e);
        }
    }
    (kept, removed)
}
