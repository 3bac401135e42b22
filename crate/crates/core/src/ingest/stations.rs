//! Zipcode to nearest airport station mapping.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GeoEntity, Location};
use crate::numerics::haversine;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StationIndex {
    pub stations: BTreeMap<String, (f64, f64)>,
    pub zip_to_station: BTreeMap<String, String>,
    /// Majority state among the traffic entities a station serves (ties to
    /// the smaller code). Stations serving no zipcode are absent.
    pub station_state: BTreeMap<String, String>,
}

impl StationIndex {
    pub fn station_for_zip(&self, zipcode: &str) -> Option<&str> {
        self.zip_to_station.get(zipcode).map(String::as_str)
    }

    pub fn validate(&self) -> Result<()> {
        for (zip, code) in &self.zip_to_station {
            if !self.stations.contains_key(code) {
                return Err(Error::Invariant(format!("zipcode {zip} maps to unknown station {code}")));
            }
        }
        Ok(())
    }

    /// Fills in station coordinates on weather entities that lack them.
    pub fn attach_coordinates(&self, entities: &mut [GeoEntity]) {
        for e in entities {
            if let Location::Weather(w) = &mut e.loc {
                if let Some(&(lat, lon)) = self.stations.get(&w.airport_code) {
                    w.lat.get_or_insert(lat);
                    w.lon.get_or_insert(lon);
                }
            }
        }
    }
}

/// Maps each zipcode seen in `traffic` to the station nearest the centroid
/// of that zipcode's entity coordinates; equidistant stations resolve to the
/// lexicographically smaller code.
pub fn build_station_index(stations: &[(String, f64, f64)], traffic: &[GeoEntity]) -> Result<StationIndex> {
    if stations.is_empty() {
        return Err(Error::EmptyInput("station list"));
    }
    let mut sorted: Vec<&(String, f64, f64)> = stations.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut index = StationIndex::default();
    for (code, lat, lon) in &sorted {
        if index.stations.insert(code.clone(), (*lat, *lon)).is_some() {
            return Err(Error::InvalidInput(format!("duplicate station {code}")));
        }
    }

    let mut sums: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
    for t in traffic.iter().filter_map(GeoEntity::traffic_loc) {
        let s = sums.entry(t.zipcode.as_str()).or_insert((0.0, 0.0, 0));
        s.0 += t.lat;
        s.1 += t.lon;
        s.2 += 1;
    }
    for (zip, (slat, slon, n)) in sums {
        let centroid = (slat / n as f64, slon / n as f64);
        let mut best: Option<(&str, f64)> = None;
        for (code, lat, lon) in &sorted {
            let d = haversine(centroid, (*lat, *lon))?;
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((code, d));
            }
        }
        let (code, _) = best.expect("non-empty station list");
        index.zip_to_station.insert(zip.to_string(), code.to_string());
    }

    let mut votes: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for t in traffic.iter().filter_map(GeoEntity::traffic_loc) {
        if let Some(code) = index.zip_to_station.get(&t.zipcode) {
            *votes.entry(code.as_str()).or_default().entry(t.state.as_str()).or_default() += 1;
        }
    }
    let mut station_state = BTreeMap::new();
    for (code, states) in votes {
        let mut best: Option<(&str, usize)> = None;
        for (state, n) in states {
            if best.is_none_or(|(_, bn)| n > bn) {
                best = Some((state, n));
            }
        }
        if let Some((state, _)) = best {
            station_state.insert(code.to_string(), state.to_string());
        }
    }
    index.station_state = station_state;
    Ok(index)
}
