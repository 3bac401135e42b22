//! Reading, cleaning and deriving the entity inputs.

mod dedup;
mod records;
mod stations;
mod weather;

pub use dedup::deduplicate;
pub use records::{
    entity_fields, parse_entities, parse_observations, parse_stations, write_entities_csv,
    write_entities_jsonl, write_rejects, Format, Parsed, RawRow, Reject, Schema, OBSERVATION_COLUMNS,
    STATION_COLUMNS, TRAFFIC_COLUMNS, WEATHER_COLUMNS,
};
pub use stations::{build_station_index, StationIndex};
pub use weather::{
    derive_thresholds, extract_weather_entities, observation_labels, Condition, WeatherObservation,
    WeatherThresholds,
};

use crate::error::Result;
use crate::model::TrafficLocation;

/// Reverse geocoding hook for rows that carry only coordinates. No
/// implementation ships with the crate.
pub trait Geocoder {
    fn geocode(&self, lat: f64, lon: f64) -> Result<TrafficLocation>;
}
