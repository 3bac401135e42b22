//! Domain types shared by every stage: entity taxonomy, locations and the
//! entity record itself.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Seconds since the Unix epoch, UTC.
pub type Timestamp = i64;

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Parses an ISO-8601 timestamp. Values without an offset are taken as UTC.
pub fn parse_timestamp(s: &str) -> Result<Timestamp> {
    let s = s.trim();
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = chrono::NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt.and_utc().timestamp());
        }
    }
    Err(Error::InvalidInput(format!("bad timestamp {s:?}")))
}

/// Formats as `YYYY-MM-DDTHH:MM:SSZ`.
pub fn format_timestamp(t: Timestamp) -> String {
    match chrono::DateTime::from_timestamp(t, 0) {
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        None => t.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityKind {
    Traffic,
    Weather,
}

/// The fourteen base entity types: seven traffic, seven weather.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntityType {
    Accident,
    BrokenVehicle,
    Congestion,
    Construction,
    Event,
    LaneBlocked,
    FlowIncident,
    SevereCold,
    Fog,
    Hail,
    Rain,
    Snow,
    Storm,
    Precipitation,
}

impl EntityType {
    pub const ALL: [EntityType; 14] = [
        EntityType::Accident,
        EntityType::BrokenVehicle,
        EntityType::Congestion,
        EntityType::Construction,
        EntityType::Event,
        EntityType::LaneBlocked,
        EntityType::FlowIncident,
        EntityType::SevereCold,
        EntityType::Fog,
        EntityType::Hail,
        EntityType::Rain,
        EntityType::Snow,
        EntityType::Storm,
        EntityType::Precipitation,
    ];

    pub fn kind(self) -> EntityKind {
        use EntityType::*;
        match self {
            Accident | BrokenVehicle | Congestion | Construction | Event | LaneBlocked
            | FlowIncident => EntityKind::Traffic,
            SevereCold | Fog | Hail | Rain | Snow | Storm | Precipitation => EntityKind::Weather,
        }
    }

    pub fn as_str(self) -> &'static str {
        use EntityType::*;
        match self {
            Accident => "Accident",
            BrokenVehicle => "Broken-Vehicle",
            Congestion => "Congestion",
            Construction => "Construction",
            Event => "Event",
            LaneBlocked => "Lane-Blocked",
            FlowIncident => "Flow-Incident",
            SevereCold => "Severe-Cold",
            Fog => "Fog",
            Hail => "Hail",
            Rain => "Rain",
            Snow => "Snow",
            Storm => "Storm",
            Precipitation => "Precipitation",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        EntityType::ALL
            .iter()
            .copied()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown label {s:?}")))
    }
}

// Ordered by label text so composite labels sort the way they print.
impl Ord for EntityType {
    fn cmp(&self, other: &Self) -> Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl PartialOrd for EntityType {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for EntityType {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EntityType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Label of a long entity: one base type, or the sorted, de-duplicated
/// underscore-join of several after overlap merging.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CompositeLabel(Vec<EntityType>);

impl CompositeLabel {
    pub fn single(t: EntityType) -> Self {
        CompositeLabel(vec![t])
    }

    pub fn from_types<I: IntoIterator<Item = EntityType>>(types: I) -> Result<Self> {
        let mut v: Vec<EntityType> = types.into_iter().collect();
        if v.is_empty() {
            return Err(Error::InvalidInput("composite label needs at least one type".into()));
        }
        v.sort();
        v.dedup();
        Ok(CompositeLabel(v))
    }

    /// Union of the components of several labels.
    pub fn merge<'a, I: IntoIterator<Item = &'a CompositeLabel>>(labels: I) -> Result<Self> {
        Self::from_types(labels.into_iter().flat_map(|l| l.0.iter().copied()))
    }

    pub fn components(&self) -> &[EntityType] {
        &self.0
    }

    pub fn is_composite(&self) -> bool {
        self.0.len() > 1
    }
}

impl fmt::Display for CompositeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("_")?;
            }
            f.write_str(t.as_str())?;
        }
        Ok(())
    }
}

impl Serialize for CompositeLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CompositeLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for CompositeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split('_')
            .map(str::parse)
            .collect::<Result<Vec<EntityType>>>()?;
        let label = CompositeLabel::from_types(parts)?;
        if label.to_string() != s {
            return Err(Error::InvalidInput(format!("composite label {s:?} is not canonical")));
        }
        Ok(label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum StreetSide {
    R,
    L,
    #[default]
    Unknown,
}

impl StreetSide {
    pub fn as_str(self) -> &'static str {
        match self {
            StreetSide::R => "R",
            StreetSide::L => "L",
            StreetSide::Unknown => "",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "R" | "r" => Ok(StreetSide::R),
            "L" | "l" => Ok(StreetSide::L),
            "" | "Unknown" | "unknown" | "U" => Ok(StreetSide::Unknown),
            other => Err(Error::InvalidInput(format!("unknown street side {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Light,
    Moderate,
    Heavy,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Light => "Light",
            Severity::Moderate => "Moderate",
            Severity::Heavy => "Heavy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "light" => Ok(Severity::Light),
            "moderate" => Ok(Severity::Moderate),
            "heavy" => Ok(Severity::Heavy),
            other => Err(Error::InvalidInput(format!("unknown severity {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficLocation {
    pub lat: f64,
    pub lon: f64,
    pub street_name: String,
    pub street_side: StreetSide,
    pub zipcode: String,
    pub city: String,
    pub state: String,
}

impl TrafficLocation {
    /// All fields except the coordinates agree.
    pub fn matches(&self, other: &TrafficLocation) -> bool {
        self.street_name == other.street_name
            && self.street_side == other.street_side
            && self.zipcode == other.zipcode
            && self.city == other.city
            && self.state == other.state
    }
}

/// Station coordinates are filled in from the station index when known.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherLocation {
    pub airport_code: String,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Location {
    Traffic(TrafficLocation),
    Weather(WeatherLocation),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoEntity {
    pub id: String,
    pub etype: EntityType,
    pub start: Timestamp,
    pub end: Timestamp,
    pub loc: Location,
    pub severity: Option<Severity>,
}

impl GeoEntity {
    pub fn kind(&self) -> EntityKind {
        self.etype.kind()
    }

    pub fn duration(&self) -> i64 {
        self.end - self.start
    }

    pub fn traffic_loc(&self) -> Option<&TrafficLocation> {
        match &self.loc {
            Location::Traffic(t) => Some(t),
            Location::Weather(_) => None,
        }
    }

    pub fn weather_loc(&self) -> Option<&WeatherLocation> {
        match &self.loc {
            Location::Weather(w) => Some(w),
            Location::Traffic(_) => None,
        }
    }

    /// Point coordinates: the entity's own for traffic, the station's for weather.
    pub fn coords(&self) -> Option<(f64, f64)> {
        match &self.loc {
            Location::Traffic(t) => Some((t.lat, t.lon)),
            Location::Weather(w) => w.lat.zip(w.lon),
        }
    }
}

/// Contiguous US states plus DC.
pub const CONTIGUOUS_US_STATES: [&str; 49] = [
    "AL", "AZ", "AR", "CA", "CO", "CT", "DE", "DC", "FL", "GA", "ID", "IL", "IN", "IA", "KS",
    "KY", "LA", "ME", "MD", "MA", "MI", "MN", "MS", "MO", "MT", "NE", "NV", "NH", "NJ", "NM",
    "NY", "NC", "ND", "OH", "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX", "UT", "VT", "VA",
    "WA", "WV", "WI", "WY",
];

/// Returns every invariant violation of `e`; empty means valid. Uses the
/// default contiguous-US state whitelist.
pub fn validate_entity(e: &GeoEntity) -> Vec<String> {
    validate_entity_with(e, &CONTIGUOUS_US_STATES)
}

pub fn validate_entity_with<S: AsRef<str>>(e: &GeoEntity, states: &[S]) -> Vec<String> {
    let mut out = Vec::new();
    if e.id.trim().is_empty() {
        out.push("empty id".to_string());
    }
    if e.start > e.end {
        out.push("start after end".to_string());
    }
    match (&e.loc, e.kind()) {
        (Location::Traffic(t), EntityKind::Traffic) => {
            if !(-90.0..=90.0).contains(&t.lat) {
                out.push("lat out of range".to_string());
            }
            if !(-180.0..=180.0).contains(&t.lon) {
                out.push("lon out of range".to_string());
            }
            if !states.iter().any(|s| s.as_ref() == t.state) {
                out.push(format!("state {:?} not in whitelist", t.state));
            }
        }
        (Location::Weather(w), EntityKind::Weather) => {
            if w.airport_code.trim().is_empty() {
                out.push("empty airport_code".to_string());
            }
            if let Some(lat) = w.lat {
                if !(-90.0..=90.0).contains(&lat) {
                    out.push("lat out of range".to_string());
                }
            }
            if let Some(lon) = w.lon {
                if !(-180.0..=180.0).contains(&lon) {
                    out.push("lon out of range".to_string());
                }
            }
        }
        (Location::Traffic(_), EntityKind::Weather) => {
            out.push("weather entity with traffic location".to_string());
        }
        (Location::Weather(_), EntityKind::Traffic) => {
            out.push("traffic entity with weather location".to_string());
        }
    }
    out
}
