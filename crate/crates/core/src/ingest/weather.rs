//! Weather observations to weather entities: threshold derivation by 1-D
//! K-means and the per-station labelling and merging pass.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EntityType, GeoEntity, Location, Severity, Timestamp, WeatherLocation};
use crate::numerics::kmeans;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    Clear,
    Snow,
    Rain,
    Fog,
    Hail,
    Thunderstorm,
}

impl Condition {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clear" => Ok(Condition::Clear),
            "snow" => Ok(Condition::Snow),
            "rain" => Ok(Condition::Rain),
            "fog" => Ok(Condition::Fog),
            "hail" => Ok(Condition::Hail),
            "thunderstorm" => Ok(Condition::Thunderstorm),
            other => Err(Error::InvalidInput(format!("unknown condition {other:?}"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Clear => "Clear",
            Condition::Snow => "Snow",
            Condition::Rain => "Rain",
            Condition::Fog => "Fog",
            Condition::Hail => "Hail",
            Condition::Thunderstorm => "Thunderstorm",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeatherObservation {
    pub station: String,
    pub timestamp: Timestamp,
    /// °C
    pub temperature: f64,
    /// Fraction; NaN when not reported.
    pub humidity: f64,
    /// km/h
    pub wind_speed: f64,
    /// hPa; NaN when not reported.
    pub pressure: f64,
    /// mm
    pub precipitation: f64,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherThresholds {
    pub temperature_centers: [f64; 5],
    pub wind_centers: [f64; 3],
    pub rain_centers: [f64; 3],
    pub snow_centers: [f64; 3],
}

impl Default for WeatherThresholds {
    fn default() -> Self {
        WeatherThresholds {
            temperature_centers: [-23.7, -8.6, 6.7, 21.3, 35.8],
            wind_centers: [13.2, 36.2, 60.0],
            rain_centers: [2.5, 7.1, 11.6],
            snow_centers: [0.6, 1.7, 2.5],
        }
    }
}

impl WeatherThresholds {
    pub fn validate(&self) -> Result<()> {
        let lists: [(&str, &[f64]); 4] = [
            ("temperature", &self.temperature_centers),
            ("wind_speed", &self.wind_centers),
            ("rain", &self.rain_centers),
            ("snow", &self.snow_centers),
        ];
        for (name, xs) in lists {
            if xs.iter().any(|x| !x.is_finite()) || xs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(format!("{name} centers not strictly ascending")));
            }
        }
        Ok(())
    }
}

fn centers<const K: usize>(attribute: &'static str, values: &[f64], seed: u64) -> Result<[f64; K]> {
    let mut distinct: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < K {
        return Err(Error::InsufficientDistinct { attribute: attribute.into(), needed: K, found: distinct.len() });
    }
    let points: Vec<Vec<f64>> = values.iter().filter(|v| v.is_finite()).map(|&v| vec![v]).collect();
    let fit = kmeans(&points, K, seed, 8)?;
    let mut c: Vec<f64> = fit.centers.iter().map(|c| c[0]).collect();
    c.sort_by(f64::total_cmp);
    Ok(c.try_into().expect("k centers"))
}

/// Clusters temperature (K=5), wind speed, and Rain/Snow precipitation (K=3
/// each) and returns the sorted centers.
pub fn derive_thresholds(obs: &[WeatherObservation], seed: u64) -> Result<WeatherThresholds> {
    let temps: Vec<f64> = obs.iter().map(|o| o.temperature).collect();
    let winds: Vec<f64> = obs.iter().map(|o| o.wind_speed).collect();
    let precip_of = |c: Condition| -> Vec<f64> {
        obs.iter().filter(|o| o.condition == c).map(|o| o.precipitation).collect()
    };
    Ok(WeatherThresholds {
        temperature_centers: centers("temperature", &temps, seed)?,
        wind_centers: centers("wind_speed", &winds, seed)?,
        rain_centers: centers("rain_precipitation", &precip_of(Condition::Rain), seed)?,
        snow_centers: centers("snow_precipitation", &precip_of(Condition::Snow), seed)?,
    })
}

fn intensity(value: f64, centers: &[f64; 3]) -> Severity {
    let mut best = 0;
    for i in 1..3 {
        if (value - centers[i]).abs() < (value - centers[best]).abs() {
            best = i;
        }
    }
    [Severity::Light, Severity::Moderate, Severity::Heavy][best]
}

/// Labels carried by one observation, each with an optional intensity.
pub fn observation_labels(o: &WeatherObservation, th: &WeatherThresholds) -> Vec<(EntityType, Option<Severity>)> {
    let mut out = Vec::new();
    match o.condition {
        Condition::Fog => out.push((EntityType::Fog, None)),
        Condition::Hail => out.push((EntityType::Hail, None)),
        Condition::Rain => out.push((EntityType::Rain, Some(intensity(o.precipitation, &th.rain_centers)))),
        Condition::Snow => out.push((EntityType::Snow, Some(intensity(o.precipitation, &th.snow_centers)))),
        Condition::Clear | Condition::Thunderstorm => {}
    }
    if o.wind_speed >= th.wind_centers[2] {
        out.push((EntityType::Storm, None));
    }
    if o.temperature <= th.temperature_centers[0] {
        out.push((EntityType::SevereCold, None));
    }
    if o.precipitation > 0.0 && !matches!(o.condition, Condition::Rain | Condition::Snow) {
        out.push((EntityType::Precipitation, None));
    }
    out
}

struct Open {
    start: Timestamp,
    last: Timestamp,
    severity: Option<Severity>,
}

fn close(station: &str, label: EntityType, open: Open, out: &mut Vec<GeoEntity>) {
    out.push(GeoEntity {
        id: format!("{station}-{}-{}", label.as_str(), open.start),
        etype: label,
        start: open.start,
        end: open.last,
        loc: Location::Weather(WeatherLocation { airport_code: station.to_string(), lat: None, lon: None }),
        severity: open.severity,
    });
}

/// Merges runs of same-labelled consecutive observations per station. A run
/// closes on an observation lacking the label or on a gap above `max_gap`.
/// Merged intensity is the strongest seen in the run. Output is ordered by
/// (station, start, label).
pub fn extract_weather_entities(
    obs: &[WeatherObservation],
    th: &WeatherThresholds,
    max_gap: i64,
) -> Result<Vec<GeoEntity>> {
    if max_gap <= 0 {
        return Err(Error::InvalidInput("max_gap must be positive".into()));
    }
    if let Some(w) = obs
        .windows(2)
        .find(|w| (w[0].station.as_str(), w[0].timestamp) > (w[1].station.as_str(), w[1].timestamp))
    {
        return Err(Error::Unsorted(format!(
            "observation {}@{} precedes {}@{}",
            w[0].station, w[0].timestamp, w[1].station, w[1].timestamp
        )));
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < obs.len() {
        let station = obs[i].station.as_str();
        let mut open: BTreeMap<EntityType, Open> = BTreeMap::new();
        let mut prev: Option<Timestamp> = None;
        while i < obs.len() && obs[i].station == station {
            let o = &obs[i];
            let labels = observation_labels(o, th);
            let gap_ok = prev.is_some_and(|p| o.timestamp - p <= max_gap);
            let stale: Vec<EntityType> = open
                .keys()
                .copied()
                .filter(|l| !gap_ok || !labels.iter().any(|(x, _)| x == l))
                .collect();
            for l in stale {
                let run = open.remove(&l).expect("present");
                close(station, l, run, &mut out);
            }
            for (label, sev) in labels {
                let run = open.entry(label).or_insert(Open { start: o.timestamp, last: o.timestamp, severity: None });
                run.last = o.timestamp;
                run.severity = run.severity.max(sev);
            }
            prev = Some(o.timestamp);
            i += 1;
        }
        for (l, run) in open {
            close(station, l, run, &mut out);
        }
    }
    out.sort_by(|a, b| {
        let sa = a.weather_loc().map(|w| w.airport_code.as_str());
        let sb = b.weather_loc().map(|w| w.airport_code.as_str());
        (sa, a.start, a.etype).cmp(&(sb, b.start, b.etype))
    });
    Ok(out)
}
