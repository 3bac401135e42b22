//! Entity and observation files: CSV with a header row, or JSON-lines with
//! the same field names. Rows that cannot become a valid record are kept as
//! rejects with a reason; nothing is dropped silently.

use std::io::{BufRead, BufReader, Read, Write};
use std::sync::Arc;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::model::{
    format_timestamp, parse_timestamp, validate_entity_with, EntityKind, EntityType, GeoEntity,
    Location, Severity, StreetSide, TrafficLocation, WeatherLocation,
};

use super::weather::{Condition, WeatherObservation};

pub const TRAFFIC_COLUMNS: [&str; 11] = [
    "id",
    "type",
    "start",
    "end",
    "lat",
    "lon",
    "street_name",
    "street_side",
    "zipcode",
    "city",
    "state",
];
pub const WEATHER_COLUMNS: [&str; 5] = ["id", "type", "start", "end", "airport_code"];
pub const OBSERVATION_COLUMNS: [&str; 8] = [
    "station",
    "timestamp",
    "temperature",
    "humidity",
    "wind_speed",
    "pressure",
    "precipitation",
    "condition",
];
pub const STATION_COLUMNS: [&str; 3] = ["airport_code", "lat", "lon"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Traffic,
    Weather,
    /// Either kind; the type label decides. Used for intermediate files.
    Mixed,
}

impl Schema {
    fn required(self) -> &'static [&'static str] {
        match self {
            Schema::Traffic => &TRAFFIC_COLUMNS,
            Schema::Weather => &WEATHER_COLUMNS,
            Schema::Mixed => &["id", "type", "start", "end"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonLines,
}

impl Format {
    /// `.jsonl`, `.ndjson` and `.json` are JSON-lines; anything else is CSV.
    pub fn from_path(path: &std::path::Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "ndjson" | "json") => Format::JsonLines,
            _ => Format::Csv,
        }
    }
}

/// One input row as it appeared in the file.
#[derive(Debug, Clone, PartialEq)]
pub enum RawRow {
    Csv { headers: Arc<Vec<String>>, fields: Vec<String> },
    Json(Map<String, Value>),
}

impl RawRow {
    fn get(&self, key: &str) -> Option<String> {
        match self {
            RawRow::Csv { headers, fields } => headers
                .iter()
                .position(|h| h == key)
                .and_then(|i| fields.get(i))
                .map(|s| s.trim().to_string()),
            RawRow::Json(map) => match map.get(key)? {
                Value::Null => None,
                Value::String(s) => Some(s.trim().to_string()),
                other => Some(other.to_string()),
            },
        }
    }

    fn text(&self, key: &str) -> String {
        self.get(key).unwrap_or_default()
    }

    fn required(&self, key: &str) -> std::result::Result<String, String> {
        match self.get(key) {
            Some(s) if !s.is_empty() => Ok(s),
            _ => Err(format!("missing {key}")),
        }
    }

    fn number(&self, key: &str) -> std::result::Result<f64, String> {
        let s = self.required(key)?;
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("bad {key} {s:?}"))
    }

    fn opt_number(&self, key: &str) -> std::result::Result<Option<f64>, String> {
        match self.get(key) {
            Some(s) if !s.is_empty() => self.number(key).map(Some),
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reject {
    /// 1-based line number in the source (the CSV header is line 1).
    pub line: usize,
    pub row: RawRow,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub rejects: Vec<Reject>,
}

impl<T> Parsed<T> {
    pub fn rows(&self) -> usize {
        self.records.len() + self.rejects.len()
    }
}

/// A row plus a reason when it already failed structurally.
type RowRead = (usize, RawRow, Option<String>);

/// Reads every row of a CSV or JSON-lines stream. Fatal errors are I/O
/// failures and a CSV header missing required columns.
fn read_rows<R: Read>(reader: R, format: Format, required: &[&str]) -> Result<Vec<RowRead>> {
    let mut rows = Vec::new();
    match format {
        Format::Csv => {
            let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
            let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
            if let Some(missing) = required.iter().find(|c| !headers.iter().any(|h| h == *c)) {
                return Err(Error::InvalidInput(format!("header lacks required column {missing:?}")));
            }
            let headers = Arc::new(headers);
            let mut rec = csv::StringRecord::new();
            loop {
                let line = rdr.position().line() as usize;
                match rdr.read_record(&mut rec) {
                    Ok(false) => break,
                    Ok(true) => {
                        let fields: Vec<String> = rec.iter().map(String::from).collect();
                        let err = (fields.len() != headers.len())
                            .then(|| format!("expected {} fields, found {}", headers.len(), fields.len()));
                        rows.push((line, RawRow::Csv { headers: headers.clone(), fields }, err));
                    }
                    Err(e) if e.is_io_error() => return Err(e.into()),
                    Err(e) => {
                        let row = RawRow::Csv { headers: headers.clone(), fields: Vec::new() };
                        rows.push((line, row, Some(format!("unparseable row: {e}"))));
                    }
                }
            }
        }
        Format::JsonLines => {
            for (i, line) in BufReader::new(reader).lines().enumerate() {
                let line_no = i + 1;
                let text = line?;
                if text.trim().is_empty() {
                    continue;
                }
                let mut raw = Map::new();
                raw.insert("raw".into(), Value::String(text.clone()));
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(map)) => rows.push((line_no, RawRow::Json(map), None)),
                    Ok(_) => rows.push((line_no, RawRow::Json(raw), Some("line is not a JSON object".into()))),
                    Err(e) => rows.push((line_no, RawRow::Json(raw), Some(format!("bad JSON: {e}")))),
                }
            }
        }
    }
    Ok(rows)
}

fn collect<T>(rows: Vec<RowRead>, mut convert: impl FnMut(&RawRow) -> std::result::Result<T, String>) -> Parsed<T> {
    let mut out = Parsed { records: Vec::new(), rejects: Vec::new() };
    for (line, row, err) in rows {
        match err.map_or_else(|| convert(&row), Err) {
            Ok(v) => out.records.push(v),
            Err(reason) => out.rejects.push(Reject { line, row, reason }),
        }
    }
    out
}

fn entity_from_row(row: &RawRow, schema: Schema, states: &[String]) -> std::result::Result<GeoEntity, String> {
    let id = row.required("id")?;
    let label = row.required("type")?;
    let etype: EntityType = label.parse().map_err(|_| format!("unknown label {label:?}"))?;
    let expected = match schema {
        Schema::Traffic => Some(EntityKind::Traffic),
        Schema::Weather => Some(EntityKind::Weather),
        Schema::Mixed => None,
    };
    if expected.is_some_and(|k| k != etype.kind()) {
        return Err(format!("label {label:?} does not belong to this file's entity kind"));
    }
    let start = parse_timestamp(&row.required("start")?).map_err(|e| e.to_string())?;
    let end = parse_timestamp(&row.required("end")?).map_err(|e| e.to_string())?;
    let loc = match etype.kind() {
        EntityKind::Traffic => Location::Traffic(TrafficLocation {
            lat: row.number("lat")?,
            lon: row.number("lon")?,
            street_name: row.text("street_name"),
            street_side: StreetSide::parse(&row.text("street_side")).map_err(|e| e.to_string())?,
            zipcode: row.required("zipcode")?,
            city: row.text("city"),
            state: row.text("state"),
        }),
        EntityKind::Weather => Location::Weather(WeatherLocation {
            airport_code: row.required("airport_code")?,
            lat: row.opt_number("lat")?,
            lon: row.opt_number("lon")?,
        }),
    };
    let severity = match row.get("severity") {
        Some(s) if !s.is_empty() => Some(Severity::parse(&s).map_err(|e| e.to_string())?),
        _ => None,
    };
    let entity = GeoEntity { id, etype, start, end, loc, severity };
    let violations = validate_entity_with(&entity, states);
    if violations.is_empty() {
        Ok(entity)
    } else {
        Err(violations.join("; "))
    }
}

/// Parses entities of one schema. `states` is the state whitelist.
pub fn parse_entities<R: Read>(
    reader: R,
    schema: Schema,
    format: Format,
    states: &[String],
) -> Result<Parsed<GeoEntity>> {
    let rows = read_rows(reader, format, schema.required())?;
    Ok(collect(rows, |row| entity_from_row(row, schema, states)))
}

fn observation_from_row(row: &RawRow) -> std::result::Result<WeatherObservation, String> {
    let obs = WeatherObservation {
        station: row.required("station")?,
        timestamp: parse_timestamp(&row.required("timestamp")?).map_err(|e| e.to_string())?,
        temperature: row.number("temperature")?,
        humidity: row.opt_number("humidity")?.unwrap_or(f64::NAN),
        wind_speed: row.opt_number("wind_speed")?.unwrap_or(0.0),
        pressure: row.opt_number("pressure")?.unwrap_or(f64::NAN),
        precipitation: row.opt_number("precipitation")?.unwrap_or(0.0),
        condition: Condition::parse(&row.text("condition")).map_err(|e| e.to_string())?,
    };
    if obs.wind_speed < 0.0 {
        return Err("negative wind_speed".into());
    }
    if obs.precipitation < 0.0 {
        return Err("negative precipitation".into());
    }
    Ok(obs)
}

pub fn parse_observations<R: Read>(reader: R, format: Format) -> Result<Parsed<WeatherObservation>> {
    let required = ["station", "timestamp", "temperature", "condition"];
    let rows = read_rows(reader, format, &required)?;
    Ok(collect(rows, observation_from_row))
}

/// Station rows: `airport_code,lat,lon`.
pub fn parse_stations<R: Read>(reader: R, format: Format) -> Result<Parsed<(String, f64, f64)>> {
    let rows = read_rows(reader, format, &STATION_COLUMNS)?;
    Ok(collect(rows, |row| {
        let code = row.required("airport_code")?;
        let lat = row.number("lat")?;
        let lon = row.number("lon")?;
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err("coordinates out of range".into());
        }
        Ok((code, lat, lon))
    }))
}

/// The flat field list of an entity, in schema column order.
pub fn entity_fields(e: &GeoEntity) -> Vec<(&'static str, String)> {
    let mut f = vec![
        ("id", e.id.clone()),
        ("type", e.etype.as_str().to_string()),
        ("start", format_timestamp(e.start)),
        ("end", format_timestamp(e.end)),
    ];
    match &e.loc {
        Location::Traffic(t) => {
            f.push(("lat", t.lat.to_string()));
            f.push(("lon", t.lon.to_string()));
            f.push(("street_name", t.street_name.clone()));
            f.push(("street_side", t.street_side.as_str().to_string()));
            f.push(("zipcode", t.zipcode.clone()));
            f.push(("city", t.city.clone()));
            f.push(("state", t.state.clone()));
        }
        Location::Weather(w) => {
            f.push(("airport_code", w.airport_code.clone()));
        }
    }
    f
}

fn entity_json(e: &GeoEntity) -> Value {
    let mut m = Map::new();
    for (k, v) in entity_fields(e) {
        let value = match k {
            "lat" | "lon" => Value::from(v.parse::<f64>().unwrap_or(f64::NAN)),
            _ => Value::String(v),
        };
        m.insert(k.to_string(), value);
    }
    if let Location::Weather(w) = &e.loc {
        if let (Some(lat), Some(lon)) = (w.lat, w.lon) {
            m.insert("lat".into(), Value::from(lat));
            m.insert("lon".into(), Value::from(lon));
        }
    }
    if let Some(s) = e.severity {
        m.insert("severity".into(), Value::String(s.as_str().into()));
    }
    Value::Object(m)
}

/// One JSON object per line; traffic and weather entities may be mixed.
pub fn write_entities_jsonl<W: Write>(mut w: W, entities: &[GeoEntity]) -> Result<()> {
    for e in entities {
        serde_json::to_writer(&mut w, &entity_json(e))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// CSV in the traffic or weather column layout. Entities of the other kind
/// are an error.
pub fn write_entities_csv<W: Write>(w: W, entities: &[GeoEntity], kind: EntityKind) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    match kind {
        EntityKind::Traffic => wtr.write_record(TRAFFIC_COLUMNS)?,
        EntityKind::Weather => wtr.write_record(WEATHER_COLUMNS)?,
    }
    for e in entities {
        if e.kind() != kind {
            return Err(Error::InvalidInput(format!("entity {} is not {kind:?}", e.id)));
        }
        wtr.write_record(entity_fields(e).into_iter().map(|(_, v)| v))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Rejects as CSV (original columns plus `reject_reason`) when the source was
/// CSV, or as JSON-lines (original object plus `line` and `reject_reason`).
pub fn write_rejects<W: Write>(mut w: W, rejects: &[Reject], format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(w);
            let headers = rejects.iter().find_map(|r| match &r.row {
                RawRow::Csv { headers, .. } if !headers.is_empty() => Some(headers.clone()),
                _ => None,
            });
            let mut head: Vec<String> = headers.map(|h| h.to_vec()).unwrap_or_default();
            head.push("reject_reason".into());
            wtr.write_record(&head)?;
            for r in rejects {
                let mut rec = Vec::new();
                match &r.row {
                    RawRow::Csv { fields, .. } => rec.extend(fields.iter().cloned()),
                    RawRow::Json(m) => rec.push(Value::Object(m.clone()).to_string()),
                }
                rec.push(r.reason.clone());
                wtr.write_record(&rec)?;
            }
            wtr.flush()?;
        }
        Format::JsonLines => {
            for r in rejects {
                let mut m = match &r.row {
                    RawRow::Json(m) => m.clone(),
                    RawRow::Csv { headers, fields } => headers
                        .iter()
                        .zip(fields)
                        .map(|(h, f)| (h.clone(), Value::String(f.clone())))
                        .collect(),
                };
                m.insert("line".into(), Value::from(r.line));
                m.insert("reject_reason".into(), Value::String(r.reason.clone()));
                serde_json::to_writer(&mut w, &Value::Object(m))?;
                w.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}
