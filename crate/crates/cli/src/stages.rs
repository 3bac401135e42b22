//! Stage bodies. Each reads its inputs from the output directory and
//! returns the artifacts it produces; the driver handles caching and
//! writing.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use geopattern::forest::{build_forest, read_forests_jsonl, resolve_parents, write_forests_jsonl, Forest};
use geopattern::ingest::{
    build_station_index, deduplicate, derive_thresholds, extract_weather_entities, parse_entities,
    parse_observations, parse_stations, write_entities_jsonl, write_rejects, Format, Parsed, Schema, StationIndex,
    WeatherObservation, WeatherThresholds,
};
use geopattern::longterm::{
    bucketize, estimate_vicinity_radius, extract_long, impact_summary, long_duration_threshold, merge_overlaps,
    run_tests, sample_points, vicinity_counts, write_long_entities_csv, write_test_results_csv, BucketKind,
    BucketTestResult, RadiusEstimate, VicinityCounts,
};
use geopattern::mining::{
    core_state_patterns, mine, pattern_occurrence_metadata, FrequentPattern, PatternRow, TreePattern,
};
use geopattern::model::{EntityKind, GeoEntity};
use geopattern::regions::{build_state_vectors, cluster_states, ClusterReport, RegionParams};
use geopattern::relations::{extract_relations, read_relations_csv, write_relations_csv};
use geopattern::PipelineConfig;

use crate::error::CliError;
use crate::fmt::sig6;
use crate::manifest::{Artifact, Driver, Input, Stage};

pub const ENTITIES: &str = "entities.jsonl";
pub const STATION_INDEX: &str = "station_index.json";
pub const REJECTS: &str = "rejects.jsonl";
pub const INGEST_SUMMARY: &str = "ingest_summary.json";
pub const THRESHOLDS: &str = "thresholds.json";
pub const RELATIONS: &str = "relations.csv";
pub const FORESTS: &str = "forests.jsonl";
pub const PATTERNS: &str = "patterns.csv";
pub const CLUSTERS: &str = "clusters.json";
pub const LONG_ENTITIES: &str = "long_entities.csv";
pub const VICINITY: &str = "vicinity.csv";
pub const TESTS: &str = "tests.csv";
pub const IMPACT: &str = "impact.csv";
pub const LONGTERM: &str = "longterm.json";

pub const REPORT_SHORT: &str = "reports/short_patterns.csv";
pub const REPORT_CLUSTERS: &str = "reports/clusters.json";
pub const REPORT_LONGTERM: &str = "reports/longterm.csv";
pub const REPORT_IMPACT: &str = "reports/longterm_impact.csv";
pub const REPORT_SUMMARY: &str = "reports/summary.json";

fn open(d: &Driver, name: &str) -> Result<BufReader<File>, CliError> {
    Ok(BufReader::new(File::open(d.path(name))?))
}

fn open_raw(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut b = serde_json::to_vec_pretty(v).map_err(|e| CliError::internal(e.to_string()))?;
    b.push(b'\n');
    Ok(b)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> geopattern::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn read_entities(d: &Driver, cfg: &PipelineConfig) -> Result<Vec<GeoEntity>, CliError> {
    let parsed = parse_entities(open(d, ENTITIES)?, Schema::Mixed, Format::JsonLines, &cfg.state_whitelist)?;
    if let Some(r) = parsed.rejects.first() {
        return Err(CliError::data(format!("{ENTITIES} line {}: {}; rerun `geopattern ingest`", r.line, r.reason)));
    }
    Ok(parsed.records)
}

pub fn read_station_index(d: &Driver) -> Result<StationIndex, CliError> {
    let idx: StationIndex = serde_json::from_reader(open(d, STATION_INDEX)?)?;
    idx.validate()?;
    Ok(idx)
}

fn required<'a>(p: &'a Option<std::path::PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    p.as_deref().ok_or_else(|| CliError::config(format!("{key} is not set (config key or flag)")))
}

pub fn ingest_inputs(cfg: &PipelineConfig) -> Result<Vec<Input>, CliError> {
    let mut v = vec![Input::Raw(required(&cfg.traffic_path, "traffic_path")?.to_path_buf())];
    for p in [&cfg.weather_path, &cfg.stations_path, &cfg.observations_path].into_iter().flatten() {
        v.push(Input::Raw(p.clone()));
    }
    Ok(v)
}

pub fn read_observations(path: &Path) -> Result<Parsed<WeatherObservation>, CliError> {
    Ok(parse_observations(open_raw(path)?, Format::from_path(path))?)
}

pub fn thresholds_from(obs: &[WeatherObservation], seed: u64) -> Result<WeatherThresholds, CliError> {
    let th = derive_thresholds(obs, seed)?;
    th.validate()?;
    Ok(th)
}

#[derive(Serialize)]
struct SourceCounts {
    rows: usize,
    rejects: usize,
}

pub fn ingest(_d: &Driver, cfg: &PipelineConfig) -> Result<Vec<Artifact>, CliError> {
    let mut sources: BTreeMap<&str, SourceCounts> = BTreeMap::new();
    let mut reject_bytes = Vec::new();
    let traffic_path = required(&cfg.traffic_path, "traffic_path")?;
    let traffic = parse_entities(
        open_raw(traffic_path)?,
        Schema::Traffic,
        Format::from_path(traffic_path),
        &cfg.state_whitelist,
    )?;
    sources.insert("traffic", SourceCounts { rows: traffic.rows(), rejects: traffic.rejects.len() });
    write_rejects(&mut reject_bytes, &traffic.rejects, Format::JsonLines)?;
    let mut entities = traffic.records;

    if let Some(p) = &cfg.weather_path {
        let weather = parse_entities(open_raw(p)?, Schema::Weather, Format::from_path(p), &cfg.state_whitelist)?;
        sources.insert("weather", SourceCounts { rows: weather.rows(), rejects: weather.rejects.len() });
        write_rejects(&mut reject_bytes, &weather.rejects, Format::JsonLines)?;
        entities.extend(weather.records);
    }

    let mut artifacts = Vec::new();
    if let Some(p) = &cfg.observations_path {
        let parsed = read_observations(p)?;
        sources.insert("observations", SourceCounts { rows: parsed.rows(), rejects: parsed.rejects.len() });
        write_rejects(&mut reject_bytes, &parsed.rejects, Format::JsonLines)?;
        let mut obs = parsed.records;
        obs.sort_by(|a, b| (&a.station, a.timestamp).cmp(&(&b.station, b.timestamp)));
        let th = thresholds_from(&obs, cfg.rng_seed)?;
        entities.extend(extract_weather_entities(&obs, &th, cfg.weather_max_gap_s)?);
        artifacts.push(Artifact::new(THRESHOLDS, json_bytes(&th)?));
    }

    let (mut kept, removed) = deduplicate(entities);
    let traffic_only: Vec<GeoEntity> = kept.iter().filter(|e| e.kind() == EntityKind::Traffic).cloned().collect();
    let idx = match &cfg.stations_path {
        Some(p) => {
            let stations = parse_stations(open_raw(p)?, Format::from_path(p))?;
            sources.insert("stations", SourceCounts { rows: stations.rows(), rejects: stations.rejects.len() });
            write_rejects(&mut reject_bytes, &stations.rejects, Format::JsonLines)?;
            build_station_index(&stations.records, &traffic_only)?
        }
        None => {
            log::warn!("no stations_path: weather entities will not relate to traffic");
            StationIndex::default()
        }
    };
    idx.attach_coordinates(&mut kept);

    let summary = json!({
        "sources": sources,
        "duplicates_removed": removed.len(),
        "traffic_entities": traffic_only.len(),
        "weather_entities": kept.len() - traffic_only.len(),
        "stations": idx.stations.len(),
        "zipcodes": idx.zip_to_station.len(),
    });
    artifacts.push(Artifact::new(ENTITIES, csv_bytes(|b| write_entities_jsonl(b, &kept))?));
    artifacts.push(Artifact::new(STATION_INDEX, json_bytes(&idx)?));
    artifacts.push(Artifact::new(REJECTS, reject_bytes));
    artifacts.push(Artifact::new(INGEST_SUMMARY, json_bytes(&summary)?));
    Ok(artifacts)
}

pub fn relations(d: &Driver, cfg: &PipelineConfig) -> Result<Vec<Artifact>, CliError> {
    let entities = read_entities(d, cfg)?;
    let idx = read_station_index(d)?;
    let rels = extract_relations(&entities, cfg, &idx);
    log::info!("{} child-parent relations", rels.len());
    Ok(vec![Artifact::new(RELATIONS, csv_bytes(|b| write_relations_csv(b, &rels))?)])
}

pub fn forest(d: &Driver, cfg: &PipelineConfig) -> Result<Vec<Artifact>, CliError> {
    let rels = read_relations_csv(open(d, RELATIONS)?)?;
    let entities = read_entities(d, cfg)?;
    let resolved = resolve_parents(&rels, cfg.parent_pick);
    let forests = build_forest(&resolved, &entities, cfg.tree_node_cap)?;
    log::info!(
        "{} trees in {} city forests",
        forests.iter().map(|f| f.trees.len()).sum::<usize>(),
        forests.len()
    );
    Ok(vec![Artifact::new(FORESTS, csv_bytes(|b| write_forests_jsonl(b, &forests))?)])
}

pub fn read_forests(d: &Driver) -> Result<Vec<Forest>, CliError> {
    Ok(read_forests_jsonl(open(d, FORESTS)?)?)
}

pub fn mine_short(d: &Driver, cfg: &PipelineConfig) -> Result<Vec<Artifact>, CliError> {
    let forests = read_forests(d)?;
    let per_forest: Vec<Vec<PatternRow>> = forests
        .par_iter()
        .map(|f| {
            mine(f, cfg)
                .into_iter()
                .map(|p| {
                    let occ = pattern_occurrence_metadata(f, &p.pattern, cfg.tz_offset_s(&f.state), cfg.road_heuristic)?;
                    Ok(PatternRow { pattern: p, occurrence: Some(occ) })
                })
                .collect::<geopattern::Result<Vec<_>>>()
        })
        .collect::<geopattern::Result<_>>()?;
    let rows: Vec<PatternRow> = per_forest.into_iter().flatten().collect();
    log::info!("{} frequent patterns over {} forests", rows.len(), forests.len());
    Ok(vec![Artifact::new(PATTERNS, csv_bytes(|b| geopattern::mining::write_patterns_csv(b, &rows, sig6))?)])
}

#[derive(Debug, Deserialize)]
pub struct PatternCsvRow {
    pub state: String,
    pub city: String,
    pub encoding: String,
    pub node_count: usize,
    pub tree_count: usize,
    pub support: f64,
}

pub fn read_patterns(d: &Driver) -> Result<Vec<PatternCsvRow>, CliError> {
    let mut rdr = csv::Reader::from_reader(open(d, PATTERNS)?);
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

pub fn regions(d: &Driver, cfg: &PipelineConfig) -> Result<Vec<Artifact>, CliError> {
    let rows = read_patterns(d)?;
    let found: Vec<FrequentPattern> = rows
        .into_iter()
        .map(|r| {
            Ok(FrequentPattern {
                pattern: r.encoding.parse::<TreePattern>()?,
                tree_count: r.tree_count,
                support: r.support,
                state: r.state,
                city: r.city,
            })
        })
        .collect::<geopattern::Result<_>>()?;
    let per_state: BTreeMap<String, BTreeSet<TreePattern>> = core_state_patterns(&found)
        .into_iter()
        .map(|(s, pats)| (s, pats.into_keys().collect()))
        .collect();
    let matrix = build_state_vectors(&per_state);
    let report = cluster_states(
        &matrix,
        &RegionParams {
            k_min: cfg.k_min,
            k_max: cfg.k_max,
            restarts: cfg.kmeans_restarts,
            seed: cfg.rng_seed,
            distinguishing_share: cfg.distinguishing_share,
        },
    )?;
    log::info!("{} states grouped into K={} regions", matrix.vectors.len(), report.k);
    Ok(vec![Artifact::new(CLUSTERS, json_bytes(&report)?)])
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LongtermSummary {
    pub threshold_s: f64,
    pub long_entities: usize,
    pub merged_entities: usize,
    pub radius_m: f64,
    pub rho_m: f64,
    pub estimate: Option<RadiusEstimate>,
    pub skipped_buckets: Vec<String>,
}

fn radius(entities: &[GeoEntity], cfg: &PipelineConfig) -> Result<(f64, Option<RadiusEstimate>), CliError> {
    if let Some(r) = cfg.vicinity_radius_m {
        return Ok((r, None));
    }
    let coords: Vec<(f64, f64)> = entities.iter().filter_map(|e| e.traffic_loc().map(|t| (t.lat, t.lon))).collect();
    let s1 = sample_points(&coords, cfg.radius_sample_s1, cfg.rng_seed);
    let s2 = sample_points(&s1, cfg.radius_sample_s2.min(s1.len() / 4), cfg.rng_seed.wrapping_add(1));
    let est = estimate_vicinity_radius(&s1, &s2)
        .map_err(|e| CliError::data(format!("{e}; or set vicinity_radius_m")))?;
    Ok((est.radius_m, Some(est)))
}

pub fn longterm(d: &Driver, cfg: &PipelineConfig) -> Result<Vec<Artifact>, CliError> {
    let entities = read_entities(d, cfg)?;
    let idx = read_station_index(d)?;
    let threshold = long_duration_threshold(&entities, cfg.long_duration_percentile)?;
    let longs = extract_long(&entities, threshold);
    let (r, estimate) = radius(&entities, cfg)?;
    let rho = cfg.merge_rho_m.unwrap_or(r);
    let merged = merge_overlaps(&longs, rho, &idx);
    let counts = vicinity_counts(&merged, &entities, r, cfg.before_after_gap_days, &idx)?;
    let by_id: HashMap<String, VicinityCounts> = counts.iter().map(|c| (c.long_id.clone(), c.clone())).collect();

    let buckets: Vec<_> = BucketKind::ALL
        .iter()
        .flat_map(|&k| bucketize(&merged, k, &cfg.duration_edges_h, &idx))
        .collect();
    let mut skipped = Vec::new();
    let testable: Vec<_> = buckets
        .into_iter()
        .filter(|b| {
            let ok = b.members.len() >= 2;
            if !ok {
                log::info!("bucket {} {} has one long entity; no tests", b.kind.as_str(), b.key);
                skipped.push(format!("{}:{}", b.kind.as_str(), b.key));
            }
            ok
        })
        .collect();
    let results: Vec<BucketTestResult> = testable
        .par_iter()
        .map(|b| run_tests(b, &by_id, &cfg.significance_levels, cfg.t_test))
        .collect::<geopattern::Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut vic = csv::Writer::from_writer(Vec::new());
    for c in &counts {
        vic.serialize(c)?;
    }
    let vic = vic.into_inner().map_err(|e| CliError::internal(e.to_string()))?;

    let summary = LongtermSummary {
        threshold_s: threshold,
        long_entities: longs.len(),
        merged_entities: merged.len(),
        radius_m: r,
        rho_m: rho,
        estimate,
        skipped_buckets: skipped,
    };
    log::info!(
        "threshold {:.0} s, {} long entities, {} after merging, R = {:.0} m",
        threshold,
        longs.len(),
        merged.len(),
        r
    );
    Ok(vec![
        Artifact::new(LONG_ENTITIES, csv_bytes(|b| write_long_entities_csv(b, &merged, sig6))?),
        Artifact::new(VICINITY, vic),
        Artifact::new(TESTS, csv_bytes(|b| write_test_results_csv(b, &results, cfg.impact_level, sig6))?),
        Artifact::new(IMPACT, impact_csv(&results, cfg.impact_level)?),
        Artifact::new(LONGTERM, json_bytes(&summary)?),
    ])
}

fn impact_csv(results: &[BucketTestResult], level: f64) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bucket_kind", "bucket_key", "n", "impact", "conf_T1", "conf_T2", "conf_T3", "conf_T4", "conf_T5", "conf_T6"])?;
    for row in impact_summary(results, level) {
        let mut rec = vec![
            row.bucket_kind.as_str().to_string(),
            row.bucket_key.clone(),
            row.n.to_string(),
            row.impact.as_str().to_string(),
        ];
        rec.extend(row.confidence.iter().map(|&c| sig6(c)));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| CliError::internal(e.to_string()))
}

/// Rounds every float in a JSON tree to six significant digits.
fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            if let Some(r) = sig6(x).parse::<f64>().ok().and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(xs) => xs.iter_mut().for_each(round_json),
        Value::Object(m) => m.values_mut().for_each(round_json),
        _ => {}
    }
}

pub fn report(d: &Driver, _cfg: &PipelineConfig) -> Result<Vec<Artifact>, CliError> {
    let short = std::fs::read(d.path(PATTERNS))?;
    let mut clusters: Value = serde_json::from_reader(open(d, CLUSTERS)?)?;
    // shape check
    let _: ClusterReport = serde_json::from_value(clusters.clone())?;
    round_json(&mut clusters);
    let tests = std::fs::read(d.path(TESTS))?;
    let impact = std::fs::read(d.path(IMPACT))?;
    let lt: LongtermSummary = serde_json::from_reader(open(d, LONGTERM)?)?;

    let relation_count = csv::Reader::from_reader(open(d, RELATIONS)?).records().count();
    let forests = read_forests(d)?;
    let patterns = read_patterns(d)?;
    let unique: BTreeSet<&str> = patterns.iter().filter(|p| p.node_count > 1).map(|p| p.encoding.as_str()).collect();
    let mut summary = json!({
        "relation_count": relation_count,
        "tree_count": forests.iter().map(|f| f.trees.len()).sum::<usize>(),
        "city_forests": forests.len(),
        "unique_pattern_count": unique.len(),
        "long_threshold_min": lt.threshold_s / 60.0,
        "long_entities": lt.long_entities,
        "merged_long_entities": lt.merged_entities,
        "vicinity_radius_m": lt.radius_m,
    });
    round_json(&mut summary);
    Ok(vec![
        Artifact::new(REPORT_SHORT, short),
        Artifact::new(REPORT_CLUSTERS, json_bytes(&clusters)?),
        Artifact::new(REPORT_LONGTERM, tests),
        Artifact::new(REPORT_IMPACT, impact),
        Artifact::new(REPORT_SUMMARY, json_bytes(&summary)?),
    ])
}

pub fn inputs(stage: Stage, cfg: &PipelineConfig) -> Result<Vec<Input>, CliError> {
    use Stage::*;
    Ok(match stage {
        Ingest => ingest_inputs(cfg)?,
        Relations => vec![Input::Upstream(Ingest, ENTITIES), Input::Upstream(Ingest, STATION_INDEX)],
        Forest => vec![Input::Upstream(Relations, RELATIONS), Input::Upstream(Ingest, ENTITIES)],
        Mine => vec![Input::Upstream(Forest, FORESTS)],
        Regions => vec![Input::Upstream(Mine, PATTERNS)],
        Longterm => vec![Input::Upstream(Ingest, ENTITIES), Input::Upstream(Ingest, STATION_INDEX)],
        Report => vec![
            Input::Upstream(Mine, PATTERNS),
            Input::Upstream(Regions, CLUSTERS),
            Input::Upstream(Longterm, TESTS),
            Input::Upstream(Longterm, IMPACT),
            Input::Upstream(Longterm, LONGTERM),
            Input::Upstream(Relations, RELATIONS),
            Input::Upstream(Forest, FORESTS),
        ],
    })
}

pub fn execute(stage: Stage, d: &Driver, cfg: &PipelineConfig) -> Result<Vec<Artifact>, CliError> {
    match stage {
        Stage::Ingest => ingest(d, cfg),
        Stage::Relations => relations(d, cfg),
        Stage::Forest => forest(d, cfg),
        Stage::Mine => mine_short(d, cfg),
        Stage::Regions => regions(d, cfg),
        Stage::Longterm => longterm(d, cfg),
        Stage::Report => report(d, cfg),
    }
}
