//! Pipeline configuration and its flat `key = value` text form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::model::{EntityType, CONTIGUOUS_US_STATES};

/// How a child with several candidate parents keeps one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParentPick {
    /// Smallest lag, then smallest distance, then parent id.
    #[default]
    Deterministic,
    /// Uniform pick with a fixed seed.
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TTestKind {
    #[default]
    Welch,
    Pooled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub traffic_path: Option<PathBuf>,
    pub weather_path: Option<PathBuf>,
    pub stations_path: Option<PathBuf>,
    pub observations_path: Option<PathBuf>,

    pub d_thresh_m: f64,
    pub t_thresh_s: i64,
    pub t_thresh_overrides: BTreeMap<EntityType, i64>,
    pub parent_pick: ParentPick,
    pub tree_node_cap: usize,

    pub min_sup_a: f64,
    pub min_sup_b: f64,
    pub min_sup_c: f64,
    pub max_pattern_nodes: usize,
    pub tz_offsets_h: BTreeMap<String, i32>,
    pub road_heuristic: bool,

    pub k_min: usize,
    pub k_max: usize,
    pub kmeans_restarts: usize,
    pub distinguishing_share: f64,

    pub weather_max_gap_s: i64,

    pub long_duration_percentile: f64,
    pub vicinity_radius_m: Option<f64>,
    pub merge_rho_m: Option<f64>,
    pub radius_sample_s1: usize,
    pub radius_sample_s2: usize,
    pub before_after_gap_days: i64,
    pub duration_edges_h: Vec<f64>,
    pub significance_levels: Vec<f64>,
    pub impact_level: f64,
    pub t_test: TTestKind,

    pub state_whitelist: Vec<String>,
    pub rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            traffic_path: None,
            weather_path: None,
            stations_path: None,
            observations_path: None,
            d_thresh_m: 300.0,
            t_thresh_s: 600,
            t_thresh_overrides: BTreeMap::from([(EntityType::Snow, 2400)]),
            parent_pick: ParentPick::Deterministic,
            tree_node_cap: 10_000,
            min_sup_a: 0.004,
            min_sup_b: 1.5,
            min_sup_c: 0.05,
            max_pattern_nodes: 8,
            tz_offsets_h: BTreeMap::new(),
            road_heuristic: false,
            k_min: 2,
            k_max: 10,
            kmeans_restarts: 16,
            distinguishing_share: 0.8,
            weather_max_gap_s: 6 * 3600,
            long_duration_percentile: 0.99,
            vicinity_radius_m: None,
            merge_rho_m: None,
            radius_sample_s1: 2_000_000,
            radius_sample_s2: 500_000,
            before_after_gap_days: 7,
            duration_edges_h: vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0],
            significance_levels: vec![0.90, 0.95, 0.99],
            impact_level: 0.95,
            t_test: TTestKind::Welch,
            state_whitelist: CONTIGUOUS_US_STATES.iter().map(|s| s.to_string()).collect(),
            rng_seed: 42,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: expected a number, got {v:?}")))
}

fn parse_int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: expected an integer, got {v:?}")))
}

fn parse_opt_f64(key: &str, v: &str) -> Result<Option<f64>> {
    match v.trim() {
        "" | "auto" => Ok(None),
        s => parse_f64(key, s).map(Some),
    }
}

fn parse_opt_path(v: &str) -> Option<PathBuf> {
    match v.trim() {
        "" => None,
        s => Some(PathBuf::from(s)),
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_map<K: Ord, V>(
    key: &str,
    v: &str,
    mut k: impl FnMut(&str) -> Result<K>,
    mut val: impl FnMut(&str) -> Result<V>,
) -> Result<BTreeMap<K, V>> {
    split_list(v)
        .map(|item| {
            let (a, b) = item
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("{key}: expected name:value, got {item:?}")))?;
            Ok((k(a.trim())?, val(b.trim())?))
        })
        .collect()
}

fn fmt_opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "auto".to_string())
}

fn fmt_list<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl PipelineConfig {
    pub const KEYS: [&'static str; 32] = [
        "traffic_path",
        "weather_path",
        "stations_path",
        "observations_path",
        "d_thresh_m",
        "t_thresh_s",
        "t_thresh_overrides",
        "parent_pick",
        "tree_node_cap",
        "min_sup_a",
        "min_sup_b",
        "min_sup_c",
        "max_pattern_nodes",
        "tz_offsets_h",
        "road_heuristic",
        "k_min",
        "k_max",
        "kmeans_restarts",
        "distinguishing_share",
        "weather_max_gap_s",
        "long_duration_percentile",
        "vicinity_radius_m",
        "merge_rho_m",
        "radius_sample_s1",
        "radius_sample_s2",
        "before_after_gap_days",
        "duration_edges_h",
        "significance_levels",
        "impact_level",
        "t_test",
        "state_whitelist",
        "rng_seed",
    ];

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "traffic_path" => self.traffic_path = parse_opt_path(v),
            "weather_path" => self.weather_path = parse_opt_path(v),
            "stations_path" => self.stations_path = parse_opt_path(v),
            "observations_path" => self.observations_path = parse_opt_path(v),
            "d_thresh_m" => self.d_thresh_m = parse_f64(key, v)?,
            "t_thresh_s" => self.t_thresh_s = parse_int(key, v)?,
            "t_thresh_overrides" => {
                self.t_thresh_overrides =
                    parse_map(key, v, |k| k.parse(), |x| parse_int(key, x))?
            }
            "parent_pick" => {
                self.parent_pick = match v {
                    "deterministic" => ParentPick::Deterministic,
                    s => match s.strip_prefix("random:") {
                        Some(seed) => ParentPick::Random(parse_int(key, seed)?),
                        None => {
                            return Err(Error::Config(format!(
                                "parent_pick: expected deterministic or random:<seed>, got {s:?}"
                            )))
                        }
                    },
                }
            }
            "tree_node_cap" => self.tree_node_cap = parse_int(key, v)?,
            "min_sup_a" => self.min_sup_a = parse_f64(key, v)?,
            "min_sup_b" => self.min_sup_b = parse_f64(key, v)?,
            "min_sup_c" => self.min_sup_c = parse_f64(key, v)?,
            "max_pattern_nodes" => self.max_pattern_nodes = parse_int(key, v)?,
            "tz_offsets_h" => {
                self.tz_offsets_h =
                    parse_map(key, v, |k| Ok(k.to_string()), |x| parse_int(key, x))?
            }
            "road_heuristic" => {
                self.road_heuristic = v
                    .parse()
                    .map_err(|_| Error::Config(format!("road_heuristic: expected bool, got {v:?}")))?
            }
            "k_min" => self.k_min = parse_int(key, v)?,
            "k_max" => self.k_max = parse_int(key, v)?,
            "kmeans_restarts" => self.kmeans_restarts = parse_int(key, v)?,
            "distinguishing_share" => self.distinguishing_share = parse_f64(key, v)?,
            "weather_max_gap_s" => self.weather_max_gap_s = parse_int(key, v)?,
            "long_duration_percentile" => self.long_duration_percentile = parse_f64(key, v)?,
            "vicinity_radius_m" => self.vicinity_radius_m = parse_opt_f64(key, v)?,
            "merge_rho_m" => self.merge_rho_m = parse_opt_f64(key, v)?,
            "radius_sample_s1" => self.radius_sample_s1 = parse_int(key, v)?,
            "radius_sample_s2" => self.radius_sample_s2 = parse_int(key, v)?,
            "before_after_gap_days" => self.before_after_gap_days = parse_int(key, v)?,
            "duration_edges_h" => {
                self.duration_edges_h =
                    split_list(v).map(|x| parse_f64(key, x)).collect::<Result<_>>()?
            }
            "significance_levels" => {
                self.significance_levels =
                    split_list(v).map(|x| parse_f64(key, x)).collect::<Result<_>>()?
            }
            "impact_level" => self.impact_level = parse_f64(key, v)?,
            "t_test" => {
                self.t_test = match v {
                    "welch" => TTestKind::Welch,
                    "pooled" => TTestKind::Pooled,
                    s => return Err(Error::Config(format!("t_test: expected welch or pooled, got {s:?}"))),
                }
            }
            "state_whitelist" => self.state_whitelist = split_list(v).map(String::from).collect(),
            "rng_seed" => self.rng_seed = parse_int(key, v)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        cfg.apply_kv_str(text)?;
        Ok(cfg)
    }

    pub fn apply_kv_str(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        self.validate()
    }

    /// Dumps every field, one per line, in a form `from_kv_str` reads back.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("traffic_path", fmt_opt_path(&self.traffic_path));
        put("weather_path", fmt_opt_path(&self.weather_path));
        put("stations_path", fmt_opt_path(&self.stations_path));
        put("observations_path", fmt_opt_path(&self.observations_path));
        put("d_thresh_m", self.d_thresh_m.to_string());
        put("t_thresh_s", self.t_thresh_s.to_string());
        put(
            "t_thresh_overrides",
            self.t_thresh_overrides
                .iter()
                .map(|(k, v)| format!("{k}:{v}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        put(
            "parent_pick",
            match self.parent_pick {
                ParentPick::Deterministic => "deterministic".to_string(),
                ParentPick::Random(seed) => format!("random:{seed}"),
            },
        );
        put("tree_node_cap", self.tree_node_cap.to_string());
        put("min_sup_a", self.min_sup_a.to_string());
        put("min_sup_b", self.min_sup_b.to_string());
        put("min_sup_c", self.min_sup_c.to_string());
        put("max_pattern_nodes", self.max_pattern_nodes.to_string());
        put(
            "tz_offsets_h",
            self.tz_offsets_h
                .iter()
                .map(|(k, v)| format!("{k}:{v}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        put("road_heuristic", self.road_heuristic.to_string());
        put("k_min", self.k_min.to_string());
        put("k_max", self.k_max.to_string());
        put("kmeans_restarts", self.kmeans_restarts.to_string());
        put("distinguishing_share", self.distinguishing_share.to_string());
        put("weather_max_gap_s", self.weather_max_gap_s.to_string());
        put("long_duration_percentile", self.long_duration_percentile.to_string());
        put("vicinity_radius_m", fmt_opt_f64(self.vicinity_radius_m));
        put("merge_rho_m", fmt_opt_f64(self.merge_rho_m));
        put("radius_sample_s1", self.radius_sample_s1.to_string());
        put("radius_sample_s2", self.radius_sample_s2.to_string());
        put("before_after_gap_days", self.before_after_gap_days.to_string());
        put("duration_edges_h", fmt_list(&self.duration_edges_h));
        put("significance_levels", fmt_list(&self.significance_levels));
        put("impact_level", self.impact_level.to_string());
        put(
            "t_test",
            match self.t_test {
                TTestKind::Welch => "welch",
                TTestKind::Pooled => "pooled",
            }
            .to_string(),
        );
        put("state_whitelist", self.state_whitelist.join(","));
        put("rng_seed", self.rng_seed.to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.d_thresh_m > 0.0) {
            return bad("d_thresh_m must be > 0");
        }
        if self.t_thresh_s <= 0 || self.t_thresh_overrides.values().any(|&v| v <= 0) {
            return bad("time thresholds must be > 0");
        }
        if !(self.min_sup_c > 0.0 && self.min_sup_c < 1.0) {
            return bad("min_sup_c must lie in (0, 1)");
        }
        if !(self.long_duration_percentile > 0.0 && self.long_duration_percentile < 1.0) {
            return bad("long_duration_percentile must lie in (0, 1)");
        }
        if self.vicinity_radius_m.is_some_and(|r| !(r > 0.0))
            || self.merge_rho_m.is_some_and(|r| !(r > 0.0))
        {
            return bad("radii must be > 0");
        }
        if self.before_after_gap_days <= 0 || self.weather_max_gap_s <= 0 {
            return bad("gaps must be > 0");
        }
        if self.k_min < 1 || self.k_min > self.k_max {
            return bad("k range must satisfy 1 <= k_min <= k_max");
        }
        if self.max_pattern_nodes < 1 || self.tree_node_cap < 1 || self.kmeans_restarts < 1 {
            return bad("max_pattern_nodes, tree_node_cap and kmeans_restarts must be >= 1");
        }
        if self.duration_edges_h.windows(2).any(|w| w[0] >= w[1]) {
            return bad("duration_edges_h must be strictly ascending");
        }
        if self
            .significance_levels
            .iter()
            .chain(std::iter::once(&self.impact_level))
            .any(|&c| !(c > 0.0 && c < 1.0))
        {
            return bad("confidence levels must lie in (0, 1)");
        }
        if !(self.distinguishing_share > 0.0 && self.distinguishing_share <= 1.0) {
            return bad("distinguishing_share must lie in (0, 1]");
        }
        Ok(())
    }

    /// Co-occurrence threshold for one label: its override, or the default.
    pub fn t_thresh_for(&self, t: EntityType) -> i64 {
        self.t_thresh_overrides.get(&t).copied().unwrap_or(self.t_thresh_s)
    }

    /// Largest threshold any pair can get; the candidate window for scans.
    pub fn max_t_thresh(&self) -> i64 {
        self.t_thresh_overrides
            .values()
            .copied()
            .fold(self.t_thresh_s, i64::max)
    }

    pub fn tz_offset_s(&self, state: &str) -> i64 {
        i64::from(self.tz_offsets_h.get(state).copied().unwrap_or(0)) * 3600
    }
}
