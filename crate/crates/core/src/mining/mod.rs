//! Frequent propagation patterns per city forest, their time-of-day
//! profile, and the state-level union of city results.

mod occurrence;
mod pattern;
mod miner;
mod tree;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::forest::Forest;

pub use occurrence::{
    classify_street, pattern_occurrence_metadata, peak_hours, road_class, PatternOccurrence, PeakHours, RoadClass,
};
pub use pattern::{decode, PatternTree, TreePattern, POP};
pub use miner::{mine_trees, Mined};
pub use tree::{contains_embedded, LabeledTree};

/// Adaptive relative minimum support for a forest of `x` trees, never below
/// 5%.
pub fn min_sup(x: f64, a: f64, b: f64, c: f64) -> f64 {
    ((-(a * x + b)).exp() + c).max(0.05)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequentPattern {
    pub pattern: TreePattern,
    pub tree_count: usize,
    pub support: f64,
    pub state: String,
    pub city: String,
}

impl FrequentPattern {
    pub fn singleton(&self) -> bool {
        self.pattern.node_count() == 1
    }
}

/// Smallest tree count meeting a relative threshold over `n` trees.
pub fn min_count_for(min_sup: f64, n: usize) -> usize {
    let mut c = (min_sup * n as f64).ceil().max(1.0) as usize;
    // guard against the product rounding up past an exact multiple
    while c > 1 && (c - 1) as f64 / n as f64 >= min_sup {
        c -= 1;
    }
    while (c as f64 / n as f64) < min_sup {
        c += 1;
    }
    c
}

/// Patterns of one forest with support at least `min_sup`, sorted by
/// descending support then encoding.
pub fn mine_with_min_sup(forest: &Forest, min_sup: f64, max_nodes: usize) -> Vec<FrequentPattern> {
    let n = forest.trees.len();
    if n == 0 {
        return Vec::new();
    }
    let trees: Vec<LabeledTree> = forest.trees.iter().map(LabeledTree::from_relation_tree).collect();
    let mut out: Vec<FrequentPattern> = mine_trees(&trees, min_count_for(min_sup, n), max_nodes)
        .into_iter()
        .map(|m| FrequentPattern {
            support: m.tree_count as f64 / n as f64,
            tree_count: m.tree_count,
            pattern: m.pattern,
            state: forest.state.clone(),
            city: forest.city.clone(),
        })
        .collect();
    out.sort_by(|a, b| b.tree_count.cmp(&a.tree_count).then_with(|| a.pattern.cmp(&b.pattern)));
    out
}

/// [`mine_with_min_sup`] at the adaptive threshold for this forest's size.
pub fn mine(forest: &Forest, cfg: &PipelineConfig) -> Vec<FrequentPattern> {
    let s = min_sup(forest.trees.len() as f64, cfg.min_sup_a, cfg.min_sup_b, cfg.min_sup_c);
    mine_with_min_sup(forest, s, cfg.max_pattern_nodes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePattern {
    /// Cities of the state in which the pattern is frequent.
    pub cities: usize,
    pub mean_support: f64,
}

/// Union of each state's city pattern sets, keyed by state then encoding.
/// Single-node patterns carry no propagation and are left out.
pub fn core_state_patterns(city_results: &[FrequentPattern]) -> BTreeMap<String, BTreeMap<TreePattern, StatePattern>> {
    let mut acc: BTreeMap<String, BTreeMap<TreePattern, (usize, f64)>> = BTreeMap::new();
    for p in city_results.iter().filter(|p| !p.singleton()) {
        let e = acc.entry(p.state.clone()).or_default().entry(p.pattern.clone()).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += p.support;
    }
    acc.into_iter()
        .map(|(state, pats)| {
            let pats = pats
                .into_iter()
                .map(|(p, (n, sum))| (p, StatePattern { cities: n, mean_support: sum / n as f64 }))
                .collect();
            (state, pats)
        })
        .collect()
}

pub const PATTERN_COLUMNS: [&str; 8] =
    ["state", "city", "encoding", "node_count", "tree_count", "support", "peak_hours", "flags"];

/// One report row: a pattern with its occurrence metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternRow {
    pub pattern: FrequentPattern,
    pub occurrence: Option<PatternOccurrence>,
}

impl PatternRow {
    pub fn flags(&self) -> Vec<String> {
        let mut f = Vec::new();
        if self.pattern.singleton() {
            f.push("singleton".to_string());
        }
        if let Some(o) = &self.occurrence {
            f.push("peak_heuristic".to_string());
            if o.peak.flat {
                f.push("flat".to_string());
            }
            if o.peak.weak {
                f.push("weak".to_string());
            }
            if let Some(r) = o.road {
                f.push(format!("road_heuristic:{}", r.as_str()));
            }
        }
        f
    }
}

/// CSV report; `format_support` controls float rendering.
pub fn write_patterns_csv<W: Write>(w: W, rows: &[PatternRow], format_support: impl Fn(f64) -> String) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(PATTERN_COLUMNS)?;
    for r in rows {
        let p = &r.pattern;
        let peak = r.occurrence.as_ref().map(|o| o.peak.to_string()).unwrap_or_default();
        wtr.write_record([
            p.state.as_str(),
            &p.city,
            p.pattern.encoding(),
            &p.pattern.node_count().to_string(),
            &p.tree_count.to_string(),
            &format_support(p.support),
            &peak,
            &r.flags().join(";"),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
