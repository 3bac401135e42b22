//! Where and when a pattern's trees happen: peak local hours of their root
//! entities and an optional road-type annotation.

use std::fmt;

use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::model::SECONDS_PER_DAY;

use super::pattern::TreePattern;
use super::tree::{contains_embedded, LabeledTree};

/// Hour range `[start, end)` in local time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeakHours {
    pub start: u8,
    pub end: u8,
    /// Every hour had the same count.
    pub flat: bool,
    /// The range holds under a quarter of all instances.
    pub weak: bool,
}

impl fmt::Display for PeakHours {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

/// Hours whose count is at least the hourly mean are elevated; the peak is
/// the maximal run of elevated hours (no wrap past midnight) with the most
/// instances, then the widest, then the earliest.
pub fn peak_hours(hist: &[usize; 24]) -> Option<PeakHours> {
    let total: usize = hist.iter().sum();
    if total == 0 {
        return None;
    }
    let elevated = |h: usize| hist[h] * 24 >= total;
    let mut best: Option<(usize, usize, usize)> = None; // (mass, start, end)
    let mut h = 0;
    while h < 24 {
        if !elevated(h) {
            h += 1;
            continue;
        }
        let start = h;
        let mut mass = 0;
        while h < 24 && elevated(h) {
            mass += hist[h];
            h += 1;
        }
        let better = match best {
            None => true,
            Some((bm, bs, be)) => mass > bm || (mass == bm && h - start > be - bs),
        };
        if better {
            best = Some((mass, start, h));
        }
    }
    let (mass, start, end) = best.expect("some hour reaches the mean");
    Some(PeakHours {
        start: start as u8,
        end: end as u8,
        flat: hist.iter().all(|&c| c == hist[0]),
        weak: mass * 4 < total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RoadClass {
    Highway,
    Local,
    Mixture,
}

impl RoadClass {
    pub fn as_str(self) -> &'static str {
        match self {
            RoadClass::Highway => "highway",
            RoadClass::Local => "local",
            RoadClass::Mixture => "mixture",
        }
    }
}

/// Interstate, US and state route prefixes and freeway words mark highways.
pub fn classify_street(name: &str) -> RoadClass {
    let n = name.trim().to_ascii_uppercase();
    let prefixes = ["I-", "I ", "US-", "US ", "SR-", "SR ", "INTERSTATE", "STATE ROUTE", "HWY", "HIGHWAY"];
    let words = ["FWY", "FREEWAY", "EXPY", "EXPRESSWAY", "TPKE", "TURNPIKE", "PKWY", "HIGHWAY", "HWY"];
    if prefixes.iter().any(|p| n.starts_with(p)) || n.split([' ', '-']).any(|w| words.contains(&w)) {
        RoadClass::Highway
    } else {
        RoadClass::Local
    }
}

/// Single class when every street agrees, otherwise a mixture.
pub fn road_class<'a>(streets: impl IntoIterator<Item = &'a str>) -> Option<RoadClass> {
    let mut class = None;
    for s in streets {
        let c = classify_street(s);
        class = match class {
            None => Some(c),
            Some(prev) if prev == c => Some(c),
            Some(_) => Some(RoadClass::Mixture),
        };
    }
    class
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternOccurrence {
    pub peak: PeakHours,
    pub instance_count: usize,
    pub hist: [usize; 24],
    pub road: Option<RoadClass>,
}

/// Local start-hour histogram of the roots of trees containing `p`.
pub fn pattern_occurrence_metadata(
    forest: &Forest,
    p: &TreePattern,
    tz_offset_s: i64,
    with_road: bool,
) -> Result<PatternOccurrence> {
    let pt = p.decode();
    let mut hist = [0usize; 24];
    let mut count = 0;
    let mut streets: Vec<&str> = Vec::new();
    for t in &forest.trees {
        if !contains_embedded(&LabeledTree::from_relation_tree(t), &pt) {
            continue;
        }
        count += 1;
        let hour = (t.root_start + tz_offset_s).rem_euclid(SECONDS_PER_DAY) / 3600;
        hist[hour as usize] += 1;
        streets.extend(t.streets.iter().map(String::as_str));
    }
    let peak = peak_hours(&hist).ok_or_else(|| {
        Error::PatternNotFound(format!("{} in {}, {}", p.encoding(), forest.city, forest.state))
    })?;
    Ok(PatternOccurrence { peak, instance_count: count, hist, road: with_road.then(|| road_class(streets)).flatten() })
}
