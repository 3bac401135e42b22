use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use geopattern::ingest::{deduplicate, parse_entities, write_entities_jsonl, Format, Schema, StationIndex};
use geopattern::longterm::{merge_overlaps, shifted_windows, vicinity_counts, LongEntity};
use geopattern::mining::TreePattern;
use geopattern::model::{EntityType, GeoEntity, Location, Severity, StreetSide, TrafficLocation, WeatherLocation};
use geopattern::numerics::{dbscan, haversine, student_t_cdf};
use geopattern::relations::extract_relations;
use geopattern::PipelineConfig;

fn atan2_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (p1, p2) = (a.0.to_radians(), b.0.to_radians());
    let (dp, dl) = ((b.0 - a.0).to_radians(), (b.1 - a.1).to_radians());
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * 6_371_000.0 * h.sqrt().atan2((1.0 - h).sqrt())
}

fn coord() -> impl Strategy<Value = (f64, f64)> {
    (-80.0..80.0f64, -179.0..179.0f64)
}

fn traffic(id: String, etype: EntityType, start: i64, end: i64, at: (f64, f64), street: &str, zip: &str) -> GeoEntity {
    GeoEntity {
        id,
        etype,
        start,
        end,
        loc: Location::Traffic(TrafficLocation {
            lat: at.0,
            lon: at.1,
            street_name: street.into(),
            street_side: StreetSide::L,
            zipcode: zip.into(),
            city: "Dayton".into(),
            state: "OH".into(),
        }),
        severity: None,
    }
}

fn weather(id: String, etype: EntityType, start: i64, station: &str) -> GeoEntity {
    GeoEntity {
        id,
        etype,
        start,
        end: start + 3600,
        loc: Location::Weather(WeatherLocation { airport_code: station.into(), lat: None, lon: None }),
        severity: Some(Severity::Moderate),
    }
}

fn two_station_index() -> StationIndex {
    StationIndex {
        stations: [("KAAA".to_string(), (39.7, -84.2)), ("KBBB".to_string(), (39.8, -84.1))].into(),
        zip_to_station: [("45401".to_string(), "KAAA".to_string()), ("45402".to_string(), "KBBB".to_string())].into(),
        station_state: BTreeMap::new(),
    }
}

const TRAFFIC: [EntityType; 4] = [EntityType::Accident, EntityType::Congestion, EntityType::Construction, EntityType::Event];
const WEATHER: [EntityType; 3] = [EntityType::Rain, EntityType::Snow, EntityType::Fog];

/// Small mixed entity sets on two streets and two stations.
fn entity_set() -> impl Strategy<Value = Vec<GeoEntity>> {
    let t = prop::collection::vec((0..4usize, 0..7200i64, 0.0..0.006f64, 0..2usize, 0..2usize), 0..25);
    let w = prop::collection::vec((0..3usize, 0..7200i64, 0..2usize), 0..5);
    (t, w).prop_map(|(t, w)| {
        let mut out = Vec::new();
        for (i, (ty, start, dlat, street, zip)) in t.into_iter().enumerate() {
            let s = ["Main St", "Elm St"][street];
            let z = ["45401", "45402"][zip];
            out.push(traffic(format!("T-{i}"), TRAFFIC[ty], start, start + 600, (39.75 + dlat, -84.19), s, z));
        }
        for (i, (ty, start, st)) in w.into_iter().enumerate() {
            out.push(weather(format!("W-{i}"), WEATHER[ty], start, ["KAAA", "KBBB"][st]));
        }
        out
    })
}

fn brute_relations(es: &[GeoEntity], cfg: &PipelineConfig, idx: &StationIndex) -> BTreeSet<(String, String)> {
    let mut out = BTreeSet::new();
    for p in es {
        for c in es {
            let Location::Traffic(ct) = &c.loc else { continue };
            if p.start >= c.start {
                continue;
            }
            let th = cfg.t_thresh_for(p.etype).max(cfg.t_thresh_for(c.etype));
            if c.start - p.start > th {
                continue;
            }
            let near = match &p.loc {
                Location::Traffic(pt) => {
                    pt.street_name == ct.street_name
                        && pt.zipcode == ct.zipcode
                        && atan2_distance((pt.lat, pt.lon), (ct.lat, ct.lon)) <= cfg.d_thresh_m
                }
                Location::Weather(w) => idx.zip_to_station.get(&ct.zipcode) == Some(&w.airport_code),
            };
            if near {
                out.insert((p.id.clone(), c.id.clone()));
            }
        }
    }
    out
}

/// Random rooted tree as an encoding with `^` pops.
fn encoding_of(labels: &[usize], parent: &[usize], order: &[Vec<usize>], v: usize, out: &mut Vec<String>) {
    out.push(["Rain", "Accident", "Congestion", "Fog"][labels[v]].to_string());
    for &c in &order[v] {
        encoding_of(labels, parent, order, c, out);
        out.push("^".into());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn haversine_is_a_metric(a in coord(), b in coord(), c in coord()) {
        let d = |x, y| haversine(x, y).unwrap();
        prop_assert!(d(a, a).abs() < 1e-6);
        prop_assert!((d(a, b) - d(b, a)).abs() < 1e-6);
        prop_assert!(d(a, c) <= d(a, b) + d(b, c) + 1e-6);
        prop_assert!((d(a, b) - atan2_distance(a, b)).abs() < 1e-3);
    }

    #[test]
    fn t_cdf_is_monotone_and_symmetric(t in -8.0..8.0f64, dt in 0.0..2.0f64, df in 1.0..200.0f64) {
        let f = student_t_cdf(t, df);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!(student_t_cdf(t + dt, df) >= f - 1e-12);
        prop_assert!((f + student_t_cdf(-t, df) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dbscan_core_points_are_connected(
        pts in prop::collection::vec((40.0..40.05f64, -83.05..-83.0f64), 1..80),
        eps in 200.0..2000.0f64,
        min_pts in 1usize..6,
    ) {
        let r = dbscan(&pts, eps, min_pts).unwrap();
        let n = pts.len();
        let nb = |i: usize| (0..n).filter(|&j| j != i && atan2_distance(pts[i], pts[j]) <= eps).collect::<Vec<_>>();
        for i in 0..n {
            let ns = nb(i);
            let core = ns.len() >= min_pts;
            if core {
                prop_assert!(r.cluster_ids[i].is_some());
                for j in ns.iter().copied().filter(|&j| nb(j).len() >= min_pts) {
                    prop_assert_eq!(r.cluster_ids[i], r.cluster_ids[j]);
                }
            } else if r.cluster_ids[i].is_some() {
                prop_assert!(ns.iter().any(|&j| nb(j).len() >= min_pts && r.cluster_ids[j] == r.cluster_ids[i]));
            }
        }
    }

    #[test]
    fn relations_match_pairwise_rule(es in entity_set()) {
        let cfg = PipelineConfig::default();
        let idx = two_station_index();
        let got: BTreeSet<(String, String)> =
            extract_relations(&es, &cfg, &idx).into_iter().map(|r| (r.parent_id, r.child_id)).collect();
        prop_assert_eq!(got, brute_relations(&es, &cfg, &idx));
    }

    #[test]
    fn canonical_form_ignores_sibling_order(
        parents in prop::collection::vec(any::<prop::sample::Index>(), 0..7),
        labels in prop::collection::vec(0..4usize, 8),
        seed in any::<u64>(),
    ) {
        let n = parents.len() + 1;
        let parent: Vec<usize> = (1..n).map(|i| parents[i - 1].index(i)).collect();
        let mut kids = vec![Vec::new(); n];
        for (i, &p) in parent.iter().enumerate() {
            kids[p].push(i + 1);
        }
        let mut shuffled = kids.clone();
        let mut s = seed;
        for k in &mut shuffled {
            for i in (1..k.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                k.swap(i, (s >> 33) as usize % (i + 1));
            }
        }
        let (mut a, mut b) = (Vec::new(), Vec::new());
        encoding_of(&labels, &parent, &kids, 0, &mut a);
        encoding_of(&labels, &parent, &shuffled, 0, &mut b);
        let pa = TreePattern::canonicalize(&a.join(" ")).unwrap();
        let pb = TreePattern::canonicalize(&b.join(" ")).unwrap();
        prop_assert_eq!(&pa, &pb);
        prop_assert_eq!(TreePattern::canonicalize(pa.encoding()).unwrap(), pa);
    }

    #[test]
    fn dedup_is_idempotent(es in entity_set(), dups in prop::collection::vec(any::<prop::sample::Index>(), 0..6)) {
        let mut input = es.clone();
        for d in &dups {
            if !es.is_empty() {
                input.push(es[d.index(es.len())].clone());
            }
        }
        let (kept, removed) = deduplicate(input.clone());
        prop_assert_eq!(kept.len() + removed.len(), input.len());
        let (again, none) = deduplicate(kept.clone());
        prop_assert_eq!(again, kept);
        prop_assert!(none.is_empty());
    }

    #[test]
    fn jsonl_round_trips(es in entity_set()) {
        let mut buf = Vec::new();
        write_entities_jsonl(&mut buf, &es).unwrap();
        let parsed = parse_entities(&buf[..], Schema::Mixed, Format::JsonLines, &["OH".to_string()]).unwrap();
        prop_assert!(parsed.rejects.is_empty(), "{:?}", parsed.rejects);
        prop_assert_eq!(parsed.records, es);
    }

    #[test]
    fn merged_entities_never_overlap_nearby(
        shape in prop::collection::vec((0..200i64, 1..60i64, 0.0..0.5f64, 0..2usize), 1..20),
        rho in 1000.0..30000.0f64,
    ) {
        let longs: Vec<LongEntity> = shape
            .iter()
            .enumerate()
            .map(|(i, &(s, d, dlon, t))| {
                let e = traffic(format!("L{i:02}"), TRAFFIC[2 + t], s * 3600, (s + d) * 3600, (40.0, -83.0 + dlon), "X", "45401");
                LongEntity::from_entity(&e)
            })
            .collect();
        let merged = merge_overlaps(&longs, rho, &StationIndex::default());
        for (i, a) in merged.iter().enumerate() {
            for b in &merged[i + 1..] {
                let overlap = a.start <= b.end && b.start <= a.end;
                prop_assert!(!(overlap && atan2_distance(a.center.unwrap(), b.center.unwrap()) <= rho));
            }
        }
        let ids: BTreeSet<&String> = merged.iter().flat_map(|l| &l.member_ids).collect();
        prop_assert_eq!(ids.len(), longs.len());
        prop_assert_eq!(merged.iter().map(|l| l.member_ids.len()).sum::<usize>(), longs.len());
    }

    #[test]
    fn vicinity_counts_match_scan(
        around in prop::collection::vec((-40..60i64, 1..48i64, 0.0..0.05f64), 0..60),
        dur_h in 1..120i64,
        r in 500.0..5000.0f64,
    ) {
        let day = 86_400;
        let long_e = traffic("L".into(), EntityType::Construction, 20 * day, 20 * day + dur_h * 3600, (40.0, -83.0), "X", "45401");
        let mut es = vec![long_e.clone()];
        for (i, &(d, h, dlat)) in around.iter().enumerate() {
            let s = (20 + d) * day + 3600;
            es.push(traffic(format!("e{i}"), EntityType::Accident, s, s + h * 600, (40.0 + dlat, -83.0), "Y", "45401"));
        }
        let l = LongEntity::from_entity(&long_e);
        let c = &vicinity_counts(std::slice::from_ref(&l), &es, r, 7, &StationIndex::default()).unwrap()[0];
        let (before, after) = shifted_windows(&l, 7);
        let inside = |e: &GeoEntity, (lo, hi): (i64, i64)| lo < e.start && e.end < hi;
        let near: Vec<&GeoEntity> = es[1..]
            .iter()
            .filter(|e| atan2_distance(e.coords().unwrap(), (40.0, -83.0)) <= r)
            .collect();
        prop_assert_eq!(c.s_r, near.iter().filter(|e| inside(e, (l.start, l.end))).count());
        prop_assert_eq!(c.s_before, near.iter().filter(|e| inside(e, before)).count());
        prop_assert_eq!(c.s_after, near.iter().filter(|e| inside(e, after)).count());
    }
}
