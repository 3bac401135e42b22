//! Long-lived entities and whether more entities occur around them while
//! they last than in matching windows before and after.

mod entity;
mod impact;
mod merge;
mod vicinity;

use std::io::Write;

use crate::error::Result;
use crate::model::format_timestamp;

pub use entity::{extract_long, long_duration_threshold, LongEntity, MemberSite};
pub use impact::{
    bucketize, duration_key, impact_summary, long_state, run_tests, Bucket, BucketKind, BucketTestResult, Impact,
    ImpactRow, TestId, UNKNOWN_STATE,
};
pub use merge::{intervals_intersect, long_collocated, merge_overlaps};
pub use vicinity::{
    estimate_vicinity_radius, sample_points, shifted_windows, vicinity_counts, RadiusEstimate, VicinityCounts,
};

pub const LONG_COLUMNS: [&str; 9] =
    ["id", "label", "start", "end", "lat", "lon", "airport_code", "duration_s", "member_count"];

pub const TEST_COLUMNS: [&str; 11] =
    ["bucket_kind", "bucket_key", "test", "n", "t_stat", "df", "p_value", "sig90", "sig95", "sig99", "impact"];

/// `fmt` renders coordinates.
pub fn write_long_entities_csv<W: Write>(w: W, longs: &[LongEntity], fmt: impl Fn(f64) -> String) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(LONG_COLUMNS)?;
    for l in longs {
        let (lat, lon) = l.center.map(|(a, b)| (fmt(a), fmt(b))).unwrap_or_default();
        wtr.write_record([
            l.id.as_str(),
            &l.label.to_string(),
            &format_timestamp(l.start),
            &format_timestamp(l.end),
            &lat,
            &lon,
            l.airport_code().unwrap_or(""),
            &l.duration().to_string(),
            &l.member_ids.len().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Test rows with the bucket's impact at `level` repeated on each row.
/// Significance columns are for the 0.90, 0.95 and 0.99 levels.
pub fn write_test_results_csv<W: Write>(
    w: W,
    results: &[BucketTestResult],
    level: f64,
    fmt: impl Fn(f64) -> String,
) -> Result<()> {
    let impacts = impact_summary(results, level);
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(TEST_COLUMNS)?;
    for r in results {
        let impact = impacts
            .iter()
            .find(|i| i.bucket_kind == r.bucket_kind && i.bucket_key == r.bucket_key)
            .map_or("None", |i| i.impact.as_str());
        let flag = |c: f64| u8::from(r.significant(c)).to_string();
        wtr.write_record([
            r.bucket_kind.as_str(),
            &r.bucket_key,
            &r.test.to_string(),
            &r.n.to_string(),
            &fmt(r.t_stat),
            &fmt(r.df),
            &fmt(r.p_value),
            &flag(0.90),
            &flag(0.95),
            &flag(0.99),
            impact,
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeSet, HashMap};

    use super::*;
    use crate::config::TTestKind;
    use crate::ingest::StationIndex;
    use crate::model::{CompositeLabel, EntityType, GeoEntity, Location, StreetSide, TrafficLocation, WeatherLocation};

    const H: i64 = 3600;
    const DAY: i64 = 86_400;

    fn traffic(id: &str, t: EntityType, start: i64, end: i64, lat: f64, lon: f64) -> GeoEntity {
        GeoEntity {
            id: id.into(),
            etype: t,
            start,
            end,
            loc: Location::Traffic(TrafficLocation {
                lat,
                lon,
                street_name: "Main St".into(),
                street_side: StreetSide::R,
                zipcode: "43215".into(),
                city: "Columbus".into(),
                state: "OH".into(),
            }),
            severity: None,
        }
    }

    fn long(id: &str, t: EntityType, start: i64, end: i64, lat: f64, lon: f64) -> LongEntity {
        LongEntity::from_entity(&traffic(id, t, start, end, lat, lon))
    }

    #[test]
    fn threshold_by_interpolation() {
        let mut es: Vec<GeoEntity> = (0..99).map(|i| traffic(&format!("e{i}"), EntityType::Congestion, 0, 600, 40.0, -83.0)).collect();
        es.push(traffic("big", EntityType::Construction, 0, 36_000, 40.0, -83.0));
        // rank 0.99·99 = 98.01: 600 + 0.01·(36000 − 600) = 954 s
        assert!((long_duration_threshold(&es, 0.99).unwrap() - 954.0).abs() < 1e-9);
        assert_eq!(long_duration_threshold(&es[..5], 0.99).unwrap(), 600.0);
        assert!(long_duration_threshold(&[], 0.99).is_err());
    }

    #[test]
    fn construction_and_event_merge() {
        let a = long("C", EntityType::Construction, 0, 10 * H, 40.0, -83.0);
        // about 1 km east
        let b = long("E", EntityType::Event, 2 * H, 8 * H, 40.0, -82.988);
        let merged = merge_overlaps(&[a, b], 22_600.0, &StationIndex::default());
        assert_eq!(merged.len(), 1);
        let m = &merged[0];
        assert_eq!(m.label.to_string(), "Construction_Event");
        assert_eq!((m.start, m.end), (0, 10 * H));
        assert_eq!(m.member_ids, BTreeSet::from(["C".to_string(), "E".to_string()]));
        assert!((m.center.unwrap().1 - -82.994).abs() < 1e-9);
    }

    #[test]
    fn far_apart_stay_separate() {
        let a = long("A", EntityType::Construction, 0, 10 * H, 40.0, -83.0);
        let b = long("B", EntityType::Construction, 0, 10 * H, 40.9, -83.0);
        assert_eq!(merge_overlaps(&[a.clone(), b.clone()], 22_600.0, &StationIndex::default()), vec![a, b]);
    }

    #[test]
    fn chain_merges_to_fixed_point() {
        // A and C are 30 km apart, B sits between them; A and C do not overlap in time
        let a = long("A", EntityType::Construction, 0, 10 * H, 40.0, -83.0);
        let b = long("B", EntityType::Event, 5 * H, 20 * H, 40.0, -82.82);
        let c = long("C", EntityType::Construction, 15 * H, 30 * H, 40.0, -82.65);
        let merged = merge_overlaps(&[c, a, b], 22_600.0, &StationIndex::default());
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].member_ids.len(), 3);
    }

    #[test]
    fn weather_collocation_by_station() {
        let mut idx = StationIndex::default();
        idx.stations.insert("KCMH".into(), (40.0, -82.9));
        idx.zip_to_station.insert("43215".into(), "KCMH".into());
        let w = LongEntity::from_entity(&GeoEntity {
            id: "W".into(),
            etype: EntityType::Snow,
            start: 0,
            end: 20 * H,
            loc: Location::Weather(WeatherLocation { airport_code: "KCMH".into(), lat: None, lon: None }),
            severity: None,
        });
        let t = long("T", EntityType::Construction, H, 5 * H, 39.0, -84.0);
        let merged = merge_overlaps(&[w, t], 1.0, &idx);
        assert_eq!(merged.len(), 1);
        assert!(merged[0].is_mixed());
        assert_eq!(merged[0].label, CompositeLabel::from_types([EntityType::Snow, EntityType::Construction]).unwrap());
        assert_eq!(merged[0].center, Some((39.0, -84.0)));
    }

    #[test]
    fn windows_shift_by_gap_plus_days() {
        let l = long("L", EntityType::Construction, 100 * DAY, 102 * DAY, 40.0, -83.0);
        let (before, after) = shifted_windows(&l, 7);
        assert_eq!(before, (91 * DAY, 93 * DAY));
        assert_eq!(after, (109 * DAY, 111 * DAY));
        let l = long("L", EntityType::Construction, 0, 30 * H, 40.0, -83.0);
        assert_eq!(shifted_windows(&l, 7).0 .0, -9 * DAY);
    }

    #[test]
    fn counts_are_strict_and_skip_members() {
        let l = long("L", EntityType::Construction, 100 * DAY, 102 * DAY, 40.0, -83.0);
        let es = vec![
            traffic("L", EntityType::Construction, 100 * DAY, 102 * DAY, 40.0, -83.0),
            traffic("in", EntityType::Congestion, 100 * DAY + H, 100 * DAY + 2 * H, 40.001, -83.0),
            traffic("edge", EntityType::Congestion, 100 * DAY, 100 * DAY + H, 40.001, -83.0),
            traffic("far", EntityType::Congestion, 100 * DAY + H, 100 * DAY + 2 * H, 41.0, -83.0),
            traffic("before", EntityType::Accident, 91 * DAY + H, 91 * DAY + 2 * H, 40.0, -83.001),
            traffic("after", EntityType::Accident, 110 * DAY, 110 * DAY + H, 40.0, -83.001),
        ];
        let c = vicinity_counts(&[l], &es, 5_000.0, 7, &StationIndex::default()).unwrap();
        assert_eq!((c[0].s_r, c[0].s_before, c[0].s_after), (1, 1, 1));
        let none = vicinity_counts(&[long("X", EntityType::Construction, 0, DAY, 10.0, 10.0)], &es, 5_000.0, 7, &StationIndex::default()).unwrap();
        assert_eq!((none[0].s_r, none[0].s_before, none[0].s_after), (0, 0, 0));
    }

    #[test]
    fn buckets() {
        let ls = vec![
            long("a", EntityType::Construction, 0, 29 * H, 40.0, -83.0),
            long("b", EntityType::Construction, 0, 3 * H, 40.0, -83.0),
            long("c", EntityType::Event, 0, 60 * H, 40.0, -83.0),
        ];
        let idx = StationIndex::default();
        let d = bucketize(&ls, BucketKind::Duration, &[5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0], &idx);
        let keys: Vec<&str> = d.iter().map(|b| b.key.as_str()).collect();
        assert_eq!(keys, vec!["[0,5)", "[25,30)", "[45,inf)"]);
        let t = bucketize(&ls, BucketKind::Type, &[], &idx);
        assert_eq!(t.iter().map(|b| b.members.len()).collect::<Vec<_>>(), vec![2, 1]);
        let l = bucketize(&ls, BucketKind::Location, &[], &idx);
        assert_eq!(l[0].key, "OH");
        assert_eq!(l[0].members.len(), 3);
    }

    fn counts(rows: &[(usize, usize, usize)]) -> (Bucket, HashMap<String, VicinityCounts>) {
        let mut m = HashMap::new();
        let mut members = Vec::new();
        for (i, &(s_r, s_before, s_after)) in rows.iter().enumerate() {
            let id = format!("l{i}");
            members.push(id.clone());
            m.insert(id.clone(), VicinityCounts { long_id: id, s_r, s_before, s_after });
        }
        (Bucket { kind: BucketKind::Type, key: "Construction".into(), members }, m)
    }

    #[test]
    fn constant_equal_counts_are_degenerate() {
        let (b, m) = counts(&[(3, 3, 3), (3, 3, 3), (3, 3, 3)]);
        let r = run_tests(&b, &m, &[0.9, 0.95, 0.99], TTestKind::Welch).unwrap();
        assert_eq!(r.len(), 6);
        assert!(r.iter().all(|x| x.p_value == 0.5 && x.degenerate));
        assert_eq!(impact_summary(&r, 0.95)[0].impact, Impact::None);
    }

    #[test]
    fn swapping_during_and_before_swaps_t3_t4() {
        let rows = [(5, 1, 2), (7, 2, 3), (6, 2, 1), (9, 3, 2)];
        let (b, m) = counts(&rows);
        let r = run_tests(&b, &m, &[0.9], TTestKind::Welch).unwrap();
        let swapped: Vec<_> = rows.iter().map(|&(d, bf, a)| (bf, d, a)).collect();
        let (b2, m2) = counts(&swapped);
        let s = run_tests(&b2, &m2, &[0.9], TTestKind::Welch).unwrap();
        assert!((r[2].p_value - s[3].p_value).abs() < 1e-12);
        assert!((r[3].p_value - s[2].p_value).abs() < 1e-12);
        assert!(run_tests(&Bucket { members: vec!["l0".into()], ..b }, &m, &[0.9], TTestKind::Welch).is_err());
    }

    fn result(test: TestId, p: f64) -> BucketTestResult {
        BucketTestResult {
            bucket_kind: BucketKind::Type,
            bucket_key: "X".into(),
            test,
            n: 10,
            t_stat: 0.0,
            df: 9.0,
            p_value: p,
            degenerate: false,
            significant_at: Vec::new(),
        }
    }

    #[test]
    fn impact_rules() {
        let all = |ps: [f64; 6]| TestId::ALL.iter().zip(ps).map(|(&t, p)| result(t, p)).collect::<Vec<_>>();
        assert_eq!(impact_summary(&all([0.003, 0.9, 0.5, 0.5, 0.5, 0.5]), 0.95)[0].impact, Impact::Positive);
        assert_eq!(impact_summary(&all([0.5, 0.02, 0.5, 0.5, 0.01, 0.5]), 0.95)[0].impact, Impact::Mixed);
        assert_eq!(impact_summary(&all([0.2, 0.3, 0.5, 0.11, 0.5, 0.5]), 0.95)[0].impact, Impact::None);
        assert_eq!(impact_summary(&all([0.5, 0.5, 0.5, 0.04, 0.5, 0.5]), 0.95)[0].impact, Impact::Negative);
    }
}
