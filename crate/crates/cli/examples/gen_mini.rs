//! Writes the bundled synthetic mini-dataset to `crates/cli/data/mini`.
//!
//! Thirteen cities in eleven states. Each city gets isolated relation groups
//! (one tree each) drawn from a state profile, background traffic on unique
//! streets, and unrelated weather. Columbus carries the planted
//! Rain -> Accident -> Congestion chain in 45 of its 150 trees. Three cities
//! host three-day constructions with extra traffic nearby while they last.
//!
//! Run with `cargo run -p geopattern-cli --example gen_mini [OUT_DIR]`.

use std::fs;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use geopattern::model::format_timestamp;

const DAYS: i64 = 84;
const SLOT: i64 = 7200;
const BASE: i64 = 1_609_718_400; // 2021-01-04T00:00:00Z

struct City {
    state: &'static str,
    name: &'static str,
    lat: f64,
    lon: f64,
    station: &'static str,
    zip: &'static str,
    profile: &'static [(&'static str, usize)],
    hosts_construction: bool,
}

/// Group shapes: labels in pre-order with each node's parent position.
fn shape(name: &str) -> (&'static [&'static str], &'static [Option<usize>]) {
    match name {
        "RAC" => (&["Rain", "Accident", "Congestion"], &[None, Some(0), Some(1)]),
        "AC" => (&["Accident", "Congestion"], &[None, Some(0)]),
        "RA" => (&["Rain", "Accident"], &[None, Some(0)]),
        "RC" => (&["Rain", "Congestion"], &[None, Some(0)]),
        "CC" => (&["Congestion", "Congestion"], &[None, Some(0)]),
        "SA" => (&["Snow", "Accident"], &[None, Some(0)]),
        "SAC" => (&["Snow", "Accident", "Congestion"], &[None, Some(0), Some(1)]),
        "FC" => (&["Fog", "Congestion"], &[None, Some(0)]),
        "ACC" => (&["Accident", "Congestion", "Congestion"], &[None, Some(0), Some(0)]),
        "BA" => (&["Broken-Vehicle", "Accident"], &[None, Some(0)]),
        "LC" => (&["Lane-Blocked", "Congestion"], &[None, Some(0)]),
        _ => unreachable!("unknown shape {name}"),
    }
}

const CITIES: [City; 13] = [
    City { state: "OH", name: "Columbus", lat: 39.9612, lon: -82.9988, station: "KCMH", zip: "432", profile: &[("RAC", 45), ("AC", 35), ("RA", 30), ("CC", 20), ("RC", 20)], hosts_construction: false },
    City { state: "OH", name: "Cleveland", lat: 41.4993, lon: -81.6944, station: "KCLE", zip: "441", profile: &[("RAC", 10), ("AC", 20), ("SA", 15), ("CC", 15)], hosts_construction: false },
    City { state: "TX", name: "Houston", lat: 29.7604, lon: -95.3698, station: "KHOU", zip: "770", profile: &[("AC", 25), ("CC", 15), ("RC", 10), ("ACC", 10)], hosts_construction: false },
    City { state: "TX", name: "Dallas", lat: 32.7767, lon: -96.7970, station: "KDAL", zip: "752", profile: &[("AC", 25), ("CC", 15), ("RC", 10), ("ACC", 10)], hosts_construction: false },
    City { state: "CA", name: "Sacramento", lat: 38.5816, lon: -121.4944, station: "KSAC", zip: "958", profile: &[("FC", 20), ("AC", 20), ("BA", 10), ("CC", 10)], hosts_construction: false },
    City { state: "CA", name: "Fresno", lat: 36.7378, lon: -119.7871, station: "KFAT", zip: "937", profile: &[("FC", 20), ("AC", 20), ("BA", 10), ("CC", 10)], hosts_construction: false },
    City { state: "NY", name: "Albany", lat: 42.6526, lon: -73.7562, station: "KALB", zip: "122", profile: &[("SA", 20), ("SAC", 15), ("AC", 15), ("CC", 10)], hosts_construction: false },
    City { state: "FL", name: "Orlando", lat: 28.5383, lon: -81.3792, station: "KMCO", zip: "328", profile: &[("RC", 20), ("RA", 15), ("AC", 15), ("CC", 10)], hosts_construction: false },
    City { state: "WA", name: "Spokane", lat: 47.6588, lon: -117.4260, station: "KGEG", zip: "992", profile: &[("FC", 15), ("SA", 15), ("AC", 20), ("CC", 10)], hosts_construction: false },
    City { state: "CO", name: "Denver", lat: 39.7392, lon: -104.9903, station: "KDEN", zip: "802", profile: &[("SA", 20), ("SAC", 10), ("AC", 20), ("CC", 10)], hosts_construction: false },
    City { state: "GA", name: "Atlanta", lat: 33.7490, lon: -84.3880, station: "KATL", zip: "303", profile: &[("AC", 25), ("CC", 15), ("RC", 10), ("LC", 10)], hosts_construction: true },
    City { state: "MN", name: "Minneapolis", lat: 44.9778, lon: -93.2650, station: "KMSP", zip: "554", profile: &[("SA", 20), ("SAC", 10), ("AC", 20), ("CC", 10)], hosts_construction: true },
    City { state: "AZ", name: "Phoenix", lat: 33.4484, lon: -112.0740, station: "KPHX", zip: "850", profile: &[("AC", 25), ("CC", 20), ("LC", 15)], hosts_construction: true },
];

const NOISE_PER_CITY: usize = 250;
const WEATHER_NOISE_PER_CITY: usize = 15;
const CONSTRUCTION_DAYS: [i64; 3] = [12, 36, 60];
const DURING_EXTRA: usize = 25;
const TRAFFIC_TYPES: [&str; 7] =
    ["Accident", "Broken-Vehicle", "Congestion", "Construction", "Event", "Lane-Blocked", "Flow-Incident"];
const WEATHER_TYPES: [&str; 7] = ["Fog", "Hail", "Precipitation", "Rain", "Severe-Cold", "Snow", "Storm"];

fn ts(t: i64) -> String {
    format_timestamp(t)
}

struct Writer {
    traffic: Vec<String>,
    weather: Vec<String>,
}

impl Writer {
    #[allow(clippy::too_many_arguments)]
    fn traffic(&mut self, id: &str, t: &str, start: i64, dur: i64, (lat, lon): (f64, f64), street: &str, zip: &str, c: &City) {
        self.traffic.push(format!(
            "{id},{t},{},{},{lat:.6},{lon:.6},{street},R,{zip},{},{}",
            ts(start),
            ts(start + dur),
            c.name,
            c.state
        ));
    }

    fn weather(&mut self, id: &str, t: &str, start: i64, dur: i64, station: &str) {
        self.weather.push(format!("{id},{t},{},{},{station}", ts(start), ts(start + dur)));
    }
}

fn main() {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join("mini")
    });
    fs::create_dir_all(&out).expect("output dir");
    let mut rng = ChaCha8Rng::seed_from_u64(20_210_104);
    let mut w = Writer { traffic: Vec::new(), weather: Vec::new() };
    let mut stations = vec!["airport_code,lat,lon".to_string()];
    let std_normal = Normal::new(0.0, 1.0).expect("normal");

    for (ci, c) in CITIES.iter().enumerate() {
        stations.push(format!("{},{:.4},{:.4}", c.station, c.lat + 0.02, c.lon + 0.02));
        let deg_lon = 1.0 / c.lat.to_radians().cos();
        let around = |rng: &mut ChaCha8Rng, sigma_deg: f64, (lat, lon): (f64, f64)| {
            (
                lat + sigma_deg * std_normal.sample(rng),
                lon + sigma_deg * deg_lon * std_normal.sample(rng),
            )
        };
        let zip = |rng: &mut ChaCha8Rng| format!("{}{:02}", c.zip, rng.random_range(0..5) * 3 + 1);
        let max_dur = if c.hosts_construction { 2400 } else { 3600 };

        let mut slots: Vec<i64> = (0..DAYS * 86_400 / SLOT).collect();
        slots.shuffle(&mut rng);
        let mut next_slot = slots.into_iter();

        // relation groups
        let mut g = 0;
        for &(name, count) in c.profile {
            let (labels, parents) = shape(name);
            for _ in 0..count {
                let slot = BASE + next_slot.next().expect("free slot") * SLOT;
                let street = format!("G{ci}x{g} St");
                let anchor = around(&mut rng, 0.027, (c.lat, c.lon));
                let z = zip(&mut rng);
                let mut starts: Vec<i64> = Vec::with_capacity(labels.len());
                for (k, (&label, &parent)) in labels.iter().zip(parents).enumerate() {
                    let start = match parent {
                        None => slot + rng.random_range(0..3000),
                        Some(p) => starts[p] + rng.random_range(60..=300),
                    };
                    starts.push(start);
                    let id = format!("C{ci}G{g}N{k}");
                    let dur = rng.random_range(900..=1800);
                    if WEATHER_TYPES.contains(&label) {
                        w.weather(&id, label, start, dur, c.station);
                    } else {
                        let pos = (anchor.0 + 0.0004 * k as f64, anchor.1);
                        w.traffic(&id, label, start, dur, pos, &street, &z, c);
                    }
                }
                g += 1;
            }
        }

        // weather that nothing follows
        for k in 0..WEATHER_NOISE_PER_CITY {
            let slot = BASE + next_slot.next().expect("free slot") * SLOT;
            let t = WEATHER_TYPES[rng.random_range(0..WEATHER_TYPES.len())];
            let dur = rng.random_range(1200..=3000);
            w.weather(&format!("C{ci}W{k}"), t, slot + rng.random_range(0..3000), dur, c.station);
        }

        // background traffic, one street each, only in slots without weather
        let free: Vec<i64> = next_slot.collect();
        for k in 0..NOISE_PER_CITY {
            let slot = BASE + free[rng.random_range(0..free.len())] * SLOT;
            let t = TRAFFIC_TYPES[rng.random_range(0..TRAFFIC_TYPES.len())];
            let pos = around(&mut rng, 0.027, (c.lat, c.lon));
            let z = zip(&mut rng);
            let dur = rng.random_range(600..=max_dur);
            w.traffic(&format!("C{ci}B{k}"), t, slot + rng.random_range(0..5400), dur, pos, &format!("B{ci}x{k} Ave"), &z, c);
        }

        if c.hosts_construction {
            for (k, &day) in CONSTRUCTION_DAYS.iter().enumerate() {
                let site = around(&mut rng, 0.018, (c.lat, c.lon));
                let start = BASE + day * 86_400 + 8 * 3600;
                let end = start + 72 * 3600;
                let z = zip(&mut rng);
                w.traffic(&format!("C{ci}K{k}"), "Construction", start, end - start, site, &format!("K{ci}x{k} Rd"), &z, c);
                let window: Vec<i64> = free.iter().copied().filter(|&s| {
                    let t = BASE + s * SLOT;
                    t > start + 3600 && t + SLOT < end
                }).collect();
                for j in 0..DURING_EXTRA {
                    let slot = BASE + window[rng.random_range(0..window.len())] * SLOT;
                    let t = ["Congestion", "Accident", "Lane-Blocked"][j % 3];
                    let pos = around(&mut rng, 0.0015, site);
                    let dur = rng.random_range(600..=1200);
                    w.traffic(&format!("C{ci}K{k}V{j}"), t, slot + rng.random_range(0..5400), dur, pos, &format!("V{ci}x{k}x{j} Way"), &z, c);
                }
            }
        }
    }

    // a few rows for the cleaning path: content duplicates and bad rows
    let dups: Vec<String> = w.traffic.iter().take(3).map(|row| row.replacen(',', "dup,", 1)).collect();
    w.traffic.extend(dups);
    w.traffic.push("BAD1,Accident,not-a-time,2021-01-05T00:00:00Z,39.9,-83.0,High St,R,43201,Columbus,OH".into());
    w.traffic.push("BAD2,Accident,2021-01-05T00:00:00Z,2021-01-05T01:00:00Z,39.9,-83.0,High St,R,43201,Columbus,ZZ".into());

    let header_t = "id,type,start,end,lat,lon,street_name,street_side,zipcode,city,state";
    let header_w = "id,type,start,end,airport_code";
    let join = |h: &str, rows: &[String]| format!("{h}\n{}\n", rows.join("\n"));
    fs::write(out.join("traffic.csv"), join(header_t, &w.traffic)).expect("write traffic");
    fs::write(out.join("weather.csv"), join(header_w, &w.weather)).expect("write weather");
    fs::write(out.join("stations.csv"), format!("{}\n", stations.join("\n"))).expect("write stations");
    fs::write(
        out.join("planted.json"),
        "{\n  \"state\": \"OH\",\n  \"city\": \"Columbus\",\n  \"pattern\": \"Rain Accident Congestion ^ ^\",\n  \"frequency\": 0.3,\n  \"construction_sites\": 9\n}\n",
    )
    .expect("write planted");
    fs::write(
        out.join("config.txt"),
        "# bundled mini-dataset\n\
         traffic_path = traffic.csv\n\
         weather_path = weather.csv\n\
         stations_path = stations.csv\n\
         tz_offsets_h = AZ:-7,CA:-8,CO:-7,FL:-5,GA:-5,MN:-6,NY:-5,OH:-5,TX:-6,WA:-8\n\
         rng_seed = 42\n",
    )
    .expect("write config");
    println!("{} traffic rows, {} weather rows -> {}", w.traffic.len(), w.weather.len(), out.display());
}
