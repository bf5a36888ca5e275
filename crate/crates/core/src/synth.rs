//! Seeded synthetic corpora with known structure.

use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;

use crate::corpus::{Corpus, Poi, PoiTable, Trip, Visit};
use crate::geograph::Walk;
use crate::rng;
use crate::vocab::Vocabulary;

const DAY_START: i64 = 1_500_000_000 - 1_500_000_000 % 86_400;
const CENTER: (f64, f64) = (135.50, 34.69);

/// `n` POIs evenly spaced on a circle of `radius_km`, ids `p00`, `p01`, ...
pub fn poi_ring(n: usize, radius_km: f64) -> PoiTable {
    let deg_lat = radius_km / 111.0;
    let deg_lon = deg_lat / CENTER.1.to_radians().cos();
    let pois = (0..n).map(|i| {
        let a = i as f64 / n as f64 * std::f64::consts::TAU;
        Poi::new(poi_name(i), CENTER.0 + deg_lon * a.cos(), CENTER.1 + deg_lat * a.sin()).expect("in range")
    });
    PoiTable::from_pois(pois).expect("distinct ids")
}

pub fn poi_name(i: usize) -> String {
    format!("p{i:02}")
}

/// One visit per hour from `start_hour`, clamped to the day.
pub fn make_trip(trip_id: &str, user_id: &str, pois: &[usize], start_hour: u8) -> Trip {
    let visits = pois
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let hour = (start_hour as usize + k).min(23) as u8;
            Visit {
                poi_id: poi_name(p),
                timestamp: DAY_START + hour as i64 * 3600 + k as i64 * 60,
                hour,
            }
        })
        .collect();
    Trip {
        trip_id: trip_id.to_string(),
        user_id: user_id.to_string(),
        visits,
    }
}

/// Random trips of length 3..=6 over `n_pois` POIs, no repeated POIs, every
/// `(start, end)` pair distinct.
pub fn distinct_query_corpus(n_trips: usize, n_pois: usize, seed: u64) -> Corpus {
    let mut rng = rng::seeded(seed);
    let pois = poi_ring(n_pois, 3.0);
    let mut used = HashSet::new();
    let mut trips = Vec::with_capacity(n_trips);
    while trips.len() < n_trips {
        let n = rng.gen_range(3..=6usize.min(n_pois));
        let seq: Vec<usize> = index::sample(&mut rng, n_pois, n).into_vec();
        if !used.insert((seq[0], seq[n - 1])) {
            continue;
        }
        let id = trips.len();
        let hour = rng.gen_range(8..12u8);
        trips.push(make_trip(&format!("t{id:03}"), &format!("u{}", id % 5), &seq, hour));
    }
    Corpus::new(pois, trips).expect("consistent")
}

/// 20 trips over 15 POIs with pairwise distinct queries.
pub fn memorization_corpus(seed: u64) -> Corpus {
    distinct_query_corpus(20, 15, seed)
}

/// Trips cut from a few latent routes over a ring of `n_pois`.
///
/// Each route is a fixed sequence of `route_len` distinct POIs; routes share POIs,
/// so the successor of a POI depends on the POI before it. A trip is a contiguous
/// segment of 3 to 6 POIs of one route, with each interior POI replaced by a
/// random unused POI with probability `noise`.
pub fn second_order_corpus(n_trips: usize, n_pois: usize, noise: f64, seed: u64) -> Corpus {
    const ROUTES: usize = 6;
    let route_len = 8.min(n_pois);
    let mut rng = rng::seeded(seed);
    let pois = poi_ring(n_pois, 5.0);
    let routes: Vec<Vec<usize>> = (0..ROUTES)
        .map(|_| index::sample(&mut rng, n_pois, route_len).into_vec())
        .collect();
    let mut trips = Vec::with_capacity(n_trips);
    while trips.len() < n_trips {
        let route = &routes[rng.gen_range(0..ROUTES)];
        let n = rng.gen_range(3..=6usize.min(route_len));
        let start = rng.gen_range(0..=route_len - n);
        let mut seq: Vec<usize> = route[start..start + n].to_vec();
        for k in 1..n - 1 {
            if rng.gen::<f64>() < noise {
                let free: Vec<usize> = (0..n_pois).filter(|p| !seq.contains(p)).collect();
                if let Some(&p) = free.choose(&mut rng) {
                    seq[k] = p;
                }
            }
        }
        let id = trips.len();
        let hour = rng.gen_range(8..14u8);
        trips.push(make_trip(&format!("t{id:03}"), &format!("u{}", id % 17), &seq, hour));
    }
    Corpus::new(pois, trips).expect("consistent")
}

#[derive(Debug, Clone)]
pub struct PlantedWalks {
    pub vocab: Vocabulary,
    pub walks: Vec<Walk>,
    /// Cluster label per vocabulary index.
    pub cluster: Vec<usize>,
}

/// Walks that never leave one of two disjoint POI clusters.
pub fn planted_cluster_walks(per_cluster: usize, n_walks: usize, seed: u64) -> PlantedWalks {
    assert!(per_cluster >= 3, "clusters need room for an interior POI");
    let mut rng = rng::seeded(seed);
    let vocab: Vocabulary = (0..2 * per_cluster).map(poi_name).collect();
    let cluster = (0..2 * per_cluster).map(|i| i / per_cluster).collect();
    let walks = (0..n_walks)
        .map(|_| {
            let base = rng.gen_range(0..2) * per_cluster;
            let ends = index::sample(&mut rng, per_cluster, 2);
            let (src, dst) = (base + ends.index(0), base + ends.index(1));
            let interior: Vec<usize> = (0..per_cluster).map(|i| base + i).filter(|&p| p != src && p != dst).collect();
            let len = rng.gen_range(1..=interior.len().min(4));
            let mut pois = vec![poi_name(src)];
            pois.extend(interior.choose_multiple(&mut rng, len).map(|&p| poi_name(p)));
            pois.push(poi_name(dst));
            Walk { pois }
        })
        .collect();
    PlantedWalks { vocab, walks, cluster }
}
