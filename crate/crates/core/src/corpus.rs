//! Check-in ingestion: POIs, trips, queries and leave-one-out splits.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_TRIP_LEN: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poi {
    pub id: String,
    pub lon: f64,
    pub lat: f64,
}

impl Poi {
    pub fn new(id: impl Into<String>, lon: f64, lat: f64) -> Result<Self> {
        let id = id.into();
        if !(-180.0..=180.0).contains(&lon) {
            return Err(Error::Validation(format!("POI {id}: longitude {lon} outside [-180, 180]")));
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::Validation(format!("POI {id}: latitude {lat} outside [-90, 90]")));
        }
        Ok(Poi { id, lon, lat })
    }
}

/// POIs with unique ids, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoiTable {
    pois: Vec<Poi>,
    index: HashMap<String, usize>,
}

impl PoiTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pois(pois: impl IntoIterator<Item = Poi>) -> Result<Self> {
        let mut table = PoiTable::new();
        for poi in pois {
            table.insert(poi)?;
        }
        Ok(table)
    }

    pub fn insert(&mut self, poi: Poi) -> Result<()> {
        if self.index.contains_key(&poi.id) {
            return Err(Error::Integrity(format!("duplicate POI id `{}`", poi.id)));
        }
        self.index.insert(poi.id.clone(), self.pois.len());
        self.pois.push(poi);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Poi> {
        self.index.get(id).map(|&i| &self.pois[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.pois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pois.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Poi> {
        self.pois.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.pois.iter().map(|p| p.id.as_str())
    }
}

/// Fixed offset from UTC used to bucket timestamps into local hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UtcOffset {
    pub seconds: i32,
}

impl UtcOffset {
    pub const UTC: UtcOffset = UtcOffset { seconds: 0 };

    pub fn hours(h: i32) -> Self {
        UtcOffset { seconds: h * 3600 }
    }

    pub fn hour_of(self, timestamp: i64) -> u8 {
        ((timestamp + self.seconds as i64).rem_euclid(86_400) / 3600) as u8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub poi_id: String,
    pub timestamp: i64,
    pub hour: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub trip_id: String,
    pub user_id: String,
    pub visits: Vec<Visit>,
}

impl Trip {
    pub fn len(&self) -> usize {
        self.visits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }

    pub fn poi_ids(&self) -> Vec<&str> {
        self.visits.iter().map(|v| v.poi_id.as_str()).collect()
    }

    pub fn first(&self) -> Option<&Visit> {
        self.visits.first()
    }

    pub fn last(&self) -> Option<&Visit> {
        self.visits.last()
    }

    pub fn is_loop(&self) -> bool {
        match (self.first(), self.last()) {
            (Some(a), Some(b)) => a.poi_id == b.poi_id,
            _ => false,
        }
    }
}

/// A travel demand: start/end POI with their hours and the trip length.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Query {
    pub start_poi: String,
    pub start_hour: u8,
    pub end_poi: String,
    pub end_hour: u8,
    pub n: usize,
}

impl Query {
    pub fn new(
        start_poi: impl Into<String>,
        start_hour: u8,
        end_poi: impl Into<String>,
        end_hour: u8,
        n: usize,
    ) -> Result<Self> {
        let q = Query {
            start_poi: start_poi.into(),
            start_hour,
            end_poi: end_poi.into(),
            end_hour,
            n,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.start_poi == self.end_poi {
            problems.push(format!("start and end POI are both `{}`", self.start_poi));
        }
        if self.n < 2 {
            problems.push(format!("n must be at least 2, got {}", self.n));
        }
        if self.start_hour > 23 {
            problems.push(format!("start_hour {} outside 0..=23", self.start_hour));
        }
        if self.end_hour > 23 {
            problems.push(format!("end_hour {} outside 0..=23", self.end_hour));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub pois: PoiTable,
    pub trips: Vec<Trip>,
}

impl Corpus {
    pub fn new(pois: PoiTable, trips: Vec<Trip>) -> Result<Self> {
        let mut seen = HashSet::new();
        for trip in &trips {
            if !seen.insert(trip.trip_id.as_str()) {
                return Err(Error::Integrity(format!("duplicate trip id `{}`", trip.trip_id)));
            }
            for v in &trip.visits {
                if !pois.contains(&v.poi_id) {
                    return Err(Error::Integrity(format!(
                        "trip {} references unknown POI `{}`",
                        trip.trip_id, v.poi_id
                    )));
                }
            }
        }
        Ok(Corpus { pois, trips })
    }

    /// Distinct users across all trips.
    pub fn user_count(&self) -> usize {
        self.trips.iter().map(|t| t.user_id.as_str()).collect::<HashSet<_>>().len()
    }

    pub fn visit_count(&self) -> usize {
        self.trips.iter().map(Trip::len).sum()
    }
}

/// Column layout of the input check-in files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    /// `poi_id,lon,lat` and `user_id,trip_id,poi_id,timestamp`.
    #[default]
    Canonical,
    /// Semicolon-separated Flickr `userVisits` / `poi` files.
    Flickr,
}

fn reader_for(rdr: impl Read, format: InputFormat) -> csv::Reader<impl Read> {
    let delimiter = match format {
        InputFormat::Canonical => b',',
        InputFormat::Flickr => b';',
    };
    csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(rdr)
}

fn column(headers: &csv::StringRecord, names: &[&str], path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| names.iter().any(|n| h.eq_ignore_ascii_case(n)))
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("missing column {} in header {:?}", names[0], headers),
        })
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    parse_err(path, line, e.to_string())
}

pub fn ingest_pois(path: &Path) -> Result<PoiTable> {
    ingest_pois_with(path, InputFormat::Canonical)
}

pub fn ingest_pois_with(path: &Path, format: InputFormat) -> Result<PoiTable> {
    let file = File::open(path)?;
    read_pois(file, path, format)
}

pub(crate) fn read_pois(rdr: impl Read, path: &Path, format: InputFormat) -> Result<PoiTable> {
    let mut reader = reader_for(rdr, format);
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let (id_col, lon_col, lat_col) = match format {
        InputFormat::Canonical => (
            column(&headers, &["poi_id"], path)?,
            column(&headers, &["lon"], path)?,
            column(&headers, &["lat"], path)?,
        ),
        InputFormat::Flickr => (
            column(&headers, &["poiID", "poi_id"], path)?,
            column(&headers, &["long", "lon", "lng"], path)?,
            column(&headers, &["lat"], path)?,
        ),
    };
    let mut table = PoiTable::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let lon: f64 = field(lon_col)
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad longitude `{}`", field(lon_col))))?;
        let lat: f64 = field(lat_col)
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad latitude `{}`", field(lat_col))))?;
        let poi = Poi::new(field(id_col), lon, lat)?;
        table.insert(poi)?;
    }
    Ok(table)
}

pub fn ingest_trips(path: &Path, pois: &PoiTable, tz: UtcOffset) -> Result<Vec<Trip>> {
    ingest_trips_with(path, pois, tz, InputFormat::Canonical)
}

pub fn ingest_trips_with(
    path: &Path,
    pois: &PoiTable,
    tz: UtcOffset,
    format: InputFormat,
) -> Result<Vec<Trip>> {
    let file = File::open(path)?;
    read_trips(file, path, pois, tz, format)
}

pub(crate) fn read_trips(
    rdr: impl Read,
    path: &Path,
    pois: &PoiTable,
    tz: UtcOffset,
    format: InputFormat,
) -> Result<Vec<Trip>> {
    let mut reader = reader_for(rdr, format);
    let headers = match reader.headers() {
        Ok(h) if !h.is_empty() => h.clone(),
        Ok(_) => {
            log::warn!("{}: empty trips file", path.display());
            return Ok(Vec::new());
        }
        Err(e) => return Err(csv_err(path, e)),
    };
    let (user_col, trip_col, poi_col, ts_col) = match format {
        InputFormat::Canonical => (
            column(&headers, &["user_id"], path)?,
            column(&headers, &["trip_id"], path)?,
            column(&headers, &["poi_id"], path)?,
            column(&headers, &["timestamp"], path)?,
        ),
        InputFormat::Flickr => (
            column(&headers, &["userID"], path)?,
            column(&headers, &["seqID"], path)?,
            column(&headers, &["poiID"], path)?,
            column(&headers, &["dateTaken"], path)?,
        ),
    };

    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Trip> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let poi_id = field(poi_col);
        if !pois.contains(poi_id) {
            return Err(Error::Integrity(format!(
                "{}:{line}: unknown POI `{poi_id}`",
                path.display()
            )));
        }
        let ts_raw = field(ts_col);
        let timestamp: i64 = ts_raw
            .parse::<i64>()
            .or_else(|_| ts_raw.parse::<f64>().map(|f| f as i64))
            .map_err(|_| parse_err(path, line, format!("bad timestamp `{ts_raw}`")))?;
        let trip_id = field(trip_col);
        let trip = grouped.entry(trip_id.to_string()).or_insert_with(|| {
            order.push(trip_id.to_string());
            Trip {
                trip_id: trip_id.to_string(),
                user_id: field(user_col).to_string(),
                visits: Vec::new(),
            }
        });
        trip.visits.push(Visit {
            poi_id: poi_id.to_string(),
            timestamp,
            hour: tz.hour_of(timestamp),
        });
    }
    if order.is_empty() {
        log::warn!("{}: no trip rows", path.display());
    }

    let mut trips = Vec::new();
    for id in order {
        let mut trip = grouped.remove(&id).expect("grouped by id");
        trip.visits.sort_by_key(|v| v.timestamp);
        trip.visits.dedup_by(|b, a| a.poi_id == b.poi_id);
        if trip.visits.len() >= MIN_TRIP_LEN {
            trips.push(trip);
        }
    }
    Ok(trips)
}

/// Reads both files and checks referential integrity.
pub fn load_corpus(
    pois_path: &Path,
    trips_path: &Path,
    tz: UtcOffset,
    format: InputFormat,
) -> Result<Corpus> {
    let pois = ingest_pois_with(pois_path, format)?;
    let trips = ingest_trips_with(trips_path, &pois, tz, format)?;
    Corpus::new(pois, trips)
}

/// Writes the corpus in the canonical two-file layout.
pub fn write_corpus(corpus: &Corpus, pois_path: &Path, trips_path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(pois_path)?);
    w.write_record(["poi_id", "lon", "lat"]).map_err(io_of)?;
    for p in corpus.pois.iter() {
        w.write_record([p.id.clone(), p.lon.to_string(), p.lat.to_string()])
            .map_err(io_of)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(File::create(trips_path)?);
    w.write_record(["user_id", "trip_id", "poi_id", "timestamp"]).map_err(io_of)?;
    for t in &corpus.trips {
        for v in &t.visits {
            w.write_record([
                t.user_id.as_str(),
                t.trip_id.as_str(),
                v.poi_id.as_str(),
                &v.timestamp.to_string(),
            ])
            .map_err(io_of)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn io_of(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn query_of(trip: &Trip) -> Result<Query> {
    let (first, last) = match (trip.first(), trip.last()) {
        (Some(f), Some(l)) if trip.len() >= 2 => (f, l),
        _ => {
            return Err(Error::Validation(format!(
                "trip {} has fewer than two visits",
                trip.trip_id
            )))
        }
    };
    if first.poi_id == last.poi_id {
        return Err(Error::LoopTrip(trip.trip_id.clone()));
    }
    Ok(Query {
        start_poi: first.poi_id.clone(),
        start_hour: first.hour,
        end_poi: last.poi_id.clone(),
        end_hour: last.hour,
        n: trip.len(),
    })
}

#[derive(Debug, Clone)]
pub struct LooSplit {
    pub train: Corpus,
    pub held_out: Trip,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedSplit {
    pub trip_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LooPlan {
    pub splits: Vec<LooSplit>,
    pub skipped: Vec<SkippedSplit>,
}

/// One split per trip whose query is decodable from the remaining trips.
pub fn leave_one_out_splits(corpus: &Corpus) -> Result<LooPlan> {
    if corpus.trips.len() < 2 {
        return Err(Error::Validation(format!(
            "leave-one-out needs at least 2 trips, got {}",
            corpus.trips.len()
        )));
    }
    // POI -> number of trips containing it; lets us test "seen in train" without rebuilding.
    let mut trip_count: HashMap<&str, usize> = HashMap::new();
    for t in &corpus.trips {
        let distinct: HashSet<&str> = t.visits.iter().map(|v| v.poi_id.as_str()).collect();
        for p in distinct {
            *trip_count.entry(p).or_default() += 1;
        }
    }

    let mut plan = LooPlan::default();
    for (i, held) in corpus.trips.iter().enumerate() {
        let query = match query_of(held) {
            Ok(q) => q,
            Err(e) => {
                plan.skipped.push(SkippedSplit {
                    trip_id: held.trip_id.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let seen_elsewhere = |poi: &str| trip_count.get(poi).copied().unwrap_or(0) > 1;
        let missing: Vec<&str> = [query.start_poi.as_str(), query.end_poi.as_str()]
            .into_iter()
            .filter(|p| !seen_elsewhere(p))
            .collect();
        if !missing.is_empty() {
            plan.skipped.push(SkippedSplit {
                trip_id: held.trip_id.clone(),
                reason: format!("endpoint(s) {} absent from training trips", missing.join(", ")),
            });
            continue;
        }
        let train = corpus
            .trips
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, t)| t.clone())
            .collect();
        plan.splits.push(LooSplit {
            train: Corpus {
                pois: corpus.pois.clone(),
                trips: train,
            },
            held_out: held.clone(),
        });
    }
    Ok(plan)
}

/// Writes a walk/trip list as one space-separated sequence per line.
pub fn write_sequences<W: Write>(mut w: W, seqs: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    for seq in seqs {
        writeln!(w, "{}", seq.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn pois(csv: &str) -> Result<PoiTable> {
        read_pois(Cursor::new(csv), Path::new("pois.csv"), InputFormat::Canonical)
    }

    fn trips(csv: &str, table: &PoiTable) -> Result<Vec<Trip>> {
        read_trips(Cursor::new(csv), Path::new("trips.csv"), table, UtcOffset::UTC, InputFormat::Canonical)
    }

    fn abc_table() -> PoiTable {
        pois("poi_id,lon,lat\nA,0,0\nB,0.01,0\nC,0.02,0\nD,0.03,0\n").unwrap()
    }

    fn trip(id: &str, seq: &[(&str, u8)]) -> Trip {
        Trip {
            trip_id: id.into(),
            user_id: "u".into(),
            visits: seq
                .iter()
                .enumerate()
                .map(|(i, &(p, h))| Visit {
                    poi_id: p.into(),
                    timestamp: h as i64 * 3600 + i as i64,
                    hour: h,
                })
                .collect(),
        }
    }

    #[test]
    fn poi_row_maps_fields() {
        let t = pois("poi_id,lon,lat\np1,135.50,34.69\n").unwrap();
        assert_eq!(t.get("p1"), Some(&Poi { id: "p1".into(), lon: 135.50, lat: 34.69 }));
    }

    #[test]
    fn poi_out_of_range_rejected() {
        assert!(matches!(pois("poi_id,lon,lat\np1,200.0,34.69\n"), Err(Error::Validation(_))));
        assert!(matches!(pois("poi_id,lon,lat\np1,10,-91\n"), Err(Error::Validation(_))));
    }

    #[test]
    fn poi_duplicate_and_malformed() {
        assert!(matches!(
            pois("poi_id,lon,lat\np1,1,1\np1,2,2\n"),
            Err(Error::Integrity(_))
        ));
        match pois("poi_id,lon,lat\np1,1,1\np2,x,2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        match pois("poi_id,lon,lat\np1,1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn short_trips_dropped_and_hours_derived() {
        let table = abc_table();
        let csv = "user_id,trip_id,poi_id,timestamp\n\
                   u1,t1,A,0\nu1,t1,B,3600\nu1,t1,C,7200\n\
                   u2,t2,A,0\nu2,t2,B,10\n";
        let out = trips(csv, &table).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].visits[0].hour, 0);
        assert_eq!(out[0].visits[2].hour, 2);
    }

    #[test]
    fn visits_sorted_ties_stable_and_duplicates_collapsed() {
        let table = abc_table();
        let csv = "user_id,trip_id,poi_id,timestamp\n\
                   u,t,C,300\nu,t,A,100\nu,t,B,100\nu,t,B,150\nu,t,D,400\n";
        let out = trips(csv, &table).unwrap();
        assert_eq!(out[0].poi_ids(), vec!["A", "B", "C", "D"]);
    }

    #[test]
    fn unknown_poi_is_integrity_error() {
        let table = abc_table();
        let csv = "user_id,trip_id,poi_id,timestamp\nu,t,Z,0\n";
        assert!(matches!(trips(csv, &table), Err(Error::Integrity(_))));
    }

    #[test]
    fn empty_file_gives_empty_list() {
        let table = abc_table();
        assert!(trips("", &table).unwrap().is_empty());
        assert!(trips("user_id,trip_id,poi_id,timestamp\n", &table).unwrap().is_empty());
    }

    #[test]
    fn timezone_shifts_hour() {
        assert_eq!(UtcOffset::UTC.hour_of(0), 0);
        assert_eq!(UtcOffset::hours(9).hour_of(0), 9);
        assert_eq!(UtcOffset::hours(-5).hour_of(0), 19);
    }

    #[test]
    fn flickr_layout() {
        let table = read_pois(
            Cursor::new("poiID;poiName;lat;long;theme\n1;Castle;34.68;135.52;Historical\n2;Tower;34.65;135.50;Structure\n3;Park;34.66;135.51;Park\n"),
            Path::new("poi.csv"),
            InputFormat::Flickr,
        )
        .unwrap();
        assert_eq!(table.get("1").unwrap().lon, 135.52);
        let visits = "photoID;userID;dateTaken;poiID;poiTheme;poiFreq;seqID\n\
                      9;u@N0;1000;1;Historical;10;7\n10;u@N0;5000;2;Structure;3;7\n11;u@N0;9000;3;Park;4;7\n";
        let out = read_trips(Cursor::new(visits), Path::new("v.csv"), &table, UtcOffset::UTC, InputFormat::Flickr)
            .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].trip_id, "7");
        assert_eq!(out[0].user_id, "u@N0");
        assert_eq!(out[0].poi_ids(), vec!["1", "2", "3"]);
    }

    #[test]
    fn query_extraction() {
        let q = query_of(&trip("t", &[("A", 9), ("B", 11), ("C", 14)])).unwrap();
        assert_eq!(q, Query::new("A", 9, "C", 14, 3).unwrap());
        assert!(matches!(
            query_of(&trip("t", &[("A", 9), ("B", 11), ("A", 14)])),
            Err(Error::LoopTrip(_))
        ));
        let q = query_of(&trip("t", &[("A", 1), ("B", 2), ("C", 3), ("D", 4), ("B", 5)])).unwrap();
        assert_eq!(q.n, 5);
    }

    #[test]
    fn query_invariants() {
        assert!(Query::new("A", 0, "A", 1, 3).is_err());
        assert!(Query::new("A", 0, "B", 1, 1).is_err());
        assert!(Query::new("A", 24, "B", 1, 2).is_err());
    }

    #[test]
    fn loo_basic_and_errors() {
        let table = abc_table();
        let ts = vec![
            trip("1", &[("A", 1), ("B", 2), ("C", 3)]),
            trip("2", &[("A", 1), ("C", 2), ("B", 3)]),
            trip("3", &[("B", 1), ("A", 2), ("C", 3)]),
        ];
        let corpus = Corpus::new(table.clone(), ts.clone()).unwrap();
        let plan = leave_one_out_splits(&corpus).unwrap();
        assert_eq!(plan.splits.len(), 3);
        for s in &plan.splits {
            assert_eq!(s.train.trips.len(), 2);
            assert!(s.train.trips.iter().all(|t| t.trip_id != s.held_out.trip_id));
        }
        let single = Corpus::new(table, ts[..1].to_vec()).unwrap();
        assert!(leave_one_out_splits(&single).is_err());
    }

    #[test]
    fn loo_skips_unseen_endpoints_and_loops() {
        // Hand-built: trip 4 starts at D, which no other trip visits; trip 3 is a loop.
        let table = abc_table();
        let ts = vec![
            trip("1", &[("A", 1), ("B", 2), ("C", 3)]),
            trip("2", &[("A", 1), ("C", 2), ("B", 3)]),
            trip("3", &[("B", 1), ("C", 2), ("B", 3)]),
            trip("4", &[("D", 1), ("A", 2), ("C", 3)]),
        ];
        let corpus = Corpus::new(table, ts).unwrap();
        let plan = leave_one_out_splits(&corpus).unwrap();
        let skipped: Vec<&str> = plan.skipped.iter().map(|s| s.trip_id.as_str()).collect();
        assert_eq!(skipped, vec!["3", "4"]);
        assert_eq!(plan.splits.len(), 2);
        assert!(plan.skipped[1].reason.contains('D'));
    }
}
