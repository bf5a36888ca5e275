//! Augmented POI graph, its transition matrix, and endpoint-constrained random walks.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::Rng as _;

use crate::corpus::{Poi, PoiTable, Trip};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::vocab::Vocabulary;

pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const DEFAULT_THRESHOLD_KM: f64 = 3.0;

/// Great-circle distance in kilometers.
pub fn haversine_km(a: &Poi, b: &Poi) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Directed POI graph with edge frequencies. No self-loops.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoiGraph {
    nodes: Vocabulary,
    edges: BTreeMap<(usize, usize), u64>,
}

impl PoiGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &Vocabulary {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn add_node(&mut self, id: &str) -> usize {
        self.nodes.intern(id)
    }

    /// Adds `count` to the edge `src -> dst`. Self-loops are ignored.
    pub fn add_edge(&mut self, src: &str, dst: &str, count: u64) {
        if src == dst || count == 0 {
            return;
        }
        let s = self.nodes.intern(src);
        let d = self.nodes.intern(dst);
        *self.edges.entry((s, d)).or_default() += count;
    }

    pub fn frequency(&self, src: &str, dst: &str) -> u64 {
        match (self.nodes.get(src), self.nodes.get(dst)) {
            (Some(s), Some(d)) => self.edges.get(&(s, d)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn has_edge(&self, src: &str, dst: &str) -> bool {
        self.frequency(src, dst) > 0
    }

    /// Edges as `(src, dst, freq)` in node-index order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.edges
            .iter()
            .map(|(&(s, d), &f)| (self.nodes.id(s), self.nodes.id(d), f))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["src", "dst", "freq"]).map_err(io)?;
        for (s, d, f) in self.edges() {
            w.write_record([s, d, &f.to_string()]).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads an edge list; node order follows `nodes` so indices agree with a vocabulary.
    pub fn read_csv<R: std::io::Read>(r: R, nodes: &Vocabulary) -> Result<Self> {
        let mut graph = PoiGraph {
            nodes: nodes.clone(),
            edges: BTreeMap::new(),
        };
        let mut reader = csv::Reader::from_reader(r);
        for (i, rec) in reader.records().enumerate() {
            let line = i as u64 + 2;
            let rec = rec.map_err(|e| Error::Parse {
                path: "graph.csv".into(),
                line,
                message: e.to_string(),
            })?;
            let freq: u64 = rec[2].parse().map_err(|_| Error::Parse {
                path: "graph.csv".into(),
                line,
                message: format!("bad frequency `{}`", &rec[2]),
            })?;
            graph.add_edge(&rec[0], &rec[1], freq);
        }
        Ok(graph)
    }
}

/// Counts every consecutive transition between distinct POIs.
pub fn build_base_graph(trips: &[Trip]) -> PoiGraph {
    let mut graph = PoiGraph::new();
    for trip in trips {
        for v in &trip.visits {
            graph.add_node(&v.poi_id);
        }
        for pair in trip.visits.windows(2) {
            graph.add_edge(&pair[0].poi_id, &pair[1].poi_id, 1);
        }
    }
    graph
}

/// Links every POI pair within `threshold_km` in both directions.
/// Existing frequencies are kept; new geographic edges get frequency 1.
pub fn augment_graph(graph: &PoiGraph, pois: &PoiTable, threshold_km: f64) -> PoiGraph {
    let mut out = graph.clone();
    for p in pois.iter() {
        out.add_node(&p.id);
    }
    let all: Vec<&Poi> = pois.iter().collect();
    for (i, a) in all.iter().enumerate() {
        for b in &all[i + 1..] {
            if haversine_km(a, b) <= threshold_km {
                for (s, d) in [(a, b), (b, a)] {
                    if !out.has_edge(&s.id, &d.id) {
                        out.add_edge(&s.id, &d.id, 1);
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    dst: Vec<usize>,
    prob: Vec<f64>,
    cumulative: Vec<f64>,
}

/// Row-stochastic transition probabilities `P(j|i) = f_ij / sum_k f_ik`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    nodes: Vocabulary,
    rows: Vec<Option<Row>>,
}

pub fn transition_matrix(graph: &PoiGraph) -> TransitionMatrix {
    let n = graph.node_count();
    let mut grouped: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n];
    for (&(s, d), &f) in &graph.edges {
        grouped[s].push((d, f));
    }
    let rows = grouped
        .into_iter()
        .map(|edges| {
            if edges.is_empty() {
                return None;
            }
            let total: u64 = edges.iter().map(|&(_, f)| f).sum();
            let prob: Vec<f64> = edges.iter().map(|&(_, f)| f as f64 / total as f64).collect();
            let mut acc = 0u64;
            let cumulative = edges
                .iter()
                .map(|&(_, f)| {
                    acc += f;
                    acc as f64 / total as f64
                })
                .collect();
            Some(Row {
                dst: edges.iter().map(|&(d, _)| d).collect(),
                prob,
                cumulative,
            })
        })
        .collect();
    TransitionMatrix {
        nodes: graph.nodes.clone(),
        rows,
    }
}

impl TransitionMatrix {
    pub fn nodes(&self) -> &Vocabulary {
        &self.nodes
    }

    pub fn has_row(&self, src: usize) -> bool {
        self.rows.get(src).is_some_and(Option::is_some)
    }

    /// `(dst, probability)` pairs of a row, or `None` for sinks.
    pub fn row(&self, src: usize) -> Option<impl Iterator<Item = (usize, f64)> + '_> {
        self.rows
            .get(src)?
            .as_ref()
            .map(|r| r.dst.iter().copied().zip(r.prob.iter().copied()))
    }

    pub fn prob(&self, src: usize, dst: usize) -> f64 {
        self.rows
            .get(src)
            .and_then(Option::as_ref)
            .and_then(|r| r.dst.binary_search(&dst).ok().map(|i| r.prob[i]))
            .unwrap_or(0.0)
    }

    pub fn prob_by_id(&self, src: &str, dst: &str) -> f64 {
        match (self.nodes.get(src), self.nodes.get(dst)) {
            (Some(s), Some(d)) => self.prob(s, d),
            _ => 0.0,
        }
    }

    fn sample(&self, src: usize, rng: &mut Rng) -> Option<usize> {
        let row = self.rows.get(src)?.as_ref()?;
        let u: f64 = rng.gen();
        let i = row.cumulative.partition_point(|&c| c <= u);
        Some(row.dst[i.min(row.dst.len() - 1)])
    }
}

/// An accepted walk, as POI ids from the query source to its destination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walk {
    pub pois: Vec<String>,
}

impl Walk {
    pub fn len(&self) -> usize {
        self.pois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pois.is_empty()
    }

    pub fn src(&self) -> &str {
        &self.pois[0]
    }

    pub fn dst(&self) -> &str {
        &self.pois[self.pois.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryCandidate {
    pub src: usize,
    pub dst: usize,
}

/// All ordered pairs of distinct nodes.
pub fn enumerate_query_candidates(graph: &PoiGraph) -> Vec<QueryCandidate> {
    let n = graph.node_count();
    let mut out = Vec::with_capacity(n.saturating_sub(1) * n);
    for src in 0..n {
        for dst in 0..n {
            if src != dst {
                out.push(QueryCandidate { src, dst });
            }
        }
    }
    out
}

/// One walk from `src` that must reach `dst` in at most `alpha` steps.
/// Arriving at `dst` on the very first step, dead ends, and exhausting the
/// budget all reject the walk.
pub fn causal_random_walk(
    matrix: &TransitionMatrix,
    src: usize,
    dst: usize,
    alpha: usize,
    rng: &mut Rng,
) -> Option<Walk> {
    walk_indices(matrix, src, dst, alpha, rng).map(|idx| Walk {
        pois: idx.into_iter().map(|i| matrix.nodes.id(i).to_string()).collect(),
    })
}

fn walk_indices(
    matrix: &TransitionMatrix,
    src: usize,
    dst: usize,
    alpha: usize,
    rng: &mut Rng,
) -> Option<Vec<usize>> {
    if src == dst {
        return None;
    }
    let mut seq = vec![src];
    let mut cur = src;
    for step in 1..=alpha {
        let next = matrix.sample(cur, rng)?;
        seq.push(next);
        if next == dst {
            return (step > 1).then_some(seq);
        }
        cur = next;
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    pub per_query: usize,
    pub alpha: usize,
    pub max_attempts: usize,
}

impl Default for WalkParams {
    fn default() -> Self {
        WalkParams {
            per_query: 5,
            alpha: 6,
            max_attempts: 20,
        }
    }
}

/// Up to `per_query` accepted walks per candidate, each candidate on its own RNG stream.
pub fn generate_walk_corpus(
    matrix: &TransitionMatrix,
    candidates: &[QueryCandidate],
    params: WalkParams,
    seed: u64,
) -> Vec<Walk> {
    let mut out = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        if !matrix.has_row(c.src) {
            continue;
        }
        let mut rng = rng::stream(seed, i as u64);
        let mut accepted = 0;
        let budget = params.per_query * params.max_attempts;
        for _ in 0..budget {
            if accepted == params.per_query {
                break;
            }
            if let Some(w) = causal_random_walk(matrix, c.src, c.dst, params.alpha, &mut rng) {
                out.push(w);
                accepted += 1;
            }
        }
    }
    out
}

pub fn write_walks<W: Write>(mut w: W, walks: &[Walk]) -> Result<()> {
    for walk in walks {
        writeln!(w, "{}", walk.pois.join(" "))?;
    }
    Ok(())
}

pub fn read_walks<R: BufRead>(r: R) -> Result<Vec<Walk>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let pois: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if pois.is_empty() {
            continue;
        }
        if pois.len() < 3 {
            return Err(Error::Parse {
                path: "walks.txt".into(),
                line: i as u64 + 1,
                message: format!("walk of length {} (< 3)", pois.len()),
            });
        }
        out.push(Walk { pois });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Visit;

    fn poi(id: &str, lon: f64, lat: f64) -> Poi {
        Poi::new(id, lon, lat).unwrap()
    }

    fn trip(seq: &[&str]) -> Trip {
        Trip {
            trip_id: seq.join(""),
            user_id: "u".into(),
            visits: seq
                .iter()
                .enumerate()
                .map(|(i, p)| Visit {
                    poi_id: p.to_string(),
                    timestamp: i as i64,
                    hour: 0,
                })
                .collect(),
        }
    }

    fn chain() -> TransitionMatrix {
        let mut g = PoiGraph::new();
        g.add_edge("A", "B", 1);
        g.add_edge("B", "C", 1);
        transition_matrix(&g)
    }

    #[test]
    fn haversine_reference_distances() {
        let origin = poi("o", 0.0, 0.0);
        assert_eq!(haversine_km(&origin, &origin), 0.0);
        let antipode = haversine_km(&origin, &poi("a", 180.0, 0.0));
        assert!((antipode - std::f64::consts::PI * EARTH_RADIUS_KM).abs() < 1e-6);
        assert!((antipode - 20015.09).abs() < 0.01);
        let pole = haversine_km(&origin, &poi("n", 0.0, 90.0));
        assert!((pole - 10007.54).abs() < 0.01);
        let (a, b) = (poi("a", 135.5, 34.6), poi("b", 135.52, 34.7));
        assert_eq!(haversine_km(&a, &b), haversine_km(&b, &a));
    }

    #[test]
    fn base_graph_counts_transitions() {
        let g = build_base_graph(&[trip(&["A", "B", "C"])]);
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges, vec![("A", "B", 1), ("B", "C", 1)]);

        let g = build_base_graph(&[trip(&["A", "B", "C"]), trip(&["A", "B", "D"])]);
        assert_eq!(g.frequency("A", "B"), 2);
        assert_eq!(build_base_graph(&[]).edge_count(), 0);
    }

    // 1 degree of latitude is ~111.19 km.
    fn km_north(km: f64) -> f64 {
        km / (EARTH_RADIUS_KM * std::f64::consts::PI / 180.0)
    }

    #[test]
    fn augmentation_threshold() {
        let pois = PoiTable::from_pois([
            poi("A", 0.0, 0.0),
            poi("B", 0.0, km_north(2.9)),
            poi("C", 0.0, km_north(2.9 + 3.1)),
        ])
        .unwrap();
        let g = augment_graph(&PoiGraph::new(), &pois, DEFAULT_THRESHOLD_KM);
        assert_eq!(g.frequency("A", "B"), 1);
        assert_eq!(g.frequency("B", "A"), 1);
        assert!(!g.has_edge("B", "C"));
        assert!(!g.has_edge("A", "C"));
    }

    #[test]
    fn augmentation_keeps_behavioral_counts() {
        let pois = PoiTable::from_pois([
            poi("A", 0.0, 0.0),
            poi("B", 0.0, km_north(1.0)),
            poi("C", 0.0, km_north(50.0)),
        ])
        .unwrap();
        let mut base = PoiGraph::new();
        base.add_edge("A", "B", 5);
        base.add_edge("B", "C", 2);
        let g = augment_graph(&base, &pois, DEFAULT_THRESHOLD_KM);
        assert_eq!(g.frequency("A", "B"), 5);
        assert_eq!(g.frequency("B", "A"), 1);
        assert_eq!(g.frequency("B", "C"), 2);
        for (s, d, f) in base.edges() {
            assert_eq!(g.frequency(s, d), f);
        }
    }

    #[test]
    fn transition_probabilities() {
        let mut g = PoiGraph::new();
        g.add_edge("A", "B", 3);
        g.add_edge("A", "C", 1);
        g.add_edge("B", "C", 7);
        let m = transition_matrix(&g);
        assert_eq!(m.prob_by_id("A", "B"), 0.75);
        assert_eq!(m.prob_by_id("A", "C"), 0.25);
        assert_eq!(m.prob_by_id("B", "C"), 1.0);
        let c = m.nodes().get("C").unwrap();
        assert!(m.row(c).is_none());
    }

    #[test]
    fn candidates_enumerate_ordered_pairs() {
        let mut g = PoiGraph::new();
        g.add_node("A");
        assert!(enumerate_query_candidates(&g).is_empty());
        g.add_node("B");
        assert_eq!(
            enumerate_query_candidates(&g),
            vec![QueryCandidate { src: 0, dst: 1 }, QueryCandidate { src: 1, dst: 0 }]
        );
        g.add_node("C");
        assert_eq!(enumerate_query_candidates(&g).len(), 6);
    }

    #[test]
    fn chain_walk_is_forced() {
        let m = chain();
        let mut r = rng::seeded(1);
        let w = causal_random_walk(&m, 0, 2, 6, &mut r).unwrap();
        assert_eq!(w.pois, vec!["A", "B", "C"]);
    }

    #[test]
    fn one_hop_arrival_rejected() {
        let mut g = PoiGraph::new();
        g.add_edge("A", "C", 1);
        let m = transition_matrix(&g);
        let mut r = rng::seeded(1);
        assert!(causal_random_walk(&m, 0, 1, 6, &mut r).is_none());
    }

    #[test]
    fn budget_and_dead_ends() {
        let mut g = PoiGraph::new();
        for (s, d) in [("A", "B"), ("B", "C"), ("C", "D")] {
            g.add_edge(s, d, 1);
        }
        let m = transition_matrix(&g);
        let mut r = rng::seeded(3);
        assert!(causal_random_walk(&m, 0, 3, 2, &mut r).is_none());
        assert!(causal_random_walk(&m, 0, 3, 3, &mut r).is_some());
        // D is a sink: no walk can leave it.
        assert!(causal_random_walk(&m, 3, 0, 6, &mut r).is_none());
    }

    #[test]
    fn corpus_from_chain() {
        let m = chain();
        let params = WalkParams { per_query: 3, ..WalkParams::default() };
        let walks = generate_walk_corpus(&m, &[QueryCandidate { src: 0, dst: 2 }], params, 9);
        assert_eq!(walks.len(), 3);
        assert!(walks.iter().all(|w| w.pois == ["A", "B", "C"]));
        let none = generate_walk_corpus(&m, &[QueryCandidate { src: 2, dst: 0 }], params, 9);
        assert!(none.is_empty());
    }

    #[test]
    fn walks_round_trip_text() {
        let walks = vec![
            Walk { pois: vec!["A".into(), "B".into(), "C".into()] },
            Walk { pois: vec!["x1".into(), "x2".into(), "x1".into(), "x3".into()] },
        ];
        let mut buf = Vec::new();
        write_walks(&mut buf, &walks).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "A B C\nx1 x2 x1 x3\n");
        assert_eq!(read_walks(&buf[..]).unwrap(), walks);
    }

    #[test]
    fn graph_csv_round_trip() {
        let mut g = PoiGraph::new();
        g.add_edge("A", "B", 3);
        g.add_edge("B", "A", 1);
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "src,dst,freq\nA,B,3\nB,A,1\n");
        let back = PoiGraph::read_csv(&buf[..], g.nodes()).unwrap();
        assert_eq!(back, g);
    }
}
