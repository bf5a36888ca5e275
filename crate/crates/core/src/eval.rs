//! Sequence metrics, the first-order Markov baseline, and leave-one-out evaluation.

use std::collections::{HashMap, HashSet};
use std::hash::Hash;
use std::io::Write;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::config::{LoocvMode, TrainConfig};
use crate::corpus::{leave_one_out_splits, query_of, Corpus, Query, Trip};
use crate::error::{Error, Result};
use crate::geograph::{build_base_graph, transition_matrix, TransitionMatrix};
use crate::rng;
use crate::selftrain::{self, Model};

fn f1_of_sets<T: Eq + Hash>(rec: &HashSet<T>, truth: &HashSet<T>) -> f64 {
    let hit = rec.intersection(truth).count() as f64;
    if hit == 0.0 {
        return 0.0;
    }
    let p = hit / rec.len() as f64;
    let r = hit / truth.len() as f64;
    2.0 * p * r / (p + r)
}

fn as_set<T: AsRef<str>>(s: &[T]) -> HashSet<&str> {
    s.iter().map(|x| x.as_ref()).collect()
}

/// Set-based F1 between a recommended and a true POI sequence.
pub fn f1_score<T: AsRef<str>>(rec: &[T], truth: &[T]) -> Result<f64> {
    if rec.is_empty() || truth.is_empty() {
        return Err(Error::Validation("f1_score needs non-empty sequences".into()));
    }
    Ok(f1_of_sets(&as_set(rec), &as_set(truth)))
}

/// Ordered pairs `(x, y)` with `x` earlier than `y`.
fn ordered_pairs<T: AsRef<str>>(seq: &[T]) -> HashSet<(&str, &str)> {
    let mut out = HashSet::new();
    for (i, a) in seq.iter().enumerate() {
        for b in &seq[i + 1..] {
            out.insert((a.as_ref(), b.as_ref()));
        }
    }
    out
}

/// F1 over the ordered-pair sets of the two sequences.
pub fn pairs_f1<T: AsRef<str>>(rec: &[T], truth: &[T]) -> Result<f64> {
    if rec.len() < 2 || truth.len() < 2 {
        return Err(Error::Validation("pairs_f1 needs sequences of length >= 2".into()));
    }
    Ok(f1_of_sets(&ordered_pairs(rec), &ordered_pairs(truth)))
}

/// Anything that maps a query to a trip.
pub trait Recommender {
    fn recommend(&self, query: &Query) -> Result<Vec<String>>;
}

impl Recommender for Model {
    fn recommend(&self, query: &Query) -> Result<Vec<String>> {
        Model::recommend(self, query)
    }
}

/// Builds a recommender from a training corpus.
pub trait Trainer: Sync {
    fn name(&self) -> String;
    fn fit(&self, train: &Corpus, seed: u64) -> Result<Box<dyn Recommender>>;
}

pub struct MarkovModel {
    matrix: TransitionMatrix,
}

/// First-order transition matrix over training trips only.
pub fn markov_train(trips: &[Trip]) -> MarkovModel {
    MarkovModel {
        matrix: transition_matrix(&build_base_graph(trips)),
    }
}

pub fn markov_recommend(model: &MarkovModel, query: &Query) -> Result<Vec<String>> {
    query.validate()?;
    let nodes = model.matrix.nodes();
    let src = nodes.lookup(&query.start_poi)?;
    let dst = nodes.lookup(&query.end_poi)?;
    let size = nodes.len();
    if query.n > size {
        return Err(Error::Infeasible(format!("n = {} exceeds the {size} known POIs", query.n)));
    }
    let mut seq = vec![src];
    while seq.len() < query.n - 1 {
        let cur = seq[seq.len() - 1];
        let eligible = |p: usize| p != dst && !seq.contains(&p);
        let mut best: Option<(f64, usize)> = None;
        if let Some(row) = model.matrix.row(cur) {
            for (p, prob) in row {
                if eligible(p) && best.is_none_or(|(bp, bi)| prob > bp || (prob == bp && p < bi)) {
                    best = Some((prob, p));
                }
            }
        }
        // Unreachable step: the smallest eligible index, i.e. a uniform score tie.
        let next = match best {
            Some((_, p)) => p,
            None => (0..size).find(|&p| eligible(p)).expect("n <= |L| leaves an eligible POI"),
        };
        seq.push(next);
    }
    seq.push(dst);
    Ok(seq.into_iter().map(|i| nodes.id(i).to_string()).collect())
}

impl Recommender for MarkovModel {
    fn recommend(&self, query: &Query) -> Result<Vec<String>> {
        markov_recommend(self, query)
    }
}

pub struct MarkovTrainer;

impl Trainer for MarkovTrainer {
    fn name(&self) -> String {
        "markov".into()
    }

    fn fit(&self, train: &Corpus, _seed: u64) -> Result<Box<dyn Recommender>> {
        Ok(Box::new(markov_train(&train.trips)))
    }
}

pub struct SelfTripTrainer {
    pub config: TrainConfig,
    pub label: String,
}

impl SelfTripTrainer {
    pub fn new(config: TrainConfig) -> Self {
        SelfTripTrainer { config, label: "selftrip".into() }
    }
}

impl Trainer for SelfTripTrainer {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn fit(&self, train: &Corpus, seed: u64) -> Result<Box<dyn Recommender>> {
        let cfg = TrainConfig { seed, ..self.config.clone() };
        Ok(Box::new(selftrain::train(train, &cfg)?.model))
    }
}

/// Answers every query with the corpus trip that produced it; an upper bound.
pub struct OracleTrainer {
    trips: HashMap<Query, Vec<String>>,
}

impl OracleTrainer {
    pub fn new(corpus: &Corpus) -> Self {
        let trips = corpus
            .trips
            .iter()
            .filter_map(|t| Some((query_of(t).ok()?, t.poi_ids().into_iter().map(String::from).collect())))
            .collect();
        OracleTrainer { trips }
    }
}

struct Lookup(HashMap<Query, Vec<String>>);

impl Recommender for Lookup {
    fn recommend(&self, query: &Query) -> Result<Vec<String>> {
        self.0
            .get(query)
            .cloned()
            .ok_or_else(|| Error::Validation("oracle has no trip for this query".into()))
    }
}

impl Trainer for OracleTrainer {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn fit(&self, _train: &Corpus, _seed: u64) -> Result<Box<dyn Recommender>> {
        Ok(Box::new(Lookup(self.trips.clone())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub trip_id: String,
    pub query: Option<Query>,
    pub truth: Vec<String>,
    pub recommendation: Option<Vec<String>>,
    pub f1: Option<f64>,
    pub pairs_f1: Option<f64>,
    pub skipped_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub records: Vec<EvalRecord>,
    pub mean_f1: f64,
    pub mean_pairs_f1: f64,
    pub scored: usize,
    pub skipped: usize,
}

impl EvalReport {
    /// Sorts records by trip id and recomputes the aggregates.
    pub fn from_records(method: String, mut records: Vec<EvalRecord>) -> Self {
        records.sort_by(|a, b| a.trip_id.cmp(&b.trip_id));
        let f1: Vec<f64> = records.iter().filter_map(|r| r.f1).collect();
        let pf1: Vec<f64> = records.iter().filter_map(|r| r.pairs_f1).collect();
        let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        EvalReport {
            method,
            mean_f1: mean(&f1),
            mean_pairs_f1: mean(&pf1),
            scored: f1.len(),
            skipped: records.len() - f1.len(),
            records,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per query.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["trip_id", "start_poi", "end_poi", "n", "truth", "recommendation", "f1", "pairs_f1", "skipped_reason"])
            .map_err(csv_err)?;
        for r in &self.records {
            let (s, d, n) = match &r.query {
                Some(q) => (q.start_poi.clone(), q.end_poi.clone(), q.n.to_string()),
                None => Default::default(),
            };
            let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            out.write_record([
                r.trip_id.clone(),
                s,
                d,
                n,
                r.truth.join(" "),
                r.recommendation.as_ref().map(|v| v.join(" ")).unwrap_or_default(),
                opt(r.f1),
                opt(r.pairs_f1),
                r.skipped_reason.clone().unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// `method,metric,value` rows for bar charts over several reports.
pub fn write_plot_data<W: Write>(mut w: W, reports: &[EvalReport]) -> Result<()> {
    writeln!(w, "method,metric,value")?;
    for r in reports {
        writeln!(w, "{},f1,{}", r.method, r.mean_f1)?;
        writeln!(w, "{},pairs_f1,{}", r.method, r.mean_pairs_f1)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub mode: LoocvMode,
    pub seed: u64,
    /// Worker threads; 1 runs everything on the caller's thread.
    pub jobs: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { mode: LoocvMode::Retrain, seed: 42, jobs: 1 }
    }
}

fn score(trip: &Trip, query: Query, rec: &dyn Recommender) -> Result<EvalRecord> {
    let truth: Vec<String> = trip.poi_ids().into_iter().map(String::from).collect();
    let out = rec.recommend(&query)?;
    Ok(EvalRecord {
        trip_id: trip.trip_id.clone(),
        f1: Some(f1_score(&out, &truth)?),
        pairs_f1: Some(pairs_f1(&out, &truth)?),
        query: Some(query),
        truth,
        recommendation: Some(out),
        skipped_reason: None,
    })
}

fn skipped(trip: &Trip, reason: String) -> EvalRecord {
    EvalRecord {
        trip_id: trip.trip_id.clone(),
        query: query_of(trip).ok(),
        truth: trip.poi_ids().into_iter().map(String::from).collect(),
        recommendation: None,
        f1: None,
        pairs_f1: None,
        skipped_reason: Some(reason),
    }
}

/// A unit of work: train on `train`, score each held-out trip.
struct Task {
    train: Corpus,
    held_out: Vec<Trip>,
    seed: u64,
}

fn run_task(task: &Task, trainer: &dyn Trainer) -> Result<Vec<EvalRecord>> {
    let rec = trainer.fit(&task.train, task.seed)?;
    task.held_out
        .iter()
        .map(|t| score(t, query_of(t)?, rec.as_ref()))
        .collect()
}

fn kfold_tasks(corpus: &Corpus, folds: usize, seed: u64, skipped_records: &mut Vec<EvalRecord>) -> Result<Vec<Task>> {
    let plan = leave_one_out_splits(corpus)?;
    let scorable: Vec<Trip> = plan.splits.into_iter().map(|s| s.held_out).collect();
    skipped_records.extend(plan.skipped.into_iter().map(|s| {
        let trip = corpus.trips.iter().find(|t| t.trip_id == s.trip_id).expect("skipped trip exists");
        skipped(trip, s.reason)
    }));
    let folds = folds.min(scorable.len()).max(1);
    let mut tasks = Vec::with_capacity(folds);
    for f in 0..folds {
        let held: Vec<Trip> = scorable.iter().skip(f).step_by(folds).cloned().collect();
        let held_ids: HashSet<&str> = held.iter().map(|t| t.trip_id.as_str()).collect();
        let train_trips: Vec<Trip> = corpus
            .trips
            .iter()
            .filter(|t| !held_ids.contains(t.trip_id.as_str()))
            .cloned()
            .collect();
        let seen: HashSet<&str> = train_trips.iter().flat_map(|t| t.poi_ids()).collect();
        let (ok, missing): (Vec<Trip>, Vec<Trip>) = held.into_iter().partition(|t| {
            let q = query_of(t).expect("scorable trips are not loops");
            seen.contains(q.start_poi.as_str()) && seen.contains(q.end_poi.as_str())
        });
        skipped_records.extend(
            missing
                .iter()
                .map(|t| skipped(t, "endpoint(s) absent from the fold's training trips".into())),
        );
        tasks.push(Task {
            train: Corpus { pois: corpus.pois.clone(), trips: train_trips },
            held_out: ok,
            seed: rng::derive(seed, f as u64),
        });
    }
    Ok(tasks)
}

/// Leave-one-out evaluation of `trainer` on `corpus`.
pub fn evaluate_loocv(corpus: &Corpus, trainer: &dyn Trainer, options: EvalOptions) -> Result<EvalReport> {
    let mut records = Vec::new();
    let tasks = match options.mode {
        LoocvMode::Retrain => {
            let plan = leave_one_out_splits(corpus)?;
            for s in plan.skipped {
                let trip = corpus.trips.iter().find(|t| t.trip_id == s.trip_id).expect("skipped trip exists");
                records.push(skipped(trip, s.reason));
            }
            plan.splits
                .into_iter()
                .enumerate()
                .map(|(i, s)| Task {
                    train: s.train,
                    held_out: vec![s.held_out],
                    seed: rng::derive(options.seed, i as u64),
                })
                .collect()
        }
        LoocvMode::Kfold(k) => kfold_tasks(corpus, k, options.seed, &mut records)?,
    };

    let results: Vec<Result<Vec<EvalRecord>>> = if options.jobs <= 1 {
        tasks.iter().map(|t| run_task(t, trainer)).collect()
    } else {
        let next = Mutex::new(0usize);
        let slots: Mutex<Vec<Option<Result<Vec<EvalRecord>>>>> = Mutex::new((0..tasks.len()).map(|_| None).collect());
        std::thread::scope(|scope| {
            for _ in 0..options.jobs.min(tasks.len()) {
                scope.spawn(|| loop {
                    let i = {
                        let mut n = next.lock().expect("queue lock");
                        let i = *n;
                        *n += 1;
                        i
                    };
                    let Some(task) = tasks.get(i) else { break };
                    let r = run_task(task, trainer);
                    slots.lock().expect("result lock")[i] = Some(r);
                });
            }
        });
        slots.into_inner().expect("result lock").into_iter().map(|r| r.expect("every task ran")).collect()
    };
    for r in results {
        records.extend(r?);
    }
    Ok(EvalReport::from_records(trainer.name(), records))
}
