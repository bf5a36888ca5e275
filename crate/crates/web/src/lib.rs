//! Browser bindings over a toy city.
//!
//! The plain Rust API ([`City`], [`score`]) is what the wasm exports wrap;
//! every exported value crosses the boundary as a JSON string.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use selftrip_core::config::TrainConfig;
use selftrip_core::corpus::{Corpus, Query};
use selftrip_core::eval::{f1_score, markov_recommend, markov_train, pairs_f1, MarkovModel};
use selftrip_core::selftrain::{self, walk_corpus, Model};
use selftrip_core::synth;

const POIS: usize = 20;
const NOISE: f64 = 0.1;

#[derive(Serialize)]
struct PoiView<'a> {
    id: &'a str,
    lon: f64,
    lat: f64,
}

#[derive(Serialize)]
pub struct TrainSummary {
    pub trips: usize,
    pub walks: usize,
    pub final_loss: f64,
    pub model_version: String,
}

#[derive(Serialize)]
pub struct Recommendation {
    pub selftrip: Vec<String>,
    pub markov: Vec<String>,
}

#[derive(Serialize, Debug, PartialEq)]
pub struct Scores {
    pub f1: f64,
    pub pairs_f1: f64,
}

/// A synthetic city with trips along a few hidden routes.
pub struct City {
    corpus: Corpus,
    config: TrainConfig,
    model: Option<Model>,
    markov: MarkovModel,
}

impl City {
    pub fn new(trips: usize, seed: u64) -> Self {
        let corpus = synth::second_order_corpus(trips, POIS, NOISE, seed);
        let config = TrainConfig {
            seed,
            poi_epochs: 5,
            warmup_epochs: 5,
            supervised_epochs: 60,
            lr: 0.01,
            ..TrainConfig::small()
        };
        let markov = markov_train(&corpus.trips);
        City { corpus, config, model: None, markov }
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn pois_json(&self) -> String {
        let v: Vec<_> = self.corpus.pois.iter().map(|p| PoiView { id: &p.id, lon: p.lon, lat: p.lat }).collect();
        serde_json::to_string(&v).expect("serializable")
    }

    pub fn trips_json(&self) -> String {
        let v: Vec<Vec<&str>> = self.corpus.trips.iter().map(|t| t.poi_ids()).collect();
        serde_json::to_string(&v).expect("serializable")
    }

    pub fn train(&mut self, epochs: usize) -> Result<TrainSummary, String> {
        let mut cfg = self.config.clone();
        cfg.supervised_epochs = epochs;
        let out = selftrain::train(&self.corpus, &cfg).map_err(|e| e.to_string())?;
        let summary = TrainSummary {
            trips: self.corpus.trips.len(),
            walks: out.walk_count,
            final_loss: out.log.supervised.last().copied().unwrap_or(f64::NAN),
            model_version: out.model.version(),
        };
        self.model = Some(out.model);
        Ok(summary)
    }

    pub fn recommend(&self, start: &str, end: &str, n: usize) -> Result<Recommendation, String> {
        let model = self.model.as_ref().ok_or("train the model first")?;
        let q = Query { start_poi: start.into(), start_hour: 9, end_poi: end.into(), end_hour: 17, n };
        let selftrip = model.recommend(&q).map_err(|e| e.to_string())?;
        let markov = markov_recommend(&self.markov, &q).map_err(|e| e.to_string())?;
        Ok(Recommendation { selftrip, markov })
    }

    /// Up to `limit` random walks over the augmented graph.
    pub fn walks(&self, limit: usize) -> Vec<Vec<String>> {
        let (_, walks) = walk_corpus(&self.corpus, &self.config);
        walks.into_iter().take(limit).map(|w| w.pois).collect()
    }
}

/// F1 and pairs-F1 for comma- or space-separated POI lists.
pub fn score(recommended: &str, truth: &str) -> Result<Scores, String> {
    let split = |s: &str| s.split([',', ' ']).map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect::<Vec<_>>();
    let (r, t) = (split(recommended), split(truth));
    Ok(Scores {
        f1: f1_score(&r, &t).map_err(|e| e.to_string())?,
        pairs_f1: pairs_f1(&r, &t).map_err(|e| e.to_string())?,
    })
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.map(|v| serde_json::to_string(&v).expect("serializable")).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = City)]
pub struct JsCity(City);

#[wasm_bindgen(js_class = City)]
impl JsCity {
    #[wasm_bindgen(constructor)]
    pub fn new(trips: usize, seed: u32) -> JsCity {
        JsCity(City::new(trips, seed as u64))
    }

    pub fn pois(&self) -> String {
        self.0.pois_json()
    }

    pub fn trips(&self) -> String {
        self.0.trips_json()
    }

    pub fn train(&mut self, epochs: usize) -> Result<String, JsError> {
        to_json(self.0.train(epochs))
    }

    pub fn recommend(&self, start: &str, end: &str, n: usize) -> Result<String, JsError> {
        to_json(self.0.recommend(start, end, n))
    }

    pub fn walks(&self, limit: usize) -> String {
        serde_json::to_string(&self.0.walks(limit)).expect("serializable")
    }
}

#[wasm_bindgen(js_name = score)]
pub fn js_score(recommended: &str, truth: &str) -> Result<String, JsError> {
    to_json(score(recommended, truth))
}
