use std::ops::ControlFlow;

use rand::seq::SliceRandom;

use crate::config::TrainConfig;
use crate::corpus::Corpus;
use crate::diffnum::{stack, Adam, AdamConfig, Tape};
use crate::embed::{train_poi_embeddings, EmbedOutcome};
use crate::error::{Error, Result};
use crate::geograph::{augment_graph, build_base_graph, enumerate_query_candidates, generate_walk_corpus, transition_matrix, PoiGraph, Walk};
use crate::rng;
use crate::vocab::Vocabulary;

use super::model::{IndexedTrip, Model};

const WALK_SEED: u64 = 1;
const EMBED_SEED: u64 = 2;
const WARMUP_SEED: u64 = 3;
const SUPERVISED_SEED: u64 = 4;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub poi: Vec<f64>,
    pub warmup: Vec<f64>,
    pub supervised: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: TrainLog,
    pub walk_count: usize,
}

/// Augmented POI graph of the corpus and the causal walks sampled on it.
pub fn walk_corpus(corpus: &Corpus, config: &TrainConfig) -> (PoiGraph, Vec<Walk>) {
    let graph = augment_graph(&build_base_graph(&corpus.trips), &corpus.pois, config.threshold_km);
    let walks = walk_corpus_on(&graph, config);
    (graph, walks)
}

pub fn walk_corpus_on(graph: &PoiGraph, config: &TrainConfig) -> Vec<Walk> {
    let matrix = transition_matrix(graph);
    let candidates = enumerate_query_candidates(graph);
    generate_walk_corpus(&matrix, &candidates, config.walk_params(), rng::derive(config.seed, WALK_SEED))
}

pub fn pretrain_embeddings(vocab: &Vocabulary, walks: &[Walk], config: &TrainConfig) -> Result<EmbedOutcome> {
    train_poi_embeddings(walks, vocab, &config.embed_config(), rng::derive(config.seed, EMBED_SEED))
}

/// Non-loop trips of the corpus in model indices.
pub fn training_trips(model: &Model, corpus: &Corpus) -> Result<Vec<IndexedTrip>> {
    corpus
        .trips
        .iter()
        .filter(|t| !t.is_loop())
        .map(|t| model.index_trip(t))
        .collect()
}

/// Shuffled mini-batches covering every item once; a trailing singleton joins the previous batch.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let size = size.max(1);
    let mut out: Vec<&[usize]> = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = (start + size).min(order.len());
        if order.len() - end == 1 && size > 1 {
            end = order.len();
        }
        out.push(&order[start..end]);
        start = end;
    }
    out
}

/// Contrastive warm-up of the query encoder, f-layer and GRU; `v` stays fixed.
pub fn contrastive_warmup(model: &mut Model, trips: &[IndexedTrip]) -> Result<Vec<f64>> {
    let cfg = model.config().clone();
    if cfg.warmup_epochs == 0 {
        return Ok(Vec::new());
    }
    if trips.len() < 2 {
        return Err(Error::Validation(format!(
            "contrastive warm-up needs at least 2 training trips, got {}",
            trips.len()
        )));
    }
    let encoder = model.encoder_params();
    model.train_only(&encoder);
    let mut rng = rng::seeded(rng::derive(cfg.seed, WARMUP_SEED));
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.lr));
    let mut order: Vec<usize> = (0..trips.len()).collect();
    let mut log = Vec::with_capacity(cfg.warmup_epochs);
    for epoch in 0..cfg.warmup_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let groups = batches(&order, cfg.batch_size);
        for group in &groups {
            let batch: Vec<IndexedTrip> = group.iter().map(|&i| trips[i].clone()).collect();
            let pairs = model.make_views(&batch, &mut rng)?;
            let tape = Tape::new();
            let loss = model.trip_contrastive_loss(&tape, &pairs)?;
            total += loss.item();
            tape.backward(loss, &mut model.store)?;
            adam.step(&mut model.store);
        }
        let mean = total / groups.len() as f64;
        log::debug!("warm-up epoch {epoch}: loss {mean:.6}");
        log.push(mean);
    }
    Ok(log)
}

/// Supervised training for the configured number of epochs.
pub fn supervised_train(model: &mut Model, trips: &[IndexedTrip]) -> Result<Vec<f64>> {
    let epochs = model.config().supervised_epochs;
    supervised_train_with(model, trips, epochs, |_, _, _| ControlFlow::Continue(()))
}

/// Supervised training with a per-epoch hook that may stop early.
pub fn supervised_train_with<F>(model: &mut Model, trips: &[IndexedTrip], epochs: usize, mut on_epoch: F) -> Result<Vec<f64>>
where
    F: FnMut(usize, f64, &Model) -> ControlFlow<()>,
{
    let cfg = model.config().clone();
    if trips.is_empty() {
        return Err(Error::Validation("no training trips".into()));
    }
    let l = *model.layout();
    let mut trainable = model.encoder_params();
    trainable.extend([l.head_w, l.head_b]);
    if cfg.dest_signal {
        trainable.extend([l.dest_w, l.dest_b]);
    }
    if cfg.finetune_embeddings || !cfg.pretrain_poi {
        trainable.push(l.poi);
    }
    model.train_only(&trainable);

    let mut rng = rng::seeded(rng::derive(cfg.seed, SUPERVISED_SEED));
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.lr));
    let mut order: Vec<usize> = (0..trips.len()).collect();
    let mut log = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let groups = batches(&order, cfg.batch_size);
        for group in &groups {
            let tape = Tape::new();
            let losses = group
                .iter()
                .map(|&i| model.supervised_loss_indexed(&tape, &trips[i]))
                .collect::<Result<Vec<_>>>()?;
            let loss = stack(&losses)?.mean()?;
            total += loss.item();
            tape.backward(loss, &mut model.store)?;
            adam.step(&mut model.store);
        }
        let mean = total / groups.len() as f64;
        log::debug!("supervised epoch {epoch}: loss {mean:.6}");
        log.push(mean);
        if on_epoch(epoch, mean, model).is_break() {
            break;
        }
    }
    Ok(log)
}

/// POI pretraining, contrastive warm-up, then supervised training.
pub fn train(corpus: &Corpus, config: &TrainConfig) -> Result<TrainOutcome> {
    let vocab = Vocabulary::from_table(&corpus.pois);
    let mut model = Model::new(vocab.clone(), config.clone())?;
    let mut log = TrainLog::default();
    let mut walk_count = 0;
    if config.pretrain_poi {
        let (_, walks) = walk_corpus(corpus, config);
        walk_count = walks.len();
        let out = pretrain_embeddings(&vocab, &walks, config)?;
        model.set_embeddings(&out.embeddings)?;
        log.poi = out.epoch_losses;
    }
    let trips = training_trips(&model, corpus)?;
    if config.warmup {
        log.warmup = contrastive_warmup(&mut model, &trips)?;
    }
    log.supervised = supervised_train(&mut model, &trips)?;
    Ok(TrainOutcome { model, log, walk_count })
}
