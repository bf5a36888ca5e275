//! Contrastive POI embeddings learned from the walk corpus.
//!
//! Each walk's endpoints form an anchor `(v'(first) + v'(last)) / 2`. An
//! interior POI of the walk is the positive; POIs from walks with a different
//! `(first, last)` pair are negatives.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::diffnum::{stack, uniform, Adam, AdamConfig, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::geograph::Walk;
use crate::rng::{self, Rng};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoiEmbeddings {
    pub vocab: Vocabulary,
    /// `|L| x d`.
    pub table: Tensor,
}

impl PoiEmbeddings {
    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn row(&self, id: &str) -> Result<&[f64]> {
        Ok(self.table.row(self.vocab.lookup(id)?))
    }

    /// `poi_id,e0,e1,...` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (0..self.dim()).map(|i| format!("e{i}")).collect();
        writeln!(w, "poi_id,{}", header.join(","))?;
        for (i, id) in self.vocab.ids().iter().enumerate() {
            let vals: Vec<String> = self.table.row(i).iter().map(|x| x.to_string()).collect();
            writeln!(w, "{id},{}", vals.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedConfig {
    pub dim: usize,
    /// Negatives per anchor (`k - 1`).
    pub negatives: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub init_scale: f64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: 250,
            negatives: 10,
            epochs: 50,
            batch_size: 8,
            lr: 0.1,
            init_scale: 0.05,
        }
    }
}

/// Walks translated to vocabulary indices.
#[derive(Debug, Clone)]
pub struct IndexedWalks {
    walks: Vec<Vec<usize>>,
}

impl IndexedWalks {
    pub fn new(walks: &[Walk], vocab: &Vocabulary) -> Result<Self> {
        let walks = walks
            .iter()
            .map(|w| w.pois.iter().map(|p| vocab.lookup(p)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(IndexedWalks { walks })
    }

    pub fn from_indices(walks: Vec<Vec<usize>>) -> Self {
        IndexedWalks { walks }
    }

    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    pub fn get(&self, i: usize) -> &[usize] {
        &self.walks[i]
    }

    fn query(&self, i: usize) -> (usize, usize) {
        let w = &self.walks[i];
        (w[0], w[w.len() - 1])
    }

    fn distinct_queries(&self) -> usize {
        let mut q: Vec<_> = (0..self.len()).map(|i| self.query(i)).collect();
        q.sort_unstable();
        q.dedup();
        q.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContrastiveSample {
    pub positive: usize,
    pub negatives: Vec<usize>,
}

/// Positive: a uniformly chosen interior position whose POI is neither endpoint.
/// Negatives: uniform POIs from uniformly chosen walks with a different query.
pub fn sample_contrastive_batch(
    walks: &IndexedWalks,
    walk_index: usize,
    negatives: usize,
    rng: &mut Rng,
) -> Result<ContrastiveSample> {
    let walk = walks.get(walk_index);
    if walk.len() < 3 {
        return Err(Error::Sampling(format!("walk {walk_index} has no interior POI")));
    }
    let (src, dst) = walks.query(walk_index);
    let interior: Vec<usize> = walk[1..walk.len() - 1]
        .iter()
        .copied()
        .filter(|&p| p != src && p != dst)
        .collect();
    let positive = *interior
        .choose(rng)
        .ok_or_else(|| Error::Sampling(format!("walk {walk_index} has no interior POI distinct from its endpoints")))?;

    let mut out = Vec::with_capacity(negatives);
    let mut fallback: Option<Vec<usize>> = None;
    while out.len() < negatives {
        let mut pick = None;
        for _ in 0..32 {
            let j = rng.gen_range(0..walks.len());
            if walks.query(j) != (src, dst) {
                pick = Some(j);
                break;
            }
        }
        let j = match pick {
            Some(j) => j,
            None => {
                let others = fallback.get_or_insert_with(|| {
                    (0..walks.len()).filter(|&j| walks.query(j) != (src, dst)).collect()
                });
                *others.choose(rng).ok_or_else(|| {
                    Error::Sampling("no walk with a different query to draw negatives from".into())
                })?
            }
        };
        let other = walks.get(j);
        out.push(other[rng.gen_range(0..other.len())]);
    }
    Ok(ContrastiveSample { positive, negatives: out })
}

/// `(v'(first) + v'(last)) / 2`.
pub fn anchor<'t>(query_side: Var<'t>, first: usize, last: usize) -> Result<Var<'t>> {
    query_side.row(first)?.add(query_side.row(last)?)?.scale(0.5)
}

/// `-(s(pos, anchor) - log sum_j exp(s(neg_j, anchor)))` with cosine `s`.
pub fn poi_contrastive_loss<'t>(anchor: Var<'t>, positive: Var<'t>, negatives: &[Var<'t>]) -> Result<Var<'t>> {
    if negatives.is_empty() {
        return Err(Error::Sampling("contrastive loss needs at least one negative".into()));
    }
    let pos = positive.cosine(anchor)?;
    let negs = negatives.iter().map(|n| n.cosine(anchor)).collect::<Result<Vec<_>>>()?;
    stack(&negs)?.log_sum_exp()?.sub(pos)
}

/// Trainable pair `(v, v')` for the contrastive objective.
pub struct EmbeddingParams {
    pub store: ParamStore,
    pub poi: ParamId,
    pub query_side: ParamId,
}

impl EmbeddingParams {
    pub fn init(n_pois: usize, cfg: &EmbedConfig, rng: &mut Rng) -> Result<Self> {
        let mut store = ParamStore::new();
        let poi = store.add("poi.v", uniform(&[n_pois, cfg.dim], cfg.init_scale, rng))?;
        let query_side = store.add("poi.v_query", uniform(&[n_pois, cfg.dim], cfg.init_scale, rng))?;
        Ok(EmbeddingParams { store, poi, query_side })
    }

    /// Mean loss over `(walk, sample)` pairs, recorded on `tape`.
    pub fn batch_loss<'t>(&self, tape: &'t Tape, walks: &IndexedWalks, batch: &[(usize, ContrastiveSample)]) -> Result<Var<'t>> {
        let v = tape.param(&self.store, self.poi);
        let vq = tape.param(&self.store, self.query_side);
        let mut losses = Vec::with_capacity(batch.len());
        for (wi, s) in batch {
            let (first, last) = walks.query(*wi);
            let a = anchor(vq, first, last)?;
            let negs = s.negatives.iter().map(|&n| v.row(n)).collect::<Result<Vec<_>>>()?;
            losses.push(poi_contrastive_loss(a, v.row(s.positive)?, &negs)?);
        }
        stack(&losses)?.mean()
    }
}

#[derive(Debug, Clone)]
pub struct EmbedOutcome {
    pub embeddings: PoiEmbeddings,
    /// The anchor-side table `v'`, kept for diagnostics.
    pub query_side: Tensor,
    pub epoch_losses: Vec<f64>,
}

pub fn train_poi_embeddings(
    walks: &[Walk],
    vocab: &Vocabulary,
    cfg: &EmbedConfig,
    seed: u64,
) -> Result<EmbedOutcome> {
    let indexed = IndexedWalks::new(walks, vocab)?;
    train_indexed(&indexed, vocab, cfg, seed)
}

pub fn train_indexed(walks: &IndexedWalks, vocab: &Vocabulary, cfg: &EmbedConfig, seed: u64) -> Result<EmbedOutcome> {
    let mut init_rng = rng::stream(seed, 0);
    let mut params = EmbeddingParams::init(vocab.len(), cfg, &mut init_rng)?;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    if cfg.epochs > 0 {
        if walks.is_empty() {
            return Err(Error::Sampling("empty walk corpus".into()));
        }
        if walks.distinct_queries() < 2 {
            return Err(Error::Sampling("walk corpus needs at least two distinct queries".into()));
        }
    }
    let mut rng = rng::stream(seed, 1);
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.lr));
    let mut order: Vec<usize> = (0..walks.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch = chunk
                .iter()
                .map(|&wi| Ok((wi, sample_contrastive_batch(walks, wi, cfg.negatives, &mut rng)?)))
                .collect::<Result<Vec<_>>>()?;
            let tape = Tape::new();
            let loss = params.batch_loss(&tape, walks, &batch)?;
            total += loss.item();
            batches += 1;
            tape.backward(loss, &mut params.store)?;
            adam.step(&mut params.store);
        }
        epoch_losses.push(total / batches as f64);
    }
    Ok(EmbedOutcome {
        embeddings: PoiEmbeddings {
            vocab: vocab.clone(),
            table: params.store.value(params.poi).clone(),
        },
        query_side: params.store.value(params.query_side).clone(),
        epoch_losses,
    })
}

/// Initial table for a given seed, identical to what training starts from.
pub fn initial_embeddings(vocab: &Vocabulary, cfg: &EmbedConfig, seed: u64) -> Result<PoiEmbeddings> {
    let params = EmbeddingParams::init(vocab.len(), cfg, &mut rng::stream(seed, 0))?;
    Ok(PoiEmbeddings {
        vocab: vocab.clone(),
        table: params.store.value(params.poi).clone(),
    })
}
