//! Stochastic views of an embedded trip (an `N x d` matrix of POI rows).

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::diffnum::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentationKind {
    PoiMask,
    Shuffle,
    FeatureCutoff,
    Dropout,
}

impl AugmentationKind {
    pub const ALL: [AugmentationKind; 4] = [
        AugmentationKind::PoiMask,
        AugmentationKind::Shuffle,
        AugmentationKind::FeatureCutoff,
        AugmentationKind::Dropout,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub mask_ratio: f64,
    pub cutoff_ratio: f64,
    pub dropout_rate: f64,
    /// Allow both views to use the same strategy.
    pub allow_identical: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            mask_ratio: 0.2,
            cutoff_ratio: 0.2,
            dropout_rate: 0.5,
            allow_identical: false,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self, problems: &mut Vec<String>) {
        if !(0.0..=1.0).contains(&self.mask_ratio) {
            problems.push(format!("augment.mask_ratio {} outside [0, 1]", self.mask_ratio));
        }
        if !(0.0..=1.0).contains(&self.cutoff_ratio) {
            problems.push(format!("augment.cutoff_ratio {} outside [0, 1]", self.cutoff_ratio));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            problems.push(format!("augment.dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
    }
}

fn check_matrix(t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [n, d] if *n >= 1 => Ok((*n, *d)),
        s => Err(Error::shape("augment", s, &[0, 0])),
    }
}

/// Drops `floor(ratio * N)` random rows, never going below two rows (one for `N = 1`).
pub fn poi_mask(t: &Tensor, ratio: f64, rng: &mut Rng) -> Result<Tensor> {
    let (n, d) = check_matrix(t)?;
    let floor = n.min(2);
    let remove = ((ratio * n as f64).floor() as usize).min(n - floor);
    if remove == 0 {
        return Ok(t.clone());
    }
    let mut dropped = vec![false; n];
    for i in index::sample(rng, n, remove) {
        dropped[i] = true;
    }
    let data: Vec<f64> = (0..n)
        .filter(|&i| !dropped[i])
        .flat_map(|i| t.row(i).iter().copied())
        .collect();
    Tensor::matrix(n - remove, d, data)
}

/// Uniformly random permutation of the rows.
pub fn shuffle(t: &Tensor, rng: &mut Rng) -> Result<Tensor> {
    let (n, d) = check_matrix(t)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let data = order.iter().flat_map(|&i| t.row(i).iter().copied()).collect();
    Tensor::matrix(n, d, data)
}

/// Zeroes the same `floor(ratio * d)` randomly chosen columns in every row.
pub fn feature_cutoff(t: &Tensor, ratio: f64, rng: &mut Rng) -> Result<Tensor> {
    let (n, d) = check_matrix(t)?;
    let k = ((ratio * d as f64).floor() as usize).min(d);
    let cols = index::sample(rng, d, k);
    let mut out = t.clone();
    for i in 0..n {
        let row = out.row_mut(i);
        for c in cols.iter() {
            row[c] = 0.0;
        }
    }
    Ok(out)
}

/// Inverted dropout: zero with probability `rate`, scale survivors by `1 / (1 - rate)`.
pub fn dropout(t: &Tensor, rate: f64, rng: &mut Rng) -> Result<Tensor> {
    check_matrix(t)?;
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Validation(format!("dropout rate {rate} outside [0, 1)")));
    }
    if rate == 0.0 {
        return Ok(t.clone());
    }
    let keep = 1.0 / (1.0 - rate);
    let mut out = t.clone();
    for x in out.data_mut() {
        *x = if rng.gen::<f64>() < rate { 0.0 } else { *x * keep };
    }
    Ok(out)
}

pub fn apply(kind: AugmentationKind, t: &Tensor, cfg: &AugmentConfig, rng: &mut Rng) -> Result<Tensor> {
    match kind {
        AugmentationKind::PoiMask => poi_mask(t, cfg.mask_ratio, rng),
        AugmentationKind::Shuffle => shuffle(t, rng),
        AugmentationKind::FeatureCutoff => feature_cutoff(t, cfg.cutoff_ratio, rng),
        AugmentationKind::Dropout => dropout(t, cfg.dropout_rate, rng),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoViews {
    pub kinds: (AugmentationKind, AugmentationKind),
    pub first: Tensor,
    pub second: Tensor,
}

/// Picks two strategies (distinct unless configured otherwise) and applies each to a copy of `t`.
pub fn two_views(t: &Tensor, cfg: &AugmentConfig, rng: &mut Rng) -> Result<TwoViews> {
    let (n, _) = check_matrix(t)?;
    if n < 2 {
        return Err(Error::Validation("two_views needs a trip of at least 2 POIs".into()));
    }
    let kinds = if cfg.allow_identical {
        let all = AugmentationKind::ALL;
        (all[rng.gen_range(0..4)], all[rng.gen_range(0..4)])
    } else {
        let pair = index::sample(rng, 4, 2);
        (AugmentationKind::ALL[pair.index(0)], AugmentationKind::ALL[pair.index(1)])
    };
    let first = apply(kinds.0, t, cfg, rng)?;
    let second = apply(kinds.1, t, cfg, rng)?;
    Ok(TwoViews { kinds, first, second })
}
