use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::AugmentConfig;
use crate::embed::EmbedConfig;
use crate::encoders::QueryMode;
use crate::error::{Error, Result};
use crate::geograph::WalkParams;

/// Similarity between the final states of two augmented trip views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    /// Inner product, as in the batched softmax over `P^T Q`.
    #[default]
    Dot,
    Cosine,
}

/// How leave-one-out evaluation trains its models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode", content = "folds")]
pub enum LoocvMode {
    /// A fresh model for every held-out trip.
    #[default]
    Retrain,
    /// One model per fold, each scoring the held-out trips of its fold.
    Kfold(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    /// POI embedding size `d`.
    pub poi_dim: usize,
    /// Query vector size `d''`.
    pub query_dim: usize,
    pub hidden_dim: usize,
    /// Output size of the dense layer applied to the query before the GRU.
    pub query_proj_dim: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub init_scale: f64,

    pub alpha: usize,
    pub walks_per_query: usize,
    pub max_attempts_per_walk: usize,
    pub threshold_km: f64,
    /// Negatives per anchor in POI pretraining (`k - 1`).
    pub negatives: usize,

    pub poi_epochs: usize,
    pub warmup_epochs: usize,
    pub supervised_epochs: usize,

    pub augment: AugmentConfig,
    pub trip_similarity: Similarity,
    pub query_mode: QueryMode,

    pub pretrain_poi: bool,
    pub warmup: bool,
    pub dest_signal: bool,
    pub finetune_embeddings: bool,

    pub beam_width: usize,
    pub loocv: LoocvMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 42,
            poi_dim: 250,
            query_dim: 256,
            hidden_dim: 256,
            query_proj_dim: 64,
            batch_size: 8,
            lr: 0.1,
            init_scale: 0.05,
            alpha: 6,
            walks_per_query: 5,
            max_attempts_per_walk: 20,
            threshold_km: 3.0,
            negatives: 10,
            poi_epochs: 50,
            warmup_epochs: 30,
            supervised_epochs: 300,
            augment: AugmentConfig::default(),
            trip_similarity: Similarity::default(),
            query_mode: QueryMode::default(),
            pretrain_poi: true,
            warmup: true,
            dest_signal: true,
            finetune_embeddings: false,
            beam_width: 1,
            loocv: LoocvMode::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Full,
    /// No contrastive warm-up.
    NoWarmup,
    /// No destination signal.
    NoDestSignal,
    /// Concatenated query instead of the bilinear encoder.
    ConcatQuery,
    /// All three removed.
    Base,
}

impl TrainConfig {
    /// Desk-scale sizes (`d = 8`, `d'' = 6`, hidden 12) with short phases.
    pub fn small() -> Self {
        TrainConfig {
            poi_dim: 8,
            query_dim: 6,
            hidden_dim: 12,
            query_proj_dim: 6,
            poi_epochs: 10,
            warmup_epochs: 5,
            supervised_epochs: 50,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        let positive = [
            ("poi_dim", self.poi_dim),
            ("query_dim", self.query_dim),
            ("hidden_dim", self.hidden_dim),
            ("query_proj_dim", self.query_proj_dim),
            ("batch_size", self.batch_size),
            ("walks_per_query", self.walks_per_query),
            ("max_attempts_per_walk", self.max_attempts_per_walk),
            ("negatives", self.negatives),
            ("beam_width", self.beam_width),
        ];
        for (name, v) in positive {
            if v == 0 {
                p.push(format!("{name} must be positive"));
            }
        }
        if self.alpha < 2 {
            p.push(format!("alpha must be at least 2, got {}", self.alpha));
        }
        if self.warmup && self.warmup_epochs > 0 && self.batch_size < 2 {
            p.push("batch_size must be at least 2 for contrastive warm-up".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            p.push(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            p.push(format!("init_scale must be positive, got {}", self.init_scale));
        }
        if !(self.threshold_km >= 0.0 && self.threshold_km.is_finite()) {
            p.push(format!("threshold_km must be non-negative, got {}", self.threshold_km));
        }
        if let LoocvMode::Kfold(k) = self.loocv {
            if k < 2 {
                p.push(format!("loocv kfold needs at least 2 folds, got {k}"));
            }
        }
        self.augment.validate(&mut p);
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    pub fn walk_params(&self) -> WalkParams {
        WalkParams {
            per_query: self.walks_per_query,
            alpha: self.alpha,
            max_attempts: self.max_attempts_per_walk,
        }
    }

    pub fn embed_config(&self) -> EmbedConfig {
        EmbedConfig {
            dim: self.poi_dim,
            negatives: self.negatives,
            epochs: self.poi_epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            init_scale: self.init_scale,
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        match variant {
            Variant::Full => {}
            Variant::NoWarmup => self.warmup = false,
            Variant::NoDestSignal => self.dest_signal = false,
            Variant::ConcatQuery => self.query_mode = QueryMode::Concat,
            Variant::Base => {
                self.warmup = false;
                self.dest_signal = false;
                self.query_mode = QueryMode::Concat;
            }
        }
        self
    }

    /// Short hex digest of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        fingerprint_of(self)
    }
}

/// First 8 bytes of the SHA-256 of `value`'s JSON form, in hex.
pub fn fingerprint_of<T: Serialize + ?Sized>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("value serializes");
    hex::encode(&Sha256::digest(json.as_bytes())[..8])
}
