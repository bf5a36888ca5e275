use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::TrainConfig;
use crate::corpus::{Query, Trip};
use crate::diffnum::{uniform, ParamId, ParamStore, Tape, Tensor, Var};
use crate::embed::PoiEmbeddings;
use crate::encoders::{endpoint, QueryEncoder, QueryEncoding, QueryMode, TripEncoder, HOURS};
use crate::error::{Error, Result};
use crate::rng;
use crate::vocab::Vocabulary;

pub const FORMAT_VERSION: u32 = 1;

/// Label mixed into the seed for parameter initialization.
const INIT_STREAM: u64 = 0x1417;

#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub poi: ParamId,
    pub query: QueryEncoding,
    pub trip: TripEncoder,
    pub head_w: ParamId,
    pub head_b: ParamId,
    pub dest_w: ParamId,
    pub dest_b: ParamId,
}

/// A trip in vocabulary indices, with the hours of its endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedTrip {
    pub pois: Vec<usize>,
    pub start_hour: u8,
    pub end_hour: u8,
}

impl IndexedTrip {
    pub fn src(&self) -> usize {
        self.pois[0]
    }

    pub fn dst(&self) -> usize {
        self.pois[self.pois.len() - 1]
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    config: TrainConfig,
    vocab: Vocabulary,
    pub(crate) store: ParamStore,
    pub(crate) layout: Layout,
}

impl Model {
    /// Fresh parameters for `vocab`, seeded from `config.seed`.
    pub fn new(vocab: Vocabulary, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if vocab.len() < 2 {
            return Err(Error::Validation("model vocabulary needs at least 2 POIs".into()));
        }
        let mut rng = rng::stream(rng::derive(config.seed, INIT_STREAM), 0);
        let mut store = ParamStore::new();
        let n = vocab.len();
        let d = config.poi_dim;
        let endpoint_dim = d + HOURS;

        let poi = store.add("poi.v", uniform(&[n, d], config.init_scale, &mut rng))?;
        let (query, q_dim) = match config.query_mode {
            QueryMode::Bilinear => (
                QueryEncoding::Bilinear(QueryEncoder::register(&mut store, endpoint_dim, config.query_dim, &mut rng)?),
                config.query_dim,
            ),
            QueryMode::Concat => (QueryEncoding::Concat, 2 * endpoint_dim),
        };
        let trip = TripEncoder::register(&mut store, q_dim, config.query_proj_dim, d, config.hidden_dim, &mut rng)?;
        let scale = 1.0 / (config.hidden_dim as f64).sqrt();
        let head_w = store.add("head.W_f", uniform(&[config.hidden_dim, n], scale, &mut rng))?;
        let head_b = store.add("head.b_f", Tensor::zeros(&[n]))?;
        let dest_w = store.add("dest.W", uniform(&[config.hidden_dim, n], scale, &mut rng))?;
        let dest_b = store.add("dest.b", Tensor::zeros(&[n]))?;

        Ok(Model {
            config,
            vocab,
            store,
            layout: Layout { poi, query, trip, head_w, head_b, dest_w, dest_b },
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn embeddings(&self) -> PoiEmbeddings {
        PoiEmbeddings {
            vocab: self.vocab.clone(),
            table: self.store.value(self.layout.poi).clone(),
        }
    }

    pub fn set_embeddings(&mut self, emb: &PoiEmbeddings) -> Result<()> {
        if emb.vocab != self.vocab {
            return Err(Error::Integrity("embedding vocabulary differs from the model's".into()));
        }
        let current = self.store.value(self.layout.poi);
        if emb.table.shape() != current.shape() {
            return Err(Error::shape("set_embeddings", emb.table.shape(), current.shape()));
        }
        *self.store.value_mut(self.layout.poi) = emb.table.clone();
        Ok(())
    }

    /// Query encoder, f-layer and GRU.
    pub fn encoder_params(&self) -> Vec<ParamId> {
        let mut p = self.layout.query.params();
        p.extend(self.layout.trip.params());
        p
    }

    /// Sets which parameters Adam may update.
    pub(crate) fn train_only(&mut self, ids: &[ParamId]) {
        let all: Vec<ParamId> = self.store.ids().collect();
        for id in all {
            self.store.set_trainable(id, ids.contains(&id));
        }
    }

    pub fn index_trip(&self, trip: &Trip) -> Result<IndexedTrip> {
        let pois = trip
            .visits
            .iter()
            .map(|v| self.vocab.lookup(&v.poi_id))
            .collect::<Result<Vec<_>>>()?;
        if pois.len() < 2 {
            return Err(Error::Validation(format!("trip {} has fewer than 2 visits", trip.trip_id)));
        }
        Ok(IndexedTrip {
            pois,
            start_hour: trip.visits[0].hour,
            end_hour: trip.visits[trip.visits.len() - 1].hour,
        })
    }

    /// Query vector from the two endpoint encodings.
    pub fn query_vector<'t>(
        &self,
        tape: &'t Tape,
        src: usize,
        start_hour: u8,
        dst: usize,
        end_hour: u8,
    ) -> Result<Var<'t>> {
        let v = tape.param(&self.store, self.layout.poi);
        let s = endpoint(tape, v.row(src)?, start_hour)?;
        let d = endpoint(tape, v.row(dst)?, end_hour)?;
        self.layout.query.encode(tape, &self.store, s, d)
    }

    pub fn query_indices(&self, q: &Query) -> Result<(usize, usize)> {
        q.validate()?;
        Ok((self.vocab.lookup(&q.start_poi)?, self.vocab.lookup(&q.end_poi)?))
    }

    /// Short digest of config and parameter values.
    pub fn version(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.config.fingerprint().as_bytes());
        for (name, t) in self.store.to_map() {
            h.update(name.as_bytes());
            for x in t.data() {
                h.update(x.to_le_bytes());
            }
        }
        hex::encode(&h.finalize()[..6])
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            vocabulary: self.vocab.clone(),
            parameters: self.store.to_map(),
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        if ckpt.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                ckpt.format_version
            )));
        }
        let mut model = Model::new(ckpt.vocabulary, ckpt.config)?;
        model.store.load_map(ckpt.parameters)?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_checkpoint()).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(s).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Model::from_checkpoint(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Model::from_json(&s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: TrainConfig,
    pub vocabulary: Vocabulary,
    pub parameters: BTreeMap<String, Tensor>,
}
