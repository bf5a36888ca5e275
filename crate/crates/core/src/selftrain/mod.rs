//! The SelfTrip model: contrastive warm-up of the trip encoder, supervised
//! training with a destination signal, and constrained decoding.

mod decode;
mod loss;
mod model;
mod train;

pub use loss::{states_contrastive_loss, ViewPair};
pub use model::{Checkpoint, IndexedTrip, Layout, Model, FORMAT_VERSION};
pub use train::{
    contrastive_warmup, pretrain_embeddings, supervised_train, supervised_train_with, train, training_trips,
    walk_corpus, walk_corpus_on, TrainLog, TrainOutcome,
};

#[cfg(test)]
mod tests;
