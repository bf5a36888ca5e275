use crate::augment::two_views;
use crate::config::Similarity;
use crate::corpus::{Query, Trip};
use crate::diffnum::{stack, sum_all, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

use super::model::{IndexedTrip, Model};

/// One trip's pair of augmented views, ready to encode under its query.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewPair {
    pub trip: IndexedTrip,
    pub first: Tensor,
    pub second: Tensor,
}

impl Model {
    /// `N x d` matrix of the trip's POI embeddings.
    pub fn embed_trip(&self, trip: &IndexedTrip) -> Result<Tensor> {
        let table = self.store.value(self.layout.poi);
        let d = table.cols();
        let data = trip.pois.iter().flat_map(|&p| table.row(p).iter().copied()).collect();
        Tensor::matrix(trip.pois.len(), d, data)
    }

    pub fn make_views(&self, trips: &[IndexedTrip], rng: &mut Rng) -> Result<Vec<ViewPair>> {
        trips
            .iter()
            .map(|t| {
                let views = two_views(&self.embed_trip(t)?, &self.config().augment, rng)?;
                Ok(ViewPair { trip: t.clone(), first: views.first, second: views.second })
            })
            .collect()
    }

    fn final_state<'t>(&self, tape: &'t Tape, view: &Tensor, q: Var<'t>) -> Result<Var<'t>> {
        let rows = tape.constant(view.clone());
        let rows = (0..view.rows()).map(|i| rows.row(i)).collect::<Result<Vec<_>>>()?;
        let states = self.layout.trip.encode(tape, &self.store, &rows, q)?;
        Ok(*states.last().expect("non-empty view"))
    }

    /// Final hidden states of both views for every pair.
    pub fn view_states<'t>(&self, tape: &'t Tape, pairs: &[ViewPair]) -> Result<(Vec<Var<'t>>, Vec<Var<'t>>)> {
        let mut p = Vec::with_capacity(pairs.len());
        let mut q = Vec::with_capacity(pairs.len());
        for pair in pairs {
            let t = &pair.trip;
            let qv = self.query_vector(tape, t.src(), t.start_hour, t.dst(), t.end_hour)?;
            p.push(self.final_state(tape, &pair.first, qv)?);
            q.push(self.final_state(tape, &pair.second, qv)?);
        }
        Ok((p, q))
    }

    /// In-batch softmax contrastive loss over the two views of each trip.
    pub fn trip_contrastive_loss<'t>(&self, tape: &'t Tape, pairs: &[ViewPair]) -> Result<Var<'t>> {
        if pairs.len() < 2 {
            return Err(Error::Validation(format!(
                "contrastive batch needs at least 2 trips, got {}",
                pairs.len()
            )));
        }
        let (p, q) = self.view_states(tape, pairs)?;
        states_contrastive_loss(&p, &q, self.config().trip_similarity)
    }

    /// Teacher-forced next-POI loss plus, when enabled, the per-step destination term.
    pub fn supervised_loss_indexed<'t>(&self, tape: &'t Tape, trip: &IndexedTrip) -> Result<Var<'t>> {
        let n = trip.pois.len();
        if n < 2 {
            return Err(Error::Validation("supervised loss needs a trip of at least 2 POIs".into()));
        }
        let l = &self.layout;
        let v = tape.param(&self.store, l.poi);
        let q = self.query_vector(tape, trip.src(), trip.start_hour, trip.dst(), trip.end_hour)?;
        let fq = l.trip.project_query(tape, &self.store, q)?;
        let (hw, hb) = (tape.param(&self.store, l.head_w), tape.param(&self.store, l.head_b));
        let dest = self.config().dest_signal;
        let mut h = l.trip.gru.zero_state(tape);
        let mut terms = Vec::with_capacity(2 * (n - 1));
        for tau in 1..n {
            h = l.trip.step(tape, &self.store, v.row(trip.pois[tau - 1])?, fq, h)?;
            let logits = h.matmul(hw)?.add(hb)?;
            terms.push(logits.log_softmax()?.pick(trip.pois[tau])?);
            if dest {
                let dw = tape.param(&self.store, l.dest_w);
                let db = tape.param(&self.store, l.dest_b);
                let dl = h.matmul(dw)?.add(db)?;
                terms.push(dl.log_softmax()?.pick(trip.dst())?);
            }
        }
        sum_all(&terms)?.scale(-1.0 / (n - 1) as f64)
    }

    pub fn supervised_loss<'t>(&self, tape: &'t Tape, trip: &Trip, query: &Query) -> Result<Var<'t>> {
        let idx = self.index_trip(trip)?;
        if trip.len() != query.n {
            return Err(Error::Validation(format!(
                "trip {} has {} POIs but the query asks for {}",
                trip.trip_id,
                trip.len(),
                query.n
            )));
        }
        let (s, d) = self.query_indices(query)?;
        if s != idx.src() || d != idx.dst() {
            return Err(Error::Validation(format!("trip {} does not match the query endpoints", trip.trip_id)));
        }
        let idx = IndexedTrip { start_hour: query.start_hour, end_hour: query.end_hour, ..idx };
        self.supervised_loss_indexed(tape, &idx)
    }
}

/// `-(1/m) sum_i log softmax_j s(p_i, q_j) [i]`.
pub fn states_contrastive_loss<'t>(p: &[Var<'t>], q: &[Var<'t>], sim: Similarity) -> Result<Var<'t>> {
    if p.len() != q.len() || p.len() < 2 {
        return Err(Error::Validation("contrastive loss needs two matching batches of size >= 2".into()));
    }
    let mut rows = Vec::with_capacity(p.len());
    for (i, &pi) in p.iter().enumerate() {
        let sims = q
            .iter()
            .map(|&qj| match sim {
                Similarity::Dot => pi.dot(qj),
                Similarity::Cosine => pi.cosine(qj),
            })
            .collect::<Result<Vec<_>>>()?;
        let row = stack(&sims)?;
        rows.push(row.log_sum_exp()?.sub(row.pick(i)?)?);
    }
    stack(&rows)?.mean()
}
