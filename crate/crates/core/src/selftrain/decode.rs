use crate::corpus::Query;
use crate::diffnum::{log_sum_exp, Tape, Var};
use crate::error::{Error, Result};

use super::model::Model;

struct Beam<'t> {
    seq: Vec<usize>,
    h: Var<'t>,
    score: f64,
}

impl Model {
    /// Trip for `query` with the configured beam width.
    pub fn recommend(&self, query: &Query) -> Result<Vec<String>> {
        self.recommend_with_beam(query, self.config().beam_width)
    }

    pub fn recommend_with_beam(&self, query: &Query, width: usize) -> Result<Vec<String>> {
        let (s, d) = self.query_indices(query)?;
        let idx = self.decode(s, query.start_hour, d, query.end_hour, query.n, width)?;
        Ok(idx.into_iter().map(|i| self.vocab().id(i).to_string()).collect())
    }

    /// Decodes `n` indices from `src` to `dst`. Intermediate slots never repeat a
    /// POI and never use `dst`; ties go to the smallest index.
    pub fn decode(&self, src: usize, start_hour: u8, dst: usize, end_hour: u8, n: usize, width: usize) -> Result<Vec<usize>> {
        let size = self.vocab().len();
        if src >= size || dst >= size {
            return Err(Error::Validation("query index outside the vocabulary".into()));
        }
        if src == dst {
            return Err(Error::Validation("start and end POI must differ".into()));
        }
        if n < 2 {
            return Err(Error::Validation(format!("n must be at least 2, got {n}")));
        }
        if n > size {
            return Err(Error::Infeasible(format!("n = {n} exceeds the {size} known POIs")));
        }
        if n == 2 {
            return Ok(vec![src, dst]);
        }
        let width = width.max(1);
        let l = &self.layout;
        let tape = Tape::new();
        let v = tape.param(&self.store, l.poi);
        let q = self.query_vector(&tape, src, start_hour, dst, end_hour)?;
        let fq = l.trip.project_query(&tape, &self.store, q)?;
        let (hw, hb) = (tape.param(&self.store, l.head_w), tape.param(&self.store, l.head_b));
        let h0 = l.trip.step(&tape, &self.store, v.row(src)?, fq, l.trip.gru.zero_state(&tape))?;
        let mut beams = vec![Beam { seq: vec![src], h: h0, score: 0.0 }];

        for _ in 1..n - 1 {
            let mut cands: Vec<(f64, usize, usize)> = Vec::new();
            for (bi, beam) in beams.iter().enumerate() {
                let logits = beam.h.matmul(hw)?.add(hb)?.value();
                let eligible: Vec<usize> = (0..size).filter(|&p| p != dst && !beam.seq.contains(&p)).collect();
                let scores: Vec<f64> = eligible.iter().map(|&p| logits.data()[p]).collect();
                let norm = log_sum_exp(&scores);
                for (&p, &s) in eligible.iter().zip(&scores) {
                    cands.push((beam.score + s - norm, bi, p));
                }
            }
            cands.sort_by(|a, b| {
                b.0.total_cmp(&a.0)
                    .then_with(|| beams[a.1].seq.cmp(&beams[b.1].seq))
                    .then(a.2.cmp(&b.2))
            });
            cands.truncate(width);
            let mut next = Vec::with_capacity(cands.len());
            for (score, bi, p) in cands {
                let parent = &beams[bi];
                let h = l.trip.step(&tape, &self.store, v.row(p)?, fq, parent.h)?;
                let mut seq = parent.seq.clone();
                seq.push(p);
                next.push(Beam { seq, h, score });
            }
            beams = next;
        }
        let mut best = beams.swap_remove(0).seq;
        best.push(dst);
        Ok(best)
    }
}
