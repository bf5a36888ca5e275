//! Query encoder (bilinear interaction of the two endpoint encodings) and the
//! query-conditioned GRU trip encoder.

use serde::{Deserialize, Serialize};

use crate::diffnum::{concat, uniform, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const HOURS: usize = 24;

/// One-hot hour-of-day vector.
pub fn encode_time(hour: u8) -> Result<Tensor> {
    if hour as usize >= HOURS {
        return Err(Error::Validation(format!("hour {hour} outside 0..=23")));
    }
    let mut t = Tensor::zeros(&[HOURS]);
    t.data_mut()[hour as usize] = 1.0;
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    /// Bilinear tensor term plus affine term, through LeakyReLU.
    #[default]
    Bilinear,
    /// Plain concatenation of the two endpoint encodings.
    Concat,
}

/// Parameters of the bilinear query encoder.
#[derive(Debug, Clone, Copy)]
pub struct QueryEncoder {
    pub kernel: ParamId,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl QueryEncoder {
    pub fn register(store: &mut ParamStore, endpoint_dim: usize, out_dim: usize, rng: &mut Rng) -> Result<Self> {
        let d = endpoint_dim;
        let scale = 1.0 / (d as f64).sqrt();
        Ok(QueryEncoder {
            kernel: store.add("query.K", uniform(&[d, d, out_dim], scale / (d as f64).sqrt(), rng))?,
            weight: store.add("query.W", uniform(&[2 * d, out_dim], scale, rng))?,
            bias: store.add("query.b", Tensor::zeros(&[out_dim]))?,
        })
    }

    /// `LeakyReLU(bilinear(dest, K, src) + [src || dest] W + b)`.
    pub fn forward<'t>(&self, tape: &'t Tape, store: &ParamStore, src: Var<'t>, dest: Var<'t>) -> Result<Var<'t>> {
        let k = tape.param(store, self.kernel);
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let inter = dest.bilinear(k, src)?;
        let affine = concat(&[src, dest])?.matmul(w)?.add(b)?;
        inter.add(affine)?.leaky_relu()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum QueryEncoding {
    Bilinear(QueryEncoder),
    Concat,
}

impl QueryEncoding {
    /// Encodes `[v(l_s) || u(t_s)]` and `[v(l_d) || u(t_d)]` into the query vector.
    pub fn encode<'t>(&self, tape: &'t Tape, store: &ParamStore, src: Var<'t>, dest: Var<'t>) -> Result<Var<'t>> {
        match self {
            QueryEncoding::Bilinear(enc) => enc.forward(tape, store, src, dest),
            QueryEncoding::Concat => concat(&[src, dest]),
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        match self {
            QueryEncoding::Bilinear(e) => vec![e.kernel, e.weight, e.bias],
            QueryEncoding::Concat => Vec::new(),
        }
    }
}

/// Endpoint encoding `[v(l) || onehot(hour)]`.
pub fn endpoint<'t>(tape: &'t Tape, poi_row: Var<'t>, hour: u8) -> Result<Var<'t>> {
    concat(&[poi_row, tape.constant(encode_time(hour)?)])
}

#[derive(Debug, Clone, Copy)]
pub struct Gate {
    pub input: ParamId,
    pub hidden: ParamId,
    pub bias: ParamId,
}

#[derive(Debug, Clone, Copy)]
pub struct GruCell {
    pub update: Gate,
    pub reset: Gate,
    pub candidate: Gate,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl GruCell {
    pub fn register(store: &mut ParamStore, input_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Result<Self> {
        let scale = 1.0 / (hidden_dim as f64).sqrt();
        let mut gate = |name: &str, store: &mut ParamStore| -> Result<Gate> {
            Ok(Gate {
                input: store.add(&format!("gru.{name}.W"), uniform(&[input_dim, hidden_dim], scale, rng))?,
                hidden: store.add(&format!("gru.{name}.U"), uniform(&[hidden_dim, hidden_dim], scale, rng))?,
                bias: store.add(&format!("gru.{name}.b"), Tensor::zeros(&[hidden_dim]))?,
            })
        };
        Ok(GruCell {
            update: gate("z", store)?,
            reset: gate("r", store)?,
            candidate: gate("n", store)?,
            input_dim,
            hidden_dim,
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        [self.update, self.reset, self.candidate]
            .iter()
            .flat_map(|g| [g.input, g.hidden, g.bias])
            .collect()
    }

    /// One recurrence: `h = (1 - z) * h_prev + z * tanh(x W + (r * h_prev) U + b)`.
    pub fn step<'t>(&self, tape: &'t Tape, store: &ParamStore, x: Var<'t>, h_prev: Var<'t>) -> Result<Var<'t>> {
        let gate = |g: &Gate, h: Var<'t>| -> Result<Var<'t>> {
            x.matmul(tape.param(store, g.input))?
                .add(h.matmul(tape.param(store, g.hidden))?)?
                .add(tape.param(store, g.bias))
        };
        let z = gate(&self.update, h_prev)?.sigmoid()?;
        let r = gate(&self.reset, h_prev)?.sigmoid()?;
        let n = gate(&self.candidate, r.mul(h_prev)?)?.tanh()?;
        h_prev.add(z.mul(n.sub(h_prev)?)?)
    }

    pub fn zero_state<'t>(&self, tape: &'t Tape) -> Var<'t> {
        tape.constant(Tensor::zeros(&[self.hidden_dim]))
    }
}

/// GRU over `[v(l_t) || f(q)]` where `f` is a bias-free dense layer.
#[derive(Debug, Clone, Copy)]
pub struct TripEncoder {
    pub query_proj: ParamId,
    pub gru: GruCell,
}

impl TripEncoder {
    pub fn register(
        store: &mut ParamStore,
        query_dim: usize,
        proj_dim: usize,
        poi_dim: usize,
        hidden_dim: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let query_proj = store.add(
            "trip.f",
            uniform(&[query_dim, proj_dim], 1.0 / (query_dim as f64).sqrt(), rng),
        )?;
        let gru = GruCell::register(store, poi_dim + proj_dim, hidden_dim, rng)?;
        Ok(TripEncoder { query_proj, gru })
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = vec![self.query_proj];
        p.extend(self.gru.params());
        p
    }

    pub fn project_query<'t>(&self, tape: &'t Tape, store: &ParamStore, q: Var<'t>) -> Result<Var<'t>> {
        q.matmul(tape.param(store, self.query_proj))
    }

    pub fn step<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        poi_row: Var<'t>,
        projected_query: Var<'t>,
        h_prev: Var<'t>,
    ) -> Result<Var<'t>> {
        let x = concat(&[poi_row, projected_query])?;
        self.gru.step(tape, store, x, h_prev)
    }

    /// Hidden states `h_1..h_N` from `h_0 = 0`.
    pub fn encode<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        rows: &[Var<'t>],
        q: Var<'t>,
    ) -> Result<Vec<Var<'t>>> {
        if rows.is_empty() {
            return Err(Error::Validation("cannot encode an empty trip".into()));
        }
        let fq = self.project_query(tape, store, q)?;
        let mut h = self.gru.zero_state(tape);
        let mut states = Vec::with_capacity(rows.len());
        for &row in rows {
            h = self.step(tape, store, row, fq, h)?;
            states.push(h);
        }
        Ok(states)
    }
}
