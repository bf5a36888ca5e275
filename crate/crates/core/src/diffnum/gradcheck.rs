use rand::seq::index::sample;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::Result;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    /// Analytic and numeric values at the worst entry.
    pub worst_values: (f64, f64),
    pub entries_checked: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Check at most this many seeded-random entries per parameter.
    pub max_entries_per_param: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            epsilon: 1e-4,
            max_entries_per_param: None,
            seed: 0,
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares tape gradients with five-point central finite differences.
///
/// `loss_fn` must be deterministic: any sampling inside it has to be reseeded per call.
pub fn grad_check<F>(
    store: &mut ParamStore,
    params: &[ParamId],
    options: GradCheckOptions,
    loss_fn: F,
) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&'t Tape, &ParamStore) -> Result<Var<'t>>,
{
    store.zero_grads();
    {
        let tape = Tape::new();
        let loss = loss_fn(&tape, store)?;
        tape.backward(loss, store)?;
    }
    let eval = |store: &ParamStore| -> Result<f64> {
        let tape = Tape::new();
        Ok(loss_fn(&tape, store)?.item())
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        worst_values: (0.0, 0.0),
        entries_checked: 0,
    };
    let mut pick = rng::seeded(options.seed);
    for &id in params {
        let analytic = store.grad(id).clone();
        let n = analytic.len();
        let entries: Vec<usize> = match options.max_entries_per_param {
            Some(k) if k < n => {
                let mut v = sample(&mut pick, n, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..n).collect(),
        };
        for i in entries {
            let original = store.value(id).data()[i];
            let h = options.epsilon;
            let at = |offset: f64, store: &mut ParamStore| -> Result<f64> {
                store.value_mut(id).data_mut()[i] = original + offset;
                eval(store)
            };
            let (p1, m1) = (at(h, store)?, at(-h, store)?);
            let (p2, m2) = (at(2.0 * h, store)?, at(-2.0 * h, store)?);
            store.value_mut(id).data_mut()[i] = original;
            let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
            let err = relative_error(analytic.data()[i], numeric);
            report.entries_checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((store.get(id).name.clone(), i));
                report.worst_values = (analytic.data()[i], numeric);
            }
        }
    }
    store.zero_grads();
    Ok(report)
}
