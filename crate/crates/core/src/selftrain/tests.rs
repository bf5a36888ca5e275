use std::collections::HashSet;

use rand::Rng as _;

use super::*;
use crate::config::{Similarity, TrainConfig};
use crate::corpus::{query_of, Query};
use crate::diffnum::{grad_check, log_sum_exp, Adam, AdamConfig, GradCheckOptions, Tape, Tensor};
use crate::error::Error;
use crate::rng;
use crate::synth;
use crate::vocab::Vocabulary;

fn vocab(n: usize) -> Vocabulary {
    (0..n).map(synth::poi_name).collect()
}

fn toy(n: usize, seed: u64) -> Model {
    let cfg = TrainConfig { seed, ..TrainConfig::small() };
    Model::new(vocab(n), cfg).unwrap()
}

fn zero_heads(model: &mut Model) {
    let l = *model.layout();
    for id in [l.head_w, l.head_b, l.dest_w, l.dest_b] {
        model.params_mut().value_mut(id).fill(0.0);
    }
}

#[test]
fn contrastive_reference_values() {
    let tape = Tape::new();
    let e1 = tape.constant(Tensor::vector(vec![1.0, 0.0]));
    let e2 = tape.constant(Tensor::vector(vec![0.0, 1.0]));
    let expected = -(1f64.exp() / (1f64.exp() + 1.0)).ln();
    for sim in [Similarity::Cosine, Similarity::Dot] {
        let l = states_contrastive_loss(&[e1, e2], &[e1, e2], sim).unwrap().item();
        assert!((l - expected).abs() < 1e-12);
        assert!((l - 0.3133).abs() < 1e-4);
    }
    let same = vec![e1; 8];
    let l = states_contrastive_loss(&same, &same, Similarity::Cosine).unwrap().item();
    assert!((l - 8f64.ln()).abs() < 1e-9);
    assert!(states_contrastive_loss(&[e1], &[e1], Similarity::Dot).is_err());
}

#[test]
fn single_trip_batch_rejected() {
    let model = toy(6, 0);
    let trip = IndexedTrip { pois: vec![0, 1, 2], start_hour: 9, end_hour: 11 };
    let pairs = model.make_views(&[trip], &mut rng::seeded(0)).unwrap();
    let tape = Tape::new();
    assert!(matches!(model.trip_contrastive_loss(&tape, &pairs), Err(Error::Validation(_))));
}

fn random_trips(n_pois: usize, m: usize, rng: &mut rng::Rng) -> Vec<IndexedTrip> {
    (0..m)
        .map(|_| {
            let len = rng.gen_range(3..6);
            let pois = rand::seq::index::sample(rng, n_pois, len).into_vec();
            IndexedTrip { pois, start_hour: rng.gen_range(0..24), end_hour: rng.gen_range(0..24) }
        })
        .collect()
}

#[test]
fn batch_form_matches_per_trip_form() {
    for (seed, sim) in [(0, Similarity::Dot), (1, Similarity::Cosine), (2, Similarity::Dot)] {
        let cfg = TrainConfig { seed, trip_similarity: sim, ..TrainConfig::small() };
        let model = Model::new(vocab(12), cfg).unwrap();
        let mut r = rng::seeded(seed);
        let pairs = model.make_views(&random_trips(12, 5, &mut r), &mut r).unwrap();
        let tape = Tape::new();
        let batch = model.trip_contrastive_loss(&tape, &pairs).unwrap().item();
        let (p, q) = model.view_states(&tape, &pairs).unwrap();
        let p: Vec<Vec<f64>> = p.iter().map(|v| v.value().data().to_vec()).collect();
        let q: Vec<Vec<f64>> = q.iter().map(|v| v.value().data().to_vec()).collect();
        let s = |a: &[f64], b: &[f64]| {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            match sim {
                Similarity::Dot => dot,
                Similarity::Cosine => {
                    let n = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    dot / (n(a) * n(b) + crate::diffnum::COSINE_EPS)
                }
            }
        };
        let mut total = 0.0;
        for i in 0..p.len() {
            let row: Vec<f64> = q.iter().map(|qj| s(&p[i], qj)).collect();
            total += log_sum_exp(&row) - row[i];
        }
        assert!((batch - total / p.len() as f64).abs() < 1e-10);
    }
}

#[test]
fn supervised_uniform_logits() {
    let mut model = toy(2, 0);
    zero_heads(&mut model);
    let trip = IndexedTrip { pois: vec![0, 1], start_hour: 9, end_hour: 10 };
    let tape = Tape::new();
    let l = model.supervised_loss_indexed(&tape, &trip).unwrap().item();
    assert!((l - 2.0 * 2f64.ln()).abs() < 1e-12);

    let cfg = TrainConfig { dest_signal: false, ..model.config().clone() };
    let mut plain = Model::new(vocab(2), cfg).unwrap();
    zero_heads(&mut plain);
    let tape = Tape::new();
    let l = plain.supervised_loss_indexed(&tape, &trip).unwrap().item();
    assert!((l - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn destination_term_targets_destination_every_step() {
    let mut model = toy(5, 1);
    zero_heads(&mut model);
    let dest_b = model.layout().dest_b;
    let trip = IndexedTrip { pois: vec![0, 1, 2, 3], start_hour: 9, end_hour: 12 };
    // Bias toward the destination makes every destination term cheap.
    model.params_mut().value_mut(dest_b).data_mut()[3] = 5.0;
    let tape = Tape::new();
    let toward = model.supervised_loss_indexed(&tape, &trip).unwrap().item();
    let per_step_dest = -(5f64.exp() / (5f64.exp() + 4.0)).ln();
    let expected = 5f64.ln() + per_step_dest;
    assert!((toward - expected).abs() < 1e-12, "{toward} vs {expected}");
}

#[test]
fn supervised_loss_checks_query() {
    let model = toy(6, 0);
    let trip = synth::make_trip("t", "u", &[0, 1, 2], 9);
    let q = query_of(&trip).unwrap();
    let tape = Tape::new();
    assert!(model.supervised_loss(&tape, &trip, &q).is_ok());
    let bad = Query { n: 4, ..q.clone() };
    let tape = Tape::new();
    assert!(matches!(model.supervised_loss(&tape, &trip, &bad), Err(Error::Validation(_))));
    let unknown = synth::make_trip("t", "u", &[0, 1, 9], 9);
    let tape = Tape::new();
    assert!(matches!(model.supervised_loss(&tape, &unknown, &q), Err(Error::UnknownPoi(_))));
}

#[test]
fn joint_loss_gradient() {
    let mut r = rng::seeded(11);
    for seed in 0..2 {
        let mut model = toy(20, seed);
        let l = *model.layout();
        let trips = random_trips(20, 2, &mut r);
        let mut ids = model.encoder_params();
        ids.extend([l.head_w, l.head_b, l.dest_w, l.dest_b, l.poi]);
        let opts = GradCheckOptions { max_entries_per_param: Some(12), seed, ..GradCheckOptions::default() };
        let template = model.clone();
        let report = grad_check(model.params_mut(), &ids, opts, |tape, store| {
            let mut m = template.clone();
            *m.params_mut() = store.clone();
            let a = m.supervised_loss_indexed(tape, &trips[0])?;
            let b = m.supervised_loss_indexed(tape, &trips[1])?;
            a.add(b)
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}

#[test]
fn two_poi_query_needs_no_model() {
    let model = toy(4, 0);
    let q = Query::new("p02", 9, "p00", 10, 2).unwrap();
    assert_eq!(model.recommend(&q).unwrap(), vec!["p02", "p00"]);
}

#[test]
fn decode_errors() {
    let model = toy(4, 0);
    let q = Query::new("p00", 9, "p01", 10, 5).unwrap();
    assert!(matches!(model.recommend(&q), Err(Error::Infeasible(_))));
    let q = Query::new("p00", 9, "zz", 10, 3).unwrap();
    assert!(matches!(model.recommend(&q), Err(Error::UnknownPoi(_))));
    let q = Query { start_poi: "p00".into(), start_hour: 9, end_poi: "p00".into(), end_hour: 9, n: 3 };
    assert!(matches!(model.recommend(&q), Err(Error::Validation(_))));
}

#[test]
fn n3_matches_brute_force() {
    for seed in 0..5 {
        let model = toy(4, seed);
        let (s, d) = (1, 3);
        // Score both eligible intermediates directly.
        let tape = Tape::new();
        let l = model.layout();
        let v = tape.param(model.params(), l.poi);
        let q = model.query_vector(&tape, s, 8, d, 10).unwrap();
        let fq = l.trip.project_query(&tape, model.params(), q).unwrap();
        let h = l.trip.step(&tape, model.params(), v.row(s).unwrap(), fq, l.trip.gru.zero_state(&tape)).unwrap();
        let logits = h
            .matmul(tape.param(model.params(), l.head_w))
            .unwrap()
            .add(tape.param(model.params(), l.head_b))
            .unwrap()
            .value();
        let want = if logits.data()[2] > logits.data()[0] { 2 } else { 0 };
        assert_eq!(model.decode(s, 8, d, 10, 3, 1).unwrap(), vec![s, want, d]);
    }
}

#[test]
fn ties_go_to_smallest_index() {
    let mut model = toy(5, 0);
    zero_heads(&mut model);
    assert_eq!(model.decode(3, 9, 1, 12, 5, 1).unwrap(), vec![3, 0, 2, 4, 1]);
    assert_eq!(model.decode(3, 9, 1, 12, 5, 3).unwrap(), vec![3, 0, 2, 4, 1]);
}

#[test]
fn decoded_trips_satisfy_contract() {
    let model = toy(9, 3);
    let mut r = rng::seeded(5);
    for _ in 0..1000 {
        let s = r.gen_range(0..9);
        let d = (s + r.gen_range(1..9)) % 9;
        let n = r.gen_range(2..=9);
        let width = r.gen_range(1..4);
        let t = model.decode(s, r.gen_range(0..24), d, r.gen_range(0..24), n, width).unwrap();
        assert_eq!(t.len(), n);
        assert_eq!((t[0], t[n - 1]), (s, d));
        assert_eq!(t.iter().collect::<HashSet<_>>().len(), n);
    }
}

#[test]
fn recommend_ignores_destination_head() {
    let model = toy(8, 2);
    let mut poisoned = model.clone();
    let l = *model.layout();
    poisoned.params_mut().value_mut(l.dest_w).fill(f64::NAN);
    poisoned.params_mut().value_mut(l.dest_b).fill(f64::NAN);
    for (s, d, n) in [(0, 5, 6), (7, 1, 4), (3, 2, 8)] {
        for w in [1, 3] {
            assert_eq!(model.decode(s, 9, d, 15, n, w).unwrap(), poisoned.decode(s, 9, d, 15, n, w).unwrap());
        }
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let model = toy(7, 9);
    let json = model.to_json();
    let back = Model::from_json(&json).unwrap();
    assert_eq!(back.params().to_map(), model.params().to_map());
    assert_eq!(back.to_json(), json);
    assert_eq!(back.version(), model.version());

    let mut ckpt = model.to_checkpoint();
    ckpt.format_version = 99;
    assert!(matches!(Model::from_checkpoint(ckpt), Err(Error::Checkpoint(_))));
    let mut ckpt = model.to_checkpoint();
    ckpt.parameters.remove("dest.W");
    assert!(matches!(Model::from_checkpoint(ckpt), Err(Error::Checkpoint(_))));
}

#[test]
fn warmup_with_zero_epochs_changes_nothing() {
    let cfg = TrainConfig { warmup_epochs: 0, ..TrainConfig::small() };
    let mut model = Model::new(vocab(6), cfg).unwrap();
    let before = model.params().to_map();
    let trips = random_trips(6, 4, &mut rng::seeded(0));
    assert!(contrastive_warmup(&mut model, &trips).unwrap().is_empty());
    assert_eq!(model.params().to_map(), before);
}

#[test]
fn warmup_moves_only_encoders() {
    let mut model = toy(10, 4);
    let before = model.params().to_map();
    let trips = random_trips(10, 6, &mut rng::seeded(1));
    let log = contrastive_warmup(&mut model, &trips).unwrap();
    assert_eq!(log.len(), model.config().warmup_epochs);
    let after = model.params().to_map();
    for name in ["poi.v", "head.W_f", "head.b_f", "dest.W", "dest.b"] {
        assert_eq!(before[name], after[name], "{name}");
    }
    for name in ["query.K", "trip.f", "gru.z.W"] {
        assert_ne!(before[name], after[name], "{name}");
    }
}

#[test]
fn fixed_batch_contrastive_overfits() {
    let model = toy(15, 0);
    let mut r = rng::seeded(2);
    let pairs = model.make_views(&random_trips(15, 8, &mut r), &mut r).unwrap();
    let mut model = model;
    let enc = model.encoder_params();
    model.train_only(&enc);
    let mut adam = Adam::new(AdamConfig::with_lr(0.01));
    let mut losses = Vec::new();
    for _ in 0..50 {
        let tape = Tape::new();
        let loss = model.trip_contrastive_loss(&tape, &pairs).unwrap();
        losses.push(loss.item());
        tape.backward(loss, &mut model.store).unwrap();
        adam.step(&mut model.store);
    }
    assert!(losses[49] < losses[0], "{losses:?}");
}

#[test]
fn training_is_deterministic() {
    let corpus = synth::memorization_corpus(3);
    let cfg = TrainConfig { poi_epochs: 2, warmup_epochs: 2, supervised_epochs: 3, ..TrainConfig::small() };
    let a = train(&corpus, &cfg).unwrap();
    let b = train(&corpus, &cfg).unwrap();
    assert_eq!(a.model.to_json(), b.model.to_json());
    assert_eq!(a.log, b.log);
    assert!(a.walk_count > 0);
    assert_eq!(a.log.supervised.len(), 3);
    let c = train(&corpus, &TrainConfig { seed: 43, ..cfg }).unwrap();
    assert_ne!(a.model.to_json(), c.model.to_json());
}
