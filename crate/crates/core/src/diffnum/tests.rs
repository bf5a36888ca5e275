use proptest::prelude::*;

use super::*;
use crate::error::Error;
use crate::rng;

fn v(data: &[f64]) -> Tensor {
    Tensor::vector(data.to_vec())
}

#[test]
fn softmax_of_zeros_is_uniform() {
    let tape = Tape::new();
    let y = tape.constant(v(&[0.0, 0.0])).softmax().unwrap();
    assert_eq!(y.value().data(), &[0.5, 0.5]);
}

#[test]
fn cosine_identity_and_zero_norm() {
    let tape = Tape::new();
    let x = tape.constant(v(&[0.3, -2.0, 5.0]));
    assert!((x.cosine(x).unwrap().item() - 1.0).abs() < 1e-12);
    let z = tape.constant(v(&[0.0, 0.0, 0.0]));
    assert!(matches!(x.cosine(z), Err(Error::Numeric(_))));
}

#[test]
fn bilinear_with_zero_kernel() {
    let tape = Tape::new();
    let a = tape.constant(v(&[1.0, 2.0]));
    let b = tape.constant(v(&[3.0, -1.0, 4.0]));
    let k = tape.constant(Tensor::zeros(&[2, 3, 5]));
    let out = a.bilinear(k, b).unwrap();
    assert_eq!(out.value().data(), &[0.0; 5]);
}

#[test]
fn shape_errors_name_both_shapes() {
    let tape = Tape::new();
    let a = tape.constant(v(&[1.0, 2.0]));
    let b = tape.constant(v(&[1.0, 2.0, 3.0]));
    match a.add(b) {
        Err(Error::Shape { left, right, .. }) => {
            assert_eq!(left, vec![2]);
            assert_eq!(right, vec![3]);
        }
        other => panic!("expected shape error, got {other:?}"),
    }
    let m = tape.constant(Tensor::zeros(&[4, 2]));
    assert!(a.matmul(m).is_err());
}

#[test]
fn non_finite_output_is_numeric_error() {
    let tape = Tape::new();
    let a = tape.constant(v(&[1e300]));
    assert!(matches!(a.scale(1e300), Err(Error::Numeric(_))));
}

#[test]
fn square_gradient() {
    let mut store = ParamStore::new();
    let x = store.add("x", v(&[3.0])).unwrap();
    let tape = Tape::new();
    let xv = tape.param(&store, x);
    let loss = xv.mul(xv).unwrap().sum().unwrap();
    tape.backward(loss, &mut store).unwrap();
    assert_eq!(store.grad(x).data(), &[6.0]);
}

#[test]
fn cosine_gradient_at_orthogonal_unit_vectors() {
    let tape = Tape::new();
    let x = tape.constant(v(&[1.0, 0.0, 0.0]));
    let y = tape.constant(v(&[0.0, 1.0, 0.0]));
    let s = x.cosine(y).unwrap();
    let grads = tape.gradients(s).unwrap();
    let gx = grads.get(x).unwrap();
    for (a, b) in gx.data().iter().zip([0.0, 1.0, 0.0]) {
        assert!((a - b).abs() < 1e-11);
    }
}

#[test]
fn unused_parameter_gets_zero_gradient() {
    let mut store = ParamStore::new();
    let used = store.add("used", v(&[1.0, 2.0])).unwrap();
    let unused = store.add("unused", v(&[5.0])).unwrap();
    let tape = Tape::new();
    let loss = tape.param(&store, used).sum().unwrap();
    tape.backward(loss, &mut store).unwrap();
    assert_eq!(store.grad(unused).data(), &[0.0]);
    assert_eq!(store.grad(used).data(), &[1.0, 1.0]);
}

#[test]
fn gradients_accumulate_across_uses() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
    let tape = Tape::new();
    let a = tape.param(&store, w).row(0).unwrap();
    let b = tape.param(&store, w).row(0).unwrap();
    let loss = a.add(b).unwrap().sum().unwrap();
    tape.backward(loss, &mut store).unwrap();
    assert_eq!(store.grad(w).data(), &[2.0, 2.0, 0.0, 0.0]);
}

#[test]
fn backward_rejects_non_scalar_and_second_use() {
    let tape = Tape::new();
    let x = tape.constant(v(&[1.0, 2.0]));
    assert!(matches!(tape.gradients(x), Err(Error::Shape { .. })));

    let tape = Tape::new();
    let s = tape.constant(v(&[1.0, 2.0])).sum().unwrap();
    assert!(tape.gradients(s).is_ok());
    assert!(tape.gradients(s).is_err());
}

fn random_store(rng: &mut rng::Rng) -> (ParamStore, Vec<ParamId>) {
    let mut s = ParamStore::new();
    let ids = vec![
        s.add("a", uniform(&[4], 1.0, rng)).unwrap(),
        s.add("b", uniform(&[4], 1.0, rng)).unwrap(),
        s.add("m", uniform(&[4, 3], 1.0, rng)).unwrap(),
        s.add("k", uniform(&[4, 4, 3], 1.0, rng)).unwrap(),
        s.add("e", uniform(&[5, 4], 1.0, rng)).unwrap(),
    ];
    (s, ids)
}

#[test]
fn every_op_matches_finite_differences() {
    for seed in 0..3 {
        let mut r = rng::seeded(seed);
        let (mut store, ids) = random_store(&mut r);
        let [a, b, m, k, e] = [ids[0], ids[1], ids[2], ids[3], ids[4]];
        let report = grad_check(&mut store, &ids, GradCheckOptions::default(), |tape, s| {
            let a = tape.param(s, a);
            let b = tape.param(s, b);
            let m = tape.param(s, m);
            let k = tape.param(s, k);
            let row = tape.param(s, e).row(2)?;
            let h = a.mul(row)?.add(b)?.sub(a.scale(0.5)?)?;
            let z = h.matmul(m)?.sigmoid()?;
            let t = a.bilinear(k, b)?.tanh()?.leaky_relu()?;
            let c = concat(&[z, t])?;
            let sm = c.softmax()?;
            let ls = c.log_softmax()?.pick(1)?;
            let cos = a.cosine(row)?;
            let lse = c.log_sum_exp()?;
            let d = h.dot(b)?;
            let scalars = [sm.pick(0)?, ls, cos, lse, d, c.mean()?];
            stack(&scalars)?.sum()
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-5, "seed {seed}: {report:?}");
    }
}

#[test]
fn matrix_matmul_gradient() {
    let mut r = rng::seeded(5);
    let mut store = ParamStore::new();
    let x = store.add("x", uniform(&[3, 4], 1.0, &mut r)).unwrap();
    let w = store.add("w", uniform(&[4, 2], 1.0, &mut r)).unwrap();
    let report = grad_check(&mut store, &[x, w], GradCheckOptions::default(), |tape, s| {
        tape.param(s, x).matmul(tape.param(s, w))?.tanh()?.sum()
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-7, "{report:?}");
}

#[test]
fn quadratic_grad_check_is_tight() {
    let mut store = ParamStore::new();
    let x = store.add("x", v(&[0.7, -1.3, 2.1])).unwrap();
    let report = grad_check(&mut store, &[x], GradCheckOptions::default(), |tape, s| {
        let p = tape.param(s, x);
        p.mul(p)?.sum()
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-9, "{report:?}");
    assert_eq!(report.entries_checked, 3);
}

#[test]
fn adam_fixed_point_and_first_step() {
    let mut store = ParamStore::new();
    let a = store.add("a", v(&[1.0, -2.0])).unwrap();
    let mut adam = Adam::new(AdamConfig::with_lr(0.1));
    adam.step(&mut store);
    assert_eq!(store.value(a).data(), &[1.0, -2.0]);

    let mut store = ParamStore::new();
    let a = store.add("a", v(&[1.0, -2.0])).unwrap();
    let mut adam = Adam::new(AdamConfig::with_lr(0.1));
    store.accumulate_grad(a, &v(&[0.5, -3.0]));
    adam.step(&mut store);
    // Bias-corrected m/sqrt(v) = g/|g| at t = 1.
    let moved: Vec<f64> = store.value(a).data().iter().zip([1.0, -2.0]).map(|(x, y)| x - y).collect();
    assert!((moved[0] + 0.1).abs() < 1e-6);
    assert!((moved[1] - 0.1).abs() < 1e-6);
    assert_eq!(store.grad(a).data(), &[0.0, 0.0]);
}

#[test]
fn adam_is_deterministic() {
    let run = || {
        let mut store = ParamStore::new();
        let a = store.add("a", v(&[0.3, 0.4])).unwrap();
        let mut adam = Adam::new(AdamConfig::with_lr(0.05));
        for i in 0..10 {
            store.accumulate_grad(a, &v(&[i as f64 * 0.1, -0.2]));
            adam.step(&mut store);
        }
        store.value(a).clone()
    };
    assert_eq!(run(), run());
}

#[test]
fn frozen_parameters_do_not_move() {
    let mut store = ParamStore::new();
    let a = store.add("a", v(&[1.0])).unwrap();
    store.set_trainable(a, false);
    store.accumulate_grad(a, &v(&[1.0]));
    Adam::new(AdamConfig::default()).step(&mut store);
    assert_eq!(store.value(a).data(), &[1.0]);
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(xs in prop::collection::vec(-50.0f64..50.0, 1..20)) {
        let p = softmax(&xs);
        let total: f64 = p.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x > 0.0));
    }
}
