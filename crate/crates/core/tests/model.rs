//! Gradient, training and surrogate checks for the GCN model.

mod common;

use common::dense::{max_rel_error, model_fixture};

use gcnpoison::data::{generate_sbm, Dataset, FeatureMatrix, SbmConfig};
use gcnpoison::gcn::{
    accuracy, gcn_backward, gcn_forward, gcn_logits, gcn_train, predict,
    surrogate_forward, surrogate_train, train_model, Activation, GcnParams, TrainConfig,
};
use gcnpoison::graph::{normalized_adjacency, Graph};
use gcnpoison::linalg::Matrix;
use gcnpoison::rng::rng;
use gcnpoison::selection::{random_split, Split};
use rand::Rng;

#[test]
fn backward_matches_finite_differences() {
    for seed in 0..6 {
        let (g, x, labels) = model_fixture(seed, 10, 5);
        let mut p = GcnParams::glorot(5, 4, 3, true, &mut rng(100 + seed));
        for b in p.b1.iter_mut().chain(p.b2.iter_mut()).flatten() {
            *b = 0.1;
        }
        let err = max_rel_error(&p, &g, &x, &labels, seed % 2 == 0);
        assert!(err < 1e-6, "seed {seed}: max relative error {err:e}");
    }
}

#[test]
fn zero_weight_w2_gradient_is_softmax_minus_onehot() {
    let (g, x, _) = model_fixture(3, 8, 4);
    let labels: Vec<usize> = (0..8).map(|i| i % 2).collect();
    let p = GcnParams::zeros(4, 3, 2, true);
    let a = normalized_adjacency(&g, false);
    let mask: Vec<usize> = (0..8).collect();
    let grads = gcn_backward(&p, &a, &x, &labels, &mask).unwrap();
    // With W = 0 the hidden layer is zero, so dW2 = 0 and db2 is the mean of
    // (uniform − onehot), which vanishes for balanced labels.
    assert!(grads.w2.as_slice().iter().all(|&v| v == 0.0));
    for &v in grads.b2.as_ref().unwrap() {
        assert!(v.abs() < 1e-15);
    }
    assert!(max_rel_error(&p, &g, &x, &labels, false) < 1e-5);
}

#[test]
fn surrogate_equals_linearized_gcn() {
    for seed in 0..5 {
        let (g, x, _) = model_fixture(seed, 12, 6);
        let a = normalized_adjacency(&g, seed % 2 == 1);
        let p = GcnParams::glorot(6, 5, 3, false, &mut rng(seed));
        let mut linear = gcn_logits(&p, &a, &x, Activation::Identity).unwrap();
        linear.softmax_rows();
        let s = surrogate_forward(&p.collapse(), &a, &x).unwrap();
        assert!(linear.max_abs_diff(&s) < 1e-9);
        // dense Â² X W
        let ad = a.matrix().to_dense();
        let mut dense = ad
            .matmul(&ad)
            .unwrap()
            .matmul(&x.to_dense())
            .unwrap()
            .matmul(&p.collapse().w)
            .unwrap();
        dense.softmax_rows();
        assert!(dense.max_abs_diff(&s) < 1e-9);
    }
}

#[test]
fn probabilities_are_valid_rows() {
    for seed in 0..5 {
        let (g, x, _) = model_fixture(seed, 15, 7);
        let a = normalized_adjacency(&g, false);
        let mut p = GcnParams::glorot(7, 8, 4, true, &mut rng(seed));
        p.w1.scale(30.0);
        let y = gcn_forward(&p, &a, &x).unwrap();
        for i in 0..y.rows() {
            assert!((y.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(y.row(i).iter().all(|&v| v >= 0.0));
        }
    }
}

fn separable_toy(seed: u64) -> Dataset {
    let mut r = rng(seed);
    let n = 40;
    let label = |i: usize| i / 20;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if label(u) == label(v) { 0.5 } else { 0.01 };
            if r.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let x = FeatureMatrix::from_entries(n, 2, (0..n).map(|i| (i, label(i)))).unwrap();
    Dataset::new(
        "toy",
        Graph::from_edges(n, edges).unwrap(),
        x,
        (0..n).map(label).collect(),
        2,
    )
    .unwrap()
}

fn toy_split(ds: &Dataset) -> Split {
    random_split(ds, 0.2, 0.2, 5, true).unwrap()
}

#[test]
fn trains_separable_toy_to_perfect_accuracy() {
    let ds = separable_toy(1);
    let split = toy_split(&ds);
    let cfg = TrainConfig::default();
    let a = normalized_adjacency(&ds.graph, false);
    let p = gcn_train(&ds, &split, &cfg).unwrap();
    let pred = predict(&gcn_forward(&p, &a, &ds.features).unwrap());
    assert_eq!(accuracy(&pred, &ds.labels, &split.test), 1.0);

    let s = surrogate_train(&ds, &split, &cfg).unwrap();
    let pred = predict(&surrogate_forward(&s, &a, &ds.features).unwrap());
    assert_eq!(accuracy(&pred, &ds.labels, &split.test), 1.0);
}

#[test]
fn training_descends_and_is_deterministic() {
    let ds = separable_toy(2);
    let split = toy_split(&ds);
    let a = normalized_adjacency(&ds.graph, false);
    for act in [Activation::Relu, Activation::Identity] {
        let cfg = TrainConfig {
            seed: 9,
            ..TrainConfig::default()
        };
        let (p1, r1) = train_model(&a, &ds.features, &ds.labels, 2, &split, &cfg, act).unwrap();
        let (p2, r2) = train_model(&a, &ds.features, &ds.labels, 2, &split, &cfg, act).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(r1, r2);
        assert!(r1.final_train_loss <= r1.initial_train_loss);
        assert!(r1.train_loss_history.last().unwrap() <= &r1.train_loss_history[0]);
        let (p3, _) = train_model(
            &a,
            &ds.features,
            &ds.labels,
            2,
            &split,
            &cfg.with_seed(10),
            act,
        )
        .unwrap();
        assert_ne!(p1, p3);
    }
}

#[test]
fn empty_training_set_is_rejected() {
    let ds = separable_toy(3);
    let mut split = toy_split(&ds);
    split.train.clear();
    assert!(gcn_train(&ds, &split, &TrainConfig::default()).is_err());
    assert!(surrogate_train(&ds, &split, &TrainConfig::default()).is_err());
}

#[test]
fn default_sbm_training_time_and_quality() {
    let ds = generate_sbm(&SbmConfig {
        seed: 1,
        ..SbmConfig::default()
    })
    .unwrap();
    let split = random_split(&ds, 0.1, 0.1, 1, true).unwrap();
    let a = normalized_adjacency(&ds.graph, false);
    let start = std::time::Instant::now();
    let (p, report) = train_model(
        &a,
        &ds.features,
        &ds.labels,
        5,
        &split,
        &TrainConfig::default(),
        Activation::Relu,
    )
    .unwrap();
    let elapsed = start.elapsed();
    let pred = predict(&gcn_forward(&p, &a, &ds.features).unwrap());
    let acc = accuracy(&pred, &ds.labels, &split.test);
    eprintln!(
        "sbm train: {elapsed:?}, {} epochs, test acc {acc:.3}",
        report.epochs_run
    );
    assert!(acc > 0.6);
    let _ = Matrix::zeros(1, 1);
}
