mod common;

use common::assert_close;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use realfnd::classifiers::{train_classifier, ClassifierConfig, ClassifierRole, MlpClassifier};
use realfnd::numerics::{softmax_cross_entropy, Graph, ParamStore, Tensor};
use realfnd::Error;

/// Two Gaussian blobs at ±0.5 along every axis.
fn blobs(n: usize, dim: usize, seed: u64) -> Vec<(Vec<f64>, usize)> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let class = i % 2;
            let centre = if class == 1 { 0.5 } else { -0.5 };
            ((0..dim).map(|_| centre + r.gen_range(-0.3..0.3)).collect(), class)
        })
        .collect()
}

fn refs(data: &[(Vec<f64>, usize)]) -> Vec<(&[f64], usize)> {
    data.iter().map(|(x, y)| (x.as_slice(), *y)).collect()
}

#[test]
fn separable_set_is_learned() {
    let data = blobs(200, 16, 1);
    let cfg = ClassifierConfig {
        epochs: 200,
        ..ClassifierConfig::default()
    };
    let (clf, report) = train_classifier(&refs(&data), ClassifierRole::FakeNews, &cfg, 3).unwrap();
    assert!(clf.is_frozen());
    let test = blobs(200, 16, 2);
    let acc = test.iter().filter(|(x, y)| clf.predict(x).unwrap() == *y).count() as f64 / test.len() as f64;
    assert!(acc >= 0.99, "accuracy {acc}");
    assert!(report.train_loss.first().unwrap() > report.train_loss.last().unwrap());
    assert!(report.best_epoch <= report.epochs_run);
}

#[test]
fn untrained_classifier_is_near_chance() {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let data: Vec<(Vec<f64>, usize)> =
        (0..400).map(|i| ((0..64).map(|_| r.gen_range(-0.5..0.5)).collect(), i % 2)).collect();
    let cfg = ClassifierConfig {
        epochs: 0,
        ..ClassifierConfig::default()
    };
    let (clf, report) = train_classifier(&refs(&data), ClassifierRole::Domain, &cfg, 5).unwrap();
    assert_eq!(report.epochs_run, 0);
    let fresh = MlpClassifier::new(ClassifierRole::Domain, 64, &cfg, 5).unwrap();
    assert_eq!(clf.store.flat_values(), fresh.store.flat_values());
    let rows: Vec<Vec<f64>> = data.iter().map(|(x, _)| clf.logits(x).unwrap().to_vec()).collect();
    let labels: Vec<usize> = data.iter().map(|(_, y)| *y).collect();
    let (ce, _) = softmax_cross_entropy(&Tensor::from_rows(&rows).unwrap(), &labels).unwrap();
    assert_close(ce, std::f64::consts::LN_2, 0.05);
}

#[test]
fn logits_compose_layers() {
    let cfg = ClassifierConfig {
        hidden: 5,
        ..ClassifierConfig::default()
    };
    let clf = MlpClassifier::new(ClassifierRole::FakeNews, 3, &cfg, 9).unwrap();
    let x = [0.2, -0.7, 1.1];
    let (w1, b1) = (clf.store.value(clf.hidden.weight), clf.store.value(clf.hidden.bias));
    let (w2, b2) = (clf.store.value(clf.output.weight), clf.store.value(clf.output.bias));
    let h: Vec<f64> = (0..5).map(|j| (b1.data()[j] + (0..3).map(|i| x[i] * w1.get(i, j)).sum::<f64>()).max(0.0)).collect();
    let logits = clf.logits(&x).unwrap();
    for (k, z) in logits.iter().enumerate() {
        assert_close(*z, b2.data()[k] + (0..5).map(|j| h[j] * w2.get(j, k)).sum::<f64>(), 1e-14);
    }
    let mut g = Graph::new();
    let xv = g.constant(Tensor::row(x.to_vec()));
    let out = clf.forward(&mut g, xv, None).unwrap();
    assert_eq!(g.value(out).data(), logits.as_slice());
    let p = clf.predict_proba(&x).unwrap();
    assert_close(p[0] + p[1], 1.0, 1e-15);
}

#[test]
fn frozen_classifier_gets_no_gradients() {
    let cfg = ClassifierConfig::default();
    let mut clf = MlpClassifier::new(ClassifierRole::FakeNews, 4, &cfg, 1).unwrap();
    clf.freeze();
    let mut inputs = ParamStore::new();
    let xid = inputs.add("x", Tensor::row(vec![0.1, 0.2, 0.3, 0.4]));
    let mut g = Graph::new();
    let x = g.param(&inputs, xid);
    let logits = clf.forward(&mut g, x, None).unwrap();
    let loss = g.softmax_cross_entropy(logits, &[1]).unwrap();
    let grads = g.backward(loss).unwrap();
    for id in clf.store.ids() {
        assert!(grads.get(&clf.store, id).is_none());
    }
    assert!(grads.get(&inputs, xid).is_some());
}

#[test]
fn bad_inputs_rejected() {
    let cfg = ClassifierConfig::default();
    let one_class = vec![(vec![0.0, 1.0], 1usize); 4];
    assert!(matches!(
        train_classifier(&refs(&one_class), ClassifierRole::FakeNews, &cfg, 1),
        Err(Error::DegenerateData(_))
    ));
    let ragged = vec![(vec![0.0, 1.0], 0usize), (vec![1.0], 1)];
    assert!(matches!(train_classifier(&refs(&ragged), ClassifierRole::FakeNews, &cfg, 1), Err(Error::Dimension { .. })));
    let clf = MlpClassifier::new(ClassifierRole::FakeNews, 2, &cfg, 1).unwrap();
    assert!(clf.predict(&[1.0, 2.0, 3.0]).is_err());
}
