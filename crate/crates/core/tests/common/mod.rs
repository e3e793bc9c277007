#![allow(dead_code)]

use realfnd::numerics::{Gradients, ParamStore};

pub const FD_EPS: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

/// Largest `|analytic − numeric| / max(1, |numeric|)` over every scalar of
/// every parameter in `store`, using central differences on `run`'s loss.
pub fn max_grad_error<F>(store: &mut ParamStore, run: F) -> f64
where
    F: Fn(&ParamStore) -> (f64, Gradients),
{
    let (_, grads) = run(store);
    let analytic: Vec<Vec<f64>> = store
        .ids()
        .map(|id| match grads.get(store, id) {
            Some(g) => g.data().to_vec(),
            None => vec![0.0; store.value(id).len()],
        })
        .collect();
    let mut worst: f64 = 0.0;
    for id in store.ids().collect::<Vec<_>>() {
        for k in 0..store.value(id).len() {
            let orig = store.value(id).data()[k];
            store.value_mut(id).data_mut()[k] = orig + FD_EPS;
            let (up, _) = run(store);
            store.value_mut(id).data_mut()[k] = orig - FD_EPS;
            let (down, _) = run(store);
            store.value_mut(id).data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * FD_EPS);
            let err = (analytic[id.index()][k] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}

pub fn assert_close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

pub fn small_corpus() -> realfnd::corpus::Corpus {
    realfnd::corpus::generate_synthetic(&realfnd::corpus::SyntheticConfig {
        articles_per_domain: 40,
        vocab_size: 120,
        users: 30,
        ..Default::default()
    })
    .unwrap()
}

/// A pipeline small enough to train in well under a second.
pub fn small_pipeline() -> realfnd::pipeline::PipelineConfig {
    use realfnd::pipeline::PipelineConfig;
    let mut cfg = PipelineConfig::default();
    cfg.encoder.embedding_dim = 8;
    cfg.encoder.content_dim = 8;
    cfg.encoder.comment_dim = 6;
    cfg.encoder.interaction_dim = 5;
    cfg.encoder.representation_dim = 7;
    cfg.encoder.attention_dim = 6;
    cfg.encoder.interaction_hidden = 9;
    cfg.encoder.content_epochs = 1;
    cfg.encoder.comment_epochs = 1;
    cfg.encoder.fusion_epochs = 1;
    cfg.classifier.hidden = 16;
    cfg.classifier.learning_rate = 1e-3;
    cfg.classifier.epochs = 10;
    cfg.rl.episodes = 20;
    cfg.rl.hidden = vec![12];
    cfg
}
