mod common;

use common::assert_close;
use proptest::prelude::*;
use realfnd::corpus::{generate_synthetic, Corpus, Interactions, NewsArticle, SyntheticConfig};
use realfnd::encoders::{pretrain_encoders, BranchOutputs, EncoderConfig, EncoderStack};
use realfnd::numerics::{Graph, ParamStore, Tensor};

fn tiny_config() -> EncoderConfig {
    EncoderConfig {
        embedding_dim: 8,
        content_dim: 8,
        comment_dim: 6,
        interaction_dim: 5,
        representation_dim: 7,
        attention_dim: 6,
        interaction_hidden: 9,
        comment_gru: false,
        ..EncoderConfig::default()
    }
}

fn corpus() -> Corpus {
    generate_synthetic(&SyntheticConfig {
        articles_per_domain: 40,
        vocab_size: 120,
        users: 30,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

fn stack(cfg: &EncoderConfig, corpus: &Corpus, seed: u64) -> EncoderStack {
    EncoderStack::new(cfg, corpus.vocabulary.len(), corpus.user_count(), seed).unwrap()
}

fn named<'s>(store: &'s ParamStore, name: &str) -> &'s Tensor {
    &store.iter().find(|(n, _)| *n == name).unwrap_or_else(|| panic!("no parameter {name}")).1.value
}

fn comment_weights(stack: &EncoderStack, comments: &[Vec<u32>]) -> Vec<f64> {
    let mut g = Graph::new();
    let out = stack.comments_var(&mut g, comments).unwrap();
    g.value(out.comment_weights.unwrap()).data().to_vec()
}

#[test]
fn no_comments_give_zero_vector() {
    let c = corpus();
    let s = stack(&tiny_config(), &c, 1);
    assert_eq!(s.encode_comments(&[]).unwrap(), vec![0.0; 6]);
    assert_eq!(s.encode_comments(&[vec![]]).unwrap(), vec![0.0; 6]);
    let mut g = Graph::new();
    assert!(s.comments_var(&mut g, &[]).unwrap().comment_weights.is_none());
}

#[test]
fn comment_attention_weights() {
    let c = corpus();
    let s = stack(&tiny_config(), &c, 2);
    assert_eq!(comment_weights(&s, &[vec![3, 4, 5]]), vec![1.0]);
    let w = comment_weights(&s, &[vec![7, 8], vec![7, 8]]);
    assert_close(w[0], 0.5, 1e-15);
    assert_close(w[1], 0.5, 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn comment_vector_ignores_comment_order(
        comments in prop::collection::vec(prop::collection::vec(0u32..100, 1..6), 1..5),
        seed in 0u64..50,
    ) {
        let c = corpus();
        let s = stack(&tiny_config(), &c, seed);
        let mut reversed = comments.clone();
        reversed.reverse();
        let a = s.encode_comments(&comments).unwrap();
        let b = s.encode_comments(&reversed).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn interaction_encoder_sums_active_rows(active in prop::collection::btree_set(0u32..30, 0..12)) {
        let c = corpus();
        let s = stack(&tiny_config(), &c, 4);
        let u = Interactions::new(30, active.iter().copied().collect()).unwrap();
        let store = &s.interactions.store;
        let (w1, b1) = (named(store, "interactions.hidden.weight"), named(store, "interactions.hidden.bias"));
        let (w2, b2) = (named(store, "interactions.output.weight"), named(store, "interactions.output.bias"));
        let dense = u.to_dense();
        let hidden: Vec<f64> = (0..w1.cols())
            .map(|j| (b1.data()[j] + (0..30).map(|i| dense[i] * w1.get(i, j)).sum::<f64>()).max(0.0))
            .collect();
        let expected: Vec<f64> = (0..w2.cols())
            .map(|j| (b2.data()[j] + hidden.iter().enumerate().map(|(i, h)| h * w2.get(i, j)).sum::<f64>()).tanh())
            .collect();
        let got = s.encode_interactions(&u).unwrap();
        for (x, y) in got.iter().zip(&expected) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn interaction_width_mismatch_rejected() {
    let c = corpus();
    let s = stack(&tiny_config(), &c, 4);
    assert!(s.encode_interactions(&Interactions::empty(29)).is_err());
}

#[test]
fn fusion_is_tanh_affine_over_concatenation() {
    let c = corpus();
    let s = stack(&tiny_config(), &c, 5);
    let a = &c.articles[3];
    let rep = s.encode(a).unwrap();
    let BranchOutputs { content, comments, interactions } = &rep.branch;
    let e: Vec<f64> = comments.iter().chain(content).chain(interactions).copied().collect();
    assert_eq!(e, rep.branch.concatenated());
    let w = s.fusion.store.value(s.fusion.layer.weight);
    let b = s.fusion.store.value(s.fusion.layer.bias);
    for j in 0..7 {
        let pre = b.data()[j] + e.iter().enumerate().map(|(i, x)| x * w.get(i, j)).sum::<f64>();
        assert_close(rep.e_prime[j], pre.tanh(), 1e-12);
    }
}

#[test]
fn disabled_branches_contribute_zeros() {
    let c = corpus();
    let cfg = EncoderConfig {
        use_comments: false,
        use_interactions: false,
        ..tiny_config()
    };
    let s = stack(&cfg, &c, 6);
    let article = c.articles.iter().find(|a| !a.comments.is_empty()).unwrap();
    let rep = s.encode(article).unwrap();
    assert_eq!(rep.branch.comments, vec![0.0; 6]);
    assert_eq!(rep.branch.interactions, vec![0.0; 5]);
}

fn all_values(s: &EncoderStack) -> Vec<Vec<f64>> {
    s.stores().iter().map(|st| st.flat_values()).collect()
}

fn train_refs(c: &Corpus) -> Vec<&NewsArticle> {
    c.articles.iter().collect()
}

#[test]
fn zero_epoch_pretraining_is_identity() {
    let c = corpus();
    let cfg = EncoderConfig {
        content_epochs: 0,
        comment_epochs: 0,
        fusion_epochs: 0,
        ..tiny_config()
    };
    let init = stack(&cfg, &c, 7);
    let (trained, report) = pretrain_encoders(&train_refs(&c), init.clone(), 7).unwrap();
    assert_eq!(all_values(&trained), all_values(&init));
    assert!(report.content_loss.is_empty() && report.fusion_loss.is_empty());
}

#[test]
fn pretraining_reduces_loss_and_is_deterministic() {
    let c = corpus();
    let cfg = EncoderConfig {
        content_epochs: 6,
        comment_epochs: 4,
        fusion_epochs: 4,
        ..tiny_config()
    };
    let run = || pretrain_encoders(&train_refs(&c), stack(&cfg, &c, 8), 8).unwrap();
    let (a, report) = run();
    let (b, _) = run();
    assert_eq!(all_values(&a), all_values(&b));
    for losses in [&report.content_loss, &report.comment_loss, &report.fusion_loss] {
        assert!(losses.last().unwrap() < losses.first().unwrap(), "{losses:?}");
    }
    assert!(!a.is_frozen());
}

#[test]
fn pretraining_rejects_empty_split() {
    let c = corpus();
    assert!(pretrain_encoders(&[], stack(&tiny_config(), &c, 1), 1).is_err());
}
