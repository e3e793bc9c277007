mod common;

use common::{small_corpus, small_pipeline, FD_EPS, FD_TOL};
use realfnd::baselines::{adversarial_objective, build_variant, train_adversarial, AdversarialConfig, AdversarialInput, VariantSpec, VARIANTS};
use realfnd::classifiers::{train_classifier, ClassifierRole, MlpClassifier};
use realfnd::corpus::{Domain, NewsArticle};
use realfnd::encoders::{pretrain_encoders, EncoderStack};
use realfnd::numerics::Graph;
use realfnd::rl_agent::{train_agent, ClassifierReward, EpisodeLabels, StartState};
use realfnd::Error;

fn all(corpus: &realfnd::corpus::Corpus) -> Vec<&NewsArticle> {
    corpus.articles.iter().collect()
}

fn store_values(stack: &EncoderStack) -> Vec<Vec<f64>> {
    stack.stores().iter().map(|s| s.flat_values()).collect()
}

#[test]
fn adversarial_objective_gradient_matches_finite_differences() {
    let corpus = small_corpus();
    let cfg = small_pipeline();
    let mut stack = EncoderStack::new(&cfg.encoder, corpus.vocabulary.len(), corpus.user_count(), 3).unwrap();
    let articles: Vec<&NewsArticle> = corpus.articles.iter().step_by(9).collect();
    let inputs = AdversarialInput::prepare(&stack, &articles).unwrap();
    let f = MlpClassifier::new(ClassifierRole::FakeNews, 7, &cfg.classifier, 1).unwrap();
    let d = MlpClassifier::new(ClassifierRole::Domain, 7, &cfg.classifier, 2).unwrap();
    let batch: Vec<usize> = (0..inputs.len()).collect();
    let objective = |s: &EncoderStack| {
        let mut g = Graph::new();
        let loss = adversarial_objective(&mut g, s, &f, &d, &inputs, &batch, None).unwrap();
        (g.value(loss).data()[0], g.backward(loss).unwrap())
    };
    let (_, grads) = objective(&stack);
    let mut worst: f64 = 0.0;
    for which in [2usize, 3] {
        let ids: Vec<_> = stack.stores()[which].ids().collect();
        let analytic: Vec<Vec<f64>> = ids
            .iter()
            .map(|&id| grads.get(stack.stores()[which], id).unwrap().data().to_vec())
            .collect();
        for (n, &id) in ids.iter().enumerate() {
            for k in 0..stack.stores()[which].value(id).len() {
                let orig = stack.stores()[which].value(id).data()[k];
                stack.stores_mut()[which].value_mut(id).data_mut()[k] = orig + FD_EPS;
                let up = objective(&stack).0;
                stack.stores_mut()[which].value_mut(id).data_mut()[k] = orig - FD_EPS;
                let down = objective(&stack).0;
                stack.stores_mut()[which].value_mut(id).data_mut()[k] = orig;
                let numeric = (up - down) / (2.0 * FD_EPS);
                worst = worst.max((analytic[n][k] - numeric).abs() / numeric.abs().max(1.0));
            }
        }
    }
    assert!(worst < FD_TOL, "{worst}");
    // The text branches enter as constants.
    for which in [0usize, 1] {
        for id in stack.stores()[which].ids() {
            assert!(grads.get(stack.stores()[which], id).is_none());
        }
    }
}

#[test]
fn zero_adversarial_epochs_leave_initialisation() {
    let corpus = small_corpus();
    let cfg = small_pipeline();
    let stack = EncoderStack::new(&cfg.encoder, corpus.vocabulary.len(), corpus.user_count(), 4).unwrap();
    let before = store_values(&stack);
    let (after, f, d, curve) =
        train_adversarial(&all(&corpus), stack, &cfg.classifier, &AdversarialConfig { epochs: Some(0) }, 4).unwrap();
    assert!(curve.is_empty());
    assert_eq!(store_values(&after), before);
    assert!(after.is_frozen() && f.is_frozen() && d.is_frozen());
    let fresh = MlpClassifier::new(ClassifierRole::FakeNews, 7, &cfg.classifier, 4).unwrap();
    assert_eq!(f.store.flat_values(), fresh.store.flat_values());
}

#[test]
fn adversarial_training_fixes_text_branches() {
    let corpus = small_corpus();
    let cfg = small_pipeline();
    let stack = EncoderStack::new(&cfg.encoder, corpus.vocabulary.len(), corpus.user_count(), 5).unwrap();
    let before = store_values(&stack);
    let (after, _, _, curve) =
        train_adversarial(&all(&corpus), stack, &cfg.classifier, &AdversarialConfig { epochs: Some(3) }, 5).unwrap();
    assert_eq!(curve.len(), 3);
    let after = store_values(&after);
    assert_eq!(after[..2], before[..2]);
    assert_ne!(after[2], before[2]);
    assert_ne!(after[3], before[3]);
}

#[test]
fn adversarial_needs_two_domains() {
    let corpus = small_corpus();
    let source: Vec<&NewsArticle> = corpus.articles.iter().filter(|a| a.domain == Domain::Source).collect();
    let cfg = small_pipeline();
    let err = build_variant(
        VariantSpec::named("adv-real-fnd").unwrap(),
        &source,
        corpus.vocabulary.len(),
        corpus.user_count(),
        &cfg,
        1,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "adversarial training", .. }));
    assert!(matches!(err.root(), Error::Config(_)));
}

#[test]
fn full_variant_composes_the_stages() {
    let corpus = small_corpus();
    let cfg = small_pipeline();
    let train = all(&corpus);
    let (vocab, users, seed) = (corpus.vocabulary.len(), corpus.user_count(), 6);
    let (bundle, log) = build_variant(VariantSpec::full(), &train, vocab, users, &cfg, seed).unwrap();

    let stack = EncoderStack::new(&cfg.encoder, vocab, users, seed).unwrap();
    let (mut stack, _) = pretrain_encoders(&train, stack, seed).unwrap();
    stack.freeze();
    let reps = stack.encode_all(train.iter().copied()).unwrap();
    let by = |key: fn(&NewsArticle) -> usize| -> Vec<(&[f64], usize)> {
        reps.iter().zip(&train).map(|(r, a)| (&r.e_prime[..], key(a))).collect()
    };
    let (f, _) = train_classifier(&by(|a| a.label.index()), ClassifierRole::FakeNews, &cfg.classifier, seed).unwrap();
    let (d, _) = train_classifier(&by(|a| a.domain.index()), ClassifierRole::Domain, &cfg.classifier, seed).unwrap();
    let pool: Vec<StartState> = reps
        .iter()
        .zip(&train)
        .map(|(r, a)| StartState {
            e_prime: &r.e_prime,
            labels: EpisodeLabels { label: a.label.index(), domain: a.domain.index() },
        })
        .collect();
    let (agent, episodes) = train_agent(&pool, &ClassifierReward::new(&f, &d, &cfg.rl), &cfg.rl, seed).unwrap();

    assert_eq!(store_values(&bundle.encoders), store_values(&stack));
    assert_eq!(bundle.fake_news.store.flat_values(), f.store.flat_values());
    assert_eq!(bundle.domain.unwrap().store.flat_values(), d.store.flat_values());
    assert_eq!(bundle.agent.unwrap().store.flat_values(), agent.store.flat_values());
    assert_eq!(log.episodes, episodes);
}

#[test]
fn disabled_branches_stay_at_initialisation() {
    let corpus = small_corpus();
    let cfg = small_pipeline();
    let (vocab, users) = (corpus.vocabulary.len(), corpus.user_count());
    let spec = VariantSpec::named("content-only").unwrap();
    let (bundle, log) = build_variant(spec, &all(&corpus), vocab, users, &cfg, 7).unwrap();
    assert!(bundle.agent.is_none() && bundle.domain.is_none());
    assert!(log.episodes.is_empty());
    let init = EncoderStack::new(&spec.apply(&cfg).encoder, vocab, users, 7).unwrap();
    let (trained, initial) = (store_values(&bundle.encoders), store_values(&init));
    assert_ne!(trained[0], initial[0]);
    assert_eq!(trained[1..3], initial[1..3]);
}

#[test]
fn single_domain_rl_has_no_domain_classifier() {
    let corpus = small_corpus();
    let source: Vec<&NewsArticle> = corpus.articles.iter().filter(|a| a.domain == Domain::Source).collect();
    let (bundle, log) =
        build_variant(VariantSpec::full(), &source, corpus.vocabulary.len(), corpus.user_count(), &small_pipeline(), 8).unwrap();
    assert!(bundle.domain.is_none() && log.domain.is_none());
    assert!(bundle.agent.is_some());
}

#[test]
fn variant_names_round_trip() {
    for (name, spec) in VARIANTS {
        assert_eq!(spec.name(), name);
        assert_eq!(name.parse::<VariantSpec>().unwrap(), spec);
    }
    assert!(matches!("real-fnd-b".parse::<VariantSpec>(), Err(Error::Config(_))));
}
