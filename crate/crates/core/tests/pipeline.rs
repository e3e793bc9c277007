mod common;

use common::{small_corpus, small_pipeline};
use realfnd::baselines::{build_variant, VariantSpec};
use realfnd::corpus::{Corpus, Interactions};
use realfnd::encoders::{pretrain_encoders, EncoderStack};
use realfnd::pipeline::{load_encoders, save_encoders, ModelBundle, FORMAT_VERSION};
use realfnd::Error;

fn bundle(corpus: &Corpus, variant: &str) -> ModelBundle {
    let train: Vec<_> = corpus.articles.iter().collect();
    let spec = VariantSpec::named(variant).unwrap();
    build_variant(spec, &train, corpus.vocabulary.len(), corpus.user_count(), &small_pipeline(), 2).unwrap().0
}

#[test]
fn bundles_round_trip_byte_for_byte() {
    let corpus = small_corpus();
    for variant in ["real-fnd", "adv-real-fnd", "content-only"] {
        let b = bundle(&corpus, variant);
        let bytes = b.to_bytes().unwrap();
        let back = ModelBundle::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes, "{variant}");
        assert_eq!(back.variant, b.variant);
        for a in corpus.articles.iter().take(10) {
            assert_eq!(back.predict_proba(a).unwrap(), b.predict_proba(a).unwrap());
        }
    }
}

#[test]
fn save_and_load_through_disk() {
    let corpus = small_corpus();
    let b = bundle(&corpus, "real-fnd");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.rfnd");
    b.save(&path).unwrap();
    let back = ModelBundle::load(&path).unwrap();
    assert_eq!(back.to_bytes().unwrap(), b.to_bytes().unwrap());
    assert!(back.encoders.is_frozen() && back.fake_news.is_frozen());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1, "no temporary file left behind");
}

#[test]
fn corrupted_files_are_rejected() {
    let corpus = small_corpus();
    let bytes = bundle(&corpus, "no-rl").to_bytes().unwrap();

    let mut version = bytes.clone();
    version[4..8].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
    assert!(matches!(ModelBundle::from_bytes(&version), Err(Error::Format(m)) if m.contains("version")));

    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(ModelBundle::from_bytes(&magic), Err(Error::Format(_))));

    assert!(matches!(ModelBundle::from_bytes(&bytes[..bytes.len() - 8]), Err(Error::Format(_))));
    assert!(matches!(ModelBundle::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
    assert!(ModelBundle::from_bytes(&bytes[..20]).is_err());
}

#[test]
fn encoder_files_are_separate_from_bundles() {
    let corpus = small_corpus();
    let cfg = small_pipeline();
    let train: Vec<_> = corpus.articles.iter().collect();
    let stack = EncoderStack::new(&cfg.encoder, corpus.vocabulary.len(), corpus.user_count(), 3).unwrap();
    let (stack, _) = pretrain_encoders(&train, stack, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("encoders.rfnd");
    save_encoders(&stack, 3, &path).unwrap();
    let (back, seed) = load_encoders(&path).unwrap();
    assert_eq!(seed, 3);
    let values = |s: &EncoderStack| s.stores().iter().map(|st| st.flat_values()).collect::<Vec<_>>();
    assert_eq!(values(&back), values(&stack));
    assert!(matches!(ModelBundle::load(&path), Err(Error::Format(_))));

    let bundle_path = dir.path().join("model.rfnd");
    bundle(&corpus, "no-rl").save(&bundle_path).unwrap();
    assert!(matches!(load_encoders(&bundle_path), Err(Error::Format(_))));
}

#[test]
fn mismatched_corpus_is_a_dimension_error() {
    let corpus = small_corpus();
    let b = bundle(&corpus, "real-fnd");
    b.check_compatible(corpus.vocabulary.len(), corpus.user_count()).unwrap();
    assert!(matches!(
        b.check_compatible(corpus.vocabulary.len(), corpus.user_count() + 1),
        Err(Error::Dimension { .. })
    ));
    let mut wide = corpus.articles[0].clone();
    wide.interactions = Interactions::empty(corpus.user_count() + 5);
    assert!(matches!(b.predict_proba(&wide), Err(Error::Dimension { .. })));
}
