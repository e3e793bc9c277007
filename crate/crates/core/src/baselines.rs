//! Comparison variants: ablations without auxiliary inputs, the BiGRU
//! encoder swap, and adversarial domain adaptation in place of the agent.

use std::fmt;
use std::str::FromStr;

use log::info;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{train_classifier, ClassifierConfig, ClassifierRole, MlpClassifier};
use crate::corpus::{Interactions, NewsArticle};
use crate::encoders::{pretrain_encoders, EncoderKind, EncoderStack};
use crate::error::{Error, Result};
use crate::numerics::{adam_step, AdamConfig, Graph, Tensor, Var};
use crate::pipeline::{ModelBundle, PipelineConfig, TrainingLog};
use crate::rl_agent::{train_agent, ClassifierReward, EpisodeLabels, StartState};
use crate::seed::{rng_for, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adaptation {
    Rl,
    Adversarial,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub use_comments: bool,
    pub use_interactions: bool,
    pub adaptation: Adaptation,
    pub encoder: EncoderKind,
}

/// `(name, spec)` for every named variant.
pub const VARIANTS: [(&str, VariantSpec); 7] = [
    ("real-fnd", VariantSpec::new(true, Adaptation::Rl, EncoderKind::Standard)),
    ("real-fnd-a", VariantSpec::new(false, Adaptation::Rl, EncoderKind::Standard)),
    ("adv-real-fnd", VariantSpec::new(true, Adaptation::Adversarial, EncoderKind::Standard)),
    ("adv-real-fnd-a", VariantSpec::new(false, Adaptation::Adversarial, EncoderKind::Standard)),
    ("sre", VariantSpec::new(true, Adaptation::Rl, EncoderKind::SreBigru)),
    ("no-rl", VariantSpec::new(true, Adaptation::None, EncoderKind::Standard)),
    ("content-only", VariantSpec::new(false, Adaptation::None, EncoderKind::Standard)),
];

impl VariantSpec {
    const fn new(aux: bool, adaptation: Adaptation, encoder: EncoderKind) -> Self {
        VariantSpec {
            use_comments: aux,
            use_interactions: aux,
            adaptation,
            encoder,
        }
    }

    pub fn full() -> Self {
        VARIANTS[0].1
    }

    pub fn named(name: &str) -> Option<Self> {
        VARIANTS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
    }

    /// The registered name, or a flag summary for ad-hoc specs.
    pub fn name(&self) -> String {
        match VARIANTS.iter().find(|(_, s)| s == self) {
            Some((n, _)) => n.to_string(),
            None => format!(
                "custom(comments={}, interactions={}, {:?}, {:?})",
                self.use_comments, self.use_interactions, self.adaptation, self.encoder
            ),
        }
    }

    /// The encoder configuration with this variant's branch and kind flags.
    pub fn apply(&self, base: &PipelineConfig) -> PipelineConfig {
        let mut cfg = base.clone();
        cfg.encoder.use_comments = self.use_comments;
        cfg.encoder.use_interactions = self.use_interactions;
        cfg.encoder.kind = self.encoder;
        cfg
    }
}

impl Default for VariantSpec {
    fn default() -> Self {
        Self::full()
    }
}

impl fmt::Display for VariantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for VariantSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VariantSpec::named(s).ok_or_else(|| {
            let names: Vec<&str> = VARIANTS.iter().map(|(n, _)| *n).collect();
            Error::Config(format!("unknown variant {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdversarialConfig {
    /// Alternation epochs; defaults to the classifier epoch budget.
    pub epochs: Option<usize>,
}

/// Fixed text branches plus the inputs the adversarial game still trains on.
pub struct AdversarialInput<'a> {
    pub content: Tensor,
    pub comments: Tensor,
    pub interactions: &'a Interactions,
    pub label: usize,
    pub domain: usize,
}

impl<'a> AdversarialInput<'a> {
    /// Precomputes the (frozen) content and comment branches.
    pub fn prepare(stack: &EncoderStack, articles: &[&'a NewsArticle]) -> Result<Vec<Self>> {
        articles
            .iter()
            .map(|a| {
                Ok(AdversarialInput {
                    content: Tensor::row(stack.encode_content(&a.content)?),
                    comments: Tensor::row(stack.encode_comments(&a.comments)?),
                    interactions: &a.interactions,
                    label: a.label.index(),
                    domain: a.domain.index(),
                })
            })
            .collect()
    }
}

fn e_prime_batch<'a>(g: &mut Graph<'a>, stack: &'a EncoderStack, inputs: &'a [AdversarialInput<'_>], batch: &[usize]) -> Result<Var> {
    let rows = batch
        .iter()
        .map(|&i| {
            let content = g.constant_ref(&inputs[i].content);
            let comments = g.constant_ref(&inputs[i].comments);
            let u = stack.interactions_var(g, inputs[i].interactions)?;
            stack.fusion.forward(g, comments, content, u)
        })
        .collect::<Result<Vec<Var>>>()?;
    g.concat_rows(&rows)
}

/// Cross-entropy of `F` minus cross-entropy of `D` over `batch`, the quantity
/// the encoder and `F` minimise. `rng` enables dropout in `F`.
pub fn adversarial_objective<'a>(
    g: &mut Graph<'a>,
    stack: &'a EncoderStack,
    fake_news: &'a MlpClassifier,
    domain: &'a MlpClassifier,
    inputs: &'a [AdversarialInput<'_>],
    batch: &[usize],
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Var> {
    let x = e_prime_batch(g, stack, inputs, batch)?;
    let f_logits = fake_news.forward(g, x, rng)?;
    let d_logits = domain.forward(g, x, None)?;
    let labels: Vec<usize> = batch.iter().map(|&i| inputs[i].label).collect();
    let domains: Vec<usize> = batch.iter().map(|&i| inputs[i].domain).collect();
    let lf = g.softmax_cross_entropy(f_logits, &labels)?;
    let ld = g.softmax_cross_entropy(d_logits, &domains)?;
    g.sub(lf, ld)
}

/// Min-max training of the interaction encoder, fusion network and `F`
/// against `D`, alternating one `D` step with one encoder/`F` step per
/// mini-batch. Content and comment encoders stay fixed at their pretrained
/// values. `F` and `D` start from initialisation.
///
/// Returns the frozen stack, `F`, `D` and the mean objective per epoch.
pub fn train_adversarial(
    articles: &[&NewsArticle],
    stack: EncoderStack,
    classifier: &ClassifierConfig,
    config: &AdversarialConfig,
    seed: u64,
) -> Result<(EncoderStack, MlpClassifier, MlpClassifier, Vec<f64>)> {
    if articles.is_empty() {
        return Err(Error::EmptyInput("adversarial training set"));
    }
    if articles.iter().all(|a| a.domain == articles[0].domain) {
        return Err(Error::Config(
            "adversarial training needs articles from both domains".into(),
        ));
    }
    let mut stack = stack;
    let dim = stack.representation_dim();
    let mut fake_news = MlpClassifier::new(ClassifierRole::FakeNews, dim, classifier, seed)?;
    let mut domain = MlpClassifier::new(ClassifierRole::Domain, dim, classifier, seed)?;
    for s in &mut stack.stores_mut()[..2] {
        s.freeze();
    }
    let inputs = AdversarialInput::prepare(&stack, articles)?;
    let adam = AdamConfig::with_lr(classifier.learning_rate);
    let epochs = config.epochs.unwrap_or(classifier.epochs);
    let batch = if classifier.batch_size == 0 { inputs.len() } else { classifier.batch_size };
    let mut rng = rng_for(seed, stream::ADVERSARIAL);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut curve = Vec::with_capacity(epochs);

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch.max(1)) {
            // D step on the current representations.
            let grads = {
                let mut g = Graph::new();
                let x = e_prime_batch(&mut g, &stack, &inputs, chunk)?;
                let fixed = g.value(x).clone();
                let x = g.constant(fixed);
                let logits = domain.forward(&mut g, x, Some(&mut rng))?;
                let domains: Vec<usize> = chunk.iter().map(|&i| inputs[i].domain).collect();
                let loss = g.softmax_cross_entropy(logits, &domains)?;
                g.backward(loss)?
            };
            domain.store.accumulate(&grads);
            adam_step(&mut domain.store, &adam);

            // Encoder and F step against the updated D.
            domain.store.freeze();
            let (objective, grads) = {
                let mut g = Graph::new();
                let loss = adversarial_objective(&mut g, &stack, &fake_news, &domain, &inputs, chunk, Some(&mut rng))?;
                (g.value(loss).data()[0], g.backward(loss)?)
            };
            domain.store.unfreeze();
            for store in [&mut stack.interactions.store, &mut stack.fusion.store, &mut fake_news.store] {
                store.accumulate(&grads);
                adam_step(store, &adam);
            }
            total += objective * chunk.len() as f64;
        }
        curve.push(total / inputs.len() as f64);
    }
    stack.freeze();
    fake_news.store.zero_grad();
    fake_news.freeze();
    domain.store.zero_grad();
    domain.freeze();
    Ok((stack, fake_news, domain, curve))
}

/// Trains one variant end to end on `train`: encoder pretraining, then `F`
/// and `D` on frozen representations and the agent (`rl`), or the
/// adversarial game (`adversarial`), or `F` alone (`none`). Disabled
/// auxiliary branches feed zeros, so E′ keeps its width across variants.
///
/// A training split with one domain has no `D`: the agent is then rewarded
/// by `F` alone (`β = 0`) and `adversarial` is rejected.
pub fn build_variant(
    spec: VariantSpec,
    train: &[&NewsArticle],
    vocab_size: usize,
    users: usize,
    base: &PipelineConfig,
    seed: u64,
) -> Result<(ModelBundle, TrainingLog)> {
    let config = spec.apply(base);
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training split"));
    }
    let two_domains = train.iter().any(|a| a.domain != train[0].domain);
    let mut log = TrainingLog::default();

    let stack = EncoderStack::new(&config.encoder, vocab_size, users, seed)?;
    let (mut stack, report) = pretrain_encoders(train, stack, seed).map_err(|e| e.in_stage("encoder pretraining"))?;
    log.pretrain = report;

    if spec.adaptation == Adaptation::Adversarial {
        let (stack, fake_news, domain, curve) =
            train_adversarial(train, stack, &config.classifier, &config.adversarial, seed)
                .map_err(|e| e.in_stage("adversarial training"))?;
        log.adversarial = curve;
        let bundle = ModelBundle {
            variant: spec,
            config,
            seed,
            encoders: stack,
            fake_news,
            domain: Some(domain),
            agent: None,
        };
        return Ok((bundle, log));
    }

    stack.freeze();
    let reps = stack.encode_all(train.iter().copied())?;
    let samples: Vec<(&[f64], usize)> = reps.iter().zip(train).map(|(r, a)| (&r.e_prime[..], a.label.index())).collect();
    let (fake_news, f_report) = train_classifier(&samples, ClassifierRole::FakeNews, &config.classifier, seed)
        .map_err(|e| e.in_stage("fake news classifier training"))?;
    log.fake_news = Some(f_report);

    let (domain, agent) = if spec.adaptation == Adaptation::Rl {
        let domain = if two_domains {
            let samples: Vec<(&[f64], usize)> = reps.iter().zip(train).map(|(r, a)| (&r.e_prime[..], a.domain.index())).collect();
            let (domain, d_report) = train_classifier(&samples, ClassifierRole::Domain, &config.classifier, seed)
                .map_err(|e| e.in_stage("domain classifier training"))?;
            log.domain = Some(d_report);
            Some(domain)
        } else {
            info!("training split has a single domain; the agent is rewarded by F alone");
            None
        };
        let pool: Vec<StartState> = reps
            .iter()
            .zip(train)
            .map(|(r, a)| StartState {
                e_prime: &r.e_prime,
                labels: EpisodeLabels {
                    label: a.label.index(),
                    domain: a.domain.index(),
                },
            })
            .collect();
        let env = match &domain {
            Some(d) => ClassifierReward::new(&fake_news, d, &config.rl),
            None => ClassifierReward::fake_news_only(&fake_news, &config.rl),
        };
        let (mut agent, episodes) =
            train_agent(&pool, &env, &config.rl, seed).map_err(|e| e.in_stage("agent training"))?;
        agent.freeze();
        log.episodes = episodes;
        (domain, Some(agent))
    } else {
        (None, None)
    };

    let bundle = ModelBundle {
        variant: spec,
        config,
        seed,
        encoders: stack,
        fake_news,
        domain,
        agent,
    };
    Ok((bundle, log))
}
