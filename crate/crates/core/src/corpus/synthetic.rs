//! Two-domain synthetic corpus with tunable class and domain signal.
//!
//! Vocabulary blocks (block size `b = vocab_size / 10`):
//! shared real/fake topic words (`b` each), one block of `2b` domain words per
//! domain (split into real- and fake-leaning halves), supporting and refuting
//! comment words (`b` each), and neutral filler for the rest. Users are split
//! into a source and a target block, each with a real- and a fake-leaning
//! half.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Domain, Interactions, Label, NewsArticle, UserIndex, Vocabulary};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub articles_per_domain: usize,
    pub vocab_size: usize,
    pub users: usize,
    /// Label information in content words, in `[0, 1]`.
    pub class_signal: f64,
    /// Domain information in words and engaging users, in `[0, 1]`.
    pub domain_signal: f64,
    /// Fraction of articles that receive comments.
    pub comment_rate: f64,
    pub seed: u64,
    /// Label information carried by comments and users; defaults to
    /// `class_signal`.
    pub aux_signal: Option<f64>,
    /// How strongly domain-specific words lean toward the label.
    pub domain_class_coupling: f64,
    pub content_length: usize,
    pub max_comments: usize,
    pub comment_length: usize,
    pub users_per_article: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            articles_per_domain: 500,
            vocab_size: 400,
            users: 200,
            class_signal: 0.9,
            domain_signal: 0.9,
            comment_rate: 0.6,
            seed: 1,
            aux_signal: None,
            domain_class_coupling: 0.5,
            content_length: 40,
            max_comments: 4,
            comment_length: 10,
            users_per_article: 6,
        }
    }
}

struct Blocks {
    b: usize,
}

impl Blocks {
    fn real(&self) -> u32 {
        0
    }
    fn fake(&self) -> u32 {
        self.b as u32
    }
    fn domain(&self, d: Domain) -> u32 {
        (2 * self.b + 2 * self.b * d.index()) as u32
    }
    fn support(&self) -> u32 {
        (6 * self.b) as u32
    }
    fn refute(&self) -> u32 {
        (7 * self.b) as u32
    }
    fn neutral(&self) -> u32 {
        (8 * self.b) as u32
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {v} outside [0, 1]")))
    }
}

fn other(d: Domain) -> Domain {
    match d {
        Domain::Source => Domain::Target,
        Domain::Target => Domain::Source,
    }
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Corpus> {
    check_unit("class_signal", config.class_signal)?;
    check_unit("domain_signal", config.domain_signal)?;
    check_unit("comment_rate", config.comment_rate)?;
    check_unit("domain_class_coupling", config.domain_class_coupling)?;
    let aux = config.aux_signal.unwrap_or(config.class_signal);
    check_unit("aux_signal", aux)?;
    let b = config.vocab_size / 10;
    if b < 2 {
        return Err(Error::Config(format!(
            "vocab_size {} too small for disjoint token blocks (need ≥ 20)",
            config.vocab_size
        )));
    }
    if config.users < 8 {
        return Err(Error::Config(format!(
            "users {} too small for disjoint user blocks (need ≥ 8)",
            config.users
        )));
    }
    if config.articles_per_domain == 0 || config.content_length == 0 {
        return Err(Error::Config("articles_per_domain and content_length must be positive".into()));
    }
    let blocks = Blocks { b };
    let neutral_len = config.vocab_size - 8 * b;

    let mut names = Vec::with_capacity(config.vocab_size);
    names.extend((0..b).map(|i| format!("real{i}")));
    names.extend((0..b).map(|i| format!("fake{i}")));
    for prefix in ["srcr", "srcf", "tgtr", "tgtf"] {
        names.extend((0..b).map(|i| format!("{prefix}{i}")));
    }
    names.extend((0..b).map(|i| format!("sup{i}")));
    names.extend((0..b).map(|i| format!("ref{i}")));
    names.extend((0..neutral_len).map(|i| format!("n{i}")));
    let vocabulary = Vocabulary::from_tokens(names);

    let mut users = UserIndex::default();
    for u in 0..config.users {
        users.insert(&format!("u{u}"));
    }
    let half_users = config.users / 2;
    let quarter = half_users / 2;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let c = config.class_signal;
    let d = config.domain_signal;
    let coupling = config.domain_class_coupling;

    let pick = |rng: &mut ChaCha8Rng, start: u32, len: usize| start + rng.gen_range(0..len as u32);
    let flip = |rng: &mut ChaCha8Rng, strength: f64| rng.gen::<f64>() < (1.0 + strength) / 2.0;

    let domain_word = |rng: &mut ChaCha8Rng, domain: Domain, label: Label| -> u32 {
        let dom = if flip(rng, d) { domain } else { other(domain) };
        let lean = if flip(rng, c * coupling) { label } else { flip_label(label) };
        let start = blocks.domain(dom) + (b * lean.index()) as u32;
        pick(rng, start, b)
    };

    let mut articles = Vec::with_capacity(2 * config.articles_per_domain);
    for domain in [Domain::Source, Domain::Target] {
        let mut labels: Vec<Label> = (0..config.articles_per_domain)
            .map(|i| Label::from_index(i % 2))
            .collect();
        labels.shuffle(&mut rng);
        let prefix = match domain {
            Domain::Source => "src",
            Domain::Target => "tgt",
        };
        for (i, label) in labels.into_iter().enumerate() {
            let len = length_around(&mut rng, config.content_length);
            let content: Vec<u32> = (0..len)
                .map(|_| {
                    let u: f64 = rng.gen();
                    if u < 0.3 {
                        let l = if flip(&mut rng, c) { label } else { flip_label(label) };
                        let start = match l {
                            Label::Real => blocks.real(),
                            Label::Fake => blocks.fake(),
                        };
                        pick(&mut rng, start, b)
                    } else if u < 0.6 {
                        domain_word(&mut rng, domain, label)
                    } else {
                        pick(&mut rng, blocks.neutral(), neutral_len)
                    }
                })
                .collect();

            let mut comments = Vec::new();
            if config.max_comments > 0 && rng.gen::<f64>() < config.comment_rate {
                let n = rng.gen_range(1..=config.max_comments);
                for _ in 0..n {
                    let clen = length_around(&mut rng, config.comment_length.max(1));
                    let comment = (0..clen)
                        .map(|_| {
                            let u: f64 = rng.gen();
                            if u < 0.4 {
                                let agrees = flip(&mut rng, aux);
                                let supportive = (label == Label::Real) == agrees;
                                let start = if supportive { blocks.support() } else { blocks.refute() };
                                pick(&mut rng, start, b)
                            } else if u < 0.6 {
                                domain_word(&mut rng, domain, label)
                            } else {
                                pick(&mut rng, blocks.neutral(), neutral_len)
                            }
                        })
                        .collect();
                    comments.push(comment);
                }
            }

            let n_users = length_around(&mut rng, config.users_per_article.max(1));
            let engaged: Vec<u32> = (0..n_users)
                .map(|_| {
                    let dom = if flip(&mut rng, d) { domain } else { other(domain) };
                    let lean = if flip(&mut rng, aux) { label } else { flip_label(label) };
                    let start = dom.index() * half_users + lean.index() * quarter;
                    (start + rng.gen_range(0..quarter)) as u32
                })
                .collect();

            articles.push(NewsArticle {
                id: format!("{prefix}-{i:05}"),
                domain,
                content,
                comments,
                interactions: Interactions::new(config.users, engaged)?,
                label,
            });
        }
    }

    Ok(Corpus {
        articles,
        vocabulary,
        users,
        domain_names: ["synthetic-source".into(), "synthetic-target".into()],
    })
}

fn flip_label(l: Label) -> Label {
    match l {
        Label::Real => Label::Fake,
        Label::Fake => Label::Real,
    }
}

/// Uniform in `[n/2, 3n/2]`, at least 1.
fn length_around(rng: &mut ChaCha8Rng, n: usize) -> usize {
    let lo = (n / 2).max(1);
    let hi = (n + n / 2).max(lo);
    rng.gen_range(lo..=hi)
}
