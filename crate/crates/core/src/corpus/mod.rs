//! Articles, vocabularies, user-news interactions and fold splitting.

mod interactions;
mod jsonl;
mod preprocess;
mod split;
mod synthetic;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use interactions::{build_interactions, Interactions, UserIndex};
pub use jsonl::{ingest_jsonl, read_jsonl, write_jsonl, RawArticle};
pub use preprocess::{detokenize, normalize, preprocess, Preprocessed, MAX_TOKENS};
pub use split::{split, stratified_folds, Fold, SplitMode, SplitPlan};
pub use synthetic::{generate_synthetic, SyntheticConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    /// Class index used by the domain classifier.
    pub fn index(self) -> usize {
        match self {
            Domain::Source => 0,
            Domain::Target => 1,
        }
    }
}

/// Veracity label. `Fake` is the positive class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Real => 0,
            Label::Fake => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 1 {
            Label::Fake
        } else {
            Label::Real
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Fake => "fake",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewsArticle {
    pub id: String,
    pub domain: Domain,
    pub content: Vec<u32>,
    pub comments: Vec<Vec<u32>>,
    pub interactions: Interactions,
    pub label: Label,
}

/// Token ↔ id map.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocabulary::default();
        for t in tokens {
            v.insert(t.into());
        }
        v
    }

    /// Keeps tokens seen at least `min_count` times, in first-seen order.
    pub fn build<'t, I>(tokens: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'t str>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut order = Vec::new();
        for t in tokens {
            let c = counts.entry(t).or_insert(0);
            if *c == 0 {
                order.push(t);
            }
            *c += 1;
        }
        Vocabulary::from_tokens(order.into_iter().filter(|t| counts[t] >= min_count))
    }

    fn insert(&mut self, token: String) -> u32 {
        if let Some(&id) = self.index.get(&token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.index.insert(token.clone(), id);
        self.tokens.push(token);
        id
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub articles: Vec<NewsArticle>,
    pub vocabulary: Vocabulary,
    pub users: UserIndex,
    /// `[source, target]` display names.
    pub domain_names: [String; 2],
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DomainStats {
    pub name: String,
    pub real: usize,
    pub fake: usize,
    pub total: usize,
    pub with_comments: usize,
    pub users: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub domains: Vec<DomainStats>,
    pub unique_users: usize,
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<22}", "")?;
        for d in &self.domains {
            write!(f, "{:>16}", d.name)?;
        }
        writeln!(f)?;
        let rows: [(&str, fn(&DomainStats) -> usize); 5] = [
            ("# True News", |d| d.real),
            ("# Fake News", |d| d.fake),
            ("# News", |d| d.total),
            ("# News with Comments", |d| d.with_comments),
            ("# Users", |d| d.users),
        ];
        for (name, get) in rows {
            write!(f, "{name:<22}")?;
            for d in &self.domains {
                write!(f, "{:>16}", get(d))?;
            }
            writeln!(f)?;
        }
        writeln!(f, "{:<22}{:>16}", "# Unique Users", self.unique_users)
    }
}

impl Corpus {
    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn domain_name(&self, domain: Domain) -> &str {
        &self.domain_names[domain.index()]
    }

    pub fn count(&self, domain: Domain) -> usize {
        self.articles.iter().filter(|a| a.domain == domain).count()
    }

    pub fn has_domain(&self, domain: Domain) -> bool {
        self.articles.iter().any(|a| a.domain == domain)
    }

    pub fn stats(&self) -> CorpusStats {
        let mut domains = Vec::new();
        for domain in [Domain::Source, Domain::Target] {
            let mut s = DomainStats {
                name: self.domain_name(domain).to_string(),
                ..Default::default()
            };
            let mut seen = vec![false; self.user_count()];
            for a in self.articles.iter().filter(|a| a.domain == domain) {
                s.total += 1;
                match a.label {
                    Label::Real => s.real += 1,
                    Label::Fake => s.fake += 1,
                }
                if !a.comments.is_empty() {
                    s.with_comments += 1;
                }
                for &u in a.interactions.active() {
                    seen[u as usize] = true;
                }
            }
            s.users = seen.iter().filter(|&&b| b).count();
            if s.total > 0 {
                domains.push(s);
            }
        }
        CorpusStats {
            domains,
            unique_users: self.user_count(),
        }
    }
}
