//! One JSON object per line:
//! `{"id", "domain", "label", "content", "comments": [..], "engaged_users": [..]}`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    build_interactions, detokenize, normalize, preprocess, Corpus, Domain, Label, NewsArticle,
    Vocabulary,
};
use crate::error::{Error, Result};

pub const VOCAB_MIN_COUNT: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawArticle {
    pub id: String,
    pub domain: String,
    pub label: serde_json::Value,
    pub content: String,
    #[serde(default)]
    pub comments: Vec<String>,
    #[serde(default)]
    pub engaged_users: Vec<String>,
}

fn parse_label(v: &serde_json::Value) -> Option<Label> {
    match v {
        serde_json::Value::String(s) => match s.to_ascii_lowercase().as_str() {
            "fake" => Some(Label::Fake),
            "real" => Some(Label::Real),
            _ => None,
        },
        serde_json::Value::Number(n) => match n.as_u64() {
            Some(0) => Some(Label::Real),
            Some(1) => Some(Label::Fake),
            _ => None,
        },
        _ => None,
    }
}

pub fn read_jsonl(path: &Path) -> Result<Vec<RawArticle>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawArticle = serde_json::from_str(&line).map_err(|e| Error::Ingest {
            path: path.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(raw);
    }
    Ok(out)
}

/// Reads and preprocesses a corpus file. The vocabulary covers every token
/// seen at least twice in contents and comments. Articles whose content is
/// empty after preprocessing are skipped. When `source_domain` is `None` the
/// first domain name in the file is the source.
pub fn ingest_jsonl(path: &Path, source_domain: Option<&str>) -> Result<Corpus> {
    let raw = read_jsonl(path)?;
    corpus_from_raw(path, &raw, source_domain, VOCAB_MIN_COUNT)
}

pub(crate) fn corpus_from_raw(
    path: &Path,
    raw: &[RawArticle],
    source_domain: Option<&str>,
    min_count: usize,
) -> Result<Corpus> {
    if raw.is_empty() {
        return Err(Error::EmptyInput("corpus"));
    }
    let ingest_err = |line: usize, message: String| Error::Ingest {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut names: Vec<String> = Vec::new();
    if let Some(s) = source_domain {
        names.push(s.to_string());
    }
    let mut labels = Vec::with_capacity(raw.len());
    let mut seen_ids = HashSet::new();
    for (i, r) in raw.iter().enumerate() {
        let label = parse_label(&r.label)
            .ok_or_else(|| ingest_err(i + 1, format!("unknown label {}", r.label)))?;
        labels.push(label);
        if !seen_ids.insert(r.id.as_str()) {
            return Err(ingest_err(i + 1, format!("duplicate article id {}", r.id)));
        }
        if !names.contains(&r.domain) {
            names.push(r.domain.clone());
        }
    }
    if names.len() > 2 {
        return Err(Error::Config(format!(
            "expected at most two domains, found {names:?}"
        )));
    }
    let source_name = names[0].clone();
    let target_name = names.get(1).cloned().unwrap_or_else(|| "target".to_string());

    let normalized: Vec<(Vec<String>, Vec<Vec<String>>)> = raw
        .iter()
        .map(|r| (normalize(&r.content), r.comments.iter().map(|c| normalize(c)).collect()))
        .collect();
    let vocabulary = Vocabulary::build(
        normalized.iter().flat_map(|(content, comments)| {
            content
                .iter()
                .chain(comments.iter().flatten())
                .map(String::as_str)
        }),
        min_count,
    );

    let mut kept = Vec::new();
    for (i, r) in raw.iter().enumerate() {
        let content = preprocess(&normalized[i].0.join(" "), &vocabulary);
        if content.rejected {
            log::debug!("{}: article {} has no in-vocabulary content; skipped", path.display(), r.id);
            continue;
        }
        let comments: Vec<Vec<u32>> = normalized[i]
            .1
            .iter()
            .map(|c| preprocess(&c.join(" "), &vocabulary))
            .filter(|p| !p.rejected)
            .map(|p| p.ids)
            .collect();
        kept.push((i, content.ids, comments));
    }
    if kept.is_empty() {
        return Err(Error::EmptyInput("corpus (every article rejected by preprocessing)"));
    }

    let article_ids: Vec<String> = kept.iter().map(|(i, _, _)| raw[*i].id.clone()).collect();
    let records: Vec<(String, String)> = kept
        .iter()
        .flat_map(|(i, _, _)| {
            raw[*i]
                .engaged_users
                .iter()
                .map(move |u| (u.clone(), raw[*i].id.clone()))
        })
        .collect();
    let (users, vectors) = build_interactions(&records, &article_ids)?;

    let articles = kept
        .into_iter()
        .zip(vectors)
        .map(|((i, content, comments), interactions)| NewsArticle {
            id: raw[i].id.clone(),
            domain: if raw[i].domain == source_name {
                Domain::Source
            } else {
                Domain::Target
            },
            content,
            comments,
            interactions,
            label: labels[i],
        })
        .collect();

    Ok(Corpus {
        articles,
        vocabulary,
        users,
        domain_names: [source_name, target_name],
    })
}

/// Writes a corpus back out as JSONL text.
pub fn write_jsonl<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    for a in &corpus.articles {
        let raw = RawArticle {
            id: a.id.clone(),
            domain: corpus.domain_name(a.domain).to_string(),
            label: serde_json::Value::String(a.label.as_str().to_string()),
            content: detokenize(&a.content, &corpus.vocabulary),
            comments: a
                .comments
                .iter()
                .map(|c| detokenize(c, &corpus.vocabulary))
                .collect(),
            engaged_users: a
                .interactions
                .active()
                .iter()
                .filter_map(|&u| corpus.users.user(u).map(str::to_string))
                .collect(),
        };
        serde_json::to_writer(&mut out, &raw)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
