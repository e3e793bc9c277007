use std::collections::HashMap;

use crate::error::{Error, Result};

/// Binary user-engagement vector stored by its set bits.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Interactions {
    len: usize,
    active: Vec<u32>,
}

impl Interactions {
    pub fn new(len: usize, mut active: Vec<u32>) -> Result<Self> {
        active.sort_unstable();
        active.dedup();
        if let Some(&last) = active.last() {
            if last as usize >= len {
                return Err(Error::Index {
                    context: "interaction column",
                    index: last as usize,
                    limit: len,
                });
            }
        }
        Ok(Interactions { len, active })
    }

    pub fn empty(len: usize) -> Self {
        Interactions {
            len,
            active: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Sorted columns set to 1.
    pub fn active(&self) -> &[u32] {
        &self.active
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.len];
        for &u in &self.active {
            v[u as usize] = 1.0;
        }
        v
    }
}

/// User id → dense column, in first-seen order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UserIndex {
    users: Vec<String>,
    index: HashMap<String, u32>,
}

impl UserIndex {
    pub fn insert(&mut self, user: &str) -> u32 {
        if let Some(&c) = self.index.get(user) {
            return c;
        }
        let c = self.users.len() as u32;
        self.users.push(user.to_string());
        self.index.insert(user.to_string(), c);
        c
    }

    pub fn column(&self, user: &str) -> Option<u32> {
        self.index.get(user).copied()
    }

    pub fn user(&self, column: u32) -> Option<&str> {
        self.users.get(column as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }
}

/// Builds one binary vector per article from `(user, article)` engagement
/// records. Columns follow first-seen user order.
pub fn build_interactions(
    records: &[(String, String)],
    article_ids: &[String],
) -> Result<(UserIndex, Vec<Interactions>)> {
    let position: HashMap<&str, usize> = article_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut unknown: Vec<String> = records
        .iter()
        .filter(|(_, a)| !position.contains_key(a.as_str()))
        .map(|(_, a)| a.clone())
        .collect();
    if !unknown.is_empty() {
        unknown.sort();
        unknown.dedup();
        return Err(Error::UnknownArticles(unknown));
    }
    let mut users = UserIndex::default();
    let mut cols: Vec<Vec<u32>> = vec![Vec::new(); article_ids.len()];
    for (user, article) in records {
        let c = users.insert(user);
        cols[position[article.as_str()]].push(c);
    }
    let n = users.len();
    let vectors = cols
        .into_iter()
        .map(|c| Interactions::new(n, c))
        .collect::<Result<Vec<_>>>()?;
    Ok((users, vectors))
}
