use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Domain};
use crate::error::{Error, Result};
use crate::seed::{rng_for, stream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitPlan {
    pub k: usize,
    /// Fraction of the target training folds added to the training set.
    pub gamma: f64,
    pub seed: u64,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan {
            k: 10,
            gamma: 0.3,
            seed: 7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    SingleDomain,
    CrossDomain,
}

impl SplitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitMode::SingleDomain => "single-domain",
            SplitMode::CrossDomain => "cross-domain",
        }
    }
}

/// Article indices for one fold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub index: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Single-domain mode only: the entire other domain.
    pub other_domain_test: Vec<usize>,
}

/// Label-stratified k-fold partition of `indices`. Each group is shuffled and
/// dealt round-robin, continuing the dealer position across groups, so fold
/// sizes and per-label counts differ by at most one.
pub fn stratified_folds<R: Rng + ?Sized>(
    indices: &[usize],
    label_of: impl Fn(usize) -> usize,
    k: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in indices {
        groups.entry(label_of(i)).or_default().push(i);
    }
    let mut folds = vec![Vec::new(); k];
    let mut dealer = 0;
    for (_, mut members) in groups {
        members.shuffle(rng);
        for m in members {
            folds[dealer % k].push(m);
            dealer += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

pub fn split(corpus: &Corpus, plan: &SplitPlan, mode: SplitMode) -> Result<Vec<Fold>> {
    if plan.k < 2 {
        return Err(Error::Config(format!("fold count must be at least 2, got {}", plan.k)));
    }
    if !(0.0..=1.0).contains(&plan.gamma) {
        return Err(Error::Config(format!("gamma {} outside [0, 1]", plan.gamma)));
    }
    let of = |d: Domain| -> Vec<usize> {
        (0..corpus.articles.len())
            .filter(|&i| corpus.articles[i].domain == d)
            .collect()
    };
    let source = of(Domain::Source);
    let target = of(Domain::Target);
    let label_of = |i: usize| corpus.articles[i].label.index();
    let mut rng = rng_for(plan.seed, stream::SPLIT);

    match mode {
        SplitMode::SingleDomain => {
            if source.len() < plan.k {
                return Err(Error::Config(format!(
                    "{} source articles cannot fill {} folds",
                    source.len(),
                    plan.k
                )));
            }
            let folds = stratified_folds(&source, label_of, plan.k, &mut rng);
            Ok((0..plan.k)
                .map(|f| Fold {
                    index: f,
                    train: merged(&folds, f),
                    test: folds[f].clone(),
                    other_domain_test: target.clone(),
                })
                .collect())
        }
        SplitMode::CrossDomain => {
            if target.is_empty() {
                return Err(Error::Config(if plan.gamma > 0.0 {
                    format!("gamma {} requested but the corpus has no target-domain articles", plan.gamma)
                } else {
                    "cross-domain mode needs target-domain articles to test on".to_string()
                }));
            }
            if source.is_empty() {
                return Err(Error::Config("cross-domain mode needs source-domain articles".into()));
            }
            if target.len() < plan.k {
                return Err(Error::Config(format!(
                    "{} target articles cannot fill {} folds",
                    target.len(),
                    plan.k
                )));
            }
            let folds = stratified_folds(&target, label_of, plan.k, &mut rng);
            Ok((0..plan.k)
                .map(|f| {
                    let mut pool = merged(&folds, f);
                    let take = (plan.gamma * pool.len() as f64).floor() as usize;
                    pool.shuffle(&mut rng_for(plan.seed, stream::SPLIT_GAMMA + 100 * f as u64));
                    pool.truncate(take);
                    let mut train = source.clone();
                    train.extend(pool);
                    train.sort_unstable();
                    Fold {
                        index: f,
                        train,
                        test: folds[f].clone(),
                        other_domain_test: Vec::new(),
                    }
                })
                .collect())
        }
    }
}

fn merged(folds: &[Vec<usize>], skip: usize) -> Vec<usize> {
    let mut out: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != skip)
        .flat_map(|(_, f)| f.iter().copied())
        .collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stratified_counts_within_one() {
        let labels: Vec<usize> = (0..103).map(|i| usize::from(i % 3 == 0)).collect();
        let idx: Vec<usize> = (0..103).collect();
        let folds = stratified_folds(&idx, |i| labels[i], 10, &mut ChaCha8Rng::seed_from_u64(1));
        let pos: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| labels[i] == 1).count()).collect();
        assert!(pos.iter().max().unwrap() - pos.iter().min().unwrap() <= 1);
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}
