use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EncoderStack;
use crate::corpus::NewsArticle;
use crate::error::{Error, Result};
use crate::numerics::{adam_step, AdamConfig, Graph, Linear, ParamStore, Tensor, Var};
use crate::seed::{rng_for, stream};

/// Mean temporary-head loss per epoch for each stage. A skipped stage has an
/// empty curve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub content_loss: Vec<f64>,
    pub comment_loss: Vec<f64>,
    pub fusion_loss: Vec<f64>,
}

/// Trains the content encoder, then the comment encoder, then the
/// interaction encoder and fusion network, each under its own throwaway
/// linear classifier head. Returns an unfrozen stack.
pub fn pretrain_encoders(
    articles: &[&NewsArticle],
    stack: EncoderStack,
    seed: u64,
) -> Result<(EncoderStack, PretrainReport)> {
    if articles.is_empty() {
        return Err(Error::EmptyInput("pretraining split"));
    }
    let mut stack = stack;
    let cfg = stack.config.clone();
    let adam = AdamConfig::with_lr(cfg.learning_rate);
    let mut rng = rng_for(seed, stream::PRETRAIN);
    let mut head_rng = rng_for(seed, stream::PRETRAIN + 1);
    let mut report = PretrainReport::default();
    let vocab = stack.vocab_size().max(1);
    let recon = cfg.reconstruction_weight;

    // Content.
    {
        let mut head_store = ParamStore::new();
        let head = Linear::new(&mut head_store, "head", cfg.content_dim, 2, &mut head_rng);
        let words = Linear::new(&mut head_store, "words", cfg.content_dim, vocab, &mut head_rng);
        let all: Vec<usize> = (0..articles.len()).collect();
        report.content_loss = run_epochs(cfg.content_epochs, &all, cfg.batch_size, &mut rng, |batch| {
            let (loss, grads) = {
                let mut g = Graph::new();
                let rows = batch
                    .iter()
                    .map(|&i| stack.content_var(&mut g, &articles[i].content))
                    .collect::<Result<Vec<Var>>>()?;
                let x = g.concat_rows(&rows)?;
                let mut loss = class_loss(&mut g, &head, &head_store, x, batch, articles)?;
                if recon > 0.0 {
                    let bags: Vec<&[u32]> = batch.iter().map(|&i| &articles[i].content[..]).collect();
                    if let Some(r) = bag_loss(&mut g, &words, &head_store, x, &bags)? {
                        let r = g.scale(r, recon);
                        loss = g.add(loss, r)?;
                    }
                }
                (g.value(loss).data()[0], g.backward(loss)?)
            };
            let store = stack.content.store_mut();
            store.accumulate(&grads);
            adam_step(store, &adam);
            head_store.accumulate(&grads);
            adam_step(&mut head_store, &adam);
            Ok(loss)
        })?;
    }

    // Comments, only for articles that have any.
    let commented: Vec<usize> = (0..articles.len())
        .filter(|&i| articles[i].comments.iter().any(|c| !c.is_empty()))
        .collect();
    if cfg.use_comments && !commented.is_empty() {
        let mut head_store = ParamStore::new();
        let head = Linear::new(&mut head_store, "head", cfg.comment_dim, 2, &mut head_rng);
        report.comment_loss = run_epochs(cfg.comment_epochs, &commented, cfg.batch_size, &mut rng, |batch| {
            let (loss, grads) = {
                let mut g = Graph::new();
                let rows = batch
                    .iter()
                    .map(|&i| Ok(stack.comments_var(&mut g, &articles[i].comments)?.vector))
                    .collect::<Result<Vec<Var>>>()?;
                let x = g.concat_rows(&rows)?;
                let loss = class_loss(&mut g, &head, &head_store, x, batch, articles)?;
                (g.value(loss).data()[0], g.backward(loss)?)
            };
            let store = stack.comments.store_mut();
            store.accumulate(&grads);
            adam_step(store, &adam);
            head_store.accumulate(&grads);
            adam_step(&mut head_store, &adam);
            Ok(loss)
        })?;
    }

    // Interactions and fusion over fixed text branches.
    if cfg.fusion_epochs > 0 {
        let text: Vec<(Tensor, Tensor)> = articles
            .iter()
            .map(|a| {
                let content = Tensor::row(stack.encode_content(&a.content)?);
                let comments = Tensor::row(stack.encode_comments(&a.comments)?);
                Ok((content, comments))
            })
            .collect::<Result<_>>()?;
        let mut head_store = ParamStore::new();
        let head = Linear::new(&mut head_store, "head", cfg.representation_dim, 2, &mut head_rng);
        let words = Linear::new(&mut head_store, "words", cfg.representation_dim, vocab, &mut head_rng);
        let users = Linear::new(&mut head_store, "users", cfg.representation_dim, stack.users().max(1), &mut head_rng);
        let all: Vec<usize> = (0..articles.len()).collect();
        report.fusion_loss = run_epochs(cfg.fusion_epochs, &all, cfg.batch_size, &mut rng, |batch| {
            let (loss, grads) = {
                let mut g = Graph::new();
                let rows = batch
                    .iter()
                    .map(|&i| {
                        let content = g.constant_ref(&text[i].0);
                        let comments = g.constant_ref(&text[i].1);
                        let u = stack.interactions_var(&mut g, &articles[i].interactions)?;
                        stack.fusion.forward(&mut g, comments, content, u)
                    })
                    .collect::<Result<Vec<Var>>>()?;
                let x = g.concat_rows(&rows)?;
                let mut loss = class_loss(&mut g, &head, &head_store, x, batch, articles)?;
                if recon > 0.0 {
                    let bags: Vec<&[u32]> = batch.iter().map(|&i| &articles[i].content[..]).collect();
                    let engaged: Vec<&[u32]> = batch.iter().map(|&i| articles[i].interactions.active()).collect();
                    for r in [
                        bag_loss(&mut g, &words, &head_store, x, &bags)?,
                        bag_loss(&mut g, &users, &head_store, x, &engaged)?,
                    ]
                    .into_iter()
                    .flatten()
                    {
                        let r = g.scale(r, recon);
                        loss = g.add(loss, r)?;
                    }
                }
                (g.value(loss).data()[0], g.backward(loss)?)
            };
            stack.interactions.store.accumulate(&grads);
            adam_step(&mut stack.interactions.store, &adam);
            stack.fusion.store.accumulate(&grads);
            adam_step(&mut stack.fusion.store, &adam);
            head_store.accumulate(&grads);
            adam_step(&mut head_store, &adam);
            Ok(loss)
        })?;
    }

    Ok((stack, report))
}

fn class_loss<'a>(
    g: &mut Graph<'a>,
    head: &Linear,
    head_store: &'a ParamStore,
    x: Var,
    batch: &[usize],
    articles: &[&NewsArticle],
) -> Result<Var> {
    let logits = head.forward(g, head_store, x)?;
    let labels: Vec<usize> = batch.iter().map(|&i| articles[i].label.index()).collect();
    g.softmax_cross_entropy(logits, &labels)
}

/// Mean over rows of the cross-entropy between each row's empirical bag
/// distribution and `softmax(head(x))`. Rows with empty bags are skipped;
/// `None` when every bag is empty.
fn bag_loss<'a>(
    g: &mut Graph<'a>,
    head: &Linear,
    head_store: &'a ParamStore,
    x: Var,
    bags: &[&[u32]],
) -> Result<Option<Var>> {
    let filled = bags.iter().filter(|b| !b.is_empty()).count();
    if filled == 0 {
        return Ok(None);
    }
    let logits = head.forward(g, head_store, x)?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut weights = Vec::new();
    for (r, bag) in bags.iter().enumerate() {
        for &t in bag.iter() {
            rows.push(r);
            labels.push(t as usize);
            weights.push(1.0 / bag.len() as f64);
        }
    }
    // The loss averages over all expanded rows; rescale to a per-article mean.
    let scale = rows.len() as f64 / filled as f64;
    weights.iter_mut().for_each(|w| *w *= scale);
    let expanded = g.gather_rows(logits, &rows)?;
    Ok(Some(g.weighted_softmax_cross_entropy(expanded, &labels, &weights)?))
}

/// Shuffled mini-batch epochs; returns the size-weighted mean loss per epoch.
fn run_epochs<F>(epochs: usize, items: &[usize], batch: usize, rng: &mut ChaCha8Rng, mut step: F) -> Result<Vec<f64>>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    let mut curve = Vec::with_capacity(epochs);
    let mut order = items.to_vec();
    for _ in 0..epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch.max(1)) {
            total += step(chunk)? * chunk.len() as f64;
        }
        curve.push(total / order.len() as f64);
    }
    Ok(curve)
}
