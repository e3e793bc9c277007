use rand::Rng;

use super::content::{embed, BiGruText};
use super::EncoderConfig;
use crate::corpus::MAX_TOKENS;
use crate::error::Result;
use crate::numerics::{AdditiveAttention, Graph, GruCell, ParamId, ParamStore, Tensor, Var};

/// Token budget for the concatenated comment stream of the BiGRU variant.
pub const SRE_COMMENT_TOKENS: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub enum CommentEncoder {
    Hierarchical(HierarchicalComments),
    BiGru(BiGruText),
}

/// Word GRU + word attention per comment, then an optional comment-level GRU
/// and comment attention across comments.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchicalComments {
    pub store: ParamStore,
    embedding: ParamId,
    word_gru: GruCell,
    word_attention: AdditiveAttention,
    comment_gru: Option<GruCell>,
    comment_attention: AdditiveAttention,
    dim: usize,
}

/// Output of the comment encoder with the comment-level attention weights
/// (`None` when there were no comments).
pub struct CommentOutput {
    pub vector: Var,
    pub comment_weights: Option<Var>,
}

impl HierarchicalComments {
    pub fn new<R: Rng + ?Sized>(cfg: &EncoderConfig, vocab_size: usize, rng: &mut R) -> Self {
        let mut store = ParamStore::new();
        let e = cfg.embedding_dim;
        let d = cfg.comment_dim;
        let embedding = store.uniform("comments.embedding", vocab_size.max(1), e, 0.5, rng);
        let word_gru = GruCell::new(&mut store, "comments.word_gru", e, d, rng);
        let word_attention = AdditiveAttention::new(&mut store, "comments.word_attention", d, cfg.attention_dim, rng);
        let comment_gru = cfg
            .comment_gru
            .then(|| GruCell::new(&mut store, "comments.comment_gru", d, d, rng));
        let comment_attention =
            AdditiveAttention::new(&mut store, "comments.comment_attention", d, cfg.attention_dim, rng);
        HierarchicalComments {
            store,
            embedding,
            word_gru,
            word_attention,
            comment_gru,
            comment_attention,
            dim: d,
        }
    }

    pub fn forward<'a>(&'a self, g: &mut Graph<'a>, comments: &[Vec<u32>]) -> Result<CommentOutput> {
        let comments: Vec<&Vec<u32>> = comments.iter().filter(|c| !c.is_empty()).collect();
        if comments.is_empty() {
            return Ok(CommentOutput {
                vector: g.constant(Tensor::zeros(&[1, self.dim])),
                comment_weights: None,
            });
        }
        let word_gru = self.word_gru.bind(g, &self.store);
        let mut vectors = Vec::with_capacity(comments.len());
        for c in comments {
            let emb = embed(g, &self.store, self.embedding, c, MAX_TOKENS)?;
            let states = word_gru.sequence(g, emb, false)?;
            vectors.push(self.word_attention.forward(g, &self.store, states)?.0);
        }
        let mut stacked = g.concat_rows(&vectors)?;
        if let Some(cell) = &self.comment_gru {
            stacked = cell.bind(g, &self.store).sequence(g, stacked, false)?;
        }
        let (vector, weights) = self.comment_attention.forward(g, &self.store, stacked)?;
        Ok(CommentOutput {
            vector,
            comment_weights: Some(weights),
        })
    }
}

impl CommentEncoder {
    pub fn store(&self) -> &ParamStore {
        match self {
            CommentEncoder::Hierarchical(h) => &h.store,
            CommentEncoder::BiGru(b) => &b.store,
        }
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        match self {
            CommentEncoder::Hierarchical(h) => &mut h.store,
            CommentEncoder::BiGru(b) => &mut b.store,
        }
    }

    pub fn forward<'a>(&'a self, g: &mut Graph<'a>, comments: &[Vec<u32>]) -> Result<CommentOutput> {
        match self {
            CommentEncoder::Hierarchical(h) => h.forward(g, comments),
            CommentEncoder::BiGru(b) => {
                let stream: Vec<u32> = comments.iter().flatten().copied().take(SRE_COMMENT_TOKENS).collect();
                let vector = if stream.is_empty() {
                    g.constant(Tensor::zeros(&[1, b.output_dim()]))
                } else {
                    b.forward(g, &stream)?
                };
                Ok(CommentOutput {
                    vector,
                    comment_weights: None,
                })
            }
        }
    }
}
