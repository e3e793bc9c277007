use rand::Rng;

use super::EncoderConfig;
use crate::corpus::MAX_TOKENS;
use crate::error::{Error, Result};
use crate::numerics::{AdditiveAttention, Graph, GruCell, Linear, LocationAttention, ParamId, ParamStore, Var};

/// Token-level encoder for article text.
#[derive(Clone, Debug, PartialEq)]
pub enum ContentEncoder {
    /// Embeddings pooled by additive attention (mean pooling when attention is
    /// off) followed by two dense layers.
    Pooled(PooledContent),
    /// Bidirectional GRU with location-based attention.
    BiGru(BiGruText),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PooledContent {
    pub store: ParamStore,
    embedding: ParamId,
    attention: Option<AdditiveAttention>,
    hidden: Linear,
    output: Linear,
}

impl PooledContent {
    pub fn new<R: Rng + ?Sized>(cfg: &EncoderConfig, vocab_size: usize, rng: &mut R) -> Self {
        let mut store = ParamStore::new();
        let e = cfg.embedding_dim;
        let embedding = store.uniform("content.embedding", vocab_size.max(1), e, 0.5, rng);
        let attention = cfg
            .content_attention
            .then(|| AdditiveAttention::new(&mut store, "content.attention", e, cfg.attention_dim, rng));
        let hidden = Linear::new(&mut store, "content.hidden", e, cfg.content_dim, rng);
        let output = Linear::new(&mut store, "content.output", cfg.content_dim, cfg.content_dim, rng);
        PooledContent {
            store,
            embedding,
            attention,
            hidden,
            output,
        }
    }

    pub fn forward<'a>(&'a self, g: &mut Graph<'a>, tokens: &[u32]) -> Result<Var> {
        let emb = embed(g, &self.store, self.embedding, tokens, MAX_TOKENS)?;
        let pooled = match &self.attention {
            Some(att) => att.forward(g, &self.store, emb)?.0,
            None => g.mean_rows(emb)?,
        };
        let h = self.hidden.forward(g, &self.store, pooled)?;
        let h = g.relu(h);
        let o = self.output.forward(g, &self.store, h)?;
        Ok(g.tanh(o))
    }
}

/// Bidirectional GRU over token embeddings; the two directions are
/// concatenated per position and pooled by location-based attention.
#[derive(Clone, Debug, PartialEq)]
pub struct BiGruText {
    pub store: ParamStore,
    embedding: ParamId,
    forward_cell: GruCell,
    backward_cell: GruCell,
    attention: LocationAttention,
    max_tokens: usize,
    output_dim: usize,
}

impl BiGruText {
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        embedding_dim: usize,
        output_dim: usize,
        vocab_size: usize,
        max_tokens: usize,
        rng: &mut R,
    ) -> Self {
        let mut store = ParamStore::new();
        let half = output_dim / 2;
        let embedding = store.uniform(format!("{name}.embedding"), vocab_size.max(1), embedding_dim, 0.5, rng);
        let forward_cell = GruCell::new(&mut store, &format!("{name}.gru_fw"), embedding_dim, half, rng);
        let backward_cell =
            GruCell::new(&mut store, &format!("{name}.gru_bw"), embedding_dim, output_dim - half, rng);
        let attention = LocationAttention::new(&mut store, &format!("{name}.attention"), output_dim, rng);
        BiGruText {
            store,
            embedding,
            forward_cell,
            backward_cell,
            attention,
            max_tokens,
            output_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn forward<'a>(&'a self, g: &mut Graph<'a>, tokens: &[u32]) -> Result<Var> {
        let emb = embed(g, &self.store, self.embedding, tokens, self.max_tokens)?;
        let fw = self.forward_cell.bind(g, &self.store).sequence(g, emb, false)?;
        let bw = self.backward_cell.bind(g, &self.store).sequence(g, emb, true)?;
        let states = g.concat_cols(&[fw, bw])?;
        Ok(self.attention.forward(g, &self.store, states)?.0)
    }
}

/// Embedding lookup of the first `limit` tokens as a `[n, e]` node.
pub(crate) fn embed<'a>(
    g: &mut Graph<'a>,
    store: &'a ParamStore,
    table: ParamId,
    tokens: &[u32],
    limit: usize,
) -> Result<Var> {
    if tokens.is_empty() {
        return Err(Error::EmptyInput("content encoder (no tokens)"));
    }
    let idx: Vec<usize> = tokens.iter().take(limit).map(|&t| t as usize).collect();
    let t = g.param(store, table);
    g.gather_rows(t, &idx)
}

impl ContentEncoder {
    pub fn store(&self) -> &ParamStore {
        match self {
            ContentEncoder::Pooled(p) => &p.store,
            ContentEncoder::BiGru(b) => &b.store,
        }
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        match self {
            ContentEncoder::Pooled(p) => &mut p.store,
            ContentEncoder::BiGru(b) => &mut b.store,
        }
    }

    pub fn forward<'a>(&'a self, g: &mut Graph<'a>, tokens: &[u32]) -> Result<Var> {
        match self {
            ContentEncoder::Pooled(p) => p.forward(g, tokens),
            ContentEncoder::BiGru(b) => b.forward(g, tokens),
        }
    }
}
