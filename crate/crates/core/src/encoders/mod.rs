//! Representation network: content, comment and interaction branches fused
//! into a single vector `E′`.

mod comments;
mod content;
mod interactions;
mod pretrain;

use serde::{Deserialize, Serialize};

pub use comments::{CommentEncoder, CommentOutput, HierarchicalComments, SRE_COMMENT_TOKENS};
pub use content::{BiGruText, ContentEncoder, PooledContent};
pub use interactions::InteractionEncoder;
pub use pretrain::{pretrain_encoders, PretrainReport};

use crate::corpus::{Interactions, NewsArticle, MAX_TOKENS};
use crate::error::{Error, Result};
use crate::numerics::{Graph, Linear, ParamStore, Tensor, Var};
use crate::seed::{rng_for, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    Standard,
    SreBigru,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, g: &mut Graph<'_>, x: Var) -> Var {
        match self {
            Activation::Tanh => g.tanh(x),
            Activation::Relu => g.relu(x),
            Activation::Identity => x,
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub embedding_dim: usize,
    pub content_dim: usize,
    pub comment_dim: usize,
    pub interaction_dim: usize,
    pub representation_dim: usize,
    pub attention_dim: usize,
    pub interaction_hidden: usize,
    /// Attention pooling over content tokens; mean pooling when off.
    pub content_attention: bool,
    /// Comment-level GRU ahead of comment attention.
    pub comment_gru: bool,
    pub use_comments: bool,
    pub use_interactions: bool,
    pub fusion_activation: Activation,
    pub content_epochs: usize,
    pub comment_epochs: usize,
    /// Epochs for the interaction encoder and fusion network, trained with
    /// content and comment encoders held fixed.
    pub fusion_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Weight of the bag-of-words reconstruction loss added to the content
    /// and fusion stages; `0` trains on the class head alone.
    pub reconstruction_weight: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            kind: EncoderKind::Standard,
            embedding_dim: 32,
            content_dim: 64,
            comment_dim: 32,
            interaction_dim: 32,
            representation_dim: 64,
            attention_dim: 32,
            interaction_hidden: 64,
            content_attention: true,
            comment_gru: true,
            use_comments: true,
            use_interactions: true,
            fusion_activation: Activation::Tanh,
            content_epochs: 3,
            comment_epochs: 5,
            fusion_epochs: 3,
            learning_rate: 1e-3,
            batch_size: 16,
            reconstruction_weight: 1.0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("embedding_dim", self.embedding_dim),
            ("content_dim", self.content_dim),
            ("comment_dim", self.comment_dim),
            ("interaction_dim", self.interaction_dim),
            ("representation_dim", self.representation_dim),
            ("attention_dim", self.attention_dim),
            ("interaction_hidden", self.interaction_hidden),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("encoder {name} must be positive")));
            }
        }
        if self.kind == EncoderKind::SreBigru && (self.content_dim < 2 || self.comment_dim < 2) {
            return Err(Error::Config("BiGRU branches need content_dim and comment_dim ≥ 2".into()));
        }
        if !(self.reconstruction_weight >= 0.0 && self.reconstruction_weight.is_finite()) {
            return Err(Error::Config(format!(
                "reconstruction_weight {} must be non-negative",
                self.reconstruction_weight
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("encoder learning_rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }

    /// Width of the concatenated branch vector `E`.
    pub fn fused_input_dim(&self) -> usize {
        self.comment_dim + self.content_dim + self.interaction_dim
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchOutputs {
    pub content: Vec<f64>,
    pub comments: Vec<f64>,
    pub interactions: Vec<f64>,
}

impl BranchOutputs {
    /// `E = comments ‖ content ‖ interactions`.
    pub fn concatenated(&self) -> Vec<f64> {
        let mut e = Vec::with_capacity(self.comments.len() + self.content.len() + self.interactions.len());
        e.extend_from_slice(&self.comments);
        e.extend_from_slice(&self.content);
        e.extend_from_slice(&self.interactions);
        e
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    pub e_prime: Vec<f64>,
    pub branch: BranchOutputs,
    pub article_id: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fusion {
    pub store: ParamStore,
    pub layer: Linear,
    pub activation: Activation,
}

impl Fusion {
    pub fn forward<'a>(&'a self, g: &mut Graph<'a>, comments: Var, content: Var, interactions: Var) -> Result<Var> {
        let e = g.concat_cols(&[comments, content, interactions])?;
        let pre = self.layer.forward(g, &self.store, e)?;
        Ok(self.activation.apply(g, pre))
    }
}

/// The four branch networks. Each owns its parameter store so stages can be
/// trained and frozen independently.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderStack {
    pub config: EncoderConfig,
    pub content: ContentEncoder,
    pub comments: CommentEncoder,
    pub interactions: InteractionEncoder,
    pub fusion: Fusion,
    vocab_size: usize,
}

/// Branch nodes for one article in a graph.
pub struct BranchVars {
    pub content: Var,
    pub comments: Var,
    pub interactions: Var,
    pub comment_weights: Option<Var>,
}

impl EncoderStack {
    /// Fresh, randomly initialised stack; parameters depend only on
    /// `(config, vocab_size, users, seed)`.
    pub fn new(config: &EncoderConfig, vocab_size: usize, users: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_for(seed, stream::ENCODER_INIT);
        let (content, comments) = match config.kind {
            EncoderKind::Standard => (
                ContentEncoder::Pooled(PooledContent::new(config, vocab_size, &mut rng)),
                CommentEncoder::Hierarchical(HierarchicalComments::new(config, vocab_size, &mut rng)),
            ),
            EncoderKind::SreBigru => (
                ContentEncoder::BiGru(BiGruText::new(
                    "content",
                    config.embedding_dim,
                    config.content_dim,
                    vocab_size,
                    MAX_TOKENS,
                    &mut rng,
                )),
                CommentEncoder::BiGru(BiGruText::new(
                    "comments",
                    config.embedding_dim,
                    config.comment_dim,
                    vocab_size,
                    SRE_COMMENT_TOKENS,
                    &mut rng,
                )),
            ),
        };
        let interactions = InteractionEncoder::new(config, users, &mut rng);
        let mut fusion_store = ParamStore::new();
        let layer = Linear::new(
            &mut fusion_store,
            "fusion",
            config.fused_input_dim(),
            config.representation_dim,
            &mut rng,
        );
        Ok(EncoderStack {
            config: config.clone(),
            content,
            comments,
            interactions,
            fusion: Fusion {
                store: fusion_store,
                layer,
                activation: config.fusion_activation,
            },
            vocab_size,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn users(&self) -> usize {
        self.interactions.users()
    }

    pub fn representation_dim(&self) -> usize {
        self.config.representation_dim
    }

    pub fn stores(&self) -> [&ParamStore; 4] {
        [
            self.content.store(),
            self.comments.store(),
            &self.interactions.store,
            &self.fusion.store,
        ]
    }

    pub fn stores_mut(&mut self) -> [&mut ParamStore; 4] {
        [
            self.content.store_mut(),
            self.comments.store_mut(),
            &mut self.interactions.store,
            &mut self.fusion.store,
        ]
    }

    pub fn freeze(&mut self) {
        for s in self.stores_mut() {
            s.freeze();
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.stores().iter().all(|s| s.is_frozen())
    }

    fn zeros(g: &mut Graph<'_>, dim: usize) -> Var {
        g.constant(Tensor::zeros(&[1, dim]))
    }

    pub fn content_var<'a>(&'a self, g: &mut Graph<'a>, tokens: &[u32]) -> Result<Var> {
        self.content.forward(g, tokens)
    }

    pub fn comments_var<'a>(&'a self, g: &mut Graph<'a>, comments: &[Vec<u32>]) -> Result<CommentOutput> {
        if !self.config.use_comments {
            return Ok(CommentOutput {
                vector: Self::zeros(g, self.config.comment_dim),
                comment_weights: None,
            });
        }
        self.comments.forward(g, comments)
    }

    pub fn interactions_var<'a>(&'a self, g: &mut Graph<'a>, u: &Interactions) -> Result<Var> {
        if !self.config.use_interactions {
            if u.len() != self.users() {
                return Err(Error::dim("encode_interactions", &[u.len()], &[self.users()]));
            }
            return Ok(Self::zeros(g, self.config.interaction_dim));
        }
        self.interactions.forward(g, u)
    }

    pub fn branch_vars<'a>(&'a self, g: &mut Graph<'a>, article: &NewsArticle) -> Result<BranchVars> {
        let content = self.content_var(g, &article.content)?;
        let c = self.comments_var(g, &article.comments)?;
        let interactions = self.interactions_var(g, &article.interactions)?;
        Ok(BranchVars {
            content,
            comments: c.vector,
            interactions,
            comment_weights: c.comment_weights,
        })
    }

    /// `E′` node for one article, shape `[1, d_E]`.
    pub fn e_prime_var<'a>(&'a self, g: &mut Graph<'a>, article: &NewsArticle) -> Result<Var> {
        let b = self.branch_vars(g, article)?;
        self.fusion.forward(g, b.comments, b.content, b.interactions)
    }

    pub fn encode_content(&self, tokens: &[u32]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let v = self.content_var(&mut g, tokens)?;
        Ok(g.value(v).data().to_vec())
    }

    pub fn encode_comments(&self, comments: &[Vec<u32>]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let v = self.comments_var(&mut g, comments)?.vector;
        Ok(g.value(v).data().to_vec())
    }

    pub fn encode_interactions(&self, u: &Interactions) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let v = self.interactions_var(&mut g, u)?;
        Ok(g.value(v).data().to_vec())
    }

    pub fn fuse(&self, branch: &BranchOutputs, article_id: &str) -> Result<Representation> {
        let c = &self.config;
        for (name, got, want) in [
            ("fuse.content", branch.content.len(), c.content_dim),
            ("fuse.comments", branch.comments.len(), c.comment_dim),
            ("fuse.interactions", branch.interactions.len(), c.interaction_dim),
        ] {
            if got != want {
                return Err(Error::dim(name, &[got], &[want]));
            }
        }
        let mut g = Graph::new();
        let content = g.constant(Tensor::row(branch.content.clone()));
        let comments = g.constant(Tensor::row(branch.comments.clone()));
        let interactions = g.constant(Tensor::row(branch.interactions.clone()));
        let e = self.fusion.forward(&mut g, comments, content, interactions)?;
        Ok(Representation {
            e_prime: g.value(e).data().to_vec(),
            branch: branch.clone(),
            article_id: article_id.to_string(),
        })
    }

    pub fn encode(&self, article: &NewsArticle) -> Result<Representation> {
        let mut g = Graph::new();
        let b = self.branch_vars(&mut g, article)?;
        let e = self.fusion.forward(&mut g, b.comments, b.content, b.interactions)?;
        Ok(Representation {
            e_prime: g.value(e).data().to_vec(),
            branch: BranchOutputs {
                content: g.value(b.content).data().to_vec(),
                comments: g.value(b.comments).data().to_vec(),
                interactions: g.value(b.interactions).data().to_vec(),
            },
            article_id: article.id.clone(),
        })
    }

    pub fn encode_all<'n, I>(&self, articles: I) -> Result<Vec<Representation>>
    where
        I: IntoIterator<Item = &'n NewsArticle>,
    {
        articles.into_iter().map(|a| self.encode(a)).collect()
    }
}
