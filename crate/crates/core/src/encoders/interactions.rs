use rand::Rng;

use super::EncoderConfig;
use crate::corpus::Interactions;
use crate::error::{Error, Result};
use crate::numerics::{Graph, Linear, ParamStore, Var};

/// One hidden ReLU layer over the binary user vector, tanh output.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionEncoder {
    pub store: ParamStore,
    hidden: Linear,
    output: Linear,
    users: usize,
}

impl InteractionEncoder {
    pub fn new<R: Rng + ?Sized>(cfg: &EncoderConfig, users: usize, rng: &mut R) -> Self {
        let mut store = ParamStore::new();
        let hidden = Linear::new(&mut store, "interactions.hidden", users.max(1), cfg.interaction_hidden, rng);
        let output = Linear::new(&mut store, "interactions.output", cfg.interaction_hidden, cfg.interaction_dim, rng);
        InteractionEncoder {
            store,
            hidden,
            output,
            users,
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// The binary input times the hidden weights is the sum of the weight rows
    /// of the active users.
    pub fn forward<'a>(&'a self, g: &mut Graph<'a>, u: &Interactions) -> Result<Var> {
        if u.len() != self.users {
            return Err(Error::dim("encode_interactions", &[u.len()], &[self.users]));
        }
        let active: Vec<usize> = u.active().iter().map(|&c| c as usize).collect();
        let w = g.param(&self.store, self.hidden.weight);
        let b = g.param(&self.store, self.hidden.bias);
        let pre = g.sum_gather_rows(w, &active)?;
        let pre = g.add_bias(pre, b)?;
        let h = g.relu(pre);
        let o = self.output.forward(g, &self.store, h)?;
        Ok(g.tanh(o))
    }
}
