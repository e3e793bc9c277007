//! Reinforcement-learning domain adaptation for fake news detection.
//!
//! An article is encoded from its content, its comments and the users who
//! engaged with it into a fused vector `E′`. A fake-news classifier `F` and a
//! domain classifier `D` are trained on frozen `E′` and then frozen
//! themselves. A REINFORCE agent learns to nudge single coordinates of `E′`
//! so that `F` stays confident while `D` is confused.

pub mod baselines;
pub mod classifiers;
pub mod config;
pub mod corpus;
pub mod encoders;
pub mod error;
pub mod evaluation;
pub mod numerics;
pub mod pipeline;
pub mod rl_agent;
pub mod seed;

pub use error::{Error, Result};
