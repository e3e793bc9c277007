//! Coordinate-editing environment over `E′` and a REINFORCE policy.
//!
//! Action `a` moves coordinate `a / 2` by `+σ` when `a` is even and by `−σ`
//! when it is odd, so a `d`-dimensional state has `2d` actions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::MlpClassifier;
use crate::error::{Error, Result};
use crate::numerics::{adam_step, softmax, AdamConfig, Graph, Linear, ParamStore, Tensor, Var};
use crate::seed::{rng_for, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReturnMode {
    /// `G_t = Σ_{i=1..t} λ^i · r_{i+1}`: discounted sum of the rewards up to
    /// and including step `t`, discounting from `λ^1`.
    Cumulative,
    /// `G_t = Σ_{k≥t} λ^{k−t} · r_{k+1}`.
    RewardToGo,
}

/// Value subtracted from the returns before the policy update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    None,
    /// The returns the episode would have earned had every reward equalled
    /// the reward of the unedited start state. It depends only on the start
    /// state, so the gradient estimate stays unbiased.
    StartState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RlConfig {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub horizon: usize,
    pub discount: f64,
    pub episodes: usize,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    pub return_mode: ReturnMode,
    pub baseline: Baseline,
    /// Draw each episode's domain uniformly before drawing its article, so
    /// both domains get equal training episodes.
    pub balance_domains: bool,
    /// Standardise each episode's returns before the update.
    pub normalize_returns: bool,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            alpha: 0.5,
            beta: 0.5,
            sigma: 0.01,
            horizon: 20,
            discount: 0.99,
            episodes: 2000,
            learning_rate: 1e-4,
            hidden: vec![512, 256],
            return_mode: ReturnMode::Cumulative,
            baseline: Baseline::None,
            balance_domains: false,
            normalize_returns: false,
        }
    }
}

impl RlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma {} must be positive", self.sigma)));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::Config(format!("discount {} outside [0, 1]", self.discount)));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::Config("alpha and beta must be finite".into()));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("agent hidden sizes must be positive".into()));
        }
        AdamConfig::with_lr(self.learning_rate).validate()
    }
}

/// Returns a copy of `s` with coordinate `a / 2` moved by `±sigma`.
pub fn apply_action(s: &[f64], a: usize, sigma: f64) -> Result<Vec<f64>> {
    if a >= 2 * s.len() {
        return Err(Error::Index {
            context: "apply_action",
            index: a,
            limit: 2 * s.len(),
        });
    }
    let mut next = s.to_vec();
    if a % 2 == 0 {
        next[a / 2] += sigma;
    } else {
        next[a / 2] -= sigma;
    }
    Ok(next)
}

/// `α · Pr_F(l = label | e) − β · Pr_D(l = domain | e)`.
pub fn reward(
    e: &[f64],
    label: usize,
    domain: usize,
    fake_news: &MlpClassifier,
    domain_clf: &MlpClassifier,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let pf = fake_news.predict_proba(e)?;
    let pd = domain_clf.predict_proba(e)?;
    let (pf, pd) = (class_prob(&pf, label)?, class_prob(&pd, domain)?);
    Ok(alpha * pf - beta * pd)
}

fn class_prob(p: &[f64; 2], class: usize) -> Result<f64> {
    p.get(class).copied().ok_or(Error::Index {
        context: "reward class",
        index: class,
        limit: 2,
    })
}

/// Reward signal of the environment.
pub trait RewardModel {
    /// Reward `r_{t+1}` for taking `action` in `state`, reaching `next_state`.
    fn reward(&self, state: &[f64], action: usize, next_state: &[f64], labels: EpisodeLabels) -> Result<f64>;

    /// Reward attributed to simply being in `state`, when the model has one.
    fn state_reward(&self, _state: &[f64], _labels: EpisodeLabels) -> Result<Option<f64>> {
        Ok(None)
    }
}

/// The frozen-classifier reward [`reward`]. Without a domain classifier the
/// `β` term is dropped, as when training on a single domain.
#[derive(Clone, Copy, Debug)]
pub struct ClassifierReward<'c> {
    pub fake_news: &'c MlpClassifier,
    pub domain: Option<&'c MlpClassifier>,
    pub alpha: f64,
    pub beta: f64,
}

impl<'c> ClassifierReward<'c> {
    pub fn new(fake_news: &'c MlpClassifier, domain: &'c MlpClassifier, config: &RlConfig) -> Self {
        ClassifierReward {
            fake_news,
            domain: Some(domain),
            alpha: config.alpha,
            beta: config.beta,
        }
    }

    pub fn fake_news_only(fake_news: &'c MlpClassifier, config: &RlConfig) -> Self {
        ClassifierReward {
            fake_news,
            domain: None,
            alpha: config.alpha,
            beta: 0.0,
        }
    }
}

impl RewardModel for ClassifierReward<'_> {
    fn reward(&self, _state: &[f64], _action: usize, next_state: &[f64], labels: EpisodeLabels) -> Result<f64> {
        match self.domain {
            Some(d) => reward(next_state, labels.label, labels.domain, self.fake_news, d, self.alpha, self.beta),
            None => {
                let pf = self.fake_news.predict_proba(next_state)?;
                Ok(self.alpha * class_prob(&pf, labels.label)?)
            }
        }
    }

    fn state_reward(&self, state: &[f64], labels: EpisodeLabels) -> Result<Option<f64>> {
        self.reward(state, 0, state, labels).map(Some)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMemory {
    pub experiences: Vec<Experience>,
}

impl EpisodeMemory {
    pub fn len(&self) -> usize {
        self.experiences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experiences.is_empty()
    }

    pub fn clear(&mut self) {
        self.experiences.clear();
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.experiences.iter().map(|e| e.reward).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RolloutMode {
    Sample,
    Greedy,
}

/// Feed-forward policy with ReLU hidden layers and a softmax over `2d`
/// actions.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyAgent {
    pub store: ParamStore,
    pub layers: Vec<Linear>,
    input_dim: usize,
}

impl PolicyAgent {
    pub fn new(input_dim: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Config("agent input_dim must be positive".into()));
        }
        let mut rng = rng_for(seed, stream::AGENT);
        let mut store = ParamStore::new();
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = input_dim;
        for (i, &h) in hidden.iter().enumerate() {
            layers.push(Linear::new(&mut store, &format!("policy.hidden{i}"), width, h, &mut rng));
            width = h;
        }
        layers.push(Linear::new(&mut store, "policy.output", width, 2 * input_dim, &mut rng));
        Ok(PolicyAgent {
            store,
            layers,
            input_dim,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn action_count(&self) -> usize {
        2 * self.input_dim
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.output_dim).collect()
    }

    pub fn logits(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.input_dim {
            return Err(Error::dim("policy", &[s.len()], &[self.input_dim]));
        }
        let mut x = s.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.eval(&self.store, &x)?;
            if i < last {
                x.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        Ok(x)
    }

    /// `π_θ(· | s)`.
    pub fn action_probs(&self, s: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(s)?))
    }

    /// Logits `[batch, 2d]` for a batch of states.
    pub fn forward<'a>(&'a self, g: &mut Graph<'a>, states: Var) -> Result<Var> {
        let mut x = states;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(g, &self.store, x)?;
            if i < last {
                x = g.relu(x);
            }
        }
        Ok(x)
    }

    pub fn select_action(&self, s: &[f64], mode: RolloutMode, rng: &mut ChaCha8Rng) -> Result<usize> {
        let p = self.action_probs(s)?;
        Ok(match mode {
            RolloutMode::Greedy => argmax(&p),
            RolloutMode::Sample => sample(&p, rng),
        })
    }

    pub fn freeze(&mut self) {
        self.store.freeze();
    }
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn sample(p: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// Labels of the article an episode starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpisodeLabels {
    pub label: usize,
    pub domain: usize,
}

/// `T` edits from `start`, recording each transition with the reward of the
/// resulting state. Returns the memory and the final state.
pub fn run_episode(
    agent: &PolicyAgent,
    start: &[f64],
    labels: EpisodeLabels,
    env: &dyn RewardModel,
    config: &RlConfig,
    rng: &mut ChaCha8Rng,
    mode: RolloutMode,
) -> Result<(EpisodeMemory, Vec<f64>)> {
    let mut memory = EpisodeMemory::default();
    let mut s = start.to_vec();
    for _ in 0..config.horizon {
        let a = agent.select_action(&s, mode, rng)?;
        let next = apply_action(&s, a, config.sigma)?;
        let r = env.reward(&s, a, &next, labels)?;
        memory.experiences.push(Experience {
            state: s,
            action: a,
            reward: r,
            next_state: next.clone(),
        });
        s = next;
    }
    Ok((memory, s))
}

/// Per-step returns for an episode; see [`ReturnMode`].
pub fn returns(memory: &EpisodeMemory, discount: f64, mode: ReturnMode) -> Result<Vec<f64>> {
    if memory.is_empty() {
        return Err(Error::EmptyInput("episode memory"));
    }
    let rewards = memory.rewards();
    Ok(match mode {
        ReturnMode::Cumulative => {
            let mut out = Vec::with_capacity(rewards.len());
            let mut acc = 0.0;
            let mut factor = 1.0;
            for r in &rewards {
                factor *= discount;
                acc += factor * r;
                out.push(acc);
            }
            out
        }
        ReturnMode::RewardToGo => {
            let mut out = vec![0.0; rewards.len()];
            let mut acc = 0.0;
            for t in (0..rewards.len()).rev() {
                acc = rewards[t] + discount * acc;
                out[t] = acc;
            }
            out
        }
    })
}

/// Subtracts the mean and divides by the standard deviation (left centred
/// only when the deviation is ~0).
pub fn normalize(returns: &[f64]) -> Vec<f64> {
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    returns
        .iter()
        .map(|g| if std > 1e-12 { (g - mean) / std } else { g - mean })
        .collect()
}

/// REINFORCE loss `−(1/T) Σ_t G_t · log π(a_t | s_t)` for the episode, as a
/// graph node.
pub fn policy_loss<'a>(
    g: &mut Graph<'a>,
    agent: &'a PolicyAgent,
    memory: &EpisodeMemory,
    returns: &[f64],
) -> Result<Var> {
    if returns.len() != memory.len() {
        return Err(Error::dim("policy_update", &[returns.len()], &[memory.len()]));
    }
    if memory.is_empty() {
        return Err(Error::EmptyInput("episode memory"));
    }
    let rows: Vec<Vec<f64>> = memory.experiences.iter().map(|e| e.state.clone()).collect();
    let states = g.constant(Tensor::from_rows(&rows)?);
    let logits = agent.forward(g, states)?;
    let actions: Vec<usize> = memory.experiences.iter().map(|e| e.action).collect();
    g.weighted_softmax_cross_entropy(logits, &actions, returns)
}

/// One Adam step on the policy from a single episode. Returns the loss.
pub fn policy_update(
    agent: &mut PolicyAgent,
    memory: &EpisodeMemory,
    returns: &[f64],
    adam: &AdamConfig,
) -> Result<f64> {
    let (loss, grads) = {
        let mut g = Graph::new();
        let loss = policy_loss(&mut g, agent, memory, returns)?;
        (g.value(loss).data()[0], g.backward(loss)?)
    };
    agent.store.accumulate(&grads);
    adam_step(&mut agent.store, adam);
    Ok(loss)
}

/// Starting state for training episodes.
#[derive(Clone, Copy, Debug)]
pub struct StartState<'r> {
    pub e_prime: &'r [f64],
    pub labels: EpisodeLabels,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub mean_reward: f64,
    pub loss: f64,
}

/// Trains a fresh policy for `config.episodes` episodes, each starting from
/// a uniformly drawn element of `pool`.
pub fn train_agent(
    pool: &[StartState<'_>],
    env: &dyn RewardModel,
    config: &RlConfig,
    seed: u64,
) -> Result<(PolicyAgent, Vec<EpisodeLog>)> {
    config.validate()?;
    if pool.is_empty() {
        return Err(Error::EmptyInput("agent training pool"));
    }
    let dim = pool[0].e_prime.len();
    let mut agent = PolicyAgent::new(dim, &config.hidden, seed)?;
    train_agent_from(&mut agent, pool, env, config, seed).map(|log| (agent, log))
}

/// Continues training an existing policy.
pub fn train_agent_from(
    agent: &mut PolicyAgent,
    pool: &[StartState<'_>],
    env: &dyn RewardModel,
    config: &RlConfig,
    seed: u64,
) -> Result<Vec<EpisodeLog>> {
    config.validate()?;
    if pool.is_empty() {
        return Err(Error::EmptyInput("agent training pool"));
    }
    let adam = AdamConfig::with_lr(config.learning_rate);
    let mut rng = rng_for(seed, stream::AGENT + 1);
    let mut log = Vec::with_capacity(config.episodes);
    let by_domain: [Vec<usize>; 2] = [0, 1].map(|d| (0..pool.len()).filter(|&i| pool[i].labels.domain == d).collect());
    let balanced = config.balance_domains && by_domain.iter().all(|v| !v.is_empty());
    for episode in 0..config.episodes {
        let start = if balanced {
            let group = &by_domain[rng.gen_range(0..2)];
            pool[group[rng.gen_range(0..group.len())]]
        } else {
            pool[rng.gen_range(0..pool.len())]
        };
        let (memory, _) = run_episode(
            agent,
            start.e_prime,
            start.labels,
            env,
            config,
            &mut rng,
            RolloutMode::Sample,
        )?;
        if memory.is_empty() {
            log.push(EpisodeLog {
                episode,
                mean_reward: 0.0,
                loss: 0.0,
            });
            continue;
        }
        let mut g_t = returns(&memory, config.discount, config.return_mode)?;
        if config.baseline == Baseline::StartState {
            if let Some(r0) = env.state_reward(start.e_prime, start.labels)? {
                let flat = EpisodeMemory {
                    experiences: memory
                        .experiences
                        .iter()
                        .map(|e| Experience {
                            reward: r0,
                            ..e.clone()
                        })
                        .collect(),
                };
                let b = returns(&flat, config.discount, config.return_mode)?;
                g_t.iter_mut().zip(b).for_each(|(g, b)| *g -= b);
            }
        }
        if config.normalize_returns {
            g_t = normalize(&g_t);
        }
        let loss = policy_update(agent, &memory, &g_t, &adam)?;
        let rewards = memory.rewards();
        log.push(EpisodeLog {
            episode,
            mean_reward: rewards.iter().sum::<f64>() / rewards.len() as f64,
            loss,
        });
    }
    Ok(log)
}

/// Greedy `T`-step rollout without rewards, then `F` on the final vector.
/// Returns the adapted vector and `F`'s class probabilities.
pub fn adapt(
    agent: &PolicyAgent,
    e_prime: &[f64],
    fake_news: &MlpClassifier,
    config: &RlConfig,
) -> Result<(Vec<f64>, [f64; 2])> {
    let mut s = e_prime.to_vec();
    for _ in 0..config.horizon {
        let a = argmax(&agent.action_probs(&s)?);
        s = apply_action(&s, a, config.sigma)?;
    }
    let p = fake_news.predict_proba(&s)?;
    Ok((s, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn actions_follow_parity_convention() {
        assert_eq!(apply_action(&[0.0, 0.0], 0, 0.01).unwrap(), vec![0.01, 0.0]);
        assert_eq!(apply_action(&[0.0, 0.0], 3, 0.01).unwrap(), vec![0.0, -0.01]);
        let s = [0.3, -0.7];
        let back = apply_action(&apply_action(&s, 0, 0.01).unwrap(), 1, 0.01).unwrap();
        assert_eq!(back, s.to_vec());
        assert!(apply_action(&s, 4, 0.01).is_err());
    }

    fn memory_with(rewards: &[f64]) -> EpisodeMemory {
        EpisodeMemory {
            experiences: rewards
                .iter()
                .map(|&r| Experience {
                    state: vec![0.0],
                    action: 0,
                    reward: r,
                    next_state: vec![0.01],
                })
                .collect(),
        }
    }

    #[test]
    fn literal_returns() {
        let g = returns(&memory_with(&[1.0]), 0.99, ReturnMode::Cumulative).unwrap();
        assert!((g[0] - 0.99).abs() < 1e-15);
        let g = returns(&memory_with(&[1.0, 1.0]), 0.99, ReturnMode::Cumulative).unwrap();
        assert!((g[1] - 1.9701).abs() < 1e-12);
        let g = returns(&memory_with(&[1.0, -2.0, 3.0]), 0.0, ReturnMode::Cumulative).unwrap();
        assert_eq!(g, vec![0.0; 3]);
        assert!(returns(&EpisodeMemory::default(), 0.99, ReturnMode::Cumulative).is_err());
    }

    #[test]
    fn reward_to_go_returns() {
        let g = returns(&memory_with(&[1.0, 2.0]), 0.5, ReturnMode::RewardToGo).unwrap();
        assert_eq!(g, vec![2.0, 2.0]);
    }
}
