//! The fake-news classifier `F` and the domain classifier `D`: one-hidden-layer
//! MLPs trained with cross-entropy on fixed representations.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::f1_score;
use crate::numerics::{adam_step, dropout, softmax, AdamConfig, Graph, Linear, ParamStore, Tensor, Var};
use crate::seed::{rng_for, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierRole {
    FakeNews,
    Domain,
}

impl ClassifierRole {
    fn stream(self) -> u64 {
        match self {
            ClassifierRole::FakeNews => stream::CLASSIFIER_F,
            ClassifierRole::Domain => stream::CLASSIFIER_D,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub hidden: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Mini-batch size; `0` means full batch.
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping; `0` disables
    /// early stopping.
    pub patience: usize,
    /// Fraction of the training samples held out for early stopping. `0`
    /// trains on everything for the full epoch budget.
    pub validation_fraction: f64,
    /// Weight each sample by `n / (2 · n_class)` so both classes contribute
    /// equally to the loss.
    pub balance_classes: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            hidden: 256,
            dropout: 0.2,
            learning_rate: 1e-5,
            epochs: 500,
            batch_size: 32,
            patience: 20,
            validation_fraction: 0.1,
            balance_classes: true,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::Config("classifier hidden size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("classifier dropout {} outside [0, 1)", self.dropout)));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation_fraction {} outside [0, 1)",
                self.validation_fraction
            )));
        }
        AdamConfig::with_lr(self.learning_rate).validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpClassifier {
    pub role: ClassifierRole,
    pub store: ParamStore,
    pub hidden: Linear,
    pub output: Linear,
    pub dropout: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub train_loss: Vec<f64>,
    /// Empty when no validation split was used.
    pub validation_f1: Vec<f64>,
    pub best_epoch: usize,
}

impl MlpClassifier {
    pub fn new(role: ClassifierRole, input_dim: usize, config: &ClassifierConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::Config("classifier input_dim must be positive".into()));
        }
        let mut rng = rng_for(seed, role.stream());
        let mut store = ParamStore::new();
        let hidden = Linear::new(&mut store, "hidden", input_dim, config.hidden, &mut rng);
        let output = Linear::new(&mut store, "output", config.hidden, 2, &mut rng);
        Ok(MlpClassifier {
            role,
            store,
            hidden,
            output,
            dropout: config.dropout,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden.output_dim
    }

    pub fn freeze(&mut self) {
        self.store.freeze();
    }

    pub fn is_frozen(&self) -> bool {
        self.store.is_frozen()
    }

    /// Logits `[batch, 2]` in the graph; dropout only when `rng` is given.
    pub fn forward<'a>(&'a self, g: &mut Graph<'a>, x: Var, rng: Option<&mut ChaCha8Rng>) -> Result<Var> {
        let h = self.hidden.forward(g, &self.store, x)?;
        let mut h = g.relu(h);
        if let Some(rng) = rng {
            h = dropout(g, h, self.dropout, true, rng)?;
        }
        self.output.forward(g, &self.store, h)
    }

    /// Eval-mode logits computed directly, without a graph.
    pub fn logits(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.input_dim() {
            return Err(Error::dim("predict_proba", &[x.len()], &[self.input_dim()]));
        }
        let mut h = self.hidden.eval(&self.store, x)?;
        h.iter_mut().for_each(|v| *v = v.max(0.0));
        let out = self.output.eval(&self.store, &h)?;
        Ok([out[0], out[1]])
    }

    /// `(Pr(class 0), Pr(class 1))`, dropout disabled.
    pub fn predict_proba(&self, x: &[f64]) -> Result<[f64; 2]> {
        let p = softmax(&self.logits(x)?);
        Ok([p[0], p[1]])
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let p = self.predict_proba(x)?;
        Ok(usize::from(p[1] > p[0]))
    }
}

/// Trains a fresh classifier on `(vector, class)` pairs and returns it frozen.
///
/// With a validation split, training stops after `patience` epochs without a
/// better validation F1 (ties broken by lower validation loss) and the best
/// epoch's parameters are restored.
pub fn train_classifier(
    samples: &[(&[f64], usize)],
    role: ClassifierRole,
    config: &ClassifierConfig,
    seed: u64,
) -> Result<(MlpClassifier, TrainReport)> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyInput("classifier training set"));
    }
    let dim = samples[0].0.len();
    if let Some((x, _)) = samples.iter().find(|(x, _)| x.len() != dim) {
        return Err(Error::dim("train_classifier", &[x.len()], &[dim]));
    }
    if let Some((_, l)) = samples.iter().find(|(_, l)| *l > 1) {
        return Err(Error::Index {
            context: "train_classifier label",
            index: *l,
            limit: 2,
        });
    }
    let first = samples[0].1;
    if samples.iter().all(|(_, l)| *l == first) {
        return Err(Error::DegenerateData(format!(
            "{role:?} classifier training set contains only class {first}"
        )));
    }

    let mut model = MlpClassifier::new(role, dim, config, seed)?;
    let mut rng = rng_for(seed, role.stream() + 100);
    let (train_idx, val_idx) = holdout(samples, config.validation_fraction, &mut rng);
    let adam = AdamConfig::with_lr(config.learning_rate);
    let batch = if config.batch_size == 0 {
        train_idx.len()
    } else {
        config.batch_size
    };

    let class_weight = if config.balance_classes {
        let n1 = train_idx.iter().filter(|&&i| samples[i].1 == 1).count() as f64;
        let n = train_idx.len() as f64;
        let n0 = n - n1;
        if n0 == 0.0 || n1 == 0.0 {
            [1.0, 1.0]
        } else {
            [n / (2.0 * n0), n / (2.0 * n1)]
        }
    } else {
        [1.0, 1.0]
    };

    let mut report = TrainReport::default();
    let mut best: Option<(f64, f64, ParamStore)> = None;
    let mut since_best = 0;
    let mut order = train_idx.clone();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch.max(1)) {
            let (loss, grads) = {
                let mut g = Graph::new();
                let x = g.constant(batch_tensor(samples, chunk));
                let labels: Vec<usize> = chunk.iter().map(|&i| samples[i].1).collect();
                let drop_rng = (model.dropout > 0.0).then_some(&mut rng);
                let logits = model.forward(&mut g, x, drop_rng)?;
                let weights: Vec<f64> = labels.iter().map(|&l| class_weight[l]).collect();
                let loss = g.weighted_softmax_cross_entropy(logits, &labels, &weights)?;
                (g.value(loss).data()[0], g.backward(loss)?)
            };
            total += loss * chunk.len() as f64;
            model.store.accumulate(&grads);
            adam_step(&mut model.store, &adam);
        }
        report.train_loss.push(total / order.len() as f64);
        report.epochs_run = epoch + 1;

        if val_idx.is_empty() {
            continue;
        }
        let (f1, loss) = validate(&model, samples, &val_idx)?;
        report.validation_f1.push(f1);
        let improved = match &best {
            None => true,
            Some((bf, bl, _)) => f1 > *bf || (f1 == *bf && loss < *bl),
        };
        if improved {
            best = Some((f1, loss, model.store.clone()));
            report.best_epoch = epoch + 1;
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience > 0 && since_best >= config.patience {
                break;
            }
        }
    }
    if let Some((_, _, store)) = best {
        model.store = store;
    } else {
        report.best_epoch = report.epochs_run;
    }
    model.store.zero_grad();
    model.freeze();
    Ok((model, report))
}

fn batch_tensor(samples: &[(&[f64], usize)], idx: &[usize]) -> Tensor {
    let dim = samples[0].0.len();
    let mut data = Vec::with_capacity(idx.len() * dim);
    for &i in idx {
        data.extend_from_slice(samples[i].0);
    }
    Tensor::new(vec![idx.len(), dim], data).expect("batch shape matches data")
}

fn validate(model: &MlpClassifier, samples: &[(&[f64], usize)], idx: &[usize]) -> Result<(f64, f64)> {
    let mut preds = Vec::with_capacity(idx.len());
    let mut labels = Vec::with_capacity(idx.len());
    let mut loss = 0.0;
    for &i in idx {
        let p = model.predict_proba(samples[i].0)?;
        preds.push(usize::from(p[1] > p[0]));
        labels.push(samples[i].1);
        loss -= p[samples[i].1].max(f64::MIN_POSITIVE).ln();
    }
    Ok((f1_score(&preds, &labels)?, loss / idx.len() as f64))
}

/// Class-stratified holdout. Falls back to no validation split when a class
/// would be left without training samples.
fn holdout<R: Rng + ?Sized>(samples: &[(&[f64], usize)], fraction: f64, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let all: Vec<usize> = (0..samples.len()).collect();
    if fraction <= 0.0 {
        return (all, Vec::new());
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in 0..2 {
        let mut group: Vec<usize> = all.iter().copied().filter(|&i| samples[i].1 == class).collect();
        group.shuffle(rng);
        let n_val = (group.len() as f64 * fraction).round() as usize;
        if n_val >= group.len() {
            return (all, Vec::new());
        }
        val.extend_from_slice(&group[..n_val]);
        train.extend_from_slice(&group[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weight_classifier_is_uniform() {
        let mut c = MlpClassifier::new(ClassifierRole::Domain, 3, &ClassifierConfig::default(), 1).unwrap();
        for id in c.store.ids().collect::<Vec<_>>() {
            c.store.value_mut(id).fill(0.0);
        }
        assert_eq!(c.predict_proba(&[1.0, -2.0, 3.0]).unwrap(), [0.5, 0.5]);
        assert!(c.predict_proba(&[1.0]).is_err());
    }

    #[test]
    fn single_class_rejected() {
        let x = [0.0, 1.0];
        let samples = vec![(&x[..], 1), (&x[..], 1)];
        let err = train_classifier(&samples, ClassifierRole::FakeNews, &ClassifierConfig::default(), 0);
        assert!(matches!(err, Err(Error::DegenerateData(_))));
    }
}
