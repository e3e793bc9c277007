//! Standard layers built on [`Graph`] ops.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::{Error, Result};

/// Fully connected layer with `[in, out]` weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> Self {
        let weight = store.glorot(format!("{name}.weight"), input_dim, output_dim, rng);
        let bias = store.zeros(format!("{name}.bias"), &[output_dim]);
        Linear {
            weight,
            bias,
            input_dim,
            output_dim,
        }
    }

    pub fn forward<'a>(&self, g: &mut Graph<'a>, store: &'a ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        g.affine(x, w, b)
    }

    /// Graph-free `x·W + b` for a single row.
    pub fn eval(&self, store: &ParamStore, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::dim("linear", &[x.len()], &[self.input_dim]));
        }
        let w = store.value(self.weight).data();
        let mut out = store.value(self.bias).data().to_vec();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &w[i * self.output_dim..(i + 1) * self.output_dim];
            for (o, wv) in out.iter_mut().zip(row) {
                *o += xi * wv;
            }
        }
        Ok(out)
    }
}

/// Gated recurrent unit cell.
///
/// `r = σ(x·W_r + h·U_r + b_r)`, `z = σ(x·W_z + h·U_z + b_z)`,
/// `n = tanh(x·W_n + b_n + r ⊙ (h·U_n + b_hn))`, `h' = (1 − z) ⊙ n + z ⊙ h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GruCell {
    pub w_r: ParamId,
    pub w_z: ParamId,
    pub w_n: ParamId,
    pub u_r: ParamId,
    pub u_z: ParamId,
    pub u_n: ParamId,
    pub b_r: ParamId,
    pub b_z: ParamId,
    pub b_n: ParamId,
    pub b_hn: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

/// Graph handles for one binding of a [`GruCell`].
#[derive(Clone, Copy, Debug)]
pub struct BoundGru {
    w: [Var; 3],
    u: [Var; 3],
    b: [Var; 3],
    b_hn: Var,
    hidden_dim: usize,
}

impl GruCell {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Self {
        let w = |gate: &str, rows: usize, store: &mut ParamStore, rng: &mut R| {
            store.glorot(format!("{name}.{gate}"), rows, hidden_dim, rng)
        };
        let w_r = w("w_r", input_dim, store, rng);
        let w_z = w("w_z", input_dim, store, rng);
        let w_n = w("w_n", input_dim, store, rng);
        let u_r = w("u_r", hidden_dim, store, rng);
        let u_z = w("u_z", hidden_dim, store, rng);
        let u_n = w("u_n", hidden_dim, store, rng);
        GruCell {
            w_r,
            w_z,
            w_n,
            u_r,
            u_z,
            u_n,
            b_r: store.zeros(format!("{name}.b_r"), &[hidden_dim]),
            b_z: store.zeros(format!("{name}.b_z"), &[hidden_dim]),
            b_n: store.zeros(format!("{name}.b_n"), &[hidden_dim]),
            b_hn: store.zeros(format!("{name}.b_hn"), &[hidden_dim]),
            input_dim,
            hidden_dim,
        }
    }

    pub fn bind<'a>(&self, g: &mut Graph<'a>, store: &'a ParamStore) -> BoundGru {
        BoundGru {
            w: [
                g.param(store, self.w_r),
                g.param(store, self.w_z),
                g.param(store, self.w_n),
            ],
            u: [
                g.param(store, self.u_r),
                g.param(store, self.u_z),
                g.param(store, self.u_n),
            ],
            b: [
                g.param(store, self.b_r),
                g.param(store, self.b_z),
                g.param(store, self.b_n),
            ],
            b_hn: g.param(store, self.b_hn),
            hidden_dim: self.hidden_dim,
        }
    }

    /// One step for a `[batch, in]` input and `[batch, hidden]` state.
    pub fn forward<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        x: Var,
        h_prev: Var,
    ) -> Result<Var> {
        let bound = self.bind(g, store);
        bound.step(g, x, h_prev)
    }
}

impl BoundGru {
    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn step(&self, g: &mut Graph<'_>, x: Var, h: Var) -> Result<Var> {
        if g.shape(h).len() != 2 || g.shape(h)[1] != self.hidden_dim || g.shape(h)[0] != g.shape(x)[0] {
            return Err(Error::dim("gru_cell", g.shape(x), g.shape(h)));
        }
        let xr = g.affine(x, self.w[0], self.b[0])?;
        let hr = g.matmul(h, self.u[0])?;
        let r_pre = g.add(xr, hr)?;
        let r = g.sigmoid(r_pre);

        let xz = g.affine(x, self.w[1], self.b[1])?;
        let hz = g.matmul(h, self.u[1])?;
        let z_pre = g.add(xz, hz)?;
        let z = g.sigmoid(z_pre);

        let xn = g.affine(x, self.w[2], self.b[2])?;
        let hn = g.affine(h, self.u[2], self.b_hn)?;
        let rhn = g.mul(r, hn)?;
        let n_pre = g.add(xn, rhn)?;
        let n = g.tanh(n_pre);

        let one_minus_z = g.affine_scalar(z, -1.0, 1.0);
        let keep = g.mul(one_minus_z, n)?;
        let carry = g.mul(z, h)?;
        g.add(keep, carry)
    }

    /// Runs over the rows of a `[len, in]` sequence from a zero state and
    /// returns the `[len, hidden]` stack of states (reversed order when
    /// `reverse`, with rows still aligned to input positions).
    pub fn sequence(&self, g: &mut Graph<'_>, inputs: Var, reverse: bool) -> Result<Var> {
        let len = g.shape(inputs)[0];
        if len == 0 {
            return Err(Error::EmptyInput("gru sequence"));
        }
        let mut h = g.constant(Tensor::zeros(&[1, self.hidden_dim]));
        let mut states = vec![h; len];
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..len).rev())
        } else {
            Box::new(0..len)
        };
        for t in order {
            let x = if len == 1 {
                inputs
            } else {
                g.gather_rows(inputs, &[t])?
            };
            h = self.step(g, x, h)?;
            states[t] = h;
        }
        if len == 1 {
            return Ok(states[0]);
        }
        g.concat_rows(&states)
    }
}

/// Additive attention pooling: `score_i = v · tanh(W·k_i + b)`,
/// `weights = softmax(score)`, `context = Σ_i weights_i · k_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdditiveAttention {
    pub projection: Linear,
    pub context_vector: ParamId,
    pub key_dim: usize,
}

impl AdditiveAttention {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        key_dim: usize,
        attention_dim: usize,
        rng: &mut R,
    ) -> Self {
        let projection = Linear::new(store, &format!("{name}.proj"), key_dim, attention_dim, rng);
        let context_vector = store.glorot(format!("{name}.context"), attention_dim, 1, rng);
        AdditiveAttention {
            projection,
            context_vector,
            key_dim,
        }
    }

    /// Returns `(context [1, d], weights [1, n])`.
    pub fn forward<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        keys: Var,
    ) -> Result<(Var, Var)> {
        let shape = g.shape(keys).to_vec();
        if shape.len() != 2 || shape[0] == 0 {
            return Err(Error::EmptyInput("additive_attention"));
        }
        if shape[1] != self.key_dim {
            return Err(Error::dim("additive_attention", &shape, &[shape[0], self.key_dim]));
        }
        let n = shape[0];
        let projected = self.projection.forward(g, store, keys)?;
        let hidden = g.tanh(projected);
        let v = g.param(store, self.context_vector);
        let scores = g.matmul(hidden, v)?;
        let scores = g.reshape(scores, vec![1, n])?;
        let weights = g.softmax_rows(scores)?;
        let context = g.matmul(weights, keys)?;
        Ok((context, weights))
    }
}

/// Location-based attention: scores are a linear function of each key alone,
/// `score_i = w · k_i + b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationAttention {
    pub scorer: Linear,
    pub key_dim: usize,
}

impl LocationAttention {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, key_dim: usize, rng: &mut R) -> Self {
        LocationAttention {
            scorer: Linear::new(store, &format!("{name}.score"), key_dim, 1, rng),
            key_dim,
        }
    }

    pub fn forward<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        keys: Var,
    ) -> Result<(Var, Var)> {
        let shape = g.shape(keys).to_vec();
        if shape.len() != 2 || shape[0] == 0 {
            return Err(Error::EmptyInput("location_attention"));
        }
        let n = shape[0];
        let scores = self.scorer.forward(g, store, keys)?;
        let scores = g.reshape(scores, vec![1, n])?;
        let weights = g.softmax_rows(scores)?;
        let context = g.matmul(weights, keys)?;
        Ok((context, weights))
    }
}

/// Inverted dropout. Identity in eval mode or when `p == 0`.
pub fn dropout<R: Rng + ?Sized>(
    g: &mut Graph<'_>,
    input: Var,
    p: f64,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Config(format!("dropout probability {p} outside [0, 1)")));
    }
    if !training || p == 0.0 {
        return Ok(input);
    }
    let keep = 1.0 / (1.0 - p);
    let shape = g.shape(input).to_vec();
    let n = g.value(input).len();
    let mask: Vec<f64> = (0..n)
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
        .collect();
    let mask = g.constant(Tensor::from_parts(shape, mask));
    g.mul(input, mask)
}

/// Mean cross-entropy of softmax(logits) against class labels, together with
/// the probabilities.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let mut g = Graph::new();
    let x = g.constant_ref(logits);
    let loss = g.softmax_cross_entropy(x, labels)?;
    let probs = g.xent_probs(loss).cloned().expect("cross-entropy node caches probabilities");
    Ok((g.value(loss).data()[0], probs))
}

/// Row-wise softmax of a plain slice.
pub fn softmax(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    super::graph::softmax_in_place(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn affine_identity_and_bias_only() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::row(vec![1.0, 2.0]));
        let w = g.constant(Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let b = g.constant(Tensor::new(vec![2], vec![0.0, 0.0]).unwrap());
        let y = g.affine(x, w, b).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 2.0]);

        let x = g.constant(Tensor::row(vec![1.0, 1.0]));
        let w = g.constant(Tensor::zeros(&[2, 2]));
        let b = g.constant(Tensor::new(vec![2], vec![3.0, 4.0]).unwrap());
        let y = g.affine(x, w, b).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 4.0]);
    }

    #[test]
    fn affine_shape_mismatch_names_both_shapes() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::row(vec![1.0, 2.0, 3.0]));
        let w = g.constant(Tensor::zeros(&[2, 2]));
        let b = g.constant(Tensor::zeros(&[2]));
        let err = g.affine(x, w, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[1, 3]") && msg.contains("[2, 2]"), "{msg}");
    }

    #[test]
    fn cross_entropy_symmetric_and_stable() {
        let (loss, p) = softmax_cross_entropy(&Tensor::row(vec![0.0, 0.0]), &[0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(p.data(), &[0.5, 0.5]);

        let (loss, p) = softmax_cross_entropy(&Tensor::row(vec![1000.0, 0.0]), &[0]).unwrap();
        assert!(loss.abs() < 1e-12 && loss.is_finite());
        assert!(p.all_finite());
    }

    #[test]
    fn cross_entropy_label_out_of_range() {
        let r = softmax_cross_entropy(&Tensor::row(vec![0.0, 0.0]), &[2]);
        assert!(matches!(r, Err(Error::Index { .. })));
    }

    #[test]
    fn gru_zero_everything_is_zero() {
        let mut store = ParamStore::new();
        let cell = GruCell::new(&mut store, "gru", 3, 4, &mut rng());
        for id in store.ids().collect::<Vec<_>>() {
            store.value_mut(id).fill(0.0);
        }
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[1, 3]));
        let h = g.constant(Tensor::zeros(&[1, 4]));
        let out = cell.forward(&mut g, &store, x, h).unwrap();
        assert!(g.value(out).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gru_saturated_update_gate_carries_state() {
        let mut store = ParamStore::new();
        let cell = GruCell::new(&mut store, "gru", 3, 4, &mut rng());
        store.value_mut(cell.b_z).fill(50.0);
        let mut g = Graph::new();
        let x = g.constant(Tensor::row(vec![0.3, -0.2, 0.9]));
        let hp = vec![0.1, -0.5, 0.7, 0.2];
        let h = g.constant(Tensor::row(hp.clone()));
        let out = cell.forward(&mut g, &store, x, h).unwrap();
        for (a, b) in g.value(out).data().iter().zip(&hp) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn gru_rejects_bad_state_shape() {
        let mut store = ParamStore::new();
        let cell = GruCell::new(&mut store, "gru", 3, 4, &mut rng());
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[1, 3]));
        let h = g.constant(Tensor::zeros(&[1, 5]));
        assert!(matches!(cell.forward(&mut g, &store, x, h), Err(Error::Dimension { .. })));
    }

    #[test]
    fn attention_single_and_identical_keys() {
        let mut store = ParamStore::new();
        let att = AdditiveAttention::new(&mut store, "att", 3, 5, &mut rng());
        let mut g = Graph::new();
        let k = g.constant(Tensor::row(vec![0.2, -0.4, 1.0]));
        let (ctx, w) = att.forward(&mut g, &store, k).unwrap();
        assert_eq!(g.value(w).data(), &[1.0]);
        assert_eq!(g.value(ctx).data(), &[0.2, -0.4, 1.0]);

        let k2 = g.constant(Tensor::from_rows(&[vec![0.2, -0.4, 1.0], vec![0.2, -0.4, 1.0]]).unwrap());
        let (_, w) = att.forward(&mut g, &store, k2).unwrap();
        assert_eq!(g.value(w).data(), &[0.5, 0.5]);
    }

    #[test]
    fn dropout_modes() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::full(&[1, 8], 2.5));
        let mut r = rng();
        assert_eq!(dropout(&mut g, x, 0.0, true, &mut r).unwrap(), x);
        assert_eq!(dropout(&mut g, x, 0.7, false, &mut r).unwrap(), x);
        assert!(matches!(dropout(&mut g, x, 1.0, true, &mut r), Err(Error::Config(_))));
        assert!(matches!(dropout(&mut g, x, -0.1, true, &mut r), Err(Error::Config(_))));
    }

    #[test]
    fn dropout_preserves_mean() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::full(&[1, 100_000], 1.0));
        let y = dropout(&mut g, x, 0.5, true, &mut rng()).unwrap();
        let mean = g.value(y).data().iter().sum::<f64>() / 100_000.0;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }
}
