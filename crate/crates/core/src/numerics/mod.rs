//! Dense `f64` tensors, a reverse-mode tape, standard layers and Adam.

mod adam;
mod graph;
pub mod layers;
mod params;
mod tensor;

pub use adam::{adam_step, AdamConfig};
pub use graph::{sigmoid, Graph, Var};
pub use layers::{
    dropout, softmax, softmax_cross_entropy, AdditiveAttention, BoundGru, GruCell, Linear,
    LocationAttention,
};
pub use params::{Gradients, ParamId, ParamLayout, ParamStore, Parameter};
pub use tensor::Tensor;
