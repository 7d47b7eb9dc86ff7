//! Minimal dense tensors with reverse-mode differentiation.
//!
//! A [`Graph`] records operations on 2-D tensors and replays them backwards.
//! Trainable values live in a [`ParamStore`], which the graph borrows while
//! recording; gradients come back as a detached [`Gradients`] value that is
//! then accumulated into the store and consumed by [`adam_step`].

mod gradcheck;
mod graph;
mod layers;
mod params;
mod real;
mod tensor;

pub use gradcheck::{gradient_check, relative_error};
pub use graph::{Gradients, Graph, NodeId};
pub use layers::{
    affine, conv1d_maxpool, lstm_cell_step, scaled_dot_attention, Conv1d, Dense, LayerNorm, LstmCell, LstmLayer,
};
pub use params::{adam_step, clip_grad_norm, AdamConfig, Initializer, Param, ParamId, ParamStore};
pub use real::Real;
pub use tensor::Tensor;
