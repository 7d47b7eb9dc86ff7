//! Linear models and the multi-layer perceptron over TF-IDF or weighted
//! embedding features.

mod linear;
mod mlp;

pub use linear::{pa_update, train_linear, LinearConfig, LinearKind, LinearModel};
pub use mlp::{train_mlp, MlpConfig, MlpModel};
