//! Parameters, small layers and the optimizer shared by every model part.

mod optim;
mod params;

pub use optim::{cosine_rate, Optimizer, OptimizerConfig, OptimizerKind};
pub use params::{Binding, Linear, Mlp, ParamId, ParamStore};
