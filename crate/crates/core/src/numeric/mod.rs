//! Dense actor-critic network, its gradients, and the Adam optimizer.

mod adam;
mod checkpoint;
mod finite_diff;
mod network;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use finite_diff::{finite_diff_gradient, max_relative_error, relative_error, DEFAULT_STEP};
pub use network::{
    backprop, forward, glorot_bound, init_params, Activation, ForwardTrace, GradientSet, LayerShape,
    NetworkConfig, NetworkOutput, ParameterSet,
};
