//! ReLU networks, flow-map datasets, and training of the flow surrogate.

mod mlp;
mod surrogate;
mod train;

pub use mlp::MlpParams;
pub use surrogate::{
    encode_input, encode_target, generate_dataset, identity_surrogate, sample_states,
    surrogate_flow, surrogate_rmse, surrogate_sup_error, train_flow_net, FlowDataset,
    FlowSurrogate, MODEL_FORMAT,
};
pub use train::{train_regression, AdamConfig, EpochRecord, TrainConfig};

/// `y = A_L x_L + b_L` with `x_{l+1} = ReLU(A_l x_l + b_l)`.
pub fn mlp_forward(params: &MlpParams, x: &[f64]) -> crate::Result<Vec<f64>> {
    params.forward(x)
}

/// Number of strictly nonzero weights and biases.
pub fn network_size(params: &MlpParams) -> usize {
    params.size()
}

/// Number of hidden layers.
pub fn network_depth(params: &MlpParams) -> usize {
    params.depth()
}
