//! Network configuration, parameter layout and the forward pass.

mod config;
mod network;

pub use config::{BlockDesign, FusionMode, GatePlacement, NetworkConfig};
pub use network::{
    branch_weight_count, ca_gate, init_weights, load_from_scale2, param_count, param_specs, Network, ParamSpec,
    MIN_INPUT_EXTENT,
};
