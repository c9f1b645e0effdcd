//! Differentiable neural operations and the reverse-mode tape that chains them.
//!
//! Each op is a pure forward function plus an explicit backward function;
//! [`Tape`] records executed ops and replays the backward rules in reverse.

mod activation;
mod conv;
mod linear;
mod param;
mod pool;
mod shuffle;
mod tape;

pub use activation::{relu, relu_backward, sigmoid, sigmoid_backward};
pub use conv::{conv2d, conv2d_backward, ConvGrads};
pub use linear::{fully_connected, fully_connected_backward, LinearGrads};
pub use param::{ParamId, ParamStore, Parameter};
pub use pool::{channel_scale, channel_scale_backward, global_avg_pool, global_avg_pool_backward};
pub use shuffle::{pixel_shuffle, pixel_unshuffle};
pub use tape::{Eager, Gradients, Graph, Tape, Var};
