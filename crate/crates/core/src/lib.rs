//! Orientation-aware single-image super-resolution on the CPU.
//!
//! The crate covers dense tensors, reverse-mode autodiff for the handful of
//! ops the network needs, the network itself, training (Huber loss + Adam),
//! image processing and metrics, and the training data pipeline.

pub mod data;
pub mod error;
pub mod imaging;
pub mod model;
pub mod optim;
pub mod ops;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{BlockDesign, FusionMode, GatePlacement, Network, NetworkConfig};
pub use tensor::{Element, Shape, Tensor};
