//! Feedforward networks with trainable rational activations, reverse-mode
//! gradients and Adam.

mod activation;
mod adam;
mod network;
mod train;

use serde::{Deserialize, Serialize};

pub use activation::{ActivationGrad, RationalActivation, POLE_CLAMP};
pub use adam::Adam;
pub use network::{ActivationSharing, Layer, RationalNetwork, Tape};
pub use train::{mse, train, TrainOptions, TrainReport};

/// Serialized network with its optimizer state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub network: RationalNetwork,
    pub optimizer: Adam,
    pub seed: u64,
    pub epoch: usize,
}
