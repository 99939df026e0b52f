//! Spiking neural networks of leaky integrate-and-fire neurons, trained with
//! surrogate-gradient backpropagation through time. Synaptic weights and
//! per-neuron firing thresholds are both learnable.

pub mod data;
pub mod error;
pub mod grad;
pub mod layers;
pub mod net;
pub mod neuron;
pub mod par;
pub mod persist;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
