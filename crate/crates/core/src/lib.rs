//! Quantum channel analysis: contraction coefficients, decompositions,
//! entanglement measures, a noisy circuit simulator and capacity bounds.

pub mod bounds;
pub mod channel;
pub mod contraction;
pub mod decompose;
pub mod entanglement;
pub mod error;
pub mod io;
pub mod linalg;
pub mod optim;
pub mod rng;
pub mod simulator;
pub mod state;
pub mod tolerance;
pub mod verify;

pub use channel::{BlochAffine, ChannelSpec, ChoiMatrix, KrausChannel, Preset, StinespringIsometry};
pub use error::{Error, Result};
pub use state::DensityState;
pub use tolerance::Tolerances;
