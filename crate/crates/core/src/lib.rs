//! Forward-inference core of a lightweight VITS-family text-to-speech model:
//! a text-to-PPG front end, a PPG-conditioned CVAE with a weight-shared flow
//! and an iSTFT waveform decoder, spectral discriminators, every training
//! objective evaluated forward-only, and an analytic parameter/FLOP counter.

pub mod complexity;
pub mod config;
pub mod discriminators;
pub mod dsp;
pub mod error;
pub mod io;
pub mod losses;
pub mod nn;
pub mod numerics;
pub mod ppg2wav;
pub mod text2ppg;
pub mod weights;

pub use config::ModelConfig;
pub use error::{Error, Result};
pub use weights::{init_weights, WeightStore};
