//! Signal-processing bridge between waveforms and spectra.

pub mod mel;
pub mod stft;

pub use mel::{log_mel_from_magnitude, mel_spectrogram, MelConfig, LOG_FLOOR};
pub use stft::{istft, linear_spectrogram, stft, ComplexSpectrum, StftConfig, Waveform, SAMPLE_RATE};
