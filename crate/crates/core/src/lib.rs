//! Stereo primary-ambient decomposition and stereo-to-quad up-mixing.
//!
//! The processing chain is
//!
//! 1. [`stft::analyze`] a stereo [`AudioBuffer`] into complex tiles,
//! 2. estimate the per-tile 2×2 covariance ([`covariance`]),
//! 3. derive per-tile un-mixing matrices, either the 3×2 center-extraction
//!    Wiener filter ([`center`]) or the rotation-based ambient/primary pair
//!    ([`pad`]),
//! 4. apply them and [`stft::synthesize`] back to the time domain,
//! 5. optionally render a quad up-mix for one of the 31 dial positions and
//!    loudness-normalize it ([`upmix`]).
//!
//! [`pipeline`] wires these steps together; [`service`] exposes the up-mixer
//! as a local HTTP audition service.

pub mod audio_io;
pub mod center;
pub mod covariance;
mod error;
pub mod loudness;
pub mod pad;
pub mod pipeline;
pub mod service;
pub mod stft;
pub mod upmix;

pub use audio_io::{AudioBuffer, ChannelLabel, SampleFormat};
pub use covariance::{BinCovariance, CovarianceField};
pub use error::{Error, Result};
pub use pad::{PadOutput, RotationAngle, UnmixPair};
pub use pipeline::{Mode, PipelineConfig};
pub use stft::{Spectrogram, StftConfig};
pub use upmix::{DialSetting, QuadRender, Region};
