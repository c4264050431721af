//! Short-time Fourier transform with a sine window and zero-padded frames.
//!
//! Analysis: the signal is padded with `frame_len` zeros on both sides, cut
//! into frames at `hop` spacing, multiplied by the sine window, extended with
//! `frame_len * (zero_pad_factor - 1)` zeros and transformed. Only the
//! `transform_size / 2 + 1` non-negative-frequency bins are stored.
//!
//! Synthesis: inverse transform, keep the first `frame_len` samples, apply the
//! same sine window and overlap-add. With a 50% hop the squared sine window
//! sums to one, so an unmodified spectrogram reconstructs the input.
//!
//! Scaling: the forward transform is unnormalized. For every frame,
//! `|X[0]|² + |X[K-1]|² + 2·Σ_{0<k<K-1} |X[k]|² = transform_size · Σ_n (w[n]·x[n])²`.

use std::sync::Arc;

use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use crate::{AudioBuffer, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub zero_pad_factor: usize,
    pub window: Window,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            frame_len: 1024,
            hop: 512,
            zero_pad_factor: 2,
            window: Window::Sine,
        }
    }
}

impl StftConfig {
    pub fn transform_size(&self) -> usize {
        self.frame_len * self.zero_pad_factor
    }

    pub fn bins(&self) -> usize {
        self.transform_size() / 2 + 1
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn frames_for(&self, len: usize) -> usize {
        (len + self.frame_len).div_ceil(self.hop)
    }

    /// The sine window only overlap-adds to one (squared) at a 50% hop.
    pub fn validate(&self) -> Result<()> {
        if self.frame_len < 2 || !self.frame_len.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "frame length must be even and >= 2, got {}",
                self.frame_len
            )));
        }
        if self.hop * 2 != self.frame_len {
            return Err(Error::Config(format!(
                "hop must be half the frame length ({}), got {}",
                self.frame_len / 2,
                self.hop
            )));
        }
        if self.zero_pad_factor < 1 {
            return Err(Error::Config("zero-pad factor must be >= 1".into()));
        }
        Ok(())
    }

    pub fn window(&self) -> Vec<f64> {
        match self.window {
            Window::Sine => sine_window(self.frame_len),
        }
    }
}

/// `w[n] = sin(π (n + ½) / len)`.
pub fn sine_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| (std::f64::consts::PI * (n as f64 + 0.5) / len as f64).sin())
        .collect()
}

/// Complex tiles for one or more channels, stored frame-major per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    frames: usize,
    bins: usize,
    channels: Vec<Vec<Complex64>>,
    config: StftConfig,
    original_len: usize,
}

impl Spectrogram {
    pub fn zeros(channels: usize, config: StftConfig, original_len: usize) -> Self {
        let frames = config.frames_for(original_len);
        let bins = config.bins();
        Spectrogram {
            frames,
            bins,
            channels: vec![vec![Complex64::new(0.0, 0.0); frames * bins]; channels],
            config,
            original_len,
        }
    }

    /// Same geometry as `self`, with the given tile data.
    pub fn with_channels(&self, channels: Vec<Vec<Complex64>>) -> Result<Self> {
        if let Some(bad) = channels.iter().find(|c| c.len() != self.frames * self.bins) {
            return Err(Error::LengthMismatch {
                expected: self.frames * self.bins,
                actual: bad.len(),
            });
        }
        Ok(Spectrogram {
            channels,
            ..self.clone_geometry()
        })
    }

    fn clone_geometry(&self) -> Self {
        Spectrogram {
            frames: self.frames,
            bins: self.bins,
            channels: Vec::new(),
            config: self.config,
            original_len: self.original_len,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn original_len(&self) -> usize {
        self.original_len
    }

    pub fn channel(&self, ch: usize) -> &[Complex64] {
        &self.channels[ch]
    }

    pub fn channel_mut(&mut self, ch: usize) -> &mut [Complex64] {
        &mut self.channels[ch]
    }

    pub fn into_channels(self) -> Vec<Vec<Complex64>> {
        self.channels
    }

    pub fn tile(&self, ch: usize, frame: usize, bin: usize) -> Complex64 {
        self.channels[ch][frame * self.bins + bin]
    }

    pub fn frame(&self, ch: usize, frame: usize) -> &[Complex64] {
        &self.channels[ch][frame * self.bins..(frame + 1) * self.bins]
    }

    /// Multiply every tile by a real factor.
    pub fn scale(&mut self, factor: f64) {
        for tile in self.channels.iter_mut().flatten() {
            *tile *= factor;
        }
    }

    pub fn require_stereo(&self) -> Result<()> {
        if self.num_channels() == 2 {
            Ok(())
        } else {
            Err(Error::NotStereo(self.num_channels()))
        }
    }
}

struct Engine {
    config: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl Engine {
    fn new(config: StftConfig) -> Result<Self> {
        config.validate()?;
        let mut planner = RealFftPlanner::new();
        Ok(Engine {
            config,
            window: config.window(),
            forward: planner.plan_fft_forward(config.transform_size()),
            inverse: planner.plan_fft_inverse(config.transform_size()),
        })
    }

    fn analyze_channel(&self, signal: &[f64], out: &mut [Complex64]) {
        let n = self.config.frame_len;
        let hop = self.config.hop;
        let bins = self.config.bins();
        let frames = self.config.frames_for(signal.len());
        let mut input = self.forward.make_input_vec();
        let mut scratch = self.forward.make_scratch_vec();

        for t in 0..frames {
            input.fill(0.0);
            // padded index p corresponds to signal index p - n
            let start = t * hop;
            for (i, w) in self.window.iter().enumerate() {
                let p = start + i;
                if p >= n && p - n < signal.len() {
                    input[i] = signal[p - n] * w;
                }
            }
            let dst = &mut out[t * bins..(t + 1) * bins];
            self.forward
                .process_with_scratch(&mut input, dst, &mut scratch)
                .expect("fft buffer sizes are fixed by the plan");
        }
    }

    fn synthesize_channel(&self, tiles: &[Complex64], frames: usize, out_len: usize) -> Vec<f64> {
        let n = self.config.frame_len;
        let hop = self.config.hop;
        let bins = self.config.bins();
        let norm = 1.0 / self.config.transform_size() as f64;
        let mut acc = vec![0.0; (frames - 1) * hop + n];
        let mut spectrum = self.inverse.make_input_vec();
        let mut output = self.inverse.make_output_vec();
        let mut scratch = self.inverse.make_scratch_vec();

        for t in 0..frames {
            spectrum.copy_from_slice(&tiles[t * bins..(t + 1) * bins]);
            spectrum[0].im = 0.0;
            spectrum[bins - 1].im = 0.0;
            self.inverse
                .process_with_scratch(&mut spectrum, &mut output, &mut scratch)
                .expect("fft buffer sizes are fixed by the plan");
            let dst = &mut acc[t * hop..t * hop + n];
            for ((d, &y), &w) in dst.iter_mut().zip(&output[..n]).zip(&self.window) {
                *d += y * w * norm;
            }
        }

        let mut signal: Vec<f64> = acc.into_iter().skip(n).take(out_len).collect();
        signal.resize(out_len, 0.0);
        signal
    }
}

/// Forward transform of a stereo buffer.
pub fn analyze(buf: &AudioBuffer, config: &StftConfig) -> Result<Spectrogram> {
    buf.require_stereo()?;
    analyze_channels(buf, config)
}

/// Forward transform of every channel of `buf`.
pub fn analyze_channels(buf: &AudioBuffer, config: &StftConfig) -> Result<Spectrogram> {
    let engine = Engine::new(*config)?;
    let mut spec = Spectrogram::zeros(buf.num_channels(), *config, buf.len());
    for (ch, signal) in buf.channels().iter().enumerate() {
        engine.analyze_channel(signal, spec.channel_mut(ch));
    }
    Ok(spec)
}

/// Weighted overlap-add synthesis of every channel, truncated to `out_len`.
pub fn synthesize(
    spec: &Spectrogram,
    config: &StftConfig,
    out_len: usize,
    sample_rate: u32,
) -> Result<AudioBuffer> {
    if spec.config() != config || spec.bins() != config.bins() {
        return Err(Error::Config(
            "spectrogram was produced with a different STFT configuration".into(),
        ));
    }
    let engine = Engine::new(*config)?;
    let channels = spec
        .channels
        .iter()
        .map(|tiles| engine.synthesize_channel(tiles, spec.frames(), out_len))
        .collect();
    AudioBuffer::new(sample_rate, channels)
}
