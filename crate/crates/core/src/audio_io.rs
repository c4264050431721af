//! PCM WAV input/output.
//!
//! Samples are held as `f64` in nominal full scale ±1.0. Integer formats are
//! scaled by `2^(bits-1)`, so the largest positive 16-bit code 32767 maps to
//! 32767/32768.
//!
//! Channel layout is carried by order only: the layout of a file is implied by
//! its channel count (see [`ChannelLabel::default_layout`]). No sidecar
//! metadata is written.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MAX_CHANNELS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelLabel {
    Mono,
    FL,
    FR,
    C,
    LFE,
    SL,
    SR,
}

impl ChannelLabel {
    /// The order-only layout convention used for files with `channels` channels.
    pub fn default_layout(channels: usize) -> Option<Vec<ChannelLabel>> {
        use ChannelLabel::*;
        let layout = match channels {
            1 => vec![Mono],
            2 => vec![FL, FR],
            3 => vec![FL, FR, C],
            4 => vec![FL, FR, SL, SR],
            5 => vec![FL, FR, C, SL, SR],
            6 => vec![FL, FR, C, LFE, SL, SR],
            _ => return None,
        };
        Some(layout)
    }

    /// BS.1770 channel weight. LFE does not contribute to loudness.
    pub fn loudness_weight(self) -> f64 {
        match self {
            ChannelLabel::SL | ChannelLabel::SR => 1.41,
            ChannelLabel::LFE => 0.0,
            _ => 1.0,
        }
    }
}

impl fmt::Display for ChannelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SampleFormat {
    Pcm16,
    Pcm24,
    #[default]
    Float32,
}

impl std::str::FromStr for SampleFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pcm16" => Ok(SampleFormat::Pcm16),
            "pcm24" => Ok(SampleFormat::Pcm24),
            "float32" => Ok(SampleFormat::Float32),
            other => Err(Error::Config(format!("unknown sample format '{other}'"))),
        }
    }
}

/// Planar multichannel audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    sample_rate: u32,
    channels: Vec<Vec<f64>>,
    layout: Vec<ChannelLabel>,
}

impl AudioBuffer {
    /// Build a buffer with the default layout for its channel count.
    pub fn new(sample_rate: u32, channels: Vec<Vec<f64>>) -> Result<Self> {
        let layout = ChannelLabel::default_layout(channels.len()).ok_or_else(|| {
            Error::InvalidBuffer(format!(
                "{} channels, expected 1..={MAX_CHANNELS}",
                channels.len()
            ))
        })?;
        Self::with_layout(sample_rate, channels, layout)
    }

    pub fn with_layout(
        sample_rate: u32,
        channels: Vec<Vec<f64>>,
        layout: Vec<ChannelLabel>,
    ) -> Result<Self> {
        if channels.is_empty() || channels.len() > MAX_CHANNELS {
            return Err(Error::InvalidBuffer(format!(
                "{} channels, expected 1..={MAX_CHANNELS}",
                channels.len()
            )));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidBuffer("sample rate must be positive".into()));
        }
        if layout.len() != channels.len() {
            return Err(Error::InvalidBuffer(format!(
                "layout has {} labels for {} channels",
                layout.len(),
                channels.len()
            )));
        }
        let len = channels[0].len();
        if let Some(bad) = channels.iter().find(|c| c.len() != len) {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: bad.len(),
            });
        }
        Ok(AudioBuffer {
            sample_rate,
            channels,
            layout,
        })
    }

    pub fn stereo(sample_rate: u32, left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        Self::new(sample_rate, vec![left, right])
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn layout(&self) -> &[ChannelLabel] {
        &self.layout
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.channels[index]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    /// Errors unless the buffer has exactly two channels.
    pub fn require_stereo(&self) -> Result<()> {
        if self.num_channels() == 2 {
            Ok(())
        } else {
            Err(Error::NotStereo(self.num_channels()))
        }
    }

    /// Sum of squared samples over all channels.
    pub fn energy(&self) -> f64 {
        self.channels.iter().flatten().map(|s| s * s).sum()
    }

    /// Multiply every sample by a linear gain.
    pub fn scaled(&self, gain: f64) -> AudioBuffer {
        AudioBuffer {
            sample_rate: self.sample_rate,
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().map(|s| s * gain).collect())
                .collect(),
            layout: self.layout.clone(),
        }
    }

    pub fn peak(&self) -> f64 {
        self.channels
            .iter()
            .flatten()
            .fold(0.0_f64, |m, s| m.max(s.abs()))
    }
}

/// Outcome of a write; integer formats clamp rather than fail.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WriteReport {
    pub clipped_samples: usize,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let file = File::open(path.as_ref())?;
    read_wav_from(BufReader::new(file))
}

pub fn read_wav_from<R: Read>(reader: R) -> Result<AudioBuffer> {
    let mut reader = hound::WavReader::new(reader)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 || channels > MAX_CHANNELS {
        return Err(Error::UnsupportedFormat(format!("{channels} channels")));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()?,
        (hound::SampleFormat::Int, 24) => reader
            .samples::<i32>()
            .map(|s| s.map(|v| v as f64 / 8_388_608.0))
            .collect::<Result<_, _>>()?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::UnsupportedFormat(format!("{fmt:?} {bits}-bit")));
        }
    };
    if !interleaved.len().is_multiple_of(channels) {
        return Err(Error::Parse("truncated file: partial sample frame".into()));
    }

    let frames = interleaved.len() / channels;
    let mut planar = vec![Vec::with_capacity(frames); channels];
    for frame in interleaved.chunks_exact(channels) {
        for (ch, &s) in planar.iter_mut().zip(frame) {
            ch.push(s);
        }
    }
    AudioBuffer::new(spec.sample_rate, planar)
}

pub fn write_wav(
    path: impl AsRef<Path>,
    buf: &AudioBuffer,
    format: SampleFormat,
) -> Result<WriteReport> {
    let file = File::create(path.as_ref())?;
    let report = write_wav_to(BufWriter::new(file), buf, format)?;
    if report.clipped_samples > 0 {
        log::warn!(
            "{}: {} samples clipped to full scale",
            path.as_ref().display(),
            report.clipped_samples
        );
    }
    Ok(report)
}

pub fn write_wav_to<W: Write + Seek>(
    writer: W,
    buf: &AudioBuffer,
    format: SampleFormat,
) -> Result<WriteReport> {
    let (bits, sample_format) = match format {
        SampleFormat::Pcm16 => (16, hound::SampleFormat::Int),
        SampleFormat::Pcm24 => (24, hound::SampleFormat::Int),
        SampleFormat::Float32 => (32, hound::SampleFormat::Float),
    };
    let spec = hound::WavSpec {
        channels: buf.num_channels() as u16,
        sample_rate: buf.sample_rate,
        bits_per_sample: bits,
        sample_format,
    };
    let mut writer = hound::WavWriter::new(writer, spec)?;
    let mut report = WriteReport::default();

    for i in 0..buf.len() {
        for ch in &buf.channels {
            let s = ch[i];
            match format {
                SampleFormat::Float32 => writer.write_sample(s as f32)?,
                SampleFormat::Pcm16 => {
                    let (v, clipped) = quantize(s, 32768.0);
                    report.clipped_samples += clipped as usize;
                    writer.write_sample(v as i16)?
                }
                SampleFormat::Pcm24 => {
                    let (v, clipped) = quantize(s, 8_388_608.0);
                    report.clipped_samples += clipped as usize;
                    writer.write_sample(v)?
                }
            }
        }
    }
    writer.finalize()?;
    Ok(report)
}

/// Scale to an integer code, saturating at `[-scale, scale - 1]`.
fn quantize(sample: f64, scale: f64) -> (i32, bool) {
    let clipped = sample.abs() > 1.0 || sample.is_nan();
    let code = (sample * scale).round().clamp(-scale, scale - 1.0);
    let code = if code.is_nan() { 0.0 } else { code };
    (code as i32, clipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn roundtrip(buf: &AudioBuffer, format: SampleFormat) -> (AudioBuffer, WriteReport) {
        let mut bytes = Cursor::new(Vec::new());
        let report = write_wav_to(&mut bytes, buf, format).unwrap();
        (read_wav_from(Cursor::new(bytes.into_inner())).unwrap(), report)
    }

    #[test]
    fn pcm16_full_scale_positive() {
        let buf = AudioBuffer::stereo(48000, vec![32767.0 / 32768.0], vec![-1.0]).unwrap();
        let (back, report) = roundtrip(&buf, SampleFormat::Pcm16);
        assert_eq!(report.clipped_samples, 0);
        assert_eq!(back.channel(0)[0], 32767.0 / 32768.0);
        assert_eq!(back.channel(1)[0], -1.0);
    }

    #[test]
    fn mono_float_zeros() {
        let buf = AudioBuffer::new(48000, vec![vec![0.0; 480]]).unwrap();
        let (back, _) = roundtrip(&buf, SampleFormat::Float32);
        assert_eq!(back.num_channels(), 1);
        assert_eq!(back.sample_rate(), 48000);
        assert!(back.channel(0).iter().all(|&s| s == 0.0));
        assert_eq!(back.layout(), &[ChannelLabel::Mono]);
    }

    #[test]
    fn float32_is_bit_identical() {
        let samples: Vec<f64> = (0..1000)
            .map(|i| ((i as f64 * 0.37).sin() * 0.9) as f32 as f64)
            .collect();
        let buf = AudioBuffer::stereo(44100, samples.clone(), samples.iter().map(|s| -s).collect())
            .unwrap();
        let (back, _) = roundtrip(&buf, SampleFormat::Float32);
        assert_eq!(back, buf);
    }

    #[test]
    fn pcm16_clips_and_counts() {
        let buf = AudioBuffer::stereo(48000, vec![1.5, 0.0, -2.0], vec![0.5, 1.0, 0.0]).unwrap();
        let (back, report) = roundtrip(&buf, SampleFormat::Pcm16);
        assert_eq!(report.clipped_samples, 2);
        assert_eq!(back.channel(0)[0], 32767.0 / 32768.0);
        assert_eq!(back.channel(0)[2], -1.0);
        // exactly 1.0 saturates but is not an over-range sample
        assert_eq!(back.channel(1)[1], 32767.0 / 32768.0);
    }

    #[test]
    fn pcm24_quantization_error_is_bounded() {
        let samples: Vec<f64> = (0..500).map(|i| (i as f64 * 0.01).cos() * 0.7).collect();
        let buf = AudioBuffer::stereo(48000, samples.clone(), samples).unwrap();
        let (back, _) = roundtrip(&buf, SampleFormat::Pcm24);
        for (a, b) in buf.channel(0).iter().zip(back.channel(0)) {
            assert!((a - b).abs() <= 0.5 / 8_388_608.0 + 1e-15);
        }
    }

    #[test]
    fn quad_layout_survives_roundtrip() {
        let chans: Vec<Vec<f64>> = (0..4).map(|c| vec![c as f64 * 0.1; 64]).collect();
        let buf = AudioBuffer::new(48000, chans).unwrap();
        let (back, _) = roundtrip(&buf, SampleFormat::Float32);
        assert_eq!(
            back.layout(),
            &[ChannelLabel::FL, ChannelLabel::FR, ChannelLabel::SL, ChannelLabel::SR]
        );
        for c in 0..4 {
            let expected: Vec<f64> = buf.channel(c).iter().map(|&v| v as f32 as f64).collect();
            assert_eq!(back.channel(c), expected.as_slice());
        }
    }

    #[test]
    fn rejects_eight_bit_pcm() {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 8,
            sample_format: hound::SampleFormat::Int,
        };
        let mut bytes = Cursor::new(Vec::new());
        let mut w = hound::WavWriter::new(&mut bytes, spec).unwrap();
        w.write_sample(3i8).unwrap();
        w.finalize().unwrap();
        let err = read_wav_from(Cursor::new(bytes.into_inner())).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat(_)), "{err}");
        assert!(err.to_string().starts_with("unsupported format"));
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let buf = AudioBuffer::stereo(48000, vec![0.25; 100], vec![0.5; 100]).unwrap();
        let mut bytes = Cursor::new(Vec::new());
        write_wav_to(&mut bytes, &buf, SampleFormat::Pcm16).unwrap();
        let mut bytes = bytes.into_inner();
        bytes.truncate(bytes.len() - 51);
        let err = read_wav_from(Cursor::new(bytes)).unwrap_err();
        assert!(matches!(err, Error::Parse(_)), "{err}");
    }

    #[test]
    fn not_a_wav_is_a_parse_error() {
        let err = read_wav_from(Cursor::new(b"definitely not RIFF".to_vec())).unwrap_err();
        assert!(matches!(err, Error::Parse(_)), "{err}");
    }

    #[test]
    fn unequal_channels_rejected() {
        let err = AudioBuffer::stereo(48000, vec![0.0; 3], vec![0.0; 2]).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { .. }));
        let err = AudioBuffer::with_layout(48000, vec![vec![0.0]], vec![]).unwrap_err();
        assert!(matches!(err, Error::InvalidBuffer(_)));
    }
}
