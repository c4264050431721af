//! End-to-end decomposition and up-mix of time-domain audio.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::center::apply_ce;
use crate::covariance::{instantaneous_cov, smooth_time, CovarianceField};
use crate::loudness::integrated_loudness;
use crate::pad::apply_pad;
use crate::stft::{analyze, synthesize, Spectrogram};
use crate::upmix::{normalize_render, render, DialSetting, PadSignals, QuadRender};
use crate::{AudioBuffer, Error, Result, StftConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ce,
    #[default]
    Pad,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ce" => Ok(Mode::Ce),
            "pad" => Ok(Mode::Pad),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

/// Loudness normalization target for up-mix renders.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LoudnessTarget {
    /// Match the integrated loudness of the stereo input.
    #[default]
    MatchInput,
    Lufs(f64),
}

impl FromStr for LoudnessTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "match-input" {
            return Ok(LoudnessTarget::MatchInput);
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(LoudnessTarget::Lufs)
            .ok_or_else(|| Error::Config(format!("bad loudness target '{s}'")))
    }
}

impl fmt::Display for LoudnessTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoudnessTarget::MatchInput => f.write_str("match-input"),
            LoudnessTarget::Lufs(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for LoudnessTarget {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LoudnessTarget::MatchInput => s.serialize_str("match-input"),
            LoudnessTarget::Lufs(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for LoudnessTarget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(LoudnessTarget::Lufs(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub stft: StftConfig,
    pub cov_smooth_frames: usize,
    pub unmix_smooth_frames: usize,
    pub mode: Mode,
    pub loudness_target: LoudnessTarget,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stft: StftConfig::default(),
            cov_smooth_frames: 5,
            unmix_smooth_frames: 3,
            mode: Mode::Pad,
            loudness_target: LoudnessTarget::MatchInput,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        for (name, len) in [
            ("covariance smoothing", self.cov_smooth_frames),
            ("un-mixing smoothing", self.unmix_smooth_frames),
        ] {
            if len == 0 || len.is_multiple_of(2) {
                return Err(Error::Config(format!(
                    "{name} length must be odd and >= 1, got {len}"
                )));
            }
        }
        Ok(())
    }

    fn covariance(&self, spec: &Spectrogram) -> Result<CovarianceField> {
        let raw = instantaneous_cov(spec)?;
        Ok(smooth_time(&raw, self.cov_smooth_frames)?.regularize())
    }
}

/// Center-extraction stems, time domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CeStems {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub center: Vec<f64>,
}

pub fn decompose_pad(x: &AudioBuffer, config: &PipelineConfig) -> Result<PadSignals> {
    config.validate()?;
    x.require_stereo()?;
    let spec = analyze(x, &config.stft)?;
    let field = config.covariance(&spec)?;
    let out = apply_pad(&spec, &field, config.unmix_smooth_frames)?;
    drop(spec);
    let primary = synthesize(&out.primary, &config.stft, x.len(), x.sample_rate())?;
    let ambient = synthesize(&out.ambient, &config.stft, x.len(), x.sample_rate())?;
    PadSignals::new(primary, ambient)
}

pub fn decompose_ce(x: &AudioBuffer, config: &PipelineConfig) -> Result<CeStems> {
    config.validate()?;
    x.require_stereo()?;
    let spec = analyze(x, &config.stft)?;
    let field = config.covariance(&spec)?;
    let stems = apply_ce(&spec, &field)?;
    let mut channels = synthesize(&stems, &config.stft, x.len(), x.sample_rate())?
        .into_channels()
        .into_iter();
    let mut next = || channels.next().expect("three stems");
    Ok(CeStems {
        left: next(),
        right: next(),
        center: next(),
    })
}

/// A decomposed stereo item, ready to render any dial position.
#[derive(Debug, Clone)]
pub struct Upmixer {
    input: AudioBuffer,
    pad: PadSignals,
    input_loudness: f64,
}

impl Upmixer {
    pub fn new(input: AudioBuffer, config: &PipelineConfig) -> Result<Self> {
        let pad = decompose_pad(&input, config)?;
        Self::from_parts(input, pad)
    }

    pub fn from_parts(input: AudioBuffer, pad: PadSignals) -> Result<Self> {
        let input_loudness = integrated_loudness(&input)?;
        Ok(Upmixer {
            input,
            pad,
            input_loudness,
        })
    }

    pub fn input(&self) -> &AudioBuffer {
        &self.input
    }

    pub fn pad(&self) -> &PadSignals {
        &self.pad
    }

    pub fn input_loudness(&self) -> f64 {
        self.input_loudness
    }

    pub fn render_raw(&self, dial: DialSetting) -> Result<QuadRender> {
        render(&self.input, &self.pad, dial)
    }

    /// Render and normalize to `target`.
    pub fn render(&self, dial: DialSetting, target: LoudnessTarget) -> Result<QuadRender> {
        let lufs = match target {
            LoudnessTarget::MatchInput => self.input_loudness,
            LoudnessTarget::Lufs(v) => v,
        };
        normalize_render(self.render_raw(dial)?, lufs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_defaults_and_overrides() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"mode":"ce","loudness_target":-23}"#).unwrap();
        assert_eq!(cfg.mode, Mode::Ce);
        assert_eq!(cfg.loudness_target, LoudnessTarget::Lufs(-23.0));
        assert_eq!(cfg.cov_smooth_frames, 5);
        assert_eq!(cfg.stft.frame_len, 1024);
        let cfg: PipelineConfig = serde_json::from_str(r#"{"loudness_target":"match-input"}"#).unwrap();
        assert_eq!(cfg.loudness_target, LoudnessTarget::MatchInput);
        let back: PipelineConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn even_smoothing_is_rejected() {
        let cfg = PipelineConfig {
            unmix_smooth_frames: 4,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn mono_input_rejected() {
        let mono = AudioBuffer::new(48000, vec![vec![0.0; 4800]]).unwrap();
        let err = decompose_pad(&mono, &PipelineConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NotStereo(1)));
        assert!(err.to_string().contains("stereo input required"));
    }
}
