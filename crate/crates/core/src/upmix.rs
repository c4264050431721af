//! Stereo-to-quad rendering controlled by a 31-position dial.
//!
//! | dial  | region     | FL / FR                   | SL / SR          |
//! |-------|------------|---------------------------|------------------|
//! | 0–4   | narrowing  | `a·x_L + (1−a)·x_R`, mirror | silent         |
//! | 5–20  | relocation | `p + g·a`                 | `(1 − g)·a`      |
//! | 21–30 | boost      | `p`                       | `b·a`            |
//!
//! `g` and `b` are linear amplitudes converted from the tabulated dB values.
//! Dial 5 (`g = 0 dB`) is the unprocessed stereo reference.

use serde::Serialize;

pub use crate::loudness::{integrated_loudness, normalize_to};
use crate::{AudioBuffer, ChannelLabel, Error, Result};

pub const DIAL_POSITIONS: usize = 31;

/// Index of the unprocessed reference position.
pub const REFERENCE_DIAL: usize = 5;

const NARROWING: [f64; 5] = [0.5, 0.57, 0.66, 0.76, 0.87];
const RELOCATION_DB: [f64; 16] = [
    0.0, -1.5, -3.0, -5.0, -7.5, -10.5, -14.0, -18.0, -23.0, -28.0, -34.0, -41.0, -49.0, -59.0,
    -76.0, -96.0,
];
const BOOST_DB: [f64; 10] = [1.0, 3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0, 17.0, 20.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "region", rename_all = "lowercase")]
pub enum Region {
    /// Cross-mix toward dual mono with coefficient `a`.
    Narrowing { a: f64 },
    /// Front ambient gain in dB; the complement goes to the rears.
    Relocation { gain_db: f64 },
    /// Rear ambient boost in dB; fronts carry only the primary part.
    Boost { gain_db: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DialSetting {
    pub index: usize,
    #[serde(flatten)]
    pub region: Region,
}

impl DialSetting {
    pub fn new(index: usize) -> Result<Self> {
        let region = match index {
            0..=4 => Region::Narrowing { a: NARROWING[index] },
            5..=20 => Region::Relocation {
                gain_db: RELOCATION_DB[index - 5],
            },
            21..=30 => Region::Boost {
                gain_db: BOOST_DB[index - 21],
            },
            _ => return Err(Error::DialOutOfRange(index as i64)),
        };
        Ok(DialSetting { index, region })
    }

    pub fn from_signed(index: i64) -> Result<Self> {
        usize::try_from(index)
            .map_err(|_| Error::DialOutOfRange(index))
            .and_then(Self::new)
    }

    pub fn all() -> impl Iterator<Item = DialSetting> {
        (0..DIAL_POSITIONS).map(|i| DialSetting::new(i).expect("index in range"))
    }
}

fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Time-domain decomposition of one stereo item.
#[derive(Debug, Clone, PartialEq)]
pub struct PadSignals {
    pub primary: AudioBuffer,
    pub ambient: AudioBuffer,
}

impl PadSignals {
    pub fn new(primary: AudioBuffer, ambient: AudioBuffer) -> Result<Self> {
        primary.require_stereo()?;
        ambient.require_stereo()?;
        if primary.len() != ambient.len() {
            return Err(Error::LengthMismatch {
                expected: primary.len(),
                actual: ambient.len(),
            });
        }
        Ok(PadSignals { primary, ambient })
    }
}

/// A four-channel up-mix with its measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRender {
    pub audio: AudioBuffer,
    pub dial: DialSetting,
    /// Rear-to-front energy ratio; `-inf` for silent rears.
    pub rfr_db: f64,
    /// Loudness of `audio` as returned; `None` if not measured.
    pub loudness_lufs: Option<f64>,
    /// Gain applied by normalization (0 when not normalized).
    pub norm_gain_db: f64,
}

impl QuadRender {
    /// Expand to FL, FR, C, LFE, SL, SR with silent center and LFE.
    pub fn to_5_1(&self) -> AudioBuffer {
        let len = self.audio.len();
        let ch = self.audio.channels();
        AudioBuffer::new(
            self.audio.sample_rate(),
            vec![
                ch[0].clone(),
                ch[1].clone(),
                vec![0.0; len],
                vec![0.0; len],
                ch[2].clone(),
                ch[3].clone(),
            ],
        )
        .expect("six equal-length channels")
    }

    /// Stereo monitoring fold-down `FL + c·SL`, `FR + c·SR`.
    pub fn fold_down(&self, rear_gain: f64) -> AudioBuffer {
        let ch = self.audio.channels();
        let fold = |front: &[f64], rear: &[f64]| -> Vec<f64> {
            front.iter().zip(rear).map(|(f, r)| f + rear_gain * r).collect()
        };
        AudioBuffer::stereo(
            self.audio.sample_rate(),
            fold(&ch[0], &ch[2]),
            fold(&ch[1], &ch[3]),
        )
        .expect("equal-length channels")
    }
}

/// Render one dial position without loudness normalization.
pub fn render(x: &AudioBuffer, pad: &PadSignals, dial: DialSetting) -> Result<QuadRender> {
    x.require_stereo()?;
    for buf in [&pad.primary, &pad.ambient] {
        if buf.len() != x.len() {
            return Err(Error::LengthMismatch {
                expected: x.len(),
                actual: buf.len(),
            });
        }
    }
    let (xl, xr) = (x.channel(0), x.channel(1));
    let (pl, pr) = (pad.primary.channel(0), pad.primary.channel(1));
    let (al, ar) = (pad.ambient.channel(0), pad.ambient.channel(1));
    let mix = |u: &[f64], wu: f64, v: &[f64], wv: f64| -> Vec<f64> {
        u.iter().zip(v).map(|(a, b)| wu * a + wv * b).collect()
    };
    let silent = || vec![0.0; x.len()];

    let channels = match dial.region {
        Region::Narrowing { a } => vec![
            mix(xl, a, xr, 1.0 - a),
            mix(xl, 1.0 - a, xr, a),
            silent(),
            silent(),
        ],
        Region::Relocation { gain_db } => {
            let g = db_to_amplitude(gain_db);
            // g == 1 must leave the rears exactly silent
            let rear = |amb: &[f64]| {
                if g == 1.0 {
                    silent()
                } else {
                    amb.iter().map(|s| (1.0 - g) * s).collect()
                }
            };
            vec![mix(pl, 1.0, al, g), mix(pr, 1.0, ar, g), rear(al), rear(ar)]
        }
        Region::Boost { gain_db } => {
            let b = db_to_amplitude(gain_db);
            vec![
                pl.to_vec(),
                pr.to_vec(),
                al.iter().map(|s| b * s).collect(),
                ar.iter().map(|s| b * s).collect(),
            ]
        }
    };
    let audio = AudioBuffer::new(x.sample_rate(), channels)?;
    let rfr_db = rfr(&audio)?;
    Ok(QuadRender {
        audio,
        dial,
        rfr_db,
        loudness_lufs: None,
        norm_gain_db: 0.0,
    })
}

/// Normalize a render to `target` LUFS, keeping its RFR.
pub fn normalize_render(render: QuadRender, target: f64) -> Result<QuadRender> {
    let (audio, gain) = normalize_to(&render.audio, target)?;
    let loudness = integrated_loudness(&audio)?;
    Ok(QuadRender {
        audio,
        loudness_lufs: Some(loudness),
        norm_gain_db: gain,
        ..render
    })
}

/// Rear-to-front energy ratio in dB of a FL, FR, SL, SR buffer.
///
/// Silent rears give `-inf`; silent fronts with audible rears give `+inf`.
pub fn rfr(quad: &AudioBuffer) -> Result<f64> {
    use ChannelLabel::*;
    if quad.num_channels() != 4 || quad.layout() != [FL, FR, SL, SR] {
        return Err(Error::InvalidBuffer(format!(
            "RFR needs a FL, FR, SL, SR buffer, got {:?}",
            quad.layout()
        )));
    }
    let energy = |c: usize| quad.channel(c).iter().map(|s| s * s).sum::<f64>();
    let front = energy(0) + energy(1);
    let rear = energy(2) + energy(3);
    Ok(match (front > 0.0, rear > 0.0) {
        (_, false) => f64::NEG_INFINITY,
        (false, true) => f64::INFINITY,
        (true, true) => 10.0 * (rear / front).log10(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(fl: Vec<f64>, fr: Vec<f64>, sl: Vec<f64>, sr: Vec<f64>) -> AudioBuffer {
        AudioBuffer::new(48000, vec![fl, fr, sl, sr]).unwrap()
    }

    fn toy_item() -> (AudioBuffer, PadSignals) {
        let n = 256;
        let xl: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let xr: Vec<f64> = (0..n).map(|i| (i as f64 * 0.13).cos() * 0.5).collect();
        let al: Vec<f64> = xl.iter().map(|v| 0.3 * v).collect();
        let ar: Vec<f64> = xr.iter().map(|v| 0.6 * v).collect();
        let pl: Vec<f64> = xl.iter().zip(&al).map(|(x, a)| x - a).collect();
        let pr: Vec<f64> = xr.iter().zip(&ar).map(|(x, a)| x - a).collect();
        let x = AudioBuffer::stereo(48000, xl, xr).unwrap();
        let pad = PadSignals::new(
            AudioBuffer::stereo(48000, pl, pr).unwrap(),
            AudioBuffer::stereo(48000, al, ar).unwrap(),
        )
        .unwrap();
        (x, pad)
    }

    #[test]
    fn dial_table() {
        let dials: Vec<_> = DialSetting::all().collect();
        assert_eq!(dials.len(), 31);
        assert_eq!(dials[0].region, Region::Narrowing { a: 0.5 });
        assert_eq!(dials[4].region, Region::Narrowing { a: 0.87 });
        assert_eq!(dials[5].region, Region::Relocation { gain_db: 0.0 });
        assert_eq!(dials[20].region, Region::Relocation { gain_db: -96.0 });
        assert_eq!(dials[21].region, Region::Boost { gain_db: 1.0 });
        assert_eq!(dials[30].region, Region::Boost { gain_db: 20.0 });
        assert!(matches!(DialSetting::new(31), Err(Error::DialOutOfRange(31))));
        assert!(matches!(DialSetting::from_signed(-1), Err(Error::DialOutOfRange(-1))));
    }

    #[test]
    fn lowest_relocation_gain_is_not_flushed() {
        let g = db_to_amplitude(-96.0);
        assert!(g > 0.0 && (g - 1.584_893_192_461_114e-5).abs() < 1e-18);
    }

    #[test]
    fn dial_zero_is_dual_mono() {
        let (x, pad) = toy_item();
        let r = render(&x, &pad, DialSetting::new(0).unwrap()).unwrap();
        for i in 0..x.len() {
            let mid = 0.5 * (x.channel(0)[i] + x.channel(1)[i]);
            assert!((r.audio.channel(0)[i] - mid).abs() < 1e-15);
            assert_eq!(r.audio.channel(0)[i], r.audio.channel(1)[i]);
        }
        assert_eq!(r.rfr_db, f64::NEG_INFINITY);
    }

    #[test]
    fn reference_dial_passes_input_through() {
        let (x, pad) = toy_item();
        let r = render(&x, &pad, DialSetting::new(REFERENCE_DIAL).unwrap()).unwrap();
        for c in 0..2 {
            for (a, b) in r.audio.channel(c).iter().zip(x.channel(c)) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
        assert!(r.audio.channel(2).iter().chain(r.audio.channel(3)).all(|&s| s == 0.0));
        assert_eq!(r.rfr_db, f64::NEG_INFINITY);
    }

    #[test]
    fn top_dial_boosts_ambient_by_ten() {
        let (x, pad) = toy_item();
        let r = render(&x, &pad, DialSetting::new(30).unwrap()).unwrap();
        for i in 0..x.len() {
            assert!((r.audio.channel(2)[i] - 10.0 * pad.ambient.channel(0)[i]).abs() < 1e-12);
            assert!((r.audio.channel(3)[i] - 10.0 * pad.ambient.channel(1)[i]).abs() < 1e-12);
            assert_eq!(r.audio.channel(0)[i], pad.primary.channel(0)[i]);
        }
    }

    #[test]
    fn rfr_units() {
        let f = vec![0.5, -0.25, 0.1];
        let half: Vec<f64> = f.iter().map(|v| v * 0.5).collect();
        let zero = vec![0.0; 3];
        assert_eq!(rfr(&quad(f.clone(), f.clone(), zero.clone(), zero.clone())).unwrap(), f64::NEG_INFINITY);
        assert!(rfr(&quad(f.clone(), f.clone(), f.clone(), f.clone())).unwrap().abs() < 1e-12);
        let r = rfr(&quad(f.clone(), f.clone(), half.clone(), half.clone())).unwrap();
        assert!((r + 6.0206).abs() < 0.01, "{r}");
        assert_eq!(rfr(&quad(zero.clone(), zero.clone(), f.clone(), zero)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn rfr_rejects_wrong_layout() {
        let stereo = AudioBuffer::stereo(48000, vec![0.0], vec![0.0]).unwrap();
        assert!(rfr(&stereo).is_err());
    }

    #[test]
    fn length_mismatch() {
        let (_, pad) = toy_item();
        let short = AudioBuffer::stereo(48000, vec![0.0; 3], vec![0.0; 3]).unwrap();
        let err = render(&short, &pad, DialSetting::new(7).unwrap()).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { .. }));
    }

    #[test]
    fn five_one_keeps_center_and_lfe_silent() {
        let (x, pad) = toy_item();
        let r = render(&x, &pad, DialSetting::new(12).unwrap()).unwrap();
        let six = r.to_5_1();
        assert_eq!(six.num_channels(), 6);
        assert!(six.channel(2).iter().chain(six.channel(3)).all(|&s| s == 0.0));
        assert_eq!(six.channel(4), r.audio.channel(2));
        assert_eq!(six.channel(5), r.audio.channel(3));
    }
}
