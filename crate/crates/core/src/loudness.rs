//! Integrated loudness after ITU-R BS.1770-4.
//!
//! K-weighting is a high-shelf pre-filter followed by the RLB high-pass. The
//! biquad coefficients are derived from the analog prototypes for the
//! buffer's sample rate; at 48 kHz they reproduce the tabulated values.

use std::f64::consts::PI;

use crate::{AudioBuffer, Error, Result};

const BLOCK_SECS: f64 = 0.4;
const STEP_SECS: f64 = 0.1;
const ABSOLUTE_GATE_LUFS: f64 = -70.0;
const RELATIVE_GATE_LU: f64 = -10.0;
const OFFSET: f64 = -0.691;

#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    fn high_shelf(rate: f64) -> Biquad {
        let gain_db = 3.999_843_853_973_347;
        let q = 0.707_175_236_955_419_6;
        let fc = 1_681.974_450_955_533;
        let k = (PI * fc / rate).tan();
        let vh = 10f64.powf(gain_db / 20.0);
        let vb = vh.powf(0.499_666_774_154_541_6);
        let a0 = 1.0 + k / q + k * k;
        Biquad {
            b0: (vh + vb * k / q + k * k) / a0,
            b1: 2.0 * (k * k - vh) / a0,
            b2: (vh - vb * k / q + k * k) / a0,
            a1: 2.0 * (k * k - 1.0) / a0,
            a2: (1.0 - k / q + k * k) / a0,
        }
    }

    fn high_pass(rate: f64) -> Biquad {
        let q = 0.500_327_037_323_877_3;
        let fc = 38.135_470_876_024_44;
        let k = (PI * fc / rate).tan();
        let a0 = 1.0 + k / q + k * k;
        Biquad {
            b0: 1.0,
            b1: -2.0,
            b2: 1.0,
            a1: 2.0 * (k * k - 1.0) / a0,
            a2: (1.0 - k / q + k * k) / a0,
        }
    }

    /// Direct form I over a whole signal, starting from rest.
    fn run(&self, input: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        input
            .iter()
            .map(|&x| {
                let y = self.b0 * x + self.b1 * x1 + self.b2 * x2 - self.a1 * y1 - self.a2 * y2;
                x2 = x1;
                x1 = x;
                y2 = y1;
                y1 = y;
                y
            })
            .collect()
    }
}

fn k_weighted(signal: &[f64], rate: f64) -> Vec<f64> {
    Biquad::high_pass(rate).run(&Biquad::high_shelf(rate).run(signal))
}

/// Gated integrated loudness in LUFS.
///
/// Returns `-inf` when every block falls below the absolute gate (digital
/// silence) and [`Error::TooShortToGate`] when the buffer is shorter than
/// one 400 ms block.
pub fn integrated_loudness(buf: &AudioBuffer) -> Result<f64> {
    let rate = buf.sample_rate() as f64;
    let block = (BLOCK_SECS * rate).round() as usize;
    let step = (STEP_SECS * rate).round() as usize;
    if buf.len() < block || block == 0 {
        return Err(Error::TooShortToGate(buf.len()));
    }
    let blocks = (buf.len() - block) / step + 1;

    // per block, weighted sum over channels of mean-square power
    let mut block_power = vec![0.0; blocks];
    for (signal, label) in buf.channels().iter().zip(buf.layout()) {
        let weight = label.loudness_weight();
        if weight == 0.0 {
            continue;
        }
        let filtered = k_weighted(signal, rate);
        let mut prefix = Vec::with_capacity(filtered.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for y in &filtered {
            acc += y * y;
            prefix.push(acc);
        }
        for (j, p) in block_power.iter_mut().enumerate() {
            let start = j * step;
            *p += weight * (prefix[start + block] - prefix[start]) / block as f64;
        }
    }

    let to_lufs = |power: f64| OFFSET + 10.0 * power.log10();
    let gated_mean = |threshold: f64| -> Option<f64> {
        let kept: Vec<f64> = block_power
            .iter()
            .copied()
            .filter(|&p| to_lufs(p) > threshold)
            .collect();
        (!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64)
    };

    let Some(abs_mean) = gated_mean(ABSOLUTE_GATE_LUFS) else {
        return Ok(f64::NEG_INFINITY);
    };
    let relative = to_lufs(abs_mean) + RELATIVE_GATE_LU;
    let threshold = relative.max(ABSOLUTE_GATE_LUFS);
    let mean = gated_mean(threshold).unwrap_or(abs_mean);
    Ok(to_lufs(mean))
}

/// Apply one broadband gain so that the buffer measures `target` LUFS.
/// Returns the normalized buffer and the applied gain in dB.
pub fn normalize_to(buf: &AudioBuffer, target: f64) -> Result<(AudioBuffer, f64)> {
    let measured = integrated_loudness(buf)?;
    if !measured.is_finite() || !target.is_finite() {
        return Err(Error::Silent);
    }
    let gain_db = target - measured;
    Ok((buf.scaled(10f64.powf(gain_db / 20.0)), gain_db))
}
