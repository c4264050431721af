#![allow(dead_code)]

use std::f64::consts::PI;

use padmix::{AudioBuffer, BinCovariance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const RATE: u32 = 48000;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, n: usize, std: f64) -> Vec<f64> {
    (0..n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn stereo_noise(secs: f64, std: f64, seed: u64) -> AudioBuffer {
    let n = (secs * RATE as f64) as usize;
    let mut r = rng(seed);
    let l = gaussian(&mut r, n, std);
    let rr = gaussian(&mut r, n, std);
    AudioBuffer::stereo(RATE, l, rr).unwrap()
}

/// Harmonic complex on 110 Hz, decaying partials with fixed phases.
pub fn harmonic_source(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64 / RATE as f64;
            (1..60)
                .map(|h| {
                    let h = h as f64;
                    (2.0 * PI * 110.0 * h * t + h * h).sin() / h
                })
                .sum()
        })
        .collect()
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// `10·log10(Σ(a−b)² / Σb²)` over all channels.
pub fn rel_error_db(a: &AudioBuffer, b: &AudioBuffer) -> f64 {
    let (mut err, mut reference) = (0.0, 0.0);
    for (ca, cb) in a.channels().iter().zip(b.channels()) {
        for (x, y) in ca.iter().zip(cb) {
            err += (x - y) * (x - y);
            reference += y * y;
        }
    }
    db(err / reference)
}

pub fn add(a: &AudioBuffer, b: &AudioBuffer) -> AudioBuffer {
    let channels = a
        .channels()
        .iter()
        .zip(b.channels())
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
        .collect();
    AudioBuffer::new(a.sample_rate(), channels).unwrap()
}

/// Amplitude-panned source plus independent stereo noise, with the true
/// components kept.
pub struct Scene {
    pub mix: AudioBuffer,
    pub primary: AudioBuffer,
    pub ambient: AudioBuffer,
}

/// `phi` pans with gains `(cos φ, sin φ)`; `par_db` is the ratio of total
/// primary to total ambient energy.
pub fn panned_scene(phi: f64, par_db: f64, secs: f64, seed: u64) -> Scene {
    let n = (secs * RATE as f64) as usize;
    let s = harmonic_source(n);
    let mut r = rng(seed);
    let nl = gaussian(&mut r, n, 1.0);
    let nr = gaussian(&mut r, n, 1.0);
    let g = ((energy(&nl) + energy(&nr)) / energy(&s) * 10f64.powf(par_db / 10.0)).sqrt();
    let pl: Vec<f64> = s.iter().map(|v| g * phi.cos() * v).collect();
    let pr: Vec<f64> = s.iter().map(|v| g * phi.sin() * v).collect();
    // keep the scene well below full scale
    let peak = pl.iter().chain(&pr).chain(&nl).chain(&nr).fold(0.0f64, |m, v| m.max(v.abs()));
    let k = 0.5 / peak;
    let scale = |v: &[f64]| v.iter().map(|x| x * k).collect::<Vec<_>>();
    let primary = AudioBuffer::stereo(RATE, scale(&pl), scale(&pr)).unwrap();
    let ambient = AudioBuffer::stereo(RATE, scale(&nl), scale(&nr)).unwrap();
    Scene {
        mix: add(&primary, &ambient),
        primary,
        ambient,
    }
}

/// Small corpus of stereo items with different spatial character.
pub fn corpus(secs: f64) -> Vec<(&'static str, AudioBuffer)> {
    let n = (secs * RATE as f64) as usize;
    let mut r = rng(99);
    let src = harmonic_source(n);

    let panned = panned_scene(PI / 6.0, 6.0, secs, 1).mix;

    // two sources at opposite sides, gated like syllables, over a diffuse bed
    let bed_l = gaussian(&mut r, n, 0.02);
    let bed_r = gaussian(&mut r, n, 0.02);
    let voice = gaussian(&mut r, n, 0.2);
    let gate = |i: usize, rate: f64| ((2.0 * PI * rate * i as f64 / RATE as f64).sin()).max(0.0);
    let talk_l: Vec<f64> = (0..n)
        .map(|i| 0.9 * voice[i] * gate(i, 3.0) + 0.3 * src[i] * 0.1 * gate(i, 1.3) + bed_l[i])
        .collect();
    let talk_r: Vec<f64> = (0..n)
        .map(|i| 0.3 * voice[i] * gate(i, 3.0) + 0.95 * src[i] * 0.1 * gate(i, 1.3) + bed_r[i])
        .collect();

    let diffuse = stereo_noise(secs, 0.1, 5);

    let mono: Vec<f64> = src.iter().map(|v| 0.1 * v).collect();

    let anti: Vec<f64> = mono.iter().map(|v| -v).collect();

    // decaying noise bursts with a slightly different tail per channel
    let tail_l = gaussian(&mut r, n, 0.3);
    let tail_r = gaussian(&mut r, n, 0.3);
    let hit = |i: usize| (-((i % (RATE as usize / 2)) as f64) / 2400.0).exp();
    let perc_l: Vec<f64> = (0..n).map(|i| hit(i) * (0.7 * tail_l[i] + 0.3 * tail_r[i])).collect();
    let perc_r: Vec<f64> = (0..n).map(|i| hit(i) * (0.3 * tail_l[i] + 0.7 * tail_r[i])).collect();

    vec![
        ("panned", panned),
        ("talk", AudioBuffer::stereo(RATE, talk_l, talk_r).unwrap()),
        ("diffuse", diffuse),
        ("mono", AudioBuffer::stereo(RATE, mono.clone(), mono.clone()).unwrap()),
        ("anti-phase", AudioBuffer::stereo(RATE, mono.clone(), anti).unwrap()),
        ("hard-left", AudioBuffer::stereo(RATE, mono, vec![0.0; n]).unwrap()),
        ("percussive", AudioBuffer::stereo(RATE, perc_l, perc_r).unwrap()),
    ]
}

/// Random positive-definite covariance spanning several decades of level,
/// level imbalance and both signs of correlation.
pub fn random_cov(rng: &mut impl Rng) -> BinCovariance {
    let level = 10f64.powf(rng.random_range(-8.0..4.0));
    let tilt = 10f64.powf(rng.random_range(-3.0..3.0));
    let ll = level * tilt.sqrt();
    let rr = level / tilt.sqrt();
    let rho: f64 = rng.random_range(-0.999..0.999);
    BinCovariance::new(ll, rr, rho * (ll * rr).sqrt())
}

type M2 = [[f64; 2]; 2];

fn mul<const A: usize, const B: usize, const C: usize>(
    x: &[[f64; B]; A],
    y: &[[f64; C]; B],
) -> [[f64; C]; A] {
    let mut out = [[0.0; C]; A];
    for i in 0..A {
        for j in 0..C {
            out[i][j] = (0..B).map(|k| x[i][k] * y[k][j]).sum();
        }
    }
    out
}

fn transpose(m: &M2) -> M2 {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

/// Rotation angle from the arctangent form, plus the rotation matrix
/// `[[cos, −sin], [sin, cos]]`. Of the two angles that equalize the
/// diagonal, the one leaving a non-negative cross term is taken.
pub fn centering_rotation(cov: &BinCovariance) -> (f64, M2) {
    let (ll, rr, lr) = (cov.ll, cov.rr, cov.lr);
    let mut theta = if lr == 0.0 {
        if ll == rr { 0.0 } else { (ll - rr).signum() * PI / 4.0 }
    } else {
        0.5 * ((ll - rr) / (2.0 * lr)).atan()
    };
    let rot = |t: f64| [[t.cos(), -t.sin()], [t.sin(), t.cos()]];
    let c = [[ll, lr], [lr, rr]];
    let cross = mul(&mul(&rot(theta), &c), &transpose(&rot(theta)))[0][1];
    if cross < 0.0 {
        theta += PI / 2.0;
    }
    (theta, rot(theta))
}

/// `R C Rᵀ` by explicit matrix products.
pub fn rotated_cov(cov: &BinCovariance) -> M2 {
    let (_, r) = centering_rotation(cov);
    let c = [[cov.ll, cov.lr], [cov.lr, cov.rr]];
    mul(&mul(&r, &c), &transpose(&r))
}

/// Ambient and primary un-mixing matrices by the step-by-step recipe:
/// rotate, center-extract with a generic 2×2 inverse, duplicate the center
/// into both primary channels, rotate back.
pub fn rotation_pipeline(cov: &BinCovariance) -> (M2, M2) {
    let (_, r) = centering_rotation(cov);
    let c = rotated_cov(cov);
    let (c11, c22, c12) = (c[0][0], c[1][1], c[0][1]);
    let ec = c12.max(0.0);
    let el = c11 - ec;
    let er = c22 - ec;
    let det = c11 * c22 - c12 * c12;
    let inv = [[c22 / det, -c12 / det], [-c12 / det, c11 / det]];
    let csx = [[el, 0.0], [0.0, er], [ec, ec]];
    let g: [[f64; 2]; 3] = mul(&csx, &inv);
    let select = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]];
    let gr = mul(&mul(&select, &g), &r);
    let rt = transpose(&r);
    let top = [gr[0], gr[1]];
    let bottom = [gr[2], gr[3]];
    (mul(&rt, &top), mul(&rt, &bottom))
}

/// The closed form with the `(k − c_LL − c_RR) / (2(c_LR² − c_LL c_RR))`
/// factor, written out literally.
pub fn literal_ambient(cov: &BinCovariance) -> M2 {
    let (ll, rr, lr) = (cov.ll, cov.rr, cov.lr);
    let k = ((ll - rr).powi(2) + 4.0 * lr * lr).sqrt();
    let f = (k - ll - rr) / (2.0 * (lr * lr - ll * rr));
    [[rr * f, -lr * f], [-lr * f, ll * f]]
}

/// Integrated loudness from the `ebur128` crate.
pub fn oracle_loudness(buf: &AudioBuffer) -> f64 {
    use ebur128::{Channel, EbuR128, Mode};
    use padmix::ChannelLabel as L;
    let mut meter = EbuR128::new(buf.num_channels() as u32, buf.sample_rate(), Mode::I).unwrap();
    let map: Vec<Channel> = buf
        .layout()
        .iter()
        .map(|l| match l {
            L::Mono | L::C => Channel::Center,
            L::FL => Channel::Left,
            L::FR => Channel::Right,
            L::LFE => Channel::Unused,
            L::SL => Channel::LeftSurround,
            L::SR => Channel::RightSurround,
        })
        .collect();
    meter.set_channel_map(&map).unwrap();
    let planar: Vec<&[f64]> = buf.channels().iter().map(Vec::as_slice).collect();
    meter.add_frames_planar_f64(&planar).unwrap();
    meter.loudness_global().unwrap()
}

pub fn sine(freq: f64, amp: f64, secs: f64) -> Vec<f64> {
    let n = (secs * RATE as f64) as usize;
    (0..n)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / RATE as f64).sin())
        .collect()
}
