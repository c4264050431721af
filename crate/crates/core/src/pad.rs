//! Primary-ambient decomposition by scene rotation.
//!
//! Each tile's stereo scene is rotated so that its dominant direction sits in
//! the center, center extraction separates the centered (primary) part from the
//! two side (ambient) parts, and the result is rotated back. The whole chain
//! collapses to a single symmetric 2×2 ambient matrix per tile,
//!
//! ```text
//! G_A = adj(C_x) · 2 / (c_LL + c_RR + k),   k = √((c_LL − c_RR)² + 4 c_LR²)
//! G_P = I − G_A
//! ```
//!
//! where `adj(C_x) = [[c_RR, −c_LR], [−c_LR, c_LL]]`. The scalar factor is the
//! commonly quoted `(k − c_LL − c_RR) / (2 (c_LR² − c_LL c_RR))` multiplied
//! through by `(c_LL + c_RR + k)`; the form used here stays finite when `C_x`
//! is singular (fully coherent tiles).
//!
//! Note that the counter-rotation generally leaves the two ambient outputs
//! correlated and of unequal energy even when they were uncorrelated and equal
//! in the rotated frame.

use std::f64::consts::FRAC_PI_2;

use realfft::num_complex::Complex64;

use crate::covariance::{centered_mean, CovarianceField};
use crate::stft::Spectrogram;
use crate::{BinCovariance, Error, Result};

/// Rotation that equalizes the channel energies of a covariance.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RotationAngle(f64);

impl RotationAngle {
    /// Wraps `radians` into `(−π/2, π/2]`.
    pub fn new(radians: f64) -> Self {
        let mut r = radians % std::f64::consts::PI;
        if r > FRAC_PI_2 {
            r -= std::f64::consts::PI;
        } else if r <= -FRAC_PI_2 {
            r += std::f64::consts::PI;
        }
        RotationAngle(r)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// `R_θ = [[cos θ, −sin θ], [sin θ, cos θ]]`.
    pub fn matrix(self) -> [[f64; 2]; 2] {
        let (s, c) = self.0.sin_cos();
        [[c, -s], [s, c]]
    }
}

/// `θ = ½ atan2(c_LL − c_RR, 2 c_LR)`.
///
/// With this branch the rotated cross term is `+k/2`, never negative.
pub fn rotation_angle(cov: &BinCovariance) -> RotationAngle {
    let num = cov.ll - cov.rr;
    let den = 2.0 * cov.lr;
    if num == 0.0 && den == 0.0 {
        return RotationAngle(0.0);
    }
    RotationAngle(0.5 * num.atan2(den))
}

/// `R_θ C_x R_θᵀ`.
pub fn rotate_cov(cov: &BinCovariance, theta: RotationAngle) -> BinCovariance {
    let (s, c) = theta.radians().sin_cos();
    let BinCovariance { ll, rr, lr } = *cov;
    BinCovariance {
        ll: c * c * ll - 2.0 * s * c * lr + s * s * rr,
        rr: s * s * ll + 2.0 * s * c * lr + c * c * rr,
        lr: s * c * (ll - rr) + (c * c - s * s) * lr,
    }
}

/// Symmetric 2×2 matrix `[[a11, a12], [a12, a22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        a11: 1.0,
        a12: 0.0,
        a22: 1.0,
    };

    pub fn to_array(self) -> [[f64; 2]; 2] {
        [[self.a11, self.a12], [self.a12, self.a22]]
    }

    /// `I − self`.
    pub fn complement(self) -> Sym2 {
        Sym2 {
            a11: 1.0 - self.a11,
            a12: -self.a12,
            a22: 1.0 - self.a22,
        }
    }

    pub fn apply(self, left: Complex64, right: Complex64) -> (Complex64, Complex64) {
        (
            left * self.a11 + right * self.a12,
            left * self.a12 + right * self.a22,
        )
    }

    /// Both eigenvalues, ascending.
    pub fn eigenvalues(self) -> (f64, f64) {
        let mean = 0.5 * (self.a11 + self.a22);
        let spread = (0.5 * (self.a11 - self.a22)).hypot(self.a12);
        (mean - spread, mean + spread)
    }
}

/// Ambient and primary un-mixing matrices of one tile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnmixPair {
    pub ambient: Sym2,
    pub primary: Sym2,
}

impl UnmixPair {
    pub fn from_ambient(ambient: Sym2) -> Self {
        UnmixPair {
            ambient,
            primary: ambient.complement(),
        }
    }

    /// All-ambient pass-through used for degenerate tiles.
    pub const ALL_AMBIENT: UnmixPair = UnmixPair {
        ambient: Sym2::IDENTITY,
        primary: Sym2 {
            a11: 0.0,
            a12: 0.0,
            a22: 0.0,
        },
    };
}

/// Closed-form ambient/primary matrices for a regularized covariance.
pub fn pad_unmix(cov: &BinCovariance) -> UnmixPair {
    let k = cov.k();
    let scale = 2.0 / (cov.ll + cov.rr + k);
    if !(scale.is_finite() && scale > 0.0) {
        return UnmixPair::ALL_AMBIENT;
    }
    UnmixPair::from_ambient(Sym2 {
        a11: cov.rr * scale,
        a12: -cov.lr * scale,
        a22: cov.ll * scale,
    })
}

/// Per-tile ambient matrices on the frame × bin grid.
#[derive(Debug, Clone, PartialEq)]
pub struct UnmixField {
    frames: usize,
    bins: usize,
    ambient: Vec<Sym2>,
}

impl UnmixField {
    pub fn from_covariance(field: &CovarianceField) -> Self {
        UnmixField {
            frames: field.frames(),
            bins: field.bins(),
            ambient: field.grid().iter().map(|c| pad_unmix(c).ambient).collect(),
        }
    }

    pub fn from_ambient(frames: usize, bins: usize, ambient: Vec<Sym2>) -> Result<Self> {
        if ambient.len() != frames * bins {
            return Err(Error::LengthMismatch {
                expected: frames * bins,
                actual: ambient.len(),
            });
        }
        Ok(UnmixField {
            frames,
            bins,
            ambient,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn get(&self, frame: usize, bin: usize) -> UnmixPair {
        UnmixPair::from_ambient(self.ambient[frame * self.bins + bin])
    }

    pub fn ambient(&self) -> &[Sym2] {
        &self.ambient
    }
}

/// Centered `len`-frame mean of `G_A` per bin. `G_P` is always derived as
/// `I − G_A`, which is what smoothing both matrices with the same mean gives.
pub fn smooth_unmix(field: &UnmixField, len: usize) -> Result<UnmixField> {
    let packed: Vec<[f64; 3]> = field.ambient.iter().map(|m| [m.a11, m.a12, m.a22]).collect();
    let smoothed = centered_mean(&packed, field.frames, field.bins, len)?;
    Ok(UnmixField {
        frames: field.frames,
        bins: field.bins,
        ambient: smoothed
            .into_iter()
            .map(|[a11, a12, a22]| Sym2 { a11, a12, a22 })
            .collect(),
    })
}

/// Ambient and primary spectrograms, two channels each.
#[derive(Debug, Clone, PartialEq)]
pub struct PadOutput {
    pub ambient: Spectrogram,
    pub primary: Spectrogram,
}

/// Decompose `spec` with per-tile matrices derived from `field` (smoothed and
/// regularized covariance), after smoothing the matrices over `unmix_smooth`
/// frames.
pub fn apply_pad(
    spec: &Spectrogram,
    field: &CovarianceField,
    unmix_smooth: usize,
) -> Result<PadOutput> {
    spec.require_stereo()?;
    if !field.matches(spec) {
        return Err(Error::Config(format!(
            "covariance field is {}x{}, spectrogram is {}x{}",
            field.frames(),
            field.bins(),
            spec.frames(),
            spec.bins()
        )));
    }
    let unmix = smooth_unmix(&UnmixField::from_covariance(field), unmix_smooth)?;

    let n = spec.frames() * spec.bins();
    let mut a_l = Vec::with_capacity(n);
    let mut a_r = Vec::with_capacity(n);
    let mut p_l = Vec::with_capacity(n);
    let mut p_r = Vec::with_capacity(n);
    for ((&xl, &xr), g_a) in spec.channel(0).iter().zip(spec.channel(1)).zip(&unmix.ambient) {
        let (al, ar) = g_a.apply(xl, xr);
        let (pl, pr) = g_a.complement().apply(xl, xr);
        a_l.push(al);
        a_r.push(ar);
        p_l.push(pl);
        p_r.push(pr);
    }
    Ok(PadOutput {
        ambient: spec.with_channels(vec![a_l, a_r])?,
        primary: spec.with_channels(vec![p_l, p_r])?,
    })
}
