//! Per-tile 2×2 observation covariance and its temporal smoothing.
//!
//! Only the real part of the cross term is kept; everything downstream works
//! with real-valued 2×2 matrices applied to complex tiles.

use realfft::num_complex::Complex64;

use crate::stft::Spectrogram;
use crate::{Error, Result};

/// Largest admissible coherence after [`CovarianceField::regularize`].
pub const MAX_COHERENCE: f64 = 1.0 - 1e-9;

/// Relative energy floor applied per frame before any division.
pub const ENERGY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BinCovariance {
    pub ll: f64,
    pub rr: f64,
    /// Real part of `conj(x_L)·x_R`.
    pub lr: f64,
}

impl BinCovariance {
    pub const fn new(ll: f64, rr: f64, lr: f64) -> Self {
        BinCovariance { ll, rr, lr }
    }

    pub fn from_tiles(left: Complex64, right: Complex64) -> Self {
        BinCovariance {
            ll: left.norm_sqr(),
            rr: right.norm_sqr(),
            lr: (left.conj() * right).re,
        }
    }

    pub fn det(&self) -> f64 {
        self.ll * self.rr - self.lr * self.lr
    }

    pub fn trace(&self) -> f64 {
        self.ll + self.rr
    }

    /// `√((c_LL − c_RR)² + 4 c_LR²)`, the eigenvalue spread of the matrix.
    pub fn k(&self) -> f64 {
        (self.ll - self.rr).hypot(2.0 * self.lr)
    }

    pub fn scaled(&self, s: f64) -> Self {
        BinCovariance::new(self.ll * s, self.rr * s, self.lr * s)
    }

    /// Pull `c_LR` back inside the Cauchy-Schwarz bound when averaging
    /// round-off pushed it out.
    pub fn clamp_psd(self) -> Self {
        let bound = (self.ll * self.rr).max(0.0).sqrt();
        if self.lr * self.lr > self.ll * self.rr {
            BinCovariance {
                lr: bound.copysign(self.lr) * MAX_COHERENCE,
                ..self
            }
        } else {
            self
        }
    }

    /// Floor both energies at `floor` and keep the coherence at most
    /// [`MAX_COHERENCE`], so the matrix is strictly positive definite.
    pub fn regularized(self, floor: f64) -> Self {
        let ll = self.ll.max(floor);
        let rr = self.rr.max(floor);
        let bound = (ll * rr).sqrt() * MAX_COHERENCE;
        BinCovariance {
            ll,
            rr,
            lr: self.lr.clamp(-bound, bound),
        }
    }
}

/// A frames × bins grid of covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceField {
    frames: usize,
    bins: usize,
    grid: Vec<BinCovariance>,
    smoothing_len: usize,
}

impl CovarianceField {
    pub fn from_grid(frames: usize, bins: usize, grid: Vec<BinCovariance>) -> Result<Self> {
        if grid.len() != frames * bins {
            return Err(Error::LengthMismatch {
                expected: frames * bins,
                actual: grid.len(),
            });
        }
        Ok(CovarianceField {
            frames,
            bins,
            grid,
            smoothing_len: 1,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn smoothing_len(&self) -> usize {
        self.smoothing_len
    }

    pub fn get(&self, frame: usize, bin: usize) -> BinCovariance {
        self.grid[frame * self.bins + bin]
    }

    pub fn grid(&self) -> &[BinCovariance] {
        &self.grid
    }

    pub fn matches(&self, spec: &Spectrogram) -> bool {
        self.frames == spec.frames() && self.bins == spec.bins()
    }

    /// Apply the per-frame energy floor and the coherence limit.
    ///
    /// The floor is [`ENERGY_FLOOR`] times the frame's broadband energy
    /// (sum of `c_LL + c_RR` over bins), plus a tiny absolute term so fully
    /// silent frames stay finite.
    pub fn regularize(&self) -> CovarianceField {
        let mut grid = Vec::with_capacity(self.grid.len());
        for row in self.grid.chunks_exact(self.bins) {
            let broadband: f64 = row.iter().map(BinCovariance::trace).sum();
            let floor = ENERGY_FLOOR * (broadband + 1e-30);
            grid.extend(row.iter().map(|c| c.regularized(floor)));
        }
        CovarianceField {
            grid,
            ..self.clone_geometry()
        }
    }

    fn clone_geometry(&self) -> Self {
        CovarianceField {
            frames: self.frames,
            bins: self.bins,
            grid: Vec::new(),
            smoothing_len: self.smoothing_len,
        }
    }
}

/// Per-tile outer products of a stereo spectrogram.
pub fn instantaneous_cov(spec: &Spectrogram) -> Result<CovarianceField> {
    spec.require_stereo()?;
    let grid = spec
        .channel(0)
        .iter()
        .zip(spec.channel(1))
        .map(|(&l, &r)| BinCovariance::from_tiles(l, r))
        .collect();
    CovarianceField::from_grid(spec.frames(), spec.bins(), grid)
}

/// Centered sliding mean of `len` frames per bin; truncated at the edges.
pub fn smooth_time(field: &CovarianceField, len: usize) -> Result<CovarianceField> {
    let mut sums = vec![[0.0; 3]; field.grid.len()];
    for (s, c) in sums.iter_mut().zip(&field.grid) {
        *s = [c.ll, c.rr, c.lr];
    }
    let smoothed = centered_mean(&sums, field.frames, field.bins, len)?;
    let grid = smoothed
        .into_iter()
        .map(|[ll, rr, lr]| BinCovariance::new(ll, rr, lr).clamp_psd())
        .collect();
    Ok(CovarianceField {
        grid,
        smoothing_len: len,
        ..field.clone_geometry()
    })
}

/// Centered moving average along the frame axis of a frame-major grid of
/// fixed-size vectors. Edge frames average over the frames that exist.
pub(crate) fn centered_mean<const N: usize>(
    data: &[[f64; N]],
    frames: usize,
    bins: usize,
    len: usize,
) -> Result<Vec<[f64; N]>> {
    if len == 0 || len.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "smoothing length must be odd and >= 1, got {len}"
        )));
    }
    if len == 1 {
        return Ok(data.to_vec());
    }
    let half = len / 2;
    let mut out = vec![[0.0; N]; data.len()];
    for t in 0..frames {
        let lo = t.saturating_sub(half);
        let hi = (t + half + 1).min(frames);
        let count = (hi - lo) as f64;
        let dst = &mut out[t * bins..(t + 1) * bins];
        for src in lo..hi {
            for (o, v) in dst.iter_mut().zip(&data[src * bins..(src + 1) * bins]) {
                for i in 0..N {
                    o[i] += v[i];
                }
            }
        }
        for o in dst.iter_mut() {
            for x in o.iter_mut() {
                *x /= count;
            }
        }
    }
    Ok(out)
}
