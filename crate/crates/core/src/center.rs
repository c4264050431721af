//! Center-channel extraction with a per-tile multichannel Wiener filter.
//!
//! The observation model is `x_L = l + c`, `x_R = r + c` with mutually
//! uncorrelated `l`, `r`, `c`. Component energies follow from the covariance
//! directly, and the MMSE un-mixing matrix is `G = C_sx C_x⁻¹` with
//! `C_sx = diag(E|l|², E|r|², E|c|²) · Dᵀ`.

use realfft::num_complex::Complex64;

use crate::covariance::CovarianceField;
use crate::stft::Spectrogram;
use crate::{BinCovariance, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentEnergies {
    pub left: f64,
    pub center: f64,
    pub right: f64,
}

/// Solve the energy mixing model. Anti-phase correlation has no place in the
/// model, so a negative cross term means "no center".
pub fn component_energies(cov: &BinCovariance) -> ComponentEnergies {
    let center = cov.lr.max(0.0);
    ComponentEnergies {
        left: (cov.ll - center).max(0.0),
        center,
        right: (cov.rr - center).max(0.0),
    }
}

/// 3×2 un-mixing matrix; rows estimate `l`, `r`, `c` from `[x_L, x_R]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CeUnmix {
    pub g: [[f64; 2]; 3],
}

impl CeUnmix {
    pub const PASS_THROUGH: CeUnmix = CeUnmix {
        g: [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]],
    };

    pub fn apply(&self, left: Complex64, right: Complex64) -> [Complex64; 3] {
        self.g.map(|[wl, wr]| left * wl + right * wr)
    }
}

/// Closed-form MMSE un-mixing matrix for a regularized covariance.
///
/// Each column is divided by the sum of its own `l`/`r` and `c` numerators,
/// which equals `det(C_x)` in exact arithmetic. That keeps
/// `row_l + row_c = [1, 0]` and `row_r + row_c = [0, 1]` to within a few ulp
/// even when `C_x` is nearly singular.
pub fn ce_unmix(cov: &BinCovariance) -> CeUnmix {
    let BinCovariance { ll, rr, .. } = *cov;
    let lr = cov.lr.max(0.0);
    let det = ll * rr - lr * lr;
    if !(det.is_finite() && det > 1e-30 * ll * rr) {
        return CeUnmix::PASS_THROUGH;
    }

    // column 0 (weights on x_L)
    let l0 = rr * (ll - lr);
    let c0 = lr * (rr - lr);
    let d0 = l0 + c0;
    // column 1 (weights on x_R)
    let r1 = ll * (rr - lr);
    let c1 = lr * (ll - lr);
    let d1 = r1 + c1;
    if !(d0 > 0.0 && d1 > 0.0) {
        return CeUnmix::PASS_THROUGH;
    }

    CeUnmix {
        g: [
            [l0 / d0, -c1 / d1],
            [-c0 / d0, r1 / d1],
            [c0 / d0, c1 / d1],
        ],
    }
}

/// Per-tile `[l̂, r̂, ĉ] = G [x_L, x_R]`.
///
/// `field` should already be smoothed and regularized. The result has three
/// channels in the order left, right, center.
pub fn apply_ce(spec: &Spectrogram, field: &CovarianceField) -> Result<Spectrogram> {
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
    let n = spec.frames() * spec.bins();
    let mut out = vec![Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for ((&xl, &xr), cov) in spec.channel(0).iter().zip(spec.channel(1)).zip(field.grid()) {
        let [l, r, c] = ce_unmix(cov).apply(xl, xr);
        out[0].push(l);
        out[1].push(r);
        out[2].push(c);
    }
    spec.with_channels(out)
}
