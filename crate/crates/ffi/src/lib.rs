//! C ABI for padmix.
//!
//! Every entry point returns a [`PadmixStatus`]. On failure a message is kept
//! per thread and can be read with [`padmix_last_error`]. Panics are caught
//! at the boundary and reported as `PADMIX_STATUS_PANIC`.
//!
//! Signals are passed as planar `double` arrays. A decomposition is held in
//! an opaque [`PadmixDecomposition`] handle that must be released with
//! [`padmix_decomposition_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use padmix::center::ce_unmix;
use padmix::loudness::integrated_loudness;
use padmix::pad::pad_unmix;
use padmix::pipeline::{LoudnessTarget, Upmixer};
use padmix::upmix::rfr;
use padmix::{AudioBuffer, BinCovariance, DialSetting, Error, PipelineConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadmixStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotStereo = 3,
    DialOutOfRange = 4,
    TooShort = 5,
    Silent = 6,
    Numeric = 7,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadmixStem {
    Primary = 0,
    Ambient = 1,
}

/// Analysis parameters. Start from [`padmix_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PadmixConfig {
    pub frame_len: u32,
    pub hop: u32,
    pub cov_smooth_frames: u32,
    pub unmix_smooth_frames: u32,
}

/// Measurements of one normalized render.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PadmixMetrics {
    pub rfr_db: f64,
    pub loudness_lufs: f64,
    pub norm_gain_db: f64,
    pub dial_index: u32,
}

/// Decomposed stereo item. Opaque to C.
pub struct PadmixDecomposition {
    upmixer: Upmixer,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> PadmixStatus {
    match err {
        Error::NotStereo(_) => PadmixStatus::NotStereo,
        Error::DialOutOfRange(_) => PadmixStatus::DialOutOfRange,
        Error::TooShortToGate(_) => PadmixStatus::TooShort,
        Error::Silent => PadmixStatus::Silent,
        _ => PadmixStatus::InvalidArgument,
    }
}

struct Failure(PadmixStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PadmixStatus::NullPointer, format!("{what} is null"))
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PadmixStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PadmixStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            PadmixStatus::Panic
        }
    }
}

/// # Safety
/// `data` must be null or point to `len` readable doubles.
unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

/// # Safety
/// `data` must be null or point to `len` writable doubles.
unsafe fn slice_mut<'a>(data: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(data, len))
}

fn pipeline_config(cfg: Option<&PadmixConfig>) -> Result<PipelineConfig, Failure> {
    let mut out = PipelineConfig::default();
    if let Some(c) = cfg {
        out.stft.frame_len = c.frame_len as usize;
        out.stft.hop = c.hop as usize;
        out.cov_smooth_frames = c.cov_smooth_frames as usize;
        out.unmix_smooth_frames = c.unmix_smooth_frames as usize;
    }
    out.validate()?;
    Ok(out)
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next padmix call on the same thread.
#[no_mangle]
pub extern "C" fn padmix_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn padmix_config_default() -> PadmixConfig {
    let d = PipelineConfig::default();
    PadmixConfig {
        frame_len: d.stft.frame_len as u32,
        hop: d.stft.hop as u32,
        cov_smooth_frames: d.cov_smooth_frames as u32,
        unmix_smooth_frames: d.unmix_smooth_frames as u32,
    }
}

/// Decompose a stereo signal into primary and ambient parts.
///
/// `config` may be null for defaults. On success `*out` owns a new handle.
///
/// # Safety
/// `left` and `right` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn padmix_decompose(
    left: *const f64,
    right: *const f64,
    len: usize,
    sample_rate: u32,
    config: *const PadmixConfig,
    out: *mut *mut PadmixDecomposition,
) -> PadmixStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let l = slice(left, len, "left")?;
        let r = slice(right, len, "right")?;
        let cfg = pipeline_config(config.as_ref())?;
        let input = AudioBuffer::stereo(sample_rate, l.to_vec(), r.to_vec())?;
        let upmixer = Upmixer::new(input, &cfg)?;
        *out = Box::into_raw(Box::new(PadmixDecomposition { upmixer }));
        Ok(())
    })
}

/// # Safety
/// `handle` must come from [`padmix_decompose`] and not be freed yet, or be null.
#[no_mangle]
pub unsafe extern "C" fn padmix_decomposition_free(handle: *mut PadmixDecomposition) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of samples per channel, 0 for a null handle.
///
/// # Safety
/// `handle` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn padmix_decomposition_len(handle: *const PadmixDecomposition) -> usize {
    handle.as_ref().map_or(0, |h| h.upmixer.input().len())
}

/// Integrated loudness of the input, LUFS.
///
/// # Safety
/// `handle` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn padmix_decomposition_input_loudness(
    handle: *const PadmixDecomposition,
    out: *mut f64,
) -> PadmixStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = h.upmixer.input_loudness();
        Ok(())
    })
}

/// Copy one stem into planar `left` and `right` buffers of `len` samples.
///
/// # Safety
/// `handle` must be live; `left` and `right` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn padmix_decomposition_copy_stem(
    handle: *const PadmixDecomposition,
    stem: PadmixStem,
    left: *mut f64,
    right: *mut f64,
    len: usize,
) -> PadmixStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let pad = h.upmixer.pad();
        let buf = match stem {
            PadmixStem::Primary => &pad.primary,
            PadmixStem::Ambient => &pad.ambient,
        };
        if len != buf.len() {
            return Err(Error::LengthMismatch { expected: buf.len(), actual: len }.into());
        }
        slice_mut(left, len, "left")?.copy_from_slice(buf.channel(0));
        slice_mut(right, len, "right")?.copy_from_slice(buf.channel(1));
        Ok(())
    })
}

/// Render dial position `dial` (0 to 30) as planar FL, FR, SL, SR.
///
/// `quad` receives `4 * len` doubles, one channel after another. A NaN
/// `target_lufs` matches the loudness of the input. `metrics` may be null.
///
/// # Safety
/// `handle` must be live; `quad` must hold `4 * len` doubles.
#[no_mangle]
pub unsafe extern "C" fn padmix_render(
    handle: *const PadmixDecomposition,
    dial: i32,
    target_lufs: f64,
    quad: *mut f64,
    len: usize,
    metrics: *mut PadmixMetrics,
) -> PadmixStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let dial = DialSetting::from_signed(dial as i64)?;
        let target = if target_lufs.is_nan() {
            LoudnessTarget::MatchInput
        } else {
            LoudnessTarget::Lufs(target_lufs)
        };
        let n = h.upmixer.input().len();
        if len != n {
            return Err(Error::LengthMismatch { expected: n, actual: len }.into());
        }
        let out = slice_mut(quad, 4 * len, "quad")?;
        let render = h.upmixer.render(dial, target)?;
        for (dst, src) in out.chunks_exact_mut(len.max(1)).zip(render.audio.channels()) {
            dst.copy_from_slice(src);
        }
        if let Some(m) = metrics.as_mut() {
            *m = PadmixMetrics {
                rfr_db: render.rfr_db,
                loudness_lufs: render.loudness_lufs.unwrap_or(f64::NAN),
                norm_gain_db: render.norm_gain_db,
                dial_index: dial.index as u32,
            };
        }
        Ok(())
    })
}

/// Ambient and primary un-mixing matrices for one covariance tile, each as
/// row-major `[a11, a12, a21, a22]`. Either output may be null.
///
/// # Safety
/// Non-null outputs must hold 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn padmix_pad_unmix(
    c_ll: f64,
    c_rr: f64,
    c_lr: f64,
    ambient: *mut f64,
    primary: *mut f64,
) -> PadmixStatus {
    guard(|| {
        let cov = BinCovariance::new(c_ll, c_rr, c_lr);
        if !(c_ll.is_finite() && c_rr.is_finite() && c_lr.is_finite()) {
            return Err(Failure(PadmixStatus::Numeric, "covariance must be finite".into()));
        }
        let pair = pad_unmix(&cov);
        for (dst, m) in [(ambient, pair.ambient), (primary, pair.primary)] {
            if !dst.is_null() {
                let [[a, b], [c, d]] = m.to_array();
                slice_mut(dst, 4, "matrix")?.copy_from_slice(&[a, b, c, d]);
            }
        }
        Ok(())
    })
}

/// Center-extraction matrix for one tile, row-major 3×2
/// (rows l, r, c; columns x_L, x_R).
///
/// # Safety
/// `g` must hold 6 doubles.
#[no_mangle]
pub unsafe extern "C" fn padmix_ce_unmix(c_ll: f64, c_rr: f64, c_lr: f64, g: *mut f64) -> PadmixStatus {
    guard(|| {
        if !(c_ll.is_finite() && c_rr.is_finite() && c_lr.is_finite()) {
            return Err(Failure(PadmixStatus::Numeric, "covariance must be finite".into()));
        }
        let m = ce_unmix(&BinCovariance::new(c_ll, c_rr, c_lr)).g;
        let out = slice_mut(g, 6, "g")?;
        for (dst, v) in out.iter_mut().zip(m.iter().flatten()) {
            *dst = *v;
        }
        Ok(())
    })
}

/// Rear-to-front ratio in dB of four channels; `-inf` for silent rears.
///
/// # Safety
/// The four inputs must hold `len` doubles each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn padmix_rfr(
    fl: *const f64,
    fr: *const f64,
    sl: *const f64,
    sr: *const f64,
    len: usize,
    out: *mut f64,
) -> PadmixStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let channels = [(fl, "fl"), (fr, "fr"), (sl, "sl"), (sr, "sr")]
            .into_iter()
            .map(|(p, name)| slice(p, len, name).map(<[f64]>::to_vec))
            .collect::<Result<Vec<_>, _>>()?;
        *out = rfr(&AudioBuffer::new(48000, channels)?)?;
        Ok(())
    })
}

/// Integrated loudness in LUFS of `num_channels` planar channels.
///
/// Channel order follows the usual layouts: 1 mono, 2 L R, 4 FL FR SL SR,
/// 6 FL FR C LFE SL SR. `-inf` for digital silence.
///
/// # Safety
/// `channels` must hold `num_channels` pointers to `len` doubles each.
#[no_mangle]
pub unsafe extern "C" fn padmix_integrated_loudness(
    channels: *const *const f64,
    num_channels: usize,
    len: usize,
    sample_rate: u32,
    out: *mut f64,
) -> PadmixStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if channels.is_null() {
            return Err(null("channels"));
        }
        let ptrs = std::slice::from_raw_parts(channels, num_channels);
        let data = ptrs
            .iter()
            .map(|&p| slice(p, len, "channel").map(<[f64]>::to_vec))
            .collect::<Result<Vec<_>, _>>()?;
        *out = integrated_loudness(&AudioBuffer::new(sample_rate, data)?)?;
        Ok(())
    })
}
