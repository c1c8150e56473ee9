//! C bindings for the hybrid pilot+data GLRT target detector.
//!
//! # Conventions
//!
//! - Functions return [`IsacStatus`]; `ISAC_STATUS_OK` (0) means success.
//!   Output parameters are written only on success.
//! - `IsacConfig` and `IsacDetector` are opaque handles created and
//!   released by their `_new`/`_default` and `_free` pairs.  Passing a
//!   handle after freeing it is undefined behavior, as with any C API.
//! - Frame sample buffers are interleaved `re, im` doubles in column-major
//!   order: element `(i, j)` of the `rows x cols` complex matrix lives at
//!   `samples[2 * (j * rows + i)]` and `[... + 1]`.
//! - All functions are null-safe.  Handles are not internally synchronized;
//!   callers must not share one handle across threads without locking.
//! - Every entry point catches Rust panics and reports
//!   `ISAC_STATUS_INTERNAL` instead of unwinding across the boundary.

use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::DMatrix;

use isac_detect::detectors::{decide, glrt_statistic};
use isac_detect::montecarlo::derive_trial_stream;
use isac_detect::numerics::marcum_q1;
use isac_detect::scenario::{generate_scenario, Scenario, SystemConfig};
use isac_detect::statistics::{build_null_model, sufficient_stats, NullModel};
use isac_detect::theory::{fap_closed_form, threshold_for_fap};
use isac_detect::waveform::{
    build_transmit_plan, synthesize_statistical, GenerationMode, Hypothesis, ReceivedFrame,
    TransmitPlan,
};
use isac_detect::C64;

/// Result of every fallible call in this API.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsacStatus {
    /// The call succeeded and all output parameters are valid.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A scalar or buffer argument was outside its documented domain.
    InvalidArgument = 2,
    /// The configuration failed to parse or validate.
    ConfigError = 3,
    /// A numerical routine could not complete (e.g. an indefinite
    /// covariance or an unattainable false-alarm target).
    MathError = 4,
    /// An internal invariant failed; the library caught a panic.
    Internal = 5,
}

/// Opaque system configuration handle.
pub struct IsacConfig {
    inner: SystemConfig,
}

/// Opaque detector handle: a configuration together with the scenario,
/// transmit plan, and null-hypothesis model deterministically derived from
/// the configuration's seed.
pub struct IsacDetector {
    cfg: SystemConfig,
    scenario: Scenario,
    plan: TransmitPlan,
    model: NullModel,
}

/// One detector verdict on a frame.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IsacDetection {
    /// Value of the detection statistic.
    pub statistic: f64,
    /// Real part of the estimated target amplitude.
    pub alpha_re: f64,
    /// Imaginary part of the estimated target amplitude.
    pub alpha_im: f64,
    /// Log-domain threshold calibrated for the requested false-alarm rate.
    pub threshold: f64,
    /// True when the statistic exceeds the threshold.
    pub detected: bool,
}

fn guard<F: FnOnce() -> IsacStatus>(f: F) -> IsacStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(IsacStatus::Internal)
}

/// Returns the library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn isac_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Allocates a configuration with the reference operating point.
///
/// Returns null only if allocation fails.  Release with
/// [`isac_config_free`].
#[no_mangle]
pub extern "C" fn isac_config_default() -> *mut IsacConfig {
    Box::into_raw(Box::new(IsacConfig {
        inner: SystemConfig::default(),
    }))
}

/// Parses and validates a TOML configuration document.
///
/// # Safety
///
/// `text` must point to a NUL-terminated string; `out` must be a valid
/// pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn isac_config_from_toml(
    text: *const c_char,
    out: *mut *mut IsacConfig,
) -> IsacStatus {
    guard(|| {
        if text.is_null() || out.is_null() {
            return IsacStatus::NullPointer;
        }
        let Ok(s) = unsafe { CStr::from_ptr(text) }.to_str() else {
            return IsacStatus::InvalidArgument;
        };
        match SystemConfig::from_toml_str(s) {
            Ok(cfg) => {
                unsafe { *out = Box::into_raw(Box::new(IsacConfig { inner: cfg })) };
                IsacStatus::Ok
            }
            Err(_) => IsacStatus::ConfigError,
        }
    })
}

/// Replaces the configuration's master seed.
///
/// # Safety
///
/// `cfg` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn isac_config_set_seed(cfg: *mut IsacConfig, seed: u64) -> IsacStatus {
    guard(|| {
        let Some(cfg) = (unsafe { cfg.as_mut() }) else {
            return IsacStatus::NullPointer;
        };
        cfg.inner.seed = seed;
        IsacStatus::Ok
    })
}

/// Resizes the frame, preserving the configured pilot fraction.
///
/// # Safety
///
/// `cfg` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn isac_config_set_frame_len(
    cfg: *mut IsacConfig,
    frame_len: usize,
) -> IsacStatus {
    guard(|| {
        let Some(cfg) = (unsafe { cfg.as_mut() }) else {
            return IsacStatus::NullPointer;
        };
        let resized = cfg.inner.with_frame_len(frame_len);
        match resized.validate() {
            Ok(()) => {
                cfg.inner = resized;
                IsacStatus::Ok
            }
            Err(_) => IsacStatus::InvalidArgument,
        }
    })
}

/// Writes the configuration's canonical hash as a NUL-terminated string.
///
/// `cap` is the capacity of `out` in bytes and must be at least 17.
///
/// # Safety
///
/// `cfg` must be a live handle; `out` must point to at least `cap` writable
/// bytes.
#[no_mangle]
pub unsafe extern "C" fn isac_config_hash(
    cfg: *const IsacConfig,
    out: *mut c_char,
    cap: usize,
) -> IsacStatus {
    guard(|| {
        let Some(cfg) = (unsafe { cfg.as_ref() }) else {
            return IsacStatus::NullPointer;
        };
        if out.is_null() {
            return IsacStatus::NullPointer;
        }
        let hash = cfg.inner.hash();
        if cap < hash.len() + 1 {
            return IsacStatus::InvalidArgument;
        }
        unsafe {
            std::ptr::copy_nonoverlapping(hash.as_ptr() as *const c_char, out, hash.len());
            *out.add(hash.len()) = 0;
        }
        IsacStatus::Ok
    })
}

/// Releases a configuration handle.  Null is ignored.
///
/// # Safety
///
/// `cfg` must be a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn isac_config_free(cfg: *mut IsacConfig) {
    if !cfg.is_null() {
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// Builds a detector from a configuration.
///
/// The scenario (channels, clutter, target) and transmit plan are derived
/// deterministically from the configuration's seed, so equal configurations
/// produce detectors with identical behavior.
///
/// # Safety
///
/// `cfg` must be a live handle; `out` must be a valid pointer to a handle
/// slot.
#[no_mangle]
pub unsafe extern "C" fn isac_detector_new(
    cfg: *const IsacConfig,
    out: *mut *mut IsacDetector,
) -> IsacStatus {
    guard(|| {
        let Some(cfg) = (unsafe { cfg.as_ref() }) else {
            return IsacStatus::NullPointer;
        };
        if out.is_null() {
            return IsacStatus::NullPointer;
        }
        let cfg = cfg.inner.clone();
        if cfg.validate().is_err() {
            return IsacStatus::ConfigError;
        }
        let mut scen_rng = derive_trial_stream(cfg.seed, "ffi/scenario", 0);
        let scenario = generate_scenario(&cfg, &mut scen_rng);
        let mut plan_rng = derive_trial_stream(cfg.seed, "ffi/plan", 0);
        let plan = build_transmit_plan(&cfg, &scenario, &mut plan_rng);
        let Ok(model) = build_null_model(&scenario, &plan, &cfg) else {
            return IsacStatus::MathError;
        };
        let det = IsacDetector {
            cfg,
            scenario,
            plan,
            model,
        };
        unsafe { *out = Box::into_raw(Box::new(det)) };
        IsacStatus::Ok
    })
}

/// Releases a detector handle.  Null is ignored.
///
/// # Safety
///
/// `det` must be a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn isac_detector_free(det: *mut IsacDetector) {
    if !det.is_null() {
        drop(unsafe { Box::from_raw(det) });
    }
}

/// Reports the frame dimensions the detector expects: `rows` receive
/// antennas by `cols` time samples.
///
/// # Safety
///
/// `det` must be a live handle; `rows` and `cols` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn isac_detector_dims(
    det: *const IsacDetector,
    rows: *mut usize,
    cols: *mut usize,
) -> IsacStatus {
    guard(|| {
        let Some(det) = (unsafe { det.as_ref() }) else {
            return IsacStatus::NullPointer;
        };
        if rows.is_null() || cols.is_null() {
            return IsacStatus::NullPointer;
        }
        unsafe {
            *rows = det.cfg.n_rx;
            *cols = det.cfg.frame_len;
        }
        IsacStatus::Ok
    })
}

/// Reports the payload-to-pilot gain ratio used by threshold calibration.
///
/// # Safety
///
/// `det` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_detector_ratio(
    det: *const IsacDetector,
    out: *mut f64,
) -> IsacStatus {
    guard(|| {
        let Some(det) = (unsafe { det.as_ref() }) else {
            return IsacStatus::NullPointer;
        };
        if out.is_null() {
            return IsacStatus::NullPointer;
        }
        unsafe { *out = det.model.ratio() };
        IsacStatus::Ok
    })
}

/// Computes the log-domain threshold delivering false-alarm probability
/// `p_fa` for this detector.  `p_fa` must lie strictly in (0, 1).
///
/// # Safety
///
/// `det` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_detector_threshold(
    det: *const IsacDetector,
    p_fa: f64,
    out: *mut f64,
) -> IsacStatus {
    guard(|| {
        let Some(det) = (unsafe { det.as_ref() }) else {
            return IsacStatus::NullPointer;
        };
        if out.is_null() {
            return IsacStatus::NullPointer;
        }
        match threshold_for_fap(p_fa, det.cfg.frame_len, det.model.ratio()) {
            Ok(t) => {
                unsafe { *out = t };
                IsacStatus::Ok
            }
            Err(_) => IsacStatus::MathError,
        }
    })
}

/// Draws one frame from the detector's statistical model into `samples`
/// (layout as documented at the top; `len` must equal `2 * rows * cols`).
/// `target_present` selects the hypothesis; `trial_index` selects an
/// independent reproducible random stream.
///
/// # Safety
///
/// `det` must be a live handle; `samples` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn isac_detector_synthesize(
    det: *const IsacDetector,
    target_present: bool,
    trial_index: u64,
    samples: *mut f64,
    len: usize,
) -> IsacStatus {
    guard(|| {
        let Some(det) = (unsafe { det.as_ref() }) else {
            return IsacStatus::NullPointer;
        };
        if samples.is_null() {
            return IsacStatus::NullPointer;
        }
        let rows = det.cfg.n_rx;
        let cols = det.cfg.frame_len;
        if len != 2 * rows * cols {
            return IsacStatus::InvalidArgument;
        }
        let (hyp, alpha) = if target_present {
            (Hypothesis::H1, det.scenario.alpha)
        } else {
            (Hypothesis::H0, C64::new(0.0, 0.0))
        };
        let mut rng = derive_trial_stream(det.cfg.seed, "ffi/frame", trial_index);
        let frame = synthesize_statistical(&det.model, alpha, hyp, &mut rng);
        let out = unsafe { std::slice::from_raw_parts_mut(samples, len) };
        for (k, v) in frame.y.iter().enumerate() {
            out[2 * k] = v.re;
            out[2 * k + 1] = v.im;
        }
        IsacStatus::Ok
    })
}

/// Runs the GLRT on a caller-supplied frame and calibrates the decision
/// threshold for false-alarm probability `p_fa`.
///
/// `len` must equal `2 * rows * cols` for the detector's dimensions.
///
/// # Safety
///
/// `det` must be a live handle; `samples` must point to `len` readable
/// doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_detector_evaluate(
    det: *const IsacDetector,
    samples: *const f64,
    len: usize,
    p_fa: f64,
    out: *mut IsacDetection,
) -> IsacStatus {
    guard(|| {
        let Some(det) = (unsafe { det.as_ref() }) else {
            return IsacStatus::NullPointer;
        };
        if samples.is_null() || out.is_null() {
            return IsacStatus::NullPointer;
        }
        let rows = det.cfg.n_rx;
        let cols = det.cfg.frame_len;
        if len != 2 * rows * cols {
            return IsacStatus::InvalidArgument;
        }
        let Ok(threshold) = threshold_for_fap(p_fa, cols, det.model.ratio()) else {
            return IsacStatus::MathError;
        };
        let data = unsafe { std::slice::from_raw_parts(samples, len) };
        let y = DMatrix::from_fn(rows, cols, |i, j| {
            let k = 2 * (j * rows + i);
            C64::new(data[k], data[k + 1])
        });
        let frame = ReceivedFrame {
            y,
            hypothesis: Hypothesis::H0,
            generation_mode: GenerationMode::Statistical,
        };
        let st = sufficient_stats(&frame, &det.model, &det.plan);
        let g = glrt_statistic(&st, &det.model, cols);
        let d = decide(g.statistic, threshold);
        unsafe {
            *out = IsacDetection {
                statistic: g.statistic,
                alpha_re: g.alpha_hat.re,
                alpha_im: g.alpha_hat.im,
                threshold,
                detected: d.detected,
            };
        }
        IsacStatus::Ok
    })
}

/// Closed-form false-alarm probability at log-domain threshold `log_eta`
/// for frame length `l` and payload-to-pilot gain ratio `ratio`.
///
/// # Safety
///
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_fap_closed_form(
    log_eta: f64,
    l: usize,
    ratio: f64,
    out: *mut f64,
) -> IsacStatus {
    guard(|| {
        if out.is_null() {
            return IsacStatus::NullPointer;
        }
        if !(log_eta.is_finite() && ratio.is_finite()) || l == 0 || ratio < 0.0 {
            return IsacStatus::InvalidArgument;
        }
        unsafe { *out = fap_closed_form(log_eta, l, ratio) };
        IsacStatus::Ok
    })
}

/// Log-domain threshold delivering false-alarm probability `p_fa` for
/// frame length `l` and payload-to-pilot gain ratio `ratio`.
///
/// # Safety
///
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_fap_threshold(
    p_fa: f64,
    l: usize,
    ratio: f64,
    out: *mut f64,
) -> IsacStatus {
    guard(|| {
        if out.is_null() {
            return IsacStatus::NullPointer;
        }
        if l == 0 || !ratio.is_finite() || ratio < 0.0 {
            return IsacStatus::InvalidArgument;
        }
        match threshold_for_fap(p_fa, l, ratio) {
            Ok(t) => {
                unsafe { *out = t };
                IsacStatus::Ok
            }
            Err(_) => IsacStatus::InvalidArgument,
        }
    })
}

/// First-order Marcum Q function `Q1(a, b)`.
///
/// # Safety
///
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_marcum_q1(a: f64, b: f64, out: *mut f64) -> IsacStatus {
    guard(|| {
        if out.is_null() {
            return IsacStatus::NullPointer;
        }
        if !(a >= 0.0 && b >= 0.0) {
            return IsacStatus::InvalidArgument;
        }
        unsafe { *out = marcum_q1(a, b) };
        IsacStatus::Ok
    })
}
