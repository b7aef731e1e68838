//! C ABI over `coopcav`.
//!
//! All objects are opaque heap handles released by their `*_free` function.
//! Every fallible call returns a [`CoopStatus`]; on failure the message is
//! kept per thread and can be read with [`coop_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use coopcav::cooperativity::{cooperative_fraction, SolveOptions};
use coopcav::observables::{
    emission_spectrum, observe, CorrelationOptions, HorizonOptions, SpectrumOptions, SpectrumTrace,
};
use coopcav::steady_state::{solve_steady, SteadyStateOptions, SteadyStateResult};
use coopcav::{Liouvillian, SystemParams};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoopStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SolverFailure = 3,
    Panic = 4,
    BufferTooSmall = 5,
}

/// System parameters being assembled.
pub struct CoopParams {
    inner: SystemParams,
}

/// A solved steady state together with its generator.
pub struct CoopSteadyState {
    generator: Liouvillian,
    result: SteadyStateResult,
}

/// An emission spectrum on an ascending frequency grid.
pub struct CoopSpectrum {
    inner: SpectrumTrace,
}

/// Scalar observables of a steady state. Undefined values are NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct CoopObservables {
    pub n: f64,
    pub z: f64,
    pub nj: f64,
    pub g2: f64,
    pub residual: f64,
    pub truncation_tail: f64,
    pub spectral_gap: f64,
}

/// Cooperative fraction and its ingredients. Undefined values are NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct CoopCooperativity {
    pub cf: f64,
    pub shared_n: f64,
    pub independent_n_total: f64,
    pub reference: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: CoopStatus, msg: impl Into<String>) -> CoopStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> CoopStatus) -> CoopStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(CoopStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn nan_if_none(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NAN)
}

/// Copy the last error message of this thread into `buf` (NUL terminated).
///
/// Returns the buffer size needed including the terminator, or 0 when there
/// is no error. Nothing is written when `buf` is null or too small.
///
/// # Safety
/// `buf` must be null or valid for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn coop_last_error_message(buf: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && capacity >= bytes.len() {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, bytes.len());
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn coop_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Resonant, identical emitters. Use [`coop_params_set_detuning`] to detune.
///
/// # Safety
/// `out` must be null or valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn coop_params_new(
    n_emitters: usize,
    g: f64,
    kappa: f64,
    pump: f64,
    dephasing: f64,
    n_max: usize,
    out: *mut *mut CoopParams,
) -> CoopStatus {
    guard(|| {
        if out.is_null() {
            return fail(CoopStatus::NullPointer, "out is null");
        }
        let mut p = SystemParams::resonant(n_emitters, g, pump, n_max);
        p.kappa = kappa;
        p.dephasing = dephasing;
        if let Err(e) = p.validate().and_then(|_| p.layout().map(|_| ())) {
            return fail(CoopStatus::InvalidArgument, e.to_string());
        }
        *out = Box::into_raw(Box::new(CoopParams { inner: p }));
        CoopStatus::Ok
    })
}

/// # Safety
/// `params` must be null or a live handle from [`coop_params_new`].
#[no_mangle]
pub unsafe extern "C" fn coop_params_set_detuning(
    params: *mut CoopParams,
    emitter: usize,
    detuning: f64,
) -> CoopStatus {
    guard(|| {
        let Some(p) = params.as_mut() else {
            return fail(CoopStatus::NullPointer, "params is null");
        };
        if emitter >= p.inner.n_emitters {
            return fail(
                CoopStatus::InvalidArgument,
                format!("emitter {emitter} out of range 0..{}", p.inner.n_emitters),
            );
        }
        if !detuning.is_finite() {
            return fail(CoopStatus::InvalidArgument, "detuning must be finite");
        }
        p.inner.detunings[emitter] = detuning;
        CoopStatus::Ok
    })
}

/// # Safety
/// `params` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn coop_params_free(params: *mut CoopParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Solve for the steady state. `tol <= 0` selects the default residual bound.
///
/// # Safety
/// `params` must be a live handle and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn coop_steady_state_solve(
    params: *const CoopParams,
    tol: f64,
    out: *mut *mut CoopSteadyState,
) -> CoopStatus {
    guard(|| {
        let (Some(p), false) = (params.as_ref(), out.is_null()) else {
            return fail(CoopStatus::NullPointer, "params or out is null");
        };
        let generator = match Liouvillian::new(&p.inner) {
            Ok(l) => l,
            Err(e) => return fail(CoopStatus::InvalidArgument, e.to_string()),
        };
        let mut opts = SteadyStateOptions::default();
        if tol > 0.0 {
            opts.tol = tol;
        }
        match solve_steady(&generator, &opts) {
            Ok(result) => {
                *out = Box::into_raw(Box::new(CoopSteadyState { generator, result }));
                CoopStatus::Ok
            }
            Err(e) => fail(CoopStatus::SolverFailure, e.to_string()),
        }
    })
}

/// # Safety
/// `state` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn coop_steady_state_observables(
    state: *const CoopSteadyState,
    out: *mut CoopObservables,
) -> CoopStatus {
    guard(|| {
        let (Some(s), Some(o)) = (state.as_ref(), out.as_mut()) else {
            return fail(CoopStatus::NullPointer, "state or out is null");
        };
        match observe(&s.result.rho, s.generator.params()) {
            Ok(rec) => {
                *o = CoopObservables {
                    n: rec.n,
                    z: rec.z,
                    nj: rec.nj,
                    g2: nan_if_none(rec.g2),
                    residual: s.result.residual,
                    truncation_tail: s.result.truncation_tail,
                    spectral_gap: nan_if_none(s.result.spectral_gap_estimate),
                };
                CoopStatus::Ok
            }
            Err(e) => fail(CoopStatus::SolverFailure, e.to_string()),
        }
    })
}

/// # Safety
/// `state` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn coop_steady_state_free(state: *mut CoopSteadyState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Shared-cavity output against one cavity per emitter, same truncation.
///
/// # Safety
/// `params` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn coop_cooperative_fraction(
    params: *const CoopParams,
    out: *mut CoopCooperativity,
) -> CoopStatus {
    guard(|| {
        let (Some(p), Some(o)) = (params.as_ref(), out.as_mut()) else {
            return fail(CoopStatus::NullPointer, "params or out is null");
        };
        match cooperative_fraction(&p.inner, &SolveOptions::default()) {
            Ok(c) => {
                *o = CoopCooperativity {
                    cf: nan_if_none(c.cf),
                    shared_n: c.shared_n,
                    independent_n_total: c.independent_total(),
                    reference: nan_if_none(c.reference),
                };
                CoopStatus::Ok
            }
            Err(e) => fail(CoopStatus::SolverFailure, e.to_string()),
        }
    })
}

/// Emission spectrum of a steady state with an automatically sized horizon.
///
/// # Safety
/// `state` must be a live handle and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn coop_spectrum_compute(
    state: *const CoopSteadyState,
    out: *mut *mut CoopSpectrum,
) -> CoopStatus {
    guard(|| {
        let (Some(s), false) = (state.as_ref(), out.is_null()) else {
            return fail(CoopStatus::NullPointer, "state or out is null");
        };
        match emission_spectrum(
            &s.result.rho,
            &s.generator,
            &HorizonOptions::default(),
            &CorrelationOptions::default(),
            &SpectrumOptions::default(),
        ) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(CoopSpectrum { inner }));
                CoopStatus::Ok
            }
            Err(e) => fail(CoopStatus::SolverFailure, e.to_string()),
        }
    })
}

/// Number of frequency samples; 0 for a null handle.
///
/// # Safety
/// `spectrum` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn coop_spectrum_len(spectrum: *const CoopSpectrum) -> usize {
    spectrum.as_ref().map_or(0, |s| s.inner.omega.len())
}

/// Copy frequencies and spectral density into caller buffers of `capacity`
/// elements each.
///
/// # Safety
/// `omega` and `density` must be valid for `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn coop_spectrum_copy(
    spectrum: *const CoopSpectrum,
    omega: *mut f64,
    density: *mut f64,
    capacity: usize,
) -> CoopStatus {
    guard(|| {
        let Some(s) = spectrum.as_ref() else {
            return fail(CoopStatus::NullPointer, "spectrum is null");
        };
        if omega.is_null() || density.is_null() {
            return fail(CoopStatus::NullPointer, "output buffer is null");
        }
        let n = s.inner.omega.len();
        if capacity < n {
            return fail(
                CoopStatus::BufferTooSmall,
                format!("need {n} elements, got {capacity}"),
            );
        }
        ptr::copy_nonoverlapping(s.inner.omega.as_ptr(), omega, n);
        ptr::copy_nonoverlapping(s.inner.s.as_ptr(), density, n);
        CoopStatus::Ok
    })
}

/// Full width at half maximum of the tallest peak; NaN when undefined.
///
/// # Safety
/// `spectrum` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn coop_spectrum_fwhm(
    spectrum: *const CoopSpectrum,
    out: *mut f64,
) -> CoopStatus {
    guard(|| {
        let (Some(s), Some(o)) = (spectrum.as_ref(), out.as_mut()) else {
            return fail(CoopStatus::NullPointer, "spectrum or out is null");
        };
        *o = nan_if_none(s.inner.fwhm);
        CoopStatus::Ok
    })
}

/// # Safety
/// `spectrum` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn coop_spectrum_free(spectrum: *mut CoopSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}
