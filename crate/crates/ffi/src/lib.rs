//! C ABI over `mesocov`.
//!
//! Every fallible call returns a [`MesocovStatus`]; on failure a message is
//! available from [`mesocov_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Strings returned
//! through `out` pointers are owned by the caller and released with
//! [`mesocov_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mesocov::cli::{predictions, PredictConfig};
use mesocov::ensemble::{EnsembleSpec, Symmetry};
use mesocov::formal::{exponents, parse_monomial};
use mesocov::rng::RngStream;
use mesocov::spectral::{eigen_decompose, msc_stieltjes, sine_kernel};
use mesocov::theory::cov_green_conjugate;
use mesocov::window::GreenWindow;
use mesocov::Error;
use num_complex::Complex64;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MesocovStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Domain = 4,
    Numerical = 5,
    Parse = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque ensemble handle.
pub struct MesocovEnsemble {
    spec: EnsembleSpec,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MesocovCumulantSums {
    pub sum_c4: f64,
    pub sum_c3_diag: f64,
    pub sum_c22: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MesocovExponents {
    pub nu: [u32; 6],
    pub n: u32,
    pub t: f64,
    pub b0: f64,
    pub b1: f64,
    pub b: f64,
    pub bstar: f64,
    pub chi: f64,
    pub chi_tilde: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MesocovSineKernel {
    pub u: f64,
    pub s: f64,
    pub y1: f64,
    pub y2: f64,
    /// NaN at u = 0.
    pub y1_avg_asym: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(MesocovStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Config(_) => MesocovStatus::Config,
            Error::Domain { .. } | Error::CoincidentSpectralParameter => MesocovStatus::Domain,
            Error::Parse(_) => MesocovStatus::Parse,
            _ => MesocovStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: MesocovStatus, msg: &str) -> Failure {
    Failure(status, msg.to_string())
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MesocovStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            MesocovStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            MesocovStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(MesocovStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(MesocovStatus::InvalidUtf8, "argument is not valid UTF-8"))
}

unsafe fn handle<'a>(h: *const MesocovEnsemble) -> Result<&'a MesocovEnsemble, Failure> {
    h.as_ref().ok_or_else(|| fail(MesocovStatus::NullPointer, "null ensemble handle"))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(MesocovStatus::NullPointer, "null output pointer"));
    }
    out.write(value);
    Ok(())
}

fn owned_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|_| fail(MesocovStatus::Numerical, "output contains a NUL byte"))
}

/// Message for the most recent failure on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn mesocov_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mesocov_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mesocov_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds an ensemble from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mesocov_ensemble_from_json(json: *const c_char, out: *mut *mut MesocovEnsemble) -> MesocovStatus {
    guard(|| {
        let spec = EnsembleSpec::from_json(text(json)?)?;
        write(out, Box::into_raw(Box::new(MesocovEnsemble { spec })))
    })
}

/// GOE (`beta` 1) or GUE (`beta` 2) of dimension `n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mesocov_ensemble_gaussian(beta: u8, n: usize, out: *mut *mut MesocovEnsemble) -> MesocovStatus {
    guard(|| {
        let spec = EnsembleSpec::gaussian(Symmetry::from_beta(beta)?, n);
        spec.validate()?;
        write(out, Box::into_raw(Box::new(MesocovEnsemble { spec })))
    })
}

/// Releases an ensemble handle. Null is ignored.
///
/// # Safety
/// `h` must come from a constructor above and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mesocov_ensemble_free(h: *mut MesocovEnsemble) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Matrix dimension, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mesocov_ensemble_dim(h: *const MesocovEnsemble) -> usize {
    h.as_ref().map_or(0, |e| e.spec.n)
}

/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mesocov_ensemble_cumulant_sums(h: *const MesocovEnsemble, out: *mut MesocovCumulantSums) -> MesocovStatus {
    guard(|| {
        let s = handle(h)?.spec.cumulant_sums()?;
        write(out, MesocovCumulantSums { sum_c4: s.sum_c4, sum_c3_diag: s.sum_c3_diag, sum_c22: s.sum_c22 })
    })
}

/// Samples one matrix from stream (`master_seed`, `sample_index`) and writes
/// its ascending eigenvalues to `out`, which must hold at least `len` values.
///
/// # Safety
/// `h` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mesocov_ensemble_sample_eigenvalues(
    h: *const MesocovEnsemble,
    master_seed: u64,
    sample_index: u64,
    out: *mut f64,
    len: usize,
) -> MesocovStatus {
    guard(|| {
        let e = handle(h)?;
        if out.is_null() {
            return Err(fail(MesocovStatus::NullPointer, "null output buffer"));
        }
        if len < e.spec.n {
            return Err(Failure(MesocovStatus::BufferTooSmall, format!("buffer holds {len} values, need {}", e.spec.n)));
        }
        let m = e.spec.sample(RngStream::new(master_seed, sample_index))?;
        let eig = eigen_decompose(&m, sample_index)?;
        ptr::copy_nonoverlapping(eig.eigenvalues.as_ptr(), out, eig.eigenvalues.len());
        Ok(())
    })
}

/// Stieltjes transform of the semicircle at `re + i im`, `im > 0`.
///
/// # Safety
/// `out_re` and `out_im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mesocov_msc(re: f64, im: f64, out_re: *mut f64, out_im: *mut f64) -> MesocovStatus {
    guard(|| {
        if !(im > 0.0) || !re.is_finite() || !im.is_finite() {
            return Err(Error::domain("Im z", im).into());
        }
        let m = msc_stieltjes(Complex64::new(re, im));
        write(out_re, m.re)?;
        write(out_im, m.im)
    })
}

/// Predicted Cov(Tr G(E1 + iη), conj Tr G(E2 + iη)) including all correction terms.
///
/// # Safety
/// `h` must be a live handle; `out_re` and `out_im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mesocov_cov_green_conjugate(
    h: *const MesocovEnsemble,
    e1: f64,
    e2: f64,
    eta: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> MesocovStatus {
    guard(|| {
        let spec = &handle(h)?.spec;
        let w = GreenWindow::new(e1, e2, eta)?;
        let obs = mesocov::mc::Observable::GreenCovConjugate { window: w };
        let total = mesocov::mc::predict_observable(spec, &obs)?.total();
        write(out_re, total.re)?;
        write(out_im, total.im)
    })
}

/// Leading-order conjugate covariance without cumulant or zeta corrections.
///
/// # Safety
/// `h` must be a live handle; `out_re` and `out_im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mesocov_cov_green_conjugate_gaussian(
    h: *const MesocovEnsemble,
    e1: f64,
    e2: f64,
    eta: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> MesocovStatus {
    guard(|| {
        let spec = &handle(h)?.spec;
        let w = GreenWindow::new(e1, e2, eta)?;
        let total = cov_green_conjugate(&w, spec.n, &spec.cumulant_sums()?, spec.beta)?.total();
        write(out_re, total.re)?;
        write(out_im, total.im)
    })
}

/// Parses one formal monomial and evaluates its exponents.
///
/// # Safety
/// `monomial` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mesocov_formal_exponents(monomial: *const c_char, alpha: f64, beta: f64, out: *mut MesocovExponents) -> MesocovStatus {
    guard(|| {
        let p = parse_monomial(text(monomial)?).map_err(Error::from)?;
        let r = exponents(&p, alpha, beta)?;
        write(
            out,
            MesocovExponents { nu: r.nu, n: r.n, t: r.t, b0: r.b0, b1: r.b1, b: r.b, bstar: r.bstar, chi: r.chi, chi_tilde: r.chi_tilde },
        )
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mesocov_sine_kernel(u: f64, out: *mut MesocovSineKernel) -> MesocovStatus {
    guard(|| {
        if !u.is_finite() {
            return Err(Error::domain("u", u).into());
        }
        let k = sine_kernel(u);
        write(out, MesocovSineKernel { u: k.u, s: k.s, y1: k.y1, y2: k.y2, y1_avg_asym: k.y1_avg_asym })
    })
}

/// Takes `{"spec": ..., "observables": [...]}` and writes a JSON array of
/// predictions to `*out`; release it with [`mesocov_string_free`].
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mesocov_predict_json(config_json: *const c_char, out: *mut *mut c_char) -> MesocovStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(MesocovStatus::NullPointer, "null output pointer"));
        }
        let cfg: PredictConfig = serde_json::from_str(text(config_json)?).map_err(|e| Error::config(e.to_string()))?;
        let preds = predictions(&cfg)?;
        let s = serde_json::to_string(&preds).map_err(|e| Error::config(e.to_string()))?;
        write(out, owned_string(s)?)
    })
}
