//! C ABI over `charpoly-core`.
//!
//! Every entry point returns a [`CharpolyStatus`]; on failure the message is
//! available from [`charpoly_last_error`] on the same thread. Handles are
//! opaque, created by `*_from_json` or `charpoly_estimate` and released by the matching
//! `*_free`. Strings returned to the caller are released with
//! [`charpoly_string_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use charpoly_core::cli::run_estimate;
use charpoly_core::config::RunConfig;
use charpoly_core::hciz::{hciz_closed_form, HcizCase};
use charpoly_core::matalg::pfaffian;
use charpoly_core::report::{RecordStatus, ResultRecord};
use charpoly_core::theory::{predicted_ratio_log, Regime, SpectralConfig};
use charpoly_core::{Complex64, ComplexMatrix, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharpolyStatus {
    Ok = 0,
    InvalidArgument = 1,
    Dimension = 2,
    NotSkewSymmetric = 3,
    ConditionsViolated = 4,
    Estimation = 5,
    Verification = 6,
    Io = 7,
    Json = 8,
    NullPointer = 9,
    Panic = 10,
}

impl From<&Error> for CharpolyStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) => Self::InvalidArgument,
            Error::Dimension(_) => Self::Dimension,
            Error::NotSkewSymmetric { .. } => Self::NotSkewSymmetric,
            Error::ConditionsViolated(_) => Self::ConditionsViolated,
            Error::Estimation(_) => Self::Estimation,
            Error::Verification { .. } => Self::Verification,
            Error::Io(_) | Error::Csv(_) => Self::Io,
            Error::Json(_) => Self::Json,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharpolyRegime {
    ComplexExact = 0,
    Interpolating = 1,
    Excluded = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CharpolyPrediction {
    pub log_ratio_mod_constant: f64,
    pub kernel_det_ratio: f64,
    pub d_value: f64,
    /// A [`CharpolyRegime`] value.
    pub regime: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CharpolyEntry {
    pub n: usize,
    pub zeta_config_id: usize,
    pub log_ratio: f64,
    pub std_error: f64,
    /// NaN when no prediction was available (forced runs).
    pub predicted_log_mod_constant: f64,
    /// NaN when no prediction was available.
    pub residual: f64,
}

/// Opaque run configuration.
pub struct CharpolyConfig(RunConfig);

/// Opaque result of an estimation run.
pub struct CharpolyRecord(ResultRecord);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn guard(f: impl FnOnce() -> Result<(), Error>) -> CharpolyStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CharpolyStatus::Ok,
        Ok(Err(e)) => {
            set_error(e.to_string());
            CharpolyStatus::from(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            CharpolyStatus::Panic
        }
    }
}

fn null(what: &str) -> Error {
    Error::InvalidArgument(format!("null pointer: {what}"))
}

/// Maps null-pointer failures to their own status.
fn guard_ptr(f: impl FnOnce() -> Result<(), Error>) -> CharpolyStatus {
    let s = guard(f);
    if s == CharpolyStatus::InvalidArgument
        && LAST_ERROR.with(|e| e.borrow().as_ref().is_some_and(|m| m.to_bytes().starts_with(b"invalid argument: null pointer")))
    {
        return CharpolyStatus::NullPointer;
    }
    s
}

unsafe fn complex_slice(re: *const f64, im: *const f64, len: usize, what: &str) -> Result<Vec<Complex64>, Error> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if re.is_null() || im.is_null() {
        return Err(null(what));
    }
    let re = std::slice::from_raw_parts(re, len);
    let im = std::slice::from_raw_parts(im, len);
    Ok(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect())
}

fn to_c_string(s: String) -> Result<*mut c_char, Error> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Error::InvalidArgument("string contains a NUL byte".into()))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn charpoly_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn charpoly_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn charpoly_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a JSON run configuration. A missing seed takes the default.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn charpoly_config_from_json(json: *const c_char, out: *mut *mut CharpolyConfig) -> CharpolyStatus {
    guard_ptr(|| {
        if json.is_null() || out.is_null() {
            return Err(null("json/out"));
        }
        *out = ptr::null_mut();
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Error::InvalidArgument("configuration is not UTF-8".into()))?;
        let cfg = RunConfig::from_json(text, None)?;
        *out = Box::into_raw(Box::new(CharpolyConfig(cfg)));
        Ok(())
    })
}

/// Serialises a configuration; free the result with `charpoly_string_free`.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn charpoly_config_to_json(cfg: *const CharpolyConfig, out: *mut *mut c_char) -> CharpolyStatus {
    guard_ptr(|| {
        if cfg.is_null() || out.is_null() {
            return Err(null("cfg/out"));
        }
        *out = to_c_string((*cfg).0.to_json()?)?;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from `charpoly_config_from_json`.
#[no_mangle]
pub unsafe extern "C" fn charpoly_config_free(cfg: *mut CharpolyConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Large-n prediction for shifts `z0 + zeta_j / sqrt(n)`.
///
/// # Safety
/// `zeta_re`/`zeta_im` must hold `m` doubles each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn charpoly_predict(
    kappa20_re: f64,
    kappa20_im: f64,
    kappa22: f64,
    z0_re: f64,
    z0_im: f64,
    zeta_re: *const f64,
    zeta_im: *const f64,
    m: usize,
    n: usize,
    out: *mut CharpolyPrediction,
) -> CharpolyStatus {
    guard_ptr(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let zetas = complex_slice(zeta_re, zeta_im, m, "zeta")?;
        let sc = SpectralConfig::new(Complex64::new(z0_re, z0_im), zetas, n)?;
        let p = predicted_ratio_log(&sc, Complex64::new(kappa20_re, kappa20_im), kappa22)?;
        *out = CharpolyPrediction {
            log_ratio_mod_constant: p.log_ratio_mod_constant,
            kernel_det_ratio: p.kernel_det_ratio,
            d_value: p.d_value,
            regime: match p.regime {
                Regime::ComplexExact => CharpolyRegime::ComplexExact,
                Regime::Interpolating => CharpolyRegime::Interpolating,
                Regime::Excluded => CharpolyRegime::Excluded,
            } as i32,
        };
        Ok(())
    })
}

/// Runs the Monte Carlo estimate described by `cfg`. On an estimation
/// diagnostic the partial record is still returned through `out` together
/// with `CHARPOLY_STATUS_ESTIMATION`.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn charpoly_estimate(cfg: *const CharpolyConfig, out: *mut *mut CharpolyRecord) -> CharpolyStatus {
    guard_ptr(|| {
        if cfg.is_null() || out.is_null() {
            return Err(null("cfg/out"));
        }
        *out = ptr::null_mut();
        let (rec, failure) = run_estimate(&(*cfg).0, &mut std::io::sink())?;
        *out = Box::into_raw(Box::new(CharpolyRecord(rec)));
        failure.map_or(Ok(()), Err)
    })
}

/// # Safety
/// `rec` must be null or a handle from `charpoly_estimate`.
#[no_mangle]
pub unsafe extern "C" fn charpoly_record_free(rec: *mut CharpolyRecord) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}

/// Number of `(n, configuration)` entries; 0 for a null handle.
///
/// # Safety
/// `rec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn charpoly_record_len(rec: *const CharpolyRecord) -> usize {
    rec.as_ref().map_or(0, |r| r.0.entries.len())
}

/// Whether the record is complete (1) or partial (0); -1 for null.
///
/// # Safety
/// `rec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn charpoly_record_is_complete(rec: *const CharpolyRecord) -> i32 {
    rec.as_ref().map_or(-1, |r| (r.0.status == RecordStatus::Complete) as i32)
}

/// # Safety
/// `rec` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn charpoly_record_entry(rec: *const CharpolyRecord, index: usize, out: *mut CharpolyEntry) -> CharpolyStatus {
    guard_ptr(|| {
        if rec.is_null() || out.is_null() {
            return Err(null("rec/out"));
        }
        let entries = &(*rec).0.entries;
        let e = entries
            .get(index)
            .ok_or_else(|| Error::InvalidArgument(format!("entry {index} out of range ({} entries)", entries.len())))?;
        *out = CharpolyEntry {
            n: e.n,
            zeta_config_id: e.zeta_config_id,
            log_ratio: e.ratio.log_ratio,
            std_error: e.ratio.stderr,
            predicted_log_mod_constant: e.prediction.as_ref().map_or(f64::NAN, |p| p.log_ratio_mod_constant),
            residual: e.residual.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Full record as JSON; free the result with `charpoly_string_free`.
///
/// # Safety
/// `rec` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn charpoly_record_to_json(rec: *const CharpolyRecord, out: *mut *mut c_char) -> CharpolyStatus {
    guard_ptr(|| {
        if rec.is_null() || out.is_null() {
            return Err(null("rec/out"));
        }
        *out = to_c_string((*rec).0.to_json()?)?;
        Ok(())
    })
}

/// Pfaffian of a `dim x dim` skew-symmetric matrix given row-major as split
/// real and imaginary parts.
///
/// # Safety
/// `re`/`im` must hold `dim * dim` doubles; `out_re`/`out_im` writable.
#[no_mangle]
pub unsafe extern "C" fn charpoly_pfaffian(
    dim: usize,
    re: *const f64,
    im: *const f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> CharpolyStatus {
    guard_ptr(|| {
        if out_re.is_null() || out_im.is_null() {
            return Err(null("out"));
        }
        let len = dim.checked_mul(dim).ok_or_else(|| Error::Dimension(format!("dimension {dim} overflows")))?;
        let a = ComplexMatrix::from_vec(dim, dim, complex_slice(re, im, len, "matrix")?)?;
        let p = pfaffian(&a)?;
        *out_re = p.re;
        *out_im = p.im;
        Ok(())
    })
}

/// Closed form of the unitary-group integral `int exp(z tr(A U B U*)) dU`
/// for diagonal `A`, `B` with `d` eigenvalues each.
///
/// # Safety
/// All input arrays must hold `d` doubles; `out_re`/`out_im` writable.
#[no_mangle]
pub unsafe extern "C" fn charpoly_hciz(
    d: usize,
    a_re: *const f64,
    a_im: *const f64,
    b_re: *const f64,
    b_im: *const f64,
    z_re: f64,
    z_im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> CharpolyStatus {
    guard_ptr(|| {
        if out_re.is_null() || out_im.is_null() {
            return Err(null("out"));
        }
        let case = HcizCase::new(
            complex_slice(a_re, a_im, d, "a")?,
            complex_slice(b_re, b_im, d, "b")?,
            Complex64::new(z_re, z_im),
        )?;
        let v = hciz_closed_form(&case)?;
        *out_re = v.re;
        *out_im = v.im;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last() -> String {
        let p = charpoly_last_error();
        assert!(!p.is_null());
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }

    #[test]
    fn predict_reference() {
        let (re, im) = ([1.0, 0.0], [0.0, 0.0]);
        let mut p = CharpolyPrediction::default();
        let s = unsafe { charpoly_predict(0.0, 0.0, 0.0, 0.0, 0.0, re.as_ptr(), im.as_ptr(), 2, 64, &mut p) };
        assert_eq!(s, CharpolyStatus::Ok);
        assert!(charpoly_last_error().is_null());
        assert!((p.kernel_det_ratio - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert_eq!(p.regime, CharpolyRegime::ComplexExact as i32);
    }

    #[test]
    fn predict_outside_conditions() {
        let (re, im) = ([1.0, 0.0], [0.0, 0.0]);
        let mut p = CharpolyPrediction::default();
        let s = unsafe { charpoly_predict(1.0, 0.0, 0.0, 0.5, 0.0, re.as_ptr(), im.as_ptr(), 2, 64, &mut p) };
        assert_eq!(s, CharpolyStatus::ConditionsViolated);
        assert!(last().contains("positive det"));
    }

    #[test]
    fn null_pointers_reported() {
        let s = unsafe { charpoly_predict(0.0, 0.0, 0.0, 0.0, 0.0, ptr::null(), ptr::null(), 2, 64, ptr::null_mut()) };
        assert_eq!(s, CharpolyStatus::NullPointer);
        let mut out = ptr::null_mut();
        assert_eq!(unsafe { charpoly_config_from_json(ptr::null(), &mut out) }, CharpolyStatus::NullPointer);
        assert_eq!(unsafe { charpoly_record_len(ptr::null()) }, 0);
        unsafe {
            charpoly_config_free(ptr::null_mut());
            charpoly_record_free(ptr::null_mut());
            charpoly_string_free(ptr::null_mut());
        }
    }

    #[test]
    fn pfaffian_and_skew_check() {
        // J = [[0, 1], [-1, 0]].
        let re = [0.0, 1.0, -1.0, 0.0];
        let im = [0.0; 4];
        let (mut a, mut b) = (0.0, 0.0);
        assert_eq!(unsafe { charpoly_pfaffian(2, re.as_ptr(), im.as_ptr(), &mut a, &mut b) }, CharpolyStatus::Ok);
        assert_eq!((a, b), (1.0, 0.0));
        let re = [1.0, 1.0, -1.0, 0.0];
        assert_eq!(
            unsafe { charpoly_pfaffian(2, re.as_ptr(), im.as_ptr(), &mut a, &mut b) },
            CharpolyStatus::NotSkewSymmetric
        );
    }

    #[test]
    fn hciz_scalar_case() {
        let one = [2.0];
        let zero = [0.0];
        let (mut a, mut b) = (0.0, 0.0);
        let s = unsafe {
            charpoly_hciz(1, one.as_ptr(), zero.as_ptr(), one.as_ptr(), zero.as_ptr(), 0.25, 0.0, &mut a, &mut b)
        };
        assert_eq!(s, CharpolyStatus::Ok);
        assert!((a - 1.0f64.exp()).abs() < 1e-12 && b.abs() < 1e-12);
    }

    #[test]
    fn config_estimate_record() {
        let json = CString::new(
            r#"{"command":"estimate","kappa20":[0.3,0.1],"z0":[0.2,0.0],"zetas":[[1.0,0.0],[0.0,0.0]],"n_list":[8],"samples":2000,"batches":8,"seed":5}"#,
        )
        .unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(unsafe { charpoly_config_from_json(json.as_ptr(), &mut cfg) }, CharpolyStatus::Ok);
        let mut rec = ptr::null_mut();
        assert_eq!(unsafe { charpoly_estimate(cfg, &mut rec) }, CharpolyStatus::Ok);
        assert_eq!(unsafe { charpoly_record_len(rec) }, 1);
        assert_eq!(unsafe { charpoly_record_is_complete(rec) }, 1);
        let mut e = CharpolyEntry::default();
        assert_eq!(unsafe { charpoly_record_entry(rec, 0, &mut e) }, CharpolyStatus::Ok);
        assert_eq!(e.n, 8);
        assert!(e.log_ratio.is_finite() && e.std_error > 0.0 && e.predicted_log_mod_constant.is_finite());
        assert_eq!(unsafe { charpoly_record_entry(rec, 1, &mut e) }, CharpolyStatus::InvalidArgument);
        let mut s = ptr::null_mut();
        assert_eq!(unsafe { charpoly_record_to_json(rec, &mut s) }, CharpolyStatus::Ok);
        let text = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
        assert!(text.contains("\"schema_version\": 1"));
        unsafe {
            charpoly_string_free(s);
            charpoly_record_free(rec);
            charpoly_config_free(cfg);
        }
    }

    #[test]
    fn bad_json() {
        let json = CString::new("{\"samples\": \"many\"}").unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(unsafe { charpoly_config_from_json(json.as_ptr(), &mut cfg) }, CharpolyStatus::InvalidArgument);
        assert!(cfg.is_null());
        assert!(!last().is_empty());
    }
}
