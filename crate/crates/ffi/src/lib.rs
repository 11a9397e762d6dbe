//! C interface to `thermoformal`.
//!
//! Objects cross the boundary as opaque pointers created by `tf_*_new`
//! functions and released by the matching `tf_*_free`. Every fallible call
//! returns a [`TfStatus`]; details of the most recent failure on the calling
//! thread are available from [`tf_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use thermoformal::cli::{self, Command, Overrides};
use thermoformal::config::ExperimentConfig;
use thermoformal::equilibrium::{build_transfer_operator, TransferOperatorApprox};
use thermoformal::num_complex::Complex64;
use thermoformal::solenoid::SolenoidPoint;
use thermoformal::system::{System, SystemConfig};
use thermoformal::thermo::Potential;
use thermoformal::torus::TorusPoint;
use thermoformal::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    InvalidMap = 4,
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TfPotential {
    Zero = 0,
    Holder = 1,
    Geometric = 2,
}

/// A skew-product system together with its expansion profile.
pub struct TfSystem {
    inner: System,
}

/// A discretized transfer operator and its leading eigendata.
pub struct TfOperator {
    inner: TransferOperatorApprox,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> TfStatus {
    match e {
        Error::Config { .. } => TfStatus::Config,
        Error::InvalidMap(_) | Error::Inconsistent(_) | Error::H2Violation { .. } => TfStatus::InvalidMap,
        Error::InvalidArgument(_) | Error::ThetaTooLarge { .. } | Error::EmptySegment | Error::TooLarge { .. } => {
            TfStatus::InvalidArgument
        }
        Error::Io(_) => TfStatus::Io,
        _ => TfStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (TfStatus, String)>) -> TfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TfStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            TfStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (TfStatus, String) {
    (status_of(&e), e.to_string())
}

fn null() -> (TfStatus, String) {
    (TfStatus::NullPointer, "null pointer argument".into())
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, (TfStatus, String)> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (TfStatus::InvalidArgument, "string is not UTF-8".into()))
}

fn potential(kind: TfPotential) -> Potential {
    match kind {
        TfPotential::Zero => Potential::zero(),
        TfPotential::Holder => Potential::holder_test(0.1, 0.05),
        TfPotential::Geometric => Potential::geometric(),
    }
}

/// Copies the message of the last failure on this thread into `buf`
/// (NUL-terminated, truncated to `len`). Returns the full message length,
/// or 0 if there is none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn tf_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Builds one of the shipped systems: `"linear"` or `"pitchfork"`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_system_new_preset(name: *const c_char, out: *mut *mut TfSystem) -> TfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let cfg = match read_str(name)? {
            "linear" => SystemConfig::linear_preset(),
            "pitchfork" => SystemConfig::pitchfork_preset(),
            other => return Err((TfStatus::InvalidArgument, format!("unknown preset '{other}'"))),
        };
        let inner = System::build(cfg).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(TfSystem { inner }));
        Ok(())
    })
}

/// Builds the system described by an INI experiment file's text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_system_from_config(text: *const c_char, out: *mut *mut TfSystem) -> TfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let cfg = ExperimentConfig::parse(read_str(text)?).map_err(lib_err)?;
        let inner = System::build(cfg.system).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(TfSystem { inner }));
        Ok(())
    })
}

/// # Safety
/// `sys` must be null or a pointer from a `tf_system_*` constructor, freed once.
#[no_mangle]
pub unsafe extern "C" fn tf_system_free(sys: *mut TfSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Base dimension, or 0 for a null handle.
///
/// # Safety
/// `sys` must be null or a live system handle.
#[no_mangle]
pub unsafe extern "C" fn tf_system_dim(sys: *const TfSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.inner.f.dim())
}

/// Topological degree of the base map, or 0 for a null handle.
///
/// # Safety
/// `sys` must be null or a live system handle.
#[no_mangle]
pub unsafe extern "C" fn tf_system_degree(sys: *const TfSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.inner.base().deg())
}

/// Fiber contraction rate, or NaN for a null handle.
///
/// # Safety
/// `sys` must be null or a live system handle.
#[no_mangle]
pub unsafe extern "C" fn tf_system_lambda_s(sys: *const TfSystem) -> f64 {
    sys.as_ref().map_or(f64::NAN, |s| s.inner.f.lambda_s())
}

/// Applies the map once in place. Each array has `dim` entries: base
/// coordinates in `[0, 1)` and the real and imaginary fiber parts.
///
/// # Safety
/// `sys` must be a live handle and each array must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_system_step(
    sys: *const TfSystem,
    dim: usize,
    base: *mut f64,
    fiber_re: *mut f64,
    fiber_im: *mut f64,
) -> TfStatus {
    guard(|| {
        let s = sys.as_ref().ok_or_else(null)?;
        if base.is_null() || fiber_re.is_null() || fiber_im.is_null() {
            return Err(null());
        }
        if dim != s.inner.f.dim() {
            return Err((TfStatus::InvalidArgument, format!("dim {dim} != system dim {}", s.inner.f.dim())));
        }
        let b = std::slice::from_raw_parts_mut(base, dim);
        let re = std::slice::from_raw_parts_mut(fiber_re, dim);
        let im = std::slice::from_raw_parts_mut(fiber_im, dim);
        if b.iter().chain(re.iter()).chain(im.iter()).any(|v| !v.is_finite()) {
            return Err((TfStatus::InvalidArgument, "non-finite coordinate".into()));
        }
        let z: Vec<Complex64> = re.iter().zip(im.iter()).map(|(&r, &i)| Complex64::new(r, i)).collect();
        let p = s.inner.f.eval(&SolenoidPoint::new(TorusPoint::new(b), &z));
        b.copy_from_slice(p.base.coords());
        for (k, w) in p.fiber().iter().enumerate() {
            re[k] = w.re;
            im[k] = w.im;
        }
        Ok(())
    })
}

/// Discretizes the transfer operator of `kind` on about `n_cells` cells.
///
/// # Safety
/// `sys` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_operator_new(
    sys: *const TfSystem,
    kind: TfPotential,
    n_cells: usize,
    quadrature: usize,
    seed: u64,
    out: *mut *mut TfOperator,
) -> TfStatus {
    guard(|| {
        let s = sys.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        if n_cells == 0 || quadrature == 0 {
            return Err((TfStatus::InvalidArgument, "n_cells and quadrature must be positive".into()));
        }
        let inner = build_transfer_operator(&s.inner.f, &potential(kind), n_cells, quadrature, seed).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(TfOperator { inner }));
        Ok(())
    })
}

/// # Safety
/// `op` must be null or a pointer from [`tf_operator_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn tf_operator_free(op: *mut TfOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Number of cells actually used, or 0 for a null handle.
///
/// # Safety
/// `op` must be null or a live operator handle.
#[no_mangle]
pub unsafe extern "C" fn tf_operator_cells(op: *const TfOperator) -> usize {
    op.as_ref().map_or(0, |o| o.inner.grid.len())
}

/// Log of the leading eigenvalue.
///
/// # Safety
/// `op` must be null or a live operator handle.
#[no_mangle]
pub unsafe extern "C" fn tf_operator_pressure(op: *const TfOperator) -> f64 {
    op.as_ref().map_or(f64::NAN, |o| o.inner.pressure())
}

/// One minus the ratio of the second to the first eigenvalue modulus.
///
/// # Safety
/// `op` must be null or a live operator handle.
#[no_mangle]
pub unsafe extern "C" fn tf_operator_spectral_gap(op: *const TfOperator) -> f64 {
    op.as_ref().map_or(f64::NAN, |o| o.inner.spectral_gap())
}

/// Runs a subcommand (`verify`, `classify`, `pressure`, `entropy`, `spec`,
/// `curve`, `srb`) on INI text, writing artifacts to `out_dir`. On success
/// `exit_code` receives 0 (checks pass) or 1 (a check failed).
///
/// # Safety
/// String arguments must be NUL-terminated and `exit_code` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_run_command(
    command: *const c_char,
    config_text: *const c_char,
    out_dir: *const c_char,
    exit_code: *mut i32,
) -> TfStatus {
    guard(|| {
        if exit_code.is_null() {
            return Err(null());
        }
        let name = read_str(command)?;
        let cmd = Command::parse(name).ok_or_else(|| (TfStatus::InvalidArgument, format!("unknown command '{name}'")))?;
        let cfg = ExperimentConfig::parse(read_str(config_text)?).map_err(lib_err)?;
        let ov = Overrides {
            out: Some(PathBuf::from(read_str(out_dir)?)),
            ..Overrides::default()
        };
        let o = cli::run_command(cmd, cfg, &ov).map_err(lib_err)?;
        *exit_code = o.exit_code;
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
