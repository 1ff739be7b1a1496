//! C interface to `surfint`.
//!
//! Every function returns a [`SurfintStatus`]. Objects cross the boundary as opaque
//! handles that the caller releases with the matching `_free` function. Strings
//! returned through `char **` are owned by the caller and released with
//! [`surfint_string_free`]. After a non-`Ok` status, [`surfint_last_error`] returns a
//! message for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use surfint::catalog::{catalog_entry, default_registries, run_registry, Registry, RunOptions};
use surfint::dynamics::{SystemSpec, SystemSpecJson};
use surfint::fields::{parse, ChartPoint, Expr, Var};
use surfint::sphere::{sphere_constraint_residual, SymTensor3};
use surfint::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurfintStatus {
    Ok = 0,
    /// A residual was at or above tolerance.
    ResidualFailure = 1,
    NullPointer = 2,
    InvalidUtf8 = 3,
    Parse = 4,
    Schema = 5,
    Invalid = 6,
    NotReal = 7,
    NotProper = 8,
    NotFlatGauge = 9,
    Domain = 10,
    TooManyExclusions = 11,
    StepFailure = 12,
    DomainExit = 13,
    SeedObstruction = 14,
    NorthPole = 15,
    SingularDenominator = 16,
    Panic = 17,
}

impl From<&Error> for SurfintStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Parse(_) => SurfintStatus::Parse,
            Error::Schema(_) => SurfintStatus::Schema,
            Error::Invalid(_) => SurfintStatus::Invalid,
            Error::NotReal(_) => SurfintStatus::NotReal,
            Error::NotProper { .. } => SurfintStatus::NotProper,
            Error::NotFlatGauge => SurfintStatus::NotFlatGauge,
            Error::Domain(_) => SurfintStatus::Domain,
            Error::TooManyExclusions { .. } => SurfintStatus::TooManyExclusions,
            Error::StepFailure { .. } => SurfintStatus::StepFailure,
            Error::DomainExit { .. } => SurfintStatus::DomainExit,
            Error::SeedObstruction { .. } => SurfintStatus::SeedObstruction,
            Error::NorthPole => SurfintStatus::NorthPole,
            Error::SingularDenominator => SurfintStatus::SingularDenominator,
        }
    }
}

/// A system: chart, optional structure functions, potential and integrals.
pub struct SurfintSystem {
    spec: SystemSpec,
    registries: Vec<Registry>,
}

/// A scalar field in `z`, `z̄`.
pub struct SurfintField {
    expr: Expr,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap());
}

/// Run `f`, turning errors and panics into a status and the thread-local message.
fn guard(f: impl FnOnce() -> Result<SurfintStatus, (SurfintStatus, String)>) -> SurfintStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            SurfintStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (SurfintStatus, String) {
    ((&e).into(), e.to_string())
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, (SurfintStatus, String)> {
    if p.is_null() {
        return Err((SurfintStatus::NullPointer, "null string".into()));
    }
    CStr::from_ptr(p).to_str().map_err(|e| (SurfintStatus::InvalidUtf8, e.to_string()))
}

fn null_check<T>(p: *const T, what: &str) -> Result<(), (SurfintStatus, String)> {
    if p.is_null() {
        Err((SurfintStatus::NullPointer, format!("null {}", what)))
    } else {
        Ok(())
    }
}

/// Message for the last non-`Ok` status on this thread. Valid until the next call.
#[no_mangle]
pub extern "C" fn surfint_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn surfint_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Build a system from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfint_system_from_json(json: *const c_char, out: *mut *mut SurfintSystem) -> SurfintStatus {
    guard(|| {
        null_check(out, "output pointer")?;
        let text = read_str(json)?;
        let js: SystemSpecJson = serde_json::from_str(text).map_err(|e| (SurfintStatus::Schema, e.to_string()))?;
        let spec = SystemSpec::from_json(&js).map_err(lib_err)?;
        let registries = default_registries(&spec);
        *out = Box::into_raw(Box::new(SurfintSystem { spec, registries }));
        Ok(SurfintStatus::Ok)
    })
}

/// Look up a named catalog system.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfint_system_from_catalog(name: *const c_char, out: *mut *mut SurfintSystem) -> SurfintStatus {
    guard(|| {
        null_check(out, "output pointer")?;
        let name = read_str(name)?;
        let e = catalog_entry(name).ok_or_else(|| (SurfintStatus::Invalid, format!("no catalog entry `{}`", name)))?;
        *out = Box::into_raw(Box::new(SurfintSystem { spec: e.spec, registries: e.registries }));
        Ok(SurfintStatus::Ok)
    })
}

/// # Safety
/// `sys` must come from a `surfint_system_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn surfint_system_free(sys: *mut SurfintSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Evaluate residual registries. `registries` is a comma-separated list, or null for the
/// system's default set. Writes the largest residual and, if `report_json` is non-null,
/// a JSON report. Returns `ResidualFailure` when any residual reaches `tolerance`.
///
/// # Safety
/// `sys` must be a live handle; `max_residual` valid; `registries` null or a string;
/// `report_json` null or valid.
#[no_mangle]
pub unsafe extern "C" fn surfint_verify(
    sys: *const SurfintSystem,
    registries: *const c_char,
    tolerance: f64,
    max_residual: *mut f64,
    report_json: *mut *mut c_char,
) -> SurfintStatus {
    guard(|| {
        null_check(sys, "system")?;
        null_check(max_residual, "output pointer")?;
        let sys = &*sys;
        let regs: Vec<Registry> = if registries.is_null() {
            sys.registries.clone()
        } else {
            read_str(registries)?.split(',').map(|s| s.trim().parse()).collect::<Result<_, _>>().map_err(lib_err)?
        };
        let opts = RunOptions::default();
        let mut worst = 0.0f64;
        let mut pass = true;
        let mut report = serde_json::Map::new();
        for r in regs {
            let rep = run_registry(&sys.spec, r, &opts).map_err(lib_err)?;
            worst = worst.max(rep.worst().map_or(0.0, |w| w.1));
            pass &= rep.passes(tolerance);
            report.insert(r.name().to_string(), serde_json::to_value(&rep).unwrap());
        }
        *max_residual = worst;
        if !report_json.is_null() {
            let text = serde_json::to_string(&report).unwrap();
            *report_json = CString::new(text).unwrap().into_raw();
        }
        if pass {
            Ok(SurfintStatus::Ok)
        } else {
            Err((SurfintStatus::ResidualFailure, format!("largest residual {:e} at or above {:e}", worst, tolerance)))
        }
    })
}

/// Parse a field such as `"z*zbar + exp(z)"`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfint_field_parse(text: *const c_char, out: *mut *mut SurfintField) -> SurfintStatus {
    guard(|| {
        null_check(out, "output pointer")?;
        let expr = parse(read_str(text)?).map_err(|e| lib_err(e.into()))?;
        *out = Box::into_raw(Box::new(SurfintField { expr }));
        Ok(SurfintStatus::Ok)
    })
}

/// # Safety
/// `f` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn surfint_field_free(f: *mut SurfintField) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Value at `x + iy`.
///
/// # Safety
/// `f` must be a live handle and `re`, `im` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn surfint_field_eval(f: *const SurfintField, x: f64, y: f64, re: *mut f64, im: *mut f64) -> SurfintStatus {
    guard(|| {
        null_check(f, "field")?;
        null_check(re, "output pointer")?;
        null_check(im, "output pointer")?;
        let v = (*f).expr.eval(ChartPoint::new(x, y)).map_err(|e| lib_err(e.into()))?;
        *re = v.re;
        *im = v.im;
        Ok(SurfintStatus::Ok)
    })
}

/// Wirtinger derivative: `wrt_zbar == 0` for `∂_z`, otherwise `∂_z̄`.
///
/// # Safety
/// `f` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfint_field_diff(f: *const SurfintField, wrt_zbar: i32, out: *mut *mut SurfintField) -> SurfintStatus {
    guard(|| {
        null_check(f, "field")?;
        null_check(out, "output pointer")?;
        let var = if wrt_zbar == 0 { Var::Z } else { Var::Zbar };
        *out = Box::into_raw(Box::new(SurfintField { expr: (*f).expr.diff(var) }));
        Ok(SurfintStatus::Ok)
    })
}

/// Canonical text of a field.
///
/// # Safety
/// `f` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfint_field_to_string(f: *const SurfintField, out: *mut *mut c_char) -> SurfintStatus {
    guard(|| {
        null_check(f, "field")?;
        null_check(out, "output pointer")?;
        *out = CString::new((*f).expr.to_string()).unwrap().into_raw();
        Ok(SurfintStatus::Ok)
    })
}

/// Sphere obstruction `|Remn|/φ³` for the pair of trace-free tensors given as
/// `xx, xy, xz, yy, yz, zz`, at chart point `x + iy`.
///
/// # Safety
/// `l1`, `l2` must point to 6 doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn surfint_sphere_residual(l1: *const f64, l2: *const f64, x: f64, y: f64, out: *mut f64) -> SurfintStatus {
    guard(|| {
        null_check(l1, "tensor")?;
        null_check(l2, "tensor")?;
        null_check(out, "output pointer")?;
        let read = |p: *const f64| -> [f64; 6] { std::array::from_fn(|i| *p.add(i)) };
        let a = SymTensor3::from_f64(read(l1)).map_err(lib_err)?;
        let b = SymTensor3::from_f64(read(l2)).map_err(lib_err)?;
        *out = sphere_constraint_residual(&a, &b, ChartPoint::new(x, y)).map_err(lib_err)?;
        Ok(SurfintStatus::Ok)
    })
}
