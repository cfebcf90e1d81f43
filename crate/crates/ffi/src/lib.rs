//! C ABI over the ctlens statistics, prompt, parsing and store primitives.
//!
//! Every function returns a [`CtlStatus`]; results go through out-pointers.
//! On failure the message is kept per thread and can be copied out with
//! [`ctl_last_error_message`]. Strings returned by the library are freed
//! with [`ctl_string_free`]; handles with their matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ctlens::llm::{parse_verdict, render_prompt, ParsedVerdict, PromptSpec, Strategy};
use ctlens::stats::{cohen_kappa, mann_whitney_u_with, rank_auc, Ecdf, UTestOptions};
use ctlens::store::{Mode, Store};
use ctlens::{Error, Label, Verdict};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Domain = 4,
    Undefined = 5,
    Dimension = 6,
    Io = 7,
    NotFound = 8,
    Integrity = 9,
    Panic = 10,
    Other = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtlStrategy {
    Simple = 0,
    Justification = 1,
    StepByStep = 2,
}

impl From<CtlStrategy> for Strategy {
    fn from(s: CtlStrategy) -> Self {
        match s {
            CtlStrategy::Simple => Strategy::Simple,
            CtlStrategy::Justification => Strategy::Justification,
            CtlStrategy::StepByStep => Strategy::Sbs,
        }
    }
}

/// Parsed model answer.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtlVerdict {
    No = 0,
    Yes = 1,
    Unparseable = -1,
}

/// Opaque read-only view of a store directory.
pub struct CtlStore {
    store: Store,
}

/// Opaque empirical CDF.
pub struct CtlEcdf {
    ecdf: Ecdf,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(CtlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Domain(_) | Error::Size(_) => CtlStatus::Domain,
            Error::Undefined(_) => CtlStatus::Undefined,
            Error::Dimension(_) => CtlStatus::Dimension,
            Error::Io { .. } => CtlStatus::Io,
            Error::NotFound(_) => CtlStatus::NotFound,
            Error::Integrity(_) | Error::Format(_) => CtlStatus::Integrity,
            Error::Parameter(_) => CtlStatus::InvalidArgument,
            _ => CtlStatus::Other,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CtlStatus::NullPointer, format!("{what} is null"))
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CtlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CtlStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CtlStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or valid for `len` reads.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CtlStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// # Safety
/// `out` must be null or valid for one write.
unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn verdicts(v: &[u8]) -> Result<Vec<Verdict>, Fail> {
    v.iter()
        .map(|&b| match b {
            0 => Ok(Verdict::No),
            1 => Ok(Verdict::Yes),
            other => Err(Fail(
                CtlStatus::InvalidArgument,
                format!("verdict byte {other} is neither 0 nor 1"),
            )),
        })
        .collect()
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated)
/// and return the buffer size it needs, including the NUL. Returns 0 when
/// the last call succeeded. `buf` may be null to query the size.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ctl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Cohen's kappa of two verdict vectors (1 = yes, 0 = no).
///
/// # Safety
/// `a` and `b` must be valid for `n` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn ctl_cohen_kappa(a: *const u8, b: *const u8, n: usize, out: *mut f64) -> CtlStatus {
    guard(|| {
        let a = verdicts(slice(a, n, "a")?)?;
        let b = verdicts(slice(b, n, "b")?)?;
        put(out, cohen_kappa(&a, &b)?.kappa, "out")
    })
}

/// Rank AUC: probability a positive outscores a negative, ties count half.
///
/// # Safety
/// `pos`/`neg` must be valid for `n_pos`/`n_neg` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn ctl_rank_auc(
    pos: *const f64,
    n_pos: usize,
    neg: *const f64,
    n_neg: usize,
    out: *mut f64,
) -> CtlStatus {
    guard(|| {
        let auc = rank_auc(slice(pos, n_pos, "pos")?, slice(neg, n_neg, "neg")?)?;
        put(out, auc, "out")
    })
}

/// Two-sided Mann-Whitney U test. `exact_cap` bounds `n_x * n_y` for the
/// exact distribution; pass 0 to always use the normal approximation.
///
/// # Safety
/// `x`/`y` must be valid for `n_x`/`n_y` reads; `u_out` and `p_out` for one
/// write each.
#[no_mangle]
pub unsafe extern "C" fn ctl_mann_whitney_u(
    x: *const f64,
    n_x: usize,
    y: *const f64,
    n_y: usize,
    exact_cap: usize,
    u_out: *mut f64,
    p_out: *mut f64,
) -> CtlStatus {
    guard(|| {
        let r = mann_whitney_u_with(slice(x, n_x, "x")?, slice(y, n_y, "y")?, UTestOptions { exact_cap })?;
        put(u_out, r.u_statistic, "u_out")?;
        put(p_out, r.p_two_sided, "p_out")
    })
}

/// Prevalence interval from a predicted-positive ratio and the classifier's
/// precision and recall.
///
/// # Safety
/// `upper` and `lower` must be valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn ctl_prevalence_bounds(
    ratio: f64,
    precision: f64,
    recall: f64,
    upper: *mut f64,
    lower: *mut f64,
) -> CtlStatus {
    guard(|| {
        let (u, l) = ctlens::analysis::prevalence_bounds(ratio, precision, recall)?;
        put(upper, u, "upper")?;
        put(lower, l, "lower")
    })
}

/// # Safety
/// `a` and `b` must be valid for `n` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn ctl_cosine_similarity(a: *const f64, b: *const f64, n: usize, out: *mut f64) -> CtlStatus {
    guard(|| {
        let s = ctlens::embedding::cosine_similarity(slice(a, n, "a")?, slice(b, n, "b")?)?;
        put(out, s, "out")
    })
}

/// Zero-shot instruction for `target`. The string is owned by the caller
/// and must be released with [`ctl_string_free`].
///
/// # Safety
/// `target` must be a NUL-terminated string; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ctl_render_prompt(
    strategy: CtlStrategy,
    target: *const c_char,
    out: *mut *mut c_char,
) -> CtlStatus {
    guard(|| {
        let spec = PromptSpec {
            strategy: strategy.into(),
            n_shots: 0,
            examples: Vec::new(),
            target_text: text(target, "target")?.to_string(),
            seed: 0,
            allow_any_shots: false,
        };
        let messages = render_prompt(&spec)?;
        let last = messages.last().expect("at least the instruction").content.clone();
        let c = CString::new(last).map_err(|_| Fail(CtlStatus::InvalidArgument, "prompt contains NUL".into()))?;
        put(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `raw` must be a NUL-terminated string; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ctl_parse_verdict(
    raw: *const c_char,
    strategy: CtlStrategy,
    out: *mut CtlVerdict,
) -> CtlStatus {
    guard(|| {
        let v = match parse_verdict(text(raw, "raw")?, strategy.into()).verdict {
            ParsedVerdict::Yes => CtlVerdict::Yes,
            ParsedVerdict::No => CtlVerdict::No,
            ParsedVerdict::Unparseable => CtlVerdict::Unparseable,
        };
        put(out, v, "out")
    })
}

/// # Safety
/// `s` must be null or a pointer returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ctl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `values` must be valid for `n` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn ctl_ecdf_new(values: *const f64, n: usize, out: *mut *mut CtlEcdf) -> CtlStatus {
    guard(|| {
        let ecdf = Ecdf::new(slice(values, n, "values")?)?;
        put(out, Box::into_raw(Box::new(CtlEcdf { ecdf })), "out")
    })
}

/// Share of the sample at or below `x`; NaN for a null handle.
///
/// # Safety
/// `h` must be null or a live handle from [`ctl_ecdf_new`].
#[no_mangle]
pub unsafe extern "C" fn ctl_ecdf_eval(h: *const CtlEcdf, x: f64) -> f64 {
    match h.as_ref() {
        Some(h) => h.ecdf.eval(x),
        None => f64::NAN,
    }
}

/// # Safety
/// `h` must be null or a handle from [`ctl_ecdf_new`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctl_ecdf_free(h: *mut CtlEcdf) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Open a store directory read-only.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ctl_store_open(path: *const c_char, out: *mut *mut CtlStore) -> CtlStatus {
    guard(|| {
        let store = Store::open(text(path, "path")?, Mode::ReadOnly)?;
        put(out, Box::into_raw(Box::new(CtlStore { store })), "out")
    })
}

/// # Safety
/// `h` must be a live store handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ctl_store_document_count(h: *const CtlStore, out: *mut usize) -> CtlStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("store"))?;
        put(out, h.store.documents().len(), "out")
    })
}

/// Label of `post_id`: 1 for CT, 0 otherwise. `NotFound` when unlabeled.
///
/// # Safety
/// `h` must be a live store handle, `post_id` a NUL-terminated string and
/// `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ctl_store_label(h: *const CtlStore, post_id: *const c_char, out: *mut i32) -> CtlStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("store"))?;
        let id = text(post_id, "post_id")?;
        match h.store.label(id) {
            Some(l) => put(out, i32::from(l == Label::Ct), "out"),
            None => Err(Fail(CtlStatus::NotFound, format!("post {id} has no label"))),
        }
    })
}

/// # Safety
/// `h` must be null or a handle from [`ctl_store_open`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctl_store_free(h: *mut CtlStore) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}
