//! C ABI for cutspace.
//!
//! Every entry point returns a `CutspaceStatus`. On failure the message is
//! available from `cutspace_last_error` on the same thread until the next
//! call. Strings handed out by the library are released with
//! `cutspace_string_free`; handles with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::c_char;

use cutspace::decisions::count_decisions;
use cutspace::evaluate::{eval_posterior_with, score_log_pred_with};
use cutspace::posterior::{build_from_docs, enumerate_all, render, Enumeration};
use cutspace::{BayesNet, Caps, Error, Evidence, Format, Partition, TildeMode};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutspaceStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Domain = 5,
    CapExceeded = 6,
    InvalidArgument = 7,
    Panic = 8,
}

pub const CUTSPACE_MODE_PRIOR_WEIGHTED: u32 = 0;
pub const CUTSPACE_MODE_PLAIN_MARGINAL: u32 = 1;

pub const CUTSPACE_FORMAT_TEXT: u32 = 0;
pub const CUTSPACE_FORMAT_LATEX: u32 = 1;

/// Opaque parsed network.
pub struct CutspaceNet {
    net: BayesNet,
}

/// Opaque enumeration of every posterior of one partition.
pub struct CutspaceEnumeration {
    net: BayesNet,
    en: Enumeration,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CutspaceStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } => CutspaceStatus::Parse,
            Error::Network(_)
            | Error::Cycle(_)
            | Error::UnknownNode(_)
            | Error::Partition(_)
            | Error::ModuleCore(_)
            | Error::ModuleIndex { .. }
            | Error::Orientation(_)
            | Error::Decision { .. }
            | Error::Evidence(_)
            | Error::Config(_) => CutspaceStatus::Validation,
            Error::CapExceeded { .. } => CutspaceStatus::CapExceeded,
            _ => CutspaceStatus::Domain,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CutspaceStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CutspaceStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            CutspaceStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(CutspaceStatus::NullPointer, format!("`{what}` is null"))
}

/// # Safety
/// `p` is null or a valid nul-terminated string.
unsafe fn opt_str<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p).to_str().map(Some).map_err(|_| {
        Failure(
            CutspaceStatus::InvalidUtf8,
            format!("`{what}` is not valid UTF-8"),
        )
    })
}

/// # Safety
/// `p` is null or a valid nul-terminated string.
unsafe fn req_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    opt_str(p, what)?.ok_or_else(|| null(what))
}

/// # Safety
/// `out` is null or valid for writes.
unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn to_c(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(CutspaceStatus::Domain, "output contains a nul byte".into()))
}

fn mode(m: u32) -> Result<TildeMode, Failure> {
    match m {
        CUTSPACE_MODE_PRIOR_WEIGHTED => Ok(TildeMode::PriorWeighted),
        CUTSPACE_MODE_PLAIN_MARGINAL => Ok(TildeMode::PlainMarginal),
        _ => Err(Failure(
            CutspaceStatus::InvalidArgument,
            format!("unknown mode {m}"),
        )),
    }
}

fn format(f: u32) -> Result<Format, Failure> {
    match f {
        CUTSPACE_FORMAT_TEXT => Ok(Format::Text),
        CUTSPACE_FORMAT_LATEX => Ok(Format::Latex),
        _ => Err(Failure(
            CutspaceStatus::InvalidArgument,
            format!("unknown format {f}"),
        )),
    }
}

unsafe fn net_ref<'a>(net: *const CutspaceNet) -> Result<&'a BayesNet, Failure> {
    net.as_ref().map(|n| &n.net).ok_or_else(|| null("net"))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// owned by the library and valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn cutspace_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` is null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cutspace_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a network document.
///
/// # Safety
/// `json` is a nul-terminated string; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cutspace_net_parse(
    json: *const c_char,
    out: *mut *mut CutspaceNet,
) -> CutspaceStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let net = BayesNet::parse(req_str(json, "json")?)?;
        out.write(Box::into_raw(Box::new(CutspaceNet { net })));
        Ok(())
    })
}

/// # Safety
/// `net` is null or a handle from `cutspace_net_parse` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cutspace_net_free(net: *mut CutspaceNet) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` is a live handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cutspace_net_node_count(
    net: *const CutspaceNet,
    out: *mut usize,
) -> CutspaceStatus {
    guard(|| write_out(out, net_ref(net)?.len(), "out"))
}

/// Number of valid decisions on `n` module vertices.
///
/// # Safety
/// `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cutspace_count_decisions(n: usize, out: *mut u64) -> CutspaceStatus {
    guard(|| {
        if n == 0 || n > 64 {
            return Err(Failure(
                CutspaceStatus::InvalidArgument,
                format!("vertex count {n} outside 1..=64"),
            ));
        }
        let count = count_decisions(n);
        let count = u64::try_from(count).map_err(|_| {
            Failure(
                CutspaceStatus::CapExceeded,
                format!("count for {n} vertices exceeds 64 bits"),
            )
        })?;
        write_out(out, count, "out")
    })
}

/// Builds every posterior over orientations and decision sets of a partition.
/// A null `partition_json` means a single block.
///
/// # Safety
/// `net` is a live handle; `partition_json` is null or nul-terminated; `out`
/// is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cutspace_enumerate(
    net: *const CutspaceNet,
    partition_json: *const c_char,
    mode_flag: u32,
    out: *mut *mut CutspaceEnumeration,
) -> CutspaceStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let net = net_ref(net)?;
        let partition = match opt_str(partition_json, "partition_json")? {
            Some(text) => Partition::parse(net, text)?,
            None => Partition::single_block(net)?,
        };
        let en = enumerate_all(net, &partition, mode(mode_flag)?, &Caps::default())?;
        out.write(Box::into_raw(Box::new(CutspaceEnumeration {
            net: net.clone(),
            en,
        })));
        Ok(())
    })
}

/// # Safety
/// `en` is null or a handle from `cutspace_enumerate` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cutspace_enumeration_free(en: *mut CutspaceEnumeration) {
    if !en.is_null() {
        drop(Box::from_raw(en));
    }
}

/// Number of posteriors built, duplicates included.
///
/// # Safety
/// `en` is a live handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cutspace_enumeration_len(
    en: *const CutspaceEnumeration,
    out: *mut usize,
) -> CutspaceStatus {
    guard(|| {
        let en = en.as_ref().ok_or_else(|| null("en"))?;
        write_out(out, en.en.built.len(), "out")
    })
}

/// Number of distinct posteriors.
///
/// # Safety
/// `en` is a live handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cutspace_enumeration_distinct_len(
    en: *const CutspaceEnumeration,
    out: *mut usize,
) -> CutspaceStatus {
    guard(|| {
        let en = en.as_ref().ok_or_else(|| null("en"))?;
        write_out(out, en.en.distinct.len(), "out")
    })
}

/// Renders the posterior at `index`. The string is freed with
/// `cutspace_string_free`.
///
/// # Safety
/// `en` is a live handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cutspace_enumeration_render(
    en: *const CutspaceEnumeration,
    index: usize,
    format_flag: u32,
    out: *mut *mut c_char,
) -> CutspaceStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let en = en.as_ref().ok_or_else(|| null("en"))?;
        let built = en.en.built.get(index).ok_or_else(|| {
            Failure(
                CutspaceStatus::InvalidArgument,
                format!(
                    "index {index} out of range for {} posteriors",
                    en.en.built.len()
                ),
            )
        })?;
        out.write(to_c(render(
            &en.net,
            &built.posterior,
            format(format_flag)?,
        ))?);
        Ok(())
    })
}

/// Evaluates one posterior and writes its table as JSON. Null documents take
/// their defaults: a single block, lower-to-higher orientation, the first
/// decision set, no evidence.
///
/// # Safety
/// `net` is a live handle; every document is null or nul-terminated; `out` is
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cutspace_eval_json(
    net: *const CutspaceNet,
    partition_json: *const c_char,
    orientation_json: *const c_char,
    decision_json: *const c_char,
    evidence_json: *const c_char,
    mode_flag: u32,
    out: *mut *mut c_char,
) -> CutspaceStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let net = net_ref(net)?;
        let caps = Caps::default();
        let (_, p) = build_from_docs(
            net,
            opt_str(partition_json, "partition_json")?,
            opt_str(orientation_json, "orientation_json")?,
            opt_str(decision_json, "decision_json")?,
            mode(mode_flag)?,
            &caps,
        )?;
        let ev = match opt_str(evidence_json, "evidence_json")? {
            Some(text) => Evidence::parse(net, text)?,
            None => Evidence::new(),
        };
        let table = eval_posterior_with(net, &p, &ev, &caps)?;
        out.write(to_c(table.to_json(net).to_string())?);
        Ok(())
    })
}

/// Held-out log predictive density of one posterior, as JSON. Document
/// defaults follow `cutspace_eval_json`; `heldout_json` is required.
///
/// # Safety
/// As for `cutspace_eval_json`.
#[no_mangle]
pub unsafe extern "C" fn cutspace_score_json(
    net: *const CutspaceNet,
    partition_json: *const c_char,
    orientation_json: *const c_char,
    decision_json: *const c_char,
    train_json: *const c_char,
    heldout_json: *const c_char,
    mode_flag: u32,
    out: *mut *mut c_char,
) -> CutspaceStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let net = net_ref(net)?;
        let caps = Caps::default();
        let (_, p) = build_from_docs(
            net,
            opt_str(partition_json, "partition_json")?,
            opt_str(orientation_json, "orientation_json")?,
            opt_str(decision_json, "decision_json")?,
            mode(mode_flag)?,
            &caps,
        )?;
        let train = match opt_str(train_json, "train_json")? {
            Some(text) => Evidence::parse(net, text)?,
            None => Evidence::new(),
        };
        let heldout = Evidence::parse(net, req_str(heldout_json, "heldout_json")?)?;
        let score = score_log_pred_with(net, &p, &train, &heldout, &caps)?;
        out.write(to_c(score.to_json().to_string())?);
        Ok(())
    })
}
