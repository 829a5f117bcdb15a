//! C ABI over the verifier, the prefix extractor, the SMT encoder and the
//! reference solver.
//!
//! Conventions:
//!
//! * Every fallible function returns a [`PlcStatus`]; on failure
//!   [`plc_last_error_message`] describes the error on the calling thread.
//! * Handles (`PlcProblem`, `PlcPlan`) are opaque and released with their
//!   `_free` function. Strings returned through `char **` out-parameters are
//!   owned by the caller and released with [`plc_string_free`].
//! * Input strings are NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use plancegis::bench::reference_solve;
use plancegis::pddl::{parse_problem, Problem};
use plancegis::plan::{parse_plan, print_plan, Plan};
use plancegis::semantics::{minimal_infeasible_prefix, verify, SemanticsError, SemanticsMode, VerdictReport};
use plancegis::smt::{emit_smtlib, FrameAxioms};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InconsistentInit = 4,
    /// The plan is valid, so there is no counterexample to return.
    NoCounterexample = 5,
    SolveError = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlcSemantics {
    Strict = 0,
    Appendix = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlcFrame {
    Corrected = 0,
    LiteralAppendix = 1,
}

impl From<PlcSemantics> for SemanticsMode {
    fn from(s: PlcSemantics) -> Self {
        match s {
            PlcSemantics::Strict => SemanticsMode::Strict4Ops,
            PlcSemantics::Appendix => SemanticsMode::AppendixDisjunctive,
        }
    }
}

/// A parsed problem.
pub struct PlcProblem {
    inner: Problem,
}

/// A parsed plan.
pub struct PlcPlan {
    inner: Plan,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(PlcStatus, String);

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PlcStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PlcStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal error (panic)");
            PlcStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(PlcStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(PlcStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(PlcStatus::NullArgument, format!("{name} is null")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(PlcStatus::NullArgument, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("NULs removed").into_raw()
}

fn init_fail(e: impl ToString) -> Fail {
    Fail(PlcStatus::InconsistentInit, e.to_string())
}

/// Parses a problem file's text.
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plc_problem_parse(text: *const c_char, out: *mut *mut PlcProblem) -> PlcStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(text, "text")?;
        let inner = parse_problem(text).map_err(|e| Fail(PlcStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(PlcProblem { inner }));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from [`plc_problem_parse`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn plc_problem_free(problem: *mut PlcProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of objects in the problem; 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn plc_problem_block_count(problem: *const PlcProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.objects.len())
}

/// Parses `START-PLAN`/`END-PLAN` text against the problem's objects.
///
/// # Safety
/// `problem` must be a live handle, `text` a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plc_plan_parse(
    problem: *const PlcProblem,
    text: *const c_char,
    out: *mut *mut PlcPlan,
) -> PlcStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = ptr::null_mut();
        let problem = ref_arg(problem, "problem")?;
        let text = str_arg(text, "text")?;
        let inner = parse_plan(text, &problem.inner.objects)
            .map_err(|e| Fail(PlcStatus::ParseError, e.to_string()))?
            .plan;
        *out = Box::into_raw(Box::new(PlcPlan { inner }));
        Ok(())
    })
}

/// # Safety
/// `plan` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn plc_plan_free(plan: *mut PlcPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Number of actions; 0 for a null handle.
///
/// # Safety
/// `plan` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn plc_plan_len(plan: *const PlcPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.inner.len())
}

/// The plan in `START-PLAN` format.
///
/// # Safety
/// `plan` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plc_plan_to_string(plan: *const PlcPlan, out: *mut *mut c_char) -> PlcStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = ptr::null_mut();
        let plan = ref_arg(plan, "plan")?;
        *out = to_c(print_plan(&plan.inner));
        Ok(())
    })
}

/// Verifies `plan`. Sets `*out_valid` to 1 or 0 and, when `out_json` is not
/// null, stores the verdict as JSON
/// (`{status, failing_step, violated, missing_atoms, prefix}`).
///
/// # Safety
/// Handles must be live; `out_valid` writable; `out_json` null or writable.
#[no_mangle]
pub unsafe extern "C" fn plc_verify(
    problem: *const PlcProblem,
    plan: *const PlcPlan,
    semantics: PlcSemantics,
    out_valid: *mut i32,
    out_json: *mut *mut c_char,
) -> PlcStatus {
    guard(|| {
        out_arg(out_valid, "out_valid")?;
        if !out_json.is_null() {
            *out_json = ptr::null_mut();
        }
        let problem = ref_arg(problem, "problem")?;
        let plan = ref_arg(plan, "plan")?;
        let verdict = verify(&problem.inner, &plan.inner, semantics.into()).map_err(init_fail)?;
        *out_valid = i32::from(verdict.is_valid());
        if !out_json.is_null() {
            let report = VerdictReport::new(&verdict, &plan.inner);
            *out_json = to_c(serde_json::to_string(&report).expect("serializable"));
        }
        Ok(())
    })
}

/// The rendered counterexample: the minimal infeasible prefix in plan
/// format, or the missing goal atoms. Returns `NoCounterexample` for a
/// valid plan.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plc_minimal_prefix(
    problem: *const PlcProblem,
    plan: *const PlcPlan,
    semantics: PlcSemantics,
    out: *mut *mut c_char,
) -> PlcStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = ptr::null_mut();
        let problem = ref_arg(problem, "problem")?;
        let plan = ref_arg(plan, "plan")?;
        match minimal_infeasible_prefix(&problem.inner, &plan.inner, semantics.into()) {
            Ok(cex) => {
                *out = to_c(cex.render());
                Ok(())
            }
            Err(SemanticsError::ContractViolation(m)) => Err(Fail(PlcStatus::NoCounterexample, m)),
            Err(e) => Err(init_fail(e)),
        }
    })
}

/// SMT-LIB2 verification query under strict semantics.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plc_emit_smtlib(
    problem: *const PlcProblem,
    plan: *const PlcPlan,
    frame: PlcFrame,
    out: *mut *mut c_char,
) -> PlcStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = ptr::null_mut();
        let problem = ref_arg(problem, "problem")?;
        let plan = ref_arg(plan, "plan")?;
        let frame = match frame {
            PlcFrame::Corrected => FrameAxioms::Corrected,
            PlcFrame::LiteralAppendix => FrameAxioms::LiteralAppendix,
        };
        let enc = emit_smtlib(&problem.inner, &plan.inner, frame).map_err(init_fail)?;
        *out = to_c(enc.script);
        Ok(())
    })
}

/// A valid plan from the built-in unstack-and-rebuild solver.
///
/// # Safety
/// `problem` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plc_reference_solve(problem: *const PlcProblem, out: *mut *mut PlcPlan) -> PlcStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = ptr::null_mut();
        let problem = ref_arg(problem, "problem")?;
        let inner = reference_solve(&problem.inner).map_err(|e| Fail(PlcStatus::SolveError, e.to_string()))?;
        *out = Box::into_raw(Box::new(PlcPlan { inner }));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn plc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn plc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn plc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
