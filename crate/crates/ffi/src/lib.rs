//! C ABI over the cpctl library.
//!
//! Every handle is opaque and owned by the caller until passed to its
//! `_free` function. Fallible calls return a [`CpctlStatus`]; on failure
//! [`cpctl_last_error_message`] describes the error for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use cpctl::engine::{run_vi, EngineConfig, VIResult, VIStatus};
use cpctl::formula::{parse_formula, Formula, Fragment};
use cpctl::model::{builtin_model, load_model, save_model, Mdp, SlipTiers};
use cpctl::policy::{certify_coherence, extract_policy, policy_to_json, FiniteMemoryPolicy};
use cpctl::verify::product_chain_check;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpctlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ModelError = 3,
    FormulaError = 4,
    EngineError = 5,
    PolicyError = 6,
    VerifyError = 7,
    NoTarget = 8,
    OutOfRange = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpctlViStatus {
    TargetMet = 0,
    ConvergedTargetUnmet = 2,
    IterCap = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpctlFragment {
    Cpctl = 0,
    SafePctl = 1,
}

/// Engine settings; obtain defaults from [`cpctl_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CpctlConfig {
    pub epsilon: f64,
    pub max_iters: usize,
    pub convergence_delta: f64,
    pub w_mix: u32,
    pub max_points: usize,
    pub slater_margin: f64,
}

impl From<CpctlConfig> for EngineConfig {
    fn from(c: CpctlConfig) -> Self {
        EngineConfig {
            epsilon: c.epsilon,
            max_iters: c.max_iters,
            convergence_delta: c.convergence_delta,
            w_mix: c.w_mix,
            max_points: c.max_points,
            slater_margin: c.slater_margin,
        }
    }
}

pub struct CpctlModel {
    inner: Arc<Mdp>,
}

pub struct CpctlFormula {
    inner: Arc<Formula>,
}

pub struct CpctlResult {
    model: Arc<Mdp>,
    formula: Arc<Formula>,
    inner: VIResult,
}

pub struct CpctlPolicy {
    model: Arc<Mdp>,
    formula: Arc<Formula>,
    inner: FiniteMemoryPolicy,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type Failure = (CpctlStatus, String);

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CpctlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CpctlStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CpctlStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err((CpctlStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (CpctlStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| (CpctlStatus::NullArgument, format!("{what} is null")))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err((CpctlStatus::NullArgument, "output pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("no interior nul").into_raw()
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn cpctl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cpctl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn cpctl_config_default() -> CpctlConfig {
    let d = EngineConfig::default();
    CpctlConfig {
        epsilon: d.epsilon,
        max_iters: d.max_iters,
        convergence_delta: d.convergence_delta,
        w_mix: d.w_mix,
        max_points: d.max_points,
        slater_margin: d.slater_margin,
    }
}

/// Parses a JSON model document.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpctl_model_from_json(json: *const c_char, out: *mut *mut CpctlModel) -> CpctlStatus {
    guard(|| {
        let m = load_model(text(json, "json")?.as_bytes())
            .map_err(|e| (CpctlStatus::ModelError, e.to_string()))?;
        store(out, CpctlModel { inner: Arc::new(m) })
    })
}

/// Builds a named model: `example1`, `thm1` (uses `alpha`, `eps`),
/// `gridworld1`, `gridworld2`.
///
/// # Safety
/// `name` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpctl_model_builtin(
    name: *const c_char,
    alpha: f64,
    eps: f64,
    out: *mut *mut CpctlModel,
) -> CpctlStatus {
    guard(|| {
        let m = builtin_model(text(name, "name")?, alpha, eps, SlipTiers::default())
            .map_err(|e| (CpctlStatus::ModelError, e.to_string()))?;
        store(out, CpctlModel { inner: Arc::new(m) })
    })
}

/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cpctl_model_num_states(model: *const CpctlModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.num_states())
}

/// Serializes the model; free the result with [`cpctl_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpctl_model_to_json(model: *const CpctlModel, out: *mut *mut c_char) -> CpctlStatus {
    guard(|| {
        let m = handle(model, "model")?;
        if out.is_null() {
            return Err((CpctlStatus::NullArgument, "output pointer is null".into()));
        }
        *out = owned_string(String::from_utf8_lossy(&save_model(&m.inner)).into_owned());
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cpctl_model_free(model: *mut CpctlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `text_in` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpctl_formula_parse(
    text_in: *const c_char,
    fragment: CpctlFragment,
    out: *mut *mut CpctlFormula,
) -> CpctlStatus {
    guard(|| {
        let frag = match fragment {
            CpctlFragment::Cpctl => Fragment::Cpctl,
            CpctlFragment::SafePctl => Fragment::SafePctl,
        };
        let f = parse_formula(text(text_in, "formula")?, frag)
            .map_err(|e| (CpctlStatus::FormulaError, e.to_string()))?;
        store(out, CpctlFormula { inner: Arc::new(f) })
    })
}

/// Number of probabilistic subformulas, i.e. the length of a counter vector.
///
/// # Safety
/// `formula` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cpctl_formula_num_paths(formula: *const CpctlFormula) -> usize {
    formula.as_ref().map_or(0, |f| f.inner.pf())
}

/// # Safety
/// `formula` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cpctl_formula_free(formula: *mut CpctlFormula) {
    if !formula.is_null() {
        drop(Box::from_raw(formula));
    }
}

/// Runs value iteration. `config` may be null for defaults.
///
/// # Safety
/// Handles must be live; `config` null or valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cpctl_synthesize(
    model: *const CpctlModel,
    formula: *const CpctlFormula,
    config: *const CpctlConfig,
    out: *mut *mut CpctlResult,
) -> CpctlStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let f = handle(formula, "formula")?;
        let cfg = config.as_ref().map_or_else(EngineConfig::default, |c| (*c).into());
        let r = run_vi(&m.inner, &f.inner, &cfg).map_err(|e| (CpctlStatus::EngineError, e.to_string()))?;
        store(
            out,
            CpctlResult {
                model: m.inner.clone(),
                formula: f.inner.clone(),
                inner: r,
            },
        )
    })
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cpctl_result_status(result: *const CpctlResult) -> CpctlViStatus {
    match result.as_ref().map(|r| r.inner.status) {
        Some(VIStatus::TargetMet) => CpctlViStatus::TargetMet,
        Some(VIStatus::ConvergedTargetUnmet) => CpctlViStatus::ConvergedTargetUnmet,
        _ => CpctlViStatus::IterCap,
    }
}

/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cpctl_result_iterations(result: *const CpctlResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.iterations)
}

/// Number of frontier points stored for `state`; 0 when out of range.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cpctl_result_num_points(result: *const CpctlResult, state: usize) -> usize {
    match result.as_ref() {
        Some(r) if state < r.model.num_states() => r.inner.frontiers.ids(state).len(),
        _ => 0,
    }
}

fn copy_nu(nu: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if buf.is_null() {
        return Err((CpctlStatus::NullArgument, "buffer is null".into()));
    }
    if len < nu.len() {
        return Err((CpctlStatus::OutOfRange, format!("buffer holds {len}, need {}", nu.len())));
    }
    unsafe { ptr::copy_nonoverlapping(nu.as_ptr(), buf, nu.len()) };
    Ok(())
}

/// Copies the counters of point `k` at `state` into `buf`.
///
/// # Safety
/// `result` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cpctl_result_point_nu(
    result: *const CpctlResult,
    state: usize,
    k: usize,
    buf: *mut f64,
    len: usize,
) -> CpctlStatus {
    guard(|| {
        let r = handle(result, "result")?;
        if state >= r.model.num_states() {
            return Err((CpctlStatus::OutOfRange, format!("state {state} out of range")));
        }
        let ids = r.inner.frontiers.ids(state);
        let id = *ids
            .get(k)
            .ok_or_else(|| (CpctlStatus::OutOfRange, format!("point {k} out of range")))?;
        copy_nu(&r.inner.frontiers.point(id).nu, buf, len)
    })
}

/// Copies the counters of the point that meets the target.
///
/// # Safety
/// `result` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cpctl_result_target_nu(result: *const CpctlResult, buf: *mut f64, len: usize) -> CpctlStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let id = r
            .inner
            .target_point
            .ok_or_else(|| (CpctlStatus::NoTarget, "target not met".into()))?;
        copy_nu(&r.inner.frontiers.point(id).nu, buf, len)
    })
}

/// # Safety
/// `result` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cpctl_result_free(result: *mut CpctlResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Extracts a finite-memory policy for the target point.
///
/// # Safety
/// `result` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpctl_policy_extract(result: *const CpctlResult, out: *mut *mut CpctlPolicy) -> CpctlStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let id = r
            .inner
            .target_point
            .ok_or_else(|| (CpctlStatus::NoTarget, "target not met".into()))?;
        let p = extract_policy(&r.model, &r.formula, &r.inner.frontiers, id)
            .map_err(|e| (CpctlStatus::PolicyError, e.to_string()))?;
        store(
            out,
            CpctlPolicy {
                model: r.model.clone(),
                formula: r.formula.clone(),
                inner: p,
            },
        )
    })
}

/// # Safety
/// `policy` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cpctl_policy_num_memory(policy: *const CpctlPolicy) -> usize {
    policy.as_ref().map_or(0, |p| p.inner.memory().len())
}

/// Serializes the policy; free the result with [`cpctl_string_free`].
///
/// # Safety
/// `policy` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpctl_policy_to_json(policy: *const CpctlPolicy, out: *mut *mut c_char) -> CpctlStatus {
    guard(|| {
        let p = handle(policy, "policy")?;
        if out.is_null() {
            return Err((CpctlStatus::NullArgument, "output pointer is null".into()));
        }
        let bytes = policy_to_json(&p.model, &p.formula, &p.inner);
        *out = owned_string(String::from_utf8_lossy(&bytes).into_owned());
        Ok(())
    })
}

/// Exact path probabilities from the initial state on the product chain.
///
/// # Safety
/// `policy` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cpctl_policy_check(policy: *const CpctlPolicy, buf: *mut f64, len: usize) -> CpctlStatus {
    guard(|| {
        let p = handle(policy, "policy")?;
        let c = product_chain_check(&p.model, &p.inner, &p.formula)
            .map_err(|e| (CpctlStatus::VerifyError, e.to_string()))?;
        copy_nu(&c.initial_profile(), buf, len)
    })
}

/// Returns `Ok` when every compatibility clause holds and `PolicyError`
/// naming the first violation otherwise.
///
/// # Safety
/// `policy` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cpctl_policy_certify(policy: *const CpctlPolicy) -> CpctlStatus {
    guard(|| {
        let p = handle(policy, "policy")?;
        certify_coherence(&p.model, &p.formula, &p.inner.to_valued())
            .map(|_| ())
            .map_err(|e| (CpctlStatus::PolicyError, e.to_string()))
    })
}

/// # Safety
/// `policy` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cpctl_policy_free(policy: *mut CpctlPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}
