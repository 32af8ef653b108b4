//! C ABI over the `cody` crate.
//!
//! Every fallible call returns a [`CodyStatus`]. On failure the message is
//! kept per thread and can be read with [`cody_last_error`]. Objects are
//! handed out as opaque pointers and released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cody::explainer::cody::{DEFAULT_ALPHA, DEFAULT_IT_MAX};
use cody::explainer::greedy::DEFAULT_L;
use cody::explainer::DEFAULT_M_MAX;
use cody::harness::{load_jodie_csv, OracleSpec, ReferenceOverrides};
use cody::{
    cody_explain as run_cody, greedy_explain as run_greedy, CodyConfig, Error, ExplanationResult,
    GreedyConfig, PolicyKind, PredictorSession, TemporalGraph,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodyStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotFound = 3,
    Io = 4,
    Parse = 5,
    Oracle = 6,
    Degenerate = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodyExplainer {
    Greedy = 0,
    Cody = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodyPolicy {
    Random = 0,
    Temporal = 1,
    SpatioTemporal = 2,
    EventImpact = 3,
}

/// Search settings. Start from [`cody_explain_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CodyExplainOptions {
    pub explainer: CodyExplainer,
    pub policy: CodyPolicy,
    /// Seed of the random policy.
    pub seed: u64,
    /// Hop radius; 0 takes the oracle's layer count.
    pub k: u32,
    pub m_max: usize,
    pub it_max: u64,
    pub alpha: f64,
    pub l: usize,
    pub best_first_stop: bool,
    pub prune_duplicates: bool,
}

/// Loaded interaction log.
pub struct CodyGraph {
    graph: TemporalGraph,
}

/// Predictor with its prediction cache and call counter.
pub struct CodySession {
    session: PredictorSession,
}

pub struct CodyResult {
    result: ExplanationResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CodyStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownEvent(_) => CodyStatus::NotFound,
            Error::InvalidTarget { .. } | Error::Config(_) | Error::EmptyGroup => {
                CodyStatus::InvalidArgument
            }
            Error::Oracle { .. } | Error::Bridge(_) => CodyStatus::Oracle,
            Error::DegenerateInstance(_) => CodyStatus::Degenerate,
            Error::Parse { .. } | Error::Json(_) => CodyStatus::Parse,
            Error::Io(_) => CodyStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CodyStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| panic.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(Failure(CodyStatus::Panic, format!("panic: {msg}")))
    });
    match outcome {
        Ok(()) => CodyStatus::Ok,
        Err(Failure(status, message)) => {
            set_last_error(message);
            status
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(CodyStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CodyStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn cody_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cody_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load a CSV interaction log (`user_id,item_id,timestamp,state_label,...`).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cody_graph_load_csv(
    path: *const c_char,
    bipartite: bool,
    out: *mut *mut CodyGraph,
) -> CodyStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = text(path, "path")?;
        let graph = load_jodie_csv(Path::new(path), bipartite)?;
        store(out, CodyGraph { graph });
        Ok(())
    })
}

/// # Safety
/// `graph` must come from [`cody_graph_load_csv`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn cody_graph_free(graph: *mut CodyGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live graph handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cody_graph_num_events(graph: *const CodyGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.graph.len())
}

/// # Safety
/// `graph` must be a live graph handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cody_graph_num_nodes(graph: *const CodyGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.graph.node_count())
}

/// Open a predictor session. `oracle` is `reference`, `bridge:<host:port>`
/// or `fixture:<path>`; the reference predictor is fitted to `graph`.
///
/// # Safety
/// `graph` must be live, `oracle` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cody_session_new(
    graph: *const CodyGraph,
    oracle: *const c_char,
    out: *mut *mut CodySession,
) -> CodyStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let graph = borrow(graph, "graph")?;
        let spec: OracleSpec = text(oracle, "oracle")?.parse()?;
        let oracle = spec.build(&graph.graph, &ReferenceOverrides::default())?;
        store(
            out,
            CodySession {
                session: PredictorSession::from_boxed(oracle),
            },
        );
        Ok(())
    })
}

/// # Safety
/// `session` must come from [`cody_session_new`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn cody_session_free(session: *mut CodySession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Distinct predictions computed so far.
///
/// # Safety
/// `session` must be live or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cody_session_oracle_calls(session: *const CodySession) -> u64 {
    session.as_ref().map_or(0, |s| s.session.oracle_calls())
}

/// # Safety
/// `session` must be live or NULL.
#[no_mangle]
pub unsafe extern "C" fn cody_session_clear_cache(session: *mut CodySession) {
    if let Some(s) = session.as_mut() {
        s.session.clear_cache();
    }
}

#[no_mangle]
pub extern "C" fn cody_explain_options_default() -> CodyExplainOptions {
    CodyExplainOptions {
        explainer: CodyExplainer::Cody,
        policy: CodyPolicy::Temporal,
        seed: 0,
        k: 0,
        m_max: DEFAULT_M_MAX,
        it_max: DEFAULT_IT_MAX,
        alpha: DEFAULT_ALPHA,
        l: DEFAULT_L,
        best_first_stop: false,
        prune_duplicates: true,
    }
}

unsafe fn explain_impl(
    graph: *const CodyGraph,
    session: *mut CodySession,
    target_event_id: u64,
    dst: Option<u32>,
    options: *const CodyExplainOptions,
    out: *mut *mut CodyResult,
) -> CodyStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let graph = &borrow(graph, "graph")?.graph;
        let session = &mut session.as_mut().ok_or_else(|| null("session"))?.session;
        let opts = match options.as_ref() {
            Some(o) => *o,
            None => cody_explain_options_default(),
        };
        let mut target = graph
            .event(target_event_id)
            .cloned()
            .ok_or(Error::UnknownEvent(target_event_id))?;
        if let Some(dst) = dst {
            if dst as usize >= graph.node_count() {
                return Err(Failure(
                    CodyStatus::InvalidArgument,
                    format!("destination {dst} outside 0..{}", graph.node_count()),
                ));
            }
            target.dst = dst;
        }
        let policy = match opts.policy {
            CodyPolicy::Random => PolicyKind::Random { seed: opts.seed },
            CodyPolicy::Temporal => PolicyKind::Temporal,
            CodyPolicy::SpatioTemporal => PolicyKind::SpatioTemporal,
            CodyPolicy::EventImpact => PolicyKind::EventImpact,
        };
        let k = (opts.k > 0).then_some(opts.k);
        let result = match opts.explainer {
            CodyExplainer::Greedy => run_greedy(
                session,
                graph,
                &target,
                policy,
                &GreedyConfig {
                    l: opts.l,
                    k,
                    m_max: opts.m_max,
                },
            )?,
            CodyExplainer::Cody => run_cody(
                session,
                graph,
                &target,
                policy,
                &CodyConfig {
                    it_max: opts.it_max,
                    alpha: opts.alpha,
                    m_max: opts.m_max,
                    k,
                    best_first_stop: opts.best_first_stop,
                    prune_duplicates: opts.prune_duplicates,
                },
            )?,
        };
        store(out, CodyResult { result });
        Ok(())
    })
}

/// Explain the prediction for event `target_event_id`. `options` may be NULL
/// for the defaults.
///
/// # Safety
/// Handles must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cody_explain(
    graph: *const CodyGraph,
    session: *mut CodySession,
    target_event_id: u64,
    options: *const CodyExplainOptions,
    out: *mut *mut CodyResult,
) -> CodyStatus {
    explain_impl(graph, session, target_event_id, None, options, out)
}

/// Like [`cody_explain`] for the link from the event's source to `dst` at
/// the event's time.
///
/// # Safety
/// Handles must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cody_explain_link(
    graph: *const CodyGraph,
    session: *mut CodySession,
    target_event_id: u64,
    dst: u32,
    options: *const CodyExplainOptions,
    out: *mut *mut CodyResult,
) -> CodyStatus {
    explain_impl(graph, session, target_event_id, Some(dst), options, out)
}

/// # Safety
/// `result` must come from an explain call or be NULL.
#[no_mangle]
pub unsafe extern "C" fn cody_result_free(result: *mut CodyResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of events in the explanation.
///
/// # Safety
/// `result` must be live or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cody_result_len(result: *const CodyResult) -> usize {
    result.as_ref().map_or(0, |r| r.result.events.len())
}

/// Copy up to `capacity` event ids into `buffer` in the order they were
/// added; returns the full count.
///
/// # Safety
/// `buffer` must hold `capacity` elements (may be NULL when `capacity` is 0).
#[no_mangle]
pub unsafe extern "C" fn cody_result_events(
    result: *const CodyResult,
    buffer: *mut u64,
    capacity: usize,
) -> usize {
    let Some(r) = result.as_ref() else { return 0 };
    let events = &r.result.events;
    if !buffer.is_null() {
        let n = events.len().min(capacity);
        ptr::copy_nonoverlapping(events.as_ptr(), buffer, n);
    }
    events.len()
}

/// # Safety
/// `result` must be live or NULL (returns false).
#[no_mangle]
pub unsafe extern "C" fn cody_result_is_counterfactual(result: *const CodyResult) -> bool {
    result.as_ref().is_some_and(|r| r.result.is_counterfactual)
}

/// # Safety
/// `result` must be live or NULL (returns NaN).
#[no_mangle]
pub unsafe extern "C" fn cody_result_original_logit(result: *const CodyResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.result.original_logit.value())
}

/// # Safety
/// `result` must be live or NULL (returns NaN).
#[no_mangle]
pub unsafe extern "C" fn cody_result_achieved_logit(result: *const CodyResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.result.achieved_logit.value())
}

/// # Safety
/// `result` must be live or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cody_result_oracle_calls(result: *const CodyResult) -> u64 {
    result.as_ref().map_or(0, |r| r.result.oracle_calls)
}

/// # Safety
/// `result` must be live or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cody_result_iterations(result: *const CodyResult) -> u64 {
    result.as_ref().map_or(0, |r| r.result.iterations)
}

/// # Safety
/// `result` must be live or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cody_result_candidate_size(result: *const CodyResult) -> usize {
    result.as_ref().map_or(0, |r| r.result.candidate_size)
}

/// Full result as JSON. Release with [`cody_string_free`]; NULL on failure.
///
/// # Safety
/// `result` must be live or NULL.
#[no_mangle]
pub unsafe extern "C" fn cody_result_to_json(result: *const CodyResult) -> *mut c_char {
    let mut json = ptr::null_mut();
    guard(|| {
        let r = borrow(result, "result")?;
        let text = serde_json::to_string(&r.result).map_err(Error::from)?;
        json = CString::new(text)
            .map_err(|e| Failure(CodyStatus::Parse, e.to_string()))?
            .into_raw();
        Ok(())
    });
    json
}

/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn cody_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
