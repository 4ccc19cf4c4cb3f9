//! C ABI over `routerplace`.
//!
//! A scenario is loaded into an opaque [`RpScenario`] handle that owns the
//! topology, channel parameters and a mutable current state. Every function
//! returns an [`RpStatus`]; on failure a description is available from
//! [`rp_last_error_message`] on the same thread until the next failing call.
//! Handles are not thread safe; use one handle per thread or serialize access.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use routerplace::annealer::anneal;
use routerplace::distributed::run_distributed;
use routerplace::network::NodeRole;
use routerplace::scenario::{self, Scenario};
use routerplace::{Error, NetworkState, NodeId, Position};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Runtime = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Node role as reported by [`rp_scenario_node_role`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpRole {
    Transmitter = 0,
    Receiver = 1,
    Robot = 2,
}

/// Opaque scenario handle.
pub struct RpScenario {
    scenario: Scenario,
    state: NetworkState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> RpStatus {
    match err {
        Error::Parse(_) => RpStatus::Parse,
        Error::Validation { .. } | Error::UnknownNode(_) | Error::UnknownFlow(_) | Error::MissingPosition(_) => {
            RpStatus::Validation
        }
        _ => RpStatus::Runtime,
    }
}

struct Fail(RpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RpStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            RpStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(RpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RpStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a>(s: *const RpScenario) -> Result<&'a RpScenario, Fail> {
    s.as_ref().ok_or_else(|| null("scenario"))
}

unsafe fn handle_mut<'a>(s: *mut RpScenario) -> Result<&'a mut RpScenario, Fail> {
    s.as_mut().ok_or_else(|| null("scenario"))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn emit(out: *mut *mut RpScenario, build: impl FnOnce() -> Result<Scenario, Error>) -> Result<(), Fail> {
    let out = out_ref(out, "out")?;
    *out = ptr::null_mut();
    let scenario = build()?;
    let state = scenario.initial.clone();
    *out = Box::into_raw(Box::new(RpScenario { scenario, state }));
    Ok(())
}

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn rp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a scenario from TOML text. `*out` is set to a new handle on
/// success and to null otherwise.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rp_scenario_from_toml(toml: *const c_char, out: *mut *mut RpScenario) -> RpStatus {
    guard(|| {
        let text = str_arg(toml, "toml")?;
        emit(out, || scenario::parse_scenario(text)?.build())
    })
}

/// Loads a scenario from a file path or shipped scenario name.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rp_scenario_load(source: *const c_char, out: *mut *mut RpScenario) -> RpStatus {
    guard(|| {
        let source = str_arg(source, "source")?;
        emit(out, || scenario::resolve(source)?.build())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `s` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rp_scenario_free(s: *mut RpScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of nodes; ids run from 1 to this count.
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rp_scenario_node_count(s: *const RpScenario, out: *mut usize) -> RpStatus {
    guard(|| {
        *out_ref(out, "out")? = handle(s)?.scenario.topology.nodes().count();
        Ok(())
    })
}

/// Number of flows.
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rp_scenario_flow_count(s: *const RpScenario, out: *mut usize) -> RpStatus {
    guard(|| {
        *out_ref(out, "out")? = handle(s)?.scenario.topology.flow_count();
        Ok(())
    })
}

/// Total number of links over all flows.
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rp_scenario_link_count(s: *const RpScenario, out: *mut usize) -> RpStatus {
    guard(|| {
        *out_ref(out, "out")? = handle(s)?.scenario.topology.all_links().count();
        Ok(())
    })
}

/// Role of a node.
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rp_scenario_node_role(s: *const RpScenario, node: u32, out: *mut RpRole) -> RpStatus {
    guard(|| {
        let role = handle(s)?.scenario.topology.role(NodeId(node))?;
        *out_ref(out, "out")? = match role {
            NodeRole::Transmitter => RpRole::Transmitter,
            NodeRole::Receiver => RpRole::Receiver,
            NodeRole::Robot => RpRole::Robot,
        };
        Ok(())
    })
}

/// Current position of a node.
///
/// # Safety
/// `s` must be a live handle; `x` and `y` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rp_scenario_get_position(
    s: *const RpScenario,
    node: u32,
    x: *mut f64,
    y: *mut f64,
) -> RpStatus {
    guard(|| {
        let p = handle(s)?.state.position(NodeId(node))?;
        *out_ref(x, "x")? = p.x;
        *out_ref(y, "y")? = p.y;
        Ok(())
    })
}

/// Moves a node in the current state.
///
/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rp_scenario_set_position(s: *mut RpScenario, node: u32, x: f64, y: f64) -> RpStatus {
    guard(|| {
        let h = handle_mut(s)?;
        h.scenario.topology.role(NodeId(node))?;
        let p = Position::try_new(x, y)?;
        h.state.set_position(NodeId(node), p);
        Ok(())
    })
}

/// Restores the scenario's initial positions.
///
/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rp_scenario_reset(s: *mut RpScenario) -> RpStatus {
    guard(|| {
        let h = handle_mut(s)?;
        h.state = h.scenario.initial.clone();
        Ok(())
    })
}

/// Minimum link SINR over all flows in the current state.
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rp_scenario_global_cost(s: *const RpScenario, out: *mut f64) -> RpStatus {
    guard(|| {
        let h = handle(s)?;
        *out_ref(out, "out")? = h.scenario.topology.global_cost(&h.state, &h.scenario.params)?;
        Ok(())
    })
}

/// Writes every link SINR, flow by flow in link order, into `buf`.
/// `*written` receives the link count; if `cap` is smaller nothing is
/// written and `BufferTooSmall` is returned.
///
/// # Safety
/// `s` must be a live handle, `buf` must hold `cap` doubles (or be null when
/// `cap` is 0) and `written` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rp_scenario_link_sinrs(
    s: *const RpScenario,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> RpStatus {
    guard(|| {
        let h = handle(s)?;
        let written = out_ref(written, "written")?;
        let sinrs: Vec<f64> = h
            .scenario
            .topology
            .all_sinrs(&h.state, &h.scenario.params)?
            .into_iter()
            .flatten()
            .collect();
        *written = sinrs.len();
        if cap < sinrs.len() {
            return Err(Fail(
                RpStatus::BufferTooSmall,
                format!("need {} slots, got {cap}", sinrs.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, sinrs.len()).copy_from_slice(&sinrs);
        Ok(())
    })
}

/// Anneals from the current state and replaces it with the best state found.
/// `iterations` of 0 keeps the scenario's schedule length.
///
/// # Safety
/// `s` must be a live handle; `cost` may be null.
#[no_mangle]
pub unsafe extern "C" fn rp_scenario_anneal(
    s: *mut RpScenario,
    seed: u64,
    iterations: u64,
    cost: *mut f64,
) -> RpStatus {
    guard(|| {
        let h = handle_mut(s)?;
        let mut schedule = h.scenario.schedule;
        if iterations > 0 {
            schedule.iterations = iterations;
        }
        let sc = &h.scenario;
        let out = anneal(&h.state, &schedule, &sc.params, &sc.topology, seed)?;
        h.state = out.best;
        if let Some(c) = cost.as_mut() {
            *c = out.best_cost;
        }
        Ok(())
    })
}

/// Runs the distributed controller from the current state and replaces it
/// with the final state. `max_iterations` of 0 keeps the scenario's cap.
///
/// # Safety
/// `s` must be a live handle; `cost` may be null.
#[no_mangle]
pub unsafe extern "C" fn rp_scenario_run_distributed(
    s: *mut RpScenario,
    seed: u64,
    max_iterations: u64,
    cost: *mut f64,
) -> RpStatus {
    guard(|| {
        let h = handle_mut(s)?;
        let mut ctrl = h.scenario.controller;
        if max_iterations > 0 {
            ctrl.max_iterations = max_iterations;
        }
        let sc = &h.scenario;
        let out = run_distributed(&h.state, &sc.params, &ctrl, &sc.mobility, &sc.topology, seed)?;
        h.state = out.final_state;
        if let Some(c) = cost.as_mut() {
            *c = sc.topology.global_cost(&h.state, &sc.params)?;
        }
        Ok(())
    })
}
