//! C ABI for the `mapfcap` solvers.
//!
//! Instances and reports are opaque heap handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! a [`MapfStatus`]; on failure, [`mapf_last_error`] describes the problem
//! for the calling thread until its next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::time::Duration;

use mapfcap::instance::{
    generate_random, load_capacities, parse_capacity_file, parse_map, parse_scenario, CapacitySpec, Instance,
};
use mapfcap::plan::Plan;
use mapfcap::solvers::{solve, ExhaustReason, Limits, SolveError, SolveReport, SolverKind};
use mapfcap::verify::validate_plan_with;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidInstance = 4,
    Io = 5,
    OutOfRange = 6,
    /// The timeout expired before an optimal plan was found.
    Timeout = 7,
    /// No plan exists up to the cost ceiling.
    NoSolution = 8,
    /// Some agent cannot reach its goal.
    Unreachable = 9,
    Internal = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapfSolver {
    Eager = 0,
    Lazy = 1,
}

/// Opaque instance handle.
pub struct MapfInstance {
    inner: Instance,
}

/// Opaque result of a successful solve.
pub struct MapfReport {
    inner: SolveReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(text).ok());
}

struct Failure(MapfStatus, String);

impl Failure {
    fn new(status: MapfStatus, message: impl ToString) -> Failure {
        Failure(status, message.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> MapfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => MapfStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("panic inside mapfcap");
            MapfStatus::Panic
        }
    }
}

unsafe fn text<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(Failure::new(MapfStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| Failure::new(MapfStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn out_ptr<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or_else(|| Failure::new(MapfStatus::NullPointer, format!("{what} is null")))
}

unsafe fn instance_ref<'a>(ptr: *const MapfInstance) -> Result<&'a Instance, Failure> {
    ptr.as_ref().map(|h| &h.inner).ok_or_else(|| Failure::new(MapfStatus::NullPointer, "instance is null"))
}

unsafe fn report_ref<'a>(ptr: *const MapfReport) -> Result<&'a SolveReport, Failure> {
    ptr.as_ref().map(|h| &h.inner).ok_or_else(|| Failure::new(MapfStatus::NullPointer, "report is null"))
}

fn build_instance(map: &str, scen: &str, capacities: Option<&str>, uniform: u32, agents: usize) -> Result<Instance, Failure> {
    let graph = parse_map(map).map_err(|e| Failure::new(MapfStatus::ParseError, format!("map: {e}")))?;
    let spec = match capacities {
        Some(text) => parse_capacity_file(text).map_err(|e| Failure::new(MapfStatus::ParseError, format!("capacities: {e}")))?,
        None => CapacitySpec::Uniform(i64::from(uniform)),
    };
    let caps = load_capacities(&spec, &graph).map_err(|e| Failure::new(MapfStatus::InvalidInstance, e))?;
    let mut list = parse_scenario(scen, &graph).map_err(|e| Failure::new(MapfStatus::ParseError, format!("scenario: {e}")))?;
    if list.len() < agents {
        return Err(Failure::new(MapfStatus::OutOfRange, format!("scenario lists {} agents, {agents} requested", list.len())));
    }
    list.truncate(agents);
    Instance::new(graph, caps, list).map_err(|e| Failure::new(MapfStatus::InvalidInstance, e))
}

fn store<T>(out: &mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mapf_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mapf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds an instance from movingai map and scenario text. `capacity_text`
/// may be null, in which case every vertex gets `uniform_capacity`.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_instance_from_text(
    map_text: *const c_char,
    scen_text: *const c_char,
    capacity_text: *const c_char,
    uniform_capacity: u32,
    agents: usize,
    out: *mut *mut MapfInstance,
) -> MapfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let map = text(map_text, "map text")?;
        let scen = text(scen_text, "scenario text")?;
        let caps = if capacity_text.is_null() { None } else { Some(text(capacity_text, "capacity text")?) };
        store(out, MapfInstance { inner: build_instance(map, scen, caps, uniform_capacity, agents)? });
        Ok(())
    })
}

/// Same as [`mapf_instance_from_text`] with file paths. `capacity_path` may be null.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_instance_from_files(
    map_path: *const c_char,
    scen_path: *const c_char,
    capacity_path: *const c_char,
    uniform_capacity: u32,
    agents: usize,
    out: *mut *mut MapfInstance,
) -> MapfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let read = |path: &str| std::fs::read_to_string(path).map_err(|e| Failure::new(MapfStatus::Io, format!("{path}: {e}")));
        let map = read(text(map_path, "map path")?)?;
        let scen = read(text(scen_path, "scenario path")?)?;
        let caps = if capacity_path.is_null() { None } else { Some(read(text(capacity_path, "capacity path")?)?) };
        store(out, MapfInstance { inner: build_instance(&map, &scen, caps.as_deref(), uniform_capacity, agents)? });
        Ok(())
    })
}

/// Random instance on an open grid with uniform capacity; a pure function of its arguments.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_instance_generate(
    width: usize,
    height: usize,
    agents: usize,
    capacity: u32,
    seed: u64,
    out: *mut *mut MapfInstance,
) -> MapfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let inner = generate_random(width, height, agents, capacity, seed).map_err(|e| Failure::new(MapfStatus::InvalidInstance, e))?;
        store(out, MapfInstance { inner });
        Ok(())
    })
}

/// # Safety
/// `instance` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mapf_instance_free(instance: *mut MapfInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Number of agents, or 0 for a null handle.
///
/// # Safety
/// `instance` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mapf_instance_agent_count(instance: *const MapfInstance) -> usize {
    instance.as_ref().map_or(0, |h| h.inner.agent_count())
}

/// Number of vertices, or 0 for a null handle.
///
/// # Safety
/// `instance` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mapf_instance_vertex_count(instance: *const MapfInstance) -> usize {
    instance.as_ref().map_or(0, |h| h.inner.graph.vertex_count())
}

/// Computes a sum-of-costs optimal plan. A non-positive `timeout_seconds`
/// means no limit. On success `*out` receives a report handle.
///
/// # Safety
/// `instance` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_solve(
    instance: *const MapfInstance,
    solver: MapfSolver,
    timeout_seconds: f64,
    no_follow: bool,
    out: *mut *mut MapfReport,
) -> MapfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let instance = instance_ref(instance)?;
        let timeout = if timeout_seconds > 0.0 {
            Some(Duration::try_from_secs_f64(timeout_seconds).map_err(|e| Failure::new(MapfStatus::OutOfRange, e))?)
        } else {
            None
        };
        let kind = match solver {
            MapfSolver::Eager => SolverKind::Eager,
            MapfSolver::Lazy => SolverKind::Lazy,
        };
        let limits = Limits { timeout, no_follow, ..Limits::default() };
        match solve(instance, kind, limits) {
            Ok(inner) => {
                store(out, MapfReport { inner });
                Ok(())
            }
            Err(SolveError::Exhausted { reason: ExhaustReason::Timeout, .. }) => {
                Err(Failure::new(MapfStatus::Timeout, "timeout"))
            }
            Err(SolveError::Exhausted { reason, .. }) => Err(Failure::new(MapfStatus::NoSolution, reason)),
            Err(e @ SolveError::Unreachable(_)) => Err(Failure::new(MapfStatus::Unreachable, e)),
            Err(e) => Err(Failure::new(MapfStatus::Internal, e)),
        }
    })
}

/// # Safety
/// `report` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mapf_report_free(report: *mut MapfReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Optimal sum-of-costs, or 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mapf_report_cost(report: *const MapfReport) -> u64 {
    report.as_ref().map_or(0, |h| h.inner.optimal_cost)
}

/// Number of configurations in the plan (makespan + 1), or 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mapf_report_steps(report: *const MapfReport) -> usize {
    report.as_ref().map_or(0, |h| h.inner.plan.steps())
}

/// Conflict clauses added by the lazy solver (0 for the eager solver).
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mapf_report_refinements(report: *const MapfReport) -> usize {
    report.as_ref().map_or(0, |h| h.inner.refinements())
}

/// Writes the vertex of `agent` at time `t` to `*vertex`.
///
/// # Safety
/// `report` must be a live handle; `vertex` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_report_position(report: *const MapfReport, agent: usize, t: usize, vertex: *mut usize) -> MapfStatus {
    guard(|| {
        let vertex = out_ptr(vertex, "vertex")?;
        let report = report_ref(report)?;
        let path = report.plan.paths().get(agent).ok_or_else(|| Failure::new(MapfStatus::OutOfRange, format!("no agent {agent}")))?;
        *vertex = *path.get(t).ok_or_else(|| Failure::new(MapfStatus::OutOfRange, format!("no time step {t}")))?;
        Ok(())
    })
}

/// Plan in the text format of the command-line tool. Release with [`mapf_string_free`].
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mapf_report_plan_text(report: *const MapfReport) -> *mut c_char {
    match report.as_ref() {
        Some(h) => CString::new(h.inner.plan.to_text()).map_or(ptr::null_mut(), CString::into_raw),
        None => {
            set_error("report is null");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mapf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Checks a plan in text format; `*violations` receives the number of rule violations.
///
/// # Safety
/// `instance` must be a live handle; `plan_text` NUL-terminated; `violations` writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_validate_plan(
    instance: *const MapfInstance,
    plan_text: *const c_char,
    no_follow: bool,
    violations: *mut usize,
) -> MapfStatus {
    guard(|| {
        let violations = out_ptr(violations, "violations")?;
        let instance = instance_ref(instance)?;
        let plan = Plan::parse(text(plan_text, "plan text")?).map_err(|e| Failure::new(MapfStatus::ParseError, e))?;
        let found = validate_plan_with(instance, &plan, no_follow);
        if let Some(first) = found.first() {
            set_error(first.to_string());
        }
        *violations = found.len();
        Ok(())
    })
}
