//! C ABI for the `cikf` library.
//!
//! Objects are opaque handles created by `*_new`/`*_load`/`*_generate`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`CikfStatus`]; on failure a description is available from
//! [`cikf_last_error`] on the same thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use cikf::covgain::{precompute_schedule, GainSchedule};
use cikf::filter::{cikf_init, cikf_step, NetworkEstimate};
use cikf::harness::{run_montecarlo, MonteCarloOptions};
use cikf::model::{generate_paper_model, ModelParams, ModelSpec};
use cikf::pseudo::{build_pseudo_model, PseudoModel};
use cikf::Error;
use nalgebra::DVector;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CikfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidString = 2,
    Dimension = 3,
    Parameter = 4,
    Model = 5,
    Generation = 6,
    Sequencing = 7,
    Config = 8,
    Numerical = 9,
    Io = 10,
    Format = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

impl From<&Error> for CikfStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension(_) => CikfStatus::Dimension,
            Error::Parameter(_) => CikfStatus::Parameter,
            Error::Model(_) => CikfStatus::Model,
            Error::Generation(_) => CikfStatus::Generation,
            Error::Sequencing(_) => CikfStatus::Sequencing,
            Error::Config(_) => CikfStatus::Config,
            Error::Numerical(_) => CikfStatus::Numerical,
            Error::Io { .. } => CikfStatus::Io,
            Error::Format(_) => CikfStatus::Format,
        }
    }
}

/// A model: dynamics, sensing and communication graph.
pub struct CikfModel {
    spec: ModelSpec,
}

/// A precomputed gain schedule.
pub struct CikfSchedule {
    schedule: GainSchedule,
}

/// A running network of filters.
pub struct CikfFilter {
    pm: PseudoModel,
    schedule: GainSchedule,
    estimate: NetworkEstimate,
    obs_dims: Vec<usize>,
}

struct Failure(CikfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(CikfStatus::from(&e), e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CikfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CikfStatus::Ok,
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
            set_last_error(format!("internal panic: {msg}"));
            CikfStatus::Panic
        }
    }
}

fn null() -> Failure {
    Failure(CikfStatus::NullPointer, "null pointer argument".into())
}

unsafe fn as_ref<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(null)
}

unsafe fn as_str<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CikfStatus::InvalidString, "string is not valid UTF-8".into()))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    out.write(value);
    Ok(())
}

unsafe fn out_slice<'a>(buf: *mut f64, len: usize, needed: usize) -> Result<&'a mut [f64], Failure> {
    if buf.is_null() {
        return Err(null());
    }
    if len < needed {
        return Err(Failure(
            CikfStatus::BufferTooSmall,
            format!("buffer holds {len} values, {needed} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(buf, needed))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cikf_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cikf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Generates a model from the `"desk"` or `"paper"` preset.
///
/// # Safety
/// `preset` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cikf_model_generate(preset: *const c_char, seed: u64, out: *mut *mut CikfModel) -> CikfStatus {
    guard(|| {
        let params = ModelParams::preset(as_str(preset)?)?;
        let spec = generate_paper_model(&params, seed)?;
        write_out(out, Box::into_raw(Box::new(CikfModel { spec })))
    })
}

/// Loads a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cikf_model_load(path: *const c_char, out: *mut *mut CikfModel) -> CikfStatus {
    guard(|| {
        let spec = ModelSpec::load(&PathBuf::from(as_str(path)?))?;
        write_out(out, Box::into_raw(Box::new(CikfModel { spec })))
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cikf_model_save(model: *const CikfModel, path: *const c_char) -> CikfStatus {
    guard(|| Ok(as_ref(model)?.spec.save(&PathBuf::from(as_str(path)?))?))
}

/// Writes the state dimension and the number of agents.
///
/// # Safety
/// `model` must be a live handle; the output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cikf_model_dims(model: *const CikfModel, state_dim: *mut usize, agents: *mut usize) -> CikfStatus {
    guard(|| {
        let spec = &as_ref(model)?.spec;
        write_out(state_dim, spec.state_dim())?;
        write_out(agents, spec.agents())
    })
}

/// Number of scalar observations of one agent.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cikf_model_obs_dim(model: *const CikfModel, agent: usize, out: *mut usize) -> CikfStatus {
    guard(|| {
        let dims = as_ref(model)?.spec.obs_dims();
        let d = dims
            .get(agent)
            .ok_or_else(|| Failure(CikfStatus::Parameter, format!("agent {agent} out of range")))?;
        write_out(out, *d)
    })
}

/// # Safety
/// `model` must be a handle from this library or NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cikf_model_free(model: *mut CikfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Designs the optimal gains for `horizon` steps.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cikf_schedule_design(
    model: *const CikfModel,
    horizon: usize,
    out: *mut *mut CikfSchedule,
) -> CikfStatus {
    guard(|| {
        let (schedule, _) = precompute_schedule(&as_ref(model)?.spec, horizon)?;
        write_out(out, Box::into_raw(Box::new(CikfSchedule { schedule })))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cikf_schedule_load(path: *const c_char, out: *mut *mut CikfSchedule) -> CikfStatus {
    guard(|| {
        let schedule = GainSchedule::load(&PathBuf::from(as_str(path)?))?;
        write_out(out, Box::into_raw(Box::new(CikfSchedule { schedule })))
    })
}

/// # Safety
/// `schedule` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cikf_schedule_save(schedule: *const CikfSchedule, path: *const c_char) -> CikfStatus {
    guard(|| Ok(as_ref(schedule)?.schedule.save(&PathBuf::from(as_str(path)?))?))
}

/// # Safety
/// `schedule` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cikf_schedule_horizon(schedule: *const CikfSchedule, out: *mut usize) -> CikfStatus {
    guard(|| write_out(out, as_ref(schedule)?.schedule.horizon()))
}

/// Per-agent theoretical prediction MSE, one value per step.
///
/// # Safety
/// `schedule` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cikf_schedule_theory_mse(schedule: *const CikfSchedule, buf: *mut f64, len: usize) -> CikfStatus {
    guard(|| {
        let s = &as_ref(schedule)?.schedule;
        out_slice(buf, len, s.horizon())?.copy_from_slice(&s.theory_pred_per_agent);
        Ok(())
    })
}

/// # Safety
/// `schedule` must be a handle from this library or NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cikf_schedule_free(schedule: *mut CikfSchedule) {
    if !schedule.is_null() {
        drop(Box::from_raw(schedule));
    }
}

/// Starts a network of filters at the prior mean. The schedule is copied.
///
/// # Safety
/// `model` and `schedule` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cikf_filter_new(
    model: *const CikfModel,
    schedule: *const CikfSchedule,
    out: *mut *mut CikfFilter,
) -> CikfStatus {
    guard(|| {
        let spec = &as_ref(model)?.spec;
        let schedule = as_ref(schedule)?.schedule.clone();
        let pm = build_pseudo_model(spec)?;
        if schedule.model_hash != pm.model_hash {
            return Err(Failure(CikfStatus::Config, "gain schedule does not belong to this model".into()));
        }
        let estimate = cikf_init(spec, &pm);
        let filter = CikfFilter {
            pm,
            schedule,
            estimate,
            obs_dims: spec.obs_dims(),
        };
        write_out(out, Box::into_raw(Box::new(filter)))
    })
}

/// Processes one step of observations: all agents' measurements
/// concatenated in agent order.
///
/// # Safety
/// `filter` must be a live handle and `obs` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cikf_filter_step(filter: *mut CikfFilter, obs: *const f64, len: usize) -> CikfStatus {
    guard(|| {
        let f = filter.as_mut().ok_or_else(null)?;
        if obs.is_null() {
            return Err(null());
        }
        let total: usize = f.obs_dims.iter().sum();
        if len != total {
            return Err(Failure(CikfStatus::Dimension, format!("expected {total} observations, got {len}")));
        }
        let data = std::slice::from_raw_parts(obs, len);
        let mut offset = 0;
        let per_agent: Vec<DVector<f64>> = f
            .obs_dims
            .iter()
            .map(|&d| {
                let v = DVector::from_column_slice(&data[offset..offset + d]);
                offset += d;
                v
            })
            .collect();
        f.estimate = cikf_step(&f.estimate, &f.schedule, &f.pm, &per_agent)?;
        Ok(())
    })
}

/// Number of steps processed so far.
///
/// # Safety
/// `filter` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cikf_filter_steps(filter: *const CikfFilter, out: *mut usize) -> CikfStatus {
    guard(|| write_out(out, as_ref(filter)?.estimate.step))
}

/// One agent's state prediction for the next step.
///
/// # Safety
/// `filter` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cikf_filter_prediction(
    filter: *const CikfFilter,
    agent: usize,
    buf: *mut f64,
    len: usize,
) -> CikfStatus {
    guard(|| {
        let f = as_ref(filter)?;
        let x = f
            .estimate
            .x_pred
            .get(agent)
            .ok_or_else(|| Failure(CikfStatus::Parameter, format!("agent {agent} out of range")))?;
        out_slice(buf, len, x.len())?.copy_from_slice(x.as_slice());
        Ok(())
    })
}

/// One agent's filtered state estimate of the last processed step.
///
/// # Safety
/// `filter` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cikf_filter_estimate(
    filter: *const CikfFilter,
    agent: usize,
    buf: *mut f64,
    len: usize,
) -> CikfStatus {
    guard(|| {
        let f = as_ref(filter)?;
        if f.estimate.x_filt.is_empty() {
            return Err(Failure(CikfStatus::Sequencing, "no observations processed yet".into()));
        }
        let x = f
            .estimate
            .x_filt
            .get(agent)
            .ok_or_else(|| Failure(CikfStatus::Parameter, format!("agent {agent} out of range")))?;
        out_slice(buf, len, x.len())?.copy_from_slice(x.as_slice());
        Ok(())
    })
}

/// # Safety
/// `filter` must be a handle from this library or NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cikf_filter_free(filter: *mut CikfFilter) {
    if !filter.is_null() {
        drop(Box::from_raw(filter));
    }
}

/// Monte-Carlo MSE per step: distributed filter (per agent) and centralized
/// filter. Both buffers must hold `horizon` doubles.
///
/// # Safety
/// Handles must be live; `cikf_mse` and `ckf_mse` must hold `horizon` doubles.
#[no_mangle]
pub unsafe extern "C" fn cikf_montecarlo(
    model: *const CikfModel,
    schedule: *const CikfSchedule,
    runs: usize,
    horizon: usize,
    seed: u64,
    cikf_mse: *mut f64,
    ckf_mse: *mut f64,
) -> CikfStatus {
    guard(|| {
        if runs == 0 {
            return Err(Failure(CikfStatus::Parameter, "at least one run is required".into()));
        }
        let rep = run_montecarlo(
            &as_ref(model)?.spec,
            &as_ref(schedule)?.schedule,
            runs,
            horizon,
            seed,
            MonteCarloOptions::default(),
        )?;
        out_slice(cikf_mse, horizon, horizon)?.copy_from_slice(&rep.emp_cikf);
        out_slice(ckf_mse, horizon, horizon)?.copy_from_slice(&rep.emp_ckf);
        Ok(())
    })
}
