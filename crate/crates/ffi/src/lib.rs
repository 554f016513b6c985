//! C ABI over `armt-core`.
//!
//! Every function returns an [`ArmtStatus`]; on failure the message is
//! available from [`armt_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. No panic
//! crosses the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use armt_core::model::container;
use armt_core::scheduler::build_diagonal_schedule;
use armt_core::tensor::Tensor;
use armt_core::{run_diagonal, run_sequential, ArmtError, ExecOptions, GroupedWeights, ModelConfig, RunOutput};

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArmtStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    Input = 2,
    Dimension = 3,
    Schedule = 4,
    Io = 5,
    Format = 6,
    /// The engine panicked; the handle involved should be discarded.
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArmtSchedule {
    Sequential = 0,
    Diagonal = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArmtPrecision {
    F32 = 0,
    F64 = 1,
}

/// Model hyperparameters. `eps_assoc <= 0` selects the per-precision
/// default.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmtConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub vocab_size: usize,
    pub segment_size: usize,
    pub num_mem_tokens: usize,
    pub d_mem: usize,
    pub dpfp_nu: usize,
    pub eps_assoc: f64,
    pub eps_norm: f64,
    pub seed: u64,
}

impl From<&ModelConfig> for ArmtConfig {
    fn from(c: &ModelConfig) -> Self {
        Self {
            n_layers: c.n_layers,
            d_model: c.d_model,
            n_heads: c.n_heads,
            d_ff: c.d_ff,
            vocab_size: c.vocab_size,
            segment_size: c.segment_size,
            num_mem_tokens: c.num_mem_tokens,
            d_mem: c.d_mem,
            dpfp_nu: c.dpfp_nu,
            eps_assoc: c.eps_assoc.unwrap_or(0.0),
            eps_norm: c.eps_norm,
            seed: c.seed,
        }
    }
}

impl From<&ArmtConfig> for ModelConfig {
    fn from(c: &ArmtConfig) -> Self {
        Self {
            n_layers: c.n_layers,
            d_model: c.d_model,
            n_heads: c.n_heads,
            d_ff: c.d_ff,
            vocab_size: c.vocab_size,
            segment_size: c.segment_size,
            num_mem_tokens: c.num_mem_tokens,
            d_mem: c.d_mem,
            dpfp_nu: c.dpfp_nu,
            eps_assoc: (c.eps_assoc > 0.0).then_some(c.eps_assoc),
            eps_norm: c.eps_norm,
            seed: c.seed,
        }
    }
}

/// Loaded weights in both precisions.
pub struct ArmtModel {
    cfg: ModelConfig,
    w64: GroupedWeights<f64>,
    w32: GroupedWeights<f32>,
}

/// Result of one forward pass.
pub struct ArmtRun {
    /// Row-major `[rows, cols]`, widened to f64 for f32 runs.
    logits: Vec<f64>,
    rows: usize,
    cols: usize,
    steps: usize,
    trace_json: CString,
}

struct Failure(ArmtStatus, String);

impl From<ArmtError> for Failure {
    fn from(e: ArmtError) -> Self {
        let status = match e {
            ArmtError::Dimension(_) => ArmtStatus::Dimension,
            ArmtError::Input(_) => ArmtStatus::Input,
            ArmtError::Schedule(_) => ArmtStatus::Schedule,
            ArmtError::Format(_) => ArmtStatus::Format,
            ArmtError::Io(_) => ArmtStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ArmtStatus {
    let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(Failure(ArmtStatus::Panic, msg))
    });
    match outcome {
        Ok(()) => {
            set_last_error("");
            ArmtStatus::Ok
        }
        Err(Failure(status, msg)) => {
            set_last_error(&msg);
            status
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(ArmtStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(ArmtStatus::Input, "path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn model_handle(cfg: ModelConfig, w64: GroupedWeights<f64>) -> *mut ArmtModel {
    let w32 = w64.cast();
    Box::into_raw(Box::new(ArmtModel { cfg, w64, w32 }))
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn armt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn armt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fill `out` with the default configuration.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn armt_config_default(out: *mut ArmtConfig) -> ArmtStatus {
    guard(|| write_out(out, ArmtConfig::from(&ModelConfig::default()), "out"))
}

/// Generate seeded random weights for `cfg`.
///
/// # Safety
/// `cfg` must be null or point to a valid config; `out` must be null or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn armt_model_new(cfg: *const ArmtConfig, out: *mut *mut ArmtModel) -> ArmtStatus {
    guard(|| {
        let cfg = ModelConfig::from(deref(cfg, "cfg")?);
        if out.is_null() {
            return Err(null("out"));
        }
        let w = GroupedWeights::init(&cfg)?;
        write_out(out, model_handle(cfg, w), "out")
    })
}

/// Load a weight container.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` must be null or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn armt_model_load(path: *const c_char, out: *mut *mut ArmtModel) -> ArmtStatus {
    guard(|| {
        let path = path_arg(path)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (cfg, w) = container::load::<f64>(path)?;
        write_out(out, model_handle(cfg, w), "out")
    })
}

/// Write the model as a weight container.
///
/// # Safety
/// `model` must be null or a live handle; `path` must be null or a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn armt_model_save(model: *const ArmtModel, path: *const c_char) -> ArmtStatus {
    guard(|| {
        let m = deref(model, "model")?;
        container::save(path_arg(path)?, &m.cfg, &m.w64)?;
        Ok(())
    })
}

/// Copy the model's configuration into `out`.
///
/// # Safety
/// `model` must be null or a live handle; `out` must be null or valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn armt_model_config(model: *const ArmtModel, out: *mut ArmtConfig) -> ArmtStatus {
    guard(|| write_out(out, ArmtConfig::from(&deref(model, "model")?.cfg), "out"))
}

/// Release a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn armt_model_free(model: *mut ArmtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

fn finish<T: armt_core::tensor::Scalar>(out: RunOutput<T>) -> ArmtRun {
    let (rows, cols) = (out.logits.shape()[0], out.logits.shape()[1]);
    ArmtRun {
        logits: out.logits.data().iter().map(|v| v.to_f64()).collect(),
        rows,
        cols,
        steps: out.trace.step_count(),
        trace_json: CString::new(out.trace.to_json()).expect("JSON has no NUL"),
    }
}

/// Run a forward pass over `n_tokens` token ids. `threads == 0` uses all
/// available cores.
///
/// # Safety
/// `model` must be null or a live handle; `tokens` must be null or valid
/// for `n_tokens` reads; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn armt_run(
    model: *const ArmtModel,
    tokens: *const u32,
    n_tokens: usize,
    schedule: ArmtSchedule,
    precision: ArmtPrecision,
    threads: usize,
    out: *mut *mut ArmtRun,
) -> ArmtStatus {
    guard(|| {
        let m = deref(model, "model")?;
        if tokens.is_null() {
            return Err(null("tokens"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let tokens = std::slice::from_raw_parts(tokens, n_tokens);
        let opts = ExecOptions::with_threads(threads);
        let run = match (precision, schedule) {
            (ArmtPrecision::F64, ArmtSchedule::Sequential) => finish(run_sequential(&m.cfg, &m.w64, tokens, &opts)?),
            (ArmtPrecision::F64, ArmtSchedule::Diagonal) => finish(run_diagonal(&m.cfg, &m.w64, tokens, &opts)?),
            (ArmtPrecision::F32, ArmtSchedule::Sequential) => finish(run_sequential(&m.cfg, &m.w32, tokens, &opts)?),
            (ArmtPrecision::F32, ArmtSchedule::Diagonal) => finish(run_diagonal(&m.cfg, &m.w32, tokens, &opts)?),
        };
        write_out(out, Box::into_raw(Box::new(run)), "out")
    })
}

/// Borrow the logits, row-major `[rows, cols]`. The pointer lives as long
/// as `run`. Returns null if `run` is null.
///
/// # Safety
/// `run` must be null or a live handle; `rows` and `cols` must each be null
/// or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn armt_run_logits(run: *const ArmtRun, rows: *mut usize, cols: *mut usize) -> *const f64 {
    let Some(r) = run.as_ref() else {
        return ptr::null();
    };
    if !rows.is_null() {
        rows.write(r.rows);
    }
    if !cols.is_null() {
        cols.write(r.cols);
    }
    r.logits.as_ptr()
}

/// Number of executed steps (groups) in the run.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn armt_run_steps(run: *const ArmtRun) -> usize {
    run.as_ref().map_or(0, |r| r.steps)
}

/// Execution trace as JSON, owned by `run`.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn armt_run_trace_json(run: *const ArmtRun) -> *const c_char {
    run.as_ref().map_or(ptr::null(), |r| r.trace_json.as_ptr())
}

/// Release a run. Null is ignored.
///
/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn armt_run_free(run: *mut ArmtRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// `‖a − b‖_F / ‖b‖_F` over `n` values, `b` the baseline.
///
/// # Safety
/// `a` and `b` must be null or valid for `n` reads; `out` must be null or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn armt_relative_error(a: *const f64, b: *const f64, n: usize, out: *mut f64) -> ArmtStatus {
    guard(|| {
        if a.is_null() || b.is_null() {
            return Err(null("input"));
        }
        let ta = Tensor::new(vec![n], std::slice::from_raw_parts(a, n).to_vec())?;
        let tb = Tensor::new(vec![n], std::slice::from_raw_parts(b, n).to_vec())?;
        write_out(out, armt_core::relative_error(&ta, &tb)?, "out")
    })
}

/// Number of groups in the diagonal schedule of a `segments × layers` grid.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn armt_schedule_group_count(segments: usize, layers: usize, out: *mut usize) -> ArmtStatus {
    guard(|| write_out(out, build_diagonal_schedule(segments, layers)?.len(), "out"))
}
