//! C ABI over the `layerstitch` library.
//!
//! Every fallible call returns an [`LsStatus`]; on failure the message is
//! available from [`ls_last_error_message`] on the same thread. Objects cross
//! the boundary as opaque handles that must be released with their `_free`
//! function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use layerstitch::objective::{parego_scalarize, LambdaWeights, ObjectiveVector};
use layerstitch::optimizer::{compute_schedule, HyperbandSchedule, SearchOutcome};
use layerstitch::pipeline::{execute_search, Workspace};
use layerstitch::runconfig::{Overrides, RunConfig};
use layerstitch::tensor::Matrix;
use layerstitch::zoo::{load_checkpoint, LayeredModel};
use layerstitch::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Io = 4,
    Parse = 5,
    Integrity = 6,
    Shape = 7,
    InvalidConfig = 8,
    CapExceeded = 9,
    Evaluation = 10,
    Search = 11,
    Interrupted = 12,
    OutOfRange = 13,
    Panic = 14,
}

impl From<&Error> for LsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => LsStatus::Config,
            Error::Io { .. } => LsStatus::Io,
            Error::Parse { .. } => LsStatus::Parse,
            Error::Integrity(_) => LsStatus::Integrity,
            Error::Shape(_) => LsStatus::Shape,
            Error::InvalidConfig(_) => LsStatus::InvalidConfig,
            Error::CapExceeded { .. } => LsStatus::CapExceeded,
            Error::Evaluation(_) => LsStatus::Evaluation,
            Error::Search(_) => LsStatus::Search,
            Error::Interrupted { .. } => LsStatus::Interrupted,
        }
    }
}

/// Model dimensions.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LsModelShape {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub num_classes: usize,
}

/// One successive-halving stage: `count` configurations at `budget`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LsStage {
    pub count: usize,
    pub budget: usize,
}

/// Summary of the best trial of a search.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LsBest {
    /// False when no trial reached the maximum budget; the other fields are then zero.
    pub found: bool,
    pub trial: u64,
    pub scalarized: f64,
    pub mean_error: f64,
    pub num_objectives: usize,
}

/// Opaque handle to a loaded model.
pub struct LsModel(LayeredModel);

/// Opaque handle to a budget schedule.
pub struct LsSchedule(HyperbandSchedule);

/// Opaque handle to a finished search.
pub struct LsSearchResult(SearchOutcome);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(LsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(LsStatus::from(&e), e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(LsStatus::NullArgument, format!("`{name}` is null"))
}

/// Runs `body`, converting errors and panics into a status plus last-error text.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> LsStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => LsStatus::Ok,
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
            LsStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(p: *const c_char, name: &str) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    // SAFETY: caller guarantees a NUL-terminated string that outlives the call.
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure(LsStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))?;
    Ok(Path::new(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    // SAFETY: caller guarantees `len` readable elements.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: caller passes a valid, writable pointer or null.
    unsafe { p.as_mut() }.ok_or_else(|| null(name))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: handles come from this library and are live until freed.
    unsafe { p.as_ref() }.ok_or_else(|| null(name))
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ls_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a model checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_model_load(path: *const c_char, out: *mut *mut LsModel) -> LsStatus {
    guard(|| {
        let out = unsafe { out_arg(out, "out") }?;
        *out = ptr::null_mut();
        let path = unsafe { path_arg(path, "path") }?;
        let model = load_checkpoint(path)?;
        *out = Box::into_raw(Box::new(LsModel(model)));
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must come from [`ls_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ls_model_free(model: *mut LsModel) {
    if !model.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_model_shape(model: *const LsModel, out: *mut LsModelShape) -> LsStatus {
    guard(|| {
        let m = &unsafe { handle(model, "model") }?.0;
        let out = unsafe { out_arg(out, "out") }?;
        *out = LsModelShape {
            input_dim: m.input_dim,
            hidden_dim: m.hidden_dim,
            num_layers: m.num_layers(),
            num_classes: m.num_classes,
        };
        Ok(())
    })
}

/// Forward pass over `rows` row-major inputs of width `cols`, writing
/// `rows × num_classes` logits into `logits` (capacity `logits_len`).
///
/// # Safety
/// `inputs` must hold `rows·cols` values and `logits` `logits_len` slots.
#[no_mangle]
pub unsafe extern "C" fn ls_model_forward(
    model: *const LsModel,
    inputs: *const f64,
    rows: usize,
    cols: usize,
    logits: *mut f64,
    logits_len: usize,
) -> LsStatus {
    guard(|| {
        let m = &unsafe { handle(model, "model") }?.0;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure(LsStatus::OutOfRange, "rows·cols overflows".into()))?;
        let x = unsafe { slice_arg(inputs, n, "inputs") }?;
        let need = rows * m.num_classes;
        if logits_len < need {
            return Err(Failure(
                LsStatus::OutOfRange,
                format!("logits buffer holds {logits_len} values, {need} needed"),
            ));
        }
        let out = m.forward(&Matrix::from_vec(rows, cols, x.to_vec()))?;
        if need > 0 {
            if logits.is_null() {
                return Err(null("logits"));
            }
            // SAFETY: checked capacity above.
            unsafe { std::slice::from_raw_parts_mut(logits, need) }.copy_from_slice(out.as_slice());
        }
        Ok(())
    })
}

/// `max_i λ_i f_i + α Σ_i λ_i f_i` over `m` objectives.
///
/// # Safety
/// `objectives` and `lambda` must hold `m` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_parego_scalarize(
    objectives: *const f64,
    lambda: *const f64,
    m: usize,
    alpha: f64,
    out: *mut f64,
) -> LsStatus {
    guard(|| {
        let f = unsafe { slice_arg(objectives, m, "objectives") }?;
        let l = unsafe { slice_arg(lambda, m, "lambda") }?;
        let out = unsafe { out_arg(out, "out") }?;
        let weights = LambdaWeights::new(l.to_vec())?;
        *out = parego_scalarize(&ObjectiveVector(f.to_vec()), &weights, alpha)?;
        Ok(())
    })
}

/// Builds the bracket schedule for budgets `[b_min, b_max]` and factor `eta`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_schedule_new(b_min: usize, b_max: usize, eta: usize, out: *mut *mut LsSchedule) -> LsStatus {
    guard(|| {
        let out = unsafe { out_arg(out, "out") }?;
        *out = ptr::null_mut();
        let s = compute_schedule(b_min, b_max, eta)?;
        *out = Box::into_raw(Box::new(LsSchedule(s)));
        Ok(())
    })
}

/// # Safety
/// `schedule` must come from [`ls_schedule_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ls_schedule_free(schedule: *mut LsSchedule) {
    if !schedule.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(schedule) });
    }
}

/// Copies up to `cap` ladder budgets into `out` and stores the full length in
/// `len`. Pass `cap = 0` to query the length.
///
/// # Safety
/// `out` must have `cap` slots; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_schedule_ladder(
    schedule: *const LsSchedule,
    out: *mut usize,
    cap: usize,
    len: *mut usize,
) -> LsStatus {
    guard(|| {
        let s = &unsafe { handle(schedule, "schedule") }?.0;
        let len = unsafe { out_arg(len, "len") }?;
        *len = s.ladder.len();
        let n = cap.min(s.ladder.len());
        if n > 0 {
            if out.is_null() {
                return Err(null("out"));
            }
            // SAFETY: the caller provides `cap >= n` slots.
            unsafe { std::slice::from_raw_parts_mut(out, n) }.copy_from_slice(&s.ladder[..n]);
        }
        Ok(())
    })
}

/// Number of brackets (`s_max + 1`).
///
/// # Safety
/// `schedule` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ls_schedule_num_brackets(schedule: *const LsSchedule, out: *mut usize) -> LsStatus {
    guard(|| {
        let s = &unsafe { handle(schedule, "schedule") }?.0;
        *unsafe { out_arg(out, "out") }? = s.brackets.len();
        Ok(())
    })
}

/// Number of stages in bracket `bracket` (brackets ordered from `s_max` down).
///
/// # Safety
/// `schedule` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ls_schedule_num_stages(
    schedule: *const LsSchedule,
    bracket: usize,
    out: *mut usize,
) -> LsStatus {
    guard(|| {
        let s = &unsafe { handle(schedule, "schedule") }?.0;
        let b = s
            .brackets
            .get(bracket)
            .ok_or_else(|| Failure(LsStatus::OutOfRange, format!("no bracket {bracket}")))?;
        *unsafe { out_arg(out, "out") }? = b.stages.len();
        Ok(())
    })
}

/// # Safety
/// `schedule` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ls_schedule_stage(
    schedule: *const LsSchedule,
    bracket: usize,
    stage: usize,
    out: *mut LsStage,
) -> LsStatus {
    guard(|| {
        let s = &unsafe { handle(schedule, "schedule") }?.0;
        let st = s
            .brackets
            .get(bracket)
            .and_then(|b| b.stages.get(stage))
            .ok_or_else(|| Failure(LsStatus::OutOfRange, format!("no stage {stage} in bracket {bracket}")))?;
        *unsafe { out_arg(out, "out") }? = LsStage {
            count: st.count,
            budget: st.budget,
        };
        Ok(())
    })
}

/// Runs the search described by a run config file, writing its journal and
/// exports to the configured output directory. `resume` continues from an
/// existing journal. `threads = 0` keeps the config's value.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_search_run(
    config_path: *const c_char,
    resume: bool,
    threads: usize,
    out: *mut *mut LsSearchResult,
) -> LsStatus {
    guard(|| {
        let out = unsafe { out_arg(out, "out") }?;
        *out = ptr::null_mut();
        let path = unsafe { path_arg(config_path, "config_path") }?;
        let mut run = RunConfig::load(path)?;
        run.apply(&Overrides {
            threads: (threads > 0).then_some(threads),
            ..Overrides::default()
        })?;
        let ws = Workspace::load(&run)?;
        let outcome = execute_search(&run.search, &ws, &run.output_dir, resume)?;
        *out = Box::into_raw(Box::new(LsSearchResult(outcome)));
        Ok(())
    })
}

/// # Safety
/// `result` must come from [`ls_search_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ls_search_result_free(result: *mut LsSearchResult) {
    if !result.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(result) });
    }
}

/// Trials run and Pareto-front size.
///
/// # Safety
/// `result` must be live; both outputs writable.
#[no_mangle]
pub unsafe extern "C" fn ls_search_result_counts(
    result: *const LsSearchResult,
    trials: *mut usize,
    front_size: *mut usize,
) -> LsStatus {
    guard(|| {
        let r = &unsafe { handle(result, "result") }?.0;
        *unsafe { out_arg(trials, "trials") }? = r.history.len();
        *unsafe { out_arg(front_size, "front_size") }? = r.front.len();
        Ok(())
    })
}

/// Summary of the best trial; objectives go to `objectives` (capacity `cap`).
///
/// # Safety
/// `result` must be live; `out` writable; `objectives` must have `cap` slots.
#[no_mangle]
pub unsafe extern "C" fn ls_search_result_best(
    result: *const LsSearchResult,
    out: *mut LsBest,
    objectives: *mut f64,
    cap: usize,
) -> LsStatus {
    guard(|| {
        let r = &unsafe { handle(result, "result") }?.0;
        let out = unsafe { out_arg(out, "out") }?;
        *out = LsBest::default();
        let Some(best) = &r.best else { return Ok(()) };
        let f = &best.objectives.0;
        *out = LsBest {
            found: true,
            trial: best.timestamp,
            scalarized: best.scalarized,
            mean_error: best.objectives.mean(),
            num_objectives: f.len(),
        };
        let n = cap.min(f.len());
        if n > 0 {
            if objectives.is_null() {
                return Err(null("objectives"));
            }
            // SAFETY: the caller provides `cap >= n` slots.
            unsafe { std::slice::from_raw_parts_mut(objectives, n) }.copy_from_slice(&f[..n]);
        }
        Ok(())
    })
}
