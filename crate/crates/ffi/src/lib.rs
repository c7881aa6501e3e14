//! C ABI over `rankforge`.
//!
//! Every entry point returns an [`RfStatus`]; results go through out-pointers.
//! After a failure, [`rf_last_error_message`] describes it. Handles are opaque
//! and must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rankforge::dataset::{load_csv, CategoryTable, Dataset, MatchRecord};
use rankforge::fit::{fit, FitOptions};
use rankforge::model::{matched_scores, outcome_probs};
use rankforge::online::RankState;
use rankforge::{Error, LossKind, ModelParams, Thresholds};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    NotConverged = 5,
    Numerical = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Training loss.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfLoss {
    Log = 0,
    Fivb = 1,
}

impl From<RfLoss> for LossKind {
    fn from(l: RfLoss) -> Self {
        match l {
            RfLoss::Log => LossKind::LogScore,
            RfLoss::Fivb => LossKind::ImplicitFivb,
        }
    }
}

/// Model parameters.
pub struct RfParams {
    inner: ModelParams,
}

/// Match list with its team names.
pub struct RfDataset {
    inner: Dataset,
    names: Vec<CString>,
}

/// Online ranking state.
pub struct RfRanker {
    inner: RankState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RfStatus {
    match e {
        Error::Io(_) => RfStatus::Io,
        Error::Csv { .. } | Error::Json(_) | Error::IllegalSetScore { .. } => RfStatus::Parse,
        Error::NotConverged { .. } => RfStatus::NotConverged,
        Error::SingularHessian
        | Error::Diverged { .. }
        | Error::LeverageTooHigh { .. }
        | Error::HeldOut { .. }
        | Error::LineSearch { .. } => RfStatus::Numerical,
        _ => RfStatus::InvalidArgument,
    }
}

struct Fail(RfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RfStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(RfStatus::InvalidArgument, msg.into())
}

/// Runs `f`, recording the error and turning panics into [`RfStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RfStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            RfStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn get_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null("out"));
    }
    if len < need {
        return Err(Fail(
            RfStatus::BufferTooSmall,
            format!("buffer holds {len} values, {need} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("`{what}` is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn rf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The official FIVB configuration.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_params_fivb(out: *mut *mut RfParams) -> RfStatus {
    guard(|| {
        put(
            out,
            RfParams {
                inner: ModelParams::fivb(),
            },
        )
    })
}

/// Parameters from JSON. Fields left out keep their FIVB values.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_params_from_json(json: *const c_char, out: *mut *mut RfParams) -> RfStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let given: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Fail(RfStatus::Parse, e.to_string()))?;
        let serde_json::Value::Object(fields) = given else {
            return Err(Fail(RfStatus::Parse, "parameters must be a JSON object".into()));
        };
        let mut base = serde_json::to_value(ModelParams::fivb()).expect("params serialize");
        let target = base.as_object_mut().expect("params serialize as an object");
        for (k, v) in fields {
            if !target.contains_key(&k) {
                return Err(Fail(RfStatus::Parse, format!("unknown parameter `{k}`")));
            }
            target.insert(k, v);
        }
        let p: ModelParams =
            serde_json::from_value(base).map_err(|e| Fail(RfStatus::Parse, e.to_string()))?;
        p.validate()?;
        put(out, RfParams { inner: p })
    })
}

/// JSON form of the parameters; free it with [`rf_string_free`].
///
/// # Safety
/// `p` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_params_to_json(p: *const RfParams, out: *mut *mut c_char) -> RfStatus {
    guard(|| {
        let p = get(p, "params")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = serde_json::to_string(&p.inner).expect("params serialize");
        *out = CString::new(s).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_params_set_gamma(p: *mut RfParams, gamma: f64) -> RfStatus {
    guard(|| {
        let p = get_mut(p, "params")?;
        let mut q = p.inner.clone().with_gamma(gamma);
        q.validate()?;
        std::mem::swap(&mut p.inner, &mut q);
        Ok(())
    })
}

/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_params_set_eta(p: *mut RfParams, eta: f64) -> RfStatus {
    guard(|| {
        let p = get_mut(p, "params")?;
        let mut q = p.inner.clone().with_eta(eta);
        q.validate()?;
        std::mem::swap(&mut p.inner, &mut q);
        Ok(())
    })
}

/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_params_set_mu(p: *mut RfParams, mu: f64) -> RfStatus {
    guard(|| {
        let p = get_mut(p, "params")?;
        let mut q = p.inner.clone();
        q.mu = mu;
        q.validate()?;
        p.inner = q;
        Ok(())
    })
}

/// Number of outcome levels `L`.
///
/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_params_levels(p: *const RfParams) -> usize {
    p.as_ref().map_or(0, |p| p.inner.levels())
}

/// # Safety
/// `p` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rf_params_free(p: *mut RfParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Loads a match CSV with the FIVB category table.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_dataset_load_csv(path: *const c_char, out: *mut *mut RfDataset) -> RfStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let d = load_csv(path, &CategoryTable::fivb())?;
        let names = d
            .teams
            .iter()
            .map(|t| CString::new(t.as_str()).map_err(|_| invalid("team name contains NUL")))
            .collect::<Result<_, _>>()?;
        put(out, RfDataset { inner: d, names })
    })
}

/// # Safety
/// `d` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_dataset_team_count(d: *const RfDataset) -> usize {
    d.as_ref().map_or(0, |d| d.inner.team_count())
}

/// # Safety
/// `d` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_dataset_match_count(d: *const RfDataset) -> usize {
    d.as_ref().map_or(0, |d| d.inner.len())
}

/// Name of team `i`, owned by the dataset; NULL when out of range.
///
/// # Safety
/// `d` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_dataset_team_name(d: *const RfDataset, i: usize) -> *const c_char {
    d.as_ref()
        .and_then(|d| d.names.get(i))
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// # Safety
/// `d` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rf_dataset_free(d: *mut RfDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Writes the `L` outcome probabilities at model argument `z`.
///
/// # Safety
/// `p` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rf_outcome_probs(p: *const RfParams, z: f64, out: *mut f64, len: usize) -> RfStatus {
    guard(|| {
        let p = get(p, "params")?;
        if !z.is_finite() {
            return Err(invalid(format!("z = {z}")));
        }
        let probs = outcome_probs(z, &p.inner.thresholds);
        out_slice(out, len, probs.len())?.copy_from_slice(&probs);
        Ok(())
    })
}

/// Matched numerical scores for the `n` interior thresholds `c`; writes
/// `n + 1` values.
///
/// # Safety
/// `c` must hold `n` doubles; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rf_matched_scores(
    c: *const f64,
    n: usize,
    r0: f64,
    out: *mut f64,
    len: usize,
) -> RfStatus {
    guard(|| {
        if c.is_null() {
            return Err(null("c"));
        }
        let t = Thresholds::new(std::slice::from_raw_parts(c, n).to_vec())?;
        let r = matched_scores(&t, r0)?;
        out_slice(out, len, r.levels())?.copy_from_slice(r.values());
        Ok(())
    })
}

/// Batch fit. Writes one latent skill per team, in dataset order, and the
/// objective value when `objective` is not NULL.
///
/// # Safety
/// `d` and `p` must be live handles; `skills` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rf_fit(
    d: *const RfDataset,
    p: *const RfParams,
    loss: RfLoss,
    skills: *mut f64,
    len: usize,
    objective: *mut f64,
) -> RfStatus {
    guard(|| {
        let (d, p) = (get(d, "dataset")?, get(p, "params")?);
        let f = fit(&d.inner, &p.inner, loss.into(), &FitOptions::default())?;
        out_slice(skills, len, f.theta.len())?.copy_from_slice(&f.theta);
        if let Some(o) = objective.as_mut() {
            *o = f.objective;
        }
        Ok(())
    })
}

/// Approximate leave-one-out: average log-score `U` and `V = e^{-U}`.
///
/// # Safety
/// `d` and `p` must be live handles; `u` and `v` NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn rf_alo(
    d: *const RfDataset,
    p: *const RfParams,
    loss: RfLoss,
    u: *mut f64,
    v: *mut f64,
) -> RfStatus {
    guard(|| {
        let (d, p) = (get(d, "dataset")?, get(p, "params")?);
        let r = rankforge::alo::alo(&d.inner, &p.inner, loss.into())?;
        if let Some(u) = u.as_mut() {
            *u = r.u;
        }
        if let Some(v) = v.as_mut() {
            *v = r.v;
        }
        Ok(())
    })
}

/// Online ranker over `teams` teams. `init` holds their display-scale skills,
/// or is NULL for all zeros.
///
/// # Safety
/// `p` must be a live handle; `init` NULL or holding `teams` doubles.
#[no_mangle]
pub unsafe extern "C" fn rf_ranker_new(
    p: *const RfParams,
    loss: RfLoss,
    teams: usize,
    init: *const f64,
    out: *mut *mut RfRanker,
) -> RfStatus {
    guard(|| {
        let p = get(p, "params")?;
        p.inner.validate()?;
        if teams < 2 {
            return Err(invalid(format!("{teams} teams")));
        }
        let theta = if init.is_null() {
            vec![0.0; teams]
        } else {
            std::slice::from_raw_parts(init, teams).to_vec()
        };
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(invalid("initial skills must be finite"));
        }
        put(
            out,
            RfRanker {
                inner: RankState::new(theta, p.inner.clone(), loss.into()),
            },
        )
    })
}

/// Scores one match with the current skills, then updates them. `pred_loss`
/// (log-score of the prediction) and `delta_home` may be NULL.
///
/// # Safety
/// `r` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_ranker_step(
    r: *mut RfRanker,
    home: usize,
    away: usize,
    outcome: usize,
    home_venue: bool,
    category: usize,
    pred_loss: *mut f64,
    delta_home: *mut f64,
) -> RfStatus {
    guard(|| {
        let r = get_mut(r, "ranker")?;
        let s = &mut r.inner;
        let m = s.theta.len();
        if home >= m || away >= m || home == away {
            return Err(invalid(format!("teams {home} and {away} out of {m}")));
        }
        if outcome >= s.params.levels() {
            return Err(Error::OutcomeOutOfRange {
                y: outcome,
                levels: s.params.levels(),
            }
            .into());
        }
        if category >= s.params.categories() {
            return Err(Error::UnknownCategory(category.to_string()).into());
        }
        let rec = MatchRecord {
            t: s.t,
            date: Default::default(),
            home,
            away,
            outcome,
            home_venue,
            category,
            increment: None,
        };
        let (loss, delta) = s.step(&rec);
        if let Some(o) = pred_loss.as_mut() {
            *o = loss;
        }
        if let Some(o) = delta_home.as_mut() {
            *o = delta;
        }
        Ok(())
    })
}

/// Copies the current display-scale skills.
///
/// # Safety
/// `r` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rf_ranker_skills(r: *const RfRanker, out: *mut f64, len: usize) -> RfStatus {
    guard(|| {
        let r = get(r, "ranker")?;
        out_slice(out, len, r.inner.theta.len())?.copy_from_slice(&r.inner.theta);
        Ok(())
    })
}

/// # Safety
/// `r` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rf_ranker_free(r: *mut RfRanker) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
