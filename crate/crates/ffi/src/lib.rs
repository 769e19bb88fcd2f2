//! C ABI for the metareg divergences, solver and optimizers.
//!
//! Every function returns an [`MrStatus`]. On failure the message is kept in a
//! thread-local buffer readable through [`mr_last_error_message`]. Handles are
//! opaque and must be released with their `_free` function.
//!
//! Pointer arguments must be valid for the stated length; a null pointer gives
//! `MR_STATUS_NULL_POINTER` rather than undefined behaviour.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use metareg::optimizer::{apply_growth_clip, project_rate_box};
use metareg::solver::{solve_exact_rate, solve_sc_exact_rate};
use metareg::{step, Divergence, Error, OptimizerConfig, OptimizerState, RateBox, RuleVariant};

/// Status codes returned by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Shape = 4,
    OutOfRange = 5,
    NoRoot = 6,
    NoConvergence = 7,
    Numeric = 8,
    Io = 9,
    Panic = 10,
}

/// Update rules.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrRule {
    Exact = 0,
    Alternating = 1,
    ScExact = 2,
    ScAlternating = 3,
    ScalarExact = 4,
    ScalarAlternating = 5,
}

impl From<MrRule> for RuleVariant {
    fn from(r: MrRule) -> Self {
        match r {
            MrRule::Exact => RuleVariant::Exact,
            MrRule::Alternating => RuleVariant::Alternating,
            MrRule::ScExact => RuleVariant::ScExact,
            MrRule::ScAlternating => RuleVariant::ScAlternating,
            MrRule::ScalarExact => RuleVariant::ScalarExact,
            MrRule::ScalarAlternating => RuleVariant::ScalarAlternating,
        }
    }
}

/// Optimizer settings. `lambda` is read only by the strongly convex rules;
/// `clip_factor <= 0` disables growth clipping.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MrOptimizerOptions {
    pub rule: MrRule,
    pub alpha0: f64,
    pub lambda: f64,
    pub clip_factor: f64,
}

/// Safeguard counts of the most recent step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MrDiagnostics {
    pub out_of_domain: usize,
    pub clipped: usize,
    pub boxed: usize,
    pub floored: usize,
    pub max_ratio: f64,
}

/// Opaque divergence handle.
pub struct MrDivergence(Divergence);

/// Opaque optimizer handle: configuration plus current state.
pub struct MrOptimizer {
    config: OptimizerConfig,
    state: OptimizerState,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> MrStatus {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::EmptyDataset => MrStatus::InvalidArgument,
        Error::Domain(_) | Error::Unbounded(_) => MrStatus::Domain,
        Error::Shape { .. } => MrStatus::Shape,
        Error::OutOfRange { .. } => MrStatus::OutOfRange,
        Error::NoRoot { .. } => MrStatus::NoRoot,
        Error::NoConvergence { .. } => MrStatus::NoConvergence,
        Error::Numeric(_) => MrStatus::Numeric,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => MrStatus::Io,
    }
}

struct Fail(MrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MrStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, records any error or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MrStatus::Ok,
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
            set_error(format!("internal panic: {msg}"));
            MrStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn copy_out(src: &[f64], dst: &mut [f64]) -> Result<(), Fail> {
    if src.len() != dst.len() {
        return Err(Error::Shape {
            expected: src.len(),
            actual: dst.len(),
        }
        .into());
    }
    dst.copy_from_slice(src);
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn mr_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a builtin divergence by name: kl, rkl, hellinger, chi2, adagrad or wngrad.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mr_divergence_new(name: *const c_char, out: *mut *mut MrDivergence) -> MrStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| Fail(MrStatus::InvalidArgument, "divergence name is not UTF-8".into()))?;
        let d = Divergence::make_builtin(name)?;
        write(out, Box::into_raw(Box::new(MrDivergence(d))), "out")
    })
}

/// Releases a divergence. Null is ignored.
///
/// # Safety
/// `d` must come from [`mr_divergence_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mr_divergence_free(d: *mut MrDivergence) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// `φ(t)`.
///
/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mr_divergence_phi(d: *const MrDivergence, t: f64, out: *mut f64) -> MrStatus {
    guard(|| write(out, get(d, "d")?.0.phi(t), "out"))
}

/// `φ'(t)`.
///
/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mr_divergence_phi_prime(d: *const MrDivergence, t: f64, out: *mut f64) -> MrStatus {
    guard(|| write(out, get(d, "d")?.0.phi_prime(t), "out"))
}

/// `(φ')⁻¹(y)` on `[1, ∞)`; `MR_STATUS_OUT_OF_RANGE` when `y` has no preimage.
///
/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mr_divergence_phi_prime_inverse(d: *const MrDivergence, y: f64, out: *mut f64) -> MrStatus {
    guard(|| write(out, get(d, "d")?.0.phi_prime_inverse(y)?, "out"))
}

/// Strong-convexity constant on `[1, z_max]`.
///
/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mr_divergence_gamma(d: *const MrDivergence, z_max: f64, out: *mut f64) -> MrStatus {
    guard(|| write(out, get(d, "d")?.0.gamma(z_max), "out"))
}

/// Lipschitz constant of `φ'` on `[1, ∞)`.
///
/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mr_divergence_smoothness(d: *const MrDivergence, out: *mut f64) -> MrStatus {
    guard(|| write(out, get(d, "d")?.0.smoothness(), "out"))
}

/// Exact-rule rate for auxiliary rate `eta` and squared gradient `g_sq`.
///
/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mr_solve_exact_rate(d: *const MrDivergence, eta: f64, g_sq: f64, out: *mut f64) -> MrStatus {
    guard(|| write(out, solve_exact_rate(&get(d, "d")?.0, eta, g_sq)?, "out"))
}

/// Strongly convex exact-rule rate.
///
/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mr_solve_sc_exact_rate(
    d: *const MrDivergence,
    alpha_t: f64,
    g_sq: f64,
    lambda: f64,
    out: *mut f64,
) -> MrStatus {
    guard(|| write(out, solve_sc_exact_rate(&get(d, "d")?.0, alpha_t, g_sq, lambda)?, "out"))
}

/// Coordinate-wise `max(alpha_new, clip_factor * alpha_prev)` into `out`.
///
/// # Safety
/// The three arrays must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn mr_apply_growth_clip(
    alpha_new: *const f64,
    alpha_prev: *const f64,
    len: usize,
    clip_factor: f64,
    out: *mut f64,
) -> MrStatus {
    guard(|| {
        let new = slice(alpha_new, len, "alpha_new")?;
        let prev = slice(alpha_prev, len, "alpha_prev")?;
        let out = slice_mut(out, len, "out")?;
        copy_out(&apply_growth_clip(new, prev, clip_factor), out)
    })
}

/// Coordinate-wise clamp of `alpha_star` to `[lo, hi]` into `out`.
///
/// # Safety
/// The four arrays must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn mr_project_rate_box(
    alpha_star: *const f64,
    lo: *const f64,
    hi: *const f64,
    len: usize,
    out: *mut f64,
) -> MrStatus {
    guard(|| {
        let a = slice(alpha_star, len, "alpha_star")?;
        let lo = slice(lo, len, "lo")?;
        let hi = slice(hi, len, "hi")?;
        let out = slice_mut(out, len, "out")?;
        copy_out(&project_rate_box(a, lo, hi)?, out)
    })
}

/// Default options: alternating rule, `alpha0 = 0.5`, clip factor 0.5, no lambda.
#[no_mangle]
pub extern "C" fn mr_optimizer_options_default() -> MrOptimizerOptions {
    MrOptimizerOptions {
        rule: MrRule::Alternating,
        alpha0: 0.5,
        lambda: f64::NAN,
        clip_factor: 0.5,
    }
}

/// Creates an optimizer at `x0` (length `dim`). The divergence is copied, so
/// `d` may be freed afterwards.
///
/// # Safety
/// `d` must be a live handle, `x0` must hold `dim` values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn mr_optimizer_new(
    d: *const MrDivergence,
    options: MrOptimizerOptions,
    x0: *const f64,
    dim: usize,
    out: *mut *mut MrOptimizer,
) -> MrStatus {
    guard(|| {
        let div = get(d, "d")?.0.clone();
        let x0 = slice(x0, dim, "x0")?.to_vec();
        if dim == 0 {
            return Err(Fail(MrStatus::InvalidArgument, "dimension must be positive".into()));
        }
        let rule = RuleVariant::from(options.rule);
        let clip = (options.clip_factor > 0.0).then_some(options.clip_factor);
        let mut config = OptimizerConfig::new(div, rule, options.alpha0).with_clip_factor(clip);
        if rule.is_sc() {
            config = config.with_lambda(options.lambda);
        }
        config.validate()?;
        let state = OptimizerState::new(x0, &config);
        write(out, Box::into_raw(Box::new(MrOptimizer { config, state })), "out")
    })
}

/// Releases an optimizer. Null is ignored.
///
/// # Safety
/// `opt` must come from [`mr_optimizer_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mr_optimizer_free(opt: *mut MrOptimizer) {
    if !opt.is_null() {
        drop(Box::from_raw(opt));
    }
}

/// Sets per-coordinate rate bounds (length `dim`, or 1 for a shared box).
///
/// # Safety
/// `opt` must be a live handle; `lo` and `hi` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn mr_optimizer_set_rate_box(
    opt: *mut MrOptimizer,
    lo: *const f64,
    hi: *const f64,
    len: usize,
) -> MrStatus {
    guard(|| {
        let opt = opt.as_mut().ok_or_else(|| null("opt"))?;
        if len != 1 && len != opt.state.x.len() {
            return Err(Error::Shape {
                expected: opt.state.x.len(),
                actual: len,
            }
            .into());
        }
        let b = RateBox::new(slice(lo, len, "lo")?.to_vec(), slice(hi, len, "hi")?.to_vec())?;
        opt.config.rate_box = Some(b);
        Ok(())
    })
}

/// Advances one step with gradient `grad` (length `dim`). On error the state
/// is unchanged.
///
/// # Safety
/// `opt` must be a live handle and `grad` hold `dim` values.
#[no_mangle]
pub unsafe extern "C" fn mr_optimizer_step(opt: *mut MrOptimizer, grad: *const f64, dim: usize) -> MrStatus {
    guard(|| {
        let opt = opt.as_mut().ok_or_else(|| null("opt"))?;
        let g = slice(grad, dim, "grad")?;
        opt.state = step(&opt.state, g, &opt.config)?;
        Ok(())
    })
}

/// Problem dimension.
///
/// # Safety
/// `opt` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mr_optimizer_dim(opt: *const MrOptimizer, out: *mut usize) -> MrStatus {
    guard(|| write(out, get(opt, "opt")?.state.x.len(), "out"))
}

/// Number of rates: `dim`, or 1 for the scalar rules.
///
/// # Safety
/// `opt` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mr_optimizer_rate_count(opt: *const MrOptimizer, out: *mut usize) -> MrStatus {
    guard(|| write(out, get(opt, "opt")?.state.alpha.len(), "out"))
}

/// Steps taken so far.
///
/// # Safety
/// `opt` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mr_optimizer_iteration(opt: *const MrOptimizer, out: *mut usize) -> MrStatus {
    guard(|| write(out, get(opt, "opt")?.state.t, "out"))
}

/// Copies the current iterate into `out` (length `dim`).
///
/// # Safety
/// `opt` must be a live handle and `out` hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn mr_optimizer_get_x(opt: *const MrOptimizer, out: *mut f64, len: usize) -> MrStatus {
    guard(|| copy_out(&get(opt, "opt")?.state.x, slice_mut(out, len, "out")?))
}

/// Copies the current rates into `out` (length from [`mr_optimizer_rate_count`]).
///
/// # Safety
/// `opt` must be a live handle and `out` hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn mr_optimizer_get_rates(opt: *const MrOptimizer, out: *mut f64, len: usize) -> MrStatus {
    guard(|| copy_out(&get(opt, "opt")?.state.alpha, slice_mut(out, len, "out")?))
}

/// Safeguard counts of the most recent step.
///
/// # Safety
/// `opt` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mr_optimizer_diagnostics(opt: *const MrOptimizer, out: *mut MrDiagnostics) -> MrStatus {
    guard(|| {
        let d = get(opt, "opt")?.state.diagnostics;
        write(
            out,
            MrDiagnostics {
                out_of_domain: d.out_of_domain,
                clipped: d.clipped,
                boxed: d.boxed,
                floored: d.floored,
                max_ratio: d.max_ratio,
            },
            "out",
        )
    })
}
