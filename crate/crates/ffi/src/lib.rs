//! C interface to `lyapunov-core`.
//!
//! Every function returns a [`LyapStatus`]. On anything other than
//! `LYAP_STATUS_OK` a message is available from [`lyap_last_error`] on the same
//! thread. Panics never cross the boundary; they surface as
//! `LYAP_STATUS_INTERNAL`.
//!
//! Matrices are passed as row-major `double[4]` blocks `a b c d` for
//! `[[a, b], [c, d]]`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lyapunov_core::cantor::{census, intersection_dimension, DigitPair};
use lyapunov_core::cli::resolve_weights;
use lyapunov_core::oracle::mc_lyapunov;
use lyapunov_core::pipeline::{
    lyapunov_pipeline, positivize, LyapunovOutcome, PipelineOptions, PipelineStatus,
};
use lyapunov_core::recurrence::{growth_rate, RecurrenceSpec};
use lyapunov_core::{Error, Matrix2};

/// Outcome of a call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LyapStatus {
    Ok = 0,
    /// The computation ran but the family has a heteroclinic connection or a
    /// singular matrix, so no certified value exists. Result structs are
    /// still filled in.
    NotCertifiable = 1,
    /// Null pointer, bad length, invalid weights and the like.
    InvalidArgument = 2,
    Precondition = 3,
    NotContracting = 4,
    ArcFailed = 5,
    PositivityFailed = 6,
    Numerical = 7,
    BudgetExceeded = 8,
    Internal = 9,
}

/// How the family was brought into the kernel's domain.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LyapPipeline {
    Positive = 0,
    Conjugated = 1,
    GhcDetected = 2,
    Degenerate = 3,
}

/// Certified value. Fields are NaN / 0 when `pipeline` is not certifiable.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct LyapResult {
    pub estimate: f64,
    pub truncation_bound: f64,
    pub n: usize,
    pub m: usize,
    pub r: f64,
    pub pipeline: LyapPipeline,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct LyapCensusRow {
    pub b: u32,
    pub all_pairs: u64,
    pub degenerate: u64,
    pub no_ghc: u64,
}

/// Opaque weighted family of real 2×2 matrices.
pub struct LyapFamily {
    matrices: Vec<Matrix2>,
    weights: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(LyapStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Precondition(_) => LyapStatus::Precondition,
            Error::NotStrictlyContracting { .. } => LyapStatus::NotContracting,
            Error::ArcConstructionFailed(_) => LyapStatus::ArcFailed,
            Error::PositivityFailed { .. } => LyapStatus::PositivityFailed,
            Error::Numerical(_) => LyapStatus::Numerical,
            Error::BudgetExceeded { .. } => LyapStatus::BudgetExceeded,
        };
        Fail(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(LyapStatus::InvalidArgument, msg.into())
}

/// Runs `f`, records any failure and converts panics.
fn guard(f: impl FnOnce() -> Result<LyapStatus, Fail>) -> LyapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            LyapStatus::Internal
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(invalid(format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| invalid(format!("{what} is null")))
}

unsafe fn handle<'a>(f: *const LyapFamily) -> Result<&'a LyapFamily, Fail> {
    f.as_ref().ok_or_else(|| invalid("family is null"))
}

fn pipeline_kind(s: &PipelineStatus) -> LyapPipeline {
    match s {
        PipelineStatus::Positive => LyapPipeline::Positive,
        PipelineStatus::Conjugated { .. } => LyapPipeline::Conjugated,
        PipelineStatus::GhcDetected { .. } => LyapPipeline::GhcDetected,
        PipelineStatus::Degenerate { .. } => LyapPipeline::Degenerate,
    }
}

fn fill_result(o: &LyapunovOutcome, res: &mut LyapResult) -> LyapStatus {
    *res = LyapResult {
        estimate: f64::NAN,
        truncation_bound: f64::NAN,
        n: 0,
        m: 0,
        r: f64::NAN,
        pipeline: pipeline_kind(&o.status),
    };
    match o.value {
        Some(v) => {
            res.estimate = v.estimate;
            res.truncation_bound = v.truncation_bound;
            res.n = v.n;
            res.m = v.m;
            res.r = v.r_used;
            LyapStatus::Ok
        }
        None => {
            let why = match &o.status {
                PipelineStatus::GhcDetected { witness } => witness.describe(),
                PipelineStatus::Degenerate { index } => format!("matrix {index} is singular"),
                _ => "no certified value".into(),
            };
            set_error(format!("not certifiable: {why}"));
            LyapStatus::NotCertifiable
        }
    }
}

/// Creates a family from `n` matrices (`4n` doubles) and optional weights.
/// With `weights` null the weights are uniform; otherwise they must be
/// positive and sum to 1 up to 1e-6, and are renormalized.
///
/// # Safety
/// `entries` must point to `4n` doubles, `weights` to `n` doubles or be null,
/// and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lyap_family_new(
    entries: *const f64,
    weights: *const f64,
    n: usize,
    out_family: *mut *mut LyapFamily,
) -> LyapStatus {
    guard(|| {
        let dst = out(out_family, "out_family")?;
        *dst = ptr::null_mut();
        if n == 0 {
            return Err(invalid("family needs at least one matrix"));
        }
        let e = slice(entries, 4 * n, "entries")?;
        if e.iter().any(|x| !x.is_finite()) {
            return Err(invalid("matrix entries must be finite"));
        }
        let w = if weights.is_null() {
            None
        } else {
            Some(slice(weights, n, "weights")?.to_vec())
        };
        let weights = resolve_weights(n, w).map_err(|e| invalid(e.to_string()))?;
        let matrices = e
            .chunks_exact(4)
            .map(|c| Matrix2::new(c[0], c[1], c[2], c[3]))
            .collect();
        *dst = Box::into_raw(Box::new(LyapFamily { matrices, weights }));
        Ok(LyapStatus::Ok)
    })
}

/// Frees a family. Null is ignored.
///
/// # Safety
/// `family` must come from [`lyap_family_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lyap_family_free(family: *mut LyapFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// Certified top Lyapunov exponent of a non-negative family to accuracy `eps`.
///
/// # Safety
/// `family` must be a live handle and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn lyap_compute(
    family: *const LyapFamily,
    eps: f64,
    result: *mut LyapResult,
) -> LyapStatus {
    guard(|| {
        let f = handle(family)?;
        let res = out(result, "result")?;
        let o = lyapunov_pipeline(&f.matrices, &f.weights, eps, &PipelineOptions::default())?;
        Ok(fill_result(&o, res))
    })
}

/// Positivization status and conjugator. `p_out` receives the four entries of
/// `P` (identity when already positive, untouched otherwise).
///
/// # Safety
/// `family` must be a live handle, `pipeline` writable, `p_out` null or
/// writable for four doubles.
#[no_mangle]
pub unsafe extern "C" fn lyap_positivize(
    family: *const LyapFamily,
    pipeline: *mut LyapPipeline,
    p_out: *mut f64,
) -> LyapStatus {
    guard(|| {
        let f = handle(family)?;
        let kind = out(pipeline, "pipeline")?;
        let pos = positivize(&f.matrices, &PipelineOptions::default())?;
        *kind = pipeline_kind(&pos.status);
        let p = match &pos.status {
            PipelineStatus::Positive => Some(Matrix2::IDENTITY),
            PipelineStatus::Conjugated { p, .. } => Some(*p),
            _ => None,
        };
        if let (Some(p), false) = (p, p_out.is_null()) {
            std::slice::from_raw_parts_mut(p_out, 4).copy_from_slice(&p.entries());
        }
        Ok(if pos.status.is_certifiable() {
            LyapStatus::Ok
        } else {
            set_error(format!("not certifiable: {}", pos.status.name()));
            LyapStatus::NotCertifiable
        })
    })
}

/// Dimension of the intersection of two base-`b` Cantor sets with digit sets
/// `d1` and `d2`. `dimension` is NaN when not certifiable.
///
/// # Safety
/// Digit arrays must hold `n1` and `n2` entries; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lyap_cantor_dimension(
    b: u32,
    d1: *const u32,
    n1: usize,
    d2: *const u32,
    n2: usize,
    eps: f64,
    result: *mut LyapResult,
    dimension: *mut f64,
) -> LyapStatus {
    guard(|| {
        let res = out(result, "result")?;
        let dim = out(dimension, "dimension")?;
        let pair = DigitPair::new(b, slice(d1, n1, "d1")?, slice(d2, n2, "d2")?)?;
        let r = intersection_dimension(&pair, eps)?;
        *dim = r.dimension.unwrap_or(f64::NAN);
        Ok(fill_result(&r.outcome, res))
    })
}

/// Exact census of all digit-set pairs in base `b` (at most 16). Cost grows
/// like 4^b.
///
/// # Safety
/// `row` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lyap_census(b: u32, row: *mut LyapCensusRow) -> LyapStatus {
    guard(|| {
        let dst = out(row, "row")?;
        let r = census(b, false)?.row;
        *dst = LyapCensusRow {
            b: r.b,
            all_pairs: r.all_pairs,
            degenerate: r.degenerate,
            no_ghc: r.no_ghc,
        };
        Ok(LyapStatus::Ok)
    })
}

/// Growth rate of `x_{n+1} = a x_n + b x_{n-1}` with `(a_i, b_i)` drawn with
/// probability `weights[i]` (uniform when null). Coefficients must be positive.
///
/// # Safety
/// Arrays must hold `n` entries; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lyap_recurrence_growth(
    a: *const f64,
    b: *const f64,
    weights: *const f64,
    n: usize,
    eps: f64,
    growth: *mut f64,
    bound: *mut f64,
) -> LyapStatus {
    guard(|| {
        let g_out = out(growth, "growth")?;
        let b_out = out(bound, "bound")?;
        let pairs: Vec<(f64, f64)> = slice(a, n, "a")?
            .iter()
            .copied()
            .zip(slice(b, n, "b")?.iter().copied())
            .collect();
        let w = if weights.is_null() {
            None
        } else {
            Some(slice(weights, n, "weights")?.to_vec())
        };
        let w = resolve_weights(n, w).map_err(|e| invalid(e.to_string()))?;
        let g = growth_rate(&RecurrenceSpec::new(pairs, w)?, eps)?;
        *g_out = g.growth;
        *b_out = g.bound;
        Ok(LyapStatus::Ok)
    })
}

/// Monte Carlo estimate, valid for any invertible real family.
///
/// # Safety
/// `family` must be a live handle and outputs writable.
#[no_mangle]
pub unsafe extern "C" fn lyap_mc(
    family: *const LyapFamily,
    steps: usize,
    trials: usize,
    seed: u64,
    mean: *mut f64,
    std_error: *mut f64,
) -> LyapStatus {
    guard(|| {
        let f = handle(family)?;
        let m = out(mean, "mean")?;
        let s = out(std_error, "std_error")?;
        let est = mc_lyapunov(&f.matrices, &f.weights, steps, trials, seed)?;
        *m = est.mean;
        *s = est.std_error;
        Ok(LyapStatus::Ok)
    })
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lyap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn lyap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
