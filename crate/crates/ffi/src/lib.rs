//! C ABI for the heatcube laboratory.
//!
//! Conventions, uniform across every `hc_*` entry point:
//!
//! * Objects live behind opaque handles (`HcFunction`, `HcBias`,
//!   `HcWitness`) created by `hc_*_new`-style calls and released by the
//!   matching `hc_*_free`. Handles are never shared mutably; every function
//!   here takes them read-only.
//! * Fallible calls return an [`HcStatus`]. `HC_STATUS_OK` (0) means the
//!   out-parameters were written; any other value means they were not.
//!   [`hc_last_error`] returns a UTF-8, NUL-terminated description of the
//!   most recent failure on the calling thread, valid until that thread's
//!   next failing call.
//! * Buffers are always passed with an explicit length, and the length must
//!   match exactly what the call produces.
//! * Panics never unwind across the boundary: they are caught and surfaced
//!   as `HC_STATUS_PANIC`.
//!
//! The matching C header is generated into `include/heatcube.h` at build
//! time.

use heatcube::functionals::{
    enflo_functional, metric_stable_functional, poincare_functional, MetricSpec,
};
use heatcube::heatflow::{theta_star, theta_star_vector};
use heatcube::rng::{random_function, stream_rng};
use heatcube::topology::AntipodalWitness;
use heatcube::{
    distortion, edge_antipodal_ratio, find_antipodal_zero, generator_apply, lower_bound_main,
    mc_semigroup, restricted_poincare_check, semigroup_apply, sharp_example, verify_identity,
    walsh_transform, BiasVector, BoundInputs, CubeFunction, CubeMetric, CubePoint,
    InequalityReport, NormSpec, SearchOpts, WeightVector,
};
use std::cell::RefCell;
use std::ffi::{c_char, c_void, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

// ===========================================================================
// Status codes and the thread-local error message
// ===========================================================================

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HcStatus {
    /// Success; out-parameters are valid.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Arguments were rejected (dimension mismatch, out-of-range value,
    /// wrong buffer length, rejected callback, ...); see `hc_last_error`.
    InvalidArgument = 2,
    /// The antipodal search ran out of faces without meeting the tolerance.
    SearchExhausted = 3,
    /// An internal panic was caught at the boundary.
    Panic = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let cstring = CString::new(msg.replace('\0', "?"))
        .unwrap_or_else(|_| CString::new("invalid error text").expect("static text"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

/// Description of the calling thread's most recent failure, as a
/// NUL-terminated UTF-8 string. Empty if nothing failed yet. The pointer is
/// owned by the library and valid until the next failing `hc_*` call on the
/// same thread.
#[no_mangle]
pub extern "C" fn hc_last_error() -> *const c_char {
    static EMPTY: &[u8] = b"\0";
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        Some(s) => s.as_ptr(),
        None => EMPTY.as_ptr() as *const c_char,
    })
}

/// Library version as a static NUL-terminated string (never null).
#[no_mangle]
pub extern "C" fn hc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

fn fail(e: heatcube::Error) -> HcStatus {
    let status = match &e {
        heatcube::Error::BudgetExhausted { .. } => HcStatus::SearchExhausted,
        _ => HcStatus::InvalidArgument,
    };
    set_error(e.to_string());
    status
}

fn guarded(body: impl FnOnce() -> HcStatus) -> HcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "opaque panic payload".to_string());
            set_error(format!("internal panic: {msg}"));
            HcStatus::Panic
        }
    }
}

/// Null-checked shared borrow of a handle or struct pointer.
///
/// # Safety
/// `p` must be null or valid for reads for `'a`.
unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, HcStatus> {
    match p.as_ref() {
        Some(r) => Ok(r),
        None => {
            set_error(format!("{name} must not be null"));
            Err(HcStatus::NullPointer)
        }
    }
}

/// Null-checked view of a caller buffer.
///
/// # Safety
/// `p` must be null or valid for reading `len` values.
unsafe fn borrow_slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], HcStatus> {
    if p.is_null() {
        set_error(format!("{name} must not be null"));
        return Err(HcStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copies `src` into the caller buffer, demanding an exact length match.
///
/// # Safety
/// `dst` must be null or valid for writing `dst_len` values.
unsafe fn fill(dst: *mut f64, dst_len: usize, src: &[f64], name: &str) -> Result<(), HcStatus> {
    if dst.is_null() {
        set_error(format!("{name} must not be null"));
        return Err(HcStatus::NullPointer);
    }
    if dst_len != src.len() {
        set_error(format!(
            "{name} holds {dst_len} values but {} are required",
            src.len()
        ));
        return Err(HcStatus::InvalidArgument);
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Writes one value through a null-checked out-pointer.
///
/// # Safety
/// `dst` must be null or valid for writes.
unsafe fn put<T>(dst: *mut T, value: T, name: &str) -> Result<(), HcStatus> {
    if dst.is_null() {
        set_error(format!("{name} must not be null"));
        return Err(HcStatus::NullPointer);
    }
    dst.write(value);
    Ok(())
}

macro_rules! attempt {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

macro_rules! lib {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return fail(e),
        }
    };
}

// ===========================================================================
// Opaque handles
// ===========================================================================

/// A vector-valued function on the vertices of the n-cube (opaque).
pub struct HcFunction(CubeFunction);

/// Per-coordinate probabilities of the +1 state (opaque).
pub struct HcBias(BiasVector);

/// An antipodal near-zero of a multilinear extension on a low-dimensional
/// skeleton (opaque).
pub struct HcWitness(AntipodalWitness);

// ===========================================================================
// Flat report structs
// ===========================================================================

/// A two-sided comparison. `budget` is NaN when the comparison carries no
/// fixed constant; `holds` is 1 (true), 0 (false), or -1 (no verdict).
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct HcComparison {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub budget: f64,
    pub holds: i32,
}

fn comparison_from(rep: &InequalityReport) -> HcComparison {
    HcComparison {
        lhs: rep.lhs,
        rhs: rep.rhs,
        ratio: rep.ratio,
        budget: rep.constant_budget.unwrap_or(f64::NAN),
        holds: match rep.holds {
            Some(true) => 1,
            Some(false) => 0,
            None => -1,
        },
    }
}

/// Bi-Lipschitz scan result. `distortion` is +inf when the map collapses a
/// pair of distinct vertices. The `arg*` pairs name extremal vertex masks.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct HcDistortion {
    pub lip: f64,
    pub colip: f64,
    pub distortion: f64,
    pub argmax_x: u32,
    pub argmax_y: u32,
    pub argmin_x: u32,
    pub argmin_y: u32,
    pub pairs_scanned: u64,
}

// ===========================================================================
// Function handles
// ===========================================================================

/// Creates a function on the n-cube from a row-major table:
/// `values[mask * d + j]` is component `j` at the vertex whose +1 set is
/// `mask`. `len` must equal `2^n * d`.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_function_new(
    n: usize,
    d: usize,
    values: *const f64,
    len: usize,
    out: *mut *mut HcFunction,
) -> HcStatus {
    guarded(|| {
        let vals = attempt!(borrow_slice(values, len, "values"));
        let f = lib!(CubeFunction::new(n, d, vals.to_vec()));
        attempt!(put(out, Box::into_raw(Box::new(HcFunction(f))), "out"));
        HcStatus::Ok
    })
}

/// Creates a seeded random function with independent standard normal
/// Fourier-side coefficients (the library's stock test distribution).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_function_random(
    n: usize,
    d: usize,
    seed: u64,
    out: *mut *mut HcFunction,
) -> HcStatus {
    guarded(|| {
        let mut rng = stream_rng(seed, 0);
        let f = lib!(random_function(&mut rng, n, d));
        attempt!(put(out, Box::into_raw(Box::new(HcFunction(f))), "out"));
        HcStatus::Ok
    })
}

/// Creates the contiguous block-sum map (requires `d | n` with `n/d` odd).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_function_sharp(
    n: usize,
    d: usize,
    out: *mut *mut HcFunction,
) -> HcStatus {
    guarded(|| {
        let f = lib!(sharp_example(n, d));
        attempt!(put(out, Box::into_raw(Box::new(HcFunction(f))), "out"));
        HcStatus::Ok
    })
}

/// Releases a function handle (null is ignored).
///
/// # Safety
/// `f` must be null or a pointer previously returned by an `hc_function_*`
/// constructor, not freed before.
#[no_mangle]
pub unsafe extern "C" fn hc_function_free(f: *mut HcFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Cube dimension of the handle (0 if `f` is null).
///
/// # Safety
/// `f` must be null or a live function handle.
#[no_mangle]
pub unsafe extern "C" fn hc_function_n(f: *const HcFunction) -> usize {
    f.as_ref().map_or(0, |f| f.0.n())
}

/// Range dimension of the handle (0 if `f` is null).
///
/// # Safety
/// `f` must be null or a live function handle.
#[no_mangle]
pub unsafe extern "C" fn hc_function_d(f: *const HcFunction) -> usize {
    f.as_ref().map_or(0, |f| f.0.d())
}

/// Copies the full value table (layout as in [`hc_function_new`]) into
/// `out`, whose length `len` must equal `2^n * d`.
///
/// # Safety
/// `f` must be null or a live handle; `out` must hold `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn hc_function_values(
    f: *const HcFunction,
    out: *mut f64,
    len: usize,
) -> HcStatus {
    guarded(|| {
        let f = attempt!(borrow(f, "f"));
        attempt!(fill(out, len, f.0.values(), "out"));
        HcStatus::Ok
    })
}

// ===========================================================================
// Bias handles
// ===========================================================================

/// Creates a bias vector; `alphas[i]` in [0, 1] is clamped away from the
/// endpoints by the library's guard band.
///
/// # Safety
/// `alphas` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_bias_new(
    alphas: *const f64,
    n: usize,
    out: *mut *mut HcBias,
) -> HcStatus {
    guarded(|| {
        let vals = attempt!(borrow_slice(alphas, n, "alphas"));
        let b = lib!(BiasVector::new(vals.to_vec()));
        attempt!(put(out, Box::into_raw(Box::new(HcBias(b))), "out"));
        HcStatus::Ok
    })
}

/// Creates the unbiased (all 1/2) bias vector.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_bias_uniform(n: usize, out: *mut *mut HcBias) -> HcStatus {
    guarded(|| {
        let b = lib!(BiasVector::new(vec![0.5; n]));
        attempt!(put(out, Box::into_raw(Box::new(HcBias(b))), "out"));
        HcStatus::Ok
    })
}

/// Releases a bias handle (null is ignored).
///
/// # Safety
/// `b` must be null or a pointer previously returned by an `hc_bias_*`
/// constructor, not freed before.
#[no_mangle]
pub unsafe extern "C" fn hc_bias_free(b: *mut HcBias) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

// ===========================================================================
// Heat flow
// ===========================================================================

/// Applies the heat semigroup at time parameter `q = e^{-t}` in (0, 1],
/// returning a new function handle.
///
/// # Safety
/// `f` and `bias` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_semigroup_apply(
    f: *const HcFunction,
    bias: *const HcBias,
    q: f64,
    out: *mut *mut HcFunction,
) -> HcStatus {
    guarded(|| {
        let f = attempt!(borrow(f, "f"));
        let bias = attempt!(borrow(bias, "bias"));
        let g = lib!(semigroup_apply(&f.0, &bias.0, q));
        attempt!(put(out, Box::into_raw(Box::new(HcFunction(g))), "out"));
        HcStatus::Ok
    })
}

/// Applies the (negated derivative-sum) generator, returning a new handle.
///
/// # Safety
/// `f` and `bias` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_generator_apply(
    f: *const HcFunction,
    bias: *const HcBias,
    out: *mut *mut HcFunction,
) -> HcStatus {
    guarded(|| {
        let f = attempt!(borrow(f, "f"));
        let bias = attempt!(borrow(bias, "bias"));
        let g = lib!(generator_apply(&f.0, &bias.0));
        attempt!(put(out, Box::into_raw(Box::new(HcFunction(g))), "out"));
        HcStatus::Ok
    })
}

/// Variance-minimizing centering offset for one coordinate.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_theta_star(alpha: f64, q: f64, out: *mut f64) -> HcStatus {
    guarded(|| {
        let v = lib!(theta_star(alpha, q));
        attempt!(put(out, v, "out"));
        HcStatus::Ok
    })
}

/// Checks the generator/semigroup derivative identity at time `q`.
/// `thetas` may be null (the per-coordinate optimum is used) or a list of
/// `thetas_len == n` offsets. Writes the worst vertex residual and the
/// tolerance scale `1 + max |f|`.
///
/// # Safety
/// Handles must be live; `thetas` must be null or hold `thetas_len`
/// readable doubles; both out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_verify_identity(
    f: *const HcFunction,
    bias: *const HcBias,
    q: f64,
    thetas: *const f64,
    thetas_len: usize,
    max_residual: *mut f64,
    scale: *mut f64,
) -> HcStatus {
    guarded(|| {
        let f = attempt!(borrow(f, "f"));
        let bias = attempt!(borrow(bias, "bias"));
        let thetas = if thetas.is_null() {
            lib!(theta_star_vector(&bias.0, q))
        } else {
            attempt!(borrow_slice(thetas, thetas_len, "thetas")).to_vec()
        };
        let rep = lib!(verify_identity(&f.0, &bias.0, q, &thetas));
        attempt!(put(max_residual, rep.max_residual, "max_residual"));
        attempt!(put(scale, rep.scale, "scale"));
        HcStatus::Ok
    })
}

/// Monte Carlo estimate of the semigroup at the vertex whose +1 set is
/// `x_mask`. Writes per-component means and standard errors into buffers of
/// length `len == d`.
///
/// # Safety
/// Handles must be live; `mean` and `stderr_out` must hold `len` writable
/// doubles each.
#[no_mangle]
pub unsafe extern "C" fn hc_mc_semigroup(
    f: *const HcFunction,
    bias: *const HcBias,
    q: f64,
    x_mask: u32,
    samples: u64,
    seed: u64,
    blocks: usize,
    mean: *mut f64,
    stderr_out: *mut f64,
    len: usize,
) -> HcStatus {
    guarded(|| {
        let f = attempt!(borrow(f, "f"));
        let bias = attempt!(borrow(bias, "bias"));
        let x = lib!(CubePoint::new(f.0.n(), x_mask));
        let est = lib!(mc_semigroup(&f.0, &bias.0, q, x, samples, seed, blocks));
        attempt!(fill(mean, len, &est.mean, "mean"));
        attempt!(fill(stderr_out, len, &est.stderr, "stderr_out"));
        HcStatus::Ok
    })
}

// ===========================================================================
// Inequality comparisons (l_p range norm throughout)
// ===========================================================================

/// Antipodal Poincare comparison against the `(2 pi tp)^p` budget.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_poincare(
    f: *const HcFunction,
    bias: *const HcBias,
    p: f64,
    tp: f64,
    out: *mut HcComparison,
) -> HcStatus {
    guarded(|| {
        let f = attempt!(borrow(f, "f"));
        let bias = attempt!(borrow(bias, "bias"));
        let norm = lib!(NormSpec::lp(p, f.0.d()));
        let rep = lib!(poincare_functional(&f.0, &bias.0, p, &norm, tp));
        attempt!(put(out, comparison_from(&rep), "out"));
        HcStatus::Ok
    })
}

/// Antipodal-vs-edge moment comparison (no fixed budget; `holds` is -1).
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_enflo(
    f: *const HcFunction,
    p: f64,
    out: *mut HcComparison,
) -> HcStatus {
    guarded(|| {
        let f = attempt!(borrow(f, "f"));
        let norm = lib!(NormSpec::lp(p, f.0.d()));
        let rep = lib!(enflo_functional(&f.0, p, &norm));
        attempt!(put(out, comparison_from(&rep), "out"));
        HcStatus::Ok
    })
}

/// Weak-norm stable-type comparison with the `l_p` metric on values;
/// `ratio^{1/p}` lower-bounds the stable-type constant. `p` in (0, 2).
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_stable_type(
    f: *const HcFunction,
    p: f64,
    out: *mut HcComparison,
) -> HcStatus {
    guarded(|| {
        let f = attempt!(borrow(f, "f"));
        let norm = lib!(NormSpec::lp(p.max(1.0), f.0.d()));
        let rep = lib!(metric_stable_functional(
            &f.0,
            p,
            &MetricSpec::from_norm(norm)
        ));
        attempt!(put(out, comparison_from(&rep), "out"));
        HcStatus::Ok
    })
}

/// Distance callback: `(u, v, d, ctx) -> distance`, where `u` and `v` point
/// to `d` doubles each. Must be a genuine metric; registration spot-checks
/// symmetry, zero self-distance, non-negativity, and finiteness on random
/// pairs and rejects offenders.
pub type HcMetricFn =
    Option<unsafe extern "C" fn(*const f64, *const f64, usize, *mut c_void) -> f64>;

struct CallbackMetric {
    call: unsafe extern "C" fn(*const f64, *const f64, usize, *mut c_void) -> f64,
    ctx: *mut c_void,
}

// The callback is invoked only from the thread that entered the FFI call;
// the bounds are demanded by the library's shared-metric plumbing.
unsafe impl Send for CallbackMetric {}
unsafe impl Sync for CallbackMetric {}

impl CallbackMetric {
    /// # Safety
    /// Caller contract of [`hc_stable_type_callback`]: the function pointer
    /// must be callable with `ctx` and the two value buffers.
    unsafe fn dist(&self, u: &[f64], v: &[f64]) -> f64 {
        (self.call)(u.as_ptr(), v.as_ptr(), u.len(), self.ctx)
    }
}

/// Weak-norm stable-type comparison under a caller-supplied metric.
///
/// # Safety
/// `f` must be a live handle; `dist` must be callable with `ctx` for the
/// duration of this call and behave as documented for [`HcMetricFn`];
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_stable_type_callback(
    f: *const HcFunction,
    p: f64,
    dist: HcMetricFn,
    ctx: *mut c_void,
    out: *mut HcComparison,
) -> HcStatus {
    guarded(|| {
        let f = attempt!(borrow(f, "f"));
        let Some(call) = dist else {
            set_error("dist must not be null".to_string());
            return HcStatus::NullPointer;
        };
        let cb = CallbackMetric { call, ctx };
        let d = f.0.d();
        let spec = lib!(MetricSpec::callback(
            d,
            Arc::new(move |u: &[f64], v: &[f64]| unsafe { cb.dist(u, v) }),
        ));
        let rep = lib!(metric_stable_functional(&f.0, p, &spec));
        attempt!(put(out, comparison_from(&rep), "out"));
        HcStatus::Ok
    })
}

// ===========================================================================
// Antipodal search
// ===========================================================================

/// Searches the `skeleton`-dimensional faces of the solid cube for a point
/// where the multilinear extension agrees with its antipode, up to `tol` in
/// the max norm. Requires `f`'s range dimension to be at most `skeleton`
/// and `skeleton < n`.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_antipodal_search(
    f: *const HcFunction,
    skeleton: usize,
    tol: f64,
    seed: u64,
    out: *mut *mut HcWitness,
) -> HcStatus {
    guarded(|| {
        let f = attempt!(borrow(f, "f"));
        let table = walsh_transform(&f.0);
        let opts = SearchOpts {
            tol,
            seed,
            ..SearchOpts::default()
        };
        let w = lib!(find_antipodal_zero(&table, skeleton, &opts));
        attempt!(put(out, Box::into_raw(Box::new(HcWitness(w))), "out"));
        HcStatus::Ok
    })
}

/// Releases a witness handle (null is ignored).
///
/// # Safety
/// `w` must be null or a pointer returned by [`hc_antipodal_search`], not
/// freed before.
#[no_mangle]
pub unsafe extern "C" fn hc_witness_free(w: *mut HcWitness) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Max-norm antipodal residual at the witness (NaN if `w` is null).
///
/// # Safety
/// `w` must be null or a live witness handle.
#[no_mangle]
pub unsafe extern "C" fn hc_witness_residual(w: *const HcWitness) -> f64 {
    w.as_ref().map_or(f64::NAN, |w| w.0.residual)
}

/// Number of faces the search visited (0 if `w` is null).
///
/// # Safety
/// `w` must be null or a live witness handle.
#[no_mangle]
pub unsafe extern "C" fn hc_witness_faces_examined(w: *const HcWitness) -> usize {
    w.as_ref().map_or(0, |w| w.0.faces_examined)
}

/// Copies the witness point (one coordinate per cube axis, `len == n`).
///
/// # Safety
/// `w` must be a live witness handle; `z` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hc_witness_point(
    w: *const HcWitness,
    z: *mut f64,
    len: usize,
) -> HcStatus {
    guarded(|| {
        let w = attempt!(borrow(w, "w"));
        attempt!(fill(z, len, &w.0.z, "z"));
        HcStatus::Ok
    })
}

/// Antipodal Poincare comparison restricted to the sub-cube the witness
/// pins, against the `2^{2p-1} (pi tp)^p` budget.
///
/// # Safety
/// `f` and `w` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_restricted_poincare(
    f: *const HcFunction,
    w: *const HcWitness,
    p: f64,
    tp: f64,
    out: *mut HcComparison,
) -> HcStatus {
    guarded(|| {
        let f = attempt!(borrow(f, "f"));
        let w = attempt!(borrow(w, "w"));
        let norm = lib!(NormSpec::lp(p, f.0.d()));
        let rep = lib!(restricted_poincare_check(&f.0, &w.0, p, &norm, tp));
        attempt!(put(out, comparison_from(&rep), "out"));
        HcStatus::Ok
    })
}

// ===========================================================================
// Embeddings
// ===========================================================================

/// Exact bi-Lipschitz scan of `f` from the (optionally weighted, optionally
/// snowflaked) Hamming cube into `l_p^d`. `weights` may be null for unit
/// weights, else `weights_len == n`; `theta` in (0, 1] snowflakes the cube
/// metric.
///
/// # Safety
/// `f` must be a live handle; `weights` must be null or hold `weights_len`
/// readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_distortion(
    f: *const HcFunction,
    weights: *const f64,
    weights_len: usize,
    theta: f64,
    p: f64,
    out: *mut HcDistortion,
) -> HcStatus {
    guarded(|| {
        let f = attempt!(borrow(f, "f"));
        let wv = if weights.is_null() {
            lib!(WeightVector::unit(f.0.n()))
        } else {
            let vals = attempt!(borrow_slice(weights, weights_len, "weights"));
            lib!(WeightVector::new(vals.to_vec()))
        };
        let metric = lib!(CubeMetric::new(wv, theta));
        let norm = lib!(NormSpec::lp(p, f.0.d()));
        let rep = lib!(distortion(&f.0, &metric, &norm));
        attempt!(put(
            out,
            HcDistortion {
                lip: rep.lip,
                colip: rep.colip,
                distortion: rep.distortion,
                argmax_x: rep.argmax.0,
                argmax_y: rep.argmax.1,
                argmin_x: rep.argmin.0,
                argmin_y: rep.argmin.1,
                pairs_scanned: rep.pairs_scanned,
            },
            "out"
        ));
        HcStatus::Ok
    })
}

/// `n * (largest edge displacement) / (smallest antipodal displacement)` in
/// `l_p^d`; +inf when some antipodal pair collapses.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_edge_antipodal_ratio(
    f: *const HcFunction,
    p: f64,
    out: *mut f64,
) -> HcStatus {
    guarded(|| {
        let f = attempt!(borrow(f, "f"));
        let norm = lib!(NormSpec::lp(p, f.0.d()));
        let v = lib!(edge_antipodal_ratio(&f.0, &norm));
        attempt!(put(out, v, "out"));
        HcStatus::Ok
    })
}

/// Baseline distortion lower bound `n / (2 pi tp min(n, d)^{1/p})`, clamped
/// to at least 1, for embeddings of the n-cube into any `tp`-type-p target
/// of dimension `d`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_lower_bound_main(
    n: usize,
    d: usize,
    p: f64,
    tp: f64,
    out: *mut f64,
) -> HcStatus {
    guarded(|| {
        let inputs = lib!(BoundInputs::new(n, d, p, tp));
        let v = lib!(lower_bound_main(&inputs));
        attempt!(put(out, v, "out"));
        HcStatus::Ok
    })
}
