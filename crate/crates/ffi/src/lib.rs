//! C ABI for the analysis and diagnostics routines.
//!
//! Conventions: every function returns an `OPTBENCH_*` status code and
//! writes results through out-pointers; loaded results files live behind an
//! opaque handle freed by [`optbench_results_free`]. The matching header is
//! `include/optbench.h` (kept in sync by hand; a test guards the symbol
//! list). Strings returned by the API are borrowed from the handle and stay
//! valid until it is freed.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use optbench::analysis::{detect_bocb, hyper_variation, stability_stats, VariationMode};
use optbench::diagnostics::{entropy, esd, pca_topk_ratio, pl_alpha};
use optbench::error::Error;
use optbench::harness::{best_per_pair, read_jsonl, ResultMatrix};
use optbench::math::{quantile, sym_eigenvalues, Tensor};

pub const OPTBENCH_OK: i32 = 0;
pub const OPTBENCH_EINVAL: i32 = 1;
pub const OPTBENCH_EFORMAT: i32 = 2;
pub const OPTBENCH_EIO: i32 = 3;
pub const OPTBENCH_ESPECTRUM: i32 = 4;
pub const OPTBENCH_ENOTFOUND: i32 = 5;
pub const OPTBENCH_EPANIC: i32 = 6;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn code_for(e: &Error) -> i32 {
    match e {
        Error::Io(_) => OPTBENCH_EIO,
        Error::Format(_) | Error::Json(_) => OPTBENCH_EFORMAT,
        Error::InsufficientSpectrum(_) => OPTBENCH_ESPECTRUM,
        _ => OPTBENCH_EINVAL,
    }
}

fn guard(f: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            OPTBENCH_EPANIC
        }
    }
}

/// Message for the most recent error on this thread; empty when none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn optbench_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

unsafe fn slice_arg<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if ptr.is_null() && len > 0 {
        None
    } else if len == 0 {
        Some(&[])
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

/// Type-7 sample quantile of `values[0..len]` at fraction `q`.
///
/// # Safety
/// `values` must point to `len` readable f64s and `out` to a writable f64.
#[no_mangle]
pub unsafe extern "C" fn optbench_quantile(
    values: *const f64,
    len: usize,
    q: f64,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let Some(vals) = slice_arg(values, len) else {
            set_error("null values pointer");
            return OPTBENCH_EINVAL;
        };
        if out.is_null() {
            set_error("null out pointer");
            return OPTBENCH_EINVAL;
        }
        match quantile(vals, q) {
            Ok(v) => {
                *out = v;
                OPTBENCH_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                code_for(&e)
            }
        }
    })
}

/// Failure detection on one result column: flags[i] = 1 when values[i] falls
/// below max - min(IQR, gamma). `flags` must hold `len` bytes.
///
/// # Safety
/// Pointer arguments must reference buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn optbench_detect_bocb(
    values: *const f64,
    len: usize,
    gamma: f64,
    flags: *mut u8,
    threshold_out: *mut f64,
) -> i32 {
    guard(|| {
        let Some(vals) = slice_arg(values, len) else {
            set_error("null values pointer");
            return OPTBENCH_EINVAL;
        };
        if flags.is_null() || threshold_out.is_null() {
            set_error("null out pointer");
            return OPTBENCH_EINVAL;
        }
        match detect_bocb(vals, gamma) {
            Ok(col) => {
                let out = std::slice::from_raw_parts_mut(flags, len);
                out.fill(0);
                for &i in &col.flagged {
                    out[i] = 1;
                }
                *threshold_out = col.threshold;
                OPTBENCH_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                code_for(&e)
            }
        }
    })
}

/// Worst-removed mean / population std / range.
///
/// # Safety
/// Pointer arguments must reference buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn optbench_stability_stats(
    values: *const f64,
    len: usize,
    mean_out: *mut f64,
    std_out: *mut f64,
    range_out: *mut f64,
) -> i32 {
    guard(|| {
        let Some(vals) = slice_arg(values, len) else {
            set_error("null values pointer");
            return OPTBENCH_EINVAL;
        };
        if mean_out.is_null() || std_out.is_null() || range_out.is_null() {
            set_error("null out pointer");
            return OPTBENCH_EINVAL;
        }
        match stability_stats(vals) {
            Ok(s) => {
                *mean_out = s.mean;
                *std_out = s.std;
                *range_out = s.range;
                OPTBENCH_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                code_for(&e)
            }
        }
    })
}

/// Variation of optimal (lr, wd) pairs from their grid modes.
/// `mode`: 0 = one-hot Manhattan, 1 = ordinal index distance.
///
/// # Safety
/// Pointer arguments must reference buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn optbench_hyper_variation(
    lrs: *const f64,
    wds: *const f64,
    n: usize,
    lr_grid: *const f64,
    lr_grid_len: usize,
    wd_grid: *const f64,
    wd_grid_len: usize,
    mode: i32,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let (Some(lrs), Some(wds), Some(lg), Some(wg)) = (
            slice_arg(lrs, n),
            slice_arg(wds, n),
            slice_arg(lr_grid, lr_grid_len),
            slice_arg(wd_grid, wd_grid_len),
        ) else {
            set_error("null pointer argument");
            return OPTBENCH_EINVAL;
        };
        if out.is_null() {
            set_error("null out pointer");
            return OPTBENCH_EINVAL;
        }
        let mode = match mode {
            0 => VariationMode::Onehot,
            1 => VariationMode::Ordinal,
            _ => {
                set_error("mode must be 0 (onehot) or 1 (ordinal)");
                return OPTBENCH_EINVAL;
            }
        };
        let optima: Vec<(f64, f64)> = lrs.iter().cloned().zip(wds.iter().cloned()).collect();
        match hyper_variation(&optima, lg, wg, mode) {
            Ok(v) => {
                *out = v;
                OPTBENCH_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                code_for(&e)
            }
        }
    })
}

/// Histogram entropy (natural log) with `bins` equal-width bins.
///
/// # Safety
/// Pointer arguments must reference buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn optbench_entropy(
    values: *const f64,
    len: usize,
    bins: usize,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let Some(vals) = slice_arg(values, len) else {
            set_error("null values pointer");
            return OPTBENCH_EINVAL;
        };
        if out.is_null() {
            set_error("null out pointer");
            return OPTBENCH_EINVAL;
        }
        let run = || -> optbench::Result<f64> {
            let tensor = Tensor::from_vec(&[vals.len()], vals.to_vec())?;
            entropy(&tensor, bins)
        };
        match run() {
            Ok(h) => {
                *out = h;
                OPTBENCH_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                code_for(&e)
            }
        }
    })
}

/// Euclidean norm of a value buffer.
///
/// # Safety
/// Pointer arguments must reference buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn optbench_l2_norm(values: *const f64, len: usize, out: *mut f64) -> i32 {
    guard(|| {
        let Some(vals) = slice_arg(values, len) else {
            set_error("null values pointer");
            return OPTBENCH_EINVAL;
        };
        if out.is_null() {
            set_error("null out pointer");
            return OPTBENCH_EINVAL;
        }
        *out = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
        OPTBENCH_OK
    })
}

/// All eigenvalues (descending) of a symmetric `n x n` matrix in row-major
/// order; `out` must hold `n` f64s.
///
/// # Safety
/// Pointer arguments must reference buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn optbench_sym_eigenvalues(
    matrix: *const f64,
    n: usize,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let Some(vals) = slice_arg(matrix, n * n) else {
            set_error("null matrix pointer");
            return OPTBENCH_EINVAL;
        };
        if out.is_null() {
            set_error("null out pointer");
            return OPTBENCH_EINVAL;
        }
        let run = || -> optbench::Result<Vec<f64>> {
            let t = Tensor::from_vec(&[n, n], vals.to_vec())?;
            sym_eigenvalues(&t)
        };
        match run() {
            Ok(eig) => {
                std::slice::from_raw_parts_mut(out, n).copy_from_slice(&eig);
                OPTBENCH_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                code_for(&e)
            }
        }
    })
}

/// Power-law tail fit of the Gram spectrum of a `rows x cols` weight matrix.
///
/// # Safety
/// Pointer arguments must reference buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn optbench_pl_alpha(
    matrix: *const f64,
    rows: usize,
    cols: usize,
    alpha_out: *mut f64,
    xmin_out: *mut f64,
) -> i32 {
    guard(|| {
        let Some(vals) = slice_arg(matrix, rows * cols) else {
            set_error("null matrix pointer");
            return OPTBENCH_EINVAL;
        };
        if alpha_out.is_null() || xmin_out.is_null() {
            set_error("null out pointer");
            return OPTBENCH_EINVAL;
        }
        let run = || -> optbench::Result<(f64, f64)> {
            let t = Tensor::from_vec(&[rows, cols], vals.to_vec())?;
            let spectrum = esd(&t)?;
            pl_alpha(&spectrum)
        };
        match run() {
            Ok((alpha, xmin)) => {
                *alpha_out = alpha;
                *xmin_out = xmin;
                OPTBENCH_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                code_for(&e)
            }
        }
    })
}

/// Top-k spectral energy ratio of a `rows x cols` weight matrix.
///
/// # Safety
/// Pointer arguments must reference buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn optbench_pca_topk(
    matrix: *const f64,
    rows: usize,
    cols: usize,
    k: usize,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let Some(vals) = slice_arg(matrix, rows * cols) else {
            set_error("null matrix pointer");
            return OPTBENCH_EINVAL;
        };
        if out.is_null() {
            set_error("null out pointer");
            return OPTBENCH_EINVAL;
        }
        let run = || -> optbench::Result<f64> {
            let t = Tensor::from_vec(&[rows, cols], vals.to_vec())?;
            let spectrum = esd(&t)?;
            Ok(pca_topk_ratio(&spectrum, k)?.ratio)
        };
        match run() {
            Ok(r) => {
                *out = r;
                OPTBENCH_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                code_for(&e)
            }
        }
    })
}

/// Opaque handle over a loaded results file, collapsed to the per-pair
/// best-accuracy matrix.
pub struct OptbenchResults {
    matrix: ResultMatrix,
    model_names: Vec<CString>,
    optimizer_names: Vec<CString>,
}

/// Load a results JSONL file produced by `optbench bench`.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` a writable pointer slot.
/// The handle must be released with [`optbench_results_free`].
#[no_mangle]
pub unsafe extern "C" fn optbench_results_load(
    path: *const c_char,
    out: *mut *mut OptbenchResults,
) -> i32 {
    guard(|| {
        if path.is_null() || out.is_null() {
            set_error("null pointer argument");
            return OPTBENCH_EINVAL;
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            set_error("path is not valid UTF-8");
            return OPTBENCH_EINVAL;
        };
        match read_jsonl(Path::new(path)) {
            Ok(records) => {
                let matrix = best_per_pair(&records);
                let model_names = matrix
                    .models
                    .iter()
                    .map(|m| CString::new(m.as_str()).unwrap_or_default())
                    .collect();
                let optimizer_names = matrix
                    .optimizers
                    .iter()
                    .map(|o| CString::new(o.as_str()).unwrap_or_default())
                    .collect();
                let handle = Box::new(OptbenchResults {
                    matrix,
                    model_names,
                    optimizer_names,
                });
                *out = Box::into_raw(handle);
                OPTBENCH_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                code_for(&e)
            }
        }
    })
}

/// # Safety
/// `handle` must come from [`optbench_results_load`] and not be used after.
#[no_mangle]
pub unsafe extern "C" fn optbench_results_free(handle: *mut OptbenchResults) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be a live handle from [`optbench_results_load`].
#[no_mangle]
pub unsafe extern "C" fn optbench_results_num_models(handle: *const OptbenchResults) -> usize {
    if handle.is_null() {
        return 0;
    }
    (*handle).matrix.models.len()
}

/// # Safety
/// `handle` must be a live handle from [`optbench_results_load`].
#[no_mangle]
pub unsafe extern "C" fn optbench_results_num_optimizers(
    handle: *const OptbenchResults,
) -> usize {
    if handle.is_null() {
        return 0;
    }
    (*handle).matrix.optimizers.len()
}

/// Borrowed model name; valid until the handle is freed. Null for a bad index.
///
/// # Safety
/// `handle` must be a live handle from [`optbench_results_load`].
#[no_mangle]
pub unsafe extern "C" fn optbench_results_model_name(
    handle: *const OptbenchResults,
    index: usize,
) -> *const c_char {
    if handle.is_null() {
        return std::ptr::null();
    }
    match (&(*handle).model_names).get(index) {
        Some(s) => s.as_ptr(),
        None => std::ptr::null(),
    }
}

/// Borrowed optimizer name; valid until the handle is freed.
///
/// # Safety
/// `handle` must be a live handle from [`optbench_results_load`].
#[no_mangle]
pub unsafe extern "C" fn optbench_results_optimizer_name(
    handle: *const OptbenchResults,
    index: usize,
) -> *const c_char {
    if handle.is_null() {
        return std::ptr::null();
    }
    match (&(*handle).optimizer_names).get(index) {
        Some(s) => s.as_ptr(),
        None => std::ptr::null(),
    }
}

/// Best cell for (optimizer index, model index): seed-mean best accuracy and
/// the winning lr/wd. Returns OPTBENCH_ENOTFOUND for an empty cell.
///
/// # Safety
/// Pointer arguments must reference buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn optbench_results_cell(
    handle: *const OptbenchResults,
    optimizer_index: usize,
    model_index: usize,
    acc_out: *mut f64,
    lr_out: *mut f64,
    wd_out: *mut f64,
) -> i32 {
    guard(|| {
        if handle.is_null() || acc_out.is_null() || lr_out.is_null() || wd_out.is_null() {
            set_error("null pointer argument");
            return OPTBENCH_EINVAL;
        }
        let m = &(*handle).matrix;
        if optimizer_index >= m.optimizers.len() || model_index >= m.models.len() {
            set_error("index out of range");
            return OPTBENCH_EINVAL;
        }
        match &m.cells[optimizer_index][model_index] {
            Some(cell) => {
                *acc_out = cell.mean_best_acc;
                *lr_out = cell.lr;
                *wd_out = cell.wd;
                OPTBENCH_OK
            }
            None => {
                set_error("empty cell");
                OPTBENCH_ENOTFOUND
            }
        }
    })
}
