//! C ABI for the conditional stochastic dominance test library.
//!
//! Conventions:
//! - handles (`CsdConfig`, `CsdResult`) are opaque; create with `_new`,
//!   release with `_free`; they are not thread-safe to mutate concurrently
//! - every fallible call returns a [`CsdStatus`]; on failure a
//!   thread-local message is available via [`csdtest_last_error_message`]
//! - array arguments are `(pointer, length)` pairs of C doubles; the
//!   library copies what it needs and never retains the pointers

use std::cell::RefCell;
use std::ffi::{c_char, CString};

use csdtest::{
    CvMethod, ObservationPair, QMode, RefinedSpec, StatisticKind, TestConfig, TestOutcome,
};

/// Status code of an FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsdStatus {
    Ok = 0,
    /// A parameter violated its documented range or shape.
    InvalidArgument = 1,
    /// The problem size exceeds what the requested method supports.
    UnsupportedSize = 2,
    /// The computation itself failed (degenerate data, undefined statistic).
    ComputationError = 3,
    /// A required pointer was null.
    NullPointer = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &csdtest::Error) -> CsdStatus {
    set_error(&err.to_string());
    match err {
        csdtest::Error::InvalidParameter(_) | csdtest::Error::EmptyInput(_) => {
            CsdStatus::InvalidArgument
        }
        csdtest::Error::UnsupportedSize(_) => CsdStatus::UnsupportedSize,
        _ => CsdStatus::ComputationError,
    }
}

/// Message describing the most recent error on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn csdtest_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Opaque test configuration.
pub struct CsdConfig {
    alpha: f64,
    targets: Vec<f64>,
    statistic: StatisticKind,
    manual_q: Option<(usize, usize)>,
    cv_method: CvMethod,
    refined_r: Option<usize>,
    rdd_cutoff: Option<f64>,
}

/// Opaque result of a run.
pub struct CsdResult {
    outcome: TestOutcome,
}

/// Per-target summary returned by [`csdtest_result_target`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CsdTargetSummary {
    pub target: f64,
    pub q_y: usize,
    pub q_x: usize,
    pub statistic_value: f64,
    pub critical_value: f64,
    pub p_value: f64,
    /// 1 when the null is rejected at this target.
    pub reject: i32,
    /// The level this individual target was tested at.
    pub level: f64,
}

/// Creates a configuration testing at level `alpha`. Returns null when
/// `alpha` lies outside (0, 1). Add at least one target before running.
#[no_mangle]
pub extern "C" fn csdtest_config_new(alpha: f64) -> *mut CsdConfig {
    if !(alpha > 0.0 && alpha < 1.0) {
        set_error("alpha must lie in (0, 1)");
        return std::ptr::null_mut();
    }
    Box::into_raw(Box::new(CsdConfig {
        alpha,
        targets: Vec::new(),
        statistic: StatisticKind::Ks,
        manual_q: None,
        cv_method: CvMethod::ExactDp,
        refined_r: None,
        rdd_cutoff: None,
    }))
}

/// Releases a configuration.
///
/// # Safety
/// `config` must be a pointer from [`csdtest_config_new`] not yet freed,
/// or null (a no-op).
#[no_mangle]
pub unsafe extern "C" fn csdtest_config_free(config: *mut CsdConfig) {
    if !config.is_null() {
        drop(unsafe { Box::from_raw(config) });
    }
}

macro_rules! config_mut {
    ($ptr:expr) => {
        match unsafe { $ptr.as_mut() } {
            Some(c) => c,
            None => {
                set_error("null configuration handle");
                return CsdStatus::NullPointer;
            }
        }
    };
}

/// Adds a target covariate point.
///
/// # Safety
/// `config` must be a live pointer from [`csdtest_config_new`].
#[no_mangle]
pub unsafe extern "C" fn csdtest_config_add_target(
    config: *mut CsdConfig,
    z0: f64,
) -> CsdStatus {
    let cfg = config_mut!(config);
    if !z0.is_finite() {
        set_error("target must be finite");
        return CsdStatus::InvalidArgument;
    }
    cfg.targets.push(z0);
    CsdStatus::Ok
}

/// Chooses the statistic: 0 = KS (default), 1 = CvM, 2 = AD.
///
/// # Safety
/// `config` must be a live pointer from [`csdtest_config_new`].
#[no_mangle]
pub unsafe extern "C" fn csdtest_config_set_statistic(
    config: *mut CsdConfig,
    kind: i32,
) -> CsdStatus {
    let cfg = config_mut!(config);
    cfg.statistic = match kind {
        0 => StatisticKind::Ks,
        1 => StatisticKind::Cvm,
        2 => StatisticKind::Ad,
        _ => {
            set_error("statistic must be 0 (KS), 1 (CvM), or 2 (AD)");
            return CsdStatus::InvalidArgument;
        }
    };
    CsdStatus::Ok
}

/// Fixes the effective sample sizes instead of the data-dependent rule.
///
/// # Safety
/// `config` must be a live pointer from [`csdtest_config_new`].
#[no_mangle]
pub unsafe extern "C" fn csdtest_config_set_manual_q(
    config: *mut CsdConfig,
    q_y: usize,
    q_x: usize,
) -> CsdStatus {
    let cfg = config_mut!(config);
    if q_y == 0 || q_x == 0 {
        set_error("effective sample sizes must be at least 1");
        return CsdStatus::InvalidArgument;
    }
    cfg.manual_q = Some((q_y, q_x));
    CsdStatus::Ok
}

/// Switches critical values to Monte Carlo with the given draw count and
/// seed (the default is the exact engine).
///
/// # Safety
/// `config` must be a live pointer from [`csdtest_config_new`].
#[no_mangle]
pub unsafe extern "C" fn csdtest_config_set_mc_critical_values(
    config: *mut CsdConfig,
    draws: u64,
    seed: u64,
) -> CsdStatus {
    let cfg = config_mut!(config);
    if draws == 0 {
        set_error("draws must be at least 1");
        return CsdStatus::InvalidArgument;
    }
    cfg.cv_method = CvMethod::MonteCarlo { draws, seed };
    CsdStatus::Ok
}

/// Enables the refined critical value for outcomes with at most `r`
/// support points (KS statistic only).
///
/// # Safety
/// `config` must be a live pointer from [`csdtest_config_new`].
#[no_mangle]
pub unsafe extern "C" fn csdtest_config_set_refined(
    config: *mut CsdConfig,
    r: usize,
) -> CsdStatus {
    let cfg = config_mut!(config);
    if r == 0 {
        set_error("support size r must be at least 1");
        return CsdStatus::InvalidArgument;
    }
    cfg.refined_r = Some(r);
    CsdStatus::Ok
}

/// Configures a sharp regression discontinuity cutoff for
/// [`csdtest_run_rdd`].
///
/// # Safety
/// `config` must be a live pointer from [`csdtest_config_new`].
#[no_mangle]
pub unsafe extern "C" fn csdtest_config_set_rdd_cutoff(
    config: *mut CsdConfig,
    cutoff: f64,
) -> CsdStatus {
    let cfg = config_mut!(config);
    if !cutoff.is_finite() {
        set_error("cutoff must be finite");
        return CsdStatus::InvalidArgument;
    }
    cfg.rdd_cutoff = Some(cutoff);
    CsdStatus::Ok
}

fn build_config(cfg: &CsdConfig, targets: Vec<f64>) -> Result<TestConfig, csdtest::Error> {
    let mut config = TestConfig::new(cfg.alpha, targets)?;
    config.statistic = cfg.statistic;
    config.cv_method = cfg.cv_method;
    config.rdd_cutoff = cfg.rdd_cutoff;
    if let Some((q_y, q_x)) = cfg.manual_q {
        config.q_mode = QMode::Manual(vec![(q_y, q_x); config.targets.len()]);
    }
    if let Some(r) = cfg.refined_r {
        config.refined = Some(RefinedSpec::new(r));
    }
    Ok(config)
}

unsafe fn slice_pairs(
    w: *const f64,
    z: *const f64,
    n: usize,
) -> Option<Vec<ObservationPair>> {
    if n == 0 || w.is_null() || z.is_null() {
        return None;
    }
    let ws = unsafe { std::slice::from_raw_parts(w, n) };
    let zs = unsafe { std::slice::from_raw_parts(z, n) };
    Some(
        ws.iter()
            .zip(zs)
            .enumerate()
            .map(|(i, (&w, &z))| ObservationPair::new(w, z, i))
            .collect(),
    )
}

/// Runs the two-sample test. `y_w[i]` pairs with `y_z[i]` and likewise for
/// the X side. On success `*out` owns a result handle.
///
/// # Safety
/// `config` must be a live configuration handle; `y_w`/`y_z` must point to
/// `n_y` readable doubles and `x_w`/`x_z` to `n_x`; `out` must be a valid
/// destination pointer.
#[no_mangle]
pub unsafe extern "C" fn csdtest_run(
    config: *const CsdConfig,
    y_w: *const f64,
    y_z: *const f64,
    n_y: usize,
    x_w: *const f64,
    x_z: *const f64,
    n_x: usize,
    out: *mut *mut CsdResult,
) -> CsdStatus {
    let Some(cfg) = (unsafe { config.as_ref() }) else {
        set_error("null configuration handle");
        return CsdStatus::NullPointer;
    };
    if out.is_null() {
        set_error("null output handle");
        return CsdStatus::NullPointer;
    }
    let Some(ysample) = (unsafe { slice_pairs(y_w, y_z, n_y) }) else {
        set_error("Y sample is empty or null");
        return CsdStatus::InvalidArgument;
    };
    let Some(xsample) = (unsafe { slice_pairs(x_w, x_z, n_x) }) else {
        set_error("X sample is empty or null");
        return CsdStatus::InvalidArgument;
    };
    let config = match build_config(cfg, cfg.targets.clone()) {
        Ok(c) => c,
        Err(e) => return status_of(&e),
    };
    match csdtest::run_multi_target(&ysample, &xsample, &config) {
        Ok(outcome) => {
            unsafe { *out = Box::into_raw(Box::new(CsdResult { outcome })) };
            CsdStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Runs the sharp regression discontinuity test on a pooled sample,
/// splitting at the configured cutoff and testing dominance there.
///
/// # Safety
/// As for [`csdtest_run`], with `w`/`z` pointing to `n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn csdtest_run_rdd(
    config: *const CsdConfig,
    w: *const f64,
    z: *const f64,
    n: usize,
    out: *mut *mut CsdResult,
) -> CsdStatus {
    let Some(cfg) = (unsafe { config.as_ref() }) else {
        set_error("null configuration handle");
        return CsdStatus::NullPointer;
    };
    if out.is_null() {
        set_error("null output handle");
        return CsdStatus::NullPointer;
    }
    if cfg.rdd_cutoff.is_none() {
        set_error("set an rdd cutoff before calling csdtest_run_rdd");
        return CsdStatus::InvalidArgument;
    }
    let Some(sample) = (unsafe { slice_pairs(w, z, n) }) else {
        set_error("sample is empty or null");
        return CsdStatus::InvalidArgument;
    };
    let targets = if cfg.targets.is_empty() {
        vec![cfg.rdd_cutoff.expect("checked above")]
    } else {
        cfg.targets.clone()
    };
    let config = match build_config(cfg, targets) {
        Ok(c) => c,
        Err(e) => return status_of(&e),
    };
    match csdtest::run_rdd(&sample, &config) {
        Ok(outcome) => {
            unsafe { *out = Box::into_raw(Box::new(CsdResult { outcome })) };
            CsdStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Releases a result handle.
///
/// # Safety
/// `result` must come from a successful run and not be freed twice; null
/// is a no-op.
#[no_mangle]
pub unsafe extern "C" fn csdtest_result_free(result: *mut CsdResult) {
    if !result.is_null() {
        drop(unsafe { Box::from_raw(result) });
    }
}

/// Number of per-target entries in the result.
///
/// # Safety
/// `result` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn csdtest_result_num_targets(result: *const CsdResult) -> usize {
    unsafe { result.as_ref() }.map_or(0, |r| r.outcome.per_target.len())
}

/// 1 when any target rejects, else 0.
///
/// # Safety
/// `result` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn csdtest_result_overall_reject(result: *const CsdResult) -> i32 {
    unsafe { result.as_ref() }.map_or(0, |r| r.outcome.overall_reject as i32)
}

/// Copies the summary of target `index` into `*out`.
///
/// # Safety
/// `result` must be a live result handle and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn csdtest_result_target(
    result: *const CsdResult,
    index: usize,
    out: *mut CsdTargetSummary,
) -> CsdStatus {
    let Some(res) = (unsafe { result.as_ref() }) else {
        set_error("null result handle");
        return CsdStatus::NullPointer;
    };
    if out.is_null() {
        set_error("null output pointer");
        return CsdStatus::NullPointer;
    }
    let Some(t) = res.outcome.per_target.get(index) else {
        set_error("target index out of range");
        return CsdStatus::InvalidArgument;
    };
    unsafe {
        *out = CsdTargetSummary {
            target: t.target,
            q_y: t.q_y,
            q_x: t.q_x,
            statistic_value: t.statistic_value,
            critical_value: t.critical_value,
            p_value: t.p_value,
            reject: t.reject as i32,
            level: t.per_target_level,
        };
    }
    CsdStatus::Ok
}

/// Exact data-independent critical value for the KS statistic.
///
/// # Safety
/// `out` must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn csdtest_critical_value(
    q_y: usize,
    q_x: usize,
    alpha: f64,
    out: *mut f64,
) -> CsdStatus {
    if out.is_null() {
        set_error("null output pointer");
        return CsdStatus::NullPointer;
    }
    match csdtest::ExactNull::new(q_y, q_x).and_then(|e| e.critical_value(alpha)) {
        Ok(c) => {
            unsafe { *out = c };
            CsdStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Limiting critical value of the scaled statistic, `sqrt(-ln(alpha)/2)`.
///
/// # Safety
/// `out` must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn csdtest_limiting_critical_value(
    alpha: f64,
    out: *mut f64,
) -> CsdStatus {
    if out.is_null() {
        set_error("null output pointer");
        return CsdStatus::NullPointer;
    }
    match csdtest::limiting_critical_value(alpha) {
        Ok(c) => {
            unsafe { *out = c };
            CsdStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Data-dependent effective sample size for one sample at a target point.
///
/// # Safety
/// `w` and `z` must point to `n` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn csdtest_tune(
    w: *const f64,
    z: *const f64,
    n: usize,
    z0: f64,
    out: *mut usize,
) -> CsdStatus {
    if out.is_null() {
        set_error("null output pointer");
        return CsdStatus::NullPointer;
    }
    let Some(sample) = (unsafe { slice_pairs(w, z, n) }) else {
        set_error("sample is empty or null");
        return CsdStatus::InvalidArgument;
    };
    match csdtest::estimate_moments(&sample).and_then(|t| csdtest::rule_of_thumb_q(&t, z0)) {
        Ok(q) => {
            unsafe { *out = q };
            CsdStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn end_to_end_through_the_c_surface() {
        let cfg = csdtest_config_new(0.25);
        assert!(!cfg.is_null());
        unsafe {
            assert_eq!(csdtest_config_add_target(cfg, 0.5), CsdStatus::Ok);
            assert_eq!(csdtest_config_set_manual_q(cfg, 2, 2), CsdStatus::Ok);

            let y_w = [1.0, 3.0];
            let y_z = [0.49, 0.51];
            let x_w = [2.0, 4.0];
            let x_z = [0.48, 0.52];
            let mut result: *mut CsdResult = std::ptr::null_mut();
            let status = csdtest_run(
                cfg,
                y_w.as_ptr(),
                y_z.as_ptr(),
                2,
                x_w.as_ptr(),
                x_z.as_ptr(),
                2,
                &mut result,
            );
            assert_eq!(status, CsdStatus::Ok);
            assert_eq!(csdtest_result_num_targets(result), 1);
            let mut summary = CsdTargetSummary {
                target: 0.0,
                q_y: 0,
                q_x: 0,
                statistic_value: 0.0,
                critical_value: 0.0,
                p_value: 0.0,
                reject: 0,
                level: 0.0,
            };
            assert_eq!(csdtest_result_target(result, 0, &mut summary), CsdStatus::Ok);
            assert_eq!(summary.statistic_value, 0.5);
            assert_eq!(summary.critical_value, 0.5);
            assert_eq!(summary.reject, 0);
            csdtest_result_free(result);
            csdtest_config_free(cfg);
        }
    }

    #[test]
    fn errors_surface_with_messages() {
        unsafe {
            let mut out = 0.0f64;
            let status = csdtest_critical_value(5000, 5000, 0.05, &mut out);
            assert_eq!(status, CsdStatus::UnsupportedSize);
            let msg = std::ffi::CStr::from_ptr(csdtest_last_error_message());
            assert!(msg.to_str().unwrap().contains("Monte Carlo"));

            assert_eq!(
                csdtest_limiting_critical_value(1.5, &mut out),
                CsdStatus::InvalidArgument
            );
            assert!(csdtest_config_new(2.0).is_null());
        }
    }

    #[test]
    fn null_handles_are_rejected() {
        unsafe {
            assert_eq!(
                csdtest_config_add_target(std::ptr::null_mut(), 0.5),
                CsdStatus::NullPointer
            );
            assert_eq!(
                csdtest_limiting_critical_value(0.05, std::ptr::null_mut()),
                CsdStatus::NullPointer
            );
            csdtest_result_free(std::ptr::null_mut());
            csdtest_config_free(std::ptr::null_mut());
        }
    }

    #[test]
    fn rdd_through_the_c_surface() {
        let cfg = csdtest_config_new(0.1);
        unsafe {
            assert_eq!(csdtest_config_set_rdd_cutoff(cfg, 0.0), CsdStatus::Ok);
            assert_eq!(csdtest_config_set_manual_q(cfg, 5, 5), CsdStatus::Ok);
            let n: usize = 40;
            let w: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let z: Vec<f64> = (0..n)
                .map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / n as f64)
                .collect();
            let mut result: *mut CsdResult = std::ptr::null_mut();
            let status = csdtest_run_rdd(cfg, w.as_ptr(), z.as_ptr(), n, &mut result);
            assert_eq!(status, CsdStatus::Ok);
            assert_eq!(csdtest_result_num_targets(result), 1);
            csdtest_result_free(result);
            csdtest_config_free(cfg);
        }
    }
}
