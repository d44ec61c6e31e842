//! C ABI for `usf-core`.
//!
//! Every fallible function returns a [`UsfStatus`]; on failure the message
//! is available from [`usf_last_error`] on the same thread. Kernels and
//! spike trains are opaque handles owned by the caller and released with
//! their `_free` function. Panics never cross the boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use usf_core::front_end::{FoldedSignal, Mode};
use usf_core::itersis::{Basis, ItersisConfig};
use usf_core::kernels::{favard_constant, kernel_sup};
use usf_core::{KernelModel, SpikeTrain, Theorem1Params, UsfError};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UsfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numerical = 3,
    BufferTooSmall = 4,
    Internal = 5,
}

/// Opaque sampling kernel.
pub struct UsfKernel(KernelModel);

/// Opaque spike train.
pub struct UsfSpikeTrain(SpikeTrain);

/// Parameters of exact recovery. `spectral_count = 0` selects the default.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct UsfExactParams {
    pub k: usize,
    pub h: usize,
    pub zeta: f64,
    pub tv_norm: f64,
    pub spectral_count: usize,
}

/// Iterative solver settings. `sigma_stop <= 0` selects the bit-budget rule.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct UsfItersisParams {
    pub order: usize,
    pub fold_count: usize,
    pub spectral_count: usize,
    pub outer_max: usize,
    pub inner_max: usize,
    pub init_count: usize,
    pub sigma_stop: f64,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: UsfStatus, msg: impl Into<String>) -> UsfStatus {
    set_error(msg);
    status
}

fn from_core(e: UsfError) -> UsfStatus {
    let status = if e.is_numerical() { UsfStatus::Numerical } else { UsfStatus::InvalidInput };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), UsfStatus>) -> UsfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            UsfStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(UsfStatus::Internal, "internal panic"),
    }
}

unsafe fn input<'a, T>(p: *const T, n: usize, name: &str) -> Result<&'a [T], UsfStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(UsfStatus::NullPointer, format!("{name} is null")));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn output<'a, T>(p: *mut T, n: usize, name: &str) -> Result<&'a mut [T], UsfStatus> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(UsfStatus::NullPointer, format!("{name} is null")));
    }
    Ok(slice::from_raw_parts_mut(p, n))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, UsfStatus> {
    p.as_ref().ok_or_else(|| fail(UsfStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, UsfStatus> {
    p.as_mut().ok_or_else(|| fail(UsfStatus::NullPointer, format!("{name} is null")))
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn usf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Kernel `sum_n coeffs[n] beta^order(t/gamma - n)`.
#[no_mangle]
pub unsafe extern "C" fn usf_kernel_new(
    coeffs: *const f64,
    len: usize,
    gamma: f64,
    order: usize,
    out: *mut *mut UsfKernel,
) -> UsfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let c = input(coeffs, len, "coeffs")?.to_vec();
        let k = KernelModel::new(c, gamma, order).map_err(from_core)?;
        *out = Box::into_raw(Box::new(UsfKernel(k)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn usf_kernel_free(kernel: *mut UsfKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Evaluates the kernel shifted to start at `t = 0`.
#[no_mangle]
pub unsafe extern "C" fn usf_kernel_eval(kernel: *const UsfKernel, t: f64, out: *mut f64) -> UsfStatus {
    guard(|| {
        let k = handle(kernel, "kernel")?;
        *out_ptr(out, "out")? = k.0.causal_eval(t);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn usf_kernel_support_width(kernel: *const UsfKernel, out: *mut f64) -> UsfStatus {
    guard(|| {
        let k = handle(kernel, "kernel")?;
        *out_ptr(out, "out")? = k.0.support_width();
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn usf_favard_constant(order: usize) -> f64 {
    favard_constant(order)
}

/// Centered modulo `x` into `[-lambda, lambda)`; NaN when `lambda <= 0`.
#[no_mangle]
pub extern "C" fn usf_modulo_fold(x: f64, lambda: f64) -> f64 {
    if lambda > 0.0 {
        usf_core::modulo_fold(x, lambda)
    } else {
        f64::NAN
    }
}

#[no_mangle]
pub unsafe extern "C" fn usf_spikes_new(
    amplitudes: *const f64,
    delays: *const f64,
    len: usize,
    out: *mut *mut UsfSpikeTrain,
) -> UsfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let a = input(amplitudes, len, "amplitudes")?.to_vec();
        let d = input(delays, len, "delays")?.to_vec();
        let s = SpikeTrain::new(a, d).map_err(from_core)?;
        *out = Box::into_raw(Box::new(UsfSpikeTrain(s)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn usf_spikes_free(spikes: *mut UsfSpikeTrain) {
    if !spikes.is_null() {
        drop(Box::from_raw(spikes));
    }
}

/// Number of spikes; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn usf_spikes_count(spikes: *const UsfSpikeTrain) -> usize {
    spikes.as_ref().map_or(0, |s| s.0.count())
}

/// Copies amplitudes and delays into caller buffers of capacity `cap`.
#[no_mangle]
pub unsafe extern "C" fn usf_spikes_get(
    spikes: *const UsfSpikeTrain,
    amplitudes: *mut f64,
    delays: *mut f64,
    cap: usize,
) -> UsfStatus {
    guard(|| {
        let s = &handle(spikes, "spikes")?.0;
        let n = s.count();
        if cap < n {
            return Err(fail(UsfStatus::BufferTooSmall, format!("need {n} slots, got {cap}")));
        }
        output(amplitudes, n, "amplitudes")?.copy_from_slice(&s.amplitudes);
        output(delays, n, "delays")?.copy_from_slice(&s.delays);
        Ok(())
    })
}

/// Writes `count` samples `g(nT)` of the filtered spike train into `out`.
#[no_mangle]
pub unsafe extern "C" fn usf_synthesize(
    spikes: *const UsfSpikeTrain,
    kernel: *const UsfKernel,
    step: f64,
    count: usize,
    out: *mut f64,
) -> UsfStatus {
    guard(|| {
        let s = handle(spikes, "spikes")?;
        let k = handle(kernel, "kernel")?;
        let g = usf_core::synthesize(&s.0, &k.0, step, count).map_err(from_core)?;
        output(out, count, "out")?.copy_from_slice(&g.values);
        Ok(())
    })
}

fn folded(y: &[f64], step: f64, lambda: f64, bits: u32) -> FoldedSignal {
    FoldedSignal { values: y.to_vec(), step, lambda, bits, mode: Mode::Modulo, seed: 0 }
}

/// Exact recovery from unquantized folded samples.
#[no_mangle]
pub unsafe extern "C" fn usf_recover_exact(
    y: *const f64,
    len: usize,
    step: f64,
    lambda: f64,
    kernel: *const UsfKernel,
    params: *const UsfExactParams,
    out: *mut *mut UsfSpikeTrain,
) -> UsfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let k = &handle(kernel, "kernel")?.0;
        let p = *handle(params, "params")?;
        let y = folded(input(y, len, "y")?, step, lambda, 0);
        let params = Theorem1Params {
            k: p.k,
            order: k.order(),
            h: p.h,
            gamma: k.gamma(),
            lambda,
            zeta: p.zeta,
            tv_norm: p.tv_norm,
            kernel_sup: kernel_sup(k),
            window: y.window(),
            spectral_count: (p.spectral_count > 0).then_some(p.spectral_count),
        };
        let s = usf_core::recover_exact(&y, k, &params).map_err(from_core)?;
        *out = Box::into_raw(Box::new(UsfSpikeTrain(s)));
        Ok(())
    })
}

/// Iterative recovery from folded samples quantized to `bits` bits. When
/// `residue` is non-null it receives the `len - 1` recovered fold-correction
/// differences.
#[no_mangle]
pub unsafe extern "C" fn usf_itersis_recover(
    y: *const f64,
    len: usize,
    step: f64,
    lambda: f64,
    bits: u32,
    kernel: *const UsfKernel,
    params: *const UsfItersisParams,
    out: *mut *mut UsfSpikeTrain,
    residue: *mut f64,
) -> UsfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let k = &handle(kernel, "kernel")?.0;
        let p = *handle(params, "params")?;
        let y = folded(input(y, len, "y")?, step, lambda, bits);
        let cfg = ItersisConfig {
            outer_max: p.outer_max,
            inner_max: p.inner_max,
            init_count: p.init_count,
            sigma_stop: (p.sigma_stop > 0.0).then_some(p.sigma_stop),
            seed: p.seed,
            basis: Basis::PoleResidue,
            ..ItersisConfig::new(p.order, p.fold_count, p.spectral_count)
        };
        let res = usf_core::itersis_recover(&y, k, &cfg).map_err(from_core)?;
        if !residue.is_null() && len > 1 {
            output(residue, len - 1, "residue")?.copy_from_slice(&res.residue.to_sequence(len - 1));
        }
        *out = Box::into_raw(Box::new(UsfSpikeTrain(res.spikes)));
        Ok(())
    })
}
