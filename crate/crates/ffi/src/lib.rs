//! C ABI over `reduction-core`.
//!
//! Models are opaque heap handles created by [`reduction_model_new`] and
//! released with [`reduction_model_free`]. Every fallible call returns a
//! [`ReductionStatus`]; on failure the message is available from
//! [`reduction_last_error`] on the same thread until the next failing call.
//! Output buffers are caller-allocated and their lengths are checked.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use num_complex::Complex64;
use reduction_core::closedform::{simulate_path, state_vector, Filter, ModelKind};
use reduction_core::noise::{PathGrid, SeedPolicy};
use reduction_core::spectrum::{decompose, initial_moments, InitialState, Level, LudersDecomposition, Spectrum};
use reduction_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotNormalized = 4,
    BeyondCollapse = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionModelKind {
    Asymptotic = 0,
    FiniteTime = 1,
}

/// Initial energy statistics of a model.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ReductionMoments {
    pub energy: f64,
    pub variance: f64,
    pub entropy: f64,
    /// `1/V₀`, infinite for an energy eigenstate.
    pub reduction_time: f64,
}

/// Opaque model handle.
pub struct ReductionModel {
    spectrum: Spectrum,
    dec: LudersDecomposition,
    filter: Filter,
    model: ModelKind,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> ReductionStatus {
    match err {
        Error::DimensionMismatch { .. } | Error::GridMismatch(_) => ReductionStatus::DimensionMismatch,
        Error::NotNormalized { .. } => ReductionStatus::NotNormalized,
        Error::BeyondCollapse { .. } => ReductionStatus::BeyondCollapse,
        _ => ReductionStatus::InvalidArgument,
    }
}

struct Failure(ReductionStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ReductionStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ReductionStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside reduction-ffi".into());
            ReductionStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(ReductionStatus::NullPointer, format!("{what} is null"))
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, need: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len < need {
        return Err(Failure(
            ReductionStatus::BufferTooSmall,
            format!("{what} holds {len} values, {need} needed"),
        ));
    }
    if need == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, need))
}

unsafe fn model_ref<'a>(m: *const ReductionModel) -> Result<&'a ReductionModel, Failure> {
    m.as_ref().ok_or_else(|| null("model"))
}

/// Message of the last failing call on this thread, or null. Owned by the library.
#[no_mangle]
pub extern "C" fn reduction_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a model from level energies and multiplicities and an initial
/// state given as separate real and imaginary parts. `kind` is a
/// [`ReductionModelKind`] value; `horizon` is ignored for the asymptotic model.
///
/// # Safety
/// Array arguments must be valid for their stated lengths and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reduction_model_new(
    energies: *const f64,
    multiplicities: *const usize,
    n_levels: usize,
    psi_re: *const f64,
    psi_im: *const f64,
    dimension: usize,
    kind: u32,
    sigma: f64,
    horizon: f64,
    out: *mut *mut ReductionModel,
) -> ReductionStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let e = input(energies, n_levels, "energies")?;
        let m = input(multiplicities, n_levels, "multiplicities")?;
        let re = input(psi_re, dimension, "psi_re")?;
        let im = input(psi_im, dimension, "psi_im")?;
        let levels = e
            .iter()
            .zip(m)
            .map(|(&energy, &multiplicity)| Level { energy, multiplicity })
            .collect();
        let spectrum = Spectrum::new(levels)?;
        let amps = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let psi0 = InitialState::new(amps)?;
        let dec = decompose(&spectrum, &psi0)?;
        let model = match kind {
            k if k == ReductionModelKind::Asymptotic as u32 => ModelKind::asymptotic(sigma)?,
            k if k == ReductionModelKind::FiniteTime as u32 => ModelKind::finite_time(sigma, horizon)?,
            other => {
                return Err(Failure(
                    ReductionStatus::InvalidArgument,
                    format!("unknown model kind {other}"),
                ))
            }
        };
        let filter = Filter::new(model, &spectrum, dec.probabilities())?;
        *out = Box::into_raw(Box::new(ReductionModel {
            spectrum,
            dec,
            filter,
            model,
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`reduction_model_new`] and not have been freed. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn reduction_model_free(model: *mut ReductionModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn reduction_model_n_levels(model: *const ReductionModel) -> usize {
    model.as_ref().map_or(0, |m| m.spectrum.n_levels())
}

/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn reduction_model_dimension(model: *const ReductionModel) -> usize {
    model.as_ref().map_or(0, |m| m.spectrum.dimension())
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn reduction_model_moments(
    model: *const ReductionModel,
    out: *mut ReductionMoments,
) -> ReductionStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let mo = initial_moments(&m.dec, &m.spectrum);
        *out = ReductionMoments {
            energy: mo.energy,
            variance: mo.variance,
            entropy: mo.entropy,
            reduction_time: mo.reduction_time,
        };
        Ok(())
    })
}

/// Initial level probabilities `πᵢ`.
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn reduction_model_probabilities(
    model: *const ReductionModel,
    out: *mut f64,
    len: usize,
) -> ReductionStatus {
    guard(|| {
        let m = model_ref(model)?;
        let p = m.dec.probabilities();
        output(out, len, p.len(), "out")?.copy_from_slice(p);
        Ok(())
    })
}

/// Conditional level probabilities given `ξₜ = xi`.
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn reduction_conditional_probabilities(
    model: *const ReductionModel,
    xi: f64,
    t: f64,
    out: *mut f64,
    len: usize,
) -> ReductionStatus {
    guard(|| {
        let m = model_ref(model)?;
        let n = m.spectrum.n_levels();
        let out = output(out, len, n, "out")?;
        m.filter.probabilities_into(xi, t, out)?;
        Ok(())
    })
}

/// State `Σᵢ √pᵢ e^{−iEᵢt} |φᵢ⟩` split into real and imaginary parts.
///
/// # Safety
/// `probabilities` must hold `n_levels` values; the outputs `len` each.
#[no_mangle]
pub unsafe extern "C" fn reduction_state_vector(
    model: *const ReductionModel,
    probabilities: *const f64,
    n_levels: usize,
    t: f64,
    out_re: *mut f64,
    out_im: *mut f64,
    len: usize,
) -> ReductionStatus {
    guard(|| {
        let m = model_ref(model)?;
        let p = input(probabilities, n_levels, "probabilities")?;
        let psi = state_vector(p, &m.dec, &m.spectrum, t)?;
        let dim = m.spectrum.dimension();
        let re = output(out_re, len, dim, "out_re")?;
        let im = output(out_im, len, dim, "out_im")?;
        for (k, a) in psi.amplitudes.iter().enumerate() {
            re[k] = a.re;
            im[k] = a.im;
        }
        Ok(())
    })
}

/// Simulates path `path_index` of the ensemble seeded by `seed` on
/// `steps` intervals of `[0, t_end]`, writing `ξ`, `H` and `V` at all
/// `steps + 1` grid points. The finite-time model requires `t_end = T`.
///
/// # Safety
/// Each output must be valid for `len` writes; `terminal_level` may be null.
#[no_mangle]
pub unsafe extern "C" fn reduction_simulate_path(
    model: *const ReductionModel,
    t_end: f64,
    steps: usize,
    seed: u64,
    path_index: u64,
    out_xi: *mut f64,
    out_h: *mut f64,
    out_v: *mut f64,
    len: usize,
    terminal_level: *mut usize,
) -> ReductionStatus {
    guard(|| {
        let m = model_ref(model)?;
        let grid = PathGrid::new(t_end, steps)?;
        let need = grid.len();
        let xi = output(out_xi, len, need, "out_xi")?;
        let h = output(out_h, len, need, "out_h")?;
        let v = output(out_v, len, need, "out_v")?;
        let rec = simulate_path(&m.filter, &m.spectrum, &m.dec, grid, SeedPolicy::new(seed), path_index)?;
        xi.copy_from_slice(&rec.xi);
        h.copy_from_slice(&rec.h);
        v.copy_from_slice(&rec.v);
        if let Some(level) = terminal_level.as_mut() {
            *level = rec.terminal_level;
        }
        Ok(())
    })
}

/// Effective coupling `σₜ` of the model at time `t`.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn reduction_model_sigma_t(model: *const ReductionModel, t: f64) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.model.sigma_t(t))
}
