//! C ABI for the `ewi-nls` solvers.
//!
//! A solver is an opaque `EwiSolver*` created by [`ewi_solver_new`] and
//! released with [`ewi_solver_free`]. Every fallible call returns an
//! [`EwiStatus`]; on failure [`ewi_last_error_message`] describes the cause.
//! Complex arrays are interleaved `re, im` doubles. Spectral coefficients are
//! ordered `l = -N/2 .. N/2-1`; nodal values are `x_0 .. x_{N-1}`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ewi_nls::experiments::{fit_order, InitialDatum};
use ewi_nls::integrators::DEFAULT_FS_OVERSAMPLE;
use ewi_nls::spectral::{dft, idft, sobolev_norm};
use ewi_nls::{
    initial_field, Error, GridField, Nonlinearity, PeriodicGrid, Potential, Propagator, Scheme, SchemeConfig,
    SolverState, SpectralField,
};
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BlowUp = 3,
    Domain = 4,
    NotImplemented = 5,
    Panic = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwiScheme {
    EwiFs = 0,
    EwiEfp = 1,
    EwiFp = 2,
    LieTrotter = 3,
    Strang = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwiPotentialKind {
    None = 0,
    /// `params[0]`.
    Constant = 1,
    /// Depth `params[0]` on `(params[1], params[2])`.
    Box = 2,
    /// `|x - centre|^params[0]`.
    Power = 3,
    /// Periodic linear interpolation of `potential_values`.
    Sampled = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwiNonlinearityKind {
    None = 0,
    /// `params[0] rho^params[1]`.
    Power = 1,
    /// `params[0] rho^params[1] + params[2] rho^params[3]`.
    TwoPower = 2,
    /// `params[0] rho^params[1] ln(rho)`.
    LogPower = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwiDatum {
    Type1H2 = 0,
    Type2Smooth = 1,
    H3Datum = 2,
}

/// Problem and discretization. `fs_oversample = 0` selects the default.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EwiConfig {
    pub scheme: EwiScheme,
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub tau: f64,
    pub t_final: f64,
    pub potential: EwiPotentialKind,
    pub potential_params: [f64; 3],
    pub potential_values: *const f64,
    pub potential_len: usize,
    pub nonlinearity: EwiNonlinearityKind,
    pub nonlinearity_params: [f64; 4],
    pub fs_oversample: usize,
}

/// Opaque solver handle.
pub struct EwiSolver {
    cfg: SchemeConfig,
    propagator: Propagator,
    state: SolverState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> EwiStatus {
    match err {
        Error::Config(_) | Error::Fit(_) => EwiStatus::InvalidArgument,
        Error::Domain(_) => EwiStatus::Domain,
        Error::NotImplemented(_) => EwiStatus::NotImplemented,
        Error::BlowUp { .. } => EwiStatus::BlowUp,
        _ => EwiStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (EwiStatus, String)>) -> EwiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EwiStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {msg}"));
            EwiStatus::Panic
        }
    }
}

fn fail(err: Error) -> (EwiStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (EwiStatus, String) {
    (EwiStatus::NullPointer, format!("null pointer: {what}"))
}

fn invalid(msg: impl Into<String>) -> (EwiStatus, String) {
    (EwiStatus::InvalidArgument, msg.into())
}

unsafe fn solver_mut<'a>(s: *mut EwiSolver) -> Result<&'a mut EwiSolver, (EwiStatus, String)> {
    s.as_mut().ok_or_else(|| null("solver"))
}

unsafe fn solver_ref<'a>(s: *const EwiSolver) -> Result<&'a EwiSolver, (EwiStatus, String)> {
    s.as_ref().ok_or_else(|| null("solver"))
}

unsafe fn complex_slice(data: *const f64, n: usize) -> Result<Vec<Complex64>, (EwiStatus, String)> {
    if data.is_null() {
        return Err(null("data"));
    }
    let raw = std::slice::from_raw_parts(data, 2 * n);
    Ok(raw.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect())
}

unsafe fn write_complex(values: &[Complex64], out: *mut f64, len: usize) -> Result<(), (EwiStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len != values.len() {
        return Err(invalid(format!("buffer holds {len} values, field has {}", values.len())));
    }
    let out = std::slice::from_raw_parts_mut(out, 2 * len);
    for (dst, v) in out.chunks_exact_mut(2).zip(values) {
        dst[0] = v.re;
        dst[1] = v.im;
    }
    Ok(())
}

unsafe fn scheme_config(c: &EwiConfig) -> Result<SchemeConfig, Error> {
    let scheme = match c.scheme {
        EwiScheme::EwiFs => Scheme::EwiFs,
        EwiScheme::EwiEfp => Scheme::EwiEfp,
        EwiScheme::EwiFp => Scheme::EwiFp,
        EwiScheme::LieTrotter => Scheme::LieTrotter,
        EwiScheme::Strang => Scheme::Strang,
    };
    let p = c.potential_params;
    let potential = match c.potential {
        EwiPotentialKind::None => Potential::None,
        EwiPotentialKind::Constant => Potential::Constant { value: p[0] },
        EwiPotentialKind::Box => Potential::Box {
            depth: p[0],
            left: p[1],
            right: p[2],
        },
        EwiPotentialKind::Power => Potential::Power { gamma: p[0] },
        EwiPotentialKind::Sampled => {
            if c.potential_values.is_null() {
                return Err(Error::Config("sampled potential without values".into()));
            }
            Potential::Sampled {
                values: std::slice::from_raw_parts(c.potential_values, c.potential_len).to_vec(),
            }
        }
    };
    let q = c.nonlinearity_params;
    let nonlinearity = match c.nonlinearity {
        EwiNonlinearityKind::None => Nonlinearity::None,
        EwiNonlinearityKind::Power => Nonlinearity::Power { lambda: q[0], sigma: q[1] },
        EwiNonlinearityKind::TwoPower => Nonlinearity::TwoPower {
            lambda1: q[0],
            sigma1: q[1],
            lambda2: q[2],
            sigma2: q[3],
        },
        EwiNonlinearityKind::LogPower => Nonlinearity::LogPower { lambda: q[0], sigma: q[1] },
    };
    potential.validate(c.a, c.b)?;
    nonlinearity.validate()?;
    let grid = PeriodicGrid::new(c.a, c.b, c.n)?;
    let oversample = if c.fs_oversample == 0 {
        DEFAULT_FS_OVERSAMPLE
    } else {
        c.fs_oversample
    };
    let cfg = SchemeConfig::new(scheme, grid, c.tau, c.t_final)
        .with_potential(potential)
        .with_nonlinearity(nonlinearity)
        .with_fs_oversample(oversample);
    cfg.steps()?;
    Ok(cfg)
}

/// Creates a solver with a zero initial field.
///
/// # Safety
/// `config` must point to a valid `EwiConfig`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ewi_solver_new(config: *const EwiConfig, out: *mut *mut EwiSolver) -> EwiStatus {
    guard(|| {
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = scheme_config(c).map_err(fail)?;
        let propagator = Propagator::new(&cfg).map_err(fail)?;
        let state = SolverState::new(SpectralField::zeros(cfg.grid));
        *out = Box::into_raw(Box::new(EwiSolver { cfg, propagator, state }));
        Ok(())
    })
}

/// Releases a solver. Null is accepted.
///
/// # Safety
/// `solver` must come from [`ewi_solver_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ewi_solver_free(solver: *mut EwiSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Loads a built-in initial datum and resets the clock.
///
/// # Safety
/// `solver` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ewi_solver_set_datum(solver: *mut EwiSolver, datum: EwiDatum) -> EwiStatus {
    guard(|| {
        let s = solver_mut(solver)?;
        let d = match datum {
            EwiDatum::Type1H2 => InitialDatum::Type1H2,
            EwiDatum::Type2Smooth => InitialDatum::Type2Smooth,
            EwiDatum::H3Datum => InitialDatum::H3Datum,
        };
        let (a, b) = (s.cfg.grid.a(), s.cfg.grid.b());
        let field = initial_field(s.cfg.scheme, &s.cfg.grid, |x| d.eval(x, a, b), s.cfg.fs_oversample)
            .map_err(fail)?;
        s.state = SolverState::new(field);
        Ok(())
    })
}

/// Loads `n` nodal values at `x_0 .. x_{n-1}` and resets the clock.
///
/// # Safety
/// `values` must hold `2 n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ewi_solver_set_nodal(solver: *mut EwiSolver, values: *const f64, n: usize) -> EwiStatus {
    guard(|| {
        let s = solver_mut(solver)?;
        if n != s.cfg.grid.n() {
            return Err(invalid(format!("expected {} values, got {n}", s.cfg.grid.n())));
        }
        let v = complex_slice(values, n)?;
        let field = GridField::new(s.cfg.grid, v).map_err(fail)?;
        s.state = SolverState::new(dft(&field));
        Ok(())
    })
}

/// Loads `n` spectral coefficients and resets the clock.
///
/// # Safety
/// `coeffs` must hold `2 n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ewi_solver_set_coeffs(solver: *mut EwiSolver, coeffs: *const f64, n: usize) -> EwiStatus {
    guard(|| {
        let s = solver_mut(solver)?;
        if n != s.cfg.grid.n() {
            return Err(invalid(format!("expected {} coefficients, got {n}", s.cfg.grid.n())));
        }
        let c = complex_slice(coeffs, n)?;
        s.state = SolverState::new(SpectralField::new(s.cfg.grid, c).map_err(fail)?);
        Ok(())
    })
}

/// Advances `count` steps.
///
/// # Safety
/// `solver` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ewi_solver_step(solver: *mut EwiSolver, count: usize) -> EwiStatus {
    guard(|| {
        let s = solver_mut(solver)?;
        for _ in 0..count {
            s.propagator.step(&mut s.state).map_err(fail)?;
        }
        Ok(())
    })
}

/// Advances to the configured final time. Does nothing if already there.
///
/// # Safety
/// `solver` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ewi_solver_evolve(solver: *mut EwiSolver) -> EwiStatus {
    guard(|| {
        let s = solver_mut(solver)?;
        let total = s.cfg.steps().map_err(fail)?;
        while s.state.step_index < total {
            s.propagator.step(&mut s.state).map_err(fail)?;
        }
        Ok(())
    })
}

/// Number of grid points `N`.
///
/// # Safety
/// `solver` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn ewi_solver_modes(solver: *const EwiSolver) -> usize {
    solver.as_ref().map_or(0, |s| s.cfg.grid.n())
}

/// Steps taken since the field was last set.
///
/// # Safety
/// `solver` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn ewi_solver_step_index(solver: *const EwiSolver) -> usize {
    solver.as_ref().map_or(0, |s| s.state.step_index)
}

/// Copies the `n = N` spectral coefficients into `out` (`2 n` doubles).
///
/// # Safety
/// `out` must hold `2 n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ewi_solver_coeffs(solver: *const EwiSolver, out: *mut f64, n: usize) -> EwiStatus {
    guard(|| {
        let s = solver_ref(solver)?;
        write_complex(s.state.field.coeffs(), out, n)
    })
}

/// Copies the `n = N` nodal values into `out` (`2 n` doubles).
///
/// # Safety
/// `out` must hold `2 n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ewi_solver_nodal(solver: *const EwiSolver, out: *mut f64, n: usize) -> EwiStatus {
    guard(|| {
        let s = solver_ref(solver)?;
        let nodal = idft(&s.state.field);
        write_complex(&nodal.values()[..s.cfg.grid.n()], out, n)
    })
}

/// Discrete mass `h sum |psi_j|^2`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ewi_solver_mass(solver: *const EwiSolver, out: *mut f64) -> EwiStatus {
    guard(|| {
        let s = solver_ref(solver)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = idft(&s.state.field).mass();
        Ok(())
    })
}

/// Sobolev norm of order `alpha >= 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ewi_solver_norm(solver: *const EwiSolver, alpha: f64, out: *mut f64) -> EwiStatus {
    guard(|| {
        let s = solver_ref(solver)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("alpha must be non-negative, got {alpha}")));
        }
        *out = sobolev_norm(&s.state.field, alpha);
        Ok(())
    })
}

/// Least-squares order of `(steps[i], errors[i])`, steps strictly
/// decreasing.
///
/// # Safety
/// `steps` and `errors` must hold `len` doubles; `slope` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ewi_fit_order(
    steps: *const f64,
    errors: *const f64,
    len: usize,
    slope: *mut f64,
) -> EwiStatus {
    guard(|| {
        if steps.is_null() || errors.is_null() {
            return Err(null("steps/errors"));
        }
        let slope = slope.as_mut().ok_or_else(|| null("slope"))?;
        let s = std::slice::from_raw_parts(steps, len);
        let e = std::slice::from_raw_parts(errors, len);
        let points: Vec<(f64, f64)> = s.iter().copied().zip(e.iter().copied()).collect();
        *slope = fit_order(&points).map_err(fail)?.slope;
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ewi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}
