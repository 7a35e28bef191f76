//! C interface to `laydown`.
//!
//! Objects are opaque handles created by `ld_*_new` functions and released by
//! the matching `ld_*_free`. Every fallible call returns an [`LdStatus`]; the
//! message of the last failure on the calling thread is available through
//! [`ld_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use laydown::constants::{estimate_elliptic_constant, estimate_spectral_gap, hypo_constants, ChainCfg};
use laydown::kinetic::{solve_stationary, Grid, PhaseField, StationaryCfg, Stepper};
use laydown::plane::GridCfg;
use laydown::potential::{normalize_potential, QuadratureCfg};
use laydown::sde::{continue_ensemble, simulate_ensemble, Ensemble, InitialLaw, SdeConfig};
use laydown::{Error, PotentialSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdStatus {
    Ok = 0,
    Config = 1,
    Precondition = 2,
    Infeasible = 3,
    NonConvergence = 4,
    Numerical = 5,
    Io = 6,
    NullPointer = 7,
    Panic = 8,
}

impl From<&Error> for LdStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => LdStatus::Config,
            Error::Precondition(_) => LdStatus::Precondition,
            Error::Infeasible(_) => LdStatus::Infeasible,
            Error::NonConvergence { .. } => LdStatus::NonConvergence,
            Error::Numerical(_) => LdStatus::Numerical,
            Error::Io(_) => LdStatus::Io,
        }
    }
}

/// Normalized potential.
pub struct LdPotential {
    spec: PotentialSpec,
}

/// Particle ensemble together with its configuration.
pub struct LdEnsemble {
    potential: PotentialSpec,
    cfg: SdeConfig,
    ensemble: Ensemble,
}

/// Kinetic solver on a phase-space grid, holding the current density.
pub struct LdKinetic {
    stepper: Stepper,
    field: PhaseField,
}

/// Hypocoercivity constants. `zeta` is NaN when no weight is used.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LdConstants {
    pub eps1: f64,
    pub xi: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub lambda_kappa: f64,
    pub kappa_max: f64,
    pub zeta: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), LdStatus>) -> LdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LdStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LdStatus::Panic
        }
    }
}

fn fail(e: Error) -> LdStatus {
    let s = LdStatus::from(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> LdStatus {
    set_error(format!("{what} is null"));
    LdStatus::NullPointer
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, LdStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, LdStatus> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), LdStatus> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), LdStatus> {
    *deref_mut(out, what)? = value;
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length without the NUL.
/// Returns 0 when the last call succeeded. `buf` may be null to query the length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ld_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            0
        }
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ld_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn make_potential(spec: laydown::Result<PotentialSpec>, out: *mut *mut LdPotential) -> LdStatus {
    guard(|| {
        let spec = spec.and_then(|s| normalize_potential(&s, &QuadratureCfg::default())).map_err(fail)?;
        unsafe { put(out, LdPotential { spec }) }
    })
}

/// `K (1 + |x|^2)^(s/2)`, normalized so that `e^{-V}` has unit mass.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn ld_potential_family(k: f64, s: f64, out: *mut *mut LdPotential) -> LdStatus {
    make_potential(PotentialSpec::family(k, s), out)
}

/// `omega |x|^2 / 2`, normalized.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn ld_potential_quadratic(omega: f64, out: *mut *mut LdPotential) -> LdStatus {
    make_potential(PotentialSpec::quadratic(omega), out)
}

/// # Safety
/// `p` must be null or a handle from `ld_potential_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ld_potential_free(p: *mut LdPotential) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Value and gradient at `(x, y)`. `grad` may be null.
///
/// # Safety
/// Pointers must be valid; `grad` must hold two doubles when non-null.
#[no_mangle]
pub unsafe extern "C" fn ld_potential_eval(p: *const LdPotential, x: f64, y: f64, value: *mut f64, grad: *mut f64) -> LdStatus {
    guard(|| {
        let p = deref(p, "potential")?;
        let e = p.spec.eval([x, y]);
        write(value, e.v, "value")?;
        if !grad.is_null() {
            *grad = e.grad[0];
            *grad.add(1) = e.grad[1];
        }
        Ok(())
    })
}

/// Poincare constant `Lambda` and elliptic constant `C_V` on an `n x n` plane
/// grid, with the angular coupling of `nalpha` cells.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ld_estimate_constants(
    p: *const LdPotential,
    n: usize,
    nalpha: usize,
    seed: u64,
    lambda: *mut f64,
    c_v: *mut f64,
) -> LdStatus {
    guard(|| {
        let p = deref(p, "potential")?;
        let g = GridCfg::new(n, n, nalpha);
        g.validate().map_err(fail)?;
        let gap = estimate_spectral_gap(&p.spec, &g).map_err(fail)?;
        let cv = estimate_elliptic_constant(&p.spec, &g, 8, seed).map_err(fail)?;
        write(lambda, gap.lambda, "lambda")?;
        write(c_v, cv.c_v, "c_v")
    })
}

/// Evaluates the constant chain for given `Lambda` and `C_V`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ld_constants(
    p: *const LdPotential,
    kappa: f64,
    d: f64,
    lambda: f64,
    c_v: f64,
    out: *mut LdConstants,
) -> LdStatus {
    guard(|| {
        let p = deref(p, "potential")?;
        let hc = hypo_constants(&p.spec, kappa, d, lambda, c_v, &ChainCfg::default()).map_err(fail)?;
        write(
            out,
            LdConstants {
                eps1: hc.eps1,
                xi: hc.xi,
                gamma1: hc.gamma1,
                gamma2: hc.gamma2_gronwall,
                lambda_kappa: hc.lambda_kappa,
                kappa_max: hc.kappa_max,
                zeta: hc.zeta.unwrap_or(f64::NAN),
            },
            "constants",
        )
    })
}

/// Ensemble of `n` particles with Gaussian positions of width `sigma` and
/// uniform angles, at time 0.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ld_ensemble_new(
    p: *const LdPotential,
    kappa: f64,
    d: f64,
    dt: f64,
    n: usize,
    seed: u64,
    sigma: f64,
    out: *mut *mut LdEnsemble,
) -> LdStatus {
    guard(|| {
        let p = deref(p, "potential")?;
        let cfg = SdeConfig {
            kappa,
            d,
            dt,
            n_particles: n,
            horizon: 0.0,
            seed,
            initial: InitialLaw::Gaussian { sigma },
            snapshot_every: None,
        };
        let ensemble = simulate_ensemble(&cfg, &p.spec).map_err(fail)?;
        put(
            out,
            LdEnsemble {
                potential: p.spec,
                cfg,
                ensemble,
            },
        )
    })
}

/// # Safety
/// `e` must be null or a live ensemble handle.
#[no_mangle]
pub unsafe extern "C" fn ld_ensemble_free(e: *mut LdEnsemble) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Advances by `horizon` time units.
///
/// # Safety
/// `e` must be a live ensemble handle.
#[no_mangle]
pub unsafe extern "C" fn ld_ensemble_advance(e: *mut LdEnsemble, horizon: f64) -> LdStatus {
    guard(|| {
        let e = deref_mut(e, "ensemble")?;
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(fail(Error::Config(format!("horizon = {horizon} must be finite and non-negative"))));
        }
        continue_ensemble(&mut e.ensemble, &e.cfg, &e.potential, horizon).map_err(fail)
    })
}

/// # Safety
/// `e` must be a live ensemble handle.
#[no_mangle]
pub unsafe extern "C" fn ld_ensemble_time(e: *const LdEnsemble) -> f64 {
    e.as_ref().map_or(f64::NAN, |e| e.ensemble.t)
}

/// # Safety
/// `e` must be a live ensemble handle.
#[no_mangle]
pub unsafe extern "C" fn ld_ensemble_len(e: *const LdEnsemble) -> usize {
    e.as_ref().map_or(0, |e| e.ensemble.states.len())
}

/// Writes `x, y, alpha` per particle into `out`, which holds `len` doubles.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ld_ensemble_states(e: *const LdEnsemble, out: *mut f64, len: usize) -> LdStatus {
    guard(|| {
        let e = deref(e, "ensemble")?;
        if out.is_null() {
            return Err(null("output buffer"));
        }
        let need = 3 * e.ensemble.states.len();
        if len < need {
            return Err(fail(Error::Config(format!("buffer holds {len} doubles, {need} needed"))));
        }
        let buf = std::slice::from_raw_parts_mut(out, need);
        for (c, s) in buf.chunks_exact_mut(3).zip(&e.ensemble.states) {
            c.copy_from_slice(&[s.x[0], s.x[1], s.alpha]);
        }
        Ok(())
    })
}

/// Solver on an `nx x ny x nalpha` grid with the time step at `cfl_fraction` of
/// the stability bound. The density starts at `e^{-V}`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ld_kinetic_new(
    p: *const LdPotential,
    nx: usize,
    ny: usize,
    nalpha: usize,
    d: f64,
    kappa: f64,
    cfl_fraction: f64,
    out: *mut *mut LdKinetic,
) -> LdStatus {
    guard(|| {
        let p = deref(p, "potential")?;
        let cfg = GridCfg::new(nx, ny, nalpha);
        cfg.validate().map_err(fail)?;
        let grid = Arc::new(Grid::new(&p.spec, &cfg).map_err(fail)?);
        let stepper = Stepper::with_cfl_fraction(grid.clone(), d, kappa, cfl_fraction).map_err(fail)?;
        put(
            out,
            LdKinetic {
                stepper,
                field: PhaseField::equilibrium(grid),
            },
        )
    })
}

/// # Safety
/// `k` must be null or a live kinetic handle.
#[no_mangle]
pub unsafe extern "C" fn ld_kinetic_free(k: *mut LdKinetic) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Number of cells; values are ordered with `alpha` fastest, then `y`, then `x`.
///
/// # Safety
/// `k` must be a live kinetic handle.
#[no_mangle]
pub unsafe extern "C" fn ld_kinetic_len(k: *const LdKinetic) -> usize {
    k.as_ref().map_or(0, |k| k.field.values.len())
}

/// # Safety
/// `k` must be a live kinetic handle.
#[no_mangle]
pub unsafe extern "C" fn ld_kinetic_dt(k: *const LdKinetic) -> f64 {
    k.as_ref().map_or(f64::NAN, |k| k.stepper.dt)
}

/// # Safety
/// `k` must be a live kinetic handle.
#[no_mangle]
pub unsafe extern "C" fn ld_kinetic_mass(k: *const LdKinetic) -> f64 {
    k.as_ref().map_or(f64::NAN, |k| k.field.mass())
}

/// # Safety
/// `values` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn ld_kinetic_set_values(k: *mut LdKinetic, values: *const f64, len: usize) -> LdStatus {
    guard(|| {
        let k = deref_mut(k, "kinetic")?;
        if values.is_null() {
            return Err(null("values"));
        }
        let v = std::slice::from_raw_parts(values, len).to_vec();
        k.field = PhaseField::new(k.stepper.grid.clone(), v).map_err(fail)?;
        Ok(())
    })
}

/// # Safety
/// `values` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ld_kinetic_get_values(k: *const LdKinetic, values: *mut f64, len: usize) -> LdStatus {
    guard(|| {
        let k = deref(k, "kinetic")?;
        if values.is_null() {
            return Err(null("values"));
        }
        let n = k.field.values.len();
        if len < n {
            return Err(fail(Error::Config(format!("buffer holds {len} doubles, {n} needed"))));
        }
        std::slice::from_raw_parts_mut(values, n).copy_from_slice(&k.field.values);
        Ok(())
    })
}

/// Takes `steps` time steps.
///
/// # Safety
/// `k` must be a live kinetic handle.
#[no_mangle]
pub unsafe extern "C" fn ld_kinetic_step(k: *mut LdKinetic, steps: usize) -> LdStatus {
    guard(|| {
        let k = deref_mut(k, "kinetic")?;
        k.stepper.advance(&mut k.field, steps);
        if k.field.values.iter().any(|v| !v.is_finite()) {
            return Err(fail(Error::Numerical("non-finite density".into())));
        }
        Ok(())
    })
}

/// Replaces the density by the stationary state reached from it; the final
/// residual goes to `residual` when non-null.
///
/// # Safety
/// `k` must be a live kinetic handle; `residual` null or valid.
#[no_mangle]
pub unsafe extern "C" fn ld_kinetic_solve_stationary(k: *mut LdKinetic, tol: f64, residual: *mut f64) -> LdStatus {
    guard(|| {
        let k = deref_mut(k, "kinetic")?;
        let cfg = StationaryCfg {
            tol,
            ..StationaryCfg::default()
        };
        let rep = solve_stationary(&k.stepper, &k.field, &cfg).map_err(fail)?;
        if !residual.is_null() {
            *residual = rep.residual;
        }
        k.field = rep.field;
        Ok(())
    })
}
