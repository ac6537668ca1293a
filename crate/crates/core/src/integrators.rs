//! Time stepping: the first-order Gautschi-type exponential wave integrator in
//! three spatial realizations, plus Lie-Trotter and Strang splitting.
//!
//! All schemes advance Fourier coefficients. A [`Propagator`] owns the
//! precomputed multipliers, FFT plans and scratch buffers for one
//! configuration; the free functions (`ewi_fs_step`, ...) are convenience
//! wrappers that build one per call.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rustfft::Fft;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{Nonlinearity, Potential, PreparedPotential};
use crate::spectral::{
    self, dft, embed_fft_order, plan_forward, plan_inverse, truncate_fft_order, ExtendedProduct,
    GridField, PeriodicGrid, SpectralField,
};

/// Default oversampling of the EWI-FS nonlinearity projection.
pub const DEFAULT_FS_OVERSAMPLE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// EWI with `L^2` projection of both potential and nonlinear terms.
    EwiFs,
    /// EWI with extended-FFT potential product and collocated nonlinearity.
    EwiEfp,
    /// EWI with nodal products for both terms.
    EwiFp,
    /// First-order splitting (TSFP).
    LieTrotter,
    Strang,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::EwiFs,
        Scheme::EwiEfp,
        Scheme::EwiFp,
        Scheme::LieTrotter,
        Scheme::Strang,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::EwiFs => "ewi_fs",
            Scheme::EwiEfp => "ewi_efp",
            Scheme::EwiFp => "ewi_fp",
            Scheme::LieTrotter => "lie_trotter",
            Scheme::Strang => "strang",
        }
    }

    pub fn is_ewi(self) -> bool {
        matches!(self, Scheme::EwiFs | Scheme::EwiEfp | Scheme::EwiFp)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'")))
    }
}

/// Everything needed to run one trajectory.
#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub tau: f64,
    pub t_final: f64,
    pub grid: PeriodicGrid,
    pub potential: Potential,
    pub nonlinearity: Nonlinearity,
    pub fs_oversample: usize,
}

impl SchemeConfig {
    /// Free equation (no potential, no nonlinearity).
    pub fn new(scheme: Scheme, grid: PeriodicGrid, tau: f64, t_final: f64) -> Self {
        Self {
            scheme,
            tau,
            t_final,
            grid,
            potential: Potential::None,
            nonlinearity: Nonlinearity::None,
            fs_oversample: DEFAULT_FS_OVERSAMPLE,
        }
    }

    pub fn with_potential(mut self, potential: Potential) -> Self {
        self.potential = potential;
        self
    }

    pub fn with_nonlinearity(mut self, nonlinearity: Nonlinearity) -> Self {
        self.nonlinearity = nonlinearity;
        self
    }

    pub fn with_fs_oversample(mut self, oversample: usize) -> Self {
        self.fs_oversample = oversample;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Number of steps `T / tau`, after checking the step-size invariants.
    pub fn steps(&self) -> Result<usize> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!(
                "time step must satisfy 0 < tau < 1, got {}",
                self.tau
            )));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!(
                "final time must be positive, got {}",
                self.t_final
            )));
        }
        let ratio = self.t_final / self.tau;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio {
            return Err(Error::Config(format!(
                "tau = {} does not divide T = {}",
                self.tau, self.t_final
            )));
        }
        Ok(n as usize)
    }
}

/// Iterate and bookkeeping of a trajectory.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub step_index: usize,
    pub field: SpectralField,
    /// Average wall-clock seconds per step so far.
    pub wall_time_per_step: f64,
}

impl SolverState {
    pub fn new(field: SpectralField) -> Self {
        Self {
            step_index: 0,
            field,
            wall_time_per_step: 0.0,
        }
    }
}

/// `exp(i t Delta)`: multiplies mode `l` by `exp(-i t mu_l^2)`.
pub fn free_flow(c: &SpectralField, t: f64) -> SpectralField {
    let grid = *c.grid();
    let mut out = c.clone();
    for (l, v) in grid.modes().zip(out.coeffs_mut()) {
        *v *= Complex64::from_polar(1.0, -t * grid.mu(l).powi(2));
    }
    out
}

/// `phi_1(-i theta) = (1 - exp(-i theta)) / (i theta)`, stable near zero.
pub fn phi1_imag(theta: f64) -> Complex64 {
    if theta.abs() < 1e-8 {
        return Complex64::new(1.0 - theta * theta / 6.0, -theta / 2.0);
    }
    let half = 0.5 * theta;
    Complex64::new(theta.sin() / theta, -2.0 * half.sin().powi(2) / theta)
}

/// `phi_1(i tau Delta)` applied in Fourier space.
pub fn phi1_multiplier(c: &SpectralField, tau: f64) -> SpectralField {
    let grid = *c.grid();
    let mut out = c.clone();
    for (l, v) in grid.modes().zip(out.coeffs_mut()) {
        if l != 0 {
            *v *= phi1_imag(tau * grid.mu(l).powi(2));
        }
    }
    out
}

/// Initial coefficients for `scheme`: the projection `P_N psi_0` for
/// EWI-FS, the interpolant of the nodal samples for every other scheme.
pub fn initial_field(
    scheme: Scheme,
    grid: &PeriodicGrid,
    psi0: impl Fn(f64) -> Complex64,
    fs_oversample: usize,
) -> Result<SpectralField> {
    match scheme {
        Scheme::EwiFs => spectral::project(psi0, grid, fs_oversample),
        _ => Ok(dft(&GridField::from_fn(*grid, psi0))),
    }
}

struct Projection {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
}

/// One-step map of a configured scheme.
pub struct Propagator {
    scheme: Scheme,
    grid: PeriodicGrid,
    tau: f64,
    nonlinearity: Nonlinearity,
    has_potential: bool,
    /// `exp(-i tau mu^2)`, FFT order.
    free: Vec<Complex64>,
    /// `-i tau phi_1(-i tau mu^2)`, FFT order.
    weight: Vec<Complex64>,
    potential_nodal: Vec<f64>,
    extended: Option<ExtendedProduct>,
    projection: Option<Projection>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    nodal: Vec<Complex64>,
    rhs: Vec<Complex64>,
    work: Vec<Complex64>,
}

impl Propagator {
    /// Accepts any finite non-zero `tau`, including negative steps for
    /// backward integration; the divisibility checks live in
    /// [`SchemeConfig::steps`].
    pub fn new(cfg: &SchemeConfig) -> Result<Self> {
        if !(cfg.tau.is_finite() && cfg.tau != 0.0) {
            return Err(Error::Config(format!("invalid time step {}", cfg.tau)));
        }
        cfg.nonlinearity.validate()?;
        let grid = cfg.grid;
        let n = grid.n();
        let tau = cfg.tau;

        let mut free = vec![Complex64::new(0.0, 0.0); n];
        let mut weight = vec![Complex64::new(0.0, 0.0); n];
        for l in grid.modes() {
            let i = grid.fft_index(l);
            let mu2 = grid.mu(l).powi(2);
            let theta = tau * mu2;
            free[i] = Complex64::from_polar(1.0, -theta);
            weight[i] = Complex64::new(0.0, -tau) * phi1_imag(theta);
        }

        let has_potential = !cfg.potential.is_none();
        let prepared: Option<PreparedPotential> = if has_potential {
            Some(cfg.potential.prepare(&grid)?)
        } else {
            cfg.potential.validate(grid.a(), grid.b())?;
            None
        };
        let potential_nodal = prepared
            .as_ref()
            .map(|p| p.nodal().to_vec())
            .unwrap_or_else(|| vec![0.0; n]);
        let extended = match (cfg.scheme, &prepared) {
            (Scheme::EwiFs | Scheme::EwiEfp, Some(p)) => Some(ExtendedProduct::new(p.coeffs_2n())),
            _ => None,
        };
        let projection = if cfg.scheme == Scheme::EwiFs && !cfg.nonlinearity.is_none() {
            let k = cfg.fs_oversample;
            if k == 0 || !k.is_power_of_two() {
                return Err(Error::Config(format!(
                    "fs_oversample must be a positive power of two, got {k}"
                )));
            }
            let m = n * k;
            Some(Projection {
                forward: plan_forward(m),
                inverse: plan_inverse(m),
                buf: vec![Complex64::new(0.0, 0.0); m],
            })
        } else {
            None
        };

        let forward = plan_forward(n);
        let inverse = plan_inverse(n);
        let mut scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        if let Some(p) = &projection {
            scratch_len = scratch_len
                .max(p.forward.get_inplace_scratch_len())
                .max(p.inverse.get_inplace_scratch_len());
        }
        let zeros = vec![Complex64::new(0.0, 0.0); n];
        Ok(Self {
            scheme: cfg.scheme,
            grid,
            tau,
            nonlinearity: cfg.nonlinearity,
            has_potential,
            free,
            weight,
            potential_nodal,
            extended,
            projection,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            nodal: zeros.clone(),
            rhs: zeros.clone(),
            work: zeros,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Advances `state` by one step.
    pub fn step(&mut self, state: &mut SolverState) -> Result<()> {
        if state.field.grid() != &self.grid {
            return Err(Error::Config("state grid differs from the propagator grid".into()));
        }
        let mut c = state.field.to_fft_order();
        self.step_fft(&mut c);
        state.step_index += 1;
        if !c.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::BlowUp {
                step: state.step_index,
            });
        }
        state.field = SpectralField::from_fft_order(self.grid, &c);
        Ok(())
    }

    /// One step on FFT-ordered coefficients.
    pub(crate) fn step_fft(&mut self, c: &mut [Complex64]) {
        match self.scheme {
            Scheme::EwiFs | Scheme::EwiEfp | Scheme::EwiFp => {
                self.ewi_rhs(c);
                for ((v, e), (w, r)) in c
                    .iter_mut()
                    .zip(&self.free)
                    .zip(self.weight.iter().zip(&self.rhs))
                {
                    *v = e * *v + w * r;
                }
            }
            Scheme::LieTrotter => {
                self.pointwise_flow(c, self.tau);
                self.apply_free(c);
            }
            Scheme::Strang => {
                self.pointwise_flow(c, 0.5 * self.tau);
                self.apply_free(c);
                self.pointwise_flow(c, 0.5 * self.tau);
            }
        }
    }

    fn apply_free(&self, c: &mut [Complex64]) {
        c.iter_mut().zip(&self.free).for_each(|(v, e)| *v *= e);
    }

    fn load_nodes(&mut self, c: &[Complex64]) {
        self.nodal.copy_from_slice(c);
        self.inverse
            .process_with_scratch(&mut self.nodal, &mut self.scratch);
    }

    /// FFT of `self.nodal` scaled by `1/N`, written to `out`.
    fn nodal_to_coeffs(&mut self, out_is_work: bool) {
        self.forward
            .process_with_scratch(&mut self.nodal, &mut self.scratch);
        let scale = 1.0 / self.grid.n() as f64;
        let out = if out_is_work { &mut self.work } else { &mut self.rhs };
        out.iter_mut()
            .zip(&self.nodal)
            .for_each(|(o, v)| *o = v * scale);
    }

    /// Exact flow of `i u' = (V(x_j) + f(|u|^2)) u` at every node over `dt`.
    fn pointwise_flow(&mut self, c: &mut [Complex64], dt: f64) {
        self.load_nodes(c);
        let nl = self.nonlinearity;
        for (u, v) in self.nodal.iter_mut().zip(&self.potential_nodal) {
            let phase = -dt * (v + nl.f_unchecked(u.norm_sqr()));
            *u *= Complex64::from_polar(1.0, phase);
        }
        self.nodal_to_coeffs(true);
        c.copy_from_slice(&self.work);
    }

    /// Coefficients of the spatially discretized `B(psi)` into `self.rhs`.
    fn ewi_rhs(&mut self, c: &[Complex64]) {
        let n = self.grid.n();
        let nl = self.nonlinearity;
        self.rhs.fill(Complex64::new(0.0, 0.0));
        match self.scheme {
            Scheme::EwiFp => {
                if !self.has_potential && nl.is_none() {
                    return;
                }
                self.load_nodes(c);
                for (u, v) in self.nodal.iter_mut().zip(&self.potential_nodal) {
                    *u *= v + nl.f_unchecked(u.norm_sqr());
                }
                self.nodal_to_coeffs(false);
            }
            Scheme::EwiEfp => {
                if let Some(ext) = self.extended.as_mut() {
                    ext.load(c);
                    if !nl.is_none() {
                        // the N-point nodes are every fourth extended node
                        for (j, u) in self.nodal.iter_mut().enumerate() {
                            *u = ext.nodes()[4 * j];
                        }
                    }
                    ext.finish(&mut self.rhs);
                } else if !nl.is_none() {
                    self.load_nodes(c);
                }
                if !nl.is_none() {
                    self.nodal.iter_mut().for_each(|u| *u = nl.g(*u));
                    self.nodal_to_coeffs(true);
                    self.rhs
                        .iter_mut()
                        .zip(&self.work)
                        .for_each(|(r, w)| *r += w);
                }
            }
            Scheme::EwiFs => {
                if let Some(ext) = self.extended.as_mut() {
                    ext.apply(c, &mut self.rhs);
                }
                if let Some(p) = self.projection.as_mut() {
                    let m = p.buf.len();
                    embed_fft_order(c, &mut p.buf);
                    p.inverse.process_with_scratch(&mut p.buf, &mut self.scratch);
                    p.buf.iter_mut().for_each(|u| *u = nl.g(*u));
                    p.forward.process_with_scratch(&mut p.buf, &mut self.scratch);
                    truncate_fft_order(&p.buf, &mut self.work);
                    let scale = 1.0 / m as f64;
                    self.rhs
                        .iter_mut()
                        .zip(&self.work)
                        .for_each(|(r, w)| *r += w * scale);
                }
            }
            _ => unreachable!("splitting schemes have no EWI right-hand side"),
        }
        debug_assert_eq!(self.rhs.len(), n);
    }
}

fn step_with(scheme: Scheme, state: &SolverState, cfg: &SchemeConfig) -> Result<SolverState> {
    let cfg = cfg.clone().with_scheme(scheme);
    let mut prop = Propagator::new(&cfg)?;
    let mut next = state.clone();
    prop.step(&mut next)?;
    Ok(next)
}

pub fn ewi_fs_step(state: &SolverState, cfg: &SchemeConfig) -> Result<SolverState> {
    step_with(Scheme::EwiFs, state, cfg)
}

pub fn ewi_efp_step(state: &SolverState, cfg: &SchemeConfig) -> Result<SolverState> {
    step_with(Scheme::EwiEfp, state, cfg)
}

pub fn ewi_fp_step(state: &SolverState, cfg: &SchemeConfig) -> Result<SolverState> {
    step_with(Scheme::EwiFp, state, cfg)
}

pub fn lie_trotter_step(state: &SolverState, cfg: &SchemeConfig) -> Result<SolverState> {
    step_with(Scheme::LieTrotter, state, cfg)
}

pub fn strang_step(state: &SolverState, cfg: &SchemeConfig) -> Result<SolverState> {
    step_with(Scheme::Strang, state, cfg)
}

/// Default checkpoint cadence for `steps` total steps.
pub fn default_observer_interval(steps: usize) -> usize {
    (steps / 100).max(1)
}

/// Runs `cfg.scheme` from `psi0` to `t = T`.
pub fn evolve(cfg: &SchemeConfig, psi0: &SpectralField) -> Result<SolverState> {
    evolve_observed(cfg, psi0, None, &mut |_, _| {})
}

/// As [`evolve`], calling `observer(n, field)` after every `every`-th step
/// (default cadence when `None`) and after the last step.
pub fn evolve_observed(
    cfg: &SchemeConfig,
    psi0: &SpectralField,
    every: Option<usize>,
    observer: &mut dyn FnMut(usize, &SpectralField),
) -> Result<SolverState> {
    if psi0.grid() != &cfg.grid {
        return Err(Error::Config("initial field does not live on the configured grid".into()));
    }
    let steps = cfg.steps()?;
    let every = every.unwrap_or_else(|| default_observer_interval(steps)).max(1);
    let mut prop = Propagator::new(cfg)?;
    let grid = cfg.grid;
    let mut c = psi0.to_fft_order();
    let start = Instant::now();
    for n in 1..=steps {
        prop.step_fft(&mut c);
        if !c.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::BlowUp { step: n });
        }
        if n % every == 0 || n == steps {
            observer(n, &SpectralField::from_fft_order(grid, &c));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok(SolverState {
        step_index: steps,
        field: SpectralField::from_fft_order(grid, &c),
        wall_time_per_step: elapsed / steps as f64,
    })
}
