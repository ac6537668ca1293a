//! Convergence studies: reference solutions, error measurement against them,
//! order fits and acceptance bands.

mod order;
pub mod presets;
pub mod reference;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::integrators::{evolve, initial_field, Scheme, SchemeConfig, DEFAULT_FS_OVERSAMPLE};
use crate::physics::{Nonlinearity, Potential};
use crate::spectral::{sobolev_norm, zero_pad, PeriodicGrid, SpectralField};

pub use order::{fit_order, fit_order_with_floor, OrderFit, ERROR_FLOOR};
pub use reference::{compute_reference, reference_self_consistency, ReferenceRun, SnapshotMeta};

/// Initial data `psi_0`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDatum {
    /// `x |x|^0.51 exp(-x^2/2)`, in `H^2` but not `H^3`.
    Type1H2,
    /// `x exp(-x^2/2)`.
    Type2Smooth,
    /// `(1 + |x|^2.51) exp(-x^2/2)`.
    H3Datum,
    /// `A exp(i mu_l (x - a))`.
    PlaneWave { amplitude: f64, mode: i64 },
    #[serde(skip)]
    Custom(Arc<dyn Fn(f64) -> Complex64 + Send + Sync>),
}

impl InitialDatum {
    pub fn eval(&self, x: f64, a: f64, b: f64) -> Complex64 {
        let gauss = (-0.5 * x * x).exp();
        match self {
            InitialDatum::Type1H2 => Complex64::new(x * x.abs().powf(0.51) * gauss, 0.0),
            InitialDatum::Type2Smooth => Complex64::new(x * gauss, 0.0),
            InitialDatum::H3Datum => Complex64::new((1.0 + x.abs().powf(2.51)) * gauss, 0.0),
            InitialDatum::PlaneWave { amplitude, mode } => {
                let mu = 2.0 * std::f64::consts::PI * *mode as f64 / (b - a);
                Complex64::from_polar(*amplitude, mu * (x - a))
            }
            InitialDatum::Custom(f) => f(x),
        }
    }

    pub fn id(&self) -> String {
        match self {
            InitialDatum::Type1H2 => "type1_h2".into(),
            InitialDatum::Type2Smooth => "type2_smooth".into(),
            InitialDatum::H3Datum => "h3_datum".into(),
            InitialDatum::PlaneWave { amplitude, mode } => format!("plane_wave({amplitude};{mode})"),
            InitialDatum::Custom(_) => "custom".into(),
        }
    }

    pub(crate) fn is_cacheable(&self) -> bool {
        !matches!(self, InitialDatum::Custom(_))
    }
}

impl fmt::Debug for InitialDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialDatum::PlaneWave { amplitude, mode } => f
                .debug_struct("PlaneWave")
                .field("amplitude", amplitude)
                .field("mode", mode)
                .finish(),
            other => f.write_str(&other.id()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Norm {
    L2,
    H1,
}

impl Norm {
    pub fn alpha(self) -> f64 {
        match self {
            Norm::L2 => 0.0,
            Norm::H1 => 1.0,
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L2 => "L2",
            Norm::H1 => "H1",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    #[serde(default = "none_potential")]
    pub potential: Potential,
    #[serde(default = "none_nonlinearity")]
    pub nonlinearity: Nonlinearity,
    pub datum: InitialDatum,
    pub a: f64,
    pub b: f64,
    pub t_final: f64,
}

fn none_potential() -> Potential {
    Potential::None
}

fn none_nonlinearity() -> Nonlinearity {
    Nonlinearity::None
}

/// Which parameter a study varies.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    /// Time steps, with the mesh fixed at the reference mesh.
    Tau(Vec<f64>),
    /// Mesh sizes, with the time step fixed at the reference step.
    H(Vec<f64>),
}

impl Sweep {
    pub fn values(&self) -> &[f64] {
        match self {
            Sweep::Tau(v) | Sweep::H(v) => v,
        }
    }

    pub fn axis(&self) -> &'static str {
        match self {
            Sweep::Tau(_) => "tau",
            Sweep::H(_) => "h",
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h: Option<Vec<f64>>,
}

impl Serialize for Sweep {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Sweep::Tau(v) => SweepRepr { tau: Some(v.clone()), h: None },
            Sweep::H(v) => SweepRepr { tau: None, h: Some(v.clone()) },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Sweep {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match SweepRepr::deserialize(d)? {
            SweepRepr { tau: Some(t), h: None } => Ok(Sweep::Tau(t)),
            SweepRepr { tau: None, h: Some(h) } => Ok(Sweep::H(h)),
            _ => Err(serde::de::Error::custom("sweep needs exactly one of `tau` or `h`")),
        }
    }
}

/// The scheme producing the reference: a fixed one, or each tested scheme
/// against its own fine-grid solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceScheme {
    Fixed(Scheme),
    SameAsTested,
}

impl Serialize for ReferenceScheme {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ReferenceScheme::Fixed(sc) => s.serialize_str(sc.name()),
            ReferenceScheme::SameAsTested => s.serialize_str("self"),
        }
    }
}

impl<'de> Deserialize<'de> for ReferenceScheme {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "self" {
            Ok(ReferenceScheme::SameAsTested)
        } else {
            s.parse()
                .map(ReferenceScheme::Fixed)
                .map_err(serde::de::Error::custom)
        }
    }
}

impl fmt::Display for ReferenceScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceScheme::Fixed(s) => write!(f, "{s}"),
            ReferenceScheme::SameAsTested => f.write_str("self"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    pub scheme: ReferenceScheme,
    pub tau: f64,
    pub h: f64,
}

/// A pass/fail condition on the fitted orders of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Band {
    /// `|slope - target| <= tol`.
    Slope { scheme: Scheme, norm: Norm, target: f64, tol: f64 },
    SlopeAtMost { scheme: Scheme, norm: Norm, max: f64 },
    /// `slope(scheme) - slope(other) >= min_gap`.
    SlopeGap { scheme: Scheme, other: Scheme, norm: Norm, min_gap: f64 },
    /// `error(scheme) <= max_ratio * error(other)` at the finest sweep point.
    FinestErrorRatio { scheme: Scheme, other: Scheme, norm: Norm, max_ratio: f64 },
    /// `spread(scheme) >= min_ratio * spread(other)` for the standard
    /// deviation of per-interval orders.
    FluctuationRatio { scheme: Scheme, other: Scheme, norm: Norm, min_ratio: f64 },
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Band::Slope { scheme, norm, target, tol } => {
                write!(f, "{scheme} {norm} slope = {target} +- {tol}")
            }
            Band::SlopeAtMost { scheme, norm, max } => write!(f, "{scheme} {norm} slope <= {max}"),
            Band::SlopeGap { scheme, other, norm, min_gap } => {
                write!(f, "{scheme} - {other} {norm} slope >= {min_gap}")
            }
            Band::FinestErrorRatio { scheme, other, norm, max_ratio } => {
                write!(f, "{scheme} {norm} finest error <= {max_ratio} x {other}")
            }
            Band::FluctuationRatio { scheme, other, norm, min_ratio } => {
                write!(f, "{scheme} {norm} order spread >= {min_ratio} x {other}")
            }
        }
    }
}

fn default_oversample() -> usize {
    DEFAULT_FS_OVERSAMPLE
}

fn default_norms() -> Vec<Norm> {
    vec![Norm::L2, Norm::H1]
}

/// One convergence study.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub label: String,
    pub problem: Problem,
    pub sweep: Sweep,
    pub reference: ReferenceSpec,
    #[serde(default = "default_norms")]
    pub norms: Vec<Norm>,
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_oversample")]
    pub fs_oversample: usize,
    #[serde(default)]
    pub bands: Vec<Band>,
}

impl StudySpec {
    pub fn reference_grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::with_mesh_size(self.problem.a, self.problem.b, self.reference.h)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        if self.schemes.is_empty() {
            return Err(Error::Config("study lists no schemes".into()));
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return Err(Error::Config(format!("scheme {s} listed twice")));
            }
        }
        if self.norms.is_empty() {
            return Err(Error::Config("study lists no norms".into()));
        }
        let values = self.sweep.values();
        if values.is_empty() {
            return Err(Error::Config("empty sweep".into()));
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("sweep values must be positive".into()));
        }
        p.potential.validate(p.a, p.b)?;
        p.nonlinearity.validate()?;
        let ref_grid = self.reference_grid()?;
        let t_check = |tau: f64| {
            SchemeConfig::new(Scheme::EwiEfp, ref_grid, tau, p.t_final)
                .steps()
                .map(|_| ())
        };
        t_check(self.reference.tau)?;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        match &self.sweep {
            Sweep::Tau(taus) => {
                for &t in taus {
                    t_check(t)?;
                }
                if self.reference.tau > min / 10.0 * (1.0 + 1e-12) {
                    return Err(Error::Config(format!(
                        "reference step {} must be at most a tenth of the smallest swept step {min}",
                        self.reference.tau
                    )));
                }
            }
            Sweep::H(hs) => {
                for &h in hs {
                    PeriodicGrid::with_mesh_size(p.a, p.b, h)?;
                }
                if self.reference.h > min / 2.0 * (1.0 + 1e-12) {
                    return Err(Error::Config(format!(
                        "reference mesh {} must be at most half the smallest swept mesh {min}",
                        self.reference.h
                    )));
                }
            }
        }
        for band in &self.bands {
            let schemes: Vec<Scheme> = match band {
                Band::Slope { scheme, .. } | Band::SlopeAtMost { scheme, .. } => vec![*scheme],
                Band::SlopeGap { scheme, other, .. }
                | Band::FinestErrorRatio { scheme, other, .. }
                | Band::FluctuationRatio { scheme, other, .. } => vec![*scheme, *other],
            };
            if let Some(s) = schemes.iter().find(|s| !self.schemes.contains(s)) {
                return Err(Error::Config(format!("band refers to scheme {s} not in the study")));
            }
        }
        Ok(())
    }

    /// Sweep points ordered from coarsest to finest.
    fn sorted_sweep(&self) -> Vec<f64> {
        let mut v = self.sweep.values().to_vec();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    fn run_config(&self, scheme: Scheme, point: f64) -> Result<SchemeConfig> {
        let p = &self.problem;
        let (grid, tau) = match self.sweep {
            Sweep::Tau(_) => (self.reference_grid()?, point),
            Sweep::H(_) => (PeriodicGrid::with_mesh_size(p.a, p.b, point)?, self.reference.tau),
        };
        Ok(SchemeConfig::new(scheme, grid, tau, p.t_final)
            .with_potential(p.potential.clone())
            .with_nonlinearity(p.nonlinearity)
            .with_fs_oversample(self.fs_oversample))
    }
}

/// One error measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub scheme: Scheme,
    pub tau: f64,
    pub h: f64,
    pub norm: Norm,
    /// `NaN` when the run blew up.
    pub error: f64,
    pub t_final: f64,
    pub wall_seconds: f64,
    /// Failing step of a run that blew up.
    pub blown_up: Option<usize>,
}

/// `||I psi - psi_ref||` in the requested norm, after padding `psi` to the
/// reference modes.
pub fn error_against_reference(psi: &SpectralField, psi_ref: &SpectralField, norm: Norm) -> Result<f64> {
    let padded = zero_pad(psi, psi_ref.grid())?;
    Ok(sobolev_norm(&padded.sub(psi_ref)?, norm.alpha()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Ok,
    /// Fewer than two points above the round-off floor.
    Floor,
    /// The coarsest point is not worse than the finest one.
    NonMonotone,
}

impl fmt::Display for FitStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitStatus::Ok => "ok",
            FitStatus::Floor => "floor",
            FitStatus::NonMonotone => "non-monotone",
        })
    }
}

#[derive(Debug, Clone)]
pub struct FitSummary {
    pub scheme: Scheme,
    pub norm: Norm,
    pub fit: Option<OrderFit>,
    pub status: FitStatus,
    /// Error at the finest sweep point.
    pub finest_error: f64,
}

#[derive(Debug, Clone)]
pub struct BandResult {
    pub band: Band,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub label: String,
    pub records: Vec<ErrorRecord>,
    pub fits: Vec<FitSummary>,
    pub bands: Vec<BandResult>,
    pub csv_path: Option<PathBuf>,
}

impl StudyOutcome {
    pub fn all_bands_pass(&self) -> bool {
        self.bands.iter().all(|b| b.passed)
    }

    pub fn fit(&self, scheme: Scheme, norm: Norm) -> Option<&FitSummary> {
        self.fits.iter().find(|f| f.scheme == scheme && f.norm == norm)
    }

    /// Human-readable table of fitted orders and band results.
    pub fn summary(&self) -> String {
        let mut out = format!("study {}\n", self.label);
        out.push_str(&format!(
            "  {:<12} {:<4} {:>8} {:>14} {:<13} per-interval\n",
            "scheme", "norm", "order", "finest error", "status"
        ));
        for f in &self.fits {
            let slope = f.fit.as_ref().map_or("-".to_string(), |x| format!("{:.3}", x.slope));
            let per = f.fit.as_ref().map_or(String::new(), |x| {
                x.per_interval
                    .iter()
                    .map(|p| format!("{p:.2}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            });
            out.push_str(&format!(
                "  {:<12} {:<4} {:>8} {:>14.4e} {:<13} {}\n",
                f.scheme.name(),
                f.norm,
                slope,
                f.finest_error,
                f.status,
                per
            ));
        }
        for b in &self.bands {
            out.push_str(&format!(
                "  [{}] {} ({})\n",
                if b.passed { "PASS" } else { "FAIL" },
                b.band,
                b.detail
            ));
        }
        out
    }
}

/// Fits orders per `(scheme, norm)` and evaluates the study's bands.
pub fn summarize(spec: &StudySpec, records: &[ErrorRecord]) -> (Vec<FitSummary>, Vec<BandResult>) {
    let mut fits = Vec::new();
    for &scheme in &spec.schemes {
        for &norm in &spec.norms {
            let series: Vec<&ErrorRecord> = records
                .iter()
                .filter(|r| r.scheme == scheme && r.norm == norm)
                .collect();
            let step = |r: &ErrorRecord| match spec.sweep {
                Sweep::Tau(_) => r.tau,
                Sweep::H(_) => r.h,
            };
            let points: Vec<(f64, f64)> = series.iter().map(|r| (step(r), r.error)).collect();
            let finest_error = series.last().map_or(f64::NAN, |r| r.error);
            let fit = fit_order(&points).ok();
            let status = match &fit {
                None => FitStatus::Floor,
                Some(_) => {
                    let first = points.first().map(|p| p.1).unwrap_or(f64::NAN);
                    let last = points.last().map(|p| p.1).unwrap_or(f64::NAN);
                    if first > last || (last < ERROR_FLOOR && first.is_finite()) {
                        FitStatus::Ok
                    } else {
                        warn!("{}: {scheme} {norm} errors do not decrease over the sweep", spec.label);
                        FitStatus::NonMonotone
                    }
                }
            };
            fits.push(FitSummary {
                scheme,
                norm,
                fit,
                status,
                finest_error,
            });
        }
    }
    let find = |s: Scheme, n: Norm| fits.iter().find(|f| f.scheme == s && f.norm == n);
    let slope_of = |s: Scheme, n: Norm| {
        find(s, n).and_then(|f| match (&f.fit, f.status) {
            (Some(fit), FitStatus::Ok) => Some(fit.slope),
            _ => None,
        })
    };
    let bands = spec
        .bands
        .iter()
        .map(|band| {
            let (passed, detail) = match *band {
                Band::Slope { scheme, norm, target, tol } => match slope_of(scheme, norm) {
                    Some(s) => ((s - target).abs() <= tol, format!("slope {s:.3}")),
                    None => (false, "no valid fit".into()),
                },
                Band::SlopeAtMost { scheme, norm, max } => match slope_of(scheme, norm) {
                    Some(s) => (s <= max, format!("slope {s:.3}")),
                    None => (false, "no valid fit".into()),
                },
                Band::SlopeGap { scheme, other, norm, min_gap } => {
                    match (slope_of(scheme, norm), slope_of(other, norm)) {
                        (Some(s), Some(o)) => (s - o >= min_gap, format!("{s:.3} - {o:.3} = {:.3}", s - o)),
                        _ => (false, "no valid fit".into()),
                    }
                }
                Band::FinestErrorRatio { scheme, other, norm, max_ratio } => {
                    match (find(scheme, norm), find(other, norm)) {
                        (Some(s), Some(o)) if s.finest_error.is_finite() && o.finest_error.is_finite() => {
                            let ratio = s.finest_error / o.finest_error;
                            (ratio <= max_ratio, format!("ratio {ratio:.3}"))
                        }
                        _ => (false, "missing finest errors".into()),
                    }
                }
                Band::FluctuationRatio { scheme, other, norm, min_ratio } => {
                    let spread = |s: Scheme| find(s, norm).and_then(|f| f.fit.as_ref()).map(|f| f.per_interval_spread());
                    match (spread(scheme), spread(other)) {
                        (Some(s), Some(o)) => (
                            s >= min_ratio * o,
                            format!("spread {s:.3} vs {o:.3}"),
                        ),
                        _ => (false, "no per-interval orders".into()),
                    }
                }
            };
            BandResult {
                band: band.clone(),
                passed,
                detail,
            }
        })
        .collect();
    (fits, bands)
}

/// Where and how a study runs.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory for the CSV; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    /// Reference cache directory; references are recomputed when `None`.
    pub cache_dir: Option<PathBuf>,
    /// Worker threads; `None` uses all cores, capped by the number of tasks.
    pub threads: Option<usize>,
    /// When set, each reference must agree with a run at half its time step
    /// and twice its modes to within this `L^2` distance before any sweep
    /// point runs. This roughly quadruples the reference cost.
    pub verify_reference: Option<f64>,
}

fn worker_count(requested: Option<usize>, tasks: usize) -> usize {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    requested.unwrap_or(cores).min(tasks).max(1)
}

/// Runs every scheme at every sweep point and measures it against the
/// reference.
pub fn run_study(spec: &StudySpec, opts: &RunOptions) -> Result<StudyOutcome> {
    spec.validate()?;
    let sweep = spec.sorted_sweep();

    let ref_schemes: Vec<Option<Scheme>> = match spec.reference.scheme {
        ReferenceScheme::Fixed(_) => vec![None],
        ReferenceScheme::SameAsTested => spec.schemes.iter().copied().map(Some).collect(),
    };
    let tasks: Vec<(Scheme, f64)> = spec
        .schemes
        .iter()
        .flat_map(|&s| sweep.iter().map(move |&p| (s, p)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(opts.threads, tasks.len().max(ref_schemes.len())))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let cache = opts.cache_dir.as_deref();
    let references: Vec<(Option<Scheme>, SpectralField)> = pool.install(|| {
        ref_schemes
            .par_iter()
            .map(|&s| {
                ReferenceRun::for_study(spec, s)
                    .and_then(|r| r.solve(spec, cache))
                    .map(|f| (s, f))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    if let Some(tol) = opts.verify_reference {
        for &s in &ref_schemes {
            let gap = pool.install(|| reference_self_consistency(spec, s, cache))?;
            if !(gap < tol) {
                return Err(Error::Config(format!(
                    "{}: reference is not converged, refined run differs by {gap:e} (tolerance {tol:e})",
                    spec.label
                )));
            }
            info!("{}: reference self-consistency {gap:e}", spec.label);
        }
    }
    let reference_for = |scheme: Scheme| {
        references
            .iter()
            .find(|(s, _)| s.map_or(true, |s| s == scheme))
            .map(|(_, f)| f)
            .expect("reference computed for every scheme")
    };

    let rows: Vec<Vec<ErrorRecord>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(scheme, point)| -> Result<Vec<ErrorRecord>> {
                let cfg = spec.run_config(scheme, point)?;
                let p = &spec.problem;
                let psi0 = initial_field(scheme, &cfg.grid, |x| p.datum.eval(x, p.a, p.b), cfg.fs_oversample)?;
                let start = Instant::now();
                let result = evolve(&cfg, &psi0);
                let wall = start.elapsed().as_secs_f64();
                let reference = reference_for(scheme);
                spec.norms
                    .iter()
                    .map(|&norm| {
                        let (error, blown_up) = match &result {
                            Ok(state) => (error_against_reference(&state.field, reference, norm)?, None),
                            Err(Error::BlowUp { step }) => {
                                warn!("{}: {scheme} at {point:e} blew up at step {step}", spec.label);
                                (f64::NAN, Some(*step))
                            }
                            Err(e) => return Err(Error::Config(e.to_string())),
                        };
                        Ok(ErrorRecord {
                            scheme,
                            tau: cfg.tau,
                            h: cfg.grid.h(),
                            norm,
                            error,
                            t_final: p.t_final,
                            wall_seconds: wall,
                            blown_up,
                        })
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    // order: scheme, norm, sweep point (coarse to fine)
    let mut records: Vec<ErrorRecord> = rows.into_iter().flatten().collect();
    records.sort_by(|x, y| {
        let key = |r: &ErrorRecord| (spec.schemes.iter().position(|s| *s == r.scheme), r.norm);
        key(x).cmp(&key(y))
    });

    let (fits, bands) = summarize(spec, &records);
    let csv_path = match &opts.out_dir {
        Some(dir) => {
            let path = dir.join(format!("{}.csv", spec.label));
            write_csv(&path, spec, &records)?;
            info!("wrote {}", path.display());
            Some(path)
        }
        None => None,
    };
    Ok(StudyOutcome {
        label: spec.label.clone(),
        records,
        fits,
        bands,
        csv_path,
    })
}

pub const CSV_COLUMNS: [&str; 12] = [
    "study_label",
    "scheme",
    "potential",
    "nonlinearity",
    "datum",
    "norm",
    "tau",
    "h",
    "error",
    "order_local",
    "blown_up",
    "wall_seconds",
];

/// Writes records in the fixed column order. `order_local` is the order
/// between a record and the preceding sweep point of the same series.
pub fn write_csv(path: &Path, spec: &StudySpec, records: &[ErrorRecord]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_COLUMNS)?;
    let step = |r: &ErrorRecord| match spec.sweep {
        Sweep::Tau(_) => r.tau,
        Sweep::H(_) => r.h,
    };
    let mut prev: Option<&ErrorRecord> = None;
    for r in records {
        let order = match prev {
            Some(p) if p.scheme == r.scheme && p.norm == r.norm => {
                let o = (p.error / r.error).ln() / (step(p) / step(r)).ln();
                if o.is_finite() && p.error >= ERROR_FLOOR && r.error >= ERROR_FLOOR {
                    format!("{o:e}")
                } else {
                    String::new()
                }
            }
            _ => String::new(),
        };
        w.write_record([
            spec.label.clone(),
            r.scheme.name().to_string(),
            spec.problem.potential.to_string(),
            spec.problem.nonlinearity.to_string(),
            spec.problem.datum.id(),
            r.norm.to_string(),
            format!("{:e}", r.tau),
            format!("{:e}", r.h),
            format!("{:e}", r.error),
            order,
            r.blown_up.map_or(String::new(), |s| s.to_string()),
            format!("{:.6}", r.wall_seconds),
        ])?;
        prev = Some(r);
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Synthetic records with errors exactly `0.3 tau` (EWI-EFP) and
/// `0.2 tau^2` (Strang), used to check the fitting pipeline end to end.
pub fn self_test_study() -> (StudySpec, Vec<ErrorRecord>) {
    let taus = vec![0.1, 0.05, 0.025, 0.0125];
    let spec = StudySpec {
        label: "selftest".into(),
        problem: Problem {
            potential: Potential::None,
            nonlinearity: Nonlinearity::None,
            datum: InitialDatum::Type2Smooth,
            a: -16.0,
            b: 16.0,
            t_final: 1.0,
        },
        sweep: Sweep::Tau(taus.clone()),
        reference: ReferenceSpec {
            scheme: ReferenceScheme::Fixed(Scheme::Strang),
            tau: 1e-3,
            h: 0.125,
        },
        norms: vec![Norm::L2],
        schemes: vec![Scheme::EwiEfp, Scheme::Strang],
        fs_oversample: DEFAULT_FS_OVERSAMPLE,
        bands: vec![
            Band::Slope { scheme: Scheme::EwiEfp, norm: Norm::L2, target: 1.0, tol: 1e-12 },
            Band::Slope { scheme: Scheme::Strang, norm: Norm::L2, target: 2.0, tol: 1e-12 },
        ],
    };
    let records = [(Scheme::EwiEfp, 1), (Scheme::Strang, 2)]
        .into_iter()
        .flat_map(|(scheme, p)| {
            let c = if p == 1 { 0.3 } else { 0.2 };
            taus.iter().map(move |&tau| ErrorRecord {
                scheme,
                tau,
                h: 0.125,
                norm: Norm::L2,
                error: c * tau.powi(p),
                t_final: 1.0,
                wall_seconds: 0.0,
                blown_up: None,
            })
        })
        .collect();
    (spec, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn data_ids_and_values() {
        let d = InitialDatum::Type1H2;
        assert_eq!(d.eval(0.0, -16.0, 16.0), c(0.0, 0.0));
        assert!((d.eval(1.0, -16.0, 16.0).re - (-0.5f64).exp()).abs() < 1e-15);
        assert!((d.eval(-1.0, -16.0, 16.0).re + (-0.5f64).exp()).abs() < 1e-15);
        assert!((InitialDatum::H3Datum.eval(0.0, -16.0, 16.0).re - 1.0).abs() < 1e-15);
        let pw = InitialDatum::PlaneWave { amplitude: 2.0, mode: 1 };
        assert!((pw.eval(0.0, -16.0, 16.0) - c(-2.0, 0.0)).norm() < 1e-14);
        assert_eq!(InitialDatum::Type2Smooth.id(), "type2_smooth");
    }

    #[test]
    fn error_against_reference_examples() {
        let g = PeriodicGrid::new(-16.0, 16.0, 8).unwrap();
        let fine = g.with_modes(32).unwrap();
        let psi = SpectralField::new(g, (0..8).map(|k| c(k as f64, 1.0)).collect()).unwrap();
        let r = zero_pad(&psi, &fine).unwrap();
        assert_eq!(error_against_reference(&psi, &r, Norm::L2).unwrap(), 0.0);
        let one = SpectralField::pure_mode(fine, 0, c(1.0, 0.0)).unwrap();
        let zero = SpectralField::zeros(g);
        assert!((error_against_reference(&zero, &one, Norm::L2).unwrap() - 32f64.sqrt()).abs() < 1e-14);
        let eps = 1e-3;
        let mut bumped = psi.clone();
        bumped.coeffs_mut()[g.natural_index(1)] += eps;
        let e = error_against_reference(&bumped, &r, Norm::L2).unwrap();
        assert!((e - eps * 32f64.sqrt()).abs() < 1e-11 * e);
        let other = PeriodicGrid::new(0.0, 32.0, 32).unwrap();
        assert!(error_against_reference(&psi, &SpectralField::zeros(other), Norm::L2).is_err());
        assert!(error_against_reference(&r, &psi, Norm::L2).is_err());
    }

    fn small_study() -> StudySpec {
        StudySpec {
            label: "t".into(),
            problem: Problem {
                potential: Potential::None,
                nonlinearity: Nonlinearity::cubic(),
                datum: InitialDatum::Type2Smooth,
                a: -16.0,
                b: 16.0,
                t_final: 0.1,
            },
            sweep: Sweep::Tau(vec![1e-2, 5e-3]),
            reference: ReferenceSpec {
                scheme: ReferenceScheme::Fixed(Scheme::Strang),
                tau: 5e-4,
                h: 0.25,
            },
            norms: vec![Norm::L2, Norm::H1],
            schemes: vec![Scheme::EwiEfp],
            fs_oversample: 4,
            bands: vec![],
        }
    }

    #[test]
    fn validation() {
        assert!(small_study().validate().is_ok());
        let mut s = small_study();
        s.reference.tau = 1e-3;
        assert!(s.validate().is_err());
        let mut s = small_study();
        s.sweep = Sweep::Tau(vec![0.03]);
        assert!(s.validate().is_err());
        let mut s = small_study();
        s.sweep = Sweep::H(vec![0.5, 0.4]);
        assert!(s.validate().is_err());
        let mut s = small_study();
        s.sweep = Sweep::H(vec![1.0, 0.5]);
        assert!(s.validate().is_ok());
        s.reference.h = 0.5;
        assert!(s.validate().is_err());
        let mut s = small_study();
        s.schemes = vec![Scheme::EwiEfp, Scheme::EwiEfp];
        assert!(s.validate().is_err());
        let mut s = small_study();
        s.bands = vec![Band::Slope { scheme: Scheme::Strang, norm: Norm::L2, target: 1.0, tol: 0.1 }];
        assert!(s.validate().is_err());
    }

    #[test]
    fn single_point_study_matches_direct_call() {
        let mut spec = small_study();
        spec.sweep = Sweep::Tau(vec![1e-2]);
        let out = run_study(&spec, &RunOptions::default()).unwrap();
        assert_eq!(out.records.len(), 2);
        let reference = ReferenceRun::for_study(&spec, None).unwrap().solve(&spec, None).unwrap();
        let cfg = spec.run_config(Scheme::EwiEfp, 1e-2).unwrap();
        let psi0 = initial_field(Scheme::EwiEfp, &cfg.grid, |x| spec.problem.datum.eval(x, -16.0, 16.0), 4).unwrap();
        let direct = evolve(&cfg, &psi0).unwrap();
        let e = error_against_reference(&direct.field, &reference, Norm::L2).unwrap();
        assert_eq!(out.records[0].error, e);
        assert_eq!(out.records[0].norm, Norm::L2);
        assert!(out.fits.iter().all(|f| f.status == FitStatus::Floor));
    }

    #[test]
    fn self_test_orders_are_exact() {
        let (spec, records) = self_test_study();
        let (fits, bands) = summarize(&spec, &records);
        assert!(bands.iter().all(|b| b.passed));
        assert!((fits[0].fit.as_ref().unwrap().slope - 1.0).abs() < 1e-12);
        assert!((fits[1].fit.as_ref().unwrap().slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unachievable_band_fails() {
        let (mut spec, records) = self_test_study();
        spec.bands = vec![Band::Slope { scheme: Scheme::EwiEfp, norm: Norm::L2, target: 3.0, tol: 0.2 }];
        let (_, bands) = summarize(&spec, &records);
        assert!(!bands[0].passed);
    }

    #[test]
    fn non_monotone_series_is_flagged() {
        let (spec, mut records) = self_test_study();
        for r in records.iter_mut().filter(|r| r.scheme == Scheme::EwiEfp) {
            r.error = 1.0 / r.tau;
        }
        let (fits, bands) = summarize(&spec, &records);
        assert_eq!(fits[0].status, FitStatus::NonMonotone);
        assert!(!bands[0].passed);
    }

    #[test]
    fn csv_layout_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let (spec, records) = self_test_study();
        let path = dir.path().join("x.csv");
        write_csv(&path, &spec, &records).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "selftest");
        assert_eq!(first[1], "ewi_efp");
        assert_eq!(first[9], "");
        let second: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
        assert!((second[9].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(text.lines().count(), 1 + records.len());
        write_csv(&path, &spec, &records).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
    }

    #[test]
    fn config_round_trip() {
        let spec = small_study();
        let text = toml::to_string(&spec).unwrap();
        let back: StudySpec = toml::from_str(&text).unwrap();
        assert_eq!(back.sweep, spec.sweep);
        assert_eq!(back.reference.scheme, spec.reference.scheme);
        assert!(toml::from_str::<StudySpec>(&format!("{text}\nbogus = 1\n")).is_err());
    }
}
