//! Potentials, nonlinearities and the combined operator `B(v) = V v + f(|v|^2) v`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{self, dft, extended_product, idft, GridField, PeriodicGrid, SpectralField};

/// Oversampling used for potentials without closed-form coefficients.
pub const POTENTIAL_OVERSAMPLE: usize = 64;

/// Real-valued external potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    None,
    Constant { value: f64 },
    /// `depth` on `(left, right)`, zero elsewhere.
    Box { depth: f64, left: f64, right: f64 },
    /// `|x - m|^gamma` with `m` the domain midpoint.
    Power { gamma: f64 },
    /// Values on a uniform periodic grid covering `[a, b)`, linearly interpolated.
    Sampled { values: Vec<f64> },
}

impl Potential {
    /// The square well `-4` on `(-2, 2)`.
    pub fn square_well() -> Self {
        Potential::Box {
            depth: -4.0,
            left: -2.0,
            right: 2.0,
        }
    }

    /// `|x|^0.76` on a domain centred at the origin.
    pub fn w14_power() -> Self {
        Potential::Power { gamma: 0.76 }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Potential::None)
    }

    pub fn validate(&self, a: f64, b: f64) -> Result<()> {
        match self {
            Potential::None => Ok(()),
            Potential::Constant { value } if value.is_finite() => Ok(()),
            Potential::Constant { value } => {
                Err(Error::Config(format!("non-finite constant potential {value}")))
            }
            Potential::Box { depth, left, right } => {
                if !depth.is_finite() {
                    return Err(Error::Config("non-finite box depth".into()));
                }
                if !(left < right && *left > a && *right < b) {
                    return Err(Error::Config(format!(
                        "box ({left}, {right}) must be a non-empty interval strictly inside ({a}, {b})"
                    )));
                }
                Ok(())
            }
            Potential::Power { gamma } if *gamma > 0.0 && gamma.is_finite() => Ok(()),
            Potential::Power { gamma } => {
                Err(Error::Config(format!("power potential needs gamma > 0, got {gamma}")))
            }
            Potential::Sampled { values } => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config(
                        "sampled potential needs finite values".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Point value on the domain `(a, b)`.
    pub fn value(&self, x: f64, a: f64, b: f64) -> f64 {
        match self {
            Potential::None => 0.0,
            Potential::Constant { value } => *value,
            Potential::Box { depth, left, right } => {
                if x > *left && x < *right {
                    *depth
                } else {
                    0.0
                }
            }
            Potential::Power { gamma } => (x - 0.5 * (a + b)).abs().powf(*gamma),
            Potential::Sampled { values } => {
                let m = values.len();
                let s = (x - a) / (b - a) * m as f64;
                let s = s.rem_euclid(m as f64);
                let i = (s.floor() as usize).min(m - 1);
                let t = s - i as f64;
                values[i] * (1.0 - t) + values[(i + 1) % m] * t
            }
        }
    }

    /// `||V||_inf` over the domain.
    pub fn sup_norm(&self, a: f64, b: f64) -> f64 {
        match self {
            Potential::None => 0.0,
            Potential::Constant { value } => value.abs(),
            Potential::Box { depth, .. } => depth.abs(),
            Potential::Power { gamma } => (0.5 * (b - a)).powf(*gamma),
            Potential::Sampled { values } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Eagerly computes everything a solver on `grid` needs.
    pub fn prepare(&self, grid: &PeriodicGrid) -> Result<PreparedPotential> {
        self.validate(grid.a(), grid.b())?;
        let coeffs_2n = potential_coeffs(self, grid, 2 * grid.n())?;
        let nodal = grid.nodes().map(|x| self.value(x, grid.a(), grid.b())).collect();
        Ok(PreparedPotential {
            potential: self.clone(),
            grid: *grid,
            coeffs_2n,
            nodal,
        })
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::None => write!(f, "none"),
            Potential::Constant { value } => write!(f, "const({value})"),
            Potential::Box { depth, left, right } => write!(f, "box({depth};{left};{right})"),
            Potential::Power { gamma } => write!(f, "power({gamma})"),
            Potential::Sampled { values } => write!(f, "sampled({})", values.len()),
        }
    }
}

/// A potential with its `P_{2N}` coefficients and nodal values on one grid.
#[derive(Debug, Clone)]
pub struct PreparedPotential {
    potential: Potential,
    grid: PeriodicGrid,
    coeffs_2n: SpectralField,
    nodal: Vec<f64>,
}

impl PreparedPotential {
    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// `P_{2N}(V)`.
    pub fn coeffs_2n(&self) -> &SpectralField {
        &self.coeffs_2n
    }

    /// `V(x_j)` for `j < N`.
    pub fn nodal(&self) -> &[f64] {
        &self.nodal
    }
}

/// Fourier coefficients `V^_l` for `l` in `T_M` on the domain of `grid`.
pub fn potential_coeffs(v: &Potential, grid: &PeriodicGrid, modes: usize) -> Result<SpectralField> {
    let target = grid.with_modes(modes)?;
    let (a, b) = (grid.a(), grid.b());
    v.validate(a, b)?;
    match v {
        Potential::None => Ok(SpectralField::zeros(target)),
        Potential::Constant { value } => {
            SpectralField::pure_mode(target, 0, Complex64::new(*value, 0.0))
        }
        Potential::Box { depth, left, right } => {
            let len = b - a;
            let coeffs = target
                .modes()
                .map(|l| {
                    if l == 0 {
                        Complex64::new(depth * (right - left) / len, 0.0)
                    } else {
                        let mu = target.mu(l);
                        let at = |x: f64| Complex64::from_polar(1.0, -mu * (x - a));
                        (at(*left) - at(*right)) / Complex64::new(0.0, mu) * (depth / len)
                    }
                })
                .collect();
            SpectralField::new(target, coeffs)
        }
        Potential::Power { .. } | Potential::Sampled { .. } => spectral::project(
            |x| Complex64::new(v.value(x, a, b), 0.0),
            &target,
            POTENTIAL_OVERSAMPLE,
        ),
    }
}

/// Nonlinear interaction `f(rho)` with `rho = |psi|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Nonlinearity {
    None,
    /// `lambda rho^sigma`.
    Power { lambda: f64, sigma: f64 },
    /// `lambda1 rho^sigma1 + lambda2 rho^sigma2`.
    TwoPower {
        lambda1: f64,
        sigma1: f64,
        lambda2: f64,
        sigma2: f64,
    },
    /// `lambda rho^sigma ln rho`, continued by zero at the origin.
    LogPower { lambda: f64, sigma: f64 },
}

impl Nonlinearity {
    /// Focusing cubic `f(rho) = -rho`.
    pub fn cubic() -> Self {
        Nonlinearity::Power {
            lambda: -1.0,
            sigma: 1.0,
        }
    }

    /// Focusing power law `f(rho) = -rho^sigma`.
    pub fn focusing(sigma: f64) -> Self {
        Nonlinearity::Power {
            lambda: -1.0,
            sigma,
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Nonlinearity::None)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Nonlinearity::None => true,
            Nonlinearity::Power { lambda, sigma } | Nonlinearity::LogPower { lambda, sigma } => {
                lambda.is_finite() && sigma > 0.0 && sigma.is_finite()
            }
            Nonlinearity::TwoPower {
                lambda1,
                sigma1,
                lambda2,
                sigma2,
            } => {
                lambda1.is_finite()
                    && lambda2.is_finite()
                    && sigma1 > 0.0
                    && sigma2 > sigma1
                    && sigma2.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid nonlinearity {self:?}")))
        }
    }

    /// `f(rho)`; negative densities are a domain error.
    pub fn f(&self, rho: f64) -> Result<f64> {
        if rho < 0.0 || rho.is_nan() {
            return Err(Error::Domain(format!("density must be non-negative, got {rho}")));
        }
        Ok(self.f_unchecked(rho))
    }

    #[inline]
    pub(crate) fn f_unchecked(&self, rho: f64) -> f64 {
        match *self {
            Nonlinearity::None => 0.0,
            Nonlinearity::Power { lambda, sigma } => {
                if sigma == 1.0 {
                    lambda * rho
                } else {
                    lambda * rho.powf(sigma)
                }
            }
            Nonlinearity::TwoPower {
                lambda1,
                sigma1,
                lambda2,
                sigma2,
            } => lambda1 * rho.powf(sigma1) + lambda2 * rho.powf(sigma2),
            Nonlinearity::LogPower { lambda, sigma } => {
                if rho == 0.0 {
                    0.0
                } else {
                    lambda * rho.powf(sigma) * rho.ln()
                }
            }
        }
    }

    /// `G(z) = f(|z|^2) z`.
    #[inline]
    pub fn g(&self, z: Complex64) -> Complex64 {
        z * self.f_unchecked(z.norm_sqr())
    }

    /// A Lipschitz constant of `G` on the disc `|z| <= m0`.
    pub fn lipschitz_bound(&self, m0: f64) -> Result<f64> {
        if m0 < 0.0 || m0.is_nan() {
            return Err(Error::Domain(format!("radius must be non-negative, got {m0}")));
        }
        if m0 == 0.0 {
            return Ok(0.0);
        }
        // |DG(z)| = (2 sigma + 1)|lambda| |z|^{2 sigma} for each power term
        let term = |lambda: f64, sigma: f64| lambda.abs() * (2.0 * sigma + 1.0) * m0.powf(2.0 * sigma);
        match *self {
            Nonlinearity::None => Ok(0.0),
            Nonlinearity::Power { lambda, sigma } => Ok(term(lambda, sigma)),
            Nonlinearity::TwoPower {
                lambda1,
                sigma1,
                lambda2,
                sigma2,
            } => Ok(term(lambda1, sigma1) + term(lambda2, sigma2)),
            Nonlinearity::LogPower { .. } => Err(Error::NotImplemented(
                "Lipschitz bound for the logarithmic nonlinearity".into(),
            )),
        }
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::None => write!(f, "none"),
            Nonlinearity::Power { lambda, sigma } => write!(f, "power({lambda};{sigma})"),
            Nonlinearity::TwoPower {
                lambda1,
                sigma1,
                lambda2,
                sigma2,
            } => write!(f, "two_power({lambda1};{sigma1};{lambda2};{sigma2})"),
            Nonlinearity::LogPower { lambda, sigma } => write!(f, "log_power({lambda};{sigma})"),
        }
    }
}

/// How the nonlinear part of `P_N B(psi)` is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearTreatment {
    /// Oversampled quadrature of the projection (Fourier spectral).
    Projected { oversample: usize },
    /// Collocation at the N nodes (Fourier pseudospectral).
    Collocated,
}

/// Spatial realization of `P_N B(psi)`: the potential part through the
/// alias-free extended product, the nonlinear part per `treatment`.
pub fn apply_b(
    v: &Potential,
    nl: &Nonlinearity,
    psi: &SpectralField,
    treatment: NonlinearTreatment,
) -> Result<SpectralField> {
    let grid = *psi.grid();
    nl.validate()?;
    let mut out = if v.is_none() {
        SpectralField::zeros(grid)
    } else {
        let v2n = potential_coeffs(v, &grid, 2 * grid.n())?;
        extended_product(&v2n, psi)?
    };
    if !nl.is_none() {
        let nonlinear = match treatment {
            NonlinearTreatment::Collocated => {
                let nodal = idft(psi);
                let g = nodal.values()[..grid.n()].iter().map(|&z| nl.g(z)).collect();
                dft(&GridField::new(grid, g)?)
            }
            NonlinearTreatment::Projected { oversample } => {
                if oversample == 0 || !oversample.is_power_of_two() {
                    return Err(Error::Config(format!(
                        "oversample must be a positive power of two, got {oversample}"
                    )));
                }
                let fine = grid.with_modes(grid.n() * oversample)?;
                let nodal = idft(&spectral::zero_pad(psi, &fine)?);
                let g = nodal.values()[..fine.n()].iter().map(|&z| nl.g(z)).collect();
                spectral::truncate(&dft(&GridField::new(fine, g)?), &grid)
            }
        };
        out.coeffs_mut()
            .iter_mut()
            .zip(nonlinear.coeffs())
            .for_each(|(o, n)| *o += n);
    }
    Ok(out)
}
