//! Periodic grids, discrete Fourier transforms and the spectral operators
//! built on them.
//!
//! Coefficients are stored in natural order `l = -N/2, ..., N/2 - 1` in every
//! public type. The FFT layout (`l mod N`) only appears in crate-internal
//! buffers.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn plan_forward(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

pub(crate) fn plan_inverse(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Uniform periodic mesh on `(a, b)` with `N` intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    a: f64,
    b: f64,
    n: usize,
}

impl PeriodicGrid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::Config(format!("invalid domain ({a}, {b})")));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::Config(format!(
                "mode count must be even and at least 4, got {n}"
            )));
        }
        Ok(Self { a, b, n })
    }

    /// Grid whose mesh size is `h`; `(b - a) / h` must be an even integer.
    pub fn with_mesh_size(a: f64, b: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config(format!("invalid mesh size {h}")));
        }
        let ratio = (b - a) / h;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.abs() {
            return Err(Error::Config(format!(
                "mesh size {h} does not divide the domain length {}",
                b - a
            )));
        }
        Self::new(a, b, n as usize)
    }

    /// Same domain, different mode count.
    pub fn with_modes(&self, n: usize) -> Result<Self> {
        Self::new(self.a, self.b, n)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    /// Node `x_j = a + j h` for `0 <= j <= N`.
    pub fn node(&self, j: usize) -> f64 {
        if j == self.n {
            self.b
        } else {
            self.a + j as f64 * self.h()
        }
    }

    /// The N distinct nodes `x_0, ..., x_{N-1}`.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.node(j))
    }

    /// Frequency `mu_l = 2 pi l / (b - a)`.
    pub fn mu(&self, l: i64) -> f64 {
        2.0 * PI * l as f64 / (self.b - self.a)
    }

    /// The index set `T_N` in natural order.
    pub fn modes(&self) -> std::ops::Range<i64> {
        let half = (self.n / 2) as i64;
        -half..half
    }

    pub fn same_domain(&self, other: &PeriodicGrid) -> bool {
        let scale = self.length().abs().max(1.0);
        (self.a - other.a).abs() <= 1e-12 * scale && (self.b - other.b).abs() <= 1e-12 * scale
    }

    pub(crate) fn check_same_domain(&self, other: &PeriodicGrid) -> Result<()> {
        if self.same_domain(other) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "domain mismatch: ({}, {}) vs ({}, {})",
                self.a, self.b, other.a, other.b
            )))
        }
    }

    pub(crate) fn natural_index(&self, l: i64) -> usize {
        (l + (self.n / 2) as i64) as usize
    }

    pub(crate) fn fft_index(&self, l: i64) -> usize {
        l.rem_euclid(self.n as i64) as usize
    }
}

/// An element of `X_N`, stored as its Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: PeriodicGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: PeriodicGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.n() {
            return Err(Error::Config(format!(
                "expected {} coefficients, got {}",
                grid.n(),
                coeffs.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n()],
        }
    }

    /// `amplitude * exp(i mu_l (x - a))`.
    pub fn pure_mode(grid: PeriodicGrid, l: i64, amplitude: Complex64) -> Result<Self> {
        if !grid.modes().contains(&l) {
            return Err(Error::Domain(format!(
                "mode {l} is outside T_N for N = {}",
                grid.n()
            )));
        }
        let mut field = Self::zeros(grid);
        field.coeffs[grid.natural_index(l)] = amplitude;
        Ok(field)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// Coefficients in natural order `l = -N/2 .. N/2 - 1`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of mode `l`, zero outside `T_N`.
    pub fn coeff(&self, l: i64) -> Complex64 {
        if self.grid.modes().contains(&l) {
            self.coeffs[self.grid.natural_index(l)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub(crate) fn to_fft_order(&self) -> Vec<Complex64> {
        let n = self.grid.n();
        let half = n / 2;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        out[..half].copy_from_slice(&self.coeffs[half..]);
        out[half..].copy_from_slice(&self.coeffs[..half]);
        out
    }

    pub(crate) fn from_fft_order(grid: PeriodicGrid, buf: &[Complex64]) -> Self {
        let n = grid.n();
        debug_assert_eq!(buf.len(), n);
        let half = n / 2;
        let mut coeffs = Vec::with_capacity(n);
        coeffs.extend_from_slice(&buf[half..]);
        coeffs.extend_from_slice(&buf[..half]);
        Self { grid, coeffs }
    }

    /// Coefficient-wise difference; both fields must share a grid.
    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        if self.grid.n() != other.grid.n() {
            return Err(Error::Config("mode count mismatch".into()));
        }
        self.grid.check_same_domain(&other.grid)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| x - y)
            .collect();
        Ok(Self {
            grid: self.grid,
            coeffs,
        })
    }
}

/// Nodal values `v_0, ..., v_N` with `v_0 = v_N` (the space `Y_N`).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: PeriodicGrid,
    values: Vec<Complex64>,
}

impl GridField {
    /// Accepts either the N distinct values (the endpoint is appended) or all
    /// N + 1 values, in which case the first and last must coincide.
    pub fn new(grid: PeriodicGrid, mut values: Vec<Complex64>) -> Result<Self> {
        let n = grid.n();
        if values.len() == n {
            values.push(values[0]);
        } else if values.len() == n + 1 {
            if values[0] != values[n] {
                return Err(Error::Domain(
                    "periodic endpoint value differs from the first node".into(),
                ));
            }
        } else {
            return Err(Error::Config(format!(
                "expected {} or {} nodal values, got {}",
                n,
                n + 1,
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at `x_0, ..., x_{N-1}`.
    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let mut values: Vec<Complex64> = grid.nodes().map(f).collect();
        values.push(values[0]);
        Self { grid, values }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// All N + 1 values.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Discrete mass `h * sum_{j<N} |v_j|^2`.
    pub fn mass(&self) -> f64 {
        self.grid.h() * self.values[..self.grid.n()].iter().map(|v| v.norm_sqr()).sum::<f64>()
    }
}

/// Discrete Fourier transform `v~_l = (1/N) sum_j v_j exp(-i mu_l (x_j - a))`.
pub fn dft(v: &GridField) -> SpectralField {
    let grid = *v.grid();
    let n = grid.n();
    let mut buf = v.values[..n].to_vec();
    plan_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    SpectralField::from_fft_order(grid, &buf)
}

/// Trigonometric interpolant evaluated at the nodes.
pub fn idft(c: &SpectralField) -> GridField {
    let grid = *c.grid();
    let mut buf = c.to_fft_order();
    plan_inverse(grid.n()).process(&mut buf);
    buf.push(buf[0]);
    GridField { grid, values: buf }
}

/// Evaluates the trigonometric polynomial at an arbitrary `x` in `[a, b]`.
pub fn evaluate(c: &SpectralField, x: f64) -> Result<Complex64> {
    let grid = c.grid();
    if !(x >= grid.a() && x <= grid.b()) {
        return Err(Error::Domain(format!(
            "x = {x} outside [{}, {}]",
            grid.a(),
            grid.b()
        )));
    }
    let shift = x - grid.a();
    Ok(grid
        .modes()
        .zip(c.coeffs())
        .map(|(l, &cl)| cl * Complex64::from_polar(1.0, grid.mu(l) * shift))
        .sum())
}

/// Approximate `L^2` projection onto `X_N`: samples `f` on an
/// `oversample * N` point grid, transforms and keeps the modes in `T_N`.
pub fn project(
    f: impl Fn(f64) -> Complex64,
    grid: &PeriodicGrid,
    oversample: usize,
) -> Result<SpectralField> {
    if oversample == 0 || !oversample.is_power_of_two() {
        return Err(Error::Config(format!(
            "oversample must be a positive power of two, got {oversample}"
        )));
    }
    let fine = grid.with_modes(grid.n() * oversample)?;
    let sampled = GridField::from_fn(fine, f);
    Ok(truncate(&dft(&sampled), grid))
}

/// Keeps the modes of `c` that lie in `T_N` of `coarse`.
pub(crate) fn truncate(c: &SpectralField, coarse: &PeriodicGrid) -> SpectralField {
    let coeffs = coarse.modes().map(|l| c.coeff(l)).collect();
    SpectralField {
        grid: *coarse,
        coeffs,
    }
}

/// `sqrt((b - a) sum_l (1 + mu_l^2)^alpha |c_l|^2)`.
pub fn sobolev_norm(c: &SpectralField, alpha: f64) -> f64 {
    let grid = c.grid();
    let sum: f64 = grid
        .modes()
        .zip(c.coeffs())
        .map(|(l, cl)| {
            let w = if alpha == 0.0 {
                1.0
            } else {
                (1.0 + grid.mu(l).powi(2)).powf(alpha)
            };
            w * cl.norm_sqr()
        })
        .sum();
    (grid.length() * sum).sqrt()
}

/// Embeds `c` into `X_M` for a finer grid on the same domain.
pub fn zero_pad(c: &SpectralField, fine_grid: &PeriodicGrid) -> Result<SpectralField> {
    c.grid().check_same_domain(fine_grid)?;
    if fine_grid.n() < c.grid().n() {
        return Err(Error::Config(format!(
            "cannot pad {} modes into {}",
            c.grid().n(),
            fine_grid.n()
        )));
    }
    let mut out = SpectralField::zeros(*fine_grid);
    for (l, &cl) in c.grid().modes().zip(c.coeffs()) {
        out.coeffs[fine_grid.natural_index(l)] = cl;
    }
    Ok(out)
}

/// Copies the `T_n` modes of an FFT-ordered buffer into a longer (or equal)
/// FFT-ordered buffer, zeroing the rest.
pub(crate) fn embed_fft_order(src: &[Complex64], dst: &mut [Complex64]) {
    let n = src.len();
    let m = dst.len();
    debug_assert!(m >= n);
    let half = n / 2;
    dst.fill(Complex64::new(0.0, 0.0));
    dst[..half].copy_from_slice(&src[..half]);
    dst[m - half..].copy_from_slice(&src[half..]);
}

/// Inverse of [`embed_fft_order`]: keeps the `T_n` modes of `src`.
pub(crate) fn truncate_fft_order(src: &[Complex64], dst: &mut [Complex64]) {
    let n = dst.len();
    let m = src.len();
    debug_assert!(m >= n);
    let half = n / 2;
    dst[..half].copy_from_slice(&src[..half]);
    dst[half..].copy_from_slice(&src[m - half..]);
}

/// `P_N (V I_N psi)` for a potential given by its `P_{2N}` coefficients,
/// computed on a 4N-point grid where the product is alias-free.
///
/// Holds the potential's nodal values on the extended grid and the FFT plans,
/// so repeated application per time step allocates nothing.
pub(crate) struct ExtendedProduct {
    n: usize,
    potential_nodes: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl ExtendedProduct {
    pub(crate) fn new(potential_2n: &SpectralField) -> Self {
        let n = potential_2n.grid().n() / 2;
        let m = 4 * n;
        let forward = plan_forward(m);
        let inverse = plan_inverse(m);
        let mut potential_nodes = vec![Complex64::new(0.0, 0.0); m];
        embed_fft_order(&potential_2n.to_fft_order(), &mut potential_nodes);
        inverse.process(&mut potential_nodes);
        // fold the 1/(4N) of the forward transform into the potential
        let scale = 1.0 / m as f64;
        potential_nodes.iter_mut().for_each(|v| *v *= scale);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            potential_nodes,
            forward,
            inverse,
            buf: vec![Complex64::new(0.0, 0.0); m],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    /// Interpolates `psi` (FFT order, length N) onto the 4N-point grid.
    pub(crate) fn load(&mut self, psi: &[Complex64]) {
        debug_assert_eq!(psi.len(), self.n);
        embed_fft_order(psi, &mut self.buf);
        self.inverse
            .process_with_scratch(&mut self.buf, &mut self.scratch);
    }

    /// Nodal values of `I_N psi` on the 4N grid after [`Self::load`]; every
    /// fourth entry is a node of the N-point grid.
    pub(crate) fn nodes(&self) -> &[Complex64] {
        &self.buf
    }

    /// Multiplies by the potential and writes `P_N(...)` in FFT order.
    pub(crate) fn finish(&mut self, out: &mut [Complex64]) {
        self.buf
            .iter_mut()
            .zip(&self.potential_nodes)
            .for_each(|(u, v)| *u *= v);
        self.forward
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        truncate_fft_order(&self.buf, out);
    }

    pub(crate) fn apply(&mut self, psi: &[Complex64], out: &mut [Complex64]) {
        self.load(psi);
        self.finish(out);
    }
}

/// `P_N I_{4N}(P_{2N}(V) I_N psi)`, exact for `V` in `X_{2N}`.
///
/// `potential_2n` holds the 2N coefficients of `P_{2N}(V)`; `psi` the N
/// coefficients of the iterate, on the same domain.
pub fn extended_product(potential_2n: &SpectralField, psi: &SpectralField) -> Result<SpectralField> {
    let n = psi.grid().n();
    if potential_2n.grid().n() != 2 * n {
        return Err(Error::Config(format!(
            "potential must carry {} modes for an N = {n} field, got {}",
            2 * n,
            potential_2n.grid().n()
        )));
    }
    psi.grid().check_same_domain(potential_2n.grid())?;
    let mut plan = ExtendedProduct::new(potential_2n);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    plan.apply(&psi.to_fft_order(), &mut out);
    Ok(SpectralField::from_fft_order(*psi.grid(), &out))
}
