//! Periodic grid, Fourier transforms and the spectral differential /
//! projection operators everything else is built from.
//!
//! The domain is the flat torus `[0, 2π)^n` sampled on a uniform grid of
//! `m` points per axis, so integer wavevectors `k ∈ ℤ^n` index the Fourier
//! modes `exp(i⟨k,x⟩)` directly.

mod fft;
pub mod fields;
mod ops;

pub use ops::{
    dealias, dealias_spectral, derivative_spectral, dft_forward, dft_forward_scalar, dft_inverse,
    dft_inverse_scalar, directional_derivative, divergence, divergence_norm, gradient,
    grad_tensor, inner_product_l2,
    inner_product_scalar, l2_norm, l2_norm_scalar, leray_project, leray_project_spectral,
    solve_poisson, transpose_gradient_product, vector_laplacian,
};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Uniform periodic grid on `[0, 2π)^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    n: usize,
    m: usize,
}

impl GridSpec {
    /// `n`: spatial dimension (2 or 3), `m`: grid points per axis
    /// (power of two, at least 8).
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if !(n == 2 || n == 3) {
            return Err(Error::InvalidGrid(format!("dimension n = {n}, expected 2 or 3")));
        }
        if m < 8 {
            return Err(Error::InvalidGrid(format!("m = {m} < 8")));
        }
        if !m.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("m = {m} is not a power of two")));
        }
        Ok(Self { n, m })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn points_per_axis(&self) -> usize {
        self.m
    }

    /// Total number of grid nodes, `m^n`.
    #[inline]
    pub fn len(&self) -> usize {
        self.m.pow(self.n as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing `2π/m`.
    #[inline]
    pub fn dx(&self) -> f64 {
        std::f64::consts::TAU / self.m as f64
    }

    /// Cell volume `(2π/m)^n`, the quadrature weight of one node.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.n as i32)
    }

    /// Domain volume `(2π)^n`.
    #[inline]
    pub fn volume(&self) -> f64 {
        std::f64::consts::TAU.powi(self.n as i32)
    }

    /// Largest retained wavenumber under the 2/3 dealiasing rule.
    #[inline]
    pub fn dealias_cutoff(&self) -> i64 {
        (self.m / 3) as i64
    }

    /// Signed frequency of DFT bin `j` along one axis. The Nyquist bin
    /// maps to `+m/2`; it is removed by dealiasing before any odd
    /// derivative acts on it.
    #[inline]
    pub fn freq(&self, j: usize) -> i64 {
        if j <= self.m / 2 {
            j as i64
        } else {
            j as i64 - self.m as i64
        }
    }

    /// Cartesian coordinates of node `idx` (row-major, axis 0 slowest).
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        let mut rem = idx;
        for a in (0..self.n).rev() {
            x[a] = (rem % self.m) as f64 * self.dx();
            rem /= self.m;
        }
        x
    }

    /// Calls `f(idx, k, |k|²)` for every mode, with `k` the signed integer
    /// wavevector as floats.
    pub(crate) fn for_each_mode(&self, mut f: impl FnMut(usize, &[f64; 3], f64)) {
        let m = self.m;
        let mut digits = [0usize; 3];
        let mut k = [0.0f64; 3];
        let mut k2 = 0.0f64;
        for a in 0..self.n {
            k[a] = self.freq(0) as f64;
        }
        for idx in 0..self.len() {
            f(idx, &k, k2);
            // odometer increment over the trailing axis
            let mut a = self.n;
            loop {
                if a == 0 {
                    break;
                }
                a -= 1;
                digits[a] += 1;
                if digits[a] == m {
                    digits[a] = 0;
                    let old = k[a];
                    k[a] = self.freq(0) as f64;
                    k2 += k[a] * k[a] - old * old;
                } else {
                    let old = k[a];
                    k[a] = self.freq(digits[a]) as f64;
                    k2 += k[a] * k[a] - old * old;
                    break;
                }
            }
        }
    }
}

/// Real scalar samples on a [`GridSpec`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, data: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64; 3]) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            data.push(f(&grid.coords(idx)));
        }
        Self { grid, data }
    }

    pub fn from_samples(grid: GridSpec, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), grid.len(), "sample count does not match grid");
        Self { grid, data }
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn samples(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Self) {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }
}

/// Real vector field: `n` scalar components on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    comps: Vec<ScalarField>,
}

impl VectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, comps: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect() }
    }

    /// Sample `f(x, component)` at every node.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64; 3], usize) -> f64) -> Self {
        let comps = (0..grid.dim())
            .map(|c| ScalarField::from_fn(grid, |x| f(x, c)))
            .collect();
        Self { grid, comps }
    }

    pub fn from_components(comps: Vec<ScalarField>) -> Self {
        assert!(!comps.is_empty());
        let grid = comps[0].grid;
        assert_eq!(comps.len(), grid.dim(), "component count does not match grid dimension");
        assert!(comps.iter().all(|c| c.grid == grid), "grid mismatch");
        Self { grid, comps }
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn component(&self, c: usize) -> &ScalarField {
        &self.comps[c]
    }

    #[inline]
    pub fn component_mut(&mut self, c: usize) -> &mut ScalarField {
        &mut self.comps[c]
    }

    #[inline]
    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.is_finite())
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.comps {
            c.scale(s);
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Self) {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            a.axpy(s, b);
        }
    }

    /// Vector value at node `idx`.
    #[inline]
    pub fn at(&self, idx: usize) -> [f64; 3] {
        let mut v = [0.0; 3];
        for c in 0..self.grid.dim() {
            v[c] = self.comps[c].data[idx];
        }
        v
    }

    /// Pointwise squared Euclidean norm as a scalar field.
    pub fn pointwise_norm2(&self) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid);
        for c in &self.comps {
            for (o, v) in out.data.iter_mut().zip(&c.data) {
                *o += v * v;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.data.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

/// Complex Fourier coefficients of one scalar component (full spectrum,
/// conjugate-symmetric for real fields; forward transform unnormalized).
#[derive(Debug, Clone)]
pub struct SpectralScalar {
    grid: GridSpec,
    data: Vec<Complex64>,
}

impl SpectralScalar {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, data: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn coefficients(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }
}

/// Spectral representation of a vector field.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: GridSpec,
    comps: Vec<SpectralScalar>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, comps: (0..grid.dim()).map(|_| SpectralScalar::zeros(grid)).collect() }
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn component(&self, c: usize) -> &SpectralScalar {
        &self.comps[c]
    }

    #[inline]
    pub fn component_mut(&mut self, c: usize) -> &mut SpectralScalar {
        &mut self.comps[c]
    }

    pub fn components(&self) -> &[SpectralScalar] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [SpectralScalar] {
        &mut self.comps
    }

    pub fn from_components(comps: Vec<SpectralScalar>) -> Self {
        assert!(!comps.is_empty());
        let grid = comps[0].grid;
        assert_eq!(comps.len(), grid.dim());
        Self { grid, comps }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Self) {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += s * y;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(GridSpec::new(1, 32).is_err());
        assert!(GridSpec::new(4, 32).is_err());
        assert!(GridSpec::new(2, 4).is_err());
        assert!(GridSpec::new(2, 24).is_err());
        assert!(GridSpec::new(2, 32).is_ok());
        assert!(GridSpec::new(3, 8).is_ok());
    }

    #[test]
    fn coords_are_row_major() {
        let g = GridSpec::new(2, 8).unwrap();
        let x = g.coords(1);
        assert_eq!(x[0], 0.0);
        assert!((x[1] - g.dx()).abs() < 1e-15);
        let x = g.coords(8);
        assert!((x[0] - g.dx()).abs() < 1e-15);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn mode_iteration_matches_freqs() {
        let g = GridSpec::new(2, 8).unwrap();
        let mut seen = 0;
        g.for_each_mode(|idx, k, k2| {
            let j0 = idx / 8;
            let j1 = idx % 8;
            assert_eq!(k[0], g.freq(j0) as f64);
            assert_eq!(k[1], g.freq(j1) as f64);
            assert!((k2 - (k[0] * k[0] + k[1] * k[1])).abs() < 1e-12);
            seen += 1;
        });
        assert_eq!(seen, 64);
    }
}
