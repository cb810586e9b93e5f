//! Uniform periodic grids, wavefunctions on them, and FFTs over them.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::MeanFieldError;
use crate::exec::Execution;

/// A `dim`-dimensional grid of `points` per axis covering `[-L, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    extent: f64,
    points: usize,
}

impl GridSpec {
    pub fn new(dim: usize, extent: f64, points: usize) -> Result<Self, MeanFieldError> {
        if dim != 1 && dim != 2 {
            return Err(MeanFieldError::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if points < 64 || !points.is_power_of_two() {
            return Err(MeanFieldError::InvalidGrid(format!(
                "points per axis must be a power of two >= 64, got {points}"
            )));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(MeanFieldError::InvalidGrid(format!("extent must be positive, got {extent}")));
        }
        Ok(Self { dim, extent, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Half-width `L`.
    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.points as f64
    }

    /// Total number of grid values.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// `x_j = −L + j·dx`.
    pub fn coordinate(&self, j: usize) -> f64 {
        -self.extent + self.spacing() * j as f64
    }

    /// Angular wavenumber of FFT bin `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let n = self.points as isize;
        let j = j as isize;
        let m = if j < n / 2 { j } else { j - n };
        2.0 * PI * m as f64 / (2.0 * self.extent)
    }

    /// Coordinates of flat index `idx` (row-major, first axis slowest);
    /// the second entry is zero in 1D.
    pub fn position(&self, idx: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.coordinate(idx), 0.0],
            _ => [self.coordinate(idx / self.points), self.coordinate(idx % self.points)],
        }
    }

    /// `|k|²` at flat index `idx`.
    pub fn k_squared(&self, idx: usize) -> f64 {
        match self.dim {
            1 => self.wavenumber(idx).powi(2),
            _ => self.wavenumber(idx / self.points).powi(2) + self.wavenumber(idx % self.points).powi(2),
        }
    }

    /// Wave-vector at flat index `idx`.
    pub fn k_vector(&self, idx: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.wavenumber(idx), 0.0],
            _ => [self.wavenumber(idx / self.points), self.wavenumber(idx % self.points)],
        }
    }

    /// True for indices within `width` points of any edge.
    pub fn near_boundary(&self, idx: usize, width: usize) -> bool {
        let edge = |j: usize| j < width || j + width >= self.points;
        match self.dim {
            1 => edge(idx),
            _ => edge(idx / self.points) || edge(idx % self.points),
        }
    }
}

/// A complex field on a [`GridSpec`] at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWavefunction {
    pub psi: Vec<Complex64>,
    pub grid: GridSpec,
    pub t: f64,
}

impl GridWavefunction {
    pub fn new(grid: GridSpec, psi: Vec<Complex64>, t: f64) -> Result<Self, MeanFieldError> {
        if psi.len() != grid.len() {
            return Err(MeanFieldError::GridMismatch(format!(
                "{} values for a grid of {}",
                psi.len(),
                grid.len()
            )));
        }
        Ok(Self { psi, grid, t })
    }

    pub fn from_fn<F: Fn([f64; 2]) -> Complex64>(grid: GridSpec, f: F) -> Self {
        let psi = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self { psi, grid, t: 0.0 }
    }

    /// `∫|ψ|² dV`.
    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn scale_to_norm(&mut self, target: f64) {
        let s = (target / self.norm()).sqrt();
        self.psi.iter_mut().for_each(|z| *z *= s);
    }

    /// Largest density within `width` points of the boundary, relative to the peak.
    pub fn boundary_fraction(&self, width: usize) -> f64 {
        let mut peak = 0.0f64;
        let mut edge = 0.0f64;
        for (i, z) in self.psi.iter().enumerate() {
            let d = z.norm_sqr();
            peak = peak.max(d);
            if self.grid.near_boundary(i, width) {
                edge = edge.max(d);
            }
        }
        if peak > 0.0 {
            edge / peak
        } else {
            0.0
        }
    }

    /// `(∫|ψ − φ|² dV)^{1/2}`.
    pub fn l2_distance(&self, other: &Self) -> f64 {
        let s: f64 = self.psi.iter().zip(&other.psi).map(|(a, b)| (a - b).norm_sqr()).sum();
        (s * self.grid.cell_volume()).sqrt()
    }
}

/// Forward/inverse FFT over a grid; the inverse is normalized.
#[derive(Clone)]
pub struct Fourier {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    exec: Execution,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("grid", &self.grid).finish()
    }
}

impl Fourier {
    pub fn new(grid: GridSpec, exec: Execution) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.points()),
            inverse: planner.plan_fft_inverse(grid.points()),
            exec,
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let s = 1.0 / self.grid.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.points();
        match self.grid.dim() {
            1 => plan.process(data),
            _ => {
                // rows, transpose, rows, transpose back
                self.exec.for_each_chunk_mut(data, n, |_, row| plan.process(row));
                transpose(data, n);
                self.exec.for_each_chunk_mut(data, n, |_, row| plan.process(row));
                transpose(data, n);
            }
        }
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(3, 1.0, 64).is_err());
        assert!(GridSpec::new(1, 1.0, 32).is_err());
        assert!(GridSpec::new(1, 1.0, 100).is_err());
        assert!(GridSpec::new(1, -1.0, 64).is_err());
        let g = GridSpec::new(2, 8.0, 64).unwrap();
        assert_eq!(g.len(), 4096);
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.coordinate(32), 0.0);
        assert_eq!(g.position(64 * 3 + 5), [g.coordinate(3), g.coordinate(5)]);
    }

    #[test]
    fn wavenumbers_follow_fft_order() {
        let g = GridSpec::new(1, PI, 64).unwrap();
        assert_eq!(g.wavenumber(0), 0.0);
        assert!((g.wavenumber(1) - 1.0).abs() < 1e-15);
        assert!((g.wavenumber(63) + 1.0).abs() < 1e-15);
        assert!((g.wavenumber(32) + 32.0).abs() < 1e-12);
    }

    #[test]
    fn fft_round_trip_2d() {
        let g = GridSpec::new(2, 4.0, 64).unwrap();
        let psi = GridWavefunction::from_fn(g, |[x, y]| Complex64::new((-x * x - 0.5 * y * y).exp(), x * y));
        for exec in [Execution::Sequential, Execution::Parallel] {
            let f = Fourier::new(g, exec);
            let mut data = psi.psi.clone();
            f.forward(&mut data);
            f.inverse(&mut data);
            let err = data.iter().zip(&psi.psi).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-13);
        }
    }

    #[test]
    fn spectral_derivative_of_plane_wave() {
        let g = GridSpec::new(1, PI, 64).unwrap();
        let f = Fourier::new(g, Execution::Sequential);
        let mut data: Vec<Complex64> = (0..64).map(|j| Complex64::new(0.0, 3.0 * g.coordinate(j)).exp()).collect();
        f.forward(&mut data);
        let peak = data.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap().0;
        assert!((g.wavenumber(peak) - 3.0).abs() < 1e-12);
    }
}
