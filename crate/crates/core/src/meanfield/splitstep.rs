//! Strang split-step propagator.

use num_complex::Complex64;

use super::{Fourier, GridSpec, Nonlinearity};
use crate::exec::Execution;

/// A real pointwise potential `V(r, t)` on a grid.
pub trait ExternalPotential: Sync {
    fn fill(&self, grid: &GridSpec, t: f64, out: &mut [f64]);

    /// When true the potential is computed once and reused.
    fn is_static(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeMode {
    Real,
    Imaginary,
}

/// One step is `K(h/2)·P(h)·K(h/2)`, with the potential sampled at the
/// midpoint of the step.
pub struct SplitStepper<'a> {
    grid: GridSpec,
    potential: &'a dyn ExternalPotential,
    nonlinearity: Nonlinearity,
    mode: TimeMode,
    h: f64,
    fourier: Fourier,
    kinetic: Vec<Complex64>,
    v: Vec<f64>,
    v_ready: bool,
    modulus: Vec<f64>,
    exec: Execution,
}

impl<'a> SplitStepper<'a> {
    pub fn new(
        grid: GridSpec,
        potential: &'a dyn ExternalPotential,
        nonlinearity: Nonlinearity,
        mode: TimeMode,
        h: f64,
        exec: Execution,
    ) -> Self {
        let kinetic = (0..grid.len())
            .map(|i| {
                let e = 0.5 * grid.k_squared(i) * 0.5 * h;
                match mode {
                    TimeMode::Real => Complex64::from_polar(1.0, -e),
                    TimeMode::Imaginary => Complex64::new((-e).exp(), 0.0),
                }
            })
            .collect();
        Self {
            grid,
            potential,
            nonlinearity,
            mode,
            h,
            fourier: Fourier::new(grid, exec),
            kinetic,
            v: vec![0.0; grid.len()],
            v_ready: false,
            modulus: match mode {
                TimeMode::Real => Vec::new(),
                TimeMode::Imaginary => vec![0.0; grid.len()],
            },
            exec,
        }
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    fn refresh_potential(&mut self, t: f64) {
        if !(self.v_ready && self.potential.is_static()) {
            self.potential.fill(&self.grid, t, &mut self.v);
            self.v_ready = true;
        }
    }

    /// `h·max|V + G(|ψ|)|` for the step starting at `t`.
    pub fn max_phase(&mut self, psi: &[Complex64], t: f64) -> f64 {
        self.refresh_potential(t + 0.5 * self.h);
        let nl = &self.nonlinearity;
        psi.iter()
            .zip(&self.v)
            .map(|(z, v)| (v + nl.value(z.norm())).abs())
            .fold(0.0, f64::max)
            * self.h
    }

    /// Advances `psi` from `t` to `t + h`.
    pub fn step(&mut self, psi: &mut [Complex64], t: f64) {
        // In imaginary time the kinetic half-step reshapes |ψ| at first
        // order, so G is frozen at the start of the step; the fixed point is
        // then an eigenvector of a linear Strang step and accurate to O(h²).
        // In real time |ψ| is unchanged by the potential step and the
        // midpoint modulus is used.
        if self.mode == TimeMode::Imaginary {
            self.modulus.iter_mut().zip(psi.iter()).for_each(|(m, z)| *m = z.norm());
        }
        self.kinetic_half(psi);
        self.refresh_potential(t + 0.5 * self.h);
        let (h, mode) = (self.h, self.mode);
        let nl = &self.nonlinearity;
        let v = &self.v;
        let frozen = &self.modulus;
        let n = self.grid.points();
        self.exec.for_each_chunk_mut(psi, n, |c, chunk| {
            let base = c * n;
            for (j, z) in chunk.iter_mut().enumerate() {
                let m = match mode {
                    TimeMode::Real => z.norm(),
                    TimeMode::Imaginary => frozen[base + j],
                };
                let e = (v[base + j] + nl.value(m)) * h;
                *z *= match mode {
                    TimeMode::Real => Complex64::from_polar(1.0, -e),
                    TimeMode::Imaginary => Complex64::new((-e).exp(), 0.0),
                };
            }
        });
        self.kinetic_half(psi);
    }

    fn kinetic_half(&self, psi: &mut [Complex64]) {
        self.fourier.forward(psi);
        psi.iter_mut().zip(&self.kinetic).for_each(|(z, k)| *z *= k);
        self.fourier.inverse(psi);
    }
}
