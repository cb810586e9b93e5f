//! Two particles in a 1D harmonic trap with a pair interaction that depends
//! only on `x₁ − x₂`.
//!
//! In Jacobi coordinates `ρ = (x₁ + x₂)/2`, `ξ = x₁ − x₂` the Hamiltonian
//! splits into a center-of-mass oscillator of frequency `√a` and an
//! internal part, so the spectrum is a set of equally spaced ladders
//! `E_I(j) + √a(k + ½)`. The displacement transform acts on `ρ` alone and
//! leaves the internal wavefunction untouched.

mod eigen;
mod ladder;

use serde::Serialize;
use thiserror::Error;

use num_complex::Complex64;

pub use eigen::{lowest, EigenOptions, EigenPairs, NotConverged, SymmetricOperator};
pub use ladder::{ladder_decompose, LadderAssignment, LadderFit, LADDER_BOUND};

use crate::classical::{phase_field, ClassicalState};
use crate::exec::Execution;
use crate::meanfield::{
    evolve_with, shift_with_phase, ExternalPotential, Fourier, GridSpec, GridWavefunction, MeanFieldError, Nonlinearity,
};
use nalgebra::Vector3;

/// Largest residual, in units of `√a`, for joining an existing ladder.
pub const LADDER_MATCH: f64 = 1e-2;

/// Minimum grid points per resolved length scale.
pub const POINTS_PER_LENGTH: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FewBodyError {
    #[error("grid spacing {spacing:.4} under-resolves the {scale} length {length:.4}; need at least {required_points} points per axis")]
    Resolution {
        scale: &'static str,
        length: f64,
        spacing: f64,
        required_points: usize,
    },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("eigensolver stopped after {iterations} iterations with residual {residual:.3e}")]
    NoConvergence { residual: f64, iterations: usize },
    #[error(transparent)]
    MeanField(#[from] MeanFieldError),
}

impl FewBodyError {
    pub fn kind(&self) -> crate::ErrorKind {
        match self {
            FewBodyError::NoConvergence { .. } => crate::ErrorKind::Numerical,
            FewBodyError::MeanField(e) => e.kind(),
            _ => crate::ErrorKind::Validation,
        }
    }
}

/// Pair interaction `V(x₁ − x₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Interaction {
    /// `κ(x₁ − x₂)²/2`.
    Harmonic { kappa: f64 },
    /// `g·exp(−(x₁ − x₂)²/(2s²))`.
    Gaussian { g: f64, s: f64 },
}

impl Interaction {
    pub fn value(&self, d: f64) -> f64 {
        match *self {
            Interaction::Harmonic { kappa } => 0.5 * kappa * d * d,
            Interaction::Gaussian { g, s } => g * (-d * d / (2.0 * s * s)).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExchangeParity {
    Symmetric,
    Antisymmetric,
}

impl ExchangeParity {
    fn sign(self) -> f64 {
        match self {
            ExchangeParity::Symmetric => 1.0,
            ExchangeParity::Antisymmetric => -1.0,
        }
    }
}

/// Two particles with unit mass on a square 2D grid over `(x₁, x₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FewBodyProblem {
    pub a: f64,
    pub interaction: Interaction,
    pub grid: GridSpec,
}

impl FewBodyProblem {
    pub fn new(a: f64, interaction: Interaction, grid: GridSpec) -> Result<Self, FewBodyError> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(FewBodyError::Invalid(format!("trap strength must be positive, got {a}")));
        }
        if grid.dim() != 2 {
            return Err(FewBodyError::Invalid("the two-particle grid must be 2D".into()));
        }
        match interaction {
            Interaction::Harmonic { kappa } if !(a + 2.0 * kappa > 0.0) => {
                return Err(FewBodyError::Invalid(format!(
                    "relative motion is unbound for κ = {kappa} (need a + 2κ > 0)"
                )))
            }
            Interaction::Gaussian { g, s } if !(s > 0.0 && g.is_finite()) => {
                return Err(FewBodyError::Invalid(format!("invalid Gaussian interaction g = {g}, s = {s}")))
            }
            _ => {}
        }
        Ok(Self { a, interaction, grid })
    }

    /// `½a(x₁² + x₂²) + V(x₁ − x₂)`.
    pub fn potential(&self, x1: f64, x2: f64) -> f64 {
        0.5 * self.a * (x1 * x1 + x2 * x2) + self.interaction.value(x1 - x2)
    }

    /// Every length the grid must resolve, with its name.
    pub fn length_scales(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![("center-of-mass oscillator", self.a.powf(-0.25))];
        match self.interaction {
            Interaction::Harmonic { kappa } => out.push(("relative oscillator", (self.a + 2.0 * kappa).powf(-0.25))),
            Interaction::Gaussian { s, .. } => out.push(("interaction range", s)),
        }
        out
    }

    pub fn check_resolution(&self) -> Result<(), FewBodyError> {
        let h = self.grid.spacing();
        for (scale, length) in self.length_scales() {
            if length / h < POINTS_PER_LENGTH {
                let needed = (POINTS_PER_LENGTH * 2.0 * self.grid.extent() / length).ceil() as usize;
                return Err(FewBodyError::Resolution {
                    scale,
                    length,
                    spacing: h,
                    required_points: needed.next_power_of_two(),
                });
            }
        }
        Ok(())
    }

    /// Closed-form spectrum for a harmonic interaction: the lowest `k`
    /// values of `√a(k + ½) + √(a + 2κ)(j + ½)`.
    pub fn harmonic_levels(&self, count: usize) -> Option<Vec<f64>> {
        let Interaction::Harmonic { kappa } = self.interaction else {
            return None;
        };
        let (w_com, w_rel) = (self.a.sqrt(), (self.a + 2.0 * kappa).sqrt());
        let mut e: Vec<f64> = (0..count)
            .flat_map(|k| (0..count).map(move |j| w_com * (k as f64 + 0.5) + w_rel * (j as f64 + 0.5)))
            .collect();
        e.sort_by(f64::total_cmp);
        e.truncate(count);
        Some(e)
    }
}

impl ExternalPotential for FewBodyProblem {
    fn fill(&self, grid: &GridSpec, _t: f64, out: &mut [f64]) {
        for (i, v) in out.iter_mut().enumerate() {
            let [x1, x2] = grid.position(i);
            *v = self.potential(x1, x2);
        }
    }

    fn is_static(&self) -> bool {
        true
    }
}

/// Second-order central-difference Hamiltonian with zero (Dirichlet) values
/// outside the grid.
#[derive(Debug, Clone)]
pub struct GridHamiltonian {
    points: usize,
    spacing: f64,
    diag: Vec<f64>,
    off: f64,
}

/// Builds `−½(∂₁² + ∂₂²) + V` on the problem grid after the resolution check.
pub fn build_hamiltonian(problem: &FewBodyProblem) -> Result<GridHamiltonian, FewBodyError> {
    problem.check_resolution()?;
    let grid = problem.grid;
    let h = grid.spacing();
    let kinetic_diag = 2.0 / (h * h);
    let diag = (0..grid.len())
        .map(|i| {
            let [x1, x2] = grid.position(i);
            kinetic_diag + problem.potential(x1, x2)
        })
        .collect();
    Ok(GridHamiltonian {
        points: grid.points(),
        spacing: h,
        diag,
        off: -0.5 / (h * h),
    })
}

impl GridHamiltonian {
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Nonzero entries as `(row, column, value)`.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let n = self.points;
        let mut out = Vec::with_capacity(5 * n * n);
        for i in 0..n {
            for j in 0..n {
                let row = i * n + j;
                out.push((row, row, self.diag[row]));
                if i > 0 {
                    out.push((row, row - n, self.off));
                }
                if i + 1 < n {
                    out.push((row, row + n, self.off));
                }
                if j > 0 {
                    out.push((row, row - 1, self.off));
                }
                if j + 1 < n {
                    out.push((row, row + 1, self.off));
                }
            }
        }
        out
    }
}

impl SymmetricOperator for GridHamiltonian {
    fn dim(&self) -> usize {
        self.points * self.points
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.points;
        let off = self.off;
        let zeros = vec![0.0; n];
        for i in 0..n {
            let row = &x[i * n..(i + 1) * n];
            let up = if i > 0 { &x[(i - 1) * n..i * n] } else { &zeros[..] };
            let down = if i + 1 < n { &x[(i + 1) * n..(i + 2) * n] } else { &zeros[..] };
            let d = &self.diag[i * n..(i + 1) * n];
            let out = &mut y[i * n..(i + 1) * n];
            out[0] = d[0] * row[0] + off * (row[1] + up[0] + down[0]);
            out[n - 1] = d[n - 1] * row[n - 1] + off * (row[n - 2] + up[n - 1] + down[n - 1]);
            for ((((o, w), dd), u), v) in out[1..n - 1]
                .iter_mut()
                .zip(row.windows(3))
                .zip(&d[1..n - 1])
                .zip(&up[1..n - 1])
                .zip(&down[1..n - 1])
            {
                *o = dd * w[1] + off * (w[0] + w[2] + u + v);
            }
        }
    }

    fn upper_bound(&self) -> f64 {
        let max_diag = self.diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max_diag + 4.0 * self.off.abs()
    }
}

/// Replaces `v` with `(v ± Pv)/2`, `P` swapping the two particles.
pub fn project_exchange(v: &mut [f64], points: usize, parity: ExchangeParity) {
    let s = parity.sign();
    for i in 0..points {
        v[i * points + i] *= 0.5 * (1.0 + s);
        for j in (i + 1)..points {
            let (a, b) = (i * points + j, j * points + i);
            let sym = 0.5 * (v[a] + s * v[b]);
            v[a] = sym;
            v[b] = s * sym;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FewBodySpectrum {
    pub eigenvalues: Vec<f64>,
    pub parity: Vec<ExchangeParity>,
    /// `‖Hv − Ev‖/‖v‖` for each pair.
    pub residuals: Vec<f64>,
    /// Eigenfunctions normalized to `∫|Ψ|² dx₁dx₂ = 1`.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    #[serde(skip)]
    pub grid: Option<GridSpec>,
    pub ladder_fit: Option<LadderFit>,
}

impl FewBodySpectrum {
    /// Eigenfunction `i` as a complex grid wavefunction.
    pub fn state(&self, i: usize) -> GridWavefunction {
        let grid = self.grid.expect("spectrum carries its grid");
        let psi = self.eigenvectors[i].iter().map(|&v| Complex64::new(v, 0.0)).collect();
        GridWavefunction::new(grid, psi, 0.0).expect("eigenvector matches its grid")
    }

    /// Largest `|⟨vᵢ, vⱼ⟩ − δᵢⱼ|` under the grid measure.
    pub fn orthonormality_error(&self) -> f64 {
        let dv = self.grid.map(|g| g.cell_volume()).unwrap_or(1.0);
        let mut worst = 0.0f64;
        for (i, a) in self.eigenvectors.iter().enumerate() {
            for (j, b) in self.eigenvectors.iter().enumerate().skip(i) {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * dv;
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// The `k` lowest eigenpairs, found separately in the exchange-symmetric and
/// antisymmetric sectors and merged.
pub fn diagonalize(
    h: &GridHamiltonian,
    grid: GridSpec,
    k: usize,
    opts: &EigenOptions,
    exec: Execution,
) -> Result<FewBodySpectrum, FewBodyError> {
    if k == 0 || k * 8 > h.dim() {
        return Err(FewBodyError::Invalid(format!("cannot request {k} eigenpairs of a {}-point grid", h.dim())));
    }
    let n = h.points();
    let mut pairs = Vec::with_capacity(2 * k);
    for parity in [ExchangeParity::Symmetric, ExchangeParity::Antisymmetric] {
        let found = lowest(h, k, |v| project_exchange(v, n, parity), opts, exec).map_err(|e| {
            FewBodyError::NoConvergence {
                residual: e.residual,
                iterations: e.iterations,
            }
        })?;
        log::debug!("{parity:?} sector converged in {} iterations", found.iterations);
        for ((value, vector), residual) in found.values.into_iter().zip(found.vectors).zip(found.residuals) {
            pairs.push((value, parity, residual, vector));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.truncate(k);
    let scale = 1.0 / h.spacing();
    let mut spectrum = FewBodySpectrum {
        eigenvalues: Vec::with_capacity(k),
        parity: Vec::with_capacity(k),
        residuals: Vec::with_capacity(k),
        eigenvectors: Vec::with_capacity(k),
        grid: Some(grid),
        ladder_fit: None,
    };
    for (value, parity, residual, mut vector) in pairs {
        // deterministic sign: largest component positive
        let pivot = vector
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(1.0);
        let s = scale * pivot.signum();
        vector.iter_mut().for_each(|x| *x *= s);
        spectrum.eigenvalues.push(value);
        spectrum.parity.push(parity);
        spectrum.residuals.push(residual);
        spectrum.eigenvectors.push(vector);
    }
    Ok(spectrum)
}

/// Builds, diagonalizes and ladder-decomposes in one call.
pub fn solve(problem: &FewBodyProblem, k: usize, opts: &EigenOptions, exec: Execution) -> Result<FewBodySpectrum, FewBodyError> {
    let h = build_hamiltonian(problem)?;
    let mut spectrum = diagonalize(&h, problem.grid, k, opts, exec)?;
    let w = problem.a.sqrt();
    spectrum.ladder_fit = Some(ladder_decompose(&spectrum.eigenvalues, w, LADDER_MATCH * w, LADDER_BOUND));
    Ok(spectrum)
}

/// `Ψ'(x₁, x₂) = e^{iθ(x₁) + iθ(x₂)} Ψ(x₁ − R, x₂ − R)` with `θ(x) = x·V − f`.
pub fn transform_two_body(psi: &GridWavefunction, state: &ClassicalState, f: f64) -> Result<GridWavefunction, FewBodyError> {
    if psi.grid.dim() != 2 {
        return Err(FewBodyError::Invalid("two-body wavefunctions live on a 2D grid".into()));
    }
    let r = state.r.x;
    let theta = |x: f64| phase_field(&Vector3::new(x, 0.0, 0.0), state, f);
    Ok(shift_with_phase(psi, [r, r], |[x1, x2]| theta(x1) + theta(x2))?)
}

/// Density of `ξ = x₁ − x₂` at `ξ_m = (m − N + 1)·h`, `m = 0..2N−1`.
pub fn relative_marginal(psi: &GridWavefunction) -> Vec<f64> {
    let n = psi.grid.points();
    let h = psi.grid.spacing();
    let mut out = vec![0.0; 2 * n - 1];
    for i in 0..n {
        for j in 0..n {
            out[i + n - 1 - j] += psi.psi[i * n + j].norm_sqr() * h;
        }
    }
    out
}

/// `(⟨ρ⟩, ⟨P⟩)` with `ρ = (x₁ + x₂)/2` and `P = p₁ + p₂`.
pub fn com_moments(psi: &GridWavefunction) -> (f64, f64) {
    let grid = psi.grid;
    let norm: f64 = psi.psi.iter().map(|z| z.norm_sqr()).sum();
    let rho: f64 = psi
        .psi
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let [x1, x2] = grid.position(i);
            0.5 * (x1 + x2) * z.norm_sqr()
        })
        .sum::<f64>()
        / norm;
    let fourier = Fourier::new(grid, Execution::Sequential);
    let mut hat = psi.psi.clone();
    fourier.forward(&mut hat);
    let hat_norm: f64 = hat.iter().map(|z| z.norm_sqr()).sum();
    let p: f64 = hat
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let [k1, k2] = grid.k_vector(i);
            (k1 + k2) * z.norm_sqr()
        })
        .sum::<f64>()
        / hat_norm;
    (rho, p)
}

/// Real-time two-particle evolution by split-step on the periodic grid.
pub fn evolve_two_body(psi: &GridWavefunction, problem: &FewBodyProblem, t_end: f64, dt: f64) -> Result<GridWavefunction, FewBodyError> {
    let bound = 0.1 / problem.a.sqrt();
    if dt > bound {
        return Err(MeanFieldError::StepTooLarge { dt, bound }.into());
    }
    Ok(evolve_with(psi, problem, &Nonlinearity::default(), t_end, dt)?)
}

/// `(t, ⟨ρ⟩, ⟨P⟩)` sampled every `sample` time units up to `t_end`.
pub fn com_trace(
    psi0: &GridWavefunction,
    problem: &FewBodyProblem,
    t_end: f64,
    sample: f64,
    dt: f64,
) -> Result<Vec<(f64, f64, f64)>, FewBodyError> {
    let steps = (t_end / sample).round() as usize;
    let mut psi = psi0.clone();
    let (r, p) = com_moments(&psi);
    let mut out = vec![(psi.t, r, p)];
    for s in 1..=steps {
        let t = psi0.t + sample * s as f64;
        psi = evolve_two_body(&psi, problem, t, dt)?;
        let (r, p) = com_moments(&psi);
        out.push((t, r, p));
    }
    Ok(out)
}

/// Oscillation period from successive zero crossings of `⟨ρ⟩ − offset`,
/// linearly interpolated. Needs at least two crossings.
pub fn crossing_period(trace: &[(f64, f64, f64)], offset: f64) -> Option<f64> {
    let mut crossings = Vec::new();
    for w in trace.windows(2) {
        let (a, b) = (w[0].1 - offset, w[1].1 - offset);
        if a == 0.0 || a.signum() != b.signum() {
            crossings.push(w[0].0 + (w[1].0 - w[0].0) * a / (a - b));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    let half = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    Some(2.0 * half)
}

#[cfg(test)]
mod tests;
