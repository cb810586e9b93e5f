//! Nonlinear Schrödinger evolution in a harmonic trap and the displacement
//! solution family.
//!
//! If `ψ(r, t)` solves
//! `i∂ₜψ = (−½Δ + ½ r·A(t)·r + G(|ψ|))ψ`
//! then so does `ψ(r − R(t), t)·e^{iθ(r,t)}` for any classical trajectory
//! `R(t)`, with `θ = r·Ṙ − f(t)`. [`verify_family`] checks this numerically
//! by comparing "displace then evolve" against "evolve then displace".

mod grid;
mod snapshot;
mod splitstep;

use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

pub use grid::{Fourier, GridSpec, GridWavefunction};
pub use snapshot::{read_snapshot, write_snapshot, SnapshotHeader};
pub use splitstep::{ExternalPotential, SplitStepper, TimeMode};

use crate::classical::{phase_field, ClassicalError, ClassicalState, Trajectory};
use crate::exec::Execution;
use crate::trap::TrapSchedule;

/// Density threshold, relative to the peak, for the boundary guards.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// Width in grid points of the band checked after a displacement.
pub const SHIFT_MARGIN: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeanFieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("time step {dt} exceeds the bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("phase per step {phase:.3} exceeds 0.5 rad (dt·max|V + G| guard)")]
    PhaseWrap { phase: f64 },
    #[error("density reached the grid boundary at t = {t}: edge/peak = {leak:.3e}")]
    BoundaryLeak { leak: f64, t: f64 },
    #[error("displacement pushes density within {SHIFT_MARGIN} points of the boundary: edge/peak = {leak:.3e}")]
    ShiftTooLarge { leak: f64 },
    #[error("imaginary-time iteration did not converge in {steps} steps (μ drift {mu_drift:.3e}, residual {residual:.3e})")]
    NoConvergence { steps: usize, mu_drift: f64, residual: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
    #[error("i/o: {0}")]
    Io(String),
}

impl MeanFieldError {
    pub fn kind(&self) -> crate::ErrorKind {
        use crate::ErrorKind::*;
        match self {
            MeanFieldError::PhaseWrap { .. }
            | MeanFieldError::BoundaryLeak { .. }
            | MeanFieldError::ShiftTooLarge { .. }
            | MeanFieldError::NoConvergence { .. } => Numerical,
            MeanFieldError::Classical(e) => e.kind(),
            _ => Validation,
        }
    }
}

impl From<std::io::Error> for MeanFieldError {
    fn from(e: std::io::Error) -> Self {
        MeanFieldError::Io(e.to_string())
    }
}

/// The real function `G(|ψ|)` in the nonlinear term.
#[derive(Clone)]
pub enum Nonlinearity {
    /// `G = g|ψ|²`.
    Cubic { g: f64 },
    /// Any real pointwise function of `|ψ|`.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::Cubic { g } => write!(f, "Cubic {{ g: {g} }}"),
            Nonlinearity::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Default for Nonlinearity {
    fn default() -> Self {
        Nonlinearity::Cubic { g: 0.0 }
    }
}

impl Nonlinearity {
    pub fn cubic(g: f64) -> Self {
        Nonlinearity::Cubic { g }
    }

    /// `G(|ψ|)` given the modulus.
    pub fn value(&self, modulus: f64) -> f64 {
        match self {
            Nonlinearity::Cubic { g } => g * modulus * modulus,
            Nonlinearity::Custom(f) => f(modulus),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Nonlinearity::Cubic { g } if *g == 0.0)
    }
}

/// Everything that defines the equation being integrated.
#[derive(Debug, Clone)]
pub struct Dynamics {
    pub trap: TrapSchedule,
    pub nonlinearity: Nonlinearity,
    /// Coefficient of an anharmonic `c·|r|⁴` term. Zero for the harmonic
    /// problem; nonzero values break the displacement family.
    pub quartic: f64,
}

impl Dynamics {
    pub fn new(trap: TrapSchedule, nonlinearity: Nonlinearity) -> Self {
        Self {
            trap,
            nonlinearity,
            quartic: 0.0,
        }
    }

    pub fn with_quartic(mut self, c: f64) -> Self {
        self.quartic = c;
        self
    }
}

impl ExternalPotential for Dynamics {
    fn fill(&self, grid: &GridSpec, t: f64, out: &mut [f64]) {
        let a = self.trap.matrix_at(t);
        let (axx, axy, ayy) = (a[(0, 0)], a[(0, 1)], a[(1, 1)]);
        let c = self.quartic;
        for (i, v) in out.iter_mut().enumerate() {
            let [x, y] = grid.position(i);
            let r2 = x * x + y * y;
            *v = match grid.dim() {
                1 => 0.5 * axx * x * x,
                _ => 0.5 * (axx * x * x + 2.0 * axy * x * y + ayy * y * y),
            } + c * r2 * r2;
        }
    }

    fn is_static(&self) -> bool {
        self.trap.is_static()
    }
}

/// Largest accepted real-time step: `0.1/ω_max`.
pub fn evolve_step_bound(trap: &TrapSchedule) -> f64 {
    0.1 / trap.max_frequency()
}

/// Real-time Strang split-step evolution to `t_end`.
pub fn evolve(psi: &GridWavefunction, dynamics: &Dynamics, t_end: f64, dt: f64) -> Result<GridWavefunction, MeanFieldError> {
    let bound = evolve_step_bound(&dynamics.trap);
    if dt > bound {
        return Err(MeanFieldError::StepTooLarge { dt, bound });
    }
    evolve_with(psi, dynamics, &dynamics.nonlinearity, t_end, dt)
}

/// Real-time evolution under an arbitrary pointwise potential.
pub fn evolve_with(
    psi: &GridWavefunction,
    potential: &dyn ExternalPotential,
    nl: &Nonlinearity,
    t_end: f64,
    dt: f64,
) -> Result<GridWavefunction, MeanFieldError> {
    let span = t_end - psi.t;
    if span < 0.0 || !(dt > 0.0) {
        return Err(MeanFieldError::Invalid(format!("cannot evolve from t = {} to {t_end} with dt = {dt}", psi.t)));
    }
    let mut out = psi.clone();
    if span == 0.0 {
        return Ok(out);
    }
    let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let exec = if psi.grid.dim() == 2 { Execution::Parallel } else { Execution::Sequential };
    let mut stepper = SplitStepper::new(psi.grid, potential, nl.clone(), TimeMode::Real, h, exec);
    let phase = stepper.max_phase(&out.psi, psi.t);
    if phase > 0.5 {
        return Err(MeanFieldError::PhaseWrap { phase });
    }
    let t0 = psi.t;
    for i in 0..steps {
        let t = t0 + h * i as f64;
        stepper.step(&mut out.psi, t);
        let leak = out.boundary_fraction(1);
        if leak > BOUNDARY_TOL {
            return Err(MeanFieldError::BoundaryLeak { leak, t: t + h });
        }
    }
    out.t = t_end;
    Ok(out)
}

/// Imaginary-time controls.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateOptions {
    /// Successive imaginary-time steps; convergence is required at each.
    pub dt_schedule: Vec<f64>,
    /// Bound on the per-step change of the chemical potential.
    pub mu_tol: f64,
    /// Bound on `‖ψₖ − ψₖ₋₁‖/(dt‖ψ‖)`, which tracks `‖(H − μ)ψ‖`.
    pub residual_tol: f64,
    pub max_steps: usize,
    /// Energy is recorded every this many steps.
    pub energy_every: usize,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        Self {
            dt_schedule: vec![1e-2, 1e-3],
            mu_tol: 1e-10,
            residual_tol: 1e-8,
            max_steps: 400_000,
            energy_every: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub psi: GridWavefunction,
    /// Chemical potential from the per-step norm decay at the final step size.
    pub mu: f64,
    /// Energy functional sampled along the iteration (cubic `G` only).
    pub energies: Vec<f64>,
    pub steps: usize,
}

/// Stationary state by imaginary-time propagation with renormalization.
///
/// Uses the trap at `t = 0`.
pub fn ground_state(
    grid: GridSpec,
    dynamics: &Dynamics,
    norm_target: f64,
    opts: &GroundStateOptions,
) -> Result<GroundState, MeanFieldError> {
    if !(norm_target > 0.0) {
        return Err(MeanFieldError::Invalid(format!("norm target must be positive, got {norm_target}")));
    }
    let frozen = Dynamics {
        trap: TrapSchedule::Static(dynamics.trap.trap().clone()),
        nonlinearity: dynamics.nonlinearity.clone(),
        quartic: dynamics.quartic,
    };
    let a = dynamics.trap.matrix_at(0.0);
    let (wx, wy) = (a[(0, 0)].sqrt(), a[(1, 1)].sqrt());
    let mut psi = GridWavefunction::from_fn(grid, |[x, y]| {
        let arg = match grid.dim() {
            1 => wx * x * x,
            _ => wx * x * x + wy * y * y,
        };
        Complex64::new((-0.5 * arg).exp(), 0.0)
    });
    psi.scale_to_norm(norm_target);
    let exec = if grid.dim() == 2 { Execution::Parallel } else { Execution::Sequential };
    let fourier = Fourier::new(grid, exec);
    let mut energies = Vec::new();
    let mut steps = 0usize;
    let mut mu = f64::NAN;
    for &dt in &opts.dt_schedule {
        let mut stepper = SplitStepper::new(grid, &frozen, frozen.nonlinearity.clone(), TimeMode::Imaginary, dt, exec);
        let mut prev_mu = f64::NAN;
        let mut prev = psi.psi.clone();
        let (drift, residual) = loop {
            stepper.step(&mut psi.psi, 0.0);
            let decayed = psi.norm();
            psi.scale_to_norm(norm_target);
            mu = -(decayed / norm_target).ln() / (2.0 * dt);
            steps += 1;
            let drift = (mu - prev_mu).abs();
            let diff: f64 = psi.psi.iter().zip(&prev).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() * grid.cell_volume();
            let residual = diff.sqrt() / (dt * norm_target.sqrt());
            prev_mu = mu;
            prev.copy_from_slice(&psi.psi);
            if opts.energy_every > 0 && steps.is_multiple_of(opts.energy_every) {
                if let Some(e) = energy_with(&psi, &frozen, 0.0, &fourier) {
                    energies.push(e);
                }
            }
            if drift < opts.mu_tol && residual < opts.residual_tol {
                break (drift, residual);
            }
            if steps >= opts.max_steps {
                return Err(MeanFieldError::NoConvergence {
                    steps,
                    mu_drift: drift,
                    residual,
                });
            }
        };
        log::debug!("imaginary time dt = {dt}: μ = {mu:.12}, drift {drift:.2e}, residual {residual:.2e} after {steps} steps");
    }
    let leak = psi.boundary_fraction(1);
    if leak > BOUNDARY_TOL {
        return Err(MeanFieldError::BoundaryLeak { leak, t: 0.0 });
    }
    Ok(GroundState { psi, mu, energies, steps })
}

/// Gross–Pitaevskii energy `∫ ½|∇ψ|² + V|ψ|² + ½g|ψ|⁴`; `None` for custom `G`.
pub fn energy(psi: &GridWavefunction, dynamics: &Dynamics, t: f64) -> Option<f64> {
    let fourier = Fourier::new(psi.grid, Execution::Sequential);
    energy_with(psi, dynamics, t, &fourier)
}

fn energy_with(psi: &GridWavefunction, dynamics: &Dynamics, t: f64, fourier: &Fourier) -> Option<f64> {
    let g = match dynamics.nonlinearity {
        Nonlinearity::Cubic { g } => g,
        Nonlinearity::Custom(_) => return None,
    };
    let grid = psi.grid;
    let dv = grid.cell_volume();
    let mut hat = psi.psi.clone();
    fourier.forward(&mut hat);
    let kinetic: f64 = hat
        .iter()
        .enumerate()
        .map(|(i, z)| 0.5 * grid.k_squared(i) * z.norm_sqr())
        .sum::<f64>()
        * dv
        / grid.len() as f64;
    let mut v = vec![0.0; grid.len()];
    dynamics.fill(&grid, t, &mut v);
    let rest: f64 = psi
        .psi
        .iter()
        .zip(&v)
        .map(|(z, v)| {
            let n = z.norm_sqr();
            v * n + 0.5 * g * n * n
        })
        .sum::<f64>()
        * dv;
    Some(kinetic + rest)
}

/// Shifts `psi` by `shift` (spectral phase ramp) and multiplies by `e^{iφ(r)}`.
pub fn shift_with_phase<F>(psi: &GridWavefunction, shift: [f64; 2], phase: F) -> Result<GridWavefunction, MeanFieldError>
where
    F: Fn([f64; 2]) -> f64,
{
    let grid = psi.grid;
    let mut out = psi.clone();
    if shift != [0.0, 0.0] {
        let exec = if grid.dim() == 2 { Execution::Parallel } else { Execution::Sequential };
        let fourier = Fourier::new(grid, exec);
        fourier.forward(&mut out.psi);
        for (i, z) in out.psi.iter_mut().enumerate() {
            let [kx, ky] = grid.k_vector(i);
            *z *= Complex64::from_polar(1.0, -(kx * shift[0] + ky * shift[1]));
        }
        fourier.inverse(&mut out.psi);
    }
    for (i, z) in out.psi.iter_mut().enumerate() {
        let p = phase(grid.position(i));
        if p != 0.0 {
            *z *= Complex64::from_polar(1.0, p);
        }
    }
    let leak = out.boundary_fraction(SHIFT_MARGIN);
    if leak > BOUNDARY_TOL {
        return Err(MeanFieldError::ShiftTooLarge { leak });
    }
    Ok(out)
}

/// `ψ'(r) = ψ(r − R)·e^{iθ(r)}`, `θ = r·V − f`, using the grid's leading
/// components of `R` and `V`.
pub fn displace(psi: &GridWavefunction, state: &ClassicalState, f: f64) -> Result<GridWavefunction, MeanFieldError> {
    let shift = match psi.grid.dim() {
        1 => [state.r.x, 0.0],
        _ => [state.r.x, state.r.y],
    };
    shift_with_phase(psi, shift, |[x, y]| phase_field(&Vector3::new(x, y, 0.0), state, f))
}

/// `⟨r⟩ = ∫ r|ψ|² / ∫|ψ|²`; unused components are zero.
pub fn com_expectation(psi: &GridWavefunction) -> Vector3<f64> {
    let mut acc = [0.0; 2];
    let mut total = 0.0;
    for (i, z) in psi.psi.iter().enumerate() {
        let d = z.norm_sqr();
        let [x, y] = psi.grid.position(i);
        acc[0] += x * d;
        acc[1] += y * d;
        total += d;
    }
    Vector3::new(acc[0] / total, acc[1] / total, 0.0)
}

/// Pass/fail thresholds for [`verify_family`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyTolerance {
    pub l2: f64,
    pub com: f64,
}

impl Default for FamilyTolerance {
    fn default() -> Self {
        Self { l2: 1e-5, com: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyCheck {
    pub t: f64,
    /// `‖evolve(displace(ψ₀)) − displace(evolve(ψ₀))‖`.
    pub l2_distance: f64,
    /// `|⟨r⟩_displaced − ⟨r⟩_original − R(t)|`.
    pub com_mismatch: f64,
    pub com_displaced: [f64; 2],
    pub classical_r: [f64; 2],
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyReport {
    pub tolerance: FamilyTolerance,
    pub dt: f64,
    pub checks: Vec<FamilyCheck>,
    pub max_l2_distance: f64,
    pub max_com_mismatch: f64,
    pub passed: bool,
}

/// Compares displace∘evolve with evolve∘displace at each `t_checks` time.
///
/// `traj` must be a lab-frame solution for the same trap, starting at
/// `t = psi0.t` and sampled at every check time.
pub fn verify_family(
    psi0: &GridWavefunction,
    traj: &Trajectory,
    dynamics: &Dynamics,
    t_checks: &[f64],
    dt: f64,
    tol: FamilyTolerance,
) -> Result<FamilyReport, MeanFieldError> {
    let (s0, f0) = traj.state_at(psi0.t)?;
    let mut displaced = displace(psi0, &s0, f0)?;
    let mut original = psi0.clone();
    let mut times = t_checks.to_vec();
    times.sort_by(f64::total_cmp);
    let mut checks = Vec::with_capacity(times.len());
    for &t in &times {
        let (state, f) = traj.state_at(t)?;
        displaced = evolve(&displaced, dynamics, t, dt)?;
        original = evolve(&original, dynamics, t, dt)?;
        let moved = displace(&original, &state, f)?;
        let l2_distance = displaced.l2_distance(&moved);
        let c_disp = com_expectation(&displaced);
        let c_orig = com_expectation(&original);
        let dim = psi0.grid.dim();
        let com_mismatch = (0..dim)
            .map(|k| (c_disp[k] - c_orig[k] - state.r[k]).powi(2))
            .sum::<f64>()
            .sqrt();
        checks.push(FamilyCheck {
            t,
            l2_distance,
            com_mismatch,
            com_displaced: [c_disp.x, c_disp.y],
            classical_r: [state.r.x, if dim == 2 { state.r.y } else { 0.0 }],
            passed: l2_distance <= tol.l2 && com_mismatch <= tol.com,
        });
    }
    let max_l2_distance = checks.iter().map(|c| c.l2_distance).fold(0.0, f64::max);
    let max_com_mismatch = checks.iter().map(|c| c.com_mismatch).fold(0.0, f64::max);
    Ok(FamilyReport {
        tolerance: tol,
        dt,
        passed: checks.iter().all(|c| c.passed),
        checks,
        max_l2_distance,
        max_com_mismatch,
    })
}
