//! Classical center-of-mass trajectories, the action along them and the
//! phase of the displacement transform.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::exec::Execution;
use crate::trap::{RotationSpec, TrapSchedule, TrapSpec};

/// Fixed steps per shortest oscillation period, at minimum.
pub const MIN_STEPS_PER_PERIOD: f64 = 50.0;

/// Integration stops once `|R|` exceeds this multiple of the initial scale.
pub const RUNAWAY_FACTOR: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassicalError {
    #[error("time step {dt} exceeds the stability bound {bound} (1/50 of the shortest period); pass force to override")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("invalid time span: t_end = {t_end}, dt = {dt}")]
    InvalidTime { t_end: f64, dt: f64 },
    #[error("initial state must be finite")]
    NonFinite,
    #[error("the action and phase are defined for lab-frame trajectories only")]
    NotLabFrame,
    #[error("trajectory ran away: |R| grew by more than {factor:.0e} at t = {t}")]
    Runaway {
        t: f64,
        factor: f64,
        partial: Box<Trajectory>,
    },
    #[error("no trajectory sample at t = {0}")]
    NotSampled(f64),
}

impl ClassicalError {
    pub fn kind(&self) -> crate::ErrorKind {
        match self {
            ClassicalError::Runaway { .. } => crate::ErrorKind::Numerical,
            _ => crate::ErrorKind::Validation,
        }
    }
}

/// A point in phase space at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalState {
    pub r: Vector3<f64>,
    pub v: Vector3<f64>,
    pub t: f64,
}

impl ClassicalState {
    pub fn new(r: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { r, v, t: 0.0 }
    }

    pub fn at_rest() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    fn is_finite(&self) -> bool {
        self.r.iter().chain(self.v.iter()).all(|x| x.is_finite()) && self.t.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Lab,
    Rotating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub frame: Frame,
    pub samples: Vec<ClassicalState>,
    /// Accumulated action per sample (lab frame only).
    pub action: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> &ClassicalState {
        self.samples.last().expect("trajectory has at least one sample")
    }

    fn index_at(&self, t: f64) -> Option<usize> {
        let i = self
            .samples
            .partition_point(|s| s.t < t)
            .min(self.samples.len().saturating_sub(1));
        let candidates = [i.saturating_sub(1), i];
        candidates
            .into_iter()
            .min_by(|&a, &b| (self.samples[a].t - t).abs().total_cmp(&(self.samples[b].t - t).abs()))
            .filter(|&k| (self.samples[k].t - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    /// The sample at time `t` and its action, if `t` is on the sample grid.
    pub fn state_at(&self, t: f64) -> Result<(ClassicalState, f64), ClassicalError> {
        let i = self.index_at(t).ok_or(ClassicalError::NotSampled(t))?;
        let f = match &self.action {
            Some(a) => a[i],
            None => return Err(ClassicalError::NotLabFrame),
        };
        Ok((self.samples[i], f))
    }
}

/// Integration knobs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepOptions {
    /// Accept steps above the 1/50-period bound.
    pub force: bool,
}

/// Largest accepted step for dynamics with top angular frequency `omega_max`.
pub fn step_bound(omega_max: f64) -> f64 {
    2.0 * PI / omega_max / MIN_STEPS_PER_PERIOD
}

fn check_span(t_end: f64, dt: f64, omega_max: f64, opts: StepOptions) -> Result<usize, ClassicalError> {
    if !(t_end > 0.0 && dt > 0.0) || !t_end.is_finite() {
        return Err(ClassicalError::InvalidTime { t_end, dt });
    }
    let bound = step_bound(omega_max);
    if dt > bound && !opts.force {
        return Err(ClassicalError::StepTooLarge { dt, bound });
    }
    Ok(((t_end / dt) - 1e-9).ceil().max(1.0) as usize)
}

/// Classical RK4 on `(R, V)` with `n` equal steps to `t_end`.
fn rk4<F>(frame: Frame, s0: &ClassicalState, t_end: f64, n: usize, omega_max: f64, accel: F) -> Result<Trajectory, ClassicalError>
where
    F: Fn(f64, &Vector3<f64>, &Vector3<f64>) -> Vector3<f64>,
{
    if !s0.is_finite() {
        return Err(ClassicalError::NonFinite);
    }
    let h = (t_end - s0.t) / n as f64;
    let scale = s0.r.norm().max(s0.v.norm() / omega_max);
    let mut samples = Vec::with_capacity(n + 1);
    samples.push(*s0);
    let (mut r, mut v) = (s0.r, s0.v);
    for i in 0..n {
        let t = s0.t + h * i as f64;
        let k1r = v;
        let k1v = accel(t, &r, &v);
        let r2 = r + k1r * (0.5 * h);
        let v2 = v + k1v * (0.5 * h);
        let k2r = v2;
        let k2v = accel(t + 0.5 * h, &r2, &v2);
        let r3 = r + k2r * (0.5 * h);
        let v3 = v + k2v * (0.5 * h);
        let k3r = v3;
        let k3v = accel(t + 0.5 * h, &r3, &v3);
        let r4 = r + k3r * h;
        let v4 = v + k3v * h;
        let k4r = v4;
        let k4v = accel(t + h, &r4, &v4);
        r += (k1r + 2.0 * k2r + 2.0 * k3r + k4r) * (h / 6.0);
        v += (k1v + 2.0 * k2v + 2.0 * k3v + k4v) * (h / 6.0);
        let t_next = if i + 1 == n { t_end } else { s0.t + h * (i + 1) as f64 };
        samples.push(ClassicalState { r, v, t: t_next });
        if scale > 0.0 && r.norm() > RUNAWAY_FACTOR * scale {
            log::warn!("runaway trajectory at t = {t_next}, |R| = {:.3e}", r.norm());
            return Err(ClassicalError::Runaway {
                t: t_next,
                factor: RUNAWAY_FACTOR,
                partial: Box::new(Trajectory {
                    frame,
                    samples,
                    action: None,
                }),
            });
        }
    }
    Ok(Trajectory {
        frame,
        samples,
        action: None,
    })
}

/// Solves `R̈ = −A(t)·R` in the lab frame and attaches the action.
///
/// The step is shrunk so that an integer number of steps lands exactly on
/// `t_end`.
pub fn integrate_lab(
    schedule: &TrapSchedule,
    s0: &ClassicalState,
    t_end: f64,
    dt: f64,
    opts: StepOptions,
) -> Result<Trajectory, ClassicalError> {
    let omega_max = schedule.max_frequency();
    let n = check_span(t_end - s0.t, dt, omega_max, opts)?;
    let mut traj = rk4(Frame::Lab, s0, t_end, n, omega_max, |t, r, _| -(schedule.matrix_at(t) * r))?;
    traj.action = Some(action(&traj, schedule)?);
    Ok(traj)
}

/// Lab-frame solution that passes exactly through every time in `stops`.
///
/// Each segment between consecutive stops is integrated on its own uniform
/// grid, so arbitrary check times land on samples. The action is carried
/// across segments.
pub fn integrate_lab_through(
    schedule: &TrapSchedule,
    s0: &ClassicalState,
    stops: &[f64],
    dt: f64,
    opts: StepOptions,
) -> Result<Trajectory, ClassicalError> {
    let mut stops: Vec<f64> = stops.iter().copied().filter(|&t| t > s0.t).collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    let Some(&t_last) = stops.last() else {
        return Err(ClassicalError::InvalidTime { t_end: s0.t, dt });
    };
    let mut samples = vec![*s0];
    let mut f = vec![0.0];
    for t_end in stops {
        let start = *samples.last().expect("non-empty");
        let seg = integrate_lab(schedule, &start, t_end, dt, opts)?;
        let base = *f.last().expect("non-empty");
        let seg_f = seg.action.as_ref().expect("lab trajectories carry the action");
        samples.extend_from_slice(&seg.samples[1..]);
        f.extend(seg_f[1..].iter().map(|x| x + base));
    }
    debug_assert_eq!(samples.last().map(|s| s.t), Some(t_last));
    Ok(Trajectory {
        frame: Frame::Lab,
        samples,
        action: Some(f),
    })
}

/// Solves `R̈ = −A·R − Ω×(2Ṙ + Ω×R)` in the frame co-rotating with the trap.
pub fn integrate_rotating(
    trap: &TrapSpec,
    rot: &RotationSpec,
    s0: &ClassicalState,
    t_end: f64,
    dt: f64,
    opts: StepOptions,
) -> Result<Trajectory, ClassicalError> {
    let omega_max = trap.max_frequency() + rot.rate();
    let n = check_span(t_end - s0.t, dt, omega_max, opts)?;
    let a = *trap.matrix();
    let w = rot.vector();
    rk4(Frame::Rotating, s0, t_end, n, omega_max, |_, r, v| {
        -(a * r) - w.cross(&(2.0 * v + w.cross(r)))
    })
}

/// Integrates many initial states with the same schedule.
pub fn integrate_batch(
    schedule: &TrapSchedule,
    starts: &[ClassicalState],
    t_end: f64,
    dt: f64,
    opts: StepOptions,
    exec: Execution,
) -> Vec<Result<Trajectory, ClassicalError>> {
    exec.map(starts.len(), |i| integrate_lab(schedule, &starts[i], t_end, dt, opts))
}

/// Lab-frame coordinates of a rotating-frame state: `R = Q·R'`,
/// `V = Q·(V' + Ω×R')`.
pub fn rotating_to_lab(s: &ClassicalState, rot: &RotationSpec) -> ClassicalState {
    let q = rot.rotation_at(s.t);
    let w = rot.vector();
    ClassicalState {
        r: q * s.r,
        v: q * (s.v + w.cross(&s.r)),
        t: s.t,
    }
}

fn lagrangian(s: &ClassicalState, a: &Matrix3<f64>) -> f64 {
    0.5 * (s.v.dot(&s.v) - s.r.dot(&(a * s.r)))
}

/// `f(t) = ½∫₀ᵗ (Ṙ·Ṙ − R·A(t)·R) dt` at every sample.
///
/// Composite Simpson on even sample indices; odd indices take Simpson's 3/8
/// rule over the last three intervals, and index 1 a three-point rule.
/// Assumes equally spaced samples.
pub fn action(traj: &Trajectory, schedule: &TrapSchedule) -> Result<Vec<f64>, ClassicalError> {
    if traj.frame != Frame::Lab {
        return Err(ClassicalError::NotLabFrame);
    }
    let n = traj.samples.len();
    let l: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| lagrangian(s, &schedule.matrix_at(s.t)))
        .collect();
    let mut f = vec![0.0; n];
    if n < 2 {
        return Ok(f);
    }
    let h = traj.samples[1].t - traj.samples[0].t;
    f[1] = if n > 2 {
        h / 12.0 * (5.0 * l[0] + 8.0 * l[1] - l[2])
    } else {
        0.5 * h * (l[0] + l[1])
    };
    for i in 2..n {
        f[i] = if i % 2 == 0 {
            f[i - 2] + h / 3.0 * (l[i - 2] + 4.0 * l[i - 1] + l[i])
        } else {
            f[i - 3] + 3.0 * h / 8.0 * (l[i - 3] + 3.0 * l[i - 2] + 3.0 * l[i - 1] + l[i])
        };
    }
    Ok(f)
}

/// The action reduced to boundary terms, `½ Ṙ·R |₀ᵗ`, valid on solutions.
pub fn action_boundary(traj: &Trajectory) -> Vec<f64> {
    let Some(s0) = traj.samples.first() else {
        return Vec::new();
    };
    let base = 0.5 * s0.v.dot(&s0.r);
    traj.samples.iter().map(|s| 0.5 * s.v.dot(&s.r) - base).collect()
}

/// Displacement phase `θ(r, t) = r·Ṙ(t) − f(t)`.
pub fn phase_field(r: &Vector3<f64>, state: &ClassicalState, f: f64) -> f64 {
    r.dot(&state.v) - f
}

/// Least-squares slope of `ln|R|` over samples with `t_from ≤ t ≤ t_to`.
pub fn log_growth_rate(traj: &Trajectory, t_from: f64, t_to: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| s.t >= t_from && s.t <= t_to && s.r.norm() > 0.0)
        .map(|s| (s.t, s.r.norm().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Some(sxy / sxx)
}

/// `½|V|² + ½R·A·R` for a static trap.
pub fn energy(s: &ClassicalState, a: &Matrix3<f64>) -> f64 {
    0.5 * (s.v.dot(&s.v) + s.r.dot(&(a * s.r)))
}
