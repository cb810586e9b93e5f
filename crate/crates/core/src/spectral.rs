//! Characteristic frequencies of the rotating anisotropic oscillator.
//!
//! The center-of-mass motion in a trap rotating at `Ω` obeys
//! `R̈ = −A·R − Ω×(2Ṙ + Ω×R)` in the co-rotating frame. Its normal-mode
//! frequencies solve a cubic in `ω²` whose coefficients depend only on six
//! rotational invariants of `A` and `Ω`. A negative (or complex) root means
//! the center of mass escapes the trap.

use std::fmt;

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::exec::Execution;
use crate::trap::{invariants, Invariants, RotationSpec, TrapSpec, UnitAxis};

/// Absolute band around zero (and relative bound on imaginary parts) used
/// when classifying roots in `ω²`.
pub const ROOT_TOL: f64 = 1e-9;

/// Relative size of the discriminant below which the two window edges are
/// treated as a double root.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("free term is still negative at the end of the scan (Ω = {omega_max}); widen the range")]
    UnboundedWindow { omega_max: f64 },
    #[error("invalid scan: {0}")]
    InvalidScan(String),
}

impl SpectralError {
    pub fn kind(&self) -> crate::ErrorKind {
        match self {
            SpectralError::UnboundedWindow { .. } => crate::ErrorKind::Numerical,
            SpectralError::InvalidScan(_) => crate::ErrorKind::Validation,
        }
    }
}

/// `x³ + c4·x² + c2·x + c0` with `x = ω²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharPoly {
    pub c4: f64,
    pub c2: f64,
    pub c0: f64,
    pub invariants: Invariants,
}

impl CharPoly {
    pub fn eval(&self, x: Complex64) -> Complex64 {
        ((x + self.c4) * x + self.c2) * x + self.c0
    }

    fn derivative(&self, x: Complex64) -> Complex64 {
        (x * 3.0 + 2.0 * self.c4) * x + self.c2
    }

    /// `max(1, |c4|, |c2|, |c0|)`, the scale for residual bounds.
    pub fn coefficient_scale(&self) -> f64 {
        1f64.max(self.c4.abs()).max(self.c2.abs()).max(self.c0.abs())
    }

    /// `−c0`, the product of the three squared frequencies.
    pub fn free_term(&self) -> f64 {
        -self.c0
    }

    pub fn companion(&self) -> Matrix3<f64> {
        Matrix3::new(
            0.0, 0.0, -self.c0, //
            1.0, 0.0, -self.c2, //
            0.0, 1.0, -self.c4,
        )
    }
}

pub fn build_charpoly(inv: &Invariants) -> CharPoly {
    let w2 = inv.omega2;
    let waw = inv.omega_a_omega();
    let wa2w = inv.omega_a2_omega();
    let c4 = -(2.0 * w2 + inv.tr_a);
    let c2 = w2 * w2 + 3.0 * waw - inv.tr_a * w2 + 0.5 * inv.tr_a * inv.tr_a - 0.5 * inv.tr_a2;
    let c0 = -w2 * waw + inv.tr_a * waw - wa2w - inv.det_a;
    CharPoly {
        c4,
        c2,
        c0,
        invariants: *inv,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Stable,
    Unstable,
    Marginal,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Stable => "stable",
            Classification::Unstable => "unstable",
            Classification::Marginal => "marginal",
        })
    }
}

/// Roots of the characteristic cubic with their classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencySet {
    /// Roots in `ω²`, ordered by real part then imaginary part.
    pub omega_sq: [Complex64; 3],
    /// Principal square roots of `omega_sq`.
    pub omega: [Complex64; 3],
    pub classification: Classification,
    /// Index of the root that decides the classification: the complex root
    /// with the largest imaginary part if any, otherwise the smallest `ω²`.
    pub critical: usize,
    /// Real part of the critical `ω²`, or minus its imaginary part when it is
    /// complex. Positive means a stable margin.
    pub margin: f64,
}

fn is_real_root(z: Complex64) -> bool {
    z.im.abs() <= ROOT_TOL * z.norm().max(1.0)
}

fn classify(roots: &[Complex64; 3]) -> (Classification, usize, f64) {
    let complex = (0..3)
        .filter(|&i| !is_real_root(roots[i]))
        .max_by(|&i, &j| roots[i].im.abs().total_cmp(&roots[j].im.abs()));
    if let Some(i) = complex {
        return (Classification::Unstable, i, -roots[i].im.abs());
    }
    let i = (0..3)
        .min_by(|&i, &j| roots[i].re.total_cmp(&roots[j].re))
        .unwrap_or(0);
    let re = roots[i].re;
    let class = if re > ROOT_TOL {
        Classification::Stable
    } else if re < -ROOT_TOL {
        Classification::Unstable
    } else {
        Classification::Marginal
    };
    (class, i, re)
}

/// Roots via the eigenvalues of the companion matrix, polished by Newton
/// steps that are kept only when they reduce the residual.
pub fn solve_charpoly(p: &CharPoly) -> FrequencySet {
    let eig = p.companion().complex_eigenvalues();
    let mut roots = [eig[0], eig[1], eig[2]];
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let f = p.eval(*r);
            let df = p.derivative(*r);
            if df.norm() == 0.0 || f.norm() == 0.0 {
                break;
            }
            let next = *r - f / df;
            if p.eval(next).norm() < f.norm() {
                *r = next;
            } else {
                break;
            }
        }
        // conjugate pairs may pick up a spurious imaginary part on a real axis
        if r.im.abs() <= 4.0 * f64::EPSILON * r.norm().max(1.0) {
            r.im = 0.0;
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let omega = roots.map(|z| z.sqrt());
    let (classification, critical, margin) = classify(&roots);
    FrequencySet {
        omega_sq: roots,
        omega,
        classification,
        critical,
        margin,
    }
}

/// Frequencies for a trap and rotation in one call.
pub fn frequencies(trap: &TrapSpec, rot: &RotationSpec) -> FrequencySet {
    solve_charpoly(&build_charpoly(&invariants(trap, rot)))
}

/// One normal mode given by its signed squared frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeFrequency {
    pub omega_sq: f64,
}

impl ModeFrequency {
    pub fn is_real(&self) -> bool {
        self.omega_sq >= 0.0
    }

    /// `√ω²`, purely imaginary for negative `ω²`.
    pub fn frequency(&self) -> Complex64 {
        Complex64::new(self.omega_sq, 0.0).sqrt()
    }

    /// Exponential growth rate `Im ω` (zero for real modes).
    pub fn growth_rate(&self) -> f64 {
        (-self.omega_sq).max(0.0).sqrt()
    }
}

/// The in-plane modes for rotation about the third principal axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerpendicularModes {
    pub plus: ModeFrequency,
    pub minus: ModeFrequency,
}

/// Closed-form `ω±` for rotation at `omega` about a principal axis, with
/// `a_x`, `a_y` the squared frequencies of the two perpendicular axes.
pub fn omega_pm(a_x: f64, a_y: f64, omega: f64) -> PerpendicularModes {
    let w2 = omega * omega;
    let a_plus = a_x + a_y;
    let a_minus = a_x - a_y;
    let root = (a_minus * a_minus + 8.0 * w2 * a_plus).sqrt();
    let plus_sq = 0.5 * (2.0 * w2 + a_plus + root);
    // ω₊²·ω₋² = (Ω² − a_x)(Ω² − a_y); avoids cancellation in the minus branch
    let minus_sq = (w2 - a_x) * (w2 - a_y) / plus_sq;
    PerpendicularModes {
        plus: ModeFrequency { omega_sq: plus_sq },
        minus: ModeFrequency { omega_sq: minus_sq },
    }
}

/// The discriminant of the free term, computed two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discriminant {
    /// From the invariants: `(TrA·nAn − nA²n)² − 4·DetA·nAn`.
    pub direct: f64,
    /// Sum-of-squares form in the principal frame (manifestly non-negative).
    pub rearranged: f64,
    /// `(TrA·nAn − nA²n)² + 4·DetA·nAn`, the magnitude of the cancelling
    /// terms in `direct`. Relative comparisons use this scale.
    pub scale: f64,
}

pub fn discriminant(trap: &TrapSpec, axis: &UnitAxis) -> Discriminant {
    let inv = invariants(trap, &RotationSpec::about(*axis, 1.0));
    let q = inv.tr_a * inv.n_a_n - inv.n_a2_n;
    let pd = 4.0 * inv.det_a * inv.n_a_n;
    let direct = q * q - pd;

    let a = trap.principal_values();
    let n = trap.to_principal_frame(axis.as_vector());
    let (ax, ay, az) = (a[0], a[1], a[2]);
    let (nx2, ny2, nz2) = (n[0] * n[0], n[1] * n[1], n[2] * n[2]);
    let first = nx2 * ax * (az - ay) + ny2 * ay * (az - ax) + nz2 * az * (ax - ay);
    let rearranged = first * first + 4.0 * ny2 * nz2 * ay * az * (az - ax) * (ay - ax);
    Discriminant {
        direct,
        rearranged,
        scale: q * q + pd,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// A band of rotation speeds of finite width.
    Open,
    /// Both edges coincide; no unstable band.
    Degenerate,
    /// The free term never changes sign.
    Empty,
}

/// Rotation speeds `lo < Ω < hi` where the free term is negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityWindow {
    pub lo: f64,
    pub hi: f64,
    pub kind: WindowKind,
}

impl StabilityWindow {
    pub fn is_degenerate(&self) -> bool {
        self.kind != WindowKind::Open
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, omega: f64) -> bool {
        self.kind == WindowKind::Open && omega > self.lo && omega < self.hi
    }

    fn empty() -> Self {
        Self {
            lo: 0.0,
            hi: 0.0,
            kind: WindowKind::Empty,
        }
    }
}

/// Edges of the unstable band from the roots in `Ω²` of the free term
/// `nAn·Ω⁴ − (TrA·nAn − nA²n)·Ω² + DetA`.
pub fn instability_window(trap: &TrapSpec, axis: &UnitAxis) -> StabilityWindow {
    let inv = invariants(trap, &RotationSpec::about(*axis, 1.0));
    let p = inv.n_a_n;
    assert!(p > 0.0, "n·A·n must be positive for a positive trap, got {p}");
    let q = inv.tr_a * inv.n_a_n - inv.n_a2_n;
    let d = inv.det_a;
    let delta = q * q - 4.0 * p * d;
    let scale = q * q + 4.0 * p * d;
    if delta <= DEGENERACY_TOL * scale {
        if delta < -DEGENERACY_TOL * scale.max(1.0) * 1e3 {
            return StabilityWindow::empty();
        }
        let x = (q / (2.0 * p)).max(0.0).sqrt();
        return StabilityWindow {
            lo: x,
            hi: x,
            kind: WindowKind::Degenerate,
        };
    }
    let x_hi = (q + delta.sqrt()) / (2.0 * p);
    let x_lo = d / (p * x_hi);
    StabilityWindow {
        lo: x_lo.sqrt(),
        hi: x_hi.sqrt(),
        kind: WindowKind::Open,
    }
}

/// The free term `−c0` at rotation speed `omega` about `axis`.
pub fn free_term(trap: &TrapSpec, axis: &UnitAxis, omega: f64) -> f64 {
    build_charpoly(&invariants(trap, &RotationSpec::about(*axis, omega))).free_term()
}

/// Window edges located by scanning the sign of the free term on
/// `[0, omega_max]` and bisecting each sign change.
pub fn window_by_bisection(
    trap: &TrapSpec,
    axis: &UnitAxis,
    omega_max: f64,
    scan_points: usize,
) -> Result<StabilityWindow, SpectralError> {
    if !(omega_max > 0.0) || scan_points < 2 {
        return Err(SpectralError::InvalidScan(format!(
            "need omega_max > 0 and at least 2 points, got {omega_max} and {scan_points}"
        )));
    }
    let f = |w: f64| free_term(trap, axis, w);
    let bisect = |mut lo: f64, mut hi: f64| {
        let f_lo_sign = f(lo) > 0.0;
        while hi - lo > 1e-15 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (f(mid) > 0.0) == f_lo_sign {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let step = omega_max / (scan_points - 1) as f64;
    let mut down = None;
    let mut prev = 0.0;
    for i in 1..scan_points {
        let w = step * i as f64;
        let positive = f(w) > 0.0;
        match (down, positive) {
            (None, false) => down = Some(bisect(prev, w)),
            (Some(lo), true) => {
                return Ok(StabilityWindow {
                    lo,
                    hi: bisect(prev, w),
                    kind: WindowKind::Open,
                })
            }
            _ => {}
        }
        prev = w;
    }
    match down {
        Some(_) => Err(SpectralError::UnboundedWindow { omega_max }),
        None => Ok(StabilityWindow::empty()),
    }
}

/// Bisection window over a range that always contains both edges.
///
/// The upper root in `Ω²` is below `TrA − nA²n/nAn < TrA`, so scanning to
/// `2√TrA` is enough.
pub fn bisection_window(trap: &TrapSpec, axis: &UnitAxis) -> Result<StabilityWindow, SpectralError> {
    let omega_max = 2.0 * trap.matrix().trace().sqrt();
    window_by_bisection(trap, axis, omega_max, 4096)
}

/// One row of a stability map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub omega: f64,
    pub frequencies: FrequencySet,
}

/// Solves the cubic for every rotation speed in `omegas` about `axis`.
pub fn sweep(trap: &TrapSpec, axis: &UnitAxis, omegas: &[f64], exec: Execution) -> Vec<SweepPoint> {
    exec.map(omegas.len(), |i| {
        let omega = omegas[i];
        SweepPoint {
            omega,
            frequencies: frequencies(trap, &RotationSpec::about(*axis, omega)),
        }
    })
}

/// `start, start+step, …` up to `stop` inclusive, computed as `start + i·step`.
pub fn omega_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, SpectralError> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(SpectralError::InvalidScan(format!(
            "range {start}:{stop}:{step} is not increasing"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}
