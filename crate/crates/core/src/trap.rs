//! Trap geometry, rigid rotation and the rotational invariants.

use nalgebra::{Matrix3, Rotation3, SymmetricEigen, Unit, Vector3};
use serde::Serialize;
use thiserror::Error;

/// Relative tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrapError {
    #[error("trap strength along {axis} must be positive and finite, got {value}")]
    NonPositive { axis: &'static str, value: f64 },
    #[error("trap matrix is not symmetric (relative deviation {deviation:.3e})")]
    Asymmetric { deviation: f64 },
    #[error("principal axes are not orthonormal (deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },
    #[error("rotation vector has non-finite component")]
    NonFiniteRotation,
    #[error("modulation amplitude {0} must satisfy |amplitude| < 1 to keep the trap positive")]
    Modulation(f64),
}

impl TrapError {
    pub fn kind(&self) -> crate::ErrorKind {
        crate::ErrorKind::Validation
    }
}

const AXIS_NAMES: [&str; 3] = ["x", "y", "z"];

/// A static harmonic trap: `V(r) = ½ r·A·r` with `A` symmetric positive.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapSpec {
    matrix: Matrix3<f64>,
    principal_values: Vector3<f64>,
    principal_axes: Matrix3<f64>,
}

impl TrapSpec {
    /// Builds a trap from squared frequencies along the columns of `axes`.
    ///
    /// The principal values are stored in ascending order, with the axis
    /// columns permuted to match.
    pub fn new(a_x: f64, a_y: f64, a_z: f64, axes: &Rotation3<f64>) -> Result<Self, TrapError> {
        let values = [a_x, a_y, a_z];
        for (axis, &value) in AXIS_NAMES.iter().zip(&values) {
            if !(value > 0.0 && value.is_finite()) {
                return Err(TrapError::NonPositive { axis, value });
            }
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let q = axes.matrix();
        let principal_axes = Matrix3::from_columns(&[
            q.column(order[0]).into_owned(),
            q.column(order[1]).into_owned(),
            q.column(order[2]).into_owned(),
        ]);
        let principal_values = Vector3::new(values[order[0]], values[order[1]], values[order[2]]);
        let matrix = principal_axes
            * Matrix3::from_diagonal(&principal_values)
            * principal_axes.transpose();
        Ok(Self {
            matrix: symmetrize(&matrix),
            principal_values,
            principal_axes,
        })
    }

    /// Axis-aligned trap.
    pub fn diagonal(a_x: f64, a_y: f64, a_z: f64) -> Result<Self, TrapError> {
        Self::new(a_x, a_y, a_z, &Rotation3::identity())
    }

    pub fn isotropic(a: f64) -> Result<Self, TrapError> {
        Self::diagonal(a, a, a)
    }

    /// Builds a trap from an explicit matrix, symmetrizing it first.
    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self, TrapError> {
        let scale = m.abs().max().max(f64::MIN_POSITIVE);
        let deviation = (m - m.transpose()).abs().max() / scale;
        if !(deviation <= SYMMETRY_TOL) {
            return Err(TrapError::Asymmetric { deviation });
        }
        let sym = symmetrize(m);
        let eig = SymmetricEigen::new(sym);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        for (k, &i) in order.iter().enumerate() {
            let value = eig.eigenvalues[i];
            if !(value > 0.0 && value.is_finite()) {
                return Err(TrapError::NonPositive {
                    axis: AXIS_NAMES[k],
                    value,
                });
            }
        }
        let mut axes = Matrix3::from_columns(&[
            eig.eigenvectors.column(order[0]).into_owned(),
            eig.eigenvectors.column(order[1]).into_owned(),
            eig.eigenvectors.column(order[2]).into_owned(),
        ]);
        if axes.determinant() < 0.0 {
            axes.column_mut(2).neg_mut();
        }
        Ok(Self {
            matrix: sym,
            principal_values: Vector3::new(
                eig.eigenvalues[order[0]],
                eig.eigenvalues[order[1]],
                eig.eigenvalues[order[2]],
            ),
            principal_axes: axes,
        })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    /// Squared principal frequencies in ascending order.
    pub fn principal_values(&self) -> &Vector3<f64> {
        &self.principal_values
    }

    /// Orthonormal principal directions, one per column, matching
    /// [`principal_values`](Self::principal_values).
    pub fn principal_axes(&self) -> &Matrix3<f64> {
        &self.principal_axes
    }

    /// Largest principal frequency.
    pub fn max_frequency(&self) -> f64 {
        self.principal_values[2].sqrt()
    }

    /// The same trap rigidly rotated: `Q·A·Qᵀ`.
    pub fn rotated(&self, q: &Rotation3<f64>) -> Self {
        let axes = q.matrix() * self.principal_axes;
        let matrix = axes * Matrix3::from_diagonal(&self.principal_values) * axes.transpose();
        Self {
            matrix: symmetrize(&matrix),
            principal_values: self.principal_values,
            principal_axes: axes,
        }
    }

    /// Expresses a lab-frame vector in the principal frame.
    pub fn to_principal_frame(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.principal_axes.transpose() * v
    }
}

fn symmetrize(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

/// Unit vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitAxis(Unit<Vector3<f64>>);

impl UnitAxis {
    /// Normalizes `v`; `None` for zero or non-finite input.
    pub fn new(v: Vector3<f64>) -> Option<Self> {
        if !v.iter().all(|c| c.is_finite()) {
            return None;
        }
        Unit::try_new(v, 0.0).map(Self)
    }

    pub fn x() -> Self {
        Self(Vector3::x_axis())
    }

    pub fn y() -> Self {
        Self(Vector3::y_axis())
    }

    pub fn z() -> Self {
        Self(Vector3::z_axis())
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        self.0.as_ref()
    }

    pub fn as_unit(&self) -> &Unit<Vector3<f64>> {
        &self.0
    }
}

/// Rigid rotation of the trap at constant angular velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RotationSpec {
    #[default]
    None,
    About { axis: UnitAxis, rate: f64 },
}

impl RotationSpec {
    /// From an angular-velocity vector; the zero vector means no rotation.
    pub fn from_vector(omega: Vector3<f64>) -> Result<Self, TrapError> {
        if !omega.iter().all(|c| c.is_finite()) {
            return Err(TrapError::NonFiniteRotation);
        }
        let rate = omega.norm();
        Ok(match UnitAxis::new(omega) {
            Some(axis) if rate > 0.0 => RotationSpec::About { axis, rate },
            _ => RotationSpec::None,
        })
    }

    /// Rotation about `axis` at `rate`. A negative rate flips the axis.
    pub fn about(axis: UnitAxis, rate: f64) -> Self {
        if rate == 0.0 {
            RotationSpec::None
        } else if rate < 0.0 {
            RotationSpec::About {
                axis: UnitAxis(-axis.0),
                rate: -rate,
            }
        } else {
            RotationSpec::About { axis, rate }
        }
    }

    /// `|Ω|`.
    pub fn rate(&self) -> f64 {
        match self {
            RotationSpec::None => 0.0,
            RotationSpec::About { rate, .. } => *rate,
        }
    }

    pub fn axis(&self) -> Option<UnitAxis> {
        match self {
            RotationSpec::None => None,
            RotationSpec::About { axis, .. } => Some(*axis),
        }
    }

    /// The angular-velocity vector `Ω`.
    pub fn vector(&self) -> Vector3<f64> {
        match self {
            RotationSpec::None => Vector3::zeros(),
            RotationSpec::About { axis, rate } => axis.as_vector() * *rate,
        }
    }

    /// The frame rotation accumulated after time `t`.
    pub fn rotation_at(&self, t: f64) -> Rotation3<f64> {
        match self {
            RotationSpec::None => Rotation3::identity(),
            RotationSpec::About { axis, rate } => Rotation3::from_axis_angle(axis.as_unit(), rate * t),
        }
    }
}

/// The six scalars the characteristic equation depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Invariants {
    pub tr_a: f64,
    pub tr_a2: f64,
    pub det_a: f64,
    /// `Ω²`.
    pub omega2: f64,
    /// `n·A·n`; zero when there is no rotation axis.
    pub n_a_n: f64,
    /// `n·A²·n`; zero when there is no rotation axis.
    pub n_a2_n: f64,
    /// False when `Ω = 0` and the two axis scalars are unused placeholders.
    pub axis_defined: bool,
}

impl Invariants {
    pub fn new(trap: &TrapSpec, rot: &RotationSpec) -> Self {
        let a = trap.matrix();
        let a2 = a * a;
        let (n_a_n, n_a2_n, axis_defined) = match rot.axis() {
            Some(n) => {
                let n = n.as_vector();
                (n.dot(&(a * n)), n.dot(&(a2 * n)), true)
            }
            None => (0.0, 0.0, false),
        };
        Self {
            tr_a: a.trace(),
            tr_a2: a2.trace(),
            det_a: trap.principal_values().iter().product(),
            omega2: rot.rate() * rot.rate(),
            n_a_n,
            n_a2_n,
            axis_defined,
        }
    }

    /// `Ω·A·Ω`.
    pub fn omega_a_omega(&self) -> f64 {
        self.omega2 * self.n_a_n
    }

    /// `Ω·A²·Ω`.
    pub fn omega_a2_omega(&self) -> f64 {
        self.omega2 * self.n_a2_n
    }
}

/// Shorthand for [`Invariants::new`].
pub fn invariants(trap: &TrapSpec, rot: &RotationSpec) -> Invariants {
    Invariants::new(trap, rot)
}

/// Intrinsic z-y-z Euler rotation, angles in radians.
pub fn euler_zyz(alpha: f64, beta: f64, gamma: f64) -> Rotation3<f64> {
    let z = Vector3::z_axis();
    let y = Vector3::y_axis();
    Rotation3::from_axis_angle(&z, alpha)
        * Rotation3::from_axis_angle(&y, beta)
        * Rotation3::from_axis_angle(&z, gamma)
}

/// Time dependence of the trap matrix `A(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum TrapSchedule {
    Static(TrapSpec),
    /// `A(t) = Q(t)·A·Q(t)ᵀ` with `Q(t)` the rotation by `Ω t`.
    Rotating { trap: TrapSpec, rotation: RotationSpec },
    /// `A(t) = A·(1 + amplitude·sin(frequency·t))`.
    Modulated {
        trap: TrapSpec,
        amplitude: f64,
        frequency: f64,
    },
}

impl TrapSchedule {
    pub fn modulated(trap: TrapSpec, amplitude: f64, frequency: f64) -> Result<Self, TrapError> {
        if !(amplitude.abs() < 1.0) || !frequency.is_finite() {
            return Err(TrapError::Modulation(amplitude));
        }
        Ok(TrapSchedule::Modulated {
            trap,
            amplitude,
            frequency,
        })
    }

    pub fn trap(&self) -> &TrapSpec {
        match self {
            TrapSchedule::Static(trap)
            | TrapSchedule::Rotating { trap, .. }
            | TrapSchedule::Modulated { trap, .. } => trap,
        }
    }

    pub fn matrix_at(&self, t: f64) -> Matrix3<f64> {
        match self {
            TrapSchedule::Static(trap) => *trap.matrix(),
            TrapSchedule::Rotating { trap, rotation } => {
                let q = rotation.rotation_at(t);
                let m = q.matrix() * trap.matrix() * q.matrix().transpose();
                symmetrize(&m)
            }
            TrapSchedule::Modulated {
                trap,
                amplitude,
                frequency,
            } => trap.matrix() * (1.0 + amplitude * (frequency * t).sin()),
        }
    }

    /// Upper bound on the angular frequencies present in the dynamics.
    pub fn max_frequency(&self) -> f64 {
        match self {
            TrapSchedule::Static(trap) => trap.max_frequency(),
            TrapSchedule::Rotating { trap, rotation } => trap.max_frequency() + rotation.rate(),
            TrapSchedule::Modulated { trap, amplitude, .. } => {
                trap.max_frequency() * (1.0 + amplitude.abs()).sqrt()
            }
        }
    }

    pub fn is_static(&self) -> bool {
        match self {
            TrapSchedule::Static(_) => true,
            TrapSchedule::Rotating { rotation, .. } => rotation.rate() == 0.0,
            TrapSchedule::Modulated { amplitude, .. } => *amplitude == 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1.0)
    }

    #[test]
    fn isotropic_is_identity() {
        let t = TrapSpec::isotropic(1.0).unwrap();
        assert!((t.matrix() - Matrix3::identity()).abs().max() < 1e-15);
    }

    #[test]
    fn diagonal_invariants() {
        let t = TrapSpec::diagonal(1.0, 2.0, 3.0).unwrap();
        let inv = invariants(&t, &RotationSpec::None);
        assert_eq!(t.principal_values(), &Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(inv.tr_a, 6.0);
        assert_eq!(inv.det_a, 6.0);
        assert_eq!(inv.tr_a2, 14.0);
        assert!(!inv.axis_defined);
        assert_eq!(inv.n_a_n, 0.0);
    }

    #[test]
    fn rotated_construction_keeps_spectrum() {
        let q = Rotation3::from_axis_angle(&Vector3::z_axis(), PI / 6.0);
        let t = TrapSpec::new(1.0, 2.0, 3.0, &q).unwrap();
        // explicit Q·diag·Qᵀ, independent of the constructor
        let m = q.matrix() * Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0)) * q.matrix().transpose();
        assert!((t.matrix() - m).abs().max() < 1e-14);
        assert!(t.matrix()[(0, 1)].abs() > 0.1);
        let inv = invariants(&t, &RotationSpec::None);
        assert!(rel(inv.tr_a, 6.0) < 1e-12);
        assert!(rel(inv.det_a, 6.0) < 1e-12);
        assert!(rel(inv.tr_a2, 14.0) < 1e-12);
        assert!(rel(m.determinant(), 6.0) < 1e-12);
    }

    #[test]
    fn unsorted_input_permutes_axes() {
        let t = TrapSpec::diagonal(3.0, 1.0, 2.0).unwrap();
        assert_eq!(t.principal_values(), &Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(t.principal_axes().column(0).into_owned(), Vector3::y());
        assert_eq!(t.matrix()[(0, 0)], 3.0);
    }

    #[test]
    fn non_positive_names_axis() {
        let err = TrapSpec::diagonal(1.0, 0.0, 2.0).unwrap_err();
        assert_eq!(err, TrapError::NonPositive { axis: "y", value: 0.0 });
        assert!(err.to_string().contains("along y"));
        assert!(TrapSpec::diagonal(1.0, 2.0, -3.0).is_err());
        assert!(TrapSpec::diagonal(f64::NAN, 2.0, 3.0).is_err());
    }

    #[test]
    fn from_matrix_checks_symmetry_and_positivity() {
        let mut m = Matrix3::new(2.0, 0.5, 0.0, 0.5, 3.0, 0.1, 0.0, 0.1, 1.0);
        let t = TrapSpec::from_matrix(&m).unwrap();
        let d = Matrix3::from_diagonal(t.principal_values());
        let back = t.principal_axes() * d * t.principal_axes().transpose();
        assert!((back - m).abs().max() < 1e-10 * 3.0);
        m[(0, 1)] += 1e-6;
        assert!(matches!(TrapSpec::from_matrix(&m), Err(TrapError::Asymmetric { .. })));
        let neg = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 2.0));
        assert!(TrapSpec::from_matrix(&neg).is_err());
    }

    #[test]
    fn isotropic_rotating_invariants() {
        let t = TrapSpec::isotropic(1.0).unwrap();
        let rot = RotationSpec::from_vector(Vector3::new(0.0, 0.0, 0.5)).unwrap();
        let inv = invariants(&t, &rot);
        assert_eq!(inv.tr_a, 3.0);
        assert_eq!(inv.det_a, 1.0);
        assert_eq!(inv.n_a_n, 1.0);
        assert_eq!(inv.n_a2_n, 1.0);
        assert_eq!(inv.omega2, 0.25);
    }

    #[test]
    fn axis_picks_principal_value() {
        let t = TrapSpec::diagonal(1.0, 2.0, 3.0).unwrap();
        let inv = invariants(&t, &RotationSpec::about(UnitAxis::z(), 1.0));
        assert_eq!(inv.n_a_n, 3.0);
        assert_eq!(inv.n_a2_n, 9.0);
        let diag = UnitAxis::new(Vector3::new(1.0, 1.0, 1.0)).unwrap();
        let inv = invariants(&t, &RotationSpec::about(diag, 1.0));
        // (1+2+3)/3 and (1+4+9)/3
        assert!(rel(inv.n_a_n, 2.0) < 1e-15);
        assert!(rel(inv.n_a2_n, 14.0 / 3.0) < 1e-15);
    }

    #[test]
    fn zero_rotation_is_none() {
        let r = RotationSpec::from_vector(Vector3::zeros()).unwrap();
        assert_eq!(r, RotationSpec::None);
        assert!(r.axis().is_none());
        assert!(RotationSpec::from_vector(Vector3::new(f64::NAN, 0.0, 0.0)).is_err());
        let flipped = RotationSpec::about(UnitAxis::z(), -2.0);
        assert_eq!(flipped.vector(), Vector3::new(0.0, 0.0, -2.0));
    }

    #[test]
    fn rotating_schedule_conjugates() {
        let t = TrapSpec::diagonal(1.0, 4.0, 9.0).unwrap();
        let s = TrapSchedule::Rotating {
            trap: t,
            rotation: RotationSpec::about(UnitAxis::z(), 1.0),
        };
        let m = s.matrix_at(PI / 2.0);
        // a quarter turn about z swaps x and y
        assert!((m[(0, 0)] - 4.0).abs() < 1e-12);
        assert!((m[(1, 1)] - 1.0).abs() < 1e-12);
        assert!((m[(2, 2)] - 9.0).abs() < 1e-12);
        assert!((s.max_frequency() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn modulation_bounds() {
        let t = TrapSpec::isotropic(1.0).unwrap();
        assert!(TrapSchedule::modulated(t.clone(), 1.0, 0.3).is_err());
        let s = TrapSchedule::modulated(t, 0.1, 0.3).unwrap();
        let m = s.matrix_at(1.0);
        assert!((m[(0, 0)] - (1.0 + 0.1 * 0.3_f64.sin())).abs() < 1e-15);
    }

    #[test]
    fn euler_zyz_convention() {
        let q = euler_zyz(PI / 2.0, 0.0, 0.0);
        let v = q * Vector3::x();
        assert!((v - Vector3::y()).norm() < 1e-15);
        let q = euler_zyz(0.0, PI / 2.0, 0.0);
        let v = q * Vector3::z();
        assert!((v - Vector3::x()).norm() < 1e-15);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn rotation() -> impl Strategy<Value = Rotation3<f64>> {
        (-3.2..3.2f64, 0.0..3.15f64, -3.2..3.2f64).prop_map(|(a, b, c)| euler_zyz(a, b, c))
    }

    proptest! {
        #[test]
        fn invariants_survive_conjugation(
            a in (0.1..10.0f64, 0.1..10.0f64, 0.1..10.0f64),
            q in rotation(),
            p in rotation(),
            n in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
        ) {
            let t = TrapSpec::new(a.0, a.1, a.2, &q).unwrap();
            let n = Vector3::new(n.0, n.1, n.2);
            prop_assume!(n.norm() > 1e-3);
            let axis = UnitAxis::new(n).unwrap();
            let base = invariants(&t, &RotationSpec::about(axis, 0.7));
            // conjugate A by p and rotate n with it
            let moved = t.rotated(&p);
            let axis2 = UnitAxis::new(p * n).unwrap();
            let inv = invariants(&moved, &RotationSpec::about(axis2, 0.7));
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs().max(1.0) * 10.0;
            prop_assert!(close(inv.tr_a, base.tr_a));
            prop_assert!(close(inv.tr_a2, base.tr_a2));
            prop_assert!(close(inv.det_a, base.det_a));
            prop_assert!(close(inv.n_a_n, base.n_a_n));
            prop_assert!(close(inv.n_a2_n, base.n_a2_n));
            let pv = t.principal_values();
            prop_assert!(inv.n_a_n >= pv[0] * (1.0 - 1e-12) && inv.n_a_n <= pv[2] * (1.0 + 1e-12));
            prop_assert!(inv.n_a2_n >= pv[0] * pv[0] * (1.0 - 1e-12));
            prop_assert!(inv.n_a2_n <= pv[2] * pv[2] * (1.0 + 1e-12));
            prop_assert!(inv.tr_a2 <= inv.tr_a * inv.tr_a);
        }

        #[test]
        fn principal_axis_gives_principal_value(
            a in (0.1..10.0f64, 0.1..10.0f64, 0.1..10.0f64),
            q in rotation(),
            k in 0usize..3,
        ) {
            let t = TrapSpec::new(a.0, a.1, a.2, &q).unwrap();
            let n = t.principal_axes().column(k).into_owned();
            let inv = invariants(&t, &RotationSpec::about(UnitAxis::new(n).unwrap(), 1.0));
            let ak = t.principal_values()[k];
            prop_assert!((inv.n_a_n - ak).abs() <= 1e-13 * ak.max(1.0) * 10.0);
            prop_assert!((inv.n_a2_n - ak * ak).abs() <= 1e-13 * (ak * ak).max(1.0) * 10.0);
        }

        #[test]
        fn principal_decomposition_reconstructs(
            a in (0.1..10.0f64, 0.1..10.0f64, 0.1..10.0f64),
            q in rotation(),
        ) {
            let t = TrapSpec::new(a.0, a.1, a.2, &q).unwrap();
            let again = TrapSpec::from_matrix(t.matrix()).unwrap();
            let d = Matrix3::from_diagonal(again.principal_values());
            let back = again.principal_axes() * d * again.principal_axes().transpose();
            let scale = t.matrix().abs().max();
            prop_assert!((back - t.matrix()).abs().max() <= 1e-10 * scale);
            prop_assert!((again.principal_values() - t.principal_values()).abs().max() <= 1e-10 * scale);
        }
    }
}
