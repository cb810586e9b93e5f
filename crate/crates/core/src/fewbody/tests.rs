use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use super::*;
use crate::classical::{integrate_lab, StepOptions};
use crate::trap::{TrapSchedule, TrapSpec};

fn problem(interaction: Interaction, points: usize, extent: f64) -> FewBodyProblem {
    FewBodyProblem::new(1.0, interaction, GridSpec::new(2, extent, points).unwrap()).unwrap()
}

fn spectrum(p: &FewBodyProblem, k: usize) -> FewBodySpectrum {
    solve(p, k, &EigenOptions::default(), Execution::Parallel).unwrap()
}

/// Eigenvalues of the 1D Dirichlet operator `−½d²/dx² + ½x²` on the same grid.
fn chain_levels(grid: GridSpec) -> Vec<f64> {
    let n = grid.points();
    let h = grid.spacing();
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 / (h * h) + 0.5 * grid.coordinate(i).powi(2)
        } else if i.abs_diff(j) == 1 {
            -0.5 / (h * h)
        } else {
            0.0
        }
    });
    let mut e: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

fn richardson(coarse: &[f64], fine: &[f64]) -> Vec<f64> {
    coarse.iter().zip(fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect()
}

#[test]
fn hamiltonian_is_exactly_symmetric() {
    let p = problem(Interaction::Gaussian { g: 1.3, s: 0.9 }, 64, 3.0);
    let h = build_hamiltonian(&p).unwrap();
    let mut entries = h.entries();
    let mut transposed: Vec<_> = entries.iter().map(|&(r, c, v)| (c, r, v)).collect();
    let key = |e: &(usize, usize, f64)| (e.0, e.1);
    entries.sort_by_key(key);
    transposed.sort_by_key(key);
    assert_eq!(entries, transposed);
    // entries and apply describe the same operator
    let x: Vec<f64> = (0..h.dim()).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect();
    let mut y = vec![0.0; h.dim()];
    h.apply(&x, &mut y);
    let mut z = vec![0.0; h.dim()];
    for (r, c, v) in h.entries() {
        z[r] += v * x[c];
    }
    assert!(y.iter().zip(&z).all(|(a, b)| (a - b).abs() < 1e-9 * (1.0 + b.abs())));
}

#[test]
fn resolution_check_reports_required_points() {
    let coarse = problem(Interaction::Gaussian { g: 1.0, s: 0.2 }, 64, 4.0);
    match build_hamiltonian(&coarse) {
        Err(FewBodyError::Resolution { required_points, scale, .. }) => {
            assert_eq!(scale, "interaction range");
            assert_eq!(required_points, 512);
            let fixed = problem(Interaction::Gaussian { g: 1.0, s: 0.2 }, required_points, 4.0);
            assert!(fixed.check_resolution().is_ok());
        }
        other => panic!("expected a resolution error, got {other:?}"),
    }
    assert!(FewBodyProblem::new(1.0, Interaction::Harmonic { kappa: -0.6 }, GridSpec::new(2, 4.0, 64).unwrap()).is_err());
    assert!(FewBodyProblem::new(1.0, Interaction::Harmonic { kappa: 0.0 }, GridSpec::new(1, 4.0, 64).unwrap()).is_err());
}

#[test]
fn separable_case_matches_one_dimensional_sums() {
    let expected = [1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 4.0, 4.0, 4.0, 4.0];
    let mut per_grid = Vec::new();
    for points in [128, 256] {
        let p = problem(Interaction::Harmonic { kappa: 0.0 }, points, 6.0);
        let s = spectrum(&p, 10);
        // the discrete 2D operator is a Kronecker sum of two chains
        let chain = chain_levels(p.grid);
        let mut sums: Vec<f64> = (0..5).flat_map(|i| (0..5).map(move |j| (i, j))).map(|(i, j)| chain[i] + chain[j]).collect();
        sums.sort_by(f64::total_cmp);
        for (e, o) in s.eigenvalues.iter().zip(&sums) {
            assert!((e - o).abs() < 1e-8, "{e} vs {o}");
        }
        assert!(s.residuals.iter().all(|r| *r <= 1e-8));
        assert!(s.orthonormality_error() < 1e-8);
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        per_grid.push(s.eigenvalues);
    }
    // continuum levels to 1e-4 once the h² error is extrapolated away
    let extrapolated = richardson(&per_grid[0], &per_grid[1]);
    for (e, x) in extrapolated.iter().zip(expected) {
        assert!((e - x).abs() < 1e-4, "{e} vs {x}");
    }
    let fit = ladder_decompose(&extrapolated, 1.0, LADDER_MATCH, 1e-4);
    assert!(!fit.flagged, "{fit:?}");
}

#[test]
fn harmonic_interaction_grid_convergence() {
    let interaction = Interaction::Harmonic { kappa: 0.5 };
    let coarse = spectrum(&problem(interaction, 128, 6.0), 10);
    let fine = spectrum(&problem(interaction, 256, 6.0), 10);
    let exact = problem(interaction, 128, 6.0).harmonic_levels(10).unwrap();
    let err_c = (coarse.eigenvalues[0] - exact[0]).abs();
    let err_f = (fine.eigenvalues[0] - exact[0]).abs();
    let ratio = err_c / err_f;
    assert!((3.8..4.2).contains(&ratio), "ratio {ratio}");
    let extrapolated = richardson(&coarse.eigenvalues, &fine.eigenvalues);
    for (e, x) in extrapolated.iter().zip(&exact) {
        assert!((e - x).abs() < 1e-4, "{e} vs {x}");
    }
    let fit = ladder_decompose(&extrapolated, 1.0, LADDER_MATCH, 1e-4);
    assert!(!fit.flagged);
    assert_eq!(fit.internal_levels.len(), 3);
    assert!((fit.internal_levels[1] - fit.internal_levels[0] - 2f64.sqrt()).abs() < 1e-4);
}

#[test]
fn exchange_parity_labels_hold() {
    let p = problem(Interaction::Gaussian { g: 2.0, s: 0.8 }, 128, 5.0);
    let s = spectrum(&p, 8);
    let n = p.grid.points();
    assert!(s.parity.contains(&ExchangeParity::Symmetric) && s.parity.contains(&ExchangeParity::Antisymmetric));
    for (v, parity) in s.eigenvectors.iter().zip(&s.parity) {
        let sign = parity.sign();
        let worst = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (v[i * n + j] - sign * v[j * n + i]).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12);
    }
    assert!(s.orthonormality_error() < 1e-8);
}

#[test]
fn attractive_gaussian_ladder_spacing() {
    let p = problem(Interaction::Gaussian { g: -1.0, s: 0.5 }, 256, 4.5);
    let fit = spectrum(&p, 10).ladder_fit.unwrap();
    assert!(!fit.flagged, "{fit:?}");
    assert!((fit.fitted_spacing.unwrap() - 1.0).abs() < 1e-3);
}

fn product_state(grid: GridSpec, rho0: f64, xi_width: f64, xi_node: bool) -> GridWavefunction {
    GridWavefunction::from_fn(grid, |[x1, x2]| {
        let rho = 0.5 * (x1 + x2) - rho0;
        let xi = x1 - x2;
        let internal = (-xi * xi / (2.0 * xi_width * xi_width)).exp() * if xi_node { xi } else { 1.0 };
        Complex64::new((-rho * rho).exp() * internal, 0.0)
    })
}

#[test]
fn transform_identity_and_internal_invariance() {
    let grid = GridSpec::new(2, 8.0, 128).unwrap();
    let psi = product_state(grid, 0.0, 0.9, false);
    let same = transform_two_body(&psi, &ClassicalState::at_rest(), 0.0).unwrap();
    assert!(same.psi.iter().zip(&psi.psi).all(|(a, b)| (a - b).norm() < 1e-14));

    let state = ClassicalState::new(Vector3::new(1.3, 0.0, 0.0), Vector3::new(-0.4, 0.0, 0.0));
    let moved = transform_two_body(&psi, &state, 0.37).unwrap();
    let before = relative_marginal(&psi);
    let after = relative_marginal(&moved);
    let worst = before.iter().zip(&after).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst:e}");
    let (rho0, _) = com_moments(&psi);
    let (rho1, p1) = com_moments(&moved);
    assert!((rho1 - rho0 - 1.3).abs() < 1e-10);
    // each particle picks up momentum V
    assert!((p1 - 2.0 * -0.4).abs() < 1e-10);
}

#[test]
fn transform_is_linear_on_entangled_sums() {
    let grid = GridSpec::new(2, 8.0, 128).unwrap();
    let a = product_state(grid, 0.3, 0.8, false);
    let b = product_state(grid, -0.5, 1.1, true);
    let sum = GridWavefunction::new(grid, a.psi.iter().zip(&b.psi).map(|(x, y)| x + Complex64::new(0.0, 0.7) * y).collect(), 0.0).unwrap();
    let state = ClassicalState::new(Vector3::new(-0.9, 0.0, 0.0), Vector3::new(0.25, 0.0, 0.0));
    let ta = transform_two_body(&a, &state, 0.1).unwrap();
    let tb = transform_two_body(&b, &state, 0.1).unwrap();
    let tsum = transform_two_body(&sum, &state, 0.1).unwrap();
    let worst = tsum
        .psi
        .iter()
        .zip(ta.psi.iter().zip(&tb.psi))
        .map(|(s, (x, y))| (s - (x + Complex64::new(0.0, 0.7) * y)).norm())
        .fold(0.0, f64::max);
    assert!(worst < 1e-13);
    let before = relative_marginal(&sum);
    let after = relative_marginal(&tsum);
    assert!(before.iter().zip(&after).all(|(x, y)| (x - y).abs() < 1e-10));
}

#[test]
fn transform_guards_the_boundary() {
    let grid = GridSpec::new(2, 8.0, 128).unwrap();
    let psi = product_state(grid, 0.0, 0.9, false);
    let far = ClassicalState::new(Vector3::new(6.5, 0.0, 0.0), Vector3::zeros());
    assert!(matches!(
        transform_two_body(&psi, &far, 0.0),
        Err(FewBodyError::MeanField(MeanFieldError::ShiftTooLarge { .. }))
    ));
}

#[test]
fn evolution_commutes_with_transform() {
    let p = problem(Interaction::Gaussian { g: 1.0, s: 1.0 }, 128, 8.0);
    let psi0 = spectrum(&p, 2).state(1);
    let schedule = TrapSchedule::Static(TrapSpec::isotropic(p.a).unwrap());
    let s0 = ClassicalState::new(Vector3::new(0.8, 0.0, 0.0), Vector3::new(0.0, 0.0, 0.0));
    let period = 2.0 * PI;
    let traj = integrate_lab(&schedule, &s0, period, 1e-4, StepOptions::default()).unwrap();
    let (s1, f1) = traj.state_at(period).unwrap();
    let dt = 2e-3;
    let a = evolve_two_body(&transform_two_body(&psi0, &s0, 0.0).unwrap(), &p, period, dt).unwrap();
    let b = transform_two_body(&evolve_two_body(&psi0, &p, period, dt).unwrap(), &s1, f1).unwrap();
    let d = a.l2_distance(&b);
    assert!(d < 1e-5, "{d:e}");
}

#[test]
fn com_oscillation_ignores_the_interaction() {
    let r0 = 0.6;
    for (g, s) in [(1.0, 1.0), (4.0, 1.5)] {
        let p = problem(Interaction::Gaussian { g, s }, 128, 8.0);
        let ground = spectrum(&p, 1).state(0);
        let (rho_g, _) = com_moments(&ground);
        let kicked = transform_two_body(&ground, &ClassicalState::new(Vector3::new(r0, 0.0, 0.0), Vector3::zeros()), 0.0).unwrap();
        let trace = com_trace(&kicked, &p, 2.5 * PI, 0.05, 2e-3).unwrap();
        for &(t, rho, mom) in &trace {
            assert!((rho - rho_g - r0 * t.cos()).abs() < 1e-3 * r0, "t={t}: {rho}");
            assert!((mom + 2.0 * r0 * t.sin()).abs() < 2e-3 * r0, "t={t}: {mom}");
        }
        let period = crossing_period(&trace, rho_g).unwrap();
        assert!((period - 2.0 * PI).abs() < 1e-3 * 2.0 * PI, "{period}");
    }
}
