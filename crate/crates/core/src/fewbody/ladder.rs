//! Decomposition of a spectrum into equally spaced center-of-mass ladders
//! built on internal levels.

use serde::Serialize;

/// Default bound above which a fit is flagged as not matching the ladder
/// structure at grid accuracy.
pub const LADDER_BOUND: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderAssignment {
    pub energy: f64,
    /// Internal level index `j`.
    pub internal: usize,
    /// Center-of-mass rung `k`.
    pub rung: usize,
    /// `E − E_I(j) − √a(k + ½)`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderFit {
    pub spacing: f64,
    /// `E_I(j)` for each internal level found.
    pub internal_levels: Vec<f64>,
    pub assignments: Vec<LadderAssignment>,
    pub max_residual: f64,
    /// Least-squares rung spacing across all ladders with two or more rungs;
    /// `None` if no ladder has a second rung.
    pub fitted_spacing: Option<f64>,
    pub bound: f64,
    /// `max_residual > bound`.
    pub flagged: bool,
}

/// Greedy assignment of ascending `energies` to `(j, k)` pairs with
/// `E ≈ E_I(j) + spacing·(k + ½)`.
///
/// Each energy goes to the free `(j, k)` slot with the smallest residual if
/// that residual is below `match_tol`; otherwise it opens a new internal
/// level at `E − spacing/2`.
pub fn ladder_decompose(energies: &[f64], spacing: f64, match_tol: f64, bound: f64) -> LadderFit {
    let mut sorted = energies.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut levels: Vec<f64> = Vec::new();
    let mut used: Vec<Vec<bool>> = Vec::new();
    let mut assignments = Vec::with_capacity(sorted.len());
    for &e in &sorted {
        let best = levels
            .iter()
            .enumerate()
            .filter_map(|(j, &base)| {
                let k = ((e - base) / spacing - 0.5).round();
                if k < 0.0 {
                    return None;
                }
                let k = k as usize;
                if used[j].get(k).copied().unwrap_or(false) {
                    return None;
                }
                let r = e - base - spacing * (k as f64 + 0.5);
                Some((j, k, r))
            })
            .min_by(|a, b| a.2.abs().total_cmp(&b.2.abs()));
        match best {
            Some((j, k, r)) if r.abs() <= match_tol => {
                if used[j].len() <= k {
                    used[j].resize(k + 1, false);
                }
                used[j][k] = true;
                assignments.push(LadderAssignment {
                    energy: e,
                    internal: j,
                    rung: k,
                    residual: r,
                });
            }
            _ => {
                levels.push(e - 0.5 * spacing);
                used.push(vec![true]);
                assignments.push(LadderAssignment {
                    energy: e,
                    internal: levels.len() - 1,
                    rung: 0,
                    residual: 0.0,
                });
            }
        }
    }
    let max_residual = assignments.iter().map(|a| a.residual.abs()).fold(0.0, f64::max);
    LadderFit {
        spacing,
        fitted_spacing: fitted_spacing(&assignments, levels.len()),
        internal_levels: levels,
        assignments,
        max_residual,
        bound,
        flagged: max_residual > bound,
    }
}

/// Pooled within-ladder regression of energy on rung index.
fn fitted_spacing(assignments: &[LadderAssignment], ladders: usize) -> Option<f64> {
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for j in 0..ladders {
        let pts: Vec<(f64, f64)> = assignments
            .iter()
            .filter(|a| a.internal == j)
            .map(|a| (a.rung as f64, a.energy))
            .collect();
        if pts.len() < 2 {
            continue;
        }
        let n = pts.len() as f64;
        let mk = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let me = pts.iter().map(|p| p.1).sum::<f64>() / n;
        sxy += pts.iter().map(|p| (p.0 - mk) * (p.1 - me)).sum::<f64>();
        sxx += pts.iter().map(|p| (p.0 - mk).powi(2)).sum::<f64>();
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_index_spectrum() {
        let w = 2f64.sqrt();
        let mut e = Vec::new();
        for k in 0..4 {
            for j in 0..3 {
                e.push((k as f64 + 0.5) + w * (j as f64 + 0.5));
            }
        }
        let fit = ladder_decompose(&e, 1.0, 0.05, LADDER_BOUND);
        assert!(fit.max_residual < 1e-12);
        assert_eq!(fit.internal_levels.len(), 3);
        for (j, level) in fit.internal_levels.iter().enumerate() {
            assert!((level - w * (j as f64 + 0.5)).abs() < 1e-12);
        }
        assert!((fit.fitted_spacing.unwrap() - 1.0).abs() < 1e-12);
        assert!(!fit.flagged);
    }

    #[test]
    fn degenerate_levels_get_distinct_slots() {
        // κ = 0: internal ladder has the same spacing as the COM ladder
        let e = [1.0, 2.0, 2.0, 3.0, 3.0, 3.0];
        let fit = ladder_decompose(&e, 1.0, 0.05, LADDER_BOUND);
        assert_eq!(fit.max_residual, 0.0);
        let mut slots: Vec<(usize, usize)> = fit.assignments.iter().map(|a| (a.internal, a.rung)).collect();
        slots.sort();
        slots.dedup();
        assert_eq!(slots.len(), e.len());
    }

    #[test]
    fn off_ladder_energy_is_flagged() {
        let e = [0.5, 1.5, 2.5004];
        let fit = ladder_decompose(&e, 1.0, 0.05, 1e-4);
        assert!(fit.flagged);
        assert!((fit.max_residual - 4e-4).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn exact_ladders_fit_exactly(levels in prop::collection::vec(0.0f64..20.0, 1..4), rungs in 1usize..5, spacing in 0.3f64..3.0) {
            let mut levels = levels;
            levels.sort_by(f64::total_cmp);
            // keep internal levels off each other's rungs
            for (i, a) in levels.iter().enumerate() {
                for b in &levels[i + 1..] {
                    let d = ((b - a) / spacing).fract();
                    prop_assume!(d > 0.05 && d < 0.95);
                }
            }
            let e: Vec<f64> = levels
                .iter()
                .flat_map(|b| (0..rungs).map(move |k| b + spacing * (k as f64 + 0.5)))
                .collect();
            let fit = ladder_decompose(&e, spacing, 0.01 * spacing, LADDER_BOUND);
            prop_assert!(fit.max_residual < 1e-9);
            prop_assert_eq!(fit.assignments.len(), e.len());
        }
    }
}
