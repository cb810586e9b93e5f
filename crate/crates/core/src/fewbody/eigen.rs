//! Chebyshev-filtered subspace iteration for the low end of a real
//! symmetric operator.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::Execution;

/// A real symmetric operator given by its action.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// An upper bound on the spectrum.
    fn upper_bound(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenOptions {
    /// Bound on `‖Hv − λv‖/‖v‖` for each requested pair.
    pub tol: f64,
    /// Chebyshev polynomial degree per outer iteration.
    pub degree: usize,
    /// Extra block vectors beyond the number requested.
    pub guard_vectors: usize,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            degree: 100,
            guard_vectors: 8,
            max_iterations: 400,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// Unit ℓ² columns.
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Failure carrying the worst residual reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotConverged {
    pub residual: f64,
    pub iterations: usize,
}

/// Lowest `k` eigenpairs of `op` restricted to the range of `project`
/// (an orthogonal projector commuting with `op`, applied in place).
pub fn lowest<P>(
    op: &dyn SymmetricOperator,
    k: usize,
    project: P,
    opts: &EigenOptions,
    exec: Execution,
) -> Result<EigenPairs, NotConverged>
where
    P: Fn(&mut [f64]) + Sync + Send,
{
    let n = op.dim();
    let m = (k + opts.guard_vectors).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut block: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            project(&mut v);
            v
        })
        .collect();
    let hi = op.upper_bound();
    let mut ritz = rayleigh_ritz(op, &mut block, exec);
    let mut worst = f64::INFINITY;
    for iter in 1..=opts.max_iterations {
        let lo = *ritz.values.last().expect("non-empty block");
        let degree = opts.degree;
        exec.for_each_mut(&mut block, |_, v| {
            chebyshev_filter(op, v, lo, hi, degree);
            project(v);
        });
        ritz = rayleigh_ritz(op, &mut block, exec);
        worst = ritz.residuals[..k].iter().copied().fold(0.0, f64::max);
        log::trace!("subspace iteration {iter}: worst residual {worst:.3e}");
        if worst <= opts.tol {
            return Ok(EigenPairs {
                values: ritz.values[..k].to_vec(),
                vectors: block.into_iter().take(k).collect(),
                residuals: ritz.residuals[..k].to_vec(),
                iterations: iter,
            });
        }
    }
    Err(NotConverged {
        residual: worst,
        iterations: opts.max_iterations,
    })
}

struct Ritz {
    values: Vec<f64>,
    residuals: Vec<f64>,
}

/// Orthonormalizes `block`, rotates it onto Ritz vectors (ascending) and
/// returns Ritz values with residual norms.
fn rayleigh_ritz(op: &dyn SymmetricOperator, block: &mut [Vec<f64>], exec: Execution) -> Ritz {
    let n = op.dim();
    let m = block.len();
    let y = DMatrix::from_fn(n, m, |i, j| block[j][i]);
    let q = orthonormalize(y);
    let hq_cols = exec.map(m, |j| {
        let mut out = vec![0.0; n];
        op.apply(q.column(j).as_slice(), &mut out);
        out
    });
    let hq = DMatrix::from_fn(n, m, |i, j| hq_cols[j][i]);
    let g = q.transpose() * &hq;
    let g = (&g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let rot = DMatrix::from_fn(m, m, |i, j| eig.eigenvectors[(i, order[j])]);
    let x = &q * &rot;
    let hx = &hq * &rot;
    let residuals = (0..m)
        .map(|j| {
            let r: DVector<f64> = hx.column(j) - x.column(j) * values[j];
            r.norm()
        })
        .collect();
    for (j, col) in block.iter_mut().enumerate() {
        col.copy_from_slice(x.column(j).as_slice());
    }
    Ritz { values, residuals }
}

/// CholeskyQR applied twice, with Householder QR as the fallback when the
/// Gram matrix is numerically singular.
fn orthonormalize(y: DMatrix<f64>) -> DMatrix<f64> {
    let once = |y: &DMatrix<f64>| -> Option<DMatrix<f64>> {
        let gram = y.transpose() * y;
        let l = gram.cholesky()?.l();
        let r_inv = l.transpose().try_inverse()?;
        Some(y * r_inv)
    };
    match once(&y).and_then(|q| once(&q)) {
        Some(q) => q,
        None => y.qr().q(),
    }
}

/// Applies `T_d` of `op` mapped so that `[lo, hi]` lands on `[−1, 1]`,
/// amplifying everything below `lo`. The result is rescaled to unit norm.
fn chebyshev_filter(op: &dyn SymmetricOperator, x: &mut [f64], lo: f64, hi: f64, degree: usize) {
    let n = x.len();
    let e = 0.5 * (hi - lo);
    let c = 0.5 * (hi + lo);
    let mut prev = x.to_vec();
    let mut cur = vec![0.0; n];
    let mut next = vec![0.0; n];
    let (inv_e, two_inv_e) = (1.0 / e, 2.0 / e);
    op.apply(&prev, &mut cur);
    for (y, x) in cur.iter_mut().zip(&prev) {
        *y = (*y - c * x) * inv_e;
    }
    for _ in 1..degree {
        op.apply(&cur, &mut next);
        for ((y, x), p) in next.iter_mut().zip(&cur).zip(&prev) {
            *y = (*y - c * x) * two_inv_e - p;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    let norm = cur.iter().map(|v| v * v).sum::<f64>().sqrt();
    for (xi, ci) in x.iter_mut().zip(&cur) {
        *xi = ci / norm;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dirichlet Laplacian on a chain: eigenvalues 2 − 2cos(πj/(n+1)).
    struct Chain(usize);

    impl SymmetricOperator for Chain {
        fn dim(&self) -> usize {
            self.0
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            let n = self.0;
            for i in 0..n {
                let left = if i > 0 { x[i - 1] } else { 0.0 };
                let right = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = 2.0 * x[i] - left - right;
            }
        }
        fn upper_bound(&self) -> f64 {
            4.0
        }
    }

    #[test]
    fn chain_spectrum() {
        let n = 400;
        let op = Chain(n);
        let pairs = lowest(&op, 6, |_| {}, &EigenOptions::default(), Execution::Sequential).unwrap();
        for (j, v) in pairs.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (j + 1) as f64 / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
        }
        assert!(pairs.residuals.iter().all(|r| *r <= 1e-8));
    }

    #[test]
    fn projected_sector_and_execution_agree() {
        let n = 300;
        let op = Chain(n);
        // reflection-odd sector
        let odd = |v: &mut [f64]| {
            let len = v.len();
            for i in 0..len / 2 {
                let a = 0.5 * (v[i] - v[len - 1 - i]);
                v[i] = a;
                v[len - 1 - i] = -a;
            }
        };
        let seq = lowest(&op, 4, odd, &EigenOptions::default(), Execution::Sequential).unwrap();
        let par = lowest(&op, 4, odd, &EigenOptions::default(), Execution::Parallel).unwrap();
        for (j, (a, b)) in seq.values.iter().zip(&par.values).enumerate() {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (2 * j + 2) as f64 / (n + 1) as f64).cos();
            assert!((a - exact).abs() < 1e-12);
            assert!((a - b).abs() < 1e-13);
        }
    }
}
