//! Sequential vs data-parallel execution of the main sweeps.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::Vector3;
use num_complex::Complex64;

use comtrap::classical::{integrate_batch, ClassicalState, StepOptions};
use comtrap::fewbody::{self, EigenOptions, FewBodyProblem, Interaction};
use comtrap::meanfield::{Fourier, GridSpec, GridWavefunction};
use comtrap::spectral::{omega_grid, sweep};
use comtrap::trap::{TrapSchedule, TrapSpec, UnitAxis};
use comtrap::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn spectrum_sweep(c: &mut Criterion) {
    let trap = TrapSpec::diagonal(1.0, 4.0, 9.0).unwrap();
    let axis = UnitAxis::new(Vector3::new(0.3, 0.4, 0.8)).unwrap();
    let omegas = omega_grid(0.0, 3.0, 1e-4).unwrap();
    let mut g = c.benchmark_group("spectrum_sweep_30k");
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| black_box(sweep(&trap, &axis, &omegas, exec))));
    }
    g.finish();
}

fn trajectory_batch(c: &mut Criterion) {
    let schedule = TrapSchedule::Static(TrapSpec::diagonal(1.0, 2.0, 3.0).unwrap());
    let starts: Vec<ClassicalState> = (0..64)
        .map(|i| ClassicalState::new(Vector3::new(0.01 * i as f64, 0.5, -0.2), Vector3::zeros()))
        .collect();
    let mut g = c.benchmark_group("trajectory_batch_64");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| black_box(integrate_batch(&schedule, &starts, 20.0, 1e-3, StepOptions::default(), exec)))
        });
    }
    g.finish();
}

fn fewbody_solve(c: &mut Criterion) {
    let grid = GridSpec::new(2, 4.0, 64).unwrap();
    let problem = FewBodyProblem::new(1.0, Interaction::Gaussian { g: 1.0, s: 1.0 }, grid).unwrap();
    let opts = EigenOptions::default();
    let mut g = c.benchmark_group("fewbody_solve_64");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| black_box(fewbody::solve(&problem, 6, &opts, exec).unwrap())));
    }
    g.finish();
}

fn fft_2d(c: &mut Criterion) {
    let mut g = c.benchmark_group("fft_2d_roundtrip");
    for points in [128usize, 256] {
        let grid = GridSpec::new(2, 8.0, points).unwrap();
        let psi = GridWavefunction::from_fn(grid, |[x, y]| Complex64::new((-(x * x + y * y)).exp(), 0.0));
        for (name, exec) in MODES {
            let fourier = Fourier::new(grid, exec);
            g.bench_with_input(BenchmarkId::new(name, points), &psi, |b, psi| {
                let mut data = psi.psi.clone();
                b.iter(|| {
                    fourier.forward(&mut data);
                    fourier.inverse(&mut data);
                    black_box(&data);
                })
            });
        }
    }
    g.finish();
}

criterion_group!(benches, spectrum_sweep, trajectory_batch, fewbody_solve, fft_2d);
criterion_main!(benches);
