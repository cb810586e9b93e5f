//! One function per subcommand.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use nalgebra::Vector3;
use serde::Serialize;

use comtrap::classical::{
    action_boundary, integrate_lab, integrate_lab_through, integrate_rotating, step_bound, ClassicalError,
    ClassicalState, StepOptions, Trajectory,
};
use comtrap::config::RunConfig;
use comtrap::fewbody::{self, relative_marginal, transform_two_body, FewBodyProblem, Interaction};
use comtrap::fewbody::EigenOptions;
use comtrap::meanfield::{
    self, displace, ground_state, verify_family as check_family, write_snapshot, Dynamics, FamilyReport,
    FamilyTolerance, GridSpec, GroundStateOptions, Nonlinearity,
};
use comtrap::spectral::{self, discriminant, instability_window, omega_grid, omega_pm, sweep};
use comtrap::trap::{RotationSpec, TrapSchedule, TrapSpec, UnitAxis};
use comtrap::Execution;

use crate::parse;
use crate::CheckFailed;

/// Step used for the classical reference trajectory in family checks.
const CLASSICAL_DT: f64 = 1e-4;

fn load(path: &Path) -> Result<RunConfig> {
    Ok(RunConfig::load(path)?)
}

fn load_or_unit(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => load(p),
        None => Ok(RunConfig::from_json(r#"{"trap":{"ax":1,"ay":1,"az":1}}"#)?),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// 17 significant digits, enough to round-trip an `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Rotation axis from the config, else the `--axis` flag.
fn resolve_axis(cfg: &RunConfig, flag: Option<[f64; 3]>) -> Result<UnitAxis> {
    if let Some(v) = flag {
        return UnitAxis::new(Vector3::from(v)).context("--axis must be a non-zero vector");
    }
    Ok(cfg.rotation_spec()?.axis().unwrap_or_else(UnitAxis::z))
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Rotation speeds as start:stop:step.
    #[arg(long, value_parser = parse::range, default_value = "0:3:0.01")]
    pub omega_range: (f64, f64, f64),
    /// Rotation axis `x,y,z`; defaults to the config rotation axis, else z.
    #[arg(long, value_parser = parse::vec3)]
    pub axis: Option<[f64; 3]>,
    /// Output CSV (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn spectrum(args: &SpectrumArgs, exec: Execution) -> Result<()> {
    let cfg = load(&args.config)?;
    let trap = cfg.trap_spec()?;
    let axis = resolve_axis(&cfg, args.axis)?;
    let (start, stop, step) = args.omega_range;
    let omegas = omega_grid(start, stop, step)?;
    let rows = sweep(&trap, &axis, &omegas, exec);
    let mut csv = String::from("omega,re_w1sq,im_w1sq,re_w2sq,im_w2sq,re_w3sq,im_w3sq,classification\n");
    for row in &rows {
        let f = &row.frequencies;
        let _ = write!(csv, "{}", num(row.omega));
        for z in &f.omega_sq {
            let _ = write!(csv, ",{},{}", num(z.re), num(z.im));
        }
        let _ = writeln!(csv, ",{}", f.classification);
    }
    log::info!("swept {} rotation speeds", rows.len());
    write_out(args.out.as_deref(), &csv)
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Rotation axis `x,y,z`; defaults to the config rotation axis, else z.
    #[arg(long, value_parser = parse::vec3)]
    pub axis: Option<[f64; 3]>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct WindowOut {
    lo: f64,
    hi: f64,
    degenerate: bool,
    kind: spectral::WindowKind,
    axis: [f64; 3],
    /// Window discriminant, direct and rearranged forms.
    delta: f64,
    delta_rearranged: f64,
    delta_scale: f64,
    /// Edges found independently by bisection on the free term.
    bisection: spectral::StabilityWindow,
}

pub fn window(args: &WindowArgs) -> Result<()> {
    let cfg = load(&args.config)?;
    let trap = cfg.trap_spec()?;
    let axis = resolve_axis(&cfg, args.axis)?;
    let w = instability_window(&trap, &axis);
    let d = discriminant(&trap, &axis);
    let out = WindowOut {
        lo: w.lo,
        hi: w.hi,
        degenerate: w.is_degenerate(),
        kind: w.kind,
        axis: (*axis.as_vector()).into(),
        delta: d.direct,
        delta_rearranged: d.rearranged,
        delta_scale: d.scale,
        bisection: spectral::bisection_window(&trap, &axis)?,
    };
    write_out(args.out.as_deref(), &to_json(&out)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FrameArg {
    Lab,
    Rot,
}

#[derive(Debug, Args)]
pub struct TrajectoryArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_parser = parse::vec3, default_value = "1,0,0")]
    pub r0: [f64; 3],
    #[arg(long, value_parser = parse::vec3, default_value = "0,0,0")]
    pub v0: [f64; 3],
    #[arg(long)]
    pub t_end: f64,
    #[arg(long)]
    pub dt: f64,
    #[arg(long, value_enum, default_value = "lab")]
    pub frame: FrameArg,
    /// Accept a step above 1/50 of the shortest period.
    #[arg(long)]
    pub force: bool,
    /// Output CSV (stdout if omitted; the summary then goes to stderr).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct TrajectorySummary {
    frame: &'static str,
    samples: usize,
    t_end: f64,
    r_end: [f64; 3],
    v_end: [f64; 3],
    /// Accumulated action and its boundary-term form (lab frame only).
    f_end: Option<f64>,
    f_boundary_end: Option<f64>,
    max_radius: f64,
    aborted: bool,
}

fn trajectory_csv(traj: &Trajectory) -> String {
    let mut csv = String::from("t,Rx,Ry,Rz,Vx,Vy,Vz,f\n");
    for (i, s) in traj.samples.iter().enumerate() {
        let f = traj.action.as_ref().map_or(f64::NAN, |a| a[i]);
        let _ = write!(csv, "{}", num(s.t));
        for x in s.r.iter().chain(s.v.iter()) {
            let _ = write!(csv, ",{}", num(*x));
        }
        let _ = writeln!(csv, ",{}", if f.is_nan() { "nan".to_string() } else { num(f) });
    }
    csv
}

pub fn trajectory(args: &TrajectoryArgs) -> Result<()> {
    let cfg = load(&args.config)?;
    let s0 = ClassicalState::new(Vector3::from(args.r0), Vector3::from(args.v0));
    let opts = StepOptions { force: args.force };
    let result = match args.frame {
        FrameArg::Lab => integrate_lab(&cfg.schedule()?, &s0, args.t_end, args.dt, opts),
        FrameArg::Rot => integrate_rotating(&cfg.trap_spec()?, &cfg.rotation_spec()?, &s0, args.t_end, args.dt, opts),
    };
    let (traj, failure) = match result {
        Ok(t) => (t, None),
        Err(ClassicalError::Runaway { t, factor, partial }) => {
            let err = ClassicalError::Runaway {
                t,
                factor,
                partial: partial.clone(),
            };
            (*partial, Some(err))
        }
        Err(e) => return Err(e.into()),
    };
    let last = traj.last();
    let summary = TrajectorySummary {
        frame: match args.frame {
            FrameArg::Lab => "lab",
            FrameArg::Rot => "rot",
        },
        samples: traj.len(),
        t_end: last.t,
        r_end: last.r.into(),
        v_end: last.v.into(),
        f_end: traj.action.as_ref().and_then(|a| a.last().copied()),
        f_boundary_end: traj.action.as_ref().and_then(|_| action_boundary(&traj).last().copied()),
        max_radius: traj.samples.iter().map(|s| s.r.norm()).fold(0.0, f64::max),
        aborted: failure.is_some(),
    };
    write_out(args.out.as_deref(), &trajectory_csv(&traj))?;
    let line = serde_json::to_string(&summary)?;
    if args.out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Trap config; defaults to the isotropic unit trap.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Cubic coupling in `G = g|ψ|²`.
    #[arg(long, default_value_t = 1.0)]
    pub g: f64,
    /// Initial classical displacement: `x` or `x,y`.
    #[arg(long, value_parser = parse::floats, default_value = "0.7")]
    pub r0: parse::Floats,
    #[arg(long, value_parser = parse::floats, default_value = "1.57,3.14,6.28")]
    pub t_checks: parse::Floats,
    /// Grid dimension, 1 or 2.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Points per axis (default 1024 in 1D, 128 in 2D).
    #[arg(long)]
    pub points: Option<usize>,
    /// Grid half-width.
    #[arg(long, default_value_t = 8.0)]
    pub extent: f64,
    /// Split-step time step.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Quartic perturbation `c·r⁴`, which should break the family.
    #[arg(long, default_value_t = 0.0)]
    pub quartic: f64,
    /// Write ground and displaced initial states as binary snapshots here.
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct VerifyOut {
    dim: usize,
    points: usize,
    extent: f64,
    g: f64,
    quartic: f64,
    r0: [f64; 2],
    ground_state_mu: f64,
    ground_state_energy: Option<f64>,
    passed: bool,
    report: FamilyReport,
}

/// The grid dimensions must not couple to the rest of the trap.
fn check_decoupled(schedule: &TrapSchedule, dim: usize) -> Result<()> {
    let coupled = |a: &nalgebra::Matrix3<f64>| (0..dim).any(|i| (dim..3).any(|j| a[(i, j)].abs() > 1e-12 * a.norm()));
    let probes = [0.0, 0.5, 1.0, 2.0];
    if probes.iter().any(|&t| coupled(&schedule.matrix_at(t))) {
        bail!("the trap couples the {dim}D grid axes to the remaining axes; pick a config with a principal axis there");
    }
    Ok(())
}

pub fn verify_family(args: &VerifyArgs) -> Result<()> {
    let cfg = load_or_unit(args.config.as_deref())?;
    let schedule = cfg.schedule()?;
    if !matches!(args.dim, 1 | 2) {
        bail!("--dim must be 1 or 2");
    }
    check_decoupled(&schedule, args.dim)?;
    if args.t_checks.0.iter().any(|&t| t <= 0.0 || t.is_nan()) {
        bail!("check times must be positive");
    }
    let r0 = match (args.dim, args.r0.0.as_slice()) {
        (_, [x]) => [*x, 0.0],
        (2, [x, y]) => [*x, *y],
        _ => bail!("--r0 takes one value in 1D and one or two in 2D"),
    };
    let points = args.points.unwrap_or(if args.dim == 1 { 1024 } else { 128 });
    let grid = GridSpec::new(args.dim, args.extent, points)?;
    let dynamics = Dynamics::new(schedule, Nonlinearity::cubic(args.g)).with_quartic(args.quartic);
    let ground = ground_state(grid, &dynamics, 1.0, &GroundStateOptions::default())?;
    log::info!("ground state μ = {:.12} after {} steps", ground.mu, ground.steps);
    let s0 = ClassicalState::new(Vector3::new(r0[0], r0[1], 0.0), Vector3::zeros());
    let traj = integrate_lab_through(&dynamics.trap, &s0, &args.t_checks.0, CLASSICAL_DT, StepOptions::default())?;
    if let Some(dir) = &args.dump_dir {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        write_snapshot(&ground.psi, &dir.join("ground"))?;
        write_snapshot(&displace(&ground.psi, &s0, 0.0)?, &dir.join("displaced"))?;
    }
    let report = check_family(&ground.psi, &traj, &dynamics, &args.t_checks.0, args.dt, FamilyTolerance::default())?;
    let out = VerifyOut {
        dim: args.dim,
        points,
        extent: args.extent,
        g: args.g,
        quartic: args.quartic,
        r0,
        ground_state_mu: ground.mu,
        ground_state_energy: meanfield::energy(&ground.psi, &dynamics, 0.0),
        passed: report.passed,
        report,
    };
    write_out(args.out.as_deref(), &to_json(&out)?)?;
    if !out.passed {
        return Err(CheckFailed(format!(
            "family check failed: max L2 distance {:.3e}, max COM mismatch {:.3e}",
            out.report.max_l2_distance, out.report.max_com_mismatch
        ))
        .into());
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct FewBodyArgs {
    /// Trap strength (squared frequency).
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    /// `harmonic:κ` or `gaussian:g,s`.
    #[arg(long, value_parser = parse::interaction, default_value = "harmonic:0.5")]
    pub interaction: Interaction,
    /// `N,L`: points per axis and half-width.
    #[arg(long, value_parser = parse::grid, default_value = "128,6")]
    pub grid: (usize, f64),
    /// Number of eigenpairs.
    #[arg(long, default_value_t = 12)]
    pub k: usize,
    /// Eigen-residual tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Also apply the displacement transform with this `R,V` to the ground
    /// state and report the internal-structure invariance.
    #[arg(long, value_parser = parse::floats)]
    pub transform: Option<parse::Floats>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct TransformOut {
    r: f64,
    v: f64,
    /// Largest change in the density of `x₁ − x₂`.
    relative_marginal_change: f64,
    com_before: f64,
    com_after: f64,
    momentum_before: f64,
    momentum_after: f64,
}

#[derive(Serialize)]
struct FewBodyOut {
    a: f64,
    interaction: Interaction,
    points: usize,
    extent: f64,
    #[serde(flatten)]
    spectrum: fewbody::FewBodySpectrum,
    orthonormality_error: f64,
    transform: Option<TransformOut>,
}

pub fn fewbody(args: &FewBodyArgs, exec: Execution) -> Result<()> {
    let (points, extent) = args.grid;
    let grid = GridSpec::new(2, extent, points)?;
    let problem = FewBodyProblem::new(args.a, args.interaction, grid)?;
    let opts = EigenOptions {
        tol: args.tol,
        ..EigenOptions::default()
    };
    let spectrum = fewbody::solve(&problem, args.k, &opts, exec)?;
    let transform = match args.transform.as_ref().map(|f| f.0.as_slice()) {
        None => None,
        Some(rv) => {
            let (r, v) = match rv {
                [r] => (*r, 0.0),
                [r, v] => (*r, *v),
                _ => bail!("--transform takes R or R,V"),
            };
            let psi = spectrum.state(0);
            let state = ClassicalState::new(Vector3::new(r, 0.0, 0.0), Vector3::new(v, 0.0, 0.0));
            let moved = transform_two_body(&psi, &state, 0.0)?;
            let (before, after) = (relative_marginal(&psi), relative_marginal(&moved));
            let change = before.iter().zip(&after).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let (c0, p0) = fewbody::com_moments(&psi);
            let (c1, p1) = fewbody::com_moments(&moved);
            Some(TransformOut {
                r,
                v,
                relative_marginal_change: change,
                com_before: c0,
                com_after: c1,
                momentum_before: p0,
                momentum_after: p1,
            })
        }
    };
    let out = FewBodyOut {
        a: args.a,
        interaction: args.interaction,
        points,
        extent,
        orthonormality_error: spectrum.orthonormality_error(),
        spectrum,
        transform,
    };
    write_out(args.out.as_deref(), &to_json(&out)?)
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Serialize)]
struct ModeOut {
    omega_sq: [[f64; 2]; 3],
    classification: spectral::Classification,
    margin: f64,
}

#[derive(Serialize)]
struct CheckOut {
    trap_matrix: [[f64; 3]; 3],
    principal_values: [f64; 3],
    rotation_rate: f64,
    schedule: &'static str,
    invariants: comtrap::Invariants,
    charpoly: spectral::CharPoly,
    modes: ModeOut,
    /// Closed-form in-plane modes when the rotation is about a principal axis.
    perpendicular_modes: Option<spectral::PerpendicularModes>,
    max_frequency: f64,
    classical_step_bound: f64,
    seed: Option<u64>,
}

/// Squared frequencies of the two principal axes perpendicular to `axis`,
/// if `axis` is itself principal.
fn perpendicular_pair(trap: &TrapSpec, axis: &UnitAxis) -> Option<(f64, f64)> {
    let n = trap.to_principal_frame(axis.as_vector());
    let k = (0..3).find(|&k| (n[k].abs() - 1.0).abs() < 1e-12)?;
    let a = trap.principal_values();
    let others: Vec<f64> = (0..3).filter(|&j| j != k).map(|j| a[j]).collect();
    Some((others[0], others[1]))
}

pub fn check(args: &CheckArgs) -> Result<()> {
    let cfg = load(&args.config)?;
    let trap = cfg.trap_spec()?;
    let rot = cfg.rotation_spec()?;
    let schedule = cfg.schedule()?;
    let inv = comtrap::trap::invariants(&trap, &rot);
    let p = spectral::build_charpoly(&inv);
    let f = spectral::solve_charpoly(&p);
    let m = trap.matrix();
    let perpendicular_modes = match rot {
        RotationSpec::None => None,
        RotationSpec::About { .. } => rot
            .axis()
            .and_then(|n| perpendicular_pair(&trap, &n))
            .map(|(ax, ay)| omega_pm(ax, ay, rot.rate())),
    };
    let out = CheckOut {
        trap_matrix: std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)])),
        principal_values: (*trap.principal_values()).into(),
        rotation_rate: rot.rate(),
        schedule: match schedule {
            TrapSchedule::Static(_) => "static",
            TrapSchedule::Rotating { .. } => "rotating",
            TrapSchedule::Modulated { .. } => "modulated",
        },
        invariants: inv,
        charpoly: p,
        modes: ModeOut {
            omega_sq: f.omega_sq.map(|z| [z.re, z.im]),
            classification: f.classification,
            margin: f.margin,
        },
        perpendicular_modes,
        max_frequency: schedule.max_frequency(),
        classical_step_bound: step_bound(schedule.max_frequency()),
        seed: cfg.seed,
    };
    write_out(None, &to_json(&out)?)
}
