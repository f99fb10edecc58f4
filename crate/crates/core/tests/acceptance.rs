//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the PASS/FAIL table is always printed; exits non-zero if any line fails.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use subham_core::analytic::{coupled_system, ClosedForm, Coupled2d, DampedOscillator, Drag1d};
use subham_core::integrators::{integrate, integrate_hamiltonian, IntegratorConfig, Method};
use subham_core::model::{Matrix, State, SystemDefinition, Trajectory};
use subham_core::reconstruction::{equivalent_stiffness, reconstruct, Reconstruction, ReconstructionOptions};
use subham_core::verification::{
    check_coincidence, default_perturbations, gradient_audit, hamiltonian_constancy, identity_audit, restriction_audit,
    stiffness_consistency, substitute_volume_audit, uniqueness_probe, volume_audit, AuditReport, ProbeConfig,
};

const FORCE_TOL: f64 = 1e-6;
const HAMILTONIAN_TOL: f64 = 1e-6;
const COINCIDENCE_TOL: f64 = 1e-6;
const PERTURBATION: f64 = 1e-2;
const DIVERGENCE_TOL: f64 = 1e-3;
const VOLUME_REL_TOL: f64 = 1e-6;
const SUBSTITUTE_VOLUME_TOL: f64 = 1e-6;
const RESTRICTION_TOL: f64 = 1e-6;
const GRADIENT_TOL: f64 = 1e-5;
const GRADIENT_SAMPLES: usize = 100;
const IDENTITY_TOL: f64 = 1e-12;
const STIFFNESS_TOL: f64 = 1e-6;
const STIFFNESS_SAMPLES: usize = 100;
const SUBSTITUTE_STEP: f64 = 1e-3;
const SEED: u64 = 20;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion = (&'static str, fn() -> Outcome);

fn opts() -> ReconstructionOptions {
    ReconstructionOptions::default()
}

fn drag_run() -> Result<(SystemDefinition, Trajectory, Reconstruction), Box<dyn std::error::Error>> {
    let oracle = Drag1d::new(1.0, 0.0, 1.0)?;
    let sys = oracle.system();
    let traj = integrate(&sys, &oracle.state(0.0), &IntegratorConfig::rk45(5.0, 1e-10))?;
    let rec = reconstruct(&traj, &sys, &opts())?;
    Ok((sys, traj, rec))
}

fn coupled_run(t_end: f64) -> Result<(SystemDefinition, Trajectory, Reconstruction), Box<dyn std::error::Error>> {
    let sys = coupled_system();
    let ic = State::from_slices(0.0, &[0.0, 0.0], &[1.0, -1.0]);
    let traj = integrate(&sys, &ic, &IntegratorConfig::rk45(t_end, 1e-12))?;
    let rec = reconstruct(&traj, &sys, &opts())?;
    Ok((sys, traj, rec))
}

fn oscillator_run() -> Result<(SystemDefinition, Trajectory, Reconstruction), Box<dyn std::error::Error>> {
    let oracle = DampedOscillator::new(0.1, 1.0, 1.0, 0.0)?;
    let sys = oracle.system();
    let cfg = IntegratorConfig::rk45(4.0 * std::f64::consts::PI, 1e-10).with_output_step(1e-3);
    let traj = integrate(&sys, &oracle.state(0.0), &cfg)?;
    let rec = reconstruct(&traj, &sys, &opts())?;
    Ok((sys, traj, rec))
}

/// Reconstructed drag force against `x - 1` on the visited range.
fn drag_force() -> Outcome {
    let (_, _, rec) = drag_run()?;
    let force = rec.forces[0].as_ref().ok_or("drag coordinate did not move")?;
    if force.branches.len() != 1 {
        return Ok((false, format!("{} branches, expected 1", force.branches.len())));
    }
    let hi = 1.0 - (-5.0f64).exp();
    let mut worst = 0.0f64;
    for k in 0..=2000 {
        let x = hi * k as f64 / 2000.0;
        worst = worst.max((force.eval(0, x)? - (x - 1.0)).abs());
    }
    Ok((worst <= FORCE_TOL, format!("max |F - (x - 1)| = {worst:.3e} <= {FORCE_TOL:e}")))
}

/// Substitute Hamiltonian constant along the drag curve and equal to 1/2.
fn drag_hamiltonian() -> Outcome {
    let (_, traj, rec) = drag_run()?;
    let r = hamiltonian_constancy(&rec.substitute, &traj, HAMILTONIAN_TOL)?;
    let value = r.value("initial_value").unwrap_or(f64::NAN);
    let offset = (value - 0.5).abs();
    let dev = r.value("max_deviation").unwrap_or(f64::NAN);
    Ok((r.pass() && offset <= HAMILTONIAN_TOL, format!("value {value:.12}, |H - 0.5| = {offset:.3e}, drift {dev:.3e}")))
}

/// Symplectic substitute run reproduces the coupled trajectory on [0, 5].
fn coupled_coincidence() -> Outcome {
    let (_, traj, rec) = coupled_run(5.0)?;
    let sub = integrate_hamiltonian(
        &rec.substitute,
        traj.ic(),
        &IntegratorConfig::fixed(Method::Gauss4, 5.0, SUBSTITUTE_STEP),
    )?;
    let r = check_coincidence(&traj, &sub, COINCIDENCE_TOL)?;
    let sup = r.value("sup_norm").unwrap_or(f64::NAN);
    let end = r.value("window_end").unwrap_or(f64::NAN);
    // closed-form check on the original run
    let oracle = Coupled2d::new([0.0, 0.0], [1.0, -1.0])?;
    let exact = traj.samples().iter().map(|s| s.phase_distance(&oracle.state(s.t))).fold(0.0, f64::max);
    Ok((
        r.pass() && end == 5.0 && exact <= COINCIDENCE_TOL,
        format!("sup-norm {sup:.3e} <= {COINCIDENCE_TOL:e} on [0, {end}], original vs closed form {exact:.3e}"),
    ))
}

fn divergences(r: &AuditReport) -> Vec<(String, f64)> {
    r.metrics().iter().filter_map(|m| m.name.strip_suffix(".divergence").map(|l| (l.to_string(), m.value))).collect()
}

/// Every evaluable single-coordinate perturbation separates the two flows.
fn uniqueness() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, (sys, traj, rec)) in [("drag", drag_run()?), ("coupled", coupled_run(5.0)?)] {
        let cfg = ProbeConfig {
            original: IntegratorConfig::rk45(5.0, 1e-10),
            substitute: IntegratorConfig::fixed(Method::Gauss4, 5.0, SUBSTITUTE_STEP),
            coincidence_tol: COINCIDENCE_TOL,
            divergence_tol: DIVERGENCE_TOL,
        };
        let deltas = default_perturbations(traj.ic(), PERTURBATION);
        let r = uniqueness_probe(&sys, &rec.substitute, traj.ic(), &deltas, &cfg)?;
        let div = divergences(&r);
        let min = div.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
        ok &= r.pass() && !div.is_empty() && min >= DIVERGENCE_TOL;
        let skipped = r.value("skipped").unwrap_or(f64::NAN);
        detail.push(format!("{name}: {} evaluated, min divergence {min:.3e}, {skipped} skipped", div.len()));
    }
    Ok((ok, format!("{} (>= {DIVERGENCE_TOL:e})", detail.join("; "))))
}

/// Dissipative determinant is e^{-2t}; substitute determinant stays 1 to t = 10.
fn volume_contrast() -> Outcome {
    let sys = coupled_system();
    let ic = State::from_slices(0.0, &[0.0, 0.0], &[1.0, -1.0]);
    let (_, series) =
        volume_audit(&sys, &ic, &IntegratorConfig::rk45(2.0, 1e-12).with_output_step(0.5), VOLUME_REL_TOL)?;
    let mut worst = 0.0f64;
    for t in [0.5, 1.0, 2.0] {
        let k = series.times.iter().position(|s| *s == t).ok_or("missing output time")?;
        worst = worst.max((series.dets[k] / (-2.0 * t).exp() - 1.0).abs());
    }
    let (_, traj, rec) = coupled_run(10.0)?;
    let (r, _) =
        substitute_volume_audit(&rec.substitute, &traj, &IntegratorConfig::rk45(10.0, 1e-12), SUBSTITUTE_VOLUME_TOL)?;
    let sub = r.value("max_abs_det_error").unwrap_or(f64::NAN);
    Ok((
        worst <= VOLUME_REL_TOL && r.pass(),
        format!("max rel |det - e^-2t| = {worst:.3e} at t in {{0.5, 1, 2}}; max |det - 1| = {sub:.3e} on [0, 10]"),
    ))
}

/// Four monotone branches over two periods, each restricted exactly.
fn oscillator_branches() -> Outcome {
    let (_, traj, rec) = oscillator_run()?;
    let turns = DampedOscillator::new(0.1, 1.0, 1.0, 0.0)?.turning_times(traj.t_end()).len();
    let branches = rec.forces[0].as_ref().map_or(0, |f| f.branches.len());
    let r = restriction_audit(&rec, RESTRICTION_TOL);
    let worst = r.metrics().iter().filter(|m| m.name.ends_with(".residual")).map(|m| m.value).fold(0.0, f64::max);
    Ok((
        branches == 4 && turns + 1 == 4 && r.pass(),
        format!(
            "{branches} branches ({turns} closed-form turning points), max residual {worst:.3e} <= {RESTRICTION_TOL:e}"
        ),
    ))
}

fn gradients() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, (_, _, rec)) in
        [("drag", drag_run()?), ("coupled", coupled_run(5.0)?), ("oscillator", oscillator_run()?)]
    {
        let r = gradient_audit(&rec.substitute, GRADIENT_SAMPLES, SEED, GRADIENT_TOL)?;
        let samples = r.value("samples").unwrap_or(0.0);
        ok &= r.pass() && samples == GRADIENT_SAMPLES as f64;
        let q = r.value("max_rel_error_q").unwrap_or(f64::NAN);
        let p = r.value("max_rel_error_p").unwrap_or(f64::NAN);
        detail.push(format!("{name} q {q:.1e} p {p:.1e}"));
    }
    Ok((ok, format!("{} at {GRADIENT_SAMPLES} states (<= {GRADIENT_TOL:e})", detail.join(", "))))
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run_cli(config: &Path, out: &Path) -> Result<i32, Box<dyn std::error::Error>> {
    let status = Command::new(env!("CARGO_BIN_EXE_subham"))
        .args(["all", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("SUBHAM_OUT_DIR")
        .output()?
        .status;
    Ok(status.code().unwrap_or(-1))
}

/// Zero damping: zero work potentials, substitute equals the original
/// Hamiltonian, and the shipped conservative config runs clean.
fn identity_case() -> Outcome {
    let sys = SystemDefinition::linear(
        None,
        Some(Matrix::zeros(2, 2)),
        Matrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]),
    )?;
    let ic = State::from_slices(0.0, &[1.0, 0.0], &[0.0, 0.5]);
    let traj = integrate(&sys, &ic, &IntegratorConfig::rk45(5.0, 1e-10))?;
    let rec = reconstruct(&traj, &sys, &opts())?;
    let zero = rec.substitute.potentials().iter().all(|w| w.is_zero());
    let r = identity_audit(&rec.substitute, &sys, &traj, IDENTITY_TOL)?;
    let gap = r.value("max_abs_difference").unwrap_or(f64::NAN);
    let dir = tempfile::tempdir()?;
    let code = run_cli(&workspace_root().join("configs/conservative.toml"), dir.path())?;
    Ok((zero && r.pass() && code == 0, format!("W zero: {zero}, max |H_sub - H| = {gap:.3e}, pipeline exit {code}")))
}

/// Direct and equivalent-stiffness substitutes agree on the coupled curve.
fn stiffness_paths() -> Outcome {
    let (sys, traj, rec) = coupled_run(5.0)?;
    let eq = equivalent_stiffness(&traj, &sys, &opts())?;
    let r = stiffness_consistency(&rec.substitute, &eq, &sys, &traj, STIFFNESS_SAMPLES, SEED, STIFFNESS_TOL)?;
    let diff = r.value("max_abs_difference").unwrap_or(f64::NAN);
    Ok((
        r.pass(),
        format!("max |H_direct - H_stiffness| = {diff:.3e} at {STIFFNESS_SAMPLES} states <= {STIFFNESS_TOL:e}"),
    ))
}

fn read_dir_sorted(dir: &Path) -> std::io::Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        files.push((entry.file_name().to_string_lossy().into_owned(), std::fs::read(entry.path())?));
    }
    files.sort();
    Ok(files)
}

/// Two runs of every shipped config write byte-identical files.
fn determinism() -> Outcome {
    let mut compared = 0;
    let mut differing = Vec::new();
    let configs = ["drag_1d", "coupled_2d", "damped_oscillator", "conservative", "linear_ndim"];
    for name in configs {
        let config = workspace_root().join(format!("configs/{name}.toml"));
        let (a, b) = (tempfile::tempdir()?, tempfile::tempdir()?);
        for dir in [&a, &b] {
            let code = run_cli(&config, dir.path())?;
            if code != 0 {
                return Ok((false, format!("{name} exited {code}")));
            }
        }
        let (fa, fb) = (read_dir_sorted(a.path())?, read_dir_sorted(b.path())?);
        compared += fa.len();
        if fa != fb {
            differing.push(name);
        }
    }
    Ok((
        differing.is_empty() && compared > 0,
        format!("{compared} files over {} configs, differing: {differing:?}", configs.len()),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("drag force reconstruction", drag_force),
        ("drag substitute Hamiltonian", drag_hamiltonian),
        ("coupled shared phase curve", coupled_coincidence),
        ("uniqueness under perturbation", uniqueness),
        ("phase-volume contrast", volume_contrast),
        ("oscillator branches", oscillator_branches),
        ("gradient audit", gradients),
        ("zero-damping identity", identity_case),
        ("equivalent-stiffness consistency", stiffness_paths),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!pass);
        println!("{} {:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" }, k + 1);
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
