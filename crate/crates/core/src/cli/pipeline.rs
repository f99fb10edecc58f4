use std::path::{Path, PathBuf};

use thiserror::Error;

use super::config::{Artifact, ConfigError, RunConfig};
use super::report::{emit_report, write_csv, write_series, OutputError, ReportFormat};
use crate::integrators::{integrate, integrate_hamiltonian_until_exit, IntegratorConfig};
use crate::model::{energy_rate_check, SystemDefinition, Trajectory};
use crate::reconstruction::{equivalent_stiffness, reconstruct, Reconstruction};
use crate::verification::{
    check_coincidence, default_perturbations, gradient_audit, hamiltonian_along, hamiltonian_constancy, identity_audit,
    restriction_audit, stiffness_consistency, substitute_volume_audit, uniqueness_probe, volume_audit, AuditReport,
    Bound, ProbeConfig, VolumeSeries,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verb {
    /// Integrate the dissipative system.
    Simulate,
    /// Integrate, then reconstruct forces and potentials.
    Reconstruct,
    /// Reconstruct, then audit the shared curve and the substitute.
    Verify,
    /// Reconstruct, then compare phase-volume behaviour of both flows.
    VolumeAudit,
    All,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Output(#[from] OutputError),
}

impl RunError {
    /// 2 for configuration and output-path problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Output(_) => 2,
            RunError::Numerical(_) => 3,
        }
    }
}

fn numerical<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Numerical(e.to_string())
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    /// Sorted by name.
    pub reports: Vec<AuditReport>,
    /// Written files, in write order.
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(AuditReport::pass)
    }

    /// 0 when every audit passes, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            0
        } else {
            1
        }
    }
}

struct Writer<'a> {
    dir: &'a Path,
    cfg: &'a RunConfig,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn trajectory(&mut self, sys: &SystemDefinition, traj: &Trajectory) -> Result<(), RunError> {
        if !self.cfg.outputs.wants(Artifact::Trajectory) {
            return Ok(());
        }
        let n = sys.dim();
        let mut header = vec!["t [s]".to_string()];
        header.extend((0..n).map(|i| format!("q{i} [m]")));
        header.extend((0..n).map(|i| format!("p{i} [kg*m/s]")));
        header.push("energy [J]".into());
        let rows = traj.samples().iter().map(|s| {
            let mut row = vec![s.t];
            row.extend(s.q.iter().chain(s.p.iter()));
            row.push(sys.total_energy(s).unwrap_or(f64::NAN));
            row
        });
        let p = self.path("trajectory.csv");
        write_csv(&p, &header, rows)?;
        Ok(())
    }

    fn phase_portraits(&mut self, traj: &Trajectory) -> Result<(), RunError> {
        if !self.cfg.outputs.wants(Artifact::Plots) {
            return Ok(());
        }
        for i in 0..traj.dim() {
            let q: Vec<f64> = traj.samples().iter().map(|s| s.q[i]).collect();
            let p: Vec<f64> = traj.samples().iter().map(|s| s.p[i]).collect();
            let (hq, hp) = (format!("q{i} [m]"), format!("p{i} [kg*m/s]"));
            let path = self.path(&format!("phase_q{i}.dat"));
            write_series(&path, &[&hq, &hp], &[&q, &p])?;
        }
        Ok(())
    }

    /// One CSV per coordinate and branch, rows in time order.
    fn reconstruction(&mut self, rec: &Reconstruction) -> Result<(), RunError> {
        if !self.cfg.outputs.wants(Artifact::Reconstruction) {
            return Ok(());
        }
        for (i, force) in rec.forces.iter().enumerate() {
            let Some(force) = force else { continue };
            let w = &rec.substitute.potentials()[i];
            for (b, br) in force.branches.iter().enumerate() {
                let header =
                    vec!["t [s]".to_string(), format!("q{i} [m]"), format!("force{i} [N]"), format!("work{i} [J]")];
                let rows = br
                    .table
                    .iter()
                    .map(|&(q, t, f)| Ok(vec![t, q, f, w.value(b, q)?]))
                    .collect::<Result<Vec<_>, crate::error::DomainExit>>()
                    .map_err(numerical)?;
                let path = self.path(&format!("reconstruction_q{i}_branch{b}.csv"));
                write_csv(&path, &header, rows)?;
            }
        }
        Ok(())
    }

    fn series(&mut self, name: &str, header: &[&str], columns: &[&[f64]]) -> Result<(), RunError> {
        if !self.cfg.outputs.wants(Artifact::Plots) {
            return Ok(());
        }
        let path = self.path(name);
        write_series(&path, header, columns)?;
        Ok(())
    }

    fn volume(&mut self, name: &str, s: &VolumeSeries) -> Result<(), RunError> {
        self.series(name, &["t [s]", "det"], &[&s.times, &s.dets])
    }
}

/// Integrate, reconstruct and audit as far as `verb` requires, writing the
/// requested artifacts into `out_dir` (created if missing). Audit failures
/// are reported in the outcome, not as errors.
pub fn run_pipeline(cfg: &RunConfig, verb: Verb, out_dir: &Path) -> Result<RunOutcome, RunError> {
    std::fs::create_dir_all(out_dir).map_err(|source| OutputError::Io { path: out_dir.to_path_buf(), source })?;
    let mut w = Writer { dir: out_dir, cfg, files: Vec::new() };
    let sys = cfg.system()?;
    let ic = cfg.initial_state();
    let tol = &cfg.tolerances;
    let mut reports = Vec::new();

    let traj = integrate(&sys, &ic, &cfg.integrator).map_err(numerical)?;
    w.trajectory(&sys, &traj)?;
    w.phase_portraits(&traj)?;
    let mut balance = AuditReport::new("energy-balance").with_provenance("trajectory", traj.fingerprint());
    balance.push("work_energy_residual", energy_rate_check(&sys, &traj), Bound::AtMost(tol.energy_balance));
    reports.push(balance);

    if verb != Verb::Simulate {
        let rec = reconstruct(&traj, &sys, &cfg.reconstruction_options()).map_err(numerical)?;
        w.reconstruction(&rec)?;
        reports.push(restriction_audit(&rec, tol.restriction));
        let identity = rec.substitute.potentials().iter().all(|p| p.is_zero());

        if matches!(verb, Verb::Verify | Verb::All) {
            reports.extend(curve_audits(cfg, &sys, &traj, &rec, identity, &mut w)?);
        }
        if matches!(verb, Verb::VolumeAudit | Verb::All) {
            let vcfg = IntegratorConfig::rk45(cfg.integrator.t_end, cfg.audit.variational_tol)
                .with_output_step(cfg.integrator.output_step());
            let (r, series) = volume_audit(&sys, &ic, &vcfg, tol.volume).map_err(numerical)?;
            w.volume("det.dat", &series)?;
            reports.push(r);
            let (r, series) = substitute_volume_audit(&rec.substitute, &traj, &vcfg, tol.volume).map_err(numerical)?;
            w.volume("det_substitute.dat", &series)?;
            reports.push(r);
        }
    }

    let hash = cfg.hash();
    for r in &mut reports {
        r.provenance.insert("config".into(), hash.clone());
    }
    crate::verification::sort_reports(&mut reports);
    if cfg.outputs.wants(Artifact::Report) {
        let p = w.path("report.txt");
        emit_report(&reports, ReportFormat::Text, &p)?;
        let p = w.path("report.jsonl");
        emit_report(&reports, ReportFormat::JsonLines, &p)?;
    }
    Ok(RunOutcome { reports, files: w.files })
}

fn curve_audits(
    cfg: &RunConfig,
    sys: &SystemDefinition,
    traj: &Trajectory,
    rec: &Reconstruction,
    identity: bool,
    w: &mut Writer<'_>,
) -> Result<Vec<AuditReport>, RunError> {
    let tol = &cfg.tolerances;
    let ic = traj.ic();
    let sub_cfg = cfg.substitute_integrator();
    let mut out = Vec::new();

    let run = integrate_hamiltonian_until_exit(&rec.substitute, ic, None, &sub_cfg).map_err(numerical)?;
    let mut r = check_coincidence(traj, &run.trajectory, tol.coincidence).map_err(numerical)?;
    r.push("reached_t_end", run.trajectory.t_end(), Bound::AtLeast(sub_cfg.t_end));
    if let Some(e) = &run.exit {
        r.notes.push(e.to_string());
    }
    out.push(r);

    if identity {
        out.push(identity_audit(&rec.substitute, sys, traj, tol.identity).map_err(numerical)?);
    } else {
        let probe = ProbeConfig {
            original: cfg.integrator.clone(),
            substitute: sub_cfg.clone(),
            coincidence_tol: tol.coincidence,
            divergence_tol: tol.divergence,
        };
        let deltas = default_perturbations(ic, cfg.audit.perturbation);
        out.push(uniqueness_probe(sys, &rec.substitute, ic, &deltas, &probe).map_err(numerical)?);
    }

    out.push(hamiltonian_constancy(&rec.substitute, traj, tol.hamiltonian).map_err(numerical)?);
    let values = hamiltonian_along(&rec.substitute, traj).map_err(numerical)?;
    let times: Vec<f64> = traj.times().collect();
    w.series("hamiltonian.dat", &["t [s]", "substitute_hamiltonian [J]"], &[&times, &values])?;

    out.push(gradient_audit(&rec.substitute, cfg.audit.gradient_samples, cfg.seed, tol.gradient).map_err(numerical)?);

    let damped = sys.damping().is_some_and(|c| c.amax() > 0.0);
    if damped && sys.stiffness().is_some() {
        let eq = equivalent_stiffness(traj, sys, &cfg.reconstruction_options()).map_err(numerical)?;
        out.push(
            stiffness_consistency(
                &rec.substitute,
                &eq,
                sys,
                traj,
                cfg.audit.stiffness_samples,
                cfg.seed,
                tol.stiffness,
            )
            .map_err(numerical)?,
        );
    }
    Ok(out)
}
