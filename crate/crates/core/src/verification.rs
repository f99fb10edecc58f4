//! Executable audits comparing a dissipative flow with its substitute.
//!
//! Every audit yields an [`AuditReport`]: a named list of metrics, each with
//! its own bound. A report passes iff every bounded metric is within bound;
//! a NaN metric never passes.

use std::cell::RefCell;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{AuditError, DomainExit, ModelError};
use crate::integrators::{
    integrate, integrate_hamiltonian_until_exit, integrate_with_monodromy, monodromy_along_curve, IntegratorConfig,
    MonodromyOptions,
};
use crate::model::{fd_step, Matrix, State, SystemDefinition, Trajectory, Vector};
use crate::reconstruction::{EquivalentStiffness, Reconstruction, SubstituteSystem};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "limit", rename_all = "kebab-case")]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    /// Reported, never judged.
    Info,
}

impl Bound {
    pub fn admits(self, value: f64) -> bool {
        match self {
            Bound::AtMost(t) => value <= t,
            Bound::AtLeast(t) => value >= t,
            Bound::Info => true,
        }
    }

    pub fn limit(self) -> Option<f64> {
        match self {
            Bound::AtMost(t) | Bound::AtLeast(t) => Some(t),
            Bound::Info => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
}

impl Metric {
    pub fn pass(&self) -> bool {
        self.bound.admits(self.value)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    name: String,
    metrics: Vec<Metric>,
    /// Hashes identifying the inputs, keyed by role.
    pub provenance: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

impl AuditReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), metrics: Vec::new(), provenance: BTreeMap::new(), notes: Vec::new() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn metrics(&self) -> &[Metric] {
        &self.metrics
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.metric(name).map(|m| m.value)
    }

    pub fn push(&mut self, name: impl Into<String>, value: f64, bound: Bound) -> &mut Self {
        self.metrics.push(Metric { name: name.into(), value, bound });
        self
    }

    pub fn with_provenance(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.provenance.insert(key.into(), value.into());
        self
    }

    pub fn pass(&self) -> bool {
        self.metrics.iter().all(Metric::pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Metric> {
        self.metrics.iter().filter(|m| !m.pass())
    }
}

/// Sup-norm phase-space distance over the union of both sample grids,
/// restricted to the common time window, with dense output between samples.
pub fn phase_sup_norm(a: &Trajectory, b: &Trajectory) -> Result<f64, AuditError> {
    if a.dim() != b.dim() {
        return Err(
            ModelError::DimensionMismatch { what: "compared trajectory", expected: a.dim(), got: b.dim() }.into()
        );
    }
    let (lo, hi) = (a.t_start().max(b.t_start()), a.t_end().min(b.t_end()));
    if lo > hi {
        return Err(AuditError::DisjointWindows);
    }
    let mut grid: Vec<f64> = a.times().chain(b.times()).filter(|t| *t >= lo && *t <= hi).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(grid.iter().map(|&t| a.state_at(t).phase_distance(&b.state_at(t))).fold(0.0, f64::max))
}

/// Whether two trajectories trace the same phase curve within `tol`.
pub fn check_coincidence(orig: &Trajectory, subst: &Trajectory, tol: f64) -> Result<AuditReport, AuditError> {
    let sup = phase_sup_norm(orig, subst)?;
    let mut r = AuditReport::new("coincidence")
        .with_provenance("original", orig.fingerprint())
        .with_provenance("substitute", subst.fingerprint());
    r.push("sup_norm", sup, Bound::AtMost(tol))
        .push("ic_distance", orig.ic().phase_distance(subst.ic()), Bound::Info)
        .push("window_start", orig.t_start().max(subst.t_start()), Bound::Info)
        .push("window_end", orig.t_end().min(subst.t_end()), Bound::Info);
    Ok(r)
}

/// Integrators and thresholds for [`uniqueness_probe`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    pub original: IntegratorConfig,
    /// Must name a symplectic method.
    pub substitute: IntegratorConfig,
    pub coincidence_tol: f64,
    pub divergence_tol: f64,
}

/// `±rel · max(|z_k|, 1)` along each phase coordinate `z = (q, p)`, in that order.
pub fn default_perturbations(ic: &State, rel: f64) -> Vec<Vec<f64>> {
    let z = ic.phase();
    let mut out = Vec::with_capacity(2 * z.len());
    for (k, zk) in z.iter().enumerate() {
        for sign in [1.0, -1.0] {
            let mut d = vec![0.0; z.len()];
            d[k] = sign * rel * zk.abs().max(1.0);
            out.push(d);
        }
    }
    out
}

fn perturbation_label(delta: &[f64], index: usize) -> String {
    let n = delta.len() / 2;
    let nonzero: Vec<usize> = (0..delta.len()).filter(|&k| delta[k] != 0.0).collect();
    match nonzero[..] {
        [k] => {
            let coord = if k < n { format!("q{k}") } else { format!("p{}", k - n) };
            format!("{coord}{:+e}", delta[k])
        }
        _ => format!("delta{index}"),
    }
}

/// Run the substitute from `ic` until `cfg.t_end` or until it leaves the
/// reconstructed domain. `None` when `ic` itself lies outside the domain.
fn substitute_run(
    subst: &SubstituteSystem,
    ic: &State,
    cfg: &IntegratorConfig,
) -> Result<Option<(Trajectory, Option<DomainExit>)>, AuditError> {
    let Ok(sel) = subst.select_branches(&ic.q, &ic.p) else {
        return Ok(None);
    };
    let run = integrate_hamiltonian_until_exit(subst, ic, Some(sel), cfg)?;
    Ok(Some((run.trajectory, run.exit)))
}

/// Demonstrate that the shared curve is isolated: from each perturbed
/// initial state both systems are integrated and must separate, while the
/// unperturbed pair stays within `coincidence_tol`.
///
/// A perturbed pair is separated when its phase distance reaches
/// `divergence_tol`, or when the substitute leaves its reconstructed domain
/// before the original run ends. The distance is taken over the window the
/// substitute covered. A perturbed state outside the substitute's domain is
/// skipped. Every perturbed phase coordinate needs at least one evaluated
/// perturbation.
pub fn uniqueness_probe(
    sys: &SystemDefinition,
    subst: &SubstituteSystem,
    ic: &State,
    perturbations: &[Vec<f64>],
    cfg: &ProbeConfig,
) -> Result<AuditReport, AuditError> {
    let z0 = ic.phase();
    let mut r = AuditReport::new("uniqueness");
    let orig = integrate(sys, ic, &cfg.original)?;
    let base = match substitute_run(subst, ic, &cfg.substitute)? {
        Some((traj, exit)) => {
            r.push("unperturbed.exited", f64::from(exit.is_some() as u8), Bound::AtMost(0.0));
            phase_sup_norm(&orig, &traj)?
        }
        None => f64::INFINITY,
    };
    r.push("unperturbed.sup_norm", base, Bound::AtMost(cfg.coincidence_tol));
    r.provenance.insert("original".into(), orig.fingerprint());

    let mut covered = vec![false; z0.len()];
    let mut touched = vec![false; z0.len()];
    let (mut evaluated, mut skipped) = (0usize, 0usize);
    for (k, delta) in perturbations.iter().enumerate() {
        if delta.len() != z0.len() {
            return Err(
                ModelError::DimensionMismatch { what: "perturbation", expected: z0.len(), got: delta.len() }.into()
            );
        }
        if delta.iter().all(|d| *d == 0.0) {
            return Err(AuditError::ZeroPerturbation(k));
        }
        let label = perturbation_label(delta, k);
        let z: Vec<f64> = z0.iter().zip(delta).map(|(a, b)| a + b).collect();
        let start = State::from_phase(ic.t, &z);
        for (j, d) in delta.iter().enumerate() {
            touched[j] |= *d != 0.0;
        }
        let Some((sub, exit)) = substitute_run(subst, &start, &cfg.substitute)? else {
            skipped += 1;
            r.notes.push(format!("{label}: initial state outside the reconstructed domain, skipped"));
            continue;
        };
        evaluated += 1;
        for (j, d) in delta.iter().enumerate() {
            covered[j] |= *d != 0.0;
        }
        let perturbed = integrate(sys, &start, &cfg.original)?;
        let divergence = phase_sup_norm(&perturbed, &sub)?;
        let exit_time = exit.as_ref().map(|e| e.t.unwrap_or(f64::NAN));
        let left_early = exit_time.is_some_and(|t| !(t >= perturbed.t_end()));
        let separated = divergence >= cfg.divergence_tol || left_early;
        r.push(format!("{label}.separated"), f64::from(separated as u8), Bound::AtLeast(1.0));
        r.push(format!("{label}.divergence"), divergence, Bound::Info);
        if let Some(t) = exit_time {
            r.push(format!("{label}.domain_exit_time"), t, Bound::Info);
        }
    }
    let uncovered = touched.iter().zip(&covered).filter(|(t, c)| **t && !**c).count();
    r.push("evaluated", evaluated as f64, Bound::AtLeast(1.0)).push("skipped", skipped as f64, Bound::Info).push(
        "uncovered_coordinates",
        uncovered as f64,
        Bound::AtMost(0.0),
    );
    Ok(r)
}

/// `Ĥ` along the original trajectory, with the branch of each coordinate
/// chosen by time.
pub fn hamiltonian_along(subst: &SubstituteSystem, orig: &Trajectory) -> Result<Vec<f64>, AuditError> {
    orig.samples()
        .iter()
        .map(|s| {
            let sel = subst.select_branches_at_time(s.t);
            subst.hamiltonian(&sel, &s.q, &s.p).map_err(|mut e| {
                e.t = Some(s.t);
                AuditError::from(e)
            })
        })
        .collect()
}

/// `max_t |Ĥ(q(t), p(t)) - Ĥ(q₀, p₀)|` along the original trajectory.
pub fn hamiltonian_constancy(subst: &SubstituteSystem, orig: &Trajectory, tol: f64) -> Result<AuditReport, AuditError> {
    let values = hamiltonian_along(subst, orig)?;
    let h0 = values[0];
    let dev = values.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max);
    let mut r = AuditReport::new("hamiltonian-constancy").with_provenance("original", orig.fingerprint());
    r.push("max_deviation", dev, Bound::AtMost(tol)).push("initial_value", h0, Bound::Info);
    Ok(r)
}

/// With a vanishing force the substitute must equal the original
/// Hamiltonian: `max_t |Ĥ - H|` along the trajectory.
pub fn identity_audit(
    subst: &SubstituteSystem,
    sys: &SystemDefinition,
    orig: &Trajectory,
    tol: f64,
) -> Result<AuditReport, AuditError> {
    let values = hamiltonian_along(subst, orig)?;
    let gap = orig
        .samples()
        .iter()
        .zip(&values)
        .map(|(s, h)| Ok((h - sys.total_energy(s)?).abs()))
        .collect::<Result<Vec<f64>, ModelError>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let nonzero = subst.potentials().iter().filter(|w| !w.is_zero()).count();
    let mut r = AuditReport::new("identity").with_provenance("original", orig.fingerprint());
    r.push("max_abs_difference", gap, Bound::AtMost(tol)).push(
        "nonzero_potentials",
        nonzero as f64,
        Bound::AtMost(0.0),
    );
    Ok(r)
}

/// Per-coordinate, per-branch restriction residual `max |𝓕_i(q_i(t)) - F_i(t)|`.
pub fn restriction_audit(rec: &Reconstruction, tol: f64) -> AuditReport {
    let mut r = AuditReport::new("restriction");
    for (i, force) in rec.forces.iter().enumerate() {
        let Some(force) = force else {
            r.push(format!("q{i}.branches"), 0.0, Bound::Info);
            continue;
        };
        r.push(format!("q{i}.branches"), force.branches.len() as f64, Bound::Info);
        for (b, res) in force.restriction_residual().into_iter().enumerate() {
            r.push(format!("q{i}.branch{b}.residual"), res, Bound::AtMost(tol));
        }
        r.provenance.insert("trajectory".into(), force.provenance.trajectory_hash.clone());
    }
    r
}

/// Determinants sampled along a run, with their reference values.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeSeries {
    pub times: Vec<f64>,
    pub dets: Vec<f64>,
    pub reference: Vec<f64>,
}

/// Monodromy determinant of the dissipative flow against `exp ∫ tr(Df) dt`.
pub fn volume_audit(
    sys: &SystemDefinition,
    ic: &State,
    cfg: &IntegratorConfig,
    tol: f64,
) -> Result<(AuditReport, VolumeSeries), AuditError> {
    let m = integrate_with_monodromy(sys, ic, cfg, MonodromyOptions::default())?;
    let rel = m.jacobian_dets.iter().zip(&m.trace_dets).map(|(d, e)| ((d - e) / e).abs()).fold(0.0, f64::max);
    let mut r = AuditReport::new("volume").with_provenance("trajectory", m.base.fingerprint());
    r.push("max_rel_error", rel, Bound::AtMost(tol))
        .push("final_det", *m.jacobian_dets.last().unwrap(), Bound::Info)
        .push("final_reference", *m.trace_dets.last().unwrap(), Bound::Info);
    let series = VolumeSeries { times: m.base.times().collect(), dets: m.jacobian_dets, reference: m.trace_dets };
    Ok((r, series))
}

/// Monodromy determinant of the substitute flow linearized along the shared
/// curve, which must stay 1. `cfg` selects the variational integrator.
pub fn substitute_volume_audit(
    subst: &SubstituteSystem,
    orig: &Trajectory,
    cfg: &IntegratorConfig,
    tol: f64,
) -> Result<(AuditReport, VolumeSeries), AuditError> {
    let n = subst.dim();
    let minv = subst.base().mass_inverse().clone();
    let failure: RefCell<Option<DomainExit>> = RefCell::new(None);
    let jacobian = |t: f64| {
        let s = orig.state_at(t);
        let sel = subst.select_branches_at_time(t);
        let mut a = Matrix::zeros(2 * n, 2 * n);
        a.view_mut((0, n), (n, n)).copy_from(&minv);
        match subst.hessian(&sel, &s.q) {
            Ok(h) => a.view_mut((n, 0), (n, n)).copy_from(&(-h)),
            Err(mut e) => {
                e.t = Some(t);
                failure.borrow_mut().get_or_insert(e);
            }
        }
        a
    };
    let times: Vec<f64> = orig.times().collect();
    let (dets, _) = monodromy_along_curve(2 * n, jacobian, &times, cfg)?;
    if let Some(e) = failure.into_inner() {
        return Err(e.into());
    }
    let err = dets.iter().map(|d| (d - 1.0).abs()).fold(0.0, f64::max);
    let mut r = AuditReport::new("substitute-volume").with_provenance("original", orig.fingerprint());
    r.push("max_abs_det_error", err, Bound::AtMost(tol)).push("final_det", *dets.last().unwrap(), Bound::Info).push(
        "t_end",
        orig.t_end(),
        Bound::Info,
    );
    let reference = vec![1.0; dets.len()];
    Ok((r, VolumeSeries { times, dets, reference }))
}

/// A random state with every coordinate strictly inside one of its
/// branches, trimmed by `trim` of the branch width on each side.
fn sample_state(subst: &SubstituteSystem, rng: &mut ChaCha8Rng, trim: f64) -> (Vec<usize>, Vector, Vector) {
    let n = subst.dim();
    let mut sel = vec![0; n];
    let mut q = Vector::zeros(n);
    for w in subst.potentials() {
        let i = w.coord;
        if w.is_zero() {
            q[i] = w.anchor + rng.random_range(-1.0..=1.0);
            continue;
        }
        let b = rng.random_range(0..w.branch_count());
        let (lo, hi) = w.branches()[b].domain();
        let pad = trim * (hi - lo);
        sel[i] = b;
        q[i] = if hi - lo > 2.0 * pad { rng.random_range(lo + pad..=hi - pad) } else { 0.5 * (lo + hi) };
    }
    let p = Vector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
    (sel, q, p)
}

/// Central-difference check of `∂Ĥ/∂q` and `∂Ĥ/∂p` at `count` random
/// in-domain states drawn from `seed`. The relative error of a component
/// is `|exposed - fd| / max(|fd|, 1)`.
pub fn gradient_audit(subst: &SubstituteSystem, count: usize, seed: u64, tol: f64) -> Result<AuditReport, AuditError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = subst.dim();
    let (mut err_q, mut err_p) = (0.0f64, 0.0f64);
    let mut used = 0usize;
    for _ in 0..count {
        let (sel, q, p) = sample_state(subst, &mut rng, 0.01);
        let eval = || -> Result<(f64, f64), DomainExit> {
            let gq = subst.gradient_q(&sel, &q)?;
            let gp = subst.gradient_p(&p);
            let (mut eq, mut ep) = (0.0f64, 0.0f64);
            for i in 0..n {
                let h = fd_step(q[i]);
                let (mut a, mut b) = (q.clone(), q.clone());
                a[i] += h;
                b[i] -= h;
                let fd = (subst.hamiltonian(&sel, &a, &p)? - subst.hamiltonian(&sel, &b, &p)?) / (2.0 * h);
                eq = eq.max((gq[i] - fd).abs() / fd.abs().max(1.0));
                let h = fd_step(p[i]);
                let (mut a, mut b) = (p.clone(), p.clone());
                a[i] += h;
                b[i] -= h;
                let fd = (subst.hamiltonian(&sel, &q, &a)? - subst.hamiltonian(&sel, &q, &b)?) / (2.0 * h);
                ep = ep.max((gp[i] - fd).abs() / fd.abs().max(1.0));
            }
            Ok((eq, ep))
        };
        if let Ok((eq, ep)) = eval() {
            err_q = err_q.max(eq);
            err_p = err_p.max(ep);
            used += 1;
        }
    }
    if used == 0 {
        return Err(AuditError::NoSamples);
    }
    let mut r = AuditReport::new("gradient").with_provenance("seed", seed.to_string());
    r.push("max_rel_error_q", err_q, Bound::AtMost(tol)).push("max_rel_error_p", err_p, Bound::AtMost(tol)).push(
        "samples",
        used as f64,
        Bound::Info,
    );
    Ok(r)
}

/// Compare `Ĥ` from the direct reconstruction with `Ĥ` rebuilt from the
/// restricted damping terms, at `count` random times on the shared curve.
pub fn stiffness_consistency(
    direct: &SubstituteSystem,
    equivalent: &EquivalentStiffness,
    sys: &SystemDefinition,
    orig: &Trajectory,
    count: usize,
    seed: u64,
    tol: f64,
) -> Result<AuditReport, AuditError> {
    let via_stiffness = equivalent.substitute(sys)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let t = rng.random_range(orig.t_start()..=orig.t_end());
        let s = orig.state_at(t);
        let a = direct.hamiltonian(&direct.select_branches_at_time(t), &s.q, &s.p)?;
        let b = via_stiffness.hamiltonian(&via_stiffness.select_branches_at_time(t), &s.q, &s.p)?;
        worst = worst.max((a - b).abs());
    }
    let mut r = AuditReport::new("stiffness-consistency")
        .with_provenance("original", orig.fingerprint())
        .with_provenance("seed", seed.to_string());
    r.push("max_abs_difference", worst, Bound::AtMost(tol)).push(
        "identity_residual",
        equivalent.identity_residual(),
        Bound::AtMost(tol),
    );
    Ok(r)
}

/// Sort reports by name so merged output does not depend on execution order.
pub fn sort_reports(reports: &mut [AuditReport]) {
    reports.sort_by(|a, b| a.name.cmp(&b.name));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::{integrate_hamiltonian, Method};
    use crate::reconstruction::{equivalent_stiffness, reconstruct, ReconstructionOptions};

    fn drag() -> SystemDefinition {
        SystemDefinition::linear(None, Some(Matrix::from_element(1, 1, 1.0)), Matrix::zeros(1, 1)).unwrap()
    }

    fn coupled() -> SystemDefinition {
        let c = Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        SystemDefinition::linear(None, Some(c), Matrix::zeros(2, 2)).unwrap()
    }

    fn drag_setup() -> (SystemDefinition, Trajectory, Reconstruction) {
        let sys = drag();
        let ic = State::from_slices(0.0, &[0.0], &[1.0]);
        let traj = integrate(&sys, &ic, &IntegratorConfig::rk45(20.0, 1e-10)).unwrap();
        let rec = reconstruct(&traj, &sys, &ReconstructionOptions::default()).unwrap();
        (sys, traj, rec)
    }

    #[test]
    fn bounds_and_pass_rule() {
        let mut r = AuditReport::new("x");
        assert!(r.pass());
        r.push("a", 1.0, Bound::AtMost(1.0)).push("b", 2.0, Bound::AtLeast(1.0)).push("c", f64::NAN, Bound::Info);
        assert!(r.pass());
        r.push("d", f64::NAN, Bound::AtMost(1.0));
        assert!(!r.pass());
        assert_eq!(r.failures().map(|m| m.name.as_str()).collect::<Vec<_>>(), ["d"]);
    }

    #[test]
    fn self_coincidence_is_exact() {
        let (_, traj, _) = drag_setup();
        let r = check_coincidence(&traj, &traj, 0.0).unwrap();
        assert_eq!(r.value("sup_norm"), Some(0.0));
        assert!(r.pass());
    }

    #[test]
    fn disjoint_windows_rejected() {
        let sys = drag();
        let a = integrate(&sys, &State::from_slices(0.0, &[0.0], &[1.0]), &IntegratorConfig::rk45(1.0, 1e-8)).unwrap();
        let b = integrate(&sys, &State::from_slices(2.0, &[0.0], &[1.0]), &IntegratorConfig::rk45(3.0, 1e-8)).unwrap();
        assert_eq!(check_coincidence(&a, &b, 1.0).unwrap_err(), AuditError::DisjointWindows);
    }

    #[test]
    fn drag_hamiltonian_is_half() {
        let (_, traj, rec) = drag_setup();
        let r = hamiltonian_constancy(&rec.substitute, &traj, 1e-6).unwrap();
        assert!(r.pass(), "{r:?}");
        assert!((r.value("initial_value").unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn drag_gradient_at_documented_state() {
        let (_, _, rec) = drag_setup();
        let (q, p) = (Vector::from_element(1, 0.5), Vector::from_element(1, 0.3));
        // Ĥ = ½p² - x²/2 + x
        assert!((rec.substitute.gradient_q(&[0], &q).unwrap()[0] - 0.5).abs() < 1e-8);
        assert_eq!(rec.substitute.gradient_p(&p)[0], 0.3);
        let r = gradient_audit(&rec.substitute, 100, 7, 1e-5).unwrap();
        assert!(r.pass(), "{r:?}");
        assert_eq!(r, gradient_audit(&rec.substitute, 100, 7, 1e-5).unwrap());
    }

    #[test]
    fn drag_uniqueness() {
        let (sys, traj, rec) = drag_setup();
        let cfg = ProbeConfig {
            original: IntegratorConfig::rk45(5.0, 1e-10),
            substitute: IntegratorConfig::fixed(Method::Gauss4, 5.0, 1e-3),
            coincidence_tol: 1e-6,
            divergence_tol: 1e-3,
        };
        let deltas = default_perturbations(traj.ic(), 1e-2);
        let r = uniqueness_probe(&sys, &rec.substitute, traj.ic(), &deltas, &cfg).unwrap();
        assert!(r.pass(), "{r:#?}");
        // q₀ - 0.01 lies below the domain start
        assert_eq!(r.value("skipped"), Some(1.0));
        let divergences: Vec<f64> =
            r.metrics().iter().filter(|m| m.name.ends_with(".divergence")).map(|m| m.value).collect();
        assert_eq!(divergences.len(), 3);
        assert!(divergences.iter().all(|d| *d >= 1e-3), "{divergences:?}");
        let zero = vec![vec![0.0, 0.0]];
        assert_eq!(
            uniqueness_probe(&sys, &rec.substitute, traj.ic(), &zero, &cfg).unwrap_err(),
            AuditError::ZeroPerturbation(0)
        );
    }

    #[test]
    fn coupled_volume_and_substitute_volume() {
        let sys = coupled();
        let ic = State::from_slices(0.0, &[0.0, 0.0], &[1.0, -1.0]);
        let (r, series) =
            volume_audit(&sys, &ic, &IntegratorConfig::rk45(1.0, 1e-11).with_output_step(0.5), 1e-6).unwrap();
        assert!(r.pass());
        let d1 = series.dets.last().unwrap();
        assert!((d1 / (-2.0f64).exp() - 1.0).abs() < 1e-6);

        let traj = integrate(&sys, &ic, &IntegratorConfig::rk45(10.0, 1e-10).with_output_step(1e-2)).unwrap();
        let rec = reconstruct(&traj, &sys, &ReconstructionOptions::default()).unwrap();
        let (r, _) =
            substitute_volume_audit(&rec.substitute, &traj, &IntegratorConfig::rk45(10.0, 1e-10), 1e-6).unwrap();
        assert!(r.pass(), "{r:?}");
    }

    #[test]
    fn coupled_substitute_coincides() {
        let sys = coupled();
        let ic = State::from_slices(0.0, &[0.0, 0.0], &[1.0, -1.0]);
        let traj = integrate(&sys, &ic, &IntegratorConfig::rk45(6.0, 1e-10)).unwrap();
        let rec = reconstruct(&traj, &sys, &ReconstructionOptions::default()).unwrap();
        let sub =
            integrate_hamiltonian(&rec.substitute, &ic, &IntegratorConfig::fixed(Method::Gauss4, 5.0, 1e-3)).unwrap();
        let r = check_coincidence(&traj, &sub, 1e-6).unwrap();
        assert!(r.pass(), "{r:?}");
        assert_eq!(r.value("window_end"), Some(5.0));
        let h = hamiltonian_constancy(&rec.substitute, &traj, 1e-6).unwrap();
        assert!(h.pass() && (h.value("initial_value").unwrap() - 1.0).abs() < 1e-12);

        let eq = equivalent_stiffness(&traj, &sys, &ReconstructionOptions::default()).unwrap();
        let s = stiffness_consistency(&rec.substitute, &eq, &sys, &traj, 100, 3, 1e-6).unwrap();
        assert!(s.pass(), "{s:?}");
    }

    #[test]
    fn identity_case() {
        let sys = SystemDefinition::linear(None, Some(Matrix::zeros(1, 1)), Matrix::from_element(1, 1, 1.0)).unwrap();
        let ic = State::from_slices(0.0, &[1.0], &[0.0]);
        let traj = integrate(&sys, &ic, &IntegratorConfig::rk45(10.0, 1e-10)).unwrap();
        let rec = reconstruct(&traj, &sys, &ReconstructionOptions::default()).unwrap();
        let r = identity_audit(&rec.substitute, &sys, &traj, 1e-12).unwrap();
        assert!(r.pass(), "{r:?}");
        assert_eq!(r.value("max_abs_difference"), Some(0.0));
    }

    #[test]
    fn reports_sort_by_name() {
        let mut v = vec![AuditReport::new("b"), AuditReport::new("a")];
        sort_reports(&mut v);
        assert_eq!(v[0].name(), "a");
    }
}
