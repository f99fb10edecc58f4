use std::sync::Arc;

use super::inverse::{build_inverse_map, InverseMap};
use super::segment::{Direction, MonotoneSegment};
use crate::error::{DomainExit, ReconstructionError};
use crate::model::{fd_step, State, SystemDefinition, Trajectory};

/// Default tolerance for queries just beyond a branch end.
pub const DEFAULT_DOMAIN_SLACK: f64 = 1e-6;

/// One monotone branch of a restricted force.
#[derive(Clone, Debug)]
pub struct ForceBranch {
    pub branch_id: usize,
    pub direction: Direction,
    pub t_window: (f64, f64),
    pub inverse: InverseMap,
    /// Tabulation in time order: `(q_i, t, 𝓕_i)` at the segment samples.
    pub table: Vec<(f64, f64, f64)>,
}

impl ForceBranch {
    pub fn domain(&self) -> (f64, f64) {
        self.inverse.domain()
    }

    /// Ends of the branch in time order, as `(q, 𝓕)`.
    pub fn ends(&self) -> ((f64, f64), (f64, f64)) {
        let a = self.table[0];
        let b = *self.table.last().unwrap();
        ((a.0, a.2), (b.0, b.2))
    }
}

/// Where the trajectory comes from.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub ic: State,
    pub trajectory_hash: String,
}

/// The nonconservative force component `F_i` restricted to the phase curve,
/// expressed per branch as a function of `q_i` alone:
/// `𝓕_i(q_i) = F_i(q(t(q_i)), q̇(t(q_i)))`.
///
/// Off-table queries invert time exactly against the trajectory's dense
/// output rather than interpolating the tabulation.
#[derive(Clone, Debug)]
pub struct ReconstructedForce {
    pub coord: usize,
    pub branches: Vec<ForceBranch>,
    pub provenance: Provenance,
    pub domain_slack: f64,
    traj: Arc<Trajectory>,
    sys: Arc<SystemDefinition>,
}

fn force_component(sys: &SystemDefinition, s: &State, coord: usize) -> f64 {
    let qdot = sys.velocity(&s.p);
    sys.force_at(&s.q, &qdot)[coord]
}

pub fn reconstruct_force(
    traj: &Trajectory,
    sys: &SystemDefinition,
    coord: usize,
    segments: &[MonotoneSegment],
) -> Result<ReconstructedForce, ReconstructionError> {
    reconstruct_force_shared(Arc::new(traj.clone()), Arc::new(sys.clone()), coord, segments)
}

/// As [`reconstruct_force`], sharing already reference-counted inputs.
pub fn reconstruct_force_shared(
    traj: Arc<Trajectory>,
    sys: Arc<SystemDefinition>,
    coord: usize,
    segments: &[MonotoneSegment],
) -> Result<ReconstructedForce, ReconstructionError> {
    if coord >= sys.dim() {
        return Err(crate::error::ModelError::DimensionMismatch {
            what: "coordinate index",
            expected: sys.dim(),
            got: coord,
        }
        .into());
    }
    let mut branches = Vec::with_capacity(segments.len());
    for seg in segments {
        let inverse = build_inverse_map(seg.clone())?;
        let table = seg.samples.iter().map(|s| (s.q, s.t, force_component(&sys, &traj.state_at(s.t), coord))).collect();
        branches.push(ForceBranch {
            branch_id: seg.branch_id,
            direction: seg.direction,
            t_window: seg.t_window,
            inverse,
            table,
        });
    }
    let provenance = Provenance { ic: traj.ic().clone(), trajectory_hash: traj.fingerprint() };
    Ok(ReconstructedForce { coord, branches, provenance, domain_slack: DEFAULT_DOMAIN_SLACK, traj, sys })
}

impl ReconstructedForce {
    pub fn with_domain_slack(mut self, slack: f64) -> Self {
        self.domain_slack = slack;
        self
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn system(&self) -> &SystemDefinition {
        &self.sys
    }

    pub fn branch(&self, b: usize) -> &ForceBranch {
        &self.branches[b]
    }

    /// True when the restricted force is identically zero on every branch.
    pub fn vanishes(&self) -> bool {
        self.branches.iter().all(|b| b.table.iter().all(|r| r.2 == 0.0))
    }

    /// Branch nearest to `q` by distance to its domain.
    pub fn nearest_branch(&self, q: f64) -> usize {
        let dist = |b: &ForceBranch| {
            let (lo, hi) = b.domain();
            (lo - q).max(q - hi).max(0.0)
        };
        (0..self.branches.len())
            .min_by(|&a, &b| dist(&self.branches[a]).total_cmp(&dist(&self.branches[b])))
            .unwrap_or(0)
    }

    pub(crate) fn exit(&self, branch: usize, q: f64) -> DomainExit {
        let (lo, hi) = self.branches.get(branch).map_or((f64::NAN, f64::NAN), |b| b.domain());
        DomainExit { coord: self.coord, q, branch, lo, hi, nearest_branch: Some(self.nearest_branch(q)), t: None }
    }

    /// `Some(q_end)` clamp target when `q` lies outside the branch but within
    /// the slack, `None` when inside; an exit beyond that.
    pub(crate) fn clamp(&self, branch: usize, q: f64) -> Result<Option<f64>, DomainExit> {
        let b = self.branches.get(branch).ok_or_else(|| self.exit(branch, q))?;
        let (lo, hi) = b.domain();
        if q >= lo && q <= hi {
            Ok(None)
        } else if q < lo && lo - q <= self.domain_slack {
            Ok(Some(lo))
        } else if q > hi && q - hi <= self.domain_slack {
            Ok(Some(hi))
        } else {
            Err(self.exit(branch, q))
        }
    }

    pub fn contains(&self, branch: usize, q: f64) -> bool {
        self.clamp(branch, q).is_ok()
    }

    /// Time on the trajectory where branch `branch` passes through `q`.
    pub fn time_at(&self, branch: usize, q: f64) -> Result<f64, DomainExit> {
        let q = self.clamp(branch, q)?.unwrap_or(q);
        Ok(self.branches[branch].inverse.refine(&self.traj, q))
    }

    /// `𝓕_i(q)` on `branch`; constant beyond the branch end within the slack.
    pub fn eval(&self, branch: usize, q: f64) -> Result<f64, DomainExit> {
        let t = self.time_at(branch, q)?;
        Ok(force_component(&self.sys, &self.traj.state_at(t), self.coord))
    }

    /// `d𝓕_i/dq_i` by central differences, one-sided near the branch ends.
    pub fn derivative(&self, branch: usize, q: f64) -> Result<f64, DomainExit> {
        let (lo, hi) = self.branches.get(branch).ok_or_else(|| self.exit(branch, q))?.domain();
        let q = self.clamp(branch, q)?.unwrap_or(q);
        let h = fd_step(q).min(0.25 * (hi - lo));
        if q - h >= lo && q + h <= hi {
            Ok((self.eval(branch, q + h)? - self.eval(branch, q - h)?) / (2.0 * h))
        } else if q + h <= hi {
            Ok((self.eval(branch, q + h)? - self.eval(branch, q)?) / h)
        } else {
            Ok((self.eval(branch, q)? - self.eval(branch, q - h)?) / h)
        }
    }

    /// Per branch: `max |𝓕_i(q_i(t)) - F_i(q(t), q̇(t))|` over the trajectory
    /// samples inside the branch window and the midpoints between them.
    pub fn restriction_residual(&self) -> Vec<f64> {
        self.branches
            .iter()
            .enumerate()
            .map(|(b, br)| {
                let (ta, tb) = br.t_window;
                let mut times: Vec<f64> = self.traj.times().filter(|t| *t >= ta && *t <= tb).collect();
                let mids: Vec<f64> = times.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
                times.extend(mids);
                times
                    .into_iter()
                    .map(|t| {
                        let s = self.traj.state_at(t);
                        let direct = force_component(&self.sys, &s, self.coord);
                        match self.eval(b, s.q[self.coord]) {
                            Ok(v) => (v - direct).abs(),
                            Err(_) => f64::INFINITY,
                        }
                    })
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}

/// `∫ 𝓕_i dq_i` from `a` to `b` on one branch by Richardson-refined
/// trapezoid panels. Reversing the limits flips the sign exactly.
pub fn integrate_between(
    force: &ReconstructedForce,
    branch: usize,
    a: f64,
    b: f64,
    panels: usize,
) -> Result<f64, DomainExit> {
    if a > b {
        return integrate_between(force, branch, b, a, panels).map(|v| -v);
    }
    force.clamp(branch, a)?;
    force.clamp(branch, b)?;
    let mut err = None;
    let v = crate::quadrature::integrate(
        |q| match force.eval(branch, q) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        a,
        b,
        panels,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}
