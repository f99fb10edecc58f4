//! Restriction of the nonconservative force to one phase curve and
//! assembly of the substitute conservative system.
//!
//! Each coordinate is split into monotone branches at its turning points.
//! On a branch, time is a single-valued function of the coordinate, so the
//! force component evaluated along the curve becomes a function `𝓕_i(q_i)`
//! of that coordinate alone. Integrating it gives the work potential `W_i`,
//! and `Ĥ = H - Σ W_i` is conservative. Branches are explicit: at the same
//! `q_i` an oscillating coordinate has one value of `𝓕_i` per passage.

mod force;
mod inverse;
mod segment;
mod stiffness;
mod substitute;
mod work;

use std::sync::Arc;

pub use force::{
    integrate_between, reconstruct_force, reconstruct_force_shared, ForceBranch, Provenance, ReconstructedForce,
    DEFAULT_DOMAIN_SLACK,
};
pub use inverse::{build_inverse_map, InverseMap, MIN_INVERSE_SAMPLES};
pub use segment::{default_eps_turn, segment_monotone, turning_times, Direction, MonotoneSegment, SegmentSample};
pub use stiffness::{equivalent_stiffness, CoordinateStiffness, EquivalentStiffness, RhoBranch, DEFAULT_GRID_POINTS};
pub use substitute::{build_substitute, BranchSelection, SubstituteSystem};
pub use work::{integrate_work_potential, WorkBranch, WorkPotential};

use crate::error::ReconstructionError;
use crate::model::{SystemDefinition, Trajectory};

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionOptions {
    /// Turning threshold relative to `max |q̇_i|`.
    pub turn_rel: f64,
    /// Division threshold for the equivalent stiffness, relative to `max |q_i|`.
    pub div_rel: f64,
    /// Absolute tolerance for queries just past a branch end.
    pub domain_slack: f64,
    /// Minimum levels per branch for the equivalent stiffness.
    pub grid_points: usize,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self { turn_rel: 1e-8, div_rel: 1e-6, domain_slack: DEFAULT_DOMAIN_SLACK, grid_points: DEFAULT_GRID_POINTS }
    }
}

impl ReconstructionOptions {
    /// Absolute turning threshold `turn_rel · max |q̇_i|`.
    pub fn eps_turn(&self, traj: &Trajectory, coord: usize) -> Option<f64> {
        let vmax = traj.rates().iter().map(|r| r.qdot[coord].abs()).fold(0.0, f64::max);
        Some(self.turn_rel * vmax)
    }
}

/// All products of reconstructing one trajectory.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    /// Per coordinate; empty for a coordinate that never moves.
    pub segments: Vec<Vec<MonotoneSegment>>,
    /// Per coordinate; `None` for a coordinate that never moves.
    pub forces: Vec<Option<ReconstructedForce>>,
    pub substitute: SubstituteSystem,
}

pub(crate) fn force_vanishes_along(traj: &Trajectory, sys: &SystemDefinition, coord: usize) -> bool {
    traj.samples().iter().all(|s| sys.force_at(&s.q, &sys.velocity(&s.p))[coord] == 0.0)
}

/// Reconstruct every coordinate and assemble the substitute.
///
/// A coordinate that stays constant is accepted only when its force
/// component vanishes along the whole curve; it gets the zero potential.
pub fn reconstruct(
    traj: &Trajectory,
    sys: &SystemDefinition,
    opts: &ReconstructionOptions,
) -> Result<Reconstruction, ReconstructionError> {
    let n = sys.dim();
    if traj.dim() != n {
        return Err(
            crate::error::ModelError::DimensionMismatch { what: "trajectory", expected: n, got: traj.dim() }.into()
        );
    }
    let traj_arc = Arc::new(traj.clone());
    let sys_arc = Arc::new(sys.clone());
    let mut segments = Vec::with_capacity(n);
    let mut forces = Vec::with_capacity(n);
    let mut potentials = Vec::with_capacity(n);
    for i in 0..n {
        let q0 = traj.ic().q[i];
        match segment_monotone(traj, i, opts.eps_turn(traj, i)) {
            Ok(segs) => {
                let force = reconstruct_force_shared(traj_arc.clone(), sys_arc.clone(), i, &segs)?
                    .with_domain_slack(opts.domain_slack);
                potentials.push(integrate_work_potential(&force, q0)?);
                forces.push(Some(force));
                segments.push(segs);
            }
            Err(ReconstructionError::DegenerateCoordinate(_)) if force_vanishes_along(traj, sys, i) => {
                potentials.push(WorkPotential::zero(i, q0));
                forces.push(None);
                segments.push(Vec::new());
            }
            Err(e) => return Err(e),
        }
    }
    let substitute = build_substitute(sys, potentials)?;
    Ok(Reconstruction { segments, forces, substitute })
}

#[cfg(test)]
mod tests;
