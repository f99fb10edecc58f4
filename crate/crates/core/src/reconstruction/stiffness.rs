use super::force::{reconstruct_force_shared, ReconstructedForce};
use super::segment::segment_monotone;
use super::substitute::{build_substitute, SubstituteSystem};
use super::work::{BranchTable, WorkPotential};
use super::ReconstructionOptions;
use crate::error::ReconstructionError;
use crate::model::{Matrix, SystemDefinition, Trajectory};
use std::sync::Arc;

/// Default minimum number of `q_i` levels per branch.
pub const DEFAULT_GRID_POINTS: usize = 2001;

/// Restricted damping terms on one branch, at `q_i` levels in time order.
#[derive(Clone, Debug)]
pub struct RhoBranch {
    pub branch_id: usize,
    pub q: Vec<f64>,
    /// `rho[k][j] = C_ij q̇_j(t(q_k))`.
    pub rho: Vec<Vec<f64>>,
    /// `kappa[k][j] = rho[k][j] / q_k`, only where `|q_k| > eps_div`.
    pub kappa: Vec<Option<Vec<f64>>>,
    /// Diagonal equivalent stiffness `Σ_l kappa[k][l]`, where defined.
    pub k_equiv: Vec<Option<f64>>,
}

#[derive(Clone, Debug)]
pub struct CoordinateStiffness {
    pub coord: usize,
    pub eps_div: f64,
    pub branches: Vec<RhoBranch>,
    /// `max |Σ_j rho_ij + 𝓕_i|` over the grid.
    pub identity_residual: f64,
    /// Work potential with slope `-Σ_j rho_ij`; `U_i = -W_i`.
    pub potential: WorkPotential,
}

/// Equivalent stiffness tabulations for every coordinate.
#[derive(Clone, Debug)]
pub struct EquivalentStiffness {
    pub coords: Vec<CoordinateStiffness>,
}

impl EquivalentStiffness {
    pub fn potentials(&self) -> Vec<WorkPotential> {
        self.coords.iter().map(|c| c.potential.clone()).collect()
    }

    /// `½ pᵀM⁻¹p + V(q) + Σ_i U_i(q_i)` assembled as a substitute system.
    pub fn substitute(&self, sys: &SystemDefinition) -> Result<SubstituteSystem, ReconstructionError> {
        build_substitute(sys, self.potentials())
    }

    pub fn identity_residual(&self) -> f64 {
        self.coords.iter().map(|c| c.identity_residual).fold(0.0, f64::max)
    }
}

fn rho_at(force: &ReconstructedForce, c: &Matrix, branch: usize, q: f64) -> Result<Vec<f64>, ReconstructionError> {
    let t = force.time_at(branch, q)?;
    let s = force.trajectory().state_at(t);
    let v = force.system().velocity(&s.p);
    let i = force.coord;
    Ok((0..v.len()).map(|j| c[(i, j)] * v[j]).collect())
}

/// The branch's own levels, each interval split evenly until there are at
/// least `min_points`. Trajectory levels cluster near turning points.
fn branch_levels(table: &[(f64, f64, f64)], min_points: usize) -> Vec<f64> {
    let intervals = table.len().saturating_sub(1).max(1);
    let split = min_points.saturating_sub(1).div_ceil(intervals).max(1);
    let mut qs = vec![table[0].0];
    for w in table.windows(2) {
        for k in 1..split {
            qs.push(w[0].0 + (w[1].0 - w[0].0) * k as f64 / split as f64);
        }
        qs.push(w[1].0);
    }
    qs
}

/// Restrict each damping term `C_ij q̇_j` to the phase curve as a function of
/// `q_i` and divide by `q_i` away from zero. The potentials are rebuilt from
/// the restricted terms alone.
pub fn equivalent_stiffness(
    traj: &Trajectory,
    sys: &SystemDefinition,
    opts: &ReconstructionOptions,
) -> Result<EquivalentStiffness, ReconstructionError> {
    let c = sys.damping().ok_or(ReconstructionError::NotLinear)?.clone();
    if sys.stiffness().is_none() {
        return Err(ReconstructionError::NotLinear);
    }
    let n = sys.dim();
    let traj = Arc::new(traj.clone());
    let sys_arc = Arc::new(sys.clone());
    let grid = opts.grid_points.max(2);
    let mut coords = Vec::with_capacity(n);
    for i in 0..n {
        let q0 = traj.ic().q[i];
        let qmax = traj.samples().iter().map(|s| s.q[i].abs()).fold(0.0, f64::max);
        let eps_div = opts.div_rel * qmax;
        let segments = match segment_monotone(&traj, i, opts.eps_turn(&traj, i)) {
            Ok(s) => s,
            Err(ReconstructionError::DegenerateCoordinate(_)) if super::force_vanishes_along(&traj, sys, i) => {
                coords.push(CoordinateStiffness {
                    coord: i,
                    eps_div,
                    branches: Vec::new(),
                    identity_residual: 0.0,
                    potential: WorkPotential::zero(i, q0),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let force =
            reconstruct_force_shared(traj.clone(), sys_arc.clone(), i, &segments)?.with_domain_slack(opts.domain_slack);
        let mut branches = Vec::new();
        let mut tables = Vec::new();
        let mut residual: f64 = 0.0;
        let mut any_division = false;
        for (b, br) in force.branches.iter().enumerate() {
            let qs = branch_levels(&br.table, grid);
            let rho = qs.iter().map(|&q| rho_at(&force, &c, b, q)).collect::<Result<Vec<_>, _>>()?;
            for (q, r) in qs.iter().zip(&rho) {
                let f = force.eval(b, *q)?;
                residual = residual.max((r.iter().sum::<f64>() + f).abs());
            }
            let kappa: Vec<Option<Vec<f64>>> = qs
                .iter()
                .zip(&rho)
                .map(|(q, r)| (q.abs() > eps_div).then(|| r.iter().map(|x| x / q).collect()))
                .collect();
            any_division |= kappa.iter().any(|k| k.is_some());
            let k_equiv = kappa.iter().map(|k| k.as_ref().map(|v| v.iter().sum())).collect();
            let fmid = qs
                .windows(2)
                .map(|w| rho_at(&force, &c, b, 0.5 * (w[0] + w[1])).map(|r| -r.iter().sum::<f64>()))
                .collect::<Result<Vec<_>, _>>()?;
            let f: Vec<f64> = rho.iter().map(|r| -r.iter().sum::<f64>()).collect();
            tables.push(BranchTable {
                branch_id: br.branch_id,
                direction: br.direction,
                t_window: br.t_window,
                q: qs.clone(),
                f,
                fmid,
            });
            branches.push(RhoBranch { branch_id: br.branch_id, q: qs, rho, kappa, k_equiv });
        }
        if !any_division {
            return Err(ReconstructionError::EmptyDivisionWindow(i));
        }
        let potential = if force.vanishes() {
            WorkPotential::zero(i, q0)
        } else {
            WorkPotential::from_tables(i, tables, q0, opts.domain_slack, None)?
        };
        coords.push(CoordinateStiffness { coord: i, eps_div, branches, identity_residual: residual, potential });
    }
    Ok(EquivalentStiffness { coords })
}
