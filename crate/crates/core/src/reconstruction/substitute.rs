use super::work::WorkPotential;
use crate::error::{DomainExit, ReconstructionError};
use crate::integrators::Hamiltonian;
use crate::model::{Matrix, State, SystemDefinition, Vector};

/// One branch index per coordinate.
pub type BranchSelection = Vec<usize>;

/// The conservative substitute `Ĥ(q, p) = H(q, p) - Σ_i W_i(q_i)`, with
/// `∂Ĥ/∂q_i = ∂V/∂q_i - 𝓕_i(q_i)` and `∂Ĥ/∂p = M⁻¹p`.
///
/// Potentials are piecewise over branches; every evaluation names the
/// branch of each coordinate explicitly.
#[derive(Clone, Debug)]
pub struct SubstituteSystem {
    base: SystemDefinition,
    potentials: Vec<WorkPotential>,
}

pub fn build_substitute(
    sys: &SystemDefinition,
    potentials: Vec<WorkPotential>,
) -> Result<SubstituteSystem, ReconstructionError> {
    if potentials.len() != sys.dim() {
        return Err(ReconstructionError::PotentialCount { expected: sys.dim(), got: potentials.len() });
    }
    let mut potentials = potentials;
    potentials.sort_by_key(|w| w.coord);
    if potentials.iter().enumerate().any(|(i, w)| w.coord != i) {
        return Err(ReconstructionError::PotentialCount { expected: sys.dim(), got: potentials.len() });
    }
    Ok(SubstituteSystem { base: sys.conservative_part(), potentials })
}

impl SubstituteSystem {
    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Conservative part of the original system.
    pub fn base(&self) -> &SystemDefinition {
        &self.base
    }

    pub fn potentials(&self) -> &[WorkPotential] {
        &self.potentials
    }

    /// Branch count per coordinate (0 for a zero potential).
    pub fn branch_counts(&self) -> Vec<usize> {
        self.potentials.iter().map(|w| w.branch_count()).collect()
    }

    /// `Σ_i W_i(q_i)`.
    pub fn work(&self, sel: &[usize], q: &Vector) -> Result<f64, DomainExit> {
        self.potentials.iter().zip(sel).try_fold(0.0, |acc, (w, &b)| Ok(acc + w.value(b, q[w.coord])?))
    }

    pub fn hamiltonian(&self, sel: &[usize], q: &Vector, p: &Vector) -> Result<f64, DomainExit> {
        Ok(self.base.energy(q, p) - self.work(sel, q)?)
    }

    /// Restricted forces `𝓕_i(q_i)`.
    pub fn force(&self, sel: &[usize], q: &Vector) -> Result<Vector, DomainExit> {
        let mut f = Vector::zeros(self.dim());
        for (w, &b) in self.potentials.iter().zip(sel) {
            f[w.coord] = w.force(b, q[w.coord])?;
        }
        Ok(f)
    }

    pub fn gradient_q(&self, sel: &[usize], q: &Vector) -> Result<Vector, DomainExit> {
        Ok(self.base.potential_gradient(q) - self.force(sel, q)?)
    }

    pub fn gradient_p(&self, p: &Vector) -> Vector {
        self.base.velocity(p)
    }

    /// `(q̇, ṗ) = (∂Ĥ/∂p, -∂Ĥ/∂q)`.
    pub fn equations_of_motion(&self, sel: &[usize], q: &Vector, p: &Vector) -> Result<(Vector, Vector), DomainExit> {
        Ok((self.gradient_p(p), -self.gradient_q(sel, q)?))
    }

    /// Branches whose domain contains `q_i` and whose direction matches the
    /// sign of `q̇_i`; the first such branch wins. At rest any containing
    /// branch is accepted.
    pub fn select_branches(&self, q: &Vector, p: &Vector) -> Result<BranchSelection, DomainExit> {
        let v = self.base.velocity(p);
        self.potentials
            .iter()
            .map(|w| {
                if w.is_zero() {
                    return Ok(0);
                }
                let (qi, vi) = (q[w.coord], v[w.coord]);
                let fits = |b: &usize| w.contains(*b, qi);
                let dir_ok = |b: &usize| vi == 0.0 || w.branches()[*b].direction.sign() * vi > 0.0;
                (0..w.branch_count()).find(|b| fits(b) && dir_ok(b)).ok_or_else(|| w.exit(w.nearest_branch(qi), qi))
            })
            .collect()
    }

    /// Branch of each coordinate active at time `t` on the original
    /// trajectory; inside a turning-point gap, the nearer branch in time.
    pub fn select_branches_at_time(&self, t: f64) -> BranchSelection {
        self.potentials
            .iter()
            .map(|w| {
                let dist = |b: &super::work::WorkBranch| {
                    let (a, c) = b.t_window;
                    (a - t).max(t - c).max(0.0)
                };
                (0..w.branch_count())
                    .min_by(|&a, &b| dist(&w.branches()[a]).total_cmp(&dist(&w.branches()[b])))
                    .unwrap_or(0)
            })
            .collect()
    }

    /// Hessian of `Ĥ` in `q`: `∇²V - diag(d𝓕_i/dq_i)`.
    pub fn hessian(&self, sel: &[usize], q: &Vector) -> Result<Matrix, DomainExit> {
        let mut h = self.base.potential_hessian(q);
        for (w, &b) in self.potentials.iter().zip(sel) {
            h[(w.coord, w.coord)] -= w.force_derivative(b, q[w.coord])?;
        }
        Ok(h)
    }
}

impl Hamiltonian for SubstituteSystem {
    type Cursor = BranchSelection;

    fn dim(&self) -> usize {
        SubstituteSystem::dim(self)
    }

    fn mass_inverse(&self) -> &Matrix {
        self.base.mass_inverse()
    }

    fn cursor_at(&self, state: &State) -> Result<BranchSelection, DomainExit> {
        self.select_branches(&state.q, &state.p)
    }

    fn energy(&self, sel: &BranchSelection, q: &Vector, p: &Vector) -> Result<f64, DomainExit> {
        self.hamiltonian(sel, q, p)
    }

    fn grad_q(&self, sel: &BranchSelection, q: &Vector) -> Result<Vector, DomainExit> {
        self.gradient_q(sel, q)
    }

    fn hessian_q(&self, sel: &BranchSelection, q: &Vector) -> Result<Matrix, DomainExit> {
        self.hessian(sel, q)
    }

    /// A coordinate whose velocity has reversed relative to its branch moves
    /// to the next branch; reversing past the last branch leaves the curve.
    fn advance_cursor(&self, sel: &mut BranchSelection, q: &Vector, p: &Vector) -> Result<(), DomainExit> {
        let v = self.base.velocity(p);
        for w in &self.potentials {
            if w.is_zero() {
                continue;
            }
            let i = w.coord;
            let b = sel[i];
            let reversed = w.branches()[b].direction.sign() * v[i] < 0.0;
            if reversed {
                if b + 1 < w.branch_count() && w.contains(b + 1, q[i]) {
                    sel[i] = b + 1;
                } else {
                    let (lo, hi) = w.branches()[b].domain();
                    return Err(DomainExit { coord: i, q: q[i], branch: b, lo, hi, nearest_branch: Some(b), t: None });
                }
            }
            w.value(sel[i], q[i])?;
        }
        Ok(())
    }
}
