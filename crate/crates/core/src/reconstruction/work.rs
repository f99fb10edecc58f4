use super::force::{ReconstructedForce, DEFAULT_DOMAIN_SLACK};
use super::segment::Direction;
use crate::error::{DomainExit, ReconstructionError};
use crate::interp::{hermite, hermite_derivative};
use crate::quadrature::richardson_panel;

/// Force samples along one branch in time order, with one midpoint value per panel.
#[derive(Clone, Debug)]
pub(crate) struct BranchTable {
    pub branch_id: usize,
    pub direction: Direction,
    pub t_window: (f64, f64),
    pub q: Vec<f64>,
    pub f: Vec<f64>,
    pub fmid: Vec<f64>,
}

/// Cumulative work on one branch, stored with ascending `q`.
#[derive(Clone, Debug)]
pub struct WorkBranch {
    pub branch_id: usize,
    pub direction: Direction,
    pub t_window: (f64, f64),
    q: Vec<f64>,
    w: Vec<f64>,
    slope: Vec<f64>,
}

impl WorkBranch {
    pub fn domain(&self) -> (f64, f64) {
        (self.q[0], *self.q.last().unwrap())
    }

    /// Nodes as `(q, W before anchoring, 𝓕)`, ascending in `q`.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.q.len()).map(|k| (self.q[k], self.w[k], self.slope[k]))
    }

    fn locate(&self, q: f64) -> usize {
        self.q.partition_point(|&v| v <= q).saturating_sub(1).min(self.q.len().saturating_sub(2))
    }

    fn raw(&self, q: f64) -> f64 {
        if self.q.len() == 1 {
            return self.w[0] + self.slope[0] * (q - self.q[0]);
        }
        let k = self.locate(q);
        if q == self.q[k] {
            return self.w[k];
        }
        hermite(self.q[k], self.q[k + 1], self.w[k], self.w[k + 1], self.slope[k], self.slope[k + 1], q)
    }

    fn raw_slope(&self, q: f64) -> f64 {
        if self.q.len() == 1 {
            return self.slope[0];
        }
        let k = self.locate(q);
        if q == self.q[k] {
            return self.slope[k];
        }
        hermite_derivative(self.q[k], self.q[k + 1], self.w[k], self.w[k + 1], self.slope[k], self.slope[k + 1], q)
    }
}

/// Work potential `W_i(q_i) = ∫ 𝓕_i dq_i`, per branch, anchored so that
/// `W_i(q_i0) = 0` on the first branch and continuous in value across
/// branch joins (the gap left by turning-point trimming is bridged by one
/// trapezoid).
///
/// Between tabulation nodes `W_i` is the cubic Hermite with slopes `𝓕_i`.
/// Within `domain_slack` beyond a branch end it continues linearly.
#[derive(Clone, Debug)]
pub struct WorkPotential {
    pub coord: usize,
    pub anchor: f64,
    pub domain_slack: f64,
    offset: f64,
    branches: Vec<WorkBranch>,
    exact: Option<ReconstructedForce>,
}

impl WorkPotential {
    /// `W ≡ 0`, defined for every `q`.
    pub fn zero(coord: usize, anchor: f64) -> Self {
        Self { coord, anchor, domain_slack: DEFAULT_DOMAIN_SLACK, offset: 0.0, branches: Vec::new(), exact: None }
    }

    pub(crate) fn from_tables(
        coord: usize,
        tables: Vec<BranchTable>,
        anchor: f64,
        domain_slack: f64,
        exact: Option<ReconstructedForce>,
    ) -> Result<Self, ReconstructionError> {
        let mut branches = Vec::with_capacity(tables.len());
        let mut prev_end: Option<(f64, f64, f64)> = None;
        for t in tables {
            let start = match prev_end {
                None => 0.0,
                Some((q, w, f)) => w + 0.5 * (t.q[0] - q) * (f + t.f[0]),
            };
            let mut w = Vec::with_capacity(t.q.len());
            let mut acc = start;
            w.push(acc);
            for k in 0..t.q.len() - 1 {
                acc += richardson_panel(t.q[k + 1] - t.q[k], t.f[k], t.fmid[k], t.f[k + 1]);
                w.push(acc);
            }
            prev_end = Some((*t.q.last().unwrap(), acc, *t.f.last().unwrap()));
            let (mut q, mut slope) = (t.q, t.f);
            if q.len() > 1 && q[1] < q[0] {
                q.reverse();
                w.reverse();
                slope.reverse();
            }
            branches.push(WorkBranch {
                branch_id: t.branch_id,
                direction: t.direction,
                t_window: t.t_window,
                q,
                w,
                slope,
            });
        }
        let mut pot = Self { coord, anchor, domain_slack, offset: 0.0, branches, exact };
        pot.offset = match pot.raw(0, anchor) {
            Ok(v) => v,
            Err(_) => return Err(ReconstructionError::AnchorOutside { coord, q: anchor }),
        };
        Ok(pot)
    }

    pub fn is_zero(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn branches(&self) -> &[WorkBranch] {
        &self.branches
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn reconstructed_force(&self) -> Option<&ReconstructedForce> {
        self.exact.as_ref()
    }

    /// Branch nearest to `q` by distance to its domain.
    pub fn nearest_branch(&self, q: f64) -> usize {
        let dist = |b: &WorkBranch| {
            let (l, h) = b.domain();
            (l - q).max(q - h).max(0.0)
        };
        (0..self.branches.len())
            .min_by(|&a, &b| dist(&self.branches[a]).total_cmp(&dist(&self.branches[b])))
            .unwrap_or(0)
    }

    pub(crate) fn exit(&self, branch: usize, q: f64) -> DomainExit {
        let (lo, hi) = self.branches.get(branch).map_or((f64::NAN, f64::NAN), |b| b.domain());
        let nearest = (!self.branches.is_empty()).then(|| self.nearest_branch(q));
        DomainExit { coord: self.coord, q, branch, lo, hi, nearest_branch: nearest, t: None }
    }

    /// `Ok(None)` inside the branch, `Ok(Some(end))` within the slack.
    fn clamp(&self, branch: usize, q: f64) -> Result<Option<f64>, DomainExit> {
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
        self.is_zero() || self.clamp(branch, q).is_ok()
    }

    fn raw(&self, branch: usize, q: f64) -> Result<f64, DomainExit> {
        let b = self.branches.get(branch).ok_or_else(|| self.exit(branch, q))?;
        Ok(match self.clamp(branch, q)? {
            None => b.raw(q),
            Some(end) => b.raw(end) + b.raw_slope(end) * (q - end),
        })
    }

    /// `W_i(q)` on `branch`.
    pub fn value(&self, branch: usize, q: f64) -> Result<f64, DomainExit> {
        if self.is_zero() {
            return Ok(0.0);
        }
        Ok(self.raw(branch, q)? - self.offset)
    }

    /// `dW_i/dq_i = 𝓕_i(q)` on `branch`: the exact restriction when
    /// available, otherwise the slope of the stored interpolant.
    pub fn force(&self, branch: usize, q: f64) -> Result<f64, DomainExit> {
        if self.is_zero() {
            return Ok(0.0);
        }
        match &self.exact {
            Some(f) => {
                self.clamp(branch, q)?;
                f.eval(branch, q)
            }
            None => {
                let end = self.clamp(branch, q)?;
                Ok(self.branches[branch].raw_slope(end.unwrap_or(q)))
            }
        }
    }

    /// `d𝓕_i/dq_i` on `branch`.
    pub fn force_derivative(&self, branch: usize, q: f64) -> Result<f64, DomainExit> {
        if self.is_zero() {
            return Ok(0.0);
        }
        match &self.exact {
            Some(f) => {
                self.clamp(branch, q)?;
                f.derivative(branch, q)
            }
            None => {
                let (lo, hi) = self.branches[branch].domain();
                let q = self.clamp(branch, q)?.unwrap_or(q);
                let h = crate::model::fd_step(q).min(0.25 * (hi - lo));
                let (a, b) = ((q - h).max(lo), (q + h).min(hi));
                let br = &self.branches[branch];
                Ok((br.raw_slope(b) - br.raw_slope(a)) / (b - a))
            }
        }
    }
}

/// Integrate the restricted force into an anchored work potential.
///
/// A force that vanishes on every branch yields [`WorkPotential::zero`].
pub fn integrate_work_potential(force: &ReconstructedForce, q_i0: f64) -> Result<WorkPotential, ReconstructionError> {
    if force.vanishes() {
        return Ok(WorkPotential::zero(force.coord, q_i0));
    }
    let mut tables = Vec::with_capacity(force.branches.len());
    for (b, br) in force.branches.iter().enumerate() {
        let q: Vec<f64> = br.table.iter().map(|r| r.0).collect();
        let f: Vec<f64> = br.table.iter().map(|r| r.2).collect();
        let fmid = q.windows(2).map(|w| force.eval(b, 0.5 * (w[0] + w[1]))).collect::<Result<Vec<_>, _>>()?;
        tables.push(BranchTable {
            branch_id: br.branch_id,
            direction: br.direction,
            t_window: br.t_window,
            q,
            f,
            fmid,
        });
    }
    WorkPotential::from_tables(force.coord, tables, q_i0, force.domain_slack, Some(force.clone()))
}
