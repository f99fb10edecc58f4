use serde::Serialize;

use crate::error::ReconstructionError;
use crate::model::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Increasing => 1.0,
            Direction::Decreasing => -1.0,
        }
    }

    pub fn of(v: f64) -> Self {
        if v >= 0.0 {
            Direction::Increasing
        } else {
            Direction::Decreasing
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentSample {
    pub q: f64,
    pub t: f64,
    pub qdot: f64,
}

/// A time window on which one coordinate is strictly monotone.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneSegment {
    pub coord: usize,
    pub branch_id: usize,
    pub t_window: (f64, f64),
    pub direction: Direction,
    /// Time-ordered; `q` strictly monotone in `direction`.
    pub samples: Vec<SegmentSample>,
}

impl MonotoneSegment {
    /// `[min q, max q]` over the samples.
    pub fn q_range(&self) -> (f64, f64) {
        let a = self.samples.first().map_or(f64::NAN, |s| s.q);
        let b = self.samples.last().map_or(f64::NAN, |s| s.q);
        (a.min(b), a.max(b))
    }
}

/// `1e-8 · max |q̇_i|` over the trajectory samples.
pub fn default_eps_turn(traj: &Trajectory, coord: usize) -> f64 {
    1e-8 * traj.rates().iter().map(|r| r.qdot[coord].abs()).fold(0.0, f64::max)
}

/// Bisection for a root of `g` on `[a, b]` where `g(a)` and `g(b)` differ in sign.
fn bisect<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64) -> f64 {
    let mut ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Split the trajectory into monotone pieces of coordinate `coord`.
///
/// Turning points are roots of `q̇_i` located by sign change and bisection
/// on the dense output. Each piece is trimmed to where `|q̇_i| ≥ eps_turn`,
/// so `|q̇_i| > eps_turn` strictly inside every window.
pub fn segment_monotone(
    traj: &Trajectory,
    coord: usize,
    eps_turn: Option<f64>,
) -> Result<Vec<MonotoneSegment>, ReconstructionError> {
    if traj.len() < 2 {
        return Err(ReconstructionError::ShortTrajectory(traj.len()));
    }
    let samples = traj.samples();
    let rates = traj.rates();
    let q0 = samples[0].q[coord];
    let vmax = rates.iter().map(|r| r.qdot[coord].abs()).fold(0.0, f64::max);
    if samples.iter().all(|s| s.q[coord] == q0) || vmax == 0.0 {
        return Err(ReconstructionError::DegenerateCoordinate(coord));
    }
    let eps = eps_turn.unwrap_or(1e-8 * vmax);
    let vel = |t: f64| traj.coordinate_at(coord, t).1;
    let speed_excess = |t: f64| vel(t).abs() - eps;

    // Maximal runs of samples with |q̇| > eps and a common velocity sign.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    for k in 0..samples.len() {
        let v = rates[k].qdot[coord];
        let ok = v.abs() > eps;
        match start {
            Some(s) if ok && (v > 0.0) == (rates[s].qdot[coord] > 0.0) => {}
            Some(s) => {
                runs.push((s, k - 1));
                start = ok.then_some(k);
            }
            None if ok => start = Some(k),
            None => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, samples.len() - 1));
    }

    let mut out = Vec::new();
    for (a, b) in runs {
        let dir = Direction::of(rates[a].qdot[coord]);
        // Extend each end to the eps crossing (or turning root) on the dense output.
        let ta = if a == 0 {
            samples[0].t
        } else {
            let (l, r) = (samples[a - 1].t, samples[a].t);
            let lv = vel(l);
            if lv * dir.sign() < 0.0 {
                // sign change inside: root first, then the eps crossing after it
                let root = bisect(vel, l, r);
                if speed_excess(root) < 0.0 {
                    bisect(speed_excess, root, r)
                } else {
                    root
                }
            } else if speed_excess(l) < 0.0 {
                bisect(speed_excess, l, r)
            } else {
                l
            }
        };
        let last = samples.len() - 1;
        let tb = if b == last {
            samples[last].t
        } else {
            let (l, r) = (samples[b].t, samples[b + 1].t);
            let rv = vel(r);
            if rv * dir.sign() < 0.0 {
                let root = bisect(vel, l, r);
                if speed_excess(root) < 0.0 {
                    bisect(speed_excess, l, root)
                } else {
                    root
                }
            } else if speed_excess(r) < 0.0 {
                bisect(speed_excess, l, r)
            } else {
                r
            }
        };
        let mut segs: Vec<SegmentSample> = Vec::with_capacity(b - a + 3);
        let push = |segs: &mut Vec<SegmentSample>, t: f64| {
            let (q, qdot) = traj.coordinate_at(coord, t);
            let ok = segs.last().is_none_or(|p: &SegmentSample| (q - p.q) * dir.sign() > 0.0 && t > p.t);
            if ok {
                segs.push(SegmentSample { q, t, qdot });
            }
        };
        push(&mut segs, ta);
        for s in &samples[a..=b] {
            if s.t > ta && s.t < tb {
                push(&mut segs, s.t);
            }
        }
        if tb > ta {
            push(&mut segs, tb);
        }
        if segs.len() >= 2 {
            out.push(MonotoneSegment {
                coord,
                branch_id: out.len(),
                t_window: (segs[0].t, segs.last().unwrap().t),
                direction: dir,
                samples: segs,
            });
        }
    }
    if out.is_empty() {
        return Err(ReconstructionError::Threshold { coord, eps });
    }
    Ok(out)
}

/// Interior turning times of `coord` (roots of `q̇_i` strictly inside the
/// trajectory window).
pub fn turning_times(traj: &Trajectory, coord: usize) -> Vec<f64> {
    let s = traj.samples();
    let r = traj.rates();
    let vel = |t: f64| traj.coordinate_at(coord, t).1;
    let mut out = Vec::new();
    for k in 0..s.len().saturating_sub(1) {
        let (v0, v1) = (r[k].qdot[coord], r[k + 1].qdot[coord]);
        if k > 0 && v0 == 0.0 && r[k - 1].qdot[coord] * v1 < 0.0 {
            out.push(s[k].t);
        } else if v0 * v1 < 0.0 {
            out.push(bisect(vel, s[k].t, s[k + 1].t));
        }
    }
    out
}
