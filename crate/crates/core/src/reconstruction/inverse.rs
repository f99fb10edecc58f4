use super::segment::MonotoneSegment;
use crate::error::ReconstructionError;
use crate::interp::Pchip;
use crate::model::Trajectory;

/// Minimum number of segment samples for the piecewise-cubic inverse.
pub const MIN_INVERSE_SAMPLES: usize = 4;

/// Single-valued inverse `t(q_i)` on one monotone segment.
#[derive(Clone, Debug)]
pub struct InverseMap {
    segment: MonotoneSegment,
    interpolant: Pchip,
}

pub fn build_inverse_map(segment: MonotoneSegment) -> Result<InverseMap, ReconstructionError> {
    let n = segment.samples.len();
    if n < MIN_INVERSE_SAMPLES {
        return Err(ReconstructionError::TooFewSamples { got: n, need: MIN_INVERSE_SAMPLES });
    }
    let sign = segment.direction.sign();
    if segment.samples.windows(2).any(|w| (w[1].q - w[0].q) * sign <= 0.0) {
        return Err(ReconstructionError::NotMonotone);
    }
    let q: Vec<f64> = segment.samples.iter().map(|s| s.q).collect();
    let t: Vec<f64> = segment.samples.iter().map(|s| s.t).collect();
    let interpolant = Pchip::new(&q, &t)?;
    Ok(InverseMap { segment, interpolant })
}

impl InverseMap {
    pub fn segment(&self) -> &MonotoneSegment {
        &self.segment
    }

    pub fn domain(&self) -> (f64, f64) {
        self.interpolant.domain()
    }

    /// Shape-preserving interpolated `t(q)`; exact at segment samples.
    pub fn time_at(&self, q: f64) -> f64 {
        self.interpolant.eval(q)
    }

    /// `t(q)` refined against the trajectory's own dense output, so that
    /// `q_i(t(q)) = q` to rounding. Queries outside the domain clamp to its ends.
    pub fn refine(&self, traj: &Trajectory, q: f64) -> f64 {
        let coord = self.segment.coord;
        let s = &self.segment.samples;
        let sign = self.segment.direction.sign();
        // bracket in time order: samples are time-ordered with q monotone
        let k = s.partition_point(|x| (x.q - q) * sign < 0.0);
        if k < s.len() && s[k].q == q {
            return s[k].t;
        }
        if k == 0 {
            return s[0].t;
        }
        if k == s.len() {
            return s[k - 1].t;
        }
        let (mut a, mut b) = (s[k - 1].t, s[k].t);
        let g = |t: f64| (traj.coordinate_at(coord, t).0 - q) * sign;
        let mut t = self.time_at(q).clamp(a, b);
        for _ in 0..60 {
            let gt = g(t);
            if gt == 0.0 {
                return t;
            }
            if gt < 0.0 {
                a = t;
            } else {
                b = t;
            }
            let slope = traj.position_slope(coord, t) * sign;
            let mut next = t - gt / slope;
            if !(slope > 0.0) || !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - t).abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0)
                || b - a <= 4.0 * f64::EPSILON * t.abs().max(1.0)
            {
                return next;
            }
            t = next;
        }
        t
    }
}
