use super::{OdeSystem, StepStats};
use crate::error::IntegrationError;
use crate::interp::hermite;

fn step<S: OdeSystem>(sys: &S, t: f64, y: &[f64], f0: &[f64], h: f64, out: &mut [f64]) -> Result<(), IntegrationError> {
    let n = y.len();
    let mut tmp = vec![0.0; n];
    let (mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * f0[i];
    }
    sys.rhs(t + 0.5 * h, &tmp, &mut k2)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    sys.rhs(t + 0.5 * h, &tmp, &mut k3)?;
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    sys.rhs(t + h, &tmp, &mut k4)?;
    for i in 0..n {
        out[i] = y[i] + h * (f0[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
    }
    Ok(())
}

/// Classic fixed-step RK4. Output times falling between steps are filled
/// by cubic Hermite interpolation using the vector field at both ends.
pub(super) fn run<S: OdeSystem, F: FnMut(f64, &[f64])>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    outputs: &[f64],
    h: f64,
    max_steps: usize,
    mut sample: F,
) -> Result<StepStats, IntegrationError> {
    let n = sys.dim();
    let t_end = *outputs.last().unwrap_or(&t0);
    let steps = ((t_end - t0) / h * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    if steps > max_steps {
        return Err(IntegrationError::MaxSteps(max_steps));
    }
    let mut stats = StepStats { next_step: h, ..Default::default() };
    let mut y = y0.to_vec();
    let mut f = vec![0.0; n];
    sys.rhs(t0, &y, &mut f)?;
    let mut y1 = vec![0.0; n];
    let mut f1 = vec![0.0; n];
    let mut next = 0;
    for k in 0..steps {
        let t = t0 + h * k as f64;
        let t1 = if k + 1 == steps { t_end } else { t0 + h * (k + 1) as f64 };
        step(sys, t, &y, &f, t1 - t, &mut y1)?;
        sys.rhs(t1, &y1, &mut f1)?;
        stats.accepted += 1;
        stats.evaluations += 4;
        if y1.iter().any(|v| !v.is_finite()) {
            return Err(IntegrationError::NonFinite(t1));
        }
        while next < outputs.len() && outputs[next] <= t1 {
            let to = outputs[next];
            if to == t1 {
                sample(to, &y1);
            } else {
                let v: Vec<f64> = (0..n).map(|i| hermite(t, t1, y[i], y1[i], f[i], f1[i], to)).collect();
                sample(to, &v);
            }
            next += 1;
        }
        std::mem::swap(&mut y, &mut y1);
        std::mem::swap(&mut f, &mut f1);
    }
    Ok(stats)
}
