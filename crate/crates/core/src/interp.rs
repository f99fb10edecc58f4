//! Cubic Hermite pieces and a monotone shape-preserving interpolant.

use crate::error::InterpError;

/// Cubic Hermite interpolation on `[x0, x1]` with end slopes `d0`, `d1`.
#[inline]
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    y0 * h00 + h * d0 * h10 + y1 * h01 + h * d1 * h11
}

#[inline]
pub fn hermite_derivative(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let s2 = s * s;
    let dh00 = (6.0 * s2 - 6.0 * s) / h;
    let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
    let dh01 = (-6.0 * s2 + 6.0 * s) / h;
    let dh11 = 3.0 * s2 - 2.0 * s;
    y0 * dh00 + d0 * dh10 + y1 * dh01 + d1 * dh11
}

/// Piecewise cubic Hermite interpolant with Fritsch–Carlson slope limiting.
///
/// Abscissae may be strictly increasing or strictly decreasing; they are
/// stored increasing. Monotone data yields a monotone interpolant.
#[derive(Clone, Debug)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self, InterpError> {
        if x.len() != y.len() {
            return Err(InterpError::LengthMismatch(x.len(), y.len()));
        }
        if x.len() < 2 {
            return Err(InterpError::TooFewNodes { need: 2, got: x.len() });
        }
        let (mut x, mut y) = (x.to_vec(), y.to_vec());
        if x[1] < x[0] {
            x.reverse();
            y.reverse();
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(InterpError::NotMonotone);
        }
        let d = slopes(&x, &y);
        Ok(Self { x, y, d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }

    fn locate(&self, x: f64) -> usize {
        let k = self.x.partition_point(|&v| v <= x);
        k.saturating_sub(1).min(self.x.len() - 2)
    }

    /// Value at `x`; outside the node range the end cubic is extended.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.locate(x);
        if x == self.x[k] {
            return self.y[k];
        }
        hermite(self.x[k], self.x[k + 1], self.y[k], self.y[k + 1], self.d[k], self.d[k + 1], x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let k = self.locate(x);
        hermite_derivative(self.x[k], self.x[k + 1], self.y[k], self.y[k + 1], self.d[k], self.d[k + 1], x)
    }
}

fn slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            // three-point (non-uniform) centred estimate
            d[k] = (h[k] * delta[k - 1] + h[k - 1] * delta[k]) / (h[k - 1] + h[k]);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    // Fritsch–Carlson limiter: keep (α, β) inside the circle of radius 3
    for k in 0..n - 1 {
        if delta[k] == 0.0 {
            d[k] = 0.0;
            d[k + 1] = 0.0;
            continue;
        }
        let a = d[k] / delta[k];
        let b = d[k + 1] / delta[k];
        if a < 0.0 {
            d[k] = 0.0;
        }
        if b < 0.0 {
            d[k + 1] = 0.0;
        }
        let (a, b) = (a.max(0.0), b.max(0.0));
        let r2 = a * a + b * b;
        if r2 > 9.0 {
            let tau = 3.0 / r2.sqrt();
            d[k] = tau * a * delta[k];
            d[k + 1] = tau * b * delta[k];
        }
    }
    d
}

/// One-sided three-point end slope with shape preservation.
fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |x: f64| 2.0 * x * x * x - x + 0.5;
        let df = |x: f64| 6.0 * x * x - 1.0;
        let (a, b) = (0.3, 1.1);
        for k in 0..=10 {
            let x = a + (b - a) * k as f64 / 10.0;
            assert!((hermite(a, b, f(a), f(b), df(a), df(b), x) - f(x)).abs() < 1e-14);
            assert!((hermite_derivative(a, b, f(a), f(b), df(a), df(b), x) - df(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn pchip_is_exact_on_lines_and_nodes() {
        let x: Vec<f64> = (0..20).map(|k| (k as f64).powf(1.3)).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let p = Pchip::new(&x, &y).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(p.eval(*xi), *yi);
        }
        assert!((p.eval(7.77) - (3.0 * 7.77 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn pchip_accepts_decreasing_abscissae() {
        let x = [4.0, 3.0, 2.0, 1.0];
        let y = [16.0, 9.0, 4.0, 1.0];
        let p = Pchip::new(&x, &y).unwrap();
        assert_eq!(p.domain(), (1.0, 4.0));
        assert_eq!(p.eval(3.0), 9.0);
    }

    #[test]
    fn pchip_errors() {
        assert!(matches!(Pchip::new(&[1.0], &[1.0]), Err(InterpError::TooFewNodes { .. })));
        assert_eq!(Pchip::new(&[0.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).unwrap_err(), InterpError::NotMonotone);
        assert!(matches!(Pchip::new(&[0.0, 1.0], &[0.0]), Err(InterpError::LengthMismatch(2, 1))));
    }

    proptest! {
        #[test]
        fn pchip_preserves_monotonicity(steps in prop::collection::vec((0.01f64..2.0, 0.0f64..3.0), 3..30)) {
            let mut x = vec![0.0];
            let mut y = vec![0.0];
            for (dx, dy) in &steps {
                x.push(x.last().unwrap() + dx);
                y.push(y.last().unwrap() + dy);
            }
            let p = Pchip::new(&x, &y).unwrap();
            let (lo, hi) = p.domain();
            let mut prev = p.eval(lo);
            for k in 1..=500 {
                let v = p.eval(lo + (hi - lo) * k as f64 / 500.0);
                prop_assert!(v >= prev - 1e-12);
                prev = v;
            }
        }
    }
}
