//! Periodic cubic spline interpolation for tabulated pulse shapes.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Cubic spline through `(x_i, y_i)` with periodic end conditions:
/// the curve and its first two derivatives match across the period seam.
///
/// Knots must be strictly increasing and span exactly one period, i.e. the
/// last knot is `x_0 + period` and carries the same value as the first.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    knots: Vec<f64>,  // n + 1 entries, last = first + period
    values: Vec<f64>, // n + 1 entries, last = first
    second: Vec<f64>, // second derivatives at the n + 1 knots
    period: f64,
}

impl PeriodicSpline {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = knots.len().saturating_sub(1);
        if n < 3 {
            return Err(Error::Domain(
                "periodic spline needs at least 4 knots".into(),
            ));
        }
        if knots.len() != values.len() {
            return Err(Error::Domain("knot/value length mismatch".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("spline knots must be strictly increasing".into()));
        }
        let period = knots[n] - knots[0];
        let seam = (values[n] - values[0]).abs();
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        if seam > 1e-9 * scale {
            return Err(Error::Domain(format!(
                "periodic spline endpoint values differ by {seam:e}"
            )));
        }

        // Cyclic tridiagonal system for the second derivatives at knots 0..n-1.
        let h: Vec<f64> = (0..n).map(|i| knots[i + 1] - knots[i]).collect();
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for i in 0..n {
            let im1 = (i + n - 1) % n;
            let ip1 = (i + 1) % n;
            let hm = h[im1];
            let hi = h[i];
            a[(i, im1)] += hm / 6.0;
            a[(i, i)] += (hm + hi) / 3.0;
            a[(i, ip1)] += hi / 6.0;
            let ym1 = values[if i == 0 { n - 1 } else { i - 1 }];
            let yp1 = values[i + 1];
            rhs[i] = (yp1 - values[i]) / hi - (values[i] - ym1) / hm;
        }
        let second_cyc = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Internal("singular spline system".into()))?;
        let mut second: Vec<f64> = second_cyc.iter().copied().collect();
        second.push(second[0]);

        Ok(Self {
            knots,
            values,
            second,
            period,
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    fn segment(&self, x: f64) -> (usize, f64) {
        // Reduce into [knots[0], knots[0] + period).
        let mut u = (x - self.knots[0]).rem_euclid(self.period) + self.knots[0];
        if u >= *self.knots.last().unwrap() {
            u = self.knots[0];
        }
        let i = match self
            .knots
            .binary_search_by(|k| k.partial_cmp(&u).unwrap())
        {
            Ok(i) => i.min(self.knots.len() - 2),
            Err(i) => i - 1,
        };
        (i, u)
    }

    /// Spline value at `x` (periodically extended).
    pub fn value(&self, x: f64) -> f64 {
        let (i, u) = self.segment(x);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - u) / h;
        let b = (u - self.knots[i]) / h;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h
                / 6.0
    }

    /// First derivative at `x`.
    pub fn derivative(&self, x: f64) -> f64 {
        let (i, u) = self.segment(x);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - u) / h;
        let b = (u - self.knots[i]) / h;
        (self.values[i + 1] - self.values[i]) / h
            + ((3.0 * b * b - 1.0) * self.second[i + 1] - (3.0 * a * a - 1.0) * self.second[i]) * h
                / 6.0
    }

    /// Second derivative at `x`.
    pub fn second_derivative(&self, x: f64) -> f64 {
        let (i, u) = self.segment(x);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - u) / h;
        let b = (u - self.knots[i]) / h;
        a * self.second[i] + b * self.second[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine_spline(n: usize) -> PeriodicSpline {
        let tau = std::f64::consts::TAU;
        let knots: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let values: Vec<f64> = knots.iter().map(|t| (tau * t).cos()).collect();
        PeriodicSpline::new(knots, values).unwrap()
    }

    #[test]
    fn interpolates_cosine() {
        let s = cosine_spline(64);
        let tau = std::f64::consts::TAU;
        for i in 0..200 {
            let t = i as f64 * 0.005;
            assert!((s.value(t) - (tau * t).cos()).abs() < 1e-5);
        }
    }

    #[test]
    fn derivatives_match_cosine() {
        let s = cosine_spline(128);
        let tau = std::f64::consts::TAU;
        let t = 0.3;
        assert!((s.derivative(t) + tau * (tau * t).sin()).abs() < 1e-3);
        assert!((s.second_derivative(t) + tau * tau * (tau * t).cos()).abs() < 2e-2);
    }

    #[test]
    fn periodic_extension() {
        let s = cosine_spline(32);
        assert!((s.value(0.25) - s.value(7.25)).abs() < 1e-12);
        assert!((s.value(-0.75) - s.value(0.25)).abs() < 1e-12);
    }

    #[test]
    fn rejects_seam_mismatch() {
        let knots = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let values = vec![0.0, 1.0, 0.0, -1.0, 0.5];
        assert!(PeriodicSpline::new(knots, values).is_err());
    }
}
