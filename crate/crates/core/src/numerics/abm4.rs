//! Fixed-step Adams-Bashforth-Moulton predictor-corrector (PECE, order 4).
//!
//! The scheme only ever evaluates the right-hand side on grid nodes, which is
//! what lets the stochastic integrator treat grid-sampled noise exactly and
//! lets the memory convolution reuse the stored state history. The first
//! three steps ramp up through lower-order Adams pairs.

use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

/// Scalar element of an integration state vector.
pub trait Element:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
}

impl Element for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl Element for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
}

const AB1: [f64; 1] = [1.0];
const AB2: [f64; 2] = [1.5, -0.5];
const AB3: [f64; 3] = [23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0];
const AB4: [f64; 4] = [55.0 / 24.0, -59.0 / 24.0, 37.0 / 24.0, -9.0 / 24.0];
// Leading coefficient applies to the predicted node i+1, the rest to i, i-1, ...
const AM1: [f64; 2] = [0.5, 0.5];
const AM2: [f64; 3] = [5.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0];
const AM3: [f64; 4] = [9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0];

/// Right-hand side evaluated at a grid node.
///
/// `step` is the node index (time = step * dt); `y` the state; `dydt` the
/// output slot. Implementations may consult their own history of accepted
/// states, which is exactly how the memory-kernel integrator plugs in.
pub trait Rhs<C: Element> {
    fn eval(&mut self, step: usize, y: &[C], dydt: &mut [C]);
}

impl<C: Element, F: FnMut(usize, &[C], &mut [C])> Rhs<C> for F {
    fn eval(&mut self, step: usize, y: &[C], dydt: &mut [C]) {
        self(step, y, dydt)
    }
}

/// The stepper. Owns scratch buffers and the ring of recent derivative
/// evaluations; the caller owns the state itself.
pub struct Abm4<C: Element> {
    dt: f64,
    dim: usize,
    // f-history, most recent first: f[0] = f_i, f[1] = f_{i-1}, ...
    history: Vec<Vec<C>>,
    predicted: Vec<C>,
    f_pred: Vec<C>,
    scratch: Vec<C>,
}

impl<C: Element> Abm4<C> {
    pub fn new(dt: f64, dim: usize) -> Self {
        Self {
            dt,
            dim,
            history: Vec::with_capacity(4),
            predicted: vec![C::zero(); dim],
            f_pred: vec![C::zero(); dim],
            scratch: vec![C::zero(); dim],
        }
    }

    fn weighted_sum(out: &mut [C], base: &[C], terms: &[(&[C], f64)], dt: f64) {
        for k in 0..out.len() {
            let mut acc = C::zero();
            for (vals, w) in terms {
                acc = acc + vals[k] * *w;
            }
            out[k] = base[k] + acc * dt;
        }
    }

    /// Advance one step: from accepted state `y` at node `step` to the
    /// returned state at node `step + 1` (written into `y`).
    ///
    /// PECE: predict with Adams-Bashforth, evaluate, correct with
    /// Adams-Moulton, evaluate again for the stored history.
    pub fn step<R: Rhs<C>>(&mut self, step: usize, y: &mut [C], rhs: &mut R) {
        debug_assert_eq!(y.len(), self.dim);
        if self.history.is_empty() {
            let mut f0 = vec![C::zero(); self.dim];
            rhs.eval(step, y, &mut f0);
            self.history.insert(0, f0);
        }

        let avail = self.history.len();
        let (ab, am): (&[f64], &[f64]) = match avail {
            1 => (&AB1, &AM1),
            2 => (&AB2, &AM2),
            _ => {
                if avail == 3 {
                    (&AB3, &AM3)
                } else {
                    (&AB4, &AM3)
                }
            }
        };

        // Predict.
        {
            let terms: Vec<(&[C], f64)> = ab
                .iter()
                .enumerate()
                .map(|(j, w)| (self.history[j].as_slice(), *w))
                .collect();
            Self::weighted_sum(&mut self.predicted, y, &terms, self.dt);
        }
        rhs.eval(step + 1, &self.predicted, &mut self.f_pred);

        // Correct (extra corrector sweeps during the self-starting step).
        let sweeps = if avail == 1 { 3 } else { 1 };
        for _ in 0..sweeps {
            {
                let mut terms: Vec<(&[C], f64)> = vec![(self.f_pred.as_slice(), am[0])];
                for (j, w) in am[1..].iter().enumerate() {
                    terms.push((self.history[j].as_slice(), *w));
                }
                Self::weighted_sum(&mut self.scratch, y, &terms, self.dt);
            }
            std::mem::swap(&mut self.scratch, &mut self.predicted);
            rhs.eval(step + 1, &self.predicted, &mut self.f_pred);
        }

        y.copy_from_slice(&self.predicted);
        // The final evaluation above is the stored history entry.
        let mut f_new = if self.history.len() >= 4 {
            self.history.pop().unwrap()
        } else {
            vec![C::zero(); self.dim]
        };
        f_new.copy_from_slice(&self.f_pred);
        self.history.insert(0, f_new);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_fourth_order() {
        // y' = -y, y(0) = 1; compare error at two step sizes.
        let err = |n: usize| {
            let dt = 1.0 / n as f64;
            let mut stepper = Abm4::<f64>::new(dt, 1);
            let mut y = [1.0];
            let mut rhs = |_: usize, y: &[f64], d: &mut [f64]| d[0] = -y[0];
            for i in 0..n {
                stepper.step(i, &mut y, &mut rhs);
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let e1 = err(100);
        let e2 = err(200);
        assert!(e1 / e2 > 12.0, "order too low: {e1:e} vs {e2:e}");
    }

    #[test]
    fn oscillator_phase_accuracy() {
        // y'' = -y over 10 periods at 160 steps/period.
        let omega = 1.0f64;
        let steps_per_period = 160;
        let periods = 10;
        let dt = std::f64::consts::TAU / omega / steps_per_period as f64;
        let n = steps_per_period * periods;
        let mut stepper = Abm4::<f64>::new(dt, 2);
        let mut y = [1.0, 0.0];
        let mut rhs = |_: usize, y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -y[0];
        };
        for i in 0..n {
            stepper.step(i, &mut y, &mut rhs);
        }
        let t = dt * n as f64;
        assert!((y[0] - t.cos()).abs() < 1e-5);
        assert!((y[1] + t.sin()).abs() < 1e-5);
    }
}
