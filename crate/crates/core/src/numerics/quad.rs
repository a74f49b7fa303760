//! Composite quadrature rules used for inner products and kernel transforms.

use crate::error::{Error, Result};

/// Composite Simpson rule with `panels` panels on `[a, b]`.
///
/// `panels` is rounded up to the next even number.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    acc * h / 3.0
}

/// Simpson rule with one refinement check: evaluates at `panels` and
/// `2*panels` and errors out if the two estimates disagree beyond `tol`
/// relative to the integral scale.
pub fn simpson_checked<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    tol: f64,
) -> Result<f64> {
    let coarse = simpson(&f, a, b, panels);
    let fine = simpson(&f, a, b, 2 * panels);
    let scale = fine.abs().max(coarse.abs()).max(1e-300);
    let rel = (fine - coarse).abs() / scale;
    if rel > tol {
        return Err(Error::Accuracy {
            what: format!("simpson quadrature on [{a:e}, {b:e}] did not converge"),
            achieved: rel,
            requested: tol,
        });
    }
    Ok(fine)
}

/// Trapezoid rule over uniformly sampled values with step `dx`.
pub fn trapezoid_uniform(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            dx * (0.5 * (values[0] + values[n - 1]) + inner)
        }
    }
}
