//! Stationary dissipation and noise kernels of the slab's internal degrees
//! of freedom, built from a spectral density and a temperature.
//!
//! Kernel conventions (documented here once, used everywhere):
//!
//! ```text
//! Dtilde(s) = - Int_0^inf dw J(w) sin(w s)
//! Ntilde(s) = (1/2) Int_0^inf dw J(w) coth(w / 2T) cos(w s)
//! ```
//!
//! with `J >= 0` and a Gaussian cutoff `exp(-w^2 / Lambda^2)` folded into
//! `J`. The pair is normalized against each other: for the ohmic family the
//! memory force `Int_0^t Dtilde(t-s) P(s) ds` acts at high temperature as
//! `-Gamma(0) P + (pi/2) gamma Pdot`, i.e. a friction coefficient of
//! `(pi/2) gamma`, and the white-noise strength `Int Ntilde ds = pi gamma T`
//! satisfies the Einstein relation `strength = 2 T friction` exactly. The
//! relative factor between the two transforms is fixed by that relation;
//! scaling either one alone would silently break detailed balance.
//!
//! The Gaussian cutoff (rather than sharp or Drude) keeps every kernel
//! smooth in the lag, which the open-system assembly needs when it takes
//! two time derivatives of the memory term.

use crate::drive::DriveProfile;
use crate::error::{Error, Result};
use crate::numerics::quad::{simpson_checked, trapezoid_uniform};
use nalgebra::DMatrix;
use rustfft::{num_complex::Complex64 as FftComplex, FftPlanner};
use std::f64::consts::PI;

/// Spectral-density family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralFamily {
    /// `J = gamma w exp(-w^2/Lambda^2)`; friction proportional to velocity.
    Ohmic,
    /// `J = gamma w^p Lambda^(1-p) exp(-w^2/Lambda^2)`, `p >= 2`.
    Supraohmic { power: u32 },
}

/// Environment parameters in natural units (everything 1/m).
#[derive(Debug, Clone, Copy)]
pub struct EnvironmentSpec {
    pub family: SpectralFamily,
    /// Coupling strength gamma [1/m].
    pub coupling: f64,
    /// Ultraviolet cutoff Lambda [1/m].
    pub cutoff: f64,
    /// k_B T in natural units [1/m].
    pub temperature: f64,
}

impl EnvironmentSpec {
    pub fn new(family: SpectralFamily, coupling: f64, cutoff: f64, temperature: f64) -> Result<Self> {
        if !(coupling >= 0.0) {
            return Err(Error::Domain(format!("coupling must be >= 0, got {coupling}")));
        }
        if !(cutoff > 0.0) {
            return Err(Error::Domain(format!("cutoff must be > 0, got {cutoff}")));
        }
        if !(temperature >= 0.0) {
            return Err(Error::Domain(format!(
                "temperature must be >= 0, got {temperature}"
            )));
        }
        if let SpectralFamily::Supraohmic { power } = family {
            if power < 2 {
                return Err(Error::Domain(format!(
                    "supraohmic power must be >= 2, got {power}"
                )));
            }
        }
        Ok(Self {
            family,
            coupling,
            cutoff,
            temperature,
        })
    }

    /// Quadrature support: beyond this frequency the cutoff has killed J.
    fn omega_max(&self) -> f64 {
        6.5 * self.cutoff
    }

    /// Lag beyond which the kernels are numerically dead.
    pub fn lag_support(&self) -> f64 {
        // Gaussian lag decay exp(-Lambda^2 s^2 / 4) plus the thermal tail
        // exp(-2 pi T s) of the coth part.
        let gauss = 45.0 / self.cutoff;
        if self.temperature > 0.0 {
            gauss.max(45.0 / (2.0 * PI * self.temperature).max(self.cutoff / 45.0))
        } else {
            gauss
        }
    }
}

/// `coth(x)` with the small- and large-argument branches made explicit.
fn coth(x: f64) -> f64 {
    if x > 20.0 {
        1.0
    } else if x < 1e-4 {
        1.0 / x + x / 3.0
    } else {
        1.0 / x.tanh()
    }
}

/// Spectral density `J(omega)`; zero for `omega <= 0`.
pub fn spectral_density(spec: &EnvironmentSpec, omega: f64) -> f64 {
    if omega <= 0.0 {
        return 0.0;
    }
    let cut = (-omega * omega / (spec.cutoff * spec.cutoff)).exp();
    match spec.family {
        SpectralFamily::Ohmic => spec.coupling * omega * cut,
        SpectralFamily::Supraohmic { power } => {
            spec.coupling * omega.powi(power as i32) * spec.cutoff.powi(1 - power as i32) * cut
        }
    }
}

/// `J(omega) coth(omega / 2T)` continued to `omega = 0` by its limit.
fn noise_integrand(spec: &EnvironmentSpec, omega: f64) -> f64 {
    if omega <= 0.0 {
        // Ohmic: J coth -> 2 gamma T; anything steeper vanishes.
        return match spec.family {
            SpectralFamily::Ohmic => 2.0 * spec.coupling * spec.temperature,
            SpectralFamily::Supraohmic { .. } => 0.0,
        };
    }
    if spec.temperature == 0.0 {
        spectral_density(spec, omega)
    } else {
        spectral_density(spec, omega) * coth(omega / (2.0 * spec.temperature))
    }
}

fn transform_panels(spec: &EnvironmentSpec, s: f64) -> usize {
    // Resolve the oscillation of sin/cos(w s) across [0, omega_max] and the
    // coth knee at w ~ T.
    let oscillation = (spec.omega_max() * s.abs() / PI).ceil() as usize * 16;
    let knee = if spec.temperature > 0.0 && spec.temperature < spec.cutoff {
        (spec.omega_max() / spec.temperature).ceil() as usize * 4
    } else {
        0
    };
    3000.max(oscillation).max(knee).min(400_000)
}

/// Stationary dissipation kernel `Dtilde(s)`, odd in the lag.
pub fn dissipation_kernel(spec: &EnvironmentSpec, s: f64) -> Result<f64> {
    if s == 0.0 {
        return Ok(0.0);
    }
    let sign = if s < 0.0 { -1.0 } else { 1.0 };
    let s = s.abs();
    let panels = transform_panels(spec, s);
    let v = simpson_checked(
        |w| -spectral_density(spec, w) * (w * s).sin(),
        0.0,
        spec.omega_max(),
        panels,
        1e-8,
    )?;
    Ok(sign * v)
}

/// Stationary noise kernel `Ntilde(s)`, even in the lag. At zero temperature
/// the thermal factor degenerates to 1. Families with an infrared-divergent
/// `J coth` (power below 1; not constructible here) are rejected.
pub fn noise_kernel(spec: &EnvironmentSpec, s: f64) -> Result<f64> {
    let s = s.abs();
    let panels = transform_panels(spec, s);
    simpson_checked(
        |w| 0.5 * noise_integrand(spec, w) * (w * s).cos(),
        0.0,
        spec.omega_max(),
        panels,
        1e-8,
    )
}

/// Kernels (and the lag derivatives of `Dtilde` the mode assembly needs)
/// discretized on a uniform lag grid `s = 0, h, ..., (count-1) h`.
///
/// Everything is evaluated from one shared frequency grid so a table build
/// costs one pass of `J`, not one quadrature per lag.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub lag_step: f64,
    /// `Dtilde(s_i)`.
    pub dissipation: Vec<f64>,
    /// `dDtilde/ds (s_i)`.
    pub dissipation_d1: Vec<f64>,
    /// `d2Dtilde/ds2 (s_i)`.
    pub dissipation_d2: Vec<f64>,
    /// `Ntilde(s_i)`.
    pub noise: Vec<f64>,
    /// `Int_0^inf Dtilde(s) ds`: the strength of the delta-like piece the
    /// memory exerts on P in the local limit (a frequency renormalization).
    pub local_part: f64,
    /// `-Int_0^inf s Dtilde(s) ds`: the friction coefficient multiplying
    /// Pdot in the local limit.
    pub friction: f64,
}

impl KernelTable {
    pub fn build(spec: &EnvironmentSpec, lag_step: f64, count: usize) -> Result<Self> {
        if !(lag_step > 0.0) || count < 2 {
            return Err(Error::Config(format!(
                "kernel table needs lag_step > 0 and count >= 2 (got {lag_step}, {count})"
            )));
        }
        let s_max = lag_step * (count - 1) as f64;
        let panels = transform_panels(spec, s_max);
        let n = panels.next_multiple_of(2);
        let wmax = spec.omega_max();
        let h = wmax / n as f64;

        // Simpson weights folded into the frequency samples of J.
        let mut w_j = Vec::with_capacity(n + 1);
        let mut w_jn = Vec::with_capacity(n + 1);
        let mut omegas = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let w = i as f64 * h;
            let simpson_w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            } * h
                / 3.0;
            omegas.push(w);
            w_j.push(simpson_w * spectral_density(spec, w));
            w_jn.push(simpson_w * 0.5 * noise_integrand(spec, w));
        }

        let mut dissipation = Vec::with_capacity(count);
        let mut dissipation_d1 = Vec::with_capacity(count);
        let mut dissipation_d2 = Vec::with_capacity(count);
        let mut noise = Vec::with_capacity(count);
        for i in 0..count {
            let s = i as f64 * lag_step;
            let (mut d0, mut d1, mut d2, mut nn) = (0.0, 0.0, 0.0, 0.0);
            for (k, &w) in omegas.iter().enumerate() {
                let (sin_ws, cos_ws) = (w * s).sin_cos();
                d0 -= w_j[k] * sin_ws;
                d1 -= w_j[k] * w * cos_ws;
                d2 += w_j[k] * w * w * sin_ws;
                nn += w_jn[k] * cos_ws;
            }
            dissipation.push(d0);
            dissipation_d1.push(d1);
            dissipation_d2.push(d2);
            noise.push(nn);
        }
        dissipation[0] = 0.0; // odd kernel, exactly

        // Local-limit coefficients straight from the frequency integrals:
        // Int_0^inf Dtilde ds = -Int J/w dw, and the friction from the lag
        // first moment of the tabulated kernel.
        let local_part = -simpson_checked(
            |w| {
                if w == 0.0 {
                    match spec.family {
                        SpectralFamily::Ohmic => spec.coupling,
                        SpectralFamily::Supraohmic { .. } => 0.0,
                    }
                } else {
                    spectral_density(spec, w) / w
                }
            },
            0.0,
            wmax,
            4000,
            1e-8,
        )?;
        let moment: Vec<f64> = dissipation
            .iter()
            .enumerate()
            .map(|(i, d)| -(i as f64 * lag_step) * d)
            .collect();
        let friction = trapezoid_uniform(&moment, lag_step);

        Ok(Self {
            lag_step,
            dissipation,
            dissipation_d1,
            dissipation_d2,
            noise,
            local_part,
            friction,
        })
    }

    pub fn len(&self) -> usize {
        self.dissipation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dissipation.is_empty()
    }

    pub fn s_max(&self) -> f64 {
        self.lag_step * (self.len() - 1) as f64
    }

    /// Smallest/largest eigenvalue ratio of the circulant extension of the
    /// sampled noise kernel; the spectral positive-semidefiniteness check.
    pub fn noise_spectrum_min_ratio(&self) -> f64 {
        let n = self.noise.len();
        let m = 2 * (n - 1);
        let mut buf: Vec<FftComplex> = (0..m)
            .map(|k| {
                let lag = k.min(m - k);
                FftComplex::new(self.noise[lag], 0.0)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for c in &buf {
            lo = lo.min(c.re);
            hi = hi.max(c.re);
        }
        lo / hi.max(1e-300)
    }
}

/// Time profile of the field-environment coupling `lambda(t)`.
#[derive(Debug, Clone)]
pub enum CouplingSchedule {
    Constant(f64),
    /// `lambda(t) = base (1 + depth f(t))`, tied to the drive pulse.
    Modulated {
        base: f64,
        depth: f64,
        profile: DriveProfile,
    },
}

impl CouplingSchedule {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Self::Constant(l) => *l,
            Self::Modulated { base, depth, profile } => base * (1.0 + depth * profile.value(t)),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Self::Constant(_) => 0.0,
            Self::Modulated { base, depth, profile } => base * depth * profile.derivative(t),
        }
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        match self {
            Self::Constant(_) => 0.0,
            Self::Modulated { base, depth, profile } => {
                base * depth * profile.second_derivative(t)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant(_))
    }
}

/// Full two-time kernels `D(t,t') = lambda(t) lambda(t') Dtilde(t-t')` and
/// likewise for the noise, on a uniform time grid. The noise matrix is
/// symmetrized and eigenvalue-floored at zero.
#[derive(Debug, Clone)]
pub struct FullKernels {
    pub dissipation: DMatrix<f64>,
    pub noise: DMatrix<f64>,
    /// `|most negative eigenvalue| / spectral radius` removed by the floor.
    pub clipped_fraction: f64,
}

pub fn assemble_full_kernels(
    spec: &EnvironmentSpec,
    schedule: &CouplingSchedule,
    dt: f64,
    points: usize,
) -> Result<FullKernels> {
    let table = KernelTable::build(spec, dt, points)?;
    let lambda: Vec<f64> = (0..points).map(|i| schedule.value(i as f64 * dt)).collect();

    let dissipation = DMatrix::from_fn(points, points, |i, j| {
        let lag = i as isize - j as isize;
        let sign = if lag < 0 { -1.0 } else { 1.0 };
        lambda[i] * lambda[j] * sign * table.dissipation[lag.unsigned_abs()]
    });

    let raw_noise = DMatrix::from_fn(points, points, |i, j| {
        lambda[i] * lambda[j] * table.noise[i.abs_diff(j)]
    });
    // Already symmetric by construction; symmetrize anyway to kill roundoff.
    let sym = 0.5 * (&raw_noise + raw_noise.transpose());
    let eig = nalgebra::SymmetricEigen::new(sym);
    let radius = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    let most_negative = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.min(l));
    let clipped_fraction = if radius > 0.0 {
        (-most_negative).max(0.0) / radius
    } else {
        0.0
    };
    if clipped_fraction > 1e-6 {
        return Err(Error::Accuracy {
            what: "noise-kernel grid too coarse: PSD floor removed real weight".into(),
            achieved: clipped_fraction,
            requested: 1e-6,
        });
    }
    let floored: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let mut noise = DMatrix::zeros(points, points);
    for (k, &l) in floored.iter().enumerate() {
        let col = eig.eigenvectors.column(k);
        noise += l * &col * col.transpose();
    }
    let noise = 0.5 * (&noise + noise.transpose());

    Ok(FullKernels {
        dissipation,
        noise,
        clipped_fraction,
    })
}

/// Outcome of the classical fluctuation-dissipation comparison.
#[derive(Debug, Clone, Copy)]
pub struct EinsteinCheck {
    /// `Int_-inf^inf Ntilde(s) ds`.
    pub noise_strength: f64,
    /// `-Int_0^inf s Dtilde(s) ds`.
    pub friction: f64,
    /// `|strength - 2 T friction| / (2 T friction)`.
    pub residual: f64,
    /// Whether the temperature dominates the cutoff (classical regime).
    pub classical_regime: bool,
}

/// Compare the white-noise strength of `Ntilde` against `2 T` times the
/// friction coefficient extracted from `Dtilde`'s action on a linear test
/// function. The literal lag integral of the odd dissipation kernel would
/// vanish; the strength-versus-friction form is the meaningful statement.
pub fn check_einstein_relation(spec: &EnvironmentSpec) -> Result<EinsteinCheck> {
    if spec.temperature <= 0.0 || spec.coupling == 0.0 {
        // Both sides vanish; report a zero residual.
        return Ok(EinsteinCheck {
            noise_strength: 0.0,
            friction: 0.0,
            residual: 0.0,
            classical_regime: false,
        });
    }
    let s_max = spec.lag_support();
    let count = 4001;
    let h = s_max / (count - 1) as f64;
    let table = KernelTable::build(spec, h, count)?;
    let noise_strength = 2.0 * trapezoid_uniform(&table.noise, h);
    let friction = table.friction;
    let reference = 2.0 * spec.temperature * friction;
    let residual = if reference != 0.0 {
        ((noise_strength - reference) / reference).abs()
    } else {
        noise_strength.abs()
    };
    Ok(EinsteinCheck {
        noise_strength,
        friction,
        residual,
        classical_regime: spec.temperature >= 2.0 * spec.cutoff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ohmic(gamma: f64, cutoff: f64, t: f64) -> EnvironmentSpec {
        EnvironmentSpec::new(SpectralFamily::Ohmic, gamma, cutoff, t).unwrap()
    }

    #[test]
    fn spectral_density_zero_at_origin() {
        let spec = ohmic(2.0, 5.0, 1.0);
        assert_eq!(spectral_density(&spec, 0.0), 0.0);
        let sup = EnvironmentSpec::new(SpectralFamily::Supraohmic { power: 3 }, 2.0, 5.0, 1.0)
            .unwrap();
        assert_eq!(spectral_density(&sup, 0.0), 0.0);
    }

    #[test]
    fn ohmic_small_frequency_slope() {
        let spec = ohmic(2.0, 5.0, 1.0);
        let w = 1e-7;
        assert_relative_eq!(spectral_density(&spec, w) / w, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn supraohmic_at_cutoff() {
        let spec =
            EnvironmentSpec::new(SpectralFamily::Supraohmic { power: 3 }, 2.0, 5.0, 1.0).unwrap();
        assert_relative_eq!(
            spectral_density(&spec, 5.0),
            2.0 * 5.0 * (-1.0f64).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn supraohmic_power_guard() {
        assert!(EnvironmentSpec::new(SpectralFamily::Supraohmic { power: 1 }, 1.0, 1.0, 1.0)
            .is_err());
    }

    #[test]
    fn dissipation_kernel_zero_lag_and_odd() {
        let spec = ohmic(1.5, 4.0, 0.0);
        assert_eq!(dissipation_kernel(&spec, 0.0).unwrap(), 0.0);
        let d = dissipation_kernel(&spec, 0.3).unwrap();
        assert_relative_eq!(dissipation_kernel(&spec, -0.3).unwrap(), -d);
    }

    #[test]
    fn ohmic_dissipation_matches_closed_form() {
        // Gaussian-cutoff ohmic has the exact transform
        // Dtilde(s) = -gamma (sqrt(pi)/4) Lambda^3 s exp(-Lambda^2 s^2/4).
        let gamma = 0.7;
        let cutoff = 3.0;
        let spec = ohmic(gamma, cutoff, 0.0);
        for &s in &[0.05, 0.2, 0.5, 1.0] {
            let exact = -gamma * PI.sqrt() / 4.0 * cutoff.powi(3) * s
                * (-cutoff * cutoff * s * s / 4.0).exp();
            assert_relative_eq!(
                dissipation_kernel(&spec, s).unwrap(),
                exact,
                max_relative = 1e-7,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn noise_kernel_even() {
        let spec = ohmic(1.0, 4.0, 10.0);
        let n = noise_kernel(&spec, 0.4).unwrap();
        assert_eq!(noise_kernel(&spec, -0.4).unwrap(), n);
    }

    #[test]
    fn kernel_table_matches_scalar_kernels() {
        let spec = ohmic(0.8, 5.0, 3.0);
        let table = KernelTable::build(&spec, 0.02, 400).unwrap();
        for &i in &[1usize, 50, 200, 399] {
            let s = i as f64 * 0.02;
            assert_relative_eq!(
                table.dissipation[i],
                dissipation_kernel(&spec, s).unwrap(),
                max_relative = 1e-6,
                epsilon = 1e-10
            );
            assert_relative_eq!(
                table.noise[i],
                noise_kernel(&spec, s).unwrap(),
                max_relative = 1e-6,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn ohmic_friction_is_half_pi_gamma() {
        let gamma = 1.3;
        let spec = ohmic(gamma, 6.0, 0.0);
        let table = KernelTable::build(&spec, 45.0 / 6.0 / 4000.0, 4001).unwrap();
        assert_relative_eq!(table.friction, 0.5 * PI * gamma, max_relative = 1e-6);
    }

    #[test]
    fn einstein_relation_ohmic() {
        let spec = ohmic(0.5, 4.0, 40.0);
        let check = check_einstein_relation(&spec).unwrap();
        assert!(check.classical_regime);
        assert!(check.residual < 0.02, "residual = {}", check.residual);
        // linearity in T
        let spec2 = ohmic(0.5, 4.0, 80.0);
        let check2 = check_einstein_relation(&spec2).unwrap();
        assert_relative_eq!(
            check2.noise_strength,
            2.0 * check.noise_strength,
            max_relative = 1e-4
        );
        assert!(check2.residual < 0.02);
    }

    #[test]
    fn einstein_relation_decoupled() {
        let spec = ohmic(0.0, 4.0, 10.0);
        let check = check_einstein_relation(&spec).unwrap();
        assert_eq!(check.noise_strength, 0.0);
        assert_eq!(check.friction, 0.0);
    }

    #[test]
    fn full_kernels_constant_coupling_stationary() {
        let spec = ohmic(0.4, 8.0, 20.0);
        let lambda = 0.6;
        let full =
            assemble_full_kernels(&spec, &CouplingSchedule::Constant(lambda), 0.02, 64).unwrap();
        let table = KernelTable::build(&spec, 0.02, 64).unwrap();
        for i in 0..64 {
            for j in 0..64 {
                let lag = i as isize - j as isize;
                let sign = if lag < 0 { -1.0 } else { 1.0 };
                let expect = lambda * lambda * sign * table.dissipation[lag.unsigned_abs()];
                assert_relative_eq!(full.dissipation[(i, j)], expect, epsilon = 1e-12);
            }
        }
        // noise matrix symmetric exactly
        assert_eq!(full.noise, full.noise.transpose());
        assert!(full.clipped_fraction <= 1e-6);
    }

    #[test]
    fn full_kernels_zero_coupling_rows() {
        // lambda(t) = 0 on part of the grid zeroes those rows and columns.
        let spec = ohmic(0.4, 8.0, 20.0);
        let profile = DriveProfile::raised_cosine(1.0).unwrap();
        let schedule = CouplingSchedule::Modulated {
            base: 0.0,
            depth: 1.0,
            profile,
        };
        let full = assemble_full_kernels(&spec, &schedule, 0.02, 32).unwrap();
        assert!(full.dissipation.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn noise_spectrum_nonnegative() {
        let spec = ohmic(1.0, 5.0, 25.0);
        let table = KernelTable::build(&spec, 0.01, 512).unwrap();
        assert!(table.noise_spectrum_min_ratio() > -1e-10);
    }
}
