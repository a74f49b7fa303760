//! Periodic conductivity modulation `V(t) = V0 + (Vmax - V0) f(t)` and the
//! induced wavenumber modulation `k_n(t) = k_n^0 (1 + eps_n f(t))`.
//!
//! The pulse `f` is periodic, non-negative, vanishes at `t = 0` and peaks at
//! `f(tau_e) = 1`. Two analytic families are built in; arbitrary tabulated
//! pulses come in through a periodic cubic spline. Derivatives are always
//! analytic (or spline-exact): differencing the drive numerically would leak
//! noise into experiments designed to measure noise.

use crate::error::{Error, Result};
use crate::numerics::spline::PeriodicSpline;
use crate::spectrum::{CavityConfig, WavenumberTable};
use std::f64::consts::{PI, TAU};

/// Pulse family.
#[derive(Debug, Clone)]
pub enum PulseShape {
    /// `f(t) = (1 - cos(Omega t)) / 2`, a pure tone peaking at `T/2`.
    RaisedCosine,
    /// Fast rise on the scale `tau_e`, exponential relaxation with constant
    /// `tau_r`, tapered so the pulse returns to zero smoothly at the period
    /// boundary.
    RiseRelax { tau_r: f64 },
    /// Tabulated samples over exactly one period, spline-interpolated.
    Tabulated(PeriodicSpline),
}

/// A periodic drive pulse with period `T` and excitation time `tau_e`.
#[derive(Debug, Clone)]
pub struct DriveProfile {
    pub period: f64,
    pub tau_e: f64,
    pub shape: PulseShape,
}

/// Tolerances and grid sizes for drive-side numerics.
#[derive(Debug, Clone, Copy)]
pub struct DriveSettings {
    /// Samples per period for Fourier projection and means.
    pub fourier_grid: usize,
    /// Guard rail on |epsilon|; not physics, just the linearization regime.
    pub perturbative_bound: f64,
}

impl Default for DriveSettings {
    fn default() -> Self {
        Self {
            fourier_grid: 8192,
            perturbative_bound: 0.05,
        }
    }
}

impl DriveProfile {
    pub fn raised_cosine(period: f64) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::Domain("drive period must be > 0".into()));
        }
        Ok(Self {
            period,
            tau_e: 0.5 * period,
            shape: PulseShape::RaisedCosine,
        })
    }

    pub fn rise_relax(period: f64, tau_e: f64, tau_r: f64) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::Domain("drive period must be > 0".into()));
        }
        if !(tau_e > 0.0 && tau_e < period) {
            return Err(Error::Domain(format!(
                "excitation time must lie inside the period (tau_e = {tau_e}, T = {period})"
            )));
        }
        if !(tau_r > 0.0) {
            return Err(Error::Domain("relaxation constant must be > 0".into()));
        }
        Ok(Self {
            period,
            tau_e,
            shape: PulseShape::RiseRelax { tau_r },
        })
    }

    /// Build from samples `(t_i, f_i)` covering exactly one period:
    /// `t` strictly increasing, `t_0 = 0`, `t_last = T`, `f_0 = f_last`.
    pub fn from_samples(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.first() != Some(&0.0) {
            return Err(Error::Domain("tabulated pulse must start at t = 0".into()));
        }
        if values.iter().any(|&v| v < -1e-9) {
            return Err(Error::Domain("tabulated pulse must be non-negative".into()));
        }
        if values[0].abs() > 1e-9 {
            return Err(Error::Domain("tabulated pulse must vanish at t = 0".into()));
        }
        let (imax, fmax) = values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(ib, b), (i, &v)| {
                if v > b {
                    (i, v)
                } else {
                    (ib, b)
                }
            });
        if (fmax - 1.0).abs() > 1e-6 {
            return Err(Error::Domain(format!(
                "tabulated pulse must peak at 1 (found {fmax})"
            )));
        }
        let tau_e = times[imax];
        let period = *times.last().unwrap();
        let spline = PeriodicSpline::new(times, values)?;
        Ok(Self {
            period,
            tau_e,
            shape: PulseShape::Tabulated(spline),
        })
    }

    /// Whether `tau_e << T` holds in the loose sense the hardware assumes.
    /// Advisory only.
    pub fn is_fast_excitation(&self) -> bool {
        self.tau_e <= 0.55 * self.period
    }

    fn reduce(&self, t: f64) -> f64 {
        t.rem_euclid(self.period)
    }

    /// Pulse value `f(t)`, periodically extended.
    pub fn value(&self, t: f64) -> f64 {
        let t = self.reduce(t);
        match &self.shape {
            PulseShape::RaisedCosine => 0.5 * (1.0 - (TAU * t / self.period).cos()),
            PulseShape::RiseRelax { tau_r } => {
                if t <= self.tau_e {
                    let u = 0.5 * PI * t / self.tau_e;
                    let s = u.sin();
                    s * s
                } else {
                    let s = t - self.tau_e;
                    let tail = self.period - self.tau_e;
                    let v = 0.5 * PI * s / tail;
                    let c = v.cos();
                    (-s / tau_r).exp() * c * c
                }
            }
            PulseShape::Tabulated(sp) => sp.value(t),
        }
    }

    /// Analytic `df/dt`.
    pub fn derivative(&self, t: f64) -> f64 {
        let t = self.reduce(t);
        match &self.shape {
            PulseShape::RaisedCosine => {
                let omega = TAU / self.period;
                0.5 * omega * (omega * t).sin()
            }
            PulseShape::RiseRelax { tau_r } => {
                if t <= self.tau_e {
                    let du = 0.5 * PI / self.tau_e;
                    du * (2.0 * du * t).sin()
                } else {
                    let s = t - self.tau_e;
                    let tail = self.period - self.tau_e;
                    let v = 0.5 * PI * s / tail;
                    let e = (-s / tau_r).exp();
                    let c = v.cos();
                    -e * (c * c / tau_r + 0.5 * PI / tail * (2.0 * v).sin())
                }
            }
            PulseShape::Tabulated(sp) => sp.derivative(t),
        }
    }

    /// Analytic `d2f/dt2`.
    pub fn second_derivative(&self, t: f64) -> f64 {
        let t = self.reduce(t);
        match &self.shape {
            PulseShape::RaisedCosine => {
                let omega = TAU / self.period;
                0.5 * omega * omega * (omega * t).cos()
            }
            PulseShape::RiseRelax { tau_r } => {
                if t <= self.tau_e {
                    let du = 0.5 * PI / self.tau_e;
                    2.0 * du * du * (2.0 * du * t).cos()
                } else {
                    let s = t - self.tau_e;
                    let tail = self.period - self.tau_e;
                    let v = 0.5 * PI * s / tail;
                    let e = (-s / tau_r).exp();
                    let c = v.cos();
                    e * (c * c / (tau_r * tau_r) + PI / (tail * tau_r) * (2.0 * v).sin()
                        - 0.5 * PI * PI / (tail * tail) * (2.0 * v).cos())
                }
            }
            PulseShape::Tabulated(sp) => sp.second_derivative(t),
        }
    }

    /// Grid mean of `f` over one period (the Fourier zero mode `f_0`).
    pub fn mean(&self, settings: &DriveSettings) -> f64 {
        let n = settings.fourier_grid;
        let dt = self.period / n as f64;
        (0..n).map(|i| self.value(i as f64 * dt)).sum::<f64>() / n as f64
    }

    /// Fourier coefficients of `f = f0 + sum_j f_j cos(j Omega t + c_j)`.
    pub fn fourier_coefficients(&self, harmonics: usize) -> Result<FourierSeries> {
        self.fourier_coefficients_with(harmonics, &DriveSettings::default())
    }

    pub fn fourier_coefficients_with(
        &self,
        harmonics: usize,
        settings: &DriveSettings,
    ) -> Result<FourierSeries> {
        if harmonics < 1 {
            return Err(Error::Domain("harmonic count must be >= 1".into()));
        }
        fourier_of_fn(|t| self.value(t), self.period, harmonics, settings.fourier_grid)
    }
}

/// One cosine harmonic: `amplitude * cos(index * Omega * t + phase)`,
/// amplitude >= 0, phase in (-pi, pi].
#[derive(Debug, Clone, Copy)]
pub struct Harmonic {
    pub index: usize,
    pub amplitude: f64,
    pub phase: f64,
}

/// Truncated Fourier series of a periodic pulse.
#[derive(Debug, Clone)]
pub struct FourierSeries {
    pub mean: f64,
    pub harmonics: Vec<Harmonic>,
}

impl FourierSeries {
    /// `f0^2 + (1/2) sum f_j^2`, the series side of the Parseval identity.
    pub fn power(&self) -> f64 {
        self.mean * self.mean
            + 0.5
                * self
                    .harmonics
                    .iter()
                    .map(|h| h.amplitude * h.amplitude)
                    .sum::<f64>()
    }

    pub fn amplitude(&self, j: usize) -> f64 {
        self.harmonics
            .iter()
            .find(|h| h.index == j)
            .map_or(0.0, |h| h.amplitude)
    }

    /// Evaluate the truncated series at `t` for a fundamental `omega`.
    pub fn eval(&self, omega: f64, t: f64) -> f64 {
        self.mean
            + self
                .harmonics
                .iter()
                .map(|h| h.amplitude * (h.index as f64 * omega * t + h.phase).cos())
                .sum::<f64>()
    }
}

/// Dense-grid Fourier projection of an arbitrary periodic function. The
/// rectangle rule on a periodic integrand is spectrally accurate; `grid`
/// must stay above the Nyquist count for the requested harmonics.
pub fn fourier_of_fn<F: Fn(f64) -> f64>(
    f: F,
    period: f64,
    harmonics: usize,
    grid: usize,
) -> Result<FourierSeries> {
    if grid <= 2 * harmonics {
        return Err(Error::Accuracy {
            what: format!("fourier grid ({grid}) below Nyquist for {harmonics} harmonics"),
            achieved: grid as f64,
            requested: (2 * harmonics + 1) as f64,
        });
    }
    let n = grid;
    let dt = period / n as f64;
    let samples: Vec<f64> = (0..n).map(|i| f(i as f64 * dt)).collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut out = Vec::with_capacity(harmonics);
    for j in 1..=harmonics {
        let mut a = 0.0;
        let mut b = 0.0;
        for (i, &s) in samples.iter().enumerate() {
            let th = TAU * (j * i) as f64 / n as f64;
            a += s * th.cos();
            b += s * th.sin();
        }
        a *= 2.0 / n as f64;
        b *= 2.0 / n as f64;
        let amplitude = (a * a + b * b).sqrt();
        let mut phase = if amplitude > 1e-300 { (-b).atan2(a) } else { 0.0 };
        if phase <= -PI {
            phase = PI;
        }
        out.push(Harmonic {
            index: j,
            amplitude,
            phase,
        });
    }
    Ok(FourierSeries {
        mean,
        harmonics: out,
    })
}

/// Relative modulation amplitude of mode `m`:
/// `eps = (Vmax - V0) / (L k0^2 + V0 (1 + V0 L / 4))`,
/// the first-order response of the root equation to the slab strength.
#[derive(Debug, Clone, Copy)]
pub struct EpsilonResult {
    pub value: f64,
    /// Whether the regime `V0 L >> Vmax / V0 > 1` holds. A violation flags
    /// the perturbative treatment as suspect; it is not an error.
    pub validity_ok: bool,
}

pub fn epsilon_n(cavity: &CavityConfig, table: &WavenumberTable, m: usize) -> Result<EpsilonResult> {
    let rel = (table.potential - cavity.v0).abs() / cavity.v0.max(1e-300);
    if rel > 1e-12 {
        return Err(Error::Domain(format!(
            "epsilon requires a table solved at V0 = {} (table has {})",
            cavity.v0, table.potential
        )));
    }
    let kappa = table.entry(m)?.kappa;
    let v0 = cavity.v0_scaled();
    let vmax = cavity.v_max_scaled();
    let value = (vmax - v0) / (kappa * kappa + v0 * (1.0 + 0.25 * v0));
    let ratio = cavity.v_max / cavity.v0;
    let validity_ok = ratio <= 1.0 + 1e-12 || (ratio > 1.0 && v0 > 10.0 * ratio);
    Ok(EpsilonResult { value, validity_ok })
}

/// Static root, modulation amplitude, and renormalized wavenumber of one
/// driven mode; the bundle every dynamics module consumes.
#[derive(Debug, Clone, Copy)]
pub struct ModeModulation {
    pub mode: usize,
    /// Static root k^0 [1/m].
    pub k0: f64,
    /// Relative modulation amplitude (dimensionless).
    pub epsilon: f64,
    /// Renormalized wavenumber `k~ = k0 (1 + eps f0)` [1/m].
    pub k_tilde: f64,
    /// Drive mean `f0` used for the renormalization.
    pub f0: f64,
    /// Mode norm (Psi, Psi).
    pub norm: f64,
}

impl ModeModulation {
    pub fn build(
        cavity: &CavityConfig,
        table: &WavenumberTable,
        profile: &DriveProfile,
        m: usize,
    ) -> Result<Self> {
        Self::build_with(cavity, table, profile, m, &DriveSettings::default())
    }

    pub fn build_with(
        cavity: &CavityConfig,
        table: &WavenumberTable,
        profile: &DriveProfile,
        m: usize,
        settings: &DriveSettings,
    ) -> Result<Self> {
        let entry = table.entry(m)?;
        let eps = epsilon_n(cavity, table, m)?;
        if eps.value.abs() >= settings.perturbative_bound {
            return Err(Error::Domain(format!(
                "epsilon = {:e} exceeds the perturbative bound {:e}",
                eps.value, settings.perturbative_bound
            )));
        }
        let f0 = profile.mean(settings);
        Ok(Self {
            mode: m,
            k0: entry.wavenumber,
            epsilon: eps.value,
            k_tilde: entry.wavenumber * (1.0 + eps.value * f0),
            f0,
            norm: entry.norm,
        })
    }

    /// Construct directly from known values (tests, synthetic runs).
    pub fn from_parts(mode: usize, k0: f64, epsilon: f64, f0: f64, norm: f64) -> Self {
        Self {
            mode,
            k0,
            epsilon,
            k_tilde: k0 * (1.0 + epsilon * f0),
            f0,
            norm,
        }
    }
}

/// Instantaneous wavenumber `k(t) = k0 (1 + eps f(t))` [1/m].
pub fn instantaneous_wavenumber(modulation: &ModeModulation, profile: &DriveProfile, t: f64) -> f64 {
    modulation.k0 * (1.0 + modulation.epsilon * profile.value(t))
}

/// The centered form `k~ (1 + eps (f - f0))` the dynamics modules use.
pub fn instantaneous_wavenumber_centered(
    modulation: &ModeModulation,
    profile: &DriveProfile,
    t: f64,
) -> f64 {
    modulation.k_tilde * (1.0 + modulation.epsilon * (profile.value(t) - modulation.f0))
}

/// Slab strength at time `t`: `V(t) = V0 + (Vmax - V0) f(t)`.
pub fn potential_at(cavity: &CavityConfig, profile: &DriveProfile, t: f64) -> f64 {
    cavity.v0 + (cavity.v_max - cavity.v0) * profile.value(t)
}
