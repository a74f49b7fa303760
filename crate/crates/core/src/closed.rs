//! Dissipation-free dynamics: the coupled driven-mode system to first order
//! in the modulation amplitude, the decoupled resonant-mode oscillator, and
//! photon-number bookkeeping.
//!
//! Mode amplitudes start from vacuum-normalized initial data
//! `P_n(0) = delta_ns / sqrt(2 w_s norm_s)`, `Pdot_n(0) = -i w_s P_n(0)`,
//! chosen so the occupancy below reads exactly zero at t = 0. Driving the
//! modulation at `Omega = 2 k~` amplifies the resonant mode exponentially.

use crate::drive::{DriveProfile, ModeModulation};
use crate::error::{Error, Result};
use crate::numerics::abm4::Abm4;
use crate::numerics::regression::fit_line;
use crate::spectrum::{coupling_a, WavenumberTable};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Time-dependent squared frequency of a driven mode, first order in eps:
/// `k~^2 + 2 eps (k0)^2 (f - f0)`.
///
/// Every dynamics path in the crate evaluates the local drive through this
/// one function; the open-system module reduces to the closed one exactly
/// (bitwise) when the environment is switched off.
pub fn local_omega_sq(modulation: &ModeModulation, f_value: f64) -> f64 {
    modulation.k_tilde * modulation.k_tilde
        + 2.0 * modulation.epsilon
            * modulation.k0
            * modulation.k0
            * (f_value - modulation.f0)
}

/// `local_omega_sq` sampled on the nodes of a uniform grid.
pub fn omega_sq_series(
    modulation: &ModeModulation,
    profile: &DriveProfile,
    nodes: usize,
    dt: f64,
) -> Vec<f64> {
    (0..nodes)
        .map(|i| local_omega_sq(modulation, profile.value(i as f64 * dt)))
        .collect()
}

/// Default step: a fortieth of the shortest mode period.
pub fn default_dt(k_max: f64) -> f64 {
    TAU / (40.0 * k_max)
}

/// Hard stability limit for the fixed-step scheme: a tenth of the shortest
/// mode period.
pub fn check_step(dt: f64, k_max: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("step must be > 0, got {dt}")));
    }
    let limit = 0.1 * TAU / k_max;
    if dt > limit {
        return Err(Error::Config(format!(
            "dt = {dt:e} exceeds the stability bound {limit:e} (0.1 periods of k_max = {k_max:e})"
        )));
    }
    Ok(())
}

/// Instantaneous-oscillator occupancy relative to `omega_ref`:
/// `norm (|Pdot|^2 + omega_ref^2 |P|^2) / (2 omega_ref) - 1/2`.
pub fn photon_number(p: Complex64, pdot: Complex64, omega_ref: f64, norm: f64) -> f64 {
    norm * (pdot.norm_sqr() + omega_ref * omega_ref * p.norm_sqr()) / (2.0 * omega_ref) - 0.5
}

/// Wronskian proxy for unitarity: `Im(P* Pdot)`, conserved by any real
/// linear oscillator equation.
pub fn wronskian(p: Complex64, pdot: Complex64) -> f64 {
    (p.conj() * pdot).im
}

/// One mode's integrated history on a uniform grid.
#[derive(Debug, Clone)]
pub struct ModeTrajectory {
    pub times: Vec<f64>,
    pub amplitude: Vec<Complex64>,
    pub velocity: Vec<Complex64>,
    /// Occupancy relative to `k_ref`.
    pub photons: Vec<f64>,
    pub mode: usize,
    /// Reference frequency used for photon counting (the renormalized root).
    pub k_ref: f64,
    pub epsilon: f64,
}

impl ModeTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end > 0.0) {
        return Err(Error::Config(format!("t_end must be > 0, got {t_end}")));
    }
    let n = (t_end / dt).round();
    if n < 1.0 || !n.is_finite() {
        return Err(Error::Config(format!(
            "no integration steps between 0 and {t_end} at dt = {dt}"
        )));
    }
    Ok(n as usize)
}

/// Vacuum-normalized initial condition for the source mode.
fn initial_amplitude(omega: f64, norm: f64) -> Complex64 {
    Complex64::new(1.0 / (2.0 * omega * norm).sqrt(), 0.0)
}

/// Integrate the decoupled resonant-mode oscillator
/// `Pdd + [k~^2 + 2 eps (k0)^2 (f - f0)] P = 0`
/// from the vacuum initial condition.
pub fn evolve_resonant(
    modulation: &ModeModulation,
    profile: &DriveProfile,
    t_end: f64,
    dt: f64,
) -> Result<ModeTrajectory> {
    check_step(dt, modulation.k0)?;
    let steps = step_count(t_end, dt)?;
    let w2 = omega_sq_series(modulation, profile, steps + 1, dt);

    let p0 = initial_amplitude(modulation.k0, modulation.norm);
    let q0 = Complex64::new(0.0, -modulation.k0) * p0;
    let mut y = [p0, q0];

    let mut rhs = |i: usize, y: &[Complex64], out: &mut [Complex64]| {
        out[0] = y[1];
        out[1] = y[0] * (-w2[i]);
    };

    let mut stepper = Abm4::<Complex64>::new(dt, 2);
    let mut amplitude = Vec::with_capacity(steps + 1);
    let mut velocity = Vec::with_capacity(steps + 1);
    amplitude.push(y[0]);
    velocity.push(y[1]);
    for i in 0..steps {
        stepper.step(i, &mut y, &mut rhs);
        amplitude.push(y[0]);
        velocity.push(y[1]);
    }

    let photons = amplitude
        .iter()
        .zip(&velocity)
        .map(|(&p, &q)| photon_number(p, q, modulation.k_tilde, modulation.norm))
        .collect();
    Ok(ModeTrajectory {
        times: (0..=steps).map(|i| i as f64 * dt).collect(),
        amplitude,
        velocity,
        photons,
        mode: modulation.mode,
        k_ref: modulation.k_tilde,
        epsilon: modulation.epsilon,
    })
}

/// Integrate the full first-order coupled system
/// `Pdd_n + [k~_n^2 + 2 eps_n (k_n^0)^2 (f - f0)] P_n =
///   - sum_m [2 Pdot_m eps_m k_m^0 fdot + P_m eps_m k_m^0 fddot] g^A_mn`
/// with the vacuum initial condition in the source mode `source`.
///
/// Returns one trajectory per mode, in mode order. Photon counting
/// subtracts the vacuum half-quantum only for the source mode, so every
/// occupancy starts at zero.
pub fn evolve_coupled(
    table: &WavenumberTable,
    modulations: &[ModeModulation],
    profile: &DriveProfile,
    source: usize,
    t_end: f64,
    dt: f64,
) -> Result<Vec<ModeTrajectory>> {
    let m_count = modulations.len();
    if m_count == 0 {
        return Err(Error::Config("no modes to evolve".into()));
    }
    if table.len() < m_count {
        return Err(Error::Config(format!(
            "table holds {} modes, need {m_count}",
            table.len()
        )));
    }
    let source_idx = modulations
        .iter()
        .position(|m| m.mode == source)
        .ok_or_else(|| Error::Domain(format!("source mode {source} not among modulations")))?;

    let k_max = modulations.iter().map(|m| m.k0).fold(0.0, f64::max);
    check_step(dt, k_max)?;
    let steps = step_count(t_end, dt)?;

    // Dimensionful couplings g^A_mn = L * (dimensionless table value).
    let mut ga = vec![0.0; m_count * m_count];
    for (mi, mm) in modulations.iter().enumerate() {
        for (ni, mn) in modulations.iter().enumerate() {
            ga[mi * m_count + ni] = table.length * coupling_a(table, mm.mode, mn.mode)?;
        }
    }

    // Per-node drive samples and per-mode frequency series.
    let w2: Vec<Vec<f64>> = modulations
        .iter()
        .map(|m| omega_sq_series(m, profile, steps + 1, dt))
        .collect();
    let fd: Vec<f64> = (0..=steps)
        .map(|i| profile.derivative(i as f64 * dt))
        .collect();
    let fdd: Vec<f64> = (0..=steps)
        .map(|i| profile.second_derivative(i as f64 * dt))
        .collect();
    let eps_k: Vec<f64> = modulations.iter().map(|m| m.epsilon * m.k0).collect();

    let src = &modulations[source_idx];
    let p0 = initial_amplitude(src.k0, src.norm);
    let mut y = vec![Complex64::new(0.0, 0.0); 2 * m_count];
    y[source_idx] = p0;
    y[m_count + source_idx] = Complex64::new(0.0, -src.k0) * p0;

    let mut rhs = |i: usize, y: &[Complex64], out: &mut [Complex64]| {
        for n in 0..m_count {
            out[n] = y[m_count + n];
            let mut acc = y[n] * (-w2[n][i]);
            for m in 0..m_count {
                let g = ga[m * m_count + n];
                if g != 0.0 {
                    let drive_term = y[m_count + m] * (2.0 * eps_k[m] * fd[i])
                        + y[m] * (eps_k[m] * fdd[i]);
                    acc -= drive_term * g;
                }
            }
            out[m_count + n] = acc;
        }
    };

    let mut stepper = Abm4::<Complex64>::new(dt, 2 * m_count);
    let mut amp: Vec<Vec<Complex64>> = vec![Vec::with_capacity(steps + 1); m_count];
    let mut vel: Vec<Vec<Complex64>> = vec![Vec::with_capacity(steps + 1); m_count];
    for n in 0..m_count {
        amp[n].push(y[n]);
        vel[n].push(y[m_count + n]);
    }
    for i in 0..steps {
        stepper.step(i, &mut y, &mut rhs);
        for n in 0..m_count {
            amp[n].push(y[n]);
            vel[n].push(y[m_count + n]);
        }
    }

    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    Ok(modulations
        .iter()
        .enumerate()
        .map(|(n, m)| {
            let vacuum = if n == source_idx { 0.0 } else { 0.5 };
            let photons = amp[n]
                .iter()
                .zip(&vel[n])
                .map(|(&p, &q)| photon_number(p, q, m.k_tilde, m.norm) + vacuum)
                .collect();
            ModeTrajectory {
                times: times.clone(),
                amplitude: std::mem::take(&mut amp[n]),
                velocity: std::mem::take(&mut vel[n]),
                photons,
                mode: m.mode,
                k_ref: m.k_tilde,
                epsilon: m.epsilon,
            }
        })
        .collect())
}

/// Fitted exponential growth rate of the photon number.
#[derive(Debug, Clone, Copy)]
pub struct GrowthRate {
    /// d(log N)/dt over the window [1/m].
    pub rate: f64,
    pub std_error: f64,
    pub points: usize,
}

/// Least-squares slope of `log N` over the time window `(t_lo, t_hi)`.
pub fn growth_rate_fit(traj: &ModeTrajectory, window: (f64, f64)) -> Result<GrowthRate> {
    let (t_lo, t_hi) = window;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &t) in traj.times.iter().enumerate() {
        if t >= t_lo && t <= t_hi {
            let n = traj.photons[i];
            if n <= 0.0 {
                return Err(Error::Domain(format!(
                    "photon number {n:e} at t = {t:e} is not positive; cannot fit log N"
                )));
            }
            xs.push(t);
            ys.push(n.ln());
        }
    }
    let fit = fit_line(&xs, &ys)
        .ok_or_else(|| Error::Domain("growth window holds fewer than 2 samples".into()))?;
    Ok(GrowthRate {
        rate: fit.slope,
        std_error: fit.slope_std_error,
        points: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drive::DriveProfile;

    fn flat_modulation(k0: f64) -> ModeModulation {
        ModeModulation::from_parts(1, k0, 0.0, 0.5, 1.0)
    }

    #[test]
    fn free_oscillation_conserves_amplitude() {
        let k0 = 5.0;
        let m = flat_modulation(k0);
        let profile = DriveProfile::raised_cosine(TAU / k0).unwrap();
        let period = TAU / k0;
        let dt = period / 400.0;
        let traj = evolve_resonant(&m, &profile, 100.0 * period, dt).unwrap();
        let a0 = traj.amplitude[0].norm();
        for p in &traj.amplitude {
            assert!((p.norm() - a0).abs() / a0 < 1e-8);
        }
    }

    #[test]
    fn free_oscillation_zero_photons() {
        let k0 = 3.0;
        let m = flat_modulation(k0);
        let profile = DriveProfile::raised_cosine(TAU / k0).unwrap();
        let period = TAU / k0;
        let traj = evolve_resonant(&m, &profile, 10.0 * period, period / 800.0).unwrap();
        assert!(traj.photons.iter().all(|n| n.abs() < 1e-10));
    }

    #[test]
    fn photon_number_zero_at_start() {
        let p = Complex64::new(1.0 / (2.0f64 * 3.0 * 1.3).sqrt(), 0.0);
        let q = Complex64::new(0.0, -3.0) * p;
        assert!(photon_number(p, q, 3.0, 1.3).abs() < 1e-14);
    }

    #[test]
    fn wronskian_conserved_over_100_periods() {
        let k0 = 2.0;
        let m = flat_modulation(k0);
        let profile = DriveProfile::raised_cosine(TAU / k0).unwrap();
        let period = TAU / k0;
        let traj = evolve_resonant(&m, &profile, 100.0 * period, period / 1000.0).unwrap();
        let w0 = wronskian(traj.amplitude[0], traj.velocity[0]);
        for (p, q) in traj.amplitude.iter().zip(&traj.velocity) {
            assert!((wronskian(*p, *q) - w0).abs() / w0.abs() < 1e-10);
        }
    }

    #[test]
    fn linearity_power_of_two_exact() {
        // Scaling the initial state by 2 scales the whole trajectory by 2
        // with no rounding at all.
        let k0 = 4.0;
        let period = TAU / k0;
        let dt = period / 64.0;
        let steps = 640;
        let run = |scale: f64| {
            let w2 = vec![k0 * k0; steps + 1];
            let mut y = [
                Complex64::new(0.17 * scale, 0.0),
                Complex64::new(0.0, -0.6 * scale),
            ];
            let mut rhs = |i: usize, y: &[Complex64], out: &mut [Complex64]| {
                out[0] = y[1];
                out[1] = y[0] * (-w2[i]);
            };
            let mut stepper = Abm4::<Complex64>::new(dt, 2);
            let mut states = vec![y];
            for i in 0..steps {
                stepper.step(i, &mut y, &mut rhs);
                states.push(y);
            }
            states
        };
        let a = run(1.0);
        let b = run(2.0);
        for (ya, yb) in a.iter().zip(&b) {
            assert_eq!(ya[0] * 2.0, yb[0]);
            assert_eq!(ya[1] * 2.0, yb[1]);
        }
    }

    #[test]
    fn time_reversal_returns_initial_state() {
        let k0 = 3.0;
        let m = flat_modulation(k0);
        let profile = DriveProfile::raised_cosine(TAU / k0).unwrap();
        let period = TAU / k0;
        let dt = period / 400.0;
        let t_end = 20.0 * period;
        let fwd = evolve_resonant(&m, &profile, t_end, dt).unwrap();
        // Reverse: second-order dynamics with flipped velocity runs back.
        let last = fwd.len() - 1;
        let steps = last;
        let w2 = vec![k0 * k0; steps + 1];
        let mut y = [fwd.amplitude[last], -fwd.velocity[last]];
        let mut rhs = |i: usize, y: &[Complex64], out: &mut [Complex64]| {
            out[0] = y[1];
            out[1] = y[0] * (-w2[i]);
        };
        let mut stepper = Abm4::<Complex64>::new(dt, 2);
        for i in 0..steps {
            stepper.step(i, &mut y, &mut rhs);
        }
        assert!((y[0] - fwd.amplitude[0]).norm() < 1e-9);
        assert!((y[1] + fwd.velocity[0]).norm() < 1e-9);
    }

    #[test]
    fn growth_fit_recovers_synthetic_rate() {
        let lambda = 0.35;
        let times: Vec<f64> = (0..400).map(|i| i as f64 * 0.05).collect();
        let photons: Vec<f64> = times.iter().map(|t| (lambda * t).sinh().powi(2)).collect();
        let traj = ModeTrajectory {
            times,
            amplitude: vec![],
            velocity: vec![],
            photons,
            mode: 1,
            k_ref: 1.0,
            epsilon: 0.0,
        };
        // late-time slope of log sinh^2 is 2 lambda
        let fit = growth_rate_fit(&traj, (3.0 / lambda, 5.5 / lambda)).unwrap();
        assert!((fit.rate - 2.0 * lambda).abs() / (2.0 * lambda) < 0.01);
    }

    #[test]
    fn growth_fit_constant_is_flat() {
        let times: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let traj = ModeTrajectory {
            times: times.clone(),
            amplitude: vec![],
            velocity: vec![],
            photons: vec![2.5; 100],
            mode: 1,
            k_ref: 1.0,
            epsilon: 0.0,
        };
        let fit = growth_rate_fit(&traj, (0.0, 99.0)).unwrap();
        assert!(fit.rate.abs() < 1e-12);
    }

    #[test]
    fn growth_fit_rejects_nonpositive() {
        let traj = ModeTrajectory {
            times: vec![0.0, 1.0, 2.0],
            amplitude: vec![],
            velocity: vec![],
            photons: vec![1.0, 0.0, 1.0],
            mode: 1,
            k_ref: 1.0,
            epsilon: 0.0,
        };
        assert!(growth_rate_fit(&traj, (0.0, 2.0)).is_err());
    }

    #[test]
    fn step_bound_enforced() {
        let m = flat_modulation(10.0);
        let profile = DriveProfile::raised_cosine(1.0).unwrap();
        let too_big = 0.2 * TAU / 10.0;
        assert!(evolve_resonant(&m, &profile, 10.0, too_big).is_err());
    }
}
