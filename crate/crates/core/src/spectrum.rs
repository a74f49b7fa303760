//! Cavity eigenvalue problem for a thin conducting slab at the cavity
//! midpoint.
//!
//! A slab of strength `V` at `x = L/2` shifts the antisymmetric-sector
//! wavenumbers from the empty-cavity values to the roots of
//!
//! ```text
//! 2 k = -V tan(k L / 2)
//! ```
//!
//! with the m-th root confined to `((2m-1)pi/L, 2m pi/L)`. Everything here
//! works internally with the dimensionless products `kappa = k L` and
//! `v = V L`; the physically interesting regime spans `v` from below 1 up to
//! 1e14, which raw SI magnitudes cannot survive in double precision.

use crate::error::{Error, Result};
use crate::numerics::{brent::brent, quad::simpson};
use std::f64::consts::PI;

/// Cavity geometry and the slab potential's resting/peak values.
///
/// `length` in meters; potentials in 1/m (natural units, c = 1).
#[derive(Debug, Clone, Copy)]
pub struct CavityConfig {
    pub length: f64,
    pub v0: f64,
    pub v_max: f64,
}

impl CavityConfig {
    pub fn new(length: f64, v0: f64, v_max: f64) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::Domain(format!("cavity length must be > 0, got {length}")));
        }
        if !(v0 > 0.0) {
            return Err(Error::Domain(format!("V0 must be > 0, got {v0}")));
        }
        if !(v_max >= v0) {
            return Err(Error::Domain(format!(
                "Vmax must be >= V0, got Vmax = {v_max}, V0 = {v0}"
            )));
        }
        Ok(Self { length, v0, v_max })
    }

    /// Dimensionless resting potential `v0 = V0 L`.
    pub fn v0_scaled(&self) -> f64 {
        self.v0 * self.length
    }

    /// Dimensionless peak potential `vmax = Vmax L`.
    pub fn v_max_scaled(&self) -> f64 {
        self.v_max * self.length
    }
}

/// Numerical tolerances for the spectrum solvers. All configurable; the
/// defaults are what the CLI ships with.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumSettings {
    /// Accepted Newton-step residual of the root, in units of kappa.
    pub root_residual_tol: f64,
    /// Simpson panel count for coupling-coefficient quadrature.
    pub quad_panels: usize,
    /// Relative agreement required between the quadrature and its refinement.
    pub quad_check_tol: f64,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        Self {
            root_residual_tol: 1e-12,
            quad_panels: 2048,
            quad_check_tol: 1e-8,
        }
    }
}

/// Slab strength from the plasma-sheet parameters: `V = 4 pi n_s e^2 / m`.
pub fn plasma_potential(n_s: f64, e: f64, m_eff: f64) -> Result<f64> {
    if !(n_s > 0.0 && e > 0.0 && m_eff > 0.0) {
        return Err(Error::Domain(format!(
            "plasma_potential needs positive inputs (n_s = {n_s}, e = {e}, m_eff = {m_eff})"
        )));
    }
    Ok(4.0 * PI * n_s * e * e / m_eff)
}

/// `2 kappa + v tan(kappa/2)` and its kappa-derivative.
fn root_fn(v: f64, kappa: f64) -> (f64, f64) {
    let t = (0.5 * kappa).tan();
    let g = 2.0 * kappa + v * t;
    let gp = 2.0 + 0.5 * v * (1.0 + t * t);
    (g, gp)
}

/// Pole-free equivalent `2 kappa cos(kappa/2) + v sin(kappa/2)`; same roots
/// on the bracket, no tangent singularity, no overflow at large `v`.
fn root_fn_polefree(v: f64, kappa: f64) -> (f64, f64) {
    let (s, c) = (0.5 * kappa).sin_cos();
    let h = 2.0 * kappa * c + v * s;
    let hp = 2.0 * c - kappa * s + 0.5 * v * c;
    (h, hp)
}

/// Newton-step residual `|g / g'|` of the root equation at `kappa`,
/// dimensionless. This is the backward-error metric stored in tables: the
/// raw residual `|2k + V tan(kL/2)| L` scales like `(2 + v/2) ulp(kappa)`
/// for any representable root and is therefore not a usable acceptance
/// metric at large `v`.
pub fn root_residual(v: f64, kappa: f64) -> f64 {
    let (g, gp) = root_fn(v, kappa);
    (g / gp).abs()
}

/// Solve for the m-th dimensionless root `kappa_m` in
/// `((2m-1) pi, 2m pi)`, `v >= 0` (`v = 0` returns the pole limit).
pub fn solve_kappa(v: f64, m: usize, settings: &SpectrumSettings) -> Result<f64> {
    if m < 1 {
        return Err(Error::Domain("mode index must be >= 1".into()));
    }
    if !(v >= 0.0) {
        return Err(Error::Domain(format!("potential must be >= 0, got {v}")));
    }
    let lo = (2 * m - 1) as f64 * PI;
    let hi = (2 * m) as f64 * PI;

    let kappa = if v < 1e-10 {
        // Root sits within O(v) of the tangent pole; the expansion
        // kappa = P + v/P + O(v^2) is already beyond double precision.
        let mut kappa = lo + v / lo;
        for _ in 0..3 {
            let (h, hp) = root_fn_polefree(v, kappa);
            if hp != 0.0 {
                kappa -= h / hp;
            }
        }
        kappa
    } else if v <= 1e12 {
        // Brent on the tangent form, bracket shrunk off the pole.
        let margin = 4.0 * f64::EPSILON;
        let a = lo * (1.0 + margin);
        let b = hi * (1.0 - margin);
        let f = |k: f64| root_fn(v, k).0;
        let bracket_ok = f(a).signum() != f(b).signum();
        let mut kappa = if bracket_ok {
            brent(f, a, b, 1e-15 * hi, 200)?
        } else {
            brent(|k| root_fn_polefree(v, k).0, lo, hi, 1e-15 * hi, 200)?
        };
        for _ in 0..2 {
            let (g, gp) = root_fn(v, kappa);
            let step = g / gp;
            if step.is_finite() {
                kappa -= step;
            }
        }
        kappa
    } else {
        // tan overflows its useful range near the root; the scaled form is
        // exact there.
        let mut kappa = brent(|k| root_fn_polefree(v, k).0, lo, hi, 1e-15 * hi, 200)?;
        for _ in 0..2 {
            let (h, hp) = root_fn_polefree(v, kappa);
            let step = h / hp;
            if step.is_finite() && (kappa - step) > lo && (kappa - step) < hi {
                kappa -= step;
            }
        }
        kappa
    };

    if !(kappa > lo && kappa < hi) {
        return Err(Error::Internal(format!(
            "root escaped its bracket: kappa = {kappa}, bracket ({lo}, {hi}), v = {v}"
        )));
    }
    let residual = root_residual(v, kappa);
    if residual > settings.root_residual_tol {
        return Err(Error::Internal(format!(
            "root residual {residual:e} above tolerance {:e} (v = {v}, m = {m})",
            settings.root_residual_tol
        )));
    }
    Ok(kappa)
}

/// The m-th wavenumber `k_m` (1/m) of the cavity with slab strength `v_pot`.
pub fn static_wavenumber(cavity: &CavityConfig, v_pot: f64, m: usize) -> Result<f64> {
    static_wavenumber_with(cavity, v_pot, m, &SpectrumSettings::default())
}

pub fn static_wavenumber_with(
    cavity: &CavityConfig,
    v_pot: f64,
    m: usize,
    settings: &SpectrumSettings,
) -> Result<f64> {
    let kappa = solve_kappa(v_pot * cavity.length, m, settings)?;
    Ok(kappa / cavity.length)
}

/// Mode norm `(Psi, Psi) = 1 - sin(kL)/(kL)`.
pub fn mode_norm(k: f64, length: f64) -> f64 {
    let kl = k * length;
    1.0 - kl.sin() / kl
}

/// One solved cavity mode.
#[derive(Debug, Clone, Copy)]
pub struct ModeEntry {
    /// Mode index, 1-based.
    pub index: usize,
    /// Wavenumber k [1/m].
    pub wavenumber: f64,
    /// Dimensionless root kappa = k L.
    pub kappa: f64,
    /// Mode norm (dimensionless).
    pub norm: f64,
    /// Newton-step residual of the root equation (dimensionless).
    pub residual: f64,
}

/// The first `M` solved modes at a fixed potential.
#[derive(Debug, Clone)]
pub struct WavenumberTable {
    pub potential: f64,
    pub length: f64,
    entries: Vec<ModeEntry>,
}

impl WavenumberTable {
    /// Assemble a table from externally solved entries (e.g. a CSV reload).
    /// No residual re-check is performed here; `verify_residuals` does that.
    pub fn from_entries(potential: f64, length: f64, entries: Vec<ModeEntry>) -> Self {
        Self {
            potential,
            length,
            entries,
        }
    }

    pub fn entries(&self) -> &[ModeEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry for 1-based mode index `m`.
    pub fn entry(&self, m: usize) -> Result<&ModeEntry> {
        self.entries
            .get(m.wrapping_sub(1))
            .filter(|e| e.index == m)
            .ok_or_else(|| Error::Domain(format!("mode {m} not in table (len {})", self.len())))
    }

    /// Largest wavenumber in the table [1/m].
    pub fn k_max(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.wavenumber)
            .fold(0.0, f64::max)
    }

    /// Re-evaluate every entry's root residual against `tol`.
    pub fn verify_residuals(&self, tol: f64) -> Result<()> {
        let v = self.potential * self.length;
        for e in &self.entries {
            let r = root_residual(v, e.kappa);
            if r > tol {
                return Err(Error::Accuracy {
                    what: format!("root residual of mode {}", e.index),
                    achieved: r,
                    requested: tol,
                });
            }
        }
        Ok(())
    }
}

/// Solve the first `count` modes at slab strength `v_pot`.
pub fn spectrum_table(cavity: &CavityConfig, v_pot: f64, count: usize) -> Result<WavenumberTable> {
    spectrum_table_with(cavity, v_pot, count, &SpectrumSettings::default())
}

pub fn spectrum_table_with(
    cavity: &CavityConfig,
    v_pot: f64,
    count: usize,
    settings: &SpectrumSettings,
) -> Result<WavenumberTable> {
    if count < 1 {
        return Err(Error::Domain("mode count must be >= 1".into()));
    }
    let v = v_pot * cavity.length;
    let mut entries = Vec::with_capacity(count);
    for m in 1..=count {
        let kappa = solve_kappa(v, m, settings)?;
        entries.push(ModeEntry {
            index: m,
            wavenumber: kappa / cavity.length,
            kappa,
            norm: 1.0 - kappa.sin() / kappa,
            residual: root_residual(v, kappa),
        });
    }
    Ok(WavenumberTable {
        potential: v_pot,
        length: cavity.length,
        entries,
    })
}

/// The antisymmetric-sector mode function, assembled from
/// `psi(x) = sqrt(2/L) sin(kx)` on the left half and `-psi(x - L)` on the
/// right half. Continuous at `L/2`; its slope jumps there by `-V Psi(L/2)`.
#[derive(Debug, Clone, Copy)]
pub struct ModeFunction {
    pub wavenumber: f64,
    pub length: f64,
}

impl ModeFunction {
    pub fn new(wavenumber: f64, length: f64) -> Self {
        Self { wavenumber, length }
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if x < 0.0 || x > self.length {
            return Err(Error::Domain(format!(
                "position {x} outside cavity [0, {}]",
                self.length
            )));
        }
        Ok(())
    }

    /// Field value at `x`.
    pub fn value(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        let amp = (2.0 / self.length).sqrt();
        if x <= 0.5 * self.length {
            Ok(amp * (self.wavenumber * x).sin())
        } else {
            Ok(-amp * (self.wavenumber * (x - self.length)).sin())
        }
    }

    /// Analytic derivative with respect to the wavenumber.
    pub fn d_dk(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        let amp = (2.0 / self.length).sqrt();
        if x <= 0.5 * self.length {
            Ok(amp * x * (self.wavenumber * x).cos())
        } else {
            let u = x - self.length;
            Ok(-amp * u * (self.wavenumber * u).cos())
        }
    }

    /// Analytic second derivative with respect to the wavenumber.
    pub fn d2_dk2(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        let amp = (2.0 / self.length).sqrt();
        if x <= 0.5 * self.length {
            Ok(-amp * x * x * (self.wavenumber * x).sin())
        } else {
            let u = x - self.length;
            Ok(amp * u * u * (self.wavenumber * u).sin())
        }
    }
}

/// Shorthand for `Psi_m` evaluated on the unit interval (internal form).
/// `x_hat` in [0, 1]; amplitude convention drops the sqrt(2/L).
fn psi_hat(kappa: f64, x_hat: f64) -> f64 {
    if x_hat <= 0.5 {
        (kappa * x_hat).sin()
    } else {
        -(kappa * (x_hat - 1.0)).sin()
    }
}

fn dpsi_hat_dkappa(kappa: f64, x_hat: f64) -> f64 {
    if x_hat <= 0.5 {
        x_hat * (kappa * x_hat).cos()
    } else {
        let u = x_hat - 1.0;
        -u * (kappa * u).cos()
    }
}

fn d2psi_hat_dkappa2(kappa: f64, x_hat: f64) -> f64 {
    if x_hat <= 0.5 {
        -x_hat * x_hat * (kappa * x_hat).sin()
    } else {
        let u = x_hat - 1.0;
        u * u * (kappa * u).sin()
    }
}

/// Quadrature of `f` over the unit interval split at the slab position, so
/// each Simpson half sees a smooth integrand.
fn integrate_split<F: Fn(f64) -> f64>(f: F, panels: usize) -> f64 {
    let half = (panels / 2).max(2);
    simpson(&f, 0.0, 0.5, half) + simpson(&f, 0.5, 1.0, half)
}

fn coupling_with<D>(
    table: &WavenumberTable,
    m: usize,
    n: usize,
    settings: &SpectrumSettings,
    deriv: D,
) -> Result<f64>
where
    D: Fn(f64, f64) -> f64,
{
    let km = table.entry(m)?.kappa;
    let en = table.entry(n)?;
    let kn = en.kappa;
    let integrand = |x: f64| deriv(km, x) * psi_hat(kn, x);
    let coarse = integrate_split(&integrand, settings.quad_panels);
    let fine = integrate_split(&integrand, 2 * settings.quad_panels);
    let scale = fine.abs().max(coarse.abs()).max(1e-30);
    let rel = (fine - coarse).abs() / scale;
    if rel > settings.quad_check_tol {
        return Err(Error::Accuracy {
            what: format!("coupling quadrature (m = {m}, n = {n})"),
            achieved: rel,
            requested: settings.quad_check_tol,
        });
    }
    // Factor 2: the unit-interval inner product carries (2/L) * L relative
    // to the dimensionful one; the norm in the denominator absorbs the rest.
    Ok(2.0 * fine / en.norm)
}

/// Dimensionless coupling `g^(A)_{mn} / L = (dPsi_m/dk_m, Psi_n) / (Psi_n, Psi_n) / L`.
///
/// Invariant under `(L, V) -> (sL, V/s)`; multiply by `L` for the
/// dimensionful coefficient that enters the mode equations.
pub fn coupling_a(table: &WavenumberTable, m: usize, n: usize) -> Result<f64> {
    coupling_a_with(table, m, n, &SpectrumSettings::default())
}

pub fn coupling_a_with(
    table: &WavenumberTable,
    m: usize,
    n: usize,
    settings: &SpectrumSettings,
) -> Result<f64> {
    coupling_with(table, m, n, settings, dpsi_hat_dkappa)
}

/// Dimensionless coupling `g^(B)_{mn} / L^2`, built from the analytic second
/// wavenumber derivative of the mode function.
pub fn coupling_b(table: &WavenumberTable, m: usize, n: usize) -> Result<f64> {
    coupling_b_with(table, m, n, &SpectrumSettings::default())
}

pub fn coupling_b_with(
    table: &WavenumberTable,
    m: usize,
    n: usize,
    settings: &SpectrumSettings,
) -> Result<f64> {
    coupling_with(table, m, n, settings, d2psi_hat_dkappa2)
}

/// Numerical inner product `(Psi_m, Psi_n)` over `[0, L]` in the
/// dimensionless convention (equals `[1 - sin(kL)/kL] delta_mn` exactly).
pub fn mode_overlap(table: &WavenumberTable, m: usize, n: usize, panels: usize) -> Result<f64> {
    let km = table.entry(m)?.kappa;
    let kn = table.entry(n)?.kappa;
    Ok(2.0 * integrate_split(|x| psi_hat(km, x) * psi_hat(kn, x), panels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cavity_unit() -> CavityConfig {
        CavityConfig::new(1.0, 10.0, 20.0).unwrap()
    }

    #[test]
    fn plasma_potential_unit_inputs() {
        assert_relative_eq!(plasma_potential(1.0, 1.0, 1.0).unwrap(), 4.0 * PI);
    }

    #[test]
    fn plasma_potential_linear_in_density() {
        let v1 = plasma_potential(3.0, 2.0, 5.0).unwrap();
        let v2 = plasma_potential(6.0, 2.0, 5.0).unwrap();
        assert_relative_eq!(v2, 2.0 * v1, max_relative = 1e-15);
    }

    #[test]
    fn plasma_potential_good_conductor_value() {
        // Inputs picked so the strength lands on the good-conductor value.
        let target = 1e16;
        let v = plasma_potential(target / (4.0 * PI), 1.0, 1.0).unwrap();
        assert_relative_eq!(v, target, max_relative = 1e-12);
    }

    #[test]
    fn plasma_potential_rejects_nonpositive() {
        assert!(plasma_potential(0.0, 1.0, 1.0).is_err());
        assert!(plasma_potential(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn perfect_conductor_limit() {
        let settings = SpectrumSettings::default();
        for m in 1..=5 {
            let kappa = solve_kappa(1e14, m, &settings).unwrap();
            let target = 2.0 * m as f64 * PI;
            assert!(((kappa - target) / target).abs() < 1e-10);
        }
    }

    #[test]
    fn transparent_limit() {
        let settings = SpectrumSettings::default();
        for m in 1..=5 {
            let kappa = solve_kappa(1e-12, m, &settings).unwrap();
            let target = (2 * m - 1) as f64 * PI;
            assert!(((kappa - target) / target).abs() < 1e-10);
        }
    }

    #[test]
    fn frozen_root_v10() {
        // Bisection oracle value (30-digit arithmetic), v = 10, m = 1.
        let kappa = solve_kappa(10.0, 1, &SpectrumSettings::default()).unwrap();
        assert_relative_eq!(kappa, 4.7612889693468049, max_relative = 1e-14);
    }

    #[test]
    fn brackets_are_strict() {
        let settings = SpectrumSettings::default();
        for &v in &[1e-3, 1.0, 10.0, 1e6, 1e14] {
            for m in 1..=5 {
                let kappa = solve_kappa(v, m, &settings).unwrap();
                assert!(kappa > (2 * m - 1) as f64 * PI);
                assert!(kappa < 2.0 * m as f64 * PI);
            }
        }
    }

    #[test]
    fn mode_norm_special_points() {
        assert_relative_eq!(mode_norm(2.0 * PI, 1.0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(mode_norm(PI, 1.0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(
            mode_norm(0.5 * PI, 1.0),
            1.0 - 2.0 / PI,
            max_relative = 1e-15
        );
    }

    #[test]
    fn mode_function_boundaries_and_seam() {
        let cavity = cavity_unit();
        let k = static_wavenumber(&cavity, cavity.v0, 1).unwrap();
        let psi = ModeFunction::new(k, cavity.length);
        assert_eq!(psi.value(0.0).unwrap(), 0.0);
        assert!(psi.value(cavity.length).unwrap().abs() < 1e-15);
        let mid = 0.5 * cavity.length;
        let left = psi.value(mid).unwrap();
        let right = -(2.0f64 / cavity.length).sqrt() * (k * (mid - cavity.length)).sin();
        assert_relative_eq!(left, right, max_relative = 1e-12);
        assert!(psi.value(-0.1).is_err());
        assert!(psi.value(1.1).is_err());
    }

    #[test]
    fn spectrum_table_perfect_conductor() {
        let cavity = CavityConfig::new(2.0, 1e14 / 2.0, 1e14 / 2.0).unwrap();
        let table = spectrum_table(&cavity, cavity.v0, 3).unwrap();
        for (i, e) in table.entries().iter().enumerate() {
            let target = 2.0 * PI * (i + 1) as f64 / cavity.length;
            assert_relative_eq!(e.wavenumber, target, max_relative = 1e-9);
        }
    }

    #[test]
    fn spectrum_not_equidistant_at_v10() {
        let cavity = cavity_unit();
        let table = spectrum_table(&cavity, 10.0, 3).unwrap();
        let k = table.entries();
        let d1 = k[1].kappa - k[0].kappa;
        let d2 = k[2].kappa - k[1].kappa;
        assert!((d2 - d1).abs() > 0.3, "spacings {d1} vs {d2}");
    }

    #[test]
    fn single_mode_table_matches_scalar_solver() {
        let cavity = cavity_unit();
        let table = spectrum_table(&cavity, 7.0, 1).unwrap();
        let k = static_wavenumber(&cavity, 7.0, 1).unwrap();
        assert_eq!(table.entry(1).unwrap().wavenumber, k);
    }

    #[test]
    fn coupling_scale_invariance() {
        let c1 = CavityConfig::new(1.0, 10.0, 20.0).unwrap();
        let c2 = CavityConfig::new(4.0, 2.5, 5.0).unwrap();
        let t1 = spectrum_table(&c1, c1.v0, 2).unwrap();
        let t2 = spectrum_table(&c2, c2.v0, 2).unwrap();
        let a1 = coupling_a(&t1, 1, 2).unwrap();
        let a2 = coupling_a(&t2, 1, 2).unwrap();
        assert_relative_eq!(a1, a2, max_relative = 1e-13);
    }

    #[test]
    fn frozen_couplings_v10() {
        // High-resolution quadrature oracle values at v = 10.
        let cavity = cavity_unit();
        let table = spectrum_table(&cavity, 10.0, 2).unwrap();
        assert_relative_eq!(
            coupling_a(&table, 1, 1).unwrap(),
            -0.0224524653030541,
            max_relative = 1e-10
        );
        assert_relative_eq!(
            coupling_b(&table, 1, 1).unwrap(),
            -0.1075178332106882,
            max_relative = 1e-10
        );
        assert_relative_eq!(
            coupling_a(&table, 1, 2).unwrap(),
            0.1664199158603186,
            max_relative = 1e-10
        );
    }

    #[test]
    fn wavenumber_monotone_in_potential() {
        let cavity = cavity_unit();
        let mut prev = 0.0;
        for &v in &[1e-6, 1e-3, 1.0, 10.0, 1e3, 1e6, 1e9, 1e12, 1e14] {
            let k = static_wavenumber(&cavity, v, 2).unwrap();
            assert!(k > prev, "k not monotone at v = {v}");
            prev = k;
        }
    }

    #[test]
    fn table_entry_lookup_errors() {
        let cavity = cavity_unit();
        let table = spectrum_table(&cavity, 10.0, 2).unwrap();
        assert!(table.entry(3).is_err());
        assert!(table.entry(0).is_err());
    }
}
