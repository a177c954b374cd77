//! Velocity-space quasilinear diffusion: the analytic coefficient built
//! from the field's spectral densities, the pre-limit empirical coefficient
//! accumulated along one field trajectory, the closed-form coefficient of
//! the deterministic oscillatory field, the Fick flux estimator, and a
//! conservative solver for the limiting diffusion equation.

use crate::phase_space::{Distribution, FieldOnGrid, VelocityGrid, VelocityProfile};
use crate::quadrature::{filon_linear, trapezoid};
use crate::stochastic::{AnsatzSpec, CorrelationSpec, FieldRealization};
use crate::{Error, Result};
use num_complex::Complex64;

/// Scalar diffusion coefficient `D(v)` on the velocity grid.
///
/// The limiting coefficient is nonnegative; the pre-limit empirical
/// coefficient is genuinely signed at finite time, so nonnegativity is a
/// check ([`DiffusionField::validate_nonnegative`]) rather than a
/// constructor invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionField {
    pub grid: VelocityGrid,
    pub values: Vec<f64>,
}

impl DiffusionField {
    pub fn new(grid: VelocityGrid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.nv);
        DiffusionField { grid, values }
    }

    pub fn zeros(grid: VelocityGrid) -> Self {
        DiffusionField {
            values: vec![0.0; grid.nv],
            grid,
        }
    }

    /// All values finite and above `-1e-12`.
    pub fn validate_nonnegative(&self) -> Result<()> {
        for (i, &d) in self.values.iter().enumerate() {
            if !d.is_finite() || d < -1e-12 {
                return Err(Error::InvalidDistribution(format!(
                    "diffusion coefficient {d:e} at v = {}",
                    self.grid.v(i)
                )));
            }
        }
        Ok(())
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Two-column CSV `v,value`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "v,value")?;
        for (i, &val) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.grid.v(i), val)?;
        }
        Ok(())
    }
}

/// Limiting diffusion coefficient of a stochastic field:
/// `D(v) = (1/2) sum_{k != 0} k^2 Ahat_k(omega_k - k v)`.
pub fn analytic_diffusion(spec: &CorrelationSpec, grid: VelocityGrid) -> DiffusionField {
    let mut values = vec![0.0; grid.nv];
    for m in spec.modes() {
        let k = m.k as f64;
        for (i, d) in values.iter_mut().enumerate() {
            let s = m.omega - k * grid.v(i);
            *d += 0.5 * k * k * m.spectral_density(s);
        }
    }
    DiffusionField::new(grid, values)
}

/// Source of per-mode potential amplitudes for the pre-limit coefficient:
/// a slowly varying fast-time envelope plus a pure carrier in the history
/// variable `sigma`.
pub trait PotentialHistory {
    /// Positive wavenumbers carried by the source.
    fn wavenumbers(&self) -> Vec<i64>;
    /// Envelope `Phi(tau, k)` without the carrier, at fast time `tau`.
    fn envelope(&self, tau: f64, k: i64) -> Complex64;
    /// Carrier frequency in the history variable: the potential at fast
    /// time `tau - sigma` carries `exp(+i freq sigma)` relative to `tau`.
    fn sigma_frequency(&self, k: i64, eps: f64) -> f64;
    /// Largest usable envelope sampling step in `sigma`.
    fn envelope_step(&self) -> f64;
    /// Fast-time horizon available, if bounded.
    fn coverage(&self) -> Option<f64>;
}

impl PotentialHistory for FieldRealization {
    fn wavenumbers(&self) -> Vec<i64> {
        self.spec().positive_modes().map(|m| m.k).collect()
    }

    fn envelope(&self, tau: f64, k: i64) -> Complex64 {
        self.amplitude(tau, k)
    }

    fn sigma_frequency(&self, k: i64, _eps: f64) -> f64 {
        self.spec()
            .modes()
            .iter()
            .find(|m| m.k == k)
            .map(|m| m.omega)
            .unwrap_or(0.0)
    }

    fn envelope_step(&self) -> f64 {
        let tau_c = self.spec().max_tau();
        (tau_c / 32.0).min(self.dt_fast)
    }

    fn coverage(&self) -> Option<f64> {
        Some(self.t_end_fast())
    }
}

/// Deterministic oscillatory source at a fixed scale parameter.
pub struct AnsatzHistory<'a> {
    pub spec: &'a AnsatzSpec,
    pub eps: f64,
}

impl PotentialHistory for AnsatzHistory<'_> {
    fn wavenumbers(&self) -> Vec<i64> {
        self.spec
            .modes()
            .iter()
            .filter(|m| m.k > 0)
            .map(|m| m.k)
            .collect()
    }

    fn envelope(&self, _tau: f64, k: i64) -> Complex64 {
        self.spec
            .modes()
            .iter()
            .find(|m| m.k == k)
            .map(|m| m.amplitude())
            .unwrap_or_else(|| Complex64::new(0.0, 0.0))
    }

    fn sigma_frequency(&self, k: i64, eps: f64) -> f64 {
        self.spec
            .modes()
            .iter()
            .find(|m| m.k == k)
            .map(|m| m.omega * eps.powf(2.0 - m.beta))
            .unwrap_or(0.0)
    }

    fn envelope_step(&self) -> f64 {
        // constant envelope: panel size is set by the carrier cap alone
        f64::INFINITY
    }

    fn coverage(&self) -> Option<f64> {
        None
    }
}

/// Pre-limit diffusion coefficient accumulated along one field history:
///
/// `D(t, v) = sum_k k^2 int_0^{t/eps^2} Phi(t - eps^2 s, k) conj(Phi(t, k))
/// exp(-i k v s) ds`,
///
/// real by conjugate-mode pairing. The history integral uses panels with a
/// piecewise-linear envelope and the exact carrier
/// `exp(i (omega_k - k v) s)` integrated in closed form, so a
/// constant-envelope source is computed to round-off.
pub fn empirical_diffusion<H: PotentialHistory>(
    source: &H,
    t: f64,
    eps: f64,
    grid: VelocityGrid,
) -> Result<DiffusionField> {
    let tau_end = t / (eps * eps);
    if let Some(avail) = source.coverage() {
        if avail + 1e-9 < tau_end {
            return Err(Error::InsufficientCoverage {
                needed: tau_end,
                available: avail,
            });
        }
    }
    let mut values = vec![0.0; grid.nv];
    if tau_end <= 0.0 {
        return Ok(DiffusionField::new(grid, values));
    }
    for k in source.wavenumbers() {
        let k_f = k as f64;
        // panel cap: resolve the fastest carrier seen on the grid
        let omega = source.sigma_frequency(k, eps);
        let max_freq = (omega.abs() + k_f.abs() * grid.v_max).max(1e-12);
        let h_cap = std::f64::consts::PI / (8.0 * max_freq);
        let h_panel = source.envelope_step().min(h_cap).min(tau_end);
        let n_panels = ((tau_end / h_panel).ceil() as usize).max(1);
        let h = tau_end / n_panels as f64;
        // envelope samples g(s) = Phi(tau_end - s, k) conj(Phi(tau_end, k))
        let phi_now = source.envelope(tau_end, k).conj();
        let env: Vec<Complex64> = (0..=n_panels)
            .map(|j| source.envelope(tau_end - j as f64 * h, k) * phi_now)
            .collect();
        for (i, d) in values.iter_mut().enumerate() {
            let freq = omega - k_f * grid.v(i);
            let integral = filon_linear(&env, 0.0, h, freq);
            // conjugate pair k and -k contribute twice the real part
            *d += 2.0 * k_f * k_f * integral.re;
        }
    }
    Ok(DiffusionField::new(grid, values))
}

/// Closed-form pre-limit coefficient of the deterministic oscillatory
/// field:
/// `D(t, v) = sum_k k^2 |Phi_k|^2 sin(X_k t/eps^2) / X_k` with
/// `X_k = eps^{2-beta_k} omega(k) - k v`.
pub fn ansatz_diffusion(spec: &AnsatzSpec, eps: f64, t: f64, grid: VelocityGrid) -> DiffusionField {
    let tau = t / (eps * eps);
    let mut values = vec![0.0; grid.nv];
    for m in spec.modes() {
        let k = m.k as f64;
        let w = m.amplitude().norm_sqr() * k * k;
        for (i, d) in values.iter_mut().enumerate() {
            let x = m.omega * eps.powf(2.0 - m.beta) - k * grid.v(i);
            let kernel = if (x * tau).abs() < 1e-8 {
                tau
            } else {
                (x * tau).sin() / x
            };
            *d += w * kernel;
        }
    }
    DiffusionField::new(grid, values)
}

/// Trapezoid pairing `int D(v) phi(v) dv` against a test profile.
pub fn weak_pairing(d: &DiffusionField, phi: impl Fn(f64) -> f64) -> f64 {
    let vals: Vec<f64> = d
        .values
        .iter()
        .enumerate()
        .map(|(i, &di)| di * phi(d.grid.v(i)))
        .collect();
    trapezoid(&vals, d.grid.dv())
}

/// Fick flux `J(v) = (1/eps) (1/L) int E(x) f(x, v) dx`, evaluated as the
/// grid product mean (identical, by the discrete Parseval identity, to the
/// Fourier pairing `(1/eps) sum_k E(k) f^(-k, v)`).
pub fn fick_flux(f: &Distribution, field: &FieldOnGrid, eps: f64) -> VelocityProfile {
    let nx = f.grid.nx;
    assert_eq!(field.nx, nx, "field and distribution grids differ");
    let e = field.values();
    let values: Vec<f64> = (0..f.grid.nv)
        .map(|iv| {
            let row = f.row(iv);
            let mut acc = 0.0;
            for j in 0..nx {
                acc += e[j] * row[j];
            }
            acc / (nx as f64 * eps)
        })
        .collect();
    VelocityProfile::new(f.grid.into(), values)
}

/// Space-averaged profile with a time stamp: the state evolved by the
/// limiting diffusion equation.
#[derive(Debug, Clone, PartialEq)]
pub struct BarProfile {
    pub grid: VelocityGrid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl BarProfile {
    pub fn new(grid: VelocityGrid, values: Vec<f64>, time: f64) -> Self {
        assert_eq!(values.len(), grid.nv);
        BarProfile { grid, values, time }
    }

    pub fn from_profile(p: &VelocityProfile, time: f64) -> Self {
        BarProfile {
            grid: p.grid,
            values: p.values.clone(),
            time,
        }
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.values, self.grid.dv())
    }

    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|x| x * x).collect();
        trapezoid(&sq, self.grid.dv()).sqrt()
    }

    /// Variance of the profile seen as a density in `v`.
    pub fn variance(&self) -> f64 {
        let m0 = self.mass();
        let m1: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &p)| self.grid.v(i) * p)
            .collect();
        let mean = trapezoid(&m1, self.grid.dv()) / m0;
        let m2: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &p)| (self.grid.v(i) - mean).powi(2) * p)
            .collect();
        trapezoid(&m2, self.grid.dv()) / m0
    }

    /// Two-column CSV `v,value`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "v,value")?;
        for (i, &val) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.grid.v(i), val)?;
        }
        Ok(())
    }
}

/// Solve a tridiagonal system in place (Thomas algorithm).
/// `lower[i]` multiplies `x[i-1]`, `upper[i]` multiplies `x[i+1]`; the
/// solution overwrites `rhs`.
fn solve_tridiagonal(lower: &[f64], diag: &mut [f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    for i in 1..n {
        debug_assert!(diag[i - 1] != 0.0, "singular tridiagonal system");
        let w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
}

/// One theta-scheme step of `d_t p = d_v (D d_v p)` with zero-flux
/// boundaries on the vertex-centered finite-volume grid (half cells at the
/// ends, arithmetic-mean face coefficients).
///
/// `theta = 1` is backward Euler: unconditionally stable, positivity
/// preserving (M-matrix), exactly mass conserving, with non-increasing
/// discrete `L^2`.
pub fn step_diffusion(
    p: &BarProfile,
    d: &DiffusionField,
    dt: f64,
    theta: f64,
) -> Result<BarProfile> {
    assert_eq!(p.grid, d.grid, "profile and coefficient grids differ");
    if !(dt > 0.0) {
        return Err(Error::StepConstraint(format!("dt must be > 0, got {dt}")));
    }
    d.validate_nonnegative()?;
    let n = p.grid.nv;
    let dv = p.grid.dv();
    // face coefficients D_{i+1/2}: arithmetic mean keeps them nonnegative
    // and does not vanish spuriously at resonance edges
    let face: Vec<f64> = (0..n - 1)
        .map(|i| (0.5 * (d.values[i] + d.values[i + 1])).max(0.0))
        .collect();
    // half cells at the boundary recover the trapezoid mass exactly
    let width = |i: usize| if i == 0 || i == n - 1 { 0.5 * dv } else { dv };
    let lap = |values: &[f64], i: usize| -> f64 {
        let right = if i + 1 < n {
            face[i] * (values[i + 1] - values[i]) / dv
        } else {
            0.0
        };
        let left = if i > 0 {
            face[i - 1] * (values[i] - values[i - 1]) / dv
        } else {
            0.0
        };
        right - left
    };
    let mut rhs: Vec<f64> = (0..n)
        .map(|i| width(i) * p.values[i] + (1.0 - theta) * dt * lap(&p.values, i))
        .collect();
    let mut diag = vec![0.0; n];
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let a_right = if i + 1 < n { face[i] / dv } else { 0.0 };
        let a_left = if i > 0 { face[i - 1] / dv } else { 0.0 };
        diag[i] = width(i) + theta * dt * (a_right + a_left);
        if i + 1 < n {
            upper[i] = -theta * dt * a_right;
        }
        if i > 0 {
            lower[i] = -theta * dt * a_left;
        }
    }
    solve_tridiagonal(&lower, &mut diag, &upper, &mut rhs);
    Ok(BarProfile {
        grid: p.grid,
        values: rhs,
        time: p.time + dt,
    })
}

/// Integrate the diffusion equation to `t_end` with backward Euler steps of
/// size at most `dt`.
pub fn solve_diffusion(
    p0: &BarProfile,
    d: &DiffusionField,
    t_end: f64,
    dt: f64,
) -> Result<BarProfile> {
    let mut p = p0.clone();
    while p.time < t_end - 1e-12 {
        let step = dt.min(t_end - p.time);
        p = step_diffusion(&p, d, step, 1.0)?;
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::PhaseSpaceGrid;
    use crate::stochastic::{
        synthesize_realization, AnsatzMode, CorrelationFamily, CorrelationMode, SynthesisParams,
    };
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn vgrid() -> VelocityGrid {
        VelocityGrid::new(257, 2.0 * PI + 1.0)
    }

    fn tri_pair(a: f64, tau: f64, omega: f64) -> CorrelationSpec {
        CorrelationSpec::from_half(vec![CorrelationMode {
            k: 1,
            omega,
            family: CorrelationFamily::Triangular,
            amplitude: a,
            tau,
        }])
        .unwrap()
    }

    #[test]
    fn analytic_empty_spec_is_zero() {
        let spec = CorrelationSpec::new(vec![]).unwrap();
        let d = analytic_diffusion(&spec, vgrid());
        assert!(d.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn analytic_single_pair_triangular() {
        // pair k = +-1, triangular a = 1, tau = 1, omega = 0:
        // D(v) = Ahat(-v) = sinc^2(v/2), so D(0) = 1 and D(2 pi) = 0
        let spec = tri_pair(1.0, 1.0, 0.0);
        let g = vgrid();
        let d = analytic_diffusion(&spec, g);
        d.validate_nonnegative().unwrap();
        let expected = |v: f64| {
            if v.abs() < 1e-12 {
                1.0
            } else {
                ((v / 2.0).sin() / (v / 2.0)).powi(2)
            }
        };
        let worst: f64 = (0..g.nv)
            .map(|i| (d.values[i] - expected(g.v(i))).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12, "worst deviation {worst:e}");
    }

    #[test]
    fn analytic_frequency_shift_translates() {
        // replacing omega_k by omega_k + k u translates D by u
        let g = VelocityGrid::new(101, 5.0);
        let u = 3.0 * g.dv();
        let base = analytic_diffusion(&tri_pair(0.8, 1.3, 0.2), g);
        let shifted = analytic_diffusion(&tri_pair(0.8, 1.3, 0.2 + u), g);
        for i in 0..g.nv - 3 {
            assert_relative_eq!(shifted.values[i + 3], base.values[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn empirical_zero_field_is_zero() {
        let spec = tri_pair(0.0, 1.0, 0.0);
        let r =
            synthesize_realization(&spec, 3, 0.2, 30.0, 1.0 / 32.0, &SynthesisParams::default())
                .unwrap();
        let d = empirical_diffusion(&r, 1.0, 0.2, vgrid()).unwrap();
        assert!(d.values.iter().all(|&x| x.abs() < 1e-300));
    }

    #[test]
    fn empirical_requires_coverage() {
        let spec = tri_pair(1.0, 1.0, 0.0);
        let r =
            synthesize_realization(&spec, 3, 0.2, 10.0, 1.0 / 32.0, &SynthesisParams::default())
                .unwrap();
        assert!(matches!(
            empirical_diffusion(&r, 1.0, 0.2, vgrid()),
            Err(Error::InsufficientCoverage { .. })
        ));
    }

    #[test]
    fn ansatz_identity_smoke() {
        // single pair k = +-1, beta = 2, omega = 1, Phi = 1/2:
        // the panel quadrature must reproduce the closed form
        let spec = AnsatzSpec::from_half(vec![AnsatzMode {
            k: 1,
            omega: 1.0,
            beta: 2.0,
            amplitude_re: 0.5,
            amplitude_im: 0.0,
        }])
        .unwrap();
        let eps = 0.2;
        let t = 1.0;
        let g = vgrid();
        let emp = empirical_diffusion(&AnsatzHistory { spec: &spec, eps }, t, eps, g).unwrap();
        let closed = ansatz_diffusion(&spec, eps, t, g);
        let scale = closed.values.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        for (a, b) in emp.values.iter().zip(&closed.values) {
            assert!((a - b).abs() <= 1e-9 * scale, "empirical {a} vs closed {b}");
        }
        // spot value: tau = 25, D(v) = (1/2) sin(25 (1 - v))/(1 - v)
        let i0 = ((0.0 + g.v_max) / g.dv()).round() as usize;
        let v0 = g.v(i0);
        let expected = 0.5 * (25.0 * (1.0 - v0)).sin() / (1.0 - v0);
        assert_relative_eq!(closed.values[i0], expected, max_relative = 1e-12);
    }

    #[test]
    fn weak_pairing_zero_field() {
        let d = DiffusionField::zeros(vgrid());
        assert_eq!(weak_pairing(&d, |v| v * v), 0.0);
    }

    #[test]
    fn fick_flux_vanishes_for_x_independent_f() {
        let grid = PhaseSpaceGrid::new(32, 65, 4.0).unwrap();
        let f = Distribution::from_fn(grid, |_, v| (-v * v / 2.0).exp());
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.nx];
        coeffs[1] = Complex64::new(0.0, -0.5);
        coeffs[31] = Complex64::new(0.0, 0.5);
        let e = FieldOnGrid::from_coefficients(grid.nx, grid.length, coeffs);
        let j = fick_flux(&f, &e, 0.1);
        for &val in &j.values {
            assert!(val.abs() < 1e-13);
        }
    }

    #[test]
    fn fick_flux_zero_field() {
        let grid = PhaseSpaceGrid::new(16, 33, 4.0).unwrap();
        let f = Distribution::from_fn(grid, |x, v| (1.0 + 0.3 * x.cos()) * (-v * v).exp());
        let e = FieldOnGrid::zero(grid.nx, grid.length);
        let j = fick_flux(&f, &e, 0.1);
        assert!(j.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn diffusion_step_zero_coefficient_is_identity() {
        let g = VelocityGrid::new(65, 4.0);
        let p = BarProfile::new(
            g,
            (0..65).map(|i| (i as f64 * 0.1).sin().abs()).collect(),
            0.0,
        );
        let d = DiffusionField::zeros(g);
        let q = step_diffusion(&p, &d, 0.5, 1.0).unwrap();
        for (a, b) in p.values.iter().zip(&q.values) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn diffusion_variance_growth() {
        // constant D: variance grows by 2 D dt per backward-Euler step
        let g = VelocityGrid::new(401, 10.0);
        let p0 = BarProfile::new(
            g,
            (0..g.nv).map(|i| (-g.v(i).powi(2) / 0.5).exp()).collect(),
            0.0,
        );
        let d = DiffusionField::new(g, vec![0.3; g.nv]);
        let dt = 0.01;
        let mut p = p0.clone();
        for _ in 0..100 {
            p = step_diffusion(&p, &d, dt, 1.0).unwrap();
        }
        let growth = p.variance() - p0.variance();
        let expected = 2.0 * 0.3 * dt * 100.0;
        assert_relative_eq!(growth, expected, max_relative = 0.01);
    }

    #[test]
    fn diffusion_mass_conserved_many_steps() {
        let g = VelocityGrid::new(129, 6.0);
        let p0 = BarProfile::new(
            g,
            (0..g.nv).map(|i| (-g.v(i).powi(2) / 2.0).exp()).collect(),
            0.0,
        );
        let d = DiffusionField::new(
            g,
            (0..g.nv)
                .map(|i| 0.1 + 0.05 * (g.v(i)).cos().powi(2))
                .collect(),
        );
        let m0 = p0.mass();
        let mut p = p0;
        for _ in 0..10_000 {
            p = step_diffusion(&p, &d, 0.01, 1.0).unwrap();
        }
        assert_relative_eq!(p.mass(), m0, max_relative = 1e-12);
        // positivity of the M-matrix scheme
        assert!(p.values.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn diffusion_l2_non_increasing_and_negative_d_rejected() {
        let g = VelocityGrid::new(101, 5.0);
        let mut p = BarProfile::new(
            g,
            (0..g.nv)
                .map(|i| (-g.v(i).powi(2)).exp() * (1.0 + 0.5 * (3.0 * g.v(i)).sin()))
                .collect(),
            0.0,
        );
        let dips = DiffusionField::new(g, (0..g.nv).map(|i| 0.2 + 0.3 * g.v(i).sin()).collect());
        assert!(step_diffusion(&p, &dips, 0.1, 1.0).is_err());
        let d = DiffusionField::new(
            g,
            (0..g.nv).map(|i| 0.2 + 0.1 * g.v(i).sin().abs()).collect(),
        );
        for _ in 0..50 {
            let q = step_diffusion(&p, &d, 0.1, 1.0).unwrap();
            assert!(q.l2_norm() <= p.l2_norm() + 1e-13);
            p = q;
        }
    }
}
