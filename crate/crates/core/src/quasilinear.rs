//! Short-time quasilinear integrator: the space-averaged profile `G(t, v)`
//! evolves under a Lorentzian-broadened diffusion coefficient built from the
//! unstable linear modes, whose eigenvalues are re-solved against the
//! current profile as it flattens.
//!
//! Each mode `(k_m, lambda_m)` with `Re lambda_m > 0` contributes
//!
//! `D(v) = eps^2 |E_m(0)|^2 Re lambda_m exp(2 int_0^t Re lambda_m ds)
//!         / |lambda_m + i k_m v|^2`,
//!
//! a Lorentzian centered at the resonant velocity `v = -Im lambda_m / k_m`
//! with half width `Re lambda_m / |k_m|`. The denominator `|lambda + i k
//! v|^2` is pinned by the flux identity at `t = 0`: for the slaved
//! eigenmode perturbation the quasilinear flux `-D d_v G` must equal the
//! space-averaged field-perturbation flux computed directly from the mode
//! shape, and that computation lands the resonance at `-Im lambda / k`.
//! A mode whose growth rate reaches zero is clamped: its amplitude factor
//! freezes and it stops contributing, which keeps `D >= 0` and the run
//! well posed past saturation.

use crate::diffusion::{step_diffusion, BarProfile, DiffusionField};
use crate::dispersion::{newton_root, winding_number, ProfileG, Rect};
use crate::{Error, Result};
use num_complex::Complex64;

/// Growth rates below this are treated as saturated.
const CLAMP_RE: f64 = 1e-4;
/// Residual bound for an active mode against the current profile.
const MODE_RESIDUAL_TOL: f64 = 1e-8;

/// One tracked eigenmode.
#[derive(Debug, Clone, Copy)]
pub struct QlMode {
    pub k: f64,
    pub lambda: Complex64,
    /// Squared modulus of the initial field coefficient `|E(0, k)|^2`.
    pub e0_sq: f64,
    /// Accumulated `int_0^t Re lambda ds`, frozen once clamped.
    pub growth_integral: f64,
    pub clamped: bool,
    pub clamp_time: Option<f64>,
}

impl QlMode {
    pub fn new(k: f64, lambda: Complex64, e0_sq: f64) -> Self {
        QlMode {
            k,
            lambda,
            e0_sq,
            growth_integral: 0.0,
            clamped: false,
            clamp_time: None,
        }
    }

    /// Resonant velocity `-Im lambda / k`.
    pub fn resonant_velocity(&self) -> f64 {
        -self.lambda.im / self.k
    }
}

/// Integrator state: the profile, the scale parameter and the mode list.
#[derive(Debug, Clone)]
pub struct QlState {
    pub profile: BarProfile,
    pub eps: f64,
    pub modes: Vec<QlMode>,
}

impl QlState {
    pub fn new(profile: BarProfile, eps: f64, modes: Vec<QlMode>) -> Result<Self> {
        let state = QlState {
            profile,
            eps,
            modes,
        };
        state.validate()?;
        Ok(state)
    }

    /// The profile as a gridded dispersion input.
    pub fn profile_g(&self) -> ProfileG {
        ProfileG::Gridded {
            grid: self.profile.grid,
            values: self.profile.values.clone(),
        }
    }

    pub fn t(&self) -> f64 {
        self.profile.time
    }

    /// Mass within `1e-10` of one, nonnegative amplitudes, finite
    /// accumulators, every active mode with a small residual against the
    /// current profile.
    pub fn validate(&self) -> Result<()> {
        let mass = self.profile.mass();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::MassDefect {
                defect: (mass - 1.0).abs(),
                tol: 1e-10,
            });
        }
        let g = self.profile_g();
        for (i, m) in self.modes.iter().enumerate() {
            if !(m.e0_sq >= 0.0) || !m.growth_integral.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "mode {i}: bad amplitude or accumulator"
                )));
            }
            if !m.clamped {
                let res = crate::dispersion::dispersion_function(&g, m.k, m.lambda)?.norm();
                if res > MODE_RESIDUAL_TOL {
                    return Err(Error::InvalidSpec(format!(
                        "mode {i} residual {res:e} exceeds {MODE_RESIDUAL_TOL:e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Quasilinear diffusion coefficient of the current state; clamped modes
/// contribute nothing, and an unclamped mode with a nonpositive growth rate
/// is an error.
pub fn ql_diffusion(state: &QlState, grid: crate::phase_space::VelocityGrid) -> Result<DiffusionField> {
    let eps2 = state.eps * state.eps;
    let mut values = vec![0.0; grid.nv];
    for (i, m) in state.modes.iter().enumerate() {
        if m.clamped {
            continue;
        }
        if m.lambda.re <= 0.0 {
            return Err(Error::InactiveGrowthRate {
                index: i,
                re: m.lambda.re,
            });
        }
        let weight = eps2 * m.e0_sq * m.lambda.re * (2.0 * m.growth_integral).exp();
        for (iv, d) in values.iter_mut().enumerate() {
            let denom = (m.lambda + Complex64::new(0.0, m.k * grid.v(iv))).norm_sqr();
            *d += weight / denom;
        }
    }
    Ok(DiffusionField::new(grid, values))
}

/// Outcome of one step, including any clamp events.
#[derive(Debug, Clone)]
pub struct QlStepReport {
    pub state: QlState,
    /// Indices of modes clamped during this step.
    pub newly_clamped: Vec<usize>,
}

/// One integrator step:
/// 1. build the diffusion coefficient,
/// 2. advance the profile with one conservative backward-Euler step,
/// 3. re-solve every active eigenvalue by Newton continuation against the
///    updated profile,
/// 4. accumulate the growth integrals by trapezoid,
/// 5. clamp any mode whose growth rate reached zero (Newton pressed
///    against the axis or converged below the clamp threshold).
pub fn ql_step(state: &QlState, dt: f64) -> Result<QlStepReport> {
    let max_growth = state
        .modes
        .iter()
        .filter(|m| !m.clamped)
        .map(|m| m.lambda.re)
        .fold(0.0_f64, f64::max);
    if dt * max_growth > 0.1 + 1e-12 {
        return Err(Error::StepConstraint(format!(
            "dt max(Re lambda) = {} > 0.1",
            dt * max_growth
        )));
    }
    let grid = state.profile.grid;
    let d = ql_diffusion(state, grid)?;
    let new_profile = step_diffusion(&state.profile, &d, dt, 1.0)?;
    let g_new = ProfileG::Gridded {
        grid,
        values: new_profile.values.clone(),
    };
    let mut modes = state.modes.clone();
    let mut newly_clamped = Vec::new();
    for (i, m) in modes.iter_mut().enumerate() {
        if m.clamped {
            continue;
        }
        match newton_root(&g_new, m.k, m.lambda, 1e-9, 40, 0.5) {
            Ok((lambda_new, _res)) => {
                let re_old = m.lambda.re;
                m.lambda = lambda_new;
                if lambda_new.re <= CLAMP_RE {
                    m.growth_integral += 0.5 * (re_old + lambda_new.re.max(0.0)) * dt;
                    m.clamped = true;
                    m.clamp_time = Some(new_profile.time);
                    newly_clamped.push(i);
                } else {
                    m.growth_integral += 0.5 * (re_old + lambda_new.re) * dt;
                }
            }
            Err(Error::NewtonDiverged {
                last_re,
                last_im,
                residual,
            }) => {
                if last_re < 5e-3 {
                    // the root has pressed into the half plane boundary:
                    // saturation
                    m.growth_integral += 0.5 * m.lambda.re * dt;
                    m.lambda = Complex64::new(0.0, last_im);
                    m.clamped = true;
                    m.clamp_time = Some(new_profile.time);
                    newly_clamped.push(i);
                } else {
                    return Err(Error::NewtonDiverged {
                        last_re,
                        last_im,
                        residual,
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(QlStepReport {
        state: QlState {
            profile: new_profile,
            eps: state.eps,
            modes,
        },
        newly_clamped,
    })
}

/// Audit an active mode by winding count in a small rectangle around its
/// current eigenvalue. Returns whether exactly one root is enclosed.
pub fn audit_mode(state: &QlState, index: usize) -> Result<bool> {
    let m = &state.modes[index];
    if m.clamped {
        return Ok(true);
    }
    let g = state.profile_g();
    let re_pad = (0.5 * m.lambda.re).max(1e-3);
    let rect = Rect::new(
        (m.lambda.re - re_pad).max(1e-6),
        m.lambda.re + re_pad + 0.05,
        m.lambda.im - 0.3,
        m.lambda.im + 0.3,
    );
    Ok(winding_number(&g, m.k, rect)? == 1)
}

/// Record of a quasilinear run.
#[derive(Debug, Clone)]
pub struct QlRunRecord {
    pub times: Vec<f64>,
    /// Eigenvalue trajectory per mode, sampled every step.
    pub lambdas: Vec<Vec<Complex64>>,
    pub growth_integrals: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
    pub l2: Vec<f64>,
    /// Profile snapshots (sparse).
    pub profiles: Vec<BarProfile>,
    /// Diffusion-coefficient snapshots taken with the profiles.
    pub diffusion_snapshots: Vec<(f64, DiffusionField)>,
    /// First time each mode clamped, if it did.
    pub clamp_times: Vec<Option<f64>>,
    /// False if any periodic winding audit failed to isolate the mode.
    pub audits_clean: bool,
    pub final_state: QlState,
}

impl QlRunRecord {
    /// CSV of eigenvalue trajectories: `t,re_0,im_0,growth_0,...`.
    pub fn write_lambda_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t")?;
        for i in 0..self.lambdas.len() {
            write!(w, ",re_{i},im_{i},growth_{i}")?;
        }
        writeln!(w)?;
        for (n, &t) in self.times.iter().enumerate() {
            write!(w, "{t}")?;
            for (series, growth) in self.lambdas.iter().zip(&self.growth_integrals) {
                write!(w, ",{},{},{}", series[n].re, series[n].im, growth[n])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Integrate until `t_final` or until every mode has clamped, with the
/// winding audit every `audit_every` steps (0 disables).
pub fn ql_run(
    initial: QlState,
    t_final: f64,
    dt: f64,
    snapshot_every: usize,
    audit_every: usize,
) -> Result<QlRunRecord> {
    let n_modes = initial.modes.len();
    let grid = initial.profile.grid;
    let mut state = initial;
    let mut times = vec![state.t()];
    let mut lambdas: Vec<Vec<Complex64>> =
        (0..n_modes).map(|i| vec![state.modes[i].lambda]).collect();
    let mut growth: Vec<Vec<f64>> = (0..n_modes)
        .map(|i| vec![state.modes[i].growth_integral])
        .collect();
    let mut mass = vec![state.profile.mass()];
    let mut l2 = vec![state.profile.l2_norm()];
    let mut profiles = vec![state.profile.clone()];
    let mut diffusion_snapshots = vec![(state.t(), ql_diffusion(&state, grid)?)];
    let mut audits_clean = true;
    let mut step_idx = 0usize;
    while state.t() < t_final - 1e-12 && state.modes.iter().any(|m| !m.clamped) {
        let step_dt = dt.min(t_final - state.t());
        let report = ql_step(&state, step_dt)?;
        state = report.state;
        step_idx += 1;
        times.push(state.t());
        for (i, m) in state.modes.iter().enumerate() {
            lambdas[i].push(m.lambda);
            growth[i].push(m.growth_integral);
        }
        mass.push(state.profile.mass());
        l2.push(state.profile.l2_norm());
        if snapshot_every > 0 && step_idx % snapshot_every == 0 {
            profiles.push(state.profile.clone());
            diffusion_snapshots.push((state.t(), ql_diffusion(&state, grid)?));
        }
        if audit_every > 0 && step_idx % audit_every == 0 {
            for i in 0..n_modes {
                if !audit_mode(&state, i)? {
                    audits_clean = false;
                }
            }
        }
    }
    profiles.push(state.profile.clone());
    diffusion_snapshots.push((state.t(), ql_diffusion(&state, grid)?));
    let clamp_times = state.modes.iter().map(|m| m.clamp_time).collect();
    Ok(QlRunRecord {
        times,
        lambdas,
        growth_integrals: growth,
        mass,
        l2,
        profiles,
        diffusion_snapshots,
        clamp_times,
        audits_clean,
        final_state: state,
    })
}
