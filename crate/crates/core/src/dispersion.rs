//! Linear theory of the spatially homogeneous states: the dispersion
//! kernel, eigenmode roots located by the argument principle and polished by
//! Newton, Penrose-type stability margins, and exponential decay-rate
//! fitting for damping experiments.
//!
//! Any nonnegative unit-mass profile `G(v)` is a stationary state of the
//! self-consistent system; its linear modes at wavenumber `k` are the zeros
//! in `lambda` of
//!
//! `Xi(lambda, k) = 1 + K_G(lambda, k)`,
//! `K_G(lambda, k) = int_0^inf exp(-lambda s) s (F_v G)(k s) ds`,
//!
//! where `F_v G` is the Fourier transform in `v`. For closed-form profiles
//! (Gaussian mixtures) the `s`-integral converges for every complex
//! `lambda`, which is what makes continuation into `Re lambda <= 0` (Landau
//! roots) possible. Gridded profiles carry noise that the factor
//! `exp(-lambda s)` amplifies for `Re lambda < 0`, so continuation is
//! refused there.

use crate::phase_space::VelocityGrid;
use crate::quadrature::{adaptive_oscillatory, trapezoid};
use crate::stats::{line_fit, median};
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// A spatially homogeneous velocity profile.
#[derive(Debug, Clone)]
pub enum ProfileG {
    /// `G(v) = exp(-v^2 / 2 sigma^2) / sqrt(2 pi sigma^2)`.
    Maxwellian { sigma: f64 },
    /// Weighted sum of Gaussians `(weight, center, sigma)`; weights should
    /// sum to one.
    GaussianMixture { components: Vec<(f64, f64, f64)> },
    /// Samples on a velocity grid, trapezoid-normalized.
    Gridded { grid: VelocityGrid, values: Vec<f64> },
}

impl ProfileG {
    /// The canonical two-population unstable profile: a bulk Maxwellian
    /// plus a drifting minority beam.
    pub fn bump_on_tail(bulk_weight: f64, beam_center: f64, beam_sigma: f64) -> Self {
        ProfileG::GaussianMixture {
            components: vec![
                (bulk_weight, 0.0, 1.0),
                (1.0 - bulk_weight, beam_center, beam_sigma),
            ],
        }
    }

    pub fn is_closed_form(&self) -> bool {
        !matches!(self, ProfileG::Gridded { .. })
    }

    pub fn eval(&self, v: f64) -> f64 {
        match self {
            ProfileG::Maxwellian { sigma } => gaussian(v, 0.0, *sigma),
            ProfileG::GaussianMixture { components } => components
                .iter()
                .map(|&(w, c, s)| w * gaussian(v, c, s))
                .sum(),
            ProfileG::Gridded { grid, values } => {
                // linear interpolation, zero outside
                let u = (v + grid.v_max) / grid.dv();
                if u < 0.0 || u > (grid.nv - 1) as f64 {
                    return 0.0;
                }
                let i = (u.floor() as usize).min(grid.nv - 2);
                let t = u - i as f64;
                values[i] * (1.0 - t) + values[i + 1] * t
            }
        }
    }

    /// Analytic derivative for closed forms; centered differences on grids.
    pub fn derivative(&self, v: f64) -> f64 {
        match self {
            ProfileG::Maxwellian { sigma } => -v / (sigma * sigma) * gaussian(v, 0.0, *sigma),
            ProfileG::GaussianMixture { components } => components
                .iter()
                .map(|&(w, c, s)| -w * (v - c) / (s * s) * gaussian(v, c, s))
                .sum(),
            ProfileG::Gridded { grid, .. } => {
                let h = grid.dv();
                (self.eval(v + h) - self.eval(v - h)) / (2.0 * h)
            }
        }
    }

    pub fn mass(&self) -> f64 {
        match self {
            ProfileG::Maxwellian { .. } => 1.0,
            ProfileG::GaussianMixture { components } => components.iter().map(|c| c.0).sum(),
            ProfileG::Gridded { grid, values } => trapezoid(values, grid.dv()),
        }
    }

    /// Validate nonnegativity and unit mass (tolerance `1e-8`).
    pub fn validate(&self) -> Result<()> {
        let m = self.mass();
        if (m - 1.0).abs() > 1e-8 {
            return Err(Error::MassDefect {
                defect: (m - 1.0).abs(),
                tol: 1e-8,
            });
        }
        let neg = match self {
            ProfileG::Maxwellian { sigma } => *sigma <= 0.0,
            ProfileG::GaussianMixture { components } => {
                components.iter().any(|&(w, _, s)| w < 0.0 || s <= 0.0)
            }
            ProfileG::Gridded { values, .. } => values.iter().any(|&g| g < -1e-12),
        };
        if neg {
            return Err(Error::InvalidSpec("profile must be nonnegative".into()));
        }
        Ok(())
    }

    /// Fourier transform `F_v G(xi) = int G(v) exp(-i v xi) dv`.
    pub fn fourier(&self, xi: f64) -> Complex64 {
        match self {
            ProfileG::Maxwellian { sigma } => {
                Complex64::new((-0.5 * sigma * sigma * xi * xi).exp(), 0.0)
            }
            ProfileG::GaussianMixture { components } => components
                .iter()
                .map(|&(w, c, s)| {
                    Complex64::new(0.0, -c * xi).exp() * w * (-0.5 * s * s * xi * xi).exp()
                })
                .sum(),
            ProfileG::Gridded { grid, values } => {
                let dv = grid.dv();
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, &g) in values.iter().enumerate() {
                    let w = if i == 0 || i == grid.nv - 1 { 0.5 } else { 1.0 };
                    acc += w * g * Complex64::new(0.0, -grid.v(i) * xi).exp();
                }
                acc * dv
            }
        }
    }

    /// Upper envelope of `|F_v G|` used to truncate the kernel integral.
    fn transform_envelope(&self, xi: f64) -> f64 {
        match self {
            ProfileG::Maxwellian { sigma } => (-0.5 * sigma * sigma * xi * xi).exp(),
            ProfileG::GaussianMixture { components } => {
                let s_min = components
                    .iter()
                    .map(|c| c.2)
                    .fold(f64::INFINITY, f64::min);
                (-0.5 * s_min * s_min * xi * xi).exp()
            }
            ProfileG::Gridded { .. } => self.fourier(xi).norm(),
        }
    }

    /// Largest usable `s` in the kernel integral before grid aliasing (for
    /// gridded profiles).
    fn alias_cap(&self, k: f64) -> f64 {
        match self {
            ProfileG::Gridded { grid, .. } => 0.9 * PI / (k.abs() * grid.dv()),
            _ => f64::INFINITY,
        }
    }

    /// Typical oscillation frequency of `F_v G(k s)` in `s`.
    fn center_scale(&self) -> f64 {
        match self {
            ProfileG::Maxwellian { .. } => 0.0,
            ProfileG::GaussianMixture { components } => components
                .iter()
                .map(|c| c.1.abs())
                .fold(0.0, f64::max),
            ProfileG::Gridded { grid, .. } => grid.v_max,
        }
    }

    /// Width scale (smallest sigma, or grid-resolved width).
    fn width_scale(&self) -> f64 {
        match self {
            ProfileG::Maxwellian { sigma } => *sigma,
            ProfileG::GaussianMixture { components } => components
                .iter()
                .map(|c| c.2)
                .fold(f64::INFINITY, f64::min),
            ProfileG::Gridded { grid, .. } => 4.0 * grid.dv(),
        }
    }
}

fn gaussian(v: f64, c: f64, sigma: f64) -> f64 {
    let u = (v - c) / sigma;
    (-0.5 * u * u).exp() / ((2.0 * PI).sqrt() * sigma)
}

/// Find where the integrand envelope `exp(-Re lambda s) s |F(k s)|` has
/// fallen below `1e-16` of its running peak, scanning from zero.
fn truncation_point(g: &ProfileG, k: f64, re_lambda: f64) -> Result<f64> {
    let cap = g.alias_cap(k).min(1e5);
    let scale = 1.0 / (k.abs() * g.width_scale()).max(1e-3);
    let ds = (scale / 32.0).min(cap / 64.0);
    let mut peak = 0.0_f64;
    let mut s = ds;
    while s <= cap {
        let env = (-re_lambda * s).exp() * s * g.transform_envelope(k * s);
        peak = peak.max(env);
        if env < 1e-16 * peak && peak > 0.0 {
            return Ok(s);
        }
        s += ds;
    }
    if g.is_closed_form() {
        // Gaussian decay always wins eventually; reaching the cap means a
        // pathological parameter combination
        return Err(Error::OutsideStrip(format!(
            "kernel integrand at k = {k}, Re lambda = {re_lambda} not negligible by s = {cap}"
        )));
    }
    Err(Error::OutsideStrip(format!(
        "gridded profile: integrand still {peak:e}-scale at the alias cap {cap} \
         (k = {k}, Re lambda = {re_lambda})"
    )))
}

/// Dispersion kernel `K_G(lambda, k)`.
pub fn kernel(g: &ProfileG, k: f64, lambda: Complex64) -> Result<Complex64> {
    kernel_impl(g, k, lambda, 1)
}

/// Derivative `d K_G / d lambda = -int exp(-lambda s) s^2 F_v G(k s) ds`.
pub fn kernel_derivative(g: &ProfileG, k: f64, lambda: Complex64) -> Result<Complex64> {
    kernel_impl(g, k, lambda, 2).map(|v| -v)
}

fn kernel_impl(g: &ProfileG, k: f64, lambda: Complex64, power: i32) -> Result<Complex64> {
    if k == 0.0 {
        return Err(Error::InvalidSpec("kernel needs k != 0".into()));
    }
    if !g.is_closed_form() && lambda.re < -1e-12 {
        return Err(Error::OutsideStrip(format!(
            "Re lambda = {} < 0 with a gridded profile",
            lambda.re
        )));
    }
    let s_cut = truncation_point(g, k, lambda.re)?;
    let freq = lambda.im.abs() + k.abs() * g.center_scale();
    let f = |s: f64| (-lambda * s).exp() * s.powi(power) * g.fourier(k * s);
    let (val, _err) = adaptive_oscillatory(&f, 0.0, s_cut, freq, 1e-12, 1e-14);
    Ok(val)
}

/// The dispersion function `Xi(lambda, k) = 1 + K_G(lambda, k)` whose zeros
/// are the linear eigenmodes.
pub fn dispersion_function(g: &ProfileG, k: f64, lambda: Complex64) -> Result<Complex64> {
    Ok(Complex64::new(1.0, 0.0) + kernel(g, k, lambda)?)
}

/// Velocity-space form of the same function,
/// `1 - (i k/|k|^2) int G'(v) / (lambda + i k v) dv`, valid for
/// `Re lambda > 0`. Used as a cross-check of the time-integral form.
pub fn dispersion_function_velocity_form(
    g: &ProfileG,
    k: f64,
    lambda: Complex64,
) -> Result<Complex64> {
    if lambda.re <= 0.0 {
        return Err(Error::OutsideStrip(
            "velocity-integral form requires Re lambda > 0".into(),
        ));
    }
    let (lo, hi) = match g {
        ProfileG::Maxwellian { sigma } => (-10.0 * sigma, 10.0 * sigma),
        ProfileG::GaussianMixture { components } => {
            let lo = components
                .iter()
                .map(|c| c.1 - 10.0 * c.2)
                .fold(f64::INFINITY, f64::min);
            let hi = components
                .iter()
                .map(|c| c.1 + 10.0 * c.2)
                .fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        }
        ProfileG::Gridded { grid, .. } => (-grid.v_max, grid.v_max),
    };
    let f = |v: f64| {
        Complex64::new(g.derivative(v), 0.0) / (lambda + Complex64::new(0.0, k * v))
    };
    let freq = (k.abs() / lambda.re.max(1e-3)).min(1e4);
    let (integral, _) = adaptive_oscillatory(&f, lo, hi, freq, 1e-11, 1e-14);
    Ok(Complex64::new(1.0, 0.0) - Complex64::new(0.0, k / (k * k)) * integral)
}

/// A located eigenmode.
#[derive(Debug, Clone, Copy)]
pub struct DispersionRoot {
    pub k: f64,
    pub lambda: Complex64,
    /// `|Xi(lambda, k)|` at the returned point.
    pub residual: f64,
    /// Simple roots only; kept for forward compatibility.
    pub multiplicity: u32,
}

/// Rectangle in the `lambda` plane.
#[derive(Debug, Clone, Copy)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        assert!(re_min < re_max && im_min < im_max);
        Rect {
            re_min,
            re_max,
            im_min,
            im_max,
        }
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }

    fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.re_min + self.re_max),
            0.5 * (self.im_min + self.im_max),
        )
    }

    fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re_min - slack
            && z.re <= self.re_max + slack
            && z.im >= self.im_min - slack
            && z.im <= self.im_max + slack
    }

    fn diameter(&self) -> f64 {
        ((self.re_max - self.re_min).powi(2) + (self.im_max - self.im_min).powi(2)).sqrt()
    }

    fn split(&self) -> (Rect, Rect) {
        // slightly asymmetric split so a root sitting exactly on the
        // midline of a symmetric problem does not land on the contour
        let frac = 0.53;
        if self.re_max - self.re_min >= self.im_max - self.im_min {
            let mid = self.re_min + frac * (self.re_max - self.re_min);
            (
                Rect { re_max: mid, ..*self },
                Rect { re_min: mid, ..*self },
            )
        } else {
            let mid = self.im_min + frac * (self.im_max - self.im_min);
            (
                Rect { im_max: mid, ..*self },
                Rect { im_min: mid, ..*self },
            )
        }
    }
}

/// Winding number of `Xi(., k)` around the rectangle boundary.
pub fn winding_number(g: &ProfileG, k: f64, rect: Rect) -> Result<i64> {
    let corners = rect.corners();
    let mut total = 0.0;
    let mut w_start = dispersion_function(g, k, corners[0])?;
    let mut z_prev = corners[0];
    let mut w_prev = w_start;
    for i in 0..4 {
        let z_next = corners[(i + 1) % 4];
        let w_next = if i == 3 {
            w_start
        } else {
            dispersion_function(g, k, z_next)?
        };
        total += arg_change(g, k, z_prev, w_prev, z_next, w_next, 0)?;
        z_prev = z_next;
        w_prev = w_next;
        if i == 3 {
            w_start = w_next;
        }
    }
    let winding = total / (2.0 * PI);
    let rounded = winding.round();
    if (winding - rounded).abs() > 0.25 {
        return Err(Error::InvalidSpec(format!(
            "non-integer winding number {winding:.3} over the contour"
        )));
    }
    Ok(rounded as i64)
}

fn arg_change(
    g: &ProfileG,
    k: f64,
    za: Complex64,
    wa: Complex64,
    zb: Complex64,
    wb: Complex64,
    depth: u32,
) -> Result<f64> {
    if wa.norm() < 1e-10 || wb.norm() < 1e-10 {
        return Err(Error::InvalidSpec(format!(
            "dispersion function vanishes on the contour near {za}; move the rectangle"
        )));
    }
    // safe to accept the principal-value increment only when the chord is
    // short against the distance to the origin: a hidden 2 pi loop would
    // need a chord at least twice that distance
    let chord = (wb - wa).norm();
    let safe = chord <= 0.4 * wa.norm().min(wb.norm());
    if safe && depth >= 3 {
        return Ok((wb / wa).arg());
    }
    if depth >= 32 {
        return Ok((wb / wa).arg());
    }
    let zm = 0.5 * (za + zb);
    let wm = dispersion_function(g, k, zm)?;
    Ok(arg_change(g, k, za, wa, zm, wm, depth + 1)?
        + arg_change(g, k, zm, wm, zb, wb, depth + 1)?)
}

/// Newton polish from a seed; step halving when the residual fails to
/// decrease, iterates confined to `|z - seed| <= leash`. Converges to
/// `|Xi| <= tol` or reports the last iterate.
pub fn newton_root(
    g: &ProfileG,
    k: f64,
    seed: Complex64,
    tol: f64,
    max_iter: usize,
    leash: f64,
) -> Result<(Complex64, f64)> {
    let mut z = seed;
    let mut f = dispersion_function(g, k, z)?;
    for _ in 0..max_iter {
        if f.norm() <= tol {
            return Ok((z, f.norm()));
        }
        let df = kernel_derivative(g, k, z)?;
        if df.norm() < 1e-300 {
            break;
        }
        let full = f / df;
        let mut step = 1.0;
        loop {
            let z_try = z - step * full;
            // keep gridded evaluations inside their half plane and every
            // iterate within the leash of the seed
            let valid = (g.is_closed_form() || z_try.re > 0.0)
                && (z_try - seed).norm() <= leash;
            if valid {
                if let Ok(f_try) = dispersion_function(g, k, z_try) {
                    if f_try.norm() < f.norm() || step < 1.0 / 64.0 {
                        z = z_try;
                        f = f_try;
                        break;
                    }
                }
            }
            step *= 0.5;
            if step < 1.0 / 1024.0 {
                return Err(Error::NewtonDiverged {
                    last_re: z.re,
                    last_im: z.im,
                    residual: f.norm(),
                });
            }
        }
    }
    if f.norm() <= tol {
        Ok((z, f.norm()))
    } else {
        Err(Error::NewtonDiverged {
            last_re: z.re,
            last_im: z.im,
            residual: f.norm(),
        })
    }
}

const ROOT_RESIDUAL_TOL: f64 = 1e-9;

/// Enumerate the simple zeros of the dispersion function inside a
/// rectangle: argument-principle counting, rectangle subdivision down to
/// single-root cells, then Newton polish. Errors if the converged-root
/// count disagrees with the winding count.
pub fn find_roots(g: &ProfileG, k: f64, rect: Rect) -> Result<Vec<DispersionRoot>> {
    let total = winding_number(g, k, rect)?;
    if total < 0 {
        return Err(Error::RootCountMismatch {
            winding: 0,
            newton: total.unsigned_abs() as usize,
        });
    }
    if total == 0 {
        return Ok(Vec::new());
    }
    // isolate single-root cells by bisection
    let mut work = vec![(rect, total)];
    let mut singles: Vec<Rect> = Vec::new();
    let mut splits = 0usize;
    while let Some((cell, count)) = work.pop() {
        if count == 1 {
            singles.push(cell);
            continue;
        }
        splits += 1;
        if splits > 200 {
            // could not isolate: likely a multiple root
            return Err(Error::RootCountMismatch {
                winding: total as usize,
                newton: singles.len(),
            });
        }
        let (a, b) = cell.split();
        let ca = winding_number(g, k, a)?;
        let cb = count - ca;
        if ca > 0 {
            work.push((a, ca));
        }
        if cb > 0 {
            work.push((b, cb));
        }
    }
    let mut roots: Vec<DispersionRoot> = Vec::new();
    for cell in singles {
        // bisect the bracket until the Newton seed is close to the root
        let mut cell = cell;
        for _ in 0..24 {
            if cell.diameter() <= 0.05 * (1.0 + cell.center().norm()) {
                break;
            }
            let (a, b) = cell.split();
            match winding_number(g, k, a) {
                Ok(1) => cell = a,
                Ok(_) => cell = b,
                // contour too close to the root: stop refining
                Err(_) => break,
            }
        }
        let leash = 10.0 * cell.diameter() + 0.1;
        let (lambda, residual) =
            newton_root(g, k, cell.center(), ROOT_RESIDUAL_TOL, 60, leash)?;
        if !rect.contains(lambda, 1e-6) {
            return Err(Error::RootCountMismatch {
                winding: total as usize,
                newton: roots.len(),
            });
        }
        let duplicate = roots
            .iter()
            .any(|r| (r.lambda - lambda).norm() < 1e-7 * (1.0 + lambda.norm()));
        if !duplicate {
            roots.push(DispersionRoot {
                k,
                lambda,
                residual,
                multiplicity: 1,
            });
        }
    }
    if roots.len() != total as usize {
        return Err(Error::RootCountMismatch {
            winding: total as usize,
            newton: roots.len(),
        });
    }
    roots.sort_by(|a, b| b.lambda.re.partial_cmp(&a.lambda.re).unwrap());
    Ok(roots)
}

/// Result of the stability sweep.
#[derive(Debug, Clone)]
pub struct StabilityMargin {
    /// `inf |1 + K_G|` over `Re lambda >= 0` and the swept wavenumbers;
    /// zero if an unstable root exists.
    pub kappa: f64,
    pub unstable_root: Option<DispersionRoot>,
}

/// Uniform stability margin over wavenumbers `k = m k0`, `m = 1..=k_max`.
///
/// For a zero-free right half plane the minimum modulus is attained on the
/// boundary `Re lambda = 0` (the `|lambda| -> inf` limit is 1), so the
/// margin is sampled there on an adaptively refined `Im lambda` grid. Any
/// unstable root found first short-circuits to zero margin.
pub fn stability_margin(g: &ProfileG, k0: f64, k_max: usize) -> Result<StabilityMargin> {
    if !g.is_closed_form() {
        return Err(Error::OutsideStrip(
            "stability margin needs a closed-form profile".into(),
        ));
    }
    let mut kappa = 1.0_f64; // the |lambda| -> inf limit
    for m in 1..=k_max {
        let k = m as f64 * k0;
        let omega_span = k.abs() * (g.center_scale() + 8.0) + 2.0;
        let rect = Rect::new(1e-6, 2.5, -omega_span, omega_span);
        let roots = find_roots(g, k, rect)?;
        if let Some(root) = roots.into_iter().next() {
            return Ok(StabilityMargin {
                kappa: 0.0,
                unstable_root: Some(root),
            });
        }
        kappa = kappa.min(boundary_minimum(g, k, omega_span)?);
    }
    Ok(StabilityMargin {
        kappa,
        unstable_root: None,
    })
}

/// Minimum of `|Xi(i omega, k)|` over `omega in [-span, span]`, refined
/// until stable to 1%.
fn boundary_minimum(g: &ProfileG, k: f64, span: f64) -> Result<f64> {
    let eval = |omega: f64| dispersion_function(g, k, Complex64::new(0.0, omega)).map(|w| w.norm());
    let mut n = 129usize;
    let mut prev_min = f64::INFINITY;
    loop {
        let mut min_val = f64::INFINITY;
        for i in 0..n {
            let omega = -span + 2.0 * span * i as f64 / (n - 1) as f64;
            min_val = min_val.min(eval(omega)?);
        }
        if (prev_min - min_val).abs() <= 0.01 * min_val || n > 1 << 14 {
            return Ok(min_val);
        }
        prev_min = min_val;
        n = n * 2 - 1;
    }
}

/// Exponential-decay fit of a positive time series.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    /// Fitted `d(log W)/dt`.
    pub rate: f64,
    /// Time window actually used.
    pub window: (f64, f64),
    pub r_squared: f64,
    pub n_points: usize,
}

/// Fit `log W` against `t` over an automatically selected window that skips
/// the initial transient and any late floor: the window is the longest
/// contiguous run where the local slope stays within 20% of the median
/// slope. Oscillatory envelopes are handled by fitting the sequence of
/// local maxima when enough of them exist.
pub fn landau_decay_fit(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::Mismatch("times/values length".into()));
    }
    if times.len() < 20 {
        return Err(Error::NoDecayWindow("need at least 20 samples".into()));
    }
    if values.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::NoDecayWindow("series must be positive".into()));
    }
    // peak series if the signal oscillates, else all samples
    let mut peak_idx: Vec<usize> = Vec::new();
    for i in 1..values.len() - 1 {
        if values[i] > values[i - 1] && values[i] >= values[i + 1] {
            peak_idx.push(i);
        }
    }
    let (ts, ws): (Vec<f64>, Vec<f64>) = if peak_idx.len() >= 6 {
        (
            peak_idx.iter().map(|&i| times[i]).collect(),
            peak_idx.iter().map(|&i| values[i]).collect(),
        )
    } else {
        (times.to_vec(), values.to_vec())
    };
    let logs: Vec<f64> = ws.iter().map(|w| w.ln()).collect();
    let slopes: Vec<f64> = ts
        .windows(2)
        .zip(logs.windows(2))
        .map(|(t, l)| (l[1] - l[0]) / (t[1] - t[0]))
        .collect();
    let med = median(&slopes);
    let log_span = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - logs.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_span = ts[ts.len() - 1] - ts[0];
    if med.abs() * t_span < 0.2 * log_span.max(1e-2) || med.abs() < 1e-12 {
        return Err(Error::NoDecayWindow(format!(
            "median local slope {med:e} does not describe an exponential trend"
        )));
    }
    let good: Vec<bool> = slopes
        .iter()
        .map(|s| (s - med).abs() <= 0.2 * med.abs())
        .collect();
    // longest contiguous run of good slopes
    let mut best = (0usize, 0usize);
    let mut run_start = 0usize;
    let mut in_run = false;
    for (i, &ok) in good.iter().enumerate() {
        if ok && !in_run {
            run_start = i;
            in_run = true;
        }
        if !ok && in_run {
            if i - run_start > best.1 - best.0 {
                best = (run_start, i);
            }
            in_run = false;
        }
    }
    if in_run && good.len() - run_start > best.1 - best.0 {
        best = (run_start, good.len());
    }
    // slope i connects points i and i+1
    let lo = best.0;
    let hi = best.1; // inclusive point index hi
    if hi - lo + 1 < 5 {
        return Err(Error::NoDecayWindow(format!(
            "longest stable-slope run has only {} points",
            hi - lo + 1
        )));
    }
    let fit = line_fit(&ts[lo..=hi], &logs[lo..=hi]);
    Ok(DecayFit {
        rate: fit.slope,
        window: (ts[lo], ts[hi]),
        r_squared: fit.r_squared,
        n_points: hi - lo + 1,
    })
}
