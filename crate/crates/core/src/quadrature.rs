//! Numerical integration: adaptive Gauss-Kronrod for smooth (possibly
//! oscillatory) complex integrands, trapezoid sums on uniform grids, and an
//! exact-carrier panel rule for integrals of the form
//! `int g(s) exp(i X s) ds` with piecewise-linear envelope `g`.

use num_complex::Complex64;

/// Kronrod-15 abscissae on `[0, 1]` side (symmetric).
const XK: [f64; 8] = [
    0.0,
    0.207_784_955_007_898_5,
    0.405_845_151_377_397_2,
    0.586_087_235_467_691_1,
    0.741_531_185_599_394_4,
    0.864_864_423_359_769_1,
    0.949_107_912_342_758_5,
    0.991_455_371_120_812_6,
];
const WK: [f64; 8] = [
    0.209_482_141_084_727_8,
    0.204_432_940_075_298_9,
    0.190_350_578_064_785_4,
    0.169_004_726_639_267_9,
    0.140_653_259_715_525_9,
    0.104_790_010_322_250_2,
    0.063_092_092_629_978_55,
    0.022_935_322_010_529_22,
];
/// Gauss-7 weights matching Kronrod nodes 0, 2, 4, 6.
const WG: [f64; 4] = [
    0.417_959_183_673_469_4,
    0.381_830_050_505_118_9,
    0.279_705_391_489_276_7,
    0.129_484_966_168_869_7,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let f0 = f(c);
    let mut kronrod = WK[0] * f0;
    let mut gauss = WG[0] * f0;
    for i in 1..8 {
        let fp = f(c + h * XK[i]);
        let fm = f(c - h * XK[i]);
        kronrod += WK[i] * (fp + fm);
        if i % 2 == 0 {
            gauss += WG[i / 2] * (fp + fm);
        }
    }
    let integral = kronrod * h;
    let err = (kronrod - gauss).norm() * h.abs();
    (integral, err)
}

/// Adaptive Gauss-Kronrod integration of a complex integrand over `[a, b]`.
///
/// Recursively bisects panels until the local Kronrod error estimate meets
/// the tolerance share. Returns the integral and an error estimate.
pub fn adaptive<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> (Complex64, f64) {
    // first pass to get a magnitude scale
    let (coarse, _) = gk15(f, a, b);
    let scale = coarse.norm().max(abs_tol);
    let mut total = Complex64::new(0.0, 0.0);
    let mut err_total = 0.0;
    let mut stack: Vec<(f64, f64, u32)> = vec![(a, b, 0)];
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err) = gk15(f, lo, hi);
        let tol_here = (rel_tol * scale.max(val.norm()) + abs_tol) * (hi - lo).abs()
            / (b - a).abs().max(f64::MIN_POSITIVE);
        if err <= tol_here || depth >= 50 || (hi - lo).abs() < 1e-300 {
            total += val;
            err_total += err;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    (total, err_total)
}

/// Adaptive integration with an initial uniform split, for integrands with a
/// known oscillation frequency: panels start no wider than half a period.
pub fn adaptive_oscillatory<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    freq: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> (Complex64, f64) {
    let span = (b - a).abs();
    let n_panels = ((span * freq.abs() / std::f64::consts::PI).ceil() as usize).clamp(1, 1 << 14);
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let h = (b - a) / n_panels as f64;
    for i in 0..n_panels {
        let lo = a + i as f64 * h;
        let hi = if i + 1 == n_panels { b } else { lo + h };
        let (v, e) = adaptive(f, lo, hi, rel_tol, abs_tol / n_panels as f64);
        total += v;
        err += e;
    }
    (total, err)
}

/// Trapezoid sum of uniformly spaced samples.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    dx * (0.5 * (values[0] + values[values.len() - 1]) + interior)
}

/// `phi1(z) = (exp(z) - 1)/z`, series-stabilized near zero.
fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for n in 1..30 {
            term *= z / (n + 1) as f64;
            sum += term;
            if term.norm() < 1e-18 {
                break;
            }
        }
        sum
    } else {
        (z.exp() - 1.0) / z
    }
}

/// `psi(z) = int_0^1 u exp(z u) du = (exp(z)(z - 1) + 1)/z^2`.
fn psi(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        // sum_n z^n / (n! (n + 2))
        let mut term = Complex64::new(1.0, 0.0); // z^n / n!
        let mut sum = term * 0.5;
        for n in 1..30 {
            term *= z / n as f64;
            let contrib = term / (n + 2) as f64;
            sum += contrib;
            if contrib.norm() < 1e-18 {
                break;
            }
        }
        sum
    } else {
        (z.exp() * (z - 1.0) + 1.0) / (z * z)
    }
}

/// Integral of a piecewise-linear envelope against a complex carrier:
/// given envelope samples `g` at uniform abscissae `s_j = s0 + j h`, computes
/// `int_{s0}^{s0 + (n-1) h} g(s) exp(i freq s) ds` exactly for the linear
/// interpolant of `g`.
pub fn filon_linear(g: &[Complex64], s0: f64, h: f64, freq: f64) -> Complex64 {
    let z = Complex64::new(0.0, freq * h);
    let p1 = phi1(z);
    let ps = psi(z);
    let step_phase = Complex64::new(0.0, freq * h).exp();
    let mut carrier = Complex64::new(0.0, freq * s0).exp();
    let mut total = Complex64::new(0.0, 0.0);
    for w in g.windows(2) {
        total += carrier * h * (w[0] * p1 + (w[1] - w[0]) * ps);
        carrier *= step_phase;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_integral() {
        let f = |x: f64| Complex64::new((-x * x / 2.0).exp(), 0.0);
        let (v, _) = adaptive(&f, -20.0, 20.0, 1e-12, 1e-300);
        assert!((v.re - (2.0 * PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn oscillatory_integral() {
        // int_0^10 exp(50 i x) dx
        let f = |x: f64| Complex64::new(0.0, 50.0 * x).exp();
        let (v, _) = adaptive_oscillatory(&f, 0.0, 10.0, 50.0, 1e-12, 1e-300);
        let exact = (Complex64::new(0.0, 500.0).exp() - 1.0) / Complex64::new(0.0, 50.0);
        assert!((v - exact).norm() < 1e-10);
    }

    #[test]
    fn trapezoid_linear_exact() {
        let vals: Vec<f64> = (0..11).map(|i| 3.0 * i as f64 + 1.0).collect();
        // int_0^10 (3x + 1) dx = 160
        assert!((trapezoid(&vals, 1.0) - 160.0).abs() < 1e-12);
    }

    #[test]
    fn filon_matches_constant_envelope() {
        // int_0^L exp(i X s) ds with unit envelope
        let x = 13.7;
        let n = 257;
        let h = 0.05;
        let g = vec![Complex64::new(1.0, 0.0); n];
        let v = filon_linear(&g, 0.0, h, x);
        let l = h * (n - 1) as f64;
        let exact = (Complex64::new(0.0, x * l).exp() - 1.0) / Complex64::new(0.0, x);
        assert!((v - exact).norm() < 1e-12);
    }

    #[test]
    fn filon_linear_envelope_exact() {
        // envelope g(s) = 2 - 0.3 s, carrier exp(i X s); compare against
        // high-accuracy adaptive quadrature
        let x = 7.3;
        let n = 41;
        let h = 0.1;
        let g: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new(2.0 - 0.3 * (j as f64 * h), 0.0))
            .collect();
        let v = filon_linear(&g, 0.0, h, x);
        let f = |s: f64| Complex64::new(2.0 - 0.3 * s, 0.0) * Complex64::new(0.0, x * s).exp();
        let (exact, _) = adaptive_oscillatory(&f, 0.0, h * (n - 1) as f64, x, 1e-13, 1e-300);
        assert!((v - exact).norm() < 1e-11);
    }
}
