//! Natural cubic splines on uniform grids and the conservative
//! semi-Lagrangian remap built on them.

/// Natural cubic spline through `n >= 2` samples at `x_j = x0 + j h`.
pub struct CubicSpline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    /// Second derivatives at the nodes (natural: zero at both ends).
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn fit(x0: f64, h: f64, y: &[f64]) -> Self {
        let n = y.len();
        assert!(n >= 2, "spline needs at least two samples");
        assert!(h > 0.0);
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system (1, 4, 1) for interior second derivatives
            let dim = n - 2;
            let mut diag = vec![4.0; dim];
            let mut rhs: Vec<f64> = (0..dim)
                .map(|i| 6.0 * (y[i] - 2.0 * y[i + 1] + y[i + 2]) / (h * h))
                .collect();
            for i in 1..dim {
                let w = 1.0 / diag[i - 1];
                diag[i] -= w;
                rhs[i] -= w * rhs[i - 1];
            }
            m[dim] = rhs[dim - 1] / diag[dim - 1];
            for i in (0..dim - 1).rev() {
                m[i + 1] = (rhs[i] - m[i + 2]) / diag[i];
            }
        }
        CubicSpline {
            x0,
            h,
            y: y.to_vec(),
            m,
        }
    }

    /// Evaluate the spline; queries outside the grid are clamped to the
    /// boundary values.
    pub fn eval_clamped(&self, x: f64) -> f64 {
        let n = self.y.len();
        let u = (x - self.x0) / self.h;
        if u <= 0.0 {
            return self.y[0];
        }
        if u >= (n - 1) as f64 {
            return self.y[n - 1];
        }
        let i = (u.floor() as usize).min(n - 2);
        let t = u - i as f64;
        let s = 1.0 - t;
        self.y[i] * s
            + self.y[i + 1] * t
            + (self.h * self.h / 6.0)
                * ((s * s * s - s) * self.m[i] + (t * t * t - t) * self.m[i + 1])
    }
}

/// Conservative semi-Lagrangian shift of node values by a constant
/// displacement `delta`, i.e. a remap of `f(v - delta)` onto the same grid.
///
/// Node values are treated as cell averages over cells of width `h` centered
/// at the nodes; the cumulative primitive is interpolated with a natural
/// cubic spline and differenced back. The total (midpoint-rule) mass is
/// preserved exactly as long as the support stays away from the domain ends,
/// because the flux telescopes.
pub fn conservative_shift(f: &[f64], h: f64, delta: f64) -> Vec<f64> {
    let n = f.len();
    // primitive at cell edges e_j = (j - 1/2) h, j = 0..=n
    let mut p = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    p.push(0.0);
    for &fi in f {
        acc += fi * h;
        p.push(acc);
    }
    let spline = CubicSpline::fit(-0.5 * h, h, &p);
    let mut out = Vec::with_capacity(n);
    let mut prev = spline.eval_clamped(-0.5 * h - delta);
    for i in 0..n {
        let next = spline.eval_clamped((i as f64 + 0.5) * h - delta);
        out.push((next - prev) / h);
        prev = next;
    }
    out
}
