//! Phase-space grids on the periodic slab `[0, L) x [-v_max, v_max]`, the
//! distribution container, exact spectral free-streaming, the FFT Poisson
//! solver with neutralizing background, and x-averaging diagnostics.
//!
//! Quadrature conventions: integrals in `x` are plain means over the uniform
//! periodic grid (exact midpoint rule) normalized by the domain length, so a
//! unit-mass distribution has `mass() == 1` regardless of `L`. Integrals in
//! `v` use the trapezoid rule, which is spectrally accurate for smooth
//! compactly supported integrands.

use crate::fft::{bin_mode, fft_in_place, forward_coefficients, ifft_in_place, inverse_real};
use crate::quadrature::trapezoid;
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::{BufRead, Read, Write};

/// Tensor grid on `[0, L) x [-v_max, v_max]`.
///
/// `x` nodes are `x_j = j L / nx` (periodic, `nx` even); `v` nodes are
/// `v_i = -v_max + i dv` with `dv = 2 v_max / (nv - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub nx: usize,
    pub nv: usize,
    pub v_max: f64,
    /// Spatial period; defaults to `2 pi` so integer Fourier modes carry
    /// integer wavenumbers.
    pub length: f64,
}

impl PhaseSpaceGrid {
    /// Grid on the standard torus of length `2 pi`.
    pub fn new(nx: usize, nv: usize, v_max: f64) -> Result<Self> {
        Self::with_length(nx, nv, v_max, TAU)
    }

    /// Grid on a torus of length `length`; Fourier modes carry wavenumbers
    /// `2 pi m / length`.
    pub fn with_length(nx: usize, nv: usize, v_max: f64, length: f64) -> Result<Self> {
        if nx < 4 || nx % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "nx must be even and >= 4, got {nx}"
            )));
        }
        if nv < 8 {
            return Err(Error::InvalidGrid(format!("nv must be >= 8, got {nv}")));
        }
        if !(v_max > 0.0) {
            return Err(Error::InvalidGrid(format!("v_max must be > 0, got {v_max}")));
        }
        if !(length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "length must be > 0, got {length}"
            )));
        }
        Ok(PhaseSpaceGrid {
            nx,
            nv,
            v_max,
            length,
        })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.v_max / (self.nv - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    pub fn v(&self, i: usize) -> f64 {
        -self.v_max + i as f64 * self.dv()
    }

    /// Fundamental wavenumber `2 pi / L`.
    pub fn k0(&self) -> f64 {
        TAU / self.length
    }

    /// Physical wavenumber of FFT bin `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        self.k0() * bin_mode(j, self.nx) as f64
    }

    pub fn v_nodes(&self) -> Vec<f64> {
        (0..self.nv).map(|i| self.v(i)).collect()
    }
}

/// Distribution function `f(x, v)` sampled at the grid nodes, stored row
/// major with one row per `v` node.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub grid: PhaseSpaceGrid,
    values: Vec<f64>,
}

impl Distribution {
    pub fn from_fn(grid: PhaseSpaceGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.nx * grid.nv);
        for i in 0..grid.nv {
            let v = grid.v(i);
            for j in 0..grid.nx {
                values.push(f(grid.x(j), v));
            }
        }
        Distribution { grid, values }
    }

    pub fn from_values(grid: PhaseSpaceGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nx * grid.nv {
            return Err(Error::InvalidDistribution(format!(
                "expected {} values, got {}",
                grid.nx * grid.nv,
                values.len()
            )));
        }
        Ok(Distribution { grid, values })
    }

    #[inline]
    pub fn get(&self, ix: usize, iv: usize) -> f64 {
        self.values[iv * self.grid.nx + ix]
    }

    #[inline]
    pub fn row(&self, iv: usize) -> &[f64] {
        &self.values[iv * self.grid.nx..(iv + 1) * self.grid.nx]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Total mass `(1/L) int f dx dv`: mean over `x`, trapezoid in `v`.
    pub fn mass(&self) -> f64 {
        let nx = self.grid.nx as f64;
        let row_means: Vec<f64> = (0..self.grid.nv)
            .map(|iv| self.row(iv).iter().sum::<f64>() / nx)
            .collect();
        trapezoid(&row_means, self.grid.dv())
    }

    /// `L^2` norm with the same measure as [`Self::mass`].
    pub fn l2_norm(&self) -> f64 {
        let nx = self.grid.nx as f64;
        let row_means: Vec<f64> = (0..self.grid.nv)
            .map(|iv| self.row(iv).iter().map(|f| f * f).sum::<f64>() / nx)
            .collect();
        trapezoid(&row_means, self.grid.dv()).sqrt()
    }

    /// Kinetic energy `(1/L) int (v^2/2) f dx dv`.
    pub fn kinetic_energy(&self) -> f64 {
        let nx = self.grid.nx as f64;
        let integrand: Vec<f64> = (0..self.grid.nv)
            .map(|iv| {
                let v = self.grid.v(iv);
                0.5 * v * v * self.row(iv).iter().sum::<f64>() / nx
            })
            .collect();
        trapezoid(&integrand, self.grid.dv())
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Basic sanity: finite values and positive mass.
    pub fn validate(&self) -> Result<()> {
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite value".into()));
        }
        if !(self.mass() > 0.0) {
            return Err(Error::InvalidDistribution("non-positive mass".into()));
        }
        Ok(())
    }

    /// Check compact numerical support: values on the `v = +-v_max` rows must
    /// stay below `floor` in absolute value.
    pub fn support_ok(&self, floor: f64) -> Result<()> {
        for iv in [0, self.grid.nv - 1] {
            for &f in self.row(iv) {
                if f.abs() > floor {
                    return Err(Error::SupportBreach {
                        value: f.abs(),
                        v: self.grid.v(iv),
                        floor,
                    });
                }
            }
        }
        Ok(())
    }

    /// Exact free-streaming `f(x, v) -> f(x - v tau, v)` via a per-mode
    /// spectral phase shift on each `v` row.
    ///
    /// Mass and every `|f^(k, v)|` are preserved exactly; the unpaired
    /// Nyquist mode gets the real (cosine) part of its phase so the field
    /// stays real. Smooth compactly supported data has no Nyquist content.
    pub fn free_stream(&self, tau: f64) -> Distribution {
        let nx = self.grid.nx;
        let mut out = Vec::with_capacity(self.values.len());
        let mut buf = vec![Complex64::new(0.0, 0.0); nx];
        for iv in 0..self.grid.nv {
            let v = self.grid.v(iv);
            let row = self.row(iv);
            for (b, &f) in buf.iter_mut().zip(row) {
                *b = Complex64::new(f, 0.0);
            }
            fft_in_place(&mut buf);
            for (j, b) in buf.iter_mut().enumerate() {
                let k = self.grid.wavenumber(j);
                let angle = -k * v * tau;
                if j == nx / 2 {
                    *b *= angle.cos();
                } else {
                    *b *= Complex64::new(0.0, angle).exp();
                }
            }
            ifft_in_place(&mut buf);
            let scale = 1.0 / nx as f64;
            out.extend(buf.iter().map(|c| c.re * scale));
        }
        Distribution {
            grid: self.grid,
            values: out,
        }
    }

    /// x-Fourier coefficient `f^(k, .)` at bin `j` as a function of `v`.
    pub fn x_mode(&self, j: usize) -> Vec<Complex64> {
        (0..self.grid.nv)
            .map(|iv| {
                let row = self.row(iv);
                let nx = self.grid.nx as f64;
                let mut acc = Complex64::new(0.0, 0.0);
                for (jj, &f) in row.iter().enumerate() {
                    let angle = -TAU * (j as f64) * (jj as f64) / nx;
                    acc += f * Complex64::new(0.0, angle).exp();
                }
                acc / nx
            })
            .collect()
    }

    /// Charge density `rho(x) = int f dv - 1`.
    pub fn charge_density(&self) -> Vec<f64> {
        let nx = self.grid.nx;
        let dv = self.grid.dv();
        let mut rho = vec![0.0; nx];
        for iv in 0..self.grid.nv {
            let w = if iv == 0 || iv == self.grid.nv - 1 {
                0.5 * dv
            } else {
                dv
            };
            for (r, &f) in rho.iter_mut().zip(self.row(iv)) {
                *r += w * f;
            }
        }
        for r in &mut rho {
            *r -= 1.0;
        }
        rho
    }

    /// Spectral Poisson solve `E(k) = -i rho(k) / k` with neutralizing
    /// background; requires neutrality `|mass - 1| <= 1e-8`.
    pub fn solve_poisson(&self) -> Result<FieldOnGrid> {
        let defect = (self.mass() - 1.0).abs();
        if defect > 1e-8 {
            return Err(Error::MassDefect {
                defect,
                tol: 1e-8,
            });
        }
        let rho = self.charge_density();
        let mut coeffs = forward_coefficients(&rho);
        let nx = self.grid.nx;
        for (j, c) in coeffs.iter_mut().enumerate() {
            if j == 0 || j == nx / 2 {
                // zero mean; unpaired Nyquist dropped to keep E real
                *c = Complex64::new(0.0, 0.0);
            } else {
                let k = self.grid.wavenumber(j);
                *c = Complex64::new(0.0, -1.0) * *c / k;
            }
        }
        Ok(FieldOnGrid::from_coefficients(self.grid.nx, self.grid.length, coeffs))
    }

    /// Space-averaged profile `(1/L) int f dx` at every `v` node.
    pub fn x_average(&self) -> VelocityProfile {
        let nx = self.grid.nx as f64;
        let values = (0..self.grid.nv)
            .map(|iv| self.row(iv).iter().sum::<f64>() / nx)
            .collect();
        VelocityProfile {
            grid: self.grid.into(),
            values,
        }
    }
}

/// Real electric field on the `x` grid together with its Fourier
/// coefficients. Zero mean by construction.
#[derive(Debug, Clone)]
pub struct FieldOnGrid {
    pub nx: usize,
    pub length: f64,
    values: Vec<f64>,
    fourier: Vec<Complex64>,
}

impl FieldOnGrid {
    /// Build from normalized Fourier coefficients; the mean mode is forced
    /// to zero.
    pub fn from_coefficients(nx: usize, length: f64, mut fourier: Vec<Complex64>) -> Self {
        assert_eq!(fourier.len(), nx);
        fourier[0] = Complex64::new(0.0, 0.0);
        let values = inverse_real(&fourier);
        FieldOnGrid {
            nx,
            length,
            values,
            fourier,
        }
    }

    pub fn zero(nx: usize, length: f64) -> Self {
        FieldOnGrid {
            nx,
            length,
            values: vec![0.0; nx],
            fourier: vec![Complex64::new(0.0, 0.0); nx],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn fourier(&self) -> &[Complex64] {
        &self.fourier
    }

    /// Coefficient at signed mode `m` (i.e. wavenumber `m k0`).
    pub fn coefficient(&self, m: i64) -> Complex64 {
        let n = self.nx as i64;
        let j = m.rem_euclid(n) as usize;
        self.fourier[j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
    }

    /// Field energy `(1/2) (1/L) int |E|^2 dx = (1/2) sum_k |E(k)|^2`.
    pub fn energy(&self) -> f64 {
        0.5 * self.fourier.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// Spectral derivative `dE/dx` on the grid.
    pub fn derivative(&self) -> Vec<f64> {
        let mut coeffs = self.fourier.clone();
        let k0 = TAU / self.length;
        for (j, c) in coeffs.iter_mut().enumerate() {
            if j == self.nx / 2 {
                *c = Complex64::new(0.0, 0.0);
            } else {
                let k = k0 * bin_mode(j, self.nx) as f64;
                *c *= Complex64::new(0.0, k);
            }
        }
        inverse_real(&coeffs)
    }
}

/// Velocity grid `v_i = -v_max + i dv`, shared by every profile that lives
/// on `v` alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    pub nv: usize,
    pub v_max: f64,
}

impl VelocityGrid {
    pub fn new(nv: usize, v_max: f64) -> Self {
        assert!(nv >= 2 && v_max > 0.0);
        VelocityGrid { nv, v_max }
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.v_max / (self.nv - 1) as f64
    }

    pub fn v(&self, i: usize) -> f64 {
        -self.v_max + i as f64 * self.dv()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nv).map(|i| self.v(i)).collect()
    }
}

impl From<PhaseSpaceGrid> for VelocityGrid {
    fn from(g: PhaseSpaceGrid) -> Self {
        VelocityGrid {
            nv: g.nv,
            v_max: g.v_max,
        }
    }
}

/// A real function of `v` alone on the velocity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    pub grid: VelocityGrid,
    pub values: Vec<f64>,
}

impl VelocityProfile {
    pub fn new(grid: VelocityGrid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.nv);
        VelocityProfile { grid, values }
    }

    pub fn dv(&self) -> f64 {
        self.grid.dv()
    }

    pub fn v(&self, i: usize) -> f64 {
        self.grid.v(i)
    }

    /// Trapezoid integral over `v`.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.dv())
    }

    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|x| x * x).collect();
        trapezoid(&sq, self.dv()).sqrt()
    }
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

impl Distribution {
    /// CSV snapshot: header `v,x0,x1,...`, one row per `v` node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "v")?;
        for j in 0..self.grid.nx {
            write!(w, ",x{j}")?;
        }
        writeln!(w)?;
        for iv in 0..self.grid.nv {
            write!(w, "{}", self.grid.v(iv))?;
            for &f in self.row(iv) {
                write!(w, ",{f}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Read a CSV snapshot produced by [`Self::write_csv`]. The spatial
    /// period is not stored in the CSV, so it must be supplied.
    pub fn read_csv<R: BufRead>(r: R, length: f64) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty CSV".into()))??;
        let nx = header.split(',').count() - 1;
        let mut vs = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let v: f64 = it
                .next()
                .ok_or_else(|| Error::Parse("missing v column".into()))?
                .parse()
                .map_err(|e| Error::Parse(format!("bad v value: {e}")))?;
            vs.push(v);
            for tok in it {
                values.push(
                    tok.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad value: {e}")))?,
                );
            }
        }
        let nv = vs.len();
        if nv < 2 || values.len() != nx * nv {
            return Err(Error::Parse(format!(
                "inconsistent CSV shape: nx={nx}, nv={nv}, cells={}",
                values.len()
            )));
        }
        let v_max = vs[nv - 1];
        let grid = PhaseSpaceGrid::with_length(nx, nv, v_max, length)?;
        Distribution::from_values(grid, values)
    }

    /// Compact checkpoint: `nx (u64) | nv (u64) | v_max (f64) | length (f64)`
    /// followed by the node values as little-endian doubles, row major with
    /// one row per `v` node.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.grid.nx as u64).to_le_bytes())?;
        w.write_all(&(self.grid.nv as u64).to_le_bytes())?;
        w.write_all(&self.grid.v_max.to_le_bytes())?;
        w.write_all(&self.grid.length.to_le_bytes())?;
        for &f in &self.values {
            w.write_all(&f.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut u = [0u8; 8];
        r.read_exact(&mut u)?;
        let nx = u64::from_le_bytes(u) as usize;
        r.read_exact(&mut u)?;
        let nv = u64::from_le_bytes(u) as usize;
        r.read_exact(&mut u)?;
        let v_max = f64::from_le_bytes(u);
        r.read_exact(&mut u)?;
        let length = f64::from_le_bytes(u);
        let grid = PhaseSpaceGrid::with_length(nx, nv, v_max, length)?;
        let mut values = Vec::with_capacity(nx * nv);
        for _ in 0..nx * nv {
            r.read_exact(&mut u)?;
            values.push(f64::from_le_bytes(u));
        }
        Distribution::from_values(grid, values)
    }
}

impl VelocityProfile {
    /// Two-column CSV `v,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "v,value")?;
        for (i, &val) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.v(i), val)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn maxwellian(v: f64) -> f64 {
        (-v * v / 2.0).exp() / (2.0 * PI).sqrt()
    }

    #[test]
    fn grid_spacings() {
        let g = PhaseSpaceGrid::new(64, 129, 6.0).unwrap();
        assert_relative_eq!(g.dx(), TAU / 64.0);
        assert_relative_eq!(g.dv(), 12.0 / 128.0);
        assert_relative_eq!(g.dv(), 0.09375);
    }

    #[test]
    fn minimal_grid_ok() {
        assert!(PhaseSpaceGrid::new(4, 8, 1.0).is_ok());
    }

    #[test]
    fn bad_grids_rejected() {
        assert!(PhaseSpaceGrid::new(63, 129, 6.0).is_err());
        assert!(PhaseSpaceGrid::new(64, 129, -6.0).is_err());
        assert!(PhaseSpaceGrid::new(64, 129, 0.0).is_err());
        assert!(PhaseSpaceGrid::new(2, 129, 6.0).is_err());
        assert!(PhaseSpaceGrid::new(64, 7, 6.0).is_err());
    }

    #[test]
    fn free_stream_x_independent_invariant() {
        let g = PhaseSpaceGrid::new(16, 33, 4.0).unwrap();
        let f = Distribution::from_fn(g, |_, v| maxwellian(v));
        let s = f.free_stream(7.3);
        for (a, b) in f.values().iter().zip(s.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn free_stream_matches_analytic_shift() {
        // f = cos(x) g(v) -> cos(x - v tau) g(v), exact per node
        let g = PhaseSpaceGrid::new(32, 33, 4.0).unwrap();
        let f = Distribution::from_fn(g, |x, v| x.cos() * maxwellian(v));
        let tau = 2.419;
        let s = f.free_stream(tau);
        for iv in 0..g.nv {
            let v = g.v(iv);
            for j in 0..g.nx {
                let expected = (g.x(j) - v * tau).cos() * maxwellian(v);
                assert!(
                    (s.get(j, iv) - expected).abs() < 1e-12,
                    "node ({j},{iv}): {} vs {}",
                    s.get(j, iv),
                    expected
                );
            }
        }
    }

    #[test]
    fn free_stream_phase_mixing_decay() {
        // pairing of the k = 1 mode against a smooth compactly supported
        // phi decays for large tau (Riemann-Lebesgue)
        let g = PhaseSpaceGrid::new(32, 257, 6.0).unwrap();
        let f = Distribution::from_fn(g, |x, v| (1.0 + x.cos()) * maxwellian(v));
        let s = f.free_stream(500.0);
        let mode = s.x_mode(1);
        let phi = |v: f64| {
            let u: f64 = v / 5.0;
            if u.abs() < 1.0 {
                (-1.0 / (1.0 - u * u)).exp()
            } else {
                0.0
            }
        };
        let dv = g.dv();
        let pairing: Complex64 = mode
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let w = if i == 0 || i == g.nv - 1 { 0.5 } else { 1.0 };
                c * phi(g.v(i)) * w * dv
            })
            .sum();
        assert!(pairing.norm() < 1e-3, "pairing {}", pairing.norm());
    }

    #[test]
    fn free_stream_group_property_and_l2() {
        let g = PhaseSpaceGrid::new(32, 65, 4.0).unwrap();
        let f = Distribution::from_fn(g, |x, v| (1.0 + 0.5 * x.cos() + 0.2 * (2.0 * x).sin()) * maxwellian(v));
        let a = 1.7;
        let b = -0.9;
        let two_step = f.free_stream(a).free_stream(b);
        let one_step = f.free_stream(a + b);
        let scale = f.l2_norm();
        for (p, q) in two_step.values().iter().zip(one_step.values()) {
            assert!((p - q).abs() < 1e-12 * scale.max(1.0));
        }
        assert_relative_eq!(two_step.l2_norm(), f.l2_norm(), max_relative = 1e-12);
        assert_relative_eq!(two_step.mass(), f.mass(), max_relative = 1e-12);
    }

    #[test]
    fn free_stream_grid_aligned_shift_preserves_lp() {
        // v nodes are integers and tau = dx, so every row shift is a whole
        // number of cells: a circular permutation preserves all grid norms
        let g = PhaseSpaceGrid::new(8, 9, 4.0).unwrap();
        let f = Distribution::from_fn(g, |x, v| 1.0 + 0.3 * x.sin() + 0.1 * (x + v).cos());
        let s = f.free_stream(g.dx());
        for iv in 0..g.nv {
            let mut l1_a = 0.0;
            let mut l1_b = 0.0;
            let mut max_a: f64 = 0.0;
            let mut max_b: f64 = 0.0;
            for j in 0..g.nx {
                l1_a += f.get(j, iv).abs();
                l1_b += s.get(j, iv).abs();
                max_a = max_a.max(f.get(j, iv).abs());
                max_b = max_b.max(s.get(j, iv).abs());
            }
            assert!((l1_a - l1_b).abs() < 1e-12 * l1_a.max(1.0));
            assert!((max_a - max_b).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_zero_charge() {
        let g = PhaseSpaceGrid::new(32, 65, 6.0).unwrap();
        let f = Distribution::from_fn(g, |_, v| maxwellian(v));
        // renormalize the truncated Maxwellian to unit mass
        let m = f.mass();
        let f = Distribution::from_fn(g, |_, v| maxwellian(v) / m);
        let e = f.solve_poisson().unwrap();
        assert!(e.max_abs() < 1e-12);
    }

    #[test]
    fn poisson_single_mode() {
        // rho = alpha cos(x)  =>  E = alpha sin(x) (Gauss law dE/dx = rho)
        let g = PhaseSpaceGrid::new(64, 129, 6.0).unwrap();
        let alpha = 0.37;
        let base = Distribution::from_fn(g, |_, v| maxwellian(v));
        let m = base.mass();
        let f = Distribution::from_fn(g, |x, v| (1.0 + alpha * x.cos()) * maxwellian(v) / m);
        let e = f.solve_poisson().unwrap();
        for j in 0..g.nx {
            let expected = alpha * g.x(j).sin();
            assert!(
                (e.values()[j] - expected).abs() < 1e-10,
                "x={}: {} vs {}",
                g.x(j),
                e.values()[j],
                expected
            );
        }
    }

    #[test]
    fn poisson_second_mode() {
        // rho = alpha cos(2x)  =>  E = (alpha/2) sin(2x)
        let g = PhaseSpaceGrid::new(64, 129, 6.0).unwrap();
        let alpha = 0.11;
        let base = Distribution::from_fn(g, |_, v| maxwellian(v));
        let m = base.mass();
        let f =
            Distribution::from_fn(g, |x, v| (1.0 + alpha * (2.0 * x).cos()) * maxwellian(v) / m);
        let e = f.solve_poisson().unwrap();
        for j in 0..g.nx {
            let expected = 0.5 * alpha * (2.0 * g.x(j)).sin();
            assert!((e.values()[j] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn poisson_rejects_mass_defect() {
        let g = PhaseSpaceGrid::new(32, 65, 6.0).unwrap();
        let f = Distribution::from_fn(g, |_, v| 1.1 * maxwellian(v));
        match f.solve_poisson() {
            Err(Error::MassDefect { defect, .. }) => assert!(defect > 0.05),
            other => panic!("expected mass defect, got {other:?}"),
        }
    }

    #[test]
    fn gauss_law_on_random_smooth_data() {
        let g = PhaseSpaceGrid::new(64, 129, 6.0).unwrap();
        let base = Distribution::from_fn(g, |_, v| maxwellian(v));
        let m = base.mass();
        let f = Distribution::from_fn(g, |x, v| {
            (1.0 + 0.2 * x.cos() + 0.1 * (3.0 * x).sin() - 0.05 * (5.0 * x).cos())
                * maxwellian(v)
                / m
        });
        let e = f.solve_poisson().unwrap();
        let de = e.derivative();
        let rho = f.charge_density();
        for (a, b) in de.iter().zip(&rho) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn x_average_kills_cosine() {
        let g = PhaseSpaceGrid::new(32, 65, 4.0).unwrap();
        let f = Distribution::from_fn(g, |x, v| (1.0 + x.cos()) * maxwellian(v));
        let p = f.x_average();
        for (i, &val) in p.values.iter().enumerate() {
            assert!((val - maxwellian(p.v(i))).abs() < 1e-14);
        }
    }

    #[test]
    fn x_average_matches_naive_sum() {
        let g = PhaseSpaceGrid::new(16, 33, 4.0).unwrap();
        // deterministic pseudo-random values
        let f = Distribution::from_fn(g, |x, v| ((x * 12.9898 + v * 78.233).sin() * 43758.5453).fract());
        let p = f.x_average();
        for iv in 0..g.nv {
            let mut acc = 0.0;
            for j in 0..g.nx {
                acc += f.get(j, iv);
            }
            let naive = acc / g.nx as f64;
            assert!(
                (p.values[iv] - naive).abs() <= 1e-14 * naive.abs().max(1.0),
                "{} vs {naive}",
                p.values[iv]
            );
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = PhaseSpaceGrid::new(8, 9, 2.0).unwrap();
        let f = Distribution::from_fn(g, |x, v| 0.3 + 0.1 * x.sin() + 0.01 * v);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = Distribution::read_csv(&buf[..], g.length).unwrap();
        assert_eq!(back.grid.nx, g.nx);
        assert_eq!(back.grid.nv, g.nv);
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let g = PhaseSpaceGrid::with_length(8, 9, 2.0, 4.0 * PI).unwrap();
        let f = Distribution::from_fn(g, |x, v| (x * 3.7 + v * 1.3).sin());
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        let back = Distribution::read_binary(&buf[..]).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn support_check() {
        let g = PhaseSpaceGrid::new(8, 9, 2.0).unwrap();
        let f = Distribution::from_fn(g, |_, v| if v.abs() > 1.5 { 0.0 } else { 1.0 });
        assert!(f.support_ok(1e-12).is_ok());
        let bad = Distribution::from_fn(g, |_, _| 1.0);
        assert!(matches!(
            bad.support_ok(1e-12),
            Err(Error::SupportBreach { .. })
        ));
    }
}
