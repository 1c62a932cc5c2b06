//! Periodic tensor grids, discrete Fourier calculus, and the norm toolbox.
//!
//! Everything downstream (mean-field solver, kernel algebra, forcing sectors,
//! Fock micro-model) shares one discretization convention fixed here:
//!
//! * physical points `x_j = j*dx`, `dx = L/n`, periodic box `[0, L)^d`;
//! * the forward transform approximates the continuum Fourier transform,
//!   `F_m = sum_j f_j exp(-i xi_m x_j) dx^D`, so the transform of the
//!   constant field is a single nonzero bin of value `L^D`;
//! * the inverse divides by `L^D`, making the round trip exact;
//! * Parseval reads `||f||_2^2 = (2pi)^{-D} sum_m |F_m|^2 dxi^D` with
//!   `dxi = 2pi/L`.

use ndarray::{ArrayD, Axis, IxDyn};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Total axis cap: kernels on (R^d)^rank may use at most 4 axes.
pub const MAX_AXES: usize = 4;

/// Periodic tensor grid: `d` spatial dimensions, `n` points per axis
/// (power of two), box length `length` per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    d: usize,
    n: usize,
    length: f64,
}

impl GridSpec {
    /// Any `n >= 2` is accepted (the FFT backend is mixed-radix and exact);
    /// production experiment configs are validated to powers of two for
    /// speed, while diagnostic grids (loop oracles, mode grids) may be odd.
    pub fn new(d: usize, n: usize, length: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!("need at least 2 points per axis, got {n}"),
            });
        }
        if d == 0 || d > 3 {
            return Err(Error::InvalidParameter {
                name: "d",
                reason: format!("spatial dimension must be 1..=3, got {d}"),
            });
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidParameter {
                name: "length",
                reason: format!("box length must be positive, got {length}"),
            });
        }
        Ok(Self { d, n, length })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Grid points along one axis.
    pub fn points(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n).map(|j| j as f64 * dx).collect()
    }

    /// Signed distance from `x_j` to the nearest periodic image of 0.
    /// Useful for sampling radial profiles like `v(x - y)`.
    pub fn centered_points(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n)
            .map(|j| {
                let x = j as f64 * dx;
                if x > self.length / 2.0 {
                    x - self.length
                } else {
                    x
                }
            })
            .collect()
    }

    /// Wavenumbers `xi_m = 2 pi m / L` in standard FFT ordering
    /// (`m = 0, 1, ..., n/2-1, -n/2, ..., -1`).
    pub fn wavenumbers(&self) -> Vec<f64> {
        let base = 2.0 * std::f64::consts::PI / self.length;
        (0..self.n)
            .map(|j| {
                let m = if j <= self.n / 2 - 1 || self.n == 1 {
                    j as isize
                } else {
                    j as isize - self.n as isize
                };
                base * m as f64
            })
            .collect()
    }

    pub fn max_wavenumber_sq(&self, rank: usize) -> f64 {
        let ximax = std::f64::consts::PI / self.dx();
        (self.d * rank) as f64 * ximax * ximax
    }

    fn label(&self) -> String {
        format!("d={} n={} L={}", self.d, self.n, self.length)
    }
}

/// Complex field on `(R^d)^rank`, stored as an `n^(d*rank)` array.
#[derive(Debug, Clone)]
pub struct Field {
    grid: GridSpec,
    rank: usize,
    data: ArrayD<Complex64>,
}

thread_local! {
    static PLANS: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> = RefCell::new(HashMap::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        cell.borrow_mut()
            .entry((n, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    })
}

impl Field {
    pub fn new(grid: GridSpec, rank: usize, data: ArrayD<Complex64>) -> Result<Self> {
        let axes = grid.d() * rank;
        if axes == 0 || axes > MAX_AXES {
            return Err(Error::AxisOverflow(axes, MAX_AXES));
        }
        let want: Vec<usize> = vec![grid.n(); axes];
        if data.shape() != want.as_slice() {
            return Err(Error::InvalidParameter {
                name: "data",
                reason: format!("shape {:?} does not match grid {:?}", data.shape(), want),
            });
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { grid, rank, data })
    }

    pub fn zeros(grid: GridSpec, rank: usize) -> Result<Self> {
        let axes = grid.d() * rank;
        if axes == 0 || axes > MAX_AXES {
            return Err(Error::AxisOverflow(axes, MAX_AXES));
        }
        let shape: Vec<usize> = vec![grid.n(); axes];
        Ok(Self {
            grid,
            rank,
            data: ArrayD::zeros(IxDyn(&shape)),
        })
    }

    /// Rank-1 field from a function of the position vector.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let shape: Vec<usize> = vec![grid.n(); grid.d()];
        let pts = grid.points();
        let data = ArrayD::from_shape_fn(IxDyn(&shape), |idx| {
            let x: Vec<f64> = (0..grid.d()).map(|a| pts[idx[a]]).collect();
            f(&x)
        });
        Self::new(grid, 1, data)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn axes(&self) -> usize {
        self.grid.d() * self.rank
    }

    pub fn data(&self) -> &ArrayD<Complex64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut ArrayD<Complex64> {
        &mut self.data
    }

    pub fn into_data(self) -> ArrayD<Complex64> {
        self.data
    }

    /// Physical-cell volume `dx^axes`.
    pub fn cell_volume(&self) -> f64 {
        self.grid.dx().powi(self.axes() as i32)
    }

    fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid || self.rank != other.rank {
            return Err(Error::GridMismatch(self.grid.label(), other.grid.label()));
        }
        Ok(())
    }

    fn fft_all_axes(&self, inverse: bool) -> Field {
        let mut data = self.data.clone();
        let n = self.grid.n();
        let fft = plan(n, inverse);
        let mut scratch = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..data.ndim() {
            for mut lane in data.lanes_mut(Axis(axis)) {
                for (s, v) in scratch.iter_mut().zip(lane.iter()) {
                    *s = *v;
                }
                fft.process(&mut scratch);
                for (v, s) in lane.iter_mut().zip(scratch.iter()) {
                    *v = *s;
                }
            }
        }
        let scale = if inverse {
            1.0 / self.grid.length().powi(self.axes() as i32)
        } else {
            self.cell_volume()
        };
        for v in data.iter_mut() {
            *v *= scale;
        }
        Field {
            grid: self.grid,
            rank: self.rank,
            data,
        }
    }

    /// Forward transform (trapezoid approximation of the continuum
    /// Fourier transform; the constant field maps to one bin of value `L^D`).
    pub fn fft_forward(&self) -> Field {
        self.fft_all_axes(false)
    }

    pub fn fft_inverse(&self) -> Field {
        self.fft_all_axes(true)
    }

    /// Visit every Fourier bin with its wavenumber vector.
    /// `f(flat_index, xi)` where `xi` has one entry per axis.
    pub fn for_each_mode(&self, mut f: impl FnMut(usize, &[f64])) {
        let axes = self.axes();
        let n = self.grid.n();
        let xi = self.grid.wavenumbers();
        let mut k = vec![0f64; axes];
        let total = self.data.len();
        for flat in 0..total {
            let mut rem = flat;
            for a in (0..axes).rev() {
                k[a] = xi[rem % n];
                rem /= n;
            }
            f(flat, &k);
        }
    }

    /// `L^2` norm with grid quadrature.
    pub fn norm_l2(&self) -> f64 {
        let s: f64 = self.data.iter().map(|z| z.norm_sqr()).sum();
        (s * self.cell_volume()).sqrt()
    }

    /// `L^p` norm with grid quadrature (`p = infinity` via [`Field::norm_linf`]).
    pub fn norm_lp(&self, p: f64) -> f64 {
        let s: f64 = self.data.iter().map(|z| z.norm().powf(p)).sum();
        (s * self.cell_volume()).powf(1.0 / p)
    }

    pub fn norm_linf(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `L^2` inner product `<f, g> = integral conj(f) g`.
    pub fn inner(&self, other: &Field) -> Result<Complex64> {
        self.check_same_grid(other)?;
        let s: Complex64 = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.cell_volume())
    }

    /// Inhomogeneous Sobolev norm
    /// `( sum (1+|k|^2)^sigma |f_hat(k)|^2 cell )^(1/2)`
    /// where `|k|^2` sums the squared wavenumbers over all axes.
    pub fn sobolev_norm(&self, sigma: f64) -> f64 {
        let hat = self.fft_forward();
        let axes = self.axes() as i32;
        let tp = 2.0 * std::f64::consts::PI;
        let dxi = tp / self.grid.length();
        let cell = dxi.powi(axes) / tp.powi(axes);
        let mut acc = 0.0;
        let flat = hat.data.as_slice().expect("standard layout");
        hat.for_each_mode(|i, k| {
            let k2: f64 = k.iter().map(|x| x * x).sum();
            acc += (1.0 + k2).powf(sigma) * flat[i].norm_sqr();
        });
        (acc * cell).sqrt()
    }

    /// Fourier-side weighted `L^2` norm. The weight is evaluated on each
    /// wavenumber vector; if it is not finite at the zero mode, that mode is
    /// excluded (the documented convention for homogeneous weights). A
    /// non-finite weight anywhere else is an error.
    pub fn weighted_l2(&self, weight: impl Fn(&[f64]) -> f64) -> Result<f64> {
        let hat = self.fft_forward();
        let axes = self.axes() as i32;
        let tp = 2.0 * std::f64::consts::PI;
        let dxi = tp / self.grid.length();
        let cell = dxi.powi(axes) / tp.powi(axes);
        let mut acc = 0.0;
        let mut bad: Option<Vec<f64>> = None;
        let flat = hat.data.as_slice().expect("standard layout");
        hat.for_each_mode(|i, k| {
            let w = weight(k);
            if !w.is_finite() {
                if k.iter().all(|&x| x == 0.0) {
                    return; // zero mode excluded for singular weights
                }
                bad.get_or_insert_with(|| k.to_vec());
                return;
            }
            acc += w * flat[i].norm_sqr();
        });
        if let Some(k) = bad {
            return Err(Error::BadWeight(k));
        }
        Ok((acc * cell).sqrt())
    }

    /// Periodic convolution of two rank-1 fields via the Fourier product.
    pub fn convolve(&self, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        if self.rank != 1 {
            return Err(Error::InvalidParameter {
                name: "rank",
                reason: "convolve is defined for rank-1 fields".into(),
            });
        }
        let mut fa = self.fft_forward();
        let fb = other.fft_forward();
        for (a, b) in fa.data.iter_mut().zip(fb.data.iter()) {
            *a *= *b;
        }
        Ok(fa.fft_inverse())
    }

    /// Apply a Fourier multiplier `m(xi)` (e.g. a propagator phase).
    pub fn apply_multiplier(&self, m: impl Fn(&[f64]) -> Complex64) -> Field {
        let mut hat = self.fft_forward();
        let mut vals = Vec::with_capacity(hat.data.len());
        hat.for_each_mode(|_, k| vals.push(m(k)));
        for (a, b) in hat.data.iter_mut().zip(vals) {
            *a *= b;
        }
        hat.fft_inverse()
    }

    /// Pointwise scale by a complex factor.
    pub fn scaled(&self, factor: Complex64) -> Field {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= factor;
        }
        out
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a += *b;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a -= *b;
        }
        Ok(out)
    }
}

/// Outer norm choice for [`mixed_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterNorm {
    LInf,
    L4,
}

/// Mixed norm `|| ||u(x, y)||_{L^2(dx)} ||_{outer(dy)}` of a rank-2 field
/// on a 1-d grid: inner L^2 over the first argument, outer norm over the
/// second.
pub fn mixed_norm(u: &Field, outer: OuterNorm) -> Result<f64> {
    if u.rank() != 2 || u.grid().d() != 1 {
        return Err(Error::InvalidParameter {
            name: "u",
            reason: "mixed_norm expects a rank-2 field on a d=1 grid".into(),
        });
    }
    let n = u.grid().n();
    let dx = u.grid().dx();
    let data = u.data();
    let col_l2: Vec<f64> = (0..n)
        .map(|j| {
            let s: f64 = (0..n).map(|i| data[[i, j]].norm_sqr()).sum();
            (s * dx).sqrt()
        })
        .collect();
    Ok(match outer {
        OuterNorm::LInf => col_l2.iter().cloned().fold(0.0, f64::max),
        OuterNorm::L4 => {
            let s: f64 = col_l2.iter().map(|v| v.powi(4)).sum();
            (s * dx).powf(0.25)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::IxDyn;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    fn grid1(n: usize, l: f64) -> GridSpec {
        GridSpec::new(1, n, l).unwrap()
    }

    fn random_field(grid: GridSpec, rank: usize, seed: u64) -> Field {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let shape: Vec<usize> = vec![grid.n(); grid.d() * rank];
        let data = ArrayD::from_shape_fn(IxDyn(&shape), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        Field::new(grid, rank, data).unwrap()
    }

    #[test]
    fn constant_field_has_single_bin() {
        let g = grid1(8, 4.0);
        let f = Field::from_fn(g, |_| Complex64::new(1.0, 0.0)).unwrap();
        let hat = f.fft_forward();
        let flat = hat.data().as_slice().unwrap();
        assert_relative_eq!(flat[0].re, 4.0, max_relative = 1e-12);
        for v in &flat[1..] {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn pure_mode_is_single_bin() {
        let g = grid1(16, 2.0 * std::f64::consts::PI);
        let xi1 = g.wavenumbers()[1];
        let f = Field::from_fn(g, |x| (Complex64::i() * xi1 * x[0]).exp()).unwrap();
        let hat = f.fft_forward();
        let flat = hat.data().as_slice().unwrap();
        for (i, v) in flat.iter().enumerate() {
            if i == 1 {
                assert_relative_eq!(v.re, g.length(), max_relative = 1e-10);
            } else {
                assert!(v.norm() < 1e-10, "bin {i} = {v}");
            }
        }
    }

    #[test]
    fn roundtrip_matches_direct_dft_at_n8() {
        let g = grid1(8, 3.0);
        let f = random_field(g, 1, 42);
        // direct O(n^2) DFT oracle
        let n = g.n();
        let dx = g.dx();
        let pts = g.points();
        let xi = g.wavenumbers();
        let src = f.data().as_slice().unwrap();
        let mut direct = vec![Complex64::default(); n];
        for (m, d) in direct.iter_mut().enumerate() {
            for j in 0..n {
                *d += src[j] * (-Complex64::i() * xi[m] * pts[j]).exp() * dx;
            }
        }
        let hat = f.fft_forward();
        let flat = hat.data().as_slice().unwrap();
        for m in 0..n {
            assert!((flat[m] - direct[m]).norm() < 1e-12);
        }
        let back = hat.fft_inverse();
        let err = back.sub(&f).unwrap().norm_l2() / f.norm_l2();
        assert!(err < 1e-12);
    }

    #[test]
    fn sobolev_zero_order_is_l2() {
        let g = grid1(32, 5.0);
        let f = random_field(g, 1, 7);
        assert_relative_eq!(f.sobolev_norm(0.0), f.norm_l2(), max_relative = 1e-12);
    }

    #[test]
    fn sobolev_single_mode_multiplier() {
        let g = grid1(32, 2.0 * std::f64::consts::PI);
        let k0 = g.wavenumbers()[3];
        let f = Field::from_fn(g, |x| (Complex64::i() * k0 * x[0]).exp()).unwrap();
        let expect = (1.0 + k0 * k0) * f.norm_l2();
        assert_relative_eq!(f.sobolev_norm(2.0), expect, max_relative = 1e-10);
    }

    #[test]
    fn sobolev_gaussian_matches_quadrature() {
        // H^{3/2} norm of a Gaussian against high-resolution continuum quadrature
        let g = grid1(64, 24.0);
        let c = 12.0;
        let f = Field::from_fn(g, |x| {
            Complex64::new((-(x[0] - c).powi(2) / 2.0).exp(), 0.0)
        })
        .unwrap();
        // continuum: |f_hat(xi)|^2 = 2 pi e^{-xi^2}; norm^2 = (1/2pi) int (1+xi^2)^{3/2} 2 pi e^{-xi^2}
        let mut quad = 0.0;
        let m = 400_000;
        let ximax = 30.0;
        let dxi = 2.0 * ximax / m as f64;
        for i in 0..m {
            let xi = -ximax + (i as f64 + 0.5) * dxi;
            quad += (1.0 + xi * xi).powf(1.5) * (-xi * xi).exp() * dxi;
        }
        let expect = quad.sqrt();
        assert_relative_eq!(f.sobolev_norm(1.5), expect, max_relative = 1e-6);
    }

    #[test]
    fn weighted_l2_trivial_weight_is_l2() {
        let g = grid1(16, 3.0);
        let f = random_field(g, 2, 3);
        let w = f.weighted_l2(|_| 1.0).unwrap();
        assert_relative_eq!(w, f.norm_l2(), max_relative = 1e-12);
    }

    #[test]
    fn weighted_l2_single_mode() {
        let g = grid1(16, 2.0 * std::f64::consts::PI);
        let k0 = g.wavenumbers()[2];
        let f = Field::from_fn(g, |x| (Complex64::i() * k0 * x[0]).exp()).unwrap();
        let w = f.weighted_l2(|k| 1.0 / (k[0] * k[0])).unwrap();
        assert_relative_eq!(w, f.norm_l2() / k0, max_relative = 1e-10);
    }

    #[test]
    fn weighted_l2_rejects_nan_at_nonzero_mode() {
        let g = grid1(8, 1.0);
        let f = random_field(g, 1, 11);
        let r = f.weighted_l2(|k| if k[0] > 0.0 { f64::NAN } else { 1.0 });
        assert!(matches!(r, Err(Error::BadWeight(_))));
    }

    #[test]
    fn convolve_with_delta_shifts() {
        let g = grid1(32, 4.0);
        let f = random_field(g, 1, 5);
        let dx = g.dx();
        let shift = 3usize;
        let mut delta = Field::zeros(g, 1).unwrap();
        delta.data_mut()[[shift]] = Complex64::new(1.0 / dx, 0.0);
        let conv = f.convolve(&delta).unwrap();
        let fd = f.data();
        let cd = conv.data();
        for j in 0..g.n() {
            let expect = fd[[(j + g.n() - shift) % g.n()]];
            assert!((cd[[j]] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn convolve_indicators_gives_triangle() {
        // direct O(n^2) sum oracle
        let g = grid1(32, 2.0);
        let ind = Field::from_fn(g, |x| {
            if x[0] < 1.0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .unwrap();
        let conv = ind.convolve(&ind).unwrap();
        let dx = g.dx();
        let id = ind.data();
        let cd = conv.data();
        for j in 0..g.n() {
            let mut s = Complex64::default();
            for k in 0..g.n() {
                s += id[[(j + g.n() - k) % g.n()]] * id[[k]] * dx;
            }
            assert!((cd[[j]] - s).norm() < 1e-10);
        }
    }

    #[test]
    fn convolve_zero_mode_identity() {
        let g = grid1(16, 3.0);
        let f = random_field(g, 1, 1);
        let h = random_field(g, 1, 2);
        let dx = g.dx();
        let int = |f: &Field| -> Complex64 { f.data().iter().sum::<Complex64>() * dx };
        let conv = f.convolve(&h).unwrap();
        let lhs = int(&conv);
        let rhs = int(&f) * int(&h);
        assert!((lhs - rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn mixed_norm_separable() {
        let g = grid1(16, 2.0);
        let n = g.n();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let a: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let b: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let data = ArrayD::from_shape_fn(IxDyn(&[n, n]), |idx| a[idx[0]] * b[idx[1]]);
        let u = Field::new(g, 2, data).unwrap();
        let dx = g.dx();
        let na = (a.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx).sqrt();
        let binf = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let b4 = (b.iter().map(|z| z.norm().powi(4)).sum::<f64>() * dx).powf(0.25);
        assert_relative_eq!(
            mixed_norm(&u, OuterNorm::LInf).unwrap(),
            na * binf,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            mixed_norm(&u, OuterNorm::L4).unwrap(),
            na * b4,
            max_relative = 1e-12
        );
    }

    #[test]
    fn mixed_norm_symmetric_swap() {
        let g = grid1(16, 2.0);
        let f = random_field(g, 2, 17);
        let mut sym = Field::zeros(g, 2).unwrap();
        for i in 0..g.n() {
            for j in 0..g.n() {
                let v = f.data()[[i, j]] + f.data()[[j, i]];
                sym.data_mut()[[i, j]] = v;
            }
        }
        let swapped = {
            let mut t = Field::zeros(g, 2).unwrap();
            for i in 0..g.n() {
                for j in 0..g.n() {
                    t.data_mut()[[i, j]] = sym.data()[[j, i]];
                }
            }
            t
        };
        for outer in [OuterNorm::LInf, OuterNorm::L4] {
            assert_relative_eq!(
                mixed_norm(&sym, outer).unwrap(),
                mixed_norm(&swapped, outer).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn mixed_norm_interpolation_inequality() {
        let g = grid1(32, 3.0);
        let u = random_field(g, 2, 23);
        let l4 = mixed_norm(&u, OuterNorm::L4).unwrap();
        let linf = mixed_norm(&u, OuterNorm::LInf).unwrap();
        let l2 = u.norm_l2();
        assert!(l4 <= linf.sqrt() * l2.sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn norms_match_direct_sums_small_grid() {
        let g = GridSpec::new(2, 8, 2.5).unwrap();
        let f = random_field(g, 2, 31);
        let cell = f.cell_volume();
        let direct_l2: f64 = f.data().iter().map(|z| z.norm_sqr()).sum::<f64>() * cell;
        assert_relative_eq!(f.norm_l2(), direct_l2.sqrt(), max_relative = 1e-12);
        let direct_l4: f64 = f.data().iter().map(|z| z.norm().powi(4)).sum::<f64>() * cell;
        assert_relative_eq!(f.norm_lp(4.0), direct_l4.powf(0.25), max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(1, 1, 1.0).is_err());
        // mixed-radix sizes are legal for diagnostic grids
        assert!(GridSpec::new(1, 12, 1.0).is_ok());
        let g = grid1(4, 1.0);
        assert!(matches!(
            Field::zeros(g, 5),
            Err(Error::AxisOverflow(5, MAX_AXES))
        ));
        let g3 = GridSpec::new(3, 4, 1.0).unwrap();
        assert!(matches!(
            Field::zeros(g3, 2),
            Err(Error::AxisOverflow(6, MAX_AXES))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn parseval_all_ranks(seed in 0u64..1000, rank in 1usize..=2) {
            let g = grid1(16, 2.0);
            let f = random_field(g, rank, seed);
            let hat = f.fft_forward();
            let axes = f.axes() as i32;
            let tp = 2.0 * std::f64::consts::PI;
            let dxi = tp / g.length();
            let cell = dxi.powi(axes) / tp.powi(axes);
            let fourier: f64 = hat.data().iter().map(|z| z.norm_sqr()).sum::<f64>() * cell;
            let phys = f.norm_l2().powi(2);
            prop_assert!((fourier - phys).abs() <= 1e-10 * phys.max(1e-30));
        }

        #[test]
        fn convolve_commutative_bilinear(seed in 0u64..1000) {
            let g = grid1(16, 2.0);
            let f = random_field(g, 1, seed);
            let h = random_field(g, 1, seed.wrapping_add(1));
            let k = random_field(g, 1, seed.wrapping_add(2));
            let fg = f.convolve(&h).unwrap();
            let gf = h.convolve(&f).unwrap();
            prop_assert!(fg.sub(&gf).unwrap().norm_l2() < 1e-12 * (1.0 + fg.norm_l2()));
            let lam = Complex64::new(0.7, -0.3);
            let lin = f.scaled(lam).add(&k).unwrap().convolve(&h).unwrap();
            let rhs = fg.scaled(lam).add(&k.convolve(&h).unwrap()).unwrap();
            prop_assert!(lin.sub(&rhs).unwrap().norm_l2() < 1e-12 * (1.0 + lin.norm_l2()));
        }

        #[test]
        fn sobolev_monotone_in_sigma(seed in 0u64..1000) {
            let g = grid1(16, 2.0);
            let f = random_field(g, 1, seed);
            let n0 = f.sobolev_norm(0.5);
            let n1 = f.sobolev_norm(1.5);
            prop_assert!(n0 <= n1 * (1.0 + 1e-12));
        }
    }
}
