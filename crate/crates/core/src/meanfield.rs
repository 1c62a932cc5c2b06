//! Scaled interaction potentials and the Hartree / limit-NLS solvers.
//!
//! The mean field solves `(1/i) d_t phi - Lap phi + (v_N * |phi|^2) phi = 0`
//! on the periodic box by Strang splitting; the limit flavor replaces the
//! convolution by the local coupling `(int v) |phi|^2`. Interaction
//! potentials are rescaled analytically, `v_N(x) = N^(d beta) v(N^beta x)`,
//! so sup norms transform exactly and integrals transform up to quadrature.

use ndarray::ArrayD;
use num_complex::Complex64;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::fit::{fit_decay_window, ExponentFit};
use crate::grid::{Field, GridSpec};

/// Analytic base-potential profile (nonnegative, even, smooth).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PotentialProfile {
    /// `exp(-1/(1-x^2))` on `|x|<1`, compactly supported.
    Bump,
    /// Unit-width Gaussian `exp(-x^2/2)/sqrt(2 pi)`.
    Gaussian,
}

fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        // Simpson quadrature of exp(-1/(1-x^2)) over (-1, 1)
        let m = 200_000usize;
        let h = 2.0 / m as f64;
        let f = |x: f64| {
            if x.abs() < 1.0 {
                (-1.0 / (1.0 - x * x)).exp()
            } else {
                0.0
            }
        };
        let mut s = 0.0;
        for i in 0..m {
            let a = -1.0 + i as f64 * h;
            s += h / 6.0 * (f(a) + 4.0 * f(a + h / 2.0) + f(a + h));
        }
        s
    })
}

impl PotentialProfile {
    /// One-dimensional profile normalized to unit mass.
    pub fn eval_1d(&self, x: f64) -> f64 {
        match self {
            PotentialProfile::Bump => {
                if x.abs() < 1.0 {
                    (-1.0 / (1.0 - x * x)).exp() / bump_mass()
                } else {
                    0.0
                }
            }
            PotentialProfile::Gaussian => {
                (-(x * x) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
            }
        }
    }

    /// Product profile on d axes, unit mass in d dimensions.
    pub fn eval(&self, x: &[f64]) -> f64 {
        x.iter().map(|&a| self.eval_1d(a)).product()
    }
}

/// Scaled two-body interaction `v_N(x) = N^(d beta) v(N^beta x)`.
#[derive(Debug, Clone)]
pub struct Interaction {
    grid: GridSpec,
    profile: PotentialProfile,
    /// Target `int v` (the coupling constant of the limit equation).
    integral: f64,
    n_particles: f64,
    beta: f64,
    v: Field,
    v_n: Field,
    quadrature_defect: f64,
}

/// Smallest power of two `n` such that `N^beta * (L/n) <= target`.
fn min_n_for(length: f64, n_beta: f64, target: f64) -> usize {
    let mut n = 2usize;
    while n_beta * length / n as f64 > target && n < (1 << 26) {
        n *= 2;
    }
    n
}

impl Interaction {
    /// Build the interaction by analytic rescaling of the profile
    /// (never by resampling a gridded potential).
    ///
    /// Guards: `N >= 1`, `0 <= beta <= 1`, the scaled bump must be resolved
    /// (`N^beta dx <= 1/2`) and its grid quadrature must reproduce `int v`
    /// to 1e-8 relative; violations name the minimal `n` that fixes them.
    pub fn new(
        grid: GridSpec,
        profile: PotentialProfile,
        integral: f64,
        n_particles: f64,
        beta: f64,
    ) -> Result<Self> {
        Self::new_with_tolerance(grid, profile, integral, n_particles, beta, 1e-8)
    }

    /// Like [`Interaction::new`] but without the resolution and quadrature
    /// guards. Contraction-structure oracles and coarse mode grids sample
    /// the analytic profile wherever they sit; callers own the consequences.
    pub fn new_unguarded(
        grid: GridSpec,
        profile: PotentialProfile,
        integral: f64,
        n_particles: f64,
        beta: f64,
    ) -> Result<Self> {
        Self::new_with_tolerance(grid, profile, integral, n_particles, beta, f64::INFINITY)
    }

    /// Like [`Interaction::new`] but with an explicit quadrature-defect
    /// tolerance. An infinite tolerance also disables the resolution guard.
    pub fn new_with_tolerance(
        grid: GridSpec,
        profile: PotentialProfile,
        integral: f64,
        n_particles: f64,
        beta: f64,
        defect_tol: f64,
    ) -> Result<Self> {
        if n_particles < 1.0 {
            return Err(Error::InvalidParameter {
                name: "n_particles",
                reason: format!("N must be >= 1, got {n_particles}"),
            });
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("beta must lie in [0, 1], got {beta}"),
            });
        }
        if integral <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "integral",
                reason: "int v must be positive".into(),
            });
        }
        let d = grid.d();
        let dx = grid.dx();
        let n_beta = n_particles.powf(beta);
        let got = n_beta * dx;
        if got > 0.5 && defect_tol.is_finite() {
            return Err(Error::Resolution {
                got,
                defect: f64::NAN,
                min_n: min_n_for(grid.length(), n_beta, 0.5),
            });
        }
        let scale = integral * n_particles.powf(d as f64 * beta);
        let centered: Vec<f64> = grid.centered_points();
        let v = sample_product(grid, |x| integral * profile.eval(x), &centered);
        let v_n = sample_product(grid, |x| {
            let scaled: Vec<f64> = x.iter().map(|&a| a * n_beta).collect();
            scale * profile.eval(&scaled)
        }, &centered);
        // quadrature invariant: int v_N = int v (change of variables)
        let mass_vn: f64 = v_n.data().iter().map(|z| z.re).sum::<f64>() * dx.powi(d as i32);
        let defect = (mass_vn - integral).abs() / integral;
        if defect > defect_tol {
            // find the resolution that brings the 1-d defect under 1e-8
            let mut n_fix = grid.n();
            let mut last = defect;
            while n_fix < (1 << 22) {
                n_fix *= 2;
                let h = grid.length() / n_fix as f64;
                let m = n_fix;
                let mut s = 0.0;
                for j in 0..m {
                    let x = j as f64 * h;
                    let xc = if x > grid.length() / 2.0 {
                        x - grid.length()
                    } else {
                        x
                    };
                    s += profile.eval_1d(xc * n_beta) * n_beta * h;
                }
                let d = (s - 1.0).abs();
                if d < 1e-8 {
                    break;
                }
                if d > 0.5 * last {
                    // box truncation dominates; more points cannot help
                    break;
                }
                last = d;
            }
            return Err(Error::Resolution {
                got,
                defect,
                min_n: n_fix,
            });
        }
        Ok(Self {
            grid,
            profile,
            integral,
            n_particles,
            beta,
            v,
            v_n,
            quadrature_defect: defect,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn profile(&self) -> PotentialProfile {
        self.profile
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn n_particles(&self) -> f64 {
        self.n_particles
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Base potential sampled on the grid.
    pub fn v(&self) -> &Field {
        &self.v
    }

    /// Scaled potential `N^(d beta) v(N^beta x)` sampled on the grid.
    pub fn v_n(&self) -> &Field {
        &self.v_n
    }

    pub fn quadrature_defect(&self) -> f64 {
        self.quadrature_defect
    }

    /// Analytic value of the scaled potential at a centered coordinate.
    pub fn v_n_at(&self, x: &[f64]) -> f64 {
        let d = self.grid.d() as f64;
        let n_beta = self.n_particles.powf(self.beta);
        let scaled: Vec<f64> = x.iter().map(|&a| a * n_beta).collect();
        self.integral * self.n_particles.powf(d * self.beta) * self.profile.eval(&scaled)
    }
}

fn sample_product(grid: GridSpec, f: impl Fn(&[f64]) -> f64, centered: &[f64]) -> Field {
    let d = grid.d();
    let shape: Vec<usize> = vec![grid.n(); d];
    let data = ArrayD::from_shape_fn(ndarray::IxDyn(&shape), |idx| {
        let x: Vec<f64> = (0..d).map(|a| centered[idx[a]]).collect();
        Complex64::new(f(&x), 0.0)
    });
    Field::new(grid, 1, data).expect("sampled field")
}

/// Which nonlinearity drives the condensate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Flavor {
    /// `(v_N * |phi|^2) phi` (the scaled Hartree equation).
    ScaledHartree,
    /// `(int v) |phi|^2 phi` (the limit equation for 0 < beta < 1).
    LimitNls,
}

/// One stored snapshot of the condensate.
#[derive(Debug, Clone)]
pub struct CondensateState {
    pub t: f64,
    pub phi: Field,
}

/// A mean-field run: snapshots at uniform sampling times plus conserved
/// quantities tracked every step.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub flavor: Flavor,
    pub states: Vec<CondensateState>,
    /// (t, mass, energy) at every integrator step.
    pub conserved: Vec<(f64, f64, f64)>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn sample_dt(&self) -> f64 {
        if self.states.len() > 1 {
            self.states[1].t - self.states[0].t
        } else {
            0.0
        }
    }

    pub fn final_state(&self) -> &CondensateState {
        self.states.last().expect("nonempty trajectory")
    }
}

/// Mass `||phi||_2^2` and the Hartree energy
/// `int |grad phi|^2 + (1/2) int (v_N * |phi|^2) |phi|^2`
/// (the limit flavor replaces the convolution by `(int v)|phi|^2`).
pub fn mass_energy(phi: &Field, interaction: &Interaction, flavor: Flavor) -> Result<(f64, f64)> {
    let mass = phi.norm_l2().powi(2);
    let grad_sq = phi
        .weighted_l2(|k| k.iter().map(|x| x * x).sum())
        .expect("polynomial weight")
        .powi(2);
    let dens = density(phi);
    let w = effective_potential(&dens, interaction, flavor)?;
    let dx_d = phi.cell_volume();
    let pot: f64 = w
        .data()
        .iter()
        .zip(dens.data().iter())
        .map(|(a, b)| a.re * b.re)
        .sum::<f64>()
        * dx_d;
    Ok((mass, grad_sq + 0.5 * pot))
}

fn density(phi: &Field) -> Field {
    let mut d = phi.clone();
    for v in d.data_mut().iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    d
}

fn effective_potential(dens: &Field, interaction: &Interaction, flavor: Flavor) -> Result<Field> {
    match flavor {
        Flavor::ScaledHartree => interaction.v_n().convolve(dens),
        Flavor::LimitNls => Ok(dens.scaled(Complex64::new(interaction.integral(), 0.0))),
    }
}

/// Strang split-step evolution of the condensate equation.
///
/// Kinetic half-steps are exact Fourier multipliers `exp(-i dt/2 |xi|^2)`;
/// the nonlinear step is the pointwise phase `exp(-i dt W)` with `W`
/// refreshed from the mid-step field, which leaves `|phi|^2` and hence `W`
/// invariant during the substep. Stores every `store_every`-th step.
pub fn evolve_hartree(
    phi0: &Field,
    interaction: &Interaction,
    flavor: Flavor,
    dt: f64,
    steps: usize,
    store_every: usize,
) -> Result<Trajectory> {
    if phi0.rank() != 1 || phi0.grid() != interaction.grid() {
        return Err(Error::GridMismatch(
            format!("{:?}", phi0.grid()),
            format!("{:?}", interaction.grid()),
        ));
    }
    let kmax2 = phi0.grid().max_wavenumber_sq(1);
    if dt * kmax2 > std::f64::consts::PI {
        return Err(Error::StepGuard(dt * kmax2));
    }
    let store_every = store_every.max(1);
    let half_kinetic = kinetic_phase(phi0, dt / 2.0);
    let mut phi = phi0.clone();
    let mut states = vec![CondensateState {
        t: 0.0,
        phi: phi.clone(),
    }];
    let (m0, e0) = mass_energy(&phi, interaction, flavor)?;
    let mut conserved = vec![(0.0, m0, e0)];
    for step in 1..=steps {
        phi = apply_phase(&phi, &half_kinetic);
        let dens = density(&phi);
        let w = effective_potential(&dens, interaction, flavor)?;
        for (z, wv) in phi.data_mut().iter_mut().zip(w.data().iter()) {
            *z *= Complex64::new(0.0, -dt * wv.re).exp();
        }
        phi = apply_phase(&phi, &half_kinetic);
        let mass = phi.norm_l2().powi(2);
        if !mass.is_finite() {
            return Err(Error::NanAbort {
                step,
                context: "hartree",
            });
        }
        let t = step as f64 * dt;
        if step % store_every == 0 || step == steps {
            let (m, e) = mass_energy(&phi, interaction, flavor)?;
            conserved.push((t, m, e));
            states.push(CondensateState { t, phi: phi.clone() });
        }
    }
    Ok(Trajectory {
        flavor,
        states,
        conserved,
    })
}

/// Precompute the kinetic multiplier values for one half step.
fn kinetic_phase(phi: &Field, tau: f64) -> Vec<Complex64> {
    let mut vals = Vec::with_capacity(phi.data().len());
    let probe = phi.clone();
    probe.for_each_mode(|_, k| {
        let k2: f64 = k.iter().map(|x| x * x).sum();
        vals.push(Complex64::new(0.0, -tau * k2).exp());
    });
    vals
}

fn apply_phase(phi: &Field, phase: &[Complex64]) -> Field {
    let mut hat = phi.fft_forward();
    for (z, p) in hat.data_mut().iter_mut().zip(phase.iter()) {
        *z *= *p;
    }
    hat.fft_inverse()
}

/// One row of the decay table.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecayRow {
    pub t: f64,
    pub linf: f64,
    pub l3: f64,
    pub l4: f64,
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecayReport {
    pub derivative_order: usize,
    pub rows: Vec<DecayRow>,
    /// Fitted exponent of the L^infinity column over the requested window.
    pub linf_exponent: ExponentFit,
    /// The dispersive expectation `-d/2` in this dimension.
    pub expected_exponent: f64,
}

/// Sup, L^3 and L^4 norms of `d_t^j phi` along a trajectory, with the
/// decay exponent of the sup norm fitted over `window`. Time derivatives
/// use 4th-order centered stencils on the stored sampling.
pub fn decay_report(
    traj: &Trajectory,
    j: usize,
    window: (f64, f64),
) -> Result<DecayReport> {
    if j > 3 {
        return Err(Error::InvalidParameter {
            name: "j",
            reason: "time-derivative order must be 0..=3".into(),
        });
    }
    let h = traj.sample_dt();
    let margin = match j {
        0 => 0,
        1 | 2 => 2,
        _ => 3,
    };
    if traj.states.len() < 2 * margin + 1 {
        return Err(Error::WindowOutOfRange {
            lo: window.0,
            hi: window.1,
            max: traj.states.last().map(|s| s.t).unwrap_or(0.0),
        });
    }
    let mut rows = Vec::new();
    for i in margin..traj.states.len() - margin {
        let f = |off: isize| -> &Field { &traj.states[(i as isize + off) as usize].phi };
        let dphi = match j {
            0 => f(0).clone(),
            1 => {
                // (-f2 + 8 f1 - 8 f-1 + f-2) / (12 h)
                let mut acc = f(2).scaled(Complex64::new(-1.0, 0.0));
                acc = acc.add(&f(1).scaled(Complex64::new(8.0, 0.0)))?;
                acc = acc.add(&f(-1).scaled(Complex64::new(-8.0, 0.0)))?;
                acc = acc.add(&f(-2).scaled(Complex64::new(1.0, 0.0)))?;
                acc.scaled(Complex64::new(1.0 / (12.0 * h), 0.0))
            }
            2 => {
                // (-f2 + 16 f1 - 30 f0 + 16 f-1 - f-2) / (12 h^2)
                let mut acc = f(2).scaled(Complex64::new(-1.0, 0.0));
                acc = acc.add(&f(1).scaled(Complex64::new(16.0, 0.0)))?;
                acc = acc.add(&f(0).scaled(Complex64::new(-30.0, 0.0)))?;
                acc = acc.add(&f(-1).scaled(Complex64::new(16.0, 0.0)))?;
                acc = acc.add(&f(-2).scaled(Complex64::new(-1.0, 0.0)))?;
                acc.scaled(Complex64::new(1.0 / (12.0 * h * h), 0.0))
            }
            _ => {
                // (-f-3 + 8 f-2 - 13 f-1 + 13 f1 - 8 f2 + f3) / (8 h^3)
                let mut acc = f(-3).scaled(Complex64::new(-1.0, 0.0));
                acc = acc.add(&f(-2).scaled(Complex64::new(8.0, 0.0)))?;
                acc = acc.add(&f(-1).scaled(Complex64::new(-13.0, 0.0)))?;
                acc = acc.add(&f(1).scaled(Complex64::new(13.0, 0.0)))?;
                acc = acc.add(&f(2).scaled(Complex64::new(-8.0, 0.0)))?;
                acc = acc.add(&f(3).scaled(Complex64::new(1.0, 0.0)))?;
                acc.scaled(Complex64::new(1.0 / (8.0 * h * h * h), 0.0))
            }
        };
        rows.push(DecayRow {
            t: traj.states[i].t,
            linf: dphi.norm_linf(),
            l3: dphi.norm_lp(3.0),
            l4: dphi.norm_lp(4.0),
        });
    }
    let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let linf: Vec<f64> = rows.iter().map(|r| r.linf).collect();
    let linf_exponent = fit_decay_window(&times, &linf, window)?;
    let d = traj.states[0].phi.grid().d();
    Ok(DecayReport {
        derivative_order: j,
        rows,
        linf_exponent,
        expected_exponent: -(d as f64) / 2.0,
    })
}

/// Per-time L^2 distances between two trajectories on common sampling.
pub fn compare_to_limit(a: &Trajectory, b: &Trajectory) -> Result<Vec<(f64, f64)>> {
    if a.states.len() != b.states.len() {
        return Err(Error::TimeMismatch);
    }
    let mut out = Vec::with_capacity(a.states.len());
    for (sa, sb) in a.states.iter().zip(&b.states) {
        if (sa.t - sb.t).abs() > 1e-12 * (1.0 + sa.t.abs()) {
            return Err(Error::TimeMismatch);
        }
        out.push((sa.t, sa.phi.sub(&sb.phi)?.norm_l2()));
    }
    Ok(out)
}

/// Periodic solution of `Lap w = -v/2` for the mean-zero part of the base
/// potential, returned with the removed mean. `w_hat = v_hat / (2 |xi|^2)`.
pub fn poisson_half(v: &Field) -> Result<(Field, f64)> {
    if v.rank() != 1 || v.grid().d() != 1 {
        return Err(Error::InvalidParameter {
            name: "v",
            reason: "poisson_half expects a rank-1 field on a d=1 grid".into(),
        });
    }
    let mean = v.data().iter().map(|z| z.re).sum::<f64>() / v.data().len() as f64;
    let mut hat = v.fft_forward();
    let mut idx = 0usize;
    let mut factors = Vec::with_capacity(hat.data().len());
    hat.for_each_mode(|_, k| {
        let k2: f64 = k.iter().map(|x| x * x).sum();
        factors.push(if k2 == 0.0 { 0.0 } else { 0.5 / k2 });
        idx += 1;
    });
    for (z, f) in hat.data_mut().iter_mut().zip(factors) {
        *z *= f;
    }
    Ok((hat.fft_inverse(), mean))
}

/// Evaluate the Fourier series of a gridded 1-d field at an arbitrary point.
fn eval_fourier_series(hat: &Field, x: f64) -> Complex64 {
    let grid = hat.grid();
    let l = grid.length();
    let xm = x.rem_euclid(l);
    let xi = grid.wavenumbers();
    let flat = hat.data().as_slice().expect("layout");
    let mut s = Complex64::default();
    for (m, &z) in flat.iter().enumerate() {
        s += z * (Complex64::i() * xi[m] * xm).exp();
    }
    s / l
}

/// Residual of the concentration ansatz: compares the grid forcing
/// `{(N^(d beta) v~(N^beta .) w(N^beta .)) * |phi|^2} phi` against the
/// limit `(int v~ w) |phi|^2 phi`, where `w` solves `Lap w = -v~/2` for
/// the mean-projected potential `v~`. Returns per-time relative L^2
/// distances together with the removed mean.
pub fn heuristic_ansatz_check(
    interaction: &Interaction,
    traj: &Trajectory,
) -> Result<(Vec<(f64, f64)>, f64)> {
    let grid = interaction.grid();
    if grid.d() != 1 {
        return Err(Error::InvalidParameter {
            name: "interaction",
            reason: "ansatz check runs in d=1".into(),
        });
    }
    let v = interaction.v();
    let (w, mean) = poisson_half(v)?;
    let w_hat = w.fft_forward();
    let n_beta = interaction.n_particles().powf(interaction.beta());
    let d_beta = interaction
        .n_particles()
        .powf(grid.d() as f64 * interaction.beta());
    // kernel K_N(x) = N^(d beta) v~(N^beta x) w(N^beta x), sampled on the grid
    let centered = grid.centered_points();
    let mut kern = Field::zeros(grid, 1)?;
    {
        let data = kern.data_mut();
        for (j, z) in data.iter_mut().enumerate() {
            let xc = centered[j];
            let v_tilde =
                interaction.integral() * interaction.profile().eval_1d(xc * n_beta) - mean;
            let wv = eval_fourier_series(&w_hat, xc * n_beta);
            *z = wv * d_beta * v_tilde;
        }
    }
    // limit constant g = int v~ w over the box
    let dx = grid.dx();
    let g_limit: f64 = v
        .data()
        .iter()
        .zip(w.data().iter())
        .map(|(a, b)| (a.re - mean) * b.re)
        .sum::<f64>()
        * dx;
    let mut out = Vec::with_capacity(traj.states.len());
    for st in &traj.states {
        let dens = density(&st.phi);
        let conv = kern.convolve(&dens)?;
        let mut lhs = st.phi.clone();
        for (z, c) in lhs.data_mut().iter_mut().zip(conv.data().iter()) {
            *z *= c.re;
        }
        let mut rhs = st.phi.clone();
        for (z, c) in rhs.data_mut().iter_mut().zip(dens.data().iter()) {
            *z *= g_limit * c.re;
        }
        let denom = rhs.norm_l2().max(1e-300);
        out.push((st.t, lhs.sub(&rhs)?.norm_l2() / denom));
    }
    Ok((out, mean))
}

/// Normalized Gaussian initial datum, optionally boosted by a momentum kick.
pub fn gaussian_phi0(grid: GridSpec, width: f64, kick: f64) -> Result<Field> {
    let l = grid.length();
    let c = l / 2.0;
    let f = Field::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|&a| (a - c) * (a - c)).sum();
        let phase = Complex64::new(0.0, kick * (x[0] - c)).exp();
        Complex64::new((-r2 / (2.0 * width * width)).exp(), 0.0) * phase
    })?;
    let nrm = f.norm_l2();
    Ok(f.scaled(Complex64::new(1.0 / nrm, 0.0)))
}
