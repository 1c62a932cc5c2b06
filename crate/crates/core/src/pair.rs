//! Pair-excitation dynamics: builders for `m` and `g_pot`, the Schroedinger/
//! Wigner flow of the doubled kernels `(s2, p2)`, the three-way splitting of
//! `s2`, and the elliptic-estimate and norm trackers.
//!
//! The flow integrates
//! `S(s2) = 2m + m o p2 + p2bar o m` and `W(p2bar) = m o s2bar - s2 o mbar`
//! by Strang splitting: the kinetic content of `g^T o s + s o g` (resp. the
//! commutator) is the exact Fourier multiplier `exp(-i (|xi|^2 + |eta|^2) t)`
//! (resp. `exp(-i (|xi|^2 - |eta|^2) t)`), and the bounded remainder advances
//! with a classical fourth-order Runge-Kutta substep driven by the cached
//! mean-field trajectory.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fit::ExponentFit;
use crate::grid::{mixed_norm, Field, GridSpec, OuterNorm};
use crate::kernel::{bogoliubov_residual, recover_ucp, Kernel};
use crate::meanfield::{Interaction, Trajectory};

/// Abort threshold for the Bogoliubov consistency residual.
pub const RESIDUAL_ABORT: f64 = 1e-4;

/// `m(t, x, y) = -v_N(x - y) phi(t, x) phi(t, y)`.
pub fn build_m(phi: &Field, interaction: &Interaction) -> Result<Kernel> {
    let grid = check_1d(phi, interaction)?;
    let n = grid.n();
    let vn = interaction.v_n();
    let vn_flat = vn.data().as_slice().expect("layout");
    let phi_flat = phi.data().as_slice().expect("layout");
    let data = Array2::from_shape_fn((n, n), |(i, j)| {
        let v = vn_flat[(i + n - j) % n].re;
        -v * phi_flat[i] * phi_flat[j]
    });
    Kernel::new(grid, data)
}

/// The potential part of `g`: a real diagonal multiplier `(v_N * |phi|^2)(x)`
/// plus the hermitian kernel `v_N(x - y) conj(phi)(x) phi(y)`.
#[derive(Debug, Clone)]
pub struct GPot {
    pub grid: GridSpec,
    pub multiplier: Vec<f64>,
    pub kernel: Kernel,
}

pub fn build_gpot(phi: &Field, interaction: &Interaction) -> Result<GPot> {
    let grid = check_1d(phi, interaction)?;
    let n = grid.n();
    let dens = {
        let mut d = phi.clone();
        for v in d.data_mut().iter_mut() {
            *v = Complex64::new(v.norm_sqr(), 0.0);
        }
        d
    };
    let conv = interaction.v_n().convolve(&dens)?;
    let multiplier: Vec<f64> = conv.data().iter().map(|z| z.re).collect();
    let vn_flat = interaction.v_n().data().as_slice().expect("layout");
    let phi_flat = phi.data().as_slice().expect("layout");
    let data = Array2::from_shape_fn((n, n), |(i, j)| {
        let v = vn_flat[(i + n - j) % n].re;
        v * phi_flat[i].conj() * phi_flat[j]
    });
    Ok(GPot {
        grid,
        multiplier,
        kernel: Kernel::new(grid, data)?,
    })
}

impl GPot {
    /// Operator-norm estimate of the full potential `V` acting on kernels,
    /// via the one-particle bound `(mult) + (kernel)` by power iteration.
    pub fn op_norm_estimate(&self, iters: usize) -> f64 {
        let n = self.grid.n();
        let mut op = self.kernel.to_op();
        for i in 0..n {
            op[(i, i)] += Complex64::new(self.multiplier[i], 0.0);
        }
        let mut v = nalgebra::DVector::<Complex64>::from_fn(n, |i, _| {
            Complex64::new((0.3 * i as f64).cos(), (0.7 * i as f64).sin())
        });
        let adj = op.adjoint();
        let mut norm = 0.0;
        for _ in 0..iters {
            let w = &adj * (&op * &v);
            let wn = w.norm();
            if wn == 0.0 {
                return 0.0;
            }
            norm = wn.sqrt();
            v = w / Complex64::new(wn, 0.0);
        }
        norm
    }
}

/// `V(u) = g_pot^T o u + u o g_pot`, evaluated termwise:
/// `(W(x) + W(y)) u + conj(K) o u + u o K` with `K` the `g_pot` kernel.
pub fn apply_v(u: &Kernel, g: &GPot) -> Result<Kernel> {
    u.check_same_grid(&g.kernel)?;
    let n = g.grid.n();
    let mut out = u.conj_kernel_compose(&g.kernel)?;
    let ud = u.data();
    let od = out.data_mut();
    for i in 0..n {
        for j in 0..n {
            od[[i, j]] += (g.multiplier[i] + g.multiplier[j]) * ud[[i, j]];
        }
    }
    Ok(out)
}

/// Commutator `[g_pot^T, P] = g_pot^T o P - P o g_pot^T` for the Wigner flow.
fn commutator_gpot_t(p: &Kernel, g: &GPot) -> Result<Kernel> {
    let n = g.grid.n();
    let kbar = g.kernel.conj();
    let left = kbar.compose(p)?;
    let right = p.compose(&kbar)?;
    let mut out = left.sub(&right)?;
    let pd = p.data();
    let od = out.data_mut();
    for i in 0..n {
        for j in 0..n {
            od[[i, j]] += (g.multiplier[i] - g.multiplier[j]) * pd[[i, j]];
        }
    }
    Ok(out)
}

impl Kernel {
    /// `conj(K_g) o u + u o K_g` (helper for [`apply_v`]).
    fn conj_kernel_compose(&self, kg: &Kernel) -> Result<Kernel> {
        let a = kg.conj().compose(self)?;
        let b = self.compose(kg)?;
        a.add(&b)
    }

    fn to_field(&self) -> Field {
        Field::new(self.grid(), 2, self.data().clone().into_dyn()).expect("kernel field")
    }

    fn apply_kinetic(&self, phase: &[Complex64]) -> Kernel {
        let f = self.to_field();
        let mut hat = f.fft_forward();
        for (z, p) in hat.data_mut().iter_mut().zip(phase.iter()) {
            *z *= *p;
        }
        let back = hat.fft_inverse();
        let n = self.grid().n();
        let data = back
            .into_data()
            .into_shape_with_order((n, n))
            .expect("shape");
        Kernel::new(self.grid(), data).expect("kinetic step")
    }
}

fn check_1d(phi: &Field, interaction: &Interaction) -> Result<GridSpec> {
    let grid = interaction.grid();
    if phi.grid() != grid || phi.rank() != 1 || grid.d() != 1 {
        return Err(Error::GridMismatch(
            format!("{:?}", phi.grid()),
            format!("{:?}", grid),
        ));
    }
    Ok(grid)
}

/// Snapshot of the doubled pair kernels.
#[derive(Debug, Clone)]
pub struct PairState {
    pub t: f64,
    pub s2: Kernel,
    pub p2: Kernel,
}

/// Snapshot of the three-way split `s2 = sa0 + sa1 + se`.
#[derive(Debug, Clone)]
pub struct SplitState {
    pub t: f64,
    pub sa0: Kernel,
    pub sa1: Kernel,
    pub se: Kernel,
    pub p2: Kernel,
}

#[derive(Debug, Clone)]
pub struct PairTrajectory {
    pub states: Vec<PairState>,
    /// Bogoliubov residual at each stored state.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SplitTrajectory {
    pub states: Vec<SplitState>,
}

impl SplitTrajectory {
    pub fn sum_state(&self, i: usize) -> Result<PairState> {
        let st = &self.states[i];
        Ok(PairState {
            t: st.t,
            s2: st.sa0.add(&st.sa1)?.add(&st.se)?,
            p2: st.p2.clone(),
        })
    }
}

/// Mean-field samples at half-step granularity for the pair flow.
struct PhiClock<'a> {
    traj: &'a Trajectory,
    stride: usize,
}

impl<'a> PhiClock<'a> {
    fn new(traj: &'a Trajectory, dt: f64, steps: usize) -> Result<Self> {
        let sample = traj.sample_dt();
        if sample <= 0.0 {
            return Err(Error::TimeMismatch);
        }
        let ratio = (dt / 2.0) / sample;
        let stride = ratio.round() as usize;
        if stride == 0 || (ratio - stride as f64).abs() > 1e-9 {
            return Err(Error::TimeMismatch);
        }
        if steps * 2 * stride + 1 > traj.states.len() {
            return Err(Error::WindowOutOfRange {
                lo: 0.0,
                hi: dt * steps as f64,
                max: traj.states.last().map(|s| s.t).unwrap_or(0.0),
            });
        }
        Ok(Self { traj, stride })
    }

    /// Field at `k` half-steps of size `dt/2`.
    fn phi(&self, k: usize) -> &'a Field {
        &self.traj.states[k * self.stride].phi
    }
}

struct BoundedOps<'a> {
    interaction: &'a Interaction,
}

impl BoundedOps<'_> {
    fn m_and_g(&self, phi: &Field) -> Result<(Kernel, GPot)> {
        Ok((
            build_m(phi, self.interaction)?,
            build_gpot(phi, self.interaction)?,
        ))
    }
}

/// Right side of the bounded (non-kinetic) part of the coupled flow,
/// in the variables `(s2, P)` with `P = p2bar`.
fn bounded_rhs(
    s2: &Kernel,
    p_bar: &Kernel,
    m: &Kernel,
    g: &GPot,
) -> Result<(Kernel, Kernel)> {
    let p2 = p_bar.conj();
    let i = Complex64::i();
    // s2' = i (2m + m o p2 + p2bar o m - V(s2))
    let mut rhs_s = m.scaled(Complex64::new(2.0, 0.0));
    rhs_s = rhs_s.add(&m.compose(&p2)?)?;
    rhs_s = rhs_s.add(&p_bar.compose(m)?)?;
    rhs_s = rhs_s.sub(&apply_v(s2, g)?)?;
    let rhs_s = rhs_s.scaled(i);
    // P' = i (m o s2bar - s2 o mbar - [g_pot^T, P])
    let mut rhs_p = m.compose(&s2.conj())?;
    rhs_p = rhs_p.sub(&s2.compose(&m.conj())?)?;
    rhs_p = rhs_p.sub(&commutator_gpot_t(p_bar, g)?)?;
    let rhs_p = rhs_p.scaled(i);
    Ok((rhs_s, rhs_p))
}

fn rk4_bounded(
    s2: Kernel,
    p_bar: Kernel,
    dt: f64,
    m0: &Kernel,
    g0: &GPot,
    m1: &Kernel,
    g1: &GPot,
    m2: &Kernel,
    g2: &GPot,
) -> Result<(Kernel, Kernel)> {
    let h = Complex64::new(dt, 0.0);
    let half = Complex64::new(dt / 2.0, 0.0);
    let (k1s, k1p) = bounded_rhs(&s2, &p_bar, m0, g0)?;
    let (k2s, k2p) = bounded_rhs(
        &s2.add(&k1s.scaled(half))?,
        &p_bar.add(&k1p.scaled(half))?,
        m1,
        g1,
    )?;
    let (k3s, k3p) = bounded_rhs(
        &s2.add(&k2s.scaled(half))?,
        &p_bar.add(&k2p.scaled(half))?,
        m1,
        g1,
    )?;
    let (k4s, k4p) = bounded_rhs(&s2.add(&k3s.scaled(h))?, &p_bar.add(&k3p.scaled(h))?, m2, g2)?;
    let w = Complex64::new(dt / 6.0, 0.0);
    let two = Complex64::new(2.0, 0.0);
    let s_new = s2.add(
        &k1s.add(&k2s.scaled(two))?
            .add(&k3s.scaled(two))?
            .add(&k4s)?
            .scaled(w),
    )?;
    let p_new = p_bar.add(
        &k1p.add(&k2p.scaled(two))?
            .add(&k3p.scaled(two))?
            .add(&k4p)?
            .scaled(w),
    )?;
    Ok((s_new, p_new))
}

fn kinetic_phases(grid: GridSpec, tau: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    let probe = Field::zeros(grid, 2).expect("probe");
    let mut schr = Vec::with_capacity(probe.data().len());
    let mut wign = Vec::with_capacity(probe.data().len());
    probe.for_each_mode(|_, k| {
        let (xi2, eta2) = (k[0] * k[0], k[1] * k[1]);
        schr.push(Complex64::new(0.0, -tau * (xi2 + eta2)).exp());
        wign.push(Complex64::new(0.0, -tau * (xi2 - eta2)).exp());
    });
    (schr, wign)
}

/// Evolve `(s2, p2)` from vanishing data along a cached mean-field
/// trajectory sampled at `dt/2` (or an integer refinement).
pub fn evolve_pair(
    traj: &Trajectory,
    interaction: &Interaction,
    dt: f64,
    steps: usize,
    store_every: usize,
) -> Result<PairTrajectory> {
    let grid = interaction.grid();
    guard_pair_grid(grid, dt)?;
    let clock = PhiClock::new(traj, dt, steps)?;
    let ops = BoundedOps { interaction };
    let (schr, wign) = kinetic_phases(grid, dt / 2.0);
    let store_every = store_every.max(1);

    let mut s2 = Kernel::zeros(grid)?;
    let mut p_bar = Kernel::zeros(grid)?;
    let mut out = PairTrajectory {
        states: vec![PairState {
            t: 0.0,
            s2: s2.clone(),
            p2: p_bar.conj(),
        }],
        residuals: vec![0.0],
    };
    for step in 0..steps {
        let (m0, g0) = ops.m_and_g(clock.phi(2 * step))?;
        let (m1, g1) = ops.m_and_g(clock.phi(2 * step + 1))?;
        let (m2, g2) = ops.m_and_g(clock.phi(2 * step + 2))?;
        s2 = s2.apply_kinetic(&schr);
        p_bar = p_bar.apply_kinetic(&wign);
        let (s_new, p_new) = rk4_bounded(s2, p_bar, dt, &m0, &g0, &m1, &g1, &m2, &g2)?;
        s2 = s_new.apply_kinetic(&schr);
        p_bar = p_new.apply_kinetic(&wign);
        if !s2.hs_norm().is_finite() {
            return Err(Error::NanAbort {
                step,
                context: "pair",
            });
        }
        if (step + 1) % store_every == 0 || step + 1 == steps {
            let p2 = p_bar.conj();
            let resid = bogoliubov_residual(&s2, &p2)?;
            if resid > RESIDUAL_ABORT {
                return Err(Error::ResidualAbort(resid));
            }
            out.states.push(PairState {
                t: (step + 1) as f64 * dt,
                s2: s2.clone(),
                p2,
            });
            out.residuals.push(resid);
        }
    }
    Ok(out)
}

/// Evolve the split system `(sa0, sa1, se, p2)`; `sa0` sees only the free
/// flow forced by `2m`, `sa1` absorbs `-V(sa0)`, `se` the `p2` coupling,
/// and `p2` is driven by the recombined `s2 = sa0 + sa1 + se`.
pub fn evolve_split(
    traj: &Trajectory,
    interaction: &Interaction,
    dt: f64,
    steps: usize,
    store_every: usize,
) -> Result<SplitTrajectory> {
    let grid = interaction.grid();
    guard_pair_grid(grid, dt)?;
    let clock = PhiClock::new(traj, dt, steps)?;
    let ops = BoundedOps { interaction };
    let (schr, wign) = kinetic_phases(grid, dt / 2.0);
    let store_every = store_every.max(1);

    let zero = Kernel::zeros(grid)?;
    let mut state = [zero.clone(), zero.clone(), zero.clone(), zero.clone()];
    let mut out = SplitTrajectory {
        states: vec![SplitState {
            t: 0.0,
            sa0: zero.clone(),
            sa1: zero.clone(),
            se: zero.clone(),
            p2: zero.conj(),
        }],
    };

    // bounded RHS of the 4-component system (variables sa0, sa1, se, P)
    let rhs = |st: &[Kernel; 4], m: &Kernel, g: &GPot| -> Result<[Kernel; 4]> {
        let i = Complex64::i();
        let [sa0, sa1, se, p_bar] = st;
        let p2 = p_bar.conj();
        let r0 = m.scaled(Complex64::new(2.0, 0.0)).scaled(i);
        let r1 = apply_v(sa1, g)?
            .add(&apply_v(sa0, g)?)?
            .scaled(-i);
        let r2 = m
            .compose(&p2)?
            .add(&p_bar.compose(m)?)?
            .sub(&apply_v(se, g)?)?
            .scaled(i);
        let s2 = sa0.add(sa1)?.add(se)?;
        let r3 = m
            .compose(&s2.conj())?
            .sub(&s2.compose(&m.conj())?)?
            .sub(&commutator_gpot_t(p_bar, g)?)?
            .scaled(i);
        Ok([r0, r1, r2, r3])
    };
    let add_scaled = |a: &[Kernel; 4], b: &[Kernel; 4], w: Complex64| -> Result<[Kernel; 4]> {
        Ok([
            a[0].add(&b[0].scaled(w))?,
            a[1].add(&b[1].scaled(w))?,
            a[2].add(&b[2].scaled(w))?,
            a[3].add(&b[3].scaled(w))?,
        ])
    };

    for step in 0..steps {
        let (m0, g0) = ops.m_and_g(clock.phi(2 * step))?;
        let (m1, g1) = ops.m_and_g(clock.phi(2 * step + 1))?;
        let (m2, g2) = ops.m_and_g(clock.phi(2 * step + 2))?;
        for (idx, phases) in [(0usize, &schr), (1, &schr), (2, &schr), (3, &wign)] {
            state[idx] = state[idx].apply_kinetic(phases);
        }
        let h = Complex64::new(dt, 0.0);
        let half = Complex64::new(dt / 2.0, 0.0);
        let k1 = rhs(&state, &m0, &g0)?;
        let k2 = rhs(&add_scaled(&state, &k1, half)?, &m1, &g1)?;
        let k3 = rhs(&add_scaled(&state, &k2, half)?, &m1, &g1)?;
        let k4 = rhs(&add_scaled(&state, &k3, h)?, &m2, &g2)?;
        let w = Complex64::new(dt / 6.0, 0.0);
        let two = Complex64::new(2.0, 0.0);
        for c in 0..4 {
            let incr = k1[c]
                .add(&k2[c].scaled(two))?
                .add(&k3[c].scaled(two))?
                .add(&k4[c])?
                .scaled(w);
            state[c] = state[c].add(&incr)?;
        }
        for (idx, phases) in [(0usize, &schr), (1, &schr), (2, &schr), (3, &wign)] {
            state[idx] = state[idx].apply_kinetic(phases);
        }
        if (step + 1) % store_every == 0 || step + 1 == steps {
            out.states.push(SplitState {
                t: (step + 1) as f64 * dt,
                sa0: state[0].clone(),
                sa1: state[1].clone(),
                se: state[2].clone(),
                p2: state[3].conj(),
            });
        }
    }
    Ok(out)
}

fn guard_pair_grid(grid: GridSpec, dt: f64) -> Result<()> {
    if grid.d() != 1 {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: "pair kernels run at spatial dimension d=1".into(),
        });
    }
    let kmax2 = grid.max_wavenumber_sq(2);
    if dt * kmax2 > 2.0 * std::f64::consts::PI * 4.0 {
        // exact multiplier, no CFL; this only guards absurd sampling
        return Err(Error::StepGuard(dt * kmax2));
    }
    Ok(())
}

/// Algebraic `d_t s2` from the equation's right side.
pub fn pair_time_derivative(
    state: &PairState,
    phi: &Field,
    interaction: &Interaction,
) -> Result<Kernel> {
    let m = build_m(phi, interaction)?;
    let g = build_gpot(phi, interaction)?;
    let p_bar = state.p2.conj();
    let (rhs_s, _) = bounded_rhs(&state.s2, &p_bar, &m, &g)?;
    // add the kinetic part i (Lap_x + Lap_y) s2
    let f = state.s2.to_field();
    let lap = f.apply_multiplier(|k| {
        Complex64::new(0.0, -(k[0] * k[0] + k[1] * k[1]))
    });
    let n = state.s2.grid().n();
    let lap_k = Kernel::new(
        state.s2.grid(),
        lap.into_data().into_shape_with_order((n, n)).expect("shape"),
    )?;
    // (1/i) d_t = -Lap ... => d_t includes +i*Lap: multiplier above is -i k^2 = i*(-k^2) = i*Lap
    rhs_s.add(&lap_k)
}

/// Both sides of the elliptic estimate
/// `int |m_hat|^2 / (|xi|^2+|eta|^2)^2 <= C ||phi||_3^4`
/// (order `j = 0`) or its first time-derivative variant.
pub fn elliptic_check(
    phi: &Field,
    interaction: &Interaction,
    order: usize,
) -> Result<(f64, f64, f64)> {
    if order > 1 {
        return Err(Error::InvalidParameter {
            name: "order",
            reason: "elliptic check implements j = 0, 1".into(),
        });
    }
    let (m_kernel, rhs) = match order {
        0 => {
            let m = build_m(phi, interaction)?;
            (m, phi.norm_lp(3.0).powi(4))
        }
        _ => {
            // d_t m = -v_N (d_t phi (x) phi(y) + phi(x) d_t phi(y)),
            // with d_t phi = i (Lap phi - (v_N * |phi|^2) phi)
            let dens = {
                let mut d = phi.clone();
                for v in d.data_mut().iter_mut() {
                    *v = Complex64::new(v.norm_sqr(), 0.0);
                }
                d
            };
            let w = interaction.v_n().convolve(&dens)?;
            let lap_phi = phi.apply_multiplier(|k| {
                Complex64::new(-k.iter().map(|x| x * x).sum::<f64>(), 0.0)
            });
            let mut dphi = lap_phi;
            for (z, (wv, pv)) in dphi
                .data_mut()
                .iter_mut()
                .zip(w.data().iter().zip(phi.data().iter()))
            {
                *z = Complex64::i() * (*z - wv.re * pv);
            }
            let grid = interaction.grid();
            let n = grid.n();
            let vn_flat = interaction.v_n().data().as_slice().expect("layout");
            let p = phi.data().as_slice().expect("layout");
            let dp = dphi.data().as_slice().expect("layout");
            let data = Array2::from_shape_fn((n, n), |(i, j)| {
                let v = vn_flat[(i + n - j) % n].re;
                -v * (dp[i] * p[j] + p[i] * dp[j])
            });
            (
                Kernel::new(grid, data)?,
                phi.norm_lp(3.0).powi(2) * dphi.norm_lp(3.0).powi(2),
            )
        }
    };
    let f = m_kernel.to_field();
    let lhs = f
        .weighted_l2(|k| {
            let s: f64 = k.iter().map(|x| x * x).sum();
            if s == 0.0 {
                f64::INFINITY
            } else {
                1.0 / (s * s)
            }
        })?
        .powi(2);
    let ratio = if rhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok((lhs, rhs, ratio))
}

/// One row of the pair norm table.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairNormRow {
    pub t: f64,
    pub s2_l2: f64,
    pub s2_h32: f64,
    pub dt_s2_h32: f64,
    pub u_l2: f64,
    pub p_l2: f64,
    pub u_col_inf: f64,
    pub u_col_l4: f64,
    pub p2_l2: f64,
    pub residual: f64,
}

/// Norm table across a pair trajectory; requires the `recover_ucp` gate.
pub fn norm_tracker(
    pair: &PairTrajectory,
    traj: &Trajectory,
    interaction: &Interaction,
) -> Result<Vec<PairNormRow>> {
    let mut rows = Vec::with_capacity(pair.states.len());
    for (i, st) in pair.states.iter().enumerate() {
        let ucp = recover_ucp(&st.s2, &st.p2)?;
        let phi = phi_at_time(traj, st.t)?;
        let dt_s2 = pair_time_derivative(st, phi, interaction)?;
        rows.push(PairNormRow {
            t: st.t,
            s2_l2: st.s2.hs_norm(),
            s2_h32: st.s2.to_field().sobolev_norm(1.5),
            dt_s2_h32: dt_s2.to_field().sobolev_norm(1.5),
            u_l2: ucp.u.hs_norm(),
            p_l2: ucp.p.hs_norm(),
            u_col_inf: mixed_norm(&ucp.u.to_field(), OuterNorm::LInf)?,
            u_col_l4: mixed_norm(&ucp.u.to_field(), OuterNorm::L4)?,
            p2_l2: st.p2.hs_norm(),
            residual: pair.residuals.get(i).copied().unwrap_or(f64::NAN),
        });
    }
    Ok(rows)
}

fn phi_at_time<'a>(traj: &'a Trajectory, t: f64) -> Result<&'a Field> {
    let sample = traj.sample_dt();
    if sample <= 0.0 {
        return Err(Error::TimeMismatch);
    }
    let idx = (t / sample).round() as usize;
    let st = traj.states.get(idx).ok_or(Error::TimeMismatch)?;
    if (st.t - t).abs() > 1e-9 * (1.0 + t.abs()) {
        return Err(Error::TimeMismatch);
    }
    Ok(&st.phi)
}

/// Fitted N-exponent report for the tracked pair norms.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairSweepFit {
    pub s2_h32: ExponentFit,
    pub u_col_inf: ExponentFit,
}

pub fn fit_pair_sweep(samples: &[(f64, PairNormRow)]) -> Result<PairSweepFit> {
    let h: Vec<(f64, f64)> = samples.iter().map(|(n, r)| (*n, r.s2_h32)).collect();
    let u: Vec<(f64, f64)> = samples.iter().map(|(n, r)| (*n, r.u_col_inf)).collect();
    Ok(PairSweepFit {
        s2_h32: crate::fit::fit_exponent(&h)?,
        u_col_inf: crate::fit::fit_exponent(&u)?,
    })
}
