//! Sector Schroedinger operators, the `Vtilde` one-particle potential, the
//! pair-interaction multiplication operator `Htilde`, and the iterated
//! splitting cascade with its energy-estimate accumulators.
//!
//! Level 1 solves `S_l psi_1 = F_l^s` from zero data; level `j+1` is forced
//! by `-(1/2N) v_N(y_1 - y_2) psi_j` symmetrized, which on symmetric fields
//! equals `-(1/(l(l-1))) Htilde psi_j`. Each level is also solved without
//! the potential (`psi_{j,a}`), and the difference feeds the measured side
//! of the energy inequality against `int ||V_l||_op ||psi_{j,a}||`.

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fit::ExponentFit;
use crate::forcing::{singular_part, SectorField, SectorInputs, SectorTag, L4_ENTRY_BUDGET};
use crate::grid::{Field, GridSpec};
use crate::kernel::{hermitian_eigen, recover_ucp, w_of_cbar, DeltaPlus, Kernel};
use crate::meanfield::{Interaction, Trajectory};
use crate::pair::{build_m, PairTrajectory};

/// Maximum cascade depth (report size guard).
pub const MAX_DEPTH: usize = 6;

/// The one-particle potential `Vtilde` of the sector operators:
/// a real multiplier `(v_N * |phi|^2)(x)` plus a kernel
/// `v_N(x-y) phi(x) conj(phi)(y)
///  - (1/2)((cbar)^{-1} o m o ubar + u o mbar o (cbar)^{-1} + [W(cbar), (cbar)^{-1}])`.
#[derive(Debug, Clone)]
pub struct Vtilde {
    pub grid: GridSpec,
    pub multiplier: Vec<f64>,
    pub kernel: Kernel,
}

pub fn build_vtilde(
    phi: &Field,
    u: &Kernel,
    c: &DeltaPlus,
    m: &Kernel,
    interaction: &Interaction,
) -> Result<Vtilde> {
    let grid = interaction.grid();
    let n = grid.n();
    // multiplier part
    let dens = {
        let mut d = phi.clone();
        for v in d.data_mut().iter_mut() {
            *v = Complex64::new(v.norm_sqr(), 0.0);
        }
        d
    };
    let conv = interaction.v_n().convolve(&dens)?;
    let multiplier: Vec<f64> = conv.data().iter().map(|z| z.re).collect();
    // kernel part: v_N(x-y) phi(x) conj(phi)(y)
    let vn_flat: Vec<f64> = interaction
        .v_n()
        .data()
        .iter()
        .map(|z| z.re)
        .collect();
    let pd = phi.data().as_slice().expect("layout");
    let mut kdata = ndarray::Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            kdata[[i, j]] = vn_flat[(i + n - j) % n] * pd[i] * pd[j].conj();
        }
    }
    let mut kernel = Kernel::new(grid, kdata)?;
    // correction: -(1/2)( (cbar)^{-1} o m o ubar + u o mbar o (cbar)^{-1}
    //                     + [W(cbar), (cbar)^{-1}] )
    let cbar = c.conj();
    let cbar_op = cbar.to_op();
    let (vals, vecs) = hermitian_eigen(&cbar_op);
    if vals.first().copied().unwrap_or(1.0) <= 0.0 {
        return Err(Error::NotPositive(vals[0]));
    }
    let mut inv_op = nalgebra::DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        let w = 1.0 / vals[k];
        for i in 0..n {
            let vi = vecs[(i, k)] * w;
            for j in 0..n {
                inv_op[(i, j)] += vi * vecs[(j, k)].conj();
            }
        }
    }
    let cbar_inv = DeltaPlus::from_op_with_alpha(grid, &inv_op, Complex64::new(1.0, 0.0))?;
    let m_ubar = m.compose(&u.conj())?;
    let term1 = cbar_inv.compose_kernel(&m_ubar)?;
    let u_mbar = u.compose(&m.conj())?;
    let term2 = cbar_inv.kernel_compose(&u_mbar)?;
    let wc = w_of_cbar(u, c, m)?;
    // [W, delta + rho] = W o rho - rho o W
    let comm = wc
        .compose(&cbar_inv.rest)?
        .sub(&cbar_inv.rest.compose(&wc)?)?;
    let correction = term1
        .add(&term2)?
        .add(&comm)?
        .scaled(Complex64::new(-0.5, 0.0));
    kernel = kernel.add(&correction)?;
    Ok(Vtilde {
        grid,
        multiplier,
        kernel,
    })
}

impl Vtilde {
    /// `L^2 -> L^2` operator norm estimate by power iteration.
    pub fn op_norm_estimate(&self, iters: usize) -> f64 {
        let n = self.grid.n();
        let mut op = self.kernel.to_op();
        for i in 0..n {
            op[(i, i)] += Complex64::new(self.multiplier[i], 0.0);
        }
        let adj = op.adjoint();
        let mut v = nalgebra::DVector::<Complex64>::from_fn(n, |i, _| {
            Complex64::new(1.0 + (0.3 * i as f64).sin(), (0.9 * i as f64).cos())
        });
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

    fn zero(grid: GridSpec) -> Result<Self> {
        Ok(Self {
            grid,
            multiplier: vec![0.0; grid.n()],
            kernel: Kernel::zeros(grid)?,
        })
    }
}

/// Apply `sum_k (Vtilde)_k` to a rank-`l` sector array.
fn apply_v_sector(data: &ArrayD<Complex64>, vt: &Vtilde, l: usize) -> ArrayD<Complex64> {
    let n = vt.grid.n();
    let dx = vt.grid.dx();
    let kd = vt.kernel.data();
    let mut out = ArrayD::<Complex64>::zeros(data.raw_dim());
    // multiplier part: sum over axes of mult(z_a)
    let strides: Vec<usize> = (0..l).map(|a| n.pow((l - 1 - a) as u32)).collect();
    let flat_in = data.as_slice().expect("layout");
    {
        let flat_out = out.as_slice_mut().expect("layout");
        for (idx, v) in flat_out.iter_mut().enumerate() {
            let mut msum = 0.0;
            let mut rem = idx;
            for s in &strides {
                let z = rem / s;
                rem %= s;
                msum += vt.multiplier[z];
            }
            *v = msum * flat_in[idx];
        }
    }
    // kernel part along each axis: lane matvec
    for axis in 0..l {
        let stride = strides[axis];
        let block = stride * n;
        let total = flat_in.len();
        let flat_out = out.as_slice_mut().expect("layout");
        let mut lane_in = vec![Complex64::default(); n];
        let mut base = 0;
        while base < total {
            for off in 0..stride {
                let start = base + off;
                for z in 0..n {
                    lane_in[z] = flat_in[start + z * stride];
                }
                for x in 0..n {
                    let mut s = Complex64::default();
                    for z in 0..n {
                        s += kd[[x, z]] * lane_in[z];
                    }
                    flat_out[start + x * stride] += s * dx;
                }
            }
            base += block;
        }
    }
    out
}

/// Exact pair-counting action of `Htilde`: multiplication by
/// `(1/2N) sum_{a != b} v_N(z_a - z_b)` over the sector coordinates.
pub fn apply_htilde(psi: &SectorField, interaction: &Interaction) -> Result<SectorField> {
    if psi.l < 2 {
        return Err(Error::InvalidParameter {
            name: "l",
            reason: "Htilde acts on sectors with l >= 2".into(),
        });
    }
    let n = psi.grid.n();
    let vn_flat: Vec<f64> = interaction
        .v_n()
        .data()
        .iter()
        .map(|z| z.re)
        .collect();
    let pref = 1.0 / (2.0 * interaction.n_particles());
    let l = psi.l;
    let mut out = psi.data.clone();
    let mut idx = vec![0usize; l];
    for (ix, v) in out.indexed_iter_mut() {
        for a in 0..l {
            idx[a] = ix[a];
        }
        let mut s = 0.0;
        for a in 0..l {
            for b in 0..l {
                if a != b {
                    s += vn_flat[(idx[a] + n - idx[b]) % n];
                }
            }
        }
        *v *= pref * s;
    }
    SectorField::new(l, psi.grid, psi.tag, out)
}

/// Exact operator norm of `Htilde` on sector 2: `N^{d beta - 1} sup v`.
pub fn htilde_sector2_norm(interaction: &Interaction) -> f64 {
    interaction.v_n().norm_linf() / interaction.n_particles()
}

/// A solved sector trajectory.
#[derive(Debug, Clone)]
pub struct SectorSolution {
    pub l: usize,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub final_state: SectorField,
}

/// Strang solver for `S_l psi = F` with zero initial data: exact kinetic
/// multiplier over the `l` axes, midpoint rule for the bounded part
/// (`Vtilde` coordinate-wise plus the inhomogeneity).
pub fn solve_sector(
    l: usize,
    forcing: &[SectorField],
    vtilde: Option<&[Vtilde]>,
    dt: f64,
    store_every: usize,
) -> Result<SectorSolution> {
    if forcing.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "forcing",
            reason: "need at least two forcing samples".into(),
        });
    }
    if !(2..=4).contains(&l) {
        return Err(Error::InvalidParameter {
            name: "l",
            reason: "sector index must be 2, 3, or 4".into(),
        });
    }
    let grid = forcing[0].grid;
    let n = grid.n();
    let entries = n.pow(l as u32);
    if l == 4 && entries > L4_ENTRY_BUDGET {
        return Err(Error::MemoryGuard {
            l,
            entries,
            budget: L4_ENTRY_BUDGET,
        });
    }
    if let Some(vs) = vtilde {
        if vs.len() != forcing.len() {
            return Err(Error::TimeMismatch);
        }
    }
    let steps = forcing.len() - 1;
    let store_every = store_every.max(1);
    // kinetic phases for half step
    let probe = Field::zeros(grid, l)?;
    let mut half_phase = Vec::with_capacity(probe.data().len());
    probe.for_each_mode(|_, k| {
        let k2: f64 = k.iter().map(|x| x * x).sum();
        half_phase.push(Complex64::new(0.0, -dt / 2.0 * k2).exp());
    });
    let apply_kin = |data: &ArrayD<Complex64>| -> ArrayD<Complex64> {
        let f = Field::new(grid, l, data.clone()).expect("sector field");
        let mut hat = f.fft_forward();
        for (z, p) in hat.data_mut().iter_mut().zip(half_phase.iter()) {
            *z *= *p;
        }
        hat.fft_inverse().into_data()
    };

    let mut psi = ArrayD::<Complex64>::zeros(IxDyn(&vec![n; l]));
    let mut times = vec![0.0];
    let mut norms = vec![0.0];
    let zero_v = Vtilde::zero(grid)?;
    for step in 0..steps {
        psi = apply_kin(&psi);
        // midpoint of the bounded flow: d psi = i(F - V psi)
        let f_mid = {
            let a = &forcing[step].data;
            let b = &forcing[step + 1].data;
            let mut m = a.clone();
            for (x, y) in m.iter_mut().zip(b.iter()) {
                *x = (*x + *y) * 0.5;
            }
            m
        };
        let vt = vtilde.map(|vs| &vs[step]).unwrap_or(&zero_v);
        let vt_next = vtilde.map(|vs| &vs[step + 1]).unwrap_or(&zero_v);
        let rhs = |state: &ArrayD<Complex64>, v_w: (&Vtilde, &Vtilde)| -> ArrayD<Complex64> {
            // averaged potential at the midpoint
            let va = apply_v_sector(state, v_w.0, l);
            let vb = apply_v_sector(state, v_w.1, l);
            let mut out = f_mid.clone();
            for ((o, a), b) in out.iter_mut().zip(va.iter()).zip(vb.iter()) {
                *o = Complex64::i() * (*o - (*a + *b) * 0.5);
            }
            out
        };
        let k1 = rhs(&psi, (vt, vt_next));
        let mut mid = psi.clone();
        for (m, k) in mid.iter_mut().zip(k1.iter()) {
            *m += *k * (dt / 2.0);
        }
        let k2 = rhs(&mid, (vt, vt_next));
        for (p, k) in psi.iter_mut().zip(k2.iter()) {
            *p += *k * dt;
        }
        psi = apply_kin(&psi);
        if !psi.first().map(|z| z.re.is_finite()).unwrap_or(true) {
            return Err(Error::NanAbort {
                step,
                context: "sector",
            });
        }
        if (step + 1) % store_every == 0 || step + 1 == steps {
            let nrm = {
                let s: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
                (s * grid.dx().powi(l as i32)).sqrt()
            };
            times.push((step + 1) as f64 * dt);
            norms.push(nrm);
        }
    }
    let final_state = SectorField::new(l, grid, SectorTag::Full, psi)?;
    Ok(SectorSolution {
        l,
        times,
        norms,
        final_state,
    })
}

/// Per-level, per-sector cascade output.
#[derive(Debug)]
pub struct LevelRun {
    pub j: usize,
    pub l: usize,
    pub times: Vec<f64>,
    /// Norm history of the full solve (with `V_l`).
    pub full_norms: Vec<f64>,
    /// Norm history of the free solve (`psi_{j,a}`).
    pub free_norms: Vec<f64>,
    /// `|| psi_j - psi_{j,a} ||` at output times.
    pub err_norms: Vec<f64>,
    /// Integrated energy bound `int_0^t ||V_l||_op ||psi_{j,a}|| dt1`.
    pub energy_bound: Vec<f64>,
    pub final_full: SectorField,
    pub final_free: SectorField,
}

#[derive(Debug)]
pub struct CascadeRun {
    pub levels: Vec<LevelRun>,
    /// Measured `||Vtilde(t)||_op` per solver step.
    pub vtilde_norms: Vec<(f64, f64)>,
    /// Exact sector-2 `Htilde` norm for this interaction.
    pub htilde2_norm: f64,
}

/// Run the iterated cascade to depth `j_max` on the sectors in `sectors`.
/// The pair trajectory must be sampled at the solver step `dt`.
pub fn run_cascade(
    j_max: usize,
    sectors: &[usize],
    pair: &PairTrajectory,
    phi_traj: &Trajectory,
    interaction: &Interaction,
    dt: f64,
) -> Result<CascadeRun> {
    if j_max == 0 || j_max > MAX_DEPTH {
        return Err(Error::InvalidParameter {
            name: "j_max",
            reason: format!("cascade depth must be 1..={MAX_DEPTH}"),
        });
    }
    let steps = pair.states.len() - 1;
    if steps < 1 {
        return Err(Error::TimeMismatch);
    }
    for (i, st) in pair.states.iter().enumerate() {
        if (st.t - i as f64 * dt).abs() > 1e-9 * (1.0 + st.t) {
            return Err(Error::TimeMismatch);
        }
    }
    // per-step ingredients: (u, c, p) from the pair kernels, m from phi,
    // Vtilde, and the singular forcings
    let mut vtildes = Vec::with_capacity(steps + 1);
    let mut forcings: Vec<Vec<SectorField>> = sectors.iter().map(|_| Vec::new()).collect();
    for st in pair.states.iter() {
        let ucp = recover_ucp(&st.s2, &st.p2)?;
        let phi = phi_at(phi_traj, st.t)?;
        let m = build_m(phi, interaction)?;
        vtildes.push(build_vtilde(phi, &ucp.u, &ucp.c, &m, interaction)?);
        let inputs = SectorInputs {
            u: &ucp.u,
            p: &ucp.p,
            phi,
            interaction,
        };
        for (si, &l) in sectors.iter().enumerate() {
            forcings[si].push(singular_part(l, &inputs)?);
        }
    }
    let vtilde_norms: Vec<(f64, f64)> = vtildes
        .iter()
        .enumerate()
        .map(|(i, v)| (i as f64 * dt, v.op_norm_estimate(40)))
        .collect();

    let mut levels = Vec::new();
    for (si, &l) in sectors.iter().enumerate() {
        let mut forcing = std::mem::take(&mut forcings[si]);
        for j in 1..=j_max {
            let full = solve_sector_traj(l, &forcing, Some(&vtildes), dt)?;
            let free = solve_sector_traj(l, &forcing, None, dt)?;
            // error norms and the integrated bound at output times
            let mut err_norms = Vec::with_capacity(full.per_step.len());
            for (a, b) in full.per_step.iter().zip(free.per_step.iter()) {
                let d = a.sub(b)?;
                err_norms.push(d.norm_l2());
            }
            let mut energy_bound = Vec::with_capacity(err_norms.len());
            let mut acc = 0.0;
            energy_bound.push(0.0);
            for k in 1..free.norms.len() {
                let vk = l as f64
                    * 0.5
                    * (vtilde_norms[k - 1].1 + vtilde_norms[k].1);
                acc += vk * 0.5 * (free.norms[k - 1] + free.norms[k]) * dt;
                energy_bound.push(acc);
            }
            levels.push(LevelRun {
                j,
                l,
                times: full.times.clone(),
                full_norms: full.norms.clone(),
                free_norms: free.norms.clone(),
                err_norms,
                energy_bound,
                final_full: full.per_step.last().expect("steps >= 1").clone(),
                final_free: free.per_step.last().expect("steps >= 1").clone(),
            });
            if j < j_max {
                // next-level forcing: -(1/2N) v_N(y1 - y2) psi_j, symmetrized
                // (the symmetric Sum_{a<b} form)
                forcing = full
                    .per_step
                    .iter()
                    .map(|psi| {
                        let ht = apply_htilde(psi, interaction)?;
                        Ok(ht.scaled(Complex64::new(
                            -1.0 / ((l * (l - 1)) as f64),
                            0.0,
                        )))
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
        }
    }
    Ok(CascadeRun {
        levels,
        vtilde_norms,
        htilde2_norm: htilde_sector2_norm(interaction),
    })
}

/// Like [`solve_sector`] but keeping every step (needed to feed the next
/// cascade level).
struct SectorTraj {
    times: Vec<f64>,
    norms: Vec<f64>,
    per_step: Vec<SectorField>,
}

fn solve_sector_traj(
    l: usize,
    forcing: &[SectorField],
    vtilde: Option<&[Vtilde]>,
    dt: f64,
) -> Result<SectorTraj> {
    let grid = forcing[0].grid;
    let steps = forcing.len() - 1;
    let mut per_step = Vec::with_capacity(steps + 1);
    per_step.push(SectorField::zeros(l, grid, SectorTag::Full)?);
    let mut times = vec![0.0];
    let mut norms = vec![0.0];
    // re-run the stepper retaining state at each step
    let mut psi = per_step[0].clone();
    for step in 0..steps {
        let window = &forcing[step..=step + 1];
        let vwin = vtilde.map(|v| &v[step..=step + 1]);
        let sol = solve_sector(l, window, vwin, dt, 1)?;
        // solve_sector starts from zero; add the propagated previous state
        let prev = propagate_free_with_v(&psi, vwin, dt)?;
        psi = SectorField::new(
            l,
            grid,
            SectorTag::Full,
            &sol.final_state.data + &prev.data,
        )?;
        times.push((step + 1) as f64 * dt);
        norms.push(psi.norm_l2());
        per_step.push(psi.clone());
    }
    Ok(SectorTraj {
        times,
        norms,
        per_step,
    })
}

/// One homogeneous Strang step (no forcing) for the same operator.
fn propagate_free_with_v(
    psi: &SectorField,
    vwin: Option<&[Vtilde]>,
    dt: f64,
) -> Result<SectorField> {
    let grid = psi.grid;
    let l = psi.l;
    let probe = Field::zeros(grid, l)?;
    let mut half_phase = Vec::with_capacity(probe.data().len());
    probe.for_each_mode(|_, k| {
        let k2: f64 = k.iter().map(|x| x * x).sum();
        half_phase.push(Complex64::new(0.0, -dt / 2.0 * k2).exp());
    });
    let apply_kin = |data: &ArrayD<Complex64>| -> ArrayD<Complex64> {
        let f = Field::new(grid, l, data.clone()).expect("sector field");
        let mut hat = f.fft_forward();
        for (z, p) in hat.data_mut().iter_mut().zip(half_phase.iter()) {
            *z *= *p;
        }
        hat.fft_inverse().into_data()
    };
    let mut data = apply_kin(&psi.data);
    if let Some(vs) = vwin {
        let rhs = |state: &ArrayD<Complex64>| -> ArrayD<Complex64> {
            let va = apply_v_sector(state, &vs[0], l);
            let vb = apply_v_sector(state, &vs[1], l);
            let mut out = va;
            for (o, b) in out.iter_mut().zip(vb.iter()) {
                *o = -Complex64::i() * (*o + *b) * 0.5;
            }
            out
        };
        let k1 = rhs(&data);
        let mut mid = data.clone();
        for (m, k) in mid.iter_mut().zip(k1.iter()) {
            *m += *k * (dt / 2.0);
        }
        let k2 = rhs(&mid);
        for (p, k) in data.iter_mut().zip(k2.iter()) {
            *p += *k * dt;
        }
    }
    let data = apply_kin(&data);
    SectorField::new(l, grid, psi.tag, data)
}

/// The Corollary-6.2 threshold `(1+2j)/(3+4j)` and the predicted dominant
/// exponent `min(-1/2 + beta, (-3+7 beta)/2 + (j-1)(-1+2 beta))`.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThresholdRow {
    pub j: usize,
    pub beta_threshold: f64,
    pub predicted_exponent: f64,
}

pub fn threshold_table(j_max: usize, beta: f64) -> Vec<ThresholdRow> {
    (1..=j_max)
        .map(|j| {
            let jf = j as f64;
            ThresholdRow {
                j,
                beta_threshold: (1.0 + 2.0 * jf) / (3.0 + 4.0 * jf),
                predicted_exponent: (-0.5 + beta)
                    .min((-3.0 + 7.0 * beta) / 2.0 + (jf - 1.0) * (-1.0 + 2.0 * beta)),
            }
        })
        .collect()
}

/// Energy-audit summary per level: the measured error norm must sit below
/// the integrated bound at every output time (up to solver tolerance).
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnergyAuditRow {
    pub j: usize,
    pub l: usize,
    pub max_err: f64,
    pub max_bound: f64,
    pub satisfied: bool,
}

pub fn energy_audit(run: &CascadeRun, tolerance: f64) -> Vec<EnergyAuditRow> {
    run.levels
        .iter()
        .map(|lv| {
            let mut ok = true;
            for (e, b) in lv.err_norms.iter().zip(&lv.energy_bound) {
                if *e > *b + tolerance {
                    ok = false;
                }
            }
            EnergyAuditRow {
                j: lv.j,
                l: lv.l,
                max_err: lv.err_norms.iter().cloned().fold(0.0, f64::max),
                max_bound: lv.energy_bound.iter().cloned().fold(0.0, f64::max),
                satisfied: ok,
            }
        })
        .collect()
}

/// Per-level contraction fit: `||psi_{j+1}|| / ||psi_j||` against `N`.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContractionFit {
    pub l: usize,
    pub j_from: usize,
    pub fit: ExponentFit,
    pub decreasing: bool,
}

pub fn contraction_fit(
    samples: &[(f64, f64)], // (N, ratio)
    l: usize,
    j_from: usize,
) -> Result<ContractionFit> {
    let fit = crate::fit::fit_exponent(samples)?;
    let decreasing = samples.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(ContractionFit {
        l,
        j_from,
        fit,
        decreasing,
    })
}

fn phi_at<'a>(traj: &'a Trajectory, t: f64) -> Result<&'a Field> {
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
