//! Symmetric-kernel operator algebra on a 1-d grid.
//!
//! Kernels `K(x, y)` are stored as `n x n` value tables. Composition is the
//! discrete operator product `(K o L)(x, y) = dx * sum_z K(x, z) L(z, y)`,
//! so the delta kernel is represented by `I/dx` and composes exactly. Delta
//! contributions are kept symbolic in [`DeltaPlus`] so Hilbert-Schmidt norms
//! of the delta-free remainder never pick up the `dx`-divergent diagonal.
//!
//! The hyperbolic functional calculus (`sh`, `ch`) is available both as the
//! entire series and through a Takagi factorization `k = U diag(s) U^T`; the
//! two routes cross-check each other and gate the fast path.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;

type CMat = nalgebra::DMatrix<Complex64>;
type RMat = nalgebra::DMatrix<f64>;

/// Default HS tolerance for the sh/ch series tail.
pub const SERIES_TOL: f64 = 1e-12;
/// Series term cap; the entire series converges fast, a blowup signals
/// pathological input magnitude rather than slow convergence.
pub const SERIES_MAX_TERMS: usize = 200;
/// Eigenvalue clamp: roundoff negativity below this magnitude is zeroed,
/// anything larger is a genuine positivity violation.
pub const EIG_CLAMP: f64 = 1e-10;

/// Complex kernel on a d=1 grid.
#[derive(Debug, Clone)]
pub struct Kernel {
    grid: GridSpec,
    data: Array2<Complex64>,
}

impl Kernel {
    pub fn new(grid: GridSpec, data: Array2<Complex64>) -> Result<Self> {
        if grid.d() != 1 {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: "kernels are defined on d=1 grids".into(),
            });
        }
        if data.shape() != [grid.n(), grid.n()] {
            return Err(Error::InvalidParameter {
                name: "data",
                reason: format!("kernel shape {:?} != ({n}, {n})", data.shape(), n = grid.n()),
            });
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: GridSpec) -> Result<Self> {
        Self::new(grid, Array2::zeros((grid.n(), grid.n())))
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let pts = grid.points();
        let n = grid.n();
        let data = Array2::from_shape_fn((n, n), |(i, j)| f(pts[i], pts[j]));
        Self::new(grid, data)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.data
    }

    pub fn check_same_grid(&self, other: &Kernel) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(
                format!("{:?}", self.grid),
                format!("{:?}", other.grid),
            ));
        }
        Ok(())
    }

    /// Discrete composition `dx * (matrix product)`.
    pub fn compose(&self, other: &Kernel) -> Result<Kernel> {
        self.check_same_grid(other)?;
        let dx = Complex64::new(self.grid.dx(), 0.0);
        let mut prod = self.data.dot(&other.data);
        prod.mapv_inplace(|z| z * dx);
        Kernel::new(self.grid, prod)
    }

    pub fn conj(&self) -> Kernel {
        Kernel {
            grid: self.grid,
            data: self.data.mapv(|z| z.conj()),
        }
    }

    pub fn transpose(&self) -> Kernel {
        Kernel {
            grid: self.grid,
            data: self.data.t().to_owned(),
        }
    }

    pub fn adjoint(&self) -> Kernel {
        Kernel {
            grid: self.grid,
            data: self.data.t().mapv(|z| z.conj()),
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Kernel {
        Kernel {
            grid: self.grid,
            data: self.data.mapv(|z| z * factor),
        }
    }

    pub fn add(&self, other: &Kernel) -> Result<Kernel> {
        self.check_same_grid(other)?;
        Kernel::new(self.grid, &self.data + &other.data)
    }

    pub fn sub(&self, other: &Kernel) -> Result<Kernel> {
        self.check_same_grid(other)?;
        Kernel::new(self.grid, &self.data - &other.data)
    }

    /// Hilbert-Schmidt norm with quadrature weights,
    /// `(int int |K|^2)^(1/2) = dx * ||K||_F`.
    pub fn hs_norm(&self) -> f64 {
        let s: f64 = self.data.iter().map(|z| z.norm_sqr()).sum();
        s.sqrt() * self.grid.dx()
    }

    /// Relative deviation from symmetry `K(x,y) = K(y,x)`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.grid.n();
        let mut diff = 0.0;
        let mut scale = 0.0;
        for i in 0..n {
            for j in 0..n {
                diff += (self.data[[i, j]] - self.data[[j, i]]).norm_sqr();
                scale += self.data[[i, j]].norm_sqr();
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            (diff / scale).sqrt()
        }
    }

    /// Relative deviation from hermiticity `K(x,y) = conj(K(y,x))`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.grid.n();
        let mut diff = 0.0;
        let mut scale = 0.0;
        for i in 0..n {
            for j in 0..n {
                diff += (self.data[[i, j]] - self.data[[j, i]].conj()).norm_sqr();
                scale += self.data[[i, j]].norm_sqr();
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            (diff / scale).sqrt()
        }
    }

    pub fn symmetrize(&self) -> Kernel {
        let n = self.grid.n();
        let data = Array2::from_shape_fn((n, n), |(i, j)| {
            (self.data[[i, j]] + self.data[[j, i]]) * 0.5
        });
        Kernel {
            grid: self.grid,
            data,
        }
    }

    /// Operator-normalized matrix (`op = dx * data`); compositions become
    /// plain matrix products and the delta kernel becomes the identity.
    pub fn to_op(&self) -> CMat {
        let n = self.grid.n();
        let dx = self.grid.dx();
        CMat::from_fn(n, n, |i, j| self.data[[i, j]] * dx)
    }

    pub fn from_op(grid: GridSpec, op: &CMat) -> Result<Kernel> {
        let n = grid.n();
        let dx = grid.dx();
        let data = Array2::from_shape_fn((n, n), |(i, j)| op[(i, j)] / dx);
        Kernel::new(grid, data)
    }

    /// Row field `y -> ||K(., y)||_{L^2(dx)}`.
    pub fn column_l2(&self) -> Vec<f64> {
        let n = self.grid.n();
        let dx = self.grid.dx();
        (0..n)
            .map(|j| {
                let s: f64 = (0..n).map(|i| self.data[[i, j]].norm_sqr()).sum();
                (s * dx).sqrt()
            })
            .collect()
    }

    pub fn row_l2(&self) -> Vec<f64> {
        let n = self.grid.n();
        let dx = self.grid.dx();
        (0..n)
            .map(|i| {
                let s: f64 = (0..n).map(|j| self.data[[i, j]].norm_sqr()).sum();
                (s * dx).sqrt()
            })
            .collect()
    }

    /// L^2 -> L^2 operator norm estimate by power iteration on `K^* K`.
    pub fn op_norm_estimate(&self, iters: usize) -> f64 {
        let op = self.to_op();
        op_norm_estimate(&op, iters)
    }
}

/// `alpha * delta(x-y) + R(x,y)` with the delta kept symbolic.
#[derive(Debug, Clone)]
pub struct DeltaPlus {
    pub alpha: Complex64,
    pub rest: Kernel,
}

impl DeltaPlus {
    pub fn delta(grid: GridSpec) -> Result<Self> {
        Ok(Self {
            alpha: Complex64::new(1.0, 0.0),
            rest: Kernel::zeros(grid)?,
        })
    }

    pub fn from_kernel(rest: Kernel) -> Self {
        Self {
            alpha: Complex64::new(0.0, 0.0),
            rest,
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.rest.grid()
    }

    /// `(alpha delta + R) o K = alpha K + R o K`, exact in the delta part.
    pub fn compose_kernel(&self, k: &Kernel) -> Result<Kernel> {
        let rk = self.rest.compose(k)?;
        k.scaled(self.alpha).add(&rk)
    }

    /// `K o (alpha delta + R)`.
    pub fn kernel_compose(&self, k: &Kernel) -> Result<Kernel> {
        let kr = k.compose(&self.rest)?;
        k.scaled(self.alpha).add(&kr)
    }

    pub fn compose(&self, other: &DeltaPlus) -> Result<DeltaPlus> {
        let cross = self
            .rest
            .scaled(other.alpha)
            .add(&other.rest.scaled(self.alpha))?;
        let rr = self.rest.compose(&other.rest)?;
        Ok(DeltaPlus {
            alpha: self.alpha * other.alpha,
            rest: cross.add(&rr)?,
        })
    }

    pub fn add(&self, other: &DeltaPlus) -> Result<DeltaPlus> {
        Ok(DeltaPlus {
            alpha: self.alpha + other.alpha,
            rest: self.rest.add(&other.rest)?,
        })
    }

    pub fn conj(&self) -> DeltaPlus {
        DeltaPlus {
            alpha: self.alpha.conj(),
            rest: self.rest.conj(),
        }
    }

    /// Full operator matrix `alpha I + dx * R`.
    pub fn to_op(&self) -> CMat {
        let n = self.grid().n();
        let mut op = self.rest.to_op();
        for i in 0..n {
            op[(i, i)] += self.alpha;
        }
        op
    }

    pub fn from_op_with_alpha(grid: GridSpec, op: &CMat, alpha: Complex64) -> Result<DeltaPlus> {
        let n = grid.n();
        let mut rest_op = op.clone();
        for i in 0..n {
            rest_op[(i, i)] -= alpha;
        }
        Ok(DeltaPlus {
            alpha,
            rest: Kernel::from_op(grid, &rest_op)?,
        })
    }

    /// HS norm of the delta-free remainder.
    pub fn hs_norm_rest(&self) -> f64 {
        self.rest.hs_norm()
    }
}

fn op_norm_estimate(op: &CMat, iters: usize) -> f64 {
    let n = op.nrows();
    let mut v = nalgebra::DVector::<Complex64>::from_fn(n, |i, _| {
        Complex64::new(1.0 + (i as f64 * 0.7).sin(), (i as f64 * 1.3).cos())
    });
    let mut norm = 0.0;
    let adj = op.adjoint();
    for _ in 0..iters {
        let w = &adj * (op * &v);
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        norm = wn.sqrt();
        v = w / Complex64::new(wn, 0.0);
    }
    norm
}

fn check_symmetric(k: &Kernel, tol: f64) -> Result<()> {
    let asym = k.asymmetry();
    if asym > tol {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Sum the odd series `sh(k) = k + k o kbar o k / 3! + ...` until the last
/// term's HS norm drops below `tol`. Returns the kernel and the term count.
pub fn sh_series(k: &Kernel, tol: f64) -> Result<(Kernel, usize)> {
    check_symmetric(k, 1e-8)?;
    let kbar_k = k.conj().compose(k)?;
    let mut term = k.clone();
    let mut sum = k.clone();
    let mut count = 1;
    for j in 1..=SERIES_MAX_TERMS {
        let denom = ((2 * j) * (2 * j + 1)) as f64;
        term = term.compose(&kbar_k)?.scaled(Complex64::new(1.0 / denom, 0.0));
        let tnorm = term.hs_norm();
        sum = sum.add(&term)?;
        count += 1;
        if tnorm < tol {
            return Ok((sum, count));
        }
    }
    Err(Error::SeriesDiverged {
        max_terms: SERIES_MAX_TERMS,
        last: term.hs_norm(),
    })
}

/// Sum the even series `ch(k) = delta + kbar o k / 2! + ...`.
pub fn ch_series(k: &Kernel, tol: f64) -> Result<(DeltaPlus, usize)> {
    check_symmetric(k, 1e-8)?;
    let kbar_k = k.conj().compose(k)?;
    let mut term = kbar_k.scaled(Complex64::new(0.5, 0.0));
    let mut p = term.clone();
    let mut count = 1;
    for j in 2..=SERIES_MAX_TERMS {
        let denom = ((2 * j - 1) * (2 * j)) as f64;
        term = term.compose(&kbar_k)?.scaled(Complex64::new(1.0 / denom, 0.0));
        let tnorm = term.hs_norm();
        p = p.add(&term)?;
        count += 1;
        if tnorm < tol {
            return Ok((
                DeltaPlus {
                    alpha: Complex64::new(1.0, 0.0),
                    rest: p,
                },
                count,
            ));
        }
    }
    Err(Error::SeriesDiverged {
        max_terms: SERIES_MAX_TERMS,
        last: term.hs_norm(),
    })
}

/// Takagi factorization of a complex symmetric operator: `A = U S U^T`
/// with `U` unitary and `S = diag(s), s >= 0`, in operator normalization.
#[derive(Debug, Clone)]
pub struct Takagi {
    pub u: CMat,
    pub sigma: Vec<f64>,
}

/// Compute the Takagi factorization through the real symmetric embedding
/// `[[X, Y], [Y, -X]]` of `A = X + iY`: eigenvectors `(p; q)` with
/// eigenvalue `s >= 0` give complex vectors `u = p + iq` with
/// `A conj(u) = s u`.
pub fn takagi(k: &Kernel) -> Result<Takagi> {
    check_symmetric(k, 1e-8)?;
    let a = k.to_op();
    let n = a.nrows();
    let mut m = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let x = 0.5 * (a[(i, j)].re + a[(j, i)].re);
            let y = 0.5 * (a[(i, j)].im + a[(j, i)].im);
            m[(i, j)] = x;
            m[(i, j + n)] = y;
            m[(i + n, j)] = y;
            m[(i + n, j + n)] = -x;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap()
    });

    let scale = k.hs_norm().max(1e-300);
    let ztol = 1e-12 * scale;
    let mut u = CMat::zeros(n, n);
    let mut sigma = vec![0.0f64; n];
    let mut col = 0;
    // positive singular values first: their complex vectors are orthonormal
    for &idx in &order {
        if col == n {
            break;
        }
        let s = eig.eigenvalues[idx];
        if s <= ztol {
            break;
        }
        let v = eig.eigenvectors.column(idx);
        for r in 0..n {
            u[(r, col)] = Complex64::new(v[r], v[r + n]);
        }
        sigma[col] = s;
        col += 1;
    }
    // fill the kernel: complex Gram-Schmidt over the remaining candidates
    if col < n {
        'outer: for &idx in &order {
            let s = eig.eigenvalues[idx];
            if s > ztol {
                continue;
            }
            let v = eig.eigenvectors.column(idx);
            let mut cand = nalgebra::DVector::<Complex64>::from_fn(n, |r, _| {
                Complex64::new(v[r], v[r + n])
            });
            for c in 0..col {
                let proj: Complex64 = (0..n).map(|r| u[(r, c)].conj() * cand[r]).sum();
                for r in 0..n {
                    let ucol = u[(r, c)];
                    cand[r] -= proj * ucol;
                }
            }
            let nrm = cand.norm();
            if nrm > 1e-7 {
                for r in 0..n {
                    u[(r, col)] = cand[r] / Complex64::new(nrm, 0.0);
                }
                sigma[col] = 0.0;
                col += 1;
                if col == n {
                    break 'outer;
                }
            }
        }
    }
    if col < n {
        return Err(Error::TakagiResidual(f64::INFINITY));
    }
    let fac = Takagi { u, sigma };
    let resid = takagi_residual(&fac, &a);
    if resid > 1e-8 * scale.max(1.0) {
        return Err(Error::TakagiResidual(resid));
    }
    Ok(fac)
}

fn takagi_residual(f: &Takagi, a: &CMat) -> f64 {
    let n = a.nrows();
    let mut rec = CMat::zeros(n, n);
    for k in 0..n {
        let s = f.sigma[k];
        if s == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                rec[(i, j)] += f.u[(i, k)] * f.u[(j, k)] * s;
            }
        }
    }
    (rec - a).norm()
}

impl Takagi {
    /// `U f(S) U^T` in operator normalization.
    pub fn apply_symmetric(&self, grid: GridSpec, f: impl Fn(f64) -> f64) -> Result<Kernel> {
        let n = self.u.nrows();
        let mut out = CMat::zeros(n, n);
        for k in 0..n {
            let w = f(self.sigma[k]);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let ui = self.u[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += ui * self.u[(j, k)];
                }
            }
        }
        Kernel::from_op(grid, &out)
    }

}

/// Takagi-accelerated `sh`/`ch`: `u = U sinh(S) U^T` and
/// `c = delta + conj(U)(cosh(S) - 1)U^dagger`.
pub fn takagi_sh_ch(k: &Kernel) -> Result<(Kernel, DeltaPlus)> {
    let fac = takagi(k)?;
    let grid = k.grid();
    let u = fac.apply_symmetric(grid, f64::sinh)?;
    let n = fac.u.nrows();
    let mut p_op = CMat::zeros(n, n);
    for m in 0..n {
        let w = fac.sigma[m].cosh() - 1.0;
        if w == 0.0 {
            continue;
        }
        for i in 0..n {
            let ui = fac.u[(i, m)].conj() * w;
            for j in 0..n {
                p_op[(i, j)] += ui * fac.u[(j, m)];
            }
        }
    }
    let p = Kernel::from_op(grid, &p_op)?;
    Ok((
        u,
        DeltaPlus {
            alpha: Complex64::new(1.0, 0.0),
            rest: p,
        },
    ))
}

/// Hermitian eigendecomposition of an operator matrix; eigenvalues ascending.
pub fn hermitian_eigen(op: &CMat) -> (Vec<f64>, CMat) {
    let herm = (op + op.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(herm);
    let n = op.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Result of recovering the (u, c, p) triple from the doubled kernels.
#[derive(Debug, Clone)]
pub struct Ucp {
    pub u: Kernel,
    pub c: DeltaPlus,
    pub p: Kernel,
    /// HS residual of the consistency identity `2 u o c = s2`.
    pub consistency: f64,
}

/// Recover `u = sh(k)`, `c = ch(k)`, `p = c - delta` from
/// `s2 = sh(2k)`, `p2 = ch(2k) - delta` without knowing `k`:
/// `c = ((C2 + delta)/2)^(1/2)` with `C2 = delta + p2` (the half-angle
/// identity `C2 = 2 c o c - delta`, validated against the series oracle),
/// then `u = s2 o c^{-1} / 2`.
pub fn recover_ucp(s2: &Kernel, p2: &Kernel) -> Result<Ucp> {
    s2.check_same_grid(p2)?;
    let grid = s2.grid();
    let n = grid.n();
    let c2 = DeltaPlus {
        alpha: Complex64::new(1.0, 0.0),
        rest: p2.clone(),
    };
    let c2_op = c2.to_op();
    let (vals, vecs) = hermitian_eigen(&c2_op);
    if let Some(&low) = vals.first() {
        if low < -EIG_CLAMP {
            return Err(Error::NotPositive(low));
        }
    }
    // c = V sqrt((1 + lambda)/2) V^dagger, p = c - delta
    let mut c_op = CMat::zeros(n, n);
    let mut cinv_op = CMat::zeros(n, n);
    for k in 0..n {
        let lam = vals[k].max(0.0);
        let mu = ((1.0 + lam) / 2.0).sqrt();
        for i in 0..n {
            let vi = vecs[(i, k)];
            for j in 0..n {
                let w = vi * vecs[(j, k)].conj();
                c_op[(i, j)] += w * mu;
                cinv_op[(i, j)] += w / mu;
            }
        }
    }
    let c = DeltaPlus::from_op_with_alpha(grid, &c_op, Complex64::new(1.0, 0.0))?;
    let p = c.rest.clone();
    let u_op = s2.to_op() * cinv_op * Complex64::new(0.5, 0.0);
    let u = Kernel::from_op(grid, &u_op)?;
    // re-verify 2 u o c = s2
    let back = u.scaled(Complex64::new(2.0, 0.0));
    let back = c.kernel_compose(&back)?;
    let consistency = back.sub(s2)?.hs_norm();
    let scale = s2.hs_norm().max(1.0);
    if consistency > 1e-6 * scale {
        return Err(Error::ConsistencyResidual(consistency));
    }
    Ok(Ucp {
        u,
        c,
        p,
        consistency,
    })
}

/// `|| (delta + p2) o (delta + p2) - conj(s2) o s2 - delta ||_HS`,
/// the doubled-kernel form of the Bogoliubov relation. Deltas cancel
/// exactly in the `DeltaPlus` algebra, leaving a plain kernel norm.
pub fn bogoliubov_residual(s2: &Kernel, p2: &Kernel) -> Result<f64> {
    s2.check_same_grid(p2)?;
    let pp = p2.compose(p2)?;
    let ss = s2.conj().compose(s2)?;
    let two_p = p2.scaled(Complex64::new(2.0, 0.0));
    let rest = pp.add(&two_p)?.sub(&ss)?;
    Ok(rest.hs_norm())
}

/// First divided difference of `z -> sqrt(1 + z)`.
fn sqrt1p_divdiff(a: f64, b: f64) -> f64 {
    if (a - b).abs() > 1e-12 * (1.0 + a.abs() + b.abs()) {
        ((1.0 + a).sqrt() - (1.0 + b).sqrt()) / (a - b)
    } else {
        let m = 0.5 * (a + b);
        0.5 / (1.0 + m).sqrt()
    }
}

/// Evaluate `W(cbar)` from the contour representation
/// `(2 pi i)^{-1} int_G (q - z)^{-1} W(q) (q - z)^{-1} sqrt(1+z) dz`
/// in closed form: in the eigenbasis of `q = u o ubar`, entry `(a,b)`
/// picks up the first divided difference of `sqrt(1+z)` at
/// `(lambda_a, lambda_b)`. `W(q) = m o ubar o cbar - u o c o mbar`.
pub fn w_of_cbar(u: &Kernel, c: &DeltaPlus, m: &Kernel) -> Result<Kernel> {
    u.check_same_grid(m)?;
    let grid = u.grid();
    let n = grid.n();
    let q_op = u.to_op() * u.conj().to_op();
    let (vals, vecs) = hermitian_eigen(&q_op);
    if let Some(&low) = vals.first() {
        if low < -EIG_CLAMP * (1.0 + vals.last().copied().unwrap_or(0.0).abs()) {
            return Err(Error::NotPositive(low));
        }
    }
    let lam: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
    // W(q) = m o ubar o cbar - u o c o mbar
    let cbar = c.conj();
    let m_ubar = m.compose(&u.conj())?;
    let left = cbar.kernel_compose(&m_ubar)?;
    let u_c = c.kernel_compose(u)?;
    let right = u_c.compose(&m.conj())?;
    let wq_op = left.sub(&right)?.to_op();
    // rotate, scale by divided differences, rotate back
    let b = vecs.adjoint() * wq_op * &vecs;
    let mut scaled = b;
    for i in 0..n {
        for j in 0..n {
            scaled[(i, j)] *= sqrt1p_divdiff(lam[i], lam[j]);
        }
    }
    let out = &vecs * scaled * vecs.adjoint();
    Kernel::from_op(grid, &out)
}
