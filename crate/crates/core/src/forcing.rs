//! The fourth-order forcing sectors `F_1 .. F_4`, their singular/regular
//! splits, and the norm machinery behind the sector sweeps.
//!
//! Every printed summand (`F1a`..`F1l`, `F2a`..`F2l`, `F3a`..`F3f`,
//! `F4a`..`F4d`; 34 in total) has an individually addressable
//! implementation so each line can be checked against a direct-loop
//! oracle. FFT acceleration is used only where a term is literally a
//! convolution in some variable; everything else is a dense contraction.
//!
//! Sectors with `l <= 3` are materialized. The `l = 4` sector is
//! materialized only under the memory budget (`n <= 48` by default);
//! sweeps use closed contraction formulas for the `L^2` norms of its
//! singular and regular parts that never form the rank-4 tensor.

use ndarray::{Array1, Array2, Array3, ArrayD, IxDyn};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fit::ExponentFit;
use crate::grid::{Field, GridSpec};
use crate::kernel::Kernel;
use crate::meanfield::Interaction;

/// Default `l = 4` materialization budget in entries (`48^4`).
pub const L4_ENTRY_BUDGET: usize = 5_308_416;

/// Which part of a sector a field represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SectorTag {
    Full,
    Singular,
    Regular,
}

/// Complex field on `(R)^l`, the `l`-th sector of the forcing.
#[derive(Debug, Clone)]
pub struct SectorField {
    pub l: usize,
    pub grid: GridSpec,
    pub tag: SectorTag,
    pub data: ArrayD<Complex64>,
}

impl SectorField {
    pub fn new(l: usize, grid: GridSpec, tag: SectorTag, data: ArrayD<Complex64>) -> Result<Self> {
        if grid.d() != 1 {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: "sector fields run at d=1".into(),
            });
        }
        if data.ndim() != l || data.shape().iter().any(|&s| s != grid.n()) {
            return Err(Error::InvalidParameter {
                name: "data",
                reason: format!("sector-{l} shape {:?}", data.shape()),
            });
        }
        Ok(Self { l, grid, tag, data })
    }

    pub fn zeros(l: usize, grid: GridSpec, tag: SectorTag) -> Result<Self> {
        let shape: Vec<usize> = vec![grid.n(); l];
        Self::new(l, grid, tag, ArrayD::zeros(IxDyn(&shape)))
    }

    pub fn norm_l2(&self) -> f64 {
        let s: f64 = self.data.iter().map(|z| z.norm_sqr()).sum();
        (s * self.grid.dx().powi(self.l as i32)).sqrt()
    }

    pub fn sub(&self, other: &SectorField) -> Result<SectorField> {
        if self.l != other.l || self.grid != other.grid {
            return Err(Error::GridMismatch(
                format!("{:?}", self.grid),
                format!("{:?}", other.grid),
            ));
        }
        SectorField::new(self.l, self.grid, self.tag, &self.data - &other.data)
    }

    pub fn add(&self, other: &SectorField) -> Result<SectorField> {
        if self.l != other.l || self.grid != other.grid {
            return Err(Error::GridMismatch(
                format!("{:?}", self.grid),
                format!("{:?}", other.grid),
            ));
        }
        SectorField::new(self.l, self.grid, self.tag, &self.data + &other.data)
    }

    pub fn scaled(&self, factor: Complex64) -> SectorField {
        SectorField {
            l: self.l,
            grid: self.grid,
            tag: self.tag,
            data: self.data.mapv(|z| z * factor),
        }
    }

    /// Average over all coordinate permutations of the sector.
    pub fn symmetrize(&self) -> SectorField {
        let perms = permutations(self.l);
        let mut out = ArrayD::<Complex64>::zeros(self.data.raw_dim());
        let mut src_idx = vec![0usize; self.l];
        for (idx, v) in out.indexed_iter_mut() {
            let mut acc = Complex64::default();
            for perm in &perms {
                for (a, &pa) in perm.iter().enumerate() {
                    src_idx[a] = idx[pa];
                }
                acc += self.data[IxDyn(&src_idx)];
            }
            *v = acc / perms.len() as f64;
        }
        SectorField {
            l: self.l,
            grid: self.grid,
            tag: self.tag,
            data: out,
        }
    }

    /// Largest relative change under any coordinate transposition.
    pub fn symmetry_defect(&self) -> f64 {
        let nrm = self.norm_l2();
        if nrm == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for a in 0..self.l {
            for b in (a + 1)..self.l {
                let mut axes: Vec<usize> = (0..self.l).collect();
                axes.swap(a, b);
                let swapped = self.data.clone().permuted_axes(IxDyn(&axes));
                let diff: f64 = self
                    .data
                    .iter()
                    .zip(swapped.iter())
                    .map(|(x, y)| (x - y).norm_sqr())
                    .sum();
                worst = worst.max((diff * self.grid.dx().powi(self.l as i32)).sqrt() / nrm);
            }
        }
        worst
    }
}

fn permutations(l: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..l).collect();
    permute(&mut items, 0, &mut out);
    out
}

fn permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Shared inputs for sector assembly: the recovered pair kernels, the
/// condensate, and the scaled interaction.
pub struct SectorInputs<'a> {
    pub u: &'a Kernel,
    pub p: &'a Kernel,
    pub phi: &'a Field,
    pub interaction: &'a Interaction,
}

/// Precomputed contraction ingredients.
struct Work {
    n: usize,
    dx: f64,
    /// `v_N` by index difference: `v[(i - j).rem_euclid(n)]`.
    v: Vec<f64>,
    u: Array2<Complex64>,
    ub: Array2<Complex64>,
    pb: Array2<Complex64>,
    p: Array2<Complex64>,
    phi: Vec<Complex64>,
    phib: Vec<Complex64>,
    /// `(ubar o u)` and `(u o ubar)` matrices.
    ubu: Array2<Complex64>,
    uub: Array2<Complex64>,
    /// `(pbar o u)`, `(ubar o pbar)`.
    pbu: Array2<Complex64>,
    ubpb: Array2<Complex64>,
}

impl Work {
    fn new(inp: &SectorInputs) -> Result<Self> {
        let grid = inp.interaction.grid();
        if inp.u.grid() != grid || inp.p.grid() != grid || inp.phi.grid() != grid {
            return Err(Error::GridMismatch(
                format!("{:?}", inp.u.grid()),
                format!("{:?}", grid),
            ));
        }
        let n = grid.n();
        let dx = grid.dx();
        let v: Vec<f64> = inp
            .interaction
            .v_n()
            .data()
            .as_slice()
            .expect("layout")
            .iter()
            .map(|z| z.re)
            .collect();
        let u = inp.u.data().clone();
        let ub = inp.u.conj().data().clone();
        let pb = inp.p.conj().data().clone();
        let p = inp.p.data().clone();
        let phi: Vec<Complex64> = inp.phi.data().iter().cloned().collect();
        let phib: Vec<Complex64> = phi.iter().map(|z| z.conj()).collect();
        let scale = Complex64::new(dx, 0.0);
        let ubu = ub.dot(&u).mapv(|z| z * scale);
        let uub = u.dot(&ub).mapv(|z| z * scale);
        let pbu = pb.dot(&u).mapv(|z| z * scale);
        let ubpb = ub.dot(&pb).mapv(|z| z * scale);
        Ok(Self {
            n,
            dx,
            v,
            u,
            ub,
            pb,
            p,
            phi,
            phib,
            ubu,
            uub,
            pbu,
            ubpb,
        })
    }

    #[inline]
    fn vv(&self, i: usize, j: usize) -> f64 {
        self.v[(i + self.n - j) % self.n]
    }

    /// Pointwise product `v_N(x-y) K(x,y)`.
    fn vmask(&self, k: &Array2<Complex64>) -> Array2<Complex64> {
        Array2::from_shape_fn((self.n, self.n), |(i, j)| self.vv(i, j) * k[[i, j]])
    }

    /// Discrete convolution `(v_N * f)(x_i) = sum_j v(i-j) f_j dx`.
    fn vconv(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut s = Complex64::default();
                for j in 0..n {
                    s += self.v[(i + n - j) % n] * f[j];
                }
                s * self.dx
            })
            .collect()
    }

    fn diag(&self, m: &Array2<Complex64>) -> Vec<Complex64> {
        (0..self.n).map(|i| m[[i, i]]).collect()
    }

    /// `A * diag(w) * B * dx` -- one remaining quadrature weight; `w` is
    /// expected to carry its own integration weight already.
    fn sandwich(
        &self,
        a: &Array2<Complex64>,
        w: &[Complex64],
        b: &Array2<Complex64>,
    ) -> Array2<Complex64> {
        let n = self.n;
        let mut aw = a.clone();
        for i in 0..n {
            for j in 0..n {
                aw[[i, j]] *= w[j];
            }
        }
        aw.dot(b).mapv(|z| z * self.dx)
    }

    /// `A * M * B * dx^2` for a full middle matrix.
    fn triple(
        &self,
        a: &Array2<Complex64>,
        m: &Array2<Complex64>,
        b: &Array2<Complex64>,
    ) -> Array2<Complex64> {
        a.dot(m).dot(b).mapv(|z| z * self.dx * self.dx)
    }
}

pub const F1_NAMES: [&str; 12] = [
    "F1a", "F1b", "F1c", "F1d", "F1e", "F1f", "F1g", "F1h", "F1i", "F1j", "F1k", "F1l",
];
pub const F2_NAMES: [&str; 12] = [
    "F2a", "F2b", "F2c", "F2d", "F2e", "F2f", "F2g", "F2h", "F2i", "F2j", "F2k", "F2l",
];
pub const F3_NAMES: [&str; 6] = ["F3a", "F3b", "F3c", "F3d", "F3e", "F3f"];
pub const F4_NAMES: [&str; 4] = ["F4a", "F4b", "F4c", "F4d"];

/// One printed summand of the first sector (without the `-N^{-1/2}`).
pub fn f1_summand(name: &str, inp: &SectorInputs) -> Result<Array1<Complex64>> {
    let w = Work::new(inp)?;
    let n = w.n;
    let dx = w.dx;
    let mut out = Array1::<Complex64>::zeros(n);
    match name {
        // integrals against v_N(x1 - x2)
        "F1a" | "F1b" => {
            // K(y1, x2) (v * diag)(x2) phi^(+-)(x2)
            let (mat, dvec, ph): (&Array2<Complex64>, Vec<Complex64>, &Vec<Complex64>) =
                if name == "F1a" {
                    (&w.u, w.diag(&w.ubu), &w.phib)
                } else {
                    (&w.pb, w.diag(&w.uub), &w.phi)
                };
            let conv = w.vconv(&dvec);
            for y in 0..n {
                let mut s = Complex64::default();
                for x2 in 0..n {
                    s += mat[[y, x2]] * conv[x2] * ph[x2];
                }
                out[y] = s * dx;
            }
        }
        "F1c" | "F1d" | "F1e" | "F1f" => {
            let (mat, mid, ph): (&Array2<Complex64>, &Array2<Complex64>, &Vec<Complex64>) =
                match name {
                    "F1c" => (&w.u, &w.ubu, &w.phib),
                    "F1d" => (&w.pb, &w.pbu, &w.phib),
                    "F1e" => (&w.pb, &w.uub, &w.phi),
                    _ => (&w.u, &w.ubpb, &w.phi),
                };
            let masked = w.vmask(mid);
            // b(x1) = sum_x2 masked(x1,x2) ph(x2) dx
            let mut b = vec![Complex64::default(); n];
            for x1 in 0..n {
                let mut s = Complex64::default();
                for x2 in 0..n {
                    s += masked[[x1, x2]] * ph[x2];
                }
                b[x1] = s * dx;
            }
            for y in 0..n {
                let mut s = Complex64::default();
                for x1 in 0..n {
                    s += mat[[y, x1]] * b[x1];
                }
                out[y] = s * dx;
            }
        }
        "F1g" | "F1h" => {
            let (mat, mid, ph): (&Array2<Complex64>, &Array2<Complex64>, &Vec<Complex64>) =
                if name == "F1g" {
                    (&w.pb, &w.u, &w.phib)
                } else {
                    (&w.u, &w.ub, &w.phi)
                };
            let masked = w.vmask(mid);
            let mut b = vec![Complex64::default(); n];
            for x1 in 0..n {
                let mut s = Complex64::default();
                for x2 in 0..n {
                    s += masked[[x1, x2]] * ph[x2];
                }
                b[x1] = s * dx;
            }
            for y in 0..n {
                let mut s = Complex64::default();
                for x1 in 0..n {
                    s += mat[[y, x1]] * b[x1];
                }
                out[y] = s * dx;
            }
        }
        // integrals against v_N(y1 - x1)
        "F1i" => {
            for y in 0..n {
                let mut s = Complex64::default();
                for x1 in 0..n {
                    s += w.vv(y, x1) * w.u[[y, x1]] * w.phib[x1];
                }
                out[y] = s * dx;
            }
        }
        "F1j" | "F1k" => {
            let (mid, ph): (&Array2<Complex64>, &Vec<Complex64>) = if name == "F1j" {
                (&w.uub, &w.phi)
            } else {
                (&w.pbu, &w.phib)
            };
            for y in 0..n {
                let mut s = Complex64::default();
                for x1 in 0..n {
                    s += w.vv(y, x1) * mid[[y, x1]] * ph[x1];
                }
                out[y] = s * dx;
            }
        }
        "F1l" => {
            let dvec = w.diag(&w.uub);
            let conv = w.vconv(&dvec);
            for y in 0..n {
                out[y] = w.phi[y] * conv[y];
            }
        }
        _ => {
            return Err(Error::InvalidParameter {
                name: "summand",
                reason: format!("unknown F1 summand {name}"),
            })
        }
    }
    Ok(out)
}

/// One printed summand of the second sector (with printed inner factors
/// like the explicit 2's, without the overall `-1/(2N)`).
pub fn f2_summand(name: &str, inp: &SectorInputs) -> Result<Array2<Complex64>> {
    let w = Work::new(inp)?;
    let n = w.n;
    let dx = w.dx;
    let two = Complex64::new(2.0, 0.0);
    let out: Array2<Complex64> = match name {
        "F2a" => {
            let cu = {
                // u + (pbar o u)
                let mut t = w.pbu.clone();
                t += &w.u;
                t
            };
            Array2::from_shape_fn((n, n), |(i, j)| w.vv(i, j) * cu[[i, j]])
        }
        "F2b" => {
            let conv = w.vconv(&w.diag(&w.ubu));
            w.sandwich(&w.pb, &conv, &w.u).mapv(|z| z * two)
        }
        "F2c" => {
            // 2 sum pb(y1,x2) u(x1,y2) (ubu)(x1,x2) v(x1-x2)
            let masked = w.vmask(&w.ubu);
            // g(y2, x2) = sum_x1 u(x1, y2) masked(x1, x2) dx
            let g = w.u.t().dot(&masked).mapv(|z| z * dx);
            w.pb.dot(&g.t()).mapv(|z| z * dx * two)
        }
        "F2d" => w.triple(&w.u, &w.vmask(&w.ubpb), &w.u),
        "F2e" => w.triple(&w.pb, &w.vmask(&w.pbu), &w.p),
        "F2f" => w.triple(&w.u, &w.vmask(&w.ub), &w.u),
        "F2g" => w.triple(&w.pb, &w.vmask(&w.u), &w.p),
        "F2h" => {
            let conv = w.vconv(&w.diag(&w.ubu));
            Array2::from_shape_fn((n, n), |(y1, y2)| two * w.u[[y1, y2]] * conv[y1])
        }
        "F2i" => Array2::from_shape_fn((n, n), |(y1, y2)| {
            let mut s = Complex64::default();
            for x1 in 0..n {
                s += w.vv(y1, x1) * w.pb[[y2, x1]] * w.u[[x1, y1]];
            }
            s * dx
        }),
        "F2j" => Array2::from_shape_fn((n, n), |(y1, y2)| {
            let mut s = Complex64::default();
            for x1 in 0..n {
                s += w.vv(y1, x1) * w.u[[x1, y2]] * w.ubu[[x1, y1]];
            }
            s * dx * two
        }),
        "F2k" => Array2::from_shape_fn((n, n), |(y1, y2)| {
            let mut s = Complex64::default();
            for x1 in 0..n {
                s += w.vv(y1, x1) * w.pb[[y2, x1]] * w.pbu[[y1, x1]];
            }
            s * dx
        }),
        "F2l" => {
            // cbar o u = u + pbar o u
            let cu = {
                let mut t = w.pbu.clone();
                t += &w.u;
                t
            };
            Array2::from_shape_fn((n, n), |(y1, y2)| {
                let mut s = Complex64::default();
                for x1 in 0..n {
                    s += w.vv(x1, y2) * w.pb[[y1, x1]] * cu[[x1, y2]];
                }
                s * dx
            })
        }
        _ => {
            return Err(Error::InvalidParameter {
                name: "summand",
                reason: format!("unknown F2 summand {name}"),
            })
        }
    };
    Ok(out)
}

/// One printed summand of the third sector (without the `-N^{-1/2}`).
pub fn f3_summand(name: &str, inp: &SectorInputs) -> Result<Array3<Complex64>> {
    let w = Work::new(inp)?;
    let n = w.n;
    let dx = w.dx;
    let out: Array3<Complex64> = match name {
        "F3a" => Array3::from_shape_fn((n, n, n), |(y1, y2, y3)| {
            w.vv(y1, y2) * w.phi[y2] * w.u[[y3, y1]]
        }),
        "F3b" => {
            // b(y1, y3) = sum_x v(y1-x) phib(x) u(x,y3) dx
            let b = Array2::from_shape_fn((n, n), |(y1, y3)| {
                let mut s = Complex64::default();
                for x in 0..n {
                    s += w.vv(y1, x) * w.phib[x] * w.u[[x, y3]];
                }
                s * dx
            });
            Array3::from_shape_fn((n, n, n), |(y1, y2, y3)| b[[y1, y3]] * w.u[[y2, y1]])
        }
        "F3c" => {
            // c(y1, y2, y3) = sum_x pb(y1,x) v(x-y2) u(y3,x) dx
            let mut c = Array3::<Complex64>::zeros((n, n, n));
            for y2 in 0..n {
                for y1 in 0..n {
                    for y3 in 0..n {
                        let mut s = Complex64::default();
                        for x in 0..n {
                            s += w.pb[[y1, x]] * w.vv(x, y2) * w.u[[y3, x]];
                        }
                        c[[y1, y2, y3]] = s * dx;
                    }
                }
            }
            for y2 in 0..n {
                let ph = w.phi[y2];
                for y1 in 0..n {
                    for y3 in 0..n {
                        c[[y1, y2, y3]] *= ph;
                    }
                }
            }
            c
        }
        "F3d" => {
            // d(y2, y1) = sum_x pb(y2,x) v(y1-x) phi(x) dx
            let d = Array2::from_shape_fn((n, n), |(y2, y1)| {
                let mut s = Complex64::default();
                for x in 0..n {
                    s += w.pb[[y2, x]] * w.vv(y1, x) * w.phi[x];
                }
                s * dx
            });
            Array3::from_shape_fn((n, n, n), |(y1, y2, y3)| d[[y2, y1]] * w.u[[y3, y1]])
        }
        "F3e" => {
            // t(x1, y3) = sum_x2 v(x1-x2) phib(x2) u(x2,y3) dx
            let t = Array2::from_shape_fn((n, n), |(x1, y3)| {
                let mut s = Complex64::default();
                for x2 in 0..n {
                    s += w.vv(x1, x2) * w.phib[x2] * w.u[[x2, y3]];
                }
                s * dx
            });
            Array3::from_shape_fn((n, n, n), |(y1, y2, y3)| {
                let mut s = Complex64::default();
                for x1 in 0..n {
                    s += w.pb[[y1, x1]] * w.u[[y2, x1]] * t[[x1, y3]];
                }
                s * dx
            })
        }
        "F3f" => {
            // s(x1, y2) = sum_x2 v(x1-x2) phi(x2) p(x2,y2) dx
            let sm = Array2::from_shape_fn((n, n), |(x1, y2)| {
                let mut s = Complex64::default();
                for x2 in 0..n {
                    s += w.vv(x1, x2) * w.phi[x2] * w.p[[x2, y2]];
                }
                s * dx
            });
            Array3::from_shape_fn((n, n, n), |(y1, y2, y3)| {
                let mut s = Complex64::default();
                for x1 in 0..n {
                    s += w.pb[[y1, x1]] * sm[[x1, y2]] * w.u[[y3, x1]];
                }
                s * dx
            })
        }
        _ => {
            return Err(Error::InvalidParameter {
                name: "summand",
                reason: format!("unknown F3 summand {name}"),
            })
        }
    };
    Ok(out)
}

/// One printed summand of the fourth sector (without the `-1/(2N)`).
/// Materializes an `n^4` array; guarded by the entry budget unless
/// `override_budget` is set.
pub fn f4_summand(name: &str, inp: &SectorInputs, override_budget: bool) -> Result<ArrayD<Complex64>> {
    let w = Work::new(inp)?;
    let n = w.n;
    let entries = n * n * n * n;
    if entries > L4_ENTRY_BUDGET && !override_budget {
        return Err(Error::MemoryGuard {
            l: 4,
            entries,
            budget: L4_ENTRY_BUDGET,
        });
    }
    let dx = w.dx;
    let shape = IxDyn(&[n, n, n, n]);
    let out = match name {
        "F4a" => ArrayD::from_shape_fn(shape, |ix| {
            w.vv(ix[0], ix[1]) * w.u[[ix[2], ix[0]]] * w.u[[ix[1], ix[3]]]
        }),
        "F4b" => {
            // b(y1, y2, y4) = sum_x pb(y2,x) v(y1-x) u(x,y4) dx
            let b = Array3::from_shape_fn((n, n, n), |(y1, y2, y4)| {
                let mut s = Complex64::default();
                for x in 0..n {
                    s += w.pb[[y2, x]] * w.vv(y1, x) * w.u[[x, y4]];
                }
                s * dx
            });
            ArrayD::from_shape_fn(shape, |ix| {
                b[[ix[0], ix[1], ix[3]]] * w.u[[ix[2], ix[0]]]
            })
        }
        "F4c" => {
            // c(y1, y2, y3) = sum_x pb(y1,x) v(x-y2) u(y3,x) dx
            let c = Array3::from_shape_fn((n, n, n), |(y1, y2, y3)| {
                let mut s = Complex64::default();
                for x in 0..n {
                    s += w.pb[[y1, x]] * w.vv(x, y2) * w.u[[y3, x]];
                }
                s * dx
            });
            ArrayD::from_shape_fn(shape, |ix| {
                c[[ix[0], ix[1], ix[2]]] * w.u[[ix[1], ix[3]]]
            })
        }
        "F4d" => {
            // r(x1, y2, y4) = sum_x2 v(x1-x2) p(x2,y2) u(x2,y4) dx
            let r = Array3::from_shape_fn((n, n, n), |(x1, y2, y4)| {
                let mut s = Complex64::default();
                for x2 in 0..n {
                    s += w.vv(x1, x2) * w.p[[x2, y2]] * w.u[[x2, y4]];
                }
                s * dx
            });
            ArrayD::from_shape_fn(shape, |ix| {
                let (y1, y2, y3, y4) = (ix[0], ix[1], ix[2], ix[3]);
                let mut s = Complex64::default();
                for x1 in 0..n {
                    s += w.pb[[y1, x1]] * w.u[[y3, x1]] * r[[x1, y2, y4]];
                }
                s * dx
            })
        }
        _ => {
            return Err(Error::InvalidParameter {
                name: "summand",
                reason: format!("unknown F4 summand {name}"),
            })
        }
    };
    Ok(out)
}

/// Assembled sector with its split parts (`full = singular + regular`
/// entrywise; `F_1` has no singular part).
pub struct AssembledSector {
    pub full: SectorField,
    pub singular: Option<SectorField>,
    pub regular: Option<SectorField>,
}

fn prefactor(l: usize, n_particles: f64) -> Complex64 {
    match l {
        1 | 3 => Complex64::new(-1.0 / n_particles.sqrt(), 0.0),
        _ => Complex64::new(-1.0 / (2.0 * n_particles), 0.0),
    }
}

pub fn assemble_f1(inp: &SectorInputs) -> Result<SectorField> {
    let grid = inp.interaction.grid();
    let n = grid.n();
    let mut acc = Array1::<Complex64>::zeros(n);
    for name in F1_NAMES {
        acc += &f1_summand(name, inp)?;
    }
    let pf = prefactor(1, inp.interaction.n_particles());
    let data = acc.mapv(|z| z * pf).into_dyn();
    SectorField::new(1, grid, SectorTag::Full, data)
}

pub fn assemble_f2(inp: &SectorInputs) -> Result<AssembledSector> {
    let grid = inp.interaction.grid();
    let pf = prefactor(2, inp.interaction.n_particles());
    let mut acc = f2_summand("F2a", inp)?;
    let singular = SectorField::new(
        2,
        grid,
        SectorTag::Singular,
        acc.mapv(|z| z * pf).into_dyn(),
    )?;
    for name in &F2_NAMES[1..] {
        acc += &f2_summand(name, inp)?;
    }
    let full = SectorField::new(2, grid, SectorTag::Full, acc.mapv(|z| z * pf).into_dyn())?;
    let regular = SectorField {
        tag: SectorTag::Regular,
        ..full.sub(&singular)?
    };
    Ok(AssembledSector {
        full,
        singular: Some(singular),
        regular: Some(regular),
    })
}

pub fn assemble_f3(inp: &SectorInputs) -> Result<AssembledSector> {
    let grid = inp.interaction.grid();
    let pf = prefactor(3, inp.interaction.n_particles());
    let mut acc = f3_summand("F3a", inp)?;
    let singular = SectorField::new(
        3,
        grid,
        SectorTag::Singular,
        acc.mapv(|z| z * pf).into_dyn(),
    )?;
    for name in &F3_NAMES[1..] {
        acc += &f3_summand(name, inp)?;
    }
    let full = SectorField::new(3, grid, SectorTag::Full, acc.mapv(|z| z * pf).into_dyn())?;
    let regular = SectorField {
        tag: SectorTag::Regular,
        ..full.sub(&singular)?
    };
    Ok(AssembledSector {
        full,
        singular: Some(singular),
        regular: Some(regular),
    })
}

pub fn assemble_f4(inp: &SectorInputs, override_budget: bool) -> Result<AssembledSector> {
    let grid = inp.interaction.grid();
    let pf = prefactor(4, inp.interaction.n_particles());
    let mut acc = f4_summand("F4a", inp, override_budget)?;
    let singular = SectorField::new(
        4,
        grid,
        SectorTag::Singular,
        acc.mapv(|z| z * pf),
    )?;
    for name in &F4_NAMES[1..] {
        acc += &f4_summand(name, inp, override_budget)?;
    }
    let full = SectorField::new(4, grid, SectorTag::Full, acc.mapv(|z| z * pf))?;
    let regular = SectorField {
        tag: SectorTag::Regular,
        ..full.sub(&singular)?
    };
    Ok(AssembledSector {
        full,
        singular: Some(singular),
        regular: Some(regular),
    })
}

/// Only the singular part of a sector (cheap: diagonal `v_N` structure).
pub fn singular_part(l: usize, inp: &SectorInputs) -> Result<SectorField> {
    let grid = inp.interaction.grid();
    let pf = prefactor(l, inp.interaction.n_particles());
    match l {
        2 => {
            let a = f2_summand("F2a", inp)?;
            SectorField::new(2, grid, SectorTag::Singular, a.mapv(|z| z * pf).into_dyn())
        }
        3 => {
            let a = f3_summand("F3a", inp)?;
            SectorField::new(3, grid, SectorTag::Singular, a.mapv(|z| z * pf).into_dyn())
        }
        4 => {
            let a = f4_summand("F4a", inp, false)?;
            SectorField::new(4, grid, SectorTag::Singular, a.mapv(|z| z * pf))
        }
        _ => Err(Error::InvalidParameter {
            name: "l",
            reason: "singular parts exist for l = 2, 3, 4".into(),
        }),
    }
}

/// `L^2` norms of the `l = 4` singular and regular parts by closed
/// contraction formulas; the rank-4 tensor is never materialized.
pub fn f4_norms_fast(inp: &SectorInputs) -> Result<(f64, f64)> {
    let w = Work::new(inp)?;
    let n = w.n;
    let dx = w.dx;
    let pref = 1.0 / (2.0 * inp.interaction.n_particles());

    // column L2^2 of u: rho(y) = sum_x |u(x,y)|^2 dx
    let rho: Vec<f64> = (0..n)
        .map(|y| (0..n).map(|x| w.u[[x, y]].norm_sqr()).sum::<f64>() * dx)
        .collect();

    // ||F4s||^2 = pref^2 sum_{y1 y2} v(y1-y2)^2 rho(y1) rho(y2) dx^2
    let mut s2 = 0.0;
    for y1 in 0..n {
        for y2 in 0..n {
            let v = w.vv(y1, y2);
            s2 += v * v * rho[y1] * rho[y2];
        }
    }
    let singular = pref * (s2 * dx * dx).sqrt();

    // b(y1, y2, y4), c(y1, y2, y3), r(x1, y2, y4) as in the summands
    let b = Array3::from_shape_fn((n, n, n), |(y1, y2, y4)| {
        let mut s = Complex64::default();
        for x in 0..n {
            s += w.pb[[y2, x]] * w.vv(y1, x) * w.u[[x, y4]];
        }
        s * dx
    });
    let c = Array3::from_shape_fn((n, n, n), |(y1, y2, y3)| {
        let mut s = Complex64::default();
        for x in 0..n {
            s += w.pb[[y1, x]] * w.vv(x, y2) * w.u[[y3, x]];
        }
        s * dx
    });
    let r = Array3::from_shape_fn((n, n, n), |(x1, y2, y4)| {
        let mut s = Complex64::default();
        for x2 in 0..n {
            s += w.vv(x1, x2) * w.p[[x2, y2]] * w.u[[x2, y4]];
        }
        s * dx
    });
    let dx2 = dx * dx;
    let dx4 = dx2 * dx2;

    // <b,b> = sum_{y1} rho(y1) sum_{y2 y4} |b|^2
    let mut bb = 0.0;
    for y1 in 0..n {
        let mut inner = 0.0;
        for y2 in 0..n {
            for y4 in 0..n {
                inner += b[[y1, y2, y4]].norm_sqr();
            }
        }
        bb += rho[y1] * inner;
    }
    let bb = bb * dx * dx2;

    // <c,c> = sum_{y1 y2 y3} |c|^2 rho(y2)
    let mut cc = 0.0;
    for y1 in 0..n {
        for y2 in 0..n {
            let mut inner = 0.0;
            for y3 in 0..n {
                inner += c[[y1, y2, y3]].norm_sqr();
            }
            cc += inner * rho[y2];
        }
    }
    let cc = cc * dx * dx2;

    // <b,c> = sum_{y1 y2} X(y1,y2) Y(y1,y2) dx^2
    //   X = sum_y4 conj(b) u(y2,y4) dx, Y = sum_y3 conj(u(y3,y1)) c dx
    let mut bc = Complex64::default();
    for y1 in 0..n {
        for y2 in 0..n {
            let mut x = Complex64::default();
            for y4 in 0..n {
                x += b[[y1, y2, y4]].conj() * w.u[[y2, y4]];
            }
            let mut y = Complex64::default();
            for y3 in 0..n {
                y += w.u[[y3, y1]].conj() * c[[y1, y2, y3]];
            }
            bc += x * y;
        }
    }
    let bc = bc * dx4;

    // Q = (ubar o u), A = (Pb^H o Pb), Q2 = (u^H o u) for <d,d>
    let q = &w.ubu;

    // <b,d> = sum_{y1 x1} Q(y1,x1) Pb(y1,x1) [sum_{y2 y4} conj(b) r] dx^2
    let mut bd = Complex64::default();
    for y1 in 0..n {
        for x1 in 0..n {
            let mut inner = Complex64::default();
            for y2 in 0..n {
                for y4 in 0..n {
                    inner += b[[y1, y2, y4]].conj() * r[[x1, y2, y4]];
                }
            }
            bd += q[[y1, x1]] * w.pb[[y1, x1]] * inner * dx2;
        }
    }
    let bd = bd * dx2;

    // <c,d>: S(x1,y2) = sum_y4 conj(u(y2,y4)) r(x1,y2,y4) dx
    //        T(y1,y2,x1) = sum_y3 conj(c) u(y3,x1) dx
    let mut cd = Complex64::default();
    {
        let mut s_mat = Array2::<Complex64>::zeros((n, n));
        for x1 in 0..n {
            for y2 in 0..n {
                let mut s = Complex64::default();
                for y4 in 0..n {
                    s += w.u[[y2, y4]].conj() * r[[x1, y2, y4]];
                }
                s_mat[[x1, y2]] = s * dx;
            }
        }
        for y1 in 0..n {
            for y2 in 0..n {
                for x1 in 0..n {
                    let mut t = Complex64::default();
                    for y3 in 0..n {
                        t += c[[y1, y2, y3]].conj() * w.u[[y3, x1]];
                    }
                    cd += t * dx * w.pb[[y1, x1]] * s_mat[[x1, y2]];
                }
            }
        }
        cd *= Complex64::new(dx2 * dx, 0.0);
    }

    // <d,d> = sum_{x1 x1'} A(x1,x1') Q2(x1,x1') RR(x1,x1') dx^2
    let mut dd = 0.0;
    {
        let a = {
            let pbh = w.pb.t().mapv(|z| z.conj());
            pbh.dot(&w.pb).mapv(|z| z * dx)
        };
        let q2 = {
            let uh = w.u.t().mapv(|z| z.conj());
            uh.dot(&w.u).mapv(|z| z * dx)
        };
        for x1 in 0..n {
            for x1p in 0..n {
                let mut rr = Complex64::default();
                for y2 in 0..n {
                    for y4 in 0..n {
                        rr += r[[x1, y2, y4]].conj() * r[[x1p, y2, y4]];
                    }
                }
                dd += (a[[x1, x1p]] * q2[[x1, x1p]] * rr * dx2).re;
            }
        }
        dd *= dx2;
    }

    let total = bb + cc + dd + 2.0 * (bc.re + bd.re + cd.re);
    let regular = pref * total.max(0.0).sqrt();
    Ok((singular, regular))
}

/// Norm table entry for one `(N, t)` sweep point.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SectorNormRow {
    pub n_particles: f64,
    pub t: f64,
    pub l: usize,
    pub full: f64,
    pub singular: f64,
    pub regular: f64,
}

/// Fitted exponents for one sector over an N-sweep.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SectorExponents {
    pub l: usize,
    pub beta: f64,
    pub full_fit: Option<ExponentFit>,
    pub singular_fit: Option<ExponentFit>,
    pub regular_fit: Option<ExponentFit>,
    pub ratio_decreasing: bool,
}

/// Lemma-4.2-style exponent report from sweep rows at a fixed time.
pub fn lemma42_table(rows: &[SectorNormRow], beta: f64) -> Result<Vec<SectorExponents>> {
    let mut out = Vec::new();
    for l in 1..=4usize {
        let of_l: Vec<&SectorNormRow> = rows.iter().filter(|r| r.l == l).collect();
        if of_l.is_empty() {
            continue;
        }
        let fit = |f: &dyn Fn(&SectorNormRow) -> f64| -> Option<ExponentFit> {
            let pts: Vec<(f64, f64)> = of_l
                .iter()
                .map(|r| (r.n_particles, f(r)))
                .filter(|&(_, v)| v > 0.0)
                .collect();
            if pts.len() >= 3 {
                crate::fit::fit_exponent(&pts).ok()
            } else {
                None
            }
        };
        let full_fit = fit(&|r| r.full);
        let singular_fit = fit(&|r| r.singular);
        let regular_fit = fit(&|r| r.regular);
        let ratios: Vec<f64> = of_l
            .iter()
            .filter(|r| r.singular > 0.0)
            .map(|r| r.regular / r.singular)
            .collect();
        let ratio_decreasing = ratios.windows(2).all(|w| w[1] < w[0]) && ratios.len() >= 2;
        out.push(SectorExponents {
            l,
            beta,
            full_fit,
            singular_fit,
            regular_fit,
            ratio_decreasing,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{sh_series, SERIES_TOL};
    use crate::meanfield::{gaussian_phi0, PotentialProfile};
    use ndarray::Array2;
    use num_complex::Complex64;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    struct Fixture {
        grid: GridSpec,
        interaction: Interaction,
        u: Kernel,
        p: Kernel,
        phi: Field,
    }

    fn fixture(n: usize, seed: u64) -> Fixture {
        let grid = GridSpec::new(1, n, 6.0).unwrap();
        let interaction =
            Interaction::new_unguarded(grid, PotentialProfile::Gaussian, 1.0, 8.0, 0.4).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut udata = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let z = Complex64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
                udata[[i, j]] = z;
                udata[[j, i]] = z;
            }
        }
        let u = Kernel::new(grid, udata).unwrap();
        // p from the series of a random k keeps it physically shaped
        let k = u.scaled(Complex64::new(0.4, 0.0));
        let (_, c) = {
            let (sh, _) = sh_series(&k, SERIES_TOL).unwrap();
            let (ch, _) = crate::kernel::ch_series(&k, SERIES_TOL).unwrap();
            (sh, ch)
        };
        let p = c.rest.clone();
        let phi = gaussian_phi0(grid, 1.0, 0.3).unwrap();
        Fixture {
            grid,
            interaction,
            u,
            p,
            phi,
        }
    }

    fn inputs(f: &Fixture) -> SectorInputs<'_> {
        SectorInputs {
            u: &f.u,
            p: &f.p,
            phi: &f.phi,
            interaction: &f.interaction,
        }
    }

    /// Direct-loop oracle for every summand at n = 12. Implements the
    /// printed formulas with bare nested sums, no shared contraction code.
    mod oracle {
        use super::*;

        pub struct Raw {
            pub n: usize,
            pub dx: f64,
            pub v: Vec<f64>,
            pub u: Array2<Complex64>,
            pub p: Array2<Complex64>,
            pub phi: Vec<Complex64>,
        }

        impl Raw {
            pub fn new(f: &Fixture) -> Self {
                let n = f.grid.n();
                Self {
                    n,
                    dx: f.grid.dx(),
                    v: f
                        .interaction
                        .v_n()
                        .data()
                        .iter()
                        .map(|z| z.re)
                        .collect(),
                    u: f.u.data().clone(),
                    p: f.p.data().clone(),
                    phi: f.phi.data().iter().cloned().collect(),
                }
            }

            pub fn vv(&self, i: usize, j: usize) -> f64 {
                self.v[(i + self.n - j) % self.n]
            }

            pub fn ub(&self, i: usize, j: usize) -> Complex64 {
                self.u[[i, j]].conj()
            }

            pub fn pb(&self, i: usize, j: usize) -> Complex64 {
                self.p[[i, j]].conj()
            }

            // compositions written as bare sums
            pub fn ubu(&self, a: usize, b: usize) -> Complex64 {
                (0..self.n)
                    .map(|z| self.ub(a, z) * self.u[[z, b]])
                    .sum::<Complex64>()
                    * self.dx
            }

            pub fn uub(&self, a: usize, b: usize) -> Complex64 {
                (0..self.n)
                    .map(|z| self.u[[a, z]] * self.ub(z, b))
                    .sum::<Complex64>()
                    * self.dx
            }

            pub fn pbu(&self, a: usize, b: usize) -> Complex64 {
                (0..self.n)
                    .map(|z| self.pb(a, z) * self.u[[z, b]])
                    .sum::<Complex64>()
                    * self.dx
            }

            pub fn ubpb(&self, a: usize, b: usize) -> Complex64 {
                (0..self.n)
                    .map(|z| self.ub(a, z) * self.pb(z, b))
                    .sum::<Complex64>()
                    * self.dx
            }
        }

        pub fn f1(name: &str, r: &Raw) -> Array1<Complex64> {
            let n = r.n;
            let dx2 = r.dx * r.dx;
            let mut out = Array1::<Complex64>::zeros(n);
            if matches!(name, "F1i" | "F1j" | "F1k" | "F1l") {
                for y1 in 0..n {
                    let mut s = Complex64::default();
                    for x1 in 0..n {
                        s += match name {
                            "F1i" => r.vv(y1, x1) * r.u[[y1, x1]] * r.phi[x1].conj(),
                            "F1j" => r.vv(y1, x1) * r.uub(y1, x1) * r.phi[x1],
                            "F1k" => r.vv(y1, x1) * r.pbu(y1, x1) * r.phi[x1].conj(),
                            _ => r.vv(y1, x1) * r.uub(x1, x1) * r.phi[y1],
                        };
                    }
                    out[y1] = s * r.dx;
                }
                return out;
            }
            for y1 in 0..n {
                let mut s = Complex64::default();
                match name {
                    "F1a" => {
                        for x1 in 0..n {
                            for x2 in 0..n {
                                s += r.vv(x1, x2)
                                    * r.u[[y1, x2]]
                                    * r.ubu(x1, x1)
                                    * r.phi[x2].conj();
                            }
                        }
                    }
                    "F1b" => {
                        for x1 in 0..n {
                            for x2 in 0..n {
                                s += r.vv(x1, x2) * r.pb(y1, x2) * r.uub(x1, x1) * r.phi[x2];
                            }
                        }
                    }
                    "F1c" => {
                        for x1 in 0..n {
                            for x2 in 0..n {
                                s += r.vv(x1, x2)
                                    * r.u[[y1, x1]]
                                    * r.ubu(x1, x2)
                                    * r.phi[x2].conj();
                            }
                        }
                    }
                    "F1d" => {
                        for x1 in 0..n {
                            for x2 in 0..n {
                                s += r.vv(x1, x2)
                                    * r.pb(y1, x1)
                                    * r.pbu(x1, x2)
                                    * r.phi[x2].conj();
                            }
                        }
                    }
                    "F1e" => {
                        for x1 in 0..n {
                            for x2 in 0..n {
                                s += r.vv(x1, x2) * r.pb(y1, x1) * r.uub(x1, x2) * r.phi[x2];
                            }
                        }
                    }
                    "F1f" => {
                        for x1 in 0..n {
                            for x2 in 0..n {
                                s += r.vv(x1, x2) * r.u[[y1, x1]] * r.ubpb(x1, x2) * r.phi[x2];
                            }
                        }
                    }
                    "F1g" => {
                        for x1 in 0..n {
                            for x2 in 0..n {
                                s += r.vv(x1, x2)
                                    * r.pb(y1, x1)
                                    * r.u[[x1, x2]]
                                    * r.phi[x2].conj();
                            }
                        }
                    }
                    "F1h" => {
                        for x1 in 0..n {
                            for x2 in 0..n {
                                s += r.vv(x1, x2) * r.u[[y1, x1]] * r.ub(x1, x2) * r.phi[x2];
                            }
                        }
                    }
                    _ => unreachable!(),
                }
                out[y1] = s * dx2;
            }
            out
        }

        pub fn f2(name: &str, r: &Raw) -> Array2<Complex64> {
            let n = r.n;
            let dx2 = r.dx * r.dx;
            Array2::from_shape_fn((n, n), |(y1, y2)| {
                let mut s = Complex64::default();
                match name {
                    "F2a" => {
                        return r.vv(y1, y2) * (r.u[[y1, y2]] + r.pbu(y1, y2));
                    }
                    "F2b" => {
                        for x1 in 0..n {
                            for x2 in 0..n {
                                s += 2.0
                                    * r.vv(x1, x2)
                                    * r.pb(y1, x2)
                                    * r.u[[x2, y2]]
                                    * r.ubu(x1, x1);
                            }
                        }
                    }
                    "F2c" => {
                        for x1 in 0..n {
                            for x2 in 0..n {
                                s += 2.0
                                    * r.vv(x1, x2)
                                    * r.pb(y1, x2)
                                    * r.u[[x1, y2]]
                                    * r.ubu(x1, x2);
                            }
                        }
                    }
                    "F2d" => {
                        for x1 in 0..n {
                            for x2 in 0..n {
                                s += r.vv(x1, x2)
                                    * r.u[[y1, x1]]
                                    * r.u[[x2, y2]]
                                    * r.ubpb(x1, x2);
                            }
                        }
                    }
                    "F2e" => {
                        for x1 in 0..n {
                            for x2 in 0..n {
                                s += r.vv(x1, x2)
                                    * r.pb(y1, x1)
                                    * r.p[[x2, y2]]
                                    * r.pbu(x1, x2);
                            }
                        }
                    }
                    "F2f" => {
                        for x1 in 0..n {
                            for x2 in 0..n {
                                s += r.vv(x1, x2) * r.u[[y1, x1]] * r.u[[x2, y2]] * r.ub(x1, x2);
                            }
                        }
                    }
                    "F2g" => {
                        for x1 in 0..n {
                            for x2 in 0..n {
                                s += r.vv(x1, x2)
                                    * r.pb(y1, x1)
                                    * r.p[[x2, y2]]
                                    * r.u[[x1, x2]];
                            }
                        }
                    }
                    "F2h" | "F2i" | "F2j" | "F2k" | "F2l" => {
                        let mut s1 = Complex64::default();
                        for x1 in 0..n {
                            s1 += match name {
                                "F2h" => 2.0 * r.vv(y1, x1) * r.u[[y1, y2]] * r.ubu(x1, x1),
                                "F2i" => r.vv(y1, x1) * r.pb(y2, x1) * r.u[[x1, y1]],
                                "F2j" => 2.0 * r.vv(y1, x1) * r.u[[x1, y2]] * r.ubu(x1, y1),
                                "F2k" => r.vv(y1, x1) * r.pb(y2, x1) * r.pbu(y1, x1),
                                _ => {
                                    // F2l: v(x1 - y2) pb(y1,x1) (cbar o u)(x1,y2)
                                    r.vv(x1, y2)
                                        * r.pb(y1, x1)
                                        * (r.u[[x1, y2]] + r.pbu(x1, y2))
                                }
                            };
                        }
                        return s1 * r.dx;
                    }
                    _ => unreachable!(),
                }
                s * dx2
            })
        }

        pub fn f3(name: &str, r: &Raw) -> Array3<Complex64> {
            let n = r.n;
            Array3::from_shape_fn((n, n, n), |(y1, y2, y3)| match name {
                "F3a" => r.vv(y1, y2) * r.phi[y2] * r.u[[y3, y1]],
                "F3b" => {
                    let mut s = Complex64::default();
                    for x in 0..n {
                        s += r.vv(y1, x) * r.phi[x].conj() * r.u[[x, y3]];
                    }
                    s * r.dx * r.u[[y2, y1]]
                }
                "F3c" => {
                    let mut s = Complex64::default();
                    for x in 0..n {
                        s += r.pb(y1, x) * r.vv(x, y2) * r.u[[y3, x]];
                    }
                    s * r.dx * r.phi[y2]
                }
                "F3d" => {
                    let mut s = Complex64::default();
                    for x in 0..n {
                        s += r.pb(y2, x) * r.vv(y1, x) * r.phi[x];
                    }
                    s * r.dx * r.u[[y3, y1]]
                }
                "F3e" => {
                    let mut s = Complex64::default();
                    for x1 in 0..n {
                        for x2 in 0..n {
                            s += r.pb(y1, x1)
                                * r.vv(x1, x2)
                                * r.phi[x2].conj()
                                * r.u[[y2, x1]]
                                * r.u[[x2, y3]];
                        }
                    }
                    s * r.dx * r.dx
                }
                _ => {
                    let mut s = Complex64::default();
                    for x1 in 0..n {
                        for x2 in 0..n {
                            s += r.pb(y1, x1)
                                * r.p[[x2, y2]]
                                * r.vv(x1, x2)
                                * r.phi[x2]
                                * r.u[[y3, x1]];
                        }
                    }
                    s * r.dx * r.dx
                }
            })
        }

        pub fn f4(name: &str, r: &Raw) -> ArrayD<Complex64> {
            let n = r.n;
            ArrayD::from_shape_fn(IxDyn(&[n, n, n, n]), |ix| {
                let (y1, y2, y3, y4) = (ix[0], ix[1], ix[2], ix[3]);
                match name {
                    "F4a" => r.vv(y1, y2) * r.u[[y3, y1]] * r.u[[y2, y4]],
                    "F4b" => {
                        let mut s = Complex64::default();
                        for x in 0..n {
                            s += r.pb(y2, x) * r.vv(y1, x) * r.u[[x, y4]];
                        }
                        s * r.dx * r.u[[y3, y1]]
                    }
                    "F4c" => {
                        let mut s = Complex64::default();
                        for x in 0..n {
                            s += r.pb(y1, x) * r.vv(x, y2) * r.u[[y3, x]];
                        }
                        s * r.dx * r.u[[y2, y4]]
                    }
                    _ => {
                        let mut s = Complex64::default();
                        for x1 in 0..n {
                            for x2 in 0..n {
                                s += r.pb(y1, x1)
                                    * r.p[[x2, y2]]
                                    * r.vv(x1, x2)
                                    * r.u[[y3, x1]]
                                    * r.u[[x2, y4]];
                            }
                        }
                        s * r.dx * r.dx
                    }
                }
            })
        }
    }

    #[test]
    fn all_34_summands_match_loop_oracles() {
        let f = fixture(12, 7);
        let inp = inputs(&f);
        let raw = oracle::Raw::new(&f);
        let tol = 1e-10;
        for name in F1_NAMES {
            let got = f1_summand(name, &inp).unwrap();
            let want = oracle::f1(name, &raw);
            let err: f64 = got
                .iter()
                .zip(want.iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let scale: f64 = want.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(err <= tol * scale.max(1.0), "{name}: err {err} scale {scale}");
        }
        for name in F2_NAMES {
            let got = f2_summand(name, &inp).unwrap();
            let want = oracle::f2(name, &raw);
            let err: f64 = got
                .iter()
                .zip(want.iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let scale: f64 = want.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(err <= tol * scale.max(1.0), "{name}: err {err} scale {scale}");
        }
        for name in F3_NAMES {
            let got = f3_summand(name, &inp).unwrap();
            let want = oracle::f3(name, &raw);
            let err: f64 = got
                .iter()
                .zip(want.iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let scale: f64 = want.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(err <= tol * scale.max(1.0), "{name}: err {err} scale {scale}");
        }
        for name in F4_NAMES {
            let got = f4_summand(name, &inp, false).unwrap();
            let want = oracle::f4(name, &raw);
            let err: f64 = got
                .iter()
                .zip(want.iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let scale: f64 = want.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(err <= tol * scale.max(1.0), "{name}: err {err} scale {scale}");
        }
    }

    #[test]
    fn sectors_vanish_without_excitations() {
        let f = fixture(12, 9);
        let zero = Kernel::zeros(f.grid).unwrap();
        let inp = SectorInputs {
            u: &zero,
            p: &zero,
            phi: &f.phi,
            interaction: &f.interaction,
        };
        assert_eq!(assemble_f1(&inp).unwrap().norm_l2(), 0.0);
        let f2 = assemble_f2(&inp).unwrap();
        assert_eq!(f2.full.norm_l2(), 0.0);
        let f3 = assemble_f3(&inp).unwrap();
        assert_eq!(f3.full.norm_l2(), 0.0);
        let f4 = assemble_f4(&inp, false).unwrap();
        assert_eq!(f4.full.norm_l2(), 0.0);
    }

    #[test]
    fn full_equals_singular_plus_regular_entrywise() {
        let f = fixture(12, 11);
        let inp = inputs(&f);
        for asm in [
            assemble_f2(&inp).unwrap(),
            assemble_f3(&inp).unwrap(),
            assemble_f4(&inp, false).unwrap(),
        ] {
            let s = asm.singular.as_ref().unwrap();
            let r = asm.regular.as_ref().unwrap();
            for ((a, b), c) in asm
                .full
                .data
                .iter()
                .zip(s.data.iter())
                .zip(r.data.iter())
            {
                assert!((a - (b + c)).norm() < 1e-15 + 1e-12 * a.norm());
            }
        }
    }

    #[test]
    fn singular_homogeneity_in_u() {
        let f = fixture(12, 13);
        let lam = Complex64::new(1.7, 0.0);
        let u_scaled = f.u.scaled(lam);
        let zero_p = Kernel::zeros(f.grid).unwrap();
        let base = SectorInputs {
            u: &f.u,
            p: &zero_p,
            phi: &f.phi,
            interaction: &f.interaction,
        };
        let scaled = SectorInputs {
            u: &u_scaled,
            p: &zero_p,
            phi: &f.phi,
            interaction: &f.interaction,
        };
        // F3s scales linearly, F4s quadratically
        let s3 = singular_part(3, &base).unwrap();
        let s3l = singular_part(3, &scaled).unwrap();
        let d3 = s3l.sub(&s3.scaled(lam)).unwrap().norm_l2();
        assert!(d3 < 1e-12 * s3l.norm_l2().max(1.0));
        let s4 = singular_part(4, &base).unwrap();
        let s4l = singular_part(4, &scaled).unwrap();
        let d4 = s4l.sub(&s4.scaled(lam * lam)).unwrap().norm_l2();
        assert!(d4 < 1e-12 * s4l.norm_l2().max(1.0));
    }

    #[test]
    fn symmetrized_sector_is_permutation_invariant() {
        let f = fixture(8, 17);
        let inp = inputs(&f);
        let f3 = assemble_f3(&inp).unwrap();
        let sym = f3.full.symmetrize();
        assert!(sym.symmetry_defect() < 1e-12, "{}", sym.symmetry_defect());
        let f4 = assemble_f4(&inp, false).unwrap();
        let sym4 = f4.full.symmetrize();
        assert!(sym4.symmetry_defect() < 1e-12);
    }

    #[test]
    fn f4_fast_norms_match_materialized() {
        let f = fixture(12, 19);
        let inp = inputs(&f);
        let asm = assemble_f4(&inp, false).unwrap();
        let (s_fast, r_fast) = f4_norms_fast(&inp).unwrap();
        let s_mat = asm.singular.as_ref().unwrap().norm_l2();
        let r_mat = asm.regular.as_ref().unwrap().norm_l2();
        assert!(
            (s_fast - s_mat).abs() < 1e-9 * s_mat.max(1e-12),
            "singular {s_fast} vs {s_mat}"
        );
        assert!(
            (r_fast - r_mat).abs() < 1e-9 * r_mat.max(1e-12),
            "regular {r_fast} vs {r_mat}"
        );
    }

    #[test]
    fn f2_singular_rank_one_loop() {
        // with p = 0 the F2 singular part is -(1/2N) v(y1-y2) u(y1,y2)
        let f = fixture(12, 23);
        let zero_p = Kernel::zeros(f.grid).unwrap();
        let inp = SectorInputs {
            u: &f.u,
            p: &zero_p,
            phi: &f.phi,
            interaction: &f.interaction,
        };
        let s = singular_part(2, &inp).unwrap();
        let n = f.grid.n();
        let npart = f.interaction.n_particles();
        let vdat: Vec<f64> = f
            .interaction
            .v_n()
            .data()
            .iter()
            .map(|z| z.re)
            .collect();
        for i in 0..n {
            for j in 0..n {
                let expect = -1.0 / (2.0 * npart)
                    * vdat[(i + n - j) % n]
                    * f.u.data()[[i, j]];
                let got = s.data[IxDyn(&[i, j])];
                assert!((got - expect).norm() < 1e-13 * (1.0 + expect.norm()));
            }
        }
    }

    #[test]
    fn memory_guard_blocks_oversized_f4() {
        let f = fixture(64, 29);
        let inp = inputs(&f);
        let r = f4_summand("F4a", &inp, false);
        assert!(matches!(r, Err(Error::MemoryGuard { l: 4, .. })));
    }

    #[test]
    fn lemma42_detects_decreasing_ratio() {
        let rows: Vec<SectorNormRow> = [8.0, 16.0, 32.0, 64.0]
            .iter()
            .enumerate()
            .map(|(i, &n)| SectorNormRow {
                n_particles: n,
                t: 0.5,
                l: 2,
                full: 1.0,
                singular: n.powf(0.2),
                regular: n.powf(-0.1) * (1.0 + 0.01 * i as f64),
            })
            .collect();
        let report = lemma42_table(&rows, 0.4).unwrap();
        assert_eq!(report.len(), 1);
        assert!(report[0].ratio_decreasing);
        let sf = report[0].singular_fit.as_ref().unwrap();
        assert!((sf.slope - 0.2).abs() < 1e-9);
    }
}
