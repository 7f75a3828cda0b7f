//! Bilinear (Q1) finite elements on a uniform grid of the unit square with
//! homogeneous Dirichlet conditions, and the benchmark FOMs built on them.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fom::Fom;
use crate::linalg::{to_complex, BandMatrix, CMat, RMat};
use crate::operator::PsfOperator;
use crate::scalar::ScalarFn;

/// Uniform grid with `m` interior nodes per axis, so `n = m^2` unknowns and
/// spacing `h = 1 / (m + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid2D {
    m: usize,
}

const GAUSS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Corner offsets of the local basis functions in the order
/// `(0,0), (1,0), (0,1), (1,1)`.
const CORNERS: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];

fn shape(k: usize, s: f64, t: f64) -> f64 {
    let (a, b) = CORNERS[k];
    let fs = if a == 1 { s } else { 1.0 - s };
    let ft = if b == 1 { t } else { 1.0 - t };
    fs * ft
}

fn shape_grad(k: usize, s: f64, t: f64) -> (f64, f64) {
    let (a, b) = CORNERS[k];
    let (fs, dfs) = if a == 1 { (s, 1.0) } else { (1.0 - s, -1.0) };
    let (ft, dft) = if b == 1 { (t, 1.0) } else { (1.0 - t, -1.0) };
    (dfs * ft, fs * dft)
}

impl Grid2D {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Input(format!("grid needs at least 2 interior nodes per axis, got {m}")));
        }
        Ok(Grid2D { m })
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn h(&self) -> f64 {
        1.0 / (self.m + 1) as f64
    }
    pub fn dim(&self) -> usize {
        self.m * self.m
    }

    /// Unknown index of grid node `(i, j)`, `None` on the boundary.
    pub fn index(&self, i: usize, j: usize) -> Option<usize> {
        (1..=self.m).contains(&i).then_some(())?;
        (1..=self.m).contains(&j).then_some(())?;
        Some((j - 1) * self.m + (i - 1))
    }

    /// Element `(a, b)` covers `[a h, (a+1) h] x [b h, (b+1) h]`.
    fn elements(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..=self.m).flat_map(|b| (0..=self.m).map(move |a| (a, b)))
    }

    fn element_dofs(&self, a: usize, b: usize) -> [Option<usize>; 4] {
        CORNERS.map(|(da, db)| self.index(a + da, b + db))
    }

    /// Stiffness matrix of `int d grad u . grad v` with `d` given at physical
    /// points, 2x2 Gauss quadrature per element. `d` may be zero off a
    /// subdomain.
    pub fn stiffness(&self, d: impl Fn(f64, f64) -> f64) -> RMat {
        let mut k = RMat::zeros(self.dim(), self.dim());
        self.assemble_stiffness(d, |i, j, v| k[(i, j)] += v);
        k
    }

    /// [`Grid2D::stiffness`] in band storage (bandwidth `m + 1`).
    pub fn stiffness_band(&self, d: impl Fn(f64, f64) -> f64) -> BandMatrix {
        let mut k = BandMatrix::zeros(self.dim(), self.m + 1, self.m + 1);
        self.assemble_stiffness(d, |i, j, v| k.add_at(i, j, Complex64::new(v, 0.0)));
        k
    }

    fn assemble_stiffness(&self, d: impl Fn(f64, f64) -> f64, mut add: impl FnMut(usize, usize, f64)) {
        let h = self.h();
        for (a, b) in self.elements() {
            let dofs = self.element_dofs(a, b);
            let mut local = [[0.0; 4]; 4];
            for &s in &GAUSS {
                for &t in &GAUSS {
                    let dv = 0.25 * d((a as f64 + s) * h, (b as f64 + t) * h);
                    if dv == 0.0 {
                        continue;
                    }
                    let g: [(f64, f64); 4] = std::array::from_fn(|q| shape_grad(q, s, t));
                    for (i, gi) in g.iter().enumerate() {
                        for (j, gj) in g.iter().enumerate() {
                            local[i][j] += dv * (gi.0 * gj.0 + gi.1 * gj.1);
                        }
                    }
                }
            }
            for (i, di) in dofs.iter().enumerate() {
                let Some(di) = di else { continue };
                for (j, dj) in dofs.iter().enumerate() {
                    let Some(dj) = dj else { continue };
                    add(*di, *dj, local[i][j]);
                }
            }
        }
    }

    /// Convection matrices `int (d u / d xi_1) v` and `int (d u / d xi_2) v`
    /// (row = test function `v`).
    pub fn convection(&self) -> (RMat, RMat) {
        let n = self.dim();
        let h = self.h();
        let (mut cx, mut cy) = (RMat::zeros(n, n), RMat::zeros(n, n));
        let mut lx = [[0.0; 4]; 4];
        let mut ly = [[0.0; 4]; 4];
        for &s in &GAUSS {
            for &t in &GAUSS {
                for i in 0..4 {
                    let phi = shape(i, s, t);
                    for j in 0..4 {
                        let (gs, gt) = shape_grad(j, s, t);
                        lx[i][j] += 0.25 * h * gs * phi;
                        ly[i][j] += 0.25 * h * gt * phi;
                    }
                }
            }
        }
        for (a, b) in self.elements() {
            let dofs = self.element_dofs(a, b);
            scatter(&mut cx, &dofs, &lx);
            scatter(&mut cy, &dofs, &ly);
        }
        (cx, cy)
    }

    /// Column vector of `int phi_i` over the elements accepted by `keep`
    /// (called with the element centre).
    pub fn load(&self, keep: impl Fn(f64, f64) -> bool) -> RMat {
        let h = self.h();
        let mut f = RMat::zeros(self.dim(), 1);
        for (a, b) in self.elements() {
            if !keep((a as f64 + 0.5) * h, (b as f64 + 0.5) * h) {
                continue;
            }
            for i in self.element_dofs(a, b).into_iter().flatten() {
                f[(i, 0)] += 0.25 * h * h;
            }
        }
        f
    }
}

fn scatter(k: &mut RMat, dofs: &[Option<usize>; 4], local: &[[f64; 4]; 4]) {
    for (i, di) in dofs.iter().enumerate() {
        let Some(di) = di else { continue };
        for (j, dj) in dofs.iter().enumerate() {
            let Some(dj) = dj else { continue };
            k[(*di, *dj)] += local[i][j];
        }
    }
}

/// Quadrants in the order `(0,1/2)^2`, `(1/2,1)x(0,1/2)`, `(1/2,1)^2`,
/// `(0,1/2)x(1/2,1)`.
pub fn quadrant(x: f64, y: f64) -> usize {
    match (x > 0.5, y > 0.5) {
        (false, false) => 0,
        (true, false) => 1,
        (true, true) => 2,
        (false, true) => 3,
    }
}

fn constant_op(m: RMat) -> Result<PsfOperator> {
    PsfOperator::single(ScalarFn::ONE, to_complex(&m), 1)
}

fn with_dim(op: PsfOperator, param_dim: usize) -> Result<PsfOperator> {
    let terms = op.terms().map(|(f, m)| (*f, m.clone())).collect();
    PsfOperator::new(terms, param_dim)
}

/// Diffusion `d = xi_1 + p (1 - xi_1)`, unit source, `C = B^T`, so
/// `A(p) = A_1 + p A_2`.
pub fn build_poisson_fom(grid: &Grid2D) -> Result<Fom> {
    let a1 = grid.stiffness(|x, _| x);
    let a2 = grid.stiffness(|x, _| 1.0 - x);
    let b = grid.load(|_, _| true);
    Fom::separable(
        PsfOperator::new(vec![(ScalarFn::ONE, to_complex(&a1)), (ScalarFn::coord(0), to_complex(&a2))], 1)?,
        constant_op(b.clone())?,
        constant_op(b.transpose())?,
    )
}

/// Diffusion coefficient of the non-separable example.
pub fn nonsep_diffusion(x: f64, y: f64, p: f64) -> f64 {
    1.0 - 0.9 * (-5.0 * ((x - p).powi(2) + (y - p).powi(2))).exp()
}

/// Diffusion `1 - 0.9 exp(-5 ((xi_1 - p)^2 + (xi_2 - p)^2))`, assembled per
/// parameter.
pub fn build_nonsep_fom(grid: &Grid2D) -> Result<Fom> {
    let b = to_complex(&grid.load(|_, _| true));
    let g = *grid;
    let assemble = Arc::new(move |p: &[Complex64]| g.stiffness_band(|x, y| nonsep_diffusion(x, y, p[0].re)));
    Fom::assembled(grid.dim(), 1, assemble, b.clone(), b.transpose(), &[Complex64::new(0.5, 0.0)])
}

/// Default diffusivity of the convection example.
pub const CONVECTION_DIFFUSION: f64 = 1.0 / 32.0;

/// Convection `(cos p, sin p)` with diffusion `d`, unit source and the four
/// quadrant averages as outputs: `A(p) = d K + cos(p) A_x + sin(p) A_y`.
pub fn build_convection_fom(grid: &Grid2D, d: f64) -> Result<Fom> {
    if !(d > 0.0) {
        return Err(Error::Input(format!("diffusivity must be positive, got {d}")));
    }
    let k = grid.stiffness(|_, _| d);
    let (cx, cy) = grid.convection();
    let b = grid.load(|_, _| true);
    let mut c = RMat::zeros(4, grid.dim());
    for q in 0..4 {
        let row = grid.load(|x, y| quadrant(x, y) == q);
        c.row_mut(q).copy_from(&row.transpose());
    }
    Fom::separable(
        PsfOperator::new(
            vec![(ScalarFn::ONE, to_complex(&k)), (ScalarFn::Cos(0), to_complex(&cx)), (ScalarFn::Sin(0), to_complex(&cy))],
            1,
        )?,
        constant_op(b)?,
        constant_op(c)?,
    )
}

/// 2x2 thermal block: diffusivity `p_k` on quadrant `k`,
/// `A(p) = A_0 + sum_k p_k A_k` with `A_0 = 0` (the quadrant blocks partition
/// the plain stiffness exactly because quadrant edges fall on element edges
/// when `m + 1` is even).
pub fn build_thermal_block_fom(grid: &Grid2D) -> Result<Fom> {
    if (grid.m() + 1) % 2 != 0 {
        return Err(Error::Input("thermal block needs m + 1 even so quadrants align with elements".into()));
    }
    let n = grid.dim();
    let mut terms = vec![(ScalarFn::ONE, CMat::zeros(n, n))];
    for q in 0..4 {
        let aq = grid.stiffness(|x, y| if quadrant(x, y) == q { 1.0 } else { 0.0 });
        terms.push((ScalarFn::coord(q), to_complex(&aq)));
    }
    let b = grid.load(|_, _| true);
    Fom::separable(
        PsfOperator::new(terms, 4)?,
        with_dim(constant_op(b.clone())?, 4)?,
        with_dim(constant_op(b.transpose())?, 4)?,
    )
}

/// Parameter interval of the Poisson and thermal-block examples.
pub const DIFFUSION_RANGE: (f64, f64) = (0.1, 10.0);
/// Parameter interval of the convection example.
pub const ANGLE_RANGE: (f64, f64) = (0.0, 2.0 * PI);

/// `n` equispaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Tensor grid `linspace(a, b, k)^dim` as complex parameter vectors, first
/// component fastest.
pub fn tensor_grid(a: f64, b: f64, k: usize, dim: usize) -> Vec<Vec<Complex64>> {
    let axis = linspace(a, b, k);
    let total = k.pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            (0..dim)
                .map(|_| {
                    let v = axis[idx % k];
                    idx /= k;
                    Complex64::new(v, 0.0)
                })
                .collect()
        })
        .collect()
}
