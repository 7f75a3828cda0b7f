//! Deciding whether a model is a Petrov-Galerkin projection of a FOM with the
//! same scalar families, and constructing the bases when it is.
//!
//! With `C = [C_1; ...; C_q]` stacked by rows and `B = [B_1 ... B_q]` by
//! columns, every solution of `C V = C_r` is `V = V_1 + V_2 X` with `V_1` the
//! minimum-norm solution and `V_2` a basis of the null space of `C`; likewise
//! `W = W_1 + U_2 Y` for `B^T W = B_r^T`. For a fixed `Y` the `A` equations
//! `W^T A_i V = A_r,i` are linear in `X`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fom::Fom;
use crate::linalg::{complement_basis, numerical_rank, real_part, CMat, RMat};
use crate::model::Ddrom;

/// Relative singular-value threshold for every rank decision.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryStatus {
    Recovered,
    RankDeficientInput,
    NoSolution,
}

impl RecoveryStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RecoveryStatus::Recovered => "recovered",
            RecoveryStatus::RankDeficientInput => "rank-deficient-input",
            RecoveryStatus::NoSolution => "no-solution",
        }
    }
}

/// Frobenius residuals of `A_r,i = W^T A_i V`, `B_r,j = W^T B_j`,
/// `C_r,k = C_k V`, absolute and relative to the model coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResiduals {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub a_rel: Vec<f64>,
    pub b_rel: Vec<f64>,
    pub c_rel: Vec<f64>,
}

impl ProjectionResiduals {
    pub fn max_abs(&self) -> f64 {
        self.a.iter().chain(&self.b).chain(&self.c).fold(0.0, |m, &x| m.max(x))
    }
    pub fn max_rel(&self) -> f64 {
        self.a_rel.iter().chain(&self.b_rel).chain(&self.c_rel).fold(0.0, |m, &x| m.max(x))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecoveryDiagnostics {
    /// Shape and numerical rank of the stacked output block.
    pub c_shape: (usize, usize),
    pub c_rank: usize,
    pub b_shape: (usize, usize),
    pub b_rank: usize,
    /// Shape and rank of the stacked system in `X` for the accepted (or best) `Y`.
    pub system_shape: (usize, usize),
    pub system_rank: usize,
    /// Number of `Y` choices tried, `Y = 0` included.
    pub attempts: usize,
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub status: RecoveryStatus,
    /// Recovered bases, or the best attempt when no solution was found.
    pub v: Option<RMat>,
    pub w: Option<RMat>,
    pub residuals: Option<ProjectionResiduals>,
    pub diagnostics: RecoveryDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOptions {
    /// Acceptance threshold on the relative residuals
    /// `||R|| / max(1, ||model coefficient||)`.
    pub tol: f64,
    /// Random `Y` draws tried after `Y = 0`.
    pub draws: usize,
    pub seed: u64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions { tol: 1e-8, draws: 8, seed: 0 }
    }
}

fn real_coeffs(mats: &[CMat], what: &str) -> Result<Vec<RMat>> {
    if mats.iter().any(|m| m.iter().any(|z| z.im != 0.0)) {
        return Err(Error::Input(format!("{what} has complex coefficients; recovery works on real matrices")));
    }
    Ok(mats.iter().map(real_part).collect())
}

/// Residuals of the projection equations for given bases.
pub fn verify_projection(fom: &Fom, m: &Ddrom, v: &RMat, w: &RMat) -> Result<ProjectionResiduals> {
    let Fom::Separable { a, b, c, .. } = fom else {
        return Err(Error::Input("projection residuals need a separable FOM".into()));
    };
    let n = fom.dim();
    if v.shape() != (n, m.order()) || w.shape() != (n, m.order()) {
        return Err(Error::Dimension(format!("bases are {:?}, {:?}; expected {n}x{}", v.shape(), w.shape(), m.order())));
    }
    if a.num_terms() != m.a_op().num_terms() || b.num_terms() != m.b_op().num_terms() || c.num_terms() != m.c_op().num_terms() {
        return Err(Error::Input("FOM and model have different term counts".into()));
    }
    let (fa, fb, fc) = (real_coeffs(a.coeffs(), "FOM")?, real_coeffs(b.coeffs(), "FOM")?, real_coeffs(c.coeffs(), "FOM")?);
    let (ra, rb, rc) = (
        real_coeffs(m.a_op().coeffs(), "model")?,
        real_coeffs(m.b_op().coeffs(), "model")?,
        real_coeffs(m.c_op().coeffs(), "model")?,
    );
    let wt = w.transpose();
    let pair = |d: RMat, reference: &RMat| {
        let abs = d.norm();
        (abs, abs / reference.norm().max(f64::MIN_POSITIVE))
    };
    let (a, a_rel): (Vec<f64>, Vec<f64>) = fa.iter().zip(&ra).map(|(f, r)| pair(r - &wt * f * v, r)).unzip();
    let (b, b_rel): (Vec<f64>, Vec<f64>) = fb.iter().zip(&rb).map(|(f, r)| pair(r - &wt * f, r)).unzip();
    let (c, c_rel): (Vec<f64>, Vec<f64>) = fc.iter().zip(&rc).map(|(f, r)| pair(r - f * v, r)).unzip();
    Ok(ProjectionResiduals { a, b, c, a_rel, b_rel, c_rel })
}

/// Minimum-norm least-squares solution of `a x = b` via the SVD, dropping
/// singular values below `RANK_TOL * sigma_max`.
fn lstsq(a: &RMat, b: &RMat) -> (RMat, usize) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = numerical_rank(svd.singular_values.as_slice(), RANK_TOL);
    let x = svd.solve(b, RANK_TOL * smax).expect("both factors were requested");
    (x, rank)
}

fn singular_rank(m: &RMat) -> usize {
    numerical_rank(m.singular_values().as_slice(), RANK_TOL)
}

fn vstack(blocks: &[RMat]) -> RMat {
    let cols = blocks[0].ncols();
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = RMat::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        out.view_mut((r0, 0), b.shape()).copy_from(b);
        r0 += b.nrows();
    }
    out
}

fn hstack(blocks: &[RMat]) -> RMat {
    vstack(&blocks.iter().map(|b| b.transpose()).collect::<Vec<_>>()).transpose()
}

fn acceptable(res: &ProjectionResiduals, m: &Ddrom, tol: f64) -> bool {
    let scaled = |abs: &[f64], mats: &[CMat]| abs.iter().zip(mats).all(|(r, c)| *r <= tol * c.norm().max(1.0));
    scaled(&res.a, m.a_op().coeffs()) && scaled(&res.b, m.b_op().coeffs()) && scaled(&res.c, m.c_op().coeffs())
}

/// Tries to find `V`, `W` with `A_r,i = W^T A_i V`, `B_r,j = W^T B_j` and
/// `C_r,k = C_k V`.
pub fn recover_projection(fom: &Fom, m: &Ddrom, opts: &RecoveryOptions) -> Result<RecoveryResult> {
    let Fom::Separable { a, b, c, .. } = fom else {
        return Err(Error::Input("projection recovery needs a separable FOM".into()));
    };
    if a.fns() != m.a_op().fns() || b.fns() != m.b_op().fns() || c.fns() != m.c_op().fns() {
        return Err(Error::Input("FOM and model scalar families differ term-for-term".into()));
    }
    let n = fom.dim();
    let r = m.order();
    let (fa, fb, fc) = (real_coeffs(a.coeffs(), "FOM")?, real_coeffs(b.coeffs(), "FOM")?, real_coeffs(c.coeffs(), "FOM")?);
    let (ra, rb, rc) = (
        real_coeffs(m.a_op().coeffs(), "model")?,
        real_coeffs(m.b_op().coeffs(), "model")?,
        real_coeffs(m.c_op().coeffs(), "model")?,
    );

    let cc = vstack(&fc);
    let cc_r = vstack(&rc);
    let bb = hstack(&fb);
    let bb_r = hstack(&rb);
    let mut diag = RecoveryDiagnostics {
        c_shape: cc.shape(),
        c_rank: singular_rank(&cc),
        b_shape: bb.shape(),
        b_rank: singular_rank(&bb),
        ..Default::default()
    };
    let deficient = RecoveryResult {
        status: RecoveryStatus::RankDeficientInput,
        v: None,
        w: None,
        residuals: None,
        diagnostics: diag.clone(),
    };
    if cc.nrows() > n || bb.ncols() > n || diag.c_rank < cc.nrows() || diag.b_rank < bb.ncols() {
        return Ok(deficient);
    }

    let (v1, _) = lstsq(&cc, &cc_r);
    let v2 = complement_basis(&cc.transpose());
    let (w1, _) = lstsq(&bb.transpose(), &bb_r.transpose());
    let u2 = complement_basis(&bb);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(f64, RMat, RMat, ProjectionResiduals, (usize, usize), usize)> = None;
    for attempt in 0..=opts.draws {
        let w = if attempt == 0 || u2.ncols() == 0 {
            w1.clone()
        } else {
            let y = RMat::from_fn(u2.ncols(), r, |_, _| StandardNormal.sample(&mut rng));
            &w1 + &u2 * y
        };
        let wt = w.transpose();
        let v = if v2.ncols() == 0 {
            v1.clone()
        } else {
            let sys = vstack(&fa.iter().map(|ai| &wt * ai * &v2).collect::<Vec<_>>());
            let rhs = vstack(&fa.iter().zip(&ra).map(|(ai, ari)| ari - &wt * ai * &v1).collect::<Vec<_>>());
            let (x, rank) = lstsq(&sys, &rhs);
            diag.system_shape = sys.shape();
            diag.system_rank = rank;
            &v1 + &v2 * x
        };
        diag.attempts = attempt + 1;
        let res = verify_projection(fom, m, &v, &w)?;
        let ok = acceptable(&res, m, opts.tol);
        let score = res.max_rel();
        if ok {
            return Ok(RecoveryResult {
                status: RecoveryStatus::Recovered,
                v: Some(v),
                w: Some(w),
                residuals: Some(res),
                diagnostics: diag,
            });
        }
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, v, w, res, diag.system_shape, diag.system_rank));
        }
        if u2.ncols() == 0 {
            break;
        }
    }
    let (_, v, w, res, shape, rank) = best.expect("at least one attempt ran");
    diag.system_shape = shape;
    diag.system_rank = rank;
    Ok(RecoveryResult {
        status: RecoveryStatus::NoSolution,
        v: Some(v),
        w: Some(w),
        residuals: Some(res),
        diagnostics: diag,
    })
}
