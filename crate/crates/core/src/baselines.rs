//! Intrusive baselines: Galerkin projection, strong greedy and POD.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fom::Fom;
use crate::linalg::{factor_checked, mgs_extend, CMat};
use crate::model::Ddrom;
use crate::operator::PsfOperator;
use crate::oracle::OutputOracle;

/// Relative threshold below which a snapshot counts as already spanned.
pub const DEPENDENCE_TOL: f64 = 1e-10;

/// `A_i -> W^T A_i V`, `B_j -> W^T B_j`, `C_k -> C_k V` for a separable FOM.
pub fn galerkin_project(fom: &Fom, v: &CMat, w: &CMat) -> Result<Ddrom> {
    let Fom::Separable { a, b, c, .. } = fom else {
        return Err(Error::Input("coefficient projection needs a separable FOM".into()));
    };
    check_basis(fom.dim(), v, w)?;
    let wt = w.transpose();
    Ddrom::new(
        a.map_coeffs(|m| &wt * m * v)?,
        b.map_coeffs(|m| &wt * m)?,
        c.map_coeffs(|m| m * v)?,
    )
}

fn check_basis(n: usize, v: &CMat, w: &CMat) -> Result<()> {
    if v.nrows() != n || w.nrows() != n || v.ncols() != w.ncols() || v.ncols() == 0 {
        return Err(Error::Dimension(format!(
            "bases are {:?} and {:?} for a FOM of dimension {n}",
            v.shape(),
            w.shape()
        )));
    }
    Ok(())
}

/// A projected model: precomputed coefficients for separable FOMs, or
/// `W^T A(p) V` assembled per query otherwise.
#[derive(Debug, Clone)]
pub enum GalerkinRom {
    Separable(Ddrom),
    PerQuery { fom: Arc<Fom>, v: CMat, w: CMat },
}

impl GalerkinRom {
    pub fn new(fom: Arc<Fom>, v: CMat, w: CMat) -> Result<Self> {
        if fom.is_separable() {
            Ok(GalerkinRom::Separable(galerkin_project(&fom, &v, &w)?))
        } else {
            check_basis(fom.dim(), &v, &w)?;
            Ok(GalerkinRom::PerQuery { fom, v, w })
        }
    }

    pub fn order(&self) -> usize {
        match self {
            GalerkinRom::Separable(m) => m.order(),
            GalerkinRom::PerQuery { v, .. } => v.ncols(),
        }
    }

    pub fn ddrom(&self) -> Option<&Ddrom> {
        match self {
            GalerkinRom::Separable(m) => Some(m),
            GalerkinRom::PerQuery { .. } => None,
        }
    }

    pub fn output(&self, p: &[Complex64]) -> Result<CMat> {
        match self {
            GalerkinRom::Separable(m) => m.output(p),
            GalerkinRom::PerQuery { fom, v, w } => {
                let wt = w.transpose();
                let a = &wt * fom.apply_a(p, v)?;
                let lu = factor_checked(&a, p)?;
                let x = lu.solve(&(&wt * fom.b_matrix(p)?));
                Ok(fom.c_matrix(p)? * v * x)
            }
        }
    }
}

impl OutputOracle for GalerkinRom {
    fn shape(&self) -> (usize, usize) {
        match self {
            GalerkinRom::Separable(m) => (m.n_outputs(), m.n_inputs()),
            GalerkinRom::PerQuery { fom, .. } => (fom.n_outputs(), fom.n_inputs()),
        }
    }
    fn param_dim(&self) -> usize {
        match self {
            GalerkinRom::Separable(m) => m.param_dim(),
            GalerkinRom::PerQuery { fom, .. } => fom.param_dim(),
        }
    }
    fn eval(&self, p: &[Complex64]) -> Result<CMat> {
        self.output(p)
    }
}

/// FOM states at every training parameter, computed in parallel.
pub fn snapshots(fom: &Fom, train: &[Vec<Complex64>]) -> Result<Vec<CMat>> {
    train.par_iter().map(|p| fom.solve_state(p)).collect()
}

fn columns(m: &CMat) -> impl Iterator<Item = DVector<Complex64>> + '_ {
    m.column_iter().map(|c| c.into_owned())
}

fn basis_matrix(n: usize, basis: &[DVector<Complex64>]) -> CMat {
    if basis.is_empty() {
        CMat::zeros(n, 0)
    } else {
        CMat::from_columns(basis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreedyStatus {
    /// Largest training error fell to the tolerance.
    Tolerance,
    /// Reached the requested order.
    MaxOrder,
    /// The selected snapshot was already in the span of the basis.
    Dependent,
}

#[derive(Debug, Clone)]
pub struct GreedyResult {
    pub rom: GalerkinRom,
    pub basis: CMat,
    pub selected: Vec<Vec<Complex64>>,
    /// Largest training error before each enrichment, then after the last.
    pub max_errors: Vec<f64>,
    pub status: GreedyStatus,
}

/// Strong greedy basis selection with the true output error over `train`.
/// The first selection uses the empty model `y_r = 0`.
pub fn strong_greedy(fom: Arc<Fom>, train: &[Vec<Complex64>], r_max: usize, tol: f64) -> Result<GreedyResult> {
    if train.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    if r_max < 1 || !tol.is_finite() || tol < 0.0 {
        return Err(Error::Input(format!("greedy needs r_max >= 1 and a finite tolerance, got {r_max} and {tol}")));
    }
    let n = fom.dim();
    let states = snapshots(&fom, train)?;
    let outputs: Vec<CMat> = states
        .par_iter()
        .zip(train)
        .map(|(x, p)| Ok(fom.c_matrix(p)? * x))
        .collect::<Result<_>>()?;
    let mut basis: Vec<DVector<Complex64>> = Vec::new();
    let mut rom: Option<GalerkinRom> = None;
    let mut selected = Vec::new();
    let mut max_errors = Vec::new();
    let status = loop {
        let errors: Vec<f64> = match &rom {
            None => outputs.iter().map(|y| y.norm()).collect(),
            Some(r) => train
                .par_iter()
                .zip(&outputs)
                .map(|(p, y)| Ok((y - r.output(p)?).norm()))
                .collect::<Result<_>>()?,
        };
        let (imax, emax) = errors
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, be), (i, &e)| if e > be { (i, e) } else { (bi, be) });
        max_errors.push(emax);
        if emax <= tol {
            break GreedyStatus::Tolerance;
        }
        if basis.len() >= r_max {
            break GreedyStatus::MaxOrder;
        }
        let before = basis.len();
        for col in columns(&states[imax]) {
            if basis.len() >= r_max {
                break;
            }
            if let Some(q) = mgs_extend(&basis, &col, DEPENDENCE_TOL) {
                basis.push(q);
            }
        }
        if basis.len() == before {
            break GreedyStatus::Dependent;
        }
        selected.push(train[imax].clone());
        let v = basis_matrix(n, &basis);
        rom = Some(GalerkinRom::new(fom.clone(), v.clone(), v)?);
    };
    let Some(rom) = rom else {
        return Err(Error::Input("greedy stopped with an empty basis; the tolerance is too loose".into()));
    };
    Ok(GreedyResult {
        rom,
        basis: basis_matrix(n, &basis),
        selected,
        max_errors,
        status,
    })
}

#[derive(Debug, Clone)]
pub struct PodResult {
    pub rom: GalerkinRom,
    pub basis: CMat,
    pub singular_values: Vec<f64>,
}

/// POD basis from the leading left singular vectors of the snapshot matrix
/// `[x(p_1) x(p_2) ...]` (all input columns of each parameter).
pub fn pod(fom: Arc<Fom>, train: &[Vec<Complex64>], r: usize) -> Result<PodResult> {
    if train.is_empty() || r == 0 {
        return Err(Error::Input("POD needs a training set and r >= 1".into()));
    }
    let states = snapshots(&fom, train)?;
    let cols: Vec<DVector<Complex64>> = states.iter().flat_map(columns).collect();
    let x = CMat::from_columns(&cols);
    let (v, sv) = leading_left_singular(&x, r)?;
    Ok(PodResult {
        rom: GalerkinRom::new(fom, v.clone(), v.clone())?,
        basis: v,
        singular_values: sv,
    })
}

/// Leading `r` left singular vectors. Real input gives real vectors.
fn leading_left_singular(x: &CMat, r: usize) -> Result<(CMat, Vec<f64>)> {
    let real = x.iter().all(|z| z.im == 0.0);
    let (u, sv): (CMat, Vec<f64>) = if real {
        let svd = x.map(|z| z.re).svd(true, false);
        let u = svd.u.ok_or_else(|| Error::Rank("SVD failed".into()))?;
        sorted_columns(u.map(|v| Complex64::new(v, 0.0)), svd.singular_values.as_slice())
    } else {
        let svd = x.clone().svd(true, false);
        let u = svd.u.ok_or_else(|| Error::Rank("SVD failed".into()))?;
        sorted_columns(u, svd.singular_values.as_slice())
    };
    let achievable = sv.iter().filter(|&&s| s > 1e-12 * sv[0]).count();
    if r > achievable {
        return Err(Error::Rank(format!("requested order {r} exceeds the numerical snapshot rank {achievable}")));
    }
    Ok((u.columns(0, r).into_owned(), sv))
}

fn sorted_columns(u: CMat, sv: &[f64]) -> (CMat, Vec<f64>) {
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let cols: Vec<DVector<Complex64>> = order.iter().map(|&i| u.column(i).into_owned()).collect();
    (CMat::from_columns(&cols), order.iter().map(|&i| sv[i]).collect())
}

/// Reprojects an operator family with explicit bases; exposed for callers
/// that build their own bases.
pub fn project_operator(op: &PsfOperator, left: Option<&CMat>, right: Option<&CMat>) -> Result<PsfOperator> {
    op.map_coeffs(|m| match (left, right) {
        (Some(w), Some(v)) => w.transpose() * m * v,
        (Some(w), None) => w.transpose() * m,
        (None, Some(v)) => m * v,
        (None, None) => m.clone(),
    })
}
