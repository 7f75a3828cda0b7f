use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{is_real, CMat};
use crate::scalar::ScalarFn;

/// A matrix-valued map `p -> sum_t f_t(p) M_t` with scalar functions `f_t`
/// and constant coefficient matrices `M_t` of a common shape.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfOperator {
    fns: Vec<ScalarFn>,
    coeffs: Vec<CMat>,
    rows: usize,
    cols: usize,
    param_dim: usize,
    real: bool,
}

impl PsfOperator {
    /// Builds an operator from `(function, coefficient)` terms. The operator
    /// is flagged real iff every coefficient has zero imaginary part.
    pub fn new(terms: Vec<(ScalarFn, CMat)>, param_dim: usize) -> Result<Self> {
        let real = terms.iter().all(|(_, m)| is_real(m));
        Self::with_flag(terms, param_dim, real)
    }

    /// Like [`PsfOperator::new`] but with an explicit real flag; a real flag
    /// on complex coefficients is rejected.
    pub fn with_flag(terms: Vec<(ScalarFn, CMat)>, param_dim: usize, real: bool) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(Error::Input("operator needs at least one term".into()));
        };
        if param_dim == 0 {
            return Err(Error::Input("parameter dimension must be positive".into()));
        }
        let (rows, cols) = first.shape();
        for (f, m) in &terms {
            if m.shape() != (rows, cols) {
                return Err(Error::Dimension(format!(
                    "term shapes differ: {:?} vs {:?}",
                    m.shape(),
                    (rows, cols)
                )));
            }
            if f.max_component().is_some_and(|c| c >= param_dim) {
                return Err(Error::Input(format!("{f} reads beyond parameter dimension {param_dim}")));
            }
            if real && !is_real(m) {
                return Err(Error::Input("real-flagged operator has complex coefficients".into()));
            }
        }
        let (fns, coeffs) = terms.into_iter().unzip();
        Ok(PsfOperator {
            fns,
            coeffs,
            rows,
            cols,
            param_dim,
            real,
        })
    }

    pub fn single(f: ScalarFn, m: CMat, param_dim: usize) -> Result<Self> {
        Self::new(vec![(f, m)], param_dim)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
    pub fn param_dim(&self) -> usize {
        self.param_dim
    }
    pub fn is_real(&self) -> bool {
        self.real
    }
    pub fn num_terms(&self) -> usize {
        self.fns.len()
    }
    pub fn fns(&self) -> &[ScalarFn] {
        &self.fns
    }
    pub fn coeffs(&self) -> &[CMat] {
        &self.coeffs
    }
    pub fn coeff(&self, t: usize) -> &CMat {
        &self.coeffs[t]
    }

    /// Mutable access to the coefficients. Writing complex values into a
    /// real-flagged operator is a logic error caught by debug assertions in
    /// the model code.
    pub fn coeffs_mut(&mut self) -> &mut [CMat] {
        &mut self.coeffs
    }

    pub fn terms(&self) -> impl Iterator<Item = (&ScalarFn, &CMat)> {
        self.fns.iter().zip(&self.coeffs)
    }

    pub fn check_param(&self, p: &[Complex64]) -> Result<()> {
        if p.len() != self.param_dim {
            return Err(Error::Dimension(format!(
                "parameter has length {}, operator expects {}",
                p.len(),
                self.param_dim
            )));
        }
        Ok(())
    }

    /// Scalar weights `f_t(p)` of every term.
    pub fn weights(&self, p: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_param(p)?;
        Ok(self.fns.iter().map(|f| f.eval(p)).collect())
    }

    /// `sum_t f_t(p) M_t`.
    pub fn eval(&self, p: &[Complex64]) -> Result<CMat> {
        let w = self.weights(p)?;
        let mut out = CMat::zeros(self.rows, self.cols);
        for (wt, m) in w.iter().zip(&self.coeffs) {
            if *wt != Complex64::new(0.0, 0.0) {
                out.zip_apply(m, |o, x| *o += wt * x);
            }
        }
        Ok(out)
    }

    /// Same scalar functions, coefficients mapped through `f`.
    pub fn map_coeffs(&self, mut f: impl FnMut(&CMat) -> CMat) -> Result<Self> {
        let terms = self.fns.iter().cloned().zip(self.coeffs.iter().map(&mut f)).collect();
        Self::new(terms, self.param_dim)
    }
}
