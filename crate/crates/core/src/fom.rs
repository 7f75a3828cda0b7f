//! Full-order models used by the intrusive baselines and problem generators.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{bandwidth, factor_band_checked, factor_checked, BandMatrix, CMat};
use crate::model::Families;
use crate::operator::PsfOperator;
use crate::oracle::OutputOracle;

/// Callback assembling `A(p)` in band storage for models without a
/// separable form.
pub type Assembler = Arc<dyn Fn(&[Complex64]) -> BandMatrix + Send + Sync>;

#[derive(Clone)]
pub enum Fom {
    Separable {
        a: PsfOperator,
        b: PsfOperator,
        c: PsfOperator,
        /// Bandwidth `(kl, ku)` shared by every `A_i`.
        band: (usize, usize),
    },
    Assembled {
        n: usize,
        param_dim: usize,
        assemble: Assembler,
        b: CMat,
        c: CMat,
    },
}

impl fmt::Debug for Fom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fom::Separable { a, b, c, .. } => f
                .debug_struct("Fom::Separable")
                .field("n", &a.rows())
                .field("q_a", &a.num_terms())
                .field("q_b", &b.num_terms())
                .field("q_c", &c.num_terms())
                .finish(),
            Fom::Assembled { n, param_dim, b, c, .. } => f
                .debug_struct("Fom::Assembled")
                .field("n", n)
                .field("param_dim", param_dim)
                .field("n_f", &b.ncols())
                .field("n_o", &c.nrows())
                .finish(),
        }
    }
}

impl Fom {
    pub fn separable(a: PsfOperator, b: PsfOperator, c: PsfOperator) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n || b.rows() != n || c.cols() != n {
            return Err(Error::Dimension(format!(
                "FOM shapes A {:?}, B {:?}, C {:?} are inconsistent",
                a.shape(),
                b.shape(),
                c.shape()
            )));
        }
        if a.param_dim() != b.param_dim() || a.param_dim() != c.param_dim() {
            return Err(Error::Dimension("operators disagree on parameter dimension".into()));
        }
        let band = a.coeffs().iter().map(bandwidth).fold((0, 0), |x, y| (x.0.max(y.0), x.1.max(y.1)));
        Ok(Fom::Separable { a, b, c, band })
    }

    /// A FOM whose `A(p)` is assembled per query. The callback is checked
    /// once at `probe`.
    pub fn assembled(n: usize, param_dim: usize, assemble: Assembler, b: CMat, c: CMat, probe: &[Complex64]) -> Result<Self> {
        if b.nrows() != n || c.ncols() != n {
            return Err(Error::Dimension(format!("B is {:?}, C is {:?}, n = {n}", b.shape(), c.shape())));
        }
        if probe.len() != param_dim {
            return Err(Error::Dimension("probe parameter has the wrong length".into()));
        }
        let a = assemble(probe);
        if a.dim() != n {
            return Err(Error::Dimension(format!("assembled A(p) has dimension {}, expected {n}", a.dim())));
        }
        Ok(Fom::Assembled {
            n,
            param_dim,
            assemble,
            b,
            c,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Fom::Separable { a, .. } => a.rows(),
            Fom::Assembled { n, .. } => *n,
        }
    }

    pub fn n_inputs(&self) -> usize {
        match self {
            Fom::Separable { b, .. } => b.cols(),
            Fom::Assembled { b, .. } => b.ncols(),
        }
    }

    pub fn n_outputs(&self) -> usize {
        match self {
            Fom::Separable { c, .. } => c.rows(),
            Fom::Assembled { c, .. } => c.nrows(),
        }
    }

    pub fn param_dim(&self) -> usize {
        match self {
            Fom::Separable { a, .. } => a.param_dim(),
            Fom::Assembled { param_dim, .. } => *param_dim,
        }
    }

    pub fn is_separable(&self) -> bool {
        matches!(self, Fom::Separable { .. })
    }

    /// Scalar families of a separable FOM.
    pub fn families(&self) -> Option<Families> {
        match self {
            Fom::Separable { a, b, c, .. } => Some(Families::new(a.fns().to_vec(), b.fns().to_vec(), c.fns().to_vec())),
            Fom::Assembled { .. } => None,
        }
    }

    fn check_param(&self, p: &[Complex64]) -> Result<()> {
        if p.len() != self.param_dim() {
            return Err(Error::Dimension(format!(
                "parameter has length {}, FOM expects {}",
                p.len(),
                self.param_dim()
            )));
        }
        Ok(())
    }

    pub fn a_matrix(&self, p: &[Complex64]) -> Result<CMat> {
        self.check_param(p)?;
        match self {
            Fom::Separable { a, .. } => a.eval(p),
            Fom::Assembled { assemble, .. } => Ok(assemble(p).to_dense()),
        }
    }

    /// `A(p) V` without forming a dense `A(p)` for assembled models.
    pub fn apply_a(&self, p: &[Complex64], v: &CMat) -> Result<CMat> {
        self.check_param(p)?;
        match self {
            Fom::Separable { a, .. } => {
                let mut out = CMat::zeros(a.rows(), v.ncols());
                for (w, ai) in a.weights(p)?.into_iter().zip(a.coeffs()) {
                    out += ai * v * w;
                }
                Ok(out)
            }
            Fom::Assembled { assemble, .. } => Ok(assemble(p).mul(v)),
        }
    }

    pub fn b_matrix(&self, p: &[Complex64]) -> Result<CMat> {
        match self {
            Fom::Separable { b, .. } => b.eval(p),
            Fom::Assembled { b, .. } => Ok(b.clone()),
        }
    }

    pub fn c_matrix(&self, p: &[Complex64]) -> Result<CMat> {
        match self {
            Fom::Separable { c, .. } => c.eval(p),
            Fom::Assembled { c, .. } => Ok(c.clone()),
        }
    }

    /// `x(p)`, `n x n_f`.
    pub fn solve_state(&self, p: &[Complex64]) -> Result<CMat> {
        let lu = match self {
            Fom::Separable { a, band, .. } if a.rows() > 64 => {
                self.check_param(p)?;
                let mut m = BandMatrix::zeros(a.rows(), band.0, band.1);
                for (w, ai) in a.weights(p)?.into_iter().zip(a.coeffs()) {
                    m.add_scaled(ai, w);
                }
                factor_band_checked(m, p)?
            }
            Fom::Assembled { assemble, .. } => {
                self.check_param(p)?;
                factor_band_checked(assemble(p), p)?
            }
            _ => factor_checked(&self.a_matrix(p)?, p)?,
        };
        Ok(lu.solve(&self.b_matrix(p)?))
    }

    /// `y(p) = C(p) x(p)`.
    pub fn output(&self, p: &[Complex64]) -> Result<CMat> {
        Ok(self.c_matrix(p)? * self.solve_state(p)?)
    }
}

impl OutputOracle for Fom {
    fn shape(&self) -> (usize, usize) {
        (self.n_outputs(), self.n_inputs())
    }
    fn param_dim(&self) -> usize {
        Fom::param_dim(self)
    }
    fn eval(&self, p: &[Complex64]) -> Result<CMat> {
        self.output(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ScalarFn;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn separable_and_assembled_agree() {
        let a1 = CMat::from_row_slice(2, 2, &[c(2.0), c(-1.0), c(-1.0), c(2.0)]);
        let a2 = CMat::identity(2, 2);
        let b = CMat::from_element(2, 1, c(1.0));
        let sep = Fom::separable(
            PsfOperator::new(vec![(ScalarFn::ONE, a1.clone()), (ScalarFn::coord(0), a2.clone())], 1).unwrap(),
            PsfOperator::single(ScalarFn::ONE, b.clone(), 1).unwrap(),
            PsfOperator::single(ScalarFn::ONE, b.transpose(), 1).unwrap(),
        )
        .unwrap();
        let asm = Fom::assembled(
            2,
            1,
            Arc::new(move |p: &[Complex64]| BandMatrix::from_dense(&(&a1 + &a2 * p[0]), 1, 1)),
            b.clone(),
            b.transpose(),
            &[c(0.0)],
        )
        .unwrap();
        for p in [0.3, 1.0, 7.0] {
            let y1 = sep.output(&[c(p)]).unwrap();
            let y2 = asm.output(&[c(p)]).unwrap();
            // y = 2 / (1 + p)
            assert!((y1[(0, 0)] - c(2.0 / (1.0 + p))).norm() < 1e-14);
            assert!((y1 - y2).norm() < 1e-14);
            let v = CMat::from_row_slice(2, 1, &[c(1.0), c(-3.0)]);
            assert!((sep.apply_a(&[c(p)], &v).unwrap() - asm.apply_a(&[c(p)], &v).unwrap()).norm() < 1e-14);
        }
        assert!(sep.families().is_some() && asm.families().is_none());
    }

    #[test]
    fn shape_errors() {
        let bad = Fom::assembled(3, 1, Arc::new(|_: &[Complex64]| BandMatrix::zeros(2, 0, 0)), CMat::zeros(3, 1), CMat::zeros(1, 3), &[c(0.0)]);
        assert!(bad.is_err());
    }
}
