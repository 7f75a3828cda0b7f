//! The data-driven reduced-order model and its state, output and dual solves.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{factor_checked, CMat};
use crate::operator::PsfOperator;
use crate::scalar::ScalarFn;

/// Scalar-function families of the three operators of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Families {
    pub a: Vec<ScalarFn>,
    pub b: Vec<ScalarFn>,
    pub c: Vec<ScalarFn>,
}

impl Families {
    pub fn new(a: Vec<ScalarFn>, b: Vec<ScalarFn>, c: Vec<ScalarFn>) -> Self {
        Families { a, b, c }
    }

    /// `A(p) = A_1 + p A_2`, `B`, `C` constant.
    pub fn affine_1d() -> Self {
        Families::new(vec![ScalarFn::ONE, ScalarFn::coord(0)], vec![ScalarFn::ONE], vec![ScalarFn::ONE])
    }

    /// Frequency-domain family `(s E - A) x = B`, `y = C x`, with `s = p`:
    /// `alpha_1(s) = s`, `alpha_2(s) = -1`.
    pub fn lti() -> Self {
        Families::new(
            vec![ScalarFn::coord(0), ScalarFn::Constant(-1.0)],
            vec![ScalarFn::ONE],
            vec![ScalarFn::ONE],
        )
    }
}

/// A parameter-separable reduced model
/// `A(p) x(p) = B(p)`, `y(p) = C(p) x(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ddrom {
    a: PsfOperator,
    b: PsfOperator,
    c: PsfOperator,
}

/// Per-parameter quantities shared by the objective and all gradients.
#[derive(Debug, Clone)]
pub struct NodeSolution {
    /// `x(p)`, `r x n_f`
    pub state: CMat,
    /// `x_d(p)` solving `A(p)^* x_d = C(p)^*`, `r x n_o`
    pub dual: CMat,
    /// `y(p)`, `n_o x n_f`
    pub output: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// Sampled `max_{p, i} |alpha_i(p)| * ||A(p)^{-1}||_F`.
    pub supremum: f64,
    pub worst_param: Vec<Complex64>,
    pub feasible: bool,
}

pub const DEFAULT_FEASIBILITY_CAP: f64 = 1e8;

impl Ddrom {
    pub fn new(a: PsfOperator, b: PsfOperator, c: PsfOperator) -> Result<Self> {
        let r = a.rows();
        if a.cols() != r {
            return Err(Error::Dimension(format!("A operator is {:?}, must be square", a.shape())));
        }
        if b.rows() != r {
            return Err(Error::Dimension(format!("B operator has {} rows, order is {r}", b.rows())));
        }
        if c.cols() != r {
            return Err(Error::Dimension(format!("C operator has {} columns, order is {r}", c.cols())));
        }
        if a.param_dim() != b.param_dim() || a.param_dim() != c.param_dim() {
            return Err(Error::Dimension("operators disagree on parameter dimension".into()));
        }
        Ok(Ddrom { a, b, c })
    }

    /// The standard starting point: first A coefficient the identity, first
    /// B coefficient all ones, first C coefficient all ones, every other
    /// coefficient zero.
    pub fn canonical(families: &Families, order: usize, n_f: usize, n_o: usize, param_dim: usize) -> Result<Self> {
        let one = Complex64::new(1.0, 0.0);
        let build = |fns: &[ScalarFn], first: CMat| -> Result<PsfOperator> {
            let (r, c) = first.shape();
            let terms = fns
                .iter()
                .enumerate()
                .map(|(t, f)| (*f, if t == 0 { first.clone() } else { CMat::zeros(r, c) }))
                .collect();
            PsfOperator::new(terms, param_dim)
        };
        Ddrom::new(
            build(&families.a, CMat::identity(order, order))?,
            build(&families.b, CMat::from_element(order, n_f, one))?,
            build(&families.c, CMat::from_element(n_o, order, one))?,
        )
    }

    pub fn a_op(&self) -> &PsfOperator {
        &self.a
    }
    pub fn b_op(&self) -> &PsfOperator {
        &self.b
    }
    pub fn c_op(&self) -> &PsfOperator {
        &self.c
    }
    pub fn ops_mut(&mut self) -> [&mut PsfOperator; 3] {
        [&mut self.a, &mut self.b, &mut self.c]
    }
    pub fn order(&self) -> usize {
        self.a.rows()
    }
    pub fn n_inputs(&self) -> usize {
        self.b.cols()
    }
    pub fn n_outputs(&self) -> usize {
        self.c.rows()
    }
    pub fn param_dim(&self) -> usize {
        self.a.param_dim()
    }
    pub fn is_real(&self) -> bool {
        self.a.is_real() && self.b.is_real() && self.c.is_real()
    }
    pub fn families(&self) -> Families {
        Families::new(self.a.fns().to_vec(), self.b.fns().to_vec(), self.c.fns().to_vec())
    }

    /// `x(p)` solving `A(p) x = B(p)`.
    pub fn solve_state(&self, p: &[Complex64]) -> Result<CMat> {
        let lu = factor_checked(&self.a.eval(p)?, p)?;
        Ok(lu.solve(&self.b.eval(p)?))
    }

    /// `y(p) = C(p) x(p)`.
    pub fn output(&self, p: &[Complex64]) -> Result<CMat> {
        Ok(self.c.eval(p)? * self.solve_state(p)?)
    }

    /// `x_d(p)` solving `A(p)^* x_d = C(p)^*`, so that `C(p) A(p)^{-1} = x_d(p)^*`.
    pub fn dual_state(&self, p: &[Complex64]) -> Result<CMat> {
        let lu = factor_checked(&self.a.eval(p)?, p)?;
        Ok(lu.solve_adjoint(&self.c.eval(p)?.adjoint()))
    }

    /// State, dual state and output from a single factorization of `A(p)`.
    pub fn solve_node(&self, p: &[Complex64]) -> Result<NodeSolution> {
        let lu = factor_checked(&self.a.eval(p)?, p)?;
        let c = self.c.eval(p)?;
        let state = lu.solve(&self.b.eval(p)?);
        let dual = lu.solve_adjoint(&c.adjoint());
        let output = c * &state;
        Ok(NodeSolution { state, dual, output })
    }

    /// Samples the feasibility quantity `|alpha_i(p)| ||A(p)^{-1}||_F` over
    /// `probes`. A singular `A(p)` counts as an infinite value.
    pub fn feasibility_check(&self, probes: &[Vec<Complex64>], cap: f64) -> Result<FeasibilityReport> {
        if probes.is_empty() {
            return Err(Error::Input("feasibility check needs at least one probe".into()));
        }
        let r = self.order();
        let mut sup = f64::NEG_INFINITY;
        let mut worst = probes[0].clone();
        for p in probes {
            let w = self.a.weights(p)?;
            let amax = w.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let value = match factor_checked(&self.a.eval(p)?, p) {
                Ok(lu) => amax * lu.solve(&CMat::identity(r, r)).norm(),
                Err(Error::Singular { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            if value > sup || value.is_nan() {
                sup = if value.is_nan() { f64::INFINITY } else { value };
                worst = p.clone();
            }
        }
        Ok(FeasibilityReport {
            supremum: sup,
            worst_param: worst,
            feasible: sup.is_finite() && sup <= cap,
        })
    }

    /// Re-expresses the model in larger families: terms whose scalar function
    /// already exists keep their coefficient, new terms start at zero.
    pub fn lift_to(&self, families: &Families) -> Result<Self> {
        fn lift(op: &PsfOperator, fns: &[ScalarFn]) -> Result<PsfOperator> {
            for f in op.fns() {
                if !fns.contains(f) {
                    return Err(Error::Input(format!("target family lacks existing term {f}")));
                }
            }
            let (r, c) = op.shape();
            let terms = fns
                .iter()
                .map(|f| {
                    let m = op.terms().find(|(g, _)| *g == f).map(|(_, m)| m.clone());
                    (*f, m.unwrap_or_else(|| CMat::zeros(r, c)))
                })
                .collect();
            PsfOperator::new(terms, op.param_dim())
        }
        Ddrom::new(lift(&self.a, &families.a)?, lift(&self.b, &families.b)?, lift(&self.c, &families.c)?)
    }
}

/// Outcome of [`conjugate_closure_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureReport {
    pub closed: bool,
    pub max_deviation: f64,
}

fn is_nonreal(p: &[Complex64]) -> bool {
    p.iter().any(|z| z.im != 0.0)
}

fn param_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Checks that every sample at a nonreal parameter has a partner at the
/// conjugate parameter whose value is the conjugate, to within
/// `tol * max(1, ||y||_F)`.
pub fn conjugate_closure_check(samples: &[(Vec<Complex64>, CMat)], tol: f64) -> ClosureReport {
    let mut max_dev: f64 = 0.0;
    let mut closed = true;
    for (p, y) in samples {
        if !is_nonreal(p) {
            continue;
        }
        let pc: Vec<Complex64> = p.iter().map(|z| z.conj()).collect();
        let scale = 1.0 + pc.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let partner = samples
            .iter()
            .filter(|(q, yq)| yq.shape() == y.shape() && param_distance(q, &pc) <= 1e-12 * scale)
            .map(|(_, yq)| (yq - y.conjugate()).norm() / y.norm().max(1.0))
            .fold(None, |best: Option<f64>, d| Some(best.map_or(d, |b| b.min(d))));
        match partner {
            Some(d) => {
                max_dev = max_dev.max(d);
                if d > tol {
                    closed = false;
                }
            }
            None => {
                closed = false;
                max_dev = f64::INFINITY;
            }
        }
    }
    ClosureReport {
        closed,
        max_deviation: max_dev,
    }
}
