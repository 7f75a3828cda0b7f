//! Data-driven parameter-separable reduced-order models.
//!
//! A model `A(p) x(p) = B(p)`, `y(p) = C(p) x(p)` with
//! `A(p) = sum_i alpha_i(p) A_i` (and likewise for `B`, `C`) is fitted to a
//! black-box map `p -> y(p)` by minimizing `int ||y - y_r||_F^2 dmu` over the
//! coefficient matrices.

pub mod baselines;
pub mod error;
pub mod fom;
pub mod linalg;
pub mod measure;
pub mod model;
pub mod objective;
pub mod operator;
pub mod optim;
pub mod oracle;
pub mod problems;
pub mod quadrature;
pub mod recovery;
pub mod scalar;

pub use error::{Error, Result};
pub use fom::Fom;
pub use measure::{AxisMode, DiscretePoints, Measure, QuadRule};
pub use model::{Ddrom, Families};
pub use objective::GradientBundle;
pub use operator::PsfOperator;
pub use oracle::{Cached, OutputOracle};
pub use quadrature::QuadOptions;
pub use scalar::ScalarFn;

pub use num_complex::Complex64;
