//! Quasi-Newton minimization and the model-fitting loop built on it.

pub mod bfgs;
pub mod l2opt;
pub mod pack;

pub use bfgs::{quasi_newton_minimize, IterRecord, Minimum, OptimOptions, Status};
pub use l2opt::{l2_opt_psf, relative_output_change, FitReport};
pub use pack::{pack, pack_gradient, unpack, Layout};
