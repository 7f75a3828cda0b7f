//! The book chapters under `book/src`, compiled so that every snippet runs
//! as a doc-test.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}

#[doc = include_str!("../../../book/src/measures.md")]
pub mod measures {}

#[doc = include_str!("../../../book/src/gradients.md")]
pub mod gradients {}

#[doc = include_str!("../../../book/src/fitting.md")]
pub mod fitting {}

#[doc = include_str!("../../../book/src/baselines.md")]
pub mod baselines {}

#[doc = include_str!("../../../book/src/frequency.md")]
pub mod frequency {}

#[doc = include_str!("../../../book/src/recovery.md")]
pub mod recovery {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
