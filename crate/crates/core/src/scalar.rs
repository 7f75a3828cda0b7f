//! Scalar parameter functions used as coefficients in parameter-separable forms.
//!
//! The set of functions is a closed enumeration so that conjugation symmetry
//! `f(conj p) = conj f(p)` holds for every member by construction: all
//! coefficients are real and every kind is a real-analytic function.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarFn {
    /// `f(p) = c`
    Constant(f64),
    /// `f(p) = (p[component] - shift)^exponent`
    Monomial {
        component: usize,
        exponent: u32,
        shift: f64,
    },
    /// `f(p) = cos(p[component])`
    Cos(usize),
    /// `f(p) = sin(p[component])`
    Sin(usize),
}

impl ScalarFn {
    pub const ONE: ScalarFn = ScalarFn::Constant(1.0);

    /// `p[component]`, the plain coordinate function.
    pub fn coord(component: usize) -> Self {
        ScalarFn::Monomial {
            component,
            exponent: 1,
            shift: 0.0,
        }
    }

    /// `(p[component] - shift)^exponent`.
    pub fn shifted_power(component: usize, exponent: u32, shift: f64) -> Self {
        ScalarFn::Monomial {
            component,
            exponent,
            shift,
        }
    }

    /// Largest parameter component this function reads, if any.
    pub fn max_component(&self) -> Option<usize> {
        match *self {
            ScalarFn::Constant(_) => None,
            ScalarFn::Monomial { component, .. } | ScalarFn::Cos(component) | ScalarFn::Sin(component) => {
                Some(component)
            }
        }
    }

    /// Evaluates the function. The caller guarantees `p` is long enough
    /// (checked once by [`crate::PsfOperator`]).
    pub fn eval(&self, p: &[Complex64]) -> Complex64 {
        match *self {
            ScalarFn::Constant(c) => Complex64::new(c, 0.0),
            ScalarFn::Monomial {
                component,
                exponent,
                shift,
            } => (p[component] - shift).powu(exponent),
            ScalarFn::Cos(component) => p[component].cos(),
            ScalarFn::Sin(component) => p[component].sin(),
        }
    }

    pub fn eval_real(&self, p: &[f64]) -> f64 {
        match *self {
            ScalarFn::Constant(c) => c,
            ScalarFn::Monomial {
                component,
                exponent,
                shift,
            } => (p[component] - shift).powi(exponent as i32),
            ScalarFn::Cos(component) => p[component].cos(),
            ScalarFn::Sin(component) => p[component].sin(),
        }
    }
}

impl fmt::Display for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ScalarFn::Constant(c) => write!(f, "const {c:?}"),
            ScalarFn::Monomial {
                component,
                exponent,
                shift,
            } => write!(f, "mono {component} {exponent} {shift:?}"),
            ScalarFn::Cos(c) => write!(f, "cos {c}"),
            ScalarFn::Sin(c) => write!(f, "sin {c}"),
        }
    }
}

impl FromStr for ScalarFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Input(format!("cannot parse scalar function {s:?}"));
        let mut it = s.split_whitespace();
        let kind = it.next().ok_or_else(bad)?;
        let mut next = || it.next().ok_or_else(bad);
        let parsed = match kind {
            "const" => ScalarFn::Constant(next()?.parse().map_err(|_| bad())?),
            "mono" => ScalarFn::Monomial {
                component: next()?.parse().map_err(|_| bad())?,
                exponent: next()?.parse().map_err(|_| bad())?,
                shift: next()?.parse().map_err(|_| bad())?,
            },
            "cos" => ScalarFn::Cos(next()?.parse().map_err(|_| bad())?),
            "sin" => ScalarFn::Sin(next()?.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        if it.next().is_some() {
            return Err(bad());
        }
        Ok(parsed)
    }
}
