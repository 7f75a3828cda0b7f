//! Parameter-to-output maps: anything that returns `y(p)` for a parameter.

use std::collections::HashMap;
use std::sync::Mutex;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::model::Ddrom;

/// A black-box map `p -> y(p)` with `y(p)` of shape `n_o x n_f`.
pub trait OutputOracle: Sync {
    /// `(n_o, n_f)`
    fn shape(&self) -> (usize, usize);
    fn param_dim(&self) -> usize;
    fn eval(&self, p: &[Complex64]) -> Result<CMat>;
}

impl OutputOracle for Ddrom {
    fn shape(&self) -> (usize, usize) {
        (self.n_outputs(), self.n_inputs())
    }
    fn param_dim(&self) -> usize {
        Ddrom::param_dim(self)
    }
    fn eval(&self, p: &[Complex64]) -> Result<CMat> {
        self.output(p)
    }
}

impl<T: OutputOracle + ?Sized> OutputOracle for &T {
    fn shape(&self) -> (usize, usize) {
        (**self).shape()
    }
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }
    fn eval(&self, p: &[Complex64]) -> Result<CMat> {
        (**self).eval(p)
    }
}

impl<T: OutputOracle + ?Sized + Send> OutputOracle for Box<T> {
    fn shape(&self) -> (usize, usize) {
        (**self).shape()
    }
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }
    fn eval(&self, p: &[Complex64]) -> Result<CMat> {
        (**self).eval(p)
    }
}

impl<T: OutputOracle + ?Sized + Send> OutputOracle for std::sync::Arc<T> {
    fn shape(&self) -> (usize, usize) {
        (**self).shape()
    }
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }
    fn eval(&self, p: &[Complex64]) -> Result<CMat> {
        (**self).eval(p)
    }
}

fn key(p: &[Complex64]) -> Vec<u64> {
    p.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect()
}

/// Memoizes an expensive oracle by the exact bit pattern of `p`.
///
/// Adaptive quadrature revisits the same nodes across optimizer iterations,
/// so wrapping a full-order model in this cache removes almost all repeated
/// solves.
pub struct Cached<O> {
    inner: O,
    cache: Mutex<HashMap<Vec<u64>, CMat>>,
}

impl<O: OutputOracle> Cached<O> {
    pub fn new(inner: O) -> Self {
        Cached {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<O: OutputOracle> OutputOracle for Cached<O> {
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }
    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }
    fn eval(&self, p: &[Complex64]) -> Result<CMat> {
        let k = key(p);
        if let Some(y) = self.cache.lock().unwrap().get(&k) {
            return Ok(y.clone());
        }
        let y = self.inner.eval(p)?;
        self.cache.lock().unwrap().insert(k, y.clone());
        Ok(y)
    }
}

/// Output data known only at a finite set of parameters.
#[derive(Debug, Clone)]
pub struct SampledOutput {
    shape: (usize, usize),
    param_dim: usize,
    samples: HashMap<Vec<u64>, CMat>,
}

impl SampledOutput {
    pub fn new(samples: &[(Vec<Complex64>, CMat)]) -> Result<Self> {
        let Some((p0, y0)) = samples.first() else {
            return Err(Error::Input("no samples".into()));
        };
        let shape = y0.shape();
        let param_dim = p0.len();
        let mut map = HashMap::with_capacity(samples.len());
        for (p, y) in samples {
            if y.shape() != shape || p.len() != param_dim {
                return Err(Error::Dimension("samples disagree in shape".into()));
            }
            map.insert(key(p), y.clone());
        }
        Ok(SampledOutput {
            shape,
            param_dim,
            samples: map,
        })
    }
}

impl OutputOracle for SampledOutput {
    fn shape(&self) -> (usize, usize) {
        self.shape
    }
    fn param_dim(&self) -> usize {
        self.param_dim
    }
    fn eval(&self, p: &[Complex64]) -> Result<CMat> {
        self.samples
            .get(&key(p))
            .cloned()
            .ok_or_else(|| Error::Input(format!("no sample at p = {p:?}")))
    }
}

/// Wraps a closure as an oracle.
pub struct FnOracle<F> {
    shape: (usize, usize),
    param_dim: usize,
    f: F,
}

impl<F> FnOracle<F>
where
    F: Fn(&[Complex64]) -> Result<CMat> + Sync,
{
    pub fn new(shape: (usize, usize), param_dim: usize, f: F) -> Self {
        FnOracle { shape, param_dim, f }
    }
}

impl<F> OutputOracle for FnOracle<F>
where
    F: Fn(&[Complex64]) -> Result<CMat> + Sync,
{
    fn shape(&self) -> (usize, usize) {
        self.shape
    }
    fn param_dim(&self) -> usize {
        self.param_dim
    }
    fn eval(&self, p: &[Complex64]) -> Result<CMat> {
        let y = (self.f)(p)?;
        if y.shape() != self.shape {
            return Err(Error::Dimension(format!("oracle returned {:?}, declared {:?}", y.shape(), self.shape)));
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn cache_avoids_repeat_calls() {
        let calls = AtomicUsize::new(0);
        let f = FnOracle::new((1, 1), 1, |p: &[Complex64]| {
            calls.fetch_add(1, Ordering::SeqCst);
            Ok(CMat::from_element(1, 1, p[0] * p[0]))
        });
        let c = Cached::new(f);
        let p = [Complex64::new(0.5, 0.0)];
        assert_eq!(c.eval(&p).unwrap()[(0, 0)].re, 0.25);
        assert_eq!(c.eval(&p).unwrap()[(0, 0)].re, 0.25);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn sampled_lookup() {
        let s = SampledOutput::new(&[(vec![Complex64::new(1.0, 0.0)], CMat::identity(1, 1))]).unwrap();
        assert!(s.eval(&[Complex64::new(1.0, 0.0)]).is_ok());
        assert!(s.eval(&[Complex64::new(2.0, 0.0)]).is_err());
    }

    #[test]
    fn fn_oracle_checks_shape() {
        let f = FnOracle::new((2, 1), 1, |_: &[Complex64]| Ok(CMat::zeros(1, 1)));
        assert!(f.eval(&[Complex64::new(0.0, 0.0)]).is_err());
    }
}
