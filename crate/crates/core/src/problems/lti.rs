//! Linear time-invariant systems in the frequency domain: sampling transfer
//! functions, synthetic test systems and extraction of the stable part of a
//! fitted model.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{factor_checked, CMat, RMat};
use crate::measure::DiscretePoints;
use crate::model::{Ddrom, Families};
use crate::operator::PsfOperator;
use crate::oracle::SampledOutput;
use crate::scalar::ScalarFn;

/// Frequency-response samples `(w_l, H_l)` with strictly increasing
/// `w_l >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySampleSet {
    omegas: Vec<f64>,
    values: Vec<CMat>,
}

impl FrequencySampleSet {
    pub fn new(omegas: Vec<f64>, values: Vec<CMat>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::Input("frequency data is empty".into()));
        }
        if omegas.len() != values.len() {
            return Err(Error::Dimension(format!("{} frequencies but {} samples", omegas.len(), values.len())));
        }
        if omegas.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Input("frequencies must be finite and nonnegative".into()));
        }
        if omegas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Input("frequencies must be strictly increasing".into()));
        }
        let shape = values[0].shape();
        if values.iter().any(|v| v.shape() != shape) {
            return Err(Error::Dimension("samples differ in shape".into()));
        }
        if omegas[0] == 0.0 && values[0].iter().any(|z| z.im.abs() > 1e-12 * z.norm().max(1.0)) {
            return Err(Error::Input("the sample at w = 0 of a real system must be real".into()));
        }
        Ok(FrequencySampleSet { omegas, values })
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }
    pub fn values(&self) -> &[CMat] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.omegas.len()
    }
    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
    /// `(n_o, n_f)`
    pub fn shape(&self) -> (usize, usize) {
        self.values[0].shape()
    }

    /// Samples at `s = i w` only.
    pub fn samples(&self) -> Vec<(Vec<Complex64>, CMat)> {
        self.omegas
            .iter()
            .zip(&self.values)
            .map(|(w, h)| (vec![Complex64::new(0.0, *w)], h.clone()))
            .collect()
    }

    /// Samples at `s = i w` together with `(-i w, conj(H))`; a sample at
    /// `w = 0` is its own partner.
    pub fn completed(&self) -> Vec<(Vec<Complex64>, CMat)> {
        let mut out = self.samples();
        for (w, h) in self.omegas.iter().zip(&self.values) {
            if *w > 0.0 {
                out.push((vec![Complex64::new(0.0, -*w)], h.conjugate()));
            }
        }
        out
    }

    /// Equal-weight discrete measure over the completed samples and the
    /// matching data oracle, so that the objective is the mean squared error.
    pub fn mse_problem(&self) -> Result<(DiscretePoints, SampledOutput)> {
        let samples = self.completed();
        let points = DiscretePoints::uniform(samples.iter().map(|(p, _)| p.clone()).collect())?;
        Ok((points, SampledOutput::new(&samples)?))
    }
}

/// `H(i w) = C (i w E - A)^{-1} B` at each frequency.
pub fn sample_transfer_function(e: &CMat, a: &CMat, b: &CMat, c: &CMat, freqs: &[f64]) -> Result<FrequencySampleSet> {
    let n = a.nrows();
    if a.shape() != (n, n) || e.shape() != (n, n) || b.nrows() != n || c.ncols() != n {
        return Err(Error::Dimension("E, A, B, C shapes are inconsistent".into()));
    }
    let mut values = Vec::with_capacity(freqs.len());
    for &w in freqs {
        let s = Complex64::new(0.0, w);
        let lu = factor_checked(&(e * s - a), &[s]).map_err(|_| Error::Singular {
            p: vec![s],
            cond: f64::INFINITY,
        })?;
        values.push(c * lu.solve(b));
    }
    FrequencySampleSet::new(freqs.to_vec(), values)
}

/// `n` points from `10^lo` to `10^hi`, equally spaced in `log10`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    crate::problems::fem::linspace(lo, hi, n).into_iter().map(|x| 10f64.powf(x)).collect()
}

/// A real LTI system `E x' = A x + B u`, `y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    pub e: RMat,
    pub a: RMat,
    pub b: RMat,
    pub c: RMat,
}

impl LtiSystem {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn sample(&self, freqs: &[f64]) -> Result<FrequencySampleSet> {
        let cx = |m: &RMat| m.map(|v| Complex64::new(v, 0.0));
        sample_transfer_function(&cx(&self.e), &cx(&self.a), &cx(&self.b), &cx(&self.c), freqs)
    }

    /// The same system as a model with the frequency family `{s, -1}`:
    /// coefficient `E` on `s` and `A` on `-1`.
    pub fn to_ddrom(&self) -> Result<Ddrom> {
        let cx = |m: &RMat| m.map(|v| Complex64::new(v, 0.0));
        let fam = Families::lti();
        Ddrom::new(
            PsfOperator::new(vec![(fam.a[0], cx(&self.e)), (fam.a[1], cx(&self.a))], 1)?,
            PsfOperator::single(ScalarFn::ONE, cx(&self.b), 1)?,
            PsfOperator::single(ScalarFn::ONE, cx(&self.c), 1)?,
        )
    }
}

/// Random asymptotically stable real system of even order with `E = I`:
/// `2x2` blocks `[[s, w], [-w, s]]` with `w` log-uniform in `[0.1, 10]` and
/// damping `s = -z w`, `z` uniform in `[0.05, 0.5]`, rotated by a random
/// orthogonal matrix.
pub fn random_stable_system(order: usize, n_f: usize, n_o: usize, seed: u64) -> Result<LtiSystem> {
    if order == 0 || order % 2 != 0 {
        return Err(Error::Input(format!("order must be positive and even, got {order}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = RMat::zeros(order, order);
    for k in 0..order / 2 {
        let w = 10f64.powf(rng.random_range(-1.0..1.0));
        let s = -rng.random_range(0.05..0.5) * w;
        let i = 2 * k;
        d[(i, i)] = s;
        d[(i + 1, i + 1)] = s;
        d[(i, i + 1)] = w;
        d[(i + 1, i)] = -w;
    }
    let mut gauss = |r: usize, c: usize| RMat::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
    let q = gauss(order, order).qr().q();
    let a = &q * d * q.transpose();
    let b = gauss(order, n_f);
    let c = gauss(n_o, order);
    Ok(LtiSystem { e: RMat::identity(order, order), a, b, c })
}

/// Adds independent Gaussian noise of size `rel * ||M||_F / sqrt(len)` to
/// every coefficient.
pub fn perturb(m: &Ddrom, rel: f64, seed: u64) -> Result<Ddrom> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = m.clone();
    let real = m.is_real();
    for op in out.ops_mut() {
        for c in op.coeffs_mut() {
            let scale = rel * c.norm() / (c.len() as f64).sqrt();
            for z in c.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = if real { 0.0 } else { StandardNormal.sample(&mut rng) };
                *z += Complex64::new(re, im) * scale;
            }
        }
    }
    Ok(out)
}

/// Result of [`stable_part`].
#[derive(Debug, Clone)]
pub struct StablePart {
    pub model: Ddrom,
    /// Eigenvalues of the retained part.
    pub kept: Vec<Complex64>,
    /// Eigenvalues with positive real part that were removed.
    pub discarded: Vec<Complex64>,
    /// Retained eigenvalues within `AXIS_TOL` of the imaginary axis.
    pub near_axis: Vec<Complex64>,
}

/// Eigenvalues with `|Re| <= AXIS_TOL` count as on the axis and are kept.
pub const AXIS_TOL: f64 = 1e-10;

fn eigenvalues(t: &CMat) -> Result<Vec<Complex64>> {
    let ev = t
        .clone()
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::Rank("Schur form did not converge".into()))?;
    Ok(ev.iter().cloned().collect())
}

/// Matrix sign function by the scaled Newton iteration.
fn matrix_sign(t: &CMat) -> Result<CMat> {
    let n = t.nrows();
    let mut x = t.clone();
    let mut scale = true;
    for _ in 0..200 {
        let inv = x.clone().try_inverse().ok_or_else(|| Error::Rank("matrix sign iteration hit a singular iterate".into()))?;
        let mu = if scale {
            let det = x.clone().lu().determinant().norm();
            if det > 0.0 && det.is_finite() {
                det.powf(-1.0 / n as f64)
            } else {
                1.0
            }
        } else {
            1.0
        };
        let next = (&x * Complex64::new(mu, 0.0) + inv * Complex64::new(1.0 / mu, 0.0)) * Complex64::new(0.5, 0.0);
        let change = (&next - &x).norm() / next.norm();
        x = next;
        if change < 1e-2 {
            scale = false;
        }
        if change <= 1e-14 * (n as f64).sqrt() {
            return Ok(x);
        }
    }
    Err(Error::Rank("matrix sign iteration did not converge".into()))
}

/// Restricts a model `(s E - A) x = B u`, `y = C x` to the invariant subspace
/// of `E^{-1} A` belonging to eigenvalues with `Re <= AXIS_TOL`.
///
/// The result has `E = I`. A model with nothing to discard is returned
/// unchanged.
pub fn stable_part(m: &Ddrom) -> Result<StablePart> {
    let fam = Families::lti();
    if m.a_op().fns() != fam.a.as_slice() || m.b_op().fns() != [ScalarFn::ONE] || m.c_op().fns() != [ScalarFn::ONE] {
        return Err(Error::Input("stable part needs the frequency family {s, -1} with constant B and C".into()));
    }
    let r = m.order();
    let e = m.a_op().coeff(0);
    let a = m.a_op().coeff(1);
    let lu = factor_checked(e, &[]).map_err(|_| Error::Input("E is singular".into()))?;
    let t = lu.solve(a);
    let ev = eigenvalues(&t)?;
    let kept: Vec<Complex64> = ev.iter().cloned().filter(|z| z.re <= AXIS_TOL).collect();
    let discarded: Vec<Complex64> = ev.iter().cloned().filter(|z| z.re > AXIS_TOL).collect();
    let near_axis: Vec<Complex64> = kept.iter().cloned().filter(|z| z.re.abs() <= AXIS_TOL).collect();
    if discarded.is_empty() {
        return Ok(StablePart { model: m.clone(), kept, discarded, near_axis });
    }
    if kept.is_empty() {
        return Err(Error::Input("model has no stable part".into()));
    }
    // shift into the middle of the gap between kept and discarded real parts
    let hi_kept = kept.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let lo_disc = discarded.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let sigma = 0.5 * (hi_kept + lo_disc);
    let shifted = &t - CMat::identity(r, r) * Complex64::new(sigma, 0.0);
    let sign = matrix_sign(&shifted)?;
    let proj = (CMat::identity(r, r) - sign) * Complex64::new(0.5, 0.0);

    let k = kept.len();
    let real = m.is_real();
    let (v, w) = if real {
        rank_factor_real(&proj.map(|z| z.re), k)
    } else {
        rank_factor(&proj, k)
    };
    let wt = w.adjoint();
    let a_new = &wt * &t * &v;
    let b_new = &wt * lu.solve(m.b_op().coeff(0));
    let c_new = m.c_op().coeff(0) * &v;
    let clean = |x: CMat| if real { x.map(|z| Complex64::new(z.re, 0.0)) } else { x };
    let model = Ddrom::new(
        PsfOperator::new(vec![(fam.a[0], CMat::identity(k, k)), (fam.a[1], clean(a_new))], 1)?,
        PsfOperator::single(ScalarFn::ONE, clean(b_new), 1)?,
        PsfOperator::single(ScalarFn::ONE, clean(c_new), 1)?,
    )?;
    Ok(StablePart { model, kept, discarded, near_axis })
}

/// `P = V W^*` with `W^* V = I` from the leading `k` singular triplets.
fn rank_factor(p: &CMat, k: usize) -> (CMat, CMat) {
    let svd = p.clone().svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let cols = |m: &CMat, by_row: bool| -> Vec<DVector<Complex64>> {
        order[..k]
            .iter()
            .map(|&i| {
                let s = svd.singular_values[i].sqrt();
                let col: DVector<Complex64> = if by_row { m.row(i).adjoint() } else { m.column(i).into_owned() };
                col * Complex64::new(s, 0.0)
            })
            .collect()
    };
    (CMat::from_columns(&cols(&u, false)), CMat::from_columns(&cols(&vt, true)))
}

fn rank_factor_real(p: &RMat, k: usize) -> (CMat, CMat) {
    let svd = p.clone().svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut v = CMat::zeros(p.nrows(), k);
    let mut w = CMat::zeros(p.nrows(), k);
    for (c, &i) in order[..k].iter().enumerate() {
        let s = svd.singular_values[i].sqrt();
        for r in 0..p.nrows() {
            v[(r, c)] = Complex64::new(u[(r, i)] * s, 0.0);
            w[(r, c)] = Complex64::new(vt[(i, r)] * s, 0.0);
        }
    }
    (v, w)
}

/// Relative mean squared error `sum ||H - H_r||^2 / sum ||H||^2` over the
/// samples.
pub fn relative_mse(data: &FrequencySampleSet, m: &Ddrom) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (p, h) in data.samples() {
        num += (&h - m.output(&p)?).norm_squared();
        den += h.norm_squared();
    }
    Ok(num / den)
}
