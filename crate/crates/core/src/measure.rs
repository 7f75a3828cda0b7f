//! Measures over the parameter space and integration against them.
//!
//! Every integral in the objective and its gradients goes through
//! [`Measure::integrate`], so continuous and discrete problems share the same
//! integrand code: an interval measure runs adaptive Gauss-Kronrod, a discrete
//! measure sums its weighted point values with a fixed pairwise tree.

use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::oracle::OutputOracle;
use crate::quadrature::{integrate_fixed, integrate_interval, pairwise_sum, Integral, QuadOptions};

/// How the imaginary axis `s = i w`, `w in (-inf, inf)`, is integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisMode {
    /// `w = tan(theta)`, `theta in (-pi/2, pi/2)`.
    Tangent,
    /// Plain truncation to `w in [-cutoff, cutoff]`.
    Truncated(f64),
}

/// A finite set of weighted points, stored in a canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePoints {
    points: Vec<Vec<Complex64>>,
    weights: Vec<f64>,
}

/// Quadrature rule for continuous measures.
#[derive(Debug, Clone, PartialEq)]
pub enum QuadRule {
    Adaptive(QuadOptions),
    /// K15 on a fixed partition of the integration variable.
    Fixed(Vec<f64>),
}

impl From<QuadOptions> for QuadRule {
    fn from(o: QuadOptions) -> Self {
        QuadRule::Adaptive(o)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    /// `density * Lebesgue` on the real segment `[a, b]`.
    Interval { a: f64, b: f64, density: f64 },
    /// `weight * Lebesgue` on the imaginary axis; `weight = 1/(2 pi)` gives
    /// the H2 norm.
    ImaginaryAxis { weight: f64, mode: AxisMode },
    Discrete(DiscretePoints),
}

fn cmp_points(a: &[Complex64], b: &[Complex64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if o != Ordering::Equal {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

impl DiscretePoints {
    /// Builds a weighted point set. Weights must be positive, all points must
    /// share a dimension, and the set (with weights) must be closed under
    /// conjugation.
    pub fn new(points: Vec<Vec<Complex64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Input("discrete measure needs at least one point".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::Dimension(format!("{} points but {} weights", points.len(), weights.len())));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::Dimension("points must share a positive dimension".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::Input(format!("weights must be positive, got {w}")));
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&i, &j| cmp_points(&points[i], &points[j]));
        let points: Vec<Vec<Complex64>> = order.iter().map(|&i| points[i].clone()).collect();
        let weights: Vec<f64> = order.iter().map(|&i| weights[i]).collect();

        for (p, w) in points.iter().zip(&weights) {
            if p.iter().all(|z| z.im == 0.0) {
                continue;
            }
            let pc: Vec<Complex64> = p.iter().map(|z| z.conj()).collect();
            let scale = 1.0 + pc.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let partner = points.iter().zip(&weights).any(|(q, v)| {
                let d: f64 = q.iter().zip(&pc).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
                d <= 1e-12 * scale && (v - w).abs() <= 1e-12 * w.abs()
            });
            if !partner {
                return Err(Error::Input(format!("point set is not closed under conjugation at {p:?}")));
            }
        }
        Ok(DiscretePoints { points, weights })
    }

    /// Equal weights `1/N`, realizing the mean squared error.
    pub fn uniform(points: Vec<Vec<Complex64>>) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        let n = points.len();
        Self::new(points, vec![w; n])
    }

    /// Real scalar points with equal weights.
    pub fn uniform_real(points: &[f64]) -> Result<Self> {
        Self::uniform(points.iter().map(|&x| vec![Complex64::new(x, 0.0)]).collect())
    }

    pub fn points(&self) -> &[Vec<Complex64>] {
        &self.points
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Measure {
    pub fn interval(a: f64, b: f64, density: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Input(format!("interval measure needs a < b, got [{a}, {b}]")));
        }
        if !(density >= 0.0 && density.is_finite()) {
            return Err(Error::Input(format!("density must be nonnegative, got {density}")));
        }
        Ok(Measure::Interval { a, b, density })
    }

    /// `1/(2 pi)` times Lebesgue measure on the imaginary axis, integrated by
    /// tangent substitution.
    pub fn h2() -> Self {
        Measure::ImaginaryAxis {
            weight: 1.0 / (2.0 * PI),
            mode: AxisMode::Tangent,
        }
    }

    pub fn discrete(points: Vec<Vec<Complex64>>, weights: Vec<f64>) -> Result<Self> {
        Ok(Measure::Discrete(DiscretePoints::new(points, weights)?))
    }

    pub fn param_dim(&self) -> usize {
        match self {
            Measure::Discrete(d) => d.points[0].len(),
            _ => 1,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Measure::Discrete(_))
    }

    /// Probe parameters for feasibility diagnostics: the support points of a
    /// discrete measure, or `n` equispaced points otherwise.
    pub fn probe_points(&self, n: usize) -> Vec<Vec<Complex64>> {
        let n = n.max(2);
        match self {
            Measure::Discrete(d) => d.points.clone(),
            Measure::Interval { a, b, .. } => (0..n)
                .map(|k| vec![Complex64::new(a + (b - a) * k as f64 / (n - 1) as f64, 0.0)])
                .collect(),
            Measure::ImaginaryAxis { mode, .. } => (0..n)
                .map(|k| {
                    let t = -1.0 + 2.0 * (k as f64 + 0.5) / n as f64;
                    let w = match mode {
                        AxisMode::Tangent => (t * FRAC_PI_2).tan(),
                        AxisMode::Truncated(c) => t * c,
                    };
                    vec![Complex64::new(0.0, w)]
                })
                .collect(),
        }
    }

    /// Integrates a vector-valued function of `p` against the measure with
    /// adaptive quadrature.
    pub fn integrate<F>(&self, dim: usize, f: F, opts: &QuadOptions) -> Result<Integral>
    where
        F: Fn(&[Complex64]) -> Result<Vec<Complex64>> + Sync,
    {
        self.integrate_rule(dim, f, &QuadRule::Adaptive(*opts))
    }

    /// Integrates with an explicit rule. Breakpoints of a fixed rule live in
    /// the integration variable: `p` for intervals, `w` for truncated axes and
    /// `theta` for the tangent substitution. Discrete measures ignore the rule.
    pub fn integrate_rule<F>(&self, dim: usize, f: F, rule: &QuadRule) -> Result<Integral>
    where
        F: Fn(&[Complex64]) -> Result<Vec<Complex64>> + Sync,
    {
        if let QuadRule::Adaptive(opts) = rule {
            opts.validate()?;
        }
        let run = |g: &(dyn Fn(f64) -> Result<Vec<Complex64>> + Sync), a: f64, b: f64| match rule {
            QuadRule::Adaptive(opts) => integrate_interval(g, a, b, dim, opts),
            QuadRule::Fixed(bp) => integrate_fixed(g, bp, dim),
        };
        match self {
            Measure::Interval { a, b, density } => {
                let mut r = run(&|x| f(&[Complex64::new(x, 0.0)]), *a, *b)?;
                scale(&mut r, *density);
                Ok(r)
            }
            Measure::ImaginaryAxis { weight, mode } => {
                let mut r = match *mode {
                    AxisMode::Tangent => run(
                        &|theta: f64| {
                            let (s, c) = theta.sin_cos();
                            let jac = 1.0 / (c * c);
                            let mut v = f(&[Complex64::new(0.0, s / c)])?;
                            v.iter_mut().for_each(|z| *z *= jac);
                            Ok(v)
                        },
                        -FRAC_PI_2,
                        FRAC_PI_2,
                    )?,
                    AxisMode::Truncated(cut) => {
                        if !(cut > 0.0) {
                            return Err(Error::Input("axis truncation must be positive".into()));
                        }
                        run(&|w| f(&[Complex64::new(0.0, w)]), -cut, cut)?
                    }
                };
                scale(&mut r, *weight);
                Ok(r)
            }
            Measure::Discrete(d) => {
                let vals: Vec<Result<Vec<Complex64>>> = d.points.par_iter().map(|p| f(p)).collect();
                let mut weighted = Vec::with_capacity(vals.len());
                for (v, w) in vals.into_iter().zip(&d.weights) {
                    let mut v = v?;
                    if v.len() != dim {
                        return Err(Error::Dimension(format!("integrand returned {} entries, expected {dim}", v.len())));
                    }
                    v.iter_mut().for_each(|z| *z *= *w);
                    weighted.push(v);
                }
                let refs: Vec<&[Complex64]> = weighted.iter().map(|v| v.as_slice()).collect();
                Ok(Integral {
                    value: pairwise_sum(&refs, dim),
                    error: 0.0,
                    intervals: 0,
                    evaluations: d.points.len(),
                    breakpoints: Vec::new(),
                })
            }
        }
    }

    /// Integral of a real scalar function.
    pub fn integrate_scalar<F>(&self, f: F, opts: &QuadOptions) -> Result<(f64, f64)>
    where
        F: Fn(&[Complex64]) -> Result<f64> + Sync,
    {
        let r = self.integrate(1, |p| Ok(vec![Complex64::new(f(p)?, 0.0)]), opts)?;
        Ok((r.value[0].re, r.error))
    }

    /// Entrywise integral of a matrix-valued function with a shared partition.
    pub fn integrate_matrix<F>(&self, shape: (usize, usize), f: F, opts: &QuadOptions) -> Result<(CMat, f64)>
    where
        F: Fn(&[Complex64]) -> Result<CMat> + Sync,
    {
        let dim = shape.0 * shape.1;
        let r = self.integrate(
            dim,
            |p| {
                let m = f(p)?;
                if m.shape() != shape {
                    return Err(Error::Dimension(format!("integrand is {:?}, expected {shape:?}", m.shape())));
                }
                Ok(m.as_slice().to_vec())
            },
            opts,
        )?;
        Ok((CMat::from_column_slice(shape.0, shape.1, &r.value), r.error))
    }
}

fn scale(r: &mut Integral, w: f64) {
    r.value.iter_mut().for_each(|z| *z *= w);
    r.error *= w;
}

/// `(int ||y1(p) - y2(p)||_F^2 dmu)^{1/2}`.
pub fn l2_distance(y1: &dyn OutputOracle, y2: &dyn OutputOracle, mu: &Measure, opts: &QuadOptions) -> Result<f64> {
    if y1.shape() != y2.shape() {
        return Err(Error::Dimension(format!("oracle shapes {:?} vs {:?}", y1.shape(), y2.shape())));
    }
    let (v, _) = mu.integrate_scalar(|p| Ok((y1.eval(p)? - y2.eval(p)?).norm_squared()), opts)?;
    Ok(v.max(0.0).sqrt())
}

/// `(int ||y(p)||_F^2 dmu)^{1/2}`.
pub fn l2_norm(y: &dyn OutputOracle, mu: &Measure, opts: &QuadOptions) -> Result<f64> {
    let (v, _) = mu.integrate_scalar(|p| Ok(y.eval(p)?.norm_squared()), opts)?;
    Ok(v.max(0.0).sqrt())
}
