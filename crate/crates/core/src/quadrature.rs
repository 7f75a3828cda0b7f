//! Adaptive Gauss-Kronrod (G7, K15) quadrature for vector-valued integrands
//! and a fixed-tree pairwise summation used by every reduction.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            rtol: 1e-8,
            atol: 1e-12,
            max_intervals: 2048,
        }
    }
}

impl QuadOptions {
    pub fn with_rtol(rtol: f64) -> Self {
        QuadOptions { rtol, ..Self::default() }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.max_intervals >= 1) {
            return Err(Error::Input(format!("invalid quadrature tolerances {self:?}")));
        }
        Ok(())
    }
}

/// Value of a (vector) integral with its absolute error estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Integral {
    pub value: Vec<Complex64>,
    pub error: f64,
    pub intervals: usize,
    pub evaluations: usize,
    /// Final partition, `intervals + 1` increasing breakpoints. Empty for
    /// discrete sums.
    pub breakpoints: Vec<f64>,
}

/// The 15 Kronrod abscissae of `[a, b]`, in a fixed order.
fn nodes(a: f64, b: f64) -> [f64; 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [0.0; 15];
    for k in 0..7 {
        x[2 * k] = c - h * XGK[k];
        x[2 * k + 1] = c + h * XGK[k];
    }
    x[14] = c;
    x
}

struct Piece {
    a: f64,
    b: f64,
    value: Vec<Complex64>,
    error: f64,
}

fn rule(a: f64, b: f64, vals: &[Vec<Complex64>], dim: usize) -> Piece {
    let h = 0.5 * (b - a);
    let mut k15 = vec![Complex64::new(0.0, 0.0); dim];
    let mut g7 = vec![Complex64::new(0.0, 0.0); dim];
    for d in 0..dim {
        let mut k = vals[14][d] * WGK[7];
        let mut g = vals[14][d] * WG[3];
        for j in 0..7 {
            let pair = vals[2 * j][d] + vals[2 * j + 1][d];
            k += pair * WGK[j];
            if j % 2 == 1 {
                g += pair * WG[j / 2];
            }
        }
        k15[d] = k * h;
        g7[d] = g * h;
    }
    let error = k15.iter().zip(&g7).map(|(k, g)| (k - g).norm()).fold(0.0, f64::max);
    Piece { a, b, value: k15, error }
}

fn eval_batch<F>(f: &F, xs: &[f64], dim: usize) -> Result<Vec<Vec<Complex64>>>
where
    F: Fn(f64) -> Result<Vec<Complex64>> + Sync,
{
    let results: Vec<Result<Vec<Complex64>>> = xs.par_iter().map(|&x| f(x)).collect();
    let mut out = Vec::with_capacity(xs.len());
    for (x, r) in xs.iter().zip(results) {
        let v = r?;
        if v.len() != dim {
            return Err(Error::Dimension(format!("integrand returned {} entries, expected {dim}", v.len())));
        }
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(format!("integrand at {x}")));
        }
        out.push(v);
    }
    Ok(out)
}

/// Adaptively integrates `f` over `[a, b]`.
///
/// All entries share one partition; the interval with the largest
/// `max_entry |K15 - G7|` is bisected until the summed error is below
/// `max(atol, rtol * max_entry |I|)`.
pub fn integrate_interval<F>(f: F, a: f64, b: f64, dim: usize, opts: &QuadOptions) -> Result<Integral>
where
    F: Fn(f64) -> Result<Vec<Complex64>> + Sync,
{
    opts.validate()?;
    if !(a < b) {
        return Err(Error::Input(format!("empty or reversed interval [{a}, {b}]")));
    }
    let mut pieces = {
        let x = nodes(a, b);
        let v = eval_batch(&f, &x, dim)?;
        vec![rule(a, b, &v, dim)]
    };
    let mut evaluations = 15;
    loop {
        let total = summed(&pieces, dim);
        let err: f64 = pairwise_sum_real(&pieces.iter().map(|p| p.error).collect::<Vec<_>>());
        let scale = total.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if err <= opts.atol.max(opts.rtol * scale) {
            let mut breakpoints: Vec<f64> = pieces.iter().map(|p| p.a).collect();
            breakpoints.push(b);
            return Ok(Integral {
                value: total,
                error: err,
                intervals: pieces.len(),
                evaluations,
                breakpoints,
            });
        }
        if pieces.len() >= opts.max_intervals {
            return Err(Error::Quadrature {
                intervals: pieces.len(),
                error: err,
                estimate: total,
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .fold(0, |best, (i, p)| if p.error > pieces[best].error { i } else { best });
        let old = pieces.remove(worst);
        let mid = 0.5 * (old.a + old.b);
        if !(old.a < mid && mid < old.b) {
            return Err(Error::Quadrature {
                intervals: pieces.len() + 1,
                error: err,
                estimate: total,
            });
        }
        let mut xs = nodes(old.a, mid).to_vec();
        xs.extend_from_slice(&nodes(mid, old.b));
        let v = eval_batch(&f, &xs, dim)?;
        evaluations += 30;
        let left = rule(old.a, mid, &v[..15], dim);
        let right = rule(mid, old.b, &v[15..], dim);
        pieces.insert(worst, right);
        pieces.insert(worst, left);
    }
}

/// Applies the K15 rule on each interval of a fixed partition, without
/// refinement. The result is a smooth function of the integrand values, which
/// keeps objectives seen by an optimizer free of partition jumps.
pub fn integrate_fixed<F>(f: F, breakpoints: &[f64], dim: usize) -> Result<Integral>
where
    F: Fn(f64) -> Result<Vec<Complex64>> + Sync,
{
    if breakpoints.len() < 2 || breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Input("partition needs at least two increasing breakpoints".into()));
    }
    let xs: Vec<f64> = breakpoints.windows(2).flat_map(|w| nodes(w[0], w[1])).collect();
    let v = eval_batch(&f, &xs, dim)?;
    let pieces: Vec<Piece> = breakpoints
        .windows(2)
        .zip(v.chunks(15))
        .map(|(w, vals)| rule(w[0], w[1], vals, dim))
        .collect();
    let error = pairwise_sum_real(&pieces.iter().map(|p| p.error).collect::<Vec<_>>());
    Ok(Integral {
        value: summed(&pieces, dim),
        error,
        intervals: pieces.len(),
        evaluations: xs.len(),
        breakpoints: breakpoints.to_vec(),
    })
}

/// Splits every interval of a partition into `k` equal parts.
pub fn refine(breakpoints: &[f64], k: usize) -> Vec<f64> {
    let k = k.max(1);
    let mut out = Vec::with_capacity((breakpoints.len() - 1) * k + 1);
    for w in breakpoints.windows(2) {
        for j in 0..k {
            out.push(w[0] + (w[1] - w[0]) * j as f64 / k as f64);
        }
    }
    if let Some(&last) = breakpoints.last() {
        out.push(last);
    }
    out
}

fn summed(pieces: &[Piece], dim: usize) -> Vec<Complex64> {
    let vals: Vec<&[Complex64]> = pieces.iter().map(|p| p.value.as_slice()).collect();
    pairwise_sum(&vals, dim)
}

/// Sums vectors with a balanced binary tree over their given order. The tree
/// depends only on the number of terms, so results are reproducible
/// regardless of how the terms were computed.
pub fn pairwise_sum(terms: &[&[Complex64]], dim: usize) -> Vec<Complex64> {
    match terms.len() {
        0 => vec![Complex64::new(0.0, 0.0); dim],
        1 => terms[0].to_vec(),
        n => {
            let (l, r) = terms.split_at(n / 2);
            let mut a = pairwise_sum(l, dim);
            let b = pairwise_sum(r, dim);
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        }
    }
}

pub fn pairwise_sum_real(terms: &[f64]) -> f64 {
    match terms.len() {
        0 => 0.0,
        1 => terms[0],
        n => {
            let (l, r) = terms.split_at(n / 2);
            pairwise_sum_real(l) + pairwise_sum_real(r)
        }
    }
}
