#![allow(dead_code)]

use ddrom::linalg::{to_complex, CMat, RMat};
use ddrom::{Complex64, DiscretePoints, Ddrom, Fom, Measure, PsfOperator, ScalarFn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const A_FNS: [ScalarFn; 3] = [
    ScalarFn::ONE,
    ScalarFn::Monomial { component: 0, exponent: 1, shift: 0.0 },
    ScalarFn::Monomial { component: 0, exponent: 2, shift: 0.5 },
];

pub fn rmat(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> CMat {
    to_complex(&RMat::from_fn(r, c, |_, _| scale * rng.random_range(-1.0..1.0)))
}

pub fn cmat(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> CMat {
    CMat::from_fn(r, c, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale)
}

/// Random model whose `A(p)` stays well conditioned for `|p| <= 1`: a
/// dominant shifted identity in the constant term and small further terms.
pub fn random_model(rng: &mut ChaCha8Rng, r: usize, q_a: usize, shape: (usize, usize), complex: bool) -> Ddrom {
    let m = |rng: &mut ChaCha8Rng, a: usize, b: usize, s: f64| if complex { cmat(rng, a, b, s) } else { rmat(rng, a, b, s) };
    let mut terms = Vec::new();
    for (i, f) in A_FNS.iter().take(q_a).enumerate() {
        let mut coeff = m(rng, r, r, if i == 0 { 0.5 } else { 0.3 });
        if i == 0 {
            coeff += CMat::identity(r, r) * c(3.0);
        }
        terms.push((*f, coeff));
    }
    let (n_o, n_f) = shape;
    Ddrom::new(
        PsfOperator::new(terms, 1).unwrap(),
        PsfOperator::new(vec![(ScalarFn::ONE, m(rng, r, n_f, 1.0)), (A_FNS[1], m(rng, r, n_f, 0.5))], 1).unwrap(),
        PsfOperator::new(vec![(ScalarFn::ONE, m(rng, n_o, r, 1.0))], 1).unwrap(),
    )
    .unwrap()
}

/// Conjugation-closed discrete measure with `n` points in the unit disk
/// (`n` odd puts one point on the real axis).
pub fn random_points(rng: &mut ChaCha8Rng, n: usize, complex: bool) -> DiscretePoints {
    let mut pts = Vec::new();
    let mut w = Vec::new();
    while pts.len() < n {
        let re = rng.random_range(-0.9..0.9);
        let weight = rng.random_range(0.5..1.5);
        if complex && pts.len() + 2 <= n {
            let im = rng.random_range(0.05..0.4);
            pts.push(vec![Complex64::new(re, im)]);
            pts.push(vec![Complex64::new(re, -im)]);
            w.extend([weight, weight]);
        } else {
            pts.push(vec![c(re)]);
            w.push(weight);
        }
    }
    DiscretePoints::new(pts, w).unwrap()
}

/// A random gradient-check instance: data from a real "truth" model, a
/// model to differentiate at, and a conjugation-closed discrete measure.
pub struct Instance {
    pub truth: Ddrom,
    pub model: Ddrom,
    pub points: DiscretePoints,
    pub mu: Measure,
}

pub fn random_instance(seed: u64, r: usize, q_a: usize, complex: bool, n_points: usize) -> Instance {
    let mut g = rng(seed);
    let truth = random_model(&mut g, r + 1, 2, (1, 1), false);
    let model = random_model(&mut g, r, q_a, (1, 1), complex);
    let points = random_points(&mut g, n_points, true);
    Instance {
        truth,
        model,
        mu: Measure::Discrete(points.clone()),
        points,
    }
}

pub fn orthonormal(rng: &mut ChaCha8Rng, n: usize, r: usize) -> RMat {
    RMat::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0)).qr().q()
}

/// Random separable FOM with families `A_FNS[..q_a]`, one-term `B` and `C`.
pub fn random_fom(rng: &mut ChaCha8Rng, n: usize, q_a: usize, n_f: usize, n_o: usize) -> Fom {
    let terms = (0..q_a)
        .map(|i| {
            let mut m = rmat(rng, n, n, 1.0);
            if i == 0 {
                m += CMat::identity(n, n) * c(n as f64);
            }
            (A_FNS[i], m)
        })
        .collect();
    Fom::separable(
        PsfOperator::new(terms, 1).unwrap(),
        PsfOperator::single(ScalarFn::ONE, rmat(rng, n, n_f, 1.0), 1).unwrap(),
        PsfOperator::single(ScalarFn::ONE, rmat(rng, n_o, n, 1.0), 1).unwrap(),
    )
    .unwrap()
}
