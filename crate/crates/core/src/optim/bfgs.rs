//! BFGS and L-BFGS with a strong-Wolfe line search.

use std::ops::ControlFlow;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    pub maxit: usize,
    /// Relative output-change tolerance of the outer stop test.
    pub tol: f64,
    pub c1: f64,
    pub c2: f64,
    /// L-BFGS memory; 0 selects full BFGS.
    pub memory: usize,
    /// Relative tolerance of the quadrature inside objective evaluations.
    pub grad_rtol: f64,
    /// Gradient stop `||g||_inf <= grad_tol * |f|`; an exact zero gradient
    /// always stops.
    pub grad_tol: f64,
    /// Stop when an accepted step lowers `f` by at most this relative amount.
    pub stagnation_rtol: f64,
    pub max_line_search_evals: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            maxit: 1000,
            tol: 1e-6,
            c1: 1e-4,
            c2: 0.9,
            memory: 20,
            grad_rtol: 1e-8,
            grad_tol: 1e-9,
            stagnation_rtol: 1e-15,
            max_line_search_evals: 50,
        }
    }
}

impl OptimOptions {
    pub fn validate(&self) -> Result<()> {
        if self.maxit < 1 {
            return Err(Error::Input("maxit must be at least 1".into()));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::Input(format!("Wolfe constants need 0 < c1 < c2 < 1, got {} and {}", self.c1, self.c2)));
        }
        if !(self.tol > 0.0) || !(self.grad_rtol > 0.0) {
            return Err(Error::Input("tolerances must be positive".into()));
        }
        if self.max_line_search_evals < 1 {
            return Err(Error::Input("line search needs at least one evaluation".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    GradientConverged,
    Stagnated,
    MaxIterations,
    LineSearchFailed,
    /// The monitor asked to stop.
    Stopped,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::GradientConverged => "gradient-converged",
            Status::Stagnated => "stagnated",
            Status::MaxIterations => "max-iterations",
            Status::LineSearchFailed => "line-search-failed",
            Status::Stopped => "converged",
        }
    }
}

/// One accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iteration: usize,
    pub value: f64,
    pub grad_inf: f64,
    pub step: f64,
    /// `g^T d` at the start of the step; negative for a descent direction.
    pub slope: f64,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
    pub trace: Vec<IterRecord>,
}

/// Outcome of a single objective evaluation as seen by the optimizer.
enum Trial {
    Ok(f64, Vec<f64>),
    /// Singular model or infinite value: treated as `+inf`.
    Infeasible,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn axpy(x: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + a * di).collect()
}

struct Problem<'a, F> {
    f: &'a mut F,
    evaluations: usize,
}

impl<F> Problem<'_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn eval(&mut self, x: &[f64]) -> Result<Trial> {
        self.evaluations += 1;
        match (self.f)(x) {
            Ok((v, g)) => {
                if v.is_nan() || g.iter().any(|z| z.is_nan()) {
                    return Err(Error::NonFinite("objective or gradient is NaN".into()));
                }
                if v.is_infinite() || g.iter().any(|z| z.is_infinite()) {
                    return Ok(Trial::Infeasible);
                }
                Ok(Trial::Ok(v, g))
            }
            Err(Error::Singular { .. }) => Ok(Trial::Infeasible),
            Err(e) => Err(e),
        }
    }
}

/// Minimizer of the cubic matching values and slopes at `a` and `b`,
/// or `None` if it is not well defined.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    t.is_finite().then_some(t)
}

struct Point {
    a: f64,
    f: f64,
    d: f64,
    g: Vec<f64>,
}

enum Search {
    Accepted(Point),
    Failed,
}

/// Strong-Wolfe line search along `dir` from `x` with value `f0` and
/// slope `d0 < 0`.
fn line_search<F>(prob: &mut Problem<'_, F>, x: &[f64], f0: f64, d0: f64, dir: &[f64], a_init: f64, opts: &OptimOptions) -> Result<Search>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut evals = 0;
    let armijo = |a: f64, f: f64| f <= f0 + opts.c1 * a * d0 && f < f0;
    let curvature = |d: f64| d.abs() <= -opts.c2 * d0;
    // best point satisfying sufficient decrease, used if curvature never holds
    let mut best: Option<Point> = None;
    let keep = |best: &mut Option<Point>, p: &Point| {
        if armijo(p.a, p.f) && best.as_ref().is_none_or(|b| p.f < b.f) {
            *best = Some(Point { a: p.a, f: p.f, d: p.d, g: p.g.clone() });
        }
    };
    let eval_at = |prob: &mut Problem<'_, F>, a: f64| -> Result<Option<Point>> {
        Ok(match prob.eval(&axpy(x, a, dir))? {
            Trial::Ok(f, g) => {
                let d = dot(&g, dir);
                Some(Point { a, f, d, g })
            }
            Trial::Infeasible => None,
        })
    };

    // bracketing phase
    let mut prev = Point { a: 0.0, f: f0, d: d0, g: Vec::new() };
    let mut a = a_init;
    let (mut lo, mut hi): (Point, Option<Point>);
    let mut hi_a: f64;
    let mut first = true;
    loop {
        if evals >= opts.max_line_search_evals {
            return Ok(best.map_or(Search::Failed, Search::Accepted));
        }
        evals += 1;
        match eval_at(prob, a)? {
            None => {
                lo = prev;
                hi = None;
                hi_a = a;
                break;
            }
            Some(p) => {
                keep(&mut best, &p);
                if !armijo(p.a, p.f) || (!first && p.f >= prev.f) {
                    lo = prev;
                    hi_a = p.a;
                    hi = Some(p);
                    break;
                }
                if curvature(p.d) {
                    return Ok(Search::Accepted(p));
                }
                if p.d >= 0.0 {
                    hi_a = prev.a;
                    hi = Some(prev);
                    lo = p;
                    break;
                }
                let next = (2.0 * p.a).min(p.a + 1e10);
                prev = p;
                a = next;
                first = false;
            }
        }
    }

    // zoom phase: lo satisfies sufficient decrease (or is the start point)
    loop {
        if evals >= opts.max_line_search_evals {
            break;
        }
        let width = hi_a - lo.a;
        if width.abs() <= f64::EPSILON * lo.a.abs().max(hi_a.abs()) {
            break;
        }
        let trial = match &hi {
            None => lo.a + 0.25 * width,
            Some(h) => {
                let t = cubic_min(lo.a, lo.f, lo.d, h.a, h.f, h.d).unwrap_or(lo.a + 0.5 * width);
                let (l, u) = if width > 0.0 { (lo.a + 0.1 * width, hi_a - 0.1 * width) } else { (hi_a - 0.1 * width, lo.a + 0.1 * width) };
                let (l, u) = if l <= u { (l, u) } else { (u, l) };
                if t.is_finite() && t > l && t < u {
                    t
                } else {
                    lo.a + 0.5 * width
                }
            }
        };
        evals += 1;
        match eval_at(prob, trial)? {
            None => {
                hi = None;
                hi_a = trial;
            }
            Some(p) => {
                keep(&mut best, &p);
                if !armijo(p.a, p.f) || p.f >= lo.f {
                    hi_a = p.a;
                    hi = Some(p);
                } else {
                    if curvature(p.d) {
                        return Ok(Search::Accepted(p));
                    }
                    if p.d * (hi_a - lo.a) >= 0.0 {
                        hi_a = lo.a;
                        hi = Some(std::mem::replace(&mut lo, p));
                    } else {
                        lo = p;
                    }
                }
            }
        }
    }
    Ok(best.map_or(Search::Failed, Search::Accepted))
}

/// Inverse-Hessian approximation.
enum Hessian {
    Full { n: usize, h: Option<Vec<f64>> },
    Limited { m: usize, pairs: Vec<(Vec<f64>, Vec<f64>, f64)> },
}

impl Hessian {
    fn new(n: usize, memory: usize) -> Self {
        if memory == 0 {
            Hessian::Full { n, h: None }
        } else {
            Hessian::Limited { m: memory, pairs: Vec::new() }
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Hessian::Full { h, .. } => h.is_none(),
            Hessian::Limited { pairs, .. } => pairs.is_empty(),
        }
    }

    fn reset(&mut self) {
        match self {
            Hessian::Full { h, .. } => *h = None,
            Hessian::Limited { pairs, .. } => pairs.clear(),
        }
    }

    /// `-H g`
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        match self {
            Hessian::Full { n, h: Some(h) } => (0..*n).map(|i| -dot(&h[i * n..(i + 1) * n], g)).collect(),
            Hessian::Full { h: None, .. } => g.iter().map(|x| -x).collect(),
            Hessian::Limited { pairs, .. } => {
                let mut q = g.to_vec();
                let mut alphas = Vec::with_capacity(pairs.len());
                for (s, y, rho) in pairs.iter().rev() {
                    let a = rho * dot(s, &q);
                    q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
                    alphas.push(a);
                }
                if let Some((s, y, _)) = pairs.last() {
                    let gamma = dot(s, y) / dot(y, y);
                    q.iter_mut().for_each(|qi| *qi *= gamma);
                }
                for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
                    let b = rho * dot(y, &q);
                    q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
                }
                q.iter_mut().for_each(|qi| *qi = -*qi);
                q
            }
        }
    }

    /// Curvature update; skipped unless `y^T s` is safely positive.
    fn update(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        let scale = dot(&s, &s).sqrt() * dot(&y, &y).sqrt();
        if !(sy > f64::EPSILON * scale) {
            return;
        }
        let rho = 1.0 / sy;
        match self {
            Hessian::Limited { m, pairs } => {
                if pairs.len() == *m {
                    pairs.remove(0);
                }
                pairs.push((s, y, rho));
            }
            Hessian::Full { n, h } => {
                let n = *n;
                let hm = h.get_or_insert_with(|| {
                    let gamma = sy / dot(&y, &y);
                    let mut id = vec![0.0; n * n];
                    (0..n).for_each(|i| id[i * n + i] = gamma);
                    id
                });
                // H+ = (I - rho s y^T) H (I - rho y s^T) + rho s s^T
                let hy: Vec<f64> = (0..n).map(|i| dot(&hm[i * n..(i + 1) * n], &y)).collect();
                let yhy = dot(&y, &hy);
                for i in 0..n {
                    for j in 0..n {
                        hm[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                    }
                }
            }
        }
    }
}

/// Minimizes `f` from `x0`, where `fg(x)` returns the value and gradient.
///
/// A singular model (error [`Error::Singular`]) or an infinite value counts as
/// `+inf` and makes the line search retreat; NaN aborts. `monitor` sees every
/// accepted step and may stop the iteration.
pub fn quasi_newton_minimize<F, M>(mut fg: F, x0: &[f64], opts: &OptimOptions, mut monitor: M) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    M: FnMut(&IterRecord, &[f64]) -> ControlFlow<()>,
{
    opts.validate()?;
    let mut prob = Problem { f: &mut fg, evaluations: 0 };
    let (mut f, mut g) = match prob.eval(x0)? {
        Trial::Ok(f, g) => (f, g),
        Trial::Infeasible => return Err(Error::Input("objective is not finite at the initial point".into())),
    };
    if g.len() != x0.len() {
        return Err(Error::Dimension(format!("gradient has {} entries, x has {}", g.len(), x0.len())));
    }
    let mut x = x0.to_vec();
    let mut hess = Hessian::new(x.len(), opts.memory);
    let mut trace = Vec::new();
    let done = |status, x, f, g, it, prob: &Problem<'_, F>, trace| Minimum {
        x,
        value: f,
        grad: g,
        iterations: it,
        evaluations: prob.evaluations,
        status,
        trace,
    };
    let grad_ok = |f: f64, g: &[f64]| norm_inf(g) <= opts.grad_tol * f.abs();
    if grad_ok(f, &g) {
        return Ok(done(Status::GradientConverged, x, f, g, 0, &prob, trace));
    }
    let mut retried = false;
    let mut it = 0;
    while it < opts.maxit {
        let mut dir = hess.direction(&g);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            hess.reset();
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }
        let a_init = if hess.is_empty() { (1.0 / dot(&g, &g).sqrt()).min(1.0) } else { 1.0 };
        match line_search(&mut prob, &x, f, slope, &dir, a_init, opts)? {
            Search::Failed => {
                if !hess.is_empty() && !retried {
                    hess.reset();
                    retried = true;
                    continue;
                }
                return Ok(done(Status::LineSearchFailed, x, f, g, it, &prob, trace));
            }
            Search::Accepted(p) => {
                retried = false;
                it += 1;
                let x_new = axpy(&x, p.a, &dir);
                let s: Vec<f64> = dir.iter().map(|d| p.a * d).collect();
                let y: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
                hess.update(s, y);
                let decrease = f - p.f;
                let f_old = f;
                x = x_new;
                f = p.f;
                g = p.g;
                let rec = IterRecord {
                    iteration: it,
                    value: f,
                    grad_inf: norm_inf(&g),
                    step: p.a,
                    slope,
                };
                trace.push(rec);
                if monitor(&rec, &x).is_break() {
                    return Ok(done(Status::Stopped, x, f, g, it, &prob, trace));
                }
                if grad_ok(f, &g) {
                    return Ok(done(Status::GradientConverged, x, f, g, it, &prob, trace));
                }
                if decrease <= opts.stagnation_rtol * f_old.abs().max(f.abs()) {
                    return Ok(done(Status::Stagnated, x, f, g, it, &prob, trace));
                }
            }
        }
    }
    Ok(done(Status::MaxIterations, x, f, g, it, &prob, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cont(_: &IterRecord, _: &[f64]) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((f, g))
    }

    #[test]
    fn quadratic_in_few_steps() {
        for memory in [0, 5] {
            let opts = OptimOptions { memory, ..Default::default() };
            let r = quasi_newton_minimize(|x| Ok((dot(x, x), x.iter().map(|v| 2.0 * v).collect())), &[3.0, -4.0, 0.5], &opts, cont).unwrap();
            assert!(norm_inf(&r.x) < 1e-10, "{:?}", r.x);
            // exact line search on a quadratic: converged to roundoff within three steps
            assert!(r.trace.iter().take(3).any(|t| t.value < 1e-20), "{:?}", r.trace);
        }
    }

    #[test]
    fn rosenbrock_minimum() {
        for memory in [0, 10] {
            let opts = OptimOptions { memory, ..Default::default() };
            let r = quasi_newton_minimize(rosenbrock, &[-1.2, 1.0], &opts, cont).unwrap();
            assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?} {:?}", r.x, r.status);
            for w in r.trace.windows(2) {
                assert!(w[1].value < w[0].value);
            }
            assert!(r.trace.iter().all(|t| t.slope < 0.0));
        }
    }

    #[test]
    fn constant_function_returns_start() {
        let r = quasi_newton_minimize(|_| Ok((3.0, vec![0.0, 0.0])), &[1.0, 2.0], &OptimOptions::default(), cont).unwrap();
        assert_eq!(r.x, vec![1.0, 2.0]);
        assert_eq!(r.status, Status::GradientConverged);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn retreats_from_infeasible_region() {
        // f = x^2 - 4x, infinite for x > 1.5: the minimizer sits on the wall
        let f = |x: &[f64]| {
            if x[0] > 1.5 {
                Err(Error::Singular { p: vec![], cond: f64::INFINITY })
            } else {
                Ok((x[0] * x[0] - 4.0 * x[0], vec![2.0 * x[0] - 4.0]))
            }
        };
        let r = quasi_newton_minimize(f, &[0.0], &OptimOptions::default(), cont).unwrap();
        assert!(r.x[0] <= 1.5 && r.value < 0.0);
        for w in r.trace.windows(2) {
            assert!(w[1].value < w[0].value);
        }
    }

    #[test]
    fn nan_aborts() {
        let r = quasi_newton_minimize(|_| Ok((f64::NAN, vec![0.0])), &[0.0], &OptimOptions::default(), cont);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn monitor_can_stop() {
        let r = quasi_newton_minimize(rosenbrock, &[-1.2, 1.0], &OptimOptions::default(), |rec: &IterRecord, _: &[f64]| {
            if rec.iteration == 3 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .unwrap();
        assert_eq!((r.iterations, r.status), (3, Status::Stopped));
    }

    #[test]
    fn invalid_options() {
        let bad = OptimOptions { c1: 0.95, ..Default::default() };
        assert!(quasi_newton_minimize(rosenbrock, &[0.0, 0.0], &bad, cont).is_err());
    }
}
