//! The output-error objective `J = int ||y(p) - y_r(p)||_F^2 dmu` and its
//! gradients with respect to every coefficient matrix of a model.
//!
//! For a real perturbation direction, the gradient with respect to the
//! coefficient `A_i` of the term `alpha_i` is
//!
//! ```text
//! G_A_i =  2 int conj(alpha_i(p)) x_d(p) (y(p) - y_r(p)) x(p)^* dmu
//! G_B_j = -2 int conj(beta_j(p))  x_d(p) (y(p) - y_r(p))        dmu
//! G_C_k = -2 int conj(gamma_k(p))        (y(p) - y_r(p)) x(p)^* dmu
//! ```
//!
//! where `x` is the state and `x_d` the dual state. A complex coefficient is
//! treated as two independent real matrices; its real-coordinate gradient is
//! `(Re G, Im G)`, which is what the entries of [`GradientBundle`] hold.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::measure::{DiscretePoints, Measure, QuadRule};
use crate::model::Ddrom;
use crate::oracle::OutputOracle;

/// One gradient matrix per term of each operator.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub a: Vec<CMat>,
    pub b: Vec<CMat>,
    pub c: Vec<CMat>,
}

impl GradientBundle {
    pub fn zeros_like(m: &Ddrom) -> Self {
        let z = |op: &crate::operator::PsfOperator| vec![CMat::zeros(op.rows(), op.cols()); op.num_terms()];
        GradientBundle {
            a: z(m.a_op()),
            b: z(m.b_op()),
            c: z(m.c_op()),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &CMat> {
        self.a.iter().chain(&self.b).chain(&self.c)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut CMat> {
        self.a.iter_mut().chain(self.b.iter_mut()).chain(self.c.iter_mut())
    }

    /// Largest absolute real or imaginary entry.
    pub fn max_abs(&self) -> f64 {
        self.iter()
            .flat_map(|m| m.iter())
            .map(|z| z.re.abs().max(z.im.abs()))
            .fold(0.0, f64::max)
    }
}

/// Worst per-matrix relative deviation between two bundles of equal shape:
/// `max |g - h| / max(max |g|, max |h|)`, with real and imaginary parts
/// compared separately. Returns the value and a label of the worst matrix.
pub fn max_relative_deviation(g: &GradientBundle, h: &GradientBundle) -> (f64, String) {
    let mut worst = (0.0, String::new());
    for (family, gs, hs) in [("A", &g.a, &h.a), ("B", &g.b, &h.b), ("C", &g.c, &h.c)] {
        for (t, (gm, hm)) in gs.iter().zip(hs).enumerate() {
            let parts = |m: &CMat| m.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
            let diff = gm
                .iter()
                .zip(hm.iter())
                .map(|(x, y)| (x.re - y.re).abs().max((x.im - y.im).abs()))
                .fold(0.0, f64::max);
            let scale = parts(gm).max(parts(hm)).max(f64::MIN_POSITIVE);
            let dev = diff / scale;
            if dev > worst.0 || dev.is_nan() {
                worst = (dev, format!("{family}[{t}]"));
            }
        }
    }
    worst
}

/// Objective value, gradients and quadrature diagnostics from one pass.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub grad: GradientBundle,
    /// Absolute quadrature error estimate shared by all entries.
    pub error: f64,
    /// Largest imaginary part dropped when a real model's gradient is taken
    /// as real.
    pub imag_residue: f64,
    pub breakpoints: Vec<f64>,
}

fn check_shapes(y: &dyn OutputOracle, m: &Ddrom, mu: &Measure) -> Result<()> {
    let ys = y.shape();
    if ys != (m.n_outputs(), m.n_inputs()) {
        return Err(Error::Dimension(format!(
            "data is {ys:?}, model output is {:?}",
            (m.n_outputs(), m.n_inputs())
        )));
    }
    if y.param_dim() != m.param_dim() || mu.param_dim() != m.param_dim() {
        return Err(Error::Dimension("data, model and measure disagree on parameter dimension".into()));
    }
    Ok(())
}

/// `J = int ||y - y_r||_F^2 dmu`.
pub fn objective(y: &dyn OutputOracle, m: &Ddrom, mu: &Measure, rule: &QuadRule) -> Result<f64> {
    check_shapes(y, m, mu)?;
    let r = mu.integrate_rule(
        1,
        |p| {
            let e = (y.eval(p)? - m.output(p)?).norm_squared();
            Ok(vec![Complex64::new(e, 0.0)])
        },
        rule,
    )?;
    Ok(r.value[0].re)
}

/// Gradients of `J` with respect to all coefficient matrices.
pub fn gradients(y: &dyn OutputOracle, m: &Ddrom, mu: &Measure, rule: &QuadRule) -> Result<GradientBundle> {
    Ok(objective_and_gradients(y, m, mu, rule)?.grad)
}

/// `J` and all gradients from a single quadrature pass: state, dual state and
/// output are computed once per node, and every entry shares the partition.
pub fn objective_and_gradients(y: &dyn OutputOracle, m: &Ddrom, mu: &Measure, rule: &QuadRule) -> Result<Evaluation> {
    check_shapes(y, m, mu)?;
    let (a, b, c) = (m.a_op(), m.b_op(), m.c_op());
    let r = m.order();
    let (n_o, n_f) = (m.n_outputs(), m.n_inputs());
    let sizes = [r * r, r * n_f, n_o * r];
    let dim = 1 + a.num_terms() * sizes[0] + b.num_terms() * sizes[1] + c.num_terms() * sizes[2];

    let integrand = |p: &[Complex64]| -> Result<Vec<Complex64>> {
        let node = m.solve_node(p)?;
        let res = y.eval(p)? - &node.output;
        let xs = node.state.adjoint();
        let ka = &node.dual * &res * &xs;
        let kb = &node.dual * &res;
        let kc = &res * &xs;
        let mut out = Vec::with_capacity(dim);
        out.push(Complex64::new(res.norm_squared(), 0.0));
        for (w, k, s) in [(a.weights(p)?, &ka, 2.0), (b.weights(p)?, &kb, -2.0), (c.weights(p)?, &kc, -2.0)] {
            for wt in w {
                let f = wt.conj() * s;
                out.extend(k.iter().map(|z| f * z));
            }
        }
        Ok(out)
    };
    let integral = mu.integrate_rule(dim, integrand, rule)?;

    let mut grad = GradientBundle::zeros_like(m);
    let mut off = 1;
    for mats in [&mut grad.a, &mut grad.b, &mut grad.c] {
        for g in mats.iter_mut() {
            let len = g.len();
            g.as_mut_slice().copy_from_slice(&integral.value[off..off + len]);
            off += len;
        }
    }
    let mut imag_residue: f64 = 0.0;
    if m.is_real() {
        for g in grad.iter_mut() {
            for z in g.iter_mut() {
                imag_residue = imag_residue.max(z.im.abs());
                z.im = 0.0;
            }
        }
    }
    Ok(Evaluation {
        value: integral.value[0].re,
        grad,
        error: integral.error,
        imag_residue,
        breakpoints: integral.breakpoints,
    })
}

/// Central finite differences of `J` over every real coordinate of every
/// coefficient; imaginary coordinates are included for complex models.
pub fn fd_gradients(y: &dyn OutputOracle, m: &Ddrom, mu: &Measure, h: f64, rule: &QuadRule) -> Result<GradientBundle> {
    if !(h > 0.0) {
        return Err(Error::Input(format!("finite-difference step must be positive, got {h}")));
    }
    let complex = !m.is_real();
    let mut grad = GradientBundle::zeros_like(m);
    let mut work = m.clone();
    for op in 0..3 {
        let terms = [m.a_op(), m.b_op(), m.c_op()][op].num_terms();
        for t in 0..terms {
            let len = [m.a_op(), m.b_op(), m.c_op()][op].coeff(t).len();
            for e in 0..len {
                for imag in [false, true] {
                    if imag && !complex {
                        continue;
                    }
                    let dir = if imag { Complex64::new(0.0, h) } else { Complex64::new(h, 0.0) };
                    let orig = work.ops_mut()[op].coeffs_mut()[t].as_slice()[e];
                    work.ops_mut()[op].coeffs_mut()[t].as_mut_slice()[e] = orig + dir;
                    let jp = objective(y, &work, mu, rule)?;
                    work.ops_mut()[op].coeffs_mut()[t].as_mut_slice()[e] = orig - dir;
                    let jm = objective(y, &work, mu, rule)?;
                    work.ops_mut()[op].coeffs_mut()[t].as_mut_slice()[e] = orig;
                    let d = (jp - jm) / (2.0 * h);
                    let g = match op {
                        0 => &mut grad.a[t],
                        1 => &mut grad.b[t],
                        _ => &mut grad.c[t],
                    };
                    let z = &mut g.as_mut_slice()[e];
                    if imag {
                        z.im = d;
                    } else {
                        z.re = d;
                    }
                }
            }
        }
    }
    Ok(grad)
}

/// Richardson extrapolation of central differences over decreasing steps
/// `hs`, cancelling successive even powers of `h`.
pub fn fd_gradients_richardson(y: &dyn OutputOracle, m: &Ddrom, mu: &Measure, hs: &[f64], rule: &QuadRule) -> Result<GradientBundle> {
    if hs.is_empty() {
        return Err(Error::Input("Richardson extrapolation needs at least one step".into()));
    }
    let mut table: Vec<GradientBundle> = hs
        .iter()
        .map(|&h| fd_gradients(y, m, mu, h, rule))
        .collect::<Result<_>>()?;
    for level in 1..hs.len() {
        let mut next = Vec::with_capacity(table.len() - 1);
        for i in 0..table.len() - 1 {
            let ratio = (hs[i] / hs[i + level]).powi(2 * level as i32);
            let mut g = table[i + 1].clone();
            for (dst, coarse) in g.iter_mut().zip(table[i].iter()) {
                dst.zip_apply(coarse, |f, c| *f = (*f * ratio - c) / (ratio - 1.0));
            }
            next.push(g);
        }
        table = next;
    }
    Ok(table.remove(0))
}

/// Objective and gradients over a discrete point set as plain weighted sums,
/// with separate state and dual solves per point and sequential accumulation.
/// Independent of the measure and quadrature code; used to cross-check it.
pub fn discrete_direct(y: &dyn OutputOracle, m: &Ddrom, points: &DiscretePoints) -> Result<(f64, GradientBundle)> {
    let mut value = 0.0;
    let mut grad = GradientBundle::zeros_like(m);
    for (p, &w) in points.points().iter().zip(points.weights()) {
        let x = m.solve_state(p)?;
        let xd = m.dual_state(p)?;
        let res = y.eval(p)? - m.c_op().eval(p)? * &x;
        value += w * res.norm_squared();
        for (f, g) in m.a_op().fns().iter().zip(grad.a.iter_mut()) {
            *g += (&xd * &res * x.adjoint()) * (f.eval(p).conj() * 2.0 * w);
        }
        for (f, g) in m.b_op().fns().iter().zip(grad.b.iter_mut()) {
            *g -= (&xd * &res) * (f.eval(p).conj() * 2.0 * w);
        }
        for (f, g) in m.c_op().fns().iter().zip(grad.c.iter_mut()) {
            *g -= (&res * x.adjoint()) * (f.eval(p).conj() * 2.0 * w);
        }
    }
    if m.is_real() {
        for g in grad.iter_mut() {
            g.iter_mut().for_each(|z| z.im = 0.0);
        }
    }
    Ok((value, grad))
}
