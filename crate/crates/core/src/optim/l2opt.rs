//! The outer fitting loop: quasi-Newton steps on the output error, stopped
//! when the model output stops changing.

use std::ops::ControlFlow;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measure::{Measure, QuadRule};
use crate::model::Ddrom;
use crate::objective::objective_and_gradients;
use crate::optim::bfgs::{quasi_newton_minimize, IterRecord, OptimOptions, Status};
use crate::optim::pack::{pack, pack_gradient, unpack, Layout};
use crate::oracle::OutputOracle;
use crate::quadrature::{refine, QuadOptions};

#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: Ddrom,
    pub initial_value: f64,
    pub final_value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
    pub trace: Vec<IterRecord>,
    /// Relative output change `||y_{k-1} - y_k|| / ||y_k||` after each step.
    pub output_changes: Vec<f64>,
    /// Breakpoints of the frozen partition used for continuous measures.
    pub breakpoints: Vec<f64>,
}

impl FitReport {
    /// True if the output-change test stopped the iteration.
    pub fn converged(&self) -> bool {
        matches!(self.status, Status::Stopped | Status::GradientConverged)
    }
}

/// Relative change `||y1 - y2|| / ||y2||` between two model outputs.
pub fn relative_output_change(prev: &Ddrom, next: &Ddrom, mu: &Measure, rule: &QuadRule) -> Result<f64> {
    let r = mu.integrate_rule(
        2,
        |p| {
            let y2 = next.output(p)?;
            let d = (prev.output(p)? - &y2).norm_squared();
            Ok(vec![Complex64::new(d, 0.0), Complex64::new(y2.norm_squared(), 0.0)])
        },
        rule,
    )?;
    let (num, den) = (r.value[0].re.max(0.0), r.value[1].re.max(0.0));
    Ok(if den > 0.0 { (num / den).sqrt() } else if num > 0.0 { f64::INFINITY } else { 0.0 })
}

/// Fits `init` to `y` over `mu`.
///
/// Continuous measures are integrated on a partition chosen adaptively for
/// the initial model and then held fixed (each interval split in two), so the
/// objective is a smooth function of the coefficients throughout the run.
/// `observer` sees every accepted iterate.
pub fn l2_opt_psf<O>(y: &dyn OutputOracle, init: &Ddrom, mu: &Measure, opts: &OptimOptions, mut observer: O) -> Result<FitReport>
where
    O: FnMut(&Ddrom, &IterRecord),
{
    opts.validate()?;
    let adaptive = QuadRule::Adaptive(QuadOptions::with_rtol(opts.grad_rtol));
    let first = objective_and_gradients(y, init, mu, &adaptive).map_err(|e| match e {
        Error::Singular { p, cond } => Error::Input(format!("initial model is singular at {p:?} (condition {cond:e})")),
        e => e,
    })?;
    let rule = if mu.is_discrete() { adaptive } else { QuadRule::Fixed(refine(&first.breakpoints, 2)) };
    let layout = Layout::of(init);
    let initial_value = objective_and_gradients(y, init, mu, &rule)?.value;

    let fg = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let m = unpack(init, x)?;
        let ev = objective_and_gradients(y, &m, mu, &rule)?;
        Ok((ev.value, pack_gradient(&ev.grad, &layout)))
    };
    let mut prev = init.clone();
    let mut changes = Vec::new();
    let mut failure: Option<Error> = None;
    let monitor = |rec: &IterRecord, x: &[f64]| -> ControlFlow<()> {
        let next = match unpack(init, x) {
            Ok(m) => m,
            Err(e) => {
                failure = Some(e);
                return ControlFlow::Break(());
            }
        };
        observer(&next, rec);
        let change = match relative_output_change(&prev, &next, mu, &rule) {
            Ok(c) => c,
            Err(e) => {
                failure = Some(e);
                return ControlFlow::Break(());
            }
        };
        log::debug!("iteration {} J={:.6e} |g|={:.3e} step={:.3e} change={:.3e}", rec.iteration, rec.value, rec.grad_inf, rec.step, change);
        changes.push(change);
        prev = next;
        if change <= opts.tol {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    };
    let min = quasi_newton_minimize(fg, &pack(init), opts, monitor)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(FitReport {
        model: unpack(init, &min.x)?,
        initial_value,
        final_value: min.value,
        iterations: min.iterations,
        evaluations: min.evaluations,
        status: min.status,
        trace: min.trace,
        output_changes: changes,
        breakpoints: match rule {
            QuadRule::Fixed(bp) => bp,
            QuadRule::Adaptive(_) => Vec::new(),
        },
    })
}
