//! Ready-made benchmark setups: full-order model, parameter domain,
//! training and test sets, reduced-model families and the standard method
//! pipelines (reduced basis, POD, and fitted models).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::baselines::{pod, strong_greedy};
use crate::error::{Error, Result};
use crate::fom::Fom;
use crate::linalg::CMat;
use crate::measure::{DiscretePoints, Measure};
use crate::model::{Ddrom, Families};
use crate::optim::{l2_opt_psf, FitReport, IterRecord, OptimOptions};
use crate::oracle::{Cached, OutputOracle};
use crate::problems::fem::{
    build_convection_fom, build_nonsep_fom, build_poisson_fom, build_thermal_block_fom, linspace, tensor_grid,
    Grid2D, ANGLE_RANGE, CONVECTION_DIFFUSION, DIFFUSION_RANGE,
};
use crate::problems::lti::{logspace, perturb, random_stable_system, relative_mse, stable_part, FrequencySampleSet, LtiSystem, StablePart};
use crate::scalar::ScalarFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Benchmark {
    Poisson,
    Nonsep,
    Convection,
    ThermalBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Rb,
    Pod,
    /// Fitted model with the full-order model's own structure.
    L2OptSp,
    /// Fitted model with enlarged families.
    L2OptExt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Rb,
    Pod,
    Canonical,
    /// For extended fits: start from the structure-preserving fit.
    Sp,
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [Benchmark::Poisson, Benchmark::Nonsep, Benchmark::Convection, Benchmark::ThermalBlock];

    pub fn name(&self) -> &'static str {
        match self {
            Benchmark::Poisson => "poisson",
            Benchmark::Nonsep => "nonsep",
            Benchmark::Convection => "convection",
            Benchmark::ThermalBlock => "thermal-block",
        }
    }

    pub fn param_dim(&self) -> usize {
        match self {
            Benchmark::ThermalBlock => 4,
            _ => 1,
        }
    }

    pub fn range(&self) -> (f64, f64) {
        match self {
            Benchmark::Poisson | Benchmark::ThermalBlock => DIFFUSION_RANGE,
            Benchmark::Nonsep => (0.0, 1.0),
            Benchmark::Convection => ANGLE_RANGE,
        }
    }

    pub fn build_fom(&self, grid: &Grid2D) -> Result<Fom> {
        match self {
            Benchmark::Poisson => build_poisson_fom(grid),
            Benchmark::Nonsep => build_nonsep_fom(grid),
            Benchmark::Convection => build_convection_fom(grid, CONVECTION_DIFFUSION),
            Benchmark::ThermalBlock => build_thermal_block_fom(grid),
        }
    }

    /// Training parameters of size `size` per axis: equispaced over the
    /// range, tensorized for the thermal block.
    pub fn train_set(&self, size: usize) -> Vec<Vec<Complex64>> {
        let (a, b) = self.range();
        tensor_grid(a, b, size, self.param_dim())
    }

    pub fn default_train_size(&self) -> usize {
        match self {
            Benchmark::ThermalBlock => 4,
            _ => 100,
        }
    }

    /// Reporting grid with trapezoid weights (1-D) or uniform weights.
    pub fn test_set(&self, size: usize) -> (Vec<Vec<Complex64>>, Vec<f64>) {
        let (a, b) = self.range();
        let pts = tensor_grid(a, b, size, self.param_dim());
        let weights = if self.param_dim() == 1 && size > 1 {
            (0..size).map(|k| if k == 0 || k + 1 == size { 0.5 } else { 1.0 }).collect()
        } else {
            vec![1.0; pts.len()]
        };
        (pts, weights)
    }

    pub fn default_test_size(&self) -> usize {
        match self {
            Benchmark::ThermalBlock => 5,
            _ => 1000,
        }
    }

    pub fn default_order(&self) -> usize {
        match self {
            Benchmark::Poisson => 2,
            _ => 4,
        }
    }

    /// Lebesgue measure on the range for 1-D problems; the uniform discrete
    /// measure on `train` for the thermal block.
    pub fn fit_measure(&self, train: &[Vec<Complex64>]) -> Result<Measure> {
        match self {
            Benchmark::ThermalBlock => Ok(Measure::Discrete(DiscretePoints::uniform(train.to_vec())?)),
            _ => {
                let (a, b) = self.range();
                Measure::interval(a, b, 1.0)
            }
        }
    }

    /// Reduced-model families for a fitted method.
    pub fn families(&self, method: Method) -> Result<Families> {
        let one = vec![ScalarFn::ONE];
        Ok(match (self, method) {
            (_, Method::Rb | Method::Pod) => {
                return Err(Error::Input("projection methods take the full-order structure".into()))
            }
            (Benchmark::Poisson, Method::L2OptSp) => Families::new(vec![ScalarFn::ONE, ScalarFn::coord(0)], one.clone(), one),
            (Benchmark::Poisson, Method::L2OptExt) => {
                let f = vec![ScalarFn::ONE, ScalarFn::coord(0)];
                Families::new(f.clone(), f.clone(), f)
            }
            (Benchmark::Nonsep, Method::L2OptSp) => Families::new(even_powers(3), one.clone(), one),
            (Benchmark::Nonsep, Method::L2OptExt) => Families::new(even_powers(4), even_powers(4), even_powers(4)),
            (Benchmark::Convection, Method::L2OptSp) => Families::new(trig(), one.clone(), one),
            (Benchmark::Convection, Method::L2OptExt) => Families::new(trig(), trig(), trig()),
            (Benchmark::ThermalBlock, Method::L2OptSp) => Families::new(affine4(), one.clone(), one),
            (Benchmark::ThermalBlock, Method::L2OptExt) => Families::new(affine4(), affine4(), affine4()),
        })
    }

    /// Initialization used when none is requested.
    pub fn default_init(&self, method: Method) -> InitKind {
        match (self, method) {
            (Benchmark::Nonsep, _) => InitKind::Canonical,
            (_, Method::L2OptExt) => InitKind::Sp,
            (Benchmark::Convection, _) => InitKind::Rb,
            _ => InitKind::Pod,
        }
    }
}

fn even_powers(k: u32) -> Vec<ScalarFn> {
    (0..k).map(|j| if j == 0 { ScalarFn::ONE } else { ScalarFn::shifted_power(0, 2 * j, 0.5) }).collect()
}

fn trig() -> Vec<ScalarFn> {
    vec![ScalarFn::ONE, ScalarFn::Cos(0), ScalarFn::Sin(0)]
}

fn affine4() -> Vec<ScalarFn> {
    std::iter::once(ScalarFn::ONE).chain((0..4).map(ScalarFn::coord)).collect()
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown problem '{s}'")))
    }
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Rb, Method::Pod, Method::L2OptSp, Method::L2OptExt];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Rb => "rb",
            Method::Pod => "pod",
            Method::L2OptSp => "l2opt-sp",
            Method::L2OptExt => "l2opt-ext",
        }
    }

    pub fn is_fit(&self) -> bool {
        matches!(self, Method::L2OptSp | Method::L2OptExt)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown method '{s}'")))
    }
}

impl InitKind {
    pub fn name(&self) -> &'static str {
        match self {
            InitKind::Rb => "rb",
            InitKind::Pod => "pod",
            InitKind::Canonical => "canonical",
            InitKind::Sp => "sp",
        }
    }
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [InitKind::Rb, InitKind::Pod, InitKind::Canonical, InitKind::Sp]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown init '{s}'")))
    }
}

/// Relative errors of a reduced model on a weighted test grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    /// `sqrt(sum w |y - y_r|^2 / sum w |y|^2)`
    pub rel_l2: f64,
    /// `max |y - y_r| / max |y|`
    pub rel_linf: f64,
}

/// Full-order outputs on a test grid, computed once and reused across
/// methods.
#[derive(Debug, Clone)]
pub struct Reference {
    pub points: Vec<Vec<Complex64>>,
    pub weights: Vec<f64>,
    pub outputs: Vec<CMat>,
}

impl Reference {
    pub fn new(y: &dyn OutputOracle, points: Vec<Vec<Complex64>>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return Err(Error::Input("test grid needs one weight per point".into()));
        }
        let outputs = points.par_iter().map(|p| y.eval(p)).collect::<Result<Vec<_>>>()?;
        Ok(Reference { points, weights, outputs })
    }

    /// Pointwise errors `y(p) - y_r(p)` at every test point.
    pub fn pointwise(&self, rom: &dyn OutputOracle) -> Result<Vec<CMat>> {
        self.points
            .par_iter()
            .zip(self.outputs.par_iter())
            .map(|(p, y)| Ok(y - rom.eval(p)?))
            .collect()
    }

    pub fn errors(&self, rom: &dyn OutputOracle) -> Result<ErrorSummary> {
        let diffs = self.pointwise(rom)?;
        let (mut num, mut den, mut dmax, mut ymax) = (0.0, 0.0, 0.0f64, 0.0f64);
        for ((d, y), w) in diffs.iter().zip(&self.outputs).zip(&self.weights) {
            num += w * d.norm_squared();
            den += w * y.norm_squared();
            dmax = dmax.max(d.norm());
            ymax = ymax.max(y.norm());
        }
        let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::INFINITY };
        Ok(ErrorSummary {
            rel_l2: ratio(num.sqrt(), den.sqrt()),
            rel_linf: ratio(dmax, ymax),
        })
    }
}

/// Everything needed to run methods on one benchmark instance.
pub struct Setup {
    pub benchmark: Benchmark,
    pub fom: Arc<Fom>,
    pub oracle: Cached<Arc<Fom>>,
    pub train: Vec<Vec<Complex64>>,
    pub measure: Measure,
}

/// Result of one method run.
#[derive(Debug, Clone)]
pub enum Outcome {
    Projection { rom: crate::baselines::GalerkinRom },
    Fit { report: Box<FitReport>, init: Box<Ddrom> },
}

impl Outcome {
    pub fn oracle(&self) -> &dyn OutputOracle {
        match self {
            Outcome::Projection { rom } => rom,
            Outcome::Fit { report, .. } => &report.model,
        }
    }

    pub fn ddrom(&self) -> Option<&Ddrom> {
        match self {
            Outcome::Projection { rom } => rom.ddrom(),
            Outcome::Fit { report, .. } => Some(&report.model),
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            Outcome::Projection { .. } => "ok",
            Outcome::Fit { report, .. } => report.status.as_str(),
        }
    }
}

impl Setup {
    pub fn new(benchmark: Benchmark, grid: &Grid2D, train_size: usize) -> Result<Self> {
        let fom = Arc::new(benchmark.build_fom(grid)?);
        let train = benchmark.train_set(train_size);
        let measure = benchmark.fit_measure(&train)?;
        Ok(Setup {
            benchmark,
            oracle: Cached::new(fom.clone()),
            fom,
            train,
            measure,
        })
    }

    pub fn reference(&self, test_size: usize) -> Result<Reference> {
        let (pts, w) = self.benchmark.test_set(test_size);
        Reference::new(&self.oracle, pts, w)
    }

    pub fn rb(&self, r: usize) -> Result<crate::baselines::GalerkinRom> {
        Ok(strong_greedy(self.fom.clone(), &self.train, r, 0.0)?.rom)
    }

    pub fn pod(&self, r: usize) -> Result<crate::baselines::GalerkinRom> {
        Ok(pod(self.fom.clone(), &self.train, r)?.rom)
    }

    /// Starting model of order `r` for `method`.
    pub fn init(&self, method: Method, init: InitKind, r: usize, opts: &OptimOptions) -> Result<Ddrom> {
        let families = self.benchmark.families(method)?;
        let (n_o, n_f) = (self.fom.n_outputs(), self.fom.n_inputs());
        let projected = |rom: crate::baselines::GalerkinRom| -> Result<Ddrom> {
            rom.ddrom()
                .ok_or_else(|| Error::Input(format!("{} has no separable projection to start from", self.benchmark)))?
                .lift_to(&families)
        };
        match init {
            InitKind::Canonical => Ddrom::canonical(&families, r, n_f, n_o, self.benchmark.param_dim()),
            InitKind::Rb => projected(self.rb(r)?),
            InitKind::Pod => projected(self.pod(r)?),
            InitKind::Sp => {
                if method != Method::L2OptExt {
                    return Err(Error::Input("init 'sp' applies to extended fits only".into()));
                }
                let sp_init = self.benchmark.default_init(Method::L2OptSp);
                let sp = self.fit(self.init(Method::L2OptSp, sp_init, r, opts)?, opts, |_, _| {})?;
                sp.model.lift_to(&families)
            }
        }
    }

    pub fn fit<O>(&self, init: Ddrom, opts: &OptimOptions, observer: O) -> Result<FitReport>
    where
        O: FnMut(&Ddrom, &IterRecord),
    {
        l2_opt_psf(&self.oracle, &init, &self.measure, opts, observer)
    }

    /// Runs `method` at order `r`; `init` defaults per benchmark.
    pub fn run(&self, method: Method, r: usize, init: Option<InitKind>, opts: &OptimOptions) -> Result<Outcome> {
        match method {
            Method::Rb => Ok(Outcome::Projection { rom: self.rb(r)? }),
            Method::Pod => Ok(Outcome::Projection { rom: self.pod(r)? }),
            _ => {
                let kind = init.unwrap_or_else(|| self.benchmark.default_init(method));
                let start = self.init(method, kind, r, opts)?;
                let report = self.fit(start.clone(), opts, |_, _| {})?;
                Ok(Outcome::Fit {
                    report: Box::new(report),
                    init: Box::new(start),
                })
            }
        }
    }
}

/// `n` equispaced parameters over the benchmark range (1-D problems).
pub fn reporting_grid(benchmark: Benchmark, n: usize) -> Vec<f64> {
    let (a, b) = benchmark.range();
    linspace(a, b, n)
}

/// Synthetic truth-recovery experiment: sample a random stable system,
/// fit a model of the same order from a perturbed copy of the truth.
#[derive(Debug, Clone)]
pub struct TruthRecovery {
    pub truth: LtiSystem,
    pub data: FrequencySampleSet,
    pub init: Ddrom,
    pub report: FitReport,
    pub initial_rel_mse: f64,
    pub rel_mse: f64,
    pub stable: StablePart,
}

/// Frequencies `logspace(-1, 1, n_freq)` bracket the pole magnitudes of
/// [`random_stable_system`].
pub fn truth_recovery(order: usize, n_freq: usize, rel: f64, seed: u64, opts: &OptimOptions) -> Result<TruthRecovery> {
    let truth = random_stable_system(order, 1, 1, seed)?;
    let data = truth.sample(&logspace(-1.0, 1.0, n_freq))?;
    let init = perturb(&truth.to_ddrom()?, rel, seed.wrapping_add(1))?;
    let (points, y) = data.mse_problem()?;
    let report = l2_opt_psf(&y, &init, &Measure::Discrete(points), opts, |_, _| {})?;
    Ok(TruthRecovery {
        initial_rel_mse: relative_mse(&data, &init)?,
        rel_mse: relative_mse(&data, &report.model)?,
        stable: stable_part(&report.model)?,
        truth,
        data,
        init,
        report,
    })
}
