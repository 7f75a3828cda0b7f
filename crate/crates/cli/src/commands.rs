//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use ddrom::linalg::{CMat, RMat};
use ddrom::objective::{fd_gradients, max_relative_deviation, objective_and_gradients, GradientBundle};
use ddrom::optim::{l2_opt_psf, FitReport, OptimOptions};
use ddrom::problems::fem::Grid2D;
use ddrom::problems::lti::{logspace, perturb, random_stable_system, relative_mse, stable_part, FrequencySampleSet};
use ddrom::problems::suite::Reference;
use ddrom::problems::{load_frequency_data, Benchmark, InitKind, Method, Setup};
use ddrom::recovery::{recover_projection, RecoveryOptions, RecoveryStatus};
use ddrom::{Complex64, Ddrom, DiscretePoints, Families, Measure, OutputOracle, PsfOperator, QuadOptions, QuadRule, ScalarFn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{FamilySpec, InitSpec, MeasureSpec, ProblemSpec, RunConfig};
use crate::modelfile::{read_fom, read_model, write_model};
use crate::CliError;

/// Largest analytic-vs-FD deviation accepted by `grad-check`.
pub const GRAD_CHECK_TOL: f64 = 1e-5;

pub const SUMMARY_HEADER: [&str; 8] = ["problem", "method", "r", "rel_l2", "rel_linf", "wall_time", "status", "timestamp"];

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub problem: String,
    pub method: String,
    pub r: usize,
    pub rel_l2: f64,
    pub rel_linf: f64,
    pub wall_time: f64,
    pub status: String,
    /// Nanoseconds since the Unix epoch.
    pub timestamp: u128,
}

fn now_ns() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos())
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Core(ddrom::Error::Io(format!("{}: {e}", path.display())))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| io_err(path, e))
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_summary(dir: &Path, s: &Summary) -> Result<(), CliError> {
    let row = vec![
        s.problem.clone(),
        s.method.clone(),
        s.r.to_string(),
        format!("{:?}", s.rel_l2),
        format!("{:?}", s.rel_linf),
        format!("{:.3}", s.wall_time),
        s.status.clone(),
        s.timestamp.to_string(),
    ];
    let header: Vec<String> = SUMMARY_HEADER.iter().map(|s| s.to_string()).collect();
    write_rows(&dir.join("summary.csv"), &header, &[row])
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn optim_options(cfg: &RunConfig) -> OptimOptions {
    OptimOptions {
        maxit: cfg.maxit,
        tol: cfg.tol,
        ..Default::default()
    }
}

/// What a run produced, before it is written out.
struct Product {
    r: usize,
    model: Option<Ddrom>,
    fit: Option<FitReport>,
    reference: Reference,
    /// Column names of the parameter coordinates in `errors.csv`.
    coords: Vec<String>,
    /// Maps a parameter to its reported coordinates.
    coord_fn: fn(&[Complex64]) -> Vec<f64>,
    oracle: Box<dyn OutputOracle>,
    extra: Vec<String>,
    stable: Option<Ddrom>,
}

fn real_coords(p: &[Complex64]) -> Vec<f64> {
    p.iter().map(|z| z.re).collect()
}

fn omega_coord(p: &[Complex64]) -> Vec<f64> {
    vec![p[0].im]
}

fn benchmark_measure(b: Benchmark, spec: MeasureSpec, train: &[Vec<Complex64>]) -> Result<Option<Measure>, CliError> {
    match spec {
        MeasureSpec::Default => Ok(None),
        MeasureSpec::Interval if b.param_dim() == 1 => {
            let (lo, hi) = b.range();
            Ok(Some(Measure::interval(lo, hi, 1.0)?))
        }
        MeasureSpec::Interval => Err(CliError::Usage(format!("{b} has {} parameters; an interval measure needs 1", b.param_dim()))),
        MeasureSpec::Discrete(None) => Ok(Some(Measure::Discrete(DiscretePoints::uniform(train.to_vec())?))),
        other => Err(CliError::Usage(format!("measure {other} does not apply to {b}"))),
    }
}

fn init_kind(spec: &InitSpec, b: Benchmark, method: Method) -> Result<Option<InitKind>, CliError> {
    Ok(Some(match spec {
        InitSpec::Default => b.default_init(method),
        InitSpec::Pod => InitKind::Pod,
        InitSpec::Rb => InitKind::Rb,
        InitSpec::Canonical => InitKind::Canonical,
        InitSpec::Sp => InitKind::Sp,
        InitSpec::File(_) => return Ok(None),
        InitSpec::Perturb => return Err(CliError::Usage("init 'perturb' applies to synthetic-lti only".into())),
    }))
}

/// Reads a starting model and brings it to `families`.
fn init_from_file(path: &Path, families: &Families, r: usize) -> Result<Ddrom, CliError> {
    let m = read_model(path)?;
    if m.order() != r {
        return Err(CliError::Usage(format!("init model has order {}, run asks for {r}", m.order())));
    }
    if m.families() == *families {
        Ok(m)
    } else {
        Ok(m.lift_to(families)?)
    }
}

fn run_benchmark(cfg: &RunConfig, b: Benchmark) -> Result<Product, CliError> {
    let grid = Grid2D::new(cfg.mesh)?;
    let mut setup = Setup::new(b, &grid, cfg.train.unwrap_or(b.default_train_size()))?;
    if let Some(mu) = benchmark_measure(b, cfg.measure, &setup.train)? {
        setup.measure = mu;
    }
    let r = cfg.order.unwrap_or(b.default_order());
    let reference = setup.reference(cfg.test.unwrap_or(b.default_test_size()))?;
    let coords = (0..b.param_dim()).map(|k| format!("p{k}")).collect();
    let opts = optim_options(cfg);
    let (model, fit, oracle): (Option<Ddrom>, Option<FitReport>, Box<dyn OutputOracle>) = match cfg.method {
        Method::Rb | Method::Pod => {
            let rom = if cfg.method == Method::Rb { setup.rb(r)? } else { setup.pod(r)? };
            (rom.ddrom().cloned(), None, Box::new(rom))
        }
        method => {
            let start = match init_kind(&cfg.init, b, method)? {
                Some(kind) => setup.init(method, kind, r, &opts)?,
                None => {
                    let InitSpec::File(path) = &cfg.init else { unreachable!() };
                    init_from_file(path, &b.families(method)?, r)?
                }
            };
            let report = setup.fit(start, &opts, |_, _| {})?;
            let m = report.model.clone();
            (Some(m.clone()), Some(report), Box::new(m))
        }
    };
    Ok(Product {
        r,
        model,
        fit,
        reference,
        coords,
        coord_fn: real_coords,
        oracle,
        extra: Vec::new(),
        stable: None,
    })
}

fn run_frequency(cfg: &RunConfig) -> Result<Product, CliError> {
    if cfg.method != Method::L2OptSp {
        return Err(CliError::Usage(format!(
            "frequency-data problems support l2opt-sp only, got {}",
            cfg.method
        )));
    }
    if !matches!(cfg.measure, MeasureSpec::Default | MeasureSpec::Discrete(None)) {
        return Err(CliError::Usage("frequency-data problems fit the discrete MSE of the samples".into()));
    }
    let (data, truth): (FrequencySampleSet, Option<Ddrom>) = match &cfg.problem {
        ProblemSpec::FreqData(path) => (load_frequency_data(path)?, None),
        ProblemSpec::SyntheticLti { order, seed } => {
            let sys = random_stable_system(*order, 1, 1, *seed)?;
            (sys.sample(&logspace(-1.0, 1.0, cfg.train.unwrap_or(50)))?, Some(sys.to_ddrom()?))
        }
        ProblemSpec::Benchmark(_) => unreachable!(),
    };
    let r = match (cfg.order, &truth) {
        (Some(r), _) => r,
        (None, Some(t)) => t.order(),
        (None, None) => return Err(CliError::Usage("frequency-data fits need --order".into())),
    };
    let (n_o, n_f) = data.shape();
    let families = Families::lti();
    let start = match (&cfg.init, &truth) {
        (InitSpec::File(path), _) => init_from_file(path, &families, r)?,
        (InitSpec::Default | InitSpec::Perturb, Some(t)) if t.order() == r => perturb(t, 0.01, cfg.seed.wrapping_add(1))?,
        (InitSpec::Perturb, _) => return Err(CliError::Usage("init 'perturb' needs synthetic-lti at the truth order".into())),
        (InitSpec::Default | InitSpec::Canonical, _) => Ddrom::canonical(&families, r, n_f, n_o, 1)?,
        (other, _) => return Err(CliError::Usage(format!("init {other} does not apply to frequency data"))),
    };
    let (points, y) = data.mse_problem()?;
    let report = l2_opt_psf(&y, &start, &Measure::Discrete(points.clone()), &optim_options(cfg), |_, _| {})?;
    let reference = Reference::new(&y, points.points().to_vec(), points.weights().to_vec())?;
    let stable = stable_part(&report.model)?;
    let extra = vec![
        format!("relative MSE {:.6e}", relative_mse(&data, &report.model)?),
        format!(
            "stable part keeps {} of {} poles ({} discarded)",
            stable.kept.len(),
            r,
            stable.discarded.len()
        ),
    ];
    let m = report.model.clone();
    Ok(Product {
        r,
        model: Some(m.clone()),
        fit: Some(report),
        reference,
        coords: vec!["omega".into()],
        coord_fn: omega_coord,
        oracle: Box::new(m),
        extra,
        stable: Some(stable.model),
    })
}

fn write_product(cfg: &RunConfig, p: &Product) -> Result<(f64, f64), CliError> {
    let out = &cfg.out;
    if let Some(m) = &p.model {
        write_model(&out.join("model.txt"), m)?;
    }
    if let Some(m) = &p.stable {
        write_model(&out.join("stable_model.txt"), m)?;
    }
    if let Some(fit) = &p.fit {
        let header: Vec<String> = ["iteration", "value", "grad_inf", "step", "slope"].map(String::from).to_vec();
        let rows: Vec<Vec<String>> = fit
            .trace
            .iter()
            .map(|t| vec![t.iteration.to_string(), num(t.value), num(t.grad_inf), num(t.step), num(t.slope)])
            .collect();
        write_rows(&out.join("trace.csv"), &header, &rows)?;
    }
    let pointwise = p.reference.pointwise(p.oracle.as_ref())?;
    let mut header = p.coords.clone();
    header.extend(["y_norm", "err_norm", "err_re", "err_im"].map(String::from));
    let rows: Vec<Vec<String>> = p
        .reference
        .points
        .iter()
        .zip(&p.reference.outputs)
        .zip(&pointwise)
        .map(|((pt, y), d)| {
            let mut row: Vec<String> = (p.coord_fn)(pt).into_iter().map(num).collect();
            row.extend([num(y.norm()), num(d.norm()), num(d[(0, 0)].re), num(d[(0, 0)].im)]);
            row
        })
        .collect();
    write_rows(&out.join("errors.csv"), &header, &rows)?;
    let e = p.reference.errors(p.oracle.as_ref())?;
    Ok((e.rel_l2, e.rel_linf))
}

/// `fit` and `baseline`: run one method, write model, trace, error curve and summary.
pub fn cmd_run(cfg: &RunConfig, baseline: bool) -> Result<(), CliError> {
    cfg.validate()?;
    if baseline && cfg.method.is_fit() {
        return Err(CliError::Usage(format!("baseline runs rb or pod, got {}", cfg.method)));
    }
    let start = Instant::now();
    fs::create_dir_all(&cfg.out).map_err(|e| io_err(&cfg.out, e))?;
    fs::write(cfg.out.join("config.txt"), cfg.to_text()).map_err(|e| io_err(&cfg.out, e))?;
    let mut summary = Summary {
        problem: cfg.problem.to_string(),
        method: cfg.method.to_string(),
        r: cfg.order.unwrap_or(0),
        rel_l2: f64::NAN,
        rel_linf: f64::NAN,
        wall_time: 0.0,
        status: "error".into(),
        timestamp: 0,
    };
    let result = (|| {
        let product = match &cfg.problem {
            ProblemSpec::Benchmark(b) => run_benchmark(cfg, *b)?,
            _ => run_frequency(cfg)?,
        };
        summary.r = product.r;
        let (l2, linf) = write_product(cfg, &product)?;
        summary.rel_l2 = l2;
        summary.rel_linf = linf;
        summary.status = product.fit.as_ref().map_or("ok", |f| f.status.as_str()).into();
        Ok::<_, CliError>(product)
    })();
    summary.wall_time = start.elapsed().as_secs_f64();
    summary.timestamp = now_ns();
    // the summary is written even when the run failed
    write_summary(&cfg.out, &summary)?;
    let product = result?;
    println!(
        "{} {} r={}: rel_l2 {:.4e}, rel_linf {:.4e}, status {}",
        summary.problem, summary.method, summary.r, summary.rel_l2, summary.rel_linf, summary.status
    );
    for line in &product.extra {
        println!("{line}");
    }
    match &product.fit {
        Some(f) if !f.converged() => Err(CliError::Check(format!(
            "optimizer stopped without convergence ({}) after {} iterations",
            f.status.as_str(),
            f.iterations
        ))),
        _ => Ok(()),
    }
}

const AFFINE_FNS: [ScalarFn; 3] = [
    ScalarFn::ONE,
    ScalarFn::Monomial { component: 0, exponent: 1, shift: 0.0 },
    ScalarFn::Monomial { component: 0, exponent: 2, shift: 0.5 },
];

fn noise(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64, complex: bool) -> CMat {
    CMat::from_fn(r, c, |_, _| {
        let re = rng.random_range(-1.0..1.0);
        let im = if complex { rng.random_range(-1.0..1.0) } else { 0.0 };
        Complex64::new(re, im) * scale
    })
}

fn diag(r: usize, v: f64) -> CMat {
    CMat::identity(r, r) * Complex64::new(v, 0.0)
}

/// Random affine model with a dominant constant term, well posed for `|p| <= 1`.
fn random_affine(rng: &mut ChaCha8Rng, r: usize, complex: bool) -> Result<Ddrom, CliError> {
    let a = AFFINE_FNS
        .iter()
        .enumerate()
        .map(|(i, f)| (*f, if i == 0 { diag(r, 3.0) + noise(rng, r, r, 0.5, complex) } else { noise(rng, r, r, 0.3, complex) }))
        .collect();
    Ok(Ddrom::new(
        PsfOperator::new(a, 1)?,
        PsfOperator::new(vec![(AFFINE_FNS[0], noise(rng, r, 1, 1.0, complex)), (AFFINE_FNS[1], noise(rng, r, 1, 0.5, complex))], 1)?,
        PsfOperator::single(ScalarFn::ONE, noise(rng, 1, r, 1.0, complex), 1)?,
    )?)
}

/// Random frequency-family model `s E - A` with `E` near the identity and
/// `A` near `-2 I`, so `s E - A` stays invertible on the imaginary axis.
fn random_lti(rng: &mut ChaCha8Rng, r: usize, complex: bool) -> Result<Ddrom, CliError> {
    let fam = Families::lti();
    Ok(Ddrom::new(
        PsfOperator::new(
            vec![
                (fam.a[0], diag(r, 1.0) + noise(rng, r, r, 0.1, complex)),
                (fam.a[1], diag(r, -2.0) + noise(rng, r, r, 0.5, complex)),
            ],
            1,
        )?,
        PsfOperator::single(ScalarFn::ONE, noise(rng, r, 1, 1.0, complex), 1)?,
        PsfOperator::single(ScalarFn::ONE, noise(rng, 1, r, 1.0, complex), 1)?,
    )?)
}

fn grad_check_measure(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Measure, CliError> {
    let n = match cfg.measure {
        MeasureSpec::Default => 20,
        MeasureSpec::Discrete(n) => n.unwrap_or(20),
        MeasureSpec::Interval if cfg.family == FamilySpec::Affine => return Ok(Measure::interval(-1.0, 1.0, 1.0)?),
        MeasureSpec::H2 if cfg.family == FamilySpec::Lti => return Ok(Measure::h2()),
        other => return Err(CliError::Usage(format!("measure {other} does not apply to the {} family", cfg.family))),
    };
    if n == 0 {
        return Err(CliError::Usage("grad-check needs at least one point".into()));
    }
    let mut pts = Vec::with_capacity(n);
    match cfg.family {
        FamilySpec::Affine => {
            while pts.len() < n {
                let re = rng.random_range(-0.9..0.9);
                if pts.len() + 2 <= n {
                    let im = rng.random_range(0.05..0.4);
                    pts.push(vec![Complex64::new(re, im)]);
                    pts.push(vec![Complex64::new(re, -im)]);
                } else {
                    pts.push(vec![Complex64::new(re, 0.0)]);
                }
            }
        }
        FamilySpec::Lti => {
            let ws = logspace(-1.0, 1.0, n.div_ceil(2));
            for w in ws {
                pts.push(vec![Complex64::new(0.0, w)]);
                pts.push(vec![Complex64::new(0.0, -w)]);
            }
        }
    }
    Ok(Measure::Discrete(DiscretePoints::uniform(pts)?))
}

/// Per-matrix deviations in the same metric as [`max_relative_deviation`].
fn per_matrix(g: &GradientBundle, h: &GradientBundle) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for (name, gs, hs) in [("A", &g.a, &h.a), ("B", &g.b, &h.b), ("C", &g.c, &h.c)] {
        for (t, (x, y)) in gs.iter().zip(hs).enumerate() {
            let single = |m: &CMat| GradientBundle {
                a: vec![m.clone()],
                b: Vec::new(),
                c: Vec::new(),
            };
            out.push((format!("{name}[{t}]"), max_relative_deviation(&single(x), &single(y)).0));
        }
    }
    out
}

pub fn cmd_grad_check(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let r = cfg.order.unwrap_or(3);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (truth, model) = match cfg.family {
        FamilySpec::Affine => (random_affine(&mut rng, r + 1, false)?, random_affine(&mut rng, r, cfg.complex)?),
        FamilySpec::Lti => {
            let order = (r + 1).next_multiple_of(2);
            let sys = random_stable_system(order, 1, 1, cfg.seed)?;
            (sys.to_ddrom()?, random_lti(&mut rng, r, cfg.complex)?)
        }
    };
    let mu = grad_check_measure(cfg, &mut rng)?;
    let rule = QuadRule::Adaptive(QuadOptions::default());
    let ev = objective_and_gradients(&truth, &model, &mu, &rule)?;
    let fd = fd_gradients(&truth, &model, &mu, cfg.h, &rule)?;
    let rows = per_matrix(&ev.grad, &fd);
    fs::create_dir_all(&cfg.out).map_err(|e| io_err(&cfg.out, e))?;
    write_rows(
        &cfg.out.join("gradcheck.csv"),
        &["matrix".to_string(), "deviation".to_string()],
        &rows.iter().map(|(l, d)| vec![l.clone(), num(*d)]).collect::<Vec<_>>(),
    )?;
    let (worst, label) = max_relative_deviation(&ev.grad, &fd);
    println!("J = {:.6e}; max relative deviation {worst:.3e} at {label} (h = {:e})", ev.value, cfg.h);
    if worst <= GRAD_CHECK_TOL {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "gradient check failed: deviation {worst:.3e} at {label} exceeds {GRAD_CHECK_TOL:e}"
        )))
    }
}

fn write_matrix(path: &Path, m: &RMat) -> Result<(), CliError> {
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("col{j}")).collect();
    let rows: Vec<Vec<String>> = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| num(m[(i, j)])).collect()).collect();
    write_rows(path, &header, &rows)
}

pub fn cmd_recover(cfg: &RunConfig) -> Result<(), CliError> {
    let model_path = cfg.model.as_ref().ok_or_else(|| CliError::Usage("recover needs --model".into()))?;
    let model = read_model(model_path)?;
    let fom = match (&cfg.fom, &cfg.problem) {
        (Some(path), _) => read_fom(path)?,
        (None, ProblemSpec::Benchmark(b)) => b.build_fom(&Grid2D::new(cfg.mesh)?)?,
        (None, other) => return Err(CliError::Usage(format!("recover needs --fom or a benchmark problem, got {other}"))),
    };
    let res = recover_projection(
        &fom,
        &model,
        &RecoveryOptions {
            seed: cfg.seed,
            ..Default::default()
        },
    )?;
    fs::create_dir_all(&cfg.out).map_err(|e| io_err(&cfg.out, e))?;
    let d = &res.diagnostics;
    let mut report = format!(
        "status {}\nn {}\nr {}\nc_shape {}x{} rank {}\nb_shape {}x{} rank {}\nsystem_shape {}x{} rank {}\nattempts {}\n",
        res.status.as_str(),
        fom.dim(),
        model.order(),
        d.c_shape.0,
        d.c_shape.1,
        d.c_rank,
        d.b_shape.0,
        d.b_shape.1,
        d.b_rank,
        d.system_shape.0,
        d.system_shape.1,
        d.system_rank,
        d.attempts
    );
    if let Some(r) = &res.residuals {
        report += &format!("max_residual {:e}\nmax_relative_residual {:e}\n", r.max_abs(), r.max_rel());
    }
    fs::write(cfg.out.join("recovery.txt"), &report).map_err(|e| io_err(&cfg.out, e))?;
    if res.status == RecoveryStatus::Recovered {
        if let (Some(v), Some(w)) = (&res.v, &res.w) {
            write_matrix(&cfg.out.join("v.csv"), v)?;
            write_matrix(&cfg.out.join("w.csv"), w)?;
        }
    }
    print!("{report}");
    match res.status {
        RecoveryStatus::Recovered => Ok(()),
        RecoveryStatus::NoSolution => Err(CliError::Check("no projection reproduces the model".into())),
        RecoveryStatus::RankDeficientInput => Err(CliError::Usage(format!(
            "rank-deficient input: stacked C has rank {} of {}, stacked B rank {} of {}",
            d.c_rank, d.c_shape.0, d.b_rank, d.b_shape.1
        ))),
    }
}

fn parse_summary(path: &Path) -> Result<Vec<Summary>, String> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let header = rd.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().collect::<Vec<_>>() != SUMMARY_HEADER {
        return Err(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let field = |i: usize| rec.get(i).ok_or_else(|| format!("missing column {}", SUMMARY_HEADER[i]));
        let f64_at = |i: usize| field(i)?.parse::<f64>().map_err(|e| format!("{}: {e}", SUMMARY_HEADER[i]));
        rows.push(Summary {
            problem: field(0)?.to_string(),
            method: field(1)?.to_string(),
            r: field(2)?.parse().map_err(|e| format!("r: {e}"))?,
            rel_l2: f64_at(3)?,
            rel_linf: f64_at(4)?,
            wall_time: f64_at(5)?,
            status: field(6)?.to_string(),
            timestamp: field(7)?.parse().map_err(|e| format!("timestamp: {e}"))?,
        });
    }
    if rows.is_empty() {
        return Err("no rows".into());
    }
    Ok(rows)
}

/// Consolidated table, deduplicated by (problem, method, r), plus the number
/// of skipped run directories.
pub fn collect_report(dir: &Path) -> Result<(Vec<Summary>, usize), CliError> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("{} is not a directory", dir.display())));
    }
    let mut skipped = 0;
    let mut table: BTreeMap<(String, String, usize), Summary> = BTreeMap::new();
    let mut entries: Vec<PathBuf> = walkdir::WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_dir())
        .map(|e| e.into_path())
        .collect();
    entries.sort();
    for run in entries {
        let summary = run.join("summary.csv");
        if !summary.exists() {
            if run.join("config.txt").exists() {
                log::warn!("{}: run has no summary.csv, skipped", run.display());
                skipped += 1;
            }
            continue;
        }
        match parse_summary(&summary) {
            Ok(rows) => {
                for s in rows {
                    let key = (s.problem.clone(), s.method.clone(), s.r);
                    if let Some(old) = table.get(&key) {
                        log::warn!(
                            "duplicate run for {} {} r={}; keeping the latest ({})",
                            key.0,
                            key.1,
                            key.2,
                            if s.timestamp > old.timestamp { summary.display().to_string() } else { "earlier file".into() }
                        );
                        if s.timestamp <= old.timestamp {
                            continue;
                        }
                    }
                    table.insert(key, s);
                }
            }
            Err(e) => {
                log::warn!("{}: corrupt summary ({e}), skipped", summary.display());
                skipped += 1;
            }
        }
    }
    let mut rows: Vec<Summary> = table.into_values().collect();
    let method_rank = |m: &str| m.parse::<Method>().map_or(usize::MAX, |m| m as usize);
    rows.sort_by(|a, b| (&a.problem, method_rank(&a.method), a.r).cmp(&(&b.problem, method_rank(&b.method), b.r)));
    Ok((rows, skipped))
}

pub fn format_report(rows: &[Summary], skipped: usize) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["problem", "method", "r", "rel_l2", "rel_linf", "wall_time"]);
    for s in rows {
        let _ = w.write_record([
            s.problem.clone(),
            s.method.clone(),
            s.r.to_string(),
            num(s.rel_l2),
            num(s.rel_linf),
            format!("{:.3}", s.wall_time),
        ]);
    }
    let mut text = String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default();
    text += &format!("# skipped: {skipped}\n");
    text
}

pub fn cmd_report(dir: &Path) -> Result<(), CliError> {
    let (rows, skipped) = collect_report(dir)?;
    print!("{}", format_report(&rows, skipped));
    if skipped > 0 {
        log::warn!("{skipped} run(s) skipped");
    }
    Ok(())
}
