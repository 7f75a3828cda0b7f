//! Run configuration: a plain `key = value` file plus flag overrides.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ddrom::problems::{Benchmark, Method};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Benchmark(Benchmark),
    /// Frequency samples from a CSV file.
    FreqData(PathBuf),
    /// Samples of a seeded random stable system.
    SyntheticLti { order: usize, seed: u64 },
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemSpec::Benchmark(b) => write!(f, "{b}"),
            ProblemSpec::FreqData(p) => write!(f, "freq-data:{}", p.display()),
            ProblemSpec::SyntheticLti { order, seed } => write!(f, "synthetic-lti:{order}:{seed}"),
        }
    }
}

impl FromStr for ProblemSpec {
    type Err = CliError;

    /// Accepts `freq-data:PATH` or `freq-data(PATH)`, and
    /// `synthetic-lti:ORDER[:SEED]` or `synthetic-lti(ORDER[, SEED])`.
    fn from_str(s: &str) -> Result<Self, CliError> {
        let s = s.trim();
        let bad = || CliError::Usage(format!("unknown problem {s:?}"));
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a.to_string())),
            None => match s.strip_suffix(')').and_then(|t| t.split_once('(')) {
                Some((h, a)) => (h, Some(a.to_string())),
                None => (s, None),
            },
        };
        match (head, arg) {
            ("freq-data", Some(path)) if !path.is_empty() => Ok(ProblemSpec::FreqData(PathBuf::from(path))),
            ("synthetic-lti", Some(args)) => {
                let parts: Vec<&str> = args.split([':', ',']).map(str::trim).collect();
                let order = parts[0].parse().map_err(|_| bad())?;
                let seed = match parts.get(1) {
                    Some(v) => v.parse().map_err(|_| bad())?,
                    None => 0,
                };
                if parts.len() > 2 {
                    return Err(bad());
                }
                Ok(ProblemSpec::SyntheticLti { order, seed })
            }
            (name, None) => name.parse::<Benchmark>().map(ProblemSpec::Benchmark).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureSpec {
    /// Whatever the problem fits against by default.
    Default,
    /// Lebesgue measure on the parameter interval (1-D problems).
    Interval,
    /// Uniform weights on the training set, or `N` random points in grad-check.
    Discrete(Option<usize>),
    /// The imaginary axis with weight `1/(2 pi)`.
    H2,
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureSpec::Default => f.write_str("default"),
            MeasureSpec::Interval => f.write_str("interval"),
            MeasureSpec::Discrete(None) => f.write_str("discrete"),
            MeasureSpec::Discrete(Some(n)) => write!(f, "discrete:{n}"),
            MeasureSpec::H2 => f.write_str("h2"),
        }
    }
}

impl FromStr for MeasureSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Usage(format!("unknown measure {s:?}"));
        Ok(match s.trim() {
            "default" => MeasureSpec::Default,
            "interval" => MeasureSpec::Interval,
            "discrete" => MeasureSpec::Discrete(None),
            "h2" => MeasureSpec::H2,
            other => {
                let n = other.strip_prefix("discrete:").ok_or_else(bad)?;
                MeasureSpec::Discrete(Some(n.parse().map_err(|_| bad())?))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Default,
    Pod,
    Rb,
    Canonical,
    /// Extended fits: the structure-preserving fit, lifted.
    Sp,
    /// Synthetic LTI: the truth with 1% coefficient noise.
    Perturb,
    File(PathBuf),
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitSpec::Default => f.write_str("default"),
            InitSpec::Pod => f.write_str("pod"),
            InitSpec::Rb => f.write_str("rb"),
            InitSpec::Canonical => f.write_str("canonical"),
            InitSpec::Sp => f.write_str("sp"),
            InitSpec::Perturb => f.write_str("perturb"),
            InitSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for InitSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s.trim() {
            "default" => InitSpec::Default,
            "pod" => InitSpec::Pod,
            "rb" => InitSpec::Rb,
            "canonical" => InitSpec::Canonical,
            "sp" => InitSpec::Sp,
            "perturb" => InitSpec::Perturb,
            other => match other.strip_prefix("file:") {
                Some(p) if !p.is_empty() => InitSpec::File(PathBuf::from(p)),
                _ => return Err(CliError::Usage(format!("unknown init {s:?}"))),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilySpec {
    /// `A(p) = A_1 + p A_2 + (p - 1/2)^2 A_3`, truncated to the order's term count.
    Affine,
    /// `A(s) = s E - A`.
    Lti,
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilySpec::Affine => "affine",
            FamilySpec::Lti => "lti",
        })
    }
}

impl FromStr for FamilySpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.trim() {
            "affine" => Ok(FamilySpec::Affine),
            "lti" => Ok(FamilySpec::Lti),
            _ => Err(CliError::Usage(format!("unknown family {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub method: Method,
    /// Reduced order; the problem's default when unset.
    pub order: Option<usize>,
    pub measure: MeasureSpec,
    pub init: InitSpec,
    /// Training-set size per parameter axis.
    pub train: Option<usize>,
    /// Reporting-grid size per parameter axis.
    pub test: Option<usize>,
    /// Interior nodes per axis of the finite-element grid.
    pub mesh: usize,
    pub maxit: usize,
    pub tol: f64,
    pub seed: u64,
    pub out: PathBuf,
    /// Finite-difference step of `grad-check`.
    pub h: f64,
    pub family: FamilySpec,
    pub complex: bool,
    /// Model file read by `recover`.
    pub model: Option<PathBuf>,
    /// Separable full-order model in model-file format, for `recover`.
    pub fom: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: ProblemSpec::Benchmark(Benchmark::Poisson),
            method: Method::L2OptSp,
            order: None,
            measure: MeasureSpec::Default,
            init: InitSpec::Default,
            train: None,
            test: None,
            mesh: 33,
            maxit: 1000,
            tol: 1e-6,
            seed: 0,
            out: PathBuf::from("results"),
            h: 1e-6,
            family: FamilySpec::Affine,
            complex: false,
            model: None,
            fom: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| CliError::Usage(format!("bad value {v:?} for {key}")))
}

impl RunConfig {
    /// Sets one key; unknown keys are an error.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        let v = v.trim();
        match key.trim() {
            "problem" => self.problem = v.parse()?,
            "method" => {
                self.method = v
                    .parse()
                    .map_err(|_| CliError::Usage(format!("unknown method {v:?} (expected rb, pod, l2opt-sp or l2opt-ext)")))?
            }
            "order" | "r" => self.order = Some(parse(key, v)?),
            "measure" => self.measure = v.parse()?,
            "init" => self.init = v.parse()?,
            "train" => self.train = Some(parse(key, v)?),
            "test" => self.test = Some(parse(key, v)?),
            "mesh" => self.mesh = parse(key, v)?,
            "maxit" => self.maxit = parse(key, v)?,
            "tol" => self.tol = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "h" => self.h = parse(key, v)?,
            "family" => self.family = v.parse()?,
            "complex" => self.complex = parse(key, v)?,
            "model" => self.model = Some(PathBuf::from(v)),
            "fom" => self.fom = Some(PathBuf::from(v)),
            other => return Err(CliError::Usage(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self, CliError> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("problem = {}", self.problem),
            format!("method = {}", self.method),
        ];
        if let Some(r) = self.order {
            lines.push(format!("order = {r}"));
        }
        lines.push(format!("measure = {}", self.measure));
        lines.push(format!("init = {}", self.init));
        if let Some(n) = self.train {
            lines.push(format!("train = {n}"));
        }
        if let Some(n) = self.test {
            lines.push(format!("test = {n}"));
        }
        lines.extend([
            format!("mesh = {}", self.mesh),
            format!("maxit = {}", self.maxit),
            format!("tol = {:?}", self.tol),
            format!("seed = {}", self.seed),
            format!("out = {}", self.out.display()),
            format!("h = {:?}", self.h),
            format!("family = {}", self.family),
            format!("complex = {}", self.complex),
        ]);
        if let Some(p) = &self.model {
            lines.push(format!("model = {}", p.display()));
        }
        if let Some(p) = &self.fom {
            lines.push(format!("fom = {}", p.display()));
        }
        lines.join("\n") + "\n"
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.order == Some(0) {
            return Err(CliError::Usage("order must be at least 1".into()));
        }
        if !(self.tol > 0.0) || !(self.h > 0.0) {
            return Err(CliError::Usage("tol and h must be positive".into()));
        }
        if self.maxit == 0 {
            return Err(CliError::Usage("maxit must be at least 1".into()));
        }
        Ok(())
    }
}
