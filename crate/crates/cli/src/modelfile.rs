//! Text model format.
//!
//! ```text
//! ddrom-model v1
//! param_dim 1
//! operator A 2 2 2 real
//! term const 1.0
//! 1.0 0.0
//! 0.0 1.0
//! term mono 0 1 0.0
//! ...
//! ```
//!
//! `operator NAME TERMS ROWS COLS real|complex` is followed by `TERMS` blocks
//! of one `term` line and `ROWS` row lines. Real operators write one number
//! per entry, complex operators write `re im` pairs.

use std::fmt::Write as _;
use std::path::Path;

use ddrom::linalg::CMat;
use ddrom::{Complex64, Ddrom, Error, Fom, PsfOperator, Result, ScalarFn};

pub const HEADER: &str = "ddrom-model v1";

pub fn format_model(m: &Ddrom) -> String {
    let mut s = format!("{HEADER}\nparam_dim {}\n", m.param_dim());
    for (name, op) in [("A", m.a_op()), ("B", m.b_op()), ("C", m.c_op())] {
        let (r, c) = op.shape();
        let real = op.is_real();
        let kind = if real { "real" } else { "complex" };
        let _ = writeln!(s, "operator {name} {} {r} {c} {kind}", op.num_terms());
        for (f, coeff) in op.terms() {
            let _ = writeln!(s, "term {f}");
            for i in 0..r {
                let row: Vec<String> = (0..c)
                    .map(|j| {
                        let z = coeff[(i, j)];
                        if real {
                            format!("{:?}", z.re)
                        } else {
                            format!("{:?} {:?}", z.re, z.im)
                        }
                    })
                    .collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        }
    }
    s
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        loop {
            let Some((i, l)) = self.it.next() else {
                return Err(Error::Parse {
                    line: self.line + 1,
                    msg: "unexpected end of model file".into(),
                });
            };
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() && !l.starts_with('#') {
                return Ok(l);
            }
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next()?;
        l.strip_prefix(key)
            .filter(|rest| rest.starts_with(' '))
            .map(str::trim)
            .ok_or_else(|| self.err(format!("expected '{key} ...', got {l:?}")))
    }
}

fn parse_num<T: std::str::FromStr>(lines: &Lines, s: &str) -> Result<T> {
    s.parse().map_err(|_| lines.err(format!("cannot parse number {s:?}")))
}

fn parse_operator(lines: &mut Lines, name: &str, param_dim: usize) -> Result<PsfOperator> {
    let head = lines.keyed("operator")?;
    let fields: Vec<&str> = head.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != name || !matches!(fields[4], "real" | "complex") {
        return Err(lines.err(format!("expected 'operator {name} TERMS ROWS COLS real|complex'")));
    }
    let real = fields[4] == "real";
    let (q, r, c): (usize, usize, usize) = (
        parse_num(lines, fields[1])?,
        parse_num(lines, fields[2])?,
        parse_num(lines, fields[3])?,
    );
    let per_entry = if real { 1 } else { 2 };
    let mut terms = Vec::with_capacity(q);
    for _ in 0..q {
        let f: ScalarFn = lines.keyed("term")?.parse().map_err(|e: Error| lines.err(e.to_string()))?;
        let mut m = CMat::zeros(r, c);
        for i in 0..r {
            let row = lines.next()?;
            let vals: Vec<f64> = row.split_whitespace().map(|v| parse_num(lines, v)).collect::<Result<_>>()?;
            if vals.len() != c * per_entry {
                return Err(lines.err(format!("expected {} numbers in row {i} of {name}, got {}", c * per_entry, vals.len())));
            }
            for j in 0..c {
                m[(i, j)] = if real {
                    Complex64::new(vals[j], 0.0)
                } else {
                    Complex64::new(vals[2 * j], vals[2 * j + 1])
                };
            }
        }
        terms.push((f, m));
    }
    PsfOperator::with_flag(terms, param_dim, real).map_err(|e| lines.err(e.to_string()))
}

pub fn parse_model(text: &str) -> Result<Ddrom> {
    let (a, b, c) = parse_operators(text)?;
    Ddrom::new(a, b, c)
}

fn parse_operators(text: &str) -> Result<(PsfOperator, PsfOperator, PsfOperator)> {
    let mut lines = Lines {
        it: text.lines().enumerate(),
        line: 0,
    };
    let head = lines.next()?;
    if head != HEADER {
        return Err(lines.err(format!("expected header {HEADER:?}, got {head:?}")));
    }
    let pd = lines.keyed("param_dim")?;
    let pd: usize = parse_num(&lines, pd)?;
    let a = parse_operator(&mut lines, "A", pd)?;
    let b = parse_operator(&mut lines, "B", pd)?;
    let c = parse_operator(&mut lines, "C", pd)?;
    Ok((a, b, c))
}

/// Reads a separable full-order model stored in the same format.
pub fn parse_fom(text: &str) -> Result<Fom> {
    let (a, b, c) = parse_operators(text)?;
    Fom::separable(a, b, c)
}

pub fn read_model(path: &Path) -> Result<Ddrom> {
    parse_model(&std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?)
}

pub fn read_fom(path: &Path) -> Result<Fom> {
    parse_fom(&std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?)
}

pub fn write_model(path: &Path, m: &Ddrom) -> Result<()> {
    std::fs::write(path, format_model(m)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
