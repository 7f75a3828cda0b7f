//! Frequency-response CSV files.
//!
//! Header `omega,re_1_1,im_1_1,...,re_no_nf,im_no_nf`, one row per frequency,
//! entries of `H` in row-major order.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::problems::lti::FrequencySampleSet;

fn header_shape(header: &str) -> Result<(usize, usize)> {
    let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    if cols.first() != Some(&"omega") || cols.len() < 3 || (cols.len() - 1) % 2 != 0 {
        return Err(Error::Parse { line: 1, msg: "header must be omega,re_1_1,im_1_1,...".into() });
    }
    let mut n_o = 0;
    let mut n_f = 0;
    for (k, pair) in cols[1..].chunks(2).enumerate() {
        let parse = |s: &str, prefix: &str| -> Option<(usize, usize)> {
            let rest = s.strip_prefix(prefix)?;
            let (i, j) = rest.split_once('_')?;
            Some((i.parse().ok()?, j.parse().ok()?))
        };
        let (Some(re), Some(im)) = (parse(pair[0], "re_"), parse(pair[1], "im_")) else {
            return Err(Error::Parse { line: 1, msg: format!("bad column names {:?}", pair) });
        };
        if re != im || re.0 == 0 || re.1 == 0 {
            return Err(Error::Parse { line: 1, msg: format!("column pair {k} has mismatched indices") });
        }
        n_o = n_o.max(re.0);
        n_f = n_f.max(re.1);
    }
    if n_o * n_f != (cols.len() - 1) / 2 {
        return Err(Error::Parse { line: 1, msg: "header does not list a full output-by-input matrix".into() });
    }
    // entries must come in row-major order
    for (k, pair) in cols[1..].chunks(2).enumerate() {
        let expect = format!("re_{}_{}", k / n_f + 1, k % n_f + 1);
        if pair[0] != expect {
            return Err(Error::Parse { line: 1, msg: format!("expected column {expect}, found {}", pair[0]) });
        }
    }
    Ok((n_o, n_f))
}

/// Parses frequency data from CSV text.
pub fn parse_frequency_csv(text: &str) -> Result<FrequencySampleSet> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(Error::Input("frequency file is empty".into()));
    };
    let (n_o, n_f) = header_shape(header)?;
    let mut omegas = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 1 + 2 * n_o * n_f {
            return Err(Error::Parse { line: lineno, msg: format!("expected {} fields, found {}", 1 + 2 * n_o * n_f, fields.len()) });
        }
        let nums: Vec<f64> = fields
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse { line: lineno, msg: "non-finite value".into() });
        }
        if let Some(&last) = omegas.last() {
            if !(nums[0] > last) {
                return Err(Error::Input(format!("line {lineno}: frequencies must be strictly increasing")));
            }
        }
        omegas.push(nums[0]);
        values.push(CMat::from_fn(n_o, n_f, |i, j| {
            let k = 1 + 2 * (i * n_f + j);
            Complex64::new(nums[k], nums[k + 1])
        }));
    }
    if omegas.is_empty() {
        return Err(Error::Input("frequency file has no data rows".into()));
    }
    FrequencySampleSet::new(omegas, values)
}

pub fn load_frequency_data(path: &Path) -> Result<FrequencySampleSet> {
    parse_frequency_csv(&std::fs::read_to_string(path)?)
}

/// CSV text with full round-trip precision.
pub fn format_frequency_csv(data: &FrequencySampleSet) -> String {
    let (n_o, n_f) = data.shape();
    let mut s = String::from("omega");
    for i in 1..=n_o {
        for j in 1..=n_f {
            write!(s, ",re_{i}_{j},im_{i}_{j}").unwrap();
        }
    }
    s.push('\n');
    for (w, h) in data.omegas().iter().zip(data.values()) {
        write!(s, "{w:e}").unwrap();
        for i in 0..n_o {
            for j in 0..n_f {
                write!(s, ",{:e},{:e}", h[(i, j)].re, h[(i, j)].im).unwrap();
            }
        }
        s.push('\n');
    }
    s
}

pub fn write_frequency_data(path: &Path, data: &FrequencySampleSet) -> Result<()> {
    std::fs::write(path, format_frequency_csv(data))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file() {
        let s = parse_frequency_csv("omega,re_1_1,im_1_1\n1,0.5,-0.5\n2,0.2,-0.4\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.completed().len(), 4);
        assert_eq!(s.values()[1][(0, 0)], Complex64::new(0.2, -0.4));
    }

    #[test]
    fn guards() {
        assert!(matches!(parse_frequency_csv(""), Err(Error::Input(_))));
        assert!(matches!(parse_frequency_csv("omega,re_1_1,im_1_1\n1,x,0\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_frequency_csv("omega,re_1_1,im_1_1\n2,1,0\n1,1,0\n"), Err(Error::Input(_))));
        assert!(parse_frequency_csv("omega,re_1_2,im_1_2\n1,1,0\n").is_err());
    }

    #[test]
    fn mimo_round_trip() {
        let vals: Vec<CMat> = (0..3)
            .map(|k| CMat::from_fn(2, 3, |i, j| Complex64::new(0.1 * (i + k) as f64 + 1.0 / 3.0, j as f64 * std::f64::consts::PI)))
            .collect();
        let set = FrequencySampleSet::new(vec![0.5, 1.0 / 7.0 + 1.0, 3.0], vals).unwrap();
        let back = parse_frequency_csv(&format_frequency_csv(&set)).unwrap();
        assert_eq!(back, set);
    }
}
