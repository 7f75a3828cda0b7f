//! Flattening of model coefficients into the real vector seen by the
//! optimizer.
//!
//! Order: every `A` term, then every `B` term, then every `C` term; each
//! matrix row-major. Complex models store `re, im` per entry.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::Ddrom;
use crate::objective::GradientBundle;

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    /// `(rows, cols)` of every coefficient, in packing order.
    pub shapes: Vec<(usize, usize)>,
    /// Number of terms in the `A`, `B` and `C` operators.
    pub terms: [usize; 3],
    pub complex: bool,
}

impl Layout {
    pub fn of(m: &Ddrom) -> Self {
        let ops = [m.a_op(), m.b_op(), m.c_op()];
        Layout {
            shapes: ops.iter().flat_map(|op| std::iter::repeat_n(op.shape(), op.num_terms())).collect(),
            terms: ops.map(|op| op.num_terms()),
            complex: !m.is_real(),
        }
    }

    pub fn len(&self) -> usize {
        let per = if self.complex { 2 } else { 1 };
        self.shapes.iter().map(|(r, c)| r * c * per).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn flatten<'a>(mats: impl Iterator<Item = &'a crate::linalg::CMat>, complex: bool, out: &mut Vec<f64>) {
    for m in mats {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                out.push(z.re);
                if complex {
                    out.push(z.im);
                }
            }
        }
    }
}

pub fn pack(m: &Ddrom) -> Vec<f64> {
    let layout = Layout::of(m);
    let mut out = Vec::with_capacity(layout.len());
    let mats = m.a_op().coeffs().iter().chain(m.b_op().coeffs()).chain(m.c_op().coeffs());
    flatten(mats, layout.complex, &mut out);
    out
}

/// Packs a gradient in the layout of `m`. For real models only the real
/// parts are kept.
pub fn pack_gradient(g: &GradientBundle, layout: &Layout) -> Vec<f64> {
    let mut out = Vec::with_capacity(layout.len());
    flatten(g.iter(), layout.complex, &mut out);
    out
}

/// Writes `x` into the coefficients of `template` (same layout).
pub fn unpack(template: &Ddrom, x: &[f64]) -> Result<Ddrom> {
    let mut m = template.clone();
    unpack_into(&mut m, x)?;
    Ok(m)
}

pub fn unpack_into(m: &mut Ddrom, x: &[f64]) -> Result<()> {
    let layout = Layout::of(m);
    if x.len() != layout.len() {
        return Err(Error::Dimension(format!("packed vector has {} entries, layout needs {}", x.len(), layout.len())));
    }
    let mut k = 0;
    for op in m.ops_mut() {
        for c in op.coeffs_mut() {
            for i in 0..c.nrows() {
                for j in 0..c.ncols() {
                    c[(i, j)] = if layout.complex {
                        k += 2;
                        Complex64::new(x[k - 2], x[k - 1])
                    } else {
                        k += 1;
                        Complex64::new(x[k - 1], 0.0)
                    };
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMat;
    use crate::model::Families;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn pack_unpack_round_trip(vals in proptest::collection::vec(-1e3f64..1e3, 2 * (2 * 9 + 3 + 6)), complex in any::<bool>()) {
            let mut m = Ddrom::canonical(&Families::lti(), 3, 1, 2, 1).unwrap();
            let mut it = vals.iter();
            for op in m.ops_mut() {
                for c in op.coeffs_mut() {
                    for z in c.iter_mut() {
                        let re = *it.next().unwrap();
                        let im = *it.next().unwrap();
                        *z = Complex64::new(re, if complex { im } else { 0.0 });
                    }
                }
            }
            // re-infer the real flag after editing
            let m = Ddrom::new(
                m.a_op().map_coeffs(CMat::clone).unwrap(),
                m.b_op().map_coeffs(CMat::clone).unwrap(),
                m.c_op().map_coeffs(CMat::clone).unwrap(),
            ).unwrap();
            let x = pack(&m);
            prop_assert_eq!(x.len(), Layout::of(&m).len());
            let back = unpack(&m, &x).unwrap();
            prop_assert_eq!(back, m);
        }
    }

    #[test]
    fn row_major_order() {
        let mut m = Ddrom::canonical(&Families::affine_1d(), 2, 1, 1, 1).unwrap();
        m.ops_mut()[0].coeffs_mut()[0] = CMat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0].map(|v| Complex64::new(v, 0.0)));
        let x = pack(&m);
        assert_eq!(&x[..4], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(x.len(), 4 + 4 + 2 + 2);
    }
}
