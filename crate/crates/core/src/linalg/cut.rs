use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::matrix::{c64, ComplexMatrix, ZERO};
use crate::error::{Error, Result};

/// Which factor survives a partial trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Keep {
    Left,
    Right,
}

/// Split of a chain into a left block `L` (sites `sites_l`) and its complement
/// `R`. The left block is the more significant tensor factor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteCut {
    pub d_l: usize,
    pub d_r: usize,
    pub sites_l: Range<usize>,
    pub sites_r: Range<usize>,
}

impl BipartiteCut {
    /// Two-party cut with one "site" on each side.
    pub fn new(d_l: usize, d_r: usize) -> Result<Self> {
        if d_l == 0 || d_r == 0 {
            return Err(Error::Shape("cut dimensions must be positive".into()));
        }
        Ok(Self { d_l, d_r, sites_l: 0..1, sites_r: 1..2 })
    }

    /// Chain of `n` sites of local dimension `d`, left block `0..left_sites`.
    pub fn chain(n: usize, d: usize, left_sites: usize) -> Result<Self> {
        if d < 2 || n < 2 {
            return Err(Error::Shape(format!("chain needs n >= 2 and d >= 2, got n={n}, d={d}")));
        }
        if left_sites == 0 || left_sites >= n {
            return Err(Error::Shape(format!("cut position {left_sites} must lie strictly inside 0..{n}")));
        }
        let pow = |k: usize| -> Result<usize> {
            d.checked_pow(k as u32).ok_or_else(|| Error::Resource("dimension overflows usize".into()))
        };
        Ok(Self { d_l: pow(left_sites)?, d_r: pow(n - left_sites)?, sites_l: 0..left_sites, sites_r: left_sites..n })
    }

    pub fn dim(&self) -> usize {
        self.d_l * self.d_r
    }

    /// |L| in sites.
    pub fn left_len(&self) -> usize {
        self.sites_l.len()
    }

    /// Same cut with the roles of L and R exchanged (R becomes the major factor).
    pub fn swapped(&self) -> Self {
        Self { d_l: self.d_r, d_r: self.d_l, sites_l: self.sites_r.clone(), sites_r: self.sites_l.clone() }
    }

    pub(crate) fn check(&self, m: &ComplexMatrix) -> Result<()> {
        if !m.is_square() || m.rows() != self.dim() {
            return Err(Error::Shape(format!(
                "operator of shape {}x{} does not match cut {}x{}",
                m.rows(),
                m.cols(),
                self.d_l,
                self.d_r
            )));
        }
        Ok(())
    }
}

pub fn partial_trace(m: &ComplexMatrix, cut: &BipartiteCut, keep: Keep) -> Result<ComplexMatrix> {
    cut.check(m)?;
    let (dl, dr) = (cut.d_l, cut.d_r);
    Ok(match keep {
        Keep::Left => {
            let mut out = ComplexMatrix::zeros(dl, dl);
            for ap in 0..dl {
                let mut acc = vec![ZERO; dl];
                for c in 0..dr {
                    let col = m.col(ap * dr + c);
                    for (a, x) in acc.iter_mut().enumerate() {
                        *x += col[a * dr + c];
                    }
                }
                out.col_mut(ap).copy_from_slice(&acc);
            }
            out
        }
        Keep::Right => {
            let mut out = ComplexMatrix::zeros(dr, dr);
            for cp in 0..dr {
                let mut acc = vec![ZERO; dr];
                for a in 0..dl {
                    let col = &m.col(a * dr + cp)[a * dr..(a + 1) * dr];
                    for (x, y) in acc.iter_mut().zip(col) {
                        *x += y;
                    }
                }
                out.col_mut(cp).copy_from_slice(&acc);
            }
            out
        }
    })
}

/// Reshape a vector on L⊗R into the d_L×d_R coefficient matrix.
pub fn reshape_vector(v: &[c64], cut: &BipartiteCut) -> ComplexMatrix {
    ComplexMatrix::from_fn(cut.d_l, cut.d_r, |a, c| v[a * cut.d_r + c])
}

/// Marginal of W W† without forming the full operator.
pub fn marginal_of_factor(w: &ComplexMatrix, cut: &BipartiteCut, keep: Keep) -> ComplexMatrix {
    let k = match keep {
        Keep::Left => cut.d_l,
        Keep::Right => cut.d_r,
    };
    let mut out = ComplexMatrix::zeros(k, k);
    for j in 0..w.cols() {
        let x = reshape_vector(w.col(j), cut);
        let p = match keep {
            Keep::Left => x.matmul_adjoint(&x),
            Keep::Right => x.transpose().matmul(&x.conj()),
        };
        out = &out + &p;
    }
    out
}

/// Reorder a vector on L⊗R into R⊗L.
pub fn swap_vector(v: &[c64], cut: &BipartiteCut) -> Vec<c64> {
    let mut out = vec![ZERO; v.len()];
    for a in 0..cut.d_l {
        for c in 0..cut.d_r {
            out[c * cut.d_l + a] = v[a * cut.d_r + c];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrix::{kron, ONE};

    #[test]
    fn product_marginal() {
        let cut = BipartiteCut::new(2, 3).unwrap();
        let a = ComplexMatrix::from_real(2, 2, &[0.7, 0.1, 0.1, 0.3]).unwrap();
        let b = ComplexMatrix::from_real_diag(&[0.5, 0.25, 0.25]);
        let m = kron(&a, &b);
        assert!((&partial_trace(&m, &cut, Keep::Left).unwrap() - &a).max_abs() < 1e-14);
        assert!((&partial_trace(&m, &cut, Keep::Right).unwrap() - &b.scale(1.0)).max_abs() < 1e-14);
    }

    #[test]
    fn bell_marginal_is_mixed() {
        let cut = BipartiteCut::new(2, 2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi = [ONE * s, ZERO, ZERO, ONE * s];
        let rho = ComplexMatrix::outer(&phi, &phi);
        let l = partial_trace(&rho, &cut, Keep::Left).unwrap();
        assert!((&l - &ComplexMatrix::identity(2).scale(0.5)).max_abs() < 1e-15);
        let lw = marginal_of_factor(&ComplexMatrix::column_vector(&phi), &cut, Keep::Right);
        assert!((&lw - &l).max_abs() < 1e-15);
    }

    #[test]
    fn chain_cut_dims() {
        let cut = BipartiteCut::chain(6, 2, 2).unwrap();
        assert_eq!((cut.d_l, cut.d_r, cut.left_len()), (4, 16, 2));
        assert!(BipartiteCut::chain(4, 2, 4).is_err());
        assert!(partial_trace(&ComplexMatrix::identity(8), &cut, Keep::Left).is_err());
    }
}
