use serde::Serialize;

use super::cut::BipartiteCut;
use super::matrix::{svd, ComplexMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct SchmidtTerm {
    pub weight: f64,
    pub left: ComplexMatrix,
    pub right: ComplexMatrix,
}

/// M = Σ_k w_k L_k ⊗ R_k with orthonormal {L_k}, {R_k}.
#[derive(Clone, Debug)]
pub struct OperatorSchmidtDecomposition {
    pub terms: Vec<SchmidtTerm>,
    pub rank: usize,
    pub truncation_tol: f64,
    /// ‖dropped part‖₂ / ‖M‖₂.
    pub tail: f64,
    pub norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SchmidtSummary {
    pub rank: usize,
    pub truncation_tol: f64,
    pub tail: f64,
}

impl OperatorSchmidtDecomposition {
    pub fn summary(&self) -> SchmidtSummary {
        SchmidtSummary { rank: self.rank, truncation_tol: self.truncation_tol, tail: self.tail }
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut out: Option<ComplexMatrix> = None;
        for t in &self.terms {
            let k = super::matrix::kron(&t.left, &t.right).scale(t.weight);
            out = Some(match out {
                None => k,
                Some(o) => &o + &k,
            });
        }
        out.expect("at least one term")
    }
}

/// Operator Schmidt decomposition across `cut` via the SVD of the realigned
/// matrix R[(a,a'),(c,c')] = M[(a,c),(a',c')]. All-zero rows and columns of R
/// are dropped before the SVD.
pub fn operator_schmidt(m: &ComplexMatrix, cut: &BipartiteCut, tol: f64) -> Result<OperatorSchmidtDecomposition> {
    cut.check(m)?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::contract("truncation tolerance must lie in (0, 1)"));
    }
    let (dl, dr) = (cut.d_l, cut.d_r);
    let mut row_used = vec![false; dl * dl];
    let mut col_used = vec![false; dr * dr];
    for j in 0..m.cols() {
        let (ap, cp) = (j / dr, j % dr);
        for (i, z) in m.col(j).iter().enumerate() {
            if z.re != 0.0 || z.im != 0.0 {
                let (a, c) = (i / dr, i % dr);
                row_used[a * dl + ap] = true;
                col_used[c * dr + cp] = true;
            }
        }
    }
    let rows: Vec<usize> = (0..dl * dl).filter(|&p| row_used[p]).collect();
    let cols: Vec<usize> = (0..dr * dr).filter(|&q| col_used[q]).collect();
    let norm = m.frobenius_norm();
    if rows.is_empty() {
        return Ok(OperatorSchmidtDecomposition { terms: vec![], rank: 0, truncation_tol: tol, tail: 0.0, norm });
    }
    let mut row_pos = vec![usize::MAX; dl * dl];
    for (k, &p) in rows.iter().enumerate() {
        row_pos[p] = k;
    }
    let mut col_pos = vec![usize::MAX; dr * dr];
    for (k, &q) in cols.iter().enumerate() {
        col_pos[q] = k;
    }
    let mut r = ComplexMatrix::zeros(rows.len(), cols.len());
    for j in 0..m.cols() {
        let (ap, cp) = (j / dr, j % dr);
        for (i, z) in m.col(j).iter().enumerate() {
            if z.re != 0.0 || z.im != 0.0 {
                let (a, c) = (i / dr, i % dr);
                r[(row_pos[a * dl + ap], col_pos[c * dr + cp])] = *z;
            }
        }
    }
    let d = svd(&r)?;
    let top = d.s.first().copied().unwrap_or(0.0);
    let mut terms = Vec::new();
    let mut dropped = 0.0;
    for (k, &s) in d.s.iter().enumerate() {
        if top > 0.0 && s > tol * top {
            let mut left = ComplexMatrix::zeros(dl, dl);
            for (pos, &p) in rows.iter().enumerate() {
                left[(p / dl, p % dl)] = d.u[(pos, k)];
            }
            let mut right = ComplexMatrix::zeros(dr, dr);
            for (pos, &q) in cols.iter().enumerate() {
                right[(q / dr, q % dr)] = d.v[(pos, k)].conj();
            }
            terms.push(SchmidtTerm { weight: s, left, right });
        } else {
            dropped += s * s;
        }
    }
    let rank = terms.len();
    let tail = if norm > 0.0 { dropped.sqrt() / norm } else { 0.0 };
    Ok(OperatorSchmidtDecomposition { terms, rank, truncation_tol: tol, tail, norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cut22() -> BipartiteCut {
        BipartiteCut::new(2, 2).unwrap()
    }

    #[test]
    fn identity_rank_one() {
        let d = operator_schmidt(&ComplexMatrix::identity(4), &cut22(), 1e-10).unwrap();
        assert_eq!(d.rank, 1);
        assert!((d.terms[0].weight - 2.0).abs() < 1e-12);
    }

    #[test]
    fn swap_rank_four() {
        let mut s = ComplexMatrix::zeros(4, 4);
        for a in 0..2 {
            for c in 0..2 {
                s[(a * 2 + c, c * 2 + a)] = super::super::matrix::ONE;
            }
        }
        let d = operator_schmidt(&s, &cut22(), 1e-10).unwrap();
        assert_eq!(d.rank, 4);
        assert!((&d.reconstruct() - &s).max_abs() < 1e-12);
    }

    #[test]
    fn zero_operator() {
        let d = operator_schmidt(&ComplexMatrix::zeros(4, 4), &cut22(), 1e-10).unwrap();
        assert_eq!(d.rank, 0);
    }
}
