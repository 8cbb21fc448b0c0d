//! Product-state domination of mixtures, of vectorized operators and of
//! mixtures conjugated by a low Schmidt rank operator.
//!
//! The conjugated case never forms the purification. For a product term
//! ρ_L⊗ρ_R and K = Σ_k w_k X_k⊗Y_k, the purified vector is Σ_k w_k
//! vec(A_k)⊗vec(B_k) with A_k = X_k√ρ_L and B_k = Y_k√ρ_R. Its Schmidt
//! decomposition follows from the Gram matrices of {A_k} and {B_k}, and the
//! partial traces of the span projectors are Σ_j Φ_jΦ_j† with Φ_j a linear
//! combination of the A_k.

use serde::Serialize;

use super::flat::{ClassTerm, FlatEmbedding};
use super::CERT_TOL;
use crate::error::{Error, Result};
use crate::linalg::matrix::{check_dim, kron};
use crate::linalg::{
    c64, domination_margin, eigh, operator_schmidt, svd, BipartiteCut, ComplexMatrix, DensityOperator,
    OperatorSchmidtDecomposition, SUPPORT_CUTOFF, ZERO,
};

/// Truncation used for the Schmidt decomposition of K in `dominate_conjugated`.
pub const SCHMIDT_TOL: f64 = 1e-12;
/// Relative cutoff for Gram eigenvalues and purification singular values.
const SPAN_TOL: f64 = 1e-12;
/// Largest ambient dimension at which dense certificates are computed.
const CERTIFY_DIM: usize = 1024;

#[derive(Clone, Debug)]
pub struct ProductDomination {
    pub tau_l: DensityOperator,
    pub tau_r: DensityOperator,
    pub factor: f64,
    /// λ_min(factor·τ_L⊗τ_R − operand) when computed.
    pub margin: Option<f64>,
    pub terms: usize,
}

#[derive(Clone, Debug)]
pub struct ConjugatedDomination {
    pub tau_l: DensityOperator,
    pub tau_r: DensityOperator,
    /// (D·M)², the factor of the lemma statement.
    pub factor: f64,
    /// N²·peak/trace ≤ factor, the factor actually certified for the normalized operand.
    pub tight_factor: f64,
    pub terms: usize,
    pub schmidt_rank: usize,
    /// Total number of Schmidt vectors over all terms.
    pub n_total: usize,
    /// Tr(K ρ K†).
    pub trace: f64,
    /// max over terms of p_i·Tr(K ρ_i K†).
    pub peak: f64,
    pub margin: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationRecord {
    pub terms: usize,
    pub schmidt_rank: usize,
    pub n_total: usize,
    pub factor: f64,
    pub tight_factor: f64,
    pub trace: f64,
    pub peak: f64,
    pub margin: Option<f64>,
}

impl ConjugatedDomination {
    pub fn record(&self) -> DominationRecord {
        DominationRecord {
            terms: self.terms,
            schmidt_rank: self.schmidt_rank,
            n_total: self.n_total,
            factor: self.factor,
            tight_factor: self.tight_factor,
            trace: self.trace,
            peak: self.peak,
            margin: self.margin,
        }
    }

    /// Unnormalized form: K ρ K† ≼ n_total²·peak·τ_L⊗τ_R.
    pub fn unnormalized_factor(&self) -> f64 {
        (self.n_total * self.n_total) as f64 * self.peak
    }
}

type Term = (f64, DensityOperator, DensityOperator);

fn check_terms(terms: &[Term]) -> Result<(usize, usize)> {
    let first = terms.first().ok_or_else(|| Error::contract("mixture must have at least one term"))?;
    let dims = (first.1.dim(), first.2.dim());
    let mut total = 0.0;
    for (p, l, r) in terms {
        if !(*p >= 0.0) {
            return Err(Error::contract("mixture weights must be nonnegative"));
        }
        if (l.dim(), r.dim()) != dims {
            return Err(Error::Shape("mixture terms have different dimensions".into()));
        }
        total += p;
    }
    if total > 1.0 + 1e-9 {
        return Err(Error::contract(format!("mixture weights sum to {total} > 1")));
    }
    Ok(dims)
}

fn mixture_operator(terms: &[Term]) -> ComplexMatrix {
    let mut out: Option<ComplexMatrix> = None;
    for (p, l, r) in terms {
        let k = kron(l.matrix(), r.matrix()).scale(*p);
        out = Some(match out {
            None => k,
            Some(o) => &o + &k,
        });
    }
    out.expect("nonempty mixture")
}

fn certify(operand: &ComplexMatrix, l: &DensityOperator, r: &DensityOperator, factor: f64) -> Result<Option<f64>> {
    if operand.rows() > CERTIFY_DIM {
        return Ok(None);
    }
    let margin = domination_margin(operand, &kron(l.matrix(), r.matrix()), factor)?;
    if margin < -CERT_TOL * factor.max(1.0) {
        return Err(Error::contract_psd("product domination certificate failed", margin));
    }
    Ok(Some(margin))
}

fn density(m: ComplexMatrix) -> Result<DensityOperator> {
    let tr = m.trace().re;
    if !(tr > 0.0) {
        return Err(Error::contract("dominating operator vanished"));
    }
    DensityOperator::from_matrix(m.hermitian_part().scale(1.0 / tr))
}

/// Σ p_i ρ_L^i⊗ρ_R^i ≼ D²·θ_L⊗θ_R with θ the averaged marginals.
pub fn dominate_mixture(terms: &[Term]) -> Result<ProductDomination> {
    let (dl, dr) = check_terms(terms)?;
    let d = terms.len();
    let avg = |pick: fn(&Term) -> &DensityOperator, n: usize| {
        terms.iter().fold(ComplexMatrix::zeros(n, n), |acc, t| acc.axpy(1.0 / d as f64, pick(t).matrix()))
    };
    let tau_l = density(avg(|t| &t.1, dl))?;
    let tau_r = density(avg(|t| &t.2, dr))?;
    let factor = (d * d) as f64;
    let margin = if dl * dr <= CERTIFY_DIM { certify(&mixture_operator(terms), &tau_l, &tau_r, factor)? } else { None };
    Ok(ProductDomination { tau_l, tau_r, factor, margin, terms: d })
}

/// M M† ≼ D²·τ_L⊗τ_R for ‖M‖₂ = 1, with τ_L = Σ L_iL_i†/D over the Schmidt operators.
pub fn dominate_vec(m: &ComplexMatrix, cut: &BipartiteCut) -> Result<ProductDomination> {
    cut.check(m)?;
    let norm = m.frobenius_norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::contract(format!("operator must have unit 2-norm (found {norm})")));
    }
    let dec = operator_schmidt(m, cut, SCHMIDT_TOL)?;
    let d = dec.rank;
    let mut l = ComplexMatrix::zeros(cut.d_l, cut.d_l);
    let mut r = ComplexMatrix::zeros(cut.d_r, cut.d_r);
    for t in &dec.terms {
        l = &l + &t.left.matmul_adjoint(&t.left);
        r = &r + &t.right.matmul_adjoint(&t.right);
    }
    let tau_l = density(l)?;
    let tau_r = density(r)?;
    let factor = (d * d) as f64;
    let margin = if cut.dim() <= CERTIFY_DIM { certify(&m.matmul_adjoint(m), &tau_l, &tau_r, factor)? } else { None };
    Ok(ProductDomination { tau_l, tau_r, factor, margin, terms: d })
}

/// Operators A_k split into orthogonal parts: ⟨A_k, A_k'⟩ = Σ_parts Tr(A_k,s† A_k',s).
/// The partial trace of a vector Σ_k β_k vec(A_k) is Σ_s Φ_sΦ_s† with Φ_s = Σ_k β_k A_k,s.
struct SpanSet {
    parts: Vec<Vec<ComplexMatrix>>,
    rows: usize,
    len: usize,
}

impl SpanSet {
    /// {X_k F_s} for thin factors F_s.
    fn new(ops: &[&ComplexMatrix], factors: &[ComplexMatrix]) -> Self {
        let rows = ops.first().map(|x| x.rows()).unwrap_or(0);
        let parts = factors.iter().map(|f| ops.iter().map(|x| x.matmul(f)).collect()).collect();
        Self { parts, rows, len: ops.len() }
    }

    fn gram(&self) -> ComplexMatrix {
        let n = self.len;
        let mut g = ComplexMatrix::zeros(n, n);
        for part in &self.parts {
            for a in 0..n {
                for b in a..n {
                    let z = part[a].hs_inner(&part[b]);
                    g[(a, b)] += z;
                    if a != b {
                        g[(b, a)] += z.conj();
                    }
                }
            }
        }
        g
    }

    fn reduce(&self, beta: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.rows, self.rows);
        for part in &self.parts {
            let cols = part.first().map(|x| x.cols()).unwrap_or(0);
            for j in 0..beta.cols() {
                let mut phi = ComplexMatrix::zeros(self.rows, cols);
                for (k, a) in part.iter().enumerate() {
                    let b = beta[(k, j)];
                    if b != ZERO {
                        phi = &phi + &a.scale_c(b);
                    }
                }
                out = &out + &phi.matmul_adjoint(&phi);
            }
        }
        out
    }
}

struct TermSpan {
    n: usize,
    norm2: f64,
    left: ComplexMatrix,
    right: ComplexMatrix,
}

/// Orthonormal coordinates of a span from its Gram matrix: returns V Λ^{-1/2}
/// (M×a) and C = Λ^{1/2} V† (a×M), so that A_k = Σ_a e_a C[a,k].
fn span_coordinates(g: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let e = eigh(&g.hermitian_part())?;
    let keep = e.support_indices(SPAN_TOL);
    let v = e.vectors.select(&keep);
    let mut inv = v.clone();
    let mut coords = ComplexMatrix::zeros(keep.len(), v.rows());
    for (a, &i) in keep.iter().enumerate() {
        let l = e.values[i];
        for z in inv.col_mut(a) {
            *z /= l.sqrt();
        }
        for k in 0..v.rows() {
            coords[(a, k)] = v[(k, a)].conj() * l.sqrt();
        }
    }
    Ok((inv, coords))
}

fn term_span(left: &SpanSet, right: &SpanSet, weights: &[f64]) -> Result<TermSpan> {
    let (inv_l, cl) = span_coordinates(&left.gram())?;
    let (inv_r, cr) = span_coordinates(&right.gram())?;
    let empty = |s: &SpanSet| ComplexMatrix::zeros(s.rows, s.rows);
    if cl.rows() == 0 || cr.rows() == 0 {
        return Ok(TermSpan { n: 0, norm2: 0.0, left: empty(left), right: empty(right) });
    }
    let mut scaled = cl.clone();
    for (k, &w) in weights.iter().enumerate() {
        for z in scaled.col_mut(k) {
            *z *= w;
        }
    }
    let t = scaled.matmul(&cr.transpose());
    let d = svd(&t)?;
    let top = d.s.first().copied().unwrap_or(0.0);
    let norm2: f64 = d.s.iter().map(|s| s * s).sum();
    let keep: Vec<usize> = (0..d.s.len()).filter(|&j| top > 0.0 && d.s[j] > SPAN_TOL * top).collect();
    if keep.is_empty() {
        return Ok(TermSpan { n: 0, norm2, left: empty(left), right: empty(right) });
    }
    let beta_l = inv_l.matmul(&d.u.select_columns(&keep));
    let beta_r = inv_r.matmul(&d.v.select_columns(&keep).conj());
    Ok(TermSpan { n: keep.len(), norm2, left: left.reduce(&beta_l), right: right.reduce(&beta_r) })
}

struct Accumulated {
    tau_l: ComplexMatrix,
    tau_r: ComplexMatrix,
    n_total: usize,
    trace: f64,
    peak: f64,
}

fn accumulate(spans: impl IntoIterator<Item = Result<(f64, TermSpan)>>, dl: usize, dr: usize) -> Result<Accumulated> {
    let mut acc = Accumulated {
        tau_l: ComplexMatrix::zeros(dl, dl),
        tau_r: ComplexMatrix::zeros(dr, dr),
        n_total: 0,
        trace: 0.0,
        peak: 0.0,
    };
    for item in spans {
        let (p, span) = item?;
        if span.n == 0 {
            continue;
        }
        acc.tau_l = &acc.tau_l + &span.left;
        acc.tau_r = &acc.tau_r + &span.right;
        acc.n_total += span.n;
        acc.trace += p * span.norm2;
        acc.peak = acc.peak.max(p * span.norm2);
    }
    if acc.n_total == 0 || acc.trace <= 0.0 {
        return Err(Error::contract("conjugated mixture vanishes"));
    }
    Ok(acc)
}

fn finish(acc: Accumulated, terms: usize, schmidt_rank: usize) -> Result<ConjugatedDomination> {
    let n = acc.n_total as f64;
    Ok(ConjugatedDomination {
        tau_l: density(acc.tau_l)?,
        tau_r: density(acc.tau_r)?,
        factor: ((terms * schmidt_rank) as f64).powi(2),
        tight_factor: n * n * acc.peak / acc.trace,
        terms,
        schmidt_rank,
        n_total: acc.n_total,
        trace: acc.trace,
        peak: acc.peak,
        margin: None,
    })
}

/// K ρ K†/Tr ≼ factor·τ_L⊗τ_R for a mixture ρ of product states.
pub fn dominate_conjugated(k: &ComplexMatrix, terms: &[Term], cut: &BipartiteCut) -> Result<ConjugatedDomination> {
    let (dl, dr) = check_terms(terms)?;
    if (dl, dr) != (cut.d_l, cut.d_r) {
        return Err(Error::Shape("mixture does not match the cut".into()));
    }
    check_dim(cut.dim() * cut.dim(), "purified space")?;
    let dec = operator_schmidt(k, cut, SCHMIDT_TOL)?;
    let xs: Vec<&ComplexMatrix> = dec.terms.iter().map(|t| &t.left).collect();
    let ys: Vec<&ComplexMatrix> = dec.terms.iter().map(|t| &t.right).collect();
    let w: Vec<f64> = dec.terms.iter().map(|t| t.weight).collect();
    let spans = terms.iter().map(|(p, l, r)| {
        let left = SpanSet::new(&xs, &[l.factor(SUPPORT_CUTOFF)]);
        let right = SpanSet::new(&ys, &[r.factor(SUPPORT_CUTOFF)]);
        term_span(&left, &right, &w).map(|s| (*p, s))
    });
    let acc = accumulate(spans, dl, dr)?;
    let mut out = finish(acc, terms.len(), dec.rank)?;
    if cut.dim() <= CERTIFY_DIM {
        let rho = mixture_operator(terms);
        let conj = k.matmul(&rho).matmul_adjoint(k).scale(1.0 / out.trace);
        out.margin = certify(&conj, &out.tau_l, &out.tau_r, out.tight_factor)?;
    }
    Ok(out)
}

/// Level segments of one class on the first `keep` levels of B: thin factors
/// √(len/z)·[r_y : m_y ≥ top of segment].
fn class_segments(class: &ClassTerm, keep: u64) -> Vec<ComplexMatrix> {
    let mut tops: Vec<u64> = class.right.iter().map(|r| r.1.min(keep)).filter(|&m| m > 0).collect();
    tops.sort_unstable();
    tops.dedup();
    let rows = class.right.first().map(|r| r.0.len()).unwrap_or(0);
    let mut lo = 0;
    let mut out = Vec::with_capacity(tops.len());
    for &hi in &tops {
        let s = ((hi - lo) as f64 / class.z as f64).sqrt();
        let cols: Vec<Vec<c64>> = class
            .right
            .iter()
            .filter(|r| r.1.min(keep) >= hi)
            .map(|r| r.0.iter().map(|z| z * s).collect())
            .collect();
        out.push(ComplexMatrix::from_columns(rows, &cols));
        lo = hi;
    }
    out
}

/// Domination of Tr_B((K⊗Π_keep) σ_AB (K⊗Π_keep)†) for the flat σ_AB of a
/// product embedding, where K = Σ w_k X_k⊗Y_k acts on A = L⊗R. The returned
/// τ_R is already traced over B. `factor` uses D = number of τ_L classes.
pub fn dominate_conjugated_flat(
    k: &OperatorSchmidtDecomposition,
    emb: &FlatEmbedding,
    keep: u64,
) -> Result<ConjugatedDomination> {
    let classes = emb.classes()?;
    let xs: Vec<&ComplexMatrix> = k.terms.iter().map(|t| &t.left).collect();
    let ys: Vec<&ComplexMatrix> = k.terms.iter().map(|t| &t.right).collect();
    let w: Vec<f64> = k.terms.iter().map(|t| t.weight).collect();
    let dl = xs.first().map(|x| x.rows()).ok_or_else(|| Error::contract("empty Schmidt decomposition"))?;
    let dr = ys[0].rows();
    let spans = classes.iter().map(|c| {
        let lf = c.left.scale(1.0 / (c.left.cols() as f64).sqrt());
        let left = SpanSet::new(&xs, &[lf]);
        let right = SpanSet::new(&ys, &class_segments(c, keep));
        term_span(&left, &right, &w).map(|s| (c.weight, s))
    });
    let acc = accumulate(spans, dl, dr)?;
    finish(acc, classes.len(), k.rank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{lambda_min, ONE};

    fn pure(v: &[f64]) -> DensityOperator {
        let c: Vec<c64> = v.iter().map(|&x| c64::new(x, 0.0)).collect();
        DensityOperator::pure(&c).unwrap()
    }

    #[test]
    fn single_term_mixture() {
        let l = pure(&[0.6, 0.8]);
        let r = DensityOperator::maximally_mixed(2);
        let out = dominate_mixture(&[(1.0, l.clone(), r.clone())]).unwrap();
        assert_eq!(out.factor, 1.0);
        assert!(out.margin.unwrap().abs() < 1e-12);
    }

    #[test]
    fn orthogonal_pair_needs_four() {
        let terms = vec![(0.5, pure(&[1.0, 0.0]), pure(&[1.0, 0.0])), (0.5, pure(&[0.0, 1.0]), pure(&[0.0, 1.0]))];
        let out = dominate_mixture(&terms).unwrap();
        assert_eq!(out.factor, 4.0);
        assert!(out.margin.unwrap() >= -1e-12);
    }

    #[test]
    fn identical_terms() {
        let l = DensityOperator::maximally_mixed(2);
        let terms = vec![(1.0 / 3.0, l.clone(), l.clone()); 3];
        let out = dominate_mixture(&terms).unwrap();
        assert_eq!(out.factor, 9.0);
        // 9·I/4 − I/4 = 2 I
        assert!((out.margin.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn vec_examples() {
        let cut = BipartiteCut::new(2, 2).unwrap();
        let id = ComplexMatrix::identity(4).scale(0.5);
        let out = dominate_vec(&id, &cut).unwrap();
        assert_eq!(out.factor, 1.0);
        let mut swap = ComplexMatrix::zeros(4, 4);
        for a in 0..2 {
            for b in 0..2 {
                swap[(a * 2 + b, b * 2 + a)] = ONE;
            }
        }
        let out = dominate_vec(&swap.scale(0.5), &cut).unwrap();
        assert_eq!(out.factor, 16.0);
        assert!(out.margin.unwrap() >= -1e-9);
        assert!(dominate_vec(&swap, &cut).is_err());
    }

    #[test]
    fn identity_conjugation_is_tight() {
        let cut = BipartiteCut::new(2, 2).unwrap();
        let l = pure(&[0.6, 0.8]);
        let r = pure(&[1.0, 0.0]);
        let out = dominate_conjugated(&ComplexMatrix::identity(4), &[(1.0, l.clone(), r.clone())], &cut).unwrap();
        assert_eq!(out.factor, 1.0);
        assert_eq!(out.n_total, 1);
        assert!((out.tau_l.matrix() - l.matrix()).max_abs() < 1e-12);
        assert!(out.margin.unwrap().abs() < 1e-12);
    }

    #[test]
    fn cnot_conjugation() {
        let cut = BipartiteCut::new(2, 2).unwrap();
        let mut cnot = ComplexMatrix::zeros(4, 4);
        for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            cnot[(i, j)] = ONE;
        }
        let plus = pure(&[std::f64::consts::FRAC_1_SQRT_2; 2]);
        let zero = pure(&[1.0, 0.0]);
        let out = dominate_conjugated(&cnot, &[(1.0, plus, zero)], &cut).unwrap();
        assert_eq!(out.schmidt_rank, 2);
        assert_eq!(out.factor, 4.0);
        assert!(out.tight_factor <= 4.0 + 1e-12);
        assert!(out.margin.unwrap() >= -1e-9);
        let p = kron(out.tau_l.matrix(), out.tau_r.matrix()).scale(out.factor);
        let bell = {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            DensityOperator::pure(&[ONE * s, ZERO, ZERO, ONE * s]).unwrap()
        };
        assert!(lambda_min(&(&p - bell.matrix())).unwrap() >= -1e-9);
    }

    #[test]
    fn flat_conjugation_matches_dense_operand() {
        use crate::constructions::flat::{flat_embed_product, FlatOptions};
        let cut = BipartiteCut::new(2, 2).unwrap();
        let l = DensityOperator::from_matrix(ComplexMatrix::from_real_diag(&[0.5, 0.5])).unwrap();
        let r = DensityOperator::from_matrix(ComplexMatrix::from_real(2, 2, &[0.7, 0.1, 0.1, 0.3]).unwrap()).unwrap();
        let rho = crate::linalg::SubState::from_matrix(kron(l.matrix(), r.matrix())).unwrap();
        let opts = FlatOptions { resolution: 8, multiple_of: 2, max_d_b: 64 };
        let emb = flat_embed_product(&rho, &l, &r, &cut, 0.2, &opts).unwrap();
        let k = ComplexMatrix::from_fn(4, 4, |i, j| c64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, (i as f64 - j as f64) * 0.3));
        let dec = operator_schmidt(&k, &cut, SCHMIDT_TOL).unwrap();
        let out = dominate_conjugated_flat(&dec, &emb, 4).unwrap();
        let operand = k.matmul(&emb.sigma_reduced(4)).matmul_adjoint(&k);
        assert!((operand.trace().re - out.trace).abs() < 1e-10 * out.trace);
        let m = domination_margin(&operand, &kron(out.tau_l.matrix(), out.tau_r.matrix()), out.unnormalized_factor())
            .unwrap();
        assert!(m >= -1e-9, "margin {m}");
        assert!(out.tight_factor <= out.factor + 1e-9);
    }
}
