use std::ops::Deref;

use super::cut::{partial_trace, BipartiteCut, Keep};
use super::matrix::{c64, eigh, eigvalsh, ComplexMatrix, Eigen, Eigenvectors};
use crate::error::{Error, Result};

/// Relative support cutoff used when a caller does not supply one.
pub const SUPPORT_CUTOFF: f64 = 1e-12;
/// Relative tolerance for treating an operator as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;
/// Absolute slack on traces of sub-states.
pub const TRACE_TOL: f64 = 1e-10;
/// Mass allowed to leak outside a reference support.
pub const SUPPORT_LEAK_TOL: f64 = 1e-9;

/// Square matrix certified Hermitian at construction.
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    m: ComplexMatrix,
}

impl HermitianOperator {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Shape(format!("{}x{} operator is not square", m.rows(), m.cols())));
        }
        if !m.is_finite() {
            return Err(Error::Shape("operator has non-finite entries".into()));
        }
        let defect = m.hermitian_defect();
        if defect > 1e-12 * m.max_abs().max(1.0) {
            return Err(Error::contract(format!("operator is not Hermitian (defect {defect:.3e})")));
        }
        Ok(Self::new_unchecked(m))
    }

    /// Symmetrizes without the tolerance check; for operators Hermitian by construction.
    pub(crate) fn new_unchecked(m: ComplexMatrix) -> Self {
        if m.is_diagonal() {
            let d: Vec<f64> = m.diagonal().iter().map(|z| z.re).collect();
            return Self { m: ComplexMatrix::from_real_diag(&d) };
        }
        Self { m: m.hermitian_part() }
    }

    pub fn identity(n: usize) -> Self {
        Self { m: ComplexMatrix::identity(n) }
    }

    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.m
    }

    pub fn eigen(&self) -> Result<Eigen> {
        eigh(&self.m)
    }
}

/// Positive semidefinite operator with trace at most one.
#[derive(Clone, Debug)]
pub struct SubState {
    op: HermitianOperator,
    eig: Eigen,
    trace: f64,
}

impl SubState {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let eig = op.eigen()?;
        let top = eig.max();
        let low = eig.min();
        if low < -PSD_TOL * top.max(1.0) {
            return Err(Error::contract_psd("sub-state must be positive semidefinite", low));
        }
        let trace = op.matrix().trace().re;
        if trace > 1.0 + TRACE_TOL {
            return Err(Error::contract(format!("sub-state trace {trace} exceeds 1")));
        }
        Ok(Self { op, eig, trace })
    }

    pub fn from_matrix(m: ComplexMatrix) -> Result<Self> {
        Self::new(HermitianOperator::new(m)?)
    }

    /// ρ = W W†.
    pub fn from_factor(w: &ComplexMatrix) -> Result<Self> {
        Self::new(HermitianOperator::new_unchecked(w.matmul_adjoint(w)))
    }

    /// Σ λ_i |v_i><v_i| from an eigendecomposition, clamping tiny negatives.
    pub(crate) fn from_spectrum(vectors: &super::matrix::Eigenvectors, values: &[f64]) -> Result<Self> {
        Self::from_eigen(Eigen { values: values.to_vec(), vectors: vectors.clone() })
    }

    /// Builds the operator from a trusted eigendecomposition without
    /// diagonalizing again. Values are clamped at zero and sorted.
    pub(crate) fn from_eigen(eig: Eigen) -> Result<Self> {
        let Eigen { values, vectors } = eig;
        if let Some(&low) = values.iter().min_by(|a, b| a.total_cmp(b)) {
            let top = values.iter().cloned().fold(0.0, f64::max);
            if low < -PSD_TOL * top.max(1.0) {
                return Err(Error::contract_psd("sub-state must be positive semidefinite", low));
            }
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| values[i].max(0.0)).collect();
        let vectors = if order.iter().enumerate().all(|(k, &i)| k == i) {
            vectors
        } else {
            match vectors {
                Eigenvectors::Permutation { dim, perm } => {
                    Eigenvectors::Permutation { dim, perm: order.iter().map(|&i| perm[i]).collect() }
                }
                Eigenvectors::Dense(v) => Eigenvectors::Dense(v.select_columns(&order)),
            }
        };
        let trace: f64 = sorted.iter().sum();
        if trace > 1.0 + TRACE_TOL {
            return Err(Error::contract(format!("sub-state trace {trace} exceeds 1")));
        }
        let op = HermitianOperator::new_unchecked(vectors.reconstruct(&sorted));
        Ok(Self { op, eig: Eigen { values: sorted, vectors }, trace })
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.op.matrix()
    }

    pub fn eigen(&self) -> &Eigen {
        &self.eig
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn lambda_max(&self) -> f64 {
        self.eig.max()
    }

    /// Eigenvalues in nonincreasing order.
    pub fn spectrum_desc(&self) -> Vec<f64> {
        self.eig.values.iter().rev().copied().collect()
    }

    pub fn support(&self, cutoff: f64) -> Vec<usize> {
        self.eig.support_indices(cutoff)
    }

    pub fn rank(&self, cutoff: f64) -> usize {
        self.support(cutoff).len()
    }

    /// W with ρ ≈ W W†, columns √λ_i |v_i> over the support.
    pub fn factor(&self, cutoff: f64) -> ComplexMatrix {
        let idx = self.support(cutoff);
        let mut w = self.eig.vectors.select(&idx);
        for (k, &i) in idx.iter().enumerate() {
            let s = self.eig.values[i].sqrt();
            for z in w.col_mut(k) {
                *z *= s;
            }
        }
        w
    }

    pub fn is_diagonal(&self) -> bool {
        self.matrix().is_diagonal()
    }

    pub fn marginal(&self, cut: &BipartiteCut, keep: Keep) -> Result<SubState> {
        SubState::new(HermitianOperator::new_unchecked(partial_trace(self.matrix(), cut, keep)?))
    }

    pub fn normalized(&self) -> Result<DensityOperator> {
        if self.trace <= 0.0 {
            return Err(Error::contract("cannot normalize a zero operator"));
        }
        DensityOperator::new(HermitianOperator::new_unchecked(self.matrix().scale(1.0 / self.trace)))
    }
}

/// Sub-state with unit trace.
#[derive(Clone, Debug)]
pub struct DensityOperator(SubState);

impl DensityOperator {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        Self::from_substate(SubState::new(op)?)
    }

    pub fn from_matrix(m: ComplexMatrix) -> Result<Self> {
        Self::new(HermitianOperator::new(m)?)
    }

    pub fn from_substate(s: SubState) -> Result<Self> {
        if (s.trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::contract(format!("density operator trace {} differs from 1", s.trace)));
        }
        Ok(Self(s))
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self::from_matrix(ComplexMatrix::identity(n).scale(1.0 / n as f64)).expect("I/n is a state")
    }

    /// |v><v| for a unit vector.
    pub fn pure(v: &[c64]) -> Result<Self> {
        Self::from_matrix(ComplexMatrix::outer(v, v))
    }

    pub fn as_substate(&self) -> &SubState {
        &self.0
    }

    pub fn into_substate(self) -> SubState {
        self.0
    }

    pub fn marginal(&self, cut: &BipartiteCut, keep: Keep) -> Result<DensityOperator> {
        self.0.marginal(cut, keep)?.normalized()
    }
}

impl Deref for DensityOperator {
    type Target = SubState;
    fn deref(&self) -> &SubState {
        &self.0
    }
}

/// Projector onto eigenvectors with λ > cutoff·λ_max.
pub fn support_projector(rho: &SubState, cutoff: f64) -> Result<HermitianOperator> {
    if rho.lambda_max() <= 1e-300 {
        return Err(Error::contract("zero operator has no support"));
    }
    let idx = rho.support(cutoff);
    let ones = vec![1.0; idx.len()];
    Ok(HermitianOperator::new_unchecked(rho.eigen().vectors.reconstruct_subset(&idx, &ones)))
}

/// Projects ρ by Π and returns the gentle-measurement bound 2√Tr((1−Π)ρ).
pub fn gentle_measure(rho: &SubState, pi: &HermitianOperator) -> Result<(SubState, f64)> {
    let p = pi.matrix();
    if p.rows() != rho.dim() {
        return Err(Error::Shape("projector and state dimensions differ".into()));
    }
    let idem = (&p.matmul(p) - p).max_abs();
    if idem > 1e-10 {
        return Err(Error::contract(format!("operator is not a projector (‖Π²−Π‖ = {idem:.3e})")));
    }
    let projected = p.matmul(rho.matrix()).matmul(p);
    let kept = projected.trace().re;
    let bound = 2.0 * (rho.trace() - kept).max(0.0).sqrt();
    Ok((SubState::new(HermitianOperator::new_unchecked(projected))?, bound))
}

/// Same eigenbasis, eigenvalues min(λ_i, cap).
pub fn cap_eigenvalues(rho: &SubState, cap: f64) -> Result<SubState> {
    if cap <= 0.0 {
        return Err(Error::contract("eigenvalue cap must be positive"));
    }
    if rho.lambda_max() <= cap {
        return Ok(rho.clone());
    }
    let vals: Vec<f64> = rho.eigen().values.iter().map(|&x| x.min(cap)).collect();
    SubState::from_spectrum(&rho.eigen().vectors, &vals)
}

/// True when all eigenvalues above the support cutoff agree within relative `tol`.
pub fn is_flat(rho: &SubState, tol: f64) -> bool {
    let idx = rho.support(SUPPORT_CUTOFF);
    if idx.is_empty() {
        return false;
    }
    let vals: Vec<f64> = idx.iter().map(|&i| rho.eigen().values[i]).collect();
    let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
    let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
    (hi - lo) <= tol * hi
}

/// Smallest eigenvalue of `factor·dominator − operand`; the domination
/// `operand ≼ factor·dominator` holds when this is ≥ −1e-9.
pub fn domination_margin(operand: &ComplexMatrix, dominator: &ComplexMatrix, factor: f64) -> Result<f64> {
    let gap = dominator.scale(factor).axpy(-1.0, operand);
    Ok(eigvalsh(&gap.hermitian_part())?.first().copied().unwrap_or(0.0))
}

/// Smallest eigenvalue of `factor·σ_L⊗σ_R − operand`. Diagonal inputs are
/// handled entrywise without forming the product.
pub fn product_domination_margin(
    operand: &ComplexMatrix,
    left: &ComplexMatrix,
    right: &ComplexMatrix,
    factor: f64,
    cut: &BipartiteCut,
) -> Result<f64> {
    cut.check(operand)?;
    if operand.is_diagonal() && left.is_diagonal() && right.is_diagonal() {
        let mut low = f64::INFINITY;
        for a in 0..cut.d_l {
            for c in 0..cut.d_r {
                let i = a * cut.d_r + c;
                low = low.min(factor * left[(a, a)].re * right[(c, c)].re - operand[(i, i)].re);
            }
        }
        return Ok(low);
    }
    domination_margin(operand, &super::matrix::kron(left, right), factor)
}

/// ‖a − b‖₁, entrywise when both are diagonal.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    if a.is_diagonal() && b.is_diagonal() {
        return a.diagonal().iter().zip(b.diagonal()).map(|(x, y)| (x - y).norm()).sum();
    }
    super::matrix::trace_norm(&(a - b))
}

/// Mass of ρ outside the span of the given orthonormal columns.
pub fn leaked_mass(rho: &ComplexMatrix, basis: &ComplexMatrix) -> f64 {
    let inside = basis.adjoint_matmul(&rho.matmul(basis)).trace().re;
    (rho.trace().re - inside).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> SubState {
        SubState::from_matrix(ComplexMatrix::from_real_diag(d)).unwrap()
    }

    #[test]
    fn rejects_non_hermitian_and_non_psd() {
        let m = ComplexMatrix::from_real(2, 2, &[1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(HermitianOperator::new(m).is_err());
        assert!(SubState::from_matrix(ComplexMatrix::from_real_diag(&[0.5, -0.1])).is_err());
        assert!(SubState::from_matrix(ComplexMatrix::from_real_diag(&[0.7, 0.7])).is_err());
    }

    #[test]
    fn support_projectors() {
        let p = support_projector(&diag(&[0.5, 0.5, 0.0]), 1e-12).unwrap();
        assert!((p.matrix() - &ComplexMatrix::from_real_diag(&[1.0, 1.0, 0.0])).max_abs() < 1e-15);
        let d = 1e-15;
        let p = support_projector(&diag(&[1.0 - d, d]), 1e-12).unwrap();
        assert!((p.matrix().trace().re - 1.0).abs() < 1e-15);
        assert!(support_projector(&diag(&[0.0, 0.0]), 1e-12).is_err());
    }

    #[test]
    fn gentle_measure_cases() {
        let rho = diag(&[0.6, 0.4, 0.0]);
        let pi = support_projector(&rho, 1e-12).unwrap();
        let (r, b) = gentle_measure(&rho, &pi).unwrap();
        assert!(b.abs() < 1e-7 && (r.matrix() - rho.matrix()).max_abs() < 1e-15);
        let orth = HermitianOperator::new(ComplexMatrix::from_real_diag(&[0.0, 0.0, 1.0])).unwrap();
        let (_, b) = gentle_measure(&rho, &orth).unwrap();
        assert!((b - 2.0).abs() < 1e-12);
        let bad = HermitianOperator::new(ComplexMatrix::from_real_diag(&[0.5, 0.0, 1.0])).unwrap();
        assert!(gentle_measure(&rho, &bad).is_err());
    }

    #[test]
    fn capping_and_flatness() {
        let c = cap_eigenvalues(&diag(&[0.8, 0.2]), 0.5).unwrap();
        assert!((c.matrix() - &ComplexMatrix::from_real_diag(&[0.5, 0.2])).max_abs() < 1e-15);
        assert!(is_flat(&diag(&[0.25, 0.25, 0.0, 0.25]), 1e-9));
        assert!(!is_flat(&diag(&[0.75, 0.25]), 1e-6));
        assert!(is_flat(&diag(&[0.5, 0.5 + 1e-12]), 1e-9));
    }
}
