//! Von Neumann and one-shot entropies, mutual information and I_max.

mod brute;
mod imax;

pub use brute::imax_bruteforce;
pub use imax::{imax_seesaw, product_dmax, SeesawOptions};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    partial_trace, support_projector, trace_norm, BipartiteCut, ComplexMatrix, DensityOperator, HermitianOperator,
    Keep, SubState, SUPPORT_CUTOFF, SUPPORT_LEAK_TOL,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Seesaw,
    Bruteforce,
}

/// Value of an I_max-type minimization together with the product state that attains it.
#[derive(Clone, Debug)]
pub struct MeasureResult {
    pub value: f64,
    pub witness: Option<(DensityOperator, DensityOperator)>,
    pub method: Method,
    pub converged: bool,
    pub iterations: usize,
    pub distance_to_center: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureRecord {
    pub value_bits: f64,
    pub method: Method,
    pub converged: bool,
    pub iterations: usize,
    pub witness_present: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_to_center: Option<f64>,
}

impl MeasureResult {
    pub fn record(&self) -> MeasureRecord {
        MeasureRecord {
            value_bits: self.value,
            method: self.method,
            converged: self.converged,
            iterations: self.iterations,
            witness_present: self.witness.is_some(),
            distance_to_center: self.distance_to_center,
        }
    }

    /// 2^value · σ_L⊗σ_R as a dense operator.
    pub fn witness_operator(&self) -> Option<ComplexMatrix> {
        self.witness.as_ref().map(|(l, r)| {
            crate::linalg::matrix::kron(l.matrix(), r.matrix()).scale(self.value.exp2())
        })
    }
}

/// −Σ λ log₂ λ over the support, on the unnormalized spectrum.
pub fn von_neumann_entropy(rho: &SubState) -> f64 {
    let top = rho.lambda_max();
    let s: f64 = rho
        .eigen()
        .values
        .iter()
        .filter(|&&x| x > SUPPORT_CUTOFF * top && x > 0.0)
        .map(|&x| -x * x.log2())
        .sum();
    s.max(0.0)
}

/// Support eigenvectors of σ and the mass of ρ outside them.
fn support_check(rho: &SubState, sigma: &SubState) -> Result<(ComplexMatrix, Vec<f64>)> {
    let idx = sigma.support(SUPPORT_CUTOFF);
    let vs = sigma.eigen().vectors.select(&idx);
    let mu: Vec<f64> = idx.iter().map(|&i| sigma.eigen().values[i]).collect();
    let w = rho.factor(SUPPORT_CUTOFF);
    let inside = vs.adjoint_matmul(&w).frobenius_norm().powi(2);
    let leaked = (rho.trace() - inside).max(0.0);
    if leaked > SUPPORT_LEAK_TOL {
        return Err(Error::Support { leaked });
    }
    Ok((vs, mu))
}

/// D(ρ‖σ) = Tr ρ log ρ − Tr ρ log σ, in bits.
pub fn rel_entropy(rho: &SubState, sigma: &SubState) -> Result<f64> {
    let (vs, mu) = support_check(rho, sigma)?;
    let neg_s = -von_neumann_entropy(rho);
    let proj = vs.adjoint_matmul(&rho.matrix().matmul(&vs));
    let cross: f64 = mu.iter().enumerate().map(|(k, &m)| proj[(k, k)].re * m.log2()).sum();
    Ok(neg_s - cross)
}

/// D_max(ρ‖σ) = log₂ λ_max(σ^{-1/2} ρ σ^{-1/2}) on supp σ.
pub fn dmax(rho: &SubState, sigma: &SubState) -> Result<f64> {
    let (vs, mu) = support_check(rho, sigma)?;
    let w = rho.factor(SUPPORT_CUTOFF);
    let mut b = vs.adjoint_matmul(&w);
    for j in 0..b.cols() {
        for (z, m) in b.col_mut(j).iter_mut().zip(&mu) {
            *z /= m.sqrt();
        }
    }
    // nonzero spectra of B†B and BB† coincide; use the smaller one
    let m = if b.cols() <= b.rows() { b.adjoint_matmul(&b) } else { b.matmul_adjoint(&b) };
    let top = crate::linalg::lambda_max(&m.hermitian_part())?;
    Ok(if top > 0.0 { top.log2() } else { f64::NEG_INFINITY })
}

/// D_min(ρ‖σ) = −log₂ Tr(Π_ρ σ).
pub fn dmin(rho: &SubState, sigma: &SubState) -> Result<f64> {
    let idx = rho.support(SUPPORT_CUTOFF);
    let v = rho.eigen().vectors.select(&idx);
    let overlap = v.adjoint_matmul(&sigma.matrix().matmul(&v)).trace().re;
    if overlap <= 1e-300 {
        return Err(Error::Support { leaked: sigma.trace() });
    }
    Ok(-overlap.log2())
}

/// S(ρ_L) + S(ρ_R) − S(ρ).
pub fn mutual_info(rho: &SubState, cut: &BipartiteCut) -> Result<f64> {
    let l = rho.marginal(cut, Keep::Left)?;
    let r = rho.marginal(cut, Keep::Right)?;
    Ok(von_neumann_entropy(&l) + von_neumann_entropy(&r) - von_neumann_entropy(rho))
}

/// (|I(ρ) − I(σ)|, (3/2)·log₂(d_L)·‖ρ−σ‖₁ + 3).
pub fn continuity_gap(rho: &SubState, sigma: &SubState, cut: &BipartiteCut) -> Result<(f64, f64)> {
    let lhs = (mutual_info(rho, cut)? - mutual_info(sigma, cut)?).abs();
    let dist = trace_norm(&(rho.matrix() - sigma.matrix()));
    Ok((lhs, 1.5 * (cut.d_l as f64).log2() * dist + 3.0))
}

/// A sub-state within trace distance ε of a center.
#[derive(Clone, Debug)]
pub struct SmoothingBall {
    pub center: SubState,
    pub radius: f64,
    pub member: SubState,
    distance: f64,
}

impl SmoothingBall {
    pub fn new(center: SubState, radius: f64, member: SubState) -> Result<Self> {
        if !(radius > 0.0 && radius <= 1.0) {
            return Err(Error::contract("smoothing radius must lie in (0, 1]"));
        }
        let distance = trace_norm(&(member.matrix() - center.matrix()));
        if distance > radius + 1e-9 {
            return Err(Error::contract(format!("member lies at distance {distance} > {radius}")));
        }
        Ok(Self { center, radius, member, distance })
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }
}

/// I_max of the ball member, an upper bound on the smoothed I_max of the center.
pub fn smoothed_imax_member(ball: &SmoothingBall, cut: &BipartiteCut, opts: &SeesawOptions) -> Result<MeasureResult> {
    let mut r = imax_seesaw(&ball.member, cut, opts)?;
    r.distance_to_center = Some(ball.distance);
    Ok(r)
}

/// Exact witness check: smallest eigenvalue of 2^value·σ_L⊗σ_R − ρ.
pub fn witness_margin(result: &MeasureResult, rho: &SubState) -> Result<Option<f64>> {
    match result.witness_operator() {
        None => Ok(None),
        Some(w) => Ok(Some(crate::linalg::domination_margin(rho.matrix(), &w, 1.0)?)),
    }
}

/// Marginals of a sub-state as density operators (used by examples and the CLI).
pub fn normalized_marginals(rho: &SubState, cut: &BipartiteCut) -> Result<(DensityOperator, DensityOperator)> {
    let l = HermitianOperator::new_unchecked(partial_trace(rho.matrix(), cut, Keep::Left)?);
    let r = HermitianOperator::new_unchecked(partial_trace(rho.matrix(), cut, Keep::Right)?);
    Ok((SubState::new(l)?.normalized()?, SubState::new(r)?.normalized()?))
}

/// Projector onto supp ρ normalized to a state.
pub fn flat_support_state(rho: &SubState) -> Result<DensityOperator> {
    let p = support_projector(rho, SUPPORT_CUTOFF)?;
    let tr = p.matrix().trace().re;
    DensityOperator::from_matrix(p.matrix().scale(1.0 / tr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, ONE, ZERO};

    fn diag(d: &[f64]) -> SubState {
        SubState::from_matrix(ComplexMatrix::from_real_diag(d)).unwrap()
    }

    #[test]
    fn entropies() {
        assert!(von_neumann_entropy(&diag(&[1.0, 0.0])).abs() < 1e-15);
        assert!((von_neumann_entropy(&diag(&[0.25; 4])) - 2.0).abs() < 1e-14);
        let h = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert!((von_neumann_entropy(&diag(&[0.75, 0.25])) - h).abs() < 1e-14);
        assert!((h - 0.811278).abs() < 1e-6);
    }

    #[test]
    fn relative_entropies() {
        let r = diag(&[0.75, 0.25]);
        assert!(rel_entropy(&r, &r).unwrap().abs() < 1e-14);
        assert!((rel_entropy(&diag(&[1.0, 0.0]), &diag(&[0.5, 0.5])).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(rel_entropy(&diag(&[0.5, 0.5]), &diag(&[1.0, 0.0])), Err(Error::Support { .. })));
        assert!((dmax(&r, &diag(&[0.5, 0.5])).unwrap() - 1.5f64.log2()).abs() < 1e-14);
        assert!(dmax(&r, &r).unwrap().abs() < 1e-12);
        assert!((dmin(&diag(&[1.0, 0.0]), &diag(&[0.5, 0.5])).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn flat_nested_pair() {
        let mut a = vec![0.0; 8];
        a[0] = 0.5;
        a[1] = 0.5;
        let rho = diag(&a);
        let sigma = diag(&[0.125; 8]);
        assert!((dmax(&rho, &sigma).unwrap() - 2.0).abs() < 1e-12);
        assert!((dmin(&rho, &sigma).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_examples() {
        let cut = BipartiteCut::new(2, 2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DensityOperator::pure(&[ONE * s, ZERO, ZERO, ONE * s]).unwrap();
        assert!((mutual_info(&bell, &cut).unwrap() - 2.0).abs() < 1e-12);
        assert!((mutual_info(&diag(&[0.5, 0.0, 0.0, 0.5]), &cut).unwrap() - 1.0).abs() < 1e-12);
        let prod = diag(&[0.75 * 0.5, 0.75 * 0.5, 0.25 * 0.5, 0.25 * 0.5]);
        assert!(mutual_info(&prod, &cut).unwrap().abs() < 1e-12);
        let (lhs, rhs) = continuity_gap(&prod, &prod, &cut).unwrap();
        assert!(lhs.abs() < 1e-12 && (rhs - 3.0).abs() < 1e-12);
        let (lhs, rhs) = continuity_gap(&bell, &diag(&[0.25; 4]), &cut).unwrap();
        assert!((lhs - 2.0).abs() < 1e-12 && rhs >= 2.0);
        let _ = c64::new(0.0, 0.0);
    }

    #[test]
    fn ball_rejects_far_member() {
        let c = diag(&[1.0, 0.0]);
        let m = diag(&[0.0, 1.0]);
        assert!(SmoothingBall::new(c.clone(), 0.5, m).is_err());
        let ball = SmoothingBall::new(c.clone(), 0.5, c).unwrap();
        assert_eq!(ball.distance(), 0.0);
    }
}
