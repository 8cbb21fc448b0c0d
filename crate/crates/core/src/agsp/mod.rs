//! Approximate ground state projectors built as rescaled Chebyshev
//! polynomials of H, with (D, Δ) measured directly on the operator.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    eigh, lambda_max, operator_schmidt, spectral_norm, BipartiteCut, ComplexMatrix, Eigen, HermitianOperator,
    OperatorSchmidtDecomposition,
};

/// Default relative truncation for the operator Schmidt rank of K.
pub const TRUNCATION_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralData {
    pub e0: f64,
    pub e1: f64,
    pub emax: f64,
}

impl SpectralData {
    fn check(&self) -> Result<()> {
        if !(self.e0 < self.e1 && self.e1 <= self.emax) {
            return Err(Error::contract(format!(
                "spectral data must satisfy E0 < E1 <= Emax (got {}, {}, {})",
                self.e0, self.e1, self.emax
            )));
        }
        Ok(())
    }

    /// Eigenvalues below the midpoint of the gap count as ground.
    pub fn is_ground(&self, e: f64) -> bool {
        e < 0.5 * (self.e0 + self.e1)
    }
}

#[derive(Clone, Debug)]
pub struct Agsp {
    pub k: ComplexMatrix,
    pub cut: BipartiteCut,
    pub d: usize,
    pub delta: f64,
    pub degree: usize,
    pub fixes_gs_error: f64,
    /// 1/T_ℓ(x(E_0))², the Chebyshev envelope for Δ.
    pub envelope_delta: f64,
    pub truncation_tol: f64,
    pub schmidt: OperatorSchmidtDecomposition,
    /// Set when E_1 = E_max and the affine projector replaced the polynomial.
    pub affine_fallback: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct AgspCertificate {
    pub degree: usize,
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "Delta")]
    pub delta: f64,
    #[serde(rename = "envelope_Delta")]
    pub envelope_delta: f64,
    pub fixes_gs_error: f64,
    pub truncation_tol: f64,
    pub schmidt_tail: f64,
    pub affine_fallback: bool,
}

impl Agsp {
    pub fn certificate(&self) -> AgspCertificate {
        AgspCertificate {
            degree: self.degree,
            d: self.d,
            delta: self.delta,
            envelope_delta: self.envelope_delta,
            fixes_gs_error: self.fixes_gs_error,
            truncation_tol: self.truncation_tol,
            schmidt_tail: self.schmidt.tail,
            affine_fallback: self.affine_fallback,
        }
    }

    /// D²·Δ.
    pub fn shrink_product(&self) -> f64 {
        (self.d * self.d) as f64 * self.delta
    }
}

/// T_ℓ(x)/T_ℓ(x0) for |x0| > 1, evaluated without overflow.
pub fn chebyshev_ratio(x: f64, x0: f64, degree: usize) -> f64 {
    let l = degree as f64;
    let a0 = x0.abs().acosh();
    let odd = degree % 2 == 1;
    let sign0 = if x0 < 0.0 && odd { -1.0 } else { 1.0 };
    let d0 = 1.0 + (-2.0 * l * a0).exp();
    if x.abs() <= 1.0 {
        let num = (l * x.acos()).cos();
        num * sign0 * 2.0 * (-l * a0).exp() / d0
    } else {
        let a = x.abs().acosh();
        let s = if x < 0.0 && odd { -1.0 } else { 1.0 };
        s * sign0 * (l * (a - a0)).exp() * (1.0 + (-2.0 * l * a).exp()) / d0
    }
}

/// The degree-ℓ Chebyshev AGSP of H.
pub fn chebyshev_agsp(h: &HermitianOperator, spectral: &SpectralData, degree: usize, cut: &BipartiteCut) -> Result<Agsp> {
    cut.check(h.matrix())?;
    chebyshev_agsp_from_eigen(&eigh(h.matrix())?, spectral, degree, cut)
}

/// Same as [`chebyshev_agsp`] from a precomputed eigendecomposition of H.
pub fn chebyshev_agsp_from_eigen(eig: &Eigen, spectral: &SpectralData, degree: usize, cut: &BipartiteCut) -> Result<Agsp> {
    spectral.check()?;
    if eig.dim() != cut.dim() {
        return Err(Error::Shape("Hamiltonian does not match the cut".into()));
    }
    let SpectralData { e0, e1, emax } = *spectral;
    let affine = degree > 0 && (emax - e1) <= 1e-12 * emax.abs().max(1.0);
    let (f, envelope): (Vec<f64>, f64) = if affine {
        let f = eig.values.iter().map(|&e| ((e1 - e) / (e1 - e0)).clamp(0.0, 1.0)).collect();
        (f, 0.0)
    } else {
        let x = |e: f64| (2.0 * e - emax - e1) / (emax - e1);
        let x0 = x(e0);
        let f = eig.values.iter().map(|&e| chebyshev_ratio(x(e), x0, degree)).collect();
        let env = chebyshev_ratio(1.0, x0, degree).powi(2);
        (f, env)
    };
    let delta = eig
        .values
        .iter()
        .zip(&f)
        .filter(|(&e, _)| !spectral.is_ground(e))
        .map(|(_, v)| v * v)
        .fold(0.0, f64::max);
    let k = eig.vectors.reconstruct(&f);
    let ground: Vec<usize> = (0..eig.dim()).filter(|&i| spectral.is_ground(eig.values[i])).collect();
    let pi = eig.vectors.reconstruct_subset(&ground, &vec![1.0; ground.len()]);
    let fixes_gs_error = spectral_norm(&(&k.matmul(&pi) - &pi));
    let schmidt = operator_schmidt(&k, cut, TRUNCATION_TOL)?;
    Ok(Agsp {
        k,
        cut: cut.clone(),
        d: schmidt.rank,
        delta,
        degree,
        fixes_gs_error,
        envelope_delta: envelope,
        truncation_tol: TRUNCATION_TOL,
        schmidt,
        affine_fallback: affine,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Certification {
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "Delta")]
    pub delta: f64,
    pub fixes_gs_error: f64,
    pub schmidt_tail: f64,
}

/// Measures the three AGSP properties of K against Π_gs.
pub fn certify_agsp(k: &ComplexMatrix, pi_gs: &ComplexMatrix, cut: &BipartiteCut, tol: f64) -> Result<Certification> {
    cut.check(k)?;
    cut.check(pi_gs)?;
    let fix_k = spectral_norm(&(&k.matmul(pi_gs) - pi_gs));
    let fix_kd = spectral_norm(&(&k.adjoint().matmul(pi_gs) - pi_gs));
    let q = &ComplexMatrix::identity(cut.dim()) - pi_gs;
    let kq = k.matmul(&q);
    let delta = lambda_max(&kq.matmul_adjoint(&kq).hermitian_part())?.max(0.0);
    let schmidt = operator_schmidt(k, cut, tol)?;
    Ok(Certification { d: schmidt.rank, delta, fixes_gs_error: fix_k.max(fix_kd), schmidt_tail: schmidt.tail })
}

/// Smallest degree in 1, 2, 4, … ≤ max_degree with D²Δ ≤ ceiling and Δ ≤ delta_cap.
pub fn select_degree(
    eig: &Eigen,
    spectral: &SpectralData,
    cut: &BipartiteCut,
    ceiling: f64,
    delta_cap: f64,
    max_degree: usize,
) -> Result<Agsp> {
    let mut best: Option<(f64, usize)> = None;
    let mut degree = 1;
    while degree <= max_degree.max(1) {
        let a = chebyshev_agsp_from_eigen(eig, spectral, degree, cut)?;
        let prod = a.shrink_product();
        if prod <= ceiling && a.delta <= delta_cap {
            return Ok(a);
        }
        if best.map_or(true, |(b, _)| prod < b) {
            best = Some((prod, degree));
        }
        if a.affine_fallback {
            break;
        }
        degree *= 2;
    }
    let (best, best_degree) = best.unwrap_or((f64::INFINITY, 0));
    Err(Error::Ceiling { ceiling, best, best_degree, max_degree })
}

/// K_AB = K⊗Π_r with Π_r the projector onto the first d_B/r levels of B.
#[derive(Clone, Debug)]
pub struct ExtendedAgsp {
    pub base: Agsp,
    pub d_b: u64,
    pub r: u64,
    pub keep: u64,
}

pub fn extend_agsp(base: Agsp, r: u64, d_b: u64) -> Result<ExtendedAgsp> {
    if r == 0 || d_b == 0 || d_b % r != 0 {
        return Err(Error::contract(format!("r = {r} must divide d_B = {d_b}")));
    }
    Ok(ExtendedAgsp { base, d_b, r, keep: d_b / r })
}

impl ExtendedAgsp {
    /// Diagonal of Π_r.
    pub fn projector_b(&self) -> Vec<f64> {
        (0..self.d_b).map(|m| if m < self.keep { 1.0 } else { 0.0 }).collect()
    }

    /// (D, Δ, fix error) for K_AB against Π_gs⊗Π_r from the factored form:
    /// K_AB Π′ − Π′ = (KΠ − Π)⊗Π_r, K_AB(1−Π′)K_AB† = K(1−Π)K†⊗Π_r since
    /// Π_r(1−Π_r) = 0, and K_AB has the Schmidt terms X_k⊗(Y_k⊗Π_r).
    pub fn certify(&self, pi_gs: &ComplexMatrix) -> Result<Certification> {
        let p = self.projector_b();
        let norm_p = p.iter().cloned().fold(0.0, f64::max);
        let idempotent = p.iter().all(|&x| x * x == x);
        if !idempotent || self.keep == 0 {
            return Err(Error::contract("extension projector is not a nonzero projector"));
        }
        let base = certify_agsp(&self.base.k, pi_gs, &self.base.cut, self.base.truncation_tol)?;
        Ok(Certification {
            d: base.d,
            delta: base.delta * norm_p * norm_p,
            fixes_gs_error: base.fixes_gs_error * norm_p,
            schmidt_tail: base.schmidt_tail,
        })
    }

    /// Tr_B Ω_AB with Ω_AB = Π_gs⊗Π_r / Tr(Π_gs⊗Π_r).
    pub fn omega_traced(&self, pi_gs: &ComplexMatrix) -> ComplexMatrix {
        let rank = pi_gs.trace().re;
        pi_gs.scale(self.keep as f64 / (rank * self.keep as f64))
    }

    /// K⊗Π_r as a dense matrix on A⊗B, for small instances only.
    pub fn dense(&self) -> Result<ComplexMatrix> {
        let pb = ComplexMatrix::from_real_diag(&self.projector_b());
        crate::linalg::tensor(&self.base.k, &pb)
    }
}

/// Heuristic degree ⌈(log₂ D_est)^{3/2}⌉ with
/// log₂ D_est = max(γ⁻¹·log₂³d, γ^{-1/3}·log₂d·log₂^{2/3}c).
pub fn degree_estimate(c: f64, gamma: f64, d: usize) -> Result<usize> {
    if !(c > 1.0 && gamma > 0.0 && d >= 2) {
        return Err(Error::contract("degree estimate needs c > 1, gamma > 0, d >= 2"));
    }
    let ld = (d as f64).log2();
    let log_d_est = (ld.powi(3) / gamma).max(gamma.powf(-1.0 / 3.0) * ld * c.log2().powf(2.0 / 3.0));
    Ok(log_d_est.powf(1.5).ceil() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_h(vals: &[f64]) -> HermitianOperator {
        HermitianOperator::new(ComplexMatrix::from_real_diag(vals)).unwrap()
    }

    #[test]
    fn degree_zero_is_identity() {
        let h = diag_h(&[0.0, 1.0, 2.0, 2.0]);
        let cut = BipartiteCut::new(2, 2).unwrap();
        let s = SpectralData { e0: 0.0, e1: 1.0, emax: 2.0 };
        let a = chebyshev_agsp(&h, &s, 0, &cut).unwrap();
        assert_eq!(a.d, 1);
        assert!((a.delta - 1.0).abs() < 1e-15);
        assert!((&a.k - &ComplexMatrix::identity(4)).max_abs() < 1e-15);
    }

    #[test]
    fn degree_one_ratio() {
        let h = diag_h(&[0.0, 1.0, 2.0, 2.0]);
        let cut = BipartiteCut::new(2, 2).unwrap();
        let s = SpectralData { e0: 0.0, e1: 1.0, emax: 2.0 };
        let a = chebyshev_agsp(&h, &s, 1, &cut).unwrap();
        assert!((a.delta - 1.0 / 9.0).abs() < 1e-14);
        assert!((a.envelope_delta - 1.0 / 9.0).abs() < 1e-14);
        assert!(a.fixes_gs_error < 1e-14);
    }

    #[test]
    fn ratio_matches_recurrence() {
        fn t(l: usize, x: f64) -> f64 {
            let (mut a, mut b) = (1.0, x);
            if l == 0 {
                return 1.0;
            }
            for _ in 1..l {
                let c = 2.0 * x * b - a;
                a = b;
                b = c;
            }
            b
        }
        for l in 0..12 {
            for &x in &[-1.0, -0.3, 0.0, 0.7, 1.0, 1.4, -2.5] {
                let want = t(l, x) / t(l, -3.0);
                assert!((chebyshev_ratio(x, -3.0, l) - want).abs() < 1e-12 * want.abs().max(1.0), "l={l} x={x}");
            }
        }
        assert!(chebyshev_ratio(0.5, -3.0, 2000).abs() < 1e-300 * 1e10);
    }

    #[test]
    fn affine_fallback_projects() {
        let h = diag_h(&[0.0, 0.0, 1.0, 1.0]);
        let cut = BipartiteCut::new(2, 2).unwrap();
        let s = SpectralData { e0: 0.0, e1: 1.0, emax: 1.0 };
        let a = chebyshev_agsp(&h, &s, 3, &cut).unwrap();
        assert!(a.affine_fallback);
        assert_eq!(a.delta, 0.0);
    }

    #[test]
    fn certify_projector_and_identity() {
        let cut = BipartiteCut::new(2, 2).unwrap();
        let pi = ComplexMatrix::from_real_diag(&[1.0, 0.0, 0.0, 1.0]);
        let c = certify_agsp(&pi, &pi, &cut, TRUNCATION_TOL).unwrap();
        assert_eq!(c.delta, 0.0);
        assert_eq!(c.fixes_gs_error, 0.0);
        assert_eq!(c.d, 2);
        let c = certify_agsp(&ComplexMatrix::identity(4), &pi, &cut, TRUNCATION_TOL).unwrap();
        assert!((c.delta - 1.0).abs() < 1e-15);
        assert_eq!(c.d, 1);
    }

    #[test]
    fn extension_rules() {
        let h = diag_h(&[0.0, 1.0, 2.0, 2.0]);
        let cut = BipartiteCut::new(2, 2).unwrap();
        let s = SpectralData { e0: 0.0, e1: 1.0, emax: 2.0 };
        let a = chebyshev_agsp(&h, &s, 2, &cut).unwrap();
        assert!(extend_agsp(a.clone(), 3, 8).is_err());
        let e = extend_agsp(a.clone(), 8, 8).unwrap();
        assert_eq!(e.keep, 1);
        let pi = ComplexMatrix::from_real_diag(&[1.0, 0.0, 0.0, 0.0]);
        let c = e.certify(&pi).unwrap();
        assert!((c.delta - a.delta).abs() < 1e-15);
        assert!((&e.omega_traced(&pi) - &pi).max_abs() < 1e-15);
    }

    #[test]
    fn degree_estimates() {
        assert_eq!(degree_estimate(2.0, 1.0, 2).unwrap(), 1);
        let mut last = 0;
        for c in [2.0, 10.0, 100.0, 1e6] {
            let l = degree_estimate(c, 0.5, 2).unwrap();
            assert!(l >= last);
            last = l;
        }
        assert!(degree_estimate(10.0, 0.25, 2).unwrap() >= degree_estimate(10.0, 0.5, 2).unwrap());
    }
}
