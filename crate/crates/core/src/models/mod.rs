//! Open nearest-neighbour chains, exact diagonalization and the maximally
//! mixed ground state.

use serde::{Deserialize, Serialize};

use crate::agsp::SpectralData;
use crate::error::{Error, Result};
use crate::linalg::matrix::check_dim;
use crate::linalg::{
    c64, eigh, spectral_norm, ComplexMatrix, DensityOperator, Eigen, HermitianOperator, SubState, ZERO,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    TransverseFieldIsing { h: f64 },
    ClassicalIsing,
    ProjectorChain,
    HeisenbergXxz { anisotropy: f64 },
    /// One d²×d² term per bond, or a single term used on every bond.
    #[serde(skip)]
    Custom { terms: Vec<ComplexMatrix> },
}

#[derive(Clone, Debug)]
pub struct ChainModel {
    pub kind: ModelKind,
    pub n: usize,
    pub d: usize,
}

impl ChainModel {
    pub fn new(kind: ModelKind, n: usize) -> Result<Self> {
        let d = match &kind {
            ModelKind::Custom { terms } => {
                let t = terms.first().ok_or_else(|| Error::contract("custom model needs at least one term"))?;
                let d = (t.rows() as f64).sqrt().round() as usize;
                if d * d != t.rows() || !t.is_square() {
                    return Err(Error::Shape("custom terms must be d²×d²".into()));
                }
                if terms.len() != 1 && terms.len() != n.saturating_sub(1) {
                    return Err(Error::contract("custom model needs one term or one per bond"));
                }
                if terms.iter().any(|m| m.rows() != d * d || m.cols() != d * d) {
                    return Err(Error::Shape("custom terms have inconsistent shapes".into()));
                }
                d
            }
            _ => 2,
        };
        if n < 2 {
            return Err(Error::contract("a chain needs at least two sites"));
        }
        Ok(Self { kind, n, d })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::TransverseFieldIsing { .. } => "transverse_field_ising",
            ModelKind::ClassicalIsing => "classical_ising",
            ModelKind::ProjectorChain => "projector_chain",
            ModelKind::HeisenbergXxz { .. } => "heisenberg_xxz",
            ModelKind::Custom { .. } => "custom",
        }
    }

    pub fn dim(&self) -> usize {
        self.d.pow(self.n as u32)
    }

    /// Normalized two-site terms h_1, …, h_{n−1}.
    pub fn terms(&self) -> Result<Vec<ComplexMatrix>> {
        let bonds = self.n - 1;
        let raw: Vec<ComplexMatrix> = match &self.kind {
            ModelKind::TransverseFieldIsing { h } => {
                let zz = kron2(&pauli_z(), &pauli_z());
                let xl = kron2(&pauli_x(), &ComplexMatrix::identity(2));
                let xr = kron2(&ComplexMatrix::identity(2), &pauli_x());
                // each site's field is split evenly between its bonds
                (0..bonds)
                    .map(|i| {
                        let wl = if i == 0 { 1.0 } else { 0.5 };
                        let wr = if i + 1 == bonds { 1.0 } else { 0.5 };
                        zz.scale(-1.0).axpy(-h * wl, &xl).axpy(-h * wr, &xr)
                    })
                    .collect()
            }
            ModelKind::ClassicalIsing => {
                let t = ComplexMatrix::identity(4).axpy(-1.0, &kron2(&pauli_z(), &pauli_z())).scale(0.5);
                vec![t; bonds]
            }
            ModelKind::ProjectorChain => vec![ComplexMatrix::from_real_diag(&[0.0, 0.0, 0.0, 1.0]); bonds],
            ModelKind::HeisenbergXxz { anisotropy } => {
                let xx = kron2(&pauli_x(), &pauli_x());
                let yy = kron2(&pauli_y(), &pauli_y());
                let zz = kron2(&pauli_z(), &pauli_z());
                vec![(&xx + &yy).axpy(*anisotropy, &zz); bonds]
            }
            ModelKind::Custom { terms } => {
                if terms.len() == 1 {
                    vec![terms[0].clone(); bonds]
                } else {
                    terms.clone()
                }
            }
        };
        for t in &raw {
            if t.hermitian_defect() > 1e-12 {
                return Err(Error::contract("two-site terms must be Hermitian"));
            }
        }
        let norms: Vec<f64> = raw.iter().map(spectral_norm).collect();
        match self.kind {
            // a common scale keeps the boundary fields consistent with the bulk
            ModelKind::TransverseFieldIsing { .. } => {
                let top = norms.iter().cloned().fold(0.0, f64::max);
                Ok(raw.iter().map(|t| t.scale(1.0 / top)).collect())
            }
            _ => Ok(raw.iter().zip(&norms).map(|(t, &s)| if s > 0.0 { t.scale(1.0 / s) } else { t.clone() }).collect()),
        }
    }
}

fn kron2(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    crate::linalg::matrix::kron(a, b)
}

fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).expect("2x2")
}

fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[vec![ZERO, c64::new(0.0, -1.0)], vec![c64::new(0.0, 1.0), ZERO]]).expect("2x2")
}

fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real_diag(&[1.0, -1.0])
}

/// H = Σ_i I⊗h_i⊗I on the open chain.
pub fn build_hamiltonian(model: &ChainModel) -> Result<HermitianOperator> {
    let dim = model
        .d
        .checked_pow(model.n as u32)
        .ok_or_else(|| Error::Resource("Hilbert space dimension overflows".into()))?;
    check_dim(dim, "Hamiltonian")?;
    let d2 = model.d * model.d;
    let mut h = ComplexMatrix::zeros(dim, dim);
    for (i, term) in model.terms()?.iter().enumerate() {
        let left = model.d.pow(i as u32);
        let right = model.d.pow((model.n - i - 2) as u32);
        for q in 0..d2 {
            for p in 0..d2 {
                let z = term[(p, q)];
                if z == ZERO {
                    continue;
                }
                for a in 0..left {
                    for c in 0..right {
                        h[((a * d2 + p) * right + c, (a * d2 + q) * right + c)] += z;
                    }
                }
            }
        }
    }
    HermitianOperator::new(h)
}

#[derive(Clone, Debug)]
pub struct GroundSpace {
    pub pi_gs: ComplexMatrix,
    pub r: usize,
    pub e0: f64,
    pub gamma: f64,
    pub omega: DensityOperator,
    pub degeneracy_tol: f64,
    pub eigen: Eigen,
    pub spectral: SpectralData,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundSpaceRecord {
    pub r: usize,
    pub e0: f64,
    pub gamma: f64,
    pub emax: f64,
    pub degeneracy_tol: f64,
}

impl GroundSpace {
    pub fn record(&self) -> GroundSpaceRecord {
        GroundSpaceRecord {
            r: self.r,
            e0: self.e0,
            gamma: self.gamma,
            emax: self.spectral.emax,
            degeneracy_tol: self.degeneracy_tol,
        }
    }
}

/// 1e-8·‖H‖_∞.
pub fn default_degeneracy_tol(h: &HermitianOperator) -> Result<f64> {
    let e = crate::linalg::eigvalsh(h.matrix())?;
    let norm = e.iter().map(|x| x.abs()).fold(0.0, f64::max);
    Ok(1e-8 * norm.max(1e-300))
}

pub fn ground_space(h: &HermitianOperator, degeneracy_tol: f64) -> Result<GroundSpace> {
    let eig = eigh(h.matrix())?;
    ground_space_from_eigen(eig, degeneracy_tol)
}

pub fn ground_space_from_eigen(eig: Eigen, degeneracy_tol: f64) -> Result<GroundSpace> {
    if !(degeneracy_tol > 0.0) {
        return Err(Error::contract("degeneracy tolerance must be positive"));
    }
    let e0 = eig.min();
    let r = eig.values.iter().filter(|&&e| e <= e0 + degeneracy_tol).count();
    let gap = eig.values.get(r).map(|&e| e - e0).unwrap_or(0.0);
    if gap <= degeneracy_tol {
        return Err(Error::Gapless { gap, tol: degeneracy_tol });
    }
    let ground: Vec<usize> = (0..r).collect();
    let pi_gs = eig.vectors.reconstruct_subset(&ground, &vec![1.0; r]);
    let values: Vec<f64> = (0..eig.dim()).map(|i| if i < r { 1.0 / r as f64 } else { 0.0 }).collect();
    let omega = DensityOperator::from_substate(SubState::from_eigen(Eigen { values, vectors: eig.vectors.clone() })?)?;
    let spectral = SpectralData { e0, e1: e0 + gap, emax: eig.max() };
    Ok(GroundSpace { pi_gs, r, e0, gamma: gap, omega, degeneracy_tol, eigen: eig, spectral })
}

pub fn maximally_mixed_gs(gs: &GroundSpace) -> DensityOperator {
    gs.omega.clone()
}

/// Builds H and its ground space with the default tolerance.
pub fn solve(model: &ChainModel) -> Result<(HermitianOperator, GroundSpace)> {
    let h = build_hamiltonian(model)?;
    let eig = eigh(h.matrix())?;
    let norm = eig.values.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let gs = ground_space_from_eigen(eig, 1e-8 * norm.max(1e-300))?;
    Ok((h, gs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigvalsh;

    #[test]
    fn two_site_spectra() {
        let h = build_hamiltonian(&ChainModel::new(ModelKind::ClassicalIsing, 2).unwrap()).unwrap();
        assert_eq!(eigvalsh(h.matrix()).unwrap(), vec![0.0, 0.0, 1.0, 1.0]);
        let h = build_hamiltonian(&ChainModel::new(ModelKind::ProjectorChain, 2).unwrap()).unwrap();
        assert_eq!(eigvalsh(h.matrix()).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(h.matrix()[(3, 3)].re, 1.0);
    }

    #[test]
    fn classical_ising_ground_space() {
        let (_, gs) = solve(&ChainModel::new(ModelKind::ClassicalIsing, 3).unwrap()).unwrap();
        assert_eq!(gs.r, 2);
        assert!((gs.omega.matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((gs.omega.matrix()[(7, 7)].re - 0.5).abs() < 1e-15);
        assert!((gs.gamma - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projector_chain_degeneracy() {
        let (_, gs) = solve(&ChainModel::new(ModelKind::ProjectorChain, 4).unwrap()).unwrap();
        assert_eq!(gs.r, 8);
        assert!(crate::linalg::is_flat(&gs.omega, 1e-12));
    }

    #[test]
    fn tfim_terms_share_one_scale() {
        let m = ChainModel::new(ModelKind::TransverseFieldIsing { h: 2.0 }, 4).unwrap();
        let terms = m.terms().unwrap();
        let top = terms.iter().map(spectral_norm).fold(0.0, f64::max);
        assert!((top - 1.0).abs() < 1e-12);
        let (_, gs) = solve(&ChainModel::new(ModelKind::TransverseFieldIsing { h: 2.0 }, 6).unwrap()).unwrap();
        assert_eq!(gs.r, 1);
        assert!(gs.gamma > 0.1);
    }

    #[test]
    fn gapless_is_rejected() {
        let h = HermitianOperator::new(ComplexMatrix::identity(4)).unwrap();
        assert!(matches!(ground_space(&h, 1e-8), Err(Error::Gapless { .. })));
    }
}
