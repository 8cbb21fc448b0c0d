use serde::Serialize;

use super::CERT_TOL;
use crate::error::{Error, Result};
use crate::linalg::{
    gentle_measure, product_domination_margin, tensor, trace_distance, BipartiteCut, ComplexMatrix, DensityOperator,
    Eigen, HermitianOperator, SubState,
};

/// Output of [`discretize_left`].
#[derive(Clone, Debug)]
pub struct DiscretizationResult {
    /// ρ̃ = (Π_L⊗I) ρ (Π_L⊗I).
    pub rho: SubState,
    /// Left marginal with every retained eigenvalue rounded up to the grid and renormalized.
    pub sigma_l: DensityOperator,
    pub spectrum_count: usize,
    /// Measured ‖ρ̃ − ρ‖₁.
    pub trace_distance: f64,
    /// Gentle-measurement bound 2√Tr((1−Π)ρ).
    pub gentle_bound: f64,
    /// Tr σ′_L, at most 1 + ε.
    pub inflation: f64,
    pub grid: Vec<f64>,
    pub n_levels: usize,
    pub threshold: f64,
    /// t·inflation, the factor of the certified inequality ρ̃ ≼ factor·σ̃_L⊗σ_R.
    pub factor: f64,
    pub margin: f64,
    pub retained: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscretizationRecord {
    pub spectrum_count: usize,
    pub n_levels: usize,
    pub trace_distance: f64,
    pub gentle_bound: f64,
    pub inflation: f64,
    pub threshold: f64,
    pub factor: f64,
    pub margin: f64,
    pub retained: usize,
}

impl DiscretizationResult {
    pub fn record(&self) -> DiscretizationRecord {
        DiscretizationRecord {
            spectrum_count: self.spectrum_count,
            n_levels: self.n_levels,
            trace_distance: self.trace_distance,
            gentle_bound: self.gentle_bound,
            inflation: self.inflation,
            threshold: self.threshold,
            factor: self.factor,
            margin: self.margin,
            retained: self.retained,
        }
    }
}

/// Upper bound on the number of grid levels, ⌈7·log₂(d_L/ε)/ε⌉.
pub fn level_bound(d_l: usize, eps: f64) -> usize {
    (7.0 * (d_l as f64 / eps).log2() / eps).ceil() as usize
}

/// Projects out the small eigenvalues of σ_L and rounds the rest up to the
/// geometric grid λ_n = (1+ε)ⁿ·ε⁴/d_L⁷.
pub fn discretize_left(
    rho: &SubState,
    sigma_l: &DensityOperator,
    sigma_r: &DensityOperator,
    t: f64,
    eps: f64,
    cut: &BipartiteCut,
) -> Result<DiscretizationResult> {
    cut.check(rho.matrix())?;
    if sigma_l.dim() != cut.d_l || sigma_r.dim() != cut.d_r {
        return Err(Error::Shape("marginal dimensions do not match the cut".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::contract("epsilon must lie in (0, 1)"));
    }
    let d_l = cut.d_l as f64;
    if !(t > 0.0) || t > d_l * d_l * (1.0 + 1e-9) {
        return Err(Error::contract(format!("precondition t <= d_L^2 failed (t = {t}, d_L^2 = {})", d_l * d_l)));
    }
    let pre = product_domination_margin(rho.matrix(), sigma_l.matrix(), sigma_r.matrix(), t, cut)?;
    if pre < -CERT_TOL * t.max(1.0) {
        return Err(Error::contract_psd("precondition rho <= t·sigma_L⊗sigma_R failed", pre));
    }

    let base = eps.powi(4) / d_l.powi(7);
    let ratio = 1.0 + eps;
    let n_max = ((1.0 / base).ln() / ratio.ln()).ceil() as usize;
    let level = |n: usize| base * ratio.powi(n as i32);
    let grid: Vec<f64> = (0..=n_max).map(level).collect();

    let eig = sigma_l.eigen();
    let mut rounded = vec![0.0; eig.dim()];
    let mut used = Vec::new();
    let mut keep = Vec::new();
    for (i, &l) in eig.values.iter().enumerate() {
        if l <= base {
            continue;
        }
        let mut n = ((l / base).ln() / ratio.ln()).ceil().max(1.0) as usize;
        while n < n_max && grid[n] < l {
            n += 1;
        }
        while n > 1 && grid[n - 1] >= l {
            n -= 1;
        }
        rounded[i] = grid[n];
        used.push(n);
        keep.push(i);
    }
    used.sort_unstable();
    used.dedup();
    let inflation: f64 = rounded.iter().sum();
    let normalized: Vec<f64> = rounded.iter().map(|x| x / inflation).collect();
    let sigma_new =
        DensityOperator::from_substate(SubState::from_eigen(Eigen { values: normalized, vectors: eig.vectors.clone() })?)?;

    let rho_new = if keep.len() == eig.dim() {
        (rho.clone(), 0.0)
    } else if rho.is_diagonal() && sigma_l.is_diagonal() {
        let mut mask = vec![false; cut.d_l];
        for &i in &keep {
            mask[eig.vectors.column(i).iter().position(|z| z.re != 0.0).expect("basis vector")] = true;
        }
        let diag: Vec<f64> = (0..cut.dim())
            .map(|k| if mask[k / cut.d_r] { rho.matrix()[(k, k)].re } else { 0.0 })
            .collect();
        let kept: f64 = diag.iter().sum();
        (SubState::from_matrix(ComplexMatrix::from_real_diag(&diag))?, 2.0 * (rho.trace() - kept).max(0.0).sqrt())
    } else {
        let ones = vec![1.0; keep.len()];
        let pi_l = eig.vectors.reconstruct_subset(&keep, &ones);
        let pi = tensor(&pi_l, &ComplexMatrix::identity(cut.d_r))?;
        gentle_measure(rho, &HermitianOperator::new_unchecked(pi))?
    };
    let (rho_new, gentle_bound) = rho_new;
    let factor = t * inflation;
    let margin = product_domination_margin(rho_new.matrix(), sigma_new.matrix(), sigma_r.matrix(), factor, cut)?;
    if margin < -CERT_TOL * factor.max(1.0) {
        return Err(Error::contract_psd("discretized domination failed", margin));
    }
    let trace_distance = trace_distance(rho_new.matrix(), rho.matrix());
    Ok(DiscretizationResult {
        rho: rho_new,
        sigma_l: sigma_new,
        spectrum_count: used.len(),
        trace_distance,
        gentle_bound,
        inflation,
        grid,
        n_levels: n_max,
        threshold: base,
        factor,
        margin,
        retained: keep.len(),
    })
}
