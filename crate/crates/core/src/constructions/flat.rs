//! Embedding ρ_A ≼ t·τ_A into a flat pair (ρ′_AB, σ_AB) on A⊗B.
//!
//! B has d_B levels. Both operators are block diagonal in the level basis of
//! B: ρ′_AB on level m is a capped A-block depending only on which segment m
//! falls into, and σ_AB is Σ_j |b_j⟩⟨b_j| ⊗ Π_{m_j} / Tr P_σ where Π_m
//! projects onto the first m levels.

use serde::Serialize;

use crate::entropy::{dmax, product_dmax};
use crate::error::{Error, Result};
use crate::linalg::matrix::{check_dim, dot, kron};
use crate::linalg::{
    c64, eigh, trace_distance, BipartiteCut, ComplexMatrix, DensityOperator, Eigen, Eigenvectors, SubState,
    SUPPORT_CUTOFF, SUPPORT_LEAK_TOL, ZERO,
};

pub const DEFAULT_RESOLUTION: usize = 1 << 16;
pub const DEFAULT_MAX_D_B: usize = 1 << 26;
/// Relative spacing below which eigenvalues of τ_L are treated as one level.
const CLASS_TOL: f64 = 1e-12;
/// Largest d_A·d_B for which the per-vector data needed by `dense_parts` is kept.
const DENSE_KEEP: usize = 1 << 14;

#[derive(Clone, Debug)]
pub struct FlatOptions {
    pub resolution: usize,
    /// d_B is rounded up to a multiple of this (the ground degeneracy in the pipeline).
    pub multiple_of: usize,
    pub max_d_b: usize,
}

impl Default for FlatOptions {
    fn default() -> Self {
        Self { resolution: DEFAULT_RESOLUTION, multiple_of: 1, max_d_b: DEFAULT_MAX_D_B }
    }
}

/// The capped A-block shared by a run of B levels.
#[derive(Clone, Debug)]
pub enum SegmentBlock {
    /// Σ w |e_x⟩⟨e_x| over computational basis states.
    Diagonal(Vec<(usize, f64)>),
    /// W W† with W of shape d_A × rank.
    Factor(ComplexMatrix),
}

#[derive(Clone, Debug)]
pub struct Segment {
    /// Levels lo+1..=hi (1-based) carry this block.
    pub lo: u64,
    pub hi: u64,
    pub block: SegmentBlock,
    pub lambda_max: f64,
}

impl Segment {
    pub fn len(&self) -> u64 {
        self.hi - self.lo
    }

    /// Number of levels of this segment among the first `levels`.
    pub fn overlap(&self, levels: u64) -> u64 {
        levels.min(self.hi).saturating_sub(self.lo)
    }

    pub fn block_matrix(&self, d_a: usize) -> ComplexMatrix {
        match &self.block {
            SegmentBlock::Diagonal(entries) => {
                let mut m = ComplexMatrix::zeros(d_a, d_a);
                for &(x, w) in entries {
                    m[(x, x)] += c64::new(w, 0.0);
                }
                m
            }
            SegmentBlock::Factor(w) => w.matmul_adjoint(w),
        }
    }

    pub fn block_trace(&self) -> f64 {
        match &self.block {
            SegmentBlock::Diagonal(entries) => entries.iter().map(|e| e.1).sum(),
            SegmentBlock::Factor(w) => w.frobenius_norm().powi(2),
        }
    }
}

#[derive(Clone, Debug)]
enum Basis {
    Dense(ComplexMatrix),
    Product { left: ComplexMatrix, right: ComplexMatrix, cut: BipartiteCut },
}

impl Basis {
    fn len(&self) -> usize {
        match self {
            Basis::Dense(v) => v.cols(),
            Basis::Product { left, right, .. } => left.cols() * right.cols(),
        }
    }

    fn coeffs(&self, w: &[c64]) -> Vec<c64> {
        match self {
            Basis::Dense(v) => (0..v.cols()).map(|j| dot(v.col(j), w)).collect(),
            Basis::Product { left, right, cut } => {
                let x = crate::linalg::reshape_vector(w, cut);
                let c = left.adjoint_matmul(&x).matmul(&right.conj());
                let (kl, kr) = (left.cols(), right.cols());
                let mut out = vec![ZERO; kl * kr];
                for a in 0..kl {
                    for b in 0..kr {
                        out[a * kr + b] = c[(a, b)];
                    }
                }
                out
            }
        }
    }

    fn vector(&self, c: &[c64]) -> Vec<c64> {
        match self {
            Basis::Dense(v) => v.apply(c),
            Basis::Product { left, right, cut } => {
                let (kl, kr) = (left.cols(), right.cols());
                let cm = ComplexMatrix::from_fn(kl, kr, |a, b| c[a * kr + b]);
                let x = left.matmul(&cm).matmul(&right.transpose());
                let mut out = vec![ZERO; cut.dim()];
                for a in 0..cut.d_l {
                    for b in 0..cut.d_r {
                        out[a * cut.d_r + b] = x[(a, b)];
                    }
                }
                out
            }
        }
    }

    /// Ambient index of each basis vector when all of them are standard basis vectors.
    fn standard_positions(&self) -> Option<Vec<usize>> {
        fn positions(m: &ComplexMatrix) -> Option<Vec<usize>> {
            (0..m.cols())
                .map(|j| {
                    let col = m.col(j);
                    let nz: Vec<usize> = (0..col.len()).filter(|&i| col[i] != ZERO).collect();
                    (nz.len() == 1 && (col[nz[0]].re - 1.0).abs() < 1e-15 && col[nz[0]].im == 0.0).then(|| nz[0])
                })
                .collect()
        }
        match self {
            Basis::Dense(v) => positions(v),
            Basis::Product { left, right, cut } => {
                let pl = positions(left)?;
                let pr = positions(right)?;
                Some(pl.iter().flat_map(|&a| pr.iter().map(move |&b| a * cut.d_r + b)).collect())
            }
        }
    }
}

/// Data kept per eigenvector of ρ_A for small instances.
#[derive(Clone, Debug)]
struct EmbeddedVector {
    count: u64,
    original: Vec<c64>,
    truncated: Vec<c64>,
}

/// One class of equal τ_L eigenvalues together with its slice of σ_AB:
/// σ_AB = Σ_c weight_c · (Π_c/|c|) ⊗ ρ_RB^c with
/// ρ_RB^c = Σ_y |r_y⟩⟨r_y| ⊗ Π_{m_cy} / z_c.
#[derive(Clone, Debug)]
pub struct ClassTerm {
    pub weight: f64,
    pub level: f64,
    /// Orthonormal columns spanning the class, d_L × |c|.
    pub left: ComplexMatrix,
    pub right: Vec<(Vec<c64>, u64)>,
    pub z: u64,
}

#[derive(Clone, Debug)]
pub struct FlatEmbedding {
    pub d_a: usize,
    pub d_b: u64,
    pub delta: f64,
    /// 2^{D_max(ρ_A‖τ_A)} for the input pair.
    pub t_in: f64,
    pub truncation_p: f64,
    pub segments: Vec<Segment>,
    /// Eigenvalues b_j of τ_A over its support, with counts m_j.
    pub weights: Vec<f64>,
    pub counts: Vec<u64>,
    pub trace_p_sigma: u64,
    /// λ_max(ρ′_AB).
    pub lambda_max: f64,
    pub t_prime: f64,
    /// 1 + rank(τ)·p/d_B, the runtime constant in t′ ≤ 32·t·C/δ².
    pub constant_c: f64,
    pub rho_prime_a: SubState,
    pub distance_a: f64,
    /// Σ_i (a_i − n_i/d_B).
    pub rounding_slack: f64,
    pub max_truncated: f64,
    pub support_leak: f64,
    pub sr_bound: Option<usize>,
    basis: Basis,
    classes: Option<Vec<Vec<usize>>>,
    class_levels: Vec<f64>,
    right_values: Vec<f64>,
    vectors: Option<Vec<EmbeddedVector>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatRecord {
    pub d_b: u64,
    pub delta: f64,
    pub t_in: f64,
    pub truncation_p: f64,
    pub t_prime: f64,
    pub t_prime_ceiling: f64,
    pub constant_c: f64,
    pub trace_p_sigma: u64,
    pub segments: usize,
    pub distance_a: f64,
    pub rounding_slack: f64,
    pub max_truncated: f64,
    pub support_leak: f64,
    pub trace_rho_prime: f64,
    pub sr_bound: Option<usize>,
}

impl FlatEmbedding {
    pub fn record(&self) -> FlatRecord {
        FlatRecord {
            d_b: self.d_b,
            delta: self.delta,
            t_in: self.t_in,
            truncation_p: self.truncation_p,
            t_prime: self.t_prime,
            t_prime_ceiling: self.t_prime_ceiling(),
            constant_c: self.constant_c,
            trace_p_sigma: self.trace_p_sigma,
            segments: self.segments.len(),
            distance_a: self.distance_a,
            rounding_slack: self.rounding_slack,
            max_truncated: self.max_truncated,
            support_leak: self.support_leak,
            trace_rho_prime: self.rho_prime_a.trace(),
            sr_bound: self.sr_bound,
        }
    }

    /// 32·t·C/δ².
    pub fn t_prime_ceiling(&self) -> f64 {
        32.0 * self.t_in * self.constant_c / (self.delta * self.delta)
    }

    /// log₂ t′ = D_max(ρ′_AB‖σ_AB).
    pub fn dmax_bits(&self) -> f64 {
        self.t_prime.log2()
    }

    /// Tr_B of ρ′_AB restricted to the first `levels` levels of B.
    pub fn reduced_a(&self, levels: u64) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.d_a, self.d_a);
        for s in &self.segments {
            let k = s.overlap(levels);
            if k > 0 {
                out = out.axpy(k as f64, &s.block_matrix(self.d_a));
            }
        }
        out
    }

    /// Per-class decomposition of σ_AB; only available for product τ_A.
    pub fn classes(&self) -> Result<Vec<ClassTerm>> {
        let (classes, left, right) = match (&self.classes, &self.basis) {
            (Some(c), Basis::Product { left, right, .. }) => (c, left, right),
            _ => return Err(Error::contract("class structure requires a product reference state")),
        };
        let kr = right.cols();
        let total = self.trace_p_sigma as f64;
        Ok(classes
            .iter()
            .zip(&self.class_levels)
            .map(|(members, &level)| {
                let x0 = members[0];
                let right_terms: Vec<(Vec<c64>, u64)> =
                    (0..kr).map(|y| (right.col(y).to_vec(), self.counts[x0 * kr + y])).collect();
                let z: u64 = right_terms.iter().map(|r| r.1).sum();
                ClassTerm {
                    weight: members.len() as f64 * z as f64 / total,
                    level,
                    left: left.select_columns(members),
                    right: right_terms,
                    z,
                }
            })
            .collect())
    }

    /// Eigenvalues of τ_R over its support (product reference only).
    pub fn right_values(&self) -> &[f64] {
        &self.right_values
    }

    /// Tr_B of σ_AB restricted to the first `levels` levels of B:
    /// Σ_j min(m_j, levels)/Tr P_σ · |b_j⟩⟨b_j|.
    pub fn sigma_reduced(&self, levels: u64) -> ComplexMatrix {
        let norm = 1.0 / self.trace_p_sigma as f64;
        let w: Vec<f64> = self.counts.iter().map(|&m| m.min(levels) as f64 * norm).collect();
        if let Some(pos) = self.basis.standard_positions() {
            let mut diag = vec![0.0; self.d_a];
            for (j, &x) in pos.iter().enumerate() {
                diag[x] += w[j];
            }
            return ComplexMatrix::from_real_diag(&diag);
        }
        match &self.basis {
            Basis::Dense(v) => {
                let idx: Vec<usize> = (0..v.cols()).collect();
                Eigenvectors::Dense(v.clone()).reconstruct_subset(&idx, &w)
            }
            Basis::Product { left, right, .. } => {
                let kr = right.cols();
                let ridx: Vec<usize> = (0..kr).collect();
                let rvec = Eigenvectors::Dense(right.clone());
                let mut out = ComplexMatrix::zeros(self.d_a, self.d_a);
                for x in 0..left.cols() {
                    let lx = left.col(x);
                    let r = rvec.reconstruct_subset(&ridx, &w[x * kr..(x + 1) * kr]);
                    out = &out + &kron(&ComplexMatrix::outer(lx, lx), &r);
                }
                out
            }
        }
    }

    /// Dense (ρ_AB, ρ̃_AB, ρ′_AB, σ_AB) on A⊗B with index a·d_B + m. Only for small instances.
    pub fn dense_parts(&self) -> Result<[ComplexMatrix; 4]> {
        let vectors = self
            .vectors
            .as_ref()
            .ok_or_else(|| Error::Resource("embedding too large to materialize".into()))?;
        let d_b = self.d_b as usize;
        let dim = self.d_a * d_b;
        check_dim(dim, "flat embedding")?;
        let embed = |block: &ComplexMatrix, levels: std::ops::Range<usize>, out: &mut ComplexMatrix| {
            for m in levels {
                for a in 0..self.d_a {
                    for b in 0..self.d_a {
                        out[(a * d_b + m, b * d_b + m)] += block[(a, b)];
                    }
                }
            }
        };
        let mut rho = ComplexMatrix::zeros(dim, dim);
        let mut tilde = ComplexMatrix::zeros(dim, dim);
        for v in vectors {
            let s = 1.0 / self.d_b as f64;
            embed(&ComplexMatrix::outer(&v.original, &v.original).scale(s), 0..v.count as usize, &mut rho);
            embed(&ComplexMatrix::outer(&v.truncated, &v.truncated).scale(s), 0..v.count as usize, &mut tilde);
        }
        let mut capped = ComplexMatrix::zeros(dim, dim);
        for seg in &self.segments {
            embed(&seg.block_matrix(self.d_a), seg.lo as usize..seg.hi as usize, &mut capped);
        }
        let mut sigma = ComplexMatrix::zeros(dim, dim);
        let norm = 1.0 / self.trace_p_sigma as f64;
        for (j, &m) in self.counts.iter().enumerate() {
            let mut e = vec![ZERO; self.basis.len()];
            e[j] = c64::new(1.0, 0.0);
            let b = self.basis.vector(&e);
            embed(&ComplexMatrix::outer(&b, &b).scale(norm), 0..m as usize, &mut sigma);
        }
        Ok([rho, tilde, capped, sigma])
    }
}

/// Support eigenvectors of τ with eigenvalues grouped into classes of equal
/// value (snapped to the class mean) and renormalized.
fn snapped_support(tau: &SubState) -> (ComplexMatrix, Vec<f64>, Vec<Vec<usize>>, Eigen) {
    let eig = tau.eigen();
    let idx = tau.support(SUPPORT_CUTOFF);
    let mut vals: Vec<f64> = idx.iter().map(|&i| eig.values[i]).collect();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for k in 0..vals.len() {
        match classes.last_mut() {
            Some(c) if vals[k] - vals[c[0]] <= CLASS_TOL * vals[k] => c.push(k),
            _ => classes.push(vec![k]),
        }
    }
    for c in &classes {
        let mean = c.iter().map(|&k| vals[k]).sum::<f64>() / c.len() as f64;
        for &k in c {
            vals[k] = mean;
        }
    }
    let total: f64 = vals.iter().sum();
    for v in &mut vals {
        *v /= total;
    }
    let mut full = vec![0.0; eig.dim()];
    for (k, &i) in idx.iter().enumerate() {
        full[i] = vals[k];
    }
    let snapped = Eigen { values: full, vectors: eig.vectors.clone() };
    (eig.vectors.select(&idx), vals, classes, snapped)
}

fn d_b_for(opts: &FlatOptions) -> Result<u64> {
    if opts.multiple_of == 0 || opts.resolution == 0 {
        return Err(Error::contract("flat-embedding resolution and multiple must be positive"));
    }
    let d_b = opts.resolution.div_ceil(opts.multiple_of) * opts.multiple_of;
    if d_b > opts.max_d_b {
        return Err(Error::Resource(format!(
            "flat embedding needs d_B = {d_b} > {}; use a larger delta or a smaller system",
            opts.max_d_b
        )));
    }
    Ok(d_b as u64)
}

/// Flat embedding against a general reference τ_A. With a cut, τ_A must be a
/// product across it and the product construction is used.
pub fn flat_embed(
    rho_a: &SubState,
    tau_a: &DensityOperator,
    delta: f64,
    cut: Option<&BipartiteCut>,
    opts: &FlatOptions,
) -> Result<FlatEmbedding> {
    if rho_a.dim() != tau_a.dim() {
        return Err(Error::Shape("state dimensions differ".into()));
    }
    if let Some(cut) = cut {
        cut.check(tau_a.matrix())?;
        let l = tau_a.marginal(cut, crate::linalg::Keep::Left)?;
        let r = tau_a.marginal(cut, crate::linalg::Keep::Right)?;
        let prod = crate::linalg::matrix::kron(l.matrix(), r.matrix());
        let defect = (&prod - tau_a.matrix()).max_abs();
        if defect > 1e-10 {
            return Err(Error::contract(format!("reference state is not a product across the cut (defect {defect:.3e})")));
        }
        return flat_embed_product(rho_a, &l, &r, cut, delta, opts);
    }
    check_delta(delta)?;
    let (vectors, weights, _, snapped) = snapped_support(tau_a);
    let snapped = SubState::from_eigen(snapped)?;
    let t = dmax(rho_a, &snapped)?.exp2();
    build(rho_a, Basis::Dense(vectors), weights, t, delta, opts, None, Vec::new(), Vec::new())
}

/// Flat embedding against τ_L⊗τ_R without forming the product.
pub fn flat_embed_product(
    rho_a: &SubState,
    tau_l: &DensityOperator,
    tau_r: &DensityOperator,
    cut: &BipartiteCut,
    delta: f64,
    opts: &FlatOptions,
) -> Result<FlatEmbedding> {
    cut.check(rho_a.matrix())?;
    if tau_l.dim() != cut.d_l || tau_r.dim() != cut.d_r {
        return Err(Error::Shape("reference factors do not match the cut".into()));
    }
    check_delta(delta)?;
    let (lv, lw, lclasses, lsnap) = snapped_support(tau_l);
    let (rv, rw, _, rsnap) = snapped_support(tau_r);
    let t = product_dmax(rho_a, &SubState::from_eigen(lsnap)?, &SubState::from_eigen(rsnap)?, cut)?.exp2();
    let weights: Vec<f64> = lw.iter().flat_map(|&a| rw.iter().map(move |&b| a * b)).collect();
    let class_levels: Vec<f64> = lclasses.iter().map(|c| lw[c[0]]).collect();
    build(
        rho_a,
        Basis::Product { left: lv, right: rv, cut: cut.clone() },
        weights,
        t,
        delta,
        opts,
        Some(lclasses),
        class_levels,
        rw,
    )
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::contract("delta must lie in (0, 1/2)"));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn build(
    rho_a: &SubState,
    basis: Basis,
    weights: Vec<f64>,
    t: f64,
    delta: f64,
    opts: &FlatOptions,
    classes: Option<Vec<Vec<usize>>>,
    class_levels: Vec<f64>,
    right_values: Vec<f64>,
) -> Result<FlatEmbedding> {
    let d_a = rho_a.dim();
    let d_b = d_b_for(opts)?;
    let d_bf = d_b as f64;
    let p = delta * delta / (32.0 * t);
    let counts: Vec<u64> = weights.iter().map(|&b| ((d_bf * b / p - 1e-9).ceil() as u64).clamp(1, d_b)).collect();
    let trace_p_sigma: u64 = counts.iter().sum();

    let eig = rho_a.eigen();
    let idx = rho_a.support(SUPPORT_CUTOFF);
    let a: Vec<f64> = idx.iter().map(|&i| eig.values[i]).collect();
    let n: Vec<u64> = a.iter().map(|&x| (d_bf * x + 1e-9).floor() as u64).collect();
    let rounding_slack: f64 = a.iter().zip(&n).map(|(&x, &k)| x - k as f64 / d_bf).sum();

    let standard = match (&eig.vectors, basis.standard_positions()) {
        (Eigenvectors::Permutation { perm, .. }, Some(pos)) => {
            let mut lookup = vec![usize::MAX; d_a];
            for (j, &x) in pos.iter().enumerate() {
                lookup[x] = j;
            }
            Some((perm.clone(), lookup))
        }
        _ => None,
    };

    // per-vector truncated coefficients in the τ basis
    let mut max_truncated: f64 = 0.0;
    let mut coeffs: Vec<Vec<(usize, c64)>> = Vec::with_capacity(idx.len());
    for (k, &i) in idx.iter().enumerate() {
        let threshold = p * a[k];
        let full: Vec<(usize, c64)> = match &standard {
            Some((perm, lookup)) => match lookup[perm[i]] {
                usize::MAX => Vec::new(),
                j => vec![(j, c64::new(1.0, 0.0))],
            },
            None => basis.coeffs(&eig.vectors.column(i)).into_iter().enumerate().collect(),
        };
        let kept: Vec<(usize, c64)> = full.into_iter().filter(|&(j, _)| weights[j] >= threshold).collect();
        let norm2: f64 = kept.iter().map(|(_, z)| z.norm_sqr()).sum();
        max_truncated = max_truncated.max(1.0 - norm2);
        if norm2 <= 0.5 {
            return Err(Error::Support { leaked: 1.0 - norm2 });
        }
        let s = 1.0 / norm2.sqrt();
        coeffs.push(kept.into_iter().filter(|(_, z)| *z != ZERO).map(|(j, z)| (j, z * s)).collect());
    }
    if max_truncated > t * p + 1e-9 {
        return Err(Error::contract(format!(
            "truncated mass {max_truncated:.3e} exceeds t·p = {:.3e}",
            t * p
        )));
    }

    let mut levels: Vec<u64> = n.iter().copied().filter(|&k| k > 0).collect();
    levels.sort_unstable_by(|x, y| y.cmp(x));
    levels.dedup();
    let mut segments = Vec::with_capacity(levels.len());
    let mut support_leak = 0.0;
    for (s, &hi) in levels.iter().enumerate() {
        let lo = levels.get(s + 1).copied().unwrap_or(0);
        let active: Vec<usize> = (0..n.len()).filter(|&k| n[k] >= hi).collect();
        let outside = |j: usize| counts[j] < hi;
        let (block, lambda_max, leak) = if let Some((perm, _)) = &standard {
            let mut entries = Vec::with_capacity(active.len());
            let mut leak = 0.0;
            for &k in &active {
                let (j, _) = coeffs[k][0];
                entries.push((perm[idx[k]], 1.0 / d_bf));
                if outside(j) {
                    leak += 1.0 / d_bf;
                }
            }
            (SegmentBlock::Diagonal(entries), 1.0 / d_bf, leak)
        } else {
            segment_factor(&basis, &coeffs, &active, d_bf, &outside)?
        };
        support_leak += (hi - lo) as f64 * leak;
        segments.push(Segment { lo, hi, block, lambda_max });
    }
    if support_leak > SUPPORT_LEAK_TOL {
        return Err(Error::Support { leaked: support_leak });
    }

    let lambda_max = segments.iter().map(|s| s.lambda_max).fold(0.0, f64::max);
    let t_prime = trace_p_sigma as f64 * lambda_max;
    let constant_c = 1.0 + weights.len() as f64 * p / d_bf;
    let ceiling = 32.0 * t * constant_c / (delta * delta);
    if t_prime > ceiling * (1.0 + 1e-9) {
        return Err(Error::contract(format!("t' = {t_prime} exceeds 32·t·C/delta^2 = {ceiling}")));
    }

    let mut rho_prime = ComplexMatrix::zeros(d_a, d_a);
    for s in &segments {
        rho_prime = match &s.block {
            SegmentBlock::Diagonal(entries) => {
                for &(x, w) in entries {
                    rho_prime[(x, x)] += c64::new(s.len() as f64 * w, 0.0);
                }
                rho_prime
            }
            SegmentBlock::Factor(_) => rho_prime.axpy(s.len() as f64, &s.block_matrix(d_a)),
        };
    }
    let rho_prime_a = SubState::from_matrix(rho_prime.hermitian_part())?;
    let distance_a = trace_distance(rho_prime_a.matrix(), rho_a.matrix());

    let vectors = (d_a * d_b as usize <= DENSE_KEEP).then(|| {
        idx.iter()
            .enumerate()
            .map(|(k, &i)| {
                let mut c = vec![ZERO; basis.len()];
                for &(j, z) in &coeffs[k] {
                    c[j] = z;
                }
                EmbeddedVector { count: n[k], original: eig.vectors.column(i), truncated: basis.vector(&c) }
            })
            .collect()
    });

    Ok(FlatEmbedding {
        d_a,
        d_b,
        delta,
        t_in: t,
        truncation_p: p,
        segments,
        weights,
        counts,
        trace_p_sigma,
        lambda_max,
        t_prime,
        constant_c,
        rho_prime_a,
        distance_a,
        rounding_slack,
        max_truncated,
        support_leak,
        sr_bound: classes.as_ref().map(|c| c.len()),
        basis,
        classes,
        class_levels,
        right_values,
        vectors,
    })
}

/// Capped block of a segment from the truncated vectors that are active on it.
/// Returns the factor, its top eigenvalue and the mass outside the allowed part of supp σ.
fn segment_factor(
    basis: &Basis,
    coeffs: &[Vec<(usize, c64)>],
    active: &[usize],
    d_b: f64,
    outside: &dyn Fn(usize) -> bool,
) -> Result<(SegmentBlock, f64, f64)> {
    let k = basis.len();
    let mut c = ComplexMatrix::zeros(k, active.len());
    for (col, &i) in active.iter().enumerate() {
        for &(j, z) in &coeffs[i] {
            c[(j, col)] = z;
        }
    }
    // the basis is orthonormal, so the Gram of the truncated vectors is C†C
    let gram = c.adjoint_matmul(&c).scale(1.0 / d_b).hermitian_part();
    let e = eigh(&gram)?;
    let top = e.max();
    let keep = e.support_indices(1e-14);
    let mut mix = e.vectors.select(&keep);
    for (col, &i) in keep.iter().enumerate() {
        let l = e.values[i];
        let s = (l.min(1.0 / d_b) / l).sqrt() / d_b.sqrt();
        for z in mix.col_mut(col) {
            *z *= s;
        }
    }
    let cw = c.matmul(&mix);
    let mut leak = 0.0;
    for col in 0..cw.cols() {
        for (j, z) in cw.col(col).iter().enumerate() {
            if outside(j) {
                leak += z.norm_sqr();
            }
        }
    }
    let w_cols: Vec<Vec<c64>> = (0..cw.cols()).map(|col| basis.vector(cw.col(col))).collect();
    let rows = match basis {
        Basis::Dense(v) => v.rows(),
        Basis::Product { cut, .. } => cut.dim(),
    };
    let w = ComplexMatrix::from_columns(rows, &w_cols);
    Ok((SegmentBlock::Factor(w), top.min(1.0 / d_b), leak))
}
