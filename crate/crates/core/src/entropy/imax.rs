//! See-saw evaluation of I_max(ρ) = min_{σ_L,σ_R} D_max(ρ‖σ_L⊗σ_R).
//!
//! With ρ = WW†, D_max(ρ‖σ_L⊗σ_R) = log λ_max(M) for M = W†(σ_L⁻¹⊗σ_R⁻¹)W, and
//! λ_max(M) = max_P Tr(PM) over density matrices P on the columns of W.
//! Exchanging min and max gives the concave dual
//!
//!   G(P) = min_{σ_L,σ_R} Tr[(σ_L⁻¹⊗σ_R⁻¹) W P W†].
//!
//! The inner minimum is found by alternating exact best responses: for fixed
//! σ_R the optimal σ_L is √Y/Tr √Y with Y = Tr_R[(I⊗σ_R⁻¹) W P W†], and the
//! value is (Tr √Y)². P is then moved by exponentiated-gradient ascent along
//! M. λ_max(M) − G(P) is the duality gap. Every primal iterate is a valid
//! upper bound, and the best one is returned as the witness.
//!
//! Diagonal ρ is handled with diagonal σ's: D_max is monotone under the
//! product dephasing channel, which fixes ρ and maps any product σ to a
//! diagonal product state, so nothing is lost. In that case the inner problem
//! is convex in the logarithms of σ_L and σ_R.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{MeasureResult, Method};
use crate::error::{Error, Result};
use crate::linalg::{
    c64, eigh, lambda_max, marginal_of_factor, BipartiteCut, ComplexMatrix, DensityOperator, Keep, SubState,
    SUPPORT_CUTOFF, SUPPORT_LEAK_TOL,
};

#[derive(Clone, Debug)]
pub struct SeesawOptions {
    pub restarts: usize,
    /// Relative duality gap at which a restart stops.
    pub outer_tol: f64,
    /// Maximum alternations per inner minimization.
    pub inner_iters: usize,
    /// Maximum ascent steps on the dual variable.
    pub max_outer: usize,
    pub seed: u64,
}

impl Default for SeesawOptions {
    fn default() -> Self {
        Self { restarts: 8, outer_tol: 1e-7, inner_iters: 500, max_outer: 2000, seed: 0 }
    }
}

/// Relative gap under which a run is reported as converged.
const CONVERGED_GAP: f64 = 1e-4;

#[derive(Clone, Copy, Debug)]
enum Start {
    Marginals,
    Mixed,
    MixedLeft,
    MixedRight,
    Random,
}

fn start_for(i: usize) -> Start {
    match i {
        0 => Start::Marginals,
        1 => Start::Mixed,
        2 => Start::MixedLeft,
        3 => Start::MixedRight,
        _ => Start::Random,
    }
}

trait Kernel: Sync {
    type Side: Clone + Send;
    /// Dual variable in log form, and also the gradient type.
    type Logits: Clone + Send;
    /// Per-P data shared by the best responses.
    type Weighted;

    fn start(&self, s: Start, rng: &mut ChaCha8Rng) -> (Self::Side, Self::Side);
    fn logits(&self, random: bool, rng: &mut ChaCha8Rng) -> Self::Logits;
    fn prepare(&self, logits: &Self::Logits) -> Result<Self::Weighted>;
    /// Best response of `side` to P and the other side, with the value Tr(PM).
    fn respond(&self, side: Keep, z: &Self::Weighted, other: &Self::Side) -> Result<(Self::Side, f64)>;
    /// λ_max(M) and M.
    fn evaluate(&self, l: &Self::Side, r: &Self::Side) -> Result<(f64, Self::Logits)>;
    /// logits + scale·grad, shifted so the largest logit is zero.
    fn step(&self, logits: &Self::Logits, g: &Self::Logits, scale: f64) -> Result<Self::Logits>;
}

struct Outcome<S> {
    t: f64,
    left: S,
    right: S,
    dual: f64,
    iterations: usize,
}

/// G(P) by alternating best responses, warm-started at (l, r).
fn dual_value<K: Kernel>(
    k: &K,
    logits: &K::Logits,
    l: &K::Side,
    r: &K::Side,
    opts: &SeesawOptions,
    iters: &mut usize,
) -> Result<(K::Side, K::Side, f64)> {
    let z = k.prepare(logits)?;
    let (mut l, mut r) = (l.clone(), r.clone());
    let mut prev = f64::INFINITY;
    let mut g = prev;
    for _ in 0..opts.inner_iters.max(1) {
        *iters += 1;
        l = k.respond(Keep::Left, &z, &r)?.0;
        let (nr, v) = k.respond(Keep::Right, &z, &l)?;
        r = nr;
        g = v;
        if prev - g <= 1e-13 * g {
            break;
        }
        prev = g;
    }
    Ok((l, r, g))
}

fn run_restart<K: Kernel>(k: &K, start: Start, seed: u64, opts: &SeesawOptions) -> Result<Outcome<K::Side>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (l0, r0) = k.start(start, &mut rng);
    let mut logits = k.logits(matches!(start, Start::Random), &mut rng);
    let mut iterations = 0;
    let (t0, _) = k.evaluate(&l0, &r0)?;
    let mut best = Outcome { t: t0, left: l0.clone(), right: r0.clone(), dual: 0.0, iterations: 0 };
    let (mut l, mut r, mut g) = dual_value(k, &logits, &l0, &r0, opts, &mut iterations)?;
    let mut eta = 1.0;
    for _ in 0..opts.max_outer {
        let (t, m) = k.evaluate(&l, &r)?;
        if t < best.t {
            best.t = t;
            best.left = l.clone();
            best.right = r.clone();
        }
        best.dual = best.dual.max(g);
        if best.t - best.dual <= opts.outer_tol * best.t {
            break;
        }
        let mut accepted = false;
        while eta > 1e-10 {
            let cand = k.step(&logits, &m, eta / t)?;
            let (nl, nr, ng) = dual_value(k, &cand, &l, &r, opts, &mut iterations)?;
            if ng >= g {
                logits = cand;
                l = nl;
                r = nr;
                g = ng;
                eta = (eta * 1.25).min(1e4);
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    best.iterations = iterations;
    Ok(best)
}

struct Solved<S> {
    left: S,
    right: S,
    converged: bool,
    iterations: usize,
}

fn solve<K: Kernel>(k: &K, opts: &SeesawOptions) -> Result<Solved<K::Side>> {
    let n = opts.restarts.max(1);
    let runs: Vec<Result<Outcome<K::Side>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let seed = opts.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            run_restart(k, start_for(i), seed, opts)
        })
        .collect();
    let mut best: Option<Outcome<K::Side>> = None;
    let mut dual = 0.0f64;
    let mut iterations = 0;
    for r in runs {
        let o = r?;
        iterations += o.iterations;
        dual = dual.max(o.dual);
        if best.as_ref().map_or(true, |b| o.t < b.t) {
            best = Some(o);
        }
    }
    // one side maximally mixed guarantees t ≤ min(d_L, d_R)²
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for s in [Start::MixedLeft, Start::MixedRight] {
        let (l, r) = k.start(s, &mut rng);
        let (t, _) = k.evaluate(&l, &r)?;
        if best.as_ref().map_or(true, |b| t < b.t) {
            best = Some(Outcome { t, left: l, right: r, dual: 0.0, iterations: 0 });
        }
    }
    let b = best.expect("at least one restart");
    Ok(Solved { converged: b.t - dual <= CONVERGED_GAP * b.t, left: b.left, right: b.right, iterations })
}

// ---------------------------------------------------------------- quantum kernel

struct QuantumKernel {
    /// columns of W in the reduced space, each reshaped n_l × n_r
    cols: Vec<ComplexMatrix>,
    n_l: usize,
    n_r: usize,
    marg_l: ComplexMatrix,
    marg_r: ComplexMatrix,
}

fn psd_power(m: &ComplexMatrix, p: f64, floor_rel: f64) -> Result<ComplexMatrix> {
    let e = eigh(&m.hermitian_part())?;
    let top = e.max().max(0.0);
    let floor = floor_rel * top;
    Ok(e.apply_fn(|x| x.max(floor).max(1e-300).powf(p)))
}

fn normalize(m: ComplexMatrix) -> ComplexMatrix {
    let tr = m.trace().re;
    m.scale(1.0 / tr)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_state(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(n, n, |_, _| c64::new(gaussian(rng), gaussian(rng)));
    let m = g.matmul_adjoint(&g);
    let tr = m.trace().re;
    normalize(&m + &ComplexMatrix::identity(n).scale(0.05 * tr / n as f64))
}

impl Kernel for QuantumKernel {
    type Side = ComplexMatrix;
    type Logits = ComplexMatrix;
    type Weighted = Vec<ComplexMatrix>;

    fn start(&self, s: Start, rng: &mut ChaCha8Rng) -> (ComplexMatrix, ComplexMatrix) {
        let mix_l = ComplexMatrix::identity(self.n_l).scale(1.0 / self.n_l as f64);
        let mix_r = ComplexMatrix::identity(self.n_r).scale(1.0 / self.n_r as f64);
        match s {
            Start::Marginals => (self.marg_l.clone(), self.marg_r.clone()),
            Start::Mixed => (mix_l, mix_r),
            Start::MixedLeft => (mix_l, self.marg_r.clone()),
            Start::MixedRight => (self.marg_l.clone(), mix_r),
            Start::Random => (random_state(self.n_l, rng), random_state(self.n_r, rng)),
        }
    }

    fn logits(&self, random: bool, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let k = self.cols.len();
        if !random {
            return ComplexMatrix::zeros(k, k);
        }
        ComplexMatrix::from_fn(k, k, |_, _| c64::new(gaussian(rng), gaussian(rng))).hermitian_part()
    }

    fn prepare(&self, logits: &ComplexMatrix) -> Result<Vec<ComplexMatrix>> {
        let k = self.cols.len();
        let half = if k == 1 {
            ComplexMatrix::identity(1)
        } else {
            let e = eigh(&logits.hermitian_part())?;
            let top = e.max();
            let z: f64 = e.values.iter().map(|&x| (x - top).exp()).sum();
            e.apply_fn(|x| ((x - top).exp() / z).sqrt())
        };
        Ok((0..k)
            .map(|j| {
                let mut x = ComplexMatrix::zeros(self.n_l, self.n_r);
                for (i, c) in self.cols.iter().enumerate() {
                    let w = half[(i, j)];
                    if w.norm() > 0.0 {
                        x = x.axpy(1.0, &c.scale_c(w));
                    }
                }
                x
            })
            .collect())
    }

    fn respond(&self, side: Keep, z: &Vec<ComplexMatrix>, other: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
        let inv = psd_power(other, -1.0, 1e-15)?;
        let n = if side == Keep::Left { self.n_l } else { self.n_r };
        let mut y = ComplexMatrix::zeros(n, n);
        for x in z {
            let term = match side {
                // X σ_R⁻ᵀ X†
                Keep::Left => x.matmul(&inv.transpose()).matmul_adjoint(x),
                // (X† σ_L⁻¹ X)ᵀ
                Keep::Right => x.adjoint_matmul(&inv.matmul(x)).transpose(),
            };
            y = &y + &term;
        }
        let root = psd_power(&y, 0.5, 0.0)?;
        let tr = root.trace().re;
        let sigma = normalize(psd_power(&root, 1.0, 1e-15)?);
        Ok((sigma, tr * tr))
    }

    fn evaluate(&self, l: &ComplexMatrix, r: &ComplexMatrix) -> Result<(f64, ComplexMatrix)> {
        let sl = psd_power(l, -0.5, 0.0)?;
        let srt = psd_power(r, -0.5, 0.0)?.transpose();
        let k = self.cols.len();
        let mut a = ComplexMatrix::zeros(self.n_l * self.n_r, k);
        for (j, c) in self.cols.iter().enumerate() {
            let y = sl.matmul(c).matmul(&srt);
            let col = a.col_mut(j);
            for p in 0..self.n_l {
                for q in 0..self.n_r {
                    col[p * self.n_r + q] = y[(p, q)];
                }
            }
        }
        let m = a.adjoint_matmul(&a).hermitian_part();
        Ok((lambda_max(&m)?, m))
    }

    fn step(&self, logits: &ComplexMatrix, g: &ComplexMatrix, scale: f64) -> Result<ComplexMatrix> {
        let next = logits.axpy(scale, g).hermitian_part();
        let top = lambda_max(&next)?;
        Ok(&next - &ComplexMatrix::identity(next.rows()).scale(top))
    }
}

// -------------------------------------------------------------- classical kernel

struct ClassicalKernel {
    /// (weight, left index, right index) of each support point of ρ
    points: Vec<(f64, usize, usize)>,
    n_l: usize,
    n_r: usize,
    marg_l: Vec<f64>,
    marg_r: Vec<f64>,
}

fn normalize_vec(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

impl Kernel for ClassicalKernel {
    type Side = Vec<f64>;
    type Logits = Vec<f64>;
    type Weighted = Vec<f64>;

    fn start(&self, s: Start, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        let mix = |n: usize| vec![1.0 / n as f64; n];
        let rand = |n: usize, rng: &mut ChaCha8Rng| {
            normalize_vec(
                (0..n)
                    .map(|_| {
                        let g = gaussian(rng);
                        g * g + 0.05
                    })
                    .collect(),
            )
        };
        match s {
            Start::Marginals => (self.marg_l.clone(), self.marg_r.clone()),
            Start::Mixed => (mix(self.n_l), mix(self.n_r)),
            Start::MixedLeft => (mix(self.n_l), self.marg_r.clone()),
            Start::MixedRight => (self.marg_l.clone(), mix(self.n_r)),
            Start::Random => {
                let l = rand(self.n_l, rng);
                (l, rand(self.n_r, rng))
            }
        }
    }

    fn logits(&self, random: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.points.len()).map(|_| if random { gaussian(rng) } else { 0.0 }).collect()
    }

    fn prepare(&self, logits: &Vec<f64>) -> Result<Vec<f64>> {
        let top = logits.iter().cloned().fold(f64::MIN, f64::max);
        let w: Vec<f64> = logits.iter().map(|&h| (h - top).exp()).collect();
        let z: f64 = w.iter().sum();
        Ok(w.iter().zip(&self.points).map(|(wx, &(p, _, _))| wx / z * p).collect())
    }

    fn respond(&self, side: Keep, z: &Vec<f64>, other: &Vec<f64>) -> Result<(Vec<f64>, f64)> {
        let n = if side == Keep::Left { self.n_l } else { self.n_r };
        let mut y = vec![0.0; n];
        for (&(_, a, c), &q) in self.points.iter().zip(z) {
            match side {
                Keep::Left => y[a] += q / other[c],
                Keep::Right => y[c] += q / other[a],
            }
        }
        let roots: Vec<f64> = y.iter().map(|v| v.max(0.0).sqrt()).collect();
        let s: f64 = roots.iter().sum();
        let floor = 1e-15 * roots.iter().cloned().fold(0.0, f64::max);
        let sigma = normalize_vec(roots.iter().map(|&x| x.max(floor).max(1e-300)).collect());
        Ok((sigma, s * s))
    }

    fn evaluate(&self, l: &Vec<f64>, r: &Vec<f64>) -> Result<(f64, Vec<f64>)> {
        let m: Vec<f64> = self.points.iter().map(|&(p, a, c)| p / (l[a] * r[c])).collect();
        Ok((m.iter().cloned().fold(0.0, f64::max), m))
    }

    fn step(&self, logits: &Vec<f64>, g: &Vec<f64>, scale: f64) -> Result<Vec<f64>> {
        let next: Vec<f64> = logits.iter().zip(g).map(|(h, m)| h + scale * m).collect();
        let top = next.iter().cloned().fold(f64::MIN, f64::max);
        Ok(next.into_iter().map(|h| h - top).collect())
    }
}

// ------------------------------------------------------------------- entry point

/// Relative cutoff for the see-saw's working space. The optimal σ weights a
/// Schmidt tail λ roughly like √λ, so directions well below the usual support
/// cutoff still matter for the certificate; below about 1e-15 the marginal's
/// spectrum is rounding noise and only destabilizes the iteration.
const SEESAW_SUPPORT: f64 = 1e-15;

fn support_basis(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let e = eigh(&m.hermitian_part())?;
    let idx = e.support_indices(SEESAW_SUPPORT);
    Ok(e.vectors.select(&idx))
}

fn embed(basis: &ComplexMatrix, reduced: &ComplexMatrix) -> Result<DensityOperator> {
    let full = basis.matmul(reduced).matmul_adjoint(basis);
    let tr = full.trace().re;
    DensityOperator::new(crate::linalg::HermitianOperator::new_unchecked(full.scale(1.0 / tr)))
}

/// Upper bound on I_max(ρ) across `cut` with a product witness.
pub fn imax_seesaw(rho: &SubState, cut: &BipartiteCut, opts: &SeesawOptions) -> Result<MeasureResult> {
    cut.check(rho.matrix())?;
    if rho.lambda_max() <= 0.0 {
        return Err(Error::contract("I_max of the zero operator is undefined"));
    }
    if rho.is_diagonal() {
        return imax_classical(rho, cut, opts);
    }
    let w = rho.factor(SUPPORT_CUTOFF);
    let ul = support_basis(&marginal_of_factor(&w, cut, Keep::Left))?;
    let ur = support_basis(&marginal_of_factor(&w, cut, Keep::Right))?;
    let (n_l, n_r) = (ul.cols(), ur.cols());
    let ul_h = ul.adjoint();
    let ur_c = ur.conj();
    let cols: Vec<ComplexMatrix> = (0..w.cols())
        .map(|j| ul_h.matmul(&crate::linalg::reshape_vector(w.col(j), cut)).matmul(&ur_c))
        .collect();
    let mut marg_l = ComplexMatrix::zeros(n_l, n_l);
    let mut marg_r = ComplexMatrix::zeros(n_r, n_r);
    for c in &cols {
        marg_l = &marg_l + &c.matmul_adjoint(c);
        marg_r = &marg_r + &c.transpose().matmul(&c.conj());
    }
    let k = QuantumKernel { cols, n_l, n_r, marg_l: normalize(marg_l), marg_r: normalize(marg_r) };
    let o = solve(&k, opts)?;
    let sl = embed(&ul, &o.left)?;
    let sr = embed(&ur, &o.right)?;
    let value = product_dmax(rho, &sl, &sr, cut)?;
    Ok(MeasureResult {
        value,
        witness: Some((sl, sr)),
        method: Method::Seesaw,
        converged: o.converged,
        iterations: o.iterations,
        distance_to_center: None,
    })
}

fn imax_classical(rho: &SubState, cut: &BipartiteCut, opts: &SeesawOptions) -> Result<MeasureResult> {
    let d = rho.matrix().diagonal();
    let top = d.iter().map(|z| z.re).fold(0.0, f64::max);
    let mut l_used = vec![usize::MAX; cut.d_l];
    let mut r_used = vec![usize::MAX; cut.d_r];
    let mut l_idx = Vec::new();
    let mut r_idx = Vec::new();
    let mut points = Vec::new();
    for (x, z) in d.iter().enumerate() {
        if z.re > SUPPORT_CUTOFF * top {
            let (a, c) = (x / cut.d_r, x % cut.d_r);
            if l_used[a] == usize::MAX {
                l_used[a] = l_idx.len();
                l_idx.push(a);
            }
            if r_used[c] == usize::MAX {
                r_used[c] = r_idx.len();
                r_idx.push(c);
            }
            points.push((z.re, l_used[a], r_used[c]));
        }
    }
    let (n_l, n_r) = (l_idx.len(), r_idx.len());
    let mut marg_l = vec![0.0; n_l];
    let mut marg_r = vec![0.0; n_r];
    for &(p, a, c) in &points {
        marg_l[a] += p;
        marg_r[c] += p;
    }
    let k = ClassicalKernel { points, n_l, n_r, marg_l: normalize_vec(marg_l), marg_r: normalize_vec(marg_r) };
    let o = solve(&k, opts)?;
    let lift = |idx: &[usize], v: &[f64], n: usize| {
        let mut full = vec![0.0; n];
        for (&i, &x) in idx.iter().zip(v) {
            full[i] = x;
        }
        DensityOperator::from_matrix(ComplexMatrix::from_real_diag(&normalize_vec(full)))
    };
    let sl = lift(&l_idx, &o.left, cut.d_l)?;
    let sr = lift(&r_idx, &o.right, cut.d_r)?;
    let value = product_dmax(rho, &sl, &sr, cut)?;
    Ok(MeasureResult {
        value,
        witness: Some((sl, sr)),
        method: Method::Seesaw,
        converged: o.converged,
        iterations: o.iterations,
        distance_to_center: None,
    })
}

/// D_max(ρ‖σ_L⊗σ_R) using the product structure, without forming σ_L⊗σ_R.
pub fn product_dmax(rho: &SubState, sl: &SubState, sr: &SubState, cut: &BipartiteCut) -> Result<f64> {
    cut.check(rho.matrix())?;
    let inv_sqrt = |s: &SubState| -> (ComplexMatrix, ComplexMatrix) {
        let idx = s.support(SUPPORT_CUTOFF);
        let e = s.eigen();
        let w: Vec<f64> = idx.iter().map(|&i| 1.0 / e.values[i].sqrt()).collect();
        let ones = vec![1.0; idx.len()];
        (e.vectors.reconstruct_subset(&idx, &w), e.vectors.reconstruct_subset(&idx, &ones))
    };
    let (il, pl) = inv_sqrt(sl);
    let (ir, pr) = inv_sqrt(sr);
    let (irt, prt) = (ir.transpose(), pr.transpose());
    let w = rho.factor(SUPPORT_CUTOFF);
    let mut a = ComplexMatrix::zeros(cut.dim(), w.cols());
    let mut inside = 0.0;
    for j in 0..w.cols() {
        let x = crate::linalg::reshape_vector(w.col(j), cut);
        inside += pl.matmul(&x).matmul(&prt).frobenius_norm().powi(2);
        let y = il.matmul(&x).matmul(&irt);
        let col = a.col_mut(j);
        for p in 0..cut.d_l {
            for q in 0..cut.d_r {
                col[p * cut.d_r + q] = y[(p, q)];
            }
        }
    }
    let leaked = (rho.trace() - inside).max(0.0);
    if leaked > SUPPORT_LEAK_TOL {
        return Err(Error::Support { leaked });
    }
    let m = if a.cols() <= a.rows() { a.adjoint_matmul(&a) } else { a.matmul_adjoint(&a) };
    let top = lambda_max(&m.hermitian_part())?;
    Ok(top.log2())
}
