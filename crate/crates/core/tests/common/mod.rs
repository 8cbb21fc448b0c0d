//! Random instances and independent numerical oracles shared by the
//! integration tests.
#![allow(dead_code)]

use arealaw::linalg::{c64, ComplexMatrix, DensityOperator, SubState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ginibre(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        c64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Induced-measure density operator of rank at most `rank`.
pub fn random_density_rank(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> DensityOperator {
    let g = ginibre(n, rank, rng);
    let m = g.matmul_adjoint(&g);
    let tr = m.trace().re;
    DensityOperator::from_matrix(m.scale(1.0 / tr).hermitian_part()).unwrap()
}

pub fn random_density(n: usize, rng: &mut ChaCha8Rng) -> DensityOperator {
    random_density_rank(n, n, rng)
}

pub fn random_unit_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<c64> {
    let g = ginibre(n, 1, rng);
    let norm = g.frobenius_norm();
    g.col(0).iter().map(|z| z / norm).collect()
}

/// Orthogonal projector onto the span of `rank` random vectors.
pub fn random_projector(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let q = random_isometry(n, rank, rng);
    q.matmul_adjoint(&q)
}

pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    random_isometry(n, n, rng)
}

/// n×rank matrix with orthonormal columns.
pub fn random_isometry(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let g = ginibre(n, rank, rng);
    // Gram-Schmidt
    let mut cols: Vec<Vec<c64>> = Vec::new();
    for j in 0..rank {
        let mut v = g.col(j).to_vec();
        for q in &cols {
            let overlap: c64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= overlap * qi;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        cols.push(v.into_iter().map(|z| z / norm).collect());
    }
    ComplexMatrix::from_columns(n, &cols)
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = (b.rows(), b.cols());
    ComplexMatrix::from_fn(a.rows() * br, a.cols() * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Eigenvalues of a Hermitian matrix in ascending order by cyclic Jacobi
/// rotations on the real symmetric embedding [[Re, −Im], [Im, Re]], whose
/// spectrum is that of the input with every value doubled.
pub fn jacobi_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let n = m.rows();
    let d = 2 * n;
    let mut a = vec![0.0f64; d * d];
    for i in 0..n {
        for j in 0..n {
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            a[i * d + j] = z.re;
            a[(i + n) * d + (j + n)] = z.re;
            a[i * d + (j + n)] = -z.im;
            a[(i + n) * d + j] = z.im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..d).flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * d + j].powi(2)).sum();
        let total: f64 = a.iter().map(|x| x * x).sum();
        if off <= 1e-30 * total.max(1e-300) {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..d).map(|i| a[i * d + i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

pub fn oracle_trace_norm(m: &ComplexMatrix) -> f64 {
    jacobi_eigenvalues(m).iter().map(|x| x.abs()).sum()
}

pub fn oracle_lambda_min(m: &ComplexMatrix) -> f64 {
    jacobi_eigenvalues(m)[0]
}

/// −Σ p log₂ p over the spectrum.
pub fn oracle_entropy(m: &ComplexMatrix) -> f64 {
    jacobi_eigenvalues(m).iter().filter(|&&p| p > 1e-15).map(|&p| -p * p.log2()).sum()
}

/// Partial trace by explicit index sums, independent of the library routine.
pub fn oracle_partial_trace(m: &ComplexMatrix, dl: usize, dr: usize, keep_left: bool) -> ComplexMatrix {
    if keep_left {
        ComplexMatrix::from_fn(dl, dl, |a, b| (0..dr).map(|c| m[(a * dr + c, b * dr + c)]).sum())
    } else {
        ComplexMatrix::from_fn(dr, dr, |a, b| (0..dl).map(|c| m[(c * dr + a, c * dr + b)]).sum())
    }
}

pub fn oracle_mutual_info(m: &ComplexMatrix, dl: usize, dr: usize) -> f64 {
    oracle_entropy(&oracle_partial_trace(m, dl, dr, true)) + oracle_entropy(&oracle_partial_trace(m, dl, dr, false))
        - oracle_entropy(m)
}

/// Number of n-bit strings without two adjacent ones.
pub fn no_adjacent_ones(n: usize) -> usize {
    (0u64..1 << n).filter(|x| x & (x >> 1) == 0).count()
}

pub fn sub(m: &ComplexMatrix) -> SubState {
    SubState::from_matrix(m.clone()).unwrap()
}

/// Random mixture of `terms` product states with weights summing to one.
pub fn random_product_mixture(
    dl: usize,
    dr: usize,
    terms: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(f64, DensityOperator, DensityOperator)> {
    let w: Vec<f64> = (0..terms).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = w.iter().sum();
    w.into_iter()
        .map(|p| {
            let rl = 1 + rng.random_range(0..dl);
            let rr = 1 + rng.random_range(0..dr);
            (p / total, random_density_rank(dl, rl, rng), random_density_rank(dr, rr, rng))
        })
        .collect()
}

/// Random instances of each domination construction. Every function returns
/// the oracle λ_min(factor·τ_L⊗τ_R − operand), normalized by max(factor, 1).
pub mod lemmas {
    use super::*;
    use arealaw::constructions::{
        discretize_left, dominate_conjugated, dominate_mixture, dominate_vec, flat_embed_product, FlatOptions,
    };
    use arealaw::entropy::product_dmax;
    use arealaw::linalg::{partial_trace, BipartiteCut, Keep};

    fn dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
        (2 + rng.random_range(0..2), 2 + rng.random_range(0..2))
    }

    fn margin(operand: &ComplexMatrix, l: &ComplexMatrix, r: &ComplexMatrix, factor: f64) -> f64 {
        let gap = &kron(l, r).scale(factor) - operand;
        oracle_lambda_min(&gap) / factor.max(1.0)
    }

    pub fn mixture(seed: u64) -> f64 {
        let mut r = rng(seed);
        let (dl, dr) = dims(&mut r);
        let terms = random_product_mixture(dl, dr, 1 + r.random_range(0..4), &mut r);
        let out = dominate_mixture(&terms).unwrap();
        let mut op = ComplexMatrix::zeros(dl * dr, dl * dr);
        for (p, a, b) in &terms {
            op = &op + &kron(a.matrix(), b.matrix()).scale(*p);
        }
        margin(&op, out.tau_l.matrix(), out.tau_r.matrix(), out.factor)
    }

    pub fn vec(seed: u64) -> f64 {
        let mut r = rng(seed);
        let (dl, dr) = dims(&mut r);
        let cut = BipartiteCut::new(dl, dr).unwrap();
        let g = ginibre(dl * dr, dl * dr, &mut r);
        let m = g.scale(1.0 / g.frobenius_norm());
        let out = dominate_vec(&m, &cut).unwrap();
        margin(&m.matmul_adjoint(&m), out.tau_l.matrix(), out.tau_r.matrix(), out.factor)
    }

    /// Checks both the tight factor and the lemma's (D·M)² factor.
    pub fn conjugated(seed: u64) -> f64 {
        let mut r = rng(seed);
        let (dl, dr) = dims(&mut r);
        let cut = BipartiteCut::new(dl, dr).unwrap();
        let terms = random_product_mixture(dl, dr, 1 + r.random_range(0..3), &mut r);
        // K of operator Schmidt rank at most 2
        let k = (0..1 + r.random_range(0..2)).fold(ComplexMatrix::zeros(dl * dr, dl * dr), |acc, _| {
            &acc + &kron(&ginibre(dl, dl, &mut r), &ginibre(dr, dr, &mut r))
        });
        let out = dominate_conjugated(&k, &terms, &cut).unwrap();
        let mut rho = ComplexMatrix::zeros(dl * dr, dl * dr);
        for (p, a, b) in &terms {
            rho = &rho + &kron(a.matrix(), b.matrix()).scale(*p);
        }
        let conj = k.matmul(&rho).matmul_adjoint(&k);
        let conj = conj.scale(1.0 / conj.trace().re);
        assert!(out.tight_factor <= out.factor * (1.0 + 1e-9));
        margin(&conj, out.tau_l.matrix(), out.tau_r.matrix(), out.tight_factor)
            .min(margin(&conj, out.tau_l.matrix(), out.tau_r.matrix(), out.factor))
    }

    pub fn discretization(seed: u64) -> f64 {
        let mut r = rng(seed);
        let (dl, dr) = dims(&mut r);
        let cut = BipartiteCut::new(dl, dr).unwrap();
        let rho = random_density_rank(dl * dr, 1 + r.random_range(0..dl * dr), &mut r);
        let sigma_r = DensityOperator::from_matrix(partial_trace(rho.matrix(), &cut, Keep::Right).unwrap()).unwrap();
        let noise = random_density(dl, &mut r);
        // ρ ≼ d_L²·(I/d_L ⊗ ρ_R), so s = 0 always qualifies; the last try uses it
        let mut s = 0.5;
        for attempt in 0.. {
            if attempt == 40 {
                s = 0.0;
            }
            let sl = &ComplexMatrix::identity(dl).scale((1.0 - s) / dl as f64) + &noise.matrix().scale(s);
            let sigma_l = DensityOperator::from_matrix(sl).unwrap();
            let t = product_dmax(rho.as_substate(), sigma_l.as_substate(), sigma_r.as_substate(), &cut).unwrap().exp2();
            if t <= (dl * dl) as f64 * (1.0 + 1e-9) || s == 0.0 {
                let eps = 0.05 + 0.4 * r.random::<f64>();
                let d = discretize_left(rho.as_substate(), &sigma_l, &sigma_r, t, eps, &cut).unwrap();
                assert!(d.trace_distance <= d.gentle_bound + 1e-9);
                assert!(d.inflation <= 1.0 + eps + 1e-12);
                return margin(d.rho.matrix(), d.sigma_l.matrix(), sigma_r.matrix(), d.factor);
            }
            s *= 0.5;
        }
        unreachable!()
    }

    /// ρ′_AB ≼ t′·σ_AB on the materialized embedding.
    pub fn flat_embedding(seed: u64) -> f64 {
        let mut r = rng(seed);
        let cut = BipartiteCut::new(2, 2).unwrap();
        let rho = random_density_rank(4, 1 + r.random_range(0..4), &mut r);
        let tl = random_density(2, &mut r);
        let tr = DensityOperator::from_matrix(partial_trace(rho.matrix(), &cut, Keep::Right).unwrap()).unwrap();
        let delta = 0.1 + 0.3 * r.random::<f64>();
        let opts = FlatOptions { resolution: 8, multiple_of: 1, max_d_b: 64 };
        let e = flat_embed_product(rho.as_substate(), &tl, &tr, &cut, delta, &opts).unwrap();
        let [orig, tilde, capped, sigma] = e.dense_parts().unwrap();
        assert!(oracle_trace_norm(&(&orig - &tilde)) <= delta / 2.0 + 1e-9);
        let gap = &sigma.scale(e.t_prime) - &capped;
        oracle_lambda_min(&gap) / e.t_prime.max(1.0)
    }
}

/// Random instances of the four standalone inequalities. Each returns
/// (measured, bound) computed with the oracles.
pub mod inequalities {
    use super::*;
    use arealaw::constructions::short_distance_bound;
    use arealaw::entropy::continuity_gap;
    use arealaw::linalg::{gentle_measure, BipartiteCut, HermitianOperator};

    pub fn gentle(seed: u64) -> (f64, f64) {
        let mut r = rng(seed);
        let n = 2 + r.random_range(0..7);
        let rho = random_density_rank(n, 1 + r.random_range(0..n), &mut r);
        let p = random_projector(n, 1 + r.random_range(0..n), &mut r);
        let (after, bound) = gentle_measure(rho.as_substate(), &HermitianOperator::new(p.clone()).unwrap()).unwrap();
        let kept = p.matmul(rho.matrix()).matmul(&p);
        assert!((&kept - after.matrix()).max_abs() < 1e-12);
        let leaked = 1.0 - kept.trace().re;
        // compare squares: near a full-rank projector the square root amplifies rounding
        assert!(((bound / 2.0).powi(2) - leaked.max(0.0)).abs() < 1e-12);
        (oracle_trace_norm(&(&kept - rho.matrix())), bound)
    }

    /// ‖Eig↓(ρ) − Eig↓(σ)‖₁ against ‖ρ − σ‖₁.
    pub fn bhatia(seed: u64) -> (f64, f64) {
        let mut r = rng(seed);
        let n = 2 + r.random_range(0..7);
        let a = random_density_rank(n, 1 + r.random_range(0..n), &mut r);
        let b = random_density_rank(n, 1 + r.random_range(0..n), &mut r);
        let ea = jacobi_eigenvalues(a.matrix());
        let eb = jacobi_eigenvalues(b.matrix());
        let lhs: f64 = ea.iter().zip(&eb).map(|(x, y)| (x - y).abs()).sum();
        (lhs, oracle_trace_norm(&(a.matrix() - b.matrix())))
    }

    /// ρ = σ^{1/2} C σ^{1/2} with 0 ≼ C ≼ (1+δ)·1 guarantees ρ ≼ (1+δ)σ.
    pub fn short_distance(seed: u64) -> (f64, f64) {
        let mut r = rng(seed);
        let n = 2 + r.random_range(0..6);
        let sigma = random_density(n, &mut r);
        let delta = 0.3 * r.random::<f64>();
        let eig = arealaw::linalg::eigh(sigma.matrix()).unwrap();
        let sqrt: Vec<f64> = eig.values.iter().map(|x| x.max(0.0).sqrt()).collect();
        let half = eig.vectors.reconstruct(&sqrt);
        let u = random_unitary(n, &mut r);
        let c: Vec<f64> = (0..n).map(|_| (1.0 + delta) * (0.5 + 0.5 * r.random::<f64>())).collect();
        let c = u.matmul(&ComplexMatrix::from_real_diag(&c)).matmul_adjoint(&u);
        let mut rho = half.matmul(&c).matmul(&half).hermitian_part();
        let tr = rho.trace().re;
        if tr > 1.0 {
            rho = rho.scale(1.0 / tr);
        }
        let bound = short_distance_bound(&sub(&rho), &sigma, delta).unwrap();
        (oracle_trace_norm(&(&rho - sigma.matrix())), bound)
    }

    pub fn continuity(seed: u64) -> (f64, f64) {
        let mut r = rng(seed);
        let (dl, dr) = (2 + r.random_range(0..3), 2 + r.random_range(0..3));
        let cut = BipartiteCut::new(dl, dr).unwrap();
        let a = random_density_rank(dl * dr, 1 + r.random_range(0..dl * dr), &mut r);
        // a nearby state, so that the bound is not vacuous in the distance term
        let b = random_density_rank(dl * dr, 1 + r.random_range(0..dl * dr), &mut r);
        let s = r.random::<f64>();
        let b = &a.matrix().scale(1.0 - s) + &b.matrix().scale(s);
        let (lhs, rhs) = continuity_gap(a.as_substate(), &sub(&b), &cut).unwrap();
        let oracle = (oracle_mutual_info(a.matrix(), dl, dr) - oracle_mutual_info(&b, dl, dr)).abs();
        assert!((lhs - oracle).abs() < 1e-8);
        let dist = oracle_trace_norm(&(a.matrix() - &b));
        assert!((rhs - (1.5 * (dl as f64).log2() * dist + 3.0)).abs() < 1e-8);
        (lhs, rhs)
    }
}
