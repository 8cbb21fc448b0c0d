mod common;

use arealaw::agsp::{certify_agsp, chebyshev_agsp_from_eigen, extend_agsp, select_degree};
use arealaw::linalg::{BipartiteCut, ComplexMatrix};
use arealaw::models::{build_hamiltonian, solve, ChainModel, ModelKind};
use common::*;

fn tfim(n: usize, h: f64) -> ChainModel {
    ChainModel::new(ModelKind::TransverseFieldIsing { h }, n).unwrap()
}

/// Open-chain −Σ ZZ − h Σ X by free fermions: the single-particle energies are
/// twice the singular values of the n×n bidiagonal matrix with h on the
/// diagonal and 1 above it. Returns (E0, gap) of the unscaled Hamiltonian.
fn free_fermion(n: usize, h: f64) -> (f64, f64) {
    let b = ComplexMatrix::from_fn(n, n, |i, j| {
        let x = if i == j { h } else if j == i + 1 { 1.0 } else { 0.0 };
        arealaw::linalg::c64::new(x, 0.0)
    });
    let s: Vec<f64> = jacobi_eigenvalues(&b.adjoint().matmul(&b)).iter().map(|x| x.max(0.0).sqrt()).collect();
    (-s.iter().sum::<f64>(), 2.0 * s[0])
}

/// Norm of the largest bond term: the end bonds carry the full field of their
/// outer site and half of the inner one.
fn tfim_scale(n: usize, h: f64) -> f64 {
    let z = ComplexMatrix::from_real_diag(&[1.0, -1.0]);
    let x = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
    let id = ComplexMatrix::identity(2);
    let (wl, wr) = if n == 2 { (1.0, 1.0) } else { (1.0, 0.5) };
    let t = &(&kron(&z, &z).scale(-1.0) - &kron(&x, &id).scale(h * wl)) - &kron(&id, &x).scale(h * wr);
    jacobi_eigenvalues(&t).iter().map(|v| v.abs()).fold(0.0, f64::max)
}

#[test]
fn tfim_matches_free_fermions() {
    for (n, h) in [(4, 2.0), (6, 2.0), (6, 0.7), (8, 2.0)] {
        let (_, gs) = solve(&tfim(n, h)).unwrap();
        let (e0, gap) = free_fermion(n, h);
        let s = tfim_scale(n, h);
        assert!((gs.e0 - e0 / s).abs() < 1e-9, "n={n} h={h}: {} vs {}", gs.e0, e0 / s);
        if h > 1.0 {
            assert_eq!(gs.r, 1);
            assert!((gs.gamma - gap / s).abs() < 1e-9, "n={n} h={h}: {} vs {}", gs.gamma, gap / s);
        }
    }
}

#[test]
fn classical_models_by_enumeration() {
    for n in 2..=8 {
        let (_, gs) = solve(&ChainModel::new(ModelKind::ProjectorChain, n).unwrap()).unwrap();
        assert_eq!(gs.r, no_adjacent_ones(n), "n = {n}");
        assert_eq!((gs.e0, gs.gamma), (0.0, 1.0));
        let (_, gs) = solve(&ChainModel::new(ModelKind::ClassicalIsing, n).unwrap()).unwrap();
        assert_eq!(gs.r, 2);
        assert_eq!(gs.spectral.emax, (n - 1) as f64);
    }
    // the projector chain Hamiltonian counts adjacent pairs of ones
    let h = build_hamiltonian(&ChainModel::new(ModelKind::ProjectorChain, 5).unwrap()).unwrap();
    for x in 0usize..32 {
        let pairs = (x & (x >> 1)).count_ones() as f64;
        assert_eq!(h.matrix()[(x, x)].re, pairs);
    }
}

#[test]
fn classical_ising_information_is_one_bit() {
    for (n, l) in [(4, 2), (6, 3), (6, 1)] {
        let (_, gs) = solve(&ChainModel::new(ModelKind::ClassicalIsing, n).unwrap()).unwrap();
        let dl = 1 << l;
        let i = oracle_mutual_info(gs.omega.matrix(), dl, (1 << n) / dl);
        assert!((i - 1.0).abs() < 1e-9);
    }
}

/// Δ(ℓ) = max over excited levels of (T_ℓ(x(E))/T_ℓ(x(E₀)))² by the three-term recurrence.
fn chebyshev_delta(levels: &[f64], e0: f64, e1: f64, emax: f64, degree: usize) -> f64 {
    let t = |x: f64| {
        let (mut a, mut b) = (1.0, x);
        if degree == 0 {
            return 1.0;
        }
        for _ in 1..degree {
            (a, b) = (b, 2.0 * x * b - a);
        }
        b
    };
    let x = |e: f64| (2.0 * e - emax - e1) / (emax - e1);
    let t0 = t(x(e0));
    levels.iter().filter(|&&e| e > 0.5 * (e0 + e1)).map(|&e| (t(x(e)) / t0).powi(2)).fold(0.0, f64::max)
}

#[test]
fn agsp_matches_recurrence_and_dense_check() {
    let n = 4;
    let model = tfim(n, 2.0);
    let (h, gs) = solve(&model).unwrap();
    let cut = BipartiteCut::chain(n, 2, 2).unwrap();
    let levels = jacobi_eigenvalues(h.matrix());
    let (e0, e1, emax) = (gs.spectral.e0, gs.spectral.e1, gs.spectral.emax);
    let q = &ComplexMatrix::identity(16) - &gs.pi_gs;
    let mut last = f64::INFINITY;
    for degree in [1, 2, 4, 8] {
        let a = chebyshev_agsp_from_eigen(&gs.eigen, &gs.spectral, degree, &cut).unwrap();
        let want = chebyshev_delta(&levels, e0, e1, emax, degree);
        assert!((a.delta - want).abs() <= 1e-9 * want.max(1e-300) + 1e-15, "degree {degree}: {} vs {want}", a.delta);
        let kq = a.k.matmul(&q);
        let dense = *jacobi_eigenvalues(&kq.matmul_adjoint(&kq)).last().unwrap();
        assert!((dense - a.delta).abs() < 1e-9);
        assert!(a.fixes_gs_error <= 1e-8);
        assert!(a.delta <= a.envelope_delta * (1.0 + 1e-9));
        assert!(a.delta < last);
        last = a.delta;
        // D cannot exceed min(d_L², d_R²)
        assert!(a.d <= 16);
    }
}

#[test]
fn degree_selection_and_extension() {
    let (_, gs) = solve(&tfim(6, 2.0)).unwrap();
    let cut = BipartiteCut::chain(6, 2, 3).unwrap();
    let a = select_degree(&gs.eigen, &gs.spectral, &cut, 0.25, 1.0, 64).unwrap();
    assert!(a.shrink_product() <= 0.25);
    // the next smaller power of two must miss the ceiling
    if a.degree > 1 {
        let b = chebyshev_agsp_from_eigen(&gs.eigen, &gs.spectral, a.degree / 2, &cut).unwrap();
        assert!(b.shrink_product() > 0.25);
    }
    let direct = certify_agsp(&a.k, &gs.pi_gs, &cut, a.truncation_tol).unwrap();
    let ext = extend_agsp(a.clone(), 1, 4).unwrap();
    let c = ext.certify(&gs.pi_gs).unwrap();
    assert_eq!(c.d, direct.d);
    assert!((c.delta - direct.delta).abs() < 1e-15);
    assert!(extend_agsp(a, 3, 4).is_err());
    let err = select_degree(&gs.eigen, &gs.spectral, &cut, 1e-30, 1.0, 4).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}
