mod common;

use arealaw::entropy::{dmax, dmin, imax_seesaw, mutual_info, rel_entropy, von_neumann_entropy, witness_margin, SeesawOptions};
use arealaw::linalg::{c64, BipartiteCut, ComplexMatrix, DensityOperator, SubState};
use common::*;
use proptest::prelude::*;

fn diag(p: &[f64]) -> SubState {
    SubState::from_matrix(ComplexMatrix::from_real_diag(p)).unwrap()
}

/// Flat state on the first `k` columns of `u`.
fn flat_on(u: &ComplexMatrix, k: usize) -> SubState {
    let idx: Vec<usize> = (0..k).collect();
    let v = u.select_columns(&idx);
    sub(&v.matmul_adjoint(&v).scale(1.0 / k as f64))
}

#[test]
fn commuting_pairs_match_closed_forms() {
    let rho = diag(&[0.5, 0.3, 0.2, 0.0]);
    let sigma = diag(&[0.25, 0.25, 0.1, 0.4]);
    // max_i p_i/q_i = 2, and the support of ρ carries 0.6 of σ
    assert!((dmax(&rho, &sigma).unwrap() - 1.0).abs() < 1e-12);
    assert!((dmin(&rho, &sigma).unwrap() + 0.6f64.log2()).abs() < 1e-12);
    let d: f64 = [(0.5, 0.25), (0.3, 0.25), (0.2, 0.1)].iter().map(|&(p, q): &(f64, f64)| p * (p / q).log2()).sum();
    assert!((rel_entropy(&rho, &sigma).unwrap() - d).abs() < 1e-12);
}

#[test]
fn flat_nested_pairs_have_equal_min_and_max_divergence() {
    let mut r = rng(11);
    for n in [2usize, 5, 8, 16] {
        let u = random_unitary(n, &mut r);
        for k_sigma in 1..=n.min(6) {
            for k_rho in 1..=k_sigma {
                let rho = flat_on(&u, k_rho);
                let sigma = flat_on(&u, k_sigma);
                let want = (k_sigma as f64 / k_rho as f64).log2();
                assert!((dmin(&rho, &sigma).unwrap() - want).abs() < 1e-9);
                assert!((dmax(&rho, &sigma).unwrap() - want).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn dmax_rejects_leaking_support() {
    let rho = diag(&[0.5, 0.5]);
    let sigma = diag(&[1.0, 0.0]);
    assert!(dmax(&rho, &sigma).is_err());
}

#[test]
fn mutual_information_matches_index_sum_oracle() {
    let mut r = rng(3);
    for (dl, dr) in [(2, 2), (2, 3), (3, 4)] {
        let rho = random_density_rank(dl * dr, 2, &mut r);
        let cut = BipartiteCut::new(dl, dr).unwrap();
        let got = mutual_info(rho.as_substate(), &cut).unwrap();
        let want = oracle_mutual_info(rho.matrix(), dl, dr);
        assert!((got - want).abs() < 1e-9, "{dl}x{dr}: {got} vs {want}");
        assert!((von_neumann_entropy(rho.as_substate()) - oracle_entropy(rho.matrix())).abs() < 1e-9);
    }
}

#[test]
fn bell_and_product_states() {
    let cut = BipartiteCut::new(2, 2).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let bell = DensityOperator::pure(&[c64::new(h, 0.0), c64::new(0.0, 0.0), c64::new(0.0, 0.0), c64::new(h, 0.0)])
        .unwrap();
    let opts = SeesawOptions::default();
    let m = imax_seesaw(bell.as_substate(), &cut, &opts).unwrap();
    // I_max of a maximally entangled pair of qubits is 2 log₂ 2
    assert!((m.value - 2.0).abs() < 1e-3, "{}", m.value);
    let mut r = rng(5);
    let a = random_density_rank(2, 1, &mut r);
    let b = random_density_rank(2, 1, &mut r);
    let prod = DensityOperator::from_matrix(kron(a.matrix(), b.matrix())).unwrap();
    let m = imax_seesaw(prod.as_substate(), &cut, &opts).unwrap();
    assert!(m.value.abs() < 1e-3, "{}", m.value);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn divergence_ordering(seed in any::<u64>(), n in 2usize..6) {
        let mut r = rng(seed);
        let rho = random_density(n, &mut r);
        let sigma = random_density(n, &mut r);
        let d = rel_entropy(rho.as_substate(), sigma.as_substate()).unwrap();
        let lo = dmin(rho.as_substate(), sigma.as_substate()).unwrap();
        let hi = dmax(rho.as_substate(), sigma.as_substate()).unwrap();
        prop_assert!(lo <= d + 1e-7);
        prop_assert!(d <= hi + 1e-7);
    }

    #[test]
    fn seesaw_brackets_mutual_information(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cut = BipartiteCut::new(2, 3).unwrap();
        let rho = random_density_rank(6, 1 + (seed % 6) as usize, &mut r);
        let opts = SeesawOptions { seed, ..SeesawOptions::default() };
        let m = imax_seesaw(rho.as_substate(), &cut, &opts).unwrap();
        let i = oracle_mutual_info(rho.matrix(), 2, 3);
        prop_assert!(i <= m.value + 1e-6);
        prop_assert!(m.value <= 2.0 + 1e-6);
        let margin = witness_margin(&m, rho.as_substate()).unwrap().unwrap();
        prop_assert!(margin >= -1e-9);
    }
}
