//! Algebraic properties of the decomposition, constraints and targets,
//! checked against brute-force oracles.

mod common;

use common::{cofactor_det, CHILDREN};
use lattice_dp::noise::{default_c_a, tail_constant};
use lattice_dp::{
    gaussian_sigma, gram_determinant, lattice_basis, smith_normal_form, unimodular_inverse, unit_ball_volume,
    ConstraintSet, Error, Histogram, IntMatrix, LatticeContext, NoiseTarget,
};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn to_i128(m: &IntMatrix) -> Vec<Vec<i128>> {
    m.to_i64_rows()
        .unwrap()
        .into_iter()
        .map(|r| r.into_iter().map(i128::from).collect())
        .collect()
}

/// Full row rank by brute force: some `k x k` minor is non-zero.
fn has_full_row_rank(rows: &[Vec<i64>]) -> bool {
    let (k, d) = (rows.len(), rows[0].len());
    fn subsets(d: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..d {
            cur.push(j);
            subsets(d, k, j + 1, cur, out);
            cur.pop();
        }
    }
    let mut all = Vec::new();
    subsets(d, k, 0, &mut Vec::new(), &mut all);
    all.iter().any(|cols| {
        let minor: Vec<Vec<i128>> = rows
            .iter()
            .map(|r| cols.iter().map(|&j| r[j] as i128).collect())
            .collect();
        cofactor_det(&minor) != 0
    })
}

fn matrix_strategy() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1usize..=4, 0usize..=3).prop_flat_map(|(k, extra)| {
        let d = k + extra;
        prop::collection::vec(prop::collection::vec(-6i64..=6, d.max(1)), k)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn snf_invariants(rows in matrix_strategy()) {
        let a = IntMatrix::from_rows(&rows);
        match smith_normal_form(&a) {
            Ok(dec) => {
                prop_assert!(has_full_row_rank(&rows));
                prop_assert_eq!(dec.u.mul(&a).mul(&dec.v), dec.d_mat.clone());
                prop_assert!(dec.d_mat.is_diagonal());
                prop_assert!(dec.u.determinant().abs().is_one());
                prop_assert!(dec.v.determinant().abs().is_one());
                prop_assert!(dec.v.mul(&dec.v_inv).is_identity());
                let f = dec.invariant_factors();
                prop_assert!(f.iter().all(|x| x.is_positive()));
                for w in f.windows(2) {
                    prop_assert!((&w[1] % &w[0]).is_zero(), "{} does not divide {}", w[0], w[1]);
                }
            }
            Err(Error::RankDeficient { .. }) => prop_assert!(!has_full_row_rank(&rows)),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn basis_spans_kernel_and_gram_matches_oracle(rows in matrix_strategy()) {
        prop_assume!(has_full_row_rank(&rows));
        let a = IntMatrix::from_rows(&rows);
        let dec = smith_normal_form(&a).unwrap();
        match lattice_basis(&dec) {
            Ok(b) => {
                prop_assert!(a.mul(&b.basis).is_zero());
                let bt_b = to_i128(&b.basis.transpose().mul(&b.basis));
                prop_assert_eq!(BigInt::from(cofactor_det(&bt_b)), b.gram_det.clone());
            }
            Err(Error::EmptyLattice) => prop_assert_eq!(rows.len(), rows[0].len()),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn gram_det_is_permutation_invariant(rows in matrix_strategy(), seed in any::<u64>()) {
        prop_assume!(has_full_row_rank(&rows) && rows[0].len() > rows.len());
        let d = rows[0].len();
        let mut perm: Vec<usize> = (0..d).collect();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for i in (1..d).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let permuted: Vec<Vec<i64>> = rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
        let g = |m: &[Vec<i64>]| lattice_basis(&smith_normal_form(&IntMatrix::from_rows(m)).unwrap()).unwrap().gram_det;
        prop_assert_eq!(g(&rows), g(&permuted));
    }
}

#[test]
fn unimodular_inverse_of_elementary_products() {
    let mut rng = ChaCha20Rng::seed_from_u64(44);
    for _ in 0..50 {
        let n = rng.random_range(2..=6);
        let mut m = IntMatrix::identity(n);
        for _ in 0..20 {
            let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
            let mut e = IntMatrix::identity(n);
            match rng.random_range(0..3) {
                0 if i != j => e.set(i, j, BigInt::from(rng.random_range(-3i64..=3))),
                1 if i != j => {
                    e.set(i, i, BigInt::zero());
                    e.set(j, j, BigInt::zero());
                    e.set(i, j, BigInt::one());
                    e.set(j, i, BigInt::one());
                }
                _ => e.set(i, i, BigInt::from(-1)),
            }
            m = m.mul(&e);
        }
        let inv = unimodular_inverse(&m).unwrap();
        assert!(m.mul(&inv).is_identity());
        assert!(inv.mul(&m).is_identity());
        assert_eq!(unimodular_inverse(&inv).unwrap(), m);
    }
    let not_unimodular =
        IntMatrix::from_rows(&[vec![2i64, 1], vec![1, 1]]).mul(&IntMatrix::from_rows(&[vec![1i64, 0], vec![0, 3]]));
    assert!(matches!(
        unimodular_inverse(&not_unimodular),
        Err(Error::NotUnimodular { .. })
    ));
}

#[test]
fn table_gram_determinants() {
    // Zero-margin r x c tables form a lattice with Gram determinant r^(c-1) c^(r-1).
    for (r, c) in [(2usize, 2usize), (2, 3), (3, 3), (3, 4), (4, 4)] {
        let cs = ConstraintSet::table_margins(r, c).unwrap();
        let (a, _) = cs.full_rank_reduce();
        let b = lattice_basis(&smith_normal_form(&a).unwrap()).unwrap();
        let oracle = cofactor_det(&to_i128(&b.basis.transpose().mul(&b.basis)));
        assert_eq!(BigInt::from(oracle), b.gram_det, "{r}x{c}");
        assert_eq!(
            oracle,
            (r as i128).pow(c as u32 - 1) * (c as i128).pow(r as u32 - 1),
            "{r}x{c}"
        );
        assert_eq!(gram_determinant(&b.basis), b.gram_det);
    }
}

fn random_lattice_point(ctx: &LatticeContext, rng: &mut ChaCha20Rng) -> Vec<i64> {
    let mut v = vec![0; ctx.dim()];
    for x in &mut v[ctx.rank()..] {
        *x = rng.random_range(-20..=20);
    }
    ctx.to_lattice(&v)
}

#[test]
fn basis_combinations_preserve_margins() {
    let cs = ConstraintSet::table_margins(4, 4).unwrap();
    let ctx = LatticeContext::from_constraints(&cs).unwrap();
    let a = cs.incidence_matrix();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let z = random_lattice_point(&ctx, &mut rng);
        assert!(a.mul_vec_i64(&z).iter().all(Zero::is_zero));
        assert!(ctx.preserves_invariants(&z));
        assert_eq!(ctx.to_lattice(&ctx.to_reduced(&z)), z);
        let x = Histogram::new(CHILDREN.to_vec()).unwrap();
        let y: Vec<i64> = CHILDREN.iter().zip(&z).map(|(a, b)| a + b).collect();
        assert!(cs.equivalent(&x, &y).unwrap());
    }
    let x = Histogram::new(CHILDREN.to_vec()).unwrap();
    let mut y = CHILDREN.to_vec();
    y[0] += 1;
    assert!(!cs.equivalent(&x, &y).unwrap());
}

#[test]
fn incidence_times_histogram_is_margins() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let cs = ConstraintSet::table_margins(3, 5).unwrap();
    let a = cs.incidence_matrix().to_i64_rows().unwrap();
    for _ in 0..1000 {
        let x: Vec<i64> = (0..15).map(|_| rng.random_range(0..1000)).collect();
        let direct: Vec<i64> = cs
            .constraints()
            .iter()
            .map(|c| c.indices.iter().map(|&i| x[i]).sum())
            .collect();
        let product: Vec<i64> = a.iter().map(|r| r.iter().zip(&x).map(|(p, q)| p * q).sum()).collect();
        assert_eq!(cs.margins_of(&x).unwrap(), direct);
        assert_eq!(product, direct);
    }
}

#[test]
fn full_rank_reduce_keeps_row_space() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for _ in 0..200 {
        let d = rng.random_range(2..=8);
        let k = rng.random_range(1..=8);
        let subsets: Vec<Vec<usize>> = (0..k)
            .map(|_| {
                let s: Vec<usize> = (0..d).filter(|_| rng.random_bool(0.5)).collect();
                if s.is_empty() {
                    vec![rng.random_range(0..d)]
                } else {
                    s
                }
            })
            .collect();
        let cs = ConstraintSet::from_subsets(d, subsets).unwrap();
        let full = cs.incidence_matrix();
        let (reduced, rank) = cs.full_rank_reduce();
        assert_eq!(reduced.rows(), rank);
        assert_eq!(rank, full.rank());
        let mut stacked = full.to_i64_rows().unwrap();
        stacked.extend(reduced.to_i64_rows().unwrap());
        assert_eq!(IntMatrix::from_rows(&stacked).rank(), rank);
    }
}

#[test]
fn log_targets_are_symmetric_and_match_formulas() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let (eps, sigma) = (0.7, 3.5);
    let l1 = NoiseTarget::laplace_l1(eps).unwrap();
    let l2 = NoiseTarget::laplace_l2(eps).unwrap();
    let g = NoiseTarget::gaussian(sigma).unwrap();
    for _ in 0..10_000 {
        let z: Vec<i64> = (0..6).map(|_| rng.random_range(-50..=50)).collect();
        let neg: Vec<i64> = z.iter().map(|x| -x).collect();
        let sq: f64 = z.iter().map(|&x| (x * x) as f64).sum();
        for t in [&l1, &l2, &g] {
            assert_eq!(t.log_target(&z), t.log_target(&neg));
        }
        let abs: f64 = z.iter().map(|&x| x.abs() as f64).sum();
        assert!((l1.log_target(&z) + eps * abs).abs() < 1e-9);
        assert!((l2.log_target(&z) + eps * sq.sqrt()).abs() < 1e-9);
        assert!((g.log_target(&z) + sq / (2.0 * sigma * sigma)).abs() < 1e-9);
    }
    let centered = NoiseTarget::gaussian_centered(sigma, vec![2, -1]).unwrap();
    assert!((centered.log_target(&[2, -1])).abs() < 1e-12);
    assert!(NoiseTarget::laplace_l1(0.0).is_err());
    assert!(NoiseTarget::gaussian(-1.0).is_err());
}

#[test]
fn ball_volumes_and_gaussian_scale() {
    use std::f64::consts::PI;
    assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
    assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
    assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
    // pi^(9/2) / Gamma(11/2)
    assert!((unit_ball_volume(9) - 3.2985089027387064).abs() < 1e-12);

    // Two cells with a fixed total: lattice {t (1, -1)}, Gram determinant 2.
    let k = tail_constant(1, 2.0);
    assert!((k - 11.31370849898476).abs() < 1e-12);
    assert!((default_c_a(1, k) - 7.278045395879426).abs() < 1e-12);
    let sigma = gaussian_sigma(0.25, 1e-6, 1, k).unwrap();
    assert!((sigma - 56.7238681355538).abs() < 1e-9, "{sigma}");

    assert!(gaussian_sigma(0.5, 1e-6, 1, k).is_err(), "epsilon must stay below 1/e");
    assert!(gaussian_sigma(0.1, 0.2, 1, k).is_err(), "delta must stay below epsilon");
}

#[test]
fn constraint_json_round_trip() {
    let cs = ConstraintSet::partition(&[3, 2, 4]).unwrap();
    let back = ConstraintSet::from_json(&cs.to_json().unwrap()).unwrap();
    assert_eq!(cs, back);
    assert!(
        ConstraintSet::from_json(r#"{"dimension": 2, "constraints": [{"label": "x", "indices": [0, 5]}]}"#).is_err()
    );
}
