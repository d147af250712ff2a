use proptest::prelude::*;
use qdmono_core::frobenius::qh_projective_space;
use qdmono_core::ktheory::*;
use qdmono_core::numerics::c;
use qdmono_core::numerics::linalg::dot;
use qdmono_core::paths::Side;
use qdmono_core::periods::euler_matrix;

fn all_words(len: usize, slots: usize) -> Vec<Vec<(usize, Side)>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..len {
        let mut next = Vec::new();
        for w in &frontier {
            for i in 1..=slots {
                for s in [Side::L, Side::R] {
                    let mut v: Vec<(usize, Side)> = w.clone();
                    v.push((i, s));
                    next.push(v);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[test]
fn mutations_keep_p2_beilinson_exceptional() {
    let b = ExceptionalCollection::beilinson(2, 0);
    let words = all_words(4, 2);
    assert_eq!(words.len(), 1 + 4 + 16 + 64 + 256);
    for w in &words {
        let c = apply_word(&b, w).unwrap_or_else(|e| panic!("{w:?}: {e}"));
        c.check().unwrap();
    }
}

#[test]
fn braid_relation_and_inverse_pairs() {
    for n in 2..=3 {
        let b = ExceptionalCollection::beilinson(n, -1);
        for i in 1..n {
            let lhs = apply_word(&b, &[(i, Side::L), (i + 1, Side::L), (i, Side::L)]).unwrap();
            let rhs = apply_word(&b, &[(i + 1, Side::L), (i, Side::L), (i + 1, Side::L)]).unwrap();
            assert_eq!(lhs, rhs);
        }
        for i in 1..=n {
            assert_eq!(apply_word(&b, &[(i, Side::L), (i, Side::R)]).unwrap(), b);
            assert_eq!(apply_word(&b, &[(i, Side::R), (i, Side::L)]).unwrap(), b);
        }
    }
}

#[test]
fn koszul_dual_undone_by_right_word() {
    for n in 1..=3usize {
        let len = n + 1;
        // (R_{N-1} ⋯ R_1)(R_{N-1} ⋯ R_2) ⋯ R_{N-1}, rightmost factor first
        let mut word = Vec::new();
        for j in (1..len).rev() {
            for i in j..len {
                word.push((i, Side::R));
            }
        }
        for a in -2..=1 {
            let b = ExceptionalCollection::beilinson(n, a);
            let d = left_koszul_dual(&b);
            assert_eq!(apply_word(&d, &word).unwrap(), b, "n={n} a={a}");
        }
    }
}

#[test]
fn psi_q_is_an_isometry_on_random_classes() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for n in 1..=3usize {
        for q in [c(1.0, 0.0), c(0.8, 0.3)] {
            let g = euler_matrix(&qh_projective_space(n, q));
            for _ in 0..10 {
                let e = KClass::from_coeffs((0..=n).map(|_| rng.gen_range(-3..=3)).collect());
                let f = KClass::from_coeffs((0..=n).map(|_| rng.gen_range(-3..=3)).collect());
                let a = integral_structure_map(&e, IntegralStructure::PsiQ { q }).coeffs;
                let b = integral_structure_map(&f, IntegralStructure::PsiQ { q }).coeffs;
                let v = dot(&a, &g.mul_vec(&b));
                let want = euler_chi(&e, &f) as f64;
                assert!((v - c(want, 0.0)).norm() < 1e-10 * want.abs().max(1.0), "n={n} {v} vs {want}");
            }
        }
    }
}

proptest! {
    #[test]
    fn euler_form_is_bilinear(n in 1usize..4, x in prop::collection::vec(-5i64..5, 4), y in prop::collection::vec(-5i64..5, 4), k in -3i64..3) {
        let e = KClass::from_coeffs(x[..=n].to_vec());
        let f = KClass::from_coeffs(y[..=n].to_vec());
        prop_assert_eq!(euler_chi(&e.scaled(k), &f), k * euler_chi(&e, &f));
        prop_assert_eq!(euler_chi(&e.add(&f), &f), euler_chi(&e, &f) + euler_chi(&f, &f));
        prop_assert_eq!(chi_hrr(&e, &f), Q128::from_integer(euler_chi(&e, &f) as i128));
    }

    #[test]
    fn line_bundles_multiply(n in 1usize..4, a in -6i64..6, b in -6i64..6) {
        prop_assert_eq!(KClass::line_bundle(n, a).tensor(&KClass::line_bundle(n, b)), KClass::line_bundle(n, a + b));
        prop_assert_eq!(KClass::line_bundle(n, a).dual(), KClass::line_bundle(n, -a));
        prop_assert_eq!(euler_chi(&KClass::line_bundle(n, a), &KClass::line_bundle(n, b)), chi_line(n, a, b));
    }

    #[test]
    fn helix_shifts_compose(n in 1usize..4, a in -2i64..2, k in -3i64..4, l in -3i64..4) {
        let b = ExceptionalCollection::beilinson(n, a);
        prop_assert_eq!(helix_shift(&helix_shift(&b, k), l), helix_shift(&b, k + l));
        prop_assert!(helix_shift(&b, k).check().is_ok());
    }
}
