//! The acceptance gate: every criterion at its stated tolerance, one line per criterion.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::time::Instant;

use num_complex::Complex64 as C64;
use qdmono::report::KTheorySection;
use qdmono::verify::{braided_system, euler_gram, lattice_distance, match_classes, verify_dubrovin, VerifyOptions};
use qdmono_core::frobenius::{default_q, j_series, qh_projective_space, symplectic_residual};
use qdmono_core::ktheory::*;
use qdmono_core::numerics::linalg::{dot, eig, vmax_dist};
use qdmono_core::paths::{reference_system, Direction, Side};
use qdmono_core::periods::{EngineOptions, PeriodEngine};
use qdmono_core::stokes::{
    compare_monodromy, consistency_report, half_turn, monodromy_data_analytic, monodromy_data_from_reflections,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn engine(n: usize) -> PeriodEngine {
    PeriodEngine::new(qh_projective_space(n, default_q(n)), EngineOptions::default()).unwrap()
}

fn q_of(m: C64) -> C64 {
    (C64::new(0.0, PI) * m).exp()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let e = PeriodEngine::new(qh_projective_space(1, C64::new(1.0, 0.0)), EngineOptions::default()).unwrap();
    let eta = Direction::reference();
    let m = C64::new(0.0, 0.0);
    let a = monodromy_data_analytic(&e, &eta).unwrap();
    let b = monodromy_data_from_reflections(&e, &eta, m).unwrap();
    let cmp = compare_monodromy(&a, &b);
    let betas: Vec<_> = b.betas.iter().map(|r| r.beta.clone()).collect();
    let g = euler_gram(&e, &betas);
    let want = [[1.0, 2.0], [0.0, 1.0]];
    let mut dg: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            dg = dg.max((g[i][j] - want[i][j]).norm());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        cmp.v_plus <= 1e-5 && dg <= 1e-4 && secs < 30.0,
        format!("two-way V_+ {:.2e}, Gram defect {dg:.2e}, {secs:.2}s", cmp.v_plus),
    )
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let report = verify_dubrovin(qh_projective_space(2, C64::from_polar(1.0, 0.2)), &VerifyOptions::default());
    let secs = t.elapsed().as_secs_f64();
    let row = |l: &str| report.residual(l).and_then(|r| r.value).unwrap_or(f64::INFINITY);
    let central = row("two-way C (row signs normalised)");
    let gram_defect = row("Euler Gram after braid = Beilinson Gram");
    let beilinson = [[1, 3, 6], [0, 1, 3], [0, 0, 1]];
    let (rounded_ok, word) = match &report.ktheory {
        KTheorySection::Matched { beilinson: Some(b), .. } => {
            let ok = b.euler_gram.iter().enumerate().all(|(i, r)| {
                r.iter().enumerate().all(|(j, z)| z[0].round() as i64 == beilinson[i][j] && z[1].abs() <= 1e-4)
            });
            (ok, b.word.join(" "))
        }
        _ => (false, String::from("none")),
    };
    outcome(
        rounded_ok && gram_defect <= 1e-4 && central <= 1e-4 && secs < 300.0 && report.errors.is_empty(),
        format!("braid [{word}], Beilinson Gram defect {gram_defect:.2e}, two-way C {central:.2e}, {secs:.2}s"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for n in [1, 2] {
        let e = engine(n);
        let eu = e.euler_matrix();
        for m in [0.0, 0.3, -0.25] {
            let m = C64::new(m, 0.0);
            let q = q_of(m);
            for _ in 0..20 {
                let a = random_vec(&mut rng, n + 1);
                let b = random_vec(&mut rng, n + 1);
                let h = e.hm_pairing(m, &a, &b).unwrap();
                let want = q * dot(&a, &eu.mul_vec(&b)) + q.inv() * dot(&b, &eu.mul_vec(&a));
                worst = worst.max((h - want).norm());
            }
        }
    }
    outcome(worst <= 1e-6, format!("max |h_m - closed form| {worst:.2e}"))
}

fn criterion_4() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [1, 2] {
        let e = engine(n);
        let sys = reference_system(e.u(), &Direction::reference(), e.lambda0).unwrap();
        let b0 = e.reflection_vectors(C64::new(0.0, 0.0), &sys).unwrap();
        let b3 = e.reflection_vectors(C64::new(0.3, 0.0), &sys).unwrap();
        for (x, y) in b0.iter().zip(&b3) {
            worst = worst.max(vmax_dist(&x.beta, &y.beta));
        }
    }
    outcome(worst <= 1e-5, format!("max |β(0) - β(0.3)| {worst:.2e}"))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut eig_err, mut refl_err): (f64, f64) = (0.0, 0.0);
    for n in [1, 2] {
        let e = engine(n);
        let sys = reference_system(e.u(), &Direction::reference(), e.lambda0).unwrap();
        for m in [0.0, 0.3] {
            let m = C64::new(m, 0.0);
            let q = q_of(m);
            let h = e.hm_matrix(m).unwrap();
            let bp = e.reflection_vectors(m, &sys).unwrap();
            let bm = e.reflection_vectors(-m, &sys).unwrap();
            for (k, p) in sys.paths.iter().enumerate() {
                let mono = e.path_loop_monodromy(m, p).unwrap();
                let (vals, _) = eig(&mono).unwrap();
                let mu = -q.powi(-2);
                eig_err = eig_err.max(vals.iter().map(|v| (v - mu).norm()).fold(f64::INFINITY, f64::min));
                for _ in 0..5 {
                    let a = random_vec(&mut rng, n + 1);
                    let s = q.inv() * dot(&a, &h.mul_vec(&bm[k].beta));
                    let want: Vec<C64> = a.iter().zip(&bp[k].beta).map(|(x, b)| x - b * s).collect();
                    refl_err = refl_err.max(vmax_dist(&mono.mul_vec(&a), &want));
                }
            }
        }
    }
    outcome(eig_err <= 1e-6 && refl_err <= 1e-5, format!("eigenvalue {eig_err:.2e}, reflection formula {refl_err:.2e}"))
}

fn criterion_6() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [1, 2, 3] {
        let e = engine(n);
        let sys = reference_system(e.u(), &Direction::reference(), e.lambda0).unwrap();
        for m in [0.0, 0.3, -0.25] {
            let m = C64::new(m, 0.0);
            let q = q_of(m);
            let bp = e.reflection_vectors(m, &sys).unwrap();
            let bm = e.reflection_vectors(-m, &sys).unwrap();
            for (x, y) in bp.iter().zip(&bm) {
                let h = e.hm_pairing(m, &x.beta, &y.beta).unwrap();
                worst = worst.max((h - q - q.inv()).norm());
            }
        }
    }
    outcome(worst <= 1e-6, format!("max |h_m(β_i(m), β_i(-m)) - q - q^-1| {worst:.2e}"))
}

fn criterion_7() -> Outcome {
    let e = engine(2);
    let m = C64::new(0.0, 0.0);
    let (mut pred, mut prod): (f64, f64) = (0.0, 0.0);
    let mut walls = 0;
    for start in [Direction::reference(), Direction::reference().opposite_ccw()] {
        let ht = half_turn(&e, &start, m).unwrap();
        walls += ht.crossings.len();
        pred = pred.max(ht.prediction_error);
        let refl = monodromy_data_from_reflections(&e, &start, m).unwrap();
        prod = prod.max(ht.v_minus.dist(&refl.v_minus));
        let an = monodromy_data_analytic(&e, &start).unwrap();
        let s = compare_monodromy(&an, &refl).signs;
        let mut d: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                d = d.max((ht.v_minus[(i, j)] - an.v_minus[(i, j)] * (s[i] * s[j])).norm());
            }
        }
        prod = prod.max(d);
    }
    outcome(
        walls == 6 && pred <= 1e-4 && prod <= 1e-4,
        format!("{walls} walls, prediction {pred:.2e}, V_- product {prod:.2e}"),
    )
}

fn criterion_8() -> Outcome {
    let label = "V_+ = C^-t g e^{-πiρ} e^{-πiθ} C^-1";
    let mut worst: f64 = 0.0;
    for n in [1, 2] {
        let e = engine(n);
        let eta = Direction::reference();
        for data in [monodromy_data_analytic(&e, &eta).unwrap(), monodromy_data_from_reflections(&e, &eta, C64::new(0.0, 0.0)).unwrap()] {
            let rows = consistency_report(&e, &data, 1e-4).unwrap();
            let r = rows.iter().find(|r| r.label == label).expect("row present");
            worst = worst.max(r.value);
        }
    }
    outcome(worst <= 1e-4, format!("max residual {worst:.2e} (both derivations)"))
}

fn all_words(len: usize, slots: usize) -> Vec<Vec<(usize, Side)>> {
    let mut out = vec![vec![]];
    let mut frontier: Vec<Vec<(usize, Side)>> = vec![vec![]];
    for _ in 0..len {
        let mut next = Vec::new();
        for w in &frontier {
            for i in 1..=slots {
                for s in [Side::L, Side::R] {
                    let mut v = w.clone();
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

fn criterion_9() -> Outcome {
    let mut hrr_ok = true;
    for n in 1..=3 {
        for a in -4..=4 {
            for b in -4..=4 {
                let (e, f) = (KClass::line_bundle(n, a), KClass::line_bundle(n, b));
                hrr_ok &= chi_hrr(&e, &f) == Q128::from_integer(chi_line(n, a, b) as i128);
            }
        }
    }
    let b = ExceptionalCollection::beilinson(2, 0);
    let mut braid_ok = true;
    let words = all_words(4, 2);
    for w in &words {
        let Ok(c) = apply_word(&b, w) else {
            braid_ok = false;
            continue;
        };
        braid_ok &= c.check().is_ok();
        let lhs = apply_word(&c, &[(1, Side::L), (2, Side::L), (1, Side::L)]).unwrap();
        let rhs = apply_word(&c, &[(2, Side::L), (1, Side::L), (2, Side::L)]).unwrap();
        braid_ok &= lhs == rhs;
        for i in 1..=2 {
            braid_ok &= apply_word(&c, &[(i, Side::L), (i, Side::R)]).unwrap() == c;
        }
    }
    let mut koszul_ok = true;
    for n in 1..=3 {
        for a in -2..=2 {
            let e = ExceptionalCollection::beilinson(n, a);
            let d = left_koszul_dual(&e);
            let len = n + 1;
            for i in 0..len {
                for j in 0..len {
                    koszul_ok &= euler_chi(&e.classes[i], &d.classes[len - 1 - j]) == (i == j) as i64;
                }
            }
        }
    }
    outcome(
        hrr_ok && braid_ok && koszul_ok,
        format!("HRR {hrr_ok}, braid relations on {} words {braid_ok}, Koszul δ {koszul_ok}", words.len()),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        let q = default_q(n);
        let eu = qdmono_core::periods::euler_matrix(&qh_projective_space(n, q));
        for _ in 0..10 {
            let e = KClass::from_coeffs((0..=n).map(|_| rng.gen_range(-5..=5)).collect());
            let f = KClass::from_coeffs((0..=n).map(|_| rng.gen_range(-5..=5)).collect());
            let a = integral_structure_map(&e, IntegralStructure::PsiQ { q }).coeffs;
            let b = integral_structure_map(&f, IntegralStructure::PsiQ { q }).coeffs;
            let v = dot(&a, &eu.mul_vec(&b));
            worst = worst.max((v - euler_chi(&e, &f) as f64).norm());
        }
    }
    outcome(worst <= 1e-9, format!("max |<Ψ_Q E, Ψ_Q F> - χ| {worst:.2e}"))
}

fn criterion_11() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut matched = true;
    for n in [1, 2] {
        let e = engine(n);
        let q = default_q(n);
        let m = C64::new(0.0, 0.0);
        let sys = reference_system(e.u(), &Direction::from_angle(FRAC_PI_2), e.lambda0).unwrap();
        let betas: Vec<_> = e.reflection_vectors(m, &sys).unwrap().into_iter().map(|r| r.beta).collect();
        let Ok((classes, _)) = match_classes(n, q, &betas, 1e-4) else {
            matched = false;
            continue;
        };
        let coll = ExceptionalCollection { classes };
        for w in all_words(2, n) {
            let predicted = apply_word(&coll, &w).unwrap();
            let s = braided_system(&e, &sys, &w).unwrap();
            let got: Vec<_> = e.reflection_vectors(m, &s).unwrap().into_iter().map(|r| r.beta).collect();
            worst = worst.max(lattice_distance(n, q, &got, &predicted.classes));
            count += 1;
        }
    }
    outcome(matched && worst <= 1e-4, format!("{count} braid words, max lattice distance {worst:.2e}"))
}

fn criterion_12() -> Outcome {
    let (mut symp, mut jdist): (f64, f64) = (0.0, 0.0);
    for n in 1..=3 {
        let q = default_q(n);
        let model = qh_projective_space(n, q);
        let s = model.calibration_series(6).unwrap();
        symp = symp.max(symplectic_residual(&model, &s, 6).unwrap());
        let j = j_series(n, q, 6);
        let mut one = vec![C64::new(0.0, 0.0); n + 1];
        one[0] = C64::new(1.0, 0.0);
        for (k, jk) in j.iter().enumerate() {
            let v = model.adjoint(&s[k]).unwrap().mul_vec(&one);
            jdist = jdist.max(vmax_dist(&v, jk));
        }
    }
    outcome(symp <= 1e-10 && jdist <= 1e-9, format!("symplectic {symp:.2e}, S^t 1 vs J-series {jdist:.2e}"))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("P^1 two-way Stokes and Gram", criterion_1),
        ("P^2 Beilinson Gram and central connection", criterion_2),
        ("h_m closed form", criterion_3),
        ("m-independence of β", criterion_4),
        ("local monodromy", criterion_5),
        ("normalisation h_m(β, β) = q + q^-1", criterion_6),
        ("wall-crossing on P^2", criterion_7),
        ("Stokes/central relation", criterion_8),
        ("K-theory exactness", criterion_9),
        ("integral structure isometry", criterion_10),
        ("braid compatibility", criterion_11),
        ("calibration checks", criterion_12),
    ];
    let mut failed = Vec::new();
    let mut err = std::io::stderr();
    for (k, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        let flag = if o.pass { "PASS" } else { "FAIL" };
        // bypasses the test harness capture so the lines always show
        let _ = writeln!(err, "acceptance {:>2} {flag}  {name}: {}", k + 1, o.detail);
        if !o.pass {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
