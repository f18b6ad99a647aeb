//! Cross-module invariants: the family verifier against the independent
//! membership test, tensor diagonality against verification status, bound
//! conformance of verified families, and an extension-field end-to-end run.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use slicerank::counting::sumfree_bound;
use slicerank::families::{from_progression_free, tensor_power, verify_condition};
use slicerank::gamma::compute_gamma;
use slicerank::gf::{make_field_arc, Elem, FieldSpec, Vector};
use slicerank::poly::{build_f, build_g};
use slicerank::search::{
    build_hypergraph, check_set, max_independent_exact, DifferenceInstance, SearchOptions,
    SearchStatus, DEFAULT_VERTEX_GATE,
};
use slicerank::tensor::build_tensor;

struct Draw {
    field: Arc<FieldSpec>,
    n: u16,
    vectors: Vec<Vector>,
    sets: Vec<BTreeSet<Elem>>,
}

/// Random distinct vector sets of size ≤ 5 with random difference sets
/// containing 0, over GF(3) and GF(5) in up to two coordinates.
fn random_draws(seed: u64, count: usize) -> Vec<Draw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields = [make_field_arc(3, 1).unwrap(), make_field_arc(5, 1).unwrap()];
    let mut draws = Vec::with_capacity(count);
    for case in 0..count {
        let field = fields[case % 2].clone();
        let q = field.q();
        let n = rng.random_range(1..=2u16);
        let points = (q as usize).pow(n as u32);
        let size = rng.random_range(0..=5usize.min(points));
        let mut ids: Vec<usize> = (0..points).collect();
        ids.shuffle(&mut rng);
        let vectors: Vec<Vector> = ids[..size]
            .iter()
            .map(|&id| field.vector_from_index(id, n as usize))
            .collect();
        let sets: Vec<BTreeSet<Elem>> = (0..n)
            .map(|_| {
                let mut s: BTreeSet<Elem> = [field.zero()].into();
                for v in 1..q {
                    if rng.random_bool(0.5) {
                        s.insert(field.elem(v).unwrap());
                    }
                }
                s
            })
            .collect();
        draws.push(Draw {
            field,
            n,
            vectors,
            sets,
        });
    }
    draws
}

#[test]
fn verifier_matches_membership_test_on_random_draws() {
    for draw in random_draws(2024, 200) {
        let fam = from_progression_free(draw.field.clone(), draw.n, &draw.vectors).unwrap();
        let g = build_g(draw.field.clone(), &draw.sets).unwrap();
        let verified = verify_condition(&fam, Some(&g)).unwrap().verified;

        let inst = DifferenceInstance::new(draw.field.clone(), draw.sets.clone()).unwrap();
        let clean = check_set(&draw.vectors, &inst).unwrap().is_none();
        assert_eq!(verified, clean, "q={} n={}", draw.field.q(), draw.n);
    }
}

#[test]
fn verifier_matches_membership_test_exhaustively_over_f3() {
    let field = make_field_arc(3, 1).unwrap();
    let all_sets: Vec<Vec<u32>> = vec![vec![0], vec![0, 1], vec![0, 2], vec![0, 1, 2]];
    for s_vals in all_sets {
        let s: BTreeSet<Elem> = s_vals.iter().map(|&v| field.elem(v).unwrap()).collect();
        let g = build_g(field.clone(), std::slice::from_ref(&s)).unwrap();
        let inst = DifferenceInstance::uniform(field.clone(), 1, s).unwrap();
        for mask in 0u32..8 {
            let vectors: Vec<Vector> = (0..3)
                .filter(|&i| mask >> i & 1 == 1)
                .map(|i| field.vector_from_index(i, 1))
                .collect();
            let fam = from_progression_free(field.clone(), 1, &vectors).unwrap();
            let verified = verify_condition(&fam, Some(&g)).unwrap().verified;
            let clean = check_set(&vectors, &inst).unwrap().is_none();
            assert_eq!(verified, clean, "mask={mask:03b} S={s_vals:?}");
        }
    }
}

#[test]
fn combined_polynomial_degree_identity() {
    // deg(f·g) = (q−1)n + μn, which equals 3α(q−1)n by the definition of
    // α, so the block-split budget D/3 is exactly α(q−1)n.
    for draw in random_draws(13, 60) {
        let q = draw.field.q();
        let f = build_f(draw.field.clone(), draw.n, 3);
        let g = build_g(draw.field.clone(), &draw.sets).unwrap();
        let p = f.mul(&g);
        let inst = DifferenceInstance::new(draw.field.clone(), draw.sets.clone()).unwrap();
        let mu_n = inst.mu() * Ratio::from_integer(draw.n as i64);
        assert_eq!(
            Ratio::from_integer(p.degree() as i64),
            Ratio::from_integer(((q - 1) * draw.n as u32) as i64) + mu_n
        );
        let budget = Ratio::from_integer(3 * (q as i64 - 1) * draw.n as i64) * inst.alpha();
        assert_eq!(Ratio::from_integer(p.degree() as i64), budget);
    }
}

#[test]
fn tensor_diagonality_matches_verification() {
    for draw in random_draws(7, 120) {
        if draw.vectors.is_empty() {
            continue;
        }
        let fam = from_progression_free(draw.field.clone(), draw.n, &draw.vectors).unwrap();
        let g = build_g(draw.field.clone(), &draw.sets).unwrap();
        let verified = verify_condition(&fam, Some(&g)).unwrap().verified;

        let p = build_f(draw.field.clone(), draw.n, 3).mul(&g);
        let tensor = build_tensor(&p, &fam).unwrap();
        let diagonal_ok =
            tensor.is_diagonal() && tensor.diagonal_entries().iter().all(|e| !e.is_zero());
        assert_eq!(diagonal_ok, verified, "q={} n={}", draw.field.q(), draw.n);
    }
}

#[test]
fn verified_families_obey_both_ceilings() {
    let mut seen_verified = 0;
    for draw in random_draws(99, 300) {
        let fam = from_progression_free(draw.field.clone(), draw.n, &draw.vectors).unwrap();
        let g = build_g(draw.field.clone(), &draw.sets).unwrap();
        if !verify_condition(&fam, Some(&g)).unwrap().verified {
            continue;
        }
        seen_verified += 1;
        let q = draw.field.q();
        let n_members = BigUint::from(fam.len());
        assert!(n_members <= sumfree_bound(draw.n as u32, q, 3));

        let inst = DifferenceInstance::new(draw.field.clone(), draw.sets.clone()).unwrap();
        let alpha = inst.alpha();
        if alpha < Ratio::new(1, 2) {
            let gamma = compute_gamma(alpha, q, 1e-12).unwrap();
            let ceiling = gamma.value.powi(draw.n as i32);
            assert!(
                fam.len().to_f64().unwrap() <= ceiling,
                "verified family of {} members beats Gamma^n = {ceiling}",
                fam.len()
            );
        }
    }
    assert!(seen_verified > 50, "draw distribution too skewed to test");
}

#[test]
fn extension_field_end_to_end() {
    // GF(9), n = 1, uniform S of the 6 first canonical elements: feasible
    // (threshold is 6), searchable, and power-stable.
    let field = make_field_arc(3, 2).unwrap();
    let s: BTreeSet<Elem> = field.elements().take(6).collect();
    let inst = DifferenceInstance::uniform(field.clone(), 1, s.clone()).unwrap();
    assert!(inst.alpha() < Ratio::new(1, 2));

    let h = build_hypergraph(&inst, DEFAULT_VERTEX_GATE).unwrap();
    let r = max_independent_exact(&h, &SearchOptions::default()).unwrap();
    assert_eq!(r.status, SearchStatus::Exact);
    let gamma = compute_gamma(inst.alpha(), 9, 1e-12).unwrap();
    assert!((r.size as f64) <= gamma.value);
    assert!(check_set(&r.best_set, &inst).unwrap().is_none());

    let fam = from_progression_free(field.clone(), 1, &r.best_set).unwrap();
    let g = build_g(field.clone(), &[s]).unwrap();
    let report = verify_condition(&fam, Some(&g)).unwrap();
    assert!(report.verified);

    let (powered, g_bar) = tensor_power(&fam, &g, 2).unwrap();
    assert_eq!(g_bar.degree(), 2 * g.degree());
    assert!(verify_condition(&powered, Some(&g_bar)).unwrap().verified);
}

#[test]
fn search_sandwich_on_restricted_instances() {
    // Restricted differences with feasible alpha: exact sizes stay under
    // Gamma^n; with full S they also stay under the sum-free ceiling.
    let cases: Vec<(u32, u32, Vec<u32>, u16)> = vec![
        (5, 1, vec![0, 1, 2, 3], 2),
        (5, 1, vec![0, 1, 2, 4], 2),
        (3, 1, vec![0, 1, 2], 3),
        (7, 1, vec![0, 1, 2, 3, 4], 1),
    ];
    for (p, k, s_vals, n) in cases {
        let field = make_field_arc(p, k).unwrap();
        let s: BTreeSet<Elem> = s_vals.iter().map(|&v| field.elem(v).unwrap()).collect();
        let inst = DifferenceInstance::uniform(field.clone(), n, s.clone()).unwrap();
        let h = build_hypergraph(&inst, DEFAULT_VERTEX_GATE).unwrap();
        let r = max_independent_exact(&h, &SearchOptions::default()).unwrap();
        assert_eq!(r.status, SearchStatus::Exact);

        let alpha = inst.alpha();
        assert!(alpha < Ratio::new(1, 2), "case not feasible: {s_vals:?}");
        let gamma = compute_gamma(alpha, field.q(), 1e-12).unwrap();
        assert!((r.size as f64) <= gamma.value.powi(n as i32));
        if s.len() as u32 == field.q() {
            assert!(BigUint::from(r.size) <= sumfree_bound(n as u32, field.q(), 3));
        }
    }
}
