//! Sum-free family candidates: d-tuples (a_{1j},…,a_{dj}) whose cross sums
//! a_{1j_1} + ⋯ + a_{dj_d} vanish (with a nonzero side polynomial) exactly
//! on the diagonal. Includes the standard construction from a
//! progression-free set and the tensor-power amplifier.

use std::collections::HashSet;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{field_for_order, make_field_arc, FieldSpec, Vector};
use crate::poly::ProductForm;

/// Exhaustive verification is limited to this many index tuples.
pub const VERIFY_TUPLE_GATE: u64 = 10_000_000;

/// Tensor powers are limited to this many members.
pub const POWER_MEMBER_GATE: u64 = 1_000_000;

/// An N-indexed sequence of d-tuples of vectors in F_q^n, stored per block.
#[derive(Clone, Debug)]
pub struct Family {
    field: Arc<FieldSpec>,
    d: u16,
    n: u16,
    blocks: Vec<Vec<Vector>>,
}

impl Family {
    pub fn new(field: Arc<FieldSpec>, d: u16, n: u16, blocks: Vec<Vec<Vector>>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidInput(format!(
                "families need at least 2 blocks, got {d}"
            )));
        }
        if blocks.len() != d as usize {
            return Err(Error::InvalidInput(format!(
                "expected {d} blocks, got {}",
                blocks.len()
            )));
        }
        let len = blocks.first().map_or(0, Vec::len);
        if blocks.iter().any(|b| b.len() != len) {
            return Err(Error::InvalidInput("blocks have unequal lengths".into()));
        }
        if blocks.iter().flatten().any(|v| v.len() != n as usize) {
            return Err(Error::InvalidInput(format!(
                "every member vector must have {n} coordinates"
            )));
        }
        Ok(Family {
            field,
            d,
            n,
            blocks,
        })
    }

    pub fn field(&self) -> &Arc<FieldSpec> {
        &self.field
    }

    pub fn d(&self) -> u16 {
        self.d
    }

    pub fn n(&self) -> u16 {
        self.n
    }

    /// Number of members N.
    pub fn len(&self) -> usize {
        self.blocks.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn blocks(&self) -> &[Vec<Vector>] {
        &self.blocks
    }

    pub fn member(&self, j: usize) -> Vec<&Vector> {
        self.blocks.iter().map(|b| &b[j]).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let members: Vec<Vec<String>> = (0..self.len())
            .map(|j| {
                self.blocks
                    .iter()
                    .map(|b| self.field.vector_to_string(&b[j]))
                    .collect()
            })
            .collect();
        serde_json::to_value(FamilyJson {
            q: self.field.q(),
            n: self.n,
            d: self.d,
            members,
        })
        .expect("family serialization cannot fail")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let parsed: FamilyJson = serde_json::from_value(value.clone())
            .map_err(|e| Error::InvalidInput(format!("bad family JSON: {e}")))?;
        let field = field_for_order(parsed.q)?;
        let mut blocks = vec![Vec::with_capacity(parsed.members.len()); parsed.d as usize];
        for (j, member) in parsed.members.iter().enumerate() {
            if member.len() != parsed.d as usize {
                return Err(Error::InvalidInput(format!(
                    "member {j} has {} blocks, expected {}",
                    member.len(),
                    parsed.d
                )));
            }
            for (i, s) in member.iter().enumerate() {
                blocks[i].push(field.parse_vector(s, parsed.n as usize)?);
            }
        }
        Family::new(field, parsed.d, parsed.n, blocks)
    }
}

#[derive(Serialize, Deserialize)]
struct FamilyJson {
    q: u32,
    n: u16,
    d: u16,
    members: Vec<Vec<String>>,
}

/// A plain set of vectors with its field, the input format for building
/// families from progression-free sets.
#[derive(Clone, Debug)]
pub struct VectorSet {
    pub field: Arc<FieldSpec>,
    pub n: u16,
    pub vectors: Vec<Vector>,
}

#[derive(Serialize, Deserialize)]
struct VectorSetJson {
    p: u32,
    k: u32,
    n: u16,
    vectors: Vec<String>,
}

impl VectorSet {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(VectorSetJson {
            p: self.field.p(),
            k: self.field.k(),
            n: self.n,
            vectors: self
                .vectors
                .iter()
                .map(|v| self.field.vector_to_string(v))
                .collect(),
        })
        .expect("vector set serialization cannot fail")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let parsed: VectorSetJson = serde_json::from_value(value.clone())
            .map_err(|e| Error::InvalidInput(format!("bad vector set JSON: {e}")))?;
        let field = make_field_arc(parsed.p, parsed.k)?;
        let vectors = parsed
            .vectors
            .iter()
            .map(|s| field.parse_vector(s, parsed.n as usize))
            .collect::<Result<_>>()?;
        Ok(VectorSet {
            field,
            n: parsed.n,
            vectors,
        })
    }
}

/// The d = 3 family with a_{1j} = a_{3j} = a_j and a_{2j} = −2a_j; the
/// diagonal sums a_j − 2a_j + a_j vanish by construction.
pub fn from_progression_free(field: Arc<FieldSpec>, n: u16, vectors: &[Vector]) -> Result<Family> {
    let mut seen = HashSet::new();
    for v in vectors {
        if v.len() != n as usize {
            return Err(Error::InvalidInput(format!(
                "vector has {} coordinates, expected {n}",
                v.len()
            )));
        }
        if !seen.insert(v.clone()) {
            return Err(Error::InvalidInput(format!(
                "duplicate vector {}",
                field.vector_to_string(v)
            )));
        }
    }
    let minus_two = field.neg(field.from_int(2));
    let a1 = vectors.to_vec();
    let a2: Vec<Vector> = vectors
        .iter()
        .map(|v| field.vec_scale(minus_two, v))
        .collect();
    let a3 = vectors.to_vec();
    Family::new(field, 3, n, vec![a1, a2, a3])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationClause {
    /// A diagonal tuple whose cross sum is nonzero.
    DiagonalSumNonzero,
    /// A diagonal tuple on which the side polynomial vanishes.
    DiagonalPolyZero,
    /// An off-diagonal tuple with zero sum and nonzero side polynomial.
    OffDiagonalSolution,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    /// 0-based member indices (j_1, …, j_d).
    pub member_indices: Vec<u64>,
    pub clause: ViolationClause,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VerifyMode {
    Exhaustive,
    Sampled { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    /// True only after an exhaustive pass with no violation; sampling never
    /// certifies.
    pub verified: bool,
    pub mode: VerifyMode,
    pub tuples_checked: u64,
    pub violation: Option<Violation>,
}

fn decode_tuple(mut flat: u64, len: usize, base: u64) -> Vec<u64> {
    let mut js = vec![0u64; len];
    for slot in js.iter_mut().rev() {
        *slot = flat % base;
        flat /= base;
    }
    js
}

/// Checks one index tuple; `g = None` means the constant 1.
fn check_tuple(fam: &Family, g: Option<&ProductForm>, js: &[u64]) -> Option<ViolationClause> {
    let field = fam.field();
    let n = fam.n as usize;
    let diagonal = js.windows(2).all(|w| w[0] == w[1]);
    let mut sum_zero = true;
    for coord in 0..n {
        let mut acc = field.zero();
        for (i, &j) in js.iter().enumerate() {
            acc = field.add(acc, fam.blocks[i][j as usize].get(coord));
        }
        if !acc.is_zero() {
            sum_zero = false;
            break;
        }
    }
    if diagonal && !sum_zero {
        return Some(ViolationClause::DiagonalSumNonzero);
    }
    // g only matters on the diagonal and on off-diagonal zero-sum tuples.
    if diagonal || sum_zero {
        let point: Vec<&Vector> = js
            .iter()
            .enumerate()
            .map(|(i, &j)| &fam.blocks[i][j as usize])
            .collect();
        let g_nonzero = match g {
            Some(g) => !g.evaluate(&point).is_zero(),
            None => true,
        };
        if diagonal && !g_nonzero {
            return Some(ViolationClause::DiagonalPolyZero);
        }
        if !diagonal && g_nonzero {
            return Some(ViolationClause::OffDiagonalSolution);
        }
    }
    None
}

/// Exhaustively checks both directions of the diagonal-solution condition
/// over all N^d index tuples: every diagonal tuple must be a solution
/// (zero sum, g ≠ 0) and no off-diagonal tuple may be one. The reported
/// violation is the lexicographically least regardless of parallel
/// schedule.
pub fn verify_condition(fam: &Family, g: Option<&ProductForm>) -> Result<VerifyReport> {
    if let Some(g) = g {
        check_poly_compat(fam, g)?;
    }
    let n_members = fam.len() as u64;
    let total = n_members
        .checked_pow(fam.d as u32)
        .filter(|&t| t <= VERIFY_TUPLE_GATE)
        .ok_or(Error::TooLarge {
            what: "index tuples N^d",
            size: (fam.len() as u128).saturating_pow(fam.d as u32),
            gate: VERIFY_TUPLE_GATE as u128,
        })?;

    let first = (0..total)
        .into_par_iter()
        .filter_map(|flat| {
            let js = decode_tuple(flat, fam.d as usize, n_members);
            check_tuple(fam, g, &js).map(|clause| (flat, clause))
        })
        .min_by_key(|&(flat, _)| flat);

    Ok(match first {
        None => VerifyReport {
            verified: true,
            mode: VerifyMode::Exhaustive,
            tuples_checked: total,
            violation: None,
        },
        Some((flat, clause)) => VerifyReport {
            verified: false,
            mode: VerifyMode::Exhaustive,
            tuples_checked: total,
            violation: Some(Violation {
                member_indices: decode_tuple(flat, fam.d as usize, n_members),
                clause,
            }),
        },
    })
}

/// Random-tuple spot check for families beyond the exhaustive gate. Never
/// sets `verified`; a clean run only means no violation was found among the
/// samples.
pub fn verify_condition_sampled(
    fam: &Family,
    g: Option<&ProductForm>,
    samples: u64,
    seed: u64,
) -> Result<VerifyReport> {
    if let Some(g) = g {
        check_poly_compat(fam, g)?;
    }
    let n_members = fam.len() as u64;
    if n_members == 0 {
        return Err(Error::InvalidInput(
            "cannot sample from an empty family".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violation = None;
    for _ in 0..samples {
        let js: Vec<u64> = (0..fam.d).map(|_| rng.random_range(0..n_members)).collect();
        if let Some(clause) = check_tuple(fam, g, &js) {
            violation = Some(Violation {
                member_indices: js,
                clause,
            });
            break;
        }
    }
    Ok(VerifyReport {
        verified: false,
        mode: VerifyMode::Sampled { samples, seed },
        tuples_checked: samples,
        violation,
    })
}

fn check_poly_compat(fam: &Family, g: &ProductForm) -> Result<()> {
    if g.dims() != (fam.d, fam.n) || **g.field() != **fam.field() {
        return Err(Error::InvalidInput(format!(
            "polynomial dims {:?} do not match family dims ({}, {})",
            g.dims(),
            fam.d,
            fam.n
        )));
    }
    Ok(())
}

/// The k-th tensor power: the N^k-member family over F_q^{nk} formed by
/// concatenating all k-tuples of members (lexicographic in the index
/// vector), together with ḡ = Π_h g applied to the h-th coordinate slab.
/// deg ḡ = k·deg g.
pub fn tensor_power(fam: &Family, g: &ProductForm, k: u32) -> Result<(Family, ProductForm)> {
    if k < 1 {
        return Err(Error::InvalidInput("power k must be at least 1".into()));
    }
    check_poly_compat(fam, g)?;
    let n_members = fam.len() as u64;
    let new_len = n_members
        .checked_pow(k)
        .filter(|&t| t <= POWER_MEMBER_GATE)
        .ok_or(Error::TooLarge {
            what: "power family members N^k",
            size: (fam.len() as u128).saturating_pow(k),
            gate: POWER_MEMBER_GATE as u128,
        })?;
    let new_n = fam
        .n
        .checked_mul(k as u16)
        .ok_or_else(|| Error::InvalidInput("nk overflows coordinate index".into()))?;

    let mut blocks: Vec<Vec<Vector>> = vec![Vec::with_capacity(new_len as usize); fam.d as usize];
    for flat in 0..new_len {
        let js = decode_tuple(flat, k as usize, n_members);
        for (i, block) in blocks.iter_mut().enumerate() {
            let mut entries = Vec::with_capacity(new_n as usize);
            for &j in &js {
                entries.extend_from_slice(fam.blocks[i][j as usize].entries());
            }
            block.push(Vector::new(entries));
        }
    }
    let family = Family::new(fam.field().clone(), fam.d, new_n, blocks)?;

    let mut g_bar = ProductForm::one(fam.field().clone(), fam.d, new_n);
    for h in 0..k as u16 {
        let shifted = g.with_shifted_coords(new_n, h * fam.n);
        for factor in shifted.factors() {
            g_bar.push_factor(factor.clone());
        }
    }
    debug_assert_eq!(g_bar.degree(), k * g.degree());
    Ok((family, g_bar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::{make_field_arc, Elem};
    use crate::poly::build_g;
    use std::collections::BTreeSet;

    fn f3() -> Arc<FieldSpec> {
        make_field_arc(3, 1).unwrap()
    }

    fn vset(field: &FieldSpec, vals: &[u32]) -> Vec<Vector> {
        vals.iter()
            .map(|&v| Vector::new(vec![field.elem(v).unwrap()]))
            .collect()
    }

    fn set_of(field: &FieldSpec, vals: &[u32]) -> BTreeSet<Elem> {
        vals.iter().map(|&v| field.elem(v).unwrap()).collect()
    }

    #[test]
    fn progression_free_construction() {
        let field = f3();
        let fam = from_progression_free(field.clone(), 1, &vset(&field, &[0, 1])).unwrap();
        assert_eq!(fam.len(), 2);
        // a_2j = −2a_j: −2·0 = 0, −2·1 = 1 in GF(3).
        assert_eq!(fam.blocks()[1][0], field.vec_zero(1));
        assert_eq!(
            fam.blocks()[1][1],
            Vector::new(vec![field.elem(1).unwrap()])
        );
        // Diagonal sums vanish.
        for j in 0..fam.len() {
            let sum = fam
                .member(j)
                .iter()
                .fold(field.vec_zero(1), |acc, v| field.vec_add(&acc, v));
            assert!(field.vec_is_zero(&sum));
        }
    }

    #[test]
    fn duplicates_rejected() {
        let field = f3();
        let err = from_progression_free(field.clone(), 1, &vset(&field, &[1, 1]));
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn verified_family_from_clean_set() {
        let field = f3();
        // {0,1} has no 3-AP with difference in {1}, so the family verifies
        // against g for S = {0,1}.
        let fam = from_progression_free(field.clone(), 1, &vset(&field, &[0, 1])).unwrap();
        let g = build_g(field.clone(), &[set_of(&field, &[0, 1])]).unwrap();
        let report = verify_condition(&fam, Some(&g)).unwrap();
        assert!(report.verified, "{:?}", report.violation);
        assert_eq!(report.tuples_checked, 8);
    }

    #[test]
    fn single_member_family_verifies() {
        let field = f3();
        let fam = from_progression_free(field.clone(), 1, &vset(&field, &[2])).unwrap();
        let report = verify_condition(&fam, None).unwrap();
        assert!(report.verified);
    }

    #[test]
    fn empty_family_verifies_vacuously() {
        let field = f3();
        let fam = from_progression_free(field.clone(), 1, &[]).unwrap();
        let report = verify_condition(&fam, None).unwrap();
        assert!(report.verified);
        assert_eq!(report.tuples_checked, 0);
    }

    #[test]
    fn three_ap_produces_off_diagonal_witness() {
        let field = f3();
        // {0,1,2} is a full line; with S = F_3 the condition must fail.
        let fam = from_progression_free(field.clone(), 1, &vset(&field, &[0, 1, 2])).unwrap();
        let report = verify_condition(&fam, None).unwrap();
        assert!(!report.verified);
        let v = report.violation.unwrap();
        assert_eq!(v.clause, ViolationClause::OffDiagonalSolution);
        let js = &v.member_indices;
        assert!(!js.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn diagonal_clauses_detected() {
        let field = f3();
        let one = || Vector::new(vec![field.elem(1).unwrap()]);
        let zero = || field.vec_zero(1);
        // Hand-built family whose single diagonal tuple sums to 1 ≠ 0.
        let bad_sum = Family::new(
            field.clone(),
            3,
            1,
            vec![vec![zero()], vec![zero()], vec![one()]],
        )
        .unwrap();
        let report = verify_condition(&bad_sum, None).unwrap();
        assert_eq!(
            report.violation.unwrap().clause,
            ViolationClause::DiagonalSumNonzero
        );

        // Sum is 0 + 2 + 1 = 0 but (x_3 − x_1)/2 = 2 ∉ {0,1}, so g vanishes
        // on the diagonal.
        let two = || Vector::new(vec![field.elem(2).unwrap()]);
        let bad_g = Family::new(
            field.clone(),
            3,
            1,
            vec![vec![zero()], vec![two()], vec![one()]],
        )
        .unwrap();
        let g = build_g(field.clone(), &[set_of(&field, &[0, 1])]).unwrap();
        let report = verify_condition(&bad_g, Some(&g)).unwrap();
        assert_eq!(
            report.violation.unwrap().clause,
            ViolationClause::DiagonalPolyZero
        );
    }

    #[test]
    fn verification_gate() {
        let field = f3();
        let v = Vector::new(vec![field.elem(1).unwrap()]);
        let block = vec![v; 300];
        let fam = Family::new(field, 3, 1, vec![block.clone(), block.clone(), block]).unwrap();
        assert!(matches!(
            verify_condition(&fam, None),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn sampling_never_certifies_but_finds_violations() {
        let field = f3();
        let fam = from_progression_free(field.clone(), 1, &vset(&field, &[0, 1, 2])).unwrap();
        let report = verify_condition_sampled(&fam, None, 500, 42).unwrap();
        assert!(!report.verified);
        assert!(report.violation.is_some());

        let clean = from_progression_free(field.clone(), 1, &vset(&field, &[0, 1])).unwrap();
        let report = verify_condition_sampled(&clean, None, 100, 7).unwrap();
        assert!(!report.verified);
        assert!(report.violation.is_none());
    }

    #[test]
    fn tensor_power_shapes_and_order() {
        let field = f3();
        let fam = from_progression_free(field.clone(), 1, &vset(&field, &[0, 1])).unwrap();
        let g = build_g(field.clone(), &[set_of(&field, &[0, 1])]).unwrap();

        let (p1, g1) = tensor_power(&fam, &g, 1).unwrap();
        assert_eq!(p1.len(), 2);
        assert_eq!(p1.n(), 1);
        assert_eq!(g1.degree(), g.degree());
        assert_eq!(p1.blocks(), fam.blocks());

        let (p2, g2) = tensor_power(&fam, &g, 2).unwrap();
        assert_eq!(p2.len(), 4);
        assert_eq!(p2.n(), 2);
        assert_eq!(g2.degree(), 2 * g.degree());
        // Member (j_1, j_2) = (0, 1) sits at flat index 0·2 + 1 = 1.
        let expect = Vector::new(vec![field.elem(0).unwrap(), field.elem(1).unwrap()]);
        assert_eq!(p2.blocks()[0][1], expect);

        // A verified base stays verified after powering.
        assert!(verify_condition(&p2, Some(&g2)).unwrap().verified);
        // A violating base yields a violating power.
        let bad = from_progression_free(field.clone(), 1, &vset(&field, &[0, 1, 2])).unwrap();
        let full_g = ProductForm::one(field.clone(), 3, 1);
        let (bad2, bad_g2) = tensor_power(&bad, &full_g, 2).unwrap();
        assert!(!verify_condition(&bad2, Some(&bad_g2)).unwrap().verified);
    }

    #[test]
    fn family_json_roundtrip() {
        let field = make_field_arc(3, 2).unwrap();
        let vs: Vec<Vector> = vec![
            Vector::new(vec![field.elem(0).unwrap(), field.elem(7).unwrap()]),
            Vector::new(vec![field.elem(4).unwrap(), field.elem(1).unwrap()]),
        ];
        let fam = from_progression_free(field.clone(), 2, &vs).unwrap();
        let json = fam.to_json();
        assert_eq!(json["q"], 9);
        let back = Family::from_json(&json).unwrap();
        assert_eq!(back.blocks(), fam.blocks());
    }

    #[test]
    fn vector_set_json_roundtrip() {
        let field = f3();
        let set = VectorSet {
            field: field.clone(),
            n: 2,
            vectors: vec![
                field.parse_vector("0,1", 2).unwrap(),
                field.parse_vector("2,2", 2).unwrap(),
            ],
        };
        let back = VectorSet::from_json(&set.to_json()).unwrap();
        assert_eq!(back.vectors, set.vectors);
        assert_eq!(back.n, 2);
    }
}
