//! Sparse multivariate polynomials over GF(q) in d·n variables x_{iℓ},
//! the indicator products f and g, the exponent-reduction rule that caps
//! per-variable degrees at q−1, and the monomial block-degree split that
//! witnesses slice-rank upper bounds.
//!
//! f and g are kept in product form: their expansions grow exponentially
//! while evaluation is linear in the number of factors, so expansion is
//! gated behind an explicit term budget.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::counting::count_m;
use crate::error::{Error, Result};
use crate::gf::{field_for_order, Elem, FieldSpec, Vector};

/// A variable x_{iℓ}: 1-based block i ∈ [d] and coordinate ℓ ∈ [n].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct VarIndex {
    pub block: u16,
    pub coord: u16,
}

impl VarIndex {
    pub fn new(block: u16, coord: u16) -> Self {
        VarIndex { block, coord }
    }
}

/// Sparse exponent vector of a monomial: sorted (variable, exponent) pairs
/// with all exponents positive.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Exponents(Vec<(VarIndex, u32)>);

impl Exponents {
    pub fn unit() -> Self {
        Exponents(Vec::new())
    }

    pub fn single(var: VarIndex, exp: u32) -> Self {
        Self::from_pairs([(var, exp)])
    }

    /// Merges duplicate variables and drops zero exponents.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (VarIndex, u32)>) -> Self {
        let mut map: BTreeMap<VarIndex, u32> = BTreeMap::new();
        for (v, e) in pairs {
            if e > 0 {
                *map.entry(v).or_insert(0) += e;
            }
        }
        Exponents(map.into_iter().filter(|&(_, e)| e > 0).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarIndex, u32)> + '_ {
        self.0.iter().copied()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn block_degree(&self, block: u16) -> u32 {
        self.0
            .iter()
            .filter(|&&(v, _)| v.block == block)
            .map(|&(_, e)| e)
            .sum()
    }

    pub fn max_exponent(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).max().unwrap_or(0)
    }

    /// Product of monomials: exponent-wise sum.
    pub fn mul(&self, other: &Self) -> Self {
        Self::from_pairs(self.iter().chain(other.iter()))
    }
}

impl Ord for Exponents {
    /// Graded lexicographic on (block, coord): total degree first, then the
    /// monomial with the larger exponent on the earliest differing variable
    /// is the larger.
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| {
                let mut a = self.0.iter();
                let mut b = other.0.iter();
                loop {
                    match (a.next(), b.next()) {
                        (None, None) => return Ordering::Equal,
                        (Some(_), None) => return Ordering::Greater,
                        (None, Some(_)) => return Ordering::Less,
                        (Some(&(va, ea)), Some(&(vb, eb))) => {
                            if va != vb {
                                // The earlier variable has a positive
                                // exponent on one side and zero on the other.
                                return if va < vb {
                                    Ordering::Greater
                                } else {
                                    Ordering::Less
                                };
                            }
                            if ea != eb {
                                return ea.cmp(&eb);
                            }
                        }
                    }
                }
            })
    }
}

impl PartialOrd for Exponents {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One term of a polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub exponents: Exponents,
    pub coefficient: Elem,
}

/// A canonical sparse polynomial in d·n variables over GF(q).
#[derive(Clone, Debug)]
pub struct SparsePolynomial {
    field: Arc<FieldSpec>,
    d: u16,
    n: u16,
    terms: BTreeMap<Exponents, Elem>,
}

impl PartialEq for SparsePolynomial {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d
            && self.n == other.n
            && *self.field == *other.field
            && self.terms == other.terms
    }
}

impl SparsePolynomial {
    pub fn zero(field: Arc<FieldSpec>, d: u16, n: u16) -> Self {
        SparsePolynomial {
            field,
            d,
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(field: Arc<FieldSpec>, d: u16, n: u16, c: Elem) -> Self {
        let mut p = Self::zero(field, d, n);
        p.add_term(Exponents::unit(), c);
        p
    }

    /// The variable x_{iℓ} as a polynomial.
    pub fn variable(field: Arc<FieldSpec>, d: u16, n: u16, var: VarIndex) -> Self {
        let one = field.one();
        let mut p = Self::zero(field, d, n);
        p.add_term(Exponents::single(var, 1), one);
        p
    }

    pub fn field(&self) -> &Arc<FieldSpec> {
        &self.field
    }

    pub fn dims(&self) -> (u16, u16) {
        (self.d, self.n)
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = Monomial> + '_ {
        self.terms.iter().map(|(e, &c)| Monomial {
            exponents: e.clone(),
            coefficient: c,
        })
    }

    /// Adds `coeff·x^exps`, merging and dropping the term if it cancels.
    pub fn add_term(&mut self, exps: Exponents, coeff: Elem) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(exps);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let merged = self.field.add(*o.get(), coeff);
                if merged.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = merged;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dims(), other.dims());
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            out.add_term(e.clone(), c);
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = Self::zero(self.field.clone(), self.d, self.n);
        for (e, &c) in &self.terms {
            out.add_term(e.clone(), self.field.neg(c));
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dims(), other.dims());
        let mut out = Self::zero(self.field.clone(), self.d, self.n);
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &other.terms {
                out.add_term(ea.mul(eb), self.field.mul(ca, cb));
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::constant(self.field.clone(), self.d, self.n, self.field.one());
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Degree of the polynomial; 0 for the zero polynomial.
    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(Exponents::total_degree)
            .max()
            .unwrap_or(0)
    }

    pub fn max_var_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(Exponents::max_exponent)
            .max()
            .unwrap_or(0)
    }

    /// Caps every exponent m ≥ q at its value under x^q = x: the remainder
    /// of m mod (q−1), except multiples of q−1 map to q−1. Exponents below
    /// q are untouched; like terms merge and cancellations drop.
    pub fn reduce_exponents(&self) -> Self {
        let q = self.field.q();
        let mut out = Self::zero(self.field.clone(), self.d, self.n);
        for (exps, &coeff) in &self.terms {
            let reduced = Exponents::from_pairs(exps.iter().map(|(v, e)| {
                let e2 = if e >= q {
                    let r = e % (q - 1);
                    if r == 0 {
                        q - 1
                    } else {
                        r
                    }
                } else {
                    e
                };
                (v, e2)
            }));
            out.add_term(reduced, coeff);
        }
        out
    }

    pub fn evaluate(&self, point: &[&Vector]) -> Elem {
        debug_assert_eq!(point.len(), self.d as usize);
        let f = &self.field;
        let mut acc = f.zero();
        for (exps, &coeff) in &self.terms {
            let mut term = coeff;
            for (v, e) in exps.iter() {
                let x = point[v.block as usize - 1].get(v.coord as usize - 1);
                term = f.mul(term, f.pow(x, e as u64));
                if term.is_zero() {
                    break;
                }
            }
            acc = f.add(acc, term);
        }
        acc
    }

    fn map_coords(&self, new_n: u16, offset: u16) -> Self {
        let mut out = Self::zero(self.field.clone(), self.d, new_n);
        for (exps, &coeff) in &self.terms {
            let shifted = Exponents::from_pairs(
                exps.iter()
                    .map(|(v, e)| (VarIndex::new(v.block, v.coord + offset), e)),
            );
            out.add_term(shifted, coeff);
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let terms: Vec<TermJson> = self
            .terms
            .iter()
            .map(|(e, &c)| TermJson {
                exps: e
                    .iter()
                    .map(|(v, exp)| [v.block as u32, v.coord as u32, exp])
                    .collect(),
                coeff: self.field.elem_to_string(c),
            })
            .collect();
        serde_json::to_value(PolyJson {
            dims: [self.d, self.n],
            q: self.field.q(),
            terms,
        })
        .expect("polynomial serialization cannot fail")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let parsed: PolyJson = serde_json::from_value(value.clone())
            .map_err(|e| Error::InvalidInput(format!("bad polynomial JSON: {e}")))?;
        let field = field_for_order(parsed.q)?;
        let [d, n] = parsed.dims;
        let mut poly = Self::zero(field.clone(), d, n);
        for term in parsed.terms {
            let coeff = field.parse_elem(&term.coeff)?;
            let pairs: Vec<(VarIndex, u32)> = term
                .exps
                .iter()
                .map(|&[b, c, e]| {
                    if b == 0 || b > d as u32 || c == 0 || c > n as u32 {
                        Err(Error::InvalidInput(format!(
                            "variable ({b},{c}) out of range for dims ({d},{n})"
                        )))
                    } else {
                        Ok((VarIndex::new(b as u16, c as u16), e))
                    }
                })
                .collect::<Result<_>>()?;
            poly.add_term(Exponents::from_pairs(pairs), coeff);
        }
        Ok(poly)
    }
}

#[derive(Serialize, Deserialize)]
struct PolyJson {
    dims: [u16; 2],
    q: u32,
    terms: Vec<TermJson>,
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    exps: Vec<[u32; 3]>,
    coeff: String,
}

/// A product of low-degree polynomials, multiplied out only on demand.
#[derive(Clone, Debug)]
pub struct ProductForm {
    field: Arc<FieldSpec>,
    d: u16,
    n: u16,
    factors: Vec<SparsePolynomial>,
}

impl ProductForm {
    /// The empty product, identically 1.
    pub fn one(field: Arc<FieldSpec>, d: u16, n: u16) -> Self {
        ProductForm {
            field,
            d,
            n,
            factors: Vec::new(),
        }
    }

    pub fn from_factors(
        field: Arc<FieldSpec>,
        d: u16,
        n: u16,
        factors: Vec<SparsePolynomial>,
    ) -> Self {
        debug_assert!(factors.iter().all(|f| f.dims() == (d, n)));
        ProductForm {
            field,
            d,
            n,
            factors,
        }
    }

    pub fn field(&self) -> &Arc<FieldSpec> {
        &self.field
    }

    pub fn dims(&self) -> (u16, u16) {
        (self.d, self.n)
    }

    pub fn factors(&self) -> &[SparsePolynomial] {
        &self.factors
    }

    pub fn push_factor(&mut self, f: SparsePolynomial) {
        debug_assert_eq!(f.dims(), (self.d, self.n));
        self.factors.push(f);
    }

    /// Concatenation of products over the same dimensions.
    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dims(), other.dims());
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        ProductForm {
            field: self.field.clone(),
            d: self.d,
            n: self.n,
            factors,
        }
    }

    pub fn degree(&self) -> u32 {
        self.factors
            .iter()
            .map(SparsePolynomial::total_degree)
            .sum()
    }

    pub fn evaluate(&self, point: &[&Vector]) -> Elem {
        let f = &self.field;
        let mut acc = f.one();
        for factor in &self.factors {
            acc = f.mul(acc, factor.evaluate(point));
            if acc.is_zero() {
                break;
            }
        }
        acc
    }

    /// Multiplies the product out into canonical form. The estimated term
    /// count (product of factor term counts) must stay within `budget`,
    /// as must every intermediate result.
    pub fn expand(&self, budget: u64) -> Result<SparsePolynomial> {
        let estimate: u128 = self
            .factors
            .iter()
            .map(|f| f.term_count() as u128)
            .fold(1u128, |a, b| a.saturating_mul(b));
        if estimate > budget as u128 {
            return Err(Error::BudgetExceeded { estimate, budget });
        }
        let mut acc =
            SparsePolynomial::constant(self.field.clone(), self.d, self.n, self.field.one());
        for factor in &self.factors {
            acc = acc.mul(factor);
            if acc.term_count() as u128 > budget as u128 {
                return Err(Error::BudgetExceeded {
                    estimate: acc.term_count() as u128,
                    budget,
                });
            }
        }
        Ok(acc)
    }

    /// The same product acting on coordinates ℓ+offset of a wider ambient
    /// space F_q^new_n; used to build tensor-power polynomials.
    pub fn with_shifted_coords(&self, new_n: u16, offset: u16) -> Self {
        debug_assert!(offset + self.n <= new_n);
        ProductForm {
            field: self.field.clone(),
            d: self.d,
            n: new_n,
            factors: self
                .factors
                .iter()
                .map(|f| f.map_coords(new_n, offset))
                .collect(),
        }
    }
}

/// Anything that can be evaluated at a d-tuple of vectors; implemented by
/// both polynomial representations so tensors can be built from either.
pub trait PolyEval {
    fn eval_point(&self, point: &[&Vector]) -> Elem;
    fn eval_dims(&self) -> (u16, u16);
    fn eval_field(&self) -> &Arc<FieldSpec>;
}

impl PolyEval for SparsePolynomial {
    fn eval_point(&self, point: &[&Vector]) -> Elem {
        self.evaluate(point)
    }
    fn eval_dims(&self) -> (u16, u16) {
        self.dims()
    }
    fn eval_field(&self) -> &Arc<FieldSpec> {
        self.field()
    }
}

impl PolyEval for ProductForm {
    fn eval_point(&self, point: &[&Vector]) -> Elem {
        self.evaluate(point)
    }
    fn eval_dims(&self) -> (u16, u16) {
        self.dims()
    }
    fn eval_field(&self) -> &Arc<FieldSpec> {
        self.field()
    }
}

/// f(x_1,…,x_d) = Π_ℓ (1 − (x_{1ℓ} + ⋯ + x_{dℓ})^{q−1}): the indicator of
/// x_1 + ⋯ + x_d = 0, one degree-(q−1) factor per coordinate.
pub fn build_f(field: Arc<FieldSpec>, n: u16, d: u16) -> ProductForm {
    debug_assert!(n >= 1 && d >= 2);
    let q = field.q();
    let one = field.one();
    let mut factors = Vec::with_capacity(n as usize);
    for coord in 1..=n {
        let mut linear = SparsePolynomial::zero(field.clone(), d, n);
        for block in 1..=d {
            linear.add_term(Exponents::single(VarIndex::new(block, coord), 1), one);
        }
        let factor = SparsePolynomial::constant(field.clone(), d, n, one).sub(&linear.pow(q - 1));
        factors.push(factor);
    }
    ProductForm::from_factors(field, d, n, factors)
}

/// g(x_1,x_2,x_3) = Π_ℓ Π_{t ∉ S_ℓ} ((x_{3ℓ} − x_{1ℓ})/2 − t): nonzero
/// exactly when (x_3 − x_1)/2 lies in S_1 × ⋯ × S_n coordinatewise.
/// Each S_ℓ must contain 0; the degree is Σ_ℓ (q − |S_ℓ|) = μn.
pub fn build_g(field: Arc<FieldSpec>, sets: &[BTreeSet<Elem>]) -> Result<ProductForm> {
    let d = 3u16;
    let n = sets.len() as u16;
    let zero = field.zero();
    for (i, s) in sets.iter().enumerate() {
        if !s.contains(&zero) {
            return Err(Error::InvalidInstance(format!(
                "difference set S_{} does not contain 0",
                i + 1
            )));
        }
    }
    let inv2 = field.inv(field.from_int(2))?;
    let mut factors = Vec::new();
    for (i, s) in sets.iter().enumerate() {
        let coord = (i + 1) as u16;
        for t in field.elements().filter(|t| !s.contains(t)) {
            let mut factor = SparsePolynomial::zero(field.clone(), d, n);
            factor.add_term(Exponents::single(VarIndex::new(3, coord), 1), inv2);
            factor.add_term(
                Exponents::single(VarIndex::new(1, coord), 1),
                field.neg(inv2),
            );
            factor.add_term(Exponents::unit(), field.neg(t));
            factors.push(factor);
        }
    }
    Ok(ProductForm::from_factors(field, d, n, factors))
}

/// Outcome of the monomial block-degree split: every monomial is assigned
/// to a block minimizing its degree in that block's variables (ties to the
/// lowest block), so each group factors as (monomial in x_i) · rest — a
/// valid slice decomposition whose size bounds the slice rank.
#[derive(Clone, Debug)]
pub struct SliceRankWitness {
    pub d: u16,
    pub n: u16,
    /// D = deg P.
    pub degree: u32,
    /// Per block, the distinct exponent patterns (dense length-n vectors)
    /// occurring among monomials assigned to that block.
    pub patterns: Vec<BTreeSet<Vec<u32>>>,
    /// Monomial → assigned block (1-based).
    pub assignment: BTreeMap<Exponents, u16>,
    /// Σ_i |patterns_i|, the witnessed slice-rank upper bound.
    pub total: u64,
    /// d·M(n, ⌊D/d⌋, q−1), the counting ceiling the witness never exceeds.
    pub bound: BigUint,
}

pub fn slice_rank_upper_bound(p: &SparsePolynomial) -> Result<SliceRankWitness> {
    let (d, n) = p.dims();
    let q = p.field().q();
    if p.max_var_degree() > q - 1 {
        return Err(Error::Precondition(format!(
            "per-variable degree {} reaches q = {q}; reduce exponents first",
            p.max_var_degree()
        )));
    }
    let degree = p.total_degree();
    let mut patterns: Vec<BTreeSet<Vec<u32>>> = vec![BTreeSet::new(); d as usize];
    let mut assignment = BTreeMap::new();
    for mono in p.terms() {
        let (best_block, best_deg) = (1..=d)
            .map(|b| (b, mono.exponents.block_degree(b)))
            .min_by_key(|&(b, deg)| (deg, b))
            .expect("d >= 1");
        // Pigeonhole: the minimal block degree is at most D/d.
        debug_assert!(best_deg as u64 * d as u64 <= degree as u64);
        let mut pattern = vec![0u32; n as usize];
        for (v, e) in mono.exponents.iter() {
            if v.block == best_block {
                pattern[v.coord as usize - 1] = e;
            }
        }
        patterns[best_block as usize - 1].insert(pattern);
        assignment.insert(mono.exponents, best_block);
    }
    let total = patterns.iter().map(|s| s.len() as u64).sum();
    let bound = BigUint::from(d) * count_m(n as u32, Ratio::new(degree as i64, d as i64), q - 1);
    Ok(SliceRankWitness {
        d,
        n,
        degree,
        patterns,
        assignment,
        total,
        bound,
    })
}
