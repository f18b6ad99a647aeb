//! Exact arithmetic in GF(q) for odd prime powers q = p^k.
//!
//! Elements are stored as canonical indices into the field's enumeration,
//! which orders elements lexicographically by their polynomial-basis
//! coefficient list (low degree first, zero first). The index of an element
//! is the base-p reading of its coefficient digits, so the canonical text
//! form of an element is literally its digit string for p ≤ 10.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Largest q for which dense q×q add/mul tables are precomputed.
const TABLE_GATE: u32 = 256;

/// Largest q accepted at construction; keeps every element index in a u16
/// and full enumeration cheap.
pub const MAX_Q: u32 = 65535;

/// An element of GF(q), as a canonical index in `0..q`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Elem(u16);

impl Elem {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

/// Arithmetic context for GF(p^k), immutable after construction.
pub struct FieldSpec {
    p: u32,
    k: u32,
    q: u32,
    /// Monic modulus of degree k, coefficient list low-degree-first
    /// (length k+1). For k = 1 this is the placeholder `x`.
    modulus: Vec<u32>,
    neg_tab: Vec<u16>,
    inv_tab: Vec<u16>,
    add_tab: Option<Vec<u16>>,
    mul_tab: Option<Vec<u16>>,
}

impl fmt::Debug for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSpec")
            .field("p", &self.p)
            .field("k", &self.k)
            .field("q", &self.q)
            .field("modulus", &self.modulus)
            .finish()
    }
}

impl PartialEq for FieldSpec {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.k == other.k && self.modulus == other.modulus
    }
}

impl Eq for FieldSpec {}

pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u32;
    while (d as u64) * (d as u64) <= n as u64 {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Writes q as p^k with p prime, if possible.
pub fn factor_prime_power(q: u32) -> Option<(u32, u32)> {
    if q < 2 {
        return None;
    }
    let mut p = 2;
    while (p as u64) * (p as u64) <= q as u64 {
        if q.is_multiple_of(p) {
            let mut rest = q;
            let mut k = 0;
            while rest.is_multiple_of(p) {
                rest /= p;
                k += 1;
            }
            return if rest == 1 { Some((p, k)) } else { None };
        }
        p += 1;
    }
    Some((q, 1))
}

/// Builds GF(p^k) with the lexicographically least monic irreducible modulus
/// (coefficients compared low-degree-first). Rejects even or composite p.
pub fn make_field(p: u32, k: u32) -> Result<FieldSpec> {
    if p < 3 || p.is_multiple_of(2) || !is_prime(p) {
        return Err(Error::InvalidField(format!(
            "p must be an odd prime, got {p}"
        )));
    }
    if k < 1 {
        return Err(Error::InvalidField("k must be positive".into()));
    }
    let q = p
        .checked_pow(k)
        .filter(|&q| q <= MAX_Q)
        .ok_or_else(|| Error::InvalidField(format!("q = {p}^{k} exceeds {MAX_Q}")))?;

    let modulus = if k == 1 {
        vec![0, 1]
    } else {
        find_irreducible(p, k)
            .ok_or_else(|| Error::Internal(format!("no irreducible of degree {k} over Z_{p}")))?
    };

    let mut spec = FieldSpec {
        p,
        k,
        q,
        modulus,
        neg_tab: Vec::new(),
        inv_tab: Vec::new(),
        add_tab: None,
        mul_tab: None,
    };
    spec.build_tables();
    Ok(spec)
}

/// `make_field` wrapped in an `Arc`, the form the rest of the crate shares.
pub fn make_field_arc(p: u32, k: u32) -> Result<Arc<FieldSpec>> {
    make_field(p, k).map(Arc::new)
}

/// Field for a given prime power q, e.g. from JSON files that carry q only.
pub fn field_for_order(q: u32) -> Result<Arc<FieldSpec>> {
    let (p, k) = factor_prime_power(q)
        .ok_or_else(|| Error::InvalidField(format!("{q} is not a prime power")))?;
    make_field_arc(p, k)
}

/// Lexicographically least monic irreducible of degree k over Z_p, by
/// exhaustive search with trial division by all monic divisors of degree
/// up to k/2.
fn find_irreducible(p: u32, k: u32) -> Option<Vec<u32>> {
    let count = p.checked_pow(k)?;
    for m in 0..count {
        // Digits of m, most significant first, are (c_0, ..., c_{k-1}):
        // integer order on m is lex order on the low-first coefficient list.
        let mut coeffs = digits_msd_c0(m, p, k);
        coeffs.push(1);
        if is_irreducible(&coeffs, p) {
            return Some(coeffs);
        }
    }
    None
}

fn is_irreducible(poly: &[u32], p: u32) -> bool {
    let k = (poly.len() - 1) as u32;
    if poly[0] == 0 {
        return false; // divisible by x
    }
    for dd in 1..=(k / 2) {
        let count = p.pow(dd);
        for m in 0..count {
            let mut div = digits_msd_c0(m, p, dd);
            div.push(1);
            if poly_rem_is_zero(poly, &div, p) {
                return false;
            }
        }
    }
    true
}

/// Base-p digits of m, most significant digit first; the result read as a
/// low-degree-first coefficient list makes integer order equal lex order.
fn digits_msd_c0(mut m: u32, p: u32, len: u32) -> Vec<u32> {
    let mut out = vec![0u32; len as usize];
    for i in (0..len as usize).rev() {
        out[i] = m % p;
        m /= p;
    }
    out
}

fn poly_rem_is_zero(a: &[u32], b: &[u32], p: u32) -> bool {
    debug_assert_eq!(*b.last().unwrap(), 1);
    let mut r: Vec<u32> = a.to_vec();
    let db = b.len() - 1;
    while r.len() > db {
        let lead = *r.last().unwrap();
        if lead != 0 {
            let shift = r.len() - 1 - db;
            for (j, &bc) in b.iter().enumerate() {
                let sub = (lead as u64 * bc as u64) % p as u64;
                let cur = r[shift + j] as u64;
                r[shift + j] = ((cur + p as u64 - sub) % p as u64) as u32;
            }
        }
        r.pop();
        while r.len() > db && *r.last().unwrap() == 0 {
            r.pop();
        }
    }
    r.iter().all(|&c| c == 0)
}

impl FieldSpec {
    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn zero(&self) -> Elem {
        Elem(0)
    }

    pub fn one(&self) -> Elem {
        // Constant 1 has coefficient list (1, 0, ..., 0); c_0 is the most
        // significant base-p digit of the index.
        Elem(self.p.pow(self.k - 1) as u16)
    }

    /// Element with canonical index `idx`.
    pub fn elem(&self, idx: u32) -> Result<Elem> {
        if idx < self.q {
            Ok(Elem(idx as u16))
        } else {
            Err(Error::InvalidInput(format!(
                "element index {idx} out of range for GF({})",
                self.q
            )))
        }
    }

    /// Embedding of an integer constant (mod p) into the field.
    pub fn from_int(&self, v: u64) -> Elem {
        let c0 = (v % self.p as u64) as u32;
        Elem((c0 * self.p.pow(self.k - 1)) as u16)
    }

    /// All q elements in canonical order; index 0 is the additive identity.
    pub fn elements(&self) -> impl Iterator<Item = Elem> + '_ {
        (0..self.q).map(|i| Elem(i as u16))
    }

    /// Polynomial-basis coefficients, low degree first, length k.
    pub fn coeffs(&self, a: Elem) -> Vec<u32> {
        digits_msd_c0(a.0 as u32, self.p, self.k)
    }

    fn encode(&self, coeffs: &[u32]) -> Elem {
        let mut v = 0u32;
        for &c in coeffs {
            v = v * self.p + c;
        }
        Elem(v as u16)
    }

    fn build_tables(&mut self) {
        let q = self.q as usize;
        self.neg_tab = (0..self.q)
            .map(|a| self.neg_raw(Elem(a as u16)).0)
            .collect();
        if self.q <= TABLE_GATE {
            let mut add = vec![0u16; q * q];
            let mut mul = vec![0u16; q * q];
            for a in 0..self.q {
                for b in 0..self.q {
                    add[a as usize * q + b as usize] =
                        self.add_raw(Elem(a as u16), Elem(b as u16)).0;
                    mul[a as usize * q + b as usize] =
                        self.mul_raw(Elem(a as u16), Elem(b as u16)).0;
                }
            }
            self.add_tab = Some(add);
            self.mul_tab = Some(mul);
        }
        // Inverses by Fermat; table is O(q log q) multiplications once.
        self.inv_tab = std::iter::once(0)
            .chain((1..self.q).map(|a| self.pow(Elem(a as u16), (self.q - 2) as u64).0))
            .collect();
    }

    fn add_raw(&self, a: Elem, b: Elem) -> Elem {
        if self.k == 1 {
            return Elem(((a.0 as u32 + b.0 as u32) % self.p) as u16);
        }
        let ca = self.coeffs(a);
        let cb = self.coeffs(b);
        let sum: Vec<u32> = ca.iter().zip(&cb).map(|(x, y)| (x + y) % self.p).collect();
        self.encode(&sum)
    }

    fn neg_raw(&self, a: Elem) -> Elem {
        if self.k == 1 {
            return Elem(((self.p - a.0 as u32) % self.p) as u16);
        }
        let ca = self.coeffs(a);
        let neg: Vec<u32> = ca.iter().map(|x| (self.p - x) % self.p).collect();
        self.encode(&neg)
    }

    fn mul_raw(&self, a: Elem, b: Elem) -> Elem {
        let p = self.p as u64;
        if self.k == 1 {
            return Elem(((a.0 as u64 * b.0 as u64) % p) as u16);
        }
        let k = self.k as usize;
        let ca = self.coeffs(a);
        let cb = self.coeffs(b);
        let mut conv = vec![0u64; 2 * k - 1];
        for (i, &x) in ca.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in cb.iter().enumerate() {
                conv[i + j] = (conv[i + j] + x as u64 * y as u64) % p;
            }
        }
        // Reduce modulo the monic modulus: x^k = -(m_0 + ... + m_{k-1} x^{k-1}).
        for i in (k..2 * k - 1).rev() {
            let lead = conv[i];
            if lead == 0 {
                continue;
            }
            conv[i] = 0;
            for j in 0..k {
                let sub = (lead * self.modulus[j] as u64) % p;
                conv[i - k + j] = (conv[i - k + j] + p - sub) % p;
            }
        }
        let coeffs: Vec<u32> = conv[..k].iter().map(|&c| c as u32).collect();
        self.encode(&coeffs)
    }

    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        match &self.add_tab {
            Some(t) => Elem(t[a.index() * self.q as usize + b.index()]),
            None => self.add_raw(a, b),
        }
    }

    pub fn neg(&self, a: Elem) -> Elem {
        Elem(self.neg_tab[a.index()])
    }

    pub fn sub(&self, a: Elem, b: Elem) -> Elem {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        match &self.mul_tab {
            Some(t) => Elem(t[a.index() * self.q as usize + b.index()]),
            None => self.mul_raw(a, b),
        }
    }

    pub fn inv(&self, a: Elem) -> Result<Elem> {
        if a.is_zero() {
            return Err(Error::DivisionByZero { q: self.q });
        }
        Ok(Elem(self.inv_tab[a.index()]))
    }

    pub fn pow(&self, a: Elem, mut e: u64) -> Elem {
        let mut base = a;
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// x / 2; q is odd so 2 is invertible.
    pub fn half(&self, a: Elem) -> Elem {
        let inv2 = Elem(self.inv_tab[self.from_int(2).index()]);
        self.mul(a, inv2)
    }

    /// Canonical text form: for k = 1 the decimal residue, for p ≤ 10 the
    /// k-digit base-p string low-degree-first ("21" in GF(9) is 2 + x),
    /// otherwise dot-separated coefficient decimals.
    pub fn elem_to_string(&self, a: Elem) -> String {
        if self.k == 1 {
            return a.0.to_string();
        }
        let coeffs = self.coeffs(a);
        if self.p <= 10 {
            coeffs.iter().map(|c| c.to_string()).collect()
        } else {
            coeffs
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(".")
        }
    }

    pub fn parse_elem(&self, s: &str) -> Result<Elem> {
        let bad = |msg: String| Error::InvalidInput(msg);
        if self.k == 1 {
            let v: u32 = s
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad element {s:?} for GF({})", self.q)))?;
            if v >= self.p {
                return Err(bad(format!("residue {v} out of range for GF({})", self.q)));
            }
            return Ok(Elem(v as u16));
        }
        let coeffs: Vec<u32> = if self.p <= 10 {
            s.trim()
                .chars()
                .map(|c| {
                    c.to_digit(10)
                        .ok_or_else(|| bad(format!("bad digit {c:?} in element {s:?}")))
                })
                .collect::<Result<_>>()?
        } else {
            s.trim()
                .split('.')
                .map(|part| {
                    part.parse::<u32>()
                        .map_err(|_| bad(format!("bad coefficient {part:?} in element {s:?}")))
                })
                .collect::<Result<_>>()?
        };
        if coeffs.len() != self.k as usize {
            return Err(bad(format!(
                "element {s:?} has {} coefficients, expected {}",
                coeffs.len(),
                self.k
            )));
        }
        if coeffs.iter().any(|&c| c >= self.p) {
            return Err(bad(format!("coefficient out of range in element {s:?}")));
        }
        Ok(self.encode(&coeffs))
    }

    /// Exhaustively checks the field axioms plus x^q = x, x^{q-1} = 1 and
    /// half(x) + half(x) = x. Quadratic/cubic in q, intended for q ≤ 81.
    pub fn verify_axioms(&self) -> Result<()> {
        let els: Vec<Elem> = self.elements().collect();
        let fail = |msg: String| Err(Error::Internal(msg));
        for &a in &els {
            if self.add(a, self.zero()) != a || self.mul(a, self.one()) != a {
                return fail(format!("identity axiom fails at {}", a.0));
            }
            if self.add(a, self.neg(a)) != self.zero() {
                return fail(format!("additive inverse fails at {}", a.0));
            }
            if self.pow(a, self.q as u64) != a {
                return fail(format!("x^q != x at {}", a.0));
            }
            if !a.is_zero() && self.pow(a, (self.q - 1) as u64) != self.one() {
                return fail(format!("x^(q-1) != 1 at {}", a.0));
            }
            if self.add(self.half(a), self.half(a)) != a {
                return fail(format!("half(x)+half(x) != x at {}", a.0));
            }
            if !a.is_zero() && self.mul(a, self.inv(a)?) != self.one() {
                return fail(format!("multiplicative inverse fails at {}", a.0));
            }
        }
        for &a in &els {
            for &b in &els {
                if self.add(a, b) != self.add(b, a) || self.mul(a, b) != self.mul(b, a) {
                    return fail(format!("commutativity fails at ({}, {})", a.0, b.0));
                }
                for &c in &els {
                    if self.add(self.add(a, b), c) != self.add(a, self.add(b, c)) {
                        return fail("addition not associative".into());
                    }
                    if self.mul(self.mul(a, b), c) != self.mul(a, self.mul(b, c)) {
                        return fail("multiplication not associative".into());
                    }
                    if self.mul(a, self.add(b, c)) != self.add(self.mul(a, b), self.mul(a, c)) {
                        return fail("distributivity fails".into());
                    }
                }
            }
        }
        Ok(())
    }
}

/// A vector in F_q^n.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Vector {
    entries: Vec<Elem>,
}

impl Vector {
    pub fn new(entries: Vec<Elem>) -> Self {
        Vector { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Elem] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> Elem {
        self.entries[i]
    }
}

impl FieldSpec {
    pub fn vec_zero(&self, n: usize) -> Vector {
        Vector::new(vec![Elem(0); n])
    }

    pub fn vec_add(&self, a: &Vector, b: &Vector) -> Vector {
        debug_assert_eq!(a.len(), b.len());
        Vector::new(
            a.entries
                .iter()
                .zip(&b.entries)
                .map(|(&x, &y)| self.add(x, y))
                .collect(),
        )
    }

    pub fn vec_sub(&self, a: &Vector, b: &Vector) -> Vector {
        Vector::new(
            a.entries
                .iter()
                .zip(&b.entries)
                .map(|(&x, &y)| self.sub(x, y))
                .collect(),
        )
    }

    pub fn vec_neg(&self, a: &Vector) -> Vector {
        Vector::new(a.entries.iter().map(|&x| self.neg(x)).collect())
    }

    pub fn vec_scale(&self, c: Elem, a: &Vector) -> Vector {
        Vector::new(a.entries.iter().map(|&x| self.mul(c, x)).collect())
    }

    pub fn vec_half(&self, a: &Vector) -> Vector {
        Vector::new(a.entries.iter().map(|&x| self.half(x)).collect())
    }

    pub fn vec_is_zero(&self, a: &Vector) -> bool {
        a.entries.iter().all(|e| e.is_zero())
    }

    /// Canonical index of a vector: mixed-radix with coordinate 1 most
    /// significant, matching lexicographic order on the entry list.
    pub fn vector_index(&self, v: &Vector) -> usize {
        v.entries
            .iter()
            .fold(0usize, |acc, e| acc * self.q as usize + e.index())
    }

    pub fn vector_from_index(&self, mut idx: usize, n: usize) -> Vector {
        let mut entries = vec![Elem(0); n];
        for slot in entries.iter_mut().rev() {
            *slot = Elem((idx % self.q as usize) as u16);
            idx /= self.q as usize;
        }
        Vector::new(entries)
    }

    /// Comma-separated canonical element strings.
    pub fn vector_to_string(&self, v: &Vector) -> String {
        v.entries
            .iter()
            .map(|&e| self.elem_to_string(e))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse_vector(&self, s: &str, n: usize) -> Result<Vector> {
        let entries: Vec<Elem> = s
            .split(',')
            .map(|part| self.parse_elem(part))
            .collect::<Result<_>>()?;
        if entries.len() != n {
            return Err(Error::InvalidInput(format!(
                "vector {s:?} has {} coordinates, expected {n}",
                entries.len()
            )));
        }
        Ok(Vector::new(entries))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gf3_is_prime_field() {
        let f = make_field(3, 1).unwrap();
        assert_eq!(f.q(), 3);
        assert_eq!(f.modulus(), &[0, 1]);
        let els: Vec<u32> = f.elements().map(|e| e.index() as u32).collect();
        assert_eq!(els, vec![0, 1, 2]);
    }

    #[test]
    fn gf9_modulus_is_x2_plus_1() {
        // x^2 + 1 has no roots in Z_3 (0²+1=1, 1²+1=2, 2²+1=2) and is the
        // lex-least monic irreducible of degree 2.
        let f = make_field(3, 2).unwrap();
        assert_eq!(f.modulus(), &[1, 0, 1]);
        assert_eq!(f.q(), 9);
    }

    #[test]
    fn even_or_composite_p_rejected() {
        assert!(matches!(make_field(2, 1), Err(Error::InvalidField(_))));
        assert!(matches!(make_field(9, 1), Err(Error::InvalidField(_))));
        assert!(matches!(make_field(3, 0), Err(Error::InvalidField(_))));
    }

    #[test]
    fn gf3_inverse_and_half() {
        let f = make_field(3, 1).unwrap();
        let two = f.elem(2).unwrap();
        assert_eq!(f.inv(two).unwrap(), two); // 2·2 = 4 ≡ 1
        assert_eq!(f.half(f.one()), two); // 1/2 = 2
        assert!(matches!(
            f.inv(f.zero()),
            Err(Error::DivisionByZero { q: 3 })
        ));
    }

    #[test]
    fn frobenius_fixes_gf9() {
        let f = make_field(3, 2).unwrap();
        for a in f.elements() {
            assert_eq!(f.pow(a, 9), a);
        }
    }

    #[test]
    fn axioms_hold_on_all_small_fields() {
        // Every odd prime power q ≤ 81, exhaustively.
        for q in (3..=81u32).step_by(2) {
            let Some((p, k)) = factor_prime_power(q) else {
                continue;
            };
            if !is_prime(p) {
                continue;
            }
            let f = make_field(p, k).unwrap();
            f.verify_axioms()
                .unwrap_or_else(|e| panic!("GF({}) axioms: {e}", f.q()));
        }
    }

    #[test]
    fn large_field_without_tables() {
        // q = 3^7 = 2187 > TABLE_GATE exercises the on-the-fly path.
        let f = make_field(3, 7).unwrap();
        assert!(f.add_tab.is_none());
        let a = f.elem(1234).unwrap();
        let b = f.elem(567).unwrap();
        assert_eq!(f.mul(a, f.inv(a).unwrap()), f.one());
        assert_eq!(f.sub(f.add(a, b), b), a);
        assert_eq!(f.pow(a, f.q() as u64), a);
    }

    #[test]
    fn element_text_roundtrip() {
        let f9 = make_field(3, 2).unwrap();
        // "21" means 2 + 1·x, canonical index 2·3 + 1 = 7.
        let e = f9.parse_elem("21").unwrap();
        assert_eq!(e.index(), 7);
        assert_eq!(f9.elem_to_string(e), "21");
        assert_eq!(f9.elem_to_string(f9.zero()), "00");

        let f7 = make_field(7, 1).unwrap();
        assert_eq!(f7.parse_elem("6").unwrap().index(), 6);
        assert!(f7.parse_elem("7").is_err());
    }

    #[test]
    fn elements_are_distinct_and_zero_first() {
        let f = make_field(5, 2).unwrap();
        let all: Vec<Elem> = f.elements().collect();
        assert_eq!(all.len(), 25);
        assert_eq!(all[0], f.zero());
        for (i, &a) in all.iter().enumerate() {
            for &b in &all[i + 1..] {
                assert!(!f.sub(a, b).is_zero());
            }
        }
    }

    #[test]
    fn vector_index_roundtrip() {
        let f = make_field(3, 1).unwrap();
        for idx in 0..27 {
            let v = f.vector_from_index(idx, 3);
            assert_eq!(f.vector_index(&v), idx);
        }
        let v = f.parse_vector("1,2,0", 3).unwrap();
        assert_eq!(f.vector_to_string(&v), "1,2,0");
        assert_eq!(f.vector_index(&v), 9 + 2 * 3);
    }

    #[test]
    fn constant_embedding() {
        let f = make_field(3, 2).unwrap();
        assert_eq!(f.from_int(1), f.one());
        assert_eq!(f.from_int(4), f.one()); // 4 ≡ 1 mod 3
        assert_eq!(f.elem_to_string(f.from_int(2)), "20");
    }
}
