//! Exact counting of bounded compositions: M(n, D, a) is the number of
//! integer vectors in {0..a}^n with coordinate sum at most D.
//!
//! Two independent algorithms are kept side by side — a dynamic program and
//! an inclusion–exclusion formula — so each can catch bugs in the other.
//! Counts are arbitrary-precision and serialized as decimal strings.

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, Zero};

/// Floor of an exact rational cap; the count only depends on ⌊D⌋ since all
/// coordinate sums are integers. Negative caps yield an empty solution set.
fn floor_cap(cap: Ratio<i64>) -> Option<u64> {
    let f = cap.floor().to_integer();
    if f < 0 {
        None
    } else {
        Some(f as u64)
    }
}

/// M(n, D, a) by dynamic programming over (coordinate, partial sum).
pub fn count_m(n: u32, cap: Ratio<i64>, per_coord_max: u32) -> BigUint {
    let Some(cap) = floor_cap(cap) else {
        return BigUint::zero();
    };
    let a = per_coord_max as u64;
    // Sums never exceed a·n, so the cap can be clamped for table sizing.
    let s_max = cap.min(a * n as u64) as usize;
    let mut ways = vec![BigUint::zero(); s_max + 1];
    ways[0] = BigUint::one();
    for _ in 0..n {
        let mut next = vec![BigUint::zero(); s_max + 1];
        // Sliding-window sum: next[s] = Σ_{x=0..min(a,s)} ways[s-x].
        let mut window = BigUint::zero();
        for s in 0..=s_max {
            window += &ways[s];
            if s as u64 > a {
                window -= &ways[s - a as usize - 1];
            }
            next[s] = window.clone();
        }
        ways = next;
    }
    ways.iter().sum()
}

/// C(m, k) with C(m, k) = 0 for m < k; exact.
fn binomial(m: u128, k: u64) -> BigUint {
    if m < k as u128 {
        return BigUint::zero();
    }
    let mut acc = BigUint::one();
    for i in 1..=k {
        acc *= BigUint::from(m - k as u128 + i as u128);
        acc /= BigUint::from(i);
    }
    acc
}

/// Independent oracle for `count_m`:
/// Σ_j (−1)^j · C(n, j) · C(⌊D⌋ − j(a+1) + n, n) over j with the upper
/// binomial argument nonnegative.
pub fn count_m_inclusion_exclusion(n: u32, cap: Ratio<i64>, per_coord_max: u32) -> BigUint {
    let Some(cap) = floor_cap(cap) else {
        return BigUint::zero();
    };
    let a1 = per_coord_max as u128 + 1;
    let mut pos = BigUint::zero();
    let mut neg = BigUint::zero();
    for j in 0..=n as u64 {
        let used = j as u128 * a1;
        if used > cap as u128 {
            break;
        }
        let term = binomial(n as u128, j) * binomial(cap as u128 - used + n as u128, n as u64);
        if j % 2 == 0 {
            pos += term;
        } else {
            neg += term;
        }
    }
    pos - neg
}

/// N ≤ d·M(n, (q−1)n/d, q−1), the multicolor sum-free ceiling.
pub fn sumfree_bound(n: u32, q: u32, d: u32) -> BigUint {
    debug_assert!(q >= 3 && d >= 2);
    let cap = Ratio::new((q as i64 - 1) * n as i64, d as i64);
    BigUint::from(d) * count_m(n, cap, q - 1)
}
