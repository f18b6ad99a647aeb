//! Evaluation tensors T(j_1,…,j_d) = P(a_{1j_1},…,a_{dj_d}), diagonality
//! checks, matrix rank over GF(q) at order 2, and the certificate tying a
//! diagonal tensor's member count to the slice-rank counting ceiling.
//!
//! Exact slice rank is not computed for d ≥ 3 (no efficient algorithm is
//! known); at d = 2 slice rank is matrix rank and is checked exactly, and
//! at d ≥ 3 only the sandwich N ≤ witness ≤ d·M(n, ⌊D/d⌋, q−1) is emitted.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::families::Family;
use crate::gf::{Elem, FieldSpec};
use crate::poly::{PolyEval, SliceRankWitness};

/// Dense tensors are limited to this many entries.
pub const TENSOR_ENTRY_GATE: u64 = 10_000_000;

/// A dense order-d tensor with side length N over GF(q), entries stored in
/// lexicographic index order (first index most significant).
#[derive(Clone, Debug)]
pub struct Tensor {
    field: Arc<FieldSpec>,
    d: u16,
    side: usize,
    entries: Vec<Elem>,
}

impl Tensor {
    pub fn field(&self) -> &Arc<FieldSpec> {
        &self.field
    }

    pub fn order(&self) -> u16 {
        self.d
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn get(&self, index: &[usize]) -> Elem {
        debug_assert_eq!(index.len(), self.d as usize);
        let flat = index.iter().fold(0usize, |acc, &j| acc * self.side + j);
        self.entries[flat]
    }

    fn decode(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.d as usize];
        for slot in idx.iter_mut().rev() {
            *slot = flat % self.side;
            flat /= self.side;
        }
        idx
    }

    /// None when every off-diagonal entry is zero; otherwise the
    /// lexicographically first violating index tuple.
    pub fn first_off_diagonal(&self) -> Option<Vec<usize>> {
        for (flat, e) in self.entries.iter().enumerate() {
            if e.is_zero() {
                continue;
            }
            let idx = self.decode(flat);
            if !idx.windows(2).all(|w| w[0] == w[1]) {
                return Some(idx);
            }
        }
        None
    }

    pub fn is_diagonal(&self) -> bool {
        self.first_off_diagonal().is_none()
    }

    pub fn diagonal_entries(&self) -> Vec<Elem> {
        (0..self.side)
            .map(|j| self.get(&vec![j; self.d as usize]))
            .collect()
    }

    /// Rank by Gaussian elimination over GF(q); order 2 only. For diagonal
    /// matrices this equals the number of nonzero diagonal entries.
    pub fn matrix_rank(&self) -> Result<usize> {
        if self.d != 2 {
            return Err(Error::Precondition(format!(
                "matrix rank requires an order-2 tensor, got order {}",
                self.d
            )));
        }
        let mut rows: Vec<Vec<Elem>> = (0..self.side)
            .map(|r| self.entries[r * self.side..(r + 1) * self.side].to_vec())
            .collect();
        Ok(gaussian_rank(&self.field, &mut rows))
    }
}

/// Row-echelon rank over GF(q); mutates the matrix in place.
pub fn gaussian_rank(field: &FieldSpec, rows: &mut [Vec<Elem>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let ncols = rows[0].len();
    let mut rank = 0;
    for col in 0..ncols {
        let Some(pivot) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, pivot);
        let inv = field
            .inv(rows[rank][col])
            .expect("pivot is nonzero by construction");
        let pivot_row = rows[rank].clone();
        for row in rows.iter_mut().skip(rank + 1) {
            if row[col].is_zero() {
                continue;
            }
            let factor = field.mul(row[col], inv);
            for (cell, &p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *cell = field.sub(*cell, field.mul(factor, p));
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Fills T(j_1,…,j_d) = P(a_{1j_1},…,a_{dj_d}); entries are independent and
/// computed in parallel.
pub fn build_tensor(poly: &(dyn PolyEval + Sync), fam: &Family) -> Result<Tensor> {
    if poly.eval_dims() != (fam.d(), fam.n()) || **poly.eval_field() != **fam.field() {
        return Err(Error::InvalidInput(format!(
            "polynomial dims {:?} do not match family dims ({}, {})",
            poly.eval_dims(),
            fam.d(),
            fam.n()
        )));
    }
    let side = fam.len();
    let d = fam.d();
    let total = (side as u128)
        .checked_pow(d as u32)
        .filter(|&t| t <= TENSOR_ENTRY_GATE as u128)
        .ok_or(Error::TooLarge {
            what: "tensor entries N^d",
            size: (side as u128).saturating_pow(d as u32),
            gate: TENSOR_ENTRY_GATE as u128,
        })? as usize;

    let entries: Vec<Elem> = (0..total)
        .into_par_iter()
        .map(|mut flat| {
            let mut idx = vec![0usize; d as usize];
            for slot in idx.iter_mut().rev() {
                *slot = flat % side;
                flat /= side;
            }
            let point: Vec<_> = idx
                .iter()
                .enumerate()
                .map(|(i, &j)| &fam.blocks()[i][j])
                .collect();
            poly.eval_point(&point)
        })
        .collect();

    Ok(Tensor {
        field: fam.field().clone(),
        d,
        side,
        entries,
    })
}

/// Machine-checkable certificate: a diagonal tensor with N nonzero diagonal
/// entries has slice rank N, which the block-split witness and the counting
/// ceiling must both dominate.
#[derive(Debug, Clone, Serialize)]
pub struct DiagonalRankCertificate {
    #[serde(rename = "N")]
    pub n_members: usize,
    pub d: u16,
    #[serde(rename = "D")]
    pub degree: u32,
    /// d·M(n, ⌊D/d⌋, q−1) as a decimal string.
    pub bound: String,
    pub diagonal: bool,
    pub witness_sizes: Vec<usize>,
    pub witness_total: u64,
}

/// Checks N ≤ witness ≤ d·M(n, ⌊D/d⌋, q−1) for a diagonal tensor with all
/// diagonal entries nonzero. A violated sandwich is a bug, never expected.
pub fn diagonal_rank_check(
    tensor: &Tensor,
    witness: &SliceRankWitness,
) -> Result<DiagonalRankCertificate> {
    if tensor.d != witness.d {
        return Err(Error::InvalidInput(format!(
            "tensor order {} does not match witness order {}",
            tensor.d, witness.d
        )));
    }
    if let Some(idx) = tensor.first_off_diagonal() {
        return Err(Error::Precondition(format!(
            "tensor is not diagonal: nonzero entry at {idx:?}"
        )));
    }
    if let Some(j) = tensor.diagonal_entries().iter().position(|e| e.is_zero()) {
        return Err(Error::Precondition(format!(
            "diagonal entry {j} is zero; the member count is not witnessed"
        )));
    }
    let n_members = tensor.side;
    if (n_members as u64) > witness.total {
        return Err(Error::InvariantViolation(format!(
            "slice-rank sandwich broken: N = {n_members} exceeds witness {}",
            witness.total
        )));
    }
    if num_bigint::BigUint::from(witness.total) > witness.bound {
        return Err(Error::InvariantViolation(format!(
            "slice-rank sandwich broken: witness {} exceeds bound {}",
            witness.total, witness.bound
        )));
    }
    Ok(DiagonalRankCertificate {
        n_members,
        d: tensor.d,
        degree: witness.degree,
        bound: witness.bound.to_string(),
        diagonal: true,
        witness_sizes: witness.patterns.iter().map(|s| s.len()).collect(),
        witness_total: witness.total,
    })
}
