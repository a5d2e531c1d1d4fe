//! Cauchy matrix construction and the total-nonsingularity check.
//!
//! A Cauchy matrix over GF(q) has entries 1/(x_i - y_j) for a sequence of
//! points with no repeats. Every square submatrix of such a matrix is
//! nonsingular, which is exactly what the encoding matrices need.

use crate::gf::{FieldElement, GfError, Matrix, PrimeField};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum CauchyError {
    #[error("point value {0} repeats across xs and ys")]
    RepeatedPoint(u16),
    #[error("need {needed} distinct points but GF({modulus}) has only {modulus}")]
    NotEnoughPoints { needed: usize, modulus: u16 },
    #[error(transparent)]
    Gf(#[from] GfError),
}

/// The evaluation points (x_1..x_s, y_1..y_t), all distinct, defining an
/// s x t Cauchy matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InjectiveSequence {
    field: PrimeField,
    xs: Vec<FieldElement>,
    ys: Vec<FieldElement>,
}

impl InjectiveSequence {
    pub fn new(field: PrimeField, xs: Vec<FieldElement>, ys: Vec<FieldElement>) -> Result<Self, CauchyError> {
        let needed = xs.len() + ys.len();
        if needed > usize::from(field.modulus()) {
            return Err(CauchyError::NotEnoughPoints { needed, modulus: field.modulus() });
        }
        let mut seen = vec![false; usize::from(field.modulus())];
        for e in xs.iter().chain(ys.iter()) {
            if e.field() != field {
                return Err(GfError::FieldMismatch(field.modulus(), e.field().modulus()).into());
            }
            let v = usize::from(e.value());
            if seen[v] {
                return Err(CauchyError::RepeatedPoint(e.value()));
            }
            seen[v] = true;
        }
        Ok(Self { field, xs, ys })
    }

    /// Convenience constructor from integer values (reduced mod q).
    pub fn from_values(field: PrimeField, xs: &[u64], ys: &[u64]) -> Result<Self, CauchyError> {
        Self::new(
            field,
            xs.iter().map(|&v| field.element(v)).collect(),
            ys.iter().map(|&v| field.element(v)).collect(),
        )
    }

    /// The default sequence: xs = 0..s, ys = s..s+t.
    pub fn canonical(field: PrimeField, s: usize, t: usize) -> Result<Self, CauchyError> {
        let xs: Vec<u64> = (0..s as u64).collect();
        let ys: Vec<u64> = (s as u64..(s + t) as u64).collect();
        Self::from_values(field, &xs, &ys)
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn xs(&self) -> &[FieldElement] {
        &self.xs
    }

    pub fn ys(&self) -> &[FieldElement] {
        &self.ys
    }
}

/// Builds the s x t matrix with entry (i, j) = 1/(x_i - y_j). All entries are
/// nonzero because the points are distinct.
pub fn cauchy_build(seq: &InjectiveSequence) -> Matrix {
    let f = seq.field;
    let mut m = Matrix::zero(f, seq.xs.len(), seq.ys.len());
    for (i, x) in seq.xs.iter().enumerate() {
        for (j, y) in seq.ys.iter().enumerate() {
            let diff = x.sub(y).expect("sequence elements share one field");
            let entry = diff.inv().expect("distinct points, difference is nonzero");
            m.set(i, j, entry).expect("entry from same field");
        }
    }
    m
}

/// `cauchy_build` over the canonical sequence xs = (0..s), ys = (s..s+t).
pub fn cauchy_canonical(field: PrimeField, s: usize, t: usize) -> Result<Matrix, CauchyError> {
    Ok(cauchy_build(&InjectiveSequence::canonical(field, s, t)?))
}

/// True iff every square submatrix of order <= max_order is nonsingular,
/// by exhaustive enumeration of row and column subsets. Cost grows
/// combinatorially with the order, so callers should bound it.
pub fn verify_total_nonsingularity(m: &Matrix, max_order: usize) -> bool {
    let limit = max_order.min(m.rows()).min(m.cols());
    for order in 1..=limit {
        let mut ok = true;
        for_each_combination(m.rows(), order, &mut |rows| {
            for_each_combination(m.cols(), order, &mut |cols| {
                if !ok {
                    return;
                }
                let mut sub = Matrix::zero(m.field(), order, order);
                for (si, &r) in rows.iter().enumerate() {
                    for (sj, &c) in cols.iter().enumerate() {
                        sub.set_raw(si, sj, m.get_raw(r, c));
                    }
                }
                if sub.rank() != order {
                    ok = false;
                }
            });
        });
        if !ok {
            return false;
        }
    }
    true
}

/// Calls `f` with every size-k subset of 0..n in lexicographic order.
pub(crate) fn for_each_combination(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // advance to the lexicographic successor
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
