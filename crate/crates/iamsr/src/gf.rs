//! Prime-field arithmetic and the exact linear algebra the code is built on.
//!
//! Everything operates over GF(q) for a prime q < 2^16. Values are canonical
//! residues stored as `u16`; all arithmetic is exact, so rank / inverse / solve
//! have no tolerance questions.

use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum GfError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("elements belong to different fields (moduli {0} and {1})")]
    FieldMismatch(u16, u16),
    #[error("zero has no multiplicative inverse")]
    DivisionByZero,
    #[error("dimension mismatch: left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    ShapeMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("matrix is {rows}x{cols}, not square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("{got} entries cannot fill a {rows}x{cols} matrix")]
    BadEntryCount { rows: usize, cols: usize, got: usize },
}

/// The field GF(q), q prime. Copyable handle; two handles denote the same
/// field exactly when their moduli agree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrimeField {
    q: u16,
}

impl PrimeField {
    /// Builds GF(q), verifying primality by trial division.
    pub fn new(q: u16) -> Result<Self, GfError> {
        if !is_prime(q) {
            return Err(GfError::NotPrime(u64::from(q)));
        }
        Ok(Self { q })
    }

    pub fn modulus(&self) -> u16 {
        self.q
    }

    /// The element with value `v mod q`.
    pub fn element(&self, v: u64) -> FieldElement {
        FieldElement {
            value: (v % u64::from(self.q)) as u16,
            field: *self,
        }
    }

    pub fn zero(&self) -> FieldElement {
        self.element(0)
    }

    pub fn one(&self) -> FieldElement {
        self.element(1)
    }

    pub(crate) fn radd(&self, a: u16, b: u16) -> u16 {
        ((u32::from(a) + u32::from(b)) % u32::from(self.q)) as u16
    }

    pub(crate) fn rsub(&self, a: u16, b: u16) -> u16 {
        ((u32::from(a) + u32::from(self.q) - u32::from(b)) % u32::from(self.q)) as u16
    }

    pub(crate) fn rmul(&self, a: u16, b: u16) -> u16 {
        ((u32::from(a) * u32::from(b)) % u32::from(self.q)) as u16
    }

    pub(crate) fn rneg(&self, a: u16) -> u16 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    /// Inverse by extended Euclid; zero has none.
    pub(crate) fn rinv(&self, a: u16) -> Result<u16, GfError> {
        if a == 0 {
            return Err(GfError::DivisionByZero);
        }
        let (mut r0, mut r1) = (i64::from(self.q), i64::from(a));
        let (mut t0, mut t1) = (0i64, 1i64);
        while r1 != 0 {
            let quo = r0 / r1;
            (r0, r1) = (r1, r0 - quo * r1);
            (t0, t1) = (t1, t0 - quo * t1);
        }
        debug_assert_eq!(r0, 1, "q is prime, gcd must be 1");
        Ok(t0.rem_euclid(i64::from(self.q)) as u16)
    }
}

fn is_prime(q: u16) -> bool {
    if q < 2 {
        return false;
    }
    if q % 2 == 0 {
        return q == 2;
    }
    let mut d = 3u32;
    while d * d <= u32::from(q) {
        if u32::from(q) % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// One residue of GF(q), tagged with its field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u16,
    field: PrimeField,
}

impl FieldElement {
    pub fn value(&self) -> u16 {
        self.value
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    fn same_field(&self, rhs: &Self) -> Result<PrimeField, GfError> {
        if self.field != rhs.field {
            return Err(GfError::FieldMismatch(self.field.q, rhs.field.q));
        }
        Ok(self.field)
    }

    pub fn add(&self, rhs: &Self) -> Result<Self, GfError> {
        let field = self.same_field(rhs)?;
        Ok(Self { value: field.radd(self.value, rhs.value), field })
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, GfError> {
        let field = self.same_field(rhs)?;
        Ok(Self { value: field.rsub(self.value, rhs.value), field })
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self, GfError> {
        let field = self.same_field(rhs)?;
        Ok(Self { value: field.rmul(self.value, rhs.value), field })
    }

    /// Multiplicative inverse; errors on zero.
    pub fn inv(&self) -> Result<Self, GfError> {
        Ok(Self { value: self.field.rinv(self.value)?, field: self.field })
    }

    pub fn div(&self, rhs: &Self) -> Result<Self, GfError> {
        let field = self.same_field(rhs)?;
        Ok(Self { value: field.rmul(self.value, field.rinv(rhs.value)?), field })
    }

    pub fn neg(&self) -> Self {
        Self { value: self.field.rneg(self.value), field: self.field }
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let mut base = *self;
        let mut acc = self.field.one();
        while e > 0 {
            if e & 1 == 1 {
                acc.value = self.field.rmul(acc.value, base.value);
            }
            base.value = self.field.rmul(base.value, base.value);
            e >>= 1;
        }
        acc
    }
}

impl std::fmt::Display for FieldElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// Row-major matrix over one GF(q).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    field: PrimeField,
    rows: usize,
    cols: usize,
    data: Vec<u16>,
}

impl Matrix {
    /// Builds a matrix from row-major elements, which must all share one field.
    pub fn from_elements(
        rows: usize,
        cols: usize,
        entries: &[FieldElement],
    ) -> Result<Self, GfError> {
        if entries.len() != rows * cols {
            return Err(GfError::BadEntryCount { rows, cols, got: entries.len() });
        }
        let field = entries
            .first()
            .map(|e| e.field)
            .ok_or(GfError::BadEntryCount { rows, cols, got: 0 })
            .or_else(|_| {
                // A 0x0 (or 0xN) matrix has no entries and no intrinsic field;
                // disallow it here, use `zero` with an explicit field instead.
                Err(GfError::BadEntryCount { rows, cols, got: 0 })
            })?;
        for e in entries {
            if e.field != field {
                return Err(GfError::FieldMismatch(field.q, e.field.q));
            }
        }
        Ok(Self { field, rows, cols, data: entries.iter().map(|e| e.value).collect() })
    }

    /// Builds a matrix from row-major integer values, reduced mod q.
    pub fn from_values(field: PrimeField, rows: usize, cols: usize, values: &[u64]) -> Result<Self, GfError> {
        if values.len() != rows * cols {
            return Err(GfError::BadEntryCount { rows, cols, got: values.len() });
        }
        Ok(Self {
            field,
            rows,
            cols,
            data: values.iter().map(|&v| (v % u64::from(field.q)) as u16).collect(),
        })
    }

    pub fn zero(field: PrimeField, rows: usize, cols: usize) -> Self {
        Self { field, rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        let mut m = Self::zero(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn get(&self, r: usize, c: usize) -> FieldElement {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of bounds");
        FieldElement { value: self.data[r * self.cols + c], field: self.field }
    }

    pub fn set(&mut self, r: usize, c: usize, v: FieldElement) -> Result<(), GfError> {
        if v.field != self.field {
            return Err(GfError::FieldMismatch(self.field.q, v.field.q));
        }
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of bounds");
        self.data[r * self.cols + c] = v.value;
        Ok(())
    }

    pub(crate) fn raw_row(&self, r: usize) -> &[u16] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub(crate) fn set_raw(&mut self, r: usize, c: usize, v: u16) {
        self.data[r * self.cols + c] = v;
    }

    pub(crate) fn get_raw(&self, r: usize, c: usize) -> u16 {
        self.data[r * self.cols + c]
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zero(self.field, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self, GfError> {
        if self.field != rhs.field {
            return Err(GfError::FieldMismatch(self.field.q, rhs.field.q));
        }
        if self.cols != rhs.rows {
            return Err(GfError::ShapeMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: rhs.rows,
                right_cols: rhs.cols,
            });
        }
        let f = self.field;
        let mut out = Self::zero(f, self.rows, rhs.cols);
        for r in 0..self.rows {
            for inner in 0..self.cols {
                let a = self.data[r * self.cols + inner];
                if a == 0 {
                    continue;
                }
                for c in 0..rhs.cols {
                    let cur = out.data[r * rhs.cols + c];
                    out.data[r * rhs.cols + c] =
                        f.radd(cur, f.rmul(a, rhs.data[inner * rhs.cols + c]));
                }
            }
        }
        Ok(out)
    }

    /// Gauss–Jordan on a working copy; pivots are the first nonzero entry in
    /// each column (no magnitude heuristics exist in exact arithmetic).
    /// Pivoting is restricted to the first `pivot_cols` columns so augmented
    /// blocks ride along untouched. Returns the pivot columns.
    fn row_reduce(data: &mut [u16], rows: usize, cols: usize, pivot_cols: usize, f: PrimeField) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut pivot_row = 0;
        for col in 0..pivot_cols.min(cols) {
            let Some(src) = (pivot_row..rows).find(|&r| data[r * cols + col] != 0) else {
                continue;
            };
            if src != pivot_row {
                for c in 0..cols {
                    data.swap(src * cols + c, pivot_row * cols + c);
                }
            }
            let inv = f.rinv(data[pivot_row * cols + col]).expect("pivot is nonzero");
            for c in 0..cols {
                data[pivot_row * cols + c] = f.rmul(data[pivot_row * cols + c], inv);
            }
            for r in 0..rows {
                if r == pivot_row {
                    continue;
                }
                let factor = data[r * cols + col];
                if factor == 0 {
                    continue;
                }
                for c in 0..cols {
                    let sub = f.rmul(factor, data[pivot_row * cols + c]);
                    data[r * cols + c] = f.rsub(data[r * cols + c], sub);
                }
            }
            pivots.push(col);
            pivot_row += 1;
            if pivot_row == rows {
                break;
            }
        }
        pivots
    }

    /// Rank over GF(q), exact.
    pub fn rank(&self) -> usize {
        let mut work = self.data.clone();
        Self::row_reduce(&mut work, self.rows, self.cols, self.cols, self.field).len()
    }

    /// Inverse by Gauss–Jordan on the identity-augmented matrix.
    pub fn inverse(&self) -> Result<Self, GfError> {
        if self.rows != self.cols {
            return Err(GfError::NotSquare { rows: self.rows, cols: self.cols });
        }
        let n = self.rows;
        let cols = 2 * n;
        let mut work = vec![0u16; n * cols];
        for r in 0..n {
            work[r * cols..r * cols + n].copy_from_slice(self.raw_row(r));
            work[r * cols + n + r] = 1;
        }
        let pivots = Self::row_reduce(&mut work, n, cols, n, self.field);
        if pivots.len() != n {
            return Err(GfError::Singular);
        }
        let mut out = Self::zero(self.field, n, n);
        for r in 0..n {
            out.data[r * n..(r + 1) * n].copy_from_slice(&work[r * cols + n..(r + 1) * cols]);
        }
        Ok(out)
    }

    /// Solves A·x = b for square nonsingular A.
    pub fn solve(&self, b: &[FieldElement]) -> Result<Vec<FieldElement>, GfError> {
        if self.rows != self.cols {
            return Err(GfError::NotSquare { rows: self.rows, cols: self.cols });
        }
        if b.len() != self.rows {
            return Err(GfError::ShapeMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: b.len(),
                right_cols: 1,
            });
        }
        let n = self.rows;
        let cols = n + 1;
        let mut work = vec![0u16; n * cols];
        for r in 0..n {
            if b[r].field != self.field {
                return Err(GfError::FieldMismatch(self.field.q, b[r].field.q));
            }
            work[r * cols..r * cols + n].copy_from_slice(self.raw_row(r));
            work[r * cols + n] = b[r].value;
        }
        let pivots = Self::row_reduce(&mut work, n, cols, n, self.field);
        if pivots.len() != n {
            return Err(GfError::Singular);
        }
        Ok((0..n)
            .map(|r| FieldElement { value: work[r * cols + n], field: self.field })
            .collect())
    }

    /// Stacks `self` on top of `other` (column counts must agree).
    pub fn vstack(&self, other: &Self) -> Result<Self, GfError> {
        if self.field != other.field {
            return Err(GfError::FieldMismatch(self.field.q, other.field.q));
        }
        if self.cols != other.cols {
            return Err(GfError::ShapeMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self { field: self.field, rows: self.rows + other.rows, cols: self.cols, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f(q: u16) -> PrimeField {
        PrimeField::new(q).unwrap()
    }

    fn mat(field: PrimeField, rows: usize, cols: usize, values: &[u64]) -> Matrix {
        Matrix::from_values(field, rows, cols, values).unwrap()
    }

    #[test]
    fn primality_gate() {
        for q in [2u16, 3, 5, 7, 11, 257, 65521] {
            assert!(PrimeField::new(q).is_ok(), "{q} is prime");
        }
        for q in [0u16, 1, 4, 6, 9, 15, 257 * 255 % 65535, 65535] {
            assert_eq!(PrimeField::new(q), Err(GfError::NotPrime(u64::from(q))));
        }
    }

    #[test]
    fn element_reduction() {
        let f7 = f(7);
        assert_eq!(f7.element(9).value(), 2);
        assert_eq!(f7.element(7).value(), 0);
        assert_eq!(f7.element(6).value(), 6);
    }

    #[test]
    fn addition_frozen_values() {
        let f7 = f(7);
        assert_eq!(f7.element(3).add(&f7.element(4)).unwrap().value(), 0);
        assert_eq!(f7.element(5).add(&f7.element(4)).unwrap().value(), 2);
        for x in 0..7 {
            let e = f7.element(x);
            assert_eq!(f7.zero().add(&e).unwrap(), e);
        }
    }

    #[test]
    fn multiplication_frozen_values() {
        let f7 = f(7);
        assert_eq!(f7.element(2).mul(&f7.element(5)).unwrap().value(), 3);
        assert_eq!(f7.element(4).mul(&f7.element(2)).unwrap().value(), 1);
        for x in 0..7 {
            let e = f7.element(x);
            assert_eq!(f7.one().mul(&e).unwrap(), e);
        }
    }

    #[test]
    fn field_mismatch_is_reported() {
        let a = f(7).element(3);
        let b = f(5).element(3);
        assert_eq!(a.add(&b), Err(GfError::FieldMismatch(7, 5)));
        assert_eq!(a.mul(&b), Err(GfError::FieldMismatch(7, 5)));
        assert_eq!(a.sub(&b), Err(GfError::FieldMismatch(7, 5)));
        assert_eq!(a.div(&b), Err(GfError::FieldMismatch(7, 5)));
    }

    #[test]
    fn inverse_frozen_values() {
        let f7 = f(7);
        assert_eq!(f7.element(3).inv().unwrap().value(), 5);
        assert_eq!(f7.element(2).inv().unwrap().value(), 4);
        assert_eq!(f7.one().inv().unwrap().value(), 1);
        assert_eq!(f7.zero().inv(), Err(GfError::DivisionByZero));
    }

    #[test]
    fn inverse_matches_brute_force_scan() {
        for q in [2u16, 3, 5, 7, 11, 13, 101] {
            let field = f(q);
            for a in 1..q {
                let by_scan = (1..q).find(|&b| field.rmul(a, b) == 1).unwrap();
                assert_eq!(field.element(u64::from(a)).inv().unwrap().value(), by_scan);
            }
        }
    }

    #[test]
    fn every_nonzero_element_has_inverse_small_fields() {
        for q in [2u16, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101] {
            let field = f(q);
            for a in 1..q {
                let e = field.element(u64::from(a));
                assert_eq!(e.mul(&e.inv().unwrap()).unwrap(), field.one());
            }
        }
    }

    #[test]
    fn subtraction_negation_division() {
        let f7 = f(7);
        assert_eq!(f7.element(2).sub(&f7.element(5)).unwrap().value(), 4);
        assert_eq!(f7.element(3).neg().value(), 4);
        assert_eq!(f7.zero().neg().value(), 0);
        assert_eq!(f7.element(6).div(&f7.element(2)).unwrap().value(), 3);
        assert_eq!(f7.element(1).div(&f7.zero()), Err(GfError::DivisionByZero));
    }

    #[test]
    fn pow_basics() {
        let f7 = f(7);
        assert_eq!(f7.element(3).pow(0), f7.one());
        assert_eq!(f7.element(3).pow(6), f7.one());
        assert_eq!(f7.element(2).pow(3).value(), 1);
        assert_eq!(f7.element(5).pow(2).value(), 4);
    }

    #[test]
    fn matrix_construction_errors() {
        let f7 = f(7);
        assert!(matches!(
            Matrix::from_values(f7, 2, 2, &[1, 2, 3]),
            Err(GfError::BadEntryCount { got: 3, .. })
        ));
        let mixed = [f7.element(1), f(5).element(1)];
        assert_eq!(Matrix::from_elements(1, 2, &mixed), Err(GfError::FieldMismatch(7, 5)));
    }

    #[test]
    fn identity_multiplication() {
        let f7 = f(7);
        let m = mat(f7, 3, 2, &[1, 2, 3, 4, 5, 6]);
        assert_eq!(Matrix::identity(f7, 3).mul(&m).unwrap(), m);
        let one_by_one = mat(f7, 1, 1, &[3]).mul(&mat(f7, 1, 1, &[4])).unwrap();
        assert_eq!(one_by_one.get(0, 0).value(), 5);
    }

    #[test]
    fn multiplication_shape_and_field_errors() {
        let f7 = f(7);
        let a = mat(f7, 2, 3, &[0; 6]);
        let b = mat(f7, 2, 3, &[0; 6]);
        assert!(matches!(a.mul(&b), Err(GfError::ShapeMismatch { .. })));
        let c = mat(f(5), 3, 1, &[0; 3]);
        assert_eq!(a.mul(&c), Err(GfError::FieldMismatch(7, 5)));
    }

    #[test]
    fn rank_frozen_values() {
        let f7 = f(7);
        assert_eq!(Matrix::zero(f7, 3, 4).rank(), 0);
        let psi = mat(f7, 3, 3, &[5, 4, 1, 2, 5, 4, 3, 2, 5]);
        assert_eq!(psi.rank(), 3);
        assert_eq!(mat(f7, 2, 2, &[1, 2, 2, 4]).rank(), 1);
        assert_eq!(Matrix::identity(f7, 4).rank(), 4);
    }

    #[test]
    fn inverse_verified_by_product() {
        let f7 = f(7);
        let psi = mat(f7, 3, 3, &[5, 4, 1, 2, 5, 4, 3, 2, 5]);
        let inv = psi.inverse().unwrap();
        assert_eq!(psi.mul(&inv).unwrap(), Matrix::identity(f7, 3));
        assert_eq!(inv.mul(&psi).unwrap(), Matrix::identity(f7, 3));

        let f5 = f(5);
        let two = mat(f5, 1, 1, &[2]);
        assert_eq!(two.inverse().unwrap().get(0, 0).value(), 3);

        assert_eq!(Matrix::identity(f7, 3).inverse().unwrap(), Matrix::identity(f7, 3));
        assert_eq!(mat(f7, 2, 2, &[1, 2, 2, 4]).inverse(), Err(GfError::Singular));
        assert!(matches!(mat(f7, 2, 3, &[0; 6]).inverse(), Err(GfError::NotSquare { .. })));
    }

    #[test]
    fn solve_frozen_values() {
        let f7 = f(7);
        let b: Vec<_> = [1u64, 5, 2].iter().map(|&v| f7.element(v)).collect();
        assert_eq!(Matrix::identity(f7, 3).solve(&b).unwrap(), b);

        let three = mat(f7, 1, 1, &[3]);
        assert_eq!(three.solve(&[f7.one()]).unwrap()[0].value(), 5);

        assert_eq!(mat(f7, 2, 2, &[1, 2, 2, 4]).solve(&[f7.one(), f7.zero()]), Err(GfError::Singular));
        assert!(matches!(
            Matrix::identity(f7, 3).solve(&[f7.one()]),
            Err(GfError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn transpose_round_trip() {
        let f7 = f(7);
        let m = mat(f7, 2, 3, &[1, 2, 3, 4, 5, 6]);
        assert_eq!(m.transpose().transpose(), m);
        assert_eq!(m.transpose().get(2, 1).value(), 6);
    }

    #[test]
    fn vstack_shapes() {
        let f7 = f(7);
        let a = mat(f7, 1, 2, &[1, 2]);
        let b = mat(f7, 2, 2, &[3, 4, 5, 6]);
        let s = a.vstack(&b).unwrap();
        assert_eq!((s.rows(), s.cols()), (3, 2));
        assert_eq!(s.get(2, 1).value(), 6);
        let c = mat(f7, 1, 3, &[0; 3]);
        assert!(matches!(a.vstack(&c), Err(GfError::ShapeMismatch { .. })));
    }

    prop_compose! {
        fn arb_field()(idx in 0usize..5) -> PrimeField {
            f([3u16, 5, 7, 11, 13][idx])
        }
    }

    prop_compose! {
        fn arb_triple()(field in arb_field(), raw in prop::array::uniform3(0u64..65536)) -> (PrimeField, [FieldElement; 3]) {
            (field, [field.element(raw[0]), field.element(raw[1]), field.element(raw[2])])
        }
    }

    proptest! {
        #[test]
        fn field_axioms((_, [a, b, c]) in arb_triple()) {
            let ab = a.add(&b).unwrap();
            prop_assert_eq!(ab, b.add(&a).unwrap());
            prop_assert_eq!(ab.add(&c).unwrap(), a.add(&b.add(&c).unwrap()).unwrap());
            let axb = a.mul(&b).unwrap();
            prop_assert_eq!(axb, b.mul(&a).unwrap());
            prop_assert_eq!(axb.mul(&c).unwrap(), a.mul(&b.mul(&c).unwrap()).unwrap());
            prop_assert_eq!(
                a.mul(&b.add(&c).unwrap()).unwrap(),
                a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap()
            );
            prop_assert_eq!(a.add(&a.neg()).unwrap(), a.field().zero());
        }

        #[test]
        fn rank_transpose_agreement(field in arb_field(), values in prop::collection::vec(0u64..65536, 20)) {
            let m = Matrix::from_values(field, 4, 5, &values).unwrap();
            prop_assert_eq!(m.rank(), m.transpose().rank());
        }

        #[test]
        fn inverse_product_is_identity(field in arb_field(), values in prop::collection::vec(0u64..65536, 16)) {
            let m = Matrix::from_values(field, 4, 4, &values).unwrap();
            prop_assume!(m.rank() == 4);
            let inv = m.inverse().unwrap();
            prop_assert_eq!(m.mul(&inv).unwrap(), Matrix::identity(field, 4));
        }

        #[test]
        fn solve_round_trips(field in arb_field(), values in prop::collection::vec(0u64..65536, 16), xs in prop::collection::vec(0u64..65536, 4)) {
            let m = Matrix::from_values(field, 4, 4, &values).unwrap();
            prop_assume!(m.rank() == 4);
            let x: Vec<_> = xs.iter().map(|&v| field.element(v)).collect();
            let x_col = Matrix::from_elements(4, 1, &x).unwrap();
            let b_col = m.mul(&x_col).unwrap();
            let b: Vec<_> = (0..4).map(|r| b_col.get(r, 0)).collect();
            prop_assert_eq!(m.solve(&b).unwrap(), x);
        }
    }
}
