//! Complex linear algebra for small quantum systems.
//!
//! Operators keep only their nonzero entries, row by row, and are tagged with
//! the basis they act on. Everything in this problem conserves photon number,
//! so joint operators are block diagonal and mostly empty; the dense view is
//! still available through `get`. Functions of Hermitian operators go through a full spectral
//! decomposition; the decomposition first splits the matrix into its
//! connected (block-diagonal) components and diagonalizes each one.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
pub use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::tolerances;

/// The Hilbert space an operator or ket lives on.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BasisTag {
    /// Spin-1/2, ordered (|0⟩ = σz up, |1⟩ = σz down).
    Spin,
    /// Two polarization modes truncated at total photon number `n_max`.
    Meter { n_max: usize },
    /// One bosonic mode truncated at `n_max` photons.
    Fock { n_max: usize },
    /// Unlabelled space of the given dimension.
    Generic(usize),
    /// Tensor product, left factor is the slow index.
    Joint(Box<BasisTag>, Box<BasisTag>),
}

impl BasisTag {
    pub fn dim(&self) -> usize {
        match self {
            BasisTag::Spin => 2,
            BasisTag::Meter { n_max } => (n_max + 1) * (n_max + 2) / 2,
            BasisTag::Fock { n_max } => n_max + 1,
            BasisTag::Generic(d) => *d,
            BasisTag::Joint(a, b) => a.dim() * b.dim(),
        }
    }

    pub fn joint(left: &BasisTag, right: &BasisTag) -> BasisTag {
        BasisTag::Joint(Box::new(left.clone()), Box::new(right.clone()))
    }
}

impl fmt::Display for BasisTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisTag::Spin => write!(f, "spin"),
            BasisTag::Meter { n_max } => write!(f, "meter({n_max})"),
            BasisTag::Fock { n_max } => write!(f, "fock({n_max})"),
            BasisTag::Generic(d) => write!(f, "generic({d})"),
            BasisTag::Joint(a, b) => write!(f, "{a}⊗{b}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("basis mismatch: {left} vs {right}")]
    BasisMismatch { left: BasisTag, right: BasisTag },
    #[error("expected {expected} entries, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("operator is not Hermitian (max |M - M†| = {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("non-finite entry")]
    NonFinite,
}

fn check_same(left: &BasisTag, right: &BasisTag) -> Result<(), LinalgError> {
    if left == right {
        Ok(())
    } else {
        Err(LinalgError::BasisMismatch {
            left: left.clone(),
            right: right.clone(),
        })
    }
}

/// Square complex matrix acting on `basis`, stored as per-row lists of
/// `(column, value)` sorted by column. Exact zeros are never stored, so two
/// operators compare equal iff all their entries do.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    basis: BasisTag,
    dim: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

#[inline]
fn is_zero(z: C64) -> bool {
    z.re == 0.0 && z.im == 0.0
}

/// Merges two sorted rows entrywise.
fn merge_rows(a: &[(usize, C64)], b: &[(usize, C64)], f: impl Fn(C64, C64) -> C64) -> Vec<(usize, C64)> {
    let zero = C64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(a.len().max(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let (col, value) = match (a.get(i), b.get(j)) {
            (Some(&(ca, va)), Some(&(cb, vb))) if ca == cb => {
                i += 1;
                j += 1;
                (ca, f(va, vb))
            }
            (Some(&(ca, va)), Some(&(cb, _))) if ca < cb => {
                i += 1;
                (ca, f(va, zero))
            }
            (Some(&(ca, va)), None) => {
                i += 1;
                (ca, f(va, zero))
            }
            (_, Some(&(cb, vb))) => {
                j += 1;
                (cb, f(zero, vb))
            }
            (None, None) => unreachable!(),
        };
        if !is_zero(value) {
            out.push((col, value));
        }
    }
    out
}

impl Operator {
    pub fn zeros(basis: BasisTag) -> Self {
        let dim = basis.dim();
        Operator {
            basis,
            dim,
            rows: vec![Vec::new(); dim],
        }
    }

    pub fn identity(basis: BasisTag) -> Self {
        Self::diagonal(basis, |_| C64::new(1.0, 0.0))
    }

    pub fn diagonal(basis: BasisTag, f: impl Fn(usize) -> C64) -> Self {
        let mut op = Self::zeros(basis);
        for (i, row) in op.rows.iter_mut().enumerate() {
            let z = f(i);
            if !is_zero(z) {
                row.push((i, z));
            }
        }
        op
    }

    pub fn from_fn(basis: BasisTag, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut op = Self::zeros(basis);
        let n = op.dim;
        for (i, row) in op.rows.iter_mut().enumerate() {
            row.extend((0..n).map(|j| (j, f(i, j))).filter(|&(_, z)| !is_zero(z)));
        }
        op
    }

    /// Builds from row-major entries.
    pub fn from_row_major(basis: BasisTag, data: Vec<C64>) -> Result<Self, LinalgError> {
        let dim = basis.dim();
        if data.len() != dim * dim {
            return Err(LinalgError::Shape {
                expected: dim * dim,
                got: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self::from_fn(basis, |i, j| data[i * dim + j]))
    }

    /// Rebinds the operator to another basis of the same dimension.
    pub fn retag(mut self, basis: BasisTag) -> Result<Self, LinalgError> {
        if basis.dim() != self.dim {
            return Err(LinalgError::Shape {
                expected: self.dim * self.dim,
                got: basis.dim() * basis.dim(),
            });
        }
        self.basis = basis;
        Ok(self)
    }

    pub fn basis(&self) -> &BasisTag {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        let row = &self.rows[i];
        match row.binary_search_by_key(&j, |&(c, _)| c) {
            Ok(k) => row[k].1,
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn set(&mut self, i: usize, j: usize, value: C64) {
        assert!(j < self.dim, "column {j} out of range");
        let row = &mut self.rows[i];
        match (row.binary_search_by_key(&j, |&(c, _)| c), is_zero(value)) {
            (Ok(k), false) => row[k].1 = value,
            (Ok(k), true) => {
                row.remove(k);
            }
            (Err(k), false) => row.insert(k, (j, value)),
            (Err(_), true) => {}
        }
    }

    /// Stored entries of row `i` as `(column, value)`, ascending in column.
    pub fn row_entries(&self, i: usize) -> &[(usize, C64)] {
        &self.rows[i]
    }

    /// Number of stored (nonzero) entries.
    pub fn nonzeros(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, z)| (i, j, z)))
    }

    pub fn adjoint(&self) -> Operator {
        let mut out = Operator::zeros(self.basis.clone());
        // rows visited in order, so every output row stays sorted
        for (i, j, z) in self.entries() {
            out.rows[j].push((i, z.conj()));
        }
        out
    }

    pub fn scale(&self, factor: C64) -> Operator {
        Operator {
            basis: self.basis.clone(),
            dim: self.dim,
            rows: self
                .rows
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|&(j, z)| (j, z * factor))
                        .filter(|&(_, z)| !is_zero(z))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn scale_real(&self, factor: f64) -> Operator {
        self.scale(C64::new(factor, 0.0))
    }

    pub fn checked_add(&self, rhs: &Operator) -> Result<Operator, LinalgError> {
        check_same(&self.basis, &rhs.basis)?;
        Ok(self.zip_with(rhs, |a, b| a + b))
    }

    pub fn checked_sub(&self, rhs: &Operator) -> Result<Operator, LinalgError> {
        check_same(&self.basis, &rhs.basis)?;
        Ok(self.zip_with(rhs, |a, b| a - b))
    }

    fn zip_with(&self, rhs: &Operator, f: impl Fn(C64, C64) -> C64 + Copy) -> Operator {
        Operator {
            basis: self.basis.clone(),
            dim: self.dim,
            rows: self
                .rows
                .iter()
                .zip(&rhs.rows)
                .map(|(a, b)| merge_rows(a, b, f))
                .collect(),
        }
    }

    pub fn checked_matmul(&self, rhs: &Operator) -> Result<Operator, LinalgError> {
        check_same(&self.basis, &rhs.basis)?;
        let n = self.dim;
        let mut acc = vec![C64::new(0.0, 0.0); n];
        let mut touched = vec![false; n];
        let mut cols: Vec<usize> = Vec::new();
        let mut rows = Vec::with_capacity(n);
        for row in &self.rows {
            for &(k, a) in row {
                for &(j, b) in &rhs.rows[k] {
                    if !touched[j] {
                        touched[j] = true;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            cols.sort_unstable();
            let mut out_row = Vec::with_capacity(cols.len());
            for &j in &cols {
                let z = acc[j];
                if !is_zero(z) {
                    out_row.push((j, z));
                }
                acc[j] = C64::new(0.0, 0.0);
                touched[j] = false;
            }
            cols.clear();
            rows.push(out_row);
        }
        Ok(Operator {
            basis: self.basis.clone(),
            dim: n,
            rows,
        })
    }

    pub fn commutator(&self, rhs: &Operator) -> Result<Operator, LinalgError> {
        self.checked_matmul(rhs)?
            .checked_sub(&rhs.checked_matmul(self)?)
    }

    /// `A†·self·A`, the Heisenberg-picture sandwich with `A = u`.
    pub fn conjugate_by(&self, u: &Operator) -> Result<Operator, LinalgError> {
        u.adjoint().checked_matmul(&self.checked_matmul(u)?)
    }

    pub fn apply(&self, ket: &Ket) -> Result<Ket, LinalgError> {
        check_same(&self.basis, &ket.basis)?;
        let amps = self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(j, a)| a * ket.amps[j]).sum())
            .collect();
        Ok(Ket {
            basis: self.basis.clone(),
            amps,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().map(|(_, _, z)| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Operator) -> Result<f64, LinalgError> {
        check_same(&self.basis, &other.basis)?;
        Ok(self
            .rows
            .iter()
            .zip(&other.rows)
            .flat_map(|(a, b)| merge_rows(a, b, |x, y| x - y))
            .map(|(_, z)| z.norm())
            .fold(0.0, f64::max))
    }

    /// max |M − M†|.
    pub fn hermiticity_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint()).expect("adjoint shares the basis")
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_deviation() <= tolerances::HERMITICITY
    }

    /// max |U†U − I|.
    pub fn unitarity_deviation(&self) -> f64 {
        let gram = self
            .adjoint()
            .checked_matmul(self)
            .expect("adjoint shares the basis");
        gram.max_abs_diff(&Operator::identity(self.basis.clone()))
            .expect("same basis")
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_deviation() <= tolerances::UNITARITY
    }
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        self.checked_add(rhs).expect("operator basis mismatch in +")
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        self.checked_sub(rhs).expect("operator basis mismatch in -")
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        self.checked_matmul(rhs).expect("operator basis mismatch in *")
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale_real(-1.0)
    }
}

/// Kronecker product; `a`'s index is the slow one.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    let nb = b.dim;
    let mut out = Operator::zeros(BasisTag::joint(&a.basis, &b.basis));
    for (i, arow) in a.rows.iter().enumerate() {
        for (k, brow) in b.rows.iter().enumerate() {
            let row = &mut out.rows[i * nb + k];
            for &(j, aij) in arow {
                row.extend(
                    brow.iter()
                        .map(|&(l, bkl)| (j * nb + l, aij * bkl))
                        .filter(|&(_, z)| !is_zero(z)),
                );
            }
        }
    }
    out
}

/// Complex state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    basis: BasisTag,
    amps: Vec<C64>,
}

impl Ket {
    pub fn new(basis: BasisTag, amps: Vec<C64>) -> Result<Self, LinalgError> {
        if amps.len() != basis.dim() {
            return Err(LinalgError::Shape {
                expected: basis.dim(),
                got: amps.len(),
            });
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Ket { basis, amps })
    }

    pub fn basis_state(basis: BasisTag, index: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
        amps[index] = C64::new(1.0, 0.0);
        Ket { basis, amps }
    }

    pub fn basis(&self) -> &BasisTag {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `1 − ‖ψ‖²`, the probability lost to truncation.
    pub fn norm_deficit(&self) -> f64 {
        1.0 - self.norm_sqr()
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &Ket) -> Result<C64, LinalgError> {
        check_same(&self.basis, &other.basis)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn scale(&self, factor: C64) -> Ket {
        Ket {
            basis: self.basis.clone(),
            amps: self.amps.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn checked_sub(&self, other: &Ket) -> Result<Ket, LinalgError> {
        check_same(&self.basis, &other.basis)?;
        Ok(Ket {
            basis: self.basis.clone(),
            amps: self.amps.iter().zip(&other.amps).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn tensor(&self, other: &Ket) -> Ket {
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        Ket {
            basis: BasisTag::joint(&self.basis, &other.basis),
            amps,
        }
    }
}

/// ⟨state|op|state⟩ (no renormalization).
pub fn expectation(op: &Operator, state: &Ket) -> Result<C64, LinalgError> {
    state.inner(&op.apply(state)?)
}

/// Real expectation of a Hermitian operator; the imaginary part is dropped
/// after checking it is at rounding level.
pub fn expectation_real(op: &Operator, state: &Ket) -> Result<f64, LinalgError> {
    let value = expectation(op, state)?;
    debug_assert!(
        value.im.abs() <= tolerances::EXPECTATION_IMAG * value.re.abs().max(1.0),
        "imaginary expectation {value}"
    );
    Ok(value.re)
}

struct SpectralBlock {
    indices: Vec<usize>,
    values: Vec<f64>,
    vectors: DMatrix<C64>,
}

/// Eigendecomposition of a Hermitian operator, computed block by block over
/// the connected components of its sparsity pattern.
pub struct Spectral {
    basis: BasisTag,
    blocks: Vec<SpectralBlock>,
}

fn components(op: &Operator) -> Vec<Vec<usize>> {
    let n = op.dim;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, j, _) in op.entries() {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri.max(rj)] = ri.min(rj);
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    groups
}

impl Spectral {
    pub fn new(op: &Operator) -> Result<Self, LinalgError> {
        let deviation = op.hermiticity_deviation();
        if deviation > tolerances::HERMITICITY {
            return Err(LinalgError::NotHermitian { deviation });
        }
        let blocks = components(op)
            .into_iter()
            .map(|indices| {
                let m = indices.len();
                if m == 1 {
                    let i = indices[0];
                    return SpectralBlock {
                        indices,
                        values: vec![op.get(i, i).re],
                        vectors: DMatrix::from_element(1, 1, C64::new(1.0, 0.0)),
                    };
                }
                let block = DMatrix::from_fn(m, m, |a, b| {
                    // symmetrize so rounding in the input cannot bias the solver
                    let upper = op.get(indices[a], indices[b]);
                    let lower = op.get(indices[b], indices[a]).conj();
                    (upper + lower) * 0.5
                });
                let eig = SymmetricEigen::new(block);
                SpectralBlock {
                    indices,
                    values: eig.eigenvalues.iter().copied().collect(),
                    vectors: eig.eigenvectors,
                }
            })
            .collect();
        Ok(Spectral {
            basis: op.basis.clone(),
            blocks,
        })
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self
            .blocks
            .iter()
            .flat_map(|b| b.values.iter().copied())
            .collect();
        values.sort_by(f64::total_cmp);
        values
    }

    /// Number of independent diagonal blocks found.
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// `V·f(Λ)·V†`.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> Operator {
        let mut out = Operator::zeros(self.basis.clone());
        for block in &self.blocks {
            let m = block.indices.len();
            let weights: Vec<C64> = block.values.iter().map(|&v| f(v)).collect();
            let v = &block.vectors;
            for a in 0..m {
                for b in 0..m {
                    let mut acc = C64::new(0.0, 0.0);
                    for k in 0..m {
                        acc += v[(a, k)] * weights[k] * v[(b, k)].conj();
                    }
                    out.set(block.indices[a], block.indices[b], acc);
                }
            }
        }
        out
    }

    pub fn map_real(&self, f: impl Fn(f64) -> f64) -> Operator {
        self.map(|v| C64::new(f(v), 0.0))
    }

    /// `exp(−iθ·H)`.
    pub fn evolution(&self, theta: f64) -> Operator {
        self.map(|v| C64::from_polar(1.0, -theta * v))
    }
}

/// Applies a real scalar function to a Hermitian operator.
pub fn hermitian_function(op: &Operator, f: impl Fn(f64) -> f64) -> Result<Operator, LinalgError> {
    Ok(Spectral::new(op)?.map_real(f))
}

/// Applies a complex-valued scalar function (e.g. a phase map) to a Hermitian operator.
pub fn hermitian_function_complex(
    op: &Operator,
    f: impl Fn(f64) -> C64,
) -> Result<Operator, LinalgError> {
    Ok(Spectral::new(op)?.map(f))
}

pub mod pauli {
    //! Pauli matrices on [`BasisTag::Spin`].
    use super::{BasisTag, Ket, Operator, C64};

    const O: C64 = C64::new(0.0, 0.0);
    const ONE: C64 = C64::new(1.0, 0.0);
    const I: C64 = C64::new(0.0, 1.0);

    fn from(entries: [C64; 4]) -> Operator {
        Operator::from_row_major(BasisTag::Spin, entries.to_vec()).expect("2x2")
    }

    pub fn identity() -> Operator {
        Operator::identity(BasisTag::Spin)
    }

    pub fn sigma_x() -> Operator {
        from([O, ONE, ONE, O])
    }

    pub fn sigma_y() -> Operator {
        from([O, -I, I, O])
    }

    pub fn sigma_z() -> Operator {
        from([ONE, O, O, -ONE])
    }

    /// The six Pauli eigenstates: σz±, σx±, σy±.
    pub fn eigenstates() -> [(&'static str, Ket); 6] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let ket = |a: C64, b: C64| Ket::new(BasisTag::Spin, vec![a, b]).expect("2 amps");
        [
            ("z+", ket(ONE, O)),
            ("z-", ket(O, ONE)),
            ("x+", ket(ONE * h, ONE * h)),
            ("x-", ket(ONE * h, -ONE * h)),
            ("y+", ket(ONE * h, I * h)),
            ("y-", ket(ONE * h, -I * h)),
        ]
    }

    /// (|0⟩ + i|1⟩)/√2, the +1 eigenstate of σy.
    pub fn sigma_y_plus() -> Ket {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Ket::new(BasisTag::Spin, vec![ONE * h, I * h]).expect("2 amps")
    }
}
