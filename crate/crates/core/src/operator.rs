//! Symmetric linear operators.
//!
//! Everything downstream (SLQ, the quadratic lab, the toy networks) talks to a
//! matrix through [`SymmetricOperator`]: a dimension and a matrix-vector
//! product. The dense and block-diagonal realizations here are small enough
//! to be eigendecomposed exactly, which is what the tests lean on.

use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::eigen;
use crate::error::{Error, Result};

/// Matrix-free access to a real symmetric matrix.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;

    /// Writes `A x` into `y`. Both slices have length `dim()`.
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }
}

impl<T: SymmetricOperator + ?Sized> SymmetricOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply_into(x, y)
    }
}

impl<T: SymmetricOperator + ?Sized + Send> SymmetricOperator for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply_into(x, y)
    }
}

/// Contiguous partition of `0..dim` into blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidArgument("partition has no blocks".into()));
        }
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!("block {i} has size 0")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &s in &sizes {
            acc += s;
            offsets.push(acc);
        }
        Ok(Self { sizes, offsets })
    }

    /// `blocks` equal blocks of size `size`.
    pub fn uniform(blocks: usize, size: usize) -> Result<Self> {
        Self::new(vec![size; blocks])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn range(&self, block: usize) -> Range<usize> {
        self.offsets[block]..self.offsets[block + 1]
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.len()).map(|l| self.range(l))
    }

    /// Index of the block containing coordinate `i`.
    pub fn block_of(&self, i: usize) -> usize {
        match self.offsets.binary_search(&i) {
            Ok(l) => l,
            Err(l) => l - 1,
        }
    }
}

/// Dense symmetric matrix in packed upper-triangular storage.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymmetric {
    n: usize,
    // row-major upper triangle: (0,0) (0,1) .. (0,n-1) (1,1) ..
    upper: Vec<f64>,
}

impl DenseSymmetric {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            upper: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds from `f(i, j)` evaluated on the upper triangle only.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                upper.push(f(i, j));
            }
        }
        Self { n, upper }
    }

    /// Builds from full rows, rejecting asymmetry beyond `tol` (absolute,
    /// scaled by the largest entry). The upper triangle wins.
    pub fn from_rows(rows: &[Vec<f64>], tol: f64) -> Result<Self> {
        let n = rows.len();
        let mut scale: f64 = 0.0;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite(i * n + j));
                }
                scale = scale.max(v.abs());
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let defect = (rows[i][j] - rows[j][i]).abs();
                if defect > tol * scale.max(1.0) {
                    return Err(Error::NotSymmetric {
                        row: i,
                        col: j,
                        defect,
                    });
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    /// `Q diag(lambda) Qᵀ` for a square `q` given by rows.
    pub fn from_eigen(q: &[Vec<f64>], lambda: &[f64]) -> Self {
        let n = lambda.len();
        Self::from_fn(n, |i, j| {
            (0..n).map(|k| q[i][k] * lambda[k] * q[j][k]).sum()
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // offset of row i in packed upper storage
        i * self.n - i * (i + 1) / 2 + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j);
        self.upper[k] = v;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            upper: self.upper.iter().map(|v| v * c).collect(),
        }
    }

    /// Principal sub-matrix on `range`.
    pub fn principal(&self, range: Range<usize>) -> Self {
        let start = range.start;
        Self::from_fn(range.len(), |i, j| self.get(start + i, start + j))
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.upper.iter().all(|v| v.is_finite())
    }

    /// Random symmetric matrix with standard normal upper-triangle entries.
    pub fn random_gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self::from_fn(n, |_, _| rng.sample(StandardNormal))
    }
}

impl SymmetricOperator for DenseSymmetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(x.len(), n);
        y.iter_mut().for_each(|v| *v = 0.0);
        let mut k = 0;
        for i in 0..n {
            let xi = x[i];
            let mut acc = self.upper[k] * xi;
            k += 1;
            for j in (i + 1)..n {
                let a = self.upper[k];
                acc += a * x[j];
                y[j] += a * xi;
                k += 1;
            }
            y[i] += acc;
        }
    }
}

/// Diagonal operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagonal(pub Vec<f64>);

impl SymmetricOperator for Diagonal {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.0) {
            *yi = d * xi;
        }
    }
}

/// `diag(H_1, ..., H_L)` with dense symmetric blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonal {
    blocks: Vec<DenseSymmetric>,
    partition: BlockPartition,
}

impl BlockDiagonal {
    pub fn new(blocks: Vec<DenseSymmetric>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("block list is empty".into()));
        }
        let partition = BlockPartition::new(blocks.iter().map(|b| b.dim()).collect())?;
        Ok(Self { blocks, partition })
    }

    pub fn blocks(&self) -> &[DenseSymmetric] {
        &self.blocks
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn to_dense(&self) -> DenseSymmetric {
        let n = self.partition.dim();
        let mut m = DenseSymmetric::zeros(n);
        for (block, range) in self.blocks.iter().zip(self.partition.ranges()) {
            for i in 0..block.dim() {
                for j in i..block.dim() {
                    m.set(range.start + i, range.start + j, block.get(i, j));
                }
            }
        }
        m
    }

    /// Sorted (descending) union of the per-block spectra.
    pub fn exact_eigenvalues(&self) -> Result<Vec<f64>> {
        let mut all = Vec::with_capacity(self.partition.dim());
        for b in &self.blocks {
            all.extend(exact_eigenvalues(b)?);
        }
        all.sort_by(|a, b| b.total_cmp(a));
        Ok(all)
    }
}

impl SymmetricOperator for BlockDiagonal {
    fn dim(&self) -> usize {
        self.partition.dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (block, range) in self.blocks.iter().zip(self.partition.ranges()) {
            block.apply_into(&x[range.clone()], &mut y[range]);
        }
    }
}

/// Principal block `[A]_l` of an operator, accessed through the parent's
/// matrix-vector product with zero padding outside the block.
pub struct PrincipalBlock<'a, Op: SymmetricOperator + ?Sized> {
    parent: &'a Op,
    range: Range<usize>,
}

impl<'a, Op: SymmetricOperator + ?Sized> PrincipalBlock<'a, Op> {
    pub fn new(parent: &'a Op, range: Range<usize>) -> Result<Self> {
        if range.is_empty() {
            return Err(Error::InvalidArgument("block of size 0".into()));
        }
        if range.end > parent.dim() {
            return Err(Error::DimensionMismatch {
                expected: parent.dim(),
                got: range.end,
            });
        }
        Ok(Self { parent, range })
    }
}

impl<Op: SymmetricOperator + ?Sized> SymmetricOperator for PrincipalBlock<'_, Op> {
    fn dim(&self) -> usize {
        self.range.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.parent.dim();
        let mut full = vec![0.0; n];
        full[self.range.clone()].copy_from_slice(x);
        let out = self.parent.apply(&full);
        y.copy_from_slice(&out[self.range.clone()]);
    }
}

/// Largest observed `|<u, A v> - <v, A u>| / (‖A u‖ ‖v‖)` over random unit
/// pairs.
pub fn symmetry_defect<Op, R>(op: &Op, trials: usize, rng: &mut R) -> f64
where
    Op: SymmetricOperator + ?Sized,
    R: Rng + ?Sized,
{
    let n = op.dim();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let u = random_unit(n, rng);
        let v = random_unit(n, rng);
        let au = op.apply(&u);
        let av = op.apply(&v);
        let lhs = dot(&u, &av);
        let rhs = dot(&v, &au);
        let scale = norm(&au) * norm(&v);
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    worst
}

/// Eigenvalues of a dense symmetric matrix, sorted descending.
pub fn exact_eigenvalues(m: &DenseSymmetric) -> Result<Vec<f64>> {
    if m.dim() > 2000 {
        return Err(Error::InvalidArgument(format!(
            "exact eigendecomposition is limited to dim <= 2000, got {}",
            m.dim()
        )));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite(0));
    }
    let mut values = eigen::symmetric_eigenvalues(&m.to_rows());
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// `λ_1 / λ_d` of a descending eigenvalue list.
pub fn condition_number(eigs: &[f64]) -> Result<f64> {
    let (first, last) = match (eigs.first(), eigs.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::InvalidArgument("empty spectrum".into())),
    };
    let max = eigs.iter().cloned().fold(first, f64::max);
    let min = eigs.iter().cloned().fold(last, f64::min);
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite(min));
    }
    Ok(max / min)
}

/// Orthogonal factor of the QR decomposition of an `n x n` standard Gaussian
/// matrix, with the sign convention `diag(R) > 0` (Haar distributed).
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    // columns of the Gaussian matrix, orthonormalized by modified Gram-Schmidt
    // run twice for stability; the positive-diagonal convention is implicit.
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut c: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for q in &cols {
                let p = dot(q, &c);
                axpy(-p, q, &mut c);
            }
        }
        let nrm = norm(&c);
        if nrm < 1e-10 {
            continue;
        }
        c.iter_mut().for_each(|v| *v /= nrm);
        cols.push(c);
    }
    // rows of Q from its columns
    (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

pub(crate) fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let nrm = norm(&v);
    v.iter_mut().for_each(|x| *x /= nrm);
    v
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
