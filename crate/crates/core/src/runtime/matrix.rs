//! Dense and compressed-sparse-row matrices plus block-row partitioning.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::scalar::{Field, Real};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatrixError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("entry ({row}, {col}) outside a {rows}x{cols} matrix")]
    OutOfBounds { row: usize, col: usize, rows: usize, cols: usize },
}

/// Compressed sparse rows: `indptr[r]..indptr[r+1]` indexes the entries of row `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr<T> {
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage<T> {
    /// Row-major.
    Dense(Vec<T>),
    Sparse(Csr<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    storage: Storage<T>,
}

impl<T: Field> Matrix<T> {
    pub fn zeros_dense(rows: usize, cols: usize) -> Self {
        Self { rows, cols, storage: Storage::Dense(vec![T::zero(); rows * cols]) }
    }

    pub fn zeros_sparse(rows: usize, cols: usize) -> Self {
        Self { rows, cols, storage: Storage::Sparse(Csr { indptr: vec![0; rows + 1], indices: vec![], data: vec![] }) }
    }

    pub fn from_dense(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, MatrixError> {
        if data.len() != rows * cols {
            return Err(MatrixError::ShapeMismatch(format!("{} values for {rows}x{cols}", data.len())));
        }
        Ok(Self { rows, cols, storage: Storage::Dense(data) })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, storage: Storage::Dense(data) }
    }

    pub fn identity_sparse(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            storage: Storage::Sparse(Csr { indptr: (0..=n).collect(), indices: (0..n).collect(), data: vec![T::one(); n] }),
        }
    }

    /// Builds a CSR matrix from `(row, col, value)` triplets; duplicates are summed
    /// and exact zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, T)]) -> Result<Self, MatrixError> {
        let mut per_row: Vec<Vec<(usize, T)>> = vec![Vec::new(); rows];
        for (r, c, v) in triplets {
            if *r >= rows || *c >= cols {
                return Err(MatrixError::OutOfBounds { row: *r, col: *c, rows, cols });
            }
            per_row[*r].push((*c, v.clone()));
        }
        let mut csr = Csr { indptr: Vec::with_capacity(rows + 1), indices: vec![], data: vec![] };
        csr.indptr.push(0);
        for mut row in per_row {
            row.sort_by_key(|(c, _)| *c);
            let mut it = row.into_iter().peekable();
            while let Some((c, mut v)) = it.next() {
                while it.peek().is_some_and(|(c2, _)| *c2 == c) {
                    v = v + it.next().unwrap().1;
                }
                if !v.is_zero() {
                    csr.indices.push(c);
                    csr.data.push(v);
                }
            }
            csr.indptr.push(csr.indices.len());
        }
        Ok(Self { rows, cols, storage: Storage::Sparse(csr) })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn storage(&self) -> &Storage<T> {
        &self.storage
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    /// Number of structurally nonzero entries (exact zeros in dense storage excluded).
    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(d) => d.iter().filter(|v| !v.is_zero()).count(),
            Storage::Sparse(csr) => csr.data.iter().filter(|v| !v.is_zero()).count(),
        }
    }

    /// Fraction of zero entries.
    pub fn sparsity(&self) -> f64 {
        let total = self.rows * self.cols;
        if total == 0 {
            return 1.0;
        }
        1.0 - self.nnz() as f64 / total as f64
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        match &self.storage {
            Storage::Dense(d) => d[r * self.cols + c].clone(),
            Storage::Sparse(csr) => {
                let row = &csr.indices[csr.indptr[r]..csr.indptr[r + 1]];
                match row.binary_search(&c) {
                    Ok(p) => csr.data[csr.indptr[r] + p].clone(),
                    Err(_) => T::zero(),
                }
            }
        }
    }

    pub fn to_dense(&self) -> Self {
        match &self.storage {
            Storage::Dense(_) => self.clone(),
            Storage::Sparse(csr) => {
                let mut d = vec![T::zero(); self.rows * self.cols];
                for r in 0..self.rows {
                    for p in csr.indptr[r]..csr.indptr[r + 1] {
                        d[r * self.cols + csr.indices[p]] = csr.data[p].clone();
                    }
                }
                Self { rows: self.rows, cols: self.cols, storage: Storage::Dense(d) }
            }
        }
    }

    pub fn to_sparse(&self) -> Self {
        match &self.storage {
            Storage::Sparse(_) => self.clone(),
            Storage::Dense(d) => {
                let mut csr = Csr { indptr: vec![0], indices: vec![], data: vec![] };
                for r in 0..self.rows {
                    for c in 0..self.cols {
                        let v = &d[r * self.cols + c];
                        if !v.is_zero() {
                            csr.indices.push(c);
                            csr.data.push(v.clone());
                        }
                    }
                    csr.indptr.push(csr.indices.len());
                }
                Self { rows: self.rows, cols: self.cols, storage: Storage::Sparse(csr) }
            }
        }
    }

    /// Rows `start..end`, zero rows appended where `end` exceeds the matrix.
    pub fn row_block(&self, start: usize, end: usize) -> Self {
        let rows = end - start;
        let real_end = end.min(self.rows);
        match &self.storage {
            Storage::Dense(d) => {
                let mut out = vec![T::zero(); rows * self.cols];
                if start < real_end {
                    out[..(real_end - start) * self.cols].clone_from_slice(&d[start * self.cols..real_end * self.cols]);
                }
                Self { rows, cols: self.cols, storage: Storage::Dense(out) }
            }
            Storage::Sparse(csr) => {
                let mut indptr = Vec::with_capacity(rows + 1);
                indptr.push(0);
                let (lo, hi) = if start < real_end { (csr.indptr[start], csr.indptr[real_end]) } else { (0, 0) };
                for r in start..end {
                    let v = if r < real_end { csr.indptr[r + 1] - lo } else { hi - lo };
                    indptr.push(v);
                }
                Self {
                    rows,
                    cols: self.cols,
                    storage: Storage::Sparse(Csr {
                        indptr,
                        indices: csr.indices[lo..hi].to_vec(),
                        data: csr.data[lo..hi].to_vec(),
                    }),
                }
            }
        }
    }

    /// `sum_t coeff_t * M_t`; the result is sparse iff the first term is.
    pub fn linear_combination(terms: &[(&Matrix<T>, T)]) -> Result<Self, MatrixError> {
        let Some((first, _)) = terms.first() else {
            return Err(MatrixError::ShapeMismatch("empty linear combination".into()));
        };
        let (rows, cols) = (first.rows, first.cols);
        if let Some((m, _)) = terms.iter().find(|(m, _)| m.rows != rows || m.cols != cols) {
            return Err(MatrixError::ShapeMismatch(format!("{}x{} vs {rows}x{cols}", m.rows, m.cols)));
        }
        if !first.is_sparse() {
            let mut out = vec![T::zero(); rows * cols];
            for (m, k) in terms {
                match &m.storage {
                    Storage::Dense(d) => {
                        for (o, v) in out.iter_mut().zip(d) {
                            *o = o.clone() + k.clone() * v.clone();
                        }
                    }
                    Storage::Sparse(csr) => {
                        for r in 0..rows {
                            for p in csr.indptr[r]..csr.indptr[r + 1] {
                                let o = &mut out[r * cols + csr.indices[p]];
                                *o = o.clone() + k.clone() * csr.data[p].clone();
                            }
                        }
                    }
                }
            }
            return Ok(Self { rows, cols, storage: Storage::Dense(out) });
        }
        let sparse: Vec<_> = terms.iter().map(|(m, k)| (m.to_sparse(), k.clone())).collect();
        let mut acc = vec![T::zero(); cols];
        let mut touched = vec![false; cols];
        let mut cols_hit = Vec::new();
        let mut csr = Csr { indptr: Vec::with_capacity(rows + 1), indices: vec![], data: vec![] };
        csr.indptr.push(0);
        for r in 0..rows {
            for (m, k) in &sparse {
                let Storage::Sparse(s) = &m.storage else { unreachable!() };
                for p in s.indptr[r]..s.indptr[r + 1] {
                    let c = s.indices[p];
                    if !touched[c] {
                        touched[c] = true;
                        cols_hit.push(c);
                    }
                    acc[c] = acc[c].clone() + k.clone() * s.data[p].clone();
                }
            }
            cols_hit.sort_unstable();
            for &c in &cols_hit {
                let v = std::mem::replace(&mut acc[c], T::zero());
                touched[c] = false;
                if !v.is_zero() {
                    csr.indices.push(c);
                    csr.data.push(v);
                }
            }
            cols_hit.clear();
            csr.indptr.push(csr.indices.len());
        }
        Ok(Self { rows, cols, storage: Storage::Sparse(csr) })
    }

    /// `M x`, dispatching on storage.
    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>, MatrixError> {
        if x.len() != self.cols {
            return Err(MatrixError::ShapeMismatch(format!("vector of {} for {} columns", x.len(), self.cols)));
        }
        Ok(match &self.storage {
            Storage::Dense(d) => dense_matvec(d, self.cols, x),
            Storage::Sparse(csr) => sparse_matvec(csr, x),
        })
    }
}

fn dense_matvec<T: Field>(d: &[T], cols: usize, x: &[T]) -> Vec<T> {
    if cols == 0 {
        return vec![T::zero(); d.len()];
    }
    d.chunks(cols)
        .map(|row| row.iter().zip(x).fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone()))
        .collect()
}

/// CSR kernel: work proportional to `nnz + rows`.
pub fn sparse_matvec<T: Field>(m: &Csr<T>, x: &[T]) -> Vec<T> {
    m.indptr
        .windows(2)
        .map(|w| (w[0]..w[1]).fold(T::zero(), |acc, p| acc + m.data[p].clone() * x[m.indices[p]].clone()))
        .collect()
}

/// A matrix split into `delta` equal block-rows, the last zero-padded.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix<T> {
    rows: usize,
    cols: usize,
    block_rows: usize,
    blocks: Vec<Matrix<T>>,
}

impl<T: Field> BlockMatrix<T> {
    pub fn partition(a: &Matrix<T>, delta: usize) -> Result<Self, MatrixError> {
        if delta == 0 {
            return Err(MatrixError::ShapeMismatch("cannot split into zero blocks".into()));
        }
        let block_rows = a.rows.div_ceil(delta).max(1);
        let blocks = (0..delta).map(|j| a.row_block(j * block_rows, (j + 1) * block_rows)).collect();
        Ok(Self { rows: a.rows, cols: a.cols, block_rows, blocks })
    }

    /// Row count of the unpadded matrix.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn block_rows(&self) -> usize {
        self.block_rows
    }

    pub fn delta(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, j: usize) -> &Matrix<T> {
        &self.blocks[j]
    }

    pub fn blocks(&self) -> &[Matrix<T>] {
        &self.blocks
    }

    /// `u_j = A_j x` for every block.
    pub fn block_products(&self, x: &[T]) -> Result<Vec<Vec<T>>, MatrixError> {
        self.blocks.iter().map(|b| b.matvec(x)).collect()
    }
}

/// Concatenates block results and strips padding down to `rows`.
pub fn concat_blocks<T: Clone>(blocks: &[Vec<T>], rows: usize) -> Vec<T> {
    let mut out: Vec<T> = blocks.iter().flatten().cloned().collect();
    out.truncate(rows);
    out
}

/// Number of nonzeros in an `n x n` matrix with half-bandwidth `b`.
pub fn banded_nnz(n: usize, b: usize) -> usize {
    n * (2 * b + 1) - b * (b + 1)
}

/// Smallest half-bandwidth whose density reaches `1 - sparsity`.
pub fn band_for_sparsity(n: usize, sparsity: f64) -> usize {
    let target = (1.0 - sparsity) * (n * n) as f64;
    (0..n).find(|&b| banded_nnz(n, b) as f64 >= target).unwrap_or(n - 1)
}

/// `n x n` CSR matrix with i.i.d. standard normal entries on diagonals `-b..=b`.
pub fn gen_banded<T: Real>(n: usize, b: usize, seed: u64) -> Matrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csr = Csr { indptr: Vec::with_capacity(n + 1), indices: vec![], data: vec![] };
    csr.indptr.push(0);
    for r in 0..n {
        for c in r.saturating_sub(b)..=(r + b).min(n - 1) {
            let v: f64 = StandardNormal.sample(&mut rng);
            let v = if v == 0.0 { f64::MIN_POSITIVE } else { v };
            csr.indices.push(c);
            csr.data.push(T::from_f64(v).unwrap());
        }
        csr.indptr.push(csr.indices.len());
    }
    Matrix { rows: n, cols: n, storage: Storage::Sparse(csr) }
}

/// Dense `rows x cols` matrix with i.i.d. standard normal entries.
pub fn gen_dense<T: Real>(rows: usize, cols: usize, seed: u64) -> Matrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols)
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            T::from_f64(v).unwrap()
        })
        .collect();
    Matrix { rows, cols, storage: Storage::Dense(data) }
}

pub fn gen_vector<T: Real>(len: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            T::from_f64(v).unwrap()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Matrix<f64> {
        Matrix::from_dense(3, 3, vec![1.0, 0.0, 2.0, 0.0, 0.0, 0.0, -1.0, 3.0, 0.0]).unwrap()
    }

    #[test]
    fn dense_sparse_agree() {
        let d = small();
        let s = d.to_sparse();
        assert_eq!(s.nnz(), 4);
        assert_eq!(s.to_dense(), d);
        let x = [1.0, 2.0, 3.0];
        assert_eq!(d.matvec(&x).unwrap(), s.matvec(&x).unwrap());
        assert_eq!(d.matvec(&x).unwrap(), vec![7.0, 0.0, 5.0]);
        assert_eq!(s.get(2, 1), 3.0);
        assert_eq!(s.get(1, 1), 0.0);
    }

    #[test]
    fn identity_and_zero_kernels() {
        let x = vec![0.5, -2.0, 4.0];
        assert_eq!(Matrix::<f64>::identity_sparse(3).matvec(&x).unwrap(), x);
        assert_eq!(Matrix::<f64>::zeros_sparse(2, 3).matvec(&x).unwrap(), vec![0.0, 0.0]);
        assert!(Matrix::<f64>::zeros_sparse(2, 3).matvec(&x[..2]).is_err());
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = Matrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, 1.0), (1, 0, -1.0)]).unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.nnz(), 1);
        assert!(Matrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn row_block_pads() {
        for m in [small(), small().to_sparse()] {
            let b = m.row_block(2, 4);
            assert_eq!(b.rows(), 2);
            assert_eq!(b.to_dense(), Matrix::from_dense(2, 3, vec![-1.0, 3.0, 0.0, 0.0, 0.0, 0.0]).unwrap());
        }
    }

    #[test]
    fn partition_pads_last_block() {
        let a = gen_dense::<f64>(7, 2, 1);
        let p = BlockMatrix::partition(&a, 3).unwrap();
        assert_eq!(p.block_rows(), 3);
        assert_eq!(p.block(2).rows(), 3);
        assert_eq!(p.block(2).get(2, 0), 0.0);
        let x = [1.0, -1.0];
        let u = p.block_products(&x).unwrap();
        assert_eq!(concat_blocks(&u, 7), a.matvec(&x).unwrap());
    }

    #[test]
    fn linear_combination_superposition() {
        let a = gen_banded::<f64>(40, 3, 5);
        let p = BlockMatrix::partition(&a, 4).unwrap();
        let c = Matrix::linear_combination(&[(p.block(0), 1.0), (p.block(2), -2.0)]).unwrap();
        assert!(c.nnz() <= p.block(0).nnz() + p.block(2).nnz());
        let x = gen_vector::<f64>(40, 9);
        let direct: Vec<f64> = p.block(0)
            .matvec(&x)
            .unwrap()
            .iter()
            .zip(p.block(2).matvec(&x).unwrap())
            .map(|(a, b)| a - 2.0 * b)
            .collect();
        for (u, v) in c.matvec(&x).unwrap().iter().zip(&direct) {
            assert!((u - v).abs() < 1e-12);
        }
        let dense = Matrix::linear_combination(&[(&p.block(0).to_dense(), 1.0), (p.block(2), -2.0)]).unwrap();
        assert_eq!(dense, c.to_dense());
    }

    #[test]
    fn banded_counts() {
        assert_eq!(gen_banded::<f64>(10, 0, 0).nnz(), 10);
        assert!((gen_banded::<f64>(10, 0, 0).sparsity() - 0.9).abs() < 1e-12);
        for b in [1, 4, 9] {
            assert_eq!(gen_banded::<f64>(10, b, 3).nnz(), banded_nnz(10, b));
        }
        assert_eq!(gen_banded::<f64>(10, 9, 3).sparsity(), 0.0);
        let b = band_for_sparsity(12000, 0.9);
        assert!((600..=620).contains(&b), "b = {b}");
    }
}
