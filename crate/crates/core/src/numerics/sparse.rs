use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::{DenseMatrix, Scalar};
use crate::error::{Error, Result};

/// Unweighted compressed sparse row structure: rows are sources, sorted
/// column indices are destinations.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Csr {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl Csr {
    /// Builds from an edge list, sorting and deduplicating. Returns the number
    /// of duplicates dropped. Callers must have bounds-checked the pairs.
    pub fn from_edges(n_rows: usize, n_cols: usize, edges: &[(usize, usize)]) -> (Self, usize) {
        let mut sorted = edges.to_vec();
        sorted.sort_unstable();
        let before = sorted.len();
        sorted.dedup();
        let dropped = before - sorted.len();

        let mut indptr = vec![0usize; n_rows + 1];
        for &(s, _) in &sorted {
            indptr[s + 1] += 1;
        }
        for i in 0..n_rows {
            indptr[i + 1] += indptr[i];
        }
        let indices = sorted.into_iter().map(|(_, d)| d).collect();
        (
            Self {
                n_rows,
                n_cols,
                indptr,
                indices,
            },
            dropped,
        )
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    pub fn contains(&self, src: usize, dst: usize) -> bool {
        src < self.n_rows && self.row(src).binary_search(&dst).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).iter().map(move |&j| (i, j)))
    }

    pub fn transpose(&self) -> Self {
        let mut indptr = vec![0usize; self.n_cols + 1];
        for &j in &self.indices {
            indptr[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            indptr[j + 1] += indptr[j];
        }
        let mut next = indptr.clone();
        let mut indices = vec![0usize; self.nnz()];
        // rows are visited in ascending order, so every transposed row ends up sorted
        for i in 0..self.n_rows {
            for &j in self.row(i) {
                indices[next[j]] = i;
                next[j] += 1;
            }
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            indptr,
            indices,
        }
    }
}

/// CSR with one weight per stored entry.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedCsr {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    weights: Vec<f64>,
}

impl WeightedCsr {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.weights[r])
    }

    fn transpose(&self) -> Self {
        let mut indptr = vec![0usize; self.n_cols + 1];
        for &j in &self.indices {
            indptr[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            indptr[j + 1] += indptr[j];
        }
        let mut next = indptr.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut weights = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            let (cols, ws) = self.row(i);
            for (&j, &w) in cols.iter().zip(ws) {
                indices[next[j]] = i;
                weights[next[j]] = w;
                next[j] += 1;
            }
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            indptr,
            indices,
            weights,
        }
    }

    /// `out = self * x`, one row at a time in fixed column order.
    pub fn spmm<T: Scalar>(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if x.rows() != self.n_cols {
            return Err(Error::Dimension(format!(
                "spmm: adjacency has {} columns, features have {} rows",
                self.n_cols,
                x.rows()
            )));
        }
        let d = x.cols();
        let mut out = DenseMatrix::zeros(self.n_rows, d);
        if d == 0 {
            return Ok(out);
        }
        out.data_mut()
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(i, out_row)| {
                let (cols, ws) = self.row(i);
                for (&j, &w) in cols.iter().zip(ws) {
                    let w = T::of(w);
                    for (o, &v) in out_row.iter_mut().zip(x.row(j)) {
                        *o = *o + w * v;
                    }
                }
            });
        Ok(out)
    }
}

/// Row-normalized adjacency of one relation: entry `(i, j)` holds `1/deg(i)`.
///
/// The transpose is materialized once so that the backward pass is also a
/// row-parallel gather.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency {
    forward: WeightedCsr,
    backward: WeightedCsr,
}

impl NormalizedAdjacency {
    pub fn new(csr: &Csr) -> Self {
        let mut weights = Vec::with_capacity(csr.nnz());
        for i in 0..csr.n_rows() {
            let deg = csr.degree(i);
            weights.extend(std::iter::repeat_n(1.0 / deg as f64, deg));
        }
        let forward = WeightedCsr {
            n_rows: csr.n_rows,
            n_cols: csr.n_cols,
            indptr: csr.indptr.clone(),
            indices: csr.indices.clone(),
            weights,
        };
        let backward = forward.transpose();
        Self { forward, backward }
    }

    /// Number of aggregating (destination-side) rows.
    pub fn n_rows(&self) -> usize {
        self.forward.n_rows
    }

    /// Number of source-side rows that are aggregated over.
    pub fn n_cols(&self) -> usize {
        self.forward.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.forward.nnz()
    }

    /// Per-row mean of the neighbour rows of `x`; zero for isolated rows.
    pub fn spmm<T: Scalar>(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.forward.spmm(x)
    }

    /// Adjoint of [`spmm`](Self::spmm): `Aᵀ g`.
    pub fn spmm_transposed<T: Scalar>(&self, g: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.backward.spmm(g)
    }
}

/// Standalone form of [`NormalizedAdjacency::spmm`].
pub fn spmm<T: Scalar>(a: &NormalizedAdjacency, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    a.spmm(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn from_edges_sorts_and_dedups() {
        let (csr, dropped) = Csr::from_edges(2, 3, &[(0, 2), (0, 1), (0, 2), (1, 0)]);
        assert_eq!(dropped, 1);
        assert_eq!(csr.row(0), &[1, 2]);
        assert_eq!(csr.row(1), &[0]);
        assert_eq!(csr.nnz(), 3);
    }

    #[test]
    fn transpose_round_trips() {
        let (csr, _) = Csr::from_edges(3, 4, &[(0, 3), (1, 0), (2, 0), (2, 3)]);
        let t = csr.transpose();
        assert_eq!(t.row(0), &[1, 2]);
        assert_eq!(t.row(3), &[0, 2]);
        assert_eq!(t.transpose(), csr);
    }

    #[test]
    fn identity_adjacency_is_identity() {
        let a = NormalizedAdjacency::new(&Csr::identity(3));
        let x = DenseMatrix::<f32>::from_fn(3, 2, |i, j| (i * 10 + j) as f32);
        assert_eq!(a.spmm(&x).unwrap(), x);
    }

    #[test]
    fn mean_of_two_rows() {
        let (csr, _) = Csr::from_edges(3, 3, &[(0, 1), (0, 2)]);
        let a = NormalizedAdjacency::new(&csr);
        let x = DenseMatrix::<f32>::from_rows(&[vec![9.0, 9.0], vec![2.0, 0.0], vec![0.0, 2.0]])
            .unwrap();
        let out = a.spmm(&x).unwrap();
        assert_eq!(out.row(0), &[1.0, 1.0]);
        assert_eq!(out.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn matches_dense_masked_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 20;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if rng.gen_bool(0.2) {
                    edges.push((i, j));
                }
            }
        }
        let (csr, _) = Csr::from_edges(n, n, &edges);
        let a = NormalizedAdjacency::new(&csr);
        let x = DenseMatrix::<f64>::from_fn(n, 4, |_, _| rng.gen_range(-2.0..2.0));
        let got = a.spmm(&x).unwrap();

        // dense oracle: mask matrix, divide by row sums
        let mut mask = vec![vec![0.0f64; n]; n];
        for &(i, j) in &edges {
            mask[i][j] = 1.0;
        }
        for i in 0..n {
            let deg: f64 = mask[i].iter().sum();
            for c in 0..4 {
                let s: f64 = (0..n).map(|j| mask[i][j] * x.get(j, c)).sum();
                let want = if deg > 0.0 { s / deg } else { 0.0 };
                assert!((got.get(i, c) - want).abs() < 1e-12);
            }
        }

        // adjoint identity: <A x, y> = <x, Aᵀ y>
        let y = DenseMatrix::<f64>::from_fn(n, 4, |_, _| rng.gen_range(-2.0..2.0));
        let lhs: f64 = got.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let aty = a.spmm_transposed(&y).unwrap();
        let rhs: f64 = x.data().iter().zip(aty.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn shape_mismatch() {
        let a = NormalizedAdjacency::new(&Csr::identity(3));
        assert!(a.spmm(&DenseMatrix::<f32>::zeros(2, 2)).is_err());
    }
}
