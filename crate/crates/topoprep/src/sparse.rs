//! Compressed-row complex operator used for every lattice Hamiltonian.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::linalg::{CMat, CVec, C64, ZERO};

const DROP: f64 = 1e-15;
const PAR_THRESHOLD: usize = 1 << 11;

#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    hermitian: bool,
}

impl SparseOperator {
    /// Duplicate entries are summed; explicit zeros are dropped.
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut rows: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); dim];
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r},{c}) outside dimension {dim}");
            *rows[r].entry(c).or_insert(ZERO) += v;
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v.norm() > DROP {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        let mut op = SparseOperator { dim, row_ptr, cols, vals, hermitian: false };
        op.hermitian = op.hermitian_defect() < 1e-12;
        op
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![C64::new(1.0, 0.0); dim])
    }

    pub fn zero(dim: usize) -> Self {
        SparseOperator { dim, row_ptr: vec![0; dim + 1], cols: vec![], vals: vec![], hermitian: true }
    }

    pub fn diagonal(d: &[C64]) -> Self {
        Self::from_triplets(d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    pub fn diagonal_real(d: &[f64]) -> Self {
        Self::from_triplets(d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, C64::new(v, 0.0))))
    }

    pub fn from_dense(m: &CMat) -> Self {
        let n = m.nrows();
        Self::from_triplets(n, (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (i, j, m[(i, j)])))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r).find(|&(cc, _)| cc == c).map(|(_, v)| v).unwrap_or(ZERO)
    }

    pub fn diagonal_entries(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// True when every stored entry sits on the diagonal.
    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, _)| r == c)
    }

    /// `y = A x`
    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        let body = |(r, out): (usize, &mut C64)| {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        };
        if self.dim >= PAR_THRESHOLD {
            y.par_iter_mut().enumerate().for_each(body);
        } else {
            y.iter_mut().enumerate().for_each(body);
        }
    }

    pub fn apply(&self, x: &CVec) -> CVec {
        let mut y = CVec::zeros(self.dim);
        self.apply_into(x.as_slice(), y.as_mut_slice());
        y
    }

    /// Applies the operator to every column of `m`.
    pub fn apply_matrix(&self, m: &CMat) -> CMat {
        let mut out = CMat::zeros(self.dim, m.ncols());
        for j in 0..m.ncols() {
            let col: CVec = m.column(j).into_owned();
            out.set_column(j, &self.apply(&col));
        }
        out
    }

    pub fn expectation(&self, x: &CVec) -> C64 {
        x.dotc(&self.apply(x))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out.hermitian = self.hermitian && s.im == 0.0;
        out
    }

    /// `self + s * other`
    pub fn add_scaled(&self, other: &Self, s: C64) -> Self {
        assert_eq!(self.dim, other.dim);
        Self::from_triplets(self.dim, self.triplets().chain(other.triplets().map(|(r, c, v)| (r, c, v * s))))
    }

    pub fn sum<'a, I: IntoIterator<Item = (f64, &'a SparseOperator)>>(dim: usize, terms: I) -> Self {
        let mut trips = Vec::new();
        for (w, op) in terms {
            assert_eq!(op.dim, dim);
            trips.extend(op.triplets().map(|(r, c, v)| (r, c, v * w)));
        }
        Self::from_triplets(dim, trips)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let rows: Vec<Vec<(usize, usize, C64)>> = (0..self.dim)
            .into_par_iter()
            .map(|r| {
                let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
                for (k, a) in self.row(r) {
                    for (c, b) in other.row(k) {
                        *acc.entry(c).or_insert(ZERO) += a * b;
                    }
                }
                acc.into_iter().map(|(c, v)| (r, c, v)).collect()
            })
            .collect();
        Self::from_triplets(self.dim, rows.into_iter().flatten())
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).add_scaled(&other.matmul(self), C64::new(-1.0, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.add_scaled(other, C64::new(-1.0, 0.0)).max_abs()
    }

    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (r, c, v) in self.triplets() {
            worst = worst.max((v - self.get(c, r).conj()).norm());
        }
        worst
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// Restriction `B^† A B` for an isometry `B` given as columns.
    pub fn compress(&self, basis: &CMat) -> CMat {
        basis.adjoint() * self.apply_matrix(basis)
    }

    /// Coordinate-list dump, one `row col re im` line per stored entry.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# dim {} nnz {}", self.dim, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {:.17e} {:.17e}", v.re, v.im)?;
        }
        Ok(())
    }

    /// Connected components of the sparsity graph. Each component spans an
    /// invariant subspace of the operator (and of anything sharing its pattern).
    pub fn components(ops: &[&SparseOperator]) -> Vec<Vec<usize>> {
        let dim = ops[0].dim;
        let mut parent: Vec<usize> = (0..dim).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for op in ops {
            for (r, c, _) in op.triplets() {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..dim {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(i);
        }
        groups.into_values().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, random_hermitian, random_state, MaxModulus};

    #[test]
    fn matches_dense_product() {
        let h = random_hermitian(7, 9);
        let s = SparseOperator::from_dense(&h);
        assert!(s.is_hermitian());
        let x = random_state(7, 4);
        assert!((s.apply(&x) - &h * &x).norm() < 1e-13);
        assert!((s.matmul(&s).to_dense() - &h * &h).max_mod() < 1e-12);
    }

    #[test]
    fn duplicates_are_summed() {
        let s = SparseOperator::from_triplets(2, [(0, 1, c(1.0, 0.0)), (0, 1, c(2.0, 0.0)), (1, 0, c(3.0, 0.0))]);
        assert_eq!(s.nnz(), 2);
        assert_eq!(s.get(0, 1), c(3.0, 0.0));
        assert!(s.is_hermitian());
    }

    #[test]
    fn components_split_blocks() {
        let s = SparseOperator::from_triplets(4, [(0, 2, c(1.0, 0.0)), (2, 0, c(1.0, 0.0)), (1, 1, c(1.0, 0.0))]);
        let comps = SparseOperator::components(&[&s]);
        assert_eq!(comps, vec![vec![0, 2], vec![1], vec![3]]);
    }
}
