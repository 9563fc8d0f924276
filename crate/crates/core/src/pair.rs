use std::ops::{Index, IndexMut};

use num_traits::Zero;

/// Dense `n x n` matrix indexed by an ordered user pair `(k, l)`.
///
/// Used for the decoding-order indicator and everything that mirrors its
/// shape (relaxation variables, dual multipliers). The diagonal is carried
/// but never read by the model.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Copy + Zero> PairMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                data.push(f(k, l));
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn map<U: Copy + Zero>(&self, mut f: impl FnMut(T) -> U) -> PairMatrix<U> {
        PairMatrix {
            n: self.n,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Off-diagonal ordered pairs `(k, l)`, `k != l`, in row-major order.
    pub fn off_diagonal(&self) -> impl Iterator<Item = (usize, usize)> {
        let n = self.n;
        (0..n).flat_map(move |k| (0..n).filter(move |&l| l != k).map(move |l| (k, l)))
    }
}

impl<T> Index<(usize, usize)> for PairMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (k, l): (usize, usize)) -> &T {
        debug_assert!(k < self.n && l < self.n);
        &self.data[k * self.n + l]
    }
}

impl<T> IndexMut<(usize, usize)> for PairMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (k, l): (usize, usize)) -> &mut T {
        debug_assert!(k < self.n && l < self.n);
        &mut self.data[k * self.n + l]
    }
}

/// Unordered pairs `(k, l)` with `l < k`, row-major.
pub fn lower_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(|k| (0..k).map(move |l| (k, l)))
}
