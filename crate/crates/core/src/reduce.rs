//! Thread-count independent reductions.
//!
//! Work is split into fixed-size chunks of sample indices; each chunk is
//! reduced sequentially and the chunk results are merged along a binary tree
//! whose shape depends only on the number of chunks.

use std::ops::Range;

use rayon::prelude::*;

use crate::scalar::Real;

pub const CHUNK: usize = 1024;

pub fn chunk_ranges(n: usize) -> Vec<Range<usize>> {
    (0..n.div_ceil(CHUNK))
        .map(|c| c * CHUNK..((c + 1) * CHUNK).min(n))
        .collect()
}

/// Maps every chunk in parallel, preserving chunk order.
pub fn map_chunks<S, F>(n: usize, f: F) -> Vec<S>
where
    S: Send,
    F: Fn(Range<usize>) -> S + Sync + Send,
{
    chunk_ranges(n).into_par_iter().map(f).collect()
}

/// Fixed-shape pairwise reduction.
pub fn tree_reduce<S, F>(items: &[S], merge: &F) -> Option<S>
where
    S: Clone,
    F: Fn(&S, &S) -> S,
{
    match items.len() {
        0 => None,
        1 => Some(items[0].clone()),
        len => {
            let (l, r) = items.split_at(len / 2);
            let a = tree_reduce(l, merge)?;
            let b = tree_reduce(r, merge)?;
            Some(merge(&a, &b))
        }
    }
}

/// Pairwise sum of a slice.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    if xs.len() <= 8 {
        return xs.iter().copied().sum();
    }
    let (l, r) = xs.split_at(xs.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}

/// Running count, mean and centred second moment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments<T> {
    pub n: usize,
    pub mean: T,
    pub m2: T,
}

impl<T: Real> Default for Moments<T> {
    fn default() -> Self {
        Moments {
            n: 0,
            mean: T::zero(),
            m2: T::zero(),
        }
    }
}

impl<T: Real> Moments<T> {
    #[inline]
    pub fn push(&mut self, x: T) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / T::lit(self.n as f64);
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let (na, nb, nt) = (
            T::lit(self.n as f64),
            T::lit(other.n as f64),
            T::lit(n as f64),
        );
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * nb / nt,
            m2: self.m2 + other.m2 + d * d * na * nb / nt,
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> T {
        if self.n < 2 {
            T::zero()
        } else {
            (self.m2 / T::lit((self.n - 1) as f64)).max(T::zero())
        }
    }

    pub fn std_dev(&self) -> T {
        self.variance().sqrt()
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> T {
        if self.n == 0 {
            T::zero()
        } else {
            self.std_dev() / T::lit(self.n as f64).sqrt()
        }
    }

    pub fn from_slice(xs: &[T]) -> Self {
        let mut m = Moments::default();
        for &x in xs {
            m.push(x);
        }
        m
    }
}
