//! Flat tori `T^d = R^d / Z^d` for `d` in {1, 2, 3}: points, lifts and Haar sampling.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{zero3, Coords, Real};

pub const MAX_DIM: usize = 3;

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::Dimension(dim))
    }
}

/// Reduce a real number into `[0, 1)`.
#[inline]
pub fn frac<T: Real>(v: T) -> T {
    let r = v - v.floor();
    // tiny negative inputs round up to exactly 1
    if r >= T::one() {
        T::zero()
    } else {
        r
    }
}

/// Shortest representative of `v` modulo 1, in `(-1/2, 1/2]`.
#[inline]
pub fn centered_frac<T: Real>(v: T) -> T {
    let half = T::lit(0.5);
    let r = v - (v - half).ceil();
    if r <= -half {
        r + T::one()
    } else {
        r
    }
}

/// A point of the torus with every coordinate in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint<T> {
    coords: Coords<T>,
    dim: usize,
}

impl<T: Real> TorusPoint<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[T] {
        &self.coords[..self.dim]
    }

    /// Padded storage; entries past `dim` are zero.
    pub fn raw(&self) -> &Coords<T> {
        &self.coords
    }

    /// Builds a point from coordinates already known to lie in `[0, 1)`.
    pub(crate) fn from_reduced(coords: Coords<T>, dim: usize) -> Self {
        TorusPoint { coords, dim }
    }

    pub fn wrap(raw: &[T]) -> Result<Self> {
        wrap(raw)
    }
}

/// Reduce each coordinate of `raw` modulo 1 into `[0, 1)`.
pub fn wrap<T: Real>(raw: &[T]) -> Result<TorusPoint<T>> {
    check_dim(raw.len())?;
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(raw.iter().map(|v| v.as_f64()).collect()));
    }
    let mut coords = zero3();
    for (c, &v) in coords.iter_mut().zip(raw) {
        *c = frac(v);
    }
    Ok(TorusPoint {
        coords,
        dim: raw.len(),
    })
}

/// Lifted one-step displacement `Phi(x) - x` in the universal cover.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Displacement<T> {
    delta: Coords<T>,
    dim: usize,
}

impl<T: Real> Displacement<T> {
    pub fn new(delta: &[T]) -> Result<Self> {
        check_dim(delta.len())?;
        let mut d = zero3();
        d[..delta.len()].copy_from_slice(delta);
        Ok(Displacement {
            delta: d,
            dim: delta.len(),
        })
    }

    pub(crate) fn from_raw(delta: Coords<T>, dim: usize) -> Self {
        Displacement { delta, dim }
    }

    pub fn zero(dim: usize) -> Self {
        Displacement {
            delta: zero3(),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> &[T] {
        &self.delta[..self.dim]
    }

    pub fn raw(&self) -> &Coords<T> {
        &self.delta
    }

    /// Componentwise shortest representative in `(-1/2, 1/2]`.
    pub fn centered_frac(&self) -> Coords<T> {
        let mut out = zero3();
        for j in 0..self.dim {
            out[j] = centered_frac(self.delta[j]);
        }
        out
    }

    /// Image point `wrap(x + delta)`.
    pub fn apply(&self, x: &TorusPoint<T>) -> TorusPoint<T> {
        let mut c = zero3();
        for j in 0..self.dim {
            c[j] = frac(x.coords[j] + self.delta[j]);
        }
        TorusPoint::from_reduced(c, self.dim)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    #[default]
    MonteCarlo,
    Grid,
}

/// Haar sample set on `T^dim`.
///
/// Point `i` is a pure function of `(seed, i)`: Monte Carlo draws come from a
/// ChaCha8 stream positioned at word `2 * dim * i`, so any sub-range can be
/// generated independently of the others.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HaarSampler {
    dim: usize,
    n: usize,
    seed: u64,
    strategy: SamplingStrategy,
    side: usize,
}

impl HaarSampler {
    pub fn new(dim: usize, n: usize, seed: u64, strategy: SamplingStrategy) -> Result<Self> {
        check_dim(dim)?;
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let side = match strategy {
            SamplingStrategy::MonteCarlo => 0,
            SamplingStrategy::Grid => grid_side(n, dim)?,
        };
        Ok(HaarSampler {
            dim,
            n,
            seed,
            strategy,
            side,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn strategy(&self) -> SamplingStrategy {
        self.strategy
    }

    pub fn points_in<T: Real>(&self, range: Range<usize>) -> Vec<TorusPoint<T>> {
        let range = range.start.min(self.n)..range.end.min(self.n);
        let mut out = Vec::with_capacity(range.len());
        match self.strategy {
            SamplingStrategy::MonteCarlo => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_word_pos(2 * (self.dim as u128) * (range.start as u128));
                for _ in range {
                    let mut c = zero3();
                    for v in c.iter_mut().take(self.dim) {
                        // keep f32 draws strictly below one
                        *v = frac(T::lit(rng.random::<f64>()));
                    }
                    out.push(TorusPoint::from_reduced(c, self.dim));
                }
            }
            SamplingStrategy::Grid => {
                let m = self.side;
                let inv = 1.0 / m as f64;
                for i in range {
                    let mut c = zero3();
                    let mut rest = i;
                    for j in (0..self.dim).rev() {
                        let idx = rest % m;
                        rest /= m;
                        c[j] = T::lit((idx as f64 + 0.5) * inv);
                    }
                    out.push(TorusPoint::from_reduced(c, self.dim));
                }
            }
        }
        out
    }

    pub fn point<T: Real>(&self, i: usize) -> TorusPoint<T> {
        self.points_in(i..i + 1)[0]
    }

    pub fn all<T: Real>(&self) -> Vec<TorusPoint<T>> {
        self.points_in(0..self.n)
    }
}

/// All `n` Haar samples for `(dim, seed, strategy)`.
pub fn sample_haar<T: Real>(
    dim: usize,
    n: usize,
    seed: u64,
    strategy: SamplingStrategy,
) -> Result<Vec<TorusPoint<T>>> {
    Ok(HaarSampler::new(dim, n, seed, strategy)?.all())
}

fn grid_side(n: usize, dim: usize) -> Result<usize> {
    let pow = |m: usize| m.checked_pow(dim as u32).unwrap_or(usize::MAX);
    let mut m = (n as f64).powf(1.0 / dim as f64).round() as usize;
    while m > 1 && pow(m) > n {
        m -= 1;
    }
    while pow(m + 1) <= n {
        m += 1;
    }
    if pow(m) == n {
        Ok(m)
    } else {
        Err(Error::GridCount {
            n,
            dim,
            below: pow(m),
            above: pow(m + 1),
        })
    }
}
