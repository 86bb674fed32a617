//! Fourier observable families `f_k(x) = exp(2 pi i k.x)` and their one-step
//! discrepancies.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Coords, Real};
use crate::torus::{check_dim, Displacement};

/// Nonzero integer wavevector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FourierIndex {
    k: [i64; 3],
    dim: usize,
}

impl FourierIndex {
    pub fn new(k: &[i64]) -> Result<Self> {
        check_dim(k.len())?;
        if k.iter().all(|&v| v == 0) {
            return Err(Error::InvalidParameter("Fourier index must be nonzero".into()));
        }
        let mut kk = [0; 3];
        kk[..k.len()].copy_from_slice(k);
        Ok(FourierIndex { k: kk, dim: k.len() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[i64] {
        &self.k[..self.dim]
    }

    pub fn raw(&self) -> &[i64; 3] {
        &self.k
    }

    pub fn neg(&self) -> Self {
        FourierIndex {
            k: self.k.map(|v| -v),
            dim: self.dim,
        }
    }

    pub fn sup_norm(&self) -> i64 {
        self.k.iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    pub fn norm_sq(&self) -> i64 {
        self.k.iter().map(|v| v * v).sum()
    }

    /// First nonzero component is positive.
    fn is_positive(&self) -> bool {
        self.k.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0)
    }

    /// `k . v` over the torus dimension.
    #[inline]
    pub fn dot<T: Real>(&self, v: &Coords<T>) -> T {
        let mut s = T::zero();
        for j in 0..self.dim {
            s += T::lit(self.k[j] as f64) * v[j];
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CutoffNorm {
    #[default]
    SupNorm,
    Euclidean,
}

/// Finite set of Fourier modes, stored folded when `+k` and `-k` both belong
/// to the set (one representative, weight 2).
#[derive(Clone, Debug, PartialEq)]
pub struct FourierFamily {
    dim: usize,
    terms: Vec<(FourierIndex, u8)>,
    size: usize,
}

impl FourierFamily {
    /// `F_K = { f_k : 0 < |k| <= K }` in the chosen norm.
    pub fn cutoff(dim: usize, k_max: u32, norm: CutoffNorm, half_lattice: bool) -> Result<Self> {
        Self::cutoff_filtered(dim, k_max, norm, half_lattice, |_| true)
    }

    /// Cutoff family restricted to modes satisfying `keep`.
    pub fn cutoff_filtered<P>(
        dim: usize,
        k_max: u32,
        norm: CutoffNorm,
        half_lattice: bool,
        keep: P,
    ) -> Result<Self>
    where
        P: Fn(&FourierIndex) -> bool,
    {
        check_dim(dim)?;
        if k_max == 0 {
            return Err(Error::InvalidParameter("cutoff K must be >= 1".into()));
        }
        let kk = k_max as i64;
        let mut modes = Vec::new();
        let mut k = vec![-kk; dim];
        loop {
            if k.iter().any(|&v| v != 0) {
                let idx = FourierIndex::new(&k)?;
                let inside = match norm {
                    CutoffNorm::SupNorm => true,
                    CutoffNorm::Euclidean => idx.norm_sq() <= kk * kk,
                };
                if inside && keep(&idx) {
                    modes.push(idx);
                }
            }
            // odometer increment
            let mut j = dim;
            loop {
                if j == 0 {
                    return Self::assemble(dim, modes, half_lattice);
                }
                j -= 1;
                if k[j] < kk {
                    k[j] += 1;
                    break;
                }
                k[j] = -kk;
            }
        }
    }

    /// Exactly the listed modes, each with weight one.
    pub fn explicit(modes: &[FourierIndex]) -> Result<Self> {
        let dim = modes
            .first()
            .map(|m| m.dim())
            .ok_or_else(|| Error::InvalidParameter("observable family is empty".into()))?;
        if let Some(m) = modes.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: m.dim(),
            });
        }
        Self::assemble(dim, modes.to_vec(), false)
    }

    pub fn single(k: &[i64]) -> Result<Self> {
        Self::explicit(&[FourierIndex::new(k)?])
    }

    fn assemble(dim: usize, modes: Vec<FourierIndex>, half_lattice: bool) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidParameter("observable family is empty".into()));
        }
        let size = modes.len();
        let terms = if half_lattice {
            let set: BTreeSet<FourierIndex> = modes.iter().copied().collect();
            modes
                .into_iter()
                .filter_map(|k| {
                    let paired = set.contains(&k.neg());
                    match (paired, k.is_positive()) {
                        (true, true) => Some((k, 2)),
                        (true, false) => None,
                        (false, _) => Some((k, 1)),
                    }
                })
                .collect()
        } else {
            modes.into_iter().map(|k| (k, 1)).collect()
        };
        Ok(FourierFamily { dim, terms, size })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of modes `|F|` in the unfolded family.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Stored (possibly folded) terms with their multiplicities.
    pub fn terms(&self) -> &[(FourierIndex, u8)] {
        &self.terms
    }

    /// Every mode of the family, unfolded.
    pub fn modes(&self) -> Vec<FourierIndex> {
        let mut out = Vec::with_capacity(self.size);
        for (k, w) in &self.terms {
            out.push(*k);
            if *w == 2 {
                out.push(k.neg());
            }
        }
        out
    }

    pub fn is_folded(&self) -> bool {
        self.terms.iter().any(|(_, w)| *w == 2)
    }
}

/// `|f_k(x) - f_k(x + delta)|^2 = 2 - 2 cos(2 pi k.delta)`, evaluated as
/// `4 sin^2(pi r)` with `r` the centred phase so integer phases give exactly 0.
#[inline]
pub fn mode_discrepancy<T: Real>(k: &FourierIndex, disp: &Displacement<T>) -> T {
    phase_discrepancy(k.dot(disp.raw()))
}

#[inline]
pub(crate) fn phase_discrepancy<T: Real>(phase: T) -> T {
    let r = phase - phase.round();
    let s = (T::PI() * r).sin();
    T::lit(4.0) * s * s
}

/// `h_F = sum_k |f_k - f_k o Phi|^2` at one sample.
pub fn h_f<T: Real>(family: &FourierFamily, disp: &Displacement<T>) -> T {
    let mut s = T::zero();
    for (k, w) in &family.terms {
        let v = mode_discrepancy(k, disp);
        s += if *w == 2 { v + v } else { v };
    }
    s
}

/// `sum_k |u . grad f_k|^2 = sum_k 4 pi^2 (k.u)^2`.
pub fn gradient_energy<T: Real>(family: &FourierFamily, u: &Coords<T>) -> T {
    let four_pi2 = T::lit(4.0) * T::PI() * T::PI();
    let mut s = T::zero();
    for (k, w) in &family.terms {
        let p = k.dot(u);
        s += T::lit(*w as f64) * p * p;
    }
    four_pi2 * s
}
