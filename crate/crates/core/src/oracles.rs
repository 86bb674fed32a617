//! Closed-form reference values and independent brute-force estimators.

use num_complex::Complex;
use serde::Serialize;

use crate::dynamics::DynamicalSystem;
use crate::error::{Error, Result};
use crate::functional::{EstimateOptions, FunctionalEstimate, IntegrandAcc, Quadrature, SampleSet};
use crate::observables::{FourierFamily, FourierIndex};
use crate::reduce::pairwise_sum;
use crate::scalar::Real;
use crate::torus::{check_dim, frac, sample_haar, SamplingStrategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Derivation {
    ClosedForm,
    BruteForce,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleValue {
    pub label: String,
    pub value: f64,
    pub derivation: Derivation,
}

impl OracleValue {
    pub fn closed_form(label: impl Into<String>, value: f64) -> Self {
        OracleValue {
            label: label.into(),
            value,
            derivation: Derivation::ClosedForm,
        }
    }
}

/// `S({f_k})` for the translation by `a`: `log(3 - 2 cos(2 pi k.a))`.
pub fn translation_s<T: Real>(k: &FourierIndex, a: &[T]) -> Result<T> {
    if a.len() != k.dim() {
        return Err(Error::DimensionMismatch {
            expected: k.dim(),
            got: a.len(),
        });
    }
    let phase: T = k
        .components()
        .iter()
        .zip(a)
        .map(|(&kj, &aj)| T::lit(kj as f64) * aj)
        .sum();
    Ok((T::lit(3.0) - T::lit(2.0) * (T::TAU() * phase).cos()).ln())
}

/// `log((3 + sqrt 5) / 2) = integral_0^1 log(3 - 2 cos 2 pi t) dt`.
pub fn golden_log<T: Real>() -> T {
    ((T::lit(3.0) + T::lit(5.0).sqrt()) / T::lit(2.0)).ln()
}

/// Single-mode functional of a toral automorphism `x -> A x`.
///
/// `f_k(Ax) = f_{A^T k}(x)`, so the phase `(A^T k - k).x mod 1` is Haar
/// distributed whenever `A^T k != k`, and the value is the constant
/// `log((3 + sqrt 5) / 2)` independent of `A` and `k`.
pub fn cat_map_s<T: Real>(matrix: [[i64; 2]; 2], k: &FourierIndex) -> Result<T> {
    if k.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: k.dim(),
        });
    }
    let kk = k.components();
    let ell = [
        matrix[0][0] * kk[0] + matrix[1][0] * kk[1] - kk[0],
        matrix[0][1] * kk[0] + matrix[1][1] * kk[1] - kk[1],
    ];
    if ell == [0, 0] {
        return Err(Error::FixedMode { k: kk.to_vec() });
    }
    Ok(golden_log())
}

/// Midpoint rule for `integral_0^1 log(3 - 2 cos 2 pi t) dt` on `n` nodes.
pub fn log_integral_midpoint(n: usize) -> f64 {
    let vals: Vec<f64> = (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) / n as f64;
            (3.0 - 2.0 * (std::f64::consts::TAU * t).cos()).ln()
        })
        .collect();
    pairwise_sum(&vals) / n as f64
}

/// Kolmogorov-Smirnov distance between the law of `ell.x mod 1`, `x` Haar,
/// and the uniform law on `[0, 1)`.
pub fn phase_uniformity_test(ell: &[i64], n: usize, seed: u64) -> Result<f64> {
    check_dim(ell.len())?;
    if ell.iter().all(|&v| v == 0) {
        return Err(Error::InvalidParameter("phase vector ell must be nonzero".into()));
    }
    let pts = sample_haar::<f64>(ell.len(), n, seed, SamplingStrategy::MonteCarlo)?;
    let mut u: Vec<f64> = pts
        .iter()
        .map(|p| {
            frac(
                p.coords()
                    .iter()
                    .zip(ell)
                    .map(|(x, &l)| l as f64 * x)
                    .sum::<f64>(),
            )
        })
        .collect();
    u.sort_by(f64::total_cmp);
    let nf = n as f64;
    Ok(u
        .iter()
        .enumerate()
        .map(|(i, &v)| ((i + 1) as f64 / nf - v).max(v - i as f64 / nf))
        .fold(0.0, f64::max))
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

pub const BRUTE_FORCE_LIMIT: usize = 10_000;

/// Direct complex-exponential evaluation of
/// `mean log(1 + sum_k |exp(2 pi i k.x) - exp(2 pi i k.y)|^2)` over the
/// unfolded family, with `y` the wrapped image.
pub fn brute_force_s<T: Real>(
    sys: &DynamicalSystem<T>,
    family: &FourierFamily,
    h: T,
    t0: T,
    quad: &Quadrature,
    opts: &EstimateOptions,
) -> Result<FunctionalEstimate<T>> {
    let samples = SampleSet::generate(sys, quad, h, t0, opts)?;
    brute_force_on(&samples, family, opts)
}

/// Brute-force estimate on an existing sample set.
pub fn brute_force_on<T: Real>(
    samples: &SampleSet<T>,
    family: &FourierFamily,
    opts: &EstimateOptions,
) -> Result<FunctionalEstimate<T>> {
    if family.size() > BRUTE_FORCE_LIMIT {
        return Err(Error::CostGuard {
            size: family.size(),
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let modes = family.modes();
    let tau = T::TAU();
    let acc = samples.reduce(
        opts,
        || IntegrandAcc::new(opts.retain_cap),
        |i, s, acc| {
            let x = samples.points[i].raw();
            let y = s.image.raw();
            let z: T = modes
                .iter()
                .map(|k| {
                    let fx = Complex::from_polar(T::one(), tau * k.dot(x));
                    let fy = Complex::from_polar(T::one(), tau * k.dot(y));
                    (fx - fy).norm_sqr()
                })
                .sum();
            acc.push(z);
        },
    );
    Ok(samples.finish(acc, family.size()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{IntegratorConfig, VectorField};
    use crate::functional::estimate_s;
    use crate::observables::CutoffNorm;

    #[test]
    fn translation_closed_form() {
        let k = FourierIndex::new(&[1, 0, 0]).unwrap();
        let v: f64 = translation_s(&k, &[0.123, 0.0, 0.0]).unwrap();
        assert!((v - 0.449882).abs() < 5e-7);
        let k2 = FourierIndex::new(&[2, 1, 0]).unwrap();
        assert!(translation_s::<f64>(&k2, &[0.5, 0.0, 0.3]).unwrap().abs() < 1e-15);
        let half: f64 = translation_s(&k, &[0.5, 0.0, 0.0]).unwrap();
        assert!((half - 5f64.ln()).abs() < 1e-14);
        assert!((half - 1.60944).abs() < 1e-5);
    }

    #[test]
    fn translation_periodic_and_even() {
        let k = FourierIndex::new(&[1, -2, 3]).unwrap();
        let a = [0.17, 0.41, -0.08];
        let base: f64 = translation_s(&k, &a).unwrap();
        for j in 0..3 {
            let mut b = a;
            b[j] += 1.0;
            assert!((translation_s(&k, &b).unwrap() - base).abs() < 1e-12);
        }
        assert!((translation_s(&k.neg(), &a).unwrap() - base).abs() < 1e-15);
    }

    #[test]
    fn cat_map_constant() {
        let k = FourierIndex::new(&[1, 0]).unwrap();
        let v: f64 = cat_map_s([[2, 1], [1, 1]], &k).unwrap();
        assert!((v - 0.962424).abs() < 5e-7);
        assert!((v - 0.962_423_650_1).abs() < 1e-10);
        // identity matrix fixes every k
        assert!(matches!(
            cat_map_s::<f64>([[1, 0], [0, 1]], &k),
            Err(Error::FixedMode { .. })
        ));
    }

    #[test]
    fn log_integral_quadrature() {
        let q = log_integral_midpoint(1_000_000);
        assert!((q - golden_log::<f64>()).abs() <= 1e-9, "{q}");
    }

    #[test]
    fn cat_map_value_independent_of_matrix_and_mode() {
        let opts = EstimateOptions::default();
        let cases: [([[i64; 2]; 2], [i64; 2]); 3] = [
            ([[1, 1], [1, 2]], [0, 1]),
            ([[3, 2], [1, 1]], [1, 1]),
            ([[2, 1], [1, 1]], [1, 0]),
        ];
        for (m, k) in cases {
            let idx = FourierIndex::new(&k).unwrap();
            let exact: f64 = cat_map_s(m, &idx).unwrap();
            let sys = DynamicalSystem::cat_map(m).unwrap();
            let est = estimate_s(
                &sys,
                &FourierFamily::single(&k).unwrap(),
                1.0,
                0.0,
                &Quadrature::monte_carlo(20_000, 77),
                &opts,
            )
            .unwrap();
            assert!(
                (est.value - exact).abs() <= 3.0 * est.std_error,
                "{m:?} {k:?}: {} +- {}",
                est.value,
                est.std_error
            );
        }
    }

    #[test]
    fn integer_phases_uniform() {
        let n = 10_000;
        for ell in [&[1i64, 0, 0][..], &[1, 1], &[2, -3, 1]] {
            let d = phase_uniformity_test(ell, n, 5).unwrap();
            assert!(d <= ks_critical_1pct(n), "{ell:?}: {d}");
        }
        assert!(phase_uniformity_test(&[0, 0, 0], 10, 1).is_err());
    }

    #[test]
    fn brute_force_guard_and_trivia() {
        let sys = DynamicalSystem::<f64>::identity(3).unwrap();
        let big = FourierFamily::cutoff(3, 11, CutoffNorm::SupNorm, true).unwrap();
        let q = Quadrature::monte_carlo(10, 1);
        let o = EstimateOptions::default();
        assert!(matches!(
            brute_force_s(&sys, &big, 1.0, 0.0, &q, &o),
            Err(Error::CostGuard { .. })
        ));
        let small = FourierFamily::cutoff(3, 2, CutoffNorm::SupNorm, true).unwrap();
        assert_eq!(brute_force_s(&sys, &small, 1.0, 0.0, &q, &o).unwrap().value, 0.0);
        let tr = DynamicalSystem::translation(&[0.2, 0.1, 0.0]).unwrap();
        let one = FourierFamily::single(&[1, 1, 0]).unwrap();
        let est = brute_force_s(&tr, &one, 1.0, 0.0, &Quadrature::monte_carlo(500, 2), &o).unwrap();
        assert!(est.std_error < 1e-13);
    }

    #[test]
    fn brute_force_matches_estimator_on_shared_samples() {
        let o = EstimateOptions::default();
        let q = Quadrature::monte_carlo(600, 13);
        let systems: Vec<DynamicalSystem<f64>> = vec![
            DynamicalSystem::translation(&[0.123, 0.31, 0.7]).unwrap(),
            DynamicalSystem::flow(VectorField::abc(1.0, 1.0, 1.0), IntegratorConfig::rk4(0.05))
                .unwrap(),
        ];
        for sys in &systems {
            let samples = SampleSet::generate(sys, &q, 1.0, 0.0, &o).unwrap();
            for k in 1..=2 {
                let f = FourierFamily::cutoff(3, k, CutoffNorm::SupNorm, true).unwrap();
                let a = samples.estimate(&f, &o).unwrap().value;
                let b = brute_force_on(&samples, &f, &o).unwrap().value;
                assert!((a - b).abs() <= 1e-12, "{a} {b}");
            }
        }
    }
}
