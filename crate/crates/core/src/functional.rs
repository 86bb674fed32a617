//! Monte Carlo and grid estimators of the tracial commutator functional
//!
//! `S_h(F; t0) = integral of log(1 + h_F(x)) dmu`, with
//! `h_F(x) = sum_{f in F} |f(x) - f(Phi_{t0+h,t0} x)|^2`,
//! together with the quantities derived from it: the Fuglede-Kadison
//! determinant `exp S`, the scaled growth `Sigma_K(t) = K^-2 S_1(F_K; t)`,
//! small-time scaling series and the elementary bounds.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicalSystem, StepResult};
use crate::error::{Error, Result};
use crate::observables::{gradient_energy, h_f, CutoffNorm, FourierFamily, FourierIndex};
use crate::reduce::{map_chunks, tree_reduce, Moments};
use crate::scalar::Real;
use crate::torus::{HaarSampler, SamplingStrategy, TorusPoint};

/// Sample-set description: strategy, size and seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quadrature {
    pub strategy: SamplingStrategy,
    pub n: usize,
    pub seed: u64,
}

impl Quadrature {
    pub fn monte_carlo(n: usize, seed: u64) -> Self {
        Quadrature {
            strategy: SamplingStrategy::MonteCarlo,
            n,
            seed,
        }
    }

    pub fn grid(n: usize) -> Self {
        Quadrature {
            strategy: SamplingStrategy::Grid,
            n,
            seed: 0,
        }
    }

    pub fn sampler(&self, dim: usize) -> Result<HaarSampler> {
        HaarSampler::new(dim, self.n, self.seed, self.strategy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    #[default]
    Propagate,
    SkipAndFlag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub on_failure: FailurePolicy,
    /// Drop samples whose trajectory crossed a field cut.
    pub exclude_cut_crossings: bool,
    /// Maximum number of per-sample `h_F` values kept for inspection.
    pub retain_cap: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            on_failure: FailurePolicy::Propagate,
            exclude_cut_crossings: false,
            retain_cap: 1_000_000,
        }
    }
}

/// Shared sample points with their one-step images.
///
/// Every estimate computed from the same `SampleSet` sees the same points,
/// which turns statistical error between them into correlated error.
#[derive(Clone, Debug)]
pub struct SampleSet<T> {
    pub quad: Quadrature,
    pub h: T,
    pub t0: T,
    pub points: Vec<TorusPoint<T>>,
    /// `None` marks an integrator failure skipped under `SkipAndFlag`.
    pub steps: Vec<Option<StepResult<T>>>,
}

impl<T: Real> SampleSet<T> {
    pub fn generate(
        sys: &DynamicalSystem<T>,
        quad: &Quadrature,
        h: T,
        t0: T,
        opts: &EstimateOptions,
    ) -> Result<Self> {
        let sampler = quad.sampler(sys.dim())?;
        let chunks = map_chunks(quad.n, |range| {
            let pts: Vec<TorusPoint<T>> = sampler.points_in(range);
            let steps: Vec<Result<StepResult<T>>> =
                pts.iter().map(|x| sys.step(x, t0, h)).collect();
            (pts, steps)
        });
        let mut points = Vec::with_capacity(quad.n);
        let mut steps = Vec::with_capacity(quad.n);
        for (pts, st) in chunks {
            points.extend(pts);
            for s in st {
                match s {
                    Ok(r) => steps.push(Some(r)),
                    Err(Error::StepUnderflow { .. })
                        if opts.on_failure == FailurePolicy::SkipAndFlag =>
                    {
                        steps.push(None)
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(SampleSet {
            quad: *quad,
            h,
            t0,
            points,
            steps,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn flagged(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| s.is_some_and(|r| r.crossed_cut))
            .count()
    }

    pub fn failed(&self) -> usize {
        self.steps.iter().filter(|s| s.is_none()).count()
    }

    fn included(&self, i: usize, opts: &EstimateOptions) -> Option<&StepResult<T>> {
        let s = self.steps[i].as_ref()?;
        if opts.exclude_cut_crossings && s.crossed_cut {
            None
        } else {
            Some(s)
        }
    }

    /// Deterministic chunked reduction of a per-sample quantity.
    pub(crate) fn reduce<A, I, F>(&self, opts: &EstimateOptions, init: I, per_sample: F) -> A
    where
        A: Accumulator,
        I: Fn() -> A + Sync + Send,
        F: Fn(usize, &StepResult<T>, &mut A) + Sync + Send,
    {
        let parts = map_chunks(self.len(), |range| {
            let mut acc = init();
            for i in range {
                if let Some(s) = self.included(i, opts) {
                    per_sample(i, s, &mut acc);
                }
            }
            acc
        });
        tree_reduce(&parts, &|a: &A, b: &A| a.merge(b)).unwrap_or_else(init)
    }

    /// `S_h(F; t0)` on this sample set.
    pub fn estimate(
        &self,
        family: &FourierFamily,
        opts: &EstimateOptions,
    ) -> Result<FunctionalEstimate<T>> {
        if family.dim() != self.points.first().map_or(family.dim(), |p| p.dim()) {
            return Err(Error::DimensionMismatch {
                expected: self.points[0].dim(),
                got: family.dim(),
            });
        }
        let acc = self.reduce(
            opts,
            || IntegrandAcc::new(opts.retain_cap),
            |_, s, acc| acc.push(h_f(family, &s.disp)),
        );
        Ok(self.finish(acc, family.size()))
    }

    pub(crate) fn finish(&self, acc: IntegrandAcc<T>, family_size: usize) -> FunctionalEstimate<T> {
        let grid = self.quad.strategy == SamplingStrategy::Grid;
        FunctionalEstimate {
            value: acc.log.mean,
            std_error: if grid { T::zero() } else { acc.log.std_error() },
            n_samples: acc.log.n,
            h: self.h,
            t0: self.t0,
            family_size,
            flagged_samples: self.flagged(),
            failed_samples: self.failed(),
            strategy: self.quad.strategy,
            integrand: IntegrandStats {
                mean_h: acc.h.mean,
                mean_lower: acc.lower.mean,
                max_h: acc.max_h,
                retained_h: acc.retained,
            },
        }
    }
}

pub trait Accumulator: Clone + Send {
    fn merge(&self, other: &Self) -> Self;
}

#[derive(Clone, Debug)]
pub(crate) struct IntegrandAcc<T> {
    pub log: Moments<T>,
    pub h: Moments<T>,
    pub lower: Moments<T>,
    pub max_h: T,
    pub retained: Vec<T>,
    cap: usize,
}

impl<T: Real> IntegrandAcc<T> {
    pub fn new(cap: usize) -> Self {
        IntegrandAcc {
            log: Moments::default(),
            h: Moments::default(),
            lower: Moments::default(),
            max_h: T::zero(),
            retained: Vec::new(),
            cap,
        }
    }

    #[inline]
    pub fn push(&mut self, z: T) {
        self.log.push(z.ln_1p());
        self.h.push(z);
        self.lower.push(z / (T::one() + z));
        self.max_h = self.max_h.max(z);
        if self.retained.len() < self.cap {
            self.retained.push(z);
        }
    }
}

impl<T: Real> Accumulator for IntegrandAcc<T> {
    fn merge(&self, other: &Self) -> Self {
        let mut retained = self.retained.clone();
        let room = self.cap.saturating_sub(retained.len());
        retained.extend(other.retained.iter().take(room).copied());
        IntegrandAcc {
            cap: self.cap,
            log: self.log.merge(&other.log),
            h: self.h.merge(&other.h),
            lower: self.lower.merge(&other.lower),
            max_h: self.max_h.max(other.max_h),
            retained,
        }
    }
}

impl<T: Real> Accumulator for Moments<T> {
    fn merge(&self, other: &Self) -> Self {
        Moments::merge(self, other)
    }
}

/// Per-sample `h_F` summary on the samples behind an estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegrandStats<T> {
    pub mean_h: T,
    /// Mean of `h_F / (1 + h_F)`.
    pub mean_lower: T,
    pub max_h: T,
    /// First `retain_cap` per-sample values, in sample order.
    #[serde(skip)]
    pub retained_h: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FunctionalEstimate<T> {
    pub value: T,
    /// `sigma / sqrt(N)` for Monte Carlo, 0 for grids.
    pub std_error: T,
    pub n_samples: usize,
    pub h: T,
    pub t0: T,
    pub family_size: usize,
    pub flagged_samples: usize,
    pub failed_samples: usize,
    pub strategy: SamplingStrategy,
    pub integrand: IntegrandStats<T>,
}

/// `S_h(F; t0)` from fresh samples.
pub fn estimate_s<T: Real>(
    sys: &DynamicalSystem<T>,
    family: &FourierFamily,
    h: T,
    t0: T,
    quad: &Quadrature,
    opts: &EstimateOptions,
) -> Result<FunctionalEstimate<T>> {
    if family.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: family.dim(),
        });
    }
    SampleSet::generate(sys, quad, h, t0, opts)?.estimate(family, opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FkDeterminant<T> {
    pub value: T,
    pub std_error: T,
}

/// Fuglede-Kadison determinant `exp(S)` with first-order error propagation.
pub fn fk_determinant<T: Real>(est: &FunctionalEstimate<T>) -> FkDeterminant<T> {
    let value = est.value.exp();
    FkDeterminant {
        value,
        std_error: value * est.std_error,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigmaEstimate<T> {
    pub k: u32,
    pub t: T,
    pub value: T,
    pub std_error: T,
    pub estimate: FunctionalEstimate<T>,
}

/// `Sigma_K(t) = K^-2 S_1(F_K; t)` for each cutoff, on one shared sample set.
pub fn sigma_sweep<T: Real>(
    sys: &DynamicalSystem<T>,
    cutoffs: &[u32],
    t: T,
    quad: &Quadrature,
    norm: CutoffNorm,
    half_lattice: bool,
    opts: &EstimateOptions,
) -> Result<Vec<SigmaEstimate<T>>> {
    let samples = SampleSet::generate(sys, quad, T::one(), t, opts)?;
    cutoffs
        .iter()
        .map(|&k| {
            let family = FourierFamily::cutoff(sys.dim(), k, norm, half_lattice)?;
            let est = samples.estimate(&family, opts)?;
            let scale = T::lit((k as f64).powi(2)).recip();
            Ok(SigmaEstimate {
                k,
                t,
                value: est.value * scale,
                std_error: est.std_error * scale,
                estimate: est,
            })
        })
        .collect()
}

pub fn sigma_k<T: Real>(
    sys: &DynamicalSystem<T>,
    k: u32,
    t: T,
    quad: &Quadrature,
    norm: CutoffNorm,
    half_lattice: bool,
    opts: &EstimateOptions,
) -> Result<SigmaEstimate<T>> {
    Ok(sigma_sweep(sys, &[k], t, quad, norm, half_lattice, opts)?.remove(0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallTimeRow<T> {
    pub h: T,
    /// `S_h / h^2`.
    pub scaled: T,
    pub scaled_se: T,
    /// `scaled - limit`.
    pub deviation: T,
    pub rel_deviation: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallTimeSeries<T> {
    pub rows: Vec<SmallTimeRow<T>>,
    /// Sample mean of `sum_k |u . grad f_k|^2` on the shared points.
    pub limit: T,
    pub limit_se: T,
    pub family_size: usize,
    /// Least-squares slope of `log|deviation|` against `log h`.
    pub observed_order: Option<T>,
}

/// `S_h / h^2` for decreasing `h` against the gradient-energy limit, all on
/// the same sample points.
pub fn small_time_series<T: Real>(
    sys: &DynamicalSystem<T>,
    family: &FourierFamily,
    t0: T,
    h_list: &[T],
    quad: &Quadrature,
    opts: &EstimateOptions,
) -> Result<SmallTimeSeries<T>> {
    let field = sys.field().ok_or_else(|| {
        Error::InvalidParameter("small-time scaling needs a flow, not a discrete map".into())
    })?;
    if h_list.is_empty() || h_list.iter().any(|h| !(h.is_finite() && *h > T::zero())) {
        return Err(Error::InvalidParameter("h list must be nonempty and positive".into()));
    }
    let sampler = quad.sampler(sys.dim())?;
    let parts = map_chunks(quad.n, |range| {
        let mut m = Moments::default();
        for x in sampler.points_in::<T>(range) {
            m.push(gradient_energy(family, &field.velocity(x.raw(), t0)));
        }
        m
    });
    let lim = tree_reduce(&parts, &|a: &Moments<T>, b| a.merge(b)).unwrap_or_default();
    let limit = lim.mean;
    let mut rows = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let est = SampleSet::generate(sys, quad, h, t0, opts)?.estimate(family, opts)?;
        let h2 = h * h;
        let scaled = est.value / h2;
        let deviation = scaled - limit;
        rows.push(SmallTimeRow {
            h,
            scaled,
            scaled_se: est.std_error / h2,
            deviation,
            rel_deviation: if limit == T::zero() {
                deviation.abs()
            } else {
                (deviation / limit).abs()
            },
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.deviation != T::zero())
        .map(|r| (r.h.as_f64().ln(), r.deviation.abs().as_f64().ln()))
        .collect();
    Ok(SmallTimeSeries {
        observed_order: fit_slope(&pts).map(T::lit),
        rows,
        limit,
        limit_se: if quad.strategy == SamplingStrategy::Grid {
            T::zero()
        } else {
            lim.std_error()
        },
        family_size: family.size(),
    })
}

pub(crate) fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AutocorrelationCheck<T> {
    /// Mean of `|f_k(x) - f_k(Phi x)|^2`, complex evaluation.
    pub lhs: T,
    /// `2 - 2 Re <f_k, U f_k>` estimated on the same samples.
    pub rhs: T,
}

#[derive(Clone)]
struct PairAcc<T> {
    lhs: Moments<T>,
    corr: Moments<T>,
}

impl<T: Real> Default for PairAcc<T> {
    fn default() -> Self {
        PairAcc {
            lhs: Moments::default(),
            corr: Moments::default(),
        }
    }
}

impl<T: Real> Accumulator for PairAcc<T> {
    fn merge(&self, other: &Self) -> Self {
        PairAcc {
            lhs: self.lhs.merge(&other.lhs),
            corr: self.corr.merge(&other.corr),
        }
    }
}

/// Correlation form of the single-mode discrepancy:
/// `||f - f o Phi||^2 = 2 ||f||^2 - 2 Re <f, U f>` with `||f_k|| = 1`.
pub fn koopman_autocorrelation_check<T: Real>(
    sys: &DynamicalSystem<T>,
    k: &FourierIndex,
    h: T,
    t0: T,
    quad: &Quadrature,
    opts: &EstimateOptions,
) -> Result<AutocorrelationCheck<T>> {
    if k.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: k.dim(),
        });
    }
    let samples = SampleSet::generate(sys, quad, h, t0, opts)?;
    let tau = T::TAU();
    let acc = samples.reduce(opts, PairAcc::default, |i, s, acc: &mut PairAcc<T>| {
        let x = &samples.points[i];
        let fx = Complex::from_polar(T::one(), tau * k.dot(x.raw()));
        let fy = Complex::from_polar(T::one(), tau * k.dot(s.image.raw()));
        acc.lhs.push((fx - fy).norm_sqr());
        acc.corr.push((tau * k.dot(s.disp.raw())).cos());
    });
    Ok(AutocorrelationCheck {
        lhs: acc.lhs.mean,
        rhs: T::lit(2.0) - T::lit(2.0) * acc.corr.mean,
    })
}

/// Slack of each elementary and a priori bound on one estimate's samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport<T> {
    pub estimate: T,
    pub mean_h: T,
    pub max_h: T,
    /// `mean(z / (1 + z))`.
    pub lower_pointwise: T,
    /// `mean(z) / (1 + max z)`.
    pub lower_uniform: T,
    /// `4 |F|`.
    pub trivial_cap: T,
    /// `log(1 + 4 |F|)`.
    pub a_priori: T,
    pub slack_lower_pointwise: T,
    pub slack_lower_uniform: T,
    pub slack_upper_mean: T,
    pub slack_cap: T,
    pub slack_a_priori: T,
    pub slack_nonnegative: T,
    pub tolerance: T,
    pub violations: Vec<String>,
}

impl<T: Real> BoundReport<T> {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.holds() {
            Ok(self)
        } else {
            Err(Error::Consistency(self.violations.join("; ")))
        }
    }
}

pub const BOUND_TOLERANCE: f64 = 1e-12;

/// Checks `0 <= mean(z/(1+z)) <= S <= mean(z) <= 4|F|`,
/// `S >= mean(z)/(1 + max z)` and `S <= log(1 + 4|F|)` with `z = h_F`.
pub fn bound_report<T: Real>(est: &FunctionalEstimate<T>, family: &FourierFamily) -> BoundReport<T> {
    let s = est.value;
    let st = &est.integrand;
    let f = T::lit(family.size() as f64);
    let cap = T::lit(4.0) * f;
    let a_priori = cap.ln_1p();
    let lower_uniform = st.mean_h / (T::one() + st.max_h);
    let tol = T::lit(BOUND_TOLERANCE);
    let mut violations = Vec::new();
    let mut check = |name: &str, lo: T, hi: T| {
        let slack = hi - lo;
        if slack < -tol * (T::one() + hi.abs().max(lo.abs())) {
            violations.push(format!("{name}: {lo} > {hi}"));
        }
        slack
    };
    let slack_nonnegative = check("S >= 0", T::zero(), s);
    let slack_lower_pointwise = check("mean(z/(1+z)) <= S", st.mean_lower, s);
    let slack_lower_uniform = check("mean(z)/(1+max z) <= S", lower_uniform, s);
    let slack_upper_mean = check("S <= mean(z)", s, st.mean_h);
    let slack_cap = check("mean(z) <= 4|F|", st.mean_h, cap);
    let slack_a_priori = check("S <= log(1+4|F|)", s, a_priori);
    BoundReport {
        estimate: s,
        mean_h: st.mean_h,
        max_h: st.max_h,
        lower_pointwise: st.mean_lower,
        lower_uniform,
        trivial_cap: cap,
        a_priori,
        slack_lower_pointwise,
        slack_lower_uniform,
        slack_upper_mean,
        slack_cap,
        slack_a_priori,
        slack_nonnegative,
        tolerance: tol,
        violations,
    }
}
