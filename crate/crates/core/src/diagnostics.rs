//! Run-time validity checks: measure-preservation residuals, sensitivity of
//! the estimate to the integrator, and spread across independent seeds.

use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicalSystem, IntegratorConfig};
use crate::error::{Error, Result};
use crate::functional::{Accumulator, EstimateOptions, Quadrature, SampleSet};
use crate::observables::FourierFamily;
use crate::reduce::Moments;
use crate::scalar::Real;
use crate::torus::SamplingStrategy;

/// Residuals above this many standard errors are reported as warnings.
pub const MP_SIGNIFICANCE: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trig {
    Sin,
    Cos,
}

/// `sin(2 pi x_axis)` or `cos(2 pi x_axis)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestObservable {
    pub trig: Trig,
    pub axis: usize,
}

impl TestObservable {
    pub fn label(&self) -> String {
        let f = match self.trig {
            Trig::Sin => "sin",
            Trig::Cos => "cos",
        };
        format!("{f}(2 pi x{})", self.axis + 1)
    }

    fn eval<T: Real>(&self, x: &[T]) -> T {
        let arg = T::TAU() * x[self.axis];
        match self.trig {
            Trig::Sin => arg.sin(),
            Trig::Cos => arg.cos(),
        }
    }
}

/// `sin 2 pi x1`, `cos 2 pi x2`, `sin 2 pi x3`, restricted to the axes of `dim`.
pub fn default_observables(dim: usize) -> Vec<TestObservable> {
    [(Trig::Sin, 0), (Trig::Cos, 1), (Trig::Sin, 2)]
        .into_iter()
        .filter(|&(_, axis)| axis < dim)
        .map(|(trig, axis)| TestObservable { trig, axis })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MpResidual {
    pub observable: String,
    /// `|mean psi(Phi x) - mean psi(x)|`.
    pub residual: f64,
    /// Standard error of the paired difference.
    pub se_diff: f64,
    pub significant: bool,
}

#[derive(Clone)]
struct DiffAcc<T>(Vec<Moments<T>>);

impl<T: Real> Accumulator for DiffAcc<T> {
    fn merge(&self, other: &Self) -> Self {
        DiffAcc(self.0.iter().zip(&other.0).map(|(a, b)| a.merge(b)).collect())
    }
}

/// Difference of sample means of each test observable before and after one
/// step, with the paired standard error.
pub fn measure_preservation<T: Real>(
    sys: &DynamicalSystem<T>,
    h: T,
    t0: T,
    quad: &Quadrature,
    observables: &[TestObservable],
    opts: &EstimateOptions,
) -> Result<Vec<MpResidual>> {
    if quad.strategy == SamplingStrategy::Grid {
        return Err(Error::InvalidParameter(
            "measure-preservation residuals need monte_carlo sampling".into(),
        ));
    }
    if let Some(o) = observables.iter().find(|o| o.axis >= sys.dim()) {
        return Err(Error::InvalidParameter(format!(
            "test observable {} is outside dimension {}",
            o.label(),
            sys.dim()
        )));
    }
    let samples = SampleSet::generate(sys, quad, h, t0, opts)?;
    let acc = mp_on(&samples, observables, opts);
    Ok(observables
        .iter()
        .zip(acc.0)
        .map(|(o, m)| {
            let residual = m.mean.abs().as_f64();
            let se_diff = m.std_error().as_f64();
            MpResidual {
                observable: o.label(),
                residual,
                se_diff,
                significant: residual > MP_SIGNIFICANCE * se_diff,
            }
        })
        .collect())
}

fn mp_on<T: Real>(
    samples: &SampleSet<T>,
    observables: &[TestObservable],
    opts: &EstimateOptions,
) -> DiffAcc<T> {
    let n = observables.len();
    samples.reduce(
        opts,
        || DiffAcc(vec![Moments::default(); n]),
        |i, s, acc| {
            let x = samples.points[i].coords();
            let y = s.image.coords();
            for (m, o) in acc.0.iter_mut().zip(observables) {
                m.push(o.eval(y) - o.eval(x));
            }
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub integrator: String,
    pub value: f64,
    pub std_error: f64,
    /// `|S(this rung) - S(previous rung)|`.
    pub diff_prev: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityTable {
    pub rows: Vec<SensitivityRow>,
    /// Successive differences never grow.
    pub monotone: bool,
    /// Smallest ratio between successive differences.
    pub min_reduction: Option<f64>,
}

pub fn describe_integrator<T: Real>(cfg: &IntegratorConfig<T>) -> String {
    match cfg {
        IntegratorConfig::Rk4 { max_step: Some(s) } => format!("rk4 max_step={s}"),
        IntegratorConfig::Rk4 { max_step: None } => "rk4 max_step=min(h,1e-2)".into(),
        IntegratorConfig::DormandPrince { abs_tol, rel_tol } => {
            format!("dopri5 abs_tol={abs_tol} rel_tol={rel_tol}")
        }
    }
}

/// Estimate on one set of sample points for each integrator rung, ordered
/// from coarse to fine.
pub fn sensitivity_study<T: Real>(
    sys: &DynamicalSystem<T>,
    family: &FourierFamily,
    h: T,
    t0: T,
    quad: &Quadrature,
    ladder: &[IntegratorConfig<T>],
    opts: &EstimateOptions,
) -> Result<SensitivityTable> {
    if !sys.is_flow() {
        return Err(Error::InvalidParameter(
            "sensitivity study needs a flow, not a discrete map".into(),
        ));
    }
    if ladder.len() < 2 {
        return Err(Error::InvalidParameter(
            "sensitivity ladder needs at least 2 rungs".into(),
        ));
    }
    let mut rows: Vec<SensitivityRow> = Vec::with_capacity(ladder.len());
    for cfg in ladder {
        let est = SampleSet::generate(&sys.with_integrator(*cfg)?, quad, h, t0, opts)?
            .estimate(family, opts)?;
        let value = est.value.as_f64();
        rows.push(SensitivityRow {
            integrator: describe_integrator(cfg),
            value,
            std_error: est.std_error.as_f64(),
            diff_prev: rows.last().map(|p| (value - p.value).abs()),
        });
    }
    let diffs: Vec<f64> = rows.iter().filter_map(|r| r.diff_prev).collect();
    let monotone = diffs.windows(2).all(|w| w[1] <= w[0]);
    let min_reduction = diffs
        .windows(2)
        .map(|w| if w[1] == 0.0 { f64::INFINITY } else { w[0] / w[1] })
        .reduce(f64::min);
    Ok(SensitivityTable {
        rows,
        monotone,
        min_reduction,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedSpread {
    pub seeds: Vec<u64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of the per-seed values.
    pub spread: f64,
    /// Mean of the per-seed standard errors.
    pub mean_se: f64,
    /// `spread / mean_se`; `None` when every run reports zero error.
    pub ratio: Option<f64>,
    /// `ratio` lies in `[1/2, 2]`, or both spread and error vanish.
    pub consistent: bool,
}

/// Independent Monte Carlo runs of the same estimate, one per seed.
pub fn multi_seed<T: Real>(
    sys: &DynamicalSystem<T>,
    family: &FourierFamily,
    h: T,
    t0: T,
    n: usize,
    seeds: &[u64],
    opts: &EstimateOptions,
) -> Result<SeedSpread> {
    if seeds.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "multi-seed study needs at least 3 seeds, got {}",
            seeds.len()
        )));
    }
    let mut values = Vec::with_capacity(seeds.len());
    let mut std_errors = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let est = SampleSet::generate(sys, &Quadrature::monte_carlo(n, seed), h, t0, opts)?
            .estimate(family, opts)?;
        values.push(est.value.as_f64());
        std_errors.push(est.std_error.as_f64());
    }
    let m = Moments::from_slice(&values);
    let spread = m.std_dev();
    let mean_se = std_errors.iter().sum::<f64>() / std_errors.len() as f64;
    let ratio = (mean_se > 0.0).then(|| spread / mean_se);
    let consistent = match ratio {
        Some(r) => (0.5..=2.0).contains(&r),
        None => spread == 0.0,
    };
    Ok(SeedSpread {
        seeds: seeds.to_vec(),
        values,
        std_errors,
        mean: m.mean,
        spread,
        mean_se,
        ratio,
        consistent,
    })
}

/// Which diagnostics accompany a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsOptions {
    pub measure_preservation: bool,
    /// RK4 `max_step` rungs, coarse to fine; empty disables the study.
    pub sensitivity_steps: Vec<f64>,
    /// Seeds for the multi-seed study; empty disables it.
    pub seeds: Vec<u64>,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        DiagnosticsOptions {
            measure_preservation: true,
            sensitivity_steps: Vec::new(),
            seeds: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub mp_residuals: Vec<MpResidual>,
    pub integrator_sensitivity: Option<SensitivityTable>,
    pub seed_spread: Option<SeedSpread>,
    pub flagged_fraction: f64,
    pub failed_fraction: f64,
    pub warnings: Vec<String>,
}

/// Runs the requested diagnostics next to an estimate. Residual exceedances
/// and flagged samples become warnings rather than errors.
#[allow(clippy::too_many_arguments)]
pub fn run_diagnostics(
    sys: &DynamicalSystem<f64>,
    family: &FourierFamily,
    h: f64,
    t0: f64,
    quad: &Quadrature,
    samples: &SampleSet<f64>,
    diag: &DiagnosticsOptions,
    opts: &EstimateOptions,
) -> Result<DiagnosticsReport> {
    let mut warnings = Vec::new();
    let mp_residuals = if diag.measure_preservation && quad.strategy == SamplingStrategy::MonteCarlo {
        let obs = default_observables(sys.dim());
        let acc = mp_on(samples, &obs, opts);
        obs.iter()
            .zip(acc.0)
            .map(|(o, m)| {
                let residual = m.mean.abs();
                let se_diff = m.std_error();
                let significant = residual > MP_SIGNIFICANCE * se_diff;
                if significant {
                    warnings.push(format!(
                        "measure-preservation residual for {} is {residual:.3e}, above {MP_SIGNIFICANCE} SE ({se_diff:.3e})",
                        o.label()
                    ));
                }
                MpResidual {
                    observable: o.label(),
                    residual,
                    se_diff,
                    significant,
                }
            })
            .collect()
    } else {
        Vec::new()
    };
    let integrator_sensitivity = if sys.is_flow() && diag.sensitivity_steps.len() >= 2 {
        let ladder: Vec<_> = diag
            .sensitivity_steps
            .iter()
            .map(|&s| IntegratorConfig::rk4(s))
            .collect();
        let t = sensitivity_study(sys, family, h, t0, quad, &ladder, opts)?;
        if !t.monotone {
            warnings.push("integrator sensitivity differences are not monotone".into());
        }
        Some(t)
    } else {
        None
    };
    let seed_spread = if diag.seeds.len() >= 3 {
        let s = multi_seed(sys, family, h, t0, quad.n, &diag.seeds, opts)?;
        if !s.consistent {
            warnings.push(format!(
                "cross-seed spread {:.3e} is inconsistent with the mean standard error {:.3e}",
                s.spread, s.mean_se
            ));
        }
        Some(s)
    } else {
        None
    };
    let n = samples.len().max(1) as f64;
    let flagged = samples.flagged();
    if flagged > 0 {
        warnings.push(format!("{flagged} samples crossed the field cut"));
    }
    Ok(DiagnosticsReport {
        mp_residuals,
        integrator_sensitivity,
        seed_spread,
        flagged_fraction: flagged as f64 / n,
        failed_fraction: samples.failed() as f64 / n,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::VectorField;
    use crate::observables::CutoffNorm;

    fn opts() -> EstimateOptions {
        EstimateOptions::default()
    }

    #[test]
    fn translation_preserves_measure() {
        let sys = DynamicalSystem::translation(&[0.3f64, 0.1, 0.7]).unwrap();
        let r = measure_preservation(
            &sys,
            1.0,
            0.0,
            &Quadrature::monte_carlo(4000, 3),
            &default_observables(3),
            &opts(),
        )
        .unwrap();
        assert_eq!(r.len(), 3);
        for m in r {
            assert!(m.residual <= 3.0 * m.se_diff, "{m:?}");
        }
    }

    #[test]
    fn grid_is_rejected() {
        let sys = DynamicalSystem::<f64>::identity(2).unwrap();
        assert!(measure_preservation(&sys, 1.0, 0.0, &Quadrature::grid(16), &default_observables(2), &opts()).is_err());
    }

    #[test]
    fn abc_flow_preserves_measure() {
        let sys = DynamicalSystem::flow(VectorField::abc(1.0, 1.0, 1.0), IntegratorConfig::rk4(1e-2)).unwrap();
        let r = measure_preservation(&sys, 1.0, 0.0, &Quadrature::monte_carlo(4000, 11), &default_observables(3), &opts())
            .unwrap();
        for m in r {
            assert!(m.residual <= 3.0 * m.se_diff, "{m:?}");
        }
    }

    #[test]
    fn cat_map_preserves_measure() {
        let sys = DynamicalSystem::<f64>::arnold_cat();
        let r = measure_preservation(&sys, 1.0, 0.0, &Quadrature::monte_carlo(4000, 5), &default_observables(2), &opts())
            .unwrap();
        assert_eq!(r.len(), 2);
        for m in r {
            assert!(m.residual <= 3.0 * m.se_diff, "{m:?}");
        }
    }

    #[test]
    fn translation_flow_is_insensitive_to_step() {
        let sys = DynamicalSystem::flow(
            VectorField::constant(&[0.2, -0.1, 0.05]).unwrap(),
            IntegratorConfig::rk4(0.1),
        )
        .unwrap();
        let f = FourierFamily::cutoff(3, 2, CutoffNorm::SupNorm, true).unwrap();
        let ladder = [IntegratorConfig::rk4(0.1), IntegratorConfig::rk4(0.01), IntegratorConfig::rk4(0.001)];
        let t = sensitivity_study(&sys, &f, 1.0, 0.0, &Quadrature::monte_carlo(300, 1), &ladder, &opts()).unwrap();
        for r in &t.rows {
            assert!((r.value - t.rows[0].value).abs() <= 1e-14, "{t:?}");
        }
    }

    #[test]
    fn abc_sensitivity_shrinks_by_a_decade_per_rung() {
        let sys = DynamicalSystem::flow(VectorField::abc(1.0, 1.0, 1.0), IntegratorConfig::default()).unwrap();
        let f = FourierFamily::cutoff(3, 2, CutoffNorm::SupNorm, true).unwrap();
        let ladder = [IntegratorConfig::rk4(1e-1), IntegratorConfig::rk4(1e-2), IntegratorConfig::rk4(1e-3)];
        let t = sensitivity_study(&sys, &f, 1.0, 0.0, &Quadrature::monte_carlo(500, 2), &ladder, &opts()).unwrap();
        assert!(t.monotone, "{t:?}");
        assert!(t.min_reduction.unwrap() >= 10.0, "{t:?}");
    }

    #[test]
    fn sensitivity_preconditions() {
        let f = FourierFamily::single(&[1, 0]).unwrap();
        let q = Quadrature::monte_carlo(10, 1);
        let cat = DynamicalSystem::<f64>::arnold_cat();
        assert!(sensitivity_study(&cat, &f, 1.0, 0.0, &q, &[IntegratorConfig::rk4(0.1); 2], &opts()).is_err());
        let abc = DynamicalSystem::flow(VectorField::abc(1.0, 1.0, 1.0), IntegratorConfig::default()).unwrap();
        let f3 = FourierFamily::single(&[1, 0, 0]).unwrap();
        assert!(sensitivity_study(&abc, &f3, 1.0, 0.0, &q, &[IntegratorConfig::rk4(0.1)], &opts()).is_err());
    }

    #[test]
    fn constant_integrand_has_no_spread() {
        let sys = DynamicalSystem::translation(&[0.123f64, 0.0, 0.0]).unwrap();
        let f = FourierFamily::single(&[1, 0, 0]).unwrap();
        let s = multi_seed(&sys, &f, 1.0, 0.0, 200, &[1, 2, 3], &opts()).unwrap();
        assert_eq!(s.spread, 0.0);
        assert!(s.ratio.is_none());
        assert!(s.consistent);
        assert!(multi_seed(&sys, &f, 1.0, 0.0, 200, &[1, 2], &opts()).is_err());
    }

    #[test]
    fn cat_map_seed_spread_matches_standard_error() {
        let sys = DynamicalSystem::<f64>::arnold_cat();
        let f = FourierFamily::single(&[1, 0]).unwrap();
        let seeds: Vec<u64> = (1..=8).collect();
        let s = multi_seed(&sys, &f, 1.0, 0.0, 2000, &seeds, &opts()).unwrap();
        let r = s.ratio.unwrap();
        assert!((0.5..=2.0).contains(&r), "{s:?}");
    }

    #[test]
    fn abc_seed_spread_matches_standard_error() {
        let sys = DynamicalSystem::flow(VectorField::abc(1.0, 1.0, 1.0), IntegratorConfig::default()).unwrap();
        let f = FourierFamily::cutoff(3, 2, CutoffNorm::SupNorm, true).unwrap();
        let s = multi_seed(&sys, &f, 1.0, 0.0, 3000, &[11, 12, 13, 14, 15], &opts()).unwrap();
        let r = s.ratio.unwrap();
        assert!((0.5..=2.0).contains(&r), "{s:?}");
    }

    #[test]
    fn report_flags_hou_luo_crossings() {
        let sys = DynamicalSystem::flow(VectorField::hou_luo_default(1.0), IntegratorConfig::default()).unwrap();
        let f = FourierFamily::cutoff(3, 1, CutoffNorm::SupNorm, true).unwrap();
        let q = Quadrature::monte_carlo(500, 4);
        let o = opts();
        let samples = SampleSet::generate(&sys, &q, 1.0, 0.0, &o).unwrap();
        let rep = run_diagnostics(&sys, &f, 1.0, 0.0, &q, &samples, &DiagnosticsOptions::default(), &o).unwrap();
        assert!(rep.flagged_fraction > 0.0 && rep.flagged_fraction <= 1.0);
        assert!(rep.warnings.iter().any(|w| w.contains("cut")));
        assert!(rep.mp_residuals.iter().all(|m| m.residual.is_finite()));
    }
}
