//! Executes estimate and experiment jobs and writes their bundles.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use crate::config::{ResolvedRun, RunConfig, SystemSpec};
use crate::diagnostics::run_diagnostics;
use crate::dynamics::SystemKind;
use crate::error::{Error, Result};
use crate::experiments::run_resolved;
use crate::functional::{bound_report, fk_determinant, small_time_series, SampleSet, BOUND_TOLERANCE};
use crate::oracles::{cat_map_s, translation_s, OracleValue};
use crate::output::{write_bundle, Bundle, Check, Job, Manifest, Table};

/// Closed form for single-mode translation and cat-map runs.
fn oracle_for(run: &ResolvedRun) -> Option<OracleValue> {
    if run.family.size() != 1 {
        return None;
    }
    let k = &run.family.terms()[0].0;
    match run.system.kind() {
        SystemKind::Translation { shift } => translation_s(k, &shift[..run.system.dim()])
            .ok()
            .map(|v| OracleValue::closed_form("log(3 - 2 cos(2 pi k.a))", v)),
        SystemKind::CatMap { matrix } => cat_map_s(*matrix, k)
            .ok()
            .map(|v| OracleValue::closed_form("log((3 + sqrt 5) / 2)", v)),
        SystemKind::Flow { .. } => None,
    }
}

/// One estimate with bounds, determinant, sweeps and diagnostics.
pub fn run_estimate(config: &RunConfig) -> Result<Bundle> {
    let run = config.validate()?;
    let t = &config.time;
    let (sys, opts) = (&run.system, &run.options);
    let samples = SampleSet::generate(sys, &run.quadrature, t.h, t.t0, opts)?;
    let est = samples.estimate(&run.family, opts)?;
    let bounds = bound_report(&est, &run.family);
    let mut b = Bundle::default();
    b.checks.push(Check::new(
        "bounds",
        bounds.holds(),
        if bounds.holds() {
            "elementary and a priori bounds hold".to_string()
        } else {
            bounds.violations.join("; ")
        },
    ));
    let oracle = oracle_for(&run);

    let mut series = Table::new(&["sweep", "parameter", "family_size", "value", "std_error", "scaled", "reference"]);
    for (k, f) in &run.sweep_families {
        let e = samples.estimate(f, opts)?;
        let s = 1.0 / (*k as f64).powi(2);
        series.push(vec!["K".into(), (*k as f64).into(), f.size().into(), e.value.into(), e.std_error.into(), (e.value * s).into(), f64::NAN.into()]);
    }
    let mut small_time = None;
    if !t.h_sweep.is_empty() {
        let s = small_time_series(sys, &run.family, t.t0, &t.h_sweep, &run.quadrature, opts)?;
        for r in &s.rows {
            series.push(vec!["h".into(), r.h.into(), s.family_size.into(), (r.scaled * r.h * r.h).into(), (r.scaled_se * r.h * r.h).into(), r.scaled.into(), s.limit.into()]);
        }
        small_time = Some(json!({ "limit": s.limit, "limit_std_error": s.limit_se, "observed_order": s.observed_order }));
    }
    for &t0 in &t.t0_sweep {
        let e = SampleSet::generate(sys, &run.quadrature, t.h, t0, opts)?.estimate(&run.family, opts)?;
        series.push(vec!["t0".into(), t0.into(), e.family_size.into(), e.value.into(), e.std_error.into(), f64::NAN.into(), f64::NAN.into()]);
    }

    let diag = run_diagnostics(sys, &run.family, t.h, t.t0, &run.quadrature, &samples, &config.diagnostics, opts)?;
    b.warnings.extend(diag.warnings.iter().cloned());
    if !bounds.holds() {
        b.warnings.push(format!("bound violation: {}", bounds.violations.join("; ")));
    }
    b.summary = json!({
        "job": "estimate",
        "system": config.system.as_ref().map(SystemSpec::kind),
        "dim": sys.dim(),
        "estimate": est,
        "fk_determinant": fk_determinant(&est),
        "bounds": bounds,
        "oracle": oracle,
        "small_time": small_time,
    });
    b.series = series;
    b.diagnostics = serde_json::to_value(&diag)?;
    b.tolerances.insert("bound".into(), BOUND_TOLERANCE);
    b.tolerances.insert("mp_significance".into(), crate::diagnostics::MP_SIGNIFICANCE);
    if let SystemKind::Flow { integrator, .. } = sys.kind() {
        b.tolerances.insert("integrator_nominal".into(), integrator.nominal_tolerance(t.h));
    }
    Ok(b)
}

pub fn run_job(job: &Job) -> Result<Bundle> {
    match job {
        Job::Estimate { config } => run_estimate(config),
        Job::Experiment { name, parameters } => run_resolved(name, parameters),
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (all cores when `None`).
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<(R, usize)> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("thread count must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    let n = pool.current_num_threads();
    Ok((pool.install(f), n))
}

/// Runs a job and writes its bundle under `root`.
pub struct Completed {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub bundle: Bundle,
}

pub fn execute(job: &Job, threads: Option<usize>, root: &Path) -> Result<Completed> {
    let start = Instant::now();
    let (bundle, n) = with_threads(threads, || run_job(job))?;
    let bundle = bundle?;
    let (dir, manifest) = write_bundle(root, job, &bundle, n, start.elapsed().as_secs_f64())?;
    Ok(Completed { dir, manifest, bundle })
}

/// Reruns the job recorded in a manifest.
pub fn rerun(manifest: &Path, threads: Option<usize>, root: Option<&Path>) -> Result<Completed> {
    let m = Manifest::load(manifest)?;
    let root = root.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&m.output_root));
    execute(&m.job, threads.or(Some(m.threads)), &root)
}
