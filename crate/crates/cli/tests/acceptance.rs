//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use serde_json::Value;

use torus_commutator::diagnostics::{default_observables, measure_preservation, MP_SIGNIFICANCE};
use torus_commutator::experiments::{run_experiment, ExperimentSpec};
use torus_commutator::functional::{
    bound_report, koopman_autocorrelation_check, EstimateOptions, Quadrature,
};
use torus_commutator::observables::{CutoffNorm, FourierFamily, FourierIndex};
use torus_commutator::oracles::{brute_force_on, cat_map_s};
use torus_commutator::output::Bundle;
use torus_commutator::{DynamicalSystem, IntegratorConfig, SampleSet, VectorField};

type Outcome = Result<String, String>;

fn torcom(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_torcom"))
        .args(args)
        .output()
        .expect("torcom runs")
}

fn json_file(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).expect("readable")).expect("valid json")
}

fn results_dir(stderr: &[u8]) -> String {
    String::from_utf8_lossy(stderr)
        .lines()
        .find_map(|l| l.strip_prefix("results: ").map(str::to_string))
        .expect("results line on stderr")
}

fn within(limit: Duration, elapsed: Duration, detail: String) -> Outcome {
    if elapsed <= limit {
        Ok(detail)
    } else {
        Err(format!("{detail}; runtime {:.2} s exceeds {:.0} s", elapsed.as_secs_f64(), limit.as_secs_f64()))
    }
}

/// Passes when every check of the experiment bundle passes.
fn experiment_checks(b: &Bundle, names: &[&str]) -> Outcome {
    let picked: Vec<_> = b.checks.iter().filter(|c| names.contains(&c.name.as_str())).collect();
    if picked.len() != names.len() {
        return Err(format!("expected checks {names:?}, got {}", picked.len()));
    }
    let text = picked.iter().map(|c| c.line()).collect::<Vec<_>>().join(" | ");
    if picked.iter().all(|c| c.passed) {
        Ok(text)
    } else {
        Err(text)
    }
}

fn translation_benchmark() -> Outcome {
    let out = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let run = torcom(&["experiment", "table1_sanity", "--out", out.path().to_str().unwrap()]);
    let elapsed = start.elapsed();
    let dir = results_dir(&run.stderr);
    let summary = json_file(&Path::new(&dir).join("summary.json"));
    let row = &summary["rows"][0];
    let value = row["value"].as_f64().unwrap();
    let se = row["std_error"].as_f64().unwrap();
    let oracle = (3.0 - 2.0 * (std::f64::consts::TAU * 0.123).cos()).ln();
    let err = (value - oracle).abs();
    let detail = format!("S = {value:.12}, |S - oracle| = {err:.2e}, SE = {se:e}");
    if row["label"] != "translation" || err > 1e-12 || se != 0.0 {
        return Err(detail);
    }
    within(Duration::from_secs(1), elapsed, detail)
}

fn cat_map_benchmark() -> Outcome {
    let start = Instant::now();
    let sys = DynamicalSystem::arnold_cat();
    let f = FourierFamily::single(&[1, 0]).unwrap();
    let opts = EstimateOptions::default();
    let est = SampleSet::generate(&sys, &Quadrature::monte_carlo(2000, 42), 1.0, 0.0, &opts)
        .and_then(|s| s.estimate(&f, &opts))
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let oracle: f64 = cat_map_s([[2, 1], [1, 1]], &FourierIndex::new(&[1, 0]).unwrap()).unwrap();
    let dev = (est.value - oracle).abs() / est.std_error;
    let detail = format!("S = {:.6} +- {:.6}, oracle {oracle:.6}, deviation {dev:.2} SE", est.value, est.std_error);
    if dev > 3.0 || !(0.005..=0.025).contains(&est.std_error) {
        return Err(detail);
    }
    within(Duration::from_secs(1), elapsed, detail)
}

fn vanishing() -> Outcome {
    let opts = EstimateOptions::default();
    let quad = Quadrature::monte_carlo(2000, 42);
    let mut parts = Vec::new();
    let mut ok = true;
    let mut timed = |label: &str, sys: DynamicalSystem, f: FourierFamily, exact: bool| {
        let start = Instant::now();
        let v = SampleSet::generate(&sys, &quad, 1.0, 0.0, &opts)
            .and_then(|s| s.estimate(&f, &opts))
            .map(|e| e.value)
            .unwrap_or(f64::NAN);
        let secs = start.elapsed().as_secs_f64();
        let pass = if exact { v == 0.0 } else { v.abs() <= 1e-10 } && secs < 1.0;
        ok &= pass;
        parts.push(format!("{label} S = {v:e} ({secs:.2} s)"));
    };
    let k2 = FourierFamily::cutoff(3, 2, CutoffNorm::SupNorm, true).unwrap();
    timed("identity", DynamicalSystem::identity(3).unwrap(), k2, true);
    let integer_phases = FourierFamily::explicit(&[
        FourierIndex::new(&[2, 0, 0]).unwrap(),
        FourierIndex::new(&[0, 4, 0]).unwrap(),
        FourierIndex::new(&[2, 4, 1]).unwrap(),
    ])
    .unwrap();
    timed(
        "translation k.a in Z",
        DynamicalSystem::translation(&[0.5, 0.25, 0.0]).unwrap(),
        integer_phases,
        true,
    );
    let yz = FourierFamily::cutoff_filtered(3, 2, CutoffNorm::SupNorm, true, |k| k.components()[0] == 0).unwrap();
    let shear = DynamicalSystem::flow(VectorField::sine_shear(), IntegratorConfig::rk4(1e-2)).unwrap();
    timed("shear y,z modes", shear, yz, false);
    let detail = parts.join(", ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut runner = TestRunner::new(Config {
        cases: 24,
        failure_persistence: None,
        ..Config::default()
    });
    let worst = std::cell::Cell::new(0.0f64);
    let strategy = (0usize..3, 1u32..=2, any::<u64>(), prop::array::uniform3(-1.0f64..1.0));
    let result = runner.run(&strategy, |(which, k, seed, p)| {
        let (sys, dim) = match which {
            0 => (DynamicalSystem::translation(&p).unwrap(), 3),
            1 => (DynamicalSystem::arnold_cat(), 2),
            _ => (
                DynamicalSystem::flow(VectorField::abc(p[0], p[1], p[2]), IntegratorConfig::rk4(5e-2)).unwrap(),
                3,
            ),
        };
        let opts = EstimateOptions::default();
        let samples = SampleSet::generate(&sys, &Quadrature::monte_carlo(256, seed), 1.0, 0.0, &opts).unwrap();
        let family = FourierFamily::cutoff(dim, k, CutoffNorm::SupNorm, true).unwrap();
        let fast = samples.estimate(&family, &opts).unwrap().value;
        let brute = brute_force_on(&samples, &family, &opts).unwrap().value;
        let diff = (fast - brute).abs();
        worst.set(worst.get().max(diff));
        if diff <= 1e-12 {
            Ok(())
        } else {
            Err(TestCaseError::fail(format!("system {which}, K = {k}: |diff| = {diff:e}")))
        }
    });
    let detail = format!("24 cases, max |trig - brute force| = {:.2e}", worst.get());
    match result {
        Ok(()) => within(Duration::from_secs(10), start.elapsed(), detail),
        Err(e) => Err(format!("{detail}; {e}")),
    }
}

fn small_time_scaling() -> Outcome {
    let start = Instant::now();
    let b = run_experiment(&ExperimentSpec::new("small_time_scaling")).map_err(|e| e.to_string())?;
    let r = experiment_checks(&b, &["limit_agreement", "observed_order"]);
    match r {
        Ok(d) => within(Duration::from_secs(120), start.elapsed(), d),
        e => e,
    }
}

fn bound_suite() -> Outcome {
    let opts = EstimateOptions::default();
    let quad = Quadrature::monte_carlo(1000, 3);
    let abc = DynamicalSystem::flow(VectorField::abc(1.0, 1.0, 1.0), IntegratorConfig::rk4(1e-2)).unwrap();
    let hl = DynamicalSystem::flow(VectorField::hou_luo_default(1.0), IntegratorConfig::rk4(1e-2)).unwrap();
    let shear = DynamicalSystem::flow(VectorField::sine_shear(), IntegratorConfig::rk4(1e-2)).unwrap();
    let systems: Vec<(&str, DynamicalSystem)> = vec![
        ("identity", DynamicalSystem::identity(3).unwrap()),
        ("translation", DynamicalSystem::translation(&[0.123, 0.7, 0.31]).unwrap()),
        ("cat map", DynamicalSystem::arnold_cat()),
        ("abc", abc),
        ("hou-luo", hl),
        ("shear", shear),
    ];
    let mut runs = 0;
    let mut failures = Vec::new();
    let mut worst_ac = 0.0f64;
    for (label, sys) in &systems {
        let dim = sys.dim();
        let samples = SampleSet::generate(sys, &quad, 1.0, 0.0, &opts).map_err(|e| e.to_string())?;
        for norm in [CutoffNorm::SupNorm, CutoffNorm::Euclidean] {
            for k in 1..=4 {
                let f = FourierFamily::cutoff(dim, k, norm, true).unwrap();
                let est = samples.estimate(&f, &opts).map_err(|e| e.to_string())?;
                let rep = bound_report(&est, &f);
                runs += 1;
                if !rep.holds() {
                    failures.push(format!("{label} K = {k}: {}", rep.violations.join("; ")));
                }
            }
        }
        let k = if dim == 2 { vec![1, 1] } else { vec![1, -1, 2] };
        let ac = koopman_autocorrelation_check(sys, &FourierIndex::new(&k).unwrap(), 1.0, 0.0, &quad, &opts)
            .map_err(|e| e.to_string())?;
        let d = (ac.lhs - ac.rhs).abs();
        worst_ac = worst_ac.max(d);
        if d > 1e-12 {
            failures.push(format!("{label} autocorrelation |lhs - rhs| = {d:e}"));
        }
    }
    let detail = format!("{runs} estimates within bounds, max autocorrelation gap {worst_ac:.2e}");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failures.join(" | ")))
    }
}

fn commutator_identity() -> Outcome {
    let start = Instant::now();
    let b = run_experiment(&ExperimentSpec::new("commutator_identity_suite")).map_err(|e| e.to_string())?;
    let names: Vec<&str> = b.checks.iter().map(|c| c.name.as_str()).collect();
    match experiment_checks(&b, &names) {
        Ok(d) => within(Duration::from_secs(10), start.elapsed(), d),
        e => e,
    }
}

fn houluo_trend() -> Outcome {
    let start = Instant::now();
    let b = run_experiment(&ExperimentSpec::new("houluo_sigma_sweep").set("a", 1)).map_err(|e| e.to_string())?;
    match experiment_checks(&b, &["flat_at_start", "growth_in_K"]) {
        Ok(d) => within(Duration::from_secs(300), start.elapsed(), d),
        e => e,
    }
}

fn abc_control() -> Outcome {
    let start = Instant::now();
    let b = run_experiment(&ExperimentSpec::new("abc_sigma_control")).map_err(|e| e.to_string())?;
    match experiment_checks(&b, &["flat_band"]) {
        Ok(d) => within(Duration::from_secs(300), start.elapsed(), d),
        e => e,
    }
}

fn measure_preservation_abc() -> Outcome {
    let sys = DynamicalSystem::flow(VectorField::abc(1.0, 1.0, 1.0), IntegratorConfig::rk4(1e-3)).unwrap();
    let res = measure_preservation(
        &sys,
        1.0,
        0.0,
        &Quadrature::monte_carlo(4000, 42),
        &default_observables(3),
        &EstimateOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let detail = res
        .iter()
        .map(|r| format!("{} {:.2e} (SE {:.2e})", r.observable, r.residual, r.se_diff))
        .collect::<Vec<_>>()
        .join(", ");
    if res.len() == 3 && res.iter().all(|r| r.residual <= MP_SIGNIFICANCE * r.se_diff) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn reproducibility() -> Outcome {
    let out = tempfile::tempdir().unwrap();
    let root = out.path().to_str().unwrap();
    let estimate = [
        "estimate", "--system", "abc", "--A", "1", "--B", "1", "--C", "1", "--K", "2", "--h", "1", "--n", "3000",
        "--seed", "7", "--threads", "1", "--out", root,
    ];
    let mut checked = Vec::new();
    let mut first_runs = vec![torcom(&estimate)];
    first_runs.push(torcom(&["experiment", "table1_sanity", "--threads", "1", "--out", root]));
    for run in first_runs {
        if !run.status.success() {
            return Err(format!("first run failed: {}", String::from_utf8_lossy(&run.stderr)));
        }
        let dir = results_dir(&run.stderr);
        let before = std::fs::read(Path::new(&dir).join("summary.json")).unwrap();
        let manifest = Path::new(&dir).join("manifest.json");
        for threads in ["2", "5"] {
            let again = torcom(&["rerun", manifest.to_str().unwrap(), "--threads", threads]);
            let again_dir = results_dir(&again.stderr);
            let after = std::fs::read(Path::new(&again_dir).join("summary.json")).unwrap();
            if again_dir != dir || after != before {
                return Err(format!("{dir} differs on rerun with {threads} threads"));
            }
            checked.push(threads);
        }
    }
    Ok(format!("{} reruns at 2 and 5 threads bitwise identical", checked.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("translation benchmark", translation_benchmark),
        ("cat-map benchmark", cat_map_benchmark),
        ("vanishing criterion", vanishing),
        ("oracle equivalence", oracle_equivalence),
        ("small-time scaling", small_time_scaling),
        ("bound suite", bound_suite),
        ("commutator identity", commutator_identity),
        ("hou-luo diagnostic trend", houluo_trend),
        ("abc control", abc_control),
        ("measure preservation", measure_preservation_abc),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{secs:.2} s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
