//! `torcom`: estimates of the tracial commutator functional and canned
//! experiments from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use torus_commutator::config::{
    IntegratorMethod, OutputSpec, RunConfig, SystemSpec, OUT_DIR_ENV, SYSTEM_KINDS,
};
use torus_commutator::experiments::{ExperimentSpec, EXPERIMENTS};
use torus_commutator::functional::FailurePolicy;
use torus_commutator::jobs::{execute, rerun, Completed};
use torus_commutator::observables::CutoffNorm;
use torus_commutator::output::{to_json_string, Job};
use torus_commutator::torus::SamplingStrategy;
use torus_commutator::Error;

const CONFIG_HELP: &str = "\
CONFIGURATION FILE (TOML, passed with --config; flags override it)

[system]           required; kind = identity | translation | cat_map | abc | hou_luo | shear | trig_composite
  identity:        dim
  translation:     a = [a1, ..., ad]
  cat_map:         matrix = [[2, 1], [1, 1]] (default)
  abc:             A, B, C
  hou_luo:         a (> 0), center = [0.5, 0.5, 0.5] (default)
  shear:           dim = 3, profile = [{ wavenumber = 1, cos = 0.0, sin = 1.0 }] (default U(y) = sin 2 pi y)
  trig_composite:  dim, terms = [{ amplitude = [...], wavevector = [...], phase = 0.0 }]
[family]           K = 2, norm = \"sup_norm\" | \"euclidean\", half_lattice = true,
                   modes = [[1, 0, 0], ...] (replaces the cutoff family), k_sweep = []
[quadrature]       strategy = \"monte_carlo\" | \"grid\", n = 2000, seed = 42
[time]             h = 1.0, t0 = 0.0, h_sweep = [] (flows), t0_sweep = []
[integrator]       method = \"rk4\" | \"dopri5\", max_step = min(h, 1e-2), abs_tol = 1e-10, rel_tol = 1e-10
[output]           dir (default: $TORCOM_OUT_DIR, then ./results)
[diagnostics]      measure_preservation = true, sensitivity_steps = [], seeds = []
[run]              threads (default: all cores; never changes results),
                   on_failure = \"propagate\" | \"skip_and_flag\", exclude_flagged = false, retain_cap = 1000000

EXIT CODES
  0 success, 1 an acceptance check failed, 2 invalid configuration, 3 numerical failure";

#[derive(Parser, Debug)]
#[command(name = "torcom", version, about = "Tracial commutator functionals of torus dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate S_h(F; t0) for one system and observable family.
    #[command(after_long_help = CONFIG_HELP)]
    Estimate(EstimateArgs),
    /// Run a canned experiment and print one PASS/FAIL line per check.
    Experiment(ExperimentArgs),
    /// Rerun the job recorded in a manifest.json.
    Rerun(RerunArgs),
    /// List systems and experiments.
    List,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Norm {
    SupNorm,
    Euclidean,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Rk4,
    Dopri5,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OnFailure {
    Propagate,
    SkipAndFlag,
}

#[derive(Args, Debug, Default)]
struct EstimateArgs {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// System kind: identity, translation, cat_map, abc, hou_luo, shear.
    #[arg(long)]
    system: Option<String>,
    /// Translation vector (comma separated) or Hou-Luo strength.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long = "A", allow_hyphen_values = true)]
    abc_a: Option<f64>,
    #[arg(long = "B", allow_hyphen_values = true)]
    abc_b: Option<f64>,
    #[arg(long = "C", allow_hyphen_values = true)]
    abc_c: Option<f64>,
    /// Cat-map matrix as a11,a12,a21,a22.
    #[arg(long, allow_hyphen_values = true)]
    matrix: Option<String>,
    /// Hou-Luo centre as c1,c2,c3.
    #[arg(long)]
    center: Option<String>,
    /// Torus dimension for identity and shear.
    #[arg(long)]
    dim: Option<usize>,
    /// Explicit modes, `;`-separated, e.g. `1,0,0;0,1,0`.
    #[arg(long, allow_hyphen_values = true)]
    modes: Option<String>,
    /// Fourier cutoff K.
    #[arg(long = "K")]
    k: Option<u32>,
    #[arg(long, value_enum)]
    norm: Option<Norm>,
    /// Enumerate both k and -k instead of folding them.
    #[arg(long)]
    full_lattice: bool,
    /// Extra cutoffs on the same samples, comma separated.
    #[arg(long)]
    k_sweep: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t0: Option<f64>,
    /// Step lengths for a small-time series, comma separated.
    #[arg(long)]
    h_sweep: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    t0_sweep: Option<String>,
    /// Number of samples.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Midpoint grid instead of Monte Carlo (n must be a perfect power).
    #[arg(long)]
    grid: bool,
    #[arg(long, value_enum)]
    integrator: Option<Method>,
    #[arg(long)]
    max_step: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long, value_enum)]
    on_failure: Option<OnFailure>,
    /// Drop samples whose trajectory crossed a field cut.
    #[arg(long)]
    exclude_flagged: bool,
    #[arg(long)]
    retain_cap: Option<usize>,
    /// Skip the measure-preservation residuals.
    #[arg(long)]
    no_mp: bool,
    /// RK4 step ladder for a sensitivity study, comma separated.
    #[arg(long)]
    sensitivity_steps: Option<String>,
    /// Seeds for a multi-seed study, comma separated.
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Results root (overrides the config file and TORCOM_OUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Experiment name (see `torcom list`).
    name: String,
    /// Hou-Luo strength or translation shift.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Any other parameter as key=value; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RerunArgs {
    manifest: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    /// Results root; defaults to the one recorded in the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>, Error> {
    s.split(',')
        .map(|v| v.trim().parse::<T>())
        .collect::<Result<_, _>>()
        .map_err(|_| Error::Config(format!("--{flag} expects a comma-separated list, got `{s}`")))
}

fn system_from_flags(a: &EstimateArgs, base: Option<&SystemSpec>) -> Result<Option<SystemSpec>, Error> {
    let kind = match (&a.system, base) {
        (Some(k), _) => k.as_str(),
        (None, Some(b)) => b.kind(),
        (None, None) => return Ok(None),
    };
    let same = base.filter(|b| b.kind() == kind);
    let spec = match kind {
        "identity" => SystemSpec::Identity {
            dim: a
                .dim
                .or(match same {
                    Some(SystemSpec::Identity { dim }) => Some(*dim),
                    _ => None,
                })
                .unwrap_or(3),
        },
        "translation" => {
            let shift = match (&a.a, same) {
                (Some(s), _) => list("a", s)?,
                (None, Some(SystemSpec::Translation { a })) => a.clone(),
                _ => return Err(Error::Config("translation needs --a a1,...,ad".into())),
            };
            SystemSpec::Translation { a: shift }
        }
        "cat_map" => {
            let matrix = match (&a.matrix, same) {
                (Some(m), _) => {
                    let v: Vec<i64> = list("matrix", m)?;
                    if v.len() != 4 {
                        return Err(Error::Config("--matrix needs 4 integers".into()));
                    }
                    [[v[0], v[1]], [v[2], v[3]]]
                }
                (None, Some(SystemSpec::CatMap { matrix })) => *matrix,
                _ => [[2, 1], [1, 1]],
            };
            SystemSpec::CatMap { matrix }
        }
        "abc" => {
            let (da, db, dc) = match same {
                Some(SystemSpec::Abc { a, b, c }) => (*a, *b, *c),
                _ => (1.0, 1.0, 1.0),
            };
            SystemSpec::Abc {
                a: a.abc_a.unwrap_or(da),
                b: a.abc_b.unwrap_or(db),
                c: a.abc_c.unwrap_or(dc),
            }
        }
        "hou_luo" => {
            let (da, dc) = match same {
                Some(SystemSpec::HouLuo { a, center }) => (*a, *center),
                _ => (1.0, [0.5; 3]),
            };
            let strength = match &a.a {
                Some(s) => s
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("hou_luo --a expects one number, got `{s}`")))?,
                None => da,
            };
            let center = match &a.center {
                Some(c) => {
                    let v: Vec<f64> = list("center", c)?;
                    <[f64; 3]>::try_from(v.as_slice())
                        .map_err(|_| Error::Config("--center needs 3 numbers".into()))?
                }
                None => dc,
            };
            SystemSpec::HouLuo { a: strength, center }
        }
        "shear" => match same {
            Some(SystemSpec::Shear { profile, dim }) => SystemSpec::Shear {
                profile: profile.clone(),
                dim: a.dim.unwrap_or(*dim),
            },
            _ => {
                let mut s: SystemSpec = serde_json::from_value(json!({ "kind": "shear" }))?;
                if let (SystemSpec::Shear { dim, .. }, Some(d)) = (&mut s, a.dim) {
                    *dim = d;
                }
                s
            }
        },
        "trig_composite" => match same {
            Some(s) => s.clone(),
            None => {
                return Err(Error::Config(
                    "trig_composite systems are only available through --config".into(),
                ))
            }
        },
        other => {
            return Err(Error::Config(format!(
                "unknown system `{other}`; valid systems: {}",
                SYSTEM_KINDS.join(", ")
            )))
        }
    };
    Ok(Some(spec))
}

fn build_config(a: &EstimateArgs) -> Result<RunConfig, Error> {
    let mut c = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    c.system = system_from_flags(a, c.system.as_ref())?;
    if let Some(m) = &a.modes {
        let modes = m
            .split(';')
            .map(|k| list::<i64>("modes", k))
            .collect::<Result<Vec<_>, _>>()?;
        c.family.modes = Some(modes);
    }
    if let Some(k) = a.k {
        c.family.k = k;
        c.family.modes = None;
    }
    if let Some(n) = a.norm {
        c.family.norm = match n {
            Norm::SupNorm => CutoffNorm::SupNorm,
            Norm::Euclidean => CutoffNorm::Euclidean,
        };
    }
    if a.full_lattice {
        c.family.half_lattice = false;
    }
    if let Some(s) = &a.k_sweep {
        c.family.k_sweep = list("k-sweep", s)?;
    }
    if let Some(h) = a.h {
        c.time.h = h;
    }
    if let Some(t) = a.t0 {
        c.time.t0 = t;
    }
    if let Some(s) = &a.h_sweep {
        c.time.h_sweep = list("h-sweep", s)?;
    }
    if let Some(s) = &a.t0_sweep {
        c.time.t0_sweep = list("t0-sweep", s)?;
    }
    if let Some(n) = a.n {
        c.quadrature.n = n;
    }
    if let Some(s) = a.seed {
        c.quadrature.seed = s;
    }
    if a.grid {
        c.quadrature.strategy = SamplingStrategy::Grid;
    }
    if let Some(m) = a.integrator {
        c.integrator.method = match m {
            Method::Rk4 => IntegratorMethod::Rk4,
            Method::Dopri5 => IntegratorMethod::Dopri5,
        };
    }
    if a.max_step.is_some() {
        c.integrator.max_step = a.max_step;
    }
    if let Some(v) = a.abs_tol {
        c.integrator.abs_tol = v;
    }
    if let Some(v) = a.rel_tol {
        c.integrator.rel_tol = v;
    }
    if let Some(p) = a.on_failure {
        c.run.on_failure = match p {
            OnFailure::Propagate => FailurePolicy::Propagate,
            OnFailure::SkipAndFlag => FailurePolicy::SkipAndFlag,
        };
    }
    if a.exclude_flagged {
        c.run.exclude_flagged = true;
    }
    if let Some(v) = a.retain_cap {
        c.run.retain_cap = v;
    }
    if a.no_mp {
        c.diagnostics.measure_preservation = false;
    }
    if let Some(s) = &a.sensitivity_steps {
        c.diagnostics.sensitivity_steps = list("sensitivity-steps", s)?;
    }
    if let Some(s) = &a.seeds {
        c.diagnostics.seeds = list("seeds", s)?;
    }
    if a.threads.is_some() {
        c.run.threads = a.threads;
    }
    if let Some(o) = &a.out {
        c.output.dir = Some(o.display().to_string());
    }
    Ok(c)
}

fn report_done(done: &Completed) {
    eprintln!("results: {}", done.dir.display());
    for w in &done.manifest.warnings {
        eprintln!("warning: {w}");
    }
}

fn checks_exit(done: &Completed) -> ExitCode {
    if done.bundle.checks.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn estimate(a: &EstimateArgs) -> Result<ExitCode, Error> {
    let config = build_config(a)?;
    config.validate()?;
    if a.dry_run {
        print!("{}", config.to_toml()?);
        return Ok(ExitCode::SUCCESS);
    }
    let root = PathBuf::from(config.output.resolve());
    let threads = config.run.threads;
    let done = execute(&Job::Estimate { config }, threads, &root)?;
    print!("{}", std::fs::read_to_string(done.dir.join("summary.json"))?);
    report_done(&done);
    if done.bundle.checks.iter().all(|c| c.passed) {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(Error::Consistency(
            done.bundle
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.detail.clone())
                .collect::<Vec<_>>()
                .join("; "),
        ))
    }
}

fn experiment(a: &ExperimentArgs) -> Result<ExitCode, Error> {
    let mut spec = ExperimentSpec::new(&a.name);
    if let Some(v) = &a.a {
        spec = spec.set("a", v);
    }
    if let Some(v) = a.n {
        spec = spec.set("n", v);
    }
    if let Some(v) = a.seed {
        spec = spec.set("seed", v);
    }
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        spec = spec.set(k.trim(), v);
    }
    let job = spec.job()?;
    let root = out_root(a.out.as_ref());
    let done = execute(&job, a.threads, &root)?;
    for c in &done.bundle.checks {
        println!("{}", c.line());
    }
    report_done(&done);
    Ok(checks_exit(&done))
}

fn out_root(flag: Option<&PathBuf>) -> PathBuf {
    flag.cloned().unwrap_or_else(|| PathBuf::from(OutputSpec::default().resolve()))
}

fn rerun_cmd(a: &RerunArgs) -> Result<ExitCode, Error> {
    let done = rerun(&a.manifest, a.threads, a.out.as_deref())?;
    for c in &done.bundle.checks {
        println!("{}", c.line());
    }
    report_done(&done);
    Ok(checks_exit(&done))
}

fn error_json(e: &Error) -> String {
    let mut v = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
    let msg = e.to_string();
    if matches!(e, Error::Config(_)) && msg.contains("system") {
        v["error"]["valid_systems"] = json!(SYSTEM_KINDS);
    }
    if matches!(e, Error::UnknownExperiment { .. }) {
        v["error"]["valid_experiments"] = json!(EXPERIMENTS);
    }
    to_json_string(&v).unwrap_or_else(|_| format!("{{\"error\": {msg:?}}}\n"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Experiment(a) => experiment(a),
        Command::Rerun(a) => rerun_cmd(a),
        Command::List => {
            println!("systems: {}", SYSTEM_KINDS.join(", "));
            println!("experiments: {}", EXPERIMENTS.join(", "));
            println!("default results root: ${OUT_DIR_ENV} or ./results");
            Ok(ExitCode::SUCCESS)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprint!("{}", error_json(&e));
            ExitCode::from(if e.is_usage() { 2 } else { 3 })
        }
    }
}
