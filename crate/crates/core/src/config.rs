//! Run configuration: a TOML document describing one estimate, validated in
//! full before any computation.
//!
//! ```toml
//! [system]
//! kind = "abc"
//! A = 1.0
//! B = 1.0
//! C = 1.0
//!
//! [family]
//! K = 2
//!
//! [quadrature]
//! n = 3000
//! seed = 7
//! ```
//!
//! Every key has a default except `system`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsOptions;
use crate::dynamics::{DynamicalSystem, IntegratorConfig, ShearMode, TrigTerm, VectorField};
use crate::error::{Error, Result};
use crate::functional::{EstimateOptions, FailurePolicy, Quadrature};
use crate::observables::{CutoffNorm, FourierFamily, FourierIndex};
use crate::torus::SamplingStrategy;

pub const SYSTEM_KINDS: [&str; 7] = [
    "identity",
    "translation",
    "cat_map",
    "abc",
    "hou_luo",
    "shear",
    "trig_composite",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShearModeSpec {
    pub wavenumber: i64,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTermSpec {
    pub amplitude: Vec<f64>,
    pub wavevector: Vec<i64>,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Identity {
        dim: usize,
    },
    Translation {
        a: Vec<f64>,
    },
    CatMap {
        #[serde(default = "default_cat")]
        matrix: [[i64; 2]; 2],
    },
    Abc {
        #[serde(rename = "A")]
        a: f64,
        #[serde(rename = "B")]
        b: f64,
        #[serde(rename = "C")]
        c: f64,
    },
    HouLuo {
        a: f64,
        #[serde(default = "default_center")]
        center: [f64; 3],
    },
    Shear {
        #[serde(default = "default_shear")]
        profile: Vec<ShearModeSpec>,
        #[serde(default = "default_three")]
        dim: usize,
    },
    TrigComposite {
        dim: usize,
        terms: Vec<TrigTermSpec>,
    },
}

fn default_cat() -> [[i64; 2]; 2] {
    [[2, 1], [1, 1]]
}

fn default_center() -> [f64; 3] {
    [0.5; 3]
}

fn default_shear() -> Vec<ShearModeSpec> {
    vec![ShearModeSpec {
        wavenumber: 1,
        cos: 0.0,
        sin: 1.0,
    }]
}

fn default_three() -> usize {
    3
}

impl SystemSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            SystemSpec::Identity { .. } => "identity",
            SystemSpec::Translation { .. } => "translation",
            SystemSpec::CatMap { .. } => "cat_map",
            SystemSpec::Abc { .. } => "abc",
            SystemSpec::HouLuo { .. } => "hou_luo",
            SystemSpec::Shear { .. } => "shear",
            SystemSpec::TrigComposite { .. } => "trig_composite",
        }
    }

    fn field(&self) -> Result<Option<VectorField<f64>>> {
        Ok(Some(match self {
            SystemSpec::Abc { a, b, c } => VectorField::abc(*a, *b, *c),
            SystemSpec::HouLuo { a, center } => VectorField::hou_luo(*a, *center),
            SystemSpec::Shear { profile, dim } => VectorField::Shear {
                profile: profile
                    .iter()
                    .map(|m| ShearMode {
                        wavenumber: m.wavenumber,
                        cos_coef: m.cos,
                        sin_coef: m.sin,
                    })
                    .collect(),
                dim: *dim,
            },
            SystemSpec::TrigComposite { dim, terms } => VectorField::TrigComposite {
                dim: *dim,
                terms: terms
                    .iter()
                    .map(|t| {
                        if t.amplitude.len() != *dim || t.wavevector.len() != *dim {
                            return Err(Error::Config(format!(
                                "trig term needs {dim} amplitude and wavevector components"
                            )));
                        }
                        let mut amplitude = [0.0; 3];
                        let mut wavevector = [0; 3];
                        amplitude[..*dim].copy_from_slice(&t.amplitude);
                        wavevector[..*dim].copy_from_slice(&t.wavevector);
                        Ok(TrigTerm {
                            amplitude,
                            wavevector,
                            phase: t.phase,
                        })
                    })
                    .collect::<Result<_>>()?,
            },
            _ => return Ok(None),
        }))
    }

    pub fn build(&self, integrator: &IntegratorSpec) -> Result<DynamicalSystem<f64>> {
        match self {
            SystemSpec::Identity { dim } => DynamicalSystem::identity(*dim),
            SystemSpec::Translation { a } => DynamicalSystem::translation(a),
            SystemSpec::CatMap { matrix } => DynamicalSystem::cat_map(*matrix),
            _ => {
                let field = self.field()?.expect("flow kinds have a field");
                DynamicalSystem::flow(field, integrator.build()?)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilySpec {
    /// Cutoff `K` of `F_K`.
    #[serde(rename = "K")]
    pub k: u32,
    pub norm: CutoffNorm,
    pub half_lattice: bool,
    /// Explicit modes; replaces the cutoff family when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<Vec<i64>>>,
    /// Extra cutoffs evaluated on the same samples.
    pub k_sweep: Vec<u32>,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec {
            k: 2,
            norm: CutoffNorm::SupNorm,
            half_lattice: true,
            modes: None,
            k_sweep: Vec::new(),
        }
    }
}

impl FamilySpec {
    pub fn build(&self, dim: usize) -> Result<FourierFamily> {
        match &self.modes {
            Some(modes) => {
                if modes.is_empty() {
                    return Err(Error::Config("family.modes must not be empty".into()));
                }
                let idx = modes
                    .iter()
                    .map(|k| {
                        if k.len() != dim {
                            return Err(Error::Config(format!(
                                "mode {k:?} has {} components, system dimension is {dim}",
                                k.len()
                            )));
                        }
                        FourierIndex::new(k)
                    })
                    .collect::<Result<Vec<_>>>()?;
                FourierFamily::explicit(&idx)
            }
            None => self.cutoff(dim, self.k),
        }
    }

    pub fn cutoff(&self, dim: usize, k: u32) -> Result<FourierFamily> {
        if k == 0 {
            return Err(Error::Config("family cutoff K must be >= 1".into()));
        }
        FourierFamily::cutoff(dim, k, self.norm, self.half_lattice)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub strategy: SamplingStrategy,
    pub n: usize,
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            strategy: SamplingStrategy::MonteCarlo,
            n: 2000,
            seed: 42,
        }
    }
}

impl QuadratureSpec {
    pub fn quadrature(&self) -> Quadrature {
        Quadrature {
            strategy: self.strategy,
            n: self.n,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSpec {
    pub h: f64,
    pub t0: f64,
    /// Step lengths for a small-time series (flows only).
    pub h_sweep: Vec<f64>,
    /// Start times for a sweep of one-step estimates.
    pub t0_sweep: Vec<f64>,
}

impl Default for TimeSpec {
    fn default() -> Self {
        TimeSpec {
            h: 1.0,
            t0: 0.0,
            h_sweep: Vec::new(),
            t0_sweep: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorMethod {
    #[default]
    Rk4,
    Dopri5,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSpec {
    pub method: IntegratorMethod,
    /// RK4 substep bound; `min(h, 1e-2)` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        IntegratorSpec {
            method: IntegratorMethod::Rk4,
            max_step: None,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
        }
    }
}

impl IntegratorSpec {
    pub fn build(&self) -> Result<IntegratorConfig<f64>> {
        let cfg = match self.method {
            IntegratorMethod::Rk4 => IntegratorConfig::Rk4 {
                max_step: self.max_step,
            },
            IntegratorMethod::Dopri5 => IntegratorConfig::DormandPrince {
                abs_tol: self.abs_tol,
                rel_tol: self.rel_tol,
            },
        };
        cfg.validate().map_err(Error::Config)?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Results root; falls back to `TORCOM_OUT_DIR`, then `results`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

pub const OUT_DIR_ENV: &str = "TORCOM_OUT_DIR";

impl OutputSpec {
    pub fn resolve(&self) -> String {
        self.dir
            .clone()
            .or_else(|| std::env::var(OUT_DIR_ENV).ok().filter(|s| !s.is_empty()))
            .unwrap_or_else(|| "results".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    /// Worker threads; all available cores when absent. Never affects results.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub on_failure: FailurePolicy,
    /// Drop samples whose trajectory crossed a field cut.
    pub exclude_flagged: bool,
    pub retain_cap: usize,
}

impl Default for RunSpec {
    fn default() -> Self {
        let o = EstimateOptions::default();
        RunSpec {
            threads: None,
            on_failure: o.on_failure,
            exclude_flagged: o.exclude_cut_crossings,
            retain_cap: o.retain_cap,
        }
    }
}

impl RunSpec {
    pub fn options(&self) -> EstimateOptions {
        EstimateOptions {
            on_failure: self.on_failure,
            exclude_cut_crossings: self.exclude_flagged,
            retain_cap: self.retain_cap,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    pub family: FamilySpec,
    pub quadrature: QuadratureSpec,
    pub time: TimeSpec,
    pub integrator: IntegratorSpec,
    pub output: OutputSpec,
    pub diagnostics: DiagnosticsOptions,
    pub run: RunSpec,
}

/// A validated configuration with its numerical objects built.
#[derive(Clone, Debug)]
pub struct ResolvedRun {
    pub config: RunConfig,
    pub system: DynamicalSystem<f64>,
    pub family: FourierFamily,
    pub sweep_families: Vec<(u32, FourierFamily)>,
    pub quadrature: Quadrature,
    pub options: EstimateOptions,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be a finite number > 0, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks every field and builds the system, families and sampler.
    pub fn validate(&self) -> Result<ResolvedRun> {
        let spec = self.system.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "no system given; valid systems: {}",
                SYSTEM_KINDS.join(", ")
            ))
        })?;
        let t = &self.time;
        if spec.kind() == "cat_map" || spec.kind() == "identity" || spec.kind() == "translation" {
            if !t.h_sweep.is_empty() {
                return Err(Error::Config(
                    "time.h_sweep needs a flow; discrete maps have no step length".into(),
                ));
            }
        } else {
            positive("time.h", t.h)?;
        }
        if !t.t0.is_finite() {
            return Err(Error::Config(format!("time.t0 must be finite, got {}", t.t0)));
        }
        for &h in &t.h_sweep {
            positive("time.h_sweep entry", h)?;
        }
        if let Some(v) = t.t0_sweep.iter().find(|v| !v.is_finite()) {
            return Err(Error::Config(format!("time.t0_sweep entry must be finite, got {v}")));
        }
        if self.quadrature.n == 0 {
            return Err(Error::Config("quadrature.n must be >= 1".into()));
        }
        if self.run.threads == Some(0) {
            return Err(Error::Config("run.threads must be >= 1".into()));
        }
        if let Some(s) = self.diagnostics.sensitivity_steps.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::Config(format!("diagnostics.sensitivity_steps entry must be > 0, got {s}")));
        }
        if !self.diagnostics.seeds.is_empty() && self.diagnostics.seeds.len() < 3 {
            return Err(Error::Config("diagnostics.seeds needs at least 3 seeds".into()));
        }
        if self.diagnostics.seeds.iter().collect::<BTreeSet<_>>().len() != self.diagnostics.seeds.len() {
            return Err(Error::Config("diagnostics.seeds must be distinct".into()));
        }
        let system = spec.build(&self.integrator).map_err(as_config)?;
        let family = self.family.build(system.dim()).map_err(as_config)?;
        let sweep_families = self
            .family
            .k_sweep
            .iter()
            .map(|&k| Ok((k, self.family.cutoff(system.dim(), k).map_err(as_config)?)))
            .collect::<Result<_>>()?;
        let quadrature = self.quadrature.quadrature();
        quadrature.sampler(system.dim())?;
        Ok(ResolvedRun {
            config: self.clone(),
            system,
            family,
            sweep_families,
            quadrature,
            options: self.run.options(),
        })
    }
}

/// Numerical constructors report parameter problems as `InvalidParameter`;
/// at the configuration layer they are configuration errors.
fn as_config(e: Error) -> Error {
    match e {
        Error::InvalidParameter(m) => Error::Config(m),
        Error::Dimension(d) => Error::Config(format!("unsupported torus dimension {d}")),
        Error::NonFinite(v) => Error::Config(format!("non-finite parameter in {v:?}")),
        other => other,
    }
}
