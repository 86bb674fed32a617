//! Result bundles, reproducibility manifests and their on-disk layout
//! `<out>/<job>/<run-id>/{summary.json, series.csv, manifest.json, diagnostics.json}`.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// JSON formatter that writes every float with 17 significant digits, which
/// round-trips any `f64` exactly. Everything else is delegated.
struct Digits17<F>(F);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl<F: Formatter> Formatter for Digits17<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        end_object_key(),
        begin_object_value(),
        end_object_value(),
    );
}

fn write_with<S: Serialize, F: Formatter>(v: &S, f: F) -> Result<String> {
    // going through `Value` sorts object keys and turns non-finite floats into null
    let value = serde_json::to_value(v)?;
    let mut out = Vec::new();
    value.serialize(&mut serde_json::Serializer::with_formatter(&mut out, Digits17(f)))?;
    String::from_utf8(out).map_err(|e| Error::Serialization(e.to_string()))
}

/// Pretty JSON with sorted keys and 17-digit floats, newline terminated.
pub fn to_json_string<S: Serialize>(v: &S) -> Result<String> {
    let mut s = write_with(v, PrettyFormatter::new())?;
    s.push('\n');
    Ok(s)
}

/// Compact form of [`to_json_string`].
pub fn to_json_compact<S: Serialize>(v: &S) -> Result<String> {
    write_with(v, CompactFormatter)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Num(v) if v.is_finite() => write!(f, "{v:.16e}"),
            Cell::Num(_) => Ok(()),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

/// Plot-ready table with a header row.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|c| c.to_string())).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// One acceptance check of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

/// Everything a job produces apart from the manifest.
#[derive(Clone, Debug, Default)]
pub struct Bundle {
    pub summary: Value,
    pub series: Table,
    pub diagnostics: Value,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub tolerances: BTreeMap<String, f64>,
}

/// What to run; enough to reproduce the job bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Job {
    Estimate { config: RunConfig },
    Experiment {
        name: String,
        /// Every parameter with its resolved value.
        parameters: BTreeMap<String, String>,
    },
}

impl Job {
    pub fn label(&self) -> &str {
        match self {
            Job::Estimate { .. } => "estimate",
            Job::Experiment { name, .. } => name,
        }
    }

    /// First 12 hex digits of the SHA-256 of the canonical job, ignoring
    /// settings that cannot change results (threads, output root).
    pub fn run_id(&self) -> Result<String> {
        let mut job = self.clone();
        if let Job::Estimate { config } = &mut job {
            config.run.threads = None;
            config.output.dir = None;
        }
        let text = to_json_compact(&job)?;
        Ok(hex::encode(Sha256::digest(text.as_bytes()))[..12].to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub version: String,
    pub job: Job,
    pub threads: usize,
    pub output_root: String,
    pub timestamp_unix: u64,
    pub wall_clock_seconds: f64,
    pub tolerances: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub checks: Vec<ManifestCheck>,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestCheck {
    pub name: String,
    pub passed: bool,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid manifest {}: {e}", path.display())))
    }
}

pub const FILES: [&str; 4] = ["summary.json", "series.csv", "manifest.json", "diagnostics.json"];

/// Writes the bundle and its manifest; returns the run directory.
pub fn write_bundle(
    root: &Path,
    job: &Job,
    bundle: &Bundle,
    threads: usize,
    wall_clock_seconds: f64,
) -> Result<(PathBuf, Manifest)> {
    let run_id = job.run_id()?;
    let dir = root.join(job.label()).join(&run_id);
    std::fs::create_dir_all(&dir)?;
    let mut summary = bundle.summary.clone();
    if let Value::Object(m) = &mut summary {
        m.insert("run_id".into(), Value::String(run_id.clone()));
        m.insert("checks".into(), serde_json::to_value(&bundle.checks)?);
    }
    std::fs::write(dir.join("summary.json"), to_json_string(&summary)?)?;
    std::fs::write(dir.join("series.csv"), bundle.series.to_csv()?)?;
    std::fs::write(dir.join("diagnostics.json"), to_json_string(&bundle.diagnostics)?)?;
    let manifest = Manifest {
        run_id,
        version: VERSION.into(),
        job: job.clone(),
        threads,
        output_root: root.display().to_string(),
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        wall_clock_seconds,
        tolerances: bundle.tolerances.clone(),
        warnings: bundle.warnings.clone(),
        checks: bundle
            .checks
            .iter()
            .map(|c| ManifestCheck {
                name: c.name.clone(),
                passed: c.passed,
            })
            .collect(),
        files: FILES.iter().map(|s| s.to_string()).collect(),
    };
    std::fs::write(dir.join("manifest.json"), to_json_string(&manifest)?)?;
    Ok((dir, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemSpec;
    use proptest::prelude::*;

    #[test]
    fn floats_get_seventeen_digits() {
        let s = to_json_compact(&serde_json::json!({"b": 0.1, "a": 3, "c": [f64::NAN, 1.0]})).unwrap();
        assert_eq!(s, r#"{"a":3,"b":1.0000000000000001e-1,"c":[null,1.0000000000000000e0]}"#);
    }

    proptest! {
        #[test]
        fn canonical_floats_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let s = to_json_string(&x).unwrap();
            let back: f64 = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut t = Table::new(&["K", "value", "note"]);
        t.push(vec![2u32.into(), 0.5.into(), "a,b".into()]);
        let csv = t.to_csv().unwrap();
        assert_eq!(csv, "K,value,note\n2,5.0000000000000000e-1,\"a,b\"\n");
    }

    #[test]
    fn run_id_ignores_threads_and_output() {
        let mut c = RunConfig {
            system: Some(SystemSpec::Identity { dim: 2 }),
            ..Default::default()
        };
        let a = Job::Estimate { config: c.clone() }.run_id().unwrap();
        c.run.threads = Some(3);
        c.output.dir = Some("/tmp/x".into());
        assert_eq!(Job::Estimate { config: c.clone() }.run_id().unwrap(), a);
        c.quadrature.seed += 1;
        assert_ne!(Job::Estimate { config: c }.run_id().unwrap(), a);
        assert_eq!(a.len(), 12);
    }

    #[test]
    fn bundle_layout_and_manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let job = Job::Experiment {
            name: "demo".into(),
            parameters: BTreeMap::from([("n".to_string(), "10".to_string())]),
        };
        let bundle = Bundle {
            summary: serde_json::json!({"value": 1.5}),
            checks: vec![Check::new("x", true, "ok")],
            ..Default::default()
        };
        let (run_dir, m) = write_bundle(dir.path(), &job, &bundle, 2, 0.1).unwrap();
        for f in FILES {
            assert!(run_dir.join(f).exists(), "{f}");
        }
        assert!(run_dir.starts_with(dir.path().join("demo")));
        let back = Manifest::load(&run_dir.join("manifest.json")).unwrap();
        assert_eq!(back, m);
    }
}
