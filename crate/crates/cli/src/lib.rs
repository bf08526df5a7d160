//! Scenario runner for the birkhoff laboratory.

pub mod pipeline;
pub mod scenario;
pub mod svg;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

pub use pipeline::{Assertion, StepOutcome};
pub use scenario::{Scenario, Step};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BIRKHOFF_LAB_OUT";
pub const DEFAULT_OUT_DIR: &str = "birkhoff-out";

#[derive(Debug, Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("assertion failed: {0}")]
    Assertion(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Assertion(_) => 1,
            LabError::Config(_) => 2,
            LabError::Runtime(_) => 3,
        }
    }
}

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../scenarios/", $name, ".toml")))),*]
    };
}

/// Scenarios shipped with the binary, as `(name, toml)`.
pub const BUNDLED: &[(&str, &str)] = bundled![
    "chain_table_G5",
    "sphere_conjugate_points",
    "torus_floquet",
    "torus_csf",
    "flat_circle_extinction",
    "theorem_b_spheroid",
    "torus_trapped",
    "dumbbell_trapped",
    "sphere_area",
    "dumbbell_homoclinic",
];

pub fn bundled(name: &str) -> Option<Scenario> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Scenario::parse(text).expect("bundled scenarios parse"))
}

/// A bundled name or a path to a scenario file.
pub fn load(arg: &str) -> Result<Scenario, LabError> {
    if let Some(s) = bundled(arg) {
        return Ok(s);
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(LabError::Config(format!("no bundled scenario or file named `{arg}`")));
    }
    let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{arg}: {e}")))?;
    Scenario::parse(&text)
}

pub fn describe(name: &str) -> Result<String, LabError> {
    let s = bundled(name).ok_or_else(|| LabError::Config(format!("unknown scenario `{name}`")))?;
    let mut out = format!("{}\n  anchor: {}\n", s.name, s.anchor);
    if !s.description.is_empty() {
        out.push_str(&format!("  {}\n", s.description.trim()));
    }
    out.push_str(&format!("  surface: {:?}\n", s.surface));
    for step in &s.steps {
        out.push_str(&format!("  step: {}\n", step.name()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct StepReport {
    pub op: String,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    pub result: Value,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub anchor: String,
    pub version: String,
    pub seed: Option<u64>,
    pub surface: Value,
    pub passed: bool,
    pub steps: Vec<StepReport>,
    /// Wall-clock seconds per step; the only non-deterministic field.
    pub timings: Vec<f64>,
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Runs every step on a pool of `threads` workers, writes `report.json`
/// and step files under `out/<scenario>/`, and returns the report. The
/// error variant carries the exit status.
pub fn run(s: &Scenario, out: &Path, threads: Option<usize>) -> Result<Report, LabError> {
    s.validate()?;
    let m = s.surface.build().map_err(|e| LabError::Config(e.to_string()))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(LabError::Config("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| LabError::Runtime(e.to_string()))?;
    let dir = out.join(&s.name);
    std::fs::create_dir_all(&dir).map_err(|e| LabError::Runtime(format!("{}: {e}", dir.display())))?;
    let mut report = Report {
        scenario: s.name.clone(),
        anchor: s.anchor.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: s.seed,
        surface: serde_json::to_value(&s.surface).expect("surface serialises"),
        passed: true,
        steps: Vec::new(),
        timings: Vec::new(),
    };
    let write = |name: &str, text: &str| -> Result<(), LabError> {
        std::fs::write(dir.join(name), text).map_err(|e| LabError::Runtime(format!("{name}: {e}")))
    };
    for (i, step) in s.steps.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = pool.install(|| pipeline::run_step(&m, step, s.seed))?;
        report.timings.push(t0.elapsed().as_secs_f64());
        let mut files = Vec::new();
        for (name, text) in &outcome.files {
            let name = format!("{i:02}_{name}");
            write(&name, text)?;
            files.push(name);
        }
        let passed = outcome.assertions.iter().all(|a| a.passed);
        report.passed &= passed;
        report.steps.push(StepReport { op: step.name().into(), passed, assertions: outcome.assertions, result: outcome.result, files });
    }
    let json = serde_json::to_string_pretty(&report).expect("report serialises");
    write("report.json", &json)?;
    if !report.passed {
        let failed: Vec<String> = report
            .steps
            .iter()
            .flat_map(|st| st.assertions.iter().filter(|a| !a.passed).map(move |a| format!("{}: {} ({})", st.op, a.name, a.detail)))
            .collect();
        return Err(LabError::Assertion(failed.join("; ")));
    }
    Ok(report)
}

/// Surgery topology for a JSON configuration file.
pub fn surgery(path: &Path) -> Result<String, LabError> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
    let cfg: birkhoff_surgery::ConfigFile = serde_json::from_str(&text).map_err(|e| LabError::Config(e.to_string()))?;
    let cfg = birkhoff_surgery::CurveConfiguration::from(cfg);
    let topo = birkhoff_surgery::fried_surgery_topology(&cfg).map_err(|e| LabError::Config(e.to_string()))?;
    Ok(serde_json::to_string_pretty(&topo).expect("topology serialises"))
}
