//! Scenario files: a TOML document with a surface block and an ordered list
//! of pipeline steps.
//!
//! ```toml
//! name = "example"
//! anchor = "what the scenario exercises"
//! seed = 7                     # required when any step samples
//!
//! [surface]                    # tagged by `kind`
//! kind = "spheroid"
//! c = 0.9
//!
//! [[step]]                     # tagged by `op`
//! op = "verify_birkhoff"
//! annuli = [{ line = "v", value = 1.5707963267948966 }]
//! n_samples = 1000
//! t_budget = 12.0
//! l_bound = 6.0
//! expect_section = true
//! ```
//!
//! Unknown keys are rejected everywhere. Every tolerance must be positive.

use birkhoff_core::csf::RegionSpec;
use birkhoff_core::geom::SurfaceSpec;
use serde::{Deserialize, Serialize};

use crate::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Short statement of the claim the scenario exercises.
    pub anchor: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub surface: SurfaceSpec,
    #[serde(rename = "step")]
    pub steps: Vec<Step>,
}

/// Unit tangent given by base point and angle from `∂u` toward the left
/// normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    pub u: f64,
    pub v: f64,
    #[serde(default)]
    pub theta: f64,
}

/// Closed geodesic through a start vector with a known period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSpec {
    pub start: StartSpec,
    pub length: f64,
    /// Lattice class `[p, q]` on tori; omitted on spheres.
    #[serde(default)]
    pub class: Option<[i32; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Line {
    U,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Forward,
    Backward,
    #[default]
    Both,
}

/// Annuli over the chart line `line = value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnulusSpec {
    pub line: Line,
    pub value: f64,
    #[serde(default)]
    pub orientation: Orientation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    /// Geodesic-chart circle of radius `r`.
    Circle { center: [f64; 2], r: f64, n: usize },
    /// Loop `t ↦ base + t·shift + amp·sin(2πjt)·n̂` in the class of `shift`.
    SineLoop { base: [f64; 2], shift: [f64; 2], amp: f64, j: u32, n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    /// Explicit geodesics; `limit_sub` indexes into `geodesics`.
    Explicit { geodesics: Vec<GeodesicSpec>, limit_sub: Vec<usize> },
    /// Chain of parallels on a sphere of revolution, completed by the finder.
    Parallels { parallels: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideSpec {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    /// Surgery over the chain pattern for `G = 1..=g_max`.
    SurgeryTable {
        g_max: u32,
        #[serde(default)]
        expect_formula: bool,
    },
    ConjugatePoints {
        start: StartSpec,
        t_max: f64,
        #[serde(default)]
        expect_first: Option<f64>,
        #[serde(default)]
        expect_none: bool,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Floquet {
        geodesic: GeodesicSpec,
        #[serde(default)]
        expect_kind: Option<String>,
        #[serde(default)]
        expect_sigma: Option<f64>,
        #[serde(default)]
        expect_rotation: Option<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Csf {
        curve: CurveSpec,
        #[serde(default)]
        region: Option<RegionSpec>,
        #[serde(default)]
        max_steps: Option<usize>,
        #[serde(default)]
        expect_length: Option<f64>,
        #[serde(default)]
        expect_collapse: bool,
        /// Extinction time, compared with relative tolerance `tol`.
        #[serde(default)]
        expect_extinction: Option<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Minimizer {
        class: [i32; 2],
        #[serde(default)]
        expect_length: Option<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    VerifyBirkhoff {
        annuli: Vec<AnnulusSpec>,
        n_samples: usize,
        t_budget: f64,
        l_bound: f64,
        #[serde(default)]
        expect_section: Option<bool>,
    },
    TrappedSets {
        system: SystemSpec,
        n_samples: usize,
        t_budget: f64,
        #[serde(default)]
        expect_no_trapping: bool,
        /// Lengths of the limit waists, compared with tolerance `tol`.
        #[serde(default)]
        expect_limit_lengths: Option<Vec<f64>>,
        #[serde(default)]
        witness_clairaut: Option<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    AreaCheck {
        annulus: AnnulusSpec,
        n_s: usize,
        n_phi: usize,
        t_budget: f64,
        max_defect: f64,
    },
    Homoclinic {
        /// Parallel near which the waist is polished.
        waist_v: f64,
        side_u: SideSpec,
        side_s: SideSpec,
        transversal_v: f64,
        t_budget: f64,
        #[serde(default)]
        expect_nonempty: Option<bool>,
    },
}

fn default_tol() -> f64 {
    1e-6
}

impl Step {
    pub fn name(&self) -> &'static str {
        match self {
            Step::SurgeryTable { .. } => "surgery_table",
            Step::ConjugatePoints { .. } => "conjugate_points",
            Step::Floquet { .. } => "floquet",
            Step::Csf { .. } => "csf",
            Step::Minimizer { .. } => "minimizer",
            Step::VerifyBirkhoff { .. } => "verify_birkhoff",
            Step::TrappedSets { .. } => "trapped_sets",
            Step::AreaCheck { .. } => "area_check",
            Step::Homoclinic { .. } => "homoclinic",
        }
    }

    fn samples(&self) -> bool {
        matches!(self, Step::VerifyBirkhoff { .. } | Step::TrappedSets { .. })
    }

    fn tolerances(&self) -> Vec<f64> {
        match self {
            Step::ConjugatePoints { tol, .. }
            | Step::Floquet { tol, .. }
            | Step::Csf { tol, .. }
            | Step::Minimizer { tol, .. }
            | Step::TrappedSets { tol, .. } => vec![*tol],
            Step::AreaCheck { max_defect, .. } => vec![*max_defect],
            _ => vec![],
        }
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, LabError> {
        let s: Scenario = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        if self.steps.is_empty() {
            return Err(LabError::Config("scenario has no steps".into()));
        }
        for step in &self.steps {
            if step.samples() && self.seed.is_none() {
                return Err(LabError::Config(format!("step `{}` samples and needs a seed", step.name())));
            }
            if step.tolerances().iter().any(|t| !(*t > 0.0)) {
                return Err(LabError::Config(format!("step `{}` has a non-positive tolerance", step.name())));
            }
        }
        Ok(())
    }
}
