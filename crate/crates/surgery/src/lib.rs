//! Exact combinatorial Fried surgery.
//!
//! Every oriented closed curve `εγ_i` carries a Birkhoff annulus `A(εγ̇_i)`
//! made of the unit vectors on `γ_i` pointing to the left of `εγ̇_i`. At a
//! transverse intersection point the fiber circle is shared by four annuli
//! and the surgery resolves the double arcs. This crate builds the resulting
//! polygonal complex and reports its topology in integer arithmetic.

pub mod complex;

mod build;

pub use build::{fried_surgery_complex, SurgeryComplex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SurgeryError {
    #[error("invalid intersection pattern: {0}")]
    InvalidPattern(String),
    #[error("surgery produced a non-manifold complex: {0}")]
    NotAManifold(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatternTag {
    Chain2G,
    General,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveConfiguration {
    pub n: usize,
    pub genus: u32,
    pub intersections: Vec<Vec<u32>>,
    pub pattern_tag: PatternTag,
}

impl CurveConfiguration {
    /// The chain `γ_1, …, γ_{2G}` where consecutive curves meet once.
    pub fn chain(genus: u32) -> Self {
        let n = 2 * genus as usize;
        let mut m = vec![vec![0; n]; n];
        for i in 0..n.saturating_sub(1) {
            m[i][i + 1] = 1;
            m[i + 1][i] = 1;
        }
        Self { n, genus, intersections: m, pattern_tag: PatternTag::Chain2G }
    }

    pub fn general(genus: u32, intersections: Vec<Vec<u32>>) -> Self {
        Self { n: intersections.len(), genus, intersections, pattern_tag: PatternTag::General }
    }

    pub fn validate(&self) -> Result<(), SurgeryError> {
        let bad = |m: &str| Err(SurgeryError::InvalidPattern(m.to_string()));
        if self.n == 0 {
            return bad("no curves");
        }
        if self.intersections.len() != self.n || self.intersections.iter().any(|r| r.len() != self.n) {
            return bad("intersection matrix must be n x n");
        }
        for i in 0..self.n {
            if self.intersections[i][i] != 0 {
                return bad("diagonal must be zero");
            }
            for j in 0..self.n {
                if self.intersections[i][j] != self.intersections[j][i] {
                    return bad("intersection matrix must be symmetric");
                }
            }
        }
        if self.pattern_tag == PatternTag::Chain2G {
            if self.genus == 0 || self.n != 2 * self.genus as usize {
                return bad("chain pattern needs n = 2G with G >= 1");
            }
            for i in 0..self.n {
                for j in 0..self.n {
                    let want = u32::from(i.abs_diff(j) == 1);
                    if self.intersections[i][j] != want {
                        return bad("chain pattern must be the tridiagonal ones matrix");
                    }
                }
            }
        }
        Ok(())
    }

    /// Same configuration with curve `k` renamed to `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut m = vec![vec![0; self.n]; self.n];
        for i in 0..self.n {
            for j in 0..self.n {
                m[perm[i]][perm[j]] = self.intersections[i][j];
            }
        }
        Self { n: self.n, genus: self.genus, intersections: m, pattern_tag: PatternTag::General }
    }
}

/// JSON input accepted by the command line: `{"genus": G, "intersection_matrix": [[..]..]}`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub genus: u32,
    pub intersection_matrix: Vec<Vec<u32>>,
    #[serde(default)]
    pub pattern: Option<PatternTag>,
}

impl From<ConfigFile> for CurveConfiguration {
    fn from(c: ConfigFile) -> Self {
        let mut cfg = CurveConfiguration::general(c.genus, c.intersection_matrix);
        cfg.pattern_tag = c.pattern.unwrap_or(PatternTag::General);
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryComponent {
    pub curve: usize,
    /// +1 for `γ̇_i`, −1 for `−γ̇_i`.
    pub sign: i8,
    pub degree: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentTopology {
    pub vertices: i64,
    pub edges: i64,
    pub faces: i64,
    pub euler_char: i64,
    pub genus: i64,
    pub orientable: bool,
    pub boundary_components: Vec<BoundaryComponent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionTopology {
    pub boundary_components: Vec<BoundaryComponent>,
    pub euler_char: i64,
    /// Genus when connected, otherwise the sum over components.
    pub genus: i64,
    pub connected: bool,
    pub orientable: bool,
    pub components: Vec<ComponentTopology>,
}

impl SectionTopology {
    /// Sorted multiset of `(curve, sign, degree)` triples.
    pub fn boundary_census(&self) -> Vec<(usize, i8, u32)> {
        let mut v: Vec<_> = self.boundary_components.iter().map(|b| (b.curve, b.sign, b.degree)).collect();
        v.sort_unstable();
        v
    }

    pub fn vertices(&self) -> i64 {
        self.components.iter().map(|c| c.vertices).sum()
    }
    pub fn edges(&self) -> i64 {
        self.components.iter().map(|c| c.edges).sum()
    }
    pub fn faces(&self) -> i64 {
        self.components.iter().map(|c| c.faces).sum()
    }
}

pub fn fried_surgery_topology(cfg: &CurveConfiguration) -> Result<SectionTopology, SurgeryError> {
    let sc = fried_surgery_complex(cfg)?;
    let census = sc
        .complex
        .census()
        .map_err(|e| SurgeryError::NotAManifold(format!("{e:?}")))?;
    let mut components = Vec::new();
    for c in &census {
        let mut bcs = Vec::new();
        for cyc in &c.boundary {
            let (curve, sign) = cyc.label;
            let per_loop = sc.sides_per_loop[curve] as i64;
            if cyc.weight % per_loop != 0 {
                return Err(SurgeryError::NotAManifold("boundary cycle is not a closed cover".into()));
            }
            bcs.push(BoundaryComponent { curve, sign, degree: (cyc.weight / per_loop) as u32 });
        }
        bcs.sort_by_key(|b| (b.curve, b.sign, b.degree));
        let chi = c.euler_characteristic();
        let b = bcs.len() as i64;
        components.push(ComponentTopology {
            vertices: c.vertices,
            edges: c.edges,
            faces: c.faces,
            euler_char: chi,
            genus: (2 - chi - b) / 2,
            orientable: c.orientable,
            boundary_components: bcs,
        });
    }
    let mut boundary: Vec<BoundaryComponent> =
        components.iter().flat_map(|c| c.boundary_components.iter().cloned()).collect();
    boundary.sort_by_key(|b| (b.curve, b.sign, b.degree));
    Ok(SectionTopology {
        boundary_components: boundary,
        euler_char: components.iter().map(|c| c.euler_char).sum(),
        genus: components.iter().map(|c| c.genus).sum(),
        connected: components.len() == 1,
        orientable: components.iter().all(|c| c.orientable),
        components,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainRow {
    pub genus_g: u32,
    pub euler_char: i64,
    pub surface_genus: i64,
    pub boundary_count: usize,
    pub vertices: i64,
    pub edges: i64,
    pub faces: i64,
}

/// Surgery over the chain pattern for `G = 1..=g_max`.
pub fn chain_table(g_max: u32) -> Vec<ChainRow> {
    (1..=g_max.max(1))
        .map(|g| {
            let t = fried_surgery_topology(&CurveConfiguration::chain(g)).expect("chain pattern is valid");
            ChainRow {
                genus_g: g,
                euler_char: t.euler_char,
                surface_genus: t.genus,
                boundary_count: t.boundary_components.len(),
                vertices: t.vertices(),
                edges: t.edges(),
                faces: t.faces(),
            }
        })
        .collect()
}

pub fn chain_table_csv(rows: &[ChainRow]) -> String {
    let mut s = String::from("G,euler_char,genus,boundary_components,vertices,edges,faces\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.genus_g, r.euler_char, r.surface_genus, r.boundary_count, r.vertices, r.edges, r.faces
        ));
    }
    s
}

/// The boundary census expected for the chain of length `2G`: degree-two
/// circles over both lifts of the end curves and two degree-one circles over
/// each lift of an interior curve.
pub fn expected_chain_census(genus: u32) -> Vec<(usize, i8, u32)> {
    let n = 2 * genus as usize;
    let mut v = Vec::new();
    for i in 0..n {
        for sign in [-1i8, 1] {
            if i == 0 || i == n - 1 {
                v.push((i, sign, 2));
            } else {
                v.push((i, sign, 1));
                v.push((i, sign, 1));
            }
        }
    }
    v.sort_unstable();
    v
}
