//! Run configuration: JSON with camelCase keys, unknown keys rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algebra::{BilinearSpace, Mat, SymmetricSpaceSpec};
use crate::error::{Error, Result};
use crate::lax::{GridSpec, DEFAULT_SUBSTEPS};
use crate::loops::FlowFamily;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PresetSpec {
    pub preset: String,
    pub m: usize,
    #[serde(default)]
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExplicitSpec {
    pub signature: (usize, usize),
    pub split: (usize, usize),
    pub rank: usize,
}

/// Ambient space: a named preset or an explicit signature/split/rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpecConfig {
    Preset(PresetSpec),
    Explicit(ExplicitSpec),
}

impl SpecConfig {
    pub fn preset(name: &str, m: usize, n: usize) -> Self {
        SpecConfig::Preset(PresetSpec {
            preset: name.into(),
            m,
            n,
        })
    }

    pub fn explicit(signature: (usize, usize), split: (usize, usize), rank: usize) -> Self {
        SpecConfig::Explicit(ExplicitSpec {
            signature,
            split,
            rank,
        })
    }

    pub fn build(&self) -> Result<SymmetricSpaceSpec> {
        let spec = match self {
            SpecConfig::Preset(p) => SymmetricSpaceSpec::preset(&p.preset, p.m, p.n),
            SpecConfig::Explicit(e) => BilinearSpace::new(e.signature.0, e.signature.1)
                .and_then(|s| SymmetricSpaceSpec::new(s, e.split, e.rank)),
        };
        spec.map_err(|e| Error::Config(e.to_string()))
    }
}

/// Random seed, or explicit coefficients `ξ₀, …, ξ_d` given as row lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedConfig {
    Random(u64),
    Explicit(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GridConfig {
    pub extents: Vec<f64>,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OutputFlags {
    #[serde(default = "yes")]
    pub report: bool,
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default = "yes")]
    pub obj: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputFlags {
    fn default() -> Self {
        Self {
            report: true,
            csv: true,
            obj: true,
        }
    }
}

/// Pass/fail thresholds for every residual in the report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct Tolerances {
    pub zero_curvature: f64,
    pub abelian: f64,
    pub conservation: f64,
    pub commutativity: f64,
    pub group_drift: f64,
    pub plane_projector: f64,
    pub gauge: f64,
    pub closedness: f64,
    pub isometry: f64,
    pub unit_norm: f64,
    pub kernel: f64,
    pub gauss_curvature: f64,
    pub normal_curvature: f64,
    pub second_form_off_diagonal: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            zero_curvature: 1e-4,
            abelian: 1e-9,
            conservation: 1e-8,
            commutativity: 1e-8,
            group_drift: 1e-10,
            plane_projector: 1e-8,
            gauge: crate::geometry::GAUGE_TOL,
            closedness: crate::geometry::CLOSEDNESS_TOL,
            isometry: 1e-10,
            unit_norm: 1e-7,
            kernel: 1e-8,
            gauss_curvature: 1e-2,
            normal_curvature: 1e-3,
            second_form_off_diagonal: 1e-2,
        }
    }
}

fn default_seed_scale() -> f64 {
    0.5
}

fn default_substeps() -> usize {
    DEFAULT_SUBSTEPS
}

fn default_obj_coords() -> [usize; 3] {
    [0, 1, 2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub spec: SpecConfig,
    pub d: usize,
    pub powers: Vec<u32>,
    pub seed: SeedConfig,
    /// Standard deviation of the Gaussian coefficient draws.
    #[serde(default = "default_seed_scale")]
    pub seed_scale: f64,
    pub grid: GridConfig,
    pub mu_samples: Vec<f64>,
    /// RK4 steps per grid edge.
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default)]
    pub outputs: OutputFlags,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Coordinates of `φ` used as OBJ vertex positions.
    #[serde(default = "default_obj_coords")]
    pub obj_coords: [usize; 3],
}

/// Validated pieces of a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Resolved {
    pub spec: SymmetricSpaceSpec,
    pub family: FlowFamily,
    pub grid: GridSpec,
}

impl RunConfig {
    /// The rank-2 default: so(5) with split (3, 2), d = 3, powers [1, 3],
    /// 33×33 nodes on [0, 0.4]².
    pub fn default_rank2() -> Self {
        Self {
            spec: SpecConfig::preset("sphere-grassmannian", 2, 0),
            d: 3,
            powers: vec![1, 3],
            seed: SeedConfig::Random(12),
            seed_scale: default_seed_scale(),
            grid: GridConfig {
                extents: vec![0.4, 0.4],
                nodes: vec![33, 33],
            },
            mu_samples: vec![0.6, 1.0, 1.6],
            substeps: DEFAULT_SUBSTEPS,
            outputs: OutputFlags::default(),
            tolerances: Tolerances::default(),
            obj_coords: default_obj_coords(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(compact.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<Resolved> {
        let cfg = |m: String| Err(Error::Config(m));
        let spec = self.spec.build()?;
        if self.d.is_multiple_of(2) {
            return cfg(format!("d = {} must be odd", self.d));
        }
        let family =
            FlowFamily::new(self.powers.clone()).map_err(|e| Error::Config(e.to_string()))?;
        if self.grid.nodes.len() != self.powers.len()
            || self.grid.extents.len() != self.powers.len()
        {
            return cfg(format!(
                "{} powers need a {}-dimensional grid",
                self.powers.len(),
                self.powers.len()
            ));
        }
        let grid = GridSpec::new(self.grid.extents.clone(), self.grid.nodes.clone())
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.mu_samples.is_empty() {
            return cfg("muSamples must not be empty".into());
        }
        if let Some(bad) = self
            .mu_samples
            .iter()
            .find(|m| **m == 0.0 || !m.is_finite())
        {
            return cfg(format!("muSamples must be finite and nonzero, got {bad}"));
        }
        if !(self.seed_scale > 0.0 && self.seed_scale.is_finite()) {
            return cfg("seedScale must be positive".into());
        }
        if self.substeps == 0 {
            return cfg("substeps must be positive".into());
        }
        if let Some(&c) = self.obj_coords.iter().find(|&&c| c >= spec.dim()) {
            return cfg(format!(
                "objCoords entry {c} exceeds the dimension {}",
                spec.dim()
            ));
        }
        if let SeedConfig::Explicit(coeffs) = &self.seed {
            if coeffs.len() != self.d + 1 {
                return cfg(format!(
                    "explicit seed has {} coefficients, d = {} needs {}",
                    coeffs.len(),
                    self.d,
                    self.d + 1
                ));
            }
            let n = spec.dim();
            if coeffs
                .iter()
                .any(|m| m.len() != n || m.iter().any(|r| r.len() != n))
            {
                return cfg(format!("explicit seed coefficients must be {n}×{n}"));
            }
        }
        Ok(Resolved { spec, family, grid })
    }
}

/// Row lists to a matrix; shapes are checked by [`RunConfig::validate`].
pub fn rows_to_mat(rows: &[Vec<f64>]) -> Mat {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(n, m, |i, j| rows[i][j])
}

pub fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}
