//! On-disk artifacts of a run and their readers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::algebra::Mat;
use crate::error::{Error, Result};
use crate::frame::FrameField;
use crate::lax::{GridSolution, GridSpec};
use crate::loops::{FlowFamily, LaxState};

pub const CONFIG_FILE: &str = "config.json";
pub const SOLUTION_FILE: &str = "solution.json";
pub const FRAMES_FILE: &str = "frames.json";
pub const REPORT_FILE: &str = "report.json";

pub fn csv_name(mu_index: usize) -> String {
    format!("phi_mu{mu_index}.csv")
}

pub fn obj_name(mu_index: usize) -> String {
    format!("mesh_mu{mu_index}.obj")
}

/// Lax states on the grid; each state is `d+1` row-major `n×n` blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SolutionArtifact {
    pub dim: usize,
    pub degree: usize,
    pub powers: Vec<u32>,
    pub substeps: usize,
    pub extents: Vec<f64>,
    pub nodes: Vec<usize>,
    pub states: Vec<Vec<f64>>,
}

fn row_major(m: &Mat) -> impl Iterator<Item = f64> + '_ {
    (0..m.nrows()).flat_map(move |i| (0..m.ncols()).map(move |j| m[(i, j)]))
}

fn from_row_major(n: usize, data: &[f64]) -> Mat {
    Mat::from_row_slice(n, n, data)
}

impl SolutionArtifact {
    pub fn from_solution(sol: &GridSolution) -> Self {
        let xi0 = sol.initial();
        Self {
            dim: xi0.dim(),
            degree: xi0.degree(),
            powers: sol.family.powers().to_vec(),
            substeps: sol.substeps,
            extents: sol.grid.extents().to_vec(),
            nodes: sol.grid.nodes().to_vec(),
            states: sol
                .states
                .iter()
                .map(|s| s.coeffs().iter().flat_map(row_major).collect())
                .collect(),
        }
    }

    pub fn to_solution(&self) -> Result<GridSolution> {
        let corrupt = |reason: String| Error::CorruptArtifact {
            path: SOLUTION_FILE.into(),
            reason,
        };
        let grid = GridSpec::new(self.extents.clone(), self.nodes.clone())
            .map_err(|e| corrupt(e.to_string()))?;
        let family = FlowFamily::new(self.powers.clone()).map_err(|e| corrupt(e.to_string()))?;
        if self.states.len() != grid.len() {
            return Err(corrupt(format!(
                "{} states for {} nodes",
                self.states.len(),
                grid.len()
            )));
        }
        let block = self.dim * self.dim;
        let states = self
            .states
            .iter()
            .map(|flat| {
                if flat.len() != block * (self.degree + 1) {
                    return Err(corrupt("state has the wrong length".into()));
                }
                let coeffs = flat
                    .chunks(block)
                    .map(|c| from_row_major(self.dim, c))
                    .collect();
                LaxState::new(coeffs).map_err(|e| corrupt(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GridSolution {
            grid,
            family,
            substeps: self.substeps,
            states,
        })
    }
}

/// Frames for every spectral sample, row-major per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FramesArtifact {
    pub dim: usize,
    pub mu: Vec<f64>,
    pub frames: Vec<Vec<Vec<f64>>>,
}

impl FramesArtifact {
    pub fn from_fields(fields: &[FrameField]) -> Self {
        Self {
            dim: fields
                .first()
                .and_then(|f| f.frames.first())
                .map_or(0, |m| m.nrows()),
            mu: fields.iter().map(|f| f.mu).collect(),
            frames: fields
                .iter()
                .map(|f| f.frames.iter().map(|m| row_major(m).collect()).collect())
                .collect(),
        }
    }

    pub fn to_fields(&self, nodes: usize) -> Result<Vec<FrameField>> {
        let corrupt = |reason: String| Error::CorruptArtifact {
            path: FRAMES_FILE.into(),
            reason,
        };
        if self.frames.len() != self.mu.len() {
            return Err(corrupt(
                "one frame field per spectral value expected".into(),
            ));
        }
        self.mu
            .iter()
            .zip(&self.frames)
            .map(|(&mu, field)| {
                if field.len() != nodes {
                    return Err(corrupt(format!("{} frames for {nodes} nodes", field.len())));
                }
                let frames = field
                    .iter()
                    .map(|f| {
                        if f.len() != self.dim * self.dim {
                            return Err(corrupt("frame has the wrong length".into()));
                        }
                        Ok(from_row_major(self.dim, f))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(FrameField { mu, frames })
            })
            .collect()
    }
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let text = serde_json::to_string(value).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<T> {
    let path = dir.join(name);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingArtifact(path.display().to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    serde_json::from_str(&text).map_err(|e| Error::CorruptArtifact {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// `x1,…,xk,mu,phi_1,…,phi_n` with 17 significant digits.
pub fn phi_csv(grid: &GridSpec, mu: f64, phi: &[Vec<f64>]) -> String {
    let k = grid.dims();
    let n = phi.first().map_or(0, |p| p.len());
    let mut out = String::new();
    let header: Vec<String> = (1..=k)
        .map(|i| format!("x{i}"))
        .chain(std::iter::once("mu".to_string()))
        .chain((1..=n).map(|i| format!("phi_{i}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for (node, p) in phi.iter().enumerate() {
        let x = grid.coord(&grid.multi(node));
        let row: Vec<String> = x
            .iter()
            .chain(std::iter::once(&mu))
            .chain(p.iter())
            .map(|v| format!("{v:.16e}"))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Triangulated mesh of a 2-dimensional grid; vertices are the selected
/// coordinates of `φ`.
pub fn phi_obj(grid: &GridSpec, phi: &[Vec<f64>], coords: [usize; 3], config_hash: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# curved-flats mesh");
    let _ = writeln!(out, "# config-sha256 {config_hash}");
    let _ = writeln!(
        out,
        "# vertex coordinates phi_{}, phi_{}, phi_{}",
        coords[0] + 1,
        coords[1] + 1,
        coords[2] + 1
    );
    for p in phi {
        let _ = writeln!(
            out,
            "v {:.16e} {:.16e} {:.16e}",
            p[coords[0]], p[coords[1]], p[coords[2]]
        );
    }
    let (n0, n1) = (grid.nodes()[0], grid.nodes()[1]);
    for i in 0..n0.saturating_sub(1) {
        for j in 0..n1.saturating_sub(1) {
            let a = grid.flat(&[i, j]) + 1;
            let b = grid.flat(&[i + 1, j]) + 1;
            let c = grid.flat(&[i + 1, j + 1]) + 1;
            let d = grid.flat(&[i, j + 1]) + 1;
            let _ = writeln!(out, "f {a} {b} {c}");
            let _ = writeln!(out, "f {a} {c} {d}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_round_trip_exactly() {
        let m = Mat::from_fn(3, 3, |i, j| {
            (i as f64 + 0.1) / (j as f64 + 3.0) + 1e-17 * (i * j) as f64
        });
        let fields = vec![FrameField {
            mu: 0.6,
            frames: vec![m.clone(), m.transpose()],
        }];
        let art = FramesArtifact::from_fields(&fields);
        let text = serde_json::to_string(&art).unwrap();
        let back: FramesArtifact = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_fields(2).unwrap(), fields);
        assert!(back.to_fields(3).is_err());
    }

    #[test]
    fn csv_has_header_and_one_row_per_node() {
        let g = GridSpec::new(vec![1.0, 1.0], vec![2, 3]).unwrap();
        let phi = vec![vec![1.0, 0.0, 0.0]; 6];
        let csv = phi_csv(&g, 0.5, &phi);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x1,x2,mu,phi_1,phi_2,phi_3");
        assert_eq!(lines.len(), 7);
        let first: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(first, 0.5);
    }

    #[test]
    fn obj_triangulates_quads() {
        let g = GridSpec::new(vec![1.0, 1.0], vec![3, 3]).unwrap();
        let phi = vec![vec![0.0, 1.0, 2.0, 3.0]; 9];
        let obj = phi_obj(&g, &phi, [1, 2, 3], "abc");
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 9);
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 8);
        assert!(obj.contains("config-sha256 abc"));
    }

    #[test]
    fn missing_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let r: Result<FramesArtifact> = read_json(dir.path(), FRAMES_FILE);
        assert!(matches!(r, Err(Error::MissingArtifact(_))));
        fs::write(dir.path().join(FRAMES_FILE), "{").unwrap();
        let r: Result<FramesArtifact> = read_json(dir.path(), FRAMES_FILE);
        assert!(matches!(r, Err(Error::CorruptArtifact { .. })));
    }
}
