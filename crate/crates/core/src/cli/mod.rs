//! Configuration-driven pipeline: seed → Lax grid → connection → frames →
//! geometry → report and exported artifacts.

pub mod artifacts;
pub mod config;
pub mod seed;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{max_abs, Mat};
use crate::error::{Error, ErrorCategory, Result};
use crate::frame::{
    abelian_residual, connection_from_state, integrate_frame, mc_residual, ConnectionForm,
    FrameField,
};
use crate::geometry::{
    curved_flat_planes, developing_map, gauge_to_normal_form, gauged_frames, reconstruct_immersion,
    verify_space_form_geometry, GaugeField, GeometryReport,
};
use crate::lax::{commutativity_check, conservation_report, integrate_grid, GridSolution};

use artifacts::{
    FramesArtifact, SolutionArtifact, CONFIG_FILE, FRAMES_FILE, REPORT_FILE, SOLUTION_FILE,
};
use config::{Resolved, RunConfig};

/// Highest even power of the conserved traces `tr ξ(μ₀)^{2j}`.
pub const CONSERVATION_MAX_POWER: u32 = 4;

/// One residual against its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

/// Reasons the geometric reconstruction was skipped; reported, never fatal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryFlag {
    NonCartan,
    DegenerateSpectrum,
    NonImmersive,
    NoKernelDirection,
    IndefiniteUnverified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MuGeometry {
    pub mu: f64,
    pub degenerate_nodes: Option<usize>,
    pub surface: Option<GeometryReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrorInfo {
    pub category: ErrorCategory,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub status: Status,
    pub exit_code: i32,
    pub error: Option<ErrorInfo>,
    pub config_hash: Option<String>,
    pub seed_attempts: Option<usize>,
    pub checks: Vec<Check>,
    pub geometry_flags: Vec<GeometryFlag>,
    pub geometry: Vec<MuGeometry>,
}

impl Report {
    fn from_error(err: &Error, config_hash: Option<String>) -> Self {
        Self {
            status: Status::Error,
            exit_code: err.exit_code(),
            error: Some(ErrorInfo {
                category: err.category(),
                message: err.to_string(),
            }),
            config_hash,
            seed_attempts: None,
            checks: Vec::new(),
            geometry_flags: Vec::new(),
            geometry: Vec::new(),
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Everything [`evaluate`] derives from a solution and its frames.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub checks: Vec<Check>,
    pub flags: Vec<GeometryFlag>,
    pub geometry: Vec<MuGeometry>,
    /// `φ` per spectral sample (gauged frame column when a gauge exists).
    pub phi: Vec<Vec<Vec<f64>>>,
}

impl Evaluation {
    fn into_report(self, hash: String, seed_attempts: Option<usize>) -> Report {
        let pass = self.checks.iter().all(|c| c.pass);
        Report {
            status: if pass { Status::Pass } else { Status::Fail },
            exit_code: if pass { 0 } else { 1 },
            error: None,
            config_hash: Some(hash),
            seed_attempts,
            checks: self.checks,
            geometry_flags: self.flags,
            geometry: self.geometry,
        }
    }
}

fn push_flag(flags: &mut Vec<GeometryFlag>, f: GeometryFlag) {
    if !flags.contains(&f) {
        flags.push(f);
    }
}

fn mu_label(name: &str, mu: f64) -> String {
    format!("{name}[mu={mu}]")
}

fn gauge_stage(
    conn: &ConnectionForm,
    r: &Resolved,
    tol: &config::Tolerances,
    checks: &mut Vec<Check>,
    flags: &mut Vec<GeometryFlag>,
) -> Result<Option<GaugeField>> {
    if !r.spec.space().is_definite() {
        push_flag(flags, GeometryFlag::IndefiniteUnverified);
        return Ok(None);
    }
    let gf = match gauge_to_normal_form(conn, &r.grid) {
        Ok(gf) => gf,
        Err(Error::NonCartan { .. }) => {
            push_flag(flags, GeometryFlag::NonCartan);
            return Ok(None);
        }
        Err(Error::DegenerateSpectrum { .. }) => {
            push_flag(flags, GeometryFlag::DegenerateSpectrum);
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    checks.push(Check::new("gauge", gf.gauge_residual, tol.gauge));
    let dm = developing_map(&gf, &r.grid)?;
    checks.push(Check::new(
        "closedness",
        dm.closedness_residual,
        tol.closedness,
    ));
    checks.push(Check::new("isometry", dm.isometry_defect, tol.isometry));
    if gf.kernel_dim == 0 {
        push_flag(flags, GeometryFlag::NoKernelDirection);
    }
    Ok(Some(gf))
}

/// Recompute every residual from a solution and its frames. Shared by
/// `run` and `verify`, so both see identical numbers for identical inputs.
pub fn evaluate(
    config: &RunConfig,
    sol: &GridSolution,
    frames: &[FrameField],
) -> Result<Evaluation> {
    let r = config.validate()?;
    if sol.grid != r.grid || sol.family != r.family {
        return Err(Error::CorruptArtifact {
            path: SOLUTION_FILE.into(),
            reason: "solution does not match the configuration".into(),
        });
    }
    if frames.len() != config.mu_samples.len()
        || frames
            .iter()
            .zip(&config.mu_samples)
            .any(|(f, &mu)| f.mu != mu)
    {
        return Err(Error::CorruptArtifact {
            path: FRAMES_FILE.into(),
            reason: "frames do not match muSamples".into(),
        });
    }
    let tol = &config.tolerances;
    let conn = connection_from_state(sol, &r.spec)?;
    let mut checks = Vec::new();
    let mut flags = Vec::new();

    if r.grid.dims() >= 2 && r.grid.nodes().iter().all(|&n| n >= 3) {
        let mus: Vec<f64> = std::iter::once(0.0)
            .chain(config.mu_samples.iter().cloned())
            .collect();
        for mu in mus {
            checks.push(Check::new(
                mu_label("zeroCurvature", mu),
                mc_residual(&conn, mu, &r.grid)?,
                tol.zero_curvature,
            ));
        }
    }
    checks.push(Check::new("abelian", abelian_residual(&conn), tol.abelian));
    let cons = conservation_report(sol, &config.mu_samples, CONSERVATION_MAX_POWER)?;
    checks.push(Check::new(
        "conservation",
        cons.max_deviation(),
        tol.conservation,
    ));
    if r.family.len() >= 2 {
        let steps = sol.substeps
            * r.grid
                .nodes()
                .iter()
                .map(|n| n.saturating_sub(1))
                .max()
                .unwrap_or(1)
                .max(1);
        let gap = commutativity_check(sol.initial(), &r.family, r.grid.extents(), steps)?;
        checks.push(Check::new("commutativity", gap, tol.commutativity));
    }
    for f in frames {
        checks.push(Check::new(
            mu_label("groupDrift", f.mu),
            f.max_group_residual(r.spec.space())?,
            tol.group_drift,
        ));
        let planes = curved_flat_planes(f, &r.spec);
        let proj = planes
            .iter()
            .map(|p| max_abs(&(p * p - p)))
            .fold(0.0, f64::max);
        checks.push(Check::new(
            mu_label("planeProjector", f.mu),
            proj,
            tol.plane_projector,
        ));
    }

    let gauge = gauge_stage(&conn, &r, tol, &mut checks, &mut flags)?;

    let e0 = r.spec.first_block()[0];
    let per_mu: Vec<Result<(Vec<Vec<f64>>, MuGeometry, Vec<Check>, bool)>> = frames
        .par_iter()
        .map(|f| {
            let gauged: Vec<Mat> = match &gauge {
                Some(gf) => gauged_frames(f, gf)?,
                None => f.frames.clone(),
            };
            let phi: Vec<Vec<f64>> = gauged
                .iter()
                .map(|m| m.column(e0).iter().cloned().collect())
                .collect();
            let mut geo = MuGeometry {
                mu: f.mu,
                degenerate_nodes: None,
                surface: None,
            };
            let mut local = Vec::new();
            let mut non_immersive = false;
            if let Some(gf) = gauge.as_ref().filter(|g| g.kernel_dim > 0) {
                match reconstruct_immersion(gf, f, &r.grid) {
                    Ok(im) => {
                        local.push(Check::new(
                            mu_label("unitNorm", f.mu),
                            im.unit_defect,
                            tol.unit_norm,
                        ));
                        local.push(Check::new(
                            mu_label("kernel", f.mu),
                            im.kernel_defect,
                            tol.kernel,
                        ));
                        geo.degenerate_nodes = Some(im.degenerate_count());
                        if r.grid.dims() == 2 && r.grid.nodes().iter().all(|&n| n >= 5) {
                            match verify_space_form_geometry(&im, &r.grid) {
                                Ok(rep) => {
                                    local.push(Check::new(
                                        mu_label("gaussCurvature", f.mu),
                                        rep.gauss_curvature_deviation,
                                        tol.gauss_curvature,
                                    ));
                                    local.push(Check::new(
                                        mu_label("normalCurvature", f.mu),
                                        rep.normal_curvature_residual,
                                        tol.normal_curvature,
                                    ));
                                    local.push(Check::new(
                                        mu_label("secondFormOffDiagonal", f.mu),
                                        rep.second_form_off_diagonal,
                                        tol.second_form_off_diagonal,
                                    ));
                                    geo.surface = Some(rep);
                                }
                                Err(Error::NonImmersive) => non_immersive = true,
                                Err(e) => return Err(e),
                            }
                        }
                    }
                    Err(Error::NonImmersive) => {
                        non_immersive = true;
                        geo.degenerate_nodes = Some(r.grid.len());
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok((phi, geo, local, non_immersive))
        })
        .collect();

    let mut phi = Vec::new();
    let mut geometry = Vec::new();
    for item in per_mu {
        let (p, g, local, non_immersive) = item?;
        phi.push(p);
        geometry.push(g);
        checks.extend(local);
        if non_immersive {
            push_flag(&mut flags, GeometryFlag::NonImmersive);
        }
    }
    Ok(Evaluation {
        checks,
        flags,
        geometry,
        phi,
    })
}

/// Integrate the Lax grid and the frames for every spectral sample.
pub fn solve(config: &RunConfig) -> Result<(GridSolution, Vec<FrameField>, usize)> {
    let r = config.validate()?;
    let seeded = seed::seed_initial_state(config, &r.spec, &r.family)?;
    let sol = integrate_grid(&seeded.state, &r.family, &r.grid, config.substeps)?;
    let conn = connection_from_state(&sol, &r.spec)?;
    let frames = config
        .mu_samples
        .par_iter()
        .map(|&mu| integrate_frame(&conn, mu, &r.grid))
        .collect::<Result<Vec<_>>>()?;
    Ok((sol, frames, seeded.attempts))
}

fn run_inner(config: &RunConfig, out: &Path) -> Result<Report> {
    let (sol, frames, attempts) = solve(config)?;
    fs::create_dir_all(out)?;
    fs::write(out.join(CONFIG_FILE), config.to_json())?;
    artifacts::write_json(out, SOLUTION_FILE, &SolutionArtifact::from_solution(&sol))?;
    artifacts::write_json(out, FRAMES_FILE, &FramesArtifact::from_fields(&frames))?;

    let eval = evaluate(config, &sol, &frames)?;
    let hash = config.hash();
    let grid = &sol.grid;
    for (i, (f, phi)) in frames.iter().zip(&eval.phi).enumerate() {
        if config.outputs.csv {
            fs::write(
                out.join(artifacts::csv_name(i)),
                artifacts::phi_csv(grid, f.mu, phi),
            )?;
        }
        if config.outputs.obj && grid.dims() == 2 {
            fs::write(
                out.join(artifacts::obj_name(i)),
                artifacts::phi_obj(grid, phi, config.obj_coords, &hash),
            )?;
        }
    }
    Ok(eval.into_report(hash, Some(attempts)))
}

/// Run the full pipeline, writing artifacts into `out`. Errors are folded
/// into the report (status `error`, nonzero exit code).
pub fn run_pipeline(config: &RunConfig, out: &Path) -> Report {
    let report = run_inner(config, out).unwrap_or_else(|e| {
        let hash = config.validate().ok().map(|_| config.hash());
        Report::from_error(&e, hash)
    });
    if config.outputs.report && out.is_dir() {
        let _ = fs::write(out.join(REPORT_FILE), report.to_json());
    }
    report
}

/// Load a config file and run it.
pub fn run_file(config_path: &Path, out: &Path) -> Report {
    match RunConfig::load(config_path) {
        Ok(c) => run_pipeline(&c, out),
        Err(e) => Report::from_error(&e, None),
    }
}

fn verify_inner(dir: &Path) -> Result<Report> {
    if !dir.is_dir() {
        return Err(Error::MissingArtifact(dir.display().to_string()));
    }
    let config: RunConfig = artifacts::read_json(dir, CONFIG_FILE)?;
    let sol = artifacts::read_json::<SolutionArtifact>(dir, SOLUTION_FILE)?.to_solution()?;
    let frames =
        artifacts::read_json::<FramesArtifact>(dir, FRAMES_FILE)?.to_fields(sol.grid.len())?;
    let eval = evaluate(&config, &sol, &frames)?;
    Ok(eval.into_report(config.hash(), None))
}

/// Recompute the report of an earlier run from its stored artifacts.
pub fn verify_command(dir: &Path) -> Report {
    verify_inner(dir).unwrap_or_else(|e| Report::from_error(&e, None))
}

/// Rows for the `presets` listing: name, description, and an example spec.
pub fn preset_rows() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "sphere-grassmannian",
            "ℝ^{2m+1}, split (m+1, m), rank m: surfaces of S^{2m} with flat normal bundle",
        ),
        (
            "sphere",
            "ℝ^{n+2}, split (m+1, n+1−m), rank min(m+1, n+1−m): M^m in S^{n+1}",
        ),
        (
            "de-sitter",
            "ℝ₁^{n+2}, split (m+1, n+1−m): M^m in de Sitter space",
        ),
        (
            "hyperbolic",
            "ℝ₁^{n+2}, first block of signature (m, 1): M^m in hyperbolic space",
        ),
        (
            "anti-de-sitter",
            "ℝ₂^{n+2}, both blocks of index one: M^m in anti de Sitter space",
        ),
        (
            "isothermic",
            "ℝ₁⁵, split (3, 2), rank 2: isothermic surfaces",
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_listing_covers_every_preset() {
        let names: Vec<&str> = preset_rows().iter().map(|r| r.0).collect();
        assert_eq!(names, crate::algebra::PRESET_NAMES);
    }

    #[test]
    fn errors_become_reports() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = RunConfig::default_rank2();
        c.mu_samples = vec![0.0];
        let rep = run_pipeline(&c, dir.path());
        assert_eq!(rep.status, Status::Error);
        assert_eq!(rep.exit_code, 2);
        assert_eq!(rep.error.unwrap().category, ErrorCategory::Config);
    }
}
