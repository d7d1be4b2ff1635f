//! Reconstruction of the isometric immersion `φ = F̃e₀` and its
//! finite-difference verification.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use super::fd;
use super::gauge::GaugeField;
use crate::algebra::{Mat, SymmetricSpaceSpec};
use crate::error::{Error, Result};
use crate::frame::FrameField;
use crate::lax::GridSpec;

/// A node whose induced metric has `λ_min < DEGENERATE_RATIO · max(λ_max, 1)`
/// is flagged non-immersive. The floor of one keeps a roundoff-sized metric
/// of a constant map from passing as well conditioned.
pub const DEGENERATE_RATIO: f64 = 1e-6;

/// `φ`, its normal frame and induced metric at every node, for one `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmersionData {
    pub mu: f64,
    pub space: SymmetricSpaceSpec,
    pub phi: Vec<Vec<f64>>,
    /// `normals[node][a]`: gauged frame column at the `a`-th block-2 index.
    pub normals: Vec<Vec<Vec<f64>>>,
    /// `gᵢⱼ = ⟨∂ᵢφ, ∂ⱼφ⟩`
    pub metric: Vec<Mat>,
    pub degenerate: Vec<bool>,
    /// `∂ψ/∂x` per node (rank × dims); identity when no gauge is supplied.
    pub psi_jacobian: Vec<Mat>,
    /// `max |φᵀJφ − 1|`
    pub unit_defect: f64,
    /// `max ‖Ã₁ⱼe₀‖`
    pub kernel_defect: f64,
}

impl ImmersionData {
    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }
}

/// `F̃ = F·H⁻¹` at every node.
pub fn gauged_frames(frames: &FrameField, gf: &GaugeField) -> Result<Vec<Mat>> {
    if frames.frames.len() != gf.gauge.len() {
        return Err(Error::Structural(
            "frames do not match the gauge field".into(),
        ));
    }
    Ok(frames
        .frames
        .iter()
        .zip(&gf.gauge)
        .map(|(f, h)| f * h.transpose())
        .collect())
}

fn metric_at(grid: &GridSpec, phi: &[Vec<f64>], space: &SymmetricSpaceSpec, node: usize) -> Mat {
    let k = grid.dims();
    let d: Vec<Vec<f64>> = (0..k).map(|j| fd::d1(grid, phi, node, j)).collect();
    Mat::from_fn(k, k, |i, j| space.space().inner(&d[i], &d[j]))
}

fn is_degenerate(g: &Mat) -> bool {
    if g.iter().any(|x| !x.is_finite()) {
        return true;
    }
    let eig = SymmetricEigen::new(g.clone()).eigenvalues;
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    hi <= 0.0 || lo < DEGENERATE_RATIO * hi.max(1.0)
}

/// Assemble [`ImmersionData`] from already-gauged frames.
pub fn immersion_from_frames(
    mu: f64,
    gauged: &[Mat],
    spec: &SymmetricSpaceSpec,
    grid: &GridSpec,
    psi_jacobian: Vec<Mat>,
    kernel_defect: f64,
) -> Result<ImmersionData> {
    if gauged.len() != grid.len() || psi_jacobian.len() != grid.len() {
        return Err(Error::Structural("frames do not match the grid".into()));
    }
    let e0 = spec.first_block()[0];
    let phi: Vec<Vec<f64>> = gauged
        .iter()
        .map(|f| f.column(e0).iter().cloned().collect())
        .collect();
    let normals: Vec<Vec<Vec<f64>>> = gauged
        .iter()
        .map(|f| {
            spec.second_block()
                .iter()
                .map(|&c| f.column(c).iter().cloned().collect())
                .collect()
        })
        .collect();
    let unit_defect = phi
        .iter()
        .map(|p| (spec.space().inner(p, p) - 1.0).abs())
        .fold(0.0, f64::max);
    let metric: Vec<Mat> = (0..grid.len())
        .map(|node| metric_at(grid, &phi, spec, node))
        .collect();
    let degenerate: Vec<bool> = metric.iter().map(is_degenerate).collect();
    if degenerate.iter().all(|&d| d) {
        return Err(Error::NonImmersive);
    }
    Ok(ImmersionData {
        mu,
        space: spec.clone(),
        phi,
        normals,
        metric,
        degenerate,
        psi_jacobian,
        unit_defect,
        kernel_defect,
    })
}

/// `φ = F̃e₀` with `F̃ = F·H⁻¹`; `e₀` is the common kernel direction of the
/// gauged tangent directions.
pub fn reconstruct_immersion(
    gf: &GaugeField,
    frames: &FrameField,
    grid: &GridSpec,
) -> Result<ImmersionData> {
    if frames.mu == 0.0 {
        return Err(Error::Domain(
            "geometry requires a nonzero spectral value".into(),
        ));
    }
    let spec = &gf.spec;
    if gf.kernel_dim == 0 {
        return Err(Error::Structural(
            "normal form has no kernel direction: first block must exceed the rank".into(),
        ));
    }
    let e0 = spec.first_block()[0];
    let mut kernel_defect = 0.0_f64;
    for node in &gf.a1 {
        for a in node {
            kernel_defect = kernel_defect.max(a.column(e0).norm());
        }
    }
    let gauged = gauged_frames(frames, gf)?;
    let jac = (0..grid.len()).map(|n| gf.psi_jacobian(n)).collect();
    immersion_from_frames(frames.mu, &gauged, spec, grid, jac, kernel_defect)
}

/// Finite-difference checks of the space-form geometry of a surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GeometryReport {
    pub mu: f64,
    /// `max |K − 1|` over nodes at least two away from the boundary.
    pub gauss_curvature_deviation: f64,
    pub mean_gauss_curvature: f64,
    /// `max |R⊥|` of the normal connection.
    pub normal_curvature_residual: f64,
    /// `max |II_ψ(∂ψ₁, ∂ψ₂)| / max |II_ψ(∂ψₐ, ∂ψₐ)|`
    pub second_form_off_diagonal: f64,
    pub degenerate_nodes: usize,
    pub sampled_nodes: usize,
}

fn brioschi(
    grid: &GridSpec,
    e: &[Vec<f64>],
    f: &[Vec<f64>],
    g: &[Vec<f64>],
    node: usize,
) -> Option<f64> {
    let d = |arr: &[Vec<f64>], ax: usize| fd::d1(grid, arr, node, ax)[0];
    let (ee, ff, gg) = (e[node][0], f[node][0], g[node][0]);
    let (eu, ev) = (d(e, 0), d(e, 1));
    let (fu, fv) = (d(f, 0), d(f, 1));
    let (gu, gv) = (d(g, 0), d(g, 1));
    let evv = fd::d2(grid, e, node, 1, 1)?[0];
    let guu = fd::d2(grid, g, node, 0, 0)?[0];
    let fuv = fd::d2(grid, f, node, 0, 1)?[0];
    let m1 = nalgebra::Matrix3::new(
        -0.5 * evv + fuv - 0.5 * guu,
        0.5 * eu,
        fu - 0.5 * ev,
        fv - 0.5 * gu,
        ee,
        ff,
        0.5 * gv,
        ff,
        gg,
    );
    let m2 = nalgebra::Matrix3::new(0.0, 0.5 * ev, 0.5 * gu, 0.5 * ev, ee, ff, 0.5 * gu, ff, gg);
    let w = ee * gg - ff * ff;
    Some((m1.determinant() - m2.determinant()) / (w * w))
}

/// Gauss curvature via the Brioschi formula, normal-bundle curvature and
/// second-fundamental-form diagonality in `ψ`-coordinates. Surfaces only.
pub fn verify_space_form_geometry(im: &ImmersionData, grid: &GridSpec) -> Result<GeometryReport> {
    if grid.dims() != 2 {
        return Err(Error::Structural(format!(
            "surface geometry needs a 2-dimensional grid, got {}",
            grid.dims()
        )));
    }
    if grid.nodes().iter().any(|&n| n < 5) {
        return Err(Error::Structural("need at least 5 nodes per axis".into()));
    }
    let space = im.space.space();
    let comp = |i: usize, j: usize| -> Vec<Vec<f64>> {
        im.metric.iter().map(|g| vec![g[(i, j)]]).collect()
    };
    let (e, f, g) = (comp(0, 0), comp(0, 1), comp(1, 1));

    let codim = im.normals[0].len();
    // η[node][j] (codim × codim): ⟨ν_a, ∂ⱼν_b⟩, antisymmetrised
    let normal_series: Vec<Vec<Vec<f64>>> = (0..codim)
        .map(|a| im.normals.iter().map(|n| n[a].clone()).collect())
        .collect();
    let eta: Vec<Vec<Mat>> = (0..grid.len())
        .map(|node| {
            (0..2)
                .map(|j| {
                    let dn: Vec<Vec<f64>> = (0..codim)
                        .map(|b| fd::d1(grid, &normal_series[b], node, j))
                        .collect();
                    let raw = Mat::from_fn(codim, codim, |a, b| {
                        space.inner(&im.normals[node][a], &dn[b])
                    });
                    (&raw - raw.transpose()) * 0.5
                })
                .collect()
        })
        .collect();
    let eta_flat: Vec<Vec<Vec<f64>>> = (0..2)
        .map(|j| eta.iter().map(|n| n[j].as_slice().to_vec()).collect())
        .collect();

    let mut k_dev = 0.0_f64;
    let mut k_sum = 0.0;
    let mut normal_res = 0.0_f64;
    let mut off = 0.0_f64;
    let mut diag = 0.0_f64;
    let mut sampled = 0usize;
    for node in 0..grid.len() {
        if im.degenerate[node] || !fd::is_interior(grid, node, 2) {
            continue;
        }
        let Some(k) = brioschi(grid, &e, &f, &g, node) else {
            continue;
        };
        sampled += 1;
        k_dev = k_dev.max((k - 1.0).abs());
        k_sum += k;

        let d1e2 = Mat::from_vec(codim, codim, fd::d1(grid, &eta_flat[1], node, 0));
        let d2e1 = Mat::from_vec(codim, codim, fd::d1(grid, &eta_flat[0], node, 1));
        let r = d1e2 - d2e1 + &eta[node][0] * &eta[node][1] - &eta[node][1] * &eta[node][0];
        normal_res = normal_res.max(r.amax());

        let jac = &im.psi_jacobian[node];
        let Some(jinv) = jac.clone().try_inverse() else {
            continue;
        };
        let hess: Vec<Vec<Vec<f64>>> = (0..2)
            .map(|i| {
                (0..2)
                    .map(|j| fd::d2(grid, &im.phi, node, i, j).expect("interior node"))
                    .collect()
            })
            .collect();
        for nu in &im.normals[node] {
            let ii = Mat::from_fn(2, 2, |i, j| space.inner(&hess[i][j], nu));
            let ii_psi = jinv.transpose() * ii * &jinv;
            off = off.max(ii_psi[(0, 1)].abs());
            diag = diag.max(ii_psi[(0, 0)].abs()).max(ii_psi[(1, 1)].abs());
        }
    }
    if sampled == 0 {
        return Err(Error::NonImmersive);
    }
    Ok(GeometryReport {
        mu: im.mu,
        gauss_curvature_deviation: k_dev,
        mean_gauss_curvature: k_sum / sampled as f64,
        normal_curvature_residual: normal_res,
        second_form_off_diagonal: if diag > 0.0 { off / diag } else { 0.0 },
        degenerate_nodes: im.degenerate_count(),
        sampled_nodes: sampled,
    })
}
